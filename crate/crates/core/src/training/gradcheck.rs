//! Finite-difference check of [`backward`] on a small random fixture.

use crate::embeddings::EmbeddingTable;
use crate::error::Result;
use crate::model::{ModelDims, ModelParams};
use crate::numerics::{DenseMatrix, SeededRng};

use super::backward::{backward, batch_loss, Batch, BatchExample, BatchMasks, Objective};
use super::loss::LossKind;

/// Central-difference step.
pub const FD_STEP: f64 = 1e-5;
/// Relative errors are taken against `max(|analytic|, |numeric|, REL_FLOOR)`.
pub const REL_FLOOR: f64 = 1e-6;

/// Small model and batch: 2 target users, 3 neighbors each, 4 negatives.
#[derive(Debug, Clone)]
pub struct GradcheckFixture {
    pub params: ModelParams,
    pub embeddings: EmbeddingTable,
    pub batch: Batch,
    pub masks: BatchMasks,
}

pub fn fixture_dims() -> ModelDims {
    ModelDims {
        hidden: 8,
        edge: 6,
        channel: 4,
        heads: 2,
        embed: 10,
        window: 4,
    }
}

pub fn fixture(seed: u64) -> Result<GradcheckFixture> {
    let dims = fixture_dims();
    let mut rng = SeededRng::new(seed);
    let mut params = ModelParams::init(dims, seed)?;
    // nonzero biases so every block carries signal
    for t in params.tensors_mut() {
        if t.cols() == 1 || t.len() == 1 {
            t.as_mut_slice().iter_mut().for_each(|v| *v = 0.1 * rng.gaussian());
        }
    }
    let n_items = 16;
    let embeddings = EmbeddingTable::new(
        DenseMatrix::from_fn(n_items, dims.embed, |_, _| 0.5 * rng.gaussian()),
        vec![true; n_items],
    )?;
    let mut batch = Batch::default();
    let new_seq = |rng: &mut SeededRng, batch: &mut Batch| {
        let len = 1 + rng.below(dims.window);
        batch.sequences.push((0..len).map(|_| rng.below(n_items) as u32).collect());
        batch.sequences.len() - 1
    };
    for _ in 0..2 {
        let target = new_seq(&mut rng, &mut batch);
        let neighbors: Vec<usize> = (0..3).map(|_| new_seq(&mut rng, &mut batch)).collect();
        let edges = (0..3)
            .map(|_| (0..dims.edge).map(|_| 0.5 * rng.gaussian()).collect())
            .collect();
        let mut items: Vec<u32> = (0..n_items as u32).collect();
        rng.shuffle(&mut items);
        batch.examples.push(BatchExample {
            target,
            neighbors,
            edges,
            positive: items[0],
            negatives: items[1..5].to_vec(),
        });
    }
    let masks = BatchMasks::draw(&batch, &dims, 0.15, 0.2, seed ^ 0x5eed)?;
    Ok(GradcheckFixture {
        params,
        embeddings,
        batch,
        masks,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct BlockError {
    pub block: String,
    pub max_rel: f64,
    pub max_abs: f64,
}

/// Compares analytic gradients to central differences for every scalar.
pub fn gradcheck(fx: &GradcheckFixture, obj: &Objective) -> Result<Vec<BlockError>> {
    let (_, grads) = backward(&fx.params, &fx.embeddings, &fx.batch, Some(&fx.masks), obj)?;
    let mut probe = fx.params.clone();
    let names = ModelParams::block_names(&fx.params.dims);
    let mut report = Vec::with_capacity(names.len());
    for (b, name) in names.into_iter().enumerate() {
        let analytic = grads.tensors()[b].as_slice().to_vec();
        let mut max_rel = 0.0f64;
        let mut max_abs = 0.0f64;
        for (k, &a) in analytic.iter().enumerate() {
            let orig = probe.tensors()[b].as_slice()[k];
            probe.tensors_mut()[b].as_mut_slice()[k] = orig + FD_STEP;
            let up = batch_loss(&probe, &fx.embeddings, &fx.batch, Some(&fx.masks), obj)?;
            probe.tensors_mut()[b].as_mut_slice()[k] = orig - FD_STEP;
            let down = batch_loss(&probe, &fx.embeddings, &fx.batch, Some(&fx.masks), obj)?;
            probe.tensors_mut()[b].as_mut_slice()[k] = orig;
            let numeric = (up - down) / (2.0 * FD_STEP);
            let abs = (a - numeric).abs();
            max_abs = max_abs.max(abs);
            max_rel = max_rel.max(abs / a.abs().max(numeric.abs()).max(REL_FLOOR));
        }
        report.push(BlockError {
            block: name,
            max_rel,
            max_abs,
        });
    }
    Ok(report)
}

/// Default objective used by the fixture check.
pub fn fixture_objective(kind: LossKind) -> Objective {
    Objective {
        kind,
        score_reg: 1.0,
        weight_decay: 1e-5,
        neighbor_off: false,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn all_losses_pass_on_fixture() {
        let fx = fixture(7).unwrap();
        for kind in LossKind::ALL {
            let rep = gradcheck(&fx, &fixture_objective(kind)).unwrap();
            for b in &rep {
                assert!(b.max_rel <= 1e-4, "{kind} {} rel {} abs {}", b.block, b.max_rel, b.max_abs);
            }
        }
    }
}
