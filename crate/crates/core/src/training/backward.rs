//! Reverse-mode gradients of the mean batch loss over the fixed CSRN graph.

use rayon::prelude::*;

use crate::embeddings::EmbeddingTable;
use crate::error::{invalid, Error, Result};
use crate::model::{
    attend, attend_backward, attend_trace, decode, decode_backward, decode_trace, gru_backward, gru_encode, gru_trace,
    DecoderMasks, GruTrace, ModelDims, ModelParams, NeighborContext,
};
use crate::numerics::{axpy, dot, SeededRng};

use super::loss::{loss_and_grad, LossKind};

/// What is being minimized.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Objective {
    pub kind: LossKind,
    pub score_reg: f64,
    pub weight_decay: f64,
    pub neighbor_off: bool,
}

/// One prediction: a target sequence, neighbor sequences with their edge
/// features, a positive item and its negatives. Sequences are indices into
/// [`Batch::sequences`] so identical (user, timestamp) encodings are shared.
#[derive(Debug, Clone, PartialEq)]
pub struct BatchExample {
    pub target: usize,
    pub neighbors: Vec<usize>,
    pub edges: Vec<Vec<f64>>,
    pub positive: u32,
    pub negatives: Vec<u32>,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Batch {
    /// Item-id input sequences, oldest first.
    pub sequences: Vec<Vec<u32>>,
    pub examples: Vec<BatchExample>,
}

/// Inverted-dropout multipliers: one `len × D_v` mask per sequence and one
/// decoder mask pair per example.
#[derive(Debug, Clone, PartialEq)]
pub struct BatchMasks {
    pub inputs: Vec<Vec<Vec<f64>>>,
    pub decoder: Vec<DecoderMasks>,
}

fn dropout_mask(rng: &mut SeededRng, n: usize, rate: f64) -> Vec<f64> {
    if rate == 0.0 {
        return vec![1.0; n];
    }
    let keep = 1.0 / (1.0 - rate);
    (0..n).map(|_| if rng.uniform() < rate { 0.0 } else { keep }).collect()
}

impl BatchMasks {
    pub fn draw(batch: &Batch, dims: &ModelDims, input_rate: f64, decoder_rate: f64, seed: u64) -> Result<Self> {
        for r in [input_rate, decoder_rate] {
            if !(0.0..1.0).contains(&r) {
                return invalid(format!("dropout rate {r} outside [0, 1)"));
            }
        }
        let inputs = batch
            .sequences
            .iter()
            .enumerate()
            .map(|(s, seq)| {
                let mut rng = SeededRng::derived(seed, s as u64);
                (0..seq.len()).map(|_| dropout_mask(&mut rng, dims.embed, input_rate)).collect()
            })
            .collect();
        let decoder = (0..batch.examples.len())
            .map(|e| {
                let mut rng = SeededRng::derived(seed, (1u64 << 40) + e as u64);
                DecoderMasks {
                    hidden: dropout_mask(&mut rng, dims.hidden, decoder_rate),
                    summary: dropout_mask(&mut rng, dims.summary(), decoder_rate),
                }
            })
            .collect();
        Ok(BatchMasks { inputs, decoder })
    }
}

fn validate(params: &ModelParams, emb: &EmbeddingTable, batch: &Batch, obj: &Objective) -> Result<()> {
    let d = params.dims;
    if !params.is_finite() {
        return Err(Error::NonFinite {
            example: 0,
            detail: "parameters contain non-finite values before the pass".into(),
        });
    }
    if emb.dim() != d.embed {
        return invalid(format!("embedding dim {} != model embed dim {}", emb.dim(), d.embed));
    }
    let n_items = emb.num_items() as u32;
    for seq in &batch.sequences {
        if seq.len() > d.window || seq.iter().any(|&j| j >= n_items) {
            return invalid("batch sequence too long or has an unknown item");
        }
    }
    for (i, ex) in batch.examples.iter().enumerate() {
        if ex.target >= batch.sequences.len() || ex.neighbors.iter().any(|&s| s >= batch.sequences.len()) {
            return invalid(format!("example {i} references a missing sequence"));
        }
        if ex.negatives.is_empty() {
            return invalid(format!("example {i} has no negatives"));
        }
        if ex.positive >= n_items || ex.negatives.iter().any(|&j| j >= n_items) {
            return invalid(format!("example {i} has an unknown candidate item"));
        }
        if !obj.neighbor_off {
            if ex.neighbors.is_empty() {
                return Err(Error::Contract(format!("example {i} has no neighbors")));
            }
            if ex.edges.len() != ex.neighbors.len() || ex.edges.iter().any(|e| e.len() != d.edge) {
                return invalid(format!("example {i} edge features do not match"));
            }
        }
    }
    Ok(())
}

fn inputs<'a>(emb: &'a EmbeddingTable, seq: &[u32]) -> Vec<&'a [f64]> {
    seq.iter().map(|&j| emb.vector(j)).collect()
}

fn candidate_scores(q: &[f64], emb: &EmbeddingTable, ex: &BatchExample) -> (f64, Vec<f64>) {
    let r = dot(q, emb.vector(ex.positive));
    let negs = ex.negatives.iter().map(|&j| dot(q, emb.vector(j))).collect();
    (r, negs)
}

fn check_finite(value: f64, example: usize) -> Result<()> {
    if value.is_finite() {
        Ok(())
    } else {
        Err(Error::NonFinite {
            example,
            detail: format!("loss = {value}"),
        })
    }
}

/// Mean batch loss plus `(weight_decay / 2)·‖θ‖²`, forward only.
pub fn batch_loss(
    params: &ModelParams,
    emb: &EmbeddingTable,
    batch: &Batch,
    masks: Option<&BatchMasks>,
    obj: &Objective,
) -> Result<f64> {
    validate(params, emb, batch, obj)?;
    let encode = |s: usize| {
        let seq = inputs(emb, &batch.sequences[s]);
        gru_encode(params, &seq, masks.map(|m| m.inputs[s].as_slice()))
    };
    let mut total = 0.0;
    for (i, ex) in batch.examples.iter().enumerate() {
        let h = encode(ex.target)?;
        let n = if obj.neighbor_off {
            vec![0.0; params.dims.summary()]
        } else {
            let ctx = NeighborContext {
                neighbors: Vec::new(),
                hidden: ex.neighbors.iter().map(|&s| encode(s)).collect::<Result<_>>()?,
                edges: ex.edges.clone(),
            };
            attend(&h, &ctx, params)?.summary
        };
        let q = decode(&h, &n, params, masks.map(|m| &m.decoder[i]))?;
        let (r, negs) = candidate_scores(&q, emb, ex);
        let l = super::loss::loss(obj.kind, r, &negs, obj.score_reg)?;
        check_finite(l, i)?;
        total += l;
    }
    let n = batch.examples.len().max(1) as f64;
    Ok(total / n + 0.5 * obj.weight_decay * params.squared_norm())
}

const EXAMPLE_CHUNK: usize = 16;
const SEQUENCE_CHUNK: usize = 32;

struct ChunkOut {
    loss: f64,
    grads: ModelParams,
    d_hidden: Vec<(usize, Vec<f64>)>,
}

/// Loss (as [`batch_loss`]) and its gradient for every parameter block.
///
/// Work is split into fixed-size chunks reduced in a fixed order, so the
/// result is bitwise identical for any thread count.
pub fn backward(
    params: &ModelParams,
    emb: &EmbeddingTable,
    batch: &Batch,
    masks: Option<&BatchMasks>,
    obj: &Objective,
) -> Result<(f64, ModelParams)> {
    validate(params, emb, batch, obj)?;
    let n_seq = batch.sequences.len();
    let n_ex = batch.examples.len();
    let scale = 1.0 / n_ex.max(1) as f64;

    let mut needed = vec![false; n_seq];
    for ex in &batch.examples {
        needed[ex.target] = true;
        if !obj.neighbor_off {
            ex.neighbors.iter().for_each(|&s| needed[s] = true);
        }
    }
    let traces: Vec<Option<GruTrace>> = (0..n_seq)
        .into_par_iter()
        .map(|s| {
            needed[s].then(|| {
                let seq = inputs(emb, &batch.sequences[s]);
                gru_trace(params, &seq, masks.map(|m| m.inputs[s].as_slice()))
            })
        })
        .collect();
    let hidden = |s: usize| traces[s].as_ref().map(|t| t.hidden.as_slice()).unwrap_or(&[]);

    let chunks: Vec<Result<ChunkOut>> = (0..n_ex)
        .step_by(EXAMPLE_CHUNK)
        .collect::<Vec<_>>()
        .into_par_iter()
        .map(|start| {
            let mut out = ChunkOut {
                loss: 0.0,
                grads: params.zeros_like(),
                d_hidden: Vec::new(),
            };
            for i in start..(start + EXAMPLE_CHUNK).min(n_ex) {
                let ex = &batch.examples[i];
                let h = hidden(ex.target);
                let nb_hidden: Vec<&[f64]> = ex.neighbors.iter().map(|&s| hidden(s)).collect();
                let nb_edges: Vec<&[f64]> = ex.edges.iter().map(Vec::as_slice).collect();
                let att = (!obj.neighbor_off).then(|| attend_trace(params, h, &nb_hidden, &nb_edges));
                let zeros;
                let n: &[f64] = match &att {
                    Some(a) => &a.summary,
                    None => {
                        zeros = vec![0.0; params.dims.summary()];
                        &zeros
                    }
                };
                let dmask = masks.map(|m| &m.decoder[i]);
                let dec = decode_trace(params, h, n, dmask);
                let (r, negs) = candidate_scores(&dec.q, emb, ex);
                let (l, dr, dn) = loss_and_grad(obj.kind, r, &negs, obj.score_reg)?;
                check_finite(l, i)?;
                out.loss += l;

                let mut d_q = vec![0.0; params.dims.embed];
                axpy(dr * scale, emb.vector(ex.positive), &mut d_q);
                for (&j, d) in ex.negatives.iter().zip(&dn) {
                    axpy(d * scale, emb.vector(j), &mut d_q);
                }
                let (mut d_h, d_n) = decode_backward(params, &dec, &d_q, dmask, &mut out.grads);
                if let Some(a) = &att {
                    let mut d_nb = vec![vec![0.0; params.dims.hidden]; ex.neighbors.len()];
                    attend_backward(params, a, h, &nb_hidden, &nb_edges, &d_n, &mut out.grads, &mut d_h, &mut d_nb);
                    out.d_hidden.extend(ex.neighbors.iter().copied().zip(d_nb));
                }
                out.d_hidden.push((ex.target, d_h));
            }
            Ok(out)
        })
        .collect();

    let mut loss = 0.0;
    let mut grads = params.zeros_like();
    let mut d_hidden: Vec<Option<Vec<f64>>> = vec![None; n_seq];
    for c in chunks {
        let c = c?;
        loss += c.loss;
        grads.add_scaled(1.0, &c.grads);
        for (s, d) in c.d_hidden {
            match &mut d_hidden[s] {
                Some(acc) => axpy(1.0, &d, acc),
                slot @ None => *slot = Some(d),
            }
        }
    }

    let seq_ids: Vec<usize> = (0..n_seq).filter(|&s| d_hidden[s].is_some()).collect();
    let gru_parts: Vec<ModelParams> = seq_ids
        .par_chunks(SEQUENCE_CHUNK)
        .map(|ids| {
            let mut g = params.zeros_like();
            for &s in ids {
                if let (Some(t), Some(d)) = (&traces[s], &d_hidden[s]) {
                    gru_backward(&params.gru, t, d, &mut g.gru);
                }
            }
            g
        })
        .collect();
    for g in &gru_parts {
        grads.add_scaled(1.0, g);
    }

    grads.add_scaled(obj.weight_decay, params);
    let total = loss / n_ex.max(1) as f64 + 0.5 * obj.weight_decay * params.squared_norm();
    Ok((total, grads))
}
