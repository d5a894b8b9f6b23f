use std::collections::HashMap;
use std::io::Write;

use rayon::prelude::*;

use crate::coread::CoReadNetwork;
use crate::corpus::{EventStream, Split};
use crate::embeddings::EmbeddingTable;
use crate::error::{invalid, Result};
use crate::evalbench::{evaluate, freeze_candidates, CausalContext, CsrnScorer, EvalCandidateSet, FreezeConfig, Metrics};
use crate::model::{Checkpoint, ModelDims, ModelParams};
use crate::numerics::{derive_seed, SeededRng};

use super::backward::{backward, Batch, BatchExample, BatchMasks, Objective};
use super::loss::LossKind;
use super::optimizer::{optimizer_step, OptimizerConfig, OptimizerState};
use super::sampler::{NegativeSampler, SamplerConfig};

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub loss: LossKind,
    pub score_reg: f64,
    /// Negatives per training example, redrawn every epoch.
    pub negatives: usize,
    pub batch_size: usize,
    pub optimizer: OptimizerConfig,
    pub weight_decay: f64,
    pub input_dropout: f64,
    pub decoder_dropout: f64,
    pub epochs: usize,
    pub seed: u64,
    pub sampler: SamplerConfig,
    /// Stop after this many epochs without a validation MRR gain; 0 disables.
    pub patience: usize,
    pub max_examples_per_epoch: Option<usize>,
    pub val_max_clicks: Option<usize>,
    pub neighbor_off: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            loss: LossKind::Top1Max,
            score_reg: 1.0,
            negatives: 32,
            batch_size: 256,
            optimizer: OptimizerConfig::default(),
            weight_decay: 1e-5,
            input_dropout: 0.15,
            decoder_dropout: 0.2,
            epochs: 10,
            seed: 0,
            sampler: SamplerConfig::default(),
            patience: 3,
            max_examples_per_epoch: None,
            val_max_clicks: Some(2000),
            neighbor_off: false,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.batch_size == 0 {
            return invalid("batch size must be at least 1");
        }
        if self.negatives == 0 {
            return invalid("need at least one negative per example");
        }
        let rates = [
            self.score_reg,
            self.optimizer.lr,
            self.optimizer.lr_decay,
            self.optimizer.clip_norm,
            self.weight_decay,
            self.input_dropout,
            self.decoder_dropout,
        ];
        if rates.iter().any(|r| !(r.is_finite() && *r >= 0.0)) {
            return invalid("rates must be finite and non-negative");
        }
        if self.input_dropout >= 1.0 || self.decoder_dropout >= 1.0 {
            return invalid("dropout rates must be below 1");
        }
        Ok(())
    }

    pub fn objective(&self) -> Objective {
        Objective {
            kind: self.loss,
            score_reg: self.score_reg,
            weight_decay: self.weight_decay,
            neighbor_off: self.neighbor_off,
        }
    }
}

/// Everything the loop reads. `full` supplies causal input histories and the
/// negative pool; `split.train` the prediction targets; `split.valid` the
/// validation clicks.
pub struct TrainData<'a> {
    pub full: &'a EventStream,
    pub split: &'a Split,
    pub net: &'a CoReadNetwork,
    pub embeddings: &'a EmbeddingTable,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LogRow {
    pub epoch: usize,
    pub step: u64,
    /// Mean training loss over the epoch; absent for the initial row.
    pub loss: Option<f64>,
    pub val_hr10: f64,
    pub val_mrr: f64,
    pub lr: f64,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct ExampleStats {
    pub examples: usize,
    pub skipped_uncovered: usize,
    pub skipped_rereads: usize,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    /// Best-validation checkpoint (the initial model if nothing improved).
    pub checkpoint: Checkpoint,
    pub best_epoch: usize,
    /// Row 0 holds the initial model's validation metrics.
    pub log: Vec<LogRow>,
    pub examples: ExampleStats,
}

#[derive(Debug, Clone, Copy)]
struct Example {
    user: u32,
    ts: i64,
    positive: u32,
}

fn collect_examples(data: &TrainData<'_>) -> (Vec<Example>, ExampleStats) {
    let mut events: Vec<_> = data.split.train.iter().collect();
    events.sort_by_key(|e| (e.ts, e.seq));
    let mut stats = ExampleStats::default();
    let mut out = Vec::with_capacity(events.len());
    for e in events {
        if !data.embeddings.is_covered(e.item) {
            stats.skipped_uncovered += 1;
        } else if data.full.events_before(e.user, e.ts).iter().any(|p| p.item == e.item) {
            stats.skipped_rereads += 1;
        } else {
            out.push(Example {
                user: e.user,
                ts: e.ts,
                positive: e.item,
            });
        }
    }
    stats.examples = out.len();
    (out, stats)
}

struct BatchBuilder<'a> {
    data: &'a TrainData<'a>,
    window: usize,
    batch: Batch,
    cache: HashMap<(u32, i64), usize>,
}

impl<'a> BatchBuilder<'a> {
    fn sequence(&mut self, user: u32, ts: i64) -> usize {
        if let Some(&s) = self.cache.get(&(user, ts)) {
            return s;
        }
        let seq = self
            .data
            .full
            .last_before(user, ts, self.window)
            .iter()
            .map(|e| e.item)
            .collect();
        self.batch.sequences.push(seq);
        let s = self.batch.sequences.len() - 1;
        self.cache.insert((user, ts), s);
        s
    }
}

fn assemble(
    data: &TrainData<'_>,
    window: usize,
    examples: &[Example],
    negatives: Vec<Vec<u32>>,
    neighbor_off: bool,
) -> Batch {
    let mut b = BatchBuilder {
        data,
        window,
        batch: Batch::default(),
        cache: HashMap::new(),
    };
    for (ex, negs) in examples.iter().zip(negatives) {
        let target = b.sequence(ex.user, ex.ts);
        let (neighbors, edges) = if neighbor_off {
            (Vec::new(), Vec::new())
        } else {
            let ks = data.net.neighbors(ex.user);
            (
                ks.iter().map(|&k| b.sequence(k, ex.ts)).collect(),
                ks.iter().map(|&k| data.net.edge_features(ex.user, k)).collect(),
            )
        };
        b.batch.examples.push(BatchExample {
            target,
            neighbors,
            edges,
            positive: ex.positive,
            negatives: negs,
        });
    }
    b.batch
}

fn validation_metrics(
    params: &ModelParams,
    data: &TrainData<'_>,
    set: &EvalCandidateSet,
    ctx: &CausalContext<'_>,
    neighbor_off: bool,
) -> Result<Metrics> {
    let scorer = CsrnScorer {
        name: "validation".into(),
        params,
        net: data.net,
        embeddings: data.embeddings,
        neighbor_off,
    };
    Ok(evaluate(&scorer, set, ctx, &[10])?.metrics)
}

/// Trains from a seeded initialization, keeping the best-validation-MRR checkpoint.
pub fn train(data: &TrainData<'_>, dims: ModelDims, cfg: &TrainConfig, meta: &str) -> Result<TrainOutcome> {
    cfg.validate()?;
    dims.validate()?;
    if data.embeddings.dim() != dims.embed {
        return invalid(format!("embedding dim {} != model embed dim {}", data.embeddings.dim(), dims.embed));
    }
    if !cfg.neighbor_off && data.net.edge_dim() != dims.edge {
        return invalid(format!("edge dim {} != model edge dim {}", data.net.edge_dim(), dims.edge));
    }
    let mut params = ModelParams::init(dims, cfg.seed)?;
    let mut opt = OptimizerState::new(&params, &cfg.optimizer);
    let snapshot = |params: &ModelParams, opt: &OptimizerState| Checkpoint {
        params: params.clone(),
        seed: cfg.seed,
        meta: meta.to_string(),
        optimizer: Some(opt.snapshot()),
    };
    let (examples, stats) = collect_examples(data);
    if cfg.epochs == 0 {
        return Ok(TrainOutcome {
            checkpoint: snapshot(&params, &opt),
            best_epoch: 0,
            log: Vec::new(),
            examples: stats,
        });
    }
    if examples.is_empty() {
        return invalid("no usable training examples");
    }

    let covered: Vec<bool> = (0..data.embeddings.num_items() as u32)
        .map(|j| data.embeddings.is_covered(j))
        .collect();
    let sampler = NegativeSampler::new(data.full, covered.clone(), cfg.sampler)?;
    let (val_set, _) = freeze_candidates(
        &data.split.valid,
        data.full,
        &covered,
        &FreezeConfig {
            sampler: cfg.sampler,
            max_clicks: cfg.val_max_clicks,
            seed: derive_seed(cfg.seed, 0x7661_6c69),
            ..Default::default()
        },
    )?;
    let ctx = CausalContext::new(data.full, dims.window);
    let user_items: Vec<Vec<u32>> = (0..data.full.num_users() as u32).map(|u| data.full.user_items(u)).collect();
    let objective = cfg.objective();

    let initial = validation_metrics(&params, data, &val_set, &ctx, cfg.neighbor_off)?;
    let mut log = vec![LogRow {
        epoch: 0,
        step: 0,
        loss: None,
        val_hr10: initial.hr_at(10).unwrap_or(0.0),
        val_mrr: initial.mrr,
        lr: opt.lr,
    }];
    let mut best = (initial.mrr, 0usize, snapshot(&params, &opt));
    let mut stale = 0usize;

    for epoch in 1..=cfg.epochs {
        let epoch_seed = derive_seed(cfg.seed, epoch as u64);
        let mut order: Vec<usize> = (0..examples.len()).collect();
        SeededRng::derived(epoch_seed, 0).shuffle(&mut order);
        if let Some(m) = cfg.max_examples_per_epoch {
            order.truncate(m);
        }
        let mut loss_sum = 0.0;
        let mut batches = 0usize;
        for (b, chunk) in order.chunks(cfg.batch_size).enumerate() {
            let picked: Vec<Example> = chunk.iter().map(|&i| examples[i]).collect();
            let negatives = chunk
                .par_iter()
                .zip(&picked)
                .map(|(&i, ex)| {
                    let mut rng = SeededRng::derived(epoch_seed, 1 + i as u64);
                    let context = || format!("user {} at ts {}", data.full.ids().user_id(ex.user), ex.ts);
                    sampler.sample(&context, ex.ts, &user_items[ex.user as usize], ex.positive, cfg.negatives, &mut rng)
                })
                .collect::<Result<Vec<_>>>()?;
            let batch = assemble(data, dims.window, &picked, negatives, cfg.neighbor_off);
            let mask_seed = derive_seed(epoch_seed, (1u64 << 48) + b as u64);
            let masks = BatchMasks::draw(&batch, &dims, cfg.input_dropout, cfg.decoder_dropout, mask_seed)?;
            let (loss, mut grads) = backward(&params, data.embeddings, &batch, Some(&masks), &objective)?;
            optimizer_step(&mut params, &mut grads, &mut opt, &cfg.optimizer)?;
            loss_sum += loss;
            batches += 1;
        }
        let m = validation_metrics(&params, data, &val_set, &ctx, cfg.neighbor_off)?;
        let row = LogRow {
            epoch,
            step: opt.step,
            loss: Some(loss_sum / batches.max(1) as f64),
            val_hr10: m.hr_at(10).unwrap_or(0.0),
            val_mrr: m.mrr,
            lr: opt.lr,
        };
        log::info!(
            "epoch {epoch}: loss {:.6} val_mrr {:.5} val_hr10 {:.5} lr {:.3e}",
            row.loss.unwrap_or(f64::NAN),
            row.val_mrr,
            row.val_hr10,
            row.lr
        );
        log.push(row);
        if m.mrr > best.0 {
            best = (m.mrr, epoch, snapshot(&params, &opt));
            stale = 0;
        } else {
            stale += 1;
            if cfg.patience > 0 && stale >= cfg.patience {
                log::info!("early stop after epoch {epoch}");
                break;
            }
        }
    }
    Ok(TrainOutcome {
        checkpoint: best.2,
        best_epoch: best.1,
        log,
        examples: stats,
    })
}

/// CSV `epoch,step,loss,val_hr10,val_mrr,lr`; the initial row has an empty loss.
pub fn write_log_csv<W: Write>(w: &mut W, log: &[LogRow], meta: &str) -> Result<()> {
    for line in meta.lines() {
        writeln!(w, "# {line}")?;
    }
    writeln!(w, "epoch,step,loss,val_hr10,val_mrr,lr")?;
    for r in log {
        let loss = r.loss.map_or(String::new(), |l| l.to_string());
        writeln!(w, "{},{},{},{},{},{}", r.epoch, r.step, loss, r.val_hr10, r.val_mrr, r.lr)?;
    }
    Ok(())
}
