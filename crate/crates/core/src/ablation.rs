//! Desk-scale ablation on a synthetic burst corpus: the full model, the
//! GRU-only model and the model with random neighbors, each trained on the
//! same split and scored on the same frozen test candidates.

use std::time::Instant;

use crate::coread::{build_network, NetworkConfig};
use crate::corpus::{split, SplitConfig};
use crate::error::Result;
use crate::evalbench::{evaluate, freeze_candidates, CausalContext, CsrnScorer, FreezeConfig, Metrics, DEFAULT_KS};
use crate::model::{Checkpoint, ModelDims};
use crate::synthgen::{generate, SynthConfig};
use crate::training::{train, LogRow, OptimizerConfig, TrainConfig, TrainData};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Variant {
    Csrn,
    Gru,
    RandomNeighbors,
}

impl Variant {
    pub const ALL: [Variant; 3] = [Variant::Csrn, Variant::Gru, Variant::RandomNeighbors];

    pub fn name(self) -> &'static str {
        match self {
            Variant::Csrn => "csrn",
            Variant::Gru => "gru",
            Variant::RandomNeighbors => "random",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AblationConfig {
    pub synth: SynthConfig,
    /// Fractions of the time span for history, train and validation.
    pub split: (f64, f64, f64),
    pub network: NetworkConfig,
    pub dims: ModelDims,
    pub train: TrainConfig,
    pub test_clicks: Option<usize>,
}

impl AblationConfig {
    /// The configuration used for the ablation acceptance runs: the default
    /// synthetic corpus with a model small enough for one CPU core.
    pub fn desk(seed: u64, epochs: usize) -> Self {
        AblationConfig {
            synth: SynthConfig { seed, ..Default::default() },
            split: (0.5, 0.35, 0.075),
            network: NetworkConfig { neighbors: 10, seed, ..Default::default() },
            dims: ModelDims { hidden: 32, edge: 96, channel: 16, heads: 2, embed: 32, window: 10 },
            train: TrainConfig {
                batch_size: 64,
                epochs,
                seed,
                optimizer: OptimizerConfig { lr: 1e-3, ..Default::default() },
                max_examples_per_epoch: Some(20_000),
                val_max_clicks: Some(1000),
                patience: 0,
                ..Default::default()
            },
            test_clicks: Some(2000),
        }
    }
}

#[derive(Debug, Clone)]
pub struct VariantResult {
    pub variant: Variant,
    pub test: Metrics,
    pub best_epoch: usize,
    pub log: Vec<LogRow>,
    pub checkpoint: Checkpoint,
    pub seconds: f64,
}

pub fn run_ablation(cfg: &AblationConfig, variants: &[Variant]) -> Result<Vec<VariantResult>> {
    let corpus = generate(&cfg.synth)?;
    let full = &corpus.stream;
    let (h, t, v) = cfg.split;
    let parts = split(full, &SplitConfig::proportional(full, h, t, v)?)?;
    let net = build_network(&parts.history, &cfg.network)?;
    let random_net = net.with_random_neighbors(cfg.network.seed);
    let dims = ModelDims { edge: net.edge_dim(), embed: corpus.embeddings.dim(), ..cfg.dims };
    let covered = vec![true; full.num_items()];
    let freeze = FreezeConfig {
        sampler: cfg.train.sampler,
        max_clicks: cfg.test_clicks,
        seed: cfg.train.seed,
        ..Default::default()
    };
    let (test_set, _) = freeze_candidates(&parts.test, full, &covered, &freeze)?;
    let ctx = CausalContext::new(full, dims.window);

    let mut out = Vec::new();
    for &variant in variants {
        let start = Instant::now();
        let (network, off) = match variant {
            Variant::Csrn => (&net, false),
            Variant::Gru => (&net, true),
            Variant::RandomNeighbors => (&random_net, false),
        };
        let data = TrainData { full, split: &parts, net: network, embeddings: &corpus.embeddings };
        let trained = train(&data, dims, &TrainConfig { neighbor_off: off, ..cfg.train.clone() }, variant.name())?;
        let scorer = CsrnScorer {
            name: variant.name().into(),
            params: &trained.checkpoint.params,
            net: network,
            embeddings: &corpus.embeddings,
            neighbor_off: off,
        };
        let report = evaluate(&scorer, &test_set, &ctx, &DEFAULT_KS)?;
        out.push(VariantResult {
            variant,
            test: report.metrics,
            best_epoch: trained.best_epoch,
            log: trained.log,
            checkpoint: trained.checkpoint,
            seconds: start.elapsed().as_secs_f64(),
        });
    }
    Ok(out)
}
