//! Flat `key = value` pipeline configuration shared by every stage.

use std::collections::BTreeMap;
use std::fmt::Display;
use std::str::FromStr;

use sha2::{Digest, Sha256};

use crate::coread::NetworkConfig;
use crate::corpus::{EventStream, SplitConfig};
use crate::error::{Error, Result};
use crate::evalbench::FreezeConfig;
use crate::model::ModelDims;
use crate::synthgen::SynthConfig;
use crate::training::{LossKind, OptimizerConfig, SamplerConfig, TrainConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NeighborMode {
    Similarity,
    Random,
    Permuted,
}

impl FromStr for NeighborMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "similarity" => Ok(NeighborMode::Similarity),
            "random" => Ok(NeighborMode::Random),
            "permuted" => Ok(NeighborMode::Permuted),
            _ => Err(Error::Config(format!("unknown neighbor mode {s:?} (similarity, random, permuted)"))),
        }
    }
}

impl Display for NeighborMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            NeighborMode::Similarity => "similarity",
            NeighborMode::Random => "random",
            NeighborMode::Permuted => "permuted",
        })
    }
}

/// Every tunable of the pipeline. Defaults follow the reference settings;
/// see [`PipelineConfig::KEYS`] for the file keys.
#[derive(Debug, Clone, PartialEq)]
pub struct PipelineConfig {
    pub seed: u64,
    // corpus
    pub min_dwell: i64,
    pub top_k_users: usize,
    pub history_frac: f64,
    pub train_frac: f64,
    pub valid_frac: f64,
    // synthetic corpus
    pub synth: SynthConfig,
    // network
    pub rank: usize,
    pub neighbors: usize,
    pub tfidf: bool,
    pub neighbor_mode: NeighborMode,
    // model
    pub hidden: usize,
    pub channel: usize,
    pub heads: usize,
    pub window: usize,
    pub fallback_dim: usize,
    // training
    pub loss: LossKind,
    pub score_reg: f64,
    pub negatives: usize,
    pub batch_size: usize,
    pub lr: f64,
    pub lr_decay: f64,
    pub decay_interval: u64,
    pub clip_norm: f64,
    pub weight_decay: f64,
    pub input_dropout: f64,
    pub decoder_dropout: f64,
    pub epochs: usize,
    pub patience: usize,
    pub max_examples: usize,
    pub val_max_clicks: usize,
    pub neighbor_off: bool,
    // sampling and evaluation
    pub pool_window: i64,
    pub uniform_negatives: bool,
    pub eval_max_clicks: usize,
    pub itemcf_m: usize,
    pub usercf_m: usize,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        let t = TrainConfig::default();
        let n = NetworkConfig::default();
        let d = ModelDims::default();
        PipelineConfig {
            seed: 0,
            min_dwell: 0,
            top_k_users: 0,
            history_frac: 0.5,
            train_frac: 0.35,
            valid_frac: 0.075,
            synth: SynthConfig::default(),
            rank: n.rank,
            neighbors: n.neighbors,
            tfidf: n.use_tfidf,
            neighbor_mode: NeighborMode::Similarity,
            hidden: d.hidden,
            channel: d.channel,
            heads: d.heads,
            window: d.window,
            fallback_dim: 32,
            loss: t.loss,
            score_reg: t.score_reg,
            negatives: t.negatives,
            batch_size: t.batch_size,
            lr: t.optimizer.lr,
            lr_decay: t.optimizer.lr_decay,
            decay_interval: t.optimizer.decay_interval,
            clip_norm: t.optimizer.clip_norm,
            weight_decay: t.weight_decay,
            input_dropout: t.input_dropout,
            decoder_dropout: t.decoder_dropout,
            epochs: t.epochs,
            patience: t.patience,
            max_examples: 0,
            val_max_clicks: t.val_max_clicks.unwrap_or(0),
            neighbor_off: false,
            pool_window: t.sampler.window,
            uniform_negatives: t.sampler.uniform,
            eval_max_clicks: 0,
            itemcf_m: 50,
            usercf_m: 50,
        }
    }
}

fn parse<T: FromStr>(key: &str, v: &str) -> Result<T>
where
    T::Err: Display,
{
    v.trim()
        .parse::<T>()
        .map_err(|e| Error::Config(format!("{key}: cannot parse {v:?}: {e}")))
}

fn limit(n: usize) -> Option<usize> {
    (n > 0).then_some(n)
}

macro_rules! config_keys {
    ($( $key:literal => $($field:ident).+ : $help:literal ),* $(,)?) => {
        impl PipelineConfig {
            /// `(key, description)` for every configuration key, in dump order.
            pub const KEYS: &'static [(&'static str, &'static str)] = &[ $( ($key, $help) ),* ];

            fn set_parsed(&mut self, key: &str, value: &str) -> Result<()> {
                match key {
                    $( $key => self.$($field).+ = parse($key, value)?, )*
                    _ => return Err(Error::Config(format!("unknown configuration key {key:?}"))),
                }
                Ok(())
            }

            fn get_string(&self, key: &str) -> Option<String> {
                match key {
                    $( $key => Some(self.$($field).+.to_string()), )*
                    _ => None,
                }
            }
        }
    };
}

config_keys! {
    "seed" => seed: "master seed for every random stage",
    "min_dwell" => min_dwell: "drop clicks with dwell below this many seconds",
    "top_k_users" => top_k_users: "keep the most active users (0 = all)",
    "history_frac" => history_frac: "share of the time span in the history window",
    "train_frac" => train_frac: "share of the time span in the training window",
    "valid_frac" => valid_frac: "share of the time span in the validation window",
    "synth_users" => synth.users: "synthetic users",
    "synth_items" => synth.items: "synthetic items",
    "synth_clusters" => synth.clusters: "planted user clusters",
    "synth_categories" => synth.categories: "item categories",
    "synth_events_per_user" => synth.events_per_user: "mean clicks per user",
    "synth_burst_rate" => synth.burst_rate: "bursts per cluster per day",
    "synth_burst_decay" => synth.burst_decay: "burst decay time constant (s)",
    "synth_burst_strength" => synth.burst_strength: "burst boost at onset",
    "synth_concentration" => synth.concentration: "home-category weight (inf = disjoint)",
    "synth_preference_jitter" => synth.preference_jitter: "log-scale spread of user category weights",
    "synth_popularity_sigma" => synth.popularity_sigma: "log-scale spread of item popularity",
    "synth_horizon" => synth.horizon: "generated time span (s)",
    "synth_embedding_dim" => synth.embedding_dim: "content-proxy embedding dimension",
    "synth_embedding_noise" => synth.embedding_noise: "item-specific embedding noise",
    "rank" => rank: "SVD rank T",
    "neighbors" => neighbors: "neighbors per user N",
    "tfidf" => tfidf: "TF-IDF weighting before the SVD",
    "neighbor_mode" => neighbor_mode: "similarity | random | permuted",
    "hidden" => hidden: "GRU hidden size",
    "channel" => channel: "per-head channel width",
    "heads" => heads: "attention heads",
    "window" => window: "input sequence length L",
    "fallback_dim" => fallback_dim: "dimension of SVD item vectors when no embedding file is given",
    "loss" => loss: "top1max | bprmax | xe",
    "score_reg" => score_reg: "score regularization weight",
    "negatives" => negatives: "training negatives per example",
    "batch_size" => batch_size: "examples per optimizer step",
    "lr" => lr: "initial learning rate",
    "lr_decay" => lr_decay: "learning-rate multiplier per decay interval",
    "decay_interval" => decay_interval: "optimizer steps per decay",
    "clip_norm" => clip_norm: "global gradient-norm clip (0 = off)",
    "weight_decay" => weight_decay: "L2 weight decay",
    "input_dropout" => input_dropout: "dropout on GRU inputs",
    "decoder_dropout" => decoder_dropout: "dropout on decoder inputs",
    "epochs" => epochs: "training epochs",
    "patience" => patience: "early-stop patience in epochs (0 = off)",
    "max_examples" => max_examples: "training examples per epoch (0 = all)",
    "val_max_clicks" => val_max_clicks: "validation clicks (0 = all)",
    "neighbor_off" => neighbor_off: "disable neighbor information (GRU baseline)",
    "pool_window" => pool_window: "negative pool lookback (s)",
    "uniform_negatives" => uniform_negatives: "sample negatives uniformly instead of by popularity",
    "eval_max_clicks" => eval_max_clicks: "test clicks in frozen candidates (0 = all)",
    "itemcf_m" => itemcf_m: "ItemCF neighbors per item",
    "usercf_m" => usercf_m: "UserCF neighbors per user",
}

impl PipelineConfig {
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        self.set_parsed(key, value)
    }

    pub fn get(&self, key: &str) -> Option<String> {
        self.get_string(key)
    }

    /// Applies a `key = value` file; `#` starts a comment.
    pub fn apply_text(&mut self, text: &str) -> Result<()> {
        for (n, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line.split_once('=').ok_or_else(|| {
                Error::Config(format!("line {}: expected key = value, got {raw:?}", n + 1))
            })?;
            self.set(k.trim(), v.trim())?;
        }
        Ok(())
    }

    /// Every key with its current value, one `key = value` per line.
    pub fn dump(&self) -> String {
        let mut out = String::new();
        for (k, _) in Self::KEYS {
            out.push_str(k);
            out.push_str(" = ");
            out.push_str(&self.get(k).unwrap_or_default());
            out.push('\n');
        }
        out
    }

    pub fn as_map(&self) -> BTreeMap<String, String> {
        Self::KEYS
            .iter()
            .map(|(k, _)| (k.to_string(), self.get(k).unwrap_or_default()))
            .collect()
    }

    /// SHA-256 of [`dump`](Self::dump), hex.
    pub fn hash(&self) -> String {
        hex::encode(Sha256::digest(self.dump().as_bytes()))
    }

    /// `seed=… config_hash=…`, embedded in every artifact.
    pub fn provenance(&self) -> String {
        format!("seed={} config_hash={}", self.seed, self.hash())
    }

    pub fn split_config(&self, stream: &EventStream) -> Result<SplitConfig> {
        let mut sc = SplitConfig::proportional(stream, self.history_frac, self.train_frac, self.valid_frac)?;
        sc.min_dwell = self.min_dwell;
        sc.top_k_users = if self.top_k_users == 0 { usize::MAX } else { self.top_k_users };
        Ok(sc)
    }

    pub fn network_config(&self) -> NetworkConfig {
        NetworkConfig {
            rank: self.rank,
            neighbors: self.neighbors,
            use_tfidf: self.tfidf,
            seed: self.seed,
        }
    }

    pub fn model_dims(&self, edge: usize, embed: usize) -> ModelDims {
        ModelDims {
            hidden: self.hidden,
            edge,
            channel: self.channel,
            heads: self.heads,
            embed,
            window: self.window,
        }
    }

    pub fn sampler_config(&self) -> SamplerConfig {
        SamplerConfig {
            window: self.pool_window,
            uniform: self.uniform_negatives,
        }
    }

    pub fn train_config(&self) -> TrainConfig {
        TrainConfig {
            loss: self.loss,
            score_reg: self.score_reg,
            negatives: self.negatives,
            batch_size: self.batch_size,
            optimizer: OptimizerConfig {
                lr: self.lr,
                lr_decay: self.lr_decay,
                decay_interval: self.decay_interval,
                clip_norm: self.clip_norm,
                ..Default::default()
            },
            weight_decay: self.weight_decay,
            input_dropout: self.input_dropout,
            decoder_dropout: self.decoder_dropout,
            epochs: self.epochs,
            seed: self.seed,
            sampler: self.sampler_config(),
            patience: self.patience,
            max_examples_per_epoch: limit(self.max_examples),
            val_max_clicks: limit(self.val_max_clicks),
            neighbor_off: self.neighbor_off,
        }
    }

    pub fn freeze_config(&self) -> FreezeConfig {
        FreezeConfig {
            sampler: self.sampler_config(),
            max_clicks: limit(self.eval_max_clicks),
            seed: self.seed,
            ..Default::default()
        }
    }

    pub fn synth_config(&self) -> SynthConfig {
        SynthConfig {
            seed: self.seed,
            ..self.synth.clone()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dump_round_trips() {
        let mut c = PipelineConfig::default();
        c.set("lr", "0.002").unwrap();
        c.set("loss", "bprmax").unwrap();
        c.set("synth_concentration", "inf").unwrap();
        let mut back = PipelineConfig::default();
        back.apply_text(&c.dump()).unwrap();
        assert_eq!(back, c);
        assert_eq!(back.hash(), c.hash());
        assert_ne!(back.hash(), PipelineConfig::default().hash());
    }

    #[test]
    fn unknown_and_malformed_rejected() {
        let mut c = PipelineConfig::default();
        assert!(matches!(c.set("learning_rate", "1"), Err(Error::Config(_))));
        assert!(matches!(c.set("epochs", "many"), Err(Error::Config(_))));
        assert!(c.apply_text("lr 0.1").is_err());
        c.apply_text("# comment\n\nlr = 0.5 # trailing\n").unwrap();
        assert_eq!(c.lr, 0.5);
    }

    #[test]
    fn every_key_is_readable() {
        let c = PipelineConfig::default();
        for (k, _) in PipelineConfig::KEYS {
            assert!(c.get(k).is_some(), "{k}");
        }
    }
}
