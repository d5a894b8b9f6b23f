use std::collections::HashMap;

use crate::coread::CoReadNetwork;
use crate::corpus::EventStream;
use crate::embeddings::EmbeddingTable;
use crate::error::{Error, Result};
use crate::model::{forward, gru_encode, ForwardOptions, ModelParams, NeighborContext};
use crate::numerics::{cosine, derive_seed, tfidf, SparseBinaryMatrix};

use super::context::{CausalContext, Scorer};

fn top_m(mut scored: Vec<(u32, f64)>, m: usize) -> Vec<(u32, f64)> {
    scored.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
    scored.truncate(m);
    scored.sort_by_key(|p| p.0);
    scored
}

fn lookup(list: &[(u32, f64)], key: u32) -> Option<f64> {
    list.binary_search_by_key(&key, |p| p.0).ok().map(|i| list[i].1)
}

/// Item popularity: click counts in a fixed window.
#[derive(Debug, Clone)]
pub struct PopScorer {
    counts: Vec<u64>,
}

impl PopScorer {
    pub fn new(train: &EventStream) -> Self {
        PopScorer {
            counts: train.item_counts(),
        }
    }
}

impl Scorer for PopScorer {
    fn name(&self) -> &str {
        "pop"
    }

    fn score(&self, _: &CausalContext<'_>, _: u32, _: i64, items: &[u32]) -> Result<Vec<f64>> {
        Ok(items.iter().map(|&j| self.counts[j as usize] as f64).collect())
    }
}

/// Sum over the user's recent items of embedding cosine, restricted to each
/// recent item's top-M most similar items.
#[derive(Debug, Clone)]
pub struct ItemCfScorer {
    neighbors: Vec<Vec<(u32, f64)>>,
}

impl ItemCfScorer {
    pub fn new(emb: &EmbeddingTable, m: usize) -> Result<Self> {
        if emb.coverage() == 0 || emb.dim() == 0 {
            return Err(Error::Config("ItemCF needs item embeddings; none are covered".into()));
        }
        let n = emb.num_items();
        let neighbors = (0..n as u32)
            .map(|a| {
                if !emb.is_covered(a) {
                    return Vec::new();
                }
                let scored = (0..n as u32)
                    .filter(|&b| b != a && emb.is_covered(b))
                    .map(|b| (b, cosine(emb.vector(a), emb.vector(b))))
                    .collect();
                top_m(scored, m)
            })
            .collect();
        Ok(ItemCfScorer { neighbors })
    }
}

impl Scorer for ItemCfScorer {
    fn name(&self) -> &str {
        "itemcf"
    }

    fn score(&self, ctx: &CausalContext<'_>, user: u32, ts: i64, items: &[u32]) -> Result<Vec<f64>> {
        let recent = ctx.recent_items(user, ts);
        Ok(items
            .iter()
            .map(|&j| {
                recent
                    .iter()
                    .filter_map(|&r| lookup(&self.neighbors[r as usize], j))
                    .sum()
            })
            .collect())
    }
}

/// Sum over the user's top-M most similar users (cosine of TF-IDF rows) of
/// similarity times whether that user read the item before the query time.
#[derive(Debug, Clone)]
pub struct UserCfScorer {
    neighbors: Vec<Vec<(u32, f64)>>,
}

impl UserCfScorer {
    pub fn new(source: &EventStream, m: usize) -> Result<Self> {
        let n_users = source.num_users();
        let rows: Vec<Vec<u32>> = (0..n_users as u32)
            .map(|u| source.user_events(u).iter().map(|e| e.item).collect())
            .collect();
        let w = tfidf(&SparseBinaryMatrix::from_rows(source.num_items(), rows)?);
        let norms: Vec<f64> = (0..n_users)
            .map(|i| w.row(i).1.iter().map(|v| v * v).sum::<f64>().sqrt())
            .collect();
        let wt = w.transpose();
        let neighbors = (0..n_users)
            .map(|i| {
                let mut acc: HashMap<u32, f64> = HashMap::new();
                let (cols, vals) = w.row(i);
                for (&j, &a) in cols.iter().zip(vals) {
                    let (users, ws) = wt.row(j as usize);
                    for (&k, &b) in users.iter().zip(ws) {
                        if k as usize != i {
                            *acc.entry(k).or_insert(0.0) += a * b;
                        }
                    }
                }
                let scored = acc
                    .into_iter()
                    .map(|(k, d)| (k, d / (norms[i] * norms[k as usize])))
                    .collect();
                top_m(scored, m)
            })
            .collect();
        Ok(UserCfScorer { neighbors })
    }

    pub fn neighbors(&self, user: u32) -> &[(u32, f64)] {
        &self.neighbors[user as usize]
    }
}

impl Scorer for UserCfScorer {
    fn name(&self) -> &str {
        "usercf"
    }

    fn score(&self, ctx: &CausalContext<'_>, user: u32, ts: i64, items: &[u32]) -> Result<Vec<f64>> {
        let nb = &self.neighbors[user as usize];
        Ok(items
            .iter()
            .map(|&j| nb.iter().filter(|(k, _)| ctx.read_before(*k, j, ts)).map(|(_, s)| s).sum())
            .collect())
    }
}

/// Deterministic pseudo-random scores, a uniform-rank control.
#[derive(Debug, Clone, Copy)]
pub struct RandomScorer {
    pub seed: u64,
}

impl Scorer for RandomScorer {
    fn name(&self) -> &str {
        "random"
    }

    fn score(&self, _: &CausalContext<'_>, user: u32, ts: i64, items: &[u32]) -> Result<Vec<f64>> {
        let base = derive_seed(self.seed, ((user as u64) << 32) ^ ts as u64);
        Ok(items
            .iter()
            .map(|&j| (derive_seed(base, j as u64) >> 11) as f64 / (1u64 << 53) as f64)
            .collect())
    }
}

/// The full model; with `neighbor_off` it is the GRU-only baseline.
pub struct CsrnScorer<'a> {
    pub name: String,
    pub params: &'a ModelParams,
    pub net: &'a CoReadNetwork,
    pub embeddings: &'a EmbeddingTable,
    pub neighbor_off: bool,
}

impl CsrnScorer<'_> {
    fn encode(&self, ctx: &CausalContext<'_>, user: u32, ts: i64) -> Result<Vec<f64>> {
        let items = ctx.recent_items(user, ts);
        let inputs: Vec<&[f64]> = items.iter().map(|&j| self.embeddings.vector(j)).collect();
        gru_encode(self.params, &inputs, None)
    }
}

impl Scorer for CsrnScorer<'_> {
    fn name(&self) -> &str {
        &self.name
    }

    fn score(&self, ctx: &CausalContext<'_>, user: u32, ts: i64, items: &[u32]) -> Result<Vec<f64>> {
        let recent = ctx.recent_items(user, ts);
        let target: Vec<&[f64]> = recent.iter().map(|&j| self.embeddings.vector(j)).collect();
        let nctx = if self.neighbor_off {
            NeighborContext::default()
        } else {
            let neighbors = self.net.neighbors(user).to_vec();
            NeighborContext {
                hidden: neighbors.iter().map(|&k| self.encode(ctx, k, ts)).collect::<Result<_>>()?,
                edges: neighbors.iter().map(|&k| self.net.edge_features(user, k)).collect(),
                neighbors,
            }
        };
        let cands: Vec<&[f64]> = items.iter().map(|&j| self.embeddings.vector(j)).collect();
        forward(
            self.params,
            &target,
            &nctx,
            &cands,
            ForwardOptions {
                neighbor_off: self.neighbor_off,
                ..Default::default()
            },
        )
    }
}
