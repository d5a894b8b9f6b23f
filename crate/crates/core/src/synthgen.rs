//! Synthetic click logs with planted user clusters and cluster-scoped news
//! bursts, plus the ground truth needed to audit what models recover.

use std::io::Write;
use std::sync::Arc;

use rand_distr::{Distribution, LogNormal, Poisson};
use rayon::prelude::*;

use crate::corpus::{ClickEvent, EventStream, IdMaps};
use crate::embeddings::EmbeddingTable;
use crate::error::{invalid, Result};
use crate::numerics::{derive_seed, DenseMatrix, SeededRng};

const DAY: f64 = 86_400.0;
/// Timestamp of the first second of the horizon.
pub const TIME_BASE: i64 = 1_600_000_000;

#[derive(Debug, Clone, PartialEq)]
pub struct SynthConfig {
    pub users: usize,
    pub items: usize,
    pub clusters: usize,
    pub categories: usize,
    pub events_per_user: f64,
    /// Expected bursts per cluster per day.
    pub burst_rate: f64,
    /// Boost decay time constant, seconds.
    pub burst_decay: f64,
    /// Boost at burst onset, relative to the baseline choice mass of 1.
    pub burst_strength: f64,
    /// Weight of a cluster's home categories over the others; infinite makes
    /// the clusters' category sets disjoint.
    pub concentration: f64,
    /// Log-scale spread of per-user category weights.
    pub preference_jitter: f64,
    /// Log-scale spread of item base popularity.
    pub popularity_sigma: f64,
    pub horizon: i64,
    /// Dimension of the emitted content-proxy embeddings.
    pub embedding_dim: usize,
    /// Item-specific noise scale relative to the unit-scale category centroid.
    pub embedding_noise: f64,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            users: 2000,
            items: 1000,
            clusters: 4,
            categories: 20,
            events_per_user: 100.0,
            burst_rate: 1.0,
            burst_decay: DAY,
            burst_strength: 2.0,
            concentration: 20.0,
            preference_jitter: 0.3,
            popularity_sigma: 1.0,
            horizon: 30 * 86_400,
            embedding_dim: 32,
            embedding_noise: 2.0,
            seed: 0,
        }
    }
}

impl SynthConfig {
    /// Clusters read only their own categories.
    pub fn disjoint() -> Self {
        SynthConfig {
            concentration: f64::INFINITY,
            ..Default::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.users == 0 || self.items == 0 || self.clusters == 0 || self.categories == 0 {
            return invalid("users, items, clusters and categories must be positive");
        }
        if self.clusters > self.users || self.categories > self.items {
            return invalid("need clusters <= users and categories <= items");
        }
        if self.categories < self.clusters {
            return invalid("every cluster needs at least one home category");
        }
        if !(self.events_per_user > 0.0) || self.horizon <= 0 {
            return invalid("expected events per user and horizon must be positive");
        }
        if !(self.burst_rate >= 0.0 && self.burst_decay > 0.0 && self.burst_strength >= 0.0) {
            return invalid("burst rate/strength must be >= 0 and decay > 0");
        }
        if !(self.concentration > 0.0) || self.preference_jitter < 0.0 || self.popularity_sigma < 0.0 {
            return invalid("concentration must be > 0, spreads >= 0");
        }
        if self.embedding_dim == 0 {
            return invalid("embedding dim must be positive");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Burst {
    pub item: u32,
    pub cluster: usize,
    pub start: i64,
}

/// Generated stream plus the ground truth that produced it.
#[derive(Debug, Clone)]
pub struct SynthCorpus {
    pub stream: EventStream,
    pub user_cluster: Vec<usize>,
    pub item_category: Vec<usize>,
    pub item_popularity: Vec<f64>,
    /// Row-normalized category preferences per user.
    pub preferences: Vec<Vec<f64>>,
    pub bursts: Vec<Burst>,
    pub embeddings: EmbeddingTable,
}

fn is_home(category: usize, cluster: usize, clusters: usize) -> bool {
    category % clusters == cluster
}

fn weighted_index(weights: &[f64], rng: &mut SeededRng) -> usize {
    let total: f64 = weights.iter().sum();
    let mut x = rng.uniform() * total;
    for (i, w) in weights.iter().enumerate() {
        x -= w;
        if x < 0.0 {
            return i;
        }
    }
    weights.iter().rposition(|w| *w > 0.0).unwrap_or(0)
}

pub fn generate(cfg: &SynthConfig) -> Result<SynthCorpus> {
    cfg.validate()?;
    let mut rng = SeededRng::derived(cfg.seed, 0);
    let g = cfg.clusters;

    // users round-robin over clusters, then shuffled
    let mut user_cluster: Vec<usize> = (0..cfg.users).map(|u| u % g).collect();
    rng.shuffle(&mut user_cluster);
    // every category gets at least one item
    let mut item_category: Vec<usize> = (0..cfg.items).map(|j| j % cfg.categories).collect();
    rng.shuffle(&mut item_category);
    let pop_dist = LogNormal::new(0.0, cfg.popularity_sigma).map_err(|e| crate::Error::InvalidArgument(e.to_string()))?;
    let item_popularity: Vec<f64> = (0..cfg.items).map(|_| pop_dist.sample(rng.inner_mut())).collect();
    let mut by_category: Vec<Vec<u32>> = vec![Vec::new(); cfg.categories];
    for (j, &c) in item_category.iter().enumerate() {
        by_category[c].push(j as u32);
    }

    let preferences: Vec<Vec<f64>> = user_cluster
        .iter()
        .map(|&cl| {
            let w: Vec<f64> = (0..cfg.categories)
                .map(|c| {
                    let base = if is_home(c, cl, g) {
                        if cfg.concentration.is_infinite() {
                            1.0
                        } else {
                            cfg.concentration
                        }
                    } else if cfg.concentration.is_infinite() {
                        0.0
                    } else {
                        1.0
                    };
                    base * (cfg.preference_jitter * rng.gaussian()).exp()
                })
                .collect();
            let s: f64 = w.iter().sum();
            w.into_iter().map(|v| v / s).collect()
        })
        .collect();

    let mut bursts = Vec::new();
    if cfg.burst_rate > 0.0 {
        let horizon_days = cfg.horizon as f64 / DAY;
        for cl in 0..g {
            let home: Vec<u32> = (0..cfg.categories)
                .filter(|&c| is_home(c, cl, g))
                .flat_map(|c| by_category[c].iter().copied())
                .collect();
            if home.is_empty() {
                continue;
            }
            let mut t = 0.0;
            loop {
                t += -rng.uniform().max(f64::MIN_POSITIVE).ln() / cfg.burst_rate;
                if t >= horizon_days {
                    break;
                }
                bursts.push(Burst {
                    item: home[rng.below(home.len())],
                    cluster: cl,
                    start: TIME_BASE + (t * DAY) as i64,
                });
            }
        }
        bursts.sort_by_key(|b| (b.start, b.cluster, b.item));
    }
    let mut cluster_bursts: Vec<Vec<Burst>> = vec![Vec::new(); g];
    for b in &bursts {
        cluster_bursts[b.cluster].push(*b);
    }

    let events_dist = Poisson::new(cfg.events_per_user).map_err(|e| crate::Error::InvalidArgument(e.to_string()))?;
    let per_user: Vec<Vec<(i64, u32)>> = (0..cfg.users)
        .into_par_iter()
        .map(|u| {
            let mut rng = SeededRng::derived(cfg.seed, 1 + u as u64);
            let n = events_dist.sample(rng.inner_mut()) as usize;
            let mut times: Vec<i64> = (0..n).map(|_| TIME_BASE + rng.below(cfg.horizon as usize) as i64).collect();
            times.sort_unstable();
            let pref = &preferences[u];
            let mut read = vec![false; cfg.items];
            let mut out = Vec::with_capacity(n);
            for t in times {
                let active: Vec<(u32, f64)> = cluster_bursts[user_cluster[u]]
                    .iter()
                    .filter(|b| b.start <= t && !read[b.item as usize])
                    .map(|b| (b.item, cfg.burst_strength * (-((t - b.start) as f64) / cfg.burst_decay).exp()))
                    .filter(|(_, w)| *w > 1e-9)
                    .collect();
                let boost: f64 = active.iter().map(|p| p.1).sum();
                let pick = if !active.is_empty() && rng.uniform() < boost / (1.0 + boost) {
                    let w: Vec<f64> = active.iter().map(|p| p.1).collect();
                    Some(active[weighted_index(&w, &mut rng)].0)
                } else {
                    let mut cat_w = pref.clone();
                    let mut chosen = None;
                    while chosen.is_none() && cat_w.iter().any(|w| *w > 0.0) {
                        let c = weighted_index(&cat_w, &mut rng);
                        let unread: Vec<u32> = by_category[c].iter().copied().filter(|&j| !read[j as usize]).collect();
                        if unread.is_empty() {
                            cat_w[c] = 0.0;
                            continue;
                        }
                        let w: Vec<f64> = unread.iter().map(|&j| item_popularity[j as usize]).collect();
                        chosen = Some(unread[weighted_index(&w, &mut rng)]);
                    }
                    chosen
                };
                if let Some(j) = pick {
                    read[j as usize] = true;
                    out.push((t, j));
                }
            }
            out
        })
        .collect();

    let mut all: Vec<(i64, u32, u32)> = per_user
        .iter()
        .enumerate()
        .flat_map(|(u, evs)| evs.iter().map(move |&(t, j)| (t, u as u32, j)))
        .collect();
    all.sort_unstable();
    let ids = IdMaps::new(
        (0..cfg.users).map(|u| format!("u{u:04}")).collect(),
        (0..cfg.items).map(|j| format!("n{j:04}")).collect(),
    )?;
    let stream = EventStream::from_events(
        Arc::new(ids),
        all.iter().enumerate().map(|(s, &(ts, user, item))| ClickEvent {
            user,
            item,
            ts,
            dwell: None,
            seq: s as u64,
        }),
    )?;

    let mut erng = SeededRng::derived(cfg.seed, derive_seed(cfg.seed, 0xe3b));
    let d = cfg.embedding_dim;
    let centroids = DenseMatrix::from_fn(cfg.categories, d, |_, _| erng.gaussian() / (d as f64).sqrt());
    let noise = cfg.embedding_noise / (d as f64).sqrt();
    let vectors = DenseMatrix::from_fn(cfg.items, d, |j, k| centroids.get(item_category[j], k) + noise * erng.gaussian());
    let embeddings = EmbeddingTable::new(vectors, vec![true; cfg.items])?;

    Ok(SynthCorpus {
        stream,
        user_cluster,
        item_category,
        item_popularity,
        preferences,
        bursts,
        embeddings,
    })
}

impl SynthCorpus {
    pub fn write_user_labels<W: Write>(&self, w: &mut W, meta: &str) -> Result<()> {
        write_meta(w, meta)?;
        writeln!(w, "user,cluster")?;
        for (u, c) in self.user_cluster.iter().enumerate() {
            writeln!(w, "{},{c}", self.stream.ids().user_id(u as u32))?;
        }
        Ok(())
    }

    pub fn write_item_labels<W: Write>(&self, w: &mut W, meta: &str) -> Result<()> {
        write_meta(w, meta)?;
        writeln!(w, "item,category")?;
        for (j, c) in self.item_category.iter().enumerate() {
            writeln!(w, "{},{c}", self.stream.ids().item_id(j as u32))?;
        }
        Ok(())
    }

    pub fn write_burst_labels<W: Write>(&self, w: &mut W, meta: &str) -> Result<()> {
        write_meta(w, meta)?;
        writeln!(w, "item,burst_start,burst_cluster")?;
        for b in &self.bursts {
            writeln!(w, "{},{},{}", self.stream.ids().item_id(b.item), b.start, b.cluster)?;
        }
        Ok(())
    }
}

fn write_meta<W: Write>(w: &mut W, meta: &str) -> Result<()> {
    for line in meta.lines() {
        writeln!(w, "# {line}")?;
    }
    Ok(())
}
