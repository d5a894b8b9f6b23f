//! Directed co-reading network built from the history window.
//!
//! Users are embedded by a truncated SVD of the (TF-IDF weighted) binary
//! user-item matrix; each user keeps the `N` other users with the highest
//! bilinear similarity `u_i Σ u_kᵀ` as neighbors. The edge from neighbor `k`
//! to user `i` carries `[u_i, u_k, u_i ⊙ u_k]`.

mod analytics;
mod io;

use rayon::prelude::*;

use crate::corpus::EventStream;
use crate::error::{invalid, Error, Result};
use crate::numerics::{
    binary_weights, tfidf, truncated_svd_with, DenseMatrix, SeededRng, SparseBinaryMatrix, SvdOptions,
};

pub use analytics::{
    degree_stats, out_degrees, prior_read_stats, prior_read_stats_with, reachability_within,
    write_adjacency_csv, write_degree_csv, write_prior_reads_csv, write_reachability_csv, DegreeStats,
    PriorReadStats, Reachability,
};
pub use io::{read_network, write_network, NETWORK_MAGIC};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NeighborSelection {
    Similarity,
    Random,
    Permuted,
}

impl NeighborSelection {
    fn code(self) -> u8 {
        match self {
            NeighborSelection::Similarity => 0,
            NeighborSelection::Random => 1,
            NeighborSelection::Permuted => 2,
        }
    }

    fn from_code(c: u8) -> Result<Self> {
        Ok(match c {
            0 => NeighborSelection::Similarity,
            1 => NeighborSelection::Random,
            2 => NeighborSelection::Permuted,
            _ => return Err(Error::Format(format!("unknown neighbor selection code {c}"))),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct NetworkConfig {
    /// SVD rank `T`.
    pub rank: usize,
    /// Neighbors per user `N`.
    pub neighbors: usize,
    pub use_tfidf: bool,
    pub seed: u64,
}

impl Default for NetworkConfig {
    fn default() -> Self {
        NetworkConfig {
            rank: 32,
            neighbors: 20,
            use_tfidf: true,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CoReadNetwork {
    config: NetworkConfig,
    selection: NeighborSelection,
    factors: DenseMatrix,
    sigma: Vec<f64>,
    neighbors: Vec<Vec<u32>>,
    /// Users without history; their neighbors are the most-read users.
    anchored: Vec<bool>,
}

/// `Σ_t a[t] σ[t] b[t]`.
pub fn similarity(a: &[f64], b: &[f64], sigma: &[f64]) -> Result<f64> {
    if a.len() != b.len() || a.len() != sigma.len() {
        return invalid(format!(
            "similarity length mismatch: {}, {}, {}",
            a.len(),
            b.len(),
            sigma.len()
        ));
    }
    Ok(bilinear(a, b, sigma))
}

#[inline]
fn bilinear(a: &[f64], b: &[f64], sigma: &[f64]) -> f64 {
    a.iter().zip(b).zip(sigma).map(|((x, y), s)| x * s * y).sum()
}

fn top_by_score(mut scored: Vec<(f64, u32)>, n: usize) -> Vec<u32> {
    let order = |a: &(f64, u32), b: &(f64, u32)| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1));
    if scored.len() > n && n > 0 {
        scored.select_nth_unstable_by(n - 1, order);
        scored.truncate(n);
    }
    scored.sort_by(order);
    scored.into_iter().take(n).map(|(_, k)| k).collect()
}

pub fn build_network(history: &EventStream, cfg: &NetworkConfig) -> Result<CoReadNetwork> {
    if history.is_empty() {
        return Err(Error::EmptyCorpus);
    }
    let n_users = history.num_users();
    let rows: Vec<Vec<u32>> = (0..n_users as u32)
        .map(|u| history.user_events(u).iter().map(|e| e.item).collect())
        .collect();
    let r = SparseBinaryMatrix::from_rows(history.num_items(), rows)?;
    let weighted = if cfg.use_tfidf { tfidf(&r) } else { binary_weights(&r) };
    let opts = SvdOptions {
        keep_v: false,
        ..SvdOptions::default()
    };
    let f = truncated_svd_with(&weighted, cfg.rank, cfg.seed, &opts)?;
    let mut factors = f.u;
    let anchored: Vec<bool> = (0..n_users).map(|i| r.row(i).is_empty()).collect();
    for (i, &a) in anchored.iter().enumerate() {
        if a {
            factors.row_mut(i).fill(0.0);
        }
    }
    Ok(CoReadNetwork::from_factors(*cfg, factors, f.sigma, anchored, &activity(history)))
}

fn activity(history: &EventStream) -> Vec<usize> {
    (0..history.num_users() as u32)
        .map(|u| history.user_events(u).len())
        .collect()
}

impl CoReadNetwork {
    /// Selects neighbors by similarity from given factors. `activity` ranks the
    /// popularity anchors used for users flagged in `anchored`.
    pub fn from_factors(
        config: NetworkConfig,
        factors: DenseMatrix,
        sigma: Vec<f64>,
        anchored: Vec<bool>,
        activity: &[usize],
    ) -> Self {
        let n_users = factors.rows();
        let n_eff = config.neighbors.min(n_users.saturating_sub(1));
        let mut by_activity: Vec<u32> = (0..n_users as u32).collect();
        by_activity.sort_by(|&a, &b| activity[b as usize].cmp(&activity[a as usize]).then(a.cmp(&b)));

        let neighbors: Vec<Vec<u32>> = (0..n_users)
            .into_par_iter()
            .map(|i| {
                if anchored[i] {
                    return by_activity
                        .iter()
                        .copied()
                        .filter(|&k| k as usize != i)
                        .take(n_eff)
                        .collect();
                }
                let ui = factors.row(i);
                let scored: Vec<(f64, u32)> = (0..n_users)
                    .filter(|&k| k != i)
                    .map(|k| (bilinear(ui, factors.row(k), &sigma), k as u32))
                    .collect();
                top_by_score(scored, n_eff)
            })
            .collect();
        CoReadNetwork {
            config,
            selection: NeighborSelection::Similarity,
            factors,
            sigma,
            neighbors,
            anchored,
        }
    }

    /// Same factors, neighbors drawn uniformly at random (ablation control).
    pub fn with_random_neighbors(&self, seed: u64) -> CoReadNetwork {
        let n_users = self.num_users();
        let n_eff = self.config.neighbors.min(n_users.saturating_sub(1));
        let neighbors = (0..n_users)
            .map(|i| {
                let mut rng = SeededRng::derived(seed, i as u64);
                let mut chosen: Vec<u32> = Vec::with_capacity(n_eff);
                while chosen.len() < n_eff {
                    let k = rng.below(n_users) as u32;
                    if k as usize != i && !chosen.contains(&k) {
                        chosen.push(k);
                    }
                }
                chosen
            })
            .collect();
        CoReadNetwork {
            selection: NeighborSelection::Random,
            neighbors,
            ..self.clone()
        }
    }

    /// Neighbor ids relabeled by a random permutation of users (degree-preserving
    /// control). A neighbor that would map onto the user itself maps to the
    /// image of the user instead.
    pub fn with_permuted_labels(&self, seed: u64) -> CoReadNetwork {
        let n_users = self.num_users();
        let mut perm: Vec<u32> = (0..n_users as u32).collect();
        SeededRng::new(seed).shuffle(&mut perm);
        let neighbors = self
            .neighbors
            .iter()
            .enumerate()
            .map(|(i, list)| {
                list.iter()
                    .map(|&k| {
                        let p = perm[k as usize];
                        if p as usize == i {
                            perm[i]
                        } else {
                            p
                        }
                    })
                    .collect()
            })
            .collect();
        CoReadNetwork {
            selection: NeighborSelection::Permuted,
            neighbors,
            ..self.clone()
        }
    }

    pub fn config(&self) -> &NetworkConfig {
        &self.config
    }

    pub fn selection(&self) -> NeighborSelection {
        self.selection
    }

    pub fn num_users(&self) -> usize {
        self.factors.rows()
    }

    pub fn rank(&self) -> usize {
        self.sigma.len()
    }

    /// Edge feature length `3T`.
    pub fn edge_dim(&self) -> usize {
        3 * self.rank()
    }

    pub fn sigma(&self) -> &[f64] {
        &self.sigma
    }

    pub fn factors(&self) -> &DenseMatrix {
        &self.factors
    }

    pub fn user_factor(&self, user: u32) -> &[f64] {
        self.factors.row(user as usize)
    }

    /// Neighbors of `user`, most similar first.
    pub fn neighbors(&self, user: u32) -> &[u32] {
        &self.neighbors[user as usize]
    }

    pub fn is_anchored(&self, user: u32) -> bool {
        self.anchored[user as usize]
    }

    pub fn num_anchored(&self) -> usize {
        self.anchored.iter().filter(|a| **a).count()
    }

    pub fn similarity(&self, i: u32, k: u32) -> f64 {
        bilinear(self.user_factor(i), self.user_factor(k), &self.sigma)
    }

    /// `[u_i, u_k, u_i ⊙ u_k]` for the edge from neighbor `k` into user `i`.
    pub fn edge_features(&self, i: u32, k: u32) -> Vec<f64> {
        let ui = self.user_factor(i);
        let uk = self.user_factor(k);
        let mut e = Vec::with_capacity(self.edge_dim());
        e.extend_from_slice(ui);
        e.extend_from_slice(uk);
        e.extend(ui.iter().zip(uk).map(|(a, b)| a * b));
        e
    }

    pub(crate) fn from_parts(
        config: NetworkConfig,
        selection: NeighborSelection,
        factors: DenseMatrix,
        sigma: Vec<f64>,
        neighbors: Vec<Vec<u32>>,
        anchored: Vec<bool>,
    ) -> Result<Self> {
        let n = factors.rows();
        if neighbors.len() != n || anchored.len() != n || sigma.len() != factors.cols() {
            return Err(Error::Format("network parts have inconsistent sizes".into()));
        }
        if neighbors
            .iter()
            .enumerate()
            .any(|(i, l)| l.iter().any(|&k| k as usize >= n || k as usize == i))
        {
            return Err(Error::Format("neighbor id out of range or self-loop".into()));
        }
        Ok(CoReadNetwork {
            config,
            selection,
            factors,
            sigma,
            neighbors,
            anchored,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{build_stream, parse_log};

    fn stream(text: &str) -> EventStream {
        build_stream(parse_log(text.as_bytes()).unwrap(), 0, usize::MAX).unwrap()
    }

    #[test]
    fn similarity_examples() {
        assert_eq!(similarity(&[1.0, 0.0], &[0.0, 1.0], &[3.0, 7.0]).unwrap(), 0.0);
        assert_eq!(similarity(&[1.0, 1.0], &[1.0, 1.0], &[2.0, 1.0]).unwrap(), 3.0);
        assert!(similarity(&[1.0], &[1.0, 2.0], &[1.0]).is_err());
    }

    #[test]
    fn similarity_is_symmetric() {
        let mut rng = SeededRng::new(3);
        for _ in 0..100 {
            let a: Vec<f64> = (0..5).map(|_| rng.gaussian()).collect();
            let b: Vec<f64> = (0..5).map(|_| rng.gaussian()).collect();
            let s: Vec<f64> = (0..5).map(|_| rng.uniform()).collect();
            assert!((similarity(&a, &b, &s).unwrap() - similarity(&b, &a, &s).unwrap()).abs() < 1e-15);
        }
    }

    #[test]
    fn two_users_are_each_others_only_neighbor() {
        let h = stream("a\tx\t1\na\ty\t2\nb\ty\t3\nb\tz\t4\n");
        let cfg = NetworkConfig { rank: 2, neighbors: 20, use_tfidf: true, seed: 1 };
        let net = build_network(&h, &cfg).unwrap();
        assert_eq!(net.neighbors(0), &[1]);
        assert_eq!(net.neighbors(1), &[0]);
    }

    #[test]
    fn empty_history_rejected() {
        let full = stream("a\tx\t100\n");
        let h = full.window(0, 10);
        assert!(matches!(build_network(&h, &NetworkConfig::default()), Err(Error::EmptyCorpus)));
    }

    #[test]
    fn users_without_history_get_popularity_anchors() {
        let full = stream("a\tx\t1\na\ty\t2\na\tz\t3\nb\tx\t4\nb\ty\t5\nc\tz\t6\nd\tx\t100\n");
        let h = full.window(0, 50);
        let cfg = NetworkConfig { rank: 2, neighbors: 2, use_tfidf: true, seed: 1 };
        let net = build_network(&h, &cfg).unwrap();
        let d = full.ids().user_index("d").unwrap();
        assert!(net.is_anchored(d));
        assert!(net.user_factor(d).iter().all(|v| *v == 0.0));
        let a = full.ids().user_index("a").unwrap();
        let b = full.ids().user_index("b").unwrap();
        assert_eq!(net.neighbors(d), &[a, b]);
    }

    #[test]
    fn edge_features_layout() {
        let factors = DenseMatrix::from_vec(2, 2, vec![1.0, 2.0, 3.0, -1.0]).unwrap();
        let net = CoReadNetwork::from_factors(
            NetworkConfig { rank: 2, neighbors: 1, use_tfidf: true, seed: 0 },
            factors,
            vec![2.0, 1.0],
            vec![false, false],
            &[1, 1],
        );
        assert_eq!(net.edge_features(0, 1), vec![1.0, 2.0, 3.0, -1.0, 3.0, -2.0]);
        assert_eq!(net.edge_dim(), 6);
    }

    #[test]
    fn similarity_ties_prefer_lower_index() {
        let factors = DenseMatrix::from_vec(4, 1, vec![1.0, 1.0, 1.0, 1.0]).unwrap();
        let net = CoReadNetwork::from_factors(
            NetworkConfig { rank: 1, neighbors: 2, use_tfidf: true, seed: 0 },
            factors,
            vec![1.0],
            vec![false; 4],
            &[1; 4],
        );
        assert_eq!(net.neighbors(0), &[1, 2]);
        assert_eq!(net.neighbors(3), &[0, 1]);
    }

    #[test]
    fn random_and_permuted_controls_keep_degree_and_avoid_self_loops() {
        let mut rng = SeededRng::new(8);
        let factors = DenseMatrix::from_fn(30, 3, |_, _| rng.gaussian());
        let net = CoReadNetwork::from_factors(
            NetworkConfig { rank: 3, neighbors: 5, use_tfidf: true, seed: 0 },
            factors,
            vec![3.0, 2.0, 1.0],
            vec![false; 30],
            &[1; 30],
        );
        for ctl in [net.with_random_neighbors(4), net.with_permuted_labels(4)] {
            for i in 0..30u32 {
                let l = ctl.neighbors(i);
                assert_eq!(l.len(), 5);
                assert!(!l.contains(&i));
                let mut d = l.to_vec();
                d.sort();
                d.dedup();
                assert_eq!(d.len(), 5);
            }
        }
    }
}
