use std::collections::{BTreeMap, HashMap, VecDeque};
use std::io::Write;

use crate::corpus::{EventStream, IdMaps};
use crate::error::{invalid, Result};

use super::CoReadNetwork;

/// Out-degree of each user: how many users list it as a neighbor.
pub fn out_degrees(net: &CoReadNetwork) -> Vec<usize> {
    let mut deg = vec![0usize; net.num_users()];
    for i in 0..net.num_users() as u32 {
        for &k in net.neighbors(i) {
            deg[k as usize] += 1;
        }
    }
    deg
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DegreeStats {
    /// out-degree -> number of users
    pub histogram: BTreeMap<usize, usize>,
    pub nodes_with_out_edges: usize,
    pub max_out_degree: usize,
    pub total_edges: usize,
}

pub fn degree_stats(net: &CoReadNetwork) -> DegreeStats {
    let deg = out_degrees(net);
    let mut histogram = BTreeMap::new();
    for &d in &deg {
        *histogram.entry(d).or_insert(0) += 1;
    }
    DegreeStats {
        histogram,
        nodes_with_out_edges: deg.iter().filter(|d| **d > 0).count(),
        max_out_degree: deg.iter().copied().max().unwrap_or(0),
        total_edges: deg.iter().sum(),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Reachability {
    /// `fractions[s - 1]`: share of ordered (source, other node) pairs reached
    /// within `s` steps, over sources with out-degree > 0.
    pub fractions: Vec<f64>,
    pub sources: usize,
}

/// Breadth-first reachability along edges `k -> i` (k is a neighbor of i).
pub fn reachability_within(net: &CoReadNetwork, max_steps: usize) -> Result<Reachability> {
    if max_steps == 0 {
        return invalid("max_steps must be at least 1");
    }
    let n = net.num_users();
    let mut out: Vec<Vec<u32>> = vec![Vec::new(); n];
    for i in 0..n as u32 {
        for &k in net.neighbors(i) {
            out[k as usize].push(i);
        }
    }
    let sources: Vec<usize> = (0..n).filter(|&k| !out[k].is_empty()).collect();
    let mut reached_at = vec![0u64; max_steps];
    let mut depth = vec![usize::MAX; n];
    let mut queue = VecDeque::new();
    for &s in &sources {
        depth.iter_mut().for_each(|d| *d = usize::MAX);
        depth[s] = 0;
        queue.clear();
        queue.push_back(s);
        while let Some(v) = queue.pop_front() {
            let d = depth[v];
            if d == max_steps {
                continue;
            }
            for &w in &out[v] {
                let w = w as usize;
                if depth[w] == usize::MAX {
                    depth[w] = d + 1;
                    reached_at[d] += 1;
                    queue.push_back(w);
                }
            }
        }
    }
    let denom = (sources.len() * n.saturating_sub(1)) as f64;
    let mut cumulative = 0u64;
    let fractions = reached_at
        .iter()
        .map(|&r| {
            cumulative += r;
            if denom > 0.0 {
                cumulative as f64 / denom
            } else {
                0.0
            }
        })
        .collect();
    Ok(Reachability {
        fractions,
        sources: sources.len(),
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct PriorReadStats {
    /// `counts[c]`: clicks for which exactly `c` neighbors read the item earlier.
    pub counts: Vec<u64>,
    pub total_clicks: u64,
}

impl PriorReadStats {
    pub fn share(&self, c: usize) -> f64 {
        if self.total_clicks == 0 {
            return 0.0;
        }
        self.counts.get(c).copied().unwrap_or(0) as f64 / self.total_clicks as f64
    }

    /// Share of clicks with at least `c` prior neighbor readers.
    pub fn share_at_least(&self, c: usize) -> f64 {
        if self.total_clicks == 0 {
            return 0.0;
        }
        let n: u64 = self.counts.iter().skip(c).sum();
        n as f64 / self.total_clicks as f64
    }
}

/// For each click in `train`, counts neighbors who read the same item strictly
/// earlier within `train`.
pub fn prior_read_stats(net: &CoReadNetwork, train: &EventStream) -> PriorReadStats {
    prior_read_stats_with(net, train, train)
}

/// As [`prior_read_stats`], with neighbor reads looked up in `reads`.
pub fn prior_read_stats_with(net: &CoReadNetwork, clicks: &EventStream, reads: &EventStream) -> PriorReadStats {
    let mut first_read: HashMap<(u32, u32), i64> = HashMap::new();
    for e in reads.iter() {
        first_read
            .entry((e.user, e.item))
            .and_modify(|t| *t = (*t).min(e.ts))
            .or_insert(e.ts);
    }
    let max_n = (0..net.num_users() as u32).map(|i| net.neighbors(i).len()).max().unwrap_or(0);
    let mut counts = vec![0u64; max_n + 1];
    let mut total = 0u64;
    for e in clicks.iter() {
        let c = net
            .neighbors(e.user)
            .iter()
            .filter(|&&k| first_read.get(&(k, e.item)).is_some_and(|&t| t < e.ts))
            .count();
        counts[c] += 1;
        total += 1;
    }
    PriorReadStats {
        counts,
        total_clicks: total,
    }
}

fn write_meta<W: Write>(w: &mut W, meta: &str) -> Result<()> {
    for line in meta.lines() {
        writeln!(w, "# {line}")?;
    }
    Ok(())
}

pub fn write_degree_csv<W: Write>(w: &mut W, stats: &DegreeStats, meta: &str) -> Result<()> {
    write_meta(w, meta)?;
    writeln!(w, "degree,count")?;
    for (d, c) in &stats.histogram {
        writeln!(w, "{d},{c}")?;
    }
    Ok(())
}

pub fn write_reachability_csv<W: Write>(w: &mut W, r: &Reachability, meta: &str) -> Result<()> {
    write_meta(w, meta)?;
    writeln!(w, "# denominator=ordered pairs (source with out-degree>0, any other node); sources={}", r.sources)?;
    writeln!(w, "steps,fraction")?;
    for (s, f) in r.fractions.iter().enumerate() {
        writeln!(w, "{},{f}", s + 1)?;
    }
    Ok(())
}

pub fn write_prior_reads_csv<W: Write>(w: &mut W, s: &PriorReadStats, meta: &str) -> Result<()> {
    write_meta(w, meta)?;
    writeln!(
        w,
        "# clicks={} share_ge1={} share_ge5={}",
        s.total_clicks,
        s.share_at_least(1),
        s.share_at_least(5)
    )?;
    writeln!(w, "prior_readers,share")?;
    for c in 0..s.counts.len() {
        writeln!(w, "{c},{}", s.share(c))?;
    }
    Ok(())
}

/// Edge list for external visualization: one row per (user, neighbor).
pub fn write_adjacency_csv<W: Write>(w: &mut W, net: &CoReadNetwork, ids: &IdMaps, meta: &str) -> Result<()> {
    write_meta(w, meta)?;
    writeln!(w, "user,neighbor,similarity")?;
    for i in 0..net.num_users() as u32 {
        for &k in net.neighbors(i) {
            writeln!(w, "{},{},{}", ids.user_id(i), ids.user_id(k), net.similarity(i, k))?;
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::super::{NeighborSelection, NetworkConfig};
    use super::*;
    use crate::corpus::{build_stream, parse_log};
    use crate::numerics::DenseMatrix;

    fn net_from_lists(lists: Vec<Vec<u32>>) -> CoReadNetwork {
        let n = lists.len();
        CoReadNetwork::from_parts(
            NetworkConfig { rank: 1, neighbors: 1, use_tfidf: true, seed: 0 },
            NeighborSelection::Similarity,
            DenseMatrix::zeros(n, 1),
            vec![1.0],
            lists,
            vec![false; n],
        )
        .unwrap()
    }

    #[test]
    fn mutual_ring_has_unit_out_degrees() {
        // 0<->1, 2<->3
        let net = net_from_lists(vec![vec![1], vec![0], vec![3], vec![2]]);
        let s = degree_stats(&net);
        assert_eq!(s.histogram.get(&1), Some(&4));
        assert_eq!(s.max_out_degree, 1);
    }

    #[test]
    fn star_hub_collects_all_edges() {
        let i = 6;
        let mut lists = vec![vec![1u32]];
        lists.extend((1..i).map(|_| vec![0u32]));
        let net = net_from_lists(lists);
        let deg = out_degrees(&net);
        assert_eq!(deg[0], i - 1);
        assert_eq!(deg[1], 1);
        assert!(deg[2..].iter().all(|d| *d == 0));
        let s = degree_stats(&net);
        assert_eq!(s.total_edges, i);
        assert_eq!(s.nodes_with_out_edges, 2);
    }

    #[test]
    fn chain_reachability() {
        // edges a->b->c: b lists a, c lists b; a lists c only to keep N uniform is not needed here
        let net = net_from_lists(vec![vec![], vec![0], vec![1]]);
        let r = reachability_within(&net, 2).unwrap();
        assert_eq!(r.sources, 2);
        assert_eq!(r.fractions, vec![0.5, 0.75]);
    }

    #[test]
    fn complete_graph_reaches_everything_in_one_step() {
        let n = 5u32;
        let lists = (0..n).map(|i| (0..n).filter(|&k| k != i).collect()).collect();
        let r = reachability_within(&net_from_lists(lists), 1).unwrap();
        assert_eq!(r.fractions, vec![1.0]);
    }

    #[test]
    fn zero_steps_rejected() {
        assert!(reachability_within(&net_from_lists(vec![vec![1], vec![0]]), 0).is_err());
    }

    #[test]
    fn prior_reads_use_strict_inequality() {
        let text = "i\tj\t10\nk1\tj\t7\nk2\tj\t8\nk3\tj\t11\nk1\tx\t1\n";
        let s = build_stream(parse_log(text.as_bytes()).unwrap(), 0, usize::MAX).unwrap();
        let ids = s.ids();
        let i = ids.user_index("i").unwrap();
        let mut lists = vec![Vec::new(); s.num_users()];
        lists[i as usize] = ["k1", "k2", "k3"].iter().map(|k| ids.user_index(k).unwrap()).collect();
        let net = net_from_lists(lists);
        let stats = prior_read_stats(&net, &s.window(10, 11));
        assert_eq!(stats.total_clicks, 1);
        assert_eq!(stats.counts[0], 1);
        let all = prior_read_stats_with(&net, &s.window(10, 11), &s);
        assert_eq!(all.counts[2], 1);
    }

    #[test]
    fn silent_neighbors_give_zero_counts() {
        let text = "i\tj\t10\ni\tq\t12\nk\tz\t1\n";
        let s = build_stream(parse_log(text.as_bytes()).unwrap(), 0, usize::MAX).unwrap();
        let mut lists = vec![Vec::new(); s.num_users()];
        lists[s.ids().user_index("i").unwrap() as usize] = vec![s.ids().user_index("k").unwrap()];
        let stats = prior_read_stats(&net_from_lists(lists), &s);
        assert_eq!(stats.counts[0], stats.total_clicks);
        assert_eq!(stats.share_at_least(1), 0.0);
    }
}
