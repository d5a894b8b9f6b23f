use std::collections::BTreeMap;
use std::io::Write;

use serde::Serialize;

use crate::error::{invalid, Result};

/// Cutoffs reported by default.
pub const DEFAULT_KS: [usize; 3] = [1, 10, 20];

/// Rank of the positive among itself and `negatives`, by descending score.
/// Ties go against the positive.
pub fn pessimistic_rank(positive: f64, negatives: &[f64]) -> u32 {
    1 + negatives.iter().filter(|&&s| !(s < positive)).count() as u32
}

#[derive(Debug, Clone, PartialEq)]
pub struct Metrics {
    pub hr: BTreeMap<usize, f64>,
    pub mrr: f64,
    pub n_clicks: usize,
}

/// HR@K (share of ranks ≤ K) for each K, and MRR (mean of 1/rank).
pub fn metrics(ranks: &[u32], ks: &[usize]) -> Result<Metrics> {
    if ranks.is_empty() {
        return invalid("metrics over an empty rank list");
    }
    if ranks.contains(&0) {
        return invalid("ranks are 1-based");
    }
    let n = ranks.len() as f64;
    let hr = ks
        .iter()
        .map(|&k| (k, ranks.iter().filter(|&&r| r as usize <= k).count() as f64 / n))
        .collect();
    let mrr = ranks.iter().map(|&r| 1.0 / r as f64).sum::<f64>() / n;
    Ok(Metrics {
        hr,
        mrr,
        n_clicks: ranks.len(),
    })
}

#[derive(Serialize)]
struct MetricsJson<'a> {
    model: &'a str,
    hr: BTreeMap<String, f64>,
    mrr: f64,
    n_clicks: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    meta: Option<&'a str>,
}

impl Metrics {
    pub fn hr_at(&self, k: usize) -> Option<f64> {
        self.hr.get(&k).copied()
    }

    pub fn to_json(&self, model: &str, meta: Option<&str>) -> String {
        let doc = MetricsJson {
            model,
            hr: self.hr.iter().map(|(k, v)| (k.to_string(), *v)).collect(),
            mrr: self.mrr,
            n_clicks: self.n_clicks,
            meta,
        };
        serde_json::to_string_pretty(&doc).expect("metrics serialize")
    }
}

/// Per-click rank dump `click_id,rank`.
pub fn write_ranks_csv<W: Write>(w: &mut W, ranks: &[u32], meta: &str) -> Result<()> {
    for line in meta.lines() {
        writeln!(w, "# {line}")?;
    }
    writeln!(w, "click_id,rank")?;
    for (i, r) in ranks.iter().enumerate() {
        writeln!(w, "{i},{r}")?;
    }
    Ok(())
}
