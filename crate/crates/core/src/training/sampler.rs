use std::collections::BTreeMap;

use crate::corpus::EventStream;
use crate::error::{invalid, Error, Result};
use crate::numerics::SeededRng;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SamplerConfig {
    /// Pool = items clicked in `[ts - window, ts)`, in seconds.
    pub window: i64,
    /// Uniform over distinct pool items instead of click-count proportional.
    pub uniform: bool,
}

impl Default for SamplerConfig {
    fn default() -> Self {
        SamplerConfig {
            window: 86_400,
            uniform: false,
        }
    }
}

/// Recency-filtered negative sampler over a time-sorted click array.
#[derive(Debug, Clone)]
pub struct NegativeSampler {
    ts: Vec<i64>,
    items: Vec<u32>,
    covered: Vec<bool>,
    cfg: SamplerConfig,
}

impl NegativeSampler {
    /// `covered[j]` marks items eligible as negatives; pass all-true to disable.
    pub fn new(pool_source: &EventStream, covered: Vec<bool>, cfg: SamplerConfig) -> Result<Self> {
        if cfg.window <= 0 {
            return invalid("negative pool window must be positive");
        }
        if covered.len() != pool_source.num_items() {
            return invalid("coverage mask length differs from item count");
        }
        let mut clicks: Vec<(i64, u64, u32)> = pool_source.iter().map(|e| (e.ts, e.seq, e.item)).collect();
        clicks.sort_unstable();
        Ok(NegativeSampler {
            ts: clicks.iter().map(|c| c.0).collect(),
            items: clicks.iter().map(|c| c.2).collect(),
            covered,
            cfg,
        })
    }

    pub fn config(&self) -> SamplerConfig {
        self.cfg
    }

    fn pool_range(&self, ts: i64) -> (usize, usize) {
        let lo = self.ts.partition_point(|&t| t < ts - self.cfg.window);
        let hi = self.ts.partition_point(|&t| t < ts);
        (lo, hi)
    }

    /// Draws `count` distinct items from the pool at `ts`, skipping `excluded`
    /// (sorted ascending), `positive`, and uncovered items. `context` names the
    /// request in the pool-exhausted error.
    pub fn sample(
        &self,
        context: &dyn Fn() -> String,
        ts: i64,
        excluded: &[u32],
        positive: u32,
        count: usize,
        rng: &mut SeededRng,
    ) -> Result<Vec<u32>> {
        let (lo, hi) = self.pool_range(ts);
        let eligible = |j: u32| j != positive && self.covered[j as usize] && excluded.binary_search(&j).is_err();
        let mut chosen: Vec<u32> = Vec::with_capacity(count);
        if count == 0 {
            return Ok(chosen);
        }

        if self.cfg.uniform {
            let mut distinct: Vec<u32> = self.items[lo..hi].iter().copied().filter(|&j| eligible(j)).collect();
            distinct.sort_unstable();
            distinct.dedup();
            if distinct.len() < count {
                return Err(Error::PoolExhausted {
                    context: context(),
                    needed: count,
                    eligible: distinct.len(),
                });
            }
            // partial Fisher-Yates
            for k in 0..count {
                let pick = k + rng.below(distinct.len() - k);
                distinct.swap(k, pick);
            }
            distinct.truncate(count);
            return Ok(distinct);
        }

        if hi > lo {
            let attempts = 20 * count + 200;
            for _ in 0..attempts {
                let j = self.items[lo + rng.below(hi - lo)];
                if eligible(j) && !chosen.contains(&j) {
                    chosen.push(j);
                    if chosen.len() == count {
                        return Ok(chosen);
                    }
                }
            }
        }

        // Rejection stalled: draw the rest exactly from the remaining tallies.
        let mut tally: BTreeMap<u32, u64> = BTreeMap::new();
        for &j in &self.items[lo..hi] {
            if eligible(j) && !chosen.contains(&j) {
                *tally.entry(j).or_insert(0) += 1;
            }
        }
        if chosen.len() + tally.len() < count {
            return Err(Error::PoolExhausted {
                context: context(),
                needed: count,
                eligible: chosen.len() + tally.len(),
            });
        }
        let mut rest: Vec<(u32, u64)> = tally.into_iter().collect();
        while chosen.len() < count {
            let total: u64 = rest.iter().map(|p| p.1).sum();
            let mut x = (rng.next_u64() % total) as i64;
            let mut at = 0;
            for (k, p) in rest.iter().enumerate() {
                x -= p.1 as i64;
                if x < 0 {
                    at = k;
                    break;
                }
            }
            chosen.push(rest.swap_remove(at).0);
        }
        Ok(chosen)
    }
}
