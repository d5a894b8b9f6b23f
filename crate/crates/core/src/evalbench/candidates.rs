use std::io::{BufRead, Write};

use crate::corpus::{EventStream, IdMaps};
use crate::error::{invalid, Error, Result};
use crate::numerics::SeededRng;
use crate::training::{NegativeSampler, SamplerConfig};

/// Negatives per evaluation click.
pub const EVAL_NEGATIVES: usize = 99;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CandidateClick {
    pub user: u32,
    pub ts: i64,
    pub positive: u32,
    pub negatives: Vec<u32>,
}

impl CandidateClick {
    /// Positive first, then the negatives.
    pub fn candidates(&self) -> Vec<u32> {
        let mut c = Vec::with_capacity(self.negatives.len() + 1);
        c.push(self.positive);
        c.extend_from_slice(&self.negatives);
        c
    }
}

/// Frozen per-click candidate lists shared by every model.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EvalCandidateSet {
    pub seed: u64,
    pub rules: String,
    pub clicks: Vec<CandidateClick>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FreezeConfig {
    pub negatives: usize,
    pub sampler: SamplerConfig,
    /// Uniform subsample of eligible clicks, for desk-scale runs.
    pub max_clicks: Option<usize>,
    pub seed: u64,
}

impl Default for FreezeConfig {
    fn default() -> Self {
        FreezeConfig {
            negatives: EVAL_NEGATIVES,
            sampler: SamplerConfig::default(),
            max_clicks: None,
            seed: 0,
        }
    }
}

impl FreezeConfig {
    fn rules(&self) -> String {
        format!(
            "negatives={} pool_window={} uniform={} max_clicks={} exclude=user-items,positive,uncovered skip=rereads,uncovered-positives",
            self.negatives,
            self.sampler.window,
            self.sampler.uniform,
            self.max_clicks.map_or("all".to_string(), |m| m.to_string()),
        )
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct FreezeStats {
    pub eligible: usize,
    pub skipped_uncovered: usize,
    pub skipped_rereads: usize,
}

/// Draws negatives for the clicks in `clicks`. User histories for exclusion
/// and re-read detection come from `full`; `covered` marks items with embeddings.
pub fn freeze_candidates(
    clicks: &EventStream,
    full: &EventStream,
    covered: &[bool],
    cfg: &FreezeConfig,
) -> Result<(EvalCandidateSet, FreezeStats)> {
    if covered.len() != full.num_items() {
        return invalid("coverage mask length differs from item count");
    }
    let sampler = NegativeSampler::new(full, covered.to_vec(), cfg.sampler)?;
    let mut events: Vec<_> = clicks.iter().collect();
    events.sort_by_key(|e| (e.ts, e.seq));

    let mut stats = FreezeStats::default();
    let mut kept = Vec::new();
    for e in events {
        if !covered[e.item as usize] {
            stats.skipped_uncovered += 1;
        } else if full.events_before(e.user, e.ts).iter().any(|p| p.item == e.item) {
            stats.skipped_rereads += 1;
        } else {
            kept.push(e);
        }
    }
    stats.eligible = kept.len();
    if let Some(m) = cfg.max_clicks {
        if m < kept.len() {
            let mut rng = SeededRng::derived(cfg.seed, 0);
            let mut idx: Vec<usize> = (0..kept.len()).collect();
            for k in 0..m {
                let pick = k + rng.below(idx.len() - k);
                idx.swap(k, pick);
            }
            idx.truncate(m);
            idx.sort_unstable();
            kept = idx.into_iter().map(|i| kept[i]).collect();
        }
    }

    let ids = full.ids();
    let mut out = Vec::with_capacity(kept.len());
    for (c, e) in kept.into_iter().enumerate() {
        let mut rng = SeededRng::derived(cfg.seed, 1 + c as u64);
        let history = full.user_items(e.user);
        let context = || format!("click {c} (user {}, ts {})", ids.user_id(e.user), e.ts);
        let negatives = sampler.sample(&context, e.ts, &history, e.item, cfg.negatives, &mut rng)?;
        out.push(CandidateClick {
            user: e.user,
            ts: e.ts,
            positive: e.item,
            negatives,
        });
    }
    Ok((
        EvalCandidateSet {
            seed: cfg.seed,
            rules: cfg.rules(),
            clicks: out,
        },
        stats,
    ))
}

impl EvalCandidateSet {
    pub fn len(&self) -> usize {
        self.clicks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.clicks.is_empty()
    }

    /// `meta` lines are written as extra `# ` header lines.
    pub fn write<W: Write>(&self, ids: &IdMaps, w: &mut W, meta: &str) -> Result<()> {
        writeln!(w, "# seed={}", self.seed)?;
        writeln!(w, "# rules={}", self.rules)?;
        for line in meta.lines() {
            writeln!(w, "# {line}")?;
        }
        writeln!(w, "# user,ts,positive,neg1..neg{}", self.clicks.first().map_or(0, |c| c.negatives.len()))?;
        for c in &self.clicks {
            write!(w, "{},{},{}", ids.user_id(c.user), c.ts, ids.item_id(c.positive))?;
            for &j in &c.negatives {
                write!(w, ",{}", ids.item_id(j))?;
            }
            writeln!(w)?;
        }
        Ok(())
    }

    pub fn read<R: BufRead>(reader: R, ids: &IdMaps) -> Result<Self> {
        let mut seed = None;
        let mut rules = String::new();
        let mut clicks = Vec::new();
        for (n, line) in reader.lines().enumerate() {
            let line = line?;
            let lineno = n + 1;
            let parse_err = |reason: String| Error::Parse { line: lineno, reason };
            if let Some(rest) = line.strip_prefix('#') {
                let rest = rest.trim();
                // later `# seed=... config_hash=...` lines are provenance
                if let (None, Some(v)) = (seed, rest.strip_prefix("seed=")) {
                    seed = Some(v.parse::<u64>().map_err(|e| parse_err(format!("bad seed: {e}")))?);
                } else if let (true, Some(v)) = (rules.is_empty(), rest.strip_prefix("rules=")) {
                    rules = v.to_string();
                }
                continue;
            }
            if line.trim().is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split(',').collect();
            if fields.len() < 4 {
                return Err(parse_err("expected user,ts,positive,negatives...".into()));
            }
            let user = ids
                .user_index(fields[0])
                .ok_or_else(|| parse_err(format!("unknown user {:?}", fields[0])))?;
            let ts = fields[1].parse::<i64>().map_err(|e| parse_err(format!("bad timestamp: {e}")))?;
            let item = |s: &str| ids.item_index(s).ok_or_else(|| parse_err(format!("unknown item {s:?}")));
            let positive = item(fields[2])?;
            let negatives = fields[3..].iter().map(|s| item(s)).collect::<Result<Vec<_>>>()?;
            clicks.push(CandidateClick {
                user,
                ts,
                positive,
                negatives,
            });
        }
        let seed = seed.ok_or_else(|| Error::Format("candidate file has no seed header".into()))?;
        Ok(EvalCandidateSet { seed, rules, clicks })
    }
}
