//! Leave-one-out ranking evaluation against frozen candidate sets, and the
//! baselines the model is compared with.

mod baselines;
mod candidates;
mod context;
mod metrics;

use rayon::prelude::*;

pub use baselines::{CsrnScorer, ItemCfScorer, PopScorer, RandomScorer, UserCfScorer};
pub use candidates::{freeze_candidates, CandidateClick, EvalCandidateSet, FreezeConfig, FreezeStats, EVAL_NEGATIVES};
pub use context::{CausalContext, Scorer};
pub use metrics::{metrics, pessimistic_rank, write_ranks_csv, Metrics, DEFAULT_KS};

use crate::error::{invalid, Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    pub metrics: Metrics,
    /// Rank of the positive for each click, in candidate-file order.
    pub ranks: Vec<u32>,
}

/// Ranks each click's positive among its candidates.
pub fn evaluate(scorer: &dyn Scorer, set: &EvalCandidateSet, ctx: &CausalContext<'_>, ks: &[usize]) -> Result<EvalReport> {
    if set.is_empty() {
        return invalid("candidate set is empty");
    }
    let ranks = set
        .clicks
        .par_iter()
        .enumerate()
        .map(|(i, c)| {
            let scores = scorer
                .score(ctx, c.user, c.ts, &c.candidates())
                .map_err(|e| Error::Scoring {
                    click: i,
                    source: Box::new(e),
                })?;
            if scores.len() != c.negatives.len() + 1 {
                return Err(Error::Scoring {
                    click: i,
                    source: Box::new(Error::Contract(format!("{} returned {} scores", scorer.name(), scores.len()))),
                });
            }
            Ok(pessimistic_rank(scores[0], &scores[1..]))
        })
        .collect::<Result<Vec<u32>>>()?;
    Ok(EvalReport {
        metrics: metrics(&ranks, ks)?,
        ranks,
    })
}
