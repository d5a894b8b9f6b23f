use std::fmt;
use std::str::FromStr;

use crate::error::{invalid, Error, Result};
use crate::numerics::sigmoid;

/// Guards the logarithm in the BPR-max loss.
pub const LOSS_EPS: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LossKind {
    Top1Max,
    BprMax,
    Xe,
}

impl LossKind {
    pub const ALL: [LossKind; 3] = [LossKind::Top1Max, LossKind::BprMax, LossKind::Xe];

    pub fn name(self) -> &'static str {
        match self {
            LossKind::Top1Max => "top1max",
            LossKind::BprMax => "bprmax",
            LossKind::Xe => "xe",
        }
    }
}

impl fmt::Display for LossKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for LossKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "top1max" => Ok(LossKind::Top1Max),
            "bprmax" => Ok(LossKind::BprMax),
            "xe" => Ok(LossKind::Xe),
            other => Err(Error::Config(format!("unknown loss kind {other:?} (top1max, bprmax, xe)"))),
        }
    }
}

fn softmax(xs: &[f64]) -> Vec<f64> {
    let m = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let e: Vec<f64> = xs.iter().map(|x| (x - m).exp()).collect();
    let s: f64 = e.iter().sum();
    e.into_iter().map(|v| v / s).collect()
}

#[inline]
fn dsigmoid(x: f64) -> f64 {
    let s = sigmoid(x);
    s * (1.0 - s)
}

/// Ranking loss of a positive score `r` against negative scores `negs`.
/// `lambda` weights the score regularization of the pairwise losses.
pub fn loss(kind: LossKind, r: f64, negs: &[f64], lambda: f64) -> Result<f64> {
    Ok(loss_and_grad(kind, r, negs, lambda)?.0)
}

/// Loss value, derivative w.r.t. `r`, and derivatives w.r.t. each negative.
pub fn loss_and_grad(kind: LossKind, r: f64, negs: &[f64], lambda: f64) -> Result<(f64, f64, Vec<f64>)> {
    if negs.is_empty() {
        return invalid("loss needs at least one negative score");
    }
    Ok(match kind {
        LossKind::Top1Max => {
            let s = softmax(negs);
            let f: Vec<f64> = negs.iter().map(|&rj| sigmoid(rj - r) + lambda * sigmoid(rj * rj)).collect();
            let l: f64 = s.iter().zip(&f).map(|(a, b)| a * b).sum();
            let mut dr = 0.0;
            let mut dn = Vec::with_capacity(negs.len());
            for j in 0..negs.len() {
                let rj = negs[j];
                let dpair = dsigmoid(rj - r);
                dr -= s[j] * dpair;
                dn.push(s[j] * (dpair + lambda * dsigmoid(rj * rj) * 2.0 * rj) + s[j] * (f[j] - l));
            }
            (l, dr, dn)
        }
        LossKind::BprMax => {
            let s = softmax(negs);
            let a: f64 = s.iter().zip(negs).map(|(sj, &rj)| sj * sigmoid(r - rj)).sum();
            let b: f64 = s.iter().zip(negs).map(|(sj, &rj)| sj * rj * rj).sum();
            let l = -(a + LOSS_EPS).ln() + lambda * b;
            let mut dr = 0.0;
            let mut dn = Vec::with_capacity(negs.len());
            for j in 0..negs.len() {
                let rj = negs[j];
                let sig = sigmoid(r - rj);
                let dsig = dsigmoid(r - rj);
                dr -= s[j] * dsig / (a + LOSS_EPS);
                let da = s[j] * (sig - a) - s[j] * dsig;
                let db = s[j] * (rj * rj - b) + 2.0 * s[j] * rj;
                dn.push(-da / (a + LOSS_EPS) + lambda * db);
            }
            (l, dr, dn)
        }
        LossKind::Xe => {
            let mut all = Vec::with_capacity(negs.len() + 1);
            all.push(r);
            all.extend_from_slice(negs);
            let m = all.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let lse = m + all.iter().map(|x| (x - m).exp()).sum::<f64>().ln();
            let p: Vec<f64> = all.iter().map(|x| (x - lse).exp()).collect();
            (lse - r, p[0] - 1.0, p[1..].to_vec())
        }
    })
}
