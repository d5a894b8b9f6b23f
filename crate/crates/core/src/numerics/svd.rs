//! Randomized truncated SVD for sparse matrices.
//!
//! Range finder with Gaussian test matrix and oversampling, followed by
//! orthonormalized subspace (power) iteration. A fixed small number of power
//! iterations is not enough on flat spectra, so iteration continues past the
//! minimum until the leading singular values stop moving.

use nalgebra::DMatrix;

use crate::error::{invalid, Result};

use super::dense::DenseMatrix;
use super::rng::SeededRng;
use super::sparse::SparseMatrix;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SvdOptions {
    pub oversample: usize,
    pub min_power_iters: usize,
    pub max_power_iters: usize,
    /// Stop once the relative change of every retained singular value falls below this.
    pub tol: f64,
    pub keep_v: bool,
}

impl Default for SvdOptions {
    fn default() -> Self {
        SvdOptions {
            oversample: 8,
            min_power_iters: 2,
            max_power_iters: 500,
            tol: 1e-13,
            keep_v: true,
        }
    }
}

/// Rank-`T` factors `U (I×T)`, `sigma (T)`, optional `V (T×J)`.
#[derive(Debug, Clone, PartialEq)]
pub struct SvdFactors {
    pub u: DenseMatrix,
    pub sigma: Vec<f64>,
    pub v: Option<DenseMatrix>,
}

impl SvdFactors {
    pub fn rank(&self) -> usize {
        self.sigma.len()
    }

    /// `U Σ V` as a dense matrix; requires retained `V`.
    pub fn reconstruct(&self) -> Option<DenseMatrix> {
        let v = self.v.as_ref()?;
        let mut us = self.u.clone();
        for r in 0..us.rows() {
            for (x, s) in us.row_mut(r).iter_mut().zip(&self.sigma) {
                *x *= s;
            }
        }
        us.matmul(v).ok()
    }
}

pub fn truncated_svd(m: &SparseMatrix, rank: usize, seed: u64) -> Result<SvdFactors> {
    truncated_svd_with(m, rank, seed, &SvdOptions::default())
}

pub fn truncated_svd_with(
    m: &SparseMatrix,
    rank: usize,
    seed: u64,
    opts: &SvdOptions,
) -> Result<SvdFactors> {
    let (n_rows, n_cols) = (m.rows(), m.cols());
    let max_rank = n_rows.min(n_cols);
    if rank == 0 || rank > max_rank {
        return invalid(format!(
            "rank {rank} outside [1, {max_rank}] for a {n_rows}x{n_cols} matrix"
        ));
    }
    let k = (rank + opts.oversample).min(max_rank);

    let mut rng = SeededRng::new(seed);
    let omega = DenseMatrix::from_fn(n_cols, k, |_, _| rng.gaussian());
    let mut q = orthonormalize(&m.mul_dense(&omega));

    let mut prev: Option<Vec<f64>> = None;
    let mut iters = 0;
    // with k = min(I, J) the sampled range is already exact
    while k < max_rank && iters < opts.max_power_iters {
        if iters >= opts.min_power_iters {
            let cur = leading_values(m, &q, rank);
            if let Some(p) = &prev {
                let settled = cur
                    .iter()
                    .zip(p)
                    .all(|(c, p)| (c - p).abs() <= opts.tol * c.abs().max(f64::MIN_POSITIVE));
                if settled {
                    break;
                }
            }
            prev = Some(cur);
        }
        let z = orthonormalize(&m.tmul_dense(&q));
        q = orthonormalize(&m.mul_dense(&z));
        iters += 1;
    }
    log::debug!("truncated_svd: rank {rank}, subspace {k}, {iters} power iterations");

    // B = Qᵀ M, k×J, decomposed densely.
    let bt = m.tmul_dense(&q);
    let b = to_nalgebra(&bt).transpose();
    let svd = b.svd(true, true);
    let ub = svd.u.expect("u requested");
    let vt = svd.v_t.expect("v requested");
    let s = svd.singular_values;

    let mut order: Vec<usize> = (0..s.len()).collect();
    order.sort_by(|&a, &b| s[b].partial_cmp(&s[a]).unwrap().then(a.cmp(&b)));
    let order = &order[..rank];

    let qn = to_nalgebra(&q);
    let mut u = DenseMatrix::zeros(n_rows, rank);
    let mut v = DenseMatrix::zeros(rank, n_cols);
    let mut sigma = Vec::with_capacity(rank);
    for (t, &idx) in order.iter().enumerate() {
        let col = &qn * ub.column(idx);
        // sign convention: largest-magnitude entry of each left vector is positive
        let pivot = col
            .iter()
            .copied()
            .fold(0.0f64, |acc, x| if x.abs() > acc.abs() { x } else { acc });
        let sign = if pivot < 0.0 { -1.0 } else { 1.0 };
        for r in 0..n_rows {
            u.set(r, t, sign * col[r]);
        }
        for c in 0..n_cols {
            v.set(t, c, sign * vt[(idx, c)]);
        }
        sigma.push(s[idx].max(0.0));
    }
    Ok(SvdFactors {
        u,
        sigma,
        v: opts.keep_v.then_some(v),
    })
}

fn leading_values(m: &SparseMatrix, q: &DenseMatrix, rank: usize) -> Vec<f64> {
    // singular values of Qᵀ M via the k×k Gram matrix
    let bt = to_nalgebra(&m.tmul_dense(q));
    let gram = bt.transpose() * &bt;
    let mut eig: Vec<f64> = gram
        .symmetric_eigenvalues()
        .iter()
        .map(|l| l.max(0.0).sqrt())
        .collect();
    eig.sort_by(|a, b| b.partial_cmp(a).unwrap());
    eig.truncate(rank);
    eig
}

fn to_nalgebra(m: &DenseMatrix) -> DMatrix<f64> {
    DMatrix::from_row_slice(m.rows(), m.cols(), m.as_slice())
}

fn orthonormalize(y: &DenseMatrix) -> DenseMatrix {
    let q = to_nalgebra(y).qr().q();
    let mut out = DenseMatrix::zeros(q.nrows(), q.ncols());
    for r in 0..q.nrows() {
        for c in 0..q.ncols() {
            out.set(r, c, q[(r, c)]);
        }
    }
    out
}
