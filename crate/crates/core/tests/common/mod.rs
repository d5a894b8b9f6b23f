//! Independent oracles and fixtures shared by the integration tests.
#![allow(dead_code)]

use std::sync::Arc;

use csrn::corpus::{ClickEvent, EventStream, IdMaps};
use csrn::model::{ModelDims, ModelParams};
use csrn::numerics::{DenseMatrix, SeededRng};

/// All singular values of `a`, descending, by one-sided Jacobi rotations on
/// the columns of a dense copy.
pub fn jacobi_singular_values(a: &DenseMatrix) -> Vec<f64> {
    // work on the orientation with fewer columns
    let m = if a.cols() <= a.rows() { a.clone() } else { a.transpose() };
    let (rows, cols) = (m.rows(), m.cols());
    let mut col: Vec<Vec<f64>> = (0..cols).map(|c| (0..rows).map(|r| m.get(r, c)).collect()).collect();
    for _sweep in 0..100 {
        let mut off = 0.0f64;
        for p in 0..cols {
            for q in p + 1..cols {
                let alpha: f64 = col[p].iter().map(|x| x * x).sum();
                let beta: f64 = col[q].iter().map(|x| x * x).sum();
                let gamma: f64 = col[p].iter().zip(&col[q]).map(|(x, y)| x * y).sum();
                if gamma == 0.0 {
                    continue;
                }
                off = off.max(gamma.abs() / (alpha * beta).sqrt());
                let zeta = (beta - alpha) / (2.0 * gamma);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let t = if zeta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                for r in 0..rows {
                    let (x, y) = (col[p][r], col[q][r]);
                    col[p][r] = c * x - s * y;
                    col[q][r] = s * x + c * y;
                }
            }
        }
        if off < 1e-15 {
            break;
        }
    }
    let mut sv: Vec<f64> = col.iter().map(|v| v.iter().map(|x| x * x).sum::<f64>().sqrt()).collect();
    sv.sort_by(|a, b| b.total_cmp(a));
    sv
}

fn sig(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

fn lin(w: &DenseMatrix, x: &[f64], r: usize) -> f64 {
    (0..w.cols()).map(|c| w.get(r, c) * x[c]).sum()
}

/// Step-by-step GRU from a zero state.
pub fn oracle_gru(p: &ModelParams, xs: &[Vec<f64>]) -> Vec<f64> {
    let g = &p.gru;
    let dh = p.dims.hidden;
    let mut h = vec![0.0; dh];
    for x in xs {
        let mut z = vec![0.0; dh];
        let mut r = vec![0.0; dh];
        for t in 0..dh {
            z[t] = sig(lin(&g.w_z, x, t) + lin(&g.u_z, &h, t) + g.b_z.get(t, 0));
            r[t] = sig(lin(&g.w_r, x, t) + lin(&g.u_r, &h, t) + g.b_r.get(t, 0));
        }
        let rh: Vec<f64> = (0..dh).map(|t| r[t] * h[t]).collect();
        let mut next = vec![0.0; dh];
        for t in 0..dh {
            let c = (lin(&g.w_h, x, t) + lin(&g.u_h, &rh, t) + g.b_h.get(t, 0)).tanh();
            next[t] = (1.0 - z[t]) * h[t] + z[t] * c;
        }
        h = next;
    }
    h
}

/// Per-head attention weights and the concatenated summary.
pub fn oracle_attend(p: &ModelParams, h_i: &[f64], hs: &[Vec<f64>], es: &[Vec<f64>]) -> (Vec<Vec<f64>>, Vec<f64>) {
    let dc = p.dims.channel;
    let mut all_w = Vec::new();
    let mut summary = Vec::new();
    for head in &p.heads {
        let mut chans = Vec::new();
        let mut logits = Vec::new();
        for (h_k, e) in hs.iter().zip(es) {
            let mut c = vec![0.0; dc];
            for t in 0..dc {
                let pv = (lin(&head.w_ph, h_k, t) + lin(&head.w_pe, e, t) + head.b_p.get(t, 0)).tanh();
                let gv = sig(lin(&head.w_gh, h_i, t) + lin(&head.w_ge, e, t) + head.b_g.get(t, 0));
                c[t] = gv * pv;
            }
            let s = lin(&head.w_ah, h_i, 0) + lin(&head.w_ae, e, 0) + lin(&head.w_ac, &c, 0) + head.b_a.get(0, 0);
            logits.push(if s > 0.0 { s } else { 0.2 * s });
            chans.push(c);
        }
        let mx = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let ex: Vec<f64> = logits.iter().map(|l| (l - mx).exp()).collect();
        let tot: f64 = ex.iter().sum();
        let w: Vec<f64> = ex.iter().map(|v| v / tot).collect();
        for t in 0..dc {
            summary.push((0..hs.len()).map(|k| w[k] * chans[k][t]).sum());
        }
        all_w.push(w);
    }
    (all_w, summary)
}

pub fn oracle_decode(p: &ModelParams, h: &[f64], n: &[f64]) -> Vec<f64> {
    let d = &p.decoder;
    (0..p.dims.embed)
        .map(|t| (lin(&d.w_qh, h, t) + lin(&d.w_qn, n, t) + d.b_q.get(t, 0)).tanh())
        .collect()
}

pub fn oracle_forward(
    p: &ModelParams,
    target: &[Vec<f64>],
    neighbors: &[Vec<Vec<f64>>],
    edges: &[Vec<f64>],
    candidates: &[Vec<f64>],
) -> Vec<f64> {
    let h = oracle_gru(p, target);
    let hs: Vec<Vec<f64>> = neighbors.iter().map(|s| oracle_gru(p, s)).collect();
    let (_, n) = oracle_attend(p, &h, &hs, edges);
    let q = oracle_decode(p, &h, &n);
    candidates.iter().map(|v| q.iter().zip(v).map(|(a, b)| a * b).sum()).collect()
}

/// Every parameter (biases included) drawn from `scale·N(0,1)`.
pub fn random_params(dims: ModelDims, seed: u64, scale: f64) -> ModelParams {
    let mut p = ModelParams::zeros(dims);
    let mut rng = SeededRng::new(seed);
    for t in p.tensors_mut() {
        for v in t.as_mut_slice() {
            *v = scale * rng.gaussian();
        }
    }
    p
}

pub fn random_vec(rng: &mut SeededRng, n: usize, scale: f64) -> Vec<f64> {
    (0..n).map(|_| scale * rng.gaussian()).collect()
}

pub fn small_dims() -> ModelDims {
    ModelDims { hidden: 6, edge: 6, channel: 3, heads: 2, embed: 5, window: 4 }
}

/// Builds a stream from `(user, item, ts)` with ids `u<k>` / `i<k>`.
pub fn stream(n_users: usize, n_items: usize, events: &[(u32, u32, i64)]) -> EventStream {
    let ids = IdMaps::new(
        (0..n_users).map(|u| format!("u{u}")).collect(),
        (0..n_items).map(|j| format!("i{j}")).collect(),
    )
    .unwrap();
    EventStream::from_events(
        Arc::new(ids),
        events
            .iter()
            .enumerate()
            .map(|(k, &(user, item, ts))| ClickEvent { user, item, ts, dwell: None, seq: k as u64 }),
    )
    .unwrap()
}

/// Two clusters of `per_cluster` users; cluster `c` reads only items
/// `[c·items, (c+1)·items)`, each user a random subset of `reads` of them.
pub fn two_cluster_stream(per_cluster: usize, items: usize, reads: usize, seed: u64) -> EventStream {
    let mut rng = SeededRng::new(seed);
    let mut events = Vec::new();
    let mut ts = 0;
    for u in 0..2 * per_cluster {
        let c = u / per_cluster;
        let mut pool: Vec<u32> = (0..items as u32).map(|j| j + (c * items) as u32).collect();
        rng.shuffle(&mut pool);
        for &j in pool.iter().take(reads) {
            ts += 1;
            events.push((u as u32, j, ts));
        }
    }
    stream(2 * per_cluster, 2 * items, &events)
}
