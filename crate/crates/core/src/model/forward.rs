use crate::error::{invalid, Error, Result};
use crate::numerics::{dot, sigmoid};

use super::{GruParams, HeadParams, ModelParams};

/// Negative-input slope of the attention LeakyReLU.
pub const LEAKY_SLOPE: f64 = 0.2;

pub(crate) struct GruStep {
    pub x: Vec<f64>,
    pub h_prev: Vec<f64>,
    pub z: Vec<f64>,
    pub r: Vec<f64>,
    pub c: Vec<f64>,
}

pub(crate) struct GruTrace {
    pub steps: Vec<GruStep>,
    pub hidden: Vec<f64>,
}

struct StepOut {
    z: Vec<f64>,
    r: Vec<f64>,
    c: Vec<f64>,
    h: Vec<f64>,
}

fn gru_step(gru: &GruParams, x: &[f64], h: &[f64]) -> StepOut {
    let dh = h.len();
    let mut z = gru.b_z.as_slice().to_vec();
    gru.w_z.matvec_acc(x, &mut z);
    gru.u_z.matvec_acc(h, &mut z);
    z.iter_mut().for_each(|v| *v = sigmoid(*v));

    let mut r = gru.b_r.as_slice().to_vec();
    gru.w_r.matvec_acc(x, &mut r);
    gru.u_r.matvec_acc(h, &mut r);
    r.iter_mut().for_each(|v| *v = sigmoid(*v));

    let rh: Vec<f64> = r.iter().zip(h).map(|(a, b)| a * b).collect();
    let mut c = gru.b_h.as_slice().to_vec();
    gru.w_h.matvec_acc(x, &mut c);
    gru.u_h.matvec_acc(&rh, &mut c);
    c.iter_mut().for_each(|v| *v = v.tanh());

    let mut out = vec![0.0; dh];
    for t in 0..dh {
        out[t] = (1.0 - z[t]) * h[t] + z[t] * c[t];
    }
    StepOut { z, r, c, h: out }
}

fn masked(x: &[f64], mask: Option<&Vec<f64>>) -> Vec<f64> {
    match mask {
        Some(m) => x.iter().zip(m).map(|(a, b)| a * b).collect(),
        None => x.to_vec(),
    }
}

fn check_inputs(params: &ModelParams, inputs: &[&[f64]], mask: Option<&[Vec<f64>]>) -> Result<()> {
    let d = params.dims;
    if inputs.len() > d.window {
        return invalid(format!("sequence length {} exceeds window {}", inputs.len(), d.window));
    }
    if let Some(bad) = inputs.iter().find(|x| x.len() != d.embed) {
        return invalid(format!("input dim {} != embedding dim {}", bad.len(), d.embed));
    }
    if let Some(m) = mask {
        if m.len() != inputs.len() || m.iter().any(|v| v.len() != d.embed) {
            return invalid("input dropout mask shape does not match the sequence");
        }
    }
    Ok(())
}

/// Final GRU state over `inputs` from a zero initial state. `mask`, when
/// given, multiplies each input elementwise.
pub fn gru_encode(params: &ModelParams, inputs: &[&[f64]], mask: Option<&[Vec<f64>]>) -> Result<Vec<f64>> {
    check_inputs(params, inputs, mask)?;
    let mut h = vec![0.0; params.dims.hidden];
    for (t, x) in inputs.iter().enumerate() {
        let x = masked(x, mask.map(|m| &m[t]));
        h = gru_step(&params.gru, &x, &h).h;
    }
    Ok(h)
}

pub(crate) fn gru_trace(params: &ModelParams, inputs: &[&[f64]], mask: Option<&[Vec<f64>]>) -> GruTrace {
    let mut h = vec![0.0; params.dims.hidden];
    let mut steps = Vec::with_capacity(inputs.len());
    for (t, x) in inputs.iter().enumerate() {
        let x = masked(x, mask.map(|m| &m[t]));
        let out = gru_step(&params.gru, &x, &h);
        steps.push(GruStep {
            x,
            h_prev: std::mem::replace(&mut h, out.h),
            z: out.z,
            r: out.r,
            c: out.c,
        });
    }
    GruTrace { steps, hidden: h }
}

/// Accumulates parameter gradients of the GRU given `d_hidden` on the final state.
pub(crate) fn gru_backward(params: &GruParams, trace: &GruTrace, d_hidden: &[f64], grads: &mut GruParams) {
    let mut dh = d_hidden.to_vec();
    let n = dh.len();
    let mut da_z = vec![0.0; n];
    let mut da_r = vec![0.0; n];
    let mut da_c = vec![0.0; n];
    let mut d_rh = vec![0.0; n];
    let mut rh = vec![0.0; n];
    for step in trace.steps.iter().rev() {
        let GruStep { x, h_prev, z, r, c } = step;
        let mut dh_prev = vec![0.0; n];
        for t in 0..n {
            dh_prev[t] = dh[t] * (1.0 - z[t]);
            da_z[t] = dh[t] * (c[t] - h_prev[t]) * z[t] * (1.0 - z[t]);
            da_c[t] = dh[t] * z[t] * (1.0 - c[t] * c[t]);
            rh[t] = r[t] * h_prev[t];
        }
        grads.w_h.add_outer(&da_c, x);
        grads.u_h.add_outer(&da_c, &rh);
        crate::numerics::axpy(1.0, &da_c, grads.b_h.as_mut_slice());
        d_rh.iter_mut().for_each(|v| *v = 0.0);
        params.u_h.matvec_t_acc(&da_c, &mut d_rh);
        for t in 0..n {
            dh_prev[t] += d_rh[t] * r[t];
            da_r[t] = d_rh[t] * h_prev[t] * r[t] * (1.0 - r[t]);
        }
        grads.w_z.add_outer(&da_z, x);
        grads.u_z.add_outer(&da_z, h_prev);
        crate::numerics::axpy(1.0, &da_z, grads.b_z.as_mut_slice());
        params.u_z.matvec_t_acc(&da_z, &mut dh_prev);
        grads.w_r.add_outer(&da_r, x);
        grads.u_r.add_outer(&da_r, h_prev);
        crate::numerics::axpy(1.0, &da_r, grads.b_r.as_mut_slice());
        params.u_r.matvec_t_acc(&da_r, &mut dh_prev);
        dh = dh_prev;
    }
}

/// Neighbor hidden states and edge features for one target user.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct NeighborContext {
    pub neighbors: Vec<u32>,
    pub hidden: Vec<Vec<f64>>,
    pub edges: Vec<Vec<f64>>,
}

impl NeighborContext {
    pub fn len(&self) -> usize {
        self.hidden.len()
    }

    pub fn is_empty(&self) -> bool {
        self.hidden.is_empty()
    }
}

/// Per-head intermediate values of the attention step, one row per neighbor.
#[derive(Debug, Clone, PartialEq)]
pub struct HeadOutput {
    /// `p_ik`, what can pass through the edge.
    pub filter: Vec<Vec<f64>>,
    /// `g_ik`, what the target user extracts.
    pub gate: Vec<Vec<f64>>,
    /// `c_ik = g_ik ⊙ p_ik`.
    pub channel: Vec<Vec<f64>>,
    /// Attention logits before the LeakyReLU.
    pub logits: Vec<f64>,
    /// Normalized attention weights.
    pub weights: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AttendOutput {
    pub heads: Vec<HeadOutput>,
    /// Concatenation of the per-head weighted sums, length `H·D_c`.
    pub summary: Vec<f64>,
}

pub(crate) type AttendTrace = AttendOutput;

#[inline]
fn leaky(x: f64) -> f64 {
    if x > 0.0 {
        x
    } else {
        LEAKY_SLOPE * x
    }
}

fn softmax(xs: &[f64]) -> Vec<f64> {
    let m = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let e: Vec<f64> = xs.iter().map(|x| (x - m).exp()).collect();
    let s: f64 = e.iter().sum();
    e.into_iter().map(|v| v / s).collect()
}

fn head_forward(head: &HeadParams, h_i: &[f64], hidden: &[&[f64]], edges: &[&[f64]]) -> HeadOutput {
    let dc = head.b_p.rows();
    let mut gate_base = head.b_g.as_slice().to_vec();
    head.w_gh.matvec_acc(h_i, &mut gate_base);
    let base_logit = dot(head.w_ah.as_slice(), h_i) + head.b_a.as_slice()[0];

    let n = hidden.len();
    let mut out = HeadOutput {
        filter: Vec::with_capacity(n),
        gate: Vec::with_capacity(n),
        channel: Vec::with_capacity(n),
        logits: Vec::with_capacity(n),
        weights: Vec::new(),
    };
    for (h_k, e) in hidden.iter().zip(edges) {
        let mut p = head.b_p.as_slice().to_vec();
        head.w_ph.matvec_acc(h_k, &mut p);
        head.w_pe.matvec_acc(e, &mut p);
        p.iter_mut().for_each(|v| *v = v.tanh());

        let mut g = gate_base.clone();
        head.w_ge.matvec_acc(e, &mut g);
        g.iter_mut().for_each(|v| *v = sigmoid(*v));

        let c: Vec<f64> = (0..dc).map(|t| g[t] * p[t]).collect();
        let logit = base_logit + dot(head.w_ae.as_slice(), e) + dot(head.w_ac.as_slice(), &c);
        out.filter.push(p);
        out.gate.push(g);
        out.channel.push(c);
        out.logits.push(logit);
    }
    let activated: Vec<f64> = out.logits.iter().map(|&s| leaky(s)).collect();
    out.weights = softmax(&activated);
    out
}

pub(crate) fn attend_trace(params: &ModelParams, h_i: &[f64], hidden: &[&[f64]], edges: &[&[f64]]) -> AttendTrace {
    let dc = params.dims.channel;
    let mut summary = vec![0.0; params.dims.summary()];
    let heads: Vec<HeadOutput> = params
        .heads
        .iter()
        .map(|head| head_forward(head, h_i, hidden, edges))
        .collect();
    for (h, out) in heads.iter().enumerate() {
        let slot = &mut summary[h * dc..(h + 1) * dc];
        for (w, c) in out.weights.iter().zip(&out.channel) {
            crate::numerics::axpy(*w, c, slot);
        }
    }
    AttendOutput { heads, summary }
}

/// Multi-head gated attention over the neighbors in `ctx`.
pub fn attend(h_i: &[f64], ctx: &NeighborContext, params: &ModelParams) -> Result<AttendOutput> {
    let d = params.dims;
    if ctx.is_empty() {
        return Err(Error::Contract("attention over an empty neighbor set".into()));
    }
    if h_i.len() != d.hidden
        || ctx.edges.len() != ctx.hidden.len()
        || ctx.hidden.iter().any(|h| h.len() != d.hidden)
        || ctx.edges.iter().any(|e| e.len() != d.edge)
    {
        return invalid("attention input dimensions are inconsistent with the model");
    }
    let hidden: Vec<&[f64]> = ctx.hidden.iter().map(Vec::as_slice).collect();
    let edges: Vec<&[f64]> = ctx.edges.iter().map(Vec::as_slice).collect();
    Ok(attend_trace(params, h_i, &hidden, &edges))
}

/// Accumulates attention-parameter gradients for `d_summary`, adding the
/// induced gradients to `d_target` (for `h_i`) and `d_neighbors` (for each `h_k`).
pub(crate) fn attend_backward(
    params: &ModelParams,
    trace: &AttendTrace,
    h_i: &[f64],
    hidden: &[&[f64]],
    edges: &[&[f64]],
    d_summary: &[f64],
    grads: &mut ModelParams,
    d_target: &mut [f64],
    d_neighbors: &mut [Vec<f64>],
) {
    let dc = params.dims.channel;
    for (h, (head, out)) in params.heads.iter().zip(&trace.heads).enumerate() {
        let g_head = &mut grads.heads[h];
        let d_out = &d_summary[h * dc..(h + 1) * dc];
        let n = out.weights.len();
        // d weight_k = d_out · c_k; softmax then LeakyReLU backward
        let d_w: Vec<f64> = out.channel.iter().map(|c| dot(d_out, c)).collect();
        let mean: f64 = out.weights.iter().zip(&d_w).map(|(w, d)| w * d).sum();
        let mut d_gate_base = vec![0.0; dc];
        for k in 0..n {
            let w = out.weights[k];
            let d_alpha = w * (d_w[k] - mean);
            let d_logit = if out.logits[k] > 0.0 { d_alpha } else { LEAKY_SLOPE * d_alpha };
            let e = edges[k];
            let c = &out.channel[k];
            // logit = w_ah·h_i + w_ae·e + w_ac·c + b_a
            crate::numerics::axpy(d_logit, h_i, g_head.w_ah.as_mut_slice());
            crate::numerics::axpy(d_logit, e, g_head.w_ae.as_mut_slice());
            crate::numerics::axpy(d_logit, c, g_head.w_ac.as_mut_slice());
            g_head.b_a.as_mut_slice()[0] += d_logit;
            crate::numerics::axpy(d_logit, head.w_ah.as_slice(), d_target);

            let p = &out.filter[k];
            let g = &out.gate[k];
            let mut da_p = vec![0.0; dc];
            let mut da_g = vec![0.0; dc];
            for t in 0..dc {
                let dcv = w * d_out[t] + d_logit * head.w_ac.as_slice()[t];
                da_p[t] = dcv * g[t] * (1.0 - p[t] * p[t]);
                da_g[t] = dcv * p[t] * g[t] * (1.0 - g[t]);
            }
            g_head.w_ph.add_outer(&da_p, hidden[k]);
            g_head.w_pe.add_outer(&da_p, e);
            crate::numerics::axpy(1.0, &da_p, g_head.b_p.as_mut_slice());
            head.w_ph.matvec_t_acc(&da_p, &mut d_neighbors[k]);

            g_head.w_ge.add_outer(&da_g, e);
            crate::numerics::axpy(1.0, &da_g, &mut d_gate_base);
        }
        g_head.w_gh.add_outer(&d_gate_base, h_i);
        crate::numerics::axpy(1.0, &d_gate_base, g_head.b_g.as_mut_slice());
        head.w_gh.matvec_t_acc(&d_gate_base, d_target);
    }
}

/// Inverted-dropout multipliers for the two decoder inputs.
#[derive(Debug, Clone, PartialEq)]
pub struct DecoderMasks {
    pub hidden: Vec<f64>,
    pub summary: Vec<f64>,
}

pub(crate) struct DecodeTrace {
    pub hidden: Vec<f64>,
    pub summary: Vec<f64>,
    pub q: Vec<f64>,
}

pub(crate) fn decode_trace(params: &ModelParams, h: &[f64], n: &[f64], masks: Option<&DecoderMasks>) -> DecodeTrace {
    let (hidden, summary) = match masks {
        Some(m) => (
            h.iter().zip(&m.hidden).map(|(a, b)| a * b).collect::<Vec<_>>(),
            n.iter().zip(&m.summary).map(|(a, b)| a * b).collect::<Vec<_>>(),
        ),
        None => (h.to_vec(), n.to_vec()),
    };
    let dec = &params.decoder;
    let mut q = dec.b_q.as_slice().to_vec();
    dec.w_qh.matvec_acc(&hidden, &mut q);
    dec.w_qn.matvec_acc(&summary, &mut q);
    q.iter_mut().for_each(|v| *v = v.tanh());
    DecodeTrace { hidden, summary, q }
}

/// `tanh(W_qh h + W_qn n + b_q)`, with optional dropout masks on `h` and `n`.
pub fn decode(h: &[f64], n: &[f64], params: &ModelParams, masks: Option<&DecoderMasks>) -> Result<Vec<f64>> {
    let d = params.dims;
    if h.len() != d.hidden || n.len() != d.summary() {
        return invalid("decoder input dimensions are inconsistent with the model");
    }
    if let Some(m) = masks {
        if m.hidden.len() != d.hidden || m.summary.len() != d.summary() {
            return invalid("decoder dropout mask shape mismatch");
        }
    }
    Ok(decode_trace(params, h, n, masks).q)
}

/// Backward through the decoder given `d_q`; returns gradients for the
/// unmasked `h` and `n`.
pub(crate) fn decode_backward(
    params: &ModelParams,
    trace: &DecodeTrace,
    d_q: &[f64],
    masks: Option<&DecoderMasks>,
    grads: &mut ModelParams,
) -> (Vec<f64>, Vec<f64>) {
    let da: Vec<f64> = d_q.iter().zip(&trace.q).map(|(d, q)| d * (1.0 - q * q)).collect();
    grads.decoder.w_qh.add_outer(&da, &trace.hidden);
    grads.decoder.w_qn.add_outer(&da, &trace.summary);
    crate::numerics::axpy(1.0, &da, grads.decoder.b_q.as_mut_slice());
    let mut d_h = vec![0.0; trace.hidden.len()];
    let mut d_n = vec![0.0; trace.summary.len()];
    params.decoder.w_qh.matvec_t_acc(&da, &mut d_h);
    params.decoder.w_qn.matvec_t_acc(&da, &mut d_n);
    if let Some(m) = masks {
        d_h.iter_mut().zip(&m.hidden).for_each(|(d, m)| *d *= m);
        d_n.iter_mut().zip(&m.summary).for_each(|(d, m)| *d *= m);
    }
    (d_h, d_n)
}

/// Inner-product relevance score.
pub fn score(q: &[f64], v: &[f64]) -> Result<f64> {
    if q.len() != v.len() {
        return invalid(format!("score dim mismatch: {} vs {}", q.len(), v.len()));
    }
    Ok(dot(q, v))
}

/// Options for [`forward`]; the default is inference with neighbors enabled.
#[derive(Debug, Clone, Copy, Default)]
pub struct ForwardOptions<'a> {
    pub input_mask: Option<&'a [Vec<f64>]>,
    pub decoder_masks: Option<&'a DecoderMasks>,
    /// Zero the neighbor summary (the GRU-only ablation).
    pub neighbor_off: bool,
}

/// Scores `candidates` for a target user: encode, attend, decode, score.
pub fn forward(
    params: &ModelParams,
    target: &[&[f64]],
    ctx: &NeighborContext,
    candidates: &[&[f64]],
    opts: ForwardOptions<'_>,
) -> Result<Vec<f64>> {
    let h = gru_encode(params, target, opts.input_mask)?;
    let n = if opts.neighbor_off {
        vec![0.0; params.dims.summary()]
    } else {
        attend(&h, ctx, params)?.summary
    };
    let q = decode(&h, &n, params, opts.decoder_masks)?;
    candidates.iter().map(|v| score(&q, v)).collect()
}

#[cfg(test)]
mod tests {
    use super::super::ModelDims;
    use super::*;
    use crate::numerics::SeededRng;

    fn dims() -> ModelDims {
        ModelDims {
            hidden: 6,
            edge: 6,
            channel: 3,
            heads: 2,
            embed: 5,
            window: 4,
        }
    }

    fn rand_vec(rng: &mut SeededRng, n: usize, scale: f64) -> Vec<f64> {
        (0..n).map(|_| scale * rng.gaussian()).collect()
    }

    #[test]
    fn empty_sequence_gives_zero_state() {
        let p = ModelParams::init(dims(), 1).unwrap();
        assert_eq!(gru_encode(&p, &[], None).unwrap(), vec![0.0; 6]);
    }

    #[test]
    fn zero_params_zero_inputs_stay_at_zero() {
        let p = ModelParams::zeros(dims());
        let x = vec![0.0; 5];
        let h = gru_encode(&p, &[&x, &x, &x], None).unwrap();
        assert!(h.iter().all(|v| *v == 0.0));
    }

    #[test]
    fn gru_rejects_bad_shapes() {
        let p = ModelParams::zeros(dims());
        let x = vec![0.0; 4];
        assert!(gru_encode(&p, &[&x], None).is_err());
        let y = vec![0.0; 5];
        assert!(gru_encode(&p, &[y.as_slice(); 5], None).is_err());
    }

    #[test]
    fn single_neighbor_gets_full_weight() {
        let mut rng = SeededRng::new(2);
        let p = ModelParams::init(dims(), 2).unwrap();
        let h_i = rand_vec(&mut rng, 6, 0.5);
        let ctx = NeighborContext {
            neighbors: vec![7],
            hidden: vec![rand_vec(&mut rng, 6, 0.5)],
            edges: vec![rand_vec(&mut rng, 6, 0.5)],
        };
        let out = attend(&h_i, &ctx, &p).unwrap();
        for (h, head) in out.heads.iter().enumerate() {
            assert_eq!(head.weights, vec![1.0]);
            assert_eq!(&out.summary[h * 3..(h + 1) * 3], head.channel[0].as_slice());
        }
    }

    #[test]
    fn identical_neighbors_get_uniform_weights() {
        let mut rng = SeededRng::new(3);
        let p = ModelParams::init(dims(), 3).unwrap();
        let h_i = rand_vec(&mut rng, 6, 0.5);
        let hk = rand_vec(&mut rng, 6, 0.5);
        let e = rand_vec(&mut rng, 6, 0.5);
        let ctx = NeighborContext {
            neighbors: vec![1, 2, 3, 4],
            hidden: vec![hk.clone(); 4],
            edges: vec![e.clone(); 4],
        };
        let out = attend(&h_i, &ctx, &p).unwrap();
        for head in &out.heads {
            for w in &head.weights {
                assert!((w - 0.25).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn empty_neighbor_set_is_a_contract_violation() {
        let p = ModelParams::init(dims(), 3).unwrap();
        let err = attend(&[0.0; 6], &NeighborContext::default(), &p).unwrap_err();
        assert!(matches!(err, Error::Contract(_)));
    }

    #[test]
    fn decode_zero_inputs_zero_bias() {
        let p = ModelParams::init(dims(), 4).unwrap();
        let q = decode(&[0.0; 6], &[0.0; 6], &p, None).unwrap();
        assert!(q.iter().all(|v| *v == 0.0));
    }

    #[test]
    fn decode_identity_ablation_path() {
        let mut p = ModelParams::zeros(dims());
        for t in 0..5 {
            p.decoder.w_qh.set(t, t, 1.0);
        }
        let h = [0.3, -0.7, 1.2, 0.0, 2.0, 9.0];
        let q = decode(&h, &[0.0; 6], &p, None).unwrap();
        let want: Vec<f64> = h[..5].iter().map(|v| v.tanh()).collect();
        assert_eq!(q, want);
    }

    #[test]
    fn decode_output_in_open_interval() {
        let mut rng = SeededRng::new(9);
        let p = ModelParams::init(dims(), 9).unwrap();
        for _ in 0..50 {
            let q = decode(&rand_vec(&mut rng, 6, 3.0), &rand_vec(&mut rng, 6, 3.0), &p, None).unwrap();
            assert!(q.iter().all(|v| v.abs() < 1.0));
        }
    }

    #[test]
    fn score_examples() {
        assert_eq!(score(&[1.0, 0.0], &[0.0, 5.0]).unwrap(), 0.0);
        assert_eq!(score(&[1.0, 2.0], &[1.0, 2.0]).unwrap(), 5.0);
        assert_eq!(score(&[1.0, 2.0], &[3.0, -1.0]).unwrap(), 1.0);
        assert!(score(&[1.0], &[1.0, 2.0]).is_err());
    }

    #[test]
    fn all_ones_masks_match_mask_free_forward() {
        let mut rng = SeededRng::new(5);
        let p = ModelParams::init(dims(), 5).unwrap();
        let seq: Vec<Vec<f64>> = (0..3).map(|_| rand_vec(&mut rng, 5, 1.0)).collect();
        let target: Vec<&[f64]> = seq.iter().map(Vec::as_slice).collect();
        let ctx = NeighborContext {
            neighbors: vec![1, 2],
            hidden: (0..2).map(|_| rand_vec(&mut rng, 6, 0.5)).collect(),
            edges: (0..2).map(|_| rand_vec(&mut rng, 6, 0.5)).collect(),
        };
        let cands: Vec<Vec<f64>> = (0..4).map(|_| rand_vec(&mut rng, 5, 1.0)).collect();
        let cand_refs: Vec<&[f64]> = cands.iter().map(Vec::as_slice).collect();
        let plain = forward(&p, &target, &ctx, &cand_refs, ForwardOptions::default()).unwrap();
        let ones = vec![vec![1.0; 5]; 3];
        let dm = DecoderMasks { hidden: vec![1.0; 6], summary: vec![1.0; 6] };
        let masked = forward(
            &p,
            &target,
            &ctx,
            &cand_refs,
            ForwardOptions { input_mask: Some(&ones), decoder_masks: Some(&dm), neighbor_off: false },
        )
        .unwrap();
        assert_eq!(plain, masked);

        let off = forward(&p, &target, &ctx, &cand_refs, ForwardOptions { neighbor_off: true, ..Default::default() }).unwrap();
        let h = gru_encode(&p, &target, None).unwrap();
        let q = decode(&h, &[0.0; 6], &p, None).unwrap();
        let want: Vec<f64> = cands.iter().map(|v| dot(&q, v)).collect();
        assert_eq!(off, want);
    }
}
