//! CSRN parameters and forward computation.
//!
//! A GRU encodes each user's recent item embeddings. For a target user, every
//! neighbor's hidden state is passed through a per-head edge filter
//! `p = tanh(W_ph h_k + W_pe e + b_p)`, gated by
//! `g = σ(W_gh h_i + W_ge e + b_g)`, and the gated vectors are averaged with
//! attention weights `softmax_k(LeakyReLU(w_ah·h_i + w_ae·e + w_ac·c + b_a))`.
//! The heads are concatenated into the summary `n_i`, decoded together with
//! `h_i` into `q_i = tanh(W_qh h_i + W_qn n_i + b_q)`, and items are scored by
//! `q_i · v_j`.

mod checkpoint;
mod forward;

pub use checkpoint::{
    read_checkpoint, write_checkpoint, Checkpoint, OptimizerSnapshot, CHECKPOINT_MAGIC, CHECKPOINT_VERSION,
};
pub use forward::{
    attend, decode, forward, gru_encode, score, AttendOutput, DecoderMasks, ForwardOptions, HeadOutput,
    NeighborContext, LEAKY_SLOPE,
};
pub(crate) use forward::{
    attend_backward, attend_trace, decode_backward, decode_trace, gru_backward, gru_trace, GruTrace,
};

use crate::error::{invalid, Result};
use crate::numerics::{DenseMatrix, SeededRng};

/// Layer sizes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ModelDims {
    /// GRU hidden size `D_h`.
    pub hidden: usize,
    /// Edge feature size `D_e` (three times the SVD rank).
    pub edge: usize,
    /// Per-head channel width `D_c`.
    pub channel: usize,
    pub heads: usize,
    /// Item embedding size `D_v`.
    pub embed: usize,
    /// Sequence window `L`.
    pub window: usize,
}

impl Default for ModelDims {
    fn default() -> Self {
        ModelDims {
            hidden: 128,
            edge: 96,
            channel: 32,
            heads: 4,
            embed: 256,
            window: 20,
        }
    }
}

impl ModelDims {
    pub fn summary(&self) -> usize {
        self.heads * self.channel
    }

    pub fn validate(&self) -> Result<()> {
        if self.hidden == 0 || self.edge == 0 || self.channel == 0 || self.heads == 0 || self.embed == 0 {
            return invalid(format!("model dimensions must be positive: {self:?}"));
        }
        if self.window == 0 {
            return invalid("sequence window must be at least 1");
        }
        Ok(())
    }
}

/// GRU cell weights. `w_*` act on the input, `u_*` on the previous state.
#[derive(Debug, Clone, PartialEq)]
pub struct GruParams {
    pub w_z: DenseMatrix,
    pub u_z: DenseMatrix,
    pub b_z: DenseMatrix,
    pub w_r: DenseMatrix,
    pub u_r: DenseMatrix,
    pub b_r: DenseMatrix,
    pub w_h: DenseMatrix,
    pub u_h: DenseMatrix,
    pub b_h: DenseMatrix,
}

/// One attention head.
#[derive(Debug, Clone, PartialEq)]
pub struct HeadParams {
    pub w_ph: DenseMatrix,
    pub w_pe: DenseMatrix,
    pub b_p: DenseMatrix,
    pub w_gh: DenseMatrix,
    pub w_ge: DenseMatrix,
    pub b_g: DenseMatrix,
    pub w_ah: DenseMatrix,
    pub w_ae: DenseMatrix,
    pub w_ac: DenseMatrix,
    pub b_a: DenseMatrix,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DecoderParams {
    pub w_qh: DenseMatrix,
    pub w_qn: DenseMatrix,
    pub b_q: DenseMatrix,
}

/// All learnable tensors. The same layout doubles as a gradient container.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams {
    pub dims: ModelDims,
    pub gru: GruParams,
    pub heads: Vec<HeadParams>,
    pub decoder: DecoderParams,
}

const GRU_NAMES: [&str; 9] = ["w_z", "u_z", "b_z", "w_r", "u_r", "b_r", "w_h", "u_h", "b_h"];
const HEAD_NAMES: [&str; 10] = [
    "w_ph", "w_pe", "b_p", "w_gh", "w_ge", "b_g", "w_ah", "w_ae", "w_ac", "b_a",
];
const DECODER_NAMES: [&str; 3] = ["w_qh", "w_qn", "b_q"];

impl GruParams {
    fn tensors(&self) -> [&DenseMatrix; 9] {
        [&self.w_z, &self.u_z, &self.b_z, &self.w_r, &self.u_r, &self.b_r, &self.w_h, &self.u_h, &self.b_h]
    }

    fn tensors_mut(&mut self) -> [&mut DenseMatrix; 9] {
        [
            &mut self.w_z,
            &mut self.u_z,
            &mut self.b_z,
            &mut self.w_r,
            &mut self.u_r,
            &mut self.b_r,
            &mut self.w_h,
            &mut self.u_h,
            &mut self.b_h,
        ]
    }
}

impl HeadParams {
    fn tensors(&self) -> [&DenseMatrix; 10] {
        [
            &self.w_ph, &self.w_pe, &self.b_p, &self.w_gh, &self.w_ge, &self.b_g, &self.w_ah, &self.w_ae,
            &self.w_ac, &self.b_a,
        ]
    }

    fn tensors_mut(&mut self) -> [&mut DenseMatrix; 10] {
        [
            &mut self.w_ph,
            &mut self.w_pe,
            &mut self.b_p,
            &mut self.w_gh,
            &mut self.w_ge,
            &mut self.b_g,
            &mut self.w_ah,
            &mut self.w_ae,
            &mut self.w_ac,
            &mut self.b_a,
        ]
    }
}

impl DecoderParams {
    fn tensors(&self) -> [&DenseMatrix; 3] {
        [&self.w_qh, &self.w_qn, &self.b_q]
    }

    fn tensors_mut(&mut self) -> [&mut DenseMatrix; 3] {
        [&mut self.w_qh, &mut self.w_qn, &mut self.b_q]
    }
}

impl ModelParams {
    pub fn zeros(dims: ModelDims) -> Self {
        let (dh, de, dc, dv) = (dims.hidden, dims.edge, dims.channel, dims.embed);
        let z = DenseMatrix::zeros;
        ModelParams {
            dims,
            gru: GruParams {
                w_z: z(dh, dv),
                u_z: z(dh, dh),
                b_z: z(dh, 1),
                w_r: z(dh, dv),
                u_r: z(dh, dh),
                b_r: z(dh, 1),
                w_h: z(dh, dv),
                u_h: z(dh, dh),
                b_h: z(dh, 1),
            },
            heads: (0..dims.heads)
                .map(|_| HeadParams {
                    w_ph: z(dc, dh),
                    w_pe: z(dc, de),
                    b_p: z(dc, 1),
                    w_gh: z(dc, dh),
                    w_ge: z(dc, de),
                    b_g: z(dc, 1),
                    w_ah: z(1, dh),
                    w_ae: z(1, de),
                    w_ac: z(1, dc),
                    b_a: z(1, 1),
                })
                .collect(),
            decoder: DecoderParams {
                w_qh: z(dv, dh),
                w_qn: z(dv, dims.summary()),
                b_q: z(dv, 1),
            },
        }
    }

    /// Glorot-uniform weights `U(-a, a)`, `a = sqrt(6 / (fan_in + fan_out))`;
    /// biases zero.
    pub fn init(dims: ModelDims, seed: u64) -> Result<Self> {
        dims.validate()?;
        let mut p = Self::zeros(dims);
        let mut rng = SeededRng::new(seed);
        for (name, t) in Self::block_names(&dims).into_iter().zip(p.tensors_mut()) {
            if is_bias(&name) {
                continue;
            }
            let a = (6.0 / (t.rows() + t.cols()) as f64).sqrt();
            for v in t.as_mut_slice() {
                *v = rng.uniform_range(-a, a);
            }
        }
        Ok(p)
    }

    pub fn zeros_like(&self) -> Self {
        Self::zeros(self.dims)
    }

    /// Block names in canonical order, e.g. `gru.w_z`, `head0.w_ph`, `decoder.b_q`.
    pub fn block_names(dims: &ModelDims) -> Vec<String> {
        let mut names: Vec<String> = GRU_NAMES.iter().map(|n| format!("gru.{n}")).collect();
        for h in 0..dims.heads {
            names.extend(HEAD_NAMES.iter().map(|n| format!("head{h}.{n}")));
        }
        names.extend(DECODER_NAMES.iter().map(|n| format!("decoder.{n}")));
        names
    }

    pub fn tensors(&self) -> Vec<&DenseMatrix> {
        let mut out: Vec<&DenseMatrix> = self.gru.tensors().into_iter().collect();
        for h in &self.heads {
            out.extend(h.tensors());
        }
        out.extend(self.decoder.tensors());
        out
    }

    pub fn tensors_mut(&mut self) -> Vec<&mut DenseMatrix> {
        let mut out: Vec<&mut DenseMatrix> = self.gru.tensors_mut().into_iter().collect();
        for h in self.heads.iter_mut() {
            out.extend(h.tensors_mut());
        }
        out.extend(self.decoder.tensors_mut());
        out
    }

    pub fn named_tensors(&self) -> Vec<(String, &DenseMatrix)> {
        Self::block_names(&self.dims).into_iter().zip(self.tensors()).collect()
    }

    pub fn num_scalars(&self) -> usize {
        self.tensors().iter().map(|t| t.len()).sum()
    }

    pub fn is_finite(&self) -> bool {
        self.tensors().iter().all(|t| t.is_finite())
    }

    pub fn squared_norm(&self) -> f64 {
        self.tensors()
            .iter()
            .map(|t| t.as_slice().iter().map(|v| v * v).sum::<f64>())
            .sum()
    }

    /// `self += alpha * other`.
    pub fn add_scaled(&mut self, alpha: f64, other: &ModelParams) {
        for (a, b) in self.tensors_mut().into_iter().zip(other.tensors()) {
            a.add_scaled(alpha, b);
        }
    }

    pub fn scale(&mut self, alpha: f64) {
        for t in self.tensors_mut() {
            t.scale(alpha);
        }
    }

    pub fn same_shape(&self, other: &ModelParams) -> bool {
        self.dims == other.dims
            && self
                .tensors()
                .iter()
                .zip(other.tensors())
                .all(|(a, b)| a.rows() == b.rows() && a.cols() == b.cols())
    }

    /// Bitwise equality of every scalar.
    pub fn bit_eq(&self, other: &ModelParams) -> bool {
        self.same_shape(other)
            && self.tensors().iter().zip(other.tensors()).all(|(a, b)| {
                a.as_slice()
                    .iter()
                    .zip(b.as_slice())
                    .all(|(x, y)| x.to_bits() == y.to_bits())
            })
    }
}

fn is_bias(name: &str) -> bool {
    name.rsplit('.').next().is_some_and(|n| n.starts_with("b_"))
}
