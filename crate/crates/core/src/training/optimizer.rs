use crate::error::{invalid, Result};
use crate::model::{ModelParams, OptimizerSnapshot};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OptimizerConfig {
    pub lr: f64,
    /// Multiplier applied to the learning rate every `decay_interval` steps.
    pub lr_decay: f64,
    pub decay_interval: u64,
    /// Global gradient-norm ceiling; 0 disables clipping.
    pub clip_norm: f64,
    pub rho: f64,
    pub eps: f64,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        OptimizerConfig {
            lr: 1e-4,
            lr_decay: 0.95,
            decay_interval: 1000,
            clip_norm: 5.0,
            rho: 0.9,
            eps: 1e-8,
        }
    }
}

/// RMSprop state: running mean of squared gradients, step count, current rate.
#[derive(Debug, Clone, PartialEq)]
pub struct OptimizerState {
    pub mean_square: ModelParams,
    pub step: u64,
    pub lr: f64,
}

impl OptimizerState {
    pub fn new(params: &ModelParams, cfg: &OptimizerConfig) -> Self {
        OptimizerState {
            mean_square: params.zeros_like(),
            step: 0,
            lr: cfg.lr,
        }
    }

    pub fn snapshot(&self) -> OptimizerSnapshot {
        OptimizerSnapshot {
            step: self.step,
            lr: self.lr,
            mean_square: self.mean_square.clone(),
        }
    }

    pub fn from_snapshot(s: OptimizerSnapshot) -> Self {
        OptimizerState {
            mean_square: s.mean_square,
            step: s.step,
            lr: s.lr,
        }
    }
}

/// Scales `grads` so its global norm is at most `max_norm`; returns the
/// norm before scaling.
pub fn clip_global_norm(grads: &mut ModelParams, max_norm: f64) -> f64 {
    let norm = grads.squared_norm().sqrt();
    if max_norm > 0.0 && norm > max_norm {
        grads.scale(max_norm / norm);
    }
    norm
}

/// One clipped RMSprop update. `grads` is clipped in place.
pub fn optimizer_step(
    params: &mut ModelParams,
    grads: &mut ModelParams,
    state: &mut OptimizerState,
    cfg: &OptimizerConfig,
) -> Result<()> {
    if !params.same_shape(grads) || !params.same_shape(&state.mean_square) {
        return invalid("optimizer shapes differ");
    }
    clip_global_norm(grads, cfg.clip_norm);
    let lr = state.lr;
    for ((p, g), m) in params
        .tensors_mut()
        .into_iter()
        .zip(grads.tensors())
        .zip(state.mean_square.tensors_mut())
    {
        for ((pv, gv), mv) in p.as_mut_slice().iter_mut().zip(g.as_slice()).zip(m.as_mut_slice()) {
            *mv = cfg.rho * *mv + (1.0 - cfg.rho) * gv * gv;
            *pv -= lr * gv / (mv.sqrt() + cfg.eps);
        }
    }
    state.step += 1;
    if cfg.decay_interval > 0 && state.step % cfg.decay_interval == 0 {
        state.lr *= cfg.lr_decay;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::ModelDims;

    fn dims() -> ModelDims {
        ModelDims {
            hidden: 3,
            edge: 2,
            channel: 2,
            heads: 1,
            embed: 2,
            window: 2,
        }
    }

    #[test]
    fn clipping_halves_norm_ten() {
        let mut g = ModelParams::zeros(dims());
        g.gru.w_z.set(0, 0, 6.0);
        g.gru.u_z.set(0, 0, 8.0);
        let before = g.clone();
        assert_eq!(clip_global_norm(&mut g, 5.0), 10.0);
        assert_eq!(g.gru.w_z.get(0, 0), 3.0);
        assert_eq!(g.gru.u_z.get(0, 0), 4.0);
        let again = g.clone();
        clip_global_norm(&mut g, 5.0);
        assert!(g.bit_eq(&again));
        assert!(!g.bit_eq(&before));
    }

    #[test]
    fn zero_gradient_leaves_params_and_decays_cache() {
        let mut p = ModelParams::init(dims(), 1).unwrap();
        let orig = p.clone();
        let cfg = OptimizerConfig::default();
        let mut st = OptimizerState::new(&p, &cfg);
        st.mean_square.gru.w_z.set(0, 0, 1.0);
        let mut g = p.zeros_like();
        optimizer_step(&mut p, &mut g, &mut st, &cfg).unwrap();
        assert!(p.bit_eq(&orig));
        assert!((st.mean_square.gru.w_z.get(0, 0) - 0.9).abs() < 1e-15);
    }

    #[test]
    fn learning_rate_decays_on_schedule() {
        let mut p = ModelParams::zeros(dims());
        let cfg = OptimizerConfig::default();
        let mut st = OptimizerState::new(&p, &cfg);
        let mut g = p.zeros_like();
        for _ in 0..999 {
            optimizer_step(&mut p, &mut g, &mut st, &cfg).unwrap();
        }
        assert_eq!(st.lr, 1e-4);
        optimizer_step(&mut p, &mut g, &mut st, &cfg).unwrap();
        assert!((st.lr - 9.5e-5).abs() < 1e-18);
    }

    #[test]
    fn first_step_moves_by_lr_over_sqrt_one_minus_rho() {
        let mut p = ModelParams::zeros(dims());
        let cfg = OptimizerConfig { clip_norm: 0.0, ..Default::default() };
        let mut st = OptimizerState::new(&p, &cfg);
        let mut g = p.zeros_like();
        g.decoder.b_q.set(0, 0, 2.0);
        optimizer_step(&mut p, &mut g, &mut st, &cfg).unwrap();
        let want = -1e-4 * 2.0 / ((0.1f64 * 4.0).sqrt() + 1e-8);
        assert!((p.decoder.b_q.get(0, 0) - want).abs() < 1e-18);
    }
}
