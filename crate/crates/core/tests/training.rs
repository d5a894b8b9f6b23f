mod common;

use common::stream;
use csrn::coread::{build_network, NetworkConfig};
use csrn::corpus::{split, SplitConfig};
use csrn::model::{ModelDims, ModelParams};
use csrn::numerics::SeededRng;
use csrn::synthgen::{generate, SynthConfig};
use csrn::training::{
    backward, batch_loss, clip_global_norm, fixture, loss, loss_and_grad, train, write_log_csv, LossKind,
    NegativeSampler, Objective, OptimizerConfig, SamplerConfig, TrainConfig, TrainData,
};
use proptest::prelude::*;

#[test]
fn popularity_sampling_tracks_click_counts() {
    // item 1: 100 clicks, item 2: 10 clicks, item 0: the positive
    let mut events: Vec<(u32, u32, i64)> = (0..100).map(|u| (u, 1, 10 + u as i64)).collect();
    events.extend((100..110).map(|u| (u, 2, 10 + u as i64)));
    events.push((110, 0, 5));
    let s = stream(111, 3, &events);
    let sampler = NegativeSampler::new(&s, vec![true; 3], SamplerConfig { window: 86_400, uniform: false }).unwrap();
    let mut rng = SeededRng::new(5);
    let mut counts = [0usize; 3];
    for _ in 0..100_000 {
        let d = sampler.sample(&|| "probe".into(), 1_000, &[], 0, 1, &mut rng).unwrap();
        counts[d[0] as usize] += 1;
    }
    assert_eq!(counts[0], 0);
    let ratio = counts[1] as f64 / counts[2] as f64;
    assert!((ratio / 10.0 - 1.0).abs() < 0.05, "ratio {ratio}");
}

#[test]
fn hand_evaluated_losses() {
    let r = 0.7;
    let bpr = loss(LossKind::BprMax, r, &[r], 1.0).unwrap();
    assert!((bpr - (2f64.ln() + r * r)).abs() < 1e-11);
    assert!((loss(LossKind::Top1Max, 0.0, &[0.0], 1.0).unwrap() - 1.0).abs() < 1e-15);
    let xe = loss(LossKind::Xe, 0.3, &[0.3; 7], 0.0).unwrap();
    assert!((xe - 8f64.ln()).abs() < 1e-12);
}

/// Central differences of `batch_loss` at a few coordinates of every block.
#[test]
fn backward_agrees_with_independent_differences() {
    for kind in LossKind::ALL {
        let fx = fixture(13).unwrap();
        let obj = Objective { kind, score_reg: 1.0, weight_decay: 1e-3, neighbor_off: false };
        let (_, grads) = backward(&fx.params, &fx.embeddings, &fx.batch, Some(&fx.masks), &obj).unwrap();
        let mut rng = SeededRng::new(99);
        let n_blocks = fx.params.tensors().len();
        for b in 0..n_blocks {
            let len = fx.params.tensors()[b].len();
            for _ in 0..3 {
                let k = rng.below(len);
                let eval = |delta: f64| {
                    let mut p = fx.params.clone();
                    p.tensors_mut()[b].as_mut_slice()[k] += delta;
                    batch_loss(&p, &fx.embeddings, &fx.batch, Some(&fx.masks), &obj).unwrap()
                };
                let h = 1e-5;
                let numeric = (eval(h) - eval(-h)) / (2.0 * h);
                let analytic = grads.tensors()[b].as_slice()[k];
                let rel = (numeric - analytic).abs() / numeric.abs().max(analytic.abs()).max(1e-6);
                assert!(rel <= 1e-4, "{kind} block {b} coord {k}: {analytic} vs {numeric}");
            }
        }
    }
}

fn neighbor_blocks(g: &ModelParams) -> Vec<f64> {
    let mut out = Vec::new();
    for h in &g.heads {
        for t in [&h.w_ph, &h.w_pe, &h.b_p, &h.w_gh, &h.w_ge, &h.b_g, &h.w_ah, &h.w_ae, &h.w_ac, &h.b_a] {
            out.extend_from_slice(t.as_slice());
        }
    }
    out.extend_from_slice(g.decoder.w_qn.as_slice());
    out
}

#[test]
fn neighbor_path_gradients_vanish_only_when_disabled() {
    let fx = fixture(3).unwrap();
    let on = Objective { kind: LossKind::BprMax, score_reg: 1.0, weight_decay: 0.0, neighbor_off: false };
    let off = Objective { neighbor_off: true, ..on };
    let (_, g_on) = backward(&fx.params, &fx.embeddings, &fx.batch, None, &on).unwrap();
    let (_, g_off) = backward(&fx.params, &fx.embeddings, &fx.batch, None, &off).unwrap();
    assert!(neighbor_blocks(&g_on).iter().any(|v| *v != 0.0));
    assert!(neighbor_blocks(&g_off).iter().all(|v| *v == 0.0));
}

#[test]
fn weight_decay_adds_exactly_its_own_gradient() {
    let fx = fixture(4).unwrap();
    let base = Objective { kind: LossKind::Top1Max, score_reg: 1.0, weight_decay: 0.0, neighbor_off: false };
    let wd = Objective { weight_decay: 0.01, ..base };
    let (l0, g0) = backward(&fx.params, &fx.embeddings, &fx.batch, Some(&fx.masks), &base).unwrap();
    let (l1, g1) = backward(&fx.params, &fx.embeddings, &fx.batch, Some(&fx.masks), &wd).unwrap();
    assert!((l1 - l0 - 0.005 * fx.params.squared_norm()).abs() < 1e-12);
    for ((a, b), p) in g1.tensors().iter().zip(g0.tensors()).zip(fx.params.tensors()) {
        for ((x, y), t) in a.as_slice().iter().zip(b.as_slice()).zip(p.as_slice()) {
            assert!((x - y - 0.01 * t).abs() < 1e-12);
        }
    }
}

#[test]
fn backward_is_bitwise_identical_across_thread_counts() {
    let fx = fixture(8).unwrap();
    let obj = Objective { kind: LossKind::Xe, score_reg: 0.0, weight_decay: 1e-4, neighbor_off: false };
    let run = |threads: usize| {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .unwrap()
            .install(|| backward(&fx.params, &fx.embeddings, &fx.batch, Some(&fx.masks), &obj).unwrap())
    };
    let (l1, g1) = run(1);
    let (l4, g4) = run(4);
    assert_eq!(l1.to_bits(), l4.to_bits());
    assert!(g1.bit_eq(&g4));
}

struct Tiny {
    corpus: csrn::synthgen::SynthCorpus,
    split: csrn::corpus::Split,
    net: csrn::coread::CoReadNetwork,
}

fn tiny() -> Tiny {
    let sc = SynthConfig { users: 300, items: 300, events_per_user: 40.0, embedding_dim: 16, seed: 6, ..Default::default() };
    let corpus = generate(&sc).unwrap();
    let cfg = SplitConfig::proportional(&corpus.stream, 0.5, 0.35, 0.075).unwrap();
    let split = split(&corpus.stream, &cfg).unwrap();
    let net = build_network(&split.history, &NetworkConfig { rank: 16, neighbors: 10, use_tfidf: true, seed: 6 }).unwrap();
    Tiny { corpus, split, net }
}

fn tiny_config(epochs: usize) -> (ModelDims, TrainConfig) {
    let dims = ModelDims { hidden: 16, edge: 48, channel: 8, heads: 2, embed: 16, window: 6 };
    let cfg = TrainConfig {
        negatives: 16,
        batch_size: 64,
        epochs,
        seed: 2,
        optimizer: OptimizerConfig { lr: 2e-3, ..Default::default() },
        sampler: SamplerConfig { window: 3 * 86_400, uniform: false },
        max_examples_per_epoch: Some(3_000),
        val_max_clicks: Some(300),
        patience: 0,
        ..Default::default()
    };
    (dims, cfg)
}

#[test]
fn training_is_deterministic_and_improves_validation() {
    let t = tiny();
    let data = TrainData { full: &t.corpus.stream, split: &t.split, net: &t.net, embeddings: &t.corpus.embeddings };
    let (dims, cfg) = tiny_config(3);
    let a = train(&data, dims, &cfg, "m").unwrap();
    let b = train(&data, dims, &cfg, "m").unwrap();
    assert!(a.checkpoint.params.bit_eq(&b.checkpoint.params));
    let (mut la, mut lb) = (Vec::new(), Vec::new());
    write_log_csv(&mut la, &a.log, "m").unwrap();
    write_log_csv(&mut lb, &b.log, "m").unwrap();
    assert_eq!(la, lb);

    let init = a.log[0].val_mrr;
    let best = a.log.iter().map(|r| r.val_mrr).fold(f64::MIN, f64::max);
    assert!(best > init, "validation MRR {init} never improved: {:?}", a.log);
    assert!(a.best_epoch >= 1);
    assert!(a.checkpoint.optimizer.is_some());
}

#[test]
fn zero_epochs_returns_the_initialization() {
    let t = tiny();
    let data = TrainData { full: &t.corpus.stream, split: &t.split, net: &t.net, embeddings: &t.corpus.embeddings };
    let (dims, cfg) = tiny_config(0);
    let out = train(&data, dims, &cfg, "").unwrap();
    assert!(out.checkpoint.params.bit_eq(&ModelParams::init(dims, cfg.seed).unwrap()));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn loss_gradients_match_differences(r in -3.0f64..3.0, negs in prop::collection::vec(-3.0f64..3.0, 1..6), lam in 0.0f64..2.0) {
        for kind in LossKind::ALL {
            let (_, dr, dn) = loss_and_grad(kind, r, &negs, lam).unwrap();
            let h = 1e-6;
            let num = (loss(kind, r + h, &negs, lam).unwrap() - loss(kind, r - h, &negs, lam).unwrap()) / (2.0 * h);
            prop_assert!((num - dr).abs() < 1e-6 * (1.0 + dr.abs()));
            for k in 0..negs.len() {
                let mut up = negs.clone();
                let mut dn_ = negs.clone();
                up[k] += h;
                dn_[k] -= h;
                let num = (loss(kind, r, &up, lam).unwrap() - loss(kind, r, &dn_, lam).unwrap()) / (2.0 * h);
                prop_assert!((num - dn[k]).abs() < 1e-6 * (1.0 + dn[k].abs()));
            }
        }
    }

    #[test]
    fn xe_ignores_a_common_shift(r in -3.0f64..3.0, negs in prop::collection::vec(-3.0f64..3.0, 1..6), c in -10.0f64..10.0) {
        let shifted: Vec<f64> = negs.iter().map(|v| v + c).collect();
        let a = loss(LossKind::Xe, r, &negs, 0.0).unwrap();
        let b = loss(LossKind::Xe, r + c, &shifted, 0.0).unwrap();
        prop_assert!((a - b).abs() < 1e-10);
    }

    #[test]
    fn clipping_bounds_the_global_norm(seed in any::<u64>(), scale in 0.01f64..100.0, max in 0.1f64..10.0) {
        let dims = ModelDims { hidden: 3, edge: 3, channel: 2, heads: 1, embed: 2, window: 2 };
        let mut g = ModelParams::init(dims, seed).unwrap();
        g.scale(scale);
        let before = g.squared_norm().sqrt();
        let reported = clip_global_norm(&mut g, max);
        prop_assert!((reported - before).abs() < 1e-12 * before.max(1.0));
        prop_assert!(g.squared_norm().sqrt() <= max + 1e-9);
        prop_assert!(g.squared_norm().sqrt() <= before + 1e-12);
    }
}
