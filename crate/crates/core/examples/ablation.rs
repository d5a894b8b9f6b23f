//! Runs the synthetic ablation for one seed and prints test MRR per variant.
//!
//! `cargo run --release -p csrn --example ablation -- [seed] [epochs] [key=value ...]`

use csrn::ablation::{run_ablation, AblationConfig, Variant};

fn main() -> csrn::Result<()> {
    env_logger::init();
    let args: Vec<String> = std::env::args().collect();
    let seed: u64 = args.get(1).and_then(|s| s.parse().ok()).unwrap_or(0);
    let epochs: usize = args.get(2).and_then(|s| s.parse().ok()).unwrap_or(5);

    let mut cfg = AblationConfig::desk(seed, epochs);
    let mut variants = Variant::ALL.to_vec();
    for kv in args.iter().skip(3) {
        let (k, v) = kv.split_once('=').expect("key=value");
        let f = || v.parse::<f64>().expect("number");
        match k {
            "burst_rate" => cfg.synth.burst_rate = f(),
            "burst_strength" => cfg.synth.burst_strength = f(),
            "burst_decay" => cfg.synth.burst_decay = f(),
            "concentration" => cfg.synth.concentration = f(),
            "noise" => cfg.synth.embedding_noise = f(),
            "categories" => cfg.synth.categories = f() as usize,
            "events" => cfg.synth.events_per_user = f(),
            "hidden" => cfg.dims.hidden = f() as usize,
            "channel" => cfg.dims.channel = f() as usize,
            "heads" => cfg.dims.heads = f() as usize,
            "window" => cfg.dims.window = f() as usize,
            "neighbors" => cfg.network.neighbors = f() as usize,
            "lr" => cfg.train.optimizer.lr = f(),
            "models" => {
                variants = Variant::ALL.into_iter().filter(|m| v.split(',').any(|n| n == m.name())).collect();
            }
            _ => panic!("unknown key {k}"),
        }
    }
    for r in run_ablation(&cfg, &variants)? {
        let curve: Vec<String> = r.log.iter().map(|row| format!("{:.4}", row.val_mrr)).collect();
        println!(
            "{}: test mrr {:.4} hr10 {:.4} best epoch {} val [{}] ({:.1}s)",
            r.variant.name(),
            r.test.mrr,
            r.test.hr_at(10).unwrap_or(0.0),
            r.best_epoch,
            curve.join(" "),
            r.seconds
        );
    }
    Ok(())
}
