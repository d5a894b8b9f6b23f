use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Arg, ArgMatches, CommandFactory, FromArgMatches, Parser, Subcommand, ValueEnum};

use csrn::config::{NeighborMode, PipelineConfig};
use csrn::coread::{
    build_network, degree_stats, prior_read_stats, read_network, reachability_within, write_adjacency_csv,
    write_degree_csv, write_network, write_prior_reads_csv, write_reachability_csv, CoReadNetwork,
};
use csrn::corpus::{ingest, split, EventStream, Split};
use csrn::embeddings::{fallback_embeddings, load_embeddings, EmbeddingTable};
use csrn::evalbench::{
    evaluate, freeze_candidates, write_ranks_csv, CausalContext, CsrnScorer, EvalCandidateSet, ItemCfScorer,
    PopScorer, RandomScorer, Scorer, UserCfScorer, DEFAULT_KS,
};
use csrn::model::{read_checkpoint, write_checkpoint, Checkpoint};
use csrn::synthgen::generate;
use csrn::training::{fixture, fixture_objective, gradcheck, train, write_log_csv, TrainData};
use csrn::{open_file, Error, ErrorClass, Result};

const FILES_HELP: &str = "\
Artifacts (all under --out):
  synth              events.tsv embeddings.tsv labels_users.csv labels_items.csv labels_bursts.csv
  ingest             corpus.tsv split.txt
  build-net          network.bin
  analyze-net        degree.csv reachability.csv prior_reads.csv adjacency.csv
  freeze-candidates  candidates_test.csv (or candidates_valid.csv)
  train              checkpoint.bin train_log.csv
  evaluate           metrics_<model>.json ranks_<model>.csv
Every configuration key is also a flag: `lr = 0.001` in a file, `--lr 0.001` on the command line.

Exit status: 0 success, 2 configuration error, 3 data error, 4 numerical failure.";

#[derive(Parser, Debug)]
#[command(name = "csrn", version, about = "Co-reading network news recommendation pipeline", after_help = FILES_HELP)]
struct Cli {
    /// Flat key = value configuration file; flags override it.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, global = true, default_value = ".")]
    out: PathBuf,
    /// Single-threaded, fixed-order execution.
    #[arg(long, global = true)]
    deterministic: bool,
    /// Print every configuration key with its effective value and exit.
    #[arg(long, global = true)]
    dump_config: bool,
    #[command(subcommand)]
    cmd: Option<Cmd>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum Window {
    Valid,
    Test,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum ModelKind {
    Csrn,
    Gru,
    Pop,
    Itemcf,
    Usercf,
    Random,
}

impl ModelKind {
    fn name(self) -> &'static str {
        match self {
            ModelKind::Csrn => "csrn",
            ModelKind::Gru => "gru",
            ModelKind::Pop => "pop",
            ModelKind::Itemcf => "itemcf",
            ModelKind::Usercf => "usercf",
            ModelKind::Random => "random",
        }
    }
}

#[derive(clap::Args, Debug)]
struct Inputs {
    /// Click log (user, item, timestamp[, dwell], tab separated).
    #[arg(long)]
    events: PathBuf,
    /// Item embeddings; without it, SVD item vectors from the history window are used.
    #[arg(long)]
    embeddings: Option<PathBuf>,
}

#[derive(Subcommand, Debug)]
enum Cmd {
    /// Generate a synthetic corpus with planted clusters and bursts.
    Synth,
    /// Filter a click log and report the time split.
    Ingest {
        #[arg(long)]
        events: PathBuf,
    },
    /// Build the co-reading network from the history window.
    BuildNet {
        #[arg(long)]
        events: PathBuf,
    },
    /// Degree, reachability and prior-read statistics of a network.
    AnalyzeNet {
        #[arg(long)]
        events: PathBuf,
        /// Defaults to <out>/network.bin.
        #[arg(long)]
        network: Option<PathBuf>,
        #[arg(long, default_value_t = 3)]
        max_steps: usize,
    },
    /// Draw and save the 99-negative candidate lists for a window.
    FreezeCandidates {
        #[command(flatten)]
        inputs: Inputs,
        #[arg(long, value_enum, default_value = "test")]
        split: Window,
    },
    /// Train the model (or the GRU baseline with --neighbor-off true).
    Train {
        #[command(flatten)]
        inputs: Inputs,
        /// Defaults to <out>/network.bin.
        #[arg(long)]
        network: Option<PathBuf>,
    },
    /// Score frozen candidates with one model and write metrics.
    Evaluate {
        #[command(flatten)]
        inputs: Inputs,
        #[arg(long, value_enum)]
        model: ModelKind,
        #[arg(long)]
        network: Option<PathBuf>,
        #[arg(long)]
        checkpoint: Option<PathBuf>,
        /// Defaults to <out>/candidates_test.csv.
        #[arg(long)]
        candidates: Option<PathBuf>,
    },
    /// Print the top-K unread items for a user at a time.
    Recommend {
        #[command(flatten)]
        inputs: Inputs,
        #[arg(long)]
        network: Option<PathBuf>,
        #[arg(long)]
        checkpoint: Option<PathBuf>,
        #[arg(long)]
        user: String,
        #[arg(long)]
        ts: i64,
        #[arg(long, default_value_t = 10)]
        top_k: usize,
    },
    /// Finite-difference gradient check on a small fixture.
    Gradcheck {
        #[arg(long, default_value_t = 7)]
        fixture_seed: u64,
    },
}

fn flag_name(key: &str) -> String {
    key.replace('_', "-")
}

fn command() -> clap::Command {
    let mut cmd = Cli::command();
    for (key, help) in PipelineConfig::KEYS {
        cmd = cmd.arg(
            Arg::new(*key)
                .long(Box::leak(flag_name(key).into_boxed_str()) as &str)
                .global(true)
                .value_name("VALUE")
                .help(*help)
                .help_heading("Configuration"),
        );
    }
    cmd
}

fn effective_config(cli: &Cli, matches: &ArgMatches) -> Result<PipelineConfig> {
    let mut cfg = PipelineConfig::default();
    if let Some(path) = &cli.config {
        cfg.apply_text(&fs::read_to_string(path)?)?;
    }
    let sub = matches.subcommand().map(|(_, m)| m);
    for (key, _) in PipelineConfig::KEYS {
        let value = sub
            .and_then(|m| m.try_get_one::<String>(key).ok().flatten())
            .or_else(|| matches.get_one::<String>(key));
        if let Some(v) = value {
            cfg.set(key, v)?;
        }
    }
    Ok(cfg)
}

fn create(dir: &Path, name: &str) -> Result<BufWriter<File>> {
    Ok(BufWriter::new(File::create(dir.join(name))?))
}

fn comment<W: Write>(w: &mut W, meta: &str) -> Result<()> {
    for line in meta.lines() {
        writeln!(w, "# {line}")?;
    }
    Ok(())
}

struct Corpus {
    stream: EventStream,
    split: Split,
}

fn load_corpus(path: &Path, cfg: &PipelineConfig) -> Result<Corpus> {
    let top_k = if cfg.top_k_users == 0 { usize::MAX } else { cfg.top_k_users };
    let stream = ingest(path, cfg.min_dwell, top_k)?;
    let split = split(&stream, &cfg.split_config(&stream)?)?;
    Ok(Corpus { stream, split })
}

fn load_embeddings_for(inputs: &Inputs, corpus: &Corpus, cfg: &PipelineConfig) -> Result<EmbeddingTable> {
    match &inputs.embeddings {
        Some(p) => {
            let (table, report) = load_embeddings(p, corpus.stream.ids())?;
            if report.unknown_items > 0 {
                log::info!("{} embedding rows name items absent from the log", report.unknown_items);
            }
            Ok(table)
        }
        None => fallback_embeddings(&corpus.split.history, cfg.fallback_dim, cfg.seed),
    }
}

fn load_network(path: Option<&PathBuf>, out: &Path) -> Result<CoReadNetwork> {
    let p = path.cloned().unwrap_or_else(|| out.join("network.bin"));
    Ok(read_network(&mut BufReader::new(open_file(p)?))?.0)
}

fn load_checkpoint(path: Option<&PathBuf>, out: &Path) -> Result<Checkpoint> {
    let p = path.cloned().unwrap_or_else(|| out.join("checkpoint.bin"));
    read_checkpoint(&mut BufReader::new(open_file(p)?))
}

fn check_network(net: &CoReadNetwork, corpus: &Corpus) -> Result<()> {
    if net.num_users() != corpus.stream.num_users() {
        return Err(Error::Config(format!(
            "network has {} users but the log has {}; rebuild it with the same log and filters",
            net.num_users(),
            corpus.stream.num_users()
        )));
    }
    Ok(())
}

fn run(cli: &Cli, cmd: &Cmd, cfg: &PipelineConfig) -> Result<()> {
    let out = cli.out.as_path();
    fs::create_dir_all(out)?;
    let meta = cfg.provenance();
    match cmd {
        Cmd::Synth => {
            let corpus = generate(&cfg.synth_config())?;
            let mut w = create(out, "events.tsv")?;
            comment(&mut w, &meta)?;
            corpus.stream.write_log(&mut w)?;
            w.flush()?;
            let mut w = create(out, "embeddings.tsv")?;
            comment(&mut w, &meta)?;
            corpus.embeddings.write(corpus.stream.ids(), &mut w)?;
            w.flush()?;
            corpus.write_user_labels(&mut create(out, "labels_users.csv")?, &meta)?;
            corpus.write_item_labels(&mut create(out, "labels_items.csv")?, &meta)?;
            corpus.write_burst_labels(&mut create(out, "labels_bursts.csv")?, &meta)?;
            println!(
                "events {} users {} items {} bursts {}",
                corpus.stream.len(),
                corpus.stream.num_users(),
                corpus.stream.num_items(),
                corpus.bursts.len()
            );
        }
        Cmd::Ingest { events } => {
            let c = load_corpus(events, cfg)?;
            let mut w = create(out, "corpus.tsv")?;
            comment(&mut w, &meta)?;
            c.stream.write_log(&mut w)?;
            w.flush()?;
            let sc = cfg.split_config(&c.stream)?;
            let mut w = create(out, "split.txt")?;
            comment(&mut w, &meta)?;
            writeln!(w, "window,start,end,events")?;
            let (lo, _) = c.stream.time_range().unwrap_or((0, 0));
            for (name, start, end, n) in [
                ("history", lo, sc.history_end, c.split.history.len()),
                ("train", sc.history_end, sc.train_end, c.split.train.len()),
                ("valid", sc.train_end, sc.valid_end, c.split.valid.len()),
                ("test", sc.valid_end, sc.test_end, c.split.test.len()),
            ] {
                writeln!(w, "{name},{start},{end},{n}")?;
            }
            w.flush()?;
            println!(
                "events {} users {} items {}",
                c.stream.len(),
                c.stream.num_users(),
                c.stream.num_items()
            );
        }
        Cmd::BuildNet { events } => {
            let c = load_corpus(events, cfg)?;
            let base = build_network(&c.split.history, &cfg.network_config())?;
            let net = match cfg.neighbor_mode {
                NeighborMode::Similarity => base,
                NeighborMode::Random => base.with_random_neighbors(cfg.seed),
                NeighborMode::Permuted => base.with_permuted_labels(cfg.seed),
            };
            let mut w = create(out, "network.bin")?;
            write_network(&mut w, &net, &meta)?;
            w.flush()?;
            println!(
                "users {} rank {} neighbors {} anchored {}",
                net.num_users(),
                net.rank(),
                cfg.neighbors,
                net.num_anchored()
            );
        }
        Cmd::AnalyzeNet {
            events,
            network,
            max_steps,
        } => {
            let c = load_corpus(events, cfg)?;
            let net = load_network(network.as_ref(), out)?;
            check_network(&net, &c)?;
            let deg = degree_stats(&net);
            write_degree_csv(&mut create(out, "degree.csv")?, &deg, &meta)?;
            let reach = reachability_within(&net, *max_steps)?;
            write_reachability_csv(&mut create(out, "reachability.csv")?, &reach, &meta)?;
            let prior = prior_read_stats(&net, &c.split.train);
            write_prior_reads_csv(&mut create(out, "prior_reads.csv")?, &prior, &meta)?;
            write_adjacency_csv(&mut create(out, "adjacency.csv")?, &net, c.stream.ids(), &meta)?;
            println!(
                "users with out-edges {} max out-degree {} reach@{} {:.4} share with >=1 prior neighbor read {:.4}",
                deg.nodes_with_out_edges,
                deg.max_out_degree,
                max_steps,
                reach.fractions.last().copied().unwrap_or(0.0),
                prior.share_at_least(1)
            );
        }
        Cmd::FreezeCandidates { inputs, split: which } => {
            let c = load_corpus(&inputs.events, cfg)?;
            let emb = load_embeddings_for(inputs, &c, cfg)?;
            let covered: Vec<bool> = (0..emb.num_items() as u32).map(|j| emb.is_covered(j)).collect();
            let (clicks, name) = match which {
                Window::Test => (&c.split.test, "candidates_test.csv"),
                Window::Valid => (&c.split.valid, "candidates_valid.csv"),
            };
            let (set, stats) = freeze_candidates(clicks, &c.stream, &covered, &cfg.freeze_config())?;
            let mut w = create(out, name)?;
            set.write(c.stream.ids(), &mut w, &meta)?;
            w.flush()?;
            println!(
                "clicks {} (eligible {}, skipped uncovered {}, skipped re-reads {})",
                set.len(),
                stats.eligible,
                stats.skipped_uncovered,
                stats.skipped_rereads
            );
        }
        Cmd::Train { inputs, network } => {
            let c = load_corpus(&inputs.events, cfg)?;
            let emb = load_embeddings_for(inputs, &c, cfg)?;
            let net = load_network(network.as_ref(), out)?;
            check_network(&net, &c)?;
            let dims = cfg.model_dims(net.edge_dim(), emb.dim());
            let data = TrainData {
                full: &c.stream,
                split: &c.split,
                net: &net,
                embeddings: &emb,
            };
            let outcome = train(&data, dims, &cfg.train_config(), &meta)?;
            let mut w = create(out, "checkpoint.bin")?;
            write_checkpoint(&mut w, &outcome.checkpoint)?;
            w.flush()?;
            let mut w = create(out, "train_log.csv")?;
            write_log_csv(&mut w, &outcome.log, &meta)?;
            w.flush()?;
            let best = outcome.log.iter().find(|r| r.epoch == outcome.best_epoch);
            println!(
                "examples {} best epoch {} val mrr {:.5}",
                outcome.examples.examples,
                outcome.best_epoch,
                best.map_or(f64::NAN, |r| r.val_mrr)
            );
        }
        Cmd::Evaluate {
            inputs,
            model,
            network,
            checkpoint,
            candidates,
        } => {
            let c = load_corpus(&inputs.events, cfg)?;
            let cand_path = candidates.clone().unwrap_or_else(|| out.join("candidates_test.csv"));
            let set = EvalCandidateSet::read(BufReader::new(open_file(cand_path)?), c.stream.ids())?;
            let ctx = CausalContext::new(&c.stream, cfg.window);
            let report = match model {
                ModelKind::Pop => evaluate(&PopScorer::new(&c.split.train), &set, &ctx, &DEFAULT_KS)?,
                ModelKind::Random => evaluate(&RandomScorer { seed: cfg.seed }, &set, &ctx, &DEFAULT_KS)?,
                ModelKind::Itemcf => {
                    let emb = load_embeddings_for(inputs, &c, cfg)?;
                    evaluate(&ItemCfScorer::new(&emb, cfg.itemcf_m)?, &set, &ctx, &DEFAULT_KS)?
                }
                ModelKind::Usercf => {
                    // similarities from everything before the validation window
                    let source = c.stream.window(i64::MIN, cfg.split_config(&c.stream)?.train_end);
                    evaluate(&UserCfScorer::new(&source, cfg.usercf_m)?, &set, &ctx, &DEFAULT_KS)?
                }
                ModelKind::Csrn | ModelKind::Gru => {
                    let emb = load_embeddings_for(inputs, &c, cfg)?;
                    let net = load_network(network.as_ref(), out)?;
                    check_network(&net, &c)?;
                    let ckpt = load_checkpoint(checkpoint.as_ref(), out)?;
                    let scorer = CsrnScorer {
                        name: model.name().into(),
                        params: &ckpt.params,
                        net: &net,
                        embeddings: &emb,
                        neighbor_off: *model == ModelKind::Gru,
                    };
                    evaluate(&scorer as &dyn Scorer, &set, &ctx, &DEFAULT_KS)?
                }
            };
            let name = model.name();
            let mut w = create(out, &format!("metrics_{name}.json"))?;
            writeln!(w, "{}", report.metrics.to_json(name, Some(&meta)))?;
            w.flush()?;
            let mut w = create(out, &format!("ranks_{name}.csv"))?;
            write_ranks_csv(&mut w, &report.ranks, &meta)?;
            w.flush()?;
            println!(
                "{name}: mrr {:.5} hr@1 {:.5} hr@10 {:.5} hr@20 {:.5} clicks {}",
                report.metrics.mrr,
                report.metrics.hr_at(1).unwrap_or(0.0),
                report.metrics.hr_at(10).unwrap_or(0.0),
                report.metrics.hr_at(20).unwrap_or(0.0),
                report.metrics.n_clicks
            );
        }
        Cmd::Recommend {
            inputs,
            network,
            checkpoint,
            user,
            ts,
            top_k,
        } => {
            let c = load_corpus(&inputs.events, cfg)?;
            let ids = c.stream.ids();
            let u = ids
                .user_index(user)
                .ok_or_else(|| Error::Config(format!("unknown user {user:?}")))?;
            let emb = load_embeddings_for(inputs, &c, cfg)?;
            let net = load_network(network.as_ref(), out)?;
            check_network(&net, &c)?;
            let ckpt = load_checkpoint(checkpoint.as_ref(), out)?;
            let ctx = CausalContext::new(&c.stream, cfg.window);
            let items: Vec<u32> = (0..emb.num_items() as u32)
                .filter(|&j| emb.is_covered(j) && !ctx.read_before(u, j, *ts))
                .collect();
            let scorer = CsrnScorer {
                name: "csrn".into(),
                params: &ckpt.params,
                net: &net,
                embeddings: &emb,
                neighbor_off: cfg.neighbor_off,
            };
            let scores = scorer.score(&ctx, u, *ts, &items)?;
            let mut ranked: Vec<(u32, f64)> = items.into_iter().zip(scores).collect();
            ranked.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
            for (j, s) in ranked.into_iter().take(*top_k) {
                println!("{}\t{s:.6}", ids.item_id(j));
            }
        }
        Cmd::Gradcheck { fixture_seed } => {
            let fx = fixture(*fixture_seed)?;
            let report = gradcheck(&fx, &fixture_objective(cfg.loss))?;
            let mut worst = 0.0f64;
            println!("block\tmax_rel\tmax_abs");
            for b in &report {
                println!("{}\t{:.3e}\t{:.3e}", b.block, b.max_rel, b.max_abs);
                worst = worst.max(b.max_rel);
            }
            println!("loss {} max relative error {worst:.3e}", cfg.loss);
            if !(worst <= 1e-4) {
                return Err(Error::NonFinite {
                    example: 0,
                    detail: format!("gradient check failed: max relative error {worst:.3e} > 1e-4"),
                });
            }
        }
    }
    Ok(())
}

fn exit_code(e: &Error) -> u8 {
    match e.class() {
        ErrorClass::Config => 2,
        ErrorClass::Data => 3,
        ErrorClass::Numerical => 4,
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let matches = command().get_matches();
    let cli = match Cli::from_arg_matches(&matches) {
        Ok(c) => c,
        Err(e) => e.exit(),
    };
    let cfg = match effective_config(&cli, &matches) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(exit_code(&e));
        }
    };
    if cli.dump_config {
        print!("{}", cfg.dump());
        return ExitCode::SUCCESS;
    }
    let Some(cmd) = &cli.cmd else {
        eprintln!("error: no subcommand given (see --help)");
        return ExitCode::from(2);
    };
    if cli.deterministic {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(1).build_global() {
            eprintln!("error: cannot configure thread pool: {e}");
            return ExitCode::from(2);
        }
    }
    match run(&cli, cmd, &cfg) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
