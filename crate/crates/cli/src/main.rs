//! `topk` command-line tool.
//!
//! Exit codes: 0 on success, 1 on a usage error, 2 when the work itself fails.

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Duration;

use clap::{Args, CommandFactory, Parser, Subcommand};
use topk::bench::{self, BenchConfig, Engine, RunSettings, SplitConfig};
use topk::dataset::{binarize, load_csv, BinaryDataset, Schema, DEFAULT_MAX_FEATURES};
use topk::learner::{SearchStats, TrainConfig};
use topk::oracle::{check_instance, random_instance};
use topk::synth::{self, SynthSpec};
use topk::{accuracy, DecisionTree, Impurity};

#[derive(Parser, Debug)]
#[command(name = "topk", version, about = "Top-k decision tree learning")]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug)]
struct Global {
    /// Seed for every random choice.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// entropy, gini or sqrt.
    #[arg(long, global = true, default_value = "entropy", value_parser = parse_impurity)]
    impurity: Impurity,
    /// plain or opt.
    #[arg(long, global = true, default_value = "opt", value_parser = parse_engine)]
    engine: Engine,
    /// Seconds allowed per training run.
    #[arg(long, global = true, value_parser = parse_seconds)]
    time_limit: Option<f64>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Turn a raw CSV into 0/1 features.
    Binarize {
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        schema: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = DEFAULT_MAX_FEATURES, value_parser = bounded(1..))]
        max_features: usize,
        /// Also write the feature encoding as JSON.
        #[arg(long)]
        map_out: Option<PathBuf>,
    },
    /// Fit a tree on a binarized CSV.
    Train {
        #[arg(long)]
        data: PathBuf,
        #[arg(long, default_value_t = 1, value_parser = bounded(1..))]
        k: usize,
        #[arg(long, default_value_t = 5)]
        depth: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Accuracy of a saved tree on a binarized CSV.
    Eval {
        #[arg(long)]
        tree: PathBuf,
        #[arg(long)]
        data: PathBuf,
    },
    /// Sample a synthetic dataset.
    #[command(subcommand)]
    Synth(SynthCommand),
    /// Experiment sweeps.
    #[command(subcommand)]
    Bench(BenchCommand),
    /// Compare both engines with the brute-force oracle on random instances.
    OracleCheck {
        #[arg(long, default_value_t = 200)]
        instances: u64,
        #[arg(long, default_value_t = 8, value_parser = bounded(1..=12))]
        max_d: usize,
        #[arg(long, default_value_t = 64, value_parser = bounded(1..))]
        max_n: usize,
        #[arg(long, default_value_t = 3, value_parser = bounded(0..=4))]
        max_depth: usize,
    },
}

#[derive(Args, Debug)]
struct SynthArgs {
    #[arg(long)]
    h: usize,
    #[arg(long = "K", value_name = "K")]
    big_k: usize,
    #[arg(long, value_parser = parse_eps)]
    eps: f64,
    #[arg(long, value_parser = bounded(1..))]
    n: usize,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Subcommand, Debug)]
enum SynthCommand {
    ParityMix(SynthArgs),
    MonotoneMix(SynthArgs),
}

#[derive(Args, Debug)]
struct SweepArgs {
    /// Binarized CSV, or `builtin:<name>` for tic-tac-toe, car or credit.
    #[arg(long)]
    data: String,
    #[arg(long, value_delimiter = ',', required = true, value_parser = bounded(1..))]
    ks: Vec<usize>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Subcommand, Debug)]
enum BenchCommand {
    /// Train/test accuracy over the grid in a JSON config.
    Accuracy {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Training time on growing feature prefixes.
    ScaleFeatures {
        #[command(flatten)]
        sweep: SweepArgs,
        #[arg(long, value_delimiter = ',', required = true)]
        depths: Vec<usize>,
        #[arg(long, value_delimiter = ',', required = true)]
        counts: Vec<usize>,
    },
    /// Training time on growing row prefixes of a seeded shuffle.
    ScaleSamples {
        #[command(flatten)]
        sweep: SweepArgs,
        #[arg(long, value_delimiter = ',', required = true)]
        depths: Vec<usize>,
        #[arg(long, value_delimiter = ',', required = true)]
        counts: Vec<usize>,
    },
    /// Accuracy as a function of k at a fixed depth.
    KPlateau {
        #[command(flatten)]
        sweep: SweepArgs,
        #[arg(long, default_value_t = 3)]
        depth: usize,
        #[arg(long, default_value_t = 10, value_parser = bounded(1..))]
        splits: usize,
    },
}

fn bounded(range: impl std::ops::RangeBounds<u64>) -> clap::builder::RangedU64ValueParser<usize> {
    clap::builder::RangedU64ValueParser::<usize>::new().range(range)
}

fn parse_impurity(s: &str) -> Result<Impurity, String> {
    s.parse().map_err(|e: topk::Error| e.to_string())
}

fn parse_engine(s: &str) -> Result<Engine, String> {
    s.parse().map_err(|e: topk::Error| e.to_string())
}

fn parse_seconds(s: &str) -> Result<f64, String> {
    match s.parse::<f64>() {
        Ok(v) if v > 0.0 && v.is_finite() => Ok(v),
        _ => Err(format!("`{s}` is not a positive number of seconds")),
    }
}

fn parse_eps(s: &str) -> Result<f64, String> {
    match s.parse::<f64>() {
        Ok(v) if (0.0..1.0).contains(&v) => Ok(v),
        _ => Err(format!("`{s}` is not in [0, 1)")),
    }
}

fn load_data(arg: &str) -> topk::Result<BinaryDataset> {
    match arg.strip_prefix("builtin:") {
        Some(name) => bench::load_builtin(name),
        None => BinaryDataset::load_csv(arg),
    }
}

fn data_id(arg: &str) -> String {
    match arg.strip_prefix("builtin:") {
        Some(name) => name.to_owned(),
        None => Path::new(arg)
            .file_stem()
            .map_or_else(|| arg.to_owned(), |s| s.to_string_lossy().into_owned()),
    }
}

impl Global {
    fn limit(&self) -> Option<Duration> {
        self.time_limit.map(Duration::from_secs_f64)
    }

    fn run(&self) -> RunSettings {
        RunSettings {
            engine: self.engine,
            impurity: self.impurity,
            time_limit: self.limit(),
        }
    }
}

fn run(cli: Cli) -> topk::Result<()> {
    let g = &cli.global;
    match cli.command {
        Command::Binarize {
            data,
            schema,
            out,
            max_features,
            map_out,
        } => {
            let raw = load_csv(&data, &Schema::load(&schema)?)?;
            let (ds, map) = binarize(&raw, max_features)?;
            ds.save_csv(&out)?;
            if let Some(p) = map_out {
                map.save(p)?;
            }
            println!(
                "{} rows, {} binary features -> {}",
                ds.n(),
                ds.d(),
                out.display()
            );
        }
        Command::Train {
            data,
            k,
            depth,
            out,
        } => {
            let ds = BinaryDataset::load_csv(&data)?;
            let cfg = TrainConfig::new(k, depth, g.impurity)?.with_time_limit(g.limit());
            let stats = SearchStats::default();
            let fitted = bench::fit(g.engine, &ds, &cfg, &stats)?;
            fitted.tree.save(&out)?;
            println!("train accuracy: {}", fitted.accuracy(ds.n()));
            println!(
                "depth {}, {} nodes, {} recursive calls",
                fitted.tree.depth(),
                fitted.tree.node_count(),
                stats.snapshot().calls
            );
        }
        Command::Eval { tree, data } => {
            let tree = DecisionTree::load(&tree)?;
            let ds = BinaryDataset::load_csv(&data)?;
            println!("accuracy: {}", accuracy(&tree, &ds)?);
        }
        Command::Synth(cmd) => {
            let (a, spec) = match cmd {
                SynthCommand::ParityMix(a) => {
                    let s = SynthSpec::parity_mix(a.h, a.big_k, a.eps)?;
                    (a, s)
                }
                SynthCommand::MonotoneMix(a) => {
                    let s = SynthSpec::monotone_mix(a.h, a.big_k, a.eps)?;
                    (a, s)
                }
            };
            let ds = synth::sample(&spec, a.n, g.seed)?;
            ds.save_csv(&a.out)?;
            println!(
                "{}: {} rows, d = {} -> {}",
                spec.id(),
                ds.n(),
                ds.d(),
                a.out.display()
            );
        }
        Command::Bench(cmd) => bench_command(g, cmd)?,
        Command::OracleCheck {
            instances,
            max_d,
            max_n,
            max_depth,
        } => {
            let mut failures = Vec::new();
            for i in 0..instances {
                let inst = random_instance(g.seed.wrapping_add(i), max_d, max_n, max_depth);
                let out = check_instance(&inst)?;
                if !out.passed() {
                    failures.push(out);
                }
            }
            println!(
                "{} of {instances} instances agree with the oracle",
                instances - failures.len() as u64
            );
            if !failures.is_empty() {
                for f in &failures {
                    println!(
                        "seed {}: oracle {} plain {} opt {} no-tree-below-optimum {}",
                        f.seed,
                        f.oracle_errors,
                        f.plain_errors,
                        f.opt_errors,
                        f.no_tree_below_optimum
                    );
                }
                return Err(topk::Error::Contract(
                    "engine disagrees with the oracle".into(),
                ));
            }
        }
    }
    Ok(())
}

fn bench_command(g: &Global, cmd: BenchCommand) -> topk::Result<()> {
    match cmd {
        BenchCommand::Accuracy { config, out } => {
            let mut cfg = BenchConfig::load(&config)?;
            if let Some(secs) = g.time_limit {
                cfg.time_limit = secs;
            }
            let records = bench::run_accuracy_sweep(&cfg)?;
            bench::write_records(&out, &records)?;
            print_summary(&records);
        }
        BenchCommand::ScaleFeatures {
            sweep,
            depths,
            counts,
        } => {
            let ds = load_data(&sweep.data)?;
            let recs = bench::run_scaling_features(
                &data_id(&sweep.data),
                &ds,
                &sweep.ks,
                &depths,
                &counts,
                &g.run(),
            )?;
            bench::write_scaling(&sweep.out, &recs)?;
            print_scaling(&recs);
        }
        BenchCommand::ScaleSamples {
            sweep,
            depths,
            counts,
        } => {
            let ds = load_data(&sweep.data)?;
            let recs = bench::run_scaling_samples(
                &data_id(&sweep.data),
                &ds,
                &sweep.ks,
                &depths,
                &counts,
                g.seed,
                &g.run(),
            )?;
            bench::write_scaling(&sweep.out, &recs)?;
            print_scaling(&recs);
        }
        BenchCommand::KPlateau {
            sweep,
            depth,
            splits,
        } => {
            let ds = load_data(&sweep.data)?;
            let splits = SplitConfig {
                count: splits,
                seed: g.seed,
                ..SplitConfig::default()
            };
            let records = bench::run_k_plateau(
                &data_id(&sweep.data),
                &ds,
                &sweep.ks,
                depth,
                &splits,
                &g.run(),
            )?;
            bench::write_records(&sweep.out, &records)?;
            print_summary(&records);
        }
    }
    Ok(())
}

fn print_summary(records: &[bench::BenchRecord]) {
    println!("dataset\tk\tdepth\tdone\ttrain\ttest");
    for s in bench::summarize(records) {
        println!(
            "{}\t{}\t{}\t{}\t{:.4}\t{:.4}",
            s.dataset, s.k, s.depth, s.completed, s.mean_train, s.mean_test
        );
    }
}

fn print_scaling(records: &[bench::ScalingRecord]) {
    println!("features\tsamples\tk\tdepth\tms\tstatus");
    for r in records {
        let ms = r
            .train_time_ms
            .map_or_else(|| "DNF".to_owned(), |t| format!("{t:.1}"));
        println!(
            "{}\t{}\t{}\t{}\t{ms}\t{}",
            r.features, r.samples, r.k, r.depth, r.status
        );
    }
}

// usage line of the deepest subcommand named on the command line
fn usage_for(args: impl Iterator<Item = String>) -> String {
    let mut cmd = Cli::command();
    cmd.build();
    for a in args {
        match cmd.find_subcommand(&a) {
            Some(sub) => cmd = sub.clone(),
            None => continue,
        }
    }
    cmd.render_usage().to_string()
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            if !e.use_stderr() {
                let _ = e.print();
                return ExitCode::SUCCESS;
            }
            let rendered = e.render().to_string();
            eprint!("{rendered}");
            if !rendered.contains("Usage:") {
                eprintln!("\n{}", usage_for(std::env::args().skip(1)));
            }
            return ExitCode::from(1);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
