//! Experiment harness: accuracy sweeps over `(k, depth)`, training-time
//! scaling in feature and sample count, and the accuracy-vs-k plateau.
//!
//! Every cell trains on its own data and reports into its own record, so a
//! timeout in one cell leaves the rest untouched. Records come back ordered
//! by cell key regardless of which finished first.

use std::collections::{BTreeSet, HashSet};
use std::fmt;
use std::fs::File;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::{Duration, Instant};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::dataset::{
    binarize, load_csv, train_test_split, write_atomically, BinaryDataset, RawColumn, RawDataset,
    RawValues, Schema,
};
use crate::error::{Error, Result};
use crate::impurity::Impurity;
use crate::learner::{train_topk_with_stats, Fitted, SearchStats, StatsSnapshot, TrainConfig};
use crate::opt::train_opt_with_stats;
use crate::par;
use crate::synth::{self, SynthSpec};
use crate::tree::accuracy;

pub const RESULTS_HEADER: &str = "dataset,k,depth,split,train_acc,test_acc,train_time_ms,status";
pub const SCALING_HEADER: &str =
    "dataset,features,samples,k,depth,train_time_ms,calls,depth_zero_calls,feature_evaluations,status";

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Engine {
    Plain,
    #[default]
    Opt,
}

impl fmt::Display for Engine {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Engine::Plain => "plain",
            Engine::Opt => "opt",
        })
    }
}

impl FromStr for Engine {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "plain" => Ok(Engine::Plain),
            "opt" => Ok(Engine::Opt),
            _ => Err(Error::Config(format!("unknown engine `{s}`"))),
        }
    }
}

/// Trains with the chosen engine. Both return the same training error.
pub fn fit(
    engine: Engine,
    data: &BinaryDataset,
    cfg: &TrainConfig,
    stats: &SearchStats,
) -> Result<Fitted> {
    let view = data.view();
    match engine {
        Engine::Plain => train_topk_with_stats(&view, cfg, stats),
        Engine::Opt => train_opt_with_stats(&view, cfg, stats),
    }
}

/// Where a benchmark dataset comes from.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged, deny_unknown_fields)]
pub enum DatasetSource {
    /// Built-in data: `tic-tac-toe`, `car` or `credit`.
    Builtin { builtin: String },
    Synth {
        synth: SynthSpec,
        n: usize,
        #[serde(default)]
        seed: u64,
    },
    /// Raw CSV plus schema, binarized on load.
    Raw {
        path: PathBuf,
        schema: PathBuf,
        #[serde(default = "default_max_features")]
        max_features: usize,
    },
    /// Already-binarized CSV, or `builtin:<name>`.
    Binary(PathBuf),
}

fn builtin_name(path: &Path) -> Option<&str> {
    path.to_str()?.strip_prefix("builtin:")
}

fn default_max_features() -> usize {
    crate::dataset::DEFAULT_MAX_FEATURES
}

impl DatasetSource {
    pub fn id(&self) -> String {
        match self {
            DatasetSource::Builtin { builtin } => builtin.clone(),
            DatasetSource::Synth { synth, n, seed } => format!("{}-n{n}-s{seed}", synth.id()),
            DatasetSource::Binary(path) if builtin_name(path).is_some() => {
                builtin_name(path).unwrap().to_owned()
            }
            DatasetSource::Raw { path, .. } | DatasetSource::Binary(path) => {
                path.file_stem().map_or_else(
                    || path.display().to_string(),
                    |s| s.to_string_lossy().into_owned(),
                )
            }
        }
    }

    pub fn load(&self) -> Result<BinaryDataset> {
        match self {
            DatasetSource::Builtin { builtin } => load_builtin(builtin),
            DatasetSource::Synth {
                synth: spec,
                n,
                seed,
            } => synth::sample(spec, *n, *seed),
            DatasetSource::Raw {
                path,
                schema,
                max_features,
            } => {
                let raw = load_csv(path, &Schema::load(schema)?)?;
                Ok(binarize(&raw, *max_features)?.0)
            }
            DatasetSource::Binary(path) => match builtin_name(path) {
                Some(name) => load_builtin(name),
                None => BinaryDataset::load_csv(path),
            },
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SplitConfig {
    #[serde(default = "default_split_count")]
    pub count: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_fraction")]
    pub fraction: f64,
}

fn default_split_count() -> usize {
    10
}

fn default_fraction() -> f64 {
    0.8
}

impl Default for SplitConfig {
    fn default() -> Self {
        Self {
            count: default_split_count(),
            seed: 0,
            fraction: default_fraction(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BenchConfig {
    pub datasets: Vec<DatasetSource>,
    pub ks: Vec<usize>,
    pub depths: Vec<usize>,
    #[serde(default)]
    pub splits: SplitConfig,
    #[serde(default)]
    pub impurity: Impurity,
    #[serde(default)]
    pub engine: Engine,
    /// Seconds per training run.
    pub time_limit: f64,
}

impl BenchConfig {
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let cfg: Self = serde_json::from_reader(File::open(path)?)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.datasets.is_empty() || self.ks.is_empty() || self.depths.is_empty() {
            return Err(Error::Config(
                "datasets, ks and depths must be nonempty".into(),
            ));
        }
        if self.splits.count == 0 {
            return Err(Error::Config("at least one split is required".into()));
        }
        if self.ks.contains(&0) {
            return Err(Error::Config("k must be at least 1".into()));
        }
        time_limit(self.time_limit).map(|_| ())
    }
}

fn time_limit(secs: f64) -> Result<Duration> {
    if secs <= 0.0 || !secs.is_finite() {
        return Err(Error::Config(format!(
            "time limit {secs} must be a positive number of seconds"
        )));
    }
    Ok(Duration::from_secs_f64(secs))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Status {
    Ok,
    Timeout,
}

impl fmt::Display for Status {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Status::Ok => "ok",
            Status::Timeout => "timeout",
        })
    }
}

/// One `(dataset, split, k, depth)` cell. Measurements are `None` on timeout.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BenchRecord {
    pub dataset: String,
    pub k: usize,
    pub depth: usize,
    pub split: usize,
    pub train_acc: Option<f64>,
    pub test_acc: Option<f64>,
    pub train_time_ms: Option<f64>,
    pub status: Status,
}

/// Shared knobs for one training call.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RunSettings {
    pub engine: Engine,
    pub impurity: Impurity,
    pub time_limit: Option<Duration>,
}

struct Timed {
    fitted: Option<Fitted>,
    ms: f64,
    stats: StatsSnapshot,
}

// times the training call only
fn timed_fit(data: &BinaryDataset, k: usize, depth: usize, run: &RunSettings) -> Result<Timed> {
    let cfg = TrainConfig::new(k, depth, run.impurity)?.with_time_limit(run.time_limit);
    let stats = SearchStats::default();
    let start = Instant::now();
    let out = fit(run.engine, data, &cfg, &stats);
    let ms = start.elapsed().as_secs_f64() * 1e3;
    match out {
        Ok(f) => Ok(Timed {
            fitted: Some(f),
            ms,
            stats: stats.snapshot(),
        }),
        Err(Error::Timeout) => Ok(Timed {
            fitted: None,
            ms,
            stats: stats.snapshot(),
        }),
        Err(e) => Err(e),
    }
}

/// All `(split, k, depth)` cells for one dataset, ordered by that key.
pub fn run_cells(
    id: &str,
    data: &BinaryDataset,
    ks: &[usize],
    depths: &[usize],
    splits: &SplitConfig,
    run: &RunSettings,
) -> Result<Vec<BenchRecord>> {
    let parts = (0..splits.count)
        .map(|s| train_test_split(data, splits.fraction, splits.seed.wrapping_add(s as u64)))
        .collect::<Result<Vec<_>>>()?;
    let mut cells = Vec::new();
    for split in 0..splits.count {
        for &k in ks {
            for &depth in depths {
                cells.push((split, k, depth));
            }
        }
    }
    par::map(&cells, true, |&(split, k, depth)| {
        let (train, test) = &parts[split];
        let t = timed_fit(train, k, depth, run)?;
        let (train_acc, test_acc, status) = match &t.fitted {
            Some(f) => (
                Some(f.accuracy(train.n())),
                Some(accuracy(&f.tree, test)?),
                Status::Ok,
            ),
            None => (None, None, Status::Timeout),
        };
        Ok(BenchRecord {
            dataset: id.to_owned(),
            k,
            depth,
            split,
            train_acc,
            test_acc,
            train_time_ms: t.fitted.as_ref().map(|_| t.ms),
            status,
        })
    })
    .into_iter()
    .collect()
}

/// Train/test accuracy for every dataset, split, k and depth in `cfg`.
pub fn run_accuracy_sweep(cfg: &BenchConfig) -> Result<Vec<BenchRecord>> {
    cfg.validate()?;
    let run = RunSettings {
        engine: cfg.engine,
        impurity: cfg.impurity,
        time_limit: Some(time_limit(cfg.time_limit)?),
    };
    let mut out = Vec::new();
    for source in &cfg.datasets {
        let data = source.load()?;
        out.extend(run_cells(
            &source.id(),
            &data,
            &cfg.ks,
            &cfg.depths,
            &cfg.splits,
            &run,
        )?);
    }
    Ok(out)
}

/// Accuracy as a function of `k` at a fixed depth (3 by convention).
pub fn run_k_plateau(
    id: &str,
    data: &BinaryDataset,
    ks: &[usize],
    depth: usize,
    splits: &SplitConfig,
    run: &RunSettings,
) -> Result<Vec<BenchRecord>> {
    if ks.is_empty() || ks.contains(&0) || ks.iter().any(|&k| k > data.d()) {
        return Err(Error::Config(format!("ks must lie in 1..={}", data.d())));
    }
    run_cells(id, data, ks, &[depth], splits, run)
}

/// Mean and standard deviation over splits of completed cells.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Summary {
    pub dataset: String,
    pub k: usize,
    pub depth: usize,
    pub completed: usize,
    pub mean_train: f64,
    pub std_train: f64,
    pub mean_test: f64,
    pub std_test: f64,
}

fn mean_std(xs: &[f64]) -> (f64, f64) {
    if xs.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let m = xs.iter().sum::<f64>() / xs.len() as f64;
    let var = xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / xs.len() as f64;
    (m, var.sqrt())
}

pub fn summarize(records: &[BenchRecord]) -> Vec<Summary> {
    let keys: BTreeSet<(String, usize, usize)> = records
        .iter()
        .map(|r| (r.dataset.clone(), r.k, r.depth))
        .collect();
    keys.into_iter()
        .map(|(dataset, k, depth)| {
            let cell: Vec<&BenchRecord> = records
                .iter()
                .filter(|r| r.dataset == dataset && r.k == k && r.depth == depth)
                .collect();
            let train: Vec<f64> = cell.iter().filter_map(|r| r.train_acc).collect();
            let test: Vec<f64> = cell.iter().filter_map(|r| r.test_acc).collect();
            let (mean_train, std_train) = mean_std(&train);
            let (mean_test, std_test) = mean_std(&test);
            Summary {
                dataset,
                k,
                depth,
                completed: train.len(),
                mean_train,
                std_train,
                mean_test,
                std_test,
            }
        })
        .collect()
}

fn opt_cell<T: fmt::Display>(v: Option<T>) -> String {
    v.map_or_else(String::new, |v| v.to_string())
}

pub fn write_records(path: impl AsRef<Path>, records: &[BenchRecord]) -> Result<()> {
    write_atomically(path.as_ref(), |f| {
        let mut w = csv::Writer::from_writer(f);
        w.write_record(RESULTS_HEADER.split(','))?;
        for r in records {
            w.write_record([
                r.dataset.clone(),
                r.k.to_string(),
                r.depth.to_string(),
                r.split.to_string(),
                opt_cell(r.train_acc),
                opt_cell(r.test_acc),
                opt_cell(r.train_time_ms.map(|t| format!("{t:.3}"))),
                r.status.to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    })
}

/// One training run of a scaling sweep.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScalingRecord {
    pub dataset: String,
    pub features: usize,
    pub samples: usize,
    pub k: usize,
    pub depth: usize,
    pub train_time_ms: Option<f64>,
    pub calls: Option<u64>,
    pub depth_zero_calls: Option<u64>,
    pub feature_evaluations: Option<u64>,
    pub status: Status,
}

pub fn write_scaling(path: impl AsRef<Path>, records: &[ScalingRecord]) -> Result<()> {
    write_atomically(path.as_ref(), |f| {
        let mut w = csv::Writer::from_writer(f);
        w.write_record(SCALING_HEADER.split(','))?;
        for r in records {
            w.write_record([
                r.dataset.clone(),
                r.features.to_string(),
                r.samples.to_string(),
                r.k.to_string(),
                r.depth.to_string(),
                opt_cell(r.train_time_ms.map(|t| format!("{t:.3}"))),
                opt_cell(r.calls),
                opt_cell(r.depth_zero_calls),
                opt_cell(r.feature_evaluations),
                r.status.to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    })
}

fn check_increasing(sizes: &[usize], max: usize, what: &str) -> Result<()> {
    if sizes.is_empty() || sizes.windows(2).any(|w| w[0] >= w[1]) || sizes[0] == 0 {
        return Err(Error::Config(format!(
            "{what} counts must be positive and increasing"
        )));
    }
    if *sizes.last().expect("nonempty") > max {
        return Err(Error::Config(format!(
            "{what} counts exceed the available {max}"
        )));
    }
    Ok(())
}

// cells run one at a time so timings are not contended
fn scaling_runs(
    id: &str,
    subsets: &[BinaryDataset],
    ks: &[usize],
    depths: &[usize],
    run: &RunSettings,
) -> Result<Vec<ScalingRecord>> {
    if ks.is_empty() || depths.is_empty() {
        return Err(Error::Config("ks and depths must be nonempty".into()));
    }
    let mut out = Vec::new();
    for data in subsets {
        for &k in ks {
            for &depth in depths {
                let t = timed_fit(data, k, depth, run)?;
                let ok = t.fitted.is_some();
                let keep = |v: u64| ok.then_some(v);
                out.push(ScalingRecord {
                    dataset: id.to_owned(),
                    features: data.d(),
                    samples: data.n(),
                    k,
                    depth,
                    train_time_ms: ok.then_some(t.ms),
                    calls: keep(t.stats.calls),
                    depth_zero_calls: keep(t.stats.depth_zero_calls),
                    feature_evaluations: keep(t.stats.feature_evaluations),
                    status: if ok { Status::Ok } else { Status::Timeout },
                });
            }
        }
    }
    Ok(out)
}

/// Training time on the first `c` features for each `c` in `feature_counts`.
pub fn run_scaling_features(
    id: &str,
    data: &BinaryDataset,
    ks: &[usize],
    depths: &[usize],
    feature_counts: &[usize],
    run: &RunSettings,
) -> Result<Vec<ScalingRecord>> {
    check_increasing(feature_counts, data.d(), "feature")?;
    let subsets = feature_counts
        .iter()
        .map(|&c| data.take_features(c))
        .collect::<Result<Vec<_>>>()?;
    scaling_runs(id, &subsets, ks, depths, run)
}

/// Training time on row prefixes of one seeded shuffle.
pub fn run_scaling_samples(
    id: &str,
    data: &BinaryDataset,
    ks: &[usize],
    depths: &[usize],
    sample_counts: &[usize],
    seed: u64,
    run: &RunSettings,
) -> Result<Vec<ScalingRecord>> {
    check_increasing(sample_counts, data.n(), "sample")?;
    let mut order: Vec<usize> = (0..data.n()).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let subsets = sample_counts
        .iter()
        .map(|&c| data.select_rows(&order[..c]))
        .collect::<Result<Vec<_>>>()?;
    scaling_runs(id, &subsets, ks, depths, run)
}

/// Environment variable naming a local copy of the UCI car evaluation data.
pub const CAR_ENV: &str = "TOPK_CAR_CSV";

pub fn load_builtin(name: &str) -> Result<BinaryDataset> {
    match name {
        "tic-tac-toe" => Ok(binarize(&tic_tac_toe(), 100)?.0),
        "car" => Ok(binarize(&car(None)?, 100)?.0),
        "credit" => Ok(binarize(&credit_like(1000, 23, 0)?, 1400)?.0),
        _ => Err(Error::Config(format!(
            "unknown builtin dataset `{name}` (expected tic-tac-toe, car or credit)"
        ))),
    }
}

const SQUARES: [&str; 9] = [
    "top-left-square",
    "top-middle-square",
    "top-right-square",
    "middle-left-square",
    "middle-middle-square",
    "middle-right-square",
    "bottom-left-square",
    "bottom-middle-square",
    "bottom-right-square",
];

const LINES: [[usize; 3]; 8] = [
    [0, 1, 2],
    [3, 4, 5],
    [6, 7, 8],
    [0, 3, 6],
    [1, 4, 7],
    [2, 5, 8],
    [0, 4, 8],
    [2, 4, 6],
];

fn wins(board: &[u8; 9], player: u8) -> bool {
    LINES.iter().any(|l| l.iter().all(|&i| board[i] == player))
}

/// Every board at which a game started by `x` ends, labeled `positive` when
/// `x` has three in a row. This is the UCI tic-tac-toe endgame table.
pub fn tic_tac_toe() -> RawDataset {
    fn play(board: &mut [u8; 9], turn: u8, seen: &mut HashSet<[u8; 9]>) {
        if wins(board, b'x') || wins(board, b'o') || !board.contains(&b'b') {
            seen.insert(*board);
            return;
        }
        for i in 0..9 {
            if board[i] == b'b' {
                board[i] = turn;
                play(board, if turn == b'x' { b'o' } else { b'x' }, seen);
                board[i] = b'b';
            }
        }
    }
    let mut seen = HashSet::new();
    play(&mut [b'b'; 9], b'x', &mut seen);
    let mut boards: Vec<[u8; 9]> = seen.into_iter().collect();
    // x-wins first, then the rest; lexicographic within each group
    boards.sort_by_key(|b| (!wins(b, b'x'), *b));
    let columns = SQUARES
        .iter()
        .enumerate()
        .map(|(i, name)| RawColumn {
            name: (*name).to_owned(),
            values: RawValues::Categorical(
                boards.iter().map(|b| (b[i] as char).to_string()).collect(),
            ),
        })
        .collect();
    let labels: Vec<String> = boards
        .iter()
        .map(|b| {
            if wins(b, b'x') {
                "positive"
            } else {
                "negative"
            }
            .to_owned()
        })
        .collect();
    RawDataset::new(columns, &labels).expect("consistent columns")
}

const CAR_COLUMNS: [&str; 6] = ["buying", "maint", "doors", "persons", "lug_boot", "safety"];

/// UCI car evaluation data from `path`, `$TOPK_CAR_CSV` or `data/car.csv`.
/// Accepts the original headerless `car.data` layout or the same with a header.
pub fn car(path: Option<&Path>) -> Result<RawDataset> {
    let path = match path {
        Some(p) => p.to_path_buf(),
        None => std::env::var_os(CAR_ENV)
            .map(PathBuf::from)
            .unwrap_or_else(|| PathBuf::from("data/car.csv")),
    };
    let file = File::open(&path).map_err(|e| {
        Error::Config(format!(
            "car data not found at {} ({e}); set {CAR_ENV} to a copy of car.data",
            path.display()
        ))
    })?;
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .from_reader(file);
    let mut cells: Vec<Vec<String>> = vec![Vec::new(); 7];
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| Error::Parse {
            path: path.clone(),
            row: i + 1,
            message: e.to_string(),
        })?;
        if i == 0 && rec.get(0) == Some("buying") {
            continue;
        }
        if rec.len() == 1 && rec[0].is_empty() {
            continue;
        }
        if rec.len() != 7 {
            return Err(Error::Parse {
                path: path.clone(),
                row: i + 1,
                message: format!("expected 7 fields, found {}", rec.len()),
            });
        }
        for (j, f) in rec.iter().enumerate() {
            cells[j].push(f.to_owned());
        }
    }
    let labels = cells.pop().expect("seven columns");
    let columns = CAR_COLUMNS
        .iter()
        .zip(cells)
        .map(|(name, v)| RawColumn {
            name: (*name).to_owned(),
            values: RawValues::Categorical(v),
        })
        .collect();
    RawDataset::new(columns, &labels)
}

/// Numeric credit-scoring-style data: `attributes` continuous columns driven
/// by a shared latent risk, with a binary outcome from a noisy logistic of a
/// few of them.
pub fn credit_like(n: usize, attributes: usize, seed: u64) -> Result<RawDataset> {
    if n == 0 {
        return Err(Error::NoRows);
    }
    if attributes == 0 {
        return Err(Error::Config("need at least one attribute".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let weights: Vec<f64> = (0..attributes).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let mut cols = vec![Vec::with_capacity(n); attributes];
    let mut labels = Vec::with_capacity(n);
    for _ in 0..n {
        let risk: f64 = rng.gen_range(-1.0..1.0);
        let mut logit = 0.0;
        for (j, col) in cols.iter_mut().enumerate() {
            let noise: f64 = rng.gen_range(-1.0..1.0);
            let v = weights[j] * risk + 0.5 * noise;
            if j < 4 {
                logit += v * (1.0 + j as f64);
            }
            // round to a grid so some values repeat, like integer-coded scores
            col.push((v * 1000.0).round() / 10.0);
        }
        let p = 1.0 / (1.0 + (-2.0 * logit).exp());
        labels.push(if rng.gen_bool(p) { "bad" } else { "good" }.to_owned());
    }
    let columns = cols
        .into_iter()
        .enumerate()
        .map(|(j, v)| RawColumn {
            name: format!("a{j}"),
            values: RawValues::Numeric(v),
        })
        .collect();
    RawDataset::new(columns, &labels)
}
