//! The `hashnet` command line: `train`, `encode`, `search`, `eval`, `itq`.
//!
//! Exit codes: 0 success, 1 numerical failure, 2 input error, 3 training
//! divergence, 4 undefined metric.

use std::ffi::OsString;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

use crate::error::{Error, Result};
use crate::hashloss::Hyperparams;
use crate::index::{mean_average_precision, pack, search_all};
use crate::io;
use crate::network::SgdConfig;
use crate::pretrain::{ItqEncoder, DEFAULT_ITQ_ITERS};
use crate::trainer::{
    default_schedule, network_outputs, train_with, LabeledFeatures, TrainConfig, DEFAULT_BATCH,
    DEFAULT_OUTER,
};

pub const EXIT_OK: i32 = 0;
pub const EXIT_NUMERICAL: i32 = 1;
pub const EXIT_INPUT: i32 = 2;
pub const EXIT_DIVERGED: i32 = 3;
pub const EXIT_UNDEFINED_METRIC: i32 = 4;

#[derive(Debug, Parser)]
#[command(
    name = "hashnet",
    version,
    about = "Supervised binary hashing and Hamming retrieval"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Train a hashing network on labeled features.
    Train(TrainArgs),
    /// Encode features to packed binary codes with a trained model.
    Encode(EncodeArgs),
    /// Exact Hamming k-nearest-neighbour search.
    Search(SearchArgs),
    /// Mean average precision of a query set against a database.
    Eval(EvalArgs),
    /// Unsupervised ITQ baseline codes.
    Itq(ItqArgs),
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    /// HSF1 feature file.
    #[arg(long)]
    pub features: PathBuf,
    /// HSL1 label file.
    #[arg(long)]
    pub labels: PathBuf,
    /// Output model (JSON).
    #[arg(long)]
    pub out: PathBuf,
    /// Training log; defaults to `<out>.log`.
    #[arg(long)]
    pub log: Option<PathBuf>,
    #[arg(long, default_value_t = 16)]
    pub bits: usize,
    #[arg(long, default_value_t = 0.01)]
    pub alpha: f64,
    #[arg(long, default_value_t = 0.01)]
    pub beta: f64,
    #[arg(long, default_value_t = 0.01)]
    pub gamma: f64,
    #[arg(long, default_value_t = 0.001)]
    pub theta: f64,
    #[arg(long, default_value_t = 1e-4)]
    pub lr: f64,
    #[arg(long, default_value_t = 5e-4)]
    pub weight_decay: f64,
    #[arg(long, default_value_t = 0.9)]
    pub momentum: f64,
    /// Minibatch size; defaults to min(256, n).
    #[arg(long)]
    pub batch: Option<usize>,
    /// Outer iterations K.
    #[arg(long, default_value_t = DEFAULT_OUTER)]
    pub outer: usize,
    /// Inner SGD steps T; defaults to ceil(4n / batch).
    #[arg(long)]
    pub inner: Option<usize>,
    /// Width of the PCA layer; defaults to min(800, d).
    #[arg(long)]
    pub dr_dim: Option<usize>,
    #[arg(long, default_value_t = DEFAULT_ITQ_ITERS)]
    pub itq_iters: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Debug, Args)]
pub struct EncodeArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub features: PathBuf,
    /// Output HSB1 code file.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct SearchArgs {
    /// Database HSB1 codes.
    #[arg(long)]
    pub db: PathBuf,
    /// Query HSB1 codes.
    #[arg(long)]
    pub queries: PathBuf,
    #[arg(long, default_value_t = 10)]
    pub k: usize,
    /// Write results here instead of stdout.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[arg(long)]
    pub db_codes: PathBuf,
    #[arg(long)]
    pub db_labels: PathBuf,
    #[arg(long)]
    pub query_codes: PathBuf,
    #[arg(long)]
    pub query_labels: PathBuf,
    /// Queries are the database; never retrieve the query itself.
    #[arg(long)]
    pub leave_one_out: bool,
}

#[derive(Debug, Args)]
pub struct ItqArgs {
    #[arg(long)]
    pub features: PathBuf,
    #[arg(long, default_value_t = 16)]
    pub bits: usize,
    #[arg(long, default_value_t = DEFAULT_ITQ_ITERS)]
    pub iters: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Output HSB1 code file.
    #[arg(long)]
    pub out: PathBuf,
}

pub fn exit_code(err: &Error) -> i32 {
    match err {
        Error::InvalidInput(_) | Error::Format { .. } | Error::Io { .. } => EXIT_INPUT,
        Error::Divergence { .. } => EXIT_DIVERGED,
        Error::UndefinedMetric => EXIT_UNDEFINED_METRIC,
        Error::NumericalFailure(_) => EXIT_NUMERICAL,
    }
}

/// Parses `args` (including the program name) and runs the command,
/// writing results to `out` and diagnostics to `err`. Returns the exit code.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = write!(err, "{}", e.render());
            return if e.use_stderr() { EXIT_INPUT } else { EXIT_OK };
        }
    };
    match execute(&cli.command, out) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            exit_code(&e)
        }
    }
}

pub fn execute(command: &Command, out: &mut dyn Write) -> Result<()> {
    match command {
        Command::Train(a) => cmd_train(a, out),
        Command::Encode(a) => cmd_encode(a),
        Command::Search(a) => cmd_search(a, out),
        Command::Eval(a) => cmd_eval(a, out),
        Command::Itq(a) => cmd_itq(a, out),
    }
}

fn stdout_err(e: std::io::Error) -> Error {
    Error::Io {
        path: PathBuf::from("<output>"),
        source: e,
    }
}

fn create(path: &PathBuf) -> Result<BufWriter<File>> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(|source| Error::Io {
            path: path.clone(),
            source,
        })
}

pub fn cmd_train(a: &TrainArgs, out: &mut dyn Write) -> Result<()> {
    let features = io::read_features(&a.features)?;
    let labels = io::read_labels(&a.labels)?;
    let data = LabeledFeatures::new(features, labels)?;
    let n = data.len();
    if n == 0 {
        return Err(Error::invalid("training set is empty"));
    }

    let batch = a.batch.unwrap_or(DEFAULT_BATCH.min(n));
    let mut schedule = default_schedule(n, batch)?;
    schedule.outer = a.outer;
    schedule.seed = a.seed;
    if let Some(t) = a.inner {
        schedule.inner = t;
    }
    let cfg = TrainConfig {
        bits: a.bits,
        dr_dim: a.dr_dim,
        hyper: Hyperparams {
            alpha: a.alpha,
            beta: a.beta,
            theta: a.theta,
            gamma: a.gamma,
        },
        schedule,
        sgd: SgdConfig {
            learning_rate: a.lr,
            weight_decay: a.weight_decay,
            momentum: a.momentum,
        },
        itq_iters: a.itq_iters,
    };

    let log_path = a
        .log
        .clone()
        .unwrap_or_else(|| io::default_log_path(&a.out));
    let mut log = create(&log_path)?;
    let mut log_err = None;
    let state = train_with(&data, &cfg, |rec| {
        if log_err.is_none() {
            if let Err(e) = writeln!(log, "{}", rec.log_line()) {
                log_err = Some(e);
            }
        }
    });
    let flushed = log.flush();
    if let Some(source) = log_err.or(flushed.err()) {
        return Err(Error::Io {
            path: log_path,
            source,
        });
    }
    let state = state?;

    io::save_model(&a.out, &state.network, Some(cfg))?;
    writeln!(
        out,
        "trained {} bits on {} samples: K={} T={} m={}; first/last outer mean loss {:e} / {:e}",
        cfg.bits,
        n,
        schedule.outer,
        schedule.inner,
        schedule.batch,
        state.mean_loss(1).unwrap_or(f64::NAN),
        state.mean_loss(schedule.outer).unwrap_or(f64::NAN),
    )
    .map_err(stdout_err)
}

pub fn cmd_encode(a: &EncodeArgs) -> Result<()> {
    let (network, _) = io::load_model(&a.model)?;
    let x = io::read_features(&a.features)?;
    if x.cols() != network.input_dim() {
        return Err(Error::invalid(format!(
            "{} has {} features per sample, model expects {}",
            a.features.display(),
            x.cols(),
            network.input_dim()
        )));
    }
    let f = network_outputs(&network, &x, DEFAULT_BATCH)?;
    let packed = pack(&crate::index::binarize(&f))?;
    io::write_codes(&a.out, &packed)
}

pub fn cmd_search(a: &SearchArgs, out: &mut dyn Write) -> Result<()> {
    let db = io::read_codes(&a.db)?;
    let queries = io::read_codes(&a.queries)?;
    if db.bits() != queries.bits() {
        return Err(Error::invalid(format!(
            "code length mismatch: database {} bits, queries {} bits",
            db.bits(),
            queries.bits()
        )));
    }
    let results = search_all(&db, &queries, a.k, false)?;
    let mut text = String::new();
    for (q, ranking) in results.iter().enumerate() {
        text.push_str(&q.to_string());
        for &(id, dist) in &ranking.entries {
            text.push_str(&format!(" {id}:{dist}"));
        }
        text.push('\n');
    }
    match &a.out {
        Some(path) => {
            let mut f = create(path)?;
            f.write_all(text.as_bytes())
                .and_then(|_| f.flush())
                .map_err(|source| Error::Io {
                    path: path.clone(),
                    source,
                })
        }
        None => out.write_all(text.as_bytes()).map_err(stdout_err),
    }
}

pub fn cmd_eval(a: &EvalArgs, out: &mut dyn Write) -> Result<()> {
    let db = io::read_codes(&a.db_codes)?;
    let db_labels = io::read_labels(&a.db_labels)?;
    let queries = io::read_codes(&a.query_codes)?;
    let query_labels = io::read_labels(&a.query_labels)?;
    if db.len() != db_labels.len() {
        return Err(Error::invalid(format!(
            "{} database codes but {} database labels",
            db.len(),
            db_labels.len()
        )));
    }
    if queries.len() != query_labels.len() {
        return Err(Error::invalid(format!(
            "{} query codes but {} query labels",
            queries.len(),
            query_labels.len()
        )));
    }
    let rankings = search_all(&db, &queries, db.len().max(1), a.leave_one_out)?;
    let map = mean_average_precision(&rankings, &query_labels, &db_labels)?;
    writeln!(
        out,
        "bits={} database={} queries={} leave_one_out={} map={:.6}",
        db.bits(),
        db.len(),
        queries.len(),
        a.leave_one_out,
        map
    )
    .map_err(stdout_err)
}

pub fn cmd_itq(a: &ItqArgs, out: &mut dyn Write) -> Result<()> {
    let x = io::read_features(&a.features)?;
    let enc = ItqEncoder::fit(&x, a.bits, a.iters, a.seed)?;
    let codes = enc.encode(&x)?;
    io::write_codes(&a.out, &pack(&codes)?)?;
    let mut text = String::new();
    for (i, obj) in enc.objective_trace.iter().enumerate() {
        text.push_str(&format!("iter {} objective {obj:e}\n", i + 1));
    }
    let last = enc.objective_trace.last().copied().unwrap_or(f64::NAN);
    text.push_str(&format!("final objective {last:e}\n"));
    out.write_all(text.as_bytes()).map_err(stdout_err)
}
