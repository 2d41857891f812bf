//! `hiqlip` command-line front end: single estimates, benchmark tables and
//! synthetic network generation.

use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};

use hiqlip::bench::{run_bench, run_method, summarize, BenchConfig, BenchRow, Method, MethodConfig, Suite};
use hiqlip::cutnorm::{Backend, Encoding, SolverConfig};
use hiqlip::hierarchy::{HiqConfig, Selection};
use hiqlip::multilayer::{MultilayerConfig, PairReading};
use hiqlip::netio::{generate_synthetic, load_network, save_network};
use hiqlip::{Error, Estimate};

const ENDPOINT_ENV: &str = "HIQLIP_REMOTE_ENDPOINT";

#[derive(Parser)]
#[command(name = "hiqlip", version, about = "Lipschitz constant estimation for ReLU networks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one estimator on a network file and print its record.
    Estimate(EstimateArgs),
    /// Run a grid of estimators on synthetic networks.
    Bench(BenchArgs),
    /// Write a synthetic network file.
    Gen(GenArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum MethodArg {
    Hiq,
    HiqMpA,
    HiqMpB,
    Block,
    Mp,
    Sample,
    Bf,
    Recursion,
}

impl From<MethodArg> for Method {
    fn from(m: MethodArg) -> Method {
        match m {
            MethodArg::Hiq => Method::Hiq,
            MethodArg::HiqMpA => Method::HiqMpA,
            MethodArg::HiqMpB => Method::HiqMpB,
            MethodArg::Block => Method::Block,
            MethodArg::Mp => Method::Mp,
            MethodArg::Sample => Method::Sample,
            MethodArg::Bf => Method::Bf,
            MethodArg::Recursion => Method::Recursion,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum BackendArg {
    Exhaustive,
    Annealing,
    Remote,
}

#[derive(Clone, Copy, ValueEnum)]
enum SelectionArg {
    Abs,
    Signed,
}

#[derive(Clone, Copy, ValueEnum)]
enum EncodingArg {
    Fgl,
    Cut,
}

#[derive(Clone, Copy, ValueEnum)]
enum ReadingArg {
    Overlapping,
    SingleMatrix,
}

#[derive(Clone, Copy, ValueEnum)]
enum SuiteArg {
    TwoLayer,
    MultiLayer,
}

/// Output format flags shared by `estimate` and `bench`.
#[derive(Args)]
struct Format {
    /// JSON lines (default).
    #[arg(long, conflicts_with = "csv")]
    json: bool,
    /// CSV with a header row.
    #[arg(long)]
    csv: bool,
}

/// Solver and estimator tuning shared by `estimate` and `bench`.
#[derive(Args)]
struct Tuning {
    #[arg(long, value_enum, default_value = "annealing")]
    solver: BackendArg,
    /// Largest subproblem handed to the solver.
    #[arg(long, default_value_t = 100)]
    qubit_budget: usize,
    #[arg(long, default_value_t = 16)]
    num_reads: usize,
    #[arg(long, default_value_t = 1000)]
    sweeps: usize,
    #[arg(long, default_value_t = 0.1)]
    beta_min: f64,
    #[arg(long, default_value_t = 10.0)]
    beta_max: f64,
    #[arg(long, default_value_t = 24)]
    max_vars_exhaustive: usize,
    /// Remote solver URL; the HIQLIP_REMOTE_ENDPOINT variable takes precedence.
    #[arg(long)]
    endpoint: Option<String>,
    #[arg(long, default_value_t = 30_000)]
    timeout_ms: u64,
    #[arg(long, value_enum, default_value = "abs")]
    selection: SelectionArg,
    #[arg(long, value_enum, default_value = "fgl")]
    encoding: EncodingArg,
    /// Random pattern restarts for the layer-wise recursion.
    #[arg(long, default_value_t = 4)]
    restarts: usize,
    #[arg(long, value_enum, default_value = "overlapping")]
    pair_reading: ReadingArg,
    /// Maximum block length for `block`.
    #[arg(long, default_value_t = 2)]
    block_len: usize,
    /// Gradient samples for `sample`.
    #[arg(long, default_value_t = 200_000)]
    samples: usize,
    /// Hidden-unit cap for `bf`.
    #[arg(long, default_value_t = hiqlip::baselines::DEFAULT_BF_CAP)]
    bf_cap: usize,
    /// Run everything on one thread.
    #[arg(long)]
    sequential: bool,
}

impl Tuning {
    fn method_config(&self, seed: u64) -> MethodConfig {
        let solver = SolverConfig {
            backend: match self.solver {
                BackendArg::Exhaustive => Backend::Exhaustive,
                BackendArg::Annealing => Backend::Annealing,
                BackendArg::Remote => Backend::Remote,
            },
            seed,
            num_reads: self.num_reads,
            sweeps: self.sweeps,
            beta_min: self.beta_min,
            beta_max: self.beta_max,
            max_vars_exhaustive: self.max_vars_exhaustive,
            remote_endpoint: std::env::var(ENDPOINT_ENV).ok().or_else(|| self.endpoint.clone()),
            timeout_ms: self.timeout_ms,
            parallel: !self.sequential,
        };
        let hiq = HiqConfig {
            qubit_budget: self.qubit_budget,
            selection: match self.selection {
                SelectionArg::Abs => Selection::Abs,
                SelectionArg::Signed => Selection::Signed,
            },
            encoding: match self.encoding {
                EncodingArg::Fgl => Encoding::Fgl,
                EncodingArg::Cut => Encoding::Cut,
            },
            ..HiqConfig::with_solver(solver)
        };
        let mut cfg = MethodConfig {
            multilayer: MultilayerConfig {
                restarts: self.restarts,
                pair_reading: match self.pair_reading {
                    ReadingArg::Overlapping => PairReading::Overlapping,
                    ReadingArg::SingleMatrix => PairReading::SingleMatrix,
                },
                ..MultilayerConfig::with_hiq(hiq)
            },
            bf_cap: self.bf_cap,
            block_len: self.block_len,
            ..MethodConfig::default()
        };
        cfg.sampling.num_samples = self.samples;
        cfg.sampling.parallel = !self.sequential;
        cfg.with_seed(seed)
    }
}

#[derive(Args)]
struct EstimateArgs {
    #[arg(long)]
    network: PathBuf,
    /// Output class whose Lipschitz constant is estimated.
    #[arg(long, default_value_t = 8)]
    class: usize,
    #[arg(long, value_enum, default_value = "hiq")]
    method: MethodArg,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[command(flatten)]
    format: Format,
    #[command(flatten)]
    tuning: Tuning,
}

#[derive(Args)]
struct BenchArgs {
    #[arg(long, value_enum)]
    suite: SuiteArg,
    /// Hidden widths (two-layer) or depths (multi-layer); suite default if omitted.
    #[arg(long, value_delimiter = ',')]
    sizes: Vec<usize>,
    #[arg(long, value_delimiter = ',', default_value = "1,2,3")]
    seeds: Vec<u64>,
    /// Comma-separated methods; suite default if omitted.
    #[arg(long, value_enum, value_delimiter = ',')]
    methods: Option<Vec<MethodArg>>,
    #[arg(long)]
    input_dim: Option<usize>,
    #[arg(long)]
    output_dim: Option<usize>,
    /// Hidden width of every layer in the multi-layer suite.
    #[arg(long)]
    hidden_width: Option<usize>,
    #[arg(long, default_value_t = 8)]
    class: usize,
    #[arg(long, default_value_t = 1.0)]
    scale: f64,
    /// Emit mean/min/max per (size, method) instead of raw rows.
    #[arg(long)]
    summary: bool,
    /// Write the table here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
    #[command(flatten)]
    format: Format,
    #[command(flatten)]
    tuning: Tuning,
}

#[derive(Args)]
struct GenArgs {
    /// Layer sizes from input to output, at least two entries.
    #[arg(long, value_delimiter = ',', required = true)]
    dims: Vec<usize>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 1.0)]
    scale: f64,
    #[arg(long)]
    out: PathBuf,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    let result = match cli.command {
        Command::Estimate(a) => cmd_estimate(a),
        Command::Bench(a) => cmd_bench(a),
        Command::Gen(a) => cmd_gen(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            let refused = matches!(e.downcast_ref::<Error>(), Some(Error::OverCap { .. }));
            ExitCode::from(if refused { 2 } else { 1 })
        }
    }
}

fn estimate_csv(out: &mut impl Write, est: &Estimate) -> anyhow::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record([
        "method",
        "value",
        "bound_kind",
        "wall_time_s",
        "reads",
        "sweeps",
        "levels",
        "iterations",
        "config_digest",
    ])?;
    let s = &est.solver_stats;
    w.write_record([
        est.method.clone(),
        est.value.to_string(),
        est.bound_kind.to_string(),
        est.wall_time_s.to_string(),
        s.reads.to_string(),
        s.sweeps.to_string(),
        s.levels.to_string(),
        s.iterations.to_string(),
        est.config_digest.clone(),
    ])?;
    w.flush()?;
    Ok(())
}

fn cmd_estimate(a: EstimateArgs) -> anyhow::Result<()> {
    let net = load_network(&a.network)?;
    let cfg = a.tuning.method_config(a.seed);
    let est = run_method(&net, a.class, a.method.into(), &cfg)?;
    let mut out = std::io::stdout().lock();
    if a.format.csv {
        estimate_csv(&mut out, &est)?;
    } else {
        writeln!(out, "{}", serde_json::to_string(&est)?)?;
    }
    Ok(())
}

fn write_rows(out: &mut impl Write, rows: &[BenchRow], csv_out: bool) -> anyhow::Result<()> {
    if csv_out {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(BenchRow::CSV_HEADER)?;
        for r in rows {
            w.write_record(r.csv_record())?;
        }
        w.flush()?;
    } else {
        for r in rows {
            writeln!(out, "{}", serde_json::to_string(r)?)?;
        }
    }
    Ok(())
}

fn cmd_bench(a: BenchArgs) -> anyhow::Result<()> {
    let suite = match a.suite {
        SuiteArg::TwoLayer => Suite::TwoLayer,
        SuiteArg::MultiLayer => Suite::MultiLayer,
    };
    let mut cfg = BenchConfig::for_suite(suite);
    if !a.sizes.is_empty() {
        cfg.sizes = a.sizes;
    }
    cfg.seeds = a.seeds;
    if let Some(m) = a.methods {
        cfg.methods = m.into_iter().map(Method::from).collect();
    }
    cfg.input_dim = a.input_dim.unwrap_or(cfg.input_dim);
    cfg.output_dim = a.output_dim.unwrap_or(cfg.output_dim);
    cfg.hidden_width = a.hidden_width.unwrap_or(cfg.hidden_width);
    cfg.class_index = a.class;
    cfg.weight_scale = a.scale;
    cfg.method = a.tuning.method_config(0);
    cfg.parallel = !a.tuning.sequential;

    let report = run_bench(&cfg)?;
    for s in &report.skipped {
        eprintln!("skipped {} at {} seed {}: {}", s.method, s.width_or_depth, s.seed, s.reason);
    }
    let mut sink: Box<dyn Write> = match &a.out {
        Some(p) => Box::new(std::io::BufWriter::new(
            std::fs::File::create(p).with_context(|| format!("creating {}", p.display()))?,
        )),
        None => Box::new(std::io::stdout().lock()),
    };
    if a.summary {
        let summary = summarize(&report.rows);
        if a.format.csv {
            let mut w = csv::Writer::from_writer(&mut sink);
            for s in &summary {
                w.serialize(s)?;
            }
            w.flush()?;
        } else {
            for s in &summary {
                writeln!(sink, "{}", serde_json::to_string(s)?)?;
            }
        }
    } else {
        write_rows(&mut sink, &report.rows, a.format.csv)?;
    }
    sink.flush()?;
    Ok(())
}

fn cmd_gen(a: GenArgs) -> anyhow::Result<()> {
    if a.dims.len() < 2 {
        bail!("--dims needs at least an input and an output size");
    }
    let net = generate_synthetic(a.seed, &a.dims, a.scale)?;
    save_network(&net, &a.out)?;
    Ok(())
}
