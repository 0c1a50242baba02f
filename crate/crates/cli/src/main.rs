//! `bct`: sample, count and analyse binary contingency tables.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use bct_core::asymptotics::{self, ConditionOptions, Overall};
use bct_core::estimator::{self, SamplingOptions, DEFAULT_MAX_SAMPLES};
use bct_core::family::SequenceFamily;
use bct_core::oracle::{self, OracleError, DEFAULT_STATE_BUDGET};
use bct_core::rng;
use bct_core::sampler::{ConfigurationModel, SampleError, DEFAULT_MAX_ATTEMPTS};
use bct_core::stats::{self, GraphProperty, StatsError};
use bct_core::{estimator::EstimateError, sample_pairing, Margins, MarginsError};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

#[derive(Parser)]
#[command(name = "bct", version, about = "Uniform sampling and counting of binary contingency tables")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    global: Global,
}

#[derive(Args)]
struct Global {
    /// Root seed for every random stream.
    #[arg(long, global = true, env = "BCT_SEED", default_value_t = 0)]
    seed: u64,
    /// Worker threads for sampling loops; results do not depend on it.
    #[arg(long, global = true, default_value_t = 1)]
    threads: usize,
    /// Pretty-print JSON output.
    #[arg(long, global = true)]
    pretty: bool,
    /// Exit with status 5 when a verdict is inconclusive.
    #[arg(long, global = true)]
    strict: bool,
    /// Write the run manifest here instead of stderr.
    #[arg(long, global = true, value_name = "PATH")]
    manifest: Option<PathBuf>,
}

#[derive(Args, Clone)]
struct MarginArgs {
    /// Margin file (`r: ...` / `c: ...` lines or JSON with keys r and c).
    #[arg(long, value_name = "PATH", conflicts_with_all = ["r", "c"])]
    margins: Option<PathBuf>,
    /// Row sums, space or comma separated.
    #[arg(long, requires = "c")]
    r: Option<String>,
    /// Column sums, space or comma separated.
    #[arg(long, requires = "r")]
    c: Option<String>,
}

#[derive(Clone, Copy, ValueEnum)]
enum TableFormat {
    Csv,
    Edges,
}

#[derive(Subcommand)]
enum Command {
    /// Draw uniform binary tables by rejection from the configuration model.
    Sample {
        #[command(flatten)]
        margins: MarginArgs,
        #[arg(long, default_value_t = 1)]
        count: u64,
        #[arg(long, value_enum, default_value = "edges")]
        format: TableFormat,
        #[arg(long, default_value_t = DEFAULT_MAX_ATTEMPTS)]
        max_attempts: u64,
    },
    /// Exact number of binary tables and acceptance probability.
    CountExact {
        #[command(flatten)]
        margins: MarginArgs,
        /// Maximum number of dynamic-programming states.
        #[arg(long, default_value_t = DEFAULT_STATE_BUDGET)]
        budget: u64,
    },
    /// Randomized estimate of the number of binary tables.
    Estimate {
        #[command(flatten)]
        margins: MarginArgs,
        #[arg(long, default_value_t = 0.1)]
        epsilon: f64,
        #[arg(long, default_value_t = estimator::DEFAULT_DELTA)]
        delta: f64,
        /// Use exactly this many draws instead of the adaptive stopping rule.
        #[arg(long)]
        samples: Option<u64>,
        #[arg(long, default_value_t = DEFAULT_MAX_SAMPLES)]
        max_samples: u64,
    },
    /// Single-instance statistics: mu, condition 1 and the large/small split.
    Diagnose {
        #[command(flatten)]
        margins: MarginArgs,
        #[arg(long, default_value_t = 0.1)]
        epsilon: f64,
        /// Also list every cell of the large set.
        #[arg(long)]
        cells: bool,
    },
    /// Evaluate both optimality conditions on a margin family.
    CheckConditions {
        /// Built-in family name or path to a JSON family definition.
        #[arg(long)]
        family: String,
        /// Totals to evaluate, e.g. `1e3 1e4 1e5 1e6`.
        #[arg(long, num_args = 1.., value_parser = parse_total)]
        grid: Option<Vec<u64>>,
        #[arg(long, default_value_t = 0.01)]
        theta: f64,
        #[arg(long, default_value_t = 0.1)]
        growth_tolerance: f64,
        #[arg(long, default_value_t = 64)]
        index_cap: usize,
        /// Write per-grid-point values as CSV for plotting.
        #[arg(long, value_name = "PATH")]
        plot_data: Option<PathBuf>,
    },
    /// Chi-square test of sampler output against all enumerated tables.
    TestUniformity {
        #[command(flatten)]
        margins: MarginArgs,
        /// Draws; defaults to 100 per table.
        #[arg(long)]
        samples: Option<u64>,
        #[arg(long, default_value_t = 0.001)]
        significance: f64,
    },
    /// Compare a graph property under the configuration model and under
    /// uniform binary tables.
    PropertyTransfer {
        #[command(flatten)]
        margins: MarginArgs,
        /// connected, has-giant-component or max-degree-<=-K
        #[arg(long)]
        property: String,
        #[arg(long, default_value_t = 10_000)]
        samples: u64,
    },
    /// Time configuration-model draws across totals.
    Bench {
        #[arg(long, default_value = "unit-margins")]
        family: String,
        #[arg(long, num_args = 1.., value_parser = parse_total, default_values = ["1e6", "1e7"])]
        grid: Vec<u64>,
        /// Timed repetitions per total (at least 5).
        #[arg(long, default_value_t = 5)]
        reps: usize,
        #[arg(long, default_value_t = 1)]
        warmup: usize,
    },
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Sample { .. } => "sample",
            Command::CountExact { .. } => "count-exact",
            Command::Estimate { .. } => "estimate",
            Command::Diagnose { .. } => "diagnose",
            Command::CheckConditions { .. } => "check-conditions",
            Command::TestUniformity { .. } => "test-uniformity",
            Command::PropertyTransfer { .. } => "property-transfer",
            Command::Bench { .. } => "bench",
        }
    }
}

fn parse_total(s: &str) -> Result<u64, String> {
    if let Ok(v) = s.parse::<u64>() {
        return Ok(v);
    }
    match s.parse::<f64>() {
        Ok(v) if v.is_finite() && v >= 1.0 && v.fract() == 0.0 && v < 1.8e19 => Ok(v as u64),
        _ => Err(format!("{s:?} is not a positive integer")),
    }
}

#[derive(Debug)]
enum Failure {
    Validation(String),
    Infeasible(String),
    Exhausted(String),
    Inconclusive,
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Validation(_) => 2,
            Failure::Infeasible(_) => 3,
            Failure::Exhausted(_) => 4,
            Failure::Inconclusive => 5,
        }
    }
}

impl From<MarginsError> for Failure {
    fn from(e: MarginsError) -> Self {
        Failure::Validation(e.to_string())
    }
}

impl From<SampleError> for Failure {
    fn from(e: SampleError) -> Self {
        match e {
            SampleError::Infeasible => Failure::Infeasible(e.to_string()),
            SampleError::Exhausted { .. } => Failure::Exhausted(e.to_string()),
        }
    }
}

impl From<OracleError> for Failure {
    fn from(e: OracleError) -> Self {
        match e {
            OracleError::BudgetExceeded { .. } => Failure::Exhausted(e.to_string()),
            OracleError::TooLarge { .. } => Failure::Validation(e.to_string()),
        }
    }
}

impl From<EstimateError> for Failure {
    fn from(e: EstimateError) -> Self {
        match e {
            EstimateError::Infeasible => Failure::Infeasible(e.to_string()),
            EstimateError::AcceptanceTooLow { .. } => Failure::Exhausted(e.to_string()),
            EstimateError::InvalidParameter(_) => Failure::Validation(e.to_string()),
        }
    }
}

impl From<StatsError> for Failure {
    fn from(e: StatsError) -> Self {
        match e {
            StatsError::Infeasible => Failure::Infeasible(e.to_string()),
            StatsError::Oracle(o) => o.into(),
            StatsError::Sample(s) => s.into(),
            other => Failure::Validation(other.to_string()),
        }
    }
}

#[derive(Serialize)]
struct InputDigest {
    path: String,
    sha256: String,
}

#[derive(Serialize)]
struct RunManifest {
    subcommand: String,
    argv: Vec<String>,
    seed: u64,
    version: &'static str,
    duration_secs: f64,
    inputs: Vec<InputDigest>,
    exit_code: u8,
}

struct Ctx {
    seed: u64,
    threads: usize,
    pretty: bool,
    strict: bool,
    inputs: Vec<InputDigest>,
    out: String,
}

impl Ctx {
    fn read_input(&mut self, path: &Path) -> Result<String, Failure> {
        let bytes = std::fs::read(path).map_err(|e| Failure::Validation(format!("{}: {e}", path.display())))?;
        let digest = Sha256::digest(&bytes);
        let hex = digest.iter().fold(String::with_capacity(64), |mut s, b| {
            let _ = write!(s, "{b:02x}");
            s
        });
        self.inputs.push(InputDigest {
            path: path.display().to_string(),
            sha256: hex,
        });
        String::from_utf8(bytes).map_err(|_| Failure::Validation(format!("{}: not UTF-8", path.display())))
    }

    fn margins(&mut self, args: &MarginArgs) -> Result<Margins, Failure> {
        match (&args.margins, &args.r, &args.c) {
            (Some(path), _, _) => Ok(Margins::parse(&self.read_input(path)?)?),
            (None, Some(r), Some(c)) => Ok(Margins::from_strs(r, c)?),
            _ => Err(Failure::Validation("give --margins PATH or both --r and --c".into())),
        }
    }

    fn emit_json<T: Serialize>(&mut self, value: &T) {
        let text = if self.pretty {
            serde_json::to_string_pretty(value)
        } else {
            serde_json::to_string(value)
        }
        .expect("serializable output");
        self.out.push_str(&text);
        self.out.push('\n');
    }
}

/// A big integer as a JSON number.
fn big_number(v: &impl ToString) -> Value {
    serde_json::from_str(&v.to_string()).expect("decimal integer")
}

fn run(cmd: &Command, ctx: &mut Ctx) -> Result<(), Failure> {
    match cmd {
        Command::Sample {
            margins,
            count,
            format,
            max_attempts,
        } => {
            let m = ctx.margins(margins)?;
            if !m.is_feasible() {
                return Err(SampleError::Infeasible.into());
            }
            let mut model = ConfigurationModel::new(&m);
            let mut rng = rng::rng_from_seed(ctx.seed);
            for k in 0..*count {
                let (table, _) = model.sample_binary(&mut rng, *max_attempts)?;
                if k > 0 {
                    ctx.out.push('\n');
                }
                match format {
                    TableFormat::Edges => ctx.out.push_str(&table.to_edge_list()),
                    TableFormat::Csv => match table.to_csv() {
                        Some(csv) => ctx.out.push_str(&csv),
                        None => return Err(Failure::Validation("table too large for CSV; use --format edges".into())),
                    },
                }
            }
        }
        Command::CountExact { margins, budget } => {
            let m = ctx.margins(margins)?;
            let exact = oracle::exact_count(&m, *budget)?;
            let out = json!({
                "count": big_number(&exact.count),
                "acceptance_num": big_number(exact.acceptance.numer()),
                "acceptance_den": big_number(exact.acceptance.denom()),
                "dp_states": exact.dp_states,
            });
            ctx.emit_json(&out);
        }
        Command::Estimate {
            margins,
            epsilon,
            delta,
            samples,
            max_samples,
        } => {
            let m = ctx.margins(margins)?;
            let opts = SamplingOptions {
                threads: ctx.threads,
                max_samples: *max_samples,
            };
            let est = match samples {
                Some(n) => {
                    if !m.is_feasible() {
                        return Err(EstimateError::Infeasible.into());
                    }
                    estimator::estimate_acceptance(&m, *n, *delta, ctx.seed, opts)?
                }
                None => estimator::estimate_count(&m, *epsilon, *delta, ctx.seed, opts)?,
            };
            ctx.emit_json(&est);
        }
        Command::Diagnose { margins, epsilon, cells } => {
            let m = ctx.margins(margins)?;
            if epsilon.is_nan() || *epsilon <= 0.0 {
                return Err(Failure::Validation("epsilon must be positive".into()));
            }
            let mut split = serde_json::to_value(asymptotics::split_diagnostics(&m, *epsilon)).expect("serializable");
            if !cells {
                split.as_object_mut().expect("object").remove("large_set");
            }
            let out = json!({
                "total": m.total(),
                "num_rows": m.num_rows(),
                "num_cols": m.num_cols(),
                "r1": m.row(0),
                "c1": m.col(0),
                "feasible": m.is_feasible(),
                "mu": asymptotics::mu_stat(&m),
                "condition1": asymptotics::condition1_stat(&m),
                "split": split,
            });
            ctx.emit_json(&out);
        }
        Command::CheckConditions {
            family,
            grid,
            theta,
            growth_tolerance,
            index_cap,
            plot_data,
        } => {
            let fam = if Path::new(family).is_file() {
                let text = ctx.read_input(Path::new(family))?;
                SequenceFamily::from_json(&text)
            } else {
                SequenceFamily::builtin(family)
            }
            .map_err(|e| Failure::Validation(e.to_string()))?;
            let opts = ConditionOptions {
                theta: *theta,
                growth_tolerance: *growth_tolerance,
                index_cap: *index_cap,
                threads: ctx.threads,
                ..ConditionOptions::default()
            };
            let grid = grid.clone().unwrap_or_else(asymptotics::default_grid);
            let report = asymptotics::evaluate_family(&fam, &grid, &opts).map_err(|e| Failure::Validation(e.to_string()))?;
            if let Some(path) = plot_data {
                let mut csv = String::from("n,r1,c1,condition1,mu,tail_mass\n");
                for (k, p) in report.points.iter().enumerate() {
                    let _ = writeln!(csv, "{},{},{},{},{},{}", p.n, p.r1, p.c1, p.condition1, p.mu, report.tail_mass[k]);
                }
                std::fs::write(path, csv).map_err(|e| Failure::Validation(format!("{}: {e}", path.display())))?;
            }
            ctx.emit_json(&report);
            if ctx.strict && report.overall == Overall::Inconclusive {
                return Err(Failure::Inconclusive);
            }
        }
        Command::TestUniformity {
            margins,
            samples,
            significance,
        } => {
            let m = ctx.margins(margins)?;
            let samples = match samples {
                Some(s) => *s,
                None => {
                    if !m.is_feasible() {
                        return Err(StatsError::Infeasible.into());
                    }
                    100 * oracle::enumerate_tables(&m, stats::MAX_UNIFORMITY_TABLES)?.len() as u64
                }
            };
            let result = stats::uniformity_test(&m, samples, ctx.seed, ctx.threads)?;
            let mut out = serde_json::to_value(&result).expect("serializable");
            let obj = out.as_object_mut().expect("object");
            obj.insert("significance".into(), json!(significance));
            obj.insert("passed".into(), json!(result.passes(*significance)));
            ctx.emit_json(&out);
        }
        Command::PropertyTransfer {
            margins,
            property,
            samples,
        } => {
            let m = ctx.margins(margins)?;
            let property: GraphProperty = property.parse()?;
            let result = stats::property_transfer(&m, property, *samples, ctx.seed)?;
            ctx.emit_json(&result);
        }
        Command::Bench {
            family,
            grid,
            reps,
            warmup,
        } => {
            if *reps < 5 {
                return Err(Failure::Validation("--reps must be at least 5".into()));
            }
            let fam = SequenceFamily::builtin(family).map_err(|e| Failure::Validation(e.to_string()))?;
            let mut points = Vec::new();
            for &n in grid {
                let m = fam.generate(n).map_err(|e| Failure::Validation(e.to_string()))?;
                let mut times = Vec::with_capacity(*reps);
                for rep in 0..warmup + reps {
                    let mut rng = rng::task_rng(ctx.seed, rep as u64);
                    let start = Instant::now();
                    let pairing = sample_pairing(&m, &mut rng);
                    let elapsed = start.elapsed().as_secs_f64();
                    std::hint::black_box(pairing.perm().first());
                    if rep >= *warmup {
                        times.push(elapsed);
                    }
                }
                let mut sorted = times.clone();
                sorted.sort_by(f64::total_cmp);
                let median = sorted[sorted.len() / 2];
                points.push(json!({"n": n, "median_secs": median, "secs_per_token": median / n as f64, "times": times}));
            }
            let ratios: Vec<f64> = points
                .windows(2)
                .map(|w| w[1]["median_secs"].as_f64().unwrap_or(0.0) / w[0]["median_secs"].as_f64().unwrap_or(1.0))
                .collect();
            ctx.emit_json(&json!({"family": family, "reps": reps, "warmup": warmup, "points": points, "ratios": ratios}));
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let argv: Vec<String> = std::env::args().collect();
    let cli = match Cli::try_parse_from(&argv) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    let mut ctx = Ctx {
        seed: cli.global.seed,
        threads: cli.global.threads.max(1),
        pretty: cli.global.pretty,
        strict: cli.global.strict,
        inputs: Vec::new(),
        out: String::new(),
    };
    let start = Instant::now();
    let result = run(&cli.command, &mut ctx);
    let duration = start.elapsed().as_secs_f64();

    print!("{}", ctx.out);
    let code = match &result {
        Ok(()) => 0,
        Err(f) => {
            match f {
                Failure::Validation(msg) | Failure::Infeasible(msg) | Failure::Exhausted(msg) => eprintln!("error: {msg}"),
                Failure::Inconclusive => eprintln!("verdict inconclusive"),
            }
            f.code()
        }
    };
    let manifest = RunManifest {
        subcommand: cli.command.name().to_string(),
        argv,
        seed: ctx.seed,
        version: env!("CARGO_PKG_VERSION"),
        duration_secs: duration,
        inputs: ctx.inputs,
        exit_code: code,
    };
    let text = serde_json::to_string(&manifest).expect("serializable manifest");
    match &cli.global.manifest {
        Some(path) => {
            if let Err(e) = std::fs::write(path, text + "\n") {
                eprintln!("error: cannot write manifest {}: {e}", path.display());
            }
        }
        None => eprintln!("{text}"),
    }
    ExitCode::from(code)
}
