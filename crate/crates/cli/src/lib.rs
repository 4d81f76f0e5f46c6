//! Command-line front end: `simulate`, `estimate`, `m1dist`, `limits`,
//! `converge` and `suite`.
//!
//! Exit codes: 0 success, 1 verdict failure, 2 usage or input error,
//! 3 I/O error.

use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use selfnorm::cadlag::{fmt_f64, j1_distance, m1_distance, uniform_distance, weak_m1_distance, CadlagPath, PathKind};
use selfnorm::config::{parse_config, ExperimentConfig};
use selfnorm::inference::{
    abs_quantile, empirical_an, extremal_index_blocks, hill_alpha, BlockingScheme,
};
use selfnorm::lab::{
    limit_model, run_fidi_convergence, run_full_suite, run_selfnorm_convergence, ConvergenceReport,
    SuiteBundle,
};
use selfnorm::stable::{l2_stable_params, simulate_levy_pair, stable_params};
use selfnorm::{seeds, Error};

pub const EXIT_OK: i32 = 0;
pub const EXIT_VERDICT: i32 = 1;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_IO: i32 = 3;

#[derive(Debug, Parser)]
#[command(name = "selfnorm", version, about = "Self-normalized partial sums of heavy-tailed series")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args, Clone)]
pub struct ConfigArgs {
    /// Experiment configuration file.
    #[arg(long, short)]
    pub config: PathBuf,
    /// `section.key=value` overrides, applied in order.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    pub overrides: Vec<String>,
    /// Seed; wins over the file, overrides and the SEED variable.
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Sample the configured model and write `i,x[,x2,sigma2]` CSV.
    Simulate {
        #[command(flatten)]
        cfg: ConfigArgs,
        /// Sample size (defaults to the largest n in run.n_grid).
        #[arg(long)]
        n: Option<usize>,
        #[arg(long, short)]
        out: PathBuf,
    },
    /// Hill, extremal-index and norming estimates from a sample CSV.
    Estimate {
        input: PathBuf,
        #[arg(long, default_value_t = 0.99)]
        u_level: f64,
        #[arg(long, default_value_t = 0.5)]
        kappa: f64,
    },
    /// Uniform, J1, M1 and weak M1 distances between two path CSVs.
    M1dist {
        a: PathBuf,
        b: PathBuf,
        #[arg(long)]
        resolution: Option<usize>,
    },
    /// Characteristic triple and stable parameters of the limit.
    Limits {
        #[command(flatten)]
        cfg: ConfigArgs,
        /// Also write one draw of the limit pair to this CSV.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Finite-dimensional and self-normalized convergence checks.
    Converge {
        #[command(flatten)]
        cfg: ConfigArgs,
        #[arg(long, short)]
        out: PathBuf,
    },
    /// Every check, written as a bundle directory.
    Suite {
        #[command(flatten)]
        cfg: ConfigArgs,
        #[arg(long, short)]
        out: PathBuf,
    },
}

/// Error carrying its exit code.
#[derive(Debug)]
pub struct Failure {
    pub code: i32,
    pub message: String,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::Io(_) => EXIT_IO,
            _ => EXIT_USAGE,
        };
        Failure {
            code,
            message: e.to_string(),
        }
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure {
            code: EXIT_IO,
            message: e.to_string(),
        }
    }
}

type CliResult<T> = std::result::Result<T, Failure>;

fn read(path: &Path) -> CliResult<String> {
    std::fs::read_to_string(path).map_err(|e| Failure {
        code: EXIT_IO,
        message: format!("{}: {e}", path.display()),
    })
}

/// Reads and validates a configuration with the CLI seed applied last.
pub fn load_config(args: &ConfigArgs) -> CliResult<ExperimentConfig> {
    let text = read(&args.config)?;
    let mut overrides = args.overrides.clone();
    if let Some(seed) = args.seed {
        overrides.push(format!("run.seed={seed}"));
    }
    Ok(parse_config(&text, &overrides)?)
}

fn echo_config(cfg: &ExperimentConfig, out: &mut dyn Write) -> CliResult<()> {
    for line in cfg.echo().lines() {
        writeln!(out, "# {line}")?;
    }
    Ok(())
}

pub fn cmd_simulate(cfg: &ExperimentConfig, n: Option<usize>, path: &Path, out: &mut dyn Write) -> CliResult<()> {
    let n = n.unwrap_or(*cfg.n_grid.last().unwrap());
    let sample = cfg.model.sample(n, cfg.seed)?;
    std::fs::write(path, sample.to_csv())?;
    for w in &sample.warnings {
        writeln!(out, "# warning: {w}")?;
    }
    writeln!(out, "wrote {} observations to {}", n, path.display())?;
    Ok(())
}

/// Reads the `x` column of a sample CSV (`i,x[,...]`).
pub fn read_sample(text: &str) -> CliResult<Vec<f64>> {
    let mut out = Vec::new();
    for (idx, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') || line.starts_with('i') {
            continue;
        }
        let field = line.split(',').nth(1).ok_or_else(|| Failure {
            code: EXIT_USAGE,
            message: format!("row {}: expected at least two columns", idx + 1),
        })?;
        out.push(field.trim().parse::<f64>().map_err(|e| Failure {
            code: EXIT_USAGE,
            message: format!("row {}: malformed number `{field}`: {e}", idx + 1),
        })?);
    }
    Ok(out)
}

pub fn cmd_estimate(input: &Path, u_level: f64, kappa: f64, out: &mut dyn Write) -> CliResult<()> {
    let data = read_sample(&read(input)?)?;
    let n = data.len();
    let k = ((1.0 - u_level) * n as f64).round().max(1.0) as usize;
    let thr = abs_quantile(&data, u_level)?;
    let scheme = BlockingScheme::from_kappa(n, kappa)?;
    writeln!(out, "n={n}")?;
    writeln!(out, "hill_k={k}")?;
    writeln!(out, "alpha_hat={}", fmt_f64(hill_alpha(&data, k)?))?;
    writeln!(out, "threshold={}", fmt_f64(thr))?;
    writeln!(out, "block_length={}", scheme.r)?;
    writeln!(out, "theta_hat={}", fmt_f64(extremal_index_blocks(&data, &scheme, thr)?))?;
    writeln!(out, "an_hat={}", fmt_f64(empirical_an(&data, n)?))?;
    Ok(())
}

/// The four distances, as printed by `m1dist`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Distances {
    pub uniform: f64,
    pub j1: f64,
    /// Strong M1; `None` for multivariate paths.
    pub m1: Option<f64>,
    pub weak_m1: f64,
}

pub fn path_distances(a: &CadlagPath, b: &CadlagPath, resolution: Option<usize>) -> selfnorm::Result<Distances> {
    if a.dim() != b.dim() {
        return Err(Error::DimensionMismatch {
            left: a.dim(),
            right: b.dim(),
        });
    }
    let needed = [a, b]
        .iter()
        .map(|p| 2 * (p.jump_count() + p.len()))
        .max()
        .unwrap();
    let res = resolution.unwrap_or((4 * needed).max(1000));
    let steps = |p: &CadlagPath| {
        if p.kind() == PathKind::Step {
            p.clone()
        } else {
            p.to_step(res)
        }
    };
    let (sa, sb) = (steps(a), steps(b));
    let mut j1 = 0.0f64;
    for c in 0..a.dim() {
        j1 = j1.max(j1_distance(&sa.coordinate(c)?, &sb.coordinate(c)?)?);
    }
    Ok(Distances {
        uniform: uniform_distance(a, b)?,
        j1,
        m1: if a.dim() == 1 { Some(m1_distance(a, b, res)?) } else { None },
        weak_m1: weak_m1_distance(a, b, res)?,
    })
}

pub fn cmd_m1dist(a: &Path, b: &Path, resolution: Option<usize>, out: &mut dyn Write) -> CliResult<()> {
    let parse = |p: &Path| -> CliResult<CadlagPath> {
        CadlagPath::from_csv(&read(p)?).map_err(|e| Failure {
            code: EXIT_USAGE,
            message: format!("{}: {e}", p.display()),
        })
    };
    let d = path_distances(&parse(a)?, &parse(b)?, resolution)?;
    writeln!(out, "uniform={}", fmt_f64(d.uniform))?;
    writeln!(out, "j1={}", fmt_f64(d.j1))?;
    match d.m1 {
        Some(m) => writeln!(out, "m1={}", fmt_f64(m))?,
        None => writeln!(out, "m1=unsupported")?,
    }
    writeln!(out, "weak_m1={}", fmt_f64(d.weak_m1))?;
    Ok(())
}

pub fn cmd_limits(cfg: &ExperimentConfig, path: Option<&Path>, out: &mut dyn Write) -> CliResult<()> {
    let lm = limit_model(cfg)?;
    writeln!(out, "triple {}", lm.triple.to_record())?;
    writeln!(out, "l1 {}", stable_params(&lm.triple)?.to_record())?;
    writeln!(out, "l2 {}", l2_stable_params(&lm.triple)?.to_record())?;
    if let Some(path) = path {
        let pair = simulate_levy_pair(&lm.triple, &lm.cluster, cfg.n_pts, seeds::derive(cfg.seed, "limit-path"))?;
        std::fs::write(path, pair.to_csv())?;
        writeln!(out, "wrote limit pair to {}", path.display())?;
    }
    Ok(())
}

fn print_verdicts(reports: &[ConvergenceReport], out: &mut dyn Write) -> CliResult<()> {
    for v in reports.iter().flat_map(|r| &r.verdicts) {
        writeln!(
            out,
            "{} {} value={} threshold={} ({})",
            v.name,
            v.status.tag(),
            fmt_f64(v.value),
            fmt_f64(v.threshold),
            v.tolerance
        )?;
    }
    Ok(())
}

/// Convergence checks only; writes `report.jsonl` under `dir`.
pub fn cmd_converge(cfg: &ExperimentConfig, dir: &Path, out: &mut dyn Write) -> CliResult<Vec<ConvergenceReport>> {
    let reports = vec![run_fidi_convergence(cfg)?, run_selfnorm_convergence(cfg)?];
    std::fs::create_dir_all(dir)?;
    let bundle = SuiteBundle {
        config: cfg.clone(),
        reports,
    };
    std::fs::write(dir.join("report.jsonl"), bundle.report_jsonl())?;
    std::fs::write(dir.join("summary.txt"), bundle.summary())?;
    print_verdicts(&bundle.reports, out)?;
    Ok(bundle.reports)
}

/// Full suite written to `dir`.
pub fn cmd_suite(cfg: &ExperimentConfig, dir: &Path) -> CliResult<SuiteBundle> {
    let bundle = run_full_suite(cfg);
    bundle.write(dir)?;
    Ok(bundle)
}

/// Verdict-based exit code, listing failures on `err`.
fn verdict_exit<'a>(
    verdicts: impl Iterator<Item = &'a selfnorm::lab::Verdict>,
    err: &mut dyn Write,
) -> CliResult<i32> {
    let failing: Vec<_> = verdicts.filter(|v| v.status.is_failure()).collect();
    for v in &failing {
        writeln!(err, "FAILED {}: {} ({})", v.name, v.detail, v.status.tag())?;
    }
    Ok(if failing.is_empty() { EXIT_OK } else { EXIT_VERDICT })
}

fn dispatch(cli: Cli, out: &mut dyn Write, err: &mut dyn Write) -> CliResult<i32> {
    match cli.command {
        Command::Simulate { cfg, n, out: path } => {
            let cfg = load_config(&cfg)?;
            echo_config(&cfg, out)?;
            cmd_simulate(&cfg, n, &path, out)?;
            Ok(EXIT_OK)
        }
        Command::Estimate { input, u_level, kappa } => {
            cmd_estimate(&input, u_level, kappa, out)?;
            Ok(EXIT_OK)
        }
        Command::M1dist { a, b, resolution } => {
            cmd_m1dist(&a, &b, resolution, out)?;
            Ok(EXIT_OK)
        }
        Command::Limits { cfg, out: path } => {
            let cfg = load_config(&cfg)?;
            echo_config(&cfg, out)?;
            cmd_limits(&cfg, path.as_deref(), out)?;
            Ok(EXIT_OK)
        }
        Command::Converge { cfg, out: dir } => {
            let cfg = load_config(&cfg)?;
            echo_config(&cfg, out)?;
            let reports = cmd_converge(&cfg, &dir, out)?;
            verdict_exit(reports.iter().flat_map(|r| &r.verdicts), err)
        }
        Command::Suite { cfg, out: dir } => {
            let cfg = load_config(&cfg)?;
            echo_config(&cfg, out)?;
            let bundle = cmd_suite(&cfg, &dir)?;
            print_verdicts(&bundle.reports, out)?;
            verdict_exit(bundle.verdicts(), err)
        }
    }
}

/// Parses arguments and runs one command, returning the exit code.
pub fn run_with<I, S>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = S>,
    S: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            if e.use_stderr() {
                let _ = write!(err, "{e}");
            } else {
                let _ = write!(out, "{e}");
            }
            return code;
        }
    };
    match dispatch(cli, out, err) {
        Ok(code) => code,
        Err(f) => {
            let _ = writeln!(err, "error: {}", f.message);
            f.code
        }
    }
}
