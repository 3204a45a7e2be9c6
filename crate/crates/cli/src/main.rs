use clap::{Parser, Subcommand, ValueEnum};
use cs_thresh::recovery::{
    nsp_report_fixed_support, nsp_report_strong, phase_diagram, read_matrix, NspReport, NspVariant,
};
use cs_thresh::thresholds::{curve, invert_alpha, SolverConfig};
use cs_thresh::width::{width_monte_carlo, CMode};
use cs_thresh::{Error, ThresholdKind};
use cs_thresh_cli::{curve_csv, curve_svg, num, parse_grid, phase_csv, INVERT_HEADER};
use serde::Serialize;
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser, Debug)]
#[command(name = "cs-thresh", version, about = "l1 recovery thresholds, Gaussian widths and phase diagrams")]
struct Cli {
    /// Worker threads (0 = all cores).
    #[arg(long, global = true, env = "CS_THRESH_THREADS", default_value_t = 0)]
    threads: usize,

    #[command(subcommand)]
    command: Command,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
enum Kind {
    Strong,
    Sectional,
    Weak,
    #[value(alias = "nonneg")]
    WeakNonneg,
}

impl From<Kind> for ThresholdKind {
    fn from(k: Kind) -> Self {
        match k {
            Kind::Strong => ThresholdKind::Strong,
            Kind::Sectional => ThresholdKind::Sectional,
            Kind::Weak => ThresholdKind::WeakFixedSupportSigns,
            Kind::WeakNonneg => ThresholdKind::WeakNonnegative,
        }
    }
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
enum Format {
    Csv,
    Json,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
enum Mode {
    Exact,
    Population,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
enum Variant {
    Strong,
    Sectional,
    Weak,
    Nonneg,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Threshold curve alpha_min(beta) over a beta grid.
    Curve {
        #[arg(long, value_enum)]
        kind: Kind,
        /// start:stop:step, a comma list, or a single value.
        #[arg(long)]
        beta: String,
        #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
        eps: f64,
        #[arg(long, default_value_t = 1e-12)]
        theta_tol: f64,
        #[arg(long, value_enum, default_value_t = Format::Csv)]
        format: Format,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Also write a polyline plot of the curve.
        #[arg(long)]
        svg: Option<PathBuf>,
    },
    /// Largest beta whose bound needs at most the given alpha.
    Invert {
        #[arg(long, value_enum)]
        kind: Kind,
        #[arg(long, allow_hyphen_values = true)]
        alpha: f64,
        #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
        eps: f64,
        #[arg(long, value_enum, default_value_t = Format::Csv)]
        format: Format,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Monte Carlo estimate of the width bound against Gordon's budget.
    Width {
        #[arg(long, value_enum)]
        kind: Kind,
        #[arg(long)]
        n: usize,
        #[arg(long)]
        k: usize,
        #[arg(long, default_value_t = 200)]
        samples: usize,
        #[arg(long)]
        m: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, value_enum, default_value_t = Mode::Exact)]
        c_mode: Mode,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Empirical recovery rates over an (alpha, beta) grid.
    Phase {
        #[arg(long)]
        n: usize,
        #[arg(long)]
        alpha: String,
        #[arg(long)]
        beta: String,
        #[arg(long, default_value_t = 100)]
        trials: usize,
        #[arg(long, value_enum)]
        model: Kind,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, value_enum, default_value_t = Format::Csv)]
        format: Format,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Exact null-space-property check for a small matrix file.
    CheckNsp {
        /// First line "m n", then m rows of n numbers.
        #[arg(long)]
        matrix: PathBuf,
        #[arg(long)]
        k: usize,
        #[arg(long, value_enum)]
        variant: Variant,
        #[arg(long, value_enum, default_value_t = Format::Csv)]
        format: Format,
    },
}

enum Failure {
    Usage(String),
    Solver(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::Domain(_) | Error::Dimension(_) | Error::InvalidConfig(_) | Error::Parse(_) => {
                Failure::Usage(e.to_string())
            }
            _ => Failure::Solver(e.to_string()),
        }
    }
}

type CmdResult = Result<(), Failure>;

fn emit(text: &str, out: &Option<PathBuf>) -> CmdResult {
    match out {
        Some(path) => {
            std::fs::write(path, text).map_err(|e| Failure::Usage(format!("cannot write {}: {e}", path.display())))
        }
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("serializable output");
    s.push('\n');
    s
}

fn config(eps: f64, theta_tol: f64) -> Result<SolverConfig, Failure> {
    let cfg = SolverConfig { eps, theta_tol, ..SolverConfig::default() };
    cfg.validate()?;
    Ok(cfg)
}

#[derive(Serialize)]
struct InvertRecord {
    kind: ThresholdKind,
    alpha: f64,
    beta: f64,
    eps: f64,
}

#[derive(Serialize)]
struct NspRecord<'a> {
    variant: &'a str,
    k: usize,
    #[serde(flatten)]
    report: &'a NspReport,
}

fn run(command: Command) -> CmdResult {
    match command {
        Command::Curve { kind, beta, eps, theta_tol, format, out, svg } => {
            let grid = parse_grid(&beta).map_err(Failure::Usage)?;
            let cfg = config(eps, theta_tol)?;
            let points = curve(kind.into(), &grid, &cfg)?;
            let text = match format {
                Format::Csv => curve_csv(&points),
                Format::Json => json(&points),
            };
            emit(&text, &out)?;
            if let Some(path) = svg {
                emit(&curve_svg(&points), &Some(path))?;
            }
            let failed = points.iter().filter(|p| p.flags.failed).count();
            if failed > 0 {
                return Err(Failure::Solver(format!("{failed} grid point(s) could not be solved")));
            }
            Ok(())
        }
        Command::Invert { kind, alpha, eps, format, out } => {
            let cfg = config(eps, 1e-12)?;
            let kind = ThresholdKind::from(kind);
            let beta = invert_alpha(kind, alpha, &cfg)?;
            let text = match format {
                Format::Csv => format!("{INVERT_HEADER}\n{kind},{},{},{}\n", num(alpha), num(beta), num(eps)),
                Format::Json => json(&InvertRecord { kind, alpha, beta, eps }),
            };
            emit(&text, &out)
        }
        Command::Width { kind, n, k, samples, m, seed, c_mode, out } => {
            let mode = match c_mode {
                Mode::Exact => CMode::ExactDual,
                Mode::Population => CMode::Population,
            };
            let report = width_monte_carlo(kind.into(), n, k, samples, m, seed, mode)?;
            emit(&json(&report), &out)
        }
        Command::Phase { n, alpha, beta, trials, model, seed, format, out } => {
            let alphas = parse_grid(&alpha).map_err(Failure::Usage)?;
            let betas = parse_grid(&beta).map_err(Failure::Usage)?;
            let cells = phase_diagram(n, &alphas, &betas, trials, model.into(), seed)?;
            let text = match format {
                Format::Csv => phase_csv(&cells),
                Format::Json => json(&cells),
            };
            emit(&text, &out)?;
            let failures: usize = cells.iter().map(|c| c.lp_failures).sum();
            if failures > 0 {
                return Err(Failure::Solver(format!("{failures} trial(s) hit a solver failure")));
            }
            Ok(())
        }
        Command::CheckNsp { matrix, k, variant, format } => {
            let a = read_matrix(&matrix)?;
            let (name, report) = match variant {
                Variant::Strong => ("strong", nsp_report_strong(&a, k)?),
                Variant::Sectional => ("sectional", nsp_report_fixed_support(&a, k, NspVariant::Sectional)?),
                Variant::Weak => ("weak", nsp_report_fixed_support(&a, k, NspVariant::WeakSigns)?),
                Variant::Nonneg => ("nonneg", nsp_report_fixed_support(&a, k, NspVariant::Nonnegative)?),
            };
            let text = match format {
                Format::Json => json(&NspRecord { variant: name, k, report: &report }),
                Format::Csv => {
                    let mut s = format!("verdict,{}\n", report.verdict);
                    if let Some(w) = &report.witness {
                        let join = |v: Vec<String>| v.join(" ");
                        s += &format!("support,{}\n", join(w.support.iter().map(|i| i.to_string()).collect()));
                        s += &format!("signs,{}\n", join(w.signs.iter().map(|v| num(*v)).collect()));
                        s += &format!("w,{}\n", join(w.w.iter().map(|v| num(*v)).collect()));
                        s += &format!("value,{}\n", num(w.value));
                    }
                    s
                }
            };
            emit(&text, &None)
        }
    }
}

fn dispatch(cli: Cli) -> CmdResult {
    #[cfg(feature = "parallel")]
    {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(cli.threads)
            .build()
            .map_err(|e| Failure::Usage(format!("cannot start thread pool: {e}")))?;
        pool.install(|| run(cli.command))
    }
    #[cfg(not(feature = "parallel"))]
    {
        run(cli.command)
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(Failure::Solver(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
    }
}
