//! Command-line front end.

use std::ffi::OsString;
use std::io::Write as _;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::error::{Error, Result};
use crate::fock_states::SingleModeState;
use crate::optical_sim::{self, CircuitConfig};
use crate::param_solver::{self, Family, FamilyTarget};
use crate::qcrb::{self, ProbeSpec, QcrbReport, Weighting};
use crate::reports::{self, FigureSpec, Format, Table};

/// Directory used for figure files when `--output` is absent.
pub const OUTPUT_DIR_ENV: &str = "NOONLIKE_OUTPUT_DIR";

pub const EXIT_OK: i32 = 0;
pub const EXIT_COMPUTATION: i32 = 1;
pub const EXIT_USAGE: i32 = 2;

/// Quantum Cramér-Rao bounds for multiphase estimation with NOON-like probes.
#[derive(Debug, Clone, Parser, PartialEq)]
#[command(name = "noonlike", version)]
pub struct RunConfig {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Subcommand, PartialEq)]
pub enum Command {
    /// Bound for one probe state.
    Qcrb(QcrbArgs),
    /// All four families at a common mean photon number.
    Compare(CompareArgs),
    /// Squeezed-coherent bound against the squeeze factor at fixed n_bar.
    SweepEscs(SweepEscsArgs),
    /// Balanced against optimally weighted squeezed-vacuum probes.
    Unbalanced(UnbalancedArgs),
    /// Simulate the heralded state-preparation circuit.
    Experiment(ExperimentArgs),
    /// Write the data behind one figure.
    Figure(FigureArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum FamilyArg {
    Noon,
    Ecs,
    Escs,
    Esvs,
}

impl From<FamilyArg> for Family {
    fn from(f: FamilyArg) -> Self {
        match f {
            FamilyArg::Noon => Family::Noon,
            FamilyArg::Ecs => Family::Ecs,
            FamilyArg::Escs => Family::Escs,
            FamilyArg::Esvs => Family::Esvs,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum FormatArg {
    Csv,
    Json,
}

impl From<FormatArg> for Format {
    fn from(f: FormatArg) -> Self {
        match f {
            FormatArg::Csv => Format::Csv,
            FormatArg::Json => Format::Json,
        }
    }
}

#[derive(Debug, Clone, Args, PartialEq)]
pub struct OutputArgs {
    /// Output file; standard output when absent.
    #[arg(long)]
    pub output: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "csv")]
    pub format: FormatArg,
}

#[derive(Debug, Clone, Args, PartialEq)]
pub struct QcrbArgs {
    #[arg(long, value_enum)]
    pub family: FamilyArg,
    /// Number of phases.
    #[arg(long, value_parser = parse_d)]
    pub d: usize,
    /// Photon number of the NOON constituent.
    #[arg(long, value_parser = parse_positive, conflicts_with = "n_bar")]
    pub n: Option<f64>,
    /// Coherent amplitude (ECS, ESCS).
    #[arg(long, value_parser = parse_non_negative, conflicts_with = "n_bar")]
    pub alpha: Option<f64>,
    /// Squeeze factor (ESVS).
    #[arg(long, value_parser = parse_positive, conflicts_with = "n_bar")]
    pub r: Option<f64>,
    /// Fixed squeeze factor of the ESCS constituent.
    #[arg(long, value_parser = parse_non_negative)]
    pub r_prime: Option<f64>,
    /// Match the family parameter to this mean total photon number.
    #[arg(long, value_parser = parse_positive)]
    pub n_bar: Option<f64>,
    /// Unbalanced probe with this weight on each probing component.
    #[arg(long, value_parser = parse_positive, conflicts_with = "optimize_b")]
    pub b2: Option<f64>,
    /// Unbalanced probe with the optimal weight.
    #[arg(long)]
    pub optimize_b: bool,
    #[command(flatten)]
    pub out: OutputArgs,
}

#[derive(Debug, Clone, Args, PartialEq)]
pub struct CompareArgs {
    #[arg(long, value_parser = parse_d)]
    pub d: usize,
    #[arg(long, value_parser = parse_positive)]
    pub n_bar: f64,
    #[arg(long, value_parser = parse_positive, default_value_t = param_solver::DEFAULT_ESCS_R_PRIME)]
    pub r_prime: f64,
    #[command(flatten)]
    pub out: OutputArgs,
}

#[derive(Debug, Clone, Args, PartialEq)]
pub struct SweepEscsArgs {
    #[arg(long, value_parser = parse_d, default_value_t = 5)]
    pub d: usize,
    #[arg(long, value_parser = parse_positive, default_value_t = 2.0)]
    pub n_bar: f64,
    #[arg(long, value_parser = parse_non_negative, default_value_t = 0.2)]
    pub r_min: f64,
    #[arg(long, value_parser = parse_positive, default_value_t = 1.6)]
    pub r_max: f64,
    #[arg(long, value_parser = parse_steps, default_value_t = 15)]
    pub steps: usize,
    #[command(flatten)]
    pub out: OutputArgs,
}

#[derive(Debug, Clone, Args, PartialEq)]
pub struct UnbalancedArgs {
    #[arg(long, value_parser = parse_d, default_value_t = 5)]
    pub d: usize,
    #[arg(long, value_parser = parse_positive, default_value_t = 0.3)]
    pub r_min: f64,
    #[arg(long, value_parser = parse_positive, default_value_t = 3.0)]
    pub r_max: f64,
    #[arg(long, value_parser = parse_steps, default_value_t = 60)]
    pub steps: usize,
    #[command(flatten)]
    pub out: OutputArgs,
}

#[derive(Debug, Clone, Args, PartialEq)]
pub struct ExperimentArgs {
    #[arg(long, value_parser = parse_positive, default_value_t = 1.0)]
    pub r: f64,
    /// Total-photon cutoff; overrides the circuit file.
    #[arg(long, value_parser = parse_cutoff)]
    pub cutoff: Option<usize>,
    /// Circuit description (TOML); the shipped reference wiring when absent.
    #[arg(long)]
    pub circuit: Option<PathBuf>,
    #[command(flatten)]
    pub out: OutputArgs,
}

#[derive(Debug, Clone, Args, PartialEq)]
pub struct FigureArgs {
    #[arg(long, value_parser = parse_figure_id)]
    pub id: u32,
    #[arg(long, value_parser = parse_d)]
    pub d: Option<usize>,
    #[arg(long, value_parser = parse_steps)]
    pub steps: Option<usize>,
    #[arg(long, value_parser = parse_positive)]
    pub n_bar_min: Option<f64>,
    #[arg(long, value_parser = parse_positive)]
    pub n_bar_max: Option<f64>,
    #[arg(long, value_parser = parse_positive)]
    pub r_min: Option<f64>,
    #[arg(long, value_parser = parse_positive)]
    pub r_max: Option<f64>,
    #[arg(long, value_parser = parse_cutoff)]
    pub cutoff: Option<usize>,
    #[arg(long)]
    pub circuit: Option<PathBuf>,
    /// Output file; `figure<ID>.<ext>` under the output directory
    /// environment variable, or standard output.
    #[arg(long)]
    pub output: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "csv")]
    pub format: FormatArg,
}

fn parse_f64(s: &str) -> std::result::Result<f64, String> {
    let v: f64 = s.parse().map_err(|_| format!("`{s}` is not a number"))?;
    if v.is_finite() {
        Ok(v)
    } else {
        Err(format!("`{s}` is not finite"))
    }
}

fn parse_positive(s: &str) -> std::result::Result<f64, String> {
    let v = parse_f64(s)?;
    if v > 0.0 {
        Ok(v)
    } else {
        Err(format!("must be positive, got {v}"))
    }
}

fn parse_non_negative(s: &str) -> std::result::Result<f64, String> {
    let v = parse_f64(s)?;
    if v >= 0.0 {
        Ok(v)
    } else {
        Err(format!("must be non-negative, got {v}"))
    }
}

fn parse_count(s: &str, min: usize) -> std::result::Result<usize, String> {
    let v: usize = s
        .parse()
        .map_err(|_| format!("`{s}` is not a whole number"))?;
    if v >= min {
        Ok(v)
    } else {
        Err(format!("must be at least {min}, got {v}"))
    }
}

fn parse_d(s: &str) -> std::result::Result<usize, String> {
    parse_count(s, 1)
}

fn parse_steps(s: &str) -> std::result::Result<usize, String> {
    parse_count(s, 2)
}

fn parse_cutoff(s: &str) -> std::result::Result<usize, String> {
    parse_count(s, 1)
}

fn parse_figure_id(s: &str) -> std::result::Result<u32, String> {
    match s.parse::<u32>() {
        Ok(id) if reports::FIGURE_IDS.contains(&id) => Ok(id),
        _ => Err(format!("`{s}` is not one of {:?}", reports::FIGURE_IDS)),
    }
}

/// Command-line usage error, carrying clap's rendered message.
#[derive(Debug)]
pub struct UsageError(pub clap::Error);

impl UsageError {
    fn message(text: String) -> Self {
        UsageError(clap::Error::raw(
            clap::error::ErrorKind::ValueValidation,
            text + "\n",
        ))
    }

    /// Help and version requests are reported through this type too.
    pub fn exit_code(&self) -> i32 {
        if self.0.use_stderr() {
            EXIT_USAGE
        } else {
            EXIT_OK
        }
    }
}

impl std::fmt::Display for UsageError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}", self.0)
    }
}

impl std::error::Error for UsageError {}

/// Parses and validates `argv` (including the program name).
pub fn parse_args<I, T>(argv: I) -> std::result::Result<RunConfig, UsageError>
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let config = RunConfig::try_parse_from(argv).map_err(UsageError)?;
    validate(&config).map_err(UsageError::message)?;
    Ok(config)
}

fn validate(config: &RunConfig) -> std::result::Result<(), String> {
    let range = |flag: &str, lo: f64, hi: f64| {
        if lo < hi {
            Ok(())
        } else {
            Err(format!(
                "--{flag}-min ({lo}) must be below --{flag}-max ({hi})"
            ))
        }
    };
    match &config.command {
        Command::Qcrb(a) => {
            let parameter_given = match a.family {
                FamilyArg::Noon => a.n.is_some(),
                FamilyArg::Ecs | FamilyArg::Escs => a.alpha.is_some(),
                FamilyArg::Esvs => a.r.is_some(),
            };
            if !parameter_given && a.n_bar.is_none() {
                let flag = match a.family {
                    FamilyArg::Noon => "--n",
                    FamilyArg::Ecs | FamilyArg::Escs => "--alpha",
                    FamilyArg::Esvs => "--r",
                };
                return Err(format!("family {:?} needs {flag} or --n-bar", a.family));
            }
            let stray = match a.family {
                FamilyArg::Noon => [
                    ("--alpha", a.alpha.is_some()),
                    ("--r", a.r.is_some()),
                    ("--r-prime", a.r_prime.is_some()),
                ],
                FamilyArg::Ecs => [
                    ("--n", a.n.is_some()),
                    ("--r", a.r.is_some()),
                    ("--r-prime", a.r_prime.is_some()),
                ],
                FamilyArg::Escs => [("--n", a.n.is_some()), ("--r", a.r.is_some()), ("", false)],
                FamilyArg::Esvs => [
                    ("--n", a.n.is_some()),
                    ("--alpha", a.alpha.is_some()),
                    ("--r-prime", a.r_prime.is_some()),
                ],
            };
            if let Some((flag, _)) = stray.iter().find(|(_, given)| *given) {
                return Err(format!("{flag} does not apply to family {:?}", a.family));
            }
            if a.family == FamilyArg::Noon && a.n_bar.is_some() && (a.b2.is_some() || a.optimize_b)
            {
                return Err("an effective NOON value at --n-bar is always balanced".into());
            }
            Ok(())
        }
        Command::SweepEscs(a) => range("r", a.r_min, a.r_max),
        Command::Unbalanced(a) => range("r", a.r_min, a.r_max),
        Command::Figure(a) => {
            let spec = figure_spec(a).map_err(|e| e.to_string())?;
            range("n-bar", spec.n_bar_range.0, spec.n_bar_range.1)?;
            if matches!(a.id, 4 | 6) {
                range("r", spec.r_range.0, spec.r_range.1)?;
            }
            if a.id == 6 && spec.d != 1 {
                return Err("figure 6 is a single-phase comparison; --d must be 1".into());
            }
            Ok(())
        }
        Command::Compare(_) | Command::Experiment(_) => Ok(()),
    }
}

fn figure_spec(a: &FigureArgs) -> Result<FigureSpec> {
    let mut spec = FigureSpec::defaults(a.id)?;
    spec.d = a.d.unwrap_or(spec.d);
    spec.steps = a.steps.unwrap_or(spec.steps);
    spec.n_bar_range = (
        a.n_bar_min.unwrap_or(spec.n_bar_range.0),
        a.n_bar_max.unwrap_or(spec.n_bar_range.1),
    );
    spec.r_range = (
        a.r_min.unwrap_or(spec.r_range.0),
        a.r_max.unwrap_or(spec.r_range.1),
    );
    Ok(spec)
}

fn load_circuit(path: Option<&PathBuf>, cutoff: Option<usize>) -> Result<CircuitConfig> {
    let config = match path {
        Some(p) => CircuitConfig::from_path(p)?,
        None => CircuitConfig::reference(),
    };
    Ok(match cutoff {
        Some(c) => config.with_cutoff(c),
        None => config,
    })
}

/// Where a command's table goes.
#[derive(Debug, Clone, PartialEq)]
pub enum Destination {
    Stdout,
    File(PathBuf),
}

/// Runs a validated command, returning its table and destination.
pub fn execute(config: &RunConfig) -> Result<(Table, Destination, Format)> {
    let to = |out: &OutputArgs| {
        (
            out.output
                .clone()
                .map_or(Destination::Stdout, Destination::File),
            Format::from(out.format),
        )
    };
    match &config.command {
        Command::Qcrb(a) => {
            let report = qcrb_report(a)?;
            let (dest, format) = to(&a.out);
            Ok((reports::report_table(&report), dest, format))
        }
        Command::Compare(a) => {
            let cmp = param_solver::compare_families_at_nbar(a.d, a.n_bar, a.r_prime)?;
            let mut columns = vec!["d".to_string(), "n_bar".into(), "r_prime".into()];
            let mut row = vec![Some(a.d as f64), Some(a.n_bar), Some(a.r_prime)];
            for quantity in ["qcrb", "f", "n_tilde", "parameter"] {
                for p in &cmp.points {
                    columns.push(format!("{quantity}_{}", p.family));
                    row.push(Some(match quantity {
                        "qcrb" => p.report.qcrb,
                        "f" => p.report.f,
                        "n_tilde" => p.report.n_tilde,
                        _ => p.parameter,
                    }));
                }
            }
            let mut table = Table::new(columns);
            table.push(row)?;
            let (dest, format) = to(&a.out);
            Ok((table, dest, format))
        }
        Command::SweepEscs(a) => {
            let grid = reports::linear_grid(a.r_min, a.r_max, a.steps);
            let curve = param_solver::escs_sweep_r_prime(a.d, a.n_bar, &grid)?;
            let mut table = Table::new(["r_prime", "n_bar", "qcrb"]);
            for p in &curve.points {
                table.push(vec![Some(p.parameter), Some(p.n_bar), Some(p.qcrb)])?;
            }
            let (dest, format) = to(&a.out);
            Ok((table, dest, format))
        }
        Command::Unbalanced(a) => {
            let spec = FigureSpec {
                id: 4,
                d: a.d,
                n_bar_range: (0.0, 0.0),
                r_range: (a.r_min, a.r_max),
                steps: a.steps,
            };
            let table = reports::figure_table(&spec, &CircuitConfig::reference())?;
            let (dest, format) = to(&a.out);
            Ok((table, dest, format))
        }
        Command::Experiment(a) => {
            let circuit = load_circuit(a.circuit.as_ref(), a.cutoff)?;
            let result = optical_sim::run_experiment(a.r, &circuit)?;
            let report = result.qcrb_report()?;
            let mut columns: Vec<String> = [
                "r",
                "alpha",
                "n_bar",
                "qcrb",
                "fidelity",
                "branch_phase",
                "chi",
                "success_prob",
                "input_truncation_loss",
            ]
            .iter()
            .map(|s| s.to_string())
            .collect();
            let mut row = vec![
                Some(result.r),
                Some(result.alpha),
                Some(result.n_bar),
                Some(report.qcrb),
                Some(result.fidelity_to_noonlike),
                Some(result.branch_phase),
                Some(result.gauge.chi),
                Some(result.success_prob),
                Some(result.input_truncation_loss),
            ];
            for (n, c) in result.phi_amps.iter().enumerate() {
                columns.push(format!("c{n}_re"));
                columns.push(format!("c{n}_im"));
                row.push(Some(c.re));
                row.push(Some(c.im));
            }
            let mut table = Table::new(columns);
            table.push(row)?;
            let (dest, format) = to(&a.out);
            Ok((table, dest, format))
        }
        Command::Figure(a) => {
            let spec = figure_spec(a)?;
            let circuit = load_circuit(a.circuit.as_ref(), a.cutoff)?;
            let table = reports::figure_table(&spec, &circuit)?;
            let format = Format::from(a.format);
            let dest = match (&a.output, std::env::var_os(OUTPUT_DIR_ENV)) {
                (Some(path), _) => Destination::File(path.clone()),
                (None, Some(dir)) => {
                    Destination::File(PathBuf::from(dir).join(spec.file_name(format)))
                }
                (None, None) => Destination::Stdout,
            };
            Ok((table, dest, format))
        }
    }
}

fn qcrb_report(a: &QcrbArgs) -> Result<QcrbReport> {
    let family = Family::from(a.family);
    let weighting = match (a.b2, a.optimize_b) {
        (Some(b2), _) => Weighting::FixedB { b2 },
        (None, true) => Weighting::OptimizedB,
        (None, false) => Weighting::Balanced,
    };
    let state = if let Some(n_bar) = a.n_bar {
        let mut target = FamilyTarget::new(family, a.d, n_bar);
        if let Some(r_prime) = a.r_prime {
            target.r_prime = Some(r_prime);
        }
        match param_solver::solve_param_for_nbar(&target)? {
            param_solver::MatchedProbe::EffectiveNoon { n } => {
                return QcrbReport::effective_noon(a.d, n)
            }
            param_solver::MatchedProbe::State { state, .. } => state,
        }
    } else {
        match a.family {
            FamilyArg::Noon => {
                let n = a.n.expect("validated");
                if n.fract() != 0.0 {
                    return if weighting == Weighting::Balanced {
                        QcrbReport::effective_noon(a.d, n)
                    } else {
                        Err(Error::InvalidArgument(format!(
                            "unbalanced NOON probes need an integer photon number, got {n}"
                        )))
                    };
                }
                SingleModeState::fock(n as u32)
            }
            FamilyArg::Ecs => SingleModeState::coherent(a.alpha.expect("validated"))?,
            FamilyArg::Esvs => SingleModeState::squeezed_vacuum(a.r.expect("validated"))?,
            FamilyArg::Escs => SingleModeState::squeezed_coherent(
                a.alpha.expect("validated"),
                a.r_prime.unwrap_or(param_solver::DEFAULT_ESCS_R_PRIME),
            )?,
        }
    };
    qcrb::qcrb_closed_form(&ProbeSpec::new(a.d, state, weighting)?)
}

fn emit(table: &Table, dest: &Destination, format: Format) -> Result<()> {
    match dest {
        Destination::Stdout => {
            let mut out = std::io::stdout().lock();
            out.write_all(table.render(format).as_bytes())?;
            out.flush()?;
            Ok(())
        }
        Destination::File(path) => table.write(path, format),
    }
}

/// Full program: parse, run, emit. Returns the process exit code.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let config = match parse_args(argv) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.0.print();
            return e.exit_code();
        }
    };
    match execute(&config).and_then(|(table, dest, format)| emit(&table, &dest, format)) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {e}");
            EXIT_COMPUTATION
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn args(s: &str) -> Vec<String> {
        std::iter::once("noonlike")
            .chain(s.split_whitespace())
            .map(String::from)
            .collect()
    }

    #[test]
    fn compare_parses() {
        let c = parse_args(args("compare --d 5 --n-bar 4 --r-prime 1")).unwrap();
        assert!(matches!(
            c.command,
            Command::Compare(CompareArgs { d: 5, .. })
        ));
    }

    #[test]
    fn unsupported_figure_is_usage_error() {
        let e = parse_args(args("figure --id 7")).unwrap_err();
        assert_eq!(e.exit_code(), EXIT_USAGE);
        assert!(e.to_string().contains("--id"));
    }

    #[test]
    fn noon_qcrb_value() {
        let c = parse_args(args("qcrb --family noon --d 5 --n 2")).unwrap();
        let (table, dest, _) = execute(&c).unwrap();
        assert_eq!(dest, Destination::Stdout);
        let q = table.column("qcrb").unwrap()[0].unwrap();
        assert!((q - 3.75).abs() < 1e-12);
        assert!(table
            .to_csv()
            .lines()
            .nth(1)
            .unwrap()
            .starts_with("5,3.75,"));
    }

    #[test]
    fn rejects_bad_values() {
        for bad in [
            "qcrb --family noon --d 0 --n 2",
            "qcrb --family noon --d 5 --n -1",
            "qcrb --family ecs --d 5",
            "qcrb --family ecs --d 5 --alpha 1 --r 1",
            "compare --d 5 --n-bar 4 --bogus 1",
            "unbalanced --r-min 2 --r-max 1",
            "figure --id 6 --d 3",
            "sweep-escs --steps 1",
        ] {
            let e = parse_args(args(bad)).unwrap_err();
            assert_eq!(e.exit_code(), EXIT_USAGE, "{bad}");
        }
    }
}
