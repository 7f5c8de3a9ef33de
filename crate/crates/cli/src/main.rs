//! `triqi`: build three-photon illumination states, compute discrimination
//! bounds, audit the square-root trace, and run parameter sweeps.
//!
//! Exit codes: 0 success, 1 usage error, 2 numeric failure, 3 regime
//! violation under `--strict`.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use triqi_core::appendix::{self, AuditOptions, Sign, SignChoice};
use triqi_core::bounds::{BoundReport, ReportOptions};
use triqi_core::engine::{EngineOptions, EngineRegistry, DEFAULT_ENGINE};
use triqi_core::experiments::{self, SweepSpec, PRESETS};
use triqi_core::fock::DEFAULT_DENSE_LIMIT;
use triqi_core::report::{write_output, Cell, Format, Record, Table, Value};
use triqi_core::states::{
    evolve_exact_with_tol, mean_photon_number, HypothesisPair, ProtocolParams, DEFAULT_LEAK_TOL,
};
use triqi_core::Error;

#[derive(Parser, Debug)]
#[command(name = "triqi", version, about = "Three-photon quantum illumination: states, bounds, audits, sweeps")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Build the states for one parameter point and print their summary.
    State(StateArgs),
    /// Q_s curve, Chernoff infimum, Bhattacharyya, Helstrom and closed-form bounds.
    Chernoff(PointCommand),
    /// Closed-form, sign-chosen and principal square-root traces with a verdict.
    AppendixAudit(AuditArgs),
    /// Run a sweep described by a config file.
    Sweep(SweepArgs),
    /// Run a built-in preset.
    Reproduce(ReproduceArgs),
    /// List the registered Q_s engines.
    Engines,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum FormatArg {
    Csv,
    Text,
}

impl From<FormatArg> for Format {
    fn from(f: FormatArg) -> Self {
        match f {
            FormatArg::Csv => Format::Csv,
            FormatArg::Text => Format::Text,
        }
    }
}

#[derive(Args, Debug, Clone)]
struct PointArgs {
    /// key=value preset file; flags given on the command line override it.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    theta: Option<f64>,
    #[arg(long)]
    eta: Option<f64>,
    /// Sets both signal-mode occupations.
    #[arg(long)]
    nbar: Option<f64>,
    #[arg(long)]
    nbar2: Option<f64>,
    #[arg(long)]
    nbar3: Option<f64>,
    /// Signal-mode cutoff, or `auto`.
    #[arg(long)]
    cutoff: Option<String>,
    /// Three comma-separated cutoffs (idler, signal, signal).
    #[arg(long)]
    cutoffs: Option<String>,
    /// thermal | flat
    #[arg(long)]
    background: Option<String>,
    /// paper-pure | traced
    #[arg(long)]
    idler: Option<String>,
    #[arg(long)]
    kappa: Option<f64>,
    /// Gaussian-protocol signal photons per mode (defaults to theta^2).
    #[arg(long)]
    ns: Option<f64>,
    /// Largest thermal tail mass a truncation may drop.
    #[arg(long)]
    tail_bound: Option<f64>,
    /// Factor `a >> b` must reach for a regime flag to hold.
    #[arg(long)]
    dominance: Option<f64>,
}

impl PointArgs {
    fn params(&self) -> Result<ProtocolParams, Error> {
        let mut p = match &self.config {
            Some(path) => ProtocolParams::from_config_str(&read(path)?)?,
            None => ProtocolParams::default(),
        };
        let mut set = |k: &str, v: Option<String>| -> Result<(), Error> {
            if let Some(v) = v {
                p.set(k, &v)?;
            }
            Ok(())
        };
        let f = |x: Option<f64>| x.map(|v| v.to_string());
        set("theta", f(self.theta))?;
        set("eta", f(self.eta))?;
        set("nbar", f(self.nbar))?;
        set("nbar2", f(self.nbar2))?;
        set("nbar3", f(self.nbar3))?;
        set("cutoffs", self.cutoffs.clone())?;
        set("cutoff", self.cutoff.clone())?;
        set("background", self.background.clone())?;
        set("idler", self.idler.clone())?;
        set("kappa", f(self.kappa))?;
        set("ns", f(self.ns))?;
        set("tail_bound", f(self.tail_bound))?;
        set("dominance", f(self.dominance))?;
        p.validate()?;
        Ok(p)
    }
}

#[derive(Args, Debug, Clone)]
struct OutputArgs {
    /// Output file (stdout when absent or `-`).
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum)]
    format: Option<FormatArg>,
}

#[derive(Args, Debug, Clone)]
struct NumericArgs {
    /// Tolerance on the minimizing s.
    #[arg(long, default_value_t = triqi_core::bounds::DEFAULT_S_TOL)]
    tol: f64,
    #[arg(long, default_value_t = DEFAULT_DENSE_LIMIT)]
    dense_limit: usize,
    /// Q_s engine (see `triqi engines`).
    #[arg(long, default_value = DEFAULT_ENGINE)]
    engine: String,
    /// Number of independent shots M.
    #[arg(long, default_value_t = 100.0)]
    shots: f64,
    /// Fail with exit code 3 when a regime flag is false.
    #[arg(long)]
    strict: bool,
}

impl NumericArgs {
    fn engine_opts(&self) -> EngineOptions {
        EngineOptions {
            dense_limit: self.dense_limit,
            ..EngineOptions::default()
        }
    }

    fn report(&self) -> ReportOptions {
        ReportOptions {
            engine: self.engine.clone(),
            tol: self.tol,
            shots: self.shots,
            engine_opts: self.engine_opts(),
            ..ReportOptions::default()
        }
    }
}

#[derive(Args, Debug)]
struct PointCommand {
    #[command(flatten)]
    point: PointArgs,
    #[command(flatten)]
    numeric: NumericArgs,
    #[command(flatten)]
    output: OutputArgs,
}

#[derive(Args, Debug)]
struct StateArgs {
    #[command(flatten)]
    point: PointArgs,
    #[command(flatten)]
    numeric: NumericArgs,
    #[command(flatten)]
    output: OutputArgs,
    /// Also evolve |000> exactly along a chain of this many levels.
    #[arg(long)]
    chain_cutoff: Option<usize>,
    #[arg(long, default_value_t = DEFAULT_LEAK_TOL)]
    leak_tol: f64,
}

#[derive(Args, Debug)]
struct AuditArgs {
    #[command(flatten)]
    point: PointArgs,
    #[command(flatten)]
    numeric: NumericArgs,
    #[command(flatten)]
    output: OutputArgs,
    /// Sign of the rho0 root (+ or -).
    #[arg(long, default_value = "+", allow_hyphen_values = true)]
    sign_rho0: String,
    /// Sign of the entangled-block root.
    #[arg(long, default_value = "-", allow_hyphen_values = true)]
    sign_psi: String,
    /// Sign of the background-block roots.
    #[arg(long, default_value = "+", allow_hyphen_values = true)]
    sign_background: String,
}

#[derive(Args, Debug)]
struct SweepArgs {
    /// Sweep config file.
    #[arg(long)]
    config: PathBuf,
    /// Pool width (overrides the config; 0 = automatic).
    #[arg(long)]
    workers: Option<usize>,
    #[arg(long)]
    engine: Option<String>,
    #[arg(long)]
    strict: bool,
    #[command(flatten)]
    output: OutputArgs,
}

#[derive(Args, Debug)]
struct ReproduceArgs {
    /// factor100 | appendix-regime | evolution-order
    preset: String,
    #[arg(long)]
    strict: bool,
    #[command(flatten)]
    output: OutputArgs,
}

enum Failure {
    Usage(String),
    Numeric(String),
    Regime(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        if e.is_numeric() {
            Failure::Numeric(e.to_string())
        } else {
            Failure::Usage(e.to_string())
        }
    }
}

fn read(path: &PathBuf) -> Result<String, Error> {
    std::fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.clone(),
        source,
    })
}

fn check_strict(strict: bool, params: &ProtocolParams) -> Result<(), Failure> {
    let v = params.regime_flags().violations();
    if strict && !v.is_empty() {
        return Err(Failure::Regime(format!("regime violated: {}", v.join(", "))));
    }
    Ok(())
}

/// One-row table of the scalar fields of a record; lists are joined with `;`.
fn record_table(r: &Record) -> Table {
    let mut t = Table::new(r.entries().iter().map(|(k, _)| k.clone()).collect());
    let row = r
        .entries()
        .iter()
        .map(|(_, v)| match v {
            Value::Num(x) => Cell::Num(*x),
            Value::Int(i) => Cell::Int(*i),
            Value::Bool(b) => Cell::Bool(*b),
            Value::Text(s) => Cell::Text(s.clone()),
            Value::List(xs) => Cell::Text(
                xs.iter()
                    .map(|&x| triqi_core::report::format_f64(x))
                    .collect::<Vec<_>>()
                    .join(";"),
            ),
            Value::Words(ws) => Cell::Text(ws.join(";")),
        })
        .collect();
    t.push_row(row).expect("row matches header");
    t
}

fn emit_record(r: &Record, out: &OutputArgs) -> Result<(), Failure> {
    let text = match out.format.map(Format::from).unwrap_or(Format::Text) {
        Format::Text => r.render(),
        Format::Csv => record_table(r).to_csv()?,
    };
    write_output(&text, out.out.as_deref())?;
    Ok(())
}

fn emit_table(t: &Table, out: &OutputArgs, default: Format) -> Result<(), Failure> {
    experiments::emit(t, out.format.map(Format::from).unwrap_or(default), out.out.as_deref())?;
    Ok(())
}

fn table_flags_violated(t: &Table) -> bool {
    experiments::FLAG_COLUMNS
        .iter()
        .filter_map(|c| t.column(c))
        .any(|i| t.rows.iter().any(|r| r[i] == Cell::Bool(false)))
}

fn run_state(a: &StateArgs) -> Result<(), Failure> {
    let params = a.point.params()?;
    check_strict(a.numeric.strict, &params)?;
    let pair = HypothesisPair::build(&params)?;
    let mut r = Record::new();
    params.write_record(&mut r);
    r.int("total_dim", pair.rho0.dim() as i64);
    r.text("rho0_structure", pair.rho0.kind());
    r.text("rho1_structure", pair.rho1.kind());
    for (name, rho) in [("rho0", &pair.rho0), ("rho1", &pair.rho1)] {
        let inv = rho.check_invariants(a.numeric.dense_limit)?;
        r.boolean(&format!("{name}_hermitian"), inv.is_hermitian());
        r.boolean(&format!("{name}_psd"), inv.is_psd());
        r.boolean(&format!("{name}_unit_trace"), inv.is_unit_trace());
    }
    r.list("background_tail_mass", pair.background.tail_masses.to_vec());
    let support = pair.psi.support(0.0);
    r.words(
        "psi_support",
        support
            .iter()
            .map(|(occ, a)| format!("{occ:?}: {:.16e} {:+.16e}i", a.re, a.im))
            .collect(),
    );
    for m in 0..3 {
        r.num(&format!("psi_mean_photons_mode{m}"), mean_photon_number(&pair.psi, m)?);
    }
    if let Some(c) = a.chain_cutoff {
        let ev = evolve_exact_with_tol(params.theta, c, a.leak_tol)?;
        r.int("chain_cutoff", c as i64);
        r.list("chain_re", ev.chain.iter().map(|z| z.re).collect());
        r.list("chain_im", ev.chain.iter().map(|z| z.im).collect());
        r.num("chain_leakage", ev.leakage);
        r.num("exact_mean_photons", mean_photon_number(&ev.ket, 0)?);
    }
    emit_record(&r, &a.output)
}

fn run_chernoff(a: &PointCommand) -> Result<(), Failure> {
    let params = a.point.params()?;
    check_strict(a.numeric.strict, &params)?;
    let report = BoundReport::compute(&params, &a.numeric.report())?;
    emit_record(&report.to_record(), &a.output)
}

fn run_audit(a: &AuditArgs) -> Result<(), Failure> {
    let params = a.point.params()?;
    check_strict(a.numeric.strict, &params)?;
    let signs = SignChoice {
        rho0: a.sign_rho0.parse::<Sign>()?,
        psi: a.sign_psi.parse::<Sign>()?,
        background: a.sign_background.parse::<Sign>()?,
    };
    let opts = AuditOptions {
        engine: a.numeric.engine.clone(),
        engine_opts: a.numeric.engine_opts(),
        signs,
        ..AuditOptions::default()
    };
    let audit = appendix::audit(&params, &opts)?;
    emit_record(&audit.to_record(), &a.output)
}

fn run_sweep(a: &SweepArgs) -> Result<(), Failure> {
    let mut spec = SweepSpec::from_config_str(&read(&a.config)?)?;
    if let Some(w) = a.workers {
        spec.workers = w;
    }
    if let Some(e) = &a.engine {
        EngineRegistry::with_defaults().get(e)?;
        spec.report.engine = e.clone();
        spec.audit.engine = e.clone();
    }
    let table = experiments::run_sweep(&spec)?;
    if a.strict && table_flags_violated(&table) {
        return Err(Failure::Regime("regime violated at one or more sweep points".into()));
    }
    emit_table(&table, &a.output, spec.format)
}

fn run_reproduce(a: &ReproduceArgs) -> Result<(), Failure> {
    if !PRESETS.contains(&a.preset.as_str()) {
        return Err(Failure::Usage(format!(
            "unknown preset `{}` ({})",
            a.preset,
            PRESETS.join(" | ")
        )));
    }
    let table = experiments::run_preset(&a.preset)?;
    if a.strict && table_flags_violated(&table) {
        return Err(Failure::Regime("regime violated at one or more preset points".into()));
    }
    emit_table(&table, &a.output, Format::Csv)
}

fn run_engines() -> Result<(), Failure> {
    let reg = EngineRegistry::with_defaults();
    let mut out = String::new();
    for name in reg.names() {
        let e = reg.get(name)?;
        out.push_str(&format!("{name}\t{}\n", e.description()));
    }
    write_output(&out, None)?;
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let result = match &cli.command {
        Command::State(a) => run_state(a),
        Command::Chernoff(a) => run_chernoff(a),
        Command::AppendixAudit(a) => run_audit(a),
        Command::Sweep(a) => run_sweep(a),
        Command::Reproduce(a) => run_reproduce(a),
        Command::Engines => run_engines(),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(1)
        }
        Err(Failure::Numeric(m)) => {
            eprintln!("numeric failure: {m}");
            ExitCode::from(2)
        }
        Err(Failure::Regime(m)) => {
            eprintln!("{m}");
            ExitCode::from(3)
        }
    }
}
