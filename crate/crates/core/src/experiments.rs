//! Parameter sweeps and built-in reproduction presets.
//!
//! A sweep config is plain `key=value` text:
//!
//! ```text
//! # fixed parameters
//! theta = 0.01
//! background = flat
//! axis.eta = 0.001, 0.01
//! axis.nbar = 20, 50
//! outputs = exponent, q_half, t_papersign
//! format = csv
//! workers = 4
//! ```
//!
//! Axis names are parameter keys (see [`ProtocolParams::set`]) or `shots`.
//! Rows enumerate the axes lexicographically, first axis slowest.

use std::collections::BTreeSet;

use rayon::prelude::*;

use crate::appendix::{self, AuditOptions};
use crate::bounds::{self, BoundReport, ReportOptions};
use crate::error::{Error, Result};
use crate::report::{Cell, Format, Table};
use crate::states::{
    evolve_exact_with_tol, mean_photon_number, parse_f64, parse_usize, three_photon_state,
    ProtocolParams,
};

pub const DEFAULT_MAX_POINTS: usize = 100_000;

/// Environment variable naming the golden-file directory.
pub const GOLDEN_DIR_ENV: &str = "TRIQI_GOLDEN_DIR";

/// Golden-file directory: the environment override if set, else `default`.
pub fn golden_dir(default: &std::path::Path) -> std::path::PathBuf {
    std::env::var_os(GOLDEN_DIR_ENV)
        .map(std::path::PathBuf::from)
        .unwrap_or_else(|| default.to_path_buf())
}

/// Outputs that need the full hypothesis pair and a Chernoff minimization.
pub const BOUND_OUTPUTS: &[&str] = &[
    "s_star",
    "q_star",
    "exponent",
    "q_half",
    "q0",
    "q1",
    "helstrom",
    "bhattacharyya",
    "chernoff_bound",
    "dim",
    "engine",
];
/// Outputs computed from closed forms or cheap background statistics.
pub const CHEAP_OUTPUTS: &[&str] = &[
    "p3g",
    "p2g",
    "ratio",
    "advantage",
    "t_paper",
    "t_papersign",
    "papersign_deviation",
    "tolerance",
    "verdict",
];
/// Outputs needing the principal square-root trace.
pub const AUDIT_OUTPUTS: &[&str] = &["t_principal", "gap_order", "gap_coeff"];

pub const FLAG_COLUMNS: [&str; 4] = ["high_noise", "small_theta", "small_eta", "eta_vs_invn2"];

pub fn known_output(name: &str) -> bool {
    BOUND_OUTPUTS.contains(&name) || CHEAP_OUTPUTS.contains(&name) || AUDIT_OUTPUTS.contains(&name)
}

#[derive(Clone, Debug)]
pub struct SweepSpec {
    pub base: ProtocolParams,
    pub axes: Vec<(String, Vec<String>)>,
    pub outputs: Vec<String>,
    pub format: Format,
    /// Pool width; 0 lets the pool choose.
    pub workers: usize,
    pub report: ReportOptions,
    pub audit: AuditOptions,
    pub max_points: usize,
}

impl Default for SweepSpec {
    fn default() -> Self {
        SweepSpec {
            base: ProtocolParams::default(),
            axes: Vec::new(),
            outputs: vec!["exponent".into()],
            format: Format::Csv,
            workers: 0,
            report: ReportOptions::default(),
            audit: AuditOptions::default(),
            max_points: DEFAULT_MAX_POINTS,
        }
    }
}

/// Point-level setting shared by configs and axes: protocol keys plus `shots`.
fn apply_setting(p: &mut ProtocolParams, report: &mut ReportOptions, key: &str, value: &str) -> Result<bool> {
    if key == "shots" {
        report.shots = parse_f64(key, value)?;
        return Ok(true);
    }
    p.set(key, value)
}

fn split_list(v: &str) -> Vec<String> {
    v.split(',')
        .map(|x| x.trim().to_string())
        .filter(|x| !x.is_empty())
        .collect()
}

impl SweepSpec {
    pub fn from_config_str(text: &str) -> Result<Self> {
        let mut spec = SweepSpec::default();
        let mut outputs_set = false;
        for (n, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let cfg = |reason: String| Error::Config { line: n + 1, reason };
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| cfg(format!("expected key=value, got `{line}`")))?;
            let (k, v) = (k.trim(), v.trim());
            if let Some(axis) = k.strip_prefix("axis.") {
                let values = split_list(v);
                if values.is_empty() {
                    return Err(cfg(format!("axis `{axis}` has no values")));
                }
                spec.axes.push((axis.to_string(), values));
                continue;
            }
            let handled = match k {
                "outputs" => {
                    spec.outputs = split_list(v);
                    outputs_set = true;
                    true
                }
                "format" => {
                    spec.format = v.parse().map_err(|e: Error| cfg(e.to_string()))?;
                    true
                }
                "workers" => {
                    spec.workers = parse_usize(k, v).map_err(|e| cfg(e.to_string()))?;
                    true
                }
                "max_points" => {
                    spec.max_points = parse_usize(k, v).map_err(|e| cfg(e.to_string()))?;
                    true
                }
                "engine" => {
                    spec.report.engine = v.to_string();
                    spec.audit.engine = v.to_string();
                    true
                }
                "tol" => {
                    spec.report.tol = parse_f64(k, v).map_err(|e| cfg(e.to_string()))?;
                    true
                }
                "dense_limit" => {
                    let l = parse_usize(k, v).map_err(|e| cfg(e.to_string()))?;
                    spec.report.engine_opts.dense_limit = l;
                    spec.audit.engine_opts.dense_limit = l;
                    true
                }
                _ => apply_setting(&mut spec.base, &mut spec.report, k, v)
                    .map_err(|e| cfg(e.to_string()))?,
            };
            if !handled {
                return Err(cfg(format!("unknown key `{k}`")));
            }
        }
        if !outputs_set && spec.outputs.is_empty() {
            spec.outputs = vec!["exponent".into()];
        }
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        let mut seen = BTreeSet::new();
        for (name, values) in &self.axes {
            if !seen.insert(name.as_str()) {
                return Err(Error::param("axes", format!("axis `{name}` repeated")));
            }
            let mut p = self.base.clone();
            let mut r = self.report.clone();
            if !apply_setting(&mut p, &mut r, name, &values[0])? {
                return Err(Error::param("axes", format!("`{name}` is not a parameter")));
            }
        }
        for o in &self.outputs {
            if !known_output(o) {
                return Err(Error::param("outputs", format!("unknown output `{o}`")));
            }
        }
        let n = self.point_count();
        if n > self.max_points {
            return Err(Error::param(
                "axes",
                format!("{n} points exceed the cap of {}", self.max_points),
            ));
        }
        Ok(())
    }

    pub fn point_count(&self) -> usize {
        self.axes
            .iter()
            .map(|(_, v)| v.len())
            .try_fold(1usize, |acc, l| acc.checked_mul(l))
            .unwrap_or(usize::MAX)
    }

    pub fn columns(&self) -> Vec<String> {
        let mut c: Vec<String> = self.axes.iter().map(|(n, _)| n.clone()).collect();
        c.extend(self.outputs.iter().cloned());
        c.extend(FLAG_COLUMNS.iter().map(|s| s.to_string()));
        c.push("error".into());
        c
    }

    /// Axis value indices for point `i`, first axis slowest.
    fn point_indices(&self, mut i: usize) -> Vec<usize> {
        let mut idx = vec![0; self.axes.len()];
        for (a, (_, vals)) in self.axes.iter().enumerate().rev() {
            idx[a] = i % vals.len();
            i /= vals.len();
        }
        idx
    }
}

fn axis_cell(v: &str) -> Cell {
    match v.parse::<f64>() {
        Ok(x) => Cell::Num(x),
        Err(_) => Cell::Text(v.to_string()),
    }
}

/// Values of the requested outputs at one parameter point.
pub fn evaluate_point(
    params: &ProtocolParams,
    outputs: &[String],
    report: &ReportOptions,
    audit: &AuditOptions,
) -> Result<Vec<Cell>> {
    params.validate()?;
    let wants = |set: &[&str]| outputs.iter().any(|o| set.contains(&o.as_str()));
    let bound = if wants(BOUND_OUTPUTS) {
        Some(BoundReport::compute(params, report)?)
    } else {
        None
    };
    let nbar = params.nbar();
    let needs_paper = outputs
        .iter()
        .any(|o| matches!(o.as_str(), "t_papersign" | "papersign_deviation" | "verdict"));
    let papersign = if needs_paper {
        Some(appendix::paper_sign_trace(params, audit.signs)?.total)
    } else {
        None
    };
    let needs_gap = outputs.iter().any(|o| o == "gap_order" || o == "gap_coeff");
    let full_audit = if needs_gap {
        Some(appendix::audit(params, audit)?)
    } else {
        None
    };
    let t_paper = appendix::appendix_trace_formula(params.eta, nbar)?;
    let mut cells = Vec::with_capacity(outputs.len());
    for o in outputs {
        let b = || bound.as_ref().expect("bound computed");
        let cell = match o.as_str() {
            "s_star" => Cell::Num(b().s_star),
            "q_star" => Cell::Num(b().q_star),
            "exponent" => Cell::Num(b().exponent),
            "q_half" => Cell::Num(b().q_half),
            "q0" => Cell::Num(b().q0),
            "q1" => Cell::Num(b().q1),
            "helstrom" => Cell::Num(b().helstrom),
            "bhattacharyya" => Cell::Num(b().bhattacharyya),
            "chernoff_bound" => Cell::Num(b().chernoff_bound),
            "dim" => Cell::Int(b().dim as i64),
            "engine" => Cell::Text(b().engine.clone()),
            "p3g" => Cell::Num(
                bounds::paper_bound_3gamma(params.eta, nbar, report.shots, params.dominance)?.value,
            ),
            "p2g" => Cell::Num(
                bounds::paper_bound_2gamma(
                    params.kappa(),
                    params.signal_photons(),
                    nbar,
                    report.shots,
                    params.dominance,
                )?
                .value,
            ),
            "ratio" => Cell::Num(bounds::exponent_ratio(
                params.eta,
                params.kappa(),
                params.signal_photons(),
                nbar,
            )),
            "advantage" => Cell::Num(bounds::advantage_ratio(params.signal_photons())?),
            "t_paper" => Cell::Num(t_paper),
            "t_papersign" => Cell::Num(papersign.expect("computed")),
            "papersign_deviation" => Cell::Num((papersign.expect("computed") - t_paper).abs()),
            "tolerance" => Cell::Num(appendix::ErrorTerms::at(params).tolerance()),
            "verdict" => Cell::Text(
                appendix::verdict(params, t_paper, papersign.expect("computed"))
                    .as_str()
                    .to_string(),
            ),
            "t_principal" => match &bound {
                Some(b) => Cell::Num(b.q_half),
                None => Cell::Num(appendix::principal_trace(params, &audit.engine, &audit.engine_opts)?),
            },
            "gap_order" | "gap_coeff" => {
                match full_audit.as_ref().and_then(|a| a.gap_fit.as_ref()) {
                    Some(g) if o == "gap_order" => Cell::Num(g.order),
                    Some(g) => Cell::Num(g.coeff),
                    None => Cell::Empty,
                }
            }
            other => return Err(Error::param("outputs", format!("unknown output `{other}`"))),
        };
        cells.push(cell);
    }
    Ok(cells)
}

/// Runs every grid point in a pool of `spec.workers` threads. Failures land in
/// the `error` column; the sweep itself only fails on an invalid spec.
pub fn run_sweep(spec: &SweepSpec) -> Result<Table> {
    spec.validate()?;
    let n = spec.point_count();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(spec.workers)
        .build()
        .map_err(|e| Error::param("workers", e.to_string()))?;
    let rows: Vec<Vec<Cell>> = pool.install(|| {
        (0..n)
            .into_par_iter()
            .map(|i| sweep_row(spec, i))
            .collect()
    });
    let mut table = Table::new(spec.columns());
    for row in rows {
        table.push_row(row)?;
    }
    Ok(table)
}

fn sweep_row(spec: &SweepSpec, i: usize) -> Vec<Cell> {
    let idx = spec.point_indices(i);
    let mut params = spec.base.clone();
    let mut report = spec.report.clone();
    let mut row: Vec<Cell> = Vec::new();
    let mut failure: Option<String> = None;
    for ((name, vals), &k) in spec.axes.iter().zip(&idx) {
        row.push(axis_cell(&vals[k]));
        if failure.is_none() {
            if let Err(e) = apply_setting(&mut params, &mut report, name, &vals[k]) {
                failure = Some(e.to_string());
            }
        }
    }
    let outputs = match failure {
        None => evaluate_point(&params, &spec.outputs, &report, &spec.audit),
        Some(f) => Err(Error::Parse(f)),
    };
    let flags = params.regime_flags();
    match outputs {
        Ok(cells) => {
            row.extend(cells);
            row.extend(flags.as_pairs().iter().map(|(_, v)| Cell::Bool(*v)));
            row.push(Cell::Empty);
        }
        Err(e) => {
            row.extend(spec.outputs.iter().map(|_| Cell::Empty));
            row.extend(flags.as_pairs().iter().map(|(_, v)| Cell::Bool(*v)));
            row.push(Cell::Text(e.to_string()));
        }
    }
    row
}

/// Renders a table in the requested format and writes it.
pub fn emit(table: &Table, format: Format, destination: Option<&std::path::Path>) -> Result<()> {
    crate::report::write_output(&table.render(format)?, destination)
}

// ---------------------------------------------------------------------------
// Presets

pub const PRESETS: &[&str] = &["factor100", "appendix-regime", "evolution-order"];

/// Closed-form exponent comparison at `eta = 0.01`, `nbar = 100`, `kappa = sqrt(eta)`.
pub fn factor100() -> Result<Table> {
    let eta: f64 = 0.01;
    let nbar = 100.0;
    let shots = 1e4;
    let kappa = eta.sqrt();
    let mut t = Table::new(
        [
            "ns",
            "advantage",
            "exponent_3g",
            "exponent_2g",
            "exponent_ratio",
            "p3g",
            "p2g",
        ]
        .iter()
        .map(|s| s.to_string())
        .collect(),
    );
    for ns in [0.01, 0.1, 0.5] {
        let p3 = bounds::paper_bound_3gamma(eta, nbar, shots, 4.0)?;
        let p2 = bounds::paper_bound_2gamma(kappa, ns, nbar, shots, 4.0)?;
        t.push_row(vec![
            Cell::Num(ns),
            Cell::Num(bounds::advantage_ratio(ns)?),
            Cell::Num(p3.rate),
            Cell::Num(p2.rate),
            Cell::Num(p3.rate / p2.rate),
            Cell::Num(p3.value),
            Cell::Num(p2.value),
        ])?;
    }
    Ok(t)
}

/// Sweep of the sign-chosen and principal traces over the validity regime.
pub fn appendix_regime_spec() -> SweepSpec {
    SweepSpec {
        axes: vec![
            ("theta".into(), vec!["0.01".into(), "0.05".into()]),
            ("nbar".into(), vec!["20".into(), "50".into()]),
            ("eta".into(), vec!["0.01".into(), "0.04".into()]),
        ],
        outputs: [
            "t_paper",
            "t_papersign",
            "t_principal",
            "papersign_deviation",
            "tolerance",
            "verdict",
        ]
        .iter()
        .map(|s| s.to_string())
        .collect(),
        ..SweepSpec::default()
    }
}

/// The deterministic reference sweep used for golden files.
pub fn golden_sweep_spec() -> SweepSpec {
    SweepSpec {
        base: ProtocolParams {
            theta: 0.01,
            ..ProtocolParams::default()
        },
        axes: vec![
            ("background".into(), vec!["flat".into(), "thermal".into()]),
            ("nbar".into(), vec!["20".into(), "50".into()]),
            ("eta".into(), vec!["0.001".into(), "0.01".into()]),
        ],
        outputs: [
            "s_star",
            "q_star",
            "exponent",
            "q_half",
            "helstrom",
            "p3g",
            "p2g",
            "ratio",
            "t_paper",
            "t_papersign",
            "t_principal",
            "verdict",
        ]
        .iter()
        .map(|s| s.to_string())
        .collect(),
        ..SweepSpec::default()
    }
}

/// Distance between the exact chain evolution and the closed-form state.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EvolutionError {
    pub theta: f64,
    /// Full Euclidean distance.
    pub full: f64,
    /// Distance restricted to `span{|000>, |111>}`.
    pub in_span: f64,
    pub mean_photons: f64,
    pub leakage: f64,
}

pub const EVOLUTION_CHAIN_CUTOFF: usize = 12;

pub fn evolution_error(theta: f64, chain_cutoff: usize, leak_tol: f64) -> Result<EvolutionError> {
    let ev = evolve_exact_with_tol(theta, chain_cutoff, leak_tol)?;
    let approx = three_photon_state(theta, ev.ket.space())?;
    let full = ev.ket.distance(&approx)?;
    let i111 = ev.ket.space().index_of(&[1, 1, 1])?;
    let a = ev.ket.amplitudes();
    let b = approx.amplitudes();
    let in_span = ((a[0] - b[0]).norm_sqr() + (a[i111] - b[i111]).norm_sqr()).sqrt();
    Ok(EvolutionError {
        theta,
        full,
        in_span,
        mean_photons: mean_photon_number(&ev.ket, 0)?,
        leakage: ev.leakage,
    })
}

/// Halving-ratio table for the exact-vs-closed-form distance.
pub fn evolution_order() -> Result<Table> {
    let thetas = [0.2, 0.1, 0.05, 0.025];
    let errs: Vec<EvolutionError> = thetas
        .iter()
        .map(|&t| evolution_error(t, EVOLUTION_CHAIN_CUTOFF, crate::states::DEFAULT_LEAK_TOL))
        .collect::<Result<_>>()?;
    let mut t = Table::new(
        [
            "theta",
            "err_full",
            "ratio_full",
            "err_full_over_theta3",
            "err_in_span",
            "ratio_in_span",
            "mean_photons",
            "mean_photon_dev",
            "leakage",
        ]
        .iter()
        .map(|s| s.to_string())
        .collect(),
    );
    for (i, e) in errs.iter().enumerate() {
        let ratio = |f: fn(&EvolutionError) -> f64| {
            if i == 0 {
                Cell::Empty
            } else {
                Cell::Num(f(e) / f(&errs[i - 1]))
            }
        };
        t.push_row(vec![
            Cell::Num(e.theta),
            Cell::Num(e.full),
            ratio(|x| x.full),
            Cell::Num(e.full / e.theta.powi(3)),
            Cell::Num(e.in_span),
            ratio(|x| x.in_span),
            Cell::Num(e.mean_photons),
            Cell::Num((e.mean_photons - e.theta * e.theta).abs()),
            Cell::Num(e.leakage),
        ])?;
    }
    Ok(t)
}

pub fn run_preset(name: &str) -> Result<Table> {
    match name {
        "factor100" => factor100(),
        "appendix-regime" => run_sweep(&appendix_regime_spec()),
        "evolution-order" => evolution_order(),
        other => Err(Error::param(
            "preset",
            format!("unknown preset `{other}` ({})", PRESETS.join(" | ")),
        )),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn config_parsing() {
        let spec = SweepSpec::from_config_str(
            "theta = 0.02\naxis.eta = 0.001, 0.01\naxis.background = flat,thermal\noutputs = ratio, p3g\nformat = text\nworkers = 2\n",
        )
        .unwrap();
        assert_eq!(spec.base.theta, 0.02);
        assert_eq!(spec.point_count(), 4);
        assert_eq!(spec.format, Format::Text);
        assert_eq!(
            spec.columns(),
            vec!["eta", "background", "ratio", "p3g", "high_noise", "small_theta", "small_eta", "eta_vs_invn2", "error"]
        );
        assert!(SweepSpec::from_config_str("axis.bogus = 1").is_err());
        assert!(SweepSpec::from_config_str("outputs = nope").is_err());
        assert!(SweepSpec::from_config_str("nonsense").is_err());
    }

    #[test]
    fn point_cap() {
        let mut s = SweepSpec::default();
        s.axes.push(("eta".into(), vec!["0.1".into(); 1000]));
        s.axes.push(("theta".into(), vec!["0.1".into(); 1000]));
        assert!(s.validate().is_err());
    }

    #[test]
    fn lexicographic_rows() {
        let spec = SweepSpec {
            axes: vec![
                ("eta".into(), vec!["0.1".into(), "0.2".into()]),
                ("ns".into(), vec!["0.01".into(), "0.1".into(), "0.5".into()]),
            ],
            outputs: vec!["advantage".into()],
            workers: 3,
            ..SweepSpec::default()
        };
        let t = run_sweep(&spec).unwrap();
        let got: Vec<(f64, f64)> = t
            .rows
            .iter()
            .map(|r| match (&r[0], &r[1]) {
                (Cell::Num(a), Cell::Num(b)) => (*a, *b),
                _ => panic!(),
            })
            .collect();
        assert_eq!(
            got,
            vec![(0.1, 0.01), (0.1, 0.1), (0.1, 0.5), (0.2, 0.01), (0.2, 0.1), (0.2, 0.5)]
        );
    }

    #[test]
    fn failures_go_to_error_column() {
        let spec = SweepSpec {
            axes: vec![("ns".into(), vec!["0.5".into(), "2".into()])],
            outputs: vec!["advantage".into()],
            ..SweepSpec::default()
        };
        let t = run_sweep(&spec).unwrap();
        let e = t.column("error").unwrap();
        assert_eq!(t.rows[0][e], Cell::Empty);
        assert!(matches!(&t.rows[1][e], Cell::Text(s) if s.contains("ns")));
        assert_eq!(t.rows[1][1], Cell::Empty);
    }

    #[test]
    fn evolution_error_orders() {
        // full distance is dominated by the |222> amplitude -sqrt(2) theta^2;
        // inside span{|000>,|111>} the leading miss is (4/3) theta^3
        for theta in [0.1, 0.05, 0.025] {
            let e = evolution_error(theta, EVOLUTION_CHAIN_CUTOFF, 1e-6).unwrap();
            let full = e.full / (2f64.sqrt() * theta * theta);
            let span = e.in_span / (4.0 / 3.0 * theta.powi(3));
            assert!((full - 1.0).abs() < 0.2, "{theta}: {full}");
            assert!((span - 1.0).abs() < 0.2, "{theta}: {span}");
        }
    }

    #[test]
    fn factor100_table() {
        let t = factor100().unwrap();
        match (&t.rows[0][1], &t.rows[0][4]) {
            (Cell::Num(a), Cell::Num(r)) => {
                assert!((a - 100.0).abs() <= 1e-12);
                assert!((r - 100.0).abs() <= 1e-12);
            }
            _ => panic!(),
        }
        assert!(run_preset("nope").is_err());
    }
}
