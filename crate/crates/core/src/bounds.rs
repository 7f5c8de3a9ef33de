//! Hypothesis-testing quantities: `Q_s`, the Chernoff infimum, Bhattacharyya
//! and Helstrom errors, arbitrary two-outcome POVM errors, and the closed-form
//! exponential bounds for the three-photon and Gaussian protocols.

use nalgebra::DMatrix;

use crate::engine::{check_prior, check_s, EngineOptions, EngineRegistry, PreparedPair, DEFAULT_ENGINE};
use crate::error::{Error, Result};
use crate::fock::{trace_of, DensityOperator};
use crate::report::Record;
use crate::spectral::{eigh, HERMITIAN_TOL};
use crate::states::{HypothesisPair, ProtocolParams, RegimeFlags};
use crate::C64;

/// Grid spacing of the convexity pre-scan.
pub const SCAN_STEP: f64 = 0.05;
/// Smallest accepted second difference on the pre-scan grid.
pub const CONVEXITY_TOL: f64 = 1e-9;
pub const DEFAULT_S_TOL: f64 = 1e-6;
const MAX_GOLDEN_ITERATIONS: usize = 200;
const POVM_TOL: f64 = 1e-10;

/// `Tr(rho0^s rho1^(1-s))` through the named engine.
pub fn q_s(
    rho0: &DensityOperator,
    rho1: &DensityOperator,
    s: f64,
    engine: &str,
    opts: &EngineOptions,
) -> Result<f64> {
    check_s(s)?;
    EngineRegistry::with_defaults()
        .get(engine)?
        .prepare(rho0, rho1, opts)?
        .q_s(s)
}

#[derive(Clone, Debug, PartialEq)]
pub struct ChernoffResult {
    pub s_star: f64,
    pub q_star: f64,
    /// `-ln q_star`, clamped at 0.
    pub exponent: f64,
    /// Pre-scan samples `(s, Q_s)` on the [`SCAN_STEP`] grid, endpoints included.
    pub grid: Vec<(f64, f64)>,
    /// Smallest second difference on the grid.
    pub min_second_difference: f64,
    pub convex: bool,
    pub iterations: usize,
}

/// Minimizes `Q_s` over `[0, 1]`: grid pre-scan, convexity check, then
/// golden-section search inside the grid cell pair around the best sample.
pub fn chernoff(pair: &dyn PreparedPair, tol: f64) -> Result<ChernoffResult> {
    if !(tol > 0.0) {
        return Err(Error::param("tol", "must be > 0"));
    }
    let n = (1.0 / SCAN_STEP).round() as usize;
    let mut grid = Vec::with_capacity(n + 1);
    for k in 0..=n {
        let s = k as f64 / n as f64;
        grid.push((s, pair.q_s(s)?));
    }
    let min_second_difference = grid
        .windows(3)
        .map(|w| w[0].1 - 2.0 * w[1].1 + w[2].1)
        .fold(f64::INFINITY, f64::min);
    let convex = min_second_difference >= -CONVEXITY_TOL;

    let best = (0..grid.len())
        .min_by(|&a, &b| grid[a].1.total_cmp(&grid[b].1))
        .expect("nonempty grid");
    let mut lo = grid[best.saturating_sub(1)].0;
    let mut hi = grid[(best + 1).min(n)].0;

    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut x1 = hi - inv_phi * (hi - lo);
    let mut x2 = lo + inv_phi * (hi - lo);
    let mut f1 = pair.q_s(x1)?;
    let mut f2 = pair.q_s(x2)?;
    let mut iterations = 0;
    while hi - lo > tol {
        iterations += 1;
        if iterations > MAX_GOLDEN_ITERATIONS {
            return Err(Error::MinimizerNonConvergence { lo, hi });
        }
        if f1 <= f2 {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - inv_phi * (hi - lo);
            f1 = pair.q_s(x1)?;
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + inv_phi * (hi - lo);
            f2 = pair.q_s(x2)?;
        }
    }
    let mid = 0.5 * (lo + hi);
    let mut candidates = vec![(mid, pair.q_s(mid)?), (x1, f1), (x2, f2)];
    candidates.extend_from_slice(&grid);
    let (s_star, q_star) = candidates
        .into_iter()
        .min_by(|a, b| a.1.total_cmp(&b.1))
        .expect("nonempty candidates");
    Ok(ChernoffResult {
        s_star,
        q_star,
        exponent: (-q_star.ln()).max(0.0),
        grid,
        min_second_difference,
        convex,
        iterations,
    })
}

fn check_shots(m: f64) -> Result<()> {
    if !(m >= 0.0) || !m.is_finite() {
        return Err(Error::param("shots", format!("{m} must be a finite count >= 0")));
    }
    Ok(())
}

/// `P_B(M) = (1/2) Q_{1/2}^M`.
pub fn bhattacharyya_bound(q_half: f64, m: f64) -> Result<f64> {
    check_shots(m)?;
    if m < 1.0 {
        return Err(Error::param("shots", "must be >= 1"));
    }
    Ok(0.5 * q_half.powf(m))
}

/// `(1/2) Q*^M`, the Chernoff upper bound on the M-copy error.
pub fn chernoff_bound(q_star: f64, m: f64) -> Result<f64> {
    check_shots(m)?;
    Ok(0.5 * q_star.powf(m))
}

/// `pi0 Tr[E1 rho0] + pi1 Tr[E0 rho1]` for a two-outcome POVM given densely.
pub fn povm_error(
    rho0: &DMatrix<C64>,
    rho1: &DMatrix<C64>,
    e0: &DMatrix<C64>,
    e1: &DMatrix<C64>,
    pi0: f64,
) -> Result<f64> {
    check_prior(pi0)?;
    let n = rho0.nrows();
    for m in [rho1, e0, e1] {
        if m.nrows() != n || m.ncols() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                actual: m.nrows(),
            });
        }
    }
    let completeness = (e0 + e1 - DMatrix::<C64>::identity(n, n))
        .iter()
        .map(|x| x.norm())
        .fold(0.0, f64::max);
    if completeness > POVM_TOL {
        return Err(Error::PovmIncomplete {
            deviation: completeness,
        });
    }
    for e in [e0, e1] {
        let es = eigh(e, usize::MAX)?;
        let min = es.eigenvalues().first().copied().unwrap_or(0.0);
        if min < -HERMITIAN_TOL {
            return Err(Error::NotPsd {
                min,
                max: es.max_eigenvalue(),
            });
        }
    }
    let t10 = trace_of(&(e1 * rho0));
    let t01 = trace_of(&(e0 * rho1));
    Ok(pi0 * t10 + (1.0 - pi0) * t01)
}

/// Minimum single-shot error `(1/2)(1 - ||pi1 rho1 - pi0 rho0||_1)`.
pub fn helstrom_optimum(pair: &dyn PreparedPair, pi0: f64) -> Result<f64> {
    Ok((0.5 * (1.0 - pair.weighted_trace_norm(pi0)?)).max(0.0))
}

/// A closed-form bound with its exponent and any regime warnings.
#[derive(Clone, Debug, PartialEq)]
pub struct ClosedForm {
    pub value: f64,
    /// Per-shot exponent `r`, so that `value = exp(-M r) / 2`.
    pub rate: f64,
    pub warnings: Vec<String>,
    pub notes: Vec<String>,
}

fn much_less(x: f64, y: f64, k: f64) -> bool {
    x * k <= y
}

/// `(1/2) exp(-M sqrt(eta) / nbar)` for the three-photon protocol.
///
/// Valid for `nbar >> 1`, `eta << 1`, `theta << 1` and `1/nbar^2 << eta`;
/// violations produce warnings only. `theta` enters only the regime check.
pub fn paper_bound_3gamma(eta: f64, nbar: f64, m: f64, dominance: f64) -> Result<ClosedForm> {
    if !(0.0..=1.0).contains(&eta) {
        return Err(Error::param("eta", format!("{eta} is outside [0, 1]")));
    }
    if !(nbar > 0.0) {
        return Err(Error::param("nbar", "must be > 0"));
    }
    check_shots(m)?;
    let rate = eta.sqrt() / nbar;
    let mut warnings = Vec::new();
    if !much_less(1.0, nbar, dominance) {
        warnings.push(format!("nbar = {nbar} is not >> 1"));
    }
    if !much_less(eta, 1.0, dominance) {
        warnings.push(format!("eta = {eta} is not << 1"));
    }
    if eta > 0.0 && !much_less(1.0 / (nbar * nbar), eta, dominance) {
        warnings.push(format!("1/nbar^2 = {} is not << eta = {eta}", 1.0 / (nbar * nbar)));
    }
    Ok(ClosedForm {
        value: 0.5 * (-m * rate).exp(),
        rate,
        warnings,
        notes: vec!["independent of the signal photon number per mode".into()],
    })
}

/// `(1/2) exp(-M kappa N_S / nbar)` for the two-mode Gaussian protocol.
pub fn paper_bound_2gamma(
    kappa: f64,
    signal_photons: f64,
    nbar: f64,
    m: f64,
    dominance: f64,
) -> Result<ClosedForm> {
    if !(kappa >= 0.0) {
        return Err(Error::param("kappa", "must be >= 0"));
    }
    if !(signal_photons >= 0.0) {
        return Err(Error::param("ns", "must be >= 0"));
    }
    if !(nbar > 0.0) {
        return Err(Error::param("nbar", "must be > 0"));
    }
    check_shots(m)?;
    let rate = kappa * signal_photons / nbar;
    let mut warnings = Vec::new();
    if !(kappa > 0.0 && much_less(kappa, 1.0, dominance)) {
        warnings.push(format!("kappa = {kappa} is not in 0 < kappa << 1"));
    }
    if !much_less(signal_photons, 1.0, dominance) {
        warnings.push(format!("N_S = {signal_photons} is not << 1"));
    }
    Ok(ClosedForm {
        value: 0.5 * (-m * rate).exp(),
        rate,
        warnings,
        notes: vec![
            "regime as printed reads N_S << 1 and N_B << 1 while the comparison assumes nbar >> 1; implemented as printed".into(),
        ],
    })
}

/// Exponent gain `1/N_S` of the three-photon bound over the Gaussian one.
pub fn advantage_ratio(signal_photons: f64) -> Result<f64> {
    if !(signal_photons > 0.0 && signal_photons < 1.0) {
        return Err(Error::param(
            "ns",
            format!("{signal_photons} is outside (0, 1); no advantage is claimed there"),
        ));
    }
    Ok(1.0 / signal_photons)
}

/// Ratio of the two closed-form exponents for explicit `kappa` and `N_S`.
pub fn exponent_ratio(eta: f64, kappa: f64, signal_photons: f64, nbar: f64) -> f64 {
    (eta.sqrt() / nbar) / (kappa * signal_photons / nbar)
}

#[derive(Clone, Debug)]
pub struct ReportOptions {
    pub engine: String,
    pub tol: f64,
    pub shots: f64,
    pub pi0: f64,
    pub engine_opts: EngineOptions,
}

impl Default for ReportOptions {
    fn default() -> Self {
        ReportOptions {
            engine: DEFAULT_ENGINE.into(),
            tol: DEFAULT_S_TOL,
            shots: 100.0,
            pi0: 0.5,
            engine_opts: EngineOptions::default(),
        }
    }
}

#[derive(Clone, Debug)]
pub struct BoundReport {
    pub params: ProtocolParams,
    pub engine: String,
    pub dim: usize,
    pub q_curve: Vec<(f64, f64)>,
    pub s_star: f64,
    pub q_star: f64,
    pub exponent: f64,
    pub q_half: f64,
    pub q0: f64,
    pub q1: f64,
    pub convex: bool,
    pub min_second_difference: f64,
    pub helstrom: f64,
    pub bhattacharyya: f64,
    pub chernoff_bound: f64,
    pub p3g: f64,
    pub p2g: f64,
    pub ratio: f64,
    pub shots: f64,
    pub flags: RegimeFlags,
    pub warnings: Vec<String>,
    pub notes: Vec<String>,
}

impl BoundReport {
    pub fn compute(params: &ProtocolParams, opts: &ReportOptions) -> Result<Self> {
        let pair = HypothesisPair::build(params)?;
        let prepared = EngineRegistry::with_defaults()
            .get(&opts.engine)?
            .prepare(&pair.rho0, &pair.rho1, &opts.engine_opts)?;
        Self::from_prepared(params, prepared.as_ref(), opts)
    }

    pub fn from_prepared(
        params: &ProtocolParams,
        prepared: &dyn PreparedPair,
        opts: &ReportOptions,
    ) -> Result<Self> {
        let ch = chernoff(prepared, opts.tol)?;
        let q_half = prepared.q_s(0.5)?;
        let helstrom = helstrom_optimum(prepared, opts.pi0)?;
        let nbar = params.nbar();
        let p3 = paper_bound_3gamma(params.eta, nbar, opts.shots, params.dominance)?;
        let p2 = paper_bound_2gamma(
            params.kappa(),
            params.signal_photons(),
            nbar,
            opts.shots,
            params.dominance,
        )?;
        let flags = params.regime_flags();
        let mut warnings: Vec<String> = flags
            .violations()
            .into_iter()
            .map(|f| format!("regime flag {f} is false"))
            .collect();
        if !ch.convex {
            warnings.push(format!(
                "Q_s pre-scan not convex (min second difference {:e})",
                ch.min_second_difference
            ));
        }
        warnings.extend(p3.warnings.iter().map(|w| format!("p3g: {w}")));
        warnings.extend(p2.warnings.iter().map(|w| format!("p2g: {w}")));
        let mut notes = vec![format!("background = {}", params.background)];
        if params.background == crate::states::BackgroundVariant::Flat {
            notes.push("flat background is uniform over round(nbar) levels per mode".into());
        }
        notes.extend(p3.notes.iter().map(|n| format!("p3g: {n}")));
        notes.extend(p2.notes.iter().map(|n| format!("p2g: {n}")));
        Ok(BoundReport {
            params: params.clone(),
            engine: prepared.engine().to_string(),
            dim: prepared.dim(),
            q0: ch.grid.first().map(|g| g.1).unwrap_or(f64::NAN),
            q1: ch.grid.last().map(|g| g.1).unwrap_or(f64::NAN),
            q_curve: ch.grid.clone(),
            s_star: ch.s_star,
            q_star: ch.q_star,
            exponent: ch.exponent,
            q_half,
            convex: ch.convex,
            min_second_difference: ch.min_second_difference,
            helstrom,
            bhattacharyya: bhattacharyya_bound(q_half, opts.shots.max(1.0))?,
            chernoff_bound: chernoff_bound(ch.q_star, opts.shots)?,
            p3g: p3.value,
            p2g: p2.value,
            ratio: exponent_ratio(params.eta, params.kappa(), params.signal_photons(), nbar),
            shots: opts.shots,
            flags,
            warnings,
            notes,
        })
    }

    pub fn to_record(&self) -> Record {
        let mut r = Record::new();
        self.params.write_record(&mut r);
        r.text("engine", &self.engine);
        r.int("dim", self.dim as i64);
        r.num("shots", self.shots);
        r.list("q_curve_s", self.q_curve.iter().map(|p| p.0).collect());
        r.list("q_curve_q", self.q_curve.iter().map(|p| p.1).collect());
        r.num("s_star", self.s_star);
        r.num("q_star", self.q_star);
        r.num("exponent", self.exponent);
        r.num("q_half", self.q_half);
        r.num("q0", self.q0);
        r.num("q1", self.q1);
        r.boolean("convex", self.convex);
        r.num("min_second_difference", self.min_second_difference);
        r.num("helstrom", self.helstrom);
        r.num("bhattacharyya", self.bhattacharyya);
        r.num("chernoff_bound", self.chernoff_bound);
        r.num("p3g", self.p3g);
        r.num("p2g", self.p2g);
        r.num("ratio", self.ratio);
        write_flags(&mut r, &self.flags);
        r.words("warnings", self.warnings.clone());
        r.words("notes", self.notes.clone());
        r
    }
}

pub(crate) fn write_flags(r: &mut Record, flags: &RegimeFlags) {
    r.words(
        "flags",
        flags
            .as_pairs()
            .iter()
            .map(|(k, v)| format!("{k}={v}"))
            .collect(),
    );
}
