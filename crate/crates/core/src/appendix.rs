//! The square-root trace `Tr(rho0^{1/2} rho1^{1/2})` three ways: the
//! closed-form `1 - sqrt(eta)/nbar`, the sign-chosen root of the analytic
//! derivation evaluated term by term, and the principal (functional-calculus)
//! roots. The audit reports how far apart they are; it does not rule on which
//! one is right.

use nalgebra::{DMatrix, DVector};

use crate::bounds::write_flags;
use crate::engine::{EngineOptions, EngineRegistry};
use crate::error::{Error, Result};
use crate::report::Record;
use crate::states::{background_state, HypothesisPair, IdlerVariant, ProtocolParams, RegimeFlags};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Sign {
    Plus,
    Minus,
}

impl Sign {
    pub fn value(self) -> f64 {
        match self {
            Sign::Plus => 1.0,
            Sign::Minus => -1.0,
        }
    }
}

impl std::str::FromStr for Sign {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "+" | "plus" => Ok(Sign::Plus),
            "-" | "minus" => Ok(Sign::Minus),
            other => Err(Error::Parse(format!("unknown sign `{other}` (+|-)"))),
        }
    }
}

/// Signs picked for the square roots of the individual blocks.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct SignChoice {
    /// Root of `rho0` (the left factor).
    pub rho0: Sign,
    /// Root of the `eta |Psi><Psi|` block of `rho1`.
    pub psi: Sign,
    /// Roots of the background blocks of `rho1` orthogonal to `|Psi>`.
    pub background: Sign,
}

impl SignChoice {
    /// `(+, -, +)`: positive root for `rho0`, the minus sign on the entangled
    /// block, and the background blocks signed like their `rho0` counterparts.
    pub const PAPER: SignChoice = SignChoice {
        rho0: Sign::Plus,
        psi: Sign::Minus,
        background: Sign::Plus,
    };
}

impl Default for SignChoice {
    fn default() -> Self {
        Self::PAPER
    }
}

/// `1 - sqrt(eta) / nbar`.
pub fn appendix_trace_formula(eta: f64, nbar: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&eta) {
        return Err(Error::param("eta", format!("{eta} is outside [0, 1]")));
    }
    if !(nbar > 0.0) {
        return Err(Error::param("nbar", "must be > 0"));
    }
    Ok(1.0 - eta.sqrt() / nbar)
}

/// Term-by-term value of the sign-chosen trace.
#[derive(Clone, Debug, PartialEq)]
pub struct PaperSignTrace {
    pub total: f64,
    /// `Tr(rho0)`: the product of the two `rho0^{1/2}` factors.
    pub rho0_term: f64,
    /// `Tr(Pi_low rho0)`: mass on signal levels `{0,1} x {0,1}`, the block
    /// replaced by the entangled term and dropped as `O(1/nbar^2)`.
    pub low_block: f64,
    /// `sqrt(eta) <Psi| rho0^{1/2} |Psi>`.
    pub psi_cross: f64,
    /// The analytic estimate of `psi_cross`, `sqrt(eta)/nbar`.
    pub psi_cross_estimate: f64,
    pub warnings: Vec<String>,
}

/// Evaluates `Tr[s0 rho0^{1/2} R1]` with the sign-chosen root
/// `R1 = sb (rho0^{1/2} - Pi_low rho0^{1/2}) + sp sqrt(eta) |Psi><Psi|`.
///
/// At `eta = 0` the root collapses to `s0 rho0^{1/2}` and the value is 1.
pub fn paper_sign_trace(params: &ProtocolParams, signs: SignChoice) -> Result<PaperSignTrace> {
    params.validate()?;
    let bg = background_state(params)?;
    let mut warnings: Vec<String> = params
        .regime_flags()
        .violations()
        .into_iter()
        .map(|f| format!("regime flag {f} is false"))
        .collect();
    let nbar = params.nbar();
    let eta = params.eta;
    let estimate = eta.sqrt() / nbar;
    if eta == 0.0 {
        warnings.push("eta = 0: the rho1 root collapses to the rho0 root".into());
        return Ok(PaperSignTrace {
            total: 1.0,
            rho0_term: 1.0,
            low_block: 0.0,
            psi_cross: 0.0,
            psi_cross_estimate: 0.0,
            warnings,
        });
    }
    let [m2, m3] = &bg.marginals;
    let low = |m: &Vec<f64>| m.iter().take(2).sum::<f64>();
    let low_block = low(m2) * low(m3);
    let (s, c) = params.theta.sin_cos();
    // <Psi| r (x) sqrt(B) |Psi> picks the |0,00> and |1,11> diagonal entries.
    let (r00, r11) = match params.idler {
        IdlerVariant::PaperPure => (c * c, s * s),
        IdlerVariant::Traced => (c, s),
    };
    let b00 = (m2[0] * m3[0]).sqrt();
    let b11 = (m2[1] * m3[1]).sqrt();
    let overlap = c * c * r00 * b00 + s * s * r11 * b11;
    let psi_cross = eta.sqrt() * overlap;
    let rho0_term = m2.iter().sum::<f64>() * m3.iter().sum::<f64>();
    let sb = signs.background.value();
    let total = signs.rho0.value() * (sb * (rho0_term - low_block) + signs.psi.value() * psi_cross);
    Ok(PaperSignTrace {
        total,
        rho0_term,
        low_block,
        psi_cross,
        psi_cross_estimate: estimate,
        warnings,
    })
}

/// `Tr(rho0^{1/2} rho1^{1/2})` with principal roots, through the named engine.
pub fn principal_trace(params: &ProtocolParams, engine: &str, opts: &EngineOptions) -> Result<f64> {
    let pair = HypothesisPair::build(params)?;
    EngineRegistry::with_defaults()
        .get(engine)?
        .prepare(&pair.rho0, &pair.rho1, opts)?
        .q_s(0.5)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Verdict {
    MatchesPaperOrder,
    Deviates,
    RegimeViolated,
}

impl Verdict {
    pub fn as_str(self) -> &'static str {
        match self {
            Verdict::MatchesPaperOrder => "matches_paper_order",
            Verdict::Deviates => "deviates",
            Verdict::RegimeViolated => "regime_violated",
        }
    }
}

impl std::fmt::Display for Verdict {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Magnitudes of the neglected orders at a parameter point.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ErrorTerms {
    pub theta2_sqrt_eta: f64,
    pub inv_nbar2: f64,
    pub theta3: f64,
}

impl ErrorTerms {
    pub fn at(params: &ProtocolParams) -> Self {
        let t = params.theta;
        let n = params.nbar();
        ErrorTerms {
            theta2_sqrt_eta: t * t * params.eta.sqrt(),
            inv_nbar2: 1.0 / (n * n),
            theta3: t * t * t,
        }
    }

    /// `10 (theta^2 sqrt(eta) + 1/nbar^2)`.
    pub fn tolerance(&self) -> f64 {
        10.0 * (self.theta2_sqrt_eta + self.inv_nbar2)
    }
}

/// Fits of the principal-minus-closed-form gap on a small eta ladder.
#[derive(Clone, Debug, PartialEq)]
pub struct GapFit {
    pub etas: Vec<f64>,
    pub gaps: Vec<f64>,
    /// Log-log slope of `|gap|` against eta.
    pub order: f64,
    pub coeff: f64,
    /// Least-squares `gap ~ c0 + c_sqrt sqrt(eta) + c_lin eta` (NaN with fewer than 3 points).
    pub c0: f64,
    pub c_sqrt: f64,
    pub c_lin: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct TraceAudit {
    pub params: ProtocolParams,
    pub t_paper: f64,
    pub t_papersign: f64,
    pub t_principal: Option<f64>,
    pub principal_error: Option<String>,
    pub papersign_terms: PaperSignTrace,
    pub flags: RegimeFlags,
    pub error_terms: ErrorTerms,
    /// `|t_papersign - t_paper|`.
    pub papersign_deviation: f64,
    pub verdict: Verdict,
    /// Fit of `t_principal - t_paper` against eta.
    pub gap_fit: Option<GapFit>,
}

#[derive(Clone, Debug)]
pub struct AuditOptions {
    pub engine: String,
    pub engine_opts: EngineOptions,
    pub signs: SignChoice,
    /// Multipliers applied to eta for the gap fit.
    pub ladder: Vec<f64>,
}

impl Default for AuditOptions {
    fn default() -> Self {
        AuditOptions {
            engine: crate::engine::DEFAULT_ENGINE.into(),
            engine_opts: EngineOptions::default(),
            signs: SignChoice::PAPER,
            ladder: vec![0.125, 0.25, 0.5, 1.0, 2.0],
        }
    }
}

fn fit_power_law(xs: &[f64], ys: &[f64]) -> Option<(f64, f64)> {
    let pts: Vec<(f64, f64)> = xs
        .iter()
        .zip(ys)
        .filter(|(x, y)| **x > 0.0 && y.abs() > 0.0)
        .map(|(x, y)| (x.ln(), y.abs().ln()))
        .collect();
    if pts.len() < 2 {
        return None;
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    if sxx == 0.0 {
        return None;
    }
    let slope = sxy / sxx;
    Some((slope, (my - slope * mx).exp()))
}

fn fit_orders(etas: &[f64], gaps: &[f64]) -> [f64; 3] {
    if etas.len() < 3 {
        return [f64::NAN; 3];
    }
    let a = DMatrix::from_fn(etas.len(), 3, |i, j| match j {
        0 => 1.0,
        1 => etas[i].sqrt(),
        _ => etas[i],
    });
    let b = DVector::from_column_slice(gaps);
    match a.svd(true, true).solve(&b, 1e-300) {
        Ok(x) => [x[0], x[1], x[2]],
        Err(_) => [f64::NAN; 3],
    }
}

pub fn verdict(params: &ProtocolParams, t_paper: f64, t_papersign: f64) -> Verdict {
    if params.eta > 0.0 && !params.regime_flags().all() {
        return Verdict::RegimeViolated;
    }
    if (t_papersign - t_paper).abs() <= ErrorTerms::at(params).tolerance() {
        Verdict::MatchesPaperOrder
    } else {
        Verdict::Deviates
    }
}

/// Computes all three traces and the verdict. Failures of the numeric principal
/// trace are recorded instead of aborting the audit.
pub fn audit(params: &ProtocolParams, opts: &AuditOptions) -> Result<TraceAudit> {
    params.validate()?;
    let nbar = params.nbar();
    let t_paper = appendix_trace_formula(params.eta, nbar)?;
    let terms = paper_sign_trace(params, opts.signs)?;
    let (t_principal, principal_error) = match principal_trace(params, &opts.engine, &opts.engine_opts) {
        Ok(v) => (Some(v), None),
        Err(e) => (None, Some(e.to_string())),
    };
    let gap_fit = if params.eta > 0.0 && t_principal.is_some() {
        let mut etas = Vec::new();
        let mut gaps = Vec::new();
        for &k in &opts.ladder {
            let e = (params.eta * k).min(1.0);
            if etas.contains(&e) {
                continue;
            }
            let p = ProtocolParams {
                eta: e,
                ..params.clone()
            };
            if let Ok(t) = principal_trace(&p, &opts.engine, &opts.engine_opts) {
                etas.push(e);
                gaps.push(t - appendix_trace_formula(e, nbar)?);
            }
        }
        fit_power_law(&etas, &gaps).map(|(order, coeff)| {
            let [c0, c_sqrt, c_lin] = fit_orders(&etas, &gaps);
            GapFit {
                etas,
                gaps,
                order,
                coeff,
                c0,
                c_sqrt,
                c_lin,
            }
        })
    } else {
        None
    };
    Ok(TraceAudit {
        params: params.clone(),
        t_paper,
        t_papersign: terms.total,
        t_principal,
        principal_error,
        flags: params.regime_flags(),
        error_terms: ErrorTerms::at(params),
        papersign_deviation: (terms.total - t_paper).abs(),
        verdict: verdict(params, t_paper, terms.total),
        papersign_terms: terms,
        gap_fit,
    })
}

impl TraceAudit {
    pub fn to_record(&self) -> Record {
        let mut r = Record::new();
        self.params.write_record(&mut r);
        r.num("t_paper", self.t_paper);
        r.num("t_papersign", self.t_papersign);
        r.num("t_principal", self.t_principal.unwrap_or(f64::NAN));
        if let Some(e) = &self.principal_error {
            r.text("principal_error", e);
        }
        write_flags(&mut r, &self.flags);
        r.text("verdict", self.verdict.as_str());
        r.num("papersign_deviation", self.papersign_deviation);
        r.num("tolerance", self.error_terms.tolerance());
        r.num("err_theta2_sqrt_eta", self.error_terms.theta2_sqrt_eta);
        r.num("err_inv_nbar2", self.error_terms.inv_nbar2);
        r.num("err_theta3", self.error_terms.theta3);
        let t = &self.papersign_terms;
        r.num("term_rho0", t.rho0_term);
        r.num("term_low_block", t.low_block);
        r.num("term_psi_cross", t.psi_cross);
        r.num("term_psi_cross_estimate", t.psi_cross_estimate);
        match &self.gap_fit {
            Some(g) => {
                r.list("gap_etas", g.etas.clone());
                r.list("gap_values", g.gaps.clone());
                r.num("gap_order", g.order);
                r.num("gap_coeff", g.coeff);
                r.num("gap_c0", g.c0);
                r.num("gap_c_sqrt_eta", g.c_sqrt);
                r.num("gap_c_eta", g.c_lin);
            }
            None => {
                r.num("gap_order", f64::NAN);
                r.num("gap_coeff", f64::NAN);
            }
        }
        r.words("warnings", t.warnings.clone());
        r
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::states::BackgroundVariant;

    fn regime(theta: f64, eta: f64, nbar: f64) -> ProtocolParams {
        ProtocolParams {
            theta,
            eta,
            nbar2: nbar,
            nbar3: nbar,
            background: BackgroundVariant::Flat,
            ..Default::default()
        }
    }

    #[test]
    fn formula_examples() {
        assert_eq!(appendix_trace_formula(0.0, 7.0).unwrap(), 1.0);
        assert!((appendix_trace_formula(0.01, 100.0).unwrap() - 0.999).abs() < 1e-15);
        assert!((appendix_trace_formula(0.04, 20.0).unwrap() - 0.99).abs() < 1e-15);
        assert!(appendix_trace_formula(1.5, 7.0).is_err());
    }

    #[test]
    fn eta_zero_any_signs() {
        for psi in [Sign::Plus, Sign::Minus] {
            for rho0 in [Sign::Plus, Sign::Minus] {
                let signs = SignChoice {
                    rho0,
                    psi,
                    background: Sign::Plus,
                };
                assert_eq!(paper_sign_trace(&regime(0.01, 0.0, 50.0), signs).unwrap().total, 1.0);
            }
        }
    }

    #[test]
    fn paper_preset_near_formula() {
        let p = regime(0.01, 0.01, 50.0);
        let t = paper_sign_trace(&p, SignChoice::PAPER).unwrap();
        let bound = ErrorTerms::at(&p).tolerance();
        assert!((t.total - 0.998).abs() <= bound);
        assert!(t.total < 1.0);
        // flat: exact closed form 1 - 4/K^2 - sqrt(eta)(c^4 + s^4)/K
        let (s, c) = 0.01f64.sin_cos();
        let exact = 1.0 - 4.0 / 2500.0 - 0.1 * (c.powi(4) + s.powi(4)) / 50.0;
        assert!((t.total - exact).abs() < 1e-13);
    }

    #[test]
    fn flipped_psi_sign_exceeds_one() {
        let signs = SignChoice {
            psi: Sign::Plus,
            ..SignChoice::PAPER
        };
        assert!(paper_sign_trace(&regime(0.01, 0.01, 50.0), signs).unwrap().total > 1.0);
    }

    #[test]
    fn verdicts() {
        let opts = AuditOptions::default();
        let a = audit(&regime(0.01, 0.0, 50.0), &opts).unwrap();
        assert_eq!(a.verdict, Verdict::MatchesPaperOrder);
        assert_eq!(a.t_papersign, 1.0);
        assert!((a.t_principal.unwrap() - 1.0).abs() < 1e-12);
        let v = audit(&regime(0.01, 1e-4, 20.0), &opts).unwrap();
        assert_eq!(v.verdict, Verdict::RegimeViolated);
        let m = audit(&regime(0.01, 0.01, 50.0), &opts).unwrap();
        assert_eq!(m.verdict, Verdict::MatchesPaperOrder);
        assert!(m.gap_fit.is_some());
    }

    #[test]
    fn power_law_fit() {
        let xs = [1e-3, 1e-2, 1e-1];
        let ys: Vec<f64> = xs.iter().map(|x: &f64| 3.0 * x.sqrt()).collect();
        let (o, c) = fit_power_law(&xs, &ys).unwrap();
        assert!((o - 0.5).abs() < 1e-12 && (c - 3.0).abs() < 1e-10);
        let etas = [0.01, 0.02, 0.04, 0.08];
        let gaps: Vec<f64> = etas.iter().map(|e: &f64| -4e-4 + 0.04 * e.sqrt() - 0.5 * e).collect();
        let [c0, cs, cl] = fit_orders(&etas, &gaps);
        assert!((c0 + 4e-4).abs() < 1e-12 && (cs - 0.04).abs() < 1e-10 && (cl + 0.5).abs() < 1e-10);
    }
}
