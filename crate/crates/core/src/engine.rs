//! Interchangeable evaluators for `Q_s` and the Helstrom error.
//!
//! An engine turns a hypothesis pair into a [`PreparedPair`] once; the prepared
//! pair then answers `Q_s` for many `s` cheaply. Engines are looked up by name
//! in an [`EngineRegistry`], so callers (and the CLI) pick one at runtime.

use std::collections::{BTreeMap, HashMap};
use std::sync::Arc;

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::fock::{DensityOperator, FramedDiag, DEFAULT_DENSE_LIMIT, DEFAULT_STRUCTURED_LIMIT};
use crate::spectral::{eigh, support_power, DiagPlusRankOne, SecularRoot, DEFAULT_SUPPORT_TOL};
use crate::C64;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EngineOptions {
    pub support_tol: f64,
    pub dense_limit: usize,
    pub structured_limit: usize,
}

impl Default for EngineOptions {
    fn default() -> Self {
        EngineOptions {
            support_tol: DEFAULT_SUPPORT_TOL,
            dense_limit: DEFAULT_DENSE_LIMIT,
            structured_limit: DEFAULT_STRUCTURED_LIMIT,
        }
    }
}

/// A hypothesis pair preprocessed for repeated evaluation.
pub trait PreparedPair: Send + Sync {
    /// Name of the engine that produced this pair.
    fn engine(&self) -> &'static str;
    fn dim(&self) -> usize;
    /// `Tr(rho0^s rho1^(1-s))` with `0^0 = 0`.
    fn q_s(&self, s: f64) -> Result<f64>;
    /// `||pi1 rho1 - pi0 rho0||_1` with `pi1 = 1 - pi0`.
    fn weighted_trace_norm(&self, pi0: f64) -> Result<f64>;
}

pub trait DiscriminationEngine: Send + Sync {
    fn name(&self) -> &'static str;
    fn description(&self) -> &'static str;
    fn prepare(
        &self,
        rho0: &DensityOperator,
        rho1: &DensityOperator,
        opts: &EngineOptions,
    ) -> Result<Box<dyn PreparedPair>>;
}

pub(crate) fn check_s(s: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&s) {
        return Err(Error::param("s", format!("{s} is outside [0, 1]")));
    }
    Ok(())
}

pub(crate) fn check_prior(pi0: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&pi0) {
        return Err(Error::param("pi0", format!("{pi0} is outside [0, 1]")));
    }
    Ok(())
}

fn check_spaces(rho0: &DensityOperator, rho1: &DensityOperator) -> Result<()> {
    if rho0.space() != rho1.space() {
        return Err(Error::DimensionMismatch {
            expected: rho0.dim(),
            actual: rho1.dim(),
        });
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// Dense

/// Materializes both operators and diagonalizes them once.
pub struct DenseEngine;

struct DensePair {
    rho0: DMatrix<C64>,
    rho1: DMatrix<C64>,
    lambda: Vec<f64>,
    mu: Vec<f64>,
    cut0: f64,
    cut1: f64,
    /// `|<u_i|v_j>|^2`, row-major over (i, j).
    overlap: Vec<f64>,
}

impl DiscriminationEngine for DenseEngine {
    fn name(&self) -> &'static str {
        "dense"
    }

    fn description(&self) -> &'static str {
        "dense Hermitian eigendecomposition of both operators"
    }

    fn prepare(
        &self,
        rho0: &DensityOperator,
        rho1: &DensityOperator,
        opts: &EngineOptions,
    ) -> Result<Box<dyn PreparedPair>> {
        check_spaces(rho0, rho1)?;
        let a = rho0.to_dense(opts.dense_limit)?;
        let b = rho1.to_dense(opts.dense_limit)?;
        let ea = eigh(&a, opts.dense_limit)?;
        let eb = eigh(&b, opts.dense_limit)?;
        ea.require_psd()?;
        eb.require_psd()?;
        let n = a.nrows();
        let cross = ea.eigenvectors().adjoint() * eb.eigenvectors();
        let mut overlap = Vec::with_capacity(n * n);
        for i in 0..n {
            for j in 0..n {
                overlap.push(cross[(i, j)].norm_sqr());
            }
        }
        Ok(Box::new(DensePair {
            cut0: opts.support_tol * ea.max_eigenvalue(),
            cut1: opts.support_tol * eb.max_eigenvalue(),
            lambda: ea.eigenvalues().to_vec(),
            mu: eb.eigenvalues().to_vec(),
            rho0: a,
            rho1: b,
            overlap,
        }))
    }
}

impl PreparedPair for DensePair {
    fn engine(&self) -> &'static str {
        "dense"
    }

    fn dim(&self) -> usize {
        self.lambda.len()
    }

    fn q_s(&self, s: f64) -> Result<f64> {
        check_s(s)?;
        let n = self.lambda.len();
        let ls: Vec<f64> = self.lambda.iter().map(|&l| support_power(l, s, self.cut0)).collect();
        let ms: Vec<f64> = self.mu.iter().map(|&m| support_power(m, 1.0 - s, self.cut1)).collect();
        let mut q = 0.0;
        for i in 0..n {
            if ls[i] == 0.0 {
                continue;
            }
            let row = &self.overlap[i * n..(i + 1) * n];
            q += ls[i] * row.iter().zip(&ms).map(|(o, m)| o * m).sum::<f64>();
        }
        Ok(q)
    }

    fn weighted_trace_norm(&self, pi0: f64) -> Result<f64> {
        check_prior(pi0)?;
        let gamma = &self.rho1 * C64::new(1.0 - pi0, 0.0) - &self.rho0 * C64::new(pi0, 0.0);
        let es = eigh(&gamma, usize::MAX)?;
        Ok(es.eigenvalues().iter().map(|l| l.abs()).sum())
    }
}

// ---------------------------------------------------------------------------
// Secular

/// Exploits a shared frame in which one operator is diagonal and the other is
/// diagonal plus a single rank-one term. Never materializes a matrix.
pub struct SecularEngine;

struct SecularPair {
    /// When set, `Q_s` is evaluated as `Q_{1-s}` of the stored pair.
    swapped: bool,
    dim: usize,
    /// Diagonal operator `A` (the role of `rho0` after any swap).
    diag_a: Vec<f64>,
    /// `B = diag_b + weight v v^dag` (the role of `rho1`).
    diag_b: Vec<f64>,
    root: Option<SecularRoot>,
    cut_a: f64,
    cut_b: f64,
    /// Inactive coordinates compressed to distinct `(a_i, b_i)` pairs with multiplicities.
    pairs: Vec<(f64, f64, f64)>,
    /// Active coordinates as `(index, a_i)`.
    active: Vec<(usize, f64)>,
}

fn single_term(f: &FramedDiag) -> Result<Option<(f64, &[C64])>> {
    match f.terms.as_slice() {
        [] => Ok(None),
        [t] => Ok(Some((t.weight, t.vector.as_slice()))),
        _ => Err(Error::Unsupported {
            engine: "secular".into(),
            reason: "more than one rank-one term".into(),
        }),
    }
}

impl DiscriminationEngine for SecularEngine {
    fn name(&self) -> &'static str {
        "secular"
    }

    fn description(&self) -> &'static str {
        "shared-frame diagonal plus rank-one secular solve (no dense matrices)"
    }

    fn prepare(
        &self,
        rho0: &DensityOperator,
        rho1: &DensityOperator,
        opts: &EngineOptions,
    ) -> Result<Box<dyn PreparedPair>> {
        check_spaces(rho0, rho1)?;
        rho0.space().check_structured(opts.structured_limit)?;
        let unsupported = |reason: &str| Error::Unsupported {
            engine: "secular".into(),
            reason: reason.into(),
        };
        let f0 = rho0.to_framed().ok_or_else(|| unsupported("dense operand"))?;
        let f1 = rho1.to_framed().ok_or_else(|| unsupported("dense operand"))?;
        if f0.frame != f1.frame {
            return Err(unsupported("operands live in different frames"));
        }
        let t0 = single_term(&f0)?;
        let t1 = single_term(&f1)?;
        let (swapped, a, b, term) = match (t0, t1) {
            (None, t) => (false, &f0.diag, &f1.diag, t),
            (Some(t), None) => (true, &f1.diag, &f0.diag, Some(t)),
            (Some(_), Some(_)) => return Err(unsupported("both operands carry a rank-one term")),
        };
        if a.iter().chain(b.iter()).any(|&x| x < 0.0) {
            return Err(unsupported("negative diagonal entry"));
        }
        let root = match term {
            Some((w, v)) => Some(DiagPlusRankOne::new(b.clone(), w, v.to_vec())?.solve()?),
            None => None,
        };
        let max_a = a.iter().cloned().fold(0.0, f64::max);
        let max_b = match &root {
            Some(r) => r.max_eigenvalue(),
            None => b.iter().cloned().fold(0.0, f64::max),
        };
        if let Some(r) = &root {
            let min = r.eigenvalues().first().copied().unwrap_or(0.0);
            if min < -crate::fock::PSD_REL_TOL * max_b {
                return Err(Error::NotPsd { min, max: max_b });
            }
        }

        let mut active = Vec::new();
        let mut counts: HashMap<(u64, u64), f64> = HashMap::new();
        let mut order: Vec<(u64, u64)> = Vec::new();
        for i in 0..a.len() {
            if root.as_ref().is_some_and(|r| r.is_active(i)) {
                active.push((i, a[i]));
                continue;
            }
            let key = (a[i].to_bits(), b[i].to_bits());
            let e = counts.entry(key).or_insert_with(|| {
                order.push(key);
                0.0
            });
            *e += 1.0;
        }
        let pairs = order
            .into_iter()
            .map(|k| (f64::from_bits(k.0), f64::from_bits(k.1), counts[&k]))
            .collect();

        Ok(Box::new(SecularPair {
            swapped,
            dim: a.len(),
            diag_a: a.clone(),
            diag_b: b.clone(),
            root,
            cut_a: opts.support_tol * max_a,
            cut_b: opts.support_tol * max_b,
            pairs,
            active,
        }))
    }
}

impl SecularPair {
    fn q_unswapped(&self, s: f64) -> f64 {
        let t = 1.0 - s;
        let mut q: f64 = self
            .pairs
            .iter()
            .map(|&(a, b, n)| {
                let pa = support_power(a, s, self.cut_a);
                if pa == 0.0 {
                    0.0
                } else {
                    n * pa * support_power(b, t, self.cut_b)
                }
            })
            .sum();
        if let Some(root) = &self.root {
            let diag: HashMap<usize, f64> = root
                .active_diagonal(|l| support_power(l, t, self.cut_b))
                .into_iter()
                .collect();
            for &(i, a) in &self.active {
                q += support_power(a, s, self.cut_a) * diag[&i];
            }
        }
        q
    }
}

impl PreparedPair for SecularPair {
    fn engine(&self) -> &'static str {
        "secular"
    }

    fn dim(&self) -> usize {
        self.dim
    }

    fn q_s(&self, s: f64) -> Result<f64> {
        check_s(s)?;
        Ok(if self.swapped {
            self.q_unswapped(1.0 - s)
        } else {
            self.q_unswapped(s)
        })
    }

    fn weighted_trace_norm(&self, pi0: f64) -> Result<f64> {
        check_prior(pi0)?;
        // Stored roles: A = diagonal operand, B = operand with the term.
        let (pa, pb) = if self.swapped {
            (-(1.0 - pi0), pi0)
        } else {
            (-pi0, 1.0 - pi0)
        };
        let diag: Vec<f64> = self
            .diag_a
            .iter()
            .zip(&self.diag_b)
            .map(|(a, b)| pa * a + pb * b)
            .collect();
        match &self.root {
            None => Ok(diag.iter().map(|x| x.abs()).sum()),
            Some(r) => {
                let p = r.problem();
                let g = DiagPlusRankOne::new(diag, pb * p.weight(), p.vector().to_vec())?;
                Ok(g.solve()?.trace_norm())
            }
        }
    }
}

// ---------------------------------------------------------------------------
// Auto

/// Uses the secular engine when the structure allows it, dense otherwise.
pub struct AutoEngine;

impl DiscriminationEngine for AutoEngine {
    fn name(&self) -> &'static str {
        "auto"
    }

    fn description(&self) -> &'static str {
        "secular when the operands share a frame, dense otherwise"
    }

    fn prepare(
        &self,
        rho0: &DensityOperator,
        rho1: &DensityOperator,
        opts: &EngineOptions,
    ) -> Result<Box<dyn PreparedPair>> {
        match SecularEngine.prepare(rho0, rho1, opts) {
            Err(Error::Unsupported { .. }) | Err(Error::StructuredLimit { .. }) => {
                DenseEngine.prepare(rho0, rho1, opts)
            }
            other => other,
        }
    }
}

// ---------------------------------------------------------------------------
// Registry

#[derive(Clone)]
pub struct EngineRegistry {
    engines: BTreeMap<&'static str, Arc<dyn DiscriminationEngine>>,
}

pub const DEFAULT_ENGINE: &str = "auto";

impl EngineRegistry {
    pub fn empty() -> Self {
        EngineRegistry {
            engines: BTreeMap::new(),
        }
    }

    /// Registry holding `dense`, `secular` and `auto`.
    pub fn with_defaults() -> Self {
        let mut r = Self::empty();
        r.register(Arc::new(DenseEngine));
        r.register(Arc::new(SecularEngine));
        r.register(Arc::new(AutoEngine));
        r
    }

    /// Adds an engine, replacing any previous one with the same name.
    pub fn register(&mut self, engine: Arc<dyn DiscriminationEngine>) {
        self.engines.insert(engine.name(), engine);
    }

    pub fn get(&self, name: &str) -> Result<Arc<dyn DiscriminationEngine>> {
        self.engines
            .get(name)
            .cloned()
            .ok_or_else(|| Error::UnknownEngine(name.to_string()))
    }

    pub fn names(&self) -> Vec<&'static str> {
        self.engines.keys().copied().collect()
    }
}

impl Default for EngineRegistry {
    fn default() -> Self {
        Self::with_defaults()
    }
}

/// Prepares a pair with the named engine from the default registry.
pub fn prepare_with(
    engine: &str,
    rho0: &DensityOperator,
    rho1: &DensityOperator,
    opts: &EngineOptions,
) -> Result<Box<dyn PreparedPair>> {
    EngineRegistry::with_defaults().get(engine)?.prepare(rho0, rho1, opts)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fock::build_space;
    use crate::states::{BackgroundVariant, HypothesisPair, IdlerVariant, ProtocolParams};

    fn golden(idler: IdlerVariant, background: BackgroundVariant) -> HypothesisPair {
        HypothesisPair::build(&ProtocolParams {
            theta: 0.1,
            eta: 0.05,
            nbar2: 3.0,
            nbar3: 3.0,
            cutoffs: Some([2, 6, 6]),
            background,
            idler,
            tail_bound: 1.0,
            ..Default::default()
        })
        .unwrap()
    }

    #[test]
    fn registry_lookup() {
        let r = EngineRegistry::default();
        assert_eq!(r.names(), vec!["auto", "dense", "secular"]);
        assert_eq!(r.get("dense").unwrap().name(), "dense");
        assert!(matches!(r.get("nope"), Err(Error::UnknownEngine(_))));
    }

    #[test]
    fn secular_matches_dense() {
        let opts = EngineOptions::default();
        for idler in [IdlerVariant::PaperPure, IdlerVariant::Traced] {
            for bg in [BackgroundVariant::Thermal, BackgroundVariant::Flat] {
                let p = golden(idler, bg);
                let d = DenseEngine.prepare(&p.rho0, &p.rho1, &opts).unwrap();
                let s = SecularEngine.prepare(&p.rho0, &p.rho1, &opts).unwrap();
                let sw = SecularEngine.prepare(&p.rho1, &p.rho0, &opts).unwrap();
                for k in 0..=20 {
                    let x = k as f64 / 20.0;
                    let qd = d.q_s(x).unwrap();
                    assert!((qd - s.q_s(x).unwrap()).abs() < 1e-12, "{idler:?} {bg:?} s={x}");
                    assert!((qd - sw.q_s(1.0 - x).unwrap()).abs() < 1e-12);
                }
                for pi0 in [0.0, 0.3, 0.5, 0.9] {
                    let a = d.weighted_trace_norm(pi0).unwrap();
                    let b = s.weighted_trace_norm(pi0).unwrap();
                    let c = sw.weighted_trace_norm(1.0 - pi0).unwrap();
                    assert!((a - b).abs() < 1e-12 && (a - c).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn auto_falls_back_to_dense() {
        let s = build_space(1, &[2]).unwrap();
        let m = DMatrix::from_row_slice(
            2,
            2,
            &[C64::new(0.5, 0.0), C64::new(0.5, 0.0), C64::new(0.5, 0.0), C64::new(0.5, 0.0)],
        );
        let a = DensityOperator::dense(s.clone(), m).unwrap();
        let b = DensityOperator::diagonal(s, vec![0.5, 0.5]).unwrap();
        let opts = EngineOptions::default();
        assert!(matches!(
            SecularEngine.prepare(&a, &b, &opts),
            Err(Error::Unsupported { .. })
        ));
        let p = AutoEngine.prepare(&a, &b, &opts).unwrap();
        assert_eq!(p.engine(), "dense");
        assert!((p.q_s(0.5).unwrap() - 0.5f64.sqrt()).abs() < 1e-14);
    }

    #[test]
    fn identical_operators_give_one() {
        let p = golden(IdlerVariant::PaperPure, BackgroundVariant::Thermal);
        let opts = EngineOptions::default();
        for e in ["dense", "secular"] {
            let q = prepare_with(e, &p.rho0, &p.rho0, &opts).unwrap();
            for s in [0.0, 0.25, 1.0] {
                assert!((q.q_s(s).unwrap() - 1.0).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn rejects_bad_arguments() {
        let p = golden(IdlerVariant::PaperPure, BackgroundVariant::Flat);
        let q = prepare_with("secular", &p.rho0, &p.rho1, &EngineOptions::default()).unwrap();
        assert!(q.q_s(1.5).is_err());
        assert!(q.weighted_trace_norm(-0.1).is_err());
    }
}
