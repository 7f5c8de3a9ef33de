use nalgebra::DMatrix;

use super::ket::Ket;
use super::space::{SpaceDescriptor, DEFAULT_DENSE_LIMIT};
use crate::error::{Error, Result};
use crate::spectral::{eigh, DiagPlusRankOne, HERMITIAN_TOL};
use crate::C64;

/// Relative PSD slack: eigenvalues down to `-PSD_REL_TOL * max` are accepted.
pub const PSD_REL_TOL: f64 = 1e-10;
pub const TRACE_TOL: f64 = 1e-12;

/// Product of per-mode unitaries `W = W_0 (x) W_1 (x) ...`; `None` is identity.
#[derive(Clone, Debug, PartialEq)]
pub struct Frame {
    per_mode: Vec<Option<DMatrix<C64>>>,
}

impl Frame {
    pub fn identity(modes: usize) -> Self {
        Frame {
            per_mode: vec![None; modes],
        }
    }

    pub fn with_mode(mut self, mode: usize, unitary: DMatrix<C64>) -> Self {
        self.per_mode[mode] = Some(unitary);
        self
    }

    pub fn modes(&self) -> usize {
        self.per_mode.len()
    }

    pub fn mode(&self, mode: usize) -> Option<&DMatrix<C64>> {
        self.per_mode[mode].as_ref()
    }

    pub fn is_identity(&self) -> bool {
        self.per_mode.iter().all(Option::is_none)
    }

    pub fn concat(&self, other: &Frame) -> Frame {
        let mut per_mode = self.per_mode.clone();
        per_mode.extend(other.per_mode.iter().cloned());
        Frame { per_mode }
    }

    pub fn select(&self, modes: &[usize]) -> Frame {
        Frame {
            per_mode: modes.iter().map(|&m| self.per_mode[m].clone()).collect(),
        }
    }

    /// `W v`.
    pub fn apply(&self, space: &SpaceDescriptor, v: &mut [C64]) {
        for (m, u) in self.per_mode.iter().enumerate() {
            if let Some(u) = u {
                apply_on_mode(space, v, m, u);
            }
        }
    }

    /// `W^dag v`.
    pub fn apply_adjoint(&self, space: &SpaceDescriptor, v: &mut [C64]) {
        for (m, u) in self.per_mode.iter().enumerate() {
            if let Some(u) = u {
                apply_on_mode(space, v, m, &u.adjoint());
            }
        }
    }

    pub fn to_dense(&self, space: &SpaceDescriptor) -> DMatrix<C64> {
        let mut w = DMatrix::from_element(1, 1, C64::new(1.0, 0.0));
        for (m, u) in self.per_mode.iter().enumerate() {
            let factor = match u {
                Some(u) => u.clone(),
                None => DMatrix::identity(space.cutoff(m), space.cutoff(m)),
            };
            w = w.kronecker(&factor);
        }
        w
    }
}

/// Multiplies the `mode` tensor factor of `v` by `mat` in place.
pub fn apply_on_mode(space: &SpaceDescriptor, v: &mut [C64], mode: usize, mat: &DMatrix<C64>) {
    let d = space.cutoff(mode);
    let inner = space.strides()[mode];
    let outer = space.total_dim() / (d * inner);
    let mut buf = vec![C64::new(0.0, 0.0); d];
    for o in 0..outer {
        for i in 0..inner {
            let base = o * d * inner + i;
            for (k, b) in buf.iter_mut().enumerate() {
                *b = v[base + k * inner];
            }
            for r in 0..d {
                let mut acc = C64::new(0.0, 0.0);
                for (k, b) in buf.iter().enumerate() {
                    acc += mat[(r, k)] * b;
                }
                v[base + r * inner] = acc;
            }
        }
    }
}

/// `weight * |vector><vector|`, with `vector` in frame coordinates.
#[derive(Clone, Debug)]
pub struct RankOneTerm {
    pub weight: f64,
    pub vector: Vec<C64>,
}

/// `W (diag(d) + sum_k w_k v_k v_k^dag) W^dag`.
#[derive(Clone, Debug)]
pub struct FramedDiag {
    pub frame: Frame,
    pub diag: Vec<f64>,
    pub terms: Vec<RankOneTerm>,
}

impl FramedDiag {
    pub fn trace(&self) -> f64 {
        self.diag.iter().sum::<f64>()
            + self
                .terms
                .iter()
                .map(|t| t.weight * t.vector.iter().map(|x| x.norm_sqr()).sum::<f64>())
                .sum::<f64>()
    }

    pub fn to_dense(&self, space: &SpaceDescriptor) -> DMatrix<C64> {
        let n = self.diag.len();
        let mut m = DMatrix::from_fn(n, n, |i, j| {
            if i == j {
                C64::new(self.diag[i], 0.0)
            } else {
                C64::new(0.0, 0.0)
            }
        });
        for t in &self.terms {
            for j in 0..n {
                if t.vector[j].norm_sqr() == 0.0 {
                    continue;
                }
                let cj = t.vector[j].conj() * t.weight;
                for i in 0..n {
                    m[(i, j)] += t.vector[i] * cj;
                }
            }
        }
        if self.frame.is_identity() {
            m
        } else {
            let w = self.frame.to_dense(space);
            &w * m * w.adjoint()
        }
    }

    fn scale(&mut self, c: f64) {
        for d in &mut self.diag {
            *d *= c;
        }
        for t in &mut self.terms {
            t.weight *= c;
        }
    }
}

#[derive(Clone, Debug)]
pub enum Structure {
    Dense(DMatrix<C64>),
    Diagonal(Vec<f64>),
    TensorProduct(Vec<DensityOperator>),
    DiagPlusLowRank(FramedDiag),
}

/// Hermitian PSD operator on a truncated Fock space.
#[derive(Clone, Debug)]
pub struct DensityOperator {
    space: SpaceDescriptor,
    structure: Structure,
    trace_normalized: bool,
}

/// Result of checking Hermiticity, positivity and trace.
#[derive(Clone, Debug)]
pub struct InvariantReport {
    pub hermitian_deviation: f64,
    pub min_eigenvalue: f64,
    pub max_eigenvalue: f64,
    pub trace: f64,
}

impl InvariantReport {
    pub fn is_hermitian(&self) -> bool {
        self.hermitian_deviation <= 1e-12
    }

    pub fn is_psd(&self) -> bool {
        self.min_eigenvalue >= -PSD_REL_TOL * self.max_eigenvalue.max(0.0)
    }

    pub fn is_unit_trace(&self) -> bool {
        (self.trace - 1.0).abs() <= TRACE_TOL
    }
}

impl DensityOperator {
    pub fn dense(space: SpaceDescriptor, m: DMatrix<C64>) -> Result<Self> {
        if m.nrows() != space.total_dim() || m.ncols() != space.total_dim() {
            return Err(Error::DimensionMismatch {
                expected: space.total_dim(),
                actual: m.nrows(),
            });
        }
        let trace_normalized = (trace_of(&m) - 1.0).abs() <= TRACE_TOL;
        Ok(DensityOperator {
            space,
            structure: Structure::Dense(m),
            trace_normalized,
        })
    }

    pub fn diagonal(space: SpaceDescriptor, d: Vec<f64>) -> Result<Self> {
        if d.len() != space.total_dim() {
            return Err(Error::DimensionMismatch {
                expected: space.total_dim(),
                actual: d.len(),
            });
        }
        let trace_normalized = (d.iter().sum::<f64>() - 1.0).abs() <= TRACE_TOL;
        Ok(DensityOperator {
            space,
            structure: Structure::Diagonal(d),
            trace_normalized,
        })
    }

    pub fn tensor(factors: Vec<DensityOperator>) -> Result<Self> {
        let mut iter = factors.iter();
        let first = iter
            .next()
            .ok_or_else(|| Error::InvalidSpace("empty tensor product".into()))?;
        let mut space = first.space.clone();
        for f in iter {
            space = space.concat(&f.space)?;
        }
        let trace_normalized = factors.iter().all(|f| f.trace_normalized);
        Ok(DensityOperator {
            space,
            structure: Structure::TensorProduct(factors),
            trace_normalized,
        })
    }

    pub fn framed(space: SpaceDescriptor, framed: FramedDiag) -> Result<Self> {
        if framed.diag.len() != space.total_dim() || framed.frame.modes() != space.modes() {
            return Err(Error::DimensionMismatch {
                expected: space.total_dim(),
                actual: framed.diag.len(),
            });
        }
        for t in &framed.terms {
            if t.vector.len() != space.total_dim() {
                return Err(Error::DimensionMismatch {
                    expected: space.total_dim(),
                    actual: t.vector.len(),
                });
            }
        }
        let trace_normalized = (framed.trace() - 1.0).abs() <= TRACE_TOL;
        Ok(DensityOperator {
            space,
            structure: Structure::DiagPlusLowRank(framed),
            trace_normalized,
        })
    }

    /// `|psi><psi|`, kept structured as a zero diagonal plus one rank-one term.
    pub fn pure(ket: &Ket) -> Self {
        let space = ket.space().clone();
        let n = space.total_dim();
        DensityOperator {
            structure: Structure::DiagPlusLowRank(FramedDiag {
                frame: Frame::identity(space.modes()),
                diag: vec![0.0; n],
                terms: vec![RankOneTerm {
                    weight: 1.0,
                    vector: ket.amplitudes().to_vec(),
                }],
            }),
            space,
            trace_normalized: true,
        }
    }

    pub fn space(&self) -> &SpaceDescriptor {
        &self.space
    }

    pub fn structure(&self) -> &Structure {
        &self.structure
    }

    pub fn dim(&self) -> usize {
        self.space.total_dim()
    }

    pub fn is_trace_normalized(&self) -> bool {
        self.trace_normalized
    }

    pub fn kind(&self) -> &'static str {
        match self.structure {
            Structure::Dense(_) => "dense",
            Structure::Diagonal(_) => "diagonal",
            Structure::TensorProduct(_) => "tensor-product",
            Structure::DiagPlusLowRank(_) => "diag-plus-low-rank",
        }
    }

    pub fn trace(&self) -> f64 {
        match &self.structure {
            Structure::Dense(m) => trace_of(m),
            Structure::Diagonal(d) => d.iter().sum(),
            Structure::TensorProduct(fs) => fs.iter().map(DensityOperator::trace).product(),
            Structure::DiagPlusLowRank(f) => f.trace(),
        }
    }

    pub fn scaled(&self, c: f64) -> DensityOperator {
        let structure = match &self.structure {
            Structure::Dense(m) => Structure::Dense(m * C64::new(c, 0.0)),
            Structure::Diagonal(d) => Structure::Diagonal(d.iter().map(|x| x * c).collect()),
            Structure::TensorProduct(fs) => {
                let mut fs = fs.clone();
                fs[0] = fs[0].scaled(c);
                Structure::TensorProduct(fs)
            }
            Structure::DiagPlusLowRank(f) => {
                let mut f = f.clone();
                f.scale(c);
                Structure::DiagPlusLowRank(f)
            }
        };
        let trace_normalized = self.trace_normalized && c == 1.0;
        DensityOperator {
            space: self.space.clone(),
            structure,
            trace_normalized,
        }
    }

    pub fn to_dense(&self, limit: usize) -> Result<DMatrix<C64>> {
        self.space.check_dense(limit)?;
        Ok(match &self.structure {
            Structure::Dense(m) => m.clone(),
            Structure::Diagonal(d) => DMatrix::from_diagonal(&nalgebra::DVector::from_iterator(
                d.len(),
                d.iter().map(|&x| C64::new(x, 0.0)),
            )),
            Structure::TensorProduct(fs) => {
                let mut m = DMatrix::from_element(1, 1, C64::new(1.0, 0.0));
                for f in fs {
                    m = m.kronecker(&f.to_dense(limit)?);
                }
                m
            }
            Structure::DiagPlusLowRank(f) => f.to_dense(&self.space),
        })
    }

    /// Structured view `W (diag + low rank) W^dag`, when one exists without densifying.
    pub fn to_framed(&self) -> Option<FramedDiag> {
        match &self.structure {
            Structure::Dense(_) => None,
            Structure::Diagonal(d) => Some(FramedDiag {
                frame: Frame::identity(self.space.modes()),
                diag: d.clone(),
                terms: Vec::new(),
            }),
            Structure::DiagPlusLowRank(f) => Some(f.clone()),
            Structure::TensorProduct(fs) => {
                let mut acc: Option<FramedDiag> = None;
                for f in fs {
                    let g = f.to_framed()?;
                    if !g.terms.is_empty() {
                        return None;
                    }
                    acc = Some(match acc {
                        None => g,
                        Some(a) => FramedDiag {
                            frame: a.frame.concat(&g.frame),
                            diag: outer(&a.diag, &g.diag),
                            terms: Vec::new(),
                        },
                    });
                }
                acc
            }
        }
    }

    /// Checks Hermiticity, PSD and trace. Structured operators with at most one
    /// rank-one term are checked without densifying.
    pub fn check_invariants(&self, dense_limit: usize) -> Result<InvariantReport> {
        if let Some(f) = self.to_framed() {
            if f.terms.len() <= 1 {
                let (lo, hi) = match f.terms.first() {
                    None => min_max(&f.diag),
                    Some(t) => {
                        let ev = DiagPlusRankOne::new(f.diag.clone(), t.weight, t.vector.clone())?
                            .solve()?;
                        let vals = ev.eigenvalues();
                        (vals[0], vals[vals.len() - 1])
                    }
                };
                return Ok(InvariantReport {
                    hermitian_deviation: 0.0,
                    min_eigenvalue: lo,
                    max_eigenvalue: hi,
                    trace: f.trace(),
                });
            }
        }
        let m = self.to_dense(dense_limit)?;
        let hermitian_deviation = hermitian_deviation(&m);
        let es = eigh(&m, dense_limit)?;
        let vals = es.eigenvalues();
        Ok(InvariantReport {
            hermitian_deviation,
            min_eigenvalue: vals[0],
            max_eigenvalue: vals[vals.len() - 1],
            trace: trace_of(&m),
        })
    }

    /// Reduced operator on the `keep` modes.
    pub fn partial_trace(&self, keep: &[usize]) -> Result<DensityOperator> {
        self.partial_trace_with_limit(keep, DEFAULT_DENSE_LIMIT)
    }

    pub fn partial_trace_with_limit(&self, keep: &[usize], limit: usize) -> Result<DensityOperator> {
        let keep = self.space.normalize_subset(keep)?;
        if keep.len() == self.space.modes() {
            return Ok(self.clone());
        }
        let kept_space = self.space.select(&keep)?;
        let maps = IndexSplit::new(&self.space, &keep);
        match &self.structure {
            Structure::Diagonal(d) => {
                let mut out = vec![0.0; kept_space.total_dim()];
                for (i, &x) in d.iter().enumerate() {
                    out[maps.kept[i]] += x;
                }
                DensityOperator::diagonal(kept_space, out)
            }
            Structure::TensorProduct(fs) => {
                let mut offset = 0;
                let mut kept_factors = Vec::new();
                let mut scale = 1.0;
                for f in fs {
                    let n = f.space.modes();
                    let local: Vec<usize> = keep
                        .iter()
                        .filter(|&&m| m >= offset && m < offset + n)
                        .map(|&m| m - offset)
                        .collect();
                    if local.is_empty() {
                        scale *= f.trace();
                    } else {
                        kept_factors.push(f.partial_trace_with_limit(&local, limit)?);
                    }
                    offset += n;
                }
                if scale != 1.0 {
                    kept_factors[0] = kept_factors[0].scaled(scale);
                }
                if kept_factors.len() == 1 {
                    Ok(kept_factors.pop().unwrap())
                } else {
                    DensityOperator::tensor(kept_factors)
                }
            }
            Structure::DiagPlusLowRank(f) => {
                let frame = f.frame.select(&keep);
                let mut diag = vec![0.0; kept_space.total_dim()];
                for (i, &x) in f.diag.iter().enumerate() {
                    diag[maps.kept[i]] += x;
                }
                if f.terms.is_empty() {
                    return DensityOperator::framed(
                        kept_space,
                        FramedDiag {
                            frame,
                            diag,
                            terms: Vec::new(),
                        },
                    );
                }
                kept_space.check_dense(limit)?;
                let k = kept_space.total_dim();
                let t = self.space.total_dim() / k;
                let mut m = DMatrix::from_diagonal(&nalgebra::DVector::from_iterator(
                    k,
                    diag.iter().map(|&x| C64::new(x, 0.0)),
                ));
                for term in &f.terms {
                    let mut block = DMatrix::<C64>::zeros(k, t);
                    for (i, &x) in term.vector.iter().enumerate() {
                        block[(maps.kept[i], maps.traced[i])] = x;
                    }
                    m += (&block * block.adjoint()) * C64::new(term.weight, 0.0);
                }
                if !frame.is_identity() {
                    let w = frame.to_dense(&kept_space);
                    m = &w * m * w.adjoint();
                }
                DensityOperator::dense(kept_space, m)
            }
            Structure::Dense(m) => {
                kept_space.check_dense(limit)?;
                let k = kept_space.total_dim();
                let t = self.space.total_dim() / k;
                let mut by_traced: Vec<Vec<(usize, usize)>> = vec![Vec::new(); t];
                for i in 0..self.space.total_dim() {
                    by_traced[maps.traced[i]].push((maps.kept[i], i));
                }
                let mut out = DMatrix::<C64>::zeros(k, k);
                for group in &by_traced {
                    for &(a, i) in group {
                        for &(b, j) in group {
                            out[(a, b)] += m[(i, j)];
                        }
                    }
                }
                DensityOperator::dense(kept_space, out)
            }
        }
    }
}

/// Kept/traced sub-indices for every basis index of a space.
struct IndexSplit {
    kept: Vec<usize>,
    traced: Vec<usize>,
}

impl IndexSplit {
    fn new(space: &SpaceDescriptor, keep: &[usize]) -> Self {
        let modes = space.modes();
        let is_kept: Vec<bool> = (0..modes).map(|m| keep.contains(&m)).collect();
        let mut kept = Vec::with_capacity(space.total_dim());
        let mut traced = Vec::with_capacity(space.total_dim());
        for i in 0..space.total_dim() {
            let (mut a, mut b) = (0usize, 0usize);
            for m in 0..modes {
                let n = space.level(i, m);
                if is_kept[m] {
                    a = a * space.cutoff(m) + n;
                } else {
                    b = b * space.cutoff(m) + n;
                }
            }
            kept.push(a);
            traced.push(b);
        }
        IndexSplit { kept, traced }
    }
}

pub(crate) fn outer(a: &[f64], b: &[f64]) -> Vec<f64> {
    let mut out = Vec::with_capacity(a.len() * b.len());
    for &x in a {
        out.extend(b.iter().map(|&y| x * y));
    }
    out
}

fn min_max(v: &[f64]) -> (f64, f64) {
    v.iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &x| {
            (lo.min(x), hi.max(x))
        })
}

pub fn trace_of(m: &DMatrix<C64>) -> f64 {
    (0..m.nrows()).map(|i| m[(i, i)].re).sum()
}

pub fn hermitian_deviation(m: &DMatrix<C64>) -> f64 {
    let n = m.nrows();
    let mut dev: f64 = 0.0;
    for i in 0..n {
        for j in i..n {
            dev = dev.max((m[(i, j)] - m[(j, i)].conj()).norm());
        }
    }
    dev
}

/// Rejects matrices that are not Hermitian to within `HERMITIAN_TOL`.
pub fn require_hermitian(m: &DMatrix<C64>) -> Result<()> {
    let deviation = hermitian_deviation(m);
    if deviation > HERMITIAN_TOL {
        return Err(Error::NotHermitian { deviation });
    }
    Ok(())
}
