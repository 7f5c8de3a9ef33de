//! Eigensystems of `diag(d) + w v v^dag` through the rank-one secular equation.
//!
//! Coordinates where `v` vanishes are eigenvectors already and are deflated
//! without further work, so the cost is `O(n + k^2)` where `k` is the number
//! of distinct diagonal values touched by `v`. Equal diagonal entries (relative
//! gap below [`DEFLATION_GAP`]) are merged into one coordinate carrying the
//! combined weight; the orthogonal remainder of each merged group keeps the
//! shared diagonal value as its eigenvalue.
//!
//! Roots are located relative to the nearest pole and eigenvectors are built
//! from the Gu-Eisenstat corrected update vector, which keeps them orthogonal
//! even when roots crowd a pole.

use nalgebra::DMatrix;

use super::eigh::support_power;
use crate::error::{Error, Result};
use crate::C64;

/// Relative gap under which two diagonal entries are treated as degenerate.
pub const DEFLATION_GAP: f64 = 1e-13;

const MAX_ITERATIONS: usize = 256;

/// `diag(d) + weight * v v^dag` with real `d` and real `weight`.
#[derive(Clone, Debug)]
pub struct DiagPlusRankOne {
    diag: Vec<f64>,
    weight: f64,
    vector: Vec<C64>,
}

#[derive(Clone, Debug)]
struct Group {
    pole: f64,
    /// (original index, squared share of the group weight)
    members: Vec<(usize, f64)>,
}

/// Solved eigensystem of a [`DiagPlusRankOne`] operator.
#[derive(Clone, Debug)]
pub struct SecularRoot {
    problem: DiagPlusRankOne,
    /// +1, or -1 when the update weight was negative and the problem was negated.
    sign: f64,
    groups: Vec<Group>,
    /// Root j sits at `poles[origin[j]] + offset[j]` (in the possibly negated problem).
    origin: Vec<usize>,
    offset: Vec<f64>,
    /// Column j: normalized eigenvector of root j in group coordinates.
    vectors: Vec<Vec<f64>>,
    active: Vec<bool>,
    eigenvalues: Vec<f64>,
}

impl DiagPlusRankOne {
    pub fn new(diag: Vec<f64>, weight: f64, vector: Vec<C64>) -> Result<Self> {
        if diag.len() != vector.len() {
            return Err(Error::DimensionMismatch {
                expected: diag.len(),
                actual: vector.len(),
            });
        }
        if !weight.is_finite() || diag.iter().any(|d| !d.is_finite()) {
            return Err(Error::param("diag/weight", "non-finite input"));
        }
        Ok(DiagPlusRankOne {
            diag,
            weight,
            vector,
        })
    }

    pub fn dim(&self) -> usize {
        self.diag.len()
    }

    pub fn diag(&self) -> &[f64] {
        &self.diag
    }

    pub fn weight(&self) -> f64 {
        self.weight
    }

    pub fn vector(&self) -> &[C64] {
        &self.vector
    }

    pub fn to_dense(&self) -> DMatrix<C64> {
        let n = self.dim();
        DMatrix::from_fn(n, n, |i, j| {
            let d = if i == j { self.diag[i] } else { 0.0 };
            C64::new(d, 0.0) + self.vector[i] * self.vector[j].conj() * self.weight
        })
    }

    pub fn solve(&self) -> Result<SecularRoot> {
        let sign = if self.weight < 0.0 { -1.0 } else { 1.0 };
        let d: Vec<f64> = self.diag.iter().map(|x| sign * x).collect();
        let z2: Vec<f64> = self.vector.iter().map(|x| x.norm_sqr()).collect();
        let znorm2: f64 = z2.iter().sum();
        let rho = self.weight.abs() * znorm2;
        let n = d.len();

        let mut active = vec![false; n];
        let mut groups: Vec<Group> = Vec::new();
        if rho > 0.0 {
            let scale = d.iter().fold(rho, |m, x| m.max(x.abs()));
            let tol = 8.0 * f64::EPSILON * scale;
            let mut idx: Vec<usize> = (0..n)
                .filter(|&i| z2[i] > 0.0 && rho * (z2[i] / znorm2).sqrt() > tol)
                .collect();
            idx.sort_by(|&a, &b| d[a].total_cmp(&d[b]).then(a.cmp(&b)));
            for i in idx {
                active[i] = true;
                let share = z2[i] / znorm2;
                match groups.last_mut() {
                    Some(g) if degenerate(g.pole, d[i]) => g.members.push((i, share)),
                    _ => groups.push(Group {
                        pole: d[i],
                        members: vec![(i, share)],
                    }),
                }
            }
        }
        // squared group weights, then normalize member shares within each group
        let zg2: Vec<f64> = groups
            .iter()
            .map(|g| g.members.iter().map(|m| m.1).sum())
            .collect();
        for (g, &w) in groups.iter_mut().zip(&zg2) {
            for m in &mut g.members {
                m.1 /= w;
            }
        }
        let poles: Vec<f64> = groups.iter().map(|g| g.pole).collect();
        let k = poles.len();

        let mut origin = Vec::with_capacity(k);
        let mut offset = Vec::with_capacity(k);
        for j in 0..k {
            let (o, tau) = solve_root(&poles, &zg2, rho, j)?;
            origin.push(o);
            offset.push(tau);
        }

        let vectors = eigenvectors(&poles, rho, &origin, &offset);

        let mut eigenvalues = Vec::with_capacity(n);
        for i in 0..n {
            if !active[i] {
                eigenvalues.push(d[i]);
            }
        }
        for g in &groups {
            for _ in 1..g.members.len() {
                eigenvalues.push(g.pole);
            }
        }
        for j in 0..k {
            eigenvalues.push(poles[origin[j]] + offset[j]);
        }
        for e in &mut eigenvalues {
            *e *= sign;
        }
        eigenvalues.sort_by(f64::total_cmp);

        Ok(SecularRoot {
            problem: self.clone(),
            sign,
            groups,
            origin,
            offset,
            vectors,
            active,
            eigenvalues,
        })
    }
}

fn degenerate(a: f64, b: f64) -> bool {
    a == b || (b - a).abs() <= DEFLATION_GAP * a.abs().max(b.abs())
}

/// Secular function `1 + rho * sum z_i^2 / (delta_i - lambda)` with `lambda = delta_o + tau`.
fn secular(poles: &[f64], z2: &[f64], rho: f64, o: usize, tau: f64) -> (f64, f64) {
    let base = poles[o];
    let mut f = 1.0;
    let mut df = 0.0;
    for (i, (&p, &w)) in poles.iter().zip(z2).enumerate() {
        let gap = if i == o { -tau } else { (p - base) - tau };
        let t = w / gap;
        f += rho * t;
        df += rho * t / gap;
    }
    (f, df)
}

fn solve_root(poles: &[f64], z2: &[f64], rho: f64, j: usize) -> Result<(usize, f64)> {
    let k = poles.len();
    let (o, mut lo, mut hi) = if j + 1 < k {
        let gap = poles[j + 1] - poles[j];
        let (fmid, _) = secular(poles, z2, rho, j, 0.5 * gap);
        if fmid >= 0.0 {
            (j, 0.0, 0.5 * gap)
        } else {
            (j + 1, -0.5 * gap, 0.0)
        }
    } else {
        (j, 0.0, rho)
    };
    let mut tau = 0.5 * (lo + hi);
    for _ in 0..MAX_ITERATIONS {
        let (f, df) = secular(poles, z2, rho, o, tau);
        if f == 0.0 {
            return Ok((o, tau));
        }
        if f < 0.0 {
            lo = tau;
        } else {
            hi = tau;
        }
        if hi - lo <= 2.0 * f64::EPSILON * lo.abs().max(hi.abs()) {
            return Ok((o, 0.5 * (lo + hi)));
        }
        let newton = tau - f / df;
        tau = if newton > lo && newton < hi && df.is_finite() && df > 0.0 {
            newton
        } else {
            0.5 * (lo + hi)
        };
        if tau == lo || tau == hi {
            return Ok((o, 0.5 * (lo + hi)));
        }
    }
    Err(Error::SecularNonConvergence {
        index: j,
        lo: poles[o] + lo,
        hi: poles[o] + hi,
        iterations: MAX_ITERATIONS,
    })
}

/// `lambda_j - delta_i`, evaluated relative to the root's own pole.
fn root_minus_pole(poles: &[f64], origin: &[usize], offset: &[f64], j: usize, i: usize) -> f64 {
    let o = origin[j];
    if o == i {
        offset[j]
    } else {
        (poles[o] - poles[i]) + offset[j]
    }
}

fn eigenvectors(poles: &[f64], rho: f64, origin: &[usize], offset: &[f64]) -> Vec<Vec<f64>> {
    let k = poles.len();
    // Gu-Eisenstat: the update vector for which the computed roots are exact
    let zhat: Vec<f64> = (0..k)
        .map(|i| {
            let mut prod = root_minus_pole(poles, origin, offset, i, i) / rho;
            for j in 0..k {
                if j != i {
                    prod *= root_minus_pole(poles, origin, offset, j, i) / (poles[j] - poles[i]);
                }
            }
            prod.abs().sqrt()
        })
        .collect();
    (0..k)
        .map(|j| {
            let mut u: Vec<f64> = (0..k)
                .map(|i| zhat[i] / -root_minus_pole(poles, origin, offset, j, i))
                .collect();
            let norm = u.iter().map(|x| x * x).sum::<f64>().sqrt();
            for x in &mut u {
                *x /= norm;
            }
            u
        })
        .collect()
}

impl SecularRoot {
    pub fn problem(&self) -> &DiagPlusRankOne {
        &self.problem
    }

    /// All eigenvalues, ascending.
    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    /// Eigenvalues produced by the secular solve itself (one per merged pole).
    pub fn secular_roots(&self) -> Vec<f64> {
        (0..self.origin.len())
            .map(|j| self.sign * (self.groups[self.origin[j]].pole + self.offset[j]))
            .collect()
    }

    /// Number of coordinates coupled by the update vector.
    pub fn active_count(&self) -> usize {
        self.active.iter().filter(|&&a| a).count()
    }

    pub fn is_active(&self, i: usize) -> bool {
        self.active[i]
    }

    pub fn max_eigenvalue(&self) -> f64 {
        self.eigenvalues.last().copied().unwrap_or(0.0)
    }

    /// Diagonal entries `f(A)_ii` for the coordinates coupled by the update
    /// vector; every other coordinate has `f(A)_ii = f(d_i)`.
    pub fn active_diagonal(&self, f: impl Fn(f64) -> f64) -> Vec<(usize, f64)> {
        let roots = self.secular_roots();
        let froots: Vec<f64> = roots.iter().map(|&l| f(l)).collect();
        let mut out = Vec::with_capacity(self.active_count());
        for (g, group) in self.groups.iter().enumerate() {
            let fg: f64 = self
                .vectors
                .iter()
                .zip(&froots)
                .map(|(u, fl)| fl * u[g] * u[g])
                .sum();
            let fpole = f(self.sign * group.pole);
            for &(i, share) in &group.members {
                out.push((i, share * fg + (1.0 - share) * fpole));
            }
        }
        out
    }

    /// Full diagonal of `f(A)`.
    pub fn diagonal(&self, f: impl Fn(f64) -> f64) -> Vec<f64> {
        let mut out: Vec<f64> = self.problem.diag.iter().map(|&d| f(d)).collect();
        for (i, v) in self.active_diagonal(&f) {
            out[i] = v;
        }
        out
    }

    /// Diagonal of `A^p` on the support (eigenvalues at or below
    /// `support_tol * lambda_max` map to zero).
    pub fn power_diagonal(&self, p: f64, support_tol: f64) -> Vec<f64> {
        let cut = support_tol * self.max_eigenvalue();
        self.diagonal(|l| support_power(l, p, cut))
    }

    pub fn sqrt_diagonal(&self, support_tol: f64) -> Vec<f64> {
        self.power_diagonal(0.5, support_tol)
    }

    /// Sum of `|lambda|` over the spectrum (trace norm).
    pub fn trace_norm(&self) -> f64 {
        self.eigenvalues.iter().map(|l| l.abs()).sum()
    }

    /// Dense eigenvector matrix (columns ordered like [`Self::eigenvalues`]).
    pub fn eigenvectors_dense(&self) -> DMatrix<C64> {
        let n = self.problem.dim();
        let zero = C64::new(0.0, 0.0);
        let phase = |i: usize| {
            let v = self.problem.vector[i];
            if v.norm() > 0.0 {
                v / v.norm()
            } else {
                C64::new(1.0, 0.0)
            }
        };
        let mut cols: Vec<(f64, Vec<C64>)> = Vec::with_capacity(n);
        for i in 0..n {
            if !self.active[i] {
                let mut v = vec![zero; n];
                v[i] = C64::new(1.0, 0.0);
                cols.push((self.problem.diag[i], v));
            }
        }
        for (u, l) in self.vectors.iter().zip(self.secular_roots()) {
            let mut v = vec![zero; n];
            for (g, group) in self.groups.iter().enumerate() {
                for &(i, share) in &group.members {
                    v[i] = phase(i) * (share.sqrt() * u[g]);
                }
            }
            cols.push((l, v));
        }
        // orthogonal complement of each merged group: Householder reflector
        // sending the group direction to the first member's axis
        for group in &self.groups {
            let r = group.members.len();
            if r < 2 {
                continue;
            }
            let mut w: Vec<f64> = group.members.iter().map(|m| m.1.sqrt()).collect();
            w[0] -= 1.0;
            let wn2: f64 = w.iter().map(|x| x * x).sum();
            for col in 1..r {
                let mut v = vec![zero; n];
                for (t, &(i, _)) in group.members.iter().enumerate() {
                    let delta = if t == col { 1.0 } else { 0.0 };
                    let h = if wn2 > 0.0 {
                        delta - 2.0 * w[t] * w[col] / wn2
                    } else {
                        delta
                    };
                    v[i] = phase(i) * h;
                }
                cols.push((self.sign * group.pole, v));
            }
        }
        cols.sort_by(|a, b| a.0.total_cmp(&b.0));
        DMatrix::from_fn(n, n, |r, c| cols[c].1[r])
    }

    /// Dense `f(A)`.
    pub fn map_dense(&self, f: impl Fn(f64) -> f64) -> DMatrix<C64> {
        let v = self.eigenvectors_dense();
        let n = v.nrows();
        let mut scaled = v.clone();
        for c in 0..n {
            let fl = C64::new(f(self.eigenvalues[c]), 0.0);
            for r in 0..n {
                scaled[(r, c)] *= fl;
            }
        }
        scaled * v.adjoint()
    }

    /// Rank-one interlacing: with sorted base entries `b_i`, a positive update
    /// gives `b_i <= lambda_i <= b_{i+1}` and a negative one the mirror image.
    pub fn interlaces(&self, slack: f64) -> bool {
        let mut base = self.problem.diag.clone();
        base.sort_by(f64::total_cmp);
        let n = base.len();
        let lam = &self.eigenvalues;
        let spread = self.problem.weight.abs()
            * self.problem.vector.iter().map(|x| x.norm_sqr()).sum::<f64>();
        (0..n).all(|i| {
            if self.sign > 0.0 {
                let upper = if i + 1 < n { base[i + 1] } else { base[i] + spread };
                lam[i] >= base[i] - slack && lam[i] <= upper + slack
            } else {
                let lower = if i > 0 { base[i - 1] } else { base[i] - spread };
                lam[i] <= base[i] + slack && lam[i] >= lower - slack
            }
        })
    }
}

/// Square-root eigensystem of `(1 - eta) diag(d) + eta v v^dag`.
pub fn sqrt_diag_plus_rank_one(d: &[f64], eta: f64, v: &[C64]) -> Result<SecularRoot> {
    if let Some(x) = d.iter().find(|&&x| x < 0.0) {
        return Err(Error::param("d", format!("negative diagonal entry {x}")));
    }
    if !(0.0..=1.0).contains(&eta) {
        return Err(Error::param("eta", format!("{eta} is outside [0, 1]")));
    }
    let diag = d.iter().map(|x| (1.0 - eta) * x).collect();
    DiagPlusRankOne::new(diag, eta, v.to_vec())?.solve()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectral::eigh;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    fn max_abs(m: &DMatrix<C64>) -> f64 {
        m.iter().map(|x| x.norm()).fold(0.0, f64::max)
    }

    fn check_against_dense(p: &DiagPlusRankOne, tol: f64) {
        let root = p.solve().unwrap();
        let dense = p.to_dense();
        let es = eigh(&dense, 4096).unwrap();
        for (a, b) in root.eigenvalues().iter().zip(es.eigenvalues()) {
            assert!((a - b).abs() < tol, "{a} vs {b}");
        }
        let v = root.eigenvectors_dense();
        let n = v.nrows();
        assert!(max_abs(&(v.adjoint() * &v - DMatrix::identity(n, n))) < 1e-10);
        assert!(max_abs(&(root.map_dense(|l| l) - &dense)) < tol);
        let diag = root.diagonal(|l| l * l);
        let sq = &dense * &dense;
        for i in 0..n {
            assert!((diag[i] - sq[(i, i)].re).abs() < tol);
        }
        assert!(root.interlaces(1e-12));
    }

    #[test]
    fn commuting_case_closed_form() {
        let n = 5;
        let eta = 0.3;
        let mut v = vec![c(0.0, 0.0); n];
        v[2] = c(1.0, 0.0);
        let root = sqrt_diag_plus_rank_one(&vec![1.0 / n as f64; n], eta, &v).unwrap();
        let base = (1.0 - eta) / n as f64;
        let vals = root.eigenvalues();
        for &l in &vals[..n - 1] {
            assert!((l - base).abs() < 1e-15);
        }
        assert!((vals[n - 1] - (base + eta)).abs() < 1e-15);
        let sq = root.sqrt_diagonal(0.0);
        assert!((sq[2] - (base + eta).sqrt()).abs() < 1e-15);
        assert!((sq[0] - base.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn zero_weight_is_elementwise() {
        let d = [0.1, 0.4, 0.0, 0.5];
        let v = vec![c(0.5, 0.5); 4];
        let root = sqrt_diag_plus_rank_one(&d, 0.0, &v).unwrap();
        let sq = root.sqrt_diagonal(0.0);
        for (a, b) in sq.iter().zip(d) {
            assert!((a - b.sqrt()).abs() < 1e-15);
        }
    }

    #[test]
    fn generic_complex_update() {
        let n = 9;
        let d: Vec<f64> = (0..n).map(|i| 0.05 * (i as f64) + 0.01 * ((i * i) as f64).sin()).collect();
        let v: Vec<C64> = (0..n).map(|i| c((i as f64 + 1.0).cos(), (i as f64).sin())).collect();
        check_against_dense(&DiagPlusRankOne::new(d, 0.7, v).unwrap(), 1e-12);
    }

    #[test]
    fn repeated_entries_and_zero_components() {
        let d = vec![0.0, 0.0, 0.2, 0.2, 0.2, 0.5, 0.0, 0.7];
        let v = vec![
            c(0.3, 0.0),
            c(0.0, 0.4),
            c(0.1, 0.1),
            c(0.0, 0.0),
            c(-0.5, 0.0),
            c(0.0, 0.0),
            c(0.2, -0.2),
            c(0.6, 0.0),
        ];
        let p = DiagPlusRankOne::new(d, 0.9, v).unwrap();
        check_against_dense(&p, 1e-12);
        assert_eq!(p.solve().unwrap().active_count(), 6);
    }

    #[test]
    fn negative_weight_and_signed_diagonal() {
        let d = vec![-0.3, 0.1, 0.1, 0.4, -0.05];
        let v = vec![c(0.2, 0.1), c(0.5, 0.0), c(0.0, 0.3), c(0.1, 0.0), c(0.7, 0.7)];
        check_against_dense(&DiagPlusRankOne::new(d.clone(), -0.6, v.clone()).unwrap(), 1e-12);
        check_against_dense(&DiagPlusRankOne::new(d, 0.6, v).unwrap(), 1e-12);
    }

    #[test]
    fn crowded_poles() {
        let n = 40;
        let d: Vec<f64> = (0..n).map(|i| 1.0 + 1e-9 * i as f64).collect();
        let v: Vec<C64> = (0..n).map(|i| c(1e-3 * (1.0 + i as f64).sqrt(), 0.0)).collect();
        let p = DiagPlusRankOne::new(d, 1.0, v).unwrap();
        let root = p.solve().unwrap();
        let v = root.eigenvectors_dense();
        assert!(max_abs(&(v.adjoint() * &v - DMatrix::identity(n, n))) < 1e-10);
        assert!(root.interlaces(1e-12));
        assert!(max_abs(&(root.map_dense(|l| l) - p.to_dense())) < 1e-12);
    }

    #[test]
    fn rejects_bad_inputs() {
        assert!(sqrt_diag_plus_rank_one(&[-0.1, 0.5], 0.1, &[c(1.0, 0.0), c(0.0, 0.0)]).is_err());
        assert!(sqrt_diag_plus_rank_one(&[0.1, 0.5], 1.5, &[c(1.0, 0.0), c(0.0, 0.0)]).is_err());
        assert!(DiagPlusRankOne::new(vec![0.1], 1.0, vec![]).is_err());
    }
}
