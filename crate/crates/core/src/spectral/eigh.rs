use nalgebra::{DMatrix, SymmetricEigen};

use crate::error::{Error, Result};
use crate::fock::{hermitian_deviation, DensityOperator, PSD_REL_TOL};
use crate::C64;

/// Absolute Hermiticity tolerance accepted by the dense eigensolver.
pub const HERMITIAN_TOL: f64 = 1e-10;

/// Eigenvalues at or below `DEFAULT_SUPPORT_TOL * lambda_max` count as zero.
pub const DEFAULT_SUPPORT_TOL: f64 = 1e-12;

/// Eigendecomposition `A = V diag(lambda) V^dag` with ascending eigenvalues.
#[derive(Clone, Debug)]
pub struct EigenSystem {
    values: Vec<f64>,
    vectors: DMatrix<C64>,
}

/// Dense Hermitian eigensolver (Householder tridiagonalization followed by
/// implicit QR sweeps). The sweep order is fixed, so results are bit-stable
/// for a given build.
///
/// Off-diagonal entries below `eps * max|m_ij|` are dropped and the matrix is
/// split into its connected blocks, each solved on its own. Rounding residue
/// of that size cannot move an eigenvalue by more than rounding does, and it
/// is exactly the input on which the underlying QR occasionally returns NaN.
pub fn eigh(m: &DMatrix<C64>, dense_limit: usize) -> Result<EigenSystem> {
    let n = m.nrows();
    if m.ncols() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            actual: m.ncols(),
        });
    }
    if n > dense_limit {
        return Err(Error::DenseLimit {
            dim: n,
            limit: dense_limit,
        });
    }
    let deviation = hermitian_deviation(m);
    if deviation > HERMITIAN_TOL {
        return Err(Error::NotHermitian { deviation });
    }
    let sym = (m + m.adjoint()) * C64::new(0.5, 0.0);
    let scale = sym.iter().fold(0.0f64, |a, z| a.max(z.norm()));
    let cut = f64::EPSILON * scale;

    let mut values = Vec::with_capacity(n);
    let mut vectors = DMatrix::<C64>::zeros(n, n);
    let mut col = 0;
    for block in blocks(&sym, cut) {
        let k = block.len();
        let sub = DMatrix::from_fn(k, k, |i, j| {
            let z = sym[(block[i], block[j])];
            if i != j && z.norm() <= cut {
                C64::new(0.0, 0.0)
            } else {
                z
            }
        });
        let eig = SymmetricEigen::new(sub);
        if eig.eigenvalues.iter().any(|x| !x.is_finite()) {
            return Err(Error::EigenFailure { block: k });
        }
        for c in 0..k {
            values.push(eig.eigenvalues[c]);
            for (r, &row) in block.iter().enumerate() {
                vectors[(row, col + c)] = eig.eigenvectors[(r, c)];
            }
        }
        col += k;
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let sorted = order.iter().map(|&i| values[i]).collect();
    let vectors = DMatrix::from_fn(n, n, |r, c| vectors[(r, order[c])]);
    Ok(EigenSystem {
        values: sorted,
        vectors,
    })
}

/// Connected components of the pattern `|m_ij| > cut`, each sorted, ordered
/// by smallest index.
fn blocks(m: &DMatrix<C64>, cut: f64) -> Vec<Vec<usize>> {
    let n = m.nrows();
    let mut parent: Vec<usize> = (0..n).collect();
    fn find(p: &mut [usize], mut i: usize) -> usize {
        while p[i] != i {
            p[i] = p[p[i]];
            i = p[i];
        }
        i
    }
    for j in 0..n {
        for i in (j + 1)..n {
            if m[(i, j)].norm() > cut {
                let (a, b) = (find(&mut parent, i), find(&mut parent, j));
                if a != b {
                    parent[a.max(b)] = a.min(b);
                }
            }
        }
    }
    let mut groups: Vec<Vec<usize>> = Vec::new();
    let mut slot = vec![usize::MAX; n];
    for i in 0..n {
        let r = find(&mut parent, i);
        if slot[r] == usize::MAX {
            slot[r] = groups.len();
            groups.push(Vec::new());
        }
        groups[slot[r]].push(i);
    }
    groups
}

impl EigenSystem {
    pub fn eigenvalues(&self) -> &[f64] {
        &self.values
    }

    pub fn eigenvectors(&self) -> &DMatrix<C64> {
        &self.vectors
    }

    pub fn dim(&self) -> usize {
        self.values.len()
    }

    pub fn max_eigenvalue(&self) -> f64 {
        self.values.last().copied().unwrap_or(0.0)
    }

    /// `V diag(f(lambda)) V^dag`.
    pub fn map(&self, f: impl Fn(f64) -> f64) -> DMatrix<C64> {
        let n = self.dim();
        let mut scaled = self.vectors.clone();
        for (c, &l) in self.values.iter().enumerate() {
            let fl = C64::new(f(l), 0.0);
            for r in 0..n {
                scaled[(r, c)] *= fl;
            }
        }
        scaled * self.vectors.adjoint()
    }

    pub fn reconstruct(&self) -> DMatrix<C64> {
        self.map(|l| l)
    }

    /// Rejects spectra with an eigenvalue below `-PSD_REL_TOL * lambda_max`.
    pub fn require_psd(&self) -> Result<()> {
        let max = self.max_eigenvalue();
        let min = self.values.first().copied().unwrap_or(0.0);
        if min < -PSD_REL_TOL * max.max(0.0) {
            return Err(Error::NotPsd { min, max });
        }
        Ok(())
    }

    /// Eigenvalues mapped through `lambda -> lambda^s` on the support.
    pub fn powered_eigenvalues(&self, s: f64, support_tol: f64) -> Result<Vec<f64>> {
        self.require_psd()?;
        let cut = support_tol * self.max_eigenvalue();
        Ok(self.values.iter().map(|&l| support_power(l, s, cut)).collect())
    }

    pub fn power(&self, s: f64, support_tol: f64) -> Result<DMatrix<C64>> {
        self.require_psd()?;
        let cut = support_tol * self.max_eigenvalue();
        Ok(self.map(|l| support_power(l, s, cut)))
    }
}

/// `lambda^s` restricted to the support: anything at or below `cut` maps to 0,
/// including under `s = 0` (so `rho^0` is the support projector).
pub fn support_power(lambda: f64, s: f64, cut: f64) -> f64 {
    if lambda <= cut || lambda <= 0.0 {
        0.0
    } else if s == 0.0 {
        1.0
    } else if s == 1.0 {
        lambda
    } else {
        lambda.powf(s)
    }
}

fn check_exponent(s: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&s) {
        return Err(Error::param("s", format!("{s} is outside [0, 1]")));
    }
    Ok(())
}

/// `rho^s` through the dense eigensolver, with the support convention `0^0 = 0`.
pub fn matrix_power(
    rho: &DensityOperator,
    s: f64,
    support_tol: f64,
    dense_limit: usize,
) -> Result<DMatrix<C64>> {
    check_exponent(s)?;
    let m = rho.to_dense(dense_limit)?;
    eigh(&m, dense_limit)?.power(s, support_tol)
}

#[derive(Clone, Copy, Debug)]
pub struct TraceProduct {
    pub value: f64,
    pub imag_residue: f64,
}

/// `Re Tr(AB)`; the imaginary part is returned as a residue for diagnostics.
pub fn trace_product(a: &DMatrix<C64>, b: &DMatrix<C64>) -> Result<TraceProduct> {
    if a.nrows() != b.ncols() || a.ncols() != b.nrows() {
        return Err(Error::DimensionMismatch {
            expected: a.nrows(),
            actual: b.ncols(),
        });
    }
    let mut acc = C64::new(0.0, 0.0);
    for i in 0..a.nrows() {
        for j in 0..a.ncols() {
            acc += a[(i, j)] * b[(j, i)];
        }
    }
    Ok(TraceProduct {
        value: acc.re,
        imag_residue: acc.im.abs(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fock::build_space;

    fn c(re: f64) -> C64 {
        C64::new(re, 0.0)
    }

    fn max_abs(m: &DMatrix<C64>) -> f64 {
        m.iter().map(|x| x.norm()).fold(0.0, f64::max)
    }

    #[test]
    fn diagonal_sorted() {
        let m = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![c(3.0), c(1.0), c(2.0)]));
        let es = eigh(&m, 16).unwrap();
        assert_eq!(es.eigenvalues(), &[1.0, 2.0, 3.0]);
    }

    #[test]
    fn rounding_residue_is_finite() {
        // sparse rank-two operator with ~1e-20 residue that once produced NaN
        let mut m = DMatrix::<C64>::zeros(128, 128);
        let mut set = |i: usize, j: usize, z: C64| {
            m[(i, j)] = z;
            m[(j, i)] = z.conj();
        };
        set(0, 0, c(0.9975020826390129));
        set(9, 9, c(4.2334003048664227e-23));
        set(64, 64, c(0.002373021492937761));
        set(73, 73, c(0.0001248958680493559));
        set(64, 0, C64::new(0.0, -0.047420872907243374));
        set(73, 0, C64::new(0.0, -0.0024958354161707043));
        set(9, 0, c(5.421010862427522e-20));
        set(64, 9, C64::new(0.0, -8.459743766333482e-22));
        set(73, 64, c(-2.710505431213761e-20));
        let es = eigh(&m, 256).unwrap();
        assert!(es.eigenvalues().iter().all(|x| x.is_finite()));
        assert!((es.eigenvalues().iter().sum::<f64>() - 1.0).abs() < 1e-14);
        assert!(max_abs(&(es.reconstruct() - &m)) < 1e-15);
    }

    #[test]
    fn pauli_x() {
        let m = DMatrix::from_row_slice(2, 2, &[c(0.0), c(1.0), c(1.0), c(0.0)]);
        let es = eigh(&m, 16).unwrap();
        assert!((es.eigenvalues()[0] + 1.0).abs() < 1e-15);
        assert!((es.eigenvalues()[1] - 1.0).abs() < 1e-15);
    }

    #[test]
    fn reconstruction_and_unitarity() {
        let n = 12;
        let m = DMatrix::from_fn(n, n, |i, j| {
            let (a, b) = (i as f64, j as f64);
            if i == j {
                c(a * 0.3)
            } else {
                C64::new((a + b).sin(), (a - b).cos() * if i < j { 1.0 } else { -1.0 })
            }
        });
        let m = (&m + m.adjoint()) * c(0.5);
        let es = eigh(&m, 64).unwrap();
        assert!(max_abs(&(es.reconstruct() - &m)) <= 1e-10 * max_abs(&m));
        let v = es.eigenvectors();
        assert!(max_abs(&(v.adjoint() * v - DMatrix::identity(n, n))) < 1e-10);
        assert!(es.eigenvalues().windows(2).all(|w| w[0] <= w[1]));
    }

    #[test]
    fn rejects_non_hermitian_and_oversize() {
        let m = DMatrix::from_row_slice(2, 2, &[c(0.0), c(1.0), c(0.0), c(0.0)]);
        assert!(matches!(eigh(&m, 16), Err(Error::NotHermitian { .. })));
        let big = DMatrix::<C64>::identity(20, 20);
        assert!(matches!(eigh(&big, 10), Err(Error::DenseLimit { .. })));
    }

    #[test]
    fn power_conventions() {
        let s = build_space(1, &[3]).unwrap();
        let rho = DensityOperator::diagonal(s.clone(), vec![0.5, 0.5, 0.0]).unwrap();
        let p0 = matrix_power(&rho, 0.0, DEFAULT_SUPPORT_TOL, 16).unwrap();
        assert!((p0[(0, 0)].re - 1.0).abs() < 1e-15);
        assert!((p0[(1, 1)].re - 1.0).abs() < 1e-15);
        assert!(p0[(2, 2)].norm() < 1e-15);

        let p1 = matrix_power(&rho, 1.0, DEFAULT_SUPPORT_TOL, 16).unwrap();
        assert!(max_abs(&(p1 - rho.to_dense(16).unwrap())) < 1e-15);

        assert!(matrix_power(&rho, 1.5, DEFAULT_SUPPORT_TOL, 16).is_err());
    }

    #[test]
    fn projector_is_fixed_by_powers() {
        let s = build_space(1, &[3]).unwrap();
        let k = crate::fock::Ket::normalized(s, vec![c(1.0), C64::new(0.0, 1.0), c(-1.0)]).unwrap();
        let p = DensityOperator::pure(&k);
        let pd = p.to_dense(16).unwrap();
        for s in [0.1, 0.5, 0.9, 1.0] {
            let ps = matrix_power(&p, s, DEFAULT_SUPPORT_TOL, 16).unwrap();
            assert!(max_abs(&(ps - &pd)) < 1e-12);
        }
    }

    #[test]
    fn negative_spectrum_rejected() {
        let m = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![c(1.0), c(-0.1)]));
        let es = eigh(&m, 4).unwrap();
        assert!(matches!(es.power(0.5, DEFAULT_SUPPORT_TOL), Err(Error::NotPsd { .. })));
    }

    #[test]
    fn trace_products() {
        let s = build_space(1, &[2]).unwrap();
        let a = crate::fock::Ket::normalized(s.clone(), vec![c(1.0), c(0.0)]).unwrap();
        let b = crate::fock::Ket::normalized(s, vec![c(1.0), C64::new(0.0, 1.0)]).unwrap();
        let pa = DensityOperator::pure(&a).to_dense(4).unwrap();
        let pb = DensityOperator::pure(&b).to_dense(4).unwrap();
        let t = trace_product(&pa, &pb).unwrap();
        assert!((t.value - a.inner(&b).unwrap().norm_sqr()).abs() < 1e-15);
        assert!(t.imag_residue < 1e-15);
        let id = DMatrix::<C64>::identity(2, 2);
        assert!((trace_product(&pb, &id).unwrap().value - 1.0).abs() < 1e-15);
        assert!(trace_product(&pa, &DMatrix::<C64>::identity(3, 3)).is_err());
    }
}
