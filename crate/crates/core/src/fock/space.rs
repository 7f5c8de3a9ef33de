use crate::error::{Error, Result};

/// Default ceiling on the dimension of any operator materialized as a dense matrix.
pub const DEFAULT_DENSE_LIMIT: usize = 4096;

/// Default ceiling on the dimension of structured (diagonal-backed) operators.
pub const DEFAULT_STRUCTURED_LIMIT: usize = 1 << 25;

/// Truncated multimode Fock space.
///
/// Mode `m` holds the levels `0..cutoffs[m]`. Basis states are laid out
/// row-major with mode 0 slowest, so the occupation tuple `(n_0, ..., n_{k-1})`
/// sits at `sum_m n_m * strides[m]`. This ordering is frozen: golden files
/// depend on it.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct SpaceDescriptor {
    cutoffs: Vec<usize>,
    strides: Vec<usize>,
    total_dim: usize,
}

impl SpaceDescriptor {
    pub fn new(cutoffs: &[usize]) -> Result<Self> {
        build_space(cutoffs.len(), cutoffs)
    }

    pub fn modes(&self) -> usize {
        self.cutoffs.len()
    }

    pub fn cutoffs(&self) -> &[usize] {
        &self.cutoffs
    }

    pub fn cutoff(&self, mode: usize) -> usize {
        self.cutoffs[mode]
    }

    pub fn strides(&self) -> &[usize] {
        &self.strides
    }

    pub fn total_dim(&self) -> usize {
        self.total_dim
    }

    pub fn check_mode(&self, mode: usize) -> Result<()> {
        if mode >= self.modes() {
            return Err(Error::InvalidMode {
                mode,
                modes: self.modes(),
            });
        }
        Ok(())
    }

    /// Rejects the space for dense work if it exceeds `limit`.
    pub fn check_dense(&self, limit: usize) -> Result<()> {
        if self.total_dim > limit {
            return Err(Error::DenseLimit {
                dim: self.total_dim,
                limit,
            });
        }
        Ok(())
    }

    pub fn check_structured(&self, limit: usize) -> Result<()> {
        if self.total_dim > limit {
            return Err(Error::StructuredLimit {
                dim: self.total_dim,
                limit,
            });
        }
        Ok(())
    }

    pub fn index_of(&self, occupation: &[usize]) -> Result<usize> {
        if occupation.len() != self.modes() {
            return Err(Error::DimensionMismatch {
                expected: self.modes(),
                actual: occupation.len(),
            });
        }
        let mut idx = 0;
        for (m, (&n, &c)) in occupation.iter().zip(&self.cutoffs).enumerate() {
            if n >= c {
                return Err(Error::InvalidSpace(format!(
                    "level {n} on mode {m} is outside cutoff {c}"
                )));
            }
            idx += n * self.strides[m];
        }
        Ok(idx)
    }

    pub fn occupation(&self, index: usize) -> Vec<usize> {
        debug_assert!(index < self.total_dim);
        self.cutoffs
            .iter()
            .zip(&self.strides)
            .map(|(&c, &s)| (index / s) % c)
            .collect()
    }

    /// Occupation of a single mode at a basis index.
    pub fn level(&self, index: usize, mode: usize) -> usize {
        (index / self.strides[mode]) % self.cutoffs[mode]
    }

    /// Space of `self` followed by the modes of `other`.
    pub fn concat(&self, other: &SpaceDescriptor) -> Result<SpaceDescriptor> {
        let mut cutoffs = self.cutoffs.clone();
        cutoffs.extend_from_slice(&other.cutoffs);
        SpaceDescriptor::new(&cutoffs)
    }

    /// Subspace spanned by the listed modes (ascending, unique).
    pub fn select(&self, modes: &[usize]) -> Result<SpaceDescriptor> {
        let cutoffs: Vec<usize> = modes.iter().map(|&m| self.cutoffs[m]).collect();
        SpaceDescriptor::new(&cutoffs)
    }

    /// Validates a mode subset and returns it sorted.
    pub fn normalize_subset(&self, modes: &[usize]) -> Result<Vec<usize>> {
        if modes.is_empty() {
            return Err(Error::InvalidSpace("empty mode subset".into()));
        }
        let mut out = modes.to_vec();
        out.sort_unstable();
        out.dedup();
        if out.len() != modes.len() {
            return Err(Error::InvalidSpace("repeated mode in subset".into()));
        }
        for &m in &out {
            self.check_mode(m)?;
        }
        Ok(out)
    }
}

/// Builds a validated space descriptor.
pub fn build_space(modes: usize, cutoffs: &[usize]) -> Result<SpaceDescriptor> {
    if modes == 0 {
        return Err(Error::InvalidSpace("at least one mode is required".into()));
    }
    if cutoffs.len() != modes {
        return Err(Error::DimensionMismatch {
            expected: modes,
            actual: cutoffs.len(),
        });
    }
    if let Some(m) = cutoffs.iter().position(|&c| c == 0) {
        return Err(Error::InvalidSpace(format!("mode {m} has a zero cutoff")));
    }
    let total_dim = cutoffs
        .iter()
        .try_fold(1usize, |acc, &c| acc.checked_mul(c))
        .ok_or_else(|| Error::InvalidSpace("total dimension overflows".into()))?;
    let mut strides = vec![1usize; modes];
    for m in (0..modes.saturating_sub(1)).rev() {
        strides[m] = strides[m + 1] * cutoffs[m + 1];
    }
    Ok(SpaceDescriptor {
        cutoffs: cutoffs.to_vec(),
        strides,
        total_dim,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn total_dims() {
        assert_eq!(build_space(3, &[2, 2, 2]).unwrap().total_dim(), 8);
        assert_eq!(build_space(1, &[5]).unwrap().total_dim(), 5);
        assert_eq!(build_space(3, &[2, 6, 6]).unwrap().total_dim(), 72);
    }

    #[test]
    fn rejects_bad_inputs() {
        assert!(build_space(0, &[]).is_err());
        assert!(build_space(2, &[3, 0]).is_err());
        assert!(build_space(2, &[3]).is_err());
        let s = build_space(2, &[100, 100]).unwrap();
        assert!(s.check_dense(4096).is_err());
        assert!(s.check_dense(10_000).is_ok());
    }

    #[test]
    fn mode_zero_is_slowest() {
        let s = build_space(3, &[2, 3, 4]).unwrap();
        assert_eq!(s.index_of(&[0, 0, 1]).unwrap(), 1);
        assert_eq!(s.index_of(&[0, 1, 0]).unwrap(), 4);
        assert_eq!(s.index_of(&[1, 0, 0]).unwrap(), 12);
        assert_eq!(s.occupation(23), vec![1, 2, 3]);
        assert!(s.index_of(&[2, 0, 0]).is_err());
    }

    #[test]
    fn index_bijection() {
        let s = build_space(3, &[2, 6, 5]).unwrap();
        for i in 0..s.total_dim() {
            let occ = s.occupation(i);
            assert_eq!(s.index_of(&occ).unwrap(), i);
            for m in 0..3 {
                assert_eq!(s.level(i, m), occ[m]);
            }
        }
    }

    #[test]
    fn subsets() {
        let s = build_space(3, &[2, 3, 4]).unwrap();
        assert_eq!(s.normalize_subset(&[2, 0]).unwrap(), vec![0, 2]);
        assert!(s.normalize_subset(&[]).is_err());
        assert!(s.normalize_subset(&[1, 1]).is_err());
        assert!(s.normalize_subset(&[3]).is_err());
        assert_eq!(s.select(&[1, 2]).unwrap().total_dim(), 12);
    }
}
