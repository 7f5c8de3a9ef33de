use nalgebra::DMatrix;

use super::space::SpaceDescriptor;
use crate::error::{Error, Result};
use crate::C64;

/// Sparse operator stored as (row, col, value) triplets sorted by row then column.
#[derive(Clone, Debug)]
pub struct SparseOperator {
    dim: usize,
    entries: Vec<(usize, usize, C64)>,
}

impl SparseOperator {
    pub fn from_triplets(dim: usize, mut entries: Vec<(usize, usize, C64)>) -> Self {
        entries.sort_by_key(|&(r, c, _)| (r, c));
        SparseOperator { dim, entries }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn entries(&self) -> &[(usize, usize, C64)] {
        &self.entries
    }

    pub fn apply(&self, v: &[C64]) -> Result<Vec<C64>> {
        if v.len() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                actual: v.len(),
            });
        }
        let mut out = vec![C64::new(0.0, 0.0); self.dim];
        for &(r, c, x) in &self.entries {
            out[r] += x * v[c];
        }
        Ok(out)
    }

    pub fn adjoint(&self) -> SparseOperator {
        let entries = self
            .entries
            .iter()
            .map(|&(r, c, x)| (c, r, x.conj()))
            .collect();
        SparseOperator::from_triplets(self.dim, entries)
    }

    /// Operator product `self * rhs`.
    pub fn compose(&self, rhs: &SparseOperator) -> Result<SparseOperator> {
        if rhs.dim != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                actual: rhs.dim,
            });
        }
        let mut by_row: Vec<Vec<(usize, C64)>> = vec![Vec::new(); rhs.dim];
        for &(r, c, x) in &rhs.entries {
            by_row[r].push((c, x));
        }
        let mut acc = std::collections::BTreeMap::new();
        for &(r, k, x) in &self.entries {
            for &(c, y) in &by_row[k] {
                *acc.entry((r, c)).or_insert(C64::new(0.0, 0.0)) += x * y;
            }
        }
        let entries = acc.into_iter().map(|((r, c), x)| (r, c, x)).collect();
        Ok(SparseOperator::from_triplets(self.dim, entries))
    }

    pub fn to_dense(&self) -> DMatrix<C64> {
        let mut m = DMatrix::zeros(self.dim, self.dim);
        for &(r, c, x) in &self.entries {
            m[(r, c)] += x;
        }
        m
    }
}

/// Annihilation operator on one mode: `a|n> = sqrt(n)|n-1>`, identity on the others.
///
/// The top level of the truncated mode maps down like any other level; there is
/// no state above the cutoff for `a^dag` to populate, so `a^dag` simply drops it.
pub fn annihilation(space: &SpaceDescriptor, mode: usize) -> Result<SparseOperator> {
    space.check_mode(mode)?;
    let stride = space.strides()[mode];
    let entries = (0..space.total_dim())
        .filter_map(|col| {
            let n = space.level(col, mode);
            (n > 0).then(|| (col - stride, col, C64::new((n as f64).sqrt(), 0.0)))
        })
        .collect();
    Ok(SparseOperator::from_triplets(space.total_dim(), entries))
}

pub fn creation(space: &SpaceDescriptor, mode: usize) -> Result<SparseOperator> {
    Ok(annihilation(space, mode)?.adjoint())
}

/// Number operator `a^dag a` on one mode (diagonal).
pub fn number_operator(space: &SpaceDescriptor, mode: usize) -> Result<SparseOperator> {
    space.check_mode(mode)?;
    let entries = (0..space.total_dim())
        .filter_map(|i| {
            let n = space.level(i, mode);
            (n > 0).then(|| (i, i, C64::new(n as f64, 0.0)))
        })
        .collect();
    Ok(SparseOperator::from_triplets(space.total_dim(), entries))
}
