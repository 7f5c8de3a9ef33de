use super::space::SpaceDescriptor;
use crate::error::{Error, Result};
use crate::C64;

const NORM_TOL: f64 = 1e-12;

/// Unit-norm state vector over a truncated Fock basis.
#[derive(Clone, Debug)]
pub struct Ket {
    space: SpaceDescriptor,
    amplitudes: Vec<C64>,
}

impl Ket {
    /// Wraps amplitudes that are already normalized to within 1e-12.
    pub fn new(space: SpaceDescriptor, amplitudes: Vec<C64>) -> Result<Self> {
        check_len(&space, &amplitudes)?;
        let norm = l2_norm(&amplitudes);
        if (norm - 1.0).abs() > NORM_TOL {
            return Err(Error::NotNormalized { norm });
        }
        Ok(Ket { space, amplitudes })
    }

    /// Rescales arbitrary nonzero amplitudes to unit norm.
    pub fn normalized(space: SpaceDescriptor, mut amplitudes: Vec<C64>) -> Result<Self> {
        check_len(&space, &amplitudes)?;
        let norm = l2_norm(&amplitudes);
        if norm == 0.0 || !norm.is_finite() {
            return Err(Error::ZeroNorm);
        }
        for a in &mut amplitudes {
            *a /= norm;
        }
        Ok(Ket { space, amplitudes })
    }

    pub fn basis(space: SpaceDescriptor, occupation: &[usize]) -> Result<Self> {
        let idx = space.index_of(occupation)?;
        let mut amplitudes = vec![C64::new(0.0, 0.0); space.total_dim()];
        amplitudes[idx] = C64::new(1.0, 0.0);
        Ok(Ket { space, amplitudes })
    }

    pub fn space(&self) -> &SpaceDescriptor {
        &self.space
    }

    pub fn amplitudes(&self) -> &[C64] {
        &self.amplitudes
    }

    pub fn into_amplitudes(self) -> Vec<C64> {
        self.amplitudes
    }

    pub fn amplitude(&self, occupation: &[usize]) -> Result<C64> {
        Ok(self.amplitudes[self.space.index_of(occupation)?])
    }

    pub fn norm(&self) -> f64 {
        l2_norm(&self.amplitudes)
    }

    /// `<self|other>`.
    pub fn inner(&self, other: &Ket) -> Result<C64> {
        if self.space != other.space {
            return Err(Error::DimensionMismatch {
                expected: self.space.total_dim(),
                actual: other.space.total_dim(),
            });
        }
        Ok(self
            .amplitudes
            .iter()
            .zip(&other.amplitudes)
            .map(|(a, b)| a.conj() * b)
            .sum())
    }

    /// Euclidean distance `|| self - other ||`.
    pub fn distance(&self, other: &Ket) -> Result<f64> {
        if self.space != other.space {
            return Err(Error::DimensionMismatch {
                expected: self.space.total_dim(),
                actual: other.space.total_dim(),
            });
        }
        Ok(self
            .amplitudes
            .iter()
            .zip(&other.amplitudes)
            .map(|(a, b)| (a - b).norm_sqr())
            .sum::<f64>()
            .sqrt())
    }

    /// Nonzero amplitudes as (occupation, amplitude) pairs in basis order.
    pub fn support(&self, threshold: f64) -> Vec<(Vec<usize>, C64)> {
        self.amplitudes
            .iter()
            .enumerate()
            .filter(|(_, a)| a.norm() > threshold)
            .map(|(i, &a)| (self.space.occupation(i), a))
            .collect()
    }
}

fn check_len(space: &SpaceDescriptor, amplitudes: &[C64]) -> Result<()> {
    if amplitudes.len() != space.total_dim() {
        return Err(Error::DimensionMismatch {
            expected: space.total_dim(),
            actual: amplitudes.len(),
        });
    }
    Ok(())
}

pub(crate) fn l2_norm(v: &[C64]) -> f64 {
    v.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt()
}

/// Tensor product of kets whose spaces concatenate to `target`.
pub fn tensor_ket(factors: &[Ket], target: &SpaceDescriptor) -> Result<Ket> {
    let mut cutoffs = Vec::new();
    for f in factors {
        cutoffs.extend_from_slice(f.space.cutoffs());
    }
    if cutoffs != target.cutoffs() {
        return Err(Error::DimensionMismatch {
            expected: target.total_dim(),
            actual: cutoffs.iter().product(),
        });
    }
    let mut amplitudes = vec![C64::new(1.0, 0.0)];
    for f in factors {
        let mut next = Vec::with_capacity(amplitudes.len() * f.amplitudes.len());
        for a in &amplitudes {
            next.extend(f.amplitudes.iter().map(|b| a * b));
        }
        amplitudes = next;
    }
    Ok(Ket {
        space: target.clone(),
        amplitudes,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fock::build_space;

    fn single(cutoff: usize, amps: &[C64]) -> Ket {
        let s = build_space(1, &[cutoff]).unwrap();
        let mut v = vec![C64::new(0.0, 0.0); cutoff];
        v[..amps.len()].copy_from_slice(amps);
        Ket::normalized(s, v).unwrap()
    }

    #[test]
    fn vacuum_and_triple_one() {
        let target = build_space(3, &[2, 2, 2]).unwrap();
        let z = single(2, &[C64::new(1.0, 0.0)]);
        let one = single(2, &[C64::new(0.0, 0.0), C64::new(1.0, 0.0)]);

        let vac = tensor_ket(&[z.clone(), z.clone(), z], &target).unwrap();
        assert_eq!(vac.amplitudes()[0], C64::new(1.0, 0.0));
        assert!((vac.norm() - 1.0).abs() < 1e-15);

        let t = tensor_ket(&[one.clone(), one.clone(), one], &target).unwrap();
        assert_eq!(t.amplitude(&[1, 1, 1]).unwrap(), C64::new(1.0, 0.0));
        assert_eq!(target.index_of(&[1, 1, 1]).unwrap(), 7);
    }

    #[test]
    fn bilinear_in_first_factor() {
        let (alpha, beta) = (C64::new(0.6, 0.0), C64::new(0.0, 0.8));
        let target = build_space(2, &[2, 3]).unwrap();
        let first = single(2, &[alpha, beta]);
        let zero = single(3, &[C64::new(1.0, 0.0)]);
        let k = tensor_ket(&[first, zero], &target).unwrap();
        assert!((k.amplitude(&[0, 0]).unwrap() - alpha).norm() < 1e-15);
        assert!((k.amplitude(&[1, 0]).unwrap() - beta).norm() < 1e-15);
        assert!((k.norm() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn mismatch_is_rejected() {
        let target = build_space(2, &[2, 2]).unwrap();
        let z = single(3, &[C64::new(1.0, 0.0)]);
        assert!(tensor_ket(&[z.clone(), z], &target).is_err());
    }

    #[test]
    fn normalization_checks() {
        let s = build_space(1, &[2]).unwrap();
        assert!(Ket::new(s.clone(), vec![C64::new(1.0, 0.0), C64::new(1.0, 0.0)]).is_err());
        assert!(Ket::normalized(s.clone(), vec![C64::new(0.0, 0.0); 2]).is_err());
        let k = Ket::normalized(s, vec![C64::new(3.0, 0.0), C64::new(0.0, 4.0)]).unwrap();
        assert!((k.norm() - 1.0).abs() < 1e-12);
    }
}
