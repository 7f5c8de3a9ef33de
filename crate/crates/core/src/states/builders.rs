use nalgebra::{DMatrix, SymmetricEigen};

use super::params::{flat_levels, BackgroundVariant, IdlerVariant, ProtocolParams};
use crate::error::{Error, Result};
use crate::fock::{
    build_space, outer, DensityOperator, Frame, FramedDiag, Ket, RankOneTerm, SpaceDescriptor,
};
use crate::C64;

/// Default bound on the top-level population of a truncated evolution chain.
pub const DEFAULT_LEAK_TOL: f64 = 1e-6;

/// `cos(theta)|000> - i sin(theta)|111>` on a three-mode space.
pub fn three_photon_state(theta: f64, space: &SpaceDescriptor) -> Result<Ket> {
    if space.modes() != 3 {
        return Err(Error::InvalidSpace(format!(
            "three-photon state needs 3 modes, got {}",
            space.modes()
        )));
    }
    if space.cutoffs().iter().any(|&c| c < 2) {
        return Err(Error::InvalidSpace("every mode needs cutoff >= 2".into()));
    }
    let mut amps = vec![C64::new(0.0, 0.0); space.total_dim()];
    amps[0] = C64::new(theta.cos(), 0.0);
    amps[space.index_of(&[1, 1, 1])?] = C64::new(0.0, -theta.sin());
    Ket::new(space.clone(), amps)
}

/// Result of evolving `|000>` along the `|nnn>` chain.
#[derive(Clone, Debug)]
pub struct EvolvedState {
    pub ket: Ket,
    /// Amplitudes of `|nnn>` for `n = 0..chain_cutoff`.
    pub chain: Vec<C64>,
    /// Population of the highest retained chain level.
    pub leakage: f64,
}

/// Exact evolution of `|000>` under `a1 a2 a3 + h.c.` for a time with `g t = gt`,
/// restricted to the invariant chain `{|nnn>}` truncated at `chain_cutoff` levels.
///
/// On the chain the Hamiltonian is tridiagonal with couplings
/// `<n+1,n+1,n+1| H |nnn> = (n+1)^{3/2}` (units of `hbar g`).
pub fn evolve_exact(gt: f64, chain_cutoff: usize) -> Result<EvolvedState> {
    evolve_exact_with_tol(gt, chain_cutoff, DEFAULT_LEAK_TOL)
}

pub fn evolve_exact_with_tol(gt: f64, chain_cutoff: usize, leak_tol: f64) -> Result<EvolvedState> {
    if chain_cutoff < 4 {
        return Err(Error::param("chain_cutoff", "must be at least 4"));
    }
    if !gt.is_finite() {
        return Err(Error::param("gt", "must be finite"));
    }
    let c = chain_cutoff;
    let h = DMatrix::<f64>::from_fn(c, c, |i, j| {
        if j == i + 1 {
            (j as f64).powf(1.5)
        } else if i == j + 1 {
            (i as f64).powf(1.5)
        } else {
            0.0
        }
    });
    let eig = SymmetricEigen::new(h);
    let chain: Vec<C64> = (0..c)
        .map(|n| {
            (0..c)
                .map(|k| {
                    let w = eig.eigenvectors[(0, k)] * eig.eigenvectors[(n, k)];
                    C64::from_polar(w, -gt * eig.eigenvalues[k])
                })
                .sum()
        })
        .collect();
    let leakage = chain[c - 1].norm_sqr();
    if leakage > leak_tol {
        return Err(Error::Truncation {
            what: "evolution chain top level",
            leaked: leakage,
            bound: leak_tol,
        });
    }
    let space = build_space(3, &[c, c, c])?;
    let mut amps = vec![C64::new(0.0, 0.0); space.total_dim()];
    for (n, &a) in chain.iter().enumerate() {
        amps[space.index_of(&[n, n, n])?] = a;
    }
    let ket = Ket::normalized(space, amps)?;
    Ok(EvolvedState {
        ket,
        chain,
        leakage,
    })
}

/// `<psi| a^dag a |psi>` on one mode.
pub fn mean_photon_number(ket: &Ket, mode: usize) -> Result<f64> {
    let space = ket.space();
    space.check_mode(mode)?;
    Ok(ket
        .amplitudes()
        .iter()
        .enumerate()
        .map(|(i, a)| space.level(i, mode) as f64 * a.norm_sqr())
        .sum())
}

/// Truncated, renormalized Bose-Einstein state.
#[derive(Clone, Debug)]
pub struct ThermalState {
    pub probabilities: Vec<f64>,
    /// Probability mass above the cutoff before renormalization.
    pub tail_mass: f64,
}

impl ThermalState {
    pub fn operator(&self) -> DensityOperator {
        let space = build_space(1, &[self.probabilities.len()]).expect("nonzero cutoff");
        DensityOperator::diagonal(space, self.probabilities.clone()).expect("matching length")
    }
}

/// `p_n = nbar^n / (nbar+1)^(n+1)` on `0..cutoff`, renormalized; fails when
/// the discarded tail exceeds `tail_bound`.
pub fn thermal_state(nbar: f64, cutoff: usize, tail_bound: f64) -> Result<ThermalState> {
    if !(nbar > 0.0) || !nbar.is_finite() {
        return Err(Error::param("nbar", format!("{nbar} must be > 0")));
    }
    if cutoff == 0 {
        return Err(Error::param("cutoff", "must be >= 1"));
    }
    let q = nbar / (nbar + 1.0);
    let p0 = 1.0 / (nbar + 1.0);
    let tail_mass = q.powi(cutoff as i32);
    if tail_mass > tail_bound {
        return Err(Error::Truncation {
            what: "thermal tail",
            leaked: tail_mass,
            bound: tail_bound,
        });
    }
    let mut probabilities = Vec::with_capacity(cutoff);
    let mut p = p0;
    for _ in 0..cutoff {
        probabilities.push(p);
        p *= q;
    }
    let total: f64 = probabilities.iter().sum();
    for x in &mut probabilities {
        *x /= total;
    }
    Ok(ThermalState {
        probabilities,
        tail_mass,
    })
}

/// Two-mode background on the signal modes.
#[derive(Clone, Debug)]
pub struct Background {
    pub variant: BackgroundVariant,
    /// Per-mode occupation probabilities (each sums to 1).
    pub marginals: [Vec<f64>; 2],
    /// Thermal tail mass dropped per mode (zero for the flat variant).
    pub tail_masses: [f64; 2],
    /// Number of populated levels per mode for the flat variant.
    pub flat_levels: Option<[usize; 2]>,
}

impl Background {
    /// Joint probabilities over the two signal modes, mode 1 slowest.
    pub fn joint(&self) -> Vec<f64> {
        outer(&self.marginals[0], &self.marginals[1])
    }

    pub fn operator(&self) -> Result<DensityOperator> {
        let f = |p: &Vec<f64>| {
            DensityOperator::diagonal(build_space(1, &[p.len()])?, p.clone())
        };
        DensityOperator::tensor(vec![f(&self.marginals[0])?, f(&self.marginals[1])?])
    }
}

pub fn background_state(params: &ProtocolParams) -> Result<Background> {
    params.validate()?;
    let c = params.resolved_cutoffs()?;
    match params.background {
        BackgroundVariant::Thermal => {
            let a = thermal_state(params.nbar2, c[1], params.tail_bound)?;
            let b = thermal_state(params.nbar3, c[2], params.tail_bound)?;
            Ok(Background {
                variant: BackgroundVariant::Thermal,
                tail_masses: [a.tail_mass, b.tail_mass],
                marginals: [a.probabilities, b.probabilities],
                flat_levels: None,
            })
        }
        BackgroundVariant::Flat => {
            let levels = [flat_levels(params.nbar2), flat_levels(params.nbar3)];
            let mut marginals: [Vec<f64>; 2] = [Vec::new(), Vec::new()];
            for m in 0..2 {
                if levels[m] > c[m + 1] {
                    return Err(Error::param(
                        "cutoffs",
                        format!(
                            "flat background needs {} levels on signal mode {}, cutoff is {}",
                            levels[m],
                            m + 1,
                            c[m + 1]
                        ),
                    ));
                }
                let w = 1.0 / levels[m] as f64;
                marginals[m] = (0..c[m + 1])
                    .map(|n| if n < levels[m] { w } else { 0.0 })
                    .collect();
            }
            Ok(Background {
                variant: BackgroundVariant::Flat,
                marginals,
                tail_masses: [0.0, 0.0],
                flat_levels: Some(levels),
            })
        }
    }
}

/// Half trace distance between two probability vectors of equal length.
pub fn classical_trace_distance(p: &[f64], q: &[f64]) -> Result<f64> {
    if p.len() != q.len() {
        return Err(Error::DimensionMismatch {
            expected: p.len(),
            actual: q.len(),
        });
    }
    Ok(0.5 * p.iter().zip(q).map(|(a, b)| (a - b).abs()).sum::<f64>())
}

/// Idler rotation `[[cos, -i sin], [-i sin, cos]]` embedded in an idler mode of
/// `cutoff` levels.
pub fn idler_rotation(theta: f64, cutoff: usize) -> DMatrix<C64> {
    let (s, c) = theta.sin_cos();
    let mut u = DMatrix::<C64>::identity(cutoff, cutoff);
    u[(0, 0)] = C64::new(c, 0.0);
    u[(0, 1)] = C64::new(0.0, -s);
    u[(1, 0)] = C64::new(0.0, -s);
    u[(1, 1)] = C64::new(c, 0.0);
    u
}

/// The two hypotheses with everything needed to evaluate them structurally.
#[derive(Clone, Debug)]
pub struct HypothesisPair {
    pub params: ProtocolParams,
    pub rho0: DensityOperator,
    pub rho1: DensityOperator,
    pub background: Background,
    /// Signal-idler state `|Psi>` (mode 0 idler, modes 1 and 2 signal returns).
    pub psi: Ket,
}

impl HypothesisPair {
    pub fn build(params: &ProtocolParams) -> Result<Self> {
        params.validate()?;
        let space = params.space()?;
        let background = background_state(params)?;
        let psi = three_photon_state(params.theta, &space)?;

        let ci = space.cutoff(0);
        let (frame, idler_diag) = match params.idler {
            IdlerVariant::PaperPure => {
                let mut d = vec![0.0; ci];
                d[0] = 1.0;
                (
                    Frame::identity(3).with_mode(0, idler_rotation(params.theta, ci)),
                    d,
                )
            }
            IdlerVariant::Traced => {
                let (s, c) = params.theta.sin_cos();
                let mut d = vec![0.0; ci];
                d[0] = c * c;
                d[1] = s * s;
                (Frame::identity(3), d)
            }
        };
        let base = outer(&idler_diag, &background.joint());

        let rho0 = DensityOperator::framed(
            space.clone(),
            FramedDiag {
                frame: frame.clone(),
                diag: base.clone(),
                terms: Vec::new(),
            },
        )?;

        let eta = params.eta;
        let mut terms = Vec::new();
        if eta > 0.0 {
            let mut v = psi.amplitudes().to_vec();
            frame.apply_adjoint(&space, &mut v);
            terms.push(RankOneTerm {
                weight: eta,
                vector: v,
            });
        }
        let rho1 = DensityOperator::framed(
            space,
            FramedDiag {
                frame,
                diag: base.iter().map(|x| (1.0 - eta) * x).collect(),
                terms,
            },
        )?;
        Ok(HypothesisPair {
            params: params.clone(),
            rho0,
            rho1,
            background,
            psi,
        })
    }
}

/// Target-absent hypothesis: idler state tensored with the background.
pub fn hypothesis_h0(params: &ProtocolParams) -> Result<DensityOperator> {
    Ok(HypothesisPair::build(params)?.rho0)
}

/// Target-present hypothesis `(1 - eta) rho0 + eta |Psi><Psi|`.
pub fn hypothesis_h1(params: &ProtocolParams) -> Result<DensityOperator> {
    Ok(HypothesisPair::build(params)?.rho1)
}
