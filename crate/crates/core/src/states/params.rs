use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::fock::{build_space, SpaceDescriptor};
use crate::report::Record;

/// Default bound on the thermal probability mass dropped by truncation.
pub const DEFAULT_TAIL_BOUND: f64 = 1e-8;

/// Largest per-mode cutoff the automatic selection will return.
pub const MAX_AUTO_CUTOFF: usize = 4096;

/// Ratio that `a >> b` must reach for a regime flag to hold.
pub const DEFAULT_DOMINANCE: f64 = 4.0;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum BackgroundVariant {
    /// Product of two Bose-Einstein distributions.
    Thermal,
    /// Uniform weight over the first `round(nbar)` levels of each signal mode.
    Flat,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum IdlerVariant {
    /// Pure idler `cos t |0> - i sin t |1>`.
    PaperPure,
    /// Reduced idler `diag(cos^2 t, sin^2 t)`.
    Traced,
}

impl FromStr for BackgroundVariant {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "thermal" => Ok(BackgroundVariant::Thermal),
            "flat" => Ok(BackgroundVariant::Flat),
            other => Err(Error::Parse(format!("unknown background `{other}` (thermal|flat)"))),
        }
    }
}

impl fmt::Display for BackgroundVariant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            BackgroundVariant::Thermal => "thermal",
            BackgroundVariant::Flat => "flat",
        })
    }
}

impl FromStr for IdlerVariant {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "paper-pure" | "paper_pure" | "pure" => Ok(IdlerVariant::PaperPure),
            "traced" => Ok(IdlerVariant::Traced),
            other => Err(Error::Parse(format!("unknown idler `{other}` (paper-pure|traced)"))),
        }
    }
}

impl fmt::Display for IdlerVariant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            IdlerVariant::PaperPure => "paper-pure",
            IdlerVariant::Traced => "traced",
        })
    }
}

/// Validity-regime indicators for the closed-form three-photon bound.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct RegimeFlags {
    /// `nbar >> 1`
    pub high_noise: bool,
    /// `theta << 1`
    pub small_theta: bool,
    /// `eta << 1`
    pub small_eta: bool,
    /// `eta >> 1 / nbar^2`
    pub eta_vs_invn2: bool,
}

impl RegimeFlags {
    pub fn all(&self) -> bool {
        self.high_noise && self.small_theta && self.small_eta && self.eta_vs_invn2
    }

    pub fn as_pairs(&self) -> [(&'static str, bool); 4] {
        [
            ("high_noise", self.high_noise),
            ("small_theta", self.small_theta),
            ("small_eta", self.small_eta),
            ("eta_vs_invn2", self.eta_vs_invn2),
        ]
    }

    /// Names of the flags that do not hold.
    pub fn violations(&self) -> Vec<&'static str> {
        self.as_pairs()
            .iter()
            .filter(|(_, ok)| !ok)
            .map(|(n, _)| *n)
            .collect()
    }
}

/// Parameters of one protocol point.
#[derive(Clone, Debug, PartialEq)]
pub struct ProtocolParams {
    /// Interaction strength `g t`.
    pub theta: f64,
    /// Target reflectivity.
    pub eta: f64,
    pub nbar2: f64,
    pub nbar3: f64,
    /// Explicit (idler, signal, signal) cutoffs; `None` selects them from the background.
    pub cutoffs: Option<[usize; 3]>,
    pub background: BackgroundVariant,
    pub idler: IdlerVariant,
    /// Two-mode transmissivity; defaults to `sqrt(eta)`.
    pub kappa: Option<f64>,
    /// Two-mode signal photon number; defaults to `theta^2`.
    pub signal_photons: Option<f64>,
    /// Largest thermal tail mass a truncation may drop.
    pub tail_bound: f64,
    pub dominance: f64,
}

impl Default for ProtocolParams {
    fn default() -> Self {
        ProtocolParams {
            theta: 0.01,
            eta: 0.01,
            nbar2: 50.0,
            nbar3: 50.0,
            cutoffs: None,
            background: BackgroundVariant::Flat,
            idler: IdlerVariant::PaperPure,
            kappa: None,
            signal_photons: None,
            tail_bound: DEFAULT_TAIL_BOUND,
            dominance: DEFAULT_DOMINANCE,
        }
    }
}

impl ProtocolParams {
    pub fn validate(&self) -> Result<()> {
        if !self.theta.is_finite() || self.theta < 0.0 {
            return Err(Error::param("theta", format!("{} must be finite and >= 0", self.theta)));
        }
        if !(0.0..=1.0).contains(&self.eta) {
            return Err(Error::param("eta", format!("{} is outside [0, 1]", self.eta)));
        }
        for (name, n) in [("nbar2", self.nbar2), ("nbar3", self.nbar3)] {
            if !n.is_finite() || n <= 0.0 {
                return Err(Error::param(name, format!("{n} must be > 0")));
            }
        }
        if let Some(c) = self.cutoffs {
            if c.iter().any(|&x| x < 2) {
                return Err(Error::param("cutoffs", "every mode needs at least 2 levels"));
            }
        }
        if let Some(k) = self.kappa {
            if !(k > 0.0 && k <= 1.0) {
                return Err(Error::param("kappa", format!("{k} is outside (0, 1]")));
            }
        }
        if let Some(ns) = self.signal_photons {
            if !(ns > 0.0) {
                return Err(Error::param("ns", format!("{ns} must be > 0")));
            }
        }
        if !(self.tail_bound > 0.0) {
            return Err(Error::param("tail_bound", "must be > 0"));
        }
        Ok(())
    }

    /// Single background occupation used by closed-form expressions: the
    /// geometric mean of the two signal-mode occupations.
    pub fn nbar(&self) -> f64 {
        (self.nbar2 * self.nbar3).sqrt()
    }

    pub fn kappa(&self) -> f64 {
        self.kappa.unwrap_or_else(|| self.eta.sqrt())
    }

    pub fn signal_photons(&self) -> f64 {
        self.signal_photons.unwrap_or(self.theta * self.theta)
    }

    pub fn regime_flags(&self) -> RegimeFlags {
        let k = self.dominance;
        let nbar = self.nbar();
        RegimeFlags {
            high_noise: nbar >= k,
            small_theta: self.theta * k <= 1.0,
            small_eta: self.eta * k <= 1.0,
            eta_vs_invn2: self.eta * nbar * nbar >= k,
        }
    }

    /// Per-mode cutoffs, resolving automatic selection.
    pub fn resolved_cutoffs(&self) -> Result<[usize; 3]> {
        if let Some(c) = self.cutoffs {
            return Ok(c);
        }
        Ok([
            2,
            auto_cutoff(self.background, self.nbar2, self.tail_bound)?,
            auto_cutoff(self.background, self.nbar3, self.tail_bound)?,
        ])
    }

    pub fn space(&self) -> Result<SpaceDescriptor> {
        let c = self.resolved_cutoffs()?;
        build_space(3, &c)
    }

    /// Applies one `key=value` setting. Returns `Ok(false)` for unknown keys.
    pub fn set(&mut self, key: &str, value: &str) -> Result<bool> {
        let v = value.trim();
        match key.trim() {
            "theta" => self.theta = parse_f64(key, v)?,
            "eta" => self.eta = parse_f64(key, v)?,
            "nbar" => {
                let n = parse_f64(key, v)?;
                self.nbar2 = n;
                self.nbar3 = n;
            }
            "nbar2" => self.nbar2 = parse_f64(key, v)?,
            "nbar3" => self.nbar3 = parse_f64(key, v)?,
            "cutoff" => {
                if v == "auto" {
                    self.cutoffs = None;
                } else {
                    let c = parse_usize(key, v)?;
                    let idler = self.cutoffs.map_or(2, |x| x[0]);
                    self.cutoffs = Some([idler, c, c]);
                }
            }
            "cutoffs" => {
                let parts: Vec<usize> = v
                    .split(',')
                    .map(|p| parse_usize(key, p))
                    .collect::<Result<_>>()?;
                let arr: [usize; 3] = parts
                    .try_into()
                    .map_err(|_| Error::Parse("cutoffs needs three comma-separated values".into()))?;
                self.cutoffs = Some(arr);
            }
            "background" => self.background = v.parse()?,
            "idler" => self.idler = v.parse()?,
            "kappa" => self.kappa = Some(parse_f64(key, v)?),
            "ns" | "signal_photons" => self.signal_photons = Some(parse_f64(key, v)?),
            "tail_bound" => self.tail_bound = parse_f64(key, v)?,
            "dominance" => self.dominance = parse_f64(key, v)?,
            _ => return Ok(false),
        }
        Ok(true)
    }

    /// Appends the parameter fields (resolved cutoffs when they resolve).
    pub fn write_record(&self, r: &mut Record) {
        r.num("theta", self.theta);
        r.num("eta", self.eta);
        r.num("nbar2", self.nbar2);
        r.num("nbar3", self.nbar3);
        r.num("nbar", self.nbar());
        if let Ok(c) = self.resolved_cutoffs() {
            r.list("cutoffs", c.iter().map(|&x| x as f64).collect());
        }
        r.text("background", &self.background.to_string());
        r.text("idler", &self.idler.to_string());
        r.num("kappa", self.kappa());
        r.num("ns", self.signal_photons());
    }

    /// Parses a plain `key=value` preset; `#` starts a comment.
    pub fn from_config_str(text: &str) -> Result<Self> {
        let mut p = ProtocolParams::default();
        for (line_no, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line.split_once('=').ok_or_else(|| Error::Config {
                line: line_no + 1,
                reason: format!("expected key=value, got `{line}`"),
            })?;
            let known = p.set(k, v).map_err(|e| Error::Config {
                line: line_no + 1,
                reason: e.to_string(),
            })?;
            if !known {
                return Err(Error::Config {
                    line: line_no + 1,
                    reason: format!("unknown key `{}`", k.trim()),
                });
            }
        }
        p.validate()?;
        Ok(p)
    }
}

pub fn parse_f64(key: &str, v: &str) -> Result<f64> {
    v.trim()
        .parse::<f64>()
        .map_err(|_| Error::Parse(format!("{key}: `{v}` is not a number")))
}

pub fn parse_usize(key: &str, v: &str) -> Result<usize> {
    v.trim()
        .parse::<usize>()
        .map_err(|_| Error::Parse(format!("{key}: `{v}` is not a non-negative integer")))
}

/// Number of flat-background levels for a mean occupation.
pub fn flat_levels(nbar: f64) -> usize {
    (nbar.round() as usize).max(1)
}

/// Smallest thermal cutoff with tail mass `(nbar/(nbar+1))^c` below `tail_bound`.
pub fn thermal_cutoff(nbar: f64, tail_bound: f64) -> Result<usize> {
    let q = nbar / (nbar + 1.0);
    let mut c = if tail_bound >= 1.0 {
        2
    } else {
        (tail_bound.ln() / q.ln()).ceil().max(2.0) as usize
    };
    // guard the ceil against rounding on either side
    while c > 2 && q.powi(c as i32 - 1) < tail_bound {
        c -= 1;
    }
    while q.powi(c as i32) >= tail_bound {
        c += 1;
    }
    if c > MAX_AUTO_CUTOFF {
        return Err(Error::Truncation {
            what: "automatic cutoff",
            leaked: q.powi(MAX_AUTO_CUTOFF as i32),
            bound: tail_bound,
        });
    }
    Ok(c)
}

fn auto_cutoff(bg: BackgroundVariant, nbar: f64, tail_bound: f64) -> Result<usize> {
    match bg {
        BackgroundVariant::Thermal => thermal_cutoff(nbar, tail_bound),
        BackgroundVariant::Flat => {
            let k = flat_levels(nbar).max(2);
            if k > MAX_AUTO_CUTOFF {
                return Err(Error::param("nbar", format!("flat background needs {k} levels")));
            }
            Ok(k)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn config_round() {
        let p = ProtocolParams::from_config_str(
            "# preset\ntheta = 0.1\neta=0.05\nnbar=3\ncutoff=6\nbackground=thermal\nidler=traced\n",
        )
        .unwrap();
        assert_eq!(p.theta, 0.1);
        assert_eq!(p.nbar2, 3.0);
        assert_eq!(p.cutoffs, Some([2, 6, 6]));
        assert_eq!(p.background, BackgroundVariant::Thermal);
        assert_eq!(p.idler, IdlerVariant::Traced);
        assert!(ProtocolParams::from_config_str("bogus=1").is_err());
        assert!(ProtocolParams::from_config_str("eta=2").is_err());
        assert!(ProtocolParams::from_config_str("theta").is_err());
    }

    #[test]
    fn thermal_cutoff_is_smallest() {
        for nbar in [0.5, 1.0, 3.0, 5.0, 20.0] {
            let c = thermal_cutoff(nbar, 1e-8).unwrap();
            let q = nbar / (nbar + 1.0);
            assert!(q.powi(c as i32) < 1e-8);
            assert!(c == 2 || q.powi(c as i32 - 1) >= 1e-8);
        }
        assert!(thermal_cutoff(1e4, 1e-8).is_err());
    }

    #[test]
    fn regime_flags() {
        let p = ProtocolParams {
            theta: 0.01,
            eta: 0.01,
            nbar2: 20.0,
            nbar3: 20.0,
            ..Default::default()
        };
        assert!(p.regime_flags().all());
        let q = ProtocolParams {
            eta: 1e-3,
            ..p.clone()
        };
        assert_eq!(q.regime_flags().violations(), vec!["eta_vs_invn2"]);
    }

    #[test]
    fn identifications_default() {
        let p = ProtocolParams {
            theta: 0.1,
            eta: 0.04,
            ..Default::default()
        };
        assert!((p.kappa() - 0.2).abs() < 1e-15);
        assert!((p.signal_photons() - 0.01).abs() < 1e-15);
    }
}
