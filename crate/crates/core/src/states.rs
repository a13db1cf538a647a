//! Photon-number statistics for the state families under comparison.
//!
//! Every detection scheme analysed here is diagonal in the number basis, so
//! a state is fully described by its photon-number distribution ρ_nn.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::{ln_factorial, CompensatedSum};

/// Default tail bound for truncated distributions.
pub const DEFAULT_TAIL_BOUND: f64 = 1e-12;

/// Largest photon number a truncated distribution may reach.
pub const MAX_PHOTON_NUMBER: usize = 4096;

/// Declarative description of a single-mode state.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum StateSpec {
    Coherent {
        mean_photons: f64,
    },
    /// Displaced squeezed state with total mean photon number `total_mean_photons`
    /// of which the fraction `squeezing_fraction` is carried by squeezing.
    Squeezed {
        total_mean_photons: f64,
        squeezing_fraction: f64,
    },
    Fock {
        n: usize,
    },
    Thermal {
        mean_photons: f64,
    },
    Custom {
        weights: Vec<f64>,
    },
}

impl StateSpec {
    pub fn vacuum() -> Self {
        StateSpec::Fock { n: 0 }
    }

    pub fn coherent(mean_photons: f64) -> Self {
        StateSpec::Coherent { mean_photons }
    }

    pub fn squeezed(total_mean_photons: f64, squeezing_fraction: f64) -> Self {
        StateSpec::Squeezed {
            total_mean_photons,
            squeezing_fraction,
        }
    }

    pub fn fock(n: usize) -> Self {
        StateSpec::Fock { n }
    }

    pub fn thermal(mean_photons: f64) -> Self {
        StateSpec::Thermal { mean_photons }
    }

    pub fn validate(&self) -> Result<()> {
        let non_negative = |field: &str, v: f64| {
            if v.is_finite() && v >= 0.0 {
                Ok(())
            } else {
                Err(Error::invalid(field, format!("expected a finite value ≥ 0, got {v}")))
            }
        };
        match self {
            StateSpec::Coherent { mean_photons } | StateSpec::Thermal { mean_photons } => {
                non_negative("N", *mean_photons)
            }
            StateSpec::Squeezed {
                total_mean_photons,
                squeezing_fraction,
            } => {
                non_negative("N", *total_mean_photons)?;
                if !(0.0..=1.0).contains(squeezing_fraction) {
                    return Err(Error::invalid(
                        "beta",
                        format!("expected a value in [0, 1], got {squeezing_fraction}"),
                    ));
                }
                Ok(())
            }
            StateSpec::Fock { n } => {
                if *n > MAX_PHOTON_NUMBER {
                    Err(Error::invalid("n", format!("exceeds the cap of {MAX_PHOTON_NUMBER}")))
                } else {
                    Ok(())
                }
            }
            StateSpec::Custom { weights } => {
                if weights.is_empty() {
                    return Err(Error::invalid("weights", "at least one weight is required"));
                }
                if weights.len() > MAX_PHOTON_NUMBER + 1 {
                    return Err(Error::invalid("weights", format!("more than {} entries", MAX_PHOTON_NUMBER + 1)));
                }
                if let Some(w) = weights.iter().find(|w| !(w.is_finite() && **w >= 0.0)) {
                    return Err(Error::invalid("weights", format!("entry {w} is not a finite value ≥ 0")));
                }
                let total: CompensatedSum = weights.iter().copied().collect();
                if (total.value() - 1.0).abs() > 1e-12 {
                    return Err(Error::invalid(
                        "weights",
                        format!("must sum to 1 within 1e-12, sum is {}", total.value()),
                    ));
                }
                Ok(())
            }
        }
    }
}

/// Grammar: whitespace-separated `key=value` tokens.
///
/// ```text
/// kind=coherent N=<mean>
/// kind=thermal  N=<mean>
/// kind=squeezed N=<total mean> beta=<squeezing fraction>
/// kind=fock     n=<photon number>
/// kind=custom   weights=<w0>,<w1>,...
/// ```
impl FromStr for StateSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let mut kind = None;
        let mut mean = None;
        let mut beta = None;
        let mut number = None;
        let mut weights = None;
        for token in s.split_whitespace() {
            let (key, value) = token
                .split_once('=')
                .ok_or_else(|| Error::invalid(token, "expected key=value"))?;
            let real = |field: &str| {
                value
                    .parse::<f64>()
                    .map_err(|_| Error::invalid(field, format!("expected a number, got `{value}`")))
            };
            match key {
                "kind" => kind = Some(value.to_ascii_lowercase()),
                "N" => mean = Some(real("N")?),
                "beta" => beta = Some(real("beta")?),
                "n" => {
                    number = Some(value.parse::<usize>().map_err(|_| {
                        Error::invalid("n", format!("expected a nonnegative integer, got `{value}`"))
                    })?)
                }
                "weights" => {
                    let parsed = value
                        .split(',')
                        .map(|w| {
                            w.parse::<f64>()
                                .map_err(|_| Error::invalid("weights", format!("expected a number, got `{w}`")))
                        })
                        .collect::<Result<Vec<_>>>()?;
                    weights = Some(parsed);
                }
                other => return Err(Error::invalid(other, "unknown key")),
            }
        }
        let kind = kind.ok_or_else(|| Error::invalid("kind", "missing"))?;
        let need = |v: Option<f64>, field: &str| v.ok_or_else(|| Error::invalid(field, "missing"));
        let spec = match kind.as_str() {
            "coherent" => StateSpec::Coherent { mean_photons: need(mean, "N")? },
            "thermal" => StateSpec::Thermal { mean_photons: need(mean, "N")? },
            "squeezed" => StateSpec::Squeezed {
                total_mean_photons: need(mean, "N")?,
                squeezing_fraction: need(beta, "beta")?,
            },
            "fock" => StateSpec::Fock {
                n: number.ok_or_else(|| Error::invalid("n", "missing"))?,
            },
            "vacuum" => StateSpec::vacuum(),
            "custom" => StateSpec::Custom {
                weights: weights.ok_or_else(|| Error::invalid("weights", "missing"))?,
            },
            other => return Err(Error::invalid("kind", format!("unknown state kind `{other}`"))),
        };
        spec.validate()?;
        Ok(spec)
    }
}

impl fmt::Display for StateSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            StateSpec::Coherent { mean_photons } => write!(f, "kind=coherent N={mean_photons:?}"),
            StateSpec::Thermal { mean_photons } => write!(f, "kind=thermal N={mean_photons:?}"),
            StateSpec::Squeezed {
                total_mean_photons,
                squeezing_fraction,
            } => write!(f, "kind=squeezed N={total_mean_photons:?} beta={squeezing_fraction:?}"),
            StateSpec::Fock { n } => write!(f, "kind=fock n={n}"),
            StateSpec::Custom { weights } => {
                write!(f, "kind=custom weights=")?;
                for (i, w) in weights.iter().enumerate() {
                    if i > 0 {
                        write!(f, ",")?;
                    }
                    write!(f, "{w:?}")?;
                }
                Ok(())
            }
        }
    }
}

/// Truncated photon-number distribution.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhotonStatistics {
    rho: Vec<f64>,
    tail_bound: f64,
}

impl PhotonStatistics {
    /// Wraps an explicit distribution; `tail_bound` is the mass allowed to be
    /// missing from `rho`.
    pub fn new(rho: Vec<f64>, tail_bound: f64) -> Result<Self> {
        if rho.is_empty() {
            return Err(Error::invalid("rho", "empty distribution"));
        }
        if let Some(w) = rho.iter().find(|w| !(w.is_finite() && **w >= 0.0)) {
            return Err(Error::invalid("rho", format!("entry {w} is not a finite value ≥ 0")));
        }
        let total: CompensatedSum = rho.iter().copied().collect();
        let total = total.value();
        if total < 1.0 - tail_bound - 1e-14 || total > 1.0 + 1e-12 {
            return Err(Error::invalid(
                "rho",
                format!("total mass {total} outside [1 - {tail_bound:e}, 1]"),
            ));
        }
        Ok(Self { rho, tail_bound })
    }

    pub fn vacuum() -> Self {
        Self {
            rho: vec![1.0],
            tail_bound: 0.0,
        }
    }

    /// ρ_nn for n = 0..=n_max.
    pub fn rho(&self) -> &[f64] {
        &self.rho
    }

    pub fn n_max(&self) -> usize {
        self.rho.len() - 1
    }

    pub fn tail_bound(&self) -> f64 {
        self.tail_bound
    }

    pub fn total_mass(&self) -> f64 {
        self.rho.iter().copied().collect::<CompensatedSum>().value()
    }
}

/// First two photon-number moments.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Moments {
    pub mean: f64,
    pub mean_sq: f64,
    pub variance: f64,
}

pub fn moments(stats: &PhotonStatistics) -> Moments {
    let mut first = CompensatedSum::new();
    let mut second = CompensatedSum::new();
    for (n, &p) in stats.rho.iter().enumerate() {
        let n = n as f64;
        first.add(n * p);
        second.add(n * n * p);
    }
    let mean = first.value();
    let mean_sq = second.value();
    Moments {
        mean,
        mean_sq,
        variance: mean_sq - mean * mean,
    }
}

/// Photon-number distribution of `spec`, truncated once the accumulated
/// mass reaches 1 − `tail_bound`.
///
/// The squeezed family uses coherent amplitude α = √((1−β)N) and squeezing
/// sinh²r = βN, both real, with the displacement along the anti-squeezed
/// quadrature. Its mean photon number is N for every β.
pub fn photon_distribution(spec: &StateSpec, tail_bound: f64) -> Result<PhotonStatistics> {
    if !(tail_bound > 0.0 && tail_bound <= 1e-6) {
        return Err(Error::invalid("tail_bound", format!("must lie in (0, 1e-6], got {tail_bound}")));
    }
    spec.validate()?;
    let rho = match spec {
        StateSpec::Fock { n } => {
            let mut rho = vec![0.0; n + 1];
            rho[*n] = 1.0;
            rho
        }
        StateSpec::Custom { weights } => weights.clone(),
        StateSpec::Coherent { mean_photons } => {
            let mean = *mean_photons;
            if mean == 0.0 {
                vec![1.0]
            } else {
                let ln_mean = mean.ln();
                accumulate(tail_bound, |n| (-mean + n as f64 * ln_mean - ln_factorial(n as u64)).exp())?
            }
        }
        StateSpec::Thermal { mean_photons } => {
            let mean = *mean_photons;
            if mean == 0.0 {
                vec![1.0]
            } else {
                let ratio = mean / (mean + 1.0);
                let ln_ratio = ratio.ln();
                accumulate(tail_bound, |n| (n as f64 * ln_ratio).exp() / (mean + 1.0))?
            }
        }
        StateSpec::Squeezed {
            total_mean_photons,
            squeezing_fraction,
        } => squeezed_distribution(*total_mean_photons, *squeezing_fraction, tail_bound)?,
    };
    Ok(PhotonStatistics { rho, tail_bound })
}

/// Collects terms until the mass reaches 1 − `tail_bound` and the last two
/// terms, weighted by n², have dropped below `tail_bound`/1000, so that the
/// second moment is not biased by the cut either.
fn accumulate<F: FnMut(usize) -> f64>(tail_bound: f64, mut term: F) -> Result<Vec<f64>> {
    let mut rho: Vec<f64> = Vec::new();
    let mut mass = CompensatedSum::new();
    let mut mass_reached = false;
    for n in 0..=MAX_PHOTON_NUMBER {
        let p = term(n);
        rho.push(p);
        mass.add(p);
        mass_reached = mass.value() >= 1.0 - tail_bound;
        let last = rho[n.saturating_sub(1)].max(p);
        if mass_reached && last * (n * n) as f64 <= 1e-3 * tail_bound {
            return Ok(rho);
        }
    }
    if mass_reached {
        return Ok(rho);
    }
    Err(Error::Truncation(format!(
        "mass {} still below 1 - {tail_bound:e} at n = {MAX_PHOTON_NUMBER}",
        mass.value()
    )))
}

/// Fock amplitudes of the state annihilated by cosh r·a − sinh r·a† − α e^{−r}.
///
/// c_{n+1} = (κ c_n + t √n c_{n−1}) / √(n+1), with t = tanh r and
/// κ = α e^{−r}/cosh r, run as mantissa plus log scale.
fn squeezed_distribution(total: f64, fraction: f64, tail_bound: f64) -> Result<Vec<f64>> {
    let squeeze_photons = fraction * total;
    let alpha_sq = (1.0 - fraction) * total;
    let alpha = alpha_sq.sqrt();
    let r = squeeze_photons.sqrt().asinh();
    let (cosh, tanh) = (r.cosh(), r.tanh());
    let kappa = alpha * (-r).exp() / cosh;
    let ln_c0 = -0.5 * cosh.ln() - 0.5 * alpha_sq * (-r).exp() / cosh;

    let mut prev = 0.0;
    let mut cur = 1.0;
    let mut log_scale = ln_c0;
    let mut n = 0usize;
    accumulate(tail_bound, |k| {
        while n < k {
            let nf = n as f64;
            let next = (kappa * cur + tanh * nf.sqrt() * prev) / (nf + 1.0).sqrt();
            prev = cur;
            cur = next;
            n += 1;
            let mag = cur.abs().max(prev.abs());
            if mag > 1e150 || (mag < 1e-150 && mag > 0.0) {
                let shift = mag.ln();
                cur /= mag;
                prev /= mag;
                log_scale += shift;
            }
        }
        if cur == 0.0 {
            0.0
        } else {
            (2.0 * (cur.abs().ln() + log_scale)).exp()
        }
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn dist(spec: StateSpec) -> PhotonStatistics {
        photon_distribution(&spec, 1e-12).unwrap()
    }

    #[test]
    fn fock_is_a_delta() {
        let s = dist(StateSpec::fock(2));
        assert_eq!(s.rho(), &[0.0, 0.0, 1.0]);
        let m = moments(&dist(StateSpec::fock(3)));
        assert_eq!((m.mean, m.mean_sq, m.variance), (3.0, 9.0, 0.0));
    }

    #[test]
    fn coherent_is_poisson() {
        let s = dist(StateSpec::coherent(1.0));
        let mut fact = 1.0;
        for (n, &p) in s.rho().iter().enumerate() {
            if n > 0 {
                fact *= n as f64;
            }
            assert_relative_eq!(p, (-1.0f64).exp() / fact, max_relative = 1e-12);
        }
        let m = moments(&dist(StateSpec::coherent(2.0)));
        assert_relative_eq!(m.mean, 2.0, epsilon = 1e-10);
        assert_relative_eq!(m.mean_sq, 6.0, epsilon = 1e-10);
        assert_relative_eq!(m.variance, 2.0, epsilon = 1e-10);
    }

    #[test]
    fn thermal_is_geometric() {
        let s = dist(StateSpec::thermal(1.0));
        for (n, &p) in s.rho().iter().enumerate() {
            assert_relative_eq!(p, 0.5f64.powi(n as i32 + 1), max_relative = 1e-13);
        }
        let m = moments(&s);
        assert_relative_eq!(m.variance, 2.0, epsilon = 1e-9);
    }

    #[test]
    fn squeezed_vacuum_has_even_support() {
        let s = dist(StateSpec::squeezed(1.0, 1.0));
        for (n, &p) in s.rho().iter().enumerate() {
            if n % 2 == 1 {
                assert_eq!(p, 0.0);
            }
        }
        let m = moments(&s);
        assert!((m.mean - 1.0).abs() < 1e-9);
        // 2 sinh²r cosh²r = 2N(N+1)
        assert_relative_eq!(m.variance, 4.0, epsilon = 1e-8);
        for &n in &[0.3, 2.0, 7.5] {
            let m = moments(&dist(StateSpec::squeezed(n, 1.0)));
            assert_relative_eq!(m.variance, 2.0 * n * (n + 1.0), max_relative = 1e-9);
        }
    }

    #[test]
    fn squeezed_zero_fraction_is_coherent() {
        let a = dist(StateSpec::squeezed(3.0, 0.0));
        let b = dist(StateSpec::coherent(3.0));
        assert_eq!(a.rho().len(), b.rho().len());
        for (x, y) in a.rho().iter().zip(b.rho()) {
            assert_relative_eq!(x, y, max_relative = 1e-11, epsilon = 1e-300);
        }
    }

    #[test]
    fn squeezed_variance_uses_anti_squeezed_displacement() {
        // Var n = α² e^{2r} + 2 sinh²r cosh²r
        let (total, beta) = (2.0, 0.5);
        let m = moments(&dist(StateSpec::squeezed(total, beta)));
        let s = beta * total;
        let r = s.sqrt().asinh();
        let expected = (1.0 - beta) * total * (2.0 * r).exp() + 2.0 * s * (1.0 + s);
        assert_relative_eq!(m.variance, expected, max_relative = 1e-10);
        assert_relative_eq!(m.mean, total, epsilon = 1e-10);
    }

    #[test]
    fn tail_is_bounded() {
        for spec in [
            StateSpec::coherent(15.0),
            StateSpec::thermal(4.0),
            StateSpec::squeezed(5.0, 0.3),
        ] {
            let s = dist(spec);
            let total = s.total_mass();
            assert!(total >= 1.0 - 1e-12 && total <= 1.0 + 1e-12, "{total}");
        }
    }

    #[test]
    fn truncation_cap_is_enforced() {
        let err = photon_distribution(&StateSpec::thermal(500.0), 1e-12).unwrap_err();
        assert!(matches!(err, Error::Truncation(_)));
        assert!(!err.is_validation());
    }

    #[test]
    fn validation_failures() {
        assert!(photon_distribution(&StateSpec::coherent(-1.0), 1e-12).is_err());
        assert!(photon_distribution(&StateSpec::squeezed(1.0, 1.5), 1e-12).is_err());
        assert!(photon_distribution(&StateSpec::Custom { weights: vec![0.5, 0.4] }, 1e-12).is_err());
        assert!(photon_distribution(&StateSpec::Custom { weights: vec![1.5, -0.5] }, 1e-12).is_err());
        assert!(photon_distribution(&StateSpec::vacuum(), 0.0).is_err());
        assert!(photon_distribution(&StateSpec::vacuum(), 1e-3).is_err());
    }

    #[test]
    fn parse_grammar() {
        assert_eq!(
            "kind=squeezed N=2.0 beta=0.5".parse::<StateSpec>().unwrap(),
            StateSpec::squeezed(2.0, 0.5)
        );
        assert_eq!("kind=fock n=5".parse::<StateSpec>().unwrap(), StateSpec::fock(5));
        assert_eq!("kind=coherent N=1".parse::<StateSpec>().unwrap(), StateSpec::coherent(1.0));
        assert_eq!(
            "kind=custom weights=0.25,0.75".parse::<StateSpec>().unwrap(),
            StateSpec::Custom { weights: vec![0.25, 0.75] }
        );
        let spec = StateSpec::squeezed(0.1, 1.0 / 3.0);
        assert_eq!(spec.to_string().parse::<StateSpec>().unwrap(), spec);
    }

    #[test]
    fn parse_errors_name_the_field() {
        let cases = [
            ("kind=coherent N=abc", "N"),
            ("kind=squeezed N=1", "beta"),
            ("kind=fock n=-2", "n"),
            ("kind=banana", "kind"),
            ("N=1", "kind"),
            ("kind=coherent N=1 colour=red", "colour"),
            ("kind=squeezed N=1 beta=2", "beta"),
        ];
        for (text, field) in cases {
            match text.parse::<StateSpec>() {
                Err(Error::Validation { field: f, .. }) => assert_eq!(f, field, "{text}"),
                other => panic!("{text}: {other:?}"),
            }
        }
    }
}
