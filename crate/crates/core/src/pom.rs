//! Outcome densities of the roulette, heterodyne and direct detection schemes.
//!
//! Loss before an ideal detector is Bernoulli thinning of the photon-number
//! distribution. With the outcome variables rescaled by 1/√η, that turns the
//! Gaussian smearing of the roulette POM (variance (1−η)/(4η)) and the
//! s-ordered heterodyne law (s = 1 − 2/η) into finite mixtures over the
//! thinned distribution q:
//!
//! * roulette:   p_η(x) = √η Σ_k q_k |⟨√η x|k⟩|²
//! * heterodyne: p_η(|α|²) = Σ_k q_k Gamma(|α|²; k + 1, 1/η)
//!
//! Both reduce to the unit-efficiency POMs when η = 1.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::{ln_binomial, ln_factorial, oscillator_mixture};
use crate::states::PhotonStatistics;

/// Quantum efficiency η ∈ (0, 1].
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(try_from = "f64", into = "f64")]
pub struct Efficiency(f64);

impl Efficiency {
    pub const ONE: Efficiency = Efficiency(1.0);

    pub fn new(eta: f64) -> Result<Self> {
        if eta > 0.0 && eta <= 1.0 {
            Ok(Efficiency(eta))
        } else {
            Err(Error::invalid("eta", format!("expected a value in (0, 1], got {eta}")))
        }
    }

    pub fn value(self) -> f64 {
        self.0
    }

    pub fn is_unit(self) -> bool {
        self.0 == 1.0
    }

    /// σ²_η = (1−η)/(4η), the Gaussian smearing of the quadrature outcome.
    pub fn smearing_variance(self) -> f64 {
        (1.0 - self.0) / (4.0 * self.0)
    }

    /// Per-quadrature variance (1/η − 1)/2 added to heterodyne outcomes.
    pub fn heterodyne_noise_variance(self) -> f64 {
        0.5 * (1.0 / self.0 - 1.0)
    }
}

impl TryFrom<f64> for Efficiency {
    type Error = Error;

    fn try_from(value: f64) -> Result<Self> {
        Efficiency::new(value)
    }
}

impl From<Efficiency> for f64 {
    fn from(eta: Efficiency) -> f64 {
        eta.0
    }
}

impl fmt::Display for Efficiency {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Scheme {
    Roulette,
    Heterodyne,
    Direct,
}

impl Scheme {
    pub const ALL: [Scheme; 3] = [Scheme::Roulette, Scheme::Heterodyne, Scheme::Direct];

    pub fn name(self) -> &'static str {
        match self {
            Scheme::Roulette => "roulette",
            Scheme::Heterodyne => "heterodyne",
            Scheme::Direct => "direct",
        }
    }
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Scheme {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "roulette" => Ok(Scheme::Roulette),
            "heterodyne" => Ok(Scheme::Heterodyne),
            "direct" => Ok(Scheme::Direct),
            other => Err(Error::invalid(
                "scheme",
                format!("expected roulette, heterodyne or direct, got `{other}`"),
            )),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DetectorConfig {
    pub scheme: Scheme,
    pub eta: Efficiency,
}

impl DetectorConfig {
    pub fn new(scheme: Scheme, eta: f64) -> Result<Self> {
        Ok(Self {
            scheme,
            eta: Efficiency::new(eta)?,
        })
    }
}

/// Count distribution of an ideal counter behind a loss of 1 − η:
/// p(m) = Σ_{n≥m} ρ_nn C(n,m) η^m (1−η)^{n−m}.
pub fn direct_detection_pmf(stats: &PhotonStatistics, eta: Efficiency) -> Vec<f64> {
    let rho = stats.rho();
    if eta.is_unit() {
        return rho.to_vec();
    }
    let (ln_eta, ln_loss) = (eta.value().ln(), (1.0 - eta.value()).ln());
    let mut pmf = vec![0.0; rho.len()];
    for (n, &weight) in rho.iter().enumerate() {
        if weight == 0.0 {
            continue;
        }
        let ln_weight = weight.ln();
        for (m, slot) in pmf.iter_mut().enumerate().take(n + 1) {
            let ln_term = ln_weight
                + ln_binomial(n as u64, m as u64)
                + m as f64 * ln_eta
                + (n - m) as f64 * ln_loss;
            *slot += ln_term.exp();
        }
    }
    pmf
}

/// Roulette outcome law for a given state and efficiency.
///
/// Holds the thinned photon distribution so repeated density evaluations
/// cost one Hermite recurrence each.
#[derive(Debug, Clone)]
pub struct RouletteLaw {
    thinned: Vec<f64>,
    eta: Efficiency,
    has_even_support: bool,
}

impl RouletteLaw {
    pub fn new(stats: &PhotonStatistics, eta: Efficiency) -> Self {
        let thinned = direct_detection_pmf(stats, eta);
        let has_even_support = thinned.iter().step_by(2).any(|&q| q > 0.0);
        Self {
            thinned,
            eta,
            has_even_support,
        }
    }

    pub fn eta(&self) -> Efficiency {
        self.eta
    }

    /// Lower end of the intensity-estimator support, −1/(2η).
    pub fn y_floor(&self) -> f64 {
        -0.5 / self.eta.value()
    }

    /// Density of the quadrature outcome x.
    pub fn density_x(&self, x: f64) -> f64 {
        let scale = self.eta.value().sqrt();
        scale * oscillator_mixture(&self.thinned, scale * x)
    }

    /// Density of the estimator y = 2x² − 1/(2η).
    ///
    /// Infinite at the support floor when any even photon number has weight
    /// (the integrable 1/√(y − floor) singularity), otherwise zero there.
    pub fn density_y(&self, y: f64) -> f64 {
        let shifted = y - self.y_floor();
        if shifted < 0.0 {
            return 0.0;
        }
        if shifted == 0.0 {
            return if self.has_even_support { f64::INFINITY } else { 0.0 };
        }
        let x = (0.5 * shifted).sqrt();
        // two branches ±x, |dy/dx| = 4x, density even in x
        self.density_x(x) / (2.0 * x)
    }
}

/// Heterodyne intensity-estimator law for a given state and efficiency.
#[derive(Debug, Clone)]
pub struct HeterodyneLaw {
    thinned: Vec<f64>,
    ln_factorials: Vec<f64>,
    eta: Efficiency,
}

impl HeterodyneLaw {
    pub fn new(stats: &PhotonStatistics, eta: Efficiency) -> Self {
        let thinned = direct_detection_pmf(stats, eta);
        let ln_factorials = (0..thinned.len() as u64).map(ln_factorial).collect();
        Self {
            thinned,
            ln_factorials,
            eta,
        }
    }

    pub fn eta(&self) -> Efficiency {
        self.eta
    }

    /// Lower end of the estimator support, −1/η.
    pub fn floor(&self) -> f64 {
        -1.0 / self.eta.value()
    }

    /// Density of |α|².
    pub fn density_modulus_sq(&self, r: f64) -> f64 {
        if r < 0.0 {
            return 0.0;
        }
        let eta = self.eta.value();
        if r == 0.0 {
            return eta * self.thinned[0];
        }
        let ln_er = (eta * r).ln();
        let mut total = 0.0;
        for (k, &q) in self.thinned.iter().enumerate() {
            if q == 0.0 {
                continue;
            }
            total += q * (eta.ln() - eta * r + k as f64 * ln_er - self.ln_factorials[k]).exp();
        }
        total
    }

    /// Density of I_η = |α|² − 1/η.
    pub fn density_i(&self, intensity: f64) -> f64 {
        self.density_modulus_sq(intensity - self.floor())
    }
}

/// Density of the roulette quadrature outcome x.
pub fn roulette_density_x(stats: &PhotonStatistics, x: f64, eta: Efficiency) -> f64 {
    RouletteLaw::new(stats, eta).density_x(x)
}

/// Density of the roulette intensity estimate y = 2x² − 1/(2η).
pub fn roulette_density_y(stats: &PhotonStatistics, y: f64, eta: Efficiency) -> f64 {
    RouletteLaw::new(stats, eta).density_y(y)
}

/// Density of the heterodyne intensity estimate I_η = |α|² − 1/η.
pub fn heterodyne_density_i(stats: &PhotonStatistics, intensity: f64, eta: Efficiency) -> f64 {
    HeterodyneLaw::new(stats, eta).density_i(intensity)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::{integrate, integrate_singular_lower, SQRT_2_OVER_PI};
    use crate::states::{moments, photon_distribution, StateSpec};
    use approx::assert_relative_eq;

    fn stats(spec: StateSpec) -> PhotonStatistics {
        photon_distribution(&spec, 1e-12).unwrap()
    }

    fn eta(v: f64) -> Efficiency {
        Efficiency::new(v).unwrap()
    }

    #[test]
    fn efficiency_range() {
        assert!(Efficiency::new(0.0).is_err());
        assert!(Efficiency::new(1.0 + 1e-12).is_err());
        assert!(Efficiency::new(f64::NAN).is_err());
        assert_eq!(eta(0.5).smearing_variance(), 0.25);
        assert_eq!(eta(0.5).heterodyne_noise_variance(), 0.5);
        let parsed: Efficiency = serde_json::from_str("0.25").unwrap();
        assert_eq!(parsed, eta(0.25));
        assert!(serde_json::from_str::<Efficiency>("1.5").is_err());
    }

    #[test]
    fn roulette_x_examples() {
        let vac = PhotonStatistics::vacuum();
        let one = stats(StateSpec::fock(1));
        for &x in &[-1.2f64, 0.0, 0.3, 0.9] {
            let gauss = SQRT_2_OVER_PI * (-2.0 * x * x).exp();
            assert_relative_eq!(roulette_density_x(&vac, x, Efficiency::ONE), gauss, max_relative = 1e-13);
            assert_relative_eq!(
                roulette_density_x(&one, x, Efficiency::ONE),
                4.0 * x * x * gauss,
                max_relative = 1e-12,
                epsilon = 1e-300
            );
            let smeared = (-x * x).exp() / std::f64::consts::PI.sqrt();
            assert_relative_eq!(roulette_density_x(&vac, x, eta(0.5)), smeared, max_relative = 1e-13);
        }
    }

    #[test]
    fn roulette_y_matches_intensity_pom_at_unit_efficiency() {
        let vac = PhotonStatistics::vacuum();
        for &y in &[-0.4, 0.0, 0.7, 3.0] {
            let s: f64 = y + 0.5;
            let expected = (-s).exp() / (std::f64::consts::PI * s).sqrt();
            assert_relative_eq!(roulette_density_y(&vac, y, Efficiency::ONE), expected, max_relative = 1e-12);
        }
        assert_eq!(roulette_density_y(&vac, -0.6, Efficiency::ONE), 0.0);
        assert_eq!(roulette_density_y(&vac, -0.5, Efficiency::ONE), f64::INFINITY);
        assert_eq!(roulette_density_y(&stats(StateSpec::fock(1)), -0.5, Efficiency::ONE), 0.0);
    }

    #[test]
    fn roulette_y_is_unbiased_for_fock_states() {
        for n in 0..6 {
            let law = RouletteLaw::new(&stats(StateSpec::fock(n)), Efficiency::ONE);
            let mean = integrate_singular_lower(|y| y * law.density_y(y), law.y_floor(), f64::INFINITY, 1e-10)
                .unwrap();
            assert!((mean - n as f64).abs() < 1e-8, "n={n}: {mean}");
        }
    }

    #[test]
    fn heterodyne_examples() {
        let vac = PhotonStatistics::vacuum();
        let one = stats(StateSpec::fock(1));
        for &i in &[-1.0, -0.5, 0.0, 2.5] {
            let s: f64 = i + 1.0;
            assert_relative_eq!(heterodyne_density_i(&vac, i, Efficiency::ONE), (-s).exp(), max_relative = 1e-13);
            assert_relative_eq!(
                heterodyne_density_i(&one, i, Efficiency::ONE),
                (-s).exp() * s,
                max_relative = 1e-12,
                epsilon = 1e-300
            );
        }
        assert_eq!(heterodyne_density_i(&vac, -1.01, Efficiency::ONE), 0.0);
        for e in [1.0, 0.5, 0.1] {
            let st = stats(StateSpec::coherent(2.0));
            let law = HeterodyneLaw::new(&st, eta(e));
            let mean = integrate(|i| i * law.density_i(i), law.floor(), f64::INFINITY, 1e-10).unwrap();
            assert!((mean - 2.0).abs() < 1e-7, "eta={e}: {mean}");
        }
    }

    #[test]
    fn direct_pmf_examples() {
        let pmf = direct_detection_pmf(&stats(StateSpec::fock(1)), eta(0.5));
        assert_relative_eq!(pmf[0], 0.5, epsilon = 1e-15);
        assert_relative_eq!(pmf[1], 0.5, epsilon = 1e-15);
        let pmf = direct_detection_pmf(&stats(StateSpec::fock(4)), Efficiency::ONE);
        assert_eq!(pmf, vec![0.0, 0.0, 0.0, 0.0, 1.0]);

        // thinned Poisson is Poisson with mean ηN
        let pmf = direct_detection_pmf(&stats(StateSpec::coherent(3.0)), eta(0.4));
        let lam: f64 = 1.2;
        let mut fact = 1.0;
        for (m, &p) in pmf.iter().enumerate().take(20) {
            if m > 0 {
                fact *= m as f64;
            }
            assert_relative_eq!(p, (-lam).exp() * lam.powi(m as i32) / fact, max_relative = 1e-9, epsilon = 1e-14);
        }
    }

    #[test]
    fn direct_pmf_variance_is_exact() {
        for spec in [StateSpec::coherent(2.0), StateSpec::thermal(1.0), StateSpec::squeezed(2.0, 0.5)] {
            let st = stats(spec);
            let m = moments(&st);
            for e in [1.0, 0.75, 0.5, 0.25, 0.1] {
                let pmf = direct_detection_pmf(&st, eta(e));
                let total: f64 = pmf.iter().sum();
                assert!((total - st.total_mass()).abs() < 1e-13);
                let mean: f64 = pmf.iter().enumerate().map(|(k, p)| k as f64 / e * p).sum();
                let second: f64 = pmf.iter().enumerate().map(|(k, p)| (k as f64 / e).powi(2) * p).sum();
                let expected = m.variance + m.mean * (1.0 / e - 1.0);
                assert!((second - mean * mean - expected).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn scheme_parsing() {
        assert_eq!("Roulette".parse::<Scheme>().unwrap(), Scheme::Roulette);
        assert!("homodyne".parse::<Scheme>().is_err());
        assert_eq!(Scheme::Heterodyne.to_string(), "heterodyne");
    }
}
