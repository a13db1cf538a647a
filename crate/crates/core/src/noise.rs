//! Closed-form noise figures for intensity measurement and the
//! roulette-versus-heterodyne comparison.
//!
//! All figures depend on the state only through ⟨n⟩ and ⟨n²⟩.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::pom::{Efficiency, Scheme};
use crate::states::{moments, photon_distribution, StateSpec};

/// |Δ_RH| at or below this (relative to max(1, ⟨n²⟩)) counts as a tie.
pub const INDIFFERENCE_TOL: f64 = 1e-9;

/// Target |Δ_RH| for zero-contour roots.
pub const ZERO_LINE_TOL: f64 = 1e-10;

const SIGN_SCAN_CELLS: usize = 64;
const MAX_BISECTIONS: usize = 200;

fn check_moments(mean: f64, mean_sq: f64) -> Result<()> {
    if !(mean.is_finite() && mean_sq.is_finite()) {
        return Err(Error::invalid("moments", "non-finite moment"));
    }
    if mean < 0.0 {
        return Err(Error::invalid("meanN", format!("must be ≥ 0, got {mean}")));
    }
    let variance = mean_sq - mean * mean;
    if variance < -1e-12 * mean_sq.max(1.0) {
        return Err(Error::invalid(
            "meanNsq",
            format!("⟨n²⟩ = {mean_sq} is below ⟨n⟩² = {} (negative variance)", mean * mean),
        ));
    }
    Ok(())
}

/// Variance of the roulette estimate y_η:
/// ⟨Δn²⟩ + ½⟨n²⟩ + ⟨n⟩(2/η − 3/2) + 1/(2η²).
pub fn roulette_variance(mean: f64, mean_sq: f64, eta: Efficiency) -> Result<f64> {
    check_moments(mean, mean_sq)?;
    let e = eta.value();
    Ok(mean_sq - mean * mean + 0.5 * mean_sq + mean * (2.0 / e - 1.5) + 0.5 / (e * e))
}

/// Variance of the counting estimate m/η: ⟨Δn²⟩ + ⟨n⟩(1/η − 1).
pub fn direct_variance(mean: f64, mean_sq: f64, eta: Efficiency) -> Result<f64> {
    check_moments(mean, mean_sq)?;
    let e = eta.value();
    Ok(mean_sq - mean * mean + mean * (1.0 / e - 1.0))
}

/// Variance of the heterodyne estimate I_η: ⟨Δn²⟩ + (2/η − 1)⟨n⟩ + 1/η².
pub fn heterodyne_variance(mean: f64, mean_sq: f64, eta: Efficiency) -> Result<f64> {
    check_moments(mean, mean_sq)?;
    let e = eta.value();
    Ok(mean_sq - mean * mean + (2.0 / e - 1.0) * mean + 1.0 / (e * e))
}

/// Noise a scheme adds on top of direct detection at the same efficiency.
///
/// Roulette: ½[⟨n²⟩ + ⟨n⟩(2/η − 1) + 1/η²]; heterodyne: (1/η)[⟨n⟩ + 1/η];
/// direct: 0.
pub fn added_noise(scheme: Scheme, mean: f64, mean_sq: f64, eta: Efficiency) -> Result<f64> {
    check_moments(mean, mean_sq)?;
    let e = eta.value();
    Ok(match scheme {
        Scheme::Roulette => 0.5 * (mean_sq + mean * (2.0 / e - 1.0) + 1.0 / (e * e)),
        Scheme::Heterodyne => (mean + 1.0 / e) / e,
        Scheme::Direct => 0.0,
    })
}

/// Roulette variance minus heterodyne variance: ½[⟨n²⟩ − ⟨n⟩ − 1/η²].
pub fn delta_rh(mean: f64, mean_sq: f64, eta: Efficiency) -> Result<f64> {
    check_moments(mean, mean_sq)?;
    let e = eta.value();
    Ok(0.5 * (mean_sq - mean - 1.0 / (e * e)))
}

/// Photon number above which a Fock state favours heterodyne detection:
/// (1 + √(1 + 4/η²))/2.
pub fn threshold_n(eta: Efficiency) -> f64 {
    let e = eta.value();
    0.5 * (1.0 + (1.0 + 4.0 / (e * e)).sqrt())
}

/// The squeezed-state comparison expression in the (N, β) parameterization,
/// evaluated exactly as published:
///
/// N² + 2βN(1+βN) + (1−β)N(1 + 2βN + 2√(βN(1+βN))) − N − 1/η².
///
/// This equals ⟨n²⟩ − ⟨n⟩ − 1/η² for the squeezed family, i.e. twice
/// [`delta_rh`]. The sign, and so every zero contour, agrees with
/// [`delta_rh`].
pub fn squeezed_delta_rh(total: f64, beta: f64, eta: Efficiency) -> f64 {
    let e = eta.value();
    let bn = beta * total;
    total * total + 2.0 * bn * (1.0 + bn) + (1.0 - beta) * total * (1.0 + 2.0 * bn + 2.0 * (bn * (1.0 + bn)).sqrt())
        - total
        - 1.0 / (e * e)
}

/// Which scheme estimates the intensity with less noise.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    Roulette,
    Heterodyne,
    Indifferent,
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Verdict::Roulette => "roulette",
            Verdict::Heterodyne => "heterodyne",
            Verdict::Indifferent => "indifferent",
        })
    }
}

/// All analytic figures of merit for one (⟨n⟩, ⟨n²⟩, η).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct NoiseReport {
    pub eta: f64,
    pub mean_n: f64,
    pub mean_n_sq: f64,
    pub roulette_var: f64,
    pub direct_var: f64,
    pub heterodyne_var: f64,
    pub added_roulette: f64,
    pub added_heterodyne: f64,
    #[serde(rename = "deltaRH")]
    pub delta_rh: f64,
    #[serde(rename = "thresholdN")]
    pub threshold_n: f64,
}

impl NoiseReport {
    pub fn new(mean: f64, mean_sq: f64, eta: Efficiency) -> Result<Self> {
        Ok(Self {
            eta: eta.value(),
            mean_n: mean,
            mean_n_sq: mean_sq,
            roulette_var: roulette_variance(mean, mean_sq, eta)?,
            direct_var: direct_variance(mean, mean_sq, eta)?,
            heterodyne_var: heterodyne_variance(mean, mean_sq, eta)?,
            added_roulette: added_noise(Scheme::Roulette, mean, mean_sq, eta)?,
            added_heterodyne: added_noise(Scheme::Heterodyne, mean, mean_sq, eta)?,
            delta_rh: delta_rh(mean, mean_sq, eta)?,
            threshold_n: threshold_n(eta),
        })
    }

    /// Report for a state, using its truncated photon statistics.
    pub fn for_state(spec: &StateSpec, eta: Efficiency, tail_bound: f64) -> Result<Self> {
        let m = moments(&photon_distribution(spec, tail_bound)?);
        Self::new(m.mean, m.mean_sq, eta)
    }

    pub fn variance(&self, scheme: Scheme) -> f64 {
        match scheme {
            Scheme::Roulette => self.roulette_var,
            Scheme::Heterodyne => self.heterodyne_var,
            Scheme::Direct => self.direct_var,
        }
    }

    pub fn verdict(&self) -> Verdict {
        if self.delta_rh.abs() <= INDIFFERENCE_TOL * self.mean_n_sq.max(1.0) {
            Verdict::Indifferent
        } else if self.delta_rh < 0.0 {
            Verdict::Roulette
        } else {
            Verdict::Heterodyne
        }
    }
}

/// Bisection for a sign change of `f` on `[lo, hi]`; returns the root and
/// whether |f(root)| ≤ `ftol`.
fn bisect<F: Fn(f64) -> f64>(f: F, mut lo: f64, mut hi: f64, ftol: f64) -> (f64, bool) {
    let mut f_lo = f(lo);
    if f_lo == 0.0 {
        return (lo, true);
    }
    if f(hi) == 0.0 {
        return (hi, true);
    }
    for _ in 0..MAX_BISECTIONS {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let f_mid = f(mid);
        if f_mid == 0.0 {
            return (mid, true);
        }
        if (f_mid < 0.0) == (f_lo < 0.0) {
            lo = mid;
            f_lo = f_mid;
        } else {
            hi = mid;
        }
    }
    let root = 0.5 * (lo + hi);
    (root, f(root).abs() <= ftol)
}

/// Root in N of `f`, bracketed by doubling from [0, 1]. Needs f(0) < 0.
fn root_in_total<F: Fn(f64) -> f64>(f: F) -> Result<f64> {
    let mut hi = 1.0;
    while f(hi) < 0.0 {
        hi *= 2.0;
        if hi > 1e12 {
            return Err(Error::NonConvergence {
                what: "root bracketing",
                estimate: hi,
                error_estimate: f64::INFINITY,
            });
        }
    }
    let (root, converged) = bisect(&f, 0.0, hi, ZERO_LINE_TOL);
    if converged {
        Ok(root)
    } else {
        Err(Error::NonConvergence {
            what: "bisection",
            estimate: root,
            error_estimate: f(root).abs(),
        })
    }
}

/// Total photon number N at which the squeezed comparison changes sign for
/// a fixed squeezing fraction.
pub fn root_total_at_beta(beta: f64, eta: Efficiency) -> Result<f64> {
    if !(0.0..=1.0).contains(&beta) {
        return Err(Error::invalid("beta", format!("expected a value in [0, 1], got {beta}")));
    }
    root_in_total(|n| squeezed_delta_rh(n, beta, eta))
}

/// One point of a zero contour.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ZeroPoint {
    pub eta: f64,
    #[serde(rename = "N")]
    pub total: f64,
    pub beta: f64,
    pub converged: bool,
}

/// The Δ_RH = 0 contour of the squeezed family in the (N, β) plane.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct ZeroLine {
    pub eta: f64,
    /// One point per sampled N with a root β ∈ [0, 1].
    pub points: Vec<ZeroPoint>,
    /// Sampled N values for which no root exists in [0, 1].
    pub no_root: Vec<f64>,
    /// N where the contour meets β = 0.
    pub beta_zero_intercept: f64,
}

enum Sample {
    Root(ZeroPoint),
    NoRoot(f64),
}

fn zero_point(total: f64, eta: Efficiency) -> Sample {
    let f = |beta: f64| squeezed_delta_rh(total, beta, eta);
    let mut prev_beta = 0.0;
    let mut prev = f(0.0);
    if prev == 0.0 {
        return Sample::Root(ZeroPoint { eta: eta.value(), total, beta: 0.0, converged: true });
    }
    for i in 1..=SIGN_SCAN_CELLS {
        let beta = i as f64 / SIGN_SCAN_CELLS as f64;
        let value = f(beta);
        if value == 0.0 || (value < 0.0) != (prev < 0.0) {
            let (root, converged) = bisect(f, prev_beta, beta, ZERO_LINE_TOL);
            return Sample::Root(ZeroPoint { eta: eta.value(), total, beta: root, converged });
        }
        prev_beta = beta;
        prev = value;
    }
    Sample::NoRoot(total)
}

/// Samples N uniformly on (0, `n_max`] at `n_points` points and solves for
/// the β root at each.
pub fn zero_line(eta: Efficiency, n_points: usize, n_max: f64) -> Result<ZeroLine> {
    zero_line_with(Execution::Auto, eta, n_points, n_max)
}

pub fn zero_line_with(exec: Execution, eta: Efficiency, n_points: usize, n_max: f64) -> Result<ZeroLine> {
    if n_points == 0 {
        return Err(Error::invalid("nPoints", "must be positive"));
    }
    if !(n_max.is_finite() && n_max > 0.0) {
        return Err(Error::invalid("Nmax", format!("must be positive, got {n_max}")));
    }
    let totals: Vec<f64> = (1..=n_points).map(|i| n_max * i as f64 / n_points as f64).collect();
    let samples = exec.map(&totals, |&n| zero_point(n, eta));
    let mut points = Vec::new();
    let mut no_root = Vec::new();
    for s in samples {
        match s {
            Sample::Root(p) => points.push(p),
            Sample::NoRoot(n) => no_root.push(n),
        }
    }
    Ok(ZeroLine {
        eta: eta.value(),
        points,
        no_root,
        beta_zero_intercept: root_total_at_beta(0.0, eta)?,
    })
}

/// Mean photon number at which a coherent state is equally well measured by
/// roulette and heterodyne detection, found by bisection on the truncated
/// Poisson statistics.
pub fn coherent_crossover(eta: Efficiency, tail_bound: f64) -> Result<f64> {
    let g = |n: f64| -> Result<f64> {
        let m = moments(&photon_distribution(&StateSpec::coherent(n), tail_bound)?);
        delta_rh(m.mean, m.mean_sq, eta)
    };
    let mut lo = 0.0;
    let mut hi = 2.0 / eta.value();
    if g(lo)? >= 0.0 || g(hi)? <= 0.0 {
        return Err(Error::NonConvergence {
            what: "coherent crossover bracketing",
            estimate: hi,
            error_estimate: f64::INFINITY,
        });
    }
    while hi - lo > 1e-14 * hi {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if g(mid)? < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn eta(v: f64) -> Efficiency {
        Efficiency::new(v).unwrap()
    }

    #[test]
    fn variance_examples() {
        assert_relative_eq!(roulette_variance(0.0, 0.0, Efficiency::ONE).unwrap(), 0.5);
        assert_relative_eq!(roulette_variance(1.0, 2.0, Efficiency::ONE).unwrap(), 3.0);
        assert_relative_eq!(roulette_variance(2.0, 4.0, eta(0.5)).unwrap(), 9.0);

        assert_relative_eq!(direct_variance(1.0, 1.0, eta(0.5)).unwrap(), 1.0);
        assert_relative_eq!(direct_variance(3.0, 12.0, Efficiency::ONE).unwrap(), 3.0);
        assert_relative_eq!(direct_variance(2.0, 6.0, eta(0.5)).unwrap(), 4.0);

        assert_relative_eq!(heterodyne_variance(0.0, 0.0, Efficiency::ONE).unwrap(), 1.0);
        assert_relative_eq!(heterodyne_variance(2.0, 6.0, Efficiency::ONE).unwrap(), 5.0);
        assert_relative_eq!(heterodyne_variance(0.0, 0.0, eta(0.5)).unwrap(), 4.0);
    }

    #[test]
    fn added_noise_examples() {
        assert_relative_eq!(added_noise(Scheme::Heterodyne, 0.0, 0.0, Efficiency::ONE).unwrap(), 1.0);
        assert_relative_eq!(added_noise(Scheme::Roulette, 0.0, 0.0, Efficiency::ONE).unwrap(), 0.5);
        let (m, m2, e) = (1.7, 5.3, eta(0.3));
        let diff = roulette_variance(m, m2, e).unwrap() - direct_variance(m, m2, e).unwrap();
        assert_relative_eq!(added_noise(Scheme::Roulette, m, m2, e).unwrap(), diff, max_relative = 1e-14);
        assert_eq!(added_noise(Scheme::Direct, m, m2, e).unwrap(), 0.0);
    }

    #[test]
    fn delta_rh_examples() {
        for e in [1.0, 0.5, 0.2] {
            let n = 1.0 / e;
            assert!(delta_rh(n, n * n + n, eta(e)).unwrap().abs() < 1e-12);
        }
        assert_eq!(delta_rh(0.0, 0.0, Efficiency::ONE).unwrap(), -0.5);
        assert_eq!(delta_rh(3.0, 9.0, Efficiency::ONE).unwrap(), 2.5);
    }

    #[test]
    fn threshold_examples() {
        assert_relative_eq!(threshold_n(Efficiency::ONE), 1.618_033_988_749_895, epsilon = 1e-15);
        assert_relative_eq!(threshold_n(eta(0.5)), 0.5 * (1.0 + 17f64.sqrt()), epsilon = 1e-15);
        assert_relative_eq!(threshold_n(eta(0.5)), 2.5616, epsilon = 1e-4);
        let small = 1e-4;
        assert_relative_eq!(threshold_n(eta(small)) * small, 1.0, max_relative = 1e-3);
    }

    #[test]
    fn squeezed_expression_examples() {
        for n in [0.3, 1.0, 4.0] {
            for e in [1.0, 0.5] {
                assert_relative_eq!(squeezed_delta_rh(n, 0.0, eta(e)), n * n - 1.0 / (e * e), epsilon = 1e-12);
            }
        }
        assert_relative_eq!(squeezed_delta_rh(1.0, 1.0, Efficiency::ONE), 3.0, epsilon = 1e-14);
        assert_relative_eq!(squeezed_delta_rh(0.0, 0.4, eta(0.5)), -4.0, epsilon = 1e-14);
    }

    #[test]
    fn invalid_moments_are_rejected() {
        assert!(roulette_variance(2.0, 3.0, Efficiency::ONE).unwrap_err().is_validation());
        assert!(delta_rh(-1.0, 1.0, Efficiency::ONE).is_err());
        assert!(NoiseReport::new(f64::NAN, 1.0, Efficiency::ONE).is_err());
    }

    #[test]
    fn report_identities_and_verdicts() {
        let r = NoiseReport::new(2.0, 6.0, eta(0.4)).unwrap();
        assert!((r.roulette_var - (r.direct_var + r.added_roulette)).abs() < 1e-12);
        assert!((r.heterodyne_var - (r.direct_var + r.added_heterodyne)).abs() < 1e-12);
        assert!((r.roulette_var - r.heterodyne_var - r.delta_rh).abs() < 1e-12);

        assert_eq!(NoiseReport::new(1.0, 2.0, Efficiency::ONE).unwrap().verdict(), Verdict::Indifferent);
        assert_eq!(NoiseReport::new(0.0, 0.0, Efficiency::ONE).unwrap().verdict(), Verdict::Roulette);
        assert_eq!(NoiseReport::new(5.0, 25.0, Efficiency::ONE).unwrap().verdict(), Verdict::Heterodyne);
    }

    #[test]
    fn report_json_field_names() {
        let r = NoiseReport::new(1.0, 2.0, Efficiency::ONE).unwrap();
        let json = serde_json::to_value(r).unwrap();
        for key in ["rouletteVar", "directVar", "heterodyneVar", "addedRoulette", "addedHeterodyne", "deltaRH", "thresholdN"] {
            assert!(json.get(key).is_some(), "{key}");
        }
    }

    #[test]
    fn zero_line_intercepts() {
        let one = zero_line(Efficiency::ONE, 100, 2.0).unwrap();
        assert!((one.beta_zero_intercept - 1.0).abs() < 1e-10);
        let quarter = zero_line(eta(0.25), 100, 6.0).unwrap();
        assert!((quarter.beta_zero_intercept - 4.0).abs() < 1e-10);
        for p in one.points.iter().chain(&quarter.points) {
            assert!(p.converged);
            assert!((0.0..=1.0).contains(&p.beta));
            let e = eta(p.eta);
            assert!(squeezed_delta_rh(p.total, p.beta, e).abs() <= ZERO_LINE_TOL);
        }
        // beyond the β = 0 intercept the expression is positive everywhere
        assert!(one.no_root.iter().any(|&n| n > 1.0));
        assert!(one.points.iter().all(|p| p.total <= 1.0 + 1e-12));
    }

    #[test]
    fn zero_line_moves_right_for_lower_efficiency() {
        for beta in [0.0, 0.25, 0.5, 0.9] {
            let hi = root_total_at_beta(beta, Efficiency::ONE).unwrap();
            let lo = root_total_at_beta(beta, eta(0.5)).unwrap();
            assert!(lo > hi, "beta={beta}: {lo} vs {hi}");
        }
    }

    #[test]
    fn zero_line_is_execution_independent() {
        let a = zero_line_with(Execution::Sequential, eta(0.75), 57, 3.0).unwrap();
        let b = zero_line_with(Execution::Parallel(Some(4)), eta(0.75), 57, 3.0).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn zero_line_rejects_bad_arguments() {
        assert!(zero_line(Efficiency::ONE, 0, 1.0).is_err());
        assert!(zero_line(Efficiency::ONE, 10, -1.0).is_err());
    }

    #[test]
    fn coherent_crossover_is_inverse_efficiency() {
        for e in [1.0, 0.75, 0.5, 0.25, 0.1] {
            let n = coherent_crossover(eta(e), 1e-12).unwrap();
            assert!((n - 1.0 / e).abs() < 1e-9, "eta={e}: {n}");
        }
    }
}
