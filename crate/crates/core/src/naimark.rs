//! Naimark extensions of discrete roulettes and the two-mode photocurrent.
//!
//! A discrete roulette picks observable k with probability z_k and measures
//! its projector family {E⁽ᵏ⁾_m}. Its POM Π_m = Σ_k z_k E⁽ᵏ⁾_m is recovered
//! as the partial trace of the orthogonal projectors
//! Ê_m = Σ_k E⁽ᵏ⁾_m ⊗ |ω_k⟩⟨ω_k| against the probe state Σ_k √z_k |ω_k⟩.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::numerics::ln_factorial;

/// Residual allowed when validating projector families and weights.
pub const SPEC_TOL: f64 = 1e-12;

/// Tail mass allowed outside a truncated coherent vector.
pub const COHERENT_TAIL_TOL: f64 = 1e-10;

pub type CMatrix = DMatrix<Complex64>;
pub type CVector = DVector<Complex64>;

fn max_abs(m: &CMatrix) -> f64 {
    m.iter().map(|c| c.norm()).fold(0.0, f64::max)
}

/// Projector families with their selection probabilities.
#[derive(Debug, Clone, PartialEq)]
pub struct RouletteSpec {
    system_dim: usize,
    weights: Vec<f64>,
    families: Vec<Vec<CMatrix>>,
}

impl RouletteSpec {
    /// Checks z_k ≥ 0, Σ z_k = 1 and, per family, E_m E_n = δ_mn E_n,
    /// E_m† = E_m and Σ_m E_m = 1, all to [`SPEC_TOL`].
    pub fn new(system_dim: usize, weights: Vec<f64>, families: Vec<Vec<CMatrix>>) -> Result<Self> {
        if system_dim == 0 {
            return Err(Error::invalid("systemDim", "must be positive"));
        }
        if weights.is_empty() || weights.len() != families.len() {
            return Err(Error::invalid(
                "z",
                format!("{} weights for {} families", weights.len(), families.len()),
            ));
        }
        if let Some(w) = weights.iter().find(|w| !(w.is_finite() && **w >= 0.0)) {
            return Err(Error::invalid("z", format!("weight {w} is not a probability")));
        }
        let total: f64 = weights.iter().sum();
        if (total - 1.0).abs() > SPEC_TOL {
            return Err(Error::invalid("z", format!("weights sum to {total}, residual {:e}", total - 1.0)));
        }
        let outcomes = families[0].len();
        for (k, family) in families.iter().enumerate() {
            if family.is_empty() || family.len() != outcomes {
                return Err(Error::invalid(
                    "projectorFamilies",
                    format!("family {k} has {} outcomes, expected {outcomes}", family.len()),
                ));
            }
            if let Some(bad) = family.iter().find(|e| e.shape() != (system_dim, system_dim)) {
                return Err(Error::Dimension(format!(
                    "family {k} holds a {:?} projector on a {system_dim}-dimensional system",
                    bad.shape()
                )));
            }
            let (orth, complete) = family_residuals(family);
            if orth > SPEC_TOL {
                return Err(Error::invalid(
                    "projectorFamilies",
                    format!("family {k} orthogonality residual {orth:e}"),
                ));
            }
            if complete > SPEC_TOL {
                return Err(Error::invalid(
                    "projectorFamilies",
                    format!("family {k} completeness residual {complete:e}"),
                ));
            }
        }
        Ok(Self {
            system_dim,
            weights,
            families,
        })
    }

    pub fn system_dim(&self) -> usize {
        self.system_dim
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn families(&self) -> &[Vec<CMatrix>] {
        &self.families
    }

    pub fn n_observables(&self) -> usize {
        self.weights.len()
    }

    pub fn n_outcomes(&self) -> usize {
        self.families[0].len()
    }

    /// Π_m = Σ_k z_k E⁽ᵏ⁾_m.
    pub fn pom(&self) -> Vec<CMatrix> {
        (0..self.n_outcomes())
            .map(|m| {
                self.families
                    .iter()
                    .zip(&self.weights)
                    .fold(CMatrix::zeros(self.system_dim, self.system_dim), |acc, (f, &z)| {
                        acc + &f[m] * Complex64::from(z)
                    })
            })
            .collect()
    }
}

/// Max entry of E_m E_n − δ_mn E_n (and of E_m − E_m†), and of Σ E_m − 1.
fn family_residuals(family: &[CMatrix]) -> (f64, f64) {
    let dim = family[0].nrows();
    let mut orth: f64 = 0.0;
    for (m, em) in family.iter().enumerate() {
        orth = orth.max(max_abs(&(em - em.adjoint())));
        for (n, en) in family.iter().enumerate() {
            let mut r = em * en;
            if m == n {
                r -= en;
            }
            orth = orth.max(max_abs(&r));
        }
    }
    let sum = family.iter().fold(CMatrix::zeros(dim, dim), |acc, e| acc + e);
    (orth, max_abs(&(sum - CMatrix::identity(dim, dim))))
}

/// Extended projectors on system ⊗ probe and the probe preparation.
#[derive(Debug, Clone, PartialEq)]
pub struct Extension {
    pub system_dim: usize,
    pub probe_dim: usize,
    pub projectors: Vec<CMatrix>,
    pub probe: CVector,
}

pub fn build_extension(spec: &RouletteSpec) -> Extension {
    let (ds, dp) = (spec.system_dim, spec.n_observables());
    let projectors = (0..spec.n_outcomes())
        .map(|m| {
            let mut e = CMatrix::zeros(ds * dp, ds * dp);
            for (k, family) in spec.families.iter().enumerate() {
                let mut omega = CMatrix::zeros(dp, dp);
                omega[(k, k)] = Complex64::from(1.0);
                e += family[m].kronecker(&omega);
            }
            e
        })
        .collect();
    let probe = CVector::from_iterator(dp, spec.weights.iter().map(|z| Complex64::from(z.sqrt())));
    Extension {
        system_dim: ds,
        probe_dim: dp,
        projectors,
        probe,
    }
}

/// Tr_P{(1 ⊗ |ψ⟩⟨ψ|) Ô} for an operator on system ⊗ probe, probe index fastest.
pub fn partial_trace_probe(op: &CMatrix, system_dim: usize, probe: &CVector) -> Result<CMatrix> {
    let dp = probe.len();
    if op.shape() != (system_dim * dp, system_dim * dp) {
        return Err(Error::Dimension(format!(
            "operator is {:?}, expected {} x {}",
            op.shape(),
            system_dim * dp,
            system_dim * dp
        )));
    }
    Ok(CMatrix::from_fn(system_dim, system_dim, |i, j| {
        let mut acc = Complex64::from(0.0);
        for p in 0..dp {
            for q in 0..dp {
                acc += probe[p] * probe[q].conj() * op[(i * dp + q, j * dp + p)];
            }
        }
        acc
    }))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct ExtensionReport {
    pub max_orthogonality_residual: f64,
    pub max_completeness_residual: f64,
    pub max_partial_trace_residual: f64,
}

impl ExtensionReport {
    pub fn max_residual(&self) -> f64 {
        self.max_orthogonality_residual
            .max(self.max_completeness_residual)
            .max(self.max_partial_trace_residual)
    }

    /// Entry-wise maximum of two reports.
    pub fn worst(self, other: Self) -> Self {
        Self {
            max_orthogonality_residual: self.max_orthogonality_residual.max(other.max_orthogonality_residual),
            max_completeness_residual: self.max_completeness_residual.max(other.max_completeness_residual),
            max_partial_trace_residual: self.max_partial_trace_residual.max(other.max_partial_trace_residual),
        }
    }
}

pub fn verify_extension(spec: &RouletteSpec, ext: &Extension) -> Result<ExtensionReport> {
    if ext.system_dim != spec.system_dim || ext.probe_dim != ext.probe.len() {
        return Err(Error::Dimension(format!(
            "extension is {} x {}, spec system is {} with probe vector of length {}",
            ext.system_dim,
            ext.probe_dim,
            spec.system_dim,
            ext.probe.len()
        )));
    }
    if ext.projectors.len() != spec.n_outcomes() {
        return Err(Error::Dimension(format!(
            "{} extended projectors for {} outcomes",
            ext.projectors.len(),
            spec.n_outcomes()
        )));
    }
    let big = ext.system_dim * ext.probe_dim;
    if let Some(bad) = ext.projectors.iter().find(|e| e.shape() != (big, big)) {
        return Err(Error::Dimension(format!("extended projector is {:?}, expected {big} x {big}", bad.shape())));
    }
    let (orth, complete) = family_residuals(&ext.projectors);
    let mut trace: f64 = 0.0;
    for (e, pi) in ext.projectors.iter().zip(spec.pom()) {
        trace = trace.max(max_abs(&(partial_trace_probe(e, ext.system_dim, &ext.probe)? - pi)));
    }
    Ok(ExtensionReport {
        max_orthogonality_residual: orth,
        max_completeness_residual: complete,
        max_partial_trace_residual: trace,
    })
}

/// Haar-like random unitary: QR of a complex Gaussian matrix with the phases
/// of R's diagonal folded back into Q.
fn random_unitary<R: Rng>(rng: &mut R, dim: usize) -> CMatrix {
    let g = CMatrix::from_fn(dim, dim, |_, _| {
        Complex64::new(rng.sample(StandardNormal), rng.sample(StandardNormal))
    });
    let qr = g.qr();
    let (mut q, r) = (qr.q(), qr.r());
    for j in 0..dim {
        let d = r[(j, j)];
        let phase = if d.norm() > 0.0 { d / d.norm() } else { Complex64::from(1.0) };
        for i in 0..dim {
            q[(i, j)] *= phase;
        }
    }
    q
}

/// Random valid spec with system dimension in 1..=max_dim and 1..=max_m
/// observables. Each family groups the columns of a random unitary into a
/// shared number of outcomes; some outcomes may be empty.
pub fn random_spec<R: Rng>(rng: &mut R, max_dim: usize, max_m: usize) -> Result<RouletteSpec> {
    if max_dim == 0 || max_m == 0 {
        return Err(Error::invalid("maxDim/maxM", "must be positive"));
    }
    let dim = rng.random_range(1..=max_dim);
    let m = rng.random_range(1..=max_m);
    let outcomes = rng.random_range(1..=dim);
    let raw: Vec<f64> = (0..m).map(|_| rng.random::<f64>() + 1e-3).collect();
    let total: f64 = raw.iter().sum();
    let weights = raw.iter().map(|w| w / total).collect();
    let families = (0..m)
        .map(|_| {
            let u = random_unitary(rng, dim);
            let mut family = vec![CMatrix::zeros(dim, dim); outcomes];
            for j in 0..dim {
                let label = if j < outcomes { j } else { rng.random_range(0..outcomes) };
                let col = u.column(j);
                family[label] += &col * col.adjoint();
            }
            family
        })
        .collect();
    RouletteSpec::new(dim, weights, families)
}

/// Builds and verifies `trials` random specs; trial i uses ChaCha8 stream i
/// of `seed`, so the reports do not depend on the execution mode.
pub fn random_trials(
    seed: u64,
    trials: usize,
    max_dim: usize,
    max_m: usize,
    exec: Execution,
) -> Result<Vec<ExtensionReport>> {
    let ids: Vec<usize> = (0..trials).collect();
    exec.map(&ids, |&i| {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(i as u64);
        let spec = random_spec(&mut rng, max_dim, max_m)?;
        verify_extension(&spec, &build_extension(&spec))
    })
    .into_iter()
    .collect()
}

/// Truncated annihilation operator on `dim` levels.
pub fn annihilation(dim: usize) -> DMatrix<f64> {
    DMatrix::from_fn(dim, dim, |i, j| if j == i + 1 { (j as f64).sqrt() } else { 0.0 })
}

/// Truncated ê_− = (b†b + 1)^{−1/2} b, the unit lowering shift.
pub fn phase_lowering(dim: usize) -> DMatrix<f64> {
    DMatrix::from_fn(dim, dim, |i, j| if j == i + 1 { 1.0 } else { 0.0 })
}

/// X̂ = a† ⊗ ê_− + a ⊗ ê_+ on truncated system ⊗ probe, probe index fastest.
pub fn two_mode_photocurrent(system_trunc: usize, probe_trunc: usize) -> Result<DMatrix<f64>> {
    if system_trunc < 2 || probe_trunc < 2 {
        return Err(Error::invalid("truncation", "system and probe truncations must be at least 2"));
    }
    let a = annihilation(system_trunc);
    let e_minus = phase_lowering(probe_trunc);
    Ok(a.transpose().kronecker(&e_minus) + a.kronecker(&e_minus.transpose()))
}

/// Mass of Poisson(mean) at n ≥ dim.
pub fn poisson_tail(mean: f64, dim: usize) -> f64 {
    if mean == 0.0 {
        return if dim == 0 { 1.0 } else { 0.0 };
    }
    let ln_mean = mean.ln();
    let mut tail = 0.0;
    let mut n = dim;
    loop {
        let term = (n as f64 * ln_mean - mean - ln_factorial(n as u64)).exp();
        tail += term;
        if n as f64 > mean && term <= tail * 1e-17 {
            return tail;
        }
        n += 1;
    }
}

/// Normalized coherent state amplitudes on `dim` levels.
pub fn coherent_vector(alpha: Complex64, dim: usize) -> CVector {
    let r = alpha.norm();
    let theta = alpha.arg();
    let mut v = CVector::from_fn(dim, |n, _| {
        let ln = if r == 0.0 {
            if n == 0 { 0.0 } else { f64::NEG_INFINITY }
        } else {
            -0.5 * r * r + n as f64 * r.ln() - 0.5 * ln_factorial(n as u64)
        };
        Complex64::from_polar(ln.exp(), n as f64 * theta)
    });
    let norm = v.norm();
    v /= Complex64::from(norm);
    v
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Truncations {
    pub system: usize,
    pub probe: usize,
}

impl Truncations {
    /// Smallest truncations leaving less than `tol` coherent mass outside.
    pub fn auto(alpha_abs: f64, z_max: f64, tol: f64) -> Self {
        let fit = |r: f64| {
            let mut d = 2;
            while poisson_tail(r * r, d) >= tol {
                d += 1;
            }
            d
        };
        Self {
            system: fit(alpha_abs),
            probe: fit(z_max),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct LadderPoint {
    pub z: f64,
    pub expectation: f64,
    pub deviation: f64,
}

/// Deviations of ⟨X̂⟩ from 2Re(αe^{−iφ}) along a ladder of probe amplitudes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct SemiclassicalLadder {
    pub alpha_re: f64,
    pub alpha_im: f64,
    pub phi: f64,
    pub target: f64,
    pub truncations: Truncations,
    pub points: Vec<LadderPoint>,
    pub monotone: bool,
}

/// ⟨α| ⊗ ⟨z e^{iφ}| X̂ |α⟩ ⊗ |z e^{iφ}⟩ against the homodyne limit 2Re(αe^{−iφ}).
///
/// The probe amplitudes are taken in the given order; `monotone` reports
/// whether the deviations never increase along it. The state is a product,
/// so the expectation factorizes over the same truncated matrices that make
/// up [`two_mode_photocurrent`].
pub fn semiclassical_check(
    alpha: Complex64,
    phi: f64,
    probe_amplitudes: &[f64],
    truncations: Truncations,
) -> Result<SemiclassicalLadder> {
    if !(alpha.re.is_finite() && alpha.im.is_finite() && phi.is_finite()) {
        return Err(Error::invalid("alpha/phi", "must be finite"));
    }
    if let Some(z) = probe_amplitudes.iter().find(|z| !(z.is_finite() && **z >= 0.0)) {
        return Err(Error::invalid("probeAmplitudes", format!("{z} is not a non-negative amplitude")));
    }
    if truncations.system < 2 || truncations.probe < 2 {
        return Err(Error::invalid("truncation", "system and probe truncations must be at least 2"));
    }
    let system_tail = poisson_tail(alpha.norm_sqr(), truncations.system);
    if system_tail >= COHERENT_TAIL_TOL {
        return Err(Error::Truncation(format!(
            "system truncation {} leaves coherent tail mass {system_tail:e}",
            truncations.system
        )));
    }
    let z_max = probe_amplitudes.iter().copied().fold(0.0, f64::max);
    let probe_tail = poisson_tail(z_max * z_max, truncations.probe);
    if probe_tail >= COHERENT_TAIL_TOL {
        return Err(Error::Truncation(format!(
            "probe truncation {} leaves coherent tail mass {probe_tail:e} at |z| = {z_max}",
            truncations.probe
        )));
    }

    let a = annihilation(truncations.system).map(Complex64::from);
    let e_minus = phase_lowering(truncations.probe).map(Complex64::from);
    let sys = coherent_vector(alpha, truncations.system);
    let a_mean = sys.dotc(&(&a * &sys));
    let target = 2.0 * (alpha * Complex64::from_polar(1.0, -phi)).re;

    let mut points = Vec::with_capacity(probe_amplitudes.len());
    for &z in probe_amplitudes {
        let probe = coherent_vector(Complex64::from_polar(z, phi), truncations.probe);
        let e_mean = probe.dotc(&(&e_minus * &probe));
        // ⟨a†⟩⟨ê_−⟩ + ⟨a⟩⟨ê_+⟩ = 2 Re(⟨a†⟩⟨ê_−⟩)
        let expectation = 2.0 * (a_mean.conj() * e_mean).re;
        points.push(LadderPoint {
            z,
            expectation,
            deviation: (expectation - target).abs(),
        });
    }
    let monotone = points.windows(2).all(|w| w[1].deviation <= w[0].deviation);
    Ok(SemiclassicalLadder {
        alpha_re: alpha.re,
        alpha_im: alpha.im,
        phi,
        target,
        truncations,
        points,
        monotone,
    })
}
