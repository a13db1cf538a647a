//! Special functions, adaptive quadrature and tabulated inverse-CDF sampling.
//!
//! Everything in here is a pure function of its inputs. The oscillator
//! densities are evaluated through a rescaled recurrence on the normalized
//! Hermite functions, so orders in the thousands stay finite even where the
//! raw polynomial would overflow and the Gaussian weight would underflow.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// √(2/π), the normalization of the vacuum quadrature density.
pub const SQRT_2_OVER_PI: f64 = 0.797_884_560_802_865_4;

const LN_SQRT_2_OVER_PI: f64 = -0.225_791_352_644_727_4;

/// Default absolute tolerance for quadrature.
pub const DEFAULT_QUAD_TOL: f64 = 1e-10;

/// Default Kolmogorov–Smirnov accuracy for sampling tables.
pub const DEFAULT_TABLE_TOL: f64 = 1e-6;

const RESCALE_ABOVE: f64 = 1e150;
const RESCALE_FACTOR: f64 = 1e-150;
const LN_RESCALE: f64 = 345.387_763_949_107_0; // 150 ln 10

/// Physicists' Hermite polynomial by the three-term recurrence.
///
/// Overflows to ±inf for large `n` and `|x|`; use [`oscillator_density`]
/// when the Gaussian-weighted square is what is actually needed.
pub fn hermite_h(n: usize, x: f64) -> f64 {
    let mut prev = 1.0;
    if n == 0 {
        return prev;
    }
    let mut cur = 2.0 * x;
    for k in 1..n {
        let next = 2.0 * x * cur - 2.0 * k as f64 * prev;
        prev = cur;
        cur = next;
    }
    cur
}

/// Walks g_k(u) = H_k(u) / √(2ᵏ k!) as a mantissa plus a natural-log scale.
#[derive(Debug, Clone)]
struct ScaledHermite {
    u: f64,
    k: usize,
    prev: f64,
    cur: f64,
    log_scale: f64,
}

impl ScaledHermite {
    fn new(u: f64) -> Self {
        Self {
            u,
            k: 0,
            prev: 0.0,
            cur: 1.0,
            log_scale: 0.0,
        }
    }

    fn advance(&mut self) {
        let k = self.k as f64;
        let next = (2.0 / (k + 1.0)).sqrt() * self.u * self.cur - (k / (k + 1.0)).sqrt() * self.prev;
        self.prev = self.cur;
        self.cur = next;
        self.k += 1;
        if self.cur.abs() > RESCALE_ABOVE {
            self.cur *= RESCALE_FACTOR;
            self.prev *= RESCALE_FACTOR;
            self.log_scale += LN_RESCALE;
        }
    }

    /// ln |g_k(u)|, `-inf` at a zero.
    fn ln_abs(&self) -> f64 {
        self.cur.abs().ln() + self.log_scale
    }

    /// ln of √(2/π) e^{-u²} g_k(u)², i.e. the oscillator density at x = u/√2.
    fn ln_density(&self) -> f64 {
        LN_SQRT_2_OVER_PI + 2.0 * self.ln_abs() - self.u * self.u
    }
}

/// Diagonal weight of the roulette POM for photon number `n`:
/// √(2/π) e^{-2x²} H_n(√2 x)² / (2ⁿ n!).
///
/// This is |⟨x|n⟩|² for the quadrature x̂ = (a + a†)/2 and integrates to one.
pub fn oscillator_density(n: usize, x: f64) -> f64 {
    let mut g = ScaledHermite::new(std::f64::consts::SQRT_2 * x);
    for _ in 0..n {
        g.advance();
    }
    g.ln_density().exp()
}

/// Fills `out[k]` with `oscillator_density(k, x)` for every `k < out.len()`
/// using a single recurrence pass.
pub fn oscillator_densities(x: f64, out: &mut [f64]) {
    let mut g = ScaledHermite::new(std::f64::consts::SQRT_2 * x);
    for (k, slot) in out.iter_mut().enumerate() {
        if k > 0 {
            g.advance();
        }
        *slot = g.ln_density().exp();
    }
}

/// Σ_k `weights[k]` · `oscillator_density(k, x)` in one recurrence pass.
pub fn oscillator_mixture(weights: &[f64], x: f64) -> f64 {
    let mut g = ScaledHermite::new(std::f64::consts::SQRT_2 * x);
    let mut total = 0.0;
    for (k, &w) in weights.iter().enumerate() {
        if k > 0 {
            g.advance();
        }
        if w != 0.0 {
            total += w * g.ln_density().exp();
        }
    }
    total
}

/// Sign and natural log of |H_n(x)|, finite far beyond where `hermite_h`
/// overflows.
pub fn ln_abs_hermite(n: usize, x: f64) -> (f64, f64) {
    let mut g = ScaledHermite::new(x);
    for _ in 0..n {
        g.advance();
    }
    let sign = if g.cur == 0.0 { 0.0 } else { g.cur.signum() };
    let ln = g.ln_abs() + 0.5 * (n as f64 * std::f64::consts::LN_2 + ln_factorial(n as u64));
    (sign, ln)
}

/// ln n!.
pub fn ln_factorial(n: u64) -> f64 {
    if n < 2 {
        0.0
    } else {
        statrs::function::gamma::ln_gamma(n as f64 + 1.0)
    }
}

/// ln C(n, k).
pub fn ln_binomial(n: u64, k: u64) -> f64 {
    debug_assert!(k <= n);
    ln_factorial(n) - ln_factorial(k) - ln_factorial(n - k)
}

/// Neumaier-compensated running sum.
#[derive(Debug, Clone, Copy, Default)]
pub struct CompensatedSum {
    sum: f64,
    carry: f64,
}

impl CompensatedSum {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, value: f64) {
        let t = self.sum + value;
        if self.sum.abs() >= value.abs() {
            self.carry += (self.sum - t) + value;
        } else {
            self.carry += (value - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn value(&self) -> f64 {
        self.sum + self.carry
    }
}

impl FromIterator<f64> for CompensatedSum {
    fn from_iter<I: IntoIterator<Item = f64>>(iter: I) -> Self {
        let mut s = CompensatedSum::new();
        for v in iter {
            s.add(v);
        }
        s
    }
}

// ---------------------------------------------------------------------------
// Quadrature
// ---------------------------------------------------------------------------

const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];

const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_8,
];

const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

const MAX_SUBINTERVALS: usize = 20_000;
const INITIAL_PIECES: usize = 8;

/// One 15-point Gauss–Kronrod panel: (estimate, error estimate).
fn gauss_kronrod_15<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> (f64, f64) {
    let centre = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let fc = f(centre);
    let mut res_g = fc * WG[3];
    let mut res_k = fc * WGK[7];
    let mut res_abs = res_k.abs();
    let mut fv1 = [0.0; 7];
    let mut fv2 = [0.0; 7];
    for j in 0..7 {
        let dx = half * XGK[j];
        let f1 = f(centre - dx);
        let f2 = f(centre + dx);
        fv1[j] = f1;
        fv2[j] = f2;
        res_k += WGK[j] * (f1 + f2);
        res_abs += WGK[j] * (f1.abs() + f2.abs());
        if j % 2 == 1 {
            res_g += WG[j / 2] * (f1 + f2);
        }
    }
    let mean = 0.5 * res_k;
    let mut res_asc = WGK[7] * (fc - mean).abs();
    for j in 0..7 {
        res_asc += WGK[j] * ((fv1[j] - mean).abs() + (fv2[j] - mean).abs());
    }
    let result = res_k * half;
    let res_abs = res_abs * half.abs();
    let res_asc = res_asc * half.abs();
    let mut err = ((res_k - res_g) * half).abs();
    if res_asc != 0.0 && err != 0.0 {
        err = res_asc * (200.0 * err / res_asc).powf(1.5).min(1.0);
    }
    if res_abs > f64::MIN_POSITIVE / (50.0 * f64::EPSILON) {
        err = err.max(50.0 * f64::EPSILON * res_abs);
    }
    (result, err)
}

#[derive(Debug, Clone, Copy)]
struct Panel {
    a: f64,
    b: f64,
    value: f64,
    err: f64,
}

impl PartialEq for Panel {
    fn eq(&self, other: &Self) -> bool {
        self.err.total_cmp(&other.err) == Ordering::Equal
    }
}
impl Eq for Panel {}
impl PartialOrd for Panel {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Panel {
    fn cmp(&self, other: &Self) -> Ordering {
        self.err.total_cmp(&other.err)
    }
}

/// Globally adaptive Gauss–Kronrod on a finite interval.
fn adaptive_finite<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, tol: f64) -> Result<f64> {
    let mut heap = BinaryHeap::new();
    let width = (b - a) / INITIAL_PIECES as f64;
    for i in 0..INITIAL_PIECES {
        let lo = a + width * i as f64;
        let hi = if i + 1 == INITIAL_PIECES { b } else { lo + width };
        let (value, err) = gauss_kronrod_15(f, lo, hi);
        heap.push(Panel { a: lo, b: hi, value, err });
    }
    let totals = |heap: &BinaryHeap<Panel>| {
        let value: CompensatedSum = heap.iter().filter(|p| p.value.is_finite()).map(|p| p.value).collect();
        let err: f64 = heap.iter().map(|p| p.err).sum();
        (value.value(), err)
    };
    let mut err_total: f64 = heap.iter().map(|p| p.err).sum();
    // A non-finite error means the integrand blew up at a node.
    while !(err_total <= tol) {
        if !err_total.is_finite() {
            let (estimate, error_estimate) = totals(&heap);
            return Err(Error::NonConvergence {
                what: "adaptive quadrature",
                estimate,
                error_estimate,
            });
        }
        if heap.len() >= MAX_SUBINTERVALS {
            let (estimate, error_estimate) = totals(&heap);
            return Err(Error::NonConvergence {
                what: "adaptive quadrature",
                estimate,
                error_estimate,
            });
        }
        let worst = heap.pop().expect("heap is never empty");
        let mid = 0.5 * (worst.a + worst.b);
        if mid <= worst.a || mid >= worst.b {
            heap.push(worst);
            let (estimate, error_estimate) = totals(&heap);
            if error_estimate <= tol {
                return Ok(estimate);
            }
            return Err(Error::NonConvergence {
                what: "adaptive quadrature",
                estimate,
                error_estimate,
            });
        }
        let (lv, le) = gauss_kronrod_15(f, worst.a, mid);
        let (rv, re) = gauss_kronrod_15(f, mid, worst.b);
        heap.push(Panel { a: worst.a, b: mid, value: lv, err: le });
        heap.push(Panel { a: mid, b: worst.b, value: rv, err: re });
        err_total += le + re - worst.err;
        if err_total <= tol {
            // Running total drifts; confirm against a fresh sum.
            err_total = heap.iter().map(|p| p.err).sum();
        }
    }
    Ok(totals(&heap).0)
}

fn check_bounds(lower: f64, upper: f64, tol: f64) -> Result<()> {
    if lower.is_nan() || upper.is_nan() {
        return Err(Error::invalid("bounds", "NaN integration bound"));
    }
    if !(tol > 0.0) {
        return Err(Error::invalid("tol", format!("must be positive, got {tol}")));
    }
    if lower > upper {
        return Err(Error::invalid(
            "bounds",
            format!("lower bound {lower} exceeds upper bound {upper}"),
        ));
    }
    Ok(())
}

/// Adaptive quadrature of `f` over `[lower, upper]` to absolute accuracy `tol`.
///
/// Infinite bounds are mapped onto a finite interval (x = t/(1-t²) for the
/// whole line, x = a + t/(1-t) for half lines). Fails with
/// [`Error::NonConvergence`] carrying the best estimate when the subdivision
/// budget runs out.
pub fn integrate<F: Fn(f64) -> f64>(f: F, lower: f64, upper: f64, tol: f64) -> Result<f64> {
    check_bounds(lower, upper, tol)?;
    if lower == upper {
        return Ok(0.0);
    }
    match (lower.is_finite(), upper.is_finite()) {
        (true, true) => adaptive_finite(&f, lower, upper, tol),
        (false, false) => {
            let g = |t: f64| {
                let d = 1.0 - t * t;
                if d <= 0.0 {
                    return 0.0;
                }
                let v = f(t / d);
                if v == 0.0 {
                    0.0
                } else {
                    v * (1.0 + t * t) / (d * d)
                }
            };
            adaptive_finite(&g, -1.0, 1.0, tol)
        }
        (true, false) => {
            let g = |t: f64| {
                let d = 1.0 - t;
                if d <= 0.0 {
                    return 0.0;
                }
                let v = f(lower + t / d);
                if v == 0.0 {
                    0.0
                } else {
                    v / (d * d)
                }
            };
            adaptive_finite(&g, 0.0, 1.0, tol)
        }
        (false, true) => {
            let g = |t: f64| {
                if t <= 0.0 {
                    return 0.0;
                }
                let v = f(upper - (1.0 - t) / t);
                if v == 0.0 {
                    0.0
                } else {
                    v / (t * t)
                }
            };
            adaptive_finite(&g, 0.0, 1.0, tol)
        }
    }
}

/// Like [`integrate`], for integrands with an inverse-square-root
/// singularity at a finite `lower` bound. Substitutes x = lower + s².
pub fn integrate_singular_lower<F: Fn(f64) -> f64>(
    f: F,
    lower: f64,
    upper: f64,
    tol: f64,
) -> Result<f64> {
    check_bounds(lower, upper, tol)?;
    if !lower.is_finite() {
        return Err(Error::invalid("bounds", "singular lower bound must be finite"));
    }
    let s_max = if upper.is_finite() {
        (upper - lower).sqrt()
    } else {
        f64::INFINITY
    };
    integrate(
        |s: f64| {
            if s == 0.0 {
                0.0
            } else {
                2.0 * s * f(lower + s * s)
            }
        },
        0.0,
        s_max,
        tol,
    )
}

// ---------------------------------------------------------------------------
// Inverse-CDF tables
// ---------------------------------------------------------------------------

/// Tabulated cumulative distribution supporting inverse-CDF draws.
///
/// Piecewise-linear in the CDF between grid nodes, i.e. piecewise-uniform
/// within each cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DensityTable {
    grid: Vec<f64>,
    cdf: Vec<f64>,
    domain: (f64, f64),
}

impl DensityTable {
    pub fn grid(&self) -> &[f64] {
        &self.grid
    }

    pub fn cdf(&self) -> &[f64] {
        &self.cdf
    }

    pub fn domain(&self) -> (f64, f64) {
        self.domain
    }

    /// Interpolated CDF value at `x`.
    pub fn cdf_at(&self, x: f64) -> f64 {
        let i = self.grid.partition_point(|&g| g <= x);
        if i == 0 {
            return 0.0;
        }
        if i == self.grid.len() {
            return 1.0;
        }
        let (g0, g1) = (self.grid[i - 1], self.grid[i]);
        let (c0, c1) = (self.cdf[i - 1], self.cdf[i]);
        c0 + (c1 - c0) * (x - g0) / (g1 - g0)
    }

    /// Inverse CDF for `u ∈ [0, 1]`.
    pub fn quantile(&self, u: f64) -> f64 {
        let i = self.cdf.partition_point(|&c| c <= u);
        if i == 0 {
            return self.grid[0];
        }
        if i == self.cdf.len() {
            return self.grid[self.grid.len() - 1];
        }
        let (c0, c1) = (self.cdf[i - 1], self.cdf[i]);
        let (g0, g1) = (self.grid[i - 1], self.grid[i]);
        g0 + (g1 - g0) * (u - c0) / (c1 - c0)
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        self.quantile(rng.random::<f64>())
    }
}

/// Builds an inverse-CDF table with 512 initial cells.
pub fn build_inverse_cdf<F: Fn(f64) -> f64>(
    density: F,
    domain: (f64, f64),
    tol: f64,
) -> Result<DensityTable> {
    build_inverse_cdf_with(density, domain, tol, 512)
}

/// Builds an inverse-CDF table for `density` on the finite `domain`.
///
/// Cells are bisected until the linear-in-CDF interpolation error at the
/// cell midpoint is below `tol / 4`, so the tabulated CDF stays within `tol`
/// of the true one. Oscillatory densities need enough `initial_cells` that
/// no cell spans a full lobe.
pub fn build_inverse_cdf_with<F: Fn(f64) -> f64>(
    density: F,
    domain: (f64, f64),
    tol: f64,
    initial_cells: usize,
) -> Result<DensityTable> {
    let (lo, hi) = domain;
    if !(lo.is_finite() && hi.is_finite() && lo < hi) {
        return Err(Error::invalid(
            "domain",
            format!("need a finite interval with lower < upper, got ({lo}, {hi})"),
        ));
    }
    if !(tol > 0.0) {
        return Err(Error::invalid("tol", format!("must be positive, got {tol}")));
    }
    let cells = initial_cells.max(1);
    let width = (hi - lo) / cells as f64;

    let mass = |a: f64, b: f64| gauss_kronrod_15(&density, a, b).0;
    let mut grid = vec![lo];
    let mut masses: Vec<f64> = Vec::new();
    let mut stack: Vec<(f64, f64, u32)> = Vec::new();
    for i in (0..cells).rev() {
        let a = lo + width * i as f64;
        let b = if i + 1 == cells { hi } else { a + width };
        stack.push((a, b, 0));
    }
    while let Some((a, b, depth)) = stack.pop() {
        let m = 0.5 * (a + b);
        let left = mass(a, m);
        let right = mass(m, b);
        if left < 0.0 || right < 0.0 || !left.is_finite() || !right.is_finite() {
            return Err(Error::invalid("density", format!("negative or non-finite mass on [{a}, {b}]")));
        }
        let deviation = 0.5 * (left - right).abs();
        if deviation <= 0.25 * tol || depth >= 48 || m <= a || m >= b {
            grid.push(m);
            masses.push(left);
            grid.push(b);
            masses.push(right);
        } else {
            stack.push((m, b, depth + 1));
            stack.push((a, m, depth + 1));
        }
    }

    let mut running = CompensatedSum::new();
    let mut cdf = Vec::with_capacity(grid.len());
    cdf.push(0.0);
    for &w in &masses {
        running.add(w);
        cdf.push(running.value());
    }
    let total = running.value();
    if !((total - 1.0).abs() <= tol) {
        return Err(Error::NotNormalizable { mass: total, tol });
    }
    for c in cdf.iter_mut() {
        *c /= total;
    }
    *cdf.last_mut().expect("nonempty") = 1.0;

    Ok(DensityTable { grid, cdf, domain })
}

/// Inverse-CDF table for |⟨x|n⟩|².
///
/// The domain extends six units past the classical turning point
/// √(n + ½), beyond which the density is below 1e-30.
pub fn oscillator_table(n: usize, tol: f64) -> Result<DensityTable> {
    let half_width = (n as f64 + 0.5).sqrt() + 6.0;
    build_inverse_cdf_with(
        |x| oscillator_density(n, x),
        (-half_width, half_width),
        tol,
        256 + 16 * n,
    )
}
