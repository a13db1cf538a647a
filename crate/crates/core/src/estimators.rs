//! Unbiased intensity estimators and the general tomographic kernel.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::numerics::{ln_abs_hermite, ln_binomial};
use crate::pom::Efficiency;

/// Largest n + m accepted by [`richter_kernel`].
pub const MAX_KERNEL_ORDER: usize = 300;

/// Pattern function whose average over homodyne data (x, φ) is ⟨a†ⁿ aᵐ⟩:
/// e^{iφ(m−n)} H_{n+m}(√2 x) / (2^{(n+m)/2} C(n+m, m)).
pub fn richter_kernel(n: usize, m: usize, x: f64, phi: f64) -> Result<Complex64> {
    let order = n + m;
    if order > MAX_KERNEL_ORDER {
        return Err(Error::invalid(
            "n+m",
            format!("kernel order {order} exceeds {MAX_KERNEL_ORDER}"),
        ));
    }
    let (sign, ln_h) = ln_abs_hermite(order, std::f64::consts::SQRT_2 * x);
    let magnitude = if sign == 0.0 {
        0.0
    } else {
        let ln_div = 0.5 * order as f64 * std::f64::consts::LN_2 + ln_binomial(order as u64, m as u64);
        sign * (ln_h - ln_div).exp()
    };
    if n == m {
        return Ok(Complex64::new(magnitude, 0.0));
    }
    Ok(Complex64::from_polar(1.0, phi * (m as f64 - n as f64)) * magnitude)
}

/// Roulette intensity estimate y_η = 2x² − 1/(2η).
///
/// Values below the noiseless floor −½ are legitimate once η < 1 and are
/// kept as is.
pub fn intensity_estimator(x: f64, eta: Efficiency) -> f64 {
    2.0 * x * x - 0.5 / eta.value()
}

/// Heterodyne intensity estimate I_η = |α|² − 1/η.
pub fn heterodyne_estimator(alpha_re: f64, alpha_im: f64, eta: Efficiency) -> f64 {
    alpha_re * alpha_re + alpha_im * alpha_im - 1.0 / eta.value()
}
