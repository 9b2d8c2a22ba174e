//! Gaussian tail and modified Bessel functions.
//!
//! The 1-bit likelihood terms contain ratios `exp(-a^2) / Q(-+sqrt(2) a)` that
//! overflow or turn into `0/0` when evaluated directly at high SNR. They go
//! through [`exp_over_q`], which is built on the scaled complementary error
//! function `erfcx(x) = exp(x^2) erfc(x)`.

use std::f64::consts::{FRAC_1_SQRT_2, PI};

use libm::erfc;

/// Below this argument `erfcx` is evaluated as `exp(x^2) erfc(x)`.
const ERFCX_DIRECT_LIMIT: f64 = 5.0;
const ERFCX_CF_TERMS: usize = 80;

/// Gaussian tail probability `Q(x) = P(N(0,1) > x)`.
pub fn gaussian_q(x: f64) -> f64 {
    0.5 * erfc(x * FRAC_1_SQRT_2)
}

/// Scaled complementary error function `exp(x^2) erfc(x)`.
pub fn erfcx(x: f64) -> f64 {
    if x < 0.0 {
        // erfc(x) = 2 - erfc(-x)
        return 2.0 * (x * x).exp() - erfcx(-x);
    }
    if x < ERFCX_DIRECT_LIMIT {
        return (x * x).exp() * erfc(x);
    }
    // Laplace continued fraction erfc(x) = exp(-x^2)/sqrt(pi) / (x + (1/2)/(x + 1/(x + (3/2)/(x + ...))))
    let mut f = x;
    for k in (1..=ERFCX_CF_TERMS).rev() {
        f = x + 0.5 * k as f64 / f;
    }
    1.0 / (PI.sqrt() * f)
}

/// `ln Q(x)`, accurate deep into both tails.
pub fn log_q(x: f64) -> f64 {
    if x > 1.0 {
        let z = x * FRAC_1_SQRT_2;
        (0.5 * erfcx(z)).ln() - z * z
    } else if x < -1.0 {
        (-gaussian_q(-x)).ln_1p()
    } else {
        gaussian_q(x).ln()
    }
}

/// Fused ratio `exp(-x^2) / Q(sqrt(2) x)`.
///
/// Grows like `2 sqrt(pi) x` for large positive `x` and decays to zero for
/// large negative `x`; never overflows.
pub fn exp_over_q(x: f64) -> f64 {
    if x >= 0.0 {
        2.0 / erfcx(x)
    } else {
        // erfc(x) is in (1, 2] here
        2.0 * (-x * x).exp() / erfc(x)
    }
}

const BESSEL_SERIES_LIMIT: f64 = 30.0;

fn series_i0(x: f64) -> f64 {
    let q = 0.25 * x * x;
    let (mut term, mut sum) = (1.0, 1.0);
    let mut k = 1.0;
    loop {
        term *= q / (k * k);
        sum += term;
        if term < sum * 1e-17 {
            return sum;
        }
        k += 1.0;
    }
}

fn series_i1(x: f64) -> f64 {
    let q = 0.25 * x * x;
    let (mut term, mut sum) = (1.0, 1.0);
    let mut k = 1.0;
    loop {
        term *= q / (k * (k + 1.0));
        sum += term;
        if term < sum * 1e-17 {
            return 0.5 * x * sum;
        }
        k += 1.0;
    }
}

/// Hankel expansion of `sqrt(2 pi x) exp(-x) I_nu(x)` for large `x > 0`.
fn asymptotic_scaled(nu: f64, x: f64) -> f64 {
    let mu = 4.0 * nu * nu;
    let (mut term, mut sum) = (1.0f64, 1.0f64);
    for k in 1..200 {
        let odd = (2 * k - 1) as f64;
        let next = -term * (mu - odd * odd) / (k as f64 * 8.0 * x);
        if next.abs() >= term.abs() {
            break;
        }
        term = next;
        sum += term;
        if term.abs() < 1e-17 * sum.abs() {
            break;
        }
    }
    sum / (2.0 * PI * x).sqrt()
}

/// Modified Bessel function of the first kind, order zero.
pub fn bessel_i0(x: f64) -> f64 {
    let ax = x.abs();
    if ax <= BESSEL_SERIES_LIMIT {
        series_i0(ax)
    } else {
        asymptotic_scaled(0.0, ax) * ax.exp()
    }
}

/// Modified Bessel function of the first kind, order one.
pub fn bessel_i1(x: f64) -> f64 {
    let ax = x.abs();
    let v = if ax <= BESSEL_SERIES_LIMIT {
        series_i1(ax)
    } else {
        asymptotic_scaled(1.0, ax) * ax.exp()
    };
    v.copysign(x)
}

/// `exp(-|x|) I0(x)`.
pub fn bessel_i0e(x: f64) -> f64 {
    let ax = x.abs();
    if ax <= BESSEL_SERIES_LIMIT {
        series_i0(ax) * (-ax).exp()
    } else {
        asymptotic_scaled(0.0, ax)
    }
}

/// `exp(-|x|) I1(x)`.
pub fn bessel_i1e(x: f64) -> f64 {
    let ax = x.abs();
    let v = if ax <= BESSEL_SERIES_LIMIT {
        series_i1(ax) * (-ax).exp()
    } else {
        asymptotic_scaled(1.0, ax)
    };
    v.copysign(x)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn q_at_zero_and_symmetry() {
        assert_eq!(gaussian_q(0.0), 0.5);
        for x in [0.1, 1.0, 3.0, 7.5] {
            assert_relative_eq!(gaussian_q(x) + gaussian_q(-x), 1.0, epsilon = 1e-15);
        }
    }

    #[test]
    fn bessel_at_zero() {
        assert_eq!(bessel_i0(0.0), 1.0);
        assert_eq!(bessel_i1(0.0), 0.0);
        assert_eq!(bessel_i0e(0.0), 1.0);
    }

    #[test]
    fn erfcx_branches_agree() {
        let a = (ERFCX_DIRECT_LIMIT * ERFCX_DIRECT_LIMIT).exp() * erfc(ERFCX_DIRECT_LIMIT);
        assert_relative_eq!(erfcx(ERFCX_DIRECT_LIMIT), a, max_relative = 1e-13);
    }

    #[test]
    fn bessel_branches_agree() {
        let x = BESSEL_SERIES_LIMIT;
        assert_relative_eq!(
            series_i0(x) * (-x).exp(),
            asymptotic_scaled(0.0, x),
            max_relative = 1e-14
        );
        assert_relative_eq!(
            series_i1(x) * (-x).exp(),
            asymptotic_scaled(1.0, x),
            max_relative = 1e-14
        );
    }

    #[test]
    fn fused_ratio_is_finite_everywhere() {
        for i in -2000..=2000 {
            let x = i as f64 * 0.05;
            let v = exp_over_q(x);
            assert!(v.is_finite() && v >= 0.0, "x = {x}: {v}");
        }
        assert_relative_eq!(exp_over_q(0.0), 2.0, epsilon = 1e-15);
        // 2 sqrt(pi) x asymptote
        assert_relative_eq!(exp_over_q(1e6), 2.0 * PI.sqrt() * 1e6, max_relative = 1e-9);
    }

    #[test]
    fn log_q_matches_direct_log() {
        for x in [-5.0, -1.5, -0.3, 0.0, 0.8, 2.0, 6.0, 20.0] {
            assert_relative_eq!(log_q(x), gaussian_q(x).ln(), max_relative = 1e-12);
        }
        // far tail where Q underflows: ln Q ~ -x^2/2 - ln(x sqrt(2 pi))
        let x = 100.0;
        let approx = -0.5 * x * x - (x * (2.0 * PI).sqrt()).ln();
        assert_relative_eq!(log_q(x), approx, max_relative = 1e-7);
    }
}
