//! Data-aided phase estimation on a single pilot block.
//!
//! All three estimators consume the 1-bit samples `r[k]` and the noise-free
//! reference `s[k]` of one pilot block:
//!
//! * LS: `arg(sum s*[k] r[k])`.
//! * EM: replaces `r` by `s_theta + E[w | r; theta]` and iterates.
//! * Scoring: damped Newton steps along the score of the exact 1-bit
//!   likelihood, scaled by the (phase independent) inverse Fisher
//!   information.
//!
//! EM and scoring are always started from the LS estimate of the same block.

pub mod special;

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use special::{bessel_i0e, bessel_i1e, exp_over_q};

/// Fisher-information constant `c1`.
pub const KAPPA_C1: f64 = 4.0360;
/// Fisher-information constant `c2`.
pub const KAPPA_C2: f64 = 0.3930;

/// Largest update of the final iteration that still counts as settled.
pub const SETTLED_STEP: f64 = 1e-3;

const INV_SQRT_PI: f64 = 0.564_189_583_547_756_3;

/// Wraps an angle into `(-pi, pi]`.
pub fn wrap_angle(x: f64) -> f64 {
    let mut y = x.rem_euclid(2.0 * PI);
    if y > PI {
        y -= 2.0 * PI;
    }
    if y <= -PI {
        y += 2.0 * PI;
    }
    y
}

/// `arg(z)` in `(-pi, pi]`.
fn arg(z: Complex64) -> f64 {
    let a = z.im.atan2(z.re);
    if a == -PI {
        PI
    } else {
        a
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, PartialOrd, Ord)]
#[serde(rename_all = "snake_case")]
pub enum Algorithm {
    Ls,
    Em,
    Scoring,
}

impl Algorithm {
    pub const ALL: [Algorithm; 3] = [Algorithm::Ls, Algorithm::Em, Algorithm::Scoring];

    pub fn name(self) -> &'static str {
        match self {
            Algorithm::Ls => "ls",
            Algorithm::Em => "em",
            Algorithm::Scoring => "scoring",
        }
    }
}

impl std::str::FromStr for Algorithm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "ls" => Ok(Algorithm::Ls),
            "em" => Ok(Algorithm::Em),
            "scoring" => Ok(Algorithm::Scoring),
            other => Err(Error::InvalidSettings(format!("unknown algorithm `{other}`"))),
        }
    }
}

impl std::fmt::Display for Algorithm {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EstimatorSettings {
    pub algorithm: Algorithm,
    /// Number of EM or scoring updates; zero returns the initializer.
    pub iterations: usize,
    /// Scoring dampening factor in `(0, 1]`.
    pub epsilon: f64,
}

impl EstimatorSettings {
    pub fn em(iterations: usize) -> Self {
        EstimatorSettings {
            algorithm: Algorithm::Em,
            iterations,
            epsilon: 1.0,
        }
    }

    pub fn scoring(iterations: usize, epsilon: f64) -> Self {
        EstimatorSettings {
            algorithm: Algorithm::Scoring,
            iterations,
            epsilon,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.epsilon > 0.0 && self.epsilon <= 1.0) {
            return Err(Error::InvalidSettings(format!(
                "dampening factor {} outside (0, 1]",
                self.epsilon
            )));
        }
        Ok(())
    }
}

/// Samples of one pilot block.
#[derive(Debug, Clone, Copy)]
pub struct PilotBlockView<'a> {
    /// Quantized samples `r[k]`.
    pub r: &'a [Complex64],
    /// Reference samples `s[k]`, including the IF rotation.
    pub s: &'a [Complex64],
    /// Noise variance `sigma^2 = N0 / T_s`.
    pub sigma2: f64,
}

impl<'a> PilotBlockView<'a> {
    pub fn new(r: &'a [Complex64], s: &'a [Complex64], sigma2: f64) -> Result<Self> {
        if r.len() != s.len() {
            return Err(Error::LengthMismatch {
                expected: s.len(),
                actual: r.len(),
            });
        }
        Ok(PilotBlockView { r, s, sigma2 })
    }

    pub fn len(&self) -> usize {
        self.s.len()
    }

    pub fn is_empty(&self) -> bool {
        self.s.is_empty()
    }

    pub fn sigma(&self) -> f64 {
        self.sigma2.sqrt()
    }

    fn require_noise(&self) -> Result<()> {
        if !(self.sigma2 > 0.0) {
            return Err(Error::NonPositiveParameter {
                name: "sigma^2",
                value: self.sigma2,
            });
        }
        Ok(())
    }
}

/// Least-squares estimate `arg(sum s*[k] r[k])`.
pub fn ls_estimate(view: &PilotBlockView) -> Result<f64> {
    if view.is_empty() {
        return Err(Error::InvalidSettings("empty pilot block".into()));
    }
    let acc: Complex64 = view
        .s
        .iter()
        .zip(view.r)
        .map(|(s, r)| s.conj() * r)
        .sum();
    if acc.re == 0.0 && acc.im == 0.0 {
        return Err(Error::DegenerateSum);
    }
    Ok(arg(acc))
}

/// Conditional mean of the white noise sample given its 1-bit observation,
/// `E[w | r; theta]`, for the rotated reference sample `s_theta`.
pub fn em_noise_expectation(r: Complex64, s_theta: Complex64, sigma: f64) -> Complex64 {
    let scale = 0.5 * sigma * INV_SQRT_PI;
    let component = |r: f64, s: f64| r * scale * exp_over_q(-r * s / sigma);
    Complex64::new(component(r.re, s_theta.re), component(r.im, s_theta.im))
}

/// Runs exactly `iterations` EM updates from `init`.
pub fn em_estimate(view: &PilotBlockView, init: f64, iterations: usize) -> Result<f64> {
    if iterations == 0 {
        return Ok(init);
    }
    view.require_noise()?;
    let sigma = view.sigma();
    let mut theta = init;
    for _ in 0..iterations {
        let rot = Complex64::from_polar(1.0, theta);
        let acc: Complex64 = view
            .s
            .iter()
            .zip(view.r)
            .map(|(&s, &r)| {
                let s_theta = s * rot;
                s.conj() * (s_theta + em_noise_expectation(r, s_theta, sigma))
            })
            .sum();
        if acc.re == 0.0 && acc.im == 0.0 {
            break;
        }
        theta = arg(acc);
    }
    Ok(theta)
}

/// Score `d/d theta ln p(r | theta)` of the 1-bit likelihood.
pub fn score(view: &PilotBlockView, theta: f64) -> Result<f64> {
    view.require_noise()?;
    let sigma = view.sigma();
    let norm = INV_SQRT_PI / sigma;
    let rot = Complex64::from_polar(1.0, theta);
    Ok(view
        .s
        .iter()
        .zip(view.r)
        .map(|(&s, &r)| {
            let st = s * rot;
            let re = -r.re * exp_over_q(-r.re * st.re / sigma) * st.im;
            let im = r.im * exp_over_q(-r.im * st.im / sigma) * st.re;
            norm * (re + im)
        })
        .sum())
}

/// Parameters of the inverse Fisher information bound.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FisherInfoParams {
    pub es: f64,
    pub n0: f64,
    pub m_rx: usize,
    pub p: usize,
}

impl FisherInfoParams {
    /// Unit symbol energy at the given `E_s / N0` in dB.
    pub fn from_esn0_db(esn0_db: f64, m_rx: usize, p: usize) -> Self {
        FisherInfoParams {
            es: 1.0,
            n0: 10f64.powf(-esn0_db / 10.0),
            m_rx,
            p,
        }
    }
}

/// `kappa1(x) = c1 exp(-c2 x) (I0(c2 x) + I1(c2 x))`, for `x >= 0`.
pub fn kappa1(x: f64) -> f64 {
    let z = KAPPA_C2 * x;
    KAPPA_C1 * (bessel_i0e(z) + bessel_i1e(z))
}

/// Lower bound on the inverse Fisher information of a constant phase,
/// `( kappa1(Es / (N0 M_rx)) Es P / (pi N0) )^-1`.
pub fn fisher_info_inv(p: &FisherInfoParams) -> Result<f64> {
    if !(p.es > 0.0) {
        return Err(Error::NonPositiveParameter {
            name: "Es",
            value: p.es,
        });
    }
    if !(p.n0 > 0.0) {
        return Err(Error::NonPositiveParameter {
            name: "N0",
            value: p.n0,
        });
    }
    if p.m_rx == 0 || p.p == 0 {
        return Err(Error::InvalidSettings("P and M_rx must be at least 1".into()));
    }
    let snr = p.es / p.n0;
    let info = kappa1(snr / p.m_rx as f64) * snr * p.p as f64 / PI;
    Ok(1.0 / info)
}

/// Result of an iterative refinement.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Refinement {
    pub theta: f64,
    /// Magnitude of the last update.
    pub last_step: f64,
    /// False when an iterate became non-finite; `theta` is then the initializer.
    pub finite: bool,
}

impl Refinement {
    pub fn settled(&self) -> bool {
        self.finite && self.last_step <= SETTLED_STEP
    }
}

/// Damped Fisher scoring with diagnostics. The returned phase is wrapped
/// into `(-pi, pi]`.
pub fn scoring_refine(
    view: &PilotBlockView,
    init: f64,
    settings: &EstimatorSettings,
    fi_inv: f64,
) -> Result<Refinement> {
    settings.validate()?;
    let mut theta = init;
    let mut last_step = 0.0;
    for _ in 0..settings.iterations {
        let step = settings.epsilon * fi_inv * score(view, theta)?;
        if !step.is_finite() {
            return Ok(Refinement {
                theta: init,
                last_step: f64::INFINITY,
                finite: false,
            });
        }
        theta += step;
        last_step = step.abs();
    }
    Ok(Refinement {
        theta: wrap_angle(theta),
        last_step,
        finite: true,
    })
}

/// Runs exactly `settings.iterations` updates
/// `theta <- theta + epsilon * fi_inv * V(theta)` from `init`.
pub fn scoring_estimate(
    view: &PilotBlockView,
    init: f64,
    settings: &EstimatorSettings,
    fi_inv: f64,
) -> Result<f64> {
    scoring_refine(view, init, settings, fi_inv).map(|r| r.theta)
}
