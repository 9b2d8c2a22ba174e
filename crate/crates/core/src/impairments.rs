//! Oscillator phase noise, AWGN, receive filtering and 1-bit quantization.
//!
//! Phase noise is the sum of a white component `theta0 ~ N(0, 2 K0 W_g)` and
//! a Wiener component `theta2[k] = theta2[k-1] + zeta2[k]` with
//! `zeta2 ~ N(0, 4 K2 pi^2 T_s)`. The flicker (cubic) component is not
//! modeled.

use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::framing::FrameConfig;
use crate::rng::rng_from_seed;
use crate::waveform::{filter_padded, PulseShape, ReferenceSignal};

/// Phase noise statistics. Times are physical (seconds, Hz).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhaseNoiseParams {
    /// White phase-noise level `K0` in rad^2/Hz.
    pub k0: f64,
    /// Wiener coefficient `K2` in rad^2 Hz.
    pub k2: f64,
    /// Sample period `T_s` in seconds.
    pub ts: f64,
    /// Single-sided receive filter bandwidth `W_g` in Hz.
    pub wg: f64,
    pub theta_init: f64,
}

impl PhaseNoiseParams {
    /// `K0` given as `10 log10(K0)`.
    pub fn from_db(k0_db: f64, k2: f64, ts: f64, wg: f64) -> Self {
        PhaseNoiseParams {
            k0: 10f64.powf(k0_db / 10.0),
            k2,
            ts,
            wg,
            theta_init: 0.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        for (name, value) in [("K0", self.k0), ("K2", self.k2)] {
            if !(value >= 0.0) {
                return Err(Error::NegativeParameter { name, value });
            }
        }
        for (name, value) in [("T_s", self.ts), ("W_g", self.wg)] {
            if !(value > 0.0) {
                return Err(Error::NonPositiveParameter { name, value });
            }
        }
        Ok(())
    }

    /// `var(theta0) = 2 K0 W_g`.
    pub fn white_variance(&self) -> f64 {
        2.0 * self.k0 * self.wg
    }

    /// `var(zeta2) = 4 K2 pi^2 T_s`.
    pub fn increment_variance(&self) -> f64 {
        4.0 * self.k2 * std::f64::consts::PI.powi(2) * self.ts
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PhaseTrajectory {
    /// `theta[k] = theta0[k] + theta2[k]`.
    pub theta: Vec<f64>,
    /// Wiener component alone.
    pub theta2: Vec<f64>,
}

impl PhaseTrajectory {
    /// Trajectory held at a constant phase.
    pub fn constant(value: f64, n: usize) -> Self {
        PhaseTrajectory {
            theta: vec![value; n],
            theta2: vec![value; n],
        }
    }

    pub fn len(&self) -> usize {
        self.theta.len()
    }

    pub fn is_empty(&self) -> bool {
        self.theta.is_empty()
    }
}

pub fn phase_from<R: Rng + ?Sized>(
    params: &PhaseNoiseParams,
    n: usize,
    rng: &mut R,
) -> Result<PhaseTrajectory> {
    params.validate()?;
    let white_std = params.white_variance().sqrt();
    let step_std = params.increment_variance().sqrt();
    let mut theta = Vec::with_capacity(n);
    let mut theta2 = Vec::with_capacity(n);
    let mut walk = params.theta_init;
    for _ in 0..n {
        let zeta: f64 = rng.sample(StandardNormal);
        let white: f64 = rng.sample(StandardNormal);
        walk += step_std * zeta;
        theta2.push(walk);
        theta.push(walk + white_std * white);
    }
    Ok(PhaseTrajectory { theta, theta2 })
}

/// Draws `n` samples of phase noise; `theta2[-1] = theta_init`.
pub fn generate_phase(params: &PhaseNoiseParams, n: usize, seed: u64) -> Result<PhaseTrajectory> {
    phase_from(params, n, &mut rng_from_seed(seed))
}

/// Sampled time-averaged phase noise of block `m`: the mean of `theta` over
/// the block's samples.
pub fn stapn(theta: &PhaseTrajectory, cfg: &FrameConfig, m: usize) -> Result<f64> {
    let range = cfg.block_sample_range(m)?;
    if range.end > theta.len() {
        return Err(Error::LengthMismatch {
            expected: cfg.samples(),
            actual: theta.len(),
        });
    }
    let len = range.len() as f64;
    Ok(theta.theta[range].iter().sum::<f64>() / len)
}

/// STAPN of every block.
pub fn stapn_all(theta: &PhaseTrajectory, cfg: &FrameConfig) -> Result<Vec<f64>> {
    (0..cfg.blocks()).map(|m| stapn(theta, cfg, m)).collect()
}

pub fn channel_from<R: Rng + ?Sized>(
    s: &ReferenceSignal,
    theta: &PhaseTrajectory,
    n0: f64,
    g: &PulseShape,
    rng: &mut R,
) -> Result<Vec<Complex64>> {
    let n = s.len();
    if theta.len() != n {
        return Err(Error::LengthMismatch {
            expected: n,
            actual: theta.len(),
        });
    }
    if s.pre_filter.len() != n + 2 * s.pad {
        return Err(Error::LengthMismatch {
            expected: n + 2 * s.pad,
            actual: s.pre_filter.len(),
        });
    }
    if !(n0 >= 0.0) {
        return Err(Error::NegativeParameter {
            name: "N0",
            value: n0,
        });
    }
    if n == 0 {
        return Ok(Vec::new());
    }

    // per-component std of white noise with variance N0 / T_s
    let component_std = (0.5 * n0 / g.sample_period).sqrt();
    let input: Vec<Complex64> = s
        .pre_filter
        .iter()
        .enumerate()
        .map(|(i, &u)| {
            // the trajectory is held constant beyond the frame edges
            let k = i.saturating_sub(s.pad).min(n - 1);
            let noise = if n0 > 0.0 {
                let re: f64 = rng.sample(StandardNormal);
                let im: f64 = rng.sample(StandardNormal);
                Complex64::new(re, im) * component_std
            } else {
                Complex64::new(0.0, 0.0)
            };
            u * Complex64::from_polar(1.0, theta.theta[k]) + noise
        })
        .collect();
    Ok(filter_padded(&input, s.pad, &g.receive_taps(), g.origin, n))
}

/// Rotates the transmit signal by `theta`, adds white noise with variance
/// `N0 / T_s` and applies the receive filter, in that order.
pub fn apply_channel(
    s: &ReferenceSignal,
    theta: &PhaseTrajectory,
    n0: f64,
    g: &PulseShape,
    seed: u64,
) -> Result<Vec<Complex64>> {
    channel_from(s, theta, n0, g, &mut rng_from_seed(seed))
}

/// Output of the 1-bit ADC: every sample is `+-1 +- j`.
#[derive(Debug, Clone, PartialEq)]
pub struct QuantizedStream(pub Vec<Complex64>);

impl QuantizedStream {
    pub fn samples(&self) -> &[Complex64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

/// `sign(x)` with `sign(0) = +1`.
#[inline]
pub fn sign(x: f64) -> f64 {
    if x < 0.0 {
        -1.0
    } else {
        1.0
    }
}

pub fn quantize_sample(y: Complex64) -> Complex64 {
    Complex64::new(sign(y.re), sign(y.im))
}

pub fn quantize_1bit(y: &[Complex64]) -> QuantizedStream {
    QuantizedStream(y.iter().copied().map(quantize_sample).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::waveform::{make_pulse, modulate, PulseKind};
    use crate::framing::build_frame;

    fn fig4_params() -> PhaseNoiseParams {
        PhaseNoiseParams::from_db(-130.0, 800.0, 1e-9, 5e8)
    }

    #[test]
    fn noiseless_phase_is_constant() {
        let mut p = fig4_params();
        p.k0 = 0.0;
        p.k2 = 0.0;
        p.theta_init = 0.3;
        let t = generate_phase(&p, 100, 5).unwrap();
        assert!(t.theta.iter().all(|&x| x == 0.3));
    }

    #[test]
    fn variance_formulas() {
        let p = fig4_params();
        assert!((p.white_variance() - 1e-4).abs() < 1e-16);
        let expected = 4.0 * 800.0 * std::f64::consts::PI.powi(2) * 1e-9;
        assert!((p.increment_variance() - expected).abs() < 1e-18);
        assert!((p.increment_variance() - 3.158e-5).abs() < 1e-8);
    }

    #[test]
    fn negative_parameters_rejected() {
        let mut p = fig4_params();
        p.k2 = -1.0;
        assert!(matches!(
            generate_phase(&p, 10, 0),
            Err(Error::NegativeParameter { name: "K2", .. })
        ));
    }

    #[test]
    fn stapn_of_ramp_and_constant() {
        let cfg = FrameConfig::new(4, 0, 1, 1, 2).unwrap();
        let ramp = PhaseTrajectory {
            theta: (1..=8).map(|k| k as f64).collect(),
            theta2: vec![0.0; 8],
        };
        assert_eq!(stapn(&ramp, &cfg, 0).unwrap(), 2.5);
        assert_eq!(stapn(&ramp, &cfg, 1).unwrap(), 6.5);
        let c = PhaseTrajectory::constant(-0.7, 8);
        assert_eq!(stapn_all(&c, &cfg).unwrap(), vec![-0.7, -0.7]);
        assert!(matches!(
            stapn(&c, &cfg, 2),
            Err(Error::BlockOutOfRange { .. })
        ));
    }

    #[test]
    fn quantizer_signs() {
        assert_eq!(
            quantize_sample(Complex64::new(0.3, -2.0)),
            Complex64::new(1.0, -1.0)
        );
        assert_eq!(
            quantize_sample(Complex64::new(-1e-300, 0.0)),
            Complex64::new(-1.0, 1.0)
        );
        let y = [Complex64::new(-0.0, 5.0), Complex64::new(2.0, -1e-9)];
        let q = quantize_1bit(&y);
        assert_eq!(quantize_1bit(q.samples()), q);
    }

    #[test]
    fn passthrough_without_impairments() {
        let cfg = FrameConfig::new(8, 16, 1, 1, 2).unwrap();
        let frame = build_frame(&cfg, 1, 2).unwrap();
        let h = make_pulse(PulseKind::Rectangular, 0.0, 1.0, 1.0, 0).unwrap();
        let s = modulate(&frame, &h, &h, &cfg, 0.01).unwrap();
        let theta = PhaseTrajectory::constant(0.0, cfg.samples());
        let y = apply_channel(&s, &theta, 0.0, &h, 9).unwrap();
        assert_eq!(y, s.samples);
        assert!(matches!(
            apply_channel(&s, &theta, -1.0, &h, 9),
            Err(Error::NegativeParameter { name: "N0", .. })
        ));
        let short = PhaseTrajectory::constant(0.0, 3);
        assert!(matches!(
            apply_channel(&s, &short, 0.0, &h, 9),
            Err(Error::LengthMismatch { .. })
        ));
    }
}
