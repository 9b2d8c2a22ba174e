//! Pulse shaping and the noise-free, oversampled reference signal.
//!
//! Time is measured in units of the Nyquist symbol period `T` throughout the
//! signal path, so with oversampling `M_rx` the sample period is
//! `T_s = 1 / M_rx`. With `E{|x|^2} = 1` and energy-normalized transmit taps
//! the symbol energy is `E_s = 1`.
//!
//! The receive filter is applied with unit DC gain: white noise with variance
//! `N0 / T_s` keeps its in-band density `N0`, and the rectangular filter
//! matched to the sample rate reduces to a single unit tap.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::framing::{FrameConfig, SymbolFrame};

/// Default RRC truncation in symbol periods.
pub const DEFAULT_RRC_SPAN: usize = 16;

/// Default normalized intermediate frequency `f_IF T_s = sqrt(2) / 100`.
pub const DEFAULT_F_IF_TS: f64 = std::f64::consts::SQRT_2 / 100.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PulseKind {
    Rectangular,
    #[serde(alias = "rrc")]
    RootRaisedCosine,
}

impl std::str::FromStr for PulseKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "rectangular" | "rect" => Ok(PulseKind::Rectangular),
            "rrc" | "root_raised_cosine" => Ok(PulseKind::RootRaisedCosine),
            other => Err(Error::InvalidPulse(format!("unsupported pulse kind `{other}`"))),
        }
    }
}

/// Discrete impulse response sampled at `T_s`.
#[derive(Debug, Clone, PartialEq)]
pub struct PulseShape {
    pub kind: PulseKind,
    pub rolloff: f64,
    pub span: usize,
    /// Pulse duration parameter `T` (same unit as `sample_period`).
    pub period: f64,
    pub sample_period: f64,
    /// Taps with `sum(taps^2) * T_s = 1`.
    pub taps: Vec<f64>,
    /// Index of the tap at `t = 0`.
    pub origin: usize,
}

impl PulseShape {
    /// `T / T_s`.
    pub fn oversampling(&self) -> usize {
        (self.period / self.sample_period).round() as usize
    }

    /// Discrete energy `sum(h^2) T_s`.
    pub fn energy(&self) -> f64 {
        self.taps.iter().map(|h| h * h).sum::<f64>() * self.sample_period
    }

    /// Single-sided bandwidth in units of `1 / period`.
    pub fn bandwidth(&self) -> f64 {
        match self.kind {
            PulseKind::Rectangular => 0.5 / self.period,
            PulseKind::RootRaisedCosine => (1.0 + self.rolloff) / (2.0 * self.period),
        }
    }

    /// Taps rescaled to unit DC gain, used when the pulse acts as receive filter.
    pub fn receive_taps(&self) -> Vec<f64> {
        let dc: f64 = self.taps.iter().sum();
        self.taps.iter().map(|g| g / dc).collect()
    }
}

/// Closed-form root-raised-cosine impulse response with unit energy.
pub fn rrc_impulse(t: f64, alpha: f64, period: f64) -> f64 {
    let x = t / period;
    let norm = 1.0 / period.sqrt();
    if x.abs() < 1e-12 {
        return norm * (1.0 - alpha + 4.0 * alpha / PI);
    }
    if alpha > 0.0 && (x.abs() - 1.0 / (4.0 * alpha)).abs() < 1e-12 {
        let arg = PI / (4.0 * alpha);
        return norm * alpha / 2f64.sqrt()
            * ((1.0 + 2.0 / PI) * arg.sin() + (1.0 - 2.0 / PI) * arg.cos());
    }
    let num = (PI * x * (1.0 - alpha)).sin() + 4.0 * alpha * x * (PI * x * (1.0 + alpha)).cos();
    let den = PI * x * (1.0 - (4.0 * alpha * x).powi(2));
    norm * num / den
}

/// Builds a discrete pulse. `span` is the RRC truncation in symbol periods
/// and is ignored for rectangular pulses.
pub fn make_pulse(
    kind: PulseKind,
    rolloff: f64,
    period: f64,
    sample_period: f64,
    span: usize,
) -> Result<PulseShape> {
    if !(period > 0.0 && sample_period > 0.0) {
        return Err(Error::InvalidPulse("periods must be positive".into()));
    }
    let ratio = period / sample_period;
    let m = ratio.round();
    if m < 1.0 || (ratio - m).abs() > 1e-9 * ratio {
        return Err(Error::NonIntegerOversampling(ratio));
    }
    let m = m as usize;

    let (mut taps, origin) = match kind {
        PulseKind::Rectangular => (vec![1.0; m], 0),
        PulseKind::RootRaisedCosine => {
            if !(0.0..=1.0).contains(&rolloff) {
                return Err(Error::InvalidPulse(format!(
                    "rolloff {rolloff} outside [0, 1]"
                )));
            }
            if span < 4 {
                return Err(Error::InvalidPulse(format!(
                    "RRC span {span} must be at least 4 symbols"
                )));
            }
            let half = span * m / 2;
            let taps = (0..=2 * half)
                .map(|i| {
                    let t = (i as f64 - half as f64) * sample_period;
                    rrc_impulse(t, rolloff, period)
                })
                .collect();
            (taps, half)
        }
    };

    let energy = taps.iter().map(|h| h * h).sum::<f64>() * sample_period;
    let scale = energy.sqrt().recip();
    taps.iter_mut().for_each(|h| *h *= scale);

    Ok(PulseShape {
        kind,
        rolloff,
        span: if kind == PulseKind::Rectangular { 1 } else { span },
        period,
        sample_period,
        taps,
        origin,
    })
}

/// Noise-free received signal `s[k]`, including the IF rotation and the
/// receive filter.
#[derive(Debug, Clone, PartialEq)]
pub struct ReferenceSignal {
    /// `s[k]` for `k = 0..N`.
    pub samples: Vec<Complex64>,
    /// IF-rotated transmit signal before the receive filter, on the padded
    /// grid `k = -pad .. N + pad`.
    pub pre_filter: Vec<Complex64>,
    pub pad: usize,
    /// Normalized intermediate frequency `f_IF T_s`.
    pub f_if_ts: f64,
}

impl ReferenceSignal {
    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }
}

/// Sample offsets of the symbol instants. Pilots advance by `M_rx` samples,
/// data symbols by `M_rx / M_tx`.
pub fn symbol_instants(frame: &SymbolFrame, cfg: &FrameConfig) -> Vec<usize> {
    let data_step = cfg.m_rx / cfg.m_tx;
    let mut pos = 0;
    frame
        .pilot_mask
        .iter()
        .map(|&pilot| {
            let at = pos;
            pos += if pilot { cfg.m_rx } else { data_step };
            at
        })
        .collect()
}

/// Applies the receive filter to a padded input. `input[i]` holds sample
/// `i - pad`; the output covers samples `0..n`. Taps are anchored at
/// `origin`, so the filter adds no delay.
pub fn filter_padded(
    input: &[Complex64],
    pad: usize,
    taps: &[f64],
    origin: usize,
    n: usize,
) -> Vec<Complex64> {
    (0..n)
        .map(|k| {
            taps.iter()
                .enumerate()
                .map(|(j, &g)| input[k + pad + origin - j] * g)
                .sum()
        })
        .collect()
}

/// Padding needed on each side of the sample grid for a receive filter.
pub fn filter_pad(g: &PulseShape) -> usize {
    g.taps.len()
}

/// Pulse-shapes `frame` with `h`, rotates by `exp(j 2 pi f_IF k T_s)` and
/// filters with `g`.
///
/// Pulses are anchored at their symbol instant (rectangular pulses start
/// there, RRC pulses are centered on it) and both filters use centered
/// taps, so sample `k` lines up with the block grid without delay
/// compensation. Convolution tails outside `0..N` are dropped.
pub fn modulate(
    frame: &SymbolFrame,
    h: &PulseShape,
    g: &PulseShape,
    cfg: &FrameConfig,
    f_if_ts: f64,
) -> Result<ReferenceSignal> {
    if frame.len() != cfg.symbols() {
        return Err(Error::LengthMismatch {
            expected: cfg.symbols(),
            actual: frame.len(),
        });
    }
    if h.oversampling() != cfg.m_rx {
        return Err(Error::InvalidPulse(format!(
            "transmit pulse oversampling {} does not match M_rx = {}",
            h.oversampling(),
            cfg.m_rx
        )));
    }
    let n = cfg.samples();
    let pad = filter_pad(g);
    let total = n + 2 * pad;
    let mut u = vec![Complex64::new(0.0, 0.0); total];

    for (&x, &at) in frame.symbols.iter().zip(&symbol_instants(frame, cfg)) {
        // first padded index touched by this pulse
        let start = (at + pad) as isize - h.origin as isize;
        for (j, &tap) in h.taps.iter().enumerate() {
            let idx = start + j as isize;
            if idx >= 0 && (idx as usize) < total {
                u[idx as usize] += x * tap;
            }
        }
    }

    let omega = 2.0 * PI * f_if_ts;
    for (i, v) in u.iter_mut().enumerate() {
        let k = i as f64 - pad as f64;
        *v *= Complex64::from_polar(1.0, omega * k);
    }

    let samples = filter_padded(&u, pad, &g.receive_taps(), g.origin, n);
    Ok(ReferenceSignal {
        samples,
        pre_filter: u,
        pad,
        f_if_ts,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::framing::build_frame;
    use approx::assert_relative_eq;

    #[test]
    fn rectangular_single_tap() {
        let ts = 0.25;
        let p = make_pulse(PulseKind::Rectangular, 0.0, ts, ts, 0).unwrap();
        assert_eq!(p.taps.len(), 1);
        assert_relative_eq!(p.taps[0], 1.0 / ts.sqrt(), epsilon = 1e-15);
    }

    #[test]
    fn rrc_peak_closed_form() {
        let alpha = 0.6;
        assert_relative_eq!(
            rrc_impulse(0.0, alpha, 1.0),
            1.0 - alpha + 4.0 * alpha / PI,
            epsilon = 1e-15
        );
        // removable singularity at |t| = T / (4 alpha) is continuous
        let t0 = 1.0 / (4.0 * alpha);
        let near = rrc_impulse(t0 + 1e-7, alpha, 1.0);
        assert_relative_eq!(rrc_impulse(t0, alpha, 1.0), near, max_relative = 1e-5);
    }

    #[test]
    fn rrc_zero_rolloff_is_sinc() {
        for i in 1..8 {
            let t = i as f64;
            assert!(rrc_impulse(t, 0.0, 1.0).abs() < 1e-12);
            let half = t + 0.5;
            let sinc = (PI * half).sin() / (PI * half);
            assert_relative_eq!(rrc_impulse(half, 0.0, 1.0), sinc, epsilon = 1e-12);
        }
    }

    #[test]
    fn pulse_errors() {
        assert!(matches!(
            make_pulse(PulseKind::Rectangular, 0.0, 1.0, 0.4, 0),
            Err(Error::NonIntegerOversampling(_))
        ));
        assert!(make_pulse(PulseKind::RootRaisedCosine, 1.5, 1.0, 0.5, 16).is_err());
        assert!(make_pulse(PulseKind::RootRaisedCosine, 0.5, 1.0, 0.5, 2).is_err());
        assert!("sinc".parse::<PulseKind>().is_err());
    }

    #[test]
    fn energy_is_normalized() {
        for m in [1usize, 3, 5] {
            let ts = 1.0 / m as f64;
            let p = make_pulse(PulseKind::RootRaisedCosine, 0.6, 1.0, ts, 16).unwrap();
            assert_relative_eq!(p.energy(), 1.0, epsilon = 1e-12);
            assert_eq!(p.taps.len(), 16 * m + 1);
        }
    }

    #[test]
    fn rectangular_reference_equals_symbols() {
        let cfg = FrameConfig::new(4, 8, 1, 1, 2).unwrap();
        let frame = build_frame(&cfg, 3, 4).unwrap();
        let h = make_pulse(PulseKind::Rectangular, 0.0, 1.0, 1.0, 0).unwrap();
        let s = modulate(&frame, &h, &h, &cfg, 0.0).unwrap();
        for (a, b) in s.samples.iter().zip(&frame.symbols) {
            assert_relative_eq!(a.re, b.re, epsilon = 1e-15);
            assert_relative_eq!(a.im, b.im, epsilon = 1e-15);
        }
    }

    #[test]
    fn length_mismatch_is_reported() {
        let cfg = FrameConfig::new(4, 8, 1, 1, 2).unwrap();
        let other = FrameConfig::new(4, 8, 1, 1, 3).unwrap();
        let frame = build_frame(&other, 3, 4).unwrap();
        let h = make_pulse(PulseKind::Rectangular, 0.0, 1.0, 1.0, 0).unwrap();
        assert!(matches!(
            modulate(&frame, &h, &h, &cfg, 0.0),
            Err(Error::LengthMismatch { .. })
        ));
    }
}
