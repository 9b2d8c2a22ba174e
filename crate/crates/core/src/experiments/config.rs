//! Experiment configuration, read from TOML with one section per module.
//!
//! Every key is optional; defaults reproduce the white-noise error-variance
//! study (`P = 60`, `D = 180`, `M_tx = M_rx = 1`, `K2 = 800`,
//! `K0 = -130 dB`, rectangular receive filter, `epsilon = 0.05`,
//! 20 EM and scoring iterations).

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimators::{Algorithm, EstimatorSettings};
use crate::framing::{FrameConfig, DEFAULT_K_MAX};
use crate::impairments::PhaseNoiseParams;
use crate::waveform::{make_pulse, PulseKind, PulseShape, DEFAULT_F_IF_TS, DEFAULT_RRC_SPAN};

/// Default Nyquist symbol rate in Hz.
pub const DEFAULT_SYMBOL_RATE: f64 = 4e9;

/// How the per-block estimates are turned into a phase trajectory.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    /// Raw pilot-block estimates, scored on pilot blocks only.
    PilotOnly,
    Kalman,
    Rts,
}

impl Mode {
    pub const ALL: [Mode; 3] = [Mode::PilotOnly, Mode::Kalman, Mode::Rts];

    pub fn name(self) -> &'static str {
        match self {
            Mode::PilotOnly => "pilot_only",
            Mode::Kalman => "kalman",
            Mode::Rts => "rts",
        }
    }
}

impl std::str::FromStr for Mode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "pilot_only" => Ok(Mode::PilotOnly),
            "kalman" => Ok(Mode::Kalman),
            "rts" => Ok(Mode::Rts),
            other => Err(Error::InvalidConfig(format!("unknown mode `{other}`"))),
        }
    }
}

impl std::fmt::Display for Mode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FramingSection {
    pub p: usize,
    pub d: usize,
    pub m_tx: usize,
    pub m_rx: usize,
    pub k: usize,
    pub k_max: usize,
}

impl Default for FramingSection {
    fn default() -> Self {
        FramingSection {
            p: 60,
            d: 180,
            m_tx: 1,
            m_rx: 1,
            k: 2,
            k_max: DEFAULT_K_MAX,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct WaveformSection {
    pub pulse: PulseKind,
    /// RRC rolloff.
    pub rolloff: f64,
    /// RRC truncation in symbol periods.
    pub span: usize,
    /// Normalized intermediate frequency `f_IF T_s`.
    pub f_if_ts: f64,
}

impl Default for WaveformSection {
    fn default() -> Self {
        WaveformSection {
            pulse: PulseKind::Rectangular,
            rolloff: 0.6,
            span: DEFAULT_RRC_SPAN,
            f_if_ts: DEFAULT_F_IF_TS,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ImpairmentsSection {
    /// White phase-noise level, `10 log10(K0)`.
    pub k0_db: f64,
    /// Wiener coefficient in rad^2 Hz.
    pub k2: f64,
    /// Nyquist symbol rate `1/T` in Hz; sets the physical sample period.
    /// The 4 GHz default is a least-squares fit of the simulated error
    /// curves to the reference white-noise study, whose timescale is not
    /// given explicitly.
    pub symbol_rate: f64,
    pub theta_init: f64,
}

impl Default for ImpairmentsSection {
    fn default() -> Self {
        ImpairmentsSection {
            k0_db: -130.0,
            k2: 800.0,
            symbol_rate: DEFAULT_SYMBOL_RATE,
            theta_init: 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EstimatorsSection {
    pub em_iterations: usize,
    pub scoring_iterations: usize,
    /// Scoring dampening factor.
    pub epsilon: f64,
    /// Observation-noise variance for the interpolators; defaults to the
    /// inverse Fisher information at each `Es/N0`.
    pub r_obs_override: Option<f64>,
}

impl Default for EstimatorsSection {
    fn default() -> Self {
        EstimatorsSection {
            em_iterations: 20,
            scoring_iterations: 20,
            epsilon: 0.05,
            r_obs_override: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepSection {
    pub esn0_db: Vec<f64>,
    pub trials: usize,
    pub seed: u64,
    pub modes: Vec<Mode>,
    pub algorithms: Vec<Algorithm>,
}

impl Default for SweepSection {
    fn default() -> Self {
        SweepSection {
            esn0_db: (3..=20).map(|i| 2.0 * i as f64).collect(),
            trials: 200,
            seed: 1,
            modes: Mode::ALL.to_vec(),
            algorithms: Algorithm::ALL.to_vec(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub framing: FramingSection,
    pub waveform: WaveformSection,
    pub impairments: ImpairmentsSection,
    pub estimators: EstimatorsSection,
    pub experiments: SweepSection,
}

impl ExperimentConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig =
            toml::from_str(text).map_err(|e| Error::InvalidConfig(e.to_string()))?;
        Ok(cfg)
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::InvalidConfig(format!("{}: {e}", path.display())))?;
        Self::from_toml_str(&text)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string_pretty(self).expect("config serializes")
    }

    /// Faster-than-Nyquist configuration with RRC filters: `P = 30`,
    /// `D = 600 M_tx`, `K2 = 1200`, `alpha = 0.6`, `epsilon = 0.4`.
    pub fn ftn(m_tx: usize) -> Self {
        let mut cfg = ExperimentConfig::default();
        cfg.framing.p = 30;
        cfg.framing.d = 600 * m_tx;
        cfg.framing.m_tx = m_tx;
        cfg.framing.m_rx = m_tx;
        cfg.framing.k = 3;
        cfg.waveform.pulse = PulseKind::RootRaisedCosine;
        cfg.waveform.rolloff = 0.6;
        cfg.impairments.k2 = 1200.0;
        cfg.estimators.epsilon = 0.4;
        cfg
    }

    pub fn frame(&self) -> Result<FrameConfig> {
        let f = &self.framing;
        let cfg = FrameConfig {
            p: f.p,
            d: f.d,
            m_tx: f.m_tx,
            m_rx: f.m_rx,
            k: f.k,
            k_max: f.k_max,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    /// Sample period in units of `T`.
    pub fn normalized_sample_period(&self) -> f64 {
        1.0 / self.framing.m_rx as f64
    }

    /// Transmit pulse `h` and receive filter `g`. The rectangular receive
    /// filter has duration `T_s`, i.e. `W_g = 1 / (2 T_s)`.
    pub fn pulses(&self) -> Result<(PulseShape, PulseShape)> {
        let ts = self.normalized_sample_period();
        let w = &self.waveform;
        match w.pulse {
            PulseKind::Rectangular => Ok((
                make_pulse(PulseKind::Rectangular, 0.0, 1.0, ts, 0)?,
                make_pulse(PulseKind::Rectangular, 0.0, ts, ts, 0)?,
            )),
            PulseKind::RootRaisedCosine => {
                let h = make_pulse(PulseKind::RootRaisedCosine, w.rolloff, 1.0, ts, w.span)?;
                Ok((h.clone(), h))
            }
        }
    }

    pub fn phase_noise(&self) -> Result<PhaseNoiseParams> {
        let imp = &self.impairments;
        if !(imp.symbol_rate > 0.0) {
            return Err(Error::InvalidConfig("symbol_rate must be positive".into()));
        }
        let ts = 1.0 / (imp.symbol_rate * self.framing.m_rx as f64);
        let wg = match self.waveform.pulse {
            PulseKind::Rectangular => 0.5 / ts,
            PulseKind::RootRaisedCosine => 0.5 * (1.0 + self.waveform.rolloff) * imp.symbol_rate,
        };
        let mut pn = PhaseNoiseParams::from_db(imp.k0_db, imp.k2, ts, wg);
        pn.theta_init = imp.theta_init;
        pn.validate()?;
        Ok(pn)
    }

    pub fn em_settings(&self) -> EstimatorSettings {
        EstimatorSettings::em(self.estimators.em_iterations)
    }

    pub fn scoring_settings(&self) -> EstimatorSettings {
        EstimatorSettings::scoring(self.estimators.scoring_iterations, self.estimators.epsilon)
    }

    pub fn validate(&self) -> Result<()> {
        self.frame()?;
        self.pulses()?;
        self.phase_noise()?;
        self.scoring_settings().validate()?;
        let sweep = &self.experiments;
        if sweep.trials == 0 {
            return Err(Error::InvalidConfig("trials must be at least 1".into()));
        }
        if sweep.esn0_db.is_empty() {
            return Err(Error::InvalidConfig("esn0_db grid is empty".into()));
        }
        if sweep.esn0_db.iter().any(|x| !x.is_finite()) {
            return Err(Error::InvalidConfig("esn0_db values must be finite".into()));
        }
        if sweep.modes.is_empty() || sweep.algorithms.is_empty() {
            return Err(Error::InvalidConfig(
                "at least one mode and one algorithm are required".into(),
            ));
        }
        if let Some(r) = self.estimators.r_obs_override {
            if !(r > 0.0) {
                return Err(Error::InvalidConfig("r_obs_override must be positive".into()));
            }
        }
        Ok(())
    }
}
