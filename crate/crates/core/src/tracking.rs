//! Block-level interpolation of pilot phase estimates.
//!
//! The per-block time-averaged phase follows a scalar random walk
//! `theta(m) = theta(m-1) + Delta(m)`, `Delta ~ N(0, q)`, and is observed
//! with noise variance `r_obs` at pilot blocks only. A Kalman filter gives
//! the causal estimate and the Rauch-Tung-Striebel backward sweep the
//! fixed-interval smoothed one.

use crate::error::{Error, Result};
use crate::estimators::{fisher_info_inv, wrap_angle, FisherInfoParams};
use crate::framing::FrameConfig;
use crate::impairments::PhaseNoiseParams;

/// Prior variance standing in for a diffuse prior.
pub const DIFFUSE_PRIOR_VAR: f64 = 1e4;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StapnModel {
    /// Random-walk variance per block step.
    pub q: f64,
    /// Observation-noise variance.
    pub r_obs: f64,
    pub prior_mean: f64,
    pub prior_var: f64,
}

impl StapnModel {
    pub fn validate(&self) -> Result<()> {
        if !(self.q >= 0.0) {
            return Err(Error::NegativeParameter {
                name: "q",
                value: self.q,
            });
        }
        if !(self.r_obs > 0.0) {
            return Err(Error::NonPositiveParameter {
                name: "r_obs",
                value: self.r_obs,
            });
        }
        if !(self.prior_var > 0.0) {
            return Err(Error::NonPositiveParameter {
                name: "prior_var",
                value: self.prior_var,
            });
        }
        Ok(())
    }

    /// Centers the prior on the first available observation.
    pub fn anchored(mut self, obs: &BlockObservationSeq) -> Self {
        if let Some(z) = obs.values.iter().flatten().next() {
            self.prior_mean = *z;
        }
        self
    }
}

/// `q = (2/3) L_blk var(zeta2)` and `r_obs` from the inverse Fisher information.
pub fn build_model(
    cfg: &FrameConfig,
    pn: &PhaseNoiseParams,
    fi: &FisherInfoParams,
) -> Result<StapnModel> {
    cfg.validate()?;
    pn.validate()?;
    let q = 2.0 / 3.0 * cfg.block_len() as f64 * pn.increment_variance();
    Ok(StapnModel {
        q,
        r_obs: fisher_info_inv(fi)?,
        prior_mean: 0.0,
        prior_var: DIFFUSE_PRIOR_VAR,
    })
}

/// Per-block observations; `None` at data blocks.
#[derive(Debug, Clone, PartialEq)]
pub struct BlockObservationSeq {
    pub values: Vec<Option<f64>>,
}

impl BlockObservationSeq {
    pub fn new(values: Vec<Option<f64>>) -> Self {
        BlockObservationSeq { values }
    }

    /// Places the pilot-block estimates of a frame at their block indices.
    /// Successive estimates are unwrapped so that the state never sees a
    /// `2 pi` jump.
    pub fn from_pilots(cfg: &FrameConfig, estimates: &[f64]) -> Result<Self> {
        if estimates.len() != cfg.k {
            return Err(Error::LengthMismatch {
                expected: cfg.k,
                actual: estimates.len(),
            });
        }
        let unwrapped = unwrap_phases(estimates);
        let mut values = vec![None; cfg.blocks()];
        for (m, z) in cfg.pilot_blocks().zip(unwrapped) {
            values[m] = Some(z);
        }
        Ok(BlockObservationSeq { values })
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// Unwraps a phase sequence: each step is replaced by its wrapped difference.
pub fn unwrap_phases(phases: &[f64]) -> Vec<f64> {
    let mut out = Vec::with_capacity(phases.len());
    let mut iter = phases.iter();
    if let Some(&first) = iter.next() {
        out.push(first);
        let mut prev_raw = first;
        let mut acc = first;
        for &p in iter {
            acc += wrap_angle(p - prev_raw);
            prev_raw = p;
            out.push(acc);
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrackOutput {
    pub mean: Vec<f64>,
    pub var: Vec<f64>,
}

impl TrackOutput {
    pub fn len(&self) -> usize {
        self.mean.len()
    }

    pub fn is_empty(&self) -> bool {
        self.mean.is_empty()
    }

    /// Means wrapped into `(-pi, pi]`.
    pub fn wrapped_mean(&self) -> Vec<f64> {
        self.mean.iter().copied().map(wrap_angle).collect()
    }
}

/// Forward Kalman pass. Block 0 starts from the prior; every later block
/// first adds `q`, then updates where an observation exists.
pub fn kalman_forward(obs: &BlockObservationSeq, model: &StapnModel) -> Result<TrackOutput> {
    model.validate()?;
    let n = obs.len();
    let mut mean = Vec::with_capacity(n);
    let mut var = Vec::with_capacity(n);
    let (mut x, mut p) = (model.prior_mean, model.prior_var);
    for (m, z) in obs.values.iter().enumerate() {
        if m > 0 {
            p += model.q;
        }
        if let Some(z) = z {
            let gain = p / (p + model.r_obs);
            x += gain * (z - x);
            p = p * model.r_obs / (p + model.r_obs);
        }
        mean.push(x);
        var.push(p);
    }
    Ok(TrackOutput { mean, var })
}

/// Backward Rauch-Tung-Striebel sweep over a filtered track.
pub fn rts_smooth(filtered: &TrackOutput, model: &StapnModel) -> Result<TrackOutput> {
    model.validate()?;
    let n = filtered.len();
    if filtered.var.len() != n {
        return Err(Error::LengthMismatch {
            expected: n,
            actual: filtered.var.len(),
        });
    }
    let mut mean = filtered.mean.clone();
    let mut var = filtered.var.clone();
    for m in (0..n.saturating_sub(1)).rev() {
        let predicted = filtered.var[m] + model.q;
        let gain = filtered.var[m] / predicted;
        mean[m] = filtered.mean[m] + gain * (mean[m + 1] - filtered.mean[m]);
        var[m] = filtered.var[m] + gain * gain * (var[m + 1] - predicted);
    }
    Ok(TrackOutput { mean, var })
}
