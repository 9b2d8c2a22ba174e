//! Monte Carlo harness for the three-stage estimator.
//!
//! One trial runs the full chain: frame, reference signal, phase noise and
//! AWGN, 1-bit quantization, per-pilot-block LS estimation, optional EM or
//! scoring refinement, and Kalman/RTS interpolation. The figure of merit is
//! the sample mean squared phase error
//! `xi = (1/N) sum_k (theta[k] - theta_hat(m(k)))^2`.
//!
//! Trial `i` draws all randomness from a seed derived from the master seed
//! and `i` only. The same trial seed is reused at every `Es/N0` point, so
//! the grid points share frame, phase and normalized noise realizations.

pub mod config;
pub mod validate;

use std::io::Write;

use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::estimators::{
    em_estimate, fisher_info_inv, ls_estimate, scoring_refine, wrap_angle, Algorithm,
    EstimatorSettings, FisherInfoParams, PilotBlockView,
};
use crate::framing::{build_frame, FrameConfig};
use crate::impairments::{channel_from, phase_from, quantize_1bit, PhaseNoiseParams, PhaseTrajectory};
use crate::rng::{derive_seed, rng_from_seed, stream, trial_seed};
use crate::tracking::{kalman_forward, rts_smooth, BlockObservationSeq, StapnModel, DIFFUSE_PRIOR_VAR};
use crate::waveform::{modulate, PulseShape};

pub use config::{ExperimentConfig, Mode};

/// Environment variable capping the number of worker threads.
pub const THREADS_ENV: &str = "ONEBIT_THREADS";

/// Counters for events that do not abort a trial.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct Diagnostics {
    /// LS correlation sums that were exactly zero (estimate replaced by 0).
    pub degenerate_ls: u64,
    /// Scoring runs whose iterate became non-finite (LS estimate kept).
    pub scoring_non_finite: u64,
    /// Scoring runs whose final update exceeded the settled threshold.
    pub scoring_unsettled: u64,
    /// Pilot blocks refined by scoring.
    pub scoring_runs: u64,
}

impl Diagnostics {
    fn merge(&mut self, other: &Diagnostics) {
        self.degenerate_ls += other.degenerate_ls;
        self.scoring_non_finite += other.scoring_non_finite;
        self.scoring_unsettled += other.scoring_unsettled;
        self.scoring_runs += other.scoring_runs;
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrialValue {
    pub algorithm: Algorithm,
    pub mode: Mode,
    pub mse: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrialOutcome {
    pub values: Vec<TrialValue>,
    pub diagnostics: Diagnostics,
}

impl TrialOutcome {
    pub fn get(&self, algorithm: Algorithm, mode: Mode) -> Option<f64> {
        self.values
            .iter()
            .find(|v| v.algorithm == algorithm && v.mode == mode)
            .map(|v| v.mse)
    }
}

/// Mean squared wrapped error between the per-sample phase and the estimate
/// of the block containing each sample, over the listed blocks.
pub fn block_mse(
    theta: &[f64],
    cfg: &FrameConfig,
    block_estimates: &[f64],
    blocks: &[usize],
) -> Result<f64> {
    if theta.len() != cfg.samples() {
        return Err(Error::LengthMismatch {
            expected: cfg.samples(),
            actual: theta.len(),
        });
    }
    let mut sum = 0.0;
    let mut count = 0usize;
    for &m in blocks {
        let est = *block_estimates.get(m).ok_or(Error::BlockOutOfRange {
            index: m,
            blocks: block_estimates.len(),
        })?;
        for k in cfg.block_sample_range(m)? {
            let e = wrap_angle(theta[k] - est);
            sum += e * e;
            count += 1;
        }
    }
    if count == 0 {
        return Err(Error::InvalidConfig("no samples to average".into()));
    }
    Ok(sum / count as f64)
}

/// Pilot-block phase estimates of one received frame, per algorithm.
#[derive(Debug, Clone, PartialEq)]
pub struct PilotEstimates {
    pub ls: Vec<f64>,
    pub em: Option<Vec<f64>>,
    pub scoring: Option<Vec<f64>>,
    pub diagnostics: Diagnostics,
}

impl PilotEstimates {
    pub fn get(&self, algorithm: Algorithm) -> Option<&[f64]> {
        match algorithm {
            Algorithm::Ls => Some(&self.ls),
            Algorithm::Em => self.em.as_deref(),
            Algorithm::Scoring => self.scoring.as_deref(),
        }
    }
}

/// Runs the estimation stage on every pilot block.
#[allow(clippy::too_many_arguments)]
pub fn estimate_pilots(
    cfg: &FrameConfig,
    r: &[Complex64],
    s: &[Complex64],
    sigma2: f64,
    algorithms: &[Algorithm],
    em: &EstimatorSettings,
    scoring: &EstimatorSettings,
    fi_inv: f64,
) -> Result<PilotEstimates> {
    let want_em = algorithms.contains(&Algorithm::Em);
    let want_scoring = algorithms.contains(&Algorithm::Scoring);
    let mut diagnostics = Diagnostics::default();
    let mut ls = Vec::with_capacity(cfg.k);
    let mut em_est = want_em.then(|| Vec::with_capacity(cfg.k));
    let mut sc_est = want_scoring.then(|| Vec::with_capacity(cfg.k));

    for m in cfg.pilot_blocks() {
        let range = cfg.block_sample_range(m)?;
        let view = PilotBlockView::new(&r[range.clone()], &s[range], sigma2)?;
        let init = match ls_estimate(&view) {
            Ok(theta) => theta,
            Err(Error::DegenerateSum) => {
                diagnostics.degenerate_ls += 1;
                0.0
            }
            Err(e) => return Err(e),
        };
        ls.push(init);
        if let Some(out) = em_est.as_mut() {
            out.push(em_estimate(&view, init, em.iterations)?);
        }
        if let Some(out) = sc_est.as_mut() {
            let refined = scoring_refine(&view, init, scoring, fi_inv)?;
            diagnostics.scoring_runs += 1;
            if !refined.finite {
                diagnostics.scoring_non_finite += 1;
            }
            if !refined.settled() {
                diagnostics.scoring_unsettled += 1;
            }
            out.push(refined.theta);
        }
    }
    Ok(PilotEstimates {
        ls,
        em: em_est,
        scoring: sc_est,
        diagnostics,
    })
}

/// A validated experiment with its pulses and phase-noise model prepared.
#[derive(Debug, Clone)]
pub struct Simulator {
    pub config: ExperimentConfig,
    pub frame: FrameConfig,
    pub h: PulseShape,
    pub g: PulseShape,
    pub phase_noise: PhaseNoiseParams,
    pub em: EstimatorSettings,
    pub scoring: EstimatorSettings,
}

/// Everything a trial produces before scoring, for inspection and tests.
#[derive(Debug, Clone)]
pub struct TrialSignals {
    pub reference: Vec<Complex64>,
    pub received: Vec<Complex64>,
    pub quantized: Vec<Complex64>,
    pub phase: PhaseTrajectory,
    pub sigma2: f64,
}

impl Simulator {
    pub fn new(config: &ExperimentConfig) -> Result<Self> {
        config.validate()?;
        let (h, g) = config.pulses()?;
        Ok(Simulator {
            frame: config.frame()?,
            h,
            g,
            phase_noise: config.phase_noise()?,
            em: config.em_settings(),
            scoring: config.scoring_settings(),
            config: config.clone(),
        })
    }

    /// `N0` for unit symbol energy.
    pub fn n0(esn0_db: f64) -> f64 {
        10f64.powf(-esn0_db / 10.0)
    }

    /// Noise variance `N0 / T_s` used by the estimators.
    pub fn sigma2(&self, esn0_db: f64) -> f64 {
        Self::n0(esn0_db) / self.g.sample_period
    }

    pub fn fisher_inv(&self, esn0_db: f64) -> Result<f64> {
        fisher_info_inv(&FisherInfoParams::from_esn0_db(
            esn0_db,
            self.frame.m_rx,
            self.frame.p,
        ))
    }

    pub fn model(&self, esn0_db: f64) -> Result<StapnModel> {
        let r_obs = match self.config.estimators.r_obs_override {
            Some(r) => r,
            None => self.fisher_inv(esn0_db)?,
        };
        Ok(StapnModel {
            q: 2.0 / 3.0 * self.frame.block_len() as f64 * self.phase_noise.increment_variance(),
            r_obs,
            prior_mean: 0.0,
            prior_var: DIFFUSE_PRIOR_VAR,
        })
    }

    /// Synthesizes the signals of one trial.
    pub fn signals(&self, esn0_db: f64, seed: u64) -> Result<TrialSignals> {
        let frame = build_frame(
            &self.frame,
            derive_seed(seed, stream::PILOTS),
            derive_seed(seed, stream::DATA),
        )?;
        let reference = modulate(
            &frame,
            &self.h,
            &self.g,
            &self.frame,
            self.config.waveform.f_if_ts,
        )?;
        let phase = phase_from(
            &self.phase_noise,
            self.frame.samples(),
            &mut rng_from_seed(derive_seed(seed, stream::PHASE)),
        )?;
        let received = channel_from(
            &reference,
            &phase,
            Self::n0(esn0_db),
            &self.g,
            &mut rng_from_seed(derive_seed(seed, stream::NOISE)),
        )?;
        let quantized = quantize_1bit(&received).0;
        Ok(TrialSignals {
            reference: reference.samples,
            received,
            quantized,
            phase,
            sigma2: self.sigma2(esn0_db),
        })
    }

    /// Scores pilot estimates against the true phase for every requested mode.
    pub fn evaluate(
        &self,
        theta: &[f64],
        estimates: &[f64],
        model: &StapnModel,
        modes: &[Mode],
    ) -> Result<Vec<(Mode, f64)>> {
        let cfg = &self.frame;
        let all_blocks: Vec<usize> = (0..cfg.blocks()).collect();
        let obs = BlockObservationSeq::from_pilots(cfg, estimates)?;
        let model = model.anchored(&obs);
        let needs_filter = modes.iter().any(|m| *m != Mode::PilotOnly);
        let filtered = if needs_filter {
            Some(kalman_forward(&obs, &model)?)
        } else {
            None
        };
        modes
            .iter()
            .map(|&mode| {
                let mse = match mode {
                    Mode::PilotOnly => {
                        let mut per_block = vec![0.0; cfg.blocks()];
                        let pilots: Vec<usize> = cfg.pilot_blocks().collect();
                        for (&m, &z) in pilots.iter().zip(estimates) {
                            per_block[m] = z;
                        }
                        block_mse(theta, cfg, &per_block, &pilots)?
                    }
                    Mode::Kalman => {
                        block_mse(theta, cfg, &filtered.as_ref().unwrap().mean, &all_blocks)?
                    }
                    Mode::Rts => {
                        let smoothed = rts_smooth(filtered.as_ref().unwrap(), &model)?;
                        block_mse(theta, cfg, &smoothed.mean, &all_blocks)?
                    }
                };
                Ok((mode, mse))
            })
            .collect()
    }

    /// One full trial at `esn0_db` with all randomness drawn from `seed`.
    pub fn run_trial(&self, esn0_db: f64, seed: u64) -> Result<TrialOutcome> {
        let sig = self.signals(esn0_db, seed)?;
        let sweep = &self.config.experiments;
        let fi_inv = self.fisher_inv(esn0_db)?;
        let estimates = estimate_pilots(
            &self.frame,
            &sig.quantized,
            &sig.reference,
            sig.sigma2,
            &sweep.algorithms,
            &self.em,
            &self.scoring,
            fi_inv,
        )?;
        let model = self.model(esn0_db)?;
        let mut values = Vec::with_capacity(sweep.algorithms.len() * sweep.modes.len());
        for &algorithm in &sweep.algorithms {
            let est = estimates
                .get(algorithm)
                .expect("estimates computed for every requested algorithm");
            for (mode, mse) in self.evaluate(&sig.phase.theta, est, &model, &sweep.modes)? {
                values.push(TrialValue {
                    algorithm,
                    mode,
                    mse,
                });
            }
        }
        Ok(TrialOutcome {
            values,
            diagnostics: estimates.diagnostics,
        })
    }
}

/// Convenience wrapper around [`Simulator::run_trial`].
pub fn run_trial(cfg: &ExperimentConfig, esn0_db: f64, seed: u64) -> Result<TrialOutcome> {
    Simulator::new(cfg)?.run_trial(esn0_db, seed)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub esn0_db: f64,
    pub algorithm: Algorithm,
    pub interpolator: Mode,
    pub mse: f64,
    pub stderr: f64,
    pub trials: usize,
}

/// Per-trial outcomes at one grid point.
#[derive(Debug, Clone, PartialEq)]
pub struct PointOutcomes {
    pub esn0_db: f64,
    pub trials: Vec<TrialOutcome>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepResult {
    pub rows: Vec<SweepRow>,
    pub points: Vec<PointOutcomes>,
    pub diagnostics: Diagnostics,
}

/// Sample mean and standard error of the mean.
pub fn mean_stderr(values: &[f64]) -> (f64, f64) {
    let n = values.len();
    if n == 0 {
        return (f64::NAN, f64::NAN);
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    if n == 1 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    (mean, (var / n as f64).sqrt())
}

impl SweepResult {
    pub fn row(&self, esn0_db: f64, algorithm: Algorithm, mode: Mode) -> Option<&SweepRow> {
        self.rows.iter().find(|r| {
            r.esn0_db == esn0_db && r.algorithm == algorithm && r.interpolator == mode
        })
    }

    /// Per-trial values of one curve at one grid point.
    pub fn samples(&self, esn0_db: f64, algorithm: Algorithm, mode: Mode) -> Option<Vec<f64>> {
        let point = self.points.iter().find(|p| p.esn0_db == esn0_db)?;
        point
            .trials
            .iter()
            .map(|t| t.get(algorithm, mode))
            .collect()
    }

    /// Mean and standard error of the paired per-trial difference `a - b`.
    pub fn paired_difference(
        &self,
        a: (f64, Algorithm, Mode),
        b: (f64, Algorithm, Mode),
    ) -> Option<(f64, f64)> {
        let xa = self.samples(a.0, a.1, a.2)?;
        let xb = self.samples(b.0, b.1, b.2)?;
        if xa.len() != xb.len() {
            return None;
        }
        let diff: Vec<f64> = xa.iter().zip(&xb).map(|(p, q)| p - q).collect();
        Some(mean_stderr(&diff))
    }

    /// Writes the rows as CSV with header
    /// `esn0_db,algorithm,interpolator,mse,stderr,trials`.
    pub fn write_csv<W: Write>(&self, out: W) -> std::io::Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["esn0_db", "algorithm", "interpolator", "mse", "stderr", "trials"])?;
        for r in &self.rows {
            w.write_record([
                r.esn0_db.to_string(),
                r.algorithm.name().to_string(),
                r.interpolator.name().to_string(),
                r.mse.to_string(),
                r.stderr.to_string(),
                r.trials.to_string(),
            ])?;
        }
        w.flush()
    }
}

/// Worker count from `ONEBIT_THREADS`, if set to a positive integer.
pub fn threads_from_env() -> Option<usize> {
    std::env::var(THREADS_ENV)
        .ok()
        .and_then(|v| v.trim().parse::<usize>().ok())
        .filter(|&n| n > 0)
}

/// Runs `trials` trials at every grid point on `threads` workers (rayon's
/// default when `None`). Results do not depend on the worker count.
pub fn run_sweep_with_threads(cfg: &ExperimentConfig, threads: Option<usize>) -> Result<SweepResult> {
    let sim = Simulator::new(cfg)?;
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = threads {
        builder = builder.num_threads(n);
    }
    let pool = builder
        .build()
        .map_err(|e| Error::InvalidConfig(format!("thread pool: {e}")))?;

    let sweep = &cfg.experiments;
    let mut rows = Vec::new();
    let mut points = Vec::with_capacity(sweep.esn0_db.len());
    let mut diagnostics = Diagnostics::default();

    for &esn0 in &sweep.esn0_db {
        let trials: Vec<TrialOutcome> = pool.install(|| {
            (0..sweep.trials as u64)
                .into_par_iter()
                .map(|i| sim.run_trial(esn0, trial_seed(sweep.seed, i)))
                .collect::<Result<Vec<_>>>()
        })?;
        for t in &trials {
            diagnostics.merge(&t.diagnostics);
        }
        for &algorithm in &sweep.algorithms {
            for &mode in &sweep.modes {
                let values: Vec<f64> = trials
                    .iter()
                    .map(|t| t.get(algorithm, mode).expect("every trial reports every curve"))
                    .collect();
                let (mse, stderr) = mean_stderr(&values);
                rows.push(SweepRow {
                    esn0_db: esn0,
                    algorithm,
                    interpolator: mode,
                    mse,
                    stderr,
                    trials: values.len(),
                });
            }
        }
        points.push(PointOutcomes {
            esn0_db: esn0,
            trials,
        });
    }
    Ok(SweepResult {
        rows,
        points,
        diagnostics,
    })
}

/// Runs the sweep with the worker count taken from `ONEBIT_THREADS`.
pub fn run_sweep(cfg: &ExperimentConfig) -> Result<SweepResult> {
    run_sweep_with_threads(cfg, threads_from_env())
}
