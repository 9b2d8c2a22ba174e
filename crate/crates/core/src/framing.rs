//! Pilot/data frame structure and run-length-limited symbol generation.
//!
//! A frame alternates pilot blocks of `P` known QPSK symbols (sent at the
//! Nyquist rate) with gaps of `D` data symbols (sent `M_tx` times faster).
//! Each gap is cut into `Lambda = D / (M_tx P)` data blocks so that every
//! block, pilot or data, spans `L_blk = P M_rx` receive samples.

use std::f64::consts::FRAC_1_SQRT_2;
use std::ops::Range;

use num_complex::Complex64;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{rng_from_seed, SimRng};

/// Default maximum number of zeros between ones in the (d, k) constraint.
pub const DEFAULT_K_MAX: usize = 7;

/// Block geometry of a pilot/data frame.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct FrameConfig {
    /// Pilot symbols per pilot block.
    pub p: usize,
    /// Data symbols between two consecutive pilot blocks.
    pub d: usize,
    /// Faster-than-Nyquist factor of the data symbols.
    pub m_tx: usize,
    /// Receive oversampling factor, `T / T_s`.
    pub m_rx: usize,
    /// Number of pilot blocks.
    pub k: usize,
    /// Maximum zero-run of the (d, k) data constraint.
    pub k_max: usize,
}

impl FrameConfig {
    pub fn new(p: usize, d: usize, m_tx: usize, m_rx: usize, k: usize) -> Result<Self> {
        let cfg = FrameConfig {
            p,
            d,
            m_tx,
            m_rx,
            k,
            k_max: DEFAULT_K_MAX,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn with_k_max(mut self, k_max: usize) -> Result<Self> {
        self.k_max = k_max;
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        if self.p == 0 {
            return Err(Error::InvalidFrame("P must be at least 1".into()));
        }
        if self.k < 2 {
            return Err(Error::InvalidFrame(format!(
                "K must be at least 2 (got {})",
                self.k
            )));
        }
        if self.m_tx == 0 {
            return Err(Error::InvalidFrame("M_tx must be at least 1".into()));
        }
        if self.m_rx < self.m_tx {
            return Err(Error::InvalidFrame(format!(
                "M_rx = {} must be >= M_tx = {} to resolve zero crossings",
                self.m_rx, self.m_tx
            )));
        }
        if !self.m_rx.is_multiple_of(self.m_tx) {
            return Err(Error::InvalidFrame(format!(
                "M_rx = {} must be a multiple of M_tx = {} so data symbols fall on the sample grid",
                self.m_rx, self.m_tx
            )));
        }
        let unit = self.m_tx * self.p;
        if !self.d.is_multiple_of(unit) {
            return Err(Error::NonIntegerLambda { d: self.d, unit });
        }
        if self.k_max <= self.min_run_zeros() {
            return Err(Error::InvalidConstraint {
                d: self.min_run_zeros(),
                k: self.k_max,
            });
        }
        Ok(())
    }

    /// Minimum zeros between ones of the data constraint, `d = M_tx - 1`.
    pub fn min_run_zeros(&self) -> usize {
        self.m_tx - 1
    }

    /// Data blocks per gap.
    pub fn lambda(&self) -> usize {
        self.d / (self.m_tx * self.p)
    }

    /// Total number of blocks, `K + (K - 1) Lambda`.
    pub fn blocks(&self) -> usize {
        self.k + (self.k - 1) * self.lambda()
    }

    /// Samples per block.
    pub fn block_len(&self) -> usize {
        self.p * self.m_rx
    }

    /// Receive samples spanned by one gap of data symbols.
    pub fn data_samples_per_gap(&self) -> usize {
        self.d * (self.m_rx / self.m_tx)
    }

    /// Total samples in the frame. Equals `K P M_rx + (K - 1) D` when `M_rx = M_tx`.
    pub fn samples(&self) -> usize {
        self.k * self.p * self.m_rx + (self.k - 1) * self.data_samples_per_gap()
    }

    /// Total transmitted symbols.
    pub fn symbols(&self) -> usize {
        self.k * self.p + (self.k - 1) * self.d
    }

    pub fn is_pilot_block(&self, m: usize) -> bool {
        m.is_multiple_of(self.lambda() + 1)
    }

    /// Indices of the pilot blocks in ascending order.
    pub fn pilot_blocks(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.k).map(move |i| i * (self.lambda() + 1))
    }

    /// Samples `[m L_blk, (m + 1) L_blk)` covered by block `m`.
    pub fn block_sample_range(&self, m: usize) -> Result<Range<usize>> {
        let blocks = self.blocks();
        if m >= blocks {
            return Err(Error::BlockOutOfRange { index: m, blocks });
        }
        let len = self.block_len();
        Ok(m * len..(m + 1) * len)
    }

    /// Block that contains sample `k`.
    pub fn block_of_sample(&self, k: usize) -> usize {
        k / self.block_len()
    }
}

/// Transmitted symbols of one frame in time order.
#[derive(Debug, Clone, PartialEq)]
pub struct SymbolFrame {
    pub symbols: Vec<Complex64>,
    pub pilot_mask: Vec<bool>,
    pub m_tx: usize,
}

impl SymbolFrame {
    /// Symbol period of symbol `l` in units of the Nyquist period `T`.
    pub fn symbol_period(&self, l: usize) -> f64 {
        if self.pilot_mask[l] {
            1.0
        } else {
            1.0 / self.m_tx as f64
        }
    }

    pub fn len(&self) -> usize {
        self.symbols.len()
    }

    pub fn is_empty(&self) -> bool {
        self.symbols.is_empty()
    }

    /// Multiplies every symbol by a real scalar.
    pub fn scaled(&self, a: f64) -> SymbolFrame {
        SymbolFrame {
            symbols: self.symbols.iter().map(|x| x * a).collect(),
            pilot_mask: self.pilot_mask.clone(),
            m_tx: self.m_tx,
        }
    }
}

/// `tileable[n]` is true when
/// `n` symbols can be split into runs with lengths in `min_run..=max_run`.
fn tileable_table(length: usize, min_run: usize, max_run: usize) -> Vec<bool> {
    let mut ok = vec![false; length + 1];
    ok[0] = true;
    for n in 1..=length {
        ok[n] = (min_run..=max_run.min(n)).any(|l| ok[n - l]);
    }
    ok
}

/// Can a sequence with `remaining` symbols left and a current run of
/// `current` symbols be completed admissibly?
fn completable(
    tileable: &[bool],
    remaining: usize,
    current: usize,
    min_run: usize,
    max_run: usize,
) -> bool {
    if current > max_run {
        return false;
    }
    let lo = min_run.saturating_sub(current);
    let hi = (max_run - current).min(remaining);
    (lo..=hi).any(|extend| tileable[remaining - extend])
}

/// Draws an antipodal (d, k)-constrained sequence from `rng`.
///
/// Runs of identical values have lengths in `[d + 1, k_max + 1]`. Whenever
/// both continuing and toggling keep the sequence completable, the choice is
/// a fair coin flip.
pub fn rll_stream_from<R: Rng + ?Sized>(
    d: usize,
    k_max: usize,
    length: usize,
    rng: &mut R,
) -> Result<Vec<f64>> {
    if d >= k_max {
        return Err(Error::InvalidConstraint { d, k: k_max });
    }
    let (min_run, max_run) = (d + 1, k_max + 1);
    if length == 0 {
        return Ok(Vec::new());
    }
    let tileable = tileable_table(length, min_run, max_run);
    if length < min_run || !tileable[length] {
        return Err(Error::LengthTooShort {
            length,
            min_run,
            max_run,
        });
    }

    let mut out = Vec::with_capacity(length);
    let mut level = if rng.random::<bool>() { 1.0 } else { -1.0 };
    out.push(level);
    let mut run = 1;
    for i in 1..length {
        let remaining = length - i - 1;
        let can_continue = completable(&tileable, remaining, run + 1, min_run, max_run);
        let can_toggle =
            run >= min_run && completable(&tileable, remaining, 1, min_run, max_run);
        let toggle = match (can_continue, can_toggle) {
            (true, true) => rng.random::<bool>(),
            (false, true) => true,
            (true, false) => false,
            (false, false) => unreachable!("tileability table guarantees a completion"),
        };
        if toggle {
            level = -level;
            run = 1;
        } else {
            run += 1;
        }
        out.push(level);
    }
    Ok(out)
}

/// Seeded entry point for [`rll_stream_from`].
pub fn generate_rll_stream(d: usize, k_max: usize, length: usize, seed: u64) -> Result<Vec<f64>> {
    rll_stream_from(d, k_max, length, &mut rng_from_seed(seed))
}

fn random_qpsk(rng: &mut SimRng) -> Complex64 {
    let re = if rng.random::<bool>() { 1.0 } else { -1.0 };
    let im = if rng.random::<bool>() { 1.0 } else { -1.0 };
    Complex64::new(re, im) * FRAC_1_SQRT_2
}

/// The `K P` pilot symbols of a frame, in transmission order.
pub fn pilot_symbols(cfg: &FrameConfig, pilot_seed: u64) -> Vec<Complex64> {
    let mut rng = rng_from_seed(pilot_seed);
    (0..cfg.k * cfg.p).map(|_| random_qpsk(&mut rng)).collect()
}

/// Builds the symbol stream: pilot block, data gap, pilot block, ... , pilot block.
pub fn build_frame(cfg: &FrameConfig, pilot_seed: u64, data_seed: u64) -> Result<SymbolFrame> {
    cfg.validate()?;
    let pilots = pilot_symbols(cfg, pilot_seed);
    let mut data_rng = rng_from_seed(data_seed);
    let d = cfg.min_run_zeros();

    let mut symbols = Vec::with_capacity(cfg.symbols());
    let mut pilot_mask = Vec::with_capacity(cfg.symbols());
    for (block, chunk) in pilots.chunks(cfg.p).enumerate() {
        symbols.extend_from_slice(chunk);
        pilot_mask.extend(std::iter::repeat_n(true, cfg.p));
        if block + 1 < cfg.k && cfg.d > 0 {
            let re = rll_stream_from(d, cfg.k_max, cfg.d, &mut data_rng)?;
            let im = rll_stream_from(d, cfg.k_max, cfg.d, &mut data_rng)?;
            symbols.extend(
                re.iter()
                    .zip(&im)
                    .map(|(&a, &b)| Complex64::new(a, b) * FRAC_1_SQRT_2),
            );
            pilot_mask.extend(std::iter::repeat_n(false, cfg.d));
        }
    }
    Ok(SymbolFrame {
        symbols,
        pilot_mask,
        m_tx: cfg.m_tx,
    })
}

/// Lengths of the maximal runs of identical values.
pub fn run_lengths(seq: &[f64]) -> Vec<usize> {
    let mut runs = Vec::new();
    let mut iter = seq.iter();
    let Some(mut prev) = iter.next() else {
        return runs;
    };
    let mut len = 1;
    for v in iter {
        if v == prev {
            len += 1;
        } else {
            runs.push(len);
            len = 1;
            prev = v;
        }
    }
    runs.push(len);
    runs
}
