//! Runtime self-checks behind `onebit-track validate`.
//!
//! Each check compares an implementation path against an independent
//! reference computed here (finite differences, dense Gaussian conditioning,
//! sample statistics, brute-force run checking).

use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::estimators::special::{bessel_i0, bessel_i1, exp_over_q, gaussian_q, log_q};
use crate::estimators::{em_noise_expectation, kappa1, score, PilotBlockView};
use crate::framing::{run_lengths, FrameConfig};
use crate::framing::rll_stream_from;
use crate::impairments::{phase_from, PhaseNoiseParams};
use crate::rng::rng_from_seed;
use crate::tracking::{kalman_forward, rts_smooth, BlockObservationSeq, StapnModel};

#[derive(Debug, Clone, PartialEq)]
pub struct CheckResult {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

fn check(name: &'static str, passed: bool, detail: String) -> CheckResult {
    CheckResult {
        name,
        passed,
        detail,
    }
}

fn log_likelihood(view: &PilotBlockView, theta: f64) -> f64 {
    let sigma = view.sigma();
    let rot = Complex64::from_polar(1.0, theta);
    view.s
        .iter()
        .zip(view.r)
        .map(|(&s, &r)| {
            let st = s * rot;
            let k = std::f64::consts::SQRT_2 / sigma;
            log_q(-r.re * st.re * k) + log_q(-r.im * st.im * k)
        })
        .sum()
}

fn random_block(rng: &mut impl Rng, len: usize) -> (Vec<Complex64>, Vec<Complex64>) {
    let s: Vec<Complex64> = (0..len)
        .map(|_| Complex64::new(rng.random_range(-1.5..1.5), rng.random_range(-1.5..1.5)))
        .collect();
    let r = (0..len)
        .map(|_| {
            Complex64::new(
                if rng.random::<bool>() { 1.0 } else { -1.0 },
                if rng.random::<bool>() { 1.0 } else { -1.0 },
            )
        })
        .collect();
    (s, r)
}

/// Score against a finite difference of the exact log-likelihood.
pub fn score_consistency(triples: usize, seed: u64) -> CheckResult {
    let mut rng = rng_from_seed(seed);
    let mut worst = 0.0f64;
    for _ in 0..triples {
        let len = rng.random_range(1..=16);
        let (s, r) = random_block(&mut rng, len);
        let sigma = 10f64.powf(rng.random_range(-3.0..1.0));
        let view = PilotBlockView::new(&r, &s, sigma * sigma).unwrap();
        let theta = rng.random_range(-3.1..3.1);
        // five-point stencil; the likelihood varies on a scale of sigma
        let h = 1e-2 * sigma.min(1.0);
        let f = |t: f64| log_likelihood(&view, t);
        let fd = (f(theta - 2.0 * h) - 8.0 * f(theta - h) + 8.0 * f(theta + h) - f(theta + 2.0 * h))
            / (12.0 * h);
        let v = score(&view, theta).unwrap();
        let err = (v - fd).abs() / v.abs().max(1.0);
        worst = worst.max(err);
    }
    check(
        "score matches likelihood derivative",
        worst < 1e-4,
        format!("{triples} random blocks, worst relative error {worst:.2e}"),
    )
}

/// Solves `a x = b` for a small dense system by Gaussian elimination with
/// partial pivoting.
fn solve(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Vec<f64> {
    let n = b.len();
    for col in 0..n {
        let pivot = (col..n)
            .max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))
            .unwrap();
        a.swap(col, pivot);
        b.swap(col, pivot);
        for row in col + 1..n {
            let f = a[row][col] / a[col][col];
            let pivot_row = a[col].clone();
            for (x, p) in a[row][col..].iter_mut().zip(&pivot_row[col..]) {
                *x -= f * p;
            }
            b[row] -= f * b[col];
        }
    }
    let mut x = vec![0.0; n];
    for row in (0..n).rev() {
        let tail: f64 = (row + 1..n).map(|k| a[row][k] * x[k]).sum();
        x[row] = (b[row] - tail) / a[row][row];
    }
    x
}

/// Posterior mean and variance of block `target` given the observations
/// at blocks `< limit`, by conditioning the joint Gaussian directly.
fn batch_posterior(
    obs: &[Option<f64>],
    model: &StapnModel,
    target: usize,
    limit: usize,
) -> (f64, f64) {
    let cov = |i: usize, j: usize| model.prior_var + i.min(j) as f64 * model.q;
    let idx: Vec<usize> = (0..limit).filter(|&i| obs[i].is_some()).collect();
    if idx.is_empty() {
        return (model.prior_mean, cov(target, target));
    }
    let czz: Vec<Vec<f64>> = idx
        .iter()
        .map(|&i| {
            idx.iter()
                .map(|&j| cov(i, j) + if i == j { model.r_obs } else { 0.0 })
                .collect()
        })
        .collect();
    let cxz: Vec<f64> = idx.iter().map(|&i| cov(target, i)).collect();
    let resid: Vec<f64> = idx.iter().map(|&i| obs[i].unwrap() - model.prior_mean).collect();
    let w = solve(czz.clone(), resid);
    let mean = model.prior_mean + cxz.iter().zip(&w).map(|(a, b)| a * b).sum::<f64>();
    let u = solve(czz, cxz.clone());
    let var = cov(target, target) - cxz.iter().zip(&u).map(|(a, b)| a * b).sum::<f64>();
    (mean, var)
}

/// Kalman and RTS outputs against dense Gaussian conditioning.
pub fn smoother_consistency(instances: usize, seed: u64) -> CheckResult {
    let mut rng = rng_from_seed(seed);
    let mut worst = 0.0f64;
    for _ in 0..instances {
        let b = rng.random_range(1..=12);
        let obs: Vec<Option<f64>> = (0..b)
            .map(|_| rng.random_bool(0.5).then(|| rng.random_range(-1.0..1.0)))
            .collect();
        let model = StapnModel {
            q: rng.random_range(0.0..0.05),
            r_obs: rng.random_range(1e-3..0.1),
            prior_mean: rng.random_range(-0.5..0.5),
            prior_var: rng.random_range(0.01..2.0),
        };
        let seq = BlockObservationSeq::new(obs.clone());
        let f = kalman_forward(&seq, &model).unwrap();
        let s = rts_smooth(&f, &model).unwrap();
        for m in 0..b {
            let (fm, fv) = batch_posterior(&obs, &model, m, m + 1);
            let (sm, sv) = batch_posterior(&obs, &model, m, b);
            for e in [f.mean[m] - fm, f.var[m] - fv, s.mean[m] - sm, s.var[m] - sv] {
                worst = worst.max(e.abs());
            }
        }
    }
    check(
        "Kalman/RTS match batch conditioning",
        worst < 1e-10,
        format!("{instances} random instances, worst abs error {worst:.2e}"),
    )
}

/// Sample variance of the Wiener increments against `4 K2 pi^2 T_s`.
pub fn wiener_increments(samples: usize, seed: u64) -> CheckResult {
    let pn = PhaseNoiseParams {
        k0: 0.0,
        k2: 800.0,
        ts: 1e-9,
        wg: 5e8,
        theta_init: 0.0,
    };
    let traj = phase_from(&pn, samples + 1, &mut rng_from_seed(seed)).unwrap();
    let inc: Vec<f64> = traj.theta2.windows(2).map(|w| w[1] - w[0]).collect();
    let n = inc.len() as f64;
    let mean = inc.iter().sum::<f64>() / n;
    let var = inc.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    let target = pn.increment_variance();
    // chi-square with n-1 dof: relative std of the sample variance is sqrt(2/(n-1))
    let band = 3.0 * (2.0 / (n - 1.0)).sqrt();
    let rel = var / target - 1.0;
    check(
        "Wiener increment variance",
        rel.abs() < band,
        format!("sample {var:.4e} vs {target:.4e} (rel {rel:+.2e}, band {band:.2e})"),
    )
}

/// Generated data streams against a run-length checker.
pub fn rll_validity(symbols: usize, seed: u64) -> CheckResult {
    let mut rng = rng_from_seed(seed);
    let mut violations = 0usize;
    for d in [0usize, 2, 4] {
        let seq = rll_stream_from(d, 7, symbols, &mut rng).unwrap();
        violations += run_lengths(&seq)
            .iter()
            .filter(|&&r| r < d + 1 || r > 8)
            .count();
    }
    check(
        "RLL run lengths",
        violations == 0,
        format!("{symbols} symbols for d in {{0, 2, 4}}, {violations} violations"),
    )
}

/// Block ranges tile the frame.
pub fn block_tiling() -> CheckResult {
    let mut ok = true;
    for (p, d, m_tx, m_rx, k) in [(60, 180, 1, 1, 2), (30, 1800, 3, 3, 3), (8, 48, 2, 4, 4)] {
        let cfg = FrameConfig::new(p, d, m_tx, m_rx, k).unwrap();
        let mut next = 0;
        for m in 0..cfg.blocks() {
            let r = cfg.block_sample_range(m).unwrap();
            ok &= r.start == next;
            next = r.end;
        }
        ok &= next == cfg.samples();
    }
    check("block ranges tile the frame", ok, "3 geometries".into())
}

/// Special-function identities and overflow-free high-SNR evaluation.
pub fn special_functions(seed: u64) -> CheckResult {
    let mut ok = kappa1(0.0) == 4.0360 && gaussian_q(0.0) == 0.5;
    ok &= bessel_i0(0.0) == 1.0 && bessel_i1(0.0) == 0.0;
    let mut rng = rng_from_seed(seed);
    // sigma^2 = N0 M_rx down to 50 dB
    let sigma = (10f64.powf(-5.0)).sqrt();
    let mut bad = 0usize;
    for _ in 0..10_000 {
        let s = Complex64::new(rng.sample::<f64, _>(StandardNormal), rng.sample::<f64, _>(StandardNormal));
        let r = Complex64::new(
            if rng.random::<bool>() { 1.0 } else { -1.0 },
            if rng.random::<bool>() { 1.0 } else { -1.0 },
        );
        let e = em_noise_expectation(r, s, sigma);
        let view = PilotBlockView::new(std::slice::from_ref(&r), std::slice::from_ref(&s), sigma * sigma).unwrap();
        let v = score(&view, 0.0).unwrap();
        if !(e.re.is_finite() && e.im.is_finite() && v.is_finite()) {
            bad += 1;
        }
        if !exp_over_q(s.re / sigma).is_finite() {
            bad += 1;
        }
    }
    ok &= bad == 0;
    check(
        "special functions",
        ok,
        format!("kappa1(0) = {}, {bad} non-finite evaluations at 50 dB", kappa1(0.0)),
    )
}

/// Runs every check with fixed seeds.
pub fn run_all() -> Vec<CheckResult> {
    vec![
        special_functions(1),
        score_consistency(1000, 2),
        smoother_consistency(100, 3),
        wiener_increments(1_000_000, 4),
        rll_validity(1_000_000, 5),
        block_tiling(),
    ]
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quick_checks_pass() {
        for c in [
            special_functions(7),
            score_consistency(100, 8),
            smoother_consistency(20, 9),
            wiener_increments(100_000, 10),
            rll_validity(10_000, 11),
            block_tiling(),
        ] {
            assert!(c.passed, "{}: {}", c.name, c.detail);
        }
    }
}
