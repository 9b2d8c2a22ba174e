use approx::assert_relative_eq;
use proptest::prelude::*;
use rand::Rng;

use onebit_track::estimators::FisherInfoParams;
use onebit_track::experiments::validate::smoother_consistency;
use onebit_track::framing::FrameConfig;
use onebit_track::impairments::PhaseNoiseParams;
use onebit_track::rng::rng_from_seed;
use onebit_track::tracking::{
    build_model, kalman_forward, rts_smooth, BlockObservationSeq, StapnModel, DIFFUSE_PRIOR_VAR,
};

/// Posterior of every block given the observations in `0..limit`, from the
/// dense joint covariance. Inverts by Gauss-Jordan.
fn conditioned(obs: &[Option<f64>], m: &StapnModel, limit: usize) -> Vec<(f64, f64)> {
    let b = obs.len();
    let cov = |i: usize, j: usize| m.prior_var + i.min(j) as f64 * m.q;
    let idx: Vec<usize> = (0..limit).filter(|&i| obs[i].is_some()).collect();
    let n = idx.len();
    // augmented [C | I]
    let mut a: Vec<Vec<f64>> = (0..n)
        .map(|r| {
            let mut row: Vec<f64> = (0..n)
                .map(|c| cov(idx[r], idx[c]) + if r == c { m.r_obs } else { 0.0 })
                .collect();
            row.extend((0..n).map(|c| if r == c { 1.0 } else { 0.0 }));
            row
        })
        .collect();
    for c in 0..n {
        let p = (c..n).max_by(|&x, &y| a[x][c].abs().total_cmp(&a[y][c].abs())).unwrap();
        a.swap(c, p);
        let d = a[c][c];
        a[c].iter_mut().for_each(|v| *v /= d);
        for r in 0..n {
            if r != c {
                let f = a[r][c];
                let pivot = a[c].clone();
                a[r].iter_mut().zip(&pivot).for_each(|(v, p)| *v -= f * p);
            }
        }
    }
    let inv: Vec<&[f64]> = a.iter().map(|row| &row[n..]).collect();
    (0..b)
        .map(|t| {
            let k: Vec<f64> = (0..n)
                .map(|c| (0..n).map(|r| cov(t, idx[r]) * inv[r][c]).sum())
                .collect();
            let mean = m.prior_mean
                + (0..n).map(|c| k[c] * (obs[idx[c]].unwrap() - m.prior_mean)).sum::<f64>();
            let var = cov(t, t) - (0..n).map(|c| k[c] * cov(idx[c], t)).sum::<f64>();
            (mean, var)
        })
        .collect()
}

#[test]
fn seven_block_instance_matches_batch_conditioning() {
    let cfg = FrameConfig::new(10, 20, 1, 1, 3).unwrap();
    assert_eq!(cfg.blocks(), 7);
    let mut rng = rng_from_seed(77);
    for _ in 0..50 {
        let z: Vec<f64> = (0..3).map(|_| rng.random_range(-1.0..1.0)).collect();
        let seq = BlockObservationSeq::from_pilots(&cfg, &z).unwrap();
        assert_eq!(seq.values.iter().filter(|v| v.is_some()).count(), 3);
        let model = StapnModel {
            q: rng.random_range(1e-4..0.1),
            r_obs: rng.random_range(1e-4..0.1),
            // a diffuse prior would make the dense oracle ill-conditioned
            prior_mean: rng.random_range(-0.5..0.5),
            prior_var: rng.random_range(0.1..2.0),
        };
        let f = kalman_forward(&seq, &model).unwrap();
        let s = rts_smooth(&f, &model).unwrap();
        let full = conditioned(&seq.values, &model, 7);
        for (m, &(sm, sv)) in full.iter().enumerate() {
            let (fm, fv) = conditioned(&seq.values, &model, m + 1)[m];
            assert!((f.mean[m] - fm).abs() < 1e-10 && (f.var[m] - fv).abs() < 1e-10);
            assert!((s.mean[m] - sm).abs() < 1e-10 && (s.var[m] - sv).abs() < 1e-10);
        }
    }
}

#[test]
fn random_instances_match_batch_conditioning() {
    let c = smoother_consistency(100, 31);
    assert!(c.passed, "{}", c.detail);
}

#[test]
fn noiseless_constant_state() {
    let obs = BlockObservationSeq::new(vec![Some(0.7), None, Some(0.7), None, Some(0.7)]);
    let model = StapnModel { q: 0.0, r_obs: 1e-12, prior_mean: 0.0, prior_var: DIFFUSE_PRIOR_VAR };
    let f = kalman_forward(&obs, &model).unwrap();
    for (m, v) in f.mean.iter().zip(&f.var) {
        assert_relative_eq!(*m, 0.7, epsilon = 1e-9);
        assert!(*v < 1e-11);
    }
}

#[test]
fn pure_prediction_after_one_update() {
    let (q, r) = (0.01, 0.002);
    let obs = BlockObservationSeq::new(vec![Some(0.3), None, None, None]);
    let model = StapnModel { q, r_obs: r, prior_mean: 0.0, prior_var: DIFFUSE_PRIOR_VAR };
    let f = kalman_forward(&obs, &model).unwrap();
    let p0 = DIFFUSE_PRIOR_VAR * r / (DIFFUSE_PRIOR_VAR + r);
    for m in 0..4 {
        assert_relative_eq!(f.mean[m], 0.3, epsilon = 1e-6);
        assert_relative_eq!(f.var[m], p0 + m as f64 * q, max_relative = 1e-12);
    }
    // the smoother has nothing later to learn from
    let s = rts_smooth(&f, &model).unwrap();
    assert_eq!(s.mean.last(), f.mean.last());
    assert_relative_eq!(s.mean[1], f.mean[1], epsilon = 1e-12);
}

#[test]
fn brownian_bridge_interpolation() {
    let b = 9;
    let mut values = vec![None; b];
    values[0] = Some(-0.4);
    values[b - 1] = Some(1.2);
    let obs = BlockObservationSeq::new(values);
    let model = StapnModel { q: 0.05, r_obs: 1e-12, prior_mean: 0.0, prior_var: DIFFUSE_PRIOR_VAR }
        .anchored(&obs);
    let f = kalman_forward(&obs, &model).unwrap();
    let s = rts_smooth(&f, &model).unwrap();
    for m in 0..b {
        let t = m as f64 / (b - 1) as f64;
        let line = f.mean[0] + t * (f.mean[b - 1] - f.mean[0]);
        assert_relative_eq!(s.mean[m], line, epsilon = 1e-9);
        // bridge variance q m (B-1-m) / (B-1)
        let bridge = model.q * (m * (b - 1 - m)) as f64 / (b - 1) as f64;
        assert_relative_eq!(s.var[m], bridge, epsilon = 1e-9);
    }
}

#[test]
fn build_model_reference_values() {
    let cfg = FrameConfig::new(60, 180, 1, 1, 2).unwrap();
    let fi = FisherInfoParams::from_esn0_db(20.0, 1, 60);
    let pn = PhaseNoiseParams::from_db(-80.0, 800.0, 1e-9, 5e8);
    let model = build_model(&cfg, &pn, &fi).unwrap();
    // (2/3) 60 * 4 * 800 * pi^2 * 1e-9
    assert_relative_eq!(model.q, 1.2633093633e-3, max_relative = 1e-9);
    assert_relative_eq!(model.r_obs, 0.0010225721097406545, max_relative = 1e-12);
    assert_eq!(model.prior_var, DIFFUSE_PRIOR_VAR);
    let still = build_model(&cfg, &PhaseNoiseParams::from_db(-80.0, 0.0, 1e-9, 5e8), &fi).unwrap();
    assert_eq!(still.q, 0.0);
}

#[test]
fn invalid_models_are_rejected() {
    let obs = BlockObservationSeq::new(vec![Some(0.0)]);
    let base = StapnModel { q: 0.1, r_obs: 0.1, prior_mean: 0.0, prior_var: 1.0 };
    assert!(kalman_forward(&obs, &StapnModel { q: -1.0, ..base }).is_err());
    assert!(kalman_forward(&obs, &StapnModel { r_obs: 0.0, ..base }).is_err());
    assert!(kalman_forward(&obs, &StapnModel { q: f64::NAN, ..base }).is_err());
}

fn observations(seed: u64, b: usize) -> Vec<Option<f64>> {
    let mut rng = rng_from_seed(seed);
    let mut v: Vec<Option<f64>> = (0..b)
        .map(|_| rng.random_bool(0.4).then(|| rng.random_range(-2.0..2.0)))
        .collect();
    v[0] = Some(rng.random_range(-2.0..2.0));
    v[b - 1] = Some(rng.random_range(-2.0..2.0));
    v
}

proptest! {
    #[test]
    fn smoothing_never_increases_variance(
        seed in any::<u64>(),
        b in 2usize..40,
        q in 1e-6f64..0.5,
        r in 1e-6f64..0.5,
    ) {
        let obs = BlockObservationSeq::new(observations(seed, b));
        let model = StapnModel { q, r_obs: r, prior_mean: 0.0, prior_var: DIFFUSE_PRIOR_VAR }.anchored(&obs);
        let f = kalman_forward(&obs, &model).unwrap();
        let s = rts_smooth(&f, &model).unwrap();
        for m in 0..b {
            prop_assert!(s.var[m] > 0.0);
            prop_assert!(s.var[m] <= f.var[m] * (1.0 + 1e-12));
            if m + 1 < b && obs.values[m].is_none() {
                prop_assert!(s.var[m] < f.var[m]);
            }
        }
    }

    #[test]
    fn smoothing_is_time_reversible(
        seed in any::<u64>(),
        b in 2usize..30,
        q in 1e-4f64..0.5,
        r in 1e-4f64..0.5,
    ) {
        let values = observations(seed, b);
        let reversed: Vec<Option<f64>> = values.iter().rev().copied().collect();
        let smooth = |v: Vec<Option<f64>>| {
            let obs = BlockObservationSeq::new(v);
            // near-flat prior, so neither end is favoured
            let model = StapnModel { q, r_obs: r, prior_mean: 0.0, prior_var: 1e9 };
            rts_smooth(&kalman_forward(&obs, &model).unwrap(), &model).unwrap()
        };
        let a = smooth(values);
        let b_ = smooth(reversed);
        for (x, y) in a.mean.iter().zip(b_.mean.iter().rev()) {
            prop_assert!((x - y).abs() < 1e-6, "{} vs {}", x, y);
        }
    }
}
