mod common;

use holescope::growth::{n1_count, s_value};
use holescope::sampling::{sample_for_radius, SeriesSample};
use holescope::verify::{
    discretization_diagnostic, dev_bounds_spotcheck, log_det_covariance, log_det_covariance_dense, poisson_bounds_check, poisson_kernel,
    s_shift_check, vandermonde_log_product, volume_cn, CirclePointSet, DeterminantCheck,
};
use holescope::{CoefficientModel, Error, Radius};
use nalgebra::DMatrix;
use num_complex::Complex64;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn r(x: f64) -> Radius {
    Radius::new(x).unwrap()
}

/// `log det` of the covariance built entry by entry and factorized by LU,
/// with each entry summed until the terms stop mattering.
fn dense_oracle(model: &CoefficientModel, points: &[Complex64]) -> f64 {
    let n = points.len();
    let m = DMatrix::from_fn(n, n, |i, j| {
        let w = points[i] * points[j].conj();
        (0..400).map(|k| w.powi(k as i32) * (2.0 * common::ln_a(model.family(), k)).exp()).filter(|t| t.is_finite()).sum::<Complex64>()
    });
    m.lu().determinant().norm().ln()
}

/// `log(lambda_max / lambda_min)` of the covariance on `n` equispaced points,
/// from class sums written out here.
fn log_spread(model: &CoefficientModel, n: usize, log_rho: f64) -> f64 {
    let classes: Vec<f64> = (0..n)
        .map(|m| (m..400).step_by(n).map(|k| (2.0 * common::h(model.family(), log_rho, k)).exp()).sum::<f64>().ln())
        .collect();
    classes.iter().copied().fold(f64::NEG_INFINITY, f64::max) - classes.iter().copied().fold(f64::INFINITY, f64::min)
}

/// Dense factorizations lose `eps * lambda_max / lambda_min` of relative
/// accuracy, so agreement is only asked of reasonably conditioned matrices.
const MAX_LOG_SPREAD: f64 = 14.0;

#[test]
fn circulant_determinant_matches_dense_oracle() {
    let gd = CoefficientModel::gaussian_decay(1.0).unwrap();
    let set = CirclePointSet::new(3, Radius::from_log(2.0)).unwrap();
    let circulant = log_det_covariance(&gd, &set).unwrap();
    assert!((circulant - dense_oracle(&gd, &set.points)).abs() < 1e-8);
    assert!((circulant - log_det_covariance_dense(&gd, &set.points).unwrap()).abs() < 1e-8);

    for m in common::family_grid() {
        for n in 1..=6 {
            for x in [0.7f64, 1.0, 1.6] {
                if log_spread(&m, n, x.ln()) > MAX_LOG_SPREAD {
                    continue;
                }
                let set = CirclePointSet::new(n, r(x)).unwrap();
                let (c, d) = (log_det_covariance(&m, &set).unwrap(), dense_oracle(&m, &set.points));
                assert!((c - d).abs() < 1e-8 * d.abs().max(1.0), "{} N={n} r={x}: {c} vs {d}", m.label());
            }
        }
    }
}

#[test]
fn single_point_determinant() {
    // one point: log sum_k e^{2 h(k)} >= 0 = S whenever only k = 0 is significant
    let gef = CoefficientModel::gef();
    let set = CirclePointSet::new(1, r(0.8)).unwrap();
    let direct: f64 = (0..200).map(|k| (2.0 * common::h(gef.family(), 0.8f64.ln(), k)).exp()).sum::<f64>().ln();
    let v = log_det_covariance(&gef, &set).unwrap();
    assert!((v - direct).abs() < 1e-12 && v >= 0.0 && s_value(&gef, r(0.8)).unwrap() == 0.0);
}

#[test]
fn determinant_lemma_at_the_stated_configuration() {
    let gef = CoefficientModel::gef();
    let (n1, _) = n1_count(&gef, r(2.0)).unwrap();
    assert_eq!(n1, 9);
    let check = DeterminantCheck::compute(&gef, r(2.0), 0.2, n1).unwrap();
    assert!(check.chain_margin() >= -1e-9, "{check:?}");
    assert!(check.lemma_margin() >= 0.0, "{check:?}");
    let set = CirclePointSet::new(n1, r(1.6)).unwrap();
    assert!(log_spread(&gef, n1, 1.6f64.ln()) <= MAX_LOG_SPREAD);
    assert!((check.log_det - log_det_covariance_dense(&gef, &set.points).unwrap()).abs() < 1e-8);
}

#[test]
fn vandermonde_products() {
    let two = vandermonde_log_product(&CirclePointSet::new(2, r(1.0)).unwrap());
    assert!((two.direct - 4f64.ln()).abs() < 1e-15 && (two.closed_form - 4f64.ln()).abs() < 1e-15);
    let one = vandermonde_log_product(&CirclePointSet::new(1, r(5.0)).unwrap());
    assert_eq!((one.direct, one.closed_form), (0.0, 0.0));
    let set = CirclePointSet::new(16, r(3.0)).unwrap();
    let v = vandermonde_log_product(&set);
    // direct oracle over the raw point list
    let mut oracle = 0.0;
    for (i, a) in set.points.iter().enumerate() {
        for (j, b) in set.points.iter().enumerate() {
            if i != j {
                oracle += (a - b).norm().ln();
            }
        }
    }
    assert!((v.closed_form - oracle).abs() < 1e-8 && v.discrepancy() < 1e-8);
    for n in 1..=64 {
        assert!(vandermonde_log_product(&CirclePointSet::new(n, r(0.37)).unwrap()).discrepancy() < 1e-8, "N={n}");
    }
}

#[test]
fn poisson_kernel_examples() {
    let c = |re: f64, im: f64| Complex64::new(re, im);
    assert!((poisson_kernel(2.0, c(0.0, 2.0), c(0.0, 0.0)).unwrap() - 1.0).abs() < 1e-15);
    assert!((poisson_kernel(1.0, c(1.0, 0.0), c(0.5, 0.0)).unwrap() - 3.0).abs() < 1e-14);
    assert!((poisson_kernel(1.0, c(-1.0, 0.0), c(0.5, 0.0)).unwrap() - 1.0 / 3.0).abs() < 1e-14);
    assert!(poisson_kernel(1.0, c(1.0, 0.0), c(1.0, 0.0)).is_err());
    // the kernel averages to one over the circle
    let mean = (0..1000).map(|j| poisson_kernel(1.0, Complex64::from_polar(1.0, std::f64::consts::TAU * j as f64 / 1000.0), c(0.3, 0.4)).unwrap()).sum::<f64>() / 1000.0;
    assert!((mean - 1.0).abs() < 1e-12);
    for delta in [0.1, 0.25, 0.5] {
        let rep = poisson_bounds_check(3.0, delta, 100).unwrap();
        assert_eq!(rep.pairs, 10_000);
        assert!(rep.margin() >= 0.0, "{rep:?}");
    }
}

#[test]
fn discretization_examples() {
    // single-term model: log |f| is constant
    let single = CoefficientModel::table(vec![0.0]).unwrap();
    let s = SeriesSample::from_draws(vec![Complex64::new(0.7, -0.2)], f64::INFINITY);
    let rep = discretization_diagnostic(&single, &s, r(1.0), 0.2, 8).unwrap();
    assert!(rep.error < 1e-14 && (rep.rhs - rep.mean_value).abs() < 1e-14);

    // phi_0 + eps z: mean value property on the outer circle, eps^N / N on the points
    let linear = CoefficientModel::table(vec![0.0, -3.0]).unwrap();
    let s = SeriesSample::from_draws(vec![Complex64::new(1.0, 0.0), Complex64::new(1.0, 0.0)], f64::INFINITY);
    let mut last = f64::INFINITY;
    for n in [1, 2, 4, 8] {
        let rep = discretization_diagnostic(&linear, &s, r(1.0), 0.2, n).unwrap();
        assert!(rep.rhs.abs() < 1e-12 && rep.quadrature_converged);
        let eps = 0.8 * (-3f64).exp();
        assert!(rep.error <= eps.powi(n as i32) / n as f64 * 1.01 + 1e-15, "N={n}: {}", rep.error);
        assert!(rep.error <= last);
        last = rep.error;
    }

    let gef = CoefficientModel::gef();
    let full = SeriesSample::from_draws(vec![Complex64::new(0.0, 0.0), Complex64::new(1.0, 0.0)], f64::INFINITY);
    assert!(matches!(discretization_diagnostic(&linear, &full, r(1.0), 0.2, 8), Err(Error::Inapplicable(_))));
    assert!(discretization_diagnostic(&gef, &sample_for_radius(&gef, r(1.0), -30.0, 1, 0).unwrap(), r(1.0), 1.2, 8).is_err());
}

#[test]
fn volume_examples() {
    let v = volume_cn(1, 1.0, 0.3).unwrap();
    assert!((v.exact - 0.3).abs() < 1e-15);
    assert!((v.bound.unwrap() - 0.3 * (1.0f64 / 0.3).ln()).abs() < 1e-15);
    let v = volume_cn(2, 1.0, (-3f64).exp()).unwrap();
    assert!((v.exact - 4.0 * (-3f64).exp()).abs() < 1e-14 && (v.exact - 0.1991).abs() < 1e-4);
    assert!((v.bound.unwrap() - 9.0 * (-3f64).exp()).abs() < 1e-14);
    // L = log 4 < N: the bound is not applicable
    assert_eq!(volume_cn(2, 2.0, 1.0).unwrap().bound, None);
    assert_eq!(volume_cn(2, 1.0, 2.0).unwrap().exact, 1.0);
    assert!(volume_cn(0, 1.0, 1.0).is_err());
}

#[test]
fn volume_against_monte_carlo() {
    let (n, t, s) = (3usize, 2.0f64, 0.1f64);
    let exact = volume_cn(n, t, s).unwrap().exact;
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    let trials = 1_000_000;
    let hits = (0..trials).filter(|_| (0..n).map(|_| rng.random::<f64>() * t).product::<f64>() <= s).count() as f64;
    let cube = t.powi(n as i32);
    let p = hits / trials as f64;
    let se = cube * (p * (1.0 - p) / trials as f64).sqrt();
    assert!((cube * p - exact).abs() < 3.0 * se, "{} vs {exact} (se {se})", cube * p);
}

#[test]
fn s_shift_examples() {
    let gef = CoefficientModel::gef();
    let rep = s_shift_check(&gef, r(10.0)).unwrap();
    let delta = (rep.n1 as f64).powf(-0.2);
    let oracle = common::naive_scan(gef.family(), 10f64.ln(), 2000).s - common::naive_scan(gef.family(), (10.0 * (1.0 - delta)).ln(), 2000).s;
    assert!((rep.difference() - oracle).abs() < 1e-9 * oracle);
    assert!(rep.difference() >= 0.0 && rep.margin() >= 0.0, "{rep:?}");
    assert!(matches!(s_shift_check(&gef, r(2.0)), Err(Error::Inapplicable(_))));
}

#[test]
fn deviation_spotchecks() {
    let gef = CoefficientModel::gef();
    let at_one = dev_bounds_spotcheck(&gef, r(1.0), 20_000, 3, 0.5, None).unwrap();
    assert_eq!(at_one.small_bound, 1.0);
    assert!(at_one.margin() >= 0.0);
    let rep = dev_bounds_spotcheck(&gef, r(1.5), 20_000, 3, 0.5, None).unwrap();
    assert!((rep.small_bound - (-s_value(&gef, r(1.5)).unwrap()).exp()).abs() < 1e-15);
    assert!(rep.margin() >= 0.0, "{rep:?}");
    assert!(rep.freq_large >= 0.0 && rep.freq_large <= 1.0 && rep.log_m >= rep.log_mu);
    assert_eq!(rep, dev_bounds_spotcheck(&gef, r(1.5), 20_000, 3, 0.5, Some(4)).unwrap());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn volume_bound_dominates(n in 1usize..=6, log_t in -1.0f64..2.0, gap in 0.0f64..8.0) {
        let t = log_t.exp();
        let l = n as f64 + gap;
        let s = (n as f64 * log_t - l).exp();
        let v = volume_cn(n, t, s).unwrap();
        prop_assert!(v.exact <= v.bound.unwrap() * (1.0 + 1e-12));
        prop_assert!(v.exact <= t.powi(n as i32) * (1.0 + 1e-12));
    }

    #[test]
    fn dense_and_circulant_agree(n in 1usize..=8, x in 0.3f64..3.0, which in 0usize..7) {
        let m = &common::family_grid()[which];
        prop_assume!(log_spread(m, n, x.ln()) <= MAX_LOG_SPREAD);
        let set = CirclePointSet::new(n, r(x)).unwrap();
        let (c, d) = (log_det_covariance(m, &set).unwrap(), log_det_covariance_dense(m, &set.points).unwrap());
        prop_assert!((c - d).abs() < 1e-8 * c.abs().max(1.0), "{} vs {}", c, d);
    }
}
