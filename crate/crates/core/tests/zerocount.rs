mod common;

use holescope::sampling::{sample_coefficients, sample_for_radius, SeriesSample};
use holescope::zerocount::{count_zeros_in_disk, has_hole, winding_number, CirclePolynomial, CountStatus, HoleStatus};
use holescope::{CoefficientModel, Radius};
use num_complex::Complex64;
use proptest::prelude::*;

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

#[test]
fn agrees_with_companion_eigenvalues() {
    let res = common::compare_zero_counts(120, 24, &[0.5, 1.0, 2.0, 3.5], 77);
    assert_eq!(res.mismatches, 0, "{res:?}");
    assert_eq!(res.unresolved, 0, "{res:?}");
    assert!(res.uncertain * 100 <= res.cases, "{res:?}");
}

#[test]
fn counts_roots_of_a_product() {
    // (z - 0.3)(z + 0.5i)(z - 2)(z - 1.5 + 1.5i): two roots inside the unit disk
    let roots = [c(0.3, 0.0), c(0.0, -0.5), c(2.0, 0.0), c(1.5, -1.5)];
    let mut coeffs = vec![c(1.0, 0.0)];
    for root in roots {
        let mut next = vec![c(0.0, 0.0); coeffs.len() + 1];
        for (i, a) in coeffs.iter().enumerate() {
            next[i + 1] += a;
            next[i] -= a * root;
        }
        coeffs = next;
    }
    let res = winding_number(&CirclePolynomial::new(coeffs.clone(), 0.0), 16, 20).unwrap();
    assert_eq!((res.count, res.status), (2, CountStatus::Certified));
    // scaling the variable by 2.5 pulls the outer pair inside as well
    let scaled: Vec<Complex64> = coeffs.iter().enumerate().map(|(n, a)| a * 2.5f64.powi(n as i32)).collect();
    assert_eq!(winding_number(&CirclePolynomial::new(scaled, 0.0), 16, 20).unwrap().count, 4);
}

#[test]
fn zero_on_the_circle_is_uncertain() {
    // z - 1 vanishes on the boundary
    let p = CirclePolynomial::new(vec![c(-1.0, 0.0), c(1.0, 0.0)], 0.0);
    assert_eq!(winding_number(&p, 16, 12).unwrap().status, CountStatus::Uncertain);
    // an error budget larger than the function everywhere cannot certify anything
    let p = CirclePolynomial::new(vec![c(0.0, 0.0), c(1.0, 0.0)], 2.0);
    assert_eq!(winding_number(&p, 16, 12).unwrap().status, CountStatus::Uncertain);
}

#[test]
fn hole_status_follows_the_count() {
    let model = common::gef_table(3);
    let dominant = SeriesSample::from_draws(vec![c(10.0, 0.0), c(0.1, 0.0), c(0.1, 0.0), c(0.1, 0.0)], f64::INFINITY);
    assert_eq!(has_hole(&model, &dominant, Radius::new(1.0).unwrap()).unwrap(), HoleStatus::Hole);
    let res = count_zeros_in_disk(&model, &dominant, Radius::new(1.0).unwrap()).unwrap();
    assert_eq!(res.evaluations, 0, "the constant-term shortcut should apply");
    let root_inside = SeriesSample::from_draws(vec![c(0.0, 0.0), c(1.0, 0.0), c(0.0, 0.0), c(0.0, 0.0)], f64::INFINITY);
    assert_eq!(has_hole(&model, &root_inside, Radius::new(1.0).unwrap()).unwrap(), HoleStatus::NoHole);
}

#[test]
fn certified_radius_is_enforced() {
    let gef = CoefficientModel::gef();
    let s = sample_for_radius(&gef, Radius::new(2.0).unwrap(), -30.0, 5, 0).unwrap();
    assert!(count_zeros_in_disk(&gef, &s, Radius::new(2.0).unwrap()).is_ok());
    assert!(count_zeros_in_disk(&gef, &s, Radius::new(1.0).unwrap()).is_ok());
    assert!(count_zeros_in_disk(&gef, &s, Radius::new(2.1).unwrap()).is_err());
}

#[test]
fn counts_are_monotone_in_the_radius() {
    let gef = CoefficientModel::gef();
    for stream in 0..40 {
        let s = sample_for_radius(&gef, Radius::new(3.0).unwrap(), -30.0, 8, stream).unwrap();
        let mut last = 0;
        for x in [0.5, 1.0, 1.5, 2.0, 2.5, 3.0] {
            let res = count_zeros_in_disk(&gef, &s, Radius::new(x).unwrap()).unwrap();
            if res.is_certified() {
                assert!(res.count >= last, "stream {stream} r={x}");
                last = res.count;
            }
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn rotation_leaves_the_count_unchanged(seed in any::<u64>(), degree in 1usize..20, angle in 0.0f64..std::f64::consts::TAU, x in 0.3f64..3.0) {
        let model = common::gef_table(degree);
        let s = sample_coefficients(seed, 0, degree);
        let rotated = SeriesSample::from_draws(
            s.draws.iter().enumerate().map(|(n, z)| z * Complex64::from_polar(1.0, n as f64 * angle)).collect(),
            f64::INFINITY,
        );
        let r = Radius::new(x).unwrap();
        let (a, b) = (count_zeros_in_disk(&model, &s, r).unwrap(), count_zeros_in_disk(&model, &rotated, r).unwrap());
        if a.is_certified() && b.is_certified() {
            prop_assert_eq!(a.count, b.count);
        }
    }

    #[test]
    fn product_counts_add(seed in any::<u64>(), d1 in 1usize..8, d2 in 1usize..8, x in 0.3f64..2.5) {
        let p: Vec<Complex64> = sample_coefficients(seed, 1, d1).draws;
        let q: Vec<Complex64> = sample_coefficients(seed, 2, d2).draws;
        let mut pq = vec![c(0.0, 0.0); d1 + d2 + 1];
        for (i, a) in p.iter().enumerate() {
            for (j, b) in q.iter().enumerate() {
                pq[i + j] += a * b;
            }
        }
        let on_circle = |v: &[Complex64]| -> Vec<Complex64> { v.iter().enumerate().map(|(n, a)| a * x.powi(n as i32)).collect() };
        let count = |v: Vec<Complex64>| winding_number(&CirclePolynomial::new(v, 0.0), 32, 24).unwrap();
        let (a, b, ab) = (count(on_circle(&p)), count(on_circle(&q)), count(on_circle(&pq)));
        if a.is_certified() && b.is_certified() && ab.is_certified() {
            prop_assert_eq!(a.count + b.count, ab.count);
        }
    }
}
