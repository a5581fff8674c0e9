//! Independent oracles shared by the integration tests: naive scans instead
//! of bracketed searches, jump radii instead of breakpoint sums, and an
//! eigenvalue root finder instead of winding numbers.
#![allow(dead_code)]

use holescope::{CoefficientModel, Family, Radius};
use nalgebra::DMatrix;
use num_complex::Complex64;
use statrs::function::gamma::ln_gamma;

pub const SCAN_LIMIT: usize = 1_000_000;
pub const TIE: f64 = 1e-12;

/// `log a_n` straight from the family formula.
pub fn ln_a(family: &Family, n: usize) -> f64 {
    let x = n as f64;
    match family {
        Family::Gef => -0.5 * ln_gamma(x + 1.0),
        Family::MittagLeffler { alpha } => -ln_gamma(alpha * x + 1.0),
        Family::GaussianDecay { c } => -c * x * x,
        Family::ExpExp => 1.0 - x.exp(),
        Family::Table { log_values } => log_values.get(n).copied().unwrap_or(f64::NEG_INFINITY),
    }
}

pub fn h(family: &Family, log_r: f64, n: usize) -> f64 {
    if n == 0 {
        ln_a(family, 0)
    } else {
        ln_a(family, n) + n as f64 * log_r
    }
}

#[derive(Debug, Clone, Copy)]
pub struct Scan {
    pub nu: usize,
    pub log_mu: f64,
    pub n1: usize,
    pub s: f64,
}

#[derive(Default)]
pub struct Kahan {
    sum: f64,
    c: f64,
}

impl Kahan {
    pub fn add(&mut self, x: f64) {
        let y = x - self.c;
        let t = self.sum + y;
        self.c = (t - self.sum) - y;
        self.sum = t;
    }

    pub fn value(&self) -> f64 {
        self.sum
    }
}

/// Every functional from one pass over `n <= limit`, with no use of
/// concavity.
pub fn naive_scan(family: &Family, log_r: f64, limit: usize) -> Scan {
    let (mut nu, mut log_mu) = (0usize, f64::NEG_INFINITY);
    let mut n1 = 0;
    let mut s = Kahan::default();
    for n in 0..=limit {
        let v = h(family, log_r, n);
        if v == f64::NEG_INFINITY {
            break;
        }
        let tol = TIE * log_mu.abs().max(1.0);
        if v > log_mu + tol {
            nu = n;
            log_mu = v;
        } else if v >= log_mu - tol {
            nu = n;
            log_mu = log_mu.max(v);
        }
        if v >= 0.0 {
            n1 += 1;
            s.add(v);
        }
    }
    Scan { nu, log_mu, n1, s: 2.0 * s.value() }
}

/// `int_0^{log r} nu(e^s) ds` by walking the maximizer from jump to jump:
/// the next jump after `s0` is the first `s` at which a later index
/// overtakes the current maximizer.
pub fn jump_integral(family: &Family, log_r: f64, window: usize) -> f64 {
    let mut s0 = 0.0f64;
    let mut cur = naive_scan(family, 0.0, window).nu;
    let mut acc = Kahan::default();
    loop {
        let mut next: Option<(f64, usize)> = None;
        for n in cur + 1..=cur + window {
            let gap = ln_a(family, cur) - ln_a(family, n);
            if !gap.is_finite() {
                break;
            }
            let s = gap / (n - cur) as f64;
            // ties at the same jump go to the largest index
            match next {
                Some((t, _)) if s > t + 1e-15 => {}
                Some((t, _)) if s >= t - 1e-15 => next = Some((t.min(s), n)),
                _ => next = Some((s, n)),
            }
        }
        match next {
            Some((s, n)) if s < log_r => {
                let s = s.max(s0);
                acc.add(cur as f64 * (s - s0));
                s0 = s;
                cur = n;
            }
            _ => {
                acc.add(cur as f64 * (log_r - s0));
                return acc.value();
            }
        }
    }
}

/// Roots of `sum c_n z^n` (`c_last != 0`) as eigenvalues of the companion
/// matrix, after rescaling `z = rho u` so that the end coefficients have equal
/// modulus; without it the eigenvalues drift badly for steep coefficients.
pub fn poly_roots(c: &[Complex64]) -> Vec<Complex64> {
    let d = c.len() - 1;
    if d == 0 {
        return Vec::new();
    }
    let start = c.iter().position(|x| x.norm() > 0.0).unwrap_or(d);
    let log_rho = (c[start].norm().ln() - c[d].norm().ln()) / (d - start) as f64;
    let scaled: Vec<Complex64> = c.iter().enumerate().map(|(n, x)| x * (n as f64 * log_rho).exp()).collect();
    let lead = scaled[d];
    let mut m = DMatrix::<Complex64>::zeros(d, d);
    for i in 1..d {
        m[(i, i - 1)] = Complex64::new(1.0, 0.0);
    }
    for i in 0..d {
        m[(i, d - 1)] = -scaled[i] / lead;
    }
    let rho = log_rho.exp();
    m.schur().eigenvalues().expect("complex Schur form yields eigenvalues").iter().map(|u| u * rho).collect()
}

/// The family grid the inequality checks sweep.
pub fn family_grid() -> Vec<CoefficientModel> {
    vec![
        CoefficientModel::gef(),
        CoefficientModel::mittag_leffler(0.5).unwrap(),
        CoefficientModel::mittag_leffler(1.0).unwrap(),
        CoefficientModel::mittag_leffler(2.0).unwrap(),
        CoefficientModel::gaussian_decay(0.5).unwrap(),
        CoefficientModel::gaussian_decay(1.0).unwrap(),
        CoefficientModel::exp_exp(),
    ]
}

pub fn radius_grid() -> Vec<Radius> {
    let mut out: Vec<Radius> = [1.0, 1.25, 1.5, 2.0, 3.0, 5.0, 10.0, 30.0, 100.0].iter().map(|&r| Radius::new(r).unwrap()).collect();
    out.push(Radius::from_log(1.0));
    out.push(Radius::from_log(2.0));
    out.sort_by(|a, b| a.log().total_cmp(&b.log()));
    out
}

pub fn rel_close(a: f64, b: f64, tol: f64) -> bool {
    a == b || (a - b).abs() <= tol * b.abs().max(a.abs())
}

/// Outcome of comparing certified winding counts with eigenvalue counts.
#[derive(Debug, Default, Clone, Copy)]
pub struct CountComparison {
    pub cases: usize,
    pub mismatches: usize,
    pub uncertain: usize,
    /// Uncertain cases that no perturbed radius resolved into agreement.
    pub unresolved: usize,
}

/// Roots of `sum phi_n a_n (r w)^n` inside `|w| < 1`, or `None` when one
/// sits within `1e-8` of the circle.
pub fn oracle_count(model: &CoefficientModel, draws: &[Complex64], r: Radius) -> Option<usize> {
    let c: Vec<Complex64> = draws.iter().enumerate().map(|(n, phi)| phi * h(model.family(), r.log(), n).exp()).collect();
    let roots = poly_roots(&c);
    if roots.iter().any(|w| (w.norm() - 1.0).abs() < 1e-8) {
        return None;
    }
    Some(roots.iter().filter(|w| w.norm() < 1.0).count())
}

/// `-log(n!)/2` for `n <= degree`, with an exact zero at `n = 0`.
pub fn gef_table(degree: usize) -> CoefficientModel {
    CoefficientModel::table((0..=degree).map(|n| if n == 0 { 0.0 } else { -0.5 * ln_gamma(n as f64 + 1.0) }).collect()).unwrap()
}

/// Random gef-shaped polynomials of degree 1 ..= `max_degree` at each radius.
pub fn compare_zero_counts(samples: u64, max_degree: usize, radii: &[f64], seed: u64) -> CountComparison {
    use holescope::sampling::sample_coefficients;
    use holescope::zerocount::{count_zeros_in_disk, CountStatus};
    let mut out = CountComparison::default();
    for i in 0..samples {
        let degree = 1 + (i as usize % max_degree);
        let model = gef_table(degree);
        let sample = sample_coefficients(seed, i, degree);
        for &x in radii {
            out.cases += 1;
            let r = Radius::new(x).unwrap();
            let res = count_zeros_in_disk(&model, &sample, r).unwrap();
            if res.status == CountStatus::Certified {
                if oracle_count(&model, &sample.draws, r).is_some_and(|k| k != res.count) {
                    out.mismatches += 1;
                }
                continue;
            }
            out.uncertain += 1;
            let mut resolved = false;
            for f in [1.0 + 1e-6, 1.0 - 1e-6] {
                let rp = Radius::new(x * f).unwrap();
                let res = count_zeros_in_disk(&model, &sample, rp).unwrap();
                if res.status == CountStatus::Certified {
                    match oracle_count(&model, &sample.draws, rp) {
                        Some(k) if k == res.count => resolved = true,
                        Some(_) => out.mismatches += 1,
                        None => {}
                    }
                }
            }
            if !resolved {
                out.unresolved += 1;
            }
        }
    }
    out
}
