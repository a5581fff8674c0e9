//! Argument-principle zero counting with certified arcs.
//!
//! An arc `[a, b]` is accepted when `min(|f(a)|, |f(b)|) > E + D (b - a) / 2`,
//! where `D` bounds `|d f / d theta|` and `E` bounds the distance between the
//! evaluated function and the true one. Each half of the arc then stays in a
//! disk around its endpoint value that excludes the origin, so the continuous
//! phase change is the principal `Arg(f(b) / f(a))`, and by Rouché the true
//! function has the same winding.

use std::f64::consts::{FRAC_PI_2, TAU};

use num_complex::Complex64;

use crate::coeffs::{CoefficientModel, Radius};
use crate::error::{Error, Result};
use crate::numeric::{phase_increment, CompensatedSum};
use crate::sampling::{horner_on_circle, scaled_coefficients, tail_log_rms, SeriesSample};

pub const DEFAULT_INITIAL_GRID: usize = 64;
pub const DEFAULT_MAX_DEPTH: u32 = 20;

/// Multiplier on the tail root-mean-square used as the truncation error bound.
pub const TAIL_SAFETY: f64 = 10.0;

/// A function on the circle `theta -> f(r e^{i theta})` (any fixed scaling).
pub trait BoundaryEvaluator {
    fn value(&self, theta: f64) -> Complex64;
    /// Upper bound on `|d/d theta value(theta)|`.
    fn derivative_bound(&self) -> f64;
    /// Upper bound on `|true function - value|` along the circle.
    fn error_bound(&self) -> f64;
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CountStatus {
    Certified,
    Uncertain,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ZeroCountResult {
    pub count: usize,
    /// Minimum of `log |value|` over every evaluated angle.
    pub min_log_modulus: f64,
    pub refinement_depth: u32,
    pub evaluations: usize,
    pub status: CountStatus,
}

impl ZeroCountResult {
    pub fn is_certified(&self) -> bool {
        self.status == CountStatus::Certified
    }
}

/// Polynomial `sum c_n e^{i n theta}` with an external error budget.
#[derive(Clone, Debug)]
pub struct CirclePolynomial {
    coeffs: Vec<Complex64>,
    derivative_bound: f64,
    error_bound: f64,
}

impl CirclePolynomial {
    /// `extra_error` is added to the floating-point evaluation error of
    /// Horner's rule, which is bounded by `8 (N + 1) eps sum |c_n|`.
    pub fn new(coeffs: Vec<Complex64>, extra_error: f64) -> Self {
        let abs_sum: f64 = coeffs.iter().map(|c| c.norm()).sum();
        let derivative_bound = coeffs.iter().enumerate().map(|(n, c)| n as f64 * c.norm()).sum();
        let rounding = 8.0 * coeffs.len() as f64 * f64::EPSILON * abs_sum;
        Self { coeffs, derivative_bound, error_bound: extra_error + rounding }
    }

    pub fn coeffs(&self) -> &[Complex64] {
        &self.coeffs
    }
}

impl BoundaryEvaluator for CirclePolynomial {
    fn value(&self, theta: f64) -> Complex64 {
        horner_on_circle(&self.coeffs, theta)
    }

    fn derivative_bound(&self) -> f64 {
        self.derivative_bound
    }

    fn error_bound(&self) -> f64 {
        self.error_bound
    }
}

/// Winding number of the evaluator around the origin.
pub fn winding_number(eval: &impl BoundaryEvaluator, initial_grid: usize, max_depth: u32) -> Result<ZeroCountResult> {
    if initial_grid < 16 || !initial_grid.is_power_of_two() {
        return Err(Error::InvalidParameter(format!(
            "initial grid must be a power of two >= 16, got {initial_grid}"
        )));
    }
    let d = eval.derivative_bound();
    let e = eval.error_bound();
    let step = TAU / initial_grid as f64;
    let grid: Vec<Complex64> = (0..initial_grid).map(|j| eval.value(j as f64 * step)).collect();

    let mut total = CompensatedSum::new();
    let mut min_modulus = grid.iter().map(|v| v.norm()).fold(f64::INFINITY, f64::min);
    let mut depth_used = 0;
    let mut evaluations = initial_grid;
    let mut uncertain = false;
    let mut stack: Vec<(f64, f64, Complex64, Complex64, u32)> = Vec::new();

    for j in 0..initial_grid {
        let a = j as f64 * step;
        stack.push((a, a + step, grid[j], grid[(j + 1) % initial_grid], 0));
        while let Some((a, b, fa, fb, depth)) = stack.pop() {
            let dphi = phase_increment(fa, fb);
            let floor = e + 0.5 * d * (b - a);
            let ok = fa.norm().min(fb.norm()) > floor && dphi.abs() < FRAC_PI_2;
            // an endpoint already inside the error budget stays an endpoint
            // of every sub-arc, so refining cannot help
            let hopeless = fa.norm().min(fb.norm()) <= e;
            if ok || hopeless || depth >= max_depth {
                uncertain |= !ok;
                total.add(dphi);
                continue;
            }
            let m = 0.5 * (a + b);
            let fm = eval.value(m);
            evaluations += 1;
            min_modulus = min_modulus.min(fm.norm());
            depth_used = depth_used.max(depth + 1);
            stack.push((m, b, fm, fb, depth + 1));
            stack.push((a, m, fa, fm, depth + 1));
        }
    }
    let turns = (total.value() / TAU).round();
    Ok(ZeroCountResult {
        count: turns.max(0.0) as usize,
        min_log_modulus: min_modulus.ln(),
        refinement_depth: depth_used,
        evaluations,
        status: if uncertain { CountStatus::Uncertain } else { CountStatus::Certified },
    })
}

/// Boundary evaluator of `f / mu(r)` for a sample, with the truncation tail
/// (`TAIL_SAFETY` times its root-mean-square) in the error budget.
pub fn sample_evaluator(model: &CoefficientModel, sample: &SeriesSample, r: Radius) -> Result<CirclePolynomial> {
    if r.value() > sample.r_max * (1.0 + 1e-12) {
        return Err(Error::InvalidParameter(format!(
            "radius {} exceeds the sample's certified radius {}",
            r.value(),
            sample.r_max
        )));
    }
    let (coeffs, log_mu) = scaled_coefficients(model, r, &sample.draws)?;
    let tail = tail_log_rms(model, r, sample.n_trunc)?;
    Ok(CirclePolynomial::new(coeffs, TAIL_SAFETY * (tail - log_mu).exp()))
}

/// Zeros of the sample in the open disk `|z| < r`.
///
/// When the constant term beats everything else on the circle,
/// `|c_0| > sum_{n>=1} |c_n| + E`, the disk is zero-free and the winding
/// pass is skipped; `min_log_modulus` is then that lower bound.
pub fn count_zeros_in_disk(model: &CoefficientModel, sample: &SeriesSample, r: Radius) -> Result<ZeroCountResult> {
    let eval = sample_evaluator(model, sample, r)?;
    let c = eval.coeffs();
    let margin = c[0].norm() - c[1..].iter().map(|x| x.norm()).sum::<f64>() - eval.error_bound();
    if margin > 0.0 {
        return Ok(ZeroCountResult {
            count: 0,
            min_log_modulus: (margin + eval.error_bound()).ln(),
            refinement_depth: 0,
            evaluations: 0,
            status: CountStatus::Certified,
        });
    }
    let grid = (2 * sample.draws.len()).next_power_of_two().max(DEFAULT_INITIAL_GRID);
    winding_number(&eval, grid, DEFAULT_MAX_DEPTH)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum HoleStatus {
    Hole,
    NoHole,
    Uncertain,
}

impl From<&ZeroCountResult> for HoleStatus {
    fn from(res: &ZeroCountResult) -> Self {
        match (res.status, res.count) {
            (CountStatus::Uncertain, _) => HoleStatus::Uncertain,
            (CountStatus::Certified, 0) => HoleStatus::Hole,
            (CountStatus::Certified, _) => HoleStatus::NoHole,
        }
    }
}

pub fn has_hole(model: &CoefficientModel, sample: &SeriesSample, r: Radius) -> Result<HoleStatus> {
    Ok(HoleStatus::from(&count_zeros_in_disk(model, sample, r)?))
}
