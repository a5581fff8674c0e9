//! Reproducible draws of the random series and overflow-free evaluation of
//! `f / mu(r)` on circles.
//!
//! Coefficient `n` of stream `s` under seed `k` always occupies ChaCha words
//! `4n .. 4n + 4` of stream `s`, so any cell can be regenerated on its own.

use std::f64::consts::TAU;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;

use crate::coeffs::{CoefficientModel, Radius};
use crate::error::{Error, Result};
use crate::growth::max_term;
use crate::numeric::{ln_geometric_tail, LogSumExp};

/// Default relative truncation target, `e^{-30} ~ 1e-13` of `mu(r)`.
pub const DEFAULT_LOG_EPS: f64 = -30.0;

/// Words consumed per complex draw (two `u64` uniforms).
const WORDS_PER_DRAW: u128 = 4;

/// Sequential reader over one addressable stream.
pub struct GaussianStream {
    rng: ChaCha12Rng,
}

impl GaussianStream {
    pub fn new(seed: u64, stream_index: u64) -> Self {
        let mut key = [0u8; 32];
        key[..8].copy_from_slice(&seed.to_le_bytes());
        let mut rng = ChaCha12Rng::from_seed(key);
        rng.set_stream(stream_index);
        Self { rng }
    }

    /// Positions the stream at draw `n`.
    pub fn seek(&mut self, n: u64) {
        self.rng.set_word_pos(n as u128 * WORDS_PER_DRAW);
    }

    /// Standard complex Gaussian: `|phi|^2 ~ Exp(1)`, uniform phase, so each
    /// component has variance 1/2 and `P(|phi| >= t) = exp(-t^2)`.
    pub fn next(&mut self) -> Complex64 {
        let u1: f64 = self.rng.random();
        let u2: f64 = self.rng.random();
        let radius = (-(1.0 - u1).ln()).sqrt();
        Complex64::from_polar(radius, TAU * u2)
    }
}

/// The single draw at `(seed, stream_index, n)`.
pub fn standard_complex_gaussian(seed: u64, stream_index: u64, n: u64) -> Complex64 {
    let mut s = GaussianStream::new(seed, stream_index);
    s.seek(n);
    s.next()
}

#[derive(Clone, Debug, PartialEq)]
pub struct SeriesSample {
    pub seed: u64,
    pub stream_index: u64,
    pub n_trunc: usize,
    /// `phi_0 ..= phi_{n_trunc}`.
    pub draws: Vec<Complex64>,
    /// Largest radius at which the truncation was certified.
    pub r_max: f64,
}

impl SeriesSample {
    /// A sample with explicit coefficients (constructed test functions,
    /// importance-sampling proposals).
    pub fn from_draws(draws: Vec<Complex64>, r_max: f64) -> Self {
        assert!(!draws.is_empty(), "a sample needs at least phi_0");
        Self { seed: 0, stream_index: 0, n_trunc: draws.len() - 1, draws, r_max }
    }
}

/// Draws `phi_0 ..= phi_{n_trunc}` for one stream. The sample is not tied to
/// any radius (`r_max = inf`); see [`sample_for_radius`].
pub fn sample_coefficients(seed: u64, stream_index: u64, n_trunc: usize) -> SeriesSample {
    let mut s = GaussianStream::new(seed, stream_index);
    let draws = (0..=n_trunc).map(|_| s.next()).collect();
    SeriesSample { seed, stream_index, n_trunc, draws, r_max: f64::INFINITY }
}

/// Truncates at `choose_truncation(model, r, log_eps)` and records `r` as `r_max`.
pub fn sample_for_radius(model: &CoefficientModel, r: Radius, log_eps: f64, seed: u64, stream_index: u64) -> Result<SeriesSample> {
    let n_trunc = choose_truncation(model, r, log_eps)?;
    let mut sample = sample_coefficients(seed, stream_index, n_trunc);
    sample.r_max = r.value();
    Ok(sample)
}

/// `log sum_{n > from} exp(2 h(n))`, summed explicitly until negligible and
/// closed with the geometric bound that concavity provides.
fn log_tail_energy(model: &CoefficientModel, log_r: f64, from: usize, floor: f64) -> Result<f64> {
    let mut acc = LogSumExp::new();
    let mut n = from + 1;
    loop {
        if n > model.support_hint() {
            if model.last_nonzero().is_some() {
                return Ok(acc.value());
            }
            return Err(Error::SupportExhausted { limit: model.support_hint(), context: "truncation tail" });
        }
        let h = model.h(log_r, n);
        if h == f64::NEG_INFINITY {
            return Ok(acc.value());
        }
        acc.add(2.0 * h);
        let slope = 2.0 * (model.h(log_r, n + 1) - h);
        if slope < 0.0 && 2.0 * h + ln_geometric_tail(slope) < floor {
            acc.add(2.0 * h + ln_geometric_tail(slope));
            return Ok(acc.value());
        }
        n += 1;
    }
}

/// `1/2 log sum_{n > n_trunc} a_n^2 r^{2n}`: the root-mean-square size of the
/// neglected tail (an upper bound; the closing geometric term is analytic).
pub fn tail_log_rms(model: &CoefficientModel, r: Radius, n_trunc: usize) -> Result<f64> {
    let (_, log_mu) = max_term(model, r)?;
    let floor = 2.0 * (log_mu - 60.0) + 2.0 * DEFAULT_LOG_EPS;
    Ok(0.5 * log_tail_energy(model, r.log(), n_trunc, floor)?)
}

/// Smallest `N` whose tail root-mean-square is at most `e^{log_eps} mu(r)`.
pub fn choose_truncation(model: &CoefficientModel, r: Radius, log_eps: f64) -> Result<usize> {
    if !(log_eps < 0.0) {
        return Err(Error::InvalidParameter(format!("log_eps must be negative, got {log_eps}")));
    }
    let log_r = r.log();
    let (nu, log_mu) = max_term(model, r)?;
    let target = 2.0 * (log_mu + log_eps);
    // the tail from nu on contains mu itself, so N >= nu; walk forward until
    // the bound at N drops below target
    let mut n = nu;
    loop {
        if let Some(last) = model.last_nonzero() {
            if n >= last {
                return Ok(last.min(n));
            }
        }
        if log_tail_energy(model, log_r, n, target - 40.0)? <= target {
            return Ok(n);
        }
        n += 1;
    }
}

/// `c_n = phi_n exp(h(n) - log mu)` for `n <= n_trunc`, and `log mu`.
pub fn scaled_coefficients(model: &CoefficientModel, r: Radius, draws: &[Complex64]) -> Result<(Vec<Complex64>, f64)> {
    let (_, log_mu) = max_term(model, r)?;
    let coeffs = draws
        .iter()
        .enumerate()
        .map(|(n, phi)| {
            let w = (model.h(r.log(), n) - log_mu).exp();
            if w == 0.0 {
                Complex64::new(0.0, 0.0)
            } else {
                phi * w
            }
        })
        .collect();
    Ok((coeffs, log_mu))
}

/// `sum c_n e^{i n theta}` by Horner's rule on the unit circle.
pub fn horner_on_circle(coeffs: &[Complex64], theta: f64) -> Complex64 {
    let z = Complex64::from_polar(1.0, theta);
    coeffs.iter().rev().fold(Complex64::new(0.0, 0.0), |acc, c| acc * z + c)
}

/// `f(r e^{i theta}) / mu(r)` at each angle.
pub fn evaluate_on_circle(model: &CoefficientModel, sample: &SeriesSample, r: Radius, thetas: &[f64]) -> Result<Vec<Complex64>> {
    if r.value() > sample.r_max * (1.0 + 1e-12) {
        return Err(Error::InvalidParameter(format!(
            "radius {} exceeds the sample's certified radius {}",
            r.value(),
            sample.r_max
        )));
    }
    let (coeffs, _) = scaled_coefficients(model, r, &sample.draws)?;
    Ok(thetas.iter().map(|&t| horner_on_circle(&coeffs, t)).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn draws_are_addressable() {
        let s = sample_coefficients(7, 3, 20);
        for n in [0usize, 5, 20] {
            assert_eq!(s.draws[n], standard_complex_gaussian(7, 3, n as u64));
        }
        assert_eq!(s, sample_coefficients(7, 3, 20));
        assert_ne!(s.draws[0], sample_coefficients(7, 4, 0).draws[0]);
        assert_ne!(s.draws[0], sample_coefficients(8, 3, 0).draws[0]);
    }

    #[test]
    fn truncation_examples() {
        let t = CoefficientModel::table((0..50).map(|n| -100.0 * n as f64).collect()).unwrap();
        assert_eq!(choose_truncation(&t, Radius::new(1.0).unwrap(), -30.0).unwrap(), 0);
        let gef = CoefficientModel::gef();
        let r = Radius::new(2.0).unwrap();
        let n = choose_truncation(&gef, r, -69.0).unwrap();
        // high-precision tail summation puts the crossing between 69 and 70
        assert_eq!(n, 70);
        let (_, log_mu) = max_term(&gef, r).unwrap();
        let direct = |from: usize| 0.5 * (from + 1..2000).map(|k| 2.0 * gef.h(r.log(), k)).fold(LogSumExp::new(), |mut a, x| {
            a.add(x);
            a
        }).value();
        assert!(direct(n) <= log_mu - 69.0);
        assert!(direct(n - 1) > log_mu - 69.0);
        assert!(choose_truncation(&gef, r, 0.5).is_err());
    }

    #[test]
    fn single_term_evaluation() {
        let gef = CoefficientModel::gef();
        let r = Radius::new(2.0).unwrap();
        let (_, log_mu) = max_term(&gef, r).unwrap();
        let s = SeriesSample::from_draws(vec![Complex64::new(1.0, 0.0), Complex64::new(0.0, 0.0)], 2.0);
        for v in evaluate_on_circle(&gef, &s, r, &[0.0, 1.0, 4.0]).unwrap() {
            assert!((v.re - (-log_mu).exp()).abs() < 1e-15 && v.im == 0.0);
        }
        assert!(evaluate_on_circle(&gef, &s, Radius::new(3.0).unwrap(), &[0.0]).is_err());
    }
}
