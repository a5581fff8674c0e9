//! Hole-probability estimators: direct Monte Carlo, the exact probability of
//! the dominant-constant-term event (a rigorous lower bound), and importance
//! sampling with proposals shaped like that event.

use std::fmt;
use std::str::FromStr;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Gamma};
use statrs::function::beta::beta_reg;
use statrs::function::gamma::digamma;

use crate::coeffs::{CoefficientModel, Radius};
use crate::error::{Error, Result};
use crate::growth::{bands, max_term, n1_count, s_value};
use crate::numeric::{ln_bessel_i0, ln_gamma, ln_diff_exp, ln_one_minus_exp_neg, CompensatedSum, LogSumExp};
use crate::sampling::{choose_truncation, sample_coefficients, GaussianStream, SeriesSample, DEFAULT_LOG_EPS};
use crate::zerocount::{has_hole, HoleStatus};

/// Two-sided 95% normal quantile.
const Z95: f64 = 1.959_963_984_540_054;

/// Importance-sampling intervals are flagged unreliable below this ESS.
pub const MIN_RELIABLE_ESS: f64 = 50.0;

/// Pilot runs draw from streams at and above this index, disjoint from any
/// production run.
const PILOT_STREAM_BASE: u64 = 1 << 40;

/// Remainder terms of the certificate below this size are dropped.
const CERTIFICATE_REMAINDER_FLOOR: f64 = -41.5; // ln 1e-18

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Direct,
    Importance,
    Certificate,
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Method::Direct => "direct",
            Method::Importance => "importance",
            Method::Certificate => "certificate",
        })
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "direct" => Ok(Method::Direct),
            "importance" => Ok(Method::Importance),
            "certificate" => Ok(Method::Certificate),
            _ => Err(Error::InvalidParameter(format!("unknown method '{s}'"))),
        }
    }
}

/// Log-probabilities of the three independent pieces of the certificate event.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct CertificateTerms {
    /// `|phi_0| >= sqrt(N_1) + 3`.
    pub log_p_constant: f64,
    /// `|phi_n| <= e^{-h(n)} / sqrt(N_1)` for `0 < n < N_1`.
    pub log_p_significant: f64,
    /// Band constraints `|phi_n| <= A_m` for the enumerated bands.
    pub log_p_bands: f64,
    /// Log of the union bound on the bands past the enumeration cutoff.
    pub log_remainder: f64,
    pub bands_used: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EstimateResult {
    pub method: Method,
    pub log_p: f64,
    pub log_ci_low: f64,
    pub log_ci_high: f64,
    pub n_samples: usize,
    pub n_hole: usize,
    pub n_uncertain: usize,
    pub ess: Option<f64>,
    /// False when no certified success was seen and `log_p` is only the
    /// midpoint of the interval.
    pub point_estimate: bool,
    /// False for importance estimates with `ess < MIN_RELIABLE_ESS`.
    pub reliable: bool,
    pub certificate: Option<CertificateTerms>,
}

impl EstimateResult {
    pub fn log10_p(&self) -> f64 {
        self.log_p / std::f64::consts::LN_10
    }
}

/// Sample count, seed, truncation target and worker cap for a Monte Carlo run.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SamplerSettings {
    pub n_samples: usize,
    pub seed: u64,
    pub log_eps: f64,
    /// `None` defers to `HOLESCOPE_THREADS`, then to the rayon default.
    pub threads: Option<usize>,
}

impl SamplerSettings {
    pub fn new(n_samples: usize, seed: u64) -> Self {
        Self { n_samples, seed, log_eps: DEFAULT_LOG_EPS, threads: None }
    }

    pub fn with_threads(mut self, threads: usize) -> Self {
        self.threads = Some(threads);
        self
    }
}

pub fn worker_count(explicit: Option<usize>) -> usize {
    explicit
        .or_else(|| std::env::var("HOLESCOPE_THREADS").ok()?.trim().parse().ok())
        .filter(|&n| n > 0)
        .unwrap_or_else(rayon::current_num_threads)
}

/// `f(stream)` for streams `offset .. offset + n`, in stream order whatever
/// the worker count.
pub(crate) fn map_streams<T, F>(n: usize, offset: u64, threads: Option<usize>, f: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(u64) -> Result<T> + Sync + Send,
{
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(worker_count(threads))
        .build()
        .map_err(|e| Error::InvalidParameter(format!("cannot start worker pool: {e}")))?;
    pool.install(|| (0..n as u64).into_par_iter().map(|i| f(offset + i)).collect())
}

/// Two-sided Clopper–Pearson interval for `k` successes in `n` trials.
pub fn clopper_pearson(k: usize, n: usize, confidence: f64) -> (f64, f64) {
    assert!(k <= n && n > 0);
    let alpha = 1.0 - confidence;
    let (kf, nf) = (k as f64, n as f64);
    // I_p(a, b) is increasing in p
    let solve = |a: f64, b: f64, target: f64| {
        let (mut lo, mut hi) = (0.0f64, 1.0f64);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            if beta_reg(a, b, mid) < target {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        0.5 * (lo + hi)
    };
    let lower = if k == 0 { 0.0 } else { solve(kf, nf - kf + 1.0, 0.5 * alpha) };
    let upper = if k == n { 1.0 } else { solve(kf + 1.0, nf - kf, 1.0 - 0.5 * alpha) };
    (lower, upper)
}

pub fn estimate_direct(model: &CoefficientModel, r: Radius, settings: &SamplerSettings) -> Result<EstimateResult> {
    let n = settings.n_samples;
    if n < 100 {
        return Err(Error::InvalidParameter(format!("direct estimation needs at least 100 samples, got {n}")));
    }
    let n_trunc = choose_truncation(model, r, settings.log_eps)?;
    let statuses = map_streams(n, 0, settings.threads, |stream| {
        let mut sample = sample_coefficients(settings.seed, stream, n_trunc);
        sample.r_max = r.value();
        has_hole(model, &sample, r)
    })?;
    let n_hole = statuses.iter().filter(|s| **s == HoleStatus::Hole).count();
    let n_uncertain = statuses.iter().filter(|s| **s == HoleStatus::Uncertain).count();
    // uncertain samples count as failures for the lower end, successes for the upper
    let (lower, _) = clopper_pearson(n_hole, n, 0.95);
    let (_, upper) = clopper_pearson(n_hole + n_uncertain, n, 0.95);
    let (log_p, point_estimate) = if n_hole > 0 {
        ((n_hole as f64 / n as f64).ln(), true)
    } else {
        ((0.5 * (lower + upper)).ln(), false)
    };
    Ok(EstimateResult {
        method: Method::Direct,
        log_p,
        log_ci_low: lower.ln(),
        log_ci_high: upper.ln(),
        n_samples: n,
        n_hole,
        n_uncertain,
        ess: None,
        point_estimate,
        reliable: true,
        certificate: None,
    })
}

/// `log P(|phi_0| >= sqrt(N_1) + 3) = -(sqrt(N_1) + 3)^2`.
pub fn constant_term_log_prob(n1: usize) -> f64 {
    -((n1 as f64).sqrt() + 3.0).powi(2)
}

/// Exact log-probability of the dominant-constant-term event at radius `r`,
/// a rigorous lower bound for `log P_H(r)`.
///
/// The event asks `|phi_0| >= sqrt(N_1) + 3`, `|phi_n| <= e^{-h(n)}/sqrt(N_1)`
/// for `0 < n < N_1`, and `|phi_n| <= A_m = mu^{m-1} / (N_{m,m+1} m^2)` on each
/// band `m`. Bands past the enumeration cutoff are handled by a union bound
/// using `N_{m,m+1} <= m N_1`.
pub fn certificate_log_prob(model: &CoefficientModel, r: Radius) -> Result<EstimateResult> {
    let (_, log_mu) = max_term(model, r)?;
    if log_mu <= 0.0 {
        return Err(Error::DegenerateProfile);
    }
    let (n1, _) = n1_count(model, r)?;
    let n1f = n1 as f64;
    let log_p_constant = constant_term_log_prob(n1);

    let mut significant = CompensatedSum::new();
    for n in 1..n1 {
        let lambda_sq = (-2.0 * model.h(r.log(), n)).exp() / n1f;
        significant.add(ln_one_minus_exp_neg(lambda_sq));
    }

    let band_list = bands(model, r)?;
    let mut band_sum = CompensatedSum::new();
    for b in &band_list {
        let m = b.m as f64;
        let log_a = (m - 1.0) * log_mu - (b.count as f64).ln() - 2.0 * m.ln();
        band_sum.add(b.count as f64 * ln_one_minus_exp_neg((2.0 * log_a).exp()));
    }

    // sum_{m > M} m N_1 exp(-(mu^{m-1} / (m^3 N_1))^2), terms decay doubly exponentially
    let last_m = band_list.last().map_or(0, |b| b.m);
    let mut remainder = LogSumExp::new();
    let mut m = last_m + 1;
    let ln_n1 = n1f.ln();
    loop {
        let mf = m as f64;
        let log_a = (mf - 1.0) * log_mu - 3.0 * mf.ln() - ln_n1;
        let term = mf.ln() + ln_n1 - (2.0 * log_a).exp();
        remainder.add(term);
        // once log_a > 0 the terms only shrink; an underflowed first term ends it too
        let negligible = term == f64::NEG_INFINITY || term < CERTIFICATE_REMAINDER_FLOOR + remainder.value().min(0.0) - 10.0;
        if negligible && log_a > 0.0 {
            break;
        }
        m += 1;
    }
    let log_remainder = remainder.value();
    let log_product = log_p_constant + significant.value() + band_sum.value();
    let log_p = if log_remainder < log_product { ln_diff_exp(log_product, log_remainder) } else { f64::NEG_INFINITY };
    Ok(EstimateResult {
        method: Method::Certificate,
        log_p,
        log_ci_low: log_p,
        log_ci_high: log_p,
        n_samples: 0,
        n_hole: 0,
        n_uncertain: 0,
        ess: None,
        point_estimate: true,
        reliable: true,
        certificate: Some(CertificateTerms {
            log_p_constant,
            log_p_significant: significant.value(),
            log_p_bands: band_sum.value(),
            log_remainder,
            bands_used: band_list.len(),
        }),
    })
}

/// Importance proposal on `phi_0, phi_1, ...`.
///
/// Plain form: `phi_0` is a standard complex Gaussian shifted by
/// `mean_shift_0` along the real axis (optionally followed by a uniform
/// random rotation) and `phi_n` is complex Gaussian with scale `sigma_n`.
/// With `exp_block` the leading coefficients are instead generated in
/// multiplicative form, and `coupled` replaces the fixed scales of the
/// remaining ones.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProposalSpec {
    pub mean_shift_0: f64,
    /// Rotate `phi_0` by a uniform phase, making its density radial
    /// (`e^{-|z|^2 - b^2} I_0(2 b |z|) / pi`).
    #[serde(default)]
    pub phase_randomized: bool,
    /// `sigma_1, sigma_2, ...`; indices past the end use 1.
    #[serde(default)]
    pub scales: Vec<f64>,
    /// Per-sample scales tied to the drawn `|phi_0|`; overrides `scales`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub coupled: Option<CoupledScales>,
    /// Generates `phi_0 ..= phi_K`; overrides the shift.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub exp_block: Option<ExpBlock>,
}

/// `Gamma(shape, scale)`, sampled by inverting its distribution function.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GammaLaw {
    pub shape: f64,
    pub scale: f64,
}

impl GammaLaw {
    fn is_valid(&self) -> bool {
        self.shape.is_finite() && self.shape > 0.0 && self.scale.is_finite() && self.scale > 0.0
    }

    pub fn ln_density(&self, t: f64) -> f64 {
        (self.shape - 1.0) * t.ln() - t / self.scale - ln_gamma(self.shape) - self.shape * self.scale.ln()
    }

    fn quantile(&self, p: f64) -> f64 {
        Gamma::new(self.shape, 1.0 / self.scale).map_or(f64::NAN, |law| law.inverse_cdf(p))
    }

    fn mean(&self) -> f64 {
        self.shape * self.scale
    }

    /// Weighted maximum likelihood from `(value, weight)` pairs whose
    /// weights sum to one; `None` for a degenerate sample.
    fn fit(samples: &[(f64, f64)]) -> Option<Self> {
        let mean: f64 = samples.iter().map(|(x, w)| w * x).sum();
        let mean_ln: f64 = samples.iter().map(|(x, w)| w * x.ln()).sum();
        let gap = mean.ln() - mean_ln;
        if !(gap > 1e-12 && mean.is_finite()) {
            return None;
        }
        // ln k - digamma(k) decreases from +inf to 0; bisect in ln k
        let (mut lo, mut hi) = (-20.0f64, 30.0f64);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            let k = mid.exp();
            if k.ln() - digamma(k) > gap {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let shape = (0.5 * (lo + hi)).exp();
        Some(Self { shape, scale: mean / shape })
    }

    /// Moves a fraction `a` of the way to `target` in shape and in mean.
    fn blend(self, target: Self, a: f64) -> Self {
        let shape = a * target.shape + (1.0 - a) * self.shape;
        let mean = a * target.mean() + (1.0 - a) * self.mean();
        Self { shape, scale: mean / shape }
    }
}

/// Law of the whitened energy `sum_k |g_k / tau_k|^2` of an [`ExpBlock`],
/// which is `Gamma(K, 1)` without it: a fraction `1 - defensive` of the
/// draws comes from `law`, the rest from `Gamma(K, 1)`. The direction is
/// kept; the defensive part bounds this factor of the weight by
/// `1 / defensive`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnergyLaw {
    pub law: GammaLaw,
    pub defensive: f64,
}

impl EnergyLaw {
    fn is_valid(&self) -> bool {
        self.law.is_valid() && (0.0..1.0).contains(&self.defensive)
    }

    /// Energy for the uniform `u` and its log weight factor.
    fn sample(&self, dims: usize, u: f64) -> (f64, f64) {
        let reference = GammaLaw { shape: dims as f64, scale: 1.0 };
        let a = self.defensive;
        let e = if u < a { reference.quantile(u / a) } else { self.law.quantile((u - a) / (1.0 - a)) };
        let ln_ref = reference.ln_density(e);
        let ln_mix = if a > 0.0 {
            let (x, y) = (a.ln() + ln_ref, (1.0 - a).ln() + self.law.ln_density(e));
            x.max(y) + (-(x - y).abs()).exp().ln_1p()
        } else {
            self.law.ln_density(e)
        };
        (e, ln_ref - ln_mix)
    }
}

/// Multiplicative parametrization of the leading coefficients:
/// `sum_{n <= K} phi_n a_n z^n = phi_0 [exp(g)]_K` on the `r`-scaled
/// variable, `g(w) = sum_{k=1}^{K} g_k w^k`, with independent
/// `g_k ~ CN(0, tau_k^2)`.
///
/// A function without zeros in the disk is `phi_0 e^g` with `g` analytic
/// there, so the hole event is close to a product set in these
/// coordinates. Given `g`, the target law of `|phi_0|^2` is exactly
/// `Gamma(K + 1, 1 / (1 + Q))` with `Q = sum_n |[e^g]_n|^2 e^{-2 h(n)}`;
/// drawing it from there removes `phi_0` from the weight.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExpBlock {
    /// `h(1) ..= h(K)` at the target radius.
    pub log_terms: Vec<f64>,
    /// `tau_1 ..= tau_K`.
    pub scales: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub energy: Option<EnergyLaw>,
}

/// Taylor coefficients `0 ..= K` of `exp(sum_{k=1}^{K} g_k w^k)`, from
/// `n e_n = sum_k k g_k e_{n-k}`.
fn exp_series(g: &[Complex64]) -> Vec<Complex64> {
    let mut e = vec![Complex64::new(0.0, 0.0); g.len() + 1];
    e[0] = Complex64::new(1.0, 0.0);
    for n in 1..=g.len() {
        let s: Complex64 = (1..=n).map(|k| g[k - 1] * k as f64 * e[n - k]).sum();
        e[n] = s / n as f64;
    }
    e
}

/// Inverse of [`exp_series`]: `g_1 ..= g_K` from `c_0 ..= c_K`, `c_0 != 0`.
fn log_series(c: &[Complex64]) -> Vec<Complex64> {
    let k = c.len() - 1;
    let mut g = vec![Complex64::new(0.0, 0.0); k];
    for n in 1..=k {
        let mut s = c[n] * n as f64;
        for j in 1..n {
            s -= g[j - 1] * j as f64 * c[n - j];
        }
        g[n - 1] = s / (n as f64 * c[0]);
    }
    g
}

impl ExpBlock {
    pub fn dims(&self) -> usize {
        self.log_terms.len()
    }

    fn validate(&self) -> Result<()> {
        if self.log_terms.is_empty() || self.scales.len() != self.log_terms.len() {
            return Err(Error::InvalidParameter(format!(
                "exp block needs matching non-empty profiles, got {} terms and {} scales",
                self.log_terms.len(),
                self.scales.len()
            )));
        }
        if let Some(bad) = self.scales.iter().find(|s| !(s.is_finite() && **s > 0.0)) {
            return Err(Error::InvalidParameter(format!("exp block scales must be positive, got {bad}")));
        }
        if self.log_terms.iter().any(|h| !h.is_finite()) {
            return Err(Error::InvalidParameter("exp block log terms must be finite".into()));
        }
        if let Some(e) = self.energy.filter(|e| !e.is_valid()) {
            return Err(Error::InvalidParameter(format!("energy law needs a valid law and defensive in [0, 1), got {e:?}")));
        }
        Ok(())
    }

    /// Overwrites `draws[0 ..= K]` (standard Gaussians on entry) and
    /// returns `K` with the log weight of the block.
    fn apply(&self, draws: &mut [Complex64], g: &mut GaussianStream) -> (usize, f64) {
        let k = self.dims().min(draws.len() - 1);
        let mut log_w = 0.0;
        let mut coeffs: Vec<Complex64> = (0..k).map(|i| draws[i + 1] * self.scales[i]).collect();
        if let Some(law) = &self.energy {
            let energy: f64 = draws[1..=k].iter().map(|z| z.norm_sqr()).sum();
            let (e, lw) = law.sample(k, uniform_from(g.next()));
            let factor = (e / energy).sqrt();
            for c in &mut coeffs {
                *c *= factor;
            }
            log_w += lw;
        }
        let e = exp_series(&coeffs);
        let q: f64 = (1..=k).map(|n| e[n].norm_sqr() * (-2.0 * self.log_terms[n - 1]).exp()).sum();
        let shape = (k + 1) as f64;
        let t = GammaLaw { shape, scale: 1.0 / (1.0 + q) }.quantile(uniform_from(g.next()));
        // the phase of draws[0] is uniform and independent of its modulus
        let modulus = draws[0].norm();
        draws[0] *= t.sqrt() / modulus;
        log_w += ln_gamma(shape) - shape * q.ln_1p();
        for n in 1..=k {
            let (tau, h) = (self.scales[n - 1], self.log_terms[n - 1]);
            log_w += coeffs[n - 1].norm_sqr() / (tau * tau) + 2.0 * tau.ln() - 2.0 * h;
            draws[n] = draws[0] * e[n] * (-h).exp();
        }
        (k, log_w)
    }

    /// `g_1 ..= g_K` of a draw.
    fn coordinates(&self, draws: &[Complex64]) -> Vec<Complex64> {
        let k = self.dims().min(draws.len() - 1);
        let c: Vec<Complex64> = (0..=k).map(|n| if n == 0 { draws[0] } else { draws[n] * self.log_terms[n - 1].exp() }).collect();
        log_series(&c)
    }
}

/// `sigma_n = (1 + e^{2 h(n)} / (kappa |phi_0|)^2)^{-1/2}` for `n = 1 ..=
/// log_terms.len()`, with `log_terms[n - 1] = h(n)`.
///
/// Absence of zeros depends only on the ratios `phi_n / phi_0`, so the
/// conditional spread of `phi_n` given a hole grows with `|phi_0|`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CoupledScales {
    pub kappa: f64,
    pub log_terms: Vec<f64>,
}

impl CoupledScales {
    fn scale(&self, n: usize, ln_rho: f64) -> f64 {
        self.log_terms.get(n - 1).map_or(1.0, |h| soft_scale(2.0 * (h - self.kappa.ln() - ln_rho)))
    }
}

/// `(1 + e^x)^{-1/2}` without overflow.
fn soft_scale(x: f64) -> f64 {
    if x > 0.0 {
        (-0.5 * x).exp() / (1.0 + (-x).exp()).sqrt()
    } else {
        1.0 / (1.0 + x.exp()).sqrt()
    }
}

/// Uniform variate on `(0, 1)` from a standard complex Gaussian.
fn uniform_from(z: Complex64) -> f64 {
    (-(-z.norm_sqr()).exp_m1()).clamp(f64::MIN_POSITIVE, 1.0 - f64::EPSILON)
}

impl ProposalSpec {
    pub fn identity() -> Self {
        Self { mean_shift_0: 0.0, phase_randomized: false, scales: Vec::new(), coupled: None, exp_block: None }
    }

    /// Shift `sqrt(N_1) + 3` and `sigma_n = min(1, e^{-h(n)} / sqrt(N_1))` on
    /// the significant indices; 1 on the tail.
    pub fn default_for(model: &CoefficientModel, r: Radius) -> Result<Self> {
        let (n1, _) = n1_count(model, r)?;
        let root = (n1 as f64).sqrt();
        let scales = (1..n1).map(|n| ((-model.h(r.log(), n)).exp() / root).min(1.0)).collect();
        Ok(Self { mean_shift_0: root + 3.0, scales, ..Self::identity() })
    }

    /// Fixed scale of `phi_n` (ignores coupling and the block).
    pub fn scale(&self, n: usize) -> f64 {
        if n == 0 {
            1.0
        } else {
            self.scales.get(n - 1).copied().unwrap_or(1.0)
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.mean_shift_0.is_finite() && self.mean_shift_0 >= 0.0) {
            return Err(Error::InvalidParameter(format!("mean shift must be finite and >= 0, got {}", self.mean_shift_0)));
        }
        if let Some(bad) = self.scales.iter().find(|s| !(**s > 0.0 && **s <= 1.0)) {
            return Err(Error::InvalidParameter(format!("proposal scales must lie in (0, 1], got {bad}")));
        }
        if let Some(c) = &self.coupled {
            if !(c.kappa.is_finite() && c.kappa > 0.0) || c.log_terms.iter().any(|h| h.is_nan()) {
                return Err(Error::InvalidParameter(format!("coupled proposal needs kappa > 0, got {}", c.kappa)));
            }
        }
        if let Some(block) = &self.exp_block {
            block.validate()?;
        }
        Ok(())
    }

    /// Draws `phi_0 ..= phi_{n_trunc}` from stream `stream` and returns them
    /// with the log likelihood ratio `log (target / proposal)`.
    pub fn draw(&self, seed: u64, stream: u64, n_trunc: usize) -> (Vec<Complex64>, f64) {
        let mut g = GaussianStream::new(seed, stream);
        let mut draws: Vec<Complex64> = (0..=n_trunc).map(|_| g.next()).collect();
        let b = self.mean_shift_0;
        let mut log_w = 0.0;
        let mut first_free = 1;
        if let Some(block) = &self.exp_block {
            let (k, lw) = block.apply(&mut draws, &mut g);
            first_free = k + 1;
            log_w += lw;
        } else if b > 0.0 {
            let shifted = draws[0] + b;
            if self.phase_randomized {
                let u = g.next();
                draws[0] = shifted * (u / u.norm());
                log_w += b * b - ln_bessel_i0(2.0 * b * draws[0].norm());
            } else {
                draws[0] = shifted;
                log_w += b * b - 2.0 * b * shifted.re;
            }
        }
        let ln_rho = draws[0].norm().ln();
        for (n, phi) in draws.iter_mut().enumerate().skip(first_free) {
            let sigma = self.coupled.as_ref().map_or_else(|| self.scale(n), |c| c.scale(n, ln_rho));
            if sigma != 1.0 {
                *phi *= sigma;
                log_w += 2.0 * sigma.ln() - phi.norm_sqr() * (1.0 - 1.0 / (sigma * sigma));
            }
        }
        (draws, log_w)
    }
}

/// Weighted mean of `exp(log_w)` over `n` samples (entries not listed are
/// zero): `(log mean, relative standard error, ESS)`.
fn weighted_stats(log_ws: &[f64], n: usize) -> (f64, f64, f64) {
    let shift = log_ws.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let s1: CompensatedSum = log_ws.iter().map(|lw| (lw - shift).exp()).collect();
    let s2: CompensatedSum = log_ws.iter().map(|lw| (2.0 * (lw - shift)).exp()).collect();
    let (s1, s2) = (s1.value(), s2.value());
    let nf = n as f64;
    let mean = s1 / nf;
    let var = ((s2 / nf - mean * mean) * nf / (nf - 1.0)).max(0.0);
    (shift + mean.ln(), (var / nf).sqrt() / mean, s1 * s1 / s2)
}

/// Importance estimate of `P(event)` for an arbitrary event on the
/// coefficients; the event returns `None` when it cannot be decided.
pub fn estimate_importance_event<F>(proposal: &ProposalSpec, settings: &SamplerSettings, n_trunc: usize, event: F) -> Result<EstimateResult>
where
    F: Fn(&[Complex64]) -> Result<Option<bool>> + Sync + Send,
{
    proposal.validate()?;
    let n = settings.n_samples;
    if n < 1000 {
        return Err(Error::InvalidParameter(format!("importance sampling needs at least 1000 samples, got {n}")));
    }
    let outcomes = map_streams(n, 0, settings.threads, |stream| {
        let (draws, log_w) = proposal.draw(settings.seed, stream, n_trunc);
        Ok((log_w, event(&draws)?))
    })?;
    summarize_importance(&outcomes, n)
}

fn summarize_importance(outcomes: &[(f64, Option<bool>)], n: usize) -> Result<EstimateResult> {
    let certain: Vec<f64> = outcomes.iter().filter(|o| o.1 == Some(true)).map(|o| o.0).collect();
    let outer: Vec<f64> = outcomes.iter().filter(|o| o.1 != Some(false)).map(|o| o.0).collect();
    if outer.is_empty() {
        return Err(Error::NoSuccesses(n));
    }
    let (log_hi, rel_hi, ess_hi) = weighted_stats(&outer, n);
    let (log_p, log_ci_low, ess, point_estimate) = if certain.is_empty() {
        (log_hi - std::f64::consts::LN_2, f64::NEG_INFINITY, ess_hi, false)
    } else {
        let (log_lo, rel_lo, ess_lo) = weighted_stats(&certain, n);
        (log_lo, log_lo + (1.0 - Z95 * rel_lo).max(0.0).ln(), ess_lo, true)
    };
    let log_ci_high = (log_hi + (1.0 + Z95 * rel_hi).ln()).min(0.0);
    Ok(EstimateResult {
        method: Method::Importance,
        log_p: log_p.min(0.0),
        log_ci_low: log_ci_low.min(0.0),
        log_ci_high,
        n_samples: n,
        n_hole: certain.len(),
        n_uncertain: outer.len() - certain.len(),
        ess: Some(ess),
        point_estimate,
        reliable: ess >= MIN_RELIABLE_ESS,
        certificate: None,
    })
}

fn hole_event<'a>(model: &'a CoefficientModel, r: Radius) -> impl Fn(&[Complex64]) -> Result<Option<bool>> + Sync + Send + 'a {
    move |draws: &[Complex64]| {
        let sample = SeriesSample::from_draws(draws.to_vec(), r.value());
        Ok(match has_hole(model, &sample, r)? {
            HoleStatus::Hole => Some(true),
            HoleStatus::NoHole => Some(false),
            HoleStatus::Uncertain => None,
        })
    }
}

pub fn estimate_importance(model: &CoefficientModel, r: Radius, proposal: &ProposalSpec, settings: &SamplerSettings) -> Result<EstimateResult> {
    let n_trunc = choose_truncation(model, r, settings.log_eps)?;
    estimate_importance_event(proposal, settings, n_trunc, hole_event(model, r))
}

/// Cross-entropy tuning of the importance proposal on pilot runs.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AdaptSettings {
    /// Rounds at the target radius.
    pub rounds: usize,
    /// Rounds at each smaller radius of the ladder.
    pub stage_rounds: usize,
    pub pilot_samples: usize,
    /// Weight of the new fit in each update.
    pub smoothing: f64,
    /// Ratio of `S` between neighbouring radii of the ladder.
    pub ladder_ratio: f64,
}

impl Default for AdaptSettings {
    fn default() -> Self {
        Self { rounds: 4, stage_rounds: 2, pilot_samples: 20_000, smoothing: 0.7, ladder_ratio: 2.0 }
    }
}

/// Below this `S` the hole is not a rare event and the ladder stops.
const LADDER_FLOOR: f64 = 1.0;
const MAX_LADDER: usize = 32;
/// Pilot rounds with fewer holes leave the proposal unchanged.
const MIN_PILOT_HITS: usize = 10;
const ENERGY_DEFENSIVE: f64 = 0.1;
/// Starting `kappa`; fitted values stay within a factor 2 of it.
const INITIAL_KAPPA: f64 = 0.3;

/// `sigma_n = (1 + e^{2 h(n)} / kappa^2)^{-1/2}`: the scale a standard
/// complex Gaussian keeps after a soft Gaussian constraint
/// `|phi_n| a_n r^n <~ kappa` is imposed on it.
pub fn soft_constraint_scales(model: &CoefficientModel, r: Radius, kappa: f64, n_trunc: usize) -> Vec<f64> {
    (1..=n_trunc).map(|n| soft_scale(2.0 * (model.h(r.log(), n) - kappa.ln()))).collect()
}

/// Radii with `S` falling by `ratio` from `r` down to `S ~ 1`, increasing
/// and ending at `r`.
pub fn radius_ladder(model: &CoefficientModel, r: Radius, ratio: f64) -> Result<Vec<Radius>> {
    if !(ratio > 1.0 && ratio.is_finite()) {
        return Err(Error::InvalidParameter(format!("ladder ratio must exceed 1, got {ratio}")));
    }
    let s_at = |log_r: f64| s_value(model, Radius::from_log(log_r));
    let mut out = vec![r];
    let mut hi = r.log();
    let mut target = s_at(hi)? / ratio;
    while target >= LADDER_FLOOR && out.len() < MAX_LADDER {
        // S is nondecreasing in r and vanishes as r -> 0
        let mut lo = hi - 1.0;
        while s_at(lo)? >= target {
            lo -= 1.0;
        }
        let mut top = hi;
        for _ in 0..60 {
            let mid = 0.5 * (lo + top);
            if s_at(mid)? >= target {
                top = mid;
            } else {
                lo = mid;
            }
        }
        hi = top;
        out.push(Radius::from_log(hi));
        target /= ratio;
    }
    out.reverse();
    Ok(out)
}

/// A pilot hole sample: draws and normalized weight.
type Hit<'a> = (&'a [Complex64], f64);

/// Maximizer of a unimodal `f` on `[a, b]` by golden-section search.
fn golden_max(f: impl Fn(f64) -> f64, mut a: f64, mut b: f64, tol: f64) -> f64 {
    let g = 0.5 * (5f64.sqrt() - 1.0);
    let mut c = b - g * (b - a);
    let mut d = a + g * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    while b - a > tol {
        if fc > fd {
            b = d;
            d = c;
            fd = fc;
            c = b - g * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + g * (b - a);
            fd = f(d);
        }
    }
    0.5 * (a + b)
}

/// Weighted Gaussian log-likelihood of `phi_n` under the coupled scale with
/// level `h(n) - ln kappa`.
fn coupled_log_lik(hits: &[Hit<'_>], n: usize, level: f64) -> f64 {
    hits.iter()
        .map(|(d, w)| {
            let s = soft_scale(2.0 * (level - d[0].norm().ln()));
            w * (-2.0 * s.ln() - d[n].norm_sqr() / (s * s))
        })
        .sum()
}

/// Proposal for one radius of the ladder: block on `1 ..= K`, coupled
/// scales beyond.
fn ladder_proposal(log_terms: &[f64], dims: usize, scales: Vec<f64>, energy: Option<EnergyLaw>, ln_kappa: f64) -> ProposalSpec {
    ProposalSpec {
        coupled: Some(CoupledScales { kappa: ln_kappa.exp(), log_terms: log_terms.to_vec() }),
        exp_block: Some(ExpBlock { log_terms: log_terms[..dims].to_vec(), scales, energy }),
        ..ProposalSpec::identity()
    }
}

/// Weighted refit of the block scales, the energy law and the tail `kappa`.
fn refit(log_terms: &[f64], block: &ExpBlock, ln_kappa: f64, hits: &[Hit<'_>], a: f64) -> (Vec<f64>, Option<EnergyLaw>, f64) {
    let dims = block.dims();
    let coords: Vec<Vec<Complex64>> = hits.iter().map(|(d, _)| block.coordinates(d)).collect();
    let scales: Vec<f64> = (0..dims)
        .map(|k| {
            let m: f64 = coords.iter().zip(hits).map(|(c, (_, w))| w * c[k].norm_sqr()).sum();
            let old = block.scales[k];
            if m > 0.0 {
                (0.5 * a * m.ln() + (1.0 - a) * old.ln()).exp()
            } else {
                old
            }
        })
        .collect();
    let energies: Vec<(f64, f64)> = coords
        .iter()
        .zip(hits)
        .map(|(c, (_, w))| (c.iter().zip(&scales).map(|(g, t)| (g / t).norm_sqr()).sum(), *w))
        .collect();
    let current = block.energy.map_or(GammaLaw { shape: dims as f64, scale: 1.0 }, |e| e.law);
    let energy = GammaLaw::fit(&energies).map_or(block.energy, |fit| Some(EnergyLaw { law: current.blend(fit, a), defensive: ENERGY_DEFENSIVE }));
    let tail = dims + 1..log_terms.len() + 1;
    let ln_kappa = if tail.is_empty() {
        ln_kappa
    } else {
        let objective = |lk: f64| tail.clone().map(|n| coupled_log_lik(hits, n, log_terms[n - 1] - lk)).sum();
        a * golden_max(objective, ln_kappa - 5.0, ln_kappa + 5.0, 1e-4) + (1.0 - a) * ln_kappa
    };
    (scales, energy, ln_kappa)
}

/// Cross-entropy tuning of the multiplicative proposal for hole
/// probabilities.
///
/// The block covers the `N_1` leading coefficients. Tuning starts at a
/// radius where holes are common and walks up a ladder of radii (see
/// [`radius_ladder`]), so every pilot run sees enough holes; at each radius
/// the proposal with the best pilot ESS is carried forward.
pub fn adapt_proposal(model: &CoefficientModel, r: Radius, settings: &SamplerSettings, adapt: &AdaptSettings) -> Result<ProposalSpec> {
    if !(adapt.smoothing > 0.0 && adapt.smoothing <= 1.0) || adapt.pilot_samples == 0 {
        return Err(Error::InvalidParameter(format!("need smoothing in (0, 1] and pilot samples >= 1, got {adapt:?}")));
    }
    let ladder = radius_ladder(model, r, adapt.ladder_ratio)?;
    let a = adapt.smoothing;
    let mut carried: Option<(Vec<f64>, Option<EnergyLaw>, f64)> = None;
    let mut pilot_run = 0u64;
    let mut chosen = None;
    for (stage, &rs) in ladder.iter().enumerate() {
        let n_trunc = choose_truncation(model, rs, settings.log_eps)?.max(1);
        let (n1, _) = n1_count(model, rs)?;
        let dims = n1.clamp(1, n_trunc);
        let log_terms: Vec<f64> = (1..=n_trunc).map(|n| model.h(rs.log(), n)).collect();
        let (mut scales, mut energy, mut ln_kappa) = match carried.take() {
            None => {
                let b = (n1 as f64).sqrt() + 3.0;
                let k0 = INITIAL_KAPPA;
                let scales = log_terms[..dims].iter().map(|h| k0 * soft_scale(2.0 * ((k0 * b).ln() - h))).collect();
                (scales, None, k0.ln())
            }
            Some((mut scales, energy, ln_kappa)) => {
                let old = scales.len();
                let last = scales[old - 1];
                scales.resize(dims, last);
                let ratio = dims as f64 / old as f64;
                let energy = energy.map(|e| EnergyLaw { law: GammaLaw { shape: e.law.shape * ratio, scale: e.law.scale }, ..e });
                (scales, energy, ln_kappa)
            }
        };
        let event = hole_event(model, rs);
        let rounds = if stage + 1 == ladder.len() { adapt.rounds } else { adapt.stage_rounds };
        let mut best: Option<(f64, ProposalSpec)> = None;
        for _ in 0..rounds {
            let spec = ladder_proposal(&log_terms, dims, scales.clone(), energy, ln_kappa);
            pilot_run += 1;
            let outcomes = map_streams(adapt.pilot_samples, PILOT_STREAM_BASE * pilot_run, settings.threads, |stream| {
                let (draws, log_w) = spec.draw(settings.seed, stream, n_trunc);
                let hit = event(&draws)? == Some(true);
                Ok(hit.then_some((draws, log_w)))
            })?;
            let found: Vec<&(Vec<Complex64>, f64)> = outcomes.iter().flatten().collect();
            let shift = found.iter().map(|h| h.1).fold(f64::NEG_INFINITY, f64::max);
            let total: f64 = found.iter().map(|h| (h.1 - shift).exp()).sum();
            let hits: Vec<Hit<'_>> = found.iter().map(|h| (h.0.as_slice(), (h.1 - shift).exp() / total)).collect();
            let ess = if hits.is_empty() { 0.0 } else { 1.0 / hits.iter().map(|h| h.1 * h.1).sum::<f64>() };
            let block = spec.exp_block.clone().expect("ladder proposals carry a block");
            if best.as_ref().map_or(true, |(e, _)| ess > *e) {
                best = Some((ess, spec));
            }
            if hits.len() >= MIN_PILOT_HITS {
                (scales, energy, ln_kappa) = refit(&log_terms, &block, ln_kappa, &hits, a);
            }
        }
        let spec = best.map_or_else(|| ladder_proposal(&log_terms, dims, scales, energy, ln_kappa), |b| b.1);
        let block = spec.exp_block.as_ref().expect("ladder proposals carry a block");
        let kappa = spec.coupled.as_ref().map_or(INITIAL_KAPPA, |c| c.kappa);
        carried = Some((block.scales.clone(), block.energy, kappa.ln()));
        chosen = Some(spec);
    }
    Ok(chosen.expect("the ladder ends at the target radius"))
}

/// One row of the `S(r)` comparison table.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CompareRow {
    pub r: f64,
    pub s: f64,
    pub neg_log_p: Option<f64>,
    pub neg_certificate: Option<f64>,
    pub n1_log_n1: f64,
    /// `(-log p) / S`; `None` when `S = 0` or there is no estimate.
    pub ratio: Option<f64>,
    pub estimate: Option<EstimateResult>,
}

pub fn compare_vs_s(model: &CoefficientModel, r_grid: &[Radius], method: Method, settings: &SamplerSettings) -> Result<Vec<CompareRow>> {
    r_grid
        .iter()
        .map(|&r| {
            let s = s_value(model, r)?;
            let (n1, _) = n1_count(model, r)?;
            let certificate = certificate_log_prob(model, r).ok();
            let estimate = match method {
                Method::Direct => estimate_direct(model, r, settings).ok(),
                Method::Importance => {
                    let spec = adapt_proposal(model, r, settings, &AdaptSettings::default())?;
                    estimate_importance(model, r, &spec, settings).ok()
                }
                Method::Certificate => certificate.clone(),
            };
            let neg_log_p = estimate.as_ref().filter(|e| e.point_estimate).map(|e| -e.log_p);
            let ratio = neg_log_p.filter(|_| s > 0.0).map(|p| p / s);
            Ok(CompareRow {
                r: r.value(),
                s,
                neg_log_p,
                neg_certificate: certificate.map(|c| -c.log_p),
                n1_log_n1: n1 as f64 * (n1 as f64).ln(),
                ratio,
                estimate,
            })
        })
        .collect()
}
