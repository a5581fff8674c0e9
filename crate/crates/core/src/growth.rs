//! Deterministic growth functionals of `g(z) = sum a_n z^n`: maximal term,
//! its index, significant-term counts, band structure and `S(r)`.
//!
//! Everything rests on the concavity of `h(n) = log a_n + n log r`, which
//! makes every level set an interval and every search a bracketed bisection.

use crate::coeffs::{CoefficientModel, Radius};
use crate::error::{Error, Result};
use crate::numeric::{compensated_sum, ln_geometric_tail, CompensatedSum, LogSumExp};

/// Bands are enumerated while their largest `h` stays above
/// `-BAND_CUTOFF * max(1, log mu)`.
pub const BAND_CUTOFF: f64 = 50.0;

/// Relative slack used only to break near-ties between adjacent maximal terms.
const TIE_TOLERANCE: f64 = 1e-12;

/// Terms below `log mu - LOG_SUM_DROP` are dropped from `log M(r)`.
const LOG_SUM_DROP: f64 = 60.0;

/// `N_{m,m+1}(r)` for one nonempty band.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Band {
    pub m: usize,
    pub count: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct GrowthProfile {
    pub r: Radius,
    pub log_mu: f64,
    pub nu: usize,
    pub n1: usize,
    pub n1_prime: f64,
    pub s: f64,
    /// Empty when `log mu = 0`, where the band thresholds collapse.
    pub bands: Vec<Band>,
}

impl GrowthProfile {
    pub fn compute(model: &CoefficientModel, r: Radius) -> Result<Self> {
        let (nu, log_mu) = max_term(model, r)?;
        let (n1, n1_prime) = n1_from(model, r.log(), nu)?;
        let s = s_from(model, r.log(), n1);
        let bands = if log_mu > 0.0 { bands_from(model, r.log(), log_mu, n1)? } else { Vec::new() };
        Ok(Self { r, log_mu, nu, n1, n1_prime, s, bands })
    }

    pub fn band(&self, m: usize) -> usize {
        self.bands.iter().find(|b| b.m == m).map_or(0, |b| b.count)
    }
}

fn tie_slack(x: f64) -> f64 {
    TIE_TOLERANCE * x.abs().max(1.0)
}

/// Largest `n` in `[lo, limit]` with `pred(n)`, given `pred(lo)` and that
/// `pred` switches from true to false at most once. The flag reports
/// whether `pred(limit)` still held.
fn last_true(lo: usize, limit: usize, pred: impl Fn(usize) -> bool) -> (usize, bool) {
    debug_assert!(lo <= limit);
    let mut good = lo;
    let mut step = 1usize;
    let bad = loop {
        let probe = good.saturating_add(step).min(limit);
        if probe == good {
            return (good, true);
        }
        if pred(probe) {
            good = probe;
            step = step.saturating_mul(2);
        } else {
            break probe;
        }
    };
    let (mut good, mut bad) = (good, bad);
    while bad - good > 1 {
        let mid = good + (bad - good) / 2;
        if pred(mid) {
            good = mid;
        } else {
            bad = mid;
        }
    }
    (good, false)
}

fn exhausted(model: &CoefficientModel, context: &'static str) -> Error {
    Error::SupportExhausted { limit: model.support_hint(), context }
}

/// `(nu, log mu)`: the largest index of the maximal term and its log.
pub fn max_term(model: &CoefficientModel, r: Radius) -> Result<(usize, f64)> {
    max_term_log(model, r.log())
}

pub(crate) fn max_term_log(model: &CoefficientModel, log_r: f64) -> Result<(usize, f64)> {
    let limit = model.support_hint();
    let rising = |n: usize| {
        let (prev, cur) = (model.h(log_r, n - 1), model.h(log_r, n));
        cur > f64::NEG_INFINITY && cur >= prev - tie_slack(prev)
    };
    if limit == 0 || !rising(1) {
        return Ok((0, model.h(log_r, 0)));
    }
    let (nu, at_limit) = last_true(1, limit, rising);
    if at_limit && model.last_nonzero() != Some(limit) {
        return Err(exhausted(model, "maximal term"));
    }
    // a tie may leave the earlier index marginally larger; report the true maximum
    let log_mu = model.h(log_r, nu).max(model.h(log_r, nu - 1));
    Ok((nu, log_mu))
}

/// `N_1(r) = #{n : h(n) >= 0}` and the root `N_1'(r)` of the linear interpolant.
pub fn n1_count(model: &CoefficientModel, r: Radius) -> Result<(usize, f64)> {
    let (nu, _) = max_term(model, r)?;
    n1_from(model, r.log(), nu)
}

fn n1_from(model: &CoefficientModel, log_r: f64, nu: usize) -> Result<(usize, f64)> {
    let limit = model.support_hint();
    let start = if model.h(log_r, nu) >= 0.0 { nu } else { 0 };
    let (last, at_limit) = last_true(start, limit, |n| model.h(log_r, n) >= 0.0);
    if at_limit && model.last_nonzero() != Some(limit) {
        return Err(exhausted(model, "significant-term count"));
    }
    let (a, b) = (model.h(log_r, last), model.h(log_r, last + 1));
    let frac = if b == f64::NEG_INFINITY { 0.0 } else { a / (a - b) };
    Ok((last + 1, last as f64 + frac))
}

/// `S(r) = 2 sum_{n < N_1} h(n)`, compensated.
pub fn s_value(model: &CoefficientModel, r: Radius) -> Result<f64> {
    let (n1, _) = n1_count(model, r)?;
    Ok(s_from(model, r.log(), n1))
}

fn s_from(model: &CoefficientModel, log_r: f64, n1: usize) -> f64 {
    2.0 * compensated_sum((0..n1).map(|n| model.h(log_r, n)))
}

/// `N_x(r) = #{n : h(n) >= (1 - x) log mu}`.
pub fn n_x(model: &CoefficientModel, r: Radius, x: f64) -> Result<usize> {
    if !(x >= 0.0 && x.is_finite()) {
        return Err(Error::InvalidParameter(format!("x must be finite and non-negative, got {x}")));
    }
    let (nu, log_mu) = max_term(model, r)?;
    level_count(model, r.log(), nu, (1.0 - x) * log_mu)
}

/// Size of the interval `{n : h(n) >= threshold}` around `nu`.
fn level_count(model: &CoefficientModel, log_r: f64, nu: usize, threshold: f64) -> Result<usize> {
    let above = |n: usize| model.h(log_r, n) >= threshold;
    if !above(nu) {
        return Ok(0);
    }
    let limit = model.support_hint();
    let (right, at_limit) = last_true(nu, limit, above);
    if at_limit && model.last_nonzero() != Some(limit) {
        return Err(exhausted(model, "level-set count"));
    }
    let left = if above(0) {
        0
    } else {
        // h rises on [0, nu]; find the first index at or above the threshold
        let (mut lo, mut hi) = (0usize, nu);
        while hi - lo > 1 {
            let mid = lo + (hi - lo) / 2;
            if above(mid) {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        hi
    };
    Ok(right - left + 1)
}

/// `N_{m,m+1}(r) = N_{m+1}(r) - N_m(r)`: indices with `h` in `[-m L, -(m-1) L)`.
pub fn band_count(model: &CoefficientModel, r: Radius, m: usize) -> Result<usize> {
    if m == 0 {
        return Err(Error::InvalidParameter("band index m must be at least 1".into()));
    }
    let (nu, log_mu) = max_term(model, r)?;
    if log_mu <= 0.0 {
        return Err(Error::DegenerateProfile);
    }
    let upper = level_count(model, r.log(), nu, -(m as f64) * log_mu)?;
    let lower = level_count(model, r.log(), nu, -((m - 1) as f64) * log_mu)?;
    Ok(upper - lower)
}

/// Nonempty bands up to the cutoff, in increasing `m`.
pub fn bands(model: &CoefficientModel, r: Radius) -> Result<Vec<Band>> {
    let (nu, log_mu) = max_term(model, r)?;
    if log_mu <= 0.0 {
        return Err(Error::DegenerateProfile);
    }
    let (n1, _) = n1_from(model, r.log(), nu)?;
    bands_from(model, r.log(), log_mu, n1)
}

/// Band of a negative `h`, with thresholds compared exactly as in `level_count`.
fn band_of(h: f64, log_mu: f64) -> usize {
    let mut m = ((-h / log_mu).ceil() as usize).max(1);
    while h < -(m as f64) * log_mu {
        m += 1;
    }
    while m > 1 && h >= -((m - 1) as f64) * log_mu {
        m -= 1;
    }
    m
}

fn bands_from(model: &CoefficientModel, log_r: f64, log_mu: f64, n1: usize) -> Result<Vec<Band>> {
    let cutoff = -BAND_CUTOFF * log_mu.max(1.0);
    let limit = model.support_hint();
    let mut out: Vec<Band> = Vec::new();
    let mut n = n1;
    loop {
        if n > limit {
            if model.last_nonzero().is_some() {
                break;
            }
            return Err(exhausted(model, "band enumeration"));
        }
        let h = model.h(log_r, n);
        if h == f64::NEG_INFINITY {
            break;
        }
        let m = band_of(h, log_mu);
        let continuing = out.last().is_some_and(|b| b.m == m);
        if h < cutoff && !continuing {
            break;
        }
        match out.last_mut() {
            Some(b) if b.m == m => b.count += 1,
            _ => out.push(Band { m, count: 1 }),
        }
        n += 1;
    }
    Ok(out)
}

/// `log mu(r) - log mu(1) - int_1^r nu(t)/t dt`, the integral taken exactly.
///
/// With breakpoints `b_k = log a_{k-1} - log a_k` (non-decreasing by
/// log-concavity) the maximal index is `nu(t) = #{k >= 1 : b_k <= log t}`,
/// so the integral over `s = log t` is `sum_k (log r - max(b_k, 0))^+`.
pub fn verify_integral_relation(model: &CoefficientModel, r: Radius) -> Result<f64> {
    let log_r = r.log();
    if log_r < 0.0 {
        return Err(Error::InvalidParameter(format!("integral relation needs r >= 1, got {r}")));
    }
    let (nu, log_mu) = max_term(model, r)?;
    let (_, log_mu_1) = max_term_log(model, 0.0)?;
    let mut integral = CompensatedSum::new();
    let mut k = 1;
    loop {
        let b = model.log_coeff(k - 1) - model.log_coeff(k);
        if !(b < log_r) {
            break;
        }
        integral.add(log_r - b.max(0.0));
        k += 1;
        if k > nu + 1 && k > model.support_hint() {
            break;
        }
    }
    Ok(log_mu - log_mu_1 - integral.value())
}

/// `log M(r) = log sum_n a_n r^n`, max-shifted.
pub fn log_max_modulus(model: &CoefficientModel, r: Radius) -> Result<f64> {
    let log_r = r.log();
    let (nu, log_mu) = max_term(model, r)?;
    let floor = log_mu - LOG_SUM_DROP;
    let mut acc = LogSumExp::new();
    acc.add(model.h(log_r, nu));
    for n in (0..nu).rev() {
        let h = model.h(log_r, n);
        acc.add(h);
        // left of nu the terms fall at least geometrically (concavity)
        if h < floor && n > 0 {
            let slope = h - model.h(log_r, n - 1);
            if slope > 0.0 {
                acc.add(h + ln_geometric_tail(-slope).min((n as f64).ln()));
            } else {
                acc.add(h + (n as f64).ln());
            }
            break;
        }
    }
    let mut n = nu + 1;
    loop {
        if n > model.support_hint() {
            if model.last_nonzero().is_some() {
                break;
            }
            return Err(exhausted(model, "maximum modulus"));
        }
        let h = model.h(log_r, n);
        if h == f64::NEG_INFINITY {
            break;
        }
        acc.add(h);
        let slope = model.h(log_r, n + 1) - h;
        if h < floor && slope < 0.0 {
            let tail = h + ln_geometric_tail(slope);
            if tail < floor {
                acc.add(tail);
                break;
            }
        }
        n += 1;
    }
    Ok(acc.value())
}

/// Empirical Wiman–Valiron constants at one radius; nothing here is asserted.
#[derive(Clone, Debug, PartialEq)]
pub struct NormalityReport {
    pub log_mu: f64,
    pub nu: usize,
    /// Largest `c` with `h(nu + k) <= log mu - c k^2 b(|k| + nu)` on the scanned
    /// window, `b(m) = 1 / (m log^2 m)`; `None` when no admissible `k` exists.
    pub c_emp: Option<f64>,
    pub c_emp_at_k: Option<i64>,
    /// `nu / (log mu * (log log mu)^2)`, defined for `log mu > 1`.
    pub nu_ratio: Option<f64>,
    pub log_max_modulus: f64,
    /// `log M / log mu`, defined for `log mu > 0`.
    pub log_m_ratio: Option<f64>,
    pub window: (usize, usize),
}

pub fn normality_diagnostics(model: &CoefficientModel, r: Radius) -> Result<NormalityReport> {
    let log_r = r.log();
    let (nu, log_mu) = max_term(model, r)?;
    let right_end = nu.saturating_mul(10).max(10_000).min(model.support_hint());
    let mut best: Option<(f64, i64)> = None;
    for n in 0..=right_end {
        if n == nu {
            continue;
        }
        let h = model.h(log_r, n);
        if h == f64::NEG_INFINITY {
            break;
        }
        let k = n as i64 - nu as i64;
        let m = (k.unsigned_abs() as usize + nu) as f64;
        if m < 2.0 {
            continue;
        }
        let b_inv = m * m.ln().powi(2);
        let c = (log_mu - h) * b_inv / (k * k) as f64;
        if best.map_or(true, |(c0, _)| c < c0) {
            best = Some((c, k));
        }
    }
    let log_m = log_max_modulus(model, r)?;
    let nu_ratio = (log_mu > 1.0).then(|| nu as f64 / (log_mu * log_mu.ln().powi(2)));
    let log_m_ratio = (log_mu > 0.0).then(|| log_m / log_mu);
    Ok(NormalityReport {
        log_mu,
        nu,
        c_emp: best.map(|b| b.0),
        c_emp_at_k: best.map(|b| b.1),
        nu_ratio,
        log_max_modulus: log_m,
        log_m_ratio,
        window: (0, right_end),
    })
}

/// Slack in each inequality relating the growth functionals (non-negative
/// when the inequality holds).
#[derive(Clone, Debug, PartialEq)]
pub struct InequalityMargins {
    /// `S - (N_1 - 1) log mu`.
    pub s_lower: f64,
    /// `2 N_1 log mu - S`.
    pub s_upper: f64,
    /// `min_x (x N_1 - N_x)` over `x` in {1, 1.5, 2, 3, 5}.
    pub n_x: f64,
    /// `min_m (m N_1 - N_{m,m+1})` over the enumerated bands.
    pub bands: f64,
    /// `N_1 - nu`.
    pub n1_nu: f64,
    /// `nu - (log mu - log mu(1)) / log r`; `None` at `r = 1`.
    pub nu_lower: Option<f64>,
}

pub const N_X_GRID: [f64; 5] = [1.0, 1.5, 2.0, 3.0, 5.0];

impl InequalityMargins {
    pub fn compute(model: &CoefficientModel, profile: &GrowthProfile) -> Result<Self> {
        let n1 = profile.n1 as f64;
        let mut n_x_margin = f64::INFINITY;
        for x in N_X_GRID {
            let count = level_count(model, profile.r.log(), profile.nu, (1.0 - x) * profile.log_mu)?;
            n_x_margin = n_x_margin.min(x * n1 - count as f64);
        }
        let bands = profile.bands.iter().map(|b| b.m as f64 * n1 - b.count as f64).fold(f64::INFINITY, f64::min);
        let nu_lower = if profile.r.log() > 0.0 {
            let (_, log_mu_1) = max_term_log(model, 0.0)?;
            Some(profile.nu as f64 - (profile.log_mu - log_mu_1) / profile.r.log())
        } else {
            None
        };
        Ok(Self {
            s_lower: profile.s - (n1 - 1.0) * profile.log_mu,
            s_upper: 2.0 * n1 * profile.log_mu - profile.s,
            n_x: n_x_margin,
            bands,
            n1_nu: n1 - profile.nu as f64,
            nu_lower,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn e2() -> Radius {
        Radius::from_log(2.0)
    }

    #[test]
    fn max_term_examples() {
        let gd = CoefficientModel::gaussian_decay(1.0).unwrap();
        assert_eq!(max_term(&gd, e2()).unwrap(), (1, 1.0));
        let (nu, log_mu) = max_term(&CoefficientModel::gef(), Radius::new(2.0).unwrap()).unwrap();
        assert_eq!(nu, 4);
        assert!((log_mu - 1.1835).abs() < 1e-4);
        assert_eq!(max_term(&gd, Radius::new(1.0).unwrap()).unwrap(), (0, 0.0));
        // a_0 = a_1 ties at r = 1 and the larger index wins
        let ml = CoefficientModel::mittag_leffler(1.0).unwrap();
        assert_eq!(max_term(&ml, Radius::new(1.0).unwrap()).unwrap().0, 1);
    }

    #[test]
    fn n1_examples() {
        let gd = CoefficientModel::gaussian_decay(1.0).unwrap();
        assert_eq!(n1_count(&gd, e2()).unwrap().0, 3);
        assert_eq!(n1_count(&CoefficientModel::gef(), Radius::new(2.0).unwrap()).unwrap().0, 9);
        let ml = CoefficientModel::mittag_leffler(1.0).unwrap();
        let (n1, n1p) = n1_count(&ml, Radius::from_log(1.0)).unwrap();
        assert_eq!(n1, 6);
        assert!(n1p < 6.0 && n1p >= 5.0);
    }

    #[test]
    fn s_examples() {
        let gd = CoefficientModel::gaussian_decay(1.0).unwrap();
        assert_eq!(s_value(&gd, e2()).unwrap(), 2.0);
        let ml = CoefficientModel::mittag_leffler(1.0).unwrap();
        assert!((s_value(&ml, Radius::from_log(1.0)).unwrap() - 9.0991).abs() < 1e-3);
        assert_eq!(s_value(&ml, Radius::new(1.0).unwrap()).unwrap(), 0.0);
    }

    #[test]
    fn n_x_and_bands() {
        let gd = CoefficientModel::gaussian_decay(1.0).unwrap();
        assert_eq!(n_x(&gd, e2(), 2.0).unwrap(), 3);
        assert_eq!(band_count(&gd, e2(), 3).unwrap(), 1);
        assert_eq!(n_x(&gd, e2(), 1.0).unwrap(), n1_count(&gd, e2()).unwrap().0);
        let bands = bands(&gd, e2()).unwrap();
        for b in &bands {
            assert_eq!(b.count, band_count(&gd, e2(), b.m).unwrap());
        }
        assert!(matches!(band_count(&gd, Radius::from_log(1.0), 1), Err(Error::DegenerateProfile)));
        assert!(n_x(&gd, e2(), -1.0).is_err());
    }

    #[test]
    fn integral_relation_examples() {
        let gd = CoefficientModel::gaussian_decay(1.0).unwrap();
        assert!(verify_integral_relation(&gd, e2()).unwrap().abs() < 1e-15);
        assert_eq!(verify_integral_relation(&CoefficientModel::gef(), Radius::new(1.0).unwrap()).unwrap(), 0.0);
        assert!(verify_integral_relation(&gd, Radius::new(0.5).unwrap()).is_err());
    }

    #[test]
    fn log_max_modulus_examples() {
        let t = CoefficientModel::table(vec![0.0, -700.0, -1400.0]).unwrap();
        assert!(log_max_modulus(&t, Radius::new(1.0).unwrap()).unwrap().abs() < 1e-15);
        let gd = CoefficientModel::gaussian_decay(1.0).unwrap();
        let direct = (0..60).map(|n| (2.0 * n as f64 - (n * n) as f64).exp()).sum::<f64>().ln();
        assert!((log_max_modulus(&gd, e2()).unwrap() - direct).abs() < 1e-14);
    }

    #[test]
    fn normality_examples() {
        // r = 2 is a genuine tie h(3) = h(4), which pins the constant to zero
        let rep = normality_diagnostics(&CoefficientModel::gef(), Radius::new(2.0).unwrap()).unwrap();
        assert!(rep.c_emp.unwrap().abs() < 1e-12);
        assert_eq!(rep.c_emp_at_k, Some(-1));
        let rep = normality_diagnostics(&CoefficientModel::gef(), Radius::new(2.2).unwrap()).unwrap();
        assert!(rep.c_emp.unwrap() > 0.0);
        let gd = CoefficientModel::gaussian_decay(1.0).unwrap();
        let rep = normality_diagnostics(&gd, e2()).unwrap();
        assert!(rep.log_m_ratio.unwrap() >= 1.0);
        assert!(rep.nu_ratio.is_none());
    }

    #[test]
    fn support_exhaustion_is_reported() {
        let t = CoefficientModel::table(vec![0.0, 1.0, 1.5]).unwrap();
        assert_eq!(max_term(&t, Radius::new(1.0).unwrap()).unwrap(), (2, 1.5));
        assert_eq!(n1_count(&t, Radius::new(1.0).unwrap()).unwrap().0, 3);
    }
}
