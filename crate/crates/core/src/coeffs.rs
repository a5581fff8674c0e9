//! Coefficient profiles `n -> log a_n`, kept entirely in the log domain.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numeric::{ln_factorial, ln_gamma};

/// Builtin profiles search no further than this index.
const BUILTIN_SUPPORT: usize = 1 << 32;

/// `1 - e^n` overflows to `-inf` past this index.
const EXP_EXP_SUPPORT: usize = 709;

/// Absolute slack (scaled by `max(1, |log a_n|)`) allowed on second differences.
pub const CONCAVITY_TOLERANCE: f64 = 1e-12;

/// A radius `r > 0`, carried together with its natural log so that radii
/// such as `e^2` have an exact `log r`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Radius {
    value: f64,
    log: f64,
}

impl Radius {
    pub fn new(r: f64) -> Result<Self> {
        if !(r.is_finite() && r > 0.0) {
            return Err(Error::InvalidParameter(format!("radius must be positive and finite, got {r}")));
        }
        Ok(Self { value: r, log: r.ln() })
    }

    pub fn from_log(log_r: f64) -> Self {
        Self { value: log_r.exp(), log: log_r }
    }

    pub fn value(&self) -> f64 {
        self.value
    }

    pub fn log(&self) -> f64 {
        self.log
    }

    /// The radius `kappa * r`.
    pub fn scaled(&self, kappa: f64) -> Self {
        Self { value: self.value * kappa, log: self.log + kappa.ln() }
    }
}

impl fmt::Display for Radius {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.value)
    }
}

impl FromStr for Radius {
    type Err = Error;

    /// Accepts plain numbers, `e`, `e^k` and `exp(k)`; the exponential forms
    /// keep `log r = k` exact.
    fn from_str(s: &str) -> Result<Self> {
        let t = s.trim();
        let bad = || Error::InvalidParameter(format!("cannot parse radius '{s}'"));
        if t == "e" {
            return Ok(Self::from_log(1.0));
        }
        let exponent = t
            .strip_prefix("e^")
            .or_else(|| t.strip_prefix("exp(").and_then(|rest| rest.strip_suffix(')')));
        if let Some(k) = exponent {
            let k: f64 = k.trim().parse().map_err(|_| bad())?;
            if !k.is_finite() {
                return Err(bad());
            }
            return Ok(Self::from_log(k));
        }
        Self::new(t.parse().map_err(|_| bad())?)
    }
}

/// Coefficient family descriptor.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum Family {
    /// `a_n = 1 / sqrt(n!)`.
    Gef,
    /// `a_n = 1 / Gamma(alpha n + 1)`.
    MittagLeffler { alpha: f64 },
    /// `a_n = exp(-c n^2)`.
    GaussianDecay { c: f64 },
    /// `a_n = exp(1 - e^n)`, the double-exponential profile normalized to `a_0 = 1`.
    ExpExp,
    /// Explicit finite table; `a_n = 0` past the last entry.
    Table { log_values: Vec<f64> },
}

/// `(n, log a_n + n log r)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LogTerm {
    pub n: usize,
    pub value: f64,
}

/// Outcome of a log-concavity scan.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ConcavityReport {
    pub n_max: usize,
    /// Index of the entry that completes the first violating triple
    /// `(n - 2, n - 1, n)`, with the offending second difference.
    pub violation: Option<(usize, f64)>,
}

impl ConcavityReport {
    pub fn passed(&self) -> bool {
        self.violation.is_none()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct CoefficientModel {
    family: Family,
    support_hint: usize,
}

impl CoefficientModel {
    /// Builds and validates a model from a family descriptor.
    pub fn new(family: Family) -> Result<Self> {
        let support_hint = match &family {
            Family::Gef | Family::ExpExp => {
                if matches!(family, Family::ExpExp) {
                    EXP_EXP_SUPPORT
                } else {
                    BUILTIN_SUPPORT
                }
            }
            Family::MittagLeffler { alpha } => {
                if !(alpha.is_finite() && *alpha > 0.0) {
                    return Err(Error::InvalidParameter(format!("mittag_leffler needs alpha > 0, got {alpha}")));
                }
                BUILTIN_SUPPORT
            }
            Family::GaussianDecay { c } => {
                if !(c.is_finite() && *c > 0.0) {
                    return Err(Error::InvalidParameter(format!("gaussian_decay needs c > 0, got {c}")));
                }
                BUILTIN_SUPPORT
            }
            Family::Table { log_values } => {
                validate_table(log_values)?;
                log_values.len() - 1
            }
        };
        Ok(Self { family, support_hint })
    }

    pub fn gef() -> Self {
        Self { family: Family::Gef, support_hint: BUILTIN_SUPPORT }
    }

    pub fn mittag_leffler(alpha: f64) -> Result<Self> {
        Self::new(Family::MittagLeffler { alpha })
    }

    pub fn gaussian_decay(c: f64) -> Result<Self> {
        Self::new(Family::GaussianDecay { c })
    }

    pub fn exp_exp() -> Self {
        Self { family: Family::ExpExp, support_hint: EXP_EXP_SUPPORT }
    }

    pub fn table(log_values: Vec<f64>) -> Result<Self> {
        Self::new(Family::Table { log_values })
    }

    /// Parses the two-column `n log_a_n` text format. Blank lines and lines
    /// starting with `#` are skipped; `n` must run 0, 1, 2, ... without gaps.
    pub fn parse_table(text: &str) -> Result<Self> {
        let mut values = Vec::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let parse_err = |message: String| Error::Parse { line: i + 1, message };
            let mut cols = line.split_whitespace();
            let (Some(n), Some(v), None) = (cols.next(), cols.next(), cols.next()) else {
                return Err(parse_err("expected two columns 'n log_a_n'".into()));
            };
            let n: usize = n.parse().map_err(|_| parse_err(format!("bad index '{n}'")))?;
            let v: f64 = v.parse().map_err(|_| parse_err(format!("bad value '{v}'")))?;
            if n != values.len() {
                return Err(parse_err(format!("expected index {}, found {n}", values.len())));
            }
            values.push(v);
        }
        Self::table(values)
    }

    pub fn load_table(path: impl AsRef<Path>) -> Result<Self> {
        Self::parse_table(&std::fs::read_to_string(path)?)
    }

    pub fn family(&self) -> &Family {
        &self.family
    }

    /// Largest index any search may visit. Past it the model either vanishes
    /// (tables, `exp_exp`) or the search is abandoned.
    pub fn support_hint(&self) -> usize {
        self.support_hint
    }

    /// Index past which every coefficient is exactly zero, if any.
    pub fn last_nonzero(&self) -> Option<usize> {
        match &self.family {
            Family::Table { log_values } => Some(log_values.len() - 1),
            _ => None,
        }
    }

    /// `log a_n` in natural-log units; `-inf` where `a_n = 0`.
    pub fn log_coeff(&self, n: usize) -> f64 {
        match &self.family {
            Family::Gef => -0.5 * ln_factorial(n as u64),
            Family::MittagLeffler { alpha } => -ln_gamma(alpha * n as f64 + 1.0),
            Family::GaussianDecay { c } => {
                let x = n as f64;
                -c * x * x
            }
            Family::ExpExp => 1.0 - (n as f64).exp(),
            Family::Table { log_values } => log_values.get(n).copied().unwrap_or(f64::NEG_INFINITY),
        }
    }

    /// `h(n) = log a_n + n log r` with no exponentiation.
    pub fn log_term(&self, r: Radius, n: usize) -> LogTerm {
        LogTerm { n, value: self.h(r.log(), n) }
    }

    #[inline]
    pub(crate) fn h(&self, log_r: f64, n: usize) -> f64 {
        let la = self.log_coeff(n);
        if n == 0 {
            la
        } else {
            la + n as f64 * log_r
        }
    }

    pub fn check_log_concavity(&self, n_max: usize) -> Result<ConcavityReport> {
        if n_max < 2 {
            return Err(Error::InvalidParameter(format!("n_max must be at least 2, got {n_max}")));
        }
        let upper = n_max.min(self.support_hint);
        let mut prev2 = self.log_coeff(0);
        let mut prev1 = self.log_coeff(1);
        for n in 2..=upper {
            let cur = self.log_coeff(n);
            if cur == f64::NEG_INFINITY {
                break;
            }
            let d2 = cur - 2.0 * prev1 + prev2;
            if d2 > CONCAVITY_TOLERANCE * prev1.abs().max(1.0) {
                return Ok(ConcavityReport { n_max: upper, violation: Some((n, d2)) });
            }
            prev2 = prev1;
            prev1 = cur;
        }
        Ok(ConcavityReport { n_max: upper, violation: None })
    }

    /// Finite-window proxy for `log a_n / n -> -inf`: the ratio must be
    /// non-increasing over the second half of the window and strictly lower
    /// at its end than at its midpoint. Profiles with finite support pass.
    pub fn entirety_margin_ok(&self, n_max: usize) -> bool {
        if self.last_nonzero().is_some_and(|last| last < n_max) {
            return true;
        }
        let mid = (n_max / 2).max(1);
        let ratio = |n: usize| self.log_coeff(n) / n as f64;
        let mut prev = ratio(mid);
        let start = prev;
        for n in mid + 1..=n_max {
            let cur = ratio(n);
            if cur == f64::NEG_INFINITY {
                return true;
            }
            if cur > prev + 1e-12 * prev.abs().max(1.0) {
                return false;
            }
            prev = cur;
        }
        prev < start
    }

    /// Short stable label used in reports.
    pub fn label(&self) -> String {
        match &self.family {
            Family::Gef => "gef".into(),
            Family::MittagLeffler { alpha } => format!("mittag_leffler(alpha={alpha})"),
            Family::GaussianDecay { c } => format!("gaussian_decay(c={c})"),
            Family::ExpExp => "exp_exp".into(),
            Family::Table { log_values } => format!("table(len={})", log_values.len()),
        }
    }
}

fn validate_table(values: &[f64]) -> Result<()> {
    let Some(&first) = values.first() else {
        return Err(Error::InvalidParameter("coefficient table is empty".into()));
    };
    if let Some(bad) = values.iter().position(|v| !v.is_finite()) {
        return Err(Error::InvalidParameter(format!("table value at n = {bad} is not finite")));
    }
    if first != 0.0 {
        return Err(Error::BadNormalization(first));
    }
    for n in 2..values.len() {
        let d2 = values[n] - 2.0 * values[n - 1] + values[n - 2];
        if d2 > CONCAVITY_TOLERANCE * values[n - 1].abs().max(1.0) {
            return Err(Error::NotLogConcave { index: n, second_difference: d2 });
        }
    }
    Ok(())
}


#[cfg(test)]
mod proptests {
    use super::*;
    use proptest::prelude::*;

    fn builtin() -> impl Strategy<Value = CoefficientModel> {
        prop_oneof![
            Just(CoefficientModel::gef()),
            (0.2f64..3.0).prop_map(|a| CoefficientModel::mittag_leffler(a).unwrap()),
            (0.01f64..2.0).prop_map(|c| CoefficientModel::gaussian_decay(c).unwrap()),
            Just(CoefficientModel::exp_exp()),
        ]
    }

    proptest! {
        #[test]
        fn log_term_is_affine_in_log_r(m in builtin(), l1 in 0.0f64..6.0, l2 in 0.0f64..6.0, n in 0usize..400) {
            let mid = m.log_term(Radius::from_log(0.5 * (l1 + l2)), n).value;
            let avg = 0.5 * (m.log_term(Radius::from_log(l1), n).value + m.log_term(Radius::from_log(l2), n).value);
            if mid.is_finite() {
                prop_assert!((mid - avg).abs() <= 1e-12 * mid.abs().max(1.0));
            }
        }

        #[test]
        fn log_term_is_concave_in_n(m in builtin(), l in 0.0f64..6.0, n in 1usize..400) {
            let r = Radius::from_log(l);
            let (a, b, c) = (m.log_term(r, n - 1).value, m.log_term(r, n).value, m.log_term(r, n + 1).value);
            if c.is_finite() {
                prop_assert!(a - 2.0 * b + c <= 1e-12 * b.abs().max(1.0));
            }
        }
    }
}
