//! Log-domain numerics shared by every module: log-gamma, compensated
//! summation, streaming log-sum-exp and a few stable special forms.

use std::f64::consts::PI;

const HALF_LN_2PI: f64 = 0.918_938_533_204_672_7;

/// Largest integer `m` for which `(m - 1)!` is exactly representable.
const EXACT_FACTORIAL_LIMIT: u64 = 19;

/// Natural log of the gamma function for `x > 0`.
///
/// Integer arguments up to 19 go through the exact factorial so that
/// `ln_gamma(1) == ln_gamma(2) == 0` bit-for-bit. Everything else uses the
/// Stirling series at `x >= 15` with upward recurrence below that; the
/// relative error is below 1e-14 away from the roots at 1 and 2.
pub fn ln_gamma(x: f64) -> f64 {
    debug_assert!(x > 0.0, "ln_gamma defined for positive arguments only");
    if x.fract() == 0.0 && x <= EXACT_FACTORIAL_LIMIT as f64 {
        let mut f = 1.0f64;
        let mut k = 2.0;
        while k < x {
            f *= k;
            k += 1.0;
        }
        return f.ln();
    }
    if x < 15.0 {
        let mut shift = 1.0f64;
        let mut y = x;
        while y < 15.0 {
            shift *= y;
            y += 1.0;
        }
        return stirling(y) - shift.ln();
    }
    stirling(x)
}

fn stirling(x: f64) -> f64 {
    let inv = 1.0 / x;
    let inv2 = inv * inv;
    // Bernoulli terms B_{2k} / (2k (2k - 1) x^{2k-1}), Horner in 1/x^2.
    let series = inv
        * (1.0 / 12.0
            + inv2
                * (-1.0 / 360.0
                    + inv2
                        * (1.0 / 1260.0
                            + inv2
                                * (-1.0 / 1680.0
                                    + inv2
                                        * (1.0 / 1188.0
                                            + inv2 * (-691.0 / 360_360.0 + inv2 * (1.0 / 156.0)))))));
    (x - 0.5) * x.ln() - x + HALF_LN_2PI + series
}

/// `ln(n!)`.
pub fn ln_factorial(n: u64) -> f64 {
    ln_gamma(n as f64 + 1.0)
}

/// `ln(1 - exp(-x))` for `x >= 0`, accurate at both ends.
pub fn ln_one_minus_exp_neg(x: f64) -> f64 {
    if x <= 0.0 {
        f64::NEG_INFINITY
    } else if x < std::f64::consts::LN_2 {
        (-(-x).exp_m1()).ln()
    } else {
        (-(-x).exp()).ln_1p()
    }
}

/// `ln(exp(a) - exp(b))` for `a >= b`.
pub fn ln_diff_exp(a: f64, b: f64) -> f64 {
    if b == f64::NEG_INFINITY {
        a
    } else {
        a + ln_one_minus_exp_neg(a - b)
    }
}

/// `ln(exp(a) + exp(b))`.
pub fn ln_add_exp(a: f64, b: f64) -> f64 {
    let (hi, lo) = if a >= b { (a, b) } else { (b, a) };
    if lo == f64::NEG_INFINITY {
        hi
    } else {
        hi + (lo - hi).exp().ln_1p()
    }
}

/// Neumaier-compensated running sum.
#[derive(Clone, Copy, Debug, Default)]
pub struct CompensatedSum {
    sum: f64,
    compensation: f64,
}

impl CompensatedSum {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.compensation += (self.sum - t) + x;
        } else {
            self.compensation += (x - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn value(&self) -> f64 {
        self.sum + self.compensation
    }
}

impl FromIterator<f64> for CompensatedSum {
    fn from_iter<I: IntoIterator<Item = f64>>(iter: I) -> Self {
        let mut acc = Self::new();
        for x in iter {
            acc.add(x);
        }
        acc
    }
}

/// Compensated sum of an iterator of floats.
pub fn compensated_sum<I: IntoIterator<Item = f64>>(values: I) -> f64 {
    values.into_iter().collect::<CompensatedSum>().value()
}

/// Streaming `ln(sum(exp(x_i)))` with a running maximum shift.
#[derive(Clone, Copy, Debug)]
pub struct LogSumExp {
    max: f64,
    scaled: f64,
}

impl Default for LogSumExp {
    fn default() -> Self {
        Self { max: f64::NEG_INFINITY, scaled: 0.0 }
    }
}

impl LogSumExp {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, x: f64) {
        if x == f64::NEG_INFINITY {
            return;
        }
        if x <= self.max {
            self.scaled += (x - self.max).exp();
        } else {
            self.scaled = self.scaled * (self.max - x).exp() + 1.0;
            self.max = x;
        }
    }

    pub fn value(&self) -> f64 {
        if self.max == f64::NEG_INFINITY {
            f64::NEG_INFINITY
        } else {
            self.max + self.scaled.ln()
        }
    }
}

pub fn log_sum_exp<I: IntoIterator<Item = f64>>(values: I) -> f64 {
    let mut acc = LogSumExp::new();
    for x in values {
        acc.add(x);
    }
    acc.value()
}

/// Log of the geometric tail `sum_{j>=1} exp(j * slope)` for `slope < 0`.
pub fn ln_geometric_tail(slope: f64) -> f64 {
    debug_assert!(slope < 0.0);
    if slope == f64::NEG_INFINITY {
        f64::NEG_INFINITY
    } else {
        slope - ln_one_minus_exp_neg(-slope)
    }
}

/// `ln I_0(x)` for `x >= 0` (modified Bessel function of the first kind):
/// power series below 20, the large-argument expansion of `e^{-x} I_0(x)` above.
pub fn ln_bessel_i0(x: f64) -> f64 {
    let x = x.abs();
    if x < 20.0 {
        let q = 0.25 * x * x;
        let mut term = 1.0;
        let mut sum = 1.0;
        let mut k = 1.0;
        while term > 1e-17 * sum {
            term *= q / (k * k);
            sum += term;
            k += 1.0;
        }
        sum.ln()
    } else {
        // sum_k ((2k-1)!!)^2 / (k! (8x)^k); terms shrink until k ~ 2x
        let mut term = 1.0;
        let mut sum = 1.0;
        let mut k = 1.0;
        while term > 1e-17 * sum {
            let odd = 2.0 * k - 1.0;
            term *= odd * odd / (k * 8.0 * x);
            sum += term;
            k += 1.0;
        }
        x - 0.5 * (2.0 * PI * x).ln() + sum.ln()
    }
}

/// Principal argument of `b / a`, in `(-pi, pi]`.
pub fn phase_increment(a: num_complex::Complex64, b: num_complex::Complex64) -> f64 {
    let q = b * a.conj();
    let d = q.im.atan2(q.re);
    if d <= -PI {
        d + 2.0 * PI
    } else {
        d
    }
}
