//! Scalar special functions.
//!
//! Everything here is real-valued and double precision. Quantities that can
//! overflow (factorial ratios, high-degree Jacobi polynomials at arguments
//! above one, long hypergeometric sums) have a `*_scaled` variant returning a
//! [`LogScaled`] value so callers can combine them before going back to `f64`.

use std::ops::{Div, Mul, MulAssign, Neg};

use num_bigint::{BigInt, Sign};
use num_traits::{Signed, ToPrimitive};

use crate::error::{Error, Result};

/// Magnitudes above this trigger a rescale inside the running recurrences.
const RESCALE_ABOVE: f64 = 1e150;

/// A real number stored as a sign and a natural-log magnitude.
///
/// A zero sign means the value is exactly zero; the magnitude is then
/// meaningless and kept at `-inf`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LogScaled {
    log_magnitude: f64,
    sign: i8,
}

impl LogScaled {
    pub const ZERO: LogScaled = LogScaled {
        log_magnitude: f64::NEG_INFINITY,
        sign: 0,
    };
    pub const ONE: LogScaled = LogScaled {
        log_magnitude: 0.0,
        sign: 1,
    };

    /// Builds a value from its parts. A sign of zero yields [`LogScaled::ZERO`].
    pub fn new(log_magnitude: f64, sign: i8) -> Self {
        match sign.signum() {
            0 => Self::ZERO,
            s => LogScaled {
                log_magnitude,
                sign: s,
            },
        }
    }

    /// Positive value `exp(log_magnitude)`.
    pub fn from_log(log_magnitude: f64) -> Self {
        Self::new(log_magnitude, 1)
    }

    pub fn from_f64(x: f64) -> Self {
        if x == 0.0 {
            Self::ZERO
        } else {
            LogScaled {
                log_magnitude: x.abs().ln(),
                sign: if x > 0.0 { 1 } else { -1 },
            }
        }
    }

    pub fn sign(&self) -> i8 {
        self.sign
    }

    pub fn log_magnitude(&self) -> f64 {
        self.log_magnitude
    }

    pub fn is_zero(&self) -> bool {
        self.sign == 0
    }

    /// Converts back to `f64`; may overflow to infinity or underflow to zero.
    pub fn to_f64(&self) -> f64 {
        if self.sign == 0 {
            0.0
        } else {
            f64::from(self.sign) * self.log_magnitude.exp()
        }
    }

    /// Exact integer converted to log form; only the mantissa rounds.
    pub fn from_bigint(v: &BigInt) -> Self {
        match v.sign() {
            Sign::NoSign => Self::ZERO,
            Sign::Plus => Self::new(log_abs_bigint(v), 1),
            Sign::Minus => Self::new(log_abs_bigint(v), -1),
        }
    }

    /// Integer power. `ZERO.powi(0)` is one.
    pub fn powi(&self, k: i32) -> Self {
        if k == 0 {
            return Self::ONE;
        }
        if self.sign == 0 {
            return Self::ZERO;
        }
        let sign = if self.sign < 0 && k % 2 != 0 { -1 } else { 1 };
        LogScaled {
            log_magnitude: self.log_magnitude * f64::from(k),
            sign,
        }
    }
}

impl Mul for LogScaled {
    type Output = LogScaled;
    fn mul(self, rhs: LogScaled) -> LogScaled {
        if self.sign == 0 || rhs.sign == 0 {
            return LogScaled::ZERO;
        }
        LogScaled {
            log_magnitude: self.log_magnitude + rhs.log_magnitude,
            sign: self.sign * rhs.sign,
        }
    }
}

impl MulAssign for LogScaled {
    fn mul_assign(&mut self, rhs: LogScaled) {
        *self = *self * rhs;
    }
}

impl Div for LogScaled {
    type Output = LogScaled;
    /// Division by zero produces an infinite magnitude with the numerator's sign.
    fn div(self, rhs: LogScaled) -> LogScaled {
        if self.sign == 0 {
            return LogScaled::ZERO;
        }
        if rhs.sign == 0 {
            return LogScaled {
                log_magnitude: f64::INFINITY,
                sign: self.sign,
            };
        }
        LogScaled {
            log_magnitude: self.log_magnitude - rhs.log_magnitude,
            sign: self.sign * rhs.sign,
        }
    }
}

impl Neg for LogScaled {
    type Output = LogScaled;
    fn neg(self) -> LogScaled {
        LogScaled {
            log_magnitude: self.log_magnitude,
            sign: -self.sign,
        }
    }
}

/// `ln |v|` for a nonzero big integer, without overflowing `f64`.
pub fn log_abs_bigint(v: &BigInt) -> f64 {
    let bits = v.bits();
    if bits <= 1000 {
        return v.abs().to_f64().expect("fits in f64").ln();
    }
    let shift = bits - 64;
    let top = (v.abs() >> shift).to_f64().expect("fits in f64");
    top.ln() + shift as f64 * std::f64::consts::LN_2
}

/// Natural log of the gamma function for positive arguments.
pub fn log_gamma(x: f64) -> Result<f64> {
    if !(x > 0.0) || !x.is_finite() {
        return Err(Error::Domain(format!("log_gamma requires x > 0, got {x}")));
    }
    Ok(libm::lgamma(x))
}

/// `ln(n!)`.
pub fn ln_factorial(n: u64) -> f64 {
    libm::lgamma(n as f64 + 1.0)
}

/// Rising factorial `(a)_k = a (a+1) ... (a+k-1)`, with `(a)_0 = 1`.
///
/// For a negative integer `a = -n` the product contains the factor zero
/// whenever `k > n`, so the result is exactly zero there.
pub fn pochhammer(a: f64, k: u32) -> f64 {
    let mut acc = 1.0;
    for j in 0..k {
        acc *= a + f64::from(j);
    }
    acc
}

/// Rising factorial in log-scaled form; safe for large `k`.
pub fn pochhammer_scaled(a: f64, k: u32) -> LogScaled {
    let mut acc = LogScaled::ONE;
    let mut chunk = 1.0f64;
    for j in 0..k {
        chunk *= a + f64::from(j);
        if chunk == 0.0 {
            return LogScaled::ZERO;
        }
        if chunk.abs() > RESCALE_ABOVE {
            acc *= LogScaled::from_f64(chunk);
            chunk = 1.0;
        }
    }
    acc * LogScaled::from_f64(chunk)
}

/// Generalized binomial coefficient `C(n, k) = n (n-1) ... (n-k+1) / k!`.
pub fn binomial(n: f64, k: u32) -> f64 {
    let mut acc = 1.0;
    for i in 0..k {
        acc *= (n - f64::from(i)) / f64::from(i + 1);
    }
    acc
}

/// Jacobi polynomial `P_deg^{(a,b)}(x)` by the three-term recurrence in degree.
///
/// Intended for `a, b > -1`. For `x > 1` every term of the recurrence is
/// positive, so there is no cancellation.
pub fn jacobi_p(deg: u32, a: f64, b: f64, x: f64) -> f64 {
    let (value, log_scale) = jacobi_recurrence(deg, a, b, x);
    if log_scale == 0.0 {
        value
    } else {
        value * log_scale.exp()
    }
}

/// [`jacobi_p`] with the running value rescaled to avoid overflow at large
/// degree or large argument.
pub fn jacobi_p_scaled(deg: u32, a: f64, b: f64, x: f64) -> LogScaled {
    let (value, log_scale) = jacobi_recurrence(deg, a, b, x);
    LogScaled::from_f64(value) * LogScaled::from_log(log_scale)
}

/// Returns `(v, s)` with `P = v * exp(s)`.
fn jacobi_recurrence(deg: u32, a: f64, b: f64, x: f64) -> (f64, f64) {
    if deg == 0 {
        return (1.0, 0.0);
    }
    let mut prev = 1.0;
    let mut cur = (a + 1.0) + 0.5 * (a + b + 2.0) * (x - 1.0);
    let mut log_scale = 0.0;
    let ab = a + b;
    for n in 2..=deg {
        let n = f64::from(n);
        let s = 2.0 * n + ab;
        let an = 2.0 * n * (n + ab) * (s - 2.0);
        let bn = (s - 1.0) * (s * (s - 2.0) * x + a * a - b * b);
        let cn = 2.0 * (n + a - 1.0) * (n + b - 1.0) * s;
        let next = (bn * cur - cn * prev) / an;
        prev = cur;
        cur = next;
        if cur.abs() > RESCALE_ABOVE {
            let m = cur.abs();
            cur /= m;
            prev /= m;
            log_scale += m.ln();
        }
    }
    (cur, log_scale)
}

/// Terminating Gauss hypergeometric series
/// `2F1(a, -N; c; z) = sum_{k=0}^{N} (a)_k (-N)_k / ((c)_k k!) z^k`
/// where `neg_int = -N <= 0`.
pub fn gauss_2f1_terminating(a: f64, neg_int: i64, c: f64, z: f64) -> Result<f64> {
    gauss_2f1_terminating_scaled(a, neg_int, c, z).map(|v| v.to_f64())
}

/// Log-scaled form of [`gauss_2f1_terminating`]. The partial sum and the
/// running term share one scale factor that is moved into the log magnitude
/// whenever the term grows large.
pub fn gauss_2f1_terminating_scaled(a: f64, neg_int: i64, c: f64, z: f64) -> Result<LogScaled> {
    if neg_int > 0 {
        return Err(Error::Domain(format!(
            "second numerator parameter must be a nonpositive integer, got {neg_int}"
        )));
    }
    let big_n = (-neg_int) as u64;
    let mut term = 1.0f64;
    let mut sum = 1.0f64;
    let mut log_scale = 0.0f64;
    for k in 0..big_n {
        let kf = k as f64;
        let denom = (c + kf) * (kf + 1.0);
        if c + kf == 0.0 {
            return Err(Error::Domain(format!(
                "denominator parameter c = {c} hits a pole at k = {k}"
            )));
        }
        term *= (a + kf) * (kf - big_n as f64) * z / denom;
        sum += term;
        let m = term.abs().max(sum.abs());
        if m > RESCALE_ABOVE {
            term /= m;
            sum /= m;
            log_scale += m.ln();
        }
    }
    Ok(LogScaled::from_f64(sum) * LogScaled::from_log(log_scale))
}

/// `2F1(a, b; b; z) = 1F0(a;; z) = (1 - z)^{-a}` for `z < 1`.
pub fn hyp2f1_reduced(a: f64, z: f64) -> Result<f64> {
    if !(z < 1.0) {
        return Err(Error::Domain(format!(
            "(1 - z)^(-a) requires z < 1, got {z}"
        )));
    }
    Ok((-a * (-z).ln_1p()).exp())
}

/// Modified Bessel function of the first kind `I_order(z)` for integer order,
/// summed from the ascending power series. `I_{-k} = I_k`.
pub fn bessel_i(order: i32, z: f64) -> f64 {
    let nu = order.unsigned_abs();
    if z == 0.0 {
        return if nu == 0 { 1.0 } else { 0.0 };
    }
    if z < 0.0 {
        let v = bessel_i(order, -z);
        return if nu % 2 == 1 { -v } else { v };
    }
    let half = 0.5 * z;
    let nuf = f64::from(nu);
    let mut term = (nuf * half.ln() - ln_factorial(u64::from(nu))).exp();
    let mut sum = term;
    let q = half * half;
    let mut k = 0.0;
    loop {
        k += 1.0;
        term *= q / (k * (k + nuf));
        sum += term;
        if term <= 1e-17 * sum && k > half {
            break;
        }
    }
    sum
}
