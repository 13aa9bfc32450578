//! Large-dimension limits of the largest eigenvalue.
//!
//! With `alpha`, `beta` and the spike fixed, `(1 + lambda_max) / m^2`
//! converges to a law with CDF `exp(-1/x) det[I_{j-i}(2/sqrt(x))]`; when the
//! spike grows like `theta m` and `m/p -> c`, the limit becomes
//! `exp(-(1+theta)/(c x))`.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Pow, Zero};

use crate::detmat::{det_integer, det_scaled, DenseRealMatrix};
use crate::error::{Error, Result};
use crate::finite_cdf::{cdf_lambda_max, ProblemDims, SpikeParam};
use crate::specfun::{bessel_i, LogScaled};

/// Largest `alpha` accepted by [`limit_cdf_fixed_alpha`].
pub const MAX_ALPHA: usize = 16;

/// Below this `x` the fixed-alpha limit is zero in double precision:
/// `exp(-1/x)` is at most `e^{-10^4}` while the determinant is bounded by
/// `e^{alpha 2/sqrt(x)} <= e^{3200}`.
const NEGLIGIBLE_X: f64 = 1e-4;

/// Below this ratio of `|det|` to the product of column norms the Bessel
/// determinant is recomputed in fixed-point integer arithmetic.
const CANCELLATION_LIMIT: f64 = 1e-4;

/// Working precisions (fractional bits) tried by the fixed-point path.
const PRECISIONS: [u64; 7] = [128, 256, 512, 1024, 2048, 4096, 8192];

/// Limit ratios `m/p -> c` and `eta/m -> theta`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AsymptoticRegime {
    c: f64,
    theta: f64,
}

impl AsymptoticRegime {
    /// Requires `0 < c <= 1` and `theta >= 0`.
    pub fn new(c: f64, theta: f64) -> Result<Self> {
        if !(c > 0.0 && c <= 1.0) {
            return Err(Error::InvalidParameter(format!(
                "c must lie in (0, 1], got {c}"
            )));
        }
        if !(theta >= 0.0) || !theta.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "theta must be finite and nonnegative, got {theta}"
            )));
        }
        Ok(AsymptoticRegime { c, theta })
    }

    pub fn c(&self) -> f64 {
        self.c
    }

    pub fn theta(&self) -> f64 {
        self.theta
    }
}

/// `exp(-1/x) det[I_{j-i}(2/sqrt(x))]_{i,j=1..alpha}`; the empty determinant
/// is one.
pub fn limit_cdf_fixed_alpha(alpha: usize, x: f64) -> Result<f64> {
    if alpha > MAX_ALPHA {
        return Err(Error::OutOfEnvelope {
            what: "alpha",
            value: alpha,
            cap: MAX_ALPHA,
        });
    }
    if x.is_nan() {
        return Err(Error::Domain("x is NaN".into()));
    }
    if x < NEGLIGIBLE_X {
        return Ok(0.0);
    }
    if x == f64::INFINITY {
        return Ok(1.0);
    }
    let lead = LogScaled::from_log(-1.0 / x);
    if alpha == 0 {
        return Ok(lead.to_f64());
    }
    let z = 2.0 / x.sqrt();
    // Toeplitz: entry (i, j) depends on j - i only
    let diag: Vec<f64> = (0..alpha).map(|k| bessel_i(k as i32, z)).collect();
    let mut data = Vec::with_capacity(alpha * alpha);
    for i in 0..alpha {
        for j in 0..alpha {
            data.push(diag[i.abs_diff(j)]);
        }
    }
    let log_norms: f64 = (0..alpha)
        .map(|j| {
            0.5 * (0..alpha)
                .map(|i| diag[i.abs_diff(j)].powi(2))
                .sum::<f64>()
                .ln()
        })
        .sum();
    let mut det = det_scaled(&DenseRealMatrix::new(alpha, alpha, data)?)?;
    if det.is_zero() || det.log_magnitude() - log_norms < CANCELLATION_LIMIT.ln() {
        det = bessel_det_fixed_point(alpha, x)?;
    }
    Ok((lead * det).to_f64().clamp(0.0, 1.0))
}

/// `det[I_{j-i}(2/sqrt(x))]` through the series
/// `I_v(z) = (z/2)^v h_v(q)`, `h_v(q) = sum_{k >= max(0,-v)} q^k / (k! (k+v)!)`
/// with `q = 1/x`. The powers of `z/2` cancel from the determinant, leaving
/// `det[h_{j-i}(q)]` with every series term positive. Entries are summed in
/// fixed point with `prec` fractional bits and the determinant is taken
/// exactly; the precision doubles until two results agree.
fn bessel_det_fixed_point(alpha: usize, x: f64) -> Result<LogScaled> {
    let q = BigRational::one() / BigRational::from_float(x).expect("finite x");
    let q_f64 = 1.0 / x;
    let mut last: Option<LogScaled> = None;
    for &prec in &PRECISIONS {
        let h: Vec<BigInt> = (0..2 * alpha - 1)
            .map(|k| fixed_point_series(k as i64 - (alpha as i64 - 1), &q, q_f64, prec))
            .collect();
        let rows = (0..alpha)
            .map(|i| (0..alpha).map(|j| h[j + alpha - 1 - i].clone()).collect())
            .collect();
        let det = scaled_by_power_of_two(&det_integer(rows)?, -((prec * alpha as u64) as i64));
        if let Some(prev) = last {
            if prev.sign() == det.sign()
                && (prev.log_magnitude() - det.log_magnitude()).abs() < 1e-14
            {
                return Ok(det);
            }
        }
        last = Some(det);
    }
    log::warn!("Bessel determinant did not settle at alpha = {alpha}, x = {x}");
    Ok(last.expect("at least one precision"))
}

/// `v 2^exp` with the exponent applied exactly before rounding to a log.
fn scaled_by_power_of_two(v: &BigInt, exp: i64) -> LogScaled {
    if v.is_zero() {
        return LogScaled::ZERO;
    }
    let shift = v.bits().saturating_sub(64);
    let top = LogScaled::from_bigint(&(v >> shift));
    top * LogScaled::from_log((shift as i64 + exp) as f64 * std::f64::consts::LN_2)
}

/// `floor(2^prec h_v(q))` summed term by term with truncating division.
fn fixed_point_series(v: i64, q: &BigRational, q_f64: f64, prec: u64) -> BigInt {
    let (qn, qd) = (q.numer(), q.denom());
    let start = (-v).max(0) as u64;
    let factorial = |n: u64| (2..=n).fold(BigInt::one(), |acc, k| acc * k);
    let first_num: BigInt = Pow::pow(qn, start as u32) << prec;
    let first_den =
        Pow::pow(qd, start as u32) * factorial(start) * factorial((start as i64 + v) as u64);
    let mut term = first_num / first_den;
    let mut sum = term.clone();
    let mut k = start;
    loop {
        let next_k = k + 1;
        let growth = (next_k as f64) * ((next_k as i64 + v) as f64);
        term = term * qn / (qd * BigInt::from(next_k) * BigInt::from(next_k as i64 + v));
        sum += &term;
        k = next_k;
        if term.is_zero() && growth > q_f64 {
            break;
        }
    }
    sum
}

/// `exp(-(1 + theta) / (c x))`.
pub fn limit_cdf_scaled_snr(regime: &AsymptoticRegime, x: f64) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    (-(1.0 + regime.theta) / (regime.c * x)).exp()
}

/// Finite-dimensional `Pr((1 + lambda_max) / m^2 <= x)`, the quantity the
/// limits above describe.
pub fn finite_scaled_cdf(dims: &ProblemDims, spike: &SpikeParam, x: f64) -> Result<f64> {
    let m = dims.m() as f64;
    cdf_lambda_max(dims, spike, m * m * x - 1.0)
}
