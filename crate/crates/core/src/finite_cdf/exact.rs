//! Exact evaluation of the determinants.
//!
//! Every finite `f64` is a dyadic rational and every entry is a rational
//! function of the spike strength and the threshold with integer parameters.
//! When the floating-point determinant loses too many digits to cancellation
//! it is recomputed here on integers: Jacobi entries are written as
//! `r^k`-sums with `r = (y - 1) / 2 = rn / rd`, scaled by `rd^deg`, and the
//! determinant runs through fraction-free (Bareiss) elimination. Only the
//! final conversion to a log-magnitude rounds.

use num_bigint::BigInt;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Pow, Zero};

use crate::detmat::det_integer;
use crate::error::Result;
use crate::specfun::{log_abs_bigint, LogScaled};

pub(super) fn rat(x: f64) -> BigRational {
    BigRational::from_float(x).expect("finite input")
}

fn factorial(n: u64) -> BigInt {
    (2..=n).fold(BigInt::one(), |acc, k| acc * k)
}

/// Rising factorial of a nonnegative integer base.
fn pochhammer(a: u64, k: u64) -> BigInt {
    (0..k).fold(BigInt::one(), |acc, j| acc * (a + j))
}

fn binomial(n: u64, k: u64) -> BigInt {
    if k > n {
        return BigInt::zero();
    }
    let k = k.min(n - k);
    (0..k).fold(BigInt::one(), |acc, i| acc * (n - i) / (i + 1))
}

/// Shared Jacobi argument `y = 1 + 2 r` with `r = rn / rd`, both positive.
pub(super) struct JacobiArg {
    rn: BigInt,
    rd: BigInt,
    log_rd: f64,
}

impl JacobiArg {
    /// From `r = (y - 1) / 2`, which must be positive.
    pub(super) fn new(r: &BigRational) -> Self {
        let rd = r.denom().clone();
        JacobiArg {
            rn: r.numer().clone(),
            log_rd: log_abs_bigint(&rd),
            rd,
        }
    }

    /// `rd^deg P_deg^{(a,b)}(y)` from
    /// `P = sum_k C(deg+a, deg-k) C(deg+a+b+k, k) r^k`.
    fn scaled_jacobi(&self, deg: u64, a: u64, b: u64) -> BigInt {
        let mut rn_pow = BigInt::one();
        let mut rd_pows = Vec::with_capacity(deg as usize + 1);
        rd_pows.push(BigInt::one());
        for k in 1..=deg as usize {
            let next = &rd_pows[k - 1] * &self.rd;
            rd_pows.push(next);
        }
        let mut sum = BigInt::zero();
        for k in 0..=deg {
            let c = binomial(deg + a, deg - k) * binomial(deg + a + b + k, k);
            sum += c * &rn_pow * &rd_pows[(deg - k) as usize];
            rn_pow *= &self.rn;
        }
        sum
    }

    /// `rd^{m+i-j} Psi_{i,j}`, zero when the degree would be negative.
    fn scaled_psi(&self, m: u64, beta: u64, i: u64, j: u64) -> BigInt {
        if m + i < j {
            return BigInt::zero();
        }
        pochhammer(m + i + beta - 1, j - 2) * self.scaled_jacobi(m + i - j, j - 2, beta + j - 2)
    }
}

/// Spike column entry `i` written as `S_i / (D_i wd^alpha vn^{p+alpha})`,
/// where `w = wn/wd` and `v = vn/vd` and the returned pair is `(S_i, D_i)`.
///
/// With `top = alpha + 1 - i`, the entry is
/// `Q_i sum_k c_k w^{k+i-1} / v^{p+k+i-1}`, `Q_i = (n+p+i-2)! (p+i-2)! /
/// (p+m+2i-3)!` (an integer for `i <= alpha + 1`), and
/// `c_k D_i = (p+i-1)_k C(top, k) (p+m+2i-2+k)_{top-k}` with
/// `D_i = (p+m+2i-2)_top`.
fn spike_entry(
    m: u64,
    n: u64,
    p: u64,
    i: u64,
    w: &BigRational,
    v: &BigRational,
) -> (BigInt, BigInt) {
    let alpha = n - m;
    let top = alpha + 1 - i;
    let q = (p + m + 2 * i - 2..=n + p + i - 2).fold(factorial(p + i - 2), |acc, k| acc * k);
    let (wn, wd, vn, vd) = (w.numer(), w.denom(), v.numer(), v.denom());
    let mut sum = BigInt::zero();
    for k in 0..=top {
        let e = k + i - 1;
        let c = pochhammer(p + i - 1, k)
            * binomial(top, k)
            * pochhammer(p + m + 2 * i - 2 + k, top - k);
        let pw = |b: &BigInt, x: u64| -> BigInt { Pow::pow(b, x as u32) };
        sum += c * pw(wn, e) * pw(wd, alpha - e) * pw(vd, p + e) * pw(vn, alpha - e);
    }
    (q * sum, pochhammer(p + m + 2 * i - 2, top))
}

/// `det[Phi | Psi]` for rows `i = 1..=alpha+1`, with the spike column built
/// from `w` and `v` as in the floating-point version.
pub(super) fn spiked_det(
    m: u64,
    n: u64,
    p: u64,
    w: &BigRational,
    v: &BigRational,
    arg: &JacobiArg,
) -> Result<LogScaled> {
    let a1 = n - m + 1;
    let entries: Vec<(BigInt, BigInt)> = (1..=a1).map(|i| spike_entry(m, n, p, i, w, v)).collect();
    let lcm = entries.iter().fold(BigInt::one(), |acc, (_, d)| acc.lcm(d));
    // rows carry rd^{-(m+i)} and column j carries rd^j, so column 1 holds
    // Phi_i rd^{m+i-1}
    let mut rd_pow: BigInt = Pow::pow(&arg.rd, m as u32);
    let rows: Vec<Vec<BigInt>> = (1..=a1)
        .zip(&entries)
        .map(|(i, (s, d))| {
            let mut row = vec![s * (&lcm / d) * &rd_pow];
            rd_pow *= &arg.rd;
            row.extend((2..=a1).map(|j| arg.scaled_psi(m, p - m, i, j)));
            row
        })
        .collect();
    let alpha = (a1 - 1) as f64;
    let log_den = log_abs_bigint(&lcm)
        + alpha * log_abs_bigint(w.denom())
        + (p as f64 + alpha) * log_abs_bigint(v.numer())
        + (m * a1) as f64 * arg.log_rd;
    Ok(LogScaled::from_bigint(&det_integer(rows)?) * LogScaled::from_log(-log_den))
}

/// `det[Psi_{i+1,j+1}]` for `i, j = 1..=alpha`.
pub(super) fn null_det(m: u64, beta: u64, alpha: u64, arg: &JacobiArg) -> Result<LogScaled> {
    let rows: Vec<Vec<BigInt>> = (1..=alpha)
        .map(|i| {
            (1..=alpha)
                .map(|j| arg.scaled_psi(m, beta, i + 1, j + 1))
                .collect()
        })
        .collect();
    Ok(LogScaled::from_bigint(&det_integer(rows)?)
        * LogScaled::from_log(-((m * alpha) as f64) * arg.log_rd))
}
