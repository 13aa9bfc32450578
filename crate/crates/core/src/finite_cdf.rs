//! Exact distribution of the largest eigenvalue of `W1 W2^{-1}` where
//! `W1 ~ CW_m(p, I + eta e1 e1^H)` and `W2 ~ CW_m(n, I)`.
//!
//! The CDF is a prefactor times an `(alpha+1) x (alpha+1)` determinant whose
//! first column holds the spike-dependent entries [`phi_entry`] and whose
//! remaining columns hold Jacobi polynomial entries [`psi_entry`]. Entries are
//! carried as [`LogScaled`] values; each column is brought to unit scale before
//! the LU step and the scales are added back in log space.

mod exact;

use num_rational::BigRational;

use crate::detmat::{det_scaled, DenseRealMatrix};
use crate::error::{Error, Result};
use crate::specfun::{jacobi_p_scaled, ln_factorial, pochhammer_scaled, LogScaled};

/// Cap on each of `m`, `n`, `p`.
pub const MAX_DIM: usize = 64;
/// Cap on `alpha = n - m`, the size of the determinant minus one.
pub const MAX_ALPHA: usize = 16;

/// Slack allowed when a computed probability leaves `[0, 1]`.
const PROB_SLACK: f64 = 1e-9;

/// When the floating-point determinant is smaller than this fraction of the
/// product of its column norms, it is recomputed in exact arithmetic.
const CANCELLATION_LIMIT: f64 = 1e-4;

/// Detector dimensions: `m` sensors, `n` noise-only samples, `p`
/// signal-plus-noise samples.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct ProblemDims {
    m: usize,
    n: usize,
    p: usize,
}

impl ProblemDims {
    /// Requires `1 <= m <= n, p <= 64`.
    pub fn new(m: usize, n: usize, p: usize) -> Result<Self> {
        if m == 0 {
            return Err(Error::InvalidParameter("m must be at least 1".into()));
        }
        if n < m || p < m {
            return Err(Error::InvalidParameter(format!(
                "need n >= m and p >= m, got m = {m}, n = {n}, p = {p}"
            )));
        }
        for (what, v) in [("m", m), ("n", n), ("p", p)] {
            if v > MAX_DIM {
                return Err(Error::OutOfEnvelope {
                    what,
                    value: v,
                    cap: MAX_DIM,
                });
            }
        }
        Ok(ProblemDims { m, n, p })
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn p(&self) -> usize {
        self.p
    }

    /// `n - m`
    pub fn alpha(&self) -> usize {
        self.n - self.m
    }

    /// `p - m`
    pub fn beta(&self) -> usize {
        self.p - self.m
    }

    /// `p / n`, the factor between the test statistic and the F-matrix eigenvalue.
    pub fn kappa(&self) -> f64 {
        self.p as f64 / self.n as f64
    }

    /// `m / p`
    pub fn nu(&self) -> f64 {
        self.m as f64 / self.p as f64
    }

    fn check_alpha(&self) -> Result<()> {
        if self.alpha() > MAX_ALPHA {
            return Err(Error::OutOfEnvelope {
                what: "alpha = n - m",
                value: self.alpha(),
                cap: MAX_ALPHA,
            });
        }
        Ok(())
    }
}

/// Rank-one spike strength. Equals the SNR under the alternative and zero
/// under the null.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpikeParam {
    eta: f64,
}

impl SpikeParam {
    pub const NULL: SpikeParam = SpikeParam { eta: 0.0 };

    pub fn new(eta: f64) -> Result<Self> {
        if !(eta >= 0.0) || !eta.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "spike strength must be finite and nonnegative, got {eta}"
            )));
        }
        Ok(SpikeParam { eta })
    }

    pub fn eta(&self) -> f64 {
        self.eta
    }
}

fn check_index(name: &'static str, value: usize, lo: usize, hi: usize) -> Result<()> {
    if value < lo || value > hi {
        return Err(Error::IndexOutOfRange {
            name,
            value,
            lo,
            hi,
        });
    }
    Ok(())
}

/// `ln prod_{j=0}^{alpha-1} (p+m+j-1)! / (p+m+2j)!`
pub(crate) fn log_det_constant(dims: &ProblemDims) -> f64 {
    let (m, p) = (dims.m as u64, dims.p as u64);
    (0..dims.alpha() as u64)
        .map(|j| ln_factorial(p + m + j - 1) - ln_factorial(p + m + 2 * j))
        .sum()
}

/// Jacobi column entry as a function of the polynomial argument `arg`
/// (which is `2/t + 1`, or equivalently `2/x - 1` with `x = t/(1+t)`).
/// Negative degrees correspond to derivatives beyond the polynomial degree
/// and vanish.
pub(crate) fn psi_at_arg(dims: &ProblemDims, i: usize, j: usize, arg: f64) -> LogScaled {
    let (m, beta) = (dims.m, dims.beta());
    if m + i < j {
        return LogScaled::ZERO;
    }
    let deg = (m + i - j) as u32;
    let order = (j - 2) as f64;
    let prefactor = pochhammer_scaled((m + i + beta - 1) as f64, (j - 2) as u32);
    prefactor * jacobi_p_scaled(deg, order, beta as f64 + order, arg)
}

/// `Psi_{i,j}(t) = (m+i+beta-1)_{j-2} P_{m+i-j}^{(j-2, beta+j-2)}(2/t + 1)` in
/// log-scaled form, for `1 <= i <= alpha+1` and `2 <= j <= alpha+1`.
pub fn psi_entry_scaled(dims: &ProblemDims, i: usize, j: usize, t: f64) -> Result<LogScaled> {
    check_index("i", i, 1, dims.alpha() + 1)?;
    check_index("j", j, 2, dims.alpha() + 1)?;
    if !(t > 0.0) {
        return Err(Error::Domain(format!("t must be positive, got {t}")));
    }
    Ok(psi_at_arg(dims, i, j, 2.0 / t + 1.0))
}

/// [`psi_entry_scaled`] converted to `f64`.
pub fn psi_entry(dims: &ProblemDims, i: usize, j: usize, t: f64) -> Result<f64> {
    psi_entry_scaled(dims, i, j, t).map(|v| v.to_f64())
}

/// Logs of the pieces entering the spike column.
#[derive(Debug, Clone, Copy)]
enum SpikeTerms {
    /// `ln(eta t)`, `ln((1+eta)(1+t))`, `ln(1+eta+t)`
    Lambda {
        log_eta_t: f64,
        log_outer: f64,
        log_inner: f64,
    },
    /// `ln z`, `ln(1-z)` with `z = eta x / (1+eta)`
    Unit { log_z: f64, log_1mz: f64 },
}

/// Spike column entry `i` as a sum of positive terms in log space.
///
/// `Phi_i = Q_i sum_{k=0}^{alpha-i+1} c_k w^{k+i-1} / v^{p+k+i-1} * u^p` with
/// `Q_i = (n+p+i-2)! (p+i-2)! / (p+m+2i-3)!` and
/// `c_k = (p+i-1)_k (alpha-i+1)! / (k! (p+m+2i-2)_k (alpha-i+1-k)!)`.
fn phi_from_terms(dims: &ProblemDims, i: usize, terms: SpikeTerms) -> LogScaled {
    let (m, n, p, alpha) = (
        dims.m as u64,
        dims.n as u64,
        dims.p as u64,
        dims.alpha() as u64,
    );
    let i = i as u64;
    let log_q =
        ln_factorial(n + p + i - 2) + ln_factorial(p + i - 2) - ln_factorial(p + m + 2 * i - 3);
    let top = alpha + 1 - i;
    let mut logs = Vec::with_capacity(top as usize + 1);
    let mut log_coeff = 0.0;
    for k in 0..=top {
        if k > 0 {
            let kf = (k - 1) as f64;
            log_coeff += ((p + i - 1) as f64 + kf).ln() - ((p + m + 2 * i - 2) as f64 + kf).ln()
                + ((top - k + 1) as f64).ln()
                - (k as f64).ln();
        }
        let e = (k + i - 1) as f64;
        let pw = |e: f64, l: f64| if e == 0.0 { 0.0 } else { e * l };
        let body = match terms {
            SpikeTerms::Lambda {
                log_eta_t,
                log_outer,
                log_inner,
            } => pw(e, log_eta_t) + p as f64 * log_outer - (p as f64 + e) * log_inner,
            SpikeTerms::Unit { log_z, log_1mz } => pw(e, log_z) - (p as f64 + e) * log_1mz,
        };
        logs.push(log_coeff + body);
    }
    let top_log = logs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if top_log == f64::NEG_INFINITY {
        return LogScaled::ZERO;
    }
    let s: f64 = logs.iter().map(|l| (l - top_log).exp()).sum();
    LogScaled::from_log(log_q + top_log + s.ln())
}

fn lambda_terms(eta: f64, t: f64) -> SpikeTerms {
    SpikeTerms::Lambda {
        log_eta_t: (eta * t).ln(),
        log_outer: eta.ln_1p() + t.ln_1p(),
        log_inner: (1.0 + eta + t).ln(),
    }
}

/// Spike column entry `Phi_i(t, eta)`, equal to
/// `Q_i z^{i-1} 2F1(p+i-1, n+p+i-1; p+m+2i-2; z)` with
/// `z = eta t / ((1+eta)(1+t))`, evaluated through its terminating
/// transformed series (all terms positive).
pub fn phi_entry(dims: &ProblemDims, spike: &SpikeParam, i: usize, t: f64) -> Result<LogScaled> {
    check_index("i", i, 1, dims.alpha() + 1)?;
    if !(t > 0.0) || !t.is_finite() {
        return Err(Error::Domain(format!(
            "t must be positive and finite, got {t}"
        )));
    }
    Ok(phi_from_terms(dims, i, lambda_terms(spike.eta, t)))
}

/// Determinant of a matrix of log-scaled entries after bringing every column
/// to unit maximum magnitude. Also returns `ln(|det| / prod ||col||)` of the
/// balanced matrix, which is near zero for a well-conditioned determinant.
pub(crate) fn det_log_columns(cols: &[Vec<LogScaled>]) -> Result<(LogScaled, f64)> {
    let dim = cols.len();
    let mut data = vec![0.0; dim * dim];
    let mut scale = LogScaled::ONE;
    let mut log_norms = 0.0;
    for (j, col) in cols.iter().enumerate() {
        let top = col
            .iter()
            .filter(|v| !v.is_zero())
            .map(|v| v.log_magnitude())
            .fold(f64::NEG_INFINITY, f64::max);
        if top == f64::NEG_INFINITY {
            return Ok((LogScaled::ZERO, 0.0));
        }
        let mut norm_sqr = 0.0;
        for (i, v) in col.iter().enumerate() {
            let e = (*v / LogScaled::from_log(top)).to_f64();
            data[i * dim + j] = e;
            norm_sqr += e * e;
        }
        log_norms += 0.5 * norm_sqr.ln();
        scale *= LogScaled::from_log(top);
    }
    let det = det_scaled(&DenseRealMatrix::new(dim, dim, data)?)?;
    let ratio = if det.is_zero() {
        f64::NEG_INFINITY
    } else {
        det.log_magnitude() - log_norms
    };
    Ok((det * scale, ratio))
}

fn to_probability(v: LogScaled) -> Result<f64> {
    let value = v.to_f64();
    if !value.is_finite() || value < -PROB_SLACK || value > 1.0 + PROB_SLACK {
        return Err(Error::Conditioning { value });
    }
    Ok(value.clamp(0.0, 1.0))
}

/// `ln(t / (1 + t))` without cancellation at large `t`.
pub(crate) fn log_unit(t: f64) -> f64 {
    -(1.0 / t).ln_1p()
}

/// Where the spike column is evaluated, kept in the original `f64` inputs so
/// the exact fallback can rebuild it.
#[derive(Debug, Clone, Copy)]
enum Point {
    /// threshold `t` on the F-matrix scale
    Lambda { eta: f64, t: f64 },
    /// `x = t/(1+t)` on the unit interval
    Unit { eta: f64, x: f64 },
}

impl Point {
    fn spike_terms(self) -> SpikeTerms {
        match self {
            Point::Lambda { eta, t } => lambda_terms(eta, t),
            Point::Unit { eta, x } => {
                let z = eta * x / (1.0 + eta);
                SpikeTerms::Unit {
                    log_z: z.ln(),
                    log_1mz: (-z).ln_1p(),
                }
            }
        }
    }

    fn log_x(self) -> f64 {
        match self {
            Point::Lambda { t, .. } => log_unit(t),
            Point::Unit { x, .. } => x.ln(),
        }
    }

    fn jacobi_arg(self) -> f64 {
        match self {
            Point::Lambda { t, .. } => 2.0 / t + 1.0,
            Point::Unit { x, .. } => 2.0 / x - 1.0,
        }
    }

    fn eta(self) -> f64 {
        match self {
            Point::Lambda { eta, .. } | Point::Unit { eta, .. } => eta,
        }
    }

    /// `(y - 1) / 2` for the Jacobi argument `y`, exactly.
    fn exact_jacobi_arg(self) -> exact::JacobiArg {
        let one = exact::rat(1.0);
        let r = match self {
            Point::Lambda { t, .. } => one / exact::rat(t),
            Point::Unit { x, .. } => {
                let x = exact::rat(x);
                (&one - &x) / x
            }
        };
        exact::JacobiArg::new(&r)
    }

    /// `(w, v)` of the spike column as exact rationals, and the log of the
    /// row-independent factor `((1+eta)(1+t))^p` that the threshold form
    /// carries in addition.
    fn exact_spike_terms(self, dims: &ProblemDims) -> (BigRational, BigRational, f64) {
        let one = exact::rat(1.0);
        match self {
            Point::Lambda { eta, t } => {
                let (e, t_) = (exact::rat(eta), exact::rat(t));
                let log_outer = eta.ln_1p() + t.ln_1p();
                (&e * &t_, one + e + t_, dims.p as f64 * log_outer)
            }
            Point::Unit { eta, x } => {
                let e = exact::rat(eta);
                let z = &e * exact::rat(x) / (&one + &e);
                (z.clone(), one - z, 0.0)
            }
        }
    }
}

/// Spiked-CDF determinant times its prefactor at the given point.
fn assemble(dims: &ProblemDims, point: Point) -> Result<f64> {
    dims.check_alpha()?;
    let a1 = dims.alpha() + 1;
    let terms = point.spike_terms();
    let arg = point.jacobi_arg();
    let mut cols = Vec::with_capacity(a1);
    cols.push(
        (1..=a1)
            .map(|i| phi_from_terms(dims, i, terms))
            .collect::<Vec<_>>(),
    );
    for j in 2..=a1 {
        cols.push((1..=a1).map(|i| psi_at_arg(dims, i, j, arg)).collect());
    }
    let (mut det, ratio) = det_log_columns(&cols)?;
    if ratio < CANCELLATION_LIMIT.ln() {
        let (w, v, log_common) = point.exact_spike_terms(dims);
        let arg = point.exact_jacobi_arg();
        det = exact::spiked_det(dims.m as u64, dims.n as u64, dims.p as u64, &w, &v, &arg)?
            * LogScaled::from_log(log_common);
    }
    let (m, n, p) = (dims.m as f64, dims.n as f64, dims.p as f64);
    let log_pref =
        log_det_constant(dims) - ln_factorial(dims.p as u64 - 1) - p * point.eta().ln_1p()
            + m * (n + p - m) * point.log_x();
    to_probability(det * LogScaled::from_log(log_pref))
}

fn check_t(t: f64) -> Result<Option<f64>> {
    if t.is_nan() {
        return Err(Error::Domain("t is NaN".into()));
    }
    if t <= 0.0 {
        return Ok(Some(0.0));
    }
    if t == f64::INFINITY {
        return Ok(Some(1.0));
    }
    Ok(None)
}

/// `Pr(lambda_max <= t)` by the full determinant formula, without the
/// special-case shortcuts taken by [`cdf_lambda_max`]. Valid for every
/// `eta >= 0` and every `alpha <= MAX_ALPHA`.
pub fn cdf_lambda_max_general(dims: &ProblemDims, spike: &SpikeParam, t: f64) -> Result<f64> {
    if let Some(v) = check_t(t)? {
        return Ok(v);
    }
    assemble(dims, Point::Lambda { eta: spike.eta, t })
}

/// The same determinant formula written in the unit-interval variable
/// `x = t/(1+t)`: returns `Pr(lambda_max / (1 + lambda_max) <= x)`, the CDF of
/// the largest eigenvalue of `W1 (W1 + W2)^{-1}`.
pub fn cdf_lambda_max_x_domain(dims: &ProblemDims, spike: &SpikeParam, x: f64) -> Result<f64> {
    if x.is_nan() {
        return Err(Error::Domain("x is NaN".into()));
    }
    if x <= 0.0 {
        return Ok(0.0);
    }
    if x >= 1.0 {
        return Ok(1.0);
    }
    assemble(dims, Point::Unit { eta: spike.eta, x })
}

/// Null-hypothesis CDF (`eta = 0`) as an `alpha x alpha` Jacobi determinant.
pub fn cdf_null(dims: &ProblemDims, t: f64) -> Result<f64> {
    if let Some(v) = check_t(t)? {
        return Ok(v);
    }
    dims.check_alpha()?;
    let (m, n, p) = (dims.m as f64, dims.n as f64, dims.p as f64);
    let log_x = log_unit(t);
    let alpha = dims.alpha();
    if alpha == 0 {
        return to_probability(LogScaled::from_log(m * p * log_x));
    }
    let arg = 2.0 / t + 1.0;
    let cols: Vec<Vec<LogScaled>> = (1..=alpha)
        .map(|j| {
            (1..=alpha)
                .map(|i| psi_at_arg(dims, i + 1, j + 1, arg))
                .collect()
        })
        .collect();
    let (mut det, ratio) = det_log_columns(&cols)?;
    if ratio < CANCELLATION_LIMIT.ln() {
        let arg = exact::JacobiArg::new(&(exact::rat(1.0) / exact::rat(t)));
        det = exact::null_det(dims.m as u64, dims.beta() as u64, alpha as u64, &arg)?;
    }
    let log_pref = log_det_constant(dims) + ln_factorial((dims.n + dims.p - 1) as u64)
        - ln_factorial((dims.m + dims.p - 1) as u64)
        + m * (n + p - m) * log_x;
    to_probability(det * LogScaled::from_log(log_pref))
}

/// Closed form for `n = m`:
/// `(t/(1+t))^{m p} / (1 + eta/(1+t))^p`.
pub fn cdf_alpha0(dims: &ProblemDims, spike: &SpikeParam, t: f64) -> Result<f64> {
    if dims.alpha() != 0 {
        return Err(Error::InvalidParameter(format!(
            "closed form needs n = m, got m = {}, n = {}",
            dims.m, dims.n
        )));
    }
    if let Some(v) = check_t(t)? {
        return Ok(v);
    }
    let (m, p) = (dims.m as f64, dims.p as f64);
    let log_v = m * p * log_unit(t) - p * (spike.eta / (1.0 + t)).ln_1p();
    Ok(log_v.exp())
}

/// `Pr(lambda_max <= t)` for `lambda_max` the largest eigenvalue of
/// `W1 W2^{-1}`. Uses the closed form when `n = m` and the null determinant
/// when `eta = 0`.
pub fn cdf_lambda_max(dims: &ProblemDims, spike: &SpikeParam, t: f64) -> Result<f64> {
    if dims.alpha() == 0 {
        cdf_alpha0(dims, spike, t)
    } else if spike.eta == 0.0 {
        cdf_null(dims, t)
    } else {
        cdf_lambda_max_general(dims, spike, t)
    }
}

/// CDF of the test statistic `(n/p) lambda_max` at `x`, i.e.
/// `cdf_lambda_max(kappa x)`.
pub fn cdf_test_statistic(dims: &ProblemDims, spike: &SpikeParam, x: f64) -> Result<f64> {
    cdf_lambda_max(dims, spike, dims.kappa() * x)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::specfun::{binomial, jacobi_p};
    use proptest::prelude::*;

    fn dims(m: usize, n: usize, p: usize) -> ProblemDims {
        ProblemDims::new(m, n, p).unwrap()
    }

    fn spike(eta: f64) -> SpikeParam {
        SpikeParam::new(eta).unwrap()
    }

    fn rel(a: f64, b: f64) -> f64 {
        (a - b).abs() / b.abs().max(f64::MIN_POSITIVE)
    }

    #[test]
    fn dims_validation() {
        assert!(ProblemDims::new(0, 1, 1).is_err());
        assert!(ProblemDims::new(3, 2, 5).is_err());
        assert!(ProblemDims::new(3, 5, 2).is_err());
        assert!(matches!(
            ProblemDims::new(3, 65, 5),
            Err(Error::OutOfEnvelope { .. })
        ));
        let d = dims(2, 4, 8);
        assert_eq!((d.alpha(), d.beta()), (2, 6));
        assert_eq!(d.kappa(), 2.0);
        assert_eq!(d.nu(), 0.25);
        assert!(SpikeParam::new(-1.0).is_err());
        assert!(SpikeParam::new(f64::NAN).is_err());
    }

    #[test]
    fn psi_examples() {
        let d = dims(2, 3, 3);
        // j = 2: unit prefactor
        let t = 0.7;
        let v = psi_entry(&d, 1, 2, t).unwrap();
        assert!(rel(v, jacobi_p(1, 0.0, 1.0, 2.0 / t + 1.0)) < 1e-15);
        // P_1^{(0,1)}(3) from the explicit sum: C(1,1) + C(3,1) * 1 = 4
        assert!(rel(psi_entry(&d, 1, 2, 1.0).unwrap(), 4.0) < 1e-15);
        assert!(matches!(
            psi_entry(&d, 3, 2, 1.0),
            Err(Error::IndexOutOfRange { .. })
        ));
        assert!(matches!(
            psi_entry(&d, 1, 1, 1.0),
            Err(Error::IndexOutOfRange { .. })
        ));
        // degree zero leaves only the Pochhammer prefactor: m=1, i=1, j=2
        let d = dims(1, 3, 2);
        assert_eq!(psi_entry(&d, 1, 2, 0.3).unwrap(), 1.0);
        // beyond the degree the entry vanishes: m=1, i=1, j=3
        assert_eq!(psi_entry(&d, 1, 3, 0.3).unwrap(), 0.0);
        // Pochhammer prefactor (m+i+beta-1)_{j-2}: m=1, i=2, j=3, beta=1 -> (3)_1
        assert!(rel(psi_entry(&d, 2, 3, 0.3).unwrap(), 3.0) < 1e-15);
    }

    /// Direct sum of the non-terminating hypergeometric series.
    fn hyp2f1_series(a: f64, b: f64, c: f64, z: f64) -> f64 {
        let mut term = 1.0f64;
        let mut sum = 1.0f64;
        let mut k = 0.0;
        while term.abs() > 1e-18 * sum.abs() || k < 10.0 {
            term *= (a + k) * (b + k) / ((c + k) * (k + 1.0)) * z;
            sum += term;
            k += 1.0;
            assert!(k < 1e6);
        }
        sum
    }

    #[test]
    fn phi_matches_hypergeometric_form() {
        for &(m, n, p, eta, t) in &[
            (2usize, 3usize, 4usize, 1.0f64, 2.0f64),
            (2, 4, 4, 1.0, 0.5),
            (3, 6, 5, 3.0, 1.2),
            (1, 3, 2, 0.3, 4.0),
        ] {
            let d = dims(m, n, p);
            for i in 1..=d.alpha() + 1 {
                let z: f64 = eta * t / ((1.0 + eta) * (1.0 + t));
                let i64_ = i as u64;
                let log_q = ln_factorial(n as u64 + p as u64 + i64_ - 2)
                    + ln_factorial(p as u64 + i64_ - 2)
                    - ln_factorial((p + m) as u64 + 2 * i64_ - 3);
                let expect = log_q.exp()
                    * z.powi(i as i32 - 1)
                    * hyp2f1_series(
                        (p + i - 1) as f64,
                        (n + p + i - 1) as f64,
                        (p + m + 2 * i - 2) as f64,
                        z,
                    );
                let got = phi_entry(&d, &spike(eta), i, t).unwrap().to_f64();
                assert!(
                    rel(got, expect) < 1e-11,
                    "{m} {n} {p} i={i}: {got} vs {expect}"
                );
            }
        }
    }

    #[test]
    fn phi_examples() {
        // alpha = 0, i = 1: (p-1)! ((1+eta)(1+t)/(1+eta+t))^p
        let (p, eta, t) = (5usize, 2.0, 4.0);
        let d = dims(3, 3, p);
        let got = phi_entry(&d, &spike(eta), 1, t).unwrap();
        let expect = 24.0 * ((1.0 + eta) * (1.0 + t) / (1.0 + eta + t)).powi(p as i32);
        assert!(rel(got.to_f64(), expect) < 1e-13);
        // eta -> 0: higher entries vanish like eta^{i-1}
        let d = dims(2, 4, 4);
        let small = phi_entry(&d, &spike(1e-12), 3, 1.0).unwrap().to_f64();
        let one = phi_entry(&d, &spike(1e-12), 1, 1.0).unwrap().to_f64();
        assert!(small / one < 1e-20);
        assert!(phi_entry(&d, &spike(0.0), 2, 1.0).unwrap().is_zero());
    }

    #[test]
    fn cdf_examples() {
        // scalar case
        for &(p, eta, t) in &[(1usize, 0.5f64, 0.3f64), (4, 2.0, 3.0), (9, 0.0, 7.5)] {
            let d = dims(1, 1, p);
            let expect = (t / (1.0 + eta + t)).powi(p as i32);
            assert!(rel(cdf_lambda_max(&d, &spike(eta), t).unwrap(), expect) < 1e-12);
            assert!(rel(cdf_lambda_max_general(&d, &spike(eta), t).unwrap(), expect) < 1e-12);
        }
        // alpha = 0 worked example
        let d = dims(3, 3, 5);
        let expect = 0.8f64.powi(15) / (1.0 + 2.0 / 5.0f64).powi(5);
        assert!(rel(cdf_lambda_max(&d, &spike(2.0), 4.0).unwrap(), expect) < 1e-13);
        // limits
        let d = dims(2, 4, 4);
        assert_eq!(cdf_lambda_max(&d, &spike(1.0), 0.0).unwrap(), 0.0);
        assert_eq!(cdf_lambda_max(&d, &spike(1.0), -3.0).unwrap(), 0.0);
        assert_eq!(cdf_lambda_max(&d, &spike(1.0), f64::INFINITY).unwrap(), 1.0);
        assert!(cdf_lambda_max(&d, &spike(1.0), f64::NAN).is_err());
    }

    #[test]
    fn null_examples() {
        let t = 0.9;
        let d = dims(3, 3, 4);
        assert!(rel(cdf_null(&d, t).unwrap(), (t / (1.0 + t)).powi(12)) < 1e-13);
        assert!(rel(cdf_null(&dims(1, 1, 2), 1.0).unwrap(), 0.25) < 1e-15);
        // m = 1 with alpha > 0: lambda is a ratio of independent gammas,
        // Gamma(p) / Gamma(n), so the CDF is the regularized incomplete beta
        // I_x(p, n) = sum_{k=p}^{n+p-1} C(n+p-1, k) x^k (1-x)^{n+p-1-k}.
        for &(n, p) in &[(2usize, 1usize), (3, 2), (5, 4), (9, 3)] {
            let d = dims(1, n, p);
            for &t in &[0.2f64, 1.0, 3.0] {
                let x = t / (1.0 + t);
                let nn = (n + p - 1) as u32;
                let expect: f64 = (p as u32..=nn)
                    .map(|k| {
                        binomial(nn as f64, k) * x.powi(k as i32) * (1.0 - x).powi((nn - k) as i32)
                    })
                    .sum();
                assert!(
                    rel(cdf_null(&d, t).unwrap(), expect) < 1e-12,
                    "n {n} p {p} t {t}"
                );
            }
        }
    }

    #[test]
    fn spiked_scalar_with_alpha() {
        // m = 1: lambda = (1+eta) G_p / G_n, so the spiked CDF is the null
        // CDF at t / (1 + eta).
        for &(n, p, eta) in &[(3usize, 2usize, 1.5), (6, 4, 0.2), (4, 7, 9.0)] {
            let d = dims(1, n, p);
            for &t in &[0.4, 2.0, 11.0] {
                let expect = cdf_null(&d, t / (1.0 + eta)).unwrap();
                let got = cdf_lambda_max(&d, &spike(eta), t).unwrap();
                assert!(
                    (got - expect).abs() < 1e-12,
                    "n {n} p {p} eta {eta} t {t}: {got} vs {expect}"
                );
            }
        }
    }

    #[test]
    fn heavy_cancellation_stays_accurate() {
        // alpha = 16 with m = 1: the floating-point determinant loses every
        // digit in the upper tail, so this exercises the exact path
        let d = dims(1, 17, 4);
        let eta = 7.233;
        for k in 0..12 {
            let t = 10f64.powi(k - 3);
            let got = cdf_lambda_max(&d, &spike(eta), t).unwrap();
            let expect = cdf_null(&d, t / (1.0 + eta)).unwrap();
            assert!((got - expect).abs() < 1e-11, "t {t}: {got} vs {expect}");
        }
    }

    #[test]
    fn general_path_matches_special_cases() {
        for &(m, p) in &[(2usize, 2usize), (3, 5), (6, 9), (10, 15)] {
            let d = dims(m, m, p);
            for k in 0..50 {
                let t = 0.05 * 1.2f64.powi(k);
                for &eta in &[0.3, 3.0] {
                    let a = cdf_lambda_max_general(&d, &spike(eta), t).unwrap();
                    let b = cdf_alpha0(&d, &spike(eta), t).unwrap();
                    assert!(a == b || rel(a, b) < 1e-10, "m {m} p {p} t {t}: {a} vs {b}");
                }
            }
        }
        for &(m, n, p) in &[(2usize, 4usize, 4usize), (3, 5, 5), (5, 8, 10)] {
            let d = dims(m, n, p);
            for k in 0..30 {
                let t = 0.1 * 1.3f64.powi(k);
                let a = cdf_lambda_max_general(&d, &spike(1e-8), t).unwrap();
                let b = cdf_null(&d, t).unwrap();
                assert!((a - b).abs() < 1e-6, "t {t}: {a} vs {b}");
                let c = cdf_lambda_max_general(&d, &spike(0.0), t).unwrap();
                assert!((c - b).abs() < 1e-10, "t {t}: {c} vs {b}");
            }
        }
    }

    #[test]
    fn x_domain_agrees() {
        for &(m, n, p, eta) in &[
            (2usize, 4usize, 4usize, 1.0),
            (5, 8, 10, 3.1623),
            (3, 7, 4, 0.5),
            (4, 4, 8, 2.0),
        ] {
            let d = dims(m, n, p);
            for k in 0..25 {
                let t = 0.05 * 1.35f64.powi(k);
                let a = cdf_lambda_max_general(&d, &spike(eta), t).unwrap();
                let b = cdf_lambda_max_x_domain(&d, &spike(eta), t / (1.0 + t)).unwrap();
                assert!((a - b).abs() < 1e-12, "{m} {n} {p} t {t}: {a} vs {b}");
            }
        }
    }

    #[test]
    fn test_statistic_rescale() {
        let d = dims(2, 4, 8);
        let s = spike(1.3);
        for &x in &[0.1, 0.7, 2.5] {
            assert_eq!(
                cdf_test_statistic(&d, &s, x).unwrap(),
                cdf_lambda_max(&d, &s, 2.0 * x).unwrap()
            );
        }
        let d = dims(3, 5, 5);
        assert_eq!(
            cdf_test_statistic(&d, &s, 0.4).unwrap(),
            cdf_lambda_max(&d, &s, 0.4).unwrap()
        );
    }

    #[test]
    fn spike_ordering_alpha0() {
        let d = dims(3, 3, 6);
        for &t in &[0.1, 1.0, 10.0] {
            let f0 = cdf_lambda_max(&d, &SpikeParam::NULL, t).unwrap();
            let f1 = cdf_lambda_max(&d, &spike(0.5), t).unwrap();
            let f2 = cdf_lambda_max(&d, &spike(2.0), t).unwrap();
            assert!(f2 < f1 && f1 < f0);
        }
    }

    #[test]
    fn envelope_is_enforced() {
        let d = dims(1, 20, 3);
        assert!(matches!(
            cdf_null(&d, 1.0),
            Err(Error::OutOfEnvelope { .. })
        ));
        assert!(matches!(
            cdf_lambda_max(&d, &spike(1.0), 1.0),
            Err(Error::OutOfEnvelope { .. })
        ));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(48))]

        #[test]
        fn cdf_monotone_with_limits(m in 1usize..=10, da in 0usize..=6, db in 0usize..=6, eta in 0.0f64..10.0) {
            let n = (m + da).min(10);
            let p = (m + db).min(10);
            let d = dims(m, n, p);
            let s = spike(eta);
            let mut prev = 0.0;
            for k in 0..40 {
                let t = 1e-3 * 1.5f64.powi(k);
                let f = cdf_lambda_max(&d, &s, t).unwrap();
                prop_assert!(f >= prev - PROB_SLACK, "t {} f {} prev {}", t, f, prev);
                prev = f;
            }
            prop_assert!(cdf_lambda_max(&d, &s, 1e-6).unwrap() < 1e-3);
            prop_assert!(cdf_lambda_max(&d, &s, 1e6).unwrap() >= 1.0 - 1e-3);
        }
    }
}
