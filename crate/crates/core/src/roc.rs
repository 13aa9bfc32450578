//! Detector operating characteristics of the largest-eigenvalue test.
//!
//! Thresholds are always reported on the scale of the test statistic
//! `(n/p) lambda_max`. The false-alarm probability fixes the threshold
//! through the null CDF; the detection probability is the tail of the spiked
//! CDF at that threshold.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::finite_cdf::{
    cdf_test_statistic, det_log_columns, log_det_constant, log_unit, psi_at_arg, ProblemDims,
    SpikeParam,
};
use crate::specfun::{ln_factorial, LogScaled};

/// Probability tolerance of [`calibrate_threshold`].
const CALIBRATION_TOL: f64 = 1e-13;

/// SNR step of the finite-difference slope check.
pub const SLOPE_STEP: f64 = 1e-4;

/// Relative agreement required between the analytic low-SNR slope and its
/// finite-difference check.
const SLOPE_AGREEMENT: f64 = 1e-3;

/// One operating point: the threshold and the two probabilities it yields.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RocPoint {
    pub p_false_alarm: f64,
    pub p_detection: f64,
    pub threshold: f64,
}

/// Operating points at a fixed SNR, sorted by false-alarm probability.
#[derive(Debug, Clone, PartialEq)]
pub struct RocCurve {
    pub dims: ProblemDims,
    pub gamma: f64,
    pub points: Vec<RocPoint>,
}

fn check_probability(name: &str, p: f64) -> Result<()> {
    if !(p > 0.0 && p < 1.0) {
        return Err(Error::InvalidParameter(format!(
            "{name} must lie in (0, 1), got {p}"
        )));
    }
    Ok(())
}

fn check_gamma(gamma: f64) -> Result<()> {
    if !(gamma >= 0.0) || !gamma.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "SNR must be finite and nonnegative, got {gamma}"
        )));
    }
    Ok(())
}

/// Linear SNR from decibels.
pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

/// Decibels from linear SNR.
pub fn linear_to_db(gamma: f64) -> f64 {
    10.0 * gamma.log10()
}

/// Threshold `mu` on the test-statistic scale with
/// `Pr((n/p) lambda_max > mu | H0) = p_false_alarm`.
pub fn calibrate_threshold(dims: &ProblemDims, p_false_alarm: f64) -> Result<f64> {
    check_probability("false-alarm probability", p_false_alarm)?;
    if dims.alpha() == 0 {
        // invert (kappa mu / (1 + kappa mu))^{m p} = 1 - P_F
        let log_u = (-p_false_alarm).ln_1p() / (dims.m() * dims.p()) as f64;
        return Ok(log_u.exp() / (-log_u.exp_m1() * dims.kappa()));
    }
    let target = 1.0 - p_false_alarm;
    let f = |s: f64| -> Result<f64> {
        Ok(cdf_test_statistic(dims, &SpikeParam::NULL, s.exp())? - target)
    };

    // bracket in s = ln mu
    let limit = 690.0;
    let (mut a, mut b) = (0.0f64, 0.0f64);
    let mut fa = f(a)?;
    while fa > 0.0 {
        a -= 2.0;
        if a < -limit {
            return Err(Error::Bracketing {
                lo: a.exp(),
                hi: b.exp(),
            });
        }
        fa = f(a)?;
    }
    let mut fb = f(b)?;
    while fb < 0.0 {
        b += 2.0;
        if b > limit {
            return Err(Error::Bracketing {
                lo: a.exp(),
                hi: b.exp(),
            });
        }
        fb = f(b)?;
    }
    if fa == 0.0 {
        return Ok(a.exp());
    }

    // Illinois variant of regula falsi; falls back to bisection when the
    // secant step leaves the bracket
    for _ in 0..200 {
        if fb.abs() <= CALIBRATION_TOL || (b - a).abs() <= 1e-15 * b.abs().max(1.0) {
            break;
        }
        let mut c = b - fb * (b - a) / (fb - fa);
        if !(c > a.min(b) && c < a.max(b)) {
            c = 0.5 * (a + b);
        }
        let fc = f(c)?;
        if fc * fb < 0.0 {
            a = b;
            fa = fb;
        } else {
            fa *= 0.5;
        }
        b = c;
        fb = fc;
    }
    Ok(b.exp())
}

/// `Pr((n/p) lambda_max > threshold | H1)` at SNR `gamma`.
pub fn detection_probability(dims: &ProblemDims, gamma: f64, threshold: f64) -> Result<f64> {
    check_gamma(gamma)?;
    Ok(1.0 - cdf_test_statistic(dims, &SpikeParam::new(gamma)?, threshold)?)
}

/// `Pr((n/p) lambda_max > threshold | H0)`.
pub fn false_alarm_probability(dims: &ProblemDims, threshold: f64) -> Result<f64> {
    detection_probability(dims, 0.0, threshold)
}

/// Closed-form ROC for `n = m`:
/// `P_D = 1 - (1 - P_F) / (1 + gamma - gamma (1 - P_F)^{1/(m p)})^p`.
pub fn roc_closed_form_alpha0(m: usize, p: usize, gamma: f64, p_false_alarm: f64) -> f64 {
    roc_closed_form_continuous(m as f64, p as f64, gamma, p_false_alarm)
}

/// [`roc_closed_form_alpha0`] with real-valued `m` and `p`, as used when the
/// number of samples is treated as continuous.
pub fn roc_closed_form_continuous(m: f64, p: f64, gamma: f64, p_false_alarm: f64) -> f64 {
    if p_false_alarm <= 0.0 {
        return 0.0;
    }
    if p_false_alarm >= 1.0 {
        return 1.0;
    }
    let log_keep = (-p_false_alarm).ln_1p();
    let shrink = -(log_keep / (m * p)).exp_m1();
    -(log_keep - p * (gamma * shrink).ln_1p()).exp_m1()
}

/// Operating points for every false-alarm probability in `grid`, which must
/// be strictly increasing inside `(0, 1)`. Points are evaluated in parallel
/// and returned in grid order.
pub fn roc_curve(dims: &ProblemDims, gamma: f64, grid: &[f64]) -> Result<RocCurve> {
    check_gamma(gamma)?;
    if grid.is_empty() {
        return Err(Error::InvalidParameter("empty false-alarm grid".into()));
    }
    for &pf in grid {
        check_probability("false-alarm probability", pf)?;
    }
    if grid.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::InvalidParameter(
            "false-alarm grid must be strictly increasing".into(),
        ));
    }
    let points = grid
        .par_iter()
        .map(|&pf| {
            let threshold = calibrate_threshold(dims, pf)?;
            Ok(RocPoint {
                p_false_alarm: pf,
                p_detection: detection_probability(dims, gamma, threshold)?,
                threshold,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(RocCurve {
        dims: *dims,
        gamma,
        points,
    })
}

fn check_pstar_args(nu: f64, gamma: f64, p_false_alarm: f64) -> Result<()> {
    if !(nu > 0.0) || !nu.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "nu must be positive, got {nu}"
        )));
    }
    if !(gamma > 0.0) || !gamma.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "SNR must be positive, got {gamma}"
        )));
    }
    check_probability("false-alarm probability", p_false_alarm)
}

/// Bounds `(lower, upper)` on the sample count that maximizes the `n = m`
/// detection probability when `m = nu p`. For some parameters the true
/// maximizer (see [`pstar_continuous`]) falls below `lower`.
pub fn pstar_bounds(nu: f64, gamma: f64, p_false_alarm: f64) -> Result<(f64, f64)> {
    check_pstar_args(nu, gamma, p_false_alarm)?;
    let spend = -(-p_false_alarm).ln_1p();
    let lower = (spend / (-2.0 * nu * ((gamma + 1.0) / (gamma + 2.0)).ln())).sqrt();
    let upper = (spend / (-nu * ((gamma + 2.0) / (gamma + 4.0)).ln())).sqrt();
    Ok((lower, upper))
}

/// Midpoint of [`pstar_bounds`].
pub fn pstar_approx(nu: f64, gamma: f64, p_false_alarm: f64) -> Result<f64> {
    let (lower, upper) = pstar_bounds(nu, gamma, p_false_alarm)?;
    Ok(0.5 * (lower + upper))
}

/// `n = m` detection probability with `m = nu p` and real `p`.
pub fn detection_vs_samples(nu: f64, gamma: f64, p_false_alarm: f64, p: f64) -> f64 {
    roc_closed_form_continuous(nu * p, p, gamma, p_false_alarm)
}

/// Real `p` maximizing [`detection_vs_samples`], by golden-section search
/// on `[lower / 2, 2 upper]`.
pub fn pstar_continuous(nu: f64, gamma: f64, p_false_alarm: f64) -> Result<f64> {
    let (lower, upper) = pstar_bounds(nu, gamma, p_false_alarm)?;
    let objective = |p: f64| detection_vs_samples(nu, gamma, p_false_alarm, p);
    let ratio = 0.5 * (5f64.sqrt() - 1.0);
    let (mut a, mut b) = (0.5 * lower, 2.0 * upper);
    let mut c = b - ratio * (b - a);
    let mut d = a + ratio * (b - a);
    let (mut fc, mut fd) = (objective(c), objective(d));
    while b - a > 1e-12 * b {
        if fc > fd {
            b = d;
            d = c;
            fd = fc;
            c = b - ratio * (b - a);
            fc = objective(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + ratio * (b - a);
            fd = objective(d);
        }
    }
    Ok(0.5 * (a + b))
}

/// Best integer `p >= 1` by exhaustive search, with its detection
/// probability.
pub fn pstar_integer(nu: f64, gamma: f64, p_false_alarm: f64) -> Result<(usize, f64)> {
    let (_, upper) = pstar_bounds(nu, gamma, p_false_alarm)?;
    let last = ((4.0 * upper).ceil() as usize).max(4);
    let mut best = (1, detection_vs_samples(nu, gamma, p_false_alarm, 1.0));
    for p in 2..=last {
        let v = detection_vs_samples(nu, gamma, p_false_alarm, p as f64);
        if v > best.1 {
            best = (p, v);
        }
    }
    Ok(best)
}

/// Coefficient `a` in `P_D(gamma) = P_F + a gamma + o(gamma)`.
///
/// For `n = m` this is `p (1 - (1 - P_F)^{1/(m p)}) (1 - P_F)`. For `n > m`
/// the coefficient is the derivative of the spiked CDF at zero spike, built
/// from the null determinant with one Jacobi row removed; it is checked
/// against [`low_snr_slope_finite_difference`] and replaced by it (with a
/// warning) when the two disagree.
pub fn low_snr_slope(dims: &ProblemDims, p_false_alarm: f64) -> Result<f64> {
    check_probability("false-alarm probability", p_false_alarm)?;
    let (m, n, p) = (dims.m() as f64, dims.n() as f64, dims.p() as f64);
    let keep = 1.0 - p_false_alarm;
    if dims.alpha() == 0 {
        return Ok(low_snr_slope_balanced(dims.m(), dims.p(), p_false_alarm));
    }
    let threshold = calibrate_threshold(dims, p_false_alarm)?;
    let t = dims.kappa() * threshold;
    let log_x = log_unit(t);
    let alpha = dims.alpha();
    let arg = 2.0 / t + 1.0;
    let cols: Vec<Vec<LogScaled>> = (1..=alpha)
        .map(|j| {
            (1..=alpha)
                .map(|i| {
                    let row = if i == 1 { 1 } else { i + 1 };
                    psi_at_arg(dims, row, j + 1, arg)
                })
                .collect()
        })
        .collect();
    let (det, _) = det_log_columns(&cols)?;
    let (mu, nu_, pu) = (dims.m() as u64, dims.n() as u64, dims.p() as u64);
    let log_pref = log_det_constant(dims) + ln_factorial(pu + nu_) - ln_factorial(pu + mu + 1)
        + (m * (n + p - m) + 1.0) * log_x;
    let analytic = p
        * (keep * (1.0 - (p + n) / (p + m) * log_x.exp())
            + (det * LogScaled::from_log(log_pref)).to_f64());

    let check = low_snr_slope_finite_difference(dims, p_false_alarm, SLOPE_STEP)?;
    if (analytic - check).abs() > SLOPE_AGREEMENT * check.abs() {
        log::warn!(
            "low-SNR slope at m = {}, n = {}, p = {}, P_F = {p_false_alarm}: analytic {analytic} \
             disagrees with finite difference {check}; using the finite difference",
            dims.m(),
            dims.n(),
            dims.p()
        );
        return Ok(check);
    }
    Ok(analytic)
}

/// `n = m` slope `p (1 - (1 - P_F)^{1/(m p)}) (1 - P_F)` for any `m` and `p`.
pub fn low_snr_slope_balanced(m: usize, p: usize, p_false_alarm: f64) -> f64 {
    let (m, p) = (m as f64, p as f64);
    -p * ((-p_false_alarm).ln_1p() / (m * p)).exp_m1() * (1.0 - p_false_alarm)
}

/// `(P_D(gamma) - P_F) / gamma` at the calibrated threshold.
pub fn low_snr_slope_finite_difference(
    dims: &ProblemDims,
    p_false_alarm: f64,
    gamma: f64,
) -> Result<f64> {
    if !(gamma > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "SNR step must be positive, got {gamma}"
        )));
    }
    let threshold = calibrate_threshold(dims, p_false_alarm)?;
    let pf = false_alarm_probability(dims, threshold)?;
    Ok((detection_probability(dims, gamma, threshold)? - pf) / gamma)
}

/// Limit of the `n = m` slope as `p -> infinity`:
/// `-(1 - P_F) ln(1 - P_F) / m`.
pub fn low_snr_slope_limit(m: usize, p_false_alarm: f64) -> f64 {
    -(1.0 - p_false_alarm) * (-p_false_alarm).ln_1p() / m as f64
}

/// ROC as `p -> infinity` with `m` fixed: `1 - (1 - P_F)^{1 + gamma/m}`.
pub fn asymptotic_roc_p_infinity(m: usize, gamma: f64, p_false_alarm: f64) -> f64 {
    asymptotic_roc_scaled(gamma / m as f64, p_false_alarm)
}

/// ROC when the spike grows like `theta m`: `1 - (1 - P_F)^{1 + theta}`.
pub fn asymptotic_roc_scaled(theta: f64, p_false_alarm: f64) -> f64 {
    -((1.0 + theta) * (-p_false_alarm).ln_1p()).exp_m1()
}
