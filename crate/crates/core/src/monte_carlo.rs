//! Simulation and quadrature references for the largest eigenvalue.
//!
//! The sampler draws the two Wishart matrices directly and extracts the
//! largest generalized eigenvalue. Every trial owns a ChaCha8 stream
//! selected by its index, so results do not depend on the worker count.
//! The quadrature reference integrates the two-dimensional joint density of
//! `x = lambda / (1 + lambda)` over the ordered region.

use std::f64::consts::PI;
use std::io::Write;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::detmat::{max_generalized_eigenvalue, DenseHermitianMatrix};
use crate::error::{Error, Result};
use crate::finite_cdf::{ProblemDims, SpikeParam};
use crate::specfun::ln_factorial;

/// Stream index reserved for the random spike direction.
const DIRECTION_STREAM: u64 = u64::MAX;

/// Quadrature nodes per axis in [`joint_density_cdf_m2`].
const QUADRATURE_NODES: usize = 64;

/// Largest `n` or `p` accepted by [`joint_density_cdf_m2`].
pub const QUADRATURE_MAX: usize = 12;

/// Sampler settings.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct McConfig {
    pub dims: ProblemDims,
    pub spike: SpikeParam,
    pub trials: usize,
    pub seed: u64,
    pub workers: usize,
}

impl McConfig {
    fn validate(&self) -> Result<()> {
        if self.trials == 0 {
            return Err(Error::InvalidParameter("trials must be at least 1".into()));
        }
        if self.workers == 0 {
            return Err(Error::InvalidParameter("workers must be at least 1".into()));
        }
        Ok(())
    }
}

/// Sorted sample with step-function CDF `#{samples <= x} / count`.
#[derive(Debug, Clone, PartialEq)]
pub struct EmpiricalCdf {
    samples: Vec<f64>,
}

impl EmpiricalCdf {
    /// Sorts `samples`, which must be nonempty and free of NaN.
    pub fn new(mut samples: Vec<f64>) -> Result<Self> {
        if samples.is_empty() {
            return Err(Error::InvalidParameter(
                "empirical CDF needs at least one sample".into(),
            ));
        }
        if samples.iter().any(|v| v.is_nan()) {
            return Err(Error::Domain("NaN sample".into()));
        }
        samples.sort_by(f64::total_cmp);
        Ok(EmpiricalCdf { samples })
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn count(&self) -> usize {
        self.samples.len()
    }

    pub fn eval(&self, x: f64) -> f64 {
        self.samples.partition_point(|&v| v <= x) as f64 / self.count() as f64
    }

    /// Fraction of samples strictly above `x`.
    pub fn exceedance(&self, x: f64) -> f64 {
        1.0 - self.eval(x)
    }

    pub fn mean(&self) -> f64 {
        self.samples.iter().sum::<f64>() / self.count() as f64
    }

    /// Every sample multiplied by a positive `factor`.
    pub fn rescaled(&self, factor: f64) -> Result<Self> {
        if !(factor > 0.0) || !factor.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "scale must be positive, got {factor}"
            )));
        }
        Ok(EmpiricalCdf {
            samples: self.samples.iter().map(|v| v * factor).collect(),
        })
    }

    /// Samples of `lambda_max` mapped to the test statistic `(n/p) lambda_max`.
    pub fn to_test_statistic(&self, dims: &ProblemDims) -> Result<Self> {
        self.rescaled(1.0 / dims.kappa())
    }

    /// One sample per line in shortest round-trip form.
    pub fn write_samples<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        for v in &self.samples {
            writeln!(out, "{v:?}")?;
        }
        Ok(())
    }
}

/// Standard complex Gaussian, `E|z|^2 = 1`, by Box-Muller.
fn complex_normal(rng: &mut ChaCha8Rng) -> Complex64 {
    let u: f64 = 1.0 - rng.gen::<f64>();
    let angle = 2.0 * PI * rng.gen::<f64>();
    Complex64::from_polar((-u.ln()).sqrt(), angle)
}

fn trial_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Unit vector uniform on the complex sphere, drawn from its own stream of
/// `seed`.
pub fn random_unit_vector(m: usize, seed: u64) -> Vec<Complex64> {
    let mut rng = trial_rng(seed, DIRECTION_STREAM);
    let v: Vec<Complex64> = (0..m).map(|_| complex_normal(&mut rng)).collect();
    let norm = v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    v.into_iter().map(|z| z / norm).collect()
}

/// One draw of `lambda_max(W1 W2^{-1})`. With `direction = None` the spike
/// lies along the first coordinate; otherwise along the given unit vector.
fn one_trial(config: &McConfig, direction: Option<&[Complex64]>, trial: u64) -> Result<f64> {
    let (m, n, p) = (config.dims.m(), config.dims.n(), config.dims.p());
    let mut rng = trial_rng(config.seed, trial);
    let stretch = (1.0 + config.spike.eta()).sqrt();
    // row-major m x p signal block, one column per sample
    let mut x: Vec<Complex64> = (0..m * p).map(|_| complex_normal(&mut rng)).collect();
    match direction {
        None => x[..p].iter_mut().for_each(|z| *z *= stretch),
        Some(u) => {
            // (I + (stretch - 1) u u^H) applied to each column
            for col in 0..p {
                let proj: Complex64 = (0..m).map(|i| u[i].conj() * x[i * p + col]).sum();
                for i in 0..m {
                    x[i * p + col] += (stretch - 1.0) * u[i] * proj;
                }
            }
        }
    }
    let noise: Vec<Complex64> = (0..m * n).map(|_| complex_normal(&mut rng)).collect();
    let w1 = DenseHermitianMatrix::gram(m, p, &x)?;
    let w2 = DenseHermitianMatrix::gram(m, n, &noise)?;
    max_generalized_eigenvalue(&w1, &w2)
}

fn run_trials(config: &McConfig, direction: Option<&[Complex64]>) -> Result<EmpiricalCdf> {
    config.validate()?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(config.workers)
        .build()
        .map_err(|e| Error::InvalidParameter(format!("cannot start worker pool: {e}")))?;
    let samples = pool.install(|| {
        (0..config.trials as u64)
            .into_par_iter()
            .map(|trial| one_trial(config, direction, trial))
            .collect::<Result<Vec<f64>>>()
    })?;
    EmpiricalCdf::new(samples)
}

/// Empirical law of `lambda_max(W1 W2^{-1})` with `W1 = X X^H`, the `p`
/// columns of `X` drawn from `CN(0, I + eta e1 e1^H)`, and `W2 = N N^H` with
/// `n` standard columns.
pub fn sample_lambda_max(config: &McConfig) -> Result<EmpiricalCdf> {
    run_trials(config, None)
}

/// As [`sample_lambda_max`] with the spike along `direction`, a unit vector
/// of length `m`.
pub fn sample_lambda_max_along(config: &McConfig, direction: &[Complex64]) -> Result<EmpiricalCdf> {
    if direction.len() != config.dims.m() {
        return Err(Error::DimensionMismatch {
            expected: format!("direction of length {}", config.dims.m()),
            got: format!("length {}", direction.len()),
        });
    }
    let norm = direction.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    if (norm - 1.0).abs() > 1e-12 {
        return Err(Error::InvalidParameter(format!(
            "direction must have unit norm, got {norm}"
        )));
    }
    run_trials(config, Some(direction))
}

/// `sup_i max(|i/N - F(x_i)|, |(i-1)/N - F(x_i)|)` over the sorted samples.
pub fn ks_distance(emp: &EmpiricalCdf, analytic: impl Fn(f64) -> f64 + Sync) -> f64 {
    try_ks_distance(emp, |x| Ok(analytic(x))).expect("infallible")
}

/// [`ks_distance`] for a fallible reference CDF, evaluated in parallel.
pub fn try_ks_distance(
    emp: &EmpiricalCdf,
    analytic: impl Fn(f64) -> Result<f64> + Sync,
) -> Result<f64> {
    let count = emp.count() as f64;
    let gaps = emp
        .samples
        .par_iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = analytic(x)?;
            Ok(((i + 1) as f64 / count - f)
                .abs()
                .max((i as f64 / count - f).abs()))
        })
        .collect::<Result<Vec<f64>>>()?;
    Ok(gaps.into_iter().fold(0.0, f64::max))
}

/// `sup_x (F_a(x) - F_b(x))`; large when `b` stochastically dominates `a`.
pub fn ks_one_sided(a: &EmpiricalCdf, b: &EmpiricalCdf) -> f64 {
    let (sa, sb) = (&a.samples, &b.samples);
    let (na, nb) = (sa.len() as f64, sb.len() as f64);
    let (mut i, mut j) = (0, 0);
    let mut best = 0.0f64;
    while i < sa.len() || j < sb.len() {
        let x = match (sa.get(i), sb.get(j)) {
            (Some(&u), Some(&v)) => u.min(v),
            (Some(&u), None) => u,
            (None, Some(&v)) => v,
            (None, None) => unreachable!(),
        };
        while i < sa.len() && sa[i] <= x {
            i += 1;
        }
        while j < sb.len() && sb[j] <= x {
            j += 1;
        }
        best = best.max(i as f64 / na - j as f64 / nb);
    }
    best
}

/// Two-sample Kolmogorov-Smirnov statistic.
pub fn ks_two_sample(a: &EmpiricalCdf, b: &EmpiricalCdf) -> f64 {
    ks_one_sided(a, b).max(ks_one_sided(b, a))
}

/// Gauss-Legendre nodes and weights on `[-1, 1]`.
pub fn gauss_legendre(count: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = vec![0.0; count];
    let mut weights = vec![0.0; count];
    let nf = count as f64;
    for k in 0..count.div_ceil(2) {
        let mut x = (PI * (k as f64 + 0.75) / (nf + 0.5)).cos();
        let mut deriv = 0.0;
        for _ in 0..100 {
            // P_count(x) and its derivative by the three-term recurrence
            let (mut p0, mut p1) = (1.0, x);
            for j in 2..=count {
                let jf = j as f64;
                let p2 = ((2.0 * jf - 1.0) * x * p1 - (jf - 1.0) * p0) / jf;
                p0 = p1;
                p1 = p2;
            }
            let value = if count == 1 { x } else { p1 };
            let prev = if count == 1 { 1.0 } else { p0 };
            deriv = nf * (x * value - prev) / (x * x - 1.0);
            let step = value / deriv;
            x -= step;
            if step.abs() < 1e-16 {
                break;
            }
        }
        let w = 2.0 / ((1.0 - x * x) * deriv * deriv);
        nodes[k] = x;
        nodes[count - 1 - k] = -x;
        weights[k] = w;
        weights[count - 1 - k] = w;
    }
    (nodes, weights)
}

/// `Pr(lambda_max <= t)` for `m = 2` by integrating the joint density of
/// `x_j = lambda_j / (1 + lambda_j)` over `0 <= x1 <= x2 <= t/(1+t)`.
///
/// With `a_k = 1 - (eta/(1+eta)) x_k` and `N = n + p - 1` the density is
/// `C (x2-x1)^2 (x1 x2)^{p-2} ((1-x1)(1-x2))^{n-2} S / (1+eta)^p`, where
/// `S = sum_{k<N} a1^{k-N} a2^{-1-k}` is the divided difference
/// `(a2^{-N} - a1^{-N}) / (a1 - a2)` written without cancellation and `C`
/// is the product of the normalizing constants. At `eta = 0`, `S = N` and
/// the density reduces to the unspiked one.
pub fn joint_density_cdf_m2(n: usize, p: usize, eta: f64, t: f64) -> Result<f64> {
    for (name, v) in [("n", n), ("p", p)] {
        if !(2..=QUADRATURE_MAX).contains(&v) {
            return Err(Error::OutOfEnvelope {
                what: name,
                value: v,
                cap: QUADRATURE_MAX,
            });
        }
    }
    if !(eta >= 0.0) || !eta.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "eta must be finite and nonnegative, got {eta}"
        )));
    }
    if t.is_nan() {
        return Err(Error::Domain("t is NaN".into()));
    }
    if t <= 0.0 {
        return Ok(0.0);
    }
    let upper = if t == f64::INFINITY {
        1.0
    } else {
        t / (1.0 + t)
    };
    let (nu, pu) = (n as u64, p as u64);
    let log_unspiked = ln_factorial(nu + pu - 1) + ln_factorial(nu + pu - 2)
        - ln_factorial(nu - 1)
        - ln_factorial(nu - 2)
        - ln_factorial(pu - 1)
        - ln_factorial(pu - 2);
    let big_n = n + p - 1;
    // unspiked constant times (p+n-2)!/(p+n-1)!, over (1+eta)^p
    let log_spiked = log_unspiked - ((big_n) as f64).ln() - p as f64 * eta.ln_1p();
    let w = eta / (1.0 + eta);

    let density = |x1: f64, x2: f64| -> f64 {
        let base = (x2 - x1).powi(2)
            * (x1 * x2).powi(p as i32 - 2)
            * ((1.0 - x1) * (1.0 - x2)).powi(n as i32 - 2);
        if eta == 0.0 {
            return log_unspiked.exp() * base;
        }
        let (a1, a2) = (1.0 - w * x1, 1.0 - w * x2);
        let ratio = a1 / a2;
        let mut s = 0.0;
        let mut term = 1.0;
        for _ in 0..big_n {
            s += term;
            term *= ratio;
        }
        let s = s * a1.powi(-(big_n as i32)) / a2;
        log_spiked.exp() * base * s
    };

    let (nodes, weights) = gauss_legendre(QUADRATURE_NODES);
    // x2 = upper s, x1 = x2 r with r, s in [0, 1]; Jacobian upper * x2
    let mut total = 0.0;
    for (&ns, &ws) in nodes.iter().zip(&weights) {
        let x2 = upper * 0.5 * (ns + 1.0);
        let mut inner = 0.0;
        for (&nr, &wr) in nodes.iter().zip(&weights) {
            inner += 0.5 * wr * density(x2 * 0.5 * (nr + 1.0), x2);
        }
        total += 0.5 * ws * upper * x2 * inner;
    }
    Ok(total.clamp(0.0, 1.0))
}
