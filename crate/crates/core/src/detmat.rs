//! Small dense linear algebra.
//!
//! Determinants come back as [`LogScaled`] values, Hermitian eigenvalues are
//! found with cyclic complex Jacobi rotations, and the generalized largest
//! eigenvalue of a pencil `(A, B)` is obtained by whitening with the Cholesky
//! factor of `B`. Every matrix is capped at [`MAX_DIM`] rows.

use num_bigint::BigInt;
use num_complex::Complex64;
use num_traits::{One, Zero};

use crate::error::{Error, Result};
use crate::specfun::LogScaled;

/// Largest supported matrix dimension.
pub const MAX_DIM: usize = 64;

const MAX_SWEEPS: usize = 30;

fn check_dim(dim: usize) -> Result<()> {
    if dim == 0 {
        return Err(Error::InvalidParameter(
            "matrix dimension must be positive".into(),
        ));
    }
    if dim > MAX_DIM {
        return Err(Error::OutOfEnvelope {
            what: "matrix dimension",
            value: dim,
            cap: MAX_DIM,
        });
    }
    Ok(())
}

/// Row-major real matrix with finite entries.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseRealMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl DenseRealMatrix {
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(Error::InvalidParameter("matrix must be non-empty".into()));
        }
        if data.len() != rows * cols {
            return Err(Error::DimensionMismatch {
                expected: format!("{} entries", rows * cols),
                got: format!("{} entries", data.len()),
            });
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter(
                "matrix entries must be finite".into(),
            ));
        }
        Ok(DenseRealMatrix { rows, cols, data })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let r = rows.len();
        let c = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|row| row.len() != c) {
            return Err(Error::DimensionMismatch {
                expected: format!("rows of length {c}"),
                got: "ragged rows".into(),
            });
        }
        Self::new(r, c, rows.concat())
    }

    pub fn identity(dim: usize) -> Self {
        let mut data = vec![0.0; dim * dim];
        for i in 0..dim {
            data[i * dim + i] = 1.0;
        }
        DenseRealMatrix {
            rows: dim,
            cols: dim,
            data,
        }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    pub fn matmul(&self, rhs: &DenseRealMatrix) -> Result<DenseRealMatrix> {
        if self.cols != rhs.rows {
            return Err(Error::DimensionMismatch {
                expected: format!("{} rows", self.cols),
                got: format!("{} rows", rhs.rows),
            });
        }
        let mut data = vec![0.0; self.rows * rhs.cols];
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self.get(i, k);
                for j in 0..rhs.cols {
                    data[i * rhs.cols + j] += a * rhs.get(k, j);
                }
            }
        }
        DenseRealMatrix::new(self.rows, rhs.cols, data)
    }
}

/// Determinant as sign and log-magnitude.
///
/// Each row is first divided by its largest magnitude (the scales go into the
/// log-magnitude), then LU with partial pivoting runs on the balanced matrix.
pub fn det_scaled(m: &DenseRealMatrix) -> Result<LogScaled> {
    if m.rows != m.cols {
        return Err(Error::DimensionMismatch {
            expected: "square matrix".into(),
            got: format!("{}x{}", m.rows, m.cols),
        });
    }
    let n = m.rows;
    check_dim(n)?;
    let mut a = m.data.clone();
    let mut log_mag = 0.0;
    let mut sign: i8 = 1;
    for i in 0..n {
        let row = &mut a[i * n..(i + 1) * n];
        let scale = row.iter().fold(0.0f64, |acc, v| acc.max(v.abs()));
        if scale == 0.0 {
            return Ok(LogScaled::ZERO);
        }
        row.iter_mut().for_each(|v| *v /= scale);
        log_mag += scale.ln();
    }
    for k in 0..n {
        let (piv, piv_abs) =
            (k..n)
                .map(|i| (i, a[i * n + k].abs()))
                .fold(
                    (k, -1.0),
                    |best, cur| if cur.1 > best.1 { cur } else { best },
                );
        if piv_abs == 0.0 {
            return Ok(LogScaled::ZERO);
        }
        if piv != k {
            for j in 0..n {
                a.swap(k * n + j, piv * n + j);
            }
            sign = -sign;
        }
        let d = a[k * n + k];
        if d < 0.0 {
            sign = -sign;
        }
        log_mag += d.abs().ln();
        for i in (k + 1)..n {
            let f = a[i * n + k] / d;
            if f != 0.0 {
                for j in (k + 1)..n {
                    a[i * n + j] -= f * a[k * n + j];
                }
            }
        }
    }
    Ok(LogScaled::new(log_mag, sign))
}

/// Exact determinant of a square integer matrix by fraction-free (Bareiss)
/// elimination; every division is exact.
pub fn det_integer(mut a: Vec<Vec<BigInt>>) -> Result<BigInt> {
    let n = a.len();
    check_dim(n)?;
    if a.iter().any(|row| row.len() != n) {
        return Err(Error::DimensionMismatch {
            expected: "square matrix".into(),
            got: "ragged or rectangular rows".into(),
        });
    }
    let mut prev = BigInt::one();
    let mut negate = false;
    for k in 0..n {
        let Some(piv) = (k..n).find(|&r| !a[r][k].is_zero()) else {
            return Ok(BigInt::zero());
        };
        if piv != k {
            a.swap(piv, k);
            negate = !negate;
        }
        for r in (k + 1)..n {
            for c in (k + 1)..n {
                let v = &a[r][c] * &a[k][k] - &a[r][k] * &a[k][c];
                a[r][c] = v / &prev;
            }
        }
        prev = a[k][k].clone();
    }
    let d = a[n - 1][n - 1].clone();
    Ok(if negate { -d } else { d })
}

/// Square complex matrix, row-major. Used for Cholesky factors and general
/// intermediate products.
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexMatrix {
    dim: usize,
    data: Vec<Complex64>,
}

impl ComplexMatrix {
    pub fn zeros(dim: usize) -> Self {
        ComplexMatrix {
            dim,
            data: vec![Complex64::new(0.0, 0.0); dim * dim],
        }
    }

    pub fn from_vec(dim: usize, data: Vec<Complex64>) -> Result<Self> {
        if data.len() != dim * dim {
            return Err(Error::DimensionMismatch {
                expected: format!("{} entries", dim * dim),
                got: format!("{} entries", data.len()),
            });
        }
        Ok(ComplexMatrix { dim, data })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn get(&self, i: usize, j: usize) -> Complex64 {
        self.data[i * self.dim + j]
    }

    pub fn set(&mut self, i: usize, j: usize, v: Complex64) {
        self.data[i * self.dim + j] = v;
    }

    pub fn adjoint(&self) -> ComplexMatrix {
        let n = self.dim;
        let mut out = ComplexMatrix::zeros(n);
        for i in 0..n {
            for j in 0..n {
                out.data[j * n + i] = self.data[i * n + j].conj();
            }
        }
        out
    }

    pub fn matmul(&self, rhs: &ComplexMatrix) -> ComplexMatrix {
        let n = self.dim;
        let mut out = ComplexMatrix::zeros(n);
        for i in 0..n {
            for k in 0..n {
                let a = self.data[i * n + k];
                for j in 0..n {
                    out.data[i * n + j] += a * rhs.data[k * n + j];
                }
            }
        }
        out
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }
}

/// Hermitian complex matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseHermitianMatrix {
    inner: ComplexMatrix,
}

impl DenseHermitianMatrix {
    /// Accepts a row-major square matrix whose entries satisfy
    /// `|h_ij - conj(h_ji)| <= 1e-12 * max(1, max|h|)`; the stored matrix is
    /// the exact Hermitian part.
    pub fn new(dim: usize, data: Vec<Complex64>) -> Result<Self> {
        check_dim(dim)?;
        let m = ComplexMatrix::from_vec(dim, data)?;
        let scale = m.data.iter().fold(1.0f64, |acc, z| acc.max(z.norm()));
        if m.data
            .iter()
            .any(|z| !z.re.is_finite() || !z.im.is_finite())
        {
            return Err(Error::InvalidParameter(
                "matrix entries must be finite".into(),
            ));
        }
        for i in 0..dim {
            for j in 0..=i {
                if (m.get(i, j) - m.get(j, i).conj()).norm() > 1e-12 * scale {
                    return Err(Error::InvalidParameter(format!(
                        "matrix is not Hermitian at ({i}, {j})"
                    )));
                }
            }
        }
        Ok(Self::from_matrix_unchecked(&m))
    }

    /// Takes the Hermitian part `(M + M^H) / 2` without validation.
    pub fn from_matrix_unchecked(m: &ComplexMatrix) -> Self {
        let n = m.dim;
        let mut out = ComplexMatrix::zeros(n);
        for i in 0..n {
            for j in 0..n {
                out.data[i * n + j] = 0.5 * (m.get(i, j) + m.get(j, i).conj());
            }
        }
        DenseHermitianMatrix { inner: out }
    }

    pub fn from_real_diagonal(diag: &[f64]) -> Result<Self> {
        let n = diag.len();
        check_dim(n)?;
        let mut m = ComplexMatrix::zeros(n);
        for (i, &d) in diag.iter().enumerate() {
            m.set(i, i, Complex64::new(d, 0.0));
        }
        Ok(DenseHermitianMatrix { inner: m })
    }

    /// `G G^H` for an `rows x cols` row-major complex matrix `G`.
    pub fn gram(rows: usize, cols: usize, g: &[Complex64]) -> Result<Self> {
        check_dim(rows)?;
        if g.len() != rows * cols {
            return Err(Error::DimensionMismatch {
                expected: format!("{} entries", rows * cols),
                got: format!("{} entries", g.len()),
            });
        }
        let mut m = ComplexMatrix::zeros(rows);
        for i in 0..rows {
            let gi = &g[i * cols..(i + 1) * cols];
            for j in 0..=i {
                let gj = &g[j * cols..(j + 1) * cols];
                let mut acc = Complex64::new(0.0, 0.0);
                for (a, b) in gi.iter().zip(gj) {
                    acc += a * b.conj();
                }
                m.set(i, j, acc);
                m.set(j, i, acc.conj());
            }
            m.set(i, i, Complex64::new(m.get(i, i).re, 0.0));
        }
        Ok(DenseHermitianMatrix { inner: m })
    }

    pub fn dim(&self) -> usize {
        self.inner.dim
    }

    pub fn get(&self, i: usize, j: usize) -> Complex64 {
        self.inner.get(i, j)
    }

    pub fn as_matrix(&self) -> &ComplexMatrix {
        &self.inner
    }

    pub fn trace(&self) -> f64 {
        (0..self.dim()).map(|i| self.get(i, i).re).sum()
    }

    /// `M H M^H`, which is again Hermitian.
    pub fn congruence(&self, m: &ComplexMatrix) -> Result<Self> {
        if m.dim != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: format!("dimension {}", self.dim()),
                got: format!("dimension {}", m.dim),
            });
        }
        let prod = m.matmul(&self.inner).matmul(&m.adjoint());
        Ok(Self::from_matrix_unchecked(&prod))
    }
}

/// Lower-triangular `L` with `L L^H = H`.
pub fn cholesky(h: &DenseHermitianMatrix) -> Result<ComplexMatrix> {
    let n = h.dim();
    let mut l = ComplexMatrix::zeros(n);
    for j in 0..n {
        let mut d = h.get(j, j).re;
        for k in 0..j {
            d -= l.get(j, k).norm_sqr();
        }
        if !(d > 0.0) {
            return Err(Error::NotPositiveDefinite { pivot: j, value: d });
        }
        let djj = d.sqrt();
        l.set(j, j, Complex64::new(djj, 0.0));
        for i in (j + 1)..n {
            let mut s = h.get(i, j);
            for k in 0..j {
                s -= l.get(i, k) * l.get(j, k).conj();
            }
            l.set(i, j, s / djj);
        }
    }
    Ok(l)
}

/// Off-diagonal Frobenius mass.
fn off_norm_sqr(a: &[Complex64], n: usize) -> f64 {
    let mut s = 0.0;
    for i in 0..n {
        for j in 0..n {
            if i != j {
                s += a[i * n + j].norm_sqr();
            }
        }
    }
    s
}

/// All eigenvalues of a Hermitian matrix, ascending, by cyclic Jacobi sweeps.
pub fn hermitian_eigenvalues(h: &DenseHermitianMatrix) -> Result<Vec<f64>> {
    let n = h.dim();
    let mut a = h.inner.data.clone();
    let norm = h.inner.frobenius_norm();
    let tol = (1e-12 * norm).powi(2);
    let mut converged = off_norm_sqr(&a, n) <= tol;
    let mut sweep = 0;
    while !converged {
        if sweep == MAX_SWEEPS {
            return Err(Error::NoConvergence { sweeps: MAX_SWEEPS });
        }
        sweep += 1;
        for p in 0..n {
            for q in (p + 1)..n {
                rotate(&mut a, n, p, q);
            }
        }
        converged = off_norm_sqr(&a, n) <= tol;
    }
    let mut ev: Vec<f64> = (0..n).map(|i| a[i * n + i].re).collect();
    ev.sort_by(|x, y| x.total_cmp(y));
    Ok(ev)
}

/// One complex Jacobi rotation annihilating `a[p][q]` and `a[q][p]`.
///
/// With `a_pq = |a_pq| e^{i phi}` the unitary is `U = D R`, where
/// `D = diag(1, e^{-i phi})` on the (p, q) plane makes the pivot real and `R`
/// is the usual real symmetric rotation.
fn rotate(a: &mut [Complex64], n: usize, p: usize, q: usize) {
    let apq = a[p * n + q];
    let mag = apq.norm();
    if mag == 0.0 {
        return;
    }
    let app = a[p * n + p].re;
    let aqq = a[q * n + q].re;
    if mag < 1e-300 {
        a[p * n + q] = Complex64::new(0.0, 0.0);
        a[q * n + p] = Complex64::new(0.0, 0.0);
        return;
    }
    let phase = apq / mag;
    let tau = (aqq - app) / (2.0 * mag);
    let t = if tau >= 0.0 {
        1.0 / (tau + (1.0 + tau * tau).sqrt())
    } else {
        -1.0 / (-tau + (1.0 + tau * tau).sqrt())
    };
    let c = 1.0 / (1.0 + t * t).sqrt();
    let s = t * c;
    let ph_conj = phase.conj();
    // columns: A <- A U
    for k in 0..n {
        let akp = a[k * n + p];
        let akq = a[k * n + q];
        a[k * n + p] = c * akp - s * ph_conj * akq;
        a[k * n + q] = s * akp + c * ph_conj * akq;
    }
    // rows: A <- U^H A
    for k in 0..n {
        let apk = a[p * n + k];
        let aqk = a[q * n + k];
        a[p * n + k] = c * apk - s * phase * aqk;
        a[q * n + k] = s * apk + c * phase * aqk;
    }
    a[p * n + q] = Complex64::new(0.0, 0.0);
    a[q * n + p] = Complex64::new(0.0, 0.0);
    a[p * n + p] = Complex64::new(a[p * n + p].re, 0.0);
    a[q * n + q] = Complex64::new(a[q * n + q].re, 0.0);
}

/// Solves `L X = B` for lower-triangular `L`, column by column.
fn forward_solve(l: &ComplexMatrix, b: &ComplexMatrix) -> ComplexMatrix {
    let n = l.dim;
    let mut x = ComplexMatrix::zeros(n);
    for col in 0..n {
        for i in 0..n {
            let mut s = b.get(i, col);
            for k in 0..i {
                s -= l.get(i, k) * x.get(k, col);
            }
            x.set(i, col, s / l.get(i, i));
        }
    }
    x
}

/// Largest eigenvalue of `B^{-1} A`, computed as the largest eigenvalue of
/// `L^{-1} A L^{-H}` with `B = L L^H`.
pub fn max_generalized_eigenvalue(
    a: &DenseHermitianMatrix,
    b: &DenseHermitianMatrix,
) -> Result<f64> {
    if a.dim() != b.dim() {
        return Err(Error::DimensionMismatch {
            expected: format!("dimension {}", a.dim()),
            got: format!("dimension {}", b.dim()),
        });
    }
    let l = cholesky(b)?;
    let y = forward_solve(&l, &a.inner);
    let c = forward_solve(&l, &y.adjoint());
    let whitened = DenseHermitianMatrix::from_matrix_unchecked(&c);
    let ev = hermitian_eigenvalues(&whitened)?;
    Ok(*ev.last().expect("dimension is positive"))
}
