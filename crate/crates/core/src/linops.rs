//! Dense linear maps, symmetric metrics and the small amount of dense
//! linear algebra the solver needs.
//!
//! Everything here is desk scale (dimensions up to a few hundred). Symmetric
//! eigenvalues come from cyclic Jacobi sweeps, which are slow but
//! deterministic and dependency free.

use std::fmt;

use crate::error::{Error, Result};

/// Relative tolerance below which a Gram eigenvalue is treated as zero.
pub const RANK_TOL: f64 = 1e-10;
/// Relative tolerance for positive semidefiniteness tests.
pub const PSD_TOL: f64 = 1e-10;
/// Off-diagonal Frobenius norm at which Jacobi sweeps stop, relative to the
/// Frobenius norm of the input.
pub const JACOBI_TOL: f64 = 1e-12;

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub(crate) fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

pub(crate) fn sub(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}

pub(crate) fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

/// Eigenvalues of a symmetric `n x n` row-major matrix, ascending.
///
/// Cyclic Jacobi rotations are applied until the off-diagonal Frobenius norm
/// drops below [`JACOBI_TOL`] times the Frobenius norm of the input.
pub fn symmetric_eigenvalues(a: &[f64], n: usize) -> Vec<f64> {
    assert_eq!(a.len(), n * n, "symmetric_eigenvalues: shape mismatch");
    let mut m = a.to_vec();
    let scale = norm(a).max(f64::MIN_POSITIVE);
    let off = |m: &[f64]| -> f64 {
        let mut s = 0.0;
        for i in 0..n {
            for j in 0..n {
                if i != j {
                    s += m[i * n + j] * m[i * n + j];
                }
            }
        }
        s.sqrt()
    };
    for _sweep in 0..100 {
        if off(&m) <= JACOBI_TOL * scale {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = m[p * n + q];
                if apq == 0.0 {
                    continue;
                }
                let app = m[p * n + p];
                let aqq = m[q * n + q];
                let theta = (aqq - app) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let mkp = m[k * n + p];
                    let mkq = m[k * n + q];
                    m[k * n + p] = c * mkp - s * mkq;
                    m[k * n + q] = s * mkp + c * mkq;
                }
                for k in 0..n {
                    let mpk = m[p * n + k];
                    let mqk = m[q * n + k];
                    m[p * n + k] = c * mpk - s * mqk;
                    m[q * n + k] = s * mpk + c * mqk;
                }
            }
        }
    }
    let mut ev: Vec<f64> = (0..n).map(|i| m[i * n + i]).collect();
    ev.sort_by(f64::total_cmp);
    ev
}

/// Lower-triangular Cholesky factor of a symmetric positive definite matrix.
pub fn cholesky(a: &[f64], n: usize) -> Result<Vec<f64>> {
    let mut l = vec![0.0; n * n];
    for j in 0..n {
        let mut d = a[j * n + j];
        for k in 0..j {
            d -= l[j * n + k] * l[j * n + k];
        }
        if !(d > 0.0) {
            return Err(Error::Numerical(format!(
                "matrix is not positive definite (pivot {j} = {d:e})"
            )));
        }
        let d = d.sqrt();
        l[j * n + j] = d;
        for i in (j + 1)..n {
            let mut s = a[i * n + j];
            for k in 0..j {
                s -= l[i * n + k] * l[j * n + k];
            }
            l[i * n + j] = s / d;
        }
    }
    Ok(l)
}

/// Solves `L Lᵀ x = b` given the factor from [`cholesky`].
pub fn cholesky_solve(l: &[f64], n: usize, b: &[f64]) -> Vec<f64> {
    let mut y = b.to_vec();
    for i in 0..n {
        for k in 0..i {
            y[i] -= l[i * n + k] * y[k];
        }
        y[i] /= l[i * n + i];
    }
    for i in (0..n).rev() {
        for k in (i + 1)..n {
            y[i] -= l[k * n + i] * y[k];
        }
        y[i] /= l[i * n + i];
    }
    y
}

/// Outcome of [`conjugate_gradient`].
#[derive(Debug, Clone)]
pub struct CgResult {
    pub x: Vec<f64>,
    pub iterations: usize,
    pub residual: f64,
}

/// Conjugate gradients for a symmetric positive definite system, started at
/// `x0`. Stops when `‖b − Ax‖ ≤ tol·max(1, ‖b‖)` or after `max_iter` steps.
pub fn conjugate_gradient(
    a: &[f64],
    n: usize,
    b: &[f64],
    x0: &[f64],
    tol: f64,
    max_iter: usize,
) -> CgResult {
    let matvec = |v: &[f64]| -> Vec<f64> {
        (0..n).map(|i| dot(&a[i * n..(i + 1) * n], v)).collect()
    };
    let mut x = x0.to_vec();
    let mut r = sub(b, &matvec(&x));
    let mut p = r.clone();
    let mut rr = dot(&r, &r);
    let target = tol * norm(b).max(1.0);
    let mut it = 0;
    while rr.sqrt() > target && it < max_iter {
        let ap = matvec(&p);
        let pap = dot(&p, &ap);
        if pap <= 0.0 {
            break;
        }
        let alpha = rr / pap;
        axpy(alpha, &p, &mut x);
        axpy(-alpha, &ap, &mut r);
        let rr_new = dot(&r, &r);
        let beta = rr_new / rr;
        for (pi, ri) in p.iter_mut().zip(&r) {
            *pi = ri + beta * *pi;
        }
        rr = rr_new;
        it += 1;
    }
    CgResult { x, iterations: it, residual: rr.sqrt() }
}

/// A dense real `m x n` operator stored row-major, with its spectral data
/// computed once at construction.
#[derive(Clone, PartialEq)]
pub struct LinearMap {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
    op_norm: f64,
    lam_min_aat: f64,
    lam_min_ata: f64,
}

impl fmt::Debug for LinearMap {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("LinearMap")
            .field("rows", &self.rows)
            .field("cols", &self.cols)
            .field("op_norm", &self.op_norm)
            .finish()
    }
}

fn gram_min_eig(g: &[f64], k: usize, top: f64) -> f64 {
    if k == 0 {
        return 0.0;
    }
    let lo = symmetric_eigenvalues(g, k)[0];
    if lo <= RANK_TOL * top.max(1.0) {
        0.0
    } else {
        lo
    }
}

impl LinearMap {
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::Dimension(format!(
                "{rows}x{cols} map needs {} entries, got {}",
                rows * cols,
                data.len()
            )));
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput("matrix entries must be finite".into()));
        }
        let mut map = LinearMap { rows, cols, data, op_norm: 0.0, lam_min_aat: 0.0, lam_min_ata: 0.0 };
        let ata = map.gram_ata();
        let aat = map.gram_aat();
        let top = if cols <= rows {
            symmetric_eigenvalues(&ata, cols).last().copied().unwrap_or(0.0)
        } else {
            symmetric_eigenvalues(&aat, rows).last().copied().unwrap_or(0.0)
        };
        map.op_norm = top.max(0.0).sqrt();
        map.lam_min_ata = gram_min_eig(&ata, cols, top);
        map.lam_min_aat = gram_min_eig(&aat, rows, top);
        Ok(map)
    }

    /// Builds a map from row vectors, which must all have the same length.
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let m = rows.len();
        let n = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != n) {
            return Err(Error::Dimension("ragged rows".into()));
        }
        Self::new(m, n, rows.concat())
    }

    pub fn identity(n: usize) -> Self {
        let mut d = vec![0.0; n * n];
        for i in 0..n {
            d[i * n + i] = 1.0;
        }
        Self::new(n, n, d).expect("identity is well formed")
    }

    pub fn diagonal(diag: &[f64]) -> Result<Self> {
        let n = diag.len();
        let mut d = vec![0.0; n * n];
        for (i, v) in diag.iter().enumerate() {
            d[i * n + i] = *v;
        }
        Self::new(n, n, d)
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    /// Largest singular value ‖A‖.
    pub fn op_norm(&self) -> f64 {
        self.op_norm
    }

    /// Smallest eigenvalue of AA*; zero when A is not surjective.
    pub fn lambda_min_aat(&self) -> f64 {
        self.lam_min_aat
    }

    /// Smallest eigenvalue of A*A; zero when A is not injective.
    pub fn lambda_min_ata(&self) -> f64 {
        self.lam_min_ata
    }

    pub fn apply(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.cols {
            return Err(Error::Dimension(format!("apply: expected {} entries, got {}", self.cols, x.len())));
        }
        Ok(self.mv(x))
    }

    pub fn adjoint(&self, y: &[f64]) -> Result<Vec<f64>> {
        if y.len() != self.rows {
            return Err(Error::Dimension(format!("adjoint: expected {} entries, got {}", self.rows, y.len())));
        }
        Ok(self.mtv(y))
    }

    /// Unchecked product; callers validate dimensions once up front.
    pub(crate) fn mv(&self, x: &[f64]) -> Vec<f64> {
        debug_assert_eq!(x.len(), self.cols);
        (0..self.rows).map(|i| dot(&self.data[i * self.cols..(i + 1) * self.cols], x)).collect()
    }

    pub(crate) fn mtv(&self, y: &[f64]) -> Vec<f64> {
        debug_assert_eq!(y.len(), self.rows);
        let mut out = vec![0.0; self.cols];
        for (i, yi) in y.iter().enumerate() {
            axpy(*yi, &self.data[i * self.cols..(i + 1) * self.cols], &mut out);
        }
        out
    }

    /// A*A as a row-major `n x n` table.
    pub fn gram_ata(&self) -> Vec<f64> {
        let (m, n) = (self.rows, self.cols);
        let mut g = vec![0.0; n * n];
        for i in 0..n {
            for j in i..n {
                let s: f64 = (0..m).map(|k| self.data[k * n + i] * self.data[k * n + j]).sum();
                g[i * n + j] = s;
                g[j * n + i] = s;
            }
        }
        g
    }

    /// AA* as a row-major `m x m` table.
    pub fn gram_aat(&self) -> Vec<f64> {
        let (m, n) = (self.rows, self.cols);
        let mut g = vec![0.0; m * m];
        for i in 0..m {
            for j in i..m {
                let s = dot(&self.data[i * n..(i + 1) * n], &self.data[j * n..(j + 1) * n]);
                g[i * m + j] = s;
                g[j * m + i] = s;
            }
        }
        g
    }

    /// Parses the plain text format: a header line `m n` followed by `m`
    /// lines of `n` whitespace separated numbers.
    pub fn parse_text(text: &str) -> Result<Self> {
        let mut lines = text.lines().map(str::trim).filter(|l| !l.is_empty() && !l.starts_with('#'));
        let header = lines.next().ok_or_else(|| Error::Parse("empty matrix file".into()))?;
        let dims: Vec<usize> = header
            .split_whitespace()
            .map(|t| t.parse().map_err(|_| Error::Parse(format!("bad dimension '{t}'"))))
            .collect::<Result<_>>()?;
        let [m, n] = dims[..] else {
            return Err(Error::Parse("header must be 'm n'".into()));
        };
        let mut data = Vec::with_capacity(m * n);
        for (i, line) in lines.enumerate() {
            let row: Vec<f64> = line
                .split_whitespace()
                .map(|t| t.parse().map_err(|_| Error::Parse(format!("bad number '{t}' on row {i}"))))
                .collect::<Result<_>>()?;
            if row.len() != n {
                return Err(Error::Parse(format!("row {i} has {} entries, expected {n}", row.len())));
            }
            data.extend(row);
        }
        if data.len() != m * n {
            return Err(Error::Parse(format!("expected {m} rows, got {}", data.len() / n.max(1))));
        }
        Self::new(m, n, data)
    }

    pub fn to_text(&self) -> String {
        let mut s = format!("{} {}\n", self.rows, self.cols);
        for i in 0..self.rows {
            let row: Vec<String> = (0..self.cols).map(|j| format!("{:?}", self.get(i, j))).collect();
            s.push_str(&row.join(" "));
            s.push('\n');
        }
        s
    }
}

/// A symmetric matrix used as a (semi-)metric `‖v‖²_M = ⟨Mv, v⟩`.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricMatrix {
    dim: usize,
    data: Vec<f64>,
    norm: f64,
    min_eig: f64,
}

impl MetricMatrix {
    /// Symmetry is required exactly, as stored.
    pub fn new(dim: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != dim * dim {
            return Err(Error::Dimension(format!("metric of dim {dim} needs {} entries", dim * dim)));
        }
        for i in 0..dim {
            for j in (i + 1)..dim {
                if data[i * dim + j] != data[j * dim + i] {
                    return Err(Error::InvalidInput(format!("metric is not symmetric at ({i},{j})")));
                }
            }
        }
        let ev = symmetric_eigenvalues(&data, dim);
        let norm = ev.iter().fold(0.0_f64, |acc, v| acc.max(v.abs()));
        let min_eig = ev.first().copied().unwrap_or(0.0);
        Ok(MetricMatrix { dim, data, norm, min_eig })
    }

    pub fn zeros(dim: usize) -> Self {
        MetricMatrix { dim, data: vec![0.0; dim * dim], norm: 0.0, min_eig: 0.0 }
    }

    pub fn scaled_identity(dim: usize, alpha: f64) -> Self {
        let mut data = vec![0.0; dim * dim];
        for i in 0..dim {
            data[i * dim + i] = alpha;
        }
        MetricMatrix { dim, data, norm: alpha.abs(), min_eig: if dim > 0 { alpha } else { 0.0 } }
    }

    pub fn diagonal(diag: &[f64]) -> Self {
        let n = diag.len();
        let mut data = vec![0.0; n * n];
        for (i, v) in diag.iter().enumerate() {
            data[i * n + i] = *v;
        }
        Self::new(n, data).expect("diagonal matrices are symmetric")
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    /// Spectral norm.
    pub fn norm(&self) -> f64 {
        self.norm
    }

    pub fn min_eigenvalue(&self) -> f64 {
        self.min_eig
    }

    /// `Some(α)` when the matrix is exactly `αI`.
    pub fn as_scalar_identity(&self) -> Option<f64> {
        let n = self.dim;
        if n == 0 {
            return Some(0.0);
        }
        let a = self.data[0];
        for i in 0..n {
            for j in 0..n {
                let expect = if i == j { a } else { 0.0 };
                if self.data[i * n + j] != expect {
                    return None;
                }
            }
        }
        Some(a)
    }

    pub fn apply(&self, v: &[f64]) -> Result<Vec<f64>> {
        if v.len() != self.dim {
            return Err(Error::Dimension(format!("metric of dim {} applied to {} entries", self.dim, v.len())));
        }
        Ok(self.mv(v))
    }

    pub(crate) fn mv(&self, v: &[f64]) -> Vec<f64> {
        let n = self.dim;
        (0..n).map(|i| dot(&self.data[i * n..(i + 1) * n], v)).collect()
    }

    /// True iff `M − αI` is positive semidefinite up to the fixed tolerance.
    pub fn loewner_check(&self, alpha: f64) -> bool {
        loewner_check(self, alpha)
    }
}

/// `⟨Mv, v⟩`.
pub fn metric_norm_sq(m: &MetricMatrix, v: &[f64]) -> Result<f64> {
    let mv = m.apply(v)?;
    Ok(dot(&mv, v))
}

/// True iff `M − αI` has smallest eigenvalue `≥ −1e-10·max(1, ‖M‖)`.
pub fn loewner_check(m: &MetricMatrix, alpha: f64) -> bool {
    m.min_eig - alpha >= -PSD_TOL * m.norm.max(1.0)
}

/// Smallest eigenvalue of a symmetric table, used for admissibility slack.
pub fn min_eigenvalue(a: &[f64], n: usize) -> f64 {
    symmetric_eigenvalues(a, n).first().copied().unwrap_or(0.0)
}
