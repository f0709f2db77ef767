//! Dense kernels and proximal operators.
//!
//! Everything here is a pure function of its inputs. Matrices are
//! `nalgebra::DMatrix<f64>`; every kernel rejects non-finite input and
//! checks its own output, so a NaN can never leak silently into the solver.

use log::warn;
use nalgebra::DMatrix;

use crate::error::{Error, Result};

pub type DenseMatrix = DMatrix<f64>;

/// Singular values below this fraction of the largest one are treated as zero
/// when flagging rank deficiency.
const RANK_TOL: f64 = 1e-12;

/// Eigenvalue pairs of a Sylvester operator closer to zero than this are singular.
const SYLVESTER_SINGULAR_TOL: f64 = 1e-12;

/// Relative asymmetry tolerated by [`sym_eig`] before the input is rejected.
const SYMMETRY_TOL: f64 = 1e-8;

const MAX_SWEEPS: usize = 100_000;

pub fn ensure_finite(m: &DenseMatrix, what: &'static str) -> Result<()> {
    if m.iter().all(|x| x.is_finite()) {
        Ok(())
    } else {
        Err(Error::NonFinite(what))
    }
}

fn ensure_nonempty(m: &DenseMatrix, what: &str) -> Result<()> {
    if m.nrows() == 0 || m.ncols() == 0 {
        return Err(Error::contract(format!("{what}: empty {}x{} matrix", m.nrows(), m.ncols())));
    }
    Ok(())
}

/// Largest absolute entry (the entrywise infinity norm). Zero for an empty matrix.
pub fn max_abs(m: &DenseMatrix) -> f64 {
    m.iter().fold(0.0_f64, |acc, x| acc.max(x.abs()))
}

/// Sum of the Euclidean norms of the columns.
pub fn l21_norm(m: &DenseMatrix) -> f64 {
    m.column_iter().map(|c| c.norm()).sum()
}

/// Sum of absolute entries.
pub fn l1_norm(m: &DenseMatrix) -> f64 {
    m.iter().map(|x| x.abs()).sum()
}

/// Thin SVD `m = u * diag(s) * vt` with `s` sorted in nonincreasing order.
#[derive(Debug, Clone)]
pub struct SvdFactors {
    pub u: DenseMatrix,
    pub s: Vec<f64>,
    pub vt: DenseMatrix,
}

impl SvdFactors {
    pub fn reconstruct(&self) -> DenseMatrix {
        let mut us = self.u.clone();
        for (j, s) in self.s.iter().enumerate() {
            us.column_mut(j).scale_mut(*s);
        }
        us * &self.vt
    }
}

pub fn svd(m: &DenseMatrix) -> Result<SvdFactors> {
    ensure_nonempty(m, "svd")?;
    ensure_finite(m, "svd input")?;
    let (rows, cols) = m.shape();
    let raw = m
        .clone()
        .try_svd(true, true, f64::EPSILON, MAX_SWEEPS)
        .ok_or(Error::NoConvergence { op: "svd", rows, cols })?;
    let (u, vt) = match (raw.u, raw.v_t) {
        (Some(u), Some(vt)) => (u, vt),
        _ => return Err(Error::NoConvergence { op: "svd", rows, cols }),
    };
    let values: Vec<f64> = raw.singular_values.iter().copied().collect();

    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[b].total_cmp(&values[a]));

    let r = values.len();
    let u = DenseMatrix::from_fn(rows, r, |i, j| u[(i, order[j])]);
    let vt = DenseMatrix::from_fn(r, cols, |i, j| vt[(order[i], j)]);
    let s = order.iter().map(|&i| values[i].max(0.0)).collect();
    let out = SvdFactors { u, s, vt };
    ensure_finite(&out.u, "svd output")?;
    ensure_finite(&out.vt, "svd output")?;
    Ok(out)
}

/// Eigendecomposition `m = q * diag(lambda) * q^T` of a symmetric matrix,
/// eigenvalues in nondecreasing order.
#[derive(Debug, Clone)]
pub struct SymEigFactors {
    pub q: DenseMatrix,
    pub lambda: Vec<f64>,
}

impl SymEigFactors {
    pub fn reconstruct(&self) -> DenseMatrix {
        let mut ql = self.q.clone();
        for (j, l) in self.lambda.iter().enumerate() {
            ql.column_mut(j).scale_mut(*l);
        }
        ql * self.q.transpose()
    }
}

pub fn sym_eig(m: &DenseMatrix) -> Result<SymEigFactors> {
    ensure_nonempty(m, "sym_eig")?;
    if !m.is_square() {
        return Err(Error::contract(format!(
            "sym_eig: expected a square matrix, got {}x{}",
            m.nrows(),
            m.ncols()
        )));
    }
    ensure_finite(m, "sym_eig input")?;
    let scale = max_abs(m);
    let defect = max_abs(&(m - m.transpose()));
    if defect > SYMMETRY_TOL * scale {
        return Err(Error::contract(format!(
            "sym_eig: matrix is not symmetric (max |m - m^T| = {defect:e}, max |m| = {scale:e})"
        )));
    }
    let n = m.nrows();
    let sym = (m + m.transpose()) * 0.5;
    let raw = sym
        .try_symmetric_eigen(f64::EPSILON, MAX_SWEEPS)
        .ok_or(Error::NoConvergence { op: "sym_eig", rows: n, cols: n })?;

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| raw.eigenvalues[a].total_cmp(&raw.eigenvalues[b]));
    let q = DenseMatrix::from_fn(n, n, |i, j| raw.eigenvectors[(i, order[j])]);
    let lambda = order.iter().map(|&i| raw.eigenvalues[i]).collect();
    ensure_finite(&q, "sym_eig output")?;
    Ok(SymEigFactors { q, lambda })
}

/// Solves `a * h + h * b = c` for symmetric `a` (k x k) and `b` (m x m).
///
/// Both operators are diagonalized, `c` is rotated into the joint eigenbasis,
/// divided entrywise by `alpha_i + beta_j`, and rotated back.
pub fn solve_sylvester(a: &DenseMatrix, b: &DenseMatrix, c: &DenseMatrix) -> Result<DenseMatrix> {
    if c.nrows() != a.nrows() || c.ncols() != b.nrows() {
        return Err(Error::contract(format!(
            "solve_sylvester: c is {}x{} but a is {}x{} and b is {}x{}",
            c.nrows(),
            c.ncols(),
            a.nrows(),
            a.ncols(),
            b.nrows(),
            b.ncols()
        )));
    }
    ensure_finite(c, "solve_sylvester rhs")?;
    let ea = sym_eig(a)?;
    let eb = sym_eig(b)?;

    let mut rotated = ea.q.transpose() * c * &eb.q;
    for j in 0..rotated.ncols() {
        for i in 0..rotated.nrows() {
            let (alpha, beta) = (ea.lambda[i], eb.lambda[j]);
            let denom = alpha + beta;
            if denom.abs() <= SYLVESTER_SINGULAR_TOL {
                return Err(Error::SingularSylvester { i, j, alpha, beta });
            }
            rotated[(i, j)] /= denom;
        }
    }
    let h = &ea.q * rotated * eb.q.transpose();
    ensure_finite(&h, "solve_sylvester output")?;
    Ok(h)
}

/// Row-orthonormal matrix `R = u * vt` maximizing `trace(R * k^T)`.
///
/// `k` must be r x c with `r <= c`. Rank-deficient input still yields a valid
/// row-orthonormal `R` (the maximizer is then not unique) and logs a warning.
pub fn orthogonal_procrustes(k: &DenseMatrix) -> Result<DenseMatrix> {
    ensure_nonempty(k, "orthogonal_procrustes")?;
    if k.nrows() > k.ncols() {
        return Err(Error::contract(format!(
            "orthogonal_procrustes: expected a wide matrix (rows <= cols), got {}x{}",
            k.nrows(),
            k.ncols()
        )));
    }
    let f = svd(k)?;
    let top = f.s.first().copied().unwrap_or(0.0);
    let smallest = f.s.last().copied().unwrap_or(0.0);
    if smallest <= RANK_TOL * top.max(1.0) {
        warn!(
            "orthogonal_procrustes: {}x{} input is rank deficient (smallest singular value {smallest:e})",
            k.nrows(),
            k.ncols()
        );
    }
    Ok(&f.u * &f.vt)
}

/// Entrywise shrinkage `(|x| - eta)_+ * sgn(x)`.
pub fn soft_threshold(m: &DenseMatrix, eta: f64) -> Result<DenseMatrix> {
    if !(eta >= 0.0) || !eta.is_finite() {
        return Err(Error::contract(format!("soft_threshold: eta must be finite and >= 0, got {eta}")));
    }
    ensure_finite(m, "soft_threshold input")?;
    Ok(m.map(|x| shrink(x, eta)))
}

#[inline]
pub(crate) fn shrink(x: f64, eta: f64) -> f64 {
    let mag = x.abs() - eta;
    if mag > 0.0 {
        mag.copysign(x)
    } else {
        0.0
    }
}

/// Proximal map of `tau * ||E||_{2,1}`: each column is shrunk toward zero by
/// `tau` in Euclidean norm, and columns with norm at most `tau` vanish.
pub fn col_l21_prox(g: &DenseMatrix, tau: f64) -> Result<DenseMatrix> {
    if !(tau > 0.0) || !tau.is_finite() {
        return Err(Error::contract(format!("col_l21_prox: tau must be finite and > 0, got {tau}")));
    }
    ensure_finite(g, "col_l21_prox input")?;
    let mut out = DenseMatrix::zeros(g.nrows(), g.ncols());
    for (j, col) in g.column_iter().enumerate() {
        let norm = col.norm();
        if norm > tau {
            out.set_column(j, &(col * ((norm - tau) / norm)));
        }
    }
    Ok(out)
}

#[derive(Debug, Clone)]
pub struct PcaReduction {
    /// `m x n` scores of the centered samples on the leading components.
    pub reduced: DenseMatrix,
    /// Variance captured by the kept components over the total variance.
    pub retained_variance: f64,
}

/// Projects the columns of `x` (features x samples), centered by the
/// feature-wise mean, onto the top `m` principal directions.
///
/// Each direction's sign is fixed so that its largest-magnitude loading is
/// positive, which makes the scores deterministic.
pub fn pca_reduce(x: &DenseMatrix, m: usize) -> Result<PcaReduction> {
    ensure_nonempty(x, "pca_reduce")?;
    ensure_finite(x, "pca_reduce input")?;
    let (d, n) = x.shape();
    let limit = d.min(n.saturating_sub(1));
    if m == 0 || m > limit {
        return Err(Error::contract(format!(
            "pca_reduce: component count {m} must lie in 1..={limit} for a {d}x{n} matrix"
        )));
    }
    let mean = x.column_mean();
    let mut centered = x.clone();
    for mut col in centered.column_iter_mut() {
        col -= &mean;
    }
    let total = centered.norm_squared();
    let f = svd(&centered)?;

    let mut basis = f.u.columns(0, m).into_owned();
    for mut col in basis.column_iter_mut() {
        let pivot = col.iter().copied().fold(0.0_f64, |best, v| if v.abs() > best.abs() { v } else { best });
        if pivot < 0.0 {
            col.neg_mut();
        }
    }
    let reduced = basis.transpose() * &centered;
    let kept: f64 = f.s[..m].iter().map(|s| s * s).sum();
    let retained_variance = if total > 0.0 { (kept / total).clamp(0.0, 1.0) } else { 1.0 };
    Ok(PcaReduction { reduced, retained_variance })
}

/// Solves `a * x = b` for symmetric positive definite `a` by Cholesky.
pub fn spd_solve(a: &DenseMatrix, b: &DenseMatrix) -> Result<DenseMatrix> {
    if !a.is_square() || a.nrows() != b.nrows() {
        return Err(Error::contract(format!(
            "spd_solve: a is {}x{}, b is {}x{}",
            a.nrows(),
            a.ncols(),
            b.nrows(),
            b.ncols()
        )));
    }
    ensure_finite(a, "spd_solve matrix")?;
    ensure_finite(b, "spd_solve rhs")?;
    let chol = a
        .clone()
        .cholesky()
        .ok_or(Error::NotPositiveDefinite { rows: a.nrows() })?;
    let x = chol.solve(b);
    ensure_finite(&x, "spd_solve output")?;
    Ok(x)
}
