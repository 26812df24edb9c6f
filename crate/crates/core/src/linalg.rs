//! Dense real kernels shared by every other module.
//!
//! Matrices and vectors are plain `nalgebra` dynamic types. Singular value
//! decompositions go through `faer`, whose SVD stays accurate on rank-deficient
//! input. Every public entry point rejects non-finite input so that NaN/Inf
//! never propagates silently into projections or spectral quantities.

use nalgebra::{DMatrix, DVector, Schur, SymmetricEigen};

use crate::error::{Error, Result};

pub type Matrix = DMatrix<f64>;
pub type Vector = DVector<f64>;

/// Relative singular-value cutoff used for pseudoinverses and projectors.
pub const PINV_TOL: f64 = 1e-12;

/// Matrices above this order switch from a full eigendecomposition to an
/// iterative spectral-radius estimate.
pub const DENSE_EIGEN_LIMIT: usize = 512;

pub fn ensure_finite_matrix(a: &Matrix, what: &str) -> Result<()> {
    if a.nrows() == 0 || a.ncols() == 0 {
        return Err(Error::InvalidInput(format!(
            "{what} has an empty dimension"
        )));
    }
    if a.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(Error::InvalidInput(format!(
            "{what} has non-finite entries"
        )))
    }
}

pub fn ensure_finite_vector(v: &Vector, what: &str) -> Result<()> {
    if v.is_empty() {
        return Err(Error::InvalidInput(format!("{what} is empty")));
    }
    if v.iter().all(|x| x.is_finite()) {
        Ok(())
    } else {
        Err(Error::InvalidInput(format!(
            "{what} has non-finite entries"
        )))
    }
}

fn to_faer(a: &Matrix) -> faer::Mat<f64> {
    faer::Mat::from_fn(a.nrows(), a.ncols(), |i, j| a[(i, j)])
}

/// Thin SVD `a = U diag(s) Vᵀ`, returned as `(U, s, V)`.
fn thin_svd(a: &Matrix) -> Result<(Matrix, Vec<f64>, Matrix)> {
    let svd = to_faer(a)
        .thin_svd()
        .map_err(|e| Error::InvalidInput(format!("SVD did not converge: {e:?}")))?;
    let (u, v) = (svd.U(), svd.V());
    let k = svd.S().dim();
    let s = (0..k).map(|i| svd.S()[i]).collect();
    Ok((
        Matrix::from_fn(u.nrows(), k, |i, j| u[(i, j)]),
        s,
        Matrix::from_fn(v.nrows(), k, |i, j| v[(i, j)]),
    ))
}

fn singular_values(a: &Matrix) -> Result<Vec<f64>> {
    if a.nrows() == 0 || a.ncols() == 0 {
        return Ok(Vec::new());
    }
    to_faer(a)
        .singular_values()
        .map_err(|e| Error::InvalidInput(format!("SVD did not converge: {e:?}")))
}

fn ensure_tol(tol: f64) -> Result<()> {
    if tol.is_finite() && tol > 0.0 {
        Ok(())
    } else {
        Err(Error::InvalidInput(format!(
            "tolerance must be positive, got {tol}"
        )))
    }
}

/// Moore–Penrose pseudoinverse. Singular values below `tol * sigma_max` are
/// treated as zero.
pub fn pseudoinverse(a: &Matrix, tol: f64) -> Result<Matrix> {
    ensure_finite_matrix(a, "matrix")?;
    ensure_tol(tol)?;
    let (u, sv, v) = thin_svd(a)?;
    let sigma_max = sv.iter().cloned().fold(0.0, f64::max);
    let cutoff = tol * sigma_max;

    let mut out = Matrix::zeros(a.ncols(), a.nrows());
    for (k, &s) in sv.iter().enumerate() {
        if s > cutoff && s > 0.0 {
            // out += v_k * u_k^T / s
            out.ger(1.0 / s, &v.column(k), &u.column(k), 1.0);
        }
    }
    Ok(out)
}

/// Numerical rank with relative singular-value cutoff.
pub fn rank(a: &Matrix, tol: f64) -> Result<usize> {
    ensure_finite_matrix(a, "matrix")?;
    ensure_tol(tol)?;
    let sv = singular_values(a)?;
    let sigma_max = sv.iter().cloned().fold(0.0, f64::max);
    if sigma_max == 0.0 {
        return Ok(0);
    }
    Ok(sv.iter().filter(|&&s| s > tol * sigma_max).count())
}

/// Euclidean projection of `x` onto `{y : H y = z}`.
///
/// Fails when the projected point misses the set, i.e. when
/// `|H Π(x) - z| > tol (1 + |z|)`.
pub fn affine_projection(h: &Matrix, z: &Vector, x: &Vector, tol: f64) -> Result<Vector> {
    ensure_finite_matrix(h, "H")?;
    ensure_finite_vector(z, "z")?;
    ensure_finite_vector(x, "x")?;
    if h.ncols() != x.len() || h.nrows() != z.len() {
        return Err(Error::Shape(format!(
            "H is {}x{}, z has {}, x has {}",
            h.nrows(),
            h.ncols(),
            z.len(),
            x.len()
        )));
    }
    let pinv = pseudoinverse(h, PINV_TOL)?;
    let projected = x - &pinv * (h * x - z);
    let residual = (h * &projected - z).norm();
    let bound = tol * (1.0 + z.norm());
    if residual > bound {
        return Err(Error::Infeasible { residual, bound });
    }
    Ok(projected)
}

/// Orthogonal projector onto `kernel(H)`, i.e. `I - H^T (H^T)^+`.
pub fn kernel_projector(h: &Matrix, tol: f64) -> Result<Matrix> {
    ensure_finite_matrix(h, "H")?;
    let pinv = pseudoinverse(h, tol)?;
    let m = h.ncols();
    let p = Matrix::identity(m, m) - pinv * h;
    Ok(symmetrize(&p))
}

pub fn symmetrize(a: &Matrix) -> Matrix {
    (a + a.transpose()) * 0.5
}

pub fn kronecker(a: &Matrix, b: &Matrix) -> Result<Matrix> {
    let rows = a.nrows().checked_mul(b.nrows());
    let cols = a.ncols().checked_mul(b.ncols());
    match (rows, cols) {
        (Some(r), Some(c)) if r.checked_mul(c).is_some() => {}
        _ => {
            return Err(Error::Size(format!(
                "kronecker of {}x{} and {}x{} overflows",
                a.nrows(),
                a.ncols(),
                b.nrows(),
                b.ncols()
            )))
        }
    }
    let (rb, cb) = (b.nrows(), b.ncols());
    let mut out = Matrix::zeros(a.nrows() * rb, a.ncols() * cb);
    for i in 0..a.nrows() {
        for j in 0..a.ncols() {
            let aij = a[(i, j)];
            if aij == 0.0 {
                continue;
            }
            let mut block = out.view_mut((i * rb, j * cb), (rb, cb));
            block.zip_apply(b, |o, bv| *o = aij * bv);
        }
    }
    Ok(out)
}

/// `W ⊗ I_m` without materialising the identity.
pub fn kron_identity(w: &Matrix, m: usize) -> Result<Matrix> {
    kronecker(w, &Matrix::identity(m, m))
}

/// Block-diagonal matrix from square blocks.
pub fn block_diag(blocks: &[Matrix]) -> Matrix {
    let rows: usize = blocks.iter().map(|b| b.nrows()).sum();
    let cols: usize = blocks.iter().map(|b| b.ncols()).sum();
    let mut out = Matrix::zeros(rows, cols);
    let (mut r, mut c) = (0, 0);
    for b in blocks {
        out.view_mut((r, c), (b.nrows(), b.ncols())).copy_from(b);
        r += b.nrows();
        c += b.ncols();
    }
    out
}

pub fn is_symmetric(a: &Matrix, rel_tol: f64) -> bool {
    if a.nrows() != a.ncols() {
        return false;
    }
    let scale = a.amax().max(f64::MIN_POSITIVE);
    let n = a.nrows();
    for i in 0..n {
        for j in (i + 1)..n {
            if (a[(i, j)] - a[(j, i)]).abs() > rel_tol * scale {
                return false;
            }
        }
    }
    true
}

/// Largest singular value.
pub fn operator_norm(a: &Matrix) -> f64 {
    singular_values(a)
        .map(|sv| sv.into_iter().fold(0.0, f64::max))
        .unwrap_or(f64::NAN)
}

/// `max |λ|` over the eigenvalues of `a`.
///
/// Symmetric input goes through a symmetric eigensolver, anything else through
/// a real Schur decomposition. Above [`DENSE_EIGEN_LIMIT`] an iterative
/// estimate converged to relative tolerance `tol` is used instead.
pub fn spectral_radius(a: &Matrix, tol: f64) -> Result<f64> {
    ensure_finite_matrix(a, "matrix")?;
    ensure_tol(tol)?;
    if a.nrows() != a.ncols() {
        return Err(Error::Shape(format!(
            "spectral radius needs a square matrix, got {}x{}",
            a.nrows(),
            a.ncols()
        )));
    }
    let symmetric = is_symmetric(a, 1e-12);
    if a.nrows() <= DENSE_EIGEN_LIMIT {
        if symmetric {
            let eig = SymmetricEigen::new(symmetrize(a));
            return Ok(eig.eigenvalues.iter().fold(0.0, |acc, l| acc.max(l.abs())));
        }
        if let Some(schur) = Schur::try_new(a.clone(), f64::EPSILON, 10_000) {
            return Ok(schur
                .complex_eigenvalues()
                .iter()
                .fold(0.0, |acc, l| acc.max(l.norm())));
        }
    }
    if symmetric {
        Ok(symmetric_power_radius(a, tol))
    } else {
        Ok(gelfand_radius(a, tol))
    }
}

/// Power iteration on `A^2` for symmetric `A`. Every eigenvalue of `A^2` is
/// nonnegative, so the dominant one is well defined even when `±λ` both occur.
fn symmetric_power_radius(a: &Matrix, tol: f64) -> f64 {
    let n = a.nrows();
    // deterministic, non-degenerate start vector
    let mut v = Vector::from_fn(n, |i, _| 1.0 + ((i as f64) * 0.618_033_988_7).fract());
    v.normalize_mut();
    let mut estimate = 0.0;
    for _ in 0..100_000 {
        let w = a * (a * &v);
        let lambda = v.dot(&w);
        let norm = w.norm();
        if norm == 0.0 {
            return 0.0;
        }
        v = w / norm;
        if (lambda - estimate).abs() <= tol * lambda.abs().max(f64::MIN_POSITIVE) {
            return lambda.max(0.0).sqrt();
        }
        estimate = lambda;
    }
    estimate.max(0.0).sqrt()
}

/// Gelfand's formula `sr(A) = lim |A^k|^(1/k)` evaluated by repeated squaring
/// with renormalisation.
fn gelfand_radius(a: &Matrix, tol: f64) -> f64 {
    let mut b = a.clone();
    let mut log_scale = 0.0_f64;
    let mut k = 1.0_f64;
    let mut prev = f64::INFINITY;
    for _ in 0..40 {
        let nrm = b.norm();
        if nrm == 0.0 {
            return 0.0;
        }
        let est = ((nrm.ln() + log_scale) / k).exp();
        if (est - prev).abs() <= tol * est {
            return est;
        }
        prev = est;
        b /= nrm;
        log_scale = 2.0 * (log_scale + nrm.ln());
        b = &b * &b;
        k *= 2.0;
    }
    prev
}

/// Mixed matrix norm: infinity norm of the matrix of per-block 2-norms, for a
/// square matrix split into `block × block` blocks.
pub fn mixed_matrix_norm(q: &Matrix, block: usize) -> Result<f64> {
    ensure_finite_matrix(q, "matrix")?;
    if block == 0 || q.nrows() != q.ncols() || !q.nrows().is_multiple_of(block) {
        return Err(Error::Shape(format!(
            "{}x{} matrix does not split into {block}x{block} blocks",
            q.nrows(),
            q.ncols()
        )));
    }
    let n = q.nrows() / block;
    let mut best = 0.0_f64;
    for i in 0..n {
        let mut row_sum = 0.0;
        for j in 0..n {
            let blk = q.view((i * block, j * block), (block, block)).clone_owned();
            if blk.iter().any(|v| *v != 0.0) {
                row_sum += operator_norm(&blk);
            }
        }
        best = best.max(row_sum);
    }
    Ok(best)
}
