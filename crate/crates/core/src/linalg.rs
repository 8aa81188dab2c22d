//! Polar decomposition and random points on the constraint manifolds.

use nalgebra::{DMatrix, DVector};
use rand::Rng;

use crate::error::{dim_err, Result};
use crate::rng;

/// `Y = Q H` with `Q` orthonormal-column and `H` symmetric PSD.
#[derive(Debug, Clone)]
pub struct PolarFactors {
    pub q: DMatrix<f64>,
    pub h: DMatrix<f64>,
    /// Smallest eigenvalue of `H` (equivalently, smallest singular value of `Y`).
    pub sigma_min: f64,
}

/// Thin SVD `Y = U diag(σ) Vᵀ` with σ sorted in decreasing order.
#[derive(Debug, Clone)]
pub struct ThinSvd {
    pub u: DMatrix<f64>,
    pub sigma: DVector<f64>,
    pub v: DMatrix<f64>,
}

const JACOBI_MAX_SWEEPS: usize = 80;

/// One-sided (Hestenes) Jacobi SVD for `n >= m`.
///
/// Left singular vectors for numerically zero singular values are completed to
/// an orthonormal set from the standard basis. Each left singular vector has
/// its largest-magnitude entry made positive, with the matching right vector
/// flipped alongside.
pub fn thin_svd(y: &DMatrix<f64>) -> Result<ThinSvd> {
    let (n, m) = y.shape();
    if n < m {
        return Err(dim_err(format!("thin SVD needs rows >= cols, got {n}x{m}")));
    }
    let mut w = y.clone();
    let mut v = DMatrix::<f64>::identity(m, m);
    let tol = f64::EPSILON * (n as f64);

    for _ in 0..JACOBI_MAX_SWEEPS {
        let mut rotated = false;
        for p in 0..m {
            for q in p + 1..m {
                let (alpha, beta, gamma) = {
                    let wp = w.column(p);
                    let wq = w.column(q);
                    (wp.norm_squared(), wq.norm_squared(), wp.dot(&wq))
                };
                if gamma == 0.0 || gamma.abs() <= tol * (alpha * beta).sqrt() {
                    continue;
                }
                rotated = true;
                let zeta = (beta - alpha) / (2.0 * gamma);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                rotate_columns(&mut w, p, q, c, s);
                rotate_columns(&mut v, p, q, c, s);
            }
        }
        if !rotated {
            break;
        }
    }

    let mut sigma: Vec<f64> = (0..m).map(|j| w.column(j).norm()).collect();
    let mut order: Vec<usize> = (0..m).collect();
    order.sort_by(|&a, &b| sigma[b].total_cmp(&sigma[a]).then(a.cmp(&b)));

    let smax = order.first().map(|&j| sigma[j]).unwrap_or(0.0);
    let zero_tol = smax * f64::EPSILON * (n.max(m) as f64);

    let mut u = DMatrix::<f64>::zeros(n, m);
    let mut vs = DMatrix::<f64>::zeros(m, m);
    let mut sorted_sigma = vec![0.0; m];
    let mut rank = 0;
    for (dst, &src) in order.iter().enumerate() {
        vs.set_column(dst, &v.column(src));
        if sigma[src] > zero_tol && sigma[src] > 0.0 {
            u.set_column(dst, &(w.column(src) / sigma[src]));
            sorted_sigma[dst] = sigma[src];
            rank += 1;
        } else {
            sigma[src] = 0.0;
        }
    }
    // Re-orthogonalize in decreasing-σ order; fills the null part as well.
    complete_orthonormal(&mut u, rank);

    for j in 0..m {
        let (imax, _) = u
            .column(j)
            .iter()
            .enumerate()
            .fold((0, 0.0f64), |acc, (i, &x)| if x.abs() > acc.1 { (i, x.abs()) } else { acc });
        if u[(imax, j)] < 0.0 {
            u.column_mut(j).neg_mut();
            vs.column_mut(j).neg_mut();
        }
    }

    Ok(ThinSvd {
        u,
        sigma: DVector::from_vec(sorted_sigma),
        v: vs,
    })
}

fn rotate_columns(a: &mut DMatrix<f64>, p: usize, q: usize, c: f64, s: f64) {
    for i in 0..a.nrows() {
        let ap = a[(i, p)];
        let aq = a[(i, q)];
        a[(i, p)] = c * ap - s * aq;
        a[(i, q)] = s * ap + c * aq;
    }
}

/// Orthonormalize the first `filled` columns in place (twice-iterated
/// modified Gram-Schmidt) and replace the rest with standard basis vectors
/// orthogonalized against them.
fn complete_orthonormal(u: &mut DMatrix<f64>, filled: usize) {
    let (n, m) = u.shape();
    let mut basis = 0..n;
    for j in 0..m {
        let mut ok = j < filled && orthogonalize_column(u, j);
        while !ok {
            let b = basis.next().expect("rows >= cols leaves room for a completion");
            u.column_mut(j).fill(0.0);
            u[(b, j)] = 1.0;
            ok = orthogonalize_column(u, j);
        }
    }
}

/// Project column `j` off columns `0..j` and normalize; false if nothing is left.
fn orthogonalize_column(u: &mut DMatrix<f64>, j: usize) -> bool {
    for _ in 0..2 {
        for p in 0..j {
            let d = u.column(p).dot(&u.column(j));
            let cp = u.column(p).clone_owned();
            u.column_mut(j).axpy(-d, &cp, 1.0);
        }
    }
    let nrm = u.column(j).norm();
    if nrm > 1e-8 {
        u.column_mut(j).unscale_mut(nrm);
        true
    } else {
        false
    }
}

/// Polar decomposition through the thin SVD: `Q = U Vᵀ`, `H = V Σ Vᵀ`.
pub fn polar_decompose(y: &DMatrix<f64>) -> Result<PolarFactors> {
    let svd = thin_svd(y)?;
    let q = &svd.u * svd.v.transpose();
    let vs = DMatrix::from_fn(svd.v.nrows(), svd.v.ncols(), |i, j| svd.v[(i, j)] * svd.sigma[j]);
    let h = symmetric_part(&(vs * svd.v.transpose()));
    let sigma_min = svd.sigma.iter().copied().fold(f64::INFINITY, f64::min);
    Ok(PolarFactors {
        q,
        h,
        sigma_min: if sigma_min.is_finite() { sigma_min } else { 0.0 },
    })
}

/// `(M + Mᵀ) / 2`.
pub fn symmetric_part(m: &DMatrix<f64>) -> DMatrix<f64> {
    (m + m.transpose()) * 0.5
}

/// Q factor of a thin QR with nonnegative `R` diagonal (modified Gram-Schmidt,
/// iterated twice). Also serves as the QR retraction on the Stiefel manifold.
pub fn orthonormalize(a: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let (n, r) = a.shape();
    if r > n {
        return Err(dim_err(format!("cannot orthonormalize {r} columns in R^{n}")));
    }
    let mut q = a.clone();
    for j in 0..r {
        for _ in 0..2 {
            for p in 0..j {
                let d = q.column(p).dot(&q.column(j));
                let cp = q.column(p).clone_owned();
                q.column_mut(j).axpy(-d, &cp, 1.0);
            }
        }
        let nrm = q.column(j).norm();
        if nrm == 0.0 {
            return Err(dim_err(format!("column {j} is linearly dependent")));
        }
        q.column_mut(j).unscale_mut(nrm);
    }
    Ok(q)
}

/// Scale each column to unit length.
pub fn normalize_columns(a: &DMatrix<f64>) -> DMatrix<f64> {
    let mut out = a.clone();
    for mut c in out.column_iter_mut() {
        let nrm = c.norm();
        if nrm > 0.0 {
            c.unscale_mut(nrm);
        }
    }
    out
}

/// Random `n×r` matrix with orthonormal columns: QR of a standard Gaussian
/// matrix with the triangular factor's diagonal made nonnegative.
pub fn random_orthonormal<R: Rng + ?Sized>(n: usize, r: usize, rng: &mut R) -> Result<DMatrix<f64>> {
    if r > n {
        return Err(dim_err(format!("requested {r} orthonormal columns in R^{n}")));
    }
    loop {
        let g = DMatrix::from_vec(n, r, rng::gaussian_vec(rng, n * r));
        if let Ok(q) = orthonormalize(&g) {
            return Ok(q);
        }
    }
}

/// Random `n×r` matrix whose columns are independent uniform unit vectors.
pub fn random_unit_columns<R: Rng + ?Sized>(n: usize, r: usize, rng: &mut R) -> Result<DMatrix<f64>> {
    if r > n {
        return Err(dim_err(format!("requested {r} columns in R^{n}")));
    }
    let mut out = DMatrix::zeros(n, r);
    for j in 0..r {
        out.set_column(j, &random_unit_vector(n, rng));
    }
    Ok(out)
}

pub fn random_unit_vector<R: Rng + ?Sized>(n: usize, rng: &mut R) -> DVector<f64> {
    loop {
        let v = DVector::from_vec(rng::gaussian_vec(rng, n));
        let nrm = v.norm();
        if nrm > 0.0 {
            return v / nrm;
        }
    }
}

/// `‖QᵀQ − I‖_F`.
pub fn orthonormality_defect(q: &DMatrix<f64>) -> f64 {
    let r = q.ncols();
    (q.transpose() * q - DMatrix::<f64>::identity(r, r)).norm()
}
