//! Thin wrappers around dense factorizations.
//!
//! Everything here operates on small matrices (ranks and slice counts are
//! desk-scale), so plain `nalgebra` factorizations are sufficient.

use nalgebra::{DMatrix, DVector};

/// Relative cutoff below which a singular value or pivot counts as zero.
pub(crate) const RANK_CUTOFF: f64 = 1e-12;

/// Thin QR: `a = q * r` with `q` of shape `m x k`, `r` of shape `k x n`,
/// `k = min(m, n)`, and `q` having orthonormal columns.
pub(crate) fn thin_qr(a: DMatrix<f64>) -> (DMatrix<f64>, DMatrix<f64>) {
    let qr = a.qr();
    (qr.q(), qr.r())
}

/// Thin LQ: `a = l * q` with `l` of shape `m x k`, `q` of shape `k x n`,
/// `k = min(m, n)`, and `q` having orthonormal rows.
pub(crate) fn thin_lq(a: DMatrix<f64>) -> (DMatrix<f64>, DMatrix<f64>) {
    let (qt, rt) = thin_qr(a.transpose());
    (rt.transpose(), qt.transpose())
}

/// Minimum-norm least-squares solution of `a x = b`.
///
/// Tall well-conditioned systems go through Householder QR with triangular
/// back substitution; rank-deficient or underdetermined systems fall back to
/// an SVD pseudo-solve, which also yields the minimum-norm solution.
pub(crate) fn lstsq_min_norm(a: DMatrix<f64>, b: DVector<f64>) -> DVector<f64> {
    let (m, n) = a.shape();
    debug_assert_eq!(m, b.len());
    if m >= n {
        let qr = a.qr();
        let mut qtb = b;
        qr.q_tr_mul(&mut qtb);
        let r = qr.unpack_r();
        let c = DVector::from(qtb.rows(0, n));
        let dmax = (0..n).map(|i| r[(i, i)].abs()).fold(0.0_f64, f64::max);
        let dmin = (0..n).map(|i| r[(i, i)].abs()).fold(f64::INFINITY, f64::min);
        if dmax > 0.0 && dmin > RANK_CUTOFF * dmax {
            if let Some(x) = r.view((0, 0), (n, n)).solve_upper_triangular(&c) {
                return x;
            }
        }
        // Deficient diagonal: min-norm through the SVD of the small factor.
        // Without column pivoting the x-norm is unchanged, so this equals the
        // global minimum-norm solution.
        svd_solve(r, c)
    } else {
        svd_solve(a, b)
    }
}

fn svd_solve(a: DMatrix<f64>, b: DVector<f64>) -> DVector<f64> {
    let n = a.ncols();
    let svd = a.svd(true, true);
    let smax = svd.singular_values.iter().cloned().fold(0.0_f64, f64::max);
    match svd.solve(&b, RANK_CUTOFF * smax.max(f64::MIN_POSITIVE)) {
        Ok(x) => DVector::from(x.column(0).clone_owned()),
        Err(_) => DVector::zeros(n),
    }
}
