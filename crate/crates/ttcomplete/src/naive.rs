//! Slow reference implementations used to validate the fast paths.
//!
//! Everything here is written with explicit loops and plain index
//! arithmetic, deliberately avoiding the production code paths it is used
//! to check.  Scope: desk-scale inputs inside tests.

use nalgebra::DMatrix;

use crate::block::MatrixBlock;
use crate::tt::TTRep;

/// Slice-product of two blocks by explicit loops: the result at pair
/// `(i, j) -> i·n2 + j` is the matrix product `a(i) · b(j)`.
pub fn kron_by_loops(a: &MatrixBlock, b: &MatrixBlock) -> MatrixBlock {
    assert_eq!(a.cols(), b.rows(), "inner dimensions must agree");
    let mut slices = Vec::with_capacity(a.len() * b.len());
    for i in 0..a.len() {
        for j in 0..b.len() {
            let (sa, sb) = (a.slice(i), b.slice(j));
            let mut m = DMatrix::zeros(a.rows(), b.cols());
            for r in 0..a.rows() {
                for c in 0..b.cols() {
                    let mut acc = 0.0;
                    for k in 0..a.cols() {
                        acc += sa[(r, k)] * sb[(k, c)];
                    }
                    m[(r, c)] = acc;
                }
            }
            slices.push(m);
        }
    }
    MatrixBlock::new(slices).expect("consistent shapes by construction")
}

/// Dense tensor in row-major order via the d-fold slice-product, fully
/// independent of `TTRep::materialize` and `TTRep::evaluate`.
pub fn materialize_by_kron(tt: &TTRep) -> Vec<f64> {
    let mut acc = tt.block(0).clone();
    for s in 1..tt.order() {
        acc = kron_by_loops(&acc, tt.block(s));
    }
    // acc now has one 1x1 slice per tensor entry, in row-major order.
    (0..acc.len()).map(|i| acc.slice(i)[(0, 0)]).collect()
}

/// The part of the chain left of mode `s`, as the left unfolding of the
/// slice-product of blocks `0 .. s`: a `(n_0···n_{s-1}) × r_s` matrix whose
/// rows run through the prefix indices in row-major order.
pub fn chain_left_of(tt: &TTRep, s: usize) -> DMatrix<f64> {
    let mut acc = MatrixBlock::from_fn(1, 1, 1, |_, _, _| 1.0);
    for t in 0..s {
        acc = kron_by_loops(&acc, tt.block(t));
    }
    // Left unfolding by hand; every slice is 1 x r.
    let r = acc.cols();
    let mut out = DMatrix::zeros(acc.len(), r);
    for i in 0..acc.len() {
        for c in 0..r {
            out[(i, c)] = acc.slice(i)[(0, c)];
        }
    }
    out
}

/// The part of the chain right of mode `s`, as the right unfolding of the
/// slice-product of blocks `s+1 .. d`: an `r_{s+1} × (n_{s+1}···n_{d-1})`
/// matrix whose columns run through the suffix indices in row-major order.
pub fn chain_right_of(tt: &TTRep, s: usize) -> DMatrix<f64> {
    let d = tt.order();
    let mut acc = MatrixBlock::from_fn(1, tt.block(s).cols(), tt.block(s).cols(), |_, r, c| {
        if r == c {
            1.0
        } else {
            0.0
        }
    });
    for t in s + 1..d {
        acc = kron_by_loops(&acc, tt.block(t));
    }
    let rows = acc.rows();
    let mut out = DMatrix::zeros(rows, acc.len());
    for i in 0..acc.len() {
        for r in 0..rows {
            out[(r, i)] = acc.slice(i)[(r, 0)];
        }
    }
    out
}

/// Mode-`s` block matricization of a dense row-major tensor: a family of
/// `n_s` matrices indexed by `j`, with rows running through the prefix
/// indices and columns through the suffix indices, both row-major.
pub fn dense_block_matricization(dense: &[f64], dims: &[usize], s: usize) -> Vec<DMatrix<f64>> {
    let n_left: usize = dims[..s].iter().product();
    let n_right: usize = dims[s + 1..].iter().product();
    let n_s = dims[s];
    assert_eq!(dense.len(), n_left * n_s * n_right);
    (0..n_s)
        .map(|j| {
            DMatrix::from_fn(n_left, n_right, |p, q| {
                dense[(p * n_s + j) * n_right + q]
            })
        })
        .collect()
}

/// Sum-of-squares residual `½ Σ_p (m_p − A^G_p)²` over flat sample indices.
pub fn half_squared_residual(tt: &TTRep, flat_idx: &[u32], vals: &[f64]) -> f64 {
    let d = tt.order();
    let count = vals.len();
    assert_eq!(flat_idx.len(), d * count);
    let mut acc = 0.0;
    for p in 0..count {
        let idx: Vec<usize> = (0..d).map(|t| flat_idx[p * d + t] as usize).collect();
        let a = tt.evaluate(&idx).expect("sample index in range");
        let r = vals[p] - a;
        acc += 0.5 * r * r;
    }
    acc
}

/// Central finite-difference gradient of `½ Σ_p (m_p − A^G_p)²` with respect
/// to the entries of block `s`, returned as a block of the same shape.
pub fn fd_residual_gradient(
    tt: &TTRep,
    flat_idx: &[u32],
    vals: &[f64],
    s: usize,
    step: f64,
) -> MatrixBlock {
    let b = tt.block(s);
    let (n, rows, cols) = (b.len(), b.rows(), b.cols());
    let mut grad = MatrixBlock::zeros(n, rows, cols);
    let mut work = tt.clone();
    for i in 0..n {
        for r in 0..rows {
            for c in 0..cols {
                let orig = work.block(s).slice(i)[(r, c)];
                work.block_mut(s).slice_mut(i)[(r, c)] = orig + step;
                let plus = half_squared_residual(&work, flat_idx, vals);
                work.block_mut(s).slice_mut(i)[(r, c)] = orig - step;
                let minus = half_squared_residual(&work, flat_idx, vals);
                work.block_mut(s).slice_mut(i)[(r, c)] = orig;
                grad.slice_mut(i)[(r, c)] = (plus - minus) / (2.0 * step);
            }
        }
    }
    grad
}

/// Singular values of the dense split matricization after mode `s0`
/// (rows: modes `0..=s0`, columns: the rest), both groups row-major.
pub fn dense_split_singular_values(dense: &[f64], dims: &[usize], s0: usize) -> Vec<f64> {
    let n_rows: usize = dims[..=s0].iter().product();
    let n_cols: usize = dims[s0 + 1..].iter().product();
    assert_eq!(dense.len(), n_rows * n_cols);
    let m = DMatrix::from_fn(n_rows, n_cols, |r, c| dense[r * n_cols + c]);
    let mut sv: Vec<f64> = m.svd(false, false).singular_values.iter().cloned().collect();
    sv.sort_by(|a, b| b.partial_cmp(a).unwrap());
    sv
}
