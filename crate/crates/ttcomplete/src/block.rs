//! Matrix blocks: indexed families of equally sized matrices.
//!
//! A [`MatrixBlock`] of length `n` holds matrices `H(0), …, H(n-1)`, all of
//! shape `rows × cols`.  Tensor trains are chains of such blocks, one per
//! tensor mode; the slice-wise product of blocks generates tensor entries.
//!
//! Two unfoldings connect block calculus with ordinary matrix algebra:
//!
//! * [`left_unfolding`](MatrixBlock::left_unfolding) stacks the slices
//!   vertically into an `(n·rows) × cols` matrix,
//! * [`right_unfolding`](MatrixBlock::right_unfolding) concatenates them
//!   horizontally into a `rows × (n·cols)` matrix.
//!
//! They are related through slice-wise transposition:
//! `left_unfolding(H)ᵀ = right_unfolding(Hᵀ)`.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::linalg;

/// A family of `n` matrices of identical shape, one per mode index.
#[derive(Clone, Debug, PartialEq)]
pub struct MatrixBlock {
    rows: usize,
    cols: usize,
    slices: Vec<DMatrix<f64>>,
}

impl MatrixBlock {
    /// Builds a block from explicit slices.  All slices must share one shape.
    pub fn new(slices: Vec<DMatrix<f64>>) -> Result<Self> {
        let first = slices
            .first()
            .ok_or_else(|| Error::Shape("matrix block needs at least one slice".into()))?;
        let (rows, cols) = first.shape();
        if rows == 0 || cols == 0 {
            return Err(Error::Shape("matrix block slices must be non-empty".into()));
        }
        if let Some(bad) = slices.iter().find(|s| s.shape() != (rows, cols)) {
            return Err(Error::Shape(format!(
                "inconsistent slice shapes: {}x{} vs {}x{}",
                rows,
                cols,
                bad.nrows(),
                bad.ncols()
            )));
        }
        Ok(Self { rows, cols, slices })
    }

    /// An all-zero block of `n` slices of shape `rows × cols`.
    pub fn zeros(n: usize, rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            slices: vec![DMatrix::zeros(rows, cols); n],
        }
    }

    /// Builds a block entry-wise from `f(slice, row, col)`.
    pub fn from_fn<F: FnMut(usize, usize, usize) -> f64>(
        n: usize,
        rows: usize,
        cols: usize,
        mut f: F,
    ) -> Self {
        let slices = (0..n)
            .map(|i| DMatrix::from_fn(rows, cols, |r, c| f(i, r, c)))
            .collect();
        Self { rows, cols, slices }
    }

    /// Number of slices (the mode size).
    pub fn len(&self) -> usize {
        self.slices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.slices.is_empty()
    }

    /// Row count of every slice.
    pub fn rows(&self) -> usize {
        self.rows
    }

    /// Column count of every slice.
    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn slice(&self, i: usize) -> &DMatrix<f64> {
        &self.slices[i]
    }

    pub fn slice_mut(&mut self, i: usize) -> &mut DMatrix<f64> {
        &mut self.slices[i]
    }

    /// Replaces slice `i`, keeping the block shape intact.
    pub fn set_slice(&mut self, i: usize, m: DMatrix<f64>) -> Result<()> {
        if m.shape() != (self.rows, self.cols) {
            return Err(Error::Shape(format!(
                "slice shape {}x{} does not match block shape {}x{}",
                m.nrows(),
                m.ncols(),
                self.rows,
                self.cols
            )));
        }
        self.slices[i] = m;
        Ok(())
    }

    pub fn slices(&self) -> impl Iterator<Item = &DMatrix<f64>> {
        self.slices.iter()
    }

    /// The slice-wise transpose `Hᵀ` with `Hᵀ(i) = H(i)ᵀ`.
    pub fn transposed(&self) -> Self {
        Self {
            rows: self.cols,
            cols: self.rows,
            slices: self.slices.iter().map(|s| s.transpose()).collect(),
        }
    }

    /// Slice-product of two blocks.
    ///
    /// The result has one slice per index pair, `(H1 ⊗ H2)((i, j)) =
    /// H1(i) · H2(j)`, with `j` varying fastest: the pair `(i, j)` maps to
    /// linear index `i · H2.len() + j`.  This linearization makes the product
    /// associative and matches the row-major entry order of materialized
    /// tensors.
    pub fn kron(&self, other: &Self) -> Result<Self> {
        if self.cols != other.rows {
            return Err(Error::Shape(format!(
                "kron: inner dimensions differ ({} vs {})",
                self.cols, other.rows
            )));
        }
        let mut slices = Vec::with_capacity(self.len() * other.len());
        for a in &self.slices {
            for b in &other.slices {
                slices.push(a * b);
            }
        }
        Ok(Self {
            rows: self.rows,
            cols: other.cols,
            slices,
        })
    }

    /// Stacks the slices vertically into an `(n·rows) × cols` matrix.
    /// Slice `i` occupies rows `i·rows .. (i+1)·rows`.
    pub fn left_unfolding(&self) -> DMatrix<f64> {
        let n = self.len();
        let mut out = DMatrix::zeros(n * self.rows, self.cols);
        for (i, s) in self.slices.iter().enumerate() {
            out.view_mut((i * self.rows, 0), (self.rows, self.cols))
                .copy_from(s);
        }
        out
    }

    /// Concatenates the slices horizontally into a `rows × (n·cols)` matrix.
    /// Slice `i` occupies columns `i·cols .. (i+1)·cols`.
    pub fn right_unfolding(&self) -> DMatrix<f64> {
        let n = self.len();
        let mut out = DMatrix::zeros(self.rows, n * self.cols);
        for (i, s) in self.slices.iter().enumerate() {
            out.view_mut((0, i * self.cols), (self.rows, self.cols))
                .copy_from(s);
        }
        out
    }

    /// Inverse of [`left_unfolding`](Self::left_unfolding) for a block of `n`
    /// slices.
    pub fn fold_left(m: &DMatrix<f64>, n: usize) -> Result<Self> {
        if n == 0 || m.nrows() % n != 0 {
            return Err(Error::Shape(format!(
                "cannot fold {} rows into {} slices",
                m.nrows(),
                n
            )));
        }
        let rows = m.nrows() / n;
        let slices = (0..n)
            .map(|i| m.view((i * rows, 0), (rows, m.ncols())).clone_owned())
            .collect();
        Ok(Self {
            rows,
            cols: m.ncols(),
            slices,
        })
    }

    /// Inverse of [`right_unfolding`](Self::right_unfolding) for a block of
    /// `n` slices.
    pub fn fold_right(m: &DMatrix<f64>, n: usize) -> Result<Self> {
        if n == 0 || m.ncols() % n != 0 {
            return Err(Error::Shape(format!(
                "cannot fold {} columns into {} slices",
                m.ncols(),
                n
            )));
        }
        let cols = m.ncols() / n;
        let slices = (0..n)
            .map(|i| m.view((0, i * cols), (m.nrows(), cols)).clone_owned())
            .collect();
        Ok(Self {
            rows: m.nrows(),
            cols,
            slices,
        })
    }

    /// Frobenius norm of the block, `sqrt(Σ_i ‖H(i)‖_F²)`.
    pub fn norm(&self) -> f64 {
        self.norm_squared().sqrt()
    }

    /// `Σ_i ‖H(i)‖_F²`.
    pub fn norm_squared(&self) -> f64 {
        self.slices.iter().map(|s| s.norm_squared()).sum()
    }

    /// Rescales every slice in place.
    pub fn scale(&mut self, factor: f64) {
        for s in &mut self.slices {
            *s *= factor;
        }
    }

    /// True when `Σ_i H(i)ᵀ H(i) = I` up to `tol` (orthonormal columns of the
    /// left unfolding).
    pub fn is_left_orthogonal(&self, tol: f64) -> bool {
        let g = block_scalar_product(&self.transposed(), self).expect("shapes match");
        (g - DMatrix::identity(self.cols, self.cols)).norm() <= tol
    }

    /// True when `Σ_i H(i) H(i)ᵀ = I` up to `tol` (orthonormal rows of the
    /// right unfolding).
    pub fn is_right_orthogonal(&self, tol: f64) -> bool {
        let g = block_scalar_product(self, &self.transposed()).expect("shapes match");
        (g - DMatrix::identity(self.rows, self.rows)).norm() <= tol
    }

    /// Replaces the block by the left-orthogonal factor of its QR
    /// decomposition and returns the triangular remainder `R` with
    /// `old = new · R` in the slice-product sense.
    ///
    /// The column count may shrink to `min(n·rows, cols)`.
    pub fn make_left_orthogonal(&mut self) -> DMatrix<f64> {
        let n = self.len();
        let (q, r) = linalg::thin_qr(self.left_unfolding());
        *self = Self::fold_left(&q, n).expect("fold of thin QR factor");
        r
    }

    /// Replaces the block by the right-orthogonal factor of its LQ
    /// decomposition and returns the remainder `L` with `old = L · new` in
    /// the slice-product sense.
    ///
    /// The row count may shrink to `min(rows, n·cols)`.
    pub fn make_right_orthogonal(&mut self) -> DMatrix<f64> {
        let n = self.len();
        let (l, q) = linalg::thin_lq(self.right_unfolding());
        *self = Self::fold_right(&q, n).expect("fold of thin LQ factor");
        l
    }

    /// Applies `m · H(i)` to every slice.
    pub fn premultiply(&mut self, m: &DMatrix<f64>) -> Result<()> {
        if m.ncols() != self.rows {
            return Err(Error::Shape(format!(
                "premultiply: {}x{} against block rows {}",
                m.nrows(),
                m.ncols(),
                self.rows
            )));
        }
        for s in &mut self.slices {
            *s = m * &*s;
        }
        self.rows = m.nrows();
        Ok(())
    }

    /// Applies `H(i) · m` to every slice.
    pub fn postmultiply(&mut self, m: &DMatrix<f64>) -> Result<()> {
        if m.nrows() != self.cols {
            return Err(Error::Shape(format!(
                "postmultiply: block cols {} against {}x{}",
                self.cols,
                m.nrows(),
                m.ncols()
            )));
        }
        for s in &mut self.slices {
            *s = &*s * m;
        }
        self.cols = m.ncols();
        Ok(())
    }
}

/// Block scalar product `⟨G, H⟩ = Σ_i G(i) · H(i)`.
///
/// Equals `right_unfolding(G) · left_unfolding(H)`.
pub fn block_scalar_product(g: &MatrixBlock, h: &MatrixBlock) -> Result<DMatrix<f64>> {
    if g.len() != h.len() {
        return Err(Error::Shape(format!(
            "scalar product: slice counts differ ({} vs {})",
            g.len(),
            h.len()
        )));
    }
    if g.cols != h.rows {
        return Err(Error::Shape(format!(
            "scalar product: inner dimensions differ ({} vs {})",
            g.cols, h.rows
        )));
    }
    let mut acc = DMatrix::zeros(g.rows, h.cols);
    for (a, b) in g.slices.iter().zip(&h.slices) {
        acc += a * b;
    }
    Ok(acc)
}

/// Three-factor block scalar product `⟨G, J, H⟩ = Σ_i G(i) · J · H(i)`,
/// i.e. the scalar product of the post-multiplied block `G·J` with `H`.
pub fn block_scalar_product_with(
    g: &MatrixBlock,
    j: &DMatrix<f64>,
    h: &MatrixBlock,
) -> Result<DMatrix<f64>> {
    if g.len() != h.len() {
        return Err(Error::Shape(format!(
            "scalar product: slice counts differ ({} vs {})",
            g.len(),
            h.len()
        )));
    }
    if g.cols != j.nrows() || j.ncols() != h.rows {
        return Err(Error::Shape(format!(
            "scalar product: chain {}x{} · {}x{} · {}x{} does not link",
            g.rows,
            g.cols,
            j.nrows(),
            j.ncols(),
            h.rows,
            h.cols
        )));
    }
    let mut acc = DMatrix::zeros(g.rows, h.cols);
    for (a, b) in g.slices.iter().zip(&h.slices) {
        acc += a * j * b;
    }
    Ok(acc)
}

/// Trace scalar product `Σ_i trace(G(i) H(i)ᵀ) = Σ_i ⟨G(i), H(i)⟩_F`.
///
/// This is the inner product that induces [`MatrixBlock::norm`].
pub fn r_scalar_product(g: &MatrixBlock, h: &MatrixBlock) -> Result<f64> {
    if g.len() != h.len() || g.rows != h.rows || g.cols != h.cols {
        return Err(Error::Shape(
            "trace scalar product requires identically shaped blocks".into(),
        ));
    }
    Ok(g.slices
        .iter()
        .zip(&h.slices)
        .map(|(a, b)| a.dot(b))
        .sum())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn seq_block(n: usize, rows: usize, cols: usize, offset: f64) -> MatrixBlock {
        MatrixBlock::from_fn(n, rows, cols, |i, r, c| {
            (offset + (i * rows * cols + c * rows + r) as f64 * 0.37).sin()
        })
    }

    #[test]
    fn kron_of_scalar_slices_orders_second_factor_fastest() {
        let a = MatrixBlock::new(vec![
            DMatrix::from_element(1, 1, 2.0),
            DMatrix::from_element(1, 1, 3.0),
        ])
        .unwrap();
        let b = MatrixBlock::new(vec![
            DMatrix::from_element(1, 1, 5.0),
            DMatrix::from_element(1, 1, 7.0),
        ])
        .unwrap();
        let k = a.kron(&b).unwrap();
        let vals: Vec<f64> = k.slices().map(|s| s[(0, 0)]).collect();
        assert_eq!(vals, vec![10.0, 14.0, 15.0, 21.0]);
    }

    #[test]
    fn kron_dimension_mismatch_is_an_error() {
        let a = seq_block(2, 1, 3, 0.0);
        let b = seq_block(2, 2, 1, 1.0);
        assert!(a.kron(&b).is_err());
    }

    #[test]
    fn unfoldings_are_conjugate() {
        let h = seq_block(4, 3, 2, 0.3);
        let lhs = h.left_unfolding().transpose();
        let rhs = h.transposed().right_unfolding();
        assert_eq!(lhs, rhs);
    }

    #[test]
    fn folds_invert_unfoldings() {
        let h = seq_block(5, 2, 3, 0.9);
        let l = MatrixBlock::fold_left(&h.left_unfolding(), 5).unwrap();
        let r = MatrixBlock::fold_right(&h.right_unfolding(), 5).unwrap();
        assert_eq!(l, h);
        assert_eq!(r, h);
    }

    #[test]
    fn scalar_product_equals_unfolding_product() {
        let g = seq_block(6, 2, 3, 0.1);
        let h = seq_block(6, 3, 4, 0.5);
        let direct = block_scalar_product(&g, &h).unwrap();
        let via_unfoldings = g.right_unfolding() * h.left_unfolding();
        assert!((direct - via_unfoldings).norm() < 1e-13);
    }

    #[test]
    fn threaded_scalar_product_matches_postmultiplied_block() {
        let g = seq_block(4, 2, 3, 0.2);
        let j = DMatrix::from_fn(3, 2, |r, c| (r as f64 - c as f64) * 0.25);
        let h = seq_block(4, 2, 5, 0.8);
        let mut gj = g.clone();
        gj.postmultiply(&j).unwrap();
        let a = block_scalar_product_with(&g, &j, &h).unwrap();
        let b = block_scalar_product(&gj, &h).unwrap();
        assert!((a - b).norm() < 1e-13);
    }

    #[test]
    fn trace_product_induces_norm() {
        let h = seq_block(3, 2, 2, 0.4);
        let n2: f64 = h.slices().map(|s| s.norm_squared()).sum();
        assert!((r_scalar_product(&h, &h).unwrap() - n2).abs() < 1e-13);
        assert!((h.norm() - n2.sqrt()).abs() < 1e-13);
    }

    #[test]
    fn left_orthogonalization_preserves_slice_product() {
        let mut h = seq_block(4, 2, 3, 0.7);
        let reference = h.clone();
        let r = h.make_left_orthogonal();
        assert!(h.is_left_orthogonal(1e-12));
        // old(i) = new(i) · R for every slice
        for i in 0..h.len() {
            assert!((h.slice(i) * &r - reference.slice(i)).norm() < 1e-12);
        }
    }

    #[test]
    fn right_orthogonalization_preserves_slice_product() {
        let mut h = seq_block(4, 3, 2, 0.6);
        let reference = h.clone();
        let l = h.make_right_orthogonal();
        assert!(h.is_right_orthogonal(1e-12));
        for i in 0..h.len() {
            assert!((&l * h.slice(i) - reference.slice(i)).norm() < 1e-12);
        }
    }

    #[test]
    fn wide_left_orthogonalization_shrinks_columns() {
        // 2 slices of 1x5: the left unfolding is 2x5, so the orthogonal
        // factor can have at most 2 columns.
        let h = seq_block(2, 1, 5, 0.2);
        let mut q = h.clone();
        let r = q.make_left_orthogonal();
        assert_eq!(q.cols(), 2);
        assert_eq!(r.shape(), (2, 5));
        for i in 0..2 {
            assert!((q.slice(i) * &r - h.slice(i)).norm() < 1e-12);
        }
    }
}
