//! Tensor-train representation of a `d`-dimensional tensor.
//!
//! A [`TTRep`] is a chain of [`MatrixBlock`]s `G_0, …, G_{d-1}` with matching
//! inner dimensions and outer dimensions 1.  The tensor entry at a
//! multi-index `(i_0, …, i_{d-1})` is the scalar chain product
//! `G_0(i_0) · G_1(i_1) · … · G_{d-1}(i_{d-1})`.
//!
//! All indices in this crate are 0-based; text file formats are 1-based and
//! convert at the I/O boundary.

use nalgebra::DMatrix;

use crate::block::MatrixBlock;
use crate::error::{Error, Result};

/// Hard cap on dense materialization, in tensor entries.
pub const MATERIALIZE_CAP: u64 = 1 << 25;

/// A tensor train: one matrix block per mode.
#[derive(Clone, Debug)]
pub struct TTRep {
    pub(crate) blocks: Vec<MatrixBlock>,
    /// Mode index `h` such that blocks left of `h` are left-orthogonal and
    /// blocks right of `h` are right-orthogonal, if known.
    pub(crate) core: Option<usize>,
}

impl TTRep {
    /// Builds a tensor train from blocks, validating the chain structure.
    pub fn new(blocks: Vec<MatrixBlock>) -> Result<Self> {
        if blocks.len() < 2 {
            return Err(Error::Shape(format!(
                "tensor train needs at least 2 modes, got {}",
                blocks.len()
            )));
        }
        if blocks[0].rows() != 1 {
            return Err(Error::Shape(format!(
                "first block must have 1 row, got {}",
                blocks[0].rows()
            )));
        }
        if blocks[blocks.len() - 1].cols() != 1 {
            return Err(Error::Shape(format!(
                "last block must have 1 column, got {}",
                blocks[blocks.len() - 1].cols()
            )));
        }
        for s in 0..blocks.len() - 1 {
            if blocks[s].cols() != blocks[s + 1].rows() {
                return Err(Error::Shape(format!(
                    "rank mismatch between modes {} and {}: {} vs {}",
                    s,
                    s + 1,
                    blocks[s].cols(),
                    blocks[s + 1].rows()
                )));
            }
        }
        Ok(Self { blocks, core: None })
    }

    /// Number of modes `d`.
    pub fn order(&self) -> usize {
        self.blocks.len()
    }

    /// Mode sizes `n_0, …, n_{d-1}`.
    pub fn mode_sizes(&self) -> Vec<usize> {
        self.blocks.iter().map(|b| b.len()).collect()
    }

    /// Representation ranks `r_0, …, r_d` (with `r_0 = r_d = 1`).
    pub fn ranks(&self) -> Vec<usize> {
        let mut r = Vec::with_capacity(self.order() + 1);
        r.push(self.blocks[0].rows());
        for b in &self.blocks {
            r.push(b.cols());
        }
        r
    }

    /// Largest interior rank.
    pub fn max_rank(&self) -> usize {
        self.blocks.iter().map(|b| b.cols()).max().unwrap_or(1)
    }

    /// Total number of tensor entries as a `u128` (may exceed any cap).
    pub fn entry_count(&self) -> u128 {
        self.blocks.iter().map(|b| b.len() as u128).product()
    }

    pub fn block(&self, s: usize) -> &MatrixBlock {
        &self.blocks[s]
    }

    /// Mutable block access.  Invalidates the tracked orthogonality state.
    pub fn block_mut(&mut self, s: usize) -> &mut MatrixBlock {
        self.core = None;
        &mut self.blocks[s]
    }

    /// The tracked orthogonality core position, if any: blocks before it are
    /// left-orthogonal and blocks after it right-orthogonal.
    pub fn orth_core(&self) -> Option<usize> {
        self.core
    }

    /// Entry at a 0-based multi-index.
    pub fn evaluate(&self, index: &[usize]) -> Result<f64> {
        if index.len() != self.order() {
            return Err(Error::Shape(format!(
                "index has {} entries for an order-{} tensor",
                index.len(),
                self.order()
            )));
        }
        for (s, (&i, b)) in index.iter().zip(&self.blocks).enumerate() {
            if i >= b.len() {
                return Err(Error::IndexOutOfBounds(format!(
                    "index {} at mode {} exceeds size {}",
                    i,
                    s,
                    b.len()
                )));
            }
        }
        let mut row = vec![1.0_f64];
        let mut next = Vec::new();
        for (&i, b) in index.iter().zip(&self.blocks) {
            row_times_slice(&row, b.slice(i), &mut next);
            std::mem::swap(&mut row, &mut next);
        }
        Ok(row[0])
    }

    /// Entries at many 0-based multi-indices, stored flat with stride `d`.
    pub fn evaluate_flat(&self, flat: &[u32]) -> Result<Vec<f64>> {
        let d = self.order();
        if flat.len() % d != 0 {
            return Err(Error::Shape(format!(
                "flat index array length {} is not a multiple of d = {}",
                flat.len(),
                d
            )));
        }
        let count = flat.len() / d;
        let mut out = Vec::with_capacity(count);
        let mut row: Vec<f64> = Vec::new();
        let mut next: Vec<f64> = Vec::new();
        for k in 0..count {
            row.clear();
            row.push(1.0);
            for (s, b) in self.blocks.iter().enumerate() {
                let i = flat[k * d + s] as usize;
                if i >= b.len() {
                    return Err(Error::IndexOutOfBounds(format!(
                        "index {} at mode {} exceeds size {}",
                        i,
                        s,
                        b.len()
                    )));
                }
                row_times_slice(&row, b.slice(i), &mut next);
                std::mem::swap(&mut row, &mut next);
            }
            out.push(row[0]);
        }
        Ok(out)
    }

    /// Dense materialization in row-major order (last index fastest),
    /// guarded by [`MATERIALIZE_CAP`].
    pub fn materialize(&self) -> Result<Vec<f64>> {
        self.materialize_with_cap(MATERIALIZE_CAP)
    }

    /// Dense materialization with an explicit entry cap.
    pub fn materialize_with_cap(&self, cap: u64) -> Result<Vec<f64>> {
        let entries = self.entry_count();
        if entries > cap as u128 {
            return Err(Error::TooLarge { entries, cap });
        }
        let d = self.order();
        let dims = self.mode_sizes();
        let total = entries as usize;
        let mut out = Vec::with_capacity(total);

        // Odometer over multi-indices with partial chain products cached per
        // mode: prefix[s] is the product over modes < s at the current index.
        let mut idx = vec![0usize; d];
        let mut prefix: Vec<Vec<f64>> = Vec::with_capacity(d + 1);
        prefix.push(vec![1.0]);
        for s in 0..d {
            let mut next = Vec::new();
            row_times_slice(&prefix[s], self.blocks[s].slice(0), &mut next);
            prefix.push(next);
        }
        let mut scratch = Vec::new();
        loop {
            out.push(prefix[d][0]);
            // Advance the odometer; `carry` is the leftmost changed mode.
            let mut carry = d;
            for s in (0..d).rev() {
                idx[s] += 1;
                if idx[s] < dims[s] {
                    carry = s;
                    break;
                }
                idx[s] = 0;
            }
            if carry == d {
                break;
            }
            for s in carry..d {
                row_times_slice(&prefix[s].clone(), self.blocks[s].slice(idx[s]), &mut scratch);
                prefix[s + 1].clear();
                prefix[s + 1].extend_from_slice(&scratch);
            }
        }
        Ok(out)
    }

    /// Orthogonalizes the representation with respect to mode `core`:
    /// blocks before it become left-orthogonal, blocks after it
    /// right-orthogonal.  The represented tensor is unchanged.
    pub fn orthogonalize(&mut self, core: usize) -> Result<()> {
        let d = self.order();
        if core >= d {
            return Err(Error::IndexOutOfBounds(format!(
                "core position {core} for order {d}"
            )));
        }
        for s in 0..core {
            let r = self.blocks[s].make_left_orthogonal();
            self.blocks[s + 1].premultiply(&r)?;
        }
        for s in (core + 1..d).rev() {
            let l = self.blocks[s].make_right_orthogonal();
            self.blocks[s - 1].postmultiply(&l)?;
        }
        self.core = Some(core);
        Ok(())
    }

    /// Moves a known orthogonality core one mode to the right.
    pub(crate) fn shift_core_right(&mut self) {
        let core = self.core.expect("core position must be tracked");
        debug_assert!(core + 1 < self.order());
        let r = self.blocks[core].make_left_orthogonal();
        self.blocks[core + 1]
            .premultiply(&r)
            .expect("rank chain stays consistent");
        self.core = Some(core + 1);
    }

    /// Moves a known orthogonality core one mode to the left.
    pub(crate) fn shift_core_left(&mut self) {
        let core = self.core.expect("core position must be tracked");
        debug_assert!(core > 0);
        let l = self.blocks[core].make_right_orthogonal();
        self.blocks[core - 1]
            .postmultiply(&l)
            .expect("rank chain stays consistent");
        self.core = Some(core - 1);
    }

    /// Moves the core to `target` one mode at a time, orthogonalizing from
    /// scratch when no core is tracked.
    pub fn move_core(&mut self, target: usize) -> Result<()> {
        if target >= self.order() {
            return Err(Error::IndexOutOfBounds(format!(
                "core position {} for order {}",
                target,
                self.order()
            )));
        }
        match self.core {
            None => self.orthogonalize(target),
            Some(mut c) => {
                while c < target {
                    self.shift_core_right();
                    c += 1;
                }
                while c > target {
                    self.shift_core_left();
                    c -= 1;
                }
                Ok(())
            }
        }
    }

    /// Frobenius norm of the represented tensor.
    ///
    /// Orthogonalizes if necessary; with a tracked core this is just the
    /// block norm of the core block.
    pub fn frobenius_norm(&mut self) -> f64 {
        if self.core.is_none() {
            self.orthogonalize(0).expect("0 is a valid core position");
        }
        self.blocks[self.core.unwrap()].norm()
    }

    /// Verifies the tracked orthogonality state numerically.
    pub fn check_orthogonality(&self, tol: f64) -> bool {
        match self.core {
            None => true,
            Some(h) => {
                self.blocks[..h].iter().all(|b| b.is_left_orthogonal(tol))
                    && self.blocks[h + 1..]
                        .iter()
                        .all(|b| b.is_right_orthogonal(tol))
            }
        }
    }
}

/// `out = row · m` for a row vector given as a slice.
pub(crate) fn row_times_slice(row: &[f64], m: &DMatrix<f64>, out: &mut Vec<f64>) {
    let (rows, cols) = m.shape();
    debug_assert_eq!(row.len(), rows);
    out.clear();
    out.resize(cols, 0.0);
    let data = m.as_slice(); // column-major
    for c in 0..cols {
        let col = &data[c * rows..(c + 1) * rows];
        let mut acc = 0.0;
        for (x, y) in row.iter().zip(col) {
            acc += x * y;
        }
        out[c] = acc;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::naive;

    fn demo_tt(dims: &[usize], rank: usize, seed: u64) -> TTRep {
        crate::generators::random_tt(dims, rank, seed).unwrap()
    }

    #[test]
    fn rejects_broken_chains() {
        let a = MatrixBlock::zeros(2, 1, 3);
        let b = MatrixBlock::zeros(2, 2, 1);
        assert!(TTRep::new(vec![a, b]).is_err());
        let a = MatrixBlock::zeros(2, 1, 2);
        assert!(TTRep::new(vec![a]).is_err());
    }

    #[test]
    fn evaluate_matches_kron_materialization() {
        let tt = demo_tt(&[3, 2, 4], 3, 7);
        let dense = naive::materialize_by_kron(&tt);
        let dims = tt.mode_sizes();
        let mut linear = 0usize;
        for i0 in 0..dims[0] {
            for i1 in 0..dims[1] {
                for i2 in 0..dims[2] {
                    let v = tt.evaluate(&[i0, i1, i2]).unwrap();
                    assert!((v - dense[linear]).abs() < 1e-12);
                    linear += 1;
                }
            }
        }
    }

    #[test]
    fn materialize_agrees_with_evaluate() {
        let tt = demo_tt(&[2, 3, 2, 3], 2, 11);
        let dense = tt.materialize().unwrap();
        let dims = tt.mode_sizes();
        let mut linear = 0usize;
        for i0 in 0..dims[0] {
            for i1 in 0..dims[1] {
                for i2 in 0..dims[2] {
                    for i3 in 0..dims[3] {
                        let v = tt.evaluate(&[i0, i1, i2, i3]).unwrap();
                        assert!((v - dense[linear]).abs() < 1e-12);
                        linear += 1;
                    }
                }
            }
        }
    }

    #[test]
    fn materialize_cap_is_enforced() {
        let tt = demo_tt(&[4, 4, 4], 2, 3);
        match tt.materialize_with_cap(63) {
            Err(Error::TooLarge { entries, cap }) => {
                assert_eq!(entries, 64);
                assert_eq!(cap, 63);
            }
            other => panic!("expected TooLarge, got {other:?}"),
        }
    }

    #[test]
    fn orthogonalize_keeps_tensor_and_sets_state() {
        let mut tt = demo_tt(&[3, 4, 2, 3], 3, 5);
        let before = tt.materialize().unwrap();
        for core in [0, 2, 3, 1] {
            tt.orthogonalize(core).unwrap();
            assert_eq!(tt.orth_core(), Some(core));
            assert!(tt.check_orthogonality(1e-10));
            let after = tt.materialize().unwrap();
            let err: f64 = before
                .iter()
                .zip(&after)
                .map(|(a, b)| (a - b) * (a - b))
                .sum::<f64>()
                .sqrt();
            assert!(err < 1e-10, "core {core}: drift {err}");
        }
    }

    #[test]
    fn orthogonalize_is_idempotent_on_the_tensor() {
        let mut tt = demo_tt(&[3, 3, 3], 2, 9);
        tt.orthogonalize(1).unwrap();
        let once = tt.materialize().unwrap();
        tt.orthogonalize(1).unwrap();
        let twice = tt.materialize().unwrap();
        for (a, b) in once.iter().zip(&twice) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn core_norm_equals_tensor_norm() {
        let mut tt = demo_tt(&[4, 3, 5], 3, 2);
        let dense = tt.materialize().unwrap();
        let full: f64 = dense.iter().map(|x| x * x).sum::<f64>().sqrt();
        for core in 0..3 {
            tt.orthogonalize(core).unwrap();
            let n = tt.block(core).norm();
            assert!(
                (n - full).abs() <= 1e-12 * full.max(1.0),
                "core {core}: {n} vs {full}"
            );
        }
        assert!((tt.frobenius_norm() - full).abs() <= 1e-12 * full.max(1.0));
    }

    #[test]
    fn move_core_steps_match_full_orthogonalization() {
        let mut tt = demo_tt(&[3, 3, 3, 3, 3], 3, 13);
        let before = tt.materialize().unwrap();
        tt.orthogonalize(0).unwrap();
        for target in [1, 2, 3, 4, 2, 0] {
            tt.move_core(target).unwrap();
            assert_eq!(tt.orth_core(), Some(target));
            assert!(tt.check_orthogonality(1e-10));
        }
        let after = tt.materialize().unwrap();
        for (a, b) in before.iter().zip(&after) {
            assert!((a - b).abs() < 1e-10);
        }
    }
}
