//! Shared sweep machinery: slice-grouped sample tables and cached chain
//! products.
//!
//! A microstep at mode `s` needs, for every sample `p`, the row vector
//! `pre(p) = G_0(p_0)···G_{s-1}(p_{s-1})` and the column vector
//! `suf(p) = G_{s+1}(p_{s+1})···G_{d-1}(p_{d-1})`.  Recomputing both from
//! scratch at every mode would cost a factor `d` more than necessary, so a
//! sweep phase keeps
//!
//! * a stack of far-side products, computed once at phase start (safe
//!   because a phase moving up never modifies blocks beyond the current
//!   mode before using their products, and symmetrically moving down), and
//! * the near-side product, advanced incrementally with the freshly
//!   orthogonalized block after each core shift.

use crate::block::MatrixBlock;
use crate::sampling::SampleSet;
use crate::tt::TTRep;

/// Sample set rearranged for sweeping: flat indices, values, and for every
/// `(mode, slice)` pair the list of sample ids hitting that slice.
pub(crate) struct SampleTable {
    pub d: usize,
    pub dims: Vec<usize>,
    pub count: usize,
    pub flat: Vec<u32>,
    pub vals: Vec<f64>,
    /// `by_slice[mode][j]` = ids of samples whose `mode`-th index is `j`.
    pub by_slice: Vec<Vec<Vec<u32>>>,
    /// Euclidean norm of the sample values.
    pub norm: f64,
}

impl SampleTable {
    pub fn new(set: &SampleSet) -> Self {
        let d = set.order();
        let dims = set.dims().to_vec();
        let count = set.len();
        let flat = set.flat().to_vec();
        let vals = set.values().to_vec();
        let mut by_slice: Vec<Vec<Vec<u32>>> =
            dims.iter().map(|&n| vec![Vec::new(); n]).collect();
        for p in 0..count {
            for (mu, row) in by_slice.iter_mut().enumerate() {
                row[flat[p * d + mu] as usize].push(p as u32);
            }
        }
        let norm = set.values_norm();
        Self {
            d,
            dims,
            count,
            flat,
            vals,
            by_slice,
            norm,
        }
    }

    /// Mode index of sample `p` along `mode`.
    #[inline]
    pub fn idx(&self, p: usize, mode: usize) -> usize {
        self.flat[p * self.d + mode] as usize
    }

    /// Relative residual corresponding to an absolute one.
    pub fn relative(&self, abs: f64) -> f64 {
        if self.norm > 0.0 {
            abs / self.norm
        } else {
            abs
        }
    }
}

/// Absolute sample residual `‖M − A‖` of the current representation,
/// evaluated from scratch.
pub(crate) fn residual_on(tt: &TTRep, tbl: &SampleTable) -> f64 {
    let pred = tt
        .evaluate_flat(&tbl.flat)
        .expect("sample indices fit the grid");
    pred.iter()
        .zip(&tbl.vals)
        .map(|(a, m)| (m - a) * (m - a))
        .sum::<f64>()
        .sqrt()
}

/// Per-sample values of `M − A` of the current representation.
pub(crate) fn residual_values_on(tt: &TTRep, tbl: &SampleTable) -> Vec<f64> {
    let pred = tt
        .evaluate_flat(&tbl.flat)
        .expect("sample indices fit the grid");
    pred.iter().zip(&tbl.vals).map(|(a, m)| m - a).collect()
}

/// Appends `x · G(i_p)` per sample: input rows of width `in_dim`, output
/// rows of width `block.cols()`.
fn advance_rows(
    block: &MatrixBlock,
    tbl: &SampleTable,
    mode: usize,
    input: &[f64],
    in_dim: usize,
) -> (Vec<f64>, usize) {
    debug_assert_eq!(block.rows(), in_dim);
    let out_dim = block.cols();
    let mut out = vec![0.0; tbl.count * out_dim];
    for p in 0..tbl.count {
        let m = block.slice(tbl.idx(p, mode));
        let data = m.as_slice();
        let x = &input[p * in_dim..][..in_dim];
        let y = &mut out[p * out_dim..][..out_dim];
        for (c, yc) in y.iter_mut().enumerate() {
            let col = &data[c * in_dim..][..in_dim];
            *yc = x.iter().zip(col).map(|(a, b)| a * b).sum();
        }
    }
    (out, out_dim)
}

/// Prepends `G(i_p) · x` per sample: input rows of width `in_dim`, output
/// rows of width `block.rows()`.
fn advance_cols(
    block: &MatrixBlock,
    tbl: &SampleTable,
    mode: usize,
    input: &[f64],
    in_dim: usize,
) -> (Vec<f64>, usize) {
    debug_assert_eq!(block.cols(), in_dim);
    let out_dim = block.rows();
    let mut out = vec![0.0; tbl.count * out_dim];
    for p in 0..tbl.count {
        let m = block.slice(tbl.idx(p, mode));
        let data = m.as_slice();
        let x = &input[p * in_dim..][..in_dim];
        let y = &mut out[p * out_dim..][..out_dim];
        for (c, &xc) in x.iter().enumerate() {
            let col = &data[c * out_dim..][..out_dim];
            for (yr, &m_rc) in y.iter_mut().zip(col) {
                *yr += m_rc * xc;
            }
        }
    }
    (out, out_dim)
}

#[derive(Clone, Copy, PartialEq, Eq)]
pub(crate) enum Direction {
    Up,
    Down,
}

/// Cached chain products for one directional phase of a sweep.
///
/// Invariant while positioned at mode `s = modes[pos]`: the representation
/// core sits at `s`, `near` holds the products over all modes before `s`
/// (moving up) or after `s` (moving down), and `far` holds the opposite
/// side for every remaining mode of the phase.
pub(crate) struct PassProducts {
    dir: Direction,
    modes: Vec<usize>,
    pos: usize,
    near: Vec<f64>,
    near_dim: usize,
    far: Vec<Option<(Vec<f64>, usize)>>,
}

impl PassProducts {
    /// Positions the core at the first mode of the phase and builds the
    /// product caches.  `modes` must be contiguous and directed.
    pub fn start(tt: &mut TTRep, tbl: &SampleTable, modes: &[usize], dir: Direction) -> Self {
        debug_assert!(!modes.is_empty());
        debug_assert!(modes.windows(2).all(|w| match dir {
            Direction::Up => w[1] == w[0] + 1,
            Direction::Down => w[1] + 1 == w[0],
        }));
        let first = modes[0];
        tt.move_core(first).expect("phase modes are in range");
        let d = tt.order();
        let mut far: Vec<Option<(Vec<f64>, usize)>> = vec![None; modes.len()];
        match dir {
            Direction::Up => {
                // near = prefix at `first`; far[k] = suffix of modes[k].
                let mut near = vec![1.0; tbl.count];
                let mut near_dim = 1;
                for t in 0..first {
                    let (n, nd) = advance_rows(tt.block(t), tbl, t, &near, near_dim);
                    near = n;
                    near_dim = nd;
                }
                let mut cur = vec![1.0; tbl.count];
                let mut cur_dim = 1;
                for t in (first..d).rev() {
                    // entering: cur = suffix of mode t
                    if let Some(k) = modes.iter().position(|&m| m == t) {
                        far[k] = Some((cur.clone(), cur_dim));
                    }
                    if t > first {
                        let (c, cd) = advance_cols(tt.block(t), tbl, t, &cur, cur_dim);
                        cur = c;
                        cur_dim = cd;
                    }
                }
                Self {
                    dir,
                    modes: modes.to_vec(),
                    pos: 0,
                    near,
                    near_dim,
                    far,
                }
            }
            Direction::Down => {
                // near = suffix at `first`; far[k] = prefix of modes[k].
                let mut near = vec![1.0; tbl.count];
                let mut near_dim = 1;
                for t in (first + 1..d).rev() {
                    let (n, nd) = advance_cols(tt.block(t), tbl, t, &near, near_dim);
                    near = n;
                    near_dim = nd;
                }
                let mut cur = vec![1.0; tbl.count];
                let mut cur_dim = 1;
                for t in 0..=first {
                    // entering: cur = prefix of mode t
                    if let Some(k) = modes.iter().position(|&m| m == t) {
                        far[k] = Some((cur.clone(), cur_dim));
                    }
                    if t < first {
                        let (c, cd) = advance_rows(tt.block(t), tbl, t, &cur, cur_dim);
                        cur = c;
                        cur_dim = cd;
                    }
                }
                Self {
                    dir,
                    modes: modes.to_vec(),
                    pos: 0,
                    near,
                    near_dim,
                    far,
                }
            }
        }
    }

    /// Current mode.
    pub fn mode(&self) -> usize {
        self.modes[self.pos]
    }

    pub fn is_last(&self) -> bool {
        self.pos + 1 == self.modes.len()
    }

    /// Prefix products (row vectors) and suffix products (column vectors)
    /// for the current mode, as `(pre, rl, suf, rr)`.
    pub fn sides(&self) -> (&[f64], usize, &[f64], usize) {
        let (f, fd) = self.far[self.pos].as_ref().expect("far product present");
        match self.dir {
            Direction::Up => (&self.near, self.near_dim, f, *fd),
            Direction::Down => (f, *fd, &self.near, self.near_dim),
        }
    }

    /// Shifts the core to the next mode of the phase and advances the
    /// near-side products through the freshly orthogonalized block.
    pub fn advance(&mut self, tt: &mut TTRep, tbl: &SampleTable) {
        debug_assert!(!self.is_last());
        let s = self.mode();
        self.far[self.pos] = None;
        match self.dir {
            Direction::Up => {
                tt.shift_core_right();
                let (n, nd) = advance_rows(tt.block(s), tbl, s, &self.near, self.near_dim);
                self.near = n;
                self.near_dim = nd;
            }
            Direction::Down => {
                tt.shift_core_left();
                let (n, nd) = advance_cols(tt.block(s), tbl, s, &self.near, self.near_dim);
                self.near = n;
                self.near_dim = nd;
            }
        }
        self.pos += 1;
    }

    /// Absolute sample residual from the cached products; valid right
    /// after the microstep at the current mode.
    pub fn residual_here(&self, tt: &TTRep, tbl: &SampleTable) -> f64 {
        let s = self.mode();
        let (pre, rl, suf, rr) = self.sides();
        let block = tt.block(s);
        let mut acc = 0.0;
        for p in 0..tbl.count {
            let g = block.slice(tbl.idx(p, s));
            let data = g.as_slice();
            let x = &pre[p * rl..][..rl];
            let y = &suf[p * rr..][..rr];
            let mut v = 0.0;
            for (c, &yc) in y.iter().enumerate() {
                let col = &data[c * rl..][..rl];
                let dot: f64 = x.iter().zip(col).map(|(a, b)| a * b).sum();
                v += dot * yc;
            }
            let r = tbl.vals[p] - v;
            acc += r * r;
        }
        acc.sqrt()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::generators::random_tt;
    use crate::sampling::generate_index_set;

    fn setup(seed: u64) -> (TTRep, SampleTable) {
        let dims = [4usize, 3, 5, 3];
        let tt = random_tt(&dims, 3, seed).unwrap();
        let target = random_tt(&dims, 2, seed + 9).unwrap();
        let idx = generate_index_set(&dims, 2, 3, seed + 1).unwrap();
        let set = idx.attach_values(&target, "P").unwrap();
        (tt, SampleTable::new(&set))
    }

    #[test]
    fn by_slice_partitions_the_samples() {
        let (_, tbl) = setup(7);
        for mu in 0..tbl.d {
            let total: usize = tbl.by_slice[mu].iter().map(Vec::len).sum();
            assert_eq!(total, tbl.count);
            for (j, ids) in tbl.by_slice[mu].iter().enumerate() {
                for &p in ids {
                    assert_eq!(tbl.idx(p as usize, mu), j);
                }
            }
        }
    }

    #[test]
    fn sides_reproduce_fresh_evaluation() {
        let (mut tt, tbl) = setup(11);
        for dir in [Direction::Up, Direction::Down] {
            let modes: Vec<usize> = match dir {
                Direction::Up => (0..tt.order()).collect(),
                Direction::Down => (0..tt.order()).rev().collect(),
            };
            let mut pass = PassProducts::start(&mut tt, &tbl, &modes, dir);
            loop {
                let s = pass.mode();
                let (pre, rl, suf, rr) = pass.sides();
                let block = tt.block(s);
                for p in 0..tbl.count {
                    let g = block.slice(tbl.idx(p, s));
                    let mut v = 0.0;
                    for a in 0..rl {
                        for b in 0..rr {
                            v += pre[p * rl + a] * g[(a, b)] * suf[p * rr + b];
                        }
                    }
                    let idx: Vec<usize> =
                        (0..tbl.d).map(|m| tbl.idx(p, m)).collect();
                    let want = tt.evaluate(&idx).unwrap();
                    assert!(
                        (v - want).abs() < 1e-11 * (1.0 + want.abs()),
                        "dir mismatch at mode {s}, sample {p}: {v} vs {want}"
                    );
                }
                if pass.is_last() {
                    break;
                }
                pass.advance(&mut tt, &tbl);
            }
        }
    }

    #[test]
    fn residual_here_matches_fresh_residual() {
        let (mut tt, tbl) = setup(23);
        let modes: Vec<usize> = (0..tt.order()).collect();
        let mut pass = PassProducts::start(&mut tt, &tbl, &modes, Direction::Up);
        loop {
            let cached = pass.residual_here(&tt, &tbl);
            let fresh = residual_on(&tt, &tbl);
            assert!((cached - fresh).abs() < 1e-10 * (1.0 + fresh));
            if pass.is_last() {
                break;
            }
            pass.advance(&mut tt, &tbl);
        }
    }
}
