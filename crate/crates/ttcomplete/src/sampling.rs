//! Sparse sample sets with per-slice density control.
//!
//! Index sets are generated direction by direction: for every mode `μ` and
//! every index `j` of that mode, a fixed number `C_SD · r²` of full
//! multi-indices with `i_μ = j` is drawn uniformly at random.  This bounds
//! the slice density from below (before deduplication) in every direction,
//! which is what the alternating solvers need: each least-squares microstep
//! works slice by slice, and an unseen slice cannot be reconstructed.
//!
//! Index sets are kept sorted lexicographically and deduplicated, so a set
//! is fully determined by `(dims, rank, C_SD, seed)` regardless of the
//! order in which directions were drawn.
//!
//! # Text format
//!
//! A sample set is stored as whitespace-separated text: a header line
//!
//! ```text
//! d n_1 … n_d count label seed
//! ```
//!
//! followed by `count` lines `i_1 … i_d value` with **1-based** indices and
//! values printed with 17 significant digits (lossless for f64).

use std::fmt::Write as _;
use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;

use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::seed::{self, tag};
use crate::tt::TTRep;

/// Anything that can produce tensor entries at 0-based multi-indices.
pub trait EntryOracle {
    fn entry(&self, index: &[usize]) -> f64;
}

impl<F: Fn(&[usize]) -> f64> EntryOracle for F {
    fn entry(&self, index: &[usize]) -> f64 {
        self(index)
    }
}

impl EntryOracle for TTRep {
    fn entry(&self, index: &[usize]) -> f64 {
        self.evaluate(index).expect("index within mode sizes")
    }
}

/// A sorted, duplicate-free set of multi-indices into a fixed-size grid.
#[derive(Clone, Debug, PartialEq)]
pub struct IndexSet {
    dims: Vec<usize>,
    /// Flat 0-based indices, stride `d`, lexicographically sorted.
    flat: Vec<u32>,
    seed: u64,
    /// True when some per-slice request met or exceeded the slice size and
    /// the slice was enumerated exhaustively instead of sampled.
    clamped: bool,
}

/// An [`IndexSet`] together with one value per index.
#[derive(Clone, Debug, PartialEq)]
pub struct SampleSet {
    dims: Vec<usize>,
    flat: Vec<u32>,
    values: Vec<f64>,
    label: String,
    seed: u64,
}

/// Draws the slice-density index set for `(dims, rank, c_sd, seed)`.
///
/// Per direction `μ` and index `j`, `c_sd · rank²` full indices with
/// `i_μ = j` are drawn uniformly; duplicates are removed without refill.
/// If the request meets or exceeds the slice size, the slice is enumerated
/// exhaustively instead (reported via [`IndexSet::clamped`]).
pub fn generate_index_set(
    dims: &[usize],
    rank: usize,
    c_sd: usize,
    seed: u64,
) -> Result<IndexSet> {
    if dims.is_empty() || dims.iter().any(|&n| n == 0) {
        return Err(Error::Config("mode sizes must all be positive".into()));
    }
    if dims.iter().any(|&n| n > u32::MAX as usize) {
        return Err(Error::Config("mode sizes beyond u32 are not supported".into()));
    }
    if rank == 0 || c_sd == 0 {
        return Err(Error::Config("rank and C_SD must be positive".into()));
    }
    let d = dims.len();
    let per_slice = c_sd
        .checked_mul(rank)
        .and_then(|x| x.checked_mul(rank))
        .ok_or_else(|| Error::Config("per-slice request overflows".into()))?;

    let mut flat: Vec<u32> = Vec::new();
    let mut clamped = false;
    let mut draw = vec![0u32; d];
    for mu in 0..d {
        let slice_size: u128 = dims
            .iter()
            .enumerate()
            .filter(|&(t, _)| t != mu)
            .map(|(_, &n)| n as u128)
            .product();
        if per_slice as u128 >= slice_size {
            // Exhaustive slice: every request would saturate it anyway.
            clamped = true;
            for j in 0..dims[mu] {
                enumerate_slice(dims, mu, j, &mut flat);
            }
        } else {
            for j in 0..dims[mu] {
                let s = seed::derive(seed, &[tag::SAMPLING, mu as u64, j as u64]);
                let mut rng = ChaCha8Rng::seed_from_u64(s);
                for _ in 0..per_slice {
                    for (t, &n) in dims.iter().enumerate() {
                        draw[t] = if t == mu {
                            j as u32
                        } else {
                            rng.random_range(0..n as u32)
                        };
                    }
                    flat.extend_from_slice(&draw);
                }
            }
        }
    }
    let flat = sort_dedup(flat, d);
    Ok(IndexSet {
        dims: dims.to_vec(),
        flat,
        seed,
        clamped,
    })
}

/// Enumerates all indices of the slice `i_mu = j` in row-major order.
fn enumerate_slice(dims: &[usize], mu: usize, j: usize, out: &mut Vec<u32>) {
    let d = dims.len();
    let mut idx = vec![0usize; d];
    idx[mu] = j;
    loop {
        out.extend(idx.iter().map(|&x| x as u32));
        let mut done = true;
        for t in (0..d).rev() {
            if t == mu {
                continue;
            }
            idx[t] += 1;
            if idx[t] < dims[t] {
                done = false;
                break;
            }
            idx[t] = 0;
        }
        if done {
            break;
        }
    }
}

/// Sorts flat multi-indices lexicographically and removes duplicates.
fn sort_dedup(flat: Vec<u32>, d: usize) -> Vec<u32> {
    let count = flat.len() / d;
    let mut order: Vec<u32> = (0..count as u32).collect();
    order.sort_unstable_by(|&a, &b| {
        let ia = &flat[a as usize * d..a as usize * d + d];
        let ib = &flat[b as usize * d..b as usize * d + d];
        ia.cmp(ib)
    });
    let mut out = Vec::with_capacity(flat.len());
    let mut prev: Option<&[u32]> = None;
    for &p in &order {
        let row = &flat[p as usize * d..p as usize * d + d];
        if prev != Some(row) {
            out.extend_from_slice(row);
            prev = Some(row);
        }
    }
    out
}

impl IndexSet {
    /// Builds an index set from explicit 0-based indices (sorted and
    /// deduplicated internally).
    pub fn from_indices(dims: &[usize], indices: &[u32]) -> Result<Self> {
        let d = dims.len();
        if d == 0 || indices.len() % d != 0 {
            return Err(Error::Shape(format!(
                "flat index array length {} is not a multiple of d = {}",
                indices.len(),
                d
            )));
        }
        for chunk in indices.chunks(d) {
            for (t, &i) in chunk.iter().enumerate() {
                if i as usize >= dims[t] {
                    return Err(Error::IndexOutOfBounds(format!(
                        "index {} at mode {} exceeds size {}",
                        i, t, dims[t]
                    )));
                }
            }
        }
        Ok(Self {
            dims: dims.to_vec(),
            flat: sort_dedup(indices.to_vec(), d),
            seed: 0,
            clamped: false,
        })
    }

    /// The full grid as an index set.
    pub fn full_grid(dims: &[usize]) -> Result<Self> {
        let total: u128 = dims.iter().map(|&n| n as u128).product();
        if total > crate::tt::MATERIALIZE_CAP as u128 {
            return Err(Error::TooLarge {
                entries: total,
                cap: crate::tt::MATERIALIZE_CAP,
            });
        }
        let d = dims.len();
        let mut flat = Vec::with_capacity(total as usize * d);
        let mut idx = vec![0usize; d];
        loop {
            flat.extend(idx.iter().map(|&x| x as u32));
            let mut done = true;
            for t in (0..d).rev() {
                idx[t] += 1;
                if idx[t] < dims[t] {
                    done = false;
                    break;
                }
                idx[t] = 0;
            }
            if done {
                break;
            }
        }
        Ok(Self {
            dims: dims.to_vec(),
            flat,
            seed: 0,
            clamped: false,
        })
    }

    pub fn order(&self) -> usize {
        self.dims.len()
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn len(&self) -> usize {
        self.flat.len() / self.dims.len()
    }

    pub fn is_empty(&self) -> bool {
        self.flat.is_empty()
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn clamped(&self) -> bool {
        self.clamped
    }

    /// Flat 0-based indices with stride `d`, lexicographically sorted.
    pub fn flat(&self) -> &[u32] {
        &self.flat
    }

    pub fn index(&self, p: usize) -> &[u32] {
        let d = self.dims.len();
        &self.flat[p * d..(p + 1) * d]
    }

    /// Number of samples whose mode-`mu` index equals `j`.
    pub fn slice_density(&self, mu: usize, j: usize) -> usize {
        let d = self.dims.len();
        self.flat
            .chunks_exact(d)
            .filter(|chunk| chunk[mu] as usize == j)
            .count()
    }

    /// Histogram of slice densities along mode `mu`.
    pub fn slice_densities(&self, mu: usize) -> Vec<usize> {
        let d = self.dims.len();
        let mut h = vec![0usize; self.dims[mu]];
        for chunk in self.flat.chunks_exact(d) {
            h[chunk[mu] as usize] += 1;
        }
        h
    }

    /// Evaluates an oracle on every index, producing a sample set.
    pub fn attach_values<O: EntryOracle>(&self, oracle: &O, label: &str) -> Result<SampleSet> {
        validate_label(label)?;
        let d = self.dims.len();
        let mut idx = vec![0usize; d];
        let values = self
            .flat
            .chunks_exact(d)
            .map(|chunk| {
                for (t, &i) in chunk.iter().enumerate() {
                    idx[t] = i as usize;
                }
                oracle.entry(&idx)
            })
            .collect();
        Ok(SampleSet {
            dims: self.dims.clone(),
            flat: self.flat.clone(),
            values,
            label: label.to_string(),
            seed: self.seed,
        })
    }
}

/// Number of indices two sorted sets have in common.
pub fn overlap_count(a: &IndexSet, b: &IndexSet) -> Result<usize> {
    if a.dims != b.dims {
        return Err(Error::Shape("overlap of sets over different grids".into()));
    }
    let d = a.dims.len();
    let (mut i, mut j, mut hits) = (0usize, 0usize, 0usize);
    while i < a.len() && j < b.len() {
        match a.index(i).cmp(b.index(j)) {
            std::cmp::Ordering::Less => i += 1,
            std::cmp::Ordering::Greater => j += 1,
            std::cmp::Ordering::Equal => {
                hits += 1;
                i += 1;
                j += 1;
            }
        }
    }
    let _ = d;
    Ok(hits)
}

fn validate_label(label: &str) -> Result<()> {
    if label.is_empty() || label.chars().any(|c| c.is_whitespace()) {
        return Err(Error::Config(format!(
            "label {label:?} must be a non-empty token without whitespace"
        )));
    }
    Ok(())
}

impl SampleSet {
    pub fn order(&self) -> usize {
        self.dims.len()
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn flat(&self) -> &[u32] {
        &self.flat
    }

    pub fn index(&self, p: usize) -> &[u32] {
        let d = self.dims.len();
        &self.flat[p * d..(p + 1) * d]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    /// The index structure without values.
    pub fn index_set(&self) -> IndexSet {
        IndexSet {
            dims: self.dims.clone(),
            flat: self.flat.clone(),
            seed: self.seed,
            clamped: false,
        }
    }

    pub fn slice_density(&self, mu: usize, j: usize) -> usize {
        self.index_ref().slice_density(mu, j)
    }

    fn index_ref(&self) -> IndexSet {
        self.index_set()
    }

    /// Euclidean norm of the stored values.
    pub fn values_norm(&self) -> f64 {
        self.values.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    /// Relative residual `‖values − predicted‖ / ‖values‖` (absolute when
    /// the stored values vanish).
    pub fn relative_residual(&self, predicted: &[f64]) -> f64 {
        assert_eq!(predicted.len(), self.len());
        let diff: f64 = self
            .values
            .iter()
            .zip(predicted)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt();
        let norm = self.values_norm();
        if norm > 0.0 {
            diff / norm
        } else {
            diff
        }
    }

    /// Relative residual of a tensor train evaluated on this set.
    pub fn residual_of(&self, tt: &TTRep) -> Result<f64> {
        let predicted = tt.evaluate_flat(&self.flat)?;
        Ok(self.relative_residual(&predicted))
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut file = std::fs::File::create(path)?;
        let text = self.to_text();
        file.write_all(text.as_bytes())?;
        Ok(())
    }

    pub fn to_text(&self) -> String {
        let d = self.dims.len();
        let mut out = String::new();
        write!(out, "{d}").unwrap();
        for &n in &self.dims {
            write!(out, " {n}").unwrap();
        }
        writeln!(out, " {} {} {}", self.len(), self.label, self.seed).unwrap();
        for (chunk, v) in self.flat.chunks_exact(d).zip(&self.values) {
            for &i in chunk {
                write!(out, "{} ", i + 1).unwrap();
            }
            writeln!(out, "{v:.16e}").unwrap();
        }
        out
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let file = std::fs::File::open(path)?;
        Self::read_from(BufReader::new(file))
    }

    pub fn read_from<R: Read>(reader: BufReader<R>) -> Result<Self> {
        let mut lines = reader.lines();
        let header = lines
            .next()
            .ok_or_else(|| Error::Format("empty sample file".into()))??;
        let mut toks = header.split_whitespace();
        let d: usize = next_tok(&mut toks, "d")?;
        if d == 0 {
            return Err(Error::Format("order must be positive".into()));
        }
        let mut dims = Vec::with_capacity(d);
        for t in 0..d {
            let n: usize = next_tok(&mut toks, &format!("n_{}", t + 1))?;
            if n == 0 {
                return Err(Error::Format("mode sizes must be positive".into()));
            }
            dims.push(n);
        }
        let count: usize = next_tok(&mut toks, "count")?;
        let label = toks
            .next()
            .ok_or_else(|| Error::Format("missing label".into()))?
            .to_string();
        let seed: u64 = next_tok(&mut toks, "seed")?;
        if toks.next().is_some() {
            return Err(Error::Format("trailing tokens in header".into()));
        }

        let mut flat = Vec::with_capacity(count * d);
        let mut values = Vec::with_capacity(count);
        for (lineno, line) in lines.enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let mut toks = line.split_whitespace();
            for t in 0..d {
                let i: usize = next_tok(&mut toks, &format!("index {}", t + 1))?;
                if i == 0 || i > dims[t] {
                    return Err(Error::Format(format!(
                        "line {}: index {} out of range 1..={}",
                        lineno + 2,
                        i,
                        dims[t]
                    )));
                }
                flat.push((i - 1) as u32);
            }
            let v: f64 = next_tok(&mut toks, "value")?;
            if toks.next().is_some() {
                return Err(Error::Format(format!(
                    "line {}: trailing tokens",
                    lineno + 2
                )));
            }
            values.push(v);
        }
        if values.len() != count {
            return Err(Error::Format(format!(
                "header announces {} samples, file has {}",
                count,
                values.len()
            )));
        }

        // Restore the sorted order without losing index-value pairing.
        let mut order: Vec<u32> = (0..count as u32).collect();
        order.sort_unstable_by(|&a, &b| {
            flat[a as usize * d..a as usize * d + d].cmp(&flat[b as usize * d..b as usize * d + d])
        });
        let mut sflat = Vec::with_capacity(flat.len());
        let mut svalues = Vec::with_capacity(count);
        for &p in &order {
            let row = &flat[p as usize * d..p as usize * d + d];
            if sflat.len() >= d && &sflat[sflat.len() - d..] == row {
                return Err(Error::Format(format!(
                    "duplicate index {:?}",
                    row.iter().map(|&x| x + 1).collect::<Vec<_>>()
                )));
            }
            sflat.extend_from_slice(row);
            svalues.push(values[p as usize]);
        }
        Ok(Self {
            dims,
            flat: sflat,
            values: svalues,
            label,
            seed,
        })
    }
}

fn next_tok<'a, T: std::str::FromStr>(
    toks: &mut impl Iterator<Item = &'a str>,
    what: &str,
) -> Result<T> {
    toks.next()
        .ok_or_else(|| Error::Format(format!("missing {what}")))?
        .parse()
        .map_err(|_| Error::Format(format!("unparsable {what}")))
}
