//! Test-tensor generators: closed-form entry oracles, structured tensor
//! trains, singular-value shaping, and sample noise.

use std::io::{BufRead, BufReader, Read};
use std::path::Path;

use nalgebra::DMatrix;
use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::block::MatrixBlock;
use crate::error::{Error, Result};
use crate::linalg;
use crate::sampling::SampleSet;
use crate::seed::{self, tag};
use crate::tt::TTRep;

/// Inverse Euclidean norm of the 1-based multi-index:
/// `(Σ_μ (i_μ+1)²)^(−1/2)` for a 0-based input index.
pub fn inverse_norm_entry(index: &[usize]) -> f64 {
    let sum: f64 = index.iter().map(|&i| ((i + 1) * (i + 1)) as f64).sum();
    1.0 / sum.sqrt()
}

/// Ratio tensor: `(1 + Σ_{μ<d} i_μ / i_{μ+1})^(−1)` over 1-based indices,
/// for a 0-based input index.
pub fn ratio_tensor_entry(index: &[usize]) -> f64 {
    let sum: f64 = index
        .windows(2)
        .map(|w| (w[0] + 1) as f64 / (w[1] + 1) as f64)
        .sum();
    1.0 / (1.0 + sum)
}

/// One term of an exponential-sum approximation of `1/sqrt(r)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ExpTerm {
    pub omega: f64,
    pub alpha: f64,
}

/// Coefficients `(ω_ℓ, α_ℓ)` with `Σ_ℓ ω_ℓ e^{−α_ℓ r} ≈ 1/sqrt(r)` on
/// `[1, range]`, accurate to `epsilon` in the maximum norm.
///
/// # Text format
///
/// ```text
/// k epsilon R
/// omega_1 alpha_1
/// …
/// omega_k alpha_k
/// ```
#[derive(Clone, Debug, PartialEq)]
pub struct ExpSumCoefficients {
    pub terms: Vec<ExpTerm>,
    pub epsilon: f64,
    pub range: f64,
}

impl ExpSumCoefficients {
    pub fn new(terms: Vec<ExpTerm>, epsilon: f64, range: f64) -> Result<Self> {
        if terms.is_empty() {
            return Err(Error::Config("need at least one exponential term".into()));
        }
        if !(epsilon > 0.0) || !(range >= 1.0) {
            return Err(Error::Config(
                "epsilon must be positive and the range at least 1".into(),
            ));
        }
        if terms.iter().any(|t| t.alpha < 0.0) {
            return Err(Error::Config("decay rates must be non-negative".into()));
        }
        Ok(Self {
            terms,
            epsilon,
            range,
        })
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    /// Evaluates the exponential sum at `r`.
    pub fn evaluate(&self, r: f64) -> f64 {
        self.terms
            .iter()
            .map(|t| t.omega * (-t.alpha * r).exp())
            .sum()
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let file = std::fs::File::open(path)?;
        Self::read_from(BufReader::new(file))
    }

    pub fn read_from<R: Read>(reader: BufReader<R>) -> Result<Self> {
        let mut lines = reader.lines().filter(|l| {
            l.as_ref()
                .map(|s| !s.trim().is_empty() && !s.trim_start().starts_with('#'))
                .unwrap_or(true)
        });
        let header = lines
            .next()
            .ok_or_else(|| Error::Format("empty coefficient file".into()))??;
        let mut toks = header.split_whitespace();
        let k: usize = parse_tok(&mut toks, "k")?;
        let epsilon: f64 = parse_tok(&mut toks, "epsilon")?;
        let range: f64 = parse_tok(&mut toks, "R")?;
        let mut terms = Vec::with_capacity(k);
        for _ in 0..k {
            let line = lines
                .next()
                .ok_or_else(|| Error::Format("fewer coefficient lines than announced".into()))??;
            let mut toks = line.split_whitespace();
            let omega: f64 = parse_tok(&mut toks, "omega")?;
            let alpha: f64 = parse_tok(&mut toks, "alpha")?;
            terms.push(ExpTerm { omega, alpha });
        }
        Self::new(terms, epsilon, range)
    }
}

fn parse_tok<'a, T: std::str::FromStr>(
    toks: &mut impl Iterator<Item = &'a str>,
    what: &str,
) -> Result<T> {
    toks.next()
        .ok_or_else(|| Error::Format(format!("missing {what}")))?
        .parse()
        .map_err(|_| Error::Format(format!("unparsable {what}")))
}

/// Rank-`k` tensor train approximating the inverse-norm tensor through an
/// exponential sum: with `ω = ω*/sqrt(d)` and `α = α*/d`, every entry is
/// `Σ_ℓ ω_ℓ exp(−α_ℓ Σ_μ i_μ²)` over 1-based indices.
///
/// Requires `range ≥ max(n_μ)²` so the sum is accurate on the whole index
/// box; the pointwise error is then at most `epsilon / sqrt(d)`.
pub fn exp_sum_tt(dims: &[usize], coeffs: &ExpSumCoefficients) -> Result<TTRep> {
    let d = dims.len();
    if d < 2 {
        return Err(Error::Config("need at least two modes".into()));
    }
    let n_max = *dims.iter().max().unwrap();
    if ((n_max * n_max) as f64) > coeffs.range {
        return Err(Error::Config(format!(
            "coefficients are valid on [1, {}], but max(n)² = {}",
            coeffs.range,
            n_max * n_max
        )));
    }
    let k = coeffs.len();
    let scale = 1.0 / (d as f64).sqrt();
    let weight = |ell: usize, i: usize| -> f64 {
        let m = (i + 1) as f64;
        (-coeffs.terms[ell].alpha / d as f64 * m * m).exp()
    };
    let mut blocks = Vec::with_capacity(d);
    blocks.push(MatrixBlock::from_fn(dims[0], 1, k, |i, _, c| {
        coeffs.terms[c].omega * scale * weight(c, i)
    }));
    for &n in &dims[1..d - 1] {
        blocks.push(MatrixBlock::from_fn(n, k, k, |i, r, c| {
            if r == c {
                weight(c, i)
            } else {
                0.0
            }
        }));
    }
    blocks.push(MatrixBlock::from_fn(dims[d - 1], k, 1, |i, r, _| {
        weight(r, i)
    }));
    TTRep::new(blocks)
}

/// Tensor train with i.i.d. uniform `[−0.5, 0.5]` block entries and uniform
/// interior rank.
pub fn random_tt(dims: &[usize], rank: usize, seed: u64) -> Result<TTRep> {
    let d = dims.len();
    if d < 2 {
        return Err(Error::Config("need at least two modes".into()));
    }
    if rank == 0 {
        return Err(Error::Config("rank must be positive".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed::derive(seed, &[tag::TENSOR]));
    let mut blocks = Vec::with_capacity(d);
    for (s, &n) in dims.iter().enumerate() {
        let rows = if s == 0 { 1 } else { rank };
        let cols = if s == d - 1 { 1 } else { rank };
        blocks.push(MatrixBlock::from_fn(n, rows, cols, |_, _, _| {
            rng.random_range(-0.5..0.5)
        }));
    }
    TTRep::new(blocks)
}

/// Target singular-value profiles for [`rescale_singular_values`].
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SingularProfile {
    /// `σ_i = 10^{−i}`: steady exponential decay starting at `10^{−1}`.
    Decay,
    /// `σ_i = 10^{−i}` for `i ≤ r/2` and `10^{−i−2}` beyond: a two-decade
    /// gap in the middle of the spectrum.
    Gap,
}

impl SingularProfile {
    /// Target value for the 1-based singular value index `i` at rank `r`.
    pub fn target(&self, i: usize, r: usize) -> f64 {
        match self {
            SingularProfile::Decay => 10f64.powi(-(i as i32)),
            SingularProfile::Gap => {
                if i <= r / 2 {
                    10f64.powi(-(i as i32))
                } else {
                    10f64.powi(-(i as i32) - 2)
                }
            }
        }
    }

    pub fn targets(&self, r: usize) -> Vec<f64> {
        (1..=r).map(|i| self.target(i, r)).collect()
    }
}

#[derive(Clone, Copy, Debug)]
pub struct RescaleReport {
    pub passes: usize,
}

const RESCALE_MAX_PASSES: usize = 50;
const RESCALE_TOL: f64 = 1e-6;

/// Forces the singular values of every interior split matricization onto
/// the profile, keeping the dominant singular subspaces.
///
/// Works entirely on the representation: per split, the core's left
/// unfolding is re-factored and its singular values replaced.  Because the
/// splits interact, passes alternate until all profiles match to `1e-6`
/// relative accuracy (at most 50 passes).
pub fn rescale_singular_values(
    tt: &mut TTRep,
    profile: SingularProfile,
) -> Result<RescaleReport> {
    let d = tt.order();
    for pass in 1..=RESCALE_MAX_PASSES {
        for s in 0..d - 1 {
            tt.move_core(s)?;
            set_split_values(tt, s, profile)?;
        }
        if profile_matches(tt, profile)? {
            return Ok(RescaleReport { passes: pass });
        }
    }
    Err(Error::NoConvergence(format!(
        "singular-value profile not reached within {RESCALE_MAX_PASSES} passes"
    )))
}

/// Singular values of the split after mode `s` (rows: modes `0..=s`).
/// Moves the orthogonality core to `s`.
pub fn split_singular_values(tt: &mut TTRep, s: usize) -> Result<Vec<f64>> {
    if s + 1 >= tt.order() {
        return Err(Error::IndexOutOfBounds(format!(
            "split {} of an order-{} tensor",
            s,
            tt.order()
        )));
    }
    tt.move_core(s)?;
    let (_, r) = linalg::thin_qr(tt.block(s).left_unfolding());
    let mut sv: Vec<f64> = r.svd(false, false).singular_values.iter().cloned().collect();
    sv.sort_by(|a, b| b.partial_cmp(a).unwrap());
    Ok(sv)
}

/// Replaces the singular values of the split after mode `s` by the profile.
/// Requires the core at `s`; keeps it there.
fn set_split_values(tt: &mut TTRep, s: usize, profile: SingularProfile) -> Result<()> {
    debug_assert_eq!(tt.orth_core(), Some(s));
    let n = tt.block(s).len();
    let (q, rfac) = linalg::thin_qr(tt.block(s).left_unfolding());
    let rank = rfac.nrows().min(rfac.ncols());
    let svd = rfac.svd(true, true);
    let smax = svd.singular_values.iter().cloned().fold(0.0_f64, f64::max);
    let smin = svd.singular_values.iter().cloned().fold(f64::INFINITY, f64::min);
    if !(smax > 0.0) || smin < linalg::RANK_CUTOFF * smax {
        return Err(Error::RankDeficient(format!(
            "split {s} has numerical rank below its representation rank \
             (σ_min/σ_max = {:.3e})",
            if smax > 0.0 { smin / smax } else { 0.0 }
        )));
    }
    let u = svd.u.as_ref().expect("u requested");
    let vt = svd.v_t.as_ref().expect("v_t requested");
    let sigma = DMatrix::from_fn(rank, rank, |i, j| {
        if i == j {
            profile.target(i + 1, rank)
        } else {
            0.0
        }
    });
    let new_unfolding = q * u * sigma * vt;
    let new_block = MatrixBlock::fold_left(&new_unfolding, n)?;
    // Direct field write keeps the tracked core: neighbours are untouched,
    // and the core block itself carries no orthogonality requirement.
    tt.blocks[s] = new_block;
    Ok(())
}

fn profile_matches(tt: &mut TTRep, profile: SingularProfile) -> Result<bool> {
    for s in 0..tt.order() - 1 {
        let sv = split_singular_values(tt, s)?;
        let targets = profile.targets(sv.len());
        for (have, want) in sv.iter().zip(&targets) {
            if (have - want).abs() > RESCALE_TOL * want {
                return Ok(false);
            }
        }
    }
    Ok(true)
}

/// Perturbs the stored sample values in place:
/// `m_p ← m_p + magnitude · ν · e_p` with `e_p` i.i.d. uniform on `[−1, 1]`
/// and `ν = ‖m‖ / sqrt(#samples)` the root-mean-square value level.
pub fn add_noise(set: &mut SampleSet, magnitude: f64, noise_seed: u64) {
    let count = set.len();
    if count == 0 {
        return;
    }
    let nu = set.values_norm() / (count as f64).sqrt();
    let mut rng = ChaCha8Rng::seed_from_u64(seed::derive(noise_seed, &[tag::NOISE]));
    for v in set.values_mut() {
        let e: f64 = rng.random_range(-1.0..1.0);
        *v += magnitude * nu * e;
    }
}
