//! Alternating directions fitting.
//!
//! Instead of solving the slice least-squares problems exactly, a
//! microstep at mode `s` takes a gradient step: with the representation
//! orthogonalized with respect to `s`, the steepest-descent direction for
//! block `s` is
//!
//! ```text
//! N(j) = Σ_{p : p_s = j}  S_p · pre(p)ᵀ · suf(p)ᵀ
//! ```
//!
//! where `S` is the sample residual.  The step size minimizing the
//! residual is available in closed form per slice,
//! `α_j = ‖N(j)‖² / Σ_{p: p_s=j} z_p²` with `z_p = pre(p)·N(p_s)·suf(p)`,
//! and the residual update `S_p ← S_p − α_{p_s} z_p` is exact because the
//! evaluation is linear in the block.
//!
//! The overrelaxation variant freezes the representation for a whole
//! forward sweep and rebuilds every block from the frozen one, which
//! makes the sweep a function of a single step size `α` that a small
//! direction search can tune far beyond 1.

use std::time::Instant;

use nalgebra::DMatrix;

use crate::block::MatrixBlock;
use crate::error::{Error, Result};
use crate::sampling::SampleSet;
use crate::tt::TTRep;

use super::context::{residual_on, residual_values_on, Direction, PassProducts, SampleTable};
use super::{
    control_residual, initial_guess, rank_increase, SolverConfig, SolverReport, StopTracker,
    SweepRecord, Termination, EXACT_REL_TOL,
};

/// The values of `M − A` on the sample positions, kept in sample order.
///
/// The fitting loops update it in place along with the representation;
/// [`SparseResidual::compute`] rebuilds it from scratch.
#[derive(Clone, Debug)]
pub struct SparseResidual {
    values: Vec<f64>,
}

impl SparseResidual {
    /// Evaluates the representation on every sample position.
    pub fn compute(tt: &TTRep, samples: &SampleSet) -> Result<Self> {
        let pred = tt.evaluate_flat(samples.flat())?;
        let values = samples
            .values()
            .iter()
            .zip(&pred)
            .map(|(m, a)| m - a)
            .collect();
        Ok(Self { values })
    }

    pub fn norm(&self) -> f64 {
        self.values.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub(crate) fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }
}

/// Builds the gradient block `N` for mode `s` from chain products and the
/// residual values.
fn build_gradient(
    tbl: &SampleTable,
    s: usize,
    pre: &[f64],
    rl: usize,
    suf: &[f64],
    rr: usize,
    resid: &[f64],
) -> MatrixBlock {
    let mut n = MatrixBlock::zeros(tbl.dims[s], rl, rr);
    for (j, ids) in tbl.by_slice[s].iter().enumerate() {
        let slice = n.slice_mut(j);
        for &pid in ids {
            let p = pid as usize;
            let w = resid[p];
            let x = &pre[p * rl..][..rl];
            let y = &suf[p * rr..][..rr];
            for (b, &yb) in y.iter().enumerate() {
                let wy = w * yb;
                for (a, &xa) in x.iter().enumerate() {
                    slice[(a, b)] += wy * xa;
                }
            }
        }
    }
    n
}

/// `z_p = pre(p) · N(p_s) · suf(p)` for one sample.
#[inline]
fn z_value(n: &MatrixBlock, j: usize, x: &[f64], y: &[f64]) -> f64 {
    let g = n.slice(j);
    let data = g.as_slice();
    let rl = x.len();
    let mut v = 0.0;
    for (b, &yb) in y.iter().enumerate() {
        let col = &data[b * rl..][..rl];
        let dot: f64 = x.iter().zip(col).map(|(a, c)| a * c).sum();
        v += dot * yb;
    }
    v
}

struct StepStats {
    alpha_sum: f64,
    alpha_count: usize,
    stagnant: usize,
}

/// Applies one per-slice-optimal gradient step at mode `s` and keeps the
/// residual values exact.  Requires the orthogonality core at `s`.
fn step_mode(
    tt: &mut TTRep,
    tbl: &SampleTable,
    s: usize,
    pre: &[f64],
    rl: usize,
    suf: &[f64],
    rr: usize,
    resid: &mut [f64],
) -> StepStats {
    debug_assert_eq!(tt.orth_core(), Some(s));
    let n = build_gradient(tbl, s, pre, rl, suf, rr, resid);
    let mut stats = StepStats {
        alpha_sum: 0.0,
        alpha_count: 0,
        stagnant: 0,
    };
    let mut zbuf: Vec<f64> = Vec::new();
    for (j, ids) in tbl.by_slice[s].iter().enumerate() {
        if ids.is_empty() {
            continue;
        }
        let num = n.slice(j).norm_squared();
        zbuf.clear();
        let mut den = 0.0;
        for &pid in ids {
            let p = pid as usize;
            let z = z_value(&n, j, &pre[p * rl..][..rl], &suf[p * rr..][..rr]);
            den += z * z;
            zbuf.push(z);
        }
        let alpha = if den > 0.0 {
            num / den
        } else {
            if num > 0.0 {
                stats.stagnant += 1;
            }
            0.0
        };
        if alpha != 0.0 {
            // In-place block update keeps the core at `s`.
            *tt.blocks[s].slice_mut(j) += n.slice(j) * alpha;
            for (&pid, &z) in ids.iter().zip(&zbuf) {
                resid[pid as usize] -= alpha * z;
            }
        }
        stats.alpha_sum += alpha;
        stats.alpha_count += 1;
    }
    stats
}

/// Side facts of one gradient microstep.
#[derive(Clone, Copy, Debug)]
pub struct AdfMicrostepOutcome {
    /// Mean step size over the slices that held samples.
    pub mean_alpha: f64,
    /// Slices whose curvature vanished while the gradient did not; their
    /// step size was forced to zero.
    pub stagnant_slices: usize,
}

fn check_sample_shape(tt: &TTRep, samples: &SampleSet, s: usize) -> Result<()> {
    if samples.dims() != tt.mode_sizes() {
        return Err(Error::Shape(format!(
            "sample grid {:?} does not match representation modes {:?}",
            samples.dims(),
            tt.mode_sizes()
        )));
    }
    if s >= tt.order() {
        return Err(Error::IndexOutOfBounds(format!(
            "mode {s} out of range for order {}",
            tt.order()
        )));
    }
    Ok(())
}

/// Steepest-descent direction for block `s`: the negative gradient of
/// `½‖M − A‖²` over the samples with respect to that block, in the frame
/// of the `s`-orthogonalized representation (which this call establishes).
pub fn compute_gradient_block(
    tt: &mut TTRep,
    samples: &SampleSet,
    residual: &SparseResidual,
    s: usize,
) -> Result<MatrixBlock> {
    check_sample_shape(tt, samples, s)?;
    if residual.len() != samples.len() {
        return Err(Error::Shape("residual length != sample count".into()));
    }
    let tbl = SampleTable::new(samples);
    tt.move_core(s)?;
    let pass = PassProducts::start(tt, &tbl, &[s], Direction::Up);
    let (pre, rl, suf, rr) = pass.sides();
    Ok(build_gradient(&tbl, s, pre, rl, suf, rr, residual.values()))
}

/// The single step size along the gradient block that minimizes the
/// sample residual: `α* = ‖N‖² / Σ_p z_p²`.  Returns zero when the
/// curvature term vanishes.
pub fn optimal_alpha(
    tt: &mut TTRep,
    samples: &SampleSet,
    residual: &SparseResidual,
    s: usize,
) -> Result<f64> {
    check_sample_shape(tt, samples, s)?;
    let tbl = SampleTable::new(samples);
    tt.move_core(s)?;
    let pass = PassProducts::start(tt, &tbl, &[s], Direction::Up);
    let (pre, rl, suf, rr) = pass.sides();
    let n = build_gradient(&tbl, s, pre, rl, suf, rr, residual.values());
    let num = n.norm_squared();
    let mut den = 0.0;
    for p in 0..tbl.count {
        let z = z_value(
            &n,
            tbl.idx(p, s),
            &pre[p * rl..][..rl],
            &suf[p * rr..][..rr],
        );
        den += z * z;
    }
    Ok(if den > 0.0 { num / den } else { 0.0 })
}

/// One per-slice-optimal gradient step at mode `s`, updating the block
/// and the residual values together.
pub fn adf_microstep(
    tt: &mut TTRep,
    samples: &SampleSet,
    residual: &mut SparseResidual,
    s: usize,
) -> Result<AdfMicrostepOutcome> {
    check_sample_shape(tt, samples, s)?;
    if residual.len() != samples.len() {
        return Err(Error::Shape("residual length != sample count".into()));
    }
    let tbl = SampleTable::new(samples);
    tt.move_core(s)?;
    let pass = PassProducts::start(tt, &tbl, &[s], Direction::Up);
    let (pre, rl, suf, rr) = pass.sides();
    let stats = step_mode(tt, &tbl, s, pre, rl, suf, rr, residual.values_mut());
    Ok(AdfMicrostepOutcome {
        mean_alpha: if stats.alpha_count > 0 {
            stats.alpha_sum / stats.alpha_count as f64
        } else {
            0.0
        },
        stagnant_slices: stats.stagnant,
    })
}

struct AdfSweepStats {
    final_res: f64,
    alpha_sum: f64,
    alpha_count: usize,
    stagnant: usize,
    microstep_res: Vec<f64>,
}

fn norm_of(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn adf_sweep(
    tt: &mut TTRep,
    tbl: &SampleTable,
    resid: &mut [f64],
    phases: &[Vec<usize>],
    record: bool,
) -> AdfSweepStats {
    let mut stats = AdfSweepStats {
        final_res: f64::NAN,
        alpha_sum: 0.0,
        alpha_count: 0,
        stagnant: 0,
        microstep_res: Vec::new(),
    };
    for phase in phases {
        let dir = if phase.len() >= 2 && phase[1] < phase[0] {
            Direction::Down
        } else {
            Direction::Up
        };
        let mut pass = PassProducts::start(tt, tbl, phase, dir);
        loop {
            let s = pass.mode();
            {
                let (pre, rl, suf, rr) = pass.sides();
                let st = step_mode(tt, tbl, s, pre, rl, suf, rr, resid);
                stats.alpha_sum += st.alpha_sum;
                stats.alpha_count += st.alpha_count;
                stats.stagnant += st.stagnant;
            }
            if record {
                stats.microstep_res.push(norm_of(resid));
            }
            if pass.is_last() {
                break;
            }
            pass.advance(tt, tbl);
        }
    }
    stats.final_res = norm_of(resid);
    stats
}

/// Fits a tensor train to the samples by rank-adaptive alternating
/// directions fitting with per-slice optimal step sizes.
pub fn adf_solve(
    samples: &SampleSet,
    control: Option<&SampleSet>,
    cfg: &SolverConfig,
) -> Result<(TTRep, SolverReport)> {
    cfg.validate(samples)?;
    let tbl = SampleTable::new(samples);
    let phases = cfg.sweep_order.phases(samples.order());
    let mut tt = initial_guess(samples.dims())?;
    let t0 = Instant::now();

    let mut sweeps: Vec<SweepRecord> = Vec::new();
    let mut rank_increases = Vec::new();
    let mut micro = Vec::new();
    let mut zero_events = 0;
    let mut stagnation_events = 0;
    let mut sweep_no = 0;
    let mut termination = Termination::IterBudget;

    'stages: for stage_rank in 1..=cfg.r_final {
        // The residual values are rebuilt at every stage start, in
        // particular right after a rank increase.
        let mut resid = residual_values_on(&tt, &tbl);
        let baseline = norm_of(&resid);
        if tbl.relative(baseline) <= EXACT_REL_TOL {
            termination = Termination::Exact;
            break;
        }
        let mut tracker = StopTracker::new(baseline, cfg.eps_stop);
        let mut stage_converged = false;
        for _ in 0..cfg.iter_max {
            let t_sweep = Instant::now();
            let stats = adf_sweep(&mut tt, &tbl, &mut resid, &phases, cfg.record_microsteps);
            let elapsed = t_sweep.elapsed().as_secs_f64();
            zero_events += tbl.dims.iter().sum::<usize>() - stats.alpha_count;
            stagnation_events += stats.stagnant;
            micro.extend(stats.microstep_res);
            let res = stats.final_res;
            sweep_no += 1;
            sweeps.push(SweepRecord {
                sweep: sweep_no,
                rank: stage_rank,
                res_p: tbl.relative(res),
                res_c: control_residual(&tt, control),
                alpha: Some(if stats.alpha_count > 0 {
                    stats.alpha_sum / stats.alpha_count as f64
                } else {
                    0.0
                }),
                elapsed,
            });
            if tbl.relative(res) <= EXACT_REL_TOL {
                termination = Termination::Exact;
                break 'stages;
            }
            tracker.push(res);
            if tracker.should_stop() {
                stage_converged = true;
                break;
            }
        }
        if stage_rank < cfg.r_final {
            rank_increases.push(sweep_no);
            rank_increase(&mut tt);
        } else {
            termination = if stage_converged {
                Termination::Converged
            } else {
                Termination::IterBudget
            };
        }
    }

    let res_p = tbl.relative(residual_on(&tt, &tbl));
    let res_c = control_residual(&tt, control);
    let final_rank = tt.max_rank();
    Ok((
        tt,
        SolverReport {
            sweeps,
            termination,
            final_rank,
            res_p,
            res_c,
            rank_increases,
            zero_density_events: zero_events,
            stagnation_events,
            microstep_residuals: micro,
            elapsed_seconds: t0.elapsed().as_secs_f64(),
        },
    ))
}

/// The candidate block for mode `s` rebuilt from a frozen representation
/// `g_minus` with step size `alpha`:
///
/// ```text
/// G_s(j) = LS¹ · G⁻_s(j) · LS²  +  α Σ_{p: p_s=j} S⁻_p · pre(p)ᵀ · suf(p)ᵀ
/// ```
///
/// with `LS¹ = (G^{<s})ᵀ(G⁻)^{<s}`, `LS² = (G⁻)^{>s}(G^{>s})ᵀ`, the
/// residual `S⁻` taken against `g_minus`, and the chain products through
/// the current representation `g`, which must be orthogonalized with
/// respect to `s`.
pub fn adf_core_step(
    g: &TTRep,
    g_minus: &TTRep,
    samples: &SampleSet,
    s: usize,
    alpha: f64,
) -> Result<MatrixBlock> {
    check_sample_shape(g, samples, s)?;
    if g_minus.mode_sizes() != g.mode_sizes() {
        return Err(Error::Shape(
            "current and frozen representations differ in mode sizes".into(),
        ));
    }
    let d = g.order();
    debug_assert!(
        g.orth_core() == Some(s) && g.check_orthogonality(1e-8),
        "representation must be orthogonalized with respect to {s}"
    );

    // LS¹ by forward recurrence over the left blocks.
    let mut ls1 = DMatrix::<f64>::identity(1, 1);
    for t in 0..s {
        let (gb, mb) = (g.block(t), g_minus.block(t));
        let mut next = DMatrix::zeros(gb.cols(), mb.cols());
        for i in 0..gb.len() {
            next += gb.slice(i).transpose() * &ls1 * mb.slice(i);
        }
        ls1 = next;
    }
    // LS² by backward recurrence over the right blocks.
    let mut ls2 = DMatrix::<f64>::identity(1, 1);
    for t in (s + 1..d).rev() {
        let (gb, mb) = (g.block(t), g_minus.block(t));
        let mut next = DMatrix::zeros(mb.rows(), gb.rows());
        for i in 0..gb.len() {
            next += mb.slice(i) * &ls2 * gb.slice(i).transpose();
        }
        ls2 = next;
    }

    let tbl = SampleTable::new(samples);
    let frozen_resid = residual_values_on(g_minus, &tbl);

    let mut out = MatrixBlock::zeros(g.block(s).len(), g.block(s).rows(), g.block(s).cols());
    for j in 0..out.len() {
        out.set_slice(j, &ls1 * g_minus.block(s).slice(j) * &ls2)?;
    }
    if alpha != 0.0 {
        let mut pass_tt = g.clone();
        let pass = PassProducts::start(&mut pass_tt, &tbl, &[s], Direction::Up);
        let (pre, rl, suf, rr) = pass.sides();
        let n = build_gradient(&tbl, s, pre, rl, suf, rr, &frozen_resid);
        for j in 0..out.len() {
            *out.slice_mut(j) += n.slice(j) * alpha;
        }
    }
    Ok(out)
}

/// One frozen forward sweep at a fixed step size: every block is rebuilt
/// from `base` (which must carry its orthogonality core at mode 0) and
/// immediately re-orthogonalized, with the `LS¹` recurrence replacing the
/// discarded triangular factors.  Returns the candidate representation.
fn frozen_sweep(base: &TTRep, tbl: &SampleTable, alpha: f64) -> TTRep {
    debug_assert_eq!(base.orth_core(), Some(0));
    let d = base.order();
    let count = tbl.count;
    let rho = residual_values_on(base, tbl);

    // Suffix products of `base` for every mode.
    let sufs: Vec<(Vec<f64>, usize)> = {
        let mut cur = vec![1.0; count];
        let mut cur_dim = 1usize;
        let mut rev: Vec<(Vec<f64>, usize)> = Vec::with_capacity(d);
        for t in (0..d).rev() {
            rev.push((cur.clone(), cur_dim));
            if t > 0 {
                let block = base.block(t);
                let out_dim = block.rows();
                let mut out = vec![0.0; count * out_dim];
                for p in 0..count {
                    let m = block.slice(tbl.idx(p, t));
                    let data = m.as_slice();
                    let x = &cur[p * cur_dim..][..cur_dim];
                    let y = &mut out[p * out_dim..][..out_dim];
                    for (c, &xc) in x.iter().enumerate() {
                        let col = &data[c * out_dim..][..out_dim];
                        for (yr, &m_rc) in y.iter_mut().zip(col) {
                            *yr += m_rc * xc;
                        }
                    }
                }
                cur = out;
                cur_dim = out_dim;
            }
        }
        rev.reverse();
        rev
    };

    let mut ls1 = DMatrix::<f64>::identity(1, 1);
    let mut pre = vec![1.0; count];
    let mut rl = 1usize;
    let mut new_blocks: Vec<MatrixBlock> = Vec::with_capacity(d);

    for s in 0..d {
        let gm = base.block(s);
        let n_s = gm.len();
        let old_rr = gm.cols();
        let (suf, suf_dim) = &sufs[s];
        debug_assert_eq!(*suf_dim, old_rr);

        // First summand per slice; kept for the LS¹ update.
        let first: Vec<DMatrix<f64>> = (0..n_s).map(|j| &ls1 * gm.slice(j)).collect();
        let mut b = MatrixBlock::zeros(n_s, rl, old_rr);
        for j in 0..n_s {
            b.slice_mut(j).copy_from(&first[j]);
        }
        for p in 0..count {
            let w = alpha * rho[p];
            if w == 0.0 {
                continue;
            }
            let j = tbl.idx(p, s);
            let slice = b.slice_mut(j);
            let x = &pre[p * rl..][..rl];
            let y = &suf[p * old_rr..][..old_rr];
            for (c, &yc) in y.iter().enumerate() {
                let wy = w * yc;
                for (r, &xr) in x.iter().enumerate() {
                    slice[(r, c)] += wy * xr;
                }
            }
        }

        if s < d - 1 {
            let mut qb = b;
            let _r = qb.make_left_orthogonal();
            let mut next_ls1 = DMatrix::zeros(qb.cols(), old_rr);
            for j in 0..n_s {
                next_ls1 += qb.slice(j).transpose() * &first[j];
            }
            // Advance the prefix products through the fresh block.
            let out_dim = qb.cols();
            let mut out = vec![0.0; count * out_dim];
            for p in 0..count {
                let m = qb.slice(tbl.idx(p, s));
                let data = m.as_slice();
                let x = &pre[p * rl..][..rl];
                let y = &mut out[p * out_dim..][..out_dim];
                for (c, yc) in y.iter_mut().enumerate() {
                    let col = &data[c * rl..][..rl];
                    *yc = x.iter().zip(col).map(|(a, v)| a * v).sum();
                }
            }
            pre = out;
            rl = out_dim;
            ls1 = next_ls1;
            new_blocks.push(qb);
        } else {
            new_blocks.push(b);
        }
    }

    let mut out = TTRep::new(new_blocks).expect("frozen sweep keeps a valid chain");
    out.core = Some(d - 1);
    out
}

#[derive(Clone, Copy, PartialEq, Eq, Debug)]
enum StepDir {
    Up,
    Down,
    Back,
}

/// Fits a tensor train to the samples with frozen forward sweeps and a
/// sweep-level step-size search.
pub fn adf_sor_solve(
    samples: &SampleSet,
    control: Option<&SampleSet>,
    cfg: &SolverConfig,
) -> Result<(TTRep, SolverReport)> {
    cfg.validate(samples)?;
    let tbl = SampleTable::new(samples);
    let mut tt = initial_guess(samples.dims())?;
    let t0 = Instant::now();

    let grid_size: f64 = samples.dims().iter().map(|&n| n as f64).product();

    let mut sweeps: Vec<SweepRecord> = Vec::new();
    let mut rank_increases = Vec::new();
    let mut sweep_no = 0;
    let mut termination = Termination::IterBudget;

    let inf_if_bad = |r: f64| if r.is_finite() { r } else { f64::INFINITY };

    'stages: for stage_rank in 1..=cfg.r_final {
        tt.move_core(0).expect("mode 0 exists");
        let mut res_cur = residual_on(&tt, &tbl);
        if tbl.relative(res_cur) <= EXACT_REL_TOL {
            termination = Termination::Exact;
            break;
        }
        let mut tracker = StopTracker::new(res_cur, cfg.eps_stop);
        let mut alpha = (grid_size / tbl.count as f64).max(1.0);
        let mut delta = alpha / 4.0;
        let mut prev_dir: Option<StepDir> = None;
        let mut backs = 0usize;
        let mut prev_gamma: Option<f64> = None;
        let mut stage_converged = false;
        let mut stalled = false;

        for _ in 0..cfg.iter_max {
            let t_sweep = Instant::now();
            let mut accepted_dir = StepDir::Back;
            loop {
                let a_up = alpha + delta;
                let a_down = (alpha - delta / 5.0).max(1.0);
                let cand_up = frozen_sweep(&tt, &tbl, a_up);
                let cand_down = frozen_sweep(&tt, &tbl, a_down);
                let r_up = inf_if_bad(residual_on(&cand_up, &tbl));
                let r_down = inf_if_bad(residual_on(&cand_down, &tbl));
                if r_up > res_cur && r_down > res_cur {
                    backs += 1;
                    if backs > 10 {
                        stalled = true;
                        break;
                    }
                    alpha = (1.0 + alpha) / 2.0;
                    delta /= 2.0;
                    prev_dir = Some(StepDir::Back);
                    continue;
                }
                let (a_new, cand, r_new, dir) = if r_up <= r_down {
                    (a_up, cand_up, r_up, StepDir::Up)
                } else {
                    (a_down, cand_down, r_down, StepDir::Down)
                };
                if prev_dir == Some(dir) {
                    delta = (alpha / 10.0).min(1.2 * delta);
                } else {
                    delta /= 2.0;
                }
                alpha = a_new;
                prev_dir = Some(dir);
                accepted_dir = dir;
                backs = 0;
                tt = cand;
                tt.move_core(0).expect("mode 0 exists");
                res_cur = r_new;
                break;
            }
            if stalled {
                break;
            }
            let elapsed = t_sweep.elapsed().as_secs_f64();
            sweep_no += 1;
            sweeps.push(SweepRecord {
                sweep: sweep_no,
                rank: stage_rank,
                res_p: tbl.relative(res_cur),
                res_c: control_residual(&tt, control),
                alpha: Some(alpha),
                elapsed,
            });
            if tbl.relative(res_cur) <= EXACT_REL_TOL {
                termination = Termination::Exact;
                break 'stages;
            }
            let gamma = tracker.push(res_cur);
            let flat_gamma = prev_gamma
                .map(|g| g > 0.0 && (1.0 - gamma / g).abs() < 1e-7)
                .unwrap_or(false);
            prev_gamma = Some(gamma);
            if tracker.should_stop() && (accepted_dir == StepDir::Down || flat_gamma) {
                stage_converged = true;
                break;
            }
        }

        if stage_rank < cfg.r_final {
            rank_increases.push(sweep_no);
            rank_increase(&mut tt);
        } else {
            termination = if stalled {
                Termination::StalledBack
            } else if stage_converged {
                Termination::Converged
            } else {
                Termination::IterBudget
            };
        }
    }

    let res_p = tbl.relative(residual_on(&tt, &tbl));
    let res_c = control_residual(&tt, control);
    let final_rank = tt.max_rank();
    Ok((
        tt,
        SolverReport {
            sweeps,
            termination,
            final_rank,
            res_p,
            res_c,
            rank_increases,
            zero_density_events: 0,
            stagnation_events: 0,
            microstep_residuals: Vec::new(),
            elapsed_seconds: t0.elapsed().as_secs_f64(),
        },
    ))
}
