//! Alternating least squares.
//!
//! A microstep at mode `s` solves, for every slice `j`, the least-squares
//! problem over the samples hitting that slice: with the representation
//! orthogonalized with respect to `s`, the sample value predicted by the
//! representation is linear in `G_s(j)`, with design row
//! `pre(p) ⊗ suf(p)`.  The minimum-norm solution keeps empty or
//! rank-deficient slices well defined.  Each microstep can only decrease
//! the sample residual.

use std::time::Instant;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::linalg::lstsq_min_norm;
use crate::sampling::SampleSet;
use crate::tt::TTRep;

use super::context::{residual_on, Direction, PassProducts, SampleTable};
use super::{
    control_residual, initial_guess, rank_increase, SolverConfig, SolverReport, StopTracker,
    SweepRecord, Termination, EXACT_REL_TOL,
};

/// Side facts of a single microstep.
#[derive(Clone, Copy, Debug, Default)]
pub struct MicrostepOutcome {
    /// Slices without any sample, left unchanged.
    pub zero_density_slices: usize,
}

/// Replaces every slice of block `s` by the minimum-norm least-squares
/// solution over the samples hitting it.  Orthogonalizes the
/// representation with respect to `s` first.
pub fn als_microstep(tt: &mut TTRep, samples: &SampleSet, s: usize) -> Result<MicrostepOutcome> {
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
    let tbl = SampleTable::new(samples);
    tt.move_core(s)?;
    let modes = [s];
    let pass = PassProducts::start(tt, &tbl, &modes, Direction::Up);
    let (pre, rl, suf, rr) = pass.sides();
    let zero = solve_mode(tt, &tbl, s, pre, rl, suf, rr);
    Ok(MicrostepOutcome {
        zero_density_slices: zero,
    })
}

/// Core of the microstep; requires the orthogonality core at `s` and valid
/// chain products.  Returns the number of empty slices skipped.
///
/// Each slice update is safeguarded: when the computed solution does not
/// lower that slice's residual — possible only through floating-point error
/// on near-degenerate systems, never in exact arithmetic — the current
/// slice is kept, so a microstep cannot increase the sample residual.
fn solve_mode(
    tt: &mut TTRep,
    tbl: &SampleTable,
    s: usize,
    pre: &[f64],
    rl: usize,
    suf: &[f64],
    rr: usize,
) -> usize {
    debug_assert_eq!(tt.orth_core(), Some(s));
    let cols = rl * rr;
    let mut zero = 0;
    for j in 0..tbl.dims[s] {
        let ids = &tbl.by_slice[s][j];
        if ids.is_empty() {
            zero += 1;
            continue;
        }
        let mut a = DMatrix::zeros(ids.len(), cols);
        let mut b = DVector::zeros(ids.len());
        for (row, &pid) in ids.iter().enumerate() {
            let p = pid as usize;
            let x = &pre[p * rl..][..rl];
            let y = &suf[p * rr..][..rr];
            for (bc, &yb) in y.iter().enumerate() {
                for (ac, &xa) in x.iter().enumerate() {
                    a[(row, bc * rl + ac)] = xa * yb;
                }
            }
            b[row] = tbl.vals[p];
        }
        let g_old = DVector::from_column_slice(tt.blocks[s].slice(j).as_slice());
        let g = lstsq_min_norm(a.clone(), b.clone());
        if (&a * &g - &b).norm() > (&a * &g_old - &b).norm() {
            continue;
        }
        // Writing the slice directly keeps the core at `s`: the other
        // blocks are untouched, so their orthogonality still holds.
        tt.blocks[s]
            .set_slice(j, DMatrix::from_column_slice(rl, rr, g.as_slice()))
            .expect("replacement slice has the block's shape");
    }
    zero
}

pub(crate) struct SweepStats {
    pub zero_density: usize,
    pub final_res: f64,
    pub microstep_res: Vec<f64>,
}

/// One full sweep over all modes in the configured order.
pub(crate) fn als_sweep(
    tt: &mut TTRep,
    tbl: &SampleTable,
    phases: &[Vec<usize>],
    record: bool,
) -> SweepStats {
    let mut zero = 0;
    let mut micro = Vec::new();
    let mut final_res = f64::NAN;
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
                zero += solve_mode(tt, tbl, s, pre, rl, suf, rr);
            }
            if record {
                micro.push(pass.residual_here(tt, tbl));
            }
            if pass.is_last() {
                final_res = pass.residual_here(tt, tbl);
                break;
            }
            pass.advance(tt, tbl);
        }
    }
    SweepStats {
        zero_density: zero,
        final_res,
        microstep_res: micro,
    }
}

/// Fits a tensor train to the samples by rank-adaptive alternating least
/// squares.
pub fn als_solve(
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
    let mut sweep_no = 0;
    let mut termination = Termination::IterBudget;

    'stages: for stage_rank in 1..=cfg.r_final {
        let baseline = residual_on(&tt, &tbl);
        if tbl.relative(baseline) <= EXACT_REL_TOL {
            termination = Termination::Exact;
            break;
        }
        let mut tracker = StopTracker::new(baseline, cfg.eps_stop);
        let mut stage_converged = false;
        for _ in 0..cfg.iter_max {
            let t_sweep = Instant::now();
            let stats = als_sweep(&mut tt, &tbl, &phases, cfg.record_microsteps);
            let elapsed = t_sweep.elapsed().as_secs_f64();
            zero_events += stats.zero_density;
            micro.extend(stats.microstep_res);
            let res = stats.final_res;
            sweep_no += 1;
            sweeps.push(SweepRecord {
                sweep: sweep_no,
                rank: stage_rank,
                res_p: tbl.relative(res),
                res_c: control_residual(&tt, control),
                alpha: None,
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
            stagnation_events: 0,
            microstep_residuals: micro,
            elapsed_seconds: t0.elapsed().as_secs_f64(),
        },
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::generators::random_tt;
    use crate::sampling::generate_index_set;
    use crate::solver::Algorithm;

    fn sampled_target(
        dims: &[usize],
        rank: usize,
        c_sd: usize,
        seed: u64,
    ) -> (TTRep, SampleSet) {
        let target = random_tt(dims, rank, seed).unwrap();
        let idx = generate_index_set(dims, rank, c_sd, seed + 1).unwrap();
        let set = idx.attach_values(&target, "P").unwrap();
        (target, set)
    }

    #[test]
    fn microstep_never_increases_the_residual() {
        let dims = [4usize, 3, 4, 3];
        let (_, set) = sampled_target(&dims, 2, 4, 3);
        let mut tt = random_tt(&dims, 2, 99).unwrap();
        let mut prev = set.residual_of(&tt).unwrap();
        for s in [0usize, 1, 2, 3, 2, 1, 0] {
            als_microstep(&mut tt, &set, s).unwrap();
            let cur = set.residual_of(&tt).unwrap();
            assert!(
                cur <= prev + 1e-12 * (1.0 + prev),
                "residual rose at mode {s}: {prev} -> {cur}"
            );
            prev = cur;
        }
    }

    #[test]
    fn microstep_reports_empty_slices() {
        // Samples confined to slice 0 of mode 0: the other three slices of
        // that mode have no data.
        let dims = [4usize, 3, 3];
        let target = random_tt(&dims, 1, 5).unwrap();
        let flat: Vec<u32> = (0..3)
            .flat_map(|j| (0..3).map(move |k| [0u32, j as u32, k as u32]))
            .flatten()
            .collect();
        let idx = crate::sampling::IndexSet::from_indices(&dims, &flat).unwrap();
        let set = idx.attach_values(&target, "P").unwrap();
        let mut tt = random_tt(&dims, 1, 6).unwrap();
        let out = als_microstep(&mut tt, &set, 0).unwrap();
        assert_eq!(out.zero_density_slices, 3);
        let out = als_microstep(&mut tt, &set, 1).unwrap();
        assert_eq!(out.zero_density_slices, 0);
    }

    #[test]
    fn full_grid_single_microstep_matches_projection_bound() {
        // On the full grid the slice problems are the exact projections,
        // so one microstep must reach the best rank-capped approximation
        // along that mode split at least as well as before.
        let dims = [3usize, 4];
        let (target, set) = {
            let target = random_tt(&dims, 2, 12).unwrap();
            let idx = crate::sampling::IndexSet::full_grid(&dims).unwrap();
            let set = idx.attach_values(&target, "F").unwrap();
            (target, set)
        };
        let mut tt = random_tt(&dims, 2, 77).unwrap();
        als_microstep(&mut tt, &set, 0).unwrap();
        als_microstep(&mut tt, &set, 1).unwrap();
        // Rank 2 suffices for a 3×4 random rank-2 target: residual ~ 0
        // after two exact projections is not guaranteed in general, but it
        // must not exceed the starting residual of the uniform guess.
        let res = set.residual_of(&tt).unwrap();
        let norm = set.values_norm();
        assert!(res <= norm, "projection left residual above trivial bound");
        drop(target);
    }

    #[test]
    fn solve_recovers_a_random_rank_two_tensor() {
        let dims = [5usize, 4, 5];
        let (target, set) = sampled_target(&dims, 2, 6, 21);
        let mut cfg = SolverConfig::new(Algorithm::Als, 2);
        cfg.eps_stop = 5e-5;
        let (fit, report) = als_solve(&set, None, &cfg).unwrap();
        assert!(
            report.res_p < 1e-8,
            "expected interpolation-quality fit, got {}",
            report.res_p
        );
        // Off-sample generalization: compare on the full grid.
        let want = target.clone().materialize().unwrap();
        let got = fit.clone().materialize().unwrap();
        let err: f64 = want
            .iter()
            .zip(&got)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt();
        let norm: f64 = want.iter().map(|a| a * a).sum::<f64>().sqrt();
        assert!(err / norm < 1e-6, "full-grid error {} too large", err / norm);
    }

    #[test]
    fn recorded_microstep_residuals_are_monotone() {
        let dims = [4usize, 4, 4];
        let (_, set) = sampled_target(&dims, 2, 5, 31);
        let mut cfg = SolverConfig::new(Algorithm::Als, 2);
        cfg.record_microsteps = true;
        cfg.iter_max = 10;
        let (_, report) = als_solve(&set, None, &cfg).unwrap();
        assert!(!report.microstep_residuals.is_empty());
        // Monotone within each rank stage; a rank increase changes the
        // tensor, so the comparison restarts there.
        let d = set.order();
        let mut prev = f64::INFINITY;
        for (k, &r) in report.microstep_residuals.iter().enumerate() {
            let at_stage_boundary =
                k % d == 0 && report.rank_increases.contains(&(k / d));
            if at_stage_boundary {
                prev = f64::INFINITY;
            }
            assert!(
                r <= prev + 1e-12 * (1.0 + prev),
                "microstep residual rose within a stage at record {k}"
            );
            prev = r;
        }
    }

    #[test]
    fn solve_rejects_underdetermined_sample_sets() {
        let dims = [6usize, 6, 6];
        let target = random_tt(&dims, 1, 2).unwrap();
        let flat: Vec<u32> = (0..6).flat_map(|i| [i as u32, i as u32, i as u32]).collect();
        let idx = crate::sampling::IndexSet::from_indices(&dims, &flat).unwrap();
        let set = idx.attach_values(&target, "P").unwrap();
        let cfg = SolverConfig::new(Algorithm::Als, 1);
        let err = als_solve(&set, None, &cfg).unwrap_err();
        assert!(matches!(err, Error::Config(_)));
    }

    #[test]
    fn exact_interpolation_stops_early() {
        // The uniform rank-one tensor itself as target: the initial guess
        // already interpolates, so the solver must stop with Exact.
        let dims = [3usize, 3, 3];
        let uniform = initial_guess(&dims).unwrap();
        let idx = generate_index_set(&dims, 2, 4, 8).unwrap();
        let set = idx.attach_values(&uniform, "P").unwrap();
        let cfg = SolverConfig::new(Algorithm::Als, 3);
        let (_, report) = als_solve(&set, None, &cfg).unwrap();
        assert_eq!(report.termination, Termination::Exact);
        assert!(report.res_p <= EXACT_REL_TOL);
    }
}
