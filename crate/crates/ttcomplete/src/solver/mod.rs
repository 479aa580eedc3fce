//! Alternating completion solvers.
//!
//! Both solvers fit a tensor train to the values of a sparse sample set by
//! sweeping over the modes and updating one block at a time, growing the
//! representation rank one step at a time from the uniform rank-one start:
//!
//! * [`als`] solves an exact least-squares problem per slice and microstep;
//! * [`adf`] takes gradient steps with per-slice optimal step sizes (with an
//!   optional sweep-level overrelaxation search).

pub mod als;
pub mod adf;
pub(crate) mod context;

use std::fmt;

use crate::block::MatrixBlock;
use crate::error::{Error, Result};
use crate::sampling::SampleSet;
use crate::tt::TTRep;

/// Relative residual below which a fit counts as exact interpolation.
pub(crate) const EXACT_REL_TOL: f64 = 1e-14;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Algorithm {
    /// Alternating least squares: exact slice-wise minimization.
    Als,
    /// Alternating directions fitting with per-slice optimal step sizes.
    Adf,
    /// Alternating directions fitting with a sweep-level overrelaxation
    /// search on top of frozen-residual sweeps.
    AdfSor,
}

impl std::str::FromStr for Algorithm {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "als" => Ok(Self::Als),
            "adf" => Ok(Self::Adf),
            "adf-sor" => Ok(Self::AdfSor),
            other => Err(Error::Config(format!(
                "unknown algorithm {other:?} (expected als, adf or adf-sor)"
            ))),
        }
    }
}

impl std::fmt::Display for Algorithm {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Self::Als => "als",
            Self::Adf => "adf",
            Self::AdfSor => "adf-sor",
        })
    }
}

/// Order in which a sweep visits the modes.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SweepOrder {
    /// Ascending through the first half, then descending from the far end
    /// to the middle; every mode is visited exactly once per sweep.
    HalfAlternating,
    /// Plain ascending order through all modes.
    Forward,
}

impl SweepOrder {
    /// The mode visit order as contiguous directional phases.
    pub(crate) fn phases(&self, d: usize) -> Vec<Vec<usize>> {
        match self {
            SweepOrder::HalfAlternating => {
                let h = d / 2;
                let up: Vec<usize> = (0..h).collect();
                let down: Vec<usize> = (h..d).rev().collect();
                if up.is_empty() {
                    vec![down]
                } else {
                    vec![up, down]
                }
            }
            SweepOrder::Forward => vec![(0..d).collect()],
        }
    }
}

impl std::str::FromStr for SweepOrder {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "half-alternating" => Ok(Self::HalfAlternating),
            "forward" => Ok(Self::Forward),
            other => Err(Error::Config(format!(
                "unknown sweep order {other:?} (expected half-alternating or forward)"
            ))),
        }
    }
}

/// Configuration shared by all solvers.
#[derive(Clone, Debug)]
pub struct SolverConfig {
    pub algorithm: Algorithm,
    /// Final uniform representation rank to grow towards.
    pub r_final: usize,
    /// Sweep budget per rank stage.
    pub iter_max: usize,
    /// Stagnation threshold: a stage stops once the last five residual
    /// reduction factors average to 1 within this tolerance.
    pub eps_stop: f64,
    pub sweep_order: SweepOrder,
    /// Recorded for provenance; the solvers themselves are deterministic.
    pub seed: u64,
    /// Record the sample residual after every microstep (for diagnostics;
    /// costs one pass over the samples per microstep).
    pub record_microsteps: bool,
}

impl SolverConfig {
    pub fn new(algorithm: Algorithm, r_final: usize) -> Self {
        let eps_stop = match algorithm {
            Algorithm::Als => 15e-4,
            Algorithm::Adf | Algorithm::AdfSor => 5e-4,
        };
        Self {
            algorithm,
            r_final,
            iter_max: 150,
            eps_stop,
            sweep_order: SweepOrder::HalfAlternating,
            seed: 0,
            record_microsteps: false,
        }
    }

    pub(crate) fn validate(&self, set: &SampleSet) -> Result<()> {
        if self.r_final == 0 {
            return Err(Error::Config("final rank must be positive".into()));
        }
        if self.iter_max < 5 {
            return Err(Error::Config(
                "iter_max below 5 cannot feed the stopping rule".into(),
            ));
        }
        if !(self.eps_stop > 0.0) {
            return Err(Error::Config("eps_stop must be positive".into()));
        }
        if set.is_empty() {
            return Err(Error::Config("sample set is empty".into()));
        }
        let min_samples: usize = set.dims().iter().sum();
        if set.len() < min_samples {
            return Err(Error::Config(format!(
                "{} samples cannot cover all {} slices",
                set.len(),
                min_samples
            )));
        }
        Ok(())
    }
}

/// Why a solve ended.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Termination {
    /// Stagnation-based stop at the final rank.
    Converged,
    /// The sample residual reached the exact-interpolation floor.
    Exact,
    /// The final rank stage exhausted its sweep budget.
    IterBudget,
    /// The overrelaxation search backtracked too many times in a row.
    StalledBack,
}

impl fmt::Display for Termination {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Termination::Converged => "converged",
            Termination::Exact => "exact",
            Termination::IterBudget => "iter-budget",
            Termination::StalledBack => "stalled-back",
        })
    }
}

/// One row of the per-sweep convergence history.
#[derive(Clone, Copy, Debug)]
pub struct SweepRecord {
    /// 1-based global sweep counter.
    pub sweep: usize,
    /// Uniform rank during this sweep.
    pub rank: usize,
    /// Relative residual on the sample set.
    pub res_p: f64,
    /// Relative residual on the control set, when one was supplied.
    pub res_c: Option<f64>,
    /// Step size: mean per-slice step for plain ADF, the accepted sweep
    /// step for the overrelaxation variant, absent for ALS.
    pub alpha: Option<f64>,
    /// Wall-clock seconds spent in this sweep (excludes control
    /// evaluation).
    pub elapsed: f64,
}

/// Full convergence history and termination facts of one solve.
#[derive(Clone, Debug)]
pub struct SolverReport {
    pub sweeps: Vec<SweepRecord>,
    pub termination: Termination,
    pub final_rank: usize,
    /// Final relative residual on the samples.
    pub res_p: f64,
    /// Final relative residual on the control set, when supplied.
    pub res_c: Option<f64>,
    /// Global sweep counts right before each rank increase.
    pub rank_increases: Vec<usize>,
    /// Microsteps that saw an empty slice and left it unchanged.
    pub zero_density_events: usize,
    /// Step-size computations with a vanishing curvature but non-vanishing
    /// gradient (step size forced to zero).
    pub stagnation_events: usize,
    /// Absolute sample residual after every microstep, when recording was
    /// requested.
    pub microstep_residuals: Vec<f64>,
    pub elapsed_seconds: f64,
}

/// Uniform rank-one start: every block slice is the 1×1 matrix
/// `1 / sqrt(n_s)`, so the start tensor is the uniform rank-one tensor with
/// entry `Π_s n_s^{−1/2}`.
pub fn initial_guess(dims: &[usize]) -> Result<TTRep> {
    if dims.len() < 2 {
        return Err(Error::Config("need at least two modes".into()));
    }
    let blocks = dims
        .iter()
        .map(|&n| MatrixBlock::from_fn(n, 1, 1, |_, _, _| 1.0 / (n as f64).sqrt()))
        .collect();
    TTRep::new(blocks)
}

/// Grows every interior rank by one, adding the uniform rank-one tensor:
/// the first block gains a column of `1/sqrt(n_0)`, the last a row of
/// `1/sqrt(n_{d-1})`, interior blocks a diagonal `1/sqrt(n_s)` extension.
pub fn rank_increase(tt: &mut TTRep) {
    let d = tt.order();
    for s in 0..d {
        let b = tt.block(s);
        let n = b.len();
        let (rows, cols) = (b.rows(), b.cols());
        let pad = 1.0 / (n as f64).sqrt();
        let (new_rows, new_cols) = if s == 0 {
            (1, cols + 1)
        } else if s == d - 1 {
            (rows + 1, 1)
        } else {
            (rows + 1, cols + 1)
        };
        let grown = MatrixBlock::from_fn(n, new_rows, new_cols, |i, r, c| {
            if r < rows && c < cols {
                b.slice(i)[(r, c)]
            } else if (s == 0 && c == cols)
                || (s == d - 1 && r == rows)
                || (s > 0 && s < d - 1 && r == rows && c == cols)
            {
                pad
            } else {
                0.0
            }
        });
        tt.blocks[s] = grown;
    }
    tt.core = None;
}

/// Tracks per-stage residual reduction factors for the stopping rule.
pub(crate) struct StopTracker {
    eps: f64,
    prev: f64,
    gammas: Vec<f64>,
}

impl StopTracker {
    pub fn new(baseline: f64, eps: f64) -> Self {
        Self {
            eps,
            prev: baseline,
            gammas: Vec::new(),
        }
    }

    /// Records a sweep residual and returns the reduction factor.
    pub fn push(&mut self, res: f64) -> f64 {
        let gamma = if self.prev == 0.0 { 1.0 } else { res / self.prev };
        self.prev = res;
        self.gammas.push(gamma);
        gamma
    }

    /// The stage stops once at least five factors exist and their mean over
    /// the last five is 1 within `eps`.
    pub fn should_stop(&self) -> bool {
        if self.gammas.len() < 5 {
            return false;
        }
        let m: f64 = self.gammas[self.gammas.len() - 5..].iter().sum::<f64>() / 5.0;
        (1.0 - m).abs() < self.eps
    }
}

/// Dispatches to the solver selected in the configuration.
pub fn solve(
    samples: &SampleSet,
    control: Option<&SampleSet>,
    cfg: &SolverConfig,
) -> Result<(TTRep, SolverReport)> {
    match cfg.algorithm {
        Algorithm::Als => als::als_solve(samples, control, cfg),
        Algorithm::Adf => adf::adf_solve(samples, control, cfg),
        Algorithm::AdfSor => adf::adf_sor_solve(samples, control, cfg),
    }
}

/// Relative residual of the fit on a control set.
pub(crate) fn control_residual(tt: &TTRep, control: Option<&SampleSet>) -> Option<f64> {
    control.map(|c| c.residual_of(tt).expect("control indices fit the grid"))
}
