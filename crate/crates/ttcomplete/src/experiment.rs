//! Batched experiment runner: seeded trials over generated targets,
//! geometric aggregation of residuals, and CSV/JSON emission.
//!
//! One experiment fixes a target tensor family, grid, rank, slice density
//! and solver, then repeats `trials` independent runs.  Per trial, a sample
//! set `P` and a control set `C` of the same design are drawn from seeds
//! derived from `(base_seed, trial)`, the solver fits on `P` only, and both
//! relative residuals are recorded.  Everything downstream of the base seed
//! is deterministic, so a spec file plus a seed reproduces a result table
//! byte for byte (timing columns aside).

use std::time::Instant;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::generators::{
    add_noise, exp_sum_tt, inverse_norm_entry, random_tt, ratio_tensor_entry,
    rescale_singular_values, ExpSumCoefficients, SingularProfile,
};
use crate::sampling::{generate_index_set, SampleSet};
use crate::seed::{self, tag};
use crate::solver::{self, Algorithm, SolverConfig, SolverReport, SweepOrder};
use crate::tt::TTRep;

/// Target tensor family of an experiment.
#[derive(Clone, Debug)]
pub enum TargetSpec {
    /// `(Σ_μ i_μ²)^(−1/2)` over 1-based indices: full rank, decaying
    /// spectrum.
    InverseNorm,
    /// `(1 + Σ_{μ<d} i_μ/i_{μ+1})^(−1)` over 1-based indices.
    Ratio,
    /// Deterministic low-rank tensor train built from an exponential-sum
    /// approximation of the inverse-norm tensor.
    ExpSum(ExpSumCoefficients),
    /// Per-trial random tensor train of exact uniform rank, optionally with
    /// prescribed singular values on every split.
    RandomTt {
        rank: usize,
        profile: Option<SingularProfile>,
    },
}

impl TargetSpec {
    /// Short display name (also used in spec files and JSON output).
    pub fn name(&self) -> &'static str {
        match self {
            TargetSpec::InverseNorm => "inverse-norm",
            TargetSpec::Ratio => "ratio",
            TargetSpec::ExpSum(_) => "exp-sum",
            TargetSpec::RandomTt { .. } => "random-tt",
        }
    }
}

/// Full description of one experiment (one row of a result table).
#[derive(Clone, Debug)]
pub struct ExperimentSpec {
    pub target: TargetSpec,
    pub dims: Vec<usize>,
    /// Final representation rank the solver grows towards.
    pub r_final: usize,
    /// Slice-density factor: every slice of `P` and `C` receives
    /// `c_sd · r_final²` draws.
    pub c_sd: usize,
    pub algorithm: Algorithm,
    /// `None` → the algorithm's default stopping tolerance.
    pub eps_stop: Option<f64>,
    /// Sweep budget per rank stage.
    pub iter_max: usize,
    pub sweep_order: SweepOrder,
    pub trials: usize,
    pub base_seed: u64,
    /// Perturb the stored sample values (never the control values) at this
    /// relative magnitude before solving.
    pub noise: Option<f64>,
    /// A completed trial counts as a success when `res_C` stays below this
    /// bound; without a bound every completed trial counts.
    pub success_threshold: Option<f64>,
}

impl ExperimentSpec {
    pub fn new(
        target: TargetSpec,
        dims: Vec<usize>,
        r_final: usize,
        c_sd: usize,
        algorithm: Algorithm,
    ) -> Self {
        Self {
            target,
            dims,
            r_final,
            c_sd,
            algorithm,
            eps_stop: None,
            iter_max: 150,
            sweep_order: SweepOrder::HalfAlternating,
            trials: 20,
            base_seed: 1,
            noise: None,
            success_threshold: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.dims.len() < 2 {
            return Err(Error::Config("need at least two modes".into()));
        }
        if self.dims.iter().any(|&n| n == 0) {
            return Err(Error::Config("mode sizes must be positive".into()));
        }
        if self.r_final == 0 || self.c_sd == 0 {
            return Err(Error::Config(
                "rank and slice density must be positive".into(),
            ));
        }
        if self.trials == 0 {
            return Err(Error::Config("need at least one trial".into()));
        }
        if let TargetSpec::RandomTt { rank, .. } = &self.target {
            if *rank == 0 {
                return Err(Error::Config("target rank must be positive".into()));
            }
        }
        if let Some(m) = self.noise {
            if !(m >= 0.0) {
                return Err(Error::Config("noise magnitude must be ≥ 0".into()));
            }
        }
        Ok(())
    }

    /// Stopping tolerance actually used (explicit or algorithm default).
    pub fn effective_eps_stop(&self) -> f64 {
        self.eps_stop
            .unwrap_or_else(|| SolverConfig::new(self.algorithm, self.r_final).eps_stop)
    }

    fn solver_config(&self, trial_seed: u64) -> SolverConfig {
        let mut cfg = SolverConfig::new(self.algorithm, self.r_final);
        if let Some(e) = self.eps_stop {
            cfg.eps_stop = e;
        }
        cfg.iter_max = self.iter_max;
        cfg.sweep_order = self.sweep_order;
        cfg.seed = trial_seed;
        cfg
    }

    /// Parses the flat `key = value` spec-file format.
    ///
    /// Blank lines and `#` comments are skipped.  Keys: `target`
    /// (inverse-norm | ratio | exp-sum | random-tt), `coeffs` (path, for
    /// exp-sum), `target-rank` and `profile` (decay | gap, for random-tt),
    /// `d`, `n`, `rank`, `csd`, `algorithm`, `eps-stop`, `iter-max`,
    /// `sweep-order`, `trials`, `seed`, `noise`, `success-threshold`.
    /// Required: `d`, `n`, `rank`, `csd`.
    pub fn from_key_values(text: &str) -> Result<Self> {
        let mut target_name = "inverse-norm".to_string();
        let mut coeffs_path: Option<String> = None;
        let mut target_rank: Option<usize> = None;
        let mut profile: Option<SingularProfile> = None;
        let mut d: Option<usize> = None;
        let mut n: Option<usize> = None;
        let mut r_final: Option<usize> = None;
        let mut c_sd: Option<usize> = None;
        let mut algorithm = Algorithm::Als;
        let mut eps_stop = None;
        let mut iter_max = 150usize;
        let mut sweep_order = SweepOrder::HalfAlternating;
        let mut trials = 20usize;
        let mut base_seed = 1u64;
        let mut noise = None;
        let mut success_threshold = None;

        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                Error::Format(format!("line {}: expected `key = value`", lineno + 1))
            })?;
            let key = key.trim();
            let value = value.trim();
            let bad = |what: &str| Error::Format(format!("line {}: bad {what}", lineno + 1));
            match key {
                "target" => target_name = value.to_string(),
                "coeffs" => coeffs_path = Some(value.to_string()),
                "target-rank" => target_rank = Some(value.parse().map_err(|_| bad(key))?),
                "profile" => {
                    profile = Some(match value {
                        "decay" => SingularProfile::Decay,
                        "gap" => SingularProfile::Gap,
                        _ => return Err(bad(key)),
                    })
                }
                "d" => d = Some(value.parse().map_err(|_| bad(key))?),
                "n" => n = Some(value.parse().map_err(|_| bad(key))?),
                "rank" => r_final = Some(value.parse().map_err(|_| bad(key))?),
                "csd" => c_sd = Some(value.parse().map_err(|_| bad(key))?),
                "algorithm" => algorithm = value.parse()?,
                "eps-stop" => eps_stop = Some(value.parse().map_err(|_| bad(key))?),
                "iter-max" => iter_max = value.parse().map_err(|_| bad(key))?,
                "sweep-order" => sweep_order = value.parse()?,
                "trials" => trials = value.parse().map_err(|_| bad(key))?,
                "seed" => base_seed = value.parse().map_err(|_| bad(key))?,
                "noise" => noise = Some(value.parse().map_err(|_| bad(key))?),
                "success-threshold" => {
                    success_threshold = Some(value.parse().map_err(|_| bad(key))?)
                }
                other => {
                    return Err(Error::Format(format!(
                        "line {}: unknown key {other:?}",
                        lineno + 1
                    )))
                }
            }
        }

        let d = d.ok_or_else(|| Error::Format("missing key `d`".into()))?;
        let n = n.ok_or_else(|| Error::Format("missing key `n`".into()))?;
        let r_final = r_final.ok_or_else(|| Error::Format("missing key `rank`".into()))?;
        let c_sd = c_sd.ok_or_else(|| Error::Format("missing key `csd`".into()))?;

        let target = match target_name.as_str() {
            "inverse-norm" => TargetSpec::InverseNorm,
            "ratio" => TargetSpec::Ratio,
            "exp-sum" => {
                let path = coeffs_path
                    .ok_or_else(|| Error::Format("target exp-sum needs `coeffs = path`".into()))?;
                TargetSpec::ExpSum(ExpSumCoefficients::load(path)?)
            }
            "random-tt" => TargetSpec::RandomTt {
                rank: target_rank.unwrap_or(r_final),
                profile,
            },
            other => {
                return Err(Error::Format(format!("unknown target {other:?}")));
            }
        };

        let spec = Self {
            target,
            dims: vec![n; d],
            r_final,
            c_sd,
            algorithm,
            eps_stop,
            iter_max,
            sweep_order,
            trials,
            base_seed,
            noise,
            success_threshold,
        };
        spec.validate()?;
        Ok(spec)
    }
}

/// Sample and control sets of one trial, plus the derived trial seed.
pub struct TrialData {
    pub samples: SampleSet,
    pub control: SampleSet,
    pub seed: u64,
}

/// Draws target, sample set and control set for trial `t` of the spec.
///
/// Deterministic: depends only on the spec and `t`.  Noise, when requested,
/// perturbs the sample values only — the control set always carries the
/// unperturbed target values.
pub fn prepare_trial(spec: &ExperimentSpec, t: usize) -> Result<TrialData> {
    spec.validate()?;
    let ts = seed::derive(spec.base_seed, &[tag::TRIAL, t as u64]);
    let p_ix = generate_index_set(
        &spec.dims,
        spec.r_final,
        spec.c_sd,
        seed::derive(ts, &[tag::SAMPLING]),
    )?;
    let c_ix = generate_index_set(
        &spec.dims,
        spec.r_final,
        spec.c_sd,
        seed::derive(ts, &[tag::CONTROL]),
    )?;
    let (mut samples, control) = match &spec.target {
        TargetSpec::InverseNorm => (
            p_ix.attach_values(&inverse_norm_entry, "P")?,
            c_ix.attach_values(&inverse_norm_entry, "C")?,
        ),
        TargetSpec::Ratio => (
            p_ix.attach_values(&ratio_tensor_entry, "P")?,
            c_ix.attach_values(&ratio_tensor_entry, "C")?,
        ),
        TargetSpec::ExpSum(coeffs) => {
            let tt = exp_sum_tt(&spec.dims, coeffs)?;
            (tt_values(&p_ix, &tt, "P")?, tt_values(&c_ix, &tt, "C")?)
        }
        TargetSpec::RandomTt { rank, profile } => {
            let mut tt = random_tt(&spec.dims, *rank, ts)?;
            if let Some(p) = profile {
                rescale_singular_values(&mut tt, *p)?;
            }
            (tt_values(&p_ix, &tt, "P")?, tt_values(&c_ix, &tt, "C")?)
        }
    };
    if let Some(magnitude) = spec.noise {
        add_noise(&mut samples, magnitude, ts);
    }
    Ok(TrialData {
        samples,
        control,
        seed: ts,
    })
}

fn tt_values(ix: &crate::sampling::IndexSet, tt: &TTRep, label: &str) -> Result<SampleSet> {
    ix.attach_values(tt, label)
}

/// Runs a single trial end to end and returns the fit plus its report.
pub fn run_trial(spec: &ExperimentSpec, t: usize) -> Result<(TTRep, SolverReport)> {
    let data = prepare_trial(spec, t)?;
    let cfg = spec.solver_config(data.seed);
    solver::solve(&data.samples, Some(&data.control), &cfg)
}

/// Outcome of one trial, as recorded in tables.
#[derive(Clone, Debug, Serialize)]
pub struct TrialResult {
    pub trial: usize,
    pub seed: u64,
    /// Samples actually drawn (duplicates merged, so ≤ d·n·c_sd·r²).
    pub samples: usize,
    pub final_rank: usize,
    pub sweeps: usize,
    /// Termination kind, or `None` when the trial failed outright.
    pub termination: Option<String>,
    pub res_p: Option<f64>,
    pub res_c: Option<f64>,
    pub success: bool,
    pub elapsed_seconds: f64,
    /// Failure diagnostic for trials that returned an error.
    pub error: Option<String>,
}

/// Geometric statistics of a batch of positive values.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct Aggregate {
    /// Geometric mean `exp(mean(ln x))` of the included values.
    pub mean: Option<f64>,
    /// Geometric spread `exp(stddev(ln x))` (population standard
    /// deviation); 1.0 for identical values.
    pub spread: Option<f64>,
    /// Values included (positive and finite).
    pub count: usize,
    /// Values excluded as nonpositive or non-finite.
    pub excluded: usize,
}

/// Geometric mean and spread of the positive entries of `values`.
pub fn aggregate(values: &[f64]) -> Aggregate {
    let logs: Vec<f64> = values
        .iter()
        .filter(|v| v.is_finite() && **v > 0.0)
        .map(|v| v.ln())
        .collect();
    let excluded = values.len() - logs.len();
    if logs.is_empty() {
        return Aggregate {
            mean: None,
            spread: None,
            count: 0,
            excluded,
        };
    }
    let k = logs.len() as f64;
    let mean_ln = logs.iter().sum::<f64>() / k;
    let var_ln = logs.iter().map(|l| (l - mean_ln).powi(2)).sum::<f64>() / k;
    Aggregate {
        mean: Some(mean_ln.exp()),
        spread: Some(var_ln.sqrt().exp()),
        count: logs.len(),
        excluded,
    }
}

/// Aggregated view of all trials of one experiment.
#[derive(Clone, Debug, Serialize)]
pub struct AggregateRow {
    pub trials: usize,
    /// Trials that ran to a solver termination.
    pub completed: usize,
    pub failed: usize,
    /// Completed trials whose `res_C` beat the success threshold (all
    /// completed trials when no threshold is set).
    pub success: usize,
    /// Trials with an exactly zero control residual; excluded from the
    /// geometric statistics, reported here instead.
    pub exact: usize,
    pub res_c: Aggregate,
    pub res_p: Aggregate,
    /// Arithmetic mean of per-trial wall times (seconds).
    pub time_mean: f64,
    /// Population variance of per-trial wall times.
    pub time_var: f64,
}

/// All per-trial rows plus their aggregate.
#[derive(Clone, Debug, Serialize)]
pub struct ExperimentResult {
    pub trials: Vec<TrialResult>,
    pub aggregate: AggregateRow,
}

/// Runs every trial of the spec.  A failing trial is recorded (with its
/// error message) and the run continues; only an invalid spec errors out.
pub fn run_experiment(spec: &ExperimentSpec) -> Result<ExperimentResult> {
    spec.validate()?;
    let mut trials = Vec::with_capacity(spec.trials);
    for t in 0..spec.trials {
        let started = Instant::now();
        let outcome = prepare_trial(spec, t).and_then(|data| {
            let cfg = spec.solver_config(data.seed);
            let solved = solver::solve(&data.samples, Some(&data.control), &cfg)?;
            Ok((data.samples.len(), solved))
        });
        let elapsed = started.elapsed().as_secs_f64();
        let seed = seed::derive(spec.base_seed, &[tag::TRIAL, t as u64]);
        match outcome {
            Ok((samples, (_, report))) => {
                let success = match spec.success_threshold {
                    Some(bar) => report.res_c.map(|r| r < bar).unwrap_or(false),
                    None => true,
                };
                trials.push(TrialResult {
                    trial: t,
                    seed,
                    samples,
                    final_rank: report.final_rank,
                    sweeps: report.sweeps.len(),
                    termination: Some(report.termination.to_string()),
                    res_p: Some(report.res_p),
                    res_c: report.res_c,
                    success,
                    elapsed_seconds: elapsed,
                    error: None,
                });
            }
            Err(err) => trials.push(TrialResult {
                trial: t,
                seed,
                samples: 0,
                final_rank: 0,
                sweeps: 0,
                termination: None,
                res_p: None,
                res_c: None,
                success: false,
                elapsed_seconds: elapsed,
                error: Some(err.to_string()),
            }),
        }
    }
    let aggregate = aggregate_trials(&trials);
    Ok(ExperimentResult { trials, aggregate })
}

fn aggregate_trials(trials: &[TrialResult]) -> AggregateRow {
    let completed: Vec<&TrialResult> = trials.iter().filter(|t| t.error.is_none()).collect();
    let res_c_vals: Vec<f64> = completed.iter().filter_map(|t| t.res_c).collect();
    let res_p_vals: Vec<f64> = completed.iter().filter_map(|t| t.res_p).collect();
    let exact = res_c_vals.iter().filter(|v| **v == 0.0).count();
    let success = trials.iter().filter(|t| t.success).count();
    let times: Vec<f64> = trials.iter().map(|t| t.elapsed_seconds).collect();
    let time_mean = times.iter().sum::<f64>() / times.len().max(1) as f64;
    let time_var = if times.is_empty() {
        0.0
    } else {
        times.iter().map(|t| (t - time_mean).powi(2)).sum::<f64>() / times.len() as f64
    };
    AggregateRow {
        trials: trials.len(),
        completed: completed.len(),
        failed: trials.len() - completed.len(),
        success,
        exact,
        res_c: aggregate(&res_c_vals),
        res_p: aggregate(&res_p_vals),
        time_mean,
        time_var,
    }
}

/// CSV schema version for the per-trial and trace tables.
pub const CSV_SCHEMA: &str = "ttc-v1";

fn fmt_opt(v: Option<f64>) -> String {
    v.map(|x| format!("{x:e}")).unwrap_or_default()
}

/// Per-trial results as CSV.  All columns before `elapsed_seconds` are
/// deterministic for a fixed spec and seed.
pub fn trials_csv(result: &ExperimentResult) -> String {
    let mut out = String::from(
        "trial,seed,samples,final_rank,sweeps,termination,res_p,res_c,success,elapsed_seconds\n",
    );
    for t in &result.trials {
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{},{},{:e}\n",
            t.trial,
            t.seed,
            t.samples,
            t.final_rank,
            t.sweeps,
            t.termination.as_deref().unwrap_or("failed"),
            fmt_opt(t.res_p),
            fmt_opt(t.res_c),
            t.success,
            t.elapsed_seconds,
        ));
    }
    out
}

#[derive(Serialize)]
struct SpecSummary<'a> {
    target: &'static str,
    dims: &'a [usize],
    rank: usize,
    csd: usize,
    algorithm: String,
    eps_stop: f64,
    iter_max: usize,
    trials: usize,
    seed: u64,
    noise: Option<f64>,
    success_threshold: Option<f64>,
}

#[derive(Serialize)]
struct JsonDoc<'a> {
    schema: &'static str,
    spec: SpecSummary<'a>,
    aggregate: &'a AggregateRow,
    trials: &'a [TrialResult],
}

/// JSON mirror of the CSV: spec summary, aggregate row and per-trial rows.
pub fn result_json(spec: &ExperimentSpec, result: &ExperimentResult) -> String {
    let doc = JsonDoc {
        schema: CSV_SCHEMA,
        spec: SpecSummary {
            target: spec.target.name(),
            dims: &spec.dims,
            rank: spec.r_final,
            csd: spec.c_sd,
            algorithm: spec.algorithm.to_string(),
            eps_stop: spec.effective_eps_stop(),
            iter_max: spec.iter_max,
            trials: spec.trials,
            seed: spec.base_seed,
            noise: spec.noise,
            success_threshold: spec.success_threshold,
        },
        aggregate: &result.aggregate,
        trials: &result.trials,
    };
    serde_json::to_string_pretty(&doc).expect("no non-finite values reach the JSON mirror")
}

/// Per-sweep convergence history as CSV.
///
/// Columns: global sweep number, rank during the sweep, relative residuals,
/// step size (overrelaxation runs), an `event` column marking the first
/// sweep after each rank increase, and the cumulative wall time.
pub fn convergence_trace_csv(report: &SolverReport) -> String {
    let mut out = String::from("sweep,rank,res_p,res_c,alpha,event,elapsed_seconds\n");
    let mut elapsed = 0.0f64;
    for rec in &report.sweeps {
        elapsed += rec.elapsed;
        // rank_increases stores the sweep count right before each increase,
        // so sweep k+1 is the first one at the new rank.
        let event = if report.rank_increases.contains(&(rec.sweep - 1)) {
            "rank-increase"
        } else {
            ""
        };
        out.push_str(&format!(
            "{},{},{:e},{},{},{event},{elapsed:e}\n",
            rec.sweep,
            rec.rank,
            rec.res_p,
            fmt_opt(rec.res_c),
            fmt_opt(rec.alpha),
        ));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::generators::ExpTerm;

    fn constant_target() -> TargetSpec {
        let coeffs = ExpSumCoefficients::new(
            vec![ExpTerm {
                omega: 1.0,
                alpha: 0.0,
            }],
            1.0,
            1e9,
        )
        .unwrap();
        TargetSpec::ExpSum(coeffs)
    }

    #[test]
    fn aggregate_two_point_case() {
        let a = aggregate(&[2.0, 8.0]);
        assert!((a.mean.unwrap() - 4.0).abs() < 1e-12);
        assert!((a.spread.unwrap() - 2.0).abs() < 1e-12);
        assert_eq!(a.count, 2);
        assert_eq!(a.excluded, 0);
    }

    #[test]
    fn aggregate_equal_values_have_unit_spread() {
        let a = aggregate(&[0.37; 9]);
        assert!((a.mean.unwrap() - 0.37).abs() < 1e-15);
        assert!((a.spread.unwrap() - 1.0).abs() < 1e-13);
    }

    #[test]
    fn aggregate_matches_log_domain_oracle() {
        // 20 lognormal-ish samples; reference computed through the product
        // route rather than the mean-of-logs route.
        let vals: Vec<f64> = (0..20)
            .map(|i| (0.3 * ((i * 37 + 11) % 17) as f64 - 2.0).exp())
            .collect();
        let a = aggregate(&vals);
        let product: f64 = vals.iter().product();
        let want_mean = product.powf(1.0 / vals.len() as f64);
        assert!((a.mean.unwrap() - want_mean).abs() < 1e-12 * want_mean);
        let mean_ln = want_mean.ln();
        let var: f64 =
            vals.iter().map(|v| (v.ln() - mean_ln).powi(2)).sum::<f64>() / vals.len() as f64;
        assert!((a.spread.unwrap() - var.sqrt().exp()).abs() < 1e-12);
    }

    #[test]
    fn aggregate_excludes_nonpositive() {
        let a = aggregate(&[2.0, 0.0, 8.0, -1.0, f64::NAN]);
        assert!((a.mean.unwrap() - 4.0).abs() < 1e-12);
        assert_eq!(a.count, 2);
        assert_eq!(a.excluded, 3);
    }

    #[test]
    fn aggregate_of_nothing() {
        let a = aggregate(&[]);
        assert!(a.mean.is_none() && a.spread.is_none());
        assert_eq!(a.excluded, 0);
    }

    #[test]
    fn uniform_rank_one_target_is_recovered_exactly() {
        let mut spec = ExperimentSpec::new(
            constant_target(),
            vec![4, 4, 4],
            1,
            4,
            Algorithm::Als,
        );
        spec.trials = 1;
        spec.success_threshold = Some(1e-9);
        let result = run_experiment(&spec).unwrap();
        assert_eq!(result.aggregate.completed, 1);
        assert_eq!(result.aggregate.success, 1);
        let t = &result.trials[0];
        assert!(t.res_p.unwrap() < 1e-12, "res_p = {:?}", t.res_p);
        assert!(t.res_c.unwrap() < 1e-12, "res_c = {:?}", t.res_c);
        assert_eq!(t.termination.as_deref(), Some("exact"));
    }

    #[test]
    fn trial_failures_are_recorded_and_the_run_continues() {
        // Coefficients valid on [1, 10] cannot cover a grid with n = 4
        // (needs range ≥ 16), so target construction refuses every trial.
        let coeffs = ExpSumCoefficients::new(
            vec![ExpTerm {
                omega: 1.0,
                alpha: 0.1,
            }],
            1.0,
            10.0,
        )
        .unwrap();
        let mut spec = ExperimentSpec::new(
            TargetSpec::ExpSum(coeffs),
            vec![4, 4],
            2,
            2,
            Algorithm::Als,
        );
        spec.trials = 3;
        let result = run_experiment(&spec).unwrap();
        assert_eq!(result.trials.len(), 3);
        assert_eq!(result.aggregate.failed, 3);
        assert_eq!(result.aggregate.success, 0);
        assert!(result.trials.iter().all(|t| t.error.is_some()));
        assert!(result.aggregate.res_c.mean.is_none());
    }

    #[test]
    fn reruns_are_byte_identical_apart_from_timing() {
        let mut spec = ExperimentSpec::new(
            TargetSpec::RandomTt {
                rank: 2,
                profile: None,
            },
            vec![5, 5, 5],
            2,
            6,
            Algorithm::Adf,
        );
        spec.trials = 2;
        spec.base_seed = 42;
        let a = run_experiment(&spec).unwrap();
        let b = run_experiment(&spec).unwrap();
        let strip = |csv: &str| -> String {
            csv.lines()
                .map(|l| l.rsplit_once(',').map(|(head, _)| head.to_string()).unwrap())
                .collect::<Vec<_>>()
                .join("\n")
        };
        assert_eq!(strip(&trials_csv(&a)), strip(&trials_csv(&b)));
        assert_eq!(a.aggregate.res_c.mean, b.aggregate.res_c.mean);
        assert_eq!(a.aggregate.res_p.spread, b.aggregate.res_p.spread);
    }

    #[test]
    fn noise_touches_samples_but_not_control() {
        let mut spec = ExperimentSpec::new(
            TargetSpec::RandomTt {
                rank: 2,
                profile: None,
            },
            vec![5, 5, 5],
            2,
            6,
            Algorithm::Als,
        );
        spec.base_seed = 9;
        let clean = prepare_trial(&spec, 0).unwrap();
        spec.noise = Some(1e-4);
        let noisy = prepare_trial(&spec, 0).unwrap();
        assert_eq!(clean.control.values(), noisy.control.values());
        assert_eq!(clean.samples.flat(), noisy.samples.flat());
        assert_ne!(clean.samples.values(), noisy.samples.values());
        let max_shift = clean
            .samples
            .values()
            .iter()
            .zip(noisy.samples.values())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0f64, f64::max);
        let nu = clean.samples.values_norm() / (clean.samples.len() as f64).sqrt();
        assert!(max_shift <= 1e-4 * nu);
    }

    #[test]
    fn trace_marks_rank_increases_and_time_accumulates() {
        let mut spec = ExperimentSpec::new(
            TargetSpec::RandomTt {
                rank: 2,
                profile: None,
            },
            vec![4, 4, 4, 4],
            2,
            8,
            Algorithm::Als,
        );
        spec.base_seed = 3;
        let (_, report) = run_trial(&spec, 0).unwrap();
        let csv = convergence_trace_csv(&report);
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[0], "sweep,rank,res_p,res_c,alpha,event,elapsed_seconds");
        assert_eq!(lines.len(), report.sweeps.len() + 1);
        let marks = lines
            .iter()
            .filter(|l| l.contains("rank-increase"))
            .count();
        assert_eq!(marks, report.rank_increases.len());
        let elapsed: Vec<f64> = lines[1..]
            .iter()
            .map(|l| l.rsplit(',').next().unwrap().parse().unwrap())
            .collect();
        assert!(elapsed.windows(2).all(|w| w[1] > w[0]));
        // ALS rows leave the step-size column empty.
        assert!(lines[1].split(',').nth(4).unwrap().is_empty());
    }

    #[test]
    fn spec_file_roundtrip_and_rejection() {
        let text = "\
# comparison run
target = random-tt
target-rank = 3
profile = gap
d = 4
n = 6
rank = 3
csd = 10
algorithm = adf-sor
eps-stop = 5e-4
trials = 7
seed = 123
noise = 1e-4
success-threshold = 1e-3
";
        let spec = ExperimentSpec::from_key_values(text).unwrap();
        assert_eq!(spec.dims, vec![6, 6, 6, 6]);
        assert_eq!(spec.r_final, 3);
        assert_eq!(spec.c_sd, 10);
        assert_eq!(spec.trials, 7);
        assert_eq!(spec.base_seed, 123);
        assert_eq!(spec.algorithm, Algorithm::AdfSor);
        assert_eq!(spec.noise, Some(1e-4));
        assert!(matches!(
            spec.target,
            TargetSpec::RandomTt {
                rank: 3,
                profile: Some(SingularProfile::Gap)
            }
        ));

        assert!(ExperimentSpec::from_key_values("d = 4\nn = 6\nrank = 2").is_err());
        assert!(
            ExperimentSpec::from_key_values("d = 4\nn = 6\nrank = 2\ncsd = 1\nwat = 9").is_err()
        );
        assert!(ExperimentSpec::from_key_values(
            "d = 4\nn = 6\nrank = 2\ncsd = 1\nalgorithm = newton"
        )
        .is_err());
    }

    #[test]
    fn json_mirror_carries_spec_and_aggregate() {
        let mut spec = ExperimentSpec::new(
            constant_target(),
            vec![4, 4],
            1,
            3,
            Algorithm::Als,
        );
        spec.trials = 1;
        let result = run_experiment(&spec).unwrap();
        let json = result_json(&spec, &result);
        let doc: serde_json::Value = serde_json::from_str(&json).unwrap();
        assert_eq!(doc["schema"], CSV_SCHEMA);
        assert_eq!(doc["spec"]["target"], "exp-sum");
        assert_eq!(doc["spec"]["dims"][1], 4);
        assert_eq!(doc["aggregate"]["completed"], 1);
        assert_eq!(doc["trials"][0]["trial"], 0);
    }
}
