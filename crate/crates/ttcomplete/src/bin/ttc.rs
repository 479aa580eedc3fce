//! Command-line experiment runner for tensor-train completion.
//!
//! Subcommands: `run` (trial batches with CSV/JSON tables), `trace` (single
//! trial, per-sweep convergence CSV), `gen-samples` (write sample-set
//! files), `truncate` (compress a dense tensor file into a tensor-train
//! container).

use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use ttcomplete::error::{Error, Result};
use ttcomplete::experiment::{
    self, convergence_trace_csv, run_experiment, trials_csv, ExperimentSpec,
};
use ttcomplete::io::save_tt;
use ttcomplete::ttsvd;

#[derive(Parser)]
#[command(
    name = "ttc",
    version,
    about = "Low-rank tensor completion experiments in the tensor-train format"
)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Run a batch of seeded trials and aggregate the results.
    Run(RunArgs),
    /// Run a single trial and emit its per-sweep convergence trace.
    Trace(TraceArgs),
    /// Draw a sample or control set and write it as a text file.
    GenSamples(GenArgs),
    /// Compress a dense tensor file into a tensor-train container.
    Truncate(TruncateArgs),
}

/// Experiment description: a spec file, command-line overrides, or both
/// (flags win over file keys).
#[derive(Args)]
struct SpecArgs {
    /// Spec file with flat `key = value` lines.
    #[arg(long)]
    spec: Option<PathBuf>,
    /// Grid shape: number of modes and common mode size.
    #[arg(long, num_args = 2, value_names = ["D", "N"])]
    dims: Option<Vec<usize>>,
    /// Final representation rank.
    #[arg(long)]
    rank: Option<usize>,
    /// Slice-density factor (each slice receives csd·rank² draws).
    #[arg(long)]
    csd: Option<usize>,
    /// als, adf, or adf-sor.
    #[arg(long)]
    algorithm: Option<String>,
    /// Stagnation tolerance of the stopping rule.
    #[arg(long)]
    eps_stop: Option<f64>,
    /// Sweep budget per rank stage.
    #[arg(long)]
    iter_max: Option<usize>,
    /// half-alternating or forward.
    #[arg(long)]
    sweep_order: Option<String>,
    #[arg(long)]
    trials: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Target family: inverse-norm, ratio, exp-sum, random-tt.
    #[arg(long)]
    target: Option<String>,
    /// Coefficient file for the exp-sum target.
    #[arg(long)]
    coeffs: Option<PathBuf>,
    /// Exact rank of the random-tt target (defaults to --rank).
    #[arg(long)]
    target_rank: Option<usize>,
    /// Singular-value profile of the random-tt target: decay or gap.
    #[arg(long)]
    profile: Option<String>,
    /// Relative magnitude of sample-value noise.
    #[arg(long)]
    noise: Option<f64>,
    /// Count a trial as a success when res_C falls below this.
    #[arg(long)]
    success_threshold: Option<f64>,
}

impl SpecArgs {
    fn build(&self) -> Result<ExperimentSpec> {
        let mut doc = match &self.spec {
            Some(path) => fs::read_to_string(path)?,
            None => String::new(),
        };
        let mut push = |key: &str, value: String| {
            doc.push('\n');
            doc.push_str(key);
            doc.push_str(" = ");
            doc.push_str(&value);
        };
        if let Some(dims) = &self.dims {
            push("d", dims[0].to_string());
            push("n", dims[1].to_string());
        }
        if let Some(v) = self.rank {
            push("rank", v.to_string());
        }
        if let Some(v) = self.csd {
            push("csd", v.to_string());
        }
        if let Some(v) = &self.algorithm {
            push("algorithm", v.clone());
        }
        if let Some(v) = self.eps_stop {
            push("eps-stop", format!("{v:e}"));
        }
        if let Some(v) = self.iter_max {
            push("iter-max", v.to_string());
        }
        if let Some(v) = &self.sweep_order {
            push("sweep-order", v.clone());
        }
        if let Some(v) = self.trials {
            push("trials", v.to_string());
        }
        if let Some(v) = self.seed {
            push("seed", v.to_string());
        }
        if let Some(v) = &self.target {
            push("target", v.clone());
        }
        if let Some(v) = &self.coeffs {
            push("coeffs", v.display().to_string());
        }
        if let Some(v) = self.target_rank {
            push("target-rank", v.to_string());
        }
        if let Some(v) = &self.profile {
            push("profile", v.clone());
        }
        if let Some(v) = self.noise {
            push("noise", format!("{v:e}"));
        }
        if let Some(v) = self.success_threshold {
            push("success-threshold", format!("{v:e}"));
        }
        ExperimentSpec::from_key_values(&doc)
    }
}

#[derive(Args)]
struct RunArgs {
    #[command(flatten)]
    spec: SpecArgs,
    /// Output prefix: writes <out>.csv and <out>.json.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct TraceArgs {
    #[command(flatten)]
    spec: SpecArgs,
    /// Which trial of the spec to trace.
    #[arg(long, default_value_t = 0)]
    trial: usize,
    /// Trace CSV destination (stdout when omitted).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct GenArgs {
    #[command(flatten)]
    spec: SpecArgs,
    #[arg(long, default_value_t = 0)]
    trial: usize,
    /// Emit the control set of the trial instead of the sample set.
    #[arg(long)]
    control: bool,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct TruncateArgs {
    /// Dense tensor file: whitespace-separated `d`, the `d` mode sizes,
    /// then all entries in row-major order (`#` comments allowed).
    #[arg(long)]
    input: PathBuf,
    /// Uniform interior rank bound.
    #[arg(long)]
    rank: usize,
    /// Output tensor-train container.
    #[arg(long)]
    out: PathBuf,
}

fn with_suffix(path: &Path, suffix: &str) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(suffix);
    PathBuf::from(s)
}

fn fmt_agg(a: &experiment::Aggregate) -> String {
    match (a.mean, a.spread) {
        (Some(m), Some(s)) => format!("{m:.3e} (spread {s:.2})"),
        _ => "n/a".into(),
    }
}

fn cmd_run(args: &RunArgs) -> Result<()> {
    let spec = args.spec.build()?;
    let result = run_experiment(&spec)?;
    let agg = &result.aggregate;
    println!(
        "{} on {}^{} grid, rank {}, csd {}: {} trials",
        spec.algorithm,
        spec.dims[0],
        spec.dims.len(),
        spec.r_final,
        spec.c_sd,
        agg.trials
    );
    println!(
        "  completed {}  failed {}  success {}  exact {}",
        agg.completed, agg.failed, agg.success, agg.exact
    );
    println!(
        "  res_C {}   res_P {}",
        fmt_agg(&agg.res_c),
        fmt_agg(&agg.res_p)
    );
    println!(
        "  time mean {:.3} s (var {:.3})",
        agg.time_mean, agg.time_var
    );
    if let Some(out) = &args.out {
        let csv_path = with_suffix(out, ".csv");
        let json_path = with_suffix(out, ".json");
        fs::write(&csv_path, trials_csv(&result))?;
        fs::write(&json_path, experiment::result_json(&spec, &result))?;
        println!("wrote {} and {}", csv_path.display(), json_path.display());
    }
    Ok(())
}

fn cmd_trace(args: &TraceArgs) -> Result<()> {
    let spec = args.spec.build()?;
    let (_, report) = experiment::run_trial(&spec, args.trial)?;
    let csv = convergence_trace_csv(&report);
    match &args.out {
        Some(path) => {
            fs::write(path, csv)?;
            println!(
                "trial {}: {} sweeps, final rank {}, res_P {:.3e}, res_C {}, {}",
                args.trial,
                report.sweeps.len(),
                report.final_rank,
                report.res_p,
                report
                    .res_c
                    .map(|r| format!("{r:.3e}"))
                    .unwrap_or_else(|| "n/a".into()),
                report.termination,
            );
            println!("wrote {}", path.display());
        }
        None => print!("{csv}"),
    }
    Ok(())
}

fn cmd_gen_samples(args: &GenArgs) -> Result<()> {
    let spec = args.spec.build()?;
    let data = experiment::prepare_trial(&spec, args.trial)?;
    let set = if args.control {
        &data.control
    } else {
        &data.samples
    };
    set.save(&args.out)?;
    println!(
        "wrote {} ({} samples on the {}^{} grid, label {})",
        args.out.display(),
        set.len(),
        spec.dims[0],
        spec.dims.len(),
        set.label(),
    );
    Ok(())
}

fn parse_dense(text: &str) -> Result<(Vec<usize>, Vec<f64>)> {
    let mut toks = text
        .lines()
        .filter(|l| !l.trim_start().starts_with('#'))
        .flat_map(str::split_whitespace);
    let mut next_num = |what: &str| -> Result<f64> {
        toks.next()
            .ok_or_else(|| Error::Format(format!("missing {what}")))?
            .parse()
            .map_err(|_| Error::Format(format!("unparsable {what}")))
    };
    let d = next_num("mode count")? as usize;
    if d < 2 {
        return Err(Error::Format("need at least two modes".into()));
    }
    let mut dims = Vec::with_capacity(d);
    for s in 0..d {
        let n = next_num(&format!("mode size {s}"))? as usize;
        if n == 0 {
            return Err(Error::Format(format!("mode size {s} is zero")));
        }
        dims.push(n);
    }
    let total: usize = dims.iter().product();
    let mut values = Vec::with_capacity(total);
    for i in 0..total {
        values.push(next_num(&format!("entry {i}"))?);
    }
    if toks.next().is_some() {
        return Err(Error::Format("trailing tokens after the entries".into()));
    }
    Ok((dims, values))
}

fn cmd_truncate(args: &TruncateArgs) -> Result<()> {
    let (dims, dense) = parse_dense(&fs::read_to_string(&args.input)?)?;
    let (tt, report) = ttsvd::tt_svd_truncate_uniform(&dense, &dims, args.rank)?;
    save_tt(&args.out, &tt)?;
    println!(
        "wrote {}: ranks {:?}, error bound {:.3e}",
        args.out.display(),
        report.ranks,
        report.error_bound
    );
    Ok(())
}

fn main() {
    let cli = Cli::parse();
    let result = match &cli.cmd {
        Cmd::Run(args) => cmd_run(args),
        Cmd::Trace(args) => cmd_trace(args),
        Cmd::GenSamples(args) => cmd_gen_samples(args),
        Cmd::Truncate(args) => cmd_truncate(args),
    };
    if let Err(err) = result {
        eprintln!("error: {err}");
        std::process::exit(1);
    }
}
