//! End-to-end checks of the `ttc` binary: reproducible tables, spec-file
//! overrides, trace output, sample-set files, and the dense-tensor
//! compression path.

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use ttcomplete::generators::random_tt;
use ttcomplete::io::load_tt;
use ttcomplete::sampling::SampleSet;

fn ttc(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ttc"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn assert_ok(out: &Output) {
    assert!(
        out.status.success(),
        "ttc failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
}

/// CSV rows with the wall-clock column dropped; everything else must be
/// bit-for-bit reproducible.
fn strip_timing(csv: &str) -> String {
    csv.lines()
        .map(|l| match l.rfind(',') {
            Some(cut) => &l[..cut],
            None => l,
        })
        .collect::<Vec<_>>()
        .join("\n")
}

#[test]
fn run_writes_reproducible_tables() {
    let dir = tempfile::tempdir().unwrap();
    let spec = dir.path().join("exp.spec");
    fs::write(
        &spec,
        "# tiny batch\ntarget = random-tt\nd = 3\nn = 4\nrank = 2\ncsd = 4\n\
         algorithm = als\ntrials = 2\nseed = 7\n",
    )
    .unwrap();
    let spec = spec.to_str().unwrap();

    let out_a = dir.path().join("a");
    let out_b = dir.path().join("b");
    assert_ok(&ttc(&["run", "--spec", spec, "--out", out_a.to_str().unwrap()]));
    assert_ok(&ttc(&["run", "--spec", spec, "--out", out_b.to_str().unwrap()]));

    let csv_a = fs::read_to_string(dir.path().join("a.csv")).unwrap();
    let csv_b = fs::read_to_string(dir.path().join("b.csv")).unwrap();
    assert!(csv_a.starts_with("trial,seed,samples,final_rank,sweeps,termination,"));
    assert_eq!(csv_a.lines().count(), 3, "header plus one row per trial");
    assert_eq!(strip_timing(&csv_a), strip_timing(&csv_b));

    let json_a: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("a.json")).unwrap()).unwrap();
    let json_b: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("b.json")).unwrap()).unwrap();
    assert_eq!(json_a["schema"], "ttc-v1");
    assert_eq!(json_a["spec"]["rank"], 2);
    assert_eq!(json_a["spec"]["algorithm"], "als");
    assert_eq!(json_a["aggregate"]["completed"], 2);
    assert_eq!(json_a["aggregate"]["res_c"], json_b["aggregate"]["res_c"]);
    assert_eq!(json_a["trials"][1]["seed"], json_b["trials"][1]["seed"]);
}

#[test]
fn flags_override_spec_file_keys() {
    let dir = tempfile::tempdir().unwrap();
    let spec = dir.path().join("exp.spec");
    fs::write(
        &spec,
        "target = random-tt\nd = 3\nn = 4\nrank = 2\ncsd = 4\ntrials = 5\nseed = 7\n",
    )
    .unwrap();

    let out = dir.path().join("o");
    assert_ok(&ttc(&[
        "run",
        "--spec",
        spec.to_str().unwrap(),
        "--trials",
        "1",
        "--out",
        out.to_str().unwrap(),
    ]));
    let csv = fs::read_to_string(dir.path().join("o.csv")).unwrap();
    assert_eq!(csv.lines().count(), 2, "override reduced the batch to one trial");
}

#[test]
fn run_without_spec_file_uses_flags_only() {
    let out = ttc(&[
        "run",
        "--target", "random-tt",
        "--dims", "3", "4",
        "--rank", "2",
        "--csd", "4",
        "--trials", "1",
        "--seed", "3",
    ]);
    assert_ok(&out);
    let text = String::from_utf8_lossy(&out.stdout);
    assert!(text.contains("als on 4^3 grid"), "summary line: {text}");
    assert!(text.contains("completed 1"), "summary line: {text}");
}

#[test]
fn incomplete_spec_is_rejected() {
    let out = ttc(&[
        "run", "--target", "random-tt", "--dims", "3", "4", "--rank", "2",
    ]);
    assert!(!out.status.success());
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("csd"), "points at the missing key: {err}");
}

#[test]
fn trace_emits_per_sweep_rows() {
    let dir = tempfile::tempdir().unwrap();
    let trace = dir.path().join("trace.csv");
    assert_ok(&ttc(&[
        "trace",
        "--target", "random-tt",
        "--dims", "3", "4",
        "--rank", "2",
        "--csd", "4",
        "--algorithm", "adf",
        "--seed", "5",
        "--out", trace.to_str().unwrap(),
    ]));
    let csv = fs::read_to_string(&trace).unwrap();
    let mut lines = csv.lines();
    assert_eq!(
        lines.next().unwrap(),
        "sweep,rank,res_p,res_c,alpha,event,elapsed_seconds"
    );
    let rows: Vec<&str> = lines.collect();
    assert!(rows.len() >= 2, "at least two sweeps recorded");
    for row in &rows {
        assert_eq!(row.split(',').count(), 7, "malformed row: {row}");
    }

    // Without --out the same CSV goes to stdout.
    let out = ttc(&[
        "trace",
        "--target", "random-tt",
        "--dims", "3", "4",
        "--rank", "2",
        "--csd", "4",
        "--algorithm", "adf",
        "--seed", "5",
    ]);
    assert_ok(&out);
    assert_eq!(
        strip_timing(&String::from_utf8_lossy(&out.stdout)),
        strip_timing(&csv)
    );
}

#[test]
fn gen_samples_roundtrip_and_determinism() {
    let dir = tempfile::tempdir().unwrap();
    let p1 = dir.path().join("p1.txt");
    let p2 = dir.path().join("p2.txt");
    let c = dir.path().join("c.txt");
    let base: Vec<&str> = vec![
        "gen-samples",
        "--target", "inverse-norm",
        "--dims", "3", "5",
        "--rank", "2",
        "--csd", "3",
        "--seed", "11",
    ];

    for (path, extra) in [(&p1, None), (&p2, None), (&c, Some("--control"))] {
        let mut args = base.clone();
        if let Some(flag) = extra {
            args.push(flag);
        }
        args.push("--out");
        args.push(path.to_str().unwrap());
        assert_ok(&ttc(&args));
    }

    assert_eq!(
        fs::read(&p1).unwrap(),
        fs::read(&p2).unwrap(),
        "same seed, same bytes"
    );

    let samples = SampleSet::load(&p1).unwrap();
    let control = SampleSet::load(&c).unwrap();
    assert_eq!(samples.dims(), &[5, 5, 5]);
    assert_eq!(samples.label(), "P");
    assert_eq!(control.label(), "C");
    assert_ne!(
        samples.flat(),
        control.flat(),
        "sample and control draws are independent"
    );
    // Values are exact inverse-norm entries.
    let idx = samples.index(0);
    let expect: f64 = 1.0
        / idx
            .iter()
            .map(|&i| ((i + 1) as f64).powi(2))
            .sum::<f64>()
            .sqrt();
    assert!((samples.values()[0] - expect).abs() < 1e-14);
}

#[test]
fn truncate_compresses_dense_file_to_container() {
    let dir = tempfile::tempdir().unwrap();
    let dims = [3usize, 4, 3];
    let tt = random_tt(&dims, 2, 21).unwrap();
    let dense = tt.materialize().unwrap();

    let input = dir.path().join("dense.txt");
    let mut text = String::from("# low-rank source\n3\n3 4 3\n");
    for v in &dense {
        text.push_str(&format!("{v:e}\n"));
    }
    fs::write(&input, text).unwrap();

    let out = dir.path().join("compressed.ttr");
    assert_ok(&ttc(&[
        "truncate",
        "--input", input.to_str().unwrap(),
        "--rank", "2",
        "--out", out.to_str().unwrap(),
    ]));

    let back = load_tt(&out).unwrap();
    assert_eq!(back.mode_sizes(), &dims);
    let rebuilt = back.materialize().unwrap();
    let err: f64 = dense
        .iter()
        .zip(&rebuilt)
        .map(|(a, b)| (a - b) * (a - b))
        .sum::<f64>()
        .sqrt();
    let norm: f64 = dense.iter().map(|v| v * v).sum::<f64>().sqrt();
    assert!(err <= 1e-10 * norm, "rank-2 source must rebuild exactly");
}

#[test]
fn truncate_rejects_malformed_dense_files() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("o.ttr");
    for (name, body) in [
        ("short", "3\n3 4 3\n1.0 2.0\n"),
        ("trailing", "2\n2 2\n1 2 3 4 5\n"),
        ("one-mode", "1\n4\n1 2 3 4\n"),
    ] {
        let input = dir.path().join(format!("{name}.txt"));
        fs::write(&input, body).unwrap();
        let res = ttc(&[
            "truncate",
            "--input", input.to_str().unwrap(),
            "--rank", "2",
            "--out", out.to_str().unwrap(),
        ]);
        assert!(!res.status.success(), "{name} must be rejected");
        assert!(!Path::new(&out).exists() || name != "short");
    }
}
