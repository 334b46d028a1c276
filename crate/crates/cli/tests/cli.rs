use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tempfile::TempDir;
use tickhurst_core::synth::SynthSpec;

const OPEN: u32 = 34_200;
const N: usize = 23_400;

fn tickhurst(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_tickhurst"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

/// Tape rows carrying `size` shares at `50 + 2x` per second, so each one-second
/// bucket's traded value is an affine image of `x`.
fn push_rows(text: &mut String, x: &[f64], size: u32) {
    for (i, v) in x.iter().enumerate() {
        let t = OPEN + i as u32;
        let _ = writeln!(
            text,
            "{:02}:{:02}:{:02},{:.6},{size},@,0,N",
            t / 3600,
            t / 60 % 60,
            t % 60,
            50.0 + 2.0 * v
        );
    }
}

fn write_tape(dir: &Path, name: &str, x: &[f64]) -> PathBuf {
    let mut text = String::from("time,price,size,cond,corr,ex\n");
    push_rows(&mut text, x, 100);
    let path = dir.join(name);
    fs::write(&path, text).unwrap();
    path
}

fn fgn_tapes(dir: &Path, h: f64, days: u32, seed0: u64) {
    for d in 1..=days {
        let x = SynthSpec::fgn(h, N, seed0 + d as u64).generate().unwrap();
        write_tape(dir, &format!("SYN_200603{d:02}.csv"), &x);
    }
}

fn csv_rows(path: &Path) -> Vec<Vec<String>> {
    let text = fs::read_to_string(path).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
    text.lines().skip(1).map(|l| l.split(',').map(String::from).collect()).collect()
}

fn header_index(path: &Path, name: &str) -> usize {
    let text = fs::read_to_string(path).unwrap();
    text.lines().next().unwrap().split(',').position(|c| c == name).unwrap()
}

fn column(path: &Path, name: &str) -> Vec<f64> {
    let i = header_index(path, name);
    csv_rows(path).iter().map(|r| r[i].parse().unwrap()).collect()
}

struct Dirs {
    _tmp: TempDir,
    input: PathBuf,
    out: PathBuf,
}

fn dirs() -> Dirs {
    let tmp = tempfile::tempdir().unwrap();
    let input = tmp.path().join("in");
    fs::create_dir(&input).unwrap();
    let out = tmp.path().join("out");
    Dirs { input, out, _tmp: tmp }
}

#[test]
fn analyze_rolls_three_sessions_into_one_month() {
    let d = dirs();
    fgn_tapes(&d.input, 0.5, 3, 10);
    let o = tickhurst(&["analyze", p(&d.input), "-o", p(&d.out)]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));

    assert_eq!(csv_rows(&d.out.join("sessions.csv")).len(), 3);
    let monthly = d.out.join("monthly_SYN.csv");
    let rows = csv_rows(&monthly);
    assert_eq!(rows.len(), 1);
    assert_eq!(rows[0][0], "2006-03");
    assert_eq!(column(&monthly, "day_count"), [3.0]);
    assert!(d.out.join("logscale/SYN_20060301.csv").exists());

    let manifest: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(d.out.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["config_sha256"].as_str().unwrap().len(), 64);
    assert_eq!(manifest["files"].as_array().unwrap().len(), 3);
}

#[test]
fn corrupt_file_is_skipped_with_warning() {
    let d = dirs();
    fgn_tapes(&d.input, 0.5, 5, 20);
    let bad = d.input.join("SYN_20060303.csv");
    let mut text = fs::read_to_string(&bad).unwrap();
    text.push_str("15:59:59,abc,100,@,0,N\n");
    fs::write(&bad, text).unwrap();

    let o = tickhurst(&["analyze", p(&d.input), "-o", p(&d.out)]);
    assert_eq!(o.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&o.stderr).contains("SYN_20060303"));
    assert_eq!(csv_rows(&d.out.join("sessions.csv")).len(), 4);

    let manifest = fs::read_to_string(d.out.join("manifest.json")).unwrap();
    assert!(manifest.contains("\"failed\""));
}

#[test]
fn all_files_failing_exits_one() {
    let d = dirs();
    fs::write(d.input.join("SYN_20060301.csv"), "09:30:00,x,1,@,0,N\n").unwrap();
    fs::write(d.input.join("no_date_here.csv"), "").unwrap();
    let o = tickhurst(&["analyze", p(&d.input), "-o", p(&d.out)]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn analyze_recovers_fgn_monthly_mean() {
    let d = dirs();
    fgn_tapes(&d.input, 0.7, 20, 100);
    let o = tickhurst(&["analyze", p(&d.input), "-o", p(&d.out), "--workers", "4"]);
    assert!(o.status.success());
    let mean = column(&d.out.join("monthly_SYN.csv"), "mean_H")[0];
    assert!((mean - 0.7).abs() <= 0.02, "monthly mean {mean}");
}

#[test]
fn analyze_is_reproducible_across_worker_counts() {
    let d = dirs();
    fgn_tapes(&d.input, 0.6, 4, 40);
    let a = d.out.join("a");
    let b = d.out.join("b");
    assert!(tickhurst(&["analyze", p(&d.input), "-o", p(&a), "--workers", "1"]).status.success());
    assert!(tickhurst(&["analyze", p(&d.input), "-o", p(&b), "--workers", "3"]).status.success());
    for f in ["sessions.csv", "monthly_SYN.csv", "logscale/SYN_20060302.csv"] {
        assert_eq!(fs::read(a.join(f)).unwrap(), fs::read(b.join(f)).unwrap(), "{f}");
    }
}

#[test]
fn json_format_mirrors_field_names() {
    let d = dirs();
    fgn_tapes(&d.input, 0.5, 2, 60);
    let o = tickhurst(&["analyze", p(&d.input), "-o", p(&d.out), "--format", "json"]);
    assert!(o.status.success());
    let rows: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(d.out.join("sessions.json")).unwrap()).unwrap();
    let first = &rows.as_array().unwrap()[0];
    for key in ["symbol", "date", "H", "ci_low", "ci_high", "alpha_hat", "var_alpha", "j1", "j2"] {
        assert!(first.get(key).is_some(), "{key}");
    }
    let monthly: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(d.out.join("monthly_SYN.json")).unwrap()).unwrap();
    assert_eq!(monthly[0]["day_count"], 2);
    assert!(monthly[0].get("mean_H").is_some());
}

#[test]
fn config_file_with_flag_override() {
    let d = dirs();
    fgn_tapes(&d.input, 0.5, 1, 70);
    let cfg = d.input.parent().unwrap().join("run.conf");
    fs::write(
        &cfg,
        format!("# study\ninputs = {}\noutput_dir = {}\nformat = json\nj2 = 9\n", p(&d.input), p(&d.out)),
    )
    .unwrap();
    let o = tickhurst(&["analyze", "-c", p(&cfg), "--format", "csv"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(column(&d.out.join("sessions.csv"), "j2"), [9.0]);

    fs::write(&cfg, "colour = red\n").unwrap();
    let o = tickhurst(&["analyze", "-c", p(&cfg), p(&d.input)]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("colour"));

    let o = tickhurst(&["analyze", p(&d.input), "--delta-t", "0"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("delta_t"));
}

#[test]
fn ingest_writes_series_and_drop_counts() {
    let d = dirs();
    let mut text = String::from("09:30:00,27.15,300,@,0,N\n09:30:00.5,27.16,100,@,0,N\n");
    text.push_str("09:30:02,27.20,100,Z,0,N\n09:29:59,27.20,100,@,0,N\n");
    fs::write(d.input.join("GOLD_2006-06-30.csv"), text).unwrap();
    let o = tickhurst(&["ingest", p(&d.input), "-o", p(&d.out)]);
    assert!(o.status.success());

    let summary = d.out.join("ingest_summary.csv");
    assert_eq!(column(&summary, "parsed"), [4.0]);
    assert_eq!(column(&summary, "kept"), [2.0]);
    assert_eq!(column(&summary, "excluded_condition"), [1.0]);
    assert_eq!(column(&summary, "outside_session"), [1.0]);
    let series = fs::read_to_string(d.out.join("series/GOLD_20060630.csv")).unwrap();
    let mut lines = series.lines();
    assert_eq!(lines.next(), Some("bucket_index,t_start_seconds,traded_value"));
    assert_eq!(lines.next(), Some("0,34200,10861.00"));
}

fn mixed_tape(dir: &Path, name: &str, seed: u64, with_large: bool) {
    let small = SynthSpec::fgn(0.8, N, seed).generate().unwrap();
    let large = SynthSpec::white(N, seed + 1000).generate().unwrap();
    let mut text = String::new();
    push_rows(&mut text, &small, 100);
    if with_large {
        push_rows(&mut text, &large, 2000);
    }
    fs::write(dir.join(name), text).unwrap();
}

#[test]
fn buckets_skip_empty_ranges() {
    let d = dirs();
    mixed_tape(&d.input, "SYN_20060301.csv", 1, false);
    let o = tickhurst(&["buckets", p(&d.input), "-o", p(&d.out)]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(csv_rows(&d.out.join("bucket_lt250.csv")).len(), 1);
    for label in ["250-500", "750-1000", "1500plus"] {
        assert!(csv_rows(&d.out.join(format!("bucket_{label}.csv"))).is_empty());
    }
    let skipped = csv_rows(&d.out.join("buckets_skipped.csv"));
    assert_eq!(skipped.len(), 3);
}

#[test]
fn buckets_separate_small_and_large_trades() {
    let d = dirs();
    mixed_tape(&d.input, "SYN_20060301.csv", 5, true);
    mixed_tape(&d.input, "SYN_20060302.csv", 6, true);
    let o = tickhurst(&["buckets", p(&d.input), "-o", p(&d.out)]);
    assert!(o.status.success());

    let small = column(&d.out.join("bucket_lt250.csv"), "H");
    let large = column(&d.out.join("bucket_1500plus.csv"), "H");
    assert_eq!((small.len(), large.len()), (2, 2));
    for (s, l) in small.iter().zip(&large) {
        assert!(s - l > 0.1, "{s} vs {l}");
    }

    let props = d.out.join("proportions.csv");
    let fractions = column(&props, "fraction");
    let rows = csv_rows(&props);
    for date in ["2006-03-01", "2006-03-02"] {
        let sum: f64 = rows
            .iter()
            .zip(&fractions)
            .filter(|(r, _)| r[1] == date)
            .map(|(_, f)| f)
            .sum();
        assert!((sum - 1.0).abs() <= 1e-12, "{date}: {sum}");
    }
}

#[test]
fn shuffle_check_destroys_fgn_correlation() {
    let d = dirs();
    fgn_tapes(&d.input, 0.8, 8, 200);
    let o = tickhurst(&["shuffle-check", p(&d.input), "-o", p(&d.out), "--seed", "3"]);
    assert!(o.status.success());
    let f = d.out.join("shuffle_check.csv");
    for h in column(&f, "H_shuffled") {
        assert!((h - 0.5).abs() <= 0.03, "shuffled {h}");
    }
    for h in column(&f, "H_original") {
        assert!(h > 0.7, "original {h}");
    }
}

#[test]
fn shuffle_check_white_null() {
    let d = dirs();
    for day in 1..=8u32 {
        let x = SynthSpec::white(N, 300 + day as u64).generate().unwrap();
        write_tape(&d.input, &format!("WN_200604{day:02}.csv"), &x);
    }
    let o = tickhurst(&["shuffle-check", p(&d.input), "-o", p(&d.out)]);
    assert!(o.status.success());
    for diff in column(&d.out.join("shuffle_check.csv"), "difference") {
        assert!(diff.abs() <= 0.04, "difference {diff}");
    }
}

#[test]
fn empty_input_is_a_usage_error() {
    let d = dirs();
    let o = tickhurst(&["shuffle-check", "-o", p(&d.out)]);
    assert_eq!(o.status.code(), Some(2));
    let o = tickhurst(&["shuffle-check", p(&d.input), "-o", p(&d.out)]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn synth_is_byte_identical_across_runs() {
    let d = dirs();
    let (a, b) = (d.out.join("a"), d.out.join("b"));
    for dir in [&a, &b] {
        let o = tickhurst(&["synth", "--kind", "white", "--length", "23400", "--seed", "7", "-o", p(dir)]);
        assert!(o.status.success());
    }
    for f in ["synth_white_7.csv", "synth_white_7.json"] {
        assert_eq!(fs::read(a.join(f)).unwrap(), fs::read(b.join(f)).unwrap());
    }
    let values = column(&a.join("synth_white_7.csv"), "value");
    assert_eq!(values.len(), 23_400);
    let sidecar: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(a.join("synth_white_7.json")).unwrap()).unwrap();
    assert_eq!(sidecar["kind"], "white");
    assert_eq!(sidecar["seed"], 7);
}

#[test]
fn synth_rejects_h_above_one() {
    let d = dirs();
    let o = tickhurst(&["synth", "--kind", "fgn", "--target-h", "1.2", "-o", p(&d.out)]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("target_H"));
}

#[test]
fn synth_superposition_has_unit_variance() {
    let d = dirs();
    let o = tickhurst(&[
        "synth", "--kind", "superposition", "--target-h", "0.8", "--mix-weight", "0.5", "--length",
        "23400", "--seed", "11", "-o", p(&d.out),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let x = column(&d.out.join("synth_superposition_11.csv"), "value");
    assert_eq!(x.len(), 23_400);
    let var = x.iter().map(|v| v * v).sum::<f64>() / x.len() as f64;
    assert!((var - 1.0).abs() <= 0.03, "variance {var}");
}
