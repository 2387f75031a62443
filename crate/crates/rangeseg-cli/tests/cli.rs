use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn bin() -> &'static str {
    env!("CARGO_BIN_EXE_rangeseg")
}

fn run(args: &[&str]) -> Output {
    Command::new(bin()).args(args).output().expect("binary runs")
}

fn run_ok(args: &[&str]) -> String {
    let out = run(args);
    assert!(
        out.status.success(),
        "command {:?} failed:\n{}",
        args,
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8_lossy(&out.stdout).into_owned()
}

fn read(path: impl AsRef<Path>) -> Vec<u8> {
    fs::read(path.as_ref()).unwrap_or_else(|e| panic!("{}: {e}", path.as_ref().display()))
}

#[test]
fn help_exits_zero_everywhere() {
    let top = run(&["--help"]);
    assert_eq!(top.status.code(), Some(0));
    let text = String::from_utf8_lossy(&top.stdout).into_owned();
    for sub in [
        "encode", "synth", "train", "infer", "cluster", "eval", "analyze", "fogsim", "defog",
        "bench",
    ] {
        assert!(text.contains(sub), "top-level help lists {sub}");
        let out = run(&[sub, "--help"]);
        assert_eq!(out.status.code(), Some(0), "{sub} --help exits 0");
    }
}

#[test]
fn usage_errors_exit_one() {
    let out = run(&["encode", "--definitely-not-a-flag"]);
    assert_eq!(out.status.code(), Some(1));
    let out = run(&["no-such-command"]);
    assert_eq!(out.status.code(), Some(1));
    // --gt without --boxes is a usage error, not a runtime one
    let out = run(&["encode", "--in", "x.bin", "--out", "y.rimg", "--gt", "z.rseg"]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn runtime_errors_exit_two() {
    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("missing.bin");
    let out_path = dir.path().join("out.rimg");
    let out = run(&[
        "encode",
        "--in",
        missing.to_str().unwrap(),
        "--out",
        out_path.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.starts_with("error:"), "stderr names the failure: {err}");
    assert!(err.contains("missing.bin"), "stderr names the file: {err}");
}

#[test]
fn synth_clouds_reencode_byte_identically() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path().join("frames");
    run_ok(&[
        "synth",
        "--frames",
        "2",
        "--seed",
        "7",
        "--clouds",
        "--h",
        "32",
        "--w",
        "128",
        "--out-dir",
        d.to_str().unwrap(),
    ]);
    let re_img = dir.path().join("re.rimg");
    let re_gt = dir.path().join("re.rseg");
    run_ok(&[
        "encode",
        "--in",
        d.join("0001.bin").to_str().unwrap(),
        "--boxes",
        d.join("0001.boxes.jsonl").to_str().unwrap(),
        "--out",
        re_img.to_str().unwrap(),
        "--gt",
        re_gt.to_str().unwrap(),
        "--h",
        "32",
        "--w",
        "128",
    ]);
    assert_eq!(read(d.join("0001.rimg")), read(&re_img), "image re-encodes byte for byte");
    assert_eq!(read(d.join("0001.rseg")), read(&re_gt), "labels re-derive byte for byte");
}

fn write_tiny_net_config(path: &Path) {
    fs::write(
        path,
        "variant = mini_lasernet\nchannels = 4, 4, 8, 8\nblocks = 1, 1, 1, 1\nheavy_channels = 8\nlight_channels = 8\n",
    )
    .unwrap();
}

#[test]
fn train_and_infer_rerun_bit_identically() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path().join("frames");
    run_ok(&[
        "synth", "--frames", "3", "--seed", "3", "--h", "16", "--w", "32", "--out-dir",
        d.to_str().unwrap(),
    ]);
    let cfg = dir.path().join("net.kv");
    write_tiny_net_config(&cfg);
    let train_once = |tag: &str| {
        let w = dir.path().join(format!("w{tag}.rswt"));
        let m = dir.path().join(format!("m{tag}.csv"));
        run_ok(&[
            "train",
            "--data-dir",
            d.to_str().unwrap(),
            "--net-config",
            cfg.to_str().unwrap(),
            "--steps",
            "5",
            "--lr-max",
            "0.01",
            "--out",
            w.to_str().unwrap(),
            "--metrics",
            m.to_str().unwrap(),
        ]);
        (read(&w), read(&m), w)
    };
    let (w1, m1, w_path) = train_once("1");
    let (w2, m2, _) = train_once("2");
    assert_eq!(w1, w2, "same seeds give the same weights");
    assert_eq!(m1, m2, "same seeds give the same losses");

    let metrics = String::from_utf8(m1).unwrap();
    let mut lines = metrics.lines();
    assert_eq!(lines.next(), Some("step,lr,loss_pred,loss_range,loss_total"));
    assert_eq!(lines.count(), 5, "one row per step");

    let infer_once = |tag: &str| {
        let p = dir.path().join(format!("p{tag}.rseg"));
        run_ok(&[
            "infer",
            "--weights",
            w_path.to_str().unwrap(),
            "--in",
            d.join("0000.rimg").to_str().unwrap(),
            "--out",
            p.to_str().unwrap(),
            "--net-config",
            cfg.to_str().unwrap(),
        ]);
        read(&p)
    };
    let p1 = infer_once("1");
    let p2 = infer_once("2");
    assert_eq!(p1, p2, "inference is deterministic");
    assert!(!p1.is_empty());
}

#[test]
fn fogsim_is_seeded_and_defog_clears_near_returns() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path().join("frames");
    run_ok(&[
        "synth", "--frames", "1", "--seed", "11", "--clouds", "--h", "32", "--w", "128",
        "--out-dir", d.to_str().unwrap(),
    ]);
    let cloud = d.join("0000.bin");
    let fog_to = |path: &Path, seed: &str| {
        run_ok(&[
            "fogsim",
            "--in",
            cloud.to_str().unwrap(),
            "--out",
            path.to_str().unwrap(),
            "--seed",
            seed,
        ]);
        read(path)
    };
    let a = fog_to(&dir.path().join("a.bin"), "9");
    let b = fog_to(&dir.path().join("b.bin"), "9");
    let c = fog_to(&dir.path().join("c.bin"), "10");
    assert_eq!(a, b, "same seed gives the same fog");
    assert_ne!(a, c, "different seeds disagree");

    let cleaned = dir.path().join("clean.bin");
    run_ok(&[
        "defog",
        "--in",
        dir.path().join("a.bin").to_str().unwrap(),
        "--out",
        cleaned.to_str().unwrap(),
    ]);
    let bytes = read(&cleaned);
    assert_eq!(bytes.len() % 16, 0);
    for rec in bytes.chunks_exact(16) {
        let f = |i: usize| f32::from_le_bytes(rec[i * 4..i * 4 + 4].try_into().unwrap());
        let (x, y, z) = (f(0), f(1), f(2));
        let range = (x * x + y * y + z * z).sqrt();
        assert!(range >= 2.0, "near return survived: {range}");
    }
}

#[test]
fn eval_scores_a_perfect_prediction_at_one() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path().join("frames");
    run_ok(&[
        "synth", "--frames", "1", "--seed", "5", "--h", "32", "--w", "128", "--out-dir",
        d.to_str().unwrap(),
    ]);
    let gt = d.join("0000.rseg");
    let img = d.join("0000.rimg");
    let csv = run_ok(&[
        "eval",
        "--pred",
        gt.to_str().unwrap(),
        "--gt",
        gt.to_str().unwrap(),
        "--img",
        img.to_str().unwrap(),
    ]);
    assert!(csv.starts_with("class,iou\n"));
    let mean = csv
        .lines()
        .find_map(|l| l.strip_prefix("mean,"))
        .expect("mean row present");
    assert_eq!(mean.parse::<f64>().unwrap(), 1.0);
    assert!(csv.contains("top8_mean,"), "band rows name their row counts: {csv}");
}

#[test]
fn cluster_reports_instances_and_writes_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path().join("frames");
    run_ok(&[
        "synth", "--frames", "1", "--seed", "7", "--clouds", "--h", "32", "--w", "128",
        "--out-dir", d.to_str().unwrap(),
    ]);
    let inst = dir.path().join("inst.rsg2");
    let cleaned = dir.path().join("clean.rseg");
    let jsonl = dir.path().join("inst.jsonl");
    let stdout = run_ok(&[
        "cluster",
        "--pred",
        d.join("0000.rseg").to_str().unwrap(),
        "--img",
        d.join("0000.rimg").to_str().unwrap(),
        "--cloud",
        d.join("0000.bin").to_str().unwrap(),
        "--out-instances",
        inst.to_str().unwrap(),
        "--out-cleaned",
        cleaned.to_str().unwrap(),
        "--jsonl",
        jsonl.to_str().unwrap(),
    ]);
    assert!(stdout.contains("instances"), "summary line: {stdout}");
    assert!(!read(&inst).is_empty());
    assert!(!read(&cleaned).is_empty());
    let text = fs::read_to_string(&jsonl).unwrap();
    assert!(text.lines().next().unwrap().starts_with("{\"id\":1,"));
}

#[test]
fn bench_emits_one_row_per_stage() {
    let csv = run_ok(&[
        "bench", "--reps", "2", "--warmup", "0", "--points", "5000", "--h", "16", "--w", "64",
    ]);
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines[0], "stage,avg_ms,std_ms");
    assert_eq!(lines.len(), 4);
    for (line, stage) in lines[1..].iter().zip(["encode", "forward", "cluster"]) {
        let mut cells = line.split(',');
        assert_eq!(cells.next(), Some(stage));
        for cell in cells {
            assert!(cell.parse::<f64>().unwrap() >= 0.0);
        }
    }
}
