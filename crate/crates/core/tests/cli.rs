use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use sbridge::eval::{kde, GridSpec};
use sbridge::io::{load_samples, read_samples_bin, write_samples_csv};
use sbridge::{GaussianMixture, Matrix, Rng};

fn sbridge(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_sbridge")).args(args).output().expect("spawn sbridge")
}

fn ok(args: &[&str]) -> String {
    let out = sbridge(args);
    assert!(out.status.success(), "sbridge {args:?} failed:\n{}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

/// Small networks and grids so the commands finish in seconds.
fn tiny_config(dir: &Path, extra: &str) -> PathBuf {
    let path = dir.join("tiny.toml");
    let text = format!(
        r#"target = "six-modes"
data_size = 2000
{extra}
[score]
iterations = 30
batch_size = 64
[score_net]
hidden = [16, 16]
embed_dim = 4
[ratio]
iterations = 30
batch_size = 64
[ratio_net]
hidden = [16, 16]
[sampler]
n1 = 50
n2 = 50
"#
    );
    std::fs::write(&path, text).unwrap();
    path
}

fn report_value(report: &str, key: &str) -> f64 {
    report
        .lines()
        .find_map(|l| l.strip_prefix(&format!("{key} = ")))
        .unwrap_or_else(|| panic!("no {key} in {report}"))
        .parse()
        .unwrap()
}

#[test]
fn training_writes_checkpoint_and_trace_and_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = tiny_config(dir.path(), "");
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    for out in [&a, &b] {
        ok(&["--config", s(&cfg), "--out", s(out), "--seed", "4", "train-score"]);
        ok(&["--config", s(&cfg), "--out", s(out), "--seed", "4", "train-ratio"]);
    }
    for name in ["score.sbnn", "ratio.sbnn"] {
        let (x, y) = (std::fs::read(a.join(name)).unwrap(), std::fs::read(b.join(name)).unwrap());
        assert!(x.starts_with(b"SBNN"));
        assert_eq!(x, y, "{name} differs between identical runs");
    }
    let trace = std::fs::read_to_string(a.join("score_loss.csv")).unwrap();
    let lines: Vec<&str> = trace.lines().collect();
    assert_eq!(lines[0], "iteration,loss");
    assert_eq!(lines.len(), 31);
    let last: f64 = lines[30].split(',').nth(1).unwrap().parse().unwrap();
    assert!(last.is_finite() && last > 0.0);
}

#[test]
fn missing_target_file_fails_without_partial_checkpoint() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.toml");
    std::fs::write(&cfg, "target = \"no/such/mixture.toml\"\n").unwrap();
    let out_dir = dir.path().join("run");
    for verb in ["train-score", "train-ratio"] {
        let out = sbridge(&["--config", s(&cfg), "--out", s(&out_dir), verb]);
        assert!(!out.status.success());
        assert!(String::from_utf8_lossy(&out.stderr).contains("mixture.toml"));
    }
    let leftovers: Vec<_> = std::fs::read_dir(&out_dir).map(|d| d.collect()).unwrap_or_default();
    assert!(leftovers.is_empty(), "{leftovers:?}");
}

#[test]
fn mixture_file_target_is_read_relative_to_config() {
    let dir = tempfile::tempdir().unwrap();
    let g = GaussianMixture::new(vec![0.25, 0.75], vec![vec![-2.0, 0.0], vec![2.0, 1.0]], vec![0.05, 0.05]).unwrap();
    std::fs::write(dir.path().join("two.toml"), toml::to_string(&g).unwrap()).unwrap();
    let cfg = dir.path().join("exp.toml");
    std::fs::write(&cfg, "target = \"two.toml\"\n[sampler]\nn1 = 100\nn2 = 100\n").unwrap();
    let out = dir.path().join("run");
    ok(&["--config", s(&cfg), "--out", s(&out), "sample", "--exact-drifts", "--n", "600"]);
    let report = ok(&["--config", s(&cfg), "--out", s(&out), "eval", s(&out.join("samples.bin"))]);
    assert_eq!(report_value(&report, "modes_missed"), 0.0);
}

#[test]
fn zero_particles_give_empty_valid_files() {
    let dir = tempfile::tempdir().unwrap();
    ok(&["--out", s(dir.path()), "sample", "--exact-drifts", "--n", "0"]);
    let bin = std::fs::read(dir.path().join("samples.bin")).unwrap();
    assert_eq!(bin.len(), 16);
    assert_eq!(read_samples_bin(&bin[..]).unwrap().shape(), (0, 2));
    assert_eq!(load_samples(&dir.path().join("samples.csv")).unwrap().shape(), (0, 2));
}

#[test]
fn stage1_only_with_exact_drifts_matches_smoothed_variance() {
    let dir = tempfile::tempdir().unwrap();
    ok(&["--preset", "gauss-1d", "--out", s(dir.path()), "sample", "--exact-drifts", "--stage1-only", "--n", "4000"]);
    let x = load_samples(&dir.path().join("samples.bin")).unwrap().column(0);
    let n = x.len() as f64;
    let m = x.iter().sum::<f64>() / n;
    let var = x.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (n - 1.0);
    // target N(0, 1) smoothed by sigma = 1
    assert!((var - 2.0).abs() <= 0.2, "variance {var}");
}

#[test]
fn checkpoint_noise_scales_must_match_config() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = tiny_config(dir.path(), "");
    let out = dir.path().join("run");
    ok(&["--config", s(&cfg), "--out", s(&out), "train-score"]);
    ok(&["--config", s(&cfg), "--out", s(&out), "train-ratio"]);
    ok(&["--config", s(&cfg), "--out", s(&out), "sample", "--n", "20"]);

    let other = dir.path().join("other");
    std::fs::create_dir_all(&other).unwrap();
    let mismatched = tiny_config(&other, "tau = 4.0");
    let r = sbridge(&["--config", s(&mismatched), "--out", s(&out), "sample", "--n", "20"]);
    assert!(!r.status.success());
    assert!(String::from_utf8_lossy(&r.stderr).contains("tau"));

    let mismatched = tiny_config(&other, "sigma = 0.5");
    let r = sbridge(&["--config", s(&mismatched), "--out", s(&out), "sample", "--n", "20", "--skip-stage1"]);
    assert!(!r.status.success());
    assert!(String::from_utf8_lossy(&r.stderr).contains("sigma"));
}

#[test]
fn sampling_without_checkpoints_fails() {
    let dir = tempfile::tempdir().unwrap();
    let r = sbridge(&["--out", s(dir.path()), "sample", "--n", "5"]);
    assert!(!r.status.success());
    assert!(String::from_utf8_lossy(&r.stderr).contains("score.sbnn"));
}

#[test]
fn conflicting_sample_flags_are_rejected() {
    let r = sbridge(&["sample", "--exact-drifts", "--stage1-only", "--skip-stage1"]);
    assert!(!r.status.success());
}

#[test]
fn malformed_csv_is_rejected_with_line_number() {
    let dir = tempfile::tempdir().unwrap();
    let f = dir.path().join("bad.csv");
    std::fs::write(&f, "x0,x1\n1.0,2.0\n3.0,oops\n").unwrap();
    let r = sbridge(&["--out", s(dir.path()), "eval", s(&f)]);
    assert!(!r.status.success());
    assert!(String::from_utf8_lossy(&r.stderr).contains("line 3"));
}

#[test]
fn eval_of_target_draws_sits_near_self_distance_baseline() {
    let dir = tempfile::tempdir().unwrap();
    let x = GaussianMixture::six_modes().sample(1000, &mut Rng::new(77));
    let f = dir.path().join("target.csv");
    write_samples_csv(std::fs::File::create(&f).unwrap(), &x).unwrap();
    let report = ok(&["--out", s(dir.path()), "eval", s(&f)]);
    let (w2, base) = (report_value(&report, "w2"), report_value(&report, "w2_baseline"));
    assert!(w2 <= 1.5 * base, "w2 {w2} vs baseline {base}");
    assert!(report.contains("w2_method = exact"));
    assert_eq!(report_value(&report, "modes_missed"), 0.0);
    assert!(dir.path().join("eval.txt").exists());
}

#[test]
fn kde_of_six_mode_samples_peaks_on_the_means() {
    let dir = tempfile::tempdir().unwrap();
    let g = GaussianMixture::six_modes();
    let x = g.sample(5000, &mut Rng::new(8));
    let f = dir.path().join("x.csv");
    write_samples_csv(std::fs::File::create(&f).unwrap(), &x).unwrap();
    ok(&["--out", s(dir.path()), "kde", s(&f)]);
    let ppm = std::fs::read(dir.path().join("kde.ppm")).unwrap();
    assert!(ppm.starts_with(b"P6\n141 141\n255\n"));
    // argmax of the written grid near each mean
    let csv = std::fs::read_to_string(dir.path().join("kde.csv")).unwrap();
    let rows: Vec<[f64; 3]> = csv
        .lines()
        .skip(1)
        .map(|l| {
            let v: Vec<f64> = l.split(',').map(|c| c.parse().unwrap()).collect();
            [v[0], v[1], v[2]]
        })
        .collect();
    for m in g.means() {
        let best = rows
            .iter()
            .filter(|r| (r[0] - m[0]).hypot(r[1] - m[1]) < 1.25)
            .max_by(|a, b| a[2].total_cmp(&b[2]))
            .unwrap();
        assert!((best[0] - m[0]).hypot(best[1] - m[1]) <= 0.2, "peak {best:?} for mean {m:?}");
    }
    // same grid and bandwidth as the library call
    let k = kde(&x, GridSpec::square(7.0, 141), None).unwrap();
    let top = k.density.iter().cloned().fold(0.0, f64::max);
    let top_csv = rows.iter().map(|r| r[2]).fold(0.0, f64::max);
    assert!((top - top_csv).abs() <= 1e-9 * top);
}

#[test]
fn exact_and_learned_fields_share_the_grid() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = tiny_config(dir.path(), "");
    let (learned, exact) = (dir.path().join("l"), dir.path().join("e"));
    ok(&["--config", s(&cfg), "--out", s(&learned), "train-score"]);
    ok(&["--config", s(&cfg), "--out", s(&learned), "field", "--stage", "2", "--t", "1"]);
    ok(&["--config", s(&cfg), "--out", s(&exact), "field", "--stage", "2", "--t", "1", "--exact-drifts"]);
    let grid = |p: &Path| -> Vec<String> {
        std::fs::read_to_string(p.join("field_stage2.csv"))
            .unwrap()
            .lines()
            .map(|l| l.split(',').take(2).collect::<Vec<_>>().join(","))
            .collect()
    };
    let (a, b) = (grid(&learned), grid(&exact));
    assert_eq!(a[0], "x,y");
    assert_eq!(a, b);
    assert_eq!(a.len(), 1 + 29 * 29);
}

#[test]
fn stage1_field_needs_time_below_one() {
    let dir = tempfile::tempdir().unwrap();
    ok(&["--out", s(dir.path()), "field", "--stage", "1", "--t", "0.5", "--exact-drifts", "--nodes", "5"]);
    let r = sbridge(&["--out", s(dir.path()), "field", "--stage", "1", "--t", "1", "--exact-drifts"]);
    assert!(!r.status.success());
}

#[test]
fn sampling_is_byte_identical_across_runs_and_thread_counts() {
    let dir = tempfile::tempdir().unwrap();
    let mut files = Vec::new();
    for (k, threads) in ["1", "1", "3"].iter().enumerate() {
        let out = dir.path().join(format!("r{k}"));
        ok(&["--out", s(&out), "--seed", "11", "--threads", threads, "sample", "--exact-drifts", "--n", "600"]);
        files.push(std::fs::read(out.join("samples.bin")).unwrap());
    }
    assert_eq!(files[0], files[1]);
    assert_eq!(files[0], files[2]);

    let out = dir.path().join("env");
    let r = Command::new(env!("CARGO_BIN_EXE_sbridge"))
        .env("SB_THREADS", "2")
        .args(["--out", s(&out), "--seed", "11", "sample", "--exact-drifts", "--n", "600"])
        .output()
        .unwrap();
    assert!(r.status.success());
    assert_eq!(std::fs::read(out.join("samples.bin")).unwrap(), files[0]);
}

#[test]
fn trajectory_dump_holds_every_kth_step() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = tiny_config(dir.path(), "");
    ok(&[
        "--config",
        s(&cfg),
        "--out",
        s(dir.path()),
        "sample",
        "--exact-drifts",
        "--n",
        "7",
        "--dump-trajectory",
        "10",
    ]);
    let text = std::fs::read_to_string(dir.path().join("trajectory.csv")).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("stage,step,particle,x0,x1"));
    // 50 steps per stage, a frame every 10 steps, 7 particles
    assert_eq!(lines.count(), 2 * 5 * 7);
    // the last stage-2 frame is the final output
    let last: Vec<f64> = text.lines().last().unwrap().split(',').skip(3).map(|c| c.parse().unwrap()).collect();
    let x = load_samples(&dir.path().join("samples.bin")).unwrap();
    assert_eq!(x.row(6), &last[..]);
}

#[test]
fn skipping_stage1_still_covers_every_mode() {
    let dir = tempfile::tempdir().unwrap();
    ok(&["--out", s(dir.path()), "sample", "--exact-drifts", "--n", "1000", "--skip-stage1"]);
    let report = ok(&["--out", s(dir.path()), "eval", s(&dir.path().join("samples.bin"))]);
    assert_eq!(report_value(&report, "n"), 1000.0);
    assert_eq!(report_value(&report, "modes_missed"), 0.0);
}

#[test]
fn inpaint_and_interpolate_commands() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = tiny_config(dir.path(), "");
    ok(&[
        "--config",
        s(&cfg),
        "--out",
        s(dir.path()),
        "inpaint",
        "--observed=0,4.33",
        "--mask",
        "0,1",
        "--count",
        "4",
        "--exact-drifts",
    ]);
    let x: Matrix = load_samples(&dir.path().join("inpaint.csv")).unwrap();
    assert_eq!(x.shape(), (4, 2));
    assert!(x.column(1).iter().all(|&v| v == 4.33));

    ok(&[
        "--config",
        s(&cfg),
        "--out",
        s(dir.path()),
        "interpolate",
        "--from=5,0",
        "--to=-5,0",
        "--lambdas",
        "0,0.5,1",
        "--noise",
        "0.5",
        "--exact-drifts",
    ]);
    let text = std::fs::read_to_string(dir.path().join("interpolate.csv")).unwrap();
    assert_eq!(text.lines().next(), Some("lambda,x0,x1"));
    assert_eq!(text.lines().count(), 4);

    let r = sbridge(&[
        "--config",
        s(&cfg),
        "--out",
        s(dir.path()),
        "interpolate",
        "--from=5,0",
        "--to=-5,0",
        "--noise",
        "2",
        "--exact-drifts",
    ]);
    assert!(!r.status.success());
}
