use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use gps_cli::experiment::mean_std;
use gps_cli::ExperimentConfig;
use gps_core::image::{load_ppm, save_ppm};
use gps_core::rng::Rng;
use gps_core::{BufferMode, Image, PixelBudget, ReplayBuffer};

fn gps(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_gps")).args(args).output().expect("binary runs")
}

fn stdout(out: &Output) -> String {
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout.clone()).unwrap()
}

fn small_config(dir: &Path, seeds: &[u64], mode: &str) -> PathBuf {
    let text = format!(
        r#"schema_version = 1
seeds = {seeds:?}
out_dir = "{out}"

[dataset]
source = "synthetic"
num_classes = 6
resolution = 16
train_per_class = 20
test_per_class = 5
noise = 48.0

[tasks]
count = 3
classes_per_task = 2

[buffer]
mode = "{mode}"
k = 10
f = 2

[training]
lr = 0.01
hidden = 32
embed = 16
"#,
        out = dir.join("out").display()
    );
    let path = dir.join("config.toml");
    std::fs::write(&path, text).unwrap();
    path
}

fn random_ppm(dir: &Path, name: &str, h: usize, w: usize, seed: u64) -> PathBuf {
    let mut rng = Rng::new(seed);
    let data = (0..h * w * 3).map(|_| rng.below(256) as u8).collect();
    let path = dir.join(name);
    save_ppm(&Image::new(h, w, 3, data).unwrap(), &path).unwrap();
    path
}

// ---------------------------------------------------------------------------
// compress

#[test]
fn compress_halves_the_side() {
    let dir = tempfile::tempdir().unwrap();
    let input = random_ppm(dir.path(), "in.ppm", 84, 84, 1);
    let out = dir.path().join("out.ppm");
    let line = stdout(&gps(&["compress", "--input", input.to_str().unwrap(), "--f", "2", "--out", out.to_str().unwrap()]));
    assert!(line.contains("r=84 r'=42 f=2 ratio=4 dropped_pixels=0"), "{line}");
    let img = load_ppm(&out).unwrap();
    assert_eq!((img.height(), img.width()), (42, 42));
}

#[test]
fn compress_with_unit_factor_copies_bytes() {
    let dir = tempfile::tempdir().unwrap();
    let input = random_ppm(dir.path(), "in.ppm", 20, 20, 2);
    let out = dir.path().join("out.ppm");
    stdout(&gps(&["compress", "--input", input.to_str().unwrap(), "--f", "1", "--out", out.to_str().unwrap()]));
    assert_eq!(std::fs::read(&input).unwrap(), std::fs::read(&out).unwrap());
}

#[test]
fn compress_reports_dropped_border() {
    let dir = tempfile::tempdir().unwrap();
    let input = random_ppm(dir.path(), "in.ppm", 83, 83, 3);
    let out = dir.path().join("out.ppm");
    let line = stdout(&gps(&["compress", "--input", input.to_str().unwrap(), "--f", "2", "--out", out.to_str().unwrap()]));
    assert!(line.contains("r'=41") && line.contains("dropped_pixels=165"), "{line}");
    // Independent count: cells outside the 82x82 sampled region.
    let outside = (0..83).flat_map(|i| (0..83).map(move |j| (i, j))).filter(|&(i, j)| i >= 82 || j >= 82).count();
    assert_eq!(outside, 165);
    assert_eq!(load_ppm(&out).unwrap().side(), Some(41));
}

#[test]
fn compress_rejects_non_square_input() {
    let dir = tempfile::tempdir().unwrap();
    let input = random_ppm(dir.path(), "in.ppm", 20, 24, 4);
    let out = gps(&["compress", "--input", input.to_str().unwrap(), "--out", dir.path().join("o.ppm").to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("not square"));
}

#[test]
fn compress_rejects_corrupt_ppm() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("bad.ppm");
    std::fs::write(&input, b"P6\n4 4\n255\nshort").unwrap();
    let out = gps(&["compress", "--input", input.to_str().unwrap(), "--out", dir.path().join("o.ppm").to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(3));
}

// ---------------------------------------------------------------------------
// inspect-buffer and reconstruct

fn snapshot(dir: &Path, buf: &ReplayBuffer) -> PathBuf {
    let path = dir.join("buf.gpsb");
    std::fs::write(&path, buf.snapshot()).unwrap();
    path
}

fn field(report: &str, key: &str) -> String {
    report
        .lines()
        .find_map(|l| l.strip_prefix(&format!("{key}: ")))
        .unwrap_or_else(|| panic!("no {key} in {report}"))
        .to_string()
}

#[test]
fn inspect_empty_buffer() {
    let dir = tempfile::tempdir().unwrap();
    let buf = ReplayBuffer::new(PixelBudget::new(5, 8).unwrap(), BufferMode::Full, Rng::new(0)).unwrap();
    let report = stdout(&gps(&["inspect-buffer", snapshot(dir.path(), &buf).to_str().unwrap()]));
    assert_eq!(field(&report, "occupancy"), "0");
    assert_eq!(field(&report, "slots"), "5");
}

#[test]
fn inspect_gps_buffer_reports_four_times_the_slots() {
    let dir = tempfile::tempdir().unwrap();
    let buf = ReplayBuffer::new(PixelBudget::new(100, 32).unwrap(), BufferMode::Gps { factor: 2 }, Rng::new(0)).unwrap();
    let report = stdout(&gps(&["inspect-buffer", snapshot(dir.path(), &buf).to_str().unwrap()]));
    assert_eq!(field(&report, "slots"), "400");
    assert_eq!(field(&report, "mode"), "gps");
    assert_eq!(field(&report, "pixels"), "0 / 102400");
}

#[test]
fn inspect_rejects_corrupt_snapshot() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("junk.gpsb");
    std::fs::write(&path, b"GPSBjunk").unwrap();
    assert_eq!(gps(&["inspect-buffer", path.to_str().unwrap()]).status.code(), Some(3));
}

#[test]
fn reconstruct_from_images_and_snapshot() {
    let dir = tempfile::tempdir().unwrap();
    let inputs: Vec<PathBuf> = (0..4).map(|i| random_ppm(dir.path(), &format!("{i}.ppm"), 8, 8, i)).collect();
    let out = dir.path().join("mosaic.ppm");
    let mut args = vec!["reconstruct".to_string()];
    for p in &inputs {
        args.extend(["--input".into(), p.display().to_string()]);
    }
    args.extend(["--f".into(), "2".into(), "--out".into(), out.display().to_string()]);
    stdout(&gps(&args.iter().map(String::as_str).collect::<Vec<_>>()));
    let mosaic = load_ppm(&out).unwrap();
    assert_eq!(mosaic.side(), Some(8));
    // Top-left quarter comes from the first image: every pixel there is one of
    // that image's pixels in the matching 2x2 patch.
    let first = load_ppm(&inputs[0]).unwrap();
    for i in 0..4 {
        for j in 0..4 {
            let candidates: Vec<&[u8]> = (0..2).flat_map(|u| (0..2).map(move |v| (u, v))).map(|(u, v)| first.pixel(2 * i + u, 2 * j + v)).collect();
            assert!(candidates.contains(&mosaic.pixel(i, j)));
        }
    }

    let mut buf = ReplayBuffer::new(PixelBudget::new(2, 8).unwrap(), BufferMode::Gps { factor: 2 }, Rng::new(0)).unwrap();
    for n in 0..8 {
        buf.offer(Image::filled(4, 4, 3, n as u8 * 10).unwrap().with_label(n % 2)).unwrap();
    }
    let snap = snapshot(dir.path(), &buf);
    let line = stdout(&gps(&["reconstruct", "--snapshot", snap.to_str().unwrap(), "--class", "1", "--out", out.to_str().unwrap()]));
    assert!(line.contains("class 1"), "{line}");
    assert_eq!(load_ppm(&out).unwrap().side(), Some(8));
}

// ---------------------------------------------------------------------------
// run and sweep

fn read_matrix(path: &Path) -> Vec<(usize, usize, f64)> {
    let text = std::fs::read_to_string(path).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("t,i,a"));
    lines
        .map(|l| {
            let v: Vec<&str> = l.split(',').collect();
            (v[0].parse().unwrap(), v[1].parse().unwrap(), v[2].parse().unwrap())
        })
        .collect()
}

#[test]
fn ten_seed_run_writes_recomputable_summary() {
    let dir = tempfile::tempdir().unwrap();
    let seeds: Vec<u64> = (0..10).collect();
    let cfg = small_config(dir.path(), &seeds, "gps");
    let text = stdout(&gps(&["run", "--config", cfg.to_str().unwrap(), "--threads", "4"]));
    assert!(text.contains("over 10 seeds"), "{text}");
    let out = dir.path().join("out");

    let mut ends = Vec::new();
    for s in &seeds {
        let rows = read_matrix(&out.join(format!("seed-{s}-matrix.csv")));
        assert_eq!(rows.len(), 6);
        let last: Vec<f64> = rows.iter().filter(|r| r.0 == 3).map(|r| r.2).collect();
        ends.push(last.iter().sum::<f64>() / last.len() as f64);

        let end = std::fs::read_to_string(out.join(format!("seed-{s}-end.csv"))).unwrap();
        assert!(end.starts_with("task_i,a_N_i\n"));
    }
    let matrices = std::fs::read_dir(&out).unwrap().filter(|e| e.as_ref().unwrap().file_name().to_string_lossy().ends_with("-matrix.csv")).count();
    assert_eq!(matrices, 10);

    let summary = std::fs::read_to_string(out.join("summary.csv")).unwrap();
    let values: Vec<f64> = summary.lines().nth(1).unwrap().split(',').map(|v| v.parse().unwrap()).collect();
    assert_eq!(values[0], 10.0);
    let mean = ends.iter().sum::<f64>() / 10.0;
    let std = (ends.iter().map(|e| (e - mean).powi(2)).sum::<f64>() / 9.0).sqrt();
    assert!((values[1] - mean).abs() < 1e-9 && (values[2] - std).abs() < 1e-9, "{values:?} vs {mean} {std}");
    assert_eq!(mean_std(&ends).0, mean);

    let manifest: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(out.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["complete"], true);
    assert_eq!(manifest["seeds"].as_array().unwrap().len(), 10);

    let report = stdout(&gps(&["inspect-buffer", out.join("seed-0-buffer.gpsb").to_str().unwrap()]));
    let occupancy: usize = field(&report, "occupancy").parse().unwrap();
    let per_class: usize = report.lines().skip_while(|l| *l != "classes:").skip(1).map(|l| l.split(": ").nth(1).unwrap().parse::<usize>().unwrap()).sum();
    assert_eq!(occupancy, 40);
    assert_eq!(per_class, occupancy);
}

#[test]
fn repeated_run_is_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path(), &[0], "gps");
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    for out in [&a, &b] {
        stdout(&gps(&["run", "--config", cfg.to_str().unwrap(), "--seed", "42", "--out", out.to_str().unwrap()]));
    }
    for name in ["seed-42-matrix.csv", "seed-42-end.csv", "seed-42-buffer.gpsb", "seed-42-model.gpsm", "summary.csv"] {
        assert_eq!(std::fs::read(a.join(name)).unwrap(), std::fs::read(b.join(name)).unwrap(), "{name}");
    }
}

#[test]
fn zero_factor_is_a_config_error_naming_f() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path(), &[0], "gps");
    let text = std::fs::read_to_string(&cfg).unwrap().replace("f = 2", "f = 0");
    std::fs::write(&cfg, text).unwrap();
    let out = gps(&["run", "--config", cfg.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("f"));
}

#[test]
fn missing_config_file_is_a_config_error() {
    assert_eq!(gps(&["run", "--config", "/nonexistent/gps.toml"]).status.code(), Some(2));
}

#[test]
fn numerical_failure_exits_four_with_partial_artifacts() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path(), &[0], "none");
    let text = std::fs::read_to_string(&cfg).unwrap().replace("lr = 0.01", "lr = 1e30") + "\n[inference]\nhead = \"softmax\"\n";
    std::fs::write(&cfg, text).unwrap();
    let out = gps(&["run", "--config", cfg.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(4), "{}", String::from_utf8_lossy(&out.stderr));
    let manifest = std::fs::read_to_string(dir.path().join("out/manifest.json")).unwrap();
    assert!(manifest.contains("\"complete\": false"));
}

fn sweep(dir: &Path, axis: &str, values: &str) -> Vec<Vec<String>> {
    let cfg = small_config(dir, &[0, 1], "gps");
    let text = stdout(&gps(&["sweep", "--config", cfg.to_str().unwrap(), "--axis", axis, "--values", values]));
    let file = std::fs::read_to_string(dir.join(format!("out/sweep-{axis}.csv"))).unwrap();
    assert_eq!(text, file);
    let mut lines = file.lines();
    assert_eq!(lines.next(), Some("axis,value,mean,std,n"));
    lines.map(|l| l.split(',').map(String::from).collect()).collect()
}

#[test]
fn sweep_over_factor() {
    let dir = tempfile::tempdir().unwrap();
    let rows = sweep(dir.path(), "f", "1,2,4");
    assert_eq!(rows.iter().map(|r| r[1].as_str()).collect::<Vec<_>>(), ["1", "2", "4"]);
    assert!(rows.iter().all(|r| r[4] == "2"));
    // f=1 stores full-resolution images in K slots.
    let report = stdout(&gps(&["inspect-buffer", dir.path().join("out/f-1/seed-0-buffer.gpsb").to_str().unwrap()]));
    assert_eq!(field(&report, "slots"), "10");
    assert_eq!(field(&report, "slot side"), "16");
}

#[test]
fn sweep_over_mode_and_budget() {
    let dir = tempfile::tempdir().unwrap();
    let rows = sweep(dir.path(), "mode", "full,gps");
    assert_eq!(rows.len(), 2);
    let full = stdout(&gps(&["inspect-buffer", dir.path().join("out/mode-full/seed-0-buffer.gpsb").to_str().unwrap()]));
    let gps_ = stdout(&gps(&["inspect-buffer", dir.path().join("out/mode-gps/seed-0-buffer.gpsb").to_str().unwrap()]));
    assert_eq!(field(&full, "pixels").split(" / ").nth(1), field(&gps_, "pixels").split(" / ").nth(1));

    let dir = tempfile::tempdir().unwrap();
    let rows = sweep(dir.path(), "k", "20,40");
    assert_eq!(rows.len(), 2);
    let slots = |k: &str| -> usize {
        let r = stdout(&gps(&["inspect-buffer", dir.path().join(format!("out/k-{k}/seed-0-buffer.gpsb")).to_str().unwrap()]));
        field(&r, "slots").parse().unwrap()
    };
    assert_eq!((slots("20"), slots("40")), (80, 160));
}

#[test]
fn sweep_rejects_bad_axis() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path(), &[0], "gps");
    assert_eq!(gps(&["sweep", "--config", cfg.to_str().unwrap(), "--axis", "lr", "--values", "1"]).status.code(), Some(2));
}

#[test]
fn config_round_trips_through_toml() {
    let dir = tempfile::tempdir().unwrap();
    let path = small_config(dir.path(), &[3, 4], "full");
    let cfg = ExperimentConfig::load(&path).unwrap();
    assert_eq!(ExperimentConfig::parse(&cfg.to_toml()).unwrap(), cfg);
}
