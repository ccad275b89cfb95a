use std::path::{Path, PathBuf};
use std::process::{Command, Output};

const CYLINDER: &str = "cyl.obj";

const SCENE: &str = r#"
version = 1
id = "demo"
seed = 5
target_object = 0
table = 0.0

[[objects]]
mesh = "cyl.obj"
position = [0.0, 0.0, 0.075]
prompts = ["top"]

[objects.oracle.top]
min = [-1.0, -1.0, 0.0]
max = [1.0, 1.0, 1.0]
"#;

const CONFIG: &str = r#"
[optimizer]
steps = 20

[region]
image_size = 64

[bps]
points = 16
cloud_points = 128

[train]
hidden = [16, 16]
epochs = 3
batch_size = 4
time_dim = 4
"#;

/// Capped cylinder along z with 12 sides, radius 0.035, height 0.15.
fn cylinder_obj() -> String {
    let (n, r, h) = (12, 0.035f64, 0.15f64);
    let mut s = String::new();
    for z in [-h / 2.0, h / 2.0] {
        for i in 0..n {
            let a = 2.0 * std::f64::consts::PI * i as f64 / n as f64;
            s += &format!("v {} {} {}\n", r * a.cos(), r * a.sin(), z);
        }
    }
    s += &format!("v 0 0 {}\nv 0 0 {}\n", -h / 2.0, h / 2.0);
    let (bottom, top) = (2 * n + 1, 2 * n + 2);
    for i in 0..n {
        let j = (i + 1) % n;
        let (a, b, c, d) = (i + 1, j + 1, n + i + 1, n + j + 1);
        s += &format!("f {a} {b} {d}\nf {a} {d} {c}\n");
        s += &format!("f {bottom} {b} {a}\nf {top} {c} {d}\n");
    }
    s
}

struct Fixture {
    dir: tempfile::TempDir,
}

impl Fixture {
    fn new() -> Self {
        let dir = tempfile::tempdir().unwrap();
        std::fs::write(dir.path().join(CYLINDER), cylinder_obj()).unwrap();
        std::fs::write(dir.path().join("scene.toml"), SCENE).unwrap();
        std::fs::write(dir.path().join("config.toml"), CONFIG).unwrap();
        Fixture { dir }
    }

    fn path(&self, name: &str) -> PathBuf {
        self.dir.path().join(name)
    }

    fn run(&self, args: &[&str]) -> Output {
        let mut cmd = Command::new(env!("CARGO_BIN_EXE_semgrasp"));
        cmd.current_dir(self.dir.path()).env("RUST_LOG", "warn");
        cmd.args(["--config", "config.toml"]).args(args);
        cmd.output().unwrap()
    }

    fn ok(&self, args: &[&str]) {
        let out = self.run(args);
        assert!(
            out.status.success(),
            "{args:?}: {}",
            String::from_utf8_lossy(&out.stderr)
        );
    }
}

fn data_lines(path: &Path) -> Vec<String> {
    let text = std::fs::read_to_string(path).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("# semgrasp-records v1"));
    lines.map(str::to_string).collect()
}

#[test]
fn full_pipeline_runs_stage_by_stage() {
    let f = Fixture::new();
    f.ok(&[
        "regions",
        "--scene",
        "scene.toml",
        "--oracle",
        "--out",
        "regions",
    ]);
    assert!(f.path("regions/object0_top.region").exists());
    f.ok(&[
        "synth",
        "--scene",
        "scene.toml",
        "--regions",
        "regions",
        "--count",
        "6",
        "--out",
        "cand.jsonl",
    ]);
    assert_eq!(data_lines(&f.path("cand.jsonl")).len(), 6);
    f.ok(&[
        "eval",
        "--scene",
        "scene.toml",
        "--candidates",
        "cand.jsonl",
        "--task",
        "shake",
        "--out",
        "eval.jsonl",
    ]);
    let evaluated = data_lines(&f.path("eval.jsonl"));
    assert_eq!(evaluated.len(), 6);
    assert!(evaluated
        .iter()
        .all(|l| l.contains("\"d\":5") && l.contains("\"task\":\"shake\"")));
    f.ok(&[
        "dataset",
        "--records",
        "eval.jsonl",
        "--threshold",
        "0",
        "--out",
        "data.jsonl",
    ]);
    f.ok(&[
        "bps",
        "--scene",
        "scene.toml",
        "--records",
        "data.jsonl",
        "--out",
        "bps.jsonl",
    ]);
    assert!(data_lines(&f.path("bps.jsonl"))
        .iter()
        .all(|l| l.contains("\"bps\":[")));
    f.ok(&["train", "--dataset", "bps.jsonl", "--out", "model.ckpt"]);
    assert!(f.path("model.ckpt").exists());
    assert_eq!(
        std::fs::read_to_string(f.path("model.loss.csv"))
            .unwrap()
            .lines()
            .count(),
        4
    );
    f.ok(&[
        "sample",
        "--checkpoint",
        "model.ckpt",
        "--scene",
        "scene.toml",
        "-n",
        "5",
        "--out",
        "sampled.jsonl",
    ]);
    assert_eq!(data_lines(&f.path("sampled.jsonl")).len(), 5);
    f.ok(&[
        "export",
        "--scene",
        "scene.toml",
        "--records",
        "sampled.jsonl",
        "--out",
        "meshes",
    ]);
    assert_eq!(std::fs::read_dir(f.path("meshes")).unwrap().count(), 5);
}

#[test]
fn zero_count_is_an_empty_success() {
    let f = Fixture::new();
    f.ok(&[
        "regions",
        "--scene",
        "scene.toml",
        "--oracle",
        "--out",
        "regions",
    ]);
    f.ok(&[
        "synth",
        "--scene",
        "scene.toml",
        "--regions",
        "regions",
        "--count",
        "0",
        "--out",
        "cand.jsonl",
    ]);
    assert!(data_lines(&f.path("cand.jsonl")).is_empty());
}

#[test]
fn worker_count_does_not_change_outputs() {
    let f = Fixture::new();
    f.ok(&[
        "regions",
        "--scene",
        "scene.toml",
        "--oracle",
        "--out",
        "regions",
    ]);
    for jobs in ["1", "8"] {
        f.ok(&[
            "--jobs",
            jobs,
            "synth",
            "--scene",
            "scene.toml",
            "--regions",
            "regions",
            "--count",
            "4",
            "--out",
            &format!("cand{jobs}.jsonl"),
        ]);
        f.ok(&[
            "--jobs",
            jobs,
            "eval",
            "--scene",
            "scene.toml",
            "--candidates",
            &format!("cand{jobs}.jsonl"),
            "--out",
            &format!("eval{jobs}.jsonl"),
        ]);
    }
    let read = |n: &str| std::fs::read(f.path(n)).unwrap();
    assert_eq!(read("cand1.jsonl"), read("cand8.jsonl"));
    assert_eq!(read("eval1.jsonl"), read("eval8.jsonl"));
}

#[test]
fn seed_flag_changes_the_run() {
    let f = Fixture::new();
    f.ok(&[
        "regions",
        "--scene",
        "scene.toml",
        "--oracle",
        "--out",
        "regions",
    ]);
    f.ok(&[
        "synth",
        "--scene",
        "scene.toml",
        "--regions",
        "regions",
        "--count",
        "2",
        "--out",
        "a.jsonl",
    ]);
    f.ok(&[
        "--seed",
        "6",
        "synth",
        "--scene",
        "scene.toml",
        "--regions",
        "regions",
        "--count",
        "2",
        "--out",
        "b.jsonl",
    ]);
    assert!(data_lines(&f.path("a.jsonl"))[0].contains("\"master_seed\":5"));
    assert!(data_lines(&f.path("b.jsonl"))[0].contains("\"master_seed\":6"));
}

#[test]
fn exit_codes_follow_the_error_kind() {
    let f = Fixture::new();
    // Validation: unknown config key.
    std::fs::write(f.path("bad.toml"), "[eval]\nmuu = 1\n").unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_semgrasp"))
        .current_dir(f.dir.path())
        .args([
            "--config",
            "bad.toml",
            "regions",
            "--scene",
            "scene.toml",
            "--oracle",
            "--out",
            "r",
        ])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));

    // Empty: the planted region covers no face and no view is corrupted,
    // so nothing votes.
    std::fs::write(
        f.path("scene.toml"),
        SCENE.replace("min = [-1.0, -1.0, 0.0]", "min = [5.0, 5.0, 5.0]"),
    )
    .unwrap();
    std::fs::write(
        f.path("config.toml"),
        CONFIG.replace("image_size = 64", "image_size = 64\noracle_noise = 0.0"),
    )
    .unwrap();
    assert_eq!(
        f.run(&["regions", "--scene", "scene.toml", "--oracle", "--out", "r"])
            .status
            .code(),
        Some(4)
    );
    std::fs::write(f.path("config.toml"), CONFIG).unwrap();

    // Degenerate: a flat region has no volume to seed grasps on.
    std::fs::write(f.path("scene.toml"), SCENE).unwrap();
    std::fs::create_dir_all(f.path("flat")).unwrap();
    std::fs::write(
        f.path("flat/object0_top.region"),
        "# semgrasp-region v1\ntop\n0\n",
    )
    .unwrap();
    let out = f.run(&[
        "synth",
        "--scene",
        "scene.toml",
        "--regions",
        "flat",
        "--count",
        "2",
        "--out",
        "c.jsonl",
    ]);
    assert_eq!(
        out.status.code(),
        Some(3),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );

    // Missing input file.
    assert_eq!(
        f.run(&["dataset", "--records", "nope.jsonl", "--out", "d.jsonl"])
            .status
            .code(),
        Some(2)
    );
    // Masks are required without --oracle.
    assert_eq!(
        f.run(&["regions", "--scene", "scene.toml", "--out", "r"])
            .status
            .code(),
        Some(2)
    );
}
