use std::collections::BTreeMap;
use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use tempfile::TempDir;

fn dgmm(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_dgmm"))
        .args(args)
        .current_dir(dir)
        .env("RUST_LOG", "warn")
        .output()
        .expect("spawn dgmm")
}

fn ok(dir: &Path, args: &[&str]) {
    let out = dgmm(dir, args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
}

/// Exit code and the error line on stderr.
fn fails(dir: &Path, args: &[&str]) -> (i32, String) {
    let out = dgmm(dir, args);
    assert!(!out.status.success(), "{args:?} unexpectedly succeeded");
    let stderr = String::from_utf8_lossy(&out.stderr);
    let line = stderr
        .lines()
        .find(|l| l.starts_with("error: class="))
        .unwrap_or_else(|| panic!("no error line in {stderr:?}"))
        .to_string();
    (out.status.code().unwrap(), line)
}

fn write(dir: &Path, name: &str, text: &str) {
    fs::write(dir.join(name), text).unwrap();
}

fn small_generate(k: usize, seed: u64) -> String {
    format!(
        "generate.n = 90\ngenerate.n_test = 10\ngenerate.d1 = 36\ngenerate.d2 = 60\n\
         generate.k = {k}\ngenerate.k_bar = 2\ngenerate.seed = {seed}\n"
    )
}

const SMALL_RUN: &str = "data.path = data\nmodel.k = 3\nmodel.k_bar = 2\nmodel.recog_hidden = 8\n\
                         train.max_epochs = 5\npredict.samples = 4\n";

fn snapshot_value(dir: &Path, key: &str) -> Option<String> {
    let text = fs::read_to_string(dir.join("config.txt")).unwrap();
    text.lines()
        .filter_map(|l| l.split_once('='))
        .find(|(k, _)| k.trim() == key)
        .map(|(_, v)| v.trim().to_string())
}

fn tree(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    let mut out = BTreeMap::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for e in fs::read_dir(&d).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                let rel = p.strip_prefix(dir).unwrap().display().to_string();
                out.insert(rel, fs::read(&p).unwrap());
            }
        }
    }
    out
}

#[test]
fn pipeline_on_default_synthetic_config() {
    let tmp = TempDir::new().unwrap();
    let d = tmp.path();
    ok(d, &["generate", "--out", "data"]);
    // default sizes with a short schedule so the debug build stays quick
    write(d, "run.txt", "data.path = data\ntrain.max_epochs = 2\npredict.rho = 0.25\npredict.samples = 2\n");
    ok(d, &["train", "--config", "run.txt", "--out", "model"]);
    ok(d, &["reconstruct", "--config", "run.txt", "--model", "model", "--out", "rec"]);
    let out = dgmm(d, &["evaluate", "--reconstructions", "rec", "--dataset", "data", "--out", "eval"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let printed = String::from_utf8_lossy(&out.stdout);
    assert!(printed.contains("PCC") && printed.contains("SSIM"), "{printed}");

    let metrics = fs::read_to_string(d.join("eval/metrics.csv")).unwrap();
    assert_eq!(metrics.lines().count(), 1 + 20);
    // 784 pixels is a 28x28 image, so grayscale files are written
    assert_eq!(fs::read_dir(d.join("rec/images")).unwrap().count(), 20);
    let pgm = fs::read(d.join("rec/images/row80.pgm")).unwrap();
    assert!(pgm.starts_with(b"P5\n28 28\n255\n"));
    assert_eq!(pgm.len(), b"P5\n28 28\n255\n".len() + 784);
    for dir in ["data", "model", "rec", "eval"] {
        assert!(d.join(dir).join("config.txt").exists(), "{dir}");
        assert!(d.join(dir).join("seed.txt").exists(), "{dir}");
    }
}

#[test]
fn non_square_images_are_csv_only() {
    let tmp = TempDir::new().unwrap();
    let d = tmp.path();
    write(d, "gen.txt", &small_generate(3, 4).replace("d1 = 36", "d1 = 30"));
    write(d, "run.txt", &format!("{SMALL_RUN}predict.rho = 0.5\n"));
    ok(d, &["generate", "--config", "gen.txt", "--out", "data"]);
    ok(d, &["train", "--config", "run.txt", "--out", "model"]);
    ok(d, &["reconstruct", "--config", "run.txt", "--model", "model", "--out", "rec"]);
    assert!(d.join("rec/reconstructions.csv").exists());
    assert!(!d.join("rec/images").exists());
}

#[test]
fn latent_size_mismatch_is_a_dimension_error() {
    let tmp = TempDir::new().unwrap();
    let d = tmp.path();
    write(d, "gen3.txt", &small_generate(3, 1));
    write(d, "gen5.txt", &small_generate(5, 2));
    ok(d, &["generate", "--config", "gen3.txt", "--out", "data"]);
    ok(d, &["generate", "--config", "gen5.txt", "--out", "other"]);
    write(d, "run.txt", &format!("{SMALL_RUN}predict.rho = 0.5\n"));
    ok(d, &["train", "--config", "run.txt", "--out", "model"]);

    let (code, line) = fails(
        d,
        &["reconstruct", "--config", "run.txt", "--model", "model", "--dataset", "other", "--out", "rec"],
    );
    assert_eq!(code, 3);
    assert!(line.starts_with("error: class=DimensionMismatch message="), "{line}");

    write(d, "bad.txt", "data.path = other\nmodel.k = 3\n");
    let (code, _) = fails(d, &["train", "--config", "bad.txt", "--out", "m2"]);
    assert_eq!(code, 3);
}

#[test]
fn config_errors() {
    let tmp = TempDir::new().unwrap();
    let d = tmp.path();
    write(d, "typo.txt", "generate.n = 50\ngenerate.learning_rate = 0.1\n");
    let (code, line) = fails(d, &["generate", "--config", "typo.txt", "--out", "data"]);
    assert_eq!(code, 2);
    assert!(line.starts_with("error: class=ConfigError"), "{line}");
    assert!(line.contains("generate.learning_rate"), "{line}");
    assert!(!d.join("data").exists());

    write(d, "nodata.txt", "data.path = missing\n");
    assert_eq!(fails(d, &["train", "--config", "nodata.txt", "--out", "m"]).0, 2);
    write(d, "nopath.txt", "train.lr = 0.1\n");
    assert_eq!(fails(d, &["train", "--config", "nopath.txt", "--out", "m"]).0, 2);
    assert_eq!(fails(d, &["train", "--config", "absent.txt", "--out", "m"]).0, 2);
    assert_eq!(fails(d, &["frobnicate"]).0, 2);
}

#[test]
fn io_errors() {
    let tmp = TempDir::new().unwrap();
    let d = tmp.path();
    write(d, "gen.txt", &small_generate(3, 1));
    ok(d, &["generate", "--config", "gen.txt", "--out", "data"]);
    let (code, line) = fails(d, &["evaluate", "--reconstructions", "nowhere", "--dataset", "data", "--out", "e"]);
    assert_eq!(code, 4);
    assert!(line.starts_with("error: class=IoError"), "{line}");

    fs::write(d.join("data/X.csv"), "1,2\n").unwrap();
    write(d, "run.txt", SMALL_RUN);
    assert_eq!(fails(d, &["train", "--config", "run.txt", "--out", "m"]).0, 4);
}

#[test]
fn cross_validated_rho_is_recorded() {
    let tmp = TempDir::new().unwrap();
    let d = tmp.path();
    write(d, "gen.txt", &small_generate(3, 1));
    write(d, "run.txt", &format!("{SMALL_RUN}predict.rho = cv\n"));
    ok(d, &["generate", "--config", "gen.txt", "--out", "data"]);
    ok(d, &["train", "--config", "run.txt", "--out", "model"]);
    ok(d, &["reconstruct", "--config", "run.txt", "--model", "model", "--out", "rec"]);
    let rec = d.join("rec");
    assert_eq!(snapshot_value(&rec, "predict.rho").as_deref(), Some("cv"));
    assert_eq!(snapshot_value(&rec, "predict.rho_folds").as_deref(), Some("5"));
    let rho: f64 = snapshot_value(&rec, "predict.rho_selected").unwrap().parse().unwrap();
    assert!((-8..=0).any(|e| 2f64.powi(e) == rho), "rho {rho}");
}

#[test]
fn snapshots_reproduce_outputs() {
    let tmp = TempDir::new().unwrap();
    let d = tmp.path();
    write(d, "gen.txt", &small_generate(3, 1));
    write(d, "run.txt", &format!("{SMALL_RUN}predict.rho = cv\n"));
    ok(d, &["generate", "--config", "gen.txt", "--seed", "11", "--out", "data"]);
    assert_eq!(fs::read_to_string(d.join("data/seed.txt")).unwrap().trim(), "11");
    assert_eq!(snapshot_value(&d.join("data"), "generate.seed").as_deref(), Some("11"));
    let before = tree(&d.join("data"));

    ok(d, &["train", "--config", "run.txt", "--seed", "5", "--out", "model"]);
    ok(d, &["reconstruct", "--config", "run.txt", "--model", "model", "--out", "rec"]);
    ok(d, &["evaluate", "--reconstructions", "rec", "--dataset", "data", "--out", "eval"]);
    assert_eq!(tree(&d.join("data")), before, "dataset directory was modified");

    ok(d, &["generate", "--config", "data/config.txt", "--out", "data2"]);
    let strip = |t: BTreeMap<String, Vec<u8>>| -> BTreeMap<String, Vec<u8>> {
        t.into_iter().filter(|(k, _)| k != "config.txt").collect()
    };
    assert_eq!(strip(tree(&d.join("data2"))), strip(before));

    ok(d, &["train", "--config", "model/config.txt", "--out", "model2"]);
    let (a, b) = (tree(&d.join("model")), tree(&d.join("model2")));
    assert_eq!(a.keys().collect::<Vec<_>>(), b.keys().collect::<Vec<_>>());
    for (name, bytes) in &a {
        if name == "train_log.csv" {
            // last column is wall time
            let cut = |v: &[u8]| -> Vec<String> {
                String::from_utf8_lossy(v).lines().map(|l| l.rsplit_once(',').unwrap().0.to_string()).collect()
            };
            assert_eq!(cut(bytes), cut(&b[name]));
        } else {
            assert_eq!(bytes, &b[name], "{name}");
        }
    }

    ok(d, &["reconstruct", "--config", "rec/config.txt", "--model", "model", "--out", "rec2"]);
    assert_eq!(tree(&d.join("rec")), tree(&d.join("rec2")));
    ok(d, &["evaluate", "--config", "eval/config.txt", "--reconstructions", "rec2", "--out", "eval2"]);
    assert_eq!(tree(&d.join("eval")), tree(&d.join("eval2")));
}

#[test]
fn thread_cap_does_not_change_results() {
    let tmp = TempDir::new().unwrap();
    let d = tmp.path();
    write(d, "gen.txt", &small_generate(3, 1));
    write(d, "run.txt", &format!("{SMALL_RUN}predict.rho = 0.5\n"));
    ok(d, &["generate", "--config", "gen.txt", "--out", "data"]);
    let run = |threads: &str, out: &str| {
        let status = Command::new(env!("CARGO_BIN_EXE_dgmm"))
            .args(["train", "--config", "run.txt", "--out", out])
            .current_dir(d)
            .env("DGMM_NUM_THREADS", threads)
            .output()
            .unwrap();
        assert!(status.status.success(), "{}", String::from_utf8_lossy(&status.stderr));
    };
    run("1", "m1");
    run("3", "m3");
    assert_eq!(
        fs::read(d.join("m1/train_latents.f64")).unwrap(),
        fs::read(d.join("m3/train_latents.f64")).unwrap()
    );
    let out = Command::new(env!("CARGO_BIN_EXE_dgmm"))
        .args(["train", "--config", "run.txt", "--out", "m0"])
        .current_dir(d)
        .env("DGMM_NUM_THREADS", "zero")
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
}
