use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tempfile::TempDir;

fn ctxrec(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ctxrec"))
        .current_dir(dir)
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn two_ratings() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("data/two-ratings.csv")
}

/// Planted-deviation data in `dir`, plus a quick-training config for it.
fn planted(dir: &Path) -> PathBuf {
    let o = ctxrec(dir, &["synth", "deviation", "--out", "."]);
    assert!(o.status.success(), "{}", stderr(&o));
    let cfg = dir.join("run.toml");
    fs::write(
        &cfg,
        "dataset = \"planted-deviation.csv\"\nmodels = [\"mf\", \"dev-global\"]\n[train]\nepochs = 30\n",
    )
    .unwrap();
    cfg
}

fn ndcg_means(csv: &str) -> Vec<(String, f64)> {
    csv.lines()
        .filter_map(|l| {
            let f: Vec<&str> = l.split(',').collect();
            (f[1] == "mean" && f[2] == "ndcg@10").then(|| (f[0].to_string(), f[3].parse().unwrap()))
        })
        .collect()
}

#[test]
fn inspect_two_rating_file() {
    let tmp = TempDir::new().unwrap();
    let o = ctxrec(tmp.path(), &["inspect", two_ratings().to_str().unwrap()]);
    assert!(o.status.success());
    let s = stdout(&o);
    for line in ["users        1", "items        1", "ratings      2", "dimensions   3"] {
        assert!(s.contains(line), "{s}");
    }
}

#[test]
fn parse_errors_exit_one_with_row() {
    let tmp = TempDir::new().unwrap();
    fs::write(tmp.path().join("bad.csv"), "user,item,rating,Time\nu,t,4,x\nu,t,nine,y\n").unwrap();
    let o = ctxrec(tmp.path(), &["inspect", "bad.csv"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("line 3"), "{}", stderr(&o));

    let o = ctxrec(tmp.path(), &["inspect", "missing.csv"]);
    assert_eq!(o.status.code(), Some(1));
    let o = ctxrec(tmp.path(), &["frobnicate"]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn unknown_model_fails_before_training() {
    let tmp = TempDir::new().unwrap();
    let cfg = planted(tmp.path());
    let o = ctxrec(tmp.path(), &["eval", "--config", cfg.to_str().unwrap(), "--model", "mf", "--model", "svd"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("svd"));
    assert!(!tmp.path().join("out").exists());
}

#[test]
fn eval_is_reproducible_and_job_invariant() {
    let tmp = TempDir::new().unwrap();
    let cfg = planted(tmp.path());
    let cfg = cfg.to_str().unwrap();
    for (out, jobs) in [("a", "1"), ("b", "1"), ("c", "3")] {
        let o = ctxrec(tmp.path(), &["eval", "--config", cfg, "--out", out, "--jobs", jobs]);
        assert!(o.status.success(), "{}", stderr(&o));
    }
    let read = |d: &str| fs::read(tmp.path().join(d).join("eval.csv")).unwrap();
    assert_eq!(read("a"), read("b"));
    assert_eq!(read("a"), read("c"));

    let csv = String::from_utf8(read("a")).unwrap();
    assert_eq!(csv.lines().next(), Some("model,fold,metric,value"));
    let means = ndcg_means(&csv);
    assert_eq!(means.len(), 2);
    assert_eq!(means[0].0, "mf");
    assert!(means[1].1 > means[0].1, "{means:?}");
}

#[test]
fn seed_flag_changes_folds() {
    let tmp = TempDir::new().unwrap();
    let cfg = planted(tmp.path());
    let cfg = cfg.to_str().unwrap();
    ctxrec(tmp.path(), &["eval", "--config", cfg, "--out", "a", "--model", "mf"]);
    ctxrec(tmp.path(), &["eval", "--config", cfg, "--out", "b", "--model", "mf", "--seed", "1"]);
    let read = |d: &str| fs::read(tmp.path().join(d).join("eval.csv")).unwrap();
    assert_ne!(read("a"), read("b"));
}

#[test]
fn degenerate_folds_are_flagged() {
    let tmp = TempDir::new().unwrap();
    fs::write(tmp.path().join("cv.toml"), format!("dataset = {:?}\nmodels = [\"mf\"]\n[cv]\nk = 2\n", two_ratings())).unwrap();
    let o = ctxrec(tmp.path(), &["eval", "--config", "cv.toml"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let csv = fs::read_to_string(tmp.path().join("out/eval.csv")).unwrap();
    assert!(csv.contains("mf,1,skipped,1") || csv.contains("mf,2,skipped,1"), "{csv}");
    assert!(stdout(&o).contains("skipped"));
}

#[test]
fn config_paths_resolve_against_config_dir() {
    let tmp = TempDir::new().unwrap();
    let nested = tmp.path().join("exp");
    fs::create_dir(&nested).unwrap();
    planted(&nested);
    fs::write(
        nested.join("run.toml"),
        "dataset = \"planted-deviation.csv\"\nout = \"results\"\nmodels = [\"mf\"]\n[train]\nepochs = 5\n",
    )
    .unwrap();
    let o = ctxrec(tmp.path(), &["eval", "--config", "exp/run.toml"]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(nested.join("results/eval.csv").is_file());
}

#[test]
fn bad_config_exits_one() {
    let tmp = TempDir::new().unwrap();
    fs::write(tmp.path().join("c.toml"), "modles = [\"mf\"]\n").unwrap();
    let o = ctxrec(tmp.path(), &["eval", "--config", "c.toml"]);
    assert_eq!(o.status.code(), Some(1));
    let o = ctxrec(tmp.path(), &["eval", "--config", "absent.toml"]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn unwritable_output_exits_two() {
    let tmp = TempDir::new().unwrap();
    let cfg = planted(tmp.path());
    fs::write(tmp.path().join("blocker"), "").unwrap();
    let o = ctxrec(tmp.path(), &["eval", "--config", cfg.to_str().unwrap(), "--model", "mf", "--out", "blocker/x"]);
    assert_eq!(o.status.code(), Some(2), "{}", stderr(&o));
}

#[test]
fn explain_argument_errors() {
    let tmp = TempDir::new().unwrap();
    let cfg = planted(tmp.path());
    let cfg = cfg.to_str().unwrap();
    let o = ctxrec(tmp.path(), &["explain", "--config", cfg, "--target", "d0=c1", "-k", "0"]);
    assert_eq!(o.status.code(), Some(1));

    let o = ctxrec(tmp.path(), &["explain", "--config", cfg, "--target", "d0=balmy"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("d0=balmy"), "{}", stderr(&o));

    let o = ctxrec(tmp.path(), &["explain", "--config", cfg]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn explain_sections_follow_model_order() {
    let tmp = TempDir::new().unwrap();
    let cfg = planted(tmp.path());
    let args = |first: &'static str, second: &'static str| {
        vec!["explain", "--config", cfg.to_str().unwrap(), "--target", "d0=c1", "--model", first, "--model", second]
    };
    let o = ctxrec(tmp.path(), &args("sim-mcs", "cp"));
    assert!(o.status.success(), "{}", stderr(&o));
    let s = stdout(&o);
    let (mcs, cp) = (s.find("sim-mcs:").unwrap(), s.find("cp:").unwrap());
    assert!(mcs < cp);

    let csv = fs::read_to_string(tmp.path().join("out/similar_contexts.csv")).unwrap();
    let rows: Vec<&str> = csv.lines().collect();
    assert_eq!(rows[0], "model,target,rank,context,similarity,support");
    assert_eq!(rows.len(), 1 + 10);
    assert!(rows[1..6].iter().all(|r| r.starts_with("sim-mcs,d0: c1,")));
    assert!(rows[6..].iter().all(|r| r.starts_with("cp,d0: c1,")));

    let o = ctxrec(tmp.path(), &args("dev-global", "mf"));
    assert!(o.status.success());
    let dev = fs::read_to_string(tmp.path().join("out/deviations-dev-global.csv")).unwrap();
    assert!(dev.starts_with("dimension,condition,entity,deviation,support\n"));
    assert!(stdout(&o).contains("mf: no contextual structure"));
}

#[test]
fn saved_models_explain_like_fresh_ones() {
    let tmp = TempDir::new().unwrap();
    let cfg = planted(tmp.path());
    let cfg = cfg.to_str().unwrap();
    let o = ctxrec(tmp.path(), &["train", "--config", cfg, "--model", "sim-lcs", "--out", "models"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let model = tmp.path().join("models/sim-lcs.model");
    assert!(fs::read_to_string(&model).unwrap().starts_with("ctxrec-model 1\nmodel = sim-lcs\n"));

    let fresh = ctxrec(tmp.path(), &["explain", "--config", cfg, "--model", "sim-lcs", "--target", "d1=c2", "--out", "a"]);
    let loaded = ctxrec(
        tmp.path(),
        &["explain", "--config", cfg, "--load", "models/sim-lcs.model", "--target", "d1=c2", "--out", "b"],
    );
    assert!(fresh.status.success() && loaded.status.success(), "{}", stderr(&loaded));
    let read = |d: &str| fs::read(tmp.path().join(d).join("similar_contexts.csv")).unwrap();
    assert_eq!(read("a"), read("b"));
}

#[test]
fn synth_is_seeded() {
    let tmp = TempDir::new().unwrap();
    for (out, seed) in [("a", "3"), ("b", "3"), ("c", "4")] {
        let o = ctxrec(tmp.path(), &["synth", "similarity", "--seed", seed, "--out", out]);
        assert!(o.status.success());
    }
    let read = |d: &str, f: &str| fs::read(tmp.path().join(d).join(f)).unwrap();
    assert_eq!(read("a", "planted-similarity.csv"), read("b", "planted-similarity.csv"));
    assert_ne!(read("a", "planted-similarity.csv"), read("c", "planted-similarity.csv"));
    let truth = String::from_utf8(read("a", "planted-similarity-truth.csv")).unwrap();
    assert!(truth.starts_with("dimension,condition,similarity_to_na\n"));

    let o = ctxrec(tmp.path(), &["synth", "cp", "--out", "cp"]);
    assert!(o.status.success());
    assert!(tmp.path().join("cp/planted-cp-truth.model").is_file());
    let o = ctxrec(tmp.path(), &["inspect", "cp/planted-cp.csv"]);
    assert!(stdout(&o).contains("ratings      4800"), "{}", stdout(&o));
}
