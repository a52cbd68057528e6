use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use iclust::fit::FitResult;
use iclust::{adjusted_rand_index, Partition};

fn iclust(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_iclust")).args(args).output().expect("binary runs")
}

fn s(p: &Path) -> &str {
    p.to_str().expect("utf-8 path")
}

fn read_labels(p: &Path) -> Vec<usize> {
    std::fs::read_to_string(p)
        .unwrap()
        .lines()
        .map(|l| l.trim().parse().unwrap())
        .collect()
}

fn ari(a: &[usize], b: &[usize]) -> f64 {
    adjusted_rand_index(&Partition::from_labels(a.to_vec()), &Partition::from_labels(b.to_vec())).unwrap()
}

fn write(dir: &Path, name: &str, body: &str) -> PathBuf {
    let p = dir.join(name);
    std::fs::write(&p, body).unwrap();
    p
}

const SBM_RECIPE: &str = r#"{
  "model": "sbm",
  "n": 120,
  "pi": [0.5, 0.5],
  "theta": [[0.4, 0.03], [0.03, 0.4]]
}"#;

#[test]
fn simulate_fit_cut_coef_pipeline() {
    let dir = tempfile::tempdir().unwrap();
    let recipe = write(dir.path(), "recipe.json", SBM_RECIPE);
    let prefix = dir.path().join("sim");
    let out = iclust(&["simulate", s(&recipe), "--seed", "4", "--out", s(&prefix)]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let graph = dir.path().join("sim.txt");
    let truth = read_labels(&dir.path().join("sim.labels.txt"));
    assert_eq!(truth.len(), 120);

    let result = dir.path().join("fit.json");
    let tree = dir.path().join("tree.nwk");
    let out = iclust(&["fit", s(&graph), "--seed", "1", "--out", s(&result), "--newick", s(&tree)]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let summary = String::from_utf8_lossy(&out.stdout);
    assert!(summary.contains("model=sbm") && summary.contains("K=2"), "{summary}");
    assert!(std::fs::read_to_string(&tree).unwrap().trim_end().ends_with(';'));

    let fit = FitResult::from_json(&std::fs::read_to_string(&result).unwrap()).unwrap();
    assert_eq!(fit.k, 2);
    assert!(ari(&fit.labels, &truth) > 0.95);

    let cut = dir.path().join("cut.txt");
    let out = iclust(&["cut", s(&result), "--K", "1", "--out", s(&cut)]);
    assert!(out.status.success());
    assert_eq!(read_labels(&cut), vec![0; 120]);

    let out = iclust(&["coef", s(&result)]);
    assert!(out.status.success());
    let coef: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(coef["model"], "sbm");
    let theta = coef["theta"].as_array().unwrap();
    assert!(theta[0][0].as_f64().unwrap() > 0.3 && theta[0][1].as_f64().unwrap() < 0.1);
}

#[test]
fn fit_without_out_prints_the_document() {
    let dir = tempfile::tempdir().unwrap();
    let recipe = write(dir.path(), "recipe.json", SBM_RECIPE);
    let prefix = dir.path().join("g");
    assert!(iclust(&["simulate", s(&recipe), "--out", s(&prefix)]).status.success());
    let out = iclust(&["fit", s(&dir.path().join("g.txt")), "--alg", "multistart", "--nb-start", "3", "--threads", "1"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let fit = FitResult::from_json(&String::from_utf8_lossy(&out.stdout)).unwrap();
    assert_eq!(fit.config.nb_start, 3);
    assert_eq!(fit.labels.len(), 120);
}

#[test]
fn combined_manifest_exposes_each_view() {
    let dir = tempfile::tempdir().unwrap();
    let mut edges = String::new();
    for c in 0..2 {
        for a in 0..8 {
            for b in a + 1..8 {
                edges.push_str(&format!("{} {}\n", 8 * c + a, 8 * c + b));
            }
        }
    }
    write(dir.path(), "net.txt", &edges);
    let mut table = String::from("x,y\n");
    for i in 0..16 {
        let base = if i < 8 { 0.0 } else { 30.0 };
        table.push_str(&format!("{},{}\n", base + (i % 3) as f64 * 0.3, base - (i % 4) as f64 * 0.2));
    }
    write(dir.path(), "cont.csv", &table);
    let manifest = write(
        dir.path(),
        "views.json",
        r#"{"views": [{"name": "net", "path": "net.txt"}, {"name": "cont", "path": "cont.csv", "model": "diag_gmm"}]}"#,
    );
    let result = dir.path().join("fit.json");
    let out = iclust(&["fit", s(&manifest), "--seed", "2", "--out", s(&result)]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));

    let net = iclust(&["coef", s(&result), "--view", "net"]);
    assert!(net.status.success());
    let net: serde_json::Value = serde_json::from_slice(&net.stdout).unwrap();
    assert_eq!(net["model"], "sbm");
    let cont = iclust(&["coef", s(&result), "--view", "cont"]);
    let cont: serde_json::Value = serde_json::from_slice(&cont.stdout).unwrap();
    assert_eq!(cont["model"], "diag_gmm");
    let all: serde_json::Value = serde_json::from_slice(&iclust(&["coef", s(&result)]).stdout).unwrap();
    assert_eq!(all["model"], "combined");

    let missing = iclust(&["coef", s(&result), "--view", "nope"]);
    assert_eq!(missing.status.code(), Some(3));
}

#[test]
fn exit_codes_follow_error_class() {
    let dir = tempfile::tempdir().unwrap();
    // Usage error.
    assert_eq!(iclust(&["fit"]).status.code(), Some(2));
    // Missing input file.
    assert_eq!(iclust(&["fit", s(&dir.path().join("absent.txt"))]).status.code(), Some(2));
    // Malformed data.
    let bad = write(dir.path(), "bad.txt", "0 1\nfoo bar\n");
    assert_eq!(iclust(&["fit", s(&bad)]).status.code(), Some(2));
    // Invalid hyperparameter.
    let ok = write(dir.path(), "ok.txt", "0 1\n1 2\n2 0\n");
    let out = iclust(&["fit", s(&ok), "--set", "a0=-2"]);
    assert_eq!(out.status.code(), Some(3));
    assert!(!out.stderr.is_empty());
    // Model that does not fit the input.
    assert_eq!(iclust(&["fit", s(&ok), "--model", "gmm"]).status.code(), Some(3));
    // Cut outside the path.
    let result = dir.path().join("fit.json");
    assert!(iclust(&["fit", s(&ok), "--out", s(&result)]).status.success());
    assert_eq!(iclust(&["cut", s(&result), "--K", "99"]).status.code(), Some(3));
}

#[test]
fn bench_writes_csv() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("bench.csv");
    let out = iclust(&["bench", "--model", "diag_gmm", "--sizes", "2000,4000", "--repeats", "1", "--out", s(&csv)]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = std::fs::read_to_string(&csv).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("n,edges_or_cells,K,seconds"));
    assert_eq!(lines.count(), 2);
}

#[test]
fn gmm_and_lca_recipes_simulate() {
    let dir = tempfile::tempdir().unwrap();
    let gmm = write(
        dir.path(),
        "gmm.json",
        r#"{"model": "gmm", "n": 60, "pi": [0.5, 0.5], "means": [[0, 0], [20, 20]],
            "covariances": [[[1, 0], [0, 1]], [[1, 0.5], [0.5, 1]]]}"#,
    );
    let prefix = dir.path().join("g");
    assert!(iclust(&["simulate", s(&gmm), "--out", s(&prefix)]).status.success());
    let result = dir.path().join("g.json");
    let out = iclust(&["fit", s(&dir.path().join("g.csv")), "--out", s(&result)]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let fit = FitResult::from_json(&std::fs::read_to_string(&result).unwrap()).unwrap();
    assert_eq!(ari(&fit.labels, &read_labels(&dir.path().join("g.labels.txt"))), 1.0);

    let lca = write(
        dir.path(),
        "lca.json",
        r#"{"model": "lca", "n": 40, "pi": [1.0], "theta": [[[0.5, 0.5], [0.2, 0.3, 0.5]]]}"#,
    );
    let prefix = dir.path().join("c");
    assert!(iclust(&["simulate", s(&lca), "--out", s(&prefix)]).status.success());
    let out = iclust(&["fit", s(&dir.path().join("c.csv")), "--model", "lca", "--threads", "1"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));

    let broken = write(dir.path(), "broken.json", r#"{"model": "sbm", "n": 5, "pi": [0.7], "theta": [[0.1]]}"#);
    assert_eq!(iclust(&["simulate", s(&broken), "--out", s(&prefix)]).status.code(), Some(3));
}
