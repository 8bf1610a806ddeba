use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use adjset::fixtures;
use adjset::rules::AdjustmentCertificate;
use adjset::sem;
use sha2::{Digest, Sha256};
use tempfile::TempDir;

fn adjset() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_adjset"));
    c.env_remove("ADJSET_OUT");
    c
}

fn run(cmd: &mut Command) -> Output {
    cmd.output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

/// Writes a fixture's graph file and an `n`-row sample from its model.
fn sample_files(dir: &Path, fixture: &str, n: usize, seed: u64) -> (PathBuf, PathBuf) {
    let graph = dir.join(format!("{fixture}.graph"));
    fs::write(&graph, fixtures::text(fixture).unwrap()).unwrap();
    let model = fixtures::model(fixture).unwrap();
    let data = sem::sample(&model, n, &mut sem::rng_from_seed(seed)).unwrap();
    let csv = dir.join(format!("{fixture}-{seed}.csv"));
    data.write_csv(fs::File::create(&csv).unwrap()).unwrap();
    (csv, graph)
}

fn certificates(dir: &Path) -> Vec<AdjustmentCertificate> {
    let text = fs::read_to_string(dir.join("certificates.json")).unwrap();
    serde_json::from_str(&text).unwrap()
}

fn discover(data: &Path, knowledge: &Path, out: &Path, treatments: &[&str], extra: &[&str]) -> Output {
    run(adjset()
        .args(["discover", "--data"])
        .arg(data)
        .arg("--knowledge")
        .arg(knowledge)
        .arg("--out")
        .arg(out)
        .arg("--treatments")
        .args(treatments)
        .args(["--outcome", "Y"])
        .args(extra))
}

#[test]
fn single_treatment_discovery_recovers_the_common_cause() {
    let tmp = TempDir::new().unwrap();
    let seeds = 20;
    let mut hits = 0;
    for seed in 0..seeds {
        let (csv, graph) = sample_files(tmp.path(), "confounded_witness", 5000, seed);
        let out = tmp.path().join(format!("out{seed}"));
        let o = discover(&csv, &graph, &out, &["X"], &["--method", "entner", "--alpha", "0.05"]);
        assert!(o.status.success(), "{}", stderr(&o));
        let certs = certificates(&out);
        if certs.first().map(|c| c.adjustment_set.clone()) == Some(vec!["Z".to_string()]) {
            hits += 1;
        }
    }
    assert!(hits >= 19, "{{Z}} found for {hits} of {seeds} seeds");
}

#[test]
fn combine_finds_what_build_cannot() {
    let tmp = TempDir::new().unwrap();
    let (csv, graph) = sample_files(tmp.path(), "combine_only", 5000, 4);
    let build_out = tmp.path().join("build");
    let o = discover(&csv, &graph, &build_out, &["X1", "X2"], &["--method", "build"]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(certificates(&build_out).is_empty());
    assert!(stdout(&o).contains("adjustment sets found: 0"));

    let combine_out = tmp.path().join("combine");
    let o = discover(&csv, &graph, &combine_out, &["X1", "X2"], &["--method", "combine"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let certs = certificates(&combine_out);
    assert_eq!(certs[0].adjustment_set, ["Z"]);
}

#[test]
fn expansion_classification_and_trace() {
    let tmp = TempDir::new().unwrap();
    let (csv, graph) = sample_files(tmp.path(), "confounded_witness", 5000, 2);
    let out = tmp.path().join("out");
    let o = discover(
        &csv,
        &graph,
        &out,
        &["X"],
        &["--method", "entner", "--alpha-dep", "0.01", "--alpha-indep", "0.1", "--expand", "--classify", "--trace"],
    );
    assert!(o.status.success(), "{}", stderr(&o));
    let certs = certificates(&out);
    let sets: Vec<Vec<String>> = certs.iter().map(|c| c.adjustment_set.clone()).collect();
    assert_eq!(sets, [vec!["Z".to_string()], vec![], vec!["W".to_string(), "Z".to_string()]]);
    assert!(certs.iter().all(|c| !c.evidence.is_empty()));
    let trace = fs::read_to_string(out.join("trace.txt")).unwrap();
    assert!(trace.lines().count() > 0);
    assert!(trace.lines().all(|l| l.contains(" p=") && l.contains("verdict=")));
}

#[test]
fn manifest_records_inputs_and_command() {
    let tmp = TempDir::new().unwrap();
    let (csv, graph) = sample_files(tmp.path(), "confounded_witness", 300, 1);
    let out = tmp.path().join("out");
    let o = discover(&csv, &graph, &out, &["X"], &["--method", "entner", "--seed", "9"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let m: serde_json::Value = serde_json::from_str(&fs::read_to_string(out.join("manifest.json")).unwrap()).unwrap();
    let digest = hex::encode(Sha256::digest(fs::read(&csv).unwrap()));
    assert_eq!(m["inputs"][csv.display().to_string()], digest);
    assert_eq!(m["seed"], 9);
    assert_eq!(m["config"]["method"], "entner");
    assert_eq!(m["config"]["policy"]["kind"], "single");
    assert_eq!(m["command"][1], "discover");
    assert!(out.join("summary.txt").exists());
}

#[test]
fn discover_diagnostics() {
    let tmp = TempDir::new().unwrap();
    let (csv, graph) = sample_files(tmp.path(), "confounded_witness", 100, 1);
    let out = tmp.path().join("out");
    let trimmed = tmp.path().join("no_y.csv");
    let text = fs::read_to_string(&csv).unwrap();
    let without_y: String = text
        .lines()
        .map(|l| l.rsplit_once(',').unwrap().0.to_string() + "\n")
        .collect();
    fs::write(&trimmed, without_y).unwrap();
    let o = discover(&trimmed, &graph, &out, &["X"], &[]);
    assert!(!o.status.success());
    assert!(stderr(&o).contains("`Y`"), "{}", stderr(&o));

    let o = discover(&csv, &graph, &out, &["X"], &["--alpha", "0.05", "--alpha-dep", "0.01", "--alpha-indep", "0.1"]);
    assert!(!o.status.success());

    let o = discover(&csv, &graph, &out, &["Y"], &[]);
    assert!(!o.status.success());
    assert!(stderr(&o).contains("tier"), "{}", stderr(&o));

    let bad = tmp.path().join("bad.tiers");
    fs::write(&bad, "# knowledge\ntiers: [W Z] [X [Y]\n").unwrap();
    let o = discover(&csv, &bad, &out, &["X"], &[]);
    assert!(!o.status.success());
    assert!(stderr(&o).contains("line 2"), "{}", stderr(&o));

    let standalone = tmp.path().join("ok.tiers");
    fs::write(&standalone, "tiers: [W Z] [X] [Y]\n").unwrap();
    let o = discover(&csv, &standalone, &out, &["X"], &["--method", "entner"]);
    assert!(o.status.success(), "{}", stderr(&o));
}

fn write_config(dir: &Path, name: &str, trials: usize) -> PathBuf {
    let path = dir.join(name);
    let text = format!(
        "trials = {trials}\nsample_sizes = [300]\n\n[generator]\ncovariates = 5\nlatents = 2\nseed = 3\n\n\
         [[policies]]\nkind = \"single\"\nalpha = 0.05\n"
    );
    fs::write(&path, text).unwrap();
    path
}

#[test]
fn simulate_is_reproducible() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), "small.toml", 3);
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    for out in [&a, &b] {
        let o = run(adjset().args(["simulate", "--config"]).arg(&cfg).arg("--out").arg(out));
        assert!(o.status.success(), "{}", stderr(&o));
    }
    for file in ["records.csv", "report.csv", "report.txt"] {
        assert_eq!(fs::read(a.join(file)).unwrap(), fs::read(b.join(file)).unwrap(), "{file}");
    }
    let records = fs::read_to_string(a.join("records.csv")).unwrap();
    assert_eq!(records.lines().count(), 1 + 3 * 2);
    assert!(a.join("timings.csv").exists() && a.join("manifest.json").exists());

    let env_out = tmp.path().join("from_env");
    let o = run(adjset().args(["simulate", "--sequential", "--config"]).arg(&cfg).env("ADJSET_OUT", &env_out));
    assert!(o.status.success(), "{}", stderr(&o));
    assert_eq!(fs::read(a.join("records.csv")).unwrap(), fs::read(env_out.join("records.csv")).unwrap());
}

#[test]
fn simulate_rejects_bad_configs() {
    let tmp = TempDir::new().unwrap();
    let zero = write_config(tmp.path(), "zero.toml", 0);
    let o = run(adjset().args(["simulate", "--config"]).arg(&zero).arg("--out").arg(tmp.path()));
    assert!(!o.status.success());
    assert!(stderr(&o).contains("trials"), "{}", stderr(&o));

    let typo = tmp.path().join("typo.toml");
    fs::write(&typo, "trails = 3\n").unwrap();
    let o = run(adjset().args(["simulate", "--config"]).arg(&typo).arg("--out").arg(tmp.path()));
    assert!(!o.status.success());
    assert!(stderr(&o).contains("trails"), "{}", stderr(&o));
}

fn oracle(fixture: &str, args: &[&str]) -> String {
    let tmp = TempDir::new().unwrap();
    let graph = tmp.path().join("g.graph");
    fs::write(&graph, fixtures::text(fixture).unwrap()).unwrap();
    let o = run(adjset().args(["oracle", "--graph"]).arg(&graph).args(args));
    assert!(o.status.success(), "{}", stderr(&o));
    stdout(&o)
}

#[test]
fn oracle_queries() {
    assert_eq!(oracle("naive_union_fails", &["adjust", "--x", "X1", "X2", "--y", "Y", "--z", "Z1", "Z2"]), "false\n");
    assert_eq!(oracle("naive_union_fails", &["adjust", "--x", "X1", "X2", "--y", "Y", "--z", "Z2"]), "true\n");
    assert_eq!(oracle("confounded_witness", &["dsep", "W", "Y", "--", "Z", "X"]), "separated\n");
    let open = oracle("confounded_witness", &["dsep", "W", "Y", "--", "Z"]);
    assert!(open.starts_with("connected\nopen path: W <- U -> X -> Y"), "{open}");
    assert_eq!(
        oracle("combine_only", &["enumerate", "--x", "X1", "X2", "--y", "Y"]),
        "{}\n{W}\n{Z}\n{W, Z}\n"
    );
    assert_eq!(oracle("combine_only", &["enumerate", "--x", "X1", "X2", "--y", "Y", "--pool", "Z"]), "{}\n{Z}\n");
}

#[test]
fn oracle_reports_parse_errors_with_lines() {
    let tmp = TempDir::new().unwrap();
    let graph = tmp.path().join("bad.graph");
    fs::write(&graph, "# nodes: A B\nA -> B\nB -> \n").unwrap();
    let o = run(adjset().args(["oracle", "--graph"]).arg(&graph).args(["adjust", "--x", "A", "--y", "B"]));
    assert!(!o.status.success());
    assert!(stderr(&o).contains("line 3"), "{}", stderr(&o));
}

#[test]
fn bundled_desk_config_parses() {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs/desk.toml");
    let cfg: adjset::bench::ExperimentConfig = toml::from_str(&fs::read_to_string(path).unwrap()).unwrap();
    cfg.validate().unwrap();
    assert_eq!(cfg.trials, 40);
    assert_eq!(cfg.sample_sizes, [500, 5000]);
}
