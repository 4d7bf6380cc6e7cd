use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use disclosure_cli::checks::{run_checks, CheckOptions, Fault};
use disclosure_cli::RunConfig;
use serde_json::Value;
use tempfile::TempDir;

const BASELINE: &str = r#"
[game]
n = 2
density1 = { family = "gaussian", mean = 0.0, scale = 1.0 }
density2 = { family = "gaussian", mean = 0.0, scale = 2.0 }
prior = { family = "uniform01" }

[simulation]
rounds = 200000
seed = 3
"#;

fn symmetric() -> String {
    BASELINE.replace("scale = 2.0", "scale = 1.0")
}

fn uniform_sources() -> String {
    BASELINE
        .replace(
            "family = \"gaussian\", mean = 0.0, scale = 1.0",
            "family = \"uniform_interval\", mean = 0.0, scale = 1.0",
        )
        .replace(
            "family = \"gaussian\", mean = 0.0, scale = 2.0",
            "family = \"uniform_interval\", mean = 0.0, scale = 2.0",
        )
}

struct Workspace {
    dir: TempDir,
}

impl Workspace {
    fn new() -> Self {
        Self {
            dir: TempDir::new().unwrap(),
        }
    }

    fn config(&self, name: &str, text: &str) -> PathBuf {
        let path = self.dir.path().join(name);
        fs::write(&path, text).unwrap();
        path
    }

    fn out(&self, name: &str) -> PathBuf {
        self.dir.path().join(name)
    }
}

fn disclosure(args: &[&str], config: &Path, out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_disclosure"))
        .args(args)
        .arg("--config")
        .arg(config)
        .arg("--out")
        .arg(out)
        .output()
        .unwrap()
}

fn json(path: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

fn csv_rows(path: &Path) -> (Vec<String>, Vec<Vec<String>>) {
    let mut reader = csv::Reader::from_path(path).unwrap();
    let header = reader.headers().unwrap().iter().map(String::from).collect();
    let rows = reader
        .records()
        .map(|r| r.unwrap().iter().map(String::from).collect())
        .collect();
    (header, rows)
}

fn column(rows: &[Vec<String>], j: usize) -> Vec<f64> {
    rows.iter().map(|r| r[j].parse().unwrap()).collect()
}

fn floats(v: &Value) -> Vec<f64> {
    v.as_array()
        .unwrap()
        .iter()
        .map(|x| x.as_f64().unwrap())
        .collect()
}

#[test]
fn solve_writes_a_versioned_report() {
    let ws = Workspace::new();
    let cfg = ws.config("baseline.toml", BASELINE);
    let out = ws.out("solve");
    let run = disclosure(&["solve"], &cfg, &out);
    assert_eq!(
        run.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&run.stderr)
    );

    let text = fs::read_to_string(out.join("solve.json")).unwrap();
    let report: Value = serde_json::from_str(&text).unwrap();
    assert_eq!(report["schema"], "disclosure-report/1");
    assert_eq!(report["config"]["game"]["density2"]["scale"], 2.0);
    let w = floats(&report["equilibrium"]["weights"]);
    let t = floats(&report["equilibrium"]["thresholds"]);
    assert!((t[1] - 0.62).abs() < 0.01 && (w[0] - 0.31).abs() < 0.01 && (w[1] - 0.81).abs() < 0.01);
    assert!(report["equilibrium"]["converged"].as_bool().unwrap());
    assert!(report["wall_time_seconds"].as_f64().unwrap() >= 0.0);
    // every float carries 17 significant digits
    assert!(text.contains("\"tolerance\": 1.0000000000000000e-10"));

    // the echoed config parses back into the one that was run
    let echoed: RunConfig = serde_json::from_value(report["config"].clone()).unwrap();
    let mut original = RunConfig::parse(BASELINE).unwrap();
    original.output.dir = out.clone();
    assert_eq!(echoed, original);
}

#[test]
fn single_message_and_overrides() {
    let ws = Workspace::new();
    let cfg = ws.config("baseline.toml", BASELINE);
    let out = ws.out("one");
    let run = Command::new(env!("CARGO_BIN_EXE_disclosure"))
        .args(["solve", "--n", "1", "--quiet", "--seed", "9"])
        .arg("--config")
        .arg(&cfg)
        .arg("--out")
        .arg(&out)
        .output()
        .unwrap();
    assert_eq!(run.status.code(), Some(0));
    assert!(run.stdout.is_empty());
    let report = json(&out.join("solve.json"));
    assert_eq!(floats(&report["equilibrium"]["weights"]), vec![0.5]);
    assert_eq!(report["config"]["game"]["n"], 1);
    assert_eq!(report["config"]["solver"]["seed"], 9);
    assert_eq!(report["config"]["simulation"]["seed"], 9);
}

#[test]
fn config_errors_exit_with_two() {
    let ws = Workspace::new();
    let out = ws.out("bad");

    let cfg = ws.config("neg.toml", &BASELINE.replace("scale = 1.0", "scale = -1.0"));
    let run = disclosure(&["solve"], &cfg, &out);
    assert_eq!(run.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&run.stderr).contains("game.density1.scale"));

    let cfg = ws.config("typo.toml", &BASELINE.replace("rounds", "round"));
    let run = disclosure(&["simulate"], &cfg, &out);
    assert_eq!(run.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&run.stderr).contains("round"));

    let run = disclosure(&["solve"], &ws.out("missing.toml"), &out);
    assert_eq!(run.status.code(), Some(2));

    let run = Command::new(env!("CARGO_BIN_EXE_disclosure"))
        .arg("solve")
        .output()
        .unwrap();
    assert_eq!(run.status.code(), Some(2));
    assert!(!out.exists());
}

#[test]
fn non_convergence_exits_with_three() {
    let ws = Workspace::new();
    let text = format!("{BASELINE}\n[solver]\nmax_iterations = 2\nrestarts = 0\n")
        .replace("n = 2", "n = 3");
    let cfg = ws.config("slow.toml", &text);
    let run = disclosure(&["solve"], &cfg, &ws.out("slow"));
    assert_eq!(run.status.code(), Some(3));
    let report = json(&ws.out("slow").join("solve.json"));
    assert_eq!(report["equilibrium"]["converged"], false);
}

#[test]
fn curves_have_the_expected_shape() {
    let ws = Workspace::new();
    let cfg = ws.config("baseline.toml", BASELINE);
    let run = disclosure(&["curves"], &cfg, &ws.out("c"));
    assert_eq!(run.status.code(), Some(0));
    let (header, rows) = csv_rows(&ws.out("c").join("plots/curves.csv"));
    assert_eq!(header, ["w", "H", "G", "L_0.25", "L_0.5", "L_0.75"]);
    assert_eq!(rows.len(), 1001);
    let (w, h, g) = (column(&rows, 0), column(&rows, 1), column(&rows, 2));
    assert!(h.windows(2).all(|p| p[1] > p[0]));
    assert!(g.windows(2).all(|p| p[1] < p[0]));
    assert_eq!((h[0], g[1000]), (0.0, 0.0));
    assert_eq!((h[1000], g[0]), (4.0, 1.0));
    for (j, theta) in [(3, 0.25), (4, 0.5), (5, 0.75)] {
        let l = column(&rows, j);
        let best = (0..l.len()).min_by(|&a, &b| l[a].total_cmp(&l[b])).unwrap();
        assert!(
            (w[best] - theta).abs() <= 2e-3,
            "θ = {theta}: argmin {}",
            w[best]
        );
    }
    // twelve significant digits
    assert_eq!(rows[500][0], "5.00000000000e-1");

    let cfg = ws.config("sym.toml", &symmetric());
    assert_eq!(
        disclosure(&["curves"], &cfg, &ws.out("s")).status.code(),
        Some(0)
    );
    let (_, rows) = csv_rows(&ws.out("s").join("plots/curves.csv"));
    let (h, g) = (column(&rows, 1), column(&rows, 2));
    for i in 0..rows.len() {
        let mirrored = g[rows.len() - 1 - i];
        assert!(
            (h[i] - mirrored).abs() <= 1e-10,
            "row {i}: {} vs {mirrored}",
            h[i]
        );
    }
}

#[test]
fn simulate_is_deterministic_and_gated() {
    let ws = Workspace::new();
    let cfg = ws.config("baseline.toml", BASELINE);
    let out = ws.out("sim");
    assert_eq!(disclosure(&["simulate"], &cfg, &out).status.code(), Some(0));
    let first = fs::read(out.join("simulate.json")).unwrap();
    assert_eq!(disclosure(&["simulate"], &cfg, &out).status.code(), Some(0));
    assert_eq!(first, fs::read(out.join("simulate.json")).unwrap());

    let report = json(&out.join("simulate.json"));
    assert_eq!(report["simulation"]["n_rounds"], 200000);
    assert!(report["gate"]["passed"].as_bool().unwrap());
    let counts: u64 = report["simulation"]["per_message_count"]
        .as_array()
        .unwrap()
        .iter()
        .map(|c| c.as_u64().unwrap())
        .sum();
    assert_eq!(counts, 200000);

    // reuse a stored equilibrium
    assert_eq!(disclosure(&["solve"], &cfg, &out).status.code(), Some(0));
    let stored = out.join("solve.json");
    let run = disclosure(
        &["simulate", "--equilibrium", stored.to_str().unwrap()],
        &cfg,
        &out,
    );
    assert_eq!(run.status.code(), Some(0));
    assert_eq!(first, fs::read(out.join("simulate.json")).unwrap());

    // but not for another game
    let other = ws.config("sym.toml", &symmetric());
    let run = disclosure(
        &["simulate", "--equilibrium", stored.to_str().unwrap()],
        &other,
        &out,
    );
    assert_eq!(run.status.code(), Some(2));

    // a tiny run still produces a gated report
    let tiny = ws.config(
        "tiny.toml",
        &BASELINE.replace("rounds = 200000", "rounds = 100"),
    );
    let run = disclosure(&["simulate"], &tiny, &ws.out("tiny"));
    assert!(matches!(run.status.code(), Some(0 | 4)));
    assert_eq!(
        json(&ws.out("tiny").join("simulate.json"))["simulation"]["n_rounds"],
        100
    );
}

#[test]
fn sweep_rows_are_ordered_and_repeatable() {
    let ws = Workspace::new();
    let cfg = ws.config("baseline.toml", BASELINE);
    let run = disclosure(&["sweep", "--n-list", "1,2,3,4,2"], &cfg, &ws.out("sw"));
    assert_eq!(run.status.code(), Some(0));
    let (header, rows) = csv_rows(&ws.out("sw").join("plots/sweep.csv"));
    assert_eq!(header[..2], ["n", "planner_loss"]);
    assert_eq!(rows.len(), 5);
    assert_eq!(rows[1], rows[4]);
    let losses = column(&rows, 1);
    assert!(losses[..4].windows(2).all(|p| p[1] < p[0]), "{losses:?}");
    // the single-message row is the no-signalling loss ∫ L(½ | θ) dθ = (H(½) + G(½)) / 2
    let curves = disclosure(&["curves"], &cfg, &ws.out("sw"));
    assert_eq!(curves.status.code(), Some(0));
    let (_, c) = csv_rows(&ws.out("sw").join("plots/curves.csv"));
    let l_half = column(&c, 4)[500];
    let h_g = (column(&c, 1)[500] + column(&c, 2)[500]) / 2.0;
    assert!((losses[0] - h_g).abs() <= 1e-10 && (l_half - losses[0]).abs() <= 1e-10);

    let run = disclosure(&["sweep", "--n-list", "0"], &cfg, &ws.out("sw0"));
    assert_eq!(run.status.code(), Some(2));
}

#[test]
fn check_passes_and_can_be_broken() {
    let ws = Workspace::new();
    let cfg = ws.config("baseline.toml", BASELINE);
    let run = disclosure(&["check"], &cfg, &ws.out("ok"));
    assert_eq!(
        run.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&run.stdout)
    );
    let report = json(&ws.out("ok").join("check.json"));
    assert_eq!(report["passed"], true);
    assert_eq!(report["checks"].as_array().unwrap().len(), 9);

    let run = disclosure(
        &["check", "--inject-fault", "negate-g-prime"],
        &cfg,
        &ws.out("bad"),
    );
    assert_eq!(run.status.code(), Some(4));
    let stdout = String::from_utf8_lossy(&run.stdout);
    assert!(stdout.contains("FAIL derivative_identity"), "{stdout}");
}

#[test]
fn fault_hook_only_breaks_derivative_checks() {
    let resolved = RunConfig::parse(BASELINE).unwrap().resolve().unwrap();
    let suite = run_checks(
        &resolved.spec,
        &resolved.solver,
        CheckOptions {
            fault: Some(Fault::NegateGPrime),
        },
    );
    let failed: Vec<&str> = suite
        .checks
        .iter()
        .filter(|c| !c.passed)
        .map(|c| c.name)
        .collect();
    assert_eq!(
        failed,
        ["derivative_identity", "derivative_finite_difference"]
    );
    let identity = suite.get("derivative_identity").unwrap();
    assert!((identity.observed - 1.0).abs() < 1e-12);
}

#[test]
fn compact_support_relaxes_monotonicity() {
    let ws = Workspace::new();
    let cfg = ws.config("uniform.toml", &uniform_sources());
    let run = disclosure(&["check"], &cfg, &ws.out("u"));
    let stdout = String::from_utf8_lossy(&run.stdout);
    assert_eq!(run.status.code(), Some(0), "{stdout}");
    assert!(stdout.contains("warning: a content density has compact support"));
    let report = json(&ws.out("u").join("check.json"));
    let mono = report["checks"]
        .as_array()
        .unwrap()
        .iter()
        .find(|c| c["name"] == "kernel_monotonicity")
        .unwrap();
    assert_eq!(mono["expected"], ">= 0e0");
}

#[test]
fn shipped_configs_parse() {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs");
    let mut seen = 0;
    for entry in fs::read_dir(dir).unwrap() {
        let path = entry.unwrap().path();
        if path.extension().is_some_and(|e| e == "toml") {
            let cfg = RunConfig::load(&path).unwrap();
            cfg.resolve().unwrap();
            assert_eq!(RunConfig::parse(&cfg.to_toml()).unwrap(), cfg);
            seen += 1;
        }
    }
    assert!(seen >= 4);
}
