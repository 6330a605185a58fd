use std::f64::consts::{FRAC_PI_2, FRAC_PI_4};
use std::path::{Path, PathBuf};
use std::process::Command;

use nlgame::{chsh_game, LayerKind, MeasurementLayer, ReferenceState, Strategy};
use nlgame_cli::files::{export_qasm, StrategyFile};
use proptest::strategy::Strategy as _;

fn root() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../..")
}

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_nlgame"))
}

fn run_ok(args: &[&str]) -> String {
    let out = bin().args(args).output().unwrap();
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

fn validate(schema: &str, text: &str) {
    let mut schema: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(root().join("schemas").join(schema)).unwrap()).unwrap();
    // Relative ids need a retrieval URI, which an in-memory schema lacks.
    schema.as_object_mut().unwrap().remove("$id");
    let doc: serde_json::Value = serde_json::from_str(text).unwrap();
    let compiled = jsonschema::JSONSchema::compile(&schema).unwrap();
    if let Err(errors) = compiled.validate(&doc) {
        let msgs: Vec<String> = errors.map(|e| format!("{e} at {}", e.instance_path)).collect();
        panic!("schema {schema}: {msgs:?}");
    };
}

fn chsh_optimal() -> Strategy {
    let mut layer = MeasurementLayer::new(LayerKind::Ry, 2, 2, 1).unwrap();
    layer.set_phi(&[0.0, -FRAC_PI_2, FRAC_PI_4, -FRAC_PI_4]).unwrap();
    Strategy { reference: ReferenceState::AllZero, ansatz: vec![("YX".parse().unwrap(), FRAC_PI_4)], layer }
}

#[test]
fn strategy_file_round_trips_bit_exactly() {
    let mut s = chsh_optimal();
    let awkward = [0.1, 1.0 / 3.0, -0.0, 5e-324, 1.7976931348623157e308, std::f64::consts::PI * 1e-17];
    s.layer.phi_mut().copy_from_slice(&awkward[..4]);
    s.ansatz.push(("ZZ".parse().unwrap(), awkward[4]));
    s.ansatz.push(("XI".parse().unwrap(), awkward[5]));
    let file = StrategyFile::new(&chsh_game(), None, &s).unwrap();
    let text = file.to_json().unwrap();
    let back: StrategyFile = serde_json::from_str(&text).unwrap();
    let (_, s2) = back.resolve().unwrap();
    for (a, b) in s.layer.phi().iter().zip(s2.layer.phi()) {
        assert_eq!(a.to_bits(), b.to_bits());
    }
    for ((p, a), (q, b)) in s.ansatz.iter().zip(&s2.ansatz) {
        assert_eq!(p, q);
        assert_eq!(a.to_bits(), b.to_bits());
    }
    assert_eq!(back.to_json().unwrap(), text);
}

proptest::proptest! {
    #[test]
    fn any_finite_angles_round_trip(
        phi in proptest::collection::vec(proptest::num::f64::NORMAL | proptest::num::f64::SUBNORMAL | proptest::num::f64::ZERO, 4),
        theta in proptest::num::f64::ANY.prop_filter("finite", |t| t.is_finite()),
    ) {
        let mut s = chsh_optimal();
        s.layer.set_phi(&phi).unwrap();
        s.ansatz[0].1 = theta;
        let text = StrategyFile::new(&chsh_game(), None, &s).unwrap().to_json().unwrap();
        let (_, back) = serde_json::from_str::<StrategyFile>(&text).unwrap().resolve().unwrap();
        let bits = |v: &[f64]| v.iter().map(|x| x.to_bits()).collect::<Vec<_>>();
        proptest::prop_assert_eq!(bits(back.layer.phi()), bits(&phi));
        proptest::prop_assert_eq!(back.ansatz[0].1.to_bits(), theta.to_bits());
    }
}

#[test]
fn shipped_g14_strategy_loads_and_round_trips() {
    let path = root().join("data/g14_strategy.json");
    let file = StrategyFile::load(&path).unwrap();
    assert_eq!(file.layer.shape, [1, 14, 2, 4]);
    assert!(file.layer.conjugate);
    let (game, strategy) = file.resolve().unwrap();
    assert_eq!(game.questions().len(), 88);
    let again = StrategyFile::new(&game, Some("g14.txt".into()), &strategy).unwrap();
    assert_eq!(again, file);
    validate("strategy.schema.json", &std::fs::read_to_string(path).unwrap());
}

#[test]
fn shape_mismatch_is_rejected() {
    let mut file = StrategyFile::new(&chsh_game(), None, &chsh_optimal()).unwrap();
    file.layer.phi.push(0.0);
    assert!(file.resolve().unwrap_err().to_string().contains("shape"));
    let mut file = StrategyFile::new(&chsh_game(), None, &chsh_optimal()).unwrap();
    file.layer.shape = [1, 4, 1, 1];
    assert!(file.resolve().is_err());
    let mut file = StrategyFile::new(&chsh_game(), None, &chsh_optimal()).unwrap();
    file.ansatz[0].pauli = "XYZ".parse().unwrap();
    assert!(file.resolve().is_err());
}

#[test]
fn chsh_circuit_has_one_entangling_block() {
    let qasm = export_qasm(&chsh_game(), &chsh_optimal(), 0).unwrap();
    let lines: Vec<&str> = qasm.lines().collect();
    assert_eq!(lines[0], "OPENQASM 2.0;");
    assert_eq!(lines.iter().filter(|l| l.starts_with("cx ")).count(), 2);
    assert_eq!(lines.iter().filter(|l| l.starts_with("ry(")).count(), 2);
    assert_eq!(lines.iter().filter(|l| l.starts_with("measure ")).count(), 2);

    let bare = Strategy { ansatz: vec![], ..chsh_optimal() };
    let qasm = export_qasm(&chsh_game(), &bare, 3).unwrap();
    let gates: Vec<&str> = qasm.lines().skip(5).collect();
    assert_eq!(gates, ["ry(-1.5707963267948966) q[0];", "ry(-0.7853981633974483) q[1];", "measure q[0] -> c[0];", "measure q[1] -> c[1];"]);
}

#[test]
fn solve_eval_export_pipeline() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("chsh");
    let summary = run_ok(&["solve", "chsh", "--trials", "2", "--seed", "7", "--out", out.to_str().unwrap()]);
    validate("solve-summary.schema.json", &summary);
    let v: serde_json::Value = serde_json::from_str(&summary).unwrap();
    let ineq = v["best"]["inequality_value"].as_f64().unwrap();
    assert!((ineq - 2.0 * std::f64::consts::SQRT_2).abs() < 1e-3);
    assert_eq!(std::fs::read_to_string(out.join("summary.json")).unwrap(), summary);

    let mut rdr = csv::Reader::from_path(out.join("trajectories.csv")).unwrap();
    assert_eq!(rdr.headers().unwrap(), vec!["trial", "iteration", "energy"]);
    assert!(rdr.records().count() >= 2);

    let strategy = out.join("strategy.json");
    let s = strategy.to_str().unwrap();
    validate("strategy.schema.json", &std::fs::read_to_string(&strategy).unwrap());
    let report = run_ok(&["eval", "--strategy", s]);
    validate("report.schema.json", &report);
    let sampled = run_ok(&["eval", "--strategy", s, "--mode", "shots", "--shots", "1024", "--seed", "3"]);
    validate("report.schema.json", &sampled);
    let rows = run_ok(&["eval", "--strategy", s, "--format", "csv"]);
    let mut rdr = csv::Reader::from_reader(rows.as_bytes());
    assert_eq!(rdr.headers().unwrap(), vec!["question", "category", "win_rate", "stderr"]);
    assert_eq!(rdr.records().count(), 4);

    let qasm_path = dir.path().join("c.qasm");
    assert_eq!(run_ok(&["export-circuit", "--strategy", s, "--question", "1,0", "--out", qasm_path.to_str().unwrap()]), "");
    assert!(std::fs::read_to_string(qasm_path).unwrap().starts_with("OPENQASM 2.0;\n"));
}

#[test]
fn commands_are_deterministic_given_seed() {
    let a = run_ok(&["solve", "nps", "-N", "3", "--trials", "3", "--seed", "11", "--format", "csv"]);
    let b = run_ok(&["solve", "nps", "-N", "3", "--trials", "3", "--seed", "11", "--format", "csv"]);
    assert_eq!(a, b);
    let g14 = root().join("data/g14_strategy.json");
    let s = g14.to_str().unwrap();
    let args = ["eval", "--strategy", s, "--mode", "noisy", "--p-err", "0.05", "--shots", "64", "--seed", "4"];
    assert_eq!(run_ok(&args), run_ok(&args));
}

#[test]
fn failures_exit_nonzero_without_output() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("report");
    let status = bin()
        .args(["eval", "--strategy", "does/not/exist.json", "--out", out.to_str().unwrap()])
        .output()
        .unwrap()
        .status;
    assert!(!status.success());
    assert!(!out.exists());

    let g14 = root().join("data/g14_strategy.json");
    let qasm = dir.path().join("q.qasm");
    let status = bin()
        .args(["export-circuit", "--strategy", g14.to_str().unwrap(), "--question", "0,99", "--out", qasm.to_str().unwrap()])
        .output()
        .unwrap()
        .status;
    assert!(!status.success());
    assert!(!qasm.exists());

    let status = bin().args(["solve", "coloring", "--colors", "3"]).output().unwrap().status;
    assert!(!status.success());
    let status = bin().args(["solve", "chsh", "--eps-phi", "-1"]).output().unwrap().status;
    assert!(!status.success());
    assert!(std::fs::read_dir(dir.path()).unwrap().next().is_none());
}

#[test]
fn classical_baselines() {
    let v: serde_json::Value = serde_json::from_str(&run_ok(&["classical", "chsh"])).unwrap();
    assert_eq!(v["value"], 0.75);
    assert_eq!(v["inequality_bound"], 2.0);

    let dir = tempfile::tempdir().unwrap();
    let k3 = dir.path().join("k3.txt");
    std::fs::write(&k3, "3 3\n0 1\n1 2\n0 2\n").unwrap();
    let text = run_ok(&["classical", "coloring", "--graph", k3.to_str().unwrap(), "--colors", "3"]);
    validate("classical.schema.json", &text);
    let v: serde_json::Value = serde_json::from_str(&text).unwrap();
    assert_eq!(v["value"], 1.0);
    assert_eq!(v["edge_rate"], 1.0);

    let g14 = root().join("data/g14.txt");
    let text = run_ok(&["classical", "coloring", "--graph", g14.to_str().unwrap(), "--colors", "4"]);
    let v: serde_json::Value = serde_json::from_str(&text).unwrap();
    assert_eq!(v["monochromatic_edges"], 1);
    assert_eq!(v["edge_rate"].as_f64().unwrap(), 36.0 / 37.0);
}

#[test]
fn sweep_csv_has_plot_columns() {
    let g14 = root().join("data/g14_strategy.json");
    let text = run_ok(&["sweep-noise", "--strategy", g14.to_str().unwrap(), "--p-err", "0,0.1", "--shots", "32"]);
    let mut rdr = csv::Reader::from_reader(text.as_bytes());
    let headers = rdr.headers().unwrap().clone();
    assert_eq!(&headers.iter().take(4).collect::<Vec<_>>(), &["p_err", "vertex_rate", "edge_rate", "stderr"]);
    let rows: Vec<csv::StringRecord> = rdr.records().map(Result::unwrap).collect();
    assert_eq!(rows.len(), 2);
    assert_eq!(&rows[0][1], "1");
    let json = run_ok(&["sweep-noise", "--strategy", g14.to_str().unwrap(), "--p-err", "0.02", "--shots", "8", "--format", "json"]);
    validate("sweep.schema.json", &json);
}
