use std::fs;
use std::path::Path;
use std::process::{Command, Output};

const TWO_SCALES: &str = r#"{"dimension": 1, "atoms": [
  {"id": "a1", "weight": 0.5, "points": [{"x": [-1], "w": 0.5}, {"x": [1], "w": 0.5}]},
  {"id": "a2", "weight": 0.5, "points": [{"x": [-2], "w": 0.5}, {"x": [2], "w": 0.5}]}
]}"#;

fn bin(args: &[&str], threads: Option<&str>) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_indep-decomp"));
    cmd.args(args);
    if let Some(t) = threads {
        cmd.env("INDEP_DECOMP_THREADS", t);
    }
    cmd.output().unwrap()
}

fn run(args: &[&str]) -> Output {
    bin(args, None)
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    fs::write(&p, text).unwrap();
    p.to_str().unwrap().to_string()
}

#[test]
fn gen_reproduces_two_scales_golden() {
    let o = run(&["gen", "--kind", "scaled-sign", "--dim", "1", "--atoms", "2", "--points", "2"]);
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(stdout(&o), include_str!("../../core/tests/data/two_scales.json"));
}

#[test]
fn gen_rejects_bad_input() {
    assert_eq!(run(&["gen", "--kind", "nope", "--dim", "1", "--atoms", "1", "--points", "1"]).status.code(), Some(2));
    assert_eq!(run(&["gen", "--kind", "cross", "--dim", "0", "--atoms", "1", "--points", "1"]).status.code(), Some(2));
}

#[test]
fn ot_between_measure_files() {
    let dir = tempfile::tempdir().unwrap();
    let mu = write(dir.path(), "mu.json", r#"{"dimension": 1, "points": [{"x": [0], "w": 0.5}, {"x": [1], "w": 0.5}]}"#);
    let nu = write(dir.path(), "nu.json", r#"{"dimension": 1, "points": [{"x": [2], "w": 0.5}, {"x": [3], "w": 0.5}]}"#);
    let o = run(&["ot", "--mu", &mu, "--nu", &nu]);
    assert_eq!(o.status.code(), Some(0));
    let out = stdout(&o);
    assert!(out.contains("\"cost\": 4,"), "{out}");
    assert!(out.contains("[0, 0, 0.5]") && out.contains("[1, 1, 0.5]"), "{out}");
}

#[test]
fn barycenter_of_two_scales() {
    let dir = tempfile::tempdir().unwrap();
    let input = write(dir.path(), "two_scales.json", TWO_SCALES);
    let o = run(&["barycenter", &input]);
    assert_eq!(o.status.code(), Some(0));
    let out = stdout(&o);
    assert!(out.contains("\"objective\": 0.25"), "{out}");
    assert!(out.contains("\"x\": [-1.5]") && out.contains("\"x\": [1.5]"), "{out}");
    let free = run(&["barycenter", &input, "--support-size", "2", "--seed", "3"]);
    assert_eq!(free.status.code(), Some(0));
    assert!(stdout(&free).contains("\"objective\": 0.25"));
}

#[test]
fn approx_emits_statistics_and_cells() {
    let dir = tempfile::tempdir().unwrap();
    let input = write(dir.path(), "two_scales.json", TWO_SCALES);
    let plain = stdout(&run(&["approx", &input]));
    assert!(plain.contains("\"normYSq\": 2.25") && plain.contains("\"normResidualSq\": 0.25"), "{plain}");
    assert!(!plain.contains("\"cells\""));
    let cells = stdout(&run(&["approx", &input, "--emit-cells"]));
    assert!(cells.contains("\"cells\""));
}

#[test]
fn approx_rejects_uncentered_input() {
    let dir = tempfile::tempdir().unwrap();
    let input = write(
        dir.path(),
        "bad.json",
        r#"{"dimension": 1, "atoms": [{"id": "a", "weight": 1, "points": [{"x": [1], "w": 1}]}]}"#,
    );
    let o = run(&["approx", &input]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("not centered"));
}

#[test]
fn malformed_and_missing_files_are_input_errors() {
    let dir = tempfile::tempdir().unwrap();
    let bad = write(dir.path(), "bad.json", r#"{"dimension": 2, "atoms": [{"id": "a", "weight": 1, "points": [{"x": [1, 2, 3], "w": 1}]}]}"#);
    for sub in ["barycenter", "approx", "verify"] {
        assert_eq!(run(&[sub, &bad]).status.code(), Some(2), "{sub}");
        assert_eq!(run(&[sub, "/nonexistent/file.json"]).status.code(), Some(2), "{sub}");
    }
    let csv = dir.path().join("out.csv");
    assert_eq!(run(&["decompose", &bad, "--csv", csv.to_str().unwrap()]).status.code(), Some(2));
}

#[test]
fn decompose_writes_report_and_csv() {
    let dir = tempfile::tempdir().unwrap();
    let input = write(dir.path(), "two_scales.json", TWO_SCALES);
    let csv = dir.path().join("conv.csv");
    let o = run(&["decompose", &input, "--csv", csv.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).contains("\"converged\": true"));
    assert_eq!(
        fs::read_to_string(&csv).unwrap(),
        "n,normXnSq,normYnSq,cumSumYsq,telescopeSlack\n1,2.5,2.25,2.25,0\n2,0.25,0.25,2.5,0\n"
    );
    let truncated = run(&["decompose", &input, "--max-terms", "1", "--csv", csv.to_str().unwrap()]);
    assert_eq!(truncated.status.code(), Some(0));
    assert!(stdout(&truncated).contains("\"converged\": false"));
}

#[test]
fn decompose_is_independent_of_thread_count() {
    let dir = tempfile::tempdir().unwrap();
    let instance = stdout(&run(&["gen", "--kind", "random-uniform", "--dim", "1", "--atoms", "4", "--points", "5", "--seed", "7"]));
    let input = write(dir.path(), "inst.json", &instance);
    let mut outputs = Vec::new();
    for threads in ["1", "8", "0"] {
        let csv = dir.path().join(format!("conv{threads}.csv"));
        let o = bin(&["decompose", &input, "--csv", csv.to_str().unwrap()], Some(threads));
        assert_eq!(o.status.code(), Some(0));
        outputs.push((o.stdout, fs::read(&csv).unwrap()));
    }
    assert!(outputs.windows(2).all(|w| w[0] == w[1]));
}

#[test]
fn bad_thread_setting_is_an_input_error() {
    let o = bin(&["gen", "--kind", "cross", "--dim", "2", "--atoms", "2", "--points", "2"], Some("many"));
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn verify_passes_on_two_scales_and_prints_table() {
    let dir = tempfile::tempdir().unwrap();
    let input = write(dir.path(), "two_scales.json", TWO_SCALES);
    let o = run(&["verify", &input, "--full"]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let out = stdout(&o);
    assert!(out.contains("\"allPassed\": true"));
    assert!(out.contains("\"tolerances\""));
    let table = String::from_utf8_lossy(&o.stderr);
    assert!(table.contains("lowerBoundHalf2m") && table.contains("telescope"));
}

#[test]
fn verify_tags_dimension_two_checks() {
    let dir = tempfile::tempdir().unwrap();
    let instance = stdout(&run(&["gen", "--kind", "cross", "--dim", "2", "--atoms", "2", "--points", "2"]));
    let input = write(dir.path(), "cross.json", &instance);
    let o = run(&["verify", &input]);
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).contains("global-optimum-required"));
}
