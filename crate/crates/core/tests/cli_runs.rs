use std::fs;
use std::path::Path;

use vardiss::cli::{load_config, parse_config, run, TRACE_HEADER};
use vardiss::hamiltonian::{ground_energy, BenchmarkModel};

fn write(dir: &Path, name: &str, text: &str) -> std::path::PathBuf {
    let p = dir.join(name);
    fs::write(&p, text).unwrap();
    p
}

#[test]
fn single_iteration_writes_one_row() {
    let dir = tempfile::tempdir().unwrap();
    let path = write(
        dir.path(),
        "run.toml",
        "task = \"dvqe\"\nseeds = [4]\noutput_dir = \"out\"\n[dvqe]\nn = 2\nm = 1\nrounds = 1\nmodel = \"h2\"\niterations = 1\n",
    );
    let outcome = run(&load_config(&path).unwrap()).unwrap();
    assert!(outcome.success());
    let trace = fs::read_to_string(dir.path().join("out/trace_dvqe_seed4.csv")).unwrap();
    let lines: Vec<&str> = trace.lines().collect();
    assert_eq!(lines[0], TRACE_HEADER);
    assert_eq!(lines.len(), 2);
    for name in ["summary.csv", "timing.csv", "summary.json"] {
        assert!(dir.path().join("out").join(name).exists(), "{name} missing");
    }
    assert!(!dir.path().join("out/errors.json").exists());
}

#[test]
fn eig_task_matches_direct_diagonalization() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = parse_config("task = \"eig\"\n[eig]\nn = 3\nmodel = \"h2\"\n").unwrap();
    cfg.output_dir = dir.path().to_path_buf();
    let outcome = run(&cfg).unwrap();
    let (e0, _) = ground_energy(&BenchmarkModel::H2.build(3).unwrap()).unwrap();
    assert!((outcome.report.e0.unwrap() - e0).abs() < 1e-12);
    let json: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("summary.json")).unwrap()).unwrap();
    assert_eq!(json["e0"].as_f64(), outcome.report.e0);
}

#[test]
fn ancilla_scan_writes_every_trace() {
    let dir = tempfile::tempdir().unwrap();
    let text = "task = \"scan_ancilla\"\nseeds = [1, 2, 3]\n[scan]\nbase = \"recover\"\nm_values = [1, 2, 3]\n\
                [recover]\nn = 2\nrounds = 1\ntarget = \"plus\"\niterations = 2\n\
                [recover.noise_prep]\nkind = \"depolarizing\"\np = 0.1\n";
    let mut cfg = parse_config(text).unwrap();
    cfg.output_dir = dir.path().to_path_buf();
    let outcome = run(&cfg).unwrap();
    assert!(outcome.success());
    let traces = fs::read_dir(dir.path())
        .unwrap()
        .filter(|e| e.as_ref().unwrap().file_name().to_string_lossy().starts_with("trace_"))
        .count();
    assert_eq!(traces, 9);
    let summary = fs::read_to_string(dir.path().join("summary.csv")).unwrap();
    assert_eq!(summary.lines().count(), 10);
    assert!(summary.lines().any(|l| l.starts_with("m2,3,")));
    assert_eq!(outcome.report.variants.len(), 3);
}

#[test]
fn reruns_are_byte_identical() {
    let text = "task = \"dvqe\"\nseeds = [7]\n[dvqe]\nn = 2\nm = 1\nrounds = 2\nmodel = \"h1\"\niterations = 5\n\
                [dvqe.noise]\nkind = \"depolarizing\"\np = 0.05\n";
    let read = || {
        let dir = tempfile::tempdir().unwrap();
        let mut cfg = parse_config(text).unwrap();
        cfg.output_dir = dir.path().to_path_buf();
        run(&cfg).unwrap();
        (fs::read(dir.path().join("trace_dvqe_seed7.csv")).unwrap(), fs::read(dir.path().join("summary.csv")).unwrap())
    };
    assert_eq!(read(), read());
}

#[test]
fn setup_failures_go_to_the_error_manifest() {
    let dir = tempfile::tempdir().unwrap();
    write(dir.path(), "h.txt", "1.0 ZZ\n0.5 XI\n");
    let path = write(
        dir.path(),
        "run.toml",
        "task = \"dvqe\"\noutput_dir = \"out\"\n[dvqe]\nn = 3\nm = 1\nhamiltonian_file = \"h.txt\"\niterations = 1\n",
    );
    let outcome = run(&load_config(&path).unwrap()).unwrap();
    assert!(!outcome.success());
    let errors = fs::read_to_string(dir.path().join("out/errors.json")).unwrap();
    assert!(errors.contains("setup"), "{errors}");
}

#[test]
fn shipped_configs_validate() {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs");
    let mut seen = 0;
    for entry in fs::read_dir(&dir).unwrap() {
        let path = entry.unwrap().path();
        if path.extension().is_some_and(|e| e == "toml") {
            load_config(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display())).validate().unwrap();
            seen += 1;
        }
    }
    assert!(seen >= 4);
}
