use std::path::Path;
use std::process::{Command, Output};

use netlin::harness::output::csv_string;
use netlin::harness::{run_experiment, ExperimentConfig, ProcessChoice};
use netlin::problem::{
    classify_solutions, load_problem, parse_sizes, partition_problem, SolutionKind,
};

fn netlin(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_netlin"))
        .args(args)
        .current_dir(dir)
        .env("NETLIN_WORKERS", "2")
        .output()
        .unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn field<'a>(text: &'a str, key: &str) -> &'a str {
    text.lines()
        .find_map(|l| l.strip_prefix(&format!("{key} = ")))
        .unwrap_or_else(|| panic!("no {key} in {text}"))
}

#[test]
fn gen_problem_reports_prescribed_rank() {
    let dir = tempfile::tempdir().unwrap();
    let out = netlin(&["gen-problem", "--rank", "45", "--m", "50"], dir.path());
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let text = stdout(&out);
    assert_eq!(field(&text, "rank"), "45");
    assert_eq!(field(&text, "kind"), "multiple-exact");

    // reload the written files and classify independently
    let (h, z) = load_problem(&dir.path().join("H.txt"), &dir.path().join("z.txt")).unwrap();
    let sizes = parse_sizes(field(&text, "partition")).unwrap();
    let p = partition_problem(h, z, &sizes).unwrap();
    let info = classify_solutions(&p, 1e-8).unwrap();
    assert_eq!(info.rank, 45);
    assert_eq!(info.kind, SolutionKind::MultipleExact);
}

#[test]
fn gen_graphs_writes_space_with_connected_union() {
    let dir = tempfile::tempdir().unwrap();
    let out = netlin(&["gen-graphs", "--nodes", "12", "--size", "30"], dir.path());
    assert!(out.status.success());
    let text = stdout(&out);
    assert_eq!(field(&text, "graphs"), "30");
    assert_eq!(field(&text, "union_connected"), "true");
    let gs = netlin::graphs::read_graphs(&dir.path().join("graphs.txt")).unwrap();
    assert_eq!(gs.len(), 30);
}

#[test]
fn bounds_vanish_when_every_projector_is_zero() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("H.txt"), "2 1\n1\n1\n").unwrap();
    std::fs::write(dir.path().join("z.txt"), "2\n1\n1\n").unwrap();
    std::fs::write(dir.path().join("g.txt"), "2 1\n1 2\n2 0\n").unwrap();
    std::fs::write(
        dir.path().join("exp.toml"),
        "problem = \"files\"\nmatrix = \"H.txt\"\nvector = \"z.txt\"\npartition = \"1,1\"\nprocess = \"iid-uniform\"\ngraphs = \"g.txt\"\n",
    )
    .unwrap();
    let out = netlin(&["bounds", "exp.toml"], dir.path());
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let text = stdout(&out);
    assert_eq!(field(&text, "theta1").parse::<f64>().unwrap(), 0.0);
    assert_eq!(field(&text, "theta2").parse::<f64>().unwrap(), 0.0);
}

#[test]
fn fit_reproduces_rate_of_run() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(
        dir.path().join("exp.toml"),
        "seed = 3\niterations = 300\nruns = 4\nnodes = 8\ndim = 4\nrows = \"1-3\"\nspace_size = 6\nprocess = \"markov\"\ncsv = \"out.csv\"\n",
    )
    .unwrap();
    let run = netlin(&["run", "exp.toml"], dir.path());
    assert!(
        run.status.success(),
        "{}",
        String::from_utf8_lossy(&run.stderr)
    );
    let fit = netlin(&["fit", "out.csv"], dir.path());
    assert!(
        fit.status.success(),
        "{}",
        String::from_utf8_lossy(&fit.stderr)
    );
    let (r, f) = (stdout(&run), stdout(&fit));
    assert_eq!(field(&r, "exp_rate"), field(&f, "exp_rate"));
    assert!(field(&r, "exp_rate").parse::<f64>().unwrap() < 1.0);
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(netlin(&["--help"], dir.path()).status.code(), Some(0));
    assert_eq!(netlin(&["frobnicate"], dir.path()).status.code(), Some(1));
    assert_eq!(
        netlin(&["run", "--bogus", "x"], dir.path()).status.code(),
        Some(1)
    );

    std::fs::write(dir.path().join("bad.toml"), "runs = 0\n").unwrap();
    assert_eq!(
        netlin(&["run", "bad.toml"], dir.path()).status.code(),
        Some(1)
    );

    std::fs::write(
        dir.path().join("missing.toml"),
        "problem = \"files\"\nmatrix = \"nope.txt\"\nvector = \"nope.txt\"\n",
    )
    .unwrap();
    assert_eq!(
        netlin(&["run", "missing.toml"], dir.path()).status.code(),
        Some(2)
    );

    std::fs::write(dir.path().join("flat.csv"), "t,e1\n0,0\n1,0\n2,0\n3,0\n").unwrap();
    assert_eq!(
        netlin(&["fit", "flat.csv"], dir.path()).status.code(),
        Some(2)
    );
}

#[test]
fn same_seed_same_bytes_different_seed_different_bytes() {
    let cfg = ExperimentConfig {
        seed: 21,
        iterations: 60,
        runs: 6,
        solver: "randomized-gd".into(),
        residual: 0.5,
        nodes: 6,
        dim: 3,
        rows: "2-4".into(),
        process: ProcessChoice::Temporal,
        temporal_dim: 8,
        space_size: 5,
        ..ExperimentConfig::default()
    };
    let a = csv_string(&run_experiment(&cfg).unwrap());
    let b = csv_string(&run_experiment(&cfg).unwrap());
    assert_eq!(a, b);
    let c = csv_string(&run_experiment(&ExperimentConfig { seed: 22, ..cfg }).unwrap());
    assert_ne!(a, c);
}
