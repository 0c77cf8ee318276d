use std::fs;
use std::process::{Command, Output};

fn cli(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_pfasst-mg")).args(args).output().unwrap()
}

fn code(out: &Output) -> i32 {
    out.status.code().unwrap()
}

const PFASST: &[&str] = &[
    "single-run",
    "--set", "variant=PFASST",
    "--set", "n=16",
    "--set", "steps=8",
    "--set", "ranks=4",
    "--set", "levels=2",
    "--set", "nodes=2,1",
    "--set", "stencil=2,2",
    "--set", "t_end=0.1",
];

#[test]
fn damping_writes_csv_with_footer() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("d.csv");
    let out = cli(&["damping", "--set", "points=5", "--out", path.to_str().unwrap()]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let text = fs::read_to_string(&path).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "order,lambda_dt,damping");
    assert_eq!(lines.len(), 1 + 2 * 5 + 1);
    assert!(lines.last().unwrap().starts_with("# experiment=damping "));
    assert!(lines.last().unwrap().contains("points=5"));
}

#[test]
fn output_is_deterministic_across_thread_counts() {
    let mut args = PFASST.to_vec();
    args.extend(["--set", "executor=threaded"]);
    let a = cli(&args);
    assert_eq!(code(&a), 0, "{}", String::from_utf8_lossy(&a.stderr));
    let b = cli(&args);
    args.extend(["--threads", "1"]);
    let c = cli(&args);
    assert_eq!(a.stdout, b.stdout);
    assert_eq!(a.stdout, c.stdout);
}

#[test]
fn config_file_and_overrides() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.cfg");
    fs::write(&cfg, "# one SDC step\nvariant = SDC\nn = 8\nsteps = 1\nt_end = 0.01\n").unwrap();
    let out = cli(&["single-run", "--config", cfg.to_str().unwrap(), "--set", "steps=2"]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let text = String::from_utf8(out.stdout).unwrap();
    assert_eq!(text.lines().filter(|l| !l.starts_with('#')).count(), 3);
    assert!(text.contains("steps=2"));
}

#[test]
fn trace_is_written_for_pfasst() {
    let dir = tempfile::tempdir().unwrap();
    let trace = dir.path().join("t.csv");
    let mut args = PFASST.to_vec();
    args.extend(["--trace", trace.to_str().unwrap()]);
    assert_eq!(code(&cli(&args)), 0);
    let text = fs::read_to_string(&trace).unwrap();
    assert!(text.starts_with("block,rank,iter,level,residual,vcycles\n"));
}

#[test]
fn exit_codes() {
    assert_eq!(code(&cli(&["no-such-experiment"])), 2);
    assert_eq!(code(&cli(&["damping", "--set", "bogus=1"])), 2);
    assert_eq!(code(&cli(&["damping", "--set", "steps=4"])), 2);
    assert_eq!(code(&cli(&["single-run", "--set", "n=8"])), 2);
    assert_eq!(code(&cli(&["damping", "--threads", "0"])), 2);
    assert_eq!(code(&cli(&["damping", "--trace", "x.csv"])), 2);
    assert_eq!(code(&cli(&["damping", "--config", "/nonexistent/run.cfg"])), 4);
    let unconverged = cli(&[
        "single-run", "--set", "variant=SDC", "--set", "n=8", "--set", "steps=1",
        "--set", "tol=1e-14", "--set", "max_iter=1",
    ]);
    assert_eq!(code(&unconverged), 3);
    assert!(!unconverged.stdout.is_empty());
}
