//! The `dfis` command sequence run in-process: generate a dataset, train,
//! bench and solve one observation.

use deep_feedback::pipeline::cli;

fn dfis(args: &[&str]) {
    println!("$ dfis {}", args.join(" "));
    let code = cli::run(std::iter::once("dfis").chain(args.iter().copied()));
    assert_eq!(code, 0, "command failed");
}

fn main() {
    let dir = tempfile::tempdir().unwrap();
    let p = |name: &str| dir.path().join(name).to_string_lossy().into_owned();
    let (data, weights, report) = (p("data"), p("weights"), p("report.csv"));

    dfis(&["generate-data", "--task", "ik", "--joints", "5", "--count", "300", "--seed", "9", "--out", &data]);
    dfis(&["train", "--task", "ik", "--data", &data, "--stages", "3", "--epochs", "10", "--out", &weights]);
    dfis(&["bench", "--task", "ik", "--data", &data, "--weights", &weights, "--mode", "regression,feedback,adam", "--max-iter", "50", "--out", &report]);
    print!("{}", std::fs::read_to_string(&report).unwrap());
    let obs = format!("{data}/obs/00299.txt");
    dfis(&["solve", "--data", &data, "--weights", &weights, "--obs", &obs, "--damping"]);
}
