use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn qcp(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_qcp"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn small_config(dir: &Path, out: &Path, extra: &str) -> PathBuf {
    let path = dir.join("exp.conf");
    let text = format!(
        "# tiny navigation run\nscenario.name = nav\nexperiment.algorithms = qcp\nexperiment.seeds = 7\n\
         experiment.output = {}\ntrain.iterations = 2\nsearch.budget = 8\n{extra}",
        out.display()
    );
    fs::write(&path, text).unwrap();
    path
}

#[test]
fn run_writes_summary_and_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let out_a = dir.path().join("a");
    let out_b = dir.path().join("b");
    let conf_a = small_config(dir.path(), &out_a, "");
    let status = qcp(&["run", "--config", conf_a.to_str().unwrap(), "--workers", "1", "--render"]);
    assert!(status.status.success(), "{}", String::from_utf8_lossy(&status.stderr));

    let summary = fs::read_to_string(out_a.join("summary.csv")).unwrap();
    assert_eq!(summary.lines().count(), 3, "header plus one row per iteration");
    assert!(out_a.join("qcp_seed7.render.txt").exists());
    assert!(out_a.join("config.txt").exists());

    let conf_b = small_config(dir.path(), &out_b, "");
    assert!(qcp(&["run", "--config", conf_b.to_str().unwrap(), "--render"]).status.success());
    for name in ["qcp_seed7.csv", "summary.csv", "qcp_seed7.render.txt"] {
        assert_eq!(
            fs::read(out_a.join(name)).unwrap(),
            fs::read(out_b.join(name)).unwrap(),
            "{name} differs between runs"
        );
    }
}

#[test]
fn trace_flag_writes_one_record_per_search_iteration() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("t");
    let conf = small_config(dir.path(), &out, "train.timesteps = 1\n");
    assert!(qcp(&["run", "--config", conf.to_str().unwrap(), "--trace"]).status.success());
    let trace = fs::read_to_string(out.join("qcp_seed7.trace.csv")).unwrap();
    // 2 iterations x 1 timestep x 3 agents x budget 8
    assert_eq!(trace.lines().count(), 1 + 2 * 3 * 8);
}

#[test]
fn bad_config_exits_with_one() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.conf");
    fs::write(&path, "scenario.name = nav\nsearch.H = 4\nsearch.bogus = 1\n").unwrap();
    let out = qcp(&["run", "--config", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("line 3"));

    fs::write(&path, "scenario.name = nav\nlearning.gamma = 1.5\n").unwrap();
    assert_eq!(qcp(&["run", "--config", path.to_str().unwrap()]).status.code(), Some(1));
    assert_eq!(qcp(&["run"]).status.code(), Some(1));
    assert_eq!(qcp(&["--help"]).status.code(), Some(0));
}

const HEADER: &str = "algorithm,seed,iteration,mean_reward,cum_states,new_states,sim_steps,wall_ms";

fn write_run(dir: &Path, alg: &str, states: [usize; 2]) -> PathBuf {
    let path = dir.join(format!("{alg}.csv"));
    let text = format!(
        "{HEADER}\n{alg},0,1,0.25,{},{},10,0\n{alg},0,2,0.5,{},{},10,0\n",
        states[0],
        states[0],
        states[1],
        states[1] - states[0]
    );
    fs::write(&path, text).unwrap();
    path
}

fn ratio(stdout: &[u8], key: &str) -> f64 {
    String::from_utf8_lossy(stdout)
        .lines()
        .find_map(|l| l.strip_prefix(key))
        .unwrap()
        .trim()
        .parse()
        .unwrap()
}

#[test]
fn compare_reports_ratios() {
    let dir = tempfile::tempdir().unwrap();
    let q = write_run(dir.path(), "qcp", [10, 30]);
    let v = write_run(dir.path(), "vanilla", [10, 30]);
    let out = qcp(&["compare", q.to_str().unwrap(), v.to_str().unwrap()]);
    assert!(out.status.success());
    assert_eq!(ratio(&out.stdout, "state_ratio"), 1.0);
    assert_eq!(ratio(&out.stdout, "reward_parity"), 1.0);

    let v2 = write_run(dir.path(), "vanilla", [20, 60]);
    let out = qcp(&["compare", q.to_str().unwrap(), v2.to_str().unwrap()]);
    assert_eq!(ratio(&out.stdout, "state_ratio"), 0.5);
}

#[test]
fn compare_fails_cleanly() {
    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("nope.csv");
    let out = qcp(&["compare", missing.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("nope.csv"));

    let odd = dir.path().join("odd.csv");
    fs::write(&odd, "a,b,c\n1,2,3\n").unwrap();
    let out = qcp(&["compare", odd.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("header"));
}
