use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_interference-lab"));
    c.env_remove("INTERFERENCE_LAB_THREADS");
    c
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8(o.stderr.clone()).unwrap()
}

/// `# key=value` lines of a CSV report.
fn comment(text: &str, key: &str) -> Option<String> {
    text.lines()
        .filter_map(|l| l.strip_prefix("# "))
        .find_map(|l| l.strip_prefix(&format!("{key}=")).map(str::to_string))
}

fn data_rows(text: &str) -> Vec<Vec<String>> {
    text.lines()
        .filter(|l| !l.starts_with('#'))
        .skip(1)
        .map(|l| l.split(',').map(str::to_string).collect())
        .collect()
}

fn gen_graph(dir: &Path, n: usize, k: usize, seed: u64) -> String {
    let path = dir.join(format!("g{n}_{k}_{seed}.edges"));
    let p = path.to_str().unwrap().to_string();
    let o = run(&["gen-graph", "--kind", "k-regular", "--n", &n.to_string(), "--k", &k.to_string(), "--seed", &seed.to_string(), "--out", &p]);
    assert!(o.status.success(), "{}", stderr(&o));
    p
}

#[test]
fn gen_graph_writes_edge_list() {
    let dir = tempfile::tempdir().unwrap();
    let p = gen_graph(dir.path(), 100, 4, 7);
    let text = fs::read_to_string(&p).unwrap();
    let edges = text.lines().filter(|l| !l.starts_with('#') && !l.trim().is_empty()).count();
    assert_eq!(edges, 200);

    let o = run(&["gen-graph", "--kind", "k-regular", "--n", "100", "--k", "4", "--seed", "7", "--out", &p]);
    assert_eq!(stderr(&o).trim(), "n=100 edges=200 d_max=4");

    let o = run(&["gen-graph", "--kind", "k-regular", "--n", "100", "--k", "4", "--seed", "7"]);
    assert_eq!(o.status.code(), Some(1));
    let o = run(&["gen-graph", "--kind", "k-regular", "--n", "11", "--k", "3", "--seed", "7", "--out", &p]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("odd"));
    let o = run(&["gen-graph", "--kind", "k-regular", "--n", "10", "--k", "3", "--seed", "1", "--out", "/nonexistent-dir/g.edges"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn tv_check_reports_zero_distance() {
    let o = run(&["tv-check", "--null", "no-effect", "--alt", "own-treatment", "--n", "8"]);
    assert!(o.status.success());
    let out = stdout(&o);
    assert_eq!(data_rows(&out).len(), 256);
    assert_eq!(comment(&out, "max_tv").as_deref(), Some("0.0"));
    assert_eq!(comment(&out, "risk_bound").as_deref(), Some("1.0"));

    let dir = tempfile::tempdir().unwrap();
    let g = gen_graph(dir.path(), 10, 3, 3);
    let o = run(&["tv-check", "--null", "own-treatment", "--alt", "stratified", "--graph", &g, "--design", "bernoulli:0.3"]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert_eq!(comment(&stdout(&o), "risk_bound").as_deref(), Some("1.0"));

    let o = run(&["tv-check", "--null", "stratified", "--alt", "own-treatment", "--graph", &g]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("not a refinement"));
    assert!(stderr(&o).contains("unit"));

    let o = run(&["tv-check", "--null", "own-treatment", "--alt", "stratified", "--n", "10"]);
    assert_eq!(o.status.code(), Some(1));
    let o = run(&["tv-check", "--null", "no-effect", "--alt", "own-treatment", "--n", "30"]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn risk_bound_baselines_sum_to_one() {
    let o = run(&["risk-bound", "--null", "no-effect", "--alt", "own-treatment", "--n", "8", "--reps", "4000", "--seed", "3"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let out = stdout(&o);
    assert_eq!(comment(&out, "risk_bound").as_deref(), Some("1.0"));
    assert_eq!(comment(&out, "seed").as_deref(), Some("3"));
    let rows = data_rows(&out);
    assert_eq!(rows.len(), 4);
    for r in rows {
        let mc: f64 = r[1].parse().unwrap();
        let se: f64 = r[2].parse().unwrap();
        let exact: f64 = r[3].parse().unwrap();
        assert!((exact - 1.0).abs() < 1e-12, "{r:?}");
        assert!((mc - 1.0).abs() <= 3.0 * se + 1e-12, "{r:?}");
    }
    let o = run(&["risk-bound", "--null", "no-effect", "--alt", "own-treatment", "--n", "8"]);
    assert_eq!(o.status.code(), Some(1), "seed is mandatory");
}

fn lim_summary(args: &[&str]) -> (f64, f64, String) {
    let o = run(args);
    assert!(o.status.success(), "{}", stderr(&o));
    let out = stdout(&o);
    let mean = comment(&out, "mean_g_hat").unwrap().parse().unwrap();
    let se = comment(&out, "g_hat_se").unwrap().parse().unwrap();
    (mean, se, out)
}

#[test]
fn lim_run_estimates_are_centred() {
    let common = ["lim-run", "--n", "10000", "--k", "4", "--reps", "2000", "--seed", "11"];
    let (mean, se, out) = lim_summary(&[&common[..], &["--beta", "0,0,0", "--truth", "null"]].concat());
    assert!(mean.abs() <= 3.0 * se, "{mean} ± {se}");
    assert_eq!(data_rows(&out).len(), 2000);
    assert!(comment(&out, "type1").is_some());

    let (mean, se, out) = lim_summary(&[&common[..], &["--beta", "0,0,1", "--truth", "alt"]].concat());
    assert!((mean - 1.0).abs() <= 3.0 * se, "{mean} ± {se}");
    assert_eq!(comment(&out, "type2").as_deref(), Some("0.0"));
}

#[test]
fn lim_run_reads_model_files() {
    let dir = tempfile::tempdir().unwrap();
    let g = gen_graph(dir.path(), 20, 4, 2);
    let model = dir.path().join("m.json");
    let beta: Vec<String> = (0..20).map(|i| format!("[0, {}, 0.5]", if i % 2 == 0 { 0.5 } else { -0.5 })).collect();
    fs::write(&model, format!("{{\"kind\":\"lim\",\"beta\":[{}]}}", beta.join(","))).unwrap();
    let o = run(&["lim-run", "--graph", &g, "--model", model.to_str().unwrap(), "--reps", "50", "--seed", "1", "--format", "json"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(v["rows"].as_array().unwrap().len(), 50);
    assert_eq!(v["meta"]["seed"], 1);

    let sutva = dir.path().join("s.json");
    let coeffs: Vec<&str> = vec!["[-0.5, 0.5]"; 20];
    fs::write(&sutva, format!("{{\"kind\":\"exposure\",\"spec\":{{\"type\":\"own-treatment\",\"n\":20}},\"coeffs\":[{}]}}", coeffs.join(","))).unwrap();
    let o = run(&["lim-run", "--graph", &g, "--model", sutva.to_str().unwrap(), "--reps", "50", "--seed", "1", "--truth", "null"]);
    assert!(o.status.success(), "{}", stderr(&o));

    // a LIM model on a graph with an isolated unit
    let iso = dir.path().join("iso.edges");
    fs::write(&iso, "# n=4\n0 1\n1 2\n").unwrap();
    let o = run(&["lim-run", "--graph", iso.to_str().unwrap(), "--beta", "0,0,1", "--reps", "5", "--seed", "1"]);
    assert_eq!(o.status.code(), Some(2));

    let o = run(&["lim-run", "--graph", &g, "--beta", "0,0,1", "--reps", "5"]);
    assert_eq!(o.status.code(), Some(1));
    let o = run(&["lim-run", "--graph", &g, "--beta", "1,0,1", "--reps", "5", "--seed", "1"]);
    assert_eq!(o.status.code(), Some(2), "outcome bound violated");
}

#[test]
fn lim_consistency_emits_one_row_per_size() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("curve.csv");
    let o = run(&["lim-consistency", "--k", "4", "--n", "1000,10000,100000", "--delta", "1.0", "--reps", "60", "--seed", "4", "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    let text = fs::read_to_string(&out).unwrap();
    assert!(text.lines().any(|l| l == "n,delta,type1,type1_se,type2,type2_se,overall,reps,seed"));
    let rows = data_rows(&text);
    assert_eq!(rows.iter().map(|r| r[0].as_str()).collect::<Vec<_>>(), ["1000", "10000", "100000"]);
    assert!(rows.iter().all(|r| r[7] == "60" && r[8] == "4"));

    let o = run(&["lim-consistency", "--k", "4", "--n", "100", "--delta", "4.5", "--seed", "4"]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn moments_table_matches_oracle() {
    let o = run(&["moments", "--degree", "2", "--p", "0.5"]);
    let rows = data_rows(&stdout(&o));
    let want = [0.5, 0.375, 0.3125, 0.28125];
    for (r, w) in rows.iter().zip(want) {
        assert_eq!(r[1].parse::<f64>().unwrap(), w);
        assert_eq!(r[2].parse::<f64>().unwrap(), w);
    }
    let o = run(&["moments", "--degree", "1", "--p", "0.3"]);
    for r in data_rows(&stdout(&o)).iter().take(4) {
        assert_eq!(r[1], "0.3");
        assert_eq!(r[2], "0.3");
    }
    assert_eq!(run(&["moments", "--degree", "0", "--p", "0.5"]).status.code(), Some(1));
}

#[test]
fn thread_override() {
    let args = ["lim-consistency", "--n", "200", "--delta", "1", "--reps", "40", "--seed", "8"];
    let base = run(&args);
    let env = bin().args(args).env("INTERFERENCE_LAB_THREADS", "2").output().unwrap();
    assert_eq!(base.stdout, env.stdout);
    let bad = bin().args(args).env("INTERFERENCE_LAB_THREADS", "many").output().unwrap();
    assert_eq!(bad.status.code(), Some(1));
}
