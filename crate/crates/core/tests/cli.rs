use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use regmdp::divergence::{gaussian_kl, DiagGaussian};
use tempfile::TempDir;

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_regmdp"));
    c.env_remove("REGMDP_THREADS");
    c
}

fn write_config(dir: &Path, name: &str, json: &str) -> PathBuf {
    let p = dir.join(name);
    fs::write(&p, json).unwrap();
    p
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().unwrap()
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exited normally")
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

/// Numeric columns after the first `skip` of every data row.
fn csv_values(path: &Path, skip: usize) -> Vec<Vec<f64>> {
    fs::read_to_string(path)
        .unwrap()
        .lines()
        .skip(1)
        .map(|l| l.split(',').skip(skip).map(|x| x.parse().unwrap()).collect())
        .collect()
}

fn run_cmd(sub: &str, cfg: &Path, out: &Path, extra: &[&str]) -> Output {
    let mut args = vec![sub, "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()];
    args.extend_from_slice(extra);
    run(&args)
}

#[test]
fn solve_bandit_gives_softmax_policy() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(
        dir.path(),
        "c.json",
        r#"{"env": "bandit:dense", "reward": [[0, 0, 0, 1]], "reg": {"family": "shannon", "lambda": 1.0}}"#,
    );
    let out = dir.path().join("out");
    let o = run_cmd("solve", &cfg, &out, &[]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let e = 1f64.exp();
    let expected = [1.0 / (3.0 + e), 1.0 / (3.0 + e), 1.0 / (3.0 + e), e / (3.0 + e)];
    let pi = csv_values(&out.join("policy.csv"), 1);
    for (p, x) in pi[0].iter().zip(expected) {
        assert!((p - x).abs() < 1e-9, "{:?}", pi[0]);
    }
    let sol: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out.join("value_solution.json")).unwrap()).unwrap();
    assert!(sol["v_values"].is_array() && sol["q_values"].is_array());
    assert!(out.join("resolved_config.json").exists());
}

#[test]
fn solve_zero_reward_gives_uniform_policy() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(
        dir.path(),
        "c.json",
        r#"{"env": "random:seed=3,s=6,a=4", "reward": [[0,0,0,0],[0,0,0,0],[0,0,0,0],[0,0,0,0],[0,0,0,0],[0,0,0,0]],
            "reg": {"family": "tsallis", "lambda": 0.5, "k": 1.0, "q": 2.0}}"#,
    );
    let out = dir.path().join("out");
    let o = run_cmd("solve", &cfg, &out, &[]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    for row in csv_values(&out.join("policy.csv"), 1) {
        for p in row {
            assert!((p - 0.25).abs() < 1e-9);
        }
    }
}

#[test]
fn solve_without_reward_is_a_config_error() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(dir.path(), "c.json", r#"{"env": "random:seed=3"}"#);
    let o = run_cmd("solve", &cfg, &dir.path().join("out"), &[]);
    assert_eq!(code(&o), 1);
    assert!(stderr(&o).contains("missing reward"), "{}", stderr(&o));
}

#[test]
fn unknown_keys_and_bad_values_are_config_errors() {
    let dir = TempDir::new().unwrap();
    let out = dir.path().join("out");
    for json in [
        r#"{"env": "bandit:dense", "lambda": 1.0}"#,
        r#"{"env": "bandit:dense", "train": {"iters": 5}}"#,
        r#"{"env": "bandit:dense", "reg": {"family": "shannon", "lambda": -1}}"#,
        r#"{"env": "nowhere:1"}"#,
        r#"{"env": "bandit:dense", "seeds": []}"#,
        r#"not json"#,
    ] {
        let cfg = write_config(dir.path(), "c.json", json);
        let o = run_cmd("irl", &cfg, &out, &[]);
        assert_eq!(code(&o), 1, "{json}: {}", stderr(&o));
    }
    assert!(!out.exists(), "nothing is written before the config validates");
    let o = run(&["solve", "--config", dir.path().join("absent.json").to_str().unwrap()]);
    assert_eq!(code(&o), 1);
    let o = run(&["frobnicate"]);
    assert_eq!(code(&o), 1);
}

#[test]
#[allow(clippy::approx_constant)]
fn irl_dense_bandit_reward_is_log_policy() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(
        dir.path(),
        "c.json",
        r#"{"env": "bandit:dense", "reg": {"family": "shannon", "lambda": 1.0}}"#,
    );
    let out = dir.path().join("out");
    let o = run_cmd("irl", &cfg, &out, &[]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let r: Vec<f64> = csv_values(&out.join("irl_reward.csv"), 2)
        .into_iter()
        .map(|v| v[0])
        .collect();
    let expected = [-2.302585, -1.609438, -1.203973, -0.916291];
    assert_eq!(r.len(), 4);
    for (x, e) in r.iter().zip(expected) {
        assert!((x - e).abs() < 1e-6, "{r:?}");
    }
}

#[test]
fn irl_verify_round_trips_random_mdp() {
    let dir = TempDir::new().unwrap();
    for reg in [
        r#"{"family": "shannon", "lambda": 1.0}"#,
        r#"{"family": "tsallis", "lambda": 0.7, "k": 1.0, "q": 2.0}"#,
        r#"{"family": "cos", "lambda": 2.0}"#,
    ] {
        let cfg = write_config(
            dir.path(),
            "c.json",
            &format!(r#"{{"env": "random:seed=7", "reg": {reg}}}"#),
        );
        let o = run_cmd("irl", &cfg, &dir.path().join("out"), &["--verify"]);
        assert_eq!(code(&o), 0, "{reg}: {}", stderr(&o));
        let line = stdout(&o);
        let tv: f64 = line.trim().rsplit(' ').next().unwrap().parse().unwrap();
        assert!(tv <= 1e-4, "{reg}: {tv}");
    }
}

#[test]
fn irl_sparse_expert_under_shannon_fails_numerically() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(
        dir.path(),
        "c.json",
        r#"{"env": "bandit:sparse", "reg": {"family": "shannon", "lambda": 1.0}}"#,
    );
    let o = run_cmd("irl", &cfg, &dir.path().join("out"), &[]);
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("state 0, action"), "{}", stderr(&o));
}

const SMALL_RAIRL: &str = r#"{
  "env": "bandit:dense",
  "train": {"iterations": 60, "batch_size": 64, "rollout_steps_per_iter": 16, "eval_interval": 20,
            "probe_regs": [{"family": "shannon", "lambda": 1.0}, {"family": "tsallis", "lambda": 1.0, "k": 1.0, "q": 2.0}]},
  "demos": {"n_pairs": 500, "seed": 3},
  "seeds": [0, 1, 2, 3, 4]
}"#;

fn dir_files(dir: &Path) -> Vec<String> {
    let mut names: Vec<String> = fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().file_name().to_string_lossy().into_owned())
        .collect();
    names.sort();
    names
}

#[test]
fn rairl_writes_per_seed_files_and_aggregates() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(dir.path(), "c.json", SMALL_RAIRL);
    let out = dir.path().join("out");
    let o = run_cmd("rairl", &cfg, &out, &[]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let names = dir_files(&out);
    assert_eq!(names.iter().filter(|n| n.starts_with("metrics_seed")).count(), 5);
    assert_eq!(names.iter().filter(|n| n.starts_with("reward_seed")).count(), 5);
    assert!(names.contains(&"metrics_aggregate.csv".to_string()));
    assert!(names.contains(&"reward_aggregate.csv".to_string()));

    let header = fs::read_to_string(out.join("metrics_seed0.csv")).unwrap();
    assert!(header.starts_with("iter,disc_loss,mean_bregman_shannon,mean_bregman_tsallis_q2,episodic_return,policy_tv"));
    assert_eq!(header.lines().count(), 4);

    // aggregate = mean ± t_{0.975,4}·s/√5 of the per-seed rewards
    let per_seed: Vec<Vec<f64>> = (0..5)
        .map(|s| {
            csv_values(&out.join(format!("reward_seed{s}.csv")), 2)
                .into_iter()
                .map(|v| v[0])
                .collect()
        })
        .collect();
    let agg = csv_values(&out.join("reward_aggregate.csv"), 2);
    for (a, row) in agg.iter().enumerate() {
        let xs: Vec<f64> = per_seed.iter().map(|r| r[a]).collect();
        let mean = xs.iter().sum::<f64>() / 5.0;
        let sd = (xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / 4.0).sqrt();
        assert!((row[0] - mean).abs() < 1e-12);
        assert!((row[1] - 2.7764451051977987 * sd / 5f64.sqrt()).abs() < 1e-9);
    }
}

#[test]
fn rairl_output_is_deterministic_across_runs_and_parallelism() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(dir.path(), "c.json", SMALL_RAIRL);
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    assert_eq!(code(&run_cmd("rairl", &cfg, &a, &["--seeds", "1,4"])), 0);
    let o = bin()
        .args([
            "rairl",
            "--config",
            cfg.to_str().unwrap(),
            "--out",
            b.to_str().unwrap(),
            "--seeds",
            "1,4",
            "--parallel",
        ])
        .env("REGMDP_THREADS", "2")
        .output()
        .unwrap();
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let names = dir_files(&a);
    assert_eq!(names, dir_files(&b));
    assert!(names.contains(&"metrics_seed4.csv".to_string()));
    assert!(!names.contains(&"metrics_seed0.csv".to_string()));
    for n in names.iter().filter(|n| n.ends_with(".csv")) {
        assert_eq!(fs::read(a.join(n)).unwrap(), fs::read(b.join(n)).unwrap(), "{n}");
    }
}

#[test]
fn rairl_without_expert_is_a_config_error() {
    let dir = TempDir::new().unwrap();
    let mdp = regmdp::envs::random_mdp(1, 3, 2, 0.9, 0.5).unwrap();
    let mdp_path = dir.path().join("mdp.json");
    fs::write(&mdp_path, serde_json::to_string(&mdp).unwrap()).unwrap();
    let cfg = write_config(
        dir.path(),
        "c.json",
        &format!(r#"{{"env": "file:{}"}}"#, mdp_path.display()),
    );
    let o = run_cmd("rairl", &cfg, &dir.path().join("out"), &[]);
    assert_eq!(code(&o), 1, "{}", stderr(&o));
}

#[test]
fn divergence_writes_one_file_per_q_and_q1_is_kl() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(
        dir.path(),
        "c.json",
        r#"{"heatmap": {"expert": {"mean": [0.0], "stddev": [0.25]}, "mu_range": [-1.0, 1.0],
            "log_sigma_range": [-3.0, 0.0], "resolution": [9, 7], "qs": [1.0, 1.5, 2.0, 2.5, 3.0]}}"#,
    );
    let out = dir.path().join("out");
    let o = run_cmd("divergence", &cfg, &out, &[]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let heatmaps: Vec<String> = dir_files(&out)
        .into_iter()
        .filter(|n| n.starts_with("heatmap_q"))
        .collect();
    assert_eq!(
        heatmaps,
        [
            "heatmap_q1.5.csv",
            "heatmap_q1.csv",
            "heatmap_q2.5.csv",
            "heatmap_q2.csv",
            "heatmap_q3.csv"
        ]
    );

    let expert = DiagGaussian::univariate(0.0, 0.25).unwrap();
    let rows = csv_values(&out.join("heatmap_q1.csv"), 0);
    assert_eq!(rows.len(), 63);
    let kl: Vec<f64> = rows
        .iter()
        .map(|r| gaussian_kl(&DiagGaussian::univariate(r[0], r[1].exp()).unwrap(), &expert).unwrap())
        .collect();
    let max = kl.iter().copied().fold(0.0, f64::max);
    for (r, k) in rows.iter().zip(&kl) {
        assert!((r[2] - k / max).abs() < 1e-12);
    }
}

#[test]
fn divergence_without_heatmap_section_is_a_config_error() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(dir.path(), "c.json", r#"{"env": "bandit:dense"}"#);
    let o = run_cmd("divergence", &cfg, &dir.path().join("out"), &[]);
    assert_eq!(code(&o), 1);
}

#[test]
fn validate_subset_reports_pass_lines() {
    let o = run(&["validate", "--only", "inv-mdp,inv-grid"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let text = stdout(&o);
    assert!(
        text.contains("PASS [inv-mdp]") && text.contains("PASS [inv-grid]"),
        "{text}"
    );
    assert!(text.contains("2/2 checks passed"));
    assert_eq!(code(&run(&["validate", "--only", "no-such-check"])), 1);
}

#[test]
fn bad_thread_count_is_a_config_error() {
    let o = bin()
        .args(["validate", "--only", "inv-mdp"])
        .env("REGMDP_THREADS", "zero")
        .output()
        .unwrap();
    assert_eq!(code(&o), 1);
}
