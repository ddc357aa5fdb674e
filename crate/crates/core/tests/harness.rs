use std::path::{Path, PathBuf};
use std::process::Command;

use pinch_isac_core::agents::Algorithm;
use pinch_isac_core::env::SystemConfig;
use pinch_isac_core::harness::campaign::{campaign_keys, METRICS_FILE};
use pinch_isac_core::harness::metrics::EpisodeMetrics;
use pinch_isac_core::harness::oracle::{grid_search_oracle, OracleOptions, Scenario};
use pinch_isac_core::harness::plots::parse_tsv;
use pinch_isac_core::harness::report::{normalize, relative_improvement};
use pinch_isac_core::harness::*;
use pinch_isac_core::physics::Position3D;
use proptest::prelude::*;

const TINY: &str = r#"
[system]
slots_per_episode = 12

[agent]
hidden_sizes = [8]
batch_size = 8
warmup_transitions = 16
replay_capacity = 200

[experiment]
algorithms = ["merl", "td3", "ddpg", "random"]
episodes = 4
seeds = [0, 1]
eval_episodes = 2
"#;

fn tiny() -> ExperimentConfig {
    ExperimentConfig::parse(TINY).unwrap()
}

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_pinch-isac"))
}

fn write(dir: &Path, name: &str, text: &str) -> PathBuf {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p
}

#[test]
fn campaign_writes_one_record_per_tuple() {
    let out = tempfile::tempdir().unwrap();
    let config = tiny();
    let records = run_campaign(&config, out.path()).unwrap();
    assert_eq!(records.len(), 8);
    assert_eq!(campaign_keys(&config).len(), 8);
    for r in &records {
        assert_eq!(r.status, RunStatus::Completed, "{:?}", r.key);
        assert_eq!(r.episodes.len(), 4);
        assert!(r.episodes.iter().all(|e| e.has_eval()));
        assert!(r.checkpoint.as_ref().unwrap().is_dir());
    }
    let loaded = load_runs(out.path()).unwrap();
    assert_eq!(loaded.len(), records.len());
    for l in &loaded {
        let r = records.iter().find(|r| r.key == l.key).unwrap();
        assert!(l.episodes.iter().zip(&r.episodes).all(|(a, b)| a.same_bits(b)));
    }
}

#[test]
fn repeated_runs_write_identical_metric_files() {
    let config = tiny();
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let key = RunKey {
        algorithm: Algorithm::Merl,
        seed: 3,
        learning_rate: 1e-3,
    };
    let ra = run_one(&config, key, &config.hash(), a.path());
    let rb = run_one(&config, key, &config.hash(), b.path());
    let fa = std::fs::read(ra.dir.join(METRICS_FILE)).unwrap();
    let fb = std::fs::read(rb.dir.join(METRICS_FILE)).unwrap();
    assert_eq!(fa, fb);
    let text = String::from_utf8(fa).unwrap();
    assert_eq!(text.lines().next().unwrap(), EpisodeMetrics::COLUMNS.join(","));
}

#[test]
fn report_and_plots_from_stored_runs() {
    let out = tempfile::tempdir().unwrap();
    let records = run_campaign(&tiny(), out.path()).unwrap();
    let report = compare_report(&records, 0.5).unwrap();
    assert_eq!(report.summaries.len(), 4);
    assert!(!report.single_seed);
    assert!(report.rank_test.is_some());
    let text = report.to_text();
    assert!(text.contains("20.3%") && text.contains("44.4%") && text.contains("16.7%"));
    let json: serde_json::Value = serde_json::from_str(&report.to_json()).unwrap();
    assert!(json["summaries"].is_array());

    let plots = out.path().join("plots");
    let written = emit_plots(&records, 3, &plots).unwrap();
    assert!(written.iter().any(|p| p.ends_with("rewards.svg")));
    let tsv = std::fs::read_to_string(plots.join("rewards.tsv")).unwrap();
    let series = parse_tsv(&tsv).unwrap();
    assert_eq!(series, plots::reward_series(&records, 3));
}

#[test]
fn nested_grid_refinement_never_loses_value() {
    let mut c = SystemConfig::default();
    c.num_antennas = 2;
    c.num_users = 2;
    c.num_targets = 0;
    let scenario = Scenario {
        users: vec![Position3D::ground(37.2, 6.0), Position3D::ground(101.9, -20.0)],
        targets: vec![],
        served_user: 0,
    };
    let mut last = f64::NEG_INFINITY;
    for res in [10.0, 5.0, 2.5] {
        let r = grid_search_oracle(
            &scenario,
            &c,
            &OracleOptions {
                resolution_m: res,
                power_levels: 3,
                enforce_snr: false,
            },
        )
        .unwrap();
        assert!(r.sum_rate >= last, "resolution {res}: {} < {last}", r.sum_rate);
        last = r.sum_rate;
    }
}

fn scaled_records(scale: f64) -> Vec<RunRecord> {
    let mut out = Vec::new();
    for (alg, base) in [(Algorithm::Merl, 3.0), (Algorithm::Td3, 2.0), (Algorithm::Random, 1.5)] {
        for seed in 0..3u64 {
            let episodes = (0..10)
                .map(|e| {
                    let mut m = EpisodeMetrics::blank();
                    m.episode = e;
                    let v = scale * (base + 0.1 * seed as f64 + 0.01 * e as f64);
                    m.eval_reward = v;
                    m.eval_sum_rate = v;
                    m.eval_snr_linear = v;
                    m.eval_snr_db = v;
                    m
                })
                .collect();
            out.push(RunRecord {
                key: RunKey {
                    algorithm: alg,
                    seed,
                    learning_rate: 1e-5,
                },
                status: RunStatus::Completed,
                episodes,
                wall_clock_s: 0.0,
                checkpoint: None,
                dir: PathBuf::new(),
            });
        }
    }
    out
}

proptest! {
    #[test]
    fn normalization_is_bounded_and_order_preserving(v in prop::collection::vec(-1e6..1e6f64, 2..30)) {
        let n = normalize(&v);
        prop_assert!(n.values.iter().all(|x| (0.0..=1.0).contains(x)));
        let argmax = |x: &[f64]| (0..x.len()).max_by(|&a, &b| x[a].total_cmp(&x[b])).unwrap();
        if !n.degenerate {
            prop_assert_eq!(v[argmax(&v)], v[argmax(&n.values)]);
            for i in 0..v.len() {
                for j in 0..v.len() {
                    if v[i] < v[j] {
                        prop_assert!(n.values[i] <= n.values[j]);
                    }
                }
            }
        }
    }

    #[test]
    fn improvements_ignore_common_rescaling(a in -1e3..1e3f64, b in 1e-3..1e3f64, s in 1e-3..1e3f64) {
        let x = relative_improvement(a, b).unwrap();
        let y = relative_improvement(s * a, s * b).unwrap();
        prop_assert!((x - y).abs() <= 1e-9 * x.abs().max(1.0));
    }

    #[test]
    fn report_improvements_ignore_common_rescaling(s in 1e-3..1e3f64) {
        let base = compare_report(&scaled_records(1.0), 0.3).unwrap();
        let scaled = compare_report(&scaled_records(s), 0.3).unwrap();
        for (p, q) in base.improvements.iter().zip(&scaled.improvements) {
            let (p, q) = (p.observed.unwrap(), q.observed.unwrap());
            prop_assert!((p - q).abs() <= 1e-9, "{} vs {}", p, q);
        }
    }
}

#[test]
fn config_rejects_unknown_keys_and_bad_values() {
    assert!(matches!(
        ExperimentConfig::parse("[system]\nnum_antenas = 3\n"),
        Err(ConfigError::Parse(_))
    ));
    assert!(matches!(
        ExperimentConfig::parse("[experiment]\nseeds = []\n"),
        Err(ConfigError::Invalid(_))
    ));
    assert!(matches!(
        ExperimentConfig::parse("[experiment]\nalgorithms = []\n"),
        Err(ConfigError::Invalid(_))
    ));
    assert!(ExperimentConfig::load(Path::new("/nonexistent/config.toml")).is_err());
}

#[test]
fn cli_validate_config_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let good = write(dir.path(), "good.toml", TINY);
    let bad = write(dir.path(), "bad.toml", "[system]\nbogus_key = 1\n");
    let ok = bin().args(["validate-config", "--config"]).arg(&good).output().unwrap();
    assert_eq!(ok.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&ok.stdout).starts_with("ok "));
    let err = bin().args(["validate-config", "--config"]).arg(&bad).output().unwrap();
    assert_eq!(err.status.code(), Some(1));
    let missing = bin().args(["validate-config", "--config", "/nonexistent.toml"]).output().unwrap();
    assert_eq!(missing.status.code(), Some(1));
}

#[test]
fn cli_train_report_evaluate_with_env_output_dir() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "tiny.toml", TINY);
    let out = dir.path().join("from_env");
    let train = bin()
        .args(["train", "--algorithms", "merl,random", "--episodes", "3", "--seed", "5", "--config"])
        .arg(&cfg)
        .env("PINCH_ISAC_OUT", &out)
        .output()
        .unwrap();
    assert_eq!(train.status.code(), Some(0), "{}", String::from_utf8_lossy(&train.stderr));
    let runs = load_runs(&out).unwrap();
    assert_eq!(runs.len(), 2);
    assert!(runs.iter().all(|r| r.key.seed == 5 && r.episodes.len() == 3));
    assert!(out.join("report.txt").is_file());
    assert!(out.join("plots/rewards.svg").is_file());
    assert!(out.join("config.toml").is_file());

    // --out wins over the environment variable
    let report_dir = dir.path().join("explicit");
    std::fs::create_dir_all(&report_dir).unwrap();
    let report = bin()
        .args(["report", "--out"])
        .arg(&out)
        .env("PINCH_ISAC_OUT", &report_dir)
        .output()
        .unwrap();
    assert_eq!(report.status.code(), Some(0));

    let run_dir = out.join("merl_seed5_lr1e-5");
    let eval = bin()
        .args(["evaluate", "--episodes", "2", "--checkpoint"])
        .arg(&run_dir)
        .args(["--config"])
        .arg(&cfg)
        .output()
        .unwrap();
    assert_eq!(eval.status.code(), Some(0), "{}", String::from_utf8_lossy(&eval.stderr));
    assert!(String::from_utf8_lossy(&eval.stdout).contains("mean reward"));

    // reports need runs
    let empty = dir.path().join("empty");
    std::fs::create_dir_all(&empty).unwrap();
    let none = bin().args(["report", "--out"]).arg(&empty).output().unwrap();
    assert_eq!(none.status.code(), Some(2));
}

#[test]
fn cli_oracle_refuses_intractable_grid() {
    let fine = bin().args(["oracle", "--resolution-m", "0.001"]).output().unwrap();
    assert_eq!(fine.status.code(), Some(2));
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "one.toml", "[system]\nnum_antennas = 1\nnum_users = 2\n");
    let ok = bin()
        .args(["oracle", "--resolution-m", "1", "--power-levels", "3", "--config"])
        .arg(&cfg)
        .output()
        .unwrap();
    assert_eq!(ok.status.code(), Some(0), "{}", String::from_utf8_lossy(&ok.stderr));
    let v: serde_json::Value = serde_json::from_slice(&ok.stdout).unwrap();
    assert_eq!(v["layout"].as_array().unwrap().len(), 1);
}

#[test]
fn shipped_default_config_matches_built_in_defaults() {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs/default.toml");
    let shipped = ExperimentConfig::load(&path).unwrap();
    let built_in = ExperimentConfig::parse("").unwrap();
    assert_eq!(shipped.file, built_in.file);
    assert_eq!(shipped.hash(), built_in.hash());
}
