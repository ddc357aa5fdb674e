use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use pinch_isac_core::agents::checkpoint::load_agent;
use pinch_isac_core::agents::{derive_seed, Algorithm};
use pinch_isac_core::env::{reset, PinchingEnv};
use pinch_isac_core::harness::campaign::{evaluate_episode, load_runs, run_campaign, CHECKPOINT_DIR};
use pinch_isac_core::harness::config::{ConfigError, ExperimentConfig};
use pinch_isac_core::harness::oracle::{grid_search_oracle, OracleOptions, Scenario};
use pinch_isac_core::harness::plots::emit_plots;
use pinch_isac_core::harness::report::compare_report;

/// Overrides the output directory from the config file; `--out` wins over it.
const OUT_ENV: &str = "PINCH_ISAC_OUT";

#[derive(Parser)]
#[command(name = "pinch-isac", version, about = "Pinching-antenna ISAC simulation and training")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct Common {
    /// TOML config; built-in defaults when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Replace the seed list with this single seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory; wins over PINCH_ISAC_OUT and the config's output_dir
    #[arg(long)]
    out: Option<PathBuf>,
    /// Comma-separated subset of merl,td3,ddpg,random.
    #[arg(long, value_delimiter = ',')]
    algorithms: Option<Vec<Algorithm>>,
    /// Training episodes per run (evaluation episodes for `evaluate`)
    #[arg(long)]
    episodes: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Run a training campaign, then write the report and plots.
    Train(Common),
    /// Run exploit-mode episodes with a saved agent.
    Evaluate {
        #[command(flatten)]
        common: Common,
        /// Run directory or checkpoint directory.
        #[arg(long)]
        checkpoint: PathBuf,
    },
    /// Build the comparison report and plots from stored runs.
    Report(Common),
    /// Grid-search the best single-slot layout and power for a scenario
    /// drawn from the config and seed.
    Oracle {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = 1.0)]
        resolution_m: f64,
        #[arg(long, default_value_t = 11)]
        power_levels: usize,
        /// Require every target to meet the SNR threshold.
        #[arg(long)]
        snr_constraint: bool,
    },
    /// Parse and check a config file, print its hash.
    ValidateConfig(Common),
}

enum Failure {
    Config(String),
    Runtime(String),
}

impl From<ConfigError> for Failure {
    fn from(e: ConfigError) -> Self {
        Failure::Config(e.to_string())
    }
}

fn runtime<E: std::fmt::Display>(e: E) -> Failure {
    Failure::Runtime(e.to_string())
}

fn load(common: &Common) -> Result<ExperimentConfig, Failure> {
    let mut file = match &common.config {
        Some(p) => ExperimentConfig::load(p)?.file,
        None => Default::default(),
    };
    let ex = &mut file.experiment;
    if let Some(seed) = common.seed {
        ex.seeds = vec![seed];
    }
    if let Some(algs) = &common.algorithms {
        ex.algorithms = algs.clone();
    }
    if let Some(n) = common.episodes {
        ex.episodes = n;
    }
    if let Some(out) = &common.out {
        ex.output_dir = out.clone();
    } else if let Some(out) = std::env::var_os(OUT_ENV) {
        ex.output_dir = PathBuf::from(out);
    }
    Ok(ExperimentConfig::from_file(file)?)
}

fn write_report(config: &ExperimentConfig, out: &Path) -> Result<(), Failure> {
    let records = load_runs(out).map_err(runtime)?;
    if records.is_empty() {
        return Err(Failure::Runtime(format!("no runs found under {}", out.display())));
    }
    let ex = config.experiment();
    emit_plots(&records, ex.moving_average_window, &out.join("plots")).map_err(runtime)?;
    match compare_report(&records, ex.final_window_fraction) {
        Ok(report) => {
            std::fs::write(out.join("report.txt"), report.to_text()).map_err(runtime)?;
            std::fs::write(out.join("report.json"), report.to_json()).map_err(runtime)?;
            print!("{}", report.to_text());
        }
        Err(e) => eprintln!("report skipped: {e}"),
    }
    Ok(())
}

fn train(common: &Common) -> Result<(), Failure> {
    let config = load(common)?;
    let out = config.experiment().output_dir.clone();
    std::fs::create_dir_all(&out).map_err(runtime)?;
    std::fs::write(out.join("config.toml"), config.to_toml()).map_err(runtime)?;
    let records = run_campaign(&config, &out).map_err(runtime)?;
    let mut failed = 0;
    for r in &records {
        let last = r.episodes.iter().rev().find(|e| e.has_eval());
        eprintln!(
            "{:<28} {:?} episodes={} final_eval_reward={} {:.1}s",
            r.key.dir_name(),
            r.status,
            r.episodes.len(),
            last.map_or(f64::NAN, |e| e.eval_reward),
            r.wall_clock_s
        );
        failed += r.failed() as usize;
    }
    write_report(&config, &out)?;
    if failed > 0 {
        return Err(Failure::Runtime(format!("{failed} of {} runs failed", records.len())));
    }
    Ok(())
}

fn evaluate(common: &Common, checkpoint: &Path) -> Result<(), Failure> {
    let config = load(common)?;
    let dir = if checkpoint.join(CHECKPOINT_DIR).is_dir() {
        checkpoint.join(CHECKPOINT_DIR)
    } else {
        checkpoint.to_path_buf()
    };
    let (mut agent, manifest) = load_agent(&dir).map_err(runtime)?;
    if manifest.algorithm != Algorithm::Random
        && (manifest.obs_dim != config.system.observation_dim() || manifest.action_dim != config.system.action_dim())
    {
        return Err(Failure::Config(format!(
            "checkpoint dimensions ({}, {}) do not match the config ({}, {})",
            manifest.obs_dim,
            manifest.action_dim,
            config.system.observation_dim(),
            config.system.action_dim()
        )));
    }
    let seed = config.experiment().seeds[0];
    let episodes = common.episodes.unwrap_or(10);
    let mut env = PinchingEnv::new(config.system.clone(), seed).map_err(runtime)?;
    let mut total = 0.0;
    println!("episode\treward\tmean_sum_rate\tmean_snr_db\tsnr_violations");
    for i in 0..episodes {
        let s = evaluate_episode(&mut agent, &mut env, derive_seed(seed, i as u64)).map_err(runtime)?;
        println!("{i}\t{}\t{}\t{}\t{}", s.reward, s.mean_sum_rate, s.mean_snr_db, s.snr_violations);
        total += s.reward;
    }
    println!("mean reward {}", total / episodes.max(1) as f64);
    Ok(())
}

fn oracle(common: &Common, resolution_m: f64, power_levels: usize, snr_constraint: bool) -> Result<(), Failure> {
    let config = load(common)?;
    let (state, _) = reset(&config.system, config.experiment().seeds[0]).map_err(runtime)?;
    let scenario = Scenario {
        users: state.user_positions,
        targets: state.target_positions,
        served_user: 0,
    };
    let options = OracleOptions {
        resolution_m,
        power_levels,
        enforce_snr: snr_constraint,
    };
    let result = grid_search_oracle(&scenario, &config.system, &options).map_err(runtime)?;
    println!("{}", serde_json::to_string_pretty(&result).map_err(runtime)?);
    Ok(())
}

fn validate(common: &Common) -> Result<(), Failure> {
    let config = load(common)?;
    println!("ok {}", config.hash());
    println!(
        "observation_dim {} action_dim {} runs {}",
        config.system.observation_dim(),
        config.system.action_dim(),
        config.experiment().algorithms.len() * config.experiment().seeds.len() * config.learning_rates().len()
    );
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Train(c) => train(c),
        Command::Evaluate { common, checkpoint } => evaluate(common, checkpoint),
        Command::Report(c) => load(c).and_then(|cfg| {
            let out = cfg.experiment().output_dir.clone();
            write_report(&cfg, &out)
        }),
        Command::Oracle {
            common,
            resolution_m,
            power_levels,
            snr_constraint,
        } => oracle(common, *resolution_m, *power_levels, *snr_constraint),
        Command::ValidateConfig(c) => validate(c),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Config(msg)) => {
            eprintln!("config error: {msg}");
            ExitCode::from(1)
        }
        Err(Failure::Runtime(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
    }
}
