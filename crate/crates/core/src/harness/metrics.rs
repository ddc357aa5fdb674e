//! Per-episode metric rows and their CSV form.
//!
//! Column order is fixed (see [`EpisodeMetrics::COLUMNS`]). Floats are
//! written with Rust's shortest round-trip formatting, so parsing a file
//! reproduces the in-memory values exactly. Evaluation columns are `NaN` on
//! episodes without an evaluation.

use std::io::Write;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpisodeMetrics {
    pub episode: usize,
    pub train_reward: f64,
    pub train_steps: usize,
    pub eval_reward: f64,
    /// Mean per-slot sum of all users' rates.
    pub eval_sum_rate: f64,
    /// Mean per-slot target SNR, linear.
    pub eval_snr_linear: f64,
    /// Mean per-slot target SNR in dB, floored like the reward.
    pub eval_snr_db: f64,
    pub eval_snr_violations: f64,
    pub spacing_projections: usize,
    pub power_clips: usize,
    pub energy_scaled: usize,
    /// Training steps that ran update rounds (each runs `updates_per_step` of them).
    pub updates: usize,
    pub critic_loss: f64,
    pub policy_loss: f64,
    pub temperature: f64,
    pub entropy: f64,
}

impl EpisodeMetrics {
    pub const COLUMNS: [&'static str; 16] = [
        "episode",
        "train_reward",
        "train_steps",
        "eval_reward",
        "eval_sum_rate",
        "eval_snr_linear",
        "eval_snr_db",
        "eval_snr_violations",
        "spacing_projections",
        "power_clips",
        "energy_scaled",
        "updates",
        "critic_loss",
        "policy_loss",
        "temperature",
        "entropy",
    ];

    /// Zero counters, `NaN` for everything that may not be measured.
    pub fn blank() -> Self {
        Self {
            episode: 0,
            train_reward: 0.0,
            train_steps: 0,
            eval_reward: f64::NAN,
            eval_sum_rate: f64::NAN,
            eval_snr_linear: f64::NAN,
            eval_snr_db: f64::NAN,
            eval_snr_violations: f64::NAN,
            spacing_projections: 0,
            power_clips: 0,
            energy_scaled: 0,
            updates: 0,
            critic_loss: f64::NAN,
            policy_loss: f64::NAN,
            temperature: f64::NAN,
            entropy: f64::NAN,
        }
    }

    pub fn has_eval(&self) -> bool {
        !self.eval_reward.is_nan()
    }

    pub fn to_line(&self) -> String {
        format!(
            "{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
            self.episode,
            self.train_reward,
            self.train_steps,
            self.eval_reward,
            self.eval_sum_rate,
            self.eval_snr_linear,
            self.eval_snr_db,
            self.eval_snr_violations,
            self.spacing_projections,
            self.power_clips,
            self.energy_scaled,
            self.updates,
            self.critic_loss,
            self.policy_loss,
            self.temperature,
            self.entropy,
        )
    }

    pub fn parse_line(line: &str) -> Result<Self, String> {
        let fields: Vec<&str> = line.trim_end().split(',').collect();
        if fields.len() != Self::COLUMNS.len() {
            return Err(format!(
                "expected {} fields, got {}",
                Self::COLUMNS.len(),
                fields.len()
            ));
        }
        let f = |i: usize| -> Result<f64, String> {
            fields[i]
                .parse::<f64>()
                .map_err(|e| format!("{}: {e}", Self::COLUMNS[i]))
        };
        let u = |i: usize| -> Result<usize, String> {
            fields[i]
                .parse::<usize>()
                .map_err(|e| format!("{}: {e}", Self::COLUMNS[i]))
        };
        Ok(Self {
            episode: u(0)?,
            train_reward: f(1)?,
            train_steps: u(2)?,
            eval_reward: f(3)?,
            eval_sum_rate: f(4)?,
            eval_snr_linear: f(5)?,
            eval_snr_db: f(6)?,
            eval_snr_violations: f(7)?,
            spacing_projections: u(8)?,
            power_clips: u(9)?,
            energy_scaled: u(10)?,
            updates: u(11)?,
            critic_loss: f(12)?,
            policy_loss: f(13)?,
            temperature: f(14)?,
            entropy: f(15)?,
        })
    }

    /// Bitwise equality, treating `NaN` fields as equal to each other.
    pub fn same_bits(&self, other: &Self) -> bool {
        self.to_line() == other.to_line()
    }
}

pub fn header() -> String {
    EpisodeMetrics::COLUMNS.join(",")
}

/// Parses a whole metrics file.
pub fn read_metrics(text: &str) -> Result<Vec<EpisodeMetrics>, String> {
    let mut lines = text.lines();
    match lines.next() {
        Some(h) if h.trim_end() == header() => {}
        Some(h) => return Err(format!("unexpected header {h:?}")),
        None => return Err("empty metrics file".into()),
    }
    lines
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| EpisodeMetrics::parse_line(l).map_err(|e| format!("line {}: {e}", i + 2)))
        .collect()
}

/// Appends rows and flushes after each one, so a crashed run leaves every
/// finished episode on disk.
pub struct MetricsWriter<W: Write> {
    out: W,
}

impl<W: Write> MetricsWriter<W> {
    pub fn new(mut out: W) -> std::io::Result<Self> {
        writeln!(out, "{}", header())?;
        out.flush()?;
        Ok(Self { out })
    }

    pub fn append(&mut self, row: &EpisodeMetrics) -> std::io::Result<()> {
        writeln!(self.out, "{}", row.to_line())?;
        self.out.flush()
    }

    pub fn finish(mut self) -> std::io::Result<W> {
        self.out.flush()?;
        Ok(self.out)
    }
}
