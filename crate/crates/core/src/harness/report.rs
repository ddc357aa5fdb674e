//! Cross-run statistics: min-max normalization, median/IQR summaries,
//! relative improvements and a one-sided rank test.

use serde::Serialize;
use statrs::distribution::{ContinuousCDF, Normal};

use super::campaign::RunRecord;
use super::metrics::EpisodeMetrics;
use crate::agents::Algorithm;

/// Reference improvements reported for the original study, printed next to
/// the observed values and never asserted.
pub const REFERENCE_IMPROVEMENTS: [(Metric, Algorithm, f64); 3] = [
    (Metric::SumRate, Algorithm::Td3, 0.203),
    (Metric::SumRate, Algorithm::Ddpg, 0.444),
    (Metric::Snr, Algorithm::Td3, 0.167),
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    Reward,
    SumRate,
    Snr,
}

impl Metric {
    pub fn of(self, row: &EpisodeMetrics) -> f64 {
        match self {
            Metric::Reward => row.eval_reward,
            Metric::SumRate => row.eval_sum_rate,
            Metric::Snr => row.eval_snr_linear,
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            Metric::Reward => "reward",
            Metric::SumRate => "sum rate",
            Metric::Snr => "sensing SNR",
        }
    }
}

/// Evaluation values of the last `ceil(fraction * episodes)` episodes,
/// skipping episodes without an evaluation.
pub fn final_window(record: &RunRecord, metric: Metric, fraction: f64) -> Vec<f64> {
    let n = record.episodes.len();
    let w = ((n as f64 * fraction).ceil() as usize).clamp(1.min(n), n);
    record.episodes[n - w..]
        .iter()
        .filter(|r| r.has_eval())
        .map(|r| metric.of(r))
        .collect()
}

pub fn mean(values: &[f64]) -> f64 {
    if values.is_empty() {
        f64::NAN
    } else {
        values.iter().sum::<f64>() / values.len() as f64
    }
}

/// Linear-interpolated quantile, `q` in `[0, 1]`.
pub fn quantile(values: &[f64], q: f64) -> f64 {
    if values.is_empty() {
        return f64::NAN;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let pos = q.clamp(0.0, 1.0) * (v.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    v[lo] + (v[hi] - v[lo]) * (pos - lo as f64)
}

pub fn median(values: &[f64]) -> f64 {
    quantile(values, 0.5)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Normalized {
    pub values: Vec<f64>,
    /// All inputs were equal; every output is 0.5.
    pub degenerate: bool,
}

/// `(v - min) / (max - min)`; equal inputs map to 0.5 and set the flag.
pub fn normalize(values: &[f64]) -> Normalized {
    let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if values.is_empty() || hi <= lo {
        return Normalized {
            values: vec![0.5; values.len()],
            degenerate: true,
        };
    }
    Normalized {
        values: values.iter().map(|v| (v - lo) / (hi - lo)).collect(),
        degenerate: false,
    }
}

/// Final-window evaluation mean of each record, normalized across records.
pub fn normalize_metrics(records: &[RunRecord], metric: Metric, fraction: f64) -> Normalized {
    let means: Vec<f64> = records
        .iter()
        .map(|r| mean(&final_window(r, metric, fraction)))
        .collect();
    normalize(&means)
}

/// `(a - b) / |b|`; `None` when `b` is zero or either value is not finite.
pub fn relative_improvement(a: f64, b: f64) -> Option<f64> {
    (a.is_finite() && b.is_finite() && b != 0.0).then(|| (a - b) / b.abs())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RankTest {
    pub u: f64,
    pub z: f64,
    /// One-sided p-value for "first sample tends to be larger".
    pub p_value: f64,
    pub n_a: usize,
    pub n_b: usize,
}

/// Mann-Whitney U test of `a > b` with the normal approximation, tie
/// correction and continuity correction.
pub fn mann_whitney_greater(a: &[f64], b: &[f64]) -> Option<RankTest> {
    let (n1, n2) = (a.len(), b.len());
    if n1 == 0 || n2 == 0 {
        return None;
    }
    let mut all: Vec<(f64, bool)> = a
        .iter()
        .map(|&v| (v, true))
        .chain(b.iter().map(|&v| (v, false)))
        .collect();
    all.sort_by(|x, y| x.0.total_cmp(&y.0));
    let n = all.len();
    let mut rank_sum_a = 0.0;
    let mut tie_term = 0.0;
    let mut i = 0;
    while i < n {
        let mut j = i;
        while j + 1 < n && all[j + 1].0 == all[i].0 {
            j += 1;
        }
        let avg_rank = (i + j) as f64 / 2.0 + 1.0;
        let t = (j - i + 1) as f64;
        tie_term += t * t * t - t;
        rank_sum_a += all[i..=j].iter().filter(|x| x.1).count() as f64 * avg_rank;
        i = j + 1;
    }
    let (f1, f2, nf) = (n1 as f64, n2 as f64, n as f64);
    let u = rank_sum_a - f1 * (f1 + 1.0) / 2.0;
    let mu = f1 * f2 / 2.0;
    let var = f1 * f2 / 12.0 * ((nf + 1.0) - tie_term / (nf * (nf - 1.0)).max(1.0));
    let (z, p_value) = if var <= 0.0 {
        (0.0, 0.5)
    } else {
        let z = (u - mu - 0.5) / var.sqrt();
        let normal = Normal::new(0.0, 1.0).expect("standard normal");
        (z, 1.0 - normal.cdf(z))
    };
    Some(RankTest {
        u,
        z,
        p_value,
        n_a: n1,
        n_b: n2,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Spread {
    pub median: f64,
    pub q1: f64,
    pub q3: f64,
}

impl Spread {
    pub fn of(values: &[f64]) -> Self {
        Self {
            median: median(values),
            q1: quantile(values, 0.25),
            q3: quantile(values, 0.75),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AlgorithmSummary {
    pub algorithm: Algorithm,
    pub runs: usize,
    pub failed_runs: usize,
    /// Per-seed final-window means.
    pub reward: Spread,
    pub sum_rate: Spread,
    pub snr_linear: Spread,
    pub normalized_sum_rate: Spread,
    pub normalized_snr: Spread,
    pub reward_mean: f64,
    pub sum_rate_mean: f64,
    pub snr_mean: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Improvement {
    pub metric: Metric,
    pub algorithm: Algorithm,
    pub baseline: Algorithm,
    pub observed: Option<f64>,
    /// Value reported for the original study, not asserted.
    pub reference: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ComparisonReport {
    pub final_window_fraction: f64,
    pub summaries: Vec<AlgorithmSummary>,
    pub improvements: Vec<Improvement>,
    /// MERL vs random on pooled final-window evaluation rewards.
    pub rank_test: Option<RankTest>,
    /// Some algorithm has fewer than two seeds; no p-value is computed.
    pub single_seed: bool,
    pub degenerate_sum_rate: bool,
    pub degenerate_snr: bool,
}

#[derive(Debug, thiserror::Error)]
pub enum ReportError {
    #[error("comparison needs at least two algorithms, found {0}")]
    TooFewAlgorithms(usize),
}

/// Builds the comparison over completed runs. Learning-rate sweeps are
/// folded together: every record of an algorithm counts as one of its runs.
pub fn compare_report(records: &[RunRecord], fraction: f64) -> Result<ComparisonReport, ReportError> {
    let ok: Vec<&RunRecord> = records.iter().filter(|r| !r.failed() && !r.episodes.is_empty()).collect();
    let mut algorithms: Vec<Algorithm> = ok.iter().map(|r| r.key.algorithm).collect();
    algorithms.sort();
    algorithms.dedup();
    if algorithms.len() < 2 {
        return Err(ReportError::TooFewAlgorithms(algorithms.len()));
    }

    let owned: Vec<RunRecord> = ok.iter().map(|r| (*r).clone()).collect();
    let norm_rate = normalize_metrics(&owned, Metric::SumRate, fraction);
    let norm_snr = normalize_metrics(&owned, Metric::Snr, fraction);

    let mut summaries = Vec::new();
    let mut single_seed = false;
    for &alg in &algorithms {
        let idx: Vec<usize> = (0..owned.len()).filter(|&i| owned[i].key.algorithm == alg).collect();
        let per_run = |m: Metric| -> Vec<f64> {
            idx.iter().map(|&i| mean(&final_window(&owned[i], m, fraction))).collect()
        };
        let (reward, rate, snr) = (per_run(Metric::Reward), per_run(Metric::SumRate), per_run(Metric::Snr));
        let pick = |n: &Normalized| -> Vec<f64> { idx.iter().map(|&i| n.values[i]).collect() };
        single_seed |= idx.len() < 2;
        summaries.push(AlgorithmSummary {
            algorithm: alg,
            runs: idx.len(),
            failed_runs: records.iter().filter(|r| r.key.algorithm == alg && r.failed()).count(),
            reward: Spread::of(&reward),
            sum_rate: Spread::of(&rate),
            snr_linear: Spread::of(&snr),
            normalized_sum_rate: Spread::of(&pick(&norm_rate)),
            normalized_snr: Spread::of(&pick(&norm_snr)),
            reward_mean: mean(&reward),
            sum_rate_mean: mean(&rate),
            snr_mean: mean(&snr),
        });
    }

    let summary = |a: Algorithm| summaries.iter().find(|s| s.algorithm == a);
    let mut improvements = Vec::new();
    if let Some(merl) = summary(Algorithm::Merl) {
        for base in algorithms.iter().copied().filter(|&a| a != Algorithm::Merl) {
            let b = summary(base).expect("present");
            for (metric, x, y) in [
                (Metric::Reward, merl.reward_mean, b.reward_mean),
                (Metric::SumRate, merl.sum_rate_mean, b.sum_rate_mean),
                (Metric::Snr, merl.snr_mean, b.snr_mean),
            ] {
                let reference = REFERENCE_IMPROVEMENTS
                    .iter()
                    .find(|(m, a, _)| *m == metric && *a == base)
                    .map(|r| r.2);
                improvements.push(Improvement {
                    metric,
                    algorithm: Algorithm::Merl,
                    baseline: base,
                    observed: relative_improvement(x, y),
                    reference,
                });
            }
        }
    }

    let pooled = |alg: Algorithm| -> Vec<f64> {
        owned
            .iter()
            .filter(|r| r.key.algorithm == alg)
            .flat_map(|r| final_window(r, Metric::Reward, fraction))
            .collect()
    };
    let rank_test = if single_seed {
        None
    } else if algorithms.contains(&Algorithm::Merl) && algorithms.contains(&Algorithm::Random) {
        mann_whitney_greater(&pooled(Algorithm::Merl), &pooled(Algorithm::Random))
    } else {
        None
    };

    Ok(ComparisonReport {
        final_window_fraction: fraction,
        summaries,
        improvements,
        rank_test,
        single_seed,
        degenerate_sum_rate: norm_rate.degenerate,
        degenerate_snr: norm_snr.degenerate,
    })
}

fn pct(v: Option<f64>) -> String {
    match v {
        Some(v) => format!("{:+.1}%", 100.0 * v),
        None => "n/a".into(),
    }
}

impl ComparisonReport {
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        s.push_str(&format!(
            "final window: last {:.0}% of episodes, evaluation (exploit) episodes\n\n",
            100.0 * self.final_window_fraction
        ));
        s.push_str(&format!(
            "{:<8} {:>4}  {:>26}  {:>26}  {:>20}  {:>20}\n",
            "algo", "runs", "reward median [q1, q3]", "sum rate median [q1, q3]", "norm. rate median", "norm. SNR median"
        ));
        for a in &self.summaries {
            s.push_str(&format!(
                "{:<8} {:>4}  {:>9.3} [{:>7.3}, {:>7.3}]  {:>9.4} [{:>7.4}, {:>7.4}]  {:>20.3}  {:>20.3}\n",
                a.algorithm.name(),
                a.runs,
                a.reward.median,
                a.reward.q1,
                a.reward.q3,
                a.sum_rate.median,
                a.sum_rate.q1,
                a.sum_rate.q3,
                a.normalized_sum_rate.median,
                a.normalized_snr.median,
            ));
            if a.failed_runs > 0 {
                s.push_str(&format!("         ({} failed runs excluded)\n", a.failed_runs));
            }
        }
        if self.degenerate_sum_rate || self.degenerate_snr {
            s.push_str("warning: a normalized metric is degenerate (all runs equal), values set to 0.5\n");
        }
        if !self.improvements.is_empty() {
            s.push_str("\nrelative improvement of merl, (a - b) / |b| on final-window means\n");
            for imp in &self.improvements {
                let reference = match imp.reference {
                    Some(r) => format!("   published {:+.1}% (not asserted)", 100.0 * r),
                    None => String::new(),
                };
                s.push_str(&format!(
                    "  {:<12} vs {:<7} {:>9}{}\n",
                    imp.metric.label(),
                    imp.baseline.name(),
                    pct(imp.observed),
                    reference
                ));
            }
        }
        s.push('\n');
        match (&self.rank_test, self.single_seed) {
            (_, true) => s.push_str("rank test skipped: single-seed runs present\n"),
            (Some(t), false) => s.push_str(&format!(
                "Mann-Whitney U (merl > random, pooled final-window rewards): U = {}, z = {:.3}, one-sided p = {:.3e} (n = {}, {})\n",
                t.u, t.z, t.p_value, t.n_a, t.n_b
            )),
            (None, false) => s.push_str("rank test skipped: merl or random missing\n"),
        }
        s
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    pub fn summary(&self, algorithm: Algorithm) -> Option<&AlgorithmSummary> {
        self.summaries.iter().find(|s| s.algorithm == algorithm)
    }

    pub fn improvement(&self, metric: Metric, baseline: Algorithm) -> Option<f64> {
        self.improvements
            .iter()
            .find(|i| i.metric == metric && i.baseline == baseline)
            .and_then(|i| i.observed)
    }
}
