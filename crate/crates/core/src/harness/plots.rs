//! Plot data and simple SVG line charts.
//!
//! Each figure is written twice: `<name>.tsv` with one row per point
//! (`series`, `episode`, `value`, `moving_average`) and `<name>.svg`.
//! Figures:
//! - `rewards`: evaluation reward per algorithm (seed mean) at the first
//!   learning rate of the campaign.
//! - `normalized_rate`, `normalized_snr`: per-algorithm seed-mean
//!   evaluation sum rate / SNR, min-max normalized over all plotted points.
//! - `lr_sweep`: MERL evaluation reward per learning rate (seed mean).

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use super::campaign::RunRecord;
use super::report::Metric;
use crate::agents::Algorithm;

#[derive(Debug, Clone, PartialEq)]
pub struct PlotSeries {
    pub label: String,
    pub episodes: Vec<usize>,
    pub values: Vec<f64>,
    pub moving_average: Vec<f64>,
}

impl PlotSeries {
    pub fn new(label: impl Into<String>, episodes: Vec<usize>, values: Vec<f64>, window: usize) -> Self {
        let moving_average = moving_average(&values, window);
        Self {
            label: label.into(),
            episodes,
            values,
            moving_average,
        }
    }
}

/// Trailing mean over the last `window` values; the first points average
/// whatever is available.
pub fn moving_average(values: &[f64], window: usize) -> Vec<f64> {
    let w = window.max(1);
    (0..values.len())
        .map(|i| {
            let tail = &values[(i + 1).saturating_sub(w)..=i];
            tail.iter().sum::<f64>() / tail.len() as f64
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AxisRange {
    pub x_min: f64,
    pub x_max: f64,
    pub y_min: f64,
    pub y_max: f64,
}

/// Bounds of all finite values and moving averages.
pub fn axis_range(series: &[PlotSeries]) -> Option<AxisRange> {
    let mut r = AxisRange {
        x_min: f64::INFINITY,
        x_max: f64::NEG_INFINITY,
        y_min: f64::INFINITY,
        y_max: f64::NEG_INFINITY,
    };
    for s in series {
        for (i, &e) in s.episodes.iter().enumerate() {
            for y in [s.values[i], s.moving_average[i]] {
                if y.is_finite() {
                    r.y_min = r.y_min.min(y);
                    r.y_max = r.y_max.max(y);
                }
            }
            r.x_min = r.x_min.min(e as f64);
            r.x_max = r.x_max.max(e as f64);
        }
    }
    r.y_min.is_finite().then_some(r)
}

pub fn write_tsv(series: &[PlotSeries]) -> String {
    let mut s = String::from("series\tepisode\tvalue\tmoving_average\n");
    for p in series {
        for i in 0..p.episodes.len() {
            writeln!(s, "{}\t{}\t{}\t{}", p.label, p.episodes[i], p.values[i], p.moving_average[i]).unwrap();
        }
    }
    s
}

/// Inverse of [`write_tsv`]; series come back in first-appearance order.
pub fn parse_tsv(text: &str) -> Result<Vec<PlotSeries>, String> {
    let mut lines = text.lines();
    if lines.next() != Some("series\tepisode\tvalue\tmoving_average") {
        return Err("bad plot-data header".into());
    }
    let mut out: Vec<PlotSeries> = Vec::new();
    for (n, line) in lines.enumerate() {
        let f: Vec<&str> = line.split('\t').collect();
        if f.len() != 4 {
            return Err(format!("line {}: expected 4 fields", n + 2));
        }
        let parse = |v: &str| v.parse::<f64>().map_err(|e| format!("line {}: {e}", n + 2));
        let episode = f[1].parse::<usize>().map_err(|e| format!("line {}: {e}", n + 2))?;
        let (value, ma) = (parse(f[2])?, parse(f[3])?);
        let idx = match out.iter().position(|s| s.label == f[0]) {
            Some(i) => i,
            None => {
                out.push(PlotSeries {
                    label: f[0].to_string(),
                    episodes: Vec::new(),
                    values: Vec::new(),
                    moving_average: Vec::new(),
                });
                out.len() - 1
            }
        };
        out[idx].episodes.push(episode);
        out[idx].values.push(value);
        out[idx].moving_average.push(ma);
    }
    Ok(out)
}

const COLORS: [&str; 8] = [
    "#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f",
];

/// Line chart of each series' moving average over its raw values (faint).
/// The data range goes in the `<desc>` element as
/// `x_min x_max y_min y_max`.
pub fn render_svg(title: &str, y_label: &str, series: &[PlotSeries]) -> String {
    let (w, h) = (720.0, 440.0);
    let (left, right, top, bottom) = (70.0, 150.0, 40.0, 50.0);
    let mut svg = String::new();
    writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" viewBox="0 0 {w} {h}" font-family="sans-serif" font-size="12">"#
    )
    .unwrap();
    let Some(range) = axis_range(series) else {
        writeln!(svg, "<desc>empty</desc>\n<text x=\"{}\" y=\"{}\">no data</text>\n</svg>", w / 2.0, h / 2.0).unwrap();
        return svg;
    };
    writeln!(svg, "<desc>{} {} {} {}</desc>", range.x_min, range.x_max, range.y_min, range.y_max).unwrap();
    let (mut y0, mut y1) = (range.y_min, range.y_max);
    if y1 - y0 < 1e-12 * y0.abs().max(1.0) {
        y0 -= 0.5 * y0.abs().max(1.0);
        y1 += 0.5 * y1.abs().max(1.0);
    }
    let x_span = (range.x_max - range.x_min).max(1.0);
    let pw = w - left - right;
    let ph = h - top - bottom;
    let px = |x: f64| left + (x - range.x_min) / x_span * pw;
    let py = |y: f64| top + (1.0 - (y - y0) / (y1 - y0)) * ph;

    writeln!(svg, r#"<text x="{}" y="22" text-anchor="middle" font-size="14">{}</text>"#, left + pw / 2.0, title).unwrap();
    writeln!(
        svg,
        r##"<rect x="{left}" y="{top}" width="{pw}" height="{ph}" fill="none" stroke="#444"/>"##
    )
    .unwrap();
    for i in 0..=4 {
        let v = y0 + (y1 - y0) * i as f64 / 4.0;
        let y = py(v);
        writeln!(
            svg,
            r##"<line x1="{left}" y1="{y:.1}" x2="{}" y2="{y:.1}" stroke="#ddd"/><text x="{}" y="{:.1}" text-anchor="end">{:.3}</text>"##,
            left + pw,
            left - 6.0,
            y + 4.0,
            v
        )
        .unwrap();
        let xv = range.x_min + x_span * i as f64 / 4.0;
        writeln!(
            svg,
            r#"<text x="{:.1}" y="{}" text-anchor="middle">{:.0}</text>"#,
            px(xv),
            top + ph + 18.0,
            xv
        )
        .unwrap();
    }
    writeln!(svg, r#"<text x="{}" y="{}" text-anchor="middle">episode</text>"#, left + pw / 2.0, h - 10.0).unwrap();
    writeln!(
        svg,
        r#"<text x="16" y="{}" text-anchor="middle" transform="rotate(-90 16 {})">{}</text>"#,
        top + ph / 2.0,
        top + ph / 2.0,
        y_label
    )
    .unwrap();

    let polyline = |xs: &[usize], ys: &[f64]| -> String {
        xs.iter()
            .zip(ys)
            .filter(|(_, y)| y.is_finite())
            .map(|(&x, &y)| format!("{:.1},{:.1}", px(x as f64), py(y)))
            .collect::<Vec<_>>()
            .join(" ")
    };
    for (i, s) in series.iter().enumerate() {
        let c = COLORS[i % COLORS.len()];
        writeln!(
            svg,
            r#"<polyline fill="none" stroke="{c}" stroke-opacity="0.25" points="{}"/>"#,
            polyline(&s.episodes, &s.values)
        )
        .unwrap();
        writeln!(
            svg,
            r#"<polyline fill="none" stroke="{c}" stroke-width="2" points="{}"/>"#,
            polyline(&s.episodes, &s.moving_average)
        )
        .unwrap();
        let ly = top + 16.0 + 18.0 * i as f64;
        writeln!(
            svg,
            r#"<line x1="{}" y1="{ly}" x2="{}" y2="{ly}" stroke="{c}" stroke-width="2"/><text x="{}" y="{}">{}</text>"#,
            left + pw + 10.0,
            left + pw + 30.0,
            left + pw + 36.0,
            ly + 4.0,
            s.label
        )
        .unwrap();
    }
    svg.push_str("</svg>\n");
    svg
}

/// Per-episode mean over runs, using only episodes with an evaluation.
fn seed_mean(runs: &[&RunRecord], metric: Metric) -> (Vec<usize>, Vec<f64>) {
    let mut acc: BTreeMap<usize, (f64, usize)> = BTreeMap::new();
    for r in runs {
        for row in r.episodes.iter().filter(|e| e.has_eval()) {
            let e = acc.entry(row.episode).or_insert((0.0, 0));
            e.0 += metric.of(row);
            e.1 += 1;
        }
    }
    acc.into_iter().map(|(ep, (s, n))| (ep, s / n as f64)).unzip()
}

fn completed(records: &[RunRecord]) -> Vec<&RunRecord> {
    records.iter().filter(|r| !r.failed()).collect()
}

fn algorithms(runs: &[&RunRecord]) -> Vec<Algorithm> {
    let mut a: Vec<Algorithm> = runs.iter().map(|r| r.key.algorithm).collect();
    a.sort();
    a.dedup();
    a
}

/// Reward curves, one per algorithm, at the first learning rate seen in
/// config order (records are expected in campaign order).
pub fn reward_series(records: &[RunRecord], window: usize) -> Vec<PlotSeries> {
    let runs = completed(records);
    let Some(lr) = runs.first().map(|r| r.key.learning_rate) else {
        return Vec::new();
    };
    algorithms(&runs)
        .into_iter()
        .map(|alg| {
            let sel: Vec<&RunRecord> = runs
                .iter()
                .copied()
                .filter(|r| r.key.algorithm == alg && r.key.learning_rate == lr)
                .collect();
            let (x, y) = seed_mean(&sel, Metric::Reward);
            PlotSeries::new(alg.name(), x, y, window)
        })
        .filter(|s| !s.episodes.is_empty())
        .collect()
}

pub fn normalized_series(records: &[RunRecord], metric: Metric, window: usize) -> Vec<PlotSeries> {
    let runs = completed(records);
    let raw: Vec<(Algorithm, Vec<usize>, Vec<f64>)> = algorithms(&runs)
        .into_iter()
        .map(|alg| {
            let sel: Vec<&RunRecord> = runs.iter().copied().filter(|r| r.key.algorithm == alg).collect();
            let (x, y) = seed_mean(&sel, metric);
            (alg, x, y)
        })
        .collect();
    let all: Vec<f64> = raw.iter().flat_map(|r| r.2.iter().copied()).collect();
    let lo = all.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = all.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    raw.into_iter()
        .map(|(alg, x, y)| {
            let y = y
                .iter()
                .map(|v| if hi > lo { (v - lo) / (hi - lo) } else { 0.5 })
                .collect();
            PlotSeries::new(alg.name(), x, y, window)
        })
        .collect()
}

pub fn lr_sweep_series(records: &[RunRecord], window: usize) -> Vec<PlotSeries> {
    let runs: Vec<&RunRecord> = completed(records)
        .into_iter()
        .filter(|r| r.key.algorithm == Algorithm::Merl)
        .collect();
    let mut lrs: Vec<f64> = runs.iter().map(|r| r.key.learning_rate).collect();
    lrs.sort_by(f64::total_cmp);
    lrs.dedup();
    lrs.into_iter()
        .map(|lr| {
            let sel: Vec<&RunRecord> = runs.iter().copied().filter(|r| r.key.learning_rate == lr).collect();
            let (x, y) = seed_mean(&sel, Metric::Reward);
            PlotSeries::new(format!("LR={lr:e}"), x, y, window)
        })
        .collect()
}

/// Writes every figure into `out_dir`; returns the paths written.
pub fn emit_plots(records: &[RunRecord], window: usize, out_dir: &Path) -> std::io::Result<Vec<PathBuf>> {
    std::fs::create_dir_all(out_dir)?;
    let figures = [
        ("rewards", "Evaluation reward", "reward", reward_series(records, window)),
        (
            "normalized_rate",
            "Normalized sum rate",
            "normalized rate",
            normalized_series(records, Metric::SumRate, window),
        ),
        (
            "normalized_snr",
            "Normalized sensing SNR",
            "normalized SNR",
            normalized_series(records, Metric::Snr, window),
        ),
        ("lr_sweep", "MERL reward by learning rate", "reward", lr_sweep_series(records, window)),
    ];
    let mut written = Vec::new();
    for (name, title, y_label, series) in figures {
        let tsv = out_dir.join(format!("{name}.tsv"));
        std::fs::write(&tsv, write_tsv(&series))?;
        let svg = out_dir.join(format!("{name}.svg"));
        std::fs::write(&svg, render_svg(title, y_label, &series))?;
        written.push(tsv);
        written.push(svg);
    }
    Ok(written)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn window_one_is_identity() {
        let v = [3.0, -1.0, 2.5];
        assert_eq!(moving_average(&v, 1), v.to_vec());
    }

    #[test]
    fn ramp_window_ten() {
        let v: Vec<f64> = (1..=100).map(f64::from).collect();
        let ma = moving_average(&v, 10);
        assert_eq!(ma[0], 1.0);
        assert_eq!(ma[4], 3.0);
        assert_eq!(ma[9], 5.5);
        assert_eq!(ma[99], 95.5);
    }

    #[test]
    fn tsv_round_trip() {
        let s = vec![
            PlotSeries::new("a", vec![0, 1, 2], vec![0.1, 0.2 + 0.1, 1e-9], 2),
            PlotSeries::new("b", vec![5], vec![-4.0], 2),
        ];
        assert_eq!(parse_tsv(&write_tsv(&s)).unwrap(), s);
    }

    #[test]
    fn constant_series_axis() {
        let s = vec![PlotSeries::new("c", vec![0, 1, 2], vec![7.0; 3], 3)];
        let r = axis_range(&s).unwrap();
        assert_eq!((r.y_min, r.y_max), (7.0, 7.0));
        assert!(render_svg("t", "y", &s).contains("<desc>0 2 7 7</desc>"));
    }
}
