//! Exhaustive single-slot search over antenna layouts and a common transmit
//! power.
//!
//! Candidate antenna positions are `x_min + i * resolution`; a layout is any
//! ascending choice of `N` of them whose gaps are at least the minimum
//! spacing. Powers are `P0 * j / (levels - 1)`. The objective is the sum of
//! all users' rates with every user at the same power; optionally every
//! target's SNR (against the scenario's served user) must reach the
//! threshold.

use serde::Serialize;

use crate::env::SystemConfig;
use crate::physics::{self, AntennaLayout, Position3D, SPACING_TOLERANCE_M};

pub const MAX_EVALUATIONS: u128 = 10_000_000;

#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub users: Vec<Position3D>,
    pub targets: Vec<Position3D>,
    /// Index into `users` of the user whose channel interferes at targets.
    pub served_user: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OracleOptions {
    pub resolution_m: f64,
    pub power_levels: usize,
    pub enforce_snr: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OracleResult {
    pub layout: Vec<f64>,
    pub power_w: f64,
    pub sum_rate: f64,
    pub min_snr_linear: Option<f64>,
    pub evaluations: u64,
}

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum OracleError {
    #[error("search needs about {estimate} evaluations, more than the limit of {limit}; coarsen the grid")]
    Intractable { estimate: u128, limit: u128 },
    #[error("no layout and power satisfy the SNR constraint")]
    Infeasible,
    #[error("invalid oracle input: {0}")]
    Invalid(String),
}

/// Number of ascending `n`-subsets of `g` grid points (spacing `res`) with
/// every gap at least `delta`. Saturates instead of overflowing.
pub fn count_layouts(g: usize, n: usize, res: f64, delta: f64) -> u128 {
    if n == 0 {
        return 1;
    }
    // minimum index gap between neighbours
    let k = ((delta - SPACING_TOLERANCE_M) / res).ceil().max(1.0) as usize;
    // ways[i] = layouts of the current size ending at point i
    let mut ways = vec![1u128; g];
    for _ in 1..n {
        let mut prefix = vec![0u128; g + 1];
        for i in 0..g {
            prefix[i + 1] = prefix[i].saturating_add(ways[i]);
        }
        ways = (0..g).map(|i| if i >= k { prefix[i + 1 - k] } else { 0 }).collect();
    }
    ways.iter().fold(0u128, |a, &b| a.saturating_add(b))
}

fn grid(config: &SystemConfig, res: f64) -> Vec<f64> {
    let w = &config.waveguide;
    let steps = ((w.x_max_m - w.x_min_m) / res + 1e-9).floor() as usize;
    (0..=steps).map(|i| w.x_min_m + i as f64 * res).collect()
}

pub fn grid_search_oracle(
    scenario: &Scenario,
    config: &SystemConfig,
    options: &OracleOptions,
) -> Result<OracleResult, OracleError> {
    if !(options.resolution_m.is_finite() && options.resolution_m > 0.0) {
        return Err(OracleError::Invalid(format!("resolution {} must be positive", options.resolution_m)));
    }
    if options.power_levels < 2 {
        return Err(OracleError::Invalid("need at least two power levels".into()));
    }
    if scenario.users.is_empty() || scenario.served_user >= scenario.users.len() {
        return Err(OracleError::Invalid("need users and a valid served-user index".into()));
    }
    let points = grid(config, options.resolution_m);
    let n = config.num_antennas;
    let layouts = count_layouts(points.len(), n, options.resolution_m, config.waveguide.min_spacing_m);
    let estimate = layouts.saturating_mul(options.power_levels as u128);
    if estimate > MAX_EVALUATIONS {
        return Err(OracleError::Intractable {
            estimate,
            limit: MAX_EVALUATIONS,
        });
    }

    let m = scenario.users.len();
    let powers: Vec<f64> = (0..options.power_levels)
        .map(|j| config.max_user_power_w * j as f64 / (options.power_levels - 1) as f64)
        .collect();
    let noise = config.carrier.noise_power_w;
    let (wg, carrier) = (&config.waveguide, &config.carrier);
    let delta = wg.min_spacing_m;

    let mut best: Option<OracleResult> = None;
    let mut evaluations = 0u64;
    let mut idx: Vec<usize> = Vec::with_capacity(n);
    let mut visit = |xs: &[f64]| -> Result<(), OracleError> {
        let layout = AntennaLayout::new(xs.to_vec());
        let gain2 = |p: &Position3D| -> Result<f64, OracleError> {
            physics::effective_gain(p, &layout, wg, carrier)
                .map(|g| g.norm_sqr())
                .map_err(|e| OracleError::Invalid(e.to_string()))
        };
        let users: Vec<f64> = scenario.users.iter().map(gain2).collect::<Result<_, _>>()?;
        let targets: Vec<f64> = scenario.targets.iter().map(gain2).collect::<Result<_, _>>()?;
        let served = users[scenario.served_user];
        for &p in &powers {
            evaluations += 1;
            let q = p / n as f64;
            let sum_rate: f64 = users.iter().map(|g| (1.0 + g * q / noise).log2() / m as f64).sum();
            let min_snr = targets
                .iter()
                .map(|g| g * q / (served * q + noise))
                .fold(None, |a: Option<f64>, s| Some(a.map_or(s, |a| a.min(s))));
            if options.enforce_snr && min_snr.is_some_and(|s| s < config.snr_threshold_linear) {
                continue;
            }
            if best.as_ref().is_none_or(|b| sum_rate > b.sum_rate) {
                best = Some(OracleResult {
                    layout: xs.to_vec(),
                    power_w: p,
                    sum_rate,
                    min_snr_linear: min_snr,
                    evaluations: 0,
                });
            }
        }
        Ok(())
    };

    // depth-first enumeration of index tuples
    let mut xs = Vec::with_capacity(n);
    if n > 0 {
        idx.push(0);
    }
    while let Some(&last) = idx.last() {
        if last >= points.len() {
            idx.pop();
            if let Some(v) = idx.last_mut() {
                *v += 1;
            }
            continue;
        }
        let ok = idx.len() < 2 || points[last] - points[idx[idx.len() - 2]] >= delta - SPACING_TOLERANCE_M;
        if !ok {
            *idx.last_mut().unwrap() += 1;
            continue;
        }
        if idx.len() == n {
            xs.clear();
            xs.extend(idx.iter().map(|&i| points[i]));
            visit(&xs)?;
            *idx.last_mut().unwrap() += 1;
        } else {
            idx.push(last + 1);
        }
    }

    let mut best = best.ok_or(OracleError::Infeasible)?;
    best.evaluations = evaluations;
    Ok(best)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small(n: usize, m: usize) -> SystemConfig {
        let mut c = SystemConfig::default();
        c.num_antennas = n;
        c.num_users = m;
        c.num_targets = 0;
        c
    }

    #[test]
    fn layout_count_matches_binomial() {
        // gaps always feasible when resolution >= delta
        assert_eq!(count_layouts(10, 3, 1.0, 0.005), 120);
        assert_eq!(count_layouts(10, 1, 1.0, 0.005), 10);
        // minimum index gap of 2: choose 2 of 5 with gap >= 2
        assert_eq!(count_layouts(5, 2, 1.0, 2.0), 6);
    }

    #[test]
    fn refuses_huge_grids() {
        let c = SystemConfig::default();
        let s = Scenario {
            users: vec![Position3D::ground(10.0, 0.0)],
            targets: vec![],
            served_user: 0,
        };
        let err = grid_search_oracle(
            &s,
            &c,
            &OracleOptions {
                resolution_m: 0.01,
                power_levels: 10,
                enforce_snr: false,
            },
        )
        .unwrap_err();
        assert!(matches!(err, OracleError::Intractable { estimate, .. } if estimate > MAX_EVALUATIONS));
    }

    #[test]
    fn single_antenna_goes_over_user() {
        let c = small(1, 1);
        let s = Scenario {
            users: vec![Position3D::ground(42.3, 17.0)],
            targets: vec![],
            served_user: 0,
        };
        let r = grid_search_oracle(
            &s,
            &c,
            &OracleOptions {
                resolution_m: 0.5,
                power_levels: 5,
                enforce_snr: false,
            },
        )
        .unwrap();
        assert!((r.layout[0] - 42.3).abs() <= 0.5);
        assert_eq!(r.power_w, c.max_user_power_w);
        assert_eq!(r.evaluations, 301 * 5);
    }

    #[test]
    fn enumerated_count_matches_counter() {
        let c = small(2, 1);
        let s = Scenario {
            users: vec![Position3D::ground(3.0, 1.0)],
            targets: vec![],
            served_user: 0,
        };
        let r = grid_search_oracle(
            &s,
            &c,
            &OracleOptions {
                resolution_m: 10.0,
                power_levels: 2,
                enforce_snr: false,
            },
        )
        .unwrap();
        assert_eq!(r.evaluations as u128, count_layouts(16, 2, 10.0, c.waveguide.min_spacing_m) * 2);
    }
}
