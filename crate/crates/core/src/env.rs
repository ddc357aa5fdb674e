//! Slot-by-slot decision environment for joint antenna placement and power
//! allocation.
//!
//! Each slot the agent moves the pinched antennas along the waveguide and sets
//! a transmit power per user. The environment projects the decision onto the
//! feasible set (minimum spacing, waveguide extent, per-user power box, energy
//! budget), evaluates the TDMA rates and the target SNR, and advances user
//! mobility. User `t mod M` is the one served in slot `t`.
//!
//! Deployment frame: users and targets live in `x ∈ [0, L]`, `y ∈ [-L/2, L/2]`
//! on the ground; the waveguide runs along the x-axis at `y = 0`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::physics::{
    self, db_to_linear, linear_to_db, AntennaLayout, CarrierConfig, PhysicsError, Position3D,
    WaveguideConfig,
};

/// Random stream owned by one environment instance.
pub type EnvRng = ChaCha8Rng;

#[derive(Debug, Error)]
pub enum EnvError {
    #[error("invalid system config: {0}")]
    InvalidConfig(String),
    #[error("episode already finished at slot {slot}; call reset first")]
    EpisodeFinished { slot: usize },
    #[error("action has {got} components, expected {expected}")]
    ActionDimension { expected: usize, got: usize },
    #[error("observation has {got} components, expected {expected}")]
    ObservationDimension { expected: usize, got: usize },
    #[error(transparent)]
    Physics(#[from] PhysicsError),
}

pub type Result<T> = std::result::Result<T, EnvError>;

/// Who moves the users between slots.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MobilityMode {
    /// Users take a bounded random step drawn by the environment after each
    /// slot. The action covers antennas and powers only.
    EnvMobility,
    /// User displacements and the slot energy are part of the action.
    PaperLiteral,
}

/// Scale on which the sensing SNR enters the reward penalty.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SnrDomain {
    Db,
    Linear,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SystemConfig {
    pub num_antennas: usize,
    pub num_users: usize,
    pub num_targets: usize,
    pub slots_per_episode: usize,
    pub slot_duration_s: f64,
    pub energy_budget_j: f64,
    pub max_user_power_w: f64,
    pub snr_threshold_linear: f64,
    pub reward_weight: f64,
    pub snr_domain: SnrDomain,
    /// Lower clamp applied to the SNR in dB before it enters the reward, so a
    /// silent slot yields a finite penalty.
    pub snr_floor_db: f64,
    pub area_side_m: f64,
    pub max_antenna_step_m: f64,
    pub max_user_step_m: f64,
    pub mobility: MobilityMode,
    pub carrier: CarrierConfig,
    pub waveguide: WaveguideConfig,
}

impl Default for SystemConfig {
    fn default() -> Self {
        let carrier = CarrierConfig::from_dbm(28e9, -90.0).expect("valid carrier");
        let waveguide = WaveguideConfig::new(
            &carrier,
            0.0,
            3.0,
            1.4,
            carrier.wavelength_m / 2.0,
            0.0,
            150.0,
        )
        .expect("valid waveguide");
        let (m, t, p0, dt) = (6, 100, 0.5, 1.0);
        Self {
            num_antennas: 3,
            num_users: m,
            num_targets: 1,
            slots_per_episode: t,
            slot_duration_s: dt,
            energy_budget_j: 0.6 * m as f64 * t as f64 * p0 * dt,
            max_user_power_w: p0,
            snr_threshold_linear: db_to_linear(10.0),
            reward_weight: 0.1,
            snr_domain: SnrDomain::Db,
            snr_floor_db: -40.0,
            area_side_m: 150.0,
            max_antenna_step_m: 5.0,
            max_user_step_m: 1.0,
            mobility: MobilityMode::EnvMobility,
            carrier,
            waveguide,
        }
    }
}

impl SystemConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(EnvError::InvalidConfig(msg));
        if self.num_antennas == 0 {
            return bad("num_antennas must be at least 1".into());
        }
        if self.num_users == 0 {
            return bad("num_users must be at least 1".into());
        }
        if self.slots_per_episode == 0 {
            return bad("slots_per_episode must be at least 1".into());
        }
        let positive = [
            ("slot_duration_s", self.slot_duration_s),
            ("energy_budget_j", self.energy_budget_j),
            ("max_user_power_w", self.max_user_power_w),
            ("snr_threshold_linear", self.snr_threshold_linear),
            ("area_side_m", self.area_side_m),
            ("max_antenna_step_m", self.max_antenna_step_m),
        ];
        for (name, v) in positive {
            if !(v.is_finite() && v > 0.0) {
                return bad(format!("{name} must be positive and finite, got {v}"));
            }
        }
        if !(self.reward_weight.is_finite() && self.reward_weight >= 0.0) {
            return bad(format!("reward_weight must be >= 0, got {}", self.reward_weight));
        }
        if !(self.max_user_step_m.is_finite() && self.max_user_step_m >= 0.0) {
            return bad(format!("max_user_step_m must be >= 0, got {}", self.max_user_step_m));
        }
        if !self.snr_floor_db.is_finite() {
            return bad("snr_floor_db must be finite".into());
        }
        let w = &self.waveguide;
        if w.x_min_m < 0.0 || w.x_max_m > self.area_side_m {
            return bad(format!(
                "waveguide extent [{}, {}] must lie within [0, {}]",
                w.x_min_m, w.x_max_m, self.area_side_m
            ));
        }
        if !w.fits(self.num_antennas) {
            return bad(format!(
                "waveguide of length {} m cannot host {} antennas at spacing {} m",
                w.x_max_m - w.x_min_m,
                self.num_antennas,
                w.min_spacing_m
            ));
        }
        Ok(())
    }

    /// Length of the raw action vector for this config.
    pub fn action_dim(&self) -> usize {
        match self.mobility {
            MobilityMode::EnvMobility => self.num_antennas + self.num_users,
            MobilityMode::PaperLiteral => self.num_antennas + 3 * self.num_users + 1,
        }
    }

    /// Length of the flattened observation, see [`flatten_state`].
    pub fn observation_dim(&self) -> usize {
        self.num_antennas + 2 * self.num_users + 2 * self.num_targets + 2 + self.num_users
    }

    fn half_side(&self) -> f64 {
        0.5 * self.area_side_m
    }

    fn clamp_to_area(&self, p: Position3D) -> Position3D {
        let h = self.half_side();
        Position3D::ground(p.x.clamp(0.0, self.area_side_m), p.y.clamp(-h, h))
    }

    fn in_area(&self, p: &Position3D) -> bool {
        let h = self.half_side();
        p.z == 0.0 && (0.0..=self.area_side_m).contains(&p.x) && (-h..=h).contains(&p.y)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnvState {
    pub antenna_layout: AntennaLayout,
    pub user_positions: Vec<Position3D>,
    pub target_positions: Vec<Position3D>,
    pub remaining_energy_j: f64,
    pub slot_index: usize,
}

impl EnvState {
    pub fn served_user(&self, config: &SystemConfig) -> usize {
        self.slot_index % config.num_users
    }

    pub fn is_terminal(&self, config: &SystemConfig) -> bool {
        self.slot_index >= config.slots_per_episode || self.remaining_energy_j <= 0.0
    }

    /// Checks every state invariant: spacing, extents, area and energy range.
    pub fn is_valid(&self, config: &SystemConfig) -> bool {
        let w = &config.waveguide;
        self.antenna_layout.len() == config.num_antennas
            && self.antenna_layout.xs.windows(2).all(|p| p[0] < p[1])
            && physics::spacing_satisfied(&self.antenna_layout, w.min_spacing_m)
            && self.antenna_layout.within(w)
            && self.user_positions.len() == config.num_users
            && self.target_positions.len() == config.num_targets
            && self.user_positions.iter().all(|p| config.in_area(p))
            && self.target_positions.iter().all(|p| config.in_area(p))
            && (0.0..=config.energy_budget_j).contains(&self.remaining_energy_j)
            && self.slot_index <= config.slots_per_episode
    }
}

/// A decision after projection onto the feasible set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnvAction {
    pub antenna_deltas: Vec<f64>,
    /// Only used in [`MobilityMode::PaperLiteral`].
    pub user_deltas: Vec<(f64, f64)>,
    pub user_powers_w: Vec<f64>,
    /// Only used in [`MobilityMode::PaperLiteral`].
    pub slot_energy_j: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ConstraintReport {
    pub spacing_projected: bool,
    pub power_clipped: bool,
    /// Powers were scaled down so the slot draw fits the remaining budget.
    pub energy_scaled: bool,
    pub energy_exhausted: bool,
    /// `min_k (Γ_k - Γ_th)` on the reward's SNR scale; negative means the
    /// sensing requirement was missed. Zero when there are no targets.
    pub snr_violation_margin: f64,
}

impl ConstraintReport {
    pub fn snr_violated(&self) -> bool {
        self.snr_violation_margin < 0.0
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepOutcome {
    pub reward: f64,
    pub next_state: EnvState,
    pub done: bool,
    /// The episode ended because the budget ran out, not because of the
    /// horizon. Learners cut the bootstrap only on this.
    pub terminal: bool,
    pub served_user_index: usize,
    pub per_user_rates: Vec<f64>,
    pub sum_rate: f64,
    pub max_rate: f64,
    pub per_target_snr_linear: Vec<f64>,
    /// `mean_k (Γ_k - Γ_th)` on the configured scale, before weighting.
    pub sensing_term: f64,
    pub applied_powers_w: Vec<f64>,
    pub energy_drawn_j: f64,
    pub constraint_report: ConstraintReport,
}

fn uniform_in_area(config: &SystemConfig, rng: &mut EnvRng) -> Position3D {
    let h = config.half_side();
    Position3D::ground(
        rng.random_range(0.0..=config.area_side_m),
        rng.random_range(-h..=h),
    )
}

/// Fresh episode state plus the environment's random stream. Users and
/// targets are placed uniformly in the square; antennas start evenly spaced
/// along the waveguide.
pub fn reset(config: &SystemConfig, seed: u64) -> Result<(EnvState, EnvRng)> {
    config.validate()?;
    let mut rng = EnvRng::seed_from_u64(seed);
    let user_positions = (0..config.num_users)
        .map(|_| uniform_in_area(config, &mut rng))
        .collect();
    let target_positions = (0..config.num_targets)
        .map(|_| uniform_in_area(config, &mut rng))
        .collect();
    let w = &config.waveguide;
    let state = EnvState {
        antenna_layout: AntennaLayout::evenly_spaced(config.num_antennas, w.x_min_m, w.x_max_m),
        user_positions,
        target_positions,
        remaining_energy_j: config.energy_budget_j,
        slot_index: 0,
    };
    Ok((state, rng))
}

/// Projects antenna coordinates onto `{ascending, gaps >= δ, inside extent}`.
///
/// Feasible input is returned unchanged. Otherwise: sort, push right so every
/// gap is at least δ, shift back to the original mean, then clamp into the
/// extent with a left-to-right and a right-to-left pass.
pub fn project_layout(xs: &[f64], waveguide: &WaveguideConfig) -> Vec<f64> {
    let delta = waveguide.min_spacing_m;
    let (lo, hi) = (waveguide.x_min_m, waveguide.x_max_m);
    let mut out: Vec<f64> = xs.iter().map(|&x| if x.is_finite() { x } else { lo }).collect();
    let feasible = out.windows(2).all(|w| w[0] < w[1])
        && physics::spacing_satisfied(&AntennaLayout::new(out.clone()), delta)
        && out.iter().all(|&x| x >= lo && x <= hi);
    if feasible || out.is_empty() {
        return out;
    }

    out.sort_by(f64::total_cmp);
    let n = out.len() as f64;
    let mean_before = out.iter().sum::<f64>() / n;
    for i in 1..out.len() {
        out[i] = out[i].max(out[i - 1] + delta);
    }
    let mean_after = out.iter().sum::<f64>() / n;
    let shift = mean_before - mean_after;
    for x in &mut out {
        *x += shift;
    }

    if out[0] < lo {
        out[0] = lo;
    }
    for i in 1..out.len() {
        out[i] = out[i].max(out[i - 1] + delta);
    }
    let last = out.len() - 1;
    out[last] = out[last].min(hi);
    for i in (0..last).rev() {
        out[i] = out[i].min(out[i + 1] - delta);
    }
    // the backward pass can undercut x_min by rounding when the guide is
    // exactly (N-1)δ long
    if out[0] < lo {
        out[0] = lo;
    }
    out
}

fn unit(v: f64) -> f64 {
    if v.is_nan() {
        0.0
    } else {
        v.clamp(-1.0, 1.0)
    }
}

/// Maps a raw agent output in `[-1, 1]^d` to a feasible decision.
///
/// Raw layout: `N` antenna moves, then `M` powers; paper-literal mode appends
/// `2M` user moves (x, y interleaved) and one slot-energy component.
pub fn project_action(raw: &[f64], state: &EnvState, config: &SystemConfig) -> Result<EnvAction> {
    let expected = config.action_dim();
    if raw.len() != expected {
        return Err(EnvError::ActionDimension {
            expected,
            got: raw.len(),
        });
    }
    let (n, m) = (config.num_antennas, config.num_users);
    let current = &state.antenna_layout.xs;
    let moved: Vec<f64> = current
        .iter()
        .zip(&raw[..n])
        .map(|(&x, &r)| x + unit(r) * config.max_antenna_step_m)
        .collect();
    let projected = project_layout(&moved, &config.waveguide);
    let antenna_deltas = projected.iter().zip(current).map(|(p, c)| p - c).collect();

    let user_powers_w = raw[n..n + m]
        .iter()
        .map(|&r| 0.5 * (unit(r) + 1.0) * config.max_user_power_w)
        .collect();

    let (user_deltas, slot_energy_j) = match config.mobility {
        MobilityMode::EnvMobility => (Vec::new(), None),
        MobilityMode::PaperLiteral => {
            let moves = raw[n + m..n + 3 * m]
                .chunks_exact(2)
                .map(|c| (unit(c[0]) * config.max_user_step_m, unit(c[1]) * config.max_user_step_m))
                .collect();
            let full = m as f64 * config.max_user_power_w * config.slot_duration_s;
            let energy = 0.5 * (unit(raw[n + 3 * m]) + 1.0) * full;
            (moves, Some(energy))
        }
    };

    Ok(EnvAction {
        antenna_deltas,
        user_deltas,
        user_powers_w,
        slot_energy_j,
    })
}

fn random_disc_step(radius: f64, rng: &mut EnvRng) -> (f64, f64) {
    if radius == 0.0 {
        return (0.0, 0.0);
    }
    let r = radius * rng.random::<f64>().sqrt();
    let phi = rng.random_range(0.0..std::f64::consts::TAU);
    (r * phi.cos(), r * phi.sin())
}

/// Advances one slot.
///
/// Rates and SNR are evaluated with the post-move antenna layout at the
/// users' current positions. In env-mobility mode users then take their random
/// step; in paper-literal mode the action's user moves are applied first.
pub fn step(
    state: &EnvState,
    action: &EnvAction,
    config: &SystemConfig,
    rng: &mut EnvRng,
) -> Result<StepOutcome> {
    if state.is_terminal(config) {
        return Err(EnvError::EpisodeFinished {
            slot: state.slot_index,
        });
    }
    let (n, m) = (config.num_antennas, config.num_users);
    if action.antenna_deltas.len() != n {
        return Err(EnvError::ActionDimension {
            expected: n,
            got: action.antenna_deltas.len(),
        });
    }
    if action.user_powers_w.len() != m {
        return Err(EnvError::ActionDimension {
            expected: m,
            got: action.user_powers_w.len(),
        });
    }
    let mut report = ConstraintReport::default();

    // antennas
    let step_cap = config.max_antenna_step_m;
    let moved: Vec<f64> = state
        .antenna_layout
        .xs
        .iter()
        .zip(&action.antenna_deltas)
        .map(|(&x, &d)| {
            let d = if d.is_finite() { d } else { 0.0 };
            x + d.clamp(-step_cap, step_cap)
        })
        .collect();
    let xs = project_layout(&moved, &config.waveguide);
    report.spacing_projected = xs != moved;
    let layout = AntennaLayout::new(xs);

    // users (paper-literal: the action moves them before the slot)
    let mut users = state.user_positions.clone();
    if config.mobility == MobilityMode::PaperLiteral {
        let cap = config.max_user_step_m;
        for (u, &(dx, dy)) in users.iter_mut().zip(&action.user_deltas) {
            let dx = if dx.is_finite() { dx.clamp(-cap, cap) } else { 0.0 };
            let dy = if dy.is_finite() { dy.clamp(-cap, cap) } else { 0.0 };
            *u = config.clamp_to_area(Position3D::ground(u.x + dx, u.y + dy));
        }
    }

    // powers: box, optional slot-energy reconciliation, then the budget
    let p0 = config.max_user_power_w;
    let mut powers: Vec<f64> = action
        .user_powers_w
        .iter()
        .map(|&p| {
            let clipped = if p.is_finite() { p.clamp(0.0, p0) } else { 0.0 };
            if clipped != p {
                report.power_clipped = true;
            }
            clipped
        })
        .collect();
    if let (MobilityMode::PaperLiteral, Some(target)) = (config.mobility, action.slot_energy_j) {
        let requested: f64 = powers.iter().sum::<f64>() * config.slot_duration_s;
        if requested > 0.0 && target.is_finite() && target >= 0.0 {
            let scale = target / requested;
            for p in &mut powers {
                let scaled = *p * scale;
                if scaled > p0 {
                    report.power_clipped = true;
                }
                *p = scaled.min(p0);
            }
        }
    }
    let mut draw: f64 = powers.iter().sum::<f64>() * config.slot_duration_s;
    let mut remaining = state.remaining_energy_j;
    if draw >= remaining && draw > 0.0 {
        if draw > remaining {
            let scale = remaining / draw;
            for p in &mut powers {
                *p *= scale;
            }
            report.energy_scaled = true;
        }
        draw = remaining;
        remaining = 0.0;
        report.energy_exhausted = true;
    } else {
        remaining -= draw;
    }

    // slot metrics
    let served = state.served_user(config);
    let wg = &config.waveguide;
    let carrier = &config.carrier;
    let per_user_rates = users
        .iter()
        .zip(&powers)
        .map(|(u, &p)| physics::user_rate(u, &layout, p, m, wg, carrier))
        .collect::<std::result::Result<Vec<_>, _>>()?;
    let sum_rate = per_user_rates.iter().sum();
    let max_rate = per_user_rates.iter().copied().fold(0.0, f64::max);
    let per_target_snr_linear = state
        .target_positions
        .iter()
        .map(|t| physics::sensing_snr(t, &users[served], &layout, powers[served], wg, carrier))
        .collect::<std::result::Result<Vec<_>, _>>()?;

    let (sensing_term, margin) = sensing_penalty(&per_target_snr_linear, config);
    report.snr_violation_margin = margin;
    let reward = max_rate + config.reward_weight * sensing_term;

    if config.mobility == MobilityMode::EnvMobility {
        for u in &mut users {
            let (dx, dy) = random_disc_step(config.max_user_step_m, rng);
            *u = config.clamp_to_area(Position3D::ground(u.x + dx, u.y + dy));
        }
    }

    let next_state = EnvState {
        antenna_layout: layout,
        user_positions: users,
        target_positions: state.target_positions.clone(),
        remaining_energy_j: remaining,
        slot_index: state.slot_index + 1,
    };
    let terminal = report.energy_exhausted;
    let done = next_state.slot_index >= config.slots_per_episode || terminal;

    Ok(StepOutcome {
        reward,
        next_state,
        done,
        terminal,
        served_user_index: served,
        per_user_rates,
        sum_rate,
        max_rate,
        per_target_snr_linear,
        sensing_term,
        applied_powers_w: powers,
        energy_drawn_j: draw,
        constraint_report: report,
    })
}

/// SNR value on the reward's scale.
pub fn snr_reward_scale(snr_linear: f64, config: &SystemConfig) -> f64 {
    match config.snr_domain {
        SnrDomain::Linear => snr_linear,
        SnrDomain::Db => {
            if snr_linear > 0.0 {
                linear_to_db(snr_linear).max(config.snr_floor_db)
            } else {
                config.snr_floor_db
            }
        }
    }
}

/// Returns `(mean_k (Γ_k - Γ_th), min_k (Γ_k - Γ_th))` on the reward scale,
/// both zero without targets.
fn sensing_penalty(snrs: &[f64], config: &SystemConfig) -> (f64, f64) {
    if snrs.is_empty() {
        return (0.0, 0.0);
    }
    let threshold = match config.snr_domain {
        SnrDomain::Linear => config.snr_threshold_linear,
        SnrDomain::Db => linear_to_db(config.snr_threshold_linear),
    };
    let gaps: Vec<f64> = snrs
        .iter()
        .map(|&s| snr_reward_scale(s, config) - threshold)
        .collect();
    let mean = gaps.iter().sum::<f64>() / gaps.len() as f64;
    let min = gaps.iter().copied().fold(f64::INFINITY, f64::min);
    (mean, min)
}

/// Encodes a state as a fixed-length vector with every component in [-1, 1].
///
/// Layout, in order:
/// - `N` antenna x-coordinates
/// - `M` user (x, y) pairs
/// - `K` target (x, y) pairs
/// - remaining energy as a fraction of the budget
/// - slot progress `2t/T - 1`
/// - `M`-way one-hot of the served user
///
/// Positions map the square onto `[-1, 1]^2`, so its center encodes to the
/// origin.
pub fn flatten_state(state: &EnvState, config: &SystemConfig) -> Vec<f64> {
    let h = config.half_side();
    let ex = |x: f64| (x - h) / h;
    let ey = |y: f64| y / h;
    let mut out = Vec::with_capacity(config.observation_dim());
    out.extend(state.antenna_layout.xs.iter().map(|&x| ex(x)));
    for p in state.user_positions.iter().chain(&state.target_positions) {
        out.push(ex(p.x));
        out.push(ey(p.y));
    }
    out.push(state.remaining_energy_j / config.energy_budget_j);
    out.push(2.0 * state.slot_index as f64 / config.slots_per_episode as f64 - 1.0);
    let served = state.served_user(config);
    out.extend((0..config.num_users).map(|m| if m == served { 1.0 } else { 0.0 }));
    out
}

/// Inverse of [`flatten_state`].
pub fn unflatten_state(obs: &[f64], config: &SystemConfig) -> Result<EnvState> {
    let expected = config.observation_dim();
    if obs.len() != expected {
        return Err(EnvError::ObservationDimension {
            expected,
            got: obs.len(),
        });
    }
    let h = config.half_side();
    let dx = |v: f64| v * h + h;
    let dy = |v: f64| v * h;
    let (n, m, k) = (config.num_antennas, config.num_users, config.num_targets);
    let xs = obs[..n].iter().map(|&v| dx(v)).collect();
    let points = |slice: &[f64]| -> Vec<Position3D> {
        slice
            .chunks_exact(2)
            .map(|c| Position3D::ground(dx(c[0]), dy(c[1])))
            .collect()
    };
    let user_positions = points(&obs[n..n + 2 * m]);
    let target_positions = points(&obs[n + 2 * m..n + 2 * m + 2 * k]);
    let base = n + 2 * m + 2 * k;
    let remaining_energy_j = obs[base] * config.energy_budget_j;
    let slot_index = ((obs[base + 1] + 1.0) * 0.5 * config.slots_per_episode as f64).round() as usize;
    Ok(EnvState {
        antenna_layout: AntennaLayout::new(xs),
        user_positions,
        target_positions,
        remaining_energy_j,
        slot_index,
    })
}

/// Owning wrapper around [`reset`]/[`step`] that keeps the state and the
/// random stream together.
#[derive(Debug, Clone)]
pub struct PinchingEnv {
    config: SystemConfig,
    state: EnvState,
    rng: EnvRng,
}

impl PinchingEnv {
    pub fn new(config: SystemConfig, seed: u64) -> Result<Self> {
        let (state, rng) = reset(&config, seed)?;
        Ok(Self { config, state, rng })
    }

    pub fn reset(&mut self, seed: u64) -> Result<&EnvState> {
        let (state, rng) = reset(&self.config, seed)?;
        self.state = state;
        self.rng = rng;
        Ok(&self.state)
    }

    pub fn config(&self) -> &SystemConfig {
        &self.config
    }

    pub fn state(&self) -> &EnvState {
        &self.state
    }

    pub fn observation(&self) -> Vec<f64> {
        flatten_state(&self.state, &self.config)
    }

    pub fn is_done(&self) -> bool {
        self.state.is_terminal(&self.config)
    }

    pub fn step(&mut self, action: &EnvAction) -> Result<StepOutcome> {
        let outcome = step(&self.state, action, &self.config, &mut self.rng)?;
        self.state = outcome.next_state.clone();
        Ok(outcome)
    }

    /// Projects a raw `[-1, 1]^d` vector and steps with it.
    pub fn step_raw(&mut self, raw: &[f64]) -> Result<StepOutcome> {
        let action = project_action(raw, &self.state, &self.config)?;
        self.step(&action)
    }
}
