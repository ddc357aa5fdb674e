//! Line-of-sight channel model for antennas pinched onto a single dielectric
//! waveguide.
//!
//! Every electromagnetic quantity used elsewhere in the crate (channel
//! coefficients, in-guide phase shifts, per-user TDMA rates and the SNR seen
//! by a sensing target) is computed here. All functions are pure.
//!
//! Phases are computed from the *fractional* number of wavelengths travelled:
//! at 28 GHz a 100 m path is ~10^4 wavelengths, so the cycle count is reduced
//! modulo one before it is multiplied by 2π.

use std::f64::consts::TAU;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Speed of light in vacuum, m/s.
pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

/// Absolute slack (meters) allowed when comparing antenna gaps against the
/// minimum spacing. Covers rounding in `x + δ` style arithmetic only.
pub const SPACING_TOLERANCE_M: f64 = 1e-9;

/// Complex channel amplitude.
pub type ComplexGain = Complex64;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PhysicsError {
    #[error("observer and antenna coincide at ({x}, {y}, {z}); distance is zero")]
    CoincidentPoints { x: f64, y: f64, z: f64 },
    #[error("transmit power must be non-negative and finite, got {0} W")]
    InvalidPower(f64),
    #[error("user count must be at least 1")]
    NoUsers,
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
}

pub type Result<T> = std::result::Result<T, PhysicsError>;

/// A point in the deployment frame, meters. Users and targets sit at `z = 0`,
/// antennas at the waveguide height.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Position3D {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl Position3D {
    pub const fn new(x: f64, y: f64, z: f64) -> Self {
        Self { x, y, z }
    }

    /// A point on the ground plane.
    pub const fn ground(x: f64, y: f64) -> Self {
        Self { x, y, z: 0.0 }
    }

    pub fn distance(&self, other: &Position3D) -> f64 {
        let dx = self.x - other.x;
        let dy = self.y - other.y;
        let dz = self.z - other.z;
        (dx * dx + dy * dy + dz * dz).sqrt()
    }

    pub fn is_finite(&self) -> bool {
        self.x.is_finite() && self.y.is_finite() && self.z.is_finite()
    }
}

/// Carrier-dependent constants, all linear scale.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CarrierConfig {
    pub carrier_frequency_hz: f64,
    pub wavelength_m: f64,
    pub path_coefficient_m: f64,
    pub noise_power_w: f64,
}

impl CarrierConfig {
    pub fn new(carrier_frequency_hz: f64, noise_power_w: f64) -> Result<Self> {
        if !(carrier_frequency_hz.is_finite() && carrier_frequency_hz > 0.0) {
            return Err(PhysicsError::InvalidParameter(format!(
                "carrier frequency must be positive, got {carrier_frequency_hz}"
            )));
        }
        if !(noise_power_w.is_finite() && noise_power_w > 0.0) {
            return Err(PhysicsError::InvalidParameter(format!(
                "noise power must be positive, got {noise_power_w}"
            )));
        }
        Ok(Self {
            carrier_frequency_hz,
            wavelength_m: SPEED_OF_LIGHT / carrier_frequency_hz,
            path_coefficient_m: SPEED_OF_LIGHT / (4.0 * std::f64::consts::PI * carrier_frequency_hz),
            noise_power_w,
        })
    }

    pub fn from_dbm(carrier_frequency_hz: f64, noise_power_dbm: f64) -> Result<Self> {
        Self::new(carrier_frequency_hz, dbm_to_watts(noise_power_dbm))
    }
}

/// Geometry and propagation constants of the waveguide. The guide runs along
/// the x-axis at `y = feed_point.y`, `z = height_m`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WaveguideConfig {
    pub feed_point: Position3D,
    pub height_m: f64,
    pub effective_refractive_index: f64,
    pub guided_wavelength_m: f64,
    pub min_spacing_m: f64,
    pub x_min_m: f64,
    pub x_max_m: f64,
}

impl WaveguideConfig {
    pub fn new(
        carrier: &CarrierConfig,
        feed_x_m: f64,
        height_m: f64,
        effective_refractive_index: f64,
        min_spacing_m: f64,
        x_min_m: f64,
        x_max_m: f64,
    ) -> Result<Self> {
        if !(effective_refractive_index >= 1.0 && effective_refractive_index.is_finite()) {
            return Err(PhysicsError::InvalidParameter(format!(
                "effective refractive index must be >= 1, got {effective_refractive_index}"
            )));
        }
        if !(min_spacing_m > 0.0 && min_spacing_m.is_finite()) {
            return Err(PhysicsError::InvalidParameter(format!(
                "minimum spacing must be positive, got {min_spacing_m}"
            )));
        }
        if !(height_m.is_finite() && height_m > 0.0) {
            return Err(PhysicsError::InvalidParameter(format!(
                "waveguide height must be positive, got {height_m}"
            )));
        }
        if !(x_min_m.is_finite() && x_max_m.is_finite() && x_max_m > x_min_m) {
            return Err(PhysicsError::InvalidParameter(format!(
                "waveguide extent [{x_min_m}, {x_max_m}] is empty"
            )));
        }
        Ok(Self {
            feed_point: Position3D::new(feed_x_m, 0.0, height_m),
            height_m,
            effective_refractive_index,
            guided_wavelength_m: carrier.wavelength_m / effective_refractive_index,
            min_spacing_m,
            x_min_m,
            x_max_m,
        })
    }

    /// Position of an antenna pinched at `x`.
    pub fn antenna_position(&self, x: f64) -> Position3D {
        Position3D::new(x, self.feed_point.y, self.height_m)
    }

    /// Whether `n` antennas fit on the guide at the minimum spacing.
    pub fn fits(&self, n: usize) -> bool {
        n == 0 || self.x_max_m - self.x_min_m >= (n as f64 - 1.0) * self.min_spacing_m
    }
}

/// Ascending x-coordinates of the pinched antennas.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AntennaLayout {
    pub xs: Vec<f64>,
}

impl AntennaLayout {
    pub fn new(xs: Vec<f64>) -> Self {
        Self { xs }
    }

    pub fn len(&self) -> usize {
        self.xs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.xs.is_empty()
    }

    /// `n` antennas spread evenly over `[x_min, x_max]`, one in the middle
    /// when `n = 1`.
    pub fn evenly_spaced(n: usize, x_min: f64, x_max: f64) -> Self {
        let xs = match n {
            0 => Vec::new(),
            1 => vec![0.5 * (x_min + x_max)],
            _ => {
                let step = (x_max - x_min) / (n as f64 - 1.0);
                (0..n).map(|i| x_min + step * i as f64).collect()
            }
        };
        Self { xs }
    }

    pub fn within(&self, waveguide: &WaveguideConfig) -> bool {
        self.xs
            .iter()
            .all(|&x| x >= waveguide.x_min_m && x <= waveguide.x_max_m)
    }
}

/// Converts a power in dBm to watts.
pub fn dbm_to_watts(dbm: f64) -> f64 {
    10f64.powf((dbm - 30.0) / 10.0)
}

pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

pub fn linear_to_db(linear: f64) -> f64 {
    10.0 * linear.log10()
}

/// Fractional part of `length / wavelength`, in `[0, 1)`.
fn fractional_cycles(length: f64, wavelength: f64) -> f64 {
    let cycles = length / wavelength;
    let frac = cycles - cycles.floor();
    // `floor` of a value a hair below an integer can leave exactly 1.0
    if frac >= 1.0 {
        0.0
    } else {
        frac
    }
}

/// Unit phasor `e^{-j 2π cycles}`.
fn phasor(cycles: f64) -> Complex64 {
    let angle = -TAU * cycles;
    Complex64::new(angle.cos(), angle.sin())
}

/// Free-space spherical-wave coefficient `α e^{-j 2π r / λ} / r` between an
/// observation point and one antenna.
pub fn free_space_coeff(
    observer: &Position3D,
    antenna: &Position3D,
    carrier: &CarrierConfig,
) -> Result<ComplexGain> {
    let dist = observer.distance(antenna);
    if dist == 0.0 {
        return Err(PhysicsError::CoincidentPoints {
            x: observer.x,
            y: observer.y,
            z: observer.z,
        });
    }
    let cycles = fractional_cycles(dist, carrier.wavelength_m);
    Ok(phasor(cycles) * (carrier.path_coefficient_m / dist))
}

/// In-guide phase `2π |x - x_feed| / λ_0`, reduced to `[0, 2π)`.
pub fn phase_shift(antenna_x: f64, waveguide: &WaveguideConfig) -> f64 {
    let in_guide = (antenna_x - waveguide.feed_point.x).abs();
    TAU * fractional_cycles(in_guide, waveguide.guided_wavelength_m)
}

/// Superposition of all antenna contributions at `point`, each delayed by its
/// in-guide phase.
pub fn effective_gain(
    point: &Position3D,
    layout: &AntennaLayout,
    waveguide: &WaveguideConfig,
    carrier: &CarrierConfig,
) -> Result<ComplexGain> {
    let mut total = Complex64::new(0.0, 0.0);
    for &x in &layout.xs {
        let antenna = waveguide.antenna_position(x);
        let dist = point.distance(&antenna);
        if dist == 0.0 {
            return Err(PhysicsError::CoincidentPoints {
                x: point.x,
                y: point.y,
                z: point.z,
            });
        }
        let in_guide = (x - waveguide.feed_point.x).abs();
        // free-space and in-guide cycles are summed before the single
        // range reduction so no large angle is ever formed
        let cycles = fractional_cycles(dist, carrier.wavelength_m)
            + fractional_cycles(in_guide, waveguide.guided_wavelength_m);
        total += phasor(cycles) * (carrier.path_coefficient_m / dist);
    }
    Ok(total)
}

fn check_power(power_w: f64) -> Result<()> {
    if power_w.is_finite() && power_w >= 0.0 {
        Ok(())
    } else {
        Err(PhysicsError::InvalidPower(power_w))
    }
}

/// TDMA rate of one user in bits/s/Hz:
/// `(1/M) log2(1 + |G|^2 p / (N σ^2))`.
pub fn user_rate(
    user: &Position3D,
    layout: &AntennaLayout,
    power_w: f64,
    num_users: usize,
    waveguide: &WaveguideConfig,
    carrier: &CarrierConfig,
) -> Result<f64> {
    check_power(power_w)?;
    if num_users == 0 {
        return Err(PhysicsError::NoUsers);
    }
    if layout.is_empty() {
        return Ok(0.0);
    }
    let gain = effective_gain(user, layout, waveguide, carrier)?;
    let n = layout.len() as f64;
    let snr = gain.norm_sqr() * power_w / (n * carrier.noise_power_w);
    Ok(snr.ln_1p() / std::f64::consts::LN_2 / num_users as f64)
}

/// Linear SNR at a sensing target while `served_user` is being served with
/// `power_w`; the served user's own received power acts as interference.
pub fn sensing_snr(
    target: &Position3D,
    served_user: &Position3D,
    layout: &AntennaLayout,
    power_w: f64,
    waveguide: &WaveguideConfig,
    carrier: &CarrierConfig,
) -> Result<f64> {
    check_power(power_w)?;
    if layout.is_empty() {
        return Ok(0.0);
    }
    let n = layout.len() as f64;
    let at_target = effective_gain(target, layout, waveguide, carrier)?.norm_sqr() * power_w / n;
    let at_user = effective_gain(served_user, layout, waveguide, carrier)?.norm_sqr() * power_w / n;
    Ok(at_target / (at_user + carrier.noise_power_w))
}

/// Minimum-spacing check on a layout. Adjacent gaps suffice when the layout is
/// sorted; unsorted input is sorted first.
pub fn spacing_satisfied(layout: &AntennaLayout, delta_m: f64) -> bool {
    let sorted_already = layout.xs.windows(2).all(|w| w[0] <= w[1]);
    let gaps_ok = |xs: &[f64]| {
        xs.windows(2)
            .all(|w| w[1] - w[0] >= delta_m - SPACING_TOLERANCE_M)
    };
    if sorted_already {
        gaps_ok(&layout.xs)
    } else {
        let mut xs = layout.xs.clone();
        xs.sort_by(f64::total_cmp);
        gaps_ok(&xs)
    }
}
