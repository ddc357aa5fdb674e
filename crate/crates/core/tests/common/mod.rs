//! Independent reference computations shared by the integration tests.
#![allow(dead_code)]

use num_complex::Complex64;
use pinch_isac_core::physics::{AntennaLayout, CarrierConfig, Position3D, WaveguideConfig};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

pub mod gradcheck;

/// Per-antenna term built as a product of two phasors: free-space
/// `α/r · e^{-j2π r/λ}` times in-guide `e^{-jθ}`, each phase reduced with
/// `rem_euclid`.
pub fn oracle_gain(point: &Position3D, xs: &[f64], wg: &WaveguideConfig, carrier: &CarrierConfig) -> Complex64 {
    let mut re = 0.0;
    let mut im = 0.0;
    for &x in xs {
        let dx = point.x - x;
        let dy = point.y - wg.feed_point.y;
        let dz = point.z - wg.height_m;
        let r = (dx * dx + dy * dy + dz * dz).sqrt();
        let free = (r / carrier.wavelength_m).rem_euclid(1.0);
        let guide = ((x - wg.feed_point.x).abs() / wg.guided_wavelength_m).rem_euclid(1.0);
        let a = Complex64::from_polar(carrier.path_coefficient_m / r, -2.0 * std::f64::consts::PI * free);
        let b = Complex64::from_polar(1.0, -2.0 * std::f64::consts::PI * guide);
        let t = a * b;
        re += t.re;
        im += t.im;
    }
    Complex64::new(re, im)
}

pub fn oracle_rate(g: Complex64, p: f64, n: usize, m: usize, noise: f64) -> f64 {
    let s = (g.re * g.re + g.im * g.im) * p / (n as f64 * noise);
    (1.0 + s).log2() / m as f64
}

pub fn oracle_snr(gt: Complex64, gu: Complex64, p: f64, n: usize, noise: f64) -> f64 {
    let nt = (gt.re * gt.re + gt.im * gt.im) * p / n as f64;
    let nu = (gu.re * gu.re + gu.im * gu.im) * p / n as f64;
    nt / (nu + noise)
}

pub fn rel_err(a: f64, b: f64) -> f64 {
    if a == b {
        0.0
    } else {
        (a - b).abs() / a.abs().max(b.abs())
    }
}

pub fn rel_err_c(a: Complex64, b: Complex64) -> f64 {
    (a - b).norm() / a.norm().max(b.norm())
}

pub fn random_point(rng: &mut ChaCha8Rng, side: f64) -> Position3D {
    Position3D::ground(rng.random_range(0.0..side), rng.random_range(-side / 2.0..side / 2.0))
}

/// Ascending layout of `n` antennas with gaps of at least `delta`.
pub fn random_layout(rng: &mut ChaCha8Rng, n: usize, wg: &WaveguideConfig) -> AntennaLayout {
    loop {
        let mut xs: Vec<f64> = (0..n).map(|_| rng.random_range(wg.x_min_m..wg.x_max_m)).collect();
        xs.sort_by(f64::total_cmp);
        if xs.windows(2).all(|w| w[1] - w[0] >= wg.min_spacing_m) {
            return AntennaLayout::new(xs);
        }
    }
}

/// Double-double numbers (unevaluated sum hi + lo), about 106 bits.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Dd {
    pub hi: f64,
    pub lo: f64,
}

fn two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    let bb = s - a;
    (s, (a - (s - bb)) + (b - bb))
}

fn quick_two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    (s, b - (s - a))
}

fn two_prod(a: f64, b: f64) -> (f64, f64) {
    let p = a * b;
    (p, a.mul_add(b, -p))
}

impl Dd {
    pub fn from(v: f64) -> Self {
        Dd { hi: v, lo: 0.0 }
    }

    pub fn add(self, o: Dd) -> Dd {
        let (s, e) = two_sum(self.hi, o.hi);
        let (t, f) = two_sum(self.lo, o.lo);
        let (s, e) = quick_two_sum(s, e + t);
        let (hi, lo) = quick_two_sum(s, e + f);
        Dd { hi, lo }
    }

    pub fn neg(self) -> Dd {
        Dd { hi: -self.hi, lo: -self.lo }
    }

    pub fn sub(self, o: Dd) -> Dd {
        self.add(o.neg())
    }

    pub fn mul(self, o: Dd) -> Dd {
        let (p, e) = two_prod(self.hi, o.hi);
        let e = e + (self.hi * o.lo + self.lo * o.hi);
        let (hi, lo) = quick_two_sum(p, e);
        Dd { hi, lo }
    }

    pub fn div(self, o: Dd) -> Dd {
        let q1 = self.hi / o.hi;
        let r = self.sub(o.mul(Dd::from(q1)));
        let q2 = r.hi / o.hi;
        let r = r.sub(o.mul(Dd::from(q2)));
        let q3 = r.hi / o.hi;
        let (hi, lo) = quick_two_sum(q1, q2);
        Dd { hi, lo }.add(Dd::from(q3))
    }

    pub fn sqrt(self) -> Dd {
        if self.hi <= 0.0 {
            return Dd::from(0.0);
        }
        let x = self.hi.sqrt();
        let xd = Dd::from(x);
        // one Newton step: x + (a - x^2) / (2x)
        let r = self.sub(xd.mul(xd));
        xd.add(Dd::from(r.hi / (2.0 * x)))
    }

    pub fn floor(self) -> Dd {
        let hi = self.hi.floor();
        if hi == self.hi {
            let (hi, lo) = quick_two_sum(hi, self.lo.floor());
            Dd { hi, lo }
        } else {
            Dd { hi, lo: 0.0 }
        }
    }

    pub fn to_f64(self) -> f64 {
        self.hi + self.lo
    }
}

/// `2π` to double-double precision.
pub const TWO_PI_DD: Dd = Dd {
    hi: 6.283185307179586,
    lo: 2.4492935982947064e-16,
};

/// Free-space phase `-2π r/λ` reduced to `(-π, π]`, with `r` and `λ = c/f`
/// carried in double-double.
pub fn dd_free_space_phase(observer: &Position3D, antenna: &Position3D, carrier_hz: f64) -> f64 {
    let d = |a: f64, b: f64| Dd::from(a).sub(Dd::from(b));
    let (dx, dy, dz) = (d(observer.x, antenna.x), d(observer.y, antenna.y), d(observer.z, antenna.z));
    let r = dx.mul(dx).add(dy.mul(dy)).add(dz.mul(dz)).sqrt();
    let lambda = Dd::from(299_792_458.0).div(Dd::from(carrier_hz));
    let cycles = r.div(lambda);
    let frac = cycles.sub(cycles.floor()).to_f64();
    let phase = -std::f64::consts::TAU * frac;
    wrap(phase)
}

/// Angle wrapped into `(-π, π]`.
pub fn wrap(a: f64) -> f64 {
    let mut x = a.rem_euclid(std::f64::consts::TAU);
    if x > std::f64::consts::PI {
        x -= std::f64::consts::TAU;
    }
    x
}

pub fn angle_diff(a: f64, b: f64) -> f64 {
    wrap(a - b).abs()
}
