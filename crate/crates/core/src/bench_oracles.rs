//! Ground-truth fields for desk-scale verification: the analytic sine-wave
//! benchmark, smooth random fields and synthetic SAR device surfaces.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::config_space::{mpe, ConfigSpace, Role};
use crate::error::{Error, Result};

/// Noise standard deviation of the sine-wave benchmark.
pub const SINE_NOISE_STD: f64 = 0.001;

/// `y·sin(2πy)` with `y = |x| / √2` on the unit square.
pub fn sine_wave(x: &[f64]) -> f64 {
    let y = (x.iter().map(|v| v * v).sum::<f64>()).sqrt() / std::f64::consts::SQRT_2;
    y * (std::f64::consts::TAU * y).sin()
}

/// MPE of the synthetic SAR scenarios: 30 % system and 15 % source uncertainty.
pub fn synthetic_mpe() -> f64 {
    mpe(0.30, 0.15)
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Standard-normal draw keyed on the point's coordinates and the seed, so the
/// value does not depend on evaluation order.
pub fn point_noise(x: &[f64], seed: u64) -> f64 {
    let mut h = splitmix64(seed);
    for v in x {
        h = splitmix64(h ^ v.to_bits());
    }
    StandardNormal.sample(&mut ChaCha8Rng::seed_from_u64(h))
}

/// Stationary gaussian-covariance random field realized with random Fourier
/// features: `std·√(2/m)·Σ cos(ωᵀu + φ)` over normalized coordinates `u`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RandomField {
    pub std: f64,
    pub frequencies: Vec<Vec<f64>>,
    pub phases: Vec<f64>,
}

pub const RANDOM_FEATURES: usize = 400;

impl RandomField {
    /// Covariance `std²·exp(−|Δu_i / ℓ_i|² / 2)`.
    pub fn new(length_scales: &[f64], std: f64, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let frequencies = (0..RANDOM_FEATURES)
            .map(|_| {
                length_scales
                    .iter()
                    .map(|&l| {
                        let z: f64 = StandardNormal.sample(&mut rng);
                        z / l
                    })
                    .collect()
            })
            .collect();
        let phases = (0..RANDOM_FEATURES)
            .map(|_| rng.random::<f64>() * std::f64::consts::TAU)
            .collect();
        Self { std, frequencies, phases }
    }

    pub fn eval(&self, u: &[f64]) -> f64 {
        let sum: f64 = self
            .frequencies
            .iter()
            .zip(&self.phases)
            .map(|(w, &p)| (w.iter().zip(u).map(|(a, b)| a * b).sum::<f64>() + p).cos())
            .sum();
        self.std * (2.0 / self.frequencies.len() as f64).sqrt() * sum
    }

    /// Range of the matching gaussian variogram model in units of `u` for a
    /// unit length scale.
    pub fn gaussian_range(length_scale: f64) -> f64 {
        2.0 * std::f64::consts::SQRT_2 * length_scale
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FaultPocket {
    /// Center in normalized `(x, y)` coordinates.
    pub center: [f64; 2],
    pub width: f64,
    pub height: f64,
    /// Dimensions carrying the pocket.
    pub axes: [usize; 2],
}

impl FaultPocket {
    /// Radius, in normalized units, of the pocket used by detection checks.
    pub fn radius(&self) -> f64 {
        1.5 * self.width
    }

    fn offset(&self, u: &[f64]) -> f64 {
        let dx = u[self.axes[0]] - self.center[0];
        let dy = u[self.axes[1]] - self.center[1];
        (dx * dx + dy * dy).sqrt()
    }

    fn bump(&self, u: &[f64]) -> f64 {
        let r = self.offset(u);
        self.height * (-(r * r) / (2.0 * self.width * self.width)).exp()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum FieldKind {
    SineWave,
    Constant { value: f64 },
    Random { field: RandomField },
    Fault { field: RandomField, pocket: FaultPocket },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DeviceProfile {
    Structured,
    Noisy,
    InjectedFault,
}

impl std::str::FromStr for DeviceProfile {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "structured" | "benign" => Ok(Self::Structured),
            "noisy" => Ok(Self::Noisy),
            "injected-fault" | "fault" => Ok(Self::InjectedFault),
            other => Err(Error::InvalidInput(format!("unknown device profile {other:?}"))),
        }
    }
}

/// A ground-truth field `Z(x) = f(x) + e` over a configuration space.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OracleField {
    pub domain: ConfigSpace,
    pub kind: FieldKind,
    pub noise_std: f64,
    pub seed: u64,
}

impl OracleField {
    pub fn sine_wave(seed: u64) -> Self {
        Self {
            domain: ConfigSpace::unit_cube(2),
            kind: FieldKind::SineWave,
            noise_std: SINE_NOISE_STD,
            seed,
        }
    }

    pub fn constant(domain: ConfigSpace, value: f64) -> Self {
        Self { domain, kind: FieldKind::Constant { value }, noise_std: 0.0, seed: 0 }
    }

    /// Gaussian random field over the normalized coordinates of `domain`.
    pub fn random(domain: ConfigSpace, length_scales: &[f64], std: f64, noise_std: f64, seed: u64) -> Self {
        let field = RandomField::new(length_scales, std, seed);
        Self { domain, kind: FieldKind::Random { field }, noise_std, seed }
    }

    pub fn normalize(&self, x: &[f64]) -> Vec<f64> {
        self.domain
            .dimensions
            .iter()
            .zip(x)
            .map(|(d, &v)| (v - d.lower) / d.width())
            .collect()
    }

    /// The noiseless part `f(x)`.
    pub fn deterministic(&self, x: &[f64]) -> f64 {
        match &self.kind {
            FieldKind::SineWave => sine_wave(x),
            FieldKind::Constant { value } => *value,
            FieldKind::Random { field } => field.eval(&self.normalize(x)),
            FieldKind::Fault { field, pocket } => {
                let u = self.normalize(x);
                field.eval(&u) + pocket.bump(&u)
            }
        }
    }

    /// `f(x) + e` with seeded, order-independent noise.
    pub fn eval(&self, x: &[f64]) -> f64 {
        let f = self.deterministic(x);
        if self.noise_std == 0.0 {
            f
        } else {
            f + self.noise_std * point_noise(x, self.seed)
        }
    }

    pub fn pocket(&self) -> Option<&FaultPocket> {
        match &self.kind {
            FieldKind::Fault { pocket, .. } => Some(pocket),
            _ => None,
        }
    }

    /// Whether `x` lies inside the injected fault pocket.
    pub fn in_pocket(&self, x: &[f64]) -> bool {
        self.pocket()
            .is_some_and(|p| p.offset(&self.normalize(x)) <= p.radius())
    }
}

/// Normalized length scale of each SAR dimension in the synthetic device.
fn role_length_scale(role: Role) -> f64 {
    match role {
        Role::Frequency => 0.35,
        Role::Distance => 0.5,
        Role::Angle => 0.6,
        Role::LocationX | Role::LocationY => 0.8,
        Role::Power => 1.0,
        Role::Par => 0.7,
        Role::Bandwidth => 0.9,
        Role::Generic => 0.5,
    }
}

pub const STRUCTURED_STD: f64 = 0.2;
pub const STRUCTURED_NOISE: f64 = 0.02;
pub const NOISY_STD: f64 = 0.05;
pub const NOISY_NOISE: f64 = 0.15;
pub const FAULT_WIDTH: f64 = 0.12;
/// Margin by which the pocket center exceeds the MPE.
pub const FAULT_MARGIN_DB: f64 = 1.0;

/// Synthetic deviation surface of a SAR measurement system.
///
/// `structured` is smooth and anisotropic with a small nugget, `noisy` is
/// nearly flat under dominant noise, and `injected-fault` adds a gaussian bump
/// in the `(x, y)` plane whose center exceeds the MPE.
pub fn synthetic_device(space: &ConfigSpace, profile: DeviceProfile, seed: u64) -> OracleField {
    let scales: Vec<f64> = space.dimensions.iter().map(|d| role_length_scale(d.role)).collect();
    let (std, noise) = match profile {
        DeviceProfile::Noisy => (NOISY_STD, NOISY_NOISE),
        _ => (STRUCTURED_STD, STRUCTURED_NOISE),
    };
    let mut oracle = OracleField::random(space.clone(), &scales, std, noise, seed);
    if profile == DeviceProfile::InjectedFault {
        let FieldKind::Random { field } = oracle.kind.clone() else {
            unreachable!("random field constructed above")
        };
        let axes = [
            space.role_index(Role::LocationX).unwrap_or(0),
            space.role_index(Role::LocationY).unwrap_or(1.min(space.dim() - 1)),
        ];
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed_fa17);
        let center = [rng.random_range(0.2..0.8), rng.random_range(0.2..0.8)];
        // evaluate the base field at a configuration centered in the pocket
        let mut u = vec![0.5; space.dim()];
        u[axes[0]] = center[0];
        u[axes[1]] = center[1];
        let height = (synthetic_mpe() + FAULT_MARGIN_DB - field.eval(&u)).max(synthetic_mpe() + FAULT_MARGIN_DB);
        oracle.kind = FieldKind::Fault {
            field,
            pocket: FaultPocket { center, width: FAULT_WIDTH, height, axes },
        };
    }
    oracle
}

/// Dense-grid ground truth of a low-dimensional field.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridOracle {
    pub resolution: usize,
    pub argmin: Vec<f64>,
    pub min: f64,
    pub argmax: Vec<f64>,
    pub max: f64,
    /// Grid points with `f ≤ lower`.
    pub sublevel: Vec<Vec<f64>>,
    /// Grid points with `f ≥ upper`.
    pub superlevel: Vec<Vec<f64>>,
}

pub const GRID_BUDGET: usize = 4_000_000;

/// Evaluates the noiseless field on a `resolution^n` grid spanning the domain.
pub fn grid_oracle(field: &OracleField, resolution: usize, lower: f64, upper: f64) -> Result<GridOracle> {
    let n = field.domain.dim();
    let total = resolution.checked_pow(n as u32).unwrap_or(usize::MAX);
    if n > 3 || resolution < 2 || total > GRID_BUDGET {
        return Err(Error::InvalidInput(format!(
            "grid of {resolution}^{n} points exceeds the budget of {GRID_BUDGET} (dimension <= 3)"
        )));
    }
    let lo = field.domain.lower();
    let hi = field.domain.upper();
    let mut out = GridOracle {
        resolution,
        argmin: Vec::new(),
        min: f64::INFINITY,
        argmax: Vec::new(),
        max: f64::NEG_INFINITY,
        sublevel: Vec::new(),
        superlevel: Vec::new(),
    };
    let mut idx = vec![0usize; n];
    for _ in 0..total {
        let x: Vec<f64> = (0..n)
            .map(|d| lo[d] + (hi[d] - lo[d]) * idx[d] as f64 / (resolution - 1) as f64)
            .collect();
        let v = field.deterministic(&x);
        if v < out.min {
            out.min = v;
            out.argmin = x.clone();
        }
        if v > out.max {
            out.max = v;
            out.argmax = x.clone();
        }
        if v <= lower {
            out.sublevel.push(x.clone());
        }
        if v >= upper {
            out.superlevel.push(x);
        }
        for i in idx.iter_mut() {
            *i += 1;
            if *i < resolution {
                break;
            }
            *i = 0;
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config_space::build_sar_array_space;
    use crate::stats;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;
    use rand::Rng;

    #[test]
    fn sine_wave_values() {
        assert_eq!(sine_wave(&[0.0, 0.0]), 0.0);
        assert_abs_diff_eq!(sine_wave(&[1.0, 1.0]), 0.0, epsilon = 1e-15);
        let y: f64 = 0.77;
        assert_abs_diff_eq!(sine_wave(&[0.77, 0.77]), y * (std::f64::consts::TAU * y).sin(), epsilon = 1e-15);
        assert_abs_diff_eq!(sine_wave(&[0.77, 0.77]), -0.764, epsilon = 1e-3);
    }

    #[test]
    fn sine_grid_oracle() {
        let f = OracleField::sine_wave(0);
        let g = grid_oracle(&f, 1000, -0.75, 0.75).unwrap();
        let dense_min = (0..=1_000_000)
            .map(|i| {
                let y = i as f64 * 1e-6;
                y * (std::f64::consts::TAU * y).sin()
            })
            .fold(f64::INFINITY, f64::min);
        assert_abs_diff_eq!(dense_min, -0.76625, epsilon = 1e-5);
        assert_abs_diff_eq!(g.min, dense_min, epsilon = 1e-4);
        let dense_max = (0..=1_000_000)
            .map(|i| {
                let y = i as f64 * 1e-6;
                y * (std::f64::consts::TAU * y).sin()
            })
            .fold(f64::NEG_INFINITY, f64::max);
        assert_abs_diff_eq!(dense_max, 0.28962, epsilon = 1e-5);
        assert_abs_diff_eq!(g.max, dense_max, epsilon = 1e-4);
        assert!(g.superlevel.is_empty());
        assert!(!g.sublevel.is_empty());
        for p in &g.sublevel {
            let r = stats::euclidean(p, &[0.0, 0.0]);
            assert!((r - 1.09).abs() < 0.1, "{r}");
        }
    }

    #[test]
    fn sublevel_monotone() {
        let f = OracleField::sine_wave(0);
        let a = grid_oracle(&f, 200, -0.70, 1.0).unwrap();
        let b = grid_oracle(&f, 200, -0.75, 1.0).unwrap();
        assert!(b.sublevel.len() < a.sublevel.len());
        assert!(b.sublevel.iter().all(|p| a.sublevel.contains(p)));
    }

    #[test]
    fn constant_field_extrema() {
        let f = OracleField::constant(ConfigSpace::unit_cube(3), 2.5);
        let g = grid_oracle(&f, 10, 0.0, 5.0).unwrap();
        assert_eq!((g.min, g.max), (2.5, 2.5));
    }

    #[test]
    fn grid_budget() {
        let f = OracleField::constant(ConfigSpace::unit_cube(4), 0.0);
        assert!(grid_oracle(&f, 10, 0.0, 1.0).is_err());
        let f = OracleField::constant(ConfigSpace::unit_cube(3), 0.0);
        assert!(grid_oracle(&f, 1000, 0.0, 1.0).is_err());
    }

    #[test]
    fn noise_is_reproducible() {
        let f = OracleField::sine_wave(42);
        let x = [0.3, 0.4];
        assert_eq!(f.eval(&x).to_bits(), f.eval(&x).to_bits());
        assert_ne!(f.eval(&x), OracleField::sine_wave(43).eval(&x));
        assert!((f.eval(&x) - f.deterministic(&x)).abs() < 0.01);
    }

    #[test]
    fn noise_is_standard_normal() {
        let draws: Vec<f64> = (0..5000).map(|i| point_noise(&[i as f64 * 0.001], 7)).collect();
        assert_abs_diff_eq!(stats::mean(&draws), 0.0, epsilon = 0.05);
        assert_abs_diff_eq!(stats::sample_std(&draws), 1.0, epsilon = 0.05);
    }

    #[test]
    fn random_field_variance() {
        let field = RandomField::new(&[0.2, 0.2], 0.5, 3);
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let vals: Vec<f64> = (0..4000).map(|_| field.eval(&[rng.random::<f64>() * 20.0, rng.random::<f64>() * 20.0])).collect();
        assert_abs_diff_eq!(stats::sample_std(&vals), 0.5, epsilon = 0.05);
    }

    #[test]
    fn fault_center_exceeds_mpe() {
        let space = build_sar_array_space();
        for seed in 0..20 {
            let f = synthetic_device(&space, DeviceProfile::InjectedFault, seed);
            let p = f.pocket().unwrap().clone();
            let mut x: Vec<f64> = space.dimensions.iter().map(|d| d.lower + 0.5 * d.width()).collect();
            for (k, &axis) in p.axes.iter().enumerate() {
                let d = &space.dimensions[axis];
                x[axis] = d.lower + p.center[k] * d.width();
            }
            assert!(f.deterministic(&x) > synthetic_mpe(), "seed {seed}");
            assert!(f.in_pocket(&x));
        }
    }

    #[test]
    fn profiles_parse() {
        assert_eq!("injected-fault".parse::<DeviceProfile>().unwrap(), DeviceProfile::InjectedFault);
        assert!("other".parse::<DeviceProfile>().is_err());
    }

    proptest! {
        #[test]
        fn deterministic_without_noise(seed in any::<u64>(), a in 0.0f64..1.0, b in 0.0f64..1.0) {
            let f = OracleField::random(ConfigSpace::unit_cube(2), &[0.3, 0.3], 1.0, 0.0, seed);
            prop_assert_eq!(f.eval(&[a, b]).to_bits(), f.eval(&[a, b]).to_bits());
        }
    }
}
