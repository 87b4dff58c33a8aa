//! The validation domain: a product of per-dimension intervals with
//! meaningful-value rasters, source validity rules and input-power tables.
//!
//! Two built-in spaces cover SAR measurement-system validation: the
//! eight-dimensional array-system space and the six-dimensional
//! scanning-system space (no `x`/`y` location). Generic continuous spaces
//! (e.g. the unit square of the analytic benchmark) are built with
//! [`ConfigSpace::continuous`].

use std::ops::{Deref, DerefMut};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Version of the serialized [`ConfigSpace`] document.
pub const SPACE_FORMAT_VERSION: u32 = 1;

/// Number of one-dB power levels above `P_in,min` (a 20 dB span).
pub const POWER_STEPS: u32 = 20;

/// Upper end of the power index domain `[0, 21]`.
pub const POWER_INDEX_UPPER: f64 = (POWER_STEPS + 1) as f64;

const RASTER_EPS: f64 = 1e-9;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Treatment {
    Continuous,
    DiscreteRaster,
    IndexBased,
}

/// What a dimension means physically. Snapping and source resolution key
/// off the role, never the name.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Role {
    Frequency,
    Distance,
    Angle,
    LocationX,
    LocationY,
    Power,
    Par,
    Bandwidth,
    Generic,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Dimension {
    pub name: String,
    pub role: Role,
    pub lower: f64,
    pub upper: f64,
    pub treatment: Treatment,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub raster: Option<Vec<f64>>,
}

impl Dimension {
    pub fn new(
        name: impl Into<String>,
        role: Role,
        lower: f64,
        upper: f64,
        treatment: Treatment,
        raster: Option<Vec<f64>>,
    ) -> Result<Self> {
        let dim = Self {
            name: name.into(),
            role,
            lower,
            upper,
            treatment,
            raster,
        };
        dim.validate()?;
        Ok(dim)
    }

    pub fn continuous(name: impl Into<String>, lower: f64, upper: f64) -> Result<Self> {
        Self::new(name, Role::Generic, lower, upper, Treatment::Continuous, None)
    }

    pub fn width(&self) -> f64 {
        self.upper - self.lower
    }

    fn validate(&self) -> Result<()> {
        if !(self.lower.is_finite() && self.upper.is_finite() && self.lower < self.upper) {
            return Err(Error::InvalidInput(format!(
                "dimension {}: bounds [{}, {}] must satisfy lower < upper",
                self.name, self.lower, self.upper
            )));
        }
        if let Some(raster) = &self.raster {
            if raster.is_empty() {
                return Err(Error::InvalidInput(format!("dimension {}: empty raster", self.name)));
            }
            if raster.windows(2).any(|w| w[0] >= w[1]) {
                return Err(Error::InvalidInput(format!(
                    "dimension {}: raster must be strictly ascending",
                    self.name
                )));
            }
            if raster.iter().any(|&v| v < self.lower || v > self.upper) {
                return Err(Error::InvalidInput(format!(
                    "dimension {}: raster values must lie in [{}, {}]",
                    self.name, self.lower, self.upper
                )));
            }
        }
        if self.treatment == Treatment::DiscreteRaster && self.raster.is_none() {
            return Err(Error::InvalidInput(format!(
                "dimension {}: discrete-raster treatment requires a raster",
                self.name
            )));
        }
        if self.treatment == Treatment::IndexBased && self.role != Role::Power {
            return Err(Error::InvalidInput(format!(
                "dimension {}: index-based treatment is reserved for the power dimension",
                self.name
            )));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SourceKind {
    Dipole,
    Vpifa,
    Cpifa,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PminEntry {
    pub frequency: f64,
    pub distance: f64,
    pub pmin_dbm: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SourceSpec {
    pub name: String,
    pub kind: SourceKind,
    /// Operating frequencies in MHz.
    pub frequencies: Vec<f64>,
    /// Source-to-phantom distances in mm.
    pub allowed_distances: Vec<f64>,
    pub pmin_table: Vec<PminEntry>,
}

impl SourceSpec {
    pub fn pmin(&self, frequency: f64, distance: f64) -> Option<f64> {
        self.pmin_table
            .iter()
            .find(|e| same(e.frequency, frequency) && same(e.distance, distance))
            .map(|e| e.pmin_dbm)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModulationSpec {
    pub id: u32,
    pub description: String,
    /// Peak-to-average ratio in dB.
    pub par: f64,
    /// Signal bandwidth in MHz.
    pub bandwidth: f64,
}

/// One value per dimension of its [`ConfigSpace`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ConfigPoint(pub Vec<f64>);

impl ConfigPoint {
    pub fn new(coords: Vec<f64>) -> Self {
        Self(coords)
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }
}

impl Deref for ConfigPoint {
    type Target = [f64];

    fn deref(&self) -> &[f64] {
        &self.0
    }
}

impl DerefMut for ConfigPoint {
    fn deref_mut(&mut self) -> &mut [f64] {
        &mut self.0
    }
}

impl From<Vec<f64>> for ConfigPoint {
    fn from(v: Vec<f64>) -> Self {
        Self(v)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConfigSpace {
    pub version: u32,
    pub name: String,
    pub dimensions: Vec<Dimension>,
    #[serde(default)]
    pub sources: Vec<SourceSpec>,
    #[serde(default)]
    pub modulations: Vec<ModulationSpec>,
}

impl ConfigSpace {
    pub fn new(
        name: impl Into<String>,
        dimensions: Vec<Dimension>,
        sources: Vec<SourceSpec>,
        modulations: Vec<ModulationSpec>,
    ) -> Result<Self> {
        let space = Self {
            version: SPACE_FORMAT_VERSION,
            name: name.into(),
            dimensions,
            sources,
            modulations,
        };
        space.validate()?;
        Ok(space)
    }

    /// A product of continuous intervals with no rasters and no sources.
    pub fn continuous(name: impl Into<String>, bounds: &[(&str, f64, f64)]) -> Result<Self> {
        let dims = bounds
            .iter()
            .map(|&(n, lo, hi)| Dimension::continuous(n, lo, hi))
            .collect::<Result<Vec<_>>>()?;
        Self::new(name, dims, Vec::new(), Vec::new())
    }

    /// The unit hypercube `[0, 1]^n` with dimensions `x1..xn`.
    pub fn unit_cube(n: usize) -> Self {
        let names: Vec<String> = (1..=n).map(|i| format!("x{i}")).collect();
        let bounds: Vec<(&str, f64, f64)> = names.iter().map(|s| (s.as_str(), 0.0, 1.0)).collect();
        Self::continuous(format!("unit-cube-{n}"), &bounds).expect("unit bounds are valid")
    }

    pub fn validate(&self) -> Result<()> {
        if self.version != SPACE_FORMAT_VERSION {
            return Err(Error::InvalidInput(format!(
                "unsupported space format version {}",
                self.version
            )));
        }
        if self.dimensions.is_empty() {
            return Err(Error::InvalidInput("space has no dimensions".into()));
        }
        for d in &self.dimensions {
            d.validate()?;
        }
        for role in [Role::Frequency, Role::Distance, Role::Power] {
            if self.dimensions.iter().filter(|d| d.role == role).count() > 1 {
                return Err(Error::InvalidInput(format!("more than one {role:?} dimension")));
            }
        }
        if !self.sources.is_empty()
            && (self.role_index(Role::Frequency).is_none() || self.role_index(Role::Distance).is_none())
        {
            return Err(Error::InvalidInput(
                "source tables require frequency and distance dimensions".into(),
            ));
        }
        for m in &self.modulations {
            if !(0.0..=12.0).contains(&m.par) || !(0.0..=100.0).contains(&m.bandwidth) {
                return Err(Error::InvalidInput(format!(
                    "modulation {} outside PAR [0, 12] dB / BW [0, 100] MHz",
                    m.id
                )));
            }
        }
        Ok(())
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let space: Self = serde_json::from_str(text)?;
        space.validate()?;
        Ok(space)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn dim(&self) -> usize {
        self.dimensions.len()
    }

    pub fn names(&self) -> Vec<&str> {
        self.dimensions.iter().map(|d| d.name.as_str()).collect()
    }

    pub fn role_index(&self, role: Role) -> Option<usize> {
        self.dimensions.iter().position(|d| d.role == role)
    }

    pub fn lower(&self) -> Vec<f64> {
        self.dimensions.iter().map(|d| d.lower).collect()
    }

    pub fn upper(&self) -> Vec<f64> {
        self.dimensions.iter().map(|d| d.upper).collect()
    }

    /// Euclidean diameter of the box in raw domain units.
    pub fn diameter(&self) -> f64 {
        self.dimensions.iter().map(|d| d.width().powi(2)).sum::<f64>().sqrt()
    }

    pub fn has_sources(&self) -> bool {
        !self.sources.is_empty()
    }

    /// The source operating at `frequency` and mounted at `distance`, if any.
    pub fn source_for(&self, frequency: f64, distance: f64) -> Option<&SourceSpec> {
        self.sources
            .iter()
            .find(|s| s.pmin(frequency, distance).is_some())
    }

    /// All distances at which some source operates at `frequency`, ascending.
    pub fn valid_distances(&self, frequency: f64) -> Vec<f64> {
        let mut out: Vec<f64> = self
            .sources
            .iter()
            .flat_map(|s| s.pmin_table.iter())
            .filter(|e| same(e.frequency, frequency))
            .map(|e| e.distance)
            .collect();
        out.sort_by(f64::total_cmp);
        out.dedup_by(|a, b| same(*a, *b));
        out
    }

    /// All frequencies served by a source, ascending.
    pub fn source_frequencies(&self) -> Vec<f64> {
        let mut out: Vec<f64> = self
            .sources
            .iter()
            .flat_map(|s| s.frequencies.iter().copied())
            .collect();
        out.sort_by(f64::total_cmp);
        out.dedup_by(|a, b| same(*a, *b));
        out
    }

    /// Name of the source resolved from the point's (frequency, distance) pair.
    pub fn source_name(&self, point: &[f64]) -> Option<&str> {
        let fi = self.role_index(Role::Frequency)?;
        let si = self.role_index(Role::Distance)?;
        self.source_for(point[fi], point[si]).map(|s| s.name.as_str())
    }

    /// Lowest allowed input power for the point's configuration. Spaces without
    /// source tables use the power dimension's lower bound.
    pub fn power_floor(&self, point: &[f64]) -> Option<f64> {
        let pi = self.role_index(Role::Power)?;
        if !self.has_sources() {
            return Some(self.dimensions[pi].lower);
        }
        let fi = self.role_index(Role::Frequency)?;
        let si = self.role_index(Role::Distance)?;
        self.source_for(point[fi], point[si])
            .and_then(|s| s.pmin(point[fi], point[si]))
    }

    pub fn contains(&self, point: &[f64]) -> bool {
        point.len() == self.dim()
            && self
                .dimensions
                .iter()
                .zip(point)
                .all(|(d, &v)| v.is_finite() && v >= d.lower && v <= d.upper)
    }

    /// Whether the point is a measurable configuration: raster coordinates on
    /// their raster, a source exists for (frequency, distance), and the power
    /// is one of the 21 one-dB levels above `P_in,min`.
    pub fn is_valid(&self, point: &[f64]) -> bool {
        if !self.contains(point) {
            return false;
        }
        for (d, &v) in self.dimensions.iter().zip(point) {
            match d.treatment {
                Treatment::DiscreteRaster => {
                    let raster = d.raster.as_deref().unwrap_or(&[]);
                    if !raster.iter().any(|&r| same(r, v)) {
                        return false;
                    }
                }
                Treatment::IndexBased => {
                    let Some(pmin) = self.power_floor(point) else {
                        return false;
                    };
                    let j = v - pmin;
                    if !same(j, j.round()) || j.round() < 0.0 || j.round() > POWER_STEPS as f64 {
                        return false;
                    }
                }
                Treatment::Continuous => {}
            }
        }
        if self.has_sources() {
            let fi = self.role_index(Role::Frequency).expect("validated");
            let si = self.role_index(Role::Distance).expect("validated");
            if self.source_for(point[fi], point[si]).is_none() {
                return false;
            }
        }
        true
    }

    /// Maps a point of the index domain onto the closest meaningful value
    /// lower or equal to each coordinate.
    ///
    /// Continuous coordinates pass through. Raster coordinates take the largest
    /// raster value not above them; the distance floors within the distances
    /// valid at the already-snapped frequency (clamping up to the smallest one
    /// when the coordinate lies below all of them). The power coordinate is an
    /// index `j` and maps to `P_in,min + floor(j)` with `j` clamped to `0..=20`.
    pub fn snap_floor(&self, point: &[f64]) -> ConfigPoint {
        let mut out = point.to_vec();
        let mut distance_idx = None;
        let mut power_idx = None;
        for (i, d) in self.dimensions.iter().enumerate() {
            match (d.role, d.treatment) {
                (_, Treatment::IndexBased) => power_idx = Some(i),
                (Role::Distance, _) if self.has_sources() => distance_idx = Some(i),
                (_, Treatment::DiscreteRaster) => {
                    out[i] = floor_in(d.raster.as_deref().unwrap_or(&[]), point[i]);
                }
                _ => {}
            }
        }
        if let Some(si) = distance_idx {
            let fi = self.role_index(Role::Frequency).expect("validated");
            let allowed = self.valid_distances(out[fi]);
            if !allowed.is_empty() {
                out[si] = floor_in(&allowed, point[si]);
            } else if let Some(r) = &self.dimensions[si].raster {
                out[si] = floor_in(r, point[si]);
            }
        }
        if let Some(pi) = power_idx {
            let j = point[pi].floor().clamp(0.0, POWER_STEPS as f64);
            let pmin = self.power_floor(&out).unwrap_or(self.dimensions[pi].lower);
            out[pi] = pmin + j;
        }
        ConfigPoint(out)
    }

    /// Inverse of the power part of [`snap_floor`](Self::snap_floor): expresses
    /// the power coordinate as its index `P_in - P_in,min`.
    pub fn to_index_domain(&self, point: &[f64]) -> ConfigPoint {
        let mut out = point.to_vec();
        if let Some(pi) = self.role_index(Role::Power) {
            if self.dimensions[pi].treatment == Treatment::IndexBased {
                let pmin = self.power_floor(point).unwrap_or(self.dimensions[pi].lower);
                out[pi] = point[pi] - pmin;
            }
        }
        ConfigPoint(out)
    }

    /// Snaps every coordinate of a point of `X` to its closest meaningful value
    /// in raw domain units. The source is resolved from the (frequency,
    /// distance) pair with frequency as the primary criterion and distance as
    /// the secondary one. Returns `None` when no meaningful source exists.
    pub fn snap_nearest(&self, point: &[f64]) -> Option<ConfigPoint> {
        if point.len() != self.dim() || point.iter().any(|v| !v.is_finite()) {
            return None;
        }
        let mut out = point.to_vec();
        let mut distance_idx = None;
        let mut power_idx = None;
        for (i, d) in self.dimensions.iter().enumerate() {
            let v = point[i].clamp(d.lower, d.upper);
            out[i] = v;
            match (d.role, d.treatment) {
                (_, Treatment::IndexBased) => power_idx = Some(i),
                (Role::Distance, _) if self.has_sources() => distance_idx = Some(i),
                (Role::Angle, _) => {
                    if let Some(r) = &d.raster {
                        out[i] = nearest_circular(r, v, d.lower, d.upper);
                    }
                }
                _ => {
                    if let Some(r) = &d.raster {
                        out[i] = nearest_in(r, v);
                    }
                }
            }
        }
        if let Some(si) = distance_idx {
            let fi = self.role_index(Role::Frequency).expect("validated");
            let allowed = self.valid_distances(out[fi]);
            if allowed.is_empty() {
                return None;
            }
            out[si] = nearest_in(&allowed, out[si]);
        }
        if let Some(pi) = power_idx {
            let pmin = self.power_floor(&out)?;
            let j = (out[pi] - pmin).round().clamp(0.0, POWER_STEPS as f64);
            out[pi] = pmin + j;
        }
        Some(ConfigPoint(out))
    }
}

/// Maximum permissible error in dB for fractional system and source
/// uncertainties: `10 log10(1 + u_system + u_source)`.
pub fn mpe(u_system: f64, u_source: f64) -> f64 {
    debug_assert!(u_system >= 0.0 && u_source >= 0.0);
    10.0 * (1.0 + u_system + u_source).log10()
}

/// `P_in,min` in dBm for a source at frequency `f` (MHz) and distance `s` (mm).
/// The power raster of that configuration is `P_min, P_min + 1, ..., P_min + 20`.
pub fn min_power(source: &SourceSpec, f: f64, s: f64) -> Result<f64> {
    source.pmin(f, s).ok_or(Error::NoSuchSource {
        frequency: f,
        distance: s,
    })
}

fn same(a: f64, b: f64) -> bool {
    (a - b).abs() <= RASTER_EPS * a.abs().max(b.abs()).max(1.0)
}

fn floor_in(raster: &[f64], v: f64) -> f64 {
    match raster.iter().rposition(|&r| r <= v + RASTER_EPS * v.abs().max(1.0)) {
        Some(i) => raster[i],
        None => raster.first().copied().unwrap_or(v),
    }
}

fn nearest_in(raster: &[f64], v: f64) -> f64 {
    // ties resolve to the lower raster value
    let mut best = raster[0];
    for &r in raster {
        if (r - v).abs() < (best - v).abs() {
            best = r;
        }
    }
    best
}

fn nearest_circular(raster: &[f64], v: f64, lower: f64, upper: f64) -> f64 {
    let best = nearest_in(raster, v);
    let wrapped = (upper - v) + (raster[0] - lower);
    if wrapped < (best - v).abs() {
        raster[0]
    } else {
        best
    }
}

// ---------------------------------------------------------------------------
// Built-in SAR validation spaces
// ---------------------------------------------------------------------------

const NA: f64 = f64::NAN;

/// Dipole `P_in,min` (dBm) at s = 5, 10, 15, 25 mm; NaN marks an unused distance.
const DIPOLE_PMIN: [(&str, f64, [f64; 4]); 18] = [
    ("D300", 300.0, [NA, NA, 16.0, 17.0]),
    ("D450", 450.0, [NA, NA, 14.0, 15.0]),
    ("D750", 750.0, [NA, NA, 11.0, 13.0]),
    ("D835", 835.0, [10.0, NA, 10.0, 13.0]),
    ("D900", 900.0, [9.0, NA, 10.0, 12.0]),
    ("D1450", 1450.0, [5.0, 6.0, NA, 12.0]),
    ("D1750", 1750.0, [4.0, 5.0, NA, 12.0]),
    ("D1950", 1950.0, [2.0, 4.0, NA, 12.0]),
    ("D2300", 2300.0, [1.0, 3.0, NA, 12.0]),
    ("D2450", 2450.0, [0.0, 3.0, NA, 12.0]),
    ("D2600", 2600.0, [0.0, 3.0, NA, 12.0]),
    ("D3700", 3700.0, [-2.0, 2.0, NA, 12.0]),
    ("D4200", 4200.0, [-3.0, 2.0, NA, 12.0]),
    ("D4600", 4600.0, [-3.0, 2.0, NA, 11.0]),
    ("D5000", 5200.0, [-4.0, 2.0, NA, 10.0]),
    ("D5000", 5500.0, [-5.0, 1.0, NA, 10.0]),
    ("D5000", 5600.0, [-4.0, 1.0, NA, 10.0]),
    ("D5000", 5800.0, [-4.0, 1.0, NA, 8.0]),
];

const DIPOLE_DISTANCES: [f64; 4] = [5.0, 10.0, 15.0, 25.0];

const PLANAR_PMIN: [(&str, SourceKind, f64, f64, f64); 5] = [
    ("V750", SourceKind::Vpifa, 750.0, 2.0, 9.0),
    ("V835", SourceKind::Vpifa, 835.0, 2.0, 9.0),
    ("V1950", SourceKind::Vpifa, 1950.0, 2.0, 11.0),
    ("V3700", SourceKind::Vpifa, 3700.0, 2.0, 11.0),
    ("C2450", SourceKind::Cpifa, 2450.0, 7.0, 12.0),
];

const MODULATIONS: [(&str, f64, f64); 24] = [
    ("Unmodulated carrier (CW)", 0.0, 0.0),
    ("Pulse signal, 10 ms period, 10 % duty cycle", 10.0, 0.0),
    ("WCDMA, 12.2 kbps RMC, IS-2000", 2.91, 5.0),
    ("UMTS-FDD (HSDPA)", 3.98, 5.0),
    ("LTE-TDD (SC-FDMA, 1 RB, 20 MHz, QPSK, UL Subframe=2,7)", 11.96, 0.2),
    ("LTE-FDD (SC-FDMA, 100% RB, 1.4 MHz, QPSK)", 5.76, 1.4),
    ("LTE-FDD (SC-FDMA, 100% RB, 1.4 MHz, 16-QAM)", 6.41, 1.4),
    ("LTE-TDD (SC-FDMA, 1 RB, 1.4 MHz, 64-QAM)", 10.26, 1.4),
    ("LTE-FDD (SC-FDMA, 100% RB, 3 MHz, QPSK)", 5.73, 3.0),
    ("LTE-FDD (SC-FDMA, 100% RB, 3 MHz, 64-QAM)", 6.65, 3.0),
    ("LTE-FDD (SC-FDMA, 100% RB, 5 MHz, QPSK)", 5.75, 5.0),
    ("LTE-FDD (SC-FDMA, 100% RB, 5 MHz, 16-QAM)", 6.44, 5.0),
    ("LTE-FDD (SC-FDMA, 100% RB, 10 MHz, 64-QAM)", 6.59, 10.0),
    ("LTE-FDD (SC-FDMA, 100% RB, 20 MHz, QPSK)", 5.67, 20.0),
    ("5G NR (DFT-s-OFDM, 1 RB, 50 MHz, QPSK, 30 kHz)", 5.68, 0.4),
    ("5G NR (CP-OFDM, 1 RB, 80 MHz, QPSK, 30 kHz)", 7.89, 0.4),
    ("5G NR (CP-OFDM, 1 RB, 100 MHz, QPSK, 30 kHz)", 7.93, 0.4),
    ("5G NR (CP-OFDM, 1 RB, 40 MHz, QPSK, 60 kHz)", 7.7, 0.8),
    ("5G NR (CP-OFDM, 50% RB, 50 MHz, QPSK, 15 kHz)", 8.43, 25.0),
    ("5G NR TDD (CP-OFDM, 100% RB, 100 MHz, 256-QAM, 30 kHz)", 10.28, 100.0),
    ("IEEE 802.11a/h WiFi 5 GHz (OFDM, 24 Mbps)", 9.38, 20.0),
    ("IEEE 802.11a/h WiFi 5 GHz (OFDM, 36 Mbps)", 10.12, 20.0),
    ("IEEE 802.11ax (40 MHz, MCS1, 90pc duty cycle)", 8.91, 40.0),
    ("IEEE 802.11ax (80 MHz, MCS5, 90pc duty cycle)", 8.9, 80.0),
];

/// Array-system measurable area in mm (x across the width, y along the length).
pub const ARRAY_X_MM: (f64, f64) = (-60.0, 60.0);
pub const ARRAY_Y_MM: (f64, f64) = (-110.0, 110.0);

pub fn sar_sources() -> Vec<SourceSpec> {
    let mut sources: Vec<SourceSpec> = Vec::new();
    for &(name, f, row) in DIPOLE_PMIN.iter() {
        let entries: Vec<PminEntry> = DIPOLE_DISTANCES
            .iter()
            .zip(row)
            .filter(|(_, p)| !p.is_nan())
            .map(|(&s, p)| PminEntry {
                frequency: f,
                distance: s,
                pmin_dbm: p,
            })
            .collect();
        let source = match sources.iter_mut().find(|s| s.name == name) {
            Some(s) => s,
            None => {
                sources.push(SourceSpec {
                    name: name.to_string(),
                    kind: SourceKind::Dipole,
                    frequencies: Vec::new(),
                    allowed_distances: Vec::new(),
                    pmin_table: Vec::new(),
                });
                sources.last_mut().expect("just pushed")
            }
        };
        source.frequencies.push(f);
        for e in entries {
            if !source.allowed_distances.iter().any(|&d| same(d, e.distance)) {
                source.allowed_distances.push(e.distance);
            }
            source.pmin_table.push(e);
        }
        source.allowed_distances.sort_by(f64::total_cmp);
    }
    for &(name, kind, f, s, p) in PLANAR_PMIN.iter() {
        sources.push(SourceSpec {
            name: name.to_string(),
            kind,
            frequencies: vec![f],
            allowed_distances: vec![s],
            pmin_table: vec![PminEntry {
                frequency: f,
                distance: s,
                pmin_dbm: p,
            }],
        });
    }
    sources
}

pub fn sar_modulations() -> Vec<ModulationSpec> {
    MODULATIONS
        .iter()
        .enumerate()
        .map(|(i, &(desc, par, bw))| ModulationSpec {
            id: i as u32 + 1,
            description: desc.to_string(),
            par,
            bandwidth: bw,
        })
        .collect()
}

fn unique_sorted(mut v: Vec<f64>) -> Vec<f64> {
    v.sort_by(f64::total_cmp);
    v.dedup_by(|a, b| same(*a, *b));
    v
}

fn sar_space(with_location: bool) -> ConfigSpace {
    let sources = sar_sources();
    let modulations = sar_modulations();
    let freqs = unique_sorted(
        sources
            .iter()
            .flat_map(|s| s.frequencies.iter().copied())
            .collect(),
    );
    let dists = unique_sorted(
        sources
            .iter()
            .flat_map(|s| s.allowed_distances.iter().copied())
            .collect(),
    );
    let pars = unique_sorted(modulations.iter().map(|m| m.par).collect());
    let bws = unique_sorted(modulations.iter().map(|m| m.bandwidth).collect());
    let pmins: Vec<f64> = sources
        .iter()
        .flat_map(|s| s.pmin_table.iter().map(|e| e.pmin_dbm))
        .collect();
    let pmin_lo = pmins.iter().copied().fold(f64::INFINITY, f64::min);
    let pmin_hi = pmins.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let angles: Vec<f64> = (0..24).map(|j| 15.0 * j as f64).collect();
    let mm_grid = |(lo, hi): (f64, f64)| -> Vec<f64> {
        (0..=((hi - lo) as usize)).map(|i| lo + i as f64).collect()
    };

    let raster = Treatment::DiscreteRaster;
    let cont = Treatment::Continuous;
    let mut dims = vec![
        Dimension::new("f_MHz", Role::Frequency, freqs[0], *freqs.last().unwrap(), raster, Some(freqs.clone())),
        Dimension::new("s_mm", Role::Distance, dists[0], *dists.last().unwrap(), raster, Some(dists.clone())),
        Dimension::new("theta_deg", Role::Angle, 0.0, 360.0, cont, Some(angles)),
    ];
    if with_location {
        dims.push(Dimension::new("x_mm", Role::LocationX, ARRAY_X_MM.0, ARRAY_X_MM.1, cont, Some(mm_grid(ARRAY_X_MM))));
        dims.push(Dimension::new("y_mm", Role::LocationY, ARRAY_Y_MM.0, ARRAY_Y_MM.1, cont, Some(mm_grid(ARRAY_Y_MM))));
    }
    dims.push(Dimension::new("Pin_dBm", Role::Power, pmin_lo, pmin_hi + POWER_STEPS as f64, Treatment::IndexBased, None));
    dims.push(Dimension::new("PAR_dB", Role::Par, 0.0, 12.0, raster, Some(pars)));
    dims.push(Dimension::new("BW_MHz", Role::Bandwidth, 0.0, 100.0, raster, Some(bws)));

    let dims = dims
        .into_iter()
        .collect::<Result<Vec<_>>>()
        .expect("built-in dimensions are valid");
    let name = if with_location { "sar-array" } else { "sar-scanning" };
    ConfigSpace::new(name, dims, sources, modulations).expect("built-in space is valid")
}

/// The eight-dimensional array-system space `(f, s, θ, x, y, P_in, PAR, BW)`.
pub fn build_sar_array_space() -> ConfigSpace {
    sar_space(true)
}

/// The six-dimensional scanning-system space `(f, s, θ, P_in, PAR, BW)`.
pub fn build_sar_scanning_space() -> ConfigSpace {
    sar_space(false)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn point(space: &ConfigSpace, pairs: &[(Role, f64)]) -> Vec<f64> {
        let mut p: Vec<f64> = space.dimensions.iter().map(|d| d.lower).collect();
        for &(role, v) in pairs {
            p[space.role_index(role).unwrap()] = v;
        }
        p
    }

    #[test]
    fn array_space_has_table_rasters() {
        let space = build_sar_array_space();
        assert_eq!(space.dim(), 8);
        assert_eq!(
            space.names(),
            ["f_MHz", "s_mm", "theta_deg", "x_mm", "y_mm", "Pin_dBm", "PAR_dB", "BW_MHz"]
        );
        let theta = &space.dimensions[space.role_index(Role::Angle).unwrap()];
        let raster = theta.raster.as_ref().unwrap();
        assert_eq!(raster.len(), 24);
        assert_eq!(raster[0], 0.0);
        assert_eq!(raster[23], 345.0);
        assert_eq!(theta.treatment, Treatment::Continuous);
    }

    #[test]
    fn dipole_frequencies() {
        let space = build_sar_array_space();
        let dipoles: Vec<_> = space.sources.iter().filter(|s| s.kind == SourceKind::Dipole).collect();
        assert_eq!(dipoles.len(), 15);
        let freqs: Vec<f64> = unique_sorted(dipoles.iter().flat_map(|s| s.frequencies.clone()).collect());
        assert_eq!(freqs.len(), 18);
        assert!(freqs.contains(&300.0) && freqs.contains(&5800.0));
        let d5000 = dipoles.iter().find(|s| s.name == "D5000").unwrap();
        assert_eq!(d5000.frequencies, vec![5200.0, 5500.0, 5600.0, 5800.0]);
    }

    #[test]
    fn modulation_row_20() {
        let space = build_sar_array_space();
        assert_eq!(space.modulations.len(), 24);
        let m = space.modulations.iter().find(|m| m.id == 20).unwrap();
        assert_eq!(m.par, 10.28);
        assert_eq!(m.bandwidth, 100.0);
    }

    #[test]
    fn scanning_space_drops_location() {
        let space = build_sar_scanning_space();
        assert_eq!(space.dim(), 6);
        assert!(space.role_index(Role::LocationX).is_none());
        assert!(space.role_index(Role::LocationY).is_none());
    }

    #[test]
    fn source_distance_rules() {
        let space = build_sar_array_space();
        for s in &space.sources {
            match s.kind {
                SourceKind::Vpifa => assert_eq!(s.allowed_distances, vec![2.0]),
                SourceKind::Cpifa => assert_eq!(s.allowed_distances, vec![7.0]),
                SourceKind::Dipole => {
                    if ["D300", "D450", "D750"].contains(&s.name.as_str()) {
                        assert!(!s.allowed_distances.contains(&5.0), "{}", s.name);
                    }
                }
            }
        }
    }

    #[test]
    fn min_power_table_lookups() {
        let space = build_sar_array_space();
        let find = |n: &str| space.sources.iter().find(|s| s.name == n).unwrap();
        assert_eq!(min_power(find("D300"), 300.0, 15.0).unwrap(), 16.0);
        assert_eq!(min_power(find("V750"), 750.0, 2.0).unwrap(), 9.0);
        assert_eq!(min_power(find("D5000"), 5800.0, 25.0).unwrap(), 8.0);
        let err = min_power(find("D300"), 300.0, 5.0).unwrap_err();
        assert!(err.to_string().contains("no such source configuration"));
    }

    #[test]
    fn mpe_values() {
        assert_abs_diff_eq!(mpe(0.30, 0.15), 1.6137, epsilon = 5e-5);
        assert_eq!(mpe(0.0, 0.0), 0.0);
        assert_abs_diff_eq!(mpe(0.30, 0.0), 1.1394, epsilon = 5e-5);
    }

    #[test]
    fn snap_floor_examples() {
        let space = build_sar_array_space();
        let mut p = point(&space, &[(Role::Frequency, 2599.9), (Role::Distance, 10.0), (Role::LocationX, -33.21), (Role::Power, 3.7)]);
        p[space.role_index(Role::Power).unwrap()] = 3.7;
        let snapped = space.snap_floor(&p);
        assert_eq!(snapped[space.role_index(Role::Frequency).unwrap()], 2450.0);
        assert_eq!(snapped[space.role_index(Role::LocationX).unwrap()], -33.21);
        // D2450 at 10 mm has P_min = 3 dBm
        assert_eq!(snapped[space.role_index(Role::Power).unwrap()], 3.0 + 3.0);
        assert!(space.is_valid(&snapped));
    }

    #[test]
    fn snap_floor_power_index_uses_pmin() {
        // D1450 at 5 mm would be 5 dBm; pick a P_min = 10 configuration: D835 at 5 mm
        let space = build_sar_array_space();
        let p = point(&space, &[(Role::Frequency, 835.0), (Role::Distance, 5.0), (Role::Power, 3.7)]);
        let snapped = space.snap_floor(&p);
        assert_eq!(snapped[space.role_index(Role::Power).unwrap()], 13.0);
        // the measure-zero upper endpoint clamps to the last level
        let p = point(&space, &[(Role::Frequency, 835.0), (Role::Distance, 5.0), (Role::Power, 21.0)]);
        assert_eq!(space.snap_floor(&p)[space.role_index(Role::Power).unwrap()], 30.0);
    }

    #[test]
    fn snap_floor_distance_follows_frequency() {
        let space = build_sar_array_space();
        // 300 MHz has no 5 mm or 10 mm dipole: distance clamps up to 15 mm
        let p = point(&space, &[(Role::Frequency, 300.0), (Role::Distance, 12.0)]);
        let s = space.snap_floor(&p);
        assert_eq!(s[space.role_index(Role::Distance).unwrap()], 15.0);
        assert!(space.is_valid(&s));
    }

    #[test]
    fn snap_nearest_examples() {
        let space = build_sar_array_space();
        let p = point(&space, &[(Role::Frequency, 2450.0), (Role::Distance, 6.2), (Role::Angle, 47.3), (Role::Power, 14.0)]);
        let s = space.snap_nearest(&p).unwrap();
        assert_eq!(s[space.role_index(Role::Angle).unwrap()], 45.0);
        assert_eq!(s[space.role_index(Role::Distance).unwrap()], 7.0);
        assert_eq!(space.source_name(&s), Some("C2450"));
        assert!(space.is_valid(&s));

        let p = point(&space, &[(Role::Frequency, 750.0), (Role::Distance, 5.0), (Role::Power, 14.0)]);
        let s = space.snap_nearest(&p).unwrap();
        // exhaustive check over the valid (f, s) pairs at 750 MHz
        let candidates = [(750.0, 15.0), (750.0, 2.0), (750.0, 25.0)];
        let best = candidates
            .iter()
            .min_by(|a, b| ((a.1 - 5.0f64).abs()).total_cmp(&(b.1 - 5.0f64).abs()))
            .unwrap();
        assert_eq!(s[space.role_index(Role::Distance).unwrap()], best.1);
        assert_eq!(space.source_name(&s), Some("V750"));
    }

    #[test]
    fn snap_nearest_angle_wraps() {
        let space = build_sar_array_space();
        let p = point(&space, &[(Role::Frequency, 2450.0), (Role::Distance, 10.0), (Role::Angle, 356.0), (Role::Power, 5.0)]);
        let s = space.snap_nearest(&p).unwrap();
        assert_eq!(s[space.role_index(Role::Angle).unwrap()], 0.0);
    }

    #[test]
    fn snap_nearest_without_source_is_none() {
        let mut space = build_sar_array_space();
        space.sources.retain(|s| s.name != "D300");
        let p = point(&space, &[(Role::Frequency, 300.0), (Role::Distance, 15.0)]);
        assert!(space.snap_nearest(&p).is_none());
    }

    #[test]
    fn every_raster_value_is_reachable() {
        let space = build_sar_array_space();
        for (i, d) in space.dimensions.iter().enumerate() {
            let Some(raster) = &d.raster else { continue };
            for &v in raster {
                let mut p = point(&space, &[(Role::Frequency, 2450.0), (Role::Distance, 10.0), (Role::Power, 5.0)]);
                if d.role == Role::Distance {
                    // pick a frequency at which this distance is valid
                    let f = space.sources.iter().flat_map(|s| s.pmin_table.iter()).find(|e| e.distance == v).unwrap().frequency;
                    p[space.role_index(Role::Frequency).unwrap()] = f;
                }
                p[i] = v;
                let s = space.snap_nearest(&p).unwrap();
                assert_eq!(s[i], v, "{} value {v}", d.name);
            }
        }
    }

    #[test]
    fn json_roundtrip() {
        let space = build_sar_array_space();
        let back = ConfigSpace::from_json(&space.to_json().unwrap()).unwrap();
        assert_eq!(space, back);
    }

    #[test]
    fn rejects_bad_dimension() {
        assert!(Dimension::continuous("a", 1.0, 1.0).is_err());
        assert!(Dimension::new("a", Role::Generic, 0.0, 1.0, Treatment::DiscreteRaster, Some(vec![0.5, 0.2])).is_err());
        assert!(Dimension::new("a", Role::Generic, 0.0, 1.0, Treatment::IndexBased, None).is_err());
    }

    fn arb_index_point() -> impl Strategy<Value = Vec<f64>> {
        let space = build_sar_array_space();
        let bounds: Vec<(f64, f64)> = space
            .dimensions
            .iter()
            .map(|d| match d.treatment {
                Treatment::IndexBased => (0.0, POWER_INDEX_UPPER),
                _ => (d.lower, d.upper),
            })
            .collect();
        bounds
            .into_iter()
            .map(|(lo, hi)| lo..=hi)
            .collect::<Vec<_>>()
    }

    proptest! {
        #[test]
        fn snap_floor_idempotent(p in arb_index_point()) {
            let space = build_sar_array_space();
            let once = space.snap_floor(&p);
            let twice = space.snap_floor(&space.to_index_domain(&once));
            prop_assert_eq!(&once, &twice);
            prop_assert!(space.is_valid(&once));
        }

        #[test]
        fn snap_floor_never_rounds_up(p in arb_index_point()) {
            let space = build_sar_array_space();
            let s = space.snap_floor(&p);
            for (i, d) in space.dimensions.iter().enumerate() {
                if d.treatment == Treatment::DiscreteRaster && d.role != Role::Distance {
                    prop_assert!(s[i] <= p[i] || s[i] == d.raster.as_ref().unwrap()[0]);
                }
            }
        }

        #[test]
        fn snap_nearest_is_valid(p in arb_index_point()) {
            let space = build_sar_array_space();
            let mut q = p.clone();
            let pi = space.role_index(Role::Power).unwrap();
            let d = &space.dimensions[pi];
            q[pi] = d.lower + (p[pi] / POWER_INDEX_UPPER) * d.width();
            let s = space.snap_nearest(&q).expect("all SAR frequencies have a source");
            prop_assert!(space.is_valid(&s));
        }

        #[test]
        fn mpe_increasing(a in 0.0f64..2.0, b in 0.0f64..2.0, da in 1e-6f64..1.0) {
            prop_assert!(mpe(a + da, b) > mpe(a, b));
            prop_assert!(mpe(a, b + da) > mpe(a, b));
        }
    }
}
