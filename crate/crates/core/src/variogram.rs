//! Empirical semivariograms, the exponential/gaussian/spherical models with
//! their inverses, weighted least-squares fitting, the anisotropy map and the
//! NRMSE goodness-of-fit measure.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kriging::ValuedSample;
use crate::stats;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VariogramShape {
    Exponential,
    Gaussian,
    Spherical,
}

impl VariogramShape {
    pub const ALL: [VariogramShape; 3] = [Self::Exponential, Self::Gaussian, Self::Spherical];

    /// Normalized structure `ρ(h/r)` rising from 0 at the origin to 1.
    pub fn unit(self, h: f64, r: f64) -> f64 {
        let x = h / r;
        match self {
            Self::Exponential => 1.0 - (-3.0 * x).exp(),
            Self::Gaussian => 1.0 - (-4.0 * x * x).exp(),
            Self::Spherical => {
                if x >= 1.0 {
                    1.0
                } else {
                    1.5 * x - 0.5 * x * x * x
                }
            }
        }
    }

    /// Inverse of [`unit`](Self::unit) for `t` in `[0, 1)`.
    fn unit_inverse(self, t: f64, r: f64) -> f64 {
        match self {
            Self::Exponential => -(r / 3.0) * (-t).ln_1p(),
            Self::Gaussian => 0.5 * r * (-(-t).ln_1p()).sqrt(),
            // real root of x^3 - 3x + 2t = 0 on [0, 1]
            Self::Spherical => r * 2.0 * (t.asin() / 3.0).sin(),
        }
    }
}

impl std::str::FromStr for VariogramShape {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "exponential" | "exp" => Ok(Self::Exponential),
            "gaussian" | "gauss" => Ok(Self::Gaussian),
            "spherical" | "sph" => Ok(Self::Spherical),
            other => Err(Error::InvalidInput(format!("unknown variogram shape {other:?}"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct VariogramModel {
    pub shape: VariogramShape,
    pub nugget: f64,
    pub sill: f64,
    pub range: f64,
}

impl VariogramModel {
    pub fn new(shape: VariogramShape, nugget: f64, sill: f64, range: f64) -> Result<Self> {
        let m = Self { shape, nugget, sill, range };
        m.validate()?;
        Ok(m)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.nugget >= 0.0 && self.nugget.is_finite()) {
            return Err(Error::InvalidInput(format!("nugget must be >= 0, got {}", self.nugget)));
        }
        if !(self.sill > 0.0 && self.sill.is_finite()) {
            return Err(Error::InvalidInput(format!("sill must be > 0, got {}", self.sill)));
        }
        if !(self.range > 0.0 && self.range.is_finite()) {
            return Err(Error::InvalidInput(format!("range must be > 0, got {}", self.range)));
        }
        Ok(())
    }

    /// Plateau height `n + s`.
    pub fn total_sill(&self) -> f64 {
        self.nugget + self.sill
    }

    /// Semivariance at lag `h`; zero at the origin, `n + s·ρ(h)` beyond it.
    pub fn eval(&self, h: f64) -> Result<f64> {
        if !(h >= 0.0) {
            return Err(Error::Domain(format!("lag must be >= 0, got {h}")));
        }
        Ok(self.gamma(h))
    }

    /// Unchecked [`eval`](Self::eval) for lags known to be non-negative.
    #[inline]
    pub fn gamma(&self, h: f64) -> f64 {
        if h == 0.0 {
            0.0
        } else {
            self.nugget + self.sill * self.shape.unit(h, self.range)
        }
    }

    /// Lag at which the model reaches semivariance `g`, for `n < g < n + s`.
    pub fn inverse(&self, g: f64) -> Result<f64> {
        if !(g > self.nugget && g < self.total_sill()) {
            return Err(Error::Domain(format!(
                "semivariance {g} outside ({}, {})",
                self.nugget,
                self.total_sill()
            )));
        }
        let t = (g - self.nugget) / self.sill;
        Ok(self.shape.unit_inverse(t, self.range))
    }
}

/// Bin layout for empirical variograms: `bins` equal bins over
/// `[0, max_lag_fraction · diameter]`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Binning {
    pub bins: usize,
    pub max_lag_fraction: f64,
}

impl Binning {
    pub const ISOTROPIC: Binning = Binning { bins: 50, max_lag_fraction: 0.75 };
    pub const DIRECTIONAL: Binning = Binning { bins: 25, max_lag_fraction: 0.75 };

    pub fn new(bins: usize, max_lag_fraction: f64) -> Self {
        Self { bins, max_lag_fraction }
    }
}

/// Lag pairs a bin should hold for the estimate to count as well populated.
pub const WELL_POPULATED_PAIRS: usize = 40;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EmpiricalVariogram {
    pub bin_edges: Vec<f64>,
    pub bin_means: Vec<f64>,
    pub bin_counts: Vec<usize>,
    /// Largest pairwise distance of the sample in the metric used.
    pub diameter: f64,
}

impl EmpiricalVariogram {
    pub fn lags(&self) -> Vec<f64> {
        self.bin_edges.windows(2).map(|w| 0.5 * (w[0] + w[1])).collect()
    }

    /// `(lag, semivariance, count)` for populated bins only.
    pub fn populated(&self) -> Vec<(f64, f64, usize)> {
        self.lags()
            .into_iter()
            .zip(&self.bin_means)
            .zip(&self.bin_counts)
            .filter(|(_, &c)| c > 0)
            .map(|((h, &g), &c)| (h, g, c))
            .collect()
    }

    pub fn total_pairs(&self) -> usize {
        self.bin_counts.iter().sum()
    }

    /// Fraction of bins holding at least [`WELL_POPULATED_PAIRS`] lag pairs.
    pub fn well_populated_fraction(&self) -> f64 {
        let good = self.bin_counts.iter().filter(|&&c| c >= WELL_POPULATED_PAIRS).count();
        good as f64 / self.bin_counts.len() as f64
    }
}

/// Diagonal anisotropy map `ι(x) = Σ⁻¹x` with `Σ = diag(ranges)·diag(prescale)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AnisotropyMap {
    pub prescale: Vec<f64>,
    pub ranges: Vec<f64>,
}

impl AnisotropyMap {
    pub fn identity(n: usize) -> Self {
        Self { prescale: vec![1.0; n], ranges: vec![1.0; n] }
    }

    pub fn new(prescale: Vec<f64>, ranges: Vec<f64>) -> Result<Self> {
        let map = Self { prescale, ranges };
        map.validate()?;
        Ok(map)
    }

    pub fn validate(&self) -> Result<()> {
        if self.prescale.len() != self.ranges.len() {
            return Err(Error::InvalidInput("anisotropy prescale/range length mismatch".into()));
        }
        if self.prescale.iter().chain(&self.ranges).any(|&v| !(v > 0.0 && v.is_finite())) {
            return Err(Error::InvalidInput("anisotropy diagonal entries must be positive".into()));
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.prescale.len()
    }

    /// Diagonal of `Σ`.
    pub fn diagonal(&self) -> Vec<f64> {
        self.prescale.iter().zip(&self.ranges).map(|(a, b)| a * b).collect()
    }

    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        x.iter().zip(self.diagonal()).map(|(v, d)| v / d).collect()
    }

    pub fn invert(&self, y: &[f64]) -> Vec<f64> {
        y.iter().zip(self.diagonal()).map(|(v, d)| v * d).collect()
    }
}

/// Matheron estimator over all pairs of `sample` in the metric of `metric`.
pub fn empirical_variogram(
    sample: &ValuedSample,
    metric: &AnisotropyMap,
    binning: Binning,
) -> Result<EmpiricalVariogram> {
    let pts: Vec<Vec<f64>> = sample.points.iter().map(|p| metric.apply(p)).collect();
    accumulate(&pts, &sample.values, binning, None)
}

/// Like [`empirical_variogram`] but keeps only pairs whose separation lies
/// within `angular_tolerance_deg` of coordinate axis `axis`. The sample is
/// expected to be prescaled already.
pub fn directional_variogram(
    sample: &ValuedSample,
    axis: usize,
    angular_tolerance_deg: f64,
    binning: Binning,
) -> Result<EmpiricalVariogram> {
    if axis >= sample.dim() {
        return Err(Error::InvalidInput(format!("axis {axis} out of range")));
    }
    let pts: Vec<Vec<f64>> = sample.points.iter().map(|p| p.to_vec()).collect();
    let cos_tol = angular_tolerance_deg.to_radians().cos().max(0.0);
    accumulate(&pts, &sample.values, binning, Some((axis, cos_tol)))
}

fn accumulate(
    pts: &[Vec<f64>],
    values: &[f64],
    binning: Binning,
    cone: Option<(usize, f64)>,
) -> Result<EmpiricalVariogram> {
    if pts.len() < 2 {
        return Err(Error::InvalidInput("variogram needs at least 2 points".into()));
    }
    if binning.bins == 0 || !(binning.max_lag_fraction > 0.0) {
        return Err(Error::InvalidInput("binning needs at least one bin and a positive lag fraction".into()));
    }
    let mut pairs = Vec::with_capacity(pts.len() * (pts.len() - 1) / 2);
    let mut diameter: f64 = 0.0;
    for i in 0..pts.len() {
        for j in (i + 1)..pts.len() {
            let d = stats::euclidean(&pts[i], &pts[j]);
            diameter = diameter.max(d);
            let keep = match cone {
                None => true,
                Some((axis, cos_tol)) => {
                    let along = (pts[i][axis] - pts[j][axis]).abs();
                    d == 0.0 || along >= cos_tol * d - 1e-12 * d
                }
            };
            if keep {
                pairs.push((d, 0.5 * (values[i] - values[j]).powi(2)));
            }
        }
    }
    let max_lag = binning.max_lag_fraction * diameter;
    let width = max_lag / binning.bins as f64;
    let mut sums = vec![0.0; binning.bins];
    let mut counts = vec![0usize; binning.bins];
    if width > 0.0 {
        for (d, g) in pairs {
            if d > max_lag {
                continue;
            }
            let b = ((d / width) as usize).min(binning.bins - 1);
            sums[b] += g;
            counts[b] += 1;
        }
    }
    if counts.iter().all(|&c| c == 0) {
        return Err(Error::EmptyVariogram);
    }
    let bin_means = sums
        .iter()
        .zip(&counts)
        .map(|(&s, &c)| if c > 0 { s / c as f64 } else { 0.0 })
        .collect();
    Ok(EmpiricalVariogram {
        bin_edges: (0..=binning.bins).map(|i| i as f64 * width).collect(),
        bin_means,
        bin_counts: counts,
        diameter,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NuggetMode {
    Free,
    FixedZero,
}

const RANGE_GRID: usize = 60;
const RANGE_GRID_LOW: f64 = 1e-3;

/// Weighted least-squares fit of `shape` to the populated bins of `emp`,
/// weights equal to the bin counts, with `n >= 0`, `0 < s <= max γ̂` and
/// `0 < r <= max lag`.
///
/// For fixed `r` the problem is linear in `(n, s)` and solved exactly; the
/// range is found by a log-spaced scan followed by golden-section refinement.
pub fn fit(emp: &EmpiricalVariogram, shape: VariogramShape, nugget_mode: NuggetMode) -> Result<VariogramModel> {
    fit_with_nugget_floor(emp, shape, nugget_mode, 0.0)
}

/// [`fit`] with the nugget bounded below by `nugget_floor` in
/// [`NuggetMode::Free`], typically the known measurement-noise variance. The
/// empirical bins rarely resolve a nugget that small, yet leaving it at zero
/// makes the kriging system interpolate (and amplify) the noise.
pub fn fit_with_nugget_floor(
    emp: &EmpiricalVariogram,
    shape: VariogramShape,
    nugget_mode: NuggetMode,
    nugget_floor: f64,
) -> Result<VariogramModel> {
    if !(nugget_floor >= 0.0 && nugget_floor.is_finite()) {
        return Err(Error::Fit(format!("nugget floor must be finite and >= 0, got {nugget_floor}")));
    }
    let floor = if nugget_mode == NuggetMode::Free { nugget_floor } else { 0.0 };
    let data = emp.populated();
    if data.len() < 3 {
        return Err(Error::Fit(format!("need at least 3 populated bins, got {}", data.len())));
    }
    if !(emp.diameter > 0.0) {
        return Err(Error::Fit("degenerate sample diameter".into()));
    }
    let ymax = data.iter().map(|d| d.1).fold(0.0, f64::max);
    let sill_floor = (ymax * 1e-9).max(f64::MIN_POSITIVE);
    let sill_cap = ymax.max(sill_floor);
    let weighted: Vec<(f64, f64, f64)> = data.iter().map(|&(h, y, c)| (h, y, c as f64)).collect();
    fit_weighted(emp, &weighted, shape, nugget_mode, floor, sill_floor, sill_cap)
}

fn fit_weighted(
    emp: &EmpiricalVariogram,
    data: &[(f64, f64, f64)],
    shape: VariogramShape,
    nugget_mode: NuggetMode,
    floor: f64,
    sill_floor: f64,
    sill_cap: f64,
) -> Result<VariogramModel> {
    let obj = |log_r: f64| solve_linear(data, shape, log_r.exp(), nugget_mode, floor, sill_floor, sill_cap);

    let lo = (emp.bin_edges.last().copied().unwrap_or(emp.diameter) * RANGE_GRID_LOW).ln();
    let hi = emp.bin_edges.last().copied().unwrap_or(emp.diameter).ln();
    let grid: Vec<f64> = (0..RANGE_GRID)
        .map(|i| lo + (hi - lo) * i as f64 / (RANGE_GRID - 1) as f64)
        .collect();
    let scores: Vec<f64> = grid.iter().map(|&g| obj(g).2).collect();
    let best = scores
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.total_cmp(b.1))
        .map(|(i, _)| i)
        .expect("non-empty grid");
    let a = grid[best.saturating_sub(1)];
    let b = grid[(best + 1).min(RANGE_GRID - 1)];
    let log_r = golden_min(|x| obj(x).2, a, b, 1e-10);
    let (log_r, (n, s, _)) = if obj(log_r).2 <= scores[best] {
        (log_r, obj(log_r))
    } else {
        (grid[best], obj(grid[best]))
    };
    let model = VariogramModel::new(shape, n, s, log_r.exp())
        .map_err(|e| Error::Fit(e.to_string()))?;
    if !(n.is_finite() && s.is_finite()) {
        return Err(Error::Fit("non-finite parameters".into()));
    }
    Ok(model)
}

/// Best `(n, s, sse)` for a fixed range over the box `n >= nugget_floor`,
/// `sill_floor <= s <= sill_cap`. The objective is a convex quadratic, so the
/// optimum is the unconstrained one or lies on an edge of the box.
fn solve_linear(
    data: &[(f64, f64, f64)],
    shape: VariogramShape,
    r: f64,
    mode: NuggetMode,
    nugget_floor: f64,
    sill_floor: f64,
    sill_cap: f64,
) -> (f64, f64, f64) {
    let (mut s0, mut s1, mut s2, mut y0, mut y1) = (0.0, 0.0, 0.0, 0.0, 0.0);
    for &(h, y, w) in data {
        let rho = shape.unit(h, r);
        s0 += w;
        s1 += w * rho;
        s2 += w * rho * rho;
        y0 += w * y;
        y1 += w * rho * y;
    }
    let sse = |n: f64, s: f64| -> f64 {
        data.iter()
            .map(|&(h, y, w)| w * (y - n - s * shape.unit(h, r)).powi(2))
            .sum()
    };
    let clamp_s = |s: f64| s.clamp(sill_floor, sill_cap);
    let n0 = nugget_floor;
    let mut candidates = vec![(n0, clamp_s(if s2 > 0.0 { (y1 - n0 * s1) / s2 } else { sill_floor }))];
    if mode == NuggetMode::Free {
        let det = s0 * s2 - s1 * s1;
        if det > 1e-12 * s0 * s2 {
            let n = (s2 * y0 - s1 * y1) / det;
            let s = (s0 * y1 - s1 * y0) / det;
            if n >= n0 && (sill_floor..=sill_cap).contains(&s) {
                candidates.push((n, s));
            }
        }
        for s in [sill_floor, sill_cap] {
            candidates.push((((y0 - s * s1) / s0).max(n0), s));
        }
    }
    candidates
        .into_iter()
        .map(|(n, s)| (n, s, sse(n, s)))
        .min_by(|a, b| a.2.total_cmp(&b.2))
        .expect("at least one candidate")
}

fn golden_min(f: impl Fn(f64) -> f64, mut a: f64, mut b: f64, tol: f64) -> f64 {
    let phi = 0.5 * (5f64.sqrt() - 1.0);
    let mut c = b - phi * (b - a);
    let mut d = a + phi * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    while (b - a).abs() > tol {
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - phi * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + phi * (b - a);
            fd = f(d);
        }
    }
    0.5 * (a + b)
}

/// Root-mean-square deviation between the model and the populated bins of
/// `emp`, divided by the mean empirical semivariance.
pub fn nrmse(model: &VariogramModel, emp: &EmpiricalVariogram) -> Result<f64> {
    let data = emp.populated();
    if data.is_empty() {
        return Err(Error::EmptyVariogram);
    }
    let n = data.len() as f64;
    let mean = data.iter().map(|d| d.1).sum::<f64>() / n;
    if mean == 0.0 {
        return Err(Error::Fit("NRMSE undefined: mean empirical semivariance is 0".into()));
    }
    let mse = data.iter().map(|&(h, y, _)| (model.gamma(h) - y).powi(2)).sum::<f64>() / n;
    Ok(mse.sqrt() / mean)
}

/// Default angular tolerance of directional variograms in degrees.
pub const DEFAULT_ANGULAR_TOLERANCE: f64 = 22.5;
/// Fewest lag pairs a directional variogram must collect before its cone
/// stops widening.
pub const MIN_DIRECTIONAL_PAIRS: usize = 300;
const TOLERANCE_STEPS: [f64; 6] = [22.5, 30.0, 45.0, 60.0, 75.0, 90.0];

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DirectionalFit {
    pub axis: usize,
    pub model: VariogramModel,
    pub angular_tolerance_deg: f64,
    pub pairs: usize,
    pub nrmse: Option<f64>,
    /// False when the fit carries no spatial structure at the sampled lags
    /// (structured sill negligible, or range below the shortest lag). The
    /// map then uses the median of the identifiable ranges for this axis.
    pub identifiable: bool,
}

/// Structured sill share below which a directional fit is treated as flat.
const MIN_STRUCTURED_SHARE: f64 = 0.01;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AnisotropyReport {
    pub map: AnisotropyMap,
    pub directional: Vec<DirectionalFit>,
    /// Largest total sill divided by smallest, minus one.
    pub sill_spread: f64,
    /// Largest nugget-to-total-sill ratio across axes.
    pub max_nugget_ratio: f64,
    pub sills_dissimilar: bool,
    pub nugget_not_small: bool,
}

/// Per-dimension sample standard deviations of the coordinates (`Σ₀`).
pub fn coordinate_scales(sample: &ValuedSample) -> Result<Vec<f64>> {
    (0..sample.dim())
        .map(|d| {
            let col: Vec<f64> = sample.points.iter().map(|p| p[d]).collect();
            let s = stats::sample_std(&col);
            if s > 0.0 {
                Ok(s)
            } else {
                Err(Error::InvalidInput(format!("sample does not span dimension {d}")))
            }
        })
        .collect()
}

/// Fits one directional variogram per axis on `Σ₀`-prescaled coordinates and
/// builds `Σ = diag(r_i)·Σ₀`. Axes whose default cone collects fewer than
/// [`MIN_DIRECTIONAL_PAIRS`] pairs get a wider cone.
pub fn build_anisotropy(
    sample: &ValuedSample,
    shape: VariogramShape,
    nugget_mode: NuggetMode,
    angular_tolerance_deg: f64,
) -> Result<AnisotropyReport> {
    let prescale = coordinate_scales(sample)?;
    let unit = AnisotropyMap::new(prescale.clone(), vec![1.0; prescale.len()])?;
    let scaled = sample.map_points(|p| unit.apply(p));
    let mut directional = Vec::with_capacity(sample.dim());
    for axis in 0..sample.dim() {
        let fit_axis = || -> Result<DirectionalFit> {
            let mut tol = angular_tolerance_deg;
            let mut emp = directional_variogram(&scaled, axis, tol, Binning::DIRECTIONAL);
            for &wider in TOLERANCE_STEPS.iter().filter(|&&t| t > angular_tolerance_deg) {
                let enough = matches!(&emp, Ok(e) if e.total_pairs() >= MIN_DIRECTIONAL_PAIRS
                    && e.populated().len() >= 3);
                if enough {
                    break;
                }
                tol = wider;
                emp = directional_variogram(&scaled, axis, tol, Binning::DIRECTIONAL);
            }
            let emp = emp?;
            let model = fit(&emp, shape, nugget_mode)?;
            let shortest = emp.populated().first().map_or(0.0, |b| b.0);
            Ok(DirectionalFit {
                axis,
                model,
                angular_tolerance_deg: tol,
                pairs: emp.total_pairs(),
                nrmse: nrmse(&model, &emp).ok(),
                identifiable: model.range >= shortest && model.sill > MIN_STRUCTURED_SHARE * model.total_sill(),
            })
        };
        directional.push(fit_axis().map_err(|e| Error::DirectionalFit { axis, source: Box::new(e) })?);
    }
    let sills: Vec<f64> = directional.iter().map(|d| d.model.total_sill()).collect();
    let smax = sills.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let smin = sills.iter().copied().fold(f64::INFINITY, f64::min);
    let sill_spread = smax / smin - 1.0;
    let max_nugget_ratio = directional
        .iter()
        .map(|d| d.model.nugget / d.model.total_sill())
        .fold(0.0, f64::max);
    let mut known: Vec<f64> = directional.iter().filter(|d| d.identifiable).map(|d| d.model.range).collect();
    known.sort_by(f64::total_cmp);
    let fallback = match known.len() {
        0 => 1.0,
        k if k % 2 == 1 => known[k / 2],
        k => 0.5 * (known[k / 2 - 1] + known[k / 2]),
    };
    let ranges = directional
        .iter()
        .map(|d| if d.identifiable { d.model.range } else { fallback })
        .collect();
    Ok(AnisotropyReport {
        map: AnisotropyMap::new(prescale, ranges)?,
        directional,
        sill_spread,
        max_nugget_ratio,
        sills_dissimilar: sill_spread > 0.5,
        nugget_not_small: max_nugget_ratio > 0.1,
    })
}
