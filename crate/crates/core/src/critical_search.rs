//! Step 3: model-guided search for configurations likely to exceed the MPE.
//!
//! The search runs in the isotropic coordinates `ι(X)` of the model, where
//! the variogram (and hence the delta measure) is direction-free.

use serde::{Deserialize, Serialize};

use crate::config_space::ConfigPoint;
use crate::error::{Error, Result};
use crate::kriging::GpiModel;
use crate::sampling::lhs_unit;
use crate::stats::{mean, norm_cdf, norm_ppf};
use crate::variogram::VariogramModel;

/// `δ_p`: the largest lag within which a point at distance `l` from a
/// threshold crosses it with probability at most `p`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DeltaMeasure {
    pub variogram: VariogramModel,
    pub sensitivity: f64,
}

impl DeltaMeasure {
    pub fn new(variogram: VariogramModel, sensitivity: f64) -> Result<Self> {
        if !(sensitivity > 0.0 && sensitivity < 0.5) {
            return Err(Error::InvalidInput(format!("sensitivity p must lie in (0, 0.5), got {sensitivity}")));
        }
        variogram.validate()?;
        Ok(Self { variogram, sensitivity })
    }

    /// `g(d) = √(2d)·|Φ⁻¹(p)|`.
    pub fn g(&self, d: f64) -> f64 {
        (2.0 * d).sqrt() * norm_ppf(self.sensitivity).abs()
    }

    pub fn eval(&self, l: f64) -> f64 {
        delta(self, l)
    }
}

/// `δ_p(l)`. The upper clamp sits at `g(n + s)` (total sill) so the three
/// branches meet; for models that approach their sill asymptotically the
/// inverse is additionally capped at the range.
pub fn delta(dm: &DeltaMeasure, l: f64) -> f64 {
    let v = &dm.variogram;
    let l = l.max(0.0);
    if l <= dm.g(v.nugget) {
        return 0.0;
    }
    if l >= dm.g(v.total_sill()) {
        return v.range;
    }
    let a = norm_ppf(dm.sensitivity);
    let target = 0.5 * (l / a).powi(2);
    match v.inverse(target) {
        Ok(h) => h.min(v.range),
        // target rounds onto an end of the open interval
        Err(_) if target <= v.nugget => 0.0,
        Err(_) => v.range,
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SearchParams {
    pub t_minus: f64,
    pub t_plus: f64,
    /// Sensitivity `p` of the delta measure.
    pub sensitivity: f64,
    /// Repulsion exponent `q`.
    pub repulsion: f64,
    pub iterations: usize,
    pub caps: (usize, usize),
    /// Minimum failure probability for a reported row.
    pub report_floor: f64,
}

impl SearchParams {
    pub fn new(t_minus: f64, t_plus: f64) -> Self {
        Self {
            t_minus,
            t_plus,
            sensitivity: 0.05,
            repulsion: 0.1,
            iterations: 8,
            caps: (10, 1000),
            report_floor: 0.05,
        }
    }

    /// Thresholds `±mpe`.
    pub fn symmetric(mpe: f64) -> Self {
        Self::new(-mpe, mpe)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.t_minus < self.t_plus) {
            return Err(Error::InvalidInput(format!(
                "thresholds must satisfy T- < T+, got {} and {}",
                self.t_minus, self.t_plus
            )));
        }
        if !(self.sensitivity > 0.0 && self.sensitivity < 0.5) {
            return Err(Error::InvalidInput(format!("sensitivity p must lie in (0, 0.5), got {}", self.sensitivity)));
        }
        if !(0.0..=1.0).contains(&self.repulsion) {
            return Err(Error::InvalidInput(format!("repulsion q must lie in [0, 1], got {}", self.repulsion)));
        }
        if self.iterations == 0 {
            return Err(Error::InvalidInput("iterations must be at least 1".into()));
        }
        if self.caps.0 == 0 || self.caps.0 > self.caps.1 {
            return Err(Error::InvalidInput(format!("invalid population caps {:?}", self.caps)));
        }
        if !(0.0..=1.0).contains(&self.report_floor) {
            return Err(Error::InvalidInput(format!("report floor must lie in [0, 1], got {}", self.report_floor)));
        }
        Ok(())
    }

    fn midpoint(&self) -> f64 {
        0.5 * (self.t_minus + self.t_plus)
    }

    fn distance_to_thresholds(&self, z: f64) -> f64 {
        (z - self.t_minus).abs().min((z - self.t_plus).abs())
    }
}

/// `ν_p`: product over dimensions of `ceil(extent_i / δ_p(l̄))`, with extents
/// measured in `ι(X)`, clamped to the caps.
pub fn required_sample_size(model: &GpiModel, params: &SearchParams) -> Result<usize> {
    params.validate()?;
    let values = &model.sample().values;
    if values.is_empty() {
        return Err(Error::InvalidInput("model sample is empty".into()));
    }
    let dm = DeltaMeasure::new(*model.variogram(), params.sensitivity)?;
    let lbar = mean(&values.iter().map(|&z| params.distance_to_thresholds(z)).collect::<Vec<_>>());
    let d = delta(&dm, lbar);
    let space = model.space();
    let extents: Vec<f64> = model
        .anisotropy()
        .diagonal()
        .iter()
        .zip(space.lower().iter().zip(space.upper()))
        .map(|(s, (lo, hi))| (hi - lo) / s)
        .collect();
    Ok(population_size(&extents, d, params.caps))
}

/// Eq. 15 arithmetic on isotropic extents.
pub fn population_size(extents: &[f64], delta: f64, caps: (usize, usize)) -> usize {
    if !(delta > 0.0) {
        return caps.1;
    }
    let mut nu = 1.0f64;
    for e in extents {
        nu *= (e / delta).ceil().max(1.0);
        if nu >= caps.1 as f64 {
            return caps.1;
        }
    }
    (nu as usize).clamp(caps.0, caps.1)
}

/// Algorithm 1 in isotropic coordinates. `bounds` are the per-axis limits of
/// `ι(X)`; candidate steps leaving them are clipped to the boundary.
/// Returns the moved population and its predicted values.
pub fn search(
    start: Vec<Vec<f64>>,
    f: impl Fn(&[f64]) -> f64,
    bounds: &[(f64, f64)],
    params: &SearchParams,
    dm: &DeltaMeasure,
) -> (Vec<Vec<f64>>, Vec<f64>) {
    let mut pop = start;
    let mut z: Vec<f64> = pop.iter().map(|x| f(x)).collect();
    let t0 = params.midpoint();
    let (tm, tp) = (params.t_minus, params.t_plus);
    for k in 1..=params.iterations {
        let alpha = 1.0 / (2.0 * k as f64);
        for j in 0..pop.len() {
            let (x, zj) = (pop[j].clone(), z[j]);
            let (d, s) = if zj > t0 {
                let d = if zj > tp { alpha * delta(dm, zj - tp) } else { 2.0 * alpha * delta(dm, tp - zj) };
                (d, 1.0)
            } else {
                let d = if zj < tm { alpha * delta(dm, tm - zj) } else { 2.0 * alpha * delta(dm, zj - tm) };
                (d, -1.0)
            };
            let mut candidates = vec![(x.clone(), zj)];
            if d > 0.0 {
                for (i, &(lo, hi)) in bounds.iter().enumerate() {
                    for sign in [1.0, -1.0] {
                        let mut c = x.clone();
                        c[i] = (c[i] + sign * d).clamp(lo, hi);
                        let zc = f(&c);
                        candidates.push((c, zc));
                    }
                }
            }
            let mut best = 0;
            let mut best_score = f64::NEG_INFINITY;
            for (h, (c, zc)) in candidates.iter().enumerate() {
                let dist = pop
                    .iter()
                    .enumerate()
                    .filter(|&(i, _)| i != j)
                    .map(|(_, p)| sq_dist(p, c))
                    .fold(f64::INFINITY, f64::min)
                    .sqrt();
                // a lone point has no neighbours to be repelled by
                let repel = if dist.is_finite() { dist.powf(params.repulsion / 2.0) } else { 1.0 };
                let score = s * (zc - t0) * repel;
                if score > best_score {
                    best_score = score;
                    best = h;
                }
            }
            let (c, zc) = candidates.swap_remove(best);
            pop[j] = c;
            z[j] = zc;
        }
    }
    (pop, z)
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum()
}

/// Output of Algorithm 2, as indices into the filtered population.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct FilterResult {
    pub lower: Vec<usize>,
    pub upper: Vec<usize>,
    pub middle: Vec<usize>,
    /// Exceedance probability of each `middle` entry.
    pub probabilities: Vec<f64>,
}

/// Probability that a normal `(mu, sigma)` lies outside `[t_minus, t_plus]`.
/// `sigma = 0` takes the limit: 1 on or beyond a threshold, else 0.
pub fn exceedance_probability(mu: f64, sigma: f64, t_minus: f64, t_plus: f64) -> f64 {
    if sigma > 0.0 {
        (norm_cdf((t_minus - mu) / sigma) + norm_cdf((mu - t_plus) / sigma)).min(1.0)
    } else if mu <= t_minus || mu >= t_plus {
        1.0
    } else {
        0.0
    }
}

/// Algorithm 2. `f` returns `(μ_x, σ_x)`; `p` is the filter probability.
pub fn filter<P>(points: &[P], f: impl Fn(&P) -> (f64, f64), t_minus: f64, t_plus: f64, p: f64) -> FilterResult {
    let a = norm_ppf(p);
    let mut out = FilterResult::default();
    for (idx, x) in points.iter().enumerate() {
        let (mu, sigma) = f(x);
        // with sigma = 0 the ratios are +inf beyond a threshold
        let below = mu < t_minus && (sigma == 0.0 || a <= (t_minus - mu) / sigma);
        let above = mu > t_plus && (sigma == 0.0 || a <= (mu - t_plus) / sigma);
        if below {
            out.lower.push(idx);
        } else if above {
            out.upper.push(idx);
        } else {
            out.middle.push(idx);
            out.probabilities.push(exceedance_probability(mu, sigma, t_minus, t_plus));
        }
    }
    out
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CriticalRow {
    pub config: ConfigPoint,
    pub source: Option<String>,
    /// Kriged deviation in dB.
    pub delta_db: f64,
    /// Inflated model error in dB.
    pub model_error_db: f64,
    pub probability: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CriticalReport {
    pub dimensions: Vec<String>,
    pub params: SearchParams,
    pub seed: u64,
    pub population: usize,
    /// Distinct snapped configurations after the search.
    pub snapped: usize,
    pub rows: Vec<CriticalRow>,
}

/// The full step-3 workflow: `ν_p`-sized Latin hypercube over `X`, search,
/// nearest snapping, a final kriging round and probability filtering.
pub fn run_critical_search(model: &GpiModel, params: &SearchParams, seed: u64) -> Result<CriticalReport> {
    params.validate()?;
    let space = model.space();
    let iota = model.anisotropy();
    let dm = DeltaMeasure::new(*model.variogram(), params.sensitivity)?;
    let population = required_sample_size(model, params)?.max(2);

    let (lower, upper) = (space.lower(), space.upper());
    let bounds: Vec<(f64, f64)> = iota
        .apply(&lower)
        .into_iter()
        .zip(iota.apply(&upper))
        .collect();
    let start: Vec<Vec<f64>> = lhs_unit(population, space.dim(), seed)?
        .into_iter()
        .map(|u| u.iter().zip(&bounds).map(|(t, &(lo, hi))| lo + t * (hi - lo)).collect())
        .collect();
    let system = model.system();
    let (moved, _) = search(start, |y| system.mean_iso(y), &bounds, params, &dm);

    let mut seen = std::collections::HashSet::new();
    let mut snapped = Vec::new();
    for y in &moved {
        if let Some(c) = space.snap_nearest(&iota.invert(y)) {
            if seen.insert(c.iter().map(|v| v.to_bits()).collect::<Vec<_>>()) {
                snapped.push(c);
            }
        }
    }

    let mut rows = Vec::new();
    for c in &snapped {
        let pred = model.krige(c)?;
        let probability = exceedance_probability(pred.mean, pred.inflated_std, params.t_minus, params.t_plus);
        if probability >= params.report_floor {
            rows.push(CriticalRow {
                config: c.clone(),
                source: space.source_name(c).map(str::to_owned),
                delta_db: pred.mean,
                model_error_db: pred.inflated_std,
                probability,
            });
        }
    }
    rows.sort_by(|a, b| b.probability.total_cmp(&a.probability));
    Ok(CriticalReport {
        dimensions: space.names().into_iter().map(str::to_owned).collect(),
        params: params.clone(),
        seed,
        population,
        snapped: snapped.len(),
        rows,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::variogram::VariogramShape;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn gauss(n: f64, s: f64, r: f64) -> VariogramModel {
        VariogramModel::new(VariogramShape::Gaussian, n, s, r).unwrap()
    }

    /// Bisection on `γ(h) = target` over `[0, r]` with the clamp branches.
    fn delta_oracle(v: &VariogramModel, p: f64, l: f64) -> f64 {
        let a = norm_ppf(p);
        let target = 0.5 * (l / a).powi(2);
        if target <= v.nugget {
            return 0.0;
        }
        if target >= v.gamma(v.range) {
            return v.range;
        }
        let (mut lo, mut hi) = (0.0f64, v.range);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if v.gamma(mid) < target {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        0.5 * (lo + hi)
    }

    #[test]
    fn delta_reference_value() {
        let dm = DeltaMeasure::new(gauss(10.0, 100.0, 100.0), 0.1).unwrap();
        // exact argument 0.5·(10/Φ⁻¹(0.1))² = 30.443
        assert_abs_diff_eq!(dm.eval(10.0), 23.9116, epsilon = 1e-4);
        assert_abs_diff_eq!(dm.eval(10.0), delta_oracle(&dm.variogram, 0.1, 10.0), epsilon = 1e-9);
    }

    #[test]
    fn delta_clamp_branches() {
        let dm = DeltaMeasure::new(gauss(10.0, 100.0, 100.0), 0.1).unwrap();
        assert_eq!(dm.eval(0.0), 0.0);
        assert_eq!(dm.eval(dm.g(10.0)), 0.0);
        assert_eq!(dm.eval(dm.g(110.0)), 100.0);
        assert_eq!(dm.eval(1e6), 100.0);
        assert!(DeltaMeasure::new(gauss(0.0, 1.0, 1.0), 0.5).is_err());
    }

    #[test]
    fn delta_matches_bisection_for_all_shapes() {
        for shape in VariogramShape::ALL {
            let v = VariogramModel::new(shape, 0.05, 0.5, 2.0).unwrap();
            for i in 1..50 {
                let p = i as f64 / 100.0;
                let dm = DeltaMeasure::new(v, p).unwrap();
                for j in 0..50 {
                    let l = j as f64 * 0.05;
                    let got = dm.eval(l);
                    let want = delta_oracle(&v, p, l);
                    assert!((got - want).abs() <= 1e-6 * want.max(1e-3), "{shape:?} p={p} l={l}: {got} vs {want}");
                }
            }
        }
    }

    proptest! {
        #[test]
        fn delta_monotone_and_bounded(
            n in 0.0f64..1.0, s in 0.01f64..5.0, r in 0.01f64..10.0,
            p in 0.01f64..0.49, l1 in 0.0f64..10.0, l2 in 0.0f64..10.0, shape in 0usize..3,
        ) {
            let v = VariogramModel::new(VariogramShape::ALL[shape], n, s, r).unwrap();
            let dm = DeltaMeasure::new(v, p).unwrap();
            let (a, b) = (dm.eval(l1.min(l2)), dm.eval(l1.max(l2)));
            prop_assert!(a >= 0.0 && b <= r);
            prop_assert!(a <= b + 1e-12);
            // smaller p never widens delta at fixed l
            let tighter = DeltaMeasure::new(v, p * 0.5).unwrap();
            prop_assert!(tighter.eval(l1) <= dm.eval(l1) + 1e-12);
        }
    }

    #[test]
    fn population_arithmetic() {
        assert_eq!(population_size(&[1.0, 1.0], 0.3, (1, 1000)), 16);
        assert_eq!(population_size(&[1.0, 1.0], 0.5, (10, 1000)), 10);
        assert_eq!(population_size(&[1.0, 1.0], 0.0, (10, 1000)), 1000);
        assert_eq!(population_size(&[100.0; 8], 0.1, (10, 1000)), 1000);
    }

    #[test]
    fn filter_examples() {
        let f = filter(&[(0.9, 0.2)], |&(m, s)| (m, s), -1.0, 1.0, 0.95);
        assert_eq!(f.middle, vec![0]);
        assert_abs_diff_eq!(f.probabilities[0], 0.30853753872598694, epsilon = 1e-9);

        let f = filter(&[(0.3, 0.0)], |&(m, s)| (m, s), -1.0, 1.0, 0.05);
        assert_eq!(f.middle, vec![0]);
        assert_eq!(f.probabilities, vec![0.0]);

        let p: f64 = 0.9;
        let mu = 1.0 + 0.2 * norm_ppf(p);
        let f = filter(&[(mu, 0.2)], |&(m, s)| (m, s), -1.0, 1.0, p);
        assert_eq!(f.upper, vec![0]);
    }

    proptest! {
        #[test]
        fn filter_partitions(pts in prop::collection::vec((-3.0f64..3.0, 0.0f64..2.0), 0..40), p in 0.01f64..0.99) {
            let f = filter(&pts, |&(m, s)| (m, s), -1.0, 1.0, p);
            let mut all: Vec<usize> = f.lower.iter().chain(&f.upper).chain(&f.middle).copied().collect();
            all.sort_unstable();
            prop_assert_eq!(all, (0..pts.len()).collect::<Vec<_>>());
            prop_assert_eq!(f.middle.len(), f.probabilities.len());
            prop_assert!(f.probabilities.iter().all(|q| (0.0..=1.0).contains(q)));
        }
    }

    #[test]
    fn one_dimensional_climb() {
        // inside the band the step shrinks with the distance to T+, so the
        // variogram must be long-ranged enough relative to its sill to cross
        let dm = DeltaMeasure::new(gauss(0.0, 0.05, 1.0), 0.1).unwrap();
        let mut params = SearchParams::new(-0.8, 0.8);
        params.sensitivity = 0.1;
        let (pop, z) = search(vec![vec![0.5]], |x| x[0], &[(0.0, 1.0)], &params, &dm);
        assert!(pop[0][0] >= 0.8 && pop[0][0] <= 1.0, "{pop:?}");
        assert_eq!(z[0], pop[0][0]);
    }

    #[test]
    fn zero_repulsion_is_pure_greed() {
        // two points at the same spot: with q = 0 the duplicate distance is irrelevant
        let dm = DeltaMeasure::new(gauss(0.0, 0.1, 0.5), 0.1).unwrap();
        let mut params = SearchParams::new(-0.8, 0.8);
        params.repulsion = 0.0;
        params.iterations = 1;
        let (pop, _) = search(vec![vec![0.5], vec![0.5]], |x| x[0], &[(0.0, 1.0)], &params, &dm);
        assert!(pop.iter().all(|p| p[0] > 0.5));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]
        #[test]
        fn search_stays_inside(starts in prop::collection::vec((0.0f64..1.0, 0.0f64..2.0), 1..12), q in 0.0f64..1.0) {
            let dm = DeltaMeasure::new(gauss(0.0, 0.3, 0.6), 0.1).unwrap();
            let mut params = SearchParams::new(-0.5, 0.5);
            params.repulsion = q;
            params.iterations = 3;
            let start: Vec<Vec<f64>> = starts.iter().map(|&(a, b)| vec![a, b]).collect();
            let n = start.len();
            let f = |x: &[f64]| (3.0 * x[0]).sin() * x[1];
            let (pop, z) = search(start, f, &[(0.0, 1.0), (0.0, 2.0)], &params, &dm);
            prop_assert_eq!(pop.len(), n);
            prop_assert_eq!(z.len(), n);
            for p in &pop {
                prop_assert!((0.0..=1.0).contains(&p[0]) && (0.0..=2.0).contains(&p[1]));
            }
        }
    }
}
