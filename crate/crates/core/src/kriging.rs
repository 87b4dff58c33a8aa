//! Ordinary kriging under a GPI model `(S̄, ι, γ)`.

use std::collections::HashSet;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::config_space::{ConfigPoint, ConfigSpace};
use crate::error::{Error, Result};
use crate::stats;
use crate::variogram::{AnisotropyMap, EmpiricalVariogram, VariogramModel};

/// Configuration points with their measured deviations (dB).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ValuedSample {
    pub points: Vec<ConfigPoint>,
    pub values: Vec<f64>,
    pub ids: Vec<String>,
}

impl ValuedSample {
    /// Builds a sample with ids `c0001`, `c0002`, ...
    pub fn new(points: Vec<ConfigPoint>, values: Vec<f64>) -> Result<Self> {
        let ids = (1..=points.len()).map(default_id).collect();
        Self::with_ids(points, values, ids)
    }

    pub fn with_ids(points: Vec<ConfigPoint>, values: Vec<f64>, ids: Vec<String>) -> Result<Self> {
        if points.len() != values.len() || points.len() != ids.len() {
            return Err(Error::InvalidInput(format!(
                "sample has {} points, {} values and {} ids",
                points.len(),
                values.len(),
                ids.len()
            )));
        }
        if let Some(first) = points.first() {
            if points.iter().any(|p| p.len() != first.len()) {
                return Err(Error::InvalidInput("sample points differ in dimension".into()));
            }
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidInput(format!("non-finite value at {}", ids[i])));
        }
        if let Some(i) = points.iter().position(|p| p.iter().any(|v| !v.is_finite())) {
            return Err(Error::InvalidInput(format!("non-finite coordinate at {}", ids[i])));
        }
        let mut seen = HashSet::new();
        for (p, id) in points.iter().zip(&ids) {
            if !seen.insert(p.iter().map(|v| v.to_bits()).collect::<Vec<_>>()) {
                return Err(Error::InvalidInput(format!("duplicate sample point {id}")));
            }
        }
        Ok(Self { points, values, ids })
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.points.first().map_or(0, |p| p.len())
    }

    /// Same values and ids at transformed locations.
    pub fn map_points(&self, f: impl Fn(&[f64]) -> Vec<f64>) -> Self {
        Self {
            points: self.points.iter().map(|p| ConfigPoint(f(p))).collect(),
            values: self.values.clone(),
            ids: self.ids.clone(),
        }
    }

    /// The sample without the rows in `skip`.
    pub fn without(&self, skip: &[usize]) -> Self {
        let skip: HashSet<usize> = skip.iter().copied().collect();
        let keep: Vec<usize> = (0..self.len()).filter(|i| !skip.contains(i)).collect();
        Self {
            points: keep.iter().map(|&i| self.points[i].clone()).collect(),
            values: keep.iter().map(|&i| self.values[i]).collect(),
            ids: keep.iter().map(|&i| self.ids[i].clone()).collect(),
        }
    }
}

pub fn default_id(i: usize) -> String {
    format!("c{i:04}")
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub mean: f64,
    /// Kriging standard deviation `e_k(x)`.
    pub kriging_std: f64,
    /// `e(x) = e_k(x)·(1 + NRMSE)`.
    pub inflated_std: f64,
}

/// Relative pivot tolerance of the LU factorization.
pub const PIVOT_TOLERANCE: f64 = 1e-12;

/// Factorized ordinary-kriging system for one sample and variogram.
#[derive(Debug)]
pub struct KrigingSystem {
    variogram: VariogramModel,
    /// `ι`-transformed sample locations.
    locs: Vec<Vec<f64>>,
    /// Augmented matrix, row-major, kept for iterative refinement.
    matrix: Vec<f64>,
    lu: Vec<f64>,
    perm: Vec<usize>,
    /// Dual weights `A⁻¹ [z; 0]`.
    dual: Vec<f64>,
    clamped: AtomicUsize,
}

impl KrigingSystem {
    pub fn new(sample: &ValuedSample, iota: &AnisotropyMap, variogram: VariogramModel) -> Result<Self> {
        if sample.is_empty() {
            return Err(Error::InvalidInput("kriging needs a non-empty sample".into()));
        }
        if sample.dim() != iota.dim() {
            return Err(Error::InvalidInput(format!(
                "sample dimension {} does not match anisotropy dimension {}",
                sample.dim(),
                iota.dim()
            )));
        }
        let locs: Vec<Vec<f64>> = sample.points.iter().map(|p| iota.apply(p)).collect();
        let k = locs.len();
        let n = k + 1;
        let mut a = vec![0.0; n * n];
        for i in 0..k {
            for j in (i + 1)..k {
                let g = variogram.gamma(stats::euclidean(&locs[i], &locs[j]));
                a[i * n + j] = g;
                a[j * n + i] = g;
            }
            a[i * n + k] = 1.0;
            a[k * n + i] = 1.0;
        }
        let (lu, perm) = lu_factor(&a, n).map_err(|_| singular_error(sample, &locs))?;
        let mut sys = Self {
            variogram,
            locs,
            matrix: a,
            lu,
            perm,
            dual: Vec::new(),
            clamped: AtomicUsize::new(0),
        };
        let mut rhs = sample.values.clone();
        rhs.push(0.0);
        sys.dual = sys.solve(&rhs);
        Ok(sys)
    }

    pub fn len(&self) -> usize {
        self.locs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.locs.is_empty()
    }

    /// How many computed variances came out negative and were clamped to 0.
    pub fn negative_variance_clamps(&self) -> usize {
        self.clamped.load(Ordering::Relaxed)
    }

    fn solve(&self, rhs: &[f64]) -> Vec<f64> {
        let n = rhs.len();
        let mut x = lu_solve(&self.lu, &self.perm, rhs);
        // one step of iterative refinement
        let resid: Vec<f64> = (0..n)
            .map(|i| rhs[i] - (0..n).map(|j| self.matrix[i * n + j] * x[j]).sum::<f64>())
            .collect();
        let dx = lu_solve(&self.lu, &self.perm, &resid);
        for (a, b) in x.iter_mut().zip(dx) {
            *a += b;
        }
        x
    }

    fn rhs(&self, y: &[f64]) -> (Vec<f64>, Option<usize>) {
        let mut b = Vec::with_capacity(self.locs.len() + 1);
        let mut hit = None;
        for (i, l) in self.locs.iter().enumerate() {
            let h = stats::euclidean(l, y);
            if h == 0.0 {
                hit = Some(i);
            }
            b.push(self.variogram.gamma(h));
        }
        b.push(1.0);
        (b, hit)
    }

    /// Kriging mean at a point already in `ι`-space.
    pub fn mean_iso(&self, y: &[f64]) -> f64 {
        let (b, _) = self.rhs(y);
        b.iter().zip(&self.dual).map(|(a, c)| a * c).sum()
    }

    /// Weights `w` and Lagrange multiplier `μ` at a point in `ι`-space.
    pub fn weights_iso(&self, y: &[f64]) -> (Vec<f64>, f64) {
        let (b, hit) = self.rhs(y);
        if let Some(i) = hit {
            let mut w = vec![0.0; self.len()];
            w[i] = 1.0;
            return (w, 0.0);
        }
        let mut w = self.solve(&b);
        let mu = w.pop().expect("augmented solution");
        (w, mu)
    }

    /// `(mean, variance)` at a point in `ι`-space.
    pub fn predict_iso(&self, y: &[f64], values: &[f64]) -> (f64, f64) {
        let (b, hit) = self.rhs(y);
        if let Some(i) = hit {
            return (values[i], 0.0);
        }
        let sol = self.solve(&b);
        let k = self.len();
        let mean = sol[..k].iter().zip(values).map(|(w, z)| w * z).sum();
        let var = sol[..k].iter().zip(&b[..k]).map(|(w, g)| w * g).sum::<f64>() + sol[k];
        if var < 0.0 {
            self.clamped.fetch_add(1, Ordering::Relaxed);
            (mean, 0.0)
        } else {
            (mean, var)
        }
    }
}

fn singular_error(sample: &ValuedSample, locs: &[Vec<f64>]) -> Error {
    let mut best = (0, 1.min(locs.len() - 1), f64::INFINITY);
    for i in 0..locs.len() {
        for j in (i + 1)..locs.len() {
            let d = stats::euclidean(&locs[i], &locs[j]);
            if d < best.2 {
                best = (i, j, d);
            }
        }
    }
    Error::SingularMatrix {
        first: sample.ids[best.0].clone(),
        second: sample.ids[best.1].clone(),
        distance: best.2,
    }
}

struct Singular;

fn lu_factor(a: &[f64], n: usize) -> std::result::Result<(Vec<f64>, Vec<usize>), Singular> {
    let mut lu = a.to_vec();
    let mut perm: Vec<usize> = (0..n).collect();
    let scale = a.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let tol = PIVOT_TOLERANCE * scale.max(f64::MIN_POSITIVE);
    for col in 0..n {
        let (p, pmax) = (col..n)
            .map(|r| (r, lu[r * n + col].abs()))
            .fold((col, -1.0), |acc, x| if x.1 > acc.1 { x } else { acc });
        if pmax <= tol {
            return Err(Singular);
        }
        if p != col {
            for j in 0..n {
                lu.swap(col * n + j, p * n + j);
            }
            perm.swap(col, p);
        }
        let pivot = lu[col * n + col];
        for r in (col + 1)..n {
            let f = lu[r * n + col] / pivot;
            lu[r * n + col] = f;
            if f != 0.0 {
                for j in (col + 1)..n {
                    lu[r * n + j] -= f * lu[col * n + j];
                }
            }
        }
    }
    Ok((lu, perm))
}

fn lu_solve(lu: &[f64], perm: &[usize], b: &[f64]) -> Vec<f64> {
    let n = b.len();
    let mut x: Vec<f64> = perm.iter().map(|&p| b[p]).collect();
    for i in 0..n {
        let mut s = x[i];
        for j in 0..i {
            s -= lu[i * n + j] * x[j];
        }
        x[i] = s;
    }
    for i in (0..n).rev() {
        let mut s = x[i];
        for j in (i + 1)..n {
            s -= lu[i * n + j] * x[j];
        }
        x[i] = s / lu[i * n + i];
    }
    x
}

/// The GPI model triple `(S̄, ι, γ)` with its fit metadata and a cached
/// factorization of the kriging system.
#[derive(Clone, Debug)]
pub struct GpiModel {
    sample: ValuedSample,
    anisotropy: AnisotropyMap,
    variogram: VariogramModel,
    fit_nrmse: f64,
    space: ConfigSpace,
    empirical: Option<EmpiricalVariogram>,
    outliers: Vec<usize>,
    system: Arc<KrigingSystem>,
}

impl GpiModel {
    pub fn new(
        sample: ValuedSample,
        anisotropy: AnisotropyMap,
        variogram: VariogramModel,
        fit_nrmse: f64,
        space: ConfigSpace,
    ) -> Result<Self> {
        variogram.validate()?;
        anisotropy.validate()?;
        if !(fit_nrmse >= 0.0) {
            return Err(Error::InvalidInput(format!("fit NRMSE must be >= 0, got {fit_nrmse}")));
        }
        if sample.dim() != space.dim() {
            return Err(Error::InvalidInput(format!(
                "sample dimension {} does not match space dimension {}",
                sample.dim(),
                space.dim()
            )));
        }
        let system = Arc::new(KrigingSystem::new(&sample, &anisotropy, variogram)?);
        Ok(Self {
            sample,
            anisotropy,
            variogram,
            fit_nrmse,
            space,
            empirical: None,
            outliers: Vec::new(),
            system,
        })
    }

    pub fn with_empirical(mut self, emp: EmpiricalVariogram) -> Self {
        self.empirical = Some(emp);
        self
    }

    pub fn with_outliers(mut self, outliers: Vec<usize>) -> Self {
        self.outliers = outliers;
        self
    }

    pub fn sample(&self) -> &ValuedSample {
        &self.sample
    }

    pub fn anisotropy(&self) -> &AnisotropyMap {
        &self.anisotropy
    }

    pub fn variogram(&self) -> &VariogramModel {
        &self.variogram
    }

    pub fn fit_nrmse(&self) -> f64 {
        self.fit_nrmse
    }

    pub fn space(&self) -> &ConfigSpace {
        &self.space
    }

    pub fn empirical(&self) -> Option<&EmpiricalVariogram> {
        self.empirical.as_ref()
    }

    /// Sample rows left out of the isotropic variogram.
    pub fn outliers(&self) -> &[usize] {
        &self.outliers
    }

    pub fn system(&self) -> &KrigingSystem {
        &self.system
    }

    fn check_dim(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.space.dim() {
            return Err(Error::InvalidInput(format!(
                "point has {} coordinates, model expects {}",
                x.len(),
                self.space.dim()
            )));
        }
        Ok(())
    }

    pub fn krige(&self, x: &[f64]) -> Result<Prediction> {
        self.check_dim(x)?;
        let (mean, var) = self.system.predict_iso(&self.anisotropy.apply(x), &self.sample.values);
        let kriging_std = var.sqrt();
        Ok(Prediction {
            mean,
            kriging_std,
            inflated_std: kriging_std * (1.0 + self.fit_nrmse),
        })
    }

    /// Kriging mean only; cheaper than [`krige`](Self::krige).
    pub fn mean(&self, x: &[f64]) -> Result<f64> {
        self.check_dim(x)?;
        Ok(self.system.mean_iso(&self.anisotropy.apply(x)))
    }

    /// Kriging weights and Lagrange multiplier at `x`.
    pub fn weights(&self, x: &[f64]) -> Result<(Vec<f64>, f64)> {
        self.check_dim(x)?;
        Ok(self.system.weights_iso(&self.anisotropy.apply(x)))
    }
}

/// `(z − ẑ(x)) / e(x)` for every test point, using the inflated error.
pub fn standardized_residuals(model: &GpiModel, test: &ValuedSample) -> Result<Vec<f64>> {
    test.points
        .iter()
        .zip(&test.values)
        .zip(&test.ids)
        .map(|((x, &z), id)| {
            let p = model.krige(x)?;
            if p.inflated_std == 0.0 {
                return Err(Error::ZeroResidualDenominator { id: id.clone() });
            }
            Ok((z - p.mean) / p.inflated_std)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::variogram::VariogramShape;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, StandardNormal};

    fn random_sample(k: usize, dim: usize, seed: u64) -> ValuedSample {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let pts = (0..k).map(|_| ConfigPoint((0..dim).map(|_| rng.random()).collect())).collect();
        let vals = (0..k).map(|_| rng.random::<f64>() * 2.0 - 1.0).collect();
        ValuedSample::new(pts, vals).unwrap()
    }

    fn model(sample: ValuedSample, v: VariogramModel) -> GpiModel {
        let dim = sample.dim();
        GpiModel::new(sample, AnisotropyMap::identity(dim), v, 0.1, ConfigSpace::unit_cube(dim)).unwrap()
    }

    fn exp_model(nugget: f64) -> VariogramModel {
        VariogramModel::new(VariogramShape::Exponential, nugget, 1.0, 0.5).unwrap()
    }

    #[test]
    fn exact_interpolation() {
        let s = random_sample(40, 3, 1);
        let m = model(s.clone(), exp_model(0.0));
        for (p, &z) in s.points.iter().zip(&s.values) {
            let pred = m.krige(p).unwrap();
            assert_abs_diff_eq!(pred.mean, z, epsilon = 1e-9);
            assert_eq!(pred.kriging_std, 0.0);
            assert_abs_diff_eq!(m.mean(p).unwrap(), z, epsilon = 1e-9);
        }
    }

    #[test]
    fn single_point_variance() {
        let s = ValuedSample::new(vec![ConfigPoint(vec![0.2, 0.2])], vec![1.5]).unwrap();
        let v = exp_model(0.0);
        let m = model(s, v);
        let x = [0.5, 0.6];
        let (w, _) = m.weights(&x).unwrap();
        assert_abs_diff_eq!(w[0], 1.0, epsilon = 1e-12);
        let h = stats::euclidean(&[0.2, 0.2], &x);
        let p = m.krige(&x).unwrap();
        assert_abs_diff_eq!(p.kriging_std.powi(2), 2.0 * v.gamma(h), epsilon = 1e-12);
        assert_abs_diff_eq!(p.mean, 1.5, epsilon = 1e-12);
        assert_abs_diff_eq!(p.inflated_std, p.kriging_std * 1.1, epsilon = 1e-12);
    }

    #[test]
    fn variance_matches_double_sum() {
        let s = random_sample(30, 2, 2);
        let v = VariogramModel::new(VariogramShape::Spherical, 0.05, 0.8, 0.7).unwrap();
        let m = model(s.clone(), v);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..20 {
            let x = [rng.random::<f64>(), rng.random::<f64>()];
            let (w, _) = m.weights(&x).unwrap();
            let mut var = 0.0;
            for i in 0..w.len() {
                var += 2.0 * w[i] * v.gamma(stats::euclidean(&s.points[i], &x));
                for j in 0..w.len() {
                    var -= w[i] * w[j] * v.gamma(stats::euclidean(&s.points[i], &s.points[j]));
                }
            }
            let p = m.krige(&x).unwrap();
            assert_abs_diff_eq!(p.kriging_std.powi(2), var, epsilon = 1e-9);
        }
    }

    #[test]
    fn weights_sum_to_one() {
        let s = random_sample(100, 3, 4);
        let m = model(s, VariogramModel::new(VariogramShape::Gaussian, 0.0, 1.0, 0.8).unwrap());
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..200 {
            let x: Vec<f64> = (0..3).map(|_| rng.random()).collect();
            let (w, _) = m.weights(&x).unwrap();
            assert_abs_diff_eq!(w.iter().sum::<f64>(), 1.0, epsilon = 1e-10);
        }
    }

    #[test]
    fn duplicate_point_is_singular() {
        // two distinct points closer than the pivot tolerance can resolve
        let pts = vec![
            ConfigPoint(vec![0.1, 0.1]),
            ConfigPoint(vec![0.1, f64::from_bits(0.1f64.to_bits() + 1)]),
            ConfigPoint(vec![0.9, 0.4]),
        ];
        let s = ValuedSample::new(pts, vec![1.0, 2.0, 3.0]).unwrap();
        let err = GpiModel::new(s, AnisotropyMap::identity(2), exp_model(0.0), 0.0, ConfigSpace::unit_cube(2)).unwrap_err();
        match err {
            Error::SingularMatrix { first, second, .. } => {
                assert_eq!((first.as_str(), second.as_str()), ("c0001", "c0002"));
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn duplicate_sample_rejected() {
        let pts = vec![ConfigPoint(vec![0.1]), ConfigPoint(vec![0.1])];
        assert!(ValuedSample::new(pts, vec![1.0, 2.0]).is_err());
    }

    #[test]
    fn residuals_zero_denominator() {
        let s = random_sample(20, 2, 6);
        let m = model(s.clone(), exp_model(0.0));
        let test = ValuedSample::with_ids(vec![s.points[3].clone()], vec![0.0], vec!["t7".into()]).unwrap();
        match standardized_residuals(&m, &test) {
            Err(Error::ZeroResidualDenominator { id }) => assert_eq!(id, "t7"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn residual_zero_at_prediction() {
        let s = random_sample(20, 2, 7);
        let m = model(s, exp_model(0.0));
        let x = ConfigPoint(vec![0.33, 0.71]);
        let z = m.krige(&x).unwrap().mean;
        let test = ValuedSample::new(vec![x], vec![z]).unwrap();
        assert_abs_diff_eq!(standardized_residuals(&m, &test).unwrap()[0], 0.0, epsilon = 1e-12);
    }

    #[test]
    fn pure_nugget_residuals_have_unit_variance() {
        let mut vars = Vec::new();
        for seed in 0..20 {
            let mut rng = ChaCha8Rng::seed_from_u64(100 + seed);
            let mut draw = |n: usize| {
                let pts: Vec<ConfigPoint> = (0..n).map(|_| ConfigPoint(vec![rng.random(), rng.random()])).collect();
                let vals: Vec<f64> = (0..n).map(|_| StandardNormal.sample(&mut rng)).collect();
                ValuedSample::new(pts, vals).unwrap()
            };
            let s = draw(100);
            let t = draw(50);
            // pure nugget: the structured part is negligible and reaches its sill at once
            let v = VariogramModel::new(VariogramShape::Exponential, 1.0, 1e-9, 1e-9).unwrap();
            let m = GpiModel::new(s, AnisotropyMap::identity(2), v, 0.0, ConfigSpace::unit_cube(2)).unwrap();
            let r = standardized_residuals(&m, &t).unwrap();
            vars.push(stats::sample_std(&r).powi(2));
        }
        let inside = vars.iter().filter(|&&v| (v - 1.0).abs() <= 0.3 * 1.0 + 1e-12).count();
        assert!(inside >= 17, "{vars:?}");
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]
        #[test]
        fn translation_equivariance(c in -50.0f64..50.0, seed in 0u64..500, x in 0.0f64..1.0, y in 0.0f64..1.0) {
            let s = random_sample(25, 2, seed);
            let shifted = ValuedSample::new(s.points.clone(), s.values.iter().map(|v| v + c).collect()).unwrap();
            let a = model(s, exp_model(0.1)).krige(&[x, y]).unwrap();
            let b = model(shifted, exp_model(0.1)).krige(&[x, y]).unwrap();
            prop_assert!((b.mean - a.mean - c).abs() < 1e-8);
            prop_assert!((b.kriging_std - a.kriging_std).abs() < 1e-10);
        }

        #[test]
        fn variance_ignores_values(seed in 0u64..500, x in 0.0f64..1.0, y in 0.0f64..1.0) {
            let s = random_sample(25, 2, seed);
            let mut vals = s.values.clone();
            vals.reverse();
            let permuted = ValuedSample::new(s.points.clone(), vals).unwrap();
            let a = model(s, exp_model(0.0)).krige(&[x, y]).unwrap();
            let b = model(permuted, exp_model(0.0)).krige(&[x, y]).unwrap();
            prop_assert!((a.kriging_std - b.kriging_std).abs() < 1e-12);
        }
    }
}
