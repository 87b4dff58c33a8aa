//! Latin hypercube sampling with maximin placement, mapped onto the index
//! domain of a [`ConfigSpace`] and snapped to measurable configurations.

use std::collections::HashSet;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::config_space::{ConfigPoint, ConfigSpace, Treatment, POWER_INDEX_UPPER};
use crate::error::{Error, Result};

pub const DEFAULT_INITIAL_SIZE: usize = 400;
pub const DEFAULT_TEST_SIZE: usize = 50;
/// Candidate permutation sets scored for the maximin design.
pub const MAXIMIN_CANDIDATES: usize = 50;
pub const MAX_RETRIES: usize = 100;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SampleMode {
    Initial,
    Test,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct LhsPlan {
    pub size: usize,
    pub seed: u64,
    pub mode: SampleMode,
}

impl LhsPlan {
    pub fn initial(seed: u64) -> Self {
        Self { size: DEFAULT_INITIAL_SIZE, seed, mode: SampleMode::Initial }
    }

    pub fn test(seed: u64) -> Self {
        Self { size: DEFAULT_TEST_SIZE, seed, mode: SampleMode::Test }
    }

    pub fn with_size(mut self, size: usize) -> Self {
        self.size = size;
        self
    }
}

/// Case assignment of a Latin hypercube: `cases[i][d]` is the stratum of
/// point `i` along dimension `d`. Every column is a permutation of `0..k`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LatinDesign {
    pub cases: Vec<Vec<usize>>,
}

impl LatinDesign {
    pub fn random<R: Rng + ?Sized>(k: usize, n: usize, rng: &mut R) -> Self {
        let mut cases = vec![vec![0usize; n]; k];
        let mut perm: Vec<usize> = (0..k).collect();
        for d in 0..n {
            perm.shuffle(rng);
            for (row, &c) in cases.iter_mut().zip(&perm) {
                row[d] = c;
            }
        }
        Self { cases }
    }

    /// Best of `candidates` random designs by minimal pairwise case distance.
    pub fn maximin<R: Rng + ?Sized>(k: usize, n: usize, candidates: usize, rng: &mut R) -> Self {
        let mut best = Self::random(k, n, rng);
        let mut best_score = best.min_case_distance_sq();
        for _ in 1..candidates.max(1) {
            let cand = Self::random(k, n, rng);
            let score = cand.min_case_distance_sq();
            if score > best_score {
                best = cand;
                best_score = score;
            }
        }
        best
    }

    pub fn size(&self) -> usize {
        self.cases.len()
    }

    /// Squared minimal Euclidean distance between occupied cases, in case units.
    pub fn min_case_distance_sq(&self) -> usize {
        let mut best = usize::MAX;
        for i in 0..self.cases.len() {
            for j in (i + 1)..self.cases.len() {
                let d: usize = self.cases[i]
                    .iter()
                    .zip(&self.cases[j])
                    .map(|(&a, &b)| a.abs_diff(b).pow(2))
                    .sum();
                best = best.min(d);
            }
        }
        best
    }

    /// Uniform position inside case `row`, in `[0, 1]^n`.
    pub fn place<R: Rng + ?Sized>(&self, row: usize, rng: &mut R) -> Vec<f64> {
        let k = self.size() as f64;
        self.cases[row]
            .iter()
            .map(|&c| (c as f64 + rng.random::<f64>()) / k)
            .collect()
    }
}

/// A maximin Latin hypercube of `k` points in `[0, 1]^n`.
pub fn lhs_unit(k: usize, n: usize, seed: u64) -> Result<Vec<Vec<f64>>> {
    check_size(k)?;
    if n == 0 {
        return Err(Error::InvalidInput("dimension count must be positive".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let design = LatinDesign::maximin(k, n, MAXIMIN_CANDIDATES, &mut rng);
    Ok((0..k).map(|i| design.place(i, &mut rng)).collect())
}

/// The index domain `J_X` for a sample of size `k`: continuous dimensions keep
/// their bounds, raster dimensions are widened by one stratum so the top
/// raster value gets a full case, and the power dimension becomes `[0, 21]`.
pub fn index_domain(space: &ConfigSpace, k: usize) -> Vec<(f64, f64)> {
    space
        .dimensions
        .iter()
        .map(|d| match d.treatment {
            Treatment::Continuous => (d.lower, d.upper),
            Treatment::DiscreteRaster => (d.lower, d.upper + d.width() / k as f64),
            Treatment::IndexBased => (0.0, POWER_INDEX_UPPER),
        })
        .collect()
}

fn to_domain(unit: &[f64], domain: &[(f64, f64)]) -> Vec<f64> {
    unit.iter()
        .zip(domain)
        .map(|(&u, &(lo, hi))| lo + u * (hi - lo))
        .collect()
}

fn key(p: &[f64]) -> Vec<u64> {
    p.iter().map(|v| v.to_bits()).collect()
}

fn check_size(k: usize) -> Result<()> {
    if k < 2 {
        return Err(Error::InvalidInput(format!("sample size must be at least 2, got {k}")));
    }
    Ok(())
}

/// The initial sample `S`: maximin LHS mapped to the index domain and snapped
/// to the closest meaningful configuration below each point. Colliding points
/// are re-jittered within their case, then the whole design is redrawn.
pub fn generate_initial_sample(space: &ConfigSpace, plan: &LhsPlan) -> Result<Vec<ConfigPoint>> {
    if plan.mode != SampleMode::Initial {
        return Err(Error::InvalidInput("plan mode must be initial".into()));
    }
    check_size(plan.size)?;
    let k = plan.size;
    let domain = index_domain(space, k);
    let mut rng = ChaCha8Rng::seed_from_u64(plan.seed);
    let mut design = LatinDesign::maximin(k, space.dim(), MAXIMIN_CANDIDATES, &mut rng);
    let mut points: Vec<ConfigPoint> = (0..k)
        .map(|i| space.snap_floor(&to_domain(&design.place(i, &mut rng), &domain)))
        .collect();

    for attempt in 0..=MAX_RETRIES {
        let collisions = colliding_rows(&points, &HashSet::new());
        if collisions.is_empty() {
            return Ok(points);
        }
        if attempt == MAX_RETRIES {
            break;
        }
        if attempt < MAX_RETRIES / 2 {
            for i in collisions {
                points[i] = space.snap_floor(&to_domain(&design.place(i, &mut rng), &domain));
            }
        } else {
            design = LatinDesign::random(k, space.dim(), &mut rng);
            points = (0..k)
                .map(|i| space.snap_floor(&to_domain(&design.place(i, &mut rng), &domain)))
                .collect();
        }
    }
    Err(Error::Sampling(format!(
        "could not draw {k} distinct configurations after {MAX_RETRIES} retries"
    )))
}

/// The test sample `T`: a plain random Latin design (no maximin, so points are
/// locally uniform), snapped like `S`, disjoint from `existing`. Points that
/// still collide after the retry budget are dropped.
pub fn generate_test_sample(
    space: &ConfigSpace,
    plan: &LhsPlan,
    existing: &[ConfigPoint],
) -> Result<Vec<ConfigPoint>> {
    if plan.mode != SampleMode::Test {
        return Err(Error::InvalidInput("plan mode must be test".into()));
    }
    check_size(plan.size)?;
    let k = plan.size;
    let domain = index_domain(space, k);
    let taken: HashSet<Vec<u64>> = existing.iter().map(|p| key(p)).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(plan.seed);
    let design = LatinDesign::random(k, space.dim(), &mut rng);
    let mut points: Vec<ConfigPoint> = (0..k)
        .map(|i| space.snap_floor(&to_domain(&design.place(i, &mut rng), &domain)))
        .collect();
    for _ in 0..MAX_RETRIES {
        let collisions = colliding_rows(&points, &taken);
        if collisions.is_empty() {
            return Ok(points);
        }
        for i in collisions {
            points[i] = space.snap_floor(&to_domain(&design.place(i, &mut rng), &domain));
        }
    }
    let drop: HashSet<usize> = colliding_rows(&points, &taken).into_iter().collect();
    Ok(points
        .into_iter()
        .enumerate()
        .filter(|(i, _)| !drop.contains(i))
        .map(|(_, p)| p)
        .collect())
}

/// Rows equal to an earlier row or to a taken point.
fn colliding_rows(points: &[ConfigPoint], taken: &HashSet<Vec<u64>>) -> Vec<usize> {
    let mut seen = HashSet::new();
    let mut out = Vec::new();
    for (i, p) in points.iter().enumerate() {
        let k = key(p);
        if taken.contains(&k) || !seen.insert(k) {
            out.push(i);
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config_space::{build_sar_array_space, Role};
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn assert_latin(points: &[Vec<f64>]) {
        let k = points.len();
        for d in 0..points[0].len() {
            let mut strata: Vec<usize> = points.iter().map(|p| ((p[d] * k as f64) as usize).min(k - 1)).collect();
            strata.sort_unstable();
            assert_eq!(strata, (0..k).collect::<Vec<_>>());
        }
    }

    #[test]
    fn latin_property_k4() {
        let pts = lhs_unit(4, 2, 7).unwrap();
        assert_latin(&pts);
    }

    #[test]
    fn deterministic() {
        assert_eq!(lhs_unit(30, 3, 11).unwrap(), lhs_unit(30, 3, 11).unwrap());
        assert_ne!(lhs_unit(30, 3, 11).unwrap(), lhs_unit(30, 3, 12).unwrap());
    }

    #[test]
    fn maximin_beats_median_random() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut scores: Vec<usize> = (0..100)
            .map(|_| LatinDesign::random(50, 2, &mut rng).min_case_distance_sq())
            .collect();
        scores.sort_unstable();
        let median = scores[50];
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let best = LatinDesign::maximin(50, 2, MAXIMIN_CANDIDATES, &mut rng);
        assert!(best.min_case_distance_sq() >= median);
    }

    #[test]
    fn index_domain_bounds() {
        let space = build_sar_array_space();
        let j = index_domain(&space, 400);
        let fi = space.role_index(Role::Frequency).unwrap();
        assert_abs_diff_eq!(j[fi].1, 5800.0 + 5500.0 / 400.0);
        assert_eq!(j[fi].0, 300.0);
        assert_eq!(j[space.role_index(Role::Power).unwrap()], (0.0, 21.0));
        assert_eq!(j[space.role_index(Role::Angle).unwrap()], (0.0, 360.0));
    }

    #[test]
    fn initial_sar_sample() {
        let space = build_sar_array_space();
        let s = generate_initial_sample(&space, &LhsPlan::initial(1)).unwrap();
        assert_eq!(s.len(), 400);
        let keys: HashSet<_> = s.iter().map(|p| key(p)).collect();
        assert_eq!(keys.len(), 400);
        assert!(s.iter().all(|p| space.is_valid(p)));
        let ti = space.role_index(Role::Angle).unwrap();
        let off_raster = s.iter().filter(|p| p[ti] % 15.0 != 0.0).count();
        assert!(off_raster > 390, "theta stays continuous");
    }

    #[test]
    fn test_sample_disjoint() {
        let space = build_sar_array_space();
        let s = generate_initial_sample(&space, &LhsPlan::initial(1).with_size(100)).unwrap();
        let t = generate_test_sample(&space, &LhsPlan::test(2), &s).unwrap();
        assert_eq!(t.len(), 50);
        let ks: HashSet<_> = s.iter().map(|p| key(p)).collect();
        assert!(t.iter().all(|p| !ks.contains(&key(p))));
        assert!(t.iter().all(|p| space.is_valid(p)));
    }

    #[test]
    fn test_sample_collisions_dropped() {
        // a 2-point raster admits only two distinct points
        let dims = vec![crate::config_space::Dimension::new(
            "a",
            Role::Generic,
            0.0,
            1.0,
            Treatment::DiscreteRaster,
            Some(vec![0.0, 1.0]),
        )
        .unwrap()];
        let space = ConfigSpace::new("tiny", dims, vec![], vec![]).unwrap();
        let existing = vec![ConfigPoint(vec![0.0])];
        let t = generate_test_sample(&space, &LhsPlan::test(3).with_size(5), &existing).unwrap();
        assert_eq!(t, vec![ConfigPoint(vec![1.0])]);
        let err = generate_initial_sample(&space, &LhsPlan::initial(3).with_size(5)).unwrap_err();
        assert!(matches!(err, Error::Sampling(_)));
    }

    #[test]
    fn test_sample_uniformity() {
        // KS critical value for n = 50 at 5%
        let crit = 1.358 / 50f64.sqrt();
        let space = ConfigSpace::unit_cube(2);
        let mut ok = 0;
        for seed in 0..100 {
            let t = generate_test_sample(&space, &LhsPlan::test(seed), &[]).unwrap();
            let pass = (0..2).all(|d| {
                let mut v: Vec<f64> = t.iter().map(|p| p[d]).collect();
                v.sort_by(f64::total_cmp);
                let n = v.len() as f64;
                let ks = v
                    .iter()
                    .enumerate()
                    .map(|(i, &x)| ((i as f64 + 1.0) / n - x).abs().max((x - i as f64 / n).abs()))
                    .fold(0.0, f64::max);
                ks < crit
            });
            ok += pass as usize;
        }
        assert!(ok >= 90, "{ok}");
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]
        #[test]
        fn latin_property_always(k in 2usize..40, n in 1usize..6, seed in any::<u64>()) {
            let pts = lhs_unit(k, n, seed).unwrap();
            prop_assert_eq!(pts.len(), k);
            assert_latin(&pts);
        }

        #[test]
        fn floors_never_exceed(seed in any::<u64>()) {
            let space = build_sar_array_space();
            let k = 20;
            let domain = index_domain(&space, k);
            for u in lhs_unit(k, space.dim(), seed).unwrap() {
                let raw = to_domain(&u, &domain);
                let s = space.snap_floor(&raw);
                for (i, d) in space.dimensions.iter().enumerate() {
                    if d.treatment == Treatment::DiscreteRaster && d.role != Role::Distance {
                        prop_assert!(s[i] <= raw[i]);
                    }
                }
            }
        }
    }
}
