//! Synthetic end-to-end runs: the analytic sine-wave benchmark and the
//! synthetic SAR devices. Every stage is seeded, so a scenario is fully
//! determined by its options and seed.

use serde::{Deserialize, Serialize};

use crate::bench_oracles::{synthetic_device, synthetic_mpe, DeviceProfile, OracleField, SINE_NOISE_STD};
use crate::config_space::{build_sar_array_space, ConfigPoint, ConfigSpace};
use crate::confirmation::{confirm, ConfirmationReport, Thresholds};
use crate::critical_search::{run_critical_search, CriticalReport, SearchParams};
use crate::error::{Error, Result};
use crate::kriging::{GpiModel, ValuedSample};
use crate::pipeline::{create_model, ModelBuild, ModelOptions};
use crate::sampling::{generate_initial_sample, generate_test_sample, LhsPlan};

/// Seed offset of the test sample relative to the scenario seed.
pub const TEST_SEED_OFFSET: u64 = 0x5eed;

/// Measures `points` on `field`, assigning default ids.
pub fn measure(field: &OracleField, points: Vec<ConfigPoint>) -> Result<ValuedSample> {
    let values = points.iter().map(|p| field.eval(p)).collect();
    ValuedSample::new(points, values)
}

/// Initial and test samples of `field` over `space`.
pub fn draw_samples(
    space: &ConfigSpace,
    field: &OracleField,
    initial: usize,
    test: usize,
    seed: u64,
) -> Result<(ValuedSample, ValuedSample)> {
    let s = generate_initial_sample(space, &LhsPlan::initial(seed).with_size(initial))?;
    let t = generate_test_sample(space, &LhsPlan::test(seed.wrapping_add(TEST_SEED_OFFSET)).with_size(test), &s)?;
    let sample = measure(field, s)?;
    let mut test_sample = measure(field, t)?;
    // keep ids unique across both files
    test_sample.ids = (0..test_sample.len()).map(|i| format!("t{i:04}")).collect();
    Ok((sample, test_sample))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SineOptions {
    pub size: usize,
    pub test_size: usize,
    pub params: SearchParams,
}

impl Default for SineOptions {
    fn default() -> Self {
        let mut params = SearchParams::new(-0.75, 0.75);
        params.sensitivity = 0.1;
        params.repulsion = 0.1;
        SineOptions { size: 50, test_size: 50, params }
    }
}

#[derive(Clone, Debug)]
pub struct ScenarioRun {
    pub field: OracleField,
    pub build: ModelBuild,
    pub test: ValuedSample,
    pub confirmation: ConfirmationReport,
    pub report: CriticalReport,
}

impl ScenarioRun {
    pub fn model(&self) -> &GpiModel {
        &self.build.model
    }
}

/// The analytic benchmark `f(x) = y·sin(2πy)` on the unit square.
pub fn run_sine_benchmark(seed: u64, options: &SineOptions) -> Result<ScenarioRun> {
    let field = OracleField::sine_wave(seed);
    let space = field.domain.clone();
    let (sample, test) = draw_samples(&space, &field, options.size, options.test_size, seed)?;
    let build = create_model(&space, sample, &ModelOptions::isotropic().with_noise_std(SINE_NOISE_STD))?;
    let confirmation = confirm(&build.model, &test, &Thresholds::default()).map_err(Error::in_stage("confirmation"))?;
    let report = run_critical_search(&build.model, &options.params, seed).map_err(Error::in_stage("critical search"))?;
    Ok(ScenarioRun { field, build, test, confirmation, report })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DeviceOptions {
    pub initial: usize,
    pub test: usize,
    pub params: SearchParams,
    /// Lower the nugget to the device's known noise variance when set.
    pub known_noise: bool,
}

impl Default for DeviceOptions {
    fn default() -> Self {
        DeviceOptions { initial: 400, test: 50, params: SearchParams::symmetric(synthetic_mpe()), known_noise: true }
    }
}

/// A synthetic device on the array-system SAR space, taken through model
/// creation, confirmation and critical search.
pub fn run_device_scenario(profile: DeviceProfile, seed: u64, options: &DeviceOptions) -> Result<ScenarioRun> {
    let space = build_sar_array_space();
    let field = synthetic_device(&space, profile, seed);
    let (sample, test) = draw_samples(&space, &field, options.initial, options.test, seed)?;
    let mut model_options = ModelOptions::default();
    if options.known_noise {
        model_options.noise_std = Some(field.noise_std);
    }
    let build = create_model(&space, sample, &model_options)?;
    let confirmation = confirm(&build.model, &test, &Thresholds::default()).map_err(Error::in_stage("confirmation"))?;
    let report = run_critical_search(&build.model, &options.params, seed).map_err(Error::in_stage("critical search"))?;
    Ok(ScenarioRun { field, build, test, confirmation, report })
}
