//! Orchestration of the three-step workflow and its file interchange.
//!
//! Step 1 builds a model from a valued sample ([`create_model`]), step 2
//! confirms it against an independent test sample and step 3 searches it for
//! critical configurations. Each step reads and writes plain files so
//! different parties can run them.

pub mod cli;
pub mod io;
pub mod scenario;

use serde::{Deserialize, Serialize};

use crate::config_space::ConfigSpace;
use crate::confirmation::{detect_outliers, DEFAULT_IQR_MULTIPLIER};
use crate::error::{Error, Result};
use crate::kriging::{GpiModel, ValuedSample};
use crate::variogram::{
    build_anisotropy, empirical_variogram, fit_with_nugget_floor, nrmse, AnisotropyMap, AnisotropyReport, Binning, NuggetMode,
    VariogramShape, DEFAULT_ANGULAR_TOLERANCE,
};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelOptions {
    pub shape: VariogramShape,
    pub nugget: NuggetMode,
    /// Fit directional variograms and rescale each axis by its range.
    /// Without it `ι` is the identity.
    pub anisotropic: bool,
    pub iqr_multiplier: f64,
    pub angular_tolerance_deg: f64,
    /// Known measurement-noise standard deviation; its square bounds the
    /// isotropic nugget from below.
    #[serde(default)]
    pub noise_std: Option<f64>,
}

impl Default for ModelOptions {
    fn default() -> Self {
        ModelOptions {
            shape: VariogramShape::Gaussian,
            nugget: NuggetMode::Free,
            anisotropic: true,
            iqr_multiplier: DEFAULT_IQR_MULTIPLIER,
            angular_tolerance_deg: DEFAULT_ANGULAR_TOLERANCE,
            noise_std: None,
        }
    }
}

impl ModelOptions {
    pub fn isotropic() -> Self {
        ModelOptions { anisotropic: false, ..Self::default() }
    }

    pub fn with_noise_std(mut self, noise_std: f64) -> Self {
        self.noise_std = Some(noise_std);
        self
    }
}

/// A fitted model plus the diagnostics of its construction.
#[derive(Clone, Debug)]
pub struct ModelBuild {
    pub model: GpiModel,
    pub anisotropy_report: Option<AnisotropyReport>,
    pub options: ModelOptions,
}

/// Outlier screening, anisotropy, isotropic variogram fit and NRMSE.
///
/// Outliers are left out of every variogram but stay in the kriging system.
pub fn create_model(space: &ConfigSpace, sample: ValuedSample, options: &ModelOptions) -> Result<ModelBuild> {
    if sample.dim() != space.dim() {
        return Err(Error::InvalidInput(format!(
            "sample has {} coordinates, space has {} dimensions",
            sample.dim(),
            space.dim()
        )));
    }
    let outliers = detect_outliers(&sample.values, options.iqr_multiplier);
    let screened = sample.without(&outliers);
    let report = if options.anisotropic {
        Some(
            build_anisotropy(&screened, options.shape, options.nugget, options.angular_tolerance_deg)
                .map_err(Error::in_stage("anisotropy"))?,
        )
    } else {
        None
    };
    let map = report.as_ref().map_or_else(|| AnisotropyMap::identity(space.dim()), |r| r.map.clone());
    let emp = empirical_variogram(&screened, &map, Binning::ISOTROPIC).map_err(Error::in_stage("empirical variogram"))?;
    let floor = options.noise_std.map_or(0.0, |s| s * s);
    let variogram =
        fit_with_nugget_floor(&emp, options.shape, options.nugget, floor).map_err(Error::in_stage("isotropic fit"))?;
    let fit_nrmse = nrmse(&variogram, &emp).map_err(Error::in_stage("isotropic fit"))?;
    let model = GpiModel::new(sample, map, variogram, fit_nrmse, space.clone())
        .map_err(Error::in_stage("kriging system"))?
        .with_empirical(emp)
        .with_outliers(outliers);
    Ok(ModelBuild { model, anisotropy_report: report, options: options.clone() })
}
