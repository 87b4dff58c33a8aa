//! Independent confirmation of a fitted model against a held-out test sample.
//!
//! Stages run in a fixed order (goodness of fit, residual normality, QQ line)
//! and all of them are computed so a failing report still carries every
//! diagnostic. `overall` stops at the first failing stage.

mod outliers;
mod qq;
mod shapiro_wilk;

pub use outliers::{detect_outliers, DEFAULT_IQR_MULTIPLIER};
pub use qq::{qq_metrics, QqMetrics, QQ_WINDOW};
pub use shapiro_wilk::{shapiro_wilk, ShapiroWilk};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kriging::{standardized_residuals, GpiModel, ValuedSample};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Thresholds {
    /// Upper bound on the variogram NRMSE (inclusive).
    pub nrmse_alpha: f64,
    /// Shapiro-Wilk passes when p exceeds this.
    pub sw_alpha: f64,
    pub qq_location_max: f64,
    pub qq_scale_min: f64,
    pub qq_scale_max: f64,
    pub min_test_size: usize,
}

impl Default for Thresholds {
    fn default() -> Self {
        Thresholds {
            nrmse_alpha: 0.25,
            sw_alpha: 0.05,
            qq_location_max: 1.0,
            qq_scale_min: 0.5,
            qq_scale_max: 1.5,
            min_test_size: 20,
        }
    }
}

impl Thresholds {
    pub fn with_alpha(mut self, alpha: f64) -> Self {
        self.nrmse_alpha = alpha;
        self
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stage {
    GoodnessOfFit,
    ShapiroWilk,
    QqLocation,
    QqScale,
}

impl Stage {
    pub const ORDER: [Stage; 4] = [Stage::GoodnessOfFit, Stage::ShapiroWilk, Stage::QqLocation, Stage::QqScale];

    pub fn name(self) -> &'static str {
        match self {
            Stage::GoodnessOfFit => "goodness_of_fit",
            Stage::ShapiroWilk => "shapiro_wilk",
            Stage::QqLocation => "qq_location",
            Stage::QqScale => "qq_scale",
        }
    }
}

impl std::fmt::Display for Stage {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FitStage {
    pub nrmse: f64,
    pub alpha: f64,
    pub pass: bool,
}

pub fn goodness_of_fit(model: &GpiModel, alpha: f64) -> FitStage {
    let nrmse = model.fit_nrmse();
    FitStage { nrmse, alpha, pass: nrmse <= alpha }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct NormalityStage {
    pub w: f64,
    pub p_value: f64,
    pub alpha: f64,
    pub pass: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QqStage {
    pub location: f64,
    pub scale: f64,
    pub location_pass: bool,
    pub scale_pass: bool,
    /// `(theoretical, sample)` quantile pairs inside the window.
    pub points: Vec<(f64, f64)>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConfirmationReport {
    pub stage_order: Vec<Stage>,
    pub goodness_of_fit: FitStage,
    pub shapiro_wilk: NormalityStage,
    pub qq: QqStage,
    pub test_ids: Vec<String>,
    pub residuals: Vec<f64>,
    pub residual_outliers: Vec<usize>,
    pub failed_stage: Option<Stage>,
    pub overall: bool,
}

impl ConfirmationReport {
    pub fn stage_pass(&self, stage: Stage) -> bool {
        match stage {
            Stage::GoodnessOfFit => self.goodness_of_fit.pass,
            Stage::ShapiroWilk => self.shapiro_wilk.pass,
            Stage::QqLocation => self.qq.location_pass,
            Stage::QqScale => self.qq.scale_pass,
        }
    }
}

/// Confirms `model` with residuals from an independent `test` sample.
pub fn confirm(model: &GpiModel, test: &ValuedSample, thresholds: &Thresholds) -> Result<ConfirmationReport> {
    if test.len() < thresholds.min_test_size {
        return Err(Error::InvalidInput(format!(
            "test sample has {} points, at least {} are required",
            test.len(),
            thresholds.min_test_size
        )));
    }
    let fit = goodness_of_fit(model, thresholds.nrmse_alpha);
    let residuals = standardized_residuals(model, test)?;
    confirm_residuals(fit, residuals, test.ids.clone(), thresholds)
}

/// Runs the residual stages on precomputed standardized residuals.
pub fn confirm_residuals(
    fit: FitStage,
    residuals: Vec<f64>,
    test_ids: Vec<String>,
    thresholds: &Thresholds,
) -> Result<ConfirmationReport> {
    let sw = shapiro_wilk(&residuals)?;
    let shapiro_wilk = NormalityStage {
        w: sw.w,
        p_value: sw.p_value,
        alpha: thresholds.sw_alpha,
        pass: sw.p_value > thresholds.sw_alpha,
    };
    let q = qq_metrics(&residuals)?;
    let qq = QqStage {
        location: q.location,
        scale: q.scale,
        location_pass: q.location.abs() <= thresholds.qq_location_max,
        scale_pass: (thresholds.qq_scale_min..=thresholds.qq_scale_max).contains(&q.scale),
        points: q.points,
    };
    let residual_outliers = detect_outliers(&residuals, DEFAULT_IQR_MULTIPLIER);
    let mut report = ConfirmationReport {
        stage_order: Stage::ORDER.to_vec(),
        goodness_of_fit: fit,
        shapiro_wilk,
        qq,
        test_ids,
        residuals,
        residual_outliers,
        failed_stage: None,
        overall: false,
    };
    report.failed_stage = Stage::ORDER.into_iter().find(|&s| !report.stage_pass(s));
    report.overall = report.failed_stage.is_none();
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stats::norm_ppf;

    fn fit(nrmse: f64) -> FitStage {
        FitStage { nrmse, alpha: 0.25, pass: nrmse <= 0.25 }
    }

    #[test]
    fn fit_boundary_inclusive() {
        assert!(fit(0.10).pass);
        assert!(fit(0.25).pass);
        assert!(!fit(0.26).pass);
    }

    fn quantiles(n: usize, scale: f64) -> Vec<f64> {
        (0..n).map(|i| scale * norm_ppf((i as f64 + 0.5) / n as f64)).collect()
    }

    #[test]
    fn exact_quantiles_pass() {
        let r = confirm_residuals(fit(0.1), quantiles(50, 1.0), vec![], &Thresholds::default()).unwrap();
        assert!(r.overall, "{r:?}");
        assert_eq!(r.failed_stage, None);
    }

    #[test]
    fn conservative_scale_passes() {
        let r = confirm_residuals(fit(0.1), quantiles(50, 0.6), vec![], &Thresholds::default()).unwrap();
        assert!(r.overall);
    }

    #[test]
    fn failing_stage_is_first_in_order() {
        // wide residuals fail QQ scale, bad fit fails first
        let r = confirm_residuals(fit(0.3), quantiles(50, 2.0), vec![], &Thresholds::default()).unwrap();
        assert_eq!(r.failed_stage, Some(Stage::GoodnessOfFit));
        assert!(!r.qq.scale_pass);
        assert!(r.shapiro_wilk.pass);
        assert!(!r.overall);
        let r = confirm_residuals(fit(0.1), quantiles(50, 2.0), vec![], &Thresholds::default()).unwrap();
        assert_eq!(r.failed_stage, Some(Stage::QqScale));
    }

    #[test]
    fn shifted_residuals_fail_location() {
        let v: Vec<f64> = quantiles(50, 1.0).iter().map(|x| x + 1.5).collect();
        let r = confirm_residuals(fit(0.1), v, vec![], &Thresholds::default()).unwrap();
        assert_eq!(r.failed_stage, Some(Stage::QqLocation));
    }

    #[test]
    fn report_round_trips() {
        let r = confirm_residuals(fit(0.1), quantiles(30, 1.0), vec![], &Thresholds::default()).unwrap();
        let s = serde_json::to_string(&r).unwrap();
        let back: ConfirmationReport = serde_json::from_str(&s).unwrap();
        assert_eq!(back, r);
    }
}
