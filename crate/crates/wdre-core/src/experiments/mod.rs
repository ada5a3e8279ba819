//! Seeded numerical studies: the scalar counterexample as an executable
//! regression, the no-saddle sweep over the noise radius, the
//! sufficient-versus-actual saddle boundary comparison, and the robustness
//! study against nominals estimated from small samples.
//!
//! Every study is a pure function of its [`ExperimentConfig`]: instances
//! come from an explicitly seeded generator, each trial runs on its own
//! RNG stream (so execution order cannot change results), and the CSV/JSON
//! writers in [`io`] emit byte-identical output for identical configs.
//! Claims a study is expected to uphold are evaluated into
//! [`AssertionOutcome`] records rather than panics, so a run always
//! produces inspectable output.

mod calibrate;
mod instances;
pub mod io;
mod runs;

pub use calibrate::calibrate_radius;
pub use instances::random_instance;
pub use runs::{
    run_bound_comparison, run_bound_comparison_on, run_counterexample, run_robustness_trial,
    run_sweep_rho, AssertionOutcome, BoundOutcome, BoundRecord, CounterexampleReport,
    GridFailure, RobustnessOutcome, SweepOutcome, SweepRecord, TrialFailure, TrialRecord,
};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::ModelError;
use crate::wdre::WdreError;

/// Failure modes of the experiment layer.
#[derive(Debug, Error)]
pub enum ExperimentError {
    /// A solve or certificate step failed where the study cannot continue.
    #[error(transparent)]
    Wdre(#[from] WdreError),
    /// Invalid moments or dimensions while assembling an instance.
    #[error(transparent)]
    Model(#[from] ModelError),
    /// The counterexample regression found quantities off their pinned values.
    #[error("counterexample regression failed:\n{}", mismatches.join("\n"))]
    RegressionFailure { mismatches: Vec<String> },
    /// The configuration violates a documented invariant.
    #[error("invalid experiment config: {detail}")]
    InvalidConfig { detail: String },
    /// Output files could not be written.
    #[error("failed to write experiment output: {0}")]
    Io(#[from] std::io::Error),
    /// CSV serialization failed.
    #[error("failed to serialize records: {0}")]
    Csv(#[from] csv::Error),
    /// JSON serialization failed.
    #[error("failed to serialize summary: {0}")]
    Json(#[from] serde_json::Error),
}

/// Closed interval sampled at a fixed step: `start, start + step, ...` up
/// to and including `stop` (within half a step of float slack).
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct GridRange {
    pub start: f64,
    pub stop: f64,
    pub step: f64,
}

impl GridRange {
    pub fn new(start: f64, stop: f64, step: f64) -> Self {
        GridRange { start, stop, step }
    }

    /// All grid points, generated by index so accumulated rounding cannot
    /// drift the later points.
    pub fn points(&self) -> Vec<f64> {
        let count = ((self.stop - self.start) / self.step + 0.5).floor() as usize + 1;
        (0..count)
            .map(|k| self.start + self.step * k as f64)
            .collect()
    }

    fn validate(&self, name: &str) -> Result<(), ExperimentError> {
        if !(self.step > 0.0) {
            return Err(ExperimentError::InvalidConfig {
                detail: format!("{name}: step must be positive, got {}", self.step),
            });
        }
        if !(self.stop >= self.start) {
            return Err(ExperimentError::InvalidConfig {
                detail: format!(
                    "{name}: empty range, start {} exceeds stop {}",
                    self.start, self.stop
                ),
            });
        }
        Ok(())
    }
}

/// Knobs shared by the studies; each study reads the subset it needs.
///
/// [`ExperimentConfig::default`] gives desk-scale sizes that finish in
/// minutes; [`ExperimentConfig::full_scale`] matches the published sizes
/// (dimension 20, 3000 trials) and takes correspondingly longer.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExperimentConfig {
    /// Common state/observation dimension (square instances).
    pub dim: usize,
    /// Master seed; every trial derives its own stream from it.
    pub seed: u64,
    /// Repetition count for the robustness study.
    pub trials: usize,
    /// Calibration level for radius selection, in (0, 1).
    pub quantile: f64,
    /// Signal radius held fixed during the noise-radius sweep.
    pub rho_x_fixed: f64,
    /// Noise-radius grid for the sweep.
    pub rho_w_range: GridRange,
    /// Signal-radius grid for the bound comparison.
    pub rho_x_range: GridRange,
    /// Fine scan step locating the actual saddle boundary.
    pub rho_w_scan_step: f64,
    /// Draws per sample when forming nominal covariances.
    pub sample_size: usize,
    /// Repetitions inside radius calibration.
    pub calib_reps: usize,
    /// Override for the saddle verdict's eigenvalue tolerance; `None`
    /// keeps the scaled default.
    pub tol_psd: Option<f64>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            dim: 5,
            seed: 42,
            trials: 300,
            quantile: 0.95,
            rho_x_fixed: 3.0,
            rho_w_range: GridRange::new(1.0, 10.0, 0.5),
            rho_x_range: GridRange::new(1.0, 10.0, 0.1),
            rho_w_scan_step: 0.02,
            sample_size: 100,
            calib_reps: 1000,
            tol_psd: None,
        }
    }
}

impl ExperimentConfig {
    /// Published-scale sizes. Expect hours, not minutes.
    pub fn full_scale() -> Self {
        ExperimentConfig {
            dim: 20,
            trials: 3000,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<(), ExperimentError> {
        let positive = |name: &str, value: f64| {
            if value > 0.0 {
                Ok(())
            } else {
                Err(ExperimentError::InvalidConfig {
                    detail: format!("{name} must be positive, got {value}"),
                })
            }
        };
        if self.dim == 0 {
            return Err(ExperimentError::InvalidConfig {
                detail: "dim must be at least 1".into(),
            });
        }
        if self.trials == 0 {
            return Err(ExperimentError::InvalidConfig {
                detail: "trials must be at least 1".into(),
            });
        }
        if !(self.quantile > 0.0 && self.quantile < 1.0) {
            return Err(ExperimentError::InvalidConfig {
                detail: format!("quantile must lie in (0, 1), got {}", self.quantile),
            });
        }
        positive("rho_x_fixed", self.rho_x_fixed)?;
        positive("rho_w_scan_step", self.rho_w_scan_step)?;
        self.rho_w_range.validate("rho_w_range")?;
        self.rho_x_range.validate("rho_x_range")?;
        if self.sample_size == 0 {
            return Err(ExperimentError::InvalidConfig {
                detail: "sample_size must be at least 1".into(),
            });
        }
        if self.calib_reps == 0 {
            return Err(ExperimentError::InvalidConfig {
                detail: "calib_reps must be at least 1".into(),
            });
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_points_include_both_endpoints() {
        let pts = GridRange::new(1.0, 10.0, 0.5).points();
        assert_eq!(pts.len(), 19);
        assert_eq!(pts[0], 1.0);
        assert!((pts[18] - 10.0).abs() < 1e-12);

        let fine = GridRange::new(1.0, 10.0, 0.1).points();
        assert_eq!(fine.len(), 91);
    }

    #[test]
    fn config_validation_rejects_bad_knobs() {
        assert!(ExperimentConfig::default().validate().is_ok());
        assert!(ExperimentConfig::full_scale().validate().is_ok());

        let mut bad = ExperimentConfig::default();
        bad.quantile = 1.0;
        assert!(matches!(
            bad.validate(),
            Err(ExperimentError::InvalidConfig { .. })
        ));

        let mut bad = ExperimentConfig::default();
        bad.rho_w_range.step = 0.0;
        assert!(bad.validate().is_err());

        let mut bad = ExperimentConfig::default();
        bad.rho_x_range.stop = 0.5;
        assert!(bad.validate().is_err());
    }
}
