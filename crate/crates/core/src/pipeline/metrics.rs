use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::config::Expansion;
use crate::error::{Error, Result};

/// Column order of `estimates.csv` after `x` and `true`.
pub const ESTIMATE_NAMES: [&str; 6] = ["f1_up", "f2_up", "fused", "f1_down", "f2_down", "centralized"];

/// One value per estimate, in [`ESTIMATE_NAMES`] order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PerEstimate<T> {
    pub f1_up: T,
    pub f2_up: T,
    pub fused: T,
    pub f1_down: T,
    pub f2_down: T,
    pub centralized: T,
}

impl<T> PerEstimate<T> {
    pub fn entries(&self) -> [(&'static str, &T); 6] {
        [
            ("f1_up", &self.f1_up),
            ("f2_up", &self.f2_up),
            ("fused", &self.fused),
            ("f1_down", &self.f1_down),
            ("f2_down", &self.f2_down),
            ("centralized", &self.centralized),
        ]
    }

    pub fn map<U>(&self, mut f: impl FnMut(&T) -> U) -> PerEstimate<U> {
        PerEstimate {
            f1_up: f(&self.f1_up),
            f2_up: f(&self.f2_up),
            fused: f(&self.fused),
            f1_down: f(&self.f1_down),
            f2_down: f(&self.f2_down),
            centralized: f(&self.centralized),
        }
    }
}

/// Grid errors against the true function and the fusion-space norm.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EstimateMetrics {
    pub rmse_on_grid: f64,
    pub sup_error_on_grid: f64,
    pub h_norm: f64,
}

impl EstimateMetrics {
    /// `values` and `truth` are samples on the same grid; `psi_coeffs` are
    /// the estimate's coordinates in the orthonormal fusion basis.
    pub fn compute(values: &DVector<f64>, truth: &DVector<f64>, psi_coeffs: &DVector<f64>) -> Result<Self> {
        let err = values - truth;
        let m = EstimateMetrics {
            rmse_on_grid: (err.norm_squared() / err.len() as f64).sqrt(),
            sup_error_on_grid: err.amax(),
            h_norm: psi_coeffs.norm(),
        };
        if [m.rmse_on_grid, m.sup_error_on_grid, m.h_norm]
            .iter()
            .all(|v| v.is_finite())
        {
            Ok(m)
        } else {
            Err(Error::NonFinite("estimate metrics"))
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FusionSummary {
    pub a: f64,
    pub b: f64,
    pub degenerate: bool,
    pub objective: f64,
    pub anchor_count: usize,
    /// Rank of the anchor kernel sections against `dim H`.
    pub anchor_span_rank: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Seeds {
    pub true_function: Option<u64>,
    pub noise: [u64; 2],
    pub anchors: u64,
}

/// Agent-coordinate coefficients of the estimates that live in an agent space.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AgentCoeffs {
    pub f1_up: Vec<f64>,
    pub f2_up: Vec<f64>,
    pub f1_down: Vec<f64>,
    pub f2_down: Vec<f64>,
}

/// Contents of `metrics.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MetricsReport {
    pub basis_digest: String,
    pub rank: usize,
    pub seeds: Seeds,
    pub true_function: Expansion,
    pub fusion: FusionSummary,
    pub estimates: PerEstimate<EstimateMetrics>,
    pub psi_coeffs: PerEstimate<Vec<f64>>,
    pub agent_coeffs: AgentCoeffs,
}

/// Evaluates every estimate on the grid through the basis evaluation matrix.
pub fn grid_values(eval: &DMatrix<f64>, psi: &PerEstimate<Vec<f64>>) -> PerEstimate<DVector<f64>> {
    psi.map(|c| eval * DVector::from_column_slice(c))
}
