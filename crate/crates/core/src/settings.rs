//! Tolerances and thresholds for every numerical stage.
//!
//! Every field has a default; a config file only needs to name the values it
//! overrides. Sections mirror the pipeline stages.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Settings {
    pub density: DensitySettings,
    pub limits: LimitSettings,
    pub solver: SolverSettings,
    pub bubbles: BubbleSettings,
    pub oracle: OracleSettings,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DensitySettings {
    /// Relative tolerance for f(−v) = f(v).
    pub symmetry_rtol: f64,
    /// Absolute tolerance for f′(0) = 0.
    pub slope_at_zero_atol: f64,
    /// One-sided derivatives at an `abs` kink must agree to this.
    pub kink_atol: f64,
    /// Equal neighbouring slopes at either end of the grid are accepted
    /// when the adjacent increment is already below this (relative).
    pub saturation_rtol: f64,
    /// Validation grid is ±unit·2^k for k in [grid_min_exp, grid_max_exp].
    pub grid_unit: f64,
    pub grid_min_exp: i32,
    pub grid_max_exp: i32,
    /// Relative tolerance of the position→volume quadrature.
    pub quad_rtol: f64,
    /// Relative tolerance of the volume→position inverse.
    pub inverse_rtol: f64,
    /// The transform table is not extended past this position.
    pub position_cap: f64,
    /// The transform table stops once it covers this volume.
    pub volume_cap: f64,
}

impl Default for DensitySettings {
    fn default() -> Self {
        Self {
            symmetry_rtol: 1e-10,
            slope_at_zero_atol: 1e-8,
            kink_atol: 1e-8,
            saturation_rtol: 1e-12,
            grid_unit: 1.0,
            grid_min_exp: -10,
            grid_max_exp: 10,
            quad_rtol: 1e-13,
            inverse_rtol: 1e-12,
            position_cap: 1e6,
            volume_cap: 2f64.powi(64),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LimitSettings {
    /// Samples are taken at V = 2^k for k = 0..=k_max.
    pub k_max: u32,
    /// Successive samples closer than this (relative to 1 + |value|) count
    /// towards convergence.
    pub converge_rtol: f64,
    pub converge_window: usize,
    /// A sample above this declares divergence outright.
    pub divergence_threshold: f64,
    /// Increments whose Raabe statistic stays at or below this, over
    /// `slow_divergence_window` steps ending at k ≥ `slow_divergence_min_k`,
    /// declare (slow) divergence.
    pub slow_divergence_raabe: f64,
    pub slow_divergence_window: usize,
    pub slow_divergence_min_k: u32,
    /// Relative tolerance for the quadrature used to evaluate g(V).
    pub quad_rtol: f64,
}

impl Default for LimitSettings {
    fn default() -> Self {
        Self {
            k_max: 50,
            converge_rtol: 1e-9,
            converge_window: 3,
            divergence_threshold: 1e9,
            slow_divergence_raabe: 0.8,
            slow_divergence_window: 8,
            slow_divergence_min_k: 24,
            quad_rtol: 1e-11,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverSettings {
    /// Bisection stops once the bracket is narrower than
    /// `bisect_rtol · (1 + bracket magnitude)`.
    pub bisect_rtol: f64,
    /// Returned roots must have |residual| ≤ residual_rtol · scale.
    pub residual_rtol: f64,
    /// Doubling-expansion limit for unbounded brackets, as a power of two.
    pub max_doublings: u32,
}

impl Default for SolverSettings {
    fn default() -> Self {
        Self {
            bisect_rtol: 1e-13,
            residual_rtol: 1e-10,
            max_doublings: 200,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BubbleSettings {
    /// |μ| ≤ tie_rtol · (1 + P₂) counts as a tie.
    pub tie_rtol: f64,
    /// Width at which the blowup-time bisection stops.
    pub blowup_bracket_width: f64,
    /// The λ bracket is doubled up to V₂ = 2^lambda_cap_exp.
    pub lambda_cap_exp: i32,
}

impl Default for BubbleSettings {
    fn default() -> Self {
        Self {
            tie_rtol: 1e-9,
            blowup_bracket_width: 1e-10,
            lambda_cap_exp: 60,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OracleSettings {
    pub max_intervals_per_region: usize,
    pub refine_factor: f64,
    pub levels: usize,
    /// Wall-clock budget for one minimization, in seconds.
    pub budget_secs: f64,
}

impl Default for OracleSettings {
    fn default() -> Self {
        Self {
            max_intervals_per_region: 3,
            refine_factor: 4.0,
            levels: 8,
            budget_secs: 20.0,
        }
    }
}
