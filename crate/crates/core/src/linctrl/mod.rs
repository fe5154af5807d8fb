//! Linear control machinery on a window of length T′: the control-to-state
//! operator C and its exact discrete transpose, the Gramian B = CC*, its
//! dyadic spectral bands, the filtered approximate control ℓ, the penalized
//! HUM null control χ, the source response S, and the two-phase controller
//! that glues them together on the full horizon.

mod controller;
mod gramian;
mod null;
mod window;

use serde::{Deserialize, Serialize};

pub use controller::{
    linear_approx_control, linear_approx_control_with_basis, plan_window, ControlDiagnostics, ControlResult, ControllerSettings, LinearControlSpec};
pub use gramian::{
    approx_control_l, assemble_b, band_of, gramian_basis, ln_alpha, spectral_bands, ControlFactor, FilteredControl,
    Gramian, SpectralBasis,
    MU_FLOOR_REL,
};
pub use null::{null_control, NullControl, NullControlOptions};
pub use window::{apply_c, apply_cstar, source_response_s, WindowProblem};

/// Constants of the closed-form estimates. None of them is computable; they
/// are configuration with default 1.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Constants {
    pub c0: f64,
    pub c1: f64,
    pub c2: f64,
    pub c3: f64,
    pub c4: f64,
    pub c5: f64,
    pub c6: f64,
    /// Smallest admissible truncation index.
    pub n_o: usize,
}

impl Default for Constants {
    fn default() -> Self {
        Constants {
            c0: 1.0,
            c1: 1.0,
            c2: 1.0,
            c3: 1.0,
            c4: 1.0,
            c5: 1.0,
            c6: 1.0,
            n_o: 1,
        }
    }
}

/// How E and the truncation index are chosen.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ControlMode {
    /// E = 1; N from a measured truncation budget.
    Adaptive,
    /// E and the error bound from the closed-form expressions with the
    /// configured constants.
    ClosedForm,
}

/// E = exp(c₂(1 + T′‖q‖ e^{c₂T′‖q‖²} + ‖q‖^{2/3}))
pub fn closed_form_e(c: &Constants, t_prime: f64, q_sup: f64) -> f64 {
    (c.c2 * (1.0 + t_prime * q_sup * (c.c2 * t_prime * q_sup * q_sup).exp() + q_sup.powf(2.0 / 3.0))).exp()
}

/// G = exp(c₀(1 + 1/T′ + T′‖q‖ + ‖q‖^{2/3}))
pub fn closed_form_g(c: &Constants, t_prime: f64, q_sup: f64) -> f64 {
    (c.c0 * (1.0 + 1.0 / t_prime + t_prime * q_sup + q_sup.powf(2.0 / 3.0))).exp()
}

/// D = c₁(T′ e^{c₁T′‖q‖²} + 1/T′)
pub fn closed_form_d(c: &Constants, t_prime: f64, q_sup: f64) -> f64 {
    c.c1 * (t_prime * (c.c1 * t_prime * q_sup * q_sup).exp() + 1.0 / t_prime)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn closed_forms_without_potential() {
        let c = Constants::default();
        assert!((closed_form_e(&c, 0.5, 0.0) - std::f64::consts::E).abs() < 1e-15);
        assert!((closed_form_d(&c, 0.5, 0.0) - 2.5).abs() < 1e-15);
        assert!((closed_form_g(&c, 0.5, 0.0) - 3.0f64.exp()).abs() < 1e-12);
    }
}
