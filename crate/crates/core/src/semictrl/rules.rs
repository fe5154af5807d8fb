use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linctrl::{closed_form_d, Constants, SpectralBasis};
use crate::numerics::{h1_norm, Grid, SpaceField};

/// Share of ε given to the spectral truncation in adaptive mode.
pub const TRUNCATION_BUDGET: f64 = 0.5;
/// Share of ε given to the null-control residual in adaptive mode.
pub const NULL_BUDGET: f64 = 0.25;

/// How the control window length T′ is chosen.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TPrimePolicy {
    /// T′ = T when ε‖g‖² ≤ 1, else T/(ε‖g‖²).
    GrowthAdapted,
    /// T′ = εT.
    EpsilonT,
    /// A fixed length, clamped to (0, T].
    Fixed(f64),
}

pub fn choose_tprime(epsilon: f64, gnorm: f64, t_final: f64, policy: TPrimePolicy) -> f64 {
    match policy {
        TPrimePolicy::GrowthAdapted => {
            let s = epsilon * gnorm * gnorm;
            if s <= 1.0 {
                t_final
            } else {
                t_final / s
            }
        }
        TPrimePolicy::EpsilonT => epsilon * t_final,
        TPrimePolicy::Fixed(v) => {
            if v > 0.0 {
                v.min(t_final)
            } else {
                // Clamp into (0, T]: the shortest representable window.
                f64::MIN_POSITIVE
            }
        }
    }
}

/// How the truncation index N is chosen.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum NPolicy {
    /// N = ⌊ln(c₄·D·e·(1+ε)/ε·(1 + ‖z_d‖_{H¹₀} + |λ|√T′·e^{c₅T′‖q‖²}))⌋.
    ClosedForm,
    /// Smallest N with ‖z − z_proj(N)‖ ≤ ε/2.
    Adaptive,
}

/// Everything the N rules look at.
#[derive(Debug, Clone, Copy)]
pub struct NSelection<'a> {
    pub epsilon: f64,
    pub z_d: &'a SpaceField,
    /// Corrected target z = z_d − S(λ).
    pub z: &'a SpaceField,
    pub lambda: f64,
    pub t_prime: f64,
    pub q_sup: f64,
    pub constants: &'a Constants,
    pub basis: &'a SpectralBasis,
    pub grid: &'a Grid,
}

/// The real number whose floor is the closed-form N (before clamping).
pub fn closed_form_log_argument(sel: &NSelection<'_>) -> f64 {
    let c = sel.constants;
    let d = closed_form_d(c, sel.t_prime, sel.q_sup);
    let source_term =
        sel.lambda.abs() * sel.t_prime.sqrt() * (c.c5 * sel.t_prime * sel.q_sup * sel.q_sup).exp();
    let data = 1.0 + h1_norm(sel.z_d, sel.grid) + source_term;
    (c.c4 * d * std::f64::consts::E * (1.0 + sel.epsilon) / sel.epsilon * data).ln()
}

pub fn choose_n(sel: &NSelection<'_>, policy: NPolicy) -> Result<usize> {
    let n_max = sel.basis.n_max;
    if n_max == 0 {
        return Err(Error::EmptySpectrum);
    }
    match policy {
        NPolicy::ClosedForm => {
            let raw = closed_form_log_argument(sel).floor();
            let lo = sel.constants.n_o.max(1);
            let n = if raw.is_finite() && raw > 0.0 { raw as usize } else { 0 };
            Ok(n.max(lo).min(n_max))
        }
        NPolicy::Adaptive => {
            let budget = TRUNCATION_BUDGET * sel.epsilon;
            let mut last = f64::INFINITY;
            for n in 1..=n_max {
                last = sel.basis.truncation_error(sel.z, n, sel.grid);
                if last <= budget {
                    return Ok(n);
                }
            }
            Err(Error::BudgetExceeded {
                achieved: last,
                budget,
                n_max,
            })
        }
    }
}
