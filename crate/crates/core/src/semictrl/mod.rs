//! Semilinear layer: the quotient g(s) = (f(s) − f(0))/s, the rules that
//! pick the window length T′ and the truncation index N, the map H(u,σ),
//! and the σ-continuation fixed-point driver.

mod homotopy;
mod nonlinearity;
mod rules;

pub use homotopy::{
    apply_h, semilinear_residual, solve_semilinear, FixedPointReport, HCall, HOutput, HomotopyOptions,
    SemilinearSpec, SigmaStep, TOL_PDE,
};
pub use nonlinearity::{g_eval, g_field, g_norm_inf, Nonlinearity, QUOTIENT_S_TOL};
pub use rules::{
    choose_n, choose_tprime, closed_form_log_argument, NPolicy, NSelection, TPrimePolicy, NULL_BUDGET,
    TRUNCATION_BUDGET,
};
