use std::sync::Arc;

use crate::error::{Error, Result};
use crate::heat1d::{free_evolution, solve_forward_capped, TimeSpan, DEFAULT_BLOWUP_CAP};
use crate::linctrl::gramian::{approx_control_l, gramian_basis, SpectralBasis};
use crate::linctrl::null::{null_control, NullControlOptions};
use crate::linctrl::window::{source_response_s, WindowProblem};
use crate::linctrl::{closed_form_d, closed_form_g, Constants, ControlMode};
use crate::numerics::{h1_norm, l2_norm, st_norm, Grid, SpaceField, SpaceTimeField};
use crate::semictrl::{choose_n, choose_tprime, NPolicy, NSelection, TPrimePolicy, NULL_BUDGET};

/// Numerical knobs of the linear controller.
#[derive(Debug, Clone, PartialEq)]
pub struct ControllerSettings {
    pub constants: Constants,
    pub mode: ControlMode,
    /// Initial HUM penalty relative to the top Gramian eigenvalue.
    pub eta_rel: f64,
    pub null_retries: usize,
    pub cg_tol: f64,
    pub blowup_cap: f64,
}

impl Default for ControllerSettings {
    fn default() -> Self {
        ControllerSettings {
            constants: Constants::default(),
            mode: ControlMode::Adaptive,
            eta_rel: 1e-6,
            null_retries: 4,
            cg_tol: 1e-10,
            blowup_cap: DEFAULT_BLOWUP_CAP,
        }
    }
}

/// Data of one linear approximate-control problem on the full horizon:
/// ∂_t v − ∂_xx v + q v = λ + h·1_ω, v(0) = u0, target ‖v(T) − z_d‖ ≤ ε.
#[derive(Debug, Clone)]
pub struct LinearControlSpec {
    /// Potential on the full horizon (nt + 1 slices).
    pub q: SpaceTimeField,
    pub u0: SpaceField,
    pub z_d: SpaceField,
    pub lambda: f64,
    pub epsilon: f64,
    pub n_policy: NPolicy,
    pub t_prime_policy: TPrimePolicy,
    pub settings: ControllerSettings,
}

impl LinearControlSpec {
    pub fn validate(&self, grid: &Grid) -> Result<()> {
        let mut problems = Vec::new();
        if !(self.epsilon > 0.0 && self.epsilon <= 1.0) {
            problems.push(format!("epsilon must lie in (0, 1], got {}", self.epsilon));
        }
        if self.q.slices() != grid.nt() + 1 || self.q.nx() != grid.nx() {
            problems.push("potential must cover the full horizon grid".to_string());
        }
        if self.u0.len() != grid.nx() || self.z_d.len() != grid.nx() {
            problems.push("u0 and z_d must have nx values".to_string());
        }
        if !self.u0.is_finite() || !self.z_d.is_finite() || !self.q.is_finite() || !self.lambda.is_finite() {
            problems.push("data must be finite".to_string());
        }
        if problems.is_empty() {
            Ok(())
        } else {
            Err(Error::Validation(problems))
        }
    }
}

#[derive(Debug, Clone, Default)]
pub struct ControlDiagnostics {
    pub e_scale: f64,
    pub mu1: f64,
    pub n_max: usize,
    pub band_populations: Vec<usize>,
    pub discarded_modes: usize,
    /// ‖z − z_proj(N)‖
    pub truncation_error: f64,
    /// ‖v(·,T′; π₀, χ)‖ in the window.
    pub null_residual: f64,
    pub null_eta: f64,
    pub null_cg_iterations: usize,
    /// ‖π₀‖ at the start of the window.
    pub pi0_norm: f64,
    pub chi_norm: f64,
    pub ell_norm: f64,
    /// Norm of the explicit preimage of z_proj (upper bound for its
    /// reachable-space norm).
    pub preimage_norm: f64,
    pub g_factor: f64,
    pub d_factor: f64,
    /// c₄·D·e^{−N}·(‖z_d‖_{H¹₀} + |λ|√T′e^{c₅T′‖q‖²}) with configured constants.
    pub closed_form_error_bound: f64,
}

#[derive(Debug, Clone)]
pub struct ControlResult {
    /// Control on the full horizon; zero on [0, T − T′] and outside ω.
    pub h: SpaceTimeField,
    /// Controlled state on the full horizon.
    pub state: SpaceTimeField,
    pub err_l2: f64,
    pub cost_l2: f64,
    pub n_used: usize,
    pub t_prime: f64,
    /// err_l2 ≤ ε
    pub target_met: bool,
    pub diagnostics: ControlDiagnostics,
}

/// Window for a linear problem: T′ from the policy with ‖q‖_∞ standing in
/// for the quotient norm.
pub fn plan_window(spec: &LinearControlSpec, grid: &Grid) -> Result<WindowProblem> {
    spec.validate(grid)?;
    let t_prime = choose_tprime(spec.epsilon, spec.q.sup(), grid.t_final(), spec.t_prime_policy);
    WindowProblem::from_horizon(grid, &spec.q, t_prime, spec.settings.constants.clone(), spec.settings.mode)
}

/// Two-phase construction: free evolution on (0, T − T′], then
/// χ + ℓ on the window, with ℓ aimed at z = z_d − S(λ).
pub fn linear_approx_control(spec: &LinearControlSpec, wp: &WindowProblem) -> Result<ControlResult> {
    linear_approx_control_with_basis(spec, wp, None).map(|(r, _)| r)
}

/// Like [`linear_approx_control`], but uses `frozen` instead of
/// diagonalizing the Gramian of `wp` when given. Returns the basis used.
pub fn linear_approx_control_with_basis(
    spec: &LinearControlSpec,
    wp: &WindowProblem,
    frozen: Option<Arc<SpectralBasis>>,
) -> Result<(ControlResult, Arc<SpectralBasis>)> {
    let grid = wp.grid();
    spec.validate(grid)?;
    let nx = grid.nx();
    let nt = grid.nt();
    let steps = wp.steps();
    let k0 = nt - steps;
    let settings = &spec.settings;

    let pi0 = if k0 > 0 {
        free_evolution(grid, &spec.q.window(0, k0), spec.lambda, &spec.u0, TimeSpan::new(0.0, k0))?.terminal()
    } else {
        spec.u0.clone()
    };

    let s_lambda = source_response_s(spec.lambda, wp)?;
    let z = spec.z_d.sub(&s_lambda);

    let basis = match frozen {
        Some(b) if b.xi.first().is_some_and(|x| x.len() == nx) => b,
        _ => Arc::new(gramian_basis(wp)?),
    };
    let sel = NSelection {
        epsilon: spec.epsilon,
        z_d: &spec.z_d,
        z: &z,
        lambda: spec.lambda,
        t_prime: wp.t_prime(),
        q_sup: wp.q_sup(),
        constants: &settings.constants,
        basis: &basis,
        grid,
    };
    let n = choose_n(&sel, spec.n_policy)?;

    let pi0_norm = l2_norm(&pi0, grid);
    let e = wp.e_scale();
    let null_tol = if pi0_norm > 0.0 {
        NULL_BUDGET * spec.epsilon / pi0_norm
    } else {
        1.0
    };
    let mut null_opts = NullControlOptions::new(null_tol, settings.eta_rel * basis.mu1() / (e * e));
    null_opts.max_retries = settings.null_retries;
    null_opts.cg_tol = settings.cg_tol;
    let null = null_control(&pi0, wp, &null_opts)?;
    let filtered = approx_control_l(&z, n, &basis, wp)?;

    let mut h = SpaceTimeField::zeros(nx, nt + 1);
    for k in 1..=steps {
        let dst = h.slice_mut(k0 + k);
        for ((d, a), b) in dst.iter_mut().zip(null.chi.slice(k)).zip(filtered.ell.slice(k)) {
            *d = a + b;
        }
    }
    let h = h.assert_omega_support(grid)?;

    let source = (spec.lambda != 0.0).then(|| SpaceTimeField::constant(nx, nt + 1, spec.lambda));
    let traj = solve_forward_capped(
        grid,
        &spec.q,
        source.as_ref(),
        Some(&h),
        &spec.u0,
        TimeSpan::new(0.0, nt),
        settings.blowup_cap,
    )?;
    let err_l2 = l2_norm(&traj.terminal().sub(&spec.z_d), grid);
    let cost_l2 = st_norm(&h, grid);

    let t_prime = wp.t_prime();
    let c = &settings.constants;
    let q_sup = wp.q_sup();
    let d_factor = closed_form_d(c, t_prime, q_sup);
    let data = h1_norm(&spec.z_d, grid)
        + spec.lambda.abs() * t_prime.sqrt() * (c.c5 * t_prime * q_sup * q_sup).exp();
    let diagnostics = ControlDiagnostics {
        e_scale: e,
        mu1: basis.mu1(),
        n_max: basis.n_max,
        band_populations: basis.band_populations(),
        discarded_modes: basis.discarded,
        truncation_error: l2_norm(&z.sub(&filtered.z_proj), grid),
        null_residual: null.residual,
        null_eta: null.eta,
        null_cg_iterations: null.cg_iterations,
        pi0_norm,
        chi_norm: st_norm(&null.chi, grid),
        ell_norm: st_norm(&filtered.ell, grid),
        preimage_norm: filtered.preimage_norm,
        g_factor: closed_form_g(c, t_prime, q_sup),
        d_factor,
        closed_form_error_bound: c.c4 * d_factor * (-(n as f64)).exp() * data,
    };
    let result = ControlResult {
        h,
        state: traj.slices,
        err_l2,
        cost_l2,
        n_used: n,
        t_prime,
        target_met: err_l2 <= spec.epsilon,
        diagnostics,
    };
    Ok((result, basis))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn spec(grid: &Grid, u0: impl Fn(f64) -> f64, z_d: impl Fn(f64) -> f64, epsilon: f64) -> LinearControlSpec {
        LinearControlSpec {
            q: SpaceTimeField::zeros(grid.nx(), grid.nt() + 1),
            u0: SpaceField::from_fn(grid, u0),
            z_d: SpaceField::from_fn(grid, z_d),
            lambda: 0.0,
            epsilon,
            n_policy: NPolicy::Adaptive,
            t_prime_policy: TPrimePolicy::GrowthAdapted,
            settings: ControllerSettings::default(),
        }
    }

    #[test]
    fn zero_data_needs_no_control() {
        let grid = Grid::new(20, 1.0, 20, (0.3, 0.8)).unwrap();
        let s = spec(&grid, |_| 0.0, |_| 0.0, 0.1);
        let r = linear_approx_control(&s, &plan_window(&s, &grid).unwrap()).unwrap();
        assert_eq!(r.h.sup(), 0.0);
        assert_eq!(r.err_l2, 0.0);
    }

    #[test]
    fn reaches_target_and_stays_in_window() {
        let grid = Grid::new(40, 1.0, 40, (0.3, 0.8)).unwrap();
        let mut s = spec(&grid, |x| x * (1.0 - x), |x| (PI * x).sin(), 0.1);
        s.t_prime_policy = TPrimePolicy::Fixed(0.5);
        let wp = plan_window(&s, &grid).unwrap();
        assert_eq!(wp.steps(), 20);
        let r = linear_approx_control(&s, &wp).unwrap();
        assert!(r.target_met && r.err_l2 <= 0.1, "{}", r.err_l2);
        assert!(r.cost_l2.is_finite() && r.cost_l2 > 0.0);
        assert!(r.h.is_omega_supported());
        for k in 0..=20 {
            assert_eq!(r.h.slice_field(k).sup(), 0.0, "slice {k}");
        }
        assert!(r.diagnostics.truncation_error <= 0.05);
    }

    #[test]
    fn source_is_compensated() {
        let grid = Grid::new(30, 1.0, 30, (0.3, 0.8)).unwrap();
        let mut s = spec(&grid, |x| (PI * x).sin(), |x| 0.5 * (2.0 * PI * x).sin(), 0.1);
        s.lambda = -0.5;
        s.q = SpaceTimeField::constant(30, 31, 0.7);
        let r = linear_approx_control(&s, &plan_window(&s, &grid).unwrap()).unwrap();
        assert!(r.err_l2 <= 0.1, "{}", r.err_l2);
    }
}
