use std::sync::Arc;

use crate::error::{Error, Result};
use crate::linctrl::{
    linear_approx_control_with_basis, ControlResult, ControllerSettings, LinearControlSpec, SpectralBasis,
    WindowProblem,
};
use crate::numerics::{l2_norm, Grid, SpaceField, SpaceTimeField};
use crate::semictrl::nonlinearity::{g_field, Nonlinearity};
use crate::semictrl::rules::{choose_tprime, NPolicy, TPrimePolicy};

/// Normalized residual below which a fixed point counts as a solution.
pub const TOL_PDE: f64 = 1e-4;

#[derive(Debug, Clone, PartialEq)]
pub struct HomotopyOptions {
    pub sigma_step: f64,
    /// θ in u ← (1−θ)u + θ·H(u,σ).
    pub damping: f64,
    /// Sup-norm increment that ends the Picard loop at one σ.
    pub tol_fp: f64,
    pub max_picard: usize,
    pub tol_pde: f64,
    /// Reuse the spectral basis once the increment drops below this value.
    pub freeze_basis_after: Option<f64>,
}

impl Default for HomotopyOptions {
    fn default() -> Self {
        HomotopyOptions {
            sigma_step: 0.25,
            damping: 1.0,
            tol_fp: 1e-6,
            max_picard: 60,
            tol_pde: TOL_PDE,
            freeze_basis_after: None,
        }
    }
}

#[derive(Debug, Clone)]
pub struct SemilinearSpec {
    pub grid: Grid,
    pub nonlinearity: Nonlinearity,
    pub u0: SpaceField,
    pub u_d: SpaceField,
    pub epsilon: f64,
    pub t_prime_policy: TPrimePolicy,
    pub n_policy: NPolicy,
    pub homotopy: HomotopyOptions,
    /// Linear controller settings; `blowup_cap` also bounds ‖u‖_∞ here.
    pub settings: ControllerSettings,
}

impl SemilinearSpec {
    pub fn validate(&self) -> Result<()> {
        let mut problems = Vec::new();
        let nx = self.grid.nx();
        if !(self.epsilon > 0.0 && self.epsilon <= 1.0) {
            problems.push(format!("epsilon must lie in (0, 1], got {}", self.epsilon));
        }
        if self.u0.len() != nx || self.u_d.len() != nx {
            problems.push("u0 and u_d must have nx values".to_string());
        }
        if !self.u0.is_finite() || !self.u_d.is_finite() {
            problems.push("u0 and u_d must be finite".to_string());
        }
        let h = &self.homotopy;
        if !(h.sigma_step > 0.0 && h.sigma_step <= 1.0) {
            problems.push("sigma_step must lie in (0, 1]".to_string());
        }
        if !(h.damping > 0.0 && h.damping <= 1.0) {
            problems.push("damping must lie in (0, 1]".to_string());
        }
        if !(h.tol_fp > 0.0) || !(h.tol_pde > 0.0) {
            problems.push("tolerances must be positive".to_string());
        }
        if h.max_picard == 0 {
            problems.push("max_picard must be at least 1".to_string());
        }
        if problems.is_empty() {
            Ok(())
        } else {
            Err(Error::Validation(problems))
        }
    }
}

/// What one evaluation of H saw and chose.
#[derive(Debug, Clone, PartialEq)]
pub struct HCall {
    pub sigma: f64,
    /// σ·‖g(u)‖_∞
    pub gnorm: f64,
    /// Output of the T′ rule for `gnorm`.
    pub t_prime: f64,
    /// T′ after snapping to the time grid.
    pub t_prime_grid: f64,
    pub n_used: usize,
    pub linear_err: f64,
}

#[derive(Debug, Clone)]
pub struct HOutput {
    /// σ times the controlled linear trajectory.
    pub y: SpaceTimeField,
    pub h: SpaceTimeField,
    pub call: HCall,
    pub control: ControlResult,
}

/// H(u,σ) = σ·y, where y solves ∂_t y − ∂_xx y + σg(u)y = −σf(0) + h·1_ω
/// from u0 with h the linear approximate control towards u_d.
pub fn apply_h(u: &SpaceTimeField, sigma: f64, spec: &SemilinearSpec) -> Result<HOutput> {
    apply_h_with_basis(u, sigma, spec, None).map(|(out, _)| out)
}

fn apply_h_with_basis(
    u: &SpaceTimeField,
    sigma: f64,
    spec: &SemilinearSpec,
    frozen: Option<Arc<SpectralBasis>>,
) -> Result<(HOutput, Arc<SpectralBasis>)> {
    let grid = &spec.grid;
    let cap = spec.settings.blowup_cap;
    let u_sup = u.sup();
    if !u_sup.is_finite() || u_sup > cap {
        return Err(Error::BlowUp { sigma, sup: u_sup, cap });
    }
    let q = g_field(&spec.nonlinearity, u)?.scaled(sigma);
    let gnorm = q.sup();
    let t_prime = choose_tprime(spec.epsilon, gnorm, grid.t_final(), spec.t_prime_policy);
    let lin = LinearControlSpec {
        q,
        u0: spec.u0.clone(),
        z_d: spec.u_d.clone(),
        lambda: -sigma * spec.nonlinearity.f0,
        epsilon: spec.epsilon,
        n_policy: spec.n_policy,
        t_prime_policy: spec.t_prime_policy,
        settings: spec.settings.clone(),
    };
    let wp = WindowProblem::from_horizon(grid, &lin.q, t_prime, spec.settings.constants.clone(), spec.settings.mode)?;
    // A linear trajectory over the cap is the semilinear blow-up showing.
    let (control, basis) = linear_approx_control_with_basis(&lin, &wp, frozen).map_err(|e| match e {
        Error::InstabilityGuard { sup, cap, .. } => Error::BlowUp { sigma, sup, cap },
        e => e,
    })?;
    let call = HCall {
        sigma,
        gnorm,
        t_prime,
        t_prime_grid: wp.t_prime(),
        n_used: control.n_used,
        linear_err: control.err_l2,
    };
    let out = HOutput {
        y: control.state.scaled(sigma),
        h: control.h.clone(),
        call,
        control,
    };
    Ok((out, basis))
}

#[derive(Debug, Clone, PartialEq)]
pub struct SigmaStep {
    pub sigma: f64,
    pub iterations: usize,
    /// ‖u_{k+1} − u_k‖_∞ per Picard iteration.
    pub increments: Vec<f64>,
    pub converged: bool,
    /// ‖u‖_∞ at the end of the step.
    pub u_sup: f64,
}

#[derive(Debug, Clone)]
pub struct FixedPointReport {
    /// Picard converged at every σ, err_l2 ≤ ε and pde_residual ≤ tol_pde.
    pub converged: bool,
    pub picard_converged: bool,
    pub sigma_path: Vec<SigmaStep>,
    pub h_calls: Vec<HCall>,
    /// H(u,1) for the last iterate u.
    pub u: SpaceTimeField,
    pub h: SpaceTimeField,
    pub err_l2: f64,
    pub cost_l2: f64,
    pub u_sup: f64,
    pub pde_residual: f64,
    pub picard_iterations_total: usize,
    pub t_prime: f64,
    pub n_used: usize,
}

/// σ-continuation with damped Picard iteration on u ↦ H(u,σ).
///
/// Exhausting the Picard budget is not an error: the report comes back
/// with `converged = false`. A sup norm above the cap is.
pub fn solve_semilinear(spec: &SemilinearSpec) -> Result<FixedPointReport> {
    spec.validate()?;
    let grid = &spec.grid;
    let opts = &spec.homotopy;
    let theta = opts.damping;
    let n_sigma = (1.0 / opts.sigma_step - 1e-9).ceil().max(1.0) as usize;

    let mut u = SpaceTimeField::zeros(grid.nx(), grid.nt() + 1);
    let mut sigma_path = Vec::with_capacity(n_sigma);
    let mut h_calls = Vec::new();
    let mut total = 0;
    let mut frozen: Option<Arc<SpectralBasis>> = None;
    let mut last: Option<HOutput> = None;
    let mut all_converged = true;

    for j in 1..=n_sigma {
        let sigma = if j == n_sigma { 1.0 } else { j as f64 * opts.sigma_step };
        let mut step = SigmaStep {
            sigma,
            iterations: 0,
            increments: Vec::new(),
            converged: false,
            u_sup: 0.0,
        };
        for _ in 0..opts.max_picard {
            let (out, basis) = apply_h_with_basis(&u, sigma, spec, frozen.clone())?;
            h_calls.push(out.call.clone());
            total += 1;
            step.iterations += 1;
            let next = if theta == 1.0 {
                out.y.clone()
            } else {
                let mut v = u.scaled(1.0 - theta);
                v.axpy(theta, &out.y);
                v
            };
            let incr = next.max_abs_diff(&u);
            step.increments.push(incr);
            u = next;
            last = Some(out);
            let cap = spec.settings.blowup_cap;
            let sup = u.sup();
            if !sup.is_finite() || sup > cap {
                return Err(Error::BlowUp { sigma, sup, cap });
            }
            if let Some(thr) = opts.freeze_basis_after {
                if incr <= thr {
                    frozen.get_or_insert(basis);
                }
            }
            if incr <= opts.tol_fp {
                step.converged = true;
                break;
            }
        }
        step.u_sup = u.sup();
        all_converged &= step.converged;
        let stop = !step.converged;
        sigma_path.push(step);
        if stop {
            break;
        }
    }

    let last = last.expect("at least one H evaluation");
    let final_u = last.y;
    let h = last.h;
    let err_l2 = l2_norm(&final_u.last_slice().sub(&spec.u_d), grid);
    let pde_residual = semilinear_residual(&final_u, &h, &spec.nonlinearity, grid)?;
    let reached_one = last.call.sigma == 1.0;
    let picard_converged = all_converged && reached_one;
    let converged = picard_converged && err_l2 <= spec.epsilon && pde_residual <= opts.tol_pde;
    Ok(FixedPointReport {
        converged,
        picard_converged,
        sigma_path,
        u_sup: final_u.sup(),
        u: final_u,
        cost_l2: last.control.cost_l2,
        h,
        err_l2,
        pde_residual,
        picard_iterations_total: total,
        t_prime: last.call.t_prime_grid,
        n_used: last.call.n_used,
        h_calls,
    })
}

/// ‖∂_t u − D_xx u + f(u) − h·1_ω‖ on the space-time grid, with the time
/// derivative as a forward difference and the rest averaged over each step
/// (the Crank–Nicolson stencil), divided by 1 + ‖u‖_∞.
pub fn semilinear_residual(u: &SpaceTimeField, h: &SpaceTimeField, nl: &Nonlinearity, grid: &Grid) -> Result<f64> {
    let nx = grid.nx();
    if u.nx() != nx || h.nx() != nx {
        return Err(Error::DimensionMismatch {
            what: "residual field width",
            expected: nx,
            got: if u.nx() != nx { u.nx() } else { h.nx() },
        });
    }
    if u.slices() != h.slices() {
        return Err(Error::DimensionMismatch {
            what: "residual field slices",
            expected: u.slices(),
            got: h.slices(),
        });
    }
    let dt = grid.dt();
    let dx = grid.dx();
    let inv_dx2 = 1.0 / (dx * dx);
    let mask = grid.omega_mask();
    let level = |k: usize| -> Result<Vec<f64>> {
        let s = u.slice(k);
        (0..nx)
            .map(|i| {
                let l = if i > 0 { s[i - 1] } else { 0.0 };
                let r = if i + 1 < nx { s[i + 1] } else { 0.0 };
                let fu = nl.eval(s[i]);
                if !fu.is_finite() {
                    return Err(Error::NonFiniteValue { s: s[i] });
                }
                // −D_xx u + f(u) − h·1_ω at one level
                Ok(-(l - 2.0 * s[i] + r) * inv_dx2 + fu - h.slice(k)[i] * mask[i])
            })
            .collect()
    };
    let mut sum = 0.0;
    let mut prev = level(0)?;
    for k in 0..u.slices().saturating_sub(1) {
        let next = level(k + 1)?;
        let (a, b) = (u.slice(k), u.slice(k + 1));
        for i in 0..nx {
            let r = (b[i] - a[i]) / dt + 0.5 * (prev[i] + next[i]);
            sum += r * r;
        }
        prev = next;
    }
    Ok((sum * dt * dx).sqrt() / (1.0 + u.sup()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::heat1d::{solve_forward, TimeSpan};
    use crate::linctrl::{ControllerSettings, LinearControlSpec};
    use std::f64::consts::PI;

    #[test]
    fn residual_of_a_linear_solve_vanishes() {
        let grid = Grid::new(30, 0.5, 40, (0.3, 0.8)).unwrap();
        let u0 = SpaceField::from_fn(&grid, |x| (PI * x).sin());
        let h = SpaceTimeField::from_fn(&grid, 41, 0.0, |x, t| (3.0 * x + t).cos()).restrict_to_omega(&grid);
        let a = SpaceTimeField::zeros(30, 41);
        let traj = solve_forward(&grid, &a, None, Some(&h), &u0, TimeSpan::new(0.0, 40)).unwrap();
        let r = semilinear_residual(&traj.slices, &h, &Nonlinearity::zero(), &grid).unwrap();
        assert!(r <= 1e-10, "{r}");
        let z = SpaceTimeField::zeros(30, 41);
        assert_eq!(semilinear_residual(&z, &z, &Nonlinearity::zero(), &grid).unwrap(), 0.0);
    }

    #[test]
    fn residual_scales_with_perturbation() {
        let grid = Grid::new(30, 0.5, 40, (0.3, 0.8)).unwrap();
        let u0 = SpaceField::from_fn(&grid, |x| (PI * x).sin());
        let a = SpaceTimeField::zeros(30, 41);
        let traj = solve_forward(&grid, &a, None, None, &u0, TimeSpan::new(0.0, 40)).unwrap();
        let h = SpaceTimeField::zeros(30, 41);
        let bump = SpaceField::from_fn(&grid, |x| (PI * x).sin());
        let mut rs = Vec::new();
        for delta in [1e-6, 1e-5, 1e-4] {
            let mut u = traj.slices.clone();
            for (v, b) in u.slice_mut(20).iter_mut().zip(bump.values()) {
                *v += delta * b;
            }
            let r = semilinear_residual(&u, &h, &Nonlinearity::zero(), &grid).unwrap() * (1.0 + u.sup());
            rs.push(r / delta);
        }
        // Two steps see the jump, each with magnitude ≈ δ/Δt·‖sin πx‖.
        let expect = (2.0 * grid.dt()).sqrt() / grid.dt() * l2_norm(&bump, &grid);
        for r in rs {
            assert!((r / expect - 1.0).abs() < 0.05, "{r} vs {expect}");
        }
    }

    fn small_spec(nl: Nonlinearity) -> SemilinearSpec {
        let grid = Grid::new(30, 1.0, 40, (0.3, 0.8)).unwrap();
        SemilinearSpec {
            nonlinearity: nl,
            u0: SpaceField::from_fn(&grid, |x| (PI * x).sin()),
            u_d: SpaceField::from_fn(&grid, |x| 0.5 * (2.0 * PI * x).sin()),
            epsilon: 0.1,
            t_prime_policy: TPrimePolicy::GrowthAdapted,
            n_policy: NPolicy::Adaptive,
            homotopy: HomotopyOptions::default(),
            settings: ControllerSettings::default(),
            grid,
        }
    }

    #[test]
    fn sigma_zero_gives_zero() {
        let spec = small_spec(Nonlinearity::sine_plus(0.5));
        let u = SpaceTimeField::from_fn(&spec.grid, 41, 0.0, |x, t| 3.0 * x - t);
        let out = apply_h(&u, 0.0, &spec).unwrap();
        assert_eq!(out.y.sup(), 0.0);
    }

    #[test]
    fn zero_nonlinearity_is_the_linear_controller() {
        let spec = small_spec(Nonlinearity::zero());
        let u = SpaceTimeField::from_fn(&spec.grid, 41, 0.0, |x, t| x + t);
        let out = apply_h(&u, 1.0, &spec).unwrap();
        let lin = LinearControlSpec {
            q: SpaceTimeField::zeros(30, 41),
            u0: spec.u0.clone(),
            z_d: spec.u_d.clone(),
            lambda: 0.0,
            epsilon: 0.1,
            n_policy: NPolicy::Adaptive,
            t_prime_policy: TPrimePolicy::GrowthAdapted,
            settings: ControllerSettings::default(),
        };
        let wp = crate::linctrl::plan_window(&lin, &spec.grid).unwrap();
        let r = crate::linctrl::linear_approx_control(&lin, &wp).unwrap();
        assert_eq!(out.y, r.state);
        assert_eq!(out.h, r.h);
    }

    #[test]
    fn constant_map_converges_immediately_for_any_damping() {
        let mut spec = small_spec(Nonlinearity::zero());
        let full = solve_semilinear(&spec).unwrap();
        assert!(full.converged);
        for step in &full.sigma_path {
            // second evaluation only confirms the first
            assert_eq!(step.iterations, 2);
        }
        spec.homotopy.damping = 0.5;
        let half = solve_semilinear(&spec).unwrap();
        assert!(half.converged);
        assert!(half.u.max_abs_diff(&full.u) <= spec.homotopy.tol_fp);
    }

    #[test]
    fn sine_nonlinearity_reaches_target() {
        let spec = small_spec(Nonlinearity::sine_plus(0.5));
        let r = solve_semilinear(&spec).unwrap();
        assert!(r.converged, "{} {}", r.err_l2, r.pde_residual);
        assert!(r.err_l2 <= 0.1 && r.pde_residual <= TOL_PDE);
        for call in &r.h_calls {
            assert_eq!(call.t_prime, choose_tprime(0.1, call.gnorm, 1.0, TPrimePolicy::GrowthAdapted));
        }
        assert!(r.sigma_path.iter().all(|s| s.u_sup.is_finite() && s.u_sup < spec.settings.blowup_cap));
    }

    #[test]
    fn frozen_basis_still_converges() {
        let mut spec = small_spec(Nonlinearity::sine_plus(0.5));
        spec.homotopy.freeze_basis_after = Some(1e-3);
        let r = solve_semilinear(&spec).unwrap();
        assert!(r.picard_converged);
        assert!(r.err_l2 <= 0.1);
    }

    #[test]
    fn cap_violation_is_blow_up() {
        let mut spec = small_spec(Nonlinearity::power(-1.0, 3));
        spec.settings.blowup_cap = 1e-3;
        assert!(matches!(solve_semilinear(&spec), Err(Error::BlowUp { .. })));
    }
}
