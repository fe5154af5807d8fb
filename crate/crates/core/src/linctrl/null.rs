use crate::error::{Error, Result};
use crate::linctrl::window::WindowProblem;
use crate::numerics::{cg_solve, l2_norm, SpaceField, SpaceTimeField};

#[derive(Debug, Clone)]
pub struct NullControlOptions {
    /// Required ‖v(·,T′)‖ / ‖π₀‖.
    pub tol: f64,
    /// Initial penalty η.
    pub eta: f64,
    /// Number of times η is divided by 10 after a miss.
    pub max_retries: usize,
    pub cg_tol: f64,
    /// CG iteration cap; `None` means 10·nx.
    pub cg_maxit: Option<usize>,
}

impl NullControlOptions {
    pub fn new(tol: f64, eta: f64) -> Self {
        NullControlOptions {
            tol,
            eta,
            max_retries: 4,
            cg_tol: 1e-10,
            cg_maxit: None,
        }
    }
}

#[derive(Debug, Clone)]
pub struct NullControl {
    /// Physical window control χ (ω-supported, zero at τ = 0).
    pub chi: SpaceTimeField,
    /// ‖v(·,T′; π₀, χ)‖_{L²}
    pub residual: f64,
    /// Penalty that produced χ (0 when no control was needed).
    pub eta: f64,
    pub retries: usize,
    pub cg_iterations: usize,
}

/// Penalized HUM null control for the window system started from `pi0`.
///
/// With Λ = C₁C₁* (C₁ the control-to-state map with unit scaling), solves
/// (Λ + ηI) φ = −v_free(·,T′) by CG and sets χ = C₁*φ, so that the
/// controlled terminal state is v_free + Λφ = −ηφ. η is divided by 10 until
/// the residual target is met or the retries are exhausted.
pub fn null_control(pi0: &SpaceField, wp: &WindowProblem, opts: &NullControlOptions) -> Result<NullControl> {
    let grid = wp.grid();
    let nx = grid.nx();
    let zero = || NullControl {
        chi: SpaceTimeField::zeros(nx, wp.slices()).restrict_to_omega(grid),
        residual: 0.0,
        eta: 0.0,
        retries: 0,
        cg_iterations: 0,
    };
    let pi_norm = l2_norm(pi0, grid);
    if pi_norm == 0.0 {
        return Ok(zero());
    }
    let target = opts.tol * pi_norm;
    let v_free = wp.terminal_state(pi0.values(), None, 0.0)?;
    let free_residual = l2_norm(&v_free, grid);
    if free_residual <= target {
        return Ok(NullControl {
            residual: free_residual,
            ..zero()
        });
    }

    let rhs = v_free.scaled(-1.0);
    let maxit = opts.cg_maxit.unwrap_or(10 * nx);
    let mut best: Option<NullControl> = None;
    let mut eta = opts.eta;
    for attempt in 0..=opts.max_retries {
        let sol = cg_solve(
            |phi| {
                let mut out = wp.forward_map(&wp.adjoint_map(phi, 1.0)?, 1.0)?;
                out.axpy(eta, phi);
                Ok(out)
            },
            &rhs,
            opts.cg_tol,
            maxit,
        )?;
        let chi = wp.adjoint_map(&sol.x, 1.0)?;
        let reached = wp.forward_map(&chi, 1.0)?.add(&v_free);
        let residual = l2_norm(&reached, grid);
        let candidate = NullControl {
            chi,
            residual,
            eta,
            retries: attempt,
            cg_iterations: sol.iterations,
        };
        if residual <= target {
            return Ok(candidate);
        }
        if best.as_ref().is_none_or(|b| residual < b.residual) {
            best = Some(candidate);
        }
        eta /= 10.0;
    }
    Err(Error::NullControlFailure {
        residual: best.map_or(f64::INFINITY, |b| b.residual),
        target,
        retries: opts.max_retries,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linctrl::{Constants, ControlMode};
    use crate::numerics::{st_norm, Grid};
    use std::f64::consts::PI;

    fn free_window(t_prime: f64, nt: usize) -> WindowProblem {
        let g = Grid::new(40, t_prime, nt, (0.2, 0.9)).unwrap();
        WindowProblem::new(g, SpaceTimeField::zeros(40, nt + 1), 1.0, Constants::default(), ControlMode::Adaptive)
            .unwrap()
    }

    #[test]
    fn zero_state_needs_no_control() {
        let wp = free_window(0.5, 20);
        let nc = null_control(&SpaceField::zeros(40), &wp, &NullControlOptions::new(1e-3, 1e-8)).unwrap();
        assert_eq!(nc.chi.sup(), 0.0);
        assert_eq!(nc.residual, 0.0);
    }

    #[test]
    fn drives_sine_to_zero() {
        let wp = free_window(0.5, 50);
        let g = wp.grid().clone();
        let pi0 = SpaceField::from_fn(&g, |x| (PI * x).sin());
        let nc = null_control(&pi0, &wp, &NullControlOptions::new(1e-3, 1e-8)).unwrap();
        assert!(nc.residual <= 1e-3 * l2_norm(&pi0, &g));
        let reached = wp.terminal_state(pi0.values(), Some((&nc.chi, 1.0)), 0.0).unwrap();
        assert!((l2_norm(&reached, &g) - nc.residual).abs() <= 1e-12);
    }

    #[test]
    fn shorter_window_costs_more() {
        let long = free_window(0.5, 50);
        let short = free_window(0.25, 25);
        let g = long.grid().clone();
        let pi0 = SpaceField::from_fn(&g, |x| (PI * x).sin());
        let opts = NullControlOptions::new(1e-3, 1e-8);
        let a = null_control(&pi0, &long, &opts).unwrap();
        let b = null_control(&pi0, &short, &opts).unwrap();
        assert!(st_norm(&b.chi, short.grid()) >= st_norm(&a.chi, &g));
    }

    #[test]
    fn unreachable_target_is_reported() {
        let wp = free_window(0.5, 20);
        let g = wp.grid().clone();
        let pi0 = SpaceField::from_fn(&g, |x| (PI * x).sin());
        let mut opts = NullControlOptions::new(1e-300, 1.0);
        opts.max_retries = 1;
        assert!(matches!(null_control(&pi0, &wp, &opts), Err(Error::NullControlFailure { .. })));
    }
}
