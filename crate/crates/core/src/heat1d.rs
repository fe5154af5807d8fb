//! Crank–Nicolson solvers for ∂_t u − ∂_xx u + a(x,t) u = f(x,t) on (0,1)
//! with homogeneous Dirichlet conditions.
//!
//! One step reads
//! (I + Δt/2·A_{k+1}) u^{k+1} = (I − Δt/2·A_k) u^k + Δt·(f^k + f^{k+1})/2,
//! where A_k = −D_xx + diag(a(·, t_k)) and D_xx is the 3-point Laplacian.

use crate::error::{Error, Result};
use crate::numerics::{check_omega_support, Grid, SpaceField, SpaceTimeField, TridiagFactor};

pub const DEFAULT_BLOWUP_CAP: f64 = 1e12;

/// A stretch of the time grid: `steps` steps of size grid.dt() from `t0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimeSpan {
    pub t0: f64,
    pub steps: usize,
}

impl TimeSpan {
    pub fn new(t0: f64, steps: usize) -> Self {
        TimeSpan { t0, steps }
    }

    pub fn slices(&self) -> usize {
        self.steps + 1
    }

    pub fn t1(&self, grid: &Grid) -> f64 {
        self.t0 + self.steps as f64 * grid.dt()
    }
}

/// A solution on a time span. Slices are stored in physical time order; for a
/// forward solve slice 0 is the initial condition, for a backward solve the
/// last slice is the terminal condition.
#[derive(Debug, Clone)]
pub struct Trajectory {
    pub slices: SpaceTimeField,
    pub t0: f64,
    pub t1: f64,
}

impl Trajectory {
    pub fn initial(&self) -> SpaceField {
        self.slices.slice_field(0)
    }

    pub fn terminal(&self) -> SpaceField {
        self.slices.last_slice()
    }
}

/// Pre-factored Crank–Nicolson stepper for a fixed potential on a fixed span.
#[derive(Debug, Clone)]
pub struct CrankNicolson {
    nx: usize,
    dt: f64,
    // Off-diagonal of Δt/2·A (identical for every level).
    half_off: f64,
    // Diagonal of Δt/2·A_k, per level.
    half_diag: Vec<Vec<f64>>,
    implicit: Vec<TridiagFactor>,
}

impl CrankNicolson {
    pub fn new(grid: &Grid, potential: &SpaceTimeField) -> Result<Self> {
        let nx = grid.nx();
        if potential.nx() != nx {
            return Err(Error::DimensionMismatch {
                what: "potential nx",
                expected: nx,
                got: potential.nx(),
            });
        }
        let dt = grid.dt();
        let dx2 = grid.dx() * grid.dx();
        let half_off = -0.5 * dt / dx2;
        let off = vec![half_off; nx - 1];
        let mut half_diag = Vec::with_capacity(potential.slices());
        let mut implicit = Vec::with_capacity(potential.slices());
        for k in 0..potential.slices() {
            let hd: Vec<f64> = potential
                .slice(k)
                .iter()
                .map(|a| 0.5 * dt * (2.0 / dx2 + a))
                .collect();
            let diag: Vec<f64> = hd.iter().map(|v| 1.0 + v).collect();
            implicit.push(TridiagFactor::new(&off, &diag, &off)?);
            half_diag.push(hd);
        }
        Ok(CrankNicolson {
            nx,
            dt,
            half_off,
            half_diag,
            implicit,
        })
    }

    pub fn nx(&self) -> usize {
        self.nx
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn steps(&self) -> usize {
        self.implicit.len() - 1
    }

    /// x ← (I + Δt/2·A_k)⁻¹ x
    pub fn implicit_solve(&self, k: usize, x: &mut [f64]) {
        self.implicit[k].solve_in_place(x);
    }

    /// (I − Δt/2·A_k) v
    pub fn explicit_apply(&self, k: usize, v: &[f64]) -> Vec<f64> {
        let n = self.nx;
        let hd = &self.half_diag[k];
        let off = self.half_off;
        (0..n)
            .map(|i| {
                let mut s = (1.0 - hd[i]) * v[i];
                if i > 0 {
                    s -= off * v[i - 1];
                }
                if i + 1 < n {
                    s -= off * v[i + 1];
                }
                s
            })
            .collect()
    }

    /// Runs the recurrence from `u0` with the forcing f (source plus control,
    /// already combined) and returns every level.
    pub fn propagate(&self, u0: &[f64], forcing: Option<&SpaceTimeField>, cap: f64) -> Result<SpaceTimeField> {
        let n = self.nx;
        if u0.len() != n {
            return Err(Error::DimensionMismatch {
                what: "initial condition",
                expected: n,
                got: u0.len(),
            });
        }
        let steps = self.steps();
        if let Some(f) = forcing {
            if f.slices() != steps + 1 || f.nx() != n {
                return Err(Error::DimensionMismatch {
                    what: "forcing slices",
                    expected: steps + 1,
                    got: f.slices(),
                });
            }
        }
        let mut out = SpaceTimeField::zeros(n, steps + 1);
        out.slice_mut(0).copy_from_slice(u0);
        let half_dt = 0.5 * self.dt;
        for k in 0..steps {
            let mut rhs = self.explicit_apply(k, out.slice(k));
            if let Some(f) = forcing {
                for ((r, a), b) in rhs.iter_mut().zip(f.slice(k)).zip(f.slice(k + 1)) {
                    *r += half_dt * (a + b);
                }
            }
            self.implicit_solve(k + 1, &mut rhs);
            let sup = rhs.iter().fold(0.0f64, |m, v| m.max(v.abs()));
            if !(sup <= cap) {
                return Err(Error::InstabilityGuard { slice: k + 1, sup, cap });
            }
            out.slice_mut(k + 1).copy_from_slice(&rhs);
        }
        Ok(out)
    }
}

fn check_span(what: &'static str, field: &SpaceTimeField, span: TimeSpan, nx: usize) -> Result<()> {
    if field.slices() != span.slices() {
        return Err(Error::DimensionMismatch {
            what,
            expected: span.slices(),
            got: field.slices(),
        });
    }
    if field.nx() != nx {
        return Err(Error::DimensionMismatch {
            what,
            expected: nx,
            got: field.nx(),
        });
    }
    Ok(())
}

fn combined_forcing(
    grid: &Grid,
    source: Option<&SpaceTimeField>,
    control: Option<&SpaceTimeField>,
    span: TimeSpan,
) -> Result<Option<SpaceTimeField>> {
    if let Some(s) = source {
        check_span("source", s, span, grid.nx())?;
    }
    if let Some(c) = control {
        check_span("control", c, span, grid.nx())?;
        check_omega_support(c, grid)?;
    }
    Ok(match (source, control) {
        (None, None) => None,
        (Some(s), None) => Some(s.clone()),
        (None, Some(c)) => Some(c.clone()),
        (Some(s), Some(c)) => Some(s.add(c)),
    })
}

/// Forward Crank–Nicolson solve of ∂_t u − ∂_xx u + a u = source + control·1_ω.
pub fn solve_forward(
    grid: &Grid,
    a: &SpaceTimeField,
    source: Option<&SpaceTimeField>,
    control: Option<&SpaceTimeField>,
    u0: &SpaceField,
    span: TimeSpan,
) -> Result<Trajectory> {
    solve_forward_capped(grid, a, source, control, u0, span, DEFAULT_BLOWUP_CAP)
}

pub fn solve_forward_capped(
    grid: &Grid,
    a: &SpaceTimeField,
    source: Option<&SpaceTimeField>,
    control: Option<&SpaceTimeField>,
    u0: &SpaceField,
    span: TimeSpan,
    cap: f64,
) -> Result<Trajectory> {
    check_span("potential", a, span, grid.nx())?;
    let forcing = combined_forcing(grid, source, control, span)?;
    let cn = CrankNicolson::new(grid, a)?;
    let slices = cn.propagate(u0.values(), forcing.as_ref(), cap)?;
    Ok(Trajectory {
        slices,
        t0: span.t0,
        t1: span.t1(grid),
    })
}

/// Backward solve of −∂_t w − ∂_xx w + a w = source + control·1_ω with
/// w(t1) = w_t, via the reflection τ = t1 − t onto a forward solve.
pub fn solve_backward(
    grid: &Grid,
    a: &SpaceTimeField,
    source: Option<&SpaceTimeField>,
    control: Option<&SpaceTimeField>,
    w_t: &SpaceField,
    span: TimeSpan,
) -> Result<Trajectory> {
    check_span("potential", a, span, grid.nx())?;
    let a_r = a.reflect();
    let s_r = source.map(SpaceTimeField::reflect);
    let c_r = control.map(SpaceTimeField::reflect);
    let forward = solve_forward(grid, &a_r, s_r.as_ref(), c_r.as_ref(), w_t, span)?;
    Ok(Trajectory {
        slices: forward.slices.reflect(),
        t0: span.t0,
        t1: span.t1(grid),
    })
}

/// Uncontrolled evolution with a constant source λ.
pub fn free_evolution(grid: &Grid, q: &SpaceTimeField, lambda: f64, u0: &SpaceField, span: TimeSpan) -> Result<Trajectory> {
    if lambda == 0.0 {
        return solve_forward(grid, q, None, None, u0, span);
    }
    let source = SpaceTimeField::constant(grid.nx(), span.slices(), lambda);
    solve_forward(grid, q, Some(&source), None, u0, span)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::l2_norm;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::PI;

    fn decay_error(nx: usize, nt: usize, c: f64) -> f64 {
        let t = 0.1;
        let g = Grid::new(nx, t, nt, (0.2, 0.8)).unwrap();
        let a = SpaceTimeField::constant(nx, nt + 1, c);
        let u0 = SpaceField::from_fn(&g, |x| (PI * x).sin());
        let traj = solve_forward(&g, &a, None, None, &u0, TimeSpan::new(0.0, nt)).unwrap();
        let exact = u0.scaled((-(PI * PI + c) * t).exp());
        l2_norm(&traj.terminal().sub(&exact), &g) / l2_norm(&exact, &g)
    }

    #[test]
    fn zero_data_gives_zero() {
        let g = Grid::new(10, 1.0, 8, (0.2, 0.8)).unwrap();
        let a = SpaceTimeField::zeros(10, 9);
        let tr = solve_forward(&g, &a, None, None, &SpaceField::zeros(10), TimeSpan::new(0.0, 8)).unwrap();
        assert_eq!(tr.slices.sup(), 0.0);
        let tr = solve_backward(&g, &a, None, None, &SpaceField::zeros(10), TimeSpan::new(0.0, 8)).unwrap();
        assert_eq!(tr.slices.sup(), 0.0);
    }

    #[test]
    fn sine_decay_and_shifted_decay() {
        assert!(decay_error(100, 200, 0.0) <= 1e-3);
        assert!(decay_error(100, 200, 3.0) <= 1e-3);
    }

    #[test]
    fn second_order_convergence() {
        let coarse = decay_error(49, 50, 0.0);
        let fine = decay_error(99, 100, 0.0);
        let ratio = coarse / fine;
        assert!((3.2..=4.8).contains(&ratio), "ratio {ratio}");
    }

    #[test]
    fn backward_terminal_decay() {
        let nx = 100;
        let nt = 200;
        let t = 0.1;
        let g = Grid::new(nx, t, nt, (0.2, 0.8)).unwrap();
        let a = SpaceTimeField::zeros(nx, nt + 1);
        let wt = SpaceField::from_fn(&g, |x| (PI * x).sin());
        let tr = solve_backward(&g, &a, None, None, &wt, TimeSpan::new(0.0, nt)).unwrap();
        assert_eq!(tr.terminal(), wt);
        let exact = wt.scaled((-PI * PI * t).exp());
        let err = l2_norm(&tr.initial().sub(&exact), &g) / l2_norm(&exact, &g);
        assert!(err <= 1e-3);
    }

    #[test]
    fn backward_is_reflected_forward() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let g = Grid::new(20, 0.5, 30, (0.2, 0.7)).unwrap();
        let slices = 31;
        let mut rand_field = |n| {
            SpaceTimeField::from_values(20, slices, (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect()).unwrap()
        };
        let a = rand_field(20 * slices);
        let s = rand_field(20 * slices);
        let c = rand_field(20 * slices).restrict_to_omega(&g);
        let wt = SpaceField::new((0..20).map(|i| (i as f64).cos()).collect());
        let span = TimeSpan::new(0.0, 30);
        let back = solve_backward(&g, &a, Some(&s), Some(&c), &wt, span).unwrap();
        let fwd = solve_forward(&g, &a.reflect(), Some(&s.reflect()), Some(&c.reflect()), &wt, span).unwrap();
        let scale = fwd.slices.sup();
        assert!(back.slices.max_abs_diff(&fwd.slices.reflect()) <= 1e-13 * scale);
    }

    #[test]
    fn steady_state_with_unit_source() {
        let nx = 99;
        let g = Grid::new(nx, 3.0, 300, (0.2, 0.8)).unwrap();
        let q = SpaceTimeField::zeros(nx, 301);
        let tr = free_evolution(&g, &q, 1.0, &SpaceField::zeros(nx), TimeSpan::new(0.0, 300)).unwrap();
        // −v'' = 1 → v = x(1−x)/2, midpoint 1/8
        let mid = tr.terminal().values()[49];
        assert!((mid - 0.125).abs() < 1e-3, "{mid}");
    }

    #[test]
    fn free_evolution_without_source_is_plain_solve() {
        let g = Grid::new(12, 1.0, 10, (0.2, 0.8)).unwrap();
        let q = SpaceTimeField::from_fn(&g, 11, 0.0, |x, t| x * t);
        let u0 = SpaceField::from_fn(&g, |x| x * (1.0 - x));
        let span = TimeSpan::new(0.0, 10);
        let a = free_evolution(&g, &q, 0.0, &u0, span).unwrap();
        let b = solve_forward(&g, &q, None, None, &u0, span).unwrap();
        assert_eq!(a.slices, b.slices);
    }

    #[test]
    fn positivity_with_nonnegative_potential() {
        let g = Grid::new(40, 1.0, 200, (0.2, 0.8)).unwrap();
        let q = SpaceTimeField::from_fn(&g, 201, 0.0, |x, _| 5.0 * x);
        let u0 = SpaceField::from_fn(&g, |x| (PI * x).sin().powi(4));
        let tr = solve_forward(&g, &q, None, None, &u0, TimeSpan::new(0.0, 200)).unwrap();
        let min = tr.slices.values().iter().cloned().fold(f64::INFINITY, f64::min);
        assert!(min >= -1e-10 * u0.sup(), "min {min}");
    }

    #[test]
    fn instability_guard_trips() {
        let g = Grid::new(10, 1.0, 10, (0.2, 0.8)).unwrap();
        let q = SpaceTimeField::zeros(10, 11);
        let u0 = SpaceField::new(vec![1.0; 10]);
        let err = solve_forward_capped(&g, &q, None, None, &u0, TimeSpan::new(0.0, 10), 1e-3).unwrap_err();
        assert!(matches!(err, Error::InstabilityGuard { slice: 1, .. }));
    }

    #[test]
    fn control_outside_omega_is_rejected() {
        let g = Grid::new(10, 1.0, 4, (0.4, 0.6)).unwrap();
        let q = SpaceTimeField::zeros(10, 5);
        let c = SpaceTimeField::constant(10, 5, 1.0);
        let err = solve_forward(&g, &q, None, Some(&c), &SpaceField::zeros(10), TimeSpan::new(0.0, 4)).unwrap_err();
        assert!(matches!(err, Error::ControlOutsideOmega { .. }));
    }
}
