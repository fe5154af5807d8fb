use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::cost_lab::fit::{fit_cost_curve, FitModel};
use crate::cost_lab::sweep::SweepRow;
use crate::error::Result;
use crate::heat1d::{solve_forward, TimeSpan};
use crate::linctrl::{
    apply_c, apply_cstar, approx_control_l, assemble_b, gramian_basis, null_control, Constants, ControlMode,
    NullControlOptions, WindowProblem,
};
use crate::numerics::{l2_inner, l2_norm, st_inner, st_norm, Grid, SpaceField, SpaceTimeField};
use crate::semictrl::{semilinear_residual, Nonlinearity};

#[derive(Debug, Clone)]
pub struct Check {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

fn check(name: &'static str, run: impl FnOnce() -> Result<(bool, String)>) -> Check {
    match run() {
        Ok((passed, detail)) => Check { name, passed, detail },
        Err(e) => Check {
            name,
            passed: false,
            detail: format!("error: {e}"),
        },
    }
}

fn seeded_window(nx: usize, nt: usize, t_prime: f64, omega: (f64, f64)) -> Result<WindowProblem> {
    let g = Grid::new(nx, t_prime, nt, omega)?;
    let q = SpaceTimeField::from_fn(&g, nt + 1, 0.0, |x, _| 1.0 + x);
    WindowProblem::new(g, q, 1.0, Constants::default(), ControlMode::Adaptive)
}

/// Small seeded versions of the solver, adjoint, Gramian, steering,
/// null-control, residual and fitting invariants.
pub fn run_selftest() -> Vec<Check> {
    vec![
        check("sine decay", || {
            let g = Grid::new(50, 0.1, 100, (0.3, 0.8))?;
            let u0 = SpaceField::from_fn(&g, |x| (PI * x).sin());
            let a = SpaceTimeField::zeros(50, 101);
            let u = solve_forward(&g, &a, None, None, &u0, TimeSpan::new(0.0, 100))?.terminal();
            let exact = u0.scaled((-PI * PI * 0.1).exp());
            let rel = l2_norm(&u.sub(&exact), &g) / l2_norm(&exact, &g);
            Ok((rel <= 1e-3, format!("relative error {rel:.3e}")))
        }),
        check("adjoint identity", || {
            let wp = seeded_window(30, 40, 0.5, (0.3, 0.8))?;
            let g = wp.grid().clone();
            let mut rng = ChaCha8Rng::seed_from_u64(11);
            let mut worst = 0.0f64;
            for _ in 0..20 {
                let vals = (0..30 * 41).map(|_| rng.gen_range(-1.0..1.0)).collect();
                let theta = SpaceTimeField::from_values(30, 41, vals)?.restrict_to_omega(&g);
                let phi = SpaceField::new((0..30).map(|_| rng.gen_range(-1.0..1.0)).collect());
                let lhs = l2_inner(&apply_c(&theta, &wp)?, &phi, &g);
                let rhs = st_inner(&theta, &apply_cstar(&phi, &wp)?, &g);
                worst = worst.max((lhs - rhs).abs() / (st_norm(&theta, &g) * l2_norm(&phi, &g)));
            }
            Ok((worst <= 1e-10, format!("worst relative gap {worst:.3e}")))
        }),
        check("gramian symmetry", || {
            let wp = seeded_window(30, 40, 0.5, (0.3, 0.8))?;
            let b = assemble_b(&wp)?;
            Ok((b.asymmetry <= 1e-9, format!("asymmetry {:.3e}", b.asymmetry)))
        }),
        check("filtered steering", || {
            let wp = seeded_window(30, 40, 0.5, (0.3, 0.8))?;
            let g = wp.grid().clone();
            let basis = gramian_basis(&wp)?;
            let z = SpaceField::from_fn(&g, |x| (7.0 * x).sin() + x);
            let mut worst = 0.0f64;
            for n in 1..=basis.n_max {
                let fc = approx_control_l(&z, n, &basis, &wp)?;
                let reached = apply_c(&fc.ell.scaled(1.0 / wp.e_scale()), &wp)?;
                worst = worst.max(l2_norm(&reached.sub(&fc.z_proj), &g) / l2_norm(&z, &g));
            }
            Ok((worst <= 1e-6, format!("worst relative miss {worst:.3e}")))
        }),
        check("null control", || {
            let g = Grid::new(40, 0.5, 50, (0.2, 0.9))?;
            let wp = WindowProblem::new(g.clone(), SpaceTimeField::zeros(40, 51), 1.0, Constants::default(), ControlMode::Adaptive)?;
            let pi0 = SpaceField::from_fn(&g, |x| (PI * x).sin());
            let nc = null_control(&pi0, &wp, &NullControlOptions::new(1e-3, 1e-8))?;
            let rel = nc.residual / l2_norm(&pi0, &g);
            Ok((rel <= 1e-3, format!("relative residual {rel:.3e}")))
        }),
        check("semilinear residual", || {
            let g = Grid::new(30, 0.5, 40, (0.3, 0.8))?;
            let u0 = SpaceField::from_fn(&g, |x| (PI * x).sin());
            let h = SpaceTimeField::from_fn(&g, 41, 0.0, |x, t| (3.0 * x + t).cos()).restrict_to_omega(&g);
            let a = SpaceTimeField::zeros(30, 41);
            let u = solve_forward(&g, &a, None, Some(&h), &u0, TimeSpan::new(0.0, 40))?.slices;
            let r = semilinear_residual(&u, &h, &Nonlinearity::zero(), &g)?;
            Ok((r <= 1e-10, format!("residual {r:.3e}")))
        }),
        check("cost fitter", || {
            let rows: Vec<SweepRow> = [0.35, 0.4, 0.5, 0.6, 0.8, 1.0]
                .iter()
                .map(|&e| SweepRow {
                    epsilon: e,
                    t_prime: 1.0,
                    n_used: 1,
                    cost_l2: (2.0f64 / e).exp().exp(),
                    err_l2: 0.0,
                    u_sup: 0.0,
                    picard_iters_total: 0,
                    converged: true,
                    runtime_s: 0.0,
                })
                .collect();
            let r = fit_cost_curve(&rows)?;
            let slope = r.fit(FitModel::DoubleExp).slope;
            Ok((
                r.selected == FitModel::DoubleExp && (slope / 2.0 - 1.0).abs() < 0.05,
                format!("selected {}, slope {slope:.4}", r.selected.name()),
            ))
        }),
    ]
}
