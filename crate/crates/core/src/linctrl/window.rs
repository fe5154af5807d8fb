use crate::error::{Error, Result};
use crate::heat1d::{CrankNicolson, DEFAULT_BLOWUP_CAP};
use crate::linctrl::{closed_form_e, Constants, ControlMode};
use crate::numerics::{Grid, SpaceField, SpaceTimeField};

/// The control window of length T′ at the end of the horizon, in forward
/// window time τ ∈ (0, T′).
///
/// Window control fields have `steps + 1` slices. Slice 0 (τ = 0, the
/// junction with the free phase) carries no control: the operators below
/// ignore it on input and return zero there, so a control assembled onto the
/// full horizon vanishes at t = T − T′ and the free phase is untouched.
#[derive(Debug, Clone)]
pub struct WindowProblem {
    grid: Grid,
    steps: usize,
    q_w: SpaceTimeField,
    q_sup: f64,
    e_scale: f64,
    constants: Constants,
    mode: ControlMode,
    mask: Vec<f64>,
    cn: CrankNicolson,
}

impl WindowProblem {
    /// Window whose potential is `q_w` (steps + 1 slices on the grid's dt).
    pub fn new(grid: Grid, q_w: SpaceTimeField, e_scale: f64, constants: Constants, mode: ControlMode) -> Result<Self> {
        let q_sup = q_w.sup();
        Self::build(grid, q_w, q_sup, e_scale, constants, mode)
    }

    /// Window over the last T′ of the horizon for the full-horizon potential
    /// `q`. T′ is snapped to the time grid. In closed-form mode the scaling
    /// E is computed from ‖q‖_∞ and the configured c₂; in adaptive mode E = 1.
    pub fn from_horizon(
        grid: &Grid,
        q: &SpaceTimeField,
        t_prime: f64,
        constants: Constants,
        mode: ControlMode,
    ) -> Result<Self> {
        if q.slices() != grid.nt() + 1 {
            return Err(Error::DimensionMismatch {
                what: "horizon potential slices",
                expected: grid.nt() + 1,
                got: q.slices(),
            });
        }
        let steps = grid.steps_for(t_prime);
        let nt = grid.nt();
        let q_w = q.window(nt - steps, nt);
        let q_sup = q.sup();
        let t_snapped = steps as f64 * grid.dt();
        let e_scale = match mode {
            ControlMode::Adaptive => 1.0,
            ControlMode::ClosedForm => closed_form_e(&constants, t_snapped, q_sup),
        };
        Self::build(grid.clone(), q_w, q_sup, e_scale, constants, mode)
    }

    fn build(
        grid: Grid,
        q_w: SpaceTimeField,
        q_sup: f64,
        e_scale: f64,
        constants: Constants,
        mode: ControlMode,
    ) -> Result<Self> {
        if !(e_scale >= 1.0 && e_scale.is_finite()) {
            return Err(Error::Validation(vec![format!("E must be finite and >= 1, got {e_scale}")]));
        }
        if q_w.slices() < 2 {
            return Err(Error::Validation(vec!["window needs at least one time step".into()]));
        }
        let steps = q_w.steps();
        if steps > grid.nt() {
            return Err(Error::Validation(vec![format!(
                "window of {steps} steps exceeds the horizon of {} steps",
                grid.nt()
            )]));
        }
        let cn = CrankNicolson::new(&grid, &q_w)?;
        let mask = grid.omega_mask();
        Ok(WindowProblem {
            grid,
            steps,
            q_w,
            q_sup,
            e_scale,
            constants,
            mode,
            mask,
            cn,
        })
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn slices(&self) -> usize {
        self.steps + 1
    }

    pub fn t_prime(&self) -> f64 {
        self.steps as f64 * self.grid.dt()
    }

    pub fn potential(&self) -> &SpaceTimeField {
        &self.q_w
    }

    /// ‖q‖_∞ of the potential the window was built from.
    pub fn q_sup(&self) -> f64 {
        self.q_sup
    }

    pub fn e_scale(&self) -> f64 {
        self.e_scale
    }

    pub fn constants(&self) -> &Constants {
        &self.constants
    }

    pub fn mode(&self) -> ControlMode {
        self.mode
    }

    /// Same window with a different scaling E.
    pub fn with_e_scale(&self, e_scale: f64) -> Result<Self> {
        Self::build(
            self.grid.clone(),
            self.q_w.clone(),
            self.q_sup,
            e_scale,
            self.constants.clone(),
            self.mode,
        )
    }

    fn check_control(&self, theta: &SpaceTimeField) -> Result<()> {
        if theta.slices() != self.slices() || theta.nx() != self.grid.nx() {
            return Err(Error::DimensionMismatch {
                what: "window control slices",
                expected: self.slices(),
                got: theta.slices(),
            });
        }
        Ok(())
    }

    /// Terminal state of the window system from `v0` driven by the physical
    /// forcing `scale·1_ω·theta` (slice 0 ignored) plus an optional constant
    /// source.
    pub(crate) fn terminal_state(
        &self,
        v0: &[f64],
        theta: Option<(&SpaceTimeField, f64)>,
        source: f64,
    ) -> Result<SpaceField> {
        let cn = &self.cn;
        let half_dt = 0.5 * cn.dt();
        let mut v = v0.to_vec();
        for k in 0..self.steps {
            let mut rhs = cn.explicit_apply(k, &v);
            if source != 0.0 {
                for r in rhs.iter_mut() {
                    *r += cn.dt() * source;
                }
            }
            if let Some((theta, scale)) = theta {
                let hs = half_dt * scale;
                let next = theta.slice(k + 1);
                if k == 0 {
                    for ((r, m), b) in rhs.iter_mut().zip(&self.mask).zip(next) {
                        *r += hs * (m * b);
                    }
                } else {
                    let cur = theta.slice(k);
                    for (((r, m), a), b) in rhs.iter_mut().zip(&self.mask).zip(cur).zip(next) {
                        *r += hs * (m * a + m * b);
                    }
                }
            }
            cn.implicit_solve(k + 1, &mut rhs);
            let sup = rhs.iter().fold(0.0f64, |m, x| m.max(x.abs()));
            if !(sup <= DEFAULT_BLOWUP_CAP) {
                return Err(Error::InstabilityGuard {
                    slice: k + 1,
                    sup,
                    cap: DEFAULT_BLOWUP_CAP,
                });
            }
            v = rhs;
        }
        Ok(SpaceField::new(v))
    }

    /// Control-to-state map with scale `scale` in place of E.
    pub(crate) fn forward_map(&self, theta: &SpaceTimeField, scale: f64) -> Result<SpaceField> {
        self.check_control(theta)?;
        let zeros = vec![0.0; self.grid.nx()];
        self.terminal_state(&zeros, Some((theta, scale)), 0.0)
    }

    /// Exact transpose of `forward_map` with respect to l2_inner on the state
    /// side and st_inner on the control side.
    pub(crate) fn adjoint_map(&self, phi: &SpaceField, scale: f64) -> Result<SpaceTimeField> {
        let nx = self.grid.nx();
        if phi.len() != nx {
            return Err(Error::DimensionMismatch {
                what: "adjoint terminal data",
                expected: nx,
                got: phi.len(),
            });
        }
        let cn = &self.cn;
        let steps = self.steps;
        let mut out = SpaceTimeField::zeros(nx, steps + 1);
        // r_{K-1} = P_K φ ; r_{j-1} = P_j M⁻_j r_j
        let mut r = phi.values().to_vec();
        cn.implicit_solve(steps, &mut r);
        for (o, (m, v)) in out.slice_mut(steps).iter_mut().zip(self.mask.iter().zip(&r)) {
            *o = scale * (m * v);
        }
        for j in (1..steps).rev() {
            let mut prev = cn.explicit_apply(j, &r);
            cn.implicit_solve(j, &mut prev);
            let half = 0.5 * scale;
            for (o, ((m, a), b)) in out
                .slice_mut(j)
                .iter_mut()
                .zip(self.mask.iter().zip(&prev).zip(&r))
            {
                *o = half * (m * (a + b));
            }
            r = prev;
        }
        Ok(out.restrict_to_omega(&self.grid))
    }
}

/// C θ: terminal value v(·,T′) of ∂_τ v − ∂_xx v + q_w v = E·θ·1_ω, v(·,0) = 0.
pub fn apply_c(theta: &SpaceTimeField, wp: &WindowProblem) -> Result<SpaceField> {
    wp.forward_map(theta, wp.e_scale)
}

/// C* φ, the discrete transpose of [`apply_c`]; ω-supported, zero at τ = 0.
pub fn apply_cstar(phi: &SpaceField, wp: &WindowProblem) -> Result<SpaceTimeField> {
    wp.adjoint_map(phi, wp.e_scale)
}

/// S(λ): terminal value of the window system with constant source λ, zero
/// initial data and no control.
pub fn source_response_s(lambda: f64, wp: &WindowProblem) -> Result<SpaceField> {
    let nx = wp.grid.nx();
    if lambda == 0.0 {
        return Ok(SpaceField::zeros(nx));
    }
    wp.terminal_state(&vec![0.0; nx], None, lambda)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::heat1d::{solve_backward, solve_forward, TimeSpan};
    use crate::numerics::{l2_inner, l2_norm, st_inner};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn window(nx: usize, nt: usize, t_prime: f64, q: impl Fn(f64, f64) -> f64) -> WindowProblem {
        let g = Grid::new(nx, t_prime, nt, (0.3, 0.8)).unwrap();
        let q_w = SpaceTimeField::from_fn(&g, nt + 1, 0.0, q);
        WindowProblem::new(g, q_w, 1.0, Constants::default(), ControlMode::Adaptive).unwrap()
    }

    fn random_control(wp: &WindowProblem, rng: &mut ChaCha8Rng) -> SpaceTimeField {
        let nx = wp.grid().nx();
        let vals = (0..nx * wp.slices()).map(|_| rng.gen_range(-1.0..1.0)).collect();
        SpaceTimeField::from_values(nx, wp.slices(), vals)
            .unwrap()
            .restrict_to_omega(wp.grid())
    }

    #[test]
    fn zero_in_zero_out() {
        let wp = window(20, 10, 0.5, |x, _| x);
        let z = apply_c(&SpaceTimeField::zeros(20, 11), &wp).unwrap();
        assert_eq!(z.sup(), 0.0);
        assert_eq!(apply_cstar(&SpaceField::zeros(20), &wp).unwrap().sup(), 0.0);
        assert_eq!(source_response_s(0.0, &wp).unwrap().sup(), 0.0);
    }

    #[test]
    fn adjoint_identity_holds() {
        let wp = window(30, 40, 0.5, |x, t| 1.0 + x - t);
        let g = wp.grid().clone();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..20 {
            let theta = random_control(&wp, &mut rng);
            let phi = SpaceField::new((0..30).map(|_| rng.gen_range(-1.0..1.0)).collect());
            let lhs = l2_inner(&apply_c(&theta, &wp).unwrap(), &phi, &g);
            let rhs = st_inner(&theta, &apply_cstar(&phi, &wp).unwrap(), &g);
            let scale = crate::numerics::st_norm(&theta, &g) * l2_norm(&phi, &g);
            assert!((lhs - rhs).abs() <= 1e-10 * scale, "{lhs} vs {rhs}");
        }
    }

    #[test]
    fn e_scaling_is_exact() {
        let wp = window(16, 12, 0.5, |x, _| x);
        let wp2 = wp.with_e_scale(2.0).unwrap();
        let phi = SpaceField::new((0..16).map(|i| (i as f64 * 0.7).sin()).collect());
        let a = apply_cstar(&phi, &wp).unwrap();
        let b = apply_cstar(&phi, &wp2).unwrap();
        assert_eq!(a.scaled(2.0), b);
    }

    #[test]
    fn matches_generic_solver() {
        let wp = window(25, 30, 0.4, |x, t| x * t);
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let mut theta = random_control(&wp, &mut rng);
        theta.slice_mut(0).fill(0.0);
        let g = wp.grid().clone();
        let direct = solve_forward(&g, wp.potential(), None, Some(&theta), &SpaceField::zeros(25), TimeSpan::new(0.0, 30))
            .unwrap()
            .terminal();
        let via_c = apply_c(&theta, &wp).unwrap();
        assert!(direct.sub(&via_c).sup() <= 1e-14 * direct.sup().max(1.0));

        // Backward formulation with the reflected potential gives the same map.
        let back = solve_backward(
            &g,
            &wp.potential().reflect(),
            None,
            Some(&theta.reflect()),
            &SpaceField::zeros(25),
            TimeSpan::new(0.0, 30),
        )
        .unwrap()
        .initial();
        assert!(back.sub(&via_c).sup() <= 1e-12 * via_c.sup().max(1e-300));
    }

    #[test]
    fn source_response_is_linear() {
        let wp = window(20, 20, 0.5, |x, _| 2.0 * x);
        let s1 = source_response_s(1.0, &wp).unwrap();
        let s2 = source_response_s(2.0, &wp).unwrap();
        assert_eq!(s1.scaled(2.0), s2);
    }
}
