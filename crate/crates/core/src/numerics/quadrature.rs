//! Grid quadrature: rectangle rule in space (weight dx on interior nodes),
//! trapezoid rule in time.

use crate::numerics::{Grid, SpaceField, SpaceTimeField};

pub fn l2_inner(u: &SpaceField, v: &SpaceField, grid: &Grid) -> f64 {
    assert_eq!(u.len(), v.len(), "l2_inner length mismatch");
    let s: f64 = u.values().iter().zip(v.values()).map(|(a, b)| a * b).sum();
    s * grid.dx()
}

pub fn l2_norm(u: &SpaceField, grid: &Grid) -> f64 {
    l2_inner(u, u, grid).sqrt()
}

pub fn sup_norm(u: &SpaceField) -> f64 {
    u.sup()
}

/// Forward-difference H¹₀ seminorm with ghost zeros at x = 0 and x = 1.
pub fn h1_norm(u: &SpaceField, grid: &Grid) -> f64 {
    let dx = grid.dx();
    let v = u.values();
    let n = v.len();
    let mut s = 0.0;
    for i in 0..=n {
        let left = if i == 0 { 0.0 } else { v[i - 1] };
        let right = if i == n { 0.0 } else { v[i] };
        let d = (right - left) / dx;
        s += d * d;
    }
    (s * dx).sqrt()
}

/// Trapezoid weight of level `k` among `slices` levels.
pub fn time_weight(k: usize, slices: usize, dt: f64) -> f64 {
    if k == 0 || k + 1 == slices {
        0.5 * dt
    } else {
        dt
    }
}

/// L²(ω × window) inner product: Σ_k w_k Σ_i m_i p_ik q_ik dx.
pub fn st_inner(p: &SpaceTimeField, q: &SpaceTimeField, grid: &Grid) -> f64 {
    assert_eq!(p.slices(), q.slices(), "st_inner slice mismatch");
    assert_eq!(p.nx(), q.nx(), "st_inner nx mismatch");
    let mask = grid.omega_mask();
    let dt = grid.dt();
    let slices = p.slices();
    let mut total = 0.0;
    for k in 0..slices {
        let s: f64 = p
            .slice(k)
            .iter()
            .zip(q.slice(k))
            .zip(&mask)
            .map(|((a, b), m)| m * a * b)
            .sum();
        total += time_weight(k, slices, dt) * s;
    }
    total * grid.dx()
}

pub fn st_norm(p: &SpaceTimeField, grid: &Grid) -> f64 {
    st_inner(p, p, grid).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn zero_field_norms() {
        let g = Grid::new(10, 1.0, 4, (0.2, 0.8)).unwrap();
        let z = SpaceField::zeros(10);
        assert_eq!(l2_norm(&z, &g), 0.0);
        assert_eq!(sup_norm(&z), 0.0);
        assert_eq!(h1_norm(&z, &g), 0.0);
    }

    #[test]
    fn sine_norms_against_integrals() {
        let g = Grid::new(199, 1.0, 4, (0.2, 0.8)).unwrap();
        let u = SpaceField::from_fn(&g, |x| (PI * x).sin());
        // ∫ sin² = 1/2, ∫ π² cos² = π²/2
        assert!((l2_norm(&u, &g).powi(2) - 0.5).abs() < 1e-3);
        let h1 = h1_norm(&u, &g).powi(2);
        assert!((h1 - PI * PI / 2.0).abs() < 0.01 * PI * PI / 2.0);
    }

    #[test]
    fn norm_matches_inner() {
        let g = Grid::new(37, 1.0, 4, (0.2, 0.8)).unwrap();
        let u = SpaceField::from_fn(&g, |x| x.exp() * (3.0 * x).cos());
        assert_eq!(l2_norm(&u, &g), l2_inner(&u, &u, &g).sqrt());
        let sq = l2_norm(&u, &g).powi(2);
        assert!((sq - l2_inner(&u, &u, &g)).abs() <= 4.0 * f64::EPSILON * sq);
    }

    #[test]
    fn st_inner_area_of_window() {
        let g = Grid::new(99, 1.0, 50, (0.25, 0.75)).unwrap();
        let one = SpaceTimeField::constant(99, 51, 1.0);
        assert!((st_inner(&one, &one, &g) - 0.5).abs() <= 2.0 * g.dx());
        let zero = SpaceTimeField::zeros(99, 51);
        assert_eq!(st_inner(&zero, &one, &g), 0.0);
    }
}
