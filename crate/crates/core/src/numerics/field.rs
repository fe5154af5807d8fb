use crate::error::{Error, Result};
use crate::numerics::Grid;

/// A function on the interior nodes of the grid. Boundary values are zero.
#[derive(Debug, Clone, PartialEq)]
pub struct SpaceField(Vec<f64>);

impl SpaceField {
    pub fn new(values: Vec<f64>) -> Self {
        SpaceField(values)
    }

    pub fn zeros(nx: usize) -> Self {
        SpaceField(vec![0.0; nx])
    }

    pub fn from_fn(grid: &Grid, f: impl Fn(f64) -> f64) -> Self {
        SpaceField(grid.nodes().into_iter().map(f).collect())
    }

    /// Nodal basis vector: one at node `j`, zero elsewhere.
    pub fn unit(nx: usize, j: usize) -> Self {
        let mut v = vec![0.0; nx];
        v[j] = 1.0;
        SpaceField(v)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.0
    }

    pub fn into_values(self) -> Vec<f64> {
        self.0
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|v| v.is_finite())
    }

    pub fn scaled(&self, s: f64) -> SpaceField {
        SpaceField(self.0.iter().map(|v| s * v).collect())
    }

    /// self += s * other
    pub fn axpy(&mut self, s: f64, other: &SpaceField) {
        for (a, b) in self.0.iter_mut().zip(&other.0) {
            *a += s * b;
        }
    }

    pub fn add(&self, other: &SpaceField) -> SpaceField {
        SpaceField(self.0.iter().zip(&other.0).map(|(a, b)| a + b).collect())
    }

    pub fn sub(&self, other: &SpaceField) -> SpaceField {
        SpaceField(self.0.iter().zip(&other.0).map(|(a, b)| a - b).collect())
    }

    pub fn sup(&self) -> f64 {
        self.0.iter().fold(0.0, |m, v| m.max(v.abs()))
    }
}

/// A function on interior nodes x time levels, stored slice by slice
/// (index `k * nx + i`). Slice `k` sits at `t0 + k·dt` of whatever interval
/// the field is attached to.
#[derive(Debug, Clone, PartialEq)]
pub struct SpaceTimeField {
    nx: usize,
    slices: usize,
    values: Vec<f64>,
    omega_supported: bool,
}

impl SpaceTimeField {
    pub fn zeros(nx: usize, slices: usize) -> Self {
        SpaceTimeField {
            nx,
            slices,
            values: vec![0.0; nx * slices],
            omega_supported: false,
        }
    }

    pub fn constant(nx: usize, slices: usize, value: f64) -> Self {
        SpaceTimeField {
            nx,
            slices,
            values: vec![value; nx * slices],
            omega_supported: false,
        }
    }

    pub fn from_values(nx: usize, slices: usize, values: Vec<f64>) -> Result<Self> {
        if values.len() != nx * slices {
            return Err(Error::DimensionMismatch {
                what: "space-time values",
                expected: nx * slices,
                got: values.len(),
            });
        }
        Ok(SpaceTimeField {
            nx,
            slices,
            values,
            omega_supported: false,
        })
    }

    /// Samples `f(x, t)` at the grid nodes for `slices` levels starting at `t0`.
    pub fn from_fn(grid: &Grid, slices: usize, t0: f64, f: impl Fn(f64, f64) -> f64) -> Self {
        let nx = grid.nx();
        let dt = grid.dt();
        let mut values = Vec::with_capacity(nx * slices);
        for k in 0..slices {
            let t = t0 + k as f64 * dt;
            values.extend((0..nx).map(|i| f(grid.x(i), t)));
        }
        SpaceTimeField {
            nx,
            slices,
            values,
            omega_supported: false,
        }
    }

    pub fn from_slices(nx: usize, slices: Vec<SpaceField>) -> Result<Self> {
        let count = slices.len();
        let mut values = Vec::with_capacity(nx * count);
        for s in slices {
            if s.len() != nx {
                return Err(Error::DimensionMismatch {
                    what: "space slice",
                    expected: nx,
                    got: s.len(),
                });
            }
            values.extend(s.into_values());
        }
        Ok(SpaceTimeField {
            nx,
            slices: count,
            values,
            omega_supported: false,
        })
    }

    pub fn nx(&self) -> usize {
        self.nx
    }

    /// Number of time levels (steps + 1).
    pub fn slices(&self) -> usize {
        self.slices
    }

    pub fn steps(&self) -> usize {
        self.slices.saturating_sub(1)
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn slice(&self, k: usize) -> &[f64] {
        &self.values[k * self.nx..(k + 1) * self.nx]
    }

    pub fn slice_mut(&mut self, k: usize) -> &mut [f64] {
        &mut self.values[k * self.nx..(k + 1) * self.nx]
    }

    pub fn slice_field(&self, k: usize) -> SpaceField {
        SpaceField::new(self.slice(k).to_vec())
    }

    pub fn last_slice(&self) -> SpaceField {
        self.slice_field(self.slices - 1)
    }

    pub fn get(&self, i: usize, k: usize) -> f64 {
        self.values[k * self.nx + i]
    }

    pub fn set(&mut self, i: usize, k: usize, v: f64) {
        self.values[k * self.nx + i] = v;
    }

    pub fn is_omega_supported(&self) -> bool {
        self.omega_supported
    }

    /// Zeroes every node outside ω and marks the field as ω-supported.
    pub fn restrict_to_omega(mut self, grid: &Grid) -> Self {
        let mask = grid.omega_mask();
        for k in 0..self.slices {
            for (v, m) in self.slice_mut(k).iter_mut().zip(&mask) {
                *v *= m;
            }
        }
        self.omega_supported = true;
        self
    }

    /// Marks the field as ω-supported after checking that it is.
    pub fn assert_omega_support(mut self, grid: &Grid) -> Result<Self> {
        check_omega_support(&self, grid)?;
        self.omega_supported = true;
        Ok(self)
    }

    /// Copies levels `k0..=k1` into a new field.
    pub fn window(&self, k0: usize, k1: usize) -> SpaceTimeField {
        assert!(k0 <= k1 && k1 < self.slices, "window {k0}..={k1} out of range");
        SpaceTimeField {
            nx: self.nx,
            slices: k1 - k0 + 1,
            values: self.values[k0 * self.nx..(k1 + 1) * self.nx].to_vec(),
            omega_supported: self.omega_supported,
        }
    }

    /// Time reversal: slice k becomes slice (slices - 1 - k).
    pub fn reflect(&self) -> SpaceTimeField {
        let mut values = Vec::with_capacity(self.values.len());
        for k in (0..self.slices).rev() {
            values.extend_from_slice(self.slice(k));
        }
        SpaceTimeField {
            nx: self.nx,
            slices: self.slices,
            values,
            omega_supported: self.omega_supported,
        }
    }

    pub fn scaled(&self, s: f64) -> SpaceTimeField {
        SpaceTimeField {
            nx: self.nx,
            slices: self.slices,
            values: self.values.iter().map(|v| s * v).collect(),
            omega_supported: self.omega_supported,
        }
    }

    /// self += s * other
    pub fn axpy(&mut self, s: f64, other: &SpaceTimeField) {
        debug_assert_eq!(self.values.len(), other.values.len());
        for (a, b) in self.values.iter_mut().zip(&other.values) {
            *a += s * b;
        }
        self.omega_supported &= other.omega_supported;
    }

    pub fn add(&self, other: &SpaceTimeField) -> SpaceTimeField {
        let mut out = self.clone();
        out.axpy(1.0, other);
        out
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> SpaceTimeField {
        SpaceTimeField {
            nx: self.nx,
            slices: self.slices,
            values: self.values.iter().map(|&v| f(v)).collect(),
            omega_supported: false,
        }
    }

    pub fn sup(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    pub fn max_abs_diff(&self, other: &SpaceTimeField) -> f64 {
        self.values
            .iter()
            .zip(&other.values)
            .fold(0.0, |m, (a, b)| m.max((a - b).abs()))
    }
}

pub(crate) fn check_omega_support(field: &SpaceTimeField, grid: &Grid) -> Result<()> {
    for k in 0..field.slices() {
        for (i, &v) in field.slice(k).iter().enumerate() {
            if v != 0.0 && !grid.in_omega(i) {
                return Err(Error::ControlOutsideOmega { node: i, slice: k });
            }
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reflect_is_involution() {
        let g = Grid::new(5, 1.0, 4, (0.2, 0.8)).unwrap();
        let f = SpaceTimeField::from_fn(&g, 5, 0.0, |x, t| x + 10.0 * t);
        assert_eq!(f.reflect().reflect(), f);
        assert_eq!(f.reflect().slice(0), f.slice(4));
    }

    #[test]
    fn restriction_zeroes_outside_omega() {
        let g = Grid::new(9, 1.0, 4, (0.3, 0.6)).unwrap();
        let f = SpaceTimeField::constant(9, 3, 1.0).restrict_to_omega(&g);
        assert!(f.is_omega_supported());
        assert!(check_omega_support(&f, &g).is_ok());
        let bad = SpaceTimeField::constant(9, 3, 1.0);
        assert!(matches!(
            bad.assert_omega_support(&g),
            Err(Error::ControlOutsideOmega { node: 0, slice: 0 })
        ));
    }

    #[test]
    fn window_copies_levels() {
        let g = Grid::new(4, 1.0, 4, (0.2, 0.8)).unwrap();
        let f = SpaceTimeField::from_fn(&g, 5, 0.0, |_, t| t);
        let w = f.window(2, 4);
        assert_eq!(w.slices(), 3);
        assert_eq!(w.get(0, 0), 0.5);
        assert_eq!(w.get(3, 2), 1.0);
    }
}
