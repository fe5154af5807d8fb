use crate::error::{Error, Result};

const PIVOT_FLOOR: f64 = 1e-300;

/// Solves the tridiagonal system with sub-diagonal `lower` (length n-1),
/// diagonal `diag` (length n) and super-diagonal `upper` (length n-1).
pub fn solve_tridiagonal(lower: &[f64], diag: &[f64], upper: &[f64], rhs: &[f64]) -> Result<Vec<f64>> {
    let factor = TridiagFactor::new(lower, diag, upper)?;
    let mut x = rhs.to_vec();
    factor.solve_in_place(&mut x);
    Ok(x)
}

/// Thomas elimination stored once and reused for many right-hand sides.
#[derive(Debug, Clone)]
pub struct TridiagFactor {
    lower: Vec<f64>,
    // Reciprocals of the eliminated pivots.
    inv_pivot: Vec<f64>,
    // Modified super-diagonal c'_i = c_i / pivot_i.
    upper_mod: Vec<f64>,
}

impl TridiagFactor {
    pub fn new(lower: &[f64], diag: &[f64], upper: &[f64]) -> Result<Self> {
        let n = diag.len();
        if n == 0 {
            return Err(Error::DimensionMismatch {
                what: "tridiagonal diagonal",
                expected: 1,
                got: 0,
            });
        }
        for (what, v) in [("tridiagonal lower", lower), ("tridiagonal upper", upper)] {
            if v.len() != n - 1 {
                return Err(Error::DimensionMismatch {
                    what,
                    expected: n - 1,
                    got: v.len(),
                });
            }
        }
        let mut inv_pivot = vec![0.0; n];
        let mut upper_mod = vec![0.0; n.saturating_sub(1)];
        let mut prev_c = 0.0;
        for i in 0..n {
            let pivot = if i == 0 { diag[0] } else { diag[i] - lower[i - 1] * prev_c };
            if !(pivot.abs() >= PIVOT_FLOOR) {
                return Err(Error::ZeroPivot { row: i, pivot });
            }
            inv_pivot[i] = 1.0 / pivot;
            if i + 1 < n {
                prev_c = upper[i] * inv_pivot[i];
                upper_mod[i] = prev_c;
            }
        }
        Ok(TridiagFactor {
            lower: lower.to_vec(),
            inv_pivot,
            upper_mod,
        })
    }

    pub fn len(&self) -> usize {
        self.inv_pivot.len()
    }

    pub fn is_empty(&self) -> bool {
        self.inv_pivot.is_empty()
    }

    pub fn solve_in_place(&self, x: &mut [f64]) {
        let n = self.len();
        debug_assert_eq!(x.len(), n);
        x[0] *= self.inv_pivot[0];
        for i in 1..n {
            x[i] = (x[i] - self.lower[i - 1] * x[i - 1]) * self.inv_pivot[i];
        }
        for i in (0..n - 1).rev() {
            x[i] -= self.upper_mod[i] * x[i + 1];
        }
    }
}
