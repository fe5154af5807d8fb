use crate::error::{Error, Result};

/// Uniform space-time grid on (0,1) x (0,T) with a control region
/// ω = (omega_lo, omega_hi).
///
/// Interior nodes are x_i = (i+1)·dx for the zero-based index i = 0..nx,
/// with dx = 1/(nx+1). Dirichlet zeros at x = 0 and x = 1 are implied.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid {
    nx: usize,
    t_final: f64,
    nt: usize,
    omega_lo: f64,
    omega_hi: f64,
}

impl Grid {
    pub fn new(nx: usize, t_final: f64, nt: usize, omega: (f64, f64)) -> Result<Self> {
        let (omega_lo, omega_hi) = omega;
        let mut problems = Vec::new();
        if nx < 3 {
            problems.push(format!("nx must be >= 3, got {nx}"));
        }
        if nt < 2 {
            problems.push(format!("nt must be >= 2, got {nt}"));
        }
        if !(t_final.is_finite() && t_final > 0.0) {
            problems.push(format!("T must be positive and finite, got {t_final}"));
        }
        if !(0.0 <= omega_lo && omega_lo < omega_hi && omega_hi <= 1.0) {
            problems.push(format!(
                "omega must satisfy 0 <= lo < hi <= 1, got ({omega_lo}, {omega_hi})"
            ));
        }
        if !problems.is_empty() {
            return Err(Error::InvalidGrid(problems.join("; ")));
        }
        let grid = Grid {
            nx,
            t_final,
            nt,
            omega_lo,
            omega_hi,
        };
        if grid.omega_count() == 0 {
            return Err(Error::InvalidGrid(format!(
                "omega ({omega_lo}, {omega_hi}) contains no interior node at nx = {nx}"
            )));
        }
        Ok(grid)
    }

    pub fn nx(&self) -> usize {
        self.nx
    }

    pub fn nt(&self) -> usize {
        self.nt
    }

    pub fn t_final(&self) -> f64 {
        self.t_final
    }

    pub fn omega(&self) -> (f64, f64) {
        (self.omega_lo, self.omega_hi)
    }

    pub fn dx(&self) -> f64 {
        1.0 / (self.nx + 1) as f64
    }

    pub fn dt(&self) -> f64 {
        self.t_final / self.nt as f64
    }

    /// Coordinate of the interior node with zero-based index `i`.
    pub fn x(&self, i: usize) -> f64 {
        (i + 1) as f64 * self.dx()
    }

    pub fn nodes(&self) -> Vec<f64> {
        (0..self.nx).map(|i| self.x(i)).collect()
    }

    pub fn in_omega(&self, i: usize) -> bool {
        let x = self.x(i);
        self.omega_lo < x && x < self.omega_hi
    }

    /// Indicator of ω on the interior nodes (1.0 inside, 0.0 outside).
    pub fn omega_mask(&self) -> Vec<f64> {
        (0..self.nx)
            .map(|i| if self.in_omega(i) { 1.0 } else { 0.0 })
            .collect()
    }

    pub fn omega_count(&self) -> usize {
        (0..self.nx).filter(|&i| self.in_omega(i)).count()
    }

    /// Number of time steps used to represent a window of length `duration`.
    /// Window lengths are snapped to the time grid so that window solves and
    /// full-horizon solves share time levels; the result lies in [1, nt].
    pub fn steps_for(&self, duration: f64) -> usize {
        let raw = (duration / self.dt()).round();
        if !raw.is_finite() || raw < 1.0 {
            1
        } else {
            (raw as usize).min(self.nt)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_bad_inputs() {
        assert!(Grid::new(2, 1.0, 10, (0.2, 0.8)).is_err());
        assert!(Grid::new(10, 1.0, 1, (0.2, 0.8)).is_err());
        assert!(Grid::new(10, 0.0, 10, (0.2, 0.8)).is_err());
        assert!(Grid::new(10, 1.0, 10, (0.8, 0.2)).is_err());
        // ω too narrow to contain a node.
        assert!(Grid::new(3, 1.0, 10, (0.3, 0.45)).is_err());
    }

    #[test]
    fn mask_is_open_interval() {
        let g = Grid::new(3, 1.0, 4, (0.25, 0.75)).unwrap();
        // nodes 0.25, 0.5, 0.75: only the middle one is strictly inside.
        assert_eq!(g.omega_mask(), vec![0.0, 1.0, 0.0]);
    }

    #[test]
    fn window_steps_snap() {
        let g = Grid::new(10, 1.0, 160, (0.2, 0.8)).unwrap();
        assert_eq!(g.steps_for(1.0), 160);
        assert_eq!(g.steps_for(0.5), 80);
        assert_eq!(g.steps_for(0.02), 3);
        assert_eq!(g.steps_for(1e-9), 1);
        assert_eq!(g.steps_for(5.0), 160);
    }
}
