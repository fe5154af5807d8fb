use crate::error::{Error, Result};
use crate::numerics::SpaceField;

/// Outcome of a conjugate gradient run. `x` is the iterate with the smallest
/// recurrence residual seen, whether or not the tolerance was met.
#[derive(Debug, Clone)]
pub struct CgSolution {
    pub x: SpaceField,
    pub iterations: usize,
    /// ‖A x − b‖ / ‖b‖ evaluated with a final application of A.
    pub relative_residual: f64,
    pub converged: bool,
}

impl CgSolution {
    pub fn into_result(self) -> Result<SpaceField> {
        if self.converged {
            Ok(self.x)
        } else {
            Err(Error::NoConvergence {
                what: "conjugate gradient",
                iterations: self.iterations,
            })
        }
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Conjugate gradient for an operator that is symmetric positive definite in
/// the grid L² inner product. The uniform weight dx cancels in every CG
/// coefficient, so plain Euclidean dots give the same iterates.
pub fn cg_solve<F>(mut apply_a: F, b: &SpaceField, tol: f64, maxit: usize) -> Result<CgSolution>
where
    F: FnMut(&SpaceField) -> Result<SpaceField>,
{
    let n = b.len();
    let b_norm = dot(b.values(), b.values()).sqrt();
    if b_norm == 0.0 {
        return Ok(CgSolution {
            x: SpaceField::zeros(n),
            iterations: 0,
            relative_residual: 0.0,
            converged: true,
        });
    }
    let mut x = SpaceField::zeros(n);
    let mut r = b.clone();
    let mut p = r.clone();
    let mut rr = dot(r.values(), r.values());
    let mut best = (rr.sqrt(), x.clone());
    let mut iterations = 0;

    while iterations < maxit && rr.sqrt() > tol * b_norm {
        let ap = apply_a(&p)?;
        let pap = dot(p.values(), ap.values());
        if !(pap > 0.0) {
            // Breakdown: operator not positive definite along p (or p = 0).
            break;
        }
        let alpha = rr / pap;
        x.axpy(alpha, &p);
        r.axpy(-alpha, &ap);
        let rr_new = dot(r.values(), r.values());
        iterations += 1;
        if rr_new.sqrt() < best.0 {
            best = (rr_new.sqrt(), x.clone());
        }
        let beta = rr_new / rr;
        rr = rr_new;
        for (pi, ri) in p.values_mut().iter_mut().zip(r.values()) {
            *pi = ri + beta * *pi;
        }
    }

    let x = best.1;
    let ax = apply_a(&x)?;
    let res = ax.sub(b);
    let relative_residual = dot(res.values(), res.values()).sqrt() / b_norm;
    Ok(CgSolution {
        x,
        iterations,
        relative_residual,
        converged: relative_residual <= tol,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::DenseMatrix;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn identity_one_iteration() {
        let b = SpaceField::new(vec![1.0, -2.0, 3.5]);
        let sol = cg_solve(|x| Ok(x.clone()), &b, 1e-12, 10).unwrap();
        assert_eq!(sol.iterations, 1);
        assert_eq!(sol.x, b);
        assert!(sol.converged);
    }

    #[test]
    fn scalar_operator() {
        let b = SpaceField::new(vec![4.0, 2.0]);
        let sol = cg_solve(|x| Ok(x.scaled(2.0)), &b, 1e-12, 10).unwrap();
        assert_eq!(sol.x.values(), &[2.0, 1.0]);
    }

    #[test]
    fn zero_rhs() {
        let sol = cg_solve(|x| Ok(x.clone()), &SpaceField::zeros(4), 1e-12, 10).unwrap();
        assert_eq!(sol.iterations, 0);
        assert_eq!(sol.x, SpaceField::zeros(4));
    }

    #[test]
    fn dense_spd_matches_direct_solve() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let n = 5;
        let mut g = DenseMatrix::zeros(n, n);
        for i in 0..n {
            for j in 0..n {
                g[(i, j)] = rng.gen_range(-1.0..1.0);
            }
        }
        // A = G Gᵀ + I is SPD.
        let mut a = g.matmul(&g.transpose());
        for i in 0..n {
            a[(i, i)] += 1.0;
        }
        let b: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let sol = cg_solve(|x| Ok(SpaceField::new(a.matvec(x.values()))), &SpaceField::new(b.clone()), 1e-13, 50)
            .unwrap();
        assert!(sol.converged);

        // Gauss-Jordan oracle.
        let mut m: Vec<Vec<f64>> = (0..n)
            .map(|i| {
                let mut row: Vec<f64> = (0..n).map(|j| a[(i, j)]).collect();
                row.push(b[i]);
                row
            })
            .collect();
        for c in 0..n {
            let piv = m[c][c];
            for v in m[c].iter_mut() {
                *v /= piv;
            }
            for r in 0..n {
                if r != c {
                    let f = m[r][c];
                    let src = m[c].clone();
                    for (v, s) in m[r].iter_mut().zip(src) {
                        *v -= f * s;
                    }
                }
            }
        }
        for i in 0..n {
            assert!((sol.x.values()[i] - m[i][n]).abs() < 1e-8);
        }
    }

    #[test]
    fn reports_non_convergence() {
        let a = DenseMatrix::from_diag(&[1.0, 10.0, 100.0, 1000.0]);
        let b = SpaceField::new(vec![1.0; 4]);
        let sol = cg_solve(|x| Ok(SpaceField::new(a.matvec(x.values()))), &b, 1e-14, 1).unwrap();
        assert!(!sol.converged);
        assert!(matches!(sol.into_result(), Err(Error::NoConvergence { .. })));
    }
}
