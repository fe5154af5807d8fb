use crate::error::{Error, Result};

const MAX_SWEEPS: usize = 80;

/// Thin SVD A = Σ_k s_k u_k v_kᵀ of an m×n matrix given by its columns.
#[derive(Debug, Clone)]
pub struct ThinSvd {
    /// Singular values, nonincreasing.
    pub s: Vec<f64>,
    /// Left singular vectors (length m); zero for zero singular values.
    pub u: Vec<Vec<f64>>,
    /// Right singular vectors (length n).
    pub v: Vec<Vec<f64>>,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Householder QR followed by one-sided Jacobi on R when m > n, one-sided
/// Jacobi on A directly otherwise. Small singular values come out with
/// absolute accuracy ~ u·s₁, i.e. far better than eigenvalues of AᵀA.
pub fn thin_svd(columns: &[Vec<f64>]) -> Result<ThinSvd> {
    let n = columns.len();
    if n == 0 {
        return Ok(ThinSvd { s: vec![], u: vec![], v: vec![] });
    }
    let m = columns[0].len();
    if columns.iter().any(|c| c.len() != m) {
        return Err(Error::DimensionMismatch {
            what: "svd column length",
            expected: m,
            got: columns.iter().map(Vec::len).find(|&l| l != m).unwrap_or(m),
        });
    }

    let (mut work, reflectors) = if m > n {
        let (r, refl) = householder_r(columns);
        (r, Some(refl))
    } else {
        (columns.to_vec(), None)
    };
    let mut v: Vec<Vec<f64>> = (0..n)
        .map(|j| {
            let mut e = vec![0.0; n];
            e[j] = 1.0;
            e
        })
        .collect();
    one_sided_jacobi(&mut work, &mut v)?;

    let mut order: Vec<usize> = (0..n).collect();
    let norms: Vec<f64> = work.iter().map(|c| dot(c, c).sqrt()).collect();
    order.sort_by(|&a, &b| norms[b].total_cmp(&norms[a]));

    let mut s = Vec::with_capacity(n);
    let mut u = Vec::with_capacity(n);
    let mut vs = Vec::with_capacity(n);
    for &j in &order {
        let sj = norms[j];
        let mut uj: Vec<f64> = if sj > 0.0 {
            work[j].iter().map(|x| x / sj).collect()
        } else {
            vec![0.0; work[j].len()]
        };
        if let Some(refl) = &reflectors {
            uj.resize(m, 0.0);
            apply_q(refl, &mut uj);
        }
        s.push(sj);
        u.push(uj);
        vs.push(std::mem::take(&mut v[j]));
    }
    Ok(ThinSvd { s, u, v: vs })
}

/// Returns the columns of R (n×n, upper triangular) and the unit reflectors.
fn householder_r(columns: &[Vec<f64>]) -> (Vec<Vec<f64>>, Vec<Option<Vec<f64>>>) {
    let n = columns.len();
    let mut a = columns.to_vec();
    let mut refl = Vec::with_capacity(n);
    for k in 0..n {
        let x = &a[k][k..];
        let norm = dot(x, x).sqrt();
        if norm == 0.0 {
            refl.push(None);
            continue;
        }
        let alpha = if x[0] > 0.0 { -norm } else { norm };
        let mut w = x.to_vec();
        w[0] -= alpha;
        let wn = dot(&w, &w).sqrt();
        if wn == 0.0 {
            refl.push(None);
            continue;
        }
        for wi in w.iter_mut() {
            *wi /= wn;
        }
        a[k][k] = alpha;
        for t in a[k][k + 1..].iter_mut() {
            *t = 0.0;
        }
        for col in a.iter_mut().skip(k + 1) {
            let tail = &mut col[k..];
            let p = 2.0 * dot(&w, tail);
            for (t, wi) in tail.iter_mut().zip(&w) {
                *t -= p * wi;
            }
        }
        refl.push(Some(w));
    }
    let r = a.into_iter().map(|mut c| {
        c.truncate(n);
        c
    });
    (r.collect(), refl)
}

/// y ← Q y with Q = H₀H₁⋯H_{n−1}.
fn apply_q(refl: &[Option<Vec<f64>>], y: &mut [f64]) {
    for (k, w) in refl.iter().enumerate().rev() {
        if let Some(w) = w {
            let tail = &mut y[k..];
            let p = 2.0 * dot(w, tail);
            for (t, wi) in tail.iter_mut().zip(w) {
                *t -= p * wi;
            }
        }
    }
}

fn one_sided_jacobi(a: &mut [Vec<f64>], v: &mut [Vec<f64>]) -> Result<()> {
    let n = a.len();
    let tol = f64::EPSILON * (a[0].len().max(n) as f64);
    // Columns this small relative to ‖A‖_F are numerically zero; rotating
    // them against each other only churns round-off.
    let frob2: f64 = a.iter().map(|c| dot(c, c)).sum();
    let tiny = f64::MIN_POSITIVE.max(f64::EPSILON * f64::EPSILON * frob2);
    for _ in 0..MAX_SWEEPS {
        let mut rotated = false;
        for p in 0..n {
            for q in p + 1..n {
                let alpha = dot(&a[p], &a[p]);
                let beta = dot(&a[q], &a[q]);
                let gamma = dot(&a[p], &a[q]);
                if alpha <= tiny || beta <= tiny || gamma.abs() <= tol * (alpha * beta).sqrt() {
                    continue;
                }
                rotated = true;
                let zeta = (beta - alpha) / (2.0 * gamma);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                rotate(a, p, q, c, s);
                rotate(v, p, q, c, s);
            }
        }
        if !rotated {
            return Ok(());
        }
    }
    Err(Error::NoConvergence {
        what: "one-sided Jacobi SVD",
        iterations: MAX_SWEEPS,
    })
}

fn rotate(cols: &mut [Vec<f64>], p: usize, q: usize, c: f64, s: f64) {
    let (lo, hi) = cols.split_at_mut(q);
    for (x, y) in lo[p].iter_mut().zip(hi[0].iter_mut()) {
        let (xp, xq) = (*x, *y);
        *x = c * xp - s * xq;
        *y = s * xp + c * xq;
    }
}
