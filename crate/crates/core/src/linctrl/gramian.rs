use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::linctrl::window::{apply_c, apply_cstar, WindowProblem};
use crate::numerics::quadrature::time_weight;
use crate::numerics::{eig_symmetric, l2_inner, l2_norm, thin_svd, DenseMatrix, Grid, SpaceField, SpaceTimeField};

/// Eigenvalues below this fraction of μ₁ are treated as unreachable.
pub const MU_FLOOR_REL: f64 = 1e-14;

/// Dense Gramian B = C C* in nodal coordinates.
#[derive(Debug, Clone)]
pub struct Gramian {
    /// Symmetrized matrix (B + Bᵀ)/2.
    pub matrix: DenseMatrix,
    /// ‖B − Bᵀ‖_∞ / ‖B‖_∞ before symmetrization.
    pub asymmetry: f64,
}

/// Column j is C(C* e_j) for the nodal basis vector e_j.
pub fn assemble_b(wp: &WindowProblem) -> Result<Gramian> {
    let nx = wp.grid().nx();
    let columns: Vec<SpaceField> = (0..nx)
        .into_par_iter()
        .map(|j| apply_c(&apply_cstar(&SpaceField::unit(nx, j), wp)?, wp))
        .collect::<Result<_>>()?;
    let mut raw = DenseMatrix::zeros(nx, nx);
    for (j, col) in columns.iter().enumerate() {
        raw.set_column(j, col.values());
    }
    Ok(Gramian {
        asymmetry: raw.relative_asymmetry(),
        matrix: raw.symmetrized(),
    })
}

/// ln α_n = μ₁ + e − eⁿ
pub fn ln_alpha(mu1: f64, n: usize) -> f64 {
    mu1 + std::f64::consts::E - (n as f64).exp()
}

/// Eigenpairs of the Gramian grouped into the doubly exponential bands
/// S_n = { m : α_{n+1} < μ_m ≤ α_n }, α_n = e^{μ₁+e}·e^{−eⁿ}.
#[derive(Debug, Clone)]
pub struct SpectralBasis {
    /// Retained eigenvalues, nonincreasing, all above the floor.
    pub mu: Vec<f64>,
    /// Eigenvectors orthonormal in l2_inner, aligned with `mu`.
    pub xi: Vec<SpaceField>,
    /// α_1 ..= α_{N_max + 1}.
    pub alphas: Vec<f64>,
    /// `bands[n - 1]` lists the indices of S_n; empty bands are kept.
    pub bands: Vec<Vec<usize>>,
    /// Largest n with S_n nonempty.
    pub n_max: usize,
    /// Number of eigenvalues dropped under the floor.
    pub discarded: usize,
    /// Full spectrum of B as computed, for diagnostics.
    pub all_eigenvalues: Vec<f64>,
    /// Present when the basis came from [`gramian_basis`].
    pub factor: Option<ControlFactor>,
}

/// Index n ≥ 1 of the band containing μ.
pub fn band_of(mu: f64, mu1: f64) -> usize {
    let l = mu.ln();
    let mut n = 1;
    while l <= ln_alpha(mu1, n + 1) {
        n += 1;
    }
    n
}

/// Bands from an eigendecomposition of the assembled Gramian.
pub fn spectral_bands(b: &DenseMatrix, grid: &Grid) -> Result<SpectralBasis> {
    let eig = eig_symmetric(b)?;
    let vectors = (0..eig.values.len()).map(|k| eig.vector(k)).collect();
    from_eigenpairs(eig.values, vectors, None, grid)
}

/// Bands from an SVD of the control-to-state map, B = CC* = (UΣVᵀ)ᵀ(UΣVᵀ).
///
/// Along with the eigenpairs this yields exact preimages θ_m = C*ξ_m/μ_m of
/// the eigenvectors without dividing by μ_m, which keeps the steering
/// identity C ℓ = z_proj accurate for modes near the eigenvalue floor.
pub fn gramian_basis(wp: &WindowProblem) -> Result<SpectralBasis> {
    let grid = wp.grid();
    let nx = grid.nx();
    let slices = wp.slices();
    let dt = grid.dt();
    let omega: Vec<usize> = (0..nx).filter(|&i| grid.in_omega(i)).collect();
    let mut rows = Vec::with_capacity(wp.steps() * omega.len());
    let mut row_scale = Vec::with_capacity(rows.capacity());
    for k in 1..slices {
        let w = time_weight(k, slices, dt).sqrt();
        for &i in &omega {
            rows.push((k, i));
            row_scale.push(w);
        }
    }
    // Column j of Ĉᵀ = W^{1/2} C* e_j / √dx, W the st_inner weights.
    let columns: Vec<Vec<f64>> = (0..nx)
        .into_par_iter()
        .map(|j| {
            let p = apply_cstar(&SpaceField::unit(nx, j), wp)?;
            Ok(rows.iter().zip(&row_scale).map(|(&(k, i), w)| w * p.get(i, k)).collect())
        })
        .collect::<Result<_>>()?;
    let svd = thin_svd(&columns)?;
    let values: Vec<f64> = svd.s.iter().map(|s| s * s).collect();
    let inv_weight: Vec<f64> = row_scale.iter().map(|w| 1.0 / (w * grid.dx().sqrt())).collect();
    let factor = ControlFactor {
        rows,
        inv_weight,
        slices,
        nx,
        left: svd.u,
        sigma: svd.s,
    };
    from_eigenpairs(values, svd.v, Some(factor), grid)
}

/// Left singular vectors of the weighted control-to-state matrix, enough to
/// write down θ_m with C θ_m = ξ_m.
#[derive(Debug, Clone)]
pub struct ControlFactor {
    rows: Vec<(usize, usize)>,
    inv_weight: Vec<f64>,
    slices: usize,
    nx: usize,
    left: Vec<Vec<f64>>,
    sigma: Vec<f64>,
}

impl ControlFactor {
    /// Σ_m coeffs[m]·θ_m over the retained modes.
    fn combine(&self, coeffs: &[(usize, f64)]) -> SpaceTimeField {
        let mut y = vec![0.0; self.rows.len()];
        for &(m, c) in coeffs {
            let s = c / self.sigma[m];
            for (yi, ui) in y.iter_mut().zip(&self.left[m]) {
                *yi += s * ui;
            }
        }
        let mut out = SpaceTimeField::zeros(self.nx, self.slices);
        for ((&(k, i), w), yi) in self.rows.iter().zip(&self.inv_weight).zip(y) {
            out.set(i, k, yi * w);
        }
        out
    }
}

fn from_eigenpairs(
    values: Vec<f64>,
    vectors: Vec<Vec<f64>>,
    factor: Option<ControlFactor>,
    grid: &Grid,
) -> Result<SpectralBasis> {
    let mu1 = values.first().copied().unwrap_or(0.0);
    if !(mu1 > 0.0) {
        return Err(Error::EmptySpectrum);
    }
    let floor = MU_FLOOR_REL * mu1;
    let scale = 1.0 / grid.dx().sqrt();
    let mut mu = Vec::new();
    let mut xi = Vec::new();
    for (&m, v) in values.iter().zip(vectors) {
        if m > floor {
            mu.push(m);
            xi.push(SpaceField::new(v).scaled(scale));
        }
    }
    let membership: Vec<usize> = mu.iter().map(|&m| band_of(m, mu1)).collect();
    let n_max = membership.iter().copied().max().unwrap_or(0);
    let mut bands = vec![Vec::new(); n_max];
    for (m, &n) in membership.iter().enumerate() {
        bands[n - 1].push(m);
    }
    let alphas = (1..=n_max + 1).map(|n| ln_alpha(mu1, n).exp()).collect();
    Ok(SpectralBasis {
        discarded: values.len() - mu.len(),
        mu,
        xi,
        alphas,
        bands,
        n_max,
        all_eigenvalues: values,
        factor,
    })
}

impl SpectralBasis {
    pub fn mu1(&self) -> f64 {
        self.mu[0]
    }

    pub fn band_populations(&self) -> Vec<usize> {
        self.bands.iter().map(Vec::len).collect()
    }

    /// Indices of all retained modes in bands 1..=n.
    pub fn modes_up_to(&self, n: usize) -> impl Iterator<Item = usize> + '_ {
        self.bands.iter().take(n).flatten().copied()
    }

    /// Σ_{n ≤ N} Σ_{m ∈ S_n} (z, ξ_m) ξ_m
    pub fn projection(&self, z: &SpaceField, n: usize, grid: &Grid) -> SpaceField {
        let mut out = SpaceField::zeros(z.len());
        for m in self.modes_up_to(n) {
            out.axpy(l2_inner(z, &self.xi[m], grid), &self.xi[m]);
        }
        out
    }

    /// ‖z − z_proj(N)‖_{L²}
    pub fn truncation_error(&self, z: &SpaceField, n: usize, grid: &Grid) -> f64 {
        l2_norm(&z.sub(&self.projection(z, n, grid)), grid)
    }
}

/// The filtered approximate control and the part of the target it reaches.
#[derive(Debug, Clone)]
pub struct FilteredControl {
    /// Physical window control ℓ = E·Σ (z,ξ_m)/μ_m·C*ξ_m.
    pub ell: SpaceTimeField,
    pub z_proj: SpaceField,
    /// ‖ℓ/E‖_{L²(ω×(0,T′))}: norm of the explicit preimage of z_proj under C,
    /// an upper bound for its reachable-space norm.
    pub preimage_norm: f64,
}

pub fn approx_control_l(z: &SpaceField, n: usize, basis: &SpectralBasis, wp: &WindowProblem) -> Result<FilteredControl> {
    if basis.mu.is_empty() {
        return Err(Error::EmptySpectrum);
    }
    if n == 0 {
        return Err(Error::Validation(vec!["truncation index N must be >= 1".into()]));
    }
    let grid = wp.grid();
    let mut weighted = SpaceField::zeros(z.len());
    let mut z_proj = SpaceField::zeros(z.len());
    let mut coeffs = Vec::new();
    for m in basis.modes_up_to(n) {
        let c = l2_inner(z, &basis.xi[m], grid);
        z_proj.axpy(c, &basis.xi[m]);
        weighted.axpy(c / basis.mu[m], &basis.xi[m]);
        coeffs.push((m, c));
    }
    let theta = match &basis.factor {
        Some(f) if f.slices == wp.slices() && f.nx == grid.nx() => f.combine(&coeffs),
        // C* is linear, so Σ c_m/μ_m C*ξ_m = C*(Σ c_m/μ_m ξ_m).
        _ => apply_cstar(&weighted, wp)?,
    };
    let preimage_norm = crate::numerics::st_norm(&theta, grid);
    Ok(FilteredControl {
        ell: theta.scaled(wp.e_scale()),
        z_proj,
        preimage_norm,
    })
}
