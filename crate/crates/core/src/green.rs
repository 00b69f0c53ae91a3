//! Free-space electromagnetic Green's tensor and the elastic/inelastic
//! dipolar coupling tables in the spherical basis.
//!
//! Conventions: Γ = 1 sets the rate unit, distances are in λ and k₀ = 2π/λ,
//! so k₀r = 2π·|r|. The elastic and inelastic couplings are
//! Δ^{ij}_{q,q'} = ê_q*ᵀ·Re G(r_ij)·ê_{q'} and
//! Γ^{ij}_{q,q'} = ê_q*ᵀ·Im G(r_ij)·ê_{q'}. For geometries confined to the
//! X–Z plane (all arrays here) both tables are real. The divergent self
//! Lamb shift is dropped (Δ^{ii} = 0) and the finite self-decay limit gives
//! Γ^{ii}_{q,q'} = (Γ/2)δ_{q,q'}.

use crate::drive::PolarizationBasis;
use crate::error::{Error, Result};
use crate::geometry::{norm, ArrayGeometry};
use crate::C64;
use ndarray::{Array2, Array4};
use ndarray_linalg::Eigh;

/// G(r) = (3Γ/4)[(1 − r̂r̂)e^{ik₀r}/(k₀r) + (1 − 3r̂r̂)(i e^{ik₀r}/(k₀r)² −
/// e^{ik₀r}/(k₀r)³)] as a complex symmetric 3×3 tensor.
pub fn green_tensor(r: [f64; 3], gamma: f64) -> Result<[[C64; 3]; 3]> {
    let rn = norm(r);
    if rn == 0.0 {
        return Err(Error::GreenAtZero);
    }
    let kr = 2.0 * std::f64::consts::PI * rn;
    let rh = [r[0] / rn, r[1] / rn, r[2] / rn];
    let e = C64::new(0.0, kr).exp();
    let t1 = e / kr;
    let t2 = C64::new(0.0, 1.0) * e / (kr * kr) - e / (kr * kr * kr);
    let pref = 0.75 * gamma;
    let mut g = [[C64::new(0.0, 0.0); 3]; 3];
    for a in 0..3 {
        for b in 0..3 {
            let d = if a == b { 1.0 } else { 0.0 };
            let rr = rh[a] * rh[b];
            g[a][b] = pref * ((d - rr) * t1 + (d - 3.0 * rr) * t2);
        }
    }
    Ok(g)
}

/// Near-field restriction of the Green's tensor: only the e^{ik₀r}/(k₀r)³
/// term is kept. Its real part carries the cos(k₀r)/(k₀r)³ structure of the
/// closed-form XY coefficients.
pub fn green_tensor_near_field(r: [f64; 3], gamma: f64) -> Result<[[C64; 3]; 3]> {
    let rn = norm(r);
    if rn == 0.0 {
        return Err(Error::GreenAtZero);
    }
    let kr = 2.0 * std::f64::consts::PI * rn;
    let rh = [r[0] / rn, r[1] / rn, r[2] / rn];
    let t3 = -C64::new(0.0, kr).exp() / (kr * kr * kr);
    let pref = 0.75 * gamma;
    let mut g = [[C64::new(0.0, 0.0); 3]; 3];
    for a in 0..3 {
        for b in 0..3 {
            let d = if a == b { 1.0 } else { 0.0 };
            g[a][b] = pref * (d - 3.0 * rh[a] * rh[b]) * t3;
        }
    }
    Ok(g)
}

/// ê_q*ᵀ · G · ê_{q'} for a 3×3 complex tensor.
pub fn project(g: &[[C64; 3]; 3], eq: [C64; 3], eqp: [C64; 3]) -> C64 {
    let mut s = C64::new(0.0, 0.0);
    for a in 0..3 {
        for b in 0..3 {
            s += eq[a].conj() * g[a][b] * eqp[b];
        }
    }
    s
}

/// Pairwise elastic (Δ) and inelastic (Γ) coupling tables, indexed
/// `[i, q_i, j, q_j]` with the polarization index 0,1,2 ↔ q = −1,0,+1.
#[derive(Clone, Debug)]
pub struct DipoleCouplings {
    pub delta: Array4<f64>,
    pub gamma: Array4<f64>,
    n: usize,
    gamma0: f64,
}

/// Largest |Im| tolerated when collapsing the (analytically real) projected
/// couplings to f64 storage.
const IM_TOL: f64 = 1e-10;

impl DipoleCouplings {
    /// Fill all pairwise tables for a geometry. The i = j entries are set by
    /// convention: Γ^{ii}_{q,q'} = (Γ/2)δ_{q,q'}, Δ^{ii} = 0.
    pub fn build(geom: &ArrayGeometry, basis: &PolarizationBasis, gamma: f64) -> Result<Self> {
        Self::build_with(geom, basis, gamma, green_tensor)
    }

    /// Same tables but with the near-field-only Green's tensor; used as the
    /// closed-form cross-check route for the XY coefficients.
    pub fn build_near_field(
        geom: &ArrayGeometry,
        basis: &PolarizationBasis,
        gamma: f64,
    ) -> Result<Self> {
        Self::build_with(geom, basis, gamma, green_tensor_near_field)
    }

    fn build_with(
        geom: &ArrayGeometry,
        basis: &PolarizationBasis,
        gamma: f64,
        tensor: fn([f64; 3], f64) -> Result<[[C64; 3]; 3]>,
    ) -> Result<Self> {
        let n = geom.n();
        let mut delta = Array4::zeros((n, 3, n, 3));
        let mut gmat = Array4::zeros((n, 3, n, 3));
        for i in 0..n {
            for qi in 0..3 {
                gmat[[i, qi, i, qi]] = 0.5 * gamma;
            }
            for j in 0..n {
                if i == j {
                    continue;
                }
                let r = geom.displacement(i, j);
                if norm(r) == 0.0 {
                    return Err(Error::InvalidGeometry(format!("coincident atoms {i}, {j}")));
                }
                let g = tensor(r, gamma)?;
                for (qi, q) in [-1i32, 0, 1].into_iter().enumerate() {
                    for (qj, qp) in [-1i32, 0, 1].into_iter().enumerate() {
                        let v = project(&g, basis.e_q(q), basis.e_q(qp));
                        if v.re.abs() > 0.0 || v.im.abs() > 0.0 {
                            // geometries in the X–Z plane give real projections
                            let (re_d, re_g) = (v.re, v.im);
                            let g_resid = imag_residual(&g, basis, q, qp);
                            if g_resid > IM_TOL * gamma.max(1.0) {
                                return Err(Error::InvalidGeometry(format!(
                                    "complex coupling (residual {g_resid:.2e}) for pair ({i},{j}); \
                                     geometry must lie in the X–Z plane"
                                )));
                            }
                            delta[[i, qi, j, qj]] = re_d;
                            gmat[[i, qi, j, qj]] = re_g;
                        }
                    }
                }
            }
        }
        Ok(Self {
            delta,
            gamma: gmat,
            n,
            gamma0: gamma,
        })
    }

    pub fn n_atoms(&self) -> usize {
        self.n
    }

    pub fn gamma0(&self) -> f64 {
        self.gamma0
    }

    /// Δ^{ij}_{q,q'} with q, q' ∈ {−1, 0, +1}.
    pub fn delta_qq(&self, i: usize, q: i32, j: usize, qp: i32) -> f64 {
        self.delta[[i, (q + 1) as usize, j, (qp + 1) as usize]]
    }

    /// Γ^{ij}_{q,q'} with q, q' ∈ {−1, 0, +1}.
    pub fn gamma_qq(&self, i: usize, q: i32, j: usize, qp: i32) -> f64 {
        self.gamma[[i, (q + 1) as usize, j, (qp + 1) as usize]]
    }

    /// The full 3N × 3N inelastic rate matrix over (i, q) pairs, row/col
    /// index i·3 + q_idx.
    pub fn collective_gamma_matrix(&self) -> Array2<f64> {
        let m = 3 * self.n;
        let mut out = Array2::zeros((m, m));
        for i in 0..self.n {
            for qi in 0..3 {
                for j in 0..self.n {
                    for qj in 0..3 {
                        out[[i * 3 + qi, j * 3 + qj]] = self.gamma[[i, qi, j, qj]];
                    }
                }
            }
        }
        out
    }

    /// Smallest eigenvalue of the collective rate matrix; physical tables are
    /// positive semidefinite up to roundoff.
    pub fn min_rate_eigenvalue(&self) -> Result<f64> {
        let g = self.collective_gamma_matrix().mapv(|x| C64::new(x, 0.0));
        let (ev, _) = g.eigh(ndarray_linalg::UPLO::Lower)?;
        Ok(ev.iter().cloned().fold(f64::INFINITY, f64::min))
    }
}

fn imag_residual(g: &[[C64; 3]; 3], basis: &PolarizationBasis, q: i32, qp: i32) -> f64 {
    // residual of the "real projection" assumption, checked against the
    // Hermitian/anti-Hermitian split of the projected value
    let v = project(g, basis.e_q(q), basis.e_q(qp));
    let g_re: [[C64; 3]; 3] = {
        let mut out = [[C64::new(0.0, 0.0); 3]; 3];
        for a in 0..3 {
            for b in 0..3 {
                out[a][b] = C64::new(g[a][b].re, 0.0);
            }
        }
        out
    };
    let vre = project(&g_re, basis.e_q(q), basis.e_q(qp));
    // both Re- and Im-part projections must be real for X–Z geometries
    (vre.im.abs()).max((v - vre).re.abs())
}
