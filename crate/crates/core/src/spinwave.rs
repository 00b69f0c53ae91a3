//! Analytic spin-wave theory of the XY model: Holstein-Primakoff
//! linearization around |+x⟩^⊗N, Fourier transform of the couplings,
//! Bogoliubov spectrum, and closed-form mode occupations, quadrature
//! variances and optimal squeezing angles.
//!
//! Fourier convention: C̃_k = (1/N) Σ_{i≠j} e^{−ik·r_ij} C_ij on the
//! reciprocal grid k ∈ {2πn/(L a)}, n = 1..L per axis. The double sum is
//! real and even in k by construction and reduces to the bulk dispersion at
//! large N; the hopping and pair-creation coefficients are
//! ε_k = −4C̃ˣ₀ + C̃ʸ_k + C̃ʸ_{−k} and Ω_k = C̃ʸ_k + C̃ʸ_{−k}, with squared
//! eigenfrequency ξ_k² = ε_k² − Ω_k². Modes with ξ_k² < 0 grow
//! exponentially (unstable); both branches share the same closed forms
//! through even functions of ξ.
//!
//! Phase-sensitive terms carry f(k) ∈ {0, 1}: f(k) = 1 exactly when
//! 2k ≡ 0 modulo the reciprocal lattice (k = 0 or a zone-edge π/a
//! component), i.e. when mode k is its own pair partner −k.

use crate::drive::{DriveField, PolarizationBasis, PulseShape};
use crate::error::{Error, Result};
use crate::geometry::{ArrayGeometry, Dimensionality};
use crate::green::DipoleCouplings;
use crate::xymodel::XYModel;
use crate::C64;
use ndarray::Array2;

/// Per-mode spin-wave data.
#[derive(Clone, Copy, Debug)]
pub struct ModeData {
    /// (k_X, k_Z) in rad/λ.
    pub k: [f64; 2],
    /// Grid indices (n_x, n_z), 1-based as in the reciprocal grid convention.
    pub n: [usize; 2],
    pub c_x_k: f64,
    pub c_y_k: f64,
    /// Hopping coefficient ε_k.
    pub eps: f64,
    /// Pair-creation coefficient Ω_k.
    pub omega: f64,
    /// ξ_k² = ε_k² − Ω_k² (negative for unstable modes).
    pub xi2: f64,
    /// Bogoliubov angle θ(k) from cosh 2θ = |ε_k|/ξ_k (stable modes; NaN for
    /// unstable ones).
    pub theta: f64,
    /// Phase α(k)+β(k) ∈ {0, π}: 0 when sign(ε_k Ω_k) > 0.
    pub phase: f64,
    /// Self-conjugate weight f(k) ∈ {0, 1}.
    pub f_weight: f64,
}

impl ModeData {
    pub fn is_unstable(&self) -> bool {
        self.xi2 < 0.0
    }
}

/// Spin-wave spectrum over the reciprocal grid.
#[derive(Clone, Debug)]
pub struct SpinWaveSpectrum {
    pub modes: Vec<ModeData>,
    /// C̃ˣ at k = 0.
    pub c_x_0: f64,
    pub n_atoms: usize,
}

/// Discrete Fourier transform of the coupling tables over the reciprocal
/// grid: returns (C̃ˣ_k, C̃ʸ_k, k list).
pub fn fourier_coefficients(
    xy: &XYModel,
    geom: &ArrayGeometry,
) -> Result<(Vec<f64>, Vec<f64>, Vec<[f64; 2]>)> {
    if geom.side() == 0 {
        return Err(Error::InvalidGeometry(
            "spin-wave analysis needs a generated lattice".into(),
        ));
    }
    if geom.dimensionality() == Dimensionality::Square && geom.side() * geom.side() != geom.n() {
        return Err(Error::InvalidGeometry("non-square 2D lattice".into()));
    }
    let ks = geom.reciprocal_modes()?;
    let mut cx = Vec::with_capacity(ks.len());
    let mut cy = Vec::with_capacity(ks.len());
    for k in &ks {
        cx.push(ctilde(&xy.cx, geom, *k));
        cy.push(ctilde(&xy.cy, geom, *k));
    }
    Ok((cx, cy, ks))
}

/// (1/N) Σ_{i≠j} e^{−ik·r_ij} C_ij; real for symmetric C.
fn ctilde(c: &Array2<f64>, geom: &ArrayGeometry, k: [f64; 2]) -> f64 {
    let n = geom.n();
    let z: Vec<C64> = geom
        .positions()
        .iter()
        .map(|p| C64::new(0.0, -(k[0] * p[0] + k[1] * p[2])).exp())
        .collect();
    let mut acc = C64::new(0.0, 0.0);
    for i in 0..n {
        for j in 0..n {
            if i == j {
                continue;
            }
            acc += z[i] * z[j].conj() * c[[i, j]];
        }
    }
    debug_assert!(acc.im.abs() < 1e-9 * acc.re.abs().max(1.0));
    acc.re / n as f64
}

/// Assemble the Bogoliubov spectrum from the Fourier coefficients.
pub fn spectrum(xy: &XYModel, geom: &ArrayGeometry) -> Result<SpinWaveSpectrum> {
    let (cxs, cys, ks) = fourier_coefficients(xy, geom)?;
    let l = geom.side();
    // C̃ at k = 0 is the mode with n = (L, L) (or n = L in 1D)
    let idx0 = ks.len() - 1;
    let c_x_0 = cxs[idx0];
    let mut modes = Vec::with_capacity(ks.len());
    for (idx, &k) in ks.iter().enumerate() {
        let (nx, nz) = match geom.dimensionality() {
            Dimensionality::Chain => (idx + 1, 0),
            Dimensionality::Square => (idx / l + 1, idx % l + 1),
        };
        // −k on the grid: n → L − n (mod L, staying in 1..L)
        let neg = |nn: usize| -> usize {
            if nn == l {
                l
            } else {
                l - nn
            }
        };
        let idx_neg = match geom.dimensionality() {
            Dimensionality::Chain => neg(nx) - 1,
            Dimensionality::Square => (neg(nx) - 1) * l + (neg(nz) - 1),
        };
        let cy_sym = cys[idx] + cys[idx_neg];
        let eps = -4.0 * c_x_0 + cy_sym;
        let omega = cy_sym;
        let xi2 = eps * eps - omega * omega;
        let theta = if xi2 > 0.0 {
            0.5 * (omega.abs() / eps.abs()).atanh()
        } else {
            f64::NAN
        };
        let phase = if eps * omega >= 0.0 { 0.0 } else { std::f64::consts::PI };
        // f(k) = 1 iff 2k ≡ 0 (mod G) per component
        let self_conj = |nn: usize| nn == l || 2 * nn == l;
        let f = match geom.dimensionality() {
            Dimensionality::Chain => self_conj(nx),
            Dimensionality::Square => self_conj(nx) && self_conj(nz),
        };
        modes.push(ModeData {
            k,
            n: [nx, nz],
            c_x_k: cxs[idx],
            c_y_k: cys[idx],
            eps,
            omega,
            xi2,
            theta,
            phase,
            f_weight: if f { 1.0 } else { 0.0 },
        });
    }
    Ok(SpinWaveSpectrum {
        modes,
        c_x_0,
        n_atoms: geom.n(),
    })
}

impl SpinWaveSpectrum {
    /// Mode with the smallest ξ².
    pub fn min_xi2_mode(&self) -> &ModeData {
        self.modes
            .iter()
            .min_by(|a, b| a.xi2.partial_cmp(&b.xi2).unwrap())
            .unwrap()
    }

    /// Find a mode by grid index.
    pub fn mode_at(&self, n: [usize; 2]) -> Option<&ModeData> {
        self.modes.iter().find(|m| m.n == n)
    }

    /// Find the grid mode matching a physical k within tolerance.
    pub fn mode_near(&self, k: [f64; 2]) -> Result<&ModeData> {
        self.modes
            .iter()
            .find(|m| (m.k[0] - k[0]).abs() < 1e-9 && (m.k[1] - k[1]).abs() < 1e-9)
            .ok_or(Error::OffGrid(k))
    }
}

/// sin²(ξt)/ξ² continued through ξ² ≤ 0 (→ sinh²(|ξ|t)/|ξ|², → t² at ξ² = 0).
fn sin2_kernel(xi2: f64, t: f64) -> f64 {
    let arg = xi2 * t * t;
    if arg.abs() < 1e-9 {
        // sin²(ξt)/ξ² = t²(1 − ξ²t²/3 + …)
        t * t * (1.0 - arg / 3.0)
    } else if xi2 > 0.0 {
        let xi = xi2.sqrt();
        let s = (xi * t).sin();
        s * s / xi2
    } else {
        let xi = (-xi2).sqrt();
        let s = (xi * t).sinh();
        s * s / (-xi2)
    }
}

/// sin(2ξt)/(2ξ) continued through ξ² ≤ 0 (→ sinh(2|ξ|t)/(2|ξ|), → t).
fn sin2x_kernel(xi2: f64, t: f64) -> f64 {
    let arg = xi2 * t * t;
    if arg.abs() < 1e-9 {
        t * (1.0 - 2.0 * arg / 3.0)
    } else if xi2 > 0.0 {
        let xi = xi2.sqrt();
        (2.0 * xi * t).sin() / (2.0 * xi)
    } else {
        let xi = (-xi2).sqrt();
        (2.0 * xi * t).sinh() / (2.0 * xi)
    }
}

/// ξ·cot(ξt) continued through ξ² ≤ 0 (→ |ξ|coth(|ξ|t), → 1/t).
fn cot_kernel(xi2: f64, t: f64) -> f64 {
    let arg = xi2 * t * t;
    if arg.abs() < 1e-9 {
        1.0 / t - xi2 * t / 3.0
    } else if xi2 > 0.0 {
        let xi = xi2.sqrt();
        xi * (xi * t).cos() / (xi * t).sin()
    } else {
        let xi = (-xi2).sqrt();
        xi * (xi * t).cosh() / (xi * t).sinh()
    }
}

/// Closed-form mode occupation ⟨n_k(t)⟩ = |Ω_k|² · sin²(ξt)/ξ², valid on both
/// stability branches.
pub fn mode_occupation(mode: &ModeData, t: f64) -> f64 {
    mode.omega * mode.omega * sin2_kernel(mode.xi2, t)
}

/// Quadrature variance ⟨|ΔQ_k(t, φ)|²⟩ = 1/2 + n_k(t) +
/// f(k)[cos 2φ · Ω_k ε_k · sin²(ξt)/ξ² + sin 2φ · Ω_k · sin(2ξt)/(2ξ)].
pub fn quadrature_variance(mode: &ModeData, t: f64, phi: f64) -> f64 {
    let base = 0.5 + mode_occupation(mode, t);
    if mode.f_weight == 0.0 {
        return base;
    }
    let g1 = sin2_kernel(mode.xi2, t);
    let g2 = sin2x_kernel(mode.xi2, t);
    base + (2.0 * phi).cos() * mode.omega * mode.eps * g1 + (2.0 * phi).sin() * mode.omega * g2
}

/// Optimal squeezing angle φ*: the extremum branch tan(2φ*) = (ξ/ε)cot(ξt)
/// that minimizes the variance; both candidates are evaluated explicitly.
/// Errors when f(k) = 0 (no squeezing axis).
pub fn optimal_angle(mode: &ModeData, t: f64) -> Result<f64> {
    if mode.f_weight == 0.0 {
        return Err(Error::NoSqueezingAxis);
    }
    if t == 0.0 {
        // limit of the closed form: 2φ* → π/2
        return Ok(std::f64::consts::FRAC_PI_4);
    }
    let tan2 = cot_kernel(mode.xi2, t) / mode.eps;
    let phi0 = 0.5 * tan2.atan();
    let phi1 = phi0 + std::f64::consts::FRAC_PI_2;
    let v0 = quadrature_variance(mode, t, phi0);
    let v1 = quadrature_variance(mode, t, phi1);
    Ok(if v0 <= v1 { phi0 } else { phi1 })
}

/// Wineland-style squeezing ratio of the spin-wave mode under HP
/// (⟨S_x⟩ = N/2): N⟨S̃²_φ(k)⟩/⟨S_x⟩² = 2⟨|ΔQ_k|²⟩ evaluated at the matching
/// phase-space angle.
pub fn wineland_ratio(mode: &ModeData, t: f64, phi: f64) -> f64 {
    2.0 * quadrature_variance(mode, t, phi)
}

/// One row of a polarization-angle scan.
#[derive(Clone, Copy, Debug)]
pub struct ThetaScanRow {
    pub theta: f64,
    pub k: [f64; 2],
    pub n: [usize; 2],
    pub xi2: f64,
    pub n_k: f64,
    /// variance at φ* (f(k) ≠ 0 modes) or the φ-independent variance.
    pub var_q: f64,
    /// variance at φ* + π/2.
    pub var_r: f64,
    pub phi_star: Option<f64>,
}

/// Recompute couplings in the tilted basis ê₀(θ) = sinθ X̂ + cosθ Ẑ and emit
/// occupations and quadrature variances at fixed time `t` for each θ.
pub fn theta_scan(
    geom: &ArrayGeometry,
    rabi: f64,
    detuning: f64,
    thetas: &[f64],
    t: f64,
) -> Result<Vec<ThetaScanRow>> {
    let mut rows = Vec::new();
    for &theta in thetas {
        let basis = PolarizationBasis::tilted(theta);
        let coup = DipoleCouplings::build(geom, &basis, 1.0)?;
        let drive = DriveField::tilted(rabi, detuning, theta, PulseShape::Omega1)?;
        let xy = XYModel::from_couplings(&coup, &drive, geom)?;
        let spec = spectrum(&xy, geom)?;
        for m in &spec.modes {
            let (var_q, var_r, phi_star) = if m.f_weight != 0.0 {
                let phi = optimal_angle(m, t)?;
                (
                    quadrature_variance(m, t, phi),
                    quadrature_variance(m, t, phi + std::f64::consts::FRAC_PI_2),
                    Some(phi),
                )
            } else {
                let v = quadrature_variance(m, t, 0.0);
                (v, v, None)
            };
            rows.push(ThetaScanRow {
                theta,
                k: m.k,
                n: m.n,
                xi2: m.xi2,
                n_k: mode_occupation(m, t),
                var_q,
                var_r,
                phi_star,
            });
        }
    }
    Ok(rows)
}
