//! Laser drive configuration: spherical polarization basis (optionally
//! tilted in the X–Z plane), drive field parameters, and the three square
//! pulse envelopes Ω₁ (always on), Ω₂ and Ω₃ (instantaneous switch-off).

use crate::error::{Error, Result};
use crate::C64;

const INV_SQRT2: f64 = std::f64::consts::FRAC_1_SQRT_2;

/// Spherical polarization basis ê₀, ê₊₁, ê₋₁. At tilt θ = 0 this is the
/// standard basis ê₀ = Ẑ, ê±₁ = ∓(X̂ ± iŶ)/√2; at finite θ the quantization
/// axis rotates in the X–Z plane, ê₀ = sinθ X̂ + cosθ Ẑ.
#[derive(Clone, Debug)]
pub struct PolarizationBasis {
    pub theta: f64,
    e: [[C64; 3]; 3],
}

impl PolarizationBasis {
    pub fn standard() -> Self {
        Self::tilted(0.0)
    }

    pub fn tilted(theta: f64) -> Self {
        let (s, c) = theta.sin_cos();
        let e0 = [C64::new(s, 0.0), C64::new(0.0, 0.0), C64::new(c, 0.0)];
        // in-plane unit vector orthogonal to ê₀
        let ex = [c, 0.0, -s];
        let ep = [
            C64::new(-INV_SQRT2 * ex[0], 0.0),
            C64::new(0.0, -INV_SQRT2),
            C64::new(-INV_SQRT2 * ex[2], 0.0),
        ];
        let em = [
            C64::new(INV_SQRT2 * ex[0], 0.0),
            C64::new(0.0, -INV_SQRT2),
            C64::new(INV_SQRT2 * ex[2], 0.0),
        ];
        // index order: q = −1, 0, +1
        Self {
            theta,
            e: [em, e0, ep],
        }
    }

    /// ê_q for q ∈ {−1, 0, +1}.
    pub fn e_q(&self, q: i32) -> [C64; 3] {
        self.e[(q + 1) as usize]
    }
}

/// One of the three driving protocols of the entanglement-dynamics figures.
/// All are square pulses of unit height with an instantaneous switch-off.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum PulseShape {
    /// Ω₁(t): drive stays on.
    Omega1,
    /// Ω₂(t): switch-off during the coherence-buildup regime.
    Omega2 { t_off: f64 },
    /// Ω₃(t): switch-off during the ground-state entanglement-growth regime.
    Omega3 { t_off: f64 },
}

impl PulseShape {
    pub fn from_id(shape: u8, t_off: Option<f64>) -> Result<Self> {
        match shape {
            1 => Ok(PulseShape::Omega1),
            2 | 3 => {
                let t = t_off.ok_or_else(|| {
                    Error::InvalidDrive(format!("pulse shape {shape} requires t_off"))
                })?;
                if !(t > 0.0) {
                    return Err(Error::InvalidDrive("t_off must be positive".into()));
                }
                Ok(if shape == 2 {
                    PulseShape::Omega2 { t_off: t }
                } else {
                    PulseShape::Omega3 { t_off: t }
                })
            }
            _ => Err(Error::InvalidDrive(format!("unknown pulse shape {shape}"))),
        }
    }

    pub fn t_off(&self) -> Option<f64> {
        match *self {
            PulseShape::Omega1 => None,
            PulseShape::Omega2 { t_off } | PulseShape::Omega3 { t_off } => Some(t_off),
        }
    }
}

/// Envelope factor in {0, 1}: 1 while the drive is on (t < t_off, or always
/// for Ω₁), 0 afterwards.
pub fn pulse_envelope(shape: PulseShape, t: f64) -> f64 {
    match shape.t_off() {
        None => 1.0,
        Some(t_off) => {
            if t < t_off {
                1.0
            } else {
                0.0
            }
        }
    }
}

/// Plane-wave drive: Rabi frequency and detuning in units of Γ, wavevector
/// direction (|k| = k₀ is implied), complex polarization, and envelope.
#[derive(Clone, Debug)]
pub struct DriveField {
    pub rabi: f64,
    pub detuning: f64,
    pub k_dir: [f64; 3],
    pub polarization: [C64; 3],
    pub pulse: PulseShape,
}

impl DriveField {
    /// Drive polarized along the quantization axis (ê_L = ê₀ = Ẑ), wavevector
    /// along Ŷ, perpendicular to both array orientations.
    pub fn pi_polarized(rabi: f64, detuning: f64, pulse: PulseShape) -> Result<Self> {
        Self::new(
            rabi,
            detuning,
            [0.0, 1.0, 0.0],
            [C64::new(0.0, 0.0), C64::new(0.0, 0.0), C64::new(1.0, 0.0)],
            pulse,
        )
    }

    /// σ⁺ drive (ê_L = ê₊₁), wavevector along Ŷ.
    pub fn sigma_plus(rabi: f64, detuning: f64, pulse: PulseShape) -> Result<Self> {
        let b = PolarizationBasis::standard();
        Self::new(rabi, detuning, [0.0, 1.0, 0.0], b.e_q(1), pulse)
    }

    /// Drive with ê_L = ê₀(θ) tilted in the X–Z plane.
    pub fn tilted(rabi: f64, detuning: f64, theta: f64, pulse: PulseShape) -> Result<Self> {
        let b = PolarizationBasis::tilted(theta);
        Self::new(rabi, detuning, [0.0, 1.0, 0.0], b.e_q(0), pulse)
    }

    pub fn new(
        rabi: f64,
        detuning: f64,
        k_dir: [f64; 3],
        polarization: [C64; 3],
        pulse: PulseShape,
    ) -> Result<Self> {
        if rabi < 0.0 {
            return Err(Error::InvalidDrive(format!("negative Rabi frequency {rabi}")));
        }
        let n2: f64 = polarization.iter().map(|c| c.norm_sqr()).sum();
        if (n2 - 1.0).abs() > 1e-10 {
            return Err(Error::InvalidDrive(format!(
                "polarization not normalized (|ê_L|² = {n2})"
            )));
        }
        let kn = crate::geometry::norm(k_dir);
        if kn == 0.0 {
            return Err(Error::InvalidDrive("zero wavevector direction".into()));
        }
        Ok(Self {
            rabi,
            detuning,
            k_dir: [k_dir[0] / kn, k_dir[1] / kn, k_dir[2] / kn],
            polarization,
            pulse,
        })
    }

    /// Overlap ê_L · ê_q* selecting which transitions the laser addresses.
    pub fn pol_overlap(&self, basis: &PolarizationBasis, q: i32) -> C64 {
        let eq = basis.e_q(q);
        self.polarization
            .iter()
            .zip(eq.iter())
            .map(|(l, e)| l * e.conj())
            .sum()
    }

    /// Laser phase e^{i k · r} at position r (in λ; |k| = 2π/λ).
    pub fn phase_at(&self, r: [f64; 3]) -> C64 {
        let kr = 2.0 * std::f64::consts::PI
            * (self.k_dir[0] * r[0] + self.k_dir[1] * r[1] + self.k_dir[2] * r[2]);
        C64::new(0.0, kr).exp()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn dot_conj(a: [C64; 3], b: [C64; 3]) -> C64 {
        a.iter().zip(b.iter()).map(|(x, y)| x.conj() * y).sum()
    }

    #[test]
    fn standard_basis() {
        let b = PolarizationBasis::standard();
        let e0 = b.e_q(0);
        assert_abs_diff_eq!(e0[2].re, 1.0, epsilon = 1e-15);
        let ep = b.e_q(1);
        assert_abs_diff_eq!(ep[0].re, -INV_SQRT2, epsilon = 1e-15);
        assert_abs_diff_eq!(ep[1].im, -INV_SQRT2, epsilon = 1e-15);
    }

    #[test]
    fn basis_orthonormal_at_any_theta() {
        for theta in [0.0, 0.3, 1.0, std::f64::consts::FRAC_PI_2] {
            let b = PolarizationBasis::tilted(theta);
            for q in [-1, 0, 1] {
                for qp in [-1, 0, 1] {
                    let d = dot_conj(b.e_q(q), b.e_q(qp));
                    let expect = if q == qp { 1.0 } else { 0.0 };
                    assert_abs_diff_eq!(d.re, expect, epsilon = 1e-14);
                    assert_abs_diff_eq!(d.im, 0.0, epsilon = 1e-14);
                }
            }
        }
    }

    #[test]
    fn polarization_completeness() {
        // Σ_q ê_q ⊗ ê_q* = 1 for every θ
        for theta in [0.0, 0.7, 1.3] {
            let b = PolarizationBasis::tilted(theta);
            for a in 0..3 {
                for bb in 0..3 {
                    let mut s = C64::new(0.0, 0.0);
                    for q in [-1, 0, 1] {
                        let e = b.e_q(q);
                        s += e[a] * e[bb].conj();
                    }
                    let expect = if a == bb { 1.0 } else { 0.0 };
                    assert_abs_diff_eq!(s.re, expect, epsilon = 1e-14);
                    assert_abs_diff_eq!(s.im, 0.0, epsilon = 1e-14);
                }
            }
        }
    }

    #[test]
    fn envelopes() {
        assert_eq!(pulse_envelope(PulseShape::Omega1, 1e9), 1.0);
        let p2 = PulseShape::from_id(2, Some(8.0)).unwrap();
        assert_eq!(pulse_envelope(p2, 7.999), 1.0);
        assert_eq!(pulse_envelope(p2, 8.0), 0.0);
        let p3 = PulseShape::from_id(3, Some(200.0)).unwrap();
        assert_eq!(pulse_envelope(p3, 199.0), 1.0);
        assert_eq!(pulse_envelope(p3, 201.0), 0.0);
        assert!(PulseShape::from_id(2, None).is_err());
        assert!(PulseShape::from_id(4, Some(1.0)).is_err());
    }

    #[test]
    fn pi_drive_selects_q0() {
        let d = DriveField::pi_polarized(0.1, -3.0, PulseShape::Omega1).unwrap();
        let b = PolarizationBasis::standard();
        assert_abs_diff_eq!(d.pol_overlap(&b, 0).re, 1.0, epsilon = 1e-14);
        assert_abs_diff_eq!(d.pol_overlap(&b, 1).norm(), 0.0, epsilon = 1e-14);
        assert_abs_diff_eq!(d.pol_overlap(&b, -1).norm(), 0.0, epsilon = 1e-14);
    }

    #[test]
    fn perpendicular_drive_has_unit_phase() {
        let d = DriveField::pi_polarized(0.1, -3.0, PulseShape::Omega1).unwrap();
        let ph = d.phase_at([0.3, 0.0, 0.5]);
        assert_abs_diff_eq!(ph.re, 1.0, epsilon = 1e-14);
    }
}
