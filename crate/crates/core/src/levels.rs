//! Atomic level schemes: ground and excited Zeeman manifolds with their
//! Clebsch-Gordan weights C_n^q = ⟨F_g,n; 1,q | F_e,n+q⟩ (Condon-Shortley
//! phase convention).
//!
//! Angular momenta are half-integers, stored as twice their value so all
//! arithmetic stays integral. Local single-atom states are ordered ground
//! sublevels first (ascending m), then excited sublevels (ascending m).

use crate::error::{Error, Result};
use crate::C64;
use ndarray::Array2;

/// A ground↔excited dipole transition manifold, possibly restricted to a
/// subset of Zeeman sublevels.
#[derive(Clone, Debug)]
pub struct LevelScheme {
    /// 2·F_g
    fg2: i32,
    /// 2·F_e
    fe2: i32,
    /// Twice the magnetic numbers of the retained ground sublevels, ascending.
    ground2: Vec<i32>,
    /// Twice the magnetic numbers of the retained excited sublevels, ascending.
    excited2: Vec<i32>,
    /// cg[q_idx][ground_idx] = C_n^q with q = q_idx − 1; zero when the target
    /// excited sublevel is forbidden or not retained.
    cg: [Vec<f64>; 3],
    /// Two-level 0↔0 convention (single transition, C = 1).
    two_level: bool,
}

impl LevelScheme {
    /// Full manifold F_g ↔ F_e. The pair F_g = F_e = 0 is handled as the
    /// two-level convention with a single C = 1 transition on q = 0.
    pub fn new(fg2: i32, fe2: i32) -> Result<Self> {
        if fg2 < 0 || fe2 < 0 {
            return Err(Error::InvalidLevels("negative angular momentum".into()));
        }
        if fg2 == 0 && fe2 == 0 {
            return Ok(Self {
                fg2,
                fe2,
                ground2: vec![0],
                excited2: vec![0],
                cg: [vec![0.0], vec![1.0], vec![0.0]],
                two_level: true,
            });
        }
        if (fg2 - fe2).abs() > 2 {
            return Err(Error::DipoleForbidden {
                fg: fg2 as f64 / 2.0,
                fe: fe2 as f64 / 2.0,
            });
        }
        let ground2: Vec<i32> = (0..=fg2).map(|k| -fg2 + 2 * k).collect();
        let excited2: Vec<i32> = (0..=fe2).map(|k| -fe2 + 2 * k).collect();
        Self::with_sublevels(fg2, fe2, ground2, excited2)
    }

    /// Restrict to the listed sublevels (twice-m values). Used for schemes
    /// where AC Stark shifts push the remaining sublevels out of resonance.
    pub fn with_sublevels(
        fg2: i32,
        fe2: i32,
        ground2: Vec<i32>,
        excited2: Vec<i32>,
    ) -> Result<Self> {
        if (fg2 - fe2).abs() > 2 || (fg2 == 0 && fe2 == 0) {
            return Err(Error::DipoleForbidden {
                fg: fg2 as f64 / 2.0,
                fe: fe2 as f64 / 2.0,
            });
        }
        if ground2.is_empty() || excited2.is_empty() {
            return Err(Error::InvalidLevels("empty sublevel set".into()));
        }
        for &m2 in &ground2 {
            if m2.abs() > fg2 || (m2 - fg2) % 2 != 0 {
                return Err(Error::InvalidLevels(format!("bad ground m = {}", m2 as f64 / 2.0)));
            }
        }
        for &m2 in &excited2 {
            if m2.abs() > fe2 || (m2 - fe2) % 2 != 0 {
                return Err(Error::InvalidLevels(format!("bad excited m = {}", m2 as f64 / 2.0)));
            }
        }
        let mut cg = [
            vec![0.0; ground2.len()],
            vec![0.0; ground2.len()],
            vec![0.0; ground2.len()],
        ];
        for (gi, &n2) in ground2.iter().enumerate() {
            for (qi, q) in [-1i32, 0, 1].into_iter().enumerate() {
                let me2 = n2 + 2 * q;
                if excited2.contains(&me2) {
                    cg[qi][gi] = clebsch_gordan(fg2, n2, 2, 2 * q, fe2, me2);
                }
            }
        }
        Ok(Self {
            fg2,
            fe2,
            ground2,
            excited2,
            cg,
            two_level: false,
        })
    }

    /// Two-level atoms (single ground and excited state, C = 1 on q = 0).
    pub fn two_level() -> Self {
        Self::new(0, 0).unwrap()
    }

    /// Four-level scheme F_g = F_e = 1/2.
    pub fn four_level() -> Self {
        Self::new(1, 1).unwrap()
    }

    /// The ⁸⁸Sr ³P₂ ↔ ³D₃ proposal: F_g = 2, F_e = 3 with dynamics
    /// restricted to m_J ∈ {1, 2} ↔ {2, 3} by AC-Stark isolation of the
    /// remaining ³D₃ sublevels. The retained set is closed under decay.
    pub fn sr88() -> Self {
        Self::with_sublevels(4, 6, vec![2, 4], vec![4, 6]).unwrap()
    }

    pub fn n_ground(&self) -> usize {
        self.ground2.len()
    }

    pub fn n_excited(&self) -> usize {
        self.excited2.len()
    }

    /// Local Hilbert dimension (ground + excited sublevels retained).
    pub fn local_dim(&self) -> usize {
        self.ground2.len() + self.excited2.len()
    }

    pub fn is_two_level(&self) -> bool {
        self.two_level
    }

    pub fn ground_m2(&self) -> &[i32] {
        &self.ground2
    }

    pub fn excited_m2(&self) -> &[i32] {
        &self.excited2
    }

    /// C_n^q for the ground sublevel of index `gi`; q ∈ {−1, 0, +1}.
    pub fn cg(&self, q: i32, gi: usize) -> f64 {
        self.cg[(q + 1) as usize][gi]
    }

    /// Local raising operator D_q⁺ = Σ_n C_n^q |e_{n+q}⟩⟨g_n| as a dense
    /// local_dim × local_dim matrix.
    pub fn d_plus_local(&self, q: i32) -> Array2<C64> {
        let d = self.local_dim();
        let ng = self.n_ground();
        let mut m = Array2::zeros((d, d));
        if self.two_level {
            if q == 0 {
                m[[1, 0]] = C64::new(1.0, 0.0);
            }
            return m;
        }
        for (gi, &n2) in self.ground2.iter().enumerate() {
            let c = self.cg(q, gi);
            if c == 0.0 {
                continue;
            }
            let me2 = n2 + 2 * q;
            if let Some(ei) = self.excited2.iter().position(|&m2| m2 == me2) {
                m[[ng + ei, gi]] = C64::new(c, 0.0);
            }
        }
        m
    }

    /// Sparse triplet form of D_q⁺: (excited local index, ground local index,
    /// coefficient).
    pub fn d_plus_elems(&self, q: i32) -> Vec<(usize, usize, f64)> {
        let ng = self.n_ground();
        if self.two_level {
            return if q == 0 { vec![(1, 0, 1.0)] } else { vec![] };
        }
        let mut out = Vec::new();
        for (gi, &n2) in self.ground2.iter().enumerate() {
            let c = self.cg(q, gi);
            if c == 0.0 {
                continue;
            }
            let me2 = n2 + 2 * q;
            if let Some(ei) = self.excited2.iter().position(|&m2| m2 == me2) {
                out.push((ng + ei, gi, c));
            }
        }
        out
    }
}

fn ln_factorial(n: i64) -> f64 {
    // exact in f64 well beyond the j ≤ 4 range used here
    (2..=n).map(|k| (k as f64).ln()).sum()
}

/// ⟨j1 m1; j2 m2 | J M⟩ by the Racah closed form, arguments as twice-values.
/// Condon-Shortley phases. Returns 0 for incompatible quantum numbers.
pub fn clebsch_gordan(j1_2: i32, m1_2: i32, j2_2: i32, m2_2: i32, jj2: i32, mm2: i32) -> f64 {
    if m1_2 + m2_2 != mm2
        || jj2 > j1_2 + j2_2
        || jj2 < (j1_2 - j2_2).abs()
        || m1_2.abs() > j1_2
        || m2_2.abs() > j2_2
        || mm2.abs() > jj2
        || (j1_2 + m1_2) % 2 != 0
        || (j2_2 + m2_2) % 2 != 0
    {
        return 0.0;
    }
    // all of these are integers for consistent inputs
    let h = |x: i32| -> i64 {
        debug_assert!(x % 2 == 0, "half-integer mismatch in CG");
        (x / 2) as i64
    };
    let a1 = h(j1_2 + j2_2 - jj2);
    let a2 = h(j1_2 - j2_2 + jj2);
    let a3 = h(-j1_2 + j2_2 + jj2);
    let a4 = h(j1_2 + j2_2 + jj2 + 2);
    let b1 = h(jj2 + mm2);
    let b2 = h(jj2 - mm2);
    let b3 = h(j1_2 - m1_2);
    let b4 = h(j1_2 + m1_2);
    let b5 = h(j2_2 - m2_2);
    let b6 = h(j2_2 + m2_2);
    if [a1, a2, a3, b1, b2, b3, b4, b5, b6].iter().any(|&x| x < 0) {
        return 0.0;
    }
    let ln_pref = 0.5
        * (((jj2 + 1) as f64).ln() + ln_factorial(a1) + ln_factorial(a2) + ln_factorial(a3)
            - ln_factorial(a4)
            + ln_factorial(b1)
            + ln_factorial(b2)
            + ln_factorial(b3)
            + ln_factorial(b4)
            + ln_factorial(b5)
            + ln_factorial(b6));
    let k_min = 0i64
        .max(h(j2_2 - jj2 - m1_2))
        .max(h(j1_2 + m2_2 - jj2));
    let k_max = a1.min(b3).min(b6);
    let mut sum = 0.0;
    for k in k_min..=k_max {
        let d1 = a1 - k;
        let d2 = b3 - k;
        let d3 = b6 - k;
        let d4 = h(jj2 - j2_2 + m1_2) + k;
        let d5 = h(jj2 - j1_2 - m2_2) + k;
        if d1 < 0 || d2 < 0 || d3 < 0 || d4 < 0 || d5 < 0 {
            continue;
        }
        let ln_term = ln_factorial(k)
            + ln_factorial(d1)
            + ln_factorial(d2)
            + ln_factorial(d3)
            + ln_factorial(d4)
            + ln_factorial(d5);
        let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
        sum += sign * (ln_pref - ln_term).exp();
    }
    sum
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    const S3: f64 = 0.577_350_269_189_625_76; // 1/√3
    const S23: f64 = 0.816_496_580_927_726; // √(2/3)

    #[test]
    fn cg_four_level_values() {
        // frozen from the standard Condon-Shortley tables
        assert_abs_diff_eq!(clebsch_gordan(1, -1, 2, 0, 1, -1), -S3, epsilon = 1e-14);
        assert_abs_diff_eq!(clebsch_gordan(1, 1, 2, 0, 1, 1), S3, epsilon = 1e-14);
        assert_abs_diff_eq!(clebsch_gordan(1, -1, 2, 2, 1, 1), -S23, epsilon = 1e-14);
        assert_abs_diff_eq!(clebsch_gordan(1, 1, 2, -2, 1, -1), S23, epsilon = 1e-14);
    }

    #[test]
    fn cg_f1_f1_values() {
        let s2 = 0.5_f64.sqrt();
        assert_abs_diff_eq!(clebsch_gordan(2, 0, 2, 0, 2, 0), 0.0, epsilon = 1e-14);
        assert_abs_diff_eq!(clebsch_gordan(2, -2, 2, 0, 2, -2), -s2, epsilon = 1e-14);
        assert_abs_diff_eq!(clebsch_gordan(2, 2, 2, 0, 2, 2), s2, epsilon = 1e-14);
        assert_abs_diff_eq!(clebsch_gordan(2, -2, 2, 2, 2, 0), -s2, epsilon = 1e-14);
        assert_abs_diff_eq!(clebsch_gordan(2, 0, 2, 2, 2, 2), -s2, epsilon = 1e-14);
    }

    #[test]
    fn cg_sr_values() {
        // F_g = 2 → F_e = 3 entries used by the Sr preset
        assert_abs_diff_eq!(
            clebsch_gordan(4, 2, 2, 2, 6, 4),
            S23,
            epsilon = 1e-14
        );
        assert_abs_diff_eq!(clebsch_gordan(4, 4, 2, 2, 6, 6), 1.0, epsilon = 1e-14);
        assert_abs_diff_eq!(clebsch_gordan(4, 4, 2, 0, 6, 4), S3, epsilon = 1e-14);
    }

    #[test]
    fn two_level_convention() {
        let s = LevelScheme::two_level();
        assert!(s.is_two_level());
        assert_eq!(s.local_dim(), 2);
        assert_eq!(s.d_plus_elems(0), vec![(1, 0, 1.0)]);
        assert!(s.d_plus_elems(1).is_empty());
    }

    #[test]
    fn four_level_table() {
        let s = LevelScheme::four_level();
        assert_eq!(s.local_dim(), 4);
        // |C^0| = 1/√3, |C^{±1}| = √(2/3)
        assert_abs_diff_eq!(s.cg(0, 0).abs(), S3, epsilon = 1e-14);
        assert_abs_diff_eq!(s.cg(0, 1).abs(), S3, epsilon = 1e-14);
        assert_abs_diff_eq!(s.cg(1, 0).abs(), S23, epsilon = 1e-14);
        assert_abs_diff_eq!(s.cg(-1, 1).abs(), S23, epsilon = 1e-14);
        // q = +1 from the upper ground level leaves the manifold
        assert_eq!(s.cg(1, 1), 0.0);
    }

    #[test]
    fn dipole_forbidden_rejected() {
        assert!(LevelScheme::new(0, 4).is_err());
        assert!(LevelScheme::new(6, 0).is_err());
    }

    #[test]
    fn sr88_subset_closed_under_decay() {
        let s = LevelScheme::sr88();
        assert_eq!(s.local_dim(), 4);
        // each retained excited sublevel decays entirely within the subset
        for (ei, &me2) in s.excited_m2().iter().enumerate() {
            let mut total = 0.0;
            for q in [-1, 0, 1] {
                for (gi, &n2) in s.ground_m2().iter().enumerate() {
                    if n2 + 2 * q == me2 {
                        total += s.cg(q, gi).powi(2);
                    }
                }
            }
            assert_abs_diff_eq!(total, 1.0, epsilon = 1e-12, );
            let _ = ei;
        }
        // frozen values
        assert_abs_diff_eq!(s.cg(1, 0), S23, epsilon = 1e-14); // g1 → e2
        assert_abs_diff_eq!(s.cg(1, 1), 1.0, epsilon = 1e-14); // g2 → e3
        assert_abs_diff_eq!(s.cg(0, 1), S3, epsilon = 1e-14); // g2 → e2
    }

    #[test]
    fn cg_orthogonality() {
        // Σ_{m_g, q} |⟨F_g m_g; 1 q | F_e m_e⟩|² = 1 for every retained m_e
        for (fg2, fe2) in [(1, 1), (2, 2), (2, 4), (4, 6), (0, 2)] {
            let fe_range: Vec<i32> = (0..=fe2).map(|k| -fe2 + 2 * k).collect();
            for me2 in fe_range {
                let mut total = 0.0;
                for q in [-1i32, 0, 1] {
                    let n2 = me2 - 2 * q;
                    if n2.abs() <= fg2 {
                        total += clebsch_gordan(fg2, n2, 2, 2 * q, fe2, me2).powi(2);
                    }
                }
                assert_abs_diff_eq!(total, 1.0, epsilon = 1e-12);
            }
        }
    }
}
