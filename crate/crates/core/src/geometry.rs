//! Array geometries: 1D chains along X̂ and 2D square lattices in the X–Z
//! plane, with positions in units of the transition wavelength λ.

use crate::error::{Error, Result};

/// Lattice dimensionality. Chains run along X̂; square lattices live in the
/// X–Z plane (the quantization axis is Ẑ).
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Dimensionality {
    Chain,
    Square,
}

/// A finite Bravais array of point-like atoms.
#[derive(Clone, Debug)]
pub struct ArrayGeometry {
    positions: Vec<[f64; 3]>,
    lattice_constant: f64,
    dim: Dimensionality,
    side: usize,
}

impl ArrayGeometry {
    /// Generate a regular lattice: `n_per_side` sites along X̂ (1D) or an
    /// `n_per_side × n_per_side` square in the X–Z plane (2D), spacing `a`
    /// in units of λ. Site `j` of a square lattice sits at
    /// `a·(j mod L, 0, ⌊j/L⌋)`.
    pub fn build_lattice(dim: Dimensionality, n_per_side: usize, a: f64) -> Result<Self> {
        if n_per_side == 0 {
            return Err(Error::InvalidGeometry("n_per_side must be >= 1".into()));
        }
        if !(a > 0.0) {
            return Err(Error::InvalidGeometry(format!(
                "lattice constant must be positive, got {a}"
            )));
        }
        let positions = match dim {
            Dimensionality::Chain => (0..n_per_side).map(|i| [i as f64 * a, 0.0, 0.0]).collect(),
            Dimensionality::Square => (0..n_per_side * n_per_side)
                .map(|j| {
                    [
                        (j % n_per_side) as f64 * a,
                        0.0,
                        (j / n_per_side) as f64 * a,
                    ]
                })
                .collect(),
        };
        Ok(Self {
            positions,
            lattice_constant: a,
            dim,
            side: n_per_side,
        })
    }

    /// Construct from explicit positions (units of λ). Pairwise distances
    /// must be nonzero.
    pub fn from_positions(positions: Vec<[f64; 3]>) -> Result<Self> {
        if positions.is_empty() {
            return Err(Error::InvalidGeometry("empty position list".into()));
        }
        for i in 0..positions.len() {
            for j in (i + 1)..positions.len() {
                let d = displacement(positions[i], positions[j]);
                if norm(d) == 0.0 {
                    return Err(Error::InvalidGeometry(format!(
                        "coincident atoms {i} and {j}"
                    )));
                }
            }
        }
        Ok(Self {
            positions,
            lattice_constant: 0.0,
            dim: Dimensionality::Chain,
            side: 0,
        })
    }

    pub fn n(&self) -> usize {
        self.positions.len()
    }

    pub fn positions(&self) -> &[[f64; 3]] {
        &self.positions
    }

    pub fn position(&self, i: usize) -> [f64; 3] {
        self.positions[i]
    }

    pub fn lattice_constant(&self) -> f64 {
        self.lattice_constant
    }

    pub fn dimensionality(&self) -> Dimensionality {
        self.dim
    }

    /// Sites per side (N for chains, √N for squares); 0 for ad-hoc geometries.
    pub fn side(&self) -> usize {
        self.side
    }

    /// r_i − r_j.
    pub fn displacement(&self, i: usize, j: usize) -> [f64; 3] {
        displacement(self.positions[i], self.positions[j])
    }

    /// Index of the central atom (default bipartition subsystem A).
    pub fn central_site(&self) -> usize {
        match self.dim {
            Dimensionality::Chain => self.n() / 2,
            Dimensionality::Square => {
                let mid = self.side / 2;
                mid * self.side + mid
            }
        }
    }

    /// Reciprocal-grid modes k = 2πn/(L·a)·(X̂ or Ẑ components), n = 1..L,
    /// as (k_X, k_Z) pairs in units of rad/λ. 1D grids have k_Z = 0.
    pub fn reciprocal_modes(&self) -> Result<Vec<[f64; 2]>> {
        if self.side == 0 {
            return Err(Error::InvalidGeometry(
                "reciprocal grid requires a generated lattice".into(),
            ));
        }
        let l = self.side;
        let step = 2.0 * std::f64::consts::PI / (l as f64 * self.lattice_constant);
        let mut ks = Vec::new();
        match self.dim {
            Dimensionality::Chain => {
                for n in 1..=l {
                    ks.push([n as f64 * step, 0.0]);
                }
            }
            Dimensionality::Square => {
                for nx in 1..=l {
                    for nz in 1..=l {
                        ks.push([nx as f64 * step, nz as f64 * step]);
                    }
                }
            }
        }
        Ok(ks)
    }
}

pub(crate) fn displacement(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

pub(crate) fn norm(v: [f64; 3]) -> f64 {
    (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn chain_positions() {
        let g = ArrayGeometry::build_lattice(Dimensionality::Chain, 5, 0.1).unwrap();
        assert_eq!(g.n(), 5);
        for (i, p) in g.positions().iter().enumerate() {
            assert_eq!(p[0], i as f64 * 0.1);
            assert_eq!(p[1], 0.0);
            assert_eq!(p[2], 0.0);
        }
        assert_eq!(g.central_site(), 2);
    }

    #[test]
    fn square_positions() {
        let g = ArrayGeometry::build_lattice(Dimensionality::Square, 10, 0.1).unwrap();
        assert_eq!(g.n(), 100);
        // site j at a(j mod L, 0, j div L), bit-identical to the formula
        assert_eq!(g.position(23), [3.0 * 0.1, 0.0, 2.0 * 0.1]);
        assert_eq!(g.central_site(), 55);
    }

    #[test]
    fn single_site() {
        let g = ArrayGeometry::build_lattice(Dimensionality::Chain, 1, 0.1).unwrap();
        assert_eq!(g.n(), 1);
        assert_eq!(g.position(0), [0.0, 0.0, 0.0]);
    }

    #[test]
    fn rejects_bad_input() {
        assert!(ArrayGeometry::build_lattice(Dimensionality::Chain, 0, 0.1).is_err());
        assert!(ArrayGeometry::build_lattice(Dimensionality::Chain, 3, 0.0).is_err());
        assert!(ArrayGeometry::build_lattice(Dimensionality::Chain, 3, -1.0).is_err());
        assert!(
            ArrayGeometry::from_positions(vec![[0.0, 0.0, 0.0], [0.0, 0.0, 0.0]]).is_err()
        );
    }

    #[test]
    fn lattice_regeneration_is_bit_identical() {
        let a = ArrayGeometry::build_lattice(Dimensionality::Square, 7, 0.13).unwrap();
        let b = ArrayGeometry::build_lattice(Dimensionality::Square, 7, 0.13).unwrap();
        for (p, q) in a.positions().iter().zip(b.positions()) {
            assert_eq!(p, q);
        }
    }

    #[test]
    fn reciprocal_grid_convention() {
        let g = ArrayGeometry::build_lattice(Dimensionality::Chain, 4, 0.1).unwrap();
        let ks = g.reciprocal_modes().unwrap();
        assert_eq!(ks.len(), 4);
        let step = 2.0 * std::f64::consts::PI / 0.4;
        assert_abs_diff_eq!(ks[0][0], step, epsilon = 1e-12);
        // n = L/2 lands on the zone edge π/a
        assert_abs_diff_eq!(ks[1][0], std::f64::consts::PI / 0.1, epsilon = 1e-12);
    }
}
