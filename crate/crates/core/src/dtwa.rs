//! Discrete Truncated Wigner Approximation for the unitary XY model:
//! discrete phase-point sampling around |+x⟩^⊗N, per-trajectory classical
//! evolution, and ensemble estimators of the spin-wave observables with
//! symmetric-ordering correspondence.
//!
//! Sampling: s^x_i = +1 deterministically, s^y_i and s^z_i independent
//! uniform ±1, so |s_i|² = 3 exactly. Trajectory RNG streams are
//! counter-based (ChaCha8 with the trajectory index as the stream), making
//! every estimate independent of execution order and thread count; the
//! parallel reduction runs over fixed-size chunks folded in index order.
//!
//! The second-moment estimators subtract each trajectory's t = 0 value and
//! add back the exact vacuum moment, which removes most of the sampling
//! variance of the initial distribution without biasing the estimate.

use crate::error::{Error, Result};
use crate::geometry::ArrayGeometry;
use crate::integrate::Dopri5;
use crate::xymodel::XYModel;
use ndarray::Array1;
use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

/// Trajectories per work chunk; fixed so reductions are deterministic.
const CHUNK: usize = 64;

/// Handle to a reproducible trajectory ensemble. Spins are generated on
/// demand from (master seed, trajectory index).
#[derive(Clone, Debug)]
pub struct TrajectoryEnsemble {
    pub n_atoms: usize,
    pub n_traj: usize,
    pub seed: u64,
}

/// Initial discrete phase-point sample of one trajectory (flat
/// [s^x, s^y, s^z] per atom).
pub fn sample_spins(n_atoms: usize, seed: u64, traj: u64) -> Array1<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(traj);
    let mut s = Array1::zeros(3 * n_atoms);
    for i in 0..n_atoms {
        s[3 * i] = 1.0;
        s[3 * i + 1] = if rng.next_u32() & 1 == 0 { 1.0 } else { -1.0 };
        s[3 * i + 2] = if rng.next_u32() & 1 == 0 { 1.0 } else { -1.0 };
    }
    s
}

/// Build the ensemble handle for the x-polarized initial product state.
pub fn sample_initial(geom: &ArrayGeometry, n_traj: usize, seed: u64) -> Result<TrajectoryEnsemble> {
    if n_traj == 0 {
        return Err(Error::Invalid("n_traj must be >= 1".into()));
    }
    Ok(TrajectoryEnsemble {
        n_atoms: geom.n(),
        n_traj,
        seed,
    })
}

impl TrajectoryEnsemble {
    pub fn spins(&self, traj: usize) -> Array1<f64> {
        sample_spins(self.n_atoms, self.seed, traj as u64)
    }
}

/// Integrate one trajectory, returning the spins at every grid time.
pub fn evolve_trajectory(
    xy: &XYModel,
    spins0: Array1<f64>,
    t_grid: &[f64],
    rtol: f64,
    atol: f64,
) -> Result<Vec<Array1<f64>>> {
    let stepper = Dopri5 {
        rtol,
        atol,
        ..Default::default()
    };
    let mut path = Vec::with_capacity(t_grid.len());
    stepper.integrate_grid(
        |_t, y: &Array1<f64>, out: &mut Array1<f64>| {
            xy.classical_rhs(y.as_slice().unwrap(), out.as_slice_mut().unwrap());
        },
        t_grid,
        spins0,
        |_t, y| path.push(y.clone()),
    )?;
    Ok(path)
}

/// Options for ensemble evolution.
#[derive(Clone, Copy, Debug)]
pub struct DtwaOpts {
    pub rtol: f64,
    pub atol: f64,
}

impl Default for DtwaOpts {
    fn default() -> Self {
        Self {
            rtol: 1e-8,
            atol: 1e-10,
        }
    }
}

/// Mean and standard error of one estimator.
#[derive(Clone, Copy, Debug, Default)]
pub struct Estimate {
    pub mean: f64,
    pub sem: f64,
}

/// Per-mode time series of the spin-wave estimators.
#[derive(Clone, Debug)]
pub struct DtwaModeSeries {
    pub k: [f64; 2],
    /// n_k(t) = (⟨S̃_z²⟩ + ⟨S̃_y²⟩)/N − 1/2, baseline-subtracted.
    pub n_k: Vec<Estimate>,
    /// ⟨S̃²_φ(k)⟩ for each requested φ, per time: [time][phi].
    pub s2_phi: Vec<Vec<Estimate>>,
}

/// Ensemble estimators over a time grid.
#[derive(Clone, Debug)]
pub struct DtwaRun {
    pub t_grid: Vec<f64>,
    pub modes: Vec<DtwaModeSeries>,
    /// ⟨S_x⟩(t).
    pub sx: Vec<Estimate>,
    /// max_traj max_i ||s_i| − √3| over the run.
    pub max_norm_drift: f64,
    /// max_traj |E(t) − E(0)| / scale with scale = max(|E(0)|, ‖C‖_F).
    pub max_energy_drift: f64,
}

struct Accum {
    // per (time, mode): Σ and Σ² of the baseline-subtracted v = (S̃z²+S̃y²)/N
    v_sum: Vec<f64>,
    v_sum2: Vec<f64>,
    // per (time, mode, phi): Σ and Σ² of baseline-subtracted S̃_φ²
    s2_sum: Vec<f64>,
    s2_sum2: Vec<f64>,
    // per time: Σ and Σ² of S_x
    sx_sum: Vec<f64>,
    sx_sum2: Vec<f64>,
    norm_drift: f64,
    energy_drift: f64,
    count: usize,
}

impl Accum {
    fn new(n_t: usize, n_k: usize, n_phi: usize) -> Self {
        Self {
            v_sum: vec![0.0; n_t * n_k],
            v_sum2: vec![0.0; n_t * n_k],
            s2_sum: vec![0.0; n_t * n_k * n_phi],
            s2_sum2: vec![0.0; n_t * n_k * n_phi],
            sx_sum: vec![0.0; n_t],
            sx_sum2: vec![0.0; n_t],
            norm_drift: 0.0,
            energy_drift: 0.0,
            count: 0,
        }
    }

    fn merge(&mut self, o: &Accum) {
        for (a, b) in self.v_sum.iter_mut().zip(&o.v_sum) {
            *a += b;
        }
        for (a, b) in self.v_sum2.iter_mut().zip(&o.v_sum2) {
            *a += b;
        }
        for (a, b) in self.s2_sum.iter_mut().zip(&o.s2_sum) {
            *a += b;
        }
        for (a, b) in self.s2_sum2.iter_mut().zip(&o.s2_sum2) {
            *a += b;
        }
        for (a, b) in self.sx_sum.iter_mut().zip(&o.sx_sum) {
            *a += b;
        }
        for (a, b) in self.sx_sum2.iter_mut().zip(&o.sx_sum2) {
            *a += b;
        }
        self.norm_drift = self.norm_drift.max(o.norm_drift);
        self.energy_drift = self.energy_drift.max(o.energy_drift);
        self.count += o.count;
    }
}

/// (S̃_z(k), S̃_y(k)) of a classical configuration.
fn spinwave_pair(spins: &[f64], cos_k: &[f64], sin_k: &[f64]) -> (f64, f64) {
    let n = cos_k.len();
    let mut sz = 0.0;
    let mut sy = 0.0;
    for i in 0..n {
        let (c, s) = (cos_k[i], sin_k[i]);
        sz += spins[3 * i + 2] * c + spins[3 * i + 1] * s;
        sy += spins[3 * i + 1] * c - spins[3 * i + 2] * s;
    }
    (0.5 * sz, 0.5 * sy)
}

/// Evolve the ensemble and accumulate spin-wave estimators at each grid time
/// for the requested modes and phase-space angles.
pub fn evolve_ensemble(
    xy: &XYModel,
    geom: &ArrayGeometry,
    ens: &TrajectoryEnsemble,
    t_grid: &[f64],
    k_modes: &[[f64; 2]],
    phis: &[f64],
    opts: &DtwaOpts,
) -> Result<DtwaRun> {
    if ens.n_atoms != geom.n() || xy.n != geom.n() {
        return Err(Error::DimensionMismatch("ensemble/geometry/model".into()));
    }
    let n = geom.n();
    let n_t = t_grid.len();
    let n_k = k_modes.len();
    let n_phi = phis.len();
    // phase tables per mode
    let tables: Vec<(Vec<f64>, Vec<f64>)> = k_modes
        .iter()
        .map(|k| {
            let cos_k: Vec<f64> = geom
                .positions()
                .iter()
                .map(|p| (k[0] * p[0] + k[1] * p[2]).cos())
                .collect();
            let sin_k: Vec<f64> = geom
                .positions()
                .iter()
                .map(|p| (k[0] * p[0] + k[1] * p[2]).sin())
                .collect();
            (cos_k, sin_k)
        })
        .collect();
    let cphi: Vec<f64> = phis.iter().map(|p| p.cos()).collect();
    let sphi: Vec<f64> = phis.iter().map(|p| p.sin()).collect();

    let coupling_scale = {
        let mut s = 0.0;
        for i in 0..n {
            for j in 0..n {
                s += xy.cx[[i, j]].powi(2) + xy.cy[[i, j]].powi(2);
            }
        }
        s.sqrt()
    };

    let n_chunks = ens.n_traj.div_ceil(CHUNK);
    let chunk_results: Vec<Result<Accum>> = (0..n_chunks)
        .into_par_iter()
        .map(|chunk| {
            let lo = chunk * CHUNK;
            let hi = ((chunk + 1) * CHUNK).min(ens.n_traj);
            let mut acc = Accum::new(n_t, n_k, n_phi);
            let stepper = Dopri5 {
                rtol: opts.rtol,
                atol: opts.atol,
                ..Default::default()
            };
            // per-trajectory baseline values at t = 0
            let mut base_v = vec![0.0; n_k];
            let mut base_s2 = vec![0.0; n_k * n_phi];
            for traj in lo..hi {
                let s0 = ens.spins(traj);
                let e0 = xy.classical_energy(s0.as_slice().unwrap());
                let e_scale = e0.abs().max(coupling_scale).max(1e-300);
                let mut ti = 0usize;
                let mut worst_norm = 0.0f64;
                let mut worst_energy = 0.0f64;
                stepper.integrate_grid(
                    |_t, y: &Array1<f64>, out: &mut Array1<f64>| {
                        xy.classical_rhs(y.as_slice().unwrap(), out.as_slice_mut().unwrap());
                    },
                    t_grid,
                    s0,
                    |_t, y| {
                        let spins = y.as_slice().unwrap();
                        for (m, (ck, sk)) in tables.iter().enumerate() {
                            let (sz, sy) = spinwave_pair(spins, ck, sk);
                            let v = (sz * sz + sy * sy) / n as f64;
                            if ti == 0 {
                                base_v[m] = v;
                            }
                            let dv = v - base_v[m];
                            acc.v_sum[ti * n_k + m] += dv;
                            acc.v_sum2[ti * n_k + m] += dv * dv;
                            for p in 0..n_phi {
                                let sphi_val = -sz * cphi[p] + sy * sphi[p];
                                let s2 = sphi_val * sphi_val;
                                let slot = (ti * n_k + m) * n_phi + p;
                                if ti == 0 {
                                    base_s2[m * n_phi + p] = s2;
                                }
                                let ds = s2 - base_s2[m * n_phi + p];
                                acc.s2_sum[slot] += ds;
                                acc.s2_sum2[slot] += ds * ds;
                            }
                        }
                        let sx: f64 =
                            (0..n).map(|i| spins[3 * i]).sum::<f64>() * 0.5;
                        acc.sx_sum[ti] += sx;
                        acc.sx_sum2[ti] += sx * sx;
                        for i in 0..n {
                            let n2 = spins[3 * i].powi(2)
                                + spins[3 * i + 1].powi(2)
                                + spins[3 * i + 2].powi(2);
                            worst_norm = worst_norm.max((n2.sqrt() - 3.0f64.sqrt()).abs());
                        }
                        worst_energy = worst_energy
                            .max((xy.classical_energy(spins) - e0).abs() / e_scale);
                        ti += 1;
                    },
                )?;
                acc.norm_drift = acc.norm_drift.max(worst_norm);
                acc.energy_drift = acc.energy_drift.max(worst_energy);
                acc.count += 1;
            }
            Ok(acc)
        })
        .collect();

    let mut total = Accum::new(n_t, n_k, n_phi);
    for r in chunk_results {
        total.merge(&r?);
    }
    let nt_f = total.count as f64;
    let stat = |sum: f64, sum2: f64| -> Estimate {
        let mean = sum / nt_f;
        let var = ((sum2 - sum * sum / nt_f) / (nt_f - 1.0).max(1.0)).max(0.0);
        Estimate {
            mean,
            sem: (var / nt_f).sqrt(),
        }
    };

    // exact vacuum moments added back to the baseline-subtracted estimators
    let vac_v = 0.5; // (⟨S̃z²⟩+⟨S̃y²⟩)/N at t = 0
    let vac_s2 = n as f64 / 4.0; // ⟨S̃φ²⟩ at t = 0
    let mut modes = Vec::with_capacity(n_k);
    for (m, k) in k_modes.iter().enumerate() {
        let mut n_series = Vec::with_capacity(n_t);
        let mut s2_series = Vec::with_capacity(n_t);
        for ti in 0..n_t {
            let e = stat(total.v_sum[ti * n_k + m], total.v_sum2[ti * n_k + m]);
            n_series.push(Estimate {
                mean: e.mean + vac_v - 0.5,
                sem: e.sem,
            });
            let mut per_phi = Vec::with_capacity(n_phi);
            for p in 0..n_phi {
                let slot = (ti * n_k + m) * n_phi + p;
                let e = stat(total.s2_sum[slot], total.s2_sum2[slot]);
                per_phi.push(Estimate {
                    mean: e.mean + vac_s2,
                    sem: e.sem,
                });
            }
            s2_series.push(per_phi);
        }
        modes.push(DtwaModeSeries {
            k: *k,
            n_k: n_series,
            s2_phi: s2_series,
        });
    }
    let sx: Vec<Estimate> = (0..n_t)
        .map(|ti| stat(total.sx_sum[ti], total.sx_sum2[ti]))
        .collect();
    Ok(DtwaRun {
        t_grid: t_grid.to_vec(),
        modes,
        sx,
        max_norm_drift: total.norm_drift,
        max_energy_drift: total.energy_drift,
    })
}
