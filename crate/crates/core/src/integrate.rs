//! Adaptive embedded Runge-Kutta integration (Dormand-Prince 5(4), FSAL)
//! generic over the state container. Density matrices, state vectors, and
//! flat real states all share one stepper.
//!
//! The right-hand side callback must fully overwrite its output buffer.
//! Sampling happens exactly at the requested grid times by clamping the
//! step, so no dense-output interpolation is involved.

use crate::error::{Error, Result};
use crate::C64;
use ndarray::{Array1, Array2};

/// State container usable by the stepper.
pub trait OdeState: Clone {
    /// Number of scalar (real) degrees of freedom, for the RMS error norm.
    fn n_scalars(&self) -> usize;
    /// self += a · other
    fn axpy(&mut self, a: f64, other: &Self);
    /// Scaled RMS norm of `err` relative to atol + rtol·max(|self|, |y_new|),
    /// computed entrywise.
    fn error_norm(&self, y_new: &Self, err: &Self, atol: f64, rtol: f64) -> f64;
}

impl OdeState for Array1<f64> {
    fn n_scalars(&self) -> usize {
        self.len()
    }
    fn axpy(&mut self, a: f64, other: &Self) {
        self.scaled_add(a, other);
    }
    fn error_norm(&self, y_new: &Self, err: &Self, atol: f64, rtol: f64) -> f64 {
        let mut acc = 0.0;
        for ((&e, &a), &b) in err.iter().zip(self.iter()).zip(y_new.iter()) {
            let sc = atol + rtol * a.abs().max(b.abs());
            let r = e / sc;
            acc += r * r;
        }
        (acc / self.len() as f64).sqrt()
    }
}

impl OdeState for Array1<C64> {
    fn n_scalars(&self) -> usize {
        2 * self.len()
    }
    fn axpy(&mut self, a: f64, other: &Self) {
        self.scaled_add(C64::new(a, 0.0), other);
    }
    fn error_norm(&self, y_new: &Self, err: &Self, atol: f64, rtol: f64) -> f64 {
        let mut acc = 0.0;
        for ((e, a), b) in err.iter().zip(self.iter()).zip(y_new.iter()) {
            let sc = atol + rtol * a.norm().max(b.norm());
            let r = e.norm() / sc;
            acc += r * r;
        }
        (acc / self.len() as f64).sqrt()
    }
}

impl OdeState for Array2<C64> {
    fn n_scalars(&self) -> usize {
        2 * self.len()
    }
    fn axpy(&mut self, a: f64, other: &Self) {
        self.scaled_add(C64::new(a, 0.0), other);
    }
    fn error_norm(&self, y_new: &Self, err: &Self, atol: f64, rtol: f64) -> f64 {
        let mut acc = 0.0;
        for ((e, a), b) in err.iter().zip(self.iter()).zip(y_new.iter()) {
            let sc = atol + rtol * a.norm().max(b.norm());
            let r = e.norm() / sc;
            acc += r * r;
        }
        (acc / self.len() as f64).sqrt()
    }
}

// Dormand-Prince 5(4) coefficients.
const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const B1: f64 = 35.0 / 384.0;
const B3: f64 = 500.0 / 1113.0;
const B4: f64 = 125.0 / 192.0;
const B5: f64 = -2187.0 / 6784.0;
const B6: f64 = 11.0 / 84.0;
const C2: f64 = 1.0 / 5.0;
const C3: f64 = 3.0 / 10.0;
const C4: f64 = 4.0 / 5.0;
const C5: f64 = 8.0 / 9.0;
// b − b̂ (error estimator weights, k7 included)
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

/// Adaptive Dormand-Prince 5(4) stepper.
#[derive(Clone, Copy, Debug)]
pub struct Dopri5 {
    pub rtol: f64,
    pub atol: f64,
    pub max_step: f64,
    pub initial_step: Option<f64>,
    pub max_steps: usize,
}

impl Default for Dopri5 {
    fn default() -> Self {
        Self {
            rtol: 1e-8,
            atol: 1e-10,
            max_step: f64::INFINITY,
            initial_step: None,
            max_steps: 200_000_000,
        }
    }
}

impl Dopri5 {
    /// Integrate from `t_grid[0]` to `t_grid.last()`, invoking `observer`
    /// with the state at every grid time (including the first). Returns the
    /// final state.
    pub fn integrate_grid<S, F, O>(
        &self,
        mut rhs: F,
        t_grid: &[f64],
        y0: S,
        mut observer: O,
    ) -> Result<S>
    where
        S: OdeState,
        F: FnMut(f64, &S, &mut S),
        O: FnMut(f64, &S),
    {
        assert!(t_grid.len() >= 1, "empty time grid");
        assert!(
            t_grid.windows(2).all(|w| w[1] > w[0]),
            "time grid must be strictly increasing"
        );
        let mut t = t_grid[0];
        observer(t, &y0);
        if t_grid.len() == 1 {
            return Ok(y0);
        }
        let t_end = *t_grid.last().unwrap();

        let mut y = y0;
        let mut k1 = y.clone();
        rhs(t, &y, &mut k1);
        let mut k2 = k1.clone();
        let mut k3 = k1.clone();
        let mut k4 = k1.clone();
        let mut k5 = k1.clone();
        let mut k6 = k1.clone();
        let mut k7 = k1.clone();
        let mut ytmp = y.clone();
        let mut ynew = y.clone();
        let mut err = y.clone();

        // h_nat is the controller's preferred step; each attempt may be
        // clipped down to land exactly on the next output time.
        let mut h_nat = self
            .initial_step
            .unwrap_or_else(|| initial_step_guess(&y, &k1, self.atol, self.rtol, t_end - t))
            .min(self.max_step);

        let mut next_out = 1usize;
        let mut n_steps = 0usize;

        while t < t_end {
            if n_steps >= self.max_steps {
                return Err(Error::StepSizeUnderflow { t, dt: h_nat });
            }
            let t_target = t_grid[next_out];
            let clipped = t + h_nat >= t_target;
            let h = if clipped { t_target - t } else { h_nat };
            if h <= t.abs().max(1.0) * 1e-14 {
                return Err(Error::StepSizeUnderflow { t, dt: h });
            }

            // stages
            stage(&mut ytmp, &y, &[(A21, &k1)], h);
            rhs(t + C2 * h, &ytmp, &mut k2);
            stage(&mut ytmp, &y, &[(A31, &k1), (A32, &k2)], h);
            rhs(t + C3 * h, &ytmp, &mut k3);
            stage(&mut ytmp, &y, &[(A41, &k1), (A42, &k2), (A43, &k3)], h);
            rhs(t + C4 * h, &ytmp, &mut k4);
            stage(
                &mut ytmp,
                &y,
                &[(A51, &k1), (A52, &k2), (A53, &k3), (A54, &k4)],
                h,
            );
            rhs(t + C5 * h, &ytmp, &mut k5);
            stage(
                &mut ytmp,
                &y,
                &[(A61, &k1), (A62, &k2), (A63, &k3), (A64, &k4), (A65, &k5)],
                h,
            );
            rhs(t + h, &ytmp, &mut k6);
            stage(
                &mut ynew,
                &y,
                &[(B1, &k1), (B3, &k3), (B4, &k4), (B5, &k5), (B6, &k6)],
                h,
            );
            rhs(t + h, &ynew, &mut k7);

            // error estimate
            stage_err(
                &mut err,
                &[
                    (E1, &k1),
                    (E3, &k3),
                    (E4, &k4),
                    (E5, &k5),
                    (E6, &k6),
                    (E7, &k7),
                ],
                h,
            );
            let en = y.error_norm(&ynew, &err, self.atol, self.rtol);
            n_steps += 1;

            if en <= 1.0 {
                t += h;
                std::mem::swap(&mut y, &mut ynew);
                std::mem::swap(&mut k1, &mut k7); // FSAL
                while next_out < t_grid.len() && t >= t_grid[next_out] - 1e-14 * t.abs().max(1.0) {
                    observer(t_grid[next_out], &y);
                    next_out += 1;
                }
                if next_out >= t_grid.len() {
                    break;
                }
                let fac = if en == 0.0 {
                    5.0
                } else {
                    (0.9 * en.powf(-0.2)).clamp(0.2, 5.0)
                };
                // a clipped step must not shrink the controller's preference
                h_nat = if clipped {
                    h_nat.max(h * fac).min(self.max_step)
                } else {
                    (h * fac).min(self.max_step)
                };
            } else {
                let fac = (0.9 * en.powf(-0.2)).clamp(0.1, 1.0);
                h_nat = h * fac;
            }
        }
        Ok(y)
    }
}

fn stage<S: OdeState>(out: &mut S, y: &S, terms: &[(f64, &S)], h: f64) {
    out.clone_from(y);
    for &(a, k) in terms {
        out.axpy(a * h, k);
    }
}

fn stage_err<S: OdeState>(err: &mut S, terms: &[(f64, &S)], h: f64) {
    // err = h·Σ e_i k_i, built from the first term to avoid a zero() method
    let (a0, k0) = terms[0];
    err.clone_from(k0);
    // err = a0·h·k0 + ...  (scale by cloning trick: err = k0; err += (a0·h−1)·k0)
    err.axpy(a0 * h - 1.0, k0);
    for &(a, k) in &terms[1..] {
        err.axpy(a * h, k);
    }
}

fn initial_step_guess<S: OdeState>(y: &S, f0: &S, atol: f64, rtol: f64, span: f64) -> f64 {
    // Hairer-style: h0 from the ratio of scaled norms of y and f(t0, y)
    let zero = {
        let mut z = y.clone();
        z.axpy(-1.0, y);
        z
    };
    let d0 = zero.error_norm(y, y, atol, rtol);
    let d1 = zero.error_norm(y, f0, atol, rtol);
    let h0 = if d1 <= 1e-14 {
        span * 1e-6
    } else {
        0.01 * d0 / d1
    };
    (h0.max(span * 1e-12)).min(span)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use ndarray::array;

    #[test]
    fn exponential_decay() {
        let stepper = Dopri5::default();
        let grid: Vec<f64> = (0..=10).map(|k| k as f64 * 0.5).collect();
        let mut samples = Vec::new();
        let y = stepper
            .integrate_grid(
                |_t, y: &Array1<f64>, out| {
                    out[0] = -y[0];
                },
                &grid,
                array![1.0],
                |t, y| samples.push((t, y[0])),
            )
            .unwrap();
        assert_eq!(samples.len(), 11);
        for &(t, v) in &samples {
            assert_abs_diff_eq!(v, (-t).exp(), epsilon = 1e-7);
        }
        assert_abs_diff_eq!(y[0], (-5.0f64).exp(), epsilon = 1e-7);
    }

    #[test]
    fn oscillator_phase_accuracy() {
        let stepper = Dopri5 {
            rtol: 1e-10,
            atol: 1e-12,
            ..Default::default()
        };
        let grid = [0.0, 50.0];
        let y = stepper
            .integrate_grid(
                |_t, y: &Array1<f64>, out| {
                    out[0] = y[1];
                    out[1] = -y[0];
                },
                &grid,
                array![1.0, 0.0],
                |_, _| {},
            )
            .unwrap();
        assert_abs_diff_eq!(y[0], 50.0f64.cos(), epsilon = 1e-7);
        assert_abs_diff_eq!(y[1], -50.0f64.sin(), epsilon = 1e-7);
    }

    #[test]
    fn complex_rotation() {
        let stepper = Dopri5::default();
        let grid = [0.0, 1.0, 2.0];
        let y = stepper
            .integrate_grid(
                |_t, y: &Array1<C64>, out| {
                    out[0] = C64::new(0.0, -1.0) * y[0];
                },
                &grid,
                array![C64::new(1.0, 0.0)],
                |_, _| {},
            )
            .unwrap();
        assert_abs_diff_eq!(y[0].re, 2.0f64.cos(), epsilon = 1e-8);
        assert_abs_diff_eq!(y[0].im, -(2.0f64.sin()), epsilon = 1e-8);
    }

    #[test]
    fn dense_grid_sampling_exact_times() {
        let stepper = Dopri5::default();
        let grid: Vec<f64> = (0..=100).map(|k| k as f64 * 0.01).collect();
        let mut count = 0;
        stepper
            .integrate_grid(
                |_t, y: &Array1<f64>, out| {
                    out[0] = y[0];
                },
                &grid,
                array![1.0],
                |t, y| {
                    assert_abs_diff_eq!(y[0], t.exp(), epsilon = 1e-8);
                    count += 1;
                },
            )
            .unwrap();
        assert_eq!(count, 101);
    }
}
