//! Second-order cumulant (Gaussian) closure of the dissipative XY model:
//! exact Heisenberg equations of motion for the means ⟨σ̂^α_i⟩ and pair
//! expectations ⟨σ̂^α_i σ̂^β_j⟩, with third cumulants set to zero.
//!
//! The equations are generated symbolically at model-build time by a small
//! Pauli-string engine: i[H, Ô] and the adjoint dissipator
//! Σ_{mn} γ_mn (2 Â_m† Ô Â_n − {Â_m†Â_n, Ô}) are expanded into Pauli strings
//! of weight ≤ 3, and weight-3 strings are closed as
//! ⟨abc⟩ = ⟨a⟩⟨bc⟩ + ⟨b⟩⟨ac⟩ + ⟨c⟩⟨ab⟩ − 2⟨a⟩⟨b⟩⟨c⟩. At N = 2 no weight-3
//! string exists, so the closure is exact there. Pair storage is kept for
//! i < j only, which enforces the (i,α) ↔ (j,β) symmetry identically.
//!
//! The jump set is the q = ±1 channels of the effective model (the q = 0
//! identity jump cancels; see the XY module notes); correlated i ≠ j rates are
//! included.

use crate::error::{Error, Result};
use crate::integrate::Dopri5;
use crate::xymodel::XYModel;
use crate::C64;
use ndarray::Array1;
use std::collections::HashMap;

/// Pauli axis as u8: 0 = x, 1 = y, 2 = z.
type Ax = u8;

/// Sorted-by-site Pauli string on distinct sites (empty = identity).
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
struct PString(Vec<(u16, Ax)>);

impl PString {
    fn identity() -> Self {
        PString(Vec::new())
    }

    fn single(site: usize, ax: Ax) -> Self {
        PString(vec![(site as u16, ax)])
    }

    fn weight(&self) -> usize {
        self.0.len()
    }
}

/// σ_a σ_b = δ_ab + i ε_abc σ_c: returns (phase, Some(c)) or (1, None) for
/// a = b.
fn pauli_mul(a: Ax, b: Ax) -> (C64, Option<Ax>) {
    if a == b {
        return (C64::new(1.0, 0.0), None);
    }
    let c = 3 - a - b;
    // ε_{abc}: +1 for cyclic (x,y,z)
    let eps = match (a, b) {
        (0, 1) | (1, 2) | (2, 0) => 1.0,
        _ => -1.0,
    };
    (C64::new(0.0, eps), Some(c))
}

/// Product of two strings (merge by site, Pauli algebra on shared sites).
fn mul_strings(a: &PString, b: &PString) -> (C64, PString) {
    let mut phase = C64::new(1.0, 0.0);
    let mut out = Vec::with_capacity(a.0.len() + b.0.len());
    let (mut i, mut j) = (0usize, 0usize);
    while i < a.0.len() && j < b.0.len() {
        let (sa, xa) = a.0[i];
        let (sb, xb) = b.0[j];
        if sa < sb {
            out.push((sa, xa));
            i += 1;
        } else if sb < sa {
            out.push((sb, xb));
            j += 1;
        } else {
            let (ph, c) = pauli_mul(xa, xb);
            phase *= ph;
            if let Some(c) = c {
                out.push((sa, c));
            }
            i += 1;
            j += 1;
        }
    }
    out.extend_from_slice(&a.0[i..]);
    out.extend_from_slice(&b.0[j..]);
    (phase, PString(out))
}

/// Operator as a Pauli-term map.
type Op = HashMap<PString, C64>;

fn op_add(into: &mut Op, s: PString, c: C64) {
    if c.norm() < 1e-300 {
        return;
    }
    let e = into.entry(s).or_insert(C64::new(0.0, 0.0));
    *e += c;
}

fn op_mul(a: &Op, b: &Op) -> Op {
    let mut out = Op::new();
    for (sa, ca) in a {
        for (sb, cb) in b {
            let (ph, s) = mul_strings(sa, sb);
            op_add(&mut out, s, ph * ca * cb);
        }
    }
    out
}

fn op_scale_add(into: &mut Op, other: &Op, scale: C64) {
    for (s, c) in other {
        op_add(into, s.clone(), c * scale);
    }
}

/// Flat state layout: [means: i·3 + α] then [pairs: rank(i,j)·9 + α_i·3 + α_j].
#[derive(Clone, Debug)]
pub struct CumulantLayout {
    pub n: usize,
}

impl CumulantLayout {
    pub fn new(n: usize) -> Self {
        Self { n }
    }

    pub fn len(&self) -> usize {
        3 * self.n + 9 * self.n * (self.n - 1) / 2
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    fn pair_rank(&self, i: usize, j: usize) -> usize {
        debug_assert!(i < j);
        i * self.n - i * (i + 1) / 2 + (j - i - 1)
    }

    pub fn mean_idx(&self, i: usize, ax: usize) -> usize {
        3 * i + ax
    }

    pub fn pair_idx(&self, i: usize, ai: usize, j: usize, aj: usize) -> usize {
        let (i, ai, j, aj) = if i < j { (i, ai, j, aj) } else { (j, aj, i, ai) };
        3 * self.n + self.pair_rank(i, j) * 9 + ai * 3 + aj
    }
}

/// State access helpers with the Pauli-algebra diagonal convention.
#[derive(Clone, Debug)]
pub struct CumulantState {
    pub layout: CumulantLayout,
    pub data: Array1<f64>,
}

impl CumulantState {
    /// Product state polarized along +x.
    pub fn x_polarized(n: usize) -> Self {
        let layout = CumulantLayout::new(n);
        let mut data = Array1::zeros(layout.len());
        for i in 0..n {
            data[layout.mean_idx(i, 0)] = 1.0;
        }
        for i in 0..n {
            for j in (i + 1)..n {
                data[layout.pair_idx(i, 0, j, 0)] = 1.0;
            }
        }
        Self { layout, data }
    }

    pub fn mean(&self, i: usize, ax: usize) -> f64 {
        self.data[self.layout.mean_idx(i, ax)]
    }

    /// Symmetrized ⟨(σ̂^α_i σ̂^β_j + σ̂^β_j σ̂^α_i)/2⟩; for i = j this is δ_αβ.
    pub fn corr_sym(&self, i: usize, ai: usize, j: usize, aj: usize) -> f64 {
        if i == j {
            if ai == aj {
                1.0
            } else {
                0.0
            }
        } else {
            self.data[self.layout.pair_idx(i, ai, j, aj)]
        }
    }
}

/// A closed-form evaluation reference for one Pauli string of weight ≤ 3.
#[derive(Clone, Copy, Debug)]
enum StringRef {
    Const,
    Single(usize),
    Pair(usize),
    /// Cumulant-closed triple: mean indices (a, b, c) and pair indices
    /// (bc, ac, ab).
    Triple([usize; 3], [usize; 3]),
}

#[derive(Clone, Debug)]
struct Program {
    /// Per state variable: (coefficient, string) terms of its derivative.
    instrs: Vec<Vec<(f64, StringRef)>>,
}

/// Cumulant equations of motion for one dissipative XY model.
#[derive(Clone, Debug)]
pub struct CumulantModel {
    pub layout: CumulantLayout,
    program: Program,
}

impl CumulantModel {
    /// Expand the Heisenberg-Lindblad equations symbolically.
    pub fn build(xy: &XYModel) -> Result<Self> {
        let n = xy.n;
        if n < 2 {
            return Err(Error::Invalid("cumulant model needs N >= 2".into()));
        }
        let layout = CumulantLayout::new(n);

        // Hamiltonian term list: unordered pairs with folded factor 2
        let mut h_terms: Vec<(f64, PString)> = Vec::new();
        for i in 0..n {
            for j in (i + 1)..n {
                for (ax, c) in [(0u8, xy.cx[[i, j]]), (1u8, xy.cy[[i, j]])] {
                    if c != 0.0 {
                        h_terms.push((
                            2.0 * c,
                            PString(vec![(i as u16, ax), (j as u16, ax)]),
                        ));
                    }
                }
            }
        }
        let h_op: Op = {
            let mut op = Op::new();
            for (c, s) in &h_terms {
                op_add(&mut op, s.clone(), C64::new(*c, 0.0));
            }
            op
        };

        // jump operators A_{i,q}: q = +1 → −κσ₋ = −κ(σx − iσy)/2,
        // q = −1 → −κσ₊ = −κ(σx + iσy)/2; index m = i·2 + (0 | 1)
        // slot 0 ↔ q = +1: −κσ₋ = −κσx/2 + iκσy/2
        // slot 1 ↔ q = −1: −κσ₊ = −κσx/2 − iκσy/2
        let jump = |i: usize, slot: usize, kappa: f64| -> Op {
            let ysign = if slot == 0 { 1.0 } else { -1.0 };
            let mut op = Op::new();
            op_add(&mut op, PString::single(i, 0), C64::new(-kappa / 2.0, 0.0));
            op_add(
                &mut op,
                PString::single(i, 1),
                C64::new(0.0, ysign * kappa / 2.0),
            );
            op
        };
        let jumps: Vec<Op> = (0..2 * n).map(|m| jump(m / 2, m % 2, xy.kappa)).collect();
        let jump_dags: Vec<Op> = jumps
            .iter()
            .map(|op| {
                // Pauli strings are Hermitian: dagger conjugates coefficients
                op.iter()
                    .map(|(s, c)| (s.clone(), c.conj()))
                    .collect::<Op>()
            })
            .collect();

        // observables to track
        let mut observables: Vec<(usize, PString)> = Vec::new();
        for i in 0..n {
            for ax in 0..3u8 {
                observables.push((layout.mean_idx(i, ax as usize), PString::single(i, ax)));
            }
        }
        for i in 0..n {
            for j in (i + 1)..n {
                for ai in 0..3u8 {
                    for aj in 0..3u8 {
                        observables.push((
                            layout.pair_idx(i, ai as usize, j, aj as usize),
                            PString(vec![(i as u16, ai), (j as u16, aj)]),
                        ));
                    }
                }
            }
        }

        let mut instrs = vec![Vec::new(); layout.len()];
        for (var, s) in &observables {
            let s_op: Op = {
                let mut op = Op::new();
                op_add(&mut op, s.clone(), C64::new(1.0, 0.0));
                op
            };
            let mut rhs = Op::new();
            // i[H, S]
            let hs = op_mul(&h_op, &s_op);
            let sh = op_mul(&s_op, &h_op);
            op_scale_add(&mut rhs, &hs, C64::new(0.0, 1.0));
            op_scale_add(&mut rhs, &sh, C64::new(0.0, -1.0));
            // dissipator: Σ γ_mn (2 A_m† S A_n − A_m†A_n S − S A_m†A_n)
            for m in 0..2 * n {
                for nn in 0..2 * n {
                    let g = xy.rates_pm[[m, nn]];
                    if g == 0.0 {
                        continue;
                    }
                    // skip channels that cannot touch S
                    let sites: Vec<u16> = s.0.iter().map(|&(st, _)| st).collect();
                    let ms = (m / 2) as u16;
                    let ns = (nn / 2) as u16;
                    if !sites.contains(&ms) && !sites.contains(&ns) {
                        continue;
                    }
                    let a_dag_s = op_mul(&jump_dags[m], &s_op);
                    let a_dag_s_a = op_mul(&a_dag_s, &jumps[nn]);
                    op_scale_add(&mut rhs, &a_dag_s_a, C64::new(2.0 * g, 0.0));
                    let a_dag_a = op_mul(&jump_dags[m], &jumps[nn]);
                    let ada_s = op_mul(&a_dag_a, &s_op);
                    let s_ada = op_mul(&s_op, &a_dag_a);
                    op_scale_add(&mut rhs, &ada_s, C64::new(-g, 0.0));
                    op_scale_add(&mut rhs, &s_ada, C64::new(-g, 0.0));
                }
            }
            // compile
            let mut compiled = Vec::new();
            for (string, coeff) in rhs {
                if coeff.norm() < 1e-14 {
                    continue;
                }
                if coeff.im.abs() > 1e-10 * coeff.re.abs().max(1e-30) && coeff.im.abs() > 1e-12 {
                    return Err(Error::Invalid(format!(
                        "non-real EOM coefficient {coeff} for a Hermitian observable"
                    )));
                }
                let sref = match string.weight() {
                    0 => StringRef::Const,
                    1 => {
                        let (site, ax) = string.0[0];
                        StringRef::Single(layout.mean_idx(site as usize, ax as usize))
                    }
                    2 => {
                        let (si, ai) = string.0[0];
                        let (sj, aj) = string.0[1];
                        StringRef::Pair(layout.pair_idx(
                            si as usize,
                            ai as usize,
                            sj as usize,
                            aj as usize,
                        ))
                    }
                    3 => {
                        let (sa, aa) = string.0[0];
                        let (sb, ab) = string.0[1];
                        let (sc, ac) = string.0[2];
                        let (ia, ib, ic) = (
                            layout.mean_idx(sa as usize, aa as usize),
                            layout.mean_idx(sb as usize, ab as usize),
                            layout.mean_idx(sc as usize, ac as usize),
                        );
                        let (pbc, pac, pab) = (
                            layout.pair_idx(sb as usize, ab as usize, sc as usize, ac as usize),
                            layout.pair_idx(sa as usize, aa as usize, sc as usize, ac as usize),
                            layout.pair_idx(sa as usize, aa as usize, sb as usize, ab as usize),
                        );
                        StringRef::Triple([ia, ib, ic], [pbc, pac, pab])
                    }
                    w => {
                        return Err(Error::Invalid(format!(
                            "unexpected Pauli-string weight {w} in the cumulant expansion"
                        )))
                    }
                };
                compiled.push((coeff.re, sref));
            }
            instrs[*var] = compiled;
        }
        Ok(Self {
            layout,
            program: Program { instrs },
        })
    }

    /// Exact one/two-point Heisenberg derivatives with the third-cumulant
    /// closure; writes the time derivative of the flat state into `out`.
    pub fn rhs(&self, data: &Array1<f64>, out: &mut Array1<f64>) {
        let eval = |r: &StringRef| -> f64 {
            match *r {
                StringRef::Const => 1.0,
                StringRef::Single(i) => data[i],
                StringRef::Pair(p) => data[p],
                StringRef::Triple([ia, ib, ic], [pbc, pac, pab]) => {
                    let (a, b, c) = (data[ia], data[ib], data[ic]);
                    a * data[pbc] + b * data[pac] + c * data[pab] - 2.0 * a * b * c
                }
            }
        };
        for (var, terms) in self.program.instrs.iter().enumerate() {
            let mut acc = 0.0;
            for (coeff, sref) in terms {
                acc += coeff * eval(sref);
            }
            out[var] = acc;
        }
    }

    /// Propagate the cumulant state over the grid.
    pub fn propagate<O: FnMut(f64, &CumulantState)>(
        &self,
        state0: CumulantState,
        t_grid: &[f64],
        rtol: f64,
        atol: f64,
        mut observer: O,
    ) -> Result<CumulantState> {
        let stepper = Dopri5 {
            rtol,
            atol,
            ..Default::default()
        };
        let layout = self.layout.clone();
        let data = stepper.integrate_grid(
            |_t, y: &Array1<f64>, out: &mut Array1<f64>| self.rhs(y, out),
            t_grid,
            state0.data,
            |t, y| {
                observer(
                    t,
                    &CumulantState {
                        layout: layout.clone(),
                        data: y.clone(),
                    },
                )
            },
        )?;
        Ok(CumulantState {
            layout: self.layout.clone(),
            data,
        })
    }
}

/// Spec-shaped free function: time derivatives of a cumulant state.
pub fn cumulant_rhs(model: &CumulantModel, state: &CumulantState) -> CumulantState {
    let mut out = Array1::zeros(state.data.len());
    model.rhs(&state.data, &mut out);
    CumulantState {
        layout: state.layout.clone(),
        data: out,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::drive::{DriveField, PolarizationBasis, PulseShape};
    use crate::geometry::{ArrayGeometry, Dimensionality};
    use crate::green::DipoleCouplings;
    use crate::hilbert::ProductBasis;
    use crate::master::{propagate, PropagateOpts};
    use crate::xymodel::{pauli_dense, x_polarized_state, Axis};
    use approx::assert_abs_diff_eq;
    use ndarray::Array2;

    fn xy_chain(n: usize, a: f64, rabi: f64, det: f64) -> (XYModel, ArrayGeometry) {
        let geom = ArrayGeometry::build_lattice(Dimensionality::Chain, n, a).unwrap();
        let pol = PolarizationBasis::standard();
        let coup = DipoleCouplings::build(&geom, &pol, 1.0).unwrap();
        let drive = DriveField::pi_polarized(rabi, det, PulseShape::Omega1).unwrap();
        (XYModel::from_couplings(&coup, &drive, &geom).unwrap(), geom)
    }

    #[test]
    fn pauli_algebra() {
        // σx σy = iσz etc.
        let (ph, c) = pauli_mul(0, 1);
        assert_eq!(c, Some(2));
        assert_abs_diff_eq!(ph.im, 1.0, epsilon = 1e-15);
        let (ph, c) = pauli_mul(1, 0);
        assert_eq!(c, Some(2));
        assert_abs_diff_eq!(ph.im, -1.0, epsilon = 1e-15);
        let (ph, c) = pauli_mul(2, 2);
        assert!(c.is_none());
        assert_abs_diff_eq!(ph.re, 1.0, epsilon = 1e-15);
        // string product across sites keeps ordering
        let a = PString(vec![(0, 0), (2, 1)]);
        let b = PString(vec![(1, 2), (2, 2)]);
        let (ph, s) = mul_strings(&a, &b);
        // site 2: σy σz = iσx
        assert_abs_diff_eq!(ph.im, 1.0, epsilon = 1e-15);
        assert_eq!(s, PString(vec![(0, 0), (1, 2), (2, 0)]));
    }

    #[test]
    fn zero_model_is_constant() {
        let n = 3;
        let xy = XYModel::from_parts(
            Array2::zeros((n, n)),
            Array2::zeros((n, n)),
            0.0,
            Array2::zeros((2 * n, 2 * n)),
        );
        let model = CumulantModel::build(&xy).unwrap();
        let s0 = CumulantState::x_polarized(n);
        let d = cumulant_rhs(&model, &s0);
        for v in d.data.iter() {
            assert_eq!(*v, 0.0);
        }
    }

    #[test]
    fn n2_exact_against_ed() {
        // no third spin exists at N = 2: the closure is exact and must match
        // dense ED of the same master equation to integrator tolerance
        let (xy, _geom) = xy_chain(2, 0.1, 0.1, -40.0);
        let model = CumulantModel::build(&xy).unwrap();
        let tau = xy.tau();
        let grid: Vec<f64> = (0..=20).map(|k| k as f64 * 0.1 * tau).collect();

        let mut cum_series: Vec<Vec<f64>> = Vec::new();
        model
            .propagate(
                CumulantState::x_polarized(2),
                &grid,
                1e-10,
                1e-12,
                |_, s| {
                    let mut row = Vec::new();
                    for i in 0..2 {
                        for ax in 0..3 {
                            row.push(s.mean(i, ax));
                        }
                    }
                    for ai in 0..3 {
                        for aj in 0..3 {
                            row.push(s.corr_sym(0, ai, 1, aj));
                        }
                    }
                    cum_series.push(row);
                },
            )
            .unwrap();

        // dense ED of the identical model
        let gen = xy.lindblad_generator();
        let basis = ProductBasis::new(2, 2);
        let psi0 = x_polarized_state(2);
        let rho0 = crate::hilbert::pure_density(&psi0);
        let paulis: Vec<Vec<Array2<C64>>> = (0..2)
            .map(|i| {
                [Axis::X, Axis::Y, Axis::Z]
                    .into_iter()
                    .map(|ax| pauli_dense(basis, i, ax))
                    .collect()
            })
            .collect();
        let mut ed_series: Vec<Vec<f64>> = Vec::new();
        propagate(
            rho0,
            &gen,
            PulseShape::Omega1,
            &grid,
            &PropagateOpts {
                rtol: 1e-10,
                atol: 1e-12,
                ..Default::default()
            },
            |_, rho| {
                let mut row = Vec::new();
                for i in 0..2 {
                    for ax in 0..3 {
                        row.push(
                            crate::hilbert::expectation(&rho.view(), &paulis[i][ax].view()).re,
                        );
                    }
                }
                for ai in 0..3 {
                    for aj in 0..3 {
                        let prod = paulis[0][ai].dot(&paulis[1][aj]);
                        row.push(crate::hilbert::expectation(&rho.view(), &prod.view()).re);
                    }
                }
                ed_series.push(row);
            },
        )
        .unwrap();

        assert_eq!(cum_series.len(), ed_series.len());
        let mut worst = 0.0f64;
        for (a, b) in cum_series.iter().zip(ed_series.iter()) {
            for (x, y) in a.iter().zip(b.iter()) {
                worst = worst.max((x - y).abs());
            }
        }
        assert!(worst < 1e-6, "cumulant N=2 deviation from ED: {worst}");
    }

    #[test]
    fn reflection_symmetry_of_chain() {
        // chain reflection i → N−1−i is a symmetry of the couplings: the
        // solution must be exactly symmetric
        let (xy, _) = xy_chain(3, 0.1, 0.1, -40.0);
        let model = CumulantModel::build(&xy).unwrap();
        let grid = [0.0, 0.05 * xy.tau(), 0.15 * xy.tau()];
        let s = model
            .propagate(CumulantState::x_polarized(3), &grid, 1e-10, 1e-12, |_, _| {})
            .unwrap();
        for ax in 0..3 {
            assert_abs_diff_eq!(s.mean(0, ax), s.mean(2, ax), epsilon = 1e-9);
        }
        for ai in 0..3 {
            for aj in 0..3 {
                assert_abs_diff_eq!(
                    s.corr_sym(0, ai, 1, aj),
                    s.corr_sym(2, ai, 1, aj),
                    epsilon = 1e-9
                );
            }
        }
    }

    #[test]
    fn unitary_cumulant_tracks_dtwa_short_time() {
        // with rates zeroed, cumulant and DTWA agree on ⟨σ^x⟩ at short times
        let (mut xy, geom) = xy_chain(3, 0.1, 0.1, -40.0);
        xy.rates_pm.fill(0.0);
        xy.kappa = 0.0;
        let model = CumulantModel::build(&xy).unwrap();
        let tau = xy.tau();
        let grid = [0.0, 0.05 * tau, 0.1 * tau];
        let mut sx_cum = Vec::new();
        model
            .propagate(CumulantState::x_polarized(3), &grid, 1e-10, 1e-12, |_, s| {
                sx_cum.push(0.5 * (s.mean(0, 0) + s.mean(1, 0) + s.mean(2, 0)));
            })
            .unwrap();
        let ens = crate::dtwa::sample_initial(&geom, 8000, 17).unwrap();
        let run = crate::dtwa::evolve_ensemble(
            &xy,
            &geom,
            &ens,
            &grid,
            &[],
            &[],
            &crate::dtwa::DtwaOpts::default(),
        )
        .unwrap();
        for ((c, d), _t) in sx_cum.iter().zip(run.sx.iter()).zip(grid.iter()) {
            let tol = 3.0 * d.sem + 1e-4;
            assert!(
                (c - d.mean).abs() < tol,
                "cumulant {c} vs dtwa {} ± {}",
                d.mean,
                d.sem
            );
        }
    }

    #[test]
    fn n2_ed_oracle_rhs_consistency() {
        // the symbolic RHS at t = 0 equals the ED generator's first
        // derivative of each observable
        let (xy, _) = xy_chain(2, 0.1, 0.1, -30.0);
        let model = CumulantModel::build(&xy).unwrap();
        let s0 = CumulantState::x_polarized(2);
        let d = cumulant_rhs(&model, &s0);

        let gen = xy.lindblad_generator();
        let basis = ProductBasis::new(2, 2);
        let rho0 = crate::hilbert::pure_density(&x_polarized_state(2));
        let mut drho = Array2::zeros((4, 4));
        let mut scratch = Array2::zeros((4, 4));
        gen.rhs_into(&rho0, true, &mut drho, &mut scratch);
        for i in 0..2 {
            for (axi, ax) in [Axis::X, Axis::Y, Axis::Z].into_iter().enumerate() {
                let op = pauli_dense(basis, i, ax);
                let expect = crate::hilbert::expectation(&drho.view(), &op.view()).re;
                assert_abs_diff_eq!(d.mean(i, axi), expect, epsilon = 1e-11);
            }
        }
        for ai in 0..3 {
            for aj in 0..3 {
                let op = pauli_dense(basis, 0, [Axis::X, Axis::Y, Axis::Z][ai])
                    .dot(&pauli_dense(basis, 1, [Axis::X, Axis::Y, Axis::Z][aj]));
                let expect = crate::hilbert::expectation(&drho.view(), &op.view()).re;
                assert_abs_diff_eq!(
                    d.data[d.layout.pair_idx(0, ai, 1, aj)],
                    expect,
                    epsilon = 1e-11
                );
            }
        }
    }
}
