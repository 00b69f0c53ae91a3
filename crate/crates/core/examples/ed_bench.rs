//! Split-step component timing and accuracy probe for the dim-1024 chain.

use dipolar_core::drive::{DriveField, PolarizationBasis, PulseShape};
use dipolar_core::geometry::{ArrayGeometry, Dimensionality};
use dipolar_core::green::DipoleCouplings;
use dipolar_core::levels::LevelScheme;
use dipolar_core::master::*;
use std::time::Instant;

fn main() {
    let n = 5;
    let scheme = LevelScheme::four_level();
    let geom = ArrayGeometry::build_lattice(Dimensionality::Chain, n, 0.1).unwrap();
    let pol = PolarizationBasis::standard();
    let coup = DipoleCouplings::build(&geom, &pol, 1.0).unwrap();
    let drive = DriveField::pi_polarized(0.1, -3.0, PulseShape::Omega1).unwrap();
    let gen = LindbladGenerator::build(&scheme, &geom, &coup, &drive);
    let rho0 = ground_superposition_density(&scheme, n);

    // accuracy probe: window [0, 6], dt = 0.5 vs 0.25 vs 0.125
    let grid = [0.0, 6.0];
    let mut results = Vec::new();
    for dt in [0.5, 0.25, 0.125] {
        let opts = SplitOpts {
            dt_target: dt,
            cal_tol: f64::INFINITY, // accept first candidate: probe raw dt
            cal_window: 1e-9,
            n_pos_checks: 0,
            ..Default::default()
        };
        let t0 = Instant::now();
        let r = propagate_split(rho0.clone(), &gen, PulseShape::Omega1, &grid, &opts, |_, _| {})
            .unwrap();
        println!("dt={dt}: w-window wall {:?}", t0.elapsed());
        results.push(r);
    }
    let d21 = results[0]
        .iter()
        .zip(results[1].iter())
        .map(|(a, b)| (a - b).norm())
        .fold(0.0, f64::max);
    let d32 = results[1]
        .iter()
        .zip(results[2].iter())
        .map(|(a, b)| (a - b).norm())
        .fold(0.0, f64::max);
    println!("t=6: |dt0.5 − dt0.25|max = {d21:.3e}   |dt0.25 − dt0.125|max = {d32:.3e}");
    println!(
        "trace dt=0.25 run: {:.3e}",
        (trace(&results[1]).re - 1.0).abs()
    );
}
