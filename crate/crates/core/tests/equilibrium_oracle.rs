mod common;

use micromotion::equilibrium::{refine_fourier, solve_equilibrium, EquilibriumTrajectory, IterationSettings};
use micromotion::TrapDrive;
use nalgebra::Vector3;

fn reference_drive() -> TrapDrive {
    TrapDrive::diagonal(1.0, [-0.015, -0.015, 0.03], [0.3, -0.3, 0.0]).unwrap()
}

/// `max |R'' + (A - 2 Q cos 2t) R - F(R)|` with derivatives of the cosine series.
fn eom_defect(traj: &EquilibriumTrajectory, drive: &TrapDrive, samples: usize) -> f64 {
    let mut worst: f64 = 0.0;
    for k in 0..samples {
        let t = std::f64::consts::PI * k as f64 / samples as f64;
        let r = traj.positions(t);
        let f = common::coulomb(&r);
        for i in 0..traj.n_ions {
            let mut acc = Vector3::zeros();
            for (n, row) in traj.b.iter().enumerate().skip(1) {
                let w = 2.0 * n as f64;
                acc -= row[i] * (2.0 * w * w * (w * t).cos());
            }
            let lhs = acc + (drive.a - drive.q * (2.0 * (2.0 * t).cos())) * r[i] - f[i];
            worst = worst.max(lhs.amax());
        }
    }
    worst
}

#[test]
fn axial_pair_spacing_from_force_balance() {
    let drive = reference_drive();
    let d = (8.0f64 / 0.03).cbrt();
    let seed = EquilibriumTrajectory::from_static(vec![Vector3::new(0.0, 0.0, -0.45 * d), Vector3::new(0.0, 0.0, 0.52 * d)], 5);
    let traj = refine_fourier(&seed, &drive, &IterationSettings::default()).unwrap();
    let r = traj.positions(0.3);
    assert!(((r[1].z - r[0].z) / d - 1.0).abs() < 1e-6);
    assert!((d - 6.4366).abs() < 1e-4);
    // axial force on each ion equals the trap restoring force a_z d / 2
    let f = common::coulomb(&r);
    assert!((f[1].z - 0.03 * d / 2.0).abs() < 1e-9);
    assert!((0.03 * d / 2.0 - 0.0966).abs() < 1e-4);
}

#[test]
fn four_ion_crystal_satisfies_equation_of_motion() {
    let drive = reference_drive();
    let traj = solve_equilibrium(&drive, 4, 8, &IterationSettings::default(), 7).unwrap();
    assert!(traj.converged);
    assert!(eom_defect(&traj, &drive, 2048) < 1e-8);
    assert!(traj.micromotion_amplitude() > 0.01);
}

#[test]
fn static_trap_gives_static_crystal() {
    let drive = TrapDrive::diagonal(1.0, [0.05, 0.06, 0.01], [0.0, 0.0, 0.0]).unwrap();
    let traj = solve_equilibrium(&drive, 3, 4, &IterationSettings::default(), 1).unwrap();
    assert!(traj.b.iter().skip(1).flatten().all(|v| v.amax() < 1e-12));
    assert!(eom_defect(&traj, &drive, 256) < 1e-8);
}
