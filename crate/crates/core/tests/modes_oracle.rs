mod common;

use micromotion::equilibrium::{solve_equilibrium, IterationSettings};
use micromotion::modes::{solve_modes, ModeSettings};
use micromotion::TrapDrive;

#[test]
fn single_ion_exponent_matches_monodromy() {
    let drive = TrapDrive::diagonal(1.0, [0.0, 0.05, 0.02], [0.3, 0.0, 0.0]).unwrap();
    let traj = solve_equilibrium(&drive, 1, 3, &IterationSettings::default(), 0).unwrap();
    let modes = solve_modes(&traj, &drive, &ModeSettings::default()).unwrap();
    let oracle = common::mathieu_exponent(0.0, 0.3);
    assert!(modes.betas().iter().any(|b| (b - oracle).abs() < 1e-10), "{:?} vs {oracle}", modes.betas());
    let static_y = common::mathieu_exponent(0.05, 0.0);
    assert!(modes.betas().iter().any(|b| (b - static_y).abs() < 1e-10));
}

#[test]
fn near_degenerate_pair_matches_dense_floquet() {
    // slightly broken x/y symmetry splits the radial pairs
    let drive = TrapDrive::diagonal(1.0, [-0.015, -0.016, 0.004], [0.3, -0.3, 0.0]).unwrap();
    let traj = solve_equilibrium(&drive, 2, 6, &IterationSettings::default(), 3).unwrap();
    let modes = solve_modes(&traj, &drive, &ModeSettings { n_cut: 6, m_trunc: 6, ..ModeSettings::default() }).unwrap();
    assert!(!modes.unstable);
    let m = common::linear_monodromy(&|t| traj.positions(t), &drive.a, &drive.q, 4000);
    let mut oracle: Vec<f64> = m
        .complex_eigenvalues()
        .iter()
        .filter(|z| z.im >= 0.0)
        .map(|z| (z.re.clamp(-1.0, 1.0)).acos() / std::f64::consts::PI)
        .collect();
    oracle.sort_by(f64::total_cmp);
    let betas = modes.betas();
    assert_eq!(oracle.len(), betas.len());
    for (b, o) in betas.iter().zip(&oracle) {
        assert!((b - o).abs() < 1e-7, "beta {b} vs monodromy {o}");
    }
    let split = betas.windows(2).map(|w| w[1] - w[0]).fold(f64::INFINITY, f64::min);
    assert!(split > 1e-5, "pairs remain degenerate");
    assert!(modes.orthonormality_defect() < 1e-8);
}
