//! Shared fixtures for the benches: a small crystal at the reference trap.

use std::f64::consts::PI;

use micromotion::equilibrium::{solve_equilibrium, EquilibriumTrajectory, IterationSettings};
use micromotion::gate::GateContext;
use micromotion::modes::{solve_modes, ModeSet, ModeSettings};
use micromotion::{IonSpecies, LaserConfig, ThermalSpectrum, TrapDrive, TruncationSettings};
use nalgebra::Vector3;

pub const RF: f64 = 2.0 * PI * 50e6;

pub fn drive() -> TrapDrive {
    TrapDrive::diagonal(RF, [-0.015, -0.015, 0.03], [0.3, -0.3, 0.0]).unwrap()
}

pub fn crystal(n: usize) -> (EquilibriumTrajectory, ModeSet) {
    let drive = drive();
    let traj = solve_equilibrium(&drive, n, 8, &IterationSettings::default(), 7).unwrap();
    let modes = solve_modes(&traj, &drive, &ModeSettings::default()).unwrap();
    (traj, modes)
}

pub fn laser(gate_time: f64, segments: usize, detuning_hz: f64) -> LaserConfig {
    LaserConfig {
        delta_k: 4.0 * PI / 355e-9,
        direction: Vector3::new(1.0, 0.0, 0.0),
        detuning: 2.0 * PI * detuning_hz,
        gate_time,
        segments,
        ions: (0, 1),
        static_phase: 0.0,
        phase_from_equilibrium: false,
        t0: 0.0,
        rabi_max: None,
    }
}

pub fn context(traj: &EquilibriumTrajectory, modes: &ModeSet, laser: &LaserConfig) -> GateContext {
    let truncation = TruncationSettings { fourier_order: 8, phase_order: 5, ncut: 5, precision: 1e-10, bessel_cutoff: 30 };
    GateContext::build(
        traj,
        modes,
        &IonSpecies::ytterbium_171(),
        &drive(),
        laser,
        &ThermalSpectrum::Doppler { linewidth: 2.0 * PI * 20e6 },
        &truncation,
    )
    .unwrap()
}
