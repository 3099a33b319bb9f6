use std::f64::consts::PI;

use micromotion::units::lamb_dicke;
use micromotion::{build_units, IonSpecies, ThermalSpectrum, TrapDrive};

// CODATA 2018 exact and recommended values, kept separate from the crate's table
const HBAR: f64 = 1.054_571_817e-34;
const KB: f64 = 1.380_649e-23;
const AMU: f64 = 1.660_539_066_60e-27;

#[test]
fn length_and_time_units_at_fifty_megahertz() {
    let drive = TrapDrive::diagonal(2.0 * PI * 50e6, [0.0; 3], [0.3, -0.3, 0.0]).unwrap();
    let u = build_units(&IonSpecies::ytterbium_171(), &drive);
    assert!((u.length * 1e6 - 0.20).abs() < 0.005, "L0 = {} um", u.length * 1e6);
    assert!((PI * u.time - 0.02e-6).abs() < 1e-15);
    assert!((u.time - 6.3662e-9).abs() < 1e-13);
}

#[test]
fn lamb_dicke_at_two_megahertz() {
    let mass = 170.936_325_8 * AMU;
    let dk = 4.0 * PI / 355e-9;
    let w = 2.0 * PI * 2e6;
    let oracle = dk * (HBAR / (2.0 * mass * w)).sqrt();
    let eta = lamb_dicke(dk, mass, w);
    assert!((eta / oracle - 1.0).abs() < 1e-8);
    assert!((eta - 0.136).abs() < 0.001);
}

#[test]
fn occupation_at_unit_ratio_and_doppler_temperature() {
    let w = 2.0 * PI * 1e6;
    let t = HBAR * w / KB;
    let n = ThermalSpectrum::Temperature(t).occupation(w);
    assert!((n - 1.0 / (std::f64::consts::E - 1.0)).abs() < 1e-6);
    assert!((n - 0.58198).abs() < 1e-5);
    let gamma = 2.0 * PI * 20e6;
    let doppler = ThermalSpectrum::Doppler { linewidth: gamma }.temperature();
    assert!((doppler / (HBAR * gamma / (2.0 * KB)) - 1.0).abs() < 1e-8);
}
