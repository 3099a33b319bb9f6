//! Physical constants, ion species, trap drive and the dimensionless unit
//! system used by every solver.
//!
//! Solvers work in units where lengths are measured in
//! `L0 = (e^2 / 4 pi eps0 m w_rf^2)^(1/3)` and times in `T0 = 2 / w_rf`, so the
//! RF drive is `cos 2t` and one RF period has length `pi`.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use nalgebra::{Matrix2, Matrix3, Vector2};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// CODATA 2018 values in SI units.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhysicalConstants {
    pub hbar: f64,
    pub k_boltzmann: f64,
    pub elementary_charge: f64,
    pub vacuum_permittivity: f64,
    pub atomic_mass_unit: f64,
}

pub const CODATA: PhysicalConstants = PhysicalConstants {
    hbar: 1.054_571_817e-34,
    k_boltzmann: 1.380_649e-23,
    elementary_charge: 1.602_176_634e-19,
    vacuum_permittivity: 8.854_187_812_8e-12,
    atomic_mass_unit: 1.660_539_066_60e-27,
};

impl Default for PhysicalConstants {
    fn default() -> Self {
        CODATA
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IonSpecies {
    /// Mass in kg.
    pub mass: f64,
    /// Charge in units of the elementary charge.
    pub charge: u32,
    pub label: String,
}

impl IonSpecies {
    pub fn new(label: impl Into<String>, mass: f64, charge: u32) -> Result<Self> {
        if !(mass > 0.0) || !mass.is_finite() {
            return Err(Error::InvalidInput(format!("ion mass must be positive, got {mass}")));
        }
        if charge < 1 {
            return Err(Error::InvalidInput("ion charge must be at least 1".into()));
        }
        Ok(Self { mass, charge, label: label.into() })
    }

    /// Singly charged 171Yb+.
    pub fn ytterbium_171() -> Self {
        Self { mass: 170.936_325_8 * CODATA.atomic_mass_unit, charge: 1, label: "171Yb+".into() }
    }
}

/// RF trap drive: `R'' + (A - 2 Q cos 2t) R = Coulomb` in dimensionless form.
#[derive(Debug, Clone, PartialEq)]
pub struct TrapDrive {
    /// Angular RF frequency in rad/s.
    pub rf_frequency: f64,
    pub a: Matrix3<f64>,
    pub q: Matrix3<f64>,
}

const AXES: [char; 3] = ['x', 'y', 'z'];

impl TrapDrive {
    pub fn new(rf_frequency: f64, a: Matrix3<f64>, q: Matrix3<f64>) -> Result<Self> {
        if !(rf_frequency > 0.0) || !rf_frequency.is_finite() {
            return Err(Error::InvalidInput(format!(
                "rf frequency must be positive, got {rf_frequency}"
            )));
        }
        for (name, m) in [("A", &a), ("Q", &q)] {
            if m.iter().any(|v| !v.is_finite()) {
                return Err(Error::InvalidInput(format!("{name} matrix has non-finite entries")));
            }
            let scale = m.amax().max(1.0);
            if (m - m.transpose()).amax() > 1e-14 * scale {
                return Err(Error::InvalidInput(format!("{name} matrix is not symmetric")));
            }
        }
        Ok(Self { rf_frequency, a, q })
    }

    /// Diagonal `(a, q)` shorthand.
    pub fn diagonal(rf_frequency: f64, a: [f64; 3], q: [f64; 3]) -> Result<Self> {
        Self::new(
            rf_frequency,
            Matrix3::from_diagonal(&a.into()),
            Matrix3::from_diagonal(&q.into()),
        )
    }

    pub fn is_diagonal(&self) -> bool {
        let off = |m: &Matrix3<f64>| {
            (0..3).flat_map(|i| (0..3).map(move |j| (i, j))).filter(|(i, j)| i != j)
                .map(|(i, j)| m[(i, j)].abs()).fold(0.0, f64::max)
        };
        off(&self.a) == 0.0 && off(&self.q) == 0.0
    }

    /// Checks that a single ion is confined by the bare trap.
    ///
    /// For diagonal drives each axis is a scalar Mathieu equation and the
    /// offending axis is named. Otherwise the 6x6 monodromy is inspected.
    pub fn check_single_ion_stability(&self) -> Result<()> {
        if self.is_diagonal() {
            for (k, axis) in AXES.iter().enumerate() {
                let half_trace = mathieu_half_trace(self.a[(k, k)], self.q[(k, k)]);
                if !(half_trace.abs() < 1.0 - 1e-12) {
                    return Err(Error::Instability(format!(
                        "single-ion motion along {axis} is unstable (a = {}, q = {}, |tr M|/2 = {:.6})",
                        self.a[(k, k)],
                        self.q[(k, k)],
                        half_trace.abs()
                    )));
                }
            }
            return Ok(());
        }
        let monodromy = linear_monodromy_3d(&self.a, &self.q, 4000);
        let eig = monodromy.complex_eigenvalues();
        let max_modulus = eig.iter().map(|z| z.norm()).fold(0.0, f64::max);
        if max_modulus > 1.0 + 1e-8 {
            return Err(Error::Instability(format!(
                "single-ion motion is unstable (max Floquet multiplier modulus {max_modulus:.6})"
            )));
        }
        Ok(())
    }
}

/// Half trace of the one-period monodromy of `x'' + (a - 2q cos 2t) x = 0`.
pub(crate) fn mathieu_half_trace(a: f64, q: f64) -> f64 {
    let steps = 4000;
    let h = PI / steps as f64;
    let rhs = |t: f64, s: Vector2<f64>| Vector2::new(s[1], -(a - 2.0 * q * (2.0 * t).cos()) * s[0]);
    let mut m = Matrix2::identity();
    for col in 0..2 {
        let mut s = m.column(col).into_owned();
        let mut t = 0.0;
        for _ in 0..steps {
            let k1 = rhs(t, s);
            let k2 = rhs(t + 0.5 * h, s + 0.5 * h * k1);
            let k3 = rhs(t + 0.5 * h, s + 0.5 * h * k2);
            let k4 = rhs(t + h, s + h * k3);
            s += h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
            t += h;
        }
        m.set_column(col, &s);
    }
    0.5 * m.trace()
}

fn linear_monodromy_3d(a: &Matrix3<f64>, q: &Matrix3<f64>, steps: usize) -> nalgebra::Matrix6<f64> {
    use nalgebra::{Matrix6, Vector6};
    let h = PI / steps as f64;
    let rhs = |t: f64, s: &Vector6<f64>| {
        let x = s.fixed_rows::<3>(0).into_owned();
        let v = s.fixed_rows::<3>(3).into_owned();
        let acc = -(a - 2.0 * (2.0 * t).cos() * q) * x;
        let mut out = Vector6::zeros();
        out.fixed_rows_mut::<3>(0).copy_from(&v);
        out.fixed_rows_mut::<3>(3).copy_from(&acc);
        out
    };
    let mut m = Matrix6::identity();
    for col in 0..6 {
        let mut s = m.column(col).into_owned();
        let mut t = 0.0;
        for _ in 0..steps {
            let k1 = rhs(t, &s);
            let k2 = rhs(t + 0.5 * h, &(s + 0.5 * h * k1));
            let k3 = rhs(t + 0.5 * h, &(s + 0.5 * h * k2));
            let k4 = rhs(t + h, &(s + h * k3));
            s += h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
            t += h;
        }
        m.set_column(col, &s);
    }
    m
}

/// Derived scales; construct through [`build_units`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UnitSystem {
    /// Length unit in m.
    pub length: f64,
    /// Time unit in s, `2 / w_rf`.
    pub time: f64,
    /// Frequency unit `w_rf / 2` in rad/s.
    pub frequency: f64,
    /// Energy unit `m L0^2 / T0^2` in J.
    pub energy: f64,
    pub mass: f64,
}

pub fn build_units(species: &IonSpecies, drive: &TrapDrive) -> UnitSystem {
    let c = CODATA;
    let charge = species.charge as f64 * c.elementary_charge;
    let coulomb = charge * charge / (4.0 * PI * c.vacuum_permittivity);
    let w = drive.rf_frequency;
    let length = (coulomb / (species.mass * w * w)).cbrt();
    let time = 2.0 / w;
    UnitSystem {
        length,
        time,
        frequency: w / 2.0,
        energy: species.mass * length * length / (time * time),
        mass: species.mass,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Dimension {
    Length,
    Time,
    /// Angular frequency (rad/s).
    Frequency,
    Energy,
}

impl FromStr for Dimension {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "length" => Ok(Dimension::Length),
            "time" => Ok(Dimension::Time),
            "frequency" => Ok(Dimension::Frequency),
            "energy" => Ok(Dimension::Energy),
            other => Err(Error::UnknownDimension(other.to_string())),
        }
    }
}

impl fmt::Display for Dimension {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Dimension::Length => "length",
            Dimension::Time => "time",
            Dimension::Frequency => "frequency",
            Dimension::Energy => "energy",
        };
        f.write_str(s)
    }
}

impl UnitSystem {
    pub fn scale(&self, dim: Dimension) -> f64 {
        match dim {
            Dimension::Length => self.length,
            Dimension::Time => self.time,
            Dimension::Frequency => self.frequency,
            Dimension::Energy => self.energy,
        }
    }

    pub fn to_dimensionless(&self, value: f64, dim: Dimension) -> f64 {
        value / self.scale(dim)
    }

    pub fn to_physical(&self, value: f64, dim: Dimension) -> f64 {
        value * self.scale(dim)
    }

    /// Length of one RF period in dimensionless time.
    pub const RF_PERIOD: f64 = PI;
    /// The RF angular frequency in dimensionless units.
    pub const RF_FREQUENCY: f64 = 2.0;
}

/// Raman wavevector difference for counter-propagating beams, `2 * 2 pi / lambda`.
pub fn delta_k_counterprop(wavelength: f64) -> Result<f64> {
    if !(wavelength > 0.0) {
        return Err(Error::InvalidInput(format!("wavelength must be positive, got {wavelength}")));
    }
    Ok(4.0 * PI / wavelength)
}

/// `eta_k = dk * sqrt(hbar / (2 m w_k))`.
pub fn lamb_dicke(delta_k: f64, mass: f64, mode_frequency: f64) -> f64 {
    delta_k * (CODATA.hbar / (2.0 * mass * mode_frequency)).sqrt()
}
