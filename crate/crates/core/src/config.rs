//! Laser, thermal and truncation settings, plus the sectioned config file.
//!
//! The file is TOML with the sections `[ion]`, `[trap]`, `[laser]`,
//! `[thermal]` and `[truncation]`. Every dimensional value is a string with an
//! explicit unit suffix such as `"50 MHz"` or `"355 nm"`. Cyclic frequency
//! units (Hz, kHz, MHz, GHz) are converted to angular frequency with a factor
//! of 2 pi; use `rad/s` to give an angular value directly.

use std::f64::consts::PI;
use std::path::Path;

use nalgebra::{Matrix3, Vector3};
use serde::Deserialize;
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::units::{delta_k_counterprop, IonSpecies, TrapDrive, CODATA};

#[derive(Debug, Clone, PartialEq)]
pub struct LaserConfig {
    /// Wavevector difference magnitude in 1/m.
    pub delta_k: f64,
    /// Unit vector along the wavevector difference.
    pub direction: Vector3<f64>,
    /// Detuning in rad/s.
    pub detuning: f64,
    /// Gate duration in s.
    pub gate_time: f64,
    pub segments: usize,
    /// Zero-based indices of the two driven ions.
    pub ions: (usize, usize),
    /// Static motional phase in rad.
    pub static_phase: f64,
    /// Add the equilibrium offset `dk m.B0` to the static phase.
    pub phase_from_equilibrium: bool,
    /// Gate start offset in s.
    pub t0: f64,
    /// Optional bound on segment Rabi frequencies in rad/s.
    pub rabi_max: Option<f64>,
}

impl LaserConfig {
    pub fn validate(&self) -> Result<()> {
        if self.ions.0 == self.ions.1 {
            return Err(Error::InvalidInput("driven ions must be distinct".into()));
        }
        if !(self.gate_time > 0.0) {
            return Err(Error::InvalidInput("gate time must be positive".into()));
        }
        if self.segments == 0 {
            return Err(Error::InvalidInput("segment count must be at least 1".into()));
        }
        if ((self.direction.norm() - 1.0).abs()) > 1e-12 {
            return Err(Error::InvalidInput(format!(
                "laser direction must be a unit vector (|m| = {})",
                self.direction.norm()
            )));
        }
        if !(self.delta_k >= 0.0) || !self.delta_k.is_finite() {
            return Err(Error::InvalidInput("delta_k must be finite and non-negative".into()));
        }
        Ok(())
    }
}

/// Temperature of the motional modes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ThermalSpectrum {
    Temperature(f64),
    /// Doppler limit `kB T = hbar Gamma / 2` with linewidth in rad/s.
    Doppler { linewidth: f64 },
}

impl ThermalSpectrum {
    pub fn temperature(&self) -> f64 {
        match *self {
            ThermalSpectrum::Temperature(t) => t,
            ThermalSpectrum::Doppler { linewidth } => CODATA.hbar * linewidth / (2.0 * CODATA.k_boltzmann),
        }
    }

    /// Mean Bose occupation for an angular mode frequency in rad/s.
    pub fn occupation(&self, mode_frequency: f64) -> f64 {
        let t = self.temperature();
        if t <= 0.0 {
            return 0.0;
        }
        let x = CODATA.hbar * mode_frequency / (CODATA.k_boltzmann * t);
        1.0 / x.exp_m1()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TruncationSettings {
    /// Equilibrium Fourier order M.
    pub fourier_order: usize,
    /// Motional-phase expansion order L.
    pub phase_order: usize,
    /// Mode sideband order n_cut.
    pub ncut: usize,
    /// Series precision.
    pub precision: f64,
    /// Bessel cutoff n_max.
    pub bessel_cutoff: usize,
}

impl Default for TruncationSettings {
    fn default() -> Self {
        Self { fourier_order: 5, phase_order: 5, ncut: 5, precision: 1e-8, bessel_cutoff: 20 }
    }
}

impl TruncationSettings {
    pub fn validate(&self) -> Result<()> {
        if !(self.precision > 0.0 && self.precision < 1.0) {
            return Err(Error::InvalidInput(format!(
                "precision must lie in (0, 1), got {}",
                self.precision
            )));
        }
        Ok(())
    }
}

/// Fully parsed configuration.
#[derive(Debug, Clone)]
pub struct Config {
    pub species: IonSpecies,
    pub ion_count: usize,
    pub drive: TrapDrive,
    pub laser: LaserConfig,
    pub thermal: ThermalSpectrum,
    pub truncation: TruncationSettings,
    /// Hex SHA-256 prefix of the source text.
    pub hash: String,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    ion: RawIon,
    trap: RawTrap,
    laser: RawLaser,
    thermal: RawThermal,
    #[serde(default)]
    truncation: RawTruncation,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawIon {
    #[serde(default = "default_label")]
    label: String,
    mass: String,
    #[serde(default = "default_charge")]
    charge: u32,
    count: usize,
}

fn default_label() -> String {
    "ion".into()
}

fn default_charge() -> u32 {
    1
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawTrap {
    rf_frequency: String,
    a: Option<[f64; 3]>,
    q: Option<[f64; 3]>,
    #[serde(rename = "A")]
    a_matrix: Option<[[f64; 3]; 3]>,
    #[serde(rename = "Q")]
    q_matrix: Option<[[f64; 3]; 3]>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawLaser {
    wavelength: Option<String>,
    delta_k: Option<String>,
    direction: [f64; 3],
    detuning: String,
    gate_time: String,
    segments: usize,
    ions: [usize; 2],
    #[serde(default)]
    static_phase: f64,
    #[serde(default)]
    phase_from_equilibrium: bool,
    t0: Option<String>,
    rabi_max: Option<String>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawThermal {
    temperature: Option<String>,
    doppler_linewidth: Option<String>,
}

#[derive(Debug, Deserialize, Default)]
#[serde(deny_unknown_fields)]
struct RawTruncation {
    fourier_order: Option<usize>,
    phase_order: Option<usize>,
    ncut: Option<usize>,
    precision: Option<f64>,
    bessel_cutoff: Option<usize>,
}

/// The physical kind expected for a quantity string.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum QuantityKind {
    Length,
    Time,
    AngularFrequency,
    Mass,
    Temperature,
    Wavenumber,
}

/// Parses `"<number> <unit>"` into SI units.
pub fn parse_quantity(text: &str, kind: QuantityKind) -> Result<f64> {
    let text = text.trim();
    let split = text
        .find(|c: char| c.is_whitespace())
        .ok_or_else(|| Error::Config(format!("`{text}` lacks a unit suffix")))?;
    let (num, unit) = text.split_at(split);
    let value: f64 = num
        .trim()
        .parse()
        .map_err(|_| Error::Config(format!("`{num}` is not a number")))?;
    let unit = unit.trim();
    let factor = match (kind, unit) {
        (QuantityKind::Length, "m") => 1.0,
        (QuantityKind::Length, "mm") => 1e-3,
        (QuantityKind::Length, "um" | "μm" | "µm") => 1e-6,
        (QuantityKind::Length, "nm") => 1e-9,
        (QuantityKind::Time, "s") => 1.0,
        (QuantityKind::Time, "ms") => 1e-3,
        (QuantityKind::Time, "us" | "μs" | "µs") => 1e-6,
        (QuantityKind::Time, "ns") => 1e-9,
        (QuantityKind::AngularFrequency, "rad/s") => 1.0,
        (QuantityKind::AngularFrequency, "Hz") => 2.0 * PI,
        (QuantityKind::AngularFrequency, "kHz") => 2.0 * PI * 1e3,
        (QuantityKind::AngularFrequency, "MHz") => 2.0 * PI * 1e6,
        (QuantityKind::AngularFrequency, "GHz") => 2.0 * PI * 1e9,
        (QuantityKind::Mass, "kg") => 1.0,
        (QuantityKind::Mass, "u" | "amu" | "Da") => CODATA.atomic_mass_unit,
        (QuantityKind::Temperature, "K") => 1.0,
        (QuantityKind::Temperature, "mK") => 1e-3,
        (QuantityKind::Temperature, "uK" | "μK" | "µK") => 1e-6,
        (QuantityKind::Wavenumber, "1/m") => 1.0,
        (QuantityKind::Wavenumber, "1/um") => 1e6,
        _ => {
            return Err(Error::Config(format!("unit `{unit}` is not valid for a {kind:?} quantity")))
        }
    };
    Ok(value * factor)
}

fn hash_text(text: &str) -> String {
    let digest = Sha256::digest(text.as_bytes());
    digest.iter().take(8).map(|b| format!("{b:02x}")).collect()
}

impl Config {
    pub fn from_path(path: impl AsRef<Path>) -> Result<Self> {
        let text = std::fs::read_to_string(path.as_ref())
            .map_err(|e| Error::Config(format!("reading {}: {e}", path.as_ref().display())))?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self> {
        let raw: RawConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;

        let species = IonSpecies::new(
            raw.ion.label,
            parse_quantity(&raw.ion.mass, QuantityKind::Mass)?,
            raw.ion.charge,
        )?;
        if raw.ion.count == 0 {
            return Err(Error::Config("ion count must be at least 1".into()));
        }

        let rf = parse_quantity(&raw.trap.rf_frequency, QuantityKind::AngularFrequency)?;
        let a = match (raw.trap.a, raw.trap.a_matrix) {
            (Some(d), None) => Matrix3::from_diagonal(&d.into()),
            (None, Some(m)) => Matrix3::from_fn(|i, j| m[i][j]),
            _ => return Err(Error::Config("give exactly one of trap.a or trap.A".into())),
        };
        let q = match (raw.trap.q, raw.trap.q_matrix) {
            (Some(d), None) => Matrix3::from_diagonal(&d.into()),
            (None, Some(m)) => Matrix3::from_fn(|i, j| m[i][j]),
            _ => return Err(Error::Config("give exactly one of trap.q or trap.Q".into())),
        };
        let drive = TrapDrive::new(rf, a, q)?;

        let l = raw.laser;
        let delta_k = match (l.wavelength, l.delta_k) {
            (Some(w), None) => delta_k_counterprop(parse_quantity(&w, QuantityKind::Length)?)?,
            (None, Some(k)) => parse_quantity(&k, QuantityKind::Wavenumber)?,
            _ => return Err(Error::Config("give exactly one of laser.wavelength or laser.delta_k".into())),
        };
        let laser = LaserConfig {
            delta_k,
            direction: Vector3::from(l.direction),
            detuning: parse_quantity(&l.detuning, QuantityKind::AngularFrequency)?,
            gate_time: parse_quantity(&l.gate_time, QuantityKind::Time)?,
            segments: l.segments,
            ions: (l.ions[0], l.ions[1]),
            static_phase: l.static_phase,
            phase_from_equilibrium: l.phase_from_equilibrium,
            t0: l.t0.map(|t| parse_quantity(&t, QuantityKind::Time)).transpose()?.unwrap_or(0.0),
            rabi_max: l
                .rabi_max
                .map(|r| parse_quantity(&r, QuantityKind::AngularFrequency))
                .transpose()?,
        };
        laser.validate()?;
        if laser.ions.0 >= raw.ion.count || laser.ions.1 >= raw.ion.count {
            return Err(Error::Config(format!(
                "driven ions {:?} out of range for {} ions",
                laser.ions, raw.ion.count
            )));
        }

        let thermal = match (raw.thermal.temperature, raw.thermal.doppler_linewidth) {
            (Some(t), None) => ThermalSpectrum::Temperature(parse_quantity(&t, QuantityKind::Temperature)?),
            (None, Some(g)) => ThermalSpectrum::Doppler {
                linewidth: parse_quantity(&g, QuantityKind::AngularFrequency)?,
            },
            _ => {
                return Err(Error::Config(
                    "give exactly one of thermal.temperature or thermal.doppler_linewidth".into(),
                ))
            }
        };

        let d = TruncationSettings::default();
        let t = raw.truncation;
        let truncation = TruncationSettings {
            fourier_order: t.fourier_order.unwrap_or(d.fourier_order),
            phase_order: t.phase_order.unwrap_or(d.phase_order),
            ncut: t.ncut.unwrap_or(d.ncut),
            precision: t.precision.unwrap_or(d.precision),
            bessel_cutoff: t.bessel_cutoff.unwrap_or(d.bessel_cutoff),
        };
        truncation.validate()?;

        Ok(Self {
            species,
            ion_count: raw.ion.count,
            drive,
            laser,
            thermal,
            truncation,
            hash: hash_text(text),
        })
    }
}
