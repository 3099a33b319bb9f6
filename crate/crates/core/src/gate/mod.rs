//! Amplitude-modulated two-ion gate design under micromotion.
//!
//! All assembly runs in dimensionless time (`t / T0`, `T0 = 2 / w_rf`). Rabi
//! frequencies are carried as `Omega * T0`; [`PulseSequence`] converts back.
//! The laser carrier is referenced to the gate start, so the drive on ion `j`
//! is `sin(mu (t - t0) + phi_j(t))` and a start offset only moves the segment
//! boundaries relative to the RF phase.

mod assembly;
mod optimize;
mod robust;
mod scan;
pub mod static_limit;

use log::warn;
use nalgebra::Vector3;

pub use assembly::{build_coupling, build_gamma, CouplingMatrix, GammaMatrices};
pub use optimize::{evaluate_pulse, evaluate_sequence, optimize_pulse, GateReport, OptimizationProblem, PulseSequence};
pub use robust::{design_robust, detuning_sensitivity, RobustDesign, RobustSettings, RobustnessProblem, Sensitivity};
pub use scan::{scan_detuning, scan_t0, write_pulse_csv, write_report, write_scan_csv, write_t0_csv, ScanRow, T0Row};

use crate::config::{Config, LaserConfig, ThermalSpectrum, TruncationSettings};
use crate::equilibrium::EquilibriumTrajectory;
use crate::error::{Error, Result};
use crate::modes::ModeSet;
use crate::oscint::{ModulationSpec, PhaseSpec, SeriesBudget};
use crate::units::{build_units, lamb_dicke, IonSpecies, TrapDrive, UnitSystem};

/// Lamb-Dicke parameters above this trigger a warning.
pub const ETA_WARN: f64 = 0.3;

/// Evaluation path for the segment integrals.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Engine {
    /// Per-ion harmonic sums of the phase factor with closed-form segments.
    #[default]
    Spectral,
    /// Depth-first Jacobi-Anger series for every segment.
    Literal,
}

/// Per-mode data entering the gate.
#[derive(Debug, Clone, PartialEq)]
pub struct ModeCoupling {
    pub beta: f64,
    /// Mode frequency in rad/s.
    pub frequency: f64,
    pub eta: f64,
    pub nbar: f64,
    /// Sidebands `m.C_{2n,j}` for the two driven ions.
    pub modulation: [ModulationSpec; 2],
}

/// Immutable inputs for gate assembly.
#[derive(Debug, Clone, PartialEq)]
pub struct GateContext {
    pub units: UnitSystem,
    pub ions: (usize, usize),
    pub segments: usize,
    /// Gate time in units of `T0`.
    pub tau: f64,
    /// Detuning in units of `1 / T0`.
    pub mu: f64,
    /// Start offset in units of `T0`.
    pub t0: f64,
    /// Motional phase of the two driven ions.
    pub phases: [PhaseSpec; 2],
    pub modes: Vec<ModeCoupling>,
    pub budget: SeriesBudget,
    pub engine: Engine,
    /// Optional bound on `|Omega|` in rad/s.
    pub rabi_max: Option<f64>,
    pub phase_order: usize,
    pub ncut: usize,
}

impl GateContext {
    #[allow(clippy::too_many_arguments)]
    pub fn build(
        traj: &EquilibriumTrajectory,
        modes: &ModeSet,
        species: &IonSpecies,
        drive: &TrapDrive,
        laser: &LaserConfig,
        thermal: &ThermalSpectrum,
        truncation: &TruncationSettings,
    ) -> Result<Self> {
        modes.require_stable()?;
        laser.validate()?;
        truncation.validate()?;
        let n = traj.n_ions;
        if modes.n_ions() != n || modes.len() != 3 * n {
            return Err(Error::InvalidInput(format!(
                "mode set has {} modes for {} ions, expected {}",
                modes.len(),
                modes.n_ions(),
                3 * n
            )));
        }
        let (i, j) = laser.ions;
        if i >= n || j >= n || i == j {
            return Err(Error::InvalidInput(format!("driven ions {:?} invalid for {n} ions", laser.ions)));
        }
        let units = build_units(species, drive);
        let m: Vector3<f64> = laser.direction;
        let kl = laser.delta_k * units.length;

        let phase_order = truncation.phase_order.min(traj.order());
        let phase = |ion: usize| {
            let mut phi0 = laser.static_phase;
            if laser.phase_from_equilibrium {
                phi0 += kl * m.dot(&traj.b[0][ion]);
            }
            let harmonics = (1..=phase_order).map(|l| 2.0 * kl * m.dot(&traj.b[l][ion])).collect();
            PhaseSpec::new(phi0, harmonics)
        };

        let mut couplings = Vec::with_capacity(modes.len());
        for (k, mode) in modes.modes.iter().enumerate() {
            let frequency = mode.beta * units.frequency;
            let eta = lamb_dicke(laser.delta_k, species.mass, frequency);
            if !(eta <= 1.0) {
                return Err(Error::InvalidInput(format!(
                    "Lamb-Dicke parameter {eta:.3} of mode {k} exceeds 1"
                )));
            }
            if eta > ETA_WARN {
                warn!("mode {k}: Lamb-Dicke parameter {eta:.3} is above {ETA_WARN}");
            }
            let ncut = truncation.ncut.min(mode.n_cut()) as i64;
            let side = |ion: usize| {
                let amps = (-ncut..=ncut)
                    .map(|s| {
                        let c = mode.c_at(s);
                        m.x * c[3 * ion] + m.y * c[3 * ion + 1] + m.z * c[3 * ion + 2]
                    })
                    .collect();
                ModulationSpec { amplitudes: amps }
            };
            couplings.push(ModeCoupling {
                beta: mode.beta,
                frequency,
                eta,
                nbar: thermal.occupation(frequency),
                modulation: [side(i), side(j)],
            });
        }

        Ok(Self {
            units,
            ions: laser.ions,
            segments: laser.segments,
            tau: laser.gate_time / units.time,
            mu: laser.detuning * units.time,
            t0: laser.t0 / units.time,
            phases: [phase(i), phase(j)],
            modes: couplings,
            budget: SeriesBudget::new(truncation.precision, truncation.bessel_cutoff),
            engine: Engine::default(),
            rabi_max: laser.rabi_max,
            phase_order,
            ncut: truncation.ncut,
        })
    }

    pub fn from_config(traj: &EquilibriumTrajectory, modes: &ModeSet, config: &Config) -> Result<Self> {
        Self::build(traj, modes, &config.species, &config.drive, &config.laser, &config.thermal, &config.truncation)
    }

    pub fn n_modes(&self) -> usize {
        self.modes.len()
    }

    /// Segment length in units of `T0`.
    pub fn segment_length(&self) -> f64 {
        self.tau / self.segments as f64
    }

    /// `[t_start, t_end]` of segment `p` (zero-based), in units of `T0`.
    pub fn segment(&self, p: usize) -> (f64, f64) {
        let d = self.segment_length();
        (self.t0 + p as f64 * d, self.t0 + (p + 1) as f64 * d)
    }

    /// Phase with the carrier reference folded into `phi0`.
    pub(crate) fn carrier_phase(&self, slot: usize) -> PhaseSpec {
        let p = &self.phases[slot];
        p.with_phi0(p.phi0 - self.mu * self.t0)
    }

    pub fn with_engine(&self, engine: Engine) -> Self {
        Self { engine, ..self.clone() }
    }

    /// Detuning in rad/s.
    pub fn with_detuning(&self, mu: f64) -> Self {
        Self { mu: mu * self.units.time, ..self.clone() }
    }

    /// Start offset in s.
    pub fn with_t0(&self, t0: f64) -> Self {
        Self { t0: t0 / self.units.time, ..self.clone() }
    }

    pub fn detuning(&self) -> f64 {
        self.mu / self.units.time
    }

    pub fn start_offset(&self) -> f64 {
        self.t0 * self.units.time
    }

    /// Copy keeping phase harmonics `1..=phase_order` and sidebands `|n| <= ncut`.
    pub fn truncated(&self, phase_order: usize, ncut: usize) -> Self {
        let mut out = self.clone();
        out.phases = [self.phases[0].truncated(phase_order), self.phases[1].truncated(phase_order)];
        for m in &mut out.modes {
            m.modulation = [m.modulation[0].truncated(ncut), m.modulation[1].truncated(ncut)];
        }
        out.phase_order = phase_order.min(self.phase_order);
        out.ncut = ncut.min(self.ncut);
        out
    }
}

#[cfg(test)]
pub(crate) mod testutil {
    use super::*;
    use crate::equilibrium::{refine_fourier, IterationSettings};
    use crate::modes::{solve_modes, ModeSettings};
    use std::f64::consts::PI;

    pub fn laser(n_seg: usize, gate_time: f64, detuning: f64) -> LaserConfig {
        LaserConfig {
            delta_k: 4.0 * PI / 355e-9,
            direction: Vector3::new(1.0, 0.0, 0.0),
            detuning,
            gate_time,
            segments: n_seg,
            ions: (0, 1),
            static_phase: 0.0,
            phase_from_equilibrium: false,
            t0: 0.0,
            rabi_max: None,
        }
    }

    /// Static two-ion axial pair with `Q = 0`.
    pub fn static_pair(n_seg: usize) -> GateContext {
        let drive = TrapDrive::diagonal(2.0 * PI * 50e6, [0.02, 0.025, 0.004], [0.0, 0.0, 0.0]).unwrap();
        let d = (8.0f64 / 0.004).cbrt() * 0.5;
        let seed = EquilibriumTrajectory::from_static(
            vec![Vector3::new(0.0, 0.0, -d), Vector3::new(0.0, 0.0, d)],
            2,
        );
        let traj = refine_fourier(&seed, &drive, &IterationSettings::default()).unwrap();
        let modes = solve_modes(&traj, &drive, &ModeSettings { n_cut: 2, m_trunc: 2, ..Default::default() }).unwrap();
        let mut l = laser(n_seg, 40e-6, 2.0 * PI * 3.1e6);
        l.direction = Vector3::new(0.6, 0.0, 0.8);
        let species = IonSpecies::ytterbium_171();
        let trunc = TruncationSettings { fourier_order: 2, phase_order: 2, ncut: 2, precision: 1e-12, bessel_cutoff: 30 };
        GateContext::build(&traj, &modes, &species, &drive, &l, &ThermalSpectrum::Doppler { linewidth: 2.0 * PI * 20e6 }, &trunc)
            .unwrap()
    }
}

#[cfg(test)]
mod tests {
    use super::testutil::*;

    #[test]
    fn static_pair_has_no_phase_harmonics() {
        let ctx = static_pair(4);
        for p in &ctx.phases {
            assert!(p.harmonics.iter().all(|v| v.abs() < 1e-12));
        }
        for m in &ctx.modes {
            for s in &m.modulation {
                for n in [-2i64, -1, 1, 2] {
                    assert!(s.get(n).abs() < 1e-12);
                }
            }
            assert!(m.eta > 0.0 && m.eta < 0.3);
            assert!(m.nbar > 0.0);
        }
    }

    #[test]
    fn segments_tile_the_gate() {
        let ctx = static_pair(5).with_t0(1e-7);
        let (a0, _) = ctx.segment(0);
        let (_, b4) = ctx.segment(4);
        assert!((a0 - ctx.t0).abs() < 1e-12);
        assert!((b4 - a0 - ctx.tau).abs() < 1e-9);
        assert!((ctx.start_offset() - 1e-7).abs() < 1e-20);
    }

    #[test]
    fn truncation_only_shrinks() {
        let ctx = static_pair(3);
        let t = ctx.truncated(0, 0);
        assert_eq!(t.phases[0].order(), 0);
        assert_eq!(t.modes[0].modulation[0].ncut(), 0);
        let back = t.truncated(5, 5);
        assert_eq!(back.modes[0].modulation[0].ncut(), 0);
    }
}
