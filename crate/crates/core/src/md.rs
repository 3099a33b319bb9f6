//! Direct integration of the nonlinear equation of motion, used as an
//! independent check of equilibrium trajectories and normal modes.

use std::f64::consts::PI;
use std::io::Write;

use nalgebra::Vector3;

use crate::coulomb::{coulomb_acceleration_into, min_distance};
use crate::equilibrium::EquilibriumTrajectory;
use crate::error::{Error, Result};
use crate::modes::ModeSet;
use crate::units::TrapDrive;

/// Distance below which two ions count as collided.
pub const COLLISION_DISTANCE: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq)]
pub struct IntegratorSettings {
    pub steps_per_period: usize,
    pub periods: usize,
    /// Record one sample every this many steps.
    pub record_every: usize,
}

impl Default for IntegratorSettings {
    fn default() -> Self {
        Self { steps_per_period: 1000, periods: 1000, record_every: 10 }
    }
}

impl IntegratorSettings {
    pub fn validate(&self) -> Result<()> {
        if self.steps_per_period < 100 {
            return Err(Error::InvalidInput(format!("need at least 100 steps per period, got {}", self.steps_per_period)));
        }
        if self.record_every == 0 {
            return Err(Error::InvalidInput("record_every must be positive".into()));
        }
        Ok(())
    }

    pub fn step(&self) -> f64 {
        PI / self.steps_per_period as f64
    }
}

/// Positions and velocities at time `t`.
#[derive(Debug, Clone, PartialEq)]
pub struct State {
    pub t: f64,
    pub r: Vec<Vector3<f64>>,
    pub v: Vec<Vector3<f64>>,
}

/// Fourth-order symplectic integrator: a triple-jump composition of the
/// kick-drift-kick map with time advanced in the drift.
#[derive(Debug)]
pub struct Integrator<'a> {
    drive: &'a TrapDrive,
    acc: Vec<Vector3<f64>>,
    coul: Vec<Vector3<f64>>,
}

const CBRT2: f64 = 1.259_921_049_894_873_2;
const W1: f64 = 1.0 / (2.0 - CBRT2);
const W0: f64 = -CBRT2 / (2.0 - CBRT2);

impl<'a> Integrator<'a> {
    pub fn new(drive: &'a TrapDrive, n_ions: usize) -> Self {
        Self { drive, acc: vec![Vector3::zeros(); n_ions], coul: vec![Vector3::zeros(); n_ions] }
    }

    fn kick(&mut self, s: &mut State, h: f64) -> Result<()> {
        coulomb_acceleration_into(&s.r, &mut self.coul).map_err(|e| match e {
            Error::Singularity(..) => Error::Collision { time: s.t, distance: 0.0 },
            other => other,
        })?;
        let m = self.drive.a - 2.0 * (2.0 * s.t).cos() * self.drive.q;
        for i in 0..s.r.len() {
            self.acc[i] = self.coul[i] - m * s.r[i];
            s.v[i] += h * self.acc[i];
        }
        Ok(())
    }

    fn leapfrog(&mut self, s: &mut State, h: f64) -> Result<()> {
        self.kick(s, 0.5 * h)?;
        for (r, v) in s.r.iter_mut().zip(&s.v) {
            *r += h * v;
        }
        s.t += h;
        self.kick(s, 0.5 * h)
    }

    /// One step of size `h`; negative `h` integrates backward.
    pub fn step(&mut self, s: &mut State, h: f64) -> Result<()> {
        self.leapfrog(s, W1 * h)?;
        self.leapfrog(s, W0 * h)?;
        self.leapfrog(s, W1 * h)
    }

    fn check_collision(s: &State) -> Result<()> {
        if let Some((d, _, _)) = min_distance(&s.r) {
            if d < COLLISION_DISTANCE {
                return Err(Error::Collision { time: s.t, distance: d });
            }
        }
        Ok(())
    }
}

/// Integrate for `settings.periods` RF periods, calling `record` on the
/// initial state and then every `record_every` steps.
pub fn integrate(
    initial: State,
    drive: &TrapDrive,
    settings: &IntegratorSettings,
    mut record: impl FnMut(&State),
) -> Result<State> {
    settings.validate()?;
    let mut s = initial;
    let t0 = s.t;
    let mut integ = Integrator::new(drive, s.r.len());
    Integrator::check_collision(&s)?;
    record(&s);
    let h = settings.step();
    let total = settings.steps_per_period * settings.periods;
    for k in 1..=total {
        integ.step(&mut s, h)?;
        if k % settings.record_every == 0 {
            s.t = t0 + k as f64 * h;
            Integrator::check_collision(&s)?;
            record(&s);
        }
    }
    s.t = t0 + total as f64 * h;
    Ok(s)
}

/// Real-amplitude excitation of one mode.
#[derive(Debug, Clone, PartialEq)]
pub struct ExcitationSpec {
    pub mode: usize,
    pub amplitude: f64,
}

/// One sample of the MD-versus-mode comparison for the probed coordinate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceRow {
    /// Time in RF periods.
    pub t_periods: f64,
    pub md: f64,
    pub modes: f64,
    pub difference: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct VerifyReport {
    /// Max over samples of the probed coordinate difference.
    pub max_deviation: f64,
    /// Max over samples and all coordinates.
    pub max_deviation_all: f64,
    pub trace: Vec<TraceRow>,
}

/// Excite one mode on top of the equilibrium orbit, integrate, and compare
/// the displacement with the linear mode prediction.
///
/// `probe` is the flat coordinate index `3 i + sigma` reported in the trace.
pub fn verify_mode(
    traj: &EquilibriumTrajectory,
    drive: &TrapDrive,
    modes: &ModeSet,
    exc: &ExcitationSpec,
    settings: &IntegratorSettings,
    probe: usize,
) -> Result<VerifyReport> {
    modes.require_stable()?;
    let mode = modes
        .modes
        .get(exc.mode)
        .ok_or_else(|| Error::InvalidInput(format!("mode index {} out of range", exc.mode)))?;
    if mode.dim() != 3 * traj.n_ions {
        return Err(Error::InvalidInput("mode set and trajectory differ in ion count".into()));
    }
    if probe >= mode.dim() {
        return Err(Error::InvalidInput(format!("probe coordinate {probe} out of range")));
    }
    if exc.amplitude.abs() > 0.1 {
        log::warn!("excitation amplitude {} may leave the linear regime", exc.amplitude);
    }
    let d0 = mode.displacement(exc.amplitude, 0.0);
    let v0 = mode.velocity(exc.amplitude, 0.0);
    let r_eq = traj.positions(0.0);
    let v_eq = traj.velocities(0.0);
    let n = traj.n_ions;
    let initial = State {
        t: 0.0,
        r: (0..n).map(|i| r_eq[i] + Vector3::new(d0[3 * i], d0[3 * i + 1], d0[3 * i + 2])).collect(),
        v: (0..n).map(|i| v_eq[i] + Vector3::new(v0[3 * i], v0[3 * i + 1], v0[3 * i + 2])).collect(),
    };
    let mut trace = Vec::new();
    let mut worst: f64 = 0.0;
    integrate(initial, drive, settings, |s| {
        let eq = traj.positions(s.t);
        let pred = mode.displacement(exc.amplitude, s.t);
        for i in 0..n {
            for a in 0..3 {
                let k = 3 * i + a;
                let md = s.r[i][a] - eq[i][a];
                let diff = md - pred[k];
                worst = worst.max(diff.abs());
                if k == probe {
                    trace.push(TraceRow { t_periods: s.t / PI, md, modes: pred[k], difference: diff });
                }
            }
        }
    })?;
    let max_deviation = trace.iter().map(|r| r.difference.abs()).fold(0.0, f64::max);
    Ok(VerifyReport { max_deviation, max_deviation_all: worst, trace })
}

/// CSV with columns `t,coordinate_md,coordinate_modes,difference`.
pub fn write_trace_csv(w: &mut impl Write, trace: &[TraceRow]) -> Result<()> {
    writeln!(w, "t,coordinate_md,coordinate_modes,difference")?;
    for r in trace {
        writeln!(w, "{:.6},{:.17e},{:.17e},{:.17e}", r.t_periods, r.md, r.modes, r.difference)?;
    }
    Ok(())
}
