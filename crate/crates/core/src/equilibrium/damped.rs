use std::f64::consts::PI;

use nalgebra::{Matrix3, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::IterationSettings;
use crate::coulomb::coulomb_acceleration_into;
use crate::error::{Error, Result};
use crate::units::TrapDrive;

/// Approximate periodic solution sampled over one RF period.
#[derive(Debug, Clone)]
pub struct DampedTrajectory {
    /// `samples[s][i]` is ion `i` at `t = s pi / S`.
    pub samples: Vec<Vec<Vector3<f64>>>,
    /// Final undamped stroboscopic mismatch.
    pub mismatch: f64,
    /// Damping value at acceptance.
    pub gamma: f64,
    /// RF periods simulated in total.
    pub periods: usize,
}

struct State<'a> {
    drive: &'a TrapDrive,
    stray: Vector3<f64>,
    r: Vec<Vector3<f64>>,
    v: Vec<Vector3<f64>>,
    acc: Vec<Vector3<f64>>,
    coul: Vec<Vector3<f64>>,
    periods: usize,
    steps: usize,
}

impl State<'_> {
    fn force(&mut self, t: f64) -> Result<()> {
        coulomb_acceleration_into(&self.r, &mut self.coul)?;
        let m: Matrix3<f64> = self.drive.a - 2.0 * (2.0 * t).cos() * self.drive.q;
        for i in 0..self.r.len() {
            self.acc[i] = self.coul[i] - m * self.r[i] + self.stray;
        }
        Ok(())
    }

    /// One RF period of damped velocity Verlet. Calls `record` after every step.
    fn period(&mut self, gamma: f64, mut record: impl FnMut(usize, &[Vector3<f64>])) -> Result<()> {
        let h = PI / self.steps as f64;
        let shrink = (-0.5 * gamma * h).exp();
        let t0 = self.periods as f64 * PI;
        self.force(t0)?;
        for s in 0..self.steps {
            for i in 0..self.r.len() {
                self.v[i] = self.v[i] * shrink + 0.5 * h * self.acc[i];
                self.r[i] += h * self.v[i];
            }
            let t = t0 + (s + 1) as f64 * h;
            self.force(t)?;
            for i in 0..self.r.len() {
                self.v[i] = (self.v[i] + 0.5 * h * self.acc[i]) * shrink;
            }
            record(s + 1, &self.r);
        }
        self.periods += 1;
        Ok(())
    }

    /// Runs `periods` RF periods and returns the largest stroboscopic
    /// distance from the starting positions seen along the way.
    fn run(&mut self, periods: usize, gamma: f64, escape: f64) -> Result<f64> {
        let start = self.r.clone();
        let mut worst: f64 = 0.0;
        for _ in 0..periods {
            self.period(gamma, |_, _| {})?;
            let far = self.r.iter().map(|p| p.norm()).fold(0.0, f64::max);
            if !(far < escape) {
                return Err(Error::Instability(format!(
                    "ion escaped to distance {far:.3e} after {} RF periods",
                    self.periods
                )));
            }
            worst = worst.max(max_diff(&start, &self.r));
        }
        Ok(worst)
    }
}

fn max_diff(a: &[Vector3<f64>], b: &[Vector3<f64>]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).amax()).fold(0.0, f64::max)
}

/// Damped-dynamics search for a stroboscopically periodic configuration.
///
/// Starts from positions drawn uniformly in a ball of radius `2 N^(1/3)`, runs
/// `n1` damped periods until the stroboscopic change is below
/// `position_tol`, then checks `n2` undamped periods. The damping is reduced
/// until the undamped check passes.
pub fn find_equilibrium_damped(
    drive: &TrapDrive,
    n_ions: usize,
    settings: &IterationSettings,
    seed: u64,
    samples_per_period: usize,
) -> Result<DampedTrajectory> {
    settings.validate()?;
    if n_ions == 0 {
        return Err(Error::InvalidInput("ion count must be at least 1".into()));
    }
    let samples_per_period = samples_per_period.max(1);
    if n_ions == 1 && settings.stray_field == Vector3::zeros() {
        return Ok(DampedTrajectory {
            samples: vec![vec![Vector3::zeros()]; samples_per_period],
            mismatch: 0.0,
            gamma: settings.gamma_initial,
            periods: 0,
        });
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let radius = 2.0 * (n_ions as f64).cbrt();
    let mut r = Vec::with_capacity(n_ions);
    while r.len() < n_ions {
        let p = Vector3::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
        if p.norm_squared() <= 1.0 {
            r.push(p * radius);
        }
    }
    find_equilibrium_damped_from(drive, r, settings, samples_per_period)
}

/// Damped search from explicit starting positions at rest.
pub fn find_equilibrium_damped_from(
    drive: &TrapDrive,
    start: Vec<Vector3<f64>>,
    settings: &IterationSettings,
    samples_per_period: usize,
) -> Result<DampedTrajectory> {
    settings.validate()?;
    let n_ions = start.len();
    if n_ions == 0 {
        return Err(Error::InvalidInput("ion count must be at least 1".into()));
    }
    let samples_per_period = samples_per_period.max(1);
    let r = start;
    let stride = settings.steps_per_period.div_ceil(samples_per_period);
    let mut state = State {
        drive,
        stray: settings.stray_field,
        v: vec![Vector3::zeros(); n_ions],
        acc: vec![Vector3::zeros(); n_ions],
        coul: vec![Vector3::zeros(); n_ions],
        r,
        periods: 0,
        steps: stride * samples_per_period,
    };

    let mut gamma = settings.gamma_initial;
    let mismatch = loop {
        for _ in 0..settings.max_damped_repeats {
            let m1 = state.run(settings.n1, gamma, settings.escape_radius)?;
            if m1 < 0.1 * settings.position_tol {
                break;
            }
        }
        let m = state.run(settings.n2, 0.0, settings.escape_radius)?;
        log::debug!("damped search: gamma {gamma:.3e}, undamped mismatch {m:.3e}");
        if m < settings.position_tol {
            break m;
        }
        gamma *= settings.gamma_factor;
        if gamma < settings.gamma_floor {
            return Err(Error::NonConvergence(format!(
                "damped search stalled at the damping floor with mismatch {m:.3e}"
            )));
        }
    };

    let mut samples = Vec::with_capacity(samples_per_period);
    samples.push(state.r.clone());
    state.period(0.0, |s, r| {
        if s % stride == 0 && s / stride < samples_per_period {
            samples.push(r.to_vec());
        }
    })?;
    Ok(DampedTrajectory { samples, mismatch, gamma, periods: state.periods })
}
