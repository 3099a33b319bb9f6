//! Periodic equilibrium trajectories of an ion crystal.
//!
//! A damped-dynamics search produces an approximate period, which is then
//! projected onto a cosine series and refined by iterating the folded linear
//! system for the Fourier coefficients `B_{2n}`.

mod damped;
mod fourier;

use nalgebra::Vector3;

pub use damped::{find_equilibrium_damped, find_equilibrium_damped_from, DampedTrajectory};
pub use fourier::{coulomb_series, hessian_fourier, project_samples, refine_fourier, CoulombSeries};

use crate::error::{Error, Result};
use crate::units::TrapDrive;

/// Linear system solved by each Fourier sweep.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum FourierMethod {
    /// Mixed recurrence with parameter `alpha`. Contracts slowly along soft modes.
    Mixing,
    /// Newton step using the Fourier series of the Coulomb Hessian.
    #[default]
    Newton,
}

#[derive(Debug, Clone, PartialEq)]
pub struct IterationSettings {
    pub method: FourierMethod,
    /// Mixing parameter of the Fourier iteration, at least 1.
    pub alpha: f64,
    pub gamma_initial: f64,
    pub gamma_factor: f64,
    pub gamma_floor: f64,
    /// Damped stage length in RF periods.
    pub n1: usize,
    /// Undamped check length in RF periods.
    pub n2: usize,
    /// Stroboscopic position tolerance of the damped search.
    pub position_tol: f64,
    /// Damped repeats allowed per damping value.
    pub max_damped_repeats: usize,
    pub steps_per_period: usize,
    /// Ions farther than this from the origin count as escaped.
    pub escape_radius: f64,
    /// Successive-solution tolerance of the Fourier iteration.
    pub fourier_tol: f64,
    pub max_iterations: usize,
    /// EOM defect required for the residual certificate.
    pub residual_tol: f64,
    pub residual_grid: usize,
    /// Imaginary-residue tolerance of the Coulomb series.
    pub symmetry_tol: f64,
    /// Uniform static force on every ion, in dimensionless units.
    pub stray_field: Vector3<f64>,
}

impl Default for IterationSettings {
    fn default() -> Self {
        Self {
            method: FourierMethod::Newton,
            alpha: 1.0,
            gamma_initial: 0.1,
            gamma_factor: 0.5,
            gamma_floor: 1e-4,
            n1: 50,
            n2: 50,
            position_tol: 1e-2,
            max_damped_repeats: 200,
            steps_per_period: 200,
            escape_radius: 1e3,
            fourier_tol: 1e-12,
            max_iterations: 500,
            residual_tol: 1e-8,
            residual_grid: 2048,
            symmetry_tol: 1e-8,
            stray_field: Vector3::zeros(),
        }
    }
}

impl IterationSettings {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("gamma_initial", self.gamma_initial),
            ("gamma_floor", self.gamma_floor),
            ("position_tol", self.position_tol),
            ("fourier_tol", self.fourier_tol),
            ("residual_tol", self.residual_tol),
            ("symmetry_tol", self.symmetry_tol),
            ("escape_radius", self.escape_radius),
        ];
        for (name, v) in positive {
            if !(v > 0.0) {
                return Err(Error::InvalidInput(format!("{name} must be positive")));
            }
        }
        if !(self.alpha >= 1.0) {
            return Err(Error::InvalidInput(format!("mixing parameter must be >= 1, got {}", self.alpha)));
        }
        if !(self.gamma_factor > 0.0 && self.gamma_factor < 1.0) {
            return Err(Error::InvalidInput("gamma_factor must lie in (0, 1)".into()));
        }
        if self.n1 == 0 || self.n2 == 0 || self.steps_per_period < 16 {
            return Err(Error::InvalidInput("stage lengths and step counts too small".into()));
        }
        Ok(())
    }
}

/// `R_i(t) = B_0 + 2 sum_{n>=1} B_{2n} cos(2 n t)`.
#[derive(Debug, Clone, PartialEq)]
pub struct EquilibriumTrajectory {
    pub n_ions: usize,
    /// `b[n][i]` is `B_{2n}` of ion `i`.
    pub b: Vec<Vec<Vector3<f64>>>,
    /// Max EOM defect on the certificate grid.
    pub residual: f64,
    pub converged: bool,
    pub iterations: usize,
    pub seed: u64,
}

impl EquilibriumTrajectory {
    /// A static configuration with no micromotion.
    pub fn from_static(positions: Vec<Vector3<f64>>, order: usize) -> Self {
        let n = positions.len();
        let mut b = vec![vec![Vector3::zeros(); n]; order + 1];
        b[0] = positions;
        Self { n_ions: n, b, residual: f64::NAN, converged: false, iterations: 0, seed: 0 }
    }

    pub fn order(&self) -> usize {
        self.b.len() - 1
    }

    pub fn positions(&self, t: f64) -> Vec<Vector3<f64>> {
        let mut out = self.b[0].clone();
        for (n, bn) in self.b.iter().enumerate().skip(1) {
            let c = 2.0 * (2.0 * n as f64 * t).cos();
            for (o, v) in out.iter_mut().zip(bn) {
                *o += c * v;
            }
        }
        out
    }

    pub fn velocities(&self, t: f64) -> Vec<Vector3<f64>> {
        let mut out = vec![Vector3::zeros(); self.n_ions];
        for (n, bn) in self.b.iter().enumerate().skip(1) {
            let c = -4.0 * n as f64 * (2.0 * n as f64 * t).sin();
            for (o, v) in out.iter_mut().zip(bn) {
                *o += c * v;
            }
        }
        out
    }

    pub fn accelerations(&self, t: f64) -> Vec<Vector3<f64>> {
        let mut out = vec![Vector3::zeros(); self.n_ions];
        for (n, bn) in self.b.iter().enumerate().skip(1) {
            let nn = n as f64;
            let c = -8.0 * nn * nn * (2.0 * nn * t).cos();
            for (o, v) in out.iter_mut().zip(bn) {
                *o += c * v;
            }
        }
        out
    }

    /// Max-norm EOM defect over `grid` uniformly spaced times in one period.
    pub fn eom_residual(&self, drive: &TrapDrive, stray_field: &Vector3<f64>, grid: usize) -> Result<f64> {
        let mut worst: f64 = 0.0;
        for s in 0..grid {
            let t = std::f64::consts::PI * s as f64 / grid as f64;
            let r = self.positions(t);
            let acc = self.accelerations(t);
            let coul = crate::coulomb::coulomb_acceleration(&r)?;
            let m = drive.a - 2.0 * (2.0 * t).cos() * drive.q;
            for i in 0..self.n_ions {
                let defect = acc[i] + m * r[i] - coul[i] - stray_field;
                worst = worst.max(defect.amax());
            }
        }
        Ok(worst)
    }

    /// Largest `|B_{2n}|` component for `n >= 1`.
    pub fn micromotion_amplitude(&self) -> f64 {
        self.b.iter().skip(1).flat_map(|v| v.iter().map(|x| x.amax())).fold(0.0, f64::max)
    }
}

/// Damped search followed by Fourier refinement at order `order`.
pub fn solve_equilibrium(
    drive: &TrapDrive,
    n_ions: usize,
    order: usize,
    settings: &IterationSettings,
    seed: u64,
) -> Result<EquilibriumTrajectory> {
    settings.validate()?;
    drive.check_single_ion_stability()?;
    let samples_per_period = 8 * (2 * order + 1);
    let approx = find_equilibrium_damped(drive, n_ions, settings, seed, samples_per_period)?;
    let mut initial = project_samples(&approx.samples, order);
    initial.seed = seed;
    let mut out = refine_fourier(&initial, drive, settings)?;
    out.seed = seed;
    Ok(out)
}

/// As [`solve_equilibrium`], starting the damped search from `start`.
pub fn solve_equilibrium_from(
    drive: &TrapDrive,
    start: Vec<Vector3<f64>>,
    order: usize,
    settings: &IterationSettings,
) -> Result<EquilibriumTrajectory> {
    settings.validate()?;
    drive.check_single_ion_stability()?;
    let approx = find_equilibrium_damped_from(drive, start, settings, 8 * (2 * order + 1))?;
    refine_fourier(&project_samples(&approx.samples, order), drive, settings)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn reference_drive() -> TrapDrive {
        TrapDrive::diagonal(1.0, [-0.015, -0.015, 0.03], [0.3, -0.3, 0.0]).unwrap()
    }

    #[test]
    fn single_ion_sits_at_origin() {
        let s = IterationSettings::default();
        let traj = solve_equilibrium(&reference_drive(), 1, 3, &s, 7).unwrap();
        assert!(traj.converged);
        assert!(traj.b.iter().flatten().all(|v| v.amax() == 0.0));
    }

    #[test]
    fn axial_pair_leaves_axis_under_damping() {
        let start = vec![Vector3::new(0.01, 0.0, 3.2), Vector3::new(0.0, 0.0, -3.2)];
        let traj = find_equilibrium_damped_from(&reference_drive(), start, &IterationSettings::default(), 8).unwrap();
        let r = &traj.samples[0];
        assert!((r[0] - r[1]).x.abs() > 0.1, "{r:?}");
    }

    #[test]
    fn random_two_ion_start_converges() {
        let traj = solve_equilibrium(&reference_drive(), 2, 8, &IterationSettings::default(), 1).unwrap();
        assert!(traj.converged, "residual {}", traj.residual);
    }

    #[test]
    fn two_ions_align_on_axis() {
        let s = IterationSettings::default();
        // The axial pair is a periodic solution but its rocking mode is
        // Mathieu-unstable here, so start the Fourier iteration on the axis.
        let start = EquilibriumTrajectory::from_static(vec![Vector3::new(0.0, 0.0, 2.9), Vector3::new(0.0, 0.0, -3.4)], 3);
        let traj = refine_fourier(&start, &reference_drive(), &s).unwrap();
        assert!(traj.converged, "residual {}", traj.residual);
        let d = (traj.b[0][0] - traj.b[0][1]).norm();
        let expected = (8.0f64 / 0.03).cbrt();
        assert!((d / expected - 1.0).abs() < 1e-10, "d = {d}");
        assert!(traj.micromotion_amplitude() < 1e-12);
        let z = traj.b[0][0].z.abs();
        assert!((traj.b[0][0].x.abs() + traj.b[0][0].y.abs()) < 1e-10 && (z - expected / 2.0).abs() < 1e-10);
    }

    #[test]
    fn static_solution_is_a_fixed_point() {
        let drive = TrapDrive::diagonal(1.0, [0.2, 0.1, 0.03], [0.0; 3]).unwrap();
        let d = (8.0f64 / 0.03).cbrt();
        let start = EquilibriumTrajectory::from_static(
            vec![Vector3::new(0.0, 0.0, d / 2.0), Vector3::new(0.0, 0.0, -d / 2.0)],
            2,
        );
        let out = refine_fourier(&start, &drive, &IterationSettings::default()).unwrap();
        assert_eq!(out.iterations, 1);
        assert!(out.converged);
        assert!(out.micromotion_amplitude() < 1e-14);
    }

    #[test]
    fn mixing_and_newton_agree() {
        let drive = TrapDrive::diagonal(1.0, [-0.0, 0.01, 0.03], [0.2, 0.0, 0.0]).unwrap();
        let s = IterationSettings { stray_field: Vector3::new(2e-3, 0.0, 0.0), ..Default::default() };
        let start = vec![Vector3::new(0.0, 0.0, 3.0), Vector3::new(0.0, 0.0, -3.0)];
        let newton = solve_equilibrium_from(&drive, start.clone(), 4, &s).unwrap();
        let mixing = solve_equilibrium_from(&drive, start, 4, &IterationSettings { method: FourierMethod::Mixing, ..s }).unwrap();
        assert!(newton.converged && mixing.converged);
        for (a, b) in newton.b.iter().flatten().zip(mixing.b.iter().flatten()) {
            assert!((a - b).amax() < 1e-10);
        }
    }

    #[test]
    fn stray_field_micromotion_ratio() {
        let q = 0.05;
        let drive = TrapDrive::diagonal(1.0, [0.0, 0.01, 0.01], [q, 0.0, 0.0]).unwrap();
        let s = IterationSettings { stray_field: Vector3::new(1e-3, 0.0, 0.0), ..Default::default() };
        let traj = solve_equilibrium(&drive, 1, 4, &s, 3).unwrap();
        assert!(traj.converged, "residual {}", traj.residual);
        let ratio = traj.b[1][0].x / traj.b[0][0].x;
        assert!((ratio + q / 4.0).abs() < q.powi(3), "ratio {ratio}");
    }

    #[test]
    fn ten_ion_residual_certificate() {
        let s = IterationSettings::default();
        let traj = solve_equilibrium(&reference_drive(), 10, 8, &s, 11).unwrap();
        assert!(traj.converged, "residual {} after {} sweeps", traj.residual, traj.iterations);
        assert!(traj.residual < 1e-8);
        assert!(traj.micromotion_amplitude() > 1e-2);
    }

    #[test]
    fn coulomb_series_reconstructs_d_from_g() {
        let traj = solve_equilibrium(&reference_drive(), 4, 8, &IterationSettings::default(), 5).unwrap();
        let series = CoulombSeries::from_trajectory(&traj, Some(1e-10)).unwrap();
        let z = series.d[0][0].z;
        assert!(z.is_finite());
        let t = 0.37;
        let r = traj.positions(t);
        let direct = crate::coulomb::coulomb_acceleration(&r).unwrap();
        let mut recon = vec![Vector3::zeros(); 4];
        for (n, dn) in series.d.iter().enumerate() {
            let c = if n == 0 { 1.0 } else { 2.0 } * (2.0 * n as f64 * t).cos();
            for (o, v) in recon.iter_mut().zip(dn) {
                *o += c * v;
            }
        }
        for (a, b) in direct.iter().zip(&recon) {
            assert!((a - b).amax() < 1e-6, "{a} vs {b}");
        }
    }
}
