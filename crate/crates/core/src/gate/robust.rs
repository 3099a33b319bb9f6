//! Drift-hardened pulses: minimize the time-integrated residual coupling and
//! phase error on the constraint surface `Omega^T gamma Omega = +-pi/4`.

use std::f64::consts::FRAC_PI_4;

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::optimize::{evaluate_pulse, GateReport, OptimizationProblem, PulseSequence};
use super::GateContext;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct RobustSettings {
    pub starts: usize,
    pub seed: u64,
    /// Weight of the plain `Omega^T M Omega` term added to the cost.
    pub residual_weight: f64,
    pub symmetric: bool,
    pub max_iterations: usize,
    /// Projected-gradient tolerance relative to the gradient norm.
    pub tolerance: f64,
}

impl Default for RobustSettings {
    fn default() -> Self {
        Self { starts: 16, seed: 0, residual_weight: 1.0, symmetric: true, max_iterations: 300, tolerance: 1e-10 }
    }
}

/// Weighted matrices of the drift-hardened cost.
#[derive(Debug, Clone, PartialEq)]
pub struct RobustnessProblem {
    pub base: OptimizationProblem,
    /// `Re sum A~^dag A~ (2 nbar + 1)` with `A~(p) = (n_seg - p + 1) A(p)`.
    pub m_tilde: DMatrix<f64>,
    /// Symmetrized `(n_seg - p + 1) Re Gamma'(p, q)`, `q <= p`.
    pub gamma_tilde: DMatrix<f64>,
    /// `Omega = map * x`.
    pub map: DMatrix<f64>,
}

/// Row weights `n_seg, n_seg - 1, ..., 1`.
pub fn segment_weights(n_seg: usize) -> Vec<f64> {
    (0..n_seg).map(|p| (n_seg - p) as f64).collect()
}

/// `Omega(n) = Omega(n_seg - n + 1)` expressed through `ceil(n_seg / 2)` variables.
pub fn symmetric_map(n_seg: usize) -> DMatrix<f64> {
    let d = n_seg.div_ceil(2);
    let mut s = DMatrix::zeros(n_seg, d);
    for p in 0..n_seg {
        s[(p, p.min(n_seg - 1 - p))] = 1.0;
    }
    s
}

impl RobustnessProblem {
    pub fn new(base: OptimizationProblem, symmetric: bool) -> Self {
        let n = base.segments();
        let w = segment_weights(n);
        let m_tilde = base.coupling.weighted(&w).thermal_gram(&base.nbar);
        let mut gt = DMatrix::zeros(n, n);
        for p in 0..n {
            for q in 0..=p {
                gt[(p, q)] = w[p] * base.gammas.complex[(p, q)].re;
            }
        }
        let gamma_tilde = (&gt + gt.transpose()) * 0.5;
        let map = if symmetric { symmetric_map(n) } else { DMatrix::identity(n, n) };
        Self { base, m_tilde, gamma_tilde, map }
    }

    pub fn free_variables(&self) -> usize {
        self.map.ncols()
    }

    /// `(Omega^T M~ Omega, Omega^T gamma~ Omega)`.
    pub fn drift_terms(&self, omega: &[f64]) -> (f64, f64) {
        let w = DVector::from_column_slice(omega);
        (w.dot(&(&self.m_tilde * &w)), w.dot(&(&self.gamma_tilde * &w)))
    }
}

/// Quartic cost `z^T A z + (z^T B z)^2` on `z^T G z = c`.
struct Reduced {
    a: DMatrix<f64>,
    b: DMatrix<f64>,
    g: DMatrix<f64>,
}

impl Reduced {
    fn cost(&self, z: &DVector<f64>) -> f64 {
        let q = z.dot(&(&self.b * z));
        z.dot(&(&self.a * z)) + q * q
    }

    fn gradient(&self, z: &DVector<f64>) -> DVector<f64> {
        let bz = &self.b * z;
        2.0 * (&self.a * z) + 4.0 * z.dot(&bz) * bz
    }

    fn hessian(&self, z: &DVector<f64>) -> DMatrix<f64> {
        let bz = &self.b * z;
        2.0 * &self.a + 4.0 * z.dot(&bz) * &self.b + 8.0 * &bz * bz.transpose()
    }

    fn project(&self, z: &DVector<f64>, c: f64) -> Option<DVector<f64>> {
        let q = z.dot(&(&self.g * z));
        if !(q * c > 0.0) {
            return None;
        }
        Some(z * (c / q).sqrt())
    }

    /// Feasible Newton-KKT descent with a halving line search.
    fn minimize(&self, start: DVector<f64>, c: f64, settings: &RobustSettings) -> Option<(DVector<f64>, f64, bool)> {
        let mut z = self.project(&start, c)?;
        let mut f = self.cost(&z);
        let d = z.len();
        for _ in 0..settings.max_iterations {
            let g = self.gradient(&z);
            let a = 2.0 * (&self.g * &z);
            let lambda = g.dot(&a) / a.dot(&a);
            let gp = &g - lambda * &a;
            if gp.norm() <= settings.tolerance * g.norm().max(f64::MIN_POSITIVE) {
                return Some((z, f, true));
            }
            let w = self.hessian(&z) - 2.0 * lambda * &self.g;
            let mut kkt = DMatrix::zeros(d + 1, d + 1);
            kkt.view_mut((0, 0), (d, d)).copy_from(&w);
            kkt.view_mut((0, d), (d, 1)).copy_from(&a);
            kkt.view_mut((d, 0), (1, d)).copy_from(&a.transpose());
            let mut rhs = DVector::zeros(d + 1);
            rhs.rows_mut(0, d).copy_from(&(-&gp));
            let mut step = kkt.lu().solve(&rhs).map(|s| s.rows(0, d).into_owned()).unwrap_or_else(|| -&gp);
            if !(step.dot(&gp) < 0.0) || step.iter().any(|v| !v.is_finite()) {
                step = -&gp;
            }
            let mut t = 1.0;
            let mut accepted = None;
            for _ in 0..60 {
                if let Some(zn) = self.project(&(&z + t * &step), c) {
                    let fnew = self.cost(&zn);
                    if fnew < f {
                        accepted = Some((zn, fnew));
                        break;
                    }
                }
                t *= 0.5;
            }
            match accepted {
                Some((zn, fnew)) => {
                    let done = (f - fnew) <= 1e-15 * f.abs();
                    z = zn;
                    f = fnew;
                    if done {
                        return Some((z, f, true));
                    }
                }
                None => return Some((z, f, true)),
            }
        }
        Some((z, f, false))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RobustDesign {
    pub pulse: PulseSequence,
    pub report: GateReport,
    /// Final value of the quartic cost.
    pub cost: f64,
    /// `Omega^T M~ Omega`.
    pub residual_integral: f64,
    /// `Omega^T gamma~ Omega`.
    pub theta_integral: f64,
    pub free_variables: usize,
    pub starts_feasible: usize,
    pub starts_converged: usize,
}

pub fn design_robust(ctx: &GateContext, settings: &RobustSettings) -> Result<RobustDesign> {
    let n = ctx.segments;
    if n < 2 {
        return Err(Error::InvalidInput("robust design needs at least 2 segments".into()));
    }
    if settings.starts == 0 {
        return Err(Error::InvalidInput("robust design needs at least one start".into()));
    }
    let base = OptimizationProblem::from_context(ctx)?;
    let standard = base.solve()?;
    let problem = RobustnessProblem::new(base, settings.symmetric);
    let s = &problem.map;
    let st = s.transpose();
    let g_full = st.clone() * &problem.base.gamma * s;
    let g_norm = SymmetricEigen::new(g_full.clone()).eigenvalues.amax();
    if !(g_norm > 0.0) {
        return Err(Error::NonConvergence("phase constraint is unreachable in the reduced space".into()));
    }
    // scale so that feasible points have |z| ~ 1
    let s0 = (FRAC_PI_4 / g_norm).sqrt();
    let s2 = s0 * s0;
    let cost_mat = &problem.m_tilde + settings.residual_weight * &problem.base.m;
    let reduced = Reduced {
        a: (st.clone() * &cost_mat * s) * s2,
        b: (st.clone() * &problem.gamma_tilde * s) * s2,
        g: g_full * s2,
    };

    let d = problem.free_variables();
    let mut starts: Vec<DVector<f64>> = Vec::with_capacity(settings.starts);
    // least-squares fit of the standard optimum into the reduced space
    let w0 = DVector::from_column_slice(&standard.0);
    let pinv = (st.clone() * s).try_inverse().expect("map has full column rank") * &st;
    starts.push(pinv * w0 / s0);
    // leading eigenvectors of the reduced quadratic pencil
    let eig = SymmetricEigen::new(reduced.g.clone());
    let mut order: Vec<usize> = (0..d).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[j].abs().total_cmp(&eig.eigenvalues[i].abs()));
    for &i in order.iter().take((settings.starts / 2).saturating_sub(1)) {
        starts.push(eig.eigenvectors.column(i).into_owned());
    }
    let mut rng = ChaCha8Rng::seed_from_u64(settings.seed);
    while starts.len() < settings.starts {
        starts.push(DVector::from_fn(d, |_, _| rng.random::<f64>() * 2.0 - 1.0));
    }

    let mut best: Option<(DVector<f64>, f64, f64)> = None;
    let (mut feasible, mut converged) = (0, 0);
    for z in starts {
        let q = z.dot(&(&reduced.g * &z));
        if q == 0.0 || !q.is_finite() {
            continue;
        }
        let c = q.signum() * FRAC_PI_4;
        if let Some((zf, f, ok)) = reduced.minimize(z, c, settings) {
            feasible += 1;
            converged += usize::from(ok);
            if best.as_ref().is_none_or(|b| f < b.1) {
                best = Some((zf, f, c));
            }
        }
    }
    let (z, cost, target) = best.ok_or_else(|| Error::NonConvergence("no feasible start for the phase constraint".into()))?;
    let omega: Vec<f64> = (s * z * s0).iter().copied().collect();
    let pulse = PulseSequence {
        omega,
        time_unit: ctx.units.time,
        segment_length: ctx.segment_length(),
        target,
        symmetric: settings.symmetric,
    };
    let report = evaluate_pulse(ctx, &pulse)?;
    let (residual_integral, theta_integral) = problem.drift_terms(&pulse.omega);
    Ok(RobustDesign {
        pulse,
        report,
        cost,
        residual_integral,
        theta_integral,
        free_variables: d,
        starts_feasible: feasible,
        starts_converged: converged,
    })
}

/// One-sided finite differences of `dF` in the detuning.
#[derive(Debug, Clone, PartialEq)]
pub struct Sensitivity {
    /// Step in rad/s.
    pub step: f64,
    pub delta_f: f64,
    pub delta_f_plus: f64,
    pub delta_f_minus: f64,
}

impl Sensitivity {
    /// `max(|dF(mu + h) - dF(mu)|, |dF(mu - h) - dF(mu)|) / h` in 1/(rad/s).
    pub fn slope(&self) -> f64 {
        (self.delta_f_plus - self.delta_f).abs().max((self.delta_f_minus - self.delta_f).abs()) / self.step
    }

    /// Central difference in 1/(rad/s).
    pub fn central(&self) -> f64 {
        (self.delta_f_plus - self.delta_f_minus) / (2.0 * self.step)
    }
}

pub fn detuning_sensitivity(ctx: &GateContext, pulse: &PulseSequence, step: f64) -> Result<Sensitivity> {
    let mu = ctx.detuning();
    Ok(Sensitivity {
        step,
        delta_f: evaluate_pulse(ctx, pulse)?.delta_f,
        delta_f_plus: evaluate_pulse(&ctx.with_detuning(mu + step), pulse)?.delta_f,
        delta_f_minus: evaluate_pulse(&ctx.with_detuning(mu - step), pulse)?.delta_f,
    })
}

#[cfg(test)]
mod tests {
    use super::super::testutil::*;
    use super::*;

    #[test]
    fn weights_for_three_segments() {
        assert_eq!(segment_weights(3), vec![3.0, 2.0, 1.0]);
    }

    #[test]
    fn symmetric_map_pairs_segments() {
        for n in 2..9 {
            let s = symmetric_map(n);
            assert_eq!(s.ncols(), n.div_ceil(2));
            let x = DVector::from_fn(s.ncols(), |i, _| i as f64 + 1.0);
            let w = &s * x;
            for p in 0..n {
                assert_eq!(w[p], w[n - 1 - p]);
            }
        }
    }

    #[test]
    fn robust_pulse_is_feasible_and_symmetric() {
        let ctx = static_pair(6);
        let r = design_robust(&ctx, &RobustSettings::default()).unwrap();
        assert!((r.report.theta.abs() - FRAC_PI_4).abs() < 1e-10);
        let w = &r.pulse.omega;
        for p in 0..6 {
            assert!((w[p] - w[5 - p]).abs() < 1e-15 * w[p].abs().max(1.0));
        }
        assert_eq!(r.free_variables, 3);
        assert!(r.starts_feasible > 0);
    }

    #[test]
    fn weighted_rows_scale_alpha() {
        let ctx = static_pair(3);
        let base = OptimizationProblem::from_context(&ctx).unwrap();
        let rp = RobustnessProblem::new(base.clone(), false);
        let tilde = base.coupling.weighted(&segment_weights(3));
        for (r, rt) in base.coupling.rows.iter().zip(&tilde.rows) {
            for s in 0..2 {
                assert_eq!(rt[s][0], 3.0 * r[s][0]);
                assert_eq!(rt[s][1], 2.0 * r[s][1]);
                assert_eq!(rt[s][2], r[s][2]);
            }
        }
        assert!((&rp.m_tilde - rp.m_tilde.transpose()).amax() < 1e-30);
    }
}
