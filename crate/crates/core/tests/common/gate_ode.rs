//! Direct ODE integration of the spin-motion displacement and the two-ion
//! phase, built from the raw trajectory and mode vectors.

use micromotion::equilibrium::EquilibriumTrajectory;
use micromotion::gate::GateContext;
use micromotion::modes::ModeSet;
use nalgebra::Vector3;
use num_complex::Complex64;

use super::rk4;

pub struct GateOde<'a> {
    pub ctx: &'a GateContext,
    /// `u` coefficients `[mode][ion slot][n + ncut]`.
    coeff: Vec<[Vec<f64>; 2]>,
    /// `phi^(l)` per ion slot, `l = 1..`.
    harmonics: [Vec<f64>; 2],
    phi0: [f64; 2],
}

pub struct OdeResult {
    pub alpha: Vec<[Complex64; 2]>,
    pub theta: f64,
}

impl<'a> GateOde<'a> {
    /// `kl` is `delta_k * L0`; `direction` the unit laser vector.
    pub fn new(
        ctx: &'a GateContext,
        traj: &EquilibriumTrajectory,
        modes: &ModeSet,
        direction: Vector3<f64>,
        kl: f64,
        static_phase: f64,
    ) -> Self {
        let ions = [ctx.ions.0, ctx.ions.1];
        let ncut = ctx.ncut as i64;
        let coeff = modes
            .modes
            .iter()
            .map(|m| {
                ions.map(|i| {
                    (-ncut..=ncut)
                        .map(|n| {
                            let c = m.c_at(n);
                            direction.dot(&Vector3::new(c[3 * i], c[3 * i + 1], c[3 * i + 2]))
                        })
                        .collect()
                })
            })
            .collect();
        let harmonics = ions.map(|i| (1..=ctx.phase_order).map(|l| 2.0 * kl * direction.dot(&traj.b[l][i])).collect());
        Self { ctx, coeff, harmonics, phi0: [static_phase; 2] }
    }

    fn signals(&self, t: f64, out: &mut [[Complex64; 2]]) {
        let ctx = self.ctx;
        let ncut = ctx.ncut as i64;
        let carrier = [0, 1].map(|s| {
            let phi: f64 = self.phi0[s]
                + self.harmonics[s].iter().enumerate().map(|(l, p)| p * (2.0 * (l + 1) as f64 * t).cos()).sum::<f64>();
            (ctx.mu * (t - ctx.t0) + phi).sin()
        });
        let sidebands: Vec<Complex64> = (-ncut..=ncut).map(|n| Complex64::from_polar(1.0, 2.0 * n as f64 * t)).collect();
        for (k, mode) in ctx.modes.iter().enumerate() {
            let rot = Complex64::from_polar(1.0, mode.beta * t);
            for s in 0..2 {
                let u: Complex64 = self.coeff[k][s].iter().zip(&sidebands).map(|(c, e)| e * *c).sum();
                out[k][s] = u * rot * carrier[s];
            }
        }
    }

    fn pass(&self, omega: &[f64], steps_per_segment: usize) -> Vec<f64> {
        let ctx = self.ctx;
        let nm = ctx.n_modes();
        let etas: Vec<f64> = ctx.modes.iter().map(|m| m.eta).collect();
        let mut y = vec![0.0; 4 * nm + 1];
        let mut f = vec![[Complex64::new(0.0, 0.0); 2]; nm];
        for (p, &w) in omega.iter().enumerate() {
            let (a, b) = ctx.segment(p);
            let rhs = |t: f64, y: &[f64], d: &mut [f64]| {
                self.signals(t, &mut f);
                let mut dtheta = 0.0;
                for k in 0..nm {
                    let i0 = Complex64::new(y[4 * k], y[4 * k + 1]);
                    let i1 = Complex64::new(y[4 * k + 2], y[4 * k + 3]);
                    let (f0, f1) = (f[k][0], f[k][1]);
                    d[4 * k] = w * f0.re;
                    d[4 * k + 1] = w * f0.im;
                    d[4 * k + 2] = w * f1.re;
                    d[4 * k + 3] = w * f1.im;
                    dtheta += etas[k] * etas[k] * (f0 * i1.conj() + f1 * i0.conj()).im;
                }
                d[4 * nm] = w * dtheta;
            };
            rk4(rhs, a, b, &mut y, steps_per_segment);
        }
        y
    }

    /// RK4 at two step sizes with Richardson extrapolation.
    pub fn solve(&self, omega: &[f64], steps_per_segment: usize) -> OdeResult {
        let coarse = self.pass(omega, steps_per_segment);
        let fine = self.pass(omega, 2 * steps_per_segment);
        let y: Vec<f64> = fine.iter().zip(&coarse).map(|(f, c)| (16.0 * f - c) / 15.0).collect();
        let nm = self.ctx.n_modes();
        let alpha = (0..nm)
            .map(|k| {
                let eta = self.ctx.modes[k].eta;
                let scale = Complex64::new(0.0, -eta);
                [scale * Complex64::new(y[4 * k], y[4 * k + 1]), scale * Complex64::new(y[4 * k + 2], y[4 * k + 3])]
            })
            .collect();
        OdeResult { alpha, theta: y[4 * nm] }
    }
}
