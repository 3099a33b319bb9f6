//! Segment integrals: coupling rows `A_j^k` and the phase matrices.

use nalgebra::DMatrix;
use num_complex::Complex64;
use rayon::prelude::*;

use super::{Engine, GateContext};
use crate::error::Result;
use crate::oscint::{
    modulated_double_integral, modulated_single_integral, OrderedKernel, PhaseHarmonics, SpectralSignal,
};
use crate::units::UnitSystem;

const I: Complex64 = Complex64 { re: 0.0, im: 1.0 };

/// `rows[k][s][p]` is `A^k(p)` of driven ion `s` (0 or 1) for unit `Omega * T0`.
#[derive(Debug, Clone, PartialEq)]
pub struct CouplingMatrix {
    pub rows: Vec<[Vec<Complex64>; 2]>,
}

impl CouplingMatrix {
    pub fn n_modes(&self) -> usize {
        self.rows.len()
    }

    pub fn segments(&self) -> usize {
        self.rows.first().map_or(0, |r| r[0].len())
    }

    /// `alpha[k][s] = A^k_s . Omega`.
    pub fn alpha(&self, omega: &[f64]) -> Vec<[Complex64; 2]> {
        self.rows
            .iter()
            .map(|r| {
                let dot = |row: &Vec<Complex64>| row.iter().zip(omega).map(|(a, w)| a * w).sum::<Complex64>();
                [dot(&r[0]), dot(&r[1])]
            })
            .collect()
    }

    /// Rows scaled by `weights[p]`.
    pub fn weighted(&self, weights: &[f64]) -> Self {
        let rows = self
            .rows
            .iter()
            .map(|r| {
                let w = |row: &Vec<Complex64>| row.iter().zip(weights).map(|(a, s)| a * s).collect();
                [w(&r[0]), w(&r[1])]
            })
            .collect();
        Self { rows }
    }

    /// `Re sum_{k,s} A^dag A (2 nbar_k + 1)`.
    pub fn thermal_gram(&self, nbar: &[f64]) -> DMatrix<f64> {
        let n = self.segments();
        let mut m = DMatrix::zeros(n, n);
        for (r, nb) in self.rows.iter().zip(nbar) {
            let w = 2.0 * nb + 1.0;
            for row in r {
                for p in 0..n {
                    for q in 0..n {
                        m[(p, q)] += w * (row[p].conj() * row[q]).re;
                    }
                }
            }
        }
        m
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GammaMatrices {
    /// Complex `Gamma'` before the imaginary part, lower triangular.
    pub complex: DMatrix<Complex64>,
    /// `gamma' = Im Gamma'`.
    pub prime: DMatrix<f64>,
    /// `(gamma' + gamma'^T) / 2`.
    pub symmetric: DMatrix<f64>,
}

impl GammaMatrices {
    fn from_complex(complex: DMatrix<Complex64>) -> Self {
        let prime = complex.map(|z| z.im);
        let symmetric = (&prime + prime.transpose()) * 0.5;
        Self { complex, prime, symmetric }
    }

    pub fn theta(&self, omega: &[f64]) -> f64 {
        let n = omega.len();
        let mut s = 0.0;
        for p in 0..n {
            for q in 0..=p {
                s += omega[p] * self.prime[(p, q)] * omega[q];
            }
        }
        s
    }
}

/// Raw integrals per mode: `single[s][p]`, ordered `double[0]` for `(0, 1)` and `double[1]` for `(1, 0)`.
struct ModeIntegrals {
    single: [Vec<Complex64>; 2],
    double: [Vec<Complex64>; 2],
}

fn spectral_integrals(ctx: &GateContext, harmonics: &[PhaseHarmonics; 2], k: usize) -> ModeIntegrals {
    let mode = &ctx.modes[k];
    let rf = UnitSystem::RF_FREQUENCY;
    let f = [0, 1].map(|s| SpectralSignal::modulated_carrier(ctx.mu, mode.beta, rf, &mode.modulation[s], &harmonics[s]));
    let d = ctx.segment_length();
    let k01 = OrderedKernel::new(&f[0], &f[1], d);
    let k10 = OrderedKernel::new(&f[1], &f[0], d);
    let mut single = [Vec::with_capacity(ctx.segments), Vec::with_capacity(ctx.segments)];
    let mut double = [Vec::with_capacity(ctx.segments), Vec::with_capacity(ctx.segments)];
    for p in 0..ctx.segments {
        let (a, b) = ctx.segment(p);
        for s in 0..2 {
            single[s].push(f[s].integral(a, b));
        }
        double[0].push(k01.apply(&f[0], &f[1], a));
        double[1].push(k10.apply(&f[1], &f[0], a));
    }
    ModeIntegrals { single, double }
}

fn literal_integrals(ctx: &GateContext, k: usize) -> Result<ModeIntegrals> {
    let mode = &ctx.modes[k];
    let rf = UnitSystem::RF_FREQUENCY;
    let phase = [ctx.carrier_phase(0), ctx.carrier_phase(1)];
    let mut single = [Vec::with_capacity(ctx.segments), Vec::with_capacity(ctx.segments)];
    let mut double = [Vec::with_capacity(ctx.segments), Vec::with_capacity(ctx.segments)];
    for p in 0..ctx.segments {
        let (a, b) = ctx.segment(p);
        for s in 0..2 {
            let v = modulated_single_integral(a, b, ctx.mu, mode.beta, rf, &mode.modulation[s], &phase[s], &ctx.budget)?;
            single[s].push(v.value);
        }
        for (o, (x, y)) in [(0usize, 1usize), (1, 0)].into_iter().enumerate() {
            let v = modulated_double_integral(
                a,
                b,
                ctx.mu,
                mode.beta,
                rf,
                &mode.modulation[x],
                &mode.modulation[y],
                &phase[x],
                &phase[y],
                &ctx.budget,
            )?;
            double[o].push(v.value);
        }
    }
    Ok(ModeIntegrals { single, double })
}

/// Coupling rows and phase matrices from one pass over the segment integrals.
pub fn assemble(ctx: &GateContext) -> Result<(CouplingMatrix, GammaMatrices)> {
    let per_mode: Vec<ModeIntegrals> = match ctx.engine {
        Engine::Spectral => {
            let h0 = PhaseHarmonics::from_phase(&ctx.carrier_phase(0), &ctx.budget)?;
            let h1 = PhaseHarmonics::from_phase(&ctx.carrier_phase(1), &ctx.budget)?;
            let harmonics = [h0, h1];
            (0..ctx.n_modes()).into_par_iter().map(|k| spectral_integrals(ctx, &harmonics, k)).collect()
        }
        Engine::Literal => {
            (0..ctx.n_modes()).into_par_iter().map(|k| literal_integrals(ctx, k)).collect::<Result<_>>()?
        }
    };

    let n = ctx.segments;
    let mut rows = Vec::with_capacity(per_mode.len());
    let mut complex = DMatrix::from_element(n, n, Complex64::new(0.0, 0.0));
    for (mode, ints) in ctx.modes.iter().zip(&per_mode) {
        let scale = -I * mode.eta;
        let row = [0, 1].map(|s| ints.single[s].iter().map(|v| scale * v).collect::<Vec<_>>());
        let eta2 = mode.eta * mode.eta;
        for p in 0..n {
            for q in 0..p {
                complex[(p, q)] += row[0][p] * row[1][q].conj() + row[1][p] * row[0][q].conj();
            }
            complex[(p, p)] += eta2 * (ints.double[0][p] + ints.double[1][p]);
        }
        rows.push(row);
    }
    Ok((CouplingMatrix { rows }, GammaMatrices::from_complex(complex)))
}

pub fn build_coupling(ctx: &GateContext) -> Result<CouplingMatrix> {
    assemble(ctx).map(|(c, _)| c)
}

pub fn build_gamma(ctx: &GateContext) -> Result<GammaMatrices> {
    assemble(ctx).map(|(_, g)| g)
}
