//! Harmonic-sum form of the same Jacobi-Anger expansion.
//!
//! `exp(i phi(t))` is collapsed into `sum_h d_h exp(i h w_rf t)` once per ion,
//! so every segment integral becomes a short sum of closed forms. The ordered
//! double integral only depends on the segment start through phase factors,
//! which lets one kernel matrix serve all segments of equal length.

use std::collections::BTreeMap;

use num_complex::Complex64;

use super::bessel::{bessel_bound, bessel_table};
use super::closed::{exp_integral_single, ordered_unit};
use super::series::{ModulationSpec, PhaseSpec, SeriesBudget};
use crate::error::{Error, Result};

const I: Complex64 = Complex64 { re: 0.0, im: 1.0 };

/// `exp(i phi(t)) = sum_h coeffs[h - min_h] exp(i h w_rf t)`.
#[derive(Debug, Clone, PartialEq)]
pub struct PhaseHarmonics {
    pub min_h: i64,
    pub coeffs: Vec<Complex64>,
    /// Magnitude of discarded coefficients.
    pub dropped: f64,
}

impl PhaseHarmonics {
    pub fn from_phase(phase: &PhaseSpec, budget: &SeriesBudget) -> Result<Self> {
        let eps = budget.precision;
        let mut min_h = 0i64;
        let mut coeffs = vec![Complex64::from_polar(1.0, phase.phi0)];
        let mut dropped = 0.0;
        for (k, &phi) in phase.harmonics.iter().enumerate() {
            let l = (k + 1) as i64;
            if phi == 0.0 {
                continue;
            }
            let mut n_top = 0usize;
            while !(n_top as f64 > phi.abs() && bessel_bound(n_top, phi) < 1e-3 * eps) {
                n_top += 1;
                if n_top > budget.n_max {
                    return Err(Error::BesselCutoff { n_max: budget.n_max, phi });
                }
            }
            dropped += 4.0 * bessel_bound(n_top, phi);
            let j = bessel_table(n_top, phi);
            let span = n_top as i64 * l;
            let new_min = min_h - span;
            let mut next = vec![Complex64::new(0.0, 0.0); coeffs.len() + 2 * span as usize];
            for (a, &c) in coeffs.iter().enumerate() {
                if c == Complex64::new(0.0, 0.0) {
                    continue;
                }
                let h = min_h + a as i64;
                for n in 0..=n_top {
                    let w = c * I.powu(n as u32) * j[n];
                    let up = (h + n as i64 * l - new_min) as usize;
                    next[up] += w;
                    if n > 0 {
                        let down = (h - n as i64 * l - new_min) as usize;
                        next[down] += w;
                    }
                }
            }
            min_h = new_min;
            coeffs = next;
        }
        // trim negligible edges
        let keep = 1e-4 * eps;
        let first = coeffs.iter().position(|c| c.norm() >= keep).unwrap_or(0);
        let last = coeffs.iter().rposition(|c| c.norm() >= keep).unwrap_or(0);
        dropped += coeffs[..first].iter().chain(&coeffs[last + 1..]).map(|c| c.norm()).sum::<f64>();
        let coeffs = coeffs[first..=last].to_vec();
        Ok(Self { min_h: min_h + first as i64, coeffs, dropped })
    }

    pub fn eval(&self, t: f64, omega_rf: f64) -> Complex64 {
        self.coeffs
            .iter()
            .enumerate()
            .map(|(a, c)| c * Complex64::from_polar(1.0, (self.min_h + a as i64) as f64 * omega_rf * t))
            .sum()
    }
}

/// `f(t) = sum_a w_a exp(i nu_a t)`.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralSignal {
    pub weights: Vec<Complex64>,
    pub frequencies: Vec<f64>,
}

impl SpectralSignal {
    /// `u(t) sin(mu t + phi(t))` with `u(t) = sum_n c_n exp(i (omega_k + n w_rf) t)`.
    pub fn modulated_carrier(
        mu: f64,
        omega_k: f64,
        omega_rf: f64,
        modulation: &ModulationSpec,
        harmonics: &PhaseHarmonics,
    ) -> Self {
        let mut acc: BTreeMap<(i8, i64), Complex64> = BTreeMap::new();
        let half = 1.0 / (2.0 * I);
        for n in -(modulation.ncut() as i64)..=modulation.ncut() as i64 {
            let c = modulation.get(n);
            if c == 0.0 {
                continue;
            }
            for (a, &d) in harmonics.coeffs.iter().enumerate() {
                let h = harmonics.min_h + a as i64;
                *acc.entry((1, n + h)).or_default() += c * d * half;
                *acc.entry((-1, n - h)).or_default() -= c * d.conj() * half;
            }
        }
        let mut weights = Vec::with_capacity(acc.len());
        let mut frequencies = Vec::with_capacity(acc.len());
        for ((s, g), w) in acc {
            weights.push(w);
            frequencies.push(s as f64 * mu + omega_k + g as f64 * omega_rf);
        }
        Self { weights, frequencies }
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn eval(&self, t: f64) -> Complex64 {
        self.weights.iter().zip(&self.frequencies).map(|(w, nu)| w * Complex64::from_polar(1.0, nu * t)).sum()
    }

    pub fn integral(&self, t1: f64, t2: f64) -> Complex64 {
        self.weights.iter().zip(&self.frequencies).map(|(w, &nu)| w * exp_integral_single(t1, t2, nu, 0.0)).sum()
    }

    /// `x_a = w_a exp(i nu_a t)`.
    fn phased(&self, t: f64) -> Vec<Complex64> {
        self.weights.iter().zip(&self.frequencies).map(|(w, nu)| w * Complex64::from_polar(1.0, nu * t)).collect()
    }
}

/// Kernel for `int_{t1}^{t1+d} dt int_{t1}^{t} dt' f(t) conj(g(t'))`, reusable
/// for every interval of length `d`.
#[derive(Debug, Clone)]
pub struct OrderedKernel {
    rows: usize,
    cols: usize,
    data: Vec<Complex64>,
}

impl OrderedKernel {
    pub fn new(f: &SpectralSignal, g: &SpectralSignal, d: f64) -> Self {
        let mut data = Vec::with_capacity(f.len() * g.len());
        for &p in &f.frequencies {
            for &q in &g.frequencies {
                data.push(ordered_unit(p, -q, d));
            }
        }
        Self { rows: f.len(), cols: g.len(), data }
    }

    pub fn apply(&self, f: &SpectralSignal, g: &SpectralSignal, t1: f64) -> Complex64 {
        debug_assert_eq!(f.len(), self.rows);
        debug_assert_eq!(g.len(), self.cols);
        let x = f.phased(t1);
        let y: Vec<Complex64> = g.phased(t1).into_iter().map(|v| v.conj()).collect();
        let mut acc = Complex64::new(0.0, 0.0);
        for (a, xa) in x.iter().enumerate() {
            let row = &self.data[a * self.cols..(a + 1) * self.cols];
            let s: Complex64 = row.iter().zip(&y).map(|(k, yb)| k * yb).sum();
            acc += xa * s;
        }
        acc
    }
}
