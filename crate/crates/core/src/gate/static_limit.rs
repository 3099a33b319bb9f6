//! Real-mode assembly for crystals without micromotion.
//!
//! Uses only `b_j = m.C_0` and the static phase, with the real kernel
//! `sin(mu t1) sin(mu t2) sin(w (t1 - t2))`. Serves as the reference the full
//! assembly must reduce to when `Q = 0`.

use nalgebra::DMatrix;
use num_complex::Complex64;

use super::assembly::CouplingMatrix;
use super::GateContext;
use crate::oscint::{exp_integral_single, ordered_exp_integral};

const I: Complex64 = Complex64 { re: 0.0, im: 1.0 };

/// `int sin(mu t + phi) e^{i w t} dt` over `[a, b]`.
fn sine_carrier(a: f64, b: f64, mu: f64, phi: f64, w: f64) -> Complex64 {
    (Complex64::from_polar(1.0, phi) * exp_integral_single(a, b, mu, w)
        - Complex64::from_polar(1.0, -phi) * exp_integral_single(a, b, -mu, w))
        / (2.0 * I)
}

/// `int_a^b dt1 int_a^{t1} dt2 sin(mu t1 + p1) sin(mu t2 + p2) sin(w (t1 - t2))`.
fn ordered_real(a: f64, b: f64, mu: f64, p1: f64, p2: f64, w: f64) -> f64 {
    let mut acc = Complex64::new(0.0, 0.0);
    for s1 in [1.0, -1.0] {
        for s2 in [1.0, -1.0] {
            for s3 in [1.0, -1.0] {
                let coef = s1 * s2 * s3 * Complex64::from_polar(1.0, s1 * p1 + s2 * p2);
                acc += coef * ordered_exp_integral(a, b, s1 * mu + s3 * w, s2 * mu - s3 * w);
            }
        }
    }
    // (2i)^-3 = i / 8
    (acc * I / 8.0).re
}

/// `(A rows, gamma')` from the real-mode formulas.
pub fn assemble(ctx: &GateContext) -> (CouplingMatrix, DMatrix<f64>) {
    let n = ctx.segments;
    let phi = [ctx.carrier_phase(0).phi0, ctx.carrier_phase(1).phi0];
    let mut rows = Vec::with_capacity(ctx.n_modes());
    let mut gamma = DMatrix::zeros(n, n);
    for mode in &ctx.modes {
        let b = [mode.modulation[0].get(0), mode.modulation[1].get(0)];
        let w = mode.beta;
        let s: [Vec<Complex64>; 2] = [0, 1].map(|j| {
            (0..n)
                .map(|p| {
                    let (t1, t2) = ctx.segment(p);
                    sine_carrier(t1, t2, ctx.mu, phi[j], w)
                })
                .collect()
        });
        let e2 = mode.eta * mode.eta * b[0] * b[1];
        for p in 0..n {
            for q in 0..p {
                // separable: sin(w(t1 - t2)) = Im e^{iw t1} e^{-iw t2}
                let v = (s[0][p] * s[1][q].conj() + s[1][p] * s[0][q].conj()).im;
                gamma[(p, q)] += e2 * v;
            }
            let (t1, t2) = ctx.segment(p);
            gamma[(p, p)] += e2
                * (ordered_real(t1, t2, ctx.mu, phi[0], phi[1], w) + ordered_real(t1, t2, ctx.mu, phi[1], phi[0], w));
        }
        let scale = -I * mode.eta;
        rows.push([0, 1].map(|j| s[j].iter().map(|v| scale * b[j] * v).collect()));
    }
    (CouplingMatrix { rows }, gamma)
}
