//! Independent numerical oracles shared by the integration tests.
#![allow(dead_code)]

use num_complex::Complex64;

// 7-point Gauss / 15-point Kronrod nodes and weights on [-1, 1].
const XK: [f64; 8] = [
    0.991455371120812639206854697526329,
    0.949107912342758524526189684047851,
    0.864864423359769072789712788640926,
    0.741531185599394439863864773280788,
    0.586087235467691130294144845693013,
    0.405845151377397166906606412076961,
    0.207784955007898467600689403773245,
    0.000000000000000000000000000000000,
];
const WK: [f64; 8] = [
    0.022935322010529224963732008058970,
    0.063092092629978553290700663189204,
    0.104790010322250183839876322541518,
    0.140653259715525918745189590510238,
    0.169004726639267902826583426598550,
    0.190350578064785409913256402421014,
    0.204432940075298892414161999234649,
    0.209482141084727828012999174891714,
];
const WG: [f64; 4] = [
    0.129484966168869693270611432679082,
    0.279705391489276667901467771423780,
    0.381830050505118944950369775488975,
    0.417959183673469387755102040816327,
];

fn gk15(f: &mut dyn FnMut(f64) -> Complex64, a: f64, b: f64) -> (Complex64, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut k = fc * WK[7];
    let mut g = fc * WG[3];
    for j in 0..7 {
        let x = h * XK[j];
        let s = f(c - x) + f(c + x);
        k += s * WK[j];
        if j % 2 == 1 {
            g += s * WG[j / 2];
        }
    }
    (k * h, ((k - g) * h).norm())
}

/// Adaptive Gauss-Kronrod quadrature of a complex integrand.
pub fn integrate(f: &mut dyn FnMut(f64) -> Complex64, a: f64, b: f64, abs_tol: f64, rel_tol: f64) -> Complex64 {
    if a == b {
        return Complex64::new(0.0, 0.0);
    }
    let mut stack = vec![(a, b, 0usize)];
    let (whole, _) = gk15(f, a, b);
    let scale = whole.norm();
    let mut total = Complex64::new(0.0, 0.0);
    while let Some((lo, hi, depth)) = stack.pop() {
        let (v, err) = gk15(f, lo, hi);
        let share = (hi - lo) / (b - a);
        if err <= (abs_tol.max(rel_tol * scale) * share).max(1e-300) || depth > 40 {
            total += v;
        } else {
            let mid = 0.5 * (lo + hi);
            stack.push((lo, mid, depth + 1));
            stack.push((mid, hi, depth + 1));
        }
    }
    total
}

/// `int_a^b dt int_a^t dt' f(t, t')` by nested adaptive quadrature.
pub fn integrate_ordered(
    f: &mut dyn FnMut(f64, f64) -> Complex64,
    a: f64,
    b: f64,
    abs_tol: f64,
    rel_tol: f64,
) -> Complex64 {
    let mut outer = |t: f64| {
        let mut inner = |s: f64| f(t, s);
        integrate(&mut inner, a, t, abs_tol, rel_tol)
    };
    integrate(&mut outer, a, b, abs_tol, rel_tol)
}

/// `J_n(x)` from its power series.
pub fn bessel_series(n: usize, x: f64, terms: usize) -> f64 {
    let half = 0.5 * x;
    let mut term = half.powi(n as i32) / (1..=n).map(|k| k as f64).product::<f64>();
    let mut sum = term;
    for k in 1..terms {
        term *= -half * half / (k as f64 * (k + n) as f64);
        sum += term;
    }
    sum
}

/// One classical RK4 step of `y' = f(t, y)`.
pub fn rk4_step<F: FnMut(f64, &[f64], &mut [f64])>(f: &mut F, t: f64, y: &mut [f64], h: f64) {
    let n = y.len();
    let (mut k1, mut k2, mut k3, mut k4) = (vec![0.0; n], vec![0.0; n], vec![0.0; n], vec![0.0; n]);
    let mut tmp = vec![0.0; n];
    f(t, y, &mut k1);
    for i in 0..n {
        tmp[i] = y[i] + 0.5 * h * k1[i];
    }
    f(t + 0.5 * h, &tmp, &mut k2);
    for i in 0..n {
        tmp[i] = y[i] + 0.5 * h * k2[i];
    }
    f(t + 0.5 * h, &tmp, &mut k3);
    for i in 0..n {
        tmp[i] = y[i] + h * k3[i];
    }
    f(t + h, &tmp, &mut k4);
    for i in 0..n {
        y[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
    }
}

pub fn rk4<F: FnMut(f64, &[f64], &mut [f64])>(mut f: F, t0: f64, t1: f64, y: &mut [f64], steps: usize) {
    let h = (t1 - t0) / steps as f64;
    for k in 0..steps {
        rk4_step(&mut f, t0 + k as f64 * h, y, h);
    }
}

/// `x'' + (a - 2 q cos 2t) x = 0` monodromy over one period `pi`, columns for x(0)=1 and x'(0)=1.
pub fn mathieu_monodromy(a: f64, q: f64, steps: usize) -> [[f64; 2]; 2] {
    let rhs = |t: f64, y: &[f64], d: &mut [f64]| {
        d[0] = y[1];
        d[1] = -(a - 2.0 * q * (2.0 * t).cos()) * y[0];
    };
    let mut c1 = [1.0, 0.0];
    let mut c2 = [0.0, 1.0];
    rk4(rhs, 0.0, std::f64::consts::PI, &mut c1, steps);
    rk4(rhs, 0.0, std::f64::consts::PI, &mut c2, steps);
    [[c1[0], c2[0]], [c1[1], c2[1]]]
}

/// Characteristic exponent `beta` in `[0, 1]` from the half trace `cos(pi beta)`.
pub fn mathieu_exponent(a: f64, q: f64) -> f64 {
    let m = mathieu_monodromy(a, q, 20_000);
    let half = 0.5 * (m[0][0] + m[1][1]);
    assert!(half.abs() <= 1.0, "unstable Mathieu parameters");
    half.acos() / std::f64::consts::PI
}

pub mod gate_ode;

pub mod desk {
    //! The four-ion crystal at the reference trap used by the gate tests.

    use std::f64::consts::PI;

    use micromotion::equilibrium::{solve_equilibrium, EquilibriumTrajectory, IterationSettings};
    use micromotion::gate::GateContext;
    use micromotion::modes::{solve_modes, ModeSet, ModeSettings};
    use micromotion::{IonSpecies, LaserConfig, ThermalSpectrum, TrapDrive, TruncationSettings};
    use nalgebra::Vector3;

    pub const RF: f64 = 2.0 * PI * 50e6;

    pub fn drive() -> TrapDrive {
        TrapDrive::diagonal(RF, [-0.015, -0.015, 0.03], [0.3, -0.3, 0.0]).unwrap()
    }

    pub fn crystal(n: usize) -> (EquilibriumTrajectory, ModeSet) {
        let drive = drive();
        let traj = solve_equilibrium(&drive, n, 8, &IterationSettings::default(), 7).unwrap();
        let modes = solve_modes(&traj, &drive, &ModeSettings::default()).unwrap();
        (traj, modes)
    }

    pub fn laser(gate_time: f64, segments: usize, detuning_hz: f64) -> LaserConfig {
        LaserConfig {
            delta_k: 4.0 * PI / 355e-9,
            direction: Vector3::new(1.0, 0.0, 0.0),
            detuning: 2.0 * PI * detuning_hz,
            gate_time,
            segments,
            ions: (0, 1),
            static_phase: 0.0,
            phase_from_equilibrium: false,
            t0: 0.0,
            rabi_max: None,
        }
    }

    pub fn truncation() -> TruncationSettings {
        TruncationSettings { fourier_order: 8, phase_order: 5, ncut: 5, precision: 1e-10, bessel_cutoff: 30 }
    }

    pub fn context(traj: &EquilibriumTrajectory, modes: &ModeSet, laser: &LaserConfig) -> GateContext {
        GateContext::build(
            traj,
            modes,
            &IonSpecies::ytterbium_171(),
            &drive(),
            laser,
            &ThermalSpectrum::Doppler { linewidth: 2.0 * PI * 20e6 },
            &truncation(),
        )
        .unwrap()
    }
}

/// Dimensionless pairwise repulsion `sum_j 4 (r_i - r_j) / |r_i - r_j|^3`.
pub fn coulomb(r: &[nalgebra::Vector3<f64>]) -> Vec<nalgebra::Vector3<f64>> {
    (0..r.len())
        .map(|i| {
            (0..r.len())
                .filter(|&j| j != i)
                .map(|j| {
                    let d = r[i] - r[j];
                    d * (4.0 / d.norm().powi(3))
                })
                .sum()
        })
        .collect()
}

/// Monodromy of the linearized motion about a periodic orbit, by RK4 with a
/// central-difference Coulomb Jacobian.
pub fn linear_monodromy(
    positions: &dyn Fn(f64) -> Vec<nalgebra::Vector3<f64>>,
    a: &nalgebra::Matrix3<f64>,
    q: &nalgebra::Matrix3<f64>,
    steps: usize,
) -> nalgebra::DMatrix<f64> {
    let n = positions(0.0).len();
    let dim = 3 * n;
    let jac = |t: f64| {
        let r0 = positions(t);
        let mut j = nalgebra::DMatrix::zeros(dim, dim);
        let h = 1e-5;
        for c in 0..dim {
            let (mut rp, mut rm) = (r0.clone(), r0.clone());
            rp[c / 3][c % 3] += h;
            rm[c / 3][c % 3] -= h;
            let (fp, fm) = (coulomb(&rp), coulomb(&rm));
            for i in 0..n {
                for s in 0..3 {
                    j[(3 * i + s, c)] = (fp[i][s] - fm[i][s]) / (2.0 * h);
                }
            }
        }
        j
    };
    let mut out = nalgebra::DMatrix::zeros(2 * dim, 2 * dim);
    for col in 0..2 * dim {
        let mut y = vec![0.0; 2 * dim];
        y[col] = 1.0;
        let rhs = |t: f64, y: &[f64], d: &mut [f64]| {
            let k = jac(t);
            let drive = a - q * (2.0 * (2.0 * t).cos());
            for i in 0..dim {
                d[i] = y[dim + i];
                let (ion, s) = (i / 3, i % 3);
                let mut acc = 0.0;
                for u in 0..3 {
                    acc -= drive[(s, u)] * y[3 * ion + u];
                }
                for c in 0..dim {
                    acc += k[(i, c)] * y[c];
                }
                d[dim + i] = acc;
            }
        };
        rk4(rhs, 0.0, std::f64::consts::PI, &mut y, steps);
        for r in 0..2 * dim {
            out[(r, col)] = y[r];
        }
    }
    out
}
