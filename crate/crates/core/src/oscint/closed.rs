//! Closed-form exponential integrals on finite intervals.

use num_complex::Complex64;

const I: Complex64 = Complex64 { re: 0.0, im: 1.0 };

/// Moments `m_j(a, d) = int_0^d s^j exp(i a s) ds` for `j = 0..=j_max`.
pub fn moments(a: f64, d: f64, j_max: usize) -> Vec<Complex64> {
    let mut out = vec![Complex64::new(0.0, 0.0); j_max + 1];
    if d == 0.0 {
        return out;
    }
    let x = a * d;
    if x.abs() < 2.0 {
        let ia = I * a;
        for (j, m) in out.iter_mut().enumerate() {
            // sum_k (i a)^k d^(j+k+1) / (k! (j+k+1))
            let mut pow = Complex64::new(d.powi(j as i32 + 1), 0.0);
            let mut acc = Complex64::new(0.0, 0.0);
            for k in 0..60 {
                let term = pow / (j + k + 1) as f64;
                acc += term;
                if term.norm() < 1e-18 * acc.norm() {
                    break;
                }
                pow *= ia * d / (k + 1) as f64;
            }
            *m = acc;
        }
    } else {
        let e = Complex64::from_polar(1.0, x);
        let inv = 1.0 / (I * a);
        out[0] = (e - 1.0) * inv;
        let mut dj = 1.0;
        for j in 1..=j_max {
            dj *= d;
            out[j] = (e * dj - out[j - 1] * j as f64) * inv;
        }
    }
    out
}

/// `int_0^d exp(i a s) ds`, exactly `d` when `a = 0`.
pub fn moment0(a: f64, d: f64) -> Complex64 {
    if a == 0.0 {
        return Complex64::new(d, 0.0);
    }
    moments(a, d, 0)[0]
}

/// `int_{t1}^{t2} exp(i (mu + omega) t) dt`.
pub fn exp_integral_single(t1: f64, t2: f64, mu: f64, omega: f64) -> Complex64 {
    let nu = mu + omega;
    Complex64::from_polar(1.0, nu * t1) * moment0(nu, t2 - t1)
}

/// `G(p, q, d) = int_0^d ds exp(i p s) int_0^s exp(i q s') ds'`.
pub fn ordered_unit(p: f64, q: f64, d: f64) -> Complex64 {
    if d == 0.0 {
        return Complex64::new(0.0, 0.0);
    }
    if (q * d).abs() < 1e-3 {
        // expand exp(i q s') in q
        let k_max = 8;
        let m = moments(p, d, k_max + 1);
        let mut acc = Complex64::new(0.0, 0.0);
        let mut coef = Complex64::new(1.0, 0.0);
        for k in 0..=k_max {
            coef /= (k + 1) as f64;
            acc += coef * m[k + 1];
            coef *= I * q;
        }
        acc
    } else {
        (moment0(p + q, d) - moment0(p, d)) / (I * q)
    }
}

/// `int_{t1}^{t2} dt int_{t1}^{t} dt' exp(i p t) exp(i q t')`.
pub fn ordered_exp_integral(t1: f64, t2: f64, p: f64, q: f64) -> Complex64 {
    Complex64::from_polar(1.0, (p + q) * t1) * ordered_unit(p, q, t2 - t1)
}

/// Ordered double integral of `e^{i mu t} e^{i mu t'} e^{i w1 t} e^{-i w2 t'}`.
pub fn exp_integral_double_plus(t1: f64, t2: f64, mu: f64, omega1: f64, omega2: f64) -> Complex64 {
    ordered_exp_integral(t1, t2, mu + omega1, mu - omega2)
}

/// Ordered double integral of `e^{i mu t} e^{-i mu t'} e^{i w1 t} e^{-i w2 t'}`.
pub fn exp_integral_double_minus(t1: f64, t2: f64, mu: f64, omega1: f64, omega2: f64) -> Complex64 {
    ordered_exp_integral(t1, t2, mu + omega1, -mu - omega2)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn resonant_single_is_length() {
        let v = exp_integral_single(0.3, 1.7, 2.0, -2.0);
        assert_eq!(v, Complex64::new(1.7 - 0.3, 0.0));
    }

    #[test]
    fn full_period_vanishes() {
        let nu = 3.7;
        let v = exp_integral_single(0.4, 0.4 + 2.0 * PI / nu, nu, 0.0);
        assert!(v.norm() < 1e-14);
    }

    #[test]
    fn double_degenerate_cases() {
        assert_eq!(exp_integral_double_plus(1.0, 1.0, 0.3, 0.2, 0.1), Complex64::new(0.0, 0.0));
        let v = exp_integral_double_plus(0.5, 2.5, 0.0, 0.0, 0.0);
        assert!((v - Complex64::new(2.0, 0.0)).norm() < 1e-15);
    }

    #[test]
    fn series_and_direct_branches_agree() {
        let d = 1.3;
        for &p in &[0.0, 0.7, 5.0, -40.0] {
            let q = 0.999e-3 / d;
            let q2 = 1.001e-3 / d;
            let a = ordered_unit(p, q, d);
            let b = ordered_unit(p, q2, d);
            assert!((a - b).norm() < 1e-5 * d * d, "{p}: {a} vs {b}");
        }
        let m_series = moments(1.999 / d, d, 4);
        let m_rec = moments(2.001 / d, d, 4);
        for (x, y) in m_series.iter().zip(&m_rec) {
            assert!((x - y).norm() < 1e-2);
        }
    }
}
