//! Integer-order Bessel functions of the first kind.

/// `J_0(x) ..= J_{n_max}(x)` by Miller's backward recurrence, normalized with
/// `J_0 + 2 sum_k J_{2k} = 1`.
pub fn bessel_table(n_max: usize, x: f64) -> Vec<f64> {
    let mut out = vec![0.0; n_max + 1];
    if x == 0.0 {
        out[0] = 1.0;
        return out;
    }
    let ax = x.abs();
    let top = n_max.max(ax.ceil() as usize);
    let mut m = top + 20 + (40.0 * top as f64).sqrt() as usize;
    m += m % 2;

    let mut j_next = 0.0;
    let mut j_cur = 1e-300;
    let mut norm = 0.0;
    for k in (1..=m).rev() {
        // j_cur holds J_k, compute J_{k-1}
        let j_prev = (2.0 * k as f64 / ax) * j_cur - j_next;
        j_next = j_cur;
        j_cur = j_prev;
        let idx = k - 1;
        if idx <= n_max {
            out[idx] = j_cur;
        }
        if idx % 2 == 0 {
            norm += if idx == 0 { j_cur } else { 2.0 * j_cur };
        }
        if j_cur.abs() > 1e250 {
            let s = 1e-250;
            j_cur *= s;
            j_next *= s;
            norm *= s;
            out.iter_mut().for_each(|v| *v *= s);
        }
    }
    let inv = 1.0 / norm;
    for (n, v) in out.iter_mut().enumerate() {
        *v *= inv;
        if x < 0.0 && n % 2 == 1 {
            *v = -*v;
        }
    }
    out
}

pub fn bessel_j(n: usize, x: f64) -> f64 {
    bessel_table(n, x)[n]
}

/// `(|x|/2)^n / n!`, an upper bound on `|J_n(x)|` for real `x`.
pub fn bessel_bound(n: usize, x: f64) -> f64 {
    let h = 0.5 * x.abs();
    let mut b = 1.0;
    for k in 1..=n {
        b *= h / k as f64;
    }
    b
}
