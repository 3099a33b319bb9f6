//! Depth-first Jacobi-Anger evaluation of phase-modulated integrals.
//!
//! Each harmonic `phi_l cos(l w_rf t)` of the motional phase is expanded as
//! `J_0(phi_l) + 2 sum_n i^n J_n(phi_l) cos(n l w_rf t)`. The walker visits one
//! order `n_l` per harmonic. A branch is cut once its accumulated coefficient
//! drops below the precision and `n_l > |phi_l|`; the discarded tail is added
//! to a running bound. Leaves split the remaining cosine product into
//! exponentials and use the closed forms in [`super::closed`].

use num_complex::Complex64;

use super::bessel::{bessel_bound, bessel_table};
use super::closed::{exp_integral_single, ordered_exp_integral};
use crate::error::{Error, Result};

const I: Complex64 = Complex64 { re: 0.0, im: 1.0 };

/// Motional phase `phi(t) = phi0 + sum_l phi_l cos(l w_rf t)`.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct PhaseSpec {
    pub phi0: f64,
    /// `harmonics[l - 1]` is `phi^(l)`.
    pub harmonics: Vec<f64>,
}

impl PhaseSpec {
    pub fn new(phi0: f64, harmonics: Vec<f64>) -> Self {
        Self { phi0, harmonics }
    }

    pub fn constant(phi0: f64) -> Self {
        Self { phi0, harmonics: Vec::new() }
    }

    pub fn order(&self) -> usize {
        self.harmonics.len()
    }

    pub fn eval(&self, t: f64, omega_rf: f64) -> f64 {
        self.phi0
            + self
                .harmonics
                .iter()
                .enumerate()
                .map(|(l, p)| p * ((l + 1) as f64 * omega_rf * t).cos())
                .sum::<f64>()
    }

    /// Truncated copy keeping harmonics `1..=order`.
    pub fn truncated(&self, order: usize) -> Self {
        Self { phi0: self.phi0, harmonics: self.harmonics.iter().take(order).copied().collect() }
    }

    pub fn with_phi0(&self, phi0: f64) -> Self {
        Self { phi0, harmonics: self.harmonics.clone() }
    }
}

/// Sideband amplitudes `c_n`, `n = -n_cut..=n_cut`.
#[derive(Debug, Clone, PartialEq)]
pub struct ModulationSpec {
    pub amplitudes: Vec<f64>,
}

impl ModulationSpec {
    pub fn new(amplitudes: Vec<f64>) -> Result<Self> {
        if amplitudes.len() % 2 == 0 {
            return Err(Error::InvalidInput("sideband list must have odd length".into()));
        }
        Ok(Self { amplitudes })
    }

    pub fn single(c0: f64) -> Self {
        Self { amplitudes: vec![c0] }
    }

    pub fn ncut(&self) -> usize {
        self.amplitudes.len() / 2
    }

    pub fn get(&self, n: i64) -> f64 {
        let idx = n + self.ncut() as i64;
        if idx < 0 || idx as usize >= self.amplitudes.len() {
            0.0
        } else {
            self.amplitudes[idx as usize]
        }
    }

    /// Orders in the visiting sequence `0, 1, -1, 2, -2, ...`.
    pub fn orders(&self) -> impl Iterator<Item = i64> {
        let n = self.ncut() as i64;
        std::iter::once(0).chain((1..=n).flat_map(|k| [k, -k]))
    }

    pub fn truncated(&self, ncut: usize) -> Self {
        let keep = ncut.min(self.ncut()) as i64;
        Self { amplitudes: (-keep..=keep).map(|n| self.get(n)).collect() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SeriesBudget {
    pub precision: f64,
    pub n_max: usize,
    /// Cap on leaf evaluations per call.
    pub max_terms: usize,
}

impl Default for SeriesBudget {
    fn default() -> Self {
        Self { precision: 1e-8, n_max: 20, max_terms: 50_000_000 }
    }
}

impl SeriesBudget {
    pub fn new(precision: f64, n_max: usize) -> Self {
        Self { precision, n_max, ..Self::default() }
    }
}

/// Series result with its diagnostics.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SeriesValue {
    pub value: Complex64,
    /// Upper bound on the magnitude of everything the pruning discarded.
    pub dropped_bound: f64,
    /// Leaf evaluations.
    pub terms: usize,
}

impl SeriesValue {
    fn zero() -> Self {
        Self { value: Complex64::new(0.0, 0.0), dropped_bound: 0.0, terms: 0 }
    }

    fn absorb(&mut self, other: SeriesValue, scale: Complex64) {
        self.value += scale * other.value;
        self.dropped_bound += scale.norm() * other.dropped_bound;
        self.terms += other.terms;
    }
}

/// `2 e^{|phi|/2} - 1`, bounding `sum_n |c_n|` of one Jacobi-Anger factor.
fn level_weight(phi: f64) -> f64 {
    2.0 * (0.5 * phi.abs()).exp() - 1.0
}

/// `sum_{m >= n} 2 |J_m(phi)|` for `n > |phi|`.
fn tail_bound(n: usize, phi: f64) -> f64 {
    // the ratio of consecutive bounds is below 1/2 past |phi|
    4.0 * bessel_bound(n, phi)
}

fn jacobi_coefficient(n: usize, j: f64) -> Complex64 {
    if n == 0 {
        Complex64::new(j, 0.0)
    } else {
        2.0 * I.powu(n as u32) * j
    }
}

/// Splits `prod_l cos(l n_l w t)` into `(weight, frequency shift)` pairs.
fn cosine_split(orders: &[usize], omega_rf: f64) -> Vec<(f64, f64)> {
    let mut out = vec![(1.0, 0.0)];
    for (k, &n) in orders.iter().enumerate() {
        if n == 0 {
            continue;
        }
        let shift = ((k + 1) * n) as f64 * omega_rf;
        out = out
            .into_iter()
            .flat_map(|(w, s)| [(0.5 * w, s - shift), (0.5 * w, s + shift)])
            .collect();
    }
    out
}

struct Tables {
    bessel: Vec<Vec<f64>>,
    /// `tails[k] = prod_{l >= k} level_weight(phi_l)`.
    tails: Vec<f64>,
}

impl Tables {
    fn new(phase: &PhaseSpec, levels: usize, n_max: usize) -> Self {
        let phi = |k: usize| phase.harmonics.get(k).copied().unwrap_or(0.0);
        let bessel = (0..levels).map(|k| bessel_table(n_max + 1, phi(k))).collect();
        let mut tails = vec![1.0; levels + 1];
        for k in (0..levels).rev() {
            tails[k] = tails[k + 1] * level_weight(phi(k));
        }
        Self { bessel, tails }
    }
}

fn cutoff_check(n_max: usize, phi: f64, scale: f64, precision: f64) -> Result<()> {
    let next = n_max + 1;
    if !(next as f64 > phi.abs() && scale * 2.0 * bessel_bound(next, phi) < precision) {
        return Err(Error::BesselCutoff { n_max, phi });
    }
    Ok(())
}

struct SingleWalker<'a> {
    t1: f64,
    t2: f64,
    mu: f64,
    omega: f64,
    omega_rf: f64,
    phase: &'a PhaseSpec,
    budget: SeriesBudget,
    tables: Tables,
    orders: Vec<usize>,
    out: SeriesValue,
}

impl SingleWalker<'_> {
    fn levels(&self) -> usize {
        self.orders.len()
    }

    fn phi(&self, k: usize) -> f64 {
        self.phase.harmonics.get(k).copied().unwrap_or(0.0)
    }

    fn leaf(&mut self, c: Complex64) -> Result<Complex64> {
        self.out.terms += 1;
        if self.out.terms > self.budget.max_terms {
            return Err(Error::BudgetExhausted { terms: self.out.terms, bound: self.out.dropped_bound });
        }
        let carrier = c * Complex64::from_polar(1.0, self.phase.phi0);
        let mut plus = Complex64::new(0.0, 0.0);
        let mut minus = Complex64::new(0.0, 0.0);
        for (w, s) in cosine_split(&self.orders, self.omega_rf) {
            plus += w * exp_integral_single(self.t1, self.t2, self.mu, self.omega + s);
            minus += w * exp_integral_single(self.t1, self.t2, -self.mu, self.omega + s);
        }
        Ok((carrier * plus - carrier.conj() * minus) / (2.0 * I))
    }

    /// `scale` is the magnitude of the external amplitude.
    fn visit(&mut self, k: usize, c: Complex64, scale: f64) -> Result<Complex64> {
        let span = self.t2 - self.t1;
        let eps = self.budget.precision;
        if scale * c.norm() < eps {
            self.out.dropped_bound += scale * c.norm() * span * self.tables.tails[k];
            return Ok(Complex64::new(0.0, 0.0));
        }
        if k == self.levels() {
            return self.leaf(c);
        }
        let phi = self.phi(k);
        self.orders[k] = 0;
        let mut v = self.visit(k + 1, c * self.tables.bessel[k][0], scale)?;
        let mut broke = false;
        for n in 1..=self.budget.n_max {
            let cn = jacobi_coefficient(n, self.tables.bessel[k][n]);
            if n as f64 > phi.abs() && scale * (c * cn).norm() < eps {
                self.out.dropped_bound +=
                    scale * c.norm() * tail_bound(n, phi) * span * self.tables.tails[k + 1];
                broke = true;
                break;
            }
            self.orders[k] = n;
            v += self.visit(k + 1, c * cn, scale)?;
        }
        self.orders[k] = 0;
        if !broke {
            cutoff_check(self.budget.n_max, phi, scale * c.norm(), eps)?;
        }
        Ok(v)
    }
}

/// `int_{t1}^{t2} amplitude * sin(mu t + phi(t)) e^{i omega t} dt`.
#[allow(clippy::too_many_arguments)]
pub fn single_integral_scaled(
    t1: f64,
    t2: f64,
    mu: f64,
    omega: f64,
    omega_rf: f64,
    phase: &PhaseSpec,
    amplitude: Complex64,
    budget: &SeriesBudget,
) -> Result<SeriesValue> {
    if t2 < t1 {
        return Err(Error::InvalidInput("interval end precedes start".into()));
    }
    let levels = phase.order();
    let mut w = SingleWalker {
        t1,
        t2,
        mu,
        omega,
        omega_rf,
        phase,
        budget: *budget,
        tables: Tables::new(phase, levels, budget.n_max),
        orders: vec![0; levels],
        out: SeriesValue::zero(),
    };
    let scale = amplitude.norm();
    if scale == 0.0 {
        return Ok(SeriesValue::zero());
    }
    let v = w.visit(0, Complex64::new(1.0, 0.0), scale)?;
    let mut out = w.out;
    out.value = amplitude * v;
    Ok(out)
}

/// `int_{t1}^{t2} sin(mu t + phi(t)) e^{i omega t} dt`.
pub fn single_integral(
    t1: f64,
    t2: f64,
    mu: f64,
    omega: f64,
    omega_rf: f64,
    phase: &PhaseSpec,
    budget: &SeriesBudget,
) -> Result<SeriesValue> {
    single_integral_scaled(t1, t2, mu, omega, omega_rf, phase, Complex64::new(1.0, 0.0), budget)
}

/// `int sum_n c_n e^{i (omega_k + n w_rf) t} sin(mu t + phi(t)) dt`.
#[allow(clippy::too_many_arguments)]
pub fn modulated_single_integral(
    t1: f64,
    t2: f64,
    mu: f64,
    omega_k: f64,
    omega_rf: f64,
    modulation: &ModulationSpec,
    phase: &PhaseSpec,
    budget: &SeriesBudget,
) -> Result<SeriesValue> {
    let mut total = SeriesValue::zero();
    let span = t2 - t1;
    let weight = phase.harmonics.iter().map(|p| level_weight(*p)).product::<f64>();
    for n in modulation.orders() {
        let c = modulation.get(n);
        if c.abs() < budget.precision {
            total.dropped_bound += c.abs() * span * weight;
            continue;
        }
        let omega = omega_k + n as f64 * omega_rf;
        let v = single_integral_scaled(t1, t2, mu, omega, omega_rf, phase, Complex64::new(c, 0.0), budget)?;
        total.absorb(v, Complex64::new(1.0, 0.0));
    }
    Ok(total)
}

struct DoubleWalker<'a> {
    t1: f64,
    t2: f64,
    mu: f64,
    omega1: f64,
    omega2: f64,
    omega_rf: f64,
    phase1: &'a PhaseSpec,
    phase2: &'a PhaseSpec,
    budget: SeriesBudget,
    tab1: Tables,
    tab2: Tables,
    orders1: Vec<usize>,
    orders2: Vec<usize>,
    out: SeriesValue,
}

impl DoubleWalker<'_> {
    fn levels(&self) -> usize {
        self.orders1.len()
    }

    fn phi1(&self, k: usize) -> f64 {
        self.phase1.harmonics.get(k).copied().unwrap_or(0.0)
    }

    fn phi2(&self, k: usize) -> f64 {
        self.phase2.harmonics.get(k).copied().unwrap_or(0.0)
    }

    fn area(&self) -> f64 {
        let d = self.t2 - self.t1;
        0.5 * d * d
    }

    fn leaf(&mut self, c1: Complex64, c2: Complex64) -> Result<Complex64> {
        self.out.terms += 1;
        if self.out.terms > self.budget.max_terms {
            return Err(Error::BudgetExhausted { terms: self.out.terms, bound: self.out.dropped_bound });
        }
        let a = c1 * Complex64::from_polar(1.0, self.phase1.phi0);
        let b = c2 * Complex64::from_polar(1.0, self.phase2.phi0);
        let split1 = cosine_split(&self.orders1, self.omega_rf);
        let split2 = cosine_split(&self.orders2, self.omega_rf);
        let (mu, t1, t2) = (self.mu, self.t1, self.t2);
        let mut acc = Complex64::new(0.0, 0.0);
        for &(w1, s1) in &split1 {
            let p_plus = mu + self.omega1 + s1;
            let p_minus = -mu + self.omega1 + s1;
            for &(w2, s2) in &split2 {
                let q_plus = mu - self.omega2 + s2;
                let q_minus = -mu - self.omega2 + s2;
                let term = a * b * ordered_exp_integral(t1, t2, p_plus, q_plus)
                    - a * b.conj() * ordered_exp_integral(t1, t2, p_plus, q_minus)
                    - a.conj() * b * ordered_exp_integral(t1, t2, p_minus, q_plus)
                    + a.conj() * b.conj() * ordered_exp_integral(t1, t2, p_minus, q_minus);
                acc += w1 * w2 * term;
            }
        }
        Ok(acc / -4.0)
    }

    fn visit(&mut self, k: usize, c1: Complex64, c2: Complex64, scale: f64) -> Result<Complex64> {
        let eps = self.budget.precision;
        let mag = scale * c1.norm() * c2.norm();
        if mag < eps {
            self.out.dropped_bound += mag * self.area() * self.tab1.tails[k] * self.tab2.tails[k];
            return Ok(Complex64::new(0.0, 0.0));
        }
        if k == self.levels() {
            return self.leaf(c1, c2);
        }
        let (phi1, phi2) = (self.phi1(k), self.phi2(k));
        let below = self.tab1.tails[k + 1] * self.tab2.tails[k + 1] * self.area();
        let mut v = Complex64::new(0.0, 0.0);
        let mut broke1 = false;
        for n1 in 0..=self.budget.n_max {
            let d1 = jacobi_coefficient(n1, self.tab1.bessel[k][n1]);
            if n1 as f64 > phi1.abs() && mag * d1.norm() < eps {
                self.out.dropped_bound += mag * tail_bound(n1, phi1) * level_weight(phi2) * below;
                broke1 = true;
                break;
            }
            self.orders1[k] = n1;
            let mut broke2 = false;
            for n2 in 0..=self.budget.n_max {
                let d2 = jacobi_coefficient(n2, self.tab2.bessel[k][n2]);
                if n2 as f64 > phi2.abs() && mag * (d1 * d2).norm() < eps {
                    self.out.dropped_bound += mag * d1.norm() * tail_bound(n2, phi2) * below;
                    broke2 = true;
                    break;
                }
                self.orders2[k] = n2;
                v += self.visit(k + 1, c1 * d1, c2 * d2, scale)?;
            }
            self.orders2[k] = 0;
            if !broke2 {
                cutoff_check(self.budget.n_max, phi2, mag * d1.norm(), eps)?;
            }
        }
        self.orders1[k] = 0;
        if !broke1 {
            cutoff_check(self.budget.n_max, phi1, mag, eps)?;
        }
        Ok(v)
    }
}

/// Ordered double integral
/// `int_{t1}^{t2} dt int_{t1}^{t} dt' amplitude * sin(mu t + phi_i(t)) sin(mu t' + phi_j(t'))
/// e^{i w1 t} e^{-i w2 t'}`.
#[allow(clippy::too_many_arguments)]
pub fn double_integral_scaled(
    t1: f64,
    t2: f64,
    mu: f64,
    omega1: f64,
    omega2: f64,
    omega_rf: f64,
    phase_i: &PhaseSpec,
    phase_j: &PhaseSpec,
    amplitude: Complex64,
    budget: &SeriesBudget,
) -> Result<SeriesValue> {
    if t2 < t1 {
        return Err(Error::InvalidInput("interval end precedes start".into()));
    }
    let scale = amplitude.norm();
    if scale == 0.0 {
        return Ok(SeriesValue::zero());
    }
    let levels = phase_i.order().max(phase_j.order());
    let mut w = DoubleWalker {
        t1,
        t2,
        mu,
        omega1,
        omega2,
        omega_rf,
        phase1: phase_i,
        phase2: phase_j,
        budget: *budget,
        tab1: Tables::new(phase_i, levels, budget.n_max),
        tab2: Tables::new(phase_j, levels, budget.n_max),
        orders1: vec![0; levels],
        orders2: vec![0; levels],
        out: SeriesValue::zero(),
    };
    let one = Complex64::new(1.0, 0.0);
    let v = w.visit(0, one, one, scale)?;
    let mut out = w.out;
    out.value = amplitude * v;
    Ok(out)
}

#[allow(clippy::too_many_arguments)]
pub fn double_integral(
    t1: f64,
    t2: f64,
    mu: f64,
    omega1: f64,
    omega2: f64,
    omega_rf: f64,
    phase_i: &PhaseSpec,
    phase_j: &PhaseSpec,
    budget: &SeriesBudget,
) -> Result<SeriesValue> {
    double_integral_scaled(t1, t2, mu, omega1, omega2, omega_rf, phase_i, phase_j, Complex64::new(1.0, 0.0), budget)
}

/// Ordered double integral of `u_i(t) sin(mu t + phi_i(t)) conj(u_j(t')) sin(mu t' + phi_j(t'))`
/// with `u(t) = sum_n c_n e^{i (omega_k + n w_rf) t}`.
#[allow(clippy::too_many_arguments)]
pub fn modulated_double_integral(
    t1: f64,
    t2: f64,
    mu: f64,
    omega_k: f64,
    omega_rf: f64,
    mod_i: &ModulationSpec,
    mod_j: &ModulationSpec,
    phase_i: &PhaseSpec,
    phase_j: &PhaseSpec,
    budget: &SeriesBudget,
) -> Result<SeriesValue> {
    let mut total = SeriesValue::zero();
    let d = t2 - t1;
    let weight = phase_i.harmonics.iter().chain(&phase_j.harmonics).map(|p| level_weight(*p)).product::<f64>();
    for n1 in mod_i.orders() {
        for n2 in mod_j.orders() {
            let c = mod_i.get(n1) * mod_j.get(n2);
            if c.abs() < budget.precision {
                total.dropped_bound += c.abs() * 0.5 * d * d * weight;
                continue;
            }
            let w1 = omega_k + n1 as f64 * omega_rf;
            let w2 = omega_k + n2 as f64 * omega_rf;
            let v = double_integral_scaled(t1, t2, mu, w1, w2, omega_rf, phase_i, phase_j, Complex64::new(c, 0.0), budget)?;
            total.absorb(v, Complex64::new(1.0, 0.0));
        }
    }
    Ok(total)
}
