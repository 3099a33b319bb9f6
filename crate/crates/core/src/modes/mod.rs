//! Floquet normal modes of the linearized crystal.
//!
//! The periodic Hessian is expanded in harmonics, all `3N` exponents are seeded
//! from a small-parameter generalized eigenproblem and each is refined on the
//! truncated block system by repeatedly solving for the eigenvalue nearest zero.

mod hessian;
mod refine;

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rayon::prelude::*;

pub use hessian::{build_hessian_series, HessianSeries};
pub use refine::{block_matrix, block_residual, nearest_zero_eigenpairs, refine_mode, resolve_degeneracy};

use crate::equilibrium::EquilibriumTrajectory;
use crate::error::{Error, Result};
use crate::units::TrapDrive;

/// Refined exponents closer than this are treated as exactly degenerate.
pub const DEGENERATE_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
pub struct ModeSettings {
    /// Sideband order kept in each mode vector.
    pub n_cut: usize,
    /// Hessian harmonics kept in the block matrix.
    pub m_trunc: usize,
    /// Exponent change that stops refinement.
    pub tol: f64,
    pub max_iterations: usize,
    /// Seeds closer than this are refined jointly.
    pub cluster_threshold: f64,
}

impl Default for ModeSettings {
    fn default() -> Self {
        Self { n_cut: 5, m_trunc: 5, tol: 1e-12, max_iterations: 100, cluster_threshold: 1e-6 }
    }
}

impl ModeSettings {
    pub fn validate(&self) -> Result<()> {
        if !(self.tol > 0.0) || !(self.cluster_threshold >= 0.0) || self.max_iterations == 0 {
            return Err(Error::InvalidInput("mode settings need positive tolerance and iteration count".into()));
        }
        Ok(())
    }
}

/// One Floquet mode `r(t) = sum_n C_{2n} (c e^{i(2n+beta)t} + c.c.)`.
#[derive(Debug, Clone, PartialEq)]
pub struct NormalMode {
    pub beta: f64,
    /// `c[n + n_cut]` is `C_{2n}`.
    pub c: Vec<DVector<f64>>,
    /// Relative block-system defect.
    pub residual: f64,
    pub normalized: bool,
    /// The exponent left the real axis during refinement.
    pub imaginary: bool,
}

impl NormalMode {
    pub(crate) fn from_stacked(beta: f64, x: &DVector<f64>, dim: usize, n_cut: usize) -> Self {
        let c = (0..2 * n_cut + 1).map(|b| x.rows(b * dim, dim).into_owned()).collect();
        Self { beta, c, residual: f64::NAN, normalized: false, imaginary: false }
    }

    pub fn n_cut(&self) -> usize {
        (self.c.len() - 1) / 2
    }

    pub fn dim(&self) -> usize {
        self.c[0].len()
    }

    /// `C_{2n}`, zero outside the truncation.
    pub fn c_at(&self, n: i64) -> DVector<f64> {
        let idx = n + self.n_cut() as i64;
        if idx < 0 || idx as usize >= self.c.len() {
            DVector::zeros(self.dim())
        } else {
            self.c[idx as usize].clone()
        }
    }

    pub fn stacked(&self) -> DVector<f64> {
        DVector::from_iterator(self.c.len() * self.dim(), self.c.iter().flat_map(|v| v.iter().copied()))
    }

    /// `sum_n C_{2n}`, the mode shape at `t = 0`.
    pub fn sum_c(&self) -> DVector<f64> {
        self.c.iter().fold(DVector::zeros(self.dim()), |acc, v| acc + v)
    }

    /// `sum_n (2n + beta) C_{2n}`.
    pub fn weighted_sum_c(&self) -> DVector<f64> {
        let nc = self.n_cut() as f64;
        self.c
            .iter()
            .enumerate()
            .fold(DVector::zeros(self.dim()), |acc, (b, v)| acc + (2.0 * (b as f64 - nc) + self.beta) * v)
    }

    /// `sum_n (2n + beta) C_{2n}^T sum_m C_{2m}`.
    pub fn norm_form(&self) -> f64 {
        self.weighted_sum_c().dot(&self.sum_c())
    }

    /// Displacement for real amplitude `amp`: `2 amp sum_n C_{2n} cos((2n + beta) t)`.
    pub fn displacement(&self, amp: f64, t: f64) -> DVector<f64> {
        let nc = self.n_cut() as f64;
        self.c.iter().enumerate().fold(DVector::zeros(self.dim()), |acc, (b, v)| {
            acc + (2.0 * amp * ((2.0 * (b as f64 - nc) + self.beta) * t).cos()) * v
        })
    }

    pub fn velocity(&self, amp: f64, t: f64) -> DVector<f64> {
        let nc = self.n_cut() as f64;
        self.c.iter().enumerate().fold(DVector::zeros(self.dim()), |acc, (b, v)| {
            let w = 2.0 * (b as f64 - nc) + self.beta;
            acc - (2.0 * amp * w * (w * t).sin()) * v
        })
    }

    fn fix_sign(&mut self) {
        let c0 = &self.c[self.n_cut()];
        let k = c0.iamax();
        if c0[k] < 0.0 {
            for v in &mut self.c {
                *v = -&*v;
            }
        }
    }
}

/// Small-parameter generalized eigenproblem `LHS C_0 = beta^2 RHS C_0`.
#[derive(Debug, Clone)]
pub struct SeedPencil {
    pub lhs: DMatrix<f64>,
    pub rhs: DMatrix<f64>,
}

impl SeedPencil {
    pub fn new(h: &HessianSeries) -> Self {
        let a = &h.a_eff;
        let q = &h.q[0];
        let q2 = q * q;
        let lhs = a + &q2 * 0.5 + q * a * q / 8.0 + &q2 * &q2 / 128.0;
        let rhs = DMatrix::identity(a.nrows(), a.nrows()) - &q2 * (3.0 / 8.0);
        let sym = |m: DMatrix<f64>| (&m + m.transpose()) * 0.5;
        Self { lhs: sym(lhs), rhs: sym(rhs) }
    }
}

/// Seed estimate for one mode.
#[derive(Debug, Clone)]
pub struct ModeSeed {
    /// `beta^2` from the pencil, negative for an unstable seed.
    pub beta_sq: f64,
    pub c0: DVector<f64>,
    /// `[C_{-4}, C_{-2}, C_0, C_2, C_4]`.
    pub sidebands: [DVector<f64>; 5],
}

impl ModeSeed {
    pub fn beta(&self) -> f64 {
        self.beta_sq.max(0.0).sqrt()
    }

    /// Stacked vector laid out for sideband order `n_cut`.
    pub fn stacked(&self, n_cut: usize) -> DVector<f64> {
        let d = self.c0.len();
        let mut x = DVector::zeros(d * (2 * n_cut + 1));
        for (k, v) in self.sidebands.iter().enumerate() {
            let n = k as i64 - 2;
            if n.unsigned_abs() as usize <= n_cut {
                x.rows_mut((n + n_cut as i64) as usize * d, d).copy_from(v);
            }
        }
        x
    }
}

/// Seeds for all `3N` modes in ascending `beta^2`.
pub fn seed_modes(h: &HessianSeries) -> Result<Vec<ModeSeed>> {
    let pencil = SeedPencil::new(h);
    let chol = pencil.rhs.clone().cholesky().ok_or_else(|| {
        Error::InvalidInput("seed pencil right-hand side is not positive definite; RF parameters too large".into())
    })?;
    let l_inv = chol
        .l()
        .solve_lower_triangular(&DMatrix::identity(h.dim(), h.dim()))
        .ok_or_else(|| Error::Singular("seed pencil Cholesky factor".into()))?;
    let reduced = &l_inv * &pencil.lhs * l_inv.transpose();
    let eig = SymmetricEigen::new((&reduced + reduced.transpose()) * 0.5);
    let mut idx: Vec<usize> = (0..h.dim()).collect();
    idx.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let q = &h.q[0];
    let q2 = q * q;
    Ok(idx
        .into_iter()
        .map(|i| {
            let beta_sq = eig.eigenvalues[i];
            let c0 = (l_inv.transpose() * eig.eigenvectors.column(i)).normalize();
            let b = beta_sq.max(0.0).sqrt();
            let qc = q * &c0;
            let q2c = &q2 * &c0;
            let sidebands = [
                &q2c * ((1.0 + 1.5 * b) / 64.0),
                &qc * (-(1.0 + b) / 4.0),
                c0.clone(),
                &qc * (-(1.0 - b) / 4.0),
                &q2c * ((1.0 - 1.5 * b) / 64.0),
            ];
            ModeSeed { beta_sq, c0, sidebands }
        })
        .collect())
}

/// All `3N` modes of a crystal, ascending in `beta`.
#[derive(Debug, Clone, PartialEq)]
pub struct ModeSet {
    pub modes: Vec<NormalMode>,
    /// Some exponent is imaginary; gate design refuses such sets.
    pub unstable: bool,
    /// Hash of the crystal snapshot the modes were computed from.
    pub snapshot_hash: String,
}

impl ModeSet {
    pub fn len(&self) -> usize {
        self.modes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.modes.is_empty()
    }

    pub fn n_ions(&self) -> usize {
        self.modes.first().map_or(0, |m| m.dim() / 3)
    }

    pub fn betas(&self) -> Vec<f64> {
        self.modes.iter().map(|m| m.beta).collect()
    }

    /// `F_kl = sum_n (2n + beta_k) C_{2n}^{(k)T} sum_m C_{2m}^{(l)}`.
    pub fn bilinear_form(&self) -> DMatrix<f64> {
        let s0: Vec<_> = self.modes.iter().map(|m| m.sum_c()).collect();
        let s1: Vec<_> = self.modes.iter().map(|m| m.weighted_sum_c()).collect();
        DMatrix::from_fn(self.len(), self.len(), |k, l| s1[k].dot(&s0[l]))
    }

    /// `max |F_kl - beta_k delta_kl|`.
    pub fn orthonormality_defect(&self) -> f64 {
        let f = self.bilinear_form();
        let mut worst: f64 = 0.0;
        for k in 0..self.len() {
            for l in 0..self.len() {
                let target = if k == l { self.modes[k].beta } else { 0.0 };
                worst = worst.max((f[(k, l)] - target).abs());
            }
        }
        worst
    }

    pub fn require_stable(&self) -> Result<()> {
        if self.unstable {
            return Err(Error::Instability("mode set has imaginary exponents".into()));
        }
        if let Some(k) = self.modes.iter().position(|m| !m.normalized) {
            return Err(Error::Instability(format!("mode {k} has a non-positive norm and cannot be quantized")));
        }
        Ok(())
    }
}

/// Rotate groups whose exponents agree within `degenerate_tol` to diagonalize
/// the bilinear form, then scale every mode so its norm form equals `beta`.
pub fn normalize_modeset(modes: Vec<NormalMode>, degenerate_tol: f64) -> ModeSet {
    let mut modes = modes;
    let mut start = 0;
    while start < modes.len() {
        let mut end = start + 1;
        while end < modes.len() && (modes[end].beta - modes[end - 1].beta).abs() < degenerate_tol {
            end += 1;
        }
        if end - start > 1 {
            diagonalize_group(&mut modes[start..end]);
        }
        start = end;
    }
    let mut unstable = false;
    for m in &mut modes {
        unstable |= m.imaginary;
        let norm = m.norm_form();
        if m.imaginary || !(norm > 0.0) || !(m.beta > 0.0) {
            m.normalized = false;
            continue;
        }
        let s = (m.beta / norm).sqrt();
        for v in &mut m.c {
            *v *= s;
        }
        m.fix_sign();
        m.normalized = true;
    }
    sort_modes(&mut modes);
    ModeSet { modes, unstable, snapshot_hash: String::new() }
}

fn diagonalize_group(group: &mut [NormalMode]) {
    let n = group.len();
    let s0: Vec<_> = group.iter().map(|m| m.sum_c()).collect();
    let s1: Vec<_> = group.iter().map(|m| m.weighted_sum_c()).collect();
    let f = DMatrix::from_fn(n, n, |k, l| 0.5 * (s1[k].dot(&s0[l]) + s1[l].dot(&s0[k])));
    let eig = SymmetricEigen::new(f);
    let old: Vec<_> = group.iter().map(|m| m.c.clone()).collect();
    for (j, m) in group.iter_mut().enumerate() {
        for (b, v) in m.c.iter_mut().enumerate() {
            *v = (0..n).fold(DVector::zeros(v.len()), |acc, i| acc + eig.eigenvectors[(i, j)] * &old[i][b]);
        }
    }
}

fn sort_modes(modes: &mut [NormalMode]) {
    modes.sort_by(|a, b| {
        a.beta.total_cmp(&b.beta).then_with(|| {
            let (x, y) = (&a.c[a.n_cut()], &b.c[b.n_cut()]);
            x.iter().zip(y.iter()).map(|(p, q)| p.total_cmp(q)).find(|o| o.is_ne()).unwrap_or(std::cmp::Ordering::Equal)
        })
    });
}

/// Hessian series, seeds, refinement and normalization in one call.
pub fn solve_modes(traj: &EquilibriumTrajectory, drive: &TrapDrive, settings: &ModeSettings) -> Result<ModeSet> {
    settings.validate()?;
    let h = build_hessian_series(traj, drive, settings.m_trunc)?;
    solve_modes_from_series(&h, settings)
}

pub fn solve_modes_from_series(h: &HessianSeries, settings: &ModeSettings) -> Result<ModeSet> {
    settings.validate()?;
    let seeds = seed_modes(h)?;
    let mut clusters: Vec<Vec<&ModeSeed>> = Vec::new();
    for s in &seeds {
        match clusters.last_mut() {
            Some(c) if s.beta_sq >= 0.0 && (s.beta() - c.last().unwrap().beta()).abs() < settings.cluster_threshold => c.push(s),
            _ => clusters.push(vec![s]),
        }
    }
    let refined: Vec<Result<Vec<NormalMode>>> = clusters
        .par_iter()
        .map(|c| {
            if c[0].beta_sq < 0.0 {
                let mut m = NormalMode::from_stacked(0.0, &c[0].stacked(settings.n_cut), h.dim(), settings.n_cut);
                m.imaginary = true;
                return Ok(vec![m]);
            }
            let seeds: Vec<_> = c.iter().map(|s| (s.beta(), s.stacked(settings.n_cut))).collect();
            resolve_degeneracy(h, &seeds, settings)
        })
        .collect();
    let mut modes = Vec::with_capacity(h.dim());
    for r in refined {
        modes.extend(r?);
    }
    if modes.len() != h.dim() {
        return Err(Error::NonConvergence(format!("found {} modes, expected {}", modes.len(), h.dim())));
    }
    for w in 0..modes.len() {
        for v in (w + 1)..modes.len() {
            let (a, b) = (&modes[w], &modes[v]);
            if (a.beta - b.beta).abs() < 1e-9 {
                let ov = a.stacked().dot(&b.stacked()).abs() / (a.stacked().norm() * b.stacked().norm());
                if ov > 0.9 {
                    return Err(Error::NonConvergence(format!(
                        "two seeds converged to the same mode at beta = {:.12}",
                        a.beta
                    )));
                }
            }
        }
    }
    modes.sort_by(|a, b| a.beta.total_cmp(&b.beta));
    Ok(normalize_modeset(modes, DEGENERATE_TOL))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::units::mathieu_half_trace;
    use nalgebra::Vector3;

    fn mathieu_beta(a: f64, q: f64) -> f64 {
        mathieu_half_trace(a, q).acos() / std::f64::consts::PI
    }

    fn single_ion(a: [f64; 3], q: [f64; 3]) -> (TrapDrive, EquilibriumTrajectory) {
        let drive = TrapDrive::diagonal(1.0, a, q).unwrap();
        (drive, EquilibriumTrajectory::from_static(vec![Vector3::zeros()], 3))
    }

    #[test]
    fn single_ion_mathieu_exponent() {
        let (drive, traj) = single_ion([0.0, 0.05, 0.02], [0.3, 0.0, 0.0]);
        let h = build_hessian_series(&traj, &drive, 5).unwrap();
        let seeds = seed_modes(&h).unwrap();
        let set = solve_modes_from_series(&h, &ModeSettings::default()).unwrap();
        let betas = set.betas();
        assert!((betas[0] - 0.02f64.sqrt()).abs() < 1e-12);
        assert!((betas[2] - 0.05f64.sqrt()).abs() < 1e-12);
        let oracle = mathieu_beta(0.0, 0.3);
        assert!((betas[1] - oracle).abs() < 1e-9, "{} vs {oracle}", betas[1]);
        let seed_x = seeds[1].beta();
        assert!((seed_x - betas[1]).abs() < 1e-3, "seed {seed_x}");
        assert!(set.orthonormality_defect() < 1e-10);
        for m in &set.modes {
            assert!(m.residual < 1e-10, "residual {}", m.residual);
        }
    }

    #[test]
    fn static_limit_unit_vectors() {
        let (drive, traj) = single_ion([0.1, 0.05, 0.02], [0.0; 3]);
        let set = solve_modes(&traj, &drive, &ModeSettings::default()).unwrap();
        for (m, a) in set.modes.iter().zip([0.02, 0.05, 0.1]) {
            assert!((m.beta - f64::sqrt(a)).abs() < 1e-14);
            assert!((m.c[m.n_cut()].norm() - 1.0).abs() < 1e-12);
            assert!(m.c.iter().enumerate().all(|(b, v)| b == m.n_cut() || v.amax() == 0.0));
        }
    }

    #[test]
    fn converged_mode_is_a_fixed_point() {
        let (drive, traj) = single_ion([0.0, 0.05, 0.02], [0.3, 0.0, 0.0]);
        let h = build_hessian_series(&traj, &drive, 5).unwrap();
        let settings = ModeSettings::default();
        let set = solve_modes_from_series(&h, &settings).unwrap();
        let m = &set.modes[1];
        let again = refine_mode(&h, m.beta, m.stacked(), &settings).unwrap();
        assert!((again.beta - m.beta).abs() < 1e-13);
    }

    #[test]
    fn renormalizing_is_identity() {
        let (drive, traj) = single_ion([0.0, 0.05, 0.02], [0.3, 0.0, 0.0]);
        let set = solve_modes(&traj, &drive, &ModeSettings::default()).unwrap();
        let again = normalize_modeset(set.modes.clone(), DEGENERATE_TOL);
        for (a, b) in set.modes.iter().zip(&again.modes) {
            assert!((a.stacked() - b.stacked()).amax() < 1e-14);
        }
    }

    #[test]
    fn symmetric_trap_degenerate_pair() {
        let (drive, traj) = single_ion([0.01, 0.01, 0.05], [0.2, 0.2, 0.0]);
        let set = solve_modes(&traj, &drive, &ModeSettings::default()).unwrap();
        assert!((set.modes[0].beta - set.modes[1].beta).abs() < 1e-10);
        assert!(set.orthonormality_defect() < 1e-10);
    }

    #[test]
    fn unstable_axis_is_flagged() {
        let h = HessianSeries::from_kernel(
            &TrapDrive::diagonal(1.0, [-0.01, 0.05, 0.02], [0.0; 3]).unwrap(),
            &[DMatrix::zeros(3, 3)],
        )
        .unwrap();
        let set = solve_modes_from_series(&h, &ModeSettings::default()).unwrap();
        assert!(set.unstable);
        assert!(set.require_stable().is_err());
    }
}
