use std::f64::consts::PI;

use nalgebra::{DMatrix, Matrix3};

use crate::equilibrium::{hessian_fourier, EquilibriumTrajectory};
use crate::error::{Error, Result};
use crate::units::TrapDrive;

/// Periodic matrix of the linearized EOM, `P(t) = A_eff - sum_k 2 Q_{2k} cos(2kt)`.
///
/// `q[0]` is the effective `Q` (`Q` with the first Coulomb harmonic
/// absorbed) and `q[k-1]` is `Q_{2k}` for `k >= 2`.
#[derive(Debug, Clone, PartialEq)]
pub struct HessianSeries {
    pub a_eff: DMatrix<f64>,
    pub q: Vec<DMatrix<f64>>,
}

fn block_diag(m: &Matrix3<f64>, n_ions: usize) -> DMatrix<f64> {
    DMatrix::<f64>::identity(n_ions, n_ions).kronecker(m)
}

impl HessianSeries {
    /// Assemble from the Coulomb Hessian coefficients `K_hat_n`, `K(t) = sum_n K_hat_n e^{2int}`.
    pub fn from_kernel(drive: &TrapDrive, k_hat: &[DMatrix<f64>]) -> Result<Self> {
        let dim = k_hat.first().map(|m| m.nrows()).unwrap_or(0);
        if dim == 0 || dim % 3 != 0 {
            return Err(Error::InvalidInput("Hessian kernel must be a non-empty 3N x 3N series".into()));
        }
        let n_ions = dim / 3;
        let a_eff = block_diag(&drive.a, n_ions) + 4.0 * &k_hat[0];
        let mut q = Vec::with_capacity(k_hat.len().saturating_sub(1).max(1));
        q.push(block_diag(&drive.q, n_ions) - 4.0 * k_hat.get(1).cloned().unwrap_or_else(|| DMatrix::zeros(dim, dim)));
        for kn in k_hat.iter().skip(2) {
            q.push(-4.0 * kn);
        }
        Ok(Self { a_eff, q })
    }

    pub fn dim(&self) -> usize {
        self.a_eff.nrows()
    }

    pub fn n_ions(&self) -> usize {
        self.dim() / 3
    }

    /// Highest retained harmonic.
    pub fn m_trunc(&self) -> usize {
        self.q.len()
    }

    /// `Q_{2k}` for `k >= 1`, or `None` beyond the truncation.
    pub fn q_at(&self, k: usize) -> Option<&DMatrix<f64>> {
        k.checked_sub(1).and_then(|i| self.q.get(i))
    }

    pub fn eval(&self, t: f64) -> DMatrix<f64> {
        let mut p = self.a_eff.clone();
        for (i, qk) in self.q.iter().enumerate() {
            p -= (2.0 * (2.0 * (i + 1) as f64 * t).cos()) * qk;
        }
        p
    }

    /// Coulomb kernel `K(t)` implied by the series.
    pub fn kernel(&self, drive: &TrapDrive, t: f64) -> DMatrix<f64> {
        let n = self.n_ions();
        (self.eval(t) - block_diag(&drive.a, n) + (2.0 * (2.0 * t).cos()) * block_diag(&drive.q, n)) / 4.0
    }

    /// No harmonic beyond the first exceeds `tol`.
    pub fn is_static(&self, tol: f64) -> bool {
        self.q.iter().skip(1).all(|m| m.amax() <= tol)
    }
}

/// Sample the Coulomb Hessian along the trajectory and keep `m_trunc` harmonics.
pub fn build_hessian_series(traj: &EquilibriumTrajectory, drive: &TrapDrive, m_trunc: usize) -> Result<HessianSeries> {
    let m_trunc = m_trunc.max(1);
    let s = 8 * (2 * traj.order().max(m_trunc) + 1);
    let samples: Vec<_> = (0..s).map(|k| traj.positions(PI * k as f64 / s as f64)).collect();
    let k_hat = hessian_fourier(&samples, m_trunc, Some(1e-10))?;
    HessianSeries::from_kernel(drive, &k_hat)
}
