use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector, Vector3};

use super::{EquilibriumTrajectory, FourierMethod, IterationSettings};
use crate::error::{Error, Result};
use crate::units::TrapDrive;

/// Fourier coefficients of the Coulomb term and of its linear kernel.
///
/// Only non-negative orders are stored; both series are even in the order.
#[derive(Debug, Clone, PartialEq)]
pub struct CoulombSeries {
    /// `d[n][i]` is `D_{2n}` of ion `i` for `n` in `0..=2M`.
    pub d: Vec<Vec<Vector3<f64>>>,
    /// `g[n]` is the `N x N` matrix `G_{2n}` for `n` in `0..=2M`.
    pub g: Vec<DMatrix<f64>>,
}

impl CoulombSeries {
    pub fn max_order(&self) -> usize {
        self.d.len() - 1
    }

    pub fn d_at(&self, n: i64) -> Option<&[Vector3<f64>]> {
        self.d.get(n.unsigned_abs() as usize).map(|v| v.as_slice())
    }

    pub fn g_at(&self, n: i64) -> Option<&DMatrix<f64>> {
        self.g.get(n.unsigned_abs() as usize)
    }

    /// Sample a cosine-series trajectory at `8 (2M + 1)` points and transform.
    pub fn from_trajectory(traj: &EquilibriumTrajectory, symmetry_tol: Option<f64>) -> Result<Self> {
        let samples = sample_period(traj, samples_for_order(traj.order()));
        coulomb_series(&samples, traj.order(), symmetry_tol)
    }
}

pub(crate) fn samples_for_order(order: usize) -> usize {
    8 * (2 * order + 1)
}

pub(crate) fn sample_period(traj: &EquilibriumTrajectory, s: usize) -> Vec<Vec<Vector3<f64>>> {
    (0..s).map(|k| traj.positions(PI * k as f64 / s as f64)).collect()
}

/// Cosine projection of one sampled period onto `B_{2n}`, `n <= order`.
///
/// Sine content is discarded without a check: damped samples only
/// approximate the time-symmetric solution.
pub fn project_samples(samples: &[Vec<Vector3<f64>>], order: usize) -> EquilibriumTrajectory {
    let s = samples.len();
    let n_ions = samples.first().map_or(0, |v| v.len());
    let b = (0..=order)
        .map(|n| {
            let mut acc = vec![Vector3::zeros(); n_ions];
            for (k, row) in samples.iter().enumerate() {
                let c = (2.0 * n as f64 * PI * k as f64 / s as f64).cos() / s as f64;
                for (a, r) in acc.iter_mut().zip(row) {
                    *a += c * r;
                }
            }
            acc
        })
        .collect();
    EquilibriumTrajectory { n_ions, b, residual: f64::NAN, converged: false, iterations: 0, seed: 0 }
}

/// Discrete Fourier analysis of `D(t)` and `G(t)` on a uniformly sampled period.
///
/// Orders run to `2 * order`. With `symmetry_tol` set, a sine component of
/// magnitude at least the tolerance is reported as a symmetry violation.
pub fn coulomb_series(
    samples: &[Vec<Vector3<f64>>],
    order: usize,
    symmetry_tol: Option<f64>,
) -> Result<CoulombSeries> {
    let s = samples.len();
    let top = 2 * order;
    if s < 4 * top + 1 {
        return Err(Error::InvalidInput(format!(
            "{s} samples per period cannot resolve Coulomb orders up to {top}"
        )));
    }
    let n_ions = samples[0].len();
    if samples.iter().any(|r| r.len() != n_ions) {
        return Err(Error::InvalidInput("sample rows differ in ion count".into()));
    }
    let mut d = vec![vec![Vector3::zeros(); n_ions]; top + 1];
    let mut g = vec![DMatrix::zeros(n_ions, n_ions); top + 1];
    let mut d_im = vec![vec![Vector3::<f64>::zeros(); n_ions]; top + 1];
    let mut g_im = vec![DMatrix::<f64>::zeros(n_ions, n_ions); top + 1];
    let mut gt = DMatrix::<f64>::zeros(n_ions, n_ions);
    for (k, r) in samples.iter().enumerate() {
        gt.fill(0.0);
        for i in 0..n_ions {
            for j in (i + 1)..n_ions {
                let r2 = (r[i] - r[j]).norm_squared();
                if !(r2 > 0.0) {
                    return Err(Error::Singularity(i, j));
                }
                let w = 1.0 / (r2 * r2.sqrt());
                gt[(i, j)] = -w;
                gt[(j, i)] = -w;
                gt[(i, i)] += w;
                gt[(j, j)] += w;
            }
        }
        let dt: Vec<Vector3<f64>> = (0..n_ions)
            .map(|i| (0..n_ions).fold(Vector3::zeros(), |acc, j| acc + 4.0 * gt[(i, j)] * r[j]))
            .collect();
        let theta = PI * k as f64 / s as f64;
        for n in 0..=top {
            let (sn, cn) = (2.0 * n as f64 * theta).sin_cos();
            let (cn, sn) = (cn / s as f64, sn / s as f64);
            for i in 0..n_ions {
                d[n][i] += cn * dt[i];
                d_im[n][i] -= sn * dt[i];
            }
            g[n] += cn * &gt;
            g_im[n] -= sn * &gt;
        }
    }
    if let Some(tol) = symmetry_tol {
        let residue = d_im
            .iter()
            .flat_map(|v| v.iter().map(|x| x.amax()))
            .chain(g_im.iter().map(|m| m.amax()))
            .fold(0.0, f64::max);
        if residue >= tol {
            return Err(Error::SymmetryViolation { residue, tol });
        }
    }
    Ok(CoulombSeries { d, g })
}

/// Cosine coefficients `K_{2n}`, `n <= max_order`, of the Coulomb Hessian
/// over a uniformly sampled period.
pub fn hessian_fourier(
    samples: &[Vec<Vector3<f64>>],
    max_order: usize,
    symmetry_tol: Option<f64>,
) -> Result<Vec<DMatrix<f64>>> {
    let s = samples.len();
    if s < 2 * max_order + 1 {
        return Err(Error::InvalidInput(format!("{s} samples cannot resolve Hessian order {max_order}")));
    }
    let dim = 3 * samples[0].len();
    let mut re = vec![DMatrix::zeros(dim, dim); max_order + 1];
    let mut residue: f64 = 0.0;
    let mut kt = DMatrix::zeros(dim, dim);
    let mut im = vec![DMatrix::<f64>::zeros(dim, dim); if symmetry_tol.is_some() { max_order + 1 } else { 0 }];
    for (k, r) in samples.iter().enumerate() {
        crate::coulomb::coulomb_hessian_into(r, &mut kt)?;
        let theta = PI * k as f64 / s as f64;
        for n in 0..=max_order {
            let (sn, cn) = (2.0 * n as f64 * theta).sin_cos();
            re[n] += (cn / s as f64) * &kt;
            if let Some(m) = im.get_mut(n) {
                *m -= (sn / s as f64) * &kt;
            }
        }
    }
    for m in &im {
        residue = residue.max(m.amax());
    }
    if let Some(tol) = symmetry_tol {
        if residue >= tol {
            return Err(Error::SymmetryViolation { residue, tol });
        }
    }
    Ok(re)
}

/// Folded operator `(A - 4n^2) B_n - Q (B_{n-1} + B_{n+1}) + sum_m W_{n-m} B_m`
/// for `n, m` in `0..=order`, with `W_{-k} = W_k` given as `3N x 3N` blocks.
fn folded_operator(drive: &TrapDrive, order: usize, n_ions: usize, w: &[DMatrix<f64>]) -> DMatrix<f64> {
    let block = 3 * n_ions;
    let dim = block * (order + 1);
    let order_i = order as i64;
    let mut m = DMatrix::<f64>::zeros(dim, dim);
    for n in 0..=order {
        let nn = n as f64;
        for i in 0..n_ions {
            let r0 = n * block + 3 * i;
            for s in 0..3 {
                for p in 0..3 {
                    m[(r0 + s, r0 + p)] += drive.a[(s, p)] - if s == p { 4.0 * nn * nn } else { 0.0 };
                    for nb in [n as i64 - 1, n as i64 + 1] {
                        if nb.abs() <= order_i {
                            m[(r0 + s, nb.unsigned_abs() as usize * block + 3 * i + p)] -= drive.q[(s, p)];
                        }
                    }
                }
            }
        }
        for mm in -order_i..=order_i {
            let wk = &w[(n as i64 - mm).unsigned_abs() as usize];
            let c0 = mm.unsigned_abs() as usize * block;
            let mut view = m.view_mut((n * block, c0), (block, block));
            view += wk;
        }
    }
    m
}

fn flatten(b: &[Vec<Vector3<f64>>]) -> DVector<f64> {
    DVector::from_iterator(b.len() * 3 * b[0].len(), b.iter().flatten().flat_map(|v| v.iter().copied()))
}

fn unflatten(x: &DVector<f64>, order: usize, n_ions: usize) -> Vec<Vec<Vector3<f64>>> {
    (0..=order)
        .map(|n| {
            (0..n_ions)
                .map(|i| {
                    let o = (n * n_ions + i) * 3;
                    Vector3::new(x[o], x[o + 1], x[o + 2])
                })
                .collect()
        })
        .collect()
}

fn lu_solve(m: DMatrix<f64>, rhs: &DVector<f64>) -> Result<DVector<f64>> {
    let dim = m.nrows();
    let x = m
        .lu()
        .solve(rhs)
        .ok_or_else(|| Error::Singular(format!("Fourier system of size {dim} has no unique solution")))?;
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::Singular(format!("Fourier system of size {dim} is numerically singular")));
    }
    Ok(x)
}

fn rhs_forcing(series: &CoulombSeries, scale: f64, stray: &Vector3<f64>, order: usize) -> DVector<f64> {
    let mut rhs = flatten(&series.d[..=order]) * scale;
    for s in 0..3 {
        for i in 0..series.d[0].len() {
            rhs[3 * i + s] += stray[s];
        }
    }
    rhs
}

/// One mixing sweep: `(L + 4 alpha G) B' = (1 + alpha) D + F`.
fn mixing_sweep(
    series: &CoulombSeries,
    drive: &TrapDrive,
    order: usize,
    n_ions: usize,
    settings: &IterationSettings,
) -> Result<Vec<Vec<Vector3<f64>>>> {
    let alpha = settings.alpha;
    let w: Vec<DMatrix<f64>> = series
        .g
        .iter()
        .map(|g| g.kronecker(&nalgebra::Matrix3::<f64>::identity()) * (4.0 * alpha))
        .collect();
    let m = folded_operator(drive, order, n_ions, &w);
    let rhs = rhs_forcing(series, 1.0 + alpha, &settings.stray_field, order);
    Ok(unflatten(&lu_solve(m, &rhs)?, order, n_ions))
}

/// One Newton step on `L B - D(B) - F = 0` using the Coulomb Hessian series.
fn newton_sweep(
    b: &[Vec<Vector3<f64>>],
    samples: &[Vec<Vector3<f64>>],
    series: &CoulombSeries,
    drive: &TrapDrive,
    order: usize,
    n_ions: usize,
    settings: &IterationSettings,
) -> Result<Vec<Vec<Vector3<f64>>>> {
    let k = hessian_fourier(samples, 2 * order, None)?;
    let w: Vec<DMatrix<f64>> = k.into_iter().map(|m| m * 4.0).collect();
    let zero = vec![DMatrix::zeros(3 * n_ions, 3 * n_ions); 2 * order + 1];
    let bx = flatten(b);
    let f = folded_operator(drive, order, n_ions, &zero) * &bx - rhs_forcing(series, 1.0, &settings.stray_field, order);
    let jac = folded_operator(drive, order, n_ions, &w);
    let delta = lu_solve(jac, &(-f))?;
    Ok(unflatten(&(bx + delta), order, n_ions))
}

/// Iterate the truncated recurrence for `B_{2n}` until successive sweeps agree.
///
/// Each sweep recomputes `D` and `G` from the current coefficients and solves
/// a folded linear system, either the mixed recurrence or its Newton form. The result carries the max EOM defect on a grid
/// of `residual_grid` points; `converged` requires both tolerances.
pub fn refine_fourier(
    initial: &EquilibriumTrajectory,
    drive: &TrapDrive,
    settings: &IterationSettings,
) -> Result<EquilibriumTrajectory> {
    settings.validate()?;
    const STALL_FLOOR: f64 = 1e-8;
    let order = initial.order();
    let n_ions = initial.n_ions;
    let s = samples_for_order(order);
    let mut b = initial.b.clone();
    let mut last_change = f64::INFINITY;
    let mut growing = 0;
    let mut iterations = 0;
    let mut iter_converged = false;
    while iterations < settings.max_iterations {
        let current = EquilibriumTrajectory { b: b.clone(), ..initial.clone() };
        let samples = sample_period(&current, s);
        let series = coulomb_series(&samples, order, Some(settings.symmetry_tol))?;
        let next = match settings.method {
            FourierMethod::Mixing => mixing_sweep(&series, drive, order, n_ions, settings)?,
            FourierMethod::Newton => newton_sweep(&b, &samples, &series, drive, order, n_ions, settings)?,
        };
        iterations += 1;
        let change = b
            .iter()
            .flatten()
            .zip(next.iter().flatten())
            .map(|(x, y)| (x - y).amax())
            .fold(0.0, f64::max);
        b = next;
        log::debug!("fourier sweep {iterations}: change {change:.3e}");
        if !change.is_finite() {
            return Err(Error::NonConvergence(format!("Fourier iteration produced non-finite values at sweep {iterations}")));
        }
        if change < settings.fourier_tol {
            iter_converged = true;
            break;
        }
        if change > last_change && change > 10.0 * settings.fourier_tol {
            growing += 1;
            if growing >= 3 && change < STALL_FLOOR {
                // rounding floor of an ill-conditioned sweep; the certificate decides
                log::debug!("Fourier iteration stalled at change {change:.3e}");
                iter_converged = true;
                break;
            }
            if growing >= 3 {
                return Err(Error::NonConvergence(format!(
                    "Fourier iteration diverging (change {change:.3e} after {iterations} sweeps); \
                     try a larger mixing parameter or a better damped seed"
                )));
            }
        } else {
            growing = 0;
        }
        last_change = change;
    }
    let mut out = EquilibriumTrajectory { b, iterations, ..initial.clone() };
    out.residual = out.eom_residual(drive, &settings.stray_field, settings.residual_grid)?;
    out.converged = iter_converged && out.residual < settings.residual_tol;
    if !iter_converged {
        log::warn!("Fourier iteration hit the sweep limit {}", settings.max_iterations);
    }
    Ok(out)
}
