use nalgebra::{DMatrix, DVector, SymmetricEigen};

use super::{HessianSeries, ModeSettings, NormalMode};
use crate::error::{Error, Result};

/// Largest block dimension handled by a full symmetric eigendecomposition.
const DENSE_LIMIT: usize = 150;

/// Block eigenvalues closer than this span one degenerate eigenspace.
const DEGENERATE_EIGEN_TOL: f64 = 1e-10;

/// Truncated block matrix with diagonal blocks `A_eff - (2n + beta)^2 I` and
/// off-diagonal blocks `-Q_{2|n-m|}`, for `n, m` in `-n_cut..=n_cut`.
pub fn block_matrix(h: &HessianSeries, beta: f64, n_cut: usize) -> DMatrix<f64> {
    let d = h.dim();
    let nb = 2 * n_cut + 1;
    let mut m = DMatrix::<f64>::zeros(d * nb, d * nb);
    for a in 0..nb {
        let n = a as f64 - n_cut as f64;
        let shift = (2.0 * n + beta).powi(2);
        let mut diag = m.view_mut((a * d, a * d), (d, d));
        diag.copy_from(&h.a_eff);
        for i in 0..d {
            diag[(i, i)] -= shift;
        }
        for b in (a + 1)..nb {
            if let Some(qk) = h.q_at(b - a) {
                m.view_mut((a * d, b * d), (d, d)).copy_from(&(-qk));
                m.view_mut((b * d, a * d), (d, d)).copy_from(&(-qk));
            }
        }
    }
    m
}

/// The `count` eigenpairs of a symmetric `m` closest to zero, nearest first.
///
/// Small systems use a full decomposition. Larger ones run subspace inverse
/// iteration started from `guesses`.
pub fn nearest_zero_eigenpairs(m: &DMatrix<f64>, count: usize, guesses: &[DVector<f64>]) -> Result<Vec<(f64, DVector<f64>)>> {
    let dim = m.nrows();
    let count = count.min(dim);
    let mut out: Vec<(f64, DVector<f64>)> = if dim <= DENSE_LIMIT {
        let eig = SymmetricEigen::new(m.clone());
        let mut idx: Vec<usize> = (0..dim).collect();
        idx.sort_by(|&a, &b| eig.eigenvalues[a].abs().total_cmp(&eig.eigenvalues[b].abs()));
        idx.into_iter().take(count).map(|i| (eig.eigenvalues[i], eig.eigenvectors.column(i).into_owned())).collect()
    } else {
        subspace_inverse_iteration(m, count, guesses)?
    };
    out.sort_by(|a, b| a.0.abs().total_cmp(&b.0.abs()));
    Ok(out)
}

fn subspace_inverse_iteration(m: &DMatrix<f64>, count: usize, guesses: &[DVector<f64>]) -> Result<Vec<(f64, DVector<f64>)>> {
    let dim = m.nrows();
    let width = (count + 2).min(dim);
    let lu = m.clone().lu();
    let mut x = DMatrix::<f64>::zeros(dim, width);
    for c in 0..width {
        match guesses.get(c) {
            Some(g) => x.set_column(c, g),
            None => {
                for r in 0..dim {
                    x[(r, c)] = ((r * 7919 + c * 104729) % 1000) as f64 / 1000.0 - 0.5;
                }
            }
        }
    }
    let mut prev = vec![f64::INFINITY; count];
    for _ in 0..200 {
        let y = lu.solve(&x).ok_or_else(|| Error::Singular("block matrix is singular at the current exponent".into()))?;
        let q = y.qr().q();
        let small = q.transpose() * m * &q;
        let eig = SymmetricEigen::new(small);
        let mut idx: Vec<usize> = (0..width).collect();
        idx.sort_by(|&a, &b| eig.eigenvalues[a].abs().total_cmp(&eig.eigenvalues[b].abs()));
        x = DMatrix::from_columns(&idx.iter().map(|&i| &q * eig.eigenvectors.column(i)).collect::<Vec<_>>());
        let vals: Vec<f64> = idx.iter().take(count).map(|&i| eig.eigenvalues[i]).collect();
        let done = vals.iter().zip(&prev).all(|(a, b)| (a - b).abs() <= 1e-15 * (1.0 + a.abs()));
        prev = vals;
        if done {
            break;
        }
    }
    Ok((0..count).map(|c| (prev[c], x.column(c).into_owned())).collect())
}

fn overlap(a: &DVector<f64>, b: &DVector<f64>) -> f64 {
    a.dot(b).abs() / (a.norm() * b.norm())
}

/// Jointly refine a cluster of near-degenerate seeds.
///
/// Each sweep finds, for every member at its own exponent, the `n` block
/// eigenvalues nearest zero in ascending order; member `i` follows the `i`-th
/// one and updates `beta <- sqrt(beta^2 + Delta)`.
pub fn resolve_degeneracy(h: &HessianSeries, seeds: &[(f64, DVector<f64>)], settings: &ModeSettings) -> Result<Vec<NormalMode>> {
    let n_cut = settings.n_cut;
    let cluster = seeds.len();
    let mut beta: Vec<f64> = seeds.iter().map(|s| s.0).collect();
    let mut vec: Vec<DVector<f64>> = seeds.iter().map(|s| s.1.normalize()).collect();
    let mut imaginary = vec![false; cluster];
    let mut last_delta = vec![f64::NAN; cluster];
    let mut converged = false;
    for sweep in 0..settings.max_iterations {
        let mut change: f64 = 0.0;
        let mut next = vec.clone();
        for i in 0..cluster {
            if imaginary[i] {
                continue;
            }
            let m = block_matrix(h, beta[i], n_cut);
            let pairs = nearest_zero_eigenpairs(&m, cluster + 2, &vec)?;
            let mut primary: Vec<&(f64, DVector<f64>)> = pairs.iter().take(cluster).collect();
            primary.sort_by(|a, b| a.0.total_cmp(&b.0));
            let (mut delta, mut v) = primary[i].clone();
            let ov = overlap(&v, &vec[i]);
            if ov < 0.5 {
                let best = pairs
                    .iter()
                    .enumerate()
                    .max_by(|a, b| overlap(&a.1 .1, &vec[i]).total_cmp(&overlap(&b.1 .1, &vec[i])))
                    .map(|(k, _)| k)
                    .unwrap_or(i);
                log::debug!("mode branch crossing at sweep {sweep}: overlap {ov:.3}, re-anchoring to branch {best}");
                (delta, v) = pairs[best].clone();
            }
            // Exactly degenerate eigenvectors come in an arbitrary basis; follow
            // the projection of the current vector onto that eigenspace.
            let span: Vec<&DVector<f64>> =
                pairs.iter().filter(|p| (p.0 - delta).abs() <= DEGENERATE_EIGEN_TOL).map(|p| &p.1).collect();
            if span.len() > 1 {
                let proj = span.iter().fold(DVector::zeros(v.len()), |acc, e| acc + e.dot(&vec[i]) * *e);
                if proj.norm() > 1e-3 {
                    v = proj.normalize();
                }
            }
            if v.dot(&vec[i]) < 0.0 {
                v = -v;
            }
            last_delta[i] = delta;
            let b2 = beta[i] * beta[i] + delta;
            if b2 < 0.0 {
                imaginary[i] = true;
                log::warn!("mode exponent became imaginary (beta^2 = {b2:.3e})");
                continue;
            }
            let nb = b2.sqrt();
            change = change.max((nb - beta[i]).abs());
            beta[i] = nb;
            next[i] = v;
        }
        for j in 1..cluster {
            for i in 0..j {
                if (beta[i] - beta[j]).abs() < DEGENERATE_EIGEN_TOL {
                    let d = next[i].dot(&next[j]);
                    let ni = next[i].clone();
                    next[j] -= d * ni;
                    next[j] = next[j].normalize();
                }
            }
        }
        vec = next;
        if change < settings.tol {
            converged = true;
            break;
        }
    }
    if !converged {
        return Err(Error::NonConvergence(format!(
            "mode refinement stagnated after {} sweeps (last Delta {:?})",
            settings.max_iterations, last_delta
        )));
    }
    Ok((0..cluster)
        .map(|i| {
            let mut mode = NormalMode::from_stacked(beta[i], &vec[i], h.dim(), n_cut);
            mode.imaginary = imaginary[i];
            mode.residual = if imaginary[i] { f64::NAN } else { block_residual(h, &mode) };
            mode
        })
        .collect())
}

/// Refine a single seed.
pub fn refine_mode(h: &HessianSeries, beta: f64, stacked: DVector<f64>, settings: &ModeSettings) -> Result<NormalMode> {
    Ok(resolve_degeneracy(h, &[(beta, stacked)], settings)?.remove(0))
}

/// `|M(beta) C| / |C|` for the truncated block system.
pub fn block_residual(h: &HessianSeries, mode: &NormalMode) -> f64 {
    let c = mode.stacked();
    (block_matrix(h, mode.beta, mode.n_cut()) * &c).norm() / c.norm()
}
