//! Pairwise Coulomb term of the dimensionless equation of motion.

use nalgebra::{DMatrix, Matrix3, Vector3};

use crate::error::{Error, Result};

/// `4 * sum_{j != i} (R_i - R_j) / |R_i - R_j|^3` for every ion.
pub fn coulomb_acceleration(positions: &[Vector3<f64>]) -> Result<Vec<Vector3<f64>>> {
    let mut out = vec![Vector3::zeros(); positions.len()];
    coulomb_acceleration_into(positions, &mut out)?;
    Ok(out)
}

pub fn coulomb_acceleration_into(positions: &[Vector3<f64>], out: &mut [Vector3<f64>]) -> Result<()> {
    debug_assert_eq!(positions.len(), out.len());
    out.iter_mut().for_each(|v| *v = Vector3::zeros());
    for i in 0..positions.len() {
        for j in (i + 1)..positions.len() {
            let d = positions[i] - positions[j];
            let r2 = d.norm_squared();
            if !(r2 > 0.0) {
                return Err(Error::Singularity(i, j));
            }
            let f = d * (4.0 / (r2 * r2.sqrt()));
            out[i] += f;
            out[j] -= f;
        }
    }
    Ok(())
}

/// Pair potential `sum_{i<j} 4 / |R_i - R_j|` whose negative gradient is the
/// acceleration above.
pub fn coulomb_potential(positions: &[Vector3<f64>]) -> Result<f64> {
    let mut u = 0.0;
    for i in 0..positions.len() {
        for j in (i + 1)..positions.len() {
            let r = (positions[i] - positions[j]).norm();
            if !(r > 0.0) {
                return Err(Error::Singularity(i, j));
            }
            u += 4.0 / r;
        }
    }
    Ok(u)
}

/// Coulomb part `K` of the linearized EOM `r'' + (A - 2Q cos 2t) r + 4 K r = 0`.
///
/// Returned as a `3N x 3N` matrix indexed `3 i + sigma`. Off-diagonal blocks
/// are `(I - 3 u u^T) / r^3`; diagonal blocks make every block row sum to zero.
pub fn coulomb_hessian(positions: &[Vector3<f64>]) -> Result<DMatrix<f64>> {
    let n = positions.len();
    let mut k = DMatrix::zeros(3 * n, 3 * n);
    coulomb_hessian_into(positions, &mut k)?;
    Ok(k)
}

pub fn coulomb_hessian_into(positions: &[Vector3<f64>], k: &mut DMatrix<f64>) -> Result<()> {
    let n = positions.len();
    debug_assert_eq!(k.nrows(), 3 * n);
    k.fill(0.0);
    for i in 0..n {
        for j in (i + 1)..n {
            let d = positions[i] - positions[j];
            let r2 = d.norm_squared();
            if !(r2 > 0.0) {
                return Err(Error::Singularity(i, j));
            }
            let inv3 = 1.0 / (r2 * r2.sqrt());
            let blk: Matrix3<f64> = (Matrix3::identity() - 3.0 * d * d.transpose() / r2) * inv3;
            for a in 0..3 {
                for b in 0..3 {
                    let v = blk[(a, b)];
                    k[(3 * i + a, 3 * j + b)] = v;
                    k[(3 * j + a, 3 * i + b)] = v;
                    k[(3 * i + a, 3 * i + b)] -= v;
                    k[(3 * j + a, 3 * j + b)] -= v;
                }
            }
        }
    }
    Ok(())
}

/// Smallest pairwise distance, with the pair attaining it.
pub fn min_distance(positions: &[Vector3<f64>]) -> Option<(f64, usize, usize)> {
    let mut best: Option<(f64, usize, usize)> = None;
    for i in 0..positions.len() {
        for j in (i + 1)..positions.len() {
            let r = (positions[i] - positions[j]).norm();
            if best.is_none_or(|b| r < b.0) {
                best = Some((r, i, j));
            }
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn two_ions_on_axis() {
        let d = 3.0;
        let p = [Vector3::new(0.0, 0.0, 0.0), Vector3::new(d, 0.0, 0.0)];
        let a = coulomb_acceleration(&p).unwrap();
        assert!((a[0].x + 4.0 / (d * d)).abs() < 1e-15);
        assert!((a[1].x - 4.0 / (d * d)).abs() < 1e-15);
        assert_eq!(a[0].y, 0.0);
    }

    #[test]
    fn translation_invariant() {
        let p = [Vector3::new(0.1, 0.2, -0.3), Vector3::new(1.0, -0.5, 0.4), Vector3::new(-0.7, 0.9, 1.1)];
        let s = Vector3::new(5.0, -2.0, 0.25);
        let shifted: Vec<_> = p.iter().map(|v| v + s).collect();
        let a = coulomb_acceleration(&p).unwrap();
        let b = coulomb_acceleration(&shifted).unwrap();
        for (x, y) in a.iter().zip(&b) {
            assert!((x - y).norm() < 1e-13);
        }
    }

    #[test]
    fn hessian_matches_acceleration_jacobian() {
        let p = vec![Vector3::new(0.1, 0.2, -0.3), Vector3::new(1.0, -0.5, 0.4), Vector3::new(-0.7, 0.9, 1.1)];
        let k = coulomb_hessian(&p).unwrap();
        let h = 1e-6;
        for col in 0..9 {
            let mut plus = p.clone();
            let mut minus = p.clone();
            plus[col / 3][col % 3] += h;
            minus[col / 3][col % 3] -= h;
            let ap = coulomb_acceleration(&plus).unwrap();
            let am = coulomb_acceleration(&minus).unwrap();
            for row in 0..9 {
                let fd = (ap[row / 3][row % 3] - am[row / 3][row % 3]) / (2.0 * h);
                assert!((fd + 4.0 * k[(row, col)]).abs() < 1e-6, "{row} {col}");
            }
        }
    }

    #[test]
    fn coincident_pair_reported() {
        let p = [Vector3::new(0.0, 0.0, 0.0), Vector3::new(1.0, 0.0, 0.0), Vector3::new(1.0, 0.0, 0.0)];
        assert!(matches!(coulomb_acceleration(&p), Err(Error::Singularity(1, 2))));
    }
}
