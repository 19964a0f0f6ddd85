//! Dense symmetric eigen-solvers and small vector helpers.
//!
//! Matrices are `d x d`, row-major `Vec<f64>`. The workhorse is a cyclic
//! Jacobi sweep, which is dependency-free and converges to machine precision
//! for the desk-scale dimensions this crate targets; a Gershgorin-shifted
//! power iteration takes over for the top eigenpair above [`JACOBI_MAX_DIM`].

use crate::error::{GaeError, Result};

/// Largest dimension handled by full Jacobi decomposition.
pub const JACOBI_MAX_DIM: usize = 512;

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// `a + s * b`.
pub fn axpy(a: &[f64], s: f64, b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x + s * y).collect()
}

pub fn sub(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}

pub fn scale(a: &[f64], s: f64) -> Vec<f64> {
    a.iter().map(|x| x * s).collect()
}

pub fn matvec(m: &[f64], d: usize, v: &[f64]) -> Vec<f64> {
    (0..d).map(|i| dot(&m[i * d..(i + 1) * d], v)).collect()
}

pub fn max_abs(m: &[f64]) -> f64 {
    m.iter().fold(0.0, |acc, x| acc.max(x.abs()))
}

fn check_symmetric(m: &[f64], d: usize) -> Result<()> {
    let scale = 1.0 + max_abs(m);
    for i in 0..d {
        for j in (i + 1)..d {
            let asym = (m[i * d + j] - m[j * d + i]).abs();
            if asym > 1e-10 * scale {
                return Err(GaeError::Validation(format!(
                    "matrix is not symmetric: |a[{i}][{j}] - a[{j}][{i}]| = {asym:e}"
                )));
            }
        }
    }
    Ok(())
}

/// Full eigendecomposition of a symmetric matrix by cyclic Jacobi rotations.
///
/// Returns `(eigenvalues, eigenvectors)` with eigenvectors stored as rows of
/// the returned matrix (row `k` is the unit eigenvector for `eigenvalues[k]`),
/// sorted by descending eigenvalue.
pub fn jacobi_eigen(m: &[f64], d: usize) -> Result<(Vec<f64>, Vec<f64>)> {
    assert_eq!(m.len(), d * d, "matrix size mismatch");
    check_symmetric(m, d)?;
    let mut a = m.to_vec();
    // v accumulates the rotations; v^T a v stays diagonalizing, rows of the
    // final transpose are the eigenvectors.
    let mut v = vec![0.0; d * d];
    for i in 0..d {
        v[i * d + i] = 1.0;
    }
    let frob: f64 = m.iter().map(|x| x * x).sum::<f64>().sqrt();
    let tol = 1e-14 * (1.0 + frob);
    let mut converged = false;
    for _sweep in 0..64 {
        let mut off = 0.0f64;
        for i in 0..d {
            for j in (i + 1)..d {
                off += 2.0 * a[i * d + j] * a[i * d + j];
            }
        }
        if off.sqrt() <= tol {
            converged = true;
            break;
        }
        for p in 0..d {
            for q in (p + 1)..d {
                let apq = a[p * d + q];
                if apq.abs() <= tol / (d as f64) {
                    continue;
                }
                let app = a[p * d + p];
                let aqq = a[q * d + q];
                let theta = (aqq - app) / (2.0 * apq);
                // stable tangent of the rotation angle
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..d {
                    let akp = a[k * d + p];
                    let akq = a[k * d + q];
                    a[k * d + p] = c * akp - s * akq;
                    a[k * d + q] = s * akp + c * akq;
                }
                for k in 0..d {
                    let apk = a[p * d + k];
                    let aqk = a[q * d + k];
                    a[p * d + k] = c * apk - s * aqk;
                    a[q * d + k] = s * apk + c * aqk;
                }
                for k in 0..d {
                    let vkp = v[k * d + p];
                    let vkq = v[k * d + q];
                    v[k * d + p] = c * vkp - s * vkq;
                    v[k * d + q] = s * vkp + c * vkq;
                }
            }
        }
    }
    if !converged {
        // one last check: Jacobi essentially always converges in < 20 sweeps
        let mut off = 0.0f64;
        for i in 0..d {
            for j in (i + 1)..d {
                off += 2.0 * a[i * d + j] * a[i * d + j];
            }
        }
        if off.sqrt() > tol * 10.0 {
            return Err(GaeError::Convergence(
                "jacobi sweeps did not reduce the off-diagonal mass".into(),
            ));
        }
    }
    let mut order: Vec<usize> = (0..d).collect();
    order.sort_by(|&i, &j| a[j * d + j].partial_cmp(&a[i * d + i]).unwrap());
    let mut vals = Vec::with_capacity(d);
    let mut vecs = vec![0.0; d * d];
    for (row, &k) in order.iter().enumerate() {
        vals.push(a[k * d + k]);
        for i in 0..d {
            vecs[row * d + i] = v[i * d + k];
        }
        canonicalize_sign(&mut vecs[row * d..(row + 1) * d]);
    }
    Ok((vals, vecs))
}

/// Flip the vector so its largest-magnitude component is positive.
fn canonicalize_sign(v: &mut [f64]) {
    let mut imax = 0;
    for i in 1..v.len() {
        if v[i].abs() > v[imax].abs() {
            imax = i;
        }
    }
    if v[imax] < 0.0 {
        for x in v.iter_mut() {
            *x = -*x;
        }
    }
}

/// Top eigenpair `(lambda, v)` of a symmetric matrix, with
/// `lambda >= lambda_max - tol` and `||Hv - lambda v|| <= tol * (1 + ||H||)`.
///
/// Dense Jacobi up to [`JACOBI_MAX_DIM`]; above that, power iteration on the
/// positive-shifted matrix `H + cI` with `c` a Gershgorin bound.
pub fn top_eigenpair(m: &[f64], d: usize, tol: f64) -> Result<(f64, Vec<f64>)> {
    if tol <= 0.0 {
        return Err(GaeError::Validation("tol must be positive".into()));
    }
    if d <= JACOBI_MAX_DIM {
        let (vals, vecs) = jacobi_eigen(m, d)?;
        return Ok((vals[0], vecs[..d].to_vec()));
    }
    check_symmetric(m, d)?;
    let shift = (0..d)
        .map(|i| (0..d).map(|j| m[i * d + j].abs()).sum::<f64>())
        .fold(0.0f64, f64::max);
    let op_scale = 1.0 + shift;
    let mut v: Vec<f64> = (0..d).map(|i| 1.0 + (i as f64) / (d as f64)).collect();
    let n = norm(&v);
    v.iter_mut().for_each(|x| *x /= n);
    let max_iters = 200_000usize;
    for _ in 0..max_iters {
        let mut w = matvec(m, d, &v);
        for i in 0..d {
            w[i] += shift * v[i];
        }
        let n = norm(&w);
        if n == 0.0 {
            // H = -shift * I exactly; any unit vector is an eigenvector
            return Ok((-shift, v));
        }
        w.iter_mut().for_each(|x| *x /= n);
        let hv = matvec(m, d, &w);
        let lambda = dot(&w, &hv);
        let resid = norm(&sub(&hv, &scale(&w, lambda)));
        if resid <= tol * op_scale {
            canonicalize_sign(&mut w);
            return Ok((lambda, w));
        }
        v = w;
    }
    Err(GaeError::Convergence(format!(
        "power iteration exceeded {max_iters} iterations at tol {tol:e}"
    )))
}

/// Smallest eigenvalue of a symmetric matrix (dense path only).
pub fn min_eigenvalue(m: &[f64], d: usize) -> Result<f64> {
    let (vals, _) = jacobi_eigen(m, d)?;
    Ok(*vals.last().unwrap())
}

/// Largest eigenvalue of a symmetric matrix (dense path only).
pub fn max_eigenvalue(m: &[f64], d: usize) -> Result<f64> {
    let (vals, _) = jacobi_eigen(m, d)?;
    Ok(vals[0])
}
