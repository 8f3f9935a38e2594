//! Eigenvalues of complex Hermitian matrices by cyclic Jacobi rotations.
//!
//! Only eigenvalues are needed here (spectral truncation checks work on
//! principal submatrices), so rotations are applied without accumulating
//! vectors. Input is checked against its conjugate transpose and then
//! symmetrized before the sweeps.

use num_complex::Complex64;

use crate::error::{MslabError, Result};

fn off_diagonal_sq(a: &[Vec<Complex64>]) -> f64 {
    let n = a.len();
    let mut s = 0.0;
    for j in 0..n {
        for k in 0..n {
            if j != k {
                s += a[j][k].norm_sqr();
            }
        }
    }
    s
}

fn frobenius_sq(a: &[Vec<Complex64>]) -> f64 {
    a.iter().flatten().map(|v| v.norm_sqr()).sum()
}

/// Eigenvalues of the Hermitian matrix `a` (flat row-major, `n x n`),
/// ascending. Fails with `NonHermitian` if `a` differs from its conjugate
/// transpose by more than `herm_tol` in any entry.
pub fn hermitian_eigenvalues(a: &[Complex64], n: usize, herm_tol: f64) -> Result<Vec<f64>> {
    assert_eq!(a.len(), n * n, "matrix storage must be n*n");
    if n == 0 {
        return Ok(Vec::new());
    }

    let mut max_asymmetry = 0.0f64;
    for j in 0..n {
        for k in 0..n {
            let d = (a[j * n + k] - a[k * n + j].conj()).norm();
            max_asymmetry = max_asymmetry.max(d);
        }
    }
    if max_asymmetry > herm_tol {
        return Err(MslabError::NonHermitian { max_asymmetry });
    }

    // Symmetrize to remove the residual asymmetry before rotating.
    let mut m: Vec<Vec<Complex64>> = (0..n)
        .map(|j| {
            (0..n)
                .map(|k| 0.5 * (a[j * n + k] + a[k * n + j].conj()))
                .collect()
        })
        .collect();
    for j in 0..n {
        m[j][j] = Complex64::new(m[j][j].re, 0.0);
    }

    let scale = frobenius_sq(&m).max(f64::MIN_POSITIVE);
    let target = 1e-26 * scale;
    let mut converged = false;
    for _sweep in 0..60 {
        if off_diagonal_sq(&m) <= target {
            converged = true;
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let g = m[p][q];
                let g_abs = g.norm();
                if g_abs == 0.0 {
                    continue;
                }
                let w = g / g_abs;
                let alpha = m[p][p].re;
                let beta = m[q][q].re;
                let tau = (beta - alpha) / (2.0 * g_abs);
                let t = if tau == 0.0 {
                    1.0
                } else {
                    tau.signum() / (tau.abs() + (1.0 + tau * tau).sqrt())
                };
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = t * c;

                // Columns p and q.
                for k in 0..n {
                    let ap = m[k][p];
                    let aq = m[k][q];
                    m[k][p] = c * ap - s * w.conj() * aq;
                    m[k][q] = s * w * ap + c * aq;
                }
                // Rows p and q.
                for k in 0..n {
                    let rp = m[p][k];
                    let rq = m[q][k];
                    m[p][k] = c * rp - s * w * rq;
                    m[q][k] = s * w.conj() * rp + c * rq;
                }
                m[p][q] = Complex64::new(0.0, 0.0);
                m[q][p] = Complex64::new(0.0, 0.0);
                m[p][p] = Complex64::new(m[p][p].re, 0.0);
                m[q][q] = Complex64::new(m[q][q].re, 0.0);
            }
        }
    }
    if !converged && off_diagonal_sq(&m) > target {
        return Err(MslabError::NonConvergence {
            detail: "Jacobi sweeps did not annihilate the off-diagonal".to_string(),
        });
    }

    let mut eigs: Vec<f64> = (0..n).map(|j| m[j][j].re).collect();
    eigs.sort_by(f64::total_cmp);
    Ok(eigs)
}
