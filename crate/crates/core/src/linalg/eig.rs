use num_complex::Complex64 as C64;

use crate::error::{CoreError, Result};
use crate::linalg::matrix::{ComplexMatrix, ONE, ZERO};

const MAX_SWEEPS: usize = 100;
// Relative Hermiticity tolerance for inputs; looser than convergence because
// callers hand us matrices assembled from long floating-point pipelines.
const HERMITIAN_TOL: f64 = 1e-10;

fn off_diagonal_norm(a: &ComplexMatrix) -> f64 {
    let n = a.rows();
    let mut s = 0.0;
    for r in 0..n {
        for c in 0..n {
            if r != c {
                s += a[(r, c)].norm_sqr();
            }
        }
    }
    s.sqrt()
}

/// Eigendecomposition of a Hermitian matrix by cyclic complex Jacobi
/// rotations.
///
/// Returns eigenvalues in ascending order and a unitary whose columns are
/// the matching eigenvectors, so `m V = V diag(lambda)`. Convergence target
/// is an off-diagonal Frobenius norm below 1e-13 times the norm of the
/// input. Jacobi is slow compared to tridiagonalization but unconditionally
/// stable and exactly preserves Hermitian structure, which is what the
/// witness pipeline needs at these dimensions.
pub fn eig_hermitian(m: &ComplexMatrix) -> Result<(Vec<f64>, ComplexMatrix)> {
    if !m.is_square() {
        return Err(CoreError::DimensionMismatch {
            context: "eig_hermitian",
            expected: m.rows(),
            got: m.cols(),
        });
    }
    let scale = m.max_abs().max(1.0);
    let dev = m.hermitian_deviation();
    if dev > HERMITIAN_TOL * scale {
        return Err(CoreError::NonHermitian { deviation: dev });
    }

    let n = m.rows();
    // work on the exactly-Hermitian part so roundoff asymmetry cannot leak
    // imaginary parts into the eigenvalues
    let mut a = m.hermitize();
    let mut v = ComplexMatrix::identity(n);
    let norm = a.frobenius_norm();
    if norm == 0.0 {
        return Ok((vec![0.0; n], v));
    }
    let target = 1e-13 * norm;

    let mut converged = off_diagonal_norm(&a) <= target;
    let mut sweeps = 0;
    while !converged {
        if sweeps == MAX_SWEEPS {
            return Err(CoreError::NoConvergence { sweeps });
        }
        for p in 0..n - 1 {
            for q in p + 1..n {
                let beta = a[(p, q)];
                let abs_b = beta.norm();
                if abs_b == 0.0 {
                    continue;
                }
                let phase = beta / abs_b; // e^{i phi}
                let alpha = a[(p, p)].re;
                let gamma = a[(q, q)].re;
                let tau = (gamma - alpha) / (2.0 * abs_b);
                // stable root of t^2 + 2 tau t - 1 = 0, |t| <= 1
                let sign = if tau < 0.0 { -1.0 } else { 1.0 };
                let t = sign / (tau.abs() + (1.0 + tau * tau).sqrt());
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = t * c;
                let sp = phase * s; // s e^{i phi}
                let spc = phase.conj() * s; // s e^{-i phi}

                // A <- J^dag A J, J the unitary rotation in the (p, q) plane
                for k in 0..n {
                    let akp = a[(k, p)];
                    let akq = a[(k, q)];
                    a[(k, p)] = c * akp - spc * akq;
                    a[(k, q)] = sp * akp + c * akq;
                }
                for k in 0..n {
                    let apk = a[(p, k)];
                    let aqk = a[(q, k)];
                    a[(p, k)] = c * apk - sp * aqk;
                    a[(q, k)] = spc * apk + c * aqk;
                }
                a[(p, q)] = ZERO;
                a[(q, p)] = ZERO;
                a[(p, p)] = C64::new(a[(p, p)].re, 0.0);
                a[(q, q)] = C64::new(a[(q, q)].re, 0.0);

                for k in 0..n {
                    let vkp = v[(k, p)];
                    let vkq = v[(k, q)];
                    v[(k, p)] = c * vkp - spc * vkq;
                    v[(k, q)] = sp * vkp + c * vkq;
                }
            }
        }
        sweeps += 1;
        converged = off_diagonal_norm(&a) <= target;
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| a[(i, i)].re.partial_cmp(&a[(j, j)].re).unwrap());
    let eigenvalues: Vec<f64> = order.iter().map(|&i| a[(i, i)].re).collect();
    let vectors = ComplexMatrix::from_fn(n, n, |r, c| v[(r, order[c])]);
    Ok((eigenvalues, vectors))
}

/// Eigenvalues only, ascending.
pub fn eigvals_hermitian(m: &ComplexMatrix) -> Result<Vec<f64>> {
    eig_hermitian(m).map(|(vals, _)| vals)
}

// An eigenvalue this far below zero is genuine indefiniteness, not roundoff.
const PSD_FAIL: f64 = -1e-8;

/// Hermitian square root of a positive semidefinite matrix.
///
/// Eigenvalues slightly below zero (roundoff from upstream arithmetic) are
/// clamped to zero; anything below -1e-8 is treated as a real violation.
pub fn psd_sqrt(m: &ComplexMatrix) -> Result<ComplexMatrix> {
    let (vals, vecs) = eig_hermitian(m)?;
    if let Some(&min) = vals.first() {
        if min < PSD_FAIL {
            return Err(CoreError::NotPositiveSemidefinite {
                min_eigenvalue: min,
            });
        }
    }
    let sqrt_vals: Vec<f64> = vals.iter().map(|&x| x.max(0.0).sqrt()).collect();
    let n = m.rows();
    // V sqrt(Lambda) V^dag
    let mut scaled = vecs.clone();
    for c in 0..n {
        for r in 0..n {
            scaled[(r, c)] *= sqrt_vals[c];
        }
    }
    Ok(scaled.mul(&vecs.dagger()))
}

/// True when `m + shift * I` admits a Cholesky factorization, i.e. `m` is
/// positive semidefinite up to `shift`.
pub fn is_psd_within(m: &ComplexMatrix, shift: f64) -> bool {
    let n = m.rows();
    let mut shifted = m.clone();
    for i in 0..n {
        shifted[(i, i)] += shift * ONE;
    }
    shifted.cholesky().is_some()
}
