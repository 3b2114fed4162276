use num_complex::Complex64;

use super::matrix::{ComplexMatrix, ZERO};
use crate::error::{Error, Result};

/// Relative off-diagonal Frobenius norm at which Jacobi iteration stops.
pub const OFF_DIAGONAL_TOLERANCE: f64 = 1e-14;
/// Maximum number of cyclic Jacobi sweeps.
pub const MAX_SWEEPS: usize = 100;
/// Input asymmetry accepted by the Hermitian routines.
pub const HERMITIAN_TOLERANCE: f64 = 1e-9;
/// Negative eigenvalues above `-PSD_CLAMP` are treated as rounding noise.
pub const PSD_CLAMP: f64 = 1e-8;

/// Spectral decomposition `A = V diag(values) V^H` of a Hermitian matrix.
#[derive(Debug, Clone)]
pub struct EigenDecomposition {
    /// Eigenvalues in ascending order.
    pub values: Vec<f64>,
    /// Orthonormal eigenvectors stored as columns, in the order of `values`.
    pub vectors: ComplexMatrix,
}

impl EigenDecomposition {
    /// Rebuilds `V diag(f(λ)) V^H`.
    pub fn map_spectrum(&self, f: impl Fn(f64) -> f64) -> ComplexMatrix {
        let n = self.values.len();
        let mapped: Vec<f64> = self.values.iter().map(|&v| f(v)).collect();
        let v = &self.vectors;
        let mut out = ComplexMatrix::zeros(n, n);
        for r in 0..n {
            for c in r..n {
                let mut acc = ZERO;
                for (k, &lam) in mapped.iter().enumerate() {
                    if lam != 0.0 {
                        acc += v[(r, k)] * v[(c, k)].conj() * lam;
                    }
                }
                out[(r, c)] = acc;
                out[(c, r)] = acc.conj();
            }
        }
        out
    }

    pub fn reconstruct(&self) -> ComplexMatrix {
        self.map_spectrum(|x| x)
    }
}

fn check_hermitian(a: &ComplexMatrix) -> Result<()> {
    if !a.is_square() {
        return Err(Error::Dimension(format!(
            "expected a square matrix, got {}x{}",
            a.rows(),
            a.cols()
        )));
    }
    let residual = a.hermitian_residual();
    if residual > HERMITIAN_TOLERANCE {
        return Err(Error::NotHermitian { residual });
    }
    Ok(())
}

fn off_diagonal_norm(a: &ComplexMatrix) -> f64 {
    let n = a.rows();
    let mut acc = 0.0;
    for r in 0..n {
        for c in 0..n {
            if r != c {
                acc += a[(r, c)].norm_sqr();
            }
        }
    }
    acc.sqrt()
}

/// Eigendecomposition of a Hermitian matrix by cyclic complex Jacobi rotations.
///
/// The input is symmetrized as `(a + a^H) / 2` before iterating.
pub fn hermitian_eig(a: &ComplexMatrix) -> Result<EigenDecomposition> {
    check_hermitian(a)?;
    let n = a.rows();
    let mut m = a.hermitian_part();
    let mut v = ComplexMatrix::identity(n);

    let scale = m.frobenius_norm();
    if scale == 0.0 {
        return Ok(EigenDecomposition {
            values: vec![0.0; n],
            vectors: v,
        });
    }
    let tolerance = OFF_DIAGONAL_TOLERANCE * scale;
    let negligible = 1e-18 * scale;

    let mut off = off_diagonal_norm(&m);
    let mut sweeps = 0;
    while off > tolerance {
        if sweeps == MAX_SWEEPS {
            return Err(Error::Convergence { sweeps, residual: off });
        }
        sweeps += 1;
        let mut rotated = false;
        for p in 0..n {
            for q in p + 1..n {
                let z = m[(p, q)];
                let r = z.norm();
                if r <= negligible {
                    continue;
                }
                rotated = true;
                rotate(&mut m, &mut v, p, q, z, r);
            }
        }
        let next = off_diagonal_norm(&m);
        // Rounding floor: nothing left to rotate, or no progress at near-converged scale.
        let stalled = next >= off && next <= 1e3 * tolerance;
        off = next;
        if !rotated || stalled {
            break;
        }
    }

    let mut order: Vec<usize> = (0..n).collect();
    let diag: Vec<f64> = (0..n).map(|i| m[(i, i)].re).collect();
    order.sort_by(|&i, &j| diag[i].total_cmp(&diag[j]));
    let values = order.iter().map(|&i| diag[i]).collect();
    let mut vectors = ComplexMatrix::zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        for r in 0..n {
            vectors[(r, dst)] = v[(r, src)];
        }
    }
    Ok(EigenDecomposition { values, vectors })
}

/// One Jacobi rotation zeroing `m[p][q]`; accumulates the rotation into `v`.
fn rotate(m: &mut ComplexMatrix, v: &mut ComplexMatrix, p: usize, q: usize, z: Complex64, r: f64) {
    let n = m.rows();
    let phase = z / r;
    let app = m[(p, p)].re;
    let aqq = m[(q, q)].re;
    let theta = (aqq - app) / (2.0 * r);
    let t = if theta >= 0.0 {
        1.0 / (theta + (theta * theta + 1.0).sqrt())
    } else {
        -1.0 / (-theta + (theta * theta + 1.0).sqrt())
    };
    let c = 1.0 / (t * t + 1.0).sqrt();
    let s = t * c;
    let s_phase = phase * s;
    let s_phase_conj = s_phase.conj();

    // m <- m J with J = [[c, s e], [-s conj(e), c]] on (p, q)
    for k in 0..n {
        let akp = m[(k, p)];
        let akq = m[(k, q)];
        m[(k, p)] = akp * c - akq * s_phase_conj;
        m[(k, q)] = akp * s_phase + akq * c;
    }
    // m <- J^H m
    for k in 0..n {
        let apk = m[(p, k)];
        let aqk = m[(q, k)];
        m[(p, k)] = apk * c - aqk * s_phase;
        m[(q, k)] = apk * s_phase_conj + aqk * c;
    }
    m[(p, q)] = ZERO;
    m[(q, p)] = ZERO;
    m[(p, p)] = Complex64::new(m[(p, p)].re, 0.0);
    m[(q, q)] = Complex64::new(m[(q, q)].re, 0.0);

    for k in 0..n {
        let vkp = v[(k, p)];
        let vkq = v[(k, q)];
        v[(k, p)] = vkp * c - vkq * s_phase_conj;
        v[(k, q)] = vkp * s_phase + vkq * c;
    }
}

/// Principal square root of a positive semidefinite Hermitian matrix.
pub fn matrix_sqrt_psd(a: &ComplexMatrix) -> Result<ComplexMatrix> {
    let eig = hermitian_eig(a)?;
    if let Some(&worst) = eig.values.first() {
        if worst < -PSD_CLAMP {
            return Err(Error::NotPsd { eigenvalue: worst });
        }
    }
    Ok(eig.map_spectrum(|x| x.max(0.0).sqrt()))
}

/// Trace norm `Σ |λ_i|` of a Hermitian matrix.
pub fn trace_norm(a: &ComplexMatrix) -> Result<f64> {
    let eig = hermitian_eig(a)?;
    Ok(eig.values.iter().map(|x| x.abs()).sum())
}

/// Nearest positive semidefinite matrix with the requested trace.
///
/// Negative eigenvalues are zeroed from the smallest upwards and their mass is
/// spread evenly over the eigenvalues that remain, which keeps the trace fixed
/// until the final rescale.
pub fn psd_project(a: &ComplexMatrix, target_trace: f64) -> Result<ComplexMatrix> {
    if !(target_trace > 0.0) {
        return Err(Error::Degenerate(format!(
            "target trace must be positive, got {target_trace}"
        )));
    }
    let eig = hermitian_eig(a)?;
    let ascending = &eig.values;
    if ascending.iter().all(|&x| x <= 0.0) {
        return Err(Error::Degenerate(
            "all eigenvalues are non-positive; no PSD projection exists".into(),
        ));
    }
    let n = ascending.len();
    // Walk eigenvalues from the most negative (index 0) upwards.
    let mut projected = ascending.clone();
    let total: f64 = ascending.iter().sum();
    if total > 0.0 {
        let mut deficit = 0.0;
        let mut remaining = n;
        for i in 0..n {
            if projected[i] + deficit / remaining as f64 >= 0.0 {
                break;
            }
            deficit += projected[i];
            projected[i] = 0.0;
            remaining -= 1;
        }
        let share = deficit / remaining as f64;
        let zeroed = n - remaining;
        for value in projected.iter_mut().skip(zeroed) {
            *value += share;
        }
    } else {
        // Negative trace: redistribution would wipe the spectrum, clip instead.
        for value in projected.iter_mut() {
            *value = value.max(0.0);
        }
    }
    let sum: f64 = projected.iter().sum();
    let factor = target_trace / sum;
    let spectral = EigenDecomposition {
        values: projected.iter().map(|x| x * factor).collect(),
        vectors: eig.vectors,
    };
    let mut out = spectral.reconstruct();
    // Pin the trace exactly against reconstruction rounding.
    let tr = out.trace().re;
    if tr > 0.0 {
        out = out.scale_real(target_trace / tr);
    }
    Ok(out)
}
