//! Cyclic Jacobi eigensolver for the small symmetric blocks produced by the
//! certifiers.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::linalg::asymmetry;

/// Largest dimension accepted by [`symmetric_eig`].
pub const MAX_DIM: usize = 16;

const OFF_TOL: f64 = 1e-13;
const ASYM_TOL: f64 = 1e-10;
const MAX_SWEEPS: usize = 100;

/// Symmetric eigen-decomposition.
#[derive(Debug, Clone)]
pub struct SymEig {
    /// Eigenvalues, ascending.
    pub values: DVector<f64>,
    /// Orthonormal eigenvectors stored as columns, matching `values`.
    pub vectors: DMatrix<f64>,
}

impl SymEig {
    pub fn max(&self) -> f64 {
        self.values[self.values.len() - 1]
    }

    pub fn min(&self) -> f64 {
        self.values[0]
    }

    pub fn top_vector(&self) -> DVector<f64> {
        self.vectors.column(self.vectors.ncols() - 1).into_owned()
    }
}

/// Eigenvalues (ascending) and eigenvectors of a symmetric matrix by cyclic
/// Jacobi rotations.
///
/// Sweeps until the off-diagonal Frobenius norm drops below `1e-13·‖A‖_F`.
pub fn symmetric_eig(a: &DMatrix<f64>) -> Result<SymEig> {
    let n = a.nrows();
    if n != a.ncols() {
        return Err(Error::DimensionMismatch { expected: n, got: a.ncols() });
    }
    if n == 0 || n > MAX_DIM {
        return Err(Error::InvalidParameter(format!(
            "symmetric_eig supports dimensions 1..={MAX_DIM}, got {n}"
        )));
    }
    let asym = asymmetry(a);
    if asym > ASYM_TOL {
        return Err(Error::NotSymmetric(asym));
    }
    if a.iter().any(|x| !x.is_finite()) {
        return Err(Error::NonFinite("matrix entry".into()));
    }

    // work on the exactly symmetrized copy
    let mut m = (a + a.transpose()) * 0.5;
    let mut v = DMatrix::<f64>::identity(n, n);
    let norm = m.norm();

    for _ in 0..MAX_SWEEPS {
        if off_diagonal_norm(&m) <= OFF_TOL * norm {
            break;
        }
        for p in 0..n - 1 {
            for q in (p + 1)..n {
                let apq = m[(p, q)];
                if apq == 0.0 {
                    continue;
                }
                let theta = (m[(q, q)] - m[(p, p)]) / (2.0 * apq);
                let t = if theta.abs() > 1e150 {
                    0.5 / theta
                } else {
                    let sign = if theta >= 0.0 { 1.0 } else { -1.0 };
                    sign / (theta.abs() + (theta * theta + 1.0).sqrt())
                };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                rotate(&mut m, &mut v, p, q, c, s);
            }
        }
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| m[(i, i)].total_cmp(&m[(j, j)]));
    let values = DVector::from_iterator(n, order.iter().map(|&i| m[(i, i)]));
    let mut vectors = DMatrix::zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        vectors.set_column(dst, &v.column(src));
    }
    Ok(SymEig { values, vectors })
}

fn off_diagonal_norm(m: &DMatrix<f64>) -> f64 {
    let n = m.nrows();
    let mut acc = 0.0;
    for i in 0..n {
        for j in 0..n {
            if i != j {
                acc += m[(i, j)] * m[(i, j)];
            }
        }
    }
    acc.sqrt()
}

// A <- Jᵀ A J, V <- V J with J the (p, q) plane rotation [[c, s], [-s, c]].
fn rotate(m: &mut DMatrix<f64>, v: &mut DMatrix<f64>, p: usize, q: usize, c: f64, s: f64) {
    let n = m.nrows();
    for k in 0..n {
        let (mkp, mkq) = (m[(k, p)], m[(k, q)]);
        m[(k, p)] = c * mkp - s * mkq;
        m[(k, q)] = s * mkp + c * mkq;
    }
    for k in 0..n {
        let (mpk, mqk) = (m[(p, k)], m[(q, k)]);
        m[(p, k)] = c * mpk - s * mqk;
        m[(q, k)] = s * mpk + c * mqk;
    }
    m[(p, q)] = 0.0;
    m[(q, p)] = 0.0;
    for k in 0..n {
        let (vkp, vkq) = (v[(k, p)], v[(k, q)]);
        v[(k, p)] = c * vkp - s * vkq;
        v[(k, q)] = s * vkp + c * vkq;
    }
}

/// Largest eigenvalue of a symmetric matrix.
pub fn max_eigenvalue(a: &DMatrix<f64>) -> Result<f64> {
    Ok(symmetric_eig(a)?.max())
}

/// True iff the largest eigenvalue is at most `tol`.
pub fn check_nsd(a: &DMatrix<f64>, tol: f64) -> Result<bool> {
    Ok(max_eigenvalue(a)? <= tol)
}
