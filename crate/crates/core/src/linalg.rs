//! Small dense helpers shared by the LMI builders.

use nalgebra::DMatrix;

pub type Mat = DMatrix<f64>;

/// Kronecker product `a ⊗ b`.
pub fn kron(a: &Mat, b: &Mat) -> Mat {
    let (ar, ac) = a.shape();
    let (br, bc) = b.shape();
    let mut out = Mat::zeros(ar * br, ac * bc);
    for i in 0..ar {
        for j in 0..ac {
            let s = a[(i, j)];
            if s == 0.0 {
                continue;
            }
            for k in 0..br {
                for l in 0..bc {
                    out[(i * br + k, j * bc + l)] = s * b[(k, l)];
                }
            }
        }
    }
    out
}

/// `a ⊗ I_n`.
pub fn kron_eye(a: &Mat, n: usize) -> Mat {
    kron(a, &Mat::identity(n, n))
}

/// Builds a matrix from scalar rows, then lifts it with `⊗ I_n`.
pub fn lifted(rows: usize, cols: usize, entries: &[f64], n: usize) -> Mat {
    kron_eye(&Mat::from_row_slice(rows, cols, entries), n)
}

/// Stacks blocks `[[a, b], [c, d]]`.
pub fn block2(a: &Mat, b: &Mat, c: &Mat, d: &Mat) -> Mat {
    assert_eq!(a.nrows(), b.nrows());
    assert_eq!(c.nrows(), d.nrows());
    assert_eq!(a.ncols(), c.ncols());
    assert_eq!(b.ncols(), d.ncols());
    let (r1, c1) = a.shape();
    let (r2, c2) = d.shape();
    let mut out = Mat::zeros(r1 + r2, c1 + c2);
    out.view_mut((0, 0), (r1, c1)).copy_from(a);
    out.view_mut((0, c1), (r1, c2)).copy_from(b);
    out.view_mut((r1, 0), (r2, c1)).copy_from(c);
    out.view_mut((r1, c1), (r2, c2)).copy_from(d);
    out
}

/// Block-diagonal `diag(a, b)`.
pub fn block_diag(a: &Mat, b: &Mat) -> Mat {
    block2(
        a,
        &Mat::zeros(a.nrows(), b.ncols()),
        &Mat::zeros(b.nrows(), a.ncols()),
        b,
    )
}

/// Relative asymmetry `max|a_ij - a_ji| / max(1, max|a_ij|)`.
pub fn asymmetry(a: &Mat) -> f64 {
    if a.nrows() != a.ncols() {
        return f64::INFINITY;
    }
    let scale = a.amax().max(1.0);
    let mut worst: f64 = 0.0;
    for i in 0..a.nrows() {
        for j in (i + 1)..a.ncols() {
            worst = worst.max((a[(i, j)] - a[(j, i)]).abs());
        }
    }
    worst / scale
}

/// `(a + aᵀ)/2`.
pub fn symmetrize(a: &Mat) -> Mat {
    (a + a.transpose()) * 0.5
}

/// Basis of symmetric `d×d` matrices, ordered `(0,0), (0,1), …, (0,d-1), (1,1), …`.
///
/// Off-diagonal elements carry ones in both mirrored positions, so a matrix
/// `P` decomposes as `Σ P_ij E_ij` over `i ≤ j`.
pub fn sym_basis(d: usize) -> Vec<((usize, usize), Mat)> {
    let mut out = Vec::with_capacity(d * (d + 1) / 2);
    for i in 0..d {
        for j in i..d {
            let mut e = Mat::zeros(d, d);
            e[(i, j)] = 1.0;
            e[(j, i)] = 1.0;
            out.push(((i, j), e));
        }
    }
    out
}

/// Inverse of [`sym_basis`]: assembles a symmetric matrix from its upper triangle.
pub fn sym_from_upper(d: usize, upper: &[f64]) -> Mat {
    assert_eq!(upper.len(), d * (d + 1) / 2);
    let mut m = Mat::zeros(d, d);
    let mut idx = 0;
    for i in 0..d {
        for j in i..d {
            m[(i, j)] = upper[idx];
            m[(j, i)] = upper[idx];
            idx += 1;
        }
    }
    m
}
