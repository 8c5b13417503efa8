//! Tiny fixed-size helpers for 2-vectors and 2×2 matrices.

pub type Vec2 = [f64; 2];
/// Row-major 2×2 matrix.
pub type Mat2 = [[f64; 2]; 2];

pub const IDENTITY: Mat2 = [[1.0, 0.0], [0.0, 1.0]];

#[inline]
pub fn det(m: &Mat2) -> f64 {
    m[0][0] * m[1][1] - m[0][1] * m[1][0]
}

#[inline]
pub fn mat_vec(m: &Mat2, v: Vec2) -> Vec2 {
    [m[0][0] * v[0] + m[0][1] * v[1], m[1][0] * v[0] + m[1][1] * v[1]]
}

/// Inverse, or `None` when `|det| <= tol`.
pub fn inverse(m: &Mat2, tol: f64) -> Option<Mat2> {
    let d = det(m);
    if !(d.abs() > tol) {
        return None;
    }
    Some([[m[1][1] / d, -m[0][1] / d], [-m[1][0] / d, m[0][0] / d]])
}

#[inline]
pub fn transpose(m: &Mat2) -> Mat2 {
    [[m[0][0], m[1][0]], [m[0][1], m[1][1]]]
}

#[inline]
pub fn dot2(a: Vec2, b: Vec2) -> f64 {
    a[0] * b[0] + a[1] * b[1]
}


/// Eigenvalues of a symmetric 3×3 matrix by cyclic Jacobi rotations.
pub fn sym3_eigenvalues(mut a: [[f64; 3]; 3]) -> [f64; 3] {
    for _sweep in 0..64 {
        let off = a[0][1] * a[0][1] + a[0][2] * a[0][2] + a[1][2] * a[1][2];
        let diag = a[0][0] * a[0][0] + a[1][1] * a[1][1] + a[2][2] * a[2][2];
        if off <= 1e-32 * diag || off == 0.0 {
            break;
        }
        for (p, q) in [(0usize, 1usize), (0, 2), (1, 2)] {
            if a[p][q] == 0.0 {
                continue;
            }
            let theta = (a[q][q] - a[p][p]) / (2.0 * a[p][q]);
            let t = theta.signum() / (theta.abs() + libm::sqrt(theta * theta + 1.0));
            let t = if theta == 0.0 { 1.0 } else { t };
            let c = 1.0 / libm::sqrt(t * t + 1.0);
            let s = t * c;
            for k in 0..3 {
                let akp = a[k][p];
                let akq = a[k][q];
                a[k][p] = c * akp - s * akq;
                a[k][q] = s * akp + c * akq;
            }
            for k in 0..3 {
                let apk = a[p][k];
                let aqk = a[q][k];
                a[p][k] = c * apk - s * aqk;
                a[q][k] = s * apk + c * aqk;
            }
        }
    }
    [a[0][0], a[1][1], a[2][2]]
}

/// Least-squares solution of `m x = rhs` for a tall `rows × 3` system via
/// Householder QR. Returns `None` if `R` has a zero diagonal entry.
pub fn lstsq3(m: &[[f64; 3]], rhs: &[f64]) -> Option<[f64; 3]> {
    let rows = m.len();
    debug_assert_eq!(rows, rhs.len());
    let mut a: alloc::vec::Vec<[f64; 3]> = m.to_vec();
    let mut b: alloc::vec::Vec<f64> = rhs.to_vec();
    for col in 0..3 {
        let mut norm = 0.0;
        for r in col..rows {
            norm += a[r][col] * a[r][col];
        }
        let norm = libm::sqrt(norm);
        if norm == 0.0 {
            return None;
        }
        let alpha = if a[col][col] > 0.0 { -norm } else { norm };
        let mut v: alloc::vec::Vec<f64> = (col..rows).map(|r| a[r][col]).collect();
        v[0] -= alpha;
        let vnorm2: f64 = v.iter().map(|x| x * x).sum();
        if vnorm2 == 0.0 {
            continue;
        }
        for c in col..3 {
            let proj: f64 = (col..rows).map(|r| v[r - col] * a[r][c]).sum::<f64>() * 2.0 / vnorm2;
            for r in col..rows {
                a[r][c] -= proj * v[r - col];
            }
        }
        let proj: f64 = (col..rows).map(|r| v[r - col] * b[r]).sum::<f64>() * 2.0 / vnorm2;
        for r in col..rows {
            b[r] -= proj * v[r - col];
        }
    }
    let mut x = [0.0; 3];
    for i in (0..3).rev() {
        if a[i][i] == 0.0 {
            return None;
        }
        let mut acc = b[i];
        for j in i + 1..3 {
            acc -= a[i][j] * x[j];
        }
        x[i] = acc / a[i][i];
    }
    Some(x)
}
