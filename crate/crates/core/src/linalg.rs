//! Small dense linear-algebra helpers: a symmetric Jacobi eigensolver and
//! 3x3 utilities. Everything here is deterministic, which matters for the
//! byte-reproducibility of pipeline outputs.

use ndarray::Array2;

use crate::error::{FecgError, Result};

/// Eigendecomposition of a symmetric matrix via cyclic Jacobi rotations.
///
/// Returns eigenvalues in descending order and the matching eigenvectors as
/// columns. Eigenvector signs are fixed so the entry of largest magnitude is
/// positive.
pub fn sym_eig(a: &Array2<f64>) -> Result<(Vec<f64>, Array2<f64>)> {
    let n = a.nrows();
    if a.ncols() != n {
        return Err(FecgError::DimensionMismatch(format!(
            "sym_eig expects a square matrix, got {}x{}",
            a.nrows(),
            a.ncols()
        )));
    }
    let mut m = a.clone();
    let mut v = Array2::<f64>::eye(n);
    let scale = m.iter().fold(0.0f64, |acc, x| acc.max(x.abs())).max(1.0);
    let tol = 1e-14 * scale;

    for _sweep in 0..100 {
        let mut off = 0.0f64;
        for p in 0..n {
            for q in (p + 1)..n {
                off = off.max(m[[p, q]].abs());
            }
        }
        if off <= tol {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = m[[p, q]];
                if apq.abs() <= tol {
                    continue;
                }
                let app = m[[p, p]];
                let aqq = m[[q, q]];
                // Jacobi angle: tan(2t) = 2*apq / (app - aqq)
                let t2 = (2.0 * apq).atan2(app - aqq) / 2.0;
                let c = t2.cos();
                let s = t2.sin();
                for k in 0..n {
                    let mkp = m[[k, p]];
                    let mkq = m[[k, q]];
                    m[[k, p]] = c * mkp + s * mkq;
                    m[[k, q]] = -s * mkp + c * mkq;
                }
                for k in 0..n {
                    let mpk = m[[p, k]];
                    let mqk = m[[q, k]];
                    m[[p, k]] = c * mpk + s * mqk;
                    m[[q, k]] = -s * mpk + c * mqk;
                }
                for k in 0..n {
                    let vkp = v[[k, p]];
                    let vkq = v[[k, q]];
                    v[[k, p]] = c * vkp + s * vkq;
                    v[[k, q]] = -s * vkp + c * vkq;
                }
            }
        }
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| {
        m[[j, j]]
            .partial_cmp(&m[[i, i]])
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(i.cmp(&j))
    });
    let mut vals = Vec::with_capacity(n);
    let mut vecs = Array2::<f64>::zeros((n, n));
    for (dst, &src) in order.iter().enumerate() {
        vals.push(m[[src, src]]);
        // Sign fix: largest-magnitude component positive.
        let mut best = 0usize;
        for k in 1..n {
            if v[[k, src]].abs() > v[[best, src]].abs() {
                best = k;
            }
        }
        let sgn = if v[[best, src]] < 0.0 { -1.0 } else { 1.0 };
        for k in 0..n {
            vecs[[k, dst]] = sgn * v[[k, src]];
        }
    }
    Ok((vals, vecs))
}

/// Solve the 3x3 system `a * x = b` by Gaussian elimination with partial
/// pivoting. Errors on (near-)singular systems.
pub fn solve3(a: [[f64; 3]; 3], b: [f64; 3]) -> Result<[f64; 3]> {
    let mut m = [[0.0f64; 4]; 3];
    for i in 0..3 {
        m[i][..3].copy_from_slice(&a[i]);
        m[i][3] = b[i];
    }
    for col in 0..3 {
        let mut piv = col;
        for r in (col + 1)..3 {
            if m[r][col].abs() > m[piv][col].abs() {
                piv = r;
            }
        }
        if m[piv][col].abs() < 1e-300 {
            return Err(FecgError::Numerical("singular 3x3 system".into()));
        }
        m.swap(col, piv);
        for r in 0..3 {
            if r == col {
                continue;
            }
            let f = m[r][col] / m[col][col];
            for c in col..4 {
                m[r][c] -= f * m[col][c];
            }
        }
    }
    Ok([m[0][3] / m[0][0], m[1][3] / m[1][1], m[2][3] / m[2][2]])
}

/// Rotation by `angle` radians about the x axis.
pub fn rot_x(angle: f64) -> Array2<f64> {
    let (s, c) = angle.sin_cos();
    ndarray::arr2(&[[1.0, 0.0, 0.0], [0.0, c, -s], [0.0, s, c]])
}

/// Rotation by `angle` radians about the y axis.
pub fn rot_y(angle: f64) -> Array2<f64> {
    let (s, c) = angle.sin_cos();
    ndarray::arr2(&[[c, 0.0, s], [0.0, 1.0, 0.0], [-s, 0.0, c]])
}

/// Rotation by `angle` radians about the z axis.
pub fn rot_z(angle: f64) -> Array2<f64> {
    let (s, c) = angle.sin_cos();
    ndarray::arr2(&[[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])
}

/// Determinant of a 3x3 matrix.
pub fn det3(r: &Array2<f64>) -> f64 {
    r[[0, 0]] * (r[[1, 1]] * r[[2, 2]] - r[[1, 2]] * r[[2, 1]])
        - r[[0, 1]] * (r[[1, 0]] * r[[2, 2]] - r[[1, 2]] * r[[2, 0]])
        + r[[0, 2]] * (r[[1, 0]] * r[[2, 1]] - r[[1, 1]] * r[[2, 0]])
}

/// Max absolute entry of `r^T r - I`; zero for orthonormal `r`.
pub fn orthonormality_defect(r: &Array2<f64>) -> f64 {
    let g = r.t().dot(r);
    let n = g.nrows();
    let mut worst = 0.0f64;
    for i in 0..n {
        for j in 0..n {
            let target = if i == j { 1.0 } else { 0.0 };
            worst = worst.max((g[[i, j]] - target).abs());
        }
    }
    worst
}
