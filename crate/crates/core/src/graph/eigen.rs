//! Cyclic Jacobi eigensolver for small dense symmetric matrices.

use ndarray::{Array2, ArrayView2};

use super::GraphError;

pub const OFF_DIAGONAL_TOL: f64 = 1e-10;
pub const MAX_SWEEPS: usize = 100;

/// Eigenpairs sorted by ascending eigenvalue; `vectors` holds unit-norm
/// eigenvectors as columns.
#[derive(Clone, Debug, PartialEq)]
pub struct SymmetricEigen {
    pub values: Vec<f64>,
    pub vectors: Array2<f64>,
    pub sweeps: usize,
}

fn off_norm(a: &Array2<f64>) -> f64 {
    let n = a.nrows();
    let mut s = 0.0;
    for p in 0..n {
        for q in 0..n {
            if p != q {
                s += a[[p, q]] * a[[p, q]];
            }
        }
    }
    s.sqrt()
}

/// Diagonalises `a` with row-cyclic Jacobi rotations until the off-diagonal
/// Frobenius norm drops below `1e-10 · ‖a‖_F`. Ties in the eigenvalue order
/// keep the column order produced by the sweeps.
pub fn jacobi_eigen(a: ArrayView2<'_, f64>) -> Result<SymmetricEigen, GraphError> {
    let n = a.nrows();
    if n != a.ncols() {
        return Err(GraphError::NotSquare(n, a.ncols()));
    }
    let mut m = a.to_owned();
    // symmetrise against round-off in the caller
    for p in 0..n {
        for q in p + 1..n {
            let v = 0.5 * (m[[p, q]] + m[[q, p]]);
            m[[p, q]] = v;
            m[[q, p]] = v;
        }
    }
    let scale = m.iter().map(|v| v * v).sum::<f64>().sqrt();
    let tol = OFF_DIAGONAL_TOL * if scale > 0.0 { scale } else { 1.0 };
    let mut v = Array2::<f64>::eye(n);

    let mut sweeps = 0;
    while off_norm(&m) > tol {
        if sweeps == MAX_SWEEPS {
            return Err(GraphError::EigenNoConvergence(MAX_SWEEPS));
        }
        sweeps += 1;
        for p in 0..n {
            for q in p + 1..n {
                let apq = m[[p, q]];
                if apq == 0.0 {
                    continue;
                }
                let theta = (m[[q, q]] - m[[p, p]]) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let mkp = m[[k, p]];
                    let mkq = m[[k, q]];
                    m[[k, p]] = c * mkp - s * mkq;
                    m[[k, q]] = s * mkp + c * mkq;
                }
                for k in 0..n {
                    let mpk = m[[p, k]];
                    let mqk = m[[q, k]];
                    m[[p, k]] = c * mpk - s * mqk;
                    m[[q, k]] = s * mpk + c * mqk;
                }
                for k in 0..n {
                    let vkp = v[[k, p]];
                    let vkq = v[[k, q]];
                    v[[k, p]] = c * vkp - s * vkq;
                    v[[k, q]] = s * vkp + c * vkq;
                }
            }
        }
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| m[[i, i]].total_cmp(&m[[j, j]]));
    let values = order.iter().map(|&i| m[[i, i]]).collect();
    let vectors = Array2::from_shape_fn((n, n), |(r, c)| v[[r, order[c]]]);
    Ok(SymmetricEigen { values, vectors, sweeps })
}
