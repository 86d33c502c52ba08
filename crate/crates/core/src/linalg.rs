//! Small dense kernels that the rest of the crate needs and ndarray does not
//! ship: a cyclic Jacobi symmetric eigensolver and a Cholesky-based
//! orthonormalization of a design matrix.

use ndarray::{Array1, Array2, ArrayView1, Axis};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Eigen-decomposition of a symmetric matrix by cyclic Jacobi rotations.
///
/// Returns eigenvalues in non-increasing order and the matching unit
/// eigenvectors as columns.
pub fn symmetric_eigen<F: Scalar>(matrix: &Array2<F>) -> (Array1<F>, Array2<F>) {
    let n = matrix.nrows();
    assert_eq!(n, matrix.ncols(), "matrix must be square");
    let mut a = matrix.clone();
    let mut v = Array2::<F>::eye(n);
    let scale = a.iter().map(|x| *x * *x).sum::<F>();
    let threshold = scale * F::epsilon() * F::epsilon();

    for _sweep in 0..100 {
        let mut off = F::zero();
        for p in 0..n {
            for q in (p + 1)..n {
                off += a[[p, q]] * a[[p, q]];
            }
        }
        if off <= threshold {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = a[[p, q]];
                if apq == F::zero() {
                    continue;
                }
                let theta = (a[[q, q]] - a[[p, p]]) / (F::lit(2.0) * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + F::one()).sqrt());
                let c = F::one() / (t * t + F::one()).sqrt();
                let s = t * c;
                for k in 0..n {
                    let akp = a[[k, p]];
                    let akq = a[[k, q]];
                    a[[k, p]] = c * akp - s * akq;
                    a[[k, q]] = s * akp + c * akq;
                }
                for k in 0..n {
                    let apk = a[[p, k]];
                    let aqk = a[[q, k]];
                    a[[p, k]] = c * apk - s * aqk;
                    a[[q, k]] = s * apk + c * aqk;
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
    order.sort_by(|&i, &j| a[[j, j]].partial_cmp(&a[[i, i]]).expect("finite eigenvalues"));
    let values = order.iter().map(|&i| a[[i, i]]).collect();
    let vectors = v.select(Axis(1), &order);
    (values, vectors)
}

pub fn norm<F: Scalar>(v: ArrayView1<'_, F>) -> F {
    v.dot(&v).sqrt()
}

pub fn frobenius<F: Scalar>(m: &Array2<F>) -> F {
    m.iter().map(|x| *x * *x).sum::<F>().sqrt()
}

/// Orthonormal basis `Q` (n × k) for the column space of a full-rank design
/// `D` (n × k), via `Q = D L^{-T}` with `DᵀD = L Lᵀ`.
///
/// Fails with `DegenerateDesign` when a Cholesky pivot falls below a relative
/// tolerance, i.e. the columns are (numerically) linearly dependent.
pub fn orthonormal_columns<F: Scalar>(design: &Array2<F>) -> Result<Array2<F>> {
    let k = design.ncols();
    let gram = design.t().dot(design);
    let max_diag = (0..k).map(|i| gram[[i, i]]).fold(F::zero(), F::max);
    let tol = max_diag * F::lit(1e-10).max(F::epsilon() * F::lit(100.0));
    let mut l = Array2::<F>::zeros((k, k));
    for j in 0..k {
        let mut d = gram[[j, j]];
        for m in 0..j {
            d -= l[[j, m]] * l[[j, m]];
        }
        if d <= tol {
            return Err(Error::DegenerateDesign);
        }
        let d = d.sqrt();
        l[[j, j]] = d;
        for i in (j + 1)..k {
            let mut s = gram[[i, j]];
            for m in 0..j {
                s -= l[[i, m]] * l[[j, m]];
            }
            l[[i, j]] = s / d;
        }
    }
    // Solve Q Lᵀ = D row by row (forward substitution on Lᵀ's columns).
    let mut q = design.clone();
    for mut row in q.axis_iter_mut(Axis(0)) {
        for j in 0..k {
            let mut s = row[j];
            for m in 0..j {
                s -= row[m] * l[[j, m]];
            }
            row[j] = s / l[[j, j]];
        }
    }
    Ok(q)
}
