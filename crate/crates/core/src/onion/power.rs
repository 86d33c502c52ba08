use ndarray::Array1;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::linalg::norm;
use crate::scalar::Scalar;

#[derive(Clone, Debug, PartialEq)]
pub struct PowerOutcome<F> {
    pub vector: Array1<F>,
    /// Number of operator applications performed.
    pub iterations: usize,
    pub converged: bool,
}

/// Dominant eigenvector of a symmetric positive semidefinite operator given
/// only as `v ↦ Mv`.
///
/// Stops once `|1 - |u_τ · u_{τ-1}|| < tol`. The start vector is drawn from
/// `rng`; if the operator annihilates it, the normalized all-ones vector is
/// tried before giving up with `ZeroOperator`.
pub fn power_iteration<F, Op, R>(
    mut apply: Op,
    dim: usize,
    tol: F,
    max_iter: usize,
    rng: &mut R,
) -> Result<PowerOutcome<F>>
where
    F: Scalar,
    Op: FnMut(&Array1<F>) -> Array1<F>,
    R: Rng + ?Sized,
{
    assert!(dim > 0 && max_iter > 0);
    let mut u: Array1<F> = (0..dim)
        .map(|_| F::lit(rng.sample::<f64, _>(StandardNormal)))
        .collect();
    let n0 = norm(u.view());
    u.mapv_inplace(|x| x / n0);
    let mut v = apply(&u);
    if norm(v.view()) == F::zero() {
        u = Array1::from_elem(dim, F::one() / F::from_usize_lossy(dim).sqrt());
        v = apply(&u);
        if norm(v.view()) == F::zero() {
            return Err(Error::ZeroOperator);
        }
    }

    let mut iterations = 0;
    let mut converged = false;
    loop {
        iterations += 1;
        let nv = norm(v.view());
        if nv == F::zero() || !nv.is_finite() {
            return Err(Error::ZeroOperator);
        }
        let next = v.mapv(|x| x / nv);
        let cosine = next.dot(&u);
        u = next;
        if (F::one() - cosine.abs()).abs() < tol {
            converged = true;
            break;
        }
        if iterations >= max_iter {
            break;
        }
        v = apply(&u);
    }
    Ok(PowerOutcome {
        vector: u,
        iterations,
        converged,
    })
}
