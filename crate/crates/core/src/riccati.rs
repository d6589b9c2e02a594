//! Finite-horizon LQ solution for known dynamics, used as ground truth.

use nalgebra::{Matrix2, Matrix3, RowVector2, Vector2};

use crate::dynamics::ErrorSystem;
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct OracleSolution {
    /// Value kernels, `g[N] = P_N`.
    pub g: Vec<Matrix2<f64>>,
    /// Action-value kernels over `[E, v]` for `k = 0..N-1`.
    pub theta: Vec<Matrix3<f64>>,
    pub k: Vec<RowVector2<f64>>,
}

impl OracleSolution {
    pub fn horizon(&self) -> usize {
        self.k.len()
    }
}

fn check_weights(q: &Matrix2<f64>, s: f64, p_n: &Matrix2<f64>) -> Result<()> {
    if !(s > 0.0) {
        return Err(Error::Domain(format!(
            "input weight S must be > 0, got {s}"
        )));
    }
    if q.symmetric_eigenvalues().min() <= 0.0 {
        return Err(Error::Domain(
            "state weight Q must be positive definite".into(),
        ));
    }
    if p_n.symmetric_eigenvalues().min() < -1e-12 {
        return Err(Error::Domain(
            "terminal weight P_N must be positive semidefinite".into(),
        ));
    }
    Ok(())
}

/// Riccati recursion for a constant system over `n` steps.
pub fn backward_riccati(
    a: &Matrix2<f64>,
    b: &Vector2<f64>,
    q: &Matrix2<f64>,
    s: f64,
    p_n: &Matrix2<f64>,
    n: usize,
) -> Result<OracleSolution> {
    let sys = ErrorSystem { a: *a, b: *b };
    backward_riccati_varying(&vec![sys; n], q, s, p_n)
}

/// Riccati recursion for a known sequence `systems[k] = (A_k, B_k)`.
pub fn backward_riccati_varying(
    systems: &[ErrorSystem],
    q: &Matrix2<f64>,
    s: f64,
    p_n: &Matrix2<f64>,
) -> Result<OracleSolution> {
    check_weights(q, s, p_n)?;
    let n = systems.len();
    let mut g = vec![Matrix2::zeros(); n + 1];
    let mut theta = vec![Matrix3::zeros(); n];
    let mut k = vec![RowVector2::zeros(); n];
    g[n] = *p_n;
    for t in (0..n).rev() {
        let ErrorSystem { a, b } = systems[t];
        let gn = g[t + 1];
        let ee = q + a.transpose() * gn * a;
        let ev = a.transpose() * gn * b;
        let vv = s + (b.transpose() * gn * b)[0];
        assert!(vv > 0.0, "S + BᵀGB must stay positive");
        let kt = ev.transpose() / vv;
        g[t] = ee - ev * kt;
        theta[t] = Matrix3::new(
            ee[(0, 0)],
            ee[(0, 1)],
            ev[0],
            ee[(1, 0)],
            ee[(1, 1)],
            ev[1],
            ev[0],
            ev[1],
            vv,
        );
        k[t] = kt;
    }
    Ok(OracleSolution { g, theta, k })
}

pub fn optimal_cost(e0: &Vector2<f64>, g0: &Matrix2<f64>) -> f64 {
    (e0.transpose() * g0 * e0)[0]
}
