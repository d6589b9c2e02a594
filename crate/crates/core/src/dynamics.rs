//! Augmented SIR-error system `E = [R − γ, γ]` and its one-step coefficients.
//!
//! Writing the per-step SIR drift as `R' = φ·R + ρ·ν` turns target tracking
//! into regulation of `E' = A·E + B·ν` with
//!
//! ```text
//! A = [[φ, φ − 1], [0, 1]],   B = [ρ, 0]
//! ```

use nalgebra::{DMatrix, Matrix2, Vector2};

use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AugmentedError {
    pub e: f64,
    pub gamma: f64,
}

impl AugmentedError {
    pub fn as_vector(&self) -> Vector2<f64> {
        Vector2::new(self.e, self.gamma)
    }

    pub fn from_vector(v: Vector2<f64>) -> Self {
        Self {
            e: v[0],
            gamma: v[1],
        }
    }
}

pub fn make_augmented_error(sir: f64, gamma: f64) -> Result<AugmentedError> {
    if !(gamma > 0.0) {
        return Err(Error::Domain(format!(
            "target SIR must be > 0, got {gamma}"
        )));
    }
    Ok(AugmentedError {
        e: sir - gamma,
        gamma,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ErrorSystem {
    pub a: Matrix2<f64>,
    pub b: Vector2<f64>,
}

impl ErrorSystem {
    pub fn new(phi: f64, rho: f64) -> Self {
        Self {
            a: Matrix2::new(phi, phi - 1.0, 0.0, 1.0),
            b: Vector2::new(rho, 0.0),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepCoefficients {
    pub phi: f64,
    pub rho: f64,
    pub nu: f64,
}

/// Exact `(φ, ρ, ν)` for user `i` between two snapshots. `gains[(i, j)]` is
/// the gain from transmitter `j` to receiver `i`; powers are the effective
/// (masked) transmit powers. This is a simulator-side oracle: it reads
/// everyone's state.
pub fn exact_phi_rho_nu(
    i: usize,
    gains_k: &DMatrix<f64>,
    gains_k1: &DMatrix<f64>,
    powers_k: &[f64],
    powers_k1: &[f64],
    interference_k: f64,
) -> Result<StepCoefficients> {
    if !(interference_k > 0.0) {
        return Err(Error::Domain(format!(
            "interference must be > 0, got {interference_k}"
        )));
    }
    let h = gains_k[(i, i)];
    let drift: f64 = (0..powers_k.len())
        .filter(|&j| j != i)
        .map(|j| {
            (gains_k1[(i, j)] - gains_k[(i, j)]) * powers_k[j]
                + (powers_k1[j] - powers_k[j]) * gains_k[(i, j)]
        })
        .sum();
    Ok(StepCoefficients {
        phi: (gains_k1[(i, i)] - h) / h - drift / interference_k,
        rho: h,
        nu: powers_k1[i] / interference_k,
    })
}

pub fn predict_sir_recursion(sir: f64, phi: f64, rho: f64, nu: f64) -> f64 {
    phi * sir + rho * nu
}

pub fn error_step(e: &AugmentedError, phi: f64, rho: f64, nu: f64) -> AugmentedError {
    let sys = ErrorSystem::new(phi, rho);
    AugmentedError::from_vector(sys.a * e.as_vector() + sys.b * nu)
}
