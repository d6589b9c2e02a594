//! Model-free estimator of a time-varying quadratic action-value function.
//!
//! The value at step `k` of `z = [E, v]` is `σ(τ_k)ᵀ · W · z̄` with
//! `τ_k = (N − k)/N`, `W` an `L×6` weight matrix and `z̄` the quadratic
//! monomials of `z`. Equivalently `θ_k = Wᵀσ(τ_k)` and `V = θ_kᵀz̄ = zᵀΘ_k z`.
//!
//! Weights are fitted by ridge-regularised least squares over a sliding
//! window of temporal-difference samples, with six extra rows pinning the
//! terminal kernel `θ_N = Wᵀσ(0)`.

use std::collections::VecDeque;

use nalgebra::{DMatrix, DVector, Matrix2, Matrix3, Vector2, Vector3, Vector6};
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Quadratic monomials `[z1², z1z2, z1z3, z2², z2z3, z3²]`.
pub fn kron_basis(z: &Vector3<f64>) -> Vector6<f64> {
    Vector6::new(
        z[0] * z[0],
        z[0] * z[1],
        z[0] * z[2],
        z[1] * z[1],
        z[1] * z[2],
        z[2] * z[2],
    )
}

/// Vectorise a symmetric kernel so that `θᵀz̄ = zᵀΘz`.
pub fn theta_from_matrix(m: &Matrix3<f64>) -> Vector6<f64> {
    Vector6::new(
        m[(0, 0)],
        2.0 * m[(0, 1)],
        2.0 * m[(0, 2)],
        m[(1, 1)],
        2.0 * m[(1, 2)],
        m[(2, 2)],
    )
}

pub fn matrix_from_theta(t: &Vector6<f64>) -> Matrix3<f64> {
    let (a, b, c) = (t[1] / 2.0, t[2] / 2.0, t[4] / 2.0);
    Matrix3::new(t[0], a, b, a, t[3], c, b, c, t[5])
}

/// Terminal kernel `[[P_N, 0], [0, 0]]` in vector form.
pub fn terminal_theta(p_n: &Matrix2<f64>) -> Vector6<f64> {
    let mut m = Matrix3::zeros();
    m.fixed_view_mut::<2, 2>(0, 0).copy_from(p_n);
    theta_from_matrix(&m)
}

/// Stage cost `EᵀQE + S·v²`.
pub fn utility(e: &Vector2<f64>, v: f64, q: &Matrix2<f64>, s: f64) -> f64 {
    (e.transpose() * q * e)[0] + s * v * v
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BasisKind {
    /// `[1, τ, τ², …]`.
    Polynomial,
    /// `[1, 1{τ>0}, τ, τ², …]`: the indicator lets the kernel jump at the
    /// terminal step, where the input block drops out.
    Step,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimeRegression {
    pub len: usize,
    pub kind: BasisKind,
}

impl TimeRegression {
    pub fn new(len: usize, kind: BasisKind) -> Result<Self> {
        let min = match kind {
            BasisKind::Polynomial => 1,
            BasisKind::Step => 2,
        };
        if len < min {
            return Err(Error::config(
                "basis_len",
                format!("must be >= {min} for this basis"),
            ));
        }
        Ok(Self { len, kind })
    }

    pub fn sigma(&self, tau: f64) -> DVector<f64> {
        match self.kind {
            BasisKind::Polynomial => DVector::from_fn(self.len, |i, _| tau.powi(i as i32)),
            BasisKind::Step => DVector::from_fn(self.len, |i, _| match i {
                0 => 1.0,
                1 => f64::from(u8::from(tau > 0.0)),
                _ => tau.powi(i as i32 - 1),
            }),
        }
    }

    pub fn sigma_at(&self, k: usize, horizon: usize) -> DVector<f64> {
        self.sigma(tau(k, horizon))
    }
}

pub fn tau(k: usize, horizon: usize) -> f64 {
    (horizon as f64 - k as f64) / horizon as f64
}

#[derive(Debug, Clone, PartialEq)]
pub struct ParamEstimate {
    pub w: DMatrix<f64>,
    pub basis: TimeRegression,
    pub horizon: usize,
}

impl ParamEstimate {
    pub fn zeros(basis: TimeRegression, horizon: usize) -> Self {
        Self {
            w: DMatrix::zeros(basis.len, 6),
            basis,
            horizon,
        }
    }

    pub fn theta(&self, k: usize) -> Vector6<f64> {
        weights_at(&self.w, &self.basis.sigma_at(k, self.horizon))
    }

    pub fn kernel(&self, k: usize) -> Matrix3<f64> {
        matrix_from_theta(&self.theta(k))
    }

    /// `Wᵀσ(0)`, the row pinned to the terminal kernel.
    pub fn theta_terminal(&self) -> Vector6<f64> {
        weights_at(&self.w, &self.basis.sigma(0.0))
    }
}

fn weights_at(w: &DMatrix<f64>, sigma: &DVector<f64>) -> Vector6<f64> {
    Vector6::from_iterator((w.transpose() * sigma).iter().copied())
}

/// One temporal-difference sample: stage cost and regressor difference.
#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub k: usize,
    pub r: f64,
    pub dphi: DMatrix<f64>,
}

impl Sample {
    /// `ΔΦ = σ(τ_k)·z̄_kᵀ − σ(τ_prev)·z̄_prevᵀ` for the transition `prev → k`.
    pub fn new(
        basis: &TimeRegression,
        horizon: usize,
        prev: (usize, &Vector3<f64>),
        next: (usize, &Vector3<f64>),
        r: f64,
    ) -> Self {
        let outer = |k, z: &Vector3<f64>| {
            let m = basis.sigma_at(k, horizon) * kron_basis(z).transpose();
            DMatrix::from_column_slice(basis.len, 6, m.as_slice())
        };
        Self {
            k: next.0,
            r,
            dphi: outer(next.0, next.1) - outer(prev.0, prev.1),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct HistoryWindow {
    pub capacity: usize,
    pub samples: VecDeque<Sample>,
    pub theta_n: Vector6<f64>,
}

impl HistoryWindow {
    pub fn new(capacity: usize, theta_n: Vector6<f64>) -> Self {
        Self {
            capacity,
            samples: VecDeque::with_capacity(capacity),
            theta_n,
        }
    }

    pub fn push(&mut self, s: Sample) {
        if self.samples.len() == self.capacity {
            self.samples.pop_front();
        }
        self.samples.push_back(s);
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn clear(&mut self) {
        self.samples.clear();
    }
}

/// Default window length for a basis of `l` terms.
pub fn default_window(l: usize) -> usize {
    24.max(6 * l + 6)
}

/// `r + ⟨W, ΔΦ⟩`.
pub fn bellman_residual(w: &DMatrix<f64>, sample: &Sample) -> f64 {
    sample.r + w.dot(&sample.dphi)
}

/// `θ_N − Wᵀσ(0)`.
pub fn terminal_residual(
    w: &DMatrix<f64>,
    theta_n: &Vector6<f64>,
    basis: &TimeRegression,
) -> Vector6<f64> {
    theta_n - weights_at(w, &basis.sigma(0.0))
}

/// Window residual norms `(‖e^FTBE‖₂ over the window, ‖e^FC‖₂)`.
pub fn window_residuals(
    w: &DMatrix<f64>,
    window: &HistoryWindow,
    basis: &TimeRegression,
) -> (f64, f64) {
    let bellman = window
        .samples
        .iter()
        .map(|s| bellman_residual(w, s).powi(2))
        .sum::<f64>()
        .sqrt();
    (bellman, terminal_residual(w, &window.theta_n, basis).norm())
}

/// One least-squares step moving every window residual to `α` times its
/// current value. Columns are equilibrated before the ridge is applied so
/// that the regulariser acts evenly on weights of very different scale.
pub fn update_w(
    w_k: &DMatrix<f64>,
    window: &HistoryWindow,
    basis: &TimeRegression,
    alpha: f64,
    ridge: f64,
) -> Result<DMatrix<f64>> {
    solve_window(w_k, window, basis, alpha, ridge, true)
}

/// Like [`update_w`] but returns the minimum-norm solution when the window
/// does not determine every weight. Some directions are never excited: with
/// a constant second state the step component of its square cancels in every
/// temporal difference. Those weights do not enter the gain.
pub fn update_w_min_norm(
    w_k: &DMatrix<f64>,
    window: &HistoryWindow,
    basis: &TimeRegression,
    alpha: f64,
    ridge: f64,
) -> Result<DMatrix<f64>> {
    solve_window(w_k, window, basis, alpha, ridge, false)
}

fn solve_window(
    w_k: &DMatrix<f64>,
    window: &HistoryWindow,
    basis: &TimeRegression,
    alpha: f64,
    ridge: f64,
    full_rank: bool,
) -> Result<DMatrix<f64>> {
    let l = basis.len;
    let unknowns = 6 * l;
    let data_rows = window.len() + 6;
    let rows = data_rows + if ridge > 0.0 { unknowns } else { 0 };
    let mut a = DMatrix::zeros(rows, unknowns);
    let mut b = DVector::zeros(rows);
    // W[(i, c)] maps to column i*6 + c
    for (row, s) in window.samples.iter().enumerate() {
        for i in 0..l {
            for c in 0..6 {
                a[(row, i * 6 + c)] = s.dphi[(i, c)];
            }
        }
        b[row] = alpha * bellman_residual(w_k, s) - s.r;
    }
    let s0 = basis.sigma(0.0);
    let efc = terminal_residual(w_k, &window.theta_n, basis);
    for c in 0..6 {
        let row = window.len() + c;
        for i in 0..l {
            a[(row, i * 6 + c)] = s0[i];
        }
        b[row] = window.theta_n[c] - alpha * efc[c];
    }

    let mut scale = DVector::from_element(unknowns, 1.0);
    for j in 0..unknowns {
        let n = a.view((0, j), (data_rows, 1)).norm();
        if n > 0.0 {
            scale[j] = n;
        }
    }
    for j in 0..unknowns {
        a.column_mut(j).unscale_mut(scale[j]);
    }
    if ridge > 0.0 {
        let sq = ridge.sqrt();
        for j in 0..unknowns {
            a[(data_rows + j, j)] = sq;
            b[data_rows + j] = sq * w_k[(j / 6, j % 6)] * scale[j];
        }
    }

    let svd = a.svd(true, true);
    let smax = svd.singular_values.max();
    let tol = smax * f64::EPSILON * rows as f64;
    if full_rank && ridge <= 0.0 {
        let rank = svd.rank(tol);
        if rank < unknowns {
            return Err(Error::Singular { rank, unknowns });
        }
    }
    let y = svd
        .solve(&b, tol)
        .map_err(|e| Error::Domain(format!("least-squares solve failed: {e}")))?;
    Ok(DMatrix::from_fn(l, 6, |i, c| {
        y[i * 6 + c] / scale[i * 6 + c]
    }))
}

/// Estimator hyper-parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct EstimatorParams {
    pub alpha_w: f64,
    pub basis: TimeRegression,
    pub window: usize,
    pub ridge: f64,
    pub q: Matrix2<f64>,
    pub s: f64,
    pub p_n: Matrix2<f64>,
}

impl Default for EstimatorParams {
    fn default() -> Self {
        let basis = TimeRegression {
            len: 3,
            kind: BasisKind::Step,
        };
        Self {
            alpha_w: 1e-4,
            basis,
            window: default_window(basis.len),
            ridge: 0.0,
            q: Matrix2::new(1.0, 0.0, 0.0, 0.01),
            s: 1.0,
            p_n: Matrix2::identity(),
        }
    }
}

impl EstimatorParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.alpha_w > 0.0 && self.alpha_w < 1.0) {
            return Err(Error::config("alpha_w", "must lie in (0, 1)"));
        }
        if self.window == 0 {
            return Err(Error::config("window", "must be >= 1"));
        }
        if !(self.ridge >= 0.0) {
            return Err(Error::config("ridge", "must be >= 0"));
        }
        if self.q != self.q.transpose() || self.q.symmetric_eigenvalues().min() <= 0.0 {
            return Err(Error::config("q", "must be symmetric positive definite"));
        }
        if !(self.s > 0.0) {
            return Err(Error::config("s", "must be > 0"));
        }
        if self.p_n != self.p_n.transpose() || self.p_n.symmetric_eigenvalues().min() < 0.0 {
            return Err(Error::config(
                "p_terminal",
                "must be symmetric positive semidefinite",
            ));
        }
        Ok(())
    }

    pub fn theta_n(&self) -> Vector6<f64> {
        terminal_theta(&self.p_n)
    }
}
