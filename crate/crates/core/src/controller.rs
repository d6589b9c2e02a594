//! Per-user power control: the learning controller, a Riccati-gain oracle
//! and the classical SIR-balancing baseline.
//!
//! Controllers are distributed: each one sees only its own [`Measurement`].

use std::collections::VecDeque;

use nalgebra::{Matrix3, RowVector2, Vector2, Vector3};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::dynamics::ErrorSystem;
use crate::estimator::{
    bellman_residual, terminal_residual, update_w_min_norm, utility, EstimatorParams,
    HistoryWindow, ParamEstimate, Sample,
};
use crate::network::{Case, Role};
use crate::riccati::backward_riccati;
use crate::rng::SimRng;
use crate::{Error, Result};

/// Below this the `vv` block is treated as singular.
pub const GAIN_SINGULAR_TOL: f64 = 1e-12;

/// Cap on the power-balancing ratio when the measured SIR is near zero.
pub const MAX_BALANCING_RATIO: f64 = 10.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Targets {
    pub su_high: f64,
    pub pu: f64,
    pub su_low: f64,
}

impl Default for Targets {
    fn default() -> Self {
        Self {
            su_high: 0.1,
            pu: 0.1995,
            su_low: 0.01,
        }
    }
}

impl Targets {
    /// Target SIR for a role under a case; `None` while the PU is silent.
    pub fn for_role(&self, role: Role, case: Case) -> Option<f64> {
        match (role, case) {
            (Role::Su, Case::Case1) => Some(self.su_high),
            (Role::Su, Case::Case2) => Some(self.su_low),
            (Role::Pu, Case::Case2) => Some(self.pu),
            (Role::Pu, Case::Case1) => None,
        }
    }
}

/// `K̂ = Θvv⁻¹·Θ_vE`.
pub fn gain_from_theta(theta: &Matrix3<f64>) -> Result<RowVector2<f64>> {
    let vv = theta[(2, 2)];
    if vv.abs() < GAIN_SINGULAR_TOL {
        return Err(Error::GainSingular(vv.abs()));
    }
    Ok(RowVector2::new(theta[(2, 0)], theta[(2, 1)]) / vv)
}

/// `v̂ = −K̂·E + ε`.
pub fn control_input(gain: &RowVector2<f64>, e: &Vector2<f64>, dither: f64) -> f64 {
    -(gain * e)[0] + dither
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PowerCommand {
    pub power: f64,
    pub saturated: bool,
}

/// `P = clamp(v̂·I, 0, P_max)`.
pub fn power_command(v: f64, interference: f64, p_max: f64) -> PowerCommand {
    let p = v * interference;
    if p > p_max {
        PowerCommand {
            power: p_max,
            saturated: true,
        }
    } else {
        PowerCommand {
            power: p.max(0.0),
            saturated: false,
        }
    }
}

/// SIR balancing in normalised-power units:
/// `v₀ = γ / max(R, γ/10) · P / I`.
pub fn initial_admissible_policy(sir: f64, gamma: f64, power: f64, interference: f64) -> f64 {
    gamma / sir.max(gamma / MAX_BALANCING_RATIO) * power / interference
}

/// Classical fixed-point update `P' = clamp(γ/R · P, 0, P_max)`.
pub fn baseline_sir_tracking(sir: f64, gamma: f64, power: f64, p_max: f64) -> f64 {
    let ratio = if sir > 0.0 {
        gamma / sir
    } else {
        MAX_BALANCING_RATIO
    };
    (ratio * power).clamp(0.0, p_max)
}

/// What a user can observe about itself at step `k`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Measurement {
    pub k: usize,
    pub case: Case,
    pub sir: f64,
    pub interference: f64,
    /// Currently transmitted power.
    pub power: f64,
    /// Own-link gain; only the oracle controller reads it.
    pub own_gain: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Diagnostics {
    /// A-priori temporal-difference error of the newest sample.
    pub bellman_residual: Option<f64>,
    /// `‖e^FC‖` after the update.
    pub terminal_residual: Option<f64>,
    pub gain: Option<RowVector2<f64>>,
    pub saturated: bool,
    /// The estimator or gain extraction failed and the previous gain was kept.
    pub fallback: bool,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepOutput {
    /// `None` when the user is silent or the horizon is over.
    pub power: Option<f64>,
    pub diagnostics: Diagnostics,
}

impl StepOutput {
    fn idle() -> Self {
        Self {
            power: None,
            diagnostics: Diagnostics::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ControllerKind {
    Fhaodpa,
    Baseline,
    Oracle,
}

impl std::str::FromStr for ControllerKind {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "fhaodpa" => Ok(Self::Fhaodpa),
            "baseline" => Ok(Self::Baseline),
            "oracle" => Ok(Self::Oracle),
            _ => Err(format!(
                "unknown controller `{s}` (expected fhaodpa, baseline or oracle)"
            )),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ControllerConfig {
    pub kind: ControllerKind,
    pub horizon: usize,
    pub targets: Targets,
    pub estimator: EstimatorParams,
    /// Dither amplitude relative to the admissible input (`γ/ρ` near the
    /// target). Must be below 1 so dither alone never silences a user.
    pub exploration: f64,
    pub p_max: f64,
}

/// Transition kept between updates: `(k, z = [E, ν], r)`.
#[derive(Debug, Clone, Copy)]
struct Previous {
    k: usize,
    z: Vector3<f64>,
    r: f64,
}

/// A step `prev → k` with what is needed to re-evaluate the policy at `k`.
#[derive(Debug, Clone, Copy)]
struct Transition {
    prev: Previous,
    k: usize,
    e: Vector2<f64>,
    v_adm: f64,
}

#[derive(Debug, Clone)]
pub struct ControllerState {
    pub id: usize,
    pub role: Role,
    pub config: ControllerConfig,
    pub case: Option<Case>,
    pub gamma: Option<f64>,
    pub estimate: ParamEstimate,
    pub window: HistoryWindow,
    pub gain: Option<RowVector2<f64>>,
    /// Samples collected since the last reset.
    pub samples_seen: usize,
    prev: Option<Previous>,
    transitions: VecDeque<Transition>,
    rng: SimRng,
}

impl ControllerState {
    pub fn new(id: usize, role: Role, config: ControllerConfig, rng: SimRng) -> Self {
        let estimate = ParamEstimate::zeros(config.estimator.basis, config.horizon);
        let window = HistoryWindow::new(config.estimator.window, config.estimator.theta_n());
        Self {
            id,
            role,
            case: None,
            gamma: None,
            estimate,
            window,
            gain: None,
            samples_seen: 0,
            prev: None,
            transitions: VecDeque::with_capacity(config.estimator.window),
            rng,
            config,
        }
    }

    fn reset(&mut self) {
        self.estimate = ParamEstimate::zeros(self.config.estimator.basis, self.config.horizon);
        self.window.clear();
        self.transitions.clear();
        self.gain = None;
        self.samples_seen = 0;
        self.prev = None;
    }

    /// Weight on the learned policy: zero until the window has filled once,
    /// then a linear ramp to one over another window length.
    pub fn blend(&self) -> f64 {
        let w = self.config.estimator.window;
        if self.samples_seen < w {
            0.0
        } else {
            ((self.samples_seen - w + 1) as f64 / w as f64).min(1.0)
        }
    }

    fn policy(&self, e: &Vector2<f64>, v_adm: f64, beta: f64) -> f64 {
        match self.gain {
            Some(k) if beta > 0.0 => (1.0 - beta) * v_adm + beta * control_input(&k, e, 0.0),
            _ => v_adm,
        }
    }

    /// Run one iteration for this user.
    pub fn step(&mut self, m: &Measurement) -> StepOutput {
        if m.k >= self.config.horizon {
            return StepOutput::idle();
        }
        if self.case != Some(m.case) {
            self.case = Some(m.case);
            self.gamma = self.config.targets.for_role(self.role, m.case);
            self.reset();
        }
        let Some(gamma) = self.gamma else {
            return StepOutput::idle();
        };
        match self.config.kind {
            ControllerKind::Baseline => {
                let p = baseline_sir_tracking(m.sir, gamma, m.power, self.config.p_max);
                StepOutput {
                    power: Some(p),
                    diagnostics: Diagnostics {
                        saturated: p >= self.config.p_max,
                        ..Default::default()
                    },
                }
            }
            ControllerKind::Oracle => self.step_oracle(m, gamma),
            ControllerKind::Fhaodpa => self.step_learning(m, gamma),
        }
    }

    fn step_oracle(&mut self, m: &Measurement, gamma: f64) -> StepOutput {
        let est = &self.config.estimator;
        let sys = ErrorSystem::new(0.0, m.own_gain);
        let remaining = self.config.horizon - m.k;
        let sol = backward_riccati(&sys.a, &sys.b, &est.q, est.s, &est.p_n, remaining)
            .expect("weights validated with the configuration");
        let gain = sol.k[0];
        let e = Vector2::new(m.sir - gamma, gamma);
        let cmd = power_command(
            control_input(&gain, &e, 0.0),
            m.interference,
            self.config.p_max,
        );
        StepOutput {
            power: Some(cmd.power),
            diagnostics: Diagnostics {
                gain: Some(gain),
                saturated: cmd.saturated,
                ..Default::default()
            },
        }
    }

    fn step_learning(&mut self, m: &Measurement, gamma: f64) -> StepOutput {
        let est = self.config.estimator.clone();
        let horizon = self.config.horizon;
        let e = Vector2::new(m.sir - gamma, gamma);
        let v_adm = initial_admissible_policy(m.sir, gamma, m.power, m.interference);
        let mut diag = Diagnostics::default();

        if let Some(prev) = self.prev {
            if self.transitions.len() == est.window {
                self.transitions.pop_front();
            }
            self.transitions.push_back(Transition {
                prev,
                k: m.k,
                e,
                v_adm,
            });
            self.samples_seen += 1;
            // Relabel every stored transition with the current policy's
            // action, so the window describes a single policy.
            let beta = self.blend();
            self.window.clear();
            for t in &self.transitions {
                let z = Vector3::new(t.e[0], t.e[1], self.policy(&t.e, t.v_adm, beta));
                let sample = Sample::new(
                    &est.basis,
                    horizon,
                    (t.prev.k, &t.prev.z),
                    (t.k, &z),
                    t.prev.r,
                );
                self.window.push(sample);
            }
            let newest = self.window.samples.back().expect("just pushed");
            diag.bellman_residual = Some(bellman_residual(&self.estimate.w, newest));
            match update_w_min_norm(
                &self.estimate.w,
                &self.window,
                &est.basis,
                est.alpha_w,
                est.ridge,
            ) {
                Ok(w) => self.estimate.w = w,
                Err(_) => diag.fallback = true,
            }
            diag.terminal_residual =
                Some(terminal_residual(&self.estimate.w, &self.window.theta_n, &est.basis).norm());

            let kernel = self.estimate.kernel(m.k);
            match gain_from_theta(&kernel) {
                Ok(k) if kernel[(2, 2)] > 0.0 => self.gain = Some(k),
                _ => diag.fallback = true,
            }
        }

        let decay = 1.0 - m.k as f64 / horizon as f64;
        // The admissible input equals γ/ρ whenever R ≥ γ/10, so this is the
        // γ/ρ scale; in deep fades it shrinks with the capped input instead
        // of swamping it.
        let amplitude = self.config.exploration * v_adm;
        let dither = amplitude * decay * self.rng.random_range(-1.0..1.0);
        let v = self.policy(&e, v_adm, self.blend()) + dither;
        let cmd = power_command(v, m.interference, self.config.p_max);
        let nu = cmd.power / m.interference;
        self.prev = Some(Previous {
            k: m.k,
            z: Vector3::new(e[0], e[1], nu),
            r: utility(&e, nu, &est.q, est.s),
        });
        diag.gain = self.gain;
        diag.saturated = cmd.saturated;
        StepOutput {
            power: Some(cmd.power),
            diagnostics: diag,
        }
    }
}
