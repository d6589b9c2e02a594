//! The stepping loop: evolve channels, measure, control, apply, record.

use nalgebra::{Matrix2, Vector2};
use rand::Rng;

use super::config::{ScenarioConfig, UpdateMode};
use super::metrics::{cumulative_cost, mean, spectrum_efficiency, to_db, CostTerm, MetricsRecord};
use crate::channel::ChannelParams;
use crate::controller::{ControllerState, Diagnostics, Measurement, Targets};
use crate::network::{
    activity_case, compute_sir, interference, place_nodes, role_active, ActivitySchedule, Case,
    NetworkState, Role,
};
use crate::rng::{stream, Stream};
use crate::Result;

/// Everything observed at one step, for callers that need more than the
/// aggregate [`MetricsRecord`].
#[derive(Debug, Clone)]
pub struct StepReport {
    pub record: MetricsRecord,
    pub case: Case,
    pub sirs: Vec<f64>,
    pub interference: Vec<f64>,
    /// Transmitted powers after this step's updates.
    pub powers: Vec<f64>,
    pub diagnostics: Vec<Option<Diagnostics>>,
    /// Cost added at this step, terminal terms included.
    pub step_cost: f64,
}

pub struct Simulation {
    pub config: ScenarioConfig,
    pub network: NetworkState,
    pub controllers: Vec<ControllerState>,
    channel: ChannelParams,
    schedule: ActivitySchedule,
    targets: Targets,
    q: Matrix2<f64>,
    s: f64,
    p_n: Matrix2<f64>,
    /// Power a silenced node resumes with.
    resume_power: Vec<f64>,
    case: Case,
    k: usize,
    cost: f64,
}

impl Simulation {
    pub fn new(config: ScenarioConfig) -> Result<Self> {
        config.validate()?;
        let seed = config.seed;
        let mut rng = stream(seed, Stream::Placement);
        let nodes = place_nodes(
            config.count_pu,
            config.count_su,
            config.area_km,
            config.link_distance_km,
            &mut rng,
        )?;
        let mut network = NetworkState::new(nodes, &config.channel(), config.noise_floor, seed)?;
        let mut power_rng = stream(seed, Stream::InitialPower);
        for node in network.nodes.iter_mut() {
            node.power =
                power_rng.random_range(config.initial_power_min..=config.initial_power_max);
        }
        Self::from_network(config, network)
    }

    /// Run on a prepared network, keeping its nodes, gains and powers. Role
    /// counts, placement and initial-power settings in `config` are ignored.
    pub fn from_network(config: ScenarioConfig, network: NetworkState) -> Result<Self> {
        config.validate()?;
        let seed = config.seed;
        let channel = config.channel();
        let resume_power: Vec<f64> = network.nodes.iter().map(|n| n.power).collect();
        let ctrl = config.controller_config()?;
        let controllers = network
            .nodes
            .iter()
            .map(|n| {
                ControllerState::new(
                    n.id,
                    n.role,
                    ctrl.clone(),
                    stream(seed, Stream::Controller(n.id)),
                )
            })
            .collect();
        let schedule = config.schedule()?;
        let case = activity_case(0.0, &schedule)?;
        let est = ctrl.estimator;
        let mut sim = Self {
            network,
            controllers,
            channel,
            schedule,
            targets: config.targets(),
            q: est.q,
            s: est.s,
            p_n: est.p_n,
            resume_power,
            case,
            k: 0,
            cost: 0.0,
            config,
        };
        sim.apply_mask(case);
        Ok(sim)
    }

    pub fn step_index(&self) -> usize {
        self.k
    }

    pub fn case(&self) -> Case {
        self.case
    }

    fn apply_mask(&mut self, case: Case) {
        for (i, node) in self.network.nodes.iter_mut().enumerate() {
            let on = role_active(node.role, case, self.config.deny_su_when_pu_active);
            match (self.network.active[i], on) {
                (true, false) => {
                    self.resume_power[i] = node.power;
                    node.power = 0.0;
                }
                (false, true) => node.power = self.resume_power[i],
                _ => {}
            }
            self.network.active[i] = on;
        }
        self.case = case;
    }

    fn measure(&self) -> Result<(Vec<f64>, Vec<f64>)> {
        let n = self.network.len();
        let ii = (0..n).map(|i| interference(i, &self.network)).collect();
        let rr = (0..n)
            .map(|i| compute_sir(i, &self.network))
            .collect::<Result<_>>()?;
        Ok((rr, ii))
    }

    fn target(&self, i: usize) -> Option<f64> {
        if !self.network.active[i] {
            return None;
        }
        self.targets.for_role(self.network.nodes[i].role, self.case)
    }

    /// `Σ EᵀP_N E` over users currently tracking a target.
    fn terminal_cost(&self) -> Result<f64> {
        let (rr, _) = self.measure()?;
        let terms: Vec<CostTerm> = (0..self.network.len())
            .filter_map(|i| {
                self.target(i).map(|g| CostTerm {
                    e: Vector2::new(rr[i] - g, g),
                    nu: None,
                })
            })
            .collect();
        Ok(cumulative_cost(&terms, &self.q, self.s, &self.p_n))
    }

    /// Advance one step; `None` once the horizon is reached.
    pub fn step(&mut self) -> Result<Option<StepReport>> {
        let horizon = self.config.horizon;
        let k = self.k;
        if k >= horizon {
            return Ok(None);
        }
        let mut step_cost = 0.0;
        if k > 0 && !self.config.static_channel {
            self.network.evolve(&self.channel);
        }
        let case = activity_case(k as f64 * self.config.sample_time, &self.schedule)?;
        if case != self.case {
            // close the finished segment with the old mask and targets
            step_cost += self.terminal_cost()?;
            self.apply_mask(case);
        }

        let (sirs, interf) = self.measure()?;
        let n = self.network.len();
        let scheduled: Vec<usize> = match self.config.update_mode {
            UpdateMode::Synchronous => (0..n).collect(),
            UpdateMode::RoundRobin if n > 0 => vec![k % n],
            UpdateMode::RoundRobin => Vec::new(),
        };
        let mut diagnostics = vec![None; n];
        let mut updates = Vec::with_capacity(scheduled.len());
        for &i in &scheduled {
            let m = Measurement {
                k,
                case,
                sir: sirs[i],
                interference: interf[i],
                power: self.network.nodes[i].power,
                own_gain: self.network.gain(i, i),
            };
            let out = self.controllers[i].step(&m);
            if let Some(p) = out.power {
                if self.network.active[i] {
                    updates.push((i, p));
                    diagnostics[i] = Some(out.diagnostics);
                }
            }
        }
        for (i, p) in updates {
            self.network.nodes[i].power = p;
        }

        let stage: Vec<CostTerm> = (0..n)
            .filter_map(|i| {
                self.target(i).map(|g| CostTerm {
                    e: Vector2::new(sirs[i] - g, g),
                    nu: Some(self.network.nodes[i].power / interf[i]),
                })
            })
            .collect();
        step_cost += cumulative_cost(&stage, &self.q, self.s, &self.p_n);

        self.k += 1;
        if self.k == horizon {
            if !self.config.static_channel {
                self.network.evolve(&self.channel);
            }
            step_cost += self.terminal_cost()?;
        }
        self.cost += step_cost;

        let record = self.record(k, &sirs, &diagnostics);
        Ok(Some(StepReport {
            record,
            case,
            powers: self.network.nodes.iter().map(|n| n.power).collect(),
            sirs,
            interference: interf,
            diagnostics,
            step_cost,
        }))
    }

    fn record(&self, k: usize, sirs: &[f64], diags: &[Option<Diagnostics>]) -> MetricsRecord {
        let nodes = &self.network.nodes;
        let active = &self.network.active;
        let role_sir = |role| {
            mean(
                (0..nodes.len())
                    .filter(|&i| nodes[i].role == role && active[i])
                    .map(|i| to_db(sirs[i])),
            )
        };
        let role_power = |role| mean(nodes.iter().filter(|n| n.role == role).map(|n| n.power));
        let flat = || diags.iter().flatten();
        MetricsRecord {
            k,
            pu_sir_db: role_sir(Role::Pu),
            su_sir_db: role_sir(Role::Su),
            pu_power: role_power(Role::Pu),
            su_power: role_power(Role::Su),
            mean_abs_bellman: mean(flat().filter_map(|d| d.bellman_residual).map(f64::abs)),
            mean_terminal: mean(flat().filter_map(|d| d.terminal_residual)),
            spectrum_efficiency: spectrum_efficiency(sirs, active, self.config.bandwidth_hz),
            cumulative_cost: self.cost,
            saturation_count: flat().filter(|d| d.saturated).count(),
        }
    }
}

impl Iterator for Simulation {
    type Item = Result<StepReport>;

    fn next(&mut self) -> Option<Self::Item> {
        self.step().transpose()
    }
}

/// Run a scenario to its horizon.
pub fn run_scenario(config: &ScenarioConfig) -> Result<Vec<MetricsRecord>> {
    Simulation::new(config.clone())?
        .map(|r| r.map(|s| s.record))
        .collect()
}
