//! Scenario configuration: a flat TOML table with documented defaults.

use std::path::Path;

use nalgebra::Matrix2;
use serde::{Deserialize, Serialize};

use crate::channel::ChannelParams;
use crate::controller::{ControllerConfig, ControllerKind, Targets};
use crate::estimator::{default_window, BasisKind, EstimatorParams, TimeRegression};
use crate::network::{ActivitySchedule, Case};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum UpdateMode {
    /// Node `k mod n` updates at step `k`.
    RoundRobin,
    Synchronous,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScenarioConfig {
    pub seed: u64,
    pub count_pu: usize,
    pub count_su: usize,
    pub area_km: f64,
    pub link_distance_km: f64,
    pub horizon: usize,
    pub sample_time: f64,
    /// Switch times in seconds, starting at 0 and ending at or after
    /// `horizon · sample_time`. Empty selects the standard pattern.
    pub schedule_breakpoints: Vec<f64>,
    pub schedule_cases: Vec<Case>,

    pub path_loss_exponent: f64,
    pub reference_gain: f64,
    pub shadowing_stddev_db: f64,
    pub rayleigh_scale: f64,
    pub channel_correlation: f64,
    /// Sample the channel once and keep it fixed.
    pub static_channel: bool,

    pub target_su_high: f64,
    pub target_pu: f64,
    pub target_su_low: f64,

    pub alpha_w: f64,
    pub basis_len: usize,
    pub basis: BasisKind,
    /// Defaults to `max(24, 6·basis_len + 6)`.
    pub window: Option<usize>,
    pub ridge: f64,
    pub q: [[f64; 2]; 2],
    pub s: f64,
    pub p_terminal: [[f64; 2]; 2],
    pub exploration: f64,

    pub p_max: f64,
    pub initial_power_min: f64,
    pub initial_power_max: f64,
    pub noise_floor: f64,
    pub bandwidth_hz: f64,
    pub update_mode: UpdateMode,
    pub controller: ControllerKind,
    /// Keep SUs silent whenever PUs transmit.
    pub deny_su_when_pu_active: bool,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        let ch = ChannelParams::default();
        let t = Targets::default();
        Self {
            seed: 0,
            count_pu: 8,
            count_su: 20,
            area_km: 9.0,
            link_distance_km: 0.5,
            horizon: 2000,
            sample_time: 1.0,
            schedule_breakpoints: Vec::new(),
            schedule_cases: Vec::new(),
            path_loss_exponent: ch.path_loss_exponent,
            reference_gain: ch.reference_gain,
            shadowing_stddev_db: ch.shadowing_stddev_db,
            rayleigh_scale: ch.rayleigh_scale,
            channel_correlation: ch.correlation,
            static_channel: false,
            target_su_high: t.su_high,
            target_pu: t.pu,
            target_su_low: t.su_low,
            alpha_w: 1e-4,
            basis_len: 3,
            basis: BasisKind::Step,
            window: None,
            ridge: 0.0,
            q: [[1.0, 0.0], [0.0, 0.01]],
            s: 1.0,
            p_terminal: [[1.0, 0.0], [0.0, 1.0]],
            exploration: 0.05,
            p_max: 2.0,
            initial_power_min: 0.01,
            initial_power_max: 0.1,
            noise_floor: 1e-13,
            bandwidth_hz: 1e5,
            update_mode: UpdateMode::RoundRobin,
            controller: ControllerKind::Fhaodpa,
            deny_su_when_pu_active: false,
        }
    }
}

fn matrix(m: &[[f64; 2]; 2]) -> Matrix2<f64> {
    Matrix2::new(m[0][0], m[0][1], m[1][0], m[1][1])
}

impl ScenarioConfig {
    /// Named presets. `paper-fig4` is the full experiment: 8 PUs, 20 SUs on a
    /// 9 km square over 2000 one-second steps.
    pub fn preset(name: &str) -> Result<Self> {
        match name {
            "paper-fig4" => Ok(Self::default()),
            _ => Err(Error::config("preset", format!("unknown preset `{name}`"))),
        }
    }

    pub fn channel(&self) -> ChannelParams {
        ChannelParams {
            path_loss_exponent: self.path_loss_exponent,
            reference_gain: self.reference_gain,
            shadowing_stddev_db: self.shadowing_stddev_db,
            rayleigh_scale: self.rayleigh_scale,
            correlation: self.channel_correlation,
        }
    }

    pub fn targets(&self) -> Targets {
        Targets {
            su_high: self.target_su_high,
            pu: self.target_pu,
            su_low: self.target_su_low,
        }
    }

    pub fn estimator(&self) -> Result<EstimatorParams> {
        Ok(EstimatorParams {
            alpha_w: self.alpha_w,
            basis: TimeRegression::new(self.basis_len, self.basis)?,
            window: self
                .window
                .unwrap_or_else(|| default_window(self.basis_len)),
            ridge: self.ridge,
            q: matrix(&self.q),
            s: self.s,
            p_n: matrix(&self.p_terminal),
        })
    }

    pub fn controller_config(&self) -> Result<ControllerConfig> {
        Ok(ControllerConfig {
            kind: self.controller,
            horizon: self.horizon,
            targets: self.targets(),
            estimator: self.estimator()?,
            exploration: self.exploration,
            p_max: self.p_max,
        })
    }

    pub fn duration(&self) -> f64 {
        self.horizon as f64 * self.sample_time
    }

    pub fn schedule(&self) -> Result<ActivitySchedule> {
        if self.schedule_breakpoints.is_empty() && self.schedule_cases.is_empty() {
            if self.horizon == 0 {
                // nothing runs; any valid schedule will do
                return Ok(ActivitySchedule::constant(Case::Case2, self.sample_time));
            }
            Ok(ActivitySchedule::standard(self.duration()))
        } else {
            let s = ActivitySchedule::from_breakpoints(
                &self.schedule_breakpoints,
                &self.schedule_cases,
            )?;
            s.validate(self.duration())?;
            Ok(s)
        }
    }

    pub fn validate(&self) -> Result<()> {
        let positive = |v: f64, field: &str| {
            if v > 0.0 {
                Ok(())
            } else {
                Err(Error::config(field, "must be > 0"))
            }
        };
        positive(self.area_km, "area_km")?;
        positive(self.link_distance_km, "link_distance_km")?;
        positive(self.sample_time, "sample_time")?;
        positive(self.target_su_high, "target_su_high")?;
        positive(self.target_pu, "target_pu")?;
        positive(self.target_su_low, "target_su_low")?;
        positive(self.p_max, "p_max")?;
        positive(self.bandwidth_hz, "bandwidth_hz")?;
        if !(self.noise_floor >= 0.0) {
            return Err(Error::config("noise_floor", "must be >= 0"));
        }
        if self.noise_floor == 0.0 {
            return Err(Error::config(
                "noise_floor",
                "must be > 0: a silent network would leave SIR undefined",
            ));
        }
        if !(self.initial_power_min >= 0.0 && self.initial_power_min <= self.initial_power_max) {
            return Err(Error::config(
                "initial_power_min",
                "need 0 <= initial_power_min <= initial_power_max",
            ));
        }
        if self.initial_power_max > self.p_max {
            return Err(Error::config("initial_power_max", "must not exceed p_max"));
        }
        if !(0.0..1.0).contains(&self.exploration) {
            return Err(Error::config("exploration", "must be in [0, 1)"));
        }
        self.channel().validate()?;
        self.estimator()?.validate()?;
        self.schedule()?;
        Ok(())
    }

    pub fn from_toml(text: &str, origin: &Path) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::Parse {
            path: origin.to_path_buf(),
            message: e.to_string(),
        })?;
        cfg.validate()?;
        Ok(cfg)
    }
}

pub fn load_config(path: &Path) -> Result<ScenarioConfig> {
    let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    ScenarioConfig::from_toml(&text, path)
}
