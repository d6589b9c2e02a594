//! Multi-user network state: placement, gain table, interference and SIR.

use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::channel::{evolve_channel, sample_channel, ChannelParams, LinkChannelState};
use crate::rng::{stream, SimRng, Stream};
use crate::{Error, Result};

/// Links shorter than this (km) are floored; two clipped nodes can land on
/// the same corner of the area.
pub const MIN_LINK_DISTANCE: f64 = 1e-3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    Pu,
    Su,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Case {
    /// Primary users silent.
    Case1,
    /// Primary users transmitting.
    Case2,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Node {
    pub id: usize,
    pub role: Role,
    pub tx: (f64, f64),
    pub rx: (f64, f64),
    pub power: f64,
}

fn dist(a: (f64, f64), b: (f64, f64)) -> f64 {
    (a.0 - b.0).hypot(a.1 - b.1)
}

fn inside(p: (f64, f64), area: f64) -> bool {
    (0.0..=area).contains(&p.0) && (0.0..=area).contains(&p.1)
}

/// Place PUs first, then SUs. Transmitters are Gaussian around the centre of
/// the square with standard deviation `area / 4`, clipped to the square.
/// Each receiver sits `link_distance` away at a random bearing, mirrored back
/// through the transmitter if it would leave the area.
pub fn place_nodes<R: Rng + ?Sized>(
    count_pu: usize,
    count_su: usize,
    area_km: f64,
    link_distance: f64,
    rng: &mut R,
) -> Result<Vec<Node>> {
    if !(area_km > 0.0) {
        return Err(Error::config("area_km", "must be > 0"));
    }
    if !(link_distance > 0.0) {
        return Err(Error::config("link_distance_km", "must be > 0"));
    }
    let normal = Normal::new(area_km / 2.0, area_km / 4.0).expect("positive stddev");
    let clip = |x: f64| x.clamp(0.0, area_km);
    let roles =
        std::iter::repeat_n(Role::Pu, count_pu).chain(std::iter::repeat_n(Role::Su, count_su));
    let nodes = roles
        .enumerate()
        .map(|(id, role)| {
            let tx = (clip(normal.sample(rng)), clip(normal.sample(rng)));
            let angle = rng.random_range(0.0..std::f64::consts::TAU);
            let (dx, dy) = (link_distance * angle.cos(), link_distance * angle.sin());
            let mut rx = (tx.0 + dx, tx.1 + dy);
            if !inside(rx, area_km) {
                rx = (tx.0 - dx, tx.1 - dy);
            }
            let rx = (clip(rx.0), clip(rx.1));
            Node {
                id,
                role,
                tx,
                rx,
                power: 0.0,
            }
        })
        .collect();
    Ok(nodes)
}

/// Piecewise-constant PU activity over `[0, horizon]` seconds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ActivitySchedule {
    pub intervals: Vec<ActivityInterval>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ActivityInterval {
    pub start: f64,
    pub end: f64,
    pub case: Case,
}

impl ActivitySchedule {
    pub fn constant(case: Case, horizon: f64) -> Self {
        Self {
            intervals: vec![ActivityInterval {
                start: 0.0,
                end: horizon,
                case,
            }],
        }
    }

    /// Build from breakpoints: `cases[i]` holds on `[bounds[i], bounds[i+1]]`.
    pub fn from_breakpoints(bounds: &[f64], cases: &[Case]) -> Result<Self> {
        if bounds.len() != cases.len() + 1 {
            return Err(Error::config(
                "schedule",
                "need exactly one more breakpoint than cases",
            ));
        }
        let intervals = cases
            .iter()
            .zip(bounds.windows(2))
            .map(|(&case, w)| ActivityInterval {
                start: w[0],
                end: w[1],
                case,
            })
            .collect();
        let s = Self { intervals };
        s.validate(bounds[bounds.len() - 1])?;
        Ok(s)
    }

    /// The four-switch pattern used throughout the experiments, scaled to a
    /// horizon `h`: Case 2, 1, 2, 1, 2 at fractions 0, .25, .4, .6, .9.
    pub fn standard(h: f64) -> Self {
        use Case::*;
        let f = [0.0, 0.25, 0.4, 0.6, 0.9, 1.0].map(|x| x * h);
        Self::from_breakpoints(&f, &[Case2, Case1, Case2, Case1, Case2])
            .expect("valid by construction")
    }

    pub fn validate(&self, horizon: f64) -> Result<()> {
        let Some(first) = self.intervals.first() else {
            return Err(Error::config(
                "schedule",
                "must contain at least one interval",
            ));
        };
        if first.start != 0.0 {
            return Err(Error::config("schedule", "must start at 0"));
        }
        for iv in &self.intervals {
            if !(iv.end > iv.start) {
                return Err(Error::config(
                    "schedule",
                    format!("empty interval [{}, {}]", iv.start, iv.end),
                ));
            }
        }
        for w in self.intervals.windows(2) {
            if w[0].end != w[1].start {
                return Err(Error::config(
                    "schedule",
                    "intervals must be contiguous and sorted",
                ));
            }
        }
        if self.intervals.last().unwrap().end < horizon {
            return Err(Error::config(
                "schedule",
                format!("does not cover the horizon {horizon}"),
            ));
        }
        Ok(())
    }
}

/// Case in force at time `t`. Interior breakpoints belong to the interval
/// that starts there.
pub fn activity_case(t: f64, schedule: &ActivitySchedule) -> Result<Case> {
    let out = || Error::Domain(format!("time {t} is outside the activity schedule"));
    let first = schedule.intervals.first().ok_or_else(out)?;
    let last = schedule.intervals.last().ok_or_else(out)?;
    if !(t >= first.start && t <= last.end) {
        return Err(out());
    }
    Ok(schedule
        .intervals
        .iter()
        .find(|iv| t >= iv.start && t < iv.end)
        .unwrap_or(last)
        .case)
}

/// Whether a node of `role` is allowed to transmit under `case`.
pub fn role_active(role: Role, case: Case, deny_su_when_pu_active: bool) -> bool {
    match (role, case) {
        (Role::Pu, Case::Case1) => false,
        (Role::Su, Case::Case2) => !deny_su_when_pu_active,
        _ => true,
    }
}

/// Everything a receiver can measure about the network, plus the links that
/// produce it. `links[i][j]` is the channel from transmitter `j` to receiver `i`.
#[derive(Debug, Clone)]
pub struct NetworkState {
    pub nodes: Vec<Node>,
    pub links: Vec<Vec<LinkChannelState>>,
    pub active: Vec<bool>,
    pub noise_floor: f64,
    link_rngs: Vec<Vec<SimRng>>,
}

impl NetworkState {
    /// Sample every link from its own seeded stream.
    pub fn new(
        nodes: Vec<Node>,
        params: &ChannelParams,
        noise_floor: f64,
        seed: u64,
    ) -> Result<Self> {
        if !(noise_floor >= 0.0) {
            return Err(Error::config("noise_floor", "must be >= 0"));
        }
        let n = nodes.len();
        let mut links = Vec::with_capacity(n);
        let mut link_rngs = Vec::with_capacity(n);
        for (i, rx) in nodes.iter().enumerate() {
            let mut row = Vec::with_capacity(n);
            let mut rng_row = Vec::with_capacity(n);
            for (j, tx) in nodes.iter().enumerate() {
                let mut rng = stream(
                    seed,
                    Stream::Link {
                        rx: i,
                        tx: j,
                        nodes: n,
                    },
                );
                let d = dist(tx.tx, rx.rx).max(MIN_LINK_DISTANCE);
                row.push(sample_channel(&mut rng, d, params)?);
                rng_row.push(rng);
            }
            links.push(row);
            link_rngs.push(rng_row);
        }
        Ok(Self {
            active: vec![true; n],
            nodes,
            links,
            noise_floor,
            link_rngs,
        })
    }

    /// Build a state with a prescribed gain matrix and no channel process
    /// (`evolve` leaves it unchanged), mainly for tests and oracle checks.
    pub fn from_gains(gains: &DMatrix<f64>, powers: &[f64], noise_floor: f64) -> Self {
        let n = powers.len();
        assert_eq!(gains.shape(), (n, n), "gain matrix must be n×n");
        let nodes = powers
            .iter()
            .enumerate()
            .map(|(id, &power)| Node {
                id,
                role: Role::Su,
                tx: (0.0, 0.0),
                rx: (0.0, 0.0),
                power,
            })
            .collect();
        let links = (0..n)
            .map(|i| {
                (0..n)
                    .map(|j| LinkChannelState {
                        distance: 1.0,
                        shadowing_db: 0.0,
                        latent: [0.0, 0.0],
                        fading_amplitude: 1.0,
                        gain: gains[(i, j)],
                    })
                    .collect()
            })
            .collect();
        Self {
            nodes,
            links,
            active: vec![true; n],
            noise_floor,
            link_rngs: Vec::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn gain(&self, i: usize, j: usize) -> f64 {
        self.links[i][j].gain
    }

    pub fn gain_matrix(&self) -> DMatrix<f64> {
        DMatrix::from_fn(self.len(), self.len(), |i, j| self.gain(i, j))
    }

    /// Transmit powers with inactive nodes zeroed.
    pub fn effective_powers(&self) -> Vec<f64> {
        self.nodes
            .iter()
            .zip(&self.active)
            .map(|(n, &a)| if a { n.power } else { 0.0 })
            .collect()
    }

    /// Advance every link one step. Each link owns its stream, so the order
    /// here has no effect on the realisations.
    pub fn evolve(&mut self, params: &ChannelParams) {
        for (row, rngs) in self.links.iter_mut().zip(self.link_rngs.iter_mut()) {
            for (link, rng) in row.iter_mut().zip(rngs.iter_mut()) {
                *link = evolve_channel(link, params, rng);
            }
        }
    }
}

/// Interference plus noise at receiver `i` from every other active transmitter.
pub fn interference(i: usize, state: &NetworkState) -> f64 {
    let others: f64 = (0..state.len())
        .filter(|&j| j != i && state.active[j])
        .map(|j| state.gain(i, j) * state.nodes[j].power)
        .sum();
    others + state.noise_floor
}

pub fn compute_sir(i: usize, state: &NetworkState) -> Result<f64> {
    let own = if state.active[i] {
        state.gain(i, i) * state.nodes[i].power
    } else {
        0.0
    };
    if own == 0.0 {
        return Ok(0.0);
    }
    let ii = interference(i, state);
    if !(ii > 0.0) {
        return Err(Error::Domain(format!(
            "receiver {i} sees zero interference and no noise floor"
        )));
    }
    Ok(own / ii)
}
