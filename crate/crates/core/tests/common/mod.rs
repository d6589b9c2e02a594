//! Shared fixtures for the integration tests.
#![allow(dead_code)]

use nalgebra::DMatrix;

use crn_sim::controller::{
    ControllerConfig, ControllerKind, ControllerState, Measurement, StepOutput, Targets,
};
use crn_sim::estimator::EstimatorParams;
use crn_sim::network::{compute_sir, interference, Case, NetworkState, Role};
use crn_sim::rng::{stream, Stream};

/// Own gain of the controlled link in the static fixture.
pub const OWN_GAIN: f64 = 16.0;
pub const NOISE: f64 = 1e-13;

/// One controlled user (node 0) and two interferers whose powers never
/// change. Interference at node 0 is `1.6e-4 + NOISE`.
pub fn static_user_network(p0: f64) -> NetworkState {
    #[rustfmt::skip]
    let gains = DMatrix::from_row_slice(3, 3, &[
        OWN_GAIN, 0.01, 0.02,
        0.03, 9.0, 0.01,
        0.02, 0.04, 12.0,
    ]);
    NetworkState::from_gains(&gains, &[p0, 0.01, 0.003], NOISE)
}

pub fn controller_config(kind: ControllerKind, horizon: usize) -> ControllerConfig {
    ControllerConfig {
        kind,
        horizon,
        targets: Targets::default(),
        estimator: EstimatorParams::default(),
        exploration: 0.05,
        p_max: 2.0,
    }
}

pub struct Trace {
    pub measurements: Vec<Measurement>,
    pub outputs: Vec<StepOutput>,
}

/// Drive node 0 of `network` for `config.horizon` steps in Case 1 with the
/// other nodes frozen.
pub fn drive_single_user(config: ControllerConfig, seed: u64, mut network: NetworkState) -> Trace {
    let horizon = config.horizon;
    let mut ctrl = ControllerState::new(0, Role::Su, config, stream(seed, Stream::Controller(0)));
    let mut trace = Trace {
        measurements: Vec::with_capacity(horizon),
        outputs: Vec::with_capacity(horizon),
    };
    for k in 0..horizon {
        let m = Measurement {
            k,
            case: Case::Case1,
            sir: compute_sir(0, &network).expect("noise keeps interference positive"),
            interference: interference(0, &network),
            power: network.nodes[0].power,
            own_gain: network.gain(0, 0),
        };
        let out = ctrl.step(&m);
        network.nodes[0].power = out.power.expect("active user below the horizon");
        trace.measurements.push(m);
        trace.outputs.push(out);
    }
    trace
}
