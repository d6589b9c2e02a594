//! Independent, seedable random streams.
//!
//! Every consumer of randomness (placement, initial powers, each link, each
//! controller) draws from its own ChaCha stream derived from the scenario
//! seed, so reordering updates never perturbs another stream's sequence.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type SimRng = ChaCha8Rng;

/// Stream identifiers. Link and controller streams are offset by index.
#[derive(Debug, Clone, Copy)]
pub enum Stream {
    Placement,
    InitialPower,
    Link { rx: usize, tx: usize, nodes: usize },
    Controller(usize),
}

impl Stream {
    fn id(self) -> u64 {
        const LINK_BASE: u64 = 1 << 20;
        const CONTROLLER_BASE: u64 = 1 << 40;
        match self {
            Stream::Placement => 1,
            Stream::InitialPower => 2,
            Stream::Link { rx, tx, nodes } => LINK_BASE + (rx * nodes + tx) as u64,
            Stream::Controller(i) => CONTROLLER_BASE + i as u64,
        }
    }
}

pub fn stream(seed: u64, which: Stream) -> SimRng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(which.id());
    rng
}
