//! Named, independent random streams derived from one run seed.
//!
//! Each subsystem draws from its own ChaCha stream so that switching a
//! strategy on or off never shifts the numbers another subsystem sees.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stream {
    Plant,
    Faults,
    Exploration,
    Agents,
}

impl Stream {
    fn id(self) -> u64 {
        match self {
            Stream::Plant => 1,
            Stream::Faults => 2,
            Stream::Exploration => 3,
            Stream::Agents => 4,
        }
    }
}

pub fn stream(seed: u64, which: Stream) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(which.id());
    rng
}
