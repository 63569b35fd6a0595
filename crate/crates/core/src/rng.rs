//! Seeded random streams.
//!
//! Every consumer of randomness in a run owns its own ChaCha stream derived
//! from the run seed, so enabling a measurement hook never perturbs the
//! training trajectory.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type Rng = ChaCha8Rng;

pub mod stream {
    pub const INIT: u64 = 0;
    pub const ENV: u64 = 1;
    pub const ACT: u64 = 2;
    pub const REPLAY: u64 = 3;
    pub const DORMANCY: u64 = 4;
    pub const RECYCLE: u64 = 5;
    pub const RESET: u64 = 6;
    pub const PRUNE: u64 = 7;
    pub const TASK: u64 = 8;
    pub const SHUFFLE: u64 = 9;
    pub const BOOTSTRAP: u64 = 10;
}

pub fn seeded(seed: u64, stream: u64) -> Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}
