use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Independent random streams of one replication.
///
/// All three derive from the master seed; `stream` selects a disjoint
/// ChaCha stream triple, so replications with the same seed and stream see
/// the same channel realisations whatever policy they run.
#[derive(Clone, Debug)]
pub struct ReplicationRng {
    pub channel: ChaCha8Rng,
    pub arrivals: ChaCha8Rng,
    pub policy: ChaCha8Rng,
}

impl ReplicationRng {
    pub fn new(seed: u64, stream: u64) -> Self {
        let make = |k: u64| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(stream.wrapping_mul(3).wrapping_add(k));
            rng
        };
        Self {
            channel: make(0),
            arrivals: make(1),
            policy: make(2),
        }
    }
}
