use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Stream for replication `rep` under `seed`: ChaCha8 keyed by the master
/// seed, with the replication index as the stream id.
pub(crate) fn replication_rng(seed: u64, rep: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(rep);
    rng
}

/// Uniform draw in [0, 1) with 53 bits of precision.
pub(crate) fn unit(rng: &mut impl RngCore) -> f64 {
    (rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

/// Index drawn from the weights in `probs` (assumed to sum to one).
pub(crate) fn sample_index<'a>(rng: &mut impl RngCore, probs: impl Iterator<Item = &'a f64>) -> usize {
    let u = unit(rng);
    let mut acc = 0.0;
    let mut last = 0;
    for (i, p) in probs.enumerate() {
        acc += *p;
        last = i;
        if u < acc {
            return i;
        }
    }
    last
}
