use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Independent deterministic stream `stream` under a global seed.
pub fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Stream for one (purpose, epoch) pair; purposes keep sampler, init and
/// shuffling draws from sharing a stream.
pub fn derived_rng(seed: u64, purpose: u32, index: u32) -> ChaCha8Rng {
    stream_rng(seed, (u64::from(purpose) << 32) | u64::from(index))
}
