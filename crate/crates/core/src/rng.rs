use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Independent stream `stream` under root `seed`. Lets parallel workers draw
/// reproducibly without sharing generator state.
pub fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}
