//! Synthetic corpora for benchmarks.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use tkrag_core::tkg::TkgBuilder;
use tkrag_core::{TemporalKg, Timestamp};

/// `num_events` random quadruples over `num_entities` actors and
/// `num_relations` relations within one year. Even relations are often
/// followed by the next relation on the same pair a few days later.
pub fn synthetic_corpus(num_events: usize, num_entities: usize, num_relations: usize, seed: u64) -> TemporalKg {
    assert!(num_entities >= 2 && num_relations >= 2);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let start = 16_436;
    let mut b = TkgBuilder::new();
    let mut pushed = 0;
    while pushed < num_events {
        let s = rng.gen_range(0..num_entities);
        let o = (s + rng.gen_range(1..num_entities)) % num_entities;
        let r = rng.gen_range(0..num_relations);
        let t = start + rng.gen_range(0..365);
        let (sn, on) = (format!("Actor_{s}"), format!("Actor_{o}"));
        if b.push(&sn, &format!("rel_{r}"), &on, Timestamp(t)).is_some() {
            pushed += 1;
        }
        let next = (r + 1) % num_relations;
        if r % 2 == 0 && pushed < num_events && rng.gen_bool(0.5) {
            let lag = rng.gen_range(0..4);
            if b.push(&sn, &format!("rel_{next}"), &on, Timestamp(t + lag)).is_some() {
                pushed += 1;
            }
        }
    }
    b.build()
}
