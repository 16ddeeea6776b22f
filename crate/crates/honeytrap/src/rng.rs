//! The random-source contract.
//!
//! Every stochastic operation takes an explicit random source; there is no
//! hidden global state. Runs are reproducible across machines and across
//! parallelism levels because each run owns one generator seeded from the
//! config and consumed in a fixed order.
//!
//! The generator is an interface constant: ChaCha with 12 rounds, a
//! counter-based stream cipher, seeded by expanding the 64-bit config seed
//! with SplitMix64 into the 256-bit key (the `seed_from_u64` scheme of the
//! `rand` crate). An independent implementation that reproduces this
//! expansion and draws in the same order reproduces the logs byte for byte.

/// Identifier of the generator algorithm, recorded for interoperability.
pub const RNG_ALGORITHM: &str = "chacha12/splitmix64-seed";

/// The concrete generator used everywhere in this crate.
pub type SimRng = rand_chacha::ChaCha12Rng;

/// Builds the run generator for a 64-bit seed.
pub fn rng_from_seed(seed: u64) -> SimRng {
    use rand::SeedableRng;
    SimRng::seed_from_u64(seed)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::RngCore;

    #[test]
    fn same_seed_same_stream() {
        let mut a = rng_from_seed(7);
        let mut b = rng_from_seed(7);
        for _ in 0..64 {
            assert_eq!(a.next_u64(), b.next_u64());
        }
    }

    #[test]
    fn different_seeds_diverge() {
        let mut a = rng_from_seed(1);
        let mut b = rng_from_seed(2);
        let same = (0..16).filter(|_| a.next_u64() == b.next_u64()).count();
        assert!(same < 4);
    }
}
