//! Fixture builders shared by the test suites: a DEX assembler, a manifest
//! packer, an APK writer and seeded random corpus generators.

pub mod apk;
pub mod dex;
pub mod manifest;
pub mod synth;

pub use rand_chacha::ChaCha8Rng as Rng;

pub fn seeded(seed: u64) -> Rng {
    use rand::SeedableRng;
    Rng::seed_from_u64(seed)
}
