//! Seedable, splittable, counter-based random generator.
//!
//! Every random draw in this crate (textures, crops, masks, scale factors,
//! weight initialization, shuffling) goes through [`SplitRng`] so that runs
//! reproduce bit-exactly on any platform. The generator is stateless in
//! spirit: output `i` of a stream is `mix64(key ^ GOLDEN * i)` where
//! `mix64` is the SplitMix64 finalizer, and child streams derive their key
//! as `mix64(key ^ GOLDEN * tag)`. Pure 64-bit integer arithmetic, so
//! identical sequences everywhere.

const GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;

/// SplitMix64 finalizer: a fixed bijective scrambler on 64-bit words.
fn mix64(mut z: u64) -> u64 {
    z = z.wrapping_add(GOLDEN);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

#[derive(Clone, Debug)]
pub struct SplitRng {
    key: u64,
    counter: u64,
}

impl SplitRng {
    pub fn new(seed: u64) -> Self {
        Self {
            key: mix64(seed),
            counter: 0,
        }
    }

    /// Derives an independent child stream. Children with distinct tags
    /// (and the parent) produce unrelated sequences.
    pub fn split(&self, tag: u64) -> SplitRng {
        SplitRng {
            key: mix64(self.key ^ tag.wrapping_mul(GOLDEN)),
            counter: 0,
        }
    }

    pub fn next_u64(&mut self) -> u64 {
        let out = mix64(self.key ^ self.counter.wrapping_mul(GOLDEN));
        self.counter += 1;
        out
    }

    /// Uniform draw in [0, 1) with 53 bits of precision.
    pub fn next_f64(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Uniform draw in [lo, hi).
    pub fn uniform(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.next_f64()
    }

    /// Uniform index in [0, n). Modulo bias is below 2^-50 for any n this
    /// crate uses.
    pub fn index(&mut self, n: usize) -> usize {
        debug_assert!(n > 0);
        (self.next_u64() % n as u64) as usize
    }
}
