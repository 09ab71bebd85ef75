//! Structured seeds.
//!
//! A [`Seed`] is a root value plus a `(stream, counter)` coordinate. Every
//! coordinate maps to its own ChaCha8 generator, so grid cell `r`, replicate
//! `j` always draws the same numbers no matter which thread gets there first.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Root seed plus stream coordinates.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Default)]
pub struct Seed {
    root: u64,
    stream: u64,
    counter: u64,
}

fn splitmix64(state: &mut u64) -> u64 {
    *state = state.wrapping_add(0x9E37_79B9_7F4A_7C15);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

impl Seed {
    pub const fn new(root: u64) -> Self {
        Self {
            root,
            stream: 0,
            counter: 0,
        }
    }

    pub fn root(&self) -> u64 {
        self.root
    }

    /// Same root, different coordinates.
    pub const fn at(self, stream: u64, counter: u64) -> Self {
        Self {
            root: self.root,
            stream,
            counter,
        }
    }

    /// Opens a fresh seed tree rooted at this coordinate, tagged by `tag`.
    pub fn child(self, tag: u64) -> Self {
        let mut state = self.mix();
        let mut s = state ^ tag.rotate_left(17);
        Self::new(splitmix64(&mut state) ^ splitmix64(&mut s))
    }

    fn mix(&self) -> u64 {
        let mut state = self.root;
        let a = splitmix64(&mut state);
        let mut s2 = a ^ self.stream.wrapping_mul(0xD1B5_4A32_D192_ED03);
        let b = splitmix64(&mut s2);
        let mut s3 = b ^ self.counter.wrapping_mul(0x8CB9_2BA7_2F3D_8DD7);
        splitmix64(&mut s3)
    }

    pub fn rng(&self) -> ChaCha8Rng {
        let mut state = self.mix();
        let mut key = [0u8; 32];
        for chunk in key.chunks_exact_mut(8) {
            chunk.copy_from_slice(&splitmix64(&mut state).to_le_bytes());
        }
        ChaCha8Rng::from_seed(key)
    }
}
