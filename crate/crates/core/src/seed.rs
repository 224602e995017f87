//! Seed fan-out.
//!
//! Every random stream in the pipeline is seeded with
//! `derive_seed(base, role)`: the FNV-1a hash of the role tag is XORed into
//! the base seed and the result is passed through one SplitMix64 round.
//! Distinct roles therefore get decorrelated streams from one user seed.

pub fn fnv1a64(tag: &str) -> u64 {
    tag.bytes().fold(0xcbf2_9ce4_8422_2325, |h, b| {
        (h ^ u64::from(b)).wrapping_mul(0x0000_0100_0000_01b3)
    })
}

pub fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

pub fn derive_seed(base: u64, role: &str) -> u64 {
    splitmix64(base ^ fnv1a64(role))
}
