//! Counter-based random streams.
//!
//! Every draw is a pure function of `(seed, tag, a, b)`, so simulations can
//! evaluate instances in any order (or in parallel) and still produce the
//! same bits. Not cryptographically secure.

/// Stream tags keep draws for different purposes statistically disjoint.
pub mod tag {
    pub const LABEL: u64 = 1;
    pub const ENTRY: u64 = 2;
    pub const TRIAL: u64 = 3;
    pub const PSI: u64 = 4;
    pub const ETA: u64 = 5;
    pub const PRIOR: u64 = 6;
    pub const CLASS: u64 = 7;
}

/// SplitMix64 finalizer.
#[inline]
pub fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d049bb133111eb);
    z ^ (z >> 31)
}

/// 64 bits for the counter `(seed, tag, a, b)`.
#[inline]
pub fn counter_u64(seed: u64, tag: u64, a: u64, b: u64) -> u64 {
    let mut h = mix64(seed ^ 0x9e3779b97f4a7c15);
    h = mix64(h ^ tag.wrapping_mul(0xff51afd7ed558ccd));
    h = mix64(h ^ a.wrapping_mul(0xc4ceb9fe1a85ec53));
    h = mix64(h ^ b.wrapping_mul(0xd6e8feb86659fd93));
    h
}

/// Uniform draw in `[0, 1)` from the counter `(seed, tag, a, b)`.
#[inline]
pub fn unit_f64(seed: u64, tag: u64, a: u64, b: u64) -> f64 {
    // 53 top bits -> [0,1) on the dyadic grid
    (counter_u64(seed, tag, a, b) >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

/// Derives an independent sub-seed, e.g. one per simulation trial.
#[inline]
pub fn sub_seed(seed: u64, tag: u64, a: u64, b: u64) -> u64 {
    counter_u64(seed, tag, a, b)
}
