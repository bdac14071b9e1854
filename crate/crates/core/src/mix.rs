//! Fixed 64-bit integer mixing function.
//!
//! All deterministic sampling and test-noise in this crate is derived from
//! `splitmix64` (Steele, Lea, Flood 2014). The constants below are the
//! published ones; reports produced from the same parameters are therefore
//! bit-identical across runs and platforms.

/// One splitmix64 step: mixes a 64-bit word into a well-distributed output.
#[inline]
pub fn splitmix64(state: u64) -> u64 {
    let mut z = state.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Mixes a seed with a stream of words (annulus index, point index, ...).
pub fn mix(seed: u64, words: &[u64]) -> u64 {
    let mut z = splitmix64(seed);
    for &w in words {
        z = splitmix64(z ^ w);
    }
    z
}

/// Maps a mixed word to the half-open unit interval.
#[inline]
pub fn unit_f64(word: u64) -> f64 {
    // 53 high bits -> [0, 1)
    (word >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

/// Deterministic sign in {-1.0, +1.0} from a point id.
#[inline]
pub fn sign(seed: u64, id: usize) -> f64 {
    if mix(seed, &[id as u64]) & 1 == 0 {
        1.0
    } else {
        -1.0
    }
}

/// Two independent standard normals via Box-Muller on mixed uniforms.
pub fn normal_pair(seed: u64, words: &[u64]) -> (f64, f64) {
    let w1 = mix(seed, words);
    let w2 = splitmix64(w1 ^ 0x5851_f42d_4c95_7f2d);
    // keep u1 away from 0 so ln is finite
    let u1 = (unit_f64(w1)).max(1e-12);
    let u2 = unit_f64(w2);
    let r = (-2.0 * u1.ln()).sqrt();
    let theta = std::f64::consts::TAU * u2;
    (r * theta.cos(), r * theta.sin())
}
