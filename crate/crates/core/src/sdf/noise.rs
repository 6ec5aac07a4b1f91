//! Seeded 2D gradient noise and its fractal sum.
//!
//! Gradients are picked by a fixed 64-bit avalanche mix of the seed and the
//! integer lattice coordinates, so the field is identical on every platform
//! and every run. Interpolation uses the quintic fade `6t^5 - 15t^4 + 10t^3`,
//! which keeps the field C2 continuous.

use std::f64::consts::FRAC_1_SQRT_2;

const GRADIENTS: [(f64, f64); 8] = [
    (1.0, 0.0),
    (FRAC_1_SQRT_2, FRAC_1_SQRT_2),
    (0.0, 1.0),
    (-FRAC_1_SQRT_2, FRAC_1_SQRT_2),
    (-1.0, 0.0),
    (-FRAC_1_SQRT_2, -FRAC_1_SQRT_2),
    (0.0, -1.0),
    (FRAC_1_SQRT_2, -FRAC_1_SQRT_2),
];

/// SplitMix64 finalizer.
#[inline]
fn avalanche(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

#[inline]
fn lattice_hash(seed: u64, ix: i64, iy: i64) -> u64 {
    let cell = (ix as u64).wrapping_mul(0x9e37_79b9_7f4a_7c15) ^ avalanche(iy as u64);
    avalanche(seed ^ avalanche(cell))
}

#[inline]
fn gradient(seed: u64, ix: i64, iy: i64) -> (f64, f64) {
    GRADIENTS[(lattice_hash(seed, ix, iy) >> 61) as usize]
}

#[inline]
fn fade(t: f64) -> f64 {
    t * t * t * (t * (t * 6.0 - 15.0) + 10.0)
}

#[inline]
fn lerp(a: f64, b: f64, t: f64) -> f64 {
    a + t * (b - a)
}

/// Single-octave gradient noise. Zero on every integer lattice point and
/// bounded by `sqrt(2)/2` in magnitude.
pub fn gradient_noise2(seed: u64, x: f64, y: f64) -> f64 {
    let fx0 = x.floor();
    let fy0 = y.floor();
    let ix = fx0 as i64;
    let iy = fy0 as i64;
    let tx = x - fx0;
    let ty = y - fy0;

    let dot = |cx: i64, cy: i64, dx: f64, dy: f64| {
        let (gx, gy) = gradient(seed, cx, cy);
        gx * dx + gy * dy
    };
    let n00 = dot(ix, iy, tx, ty);
    let n10 = dot(ix.wrapping_add(1), iy, tx - 1.0, ty);
    let n01 = dot(ix, iy.wrapping_add(1), tx, ty - 1.0);
    let n11 = dot(ix.wrapping_add(1), iy.wrapping_add(1), tx - 1.0, ty - 1.0);

    let u = fade(tx);
    let v = fade(ty);
    lerp(lerp(n00, n10, u), lerp(n01, n11, u), v)
}

/// Fractal Brownian motion: `sum_i gain^i * noise(seed + i, lacunarity^i * (x, y))`.
pub fn fbm2(seed: u64, octaves: u32, lacunarity: f64, gain: f64, x: f64, y: f64) -> f64 {
    let mut sum = 0.0;
    let mut freq = 1.0;
    let mut amp = 1.0;
    for octave in 0..octaves {
        sum += amp * gradient_noise2(seed.wrapping_add(octave as u64), x * freq, y * freq);
        freq *= lacunarity;
        amp *= gain;
    }
    sum
}
