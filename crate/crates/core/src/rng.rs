//! Reproducible random streams.
//!
//! Every stream is a xoshiro256++ generator whose 256-bit state is expanded
//! from a 64-bit seed with SplitMix64 (`SeedableRng::seed_from_u64`). Parallel
//! work derives one stream per task index from a root seed with
//! [`task_seed`], so results depend on `(root seed, task index)` only and not
//! on how tasks are scheduled across threads.

use rand_core::{RngCore, SeedableRng};
use rand_xoshiro::Xoshiro256PlusPlus;

pub type BctRng = Xoshiro256PlusPlus;

pub fn rng_from_seed(seed: u64) -> BctRng {
    Xoshiro256PlusPlus::seed_from_u64(seed)
}

const GOLDEN_GAMMA: u64 = 0x9e37_79b9_7f4a_7c15;

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(GOLDEN_GAMMA);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Seed for task `index` under `root`: two SplitMix64 rounds over
/// `root + (index + 1) * gamma`.
pub fn task_seed(root: u64, index: u64) -> u64 {
    splitmix64(splitmix64(root.wrapping_add(index.wrapping_add(1).wrapping_mul(GOLDEN_GAMMA))))
}

pub fn task_rng(root: u64, index: u64) -> BctRng {
    rng_from_seed(task_seed(root, index))
}

/// Uniform integer in `[0, bound)`, unbiased (Lemire's multiply-and-reject).
///
/// Panics if `bound == 0`.
#[inline]
pub fn uniform_below<R: RngCore + ?Sized>(rng: &mut R, bound: u64) -> u64 {
    assert!(bound > 0, "uniform_below: empty range");
    let mut m = u128::from(rng.next_u64()) * u128::from(bound);
    let mut low = m as u64;
    if low < bound {
        let threshold = bound.wrapping_neg() % bound;
        while low < threshold {
            m = u128::from(rng.next_u64()) * u128::from(bound);
            low = m as u64;
        }
    }
    (m >> 64) as u64
}

/// Uniform float in `[0, 1)` with 53 random bits.
pub fn uniform_f64<R: RngCore + ?Sized>(rng: &mut R) -> f64 {
    (rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

/// Swap targets drawn ahead of use in [`shuffle`].
const LOOKAHEAD: usize = 16;

/// In-place Fisher–Yates shuffle.
///
/// Swap targets are drawn `LOOKAHEAD` steps early and prefetched, which
/// hides most cache misses on large slices. The random stream is consumed in
/// the same order as the textbook loop, so the result is identical to it.
pub fn shuffle<T, R: RngCore + ?Sized>(rng: &mut R, items: &mut [T]) {
    let n = items.len();
    if n < 2 {
        return;
    }
    let mut ahead = [0usize; LOOKAHEAD];
    // i runs n-1 down to 1; step s handles i = n-1-s
    let steps = n - 1;
    let draw = |rng: &mut R, s: usize| uniform_below(rng, (n - s) as u64) as usize;
    for (s, slot) in ahead.iter_mut().enumerate().take(steps) {
        *slot = draw(rng, s);
        prefetch(items, *slot);
    }
    for s in 0..steps {
        let slot = s % LOOKAHEAD;
        let j = ahead[slot];
        if s + LOOKAHEAD < steps {
            ahead[slot] = draw(rng, s + LOOKAHEAD);
            prefetch(items, ahead[slot]);
        }
        items.swap(n - 1 - s, j);
    }
}

#[inline(always)]
fn prefetch<T>(items: &[T], k: usize) {
    #[cfg(target_arch = "x86_64")]
    // SAFETY: prefetch is only a hint and never faults; `k` is in bounds anyway.
    unsafe {
        use std::arch::x86_64::{_mm_prefetch, _MM_HINT_T0};
        _mm_prefetch::<_MM_HINT_T0>(items.as_ptr().add(k) as *const i8);
    }
    #[cfg(not(target_arch = "x86_64"))]
    let _ = (items, k);
}
