//! Chunked data-parallel execution with a sequential fallback.
//!
//! Work is always split into a fixed number of chunks that does not depend on
//! the thread count, and every chunk derives its own RNG from `(seed, chunk)`.
//! Results are gathered in chunk order, so any reduction over them is
//! bit-for-bit reproducible whether it ran on one thread or many.

use std::cell::Cell;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Mode {
    Sequential,
    Parallel,
}

thread_local! {
    static MODE: Cell<Mode> = const { Cell::new(Mode::Parallel) };
}

/// Runs `f` with the given execution mode on the calling thread.
pub fn with_mode<R>(mode: Mode, f: impl FnOnce() -> R) -> R {
    let prev = MODE.with(|m| m.replace(mode));
    let out = f();
    MODE.with(|m| m.set(prev));
    out
}

pub fn current_mode() -> Mode {
    if cfg!(feature = "parallel") {
        MODE.with(|m| m.get())
    } else {
        Mode::Sequential
    }
}

/// Mixes a base seed with a stream index (splitmix64 finalizer).
pub fn sub_seed(seed: u64, index: u64) -> u64 {
    let mut z = seed
        .wrapping_add(0x9E37_79B9_7F4A_7C15)
        .wrapping_add(index.wrapping_mul(0xBF58_476D_1CE4_E5B9));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

pub fn rng_for(seed: u64, index: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(sub_seed(seed, index))
}

/// Splits `total` items into at most `chunks` contiguous ranges.
pub fn split(total: usize, chunks: usize) -> Vec<std::ops::Range<usize>> {
    let chunks = chunks.max(1).min(total.max(1));
    let base = total / chunks;
    let extra = total % chunks;
    let mut out = Vec::with_capacity(chunks);
    let mut start = 0;
    for c in 0..chunks {
        let len = base + usize::from(c < extra);
        out.push(start..start + len);
        start += len;
    }
    out
}

/// Maps `f` over `0..count` and returns the results in index order.
pub fn map_indexed<T, F>(count: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    match current_mode() {
        Mode::Sequential => map_indexed_seq(count, f),
        Mode::Parallel => map_indexed_par(count, f),
    }
}

pub fn map_indexed_seq<T, F>(count: usize, f: F) -> Vec<T>
where
    F: Fn(usize) -> T,
{
    (0..count).map(f).collect()
}

#[cfg(feature = "parallel")]
fn map_indexed_par<T, F>(count: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    use rayon::prelude::*;
    (0..count).into_par_iter().map(f).collect()
}

#[cfg(not(feature = "parallel"))]
fn map_indexed_par<T, F>(count: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    map_indexed_seq(count, f)
}

/// Default chunk count for sampling sweeps.
pub const SWEEP_CHUNKS: usize = 64;

/// Runs `per_chunk(range, rng)` over a deterministic chunking of `total`
/// samples and returns chunk results in order.
pub fn sweep<T, F>(total: usize, seed: u64, per_chunk: F) -> Vec<T>
where
    T: Send,
    F: Fn(std::ops::Range<usize>, &mut ChaCha8Rng) -> T + Sync + Send,
{
    let ranges = split(total, SWEEP_CHUNKS);
    map_indexed(ranges.len(), |c| {
        let mut rng = rng_for(seed, c as u64);
        per_chunk(ranges[c].clone(), &mut rng)
    })
}

/// Configures the global worker pool from an environment override.
///
/// Returns the number of workers in use. Only the first call has an effect.
pub fn init_workers_from_env(var: &str) -> usize {
    #[cfg(feature = "parallel")]
    {
        if let Some(n) = std::env::var(var).ok().and_then(|s| s.parse::<usize>().ok()) {
            let _ = rayon::ThreadPoolBuilder::new().num_threads(n.max(1)).build_global();
        }
        rayon::current_num_threads()
    }
    #[cfg(not(feature = "parallel"))]
    {
        let _ = var;
        1
    }
}
