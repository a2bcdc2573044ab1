//! Deterministic element-parallel reductions.
//!
//! Per-element work is computed in parallel into fixed chunk slots and
//! combined in a serial pass in element order, so results are bitwise
//! independent of the thread count and scheduling.

use rayon::prelude::*;

const CHUNK: usize = 512;

/// Sum `f(e)` over `0..n` with a deterministic reduction order.
pub fn block_sum(n: usize, f: impl Fn(usize) -> f64 + Sync) -> f64 {
    if n == 0 {
        return 0.0;
    }
    let n_chunks = n.div_ceil(CHUNK);
    let partial: Vec<f64> = (0..n_chunks)
        .into_par_iter()
        .map(|c| {
            let lo = c * CHUNK;
            let hi = (lo + CHUNK).min(n);
            let mut acc = 0.0;
            for e in lo..hi {
                acc += f(e);
            }
            acc
        })
        .collect();
    partial.into_iter().sum()
}

/// Fallible variant of [`block_sum`]; the reduction order of the partial
/// sums is deterministic, the reported error is the lowest failing chunk's.
pub fn try_block_sum<E: Send>(n: usize, f: impl Fn(usize) -> Result<f64, E> + Sync) -> Result<f64, E> {
    if n == 0 {
        return Ok(0.0);
    }
    let n_chunks = n.div_ceil(CHUNK);
    let partial: Vec<Result<f64, E>> = (0..n_chunks)
        .into_par_iter()
        .map(|c| {
            let lo = c * CHUNK;
            let hi = (lo + CHUNK).min(n);
            let mut acc = 0.0;
            for e in lo..hi {
                acc += f(e)?;
            }
            Ok(acc)
        })
        .collect();
    let mut total = 0.0;
    for p in partial {
        total += p?;
    }
    Ok(total)
}
