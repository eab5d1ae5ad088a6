//! Thread fan-out for index-addressed work. Because all randomness is
//! counter-based and each index writes only its own output slot, the result
//! is identical for any worker count; threads change wall time, not values.

/// Worker count from the environment: `QUANTO_THREADS` caps the pool,
/// 0 or unset means one worker per available core.
pub(crate) fn worker_count() -> usize {
    match std::env::var("QUANTO_THREADS")
        .ok()
        .and_then(|s| s.parse::<usize>().ok())
    {
        None | Some(0) => std::thread::available_parallelism()
            .map(|n| n.get())
            .unwrap_or(1),
        Some(k) => k,
    }
}

/// Fill a vector of length `n` with `f(i)` using up to `workers` threads.
/// Indices are split into contiguous chunks; chunk boundaries cannot affect
/// the output because `f` is a pure function of the index.
pub(crate) fn fill_indexed<T, F>(n: usize, workers: usize, f: F) -> Vec<T>
where
    T: Default + Clone + Send,
    F: Fn(usize) -> T + Sync,
{
    let mut out = vec![T::default(); n];
    let workers = workers.max(1).min(n.max(1));
    if workers == 1 {
        for (i, slot) in out.iter_mut().enumerate() {
            *slot = f(i);
        }
        return out;
    }
    let chunk = n.div_ceil(workers);
    std::thread::scope(|scope| {
        for (c, slice) in out.chunks_mut(chunk).enumerate() {
            let f = &f;
            scope.spawn(move || {
                let base = c * chunk;
                for (j, slot) in slice.iter_mut().enumerate() {
                    *slot = f(base + j);
                }
            });
        }
    });
    out
}
