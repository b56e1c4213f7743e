//! Fixed worker pool with ordered collection.

use rayon::prelude::*;

/// Environment variable that overrides the worker count everywhere.
pub const WORKERS_ENV: &str = "HYCIRC_WORKERS";

/// Resolve the worker count: explicit request, then the env override, then 1.
pub fn resolve_workers(requested: Option<usize>) -> usize {
    if let Some(n) = requested {
        return n.max(1);
    }
    std::env::var(WORKERS_ENV)
        .ok()
        .and_then(|s| s.trim().parse::<usize>().ok())
        .map(|n| n.max(1))
        .unwrap_or(1)
}

/// Evaluate `f(0..n)` on `workers` threads. Output order is the index order.
pub fn map_indexed<T, F>(n: usize, workers: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    if workers <= 1 {
        return (0..n).map(f).collect();
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .expect("thread pool");
    pool.install(|| (0..n).into_par_iter().map(&f).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn order_is_independent_of_workers() {
        let a = map_indexed(100, 1, |i| i * i);
        let b = map_indexed(100, 4, |i| i * i);
        assert_eq!(a, b);
    }
}
