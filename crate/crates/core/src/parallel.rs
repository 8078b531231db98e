//! Order-preserving fan-out over independent work items.
//!
//! Results are always returned in item order, so output never depends on the
//! worker count.

use std::thread;

/// Worker count from `CSIFORGE_THREADS`, defaulting to 1.
pub fn worker_count() -> usize {
    std::env::var("CSIFORGE_THREADS")
        .ok()
        .and_then(|v| v.trim().parse::<usize>().ok())
        .filter(|&n| n > 0)
        .unwrap_or(1)
}

/// Map `f` over `0..n` with up to `workers` threads, returning results in index order.
pub fn map_indexed<T, F>(n: usize, workers: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync,
{
    let workers = workers.clamp(1, n.max(1));
    if workers == 1 {
        return (0..n).map(f).collect();
    }
    let chunk = n.div_ceil(workers);
    let f = &f;
    thread::scope(|s| {
        let handles: Vec<_> = (0..workers)
            .map(|w| {
                let lo = (w * chunk).min(n);
                let hi = ((w + 1) * chunk).min(n);
                s.spawn(move || (lo..hi).map(f).collect::<Vec<T>>())
            })
            .collect();
        handles
            .into_iter()
            .flat_map(|h| h.join().expect("worker panicked"))
            .collect()
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn order_is_independent_of_worker_count() {
        let serial = map_indexed(37, 1, |i| i * i);
        for w in [2, 3, 8, 64] {
            assert_eq!(map_indexed(37, w, |i| i * i), serial);
        }
        assert!(map_indexed(0, 4, |i| i).is_empty());
    }
}
