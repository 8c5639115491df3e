//! Optional thread fan-out for independent per-atom work.
//!
//! Results are collected by index and reduced left-to-right by the callers,
//! so outputs are byte-identical whatever `DRSO_THREADS` says.

use std::sync::OnceLock;

static THREADS: OnceLock<usize> = OnceLock::new();

/// Worker cap from the `DRSO_THREADS` environment variable (default 1).
pub fn thread_count() -> usize {
    *THREADS.get_or_init(|| {
        std::env::var("DRSO_THREADS")
            .ok()
            .and_then(|v| v.parse::<usize>().ok())
            .filter(|&n| n >= 1)
            .unwrap_or(1)
    })
}

/// Maps `f` over `0..len`, fanning out across threads when permitted and
/// worthwhile; the output order is always by index.
pub fn map_indexed<T, F>(len: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync,
{
    let workers = thread_count().min(len.max(1));
    if workers <= 1 || len < 64 {
        return (0..len).map(f).collect();
    }
    let mut out: Vec<Option<T>> = (0..len).map(|_| None).collect();
    let chunk = len.div_ceil(workers);
    std::thread::scope(|scope| {
        for (w, slot) in out.chunks_mut(chunk).enumerate() {
            let f = &f;
            scope.spawn(move || {
                let base = w * chunk;
                for (k, s) in slot.iter_mut().enumerate() {
                    *s = Some(f(base + k));
                }
            });
        }
    });
    out.into_iter().map(|v| v.expect("worker filled every slot")).collect()
}
