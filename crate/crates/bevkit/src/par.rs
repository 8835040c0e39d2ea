//! Process-wide parallelism cap.

use std::sync::OnceLock;

/// Env var that caps internal parallelism. Read once, at first use.
pub const THREADS_ENV: &str = "BEV_KIT_THREADS";

static THREADS: OnceLock<usize> = OnceLock::new();

/// Number of worker threads kernels may use: `BEV_KIT_THREADS` when set to a
/// positive integer, otherwise the machine's available parallelism.
pub fn effective_threads() -> usize {
    *THREADS.get_or_init(|| {
        if let Ok(v) = std::env::var(THREADS_ENV) {
            if let Ok(n) = v.trim().parse::<usize>() {
                if n >= 1 {
                    return n;
                }
            }
        }
        std::thread::available_parallelism().map_or(1, |n| n.get())
    })
}
