//! Process-wide knobs.

use std::sync::atomic::{AtomicUsize, Ordering};

static THREAD_CAP: AtomicUsize = AtomicUsize::new(1);

/// Upper bound on worker threads used by batch evaluation. Defaults to 1
/// so results and schedules are deterministic unless a caller opts in.
pub fn thread_cap() -> usize {
    THREAD_CAP.load(Ordering::Relaxed).max(1)
}

pub fn set_thread_cap(n: usize) {
    THREAD_CAP.store(n.max(1), Ordering::Relaxed);
}

/// Reads the `CILN_THREADS` environment variable into the thread cap.
pub fn init_thread_cap_from_env() {
    if let Ok(v) = std::env::var("CILN_THREADS") {
        if let Ok(n) = v.trim().parse::<usize>() {
            set_thread_cap(n);
        }
    }
}
