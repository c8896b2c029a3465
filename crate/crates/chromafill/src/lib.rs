pub mod colorize;
pub mod error;
pub mod levin;
pub mod maskgen;
pub mod metrics;
pub mod mono;
pub mod nn;
pub mod raster;
pub mod rng;
pub mod synth;

pub use error::{Error, Result};

/// Raise glibc's mmap threshold once so the multi-megabyte tensor buffers
/// the training loops churn through are recycled by the heap allocator
/// instead of being unmapped and re-faulted on every iteration. Called by
/// the training entry points; safe to call repeatedly.
pub fn tune_allocator() {
    static ONCE: std::sync::Once = std::sync::Once::new();
    ONCE.call_once(|| {
        #[cfg(target_os = "linux")]
        unsafe {
            libc::mallopt(libc::M_MMAP_THRESHOLD, 128 * 1024 * 1024);
            libc::mallopt(libc::M_TRIM_THRESHOLD, 128 * 1024 * 1024);
        }
    });
}
