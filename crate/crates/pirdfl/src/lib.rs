//! Simulation, training and evaluation harness around `pirdfl-core`.

pub mod baseline;
pub mod checkpoint;
pub mod commands;
pub mod config;
pub mod dataset;
pub mod harness;
pub mod report;

/// Sizes the global worker pool from `PIRDFL_THREADS` when set. Results do not
/// depend on the thread count.
pub fn init_threads() {
    if let Some(n) = std::env::var("PIRDFL_THREADS").ok().and_then(|v| v.parse::<usize>().ok()) {
        // Fails only when the pool is already built, which is fine.
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
}
