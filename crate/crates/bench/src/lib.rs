//! Shared fixtures for the benchmarks.

use addsel::pipeline::Prepared;
use addsel::simgen::generate;
use addsel::{Example, FitConfig, GenConfig};

/// Prepared Example 2 data at the given size.
pub fn prepared(n: usize, p: usize, seed: u64) -> Prepared {
    let g = generate(&GenConfig::new(Example::Two, n, p, 0.0, seed)).expect("valid config");
    Prepared::new(
        &g.dataset,
        &FitConfig::default().basis().expect("default basis"),
    )
    .expect("valid data")
}
