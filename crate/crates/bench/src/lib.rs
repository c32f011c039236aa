//! Shared fixtures for the benchmarks.

use mlrate_core::sim::{generate_aa_panel, generate_friedman, AaPanelConfig, FriedmanDgpConfig};
use mlrate_core::{ExperimentDataset, PanelDataset, RandomStream};

/// A Friedman dataset with the default noise and treatment share.
pub fn friedman(n: usize, d: usize, seed: u64) -> ExperimentDataset {
    let cfg = FriedmanDgpConfig {
        n,
        d,
        ..Default::default()
    };
    generate_friedman(&cfg, &mut RandomStream::new(seed, 0)).expect("valid benchmark config")
}

/// A Gaussian A/A panel with autocorrelation 0.7.
pub fn panel(n: usize, seed: u64) -> PanelDataset {
    let cfg = AaPanelConfig {
        n,
        ..Default::default()
    };
    generate_aa_panel(&cfg, &mut RandomStream::new(seed, 0)).expect("valid benchmark config")
}
