//! Shared fixtures for the benchmarks.

use std::sync::Arc;

use kahler_core::{
    fs_background, generate_family, make_metric, Background, FamilyParams, MetricState, Model,
    RadialPotential,
};

pub struct Fixture {
    pub bg: Arc<Background>,
    pub phi: RadialPotential,
    pub fs: MetricState,
    pub state: MetricState,
}

/// A fixed family member on CP^n with its metric and the Fubini-Study metric.
pub fn fixture(n: usize, grid: usize) -> Fixture {
    let bg = fs_background(Model::Cpn, n, grid).expect("valid background");
    let phi = generate_family(&bg, 7, "bench", &FamilyParams::new(1, 6, 0.5))
        .expect("admissible member")
        .remove(0);
    let fs = make_metric(&bg, &RadialPotential::zeros(&bg)).expect("fs metric");
    let state = make_metric(&bg, &phi).expect("member metric");
    Fixture { bg, phi, fs, state }
}
