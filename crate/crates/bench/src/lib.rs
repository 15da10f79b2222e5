//! Shared fixtures for the benchmarks.

use sectorflow_core::scenario::{self, MeshSpec};
use sectorflow_core::{Field, Params};

/// Demonstration constants on top of the certified `α = 1` exponents.
pub fn demo_params() -> Params {
    let cert = scenario::find_feasible_params(1.0, 0.1).expect("alpha = 1 is feasible");
    scenario::demonstration_params(&cert, 0.1, 0.0625).expect("demonstration constants")
}

/// Prepared initial data on an `nx × ny` lattice.
pub fn prepared_field(p: &Params, nx: usize, ny: usize) -> Field {
    scenario::build_initial_data(p, &MeshSpec { nx, ny }).expect("prepared data")
}

/// Bilinear bump on a tensor lattice over `[1, 3] × [0, 2]`.
pub fn bump_field(n: usize) -> Field {
    let xs: Vec<f64> = (0..=n).map(|i| 1.0 + 2.0 * i as f64 / n as f64).collect();
    let ys: Vec<f64> = (0..=n).map(|j| 2.0 * j as f64 / n as f64).collect();
    Field::tensor(
        &xs,
        &ys,
        |[x, y]| {
            let d2 = (x - 2.0).powi(2) + (y - 1.0).powi(2);
            (1.0 - d2).max(0.0).powi(2)
        },
        |_| 0.0,
    )
}
