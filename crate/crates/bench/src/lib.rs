//! Shared fixtures for the benchmarks.

use fk_saddle::periodic::find_gap_pair;
use fk_saddle::{FkPotential, FlowParams, GapPair, Periods, TorusField};

/// Classical potential in two dimensions and its unit-torus gap pair.
pub fn classical_gap() -> (FkPotential, GapPair) {
    let s = FkPotential::classical(2);
    let g = find_gap_pair(&s, &Periods::ones(2), 4, 1, &FlowParams::default())
        .expect("gap search runs")
        .expect("classical model has a gap pair");
    (s, g)
}

/// A smooth non-constant field on the torus `per`.
pub fn wavy_field(per: &[usize]) -> TorusField {
    let p = Periods::new(per.to_vec()).expect("positive periods");
    TorusField::from_fn(p, |i| 0.1 * (i[0] as f64).sin() + 0.05 * (i[1] as f64).cos())
}
