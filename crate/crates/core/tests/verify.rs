use fk_saddle::mpp::MountainPassParams;
use fk_saddle::periodic::find_gap_pair;
use fk_saddle::verify::*;
use fk_saddle::*;

fn two_cell(s: &FkPotential) -> GapPair {
    let g = find_gap_pair(s, &Periods::ones(2), 4, 1, &FlowParams::default())
        .unwrap()
        .unwrap();
    g.extend_to(&Periods::new(vec![2, 1]).unwrap()).unwrap()
}

#[test]
fn suite_passes_on_the_classical_model() {
    let s = FkPotential::classical(2);
    let p = Periods::new(vec![2, 1]).unwrap();
    let reps = run_property_suite(&s, &p, 7, 100).unwrap();
    assert_eq!(reps.len(), PROPERTIES.len());
    for r in &reps {
        assert!(r.passed, "{r:?}");
        if r.name != "scaling" {
            assert_eq!(r.trials, 100);
        }
    }
    assert!(run_property_suite(&s, &p, 7, 0).unwrap().is_empty());
    let again = run_property_suite(&s, &p, 7, 10).unwrap();
    let twice = run_property_suite(&s, &p, 7, 10).unwrap();
    for (a, b) in again.iter().zip(&twice) {
        assert_eq!(a.worst.to_bits(), b.worst.to_bits());
    }
}

#[test]
fn flipped_coupling_breaks_comparison() {
    let s = FkPotential::classical(2).with_bond_coupling(0, -1.0 / 16.0);
    let p = Periods::new(vec![2, 1]).unwrap();
    let reps = run_property_suite(&s, &p, 7, 20).unwrap();
    let find = |n: &str| reps.iter().find(|r| r.name == n).unwrap();
    assert!(!find("comparison").passed);
    assert!(!find("submodularity").passed);
}

#[test]
fn three_routes_agree_on_the_two_cell_pass() {
    let s = FkPotential::classical(2);
    let g = two_cell(&s);
    let cc = cross_check_mountain_pass(&s, &g, &[501, 2001], 65, &MountainPassParams::default(), 1e-3).unwrap();
    assert!(cc.passed, "{cc:?}");
    assert!((cc.c + 2.0).abs() < 1e-12);
    assert!(cc.node_flow_residual <= 1e-8 && cc.heat_flow_residual <= 1e-8);
    assert!(cc.oracle[1].value <= cc.oracle[0].value + 1e-9);
}

#[test]
fn constant_offset_moves_every_value() {
    let base = FkPotential::classical(2);
    let lifted = FkPotential::classical(2).with_offset(0.3);
    let params = MountainPassParams::default();
    let a = cross_check_mountain_pass(&base, &two_cell(&base), &[201], 65, &params, 1e-3).unwrap();
    let b = cross_check_mountain_pass(&lifted, &two_cell(&lifted), &[201], 65, &params, 1e-3).unwrap();
    assert!((b.c - a.c - 0.6).abs() < 1e-9);
    assert!((b.node_flow - a.node_flow - 0.6).abs() < 1e-9);
    assert!((b.oracle[0].value - a.oracle[0].value - 0.6).abs() < 1e-9);
    assert!(((b.node_flow - b.c) - (a.node_flow - a.c)).abs() < 1e-9);
}

#[test]
fn reduced_landscape_matches_the_closed_form() {
    let s = FkPotential::classical(2);
    let g = two_cell(&s);
    let rows = landscape_grid(&s, &g, 3).unwrap();
    assert_eq!(rows.len(), 9);
    assert!((rows[0].2 + 2.0).abs() < 1e-12);
    assert!((rows[4].2 - 2.0).abs() < 1e-12);
    for (a, b, v) in landscape_grid(&s, &g, 17).unwrap() {
        assert!((v - example_landscape(a, b)).abs() < 1e-12);
    }
    let big = landscape_grid(&s, &g, 401).unwrap();
    let top = big.iter().max_by(|x, y| x.2.total_cmp(&y.2)).unwrap();
    assert!((top.2 - 2.0).abs() < 1e-12);
    assert!((top.0 - 0.5).abs() < 1e-12 && (top.1 - 0.5).abs() < 1e-12);
}

#[test]
fn oracle_rejects_coarse_grids() {
    assert!(OracleGrid2D::from_fn(MIN_RESOLUTION - 1, example_landscape).is_err());
}
