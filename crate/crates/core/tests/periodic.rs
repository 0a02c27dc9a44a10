use fk_saddle::linalg::sup_norm;
use fk_saddle::periodic::*;
use fk_saddle::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn p(v: &[usize]) -> Periods {
    Periods::new(v.to_vec()).unwrap()
}

fn classical_gap() -> GapPair {
    let s = FkPotential::classical(2);
    find_gap_pair(&s, &Periods::ones(2), 4, 1, &FlowParams::default())
        .unwrap()
        .unwrap()
}

#[test]
fn single_cell_minimum() {
    let s = FkPotential::classical(2);
    let seeds = constant_seeds(&Periods::ones(2), &[0.0, 0.3, 0.6]);
    let m = minimize_periodic(&s, &Periods::ones(2), &seeds, &FlowParams::default()).unwrap();
    assert!((m.c0p + 1.0).abs() < 1e-8);
    let frac = m.best.values[0] + 0.25;
    assert!((frac - frac.round()).abs() < 1e-8);
    for l in &m.limits {
        assert!(l.residual <= 1e-10);
    }
}

#[test]
fn minimum_scales_with_cells() {
    let s = FkPotential::classical(2);
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for per in [[1, 1], [2, 1], [3, 1], [2, 2], [3, 2]] {
        let q = p(&per);
        let mut seeds = constant_seeds(&q, &[0.0, 0.3, 0.6]);
        seeds.push(TorusField::from_fn(q.clone(), |_| rng.gen::<f64>()));
        let m = minimize_periodic(&s, &q, &seeds, &FlowParams::default()).unwrap();
        let cells = q.cells() as f64;
        assert!((m.c0p + cells).abs() <= 1e-8 * cells, "{per:?}: {}", m.c0p);
        assert!(m.best.values.iter().all(|v| (v - m.best.values[0]).abs() < 1e-8));
        assert!(is_birkhoff(&m.best, 3));
    }
}

#[test]
fn gap_pairs_per_model() {
    let g = classical_gap();
    assert!((g.v0.values[0] + 0.25).abs() < 1e-8);
    assert!((g.w0.values[0] - 0.75).abs() < 1e-8);
    assert_eq!(g.evidence.foreign_minimizers, 0);

    let two = find_gap_pair(
        &FkPotential::two_well(2),
        &Periods::ones(2),
        4,
        1,
        &FlowParams::default(),
    )
    .unwrap()
    .unwrap();
    assert!((two.gap().values[0] - 0.5).abs() < 1e-8);

    let free = FkPotential::free_chain(2);
    assert!(find_gap_pair(&free, &Periods::ones(2), 4, 1, &FlowParams::default())
        .unwrap()
        .is_none());
}

#[test]
fn energies_relative_to_the_lower_minimizer() {
    let s = FkPotential::classical(2);
    let g = classical_gap();
    let at = |c: f64| relative_energy(&s, &TorusField::constant(Periods::ones(2), c), &g.v0).unwrap();
    assert!((at(0.0) + 1.0).abs() < 1e-12);
    assert!((at(1.0) + 1.0).abs() < 1e-12);
    assert!((at(0.5) - 1.0).abs() < 1e-12);
    let g21 = g.extend_to(&p(&[2, 1])).unwrap();
    let e = torus_energy(&s, &g21.v0).unwrap();
    assert!((e + 2.0).abs() < 1e-12);
    let grad = gradient(&s, &TorusField::constant(Periods::ones(2), 0.25), &g.v0).unwrap();
    assert!((grad.values[0] - 2.0 * std::f64::consts::PI).abs() < 1e-12);
}

#[test]
fn gap_endpoints_are_fixed_and_flows_descend() {
    let s = FkPotential::classical(2);
    let g = classical_gap().extend_to(&p(&[3, 2])).unwrap();
    let upper = g.gap();
    for u0 in [TorusField::constant(g.periods().clone(), 0.0), upper.clone()] {
        let (u, out) = flow(&s, &u0, &g.v0, &FlowParams::horizon(2.0)).unwrap();
        assert!(u.sup_distance(&u0).unwrap() < 1e-13);
        assert!(out.trace.windows(2).all(|w| w[1].energy <= w[0].energy + 1e-10));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let u0 = TorusField::from_fn(g.periods().clone(), |_| rng.gen::<f64>());
    let e0 = relative_energy(&s, &u0, &g.v0).unwrap();
    let (u, out) = flow(&s, &u0, &g.v0, &FlowParams::default()).unwrap();
    assert!(out.converged);
    assert!(out.residual <= 1e-10);
    assert!(out.energy <= e0);
    assert!(u.values.iter().all(|&v| (-1e-10..=1.0 + 1e-10).contains(&v)));
    assert!(sup_residual(&s, &u, &g.v0).unwrap() <= 1e-10);
    assert!(sup_norm(&gradient(&s, &u, &g.v0).unwrap().values) <= 1e-10);
}

#[test]
fn box_maxima() {
    let s = FkPotential::classical(2);
    let g = classical_gap();
    let m = box_maximize(&s, &g, &[], &FlowParams::default()).unwrap();
    assert!((m.value - 1.0).abs() < 1e-8);
    assert!((m.field.values[0] - 0.5).abs() < 1e-6);
    assert!(m.interior_residual <= 1e-8);

    let g21 = g.extend_to(&p(&[2, 1])).unwrap();
    let m = box_maximize(&s, &g21, &[], &FlowParams::default()).unwrap();
    assert!((m.value - 2.0).abs() < 1e-8);
    for v in &m.field.values {
        assert!((v - 0.5).abs() < 1e-6);
    }
}

#[test]
fn bumped_constant_is_not_birkhoff() {
    let q = p(&[4, 1]);
    let u = TorusField::constant(q.clone(), 0.3);
    assert!(is_birkhoff(&u, 3));
    let mut vals = u.values.clone();
    vals[1] = 0.8;
    assert!(!is_birkhoff(&TorusField::from_values(q, vals).unwrap(), 3));
}
