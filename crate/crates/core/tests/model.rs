use fk_saddle::model::{el_residual, fd_gradient, local_energy, shift, validate_assumptions};
use fk_saddle::*;
use proptest::prelude::*;

fn ball_values(m: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-3.0f64..3.0, m)
}

#[test]
fn shift_examples() {
    let p = Periods::new(vec![2, 1]).unwrap();
    let u = TorusField::from_values(p, vec![0.1, -0.4]).unwrap();
    assert_eq!(shift(&u, 0, 0).unwrap(), u);
    assert_eq!(shift(&u, 0, 2).unwrap(), u);
    assert_ne!(shift(&u, 0, 1).unwrap(), u);
    let min = TorusField::constant(Periods::ones(2), -0.25);
    assert_eq!(shift(&min, 0, 5).unwrap(), min);
}

#[test]
fn local_energy_on_constants() {
    let s = FkPotential::classical(2);
    let p = Periods::ones(2);
    for (c, want) in [(-0.25, -1.0), (0.25, 1.0)] {
        let u = TorusField::constant(p.clone(), c);
        for j in [[0, 0], [4, -7]] {
            assert!((local_energy(&s, &u, &j).unwrap() - want).abs() < 1e-14);
        }
    }
}

#[test]
fn validation_examples() {
    assert!(validate_assumptions(&FkPotential::classical(2), 200, 1).passed());
    let flipped = FkPotential::classical(2).with_bond_coupling(0, -1.0 / 16.0);
    let r = validate_assumptions(&flipped, 200, 1);
    assert!(!r.check("off-diagonal-sign").unwrap().passed);
    let uncoupled = FkPotential::classical(2)
        .with_bond_coupling(0, 0.0)
        .with_bond_coupling(1, 0.0);
    assert!(
        !validate_assumptions(&uncoupled, 200, 1)
            .check("neighbour-strictness")
            .unwrap()
            .passed
    );
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn periodic_in_value(u in ball_values(5), k in -3i32..4) {
        let s = FkPotential::classical(2);
        let v: Vec<f64> = u.iter().map(|x| x + k as f64).collect();
        let (a, b) = (s.eval(&u), s.eval(&v));
        prop_assert!((a - b).abs() <= 1e-12 * (1.0 + a.abs()) * (1.0 + k.abs() as f64));
    }

    #[test]
    fn gradient_matches_fd(u in ball_values(5)) {
        for s in [FkPotential::classical(2), FkPotential::two_well(2), FkPotential::pinned(2, 2.0)] {
            let mut g = vec![0.0; 5];
            let mut gf = vec![0.0; 5];
            s.grad(&u, &mut g);
            fd_gradient(&s, &u, &mut gf);
            for (a, b) in g.iter().zip(&gf) {
                prop_assert!((a - b).abs() <= 1e-6 * (1.0 + a.abs()));
            }
        }
    }

    #[test]
    fn submodular_on_torus(u in prop::collection::vec(-1.0f64..1.0, 6), v in prop::collection::vec(-1.0f64..1.0, 6)) {
        let s = FkPotential::classical(2);
        let p = Periods::new(vec![3, 2]).unwrap();
        let e = |x: &[f64]| {
            let f = TorusField::from_values(p.clone(), x.to_vec()).unwrap();
            periodic::torus_energy(&s, &f).unwrap()
        };
        let hi: Vec<f64> = u.iter().zip(&v).map(|(a, b)| a.max(*b)).collect();
        let lo: Vec<f64> = u.iter().zip(&v).map(|(a, b)| a.min(*b)).collect();
        prop_assert!(e(&hi) + e(&lo) <= e(&u) + e(&v) + 1e-10);
    }

    #[test]
    fn residual_is_translation_equivariant(vals in prop::collection::vec(-1.0f64..1.0, 6), m in -4i64..5, axis in 0usize..2) {
        let s = FkPotential::classical(2);
        let u = TorusField::from_values(Periods::new(vec![3, 2]).unwrap(), vals).unwrap();
        let w = shift(&u, axis, m).unwrap();
        for i in [[0i64, 0], [1, 1], [2, 0]] {
            let mut j = i.to_vec();
            j[axis] += m;
            let a = el_residual(&s, &w, &i).unwrap();
            let b = el_residual(&s, &u, &j).unwrap();
            prop_assert!((a - b).abs() <= 1e-12);
        }
    }
}
