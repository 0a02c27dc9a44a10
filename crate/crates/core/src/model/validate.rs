use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::potential::{fd_gradient, SitePotential};
use crate::tolerances::FD_REL_TOL;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AssumptionCheck {
    pub name: String,
    pub passed: bool,
    /// Sampling can only suggest, not prove, this property.
    pub heuristic: bool,
    /// Worst observed value of the checked quantity.
    pub worst: f64,
    pub detail: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub potential: String,
    pub samples: usize,
    pub seed: u64,
    pub checks: Vec<AssumptionCheck>,
}

impl ValidationReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn check(&self, name: &str) -> Option<&AssumptionCheck> {
        self.checks.iter().find(|c| c.name == name)
    }
}

/// Sample-based test of the structural hypotheses on `s`.
///
/// Checks, in order: `periodicity`, `coercivity` (heuristic), `off-diagonal-sign`,
/// `neighbour-strictness`, `hessian-bound`, `gradient-fd`.
pub fn validate_assumptions(s: &dyn SitePotential, samples: usize, seed: u64) -> ValidationReport {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let m = s.ball().len();
    let o = s.ball().origin();
    let unit = s.ball().unit_neighbors().to_vec();
    let c = s.second_derivative_bound();

    let mut per_worst = 0.0f64;
    let mut offdiag_worst = f64::NEG_INFINITY;
    let mut strict_worst = f64::NEG_INFINITY;
    let mut hess_worst = 0.0f64;
    let mut fd_worst = 0.0f64;
    let mut coercive_fail = 0usize;
    let mut coercive_trials = 0usize;
    let mut g = vec![0.0; m];
    let mut gf = vec![0.0; m];
    let mut h = vec![0.0; m * m];

    for _ in 0..samples {
        let u: Vec<f64> = (0..m).map(|_| rng.gen_range(-3.0..3.0)).collect();
        let su = s.eval(&u);
        for shift in [-2.0, -1.0, 1.0, 2.0] {
            let w: Vec<f64> = u.iter().map(|x| x + shift).collect();
            per_worst = per_worst.max((s.eval(&w) - su).abs() / (1.0 + su.abs()));
        }

        s.hess(&u, &mut h);
        for a in 0..m {
            for b in 0..m {
                hess_worst = hess_worst.max(h[a * m + b].abs() - c);
                if a != b {
                    offdiag_worst = offdiag_worst.max(h[a * m + b]);
                }
            }
        }
        for &j in &unit {
            strict_worst = strict_worst.max(h[o * m + j]);
        }

        s.grad(&u, &mut g);
        fd_gradient(s, &u, &mut gf);
        for b in 0..m {
            fd_worst = fd_worst.max((g[b] - gf[b]).abs() / g[b].abs().max(1.0));
        }

        // growth along each bond difference
        for &j in &unit {
            coercive_trials += 1;
            let mut w = u.clone();
            let mut vals = Vec::new();
            for k in 0..7 {
                let t = (1u32 << k) as f64 * 4.0;
                w[j] = u[o] + t;
                let plus = s.eval(&w);
                w[j] = u[o] - t;
                let minus = s.eval(&w);
                vals.push(plus.min(minus));
            }
            if !vals.windows(2).skip(3).all(|p| p[1] > p[0]) {
                coercive_fail += 1;
            }
        }
    }

    let mut checks = Vec::new();
    checks.push(AssumptionCheck {
        name: "periodicity".into(),
        passed: per_worst <= 1e-12,
        heuristic: false,
        worst: per_worst,
        detail: "max |s(u+m) - s(u)| / (1 + |s(u)|) over integer m".into(),
    });
    checks.push(AssumptionCheck {
        name: "coercivity".into(),
        passed: samples > 0 && coercive_fail == 0,
        heuristic: true,
        worst: coercive_fail as f64,
        detail: format!("{coercive_fail} of {coercive_trials} bond sweeps without eventual growth"),
    });
    checks.push(AssumptionCheck {
        name: "off-diagonal-sign".into(),
        passed: offdiag_worst <= 1e-12,
        heuristic: false,
        worst: offdiag_worst,
        detail: "max off-diagonal Hessian entry (must be <= 0)".into(),
    });
    checks.push(AssumptionCheck {
        name: "neighbour-strictness".into(),
        passed: strict_worst < -1e-12,
        heuristic: false,
        worst: strict_worst,
        detail: "max d2 s / du(0) du(j) over unit j (must be < 0)".into(),
    });
    checks.push(AssumptionCheck {
        name: "hessian-bound".into(),
        passed: hess_worst <= 1e-9 * c.max(1.0),
        heuristic: false,
        worst: hess_worst,
        detail: format!("max |Hessian entry| - C with C = {c}"),
    });
    checks.push(AssumptionCheck {
        name: "gradient-fd".into(),
        passed: fd_worst <= FD_REL_TOL,
        heuristic: false,
        worst: fd_worst,
        detail: "max relative error of analytic vs central-difference gradient".into(),
    });
    ValidationReport {
        potential: s.name().to_string(),
        samples,
        seed,
        checks,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::FkPotential;

    #[test]
    fn classical_passes_everything() {
        let r = validate_assumptions(&FkPotential::classical(2), 1000, 3);
        assert!(r.passed(), "{r:#?}");
        assert!(r.check("coercivity").unwrap().heuristic);
    }

    #[test]
    fn flipped_bond_fails_sign() {
        let s = FkPotential::classical(2).with_bond_coupling(0, -1.0 / 16.0);
        let r = validate_assumptions(&s, 200, 3);
        assert!(!r.check("off-diagonal-sign").unwrap().passed);
        assert!(!r.check("neighbour-strictness").unwrap().passed);
    }

    #[test]
    fn uncoupled_fails_strictness_only() {
        let s = FkPotential::new("onsite-only", 2, crate::model::OnSite::Sine, 1.0, 0.0);
        let r = validate_assumptions(&s, 200, 3);
        assert!(r.check("off-diagonal-sign").unwrap().passed);
        assert!(!r.check("neighbour-strictness").unwrap().passed);
    }
}
