//! The builtin kernel against an independent simplex implementation, going
//! through the LP text writer and parser on the way.

mod support;

use minilp::{ComparisonOp, OptimizationDirection, Problem};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use reopt_core::model::lp::{parse_lp, write_lp};
use reopt_core::model::{instantiate, IndexKey, Instance, Row, Sense, VarType, Variable};
use reopt_core::scenario::toy_state;
use reopt_core::solver::{solve_lp, SolveStatus};

fn external(inst: &Instance) -> Result<f64, minilp::Error> {
    let mut p = Problem::new(OptimizationDirection::Minimize);
    let vars: Vec<_> = inst
        .variables
        .iter()
        .map(|v| p.add_var(v.obj, (v.lower, v.upper)))
        .collect();
    for r in &inst.rows {
        let expr: Vec<_> = r.coefs.iter().map(|&(i, c)| (vars[i], c)).collect();
        let op = match r.sense {
            Sense::Le => ComparisonOp::Le,
            Sense::Ge => ComparisonOp::Ge,
            Sense::Eq => ComparisonOp::Eq,
        };
        p.add_constraint(expr.as_slice(), op, r.rhs);
    }
    p.solve().map(|s| s.objective())
}

fn random_instance(rng: &mut ChaCha8Rng) -> Instance {
    let n = rng.random_range(2..=12);
    let m = rng.random_range(1..=8);
    let variables = (0..n)
        .map(|i| {
            let lower = rng.random_range(0..=2) as f64;
            // Finite boxes only: minilp 0.2 reports an optimum on some
            // unbounded problems.
            let upper = lower + rng.random_range(1..=10) as f64;
            Variable {
                key: format!("y({i})"),
                family: "y".into(),
                index: IndexKey::new(vec![i.to_string()]),
                var_type: VarType::Continuous,
                lower,
                upper,
                obj: rng.random_range(-3.0..6.0f64).round(),
            }
        })
        .collect();
    let rows = (0..m)
        .map(|j| {
            let mut coefs = Vec::new();
            for i in 0..n {
                let c: f64 = rng.random_range(-4.0..7.0f64).round();
                if c != 0.0 && rng.random_bool(0.6) {
                    coefs.push((i, c));
                }
            }
            Row {
                key: format!("c({j})"),
                family: "c".into(),
                index: IndexKey::new(vec![j.to_string()]),
                coefs,
                sense: if rng.random_bool(0.6) { Sense::Le } else { Sense::Ge },
                rhs: rng.random_range(-5..=30) as f64,
            }
        })
        .collect();
    Instance::new(variables, rows)
}

#[test]
fn toy_export_round_trips_and_agrees() {
    let inst = instantiate(&toy_state()).unwrap();
    let text = write_lp(&inst);
    for section in ["Minimize", "Subject To", "Bounds", "End"] {
        assert!(text.contains(section), "missing {section}");
    }
    let back = parse_lp(&text).unwrap();
    assert!(back.approx_eq(&inst, 1e-12));
    assert!((external(&back).unwrap() - 162.0).abs() < 1e-6);
}

#[test]
fn random_lps_agree_with_minilp() {
    let mut rng = ChaCha8Rng::seed_from_u64(42);
    let cfg = support::oracle::config();
    let mut compared = 0;
    for case in 0..400 {
        let inst = random_instance(&mut rng);
        let parsed = parse_lp(&write_lp(&inst)).unwrap();
        let ours = solve_lp(&inst, &cfg).unwrap();
        match external(&parsed) {
            Ok(z) => {
                compared += 1;
                assert_eq!(ours.status, SolveStatus::Optimal, "case {case}");
                let obj = ours.objective.unwrap();
                assert!((obj - z).abs() <= 1e-7 * z.abs().max(1.0), "case {case}: {obj} vs {z}");
            }
            Err(minilp::Error::Infeasible) => assert_eq!(ours.status, SolveStatus::Infeasible, "case {case}"),
            Err(minilp::Error::Unbounded) => panic!("case {case}: a boxed LP cannot be unbounded"),
        }
    }
    assert!(compared > 100);
}

