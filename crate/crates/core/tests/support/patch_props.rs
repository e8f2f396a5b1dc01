//! Randomized checks of patch semantics on generated transportation states.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use reopt_core::model::instantiate;
use reopt_core::patch::{
    apply_action_set, apply_patch, diff_states, normalize_action_set, ActionSet, OpKind, Patch,
};
use serde_json::{json, Value};

use super::gen::{pick, quarter, transport, Transport};

#[derive(Debug)]
pub struct PropReport {
    pub name: &'static str,
    pub cases: usize,
    pub violations: Vec<String>,
}

impl PropReport {
    fn new(name: &'static str) -> Self {
        PropReport {
            name,
            cases: 0,
            violations: Vec::new(),
        }
    }

    fn check(&mut self, ok: bool, what: impl FnOnce() -> String) {
        if !ok {
            self.violations.push(what());
        }
    }
}

fn p(op: OpKind, target: &str, scope: Value, update: Value) -> Patch {
    Patch::new(op, target, scope, update)
}

/// One patch, valid or not, drawn from a small mix of ops.
fn random_patch(rng: &mut ChaCha8Rng, t: &Transport) -> Patch {
    let plant = pick(rng, &t.plants).clone();
    let cust = pick(rng, &t.customers).clone();
    match rng.random_range(0..12) {
        0 => p(OpKind::UpdateParameter, "supply", Value::Null, json!({"key": plant, "value": quarter(rng, 0, 40)})),
        1 => p(OpKind::UpdateParameter, "demand", Value::Null, json!({"key": cust, "delta": quarter(rng, -5, 5)})),
        2 => p(OpKind::UpdateBound, "flows", json!({"index": [plant, cust]}), json!({"bound_type": "upper", "value": quarter(rng, 0, 20)})),
        3 => p(OpKind::UpdateConstraintRhs, "demand_constraints", json!({"row": [cust]}), json!({"delta": quarter(rng, -3, 3)})),
        4 => p(OpKind::UpdateObjectiveWeight, "transport_cost", Value::Null, json!({"value": quarter(rng, 0, 3)})),
        5 => p(OpKind::FixVariablesByPattern, &format!("^flows\\({plant},"), Value::Null, json!({"value": 0.0})),
        6 => p(OpKind::UpdateObjectiveCoeff, "transport_cost", json!({"var_family": "flows", "index": [plant, cust]}), json!({"value": quarter(rng, 0, 9)})),
        // Invalid from here on.
        7 => p(OpKind::UpdateParameter, "suply", Value::Null, json!({"key": plant, "value": 1.0})),
        8 => p(OpKind::UpdateParameter, "demand", Value::Null, json!({"key": "C99", "delta": 1.0})),
        9 => p(OpKind::UpdateBound, "flows", json!({"index": [plant, "C99"]}), json!({"bound_type": "upper", "value": 1.0})),
        10 => p(OpKind::RemoveConstraintFamily, "no_such_family", Value::Null, json!({})),
        _ => p(OpKind::FixVariablesByPattern, "^nothing_matches$", Value::Null, json!({"value": 0.0})),
    }
}

fn random_set(rng: &mut ChaCha8Rng, t: &Transport) -> ActionSet {
    let n = rng.random_range(1..=4);
    ActionSet::new((0..n).map(|_| random_patch(rng, t)).collect())
}

/// The set succeeds exactly when applying its patches one by one does, the
/// result matches that sequential application, and the version rises by one.
pub fn atomicity(seed: u64, cases: usize) -> PropReport {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut r = PropReport::new("atomicity");
    let (mut ok_sets, mut failed_sets) = (0, 0);
    while r.cases < cases {
        r.cases += 1;
        let case = r.cases;
        let t = transport(&mut rng);
        let set = random_set(&mut rng, &t);
        let before = t.state.clone();
        let mut seq = Ok(t.state.clone());
        for (i, patch) in set.actions.iter().enumerate() {
            seq = seq.and_then(|s| apply_patch(&s, patch).map_err(|_| i));
        }
        let seq = seq.and_then(|s| instantiate(&s).map(|_| s).map_err(|_| set.len() - 1));
        match (apply_action_set(&t.state, &set), seq) {
            (Ok((after, diff)), Ok(expected)) => {
                ok_sets += 1;
                r.check(after.version() == before.version() + 1, || format!("case {}: version", case));
                r.check(diff_states(&expected, &after).is_empty(), || format!("case {}: result differs", case));
                r.check(diff.from_version == before.version(), || format!("case {}: diff version", case));
            }
            (Err(e), Err(i)) => {
                failed_sets += 1;
                r.check(e.index == i, || format!("case {}: failing index {} vs {i}", case, e.index));
            }
            (a, b) => r.violations.push(format!("case {}: set {:?} vs sequential {:?}", case, a.map(|_| ()), b.map(|_| ()))),
        }
        r.check(t.state == before, || format!("case {}: input mutated", case));
    }
    if ok_sets == 0 || failed_sets == 0 {
        r.violations.push(format!("degenerate mix: {ok_sets} ok, {failed_sets} failed"));
    }
    r
}

fn param_target(rng: &mut ChaCha8Rng, t: &Transport) -> (&'static str, Value) {
    match rng.random_range(0..4) {
        0 => ("supply", json!(pick(rng, &t.plants))),
        1 => ("demand", json!(pick(rng, &t.customers))),
        2 => ("costs", json!([pick(rng, &t.plants), pick(rng, &t.customers)])),
        _ => ("budget", Value::Null),
    }
}

fn param_patch(name: &str, key: &Value, field: &str, v: f64) -> Patch {
    let mut update = serde_json::Map::new();
    if !key.is_null() {
        update.insert("key".into(), key.clone());
    }
    update.insert(field.into(), json!(v));
    Patch::new(OpKind::UpdateParameter, name, Value::Null, Value::Object(update))
}

/// Two deltas of d equal one delta of 2d.
pub fn delta_composition(seed: u64, cases: usize) -> PropReport {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut r = PropReport::new("delta composition");
    while r.cases < cases {
        r.cases += 1;
        let case = r.cases;
        let t = transport(&mut rng);
        let (name, key) = param_target(&mut rng, &t);
        let d = quarter(&mut rng, -20, 20);
        let twice = ActionSet::new(vec![param_patch(name, &key, "delta", d), param_patch(name, &key, "delta", d)]);
        let once = ActionSet::new(vec![param_patch(name, &key, "delta", 2.0 * d)]);
        match (apply_action_set(&t.state, &twice), apply_action_set(&t.state, &once)) {
            (Ok((a, _)), Ok((b, _))) => r.check(a == b, || format!("case {}: {name} {key} d={d}", case)),
            (a, b) => r.violations.push(format!("case {}: {:?} / {:?}", case, a.err(), b.err())),
        }
    }
    r
}

/// Value v then value w equals value w alone.
pub fn last_writer_wins(seed: u64, cases: usize) -> PropReport {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut r = PropReport::new("last-writer-wins");
    while r.cases < cases {
        r.cases += 1;
        let case = r.cases;
        let t = transport(&mut rng);
        let (name, key) = param_target(&mut rng, &t);
        let v = quarter(&mut rng, -50, 50);
        let w = quarter(&mut rng, -50, 50);
        let both = ActionSet::new(vec![param_patch(name, &key, "value", v), param_patch(name, &key, "value", w)]);
        let last = ActionSet::new(vec![param_patch(name, &key, "value", w)]);
        match (apply_action_set(&t.state, &both), apply_action_set(&t.state, &last)) {
            (Ok((a, _)), Ok((b, _))) => r.check(a == b, || format!("case {}: {name} {key}", case)),
            (a, b) => r.violations.push(format!("case {}: {:?} / {:?}", case, a.err(), b.err())),
        }
    }
    r
}

/// Patches written the loose way a planner might: labels, list or string
/// indices, rhs edits on parameter-backed rows.
fn loose_patch(rng: &mut ChaCha8Rng, t: &Transport) -> Patch {
    let pi = rng.random_range(0..t.plants.len());
    let ci = rng.random_range(0..t.customers.len());
    let plant_label = match rng.random_range(0..3) {
        0 => t.plants[pi].clone(),
        1 => format!("Plant {}", pi + 1),
        _ => format!("  plant   {} ", pi + 1),
    };
    let cust_label = match rng.random_range(0..2) {
        0 => t.customers[ci].clone(),
        _ => format!("Customer {}", ci + 1),
    };
    match rng.random_range(0..6) {
        0 => p(OpKind::UpdateParameter, "supply", Value::Null, json!({"key": plant_label, "value": quarter(rng, 0, 30)})),
        1 => p(OpKind::UpdateBound, "flows", json!({"index": [plant_label, cust_label]}), json!({"bound_type": "upper", "value": 4.0})),
        2 => p(OpKind::UpdateBound, "flows", json!({"index": format!("({}, {})", t.plants[pi], t.customers[ci])}), json!({"upper": 3.0})),
        3 => p(OpKind::UpdateConstraintRhs, "supply_constraints", json!({"row": [plant_label]}), json!({"value": quarter(rng, 0, 30)})),
        4 => p(OpKind::UpdateConstraintRhs, "demand_constraints", json!({"row": cust_label}), json!({"delta": quarter(rng, -4, 4)})),
        _ => p(OpKind::UpdateObjectiveCoeff, "transport_cost", json!({"var_family": "flows", "index": [plant_label, cust_label]}), json!({"delta": 1.0})),
    }
}

/// normalize(normalize(A)) == normalize(A).
pub fn normalization_idempotence(seed: u64, cases: usize) -> PropReport {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut r = PropReport::new("normalization idempotence");
    while r.cases < cases {
        r.cases += 1;
        let case = r.cases;
        let t = transport(&mut rng);
        let n = rng.random_range(1..=4);
        let set = ActionSet::new((0..n).map(|_| loose_patch(&mut rng, &t)).collect());
        match normalize_action_set(&set, &t.state) {
            Ok(once) => {
                let twice = normalize_action_set(&once, &t.state);
                r.check(twice.as_ref() == Ok(&once), || format!("case {}: {:?}", case, set));
                let again = normalize_action_set(&set, &t.state);
                r.check(again.as_ref() == Ok(&once), || format!("case {}: not deterministic", case));
            }
            Err(e) => r.violations.push(format!("case {}: {e}", case)),
        }
    }
    r
}

/// A rewritten rhs edit and the original build the same instance; the
/// rewrite happens exactly when the parameter entry has no other reader.
pub fn rewrite_equivalence(seed: u64, cases: usize) -> PropReport {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut r = PropReport::new("rhs rewrite equivalence");
    let mut rewritten = 0;
    while r.cases < cases {
        r.cases += 1;
        let case = r.cases;
        let t = transport(&mut rng);
        let (family, row, shared) = if rng.random_bool(0.5) {
            let pl = pick(&mut rng, &t.plants).clone();
            let shared = t.shared_supply && pl == t.plants[0];
            ("supply_constraints", pl, shared)
        } else {
            ("demand_constraints", pick(&mut rng, &t.customers).clone(), false)
        };
        let update = if rng.random_bool(0.5) {
            json!({"value": quarter(&mut rng, 0, 40)})
        } else {
            json!({"delta": quarter(&mut rng, -5, 5)})
        };
        let original = ActionSet::new(vec![p(OpKind::UpdateConstraintRhs, family, json!({"row": [row]}), update)]);
        let norm = match normalize_action_set(&original, &t.state) {
            Ok(n) => n,
            Err(e) => {
                r.violations.push(format!("case {}: {e}", case));
                continue;
            }
        };
        let op = norm.actions[0].op;
        let expect_op = if shared { OpKind::UpdateConstraintRhs } else { OpKind::UpdateParameter };
        r.check(op == expect_op, || format!("case {}: {family}[{row}] became {op}", case));
        if op == OpKind::UpdateParameter {
            rewritten += 1;
        }
        let a = apply_action_set(&t.state, &original).map(|(s, _)| instantiate(&s));
        let b = apply_action_set(&t.state, &norm).map(|(s, _)| instantiate(&s));
        match (a, b) {
            (Ok(Ok(a)), Ok(Ok(b))) => r.check(a == b, || format!("case {}: instances differ", case)),
            _ => r.violations.push(format!("case {}: application failed", case)),
        }
    }
    if rewritten == 0 {
        r.violations.push("no case was rewritten".into());
    }
    r
}

fn random_family(rng: &mut ChaCha8Rng, t: &Transport, name: &str) -> Value {
    if rng.random_bool(0.5) {
        let c = pick(rng, &t.customers).clone();
        let mut terms = Vec::new();
        for pl in &t.plants {
            let coef = rng.random_range(1..=3) as f64;
            if terms.is_empty() || rng.random_bool(0.7) {
                terms.push(json!({"var_family": "flows", "index": [pl, c], "coef": coef}));
            }
        }
        json!({
            "name": name,
            "index_set": [[c]],
            "lhs_spec": {"kind": "explicit_terms", "rows": [[[c], terms]]},
            "sense": pick(rng, &["<=", ">=", "="]),
            "rhs_spec": {"default": rng.random_range(0..=20) as f64, "overrides": []}
        })
    } else {
        json!({
            "name": name,
            "index_set": t.plants.iter().map(|pl| vec![pl]).collect::<Vec<_>>(),
            "lhs_spec": {"kind": "indexed_sum", "var_family": "flows", "match": [[0, 0]], "coef": rng.random_range(1..=4) as f64},
            "sense": "<=",
            "rhs_spec": {"default": {"param": "supply", "key": [{"row": 0}]}, "overrides": []}
        })
    }
}

/// Adding a family and removing it again leaves the instance unchanged.
pub fn add_remove_inverse(seed: u64, cases: usize) -> PropReport {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut r = PropReport::new("add/remove inverse");
    while r.cases < cases {
        r.cases += 1;
        let case = r.cases;
        let t = transport(&mut rng);
        let name = format!("extra_{}", rng.random_range(0..1000));
        let fam = random_family(&mut rng, &t, &name);
        let add = ActionSet::new(vec![p(OpKind::AddConstraintFamily, &name, Value::Null, json!({"family": fam}))]);
        let remove = ActionSet::new(vec![p(OpKind::RemoveConstraintFamily, &name, Value::Null, json!({}))]);
        let base = instantiate(&t.state).expect("generated state instantiates");
        let added = match apply_action_set(&t.state, &add) {
            Ok((s, _)) => s,
            Err(e) => {
                r.violations.push(format!("case {}: add failed: {e}", case));
                continue;
            }
        };
        r.check(instantiate(&added).map(|i| i.num_rows() > base.num_rows()).unwrap_or(false), || {
            format!("case {}: add produced no rows", case)
        });
        match apply_action_set(&added, &remove) {
            Ok((s, _)) => r.check(instantiate(&s).ok() == Some(base), || format!("case {}: instance differs", case)),
            Err(e) => r.violations.push(format!("case {}: remove failed: {e}", case)),
        }
        let both = ActionSet::new(vec![add.actions[0].clone(), remove.actions[0].clone()]);
        match apply_action_set(&t.state, &both) {
            Ok((s, _)) => r.check(diff_states(&t.state, &s).is_empty(), || format!("case {}: one-set round trip differs", case)),
            Err(e) => r.violations.push(format!("case {}: one-set round trip failed: {e}", case)),
        }
    }
    r
}

pub fn all(seed: u64, cases: usize) -> Vec<PropReport> {
    vec![
        atomicity(seed, cases),
        delta_composition(seed + 1, cases),
        last_writer_wins(seed + 2, cases),
        normalization_idempotence(seed + 3, cases),
        rewrite_equivalence(seed + 4, cases),
        add_remove_inverse(seed + 5, cases),
    ]
}
