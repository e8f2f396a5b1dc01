//! Random transportation-style states built as JSON documents.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use reopt_core::model::{load_state, ModelState};
use serde_json::{json, Value};

#[derive(Clone, Debug)]
pub struct Transport {
    pub state: ModelState,
    pub plants: Vec<String>,
    pub customers: Vec<String>,
    /// True when a second family also reads the supply parameter.
    pub shared_supply: bool,
}

fn keyed(pairs: Vec<(Vec<String>, f64)>) -> Value {
    json!({ "keyed": pairs.into_iter().map(|(k, v)| json!([k, v])).collect::<Vec<_>>() })
}

pub fn transport(rng: &mut ChaCha8Rng) -> Transport {
    let np = rng.random_range(1..=3);
    let nc = rng.random_range(1..=4);
    let plants: Vec<String> = (1..=np).map(|i| format!("P{i}")).collect();
    let customers: Vec<String> = (1..=nc).map(|i| format!("C{i}")).collect();
    let pairs: Vec<Vec<String>> = plants
        .iter()
        .flat_map(|p| customers.iter().map(move |c| vec![p.clone(), c.clone()]))
        .collect();
    let supply = keyed(plants.iter().map(|p| (vec![p.clone()], rng.random_range(5..=40) as f64)).collect());
    let demand = keyed(customers.iter().map(|c| (vec![c.clone()], rng.random_range(1..=15) as f64)).collect());
    let costs = keyed(pairs.iter().map(|k| (k.clone(), rng.random_range(1..=9) as f64)).collect());
    let shared_supply = rng.random_bool(0.3);

    let mut constraints = vec![
        json!({
            "name": "supply_constraints",
            "index_set": plants.iter().map(|p| vec![p]).collect::<Vec<_>>(),
            "lhs_spec": {"kind": "indexed_sum", "var_family": "flows", "match": [[0, 0]], "coef": 1.0},
            "sense": "<=",
            "rhs_spec": {"default": {"param": "supply", "key": [{"row": 0}]}, "overrides": []}
        }),
        json!({
            "name": "demand_constraints",
            "index_set": customers.iter().map(|c| vec![c]).collect::<Vec<_>>(),
            "lhs_spec": {"kind": "indexed_sum", "var_family": "flows", "match": [[1, 0]], "coef": 1.0},
            "sense": ">=",
            "rhs_spec": {"default": {"param": "demand", "key": [{"row": 0}]}, "overrides": []}
        }),
    ];
    if shared_supply {
        let p = &plants[0];
        constraints.push(json!({
            "name": "first_plant_cap",
            "index_set": [[p]],
            "lhs_spec": {"kind": "explicit_terms", "rows": [[[p], [
                {"var_family": "flows", "index": [p, customers[0]], "coef": 1.0}
            ]]]},
            "sense": "<=",
            "rhs_spec": {"default": {"param": "supply", "key": [{"row": 0}]}, "overrides": []}
        }));
    }
    let mut registry = serde_json::Map::new();
    for (i, p) in plants.iter().enumerate() {
        registry.insert(format!("Plant {}", i + 1), json!(p));
    }
    for (i, c) in customers.iter().enumerate() {
        registry.insert(format!("Customer {}", i + 1), json!(c));
    }
    let doc = json!({
        "parameters": [
            {"name": "supply", "value": supply},
            {"name": "demand", "value": demand},
            {"name": "costs", "value": costs},
            {"name": "budget", "value": {"scalar": rng.random_range(50..=500) as f64}}
        ],
        "variable_families": [
            {"name": "flows", "index_set": pairs, "var_type": "continuous", "bound_overrides": []}
        ],
        "constraint_families": constraints,
        "objective_components": [{
            "name": "transport_cost",
            "weight": 1.0,
            "terms": pairs.iter().map(|k| json!({
                "var_family": "flows",
                "index": k,
                "coef": {"param": "costs", "key": [{"var": 0}, {"var": 1}]}
            })).collect::<Vec<_>>()
        }],
        "entity_registry": registry,
        "version": rng.random_range(0..5)
    });
    let state = load_state(&doc.to_string()).expect("generated state loads");
    Transport {
        state,
        plants,
        customers,
        shared_supply,
    }
}

/// A number on a 1/4 grid, so sums of such numbers are exact.
pub fn quarter(rng: &mut ChaCha8Rng, lo: i32, hi: i32) -> f64 {
    f64::from(rng.random_range(lo * 4..=hi * 4)) / 4.0
}

pub fn pick<'a, T>(rng: &mut ChaCha8Rng, items: &'a [T]) -> &'a T {
    &items[rng.random_range(0..items.len())]
}
