mod support;

use reopt_core::llm::{extract_json, MockScript};
use reopt_core::patch::{planner_output_from_value, OpKind};
use serde_json::{json, Value};

fn schema() -> Value {
    serde_json::from_str(include_str!("../../../schemas/planner_output.schema.json")).unwrap()
}

fn validator() -> jsonschema::Validator {
    jsonschema::validator_for(&schema()).unwrap()
}

#[test]
fn op_list_matches_the_patch_language() {
    let s = schema();
    let ops: Vec<&str> = s["$defs"]["patch"]["properties"]["op"]["enum"]
        .as_array()
        .unwrap()
        .iter()
        .map(|v| v.as_str().unwrap())
        .collect();
    let ours: Vec<&str> = OpKind::ALL.iter().map(|o| o.name()).collect();
    assert_eq!(ops, ours);
}

#[test]
fn shipped_mock_responses_conform() {
    let v = validator();
    let script = MockScript::from_json(include_str!("../../../scenarios/toy.mock.json")).unwrap();
    let mut n = 0;
    for e in &script.entries {
        for r in &e.responses {
            let doc = extract_json(r).unwrap();
            let errs: Vec<String> = v.iter_errors(&doc).map(|e| e.to_string()).collect();
            assert!(errs.is_empty(), "{}: {errs:?}", e.pattern);
            planner_output_from_value(&doc).unwrap();
            n += 1;
        }
    }
    assert!(n >= 3);
}

#[test]
fn test_documents_conform_and_bad_ones_do_not() {
    let v = validator();
    let good = support::loop_cases::planner_doc(json!([
        {"op": "UPDATE_BOUND", "target": "flows", "scope": {"index": ["P2", "C2"]}, "update": {"bound_type": "upper", "value": 5.0}}
    ]));
    assert!(v.is_valid(&extract_json(&good).unwrap()));

    let bad = [
        json!({"candidate_action_sets": [{"actions": []}]}),
        json!({"edit_summary": "x", "candidate_action_sets": []}),
        json!({"edit_summary": "x", "candidate_action_sets": [{"actions": [{"op": "DELETE_ALL", "target": "x"}]}]}),
        json!({"edit_summary": "x", "candidate_action_sets": [{"actions": [{"op": "UPDATE_BOUND", "target": "flows", "scope": {"index": ["P1", "C1"]}, "update": {"value": 1.0}}]}]}),
        json!({"edit_summary": "x", "candidate_action_sets": [{"actions": [{"op": "UPDATE_PARAMETER", "target": "supply", "update": {"key": "P1"}}]}]}),
    ];
    for b in bad {
        assert!(!v.is_valid(&b), "{b}");
    }
}
