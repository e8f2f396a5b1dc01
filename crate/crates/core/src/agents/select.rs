use serde_json::{Map, Value};

use super::StrategyChoice;
use crate::llm::{assemble_selector_prompt, extract_json, ChatModel, PromptSettings};
use crate::patch::ActionSet;
use crate::toolbox::{Strategy, StrategyCatalog};

#[derive(Clone, Copy, Debug)]
pub struct SelectorInput<'a> {
    pub action_sets: &'a [ActionSet],
    pub relevant: &'a [String],
    pub hints: &'a Map<String, Value>,
    pub prior_available: bool,
    pub catalog: &'a StrategyCatalog,
}

fn hint<'a>(hints: &'a Map<String, Value>, key: &str) -> Option<&'a str> {
    hints.get(key).and_then(Value::as_str).map(str::trim)
}

/// The toolbox steps each strategy runs.
pub(crate) fn toolbox_plan(strategy: Strategy, catalog: &StrategyCatalog) -> Vec<String> {
    let preset = || format!("load_preset:{}", catalog.preset().unwrap_or("default"));
    match strategy {
        Strategy::Warm => vec!["direct_warm_start".into()],
        Strategy::WarmTuned => vec!["direct_warm_start".into(), preset()],
        Strategy::Tuned => vec![preset()],
        Strategy::Scratch => Vec::new(),
        Strategy::HeuristicWarm => vec!["exam_heuristic_warm_start".into()],
        Strategy::FixAndRelease => vec!["fix_and_release".into()],
    }
}

fn choice(strategy: Strategy, catalog: &StrategyCatalog, rationale: String) -> StrategyChoice {
    StrategyChoice {
        solve_strategy: strategy,
        toolbox_plan: toolbox_plan(strategy, catalog),
        rationale,
        confidence: None,
    }
}

/// Rule-based selector: local edits reuse the prior incumbent, structural
/// edits avoid it.
pub fn fallback_choice(input: &SelectorInput<'_>) -> StrategyChoice {
    let cat = input.catalog;
    let structural = hint(input.hints, "edit_scope") == Some("structural")
        || input
            .action_sets
            .iter()
            .flat_map(|s| &s.actions)
            .any(|p| p.op.is_structural());
    let reuse_high = hint(input.hints, "expected_reuse") == Some("high");
    if !structural && cat.is_available(Strategy::Warm) {
        if reuse_high && cat.is_available(Strategy::WarmTuned) {
            return choice(
                Strategy::WarmTuned,
                cat,
                "Local edit and expected reuse is high; warm start from the prior incumbent with the tuned preset.".into(),
            );
        }
        return choice(
            Strategy::Warm,
            cat,
            "Local edit with a reusable prior solution; expected reuse is high, so the previous incumbent is installed as a warm start.".into(),
        );
    }
    let why = if structural {
        "Structural edit; warm reuse looks fragile"
    } else {
        "No reusable prior solution"
    };
    if cat.is_available(Strategy::Tuned) {
        choice(Strategy::Tuned, cat, format!("{why}, so solve with the tuned preset."))
    } else {
        choice(Strategy::Scratch, cat, format!("{why}, so solve from scratch."))
    }
}

fn coerce(raw: &str, input: &SelectorInput<'_>) -> Result<StrategyChoice, String> {
    let doc = extract_json(raw).map_err(|e| e.to_string())?;
    let name = doc
        .get("solve_strategy")
        .and_then(Value::as_str)
        .ok_or("missing solve_strategy")?;
    let strategy: Strategy = name.parse()?;
    if !input.catalog.is_available(strategy) {
        return Err(format!("strategy `{strategy}` is not available"));
    }
    let rationale = doc
        .get("rationale")
        .and_then(Value::as_str)
        .unwrap_or_default()
        .to_string();
    let mut c = choice(strategy, input.catalog, rationale);
    c.confidence = doc
        .get("confidence")
        .and_then(Value::as_f64)
        .filter(|v| (0.0..=1.0).contains(v));
    Ok(c)
}

/// Always returns a catalog-legal choice. Without a selector model the rule
/// in [`fallback_choice`] decides; unusable selector output becomes scratch.
pub fn select_strategy(
    input: &SelectorInput<'_>,
    selector: Option<&dyn ChatModel>,
    settings: &PromptSettings,
) -> StrategyChoice {
    let Some(model) = selector else {
        return fallback_choice(input);
    };
    let request = assemble_selector_prompt(
        input.action_sets,
        input.catalog,
        input.hints,
        input.prior_available,
        settings,
    );
    match model.complete(&request) {
        Ok(text) => coerce(&text, input).unwrap_or_else(|why| {
            tracing::warn!(%why, "selector output coerced to scratch");
            choice(
                Strategy::Scratch,
                input.catalog,
                format!("Selector output was not usable ({why}); coerced to scratch."),
            )
        }),
        Err(e) => {
            tracing::warn!(error = %e, "selector call failed; using the rule-based choice");
            fallback_choice(input)
        }
    }
}
