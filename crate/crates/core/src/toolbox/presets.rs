use std::path::Path;

use super::ToolboxError;
use crate::solver::{NodeSelection, SolverConfig};

const BUILTIN: &[(&str, &str)] = &[(
    "toy-default",
    include_str!("../../../../presets/toy-default.prm"),
)];

pub fn builtin_preset_names() -> impl Iterator<Item = &'static str> {
    BUILTIN.iter().map(|(n, _)| *n)
}

/// Parses `key = value` lines; `#` starts a comment.
pub fn parse_preset(text: &str) -> Result<Vec<(String, String)>, ToolboxError> {
    let mut out = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let Some((k, v)) = line.split_once('=') else {
            return Err(ToolboxError::InvalidPreset {
                line: i + 1,
                message: format!("expected key = value, got `{line}`"),
            });
        };
        out.push((k.trim().to_string(), v.trim().to_string()));
    }
    Ok(out)
}

/// Merges preset entries over `base`.
pub fn apply_preset(base: &SolverConfig, text: &str) -> Result<SolverConfig, ToolboxError> {
    let mut cfg = base.clone();
    for (line, (k, v)) in parse_preset(text)?.into_iter().enumerate() {
        let bad = |m: String| ToolboxError::InvalidPreset { line: line + 1, message: m };
        let num = || v.parse::<f64>().map_err(|e| bad(format!("{k}: {e}")));
        match k.as_str() {
            "time_limit" => cfg.time_limit = num()?,
            "mip_gap_tolerance" | "mip_gap" => cfg.mip_gap_tolerance = num()?,
            "feasibility_tolerance" => cfg.feasibility_tolerance = num()?,
            "random_seed" => {
                cfg.random_seed = v.parse().map_err(|e| bad(format!("{k}: {e}")))?
            }
            "node_selection" => {
                cfg.node_selection = match v.as_str() {
                    "best_bound" => NodeSelection::BestBound,
                    "depth_first" => NodeSelection::DepthFirst,
                    other => return Err(bad(format!("unknown node_selection `{other}`"))),
                }
            }
            "branching" if v == "most_fractional" => {}
            "preset_name" => cfg.preset_name = Some(v.clone()),
            other => return Err(bad(format!("unknown key `{other}`"))),
        }
    }
    cfg.validate()
        .map_err(|e| ToolboxError::InvalidPreset { line: 0, message: e.to_string() })?;
    Ok(cfg)
}

/// Loads a shipped preset by name.
pub fn load_preset(name: &str) -> Result<SolverConfig, ToolboxError> {
    load_preset_from(name, &[])
}

/// Looks for `<name>.prm` in `dirs` first, then among the shipped presets.
pub fn load_preset_from(name: &str, dirs: &[&Path]) -> Result<SolverConfig, ToolboxError> {
    let text = dirs
        .iter()
        .find_map(|d| std::fs::read_to_string(d.join(format!("{name}.prm"))).ok())
        .or_else(|| {
            BUILTIN
                .iter()
                .find(|(n, _)| *n == name)
                .map(|(_, t)| t.to_string())
        })
        .ok_or_else(|| ToolboxError::UnknownPreset(name.to_string()))?;
    let mut cfg = apply_preset(&SolverConfig::default(), &text)?;
    cfg.preset_name = Some(name.to_string());
    Ok(cfg)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn toy_default() {
        let cfg = load_preset("toy-default").unwrap();
        assert_eq!(cfg.time_limit, 60.0);
        assert_eq!(cfg.mip_gap_tolerance, SolverConfig::default().mip_gap_tolerance);
        assert_eq!(cfg.preset_name.as_deref(), Some("toy-default"));
    }

    #[test]
    fn unknown() {
        assert_eq!(load_preset("nope"), Err(ToolboxError::UnknownPreset("nope".into())));
    }

    #[test]
    fn gap_override() {
        let cfg = apply_preset(&SolverConfig::default(), "mip_gap_tolerance = 1e-6\n").unwrap();
        assert_eq!(cfg.mip_gap_tolerance, 1e-6);
        assert!(apply_preset(&SolverConfig::default(), "bogus = 1").is_err());
    }
}
