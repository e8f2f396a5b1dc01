//! Re-optimization techniques the strategy selector chooses from.

mod catalog;
mod exam;
mod presets;
mod warm;

use thiserror::Error;

pub use catalog::{list_strategies, CatalogEntry, Strategy, StrategyCatalog};
pub use exam::{
    exam_heuristic_warm_start, exam_params_from_state, exam_warm_start, ExamAssignment, ExamStage,
    ExamWarmStartParams,
};
pub use presets::{apply_preset, builtin_preset_names, load_preset, load_preset_from, parse_preset};
pub use warm::{direct_warm_start, fix_and_release, DirectWarmStart, FixAndRelease};

#[derive(Clone, Debug, PartialEq, Eq, Error)]
pub enum ToolboxError {
    #[error("no prior value for unaffected variable `{0}`")]
    MissingPriorValue(String),
    #[error("infeasible heuristic input: {0}")]
    InfeasibleInput(String),
    #[error("unknown preset `{0}`")]
    UnknownPreset(String),
    #[error("invalid preset line {line}: {message}")]
    InvalidPreset { line: usize, message: String },
}
