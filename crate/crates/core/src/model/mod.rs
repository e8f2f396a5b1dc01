//! Structured model state, instantiation and rendering.

mod instance;
mod key;
pub mod lp;
mod render;
pub mod semantic;
pub(crate) mod serde_util;
mod state;
mod types;

pub use instance::{eval_coef, instantiate, instantiate_with, Instance, Row, Variable};
pub use key::{is_valid_component, is_valid_name, parse_flat, IndexKey};
pub use render::{render_for_planner, render_for_planner_with, RenderOptions};
pub use semantic::SemanticRegistry;
pub use state::{load_state, new_state, save_state, ModelError, ModelState, NameKind, ParseError};
pub use types::*;

pub(crate) use key::number_to_component;
pub(crate) use state::{
    validate_constraint_family, validate_parameter_value,
    validate_variable_family,
};
