//! Session service over the re-optimization core: an event-sourced store,
//! the HTTP API and the catalog replay harness.

pub mod harness;
pub mod http;
pub mod planner;
pub mod report;
pub mod session;
pub mod store;

pub use harness::{replay, ReplayOptions, Variant};
pub use http::{router, ApiError, Service, ServiceConfig};
pub use planner::{Agents, PlannerKind};
pub use report::{compute_report, gap_pct, CaseResult, ReplayReport};
pub use session::{PromptOptions, Session, SessionEvent};
pub use store::{restore_session, RestoreReport, Store, StoreError};
