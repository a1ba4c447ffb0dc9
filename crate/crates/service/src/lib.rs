//! HTTP service and CLI plumbing around [`gridshed`].
//!
//! Requests are normalized into a config echo ([`request`]), run by
//! [`runner`] and stored as run records. Long computations are jobs
//! ([`jobs`]) polled over HTTP ([`api`]).

pub mod api;
pub mod jobs;
pub mod request;
pub mod runner;

pub use api::{router, serve, AppState, ServiceConfig};
pub use jobs::{JobHandle, JobRegistry, JobState, Progress};
pub use request::{Mode, OptimizeConfig, OptimizeRequest, ScreenConfig, ScreenRequest};
