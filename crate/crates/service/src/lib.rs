//! Session service for pairwise moral-judgment studies: questionnaires are
//! served over HTTP, answers are kept in an append-only log per study, and
//! weights are estimated and aggregated on demand.

pub mod config;
pub mod content;
pub mod error;
pub mod http;
pub mod results;
pub mod session;
pub mod store;
pub mod study;

pub use config::{DatasetSource, ServiceConfig, StudyConfig};
pub use error::ServiceError;
pub use study::{Service, Study};
