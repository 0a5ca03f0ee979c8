//! Human annotation study: assignment plans, records and the serving state.

pub mod plan;
pub mod record;
pub mod service;

pub use plan::{AnnotatorQueue, AssignmentPlan, DEFAULT_ANNOTATORS_PER_SAMPLE};
pub use record::{AnnotationRecord, Stage};
pub use service::{Assignment, AnnotationService, StatsReport, SubmitError};
