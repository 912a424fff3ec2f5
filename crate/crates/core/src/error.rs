use crate::model::{CenterId, ResourceId, Seconds, TaskId};

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("instance too large: {size} exceeds the limit of {limit}")]
    SizeGuard { size: usize, limit: usize },

    #[error("invalid parameter: {0}")]
    InvalidParam(String),

    #[error("announcement has no tasks")]
    EmptyAnnouncement,

    #[error("deadline {deadline}s is beyond the horizon {horizon}s")]
    DeadlineBeyondHorizon { deadline: Seconds, horizon: Seconds },

    #[error("unknown task {0}")]
    UnknownTask(TaskId),

    #[error("unknown resource {0}")]
    UnknownResource(ResourceId),

    #[error("unknown center {0}")]
    UnknownCenter(CenterId),

    #[error("event at {event}s precedes the clock at {clock}s")]
    EventInPast { event: Seconds, clock: Seconds },

    #[error("length mismatch: {0}")]
    LengthMismatch(String),

    #[error("invalid scenario: {0}")]
    InvalidScenario(String),

    #[error("unsupported schema version {found}, expected {expected}")]
    SchemaVersion { found: u32, expected: u32 },

    #[error("invariant violated: {0}")]
    Invariant(String),

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),

    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}
