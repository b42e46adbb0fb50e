use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("geometry: {0}")]
    Geometry(String),
    #[error("no admissible radius: {0}")]
    NoAdmissibleRadius(String),
    #[error("walk configuration: {0}")]
    WalkConfig(String),
    #[error("start point ({re}, {im}) is not inside the domain")]
    StartOutside { re: f64, im: f64 },
    #[error("evaluation point is within {distance:e} of pole {index}")]
    PoleProximity { index: usize, distance: f64 },
    #[error("tail bound {bound:e} exceeds tolerance {tol:e} with all {terms} terms")]
    TailNotAchievable { bound: f64, tol: f64, terms: usize },
    #[error("no witness for stage {stage} up to k = {k_max}; largest |d_k| rho'^k observed: {best:e}")]
    WitnessNotFound { stage: usize, k_max: u64, best: f64 },
    #[error("tail bound exceeds C_{order} beyond k = {k_max}; need k_max >= {required}")]
    SmoothnessTail { order: usize, k_max: u64, required: u64 },
    #[error("selection: {0}")]
    Selection(String),
    #[error("precondition violated: {0}")]
    Precondition(String),
    #[error("schedule violation: {0}")]
    ScheduleViolation(String),
    #[error("degenerate probe: {0}")]
    DegenerateProbe(String),
    #[error("config: {0}")]
    Config(String),
    #[error("bundle: {0}")]
    Bundle(String),
    #[error("stale manifest: {0}")]
    StaleManifest(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// True for errors that come from bad user input rather than a failed check.
    pub fn is_config(&self) -> bool {
        matches!(
            self,
            Error::InvalidInput(_)
                | Error::Geometry(_)
                | Error::WalkConfig(_)
                | Error::StartOutside { .. }
                | Error::Config(_)
                | Error::Json(_)
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
