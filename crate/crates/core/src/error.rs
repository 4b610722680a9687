use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid state: {0}")]
    InvalidState(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error(
        "truncation at n_max={n_max} leaves tail mass {tail_mass:e} (tolerance {tolerance:e})"
    )]
    TruncationInsufficient {
        n_max: usize,
        tail_mass: f64,
        tolerance: f64,
    },

    #[error("constituent state carries no photons; phases are not identifiable")]
    ZeroPhotonState,

    #[error("matrix is singular or ill-conditioned (condition estimate {condition:e})")]
    SingularMatrix { condition: f64 },

    #[error("denominator R - b^2 d = {value:e} is not positive")]
    DenominatorNonPositive { value: f64 },

    #[error("f = {f} outside (0, 1/n_bar] with 1/n_bar = {upper}")]
    FOutOfRange { f: f64, upper: f64 },

    #[error("photon number must be positive, got {0}")]
    NonPositivePhotonNumber(f64),

    #[error("could not bracket target {target} after {doublings} doublings")]
    BracketFailure { target: f64, doublings: usize },

    #[error("target n_bar {target} is below the smallest value {floor} reachable by {family}")]
    TargetUnreachable {
        family: String,
        target: f64,
        floor: f64,
    },

    #[error("map from parameter to n_bar is not increasing on [{lo}, {hi}]")]
    NonMonotone { lo: f64, hi: f64 },

    #[error("ordering violated: {0}")]
    OrderingViolation(String),

    #[error("vacuum overlap of 1 makes the weight ellipse degenerate")]
    DegenerateOverlap,

    #[error("b^2 = {b2} exceeds the ellipse boundary {boundary}")]
    ConstraintInfeasible { b2: f64, boundary: f64 },

    #[error("mode {mode} out of range for a {modes}-mode state")]
    ModeOutOfRange { mode: usize, modes: usize },

    #[error("post-selection kept probability {mass:e}")]
    EmptyPostSelection { mass: f64 },

    #[error("circuit config: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}
