use thiserror::Error;

/// Errors across the toolkit. Variants are grouped by how the CLI maps them
/// to exit codes: input/validation problems exit 2, numerical-convergence
/// problems exit 3.
#[derive(Debug, Error)]
pub enum Error {
    // ---- input / validation ----
    #[error("closed disks {0} and {1} are not disjoint")]
    DisjointnessViolation(usize, usize),
    #[error("disk {0} has non-positive radius")]
    DegenerateRadius(usize),
    #[error("letter {letter} out of range for alphabet of size {alphabet}")]
    LetterOutOfRange { letter: u8, alphabet: usize },
    #[error("word is not admissible: {0}")]
    InadmissibleWord(String),
    #[error("tau must be positive, got {0}")]
    TauNonPositive(f64),
    #[error("partition cap exceeded: |Z(tau)| = {size} > {cap}")]
    CapExceeded { size: usize, cap: usize },
    #[error("words {0:?} and {1:?} do not end in the same letter")]
    MismatchedTerminalLetter(Vec<u8>, Vec<u8>),
    #[error("exhaustive enumeration too large: (n!)^r = {0:.3e} tuples")]
    ExhaustiveTooLarge(f64),
    #[error("bound hypothesis violated: need n > t^2, got n = {n}, t = {t}")]
    HypothesisViolated { n: usize, t: usize },
    #[error("invalid group data: {0}")]
    InvalidGroup(String),
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("refined word set at tau = {0} contains a word of length < 2")]
    RefinedWordSetTooCoarse(f64),
    #[error("evaluation point is outside disk {0}")]
    OutsideDisk(usize),
    #[error("s = {0} is not in the convergence region Re s > delta + 0.1")]
    ConvergenceRegionViolated(f64),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),

    // ---- numerical convergence ----
    #[error("Mobius map evaluated at its pole (|cz+d| < 1e-14)")]
    PoleEvaluation,
    #[error("complex power base {0} is on the negative real axis branch cut")]
    BranchCutHit(num_complex::Complex64),
    #[error("partition search exceeded max depth {0}")]
    DepthExceeded(usize),
    #[error("truncation degree too small: trailing coefficient mass ratio {0:.3e}")]
    DegreeTooSmall(f64),
    #[error("quadrature did not converge: relative change {0:.3e} after doubling nodes")]
    QuadratureNotConverged(f64),
    #[error("matrix I - A is singular at s = {0}")]
    SingularMatrix(num_complex::Complex64),
    #[error("leading eigenvalue is not real positive (got {0})")]
    PerronViolation(num_complex::Complex64),
    #[error("pressure has no sign change on (0, 1); P(0) = {p0:.6}, P(1) = {p1:.6}")]
    NoSignChange { p0: f64, p1: f64 },
    #[error("suspected zero on the integration boundary (min/max |zeta| = {0:.3e})")]
    BoundaryZeroSuspected(f64),
    #[error("winding number {0} is not within 1e-3 of an integer")]
    NonIntegerWinding(f64),
    #[error("zero localization exceeded max subdivision depth")]
    MaxDepthExceeded,
    #[error("Newton iteration diverged near s = {0}")]
    NewtonDiverged(num_complex::Complex64),
    #[error("linear algebra backend: {0}")]
    Linalg(String),
}

impl Error {
    /// Exit-code class used by the CLI: 2 for validation, 3 for convergence.
    pub fn exit_code(&self) -> i32 {
        use Error::*;
        match self {
            DisjointnessViolation(..) | DegenerateRadius(..) | LetterOutOfRange { .. }
            | InadmissibleWord(..) | TauNonPositive(..) | CapExceeded { .. }
            | MismatchedTerminalLetter(..) | ExhaustiveTooLarge(..)
            | HypothesisViolated { .. } | InvalidGroup(..) | InvalidConfig(..)
            | RefinedWordSetTooCoarse(..) | OutsideDisk(..) | ConvergenceRegionViolated(..)
            | Io(..) | Json(..) => 2,
            _ => 3,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
