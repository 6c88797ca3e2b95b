use thiserror::Error;

use crate::field::SampledField;
use crate::net::Axis;

/// Crate-wide error type. One variant per failure mode surfaced by the
/// public API; validation variants carry enough context to point at the
/// offending input.
#[derive(Debug, Error)]
pub enum Error {
    #[error("{axis} knots are not strictly increasing at index {index}")]
    NonIncreasingKnots { axis: Axis, index: usize },

    #[error("net needs at least 2 intervals per axis, got {n} x {m}")]
    TooFewIntervals { n: usize, m: usize },

    #[error("point ({x}, {y}) lies outside the domain")]
    OutOfDomain { x: f64, y: f64 },

    #[error("field grid does not contain every net knot")]
    ResolutionMismatch,

    #[error("solver hit the iteration cap after {iterations} iterations, residual {residual:.3e}")]
    MaxIterExceeded {
        field: Box<SampledField>,
        iterations: usize,
        residual: f64,
    },

    #[error("orbit point budget of {budget} exceeded at depth {depth}")]
    PointBudgetExceeded { budget: usize, depth: usize },

    #[error("scale function sup-norm estimate {sup} is not strictly below 1")]
    ScaleNotContractive { sup: f64 },

    #[error("multiplier must equal 1 at the domain corners (worst defect {defect:.3e})")]
    CornerValueViolation { defect: f64 },

    #[error("multiplier is identically 1: the operator would be the identity")]
    IdentityOperator,

    #[error("composition map must fix the domain corners (worst defect {defect:.3e})")]
    CornerFixViolation { defect: f64 },

    #[error("composition map is the identity")]
    IdentityMap,

    #[error("Bernstein degrees must be at least 1, got ({m}, {n})")]
    DegreeTooSmall { m: usize, n: usize },

    #[error("inverse precondition violated: {detail}")]
    PreconditionViolated { detail: String },

    #[error("series did not converge within {max_terms} terms (last term {last:.3e})")]
    MaxTermsExceeded { max_terms: usize, last: f64 },

    #[error("lattice shape {got_rows} x {got_cols} does not match the net ({want_rows} x {want_cols})")]
    ShapeMismatch {
        got_rows: usize,
        got_cols: usize,
        want_rows: usize,
        want_cols: usize,
    },

    #[error("the four corner scaling sums disagree: {sums:?}")]
    UnbalancedScaling { sums: [f64; 4] },

    #[error("dimension formula hypothesis unmet: {reason}")]
    HypothesisUnmet { reason: String },

    #[error("L^p exponent must satisfy p >= 1, got {p}")]
    BadExponent { p: f64 },

    #[error("grid resolution {res} too coarse for box scale 2^{k_max}")]
    ResolutionTooCoarse { res: usize, k_max: usize },

    #[error("design matrix is rank deficient on this grid")]
    RankDeficient,

    #[error("polynomial stage could not reach error {target:.3e} within max degree {max_degree}")]
    DegreeBudgetExceeded { target: f64, max_degree: usize },

    #[error("construction missed the requested error bound: achieved {achieved:.3e}, wanted < {epsilon:.3e}")]
    EpsilonMiss { achieved: f64, epsilon: f64 },

    #[error("parse error: {0}")]
    Parse(String),

    #[error("invalid config at `{field}`: {message}")]
    Validation { field: String, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
