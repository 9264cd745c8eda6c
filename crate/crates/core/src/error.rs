use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("aliasing guard violated: {0}")]
    Aliasing(String),

    #[error("malformed component chain: {0}")]
    MalformedChain(String),

    #[error("stage `{0}` not found in report")]
    MissingStage(String),

    #[error("drive exceeds +/-Vpi: |v| = {v:.4} V, vpi = {vpi:.4} V")]
    OverModulation { v: f64, vpi: f64 },

    #[error("modulation penalty {target_db} dB unreachable with drive gain in (0, 10]")]
    UnreachablePenalty { target_db: f64 },

    #[error("infeasible timing for Dt = {dt_ps} ps, TW = {tw_ps} ps (nearest feasible Dt: {nearest_dt_ps:?} ps)")]
    InfeasibleTiming {
        dt_ps: f64,
        tw_ps: f64,
        nearest_dt_ps: Option<f64>,
    },

    #[error("step control too coarse: nonlinear phase {phase:.3e} rad per step exceeds 0.1 rad")]
    StepTooCoarse { phase: f64 },

    #[error("non-transparent link: EDFA gain {gain_db} dB vs span loss {loss_db} dB")]
    NonTransparent { gain_db: f64, loss_db: f64 },

    #[error("field does not decay at the window edges (|q| = {edge:.3e})")]
    InsufficientDecay { edge: f64 },

    #[error("b-coefficient ratio mismatch {mismatch:.3e}: not an eigenvalue")]
    RatioMismatch { mismatch: f64 },

    #[error("eigenvalue search did not converge after {iterations} iterations")]
    NoConvergence { iterations: usize },

    #[error("eigenvalue left the upper half-plane (zeta = {re:.4} + {im:.4}i)")]
    EscapedHalfPlane { re: f64, im: f64 },

    #[error("length mismatch: {0} vs {1}")]
    LengthMismatch(usize, usize),
}

pub type Result<T> = std::result::Result<T, Error>;
