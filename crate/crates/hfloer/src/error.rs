use thiserror::Error;

/// Everything that can go wrong between reading a config and emitting homology.
///
/// Variants are grouped by how the CLI reports them: configuration problems
/// (exit code 2), numerical/geometric pipeline failures (exit code 3), and
/// internal invariant violations that indicate a bug rather than bad input
/// (exit code 4).
#[derive(Debug, Error)]
pub enum Error {
    // ---- configuration / input (exit 2) ----
    #[error("config: {0}")]
    Config(String),

    #[error("io: {0}")]
    Io(#[from] std::io::Error),

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),

    // ---- pipeline failures (exit 3) ----
    #[error("fixed point: no convergence after {iters} Newton steps (last step {last_step:.3e})")]
    NoConvergence { iters: usize, last_step: f64 },

    #[error("fixed point at ({x:.6}, {y:.6}) is not hyperbolic: |trace| = {trace_abs:.12} <= 2")]
    NotHyperbolic { x: f64, y: f64, trace_abs: f64 },

    #[error("map is not W-orientation-preserving at the fixed point (trace {trace:.6} < -2 gives a negative multiplier)")]
    OrientationReversing { trace: f64 },

    #[error("map is not area-preserving: |det Dphi - 1| = {dev:.3e} at ({x:.6}, {y:.6})")]
    NotAreaPreserving { dev: f64, x: f64, y: f64 },

    #[error("delta too large: linearization error {err:.3e} exceeds {bound:.3e} at seed scale {delta:.3e}")]
    DeltaTooLarge { delta: f64, err: f64, bound: f64 },

    #[error("orbit escaped the tracing box after {steps} steps of {what}")]
    OrbitEscaped { what: String, steps: usize },

    #[error("too many vertices while tracing {branch}: cap {cap} exceeded (depth {depth})")]
    TooManyVertices { branch: String, cap: usize, depth: usize },

    #[error("window insufficient: {0}")]
    WindowInsufficient(String),

    #[error("ambiguous match: {count} candidates within {tol:.3e} of the image of point {idx}")]
    AmbiguousMatch { idx: usize, count: usize, tol: f64 },

    #[error("crossing refinement failed near ({x:.6}, {y:.6}): residual {residual:.3e}")]
    RefinementFailed { x: f64, y: f64, residual: f64 },

    // ---- internal invariant violations (exit 4) ----
    #[error("invariant violation: {0}")]
    Invariant(String),

    /// Wrapper attributing a failure to a pipeline step; classification
    /// (and exit code) comes from the wrapped error.
    #[error("step {step} ({stage}): {source}")]
    Step {
        step: u8,
        stage: &'static str,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    /// Process exit code the CLI should use for this error.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) | Error::Io(_) | Error::Json(_) => 2,
            Error::Invariant(_) => 4,
            Error::Step { source, .. } => source.exit_code(),
            _ => 3,
        }
    }

    pub fn at_step(self, step: u8, stage: &'static str) -> Error {
        Error::Step { step, stage, source: Box::new(self) }
    }
}

/// Attach pipeline-step context to any error in a result chain.
pub trait StepContext<T> {
    fn step(self, step: u8, stage: &'static str) -> Result<T>;
}

impl<T> StepContext<T> for Result<T> {
    fn step(self, step: u8, stage: &'static str) -> Result<T> {
        self.map_err(|e| e.at_step(step, stage))
    }
}

pub type Result<T> = std::result::Result<T, Error>;

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn display_carries_the_diagnostic_phrases_the_cli_documents() {
        let cases: Vec<(Error, &str)> = vec![
            (Error::NotHyperbolic { x: 0.0, y: 0.0, trace_abs: 1.5 }, "not hyperbolic"),
            (Error::DeltaTooLarge { delta: 0.1, err: 1.0, bound: 0.01 }, "delta too large"),
            (Error::OrbitEscaped { what: "seed".into(), steps: 3 }, "orbit escaped"),
            (Error::WindowInsufficient("x".into()), "window insufficient"),
            (Error::AmbiguousMatch { idx: 0, count: 2, tol: 1e-6 }, "ambiguous match"),
            (Error::NoConvergence { iters: 50, last_step: 1.0 }, "no convergence"),
            (
                Error::TooManyVertices { branch: "u+".into(), cap: 10, depth: 5 },
                "too many vertices",
            ),
        ];
        for (e, phrase) in cases {
            assert!(e.to_string().contains(phrase), "{e} lacks {phrase:?}");
        }
    }

    #[test]
    fn exit_codes_partition_by_error_family() {
        assert_eq!(Error::Config("x".into()).exit_code(), 2);
        assert_eq!(Error::WindowInsufficient("x".into()).exit_code(), 3);
        assert_eq!(Error::Invariant("x".into()).exit_code(), 4);
    }

    #[test]
    fn step_context_names_the_stage_and_keeps_the_exit_code() {
        let e = Error::WindowInsufficient("too shallow".into()).at_step(2, "fundamental window");
        assert_eq!(e.exit_code(), 3);
        let msg = e.to_string();
        assert!(msg.contains("step 2"), "{msg}");
        assert!(msg.contains("fundamental window"), "{msg}");
        assert!(msg.contains("window insufficient"), "{msg}");
    }
}
