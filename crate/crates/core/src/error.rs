use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("polar transform is undefined at the target (x = y = 0)")]
    SingularOrigin,
    #[error("line-of-sight angle {gamma} is outside the bounded set |gamma| < pi")]
    OutsideS1 { gamma: f64 },
    #[error("distance rho = {rho} must be positive")]
    SingularRho { rho: f64 },
    #[error("line-of-sight angle {gamma} is outside (-pi/2, pi/2)")]
    GammaOutOfRange { gamma: f64 },
    #[error("gain constraint violated: {0}")]
    GainConstraint(String),
    #[error("trace is empty")]
    EmptyTrace,
    #[error("trajectory was produced by {found}, expected {expected}")]
    WrongController {
        expected: &'static str,
        found: &'static str,
    },
    #[error("invalid scenario: {0}")]
    InvalidScenario(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
