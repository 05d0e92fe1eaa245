use alloc::string::String;

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("gimbal lock: pitch {pitch} rad is inside the 321 singularity guard")]
    GimbalLock { pitch: f64 },
    #[error("quaternion has zero norm")]
    ZeroQuaternion,
    #[error("quaternion norm {norm} deviates from unity by more than {tol}")]
    NonUnitQuaternion { norm: f64, tol: f64 },
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("time step {0} s outside (0, 5e-3]")]
    InvalidTimestep(f64),
    #[error("state became non-finite")]
    NonFinite,
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("matrix is singular to working precision")]
    Singular,
    #[error("(A, B) is not stabilizable")]
    NotStabilizable,
    #[error("(A, Q) is not detectable")]
    NotDetectable,
    #[error("Hamiltonian eigenvalue on the imaginary axis (|Re| = {re:e})")]
    ImaginaryAxisEigenvalue { re: f64 },
    #[error("{what} did not converge within {iterations} iterations")]
    NoConvergence { what: &'static str, iterations: usize },
    #[error("closed loop is not Hurwitz (max Re = {max_re:e})")]
    NotHurwitz { max_re: f64 },
    #[error("empty evaluation window")]
    EmptyWindow,
    #[error("trajectory has {len} samples, at least {min} required")]
    TooShort { len: usize, min: usize },
    #[error("time stamps not strictly increasing at sample {index}")]
    NonMonotoneTime { index: usize },
    #[error("gap of {gap} s after sample {index} exceeds two sample periods")]
    GapTooLarge { index: usize, gap: f64 },
    #[error("window [{t0}, {t1}] lies outside the trajectory")]
    WindowOutOfRange { t0: f64, t1: f64 },
    #[error("net acceleration {accel_g} g is below the {min_g} g needed for a thrust estimate")]
    WeakSpecificForce { accel_g: f64, min_g: f64 },
    #[error("body offset tilt {tilt_deg} deg exceeds 30 deg; the trim flight is unusable")]
    ExcessiveTilt { tilt_deg: f64 },
    #[error("no command channel for the samples being validated")]
    MissingCommands,
    #[error("invalid scenario: {0}")]
    InvalidScenario(String),
}
