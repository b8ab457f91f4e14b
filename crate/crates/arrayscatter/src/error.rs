use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("lattice sum remainder {remainder:e} exceeds tolerance {tolerance:e}")]
    NonConvergentSum { remainder: f64, tolerance: f64 },
    #[error("momentum |p| = {norm} lies outside the light cone")]
    DarkMomentum { norm: f64 },
    #[error("dispersion diverges on the light-cone edge (|p| = {norm})")]
    LightConeSingularity { norm: f64 },
    #[error("quadrature did not converge: error estimate {estimate:e} above target {target:e}")]
    QuadratureFailure { estimate: f64, target: f64 },
    #[error("energy {energy} lies within {distance:e} of the critical energy {critical}")]
    CriticalEnergyProximity {
        energy: f64,
        critical: f64,
        distance: f64,
    },
    #[error("local propagator vanishes at E = {energy}")]
    PropagatorZero { energy: f64 },
    #[error("root finding failed: {0}")]
    RootFindingFailure(String),
    #[error("Nyström system is singular (pivot {pivot:e})")]
    SingularKernel { pivot: f64 },
    #[error("channel {0} is closed")]
    ClosedChannel(usize),
    #[error("relative momentum lies outside D2(P)")]
    OutsideD2,
    #[error("seed is off shell by {0:e}")]
    OffShellSeed(f64),
    #[error("survival probability {0} is negative: perturbative regime exceeded")]
    NonPhysicalFlux(f64),
    #[error("quadrature grid has {nodes} nodes, above the limit {limit}")]
    GridTooLarge { nodes: usize, limit: usize },
}

impl Error {
    /// True for errors caused by user input rather than numerics.
    pub fn is_config(&self) -> bool {
        matches!(
            self,
            Error::InvalidConfig(_)
                | Error::InvalidInput(_)
                | Error::DarkMomentum { .. }
                | Error::ClosedChannel(_)
                | Error::OutsideD2
                | Error::OffShellSeed(_)
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
