//! Time integration of the coupled flow.
//!
//! `schedule` holds the time-dependent coupling, `stepper` the RK4 engine
//! with adaptive step control and termination handling, `trajectory` the
//! snapshot storage plus the closed-form reference families, and `monitors`
//! the evolution-identity and distortion checks run against trajectories.

mod monitors;
mod schedule;
mod stepper;
mod trajectory;

pub use monitors::{
    distortion_monitor, estimate_singular_time, evolution_residual, volume_identity_residual,
    DistortionReport, EvolutionResidual, SingularTimeEstimate, SlicePoint,
};
pub use schedule::CouplingSchedule;
pub use stepper::{
    run_fixed, run_flow, step_homogeneous, step_warped, FlowOptions, FlowStatus, WorkCounters,
};
pub use trajectory::{AnalyticFamily, FlowTrajectory};

pub(crate) use trajectory::interpolate;
