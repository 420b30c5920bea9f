//! Semiclassical dynamics of the driven ensemble: mean fields, equations of motion,
//! STIRAP drives, time integration and steady states.

mod drive;
mod equations;
mod integrator;
mod run;
mod state;

pub use drive::{Drive, PulseConvention, StirapSchedule};
pub use equations::{effective_field, full_rhs, rhs, EnsembleSystem, Transition};
pub use integrator::{Dopri5, Observer, OdeSystem, Outcome, StepStats, Tolerances};
pub use run::{
    integrate, relax_to_steady_state, solve_steady_state, write_trajectory_csv, SteadyState,
    SteadyStateOptions, Trajectory, TrajectorySample, PHYSICALITY_SLACK, STEADY_STATE_ATOL, STEADY_STATE_RTOL,
};
pub use state::{EnsembleState, StateRate};
