//! Optimal Dirichlet boundary temperature control for a phase-field
//! solidification model, in one and two space dimensions.
//!
//! The state system couples the heat equation with an Allen-Cahn equation
//! for the phase field, both discretised with explicit Euler in time and
//! the five-point (three-point in 1D) Laplacian. The control is the
//! boundary temperature at every time level. Gradients of the reduced cost
//! come from a discrete adjoint sweep and drive a plain gradient descent.
//!
//! ```no_run
//! use pfcontrol::{builtin, descend, OptimizeConfig};
//!
//! let scenario = builtin("exp5")?;
//! let config = OptimizeConfig::fixed(100, 3e13);
//! let out = descend(&scenario, &config, |_| {})?;
//! println!("error {}", out.report.error_norm);
//! # Ok::<(), Box<dyn std::error::Error>>(())
//! ```

pub mod adjoint;
pub mod control;
pub mod error;
pub mod export;
pub mod forward;
pub mod grid;
pub mod model;
pub mod objective;
pub mod optimize;
pub mod scenarios;
pub mod trajectory;

pub use adjoint::{adjoint_step, solve_adjoint, AdjointOptions, AdjointSolution, AdjointState};
pub use control::{BoundaryControl, BoundarySeries, FluxTrace};
pub use error::{Error, Result};
pub use forward::{apply_dirichlet, solve_forward, solve_forward_observed, step, ForwardSolution, SolverWarning, State};
pub use grid::{laplacian, stability_bound, Axis, Edge, Field, Grid, GridSpec};
pub use model::{Limiter, ModelParams, PhysicalityReport, ReactionKind};
pub use objective::{cost, cost_and_gradient, error_norm, evaluate, gradient, CostReport};
pub use optimize::{
    descend, fd_gradient_check, parse_schedule, random_directions, DescentFailure, DescentOutcome,
    GradientCheckReport, HistoryRecord, OptimizeConfig, ScheduleEntry, StopReason,
};
pub use scenarios::{builtin, builtin_with, extract_interface, preset, presets, InterfaceSet, Preset, Scenario};
pub use trajectory::{StoragePolicy, Trajectory};
