//! Rotationally symmetric Ricci flow on surfaces in a conformal gauge:
//! construction of cylinder-with-bulb surfaces, an implicit solver for the
//! conformal factor, curve-shortening loops, barrier checks and the burst
//! experiment built on them.

// `!(x > 0.0)` style tests are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod burst;
pub mod cb;
pub mod error;
pub mod exact;
pub mod grid;
pub mod io;
pub mod metric;
pub mod noose;
pub mod oracle;
pub mod report;
pub mod solver;
pub mod tridiag;
pub mod verify;

pub use burst::{BurstReport, ScenarioConfig, SweepReport};
pub use cb::{CbGridSpec, CbParams, CbReport};
pub use error::{Error, Result};
pub use exact::Barrier;
pub use metric::{CurvatureField, GeodesicBall, RadialProfile, TipCap};
pub use noose::{CoupledRun, NooseConfig};
pub use report::{CheckReport, Witness};
pub use solver::{FlowSeries, Frame, SolverConfig, TimeStepper};
