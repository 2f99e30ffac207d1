//! Discrete element method granular-flow simulation.
//!
//! Spherical particles interact through spring-dashpot contact forces,
//! found via a uniform collision-detection grid whose particle→cell map is
//! kept sorted so each step works on spatially ordered data. Stepping is
//! data-parallel per particle with double-buffered state, which makes runs
//! bitwise reproducible for any worker count.
//!
//! Layering, bottom up: [`math`] and [`error`] are shared plumbing;
//! [`state`] holds particle arrays, materials, walls, and settings;
//! [`grid`] builds the collision maps; [`forces`] evaluates contact
//! models; [`parallel`] runs barrier-phased worker pools; [`profiler`]
//! counts candidate/contact work; [`integrator`] drives a step end to end.
//! On top of that, [`config`] parses run files, [`scene`] builds initial
//! conditions, [`snapshot`] round-trips binary state, and [`runner`] drives
//! whole runs into [`report`] files.

pub mod config;
pub mod error;
pub mod forces;
pub mod grid;
pub mod integrator;
pub mod math;
pub mod parallel;
pub mod profiler;
pub mod report;
pub mod runner;
pub mod scene;
pub mod snapshot;
pub mod state;
