//! Low-rank tensor completion in the tensor-train format.
//!
//! A tensor train represents a `d`-dimensional array by a chain of
//! third-order blocks: the entry at `(i_0, …, i_{d-1})` is the product of
//! one matrix slice per mode,
//!
//! ```text
//! A[i_0, …, i_{d-1}] = G_0(i_0) · G_1(i_1) · … · G_{d-1}(i_{d-1})
//! ```
//!
//! with matching inner dimensions (the representation ranks) and scalar
//! boundaries.  Storage and evaluation cost grow linearly in `d`, so grids
//! far beyond dense reach stay tractable as long as the ranks stay small.
//!
//! This crate fits such representations to a small set of sampled entries:
//!
//! * [`block`] and [`tt`] hold the representation and its calculus
//!   (slice products, unfoldings, orthogonalization, evaluation);
//! * [`sampling`] draws slice-stratified random index sets and carries
//!   sampled values;
//! * [`solver`] contains the two completion algorithms — alternating
//!   least squares and alternating directions fitting, the latter with an
//!   optional overrelaxation search — plus rank adaptation and stopping
//!   rules;
//! * [`generators`] builds the benchmark tensors (inverse norms, index
//!   ratios, exponential sums, random trains) and tools to reshape their
//!   singular spectra;
//! * [`ttsvd`] truncates dense tensors or existing trains by successive
//!   singular value decompositions;
//! * [`experiment`] runs seeded trial batches and aggregates them into
//!   CSV/JSON result tables;
//! * [`io`] stores representations in a small binary container;
//! * [`naive`] holds deliberately slow reference routines used to
//!   cross-check the fast paths in tests.

pub mod block;
pub mod error;
pub mod experiment;
pub mod generators;
pub mod io;
mod linalg;
pub mod naive;
pub mod sampling;
mod seed;
pub mod solver;
pub mod tt;
pub mod ttsvd;

pub use block::MatrixBlock;
pub use error::{Error, Result};
pub use sampling::{IndexSet, SampleSet};
pub use solver::{Algorithm, SolverConfig, SolverReport, SweepOrder, Termination};
pub use tt::TTRep;
