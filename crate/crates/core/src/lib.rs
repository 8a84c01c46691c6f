//! Probabilistic set covering: minimize `c.x` subject to `P(Ax >= xi) >= 1 - eps`
//! for a finite distribution of the 0-1 right-hand side `xi`.
//!
//! The scenario variables of the extensive formulation are projected out;
//! the remaining master over `(x, v)` (plus one `eta_t` per independent
//! block) is solved by branch-and-cut with closed-form feasibility cuts.

pub mod bench;
pub mod cuts;
pub mod error;
pub mod heuristic;
pub mod instance;
pub mod oracle;
pub mod preprocess;
pub mod sampling;
pub mod solver;

pub use error::{PscpError, Result};
