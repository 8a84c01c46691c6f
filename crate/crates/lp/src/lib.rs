//! Bounded-variable linear programming for small, dense-ish master problems.
//!
//! The engine ([`Simplex`]) keeps its basis between solves so that cut loops
//! and branch-and-bound can re-optimize with a few dual simplex pivots.

mod model;
mod simplex;

pub use model::{Basis, LpModel, LpResult, LpStatus, Row, Sense, VarStatus};
pub use simplex::{Simplex, Tolerances, REFACTOR_INTERVAL};

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LpError {
    #[error("bound and objective vectors differ in length")]
    DimensionMismatch,
    #[error("variable {var} has invalid bounds [{lower}, {upper}]")]
    InvalidBounds { var: usize, lower: f64, upper: f64 },
    #[error("variable {var} has a non-finite objective coefficient")]
    NonFiniteObjective { var: usize },
    #[error("row {row} references unknown variable {var}")]
    VarOutOfRange { row: usize, var: usize },
    #[error("row {row} has a non-finite coefficient or right-hand side")]
    NonFiniteCoefficient { row: usize },
    #[error("warm-start basis does not match the model dimensions")]
    BasisShape,
}

/// Solves `model` from scratch (or from its warm-start basis).
pub fn solve_lp(model: &LpModel) -> Result<LpResult, LpError> {
    let mut engine = Simplex::new(model)?;
    let status = engine.solve();
    Ok(LpResult {
        status,
        x: engine.values().to_vec(),
        row_activity: (0..engine.num_rows()).map(|i| engine.row_activity(i)).collect(),
        objective: engine.objective(),
        iterations: engine.iterations(),
        basis: engine.basis(),
    })
}
