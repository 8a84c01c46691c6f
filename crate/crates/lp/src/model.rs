use std::fmt;
use std::io::{self, Write};

use crate::LpError;

/// Comparison sense of a linear row.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Sense {
    Ge,
    Le,
    Eq,
}

impl fmt::Display for Sense {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Sense::Ge => ">=",
            Sense::Le => "<=",
            Sense::Eq => "=",
        })
    }
}

/// A sparse linear row `coeffs . x <sense> rhs`.
#[derive(Debug, Clone, PartialEq)]
pub struct Row {
    pub coeffs: Vec<(usize, f64)>,
    pub sense: Sense,
    pub rhs: f64,
}

impl Row {
    pub fn new(coeffs: Vec<(usize, f64)>, sense: Sense, rhs: f64) -> Self {
        Row { coeffs, sense, rhs }
    }

    pub fn activity(&self, x: &[f64]) -> f64 {
        self.coeffs.iter().map(|&(j, a)| a * x[j]).sum()
    }

    /// Bounds on the row activity implied by the sense.
    pub fn activity_bounds(&self) -> (f64, f64) {
        match self.sense {
            Sense::Ge => (self.rhs, f64::INFINITY),
            Sense::Le => (f64::NEG_INFINITY, self.rhs),
            Sense::Eq => (self.rhs, self.rhs),
        }
    }
}

/// Position of a variable (structural or row logical) relative to the basis.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum VarStatus {
    Basic,
    AtLower,
    AtUpper,
    /// Nonbasic free variable held at zero.
    Free,
}

/// A simplex basis: one status per structural variable and one per row
/// (the status of the row's logical variable, whose value is the row activity).
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Basis {
    pub vars: Vec<VarStatus>,
    pub rows: Vec<VarStatus>,
}

/// A minimization LP over bounded variables.
#[derive(Debug, Clone, Default)]
pub struct LpModel {
    pub obj: Vec<f64>,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    pub rows: Vec<Row>,
    pub warm_start: Option<Basis>,
}

impl LpModel {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add_var(&mut self, lower: f64, upper: f64, obj: f64) -> usize {
        self.obj.push(obj);
        self.lower.push(lower);
        self.upper.push(upper);
        self.obj.len() - 1
    }

    pub fn add_row(&mut self, coeffs: Vec<(usize, f64)>, sense: Sense, rhs: f64) -> usize {
        self.rows.push(Row::new(coeffs, sense, rhs));
        self.rows.len() - 1
    }

    pub fn num_vars(&self) -> usize {
        self.obj.len()
    }

    pub fn num_rows(&self) -> usize {
        self.rows.len()
    }

    pub fn validate(&self) -> Result<(), LpError> {
        let n = self.obj.len();
        if self.lower.len() != n || self.upper.len() != n {
            return Err(LpError::DimensionMismatch);
        }
        for j in 0..n {
            if !self.obj[j].is_finite() {
                return Err(LpError::NonFiniteObjective { var: j });
            }
            let (lo, up) = (self.lower[j], self.upper[j]);
            if lo.is_nan() || up.is_nan() || lo > up || lo == f64::INFINITY || up == f64::NEG_INFINITY {
                return Err(LpError::InvalidBounds { var: j, lower: lo, upper: up });
            }
        }
        for (i, row) in self.rows.iter().enumerate() {
            if !row.rhs.is_finite() {
                return Err(LpError::NonFiniteCoefficient { row: i });
            }
            for &(j, a) in &row.coeffs {
                if j >= n {
                    return Err(LpError::VarOutOfRange { row: i, var: j });
                }
                if !a.is_finite() {
                    return Err(LpError::NonFiniteCoefficient { row: i });
                }
            }
        }
        if let Some(b) = &self.warm_start {
            if b.vars.len() != n || b.rows.len() != self.rows.len() {
                return Err(LpError::BasisShape);
            }
        }
        Ok(())
    }

    /// Writes the model in CPLEX LP text format, for cross-checking with
    /// external solvers.
    pub fn write_lp<W: Write>(&self, mut w: W) -> io::Result<()> {
        writeln!(w, "Minimize")?;
        write!(w, " obj:")?;
        let mut any = false;
        for (j, &c) in self.obj.iter().enumerate() {
            if c != 0.0 {
                write!(w, " {} {} x{}", if c < 0.0 { '-' } else { '+' }, c.abs(), j)?;
                any = true;
            }
        }
        if !any {
            write!(w, " 0 x0")?;
        }
        writeln!(w)?;
        writeln!(w, "Subject To")?;
        for (i, row) in self.rows.iter().enumerate() {
            write!(w, " r{}:", i)?;
            if row.coeffs.is_empty() {
                write!(w, " 0 x0")?;
            }
            for &(j, a) in &row.coeffs {
                write!(w, " {} {} x{}", if a < 0.0 { '-' } else { '+' }, a.abs(), j)?;
            }
            writeln!(w, " {} {}", row.sense, row.rhs)?;
        }
        writeln!(w, "Bounds")?;
        for j in 0..self.num_vars() {
            let (lo, up) = (self.lower[j], self.upper[j]);
            match (lo.is_finite(), up.is_finite()) {
                (true, true) => writeln!(w, " {} <= x{} <= {}", lo, j, up)?,
                (true, false) => writeln!(w, " x{} >= {}", j, lo)?,
                (false, true) => writeln!(w, " -inf <= x{} <= {}", j, up)?,
                (false, false) => writeln!(w, " x{} free", j)?,
            }
        }
        writeln!(w, "End")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LpStatus {
    Optimal,
    Infeasible,
    Unbounded,
    /// The engine could not certify a result (singular bases it could not
    /// repair, or the iteration limit was hit).
    NumericalFailure,
}

#[derive(Debug, Clone)]
pub struct LpResult {
    pub status: LpStatus,
    /// Structural variable values (meaningful when `status` is optimal).
    pub x: Vec<f64>,
    pub row_activity: Vec<f64>,
    pub objective: f64,
    pub iterations: usize,
    pub basis: Basis,
}
