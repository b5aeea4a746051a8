//! Dense LP solving with dual extraction, plus the penalty-alternation
//! driver for bilinear complementarity programs.

mod bilinear;
mod lp;
mod simplex;

pub use bilinear::{
    solve_bilinear_penalty, BilinearOutcome, BilinearPenaltyProblem, BilinearRow, PenaltySchedule,
};
pub use lp::{LinearProgram, LpSolution, LpStatus, RowSense, Sense, VerifyReport};
pub use simplex::solve_lp;
