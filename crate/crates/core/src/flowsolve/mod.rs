//! Coarse-to-fine variational displacement estimation with a Charbonnier
//! data term and a total-variation smoothness term.

mod loss;
mod solver;

pub use loss::{charbonnier_loss, tv_loss};
pub use solver::{flow_objective, solve_flow, solve_flow_from, LevelReport, SolveReport, SolverConfig};
