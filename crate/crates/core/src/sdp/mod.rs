//! Semidefinite relaxation of the SINR-constrained power minimization, with
//! rank-one extraction and a bisection over common rate scales.

mod relax;
pub mod solver;

pub use relax::*;
