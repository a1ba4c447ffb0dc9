//! Admittance matrix, Newton-Raphson AC power flow and the safety check.

mod newton;
mod safety;
mod ybus;

pub use newton::{solve, BranchFlow, LoadingBasis, PowerFlowModel, PowerFlowSolution, SolverOptions};
pub use safety::{assess, evaluate_safety, line_loading_percent, SafetyReport};
pub use ybus::{build_ybus, AdmittanceMatrix};
