//! Certified test functions, hypothesis and conclusion checks, the barrier
//! lemma, and end-to-end scenario runs.

mod barrier;
mod checks;
mod compare;
pub mod corpus;
mod scenario;
mod testfn;

pub use barrier::{barrier_check, BarrierReport, DOMAIN_WIDTH};
pub use checks::{conclusion_check, hypothesis_check, node_margins, test_function_subharmonic, SUBMEAN_REL_TOL};
pub use scenario::{
    run_scenario, AdmissibilitySpec, Assertion, BarrierSpec, BoundSummary, Control, DomarSpec, DomarSummary, Expect,
    MarginRow, Report, RunOptions, Scenario, TestFnSpec, SCHEMA_VERSION,
};
pub use testfn::{calibrate_kernel, Calibration, KernelTerm, TestFunction};
pub use compare::{run_compare, write_compare_csv, CompareRow, CompareSpec, Profile, TheoremASpec, TheoremBSpec};
