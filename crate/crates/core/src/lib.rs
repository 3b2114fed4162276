//! Probabilistic unit testing for quantum subroutines.
//!
//! Assertions compare a subject circuit against an expected value whose kind
//! selects the testing protocol. Each protocol yields a probability of passing
//! that is compared with a confidence threshold.

pub mod error;
pub mod orchestrator;
pub mod protocols;
pub mod qcore;
pub mod qmath;
pub mod random;
pub mod seed;
pub mod simulator;
pub mod stats;
pub mod tomography;

pub use error::{Error, Result};
pub use orchestrator::{
    format_report, run_suite, run_suite_on, Assertion, ReportFormat, SuiteDefaults, TestCase, TestReport, TestSuite,
};
pub use protocols::{run_protocol, AssertionResult, ExpectedValue, ProtocolId, RunConfig};
pub use qcore::{Circuit, ChoiMatrix, DensityMatrix, Gate, GateOp, OutcomeDistribution};
pub use simulator::{Backend, Counts, DensityMatrixSimulator, NoiseModel};
