//! Generators, oracles and property checks for the archrecon test suites.
//!
//! Every `check_*` function states one property over generated input and
//! returns a `TestCaseError` on a counterexample, so the same checks run both
//! under `proptest!` and under an explicit [`run_property`] driver.

pub mod gen;
pub mod props;
pub mod synth;

use proptest::strategy::Strategy;
use proptest::test_runner::{Config, TestCaseError, TestRunner};

/// Cases per property unless a suite asks for more.
pub const CASES: u32 = 256;

/// Runs `check` over `cases` inputs drawn from `strategy`. The error names
/// the minimal counterexample.
pub fn run_property<S, F>(cases: u32, strategy: S, check: F) -> Result<u32, String>
where
    S: Strategy,
    S::Value: std::fmt::Debug,
    F: Fn(S::Value) -> Result<(), TestCaseError>,
{
    let mut runner = TestRunner::new(Config {
        cases,
        failure_persistence: None,
        ..Config::default()
    });
    runner
        .run(&strategy, check)
        .map(|()| cases)
        .map_err(|e| e.to_string())
}
