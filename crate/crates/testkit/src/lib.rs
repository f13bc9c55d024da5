//! Independent reference computations used by the test suites.

pub mod closed_form;
pub mod modal;
pub mod random;
