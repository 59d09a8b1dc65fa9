//! Check routines shared by the integration tests and the acceptance runner.
//! Each returns a one-line summary on success and a description of the first
//! violation otherwise. Callers must also declare the `common` and `oracles`
//! modules at their crate root.

#![allow(dead_code)]

pub mod algebra;
pub mod extraction;
pub mod fm;
pub mod gradients;
pub mod selection;
