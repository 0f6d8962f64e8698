//! Independent oracles shared by the integration tests and the acceptance harness.
#![allow(dead_code)]

pub mod dense;
pub mod p2;
