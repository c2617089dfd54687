//! Exact solver for the time-dependent TSP with time windows and general
//! time-dependent travel and waiting costs, based on dynamic discretization
//! discovery over partially time-expanded networks.

#![allow(clippy::needless_range_loop)]

pub mod instance;
pub mod ddd;
pub mod formulations;
pub mod mip;
pub mod oracle;
pub mod report;
pub mod suites;
pub mod timenet;
