//! Discrete-time simulation of mobile WiFi adhoc networks.
//!
//! Node positions live in a rectangular (optionally toroidal) domain. A
//! pathloss radio model fixes the transmission and interference ranges, a
//! cell-linked-list grid turns positions into neighbor lists, and an SIR
//! worm epidemic runs on top of the resulting time-dependent graphs. Monte
//! Carlo ensembles of such runs are farmed out across worker threads.

pub mod cli;
pub mod config;
pub mod ensemble;
pub mod epidemic;
pub mod error;
pub mod geometry;
pub mod mobility;
pub mod radio;
pub mod rng;
pub mod topology;

pub use error::{Result, SimError};
