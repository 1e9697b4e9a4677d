//! Simulation of anonymous quantum transmission over classical anonymity
//! primitives: statevector backend, ideal channels, the EPR-generation and
//! teleportation protocols, adversaries, distillation and analysis tooling.

pub mod adversary;
pub mod analysis;
pub mod channels;
pub mod distill;
pub mod protocol;
pub mod qsim;
pub mod rng;
pub mod verify;
pub mod experiment;
