//! Optimal gas flow: network model, equation of state, polyhedral and
//! conic relaxations, a branch-and-bound solver and verification tools.

pub mod formulation;
pub mod ingest;
pub mod model;
pub mod network;
pub mod physics;
pub mod polyrelax;
pub mod solver;
pub mod verify;
