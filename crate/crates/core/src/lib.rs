//! Simulation and analysis library for a two-body (thruster part plus
//! tiltable fuselage part) quadrotor that survives a single motor failure
//! by shifting its center of gravity.

pub mod allocation;
pub mod analysis;
pub mod control;
pub mod dynamics;
pub mod fault;
pub mod sim;
