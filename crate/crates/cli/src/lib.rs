//! Command-line and HTTP front ends for the FoamPilot agent.

pub mod backends;
pub mod commands;
pub mod config;
pub mod console;
pub mod serve;
