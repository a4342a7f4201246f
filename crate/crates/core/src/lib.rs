//! Agent runtime for driving fire-simulation case setup and execution.

pub mod agent;
pub mod case;
pub mod hpc;
pub mod index;
pub mod llm;
pub mod tools;
