//! Built-in benchmark problems.

pub mod composite;
pub mod heat;
