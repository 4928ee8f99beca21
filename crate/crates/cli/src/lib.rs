//! Experiment runner for the `dosnet` simulator: scenario files, figure
//! presets, one-axis sweeps and CSV output.

pub mod presets;
pub mod report;
pub mod runner;
pub mod scenario;
pub mod sweep;
