//! Experiment runner for the geodesic twist-map library: configuration,
//! named experiments, reports and the acceptance suite.

pub mod acceptance;
pub mod config;
pub mod experiments;
pub mod measure;
pub mod report;
