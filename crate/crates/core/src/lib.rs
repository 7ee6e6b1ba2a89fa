//! Perturbed twist maps on the cylinder, their Hamiltonian suspensions, and
//! a Finsler metric on the two-torus whose geodesic return map is conjugate
//! to them; with finite-time Lyapunov tools to measure the chaos they carry.

pub mod chaos_analysis;
pub mod cylinder_maps;
pub mod error;
pub mod finsler;
pub mod geodesics;
pub mod smooth;
pub mod suspension;

pub use chaos_analysis::{FtleField, KamReport, KamSample};
pub use cylinder_maps::{CylinderMap, CylinderPoint, GridSpec, MapStep, Shear, TwistMap, TwistMapSpec};
pub use error::{Error, Result};
pub use finsler::{ConvexProfile, CrRegion, FinslerModel, Side};
pub use geodesics::{ConjugatedReturnMap, GraphIntegrator, GraphTrajectory, SectionState};
pub use suspension::{IntegratorConfig, SuspensionSpec, TimeOneMap};
