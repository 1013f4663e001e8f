//! Energy model and batch planning for selective laser melting.
//!
//! The crate evaluates the machine energy of a build plan (parts grouped
//! into batches, each part with a build orientation and a position on the
//! platform) and searches for plans that need less energy.

pub mod catalog;
pub mod domain;
pub mod energy;
pub mod error;
pub mod files;
pub mod milp;
pub mod packing;
pub mod report;
pub mod solver;

pub use domain::{
    validate_instance, Batch, Instance, MachineSpec, OrientationGeometry, PartInstance, PartType, Placement, Plan,
    ProcessParams, Subprocess, SubprocessTimes, Subsystem, ValidationReport,
};
pub use energy::{plan_energy, BatchAggregate, EnergyBreakdown, EnergyModel, SavingsReport};
pub use error::{Error, Result};
pub use files::{InstanceFile, ModelMetadata, PlanContent, PlanFile};
pub use report::EnergyReport;
