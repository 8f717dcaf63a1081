//! Quantities of interest: gas-mixture thermodynamics and the outlet thermal
//! energy integral, analytic benchmark models with Monte Carlo oracles, and
//! CSV ingestion of externally computed input/output samples.

mod dataset;
mod synthetic;
mod thermo;

pub use dataset::{load_dataset, read_dataset, write_dataset, Dataset};
pub use synthetic::{
    mc_moments, synthetic_qoi, CountingModel, FnModel, McMoments, QoiModel, SyntheticKind, SyntheticModel,
};
pub use thermo::{
    cp_mixture, cp_species, read_outlet_csv, thermal_energy, trapezoid, write_outlet_csv, GasSpecies, OutletRecord,
    GAS_CONSTANT, SPECIES, SWITCH_TEMPERATURE,
};
