//! Application drivers built on the sparsifier and solver.

pub mod fiedler;
pub mod transient;

pub use fiedler::{dense_fiedler, fiedler, median_partition, partition_relerr, FiedlerEngine, FiedlerResult};
pub use transient::{
    synthetic_power_grid, transient_simulate, transient_simulate_observed, Engine, PowerGridSpec, Pwl, Source,
    StepPolicy, TransientOptions, TransientResult, TransientSystem, Waveform,
};
