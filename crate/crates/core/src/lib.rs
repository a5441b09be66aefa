//! Exact dynamics of interacting quantum hard disks on an open square
//! lattice.
//!
//! Particles live on the sites of an `L × L` grid with no two on
//! nearest-neighbour sites. The Hamiltonian moves single particles between
//! neighbouring sites whenever the constraint allows it and adds an energy
//! `λ` for every occupied next-to-nearest-neighbour pair.
//!
//! Site `s = r·L + c`, row 0 at the bottom.

mod bits;
pub mod classical;
mod error;
pub mod hamiltonian;
pub mod io;
pub mod krylov;
pub mod lattice;
pub mod scenarios;
pub mod spectral;
pub mod state_space;

pub use classical::{simulate, ClassicalSeries, WalkSettings};
pub use error::{Error, Result};
pub use hamiltonian::SparseHamiltonian;
pub use krylov::{autocorrelation, evolve, EvolveOptions, PropagatorSettings, TimeSeries};
pub use lattice::{Configuration, Diagonal, FrozenReport, Hop, Lattice, Orientation};
pub use scenarios::{build_scenario, ScenarioKind, ScenarioSpec};
pub use spectral::{
    diagonalize, ea_order, entanglement_entropy, scar_scan, EaValues, EigenstateDiagnostics, ScanOptions, ScarScan, Scope, Spectrum,
};
pub use state_space::{
    decompose_sector, enumerate_sector, fragment_of, scan_fragmentation, Basis, FragmentDecomposition,
    FragmentationScan, Thresholds,
};

/// Version string written into run metadata.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
