//! Run configuration shared by all subcommands: flags, optional TOML file,
//! and the resolved values echoed to `run.json`.

use std::path::{Path, PathBuf};

use clap::Args;
use serde::{Deserialize, Serialize};

use qhd_core::{Error, Result, ScenarioKind, Scope};

/// Every tunable parameter. Flags override values read from `--config`.
#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Params {
    /// TOML file with any of these parameters (flags take precedence)
    #[arg(long)]
    #[serde(skip)]
    pub config: Option<PathBuf>,

    /// Output directory
    #[arg(long)]
    pub out: Option<PathBuf>,

    /// Worker threads; 0 picks the number of CPUs
    #[arg(long)]
    pub threads: Option<usize>,

    /// Linear lattice size
    #[arg(long = "L")]
    #[serde(rename = "L")]
    pub side: Option<usize>,

    /// Particle number
    #[arg(long = "M")]
    #[serde(rename = "M")]
    pub particles: Option<usize>,

    /// Smallest particle number in a scan
    #[arg(long = "M-min")]
    #[serde(rename = "M_min")]
    pub particles_min: Option<usize>,

    /// Largest particle number in a scan (defaults to the maximal packing)
    #[arg(long = "M-max")]
    #[serde(rename = "M_max")]
    pub particles_max: Option<usize>,

    /// Initial state: crystal, second-row, first-row, half-diagonal,
    /// middle-row, point-defects or custom
    #[arg(long)]
    pub scenario: Option<ScenarioKind>,

    /// Sites removed from the crystal for point-defects or custom
    #[arg(long, value_delimiter = ',')]
    pub removal_sites: Option<Vec<usize>>,

    /// Hopping amplitude
    #[arg(long = "J")]
    #[serde(rename = "J")]
    pub hopping: Option<f64>,

    /// Next-to-nearest-neighbour interaction
    #[arg(long, allow_negative_numbers = true)]
    pub lambda: Option<f64>,

    /// Comma-separated interaction values for the spectrum scan
    #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
    pub lambdas: Option<Vec<f64>>,

    /// Time step (also the record spacing of the classical walk)
    #[arg(long)]
    pub dt: Option<f64>,

    /// Krylov vectors per step
    #[arg(long)]
    pub krylov_dim: Option<usize>,

    /// Final time in units of 1/J
    #[arg(long = "tmax")]
    pub t_max: Option<f64>,

    /// Start of the long-time averaging window (defaults to tmax/2)
    #[arg(long)]
    pub window: Option<f64>,

    /// Times at which to write occupation snapshots
    #[arg(long = "snapshot-at", value_delimiter = ',')]
    pub snapshot_at: Option<Vec<f64>>,

    /// Classical ensemble size
    #[arg(long)]
    pub trajectories: Option<usize>,

    /// Random seed of the classical walk
    #[arg(long)]
    pub seed: Option<u64>,

    /// largest-fragment or all-fragments
    #[arg(long)]
    pub scope: Option<Scope>,

    /// Largest basis or fragment explored
    #[arg(long)]
    pub state_cap: Option<usize>,

    /// Largest fragment diagonalized densely
    #[arg(long)]
    pub dense_cap: Option<usize>,
}

macro_rules! merge_fields {
    ($a:ident, $b:ident; $($f:ident),*) => {
        Params { config: $a.config, $($f: $a.$f.or($b.$f)),* }
    };
}

impl Params {
    /// Read `--config` if given and fill every unset flag from it.
    pub fn resolve(self) -> Result<Params> {
        let Some(path) = self.config.clone() else {
            return Ok(self);
        };
        let file = read_toml(&path)?;
        let flags = self;
        Ok(merge_fields!(flags, file; out, threads, side, particles, particles_min, particles_max,
            scenario, removal_sites, hopping, lambda, lambdas, dt, krylov_dim, t_max, window,
            snapshot_at, trajectories, seed, scope, state_cap, dense_cap))
    }

    pub fn side(&self) -> Result<usize> {
        self.side.ok_or_else(|| missing("L"))
    }

    pub fn particles(&self) -> Result<usize> {
        self.particles.ok_or_else(|| missing("M"))
    }

    pub fn scenario(&self) -> Result<ScenarioKind> {
        self.scenario.ok_or_else(|| missing("scenario"))
    }

    pub fn out_dir(&self, command: &str) -> PathBuf {
        self.out.clone().unwrap_or_else(|| PathBuf::from("qhd-out").join(command))
    }
}

fn missing(name: &str) -> Error {
    Error::InvalidParameter(format!("missing required parameter {name}"))
}

fn read_toml(path: &Path) -> Result<Params> {
    let text = std::fs::read_to_string(path)?;
    toml::from_str(&text).map_err(|e| Error::InvalidParameter(format!("{}: {e}", path.display())))
}
