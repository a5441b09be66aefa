//! Initial states: the checkerboard crystal and its defect and interface
//! variants.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::lattice::Configuration;
use crate::{Error, Result};

/// Named initial-state families.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ScenarioKind {
    /// The full checkerboard crystal.
    Crystal,
    /// Crystal with the occupied sites of row 1 removed.
    SecondRow,
    /// Crystal with the occupied sites of row 0 removed.
    FirstRow,
    /// Crystal with `(k, k)` removed for `k < L/2`.
    HalfDiagonal,
    /// Crystal with the occupied sites of row `L/2` removed.
    MiddleRow,
    /// Crystal with a few isolated vacancies (defaults to two, far apart).
    PointDefects,
    /// Crystal with an explicit list of removed sites.
    Custom,
}

impl ScenarioKind {
    pub const ALL: [ScenarioKind; 7] = [
        ScenarioKind::Crystal,
        ScenarioKind::SecondRow,
        ScenarioKind::FirstRow,
        ScenarioKind::HalfDiagonal,
        ScenarioKind::MiddleRow,
        ScenarioKind::PointDefects,
        ScenarioKind::Custom,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ScenarioKind::Crystal => "crystal",
            ScenarioKind::SecondRow => "second-row",
            ScenarioKind::FirstRow => "first-row",
            ScenarioKind::HalfDiagonal => "half-diagonal",
            ScenarioKind::MiddleRow => "middle-row",
            ScenarioKind::PointDefects => "point-defects",
            ScenarioKind::Custom => "custom",
        }
    }
}

impl fmt::Display for ScenarioKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ScenarioKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        ScenarioKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::InvalidScenario(format!("unknown scenario {s:?}")))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScenarioSpec {
    pub kind: ScenarioKind,
    #[serde(rename = "L")]
    pub side: usize,
    /// Site indices removed from the crystal for `point-defects` and `custom`.
    #[serde(default)]
    pub removal_sites: Vec<usize>,
}

impl ScenarioSpec {
    pub fn new(kind: ScenarioKind, side: usize) -> Self {
        ScenarioSpec {
            kind,
            side,
            removal_sites: Vec::new(),
        }
    }

    pub fn with_removals(mut self, sites: Vec<usize>) -> Self {
        self.removal_sites = sites;
        self
    }
}

/// Occupy every site with even `r + c`.
///
/// For odd `L` this is the maximal packing with `(L² + 1) / 2` particles.
pub fn checkerboard(side: usize) -> Configuration {
    let sites: Vec<usize> = (0..side * side)
        .filter(|s| (s / side + s % side) % 2 == 0)
        .collect();
    Configuration::from_sites(side, &sites).expect("sites within lattice")
}

/// Default point-defect vacancies: two occupied sites near `(L/4, L/4)` and
/// `(3L/4, 3L/4)`.
pub fn default_point_defects(side: usize) -> Vec<usize> {
    let even = |x: usize| x - x % 2;
    let a = even(side / 4);
    let b = even(3 * side / 4).min(side - 1 - (side - 1) % 2);
    let mut sites = vec![a * side + a, b * side + b];
    sites.dedup();
    sites
}

/// Build the initial configuration described by `spec`.
pub fn build_scenario(spec: &ScenarioSpec) -> Result<Configuration> {
    let side = spec.side;
    if side < 2 {
        return Err(Error::InvalidParameter(format!(
            "lattice side must be at least 2, got {side}"
        )));
    }
    let row_sites = |r: usize| -> Vec<usize> {
        (0..side)
            .filter(|c| (r + c) % 2 == 0)
            .map(|c| r * side + c)
            .collect()
    };
    let removals: Vec<usize> = match spec.kind {
        ScenarioKind::Crystal => Vec::new(),
        ScenarioKind::SecondRow => row_sites(1),
        ScenarioKind::FirstRow => row_sites(0),
        ScenarioKind::HalfDiagonal => (0..side / 2).map(|k| k * side + k).collect(),
        ScenarioKind::MiddleRow => row_sites(side / 2),
        ScenarioKind::PointDefects if spec.removal_sites.is_empty() => default_point_defects(side),
        ScenarioKind::PointDefects | ScenarioKind::Custom => spec.removal_sites.clone(),
    };
    let mut config = checkerboard(side);
    for &s in &removals {
        if s >= side * side {
            return Err(Error::InvalidScenario(format!(
                "removal site {s} outside a {side}x{side} lattice"
            )));
        }
        if !config.is_occupied(s) {
            return Err(Error::InvalidScenario(format!(
                "removal site {s} is not occupied in the crystal"
            )));
        }
        config.set(s, false);
    }
    Ok(config)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::Lattice;

    fn build(kind: ScenarioKind, side: usize) -> Configuration {
        build_scenario(&ScenarioSpec::new(kind, side)).unwrap()
    }

    #[test]
    fn checkerboard_counts() {
        let c2 = checkerboard(2);
        assert_eq!(c2.occupied_sites().collect::<Vec<_>>(), vec![0, 3]);
        assert_eq!(checkerboard(6).particle_count(), 18);
        assert_eq!(checkerboard(8).particle_count(), 32);
        assert_eq!(checkerboard(3).particle_count(), 5);
    }

    #[test]
    fn interface_particle_counts() {
        assert_eq!(build(ScenarioKind::SecondRow, 8).particle_count(), 28);
        assert_eq!(build(ScenarioKind::FirstRow, 6).particle_count(), 15);
        assert_eq!(build(ScenarioKind::HalfDiagonal, 10).particle_count(), 45);
        assert_eq!(build(ScenarioKind::MiddleRow, 6).particle_count(), 15);
    }

    #[test]
    fn all_named_scenarios_are_valid() {
        for side in (4..=12).step_by(2) {
            let lat = Lattice::new(side).unwrap();
            for kind in ScenarioKind::ALL {
                if kind == ScenarioKind::Custom {
                    continue;
                }
                let config = build(kind, side);
                assert!(lat.is_valid(&config).unwrap(), "{kind} at L={side}");
                let expected = match kind {
                    ScenarioKind::Crystal => side * side / 2,
                    ScenarioKind::PointDefects => side * side / 2 - 2,
                    _ => side * side / 2 - side / 2,
                };
                assert_eq!(config.particle_count(), expected, "{kind} at L={side}");
            }
        }
    }

    #[test]
    fn crystal_and_middle_row_are_frozen() {
        for side in (4..=12).step_by(2) {
            let lat = Lattice::new(side).unwrap();
            assert!(lat.allowed_hops(&checkerboard(side)).unwrap().is_empty());
            let middle = build(ScenarioKind::MiddleRow, side);
            // At L=4 the removed row touches the top corner, which frees it.
            assert_eq!(lat.frozen_and_snakes(&middle).unwrap().frozen, side > 4, "L={side}");
        }
    }

    #[test]
    fn custom_removal_must_be_occupied() {
        let spec = ScenarioSpec::new(ScenarioKind::Custom, 4).with_removals(vec![1]);
        assert!(matches!(build_scenario(&spec), Err(Error::InvalidScenario(_))));
        let spec = ScenarioSpec::new(ScenarioKind::Custom, 4).with_removals(vec![99]);
        assert!(matches!(build_scenario(&spec), Err(Error::InvalidScenario(_))));
        let spec = ScenarioSpec::new(ScenarioKind::Custom, 4).with_removals(vec![0, 5]);
        assert_eq!(build_scenario(&spec).unwrap().particle_count(), 6);
    }

    #[test]
    fn default_point_defects_at_twenty() {
        let sites = default_point_defects(20);
        assert_eq!(sites.len(), 2);
        let config = build(ScenarioKind::PointDefects, 20);
        assert_eq!(config.particle_count(), 198);
        assert!(Lattice::new(20).unwrap().is_valid(&config).unwrap());
    }

    #[test]
    fn names_round_trip() {
        for kind in ScenarioKind::ALL {
            assert_eq!(kind.name().parse::<ScenarioKind>().unwrap(), kind);
        }
        assert!("diagonal".parse::<ScenarioKind>().is_err());
    }
}
