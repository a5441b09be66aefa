//! Open square lattice, hard-disk configurations and the single-particle
//! moves that respect the exclusion constraint.
//!
//! Sites are indexed row-major, `s = r * L + c`, with row 0 at the bottom of
//! the lattice. Nearest neighbours sit at distance 1 and exclude each other;
//! next-to-nearest neighbours sit at distance √2 and interact.

use std::fmt;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::bits;
use crate::{Error, Result};

/// A particle move from an occupied site to an empty neighbouring site.
pub type Hop = (usize, usize);

/// One candidate move out of a site, with the sites that must be empty for
/// it to keep the configuration valid.
#[derive(Debug, Clone)]
pub(crate) struct MoveRule {
    pub(crate) to: usize,
    /// Nearest neighbours of `to` other than the source site.
    pub(crate) blockers: Vec<usize>,
}

/// Geometry of an `L × L` open square lattice.
#[derive(Debug, Clone)]
pub struct Lattice {
    side: usize,
    nn_pairs: Vec<(usize, usize)>,
    nnn_pairs: Vec<(usize, usize)>,
    neighbors: Vec<Vec<usize>>,
    moves: Vec<Vec<MoveRule>>,
}

impl Lattice {
    /// Build the lattice of linear size `side` (`side >= 2`).
    pub fn new(side: usize) -> Result<Self> {
        if side < 2 {
            return Err(Error::InvalidParameter(format!(
                "lattice side must be at least 2, got {side}"
            )));
        }
        let n = side * side;
        let mut nn_pairs = Vec::with_capacity(2 * side * (side - 1));
        let mut nnn_pairs = Vec::with_capacity(2 * (side - 1) * (side - 1));
        for r in 0..side {
            for c in 0..side {
                let s = r * side + c;
                if c + 1 < side {
                    nn_pairs.push((s, s + 1));
                }
                if r + 1 < side {
                    nn_pairs.push((s, s + side));
                    if c + 1 < side {
                        nnn_pairs.push((s, s + side + 1));
                    }
                    if c > 0 {
                        nnn_pairs.push((s, s + side - 1));
                    }
                }
            }
        }
        nn_pairs.sort_unstable();
        nnn_pairs.sort_unstable();

        let mut neighbors = vec![Vec::with_capacity(4); n];
        for &(a, b) in &nn_pairs {
            neighbors[a].push(b);
            neighbors[b].push(a);
        }
        for list in &mut neighbors {
            list.sort_unstable();
        }
        let moves = (0..n)
            .map(|s| {
                neighbors[s]
                    .iter()
                    .map(|&t| MoveRule {
                        to: t,
                        blockers: neighbors[t].iter().copied().filter(|&u| u != s).collect(),
                    })
                    .collect()
            })
            .collect();

        Ok(Lattice {
            side,
            nn_pairs,
            nnn_pairs,
            neighbors,
            moves,
        })
    }

    pub fn side(&self) -> usize {
        self.side
    }

    pub fn site_count(&self) -> usize {
        self.side * self.side
    }

    /// Unordered nearest-neighbour pairs `(a, b)` with `a < b`, sorted.
    pub fn nn_pairs(&self) -> &[(usize, usize)] {
        &self.nn_pairs
    }

    /// Unordered next-to-nearest-neighbour (diagonal) pairs, sorted.
    pub fn nnn_pairs(&self) -> &[(usize, usize)] {
        &self.nnn_pairs
    }

    /// Nearest neighbours of `site` in increasing order.
    pub fn neighbors(&self, site: usize) -> &[usize] {
        &self.neighbors[site]
    }

    pub fn site(&self, row: usize, col: usize) -> usize {
        row * self.side + col
    }

    pub fn row_col(&self, site: usize) -> (usize, usize) {
        (site / self.side, site % self.side)
    }

    pub(crate) fn words(&self) -> usize {
        bits::words_for(self.site_count())
    }

    fn check_size(&self, config: &Configuration) -> Result<()> {
        if config.side != self.side {
            return Err(Error::DimensionMismatch {
                expected: self.side,
                found: config.side,
            });
        }
        Ok(())
    }

    /// First occupied nearest-neighbour pair in raw words, if any.
    pub(crate) fn first_violation(&self, words: &[u64]) -> Option<(usize, usize)> {
        self.nn_pairs
            .iter()
            .copied()
            .find(|&(a, b)| bits::test(words, a) && bits::test(words, b))
    }

    /// Whether no two occupied sites are nearest neighbours.
    pub fn is_valid(&self, config: &Configuration) -> Result<bool> {
        self.check_size(config)?;
        Ok(self.first_violation(&config.words).is_none())
    }

    fn require_valid(&self, config: &Configuration) -> Result<()> {
        self.check_size(config)?;
        match self.first_violation(&config.words) {
            Some((a, b)) => Err(Error::ConstraintViolation(a, b)),
            None => Ok(()),
        }
    }

    /// Append the allowed hops of a valid configuration, ordered by source
    /// then target site.
    ///
    /// In a valid configuration every neighbour of an occupied site is empty,
    /// so only the other neighbours of the target need checking.
    #[inline]
    pub(crate) fn push_hops(&self, words: &[u64], out: &mut Vec<Hop>) {
        for from in bits::ones(words) {
            for rule in &self.moves[from] {
                if rule.blockers.iter().all(|&u| !bits::test(words, u)) {
                    out.push((from, rule.to));
                }
            }
        }
    }

    pub(crate) fn count_hops(&self, words: &[u64]) -> usize {
        bits::ones(words)
            .map(|from| {
                self.moves[from]
                    .iter()
                    .filter(|rule| rule.blockers.iter().all(|&u| !bits::test(words, u)))
                    .count()
            })
            .sum()
    }

    /// Number of occupied next-to-nearest-neighbour pairs.
    pub(crate) fn occupied_nnn_count(&self, words: &[u64]) -> usize {
        self.nnn_pairs
            .iter()
            .filter(|&&(a, b)| bits::test(words, a) && bits::test(words, b))
            .count()
    }

    /// Moves that take one particle to an empty neighbouring site and leave
    /// the configuration valid.
    pub fn allowed_hops(&self, config: &Configuration) -> Result<Vec<Hop>> {
        self.require_valid(config)?;
        let mut out = Vec::new();
        self.push_hops(&config.words, &mut out);
        Ok(out)
    }

    /// Frozen flag plus every fully occupied diagonal line of `config`.
    pub fn frozen_and_snakes(&self, config: &Configuration) -> Result<FrozenReport> {
        self.require_valid(config)?;
        let frozen = self.count_hops(&config.words) == 0;
        let l = self.side as isize;
        let mut diagonals = Vec::new();
        for orientation in [Orientation::Main, Orientation::Anti] {
            let offsets: Vec<isize> = match orientation {
                Orientation::Main => (-(l - 1)..=(l - 1)).collect(),
                Orientation::Anti => (0..=2 * (l - 1)).collect(),
            };
            for offset in offsets {
                let sites = self.diagonal_sites(orientation, offset);
                if !sites.is_empty() && sites.iter().all(|&s| config.is_occupied(s)) {
                    diagonals.push(Diagonal {
                        orientation,
                        offset,
                        length: sites.len(),
                        is_snake: sites.len() == self.side,
                    });
                }
            }
        }
        Ok(FrozenReport { frozen, diagonals })
    }

    /// Sites on one diagonal line, ordered by row.
    ///
    /// Main diagonals satisfy `r - c = offset`; anti-diagonals `r + c = offset`.
    pub fn diagonal_sites(&self, orientation: Orientation, offset: isize) -> Vec<usize> {
        let l = self.side as isize;
        (0..l)
            .filter_map(|r| {
                let c = match orientation {
                    Orientation::Main => r - offset,
                    Orientation::Anti => offset - r,
                };
                (0..l).contains(&c).then(|| (r * l + c) as usize)
            })
            .collect()
    }
}

/// Direction of a diagonal line.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Orientation {
    /// Lines of constant `r - c`.
    Main,
    /// Lines of constant `r + c`.
    Anti,
}

/// A fully occupied diagonal line.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Diagonal {
    pub orientation: Orientation,
    pub offset: isize,
    pub length: usize,
    /// Set for lines of maximal length `L`.
    pub is_snake: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FrozenReport {
    pub frozen: bool,
    pub diagonals: Vec<Diagonal>,
}

impl FrozenReport {
    pub fn has_snake(&self) -> bool {
        self.diagonals.iter().any(|d| d.is_snake)
    }
}

/// Occupation pattern of an `L × L` lattice.
///
/// Validity against the hard-disk constraint is checked by [`Lattice`], not
/// on construction, so invalid patterns can be represented and rejected.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct Configuration {
    side: usize,
    words: Vec<u64>,
}

impl Configuration {
    pub fn empty(side: usize) -> Self {
        Configuration {
            side,
            words: vec![0; bits::words_for(side * side)],
        }
    }

    pub fn from_sites(side: usize, sites: &[usize]) -> Result<Self> {
        let mut config = Self::empty(side);
        for &s in sites {
            if s >= side * side {
                return Err(Error::InvalidParameter(format!(
                    "site {s} outside a {side}x{side} lattice"
                )));
            }
            bits::set(&mut config.words, s);
        }
        Ok(config)
    }

    /// Build from `(row, col)` coordinates.
    pub fn from_coords(side: usize, coords: &[(usize, usize)]) -> Result<Self> {
        if let Some(&(r, c)) = coords.iter().find(|&&(r, c)| r >= side || c >= side) {
            return Err(Error::InvalidParameter(format!(
                "coordinate ({r}, {c}) outside a {side}x{side} lattice"
            )));
        }
        let sites: Vec<usize> = coords.iter().map(|&(r, c)| r * side + c).collect();
        Self::from_sites(side, &sites)
    }

    pub(crate) fn from_words(side: usize, words: &[u64]) -> Self {
        debug_assert_eq!(words.len(), bits::words_for(side * side));
        Configuration {
            side,
            words: words.to_vec(),
        }
    }

    /// Parse a string of `'0'`/`'1'` characters in site-index order.
    pub fn from_bitstring(side: usize, text: &str) -> Result<Self> {
        let n = side * side;
        if text.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                found: text.len(),
            });
        }
        let mut config = Self::empty(side);
        for (s, ch) in text.bytes().enumerate() {
            match ch {
                b'1' => bits::set(&mut config.words, s),
                b'0' => {}
                other => {
                    return Err(Error::InvalidParameter(format!(
                        "unexpected character {:?} in occupancy string",
                        other as char
                    )))
                }
            }
        }
        Ok(config)
    }

    pub fn to_bitstring(&self) -> String {
        (0..self.site_count())
            .map(|s| if self.is_occupied(s) { '1' } else { '0' })
            .collect()
    }

    pub fn side(&self) -> usize {
        self.side
    }

    pub fn site_count(&self) -> usize {
        self.side * self.side
    }

    pub fn is_occupied(&self, site: usize) -> bool {
        bits::test(&self.words, site)
    }

    pub fn particle_count(&self) -> usize {
        bits::popcount(&self.words)
    }

    /// Particle density `M / L²`.
    pub fn density(&self) -> f64 {
        self.particle_count() as f64 / self.site_count() as f64
    }

    pub fn occupied_sites(&self) -> impl Iterator<Item = usize> + '_ {
        bits::ones(&self.words)
    }

    pub(crate) fn words(&self) -> &[u64] {
        &self.words
    }

    pub fn set(&mut self, site: usize, occupied: bool) {
        if occupied {
            bits::set(&mut self.words, site);
        } else {
            bits::clear(&mut self.words, site);
        }
    }

    /// Copy with one particle moved from `from` to `to`.
    pub fn with_hop(&self, (from, to): Hop) -> Configuration {
        let mut next = self.clone();
        next.set(from, false);
        next.set(to, true);
        next
    }
}

impl fmt::Debug for Configuration {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Configuration(L={}, {})", self.side, self.to_bitstring())
    }
}

/// Text rendering with the top row first, `o` for occupied.
impl fmt::Display for Configuration {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for r in (0..self.side).rev() {
            for c in 0..self.side {
                let mark = if self.is_occupied(r * self.side + c) { 'o' } else { '.' };
                write!(f, "{mark}")?;
            }
            if r > 0 {
                writeln!(f)?;
            }
        }
        Ok(())
    }
}

#[derive(Serialize, Deserialize)]
struct ConfigurationRecord {
    #[serde(rename = "L")]
    side: usize,
    #[serde(rename = "M")]
    particles: usize,
    occupancy: String,
}

impl Serialize for Configuration {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        ConfigurationRecord {
            side: self.side,
            particles: self.particle_count(),
            occupancy: self.to_bitstring(),
        }
        .serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for Configuration {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        use serde::de::Error as _;
        let record = ConfigurationRecord::deserialize(deserializer)?;
        let config =
            Configuration::from_bitstring(record.side, &record.occupancy).map_err(D::Error::custom)?;
        if config.particle_count() != record.particles {
            return Err(D::Error::custom(format!(
                "M = {} does not match {} occupied sites",
                record.particles,
                config.particle_count()
            )));
        }
        Ok(config)
    }
}
