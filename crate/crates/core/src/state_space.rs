//! Constrained particle-number sectors and their kinetic fragments.
//!
//! A [`Basis`] is an ordered list of valid configurations with a fixed
//! particle number, sorted by the numeric value of the occupancy bit-set.
//! Sectors contain every valid configuration; fragments contain the closure
//! of one configuration under allowed hops. Both use the same type so the
//! Hamiltonian and the diagnostics do not care which one they get.

use std::collections::VecDeque;

use rustc_hash::{FxHashMap, FxHashSet};
use serde::{Deserialize, Serialize};

use crate::bits::{self, with_packed_key, PackedKey};
use crate::lattice::{Configuration, Hop, Lattice};
use crate::{Error, Result};

/// Default size budget for sectors and fragments, in configurations.
pub const DEFAULT_STATE_CAP: usize = 50_000_000;

/// Sorted list of valid configurations with a common particle number.
#[derive(Clone, PartialEq, Eq)]
pub struct Basis {
    side: usize,
    particles: usize,
    stride: usize,
    data: Vec<u64>,
}

/// Every valid configuration with a given particle number.
pub type SectorBasis = Basis;
/// The configurations reachable from one configuration by allowed hops.
pub type FragmentBasis = Basis;

impl std::fmt::Debug for Basis {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Basis")
            .field("L", &self.side)
            .field("M", &self.particles)
            .field("dim", &self.len())
            .finish()
    }
}

impl Basis {
    /// Build from packed words that are already sorted and duplicate-free.
    fn from_sorted(side: usize, particles: usize, data: Vec<u64>) -> Self {
        let stride = bits::words_for(side * side);
        debug_assert_eq!(data.len() % stride, 0);
        Basis {
            side,
            particles,
            stride,
            data,
        }
    }

    pub fn side(&self) -> usize {
        self.side
    }

    pub fn particles(&self) -> usize {
        self.particles
    }

    pub fn site_count(&self) -> usize {
        self.side * self.side
    }

    pub fn density(&self) -> f64 {
        self.particles as f64 / self.site_count() as f64
    }

    pub fn len(&self) -> usize {
        self.data.len() / self.stride
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub(crate) fn words(&self, index: usize) -> &[u64] {
        &self.data[index * self.stride..(index + 1) * self.stride]
    }

    pub fn config(&self, index: usize) -> Configuration {
        Configuration::from_words(self.side, self.words(index))
    }

    pub fn configs(&self) -> impl Iterator<Item = Configuration> + '_ {
        (0..self.len()).map(|k| self.config(k))
    }

    pub fn is_occupied(&self, index: usize, site: usize) -> bool {
        bits::test(self.words(index), site)
    }

    /// Occupied sites of configuration `index` in increasing order.
    pub fn occupied_sites(&self, index: usize) -> impl Iterator<Item = usize> + '_ {
        bits::ones(self.words(index))
    }

    pub(crate) fn position(&self, words: &[u64]) -> Option<usize> {
        let (mut lo, mut hi) = (0usize, self.len());
        while lo < hi {
            let mid = (lo + hi) / 2;
            match bits::numeric_cmp(self.words(mid), words) {
                std::cmp::Ordering::Less => lo = mid + 1,
                std::cmp::Ordering::Greater => hi = mid,
                std::cmp::Ordering::Equal => return Some(mid),
            }
        }
        None
    }

    /// Ordinal of `config`, if it belongs to the basis.
    pub fn index_of(&self, config: &Configuration) -> Option<usize> {
        if config.side() != self.side {
            return None;
        }
        self.position(config.words())
    }

    /// Ordinals reached from `index` by each allowed hop, in hop order.
    ///
    /// Hops leading outside the basis (possible only for hand-built subsets)
    /// are skipped.
    pub fn hop_targets(&self, lattice: &Lattice, index: usize) -> Vec<usize> {
        let mut hops = Vec::new();
        let mut scratch = vec![0u64; self.stride];
        lattice.push_hops(self.words(index), &mut hops);
        hops.into_iter()
            .filter_map(|hop| {
                apply_hop(self.words(index), hop, &mut scratch);
                self.position(&scratch)
            })
            .collect()
    }

    pub(crate) fn check_lattice(&self, lattice: &Lattice) -> Result<()> {
        if lattice.side() != self.side {
            return Err(Error::DimensionMismatch {
                expected: lattice.side(),
                found: self.side,
            });
        }
        Ok(())
    }
}

#[inline]
pub(crate) fn apply_hop(words: &[u64], (from, to): Hop, out: &mut [u64]) {
    out.copy_from_slice(words);
    bits::clear(out, from);
    bits::set(out, to);
}

/// Number of valid configurations with `particles` particles, counted row by
/// row over hard-disk-compatible row patterns. `None` when `L` is too large
/// for the row table.
pub fn sector_dimension(side: usize, particles: usize) -> Option<u128> {
    const MAX_SIDE: usize = 12;
    if side > MAX_SIDE {
        return None;
    }
    if particles > side * side {
        return Some(0);
    }
    let rows: Vec<u32> = (0u32..1 << side).filter(|r| r & (r >> 1) == 0).collect();
    let weight: Vec<usize> = rows.iter().map(|r| r.count_ones() as usize).collect();
    // counts[row pattern][particles so far]
    let width = particles + 1;
    let mut counts = vec![0u128; rows.len() * width];
    for (k, &w) in weight.iter().enumerate() {
        if w <= particles {
            counts[k * width + w] = 1;
        }
    }
    for _ in 1..side {
        let mut next = vec![0u128; rows.len() * width];
        for (a, &ra) in rows.iter().enumerate() {
            let src = &counts[a * width..(a + 1) * width];
            if src.iter().all(|&x| x == 0) {
                continue;
            }
            for (b, &rb) in rows.iter().enumerate() {
                if ra & rb != 0 {
                    continue;
                }
                let wb = weight[b];
                let dst = &mut next[b * width..(b + 1) * width];
                for m in 0..width.saturating_sub(wb) {
                    dst[m + wb] += src[m];
                }
            }
        }
        counts = next;
    }
    Some((0..rows.len()).map(|k| counts[k * width + particles]).sum())
}

/// Largest admissible particle number on an `L × L` open lattice.
///
/// Every row-major prefix of `k` sites has a Hamiltonian path, so at most
/// `⌈k/2⌉` of its sites can be occupied; the checkerboard reaches the bound.
pub fn max_particles(side: usize) -> usize {
    (side * side).div_ceil(2)
}

/// All valid configurations with `particles` particles, in ascending
/// numeric order.
pub fn enumerate_sector(lattice: &Lattice, particles: usize, cap: usize) -> Result<SectorBasis> {
    let side = lattice.side();
    let n = lattice.site_count();
    if let Some(dim) = sector_dimension(side, particles) {
        if dim > cap as u128 {
            return Err(Error::capacity(
                format!("sector L={side}, M={particles}"),
                dim,
                cap,
            ));
        }
    }
    let stride = lattice.words();
    let mut data = Vec::new();
    if particles <= max_particles(side) {
        let mut words = vec![0u64; stride];
        let mut count = 0usize;
        let mut search = SectorSearch {
            lattice,
            data: &mut data,
            words: &mut words,
            count: &mut count,
            cap,
            particles,
        };
        search.descend(n, particles)?;
    }
    Ok(Basis::from_sorted(side, particles, data))
}

/// Depth-first fill from the highest site down, empty branch first, which
/// emits configurations in ascending numeric order.
struct SectorSearch<'a> {
    lattice: &'a Lattice,
    data: &'a mut Vec<u64>,
    words: &'a mut Vec<u64>,
    count: &'a mut usize,
    cap: usize,
    particles: usize,
}

impl SectorSearch<'_> {
    /// Sites `0..remaining_sites` are undecided.
    fn descend(&mut self, remaining_sites: usize, remaining: usize) -> Result<()> {
        if remaining == 0 {
            *self.count += 1;
            if *self.count > self.cap {
                return Err(Error::capacity(
                    format!("sector L={}, M={}", self.lattice.side(), self.particles),
                    format!(">{}", self.cap),
                    self.cap,
                ));
            }
            self.data.extend_from_slice(self.words);
            return Ok(());
        }
        if remaining_sites.div_ceil(2) < remaining {
            return Ok(());
        }
        let site = remaining_sites - 1;
        self.descend(site, remaining)?;
        // Neighbours above or to the right are already decided.
        let blocked = self
            .lattice
            .neighbors(site)
            .iter()
            .any(|&t| t > site && bits::test(self.words, t));
        if !blocked {
            bits::set(self.words, site);
            self.descend(site, remaining - 1)?;
            bits::clear(self.words, site);
        }
        Ok(())
    }
}

/// Breadth-first closure of `config` under allowed hops.
pub fn fragment_of(lattice: &Lattice, config: &Configuration, cap: usize) -> Result<FragmentBasis> {
    if !lattice.is_valid(config)? {
        let (a, b) = lattice
            .first_violation(config.words())
            .expect("invalid configuration has a violating pair");
        return Err(Error::ConstraintViolation(a, b));
    }
    with_packed_key!(lattice.words(), K => explore::<K>(lattice, config, cap))
}

fn explore<K: PackedKey>(lattice: &Lattice, config: &Configuration, cap: usize) -> Result<FragmentBasis> {
    let stride = lattice.words();
    let start = config.words();
    let mut seen: FxHashSet<K> = FxHashSet::default();
    let mut queue: VecDeque<Vec<u64>> = VecDeque::new();
    seen.insert(K::pack(start));
    queue.push_back(start.to_vec());
    let mut hops = Vec::new();
    let mut scratch = vec![0u64; stride];
    while let Some(words) = queue.pop_front() {
        hops.clear();
        lattice.push_hops(&words, &mut hops);
        for &hop in &hops {
            apply_hop(&words, hop, &mut scratch);
            if seen.insert(K::pack(&scratch)) {
                if seen.len() > cap {
                    return Err(Error::capacity(
                        format!("fragment of L={}, M={}", lattice.side(), config.particle_count()),
                        format!(">{cap}"),
                        cap,
                    ));
                }
                queue.push_back(scratch.clone());
            }
        }
    }
    let mut keys: Vec<K> = seen.into_iter().collect();
    keys.sort_unstable_by(|a, b| bits::numeric_cmp(a.as_words(), b.as_words()));
    let mut data: Vec<u64> = Vec::with_capacity(keys.len() * stride);
    for k in &keys {
        data.extend_from_slice(&k.as_words()[..stride]);
    }
    Ok(Basis::from_sorted(lattice.side(), config.particle_count(), data))
}

/// Kinetic fragments of a sector.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FragmentDecomposition {
    /// Fragment id of every basis ordinal. Ids are assigned in order of each
    /// fragment's smallest ordinal.
    pub fragment_ids: Vec<usize>,
    pub fragment_sizes: Vec<usize>,
}

impl FragmentDecomposition {
    pub fn fragment_count(&self) -> usize {
        self.fragment_sizes.len()
    }

    /// Total dimension `N`.
    pub fn total(&self) -> usize {
        self.fragment_ids.len()
    }

    /// Size of the largest fragment, `N_max`.
    pub fn largest_size(&self) -> usize {
        self.fragment_sizes.iter().copied().max().unwrap_or(0)
    }

    /// Id of the largest fragment; ties go to the smallest id.
    pub fn largest_id(&self) -> Option<usize> {
        let max = self.largest_size();
        self.fragment_sizes.iter().position(|&s| s == max)
    }

    /// `N_max / N`, or 0 for an empty sector.
    pub fn ratio(&self) -> f64 {
        if self.total() == 0 {
            0.0
        } else {
            self.largest_size() as f64 / self.total() as f64
        }
    }

    /// Ordinals belonging to fragment `id`, ascending.
    pub fn members(&self, id: usize) -> Vec<usize> {
        self.fragment_ids
            .iter()
            .enumerate()
            .filter_map(|(k, &f)| (f == id).then_some(k))
            .collect()
    }

    /// Sub-basis holding fragment `id` of `sector`.
    pub fn fragment_basis(&self, sector: &SectorBasis, id: usize) -> FragmentBasis {
        let mut data = Vec::with_capacity(self.fragment_sizes[id] * sector.stride);
        for k in self.members(id) {
            data.extend_from_slice(sector.words(k));
        }
        Basis::from_sorted(sector.side, sector.particles, data)
    }
}

pub(crate) struct DisjointSet {
    parent: Vec<u32>,
    rank: Vec<u8>,
}

impl DisjointSet {
    pub(crate) fn new(n: usize) -> Self {
        DisjointSet {
            parent: (0..n as u32).collect(),
            rank: vec![0; n],
        }
    }

    pub(crate) fn find(&mut self, mut node: usize) -> usize {
        let mut root = node;
        while self.parent[root] as usize != root {
            root = self.parent[root] as usize;
        }
        while self.parent[node] as usize != root {
            let next = self.parent[node] as usize;
            self.parent[node] = root as u32;
            node = next;
        }
        root
    }

    pub(crate) fn union(&mut self, a: usize, b: usize) {
        let (mut a, mut b) = (self.find(a), self.find(b));
        if a == b {
            return;
        }
        if self.rank[a] < self.rank[b] {
            std::mem::swap(&mut a, &mut b);
        }
        self.parent[b] = a as u32;
        if self.rank[a] == self.rank[b] {
            self.rank[a] += 1;
        }
    }
}

/// Connected components of the hop graph on `sector`.
pub fn decompose_sector(lattice: &Lattice, sector: &SectorBasis) -> Result<FragmentDecomposition> {
    sector.check_lattice(lattice)?;
    let n = sector.len();
    if n > u32::MAX as usize {
        return Err(Error::capacity("fragment decomposition", n, u32::MAX as usize));
    }
    let mut dsu = DisjointSet::new(n);
    let mut hops = Vec::new();
    let mut scratch = vec![0u64; sector.stride];
    for k in 0..n {
        hops.clear();
        lattice.push_hops(sector.words(k), &mut hops);
        for &hop in &hops {
            apply_hop(sector.words(k), hop, &mut scratch);
            // Each edge is seen from both ends; one union suffices.
            let target = sector
                .position(&scratch)
                .ok_or_else(|| Error::InvalidParameter("basis is not a complete sector".into()))?;
            if target > k {
                dsu.union(k, target);
            }
        }
    }
    let mut id_of_root: FxHashMap<usize, usize> = FxHashMap::default();
    let mut fragment_ids = Vec::with_capacity(n);
    let mut fragment_sizes = Vec::new();
    for k in 0..n {
        let root = dsu.find(k);
        let next = id_of_root.len();
        let id = *id_of_root.entry(root).or_insert(next);
        if id == fragment_sizes.len() {
            fragment_sizes.push(0);
        }
        fragment_sizes[id] += 1;
        fragment_ids.push(id);
    }
    Ok(FragmentDecomposition {
        fragment_ids,
        fragment_sizes,
    })
}

/// Density thresholds of the fragmentation diagram for one lattice size.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Thresholds {
    #[serde(rename = "L")]
    pub side: usize,
    /// `1 / L`: below this no snake fits.
    pub eta_1: f64,
    /// `1/2 - ⌈L/2⌉ / L²`: above this only small fragments remain.
    pub eta_2: f64,
    /// `1/2 - (L mod 2) / (2 L²)` as quoted for the maximal density.
    pub eta_max_formula: f64,
    /// Exact maximal density `⌈L²/2⌉ / L²`.
    pub eta_max_exact: f64,
    pub max_particles: usize,
}

impl Thresholds {
    pub fn new(side: usize) -> Self {
        let l = side as f64;
        let l2 = l * l;
        let max = max_particles(side);
        Thresholds {
            side,
            eta_1: 1.0 / l,
            eta_2: 0.5 - side.div_ceil(2) as f64 / l2,
            eta_max_formula: 0.5 - (side % 2) as f64 / (2.0 * l2),
            eta_max_exact: max as f64 / l2,
            max_particles: max,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScanRow {
    #[serde(rename = "M")]
    pub particles: usize,
    pub eta: f64,
    /// `N`; `None` when the row was skipped.
    pub total: Option<usize>,
    pub largest: Option<usize>,
    pub ratio: Option<f64>,
    pub fragments: Option<usize>,
    pub skipped: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FragmentationScan {
    #[serde(rename = "L")]
    pub side: usize,
    pub rows: Vec<ScanRow>,
    pub thresholds: Thresholds,
    /// Smallest density with `N_max / N < 0.5`. Single-size heuristic only.
    pub eta_star_heuristic: Option<f64>,
}

/// Decompose every sector in `particles` and tabulate the largest-fragment
/// ratio. Sectors over `cap` are recorded as skipped.
pub fn scan_fragmentation(
    lattice: &Lattice,
    particles: impl IntoIterator<Item = usize>,
    cap: usize,
) -> Result<FragmentationScan> {
    let side = lattice.side();
    let mut rows = Vec::new();
    for m in particles {
        let eta = m as f64 / lattice.site_count() as f64;
        let row = match enumerate_sector(lattice, m, cap) {
            Ok(sector) => {
                let dec = decompose_sector(lattice, &sector)?;
                ScanRow {
                    particles: m,
                    eta,
                    total: Some(dec.total()),
                    largest: Some(dec.largest_size()),
                    ratio: Some(dec.ratio()),
                    fragments: Some(dec.fragment_count()),
                    skipped: None,
                }
            }
            Err(err @ Error::Capacity { .. }) => ScanRow {
                particles: m,
                eta,
                total: None,
                largest: None,
                ratio: None,
                fragments: None,
                skipped: Some(err.to_string()),
            },
            Err(other) => return Err(other),
        };
        rows.push(row);
    }
    rows.sort_by_key(|r| r.particles);
    rows.dedup_by_key(|r| r.particles);
    let eta_star_heuristic = rows
        .iter()
        .find(|r| matches!(r.ratio, Some(x) if x < 0.5 && r.total.unwrap_or(0) > 0))
        .map(|r| r.eta);
    Ok(FragmentationScan {
        side,
        rows,
        thresholds: Thresholds::new(side),
        eta_star_heuristic,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn lat(l: usize) -> Lattice {
        Lattice::new(l).unwrap()
    }

    #[test]
    fn sector_examples() {
        assert_eq!(enumerate_sector(&lat(2), 1, DEFAULT_STATE_CAP).unwrap().len(), 4);
        assert_eq!(enumerate_sector(&lat(2), 2, DEFAULT_STATE_CAP).unwrap().len(), 2);
        assert_eq!(enumerate_sector(&lat(3), 2, DEFAULT_STATE_CAP).unwrap().len(), 24);
        assert_eq!(enumerate_sector(&lat(3), 6, DEFAULT_STATE_CAP).unwrap().len(), 0);
        assert_eq!(enumerate_sector(&lat(2), 0, DEFAULT_STATE_CAP).unwrap().len(), 1);
    }

    #[test]
    fn sector_is_sorted_and_indexed() {
        let basis = enumerate_sector(&lat(4), 4, DEFAULT_STATE_CAP).unwrap();
        for k in 1..basis.len() {
            assert_eq!(
                bits::numeric_cmp(basis.words(k - 1), basis.words(k)),
                std::cmp::Ordering::Less
            );
        }
        for (k, config) in basis.configs().enumerate() {
            assert_eq!(basis.index_of(&config), Some(k));
        }
    }

    #[test]
    fn row_count_matches_enumeration() {
        for l in 2..=5 {
            for m in 0..=max_particles(l) + 1 {
                let basis = enumerate_sector(&lat(l), m, DEFAULT_STATE_CAP).unwrap();
                assert_eq!(sector_dimension(l, m), Some(basis.len() as u128), "L={l} M={m}");
            }
        }
    }

    #[test]
    fn capacity_error_names_size() {
        let err = enumerate_sector(&lat(4), 4, 100).unwrap_err();
        match err {
            Error::Capacity { estimated, cap, .. } => {
                assert_eq!(estimated, "405");
                assert_eq!(cap, 100);
            }
            other => panic!("unexpected {other:?}"),
        }
        let err = fragment_of(&lat(5), &Configuration::from_sites(5, &[0]).unwrap(), 10).unwrap_err();
        assert!(matches!(err, Error::Capacity { .. }));
    }

    #[test]
    fn fragment_examples() {
        let diag = Configuration::from_coords(2, &[(0, 0), (1, 1)]).unwrap();
        assert_eq!(fragment_of(&lat(2), &diag, DEFAULT_STATE_CAP).unwrap().len(), 1);
        for s in 0..9 {
            let single = Configuration::from_sites(3, &[s]).unwrap();
            assert_eq!(fragment_of(&lat(3), &single, DEFAULT_STATE_CAP).unwrap().len(), 9);
        }
        let anti = Configuration::from_coords(4, &[(0, 3), (1, 2), (2, 1), (3, 0)]).unwrap();
        assert_eq!(fragment_of(&lat(4), &anti, DEFAULT_STATE_CAP).unwrap().len(), 1);
    }

    #[test]
    fn fragment_of_invalid_is_rejected() {
        let bad = Configuration::from_sites(3, &[0, 1]).unwrap();
        assert!(matches!(
            fragment_of(&lat(3), &bad, DEFAULT_STATE_CAP),
            Err(Error::ConstraintViolation(0, 1))
        ));
    }

    #[test]
    fn decomposition_examples() {
        let l2 = lat(2);
        let sector = enumerate_sector(&l2, 2, DEFAULT_STATE_CAP).unwrap();
        let dec = decompose_sector(&l2, &sector).unwrap();
        assert_eq!(dec.fragment_sizes, vec![1, 1]);
        assert_eq!(dec.ratio(), 0.5);

        let l3 = lat(3);
        let sector = enumerate_sector(&l3, 1, DEFAULT_STATE_CAP).unwrap();
        let dec = decompose_sector(&l3, &sector).unwrap();
        assert_eq!(dec.fragment_sizes, vec![9]);
        assert_eq!(dec.ratio(), 1.0);
    }

    #[test]
    fn wide_lattice_fragment() {
        // 400 sites span seven words.
        let l = lat(20);
        let config = Configuration::from_coords(20, &[(10, 10), (3, 17)]).unwrap();
        let frag = fragment_of(&l, &config, DEFAULT_STATE_CAP).unwrap();
        // Two free walkers that never touch: all ordered placements minus
        // overlapping or adjacent ones, halved for indistinguishability.
        let sites = 400usize;
        let excluded: usize = sites + 2 * l.nn_pairs().len();
        assert_eq!(frag.len(), (sites * sites - excluded) / 2);
        assert!(frag.index_of(&config).is_some());
    }

    #[test]
    fn thresholds_at_eight() {
        let t = Thresholds::new(8);
        assert_eq!(t.eta_1, 0.125);
        assert_eq!(t.eta_2, 0.4375);
        assert_eq!(t.eta_max_formula, 0.5);
        assert_eq!(t.eta_max_exact, 0.5);
        let t = Thresholds::new(3);
        assert_eq!(t.max_particles, 5);
        assert!(t.eta_max_exact > t.eta_max_formula);
    }

    #[test]
    fn max_particles_matches_brute_force() {
        for l in 2..=6 {
            let max = max_particles(l);
            assert!(sector_dimension(l, max).unwrap() > 0);
            assert_eq!(sector_dimension(l, max + 1), Some(0));
        }
    }

    #[test]
    fn scan_marks_skipped_rows() {
        let scan = scan_fragmentation(&lat(4), 0..=8, 300).unwrap();
        assert_eq!(scan.rows.len(), 9);
        assert!(scan.rows[4].skipped.is_some()); // 405 configurations
        assert!(scan.rows[5].skipped.is_some()); // 304
        assert_eq!(scan.rows[3].total, Some(276));
        let etas: Vec<f64> = scan.rows.iter().map(|r| r.eta).collect();
        assert!(etas.windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn no_fragmentation_below_first_threshold_at_six() {
        let l = lat(6);
        for m in 1..6 {
            let sector = enumerate_sector(&l, m, DEFAULT_STATE_CAP).unwrap();
            let dec = decompose_sector(&l, &sector).unwrap();
            assert_eq!(dec.ratio(), 1.0, "M={m}");
        }
    }
}
