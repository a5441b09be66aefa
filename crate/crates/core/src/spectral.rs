//! Dense diagonalization of fragment Hamiltonians and per-eigenstate
//! diagnostics: energy density, bipartite entanglement entropy and the
//! normalized Edwards–Anderson order parameter.

use std::fmt;
use std::str::FromStr;

use faer::linalg::solvers::SelfAdjointEigen;
use faer::{Mat, Side};
use rayon::prelude::*;
use rustc_hash::FxHashMap;
use serde::{Deserialize, Serialize};

use crate::bits;
use crate::hamiltonian::SparseHamiltonian;
use crate::lattice::Lattice;
use crate::state_space::{decompose_sector, enumerate_sector, Basis, DEFAULT_STATE_CAP};
use crate::{Error, Result};

/// Default largest dimension accepted by [`diagonalize`].
pub const DEFAULT_DENSE_CAP: usize = 20_000;

/// Squared Schmidt values below this are left out of the entropy.
const SCHMIDT_CUTOFF: f64 = 1e-14;

/// Eigenvalues in ascending order with orthonormal real eigenvectors.
pub struct Spectrum {
    energies: Vec<f64>,
    eigen: SelfAdjointEigen<f64>,
}

impl fmt::Debug for Spectrum {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Spectrum").field("dim", &self.energies.len()).finish()
    }
}

impl Spectrum {
    pub fn dim(&self) -> usize {
        self.energies.len()
    }

    pub fn energies(&self) -> &[f64] {
        &self.energies
    }

    /// Eigenvector `k` over the basis ordinals.
    pub fn vector(&self, k: usize) -> &[f64] {
        self.eigen
            .U()
            .col(k)
            .try_as_col_major()
            .expect("owned matrix columns are contiguous")
            .as_slice()
    }

    /// Level index of each eigenvalue, grouping neighbours closer than `tol`.
    pub fn degeneracy_groups(&self, tol: f64) -> Vec<usize> {
        let mut groups = Vec::with_capacity(self.dim());
        let mut group = 0;
        for (k, e) in self.energies.iter().enumerate() {
            if k > 0 && e - self.energies[k - 1] > tol {
                group += 1;
            }
            groups.push(group);
        }
        groups
    }
}

/// Full eigendecomposition of `h`, refusing dimensions above `dense_cap`.
pub fn diagonalize(h: &SparseHamiltonian, dense_cap: usize) -> Result<Spectrum> {
    if h.dim() > dense_cap {
        return Err(Error::capacity("dense diagonalization", h.dim(), dense_cap));
    }
    diagonalize_dense(h.to_dense())
}

pub(crate) fn diagonalize_dense(dense: Mat<f64>) -> Result<Spectrum> {
    let eigen = dense
        .self_adjoint_eigen(Side::Lower)
        .map_err(|e| Error::Numeric(format!("eigensolver failed: {e:?}")))?;
    drop(dense);
    let energies: Vec<f64> = (0..eigen.S().dim()).map(|k| eigen.S()[k]).collect();
    if energies.iter().any(|e| !e.is_finite()) {
        return Err(Error::Numeric("non-finite eigenvalue".into()));
    }
    Ok(Spectrum { energies, eigen })
}

/// Schmidt-decomposition layout of a basis for a bottom-rows / top-rows cut.
///
/// Because particle number is fixed, the amplitude matrix over
/// (bottom pattern, top pattern) is block-diagonal in the number of
/// particles below the cut; each block is handled separately.
#[derive(Debug, Clone)]
pub struct Bipartition {
    rows_in_a: usize,
    block_shapes: Vec<(usize, usize)>,
    /// (block, row in block, column in block) for every basis ordinal.
    placement: Vec<(u32, u32, u32)>,
}

impl Bipartition {
    /// Subsystem A is the bottom `⌊L/2⌋` rows.
    pub fn bottom_half(basis: &Basis) -> Self {
        Self::bottom_rows(basis, basis.side() / 2)
    }

    pub fn bottom_rows(basis: &Basis, rows_in_a: usize) -> Self {
        let side = basis.side();
        let cut = rows_in_a.min(side) * side;
        let mut block_of_count: FxHashMap<usize, usize> = FxHashMap::default();
        let mut a_index: Vec<FxHashMap<Vec<u64>, u32>> = Vec::new();
        let mut b_index: Vec<FxHashMap<Vec<u64>, u32>> = Vec::new();
        let mut placement = Vec::with_capacity(basis.len());
        for k in 0..basis.len() {
            let words = basis.words(k);
            let (mut low, mut high) = (words.to_vec(), words.to_vec());
            for (w, (lo, hi)) in low.iter_mut().zip(high.iter_mut()).enumerate() {
                let start = w * bits::WORD_BITS;
                let mask = if cut <= start {
                    0
                } else if cut >= start + bits::WORD_BITS {
                    u64::MAX
                } else {
                    (1u64 << (cut - start)) - 1
                };
                *lo &= mask;
                *hi &= !mask;
            }
            let count = bits::popcount(&low);
            let next = block_of_count.len();
            let block = *block_of_count.entry(count).or_insert(next);
            if block == a_index.len() {
                a_index.push(FxHashMap::default());
                b_index.push(FxHashMap::default());
            }
            let na = a_index[block].len() as u32;
            let a = *a_index[block].entry(low).or_insert(na);
            let nb = b_index[block].len() as u32;
            let b = *b_index[block].entry(high).or_insert(nb);
            placement.push((block as u32, a, b));
        }
        let block_shapes = a_index.iter().zip(&b_index).map(|(a, b)| (a.len(), b.len())).collect();
        Bipartition {
            rows_in_a,
            block_shapes,
            placement,
        }
    }

    pub fn rows_in_a(&self) -> usize {
        self.rows_in_a
    }

    /// Distinct A and Ā restrictions, summed over blocks.
    pub fn pattern_counts(&self) -> (usize, usize) {
        self.block_shapes
            .iter()
            .fold((0, 0), |(a, b), &(x, y)| (a + x, b + y))
    }

    /// Squared Schmidt values of `state`, unsorted.
    pub fn schmidt_weights(&self, state: &[f64]) -> Result<Vec<f64>> {
        if state.len() != self.placement.len() {
            return Err(Error::DimensionMismatch {
                expected: self.placement.len(),
                found: state.len(),
            });
        }
        let mut blocks: Vec<Mat<f64>> = self
            .block_shapes
            .iter()
            .map(|&(r, c)| Mat::zeros(r, c))
            .collect();
        for (&(blk, a, b), &amp) in self.placement.iter().zip(state) {
            blocks[blk as usize][(a as usize, b as usize)] = amp;
        }
        let mut weights = Vec::new();
        for block in blocks {
            let (r, c) = (block.nrows(), block.ncols());
            if r == 1 || c == 1 {
                weights.push(block.col_iter().flat_map(|col| col.iter().map(|x| x * x).collect::<Vec<_>>()).sum());
                continue;
            }
            let gram = if r <= c {
                &block * block.transpose()
            } else {
                block.transpose() * &block
            };
            let eig = gram
                .self_adjoint_eigenvalues(Side::Lower)
                .map_err(|e| Error::Numeric(format!("Schmidt eigensolver failed: {e:?}")))?;
            weights.extend(eig);
        }
        Ok(weights)
    }

    /// Von Neumann entropy (natural log) of the reduced state on A.
    pub fn entropy(&self, state: &[f64]) -> Result<f64> {
        Ok(self
            .schmidt_weights(state)?
            .into_iter()
            .filter(|&p| p >= SCHMIDT_CUTOFF)
            .map(|p| -p * p.ln())
            .sum())
    }
}

/// Entanglement entropy of `state` between the bottom `⌊L/2⌋` rows and the
/// rest of the lattice.
pub fn entanglement_entropy(basis: &Basis, state: &[f64]) -> Result<f64> {
    Bipartition::bottom_half(basis).entropy(state)
}

/// Raw and normalized Edwards–Anderson order parameter.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EaValues {
    pub q_ea: f64,
    pub q: f64,
}

/// Edwards–Anderson evaluator with per-basis occupied-site lists cached.
#[derive(Debug, Clone)]
pub struct EaOrder {
    sites: usize,
    eta: f64,
    occupied: Vec<Vec<u16>>,
}

impl EaOrder {
    pub fn new(basis: &Basis) -> Self {
        EaOrder {
            sites: basis.site_count(),
            eta: basis.density(),
            occupied: (0..basis.len())
                .map(|k| basis.occupied_sites(k).map(|s| s as u16).collect())
                .collect(),
        }
    }

    /// `Q_EA = L⁻⁴ Σ_ij C_ij²` with `C_ij = ⟨σ_i σ_j⟩`, `σ = 2n - 1`, and the
    /// normalized `Q = (Q_EA - (2η-1)⁴) / (1 - (2η-1)⁴)`.
    ///
    /// `σ_i σ_j = 4 n_i n_j - 2 n_i - 2 n_j + 1`, so only occupied pairs need
    /// accumulating per configuration.
    pub fn evaluate(&self, state: &[f64]) -> Result<EaValues> {
        if state.len() != self.occupied.len() {
            return Err(Error::DimensionMismatch {
                expected: self.occupied.len(),
                found: state.len(),
            });
        }
        let base = (2.0 * self.eta - 1.0).powi(4);
        if (1.0 - base).abs() == 0.0 {
            return Err(Error::Domain(format!(
                "normalized EA order undefined at density {}",
                self.eta
            )));
        }
        let n = self.sites;
        let mut pair = vec![0.0f64; n * n];
        let mut total = 0.0;
        for (occ, &amp) in self.occupied.iter().zip(state) {
            let p = amp * amp;
            if p == 0.0 {
                continue;
            }
            total += p;
            for &a in occ {
                let row = &mut pair[a as usize * n..(a as usize + 1) * n];
                for &b in occ {
                    row[b as usize] += p;
                }
            }
        }
        let single: Vec<f64> = (0..n).map(|i| pair[i * n + i]).collect();
        let mut sum = 0.0;
        for i in 0..n {
            for j in 0..n {
                let c = 4.0 * pair[i * n + j] - 2.0 * single[i] - 2.0 * single[j] + total;
                sum += c * c;
            }
        }
        let q_ea = sum / (n * n) as f64;
        Ok(EaValues {
            q_ea,
            q: (q_ea - base) / (1.0 - base),
        })
    }
}

/// Edwards–Anderson order of `state` on `basis`.
pub fn ea_order(basis: &Basis, state: &[f64]) -> Result<EaValues> {
    EaOrder::new(basis).evaluate(state)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Scope {
    LargestFragment,
    AllFragments,
}

impl FromStr for Scope {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "largest-fragment" => Ok(Scope::LargestFragment),
            "all-fragments" => Ok(Scope::AllFragments),
            other => Err(Error::InvalidParameter(format!("unknown scope {other:?}"))),
        }
    }
}

impl fmt::Display for Scope {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Scope::LargestFragment => "largest-fragment",
            Scope::AllFragments => "all-fragments",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScanOptions {
    pub hopping: f64,
    pub dense_cap: usize,
    pub state_cap: usize,
    /// Eigenvalues closer than this share a degeneracy group.
    pub degeneracy_tol: f64,
}

impl Default for ScanOptions {
    fn default() -> Self {
        ScanOptions {
            hopping: 1.0,
            dense_cap: DEFAULT_DENSE_CAP,
            state_cap: DEFAULT_STATE_CAP,
            degeneracy_tol: 1e-9,
        }
    }
}

/// Diagnostics of one eigenstate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EigenstateDiagnostics {
    pub lambda: f64,
    pub fragment_id: usize,
    pub state_index: usize,
    pub energy: f64,
    pub energy_density: f64,
    pub entropy: f64,
    pub q: f64,
    pub q_ea: f64,
    /// Level index within the fragment; rows sharing it are degenerate and
    /// their entropy and order parameter depend on the eigensolver's basis.
    pub degeneracy_group: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SkippedFragment {
    pub fragment_id: usize,
    pub dim: usize,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScarScan {
    #[serde(rename = "L")]
    pub side: usize,
    #[serde(rename = "M")]
    pub particles: usize,
    pub scope: Scope,
    pub sector_dim: usize,
    /// `(fragment id, dimension)` of every fragment that was diagonalized.
    pub fragments: Vec<(usize, usize)>,
    pub skipped: Vec<SkippedFragment>,
    pub rows: Vec<EigenstateDiagnostics>,
}

impl ScarScan {
    pub fn is_partial(&self) -> bool {
        !self.skipped.is_empty()
    }
}

/// Diagnostics for every eigenstate of one basis at one interaction value.
pub fn fragment_diagnostics(
    lattice: &Lattice,
    basis: &Basis,
    lambda: f64,
    fragment_id: usize,
    options: &ScanOptions,
) -> Result<Vec<EigenstateDiagnostics>> {
    let h = SparseHamiltonian::build(lattice, basis, options.hopping, lambda)?;
    let spectrum = diagonalize(&h, options.dense_cap)?;
    drop(h);
    let cut = Bipartition::bottom_half(basis);
    let ea = EaOrder::new(basis);
    let groups = spectrum.degeneracy_groups(options.degeneracy_tol);
    let sites = basis.site_count() as f64;
    (0..spectrum.dim())
        .into_par_iter()
        .map(|k| {
            let v = spectrum.vector(k);
            let e = spectrum.energies()[k];
            let values = ea.evaluate(v)?;
            Ok(EigenstateDiagnostics {
                lambda,
                fragment_id,
                state_index: k,
                energy: e,
                energy_density: e / sites,
                entropy: cut.entropy(v)?,
                q: values.q,
                q_ea: values.q_ea,
                degeneracy_group: groups[k],
            })
        })
        .collect()
}

/// Eigenstate diagnostics of the `(L, M)` sector for each interaction
/// strength, over the largest fragment or over every fragment.
pub fn scar_scan(
    lattice: &Lattice,
    particles: usize,
    lambdas: &[f64],
    scope: Scope,
    options: &ScanOptions,
) -> Result<ScarScan> {
    let sector = enumerate_sector(lattice, particles, options.state_cap)?;
    if sector.is_empty() {
        return Err(Error::InvalidParameter(format!(
            "no valid configurations with M={particles} on L={}",
            lattice.side()
        )));
    }
    let dec = decompose_sector(lattice, &sector)?;
    let ids: Vec<usize> = match scope {
        Scope::LargestFragment => vec![dec.largest_id().expect("non-empty sector")],
        Scope::AllFragments => (0..dec.fragment_count()).collect(),
    };
    let mut fragments = Vec::new();
    let mut skipped = Vec::new();
    let mut rows = Vec::new();
    for &id in &ids {
        let dim = dec.fragment_sizes[id];
        if dim > options.dense_cap {
            let err = Error::capacity(
                format!("dense diagonalization of fragment {id} (L={}, M={particles})", lattice.side()),
                dim,
                options.dense_cap,
            );
            if scope == Scope::LargestFragment {
                return Err(err);
            }
            skipped.push(SkippedFragment {
                fragment_id: id,
                dim,
                reason: err.to_string(),
            });
            continue;
        }
        fragments.push((id, dim));
    }
    for &lambda in lambdas {
        for &(id, _) in &fragments {
            let basis = dec.fragment_basis(&sector, id);
            rows.extend(fragment_diagnostics(lattice, &basis, lambda, id, options)?);
        }
    }
    Ok(ScarScan {
        side: lattice.side(),
        particles,
        scope,
        sector_dim: sector.len(),
        fragments,
        skipped,
        rows,
    })
}
