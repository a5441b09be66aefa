//! Sparse Hamiltonian of the interacting hard-disk model on a basis.
//!
//! Off-diagonal entries carry the hopping amplitude `J` for every allowed
//! hop between basis configurations; the diagonal is `λ` times the number of
//! occupied diagonal (next-to-nearest-neighbour) pairs. Only the strict
//! upper triangle is stored, in compressed rows, and applied symmetrically.

use std::io::{self, BufRead, Write};
use std::ops::{Add, Mul};

use faer::Mat;

use crate::lattice::Lattice;
use crate::state_space::{apply_hop, Basis};
use crate::{Error, Result};

/// Default budget for stored off-diagonal entries.
pub const DEFAULT_NONZERO_CAP: usize = 1_000_000_000;

/// Real symmetric sparse matrix, upper triangle in CSR form.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseHamiltonian {
    dim: usize,
    diagonal: Vec<f64>,
    row_ptr: Vec<usize>,
    cols: Vec<u32>,
    values: Vec<f64>,
}

/// Scalars a [`SparseHamiltonian`] can act on.
pub trait Scalar: Copy + Default + Add<Output = Self> + Mul<f64, Output = Self> {}
impl<T: Copy + Default + Add<Output = T> + Mul<f64, Output = T>> Scalar for T {}

impl SparseHamiltonian {
    /// Assemble `H` for `basis` with hopping `hopping` (J) and diagonal
    /// interaction `interaction` (λ).
    pub fn build(lattice: &Lattice, basis: &Basis, hopping: f64, interaction: f64) -> Result<Self> {
        Self::build_with_cap(lattice, basis, hopping, interaction, DEFAULT_NONZERO_CAP)
    }

    pub fn build_with_cap(
        lattice: &Lattice,
        basis: &Basis,
        hopping: f64,
        interaction: f64,
        nonzero_cap: usize,
    ) -> Result<Self> {
        basis.check_lattice(lattice)?;
        if basis.is_empty() {
            return Err(Error::InvalidParameter("empty basis".into()));
        }
        if !hopping.is_finite() || !interaction.is_finite() {
            return Err(Error::InvalidParameter("non-finite coupling".into()));
        }
        let dim = basis.len();
        if dim > u32::MAX as usize {
            return Err(Error::capacity("Hamiltonian dimension", dim, u32::MAX as usize));
        }
        let mut diagonal = Vec::with_capacity(dim);
        let mut row_ptr = Vec::with_capacity(dim + 1);
        let mut cols: Vec<u32> = Vec::new();
        row_ptr.push(0);
        let mut hops = Vec::new();
        let mut scratch = vec![0u64; lattice.words()];
        for a in 0..dim {
            let words = basis.words(a);
            diagonal.push(interaction * lattice.occupied_nnn_count(words) as f64);
            hops.clear();
            lattice.push_hops(words, &mut hops);
            let start = cols.len();
            for &hop in &hops {
                apply_hop(words, hop, &mut scratch);
                if let Some(b) = basis.position(&scratch) {
                    if b > a {
                        cols.push(b as u32);
                    }
                }
            }
            cols[start..].sort_unstable();
            if cols.len() > nonzero_cap {
                return Err(Error::capacity(
                    "Hamiltonian off-diagonal entries",
                    format!(">{nonzero_cap}"),
                    nonzero_cap,
                ));
            }
            row_ptr.push(cols.len());
        }
        let values = vec![hopping; cols.len()];
        Ok(SparseHamiltonian {
            dim,
            diagonal,
            row_ptr,
            cols,
            values,
        })
    }

    /// Build from a diagonal and upper-triangle triplets `(row, col, value)`
    /// with `row < col`. Duplicate positions are summed.
    pub fn from_upper_triplets(diagonal: Vec<f64>, triplets: &[(usize, usize, f64)]) -> Result<Self> {
        let dim = diagonal.len();
        let mut sorted: Vec<(usize, usize, f64)> = Vec::with_capacity(triplets.len());
        for &(r, c, v) in triplets {
            if r >= c || c >= dim {
                return Err(Error::InvalidParameter(format!(
                    "triplet ({r}, {c}) is not in the strict upper triangle of a {dim}x{dim} matrix"
                )));
            }
            sorted.push((r, c, v));
        }
        sorted.sort_by(|x, y| (x.0, x.1).cmp(&(y.0, y.1)));
        let mut row_ptr = vec![0usize; dim + 1];
        let mut cols = Vec::with_capacity(sorted.len());
        let mut values: Vec<f64> = Vec::with_capacity(sorted.len());
        let mut last: Option<(usize, usize)> = None;
        for (r, c, v) in sorted {
            if last == Some((r, c)) {
                *values.last_mut().expect("previous entry") += v;
                continue;
            }
            last = Some((r, c));
            cols.push(c as u32);
            values.push(v);
            row_ptr[r + 1] += 1;
        }
        for r in 0..dim {
            row_ptr[r + 1] += row_ptr[r];
        }
        Ok(SparseHamiltonian {
            dim,
            diagonal,
            row_ptr,
            cols,
            values,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn diagonal(&self) -> &[f64] {
        &self.diagonal
    }

    /// Number of stored strict-upper-triangle entries.
    pub fn upper_nonzeros(&self) -> usize {
        self.cols.len()
    }

    /// Stored upper-triangle entries `(row, col, value)`, row-major.
    pub fn upper_entries(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        (0..self.dim).flat_map(move |r| {
            (self.row_ptr[r]..self.row_ptr[r + 1]).map(move |k| (r, self.cols[k] as usize, self.values[k]))
        })
    }

    /// `out = H x`.
    pub fn apply_into<T: Scalar>(&self, x: &[T], out: &mut [T]) -> Result<()> {
        if x.len() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                found: x.len(),
            });
        }
        if out.len() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                found: out.len(),
            });
        }
        for (o, (&xi, &d)) in out.iter_mut().zip(x.iter().zip(&self.diagonal)) {
            *o = xi * d;
        }
        for r in 0..self.dim {
            let xr = x[r];
            let mut acc = out[r];
            for k in self.row_ptr[r]..self.row_ptr[r + 1] {
                let c = self.cols[k] as usize;
                let v = self.values[k];
                acc = acc + x[c] * v;
                out[c] = out[c] + xr * v;
            }
            out[r] = acc;
        }
        Ok(())
    }

    /// `H v` as a new vector.
    pub fn apply<T: Scalar>(&self, v: &[T]) -> Result<Vec<T>> {
        let mut out = vec![T::default(); self.dim];
        self.apply_into(v, &mut out)?;
        Ok(out)
    }

    /// Dense copy of the full symmetric matrix.
    pub fn to_dense(&self) -> Mat<f64> {
        let mut m = Mat::<f64>::zeros(self.dim, self.dim);
        for (r, &d) in self.diagonal.iter().enumerate() {
            m[(r, r)] = d;
        }
        for (r, c, v) in self.upper_entries() {
            m[(r, c)] += v;
            m[(c, r)] += v;
        }
        m
    }

    /// Largest absolute row sum, an upper bound on the spectral radius.
    pub fn row_sum_bound(&self) -> f64 {
        let mut sums: Vec<f64> = self.diagonal.iter().map(|d| d.abs()).collect();
        for (r, c, v) in self.upper_entries() {
            sums[r] += v.abs();
            sums[c] += v.abs();
        }
        sums.into_iter().fold(0.0, f64::max)
    }

    /// Write the matrix as text: a comment line, `dim nnz`, then one
    /// `row col value` line per stored entry (diagonal first, then the strict
    /// upper triangle), 0-based.
    pub fn write_triplets<W: Write>(&self, mut w: W) -> io::Result<()> {
        let diag_nnz = self.diagonal.iter().filter(|&&d| d != 0.0).count();
        writeln!(w, "# symmetric sparse matrix: upper triangle, 0-based row col value")?;
        writeln!(w, "{} {}", self.dim, diag_nnz + self.cols.len())?;
        for (r, &d) in self.diagonal.iter().enumerate() {
            if d != 0.0 {
                writeln!(w, "{r} {r} {}", crate::io::fmt_f64(d))?;
            }
        }
        for (r, c, v) in self.upper_entries() {
            writeln!(w, "{r} {c} {}", crate::io::fmt_f64(v))?;
        }
        Ok(())
    }

    /// Read the format produced by [`write_triplets`](Self::write_triplets).
    pub fn read_triplets<R: BufRead>(r: R) -> Result<Self> {
        let mut lines = r.lines().filter(|l| match l {
            Ok(text) => !text.trim_start().starts_with('#') && !text.trim().is_empty(),
            Err(_) => true,
        });
        let bad = |msg: &str| Error::InvalidParameter(format!("matrix dump: {msg}"));
        let header = lines.next().ok_or_else(|| bad("missing header"))??;
        let mut it = header.split_whitespace();
        let dim: usize = it.next().and_then(|t| t.parse().ok()).ok_or_else(|| bad("bad dim"))?;
        let nnz: usize = it.next().and_then(|t| t.parse().ok()).ok_or_else(|| bad("bad nnz"))?;
        let mut diagonal = vec![0.0; dim];
        let mut upper = Vec::with_capacity(nnz);
        for line in lines.take(nnz) {
            let line = line?;
            let f: Vec<&str> = line.split_whitespace().collect();
            if f.len() != 3 {
                return Err(bad("expected `row col value`"));
            }
            let r: usize = f[0].parse().map_err(|_| bad("bad row"))?;
            let c: usize = f[1].parse().map_err(|_| bad("bad col"))?;
            let v: f64 = f[2].parse().map_err(|_| bad("bad value"))?;
            if r == c {
                if r >= dim {
                    return Err(bad("row out of range"));
                }
                diagonal[r] = v;
            } else {
                upper.push((r, c, v));
            }
        }
        Self::from_upper_triplets(diagonal, &upper)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::Configuration;
    use crate::state_space::{enumerate_sector, fragment_of, DEFAULT_STATE_CAP};
    use num_complex::Complex64;

    #[test]
    fn single_frozen_state_gets_interaction_energy() {
        let lat = Lattice::new(2).unwrap();
        let config = Configuration::from_coords(2, &[(0, 0), (1, 1)]).unwrap();
        let frag = fragment_of(&lat, &config, DEFAULT_STATE_CAP).unwrap();
        let h = SparseHamiltonian::build(&lat, &frag, 1.0, 0.3).unwrap();
        assert_eq!(h.dim(), 1);
        assert_eq!(h.diagonal(), &[0.3]);
        assert_eq!(h.upper_nonzeros(), 0);
        assert_eq!(h.apply(&[1.0]).unwrap(), vec![0.3]);
    }

    #[test]
    fn single_particle_on_plaquette_is_four_cycle() {
        let lat = Lattice::new(2).unwrap();
        let sector = enumerate_sector(&lat, 1, DEFAULT_STATE_CAP).unwrap();
        let h = SparseHamiltonian::build(&lat, &sector, 1.0, 0.7).unwrap();
        let dense = h.to_dense();
        // Ordinals follow the site index: 0 and 3 are diagonal partners.
        let expected = [
            [0.0, 1.0, 1.0, 0.0],
            [1.0, 0.0, 0.0, 1.0],
            [1.0, 0.0, 0.0, 1.0],
            [0.0, 1.0, 1.0, 0.0],
        ];
        for r in 0..4 {
            for c in 0..4 {
                assert_eq!(dense[(r, c)], expected[r][c]);
            }
        }
    }

    #[test]
    fn zero_couplings_give_zero_matrix() {
        let lat = Lattice::new(3).unwrap();
        let sector = enumerate_sector(&lat, 2, DEFAULT_STATE_CAP).unwrap();
        let h = SparseHamiltonian::build(&lat, &sector, 0.0, 0.0).unwrap();
        let v: Vec<Complex64> = (0..h.dim()).map(|k| Complex64::new(k as f64, 1.0)).collect();
        assert!(h.apply(&v).unwrap().iter().all(|z| z.norm() == 0.0));
    }

    #[test]
    fn zero_interaction_has_zero_diagonal() {
        let lat = Lattice::new(4).unwrap();
        let sector = enumerate_sector(&lat, 5, DEFAULT_STATE_CAP).unwrap();
        let h = SparseHamiltonian::build(&lat, &sector, 1.0, 0.0).unwrap();
        assert!(h.diagonal().iter().all(|&d| d == 0.0));
    }

    #[test]
    fn off_diagonal_matches_hop_graph() {
        let lat = Lattice::new(4).unwrap();
        let sector = enumerate_sector(&lat, 4, DEFAULT_STATE_CAP).unwrap();
        let h = SparseHamiltonian::build(&lat, &sector, 1.0, 0.2).unwrap();
        let dense = h.to_dense();
        for a in 0..sector.len() {
            let mut targets = sector.hop_targets(&lat, a);
            targets.sort_unstable();
            let row: Vec<usize> = (0..sector.len())
                .filter(|&b| b != a && dense[(a, b)] != 0.0)
                .collect();
            assert_eq!(row, targets);
        }
    }

    #[test]
    fn dimension_mismatch() {
        let h = SparseHamiltonian::from_upper_triplets(vec![1.0, 2.0], &[(0, 1, 0.5)]).unwrap();
        assert!(matches!(
            h.apply(&[1.0]),
            Err(Error::DimensionMismatch { expected: 2, found: 1 })
        ));
        assert!(SparseHamiltonian::from_upper_triplets(vec![0.0; 2], &[(1, 0, 1.0)]).is_err());
    }

    #[test]
    fn triplet_dump_round_trips() {
        let lat = Lattice::new(3).unwrap();
        let sector = enumerate_sector(&lat, 3, DEFAULT_STATE_CAP).unwrap();
        let h = SparseHamiltonian::build(&lat, &sector, 1.0, 0.37).unwrap();
        let mut buf = Vec::new();
        h.write_triplets(&mut buf).unwrap();
        let back = SparseHamiltonian::read_triplets(&buf[..]).unwrap();
        assert_eq!(back, h);
    }
}
