//! Reference implementations used as test oracles. They work on plain
//! `u64` occupation masks with explicit coordinate arithmetic and share no
//! code with the library beyond its public types.

#![allow(dead_code)]

use std::collections::{BTreeSet, HashMap, VecDeque};

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub type Mask = u64;

pub fn occupied(mask: Mask, site: usize) -> bool {
    mask >> site & 1 == 1
}

pub fn neighbours(l: usize, site: usize) -> Vec<usize> {
    let (r, c) = (site / l, site % l);
    let mut out = Vec::new();
    if r > 0 {
        out.push(site - l);
    }
    if r + 1 < l {
        out.push(site + l);
    }
    if c > 0 {
        out.push(site - 1);
    }
    if c + 1 < l {
        out.push(site + 1);
    }
    out
}

pub fn is_valid(l: usize, mask: Mask) -> bool {
    (0..l * l).all(|s| !occupied(mask, s) || neighbours(l, s).iter().all(|&t| !occupied(mask, t)))
}

/// All valid masks with `m` particles, by filtering every subset.
pub fn brute_sector(l: usize, m: usize) -> Vec<Mask> {
    assert!(l * l <= 25, "brute force only for tiny lattices");
    (0u64..1 << (l * l))
        .filter(|x| x.count_ones() as usize == m && is_valid(l, *x))
        .collect()
}

/// Valid masks reachable by moving one particle to an empty neighbour.
pub fn moves(l: usize, mask: Mask) -> Vec<Mask> {
    let mut out = Vec::new();
    for s in (0..l * l).filter(|&s| occupied(mask, s)) {
        for t in neighbours(l, s) {
            if occupied(mask, t) {
                continue;
            }
            let next = mask & !(1 << s) | 1 << t;
            if is_valid(l, next) {
                out.push(next);
            }
        }
    }
    out
}

/// Breadth-first closure of `start` under [`moves`].
pub fn closure(l: usize, start: Mask) -> BTreeSet<Mask> {
    let mut seen = BTreeSet::from([start]);
    let mut queue = VecDeque::from([start]);
    while let Some(x) = queue.pop_front() {
        for y in moves(l, x) {
            if seen.insert(y) {
                queue.push_back(y);
            }
        }
    }
    seen
}

pub fn nnn_count(l: usize, mask: Mask) -> usize {
    let mut n = 0;
    for r in 0..l {
        for c in 0..l {
            if !occupied(mask, r * l + c) || r + 1 == l {
                continue;
            }
            if c + 1 < l && occupied(mask, (r + 1) * l + c + 1) {
                n += 1;
            }
            if c > 0 && occupied(mask, (r + 1) * l + c - 1) {
                n += 1;
            }
        }
    }
    n
}

/// Sparse Hamiltonian over an explicit list of masks as adjacency lists.
pub struct OracleH {
    pub diag: Vec<f64>,
    pub adj: Vec<Vec<(usize, f64)>>,
}

impl OracleH {
    pub fn new(l: usize, states: &[Mask], j: f64, lambda: f64) -> Self {
        let index: HashMap<Mask, usize> = states.iter().enumerate().map(|(k, &x)| (x, k)).collect();
        let diag = states.iter().map(|&x| lambda * nnn_count(l, x) as f64).collect();
        let adj = states
            .iter()
            .map(|&x| {
                moves(l, x)
                    .into_iter()
                    .filter_map(|y| index.get(&y).map(|&k| (k, j)))
                    .collect()
            })
            .collect();
        OracleH { diag, adj }
    }

    pub fn dim(&self) -> usize {
        self.diag.len()
    }

    pub fn apply(&self, v: &[Complex64]) -> Vec<Complex64> {
        (0..self.dim())
            .map(|r| {
                let mut acc = v[r] * self.diag[r];
                for &(c, x) in &self.adj[r] {
                    acc += v[c] * x;
                }
                acc
            })
            .collect()
    }

    pub fn dense(&self) -> Vec<Vec<f64>> {
        let n = self.dim();
        let mut m = vec![vec![0.0; n]; n];
        for r in 0..n {
            m[r][r] = self.diag[r];
            for &(c, x) in &self.adj[r] {
                m[r][c] += x;
            }
        }
        m
    }

    /// Gershgorin bound on the spectral radius.
    pub fn norm_bound(&self) -> f64 {
        (0..self.dim())
            .map(|r| self.diag[r].abs() + self.adj[r].iter().map(|(_, x)| x.abs()).sum::<f64>())
            .fold(0.0, f64::max)
    }

    /// `exp(-iHt) v` by short Taylor steps of norm at most 1/2, each summed
    /// until the terms fall below 1e-20.
    pub fn expm_taylor(&self, v: &[Complex64], t: f64) -> Vec<Complex64> {
        let bound = self.norm_bound().max(1e-300);
        let steps = ((bound * t.abs()) / 0.5).ceil().max(1.0) as usize;
        let h = t / steps as f64;
        let mut psi = v.to_vec();
        for _ in 0..steps {
            let mut term = psi.clone();
            let mut sum = psi.clone();
            for k in 1..60 {
                let ht = self.apply(&term);
                let scale = Complex64::new(0.0, -h / k as f64);
                term = ht.into_iter().map(|z| z * scale).collect();
                for (s, x) in sum.iter_mut().zip(&term) {
                    *s += x;
                }
                if term.iter().map(|z| z.norm()).fold(0.0, f64::max) < 1e-20 {
                    break;
                }
            }
            psi = sum;
        }
        psi
    }
}

/// Eigenvalues of a real symmetric matrix by cyclic Jacobi rotations.
pub fn jacobi_eigenvalues(mut a: Vec<Vec<f64>>) -> Vec<f64> {
    let n = a.len();
    for _sweep in 0..100 {
        let off: f64 = (0..n)
            .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| a[i][j] * a[i][j])
            .sum();
        if off < 1e-30 {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                if a[p][q].abs() < 1e-300 {
                    continue;
                }
                let theta = (a[q][q] - a[p][p]) / (2.0 * a[p][q]);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let (akp, akq) = (a[k][p], a[k][q]);
                    a[k][p] = c * akp - s * akq;
                    a[k][q] = s * akp + c * akq;
                }
                for k in 0..n {
                    let (apk, aqk) = (a[p][k], a[q][k]);
                    a[p][k] = c * apk - s * aqk;
                    a[q][k] = s * apk + c * aqk;
                }
            }
        }
    }
    let mut e: Vec<f64> = (0..n).map(|i| a[i][i]).collect();
    e.sort_by(f64::total_cmp);
    e
}

/// Entropy of the bottom `rows` rows from the explicit reduced density
/// matrix `ρ_A = Tr_Ā |ψ⟩⟨ψ|`.
pub fn rdm_entropy(l: usize, rows: usize, states: &[Mask], psi: &[f64]) -> f64 {
    let cut = rows * l;
    let low = |x: Mask| x & ((1u64 << cut) - 1);
    let high = |x: Mask| x >> cut;
    let a_patterns: Vec<Mask> = states.iter().map(|&x| low(x)).collect::<BTreeSet<_>>().into_iter().collect();
    let a_index: HashMap<Mask, usize> = a_patterns.iter().enumerate().map(|(k, &x)| (x, k)).collect();
    let n = a_patterns.len();
    let mut rho = vec![vec![0.0; n]; n];
    for (x, &px) in states.iter().zip(psi) {
        for (y, &py) in states.iter().zip(psi) {
            if high(*x) == high(*y) {
                rho[a_index[&low(*x)]][a_index[&low(*y)]] += px * py;
            }
        }
    }
    jacobi_eigenvalues(rho)
        .into_iter()
        .filter(|&p| p >= 1e-14)
        .map(|p| -p * p.ln())
        .sum()
}

/// `(Q_EA, Q)` by summing `p_c σ_i σ_j` over configurations for every pair.
pub fn ea_direct(l: usize, states: &[Mask], psi: &[f64]) -> (f64, f64) {
    let n = l * l;
    let m = states[0].count_ones() as f64;
    let eta = m / n as f64;
    let sigma = |x: Mask, i: usize| if occupied(x, i) { 1.0 } else { -1.0 };
    let mut q_ea = 0.0;
    for i in 0..n {
        for j in 0..n {
            let c: f64 = states.iter().zip(psi).map(|(&x, a)| a * a * sigma(x, i) * sigma(x, j)).sum();
            q_ea += c * c;
        }
    }
    q_ea /= (n * n) as f64;
    let base = (2.0 * eta - 1.0).powi(4);
    (q_ea, (q_ea - base) / (1.0 - base))
}

/// Masks of a library basis, in basis order.
pub fn basis_masks(basis: &qhd_core::Basis) -> Vec<Mask> {
    basis
        .configs()
        .map(|c| c.occupied_sites().fold(0u64, |acc, s| acc | 1 << s))
        .collect()
}

pub fn config_of(l: usize, mask: Mask) -> qhd_core::Configuration {
    let sites: Vec<usize> = (0..l * l).filter(|&s| occupied(mask, s)).collect();
    qhd_core::Configuration::from_sites(l, &sites).unwrap()
}

/// Seeded random unit vector with entries drawn from [-1, 1).
pub fn random_unit_vector(seed: u64, n: usize) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let v: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    v.into_iter().map(|x| x / norm).collect()
}
