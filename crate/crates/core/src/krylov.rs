//! Real-time evolution with a Lanczos short-time propagator.
//!
//! Each step of length `dt` builds an `m`-dimensional Krylov space of the
//! current state with full reorthogonalization, exponentiates the resulting
//! tridiagonal matrix by dense eigendecomposition and maps back. The step is
//! split into sub-steps whenever the standard a-posteriori estimate
//! `β₀ β_m |[exp(-iTτ)]_{m,1}|` exceeds `error_tol · τ`, so the accuracy of
//! the output does not depend on how `dt` compares to the spectral width.

use faer::{Mat, Side};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::hamiltonian::SparseHamiltonian;
use crate::lattice::{Configuration, Lattice};
use crate::state_space::{fragment_of, Basis, DEFAULT_STATE_CAP};
use crate::{Error, Result};

/// Settings of the short-time propagator.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PropagatorSettings {
    /// Output time step in units of `1/J`.
    pub dt: f64,
    /// Krylov dimension `m`.
    pub krylov_dim: usize,
    /// Residual norm below which the Krylov space is treated as invariant.
    pub breakdown_tol: f64,
    /// Allowed local error per unit time.
    pub error_tol: f64,
}

impl Default for PropagatorSettings {
    fn default() -> Self {
        PropagatorSettings {
            dt: 0.1,
            krylov_dim: 7,
            breakdown_tol: 1e-12,
            error_tol: 1e-12,
        }
    }
}

impl PropagatorSettings {
    pub fn validate(&self) -> Result<()> {
        if !(self.dt.is_finite() && self.dt > 0.0) {
            return Err(Error::InvalidParameter(format!("dt must be positive, got {}", self.dt)));
        }
        if !(2..=50).contains(&self.krylov_dim) {
            return Err(Error::InvalidParameter(format!(
                "Krylov dimension must be in 2..=50, got {}",
                self.krylov_dim
            )));
        }
        if !(self.breakdown_tol > 0.0 && self.error_tol > 0.0) {
            return Err(Error::InvalidParameter("tolerances must be positive".into()));
        }
        Ok(())
    }
}

/// Bookkeeping from one call to [`Propagator::advance`].
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct StepInfo {
    pub substeps: usize,
    pub matvecs: usize,
    /// Sum of the accepted local error estimates.
    pub error_estimate: f64,
}

/// Reusable workspace for Krylov propagation on one dimension.
pub struct Propagator {
    settings: PropagatorSettings,
    dim: usize,
    basis: Vec<Vec<Complex64>>,
    work: Vec<Complex64>,
}

fn dot(a: &[Complex64], b: &[Complex64]) -> Complex64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

fn norm(a: &[Complex64]) -> f64 {
    a.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

impl Propagator {
    pub fn new(settings: PropagatorSettings, dim: usize) -> Result<Self> {
        settings.validate()?;
        let m = settings.krylov_dim.min(dim.max(1));
        Ok(Propagator {
            settings,
            dim,
            basis: vec![vec![Complex64::default(); dim]; m],
            work: vec![Complex64::default(); dim],
        })
    }

    pub fn settings(&self) -> &PropagatorSettings {
        &self.settings
    }

    /// Advance `psi` by one output step `dt` and renormalize.
    pub fn step(&mut self, h: &SparseHamiltonian, psi: &mut [Complex64]) -> Result<StepInfo> {
        let dt = self.settings.dt;
        let info = self.advance(h, psi, dt)?;
        let n = norm(psi);
        if !n.is_finite() || n == 0.0 {
            return Err(Error::Numeric(format!("state norm became {n}")));
        }
        psi.iter_mut().for_each(|z| *z /= n);
        Ok(info)
    }

    /// Apply `exp(-i H duration)` to `psi` without renormalizing.
    pub fn advance(&mut self, h: &SparseHamiltonian, psi: &mut [Complex64], duration: f64) -> Result<StepInfo> {
        if h.dim() != self.dim || psi.len() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                found: if h.dim() != self.dim { h.dim() } else { psi.len() },
            });
        }
        let mut info = StepInfo::default();
        let mut remaining = duration;
        let min_tau = duration * 1e-9;
        while remaining > 0.0 {
            let beta0 = norm(psi);
            if beta0 == 0.0 {
                return Ok(info);
            }
            if !beta0.is_finite() {
                return Err(Error::Numeric("non-finite state".into()));
            }
            let (alpha, beta, residual) = self.lanczos(h, psi, beta0, &mut info)?;
            let k = alpha.len();
            let (energies, vectors) = tridiagonal_eigen(&alpha, &beta)?;
            let coefficients = |tau: f64| -> Vec<Complex64> {
                (0..k)
                    .map(|i| {
                        (0..k)
                            .map(|j| {
                                Complex64::from_polar(vectors[(i, j)] * vectors[(0, j)], -energies[j] * tau)
                            })
                            .sum()
                    })
                    .collect()
            };
            let mut tau = remaining;
            let mut c = coefficients(tau);
            let mut err = beta0 * residual.unwrap_or(0.0) * c[k - 1].norm();
            // The estimate cannot resolve errors below round-off in `c`.
            let noise = 32.0 * f64::EPSILON * beta0;
            while err > (self.settings.error_tol * tau).max(noise) {
                let shrink = 0.9 * (self.settings.error_tol * tau / err).powf(1.0 / (k as f64 - 1.0).max(1.0));
                tau *= shrink.clamp(0.1, 0.9);
                if tau < min_tau {
                    return Err(Error::Numeric(format!(
                        "Krylov sub-step fell below {min_tau:e} (error estimate {err:e})"
                    )));
                }
                c = coefficients(tau);
                err = beta0 * residual.unwrap_or(0.0) * c[k - 1].norm();
            }
            for (p, out) in psi.iter_mut().enumerate() {
                let mut acc = Complex64::default();
                for (i, ci) in c.iter().enumerate() {
                    acc += self.basis[i][p] * ci;
                }
                *out = acc * beta0;
            }
            if psi.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
                return Err(Error::Numeric("non-finite amplitude after Krylov step".into()));
            }
            info.substeps += 1;
            info.error_estimate += err;
            // Guard against round-off leaving a sliver of time behind.
            remaining = if tau >= remaining * (1.0 - 1e-12) { 0.0 } else { remaining - tau };
        }
        Ok(info)
    }

    /// Build the Lanczos basis of `psi`; returns the tridiagonal entries and
    /// the residual norm after the last vector (`None` on breakdown, where
    /// the space is invariant and the projection exact).
    fn lanczos(
        &mut self,
        h: &SparseHamiltonian,
        psi: &[Complex64],
        beta0: f64,
        info: &mut StepInfo,
    ) -> Result<(Vec<f64>, Vec<f64>, Option<f64>)> {
        let m = self.basis.len();
        for (b, &p) in self.basis[0].iter_mut().zip(psi) {
            *b = p / beta0;
        }
        let mut alpha = Vec::with_capacity(m);
        let mut beta = Vec::with_capacity(m);
        for j in 0..m {
            h.apply_into(&self.basis[j], &mut self.work)?;
            info.matvecs += 1;
            if j > 0 {
                let b = beta[j - 1];
                for (w, v) in self.work.iter_mut().zip(&self.basis[j - 1]) {
                    *w -= v * b;
                }
            }
            let a = dot(&self.basis[j], &self.work).re;
            for (w, v) in self.work.iter_mut().zip(&self.basis[j]) {
                *w -= v * a;
            }
            for i in 0..=j {
                let c = dot(&self.basis[i], &self.work);
                for (w, v) in self.work.iter_mut().zip(&self.basis[i]) {
                    *w -= v * c;
                }
            }
            alpha.push(a);
            let b = norm(&self.work);
            if !b.is_finite() {
                return Err(Error::Numeric("non-finite Lanczos residual".into()));
            }
            if b <= self.settings.breakdown_tol || j + 1 == self.dim {
                return Ok((alpha, beta, None));
            }
            if j + 1 == m {
                return Ok((alpha, beta, Some(b)));
            }
            beta.push(b);
            for (next, w) in self.basis[j + 1].iter_mut().zip(&self.work) {
                *next = w / b;
            }
        }
        unreachable!("loop returns on its last iteration")
    }
}

/// Eigen-decomposition of the symmetric tridiagonal matrix with diagonal
/// `alpha` and off-diagonal `beta`.
fn tridiagonal_eigen(alpha: &[f64], beta: &[f64]) -> Result<(Vec<f64>, Mat<f64>)> {
    let k = alpha.len();
    let t = Mat::<f64>::from_fn(k, k, |i, j| {
        if i == j {
            alpha[i]
        } else if i + 1 == j {
            beta[i]
        } else if j + 1 == i {
            beta[j]
        } else {
            0.0
        }
    });
    let eig = t
        .self_adjoint_eigen(Side::Lower)
        .map_err(|e| Error::Numeric(format!("tridiagonal eigensolver failed: {e:?}")))?;
    let energies = (0..k).map(|i| eig.S()[i]).collect();
    Ok((energies, eig.U().to_owned()))
}

/// One step of length `settings.dt` as a new vector.
pub fn step(h: &SparseHamiltonian, psi: &[Complex64], settings: &PropagatorSettings) -> Result<Vec<Complex64>> {
    let mut prop = Propagator::new(*settings, h.dim())?;
    let mut out = psi.to_vec();
    prop.step(h, &mut out)?;
    Ok(out)
}

/// Autocorrelation of site occupations against a basis configuration:
/// `(1/L²) Σ_i (2n_i(0) - 1)(2⟨n_i⟩ - 1) - (2η - 1)²`.
pub fn autocorrelation(occupations: &[f64], initial: &Configuration) -> Result<f64> {
    let n = initial.site_count();
    if occupations.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: occupations.len(),
        });
    }
    let eta = initial.density();
    let sum: f64 = occupations
        .iter()
        .enumerate()
        .map(|(i, &occ)| {
            let sign = if initial.is_occupied(i) { 1.0 } else { -1.0 };
            sign * (2.0 * occ - 1.0)
        })
        .sum();
    Ok(sum / n as f64 - g_star(eta))
}

/// The subtracted constant `(2η - 1)²`.
pub fn g_star(eta: f64) -> f64 {
    (2.0 * eta - 1.0).powi(2)
}

/// `⟨n_i⟩` for every site, given basis amplitudes.
pub fn site_occupations(basis: &Basis, psi: &[Complex64]) -> Result<Vec<f64>> {
    if psi.len() != basis.len() {
        return Err(Error::DimensionMismatch {
            expected: basis.len(),
            found: psi.len(),
        });
    }
    let total: f64 = psi.iter().map(|z| z.norm_sqr()).sum();
    let mut occ = vec![0.0; basis.site_count()];
    if total == 0.0 {
        return Ok(occ);
    }
    for (k, amp) in psi.iter().enumerate() {
        let p = amp.norm_sqr() / total;
        if p == 0.0 {
            continue;
        }
        for s in basis.occupied_sites(k) {
            occ[s] += p;
        }
    }
    Ok(occ)
}

/// Per-basis-state weight `g_c` with `G(t) = Σ_c |ψ_c|² g_c`.
fn autocorrelation_weights(basis: &Basis, initial: &Configuration) -> Vec<f64> {
    let n = basis.site_count() as f64;
    let eta = initial.density();
    let initial_occupied = initial.particle_count() as f64;
    (0..basis.len())
        .map(|k| {
            // Σ_i s_i (2 n_i(c) - 1) with s_i = ±1 from the initial state.
            let overlap = basis.occupied_sites(k).filter(|&s| initial.is_occupied(s)).count() as f64;
            let m = basis.particles() as f64;
            // Σ_i s_i·2n_i(c) = 2(overlap - (m - overlap)); Σ_i s_i = 2M0 - n.
            let signed = 2.0 * (2.0 * overlap - m) - (2.0 * initial_occupied - n);
            signed / n - g_star(eta)
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvolveOptions {
    /// Times at which to record all site occupations; snapped to the step grid.
    pub snapshot_times: Vec<f64>,
    /// Start of the long-time averaging window; defaults to `t_max / 2`.
    pub window_start: Option<f64>,
    /// Record `⟨H⟩` at every step.
    pub track_energy: bool,
    /// Record `Σ_i ⟨n_i⟩` at every step.
    pub track_particle_number: bool,
    /// Fragment size budget.
    pub state_cap: usize,
}

impl Default for EvolveOptions {
    fn default() -> Self {
        EvolveOptions {
            snapshot_times: Vec::new(),
            window_start: None,
            track_energy: true,
            track_particle_number: false,
            state_cap: DEFAULT_STATE_CAP,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Snapshot {
    pub time: f64,
    pub occupations: Vec<f64>,
}

/// Output of [`evolve`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimeSeries {
    #[serde(rename = "L")]
    pub side: usize,
    #[serde(rename = "M")]
    pub particles: usize,
    pub eta: f64,
    pub g_star: f64,
    pub hopping: f64,
    pub interaction: f64,
    pub settings: PropagatorSettings,
    pub fragment_dim: usize,
    pub times: Vec<f64>,
    pub g: Vec<f64>,
    #[serde(skip_serializing_if = "Vec::is_empty", default)]
    pub energy: Vec<f64>,
    #[serde(skip_serializing_if = "Vec::is_empty", default)]
    pub particle_number: Vec<f64>,
    pub snapshots: Vec<Snapshot>,
    pub window: (f64, f64),
    /// Mean of `G` over recorded times inside `window`.
    pub long_time_average: f64,
    /// `max_t |1 - ‖ψ(t)‖|` before renormalization.
    pub max_norm_drift: f64,
    pub matvecs: usize,
    pub substeps: usize,
}

impl TimeSeries {
    /// `max_t |⟨H⟩(t) - ⟨H⟩(0)|`, if energy was tracked.
    pub fn max_energy_drift(&self) -> Option<f64> {
        let e0 = *self.energy.first()?;
        Some(self.energy.iter().map(|e| (e - e0).abs()).fold(0.0, f64::max))
    }
}

/// Evolve a basis configuration under `H = J·hops + λ·diagonal pairs` up to
/// `t_max`, recording `G(t)` at every step.
pub fn evolve(
    lattice: &Lattice,
    initial: &Configuration,
    hopping: f64,
    interaction: f64,
    t_max: f64,
    settings: &PropagatorSettings,
    options: &EvolveOptions,
) -> Result<TimeSeries> {
    settings.validate()?;
    if !(t_max.is_finite() && t_max >= 0.0) {
        return Err(Error::InvalidParameter(format!("t_max must be non-negative, got {t_max}")));
    }
    let basis = fragment_of(lattice, initial, options.state_cap)?;
    let h = SparseHamiltonian::build(lattice, &basis, hopping, interaction)?;
    let start = basis.index_of(initial).expect("fragment contains its seed");
    let mut psi = vec![Complex64::default(); basis.len()];
    psi[start] = Complex64::new(1.0, 0.0);

    let weights = autocorrelation_weights(&basis, initial);
    // Probabilities are renormalized so a frozen state reports bit-identical values.
    let g_of = |psi: &[Complex64]| -> f64 {
        let total: f64 = psi.iter().map(|z| z.norm_sqr()).sum();
        psi.iter().zip(&weights).map(|(a, w)| a.norm_sqr() / total * w).sum()
    };
    let energy_of = |psi: &[Complex64]| -> Result<f64> {
        let hpsi = h.apply(psi)?;
        Ok(dot(psi, &hpsi).re)
    };

    let steps = (t_max / settings.dt).round() as usize;
    let snapshot_steps: Vec<(usize, f64)> = options
        .snapshot_times
        .iter()
        .map(|&t| ((t / settings.dt).round().max(0.0) as usize, t))
        .collect();
    for &(k, t) in &snapshot_steps {
        if k > steps {
            return Err(Error::InvalidParameter(format!("snapshot time {t} beyond t_max {t_max}")));
        }
    }

    let mut times = Vec::with_capacity(steps + 1);
    let mut g = Vec::with_capacity(steps + 1);
    let mut energy = Vec::new();
    let mut particle_number = Vec::new();
    let mut snapshots = Vec::new();
    let mut max_norm_drift: f64 = 0.0;
    let mut prop = Propagator::new(*settings, basis.len())?;
    let (mut matvecs, mut substeps) = (0, 0);

    for k in 0..=steps {
        if k > 0 {
            let info = prop.advance(&h, &mut psi, settings.dt)?;
            matvecs += info.matvecs;
            substeps += info.substeps;
            let n = norm(&psi);
            if !n.is_finite() || n == 0.0 {
                return Err(Error::Numeric(format!("state norm became {n} at step {k}")));
            }
            max_norm_drift = max_norm_drift.max((1.0 - n).abs());
            psi.iter_mut().for_each(|z| *z /= n);
        }
        let t = k as f64 * settings.dt;
        times.push(t);
        g.push(g_of(&psi));
        if options.track_energy {
            energy.push(energy_of(&psi)?);
        }
        if options.track_particle_number {
            particle_number.push(site_occupations(&basis, &psi)?.iter().sum());
        }
        for &(sk, _) in &snapshot_steps {
            if sk == k {
                snapshots.push(Snapshot {
                    time: t,
                    occupations: site_occupations(&basis, &psi)?,
                });
            }
        }
    }

    let window_start = options.window_start.unwrap_or(t_max / 2.0);
    let in_window: Vec<f64> = times
        .iter()
        .zip(&g)
        .filter(|(&t, _)| t >= window_start - 1e-9 * settings.dt)
        .map(|(_, &v)| v)
        .collect();
    let long_time_average = if in_window.is_empty() {
        f64::NAN
    } else {
        in_window.iter().sum::<f64>() / in_window.len() as f64
    };

    Ok(TimeSeries {
        side: lattice.side(),
        particles: initial.particle_count(),
        eta: initial.density(),
        g_star: g_star(initial.density()),
        hopping,
        interaction,
        settings: *settings,
        fragment_dim: basis.len(),
        times,
        g,
        energy,
        particle_number,
        snapshots,
        window: (window_start, t_max),
        long_time_average,
        max_norm_drift,
        matvecs,
        substeps,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenarios::{build_scenario, ScenarioKind, ScenarioSpec};
    use crate::state_space::enumerate_sector;

    fn c(re: f64) -> Complex64 {
        Complex64::new(re, 0.0)
    }

    #[test]
    fn settings_validation() {
        assert!(PropagatorSettings::default().validate().is_ok());
        let bad = PropagatorSettings { krylov_dim: 1, ..Default::default() };
        assert!(bad.validate().is_err());
        let bad = PropagatorSettings { krylov_dim: 51, ..Default::default() };
        assert!(bad.validate().is_err());
        let bad = PropagatorSettings { dt: 0.0, ..Default::default() };
        assert!(bad.validate().is_err());
    }

    #[test]
    fn zero_hamiltonian_is_identity() {
        let h = SparseHamiltonian::from_upper_triplets(vec![0.0; 3], &[]).unwrap();
        let psi = vec![c(0.6), Complex64::new(0.0, 0.8), c(0.0)];
        let out = step(&h, &psi, &PropagatorSettings::default()).unwrap();
        for (a, b) in out.iter().zip(&psi) {
            assert!((a - b).norm() < 1e-15);
        }
    }

    #[test]
    fn one_by_one_is_a_phase() {
        let lambda = 0.37;
        let h = SparseHamiltonian::from_upper_triplets(vec![lambda], &[]).unwrap();
        let out = step(&h, &[c(1.0)], &PropagatorSettings::default()).unwrap();
        let expected = Complex64::from_polar(1.0, -lambda * 0.1);
        assert!((out[0] - expected).norm() < 1e-14);
    }

    #[test]
    fn autocorrelation_limits() {
        let config = build_scenario(&ScenarioSpec::new(ScenarioKind::SecondRow, 8)).unwrap();
        let occ: Vec<f64> = (0..64).map(|s| if config.is_occupied(s) { 1.0 } else { 0.0 }).collect();
        let g0 = autocorrelation(&occ, &config).unwrap();
        assert!((g0 - 0.984375).abs() < 1e-15);
        let eta = config.density();
        let relaxed = vec![eta; 64];
        assert!(autocorrelation(&relaxed, &config).unwrap().abs() < 1e-15);
        assert!(autocorrelation(&relaxed[..10], &config).is_err());
    }

    #[test]
    fn weights_match_occupation_formula() {
        let lat = Lattice::new(4).unwrap();
        let sector = enumerate_sector(&lat, 5, DEFAULT_STATE_CAP).unwrap();
        let initial = sector.config(17);
        let w = autocorrelation_weights(&sector, &initial);
        for k in 0..sector.len() {
            let mut psi = vec![Complex64::default(); sector.len()];
            psi[k] = c(1.0);
            let occ = site_occupations(&sector, &psi).unwrap();
            let direct = autocorrelation(&occ, &initial).unwrap();
            assert!((direct - w[k]).abs() < 1e-14);
        }
    }

    #[test]
    fn frozen_scenario_has_constant_g() {
        let lat = Lattice::new(6).unwrap();
        let config = build_scenario(&ScenarioSpec::new(ScenarioKind::MiddleRow, 6)).unwrap();
        let opts = EvolveOptions {
            snapshot_times: vec![5.0],
            ..Default::default()
        };
        let ts = evolve(&lat, &config, 1.0, 0.5, 5.0, &PropagatorSettings::default(), &opts).unwrap();
        assert_eq!(ts.fragment_dim, 1);
        let g0 = 1.0 - g_star(15.0 / 36.0);
        assert!(ts.g.iter().all(|&x| (x - g0).abs() < 1e-14));
        assert_eq!(ts.times.len(), 51);
        let snap = &ts.snapshots[0];
        for s in 0..36 {
            let expected = if config.is_occupied(s) { 1.0 } else { 0.0 };
            assert!((snap.occupations[s] - expected).abs() < 1e-14);
        }
    }

    #[test]
    fn snapshot_past_end_is_rejected() {
        let lat = Lattice::new(3).unwrap();
        let config = Configuration::from_sites(3, &[4]).unwrap();
        let opts = EvolveOptions {
            snapshot_times: vec![2.0],
            ..Default::default()
        };
        assert!(evolve(&lat, &config, 1.0, 0.0, 1.0, &PropagatorSettings::default(), &opts).is_err());
    }
}
