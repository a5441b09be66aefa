//! Classical constrained random walk on the configuration graph.
//!
//! Continuous-time Markov chain: every allowed hop fires independently at
//! `hop_rate`. Trajectory `k` draws from a ChaCha8 stream selected by `k`,
//! and all ensemble sums are integer counts, so results do not depend on the
//! number of worker threads.

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::krylov::{autocorrelation, g_star};
use crate::lattice::{Configuration, Hop, Lattice};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WalkSettings {
    pub trajectories: usize,
    pub t_max: f64,
    pub hop_rate: f64,
    pub seed: u64,
    /// Ascending times in `[0, t_max]`.
    pub record_times: Vec<f64>,
}

impl WalkSettings {
    /// Settings recording every `dt` from 0 to `t_max`.
    pub fn uniform(trajectories: usize, t_max: f64, dt: f64, seed: u64) -> Result<Self> {
        let settings = WalkSettings {
            trajectories,
            t_max,
            hop_rate: 1.0,
            seed,
            record_times: time_grid(t_max, dt)?,
        };
        settings.validate()?;
        Ok(settings)
    }

    pub fn validate(&self) -> Result<()> {
        if self.trajectories == 0 {
            return Err(Error::InvalidParameter("at least one trajectory is required".into()));
        }
        if !(self.t_max.is_finite() && self.t_max > 0.0) {
            return Err(Error::InvalidParameter(format!("t_max must be positive, got {}", self.t_max)));
        }
        if !(self.hop_rate.is_finite() && self.hop_rate >= 0.0) {
            return Err(Error::InvalidParameter(format!(
                "hop rate must be non-negative, got {}",
                self.hop_rate
            )));
        }
        if self.record_times.is_empty() {
            return Err(Error::InvalidParameter("no record times".into()));
        }
        let in_range = self.record_times.iter().all(|&t| (0.0..=self.t_max).contains(&t));
        let ascending = self.record_times.windows(2).all(|w| w[0] <= w[1]);
        if !(in_range && ascending) {
            return Err(Error::InvalidParameter(
                "record times must be ascending and within [0, t_max]".into(),
            ));
        }
        Ok(())
    }
}

/// `0, dt, 2dt, ...` up to `t_max`, with `t_max` itself always included.
pub fn time_grid(t_max: f64, dt: f64) -> Result<Vec<f64>> {
    if !(dt.is_finite() && dt > 0.0 && t_max.is_finite() && t_max >= 0.0) {
        return Err(Error::InvalidParameter(format!("bad time grid: t_max={t_max}, dt={dt}")));
    }
    let steps = (t_max / dt).round() as usize;
    let mut times: Vec<f64> = (0..=steps).map(|k| k as f64 * dt).filter(|&t| t < t_max).collect();
    if times.last().is_none_or(|&t| (t_max - t).abs() > 1e-12 * t_max.max(1.0)) {
        times.push(t_max);
    } else if let Some(last) = times.last_mut() {
        *last = t_max;
    }
    Ok(times)
}

/// One trajectory of the walk.
#[derive(Debug, Clone)]
pub struct Walker<'a> {
    lattice: &'a Lattice,
    config: Configuration,
    hop_rate: f64,
    time: f64,
    next_event: f64,
    hops: Vec<Hop>,
}

impl<'a> Walker<'a> {
    pub fn new(lattice: &'a Lattice, config: Configuration, hop_rate: f64) -> Result<Self> {
        let hops = lattice.allowed_hops(&config)?;
        Ok(Walker {
            lattice,
            config,
            hop_rate,
            time: 0.0,
            next_event: f64::NAN,
            hops,
        })
    }

    pub fn config(&self) -> &Configuration {
        &self.config
    }

    pub fn time(&self) -> f64 {
        self.time
    }

    fn draw_wait<R: Rng>(&self, rng: &mut R) -> f64 {
        let rate = self.hop_rate * self.hops.len() as f64;
        if rate == 0.0 {
            return f64::INFINITY;
        }
        let u: f64 = rng.random();
        -(1.0 - u).ln() / rate
    }

    /// Run until time `t`; returns the number of hops made.
    pub fn advance_to<R: Rng>(&mut self, t: f64, rng: &mut R) -> usize {
        if self.next_event.is_nan() {
            self.next_event = self.time + self.draw_wait(rng);
        }
        let mut events = 0;
        while self.next_event <= t {
            let hop = self.hops[rng.random_range(0..self.hops.len())];
            self.config = self.config.with_hop(hop);
            debug_assert!(self.lattice.is_valid(&self.config).unwrap_or(false));
            self.hops.clear();
            self.lattice.push_hops(self.config.words(), &mut self.hops);
            self.time = self.next_event;
            self.next_event = self.time + self.draw_wait(rng);
            events += 1;
        }
        self.time = t;
        events
    }
}

/// RNG of trajectory `id` for a given seed.
pub fn trajectory_rng(seed: u64, id: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(id as u64);
    rng
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassicalSeries {
    #[serde(rename = "L")]
    pub side: usize,
    #[serde(rename = "M")]
    pub particles: usize,
    pub eta: f64,
    pub trajectories: usize,
    pub times: Vec<f64>,
    /// Ensemble-mean `⟨n_i⟩` per recorded time.
    pub occupations: Vec<Vec<f64>>,
    pub g: Vec<f64>,
    /// Standard error of the per-trajectory autocorrelation.
    pub stderr: Vec<f64>,
    pub events: u64,
}

/// Integer ensemble sums; addition is associative, so any reduction order
/// gives the same result.
#[derive(Clone)]
struct Tally {
    site_counts: Vec<u64>,
    overlap: Vec<u64>,
    overlap_sq: Vec<u64>,
    events: u64,
}

impl Tally {
    fn new(times: usize, sites: usize) -> Self {
        Tally {
            site_counts: vec![0; times * sites],
            overlap: vec![0; times],
            overlap_sq: vec![0; times],
            events: 0,
        }
    }

    fn merge(mut self, other: Tally) -> Tally {
        for (a, b) in self.site_counts.iter_mut().zip(other.site_counts) {
            *a += b;
        }
        for (a, b) in self.overlap.iter_mut().zip(other.overlap) {
            *a += b;
        }
        for (a, b) in self.overlap_sq.iter_mut().zip(other.overlap_sq) {
            *a += b;
        }
        self.events += other.events;
        self
    }
}

/// Ensemble of independent walks from `initial`.
pub fn simulate(lattice: &Lattice, initial: &Configuration, settings: &WalkSettings) -> Result<ClassicalSeries> {
    settings.validate()?;
    if !lattice.is_valid(initial)? {
        let (a, b) = lattice.first_violation(initial.words()).expect("invalid config has a violation");
        return Err(Error::ConstraintViolation(a, b));
    }
    let sites = lattice.site_count();
    let times = &settings.record_times;
    let nt = times.len();
    let initial_sites: Vec<usize> = initial.occupied_sites().collect();

    let tally = (0..settings.trajectories)
        .into_par_iter()
        .fold(
            || Tally::new(nt, sites),
            |mut tally, id| {
                let mut rng = trajectory_rng(settings.seed, id);
                let mut walker =
                    Walker::new(lattice, initial.clone(), settings.hop_rate).expect("initial state checked");
                for (k, &t) in times.iter().enumerate() {
                    tally.events += walker.advance_to(t, &mut rng) as u64;
                    let config = walker.config();
                    for s in config.occupied_sites() {
                        tally.site_counts[k * sites + s] += 1;
                    }
                    let overlap = initial_sites.iter().filter(|&&s| config.is_occupied(s)).count() as u64;
                    tally.overlap[k] += overlap;
                    tally.overlap_sq[k] += overlap * overlap;
                }
                tally
            },
        )
        .reduce(|| Tally::new(nt, sites), Tally::merge);

    let n = settings.trajectories as f64;
    let mut occupations = Vec::with_capacity(nt);
    let mut g = Vec::with_capacity(nt);
    let mut stderr = Vec::with_capacity(nt);
    for k in 0..nt {
        let occ: Vec<f64> = tally.site_counts[k * sites..(k + 1) * sites]
            .iter()
            .map(|&c| c as f64 / n)
            .collect();
        g.push(autocorrelation(&occ, initial)?);
        occupations.push(occ);
        // Per-trajectory G is 4·overlap/L² plus a constant.
        let err = if settings.trajectories > 1 {
            let t = settings.trajectories as u128;
            let s1 = tally.overlap[k] as u128;
            let s2 = tally.overlap_sq[k] as u128;
            let scaled_var = (t * s2 - s1 * s1) as f64;
            let var = scaled_var / (n * (n - 1.0));
            4.0 / sites as f64 * (var / n).sqrt()
        } else {
            0.0
        };
        stderr.push(err);
    }

    Ok(ClassicalSeries {
        side: lattice.side(),
        particles: initial.particle_count(),
        eta: initial.density(),
        trajectories: settings.trajectories,
        times: times.clone(),
        occupations,
        g,
        stderr,
        events: tally.events,
    })
}

/// `G(0)` of a configuration, `1 - (2η-1)²`.
pub fn initial_autocorrelation(config: &Configuration) -> f64 {
    1.0 - g_star(config.density())
}
