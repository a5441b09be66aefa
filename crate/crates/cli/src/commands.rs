use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::Serialize;
use serde_json::{json, Value};

use qhd_core::classical::{self, WalkSettings};
use qhd_core::io::{fmt_f64, write_json, CsvWriter, Field};
use qhd_core::spectral::{self, ScanOptions, DEFAULT_DENSE_CAP};
use qhd_core::state_space::{max_particles, DEFAULT_STATE_CAP};
use qhd_core::{
    build_scenario, decompose_sector, enumerate_sector, evolve, scan_fragmentation, Configuration, Error,
    EvolveOptions, Lattice, PropagatorSettings, Result, ScenarioSpec, Scope,
};

use crate::config::Params;

/// Fully resolved parameters written to `run.json`.
#[derive(Debug, Serialize)]
struct RunRecord<'a> {
    command: &'a str,
    version: &'a str,
    config: Value,
    runtime_seconds: f64,
    outputs: Vec<String>,
    results: Value,
}

struct Output {
    dir: PathBuf,
    files: Vec<String>,
}

impl Output {
    fn create(dir: PathBuf) -> Result<Self> {
        fs::create_dir_all(&dir)?;
        Ok(Output { dir, files: Vec::new() })
    }

    fn path(&mut self, name: &str) -> PathBuf {
        self.files.push(name.to_string());
        self.dir.join(name)
    }
}

pub fn run(command: &str, params: Params) -> Result<()> {
    let params = params.resolve()?;
    if let Some(threads) = params.threads {
        // A second initialization only happens in tests; keep the first pool.
        let _ = rayon::ThreadPoolBuilder::new().num_threads(threads).build_global();
    }
    let started = Instant::now();
    let outcome = match command {
        "basis" => cmd_basis(&params)?,
        "fragments" => cmd_fragments(&params)?,
        "scan" => cmd_scan(&params)?,
        "evolve" => cmd_evolve(&params)?,
        "spectrum" => cmd_spectrum(&params)?,
        "classical" => cmd_classical(&params)?,
        other => unreachable!("unknown command {other}"),
    };
    if let Some((out, config, results)) = outcome {
        let record = RunRecord {
            command,
            version: qhd_core::VERSION,
            config,
            runtime_seconds: started.elapsed().as_secs_f64(),
            outputs: out.files.clone(),
            results,
        };
        write_json(out.dir.join("run.json"), &record)?;
    }
    Ok(())
}

type Outcome = Option<(Output, Value, Value)>;

fn lattice(params: &Params) -> Result<Lattice> {
    Lattice::new(params.side()?)
}

fn state_cap(params: &Params) -> usize {
    params.state_cap.unwrap_or(DEFAULT_STATE_CAP)
}

fn initial_state(params: &Params) -> Result<(ScenarioSpec, Configuration)> {
    let spec = ScenarioSpec::new(params.scenario()?, params.side()?)
        .with_removals(params.removal_sites.clone().unwrap_or_default());
    let config = build_scenario(&spec)?;
    Ok((spec, config))
}

fn positive(name: &str, value: f64) -> Result<f64> {
    if value.is_finite() && value > 0.0 {
        Ok(value)
    } else {
        Err(Error::InvalidParameter(format!("{name} must be positive, got {value}")))
    }
}

fn cmd_basis(params: &Params) -> Result<Outcome> {
    let lat = lattice(params)?;
    let m = params.particles()?;
    let basis = enumerate_sector(&lat, m, state_cap(params))?;
    println!("dim: {}", basis.len());
    let Some(dir) = params.out.clone() else {
        return Ok(None);
    };
    let mut out = Output::create(dir)?;
    let mut csv = CsvWriter::create(out.path("basis.csv"), &["index", "occupancy"])?;
    for (k, c) in basis.configs().enumerate() {
        csv.row(&[Field::Uint(k), Field::Text(&c.to_bitstring())])?;
    }
    csv.finish()?;
    let config = json!({ "L": lat.side(), "M": m, "state_cap": state_cap(params) });
    Ok(Some((out, config, json!({ "dim": basis.len() }))))
}

fn cmd_fragments(params: &Params) -> Result<Outcome> {
    let lat = lattice(params)?;
    let m = params.particles()?;
    let sector = enumerate_sector(&lat, m, state_cap(params))?;
    let dec = decompose_sector(&lat, &sector)?;
    let mut sizes = dec.fragment_sizes.clone();
    sizes.sort_unstable_by(|a, b| b.cmp(a));
    println!("fragments: {}, sizes: {:?}", dec.fragment_count(), sizes);
    let Some(dir) = params.out.clone() else {
        return Ok(None);
    };
    let mut out = Output::create(dir)?;
    let mut csv = CsvWriter::create(out.path("fragments.csv"), &["fragment_id", "size"])?;
    for (id, &size) in dec.fragment_sizes.iter().enumerate() {
        csv.row(&[Field::Uint(id), Field::Uint(size)])?;
    }
    csv.finish()?;
    let config = json!({ "L": lat.side(), "M": m, "state_cap": state_cap(params) });
    let results = json!({
        "N": dec.total(),
        "fragments": dec.fragment_count(),
        "N_max": dec.largest_size(),
        "ratio": dec.ratio(),
    });
    Ok(Some((out, config, results)))
}

fn cmd_scan(params: &Params) -> Result<Outcome> {
    let lat = lattice(params)?;
    let lo = params.particles_min.unwrap_or(0);
    let hi = params.particles_max.unwrap_or(max_particles(lat.side()));
    let scan = scan_fragmentation(&lat, lo..=hi, state_cap(params))?;
    let mut out = Output::create(params.out_dir("scan"))?;
    let header = ["L", "M", "eta", "N", "N_max", "ratio", "fragments", "skipped"];
    let mut csv = CsvWriter::create(out.path("scan.csv"), &header)?;
    println!("{:>4} {:>8} {:>12} {:>12} {:>10}", "M", "eta", "N", "N_max", "ratio");
    for row in &scan.rows {
        let opt_u = |v: Option<usize>| v.map(Field::Uint).unwrap_or(Field::Empty);
        csv.row(&[
            Field::Uint(scan.side),
            Field::Uint(row.particles),
            Field::Float(row.eta),
            opt_u(row.total),
            opt_u(row.largest),
            row.ratio.map(Field::Float).unwrap_or(Field::Empty),
            opt_u(row.fragments),
            Field::Text(if row.skipped.is_some() { "capacity" } else { "" }),
        ])?;
        match (row.total, row.largest, row.ratio) {
            (Some(n), Some(nmax), Some(r)) => {
                println!("{:>4} {:>8.4} {:>12} {:>12} {:>10.6}", row.particles, row.eta, n, nmax, r)
            }
            _ => println!("{:>4} {:>8.4} skipped: {}", row.particles, row.eta, row.skipped.as_deref().unwrap_or("")),
        }
    }
    csv.finish()?;
    let t = &scan.thresholds;
    println!(
        "eta_1 = {:.6}, eta_2 = {:.6}, eta_max = {:.6} (exact {:.6})",
        t.eta_1, t.eta_2, t.eta_max_formula, t.eta_max_exact
    );
    let thresholds = json!({
        "thresholds": t,
        "eta_star_heuristic": scan.eta_star_heuristic,
    });
    write_json(out.path("thresholds.json"), &thresholds)?;
    let config = json!({ "L": lat.side(), "M_min": lo, "M_max": hi, "state_cap": state_cap(params) });
    Ok(Some((out, config, thresholds)))
}

fn snapshot_csv(path: &Path, lat: &Lattice, initial: &Configuration, occupations: &[f64]) -> Result<()> {
    let header = ["site_index", "row", "col", "n_initial", "n_expected"];
    let mut csv = CsvWriter::create(path, &header)?;
    for (s, &n) in occupations.iter().enumerate() {
        let (r, c) = lat.row_col(s);
        csv.row(&[
            Field::Uint(s),
            Field::Uint(r),
            Field::Uint(c),
            Field::Uint(initial.is_occupied(s) as usize),
            Field::Float(n),
        ])?;
    }
    csv.finish()?;
    Ok(())
}

fn snapshot_name(t: f64) -> String {
    format!("snapshot_t{}.csv", fmt_time(t))
}

fn fmt_time(t: f64) -> String {
    let s = format!("{t}");
    s.replace('.', "p")
}

fn cmd_evolve(params: &Params) -> Result<Outcome> {
    let lat = lattice(params)?;
    let (spec, initial) = initial_state(params)?;
    let defaults = PropagatorSettings::default();
    let settings = PropagatorSettings {
        dt: params.dt.unwrap_or(defaults.dt),
        krylov_dim: params.krylov_dim.unwrap_or(defaults.krylov_dim),
        ..defaults
    };
    let hopping = params.hopping.unwrap_or(1.0);
    let lambda = params.lambda.unwrap_or(0.0);
    let t_max = params.t_max.unwrap_or(100.0);
    let options = EvolveOptions {
        snapshot_times: params.snapshot_at.clone().unwrap_or_default(),
        window_start: params.window,
        state_cap: state_cap(params),
        ..Default::default()
    };
    let series = evolve(&lat, &initial, hopping, lambda, t_max, &settings, &options)?;

    let mut out = Output::create(params.out_dir("evolve"))?;
    let mut csv = CsvWriter::create(out.path("timeseries.csv"), &["t", "G"])?;
    for (t, g) in series.times.iter().zip(&series.g) {
        csv.row(&[Field::Float(*t), Field::Float(*g)])?;
    }
    csv.finish()?;
    for snap in &series.snapshots {
        let path = out.path(&snapshot_name(snap.time));
        snapshot_csv(&path, &lat, &initial, &snap.occupations)?;
    }
    println!(
        "fragment dim: {}, G(0) = {}, G_bar = {} over [{}, {}]",
        series.fragment_dim,
        fmt_f64(series.g[0]),
        fmt_f64(series.long_time_average),
        series.window.0,
        series.window.1
    );

    let config = json!({
        "L": lat.side(),
        "M": initial.particle_count(),
        "scenario": spec.kind,
        "removal_sites": spec.removal_sites,
        "J": hopping,
        "lambda": lambda,
        "dt": settings.dt,
        "krylov_dim": settings.krylov_dim,
        "breakdown_tol": settings.breakdown_tol,
        "error_tol": settings.error_tol,
        "t_max": t_max,
        "window": series.window.0,
        "snapshot_at": options.snapshot_times,
        "state_cap": options.state_cap,
    });
    let results = json!({
        "eta": series.eta,
        "G_star": series.g_star,
        "fragment_dim": series.fragment_dim,
        "window": [series.window.0, series.window.1],
        "G_bar": series.long_time_average,
        "max_norm_drift": series.max_norm_drift,
        "max_energy_drift": series.max_energy_drift(),
        "matvecs": series.matvecs,
        "substeps": series.substeps,
    });
    Ok(Some((out, config, results)))
}

fn cmd_spectrum(params: &Params) -> Result<Outcome> {
    let lat = lattice(params)?;
    let m = params.particles()?;
    let lambdas = params.lambdas.clone().unwrap_or_else(|| vec![params.lambda.unwrap_or(0.0)]);
    let scope = params.scope.unwrap_or(Scope::LargestFragment);
    let options = ScanOptions {
        hopping: params.hopping.unwrap_or(1.0),
        dense_cap: params.dense_cap.unwrap_or(DEFAULT_DENSE_CAP),
        state_cap: state_cap(params),
        ..Default::default()
    };
    let scan = spectral::scar_scan(&lat, m, &lambdas, scope, &options)?;

    let mut out = Output::create(params.out_dir("spectrum"))?;
    let header = ["lambda", "fragment_id", "state_index", "E", "E_over_L2", "S_A", "Q", "degeneracy_group"];
    let mut csv = CsvWriter::create(out.path("spectrum.csv"), &header)?;
    for row in &scan.rows {
        csv.row(&[
            Field::Float(row.lambda),
            Field::Uint(row.fragment_id),
            Field::Uint(row.state_index),
            Field::Float(row.energy),
            Field::Float(row.energy_density),
            Field::Float(row.entropy),
            Field::Float(row.q),
            Field::Uint(row.degeneracy_group),
        ])?;
    }
    csv.finish()?;
    println!(
        "sector dim: {}, fragments diagonalized: {}, rows: {}{}",
        scan.sector_dim,
        scan.fragments.len(),
        scan.rows.len(),
        if scan.is_partial() { " (partial)" } else { "" }
    );
    for skip in &scan.skipped {
        eprintln!("skipped fragment {} (dim {}): {}", skip.fragment_id, skip.dim, skip.reason);
    }
    let config = json!({
        "L": lat.side(),
        "M": m,
        "J": options.hopping,
        "lambdas": lambdas,
        "scope": scope,
        "dense_cap": options.dense_cap,
        "state_cap": options.state_cap,
        "degeneracy_tol": options.degeneracy_tol,
        "bipartition_rows": lat.side() / 2,
    });
    let results = json!({
        "sector_dim": scan.sector_dim,
        "fragments": scan.fragments,
        "skipped": scan.skipped,
        "partial": scan.is_partial(),
    });
    Ok(Some((out, config, results)))
}

fn cmd_classical(params: &Params) -> Result<Outcome> {
    let lat = lattice(params)?;
    let (spec, initial) = initial_state(params)?;
    let t_max = positive("tmax", params.t_max.unwrap_or(100.0))?;
    let dt = positive("dt", params.dt.unwrap_or(0.1))?;
    let mut settings = WalkSettings::uniform(
        params.trajectories.unwrap_or(1000),
        t_max,
        dt,
        params.seed.unwrap_or(0),
    )?;
    settings.hop_rate = params.hopping.unwrap_or(1.0);
    let mut record_times = settings.record_times.clone();
    let snapshot_times = params.snapshot_at.clone().unwrap_or_default();
    for &t in &snapshot_times {
        if !(0.0..=t_max).contains(&t) {
            return Err(Error::InvalidParameter(format!("snapshot time {t} outside [0, {t_max}]")));
        }
        record_times.push(t);
    }
    record_times.sort_by(f64::total_cmp);
    record_times.dedup();
    settings.record_times = record_times;
    let series = classical::simulate(&lat, &initial, &settings)?;

    let mut out = Output::create(params.out_dir("classical"))?;
    let mut csv = CsvWriter::create(out.path("classical.csv"), &["t", "G_cl", "stderr"])?;
    let grid = classical::time_grid(t_max, dt)?;
    for (k, &t) in series.times.iter().enumerate() {
        if grid.binary_search_by(|x| x.total_cmp(&t)).is_ok() {
            csv.row(&[Field::Float(t), Field::Float(series.g[k]), Field::Float(series.stderr[k])])?;
        }
    }
    csv.finish()?;
    for &t in &snapshot_times {
        let k = series.times.iter().position(|&x| x == t).expect("snapshot time recorded");
        let path = out.path(&snapshot_name(t));
        snapshot_csv(&path, &lat, &initial, &series.occupations[k])?;
    }
    let last = series.g.len() - 1;
    println!(
        "G_cl({}) = {} ± {} over {} trajectories",
        series.times[last],
        fmt_f64(series.g[last]),
        fmt_f64(series.stderr[last]),
        series.trajectories
    );
    let config = json!({
        "L": lat.side(),
        "M": initial.particle_count(),
        "scenario": spec.kind,
        "removal_sites": spec.removal_sites,
        "J": settings.hop_rate,
        "lambda": params.lambda,
        "lambda_note": "inert: the classical walk has symmetric rates",
        "t_max": t_max,
        "dt": dt,
        "trajectories": settings.trajectories,
        "seed": settings.seed,
        "snapshot_at": snapshot_times,
    });
    let results = json!({
        "eta": series.eta,
        "events": series.events,
        "G_cl_final": series.g[last],
        "stderr_final": series.stderr[last],
    });
    Ok(Some((out, config, results)))
}
