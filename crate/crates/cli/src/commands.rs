use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context, Result};
use log::info;
use serde::{Deserialize, Serialize};

use trackqubo::config::{RunConfig, SolverKind};
use trackqubo::detector::DetectorGeometry;
use trackqubo::error::Error as CoreError;
use trackqubo::event::Event;
use trackqubo::io::{self, Dataset, Metadata, Provenance, PlotRow};
use trackqubo::metrics::{evaluate as score, Binning, MetricsReport};
use trackqubo::pipeline::{
    calibrate, event_qubo, make_subsolver, preselect_event, reconstruct as run_reconstruct,
    simulate as run_simulate, with_pool, Calibration, EventReconstruction, EventStats, Track,
};
use trackqubo::qubo::{to_ising, Assignment};
use trackqubo::solve::{solve_exact, solve_iterative, SolveReport, MAX_EXACT_VARIABLES};
use trackqubo::vqe::{run_vqe, MAX_QUBITS};

use crate::{Common, EXIT_DATA, EXIT_USAGE, EXIT_VIOLATION};

/// Raised after outputs are written when the metrics break an invariant.
#[derive(Debug)]
pub struct InvariantViolation(pub Vec<String>);

impl std::fmt::Display for InvariantViolation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{} invariant violation(s): {}", self.0.len(), self.0.join("; "))
    }
}

impl std::error::Error for InvariantViolation {}

/// Bad flags or configuration.
#[derive(Debug)]
pub struct Usage(pub String);

impl std::fmt::Display for Usage {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for Usage {}

pub fn exit_code(e: &anyhow::Error) -> u8 {
    if e.downcast_ref::<InvariantViolation>().is_some() {
        return EXIT_VIOLATION;
    }
    if e.downcast_ref::<Usage>().is_some() {
        return EXIT_USAGE;
    }
    match e.downcast_ref::<CoreError>() {
        Some(CoreError::Config(_)) => EXIT_USAGE,
        _ => EXIT_DATA,
    }
}

/// The error chain joined with `: `, skipping causes already quoted by the
/// message above them.
pub fn describe(e: &anyhow::Error) -> String {
    let mut out = String::new();
    for cause in e.chain() {
        let msg = cause.to_string();
        if !out.ends_with(&msg) {
            if !out.is_empty() {
                out.push_str(": ");
            }
            out.push_str(&msg);
        }
    }
    out
}

/// Configuration file (or `base`), then command-line overrides.
fn load_config(common: &Common, base: Option<&RunConfig>) -> Result<RunConfig> {
    let mut config = match (&common.config, base) {
        (Some(path), _) => RunConfig::load(path)?,
        (None, Some(b)) => b.clone(),
        (None, None) => RunConfig::default(),
    };
    if let Some(seed) = common.seed {
        config.seed = seed;
    }
    if let Some(name) = &common.solver {
        config.solver.kind = name.parse().map_err(|e: CoreError| Usage(e.to_string()))?;
    }
    if let Some(k) = common.subqubo_size {
        config.solver.iterative.subqubo_size = k;
    }
    if let Some(n) = common.iterations {
        config.solver.iterative.max_iterations = n;
    }
    if let Some(s) = common.shots {
        config.solver.vqe.shots = s;
    }
    if common.jobs.is_some() {
        config.jobs = common.jobs;
    }
    config.output_dir = None;
    config.validate()?;
    Ok(config)
}

fn create_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| CoreError::Io {
        path: dir.to_path_buf(),
        source: e,
    })?;
    Ok(())
}

fn read_metadata(dir: &Path) -> Result<Option<Metadata>> {
    let path = dir.join(io::METADATA_FILE);
    Ok(if path.exists() {
        Some(io::read_json(&path)?)
    } else {
        None
    })
}

// ---------------------------------------------------------------- simulate

pub fn simulate(common: &Common, out: &Path, n_events: u64, first_event: u64, xi: Option<f64>) -> Result<()> {
    let mut config = load_config(common, None)?;
    if let Some(xi) = xi {
        config.apply_xi(xi).map_err(|e| Usage(e.to_string()))?;
    }
    let geometry = config.geometry()?;
    let events: Vec<Event> = run_simulate(&config, first_event..first_event + n_events)?;
    let mut metadata = Metadata {
        config_hash: config.config_hash(),
        seed: config.seed,
        first_event,
        n_events,
        xi_label: config.sim.xi_label,
        mean_multiplicity: config.sim.mean_multiplicity,
        calibration: None,
        config: RunConfig {
            jobs: None,
            ..config.clone()
        },
    };
    io::write_dataset(out, &events, &metadata)?;

    // Calibrate on the data as written, so later stages see the same numbers.
    let written = io::read_dataset(out, &geometry)?;
    match calibrate(&written.events, &config) {
        Ok(c) => {
            metadata.calibration = Some(c);
            io::write_json(&out.join(io::METADATA_FILE), &metadata)?;
        }
        Err(e) => info!("no calibration stored: {e}"),
    }
    let hits: usize = events.iter().map(|e| e.hits.len()).sum();
    let particles: usize = events.iter().map(|e| e.particles.len()).sum();
    println!(
        "simulated {n_events} events: {particles} particles, {hits} hits -> {}",
        out.display()
    );
    Ok(())
}

// ---------------------------------------------------------------- reconstruct

#[derive(Debug, Serialize, Deserialize)]
pub struct EventSolve {
    pub event_id: u64,
    pub stats: EventStats,
    pub solve: Option<SolveReport>,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct ReconstructReport {
    pub config_hash: String,
    pub seed: u64,
    pub solver: String,
    pub subqubo_size: usize,
    pub iterations: usize,
    pub shots: usize,
    /// Absent when the input has no hits, so no window was needed.
    pub calibration: Option<Calibration>,
    pub calibration_source: String,
    pub events: Vec<EventSolve>,
}

/// Fixed window from the configuration, then the data set's stored
/// calibration, then truth in the hits. `None` when there are no hits.
fn choose_calibration(config: &RunConfig, data: &Dataset) -> Result<(Option<Calibration>, &'static str)> {
    if config.preselect.dx_window.is_some() {
        return Ok((Some(calibrate(&data.events, config)?), "config"));
    }
    if let Some(c) = data.metadata.as_ref().and_then(|m| m.calibration) {
        return Ok((Some(c), "metadata"));
    }
    if data.events.iter().all(|e| e.hits.is_empty()) {
        return Ok((None, "none"));
    }
    let c = calibrate(&data.events, config).context(
        "no stored calibration and no truth to calibrate on; set preselect.dx_window in the config",
    )?;
    Ok((Some(c), "truth"))
}

pub fn reconstruct(
    common: &Common,
    input: &Path,
    out: &Path,
    dump_qubo: Option<&Path>,
    dump_features: Option<&Path>,
) -> Result<()> {
    let metadata = read_metadata(input)?;
    let config = load_config(common, metadata.as_ref().map(|m| &m.config))?;
    let geometry = config.geometry()?;
    let data = io::read_dataset(input, &geometry)?;
    let (calibration, source) = choose_calibration(&config, &data)?;
    info!("calibration from {source}: {calibration:?}");

    let results = match &calibration {
        Some(cal) => run_reconstruct(&data.events, &config, cal)?,
        None => data
            .events
            .iter()
            .map(|e| EventReconstruction {
                event_id: e.event_id,
                tracks: Vec::new(),
                solve: None,
                stats: EventStats::default(),
            })
            .collect(),
    };
    let prov = Provenance::of(&config);
    create_dir(out)?;
    let tracks: Vec<Track> = results.iter().flat_map(|r| r.tracks.iter().cloned()).collect();
    io::write_tracks_file(&out.join("tracks.csv"), &tracks, &prov)?;
    let report = ReconstructReport {
        config_hash: prov.config_hash.clone(),
        seed: prov.seed,
        solver: config.solver.kind.name().to_string(),
        subqubo_size: config.solver.iterative.subqubo_size,
        iterations: config.solver.iterative.max_iterations,
        shots: config.solver.vqe.shots,
        calibration,
        calibration_source: source.to_string(),
        events: results
            .into_iter()
            .map(|r| EventSolve {
                event_id: r.event_id,
                stats: r.stats,
                solve: r.solve,
            })
            .collect(),
    };
    io::write_json(&out.join("solve_report.json"), &report)?;

    if let Some(dir) = dump_qubo {
        dump_qubos(dir, &data.events, &config, calibration.as_ref(), &prov)?;
    }
    if let Some(path) = dump_features {
        dump_preselection(path, &data.events, &config, calibration.as_ref(), &prov)?;
    }
    println!(
        "reconstructed {} tracks in {} events -> {}",
        tracks.len(),
        data.events.len(),
        out.display()
    );
    Ok(())
}

fn dump_qubos(
    dir: &Path,
    events: &[Event],
    config: &RunConfig,
    calibration: Option<&Calibration>,
    prov: &Provenance,
) -> Result<()> {
    create_dir(dir)?;
    let Some(calibration) = calibration else {
        return Ok(());
    };
    for ev in events {
        let pre = preselect_event(ev, config, calibration)?;
        if pre.triplets.is_empty() {
            continue;
        }
        let q = event_qubo(&pre.triplets, config, calibration)?;
        let path = dir.join(format!("event_{}.qubo", ev.event_id));
        io::write_file(&path, |w| io::write_qubo(w, &q, prov))?;
    }
    Ok(())
}

fn dump_preselection(
    path: &Path,
    events: &[Event],
    config: &RunConfig,
    calibration: Option<&Calibration>,
    prov: &Provenance,
) -> Result<()> {
    io::write_file(path, |w| {
        let mut out = io::features_writer(w, prov)?;
        let Some(calibration) = calibration else {
            return out.flush();
        };
        for ev in events {
            let pre = preselect_event(ev, config, calibration)
                .map_err(|e| std::io::Error::other(e.to_string()))?;
            io::write_features(&mut out, ev, &pre.doublets, &pre.triplets)?;
        }
        out.flush()
    })?;
    Ok(())
}

// ---------------------------------------------------------------- evaluate

#[derive(Debug, Serialize, Deserialize)]
pub struct EvaluationReport {
    pub config_hash: String,
    pub seed: u64,
    pub inputs: Vec<EvaluationInput>,
    pub metrics: MetricsReport,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct EvaluationInput {
    pub truth: PathBuf,
    pub tracks: PathBuf,
    pub truth_provenance: Option<Provenance>,
    pub tracks_provenance: Option<Provenance>,
}

fn dataset_geometry(meta: Option<&Metadata>, fallback: &DetectorGeometry) -> Result<DetectorGeometry> {
    match meta {
        Some(m) => Ok(m.config.geometry()?),
        None => Ok(fallback.clone()),
    }
}

pub fn evaluate(
    common: &Common,
    truth: &[PathBuf],
    tracks: &[PathBuf],
    out: &Path,
    edges: Option<Vec<f64>>,
) -> Result<()> {
    if truth.len() != tracks.len() {
        return Err(Usage(format!(
            "{} --truth directories but {} --tracks files; give one tracks file per truth directory",
            truth.len(),
            tracks.len()
        ))
        .into());
    }
    let binning = match edges {
        Some(e) => Binning::new(e).map_err(|e| Usage(e.to_string()))?,
        None => Binning::default(),
    };
    let first_meta = read_metadata(&truth[0])?;
    let config = load_config(common, first_meta.as_ref().map(|m| &m.config))?;
    let default_geometry = config.geometry()?;

    let mut events = Vec::new();
    let mut all_tracks = Vec::new();
    let mut inputs = Vec::new();
    let mut seen = BTreeSet::new();
    for (dir, tpath) in truth.iter().zip(tracks) {
        let meta = read_metadata(dir)?;
        let geometry = dataset_geometry(meta.as_ref(), &default_geometry)?;
        let data = io::read_dataset(dir, &geometry)?;
        let clash: Vec<u64> = data
            .events
            .iter()
            .map(|e| e.event_id)
            .filter(|id| !seen.insert(*id))
            .collect();
        if !clash.is_empty() {
            return Err(CoreError::Join(format!(
                "event ids {clash:?} of {} already used by an earlier data set (simulate with --first-event to keep ids distinct)",
                dir.display()
            ))
            .into());
        }
        let t = io::read_tracks_file(tpath)?;
        let ids: BTreeSet<u64> = data.events.iter().map(|e| e.event_id).collect();
        let missing: BTreeSet<u64> = t.iter().map(|t| t.event_id).filter(|id| !ids.contains(id)).collect();
        if !missing.is_empty() {
            return Err(CoreError::Join(format!(
                "{} has tracks for events missing from {}: {missing:?}",
                tpath.display(),
                dir.display()
            ))
            .into());
        }
        inputs.push(EvaluationInput {
            truth: dir.clone(),
            tracks: tpath.clone(),
            truth_provenance: meta.map(|m| Provenance {
                config_hash: m.config_hash,
                seed: m.seed,
            }),
            tracks_provenance: io::read_provenance(tpath)?,
        });
        events.extend(data.events);
        all_tracks.extend(t);
    }

    let metrics = with_pool(config.jobs, || score(&events, &all_tracks, &binning))??;
    let prov = Provenance::of(&config);
    create_dir(out)?;
    io::write_file(&out.join("efficiency_vs_energy.csv"), |w| {
        io::write_curve(w, &metrics.efficiency_vs_energy, &prov)
    })?;
    io::write_file(&out.join("fake_rate_vs_energy.csv"), |w| {
        io::write_curve(w, &metrics.fake_rate_vs_energy, &prov)
    })?;
    let s = &metrics.summary;
    println!(
        "efficiency {} fake_rate {} duplication_rate {} energy_resolution {}",
        show(s.efficiency),
        show(s.fake_rate),
        show(s.duplication_rate),
        show(s.energy_resolution)
    );
    let violations = metrics.violations.clone();
    let report = EvaluationReport {
        config_hash: prov.config_hash,
        seed: prov.seed,
        inputs,
        metrics,
    };
    io::write_json(&out.join("report.json"), &report)?;
    if !violations.is_empty() {
        return Err(InvariantViolation(violations).into());
    }
    Ok(())
}

fn show(v: Option<f64>) -> String {
    v.map_or_else(|| "n/a".into(), |v| format!("{v:.4}"))
}

// ---------------------------------------------------------------- plotdata

pub fn plotdata(reports: &[PathBuf], counts: &[PathBuf], out: &Path) -> Result<()> {
    let mut rows: Vec<PlotRow> = Vec::new();
    let mut prov = None;
    for path in reports {
        let r: EvaluationReport = io::read_json(path)?;
        prov.get_or_insert(Provenance {
            config_hash: r.config_hash.clone(),
            seed: r.seed,
        });
        rows.extend(io::plot_rows(&r.metrics));
    }
    for path in counts {
        let c = io::read_counts_file(path)?;
        if prov.is_none() {
            prov = io::read_provenance(path)?;
        }
        rows.extend(io::counts_rows(&c));
    }
    let prov = prov.ok_or_else(|| anyhow!("no input reports"))?;
    io::write_file(out, |w| io::write_plotdata(w, &rows, &prov))?;
    println!("{} rows -> {}", rows.len(), out.display());
    Ok(())
}

// ---------------------------------------------------------------- solve

#[derive(Debug, Serialize, Deserialize)]
pub struct VqeSummary {
    pub best_bitstring: Assignment,
    pub best_energy: f64,
    pub most_frequent: Option<Assignment>,
    pub evaluations: usize,
    pub final_expectation: f64,
    pub shots: usize,
    /// Enumerated optimum, when the problem is small enough.
    pub exact_optimum: Option<Assignment>,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct SolveOutput {
    pub config_hash: String,
    pub seed: u64,
    pub qubo: PathBuf,
    pub report: SolveReport,
    pub vqe: Option<VqeSummary>,
}

pub fn solve(common: &Common, qubo_path: &Path, out: &Path) -> Result<()> {
    let config = load_config(common, None)?;
    let qubo = io::read_qubo_file(qubo_path)?;
    if qubo.n() == 0 {
        bail!(CoreError::EmptyProblem(format!("{} has no variables", qubo_path.display())));
    }
    let prov = Provenance::of(&config);
    let sub = make_subsolver(&config);
    let report = with_pool(config.jobs, || {
        solve_iterative(&qubo, sub.as_ref(), &config.solver.iterative, config.seed)
    })??;
    create_dir(out)?;

    let mut vqe = None;
    if config.solver.kind == SolverKind::Vqe && qubo.n() <= MAX_QUBITS {
        let vcfg = trackqubo::vqe::VqeConfig {
            seed: config.seed,
            ..config.solver.vqe
        };
        let r = run_vqe(&to_ising(&qubo), &vcfg)?;
        io::write_file(&out.join("counts.csv"), |w| io::write_counts(w, &r.counts, &prov))?;
        vqe = Some(VqeSummary {
            most_frequent: r.most_frequent().cloned(),
            best_bitstring: r.best_bitstring,
            best_energy: r.best_energy,
            evaluations: r.evaluations,
            final_expectation: r.final_expectation,
            shots: vcfg.shots,
            exact_optimum: if qubo.n() <= MAX_EXACT_VARIABLES {
                Some(solve_exact(&qubo)?)
            } else {
                None
            },
        });
    }
    println!(
        "{}: objective {} with {} selected",
        report.best_assignment.to_bitstring(),
        report.best_objective,
        report.best_assignment.count_ones()
    );
    io::write_json(
        &out.join("solve_report.json"),
        &SolveOutput {
            config_hash: prov.config_hash,
            seed: prov.seed,
            qubo: qubo_path.to_path_buf(),
            report,
            vqe,
        },
    )?;
    Ok(())
}
