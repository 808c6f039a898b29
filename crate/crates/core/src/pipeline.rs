//! Stage orchestration: simulation, calibration and per-event
//! reconstruction, parallel over events with results in event order.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::{RunConfig, SolverKind};
use crate::detector::DetectorGeometry;
use crate::error::{Error, Result};
use crate::event::Event;
use crate::fastsim::generate_event;
use crate::preselect::{
    build_doublets, build_triplets, is_truth_triplet, mean_and_sigma, truth_doublets, Doublet,
    PreselectionWindow, Triplet,
};
use crate::qubo::{assemble_qubo, percentile, truth_quadruplet_spreads, Qubo, QuboScaling};
use crate::rng::derive_seed;
use crate::solve::{solve_iterative, AnnealSolver, ExactSolver, SolveReport, SubSolver};
use crate::trackbuild::{
    fit_track, match_candidate, resolve_ambiguities, triplets_to_candidates, TRACK_NDF,
};
use crate::vqe::VqeSolver;

/// Run `f` on a pool of `jobs` threads (all cores when `None`).
pub fn with_pool<T: Send>(jobs: Option<usize>, f: impl FnOnce() -> T + Send) -> Result<T> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(j) = jobs {
        builder = builder.num_threads(j);
    }
    let pool = builder
        .build()
        .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
    Ok(pool.install(f))
}

/// Generate the events with ids in `ids`.
pub fn simulate(config: &RunConfig, ids: std::ops::Range<u64>) -> Result<Vec<Event>> {
    config.validate()?;
    let geometry = config.geometry()?;
    let sim = config.effective_sim();
    with_pool(config.jobs, || {
        ids.into_par_iter()
            .map(|id| generate_event(&sim, &geometry, id))
            .collect()
    })
}

/// Data-derived constants for pre-selection and QUBO scaling.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Calibration {
    pub dx_mean: f64,
    pub dx_sigma: f64,
    pub s_max: f64,
    pub n_truth_doublets: usize,
    pub n_truth_quadruplets: usize,
}

/// Calibrate the `dx/x0` window on truth doublets and `s_max` on the
/// chained truth triplets passing that window.
pub fn calibrate(events: &[Event], config: &RunConfig) -> Result<Calibration> {
    let mut ratios = Vec::new();
    let mut per_event = Vec::with_capacity(events.len());
    for ev in events {
        let d = truth_doublets(&ev.hits);
        ratios.extend(d.iter().map(|d| d.dx_over_x0));
        per_event.push(d);
    }
    let (dx_mean, dx_sigma) = match config.preselect.dx_window {
        Some(w) => w,
        None => mean_and_sigma(&ratios)?,
    };
    let window = window_from(config, dx_mean, dx_sigma)?;

    let mut spreads = Vec::new();
    for (ev, doublets) in events.iter().zip(&per_event) {
        let kept: Vec<_> = doublets
            .iter()
            .copied()
            .filter(|d| window.accepts_dx(d.dx_over_x0))
            .collect();
        let triplets = build_triplets(&kept, &window);
        spreads.extend(truth_quadruplet_spreads(&triplets, |t| {
            is_truth_triplet(t, &ev.hits)
        }));
    }
    let s_max = match percentile(&spreads, config.qubo.s_max_percentile) {
        Some(s) if config.calibrate_s_max && s > 0.0 => s,
        _ => config.qubo.s_max,
    };
    Ok(Calibration {
        dx_mean,
        dx_sigma: window.dx_sigma,
        s_max,
        n_truth_doublets: ratios.len(),
        n_truth_quadruplets: spreads.len(),
    })
}

fn window_from(config: &RunConfig, mean: f64, sigma: f64) -> Result<PreselectionWindow> {
    PreselectionWindow::new(
        mean,
        sigma,
        config.preselect.n_sigma,
        config.preselect.max_delta_theta,
    )
}

pub fn make_subsolver(config: &RunConfig) -> Box<dyn SubSolver> {
    match config.solver.kind {
        SolverKind::Exact => Box::new(ExactSolver),
        SolverKind::Anneal => Box::new(AnnealSolver(config.solver.anneal)),
        SolverKind::Vqe => Box::new(VqeSolver(config.solver.vqe)),
    }
}

/// A reconstructed four-hit track.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Track {
    pub event_id: u64,
    pub track_id: u64,
    /// Hit ids ordered by layer.
    pub hit_ids: [u64; 4],
    pub chi2: f64,
    pub ndf: u32,
    pub energy: Option<f64>,
    pub matched_particle_id: Option<u64>,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct EventStats {
    pub hits: usize,
    pub doublets: usize,
    pub skipped_zero_x0: usize,
    pub triplets: usize,
    pub selected_triplets: usize,
    pub candidates: usize,
    pub tracks: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EventReconstruction {
    pub event_id: u64,
    pub tracks: Vec<Track>,
    /// Absent when the event had no triplet candidates.
    pub solve: Option<SolveReport>,
    pub stats: EventStats,
}

/// Doublets and triplets of one event that pass the window.
#[derive(Debug, Clone, PartialEq)]
pub struct Preselection {
    pub doublets: Vec<Doublet>,
    pub triplets: Vec<Triplet>,
    pub skipped_zero_x0: usize,
}

pub fn preselect_event(
    event: &Event,
    config: &RunConfig,
    calibration: &Calibration,
) -> Result<Preselection> {
    let window = window_from(config, calibration.dx_mean, calibration.dx_sigma)?;
    let (doublets, dstats) = build_doublets(&event.hits, &window);
    let triplets = build_triplets(&doublets, &window);
    Ok(Preselection {
        doublets,
        triplets,
        skipped_zero_x0: dstats.skipped_zero_x0,
    })
}

/// QUBO over `triplets` with the calibrated `s_max`.
pub fn event_qubo(triplets: &[Triplet], config: &RunConfig, calibration: &Calibration) -> Result<Qubo> {
    let scaling = QuboScaling {
        s_max: calibration.s_max,
        ..config.qubo
    };
    assemble_qubo(triplets, &scaling)
}

/// Pre-select, build and solve the QUBO, then form and clean tracks.
pub fn reconstruct_event(
    event: &Event,
    geometry: &DetectorGeometry,
    config: &RunConfig,
    calibration: &Calibration,
    subsolver: &dyn SubSolver,
) -> Result<EventReconstruction> {
    let hits = &event.hits;
    let pre = preselect_event(event, config, calibration)?;
    let triplets = pre.triplets;
    let mut stats = EventStats {
        hits: hits.len(),
        doublets: pre.doublets.len(),
        skipped_zero_x0: pre.skipped_zero_x0,
        triplets: triplets.len(),
        ..Default::default()
    };
    if triplets.is_empty() {
        return Ok(EventReconstruction {
            event_id: event.event_id,
            tracks: Vec::new(),
            solve: None,
            stats,
        });
    }

    let qubo = event_qubo(&triplets, config, calibration)?;
    let report = solve_iterative(
        &qubo,
        subsolver,
        &config.solver.iterative,
        derive_seed(config.seed, &[event.event_id]),
    )?;
    let selected: Vec<_> = report
        .best_assignment
        .selected()
        .map(|i| triplets[i])
        .collect();
    stats.selected_triplets = selected.len();

    let candidates = triplets_to_candidates(&selected);
    let fits: Vec<_> = candidates
        .iter()
        .map(|c| fit_track(c, hits, geometry))
        .collect();
    let kept = resolve_ambiguities(&candidates, &fits);
    stats.candidates = candidates.len();
    stats.tracks = kept.len();

    let tracks = kept
        .iter()
        .enumerate()
        .map(|(t, &k)| {
            let c = &candidates[k];
            Track {
                event_id: event.event_id,
                track_id: t as u64,
                hit_ids: c.hits.map(|h| hits[h].hit_id),
                chi2: fits[k].chi2,
                ndf: TRACK_NDF,
                energy: fits[k].energy_estimate,
                matched_particle_id: match_candidate(c, hits),
            }
        })
        .collect();
    Ok(EventReconstruction {
        event_id: event.event_id,
        tracks,
        solve: Some(report),
        stats,
    })
}

/// Reconstruct every event in parallel; output order follows `events`.
pub fn reconstruct(
    events: &[Event],
    config: &RunConfig,
    calibration: &Calibration,
) -> Result<Vec<EventReconstruction>> {
    config.validate()?;
    let geometry = config.geometry()?;
    let subsolver = make_subsolver(config);
    let subsolver: &dyn SubSolver = subsolver.as_ref();
    with_pool(config.jobs, || {
        events
            .par_iter()
            .map(|ev| reconstruct_event(ev, &geometry, config, calibration, subsolver))
            .collect::<Result<Vec<_>>>()
    })?
}
