//! End-to-end properties of simulate, pre-select, reconstruct and evaluate,
//! including the CSV exchange formats.

mod common;

use std::path::Path;

use rand::seq::SliceRandom;

use common::rng;
use trackqubo::config::RunConfig;
use trackqubo::event::Event;
use trackqubo::fastsim::SimConfig;
use trackqubo::io::{
    read_dataset, read_tracks_file, write_dataset, write_tracks_file, Metadata, Provenance,
    HITS_FILE,
};
use trackqubo::metrics::{evaluate, Binning, MetricsReport};
use trackqubo::pipeline::{calibrate, reconstruct, simulate, Calibration, Track};
use trackqubo::preselect::{build_doublets, is_truth_doublet, truth_doublets, PreselectionWindow};

fn run(config: &RunConfig, events: &[Event], cal: &Calibration) -> Vec<Track> {
    reconstruct(events, config, cal)
        .unwrap()
        .into_iter()
        .flat_map(|r| r.tracks)
        .collect()
}

fn small(multiplicity: f64, seed: u64) -> RunConfig {
    RunConfig {
        sim: SimConfig {
            mean_multiplicity: multiplicity,
            ..Default::default()
        },
        seed,
        jobs: Some(2),
        ..Default::default()
    }
}

/// Fraction of truth doublets kept by the `dx/x0` window alone.
fn doublet_efficiency(events: &[Event], cal: &Calibration, n_sigma: f64) -> f64 {
    let window = PreselectionWindow::new(cal.dx_mean, cal.dx_sigma, n_sigma, 1e-3).unwrap();
    let (mut kept, mut total) = (0usize, 0usize);
    for ev in events {
        total += truth_doublets(&ev.hits).len();
        let (doublets, _) = build_doublets(&ev.hits, &window);
        kept += doublets
            .iter()
            .filter(|d| is_truth_doublet(d, &ev.hits))
            .count();
    }
    kept as f64 / total as f64
}

#[test]
fn doublet_efficiency_grows_with_the_window() {
    let config = small(100.0, 8);
    let events = simulate(&config, 0..5).unwrap();
    let cal = calibrate(&events, &config).unwrap();
    let effs: Vec<f64> = [1.0, 2.0, 3.0]
        .iter()
        .map(|&k| doublet_efficiency(&events, &cal, k))
        .collect();
    assert!(effs.windows(2).all(|w| w[0] <= w[1]), "{effs:?}");
    assert!(effs[2] > 0.97, "{effs:?}");
}

#[test]
fn noiseless_sparse_events_are_reconstructed_perfectly() {
    let config = RunConfig {
        sim: SimConfig {
            mean_multiplicity: 5.0,
            ..SimConfig::noiseless()
        },
        seed: 4,
        jobs: Some(2),
        ..Default::default()
    };
    let events = simulate(&config, 0..20).unwrap();
    let cal = calibrate(&events, &config).unwrap();
    let tracks = run(&config, &events, &cal);
    let m = evaluate(&events, &tracks, &Binning::default()).unwrap();
    assert!(m.summary.counts.generated > 50);
    assert_eq!(m.summary.efficiency, Some(1.0));
    assert_eq!(m.summary.fake_rate, Some(0.0));
    assert!(m.summary.energy_resolution.unwrap() < 1e-6);
}

#[test]
fn energy_resolution_degrades_with_hit_resolution() {
    let res: Vec<f64> = [5e-6, 10e-6, 20e-6]
        .iter()
        .map(|&sigma| {
            let mut config = small(100.0, 12);
            config.geometry.hit_resolution = sigma;
            let events = simulate(&config, 0..6).unwrap();
            let cal = calibrate(&events, &config).unwrap();
            let tracks = run(&config, &events, &cal);
            let m = evaluate(&events, &tracks, &Binning::default()).unwrap();
            m.summary.energy_resolution.unwrap()
        })
        .collect();
    assert!(res.windows(2).all(|w| w[0] < w[1]), "{res:?}");
}

#[test]
fn low_energy_efficiency_does_not_exceed_high_energy_efficiency() {
    let config = small(100.0, 31);
    let events = simulate(&config, 0..20).unwrap();
    let cal = calibrate(&events, &config).unwrap();
    let m = evaluate(&events, &run(&config, &events, &cal), &Binning::default()).unwrap();
    let bins = &m.efficiency_vs_energy;
    let lowest = bins.iter().find(|b| b.ratio.denominator > 0).unwrap();
    let (num, den) = bins
        .iter()
        .filter(|b| b.lo >= 3.0)
        .fold((0, 0), |(n, d), b| {
            (n + b.ratio.numerator, d + b.ratio.denominator)
        });
    assert!(den > 0);
    assert!(lowest.ratio.value.unwrap() <= num as f64 / den as f64);
}

fn report_json(m: &MetricsReport) -> String {
    serde_json::to_string(m).unwrap()
}

/// Shuffle the data rows of a CSV file, keeping the
/// provenance comment and header in place.
fn shuffle_rows(path: &Path, seed: u64) {
    let text = std::fs::read_to_string(path).unwrap();
    let mut lines: Vec<&str> = text.lines().collect();
    let keep = lines.iter().take_while(|l| l.starts_with('#')).count() + 1;
    lines[keep..].shuffle(&mut rng(seed));
    std::fs::write(path, lines.join("\n") + "\n").unwrap();
}

#[test]
fn csv_round_trip_preserves_reconstruction_and_metrics() {
    let dir = tempfile::tempdir().unwrap();
    let config = small(60.0, 17);
    let geometry = config.geometry().unwrap();
    let events = simulate(&config, 0..6).unwrap();
    let metadata = Metadata {
        config_hash: config.config_hash(),
        seed: config.seed,
        first_event: 0,
        n_events: 6,
        xi_label: None,
        mean_multiplicity: 60.0,
        calibration: None,
        config: config.clone(),
    };
    let data = dir.path().join("data");
    write_dataset(&data, &events, &metadata).unwrap();
    let read = read_dataset(&data, &geometry).unwrap().events;
    assert_eq!(read.len(), events.len());

    let cal = calibrate(&read, &config).unwrap();
    let tracks = run(&config, &read, &cal);
    assert!(!tracks.is_empty());
    let in_memory = evaluate(&read, &tracks, &Binning::default()).unwrap();

    let tracks_path = dir.path().join("tracks.csv");
    write_tracks_file(&tracks_path, &tracks, &Provenance::of(&config)).unwrap();
    let back = read_tracks_file(&tracks_path).unwrap();
    assert_eq!(back, tracks);
    let from_disk = evaluate(&read, &back, &Binning::default()).unwrap();
    assert_eq!(report_json(&from_disk), report_json(&in_memory));

    // Counts agree with the original events; energies only to the
    // printed precision.
    let original = evaluate(&events, &run(&config, &events, &cal), &Binning::default()).unwrap();
    assert_eq!(original.summary.counts, in_memory.summary.counts);
    let (a, b) = (
        original.summary.energy_resolution.unwrap(),
        in_memory.summary.energy_resolution.unwrap(),
    );
    assert!((a - b).abs() < 1e-6 * a, "{a} vs {b}");

    shuffle_rows(&data.join(HITS_FILE), 1);
    shuffle_rows(&tracks_path, 2);
    let shuffled = read_dataset(&data, &geometry).unwrap().events;
    assert_eq!(shuffled, read);
    let reshuffled_tracks = read_tracks_file(&tracks_path).unwrap();
    let m = evaluate(&shuffled, &reshuffled_tracks, &Binning::default()).unwrap();
    assert_eq!(report_json(&m), report_json(&in_memory));
}
