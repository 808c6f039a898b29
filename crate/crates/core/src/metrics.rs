//! Efficiency, fake rate, duplication rate and energy resolution against
//! truth, with energy-binned curves and per-scenario aggregation.

use std::collections::{BTreeMap, HashMap, HashSet};

use serde::{Deserialize, Serialize};

use crate::detector::N_LAYERS;
use crate::error::{Error, Result};
use crate::event::Event;
use crate::pipeline::Track;

/// Default energy bin edges (GeV).
pub const DEFAULT_ENERGY_EDGES: [f64; 9] = [0.5, 1.0, 2.0, 3.0, 4.0, 6.0, 8.0, 10.0, 14.0];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Binning {
    pub edges: Vec<f64>,
}

impl Default for Binning {
    fn default() -> Self {
        Self {
            edges: DEFAULT_ENERGY_EDGES.to_vec(),
        }
    }
}

impl Binning {
    pub fn new(edges: Vec<f64>) -> Result<Self> {
        if edges.len() < 2 || edges.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::Config(format!(
                "bin edges must be strictly increasing with at least two entries: {edges:?}"
            )));
        }
        Ok(Self { edges })
    }

    /// Bin of `x`; the last bin includes its upper edge.
    pub fn find(&self, x: f64) -> Option<usize> {
        let n = self.edges.len() - 1;
        if x < self.edges[0] || x > self.edges[n] || x.is_nan() {
            return None;
        }
        Some(self.edges.partition_point(|&e| e <= x).saturating_sub(1).min(n - 1))
    }
}

/// Binomial ratio with a Wilson score interval (one standard deviation).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Ratio {
    pub numerator: u64,
    pub denominator: u64,
    pub value: Option<f64>,
    pub err_lo: Option<f64>,
    pub err_hi: Option<f64>,
}

impl Ratio {
    pub fn new(numerator: u64, denominator: u64) -> Self {
        if denominator == 0 {
            return Self {
                numerator,
                denominator,
                value: None,
                err_lo: None,
                err_hi: None,
            };
        }
        let (lo, hi) = wilson_interval(numerator, denominator, 1.0);
        let p = numerator as f64 / denominator as f64;
        Self {
            numerator,
            denominator,
            value: Some(p),
            err_lo: Some(p - lo),
            err_hi: Some(hi - p),
        }
    }
}

/// Wilson score interval for `k` successes in `n` trials at `z` sigma.
pub fn wilson_interval(k: u64, n: u64, z: f64) -> (f64, f64) {
    let n = n as f64;
    let p = k as f64 / n;
    let z2 = z * z;
    let denom = 1.0 + z2 / n;
    let centre = (p + z2 / (2.0 * n)) / denom;
    let half = z / denom * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt();
    ((centre - half).max(0.0), (centre + half).min(1.0))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BinValue {
    pub lo: f64,
    pub hi: f64,
    #[serde(flatten)]
    pub ratio: Ratio,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Counts {
    pub events: u64,
    /// Particles with a hit on every layer.
    pub generated: u64,
    pub reconstructed: u64,
    pub matched_tracks: u64,
    pub fake_tracks: u64,
    /// Generated particles matched by at least one track.
    pub matched_particles: u64,
    /// Particles matched by more than one track.
    pub duplicated_particles: u64,
    /// Particles (generated or not) matched by at least one track.
    pub matched_any_particles: u64,
    /// Fake tracks whose four hits come from four different particles.
    pub combinatorial_fakes: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub counts: Counts,
    pub efficiency: Option<f64>,
    pub fake_rate: Option<f64>,
    pub duplication_rate: Option<f64>,
    /// RMS of `(E_track - E_true) / E_true` over matched tracks.
    pub energy_resolution: Option<f64>,
    pub n_energy_tracks: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct XiGroup {
    pub xi_label: Option<f64>,
    pub summary: Summary,
    pub efficiency_vs_energy: Vec<BinValue>,
    pub fake_rate_vs_energy: Vec<BinValue>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    #[serde(flatten)]
    pub summary: Summary,
    /// Efficiency in bins of true energy.
    pub efficiency_vs_energy: Vec<BinValue>,
    /// Fake rate in bins of reconstructed track energy.
    pub fake_rate_vs_energy: Vec<BinValue>,
    /// Present when more than one scenario label occurs.
    pub per_xi: Vec<XiGroup>,
    pub violations: Vec<String>,
}

impl MetricsReport {
    pub fn is_consistent(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Running sums for one group of events.
#[derive(Default)]
struct Accumulator {
    counts: Counts,
    sq_rel_err: f64,
    n_energy: u64,
    eff_num: Vec<u64>,
    eff_den: Vec<u64>,
    fake_num: Vec<u64>,
    fake_den: Vec<u64>,
}

impl Accumulator {
    fn new(bins: usize) -> Self {
        Self {
            eff_num: vec![0; bins],
            eff_den: vec![0; bins],
            fake_num: vec![0; bins],
            fake_den: vec![0; bins],
            ..Default::default()
        }
    }

    fn summary(&self) -> Summary {
        let c = self.counts;
        Summary {
            counts: c,
            efficiency: Ratio::new(c.matched_particles, c.generated).value,
            fake_rate: Ratio::new(c.fake_tracks, c.reconstructed).value,
            duplication_rate: Ratio::new(c.duplicated_particles, c.matched_any_particles).value,
            energy_resolution: (self.n_energy >= 2)
                .then(|| (self.sq_rel_err / self.n_energy as f64).sqrt()),
            n_energy_tracks: self.n_energy,
        }
    }
}

/// Truth particle owning at least three of the track's hits.
fn match_track(
    track: &Track,
    event: &Event,
    index: &HashMap<u64, usize>,
) -> Result<(Option<u64>, usize)> {
    let mut owners: HashMap<Option<u64>, usize> = HashMap::new();
    for id in &track.hit_ids {
        let &h = index.get(id).ok_or_else(|| {
            Error::Join(format!(
                "track {} of event {} references missing hit {id}",
                track.track_id, event.event_id
            ))
        })?;
        *owners.entry(event.hits[h].truth_particle_id).or_default() += 1;
    }
    let distinct = owners
        .iter()
        .map(|(k, &c)| if k.is_some() { 1 } else { c })
        .sum();
    let matched = owners
        .into_iter()
        .find(|&(pid, c)| pid.is_some() && c * 4 >= 3 * N_LAYERS)
        .and_then(|(pid, _)| pid);
    Ok((matched, distinct))
}

fn accumulate(
    acc: &mut Accumulator,
    event: &Event,
    tracks: &[&Track],
    binning: &Binning,
    violations: &mut Vec<String>,
) -> Result<()> {
    let index = event.hit_index();
    let generated: HashSet<u64> = event
        .reconstructable_particles()
        .iter()
        .map(|p| p.particle_id)
        .collect();
    acc.counts.events += 1;
    acc.counts.generated += generated.len() as u64;
    acc.counts.reconstructed += tracks.len() as u64;

    let mut per_particle: HashMap<u64, u64> = HashMap::new();
    for t in tracks {
        let (matched, distinct) = match_track(t, event, &index)?;
        let energy_bin = t.energy.and_then(|e| binning.find(e));
        if let Some(b) = energy_bin {
            acc.fake_den[b] += 1;
        }
        match matched {
            Some(pid) => {
                acc.counts.matched_tracks += 1;
                *per_particle.entry(pid).or_default() += 1;
                let truth = event.particle(pid).ok_or_else(|| {
                    Error::Join(format!(
                        "event {}: hit truth refers to missing particle {pid}",
                        event.event_id
                    ))
                })?;
                if let Some(e) = t.energy {
                    let rel = (e - truth.energy) / truth.energy;
                    acc.sq_rel_err += rel * rel;
                    acc.n_energy += 1;
                }
            }
            None => {
                acc.counts.fake_tracks += 1;
                if distinct == N_LAYERS {
                    acc.counts.combinatorial_fakes += 1;
                }
                if let Some(b) = energy_bin {
                    acc.fake_num[b] += 1;
                }
            }
        }
    }

    for p in &event.particles {
        if !generated.contains(&p.particle_id) {
            continue;
        }
        let found = per_particle.contains_key(&p.particle_id);
        if found {
            acc.counts.matched_particles += 1;
        }
        if let Some(b) = binning.find(p.energy) {
            acc.eff_den[b] += 1;
            acc.eff_num[b] += found as u64;
        }
    }
    acc.counts.matched_any_particles += per_particle.len() as u64;
    acc.counts.duplicated_particles += per_particle.values().filter(|&&c| c > 1).count() as u64;

    for (a, ta) in tracks.iter().enumerate() {
        for tb in &tracks[a + 1..] {
            let shared = ta.hit_ids.iter().filter(|h| tb.hit_ids.contains(h)).count();
            if shared >= 2 {
                violations.push(format!(
                    "event {}: tracks {} and {} share {shared} hits",
                    event.event_id, ta.track_id, tb.track_id
                ));
            }
        }
    }
    Ok(())
}

fn curve(binning: &Binning, num: &[u64], den: &[u64]) -> Vec<BinValue> {
    binning
        .edges
        .windows(2)
        .enumerate()
        .map(|(b, w)| BinValue {
            lo: w[0],
            hi: w[1],
            ratio: Ratio::new(num[b], den[b]),
        })
        .collect()
}

fn check_summary(label: &str, s: &Summary, out: &mut Vec<String>) {
    for (name, v) in [
        ("efficiency", s.efficiency),
        ("fake_rate", s.fake_rate),
        ("duplication_rate", s.duplication_rate),
    ] {
        if let Some(v) = v {
            if !(0.0..=1.0).contains(&v) {
                out.push(format!("{label}{name} = {v} outside [0, 1]"));
            }
        }
    }
    let c = s.counts;
    if c.matched_tracks + c.fake_tracks != c.reconstructed {
        out.push(format!(
            "{label}matched ({}) + fake ({}) != reconstructed ({})",
            c.matched_tracks, c.fake_tracks, c.reconstructed
        ));
    }
}

/// Score `tracks` against the truth in `events`. Every track must belong to
/// one of the events; events without tracks count with zero tracks.
pub fn evaluate(events: &[Event], tracks: &[Track], binning: &Binning) -> Result<MetricsReport> {
    let mut by_event: BTreeMap<u64, Vec<&Track>> = BTreeMap::new();
    for t in tracks {
        by_event.entry(t.event_id).or_default().push(t);
    }
    let known: HashSet<u64> = events.iter().map(|e| e.event_id).collect();
    if known.len() != events.len() {
        return Err(Error::Join("duplicate event ids in truth".into()));
    }
    let missing: Vec<u64> = by_event.keys().copied().filter(|id| !known.contains(id)).collect();
    if !missing.is_empty() {
        return Err(Error::Join(format!(
            "tracks reference events absent from truth: {missing:?}"
        )));
    }

    let bins = binning.edges.len() - 1;
    let mut total = Accumulator::new(bins);
    let mut groups: BTreeMap<Option<u64>, (Option<f64>, Accumulator)> = BTreeMap::new();
    let mut violations = Vec::new();
    let mut sorted: Vec<&Event> = events.iter().collect();
    sorted.sort_by_key(|e| e.event_id);
    for ev in sorted {
        let mut t: Vec<&Track> = by_event.remove(&ev.event_id).unwrap_or_default();
        t.sort_by_key(|t| t.track_id);
        accumulate(&mut total, ev, &t, binning, &mut violations)?;
        let key = ev.xi_label.map(f64::to_bits);
        let g = groups
            .entry(key)
            .or_insert_with(|| (ev.xi_label, Accumulator::new(bins)));
        accumulate(&mut g.1, ev, &t, binning, &mut Vec::new())?;
    }

    let summary = total.summary();
    check_summary("", &summary, &mut violations);
    // Grouped whenever any event carries a label.
    let labelled = groups.len() > 1 || groups.keys().any(Option::is_some);
    let mut per_xi: Vec<XiGroup> = if labelled {
        groups
            .into_values()
            .map(|(xi_label, acc)| XiGroup {
                xi_label,
                summary: acc.summary(),
                efficiency_vs_energy: curve(binning, &acc.eff_num, &acc.eff_den),
                fake_rate_vs_energy: curve(binning, &acc.fake_num, &acc.fake_den),
            })
            .collect()
    } else {
        Vec::new()
    };
    per_xi.sort_by(|a, b| {
        a.xi_label
            .unwrap_or(f64::NEG_INFINITY)
            .total_cmp(&b.xi_label.unwrap_or(f64::NEG_INFINITY))
    });
    for g in &per_xi {
        check_summary(&format!("xi {:?}: ", g.xi_label), &g.summary, &mut violations);
    }

    Ok(MetricsReport {
        summary,
        efficiency_vs_energy: curve(binning, &total.eff_num, &total.eff_den),
        fake_rate_vs_energy: curve(binning, &total.fake_num, &total.fake_den),
        per_xi,
        violations,
    })
}
