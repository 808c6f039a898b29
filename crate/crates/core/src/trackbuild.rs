//! Four-hit track candidates from selected triplets: straight-line fit,
//! energy estimate, truth matching and ambiguity resolution.

use std::collections::{HashMap, HashSet};

use serde::{Deserialize, Serialize};

use crate::detector::{DetectorGeometry, N_LAYERS};
use crate::error::{Error, Result};
use crate::event::Hit;
use crate::preselect::Triplet;

/// Degrees of freedom of a four-hit, two-projection line fit.
pub const TRACK_NDF: u32 = 2 * N_LAYERS as u32 - 4;

/// Four hits, one per layer, built from two chained triplets.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct TrackCandidate {
    /// Hit indices ordered by layer.
    pub hits: [usize; N_LAYERS],
    /// Indices of the inner and outer triplet in the selection.
    pub source_triplets: (usize, usize),
}

impl TrackCandidate {
    pub fn shared_hits(&self, other: &TrackCandidate) -> usize {
        self.hits.iter().filter(|h| other.hits.contains(h)).count()
    }
}

/// Straight lines `x = x0 + tx z`, `y = y0 + ty z`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrackFit {
    pub x0: f64,
    pub y0: f64,
    pub tx: f64,
    pub ty: f64,
    pub chi2: f64,
    pub ndf: u32,
    /// `None` when the slope cannot be inverted to an energy.
    pub energy_estimate: Option<f64>,
}

impl TrackFit {
    pub fn chi2_ndf(&self) -> f64 {
        self.chi2 / self.ndf as f64
    }
}

/// One candidate per pair of selected triplets that chain into four hits.
/// Candidates with an identical hit set are emitted once, first pair wins.
pub fn triplets_to_candidates(selected: &[Triplet]) -> Vec<TrackCandidate> {
    let mut by_first_two: HashMap<(usize, usize), Vec<usize>> = HashMap::new();
    for (k, t) in selected.iter().enumerate() {
        by_first_two.entry((t.hits[0], t.hits[1])).or_default().push(k);
    }
    let mut seen = HashSet::new();
    let mut out = Vec::new();
    for (i, inner) in selected.iter().enumerate() {
        if inner.layer_span.0 != 0 {
            continue;
        }
        let Some(outers) = by_first_two.get(&(inner.hits[1], inner.hits[2])) else {
            continue;
        };
        for &j in outers {
            let hits = [inner.hits[0], inner.hits[1], inner.hits[2], selected[j].hits[2]];
            if seen.insert(hits) {
                out.push(TrackCandidate {
                    hits,
                    source_triplets: (i, j),
                });
            }
        }
    }
    out
}

/// Unweighted least squares of `v` against `z`: `(intercept, slope, rss)`.
fn line_fit(z: &[f64; N_LAYERS], v: &[f64; N_LAYERS]) -> (f64, f64, f64) {
    let n = N_LAYERS as f64;
    let mz = z.iter().sum::<f64>() / n;
    let mv = v.iter().sum::<f64>() / n;
    let mut szz = 0.0;
    let mut szv = 0.0;
    for k in 0..N_LAYERS {
        szz += (z[k] - mz) * (z[k] - mz);
        szv += (z[k] - mz) * (v[k] - mv);
    }
    let slope = szv / szz;
    let rss = (0..N_LAYERS)
        .map(|k| (v[k] - mv - slope * (z[k] - mz)).powi(2))
        .sum();
    (mv - slope * mz, slope, rss)
}

/// Least-squares straight lines in x-z and y-z with per-hit sigma equal to
/// the hit resolution, plus the energy implied by the x slope.
pub fn fit_track(candidate: &TrackCandidate, hits: &[Hit], geometry: &DetectorGeometry) -> TrackFit {
    let mut z = [0.0; N_LAYERS];
    let mut x = [0.0; N_LAYERS];
    let mut y = [0.0; N_LAYERS];
    for (k, &h) in candidate.hits.iter().enumerate() {
        [x[k], y[k], z[k]] = hits[h].position;
    }
    let (x0, tx, rx) = line_fit(&z, &x);
    let (y0, ty, ry) = line_fit(&z, &y);
    let sigma2 = geometry.hit_resolution * geometry.hit_resolution;
    let mut fit = TrackFit {
        x0,
        y0,
        tx,
        ty,
        chi2: (rx + ry) / sigma2,
        ndf: TRACK_NDF,
        energy_estimate: None,
    };
    fit.energy_estimate = estimate_energy(&fit, geometry).ok();
    fit
}

/// Invert the thin-lens dipole kick. The incoming direction is taken from
/// the interaction point to the fitted track position at the magnet
/// centre, the outgoing one from the fitted slope.
pub fn estimate_energy(fit: &TrackFit, geometry: &DetectorGeometry) -> Result<f64> {
    let [ipx, _, ipz] = geometry.ip_position;
    let zc = geometry.dipole_center_z;
    let xc = fit.x0 + fit.tx * zc;
    let incoming = ((xc - ipx) / (zc - ipz)).atan();
    let bend = fit.tx.atan() - incoming;
    let s = bend.sin();
    if s.abs() < 1e-9 {
        return Err(Error::UndeflectedTrack(s.abs()));
    }
    if s < 0.0 {
        return Err(Error::Domain(format!(
            "track bends against the field direction (angle {bend})"
        )));
    }
    Ok(geometry.pt_kick() / s)
}

/// Particle owning at least three of the four hits.
pub fn match_candidate(candidate: &TrackCandidate, hits: &[Hit]) -> Option<u64> {
    let mut counts: HashMap<u64, usize> = HashMap::new();
    for &h in &candidate.hits {
        if let Some(pid) = hits[h].truth_particle_id {
            *counts.entry(pid).or_default() += 1;
        }
    }
    counts
        .into_iter()
        .find(|&(_, c)| c * 4 >= 3 * N_LAYERS)
        .map(|(pid, _)| pid)
}

/// Iteratively remove candidates sharing two or more hits.
///
/// The surviving candidate with the most hits shared with other survivors
/// (among those still in conflict) is compared with every candidate it
/// conflicts with. If any of them has a better `chi2/ndf` it is rejected
/// itself, otherwise all of them are. Equal `chi2/ndf` favours the lower
/// index. Returns the kept indices in ascending order.
pub fn resolve_ambiguities(candidates: &[TrackCandidate], fits: &[TrackFit]) -> Vec<usize> {
    assert_eq!(candidates.len(), fits.len());
    let n = candidates.len();
    let mut alive = vec![true; n];
    let mut by_hit: HashMap<usize, Vec<usize>> = HashMap::new();
    for (k, c) in candidates.iter().enumerate() {
        for &h in &c.hits {
            by_hit.entry(h).or_default().push(k);
        }
    }
    let better = |a: usize, b: usize| {
        let (ca, cb) = (fits[a].chi2_ndf(), fits[b].chi2_ndf());
        ca < cb || (ca == cb && a < b)
    };

    loop {
        // (shared hit count, conflicting partners) per live candidate
        let mut pick: Option<(usize, usize, Vec<usize>)> = None;
        for k in (0..n).filter(|&k| alive[k]) {
            let mut shared = 0;
            let mut partners: HashMap<usize, usize> = HashMap::new();
            for &h in &candidates[k].hits {
                let mut used = false;
                for &o in &by_hit[&h] {
                    if o != k && alive[o] {
                        used = true;
                        *partners.entry(o).or_default() += 1;
                    }
                }
                shared += used as usize;
            }
            let mut conflicts: Vec<usize> = partners
                .into_iter()
                .filter(|&(_, c)| c >= 2)
                .map(|(o, _)| o)
                .collect();
            if conflicts.is_empty() {
                continue;
            }
            conflicts.sort_unstable();
            if pick.as_ref().is_none_or(|p| shared > p.1) {
                pick = Some((k, shared, conflicts));
            }
        }
        let Some((k, _, conflicts)) = pick else {
            break;
        };
        if conflicts.iter().any(|&o| better(o, k)) {
            alive[k] = false;
        } else {
            for o in conflicts {
                alive[o] = false;
            }
        }
    }
    (0..n).filter(|&k| alive[k]).collect()
}
