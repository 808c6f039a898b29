//! Doublet and triplet candidate building with the `dx/x0` and
//! `delta_theta` pre-selection cuts.
//!
//! Doublets and triplets refer to hits by their index in the event's hit
//! slice.

use serde::{Deserialize, Serialize};

use crate::detector::N_LAYERS;
use crate::error::{Error, Result};
use crate::event::Hit;

/// Smallest admissible window width.
pub const DX_SIGMA_FLOOR: f64 = 1e-9;

/// Two hits on consecutive layers.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Doublet {
    pub hit_inner: usize,
    pub hit_outer: usize,
    pub layer_inner: usize,
    pub theta_xz: f64,
    pub theta_yz: f64,
    pub dx_over_x0: f64,
}

/// Two doublets chained through a shared middle hit.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Triplet {
    pub doublet_first: usize,
    pub doublet_second: usize,
    /// Hit indices ordered by layer.
    pub hits: [usize; 3],
    pub layer_span: (usize, usize),
    pub delta_theta: f64,
    pub delta_theta_xz: f64,
    pub delta_theta_yz: f64,
    /// `(theta_xz, theta_yz)` of the first and second doublet.
    pub doublet_angles: [(f64, f64); 2],
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PreselectionWindow {
    pub dx_mean: f64,
    pub dx_sigma: f64,
    pub n_sigma: f64,
    pub max_delta_theta: f64,
}

impl PreselectionWindow {
    /// Widths below [`DX_SIGMA_FLOOR`] are raised to it.
    pub fn new(dx_mean: f64, dx_sigma: f64, n_sigma: f64, max_delta_theta: f64) -> Result<Self> {
        if !dx_mean.is_finite() || !dx_sigma.is_finite() || dx_sigma < 0.0 {
            return Err(Error::Config(format!(
                "invalid dx window mean={dx_mean} sigma={dx_sigma}"
            )));
        }
        if !(n_sigma > 0.0) || !(max_delta_theta > 0.0) {
            return Err(Error::Config(format!(
                "n_sigma ({n_sigma}) and max_delta_theta ({max_delta_theta}) must be positive"
            )));
        }
        Ok(Self {
            dx_mean,
            dx_sigma: dx_sigma.max(DX_SIGMA_FLOOR),
            n_sigma,
            max_delta_theta,
        })
    }

    pub fn accepts_dx(&self, dx_over_x0: f64) -> bool {
        (dx_over_x0 - self.dx_mean).abs() <= self.n_sigma * self.dx_sigma
    }

    fn dx_bounds(&self) -> (f64, f64) {
        let half = self.n_sigma * self.dx_sigma;
        (self.dx_mean - half, self.dx_mean + half)
    }
}

/// Build a doublet from two hits on consecutive layers, or `None` when the
/// inner hit sits at `x = 0` and the ratio is undefined.
pub fn make_doublet(hits: &[Hit], inner: usize, outer: usize) -> Option<Doublet> {
    let (a, b) = (&hits[inner], &hits[outer]);
    debug_assert_eq!(b.layer, a.layer + 1);
    let x0 = a.position[0];
    if x0 == 0.0 {
        return None;
    }
    let dz = b.position[2] - a.position[2];
    let dx = b.position[0] - a.position[0];
    let dy = b.position[1] - a.position[1];
    Some(Doublet {
        hit_inner: inner,
        hit_outer: outer,
        layer_inner: a.layer,
        theta_xz: (dx / dz).atan(),
        theta_yz: (dy / dz).atan(),
        dx_over_x0: dx / x0,
    })
}

fn by_layer(hits: &[Hit]) -> [Vec<usize>; N_LAYERS] {
    let mut layers: [Vec<usize>; N_LAYERS] = Default::default();
    for (i, h) in hits.iter().enumerate() {
        if h.layer < N_LAYERS {
            layers[h.layer].push(i);
        }
    }
    layers
}

/// All doublets whose two hits carry the same truth particle.
pub fn truth_doublets(hits: &[Hit]) -> Vec<Doublet> {
    let layers = by_layer(hits);
    let mut out = Vec::new();
    for l in 0..N_LAYERS - 1 {
        for &i in &layers[l] {
            let Some(pid) = hits[i].truth_particle_id else {
                continue;
            };
            for &j in &layers[l + 1] {
                if hits[j].truth_particle_id == Some(pid) {
                    if let Some(d) = make_doublet(hits, i, j) {
                        out.push(d);
                    }
                }
            }
        }
    }
    out
}

/// Sample mean and standard deviation of `dx/x0` over the truth-matched
/// members of `doublets`.
pub fn calibrate_dx_window(doublets: &[Doublet], hits: &[Hit]) -> Result<(f64, f64)> {
    let values: Vec<f64> = doublets
        .iter()
        .filter(|d| {
            let pid = hits[d.hit_inner].truth_particle_id;
            pid.is_some() && pid == hits[d.hit_outer].truth_particle_id
        })
        .map(|d| d.dx_over_x0)
        .collect();
    mean_and_sigma(&values)
}

/// Sample mean and (n-1) standard deviation.
pub fn mean_and_sigma(values: &[f64]) -> Result<(f64, f64)> {
    if values.len() < 2 {
        return Err(Error::Calibration(format!(
            "need at least 2 truth doublets, got {}",
            values.len()
        )));
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    Ok((mean, var.sqrt()))
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct DoubletStats {
    /// Pairs skipped because the inner hit has `x = 0`.
    pub skipped_zero_x0: usize,
}

/// All consecutive-layer hit pairs passing the `dx/x0` window.
///
/// Outer hits are sorted by x and scanned only inside the x range the window
/// allows, so cost grows with the number of accepted pairs rather than with
/// the square of the layer occupancy.
pub fn build_doublets(hits: &[Hit], window: &PreselectionWindow) -> (Vec<Doublet>, DoubletStats) {
    let layers = by_layer(hits);
    let (lo, hi) = window.dx_bounds();
    let mut stats = DoubletStats::default();
    let mut out = Vec::new();

    for l in 0..N_LAYERS - 1 {
        let mut outer = layers[l + 1].clone();
        outer.sort_by(|&a, &b| hits[a].position[0].total_cmp(&hits[b].position[0]));
        let xs: Vec<f64> = outer.iter().map(|&j| hits[j].position[0]).collect();

        for &i in &layers[l] {
            let x0 = hits[i].position[0];
            if x0 == 0.0 {
                stats.skipped_zero_x0 += outer.len();
                continue;
            }
            // x_outer = x0 * (1 + r) for r in [lo, hi]; pad the range and
            // re-check exactly below.
            let (a, b) = (x0 * (1.0 + lo), x0 * (1.0 + hi));
            let (xmin, xmax) = (a.min(b), a.max(b));
            let pad = 1e-12 * (xmin.abs() + xmax.abs() + 1.0);
            let start = xs.partition_point(|&x| x < xmin - pad);
            let end = xs.partition_point(|&x| x <= xmax + pad);
            for &j in &outer[start..end] {
                if let Some(d) = make_doublet(hits, i, j) {
                    if window.accepts_dx(d.dx_over_x0) {
                        out.push(d);
                    }
                }
            }
        }
    }
    out.sort_by_key(|d| (d.layer_inner, d.hit_inner, d.hit_outer));
    (out, stats)
}

/// Angle difference between two chained doublets.
pub fn triplet_delta_theta(d1: &Doublet, d2: &Doublet) -> Result<f64> {
    if d1.hit_outer != d2.hit_inner {
        return Err(Error::Contract(format!(
            "doublets do not chain: outer hit {} != inner hit {}",
            d1.hit_outer, d2.hit_inner
        )));
    }
    Ok((d2.theta_xz - d1.theta_xz).hypot(d2.theta_yz - d1.theta_yz))
}

fn make_triplet(doublets: &[Doublet], first: usize, second: usize) -> Triplet {
    let (d1, d2) = (&doublets[first], &doublets[second]);
    let dxz = d2.theta_xz - d1.theta_xz;
    let dyz = d2.theta_yz - d1.theta_yz;
    Triplet {
        doublet_first: first,
        doublet_second: second,
        hits: [d1.hit_inner, d1.hit_outer, d2.hit_outer],
        layer_span: (d1.layer_inner, d2.layer_inner + 1),
        delta_theta: dxz.hypot(dyz),
        delta_theta_xz: dxz,
        delta_theta_yz: dyz,
        doublet_angles: [(d1.theta_xz, d1.theta_yz), (d2.theta_xz, d2.theta_yz)],
    }
}

/// All chained doublet pairs with `delta_theta <= max_delta_theta`.
pub fn build_triplets(doublets: &[Doublet], window: &PreselectionWindow) -> Vec<Triplet> {
    let mut by_inner: std::collections::HashMap<usize, Vec<usize>> = Default::default();
    for (k, d) in doublets.iter().enumerate() {
        by_inner.entry(d.hit_inner).or_default().push(k);
    }
    let mut out = Vec::new();
    for (k, d1) in doublets.iter().enumerate() {
        if let Some(nexts) = by_inner.get(&d1.hit_outer) {
            for &m in nexts {
                let t = make_triplet(doublets, k, m);
                if t.delta_theta <= window.max_delta_theta {
                    out.push(t);
                }
            }
        }
    }
    out
}

/// Whether all three hits of `t` belong to one truth particle.
pub fn is_truth_triplet(t: &Triplet, hits: &[Hit]) -> bool {
    let pid = hits[t.hits[0]].truth_particle_id;
    pid.is_some() && t.hits.iter().all(|&h| hits[h].truth_particle_id == pid)
}

pub fn is_truth_doublet(d: &Doublet, hits: &[Hit]) -> bool {
    let pid = hits[d.hit_inner].truth_particle_id;
    pid.is_some() && hits[d.hit_outer].truth_particle_id == pid
}
