//! CSV and JSON exchange formats.
//!
//! Every CSV file starts with a `# config_hash=<hex> seed=<n>` comment line;
//! readers skip `#` lines. Hit and particle coordinates are written with nine
//! significant digits. Track fields and QUBO coefficients use the shortest
//! representation that parses back to the same `f64`, so metrics recomputed
//! from a written tracks file match the in-memory values exactly.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::config::RunConfig;
use crate::detector::{DetectorGeometry, N_LAYERS};
use crate::error::{Error, Result};
use crate::event::{Event, Hit, TruthParticle};
use crate::metrics::{BinValue, MetricsReport, Ratio, Summary};
use crate::pipeline::{Calibration, Track};
use crate::preselect::{Doublet, Triplet};
use crate::qubo::{Assignment, Qubo};

pub const HITS_HEADER: [&str; 8] = [
    "event_id",
    "hit_id",
    "layer",
    "x",
    "y",
    "z",
    "truth_particle_id",
    "truth_energy",
];
pub const PARTICLES_HEADER: [&str; 9] = [
    "event_id",
    "particle_id",
    "energy",
    "ox",
    "oy",
    "oz",
    "dx",
    "dy",
    "dz",
];
pub const TRACKS_HEADER: [&str; 7] = [
    "event_id",
    "track_id",
    "hit_ids",
    "chi2",
    "ndf",
    "energy",
    "matched_particle_id",
];
pub const CURVE_HEADER: [&str; 5] = ["bin_lo", "bin_hi", "value", "err_lo", "err_hi"];
pub const PLOTDATA_HEADER: [&str; 6] = ["metric", "xi_label", "bin", "value", "err_lo", "err_hi"];
pub const COUNTS_HEADER: [&str; 2] = ["bitstring", "count"];
pub const FEATURES_HEADER: [&str; 12] = [
    "event_id",
    "id",
    "kind",
    "layer_inner",
    "hit_a",
    "hit_b",
    "hit_c",
    "dx_over_x0",
    "theta_xz",
    "theta_yz",
    "delta_theta",
    "truth_matched",
];

/// Hits whose `z` is within this distance of a layer plane are placed
/// exactly on it when read back.
pub const Z_SNAP_TOLERANCE: f64 = 1e-6;

pub const HITS_FILE: &str = "hits.csv";
pub const PARTICLES_FILE: &str = "particles.csv";
pub const METADATA_FILE: &str = "metadata.json";

/// Identifies the configuration that produced an artifact.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Provenance {
    pub config_hash: String,
    pub seed: u64,
}

impl Provenance {
    pub fn of(config: &RunConfig) -> Self {
        Self {
            config_hash: config.config_hash(),
            seed: config.seed,
        }
    }

    pub fn comment(&self) -> String {
        format!("# config_hash={} seed={}", self.config_hash, self.seed)
    }

    /// Parse a line produced by [`Provenance::comment`].
    pub fn parse_comment(line: &str) -> Option<Self> {
        let rest = line.trim().strip_prefix('#')?.trim();
        let mut hash = None;
        let mut seed = None;
        for kv in rest.split_whitespace() {
            match kv.split_once('=') {
                Some(("config_hash", v)) => hash = Some(v.to_string()),
                Some(("seed", v)) => seed = v.parse().ok(),
                _ => {}
            }
        }
        Some(Self {
            config_hash: hash?,
            seed: seed?,
        })
    }
}

/// Provenance line of a CSV or dump file, if present.
pub fn read_provenance(path: &Path) -> Result<Option<Provenance>> {
    let f = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut line = String::new();
    BufReader::new(f)
        .read_line(&mut line)
        .map_err(|e| Error::io(path, e))?;
    Ok(Provenance::parse_comment(&line))
}

/// Nine significant digits.
pub fn fmt_sig9(x: f64) -> String {
    format!("{x:.8e}")
}

/// Shortest string that parses back to `x`.
pub fn fmt_exact(x: f64) -> String {
    format!("{x:e}")
}

fn opt<T>(v: Option<T>, f: impl FnOnce(T) -> String) -> String {
    v.map(f).unwrap_or_default()
}

fn csv_writer<W: Write>(mut w: W, prov: &Provenance, header: &[&str]) -> std::io::Result<csv::Writer<W>> {
    writeln!(w, "{}", prov.comment())?;
    let mut out = csv::Writer::from_writer(w);
    out.write_record(header)?;
    Ok(out)
}

/// Rows of a headed CSV stream, with file/line context for errors.
struct Rows<R: Read> {
    name: String,
    reader: csv::Reader<BufReader<R>>,
    /// Leading comment lines consumed before the header.
    skipped: u64,
}

struct Row<'a> {
    name: &'a str,
    line: u64,
    record: csv::StringRecord,
}

impl<R: Read> Rows<R> {
    fn new(reader: R, name: &str, header: &[&str]) -> Result<Self> {
        // The csv reader does not count comment lines ahead of the header.
        let mut buf = BufReader::new(reader);
        let mut skipped = 0;
        loop {
            let head = buf.fill_buf().map_err(|e| Error::Parse {
                file: name.to_string(),
                line: skipped + 1,
                msg: e.to_string(),
            })?;
            if head.first() != Some(&b'#') {
                break;
            }
            let mut line = Vec::new();
            buf.read_until(b'\n', &mut line).map_err(|e| Error::Parse {
                file: name.to_string(),
                line: skipped + 1,
                msg: e.to_string(),
            })?;
            skipped += 1;
        }
        let mut reader = csv::ReaderBuilder::new()
            .comment(Some(b'#'))
            .flexible(false)
            .from_reader(buf);
        let got = reader
            .headers()
            .map_err(|e| csv_error(name, skipped, e))?
            .clone();
        if got.iter().ne(header.iter().copied()) {
            return Err(Error::Parse {
                file: name.to_string(),
                line: skipped + 1,
                msg: format!(
                    "expected header {:?}, got {:?}",
                    header.join(","),
                    got.iter().collect::<Vec<_>>().join(",")
                ),
            });
        }
        Ok(Self {
            name: name.to_string(),
            reader,
            skipped,
        })
    }

    fn next_row(&mut self) -> Result<Option<Row<'_>>> {
        let mut record = csv::StringRecord::new();
        match self.reader.read_record(&mut record) {
            Ok(false) => Ok(None),
            Ok(true) => Ok(Some(Row {
                name: &self.name,
                line: self.skipped + record.position().map_or(0, |p| p.line()),
                record,
            })),
            Err(e) => Err(csv_error(&self.name, self.skipped, e)),
        }
    }
}

fn csv_error(name: &str, skipped: u64, e: csv::Error) -> Error {
    let line = skipped + e.position().map_or(0, |p| p.line());
    Error::Parse {
        file: name.to_string(),
        line,
        msg: e.to_string(),
    }
}

impl Row<'_> {
    fn error(&self, msg: String) -> Error {
        Error::Parse {
            file: self.name.to_string(),
            line: self.line,
            msg,
        }
    }

    fn raw(&self, i: usize) -> &str {
        self.record.get(i).unwrap_or("").trim()
    }

    fn get<T: FromStr>(&self, i: usize, field: &str) -> Result<T>
    where
        T::Err: std::fmt::Display,
    {
        let s = self.raw(i);
        s.parse()
            .map_err(|e| self.error(format!("field {field}: cannot parse {s:?}: {e}")))
    }

    fn get_opt<T: FromStr>(&self, i: usize, field: &str) -> Result<Option<T>>
    where
        T::Err: std::fmt::Display,
    {
        if self.raw(i).is_empty() {
            Ok(None)
        } else {
            self.get(i, field).map(Some)
        }
    }

    fn get_finite(&self, i: usize, field: &str) -> Result<f64> {
        let v: f64 = self.get(i, field)?;
        if v.is_finite() {
            Ok(v)
        } else {
            Err(self.error(format!("field {field}: non-finite value {v}")))
        }
    }
}

fn open(path: &Path) -> Result<BufReader<File>> {
    File::open(path)
        .map(BufReader::new)
        .map_err(|e| Error::io(path, e))
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| Error::io(path, e))
}

/// Create `path`, run `f` on a buffered writer and flush.
pub fn write_file(
    path: &Path,
    f: impl FnOnce(&mut BufWriter<File>) -> std::io::Result<()>,
) -> Result<()> {
    let mut w = create(path)?;
    f(&mut w).and_then(|_| w.flush()).map_err(|e| Error::io(path, e))
}

fn display(path: &Path) -> String {
    path.display().to_string()
}

// ---------------------------------------------------------------- hits

pub fn write_hits<W: Write>(w: W, events: &[Event], prov: &Provenance) -> std::io::Result<()> {
    let mut out = csv_writer(w, prov, &HITS_HEADER)?;
    for ev in events {
        for h in &ev.hits {
            let energy = h
                .truth_particle_id
                .and_then(|pid| ev.particle(pid))
                .map(|p| p.energy);
            out.write_record([
                ev.event_id.to_string(),
                h.hit_id.to_string(),
                h.layer.to_string(),
                fmt_sig9(h.position[0]),
                fmt_sig9(h.position[1]),
                fmt_sig9(h.position[2]),
                opt(h.truth_particle_id, |p| p.to_string()),
                opt(energy, fmt_sig9),
            ])?;
        }
    }
    out.flush()
}

/// Hits grouped by event id, each event sorted by hit id. `z` is snapped to
/// the layer plane; a row further than [`Z_SNAP_TOLERANCE`] from it is an
/// error.
pub fn read_hits<R: Read>(
    reader: R,
    name: &str,
    geometry: &DetectorGeometry,
) -> Result<BTreeMap<u64, Vec<Hit>>> {
    let mut rows = Rows::new(reader, name, &HITS_HEADER)?;
    let mut out: BTreeMap<u64, Vec<Hit>> = BTreeMap::new();
    while let Some(row) = rows.next_row()? {
        let event_id: u64 = row.get(0, "event_id")?;
        let layer: usize = row.get(2, "layer")?;
        if layer >= N_LAYERS {
            return Err(row.error(format!("layer {layer} out of range")));
        }
        let x = row.get_finite(3, "x")?;
        let y = row.get_finite(4, "y")?;
        let z = row.get_finite(5, "z")?;
        let layer_z = geometry.layer_z[layer];
        if (z - layer_z).abs() > Z_SNAP_TOLERANCE {
            return Err(row.error(format!("z={z} is not on layer {layer} at {layer_z}")));
        }
        let _energy: Option<f64> = row.get_opt(7, "truth_energy")?;
        out.entry(event_id).or_default().push(Hit {
            hit_id: row.get(1, "hit_id")?,
            layer,
            position: [x, y, layer_z],
            truth_particle_id: row.get_opt(6, "truth_particle_id")?,
        });
    }
    for hits in out.values_mut() {
        hits.sort_by_key(|h| h.hit_id);
    }
    Ok(out)
}

// ---------------------------------------------------------------- particles

pub fn write_particles<W: Write>(w: W, events: &[Event], prov: &Provenance) -> std::io::Result<()> {
    let mut out = csv_writer(w, prov, &PARTICLES_HEADER)?;
    for ev in events {
        for p in &ev.particles {
            let mut rec = vec![ev.event_id.to_string(), p.particle_id.to_string()];
            rec.push(fmt_sig9(p.energy));
            rec.extend(p.origin.iter().chain(&p.direction).map(|&v| fmt_sig9(v)));
            out.write_record(&rec)?;
        }
    }
    out.flush()
}

/// Particles grouped by event id and sorted by particle id. Directions are
/// renormalised to unit length.
pub fn read_particles<R: Read>(reader: R, name: &str) -> Result<BTreeMap<u64, Vec<TruthParticle>>> {
    let mut rows = Rows::new(reader, name, &PARTICLES_HEADER)?;
    let mut out: BTreeMap<u64, Vec<TruthParticle>> = BTreeMap::new();
    while let Some(row) = rows.next_row()? {
        let event_id: u64 = row.get(0, "event_id")?;
        let energy = row.get_finite(2, "energy")?;
        if !(energy > 0.0) {
            return Err(row.error(format!("non-positive energy {energy}")));
        }
        let mut v = [0.0; 6];
        for (k, name) in ["ox", "oy", "oz", "dx", "dy", "dz"].iter().enumerate() {
            v[k] = row.get_finite(3 + k, name)?;
        }
        let norm = (v[3] * v[3] + v[4] * v[4] + v[5] * v[5]).sqrt();
        if !(norm > 0.0) {
            return Err(row.error("zero direction vector".into()));
        }
        out.entry(event_id).or_default().push(TruthParticle {
            particle_id: row.get(1, "particle_id")?,
            energy,
            origin: [v[0], v[1], v[2]],
            direction: [v[3] / norm, v[4] / norm, v[5] / norm],
        });
    }
    for ps in out.values_mut() {
        ps.sort_by_key(|p| p.particle_id);
    }
    Ok(out)
}

// ---------------------------------------------------------------- datasets

/// Written next to the hit and particle files by the simulator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Metadata {
    pub config_hash: String,
    pub seed: u64,
    pub first_event: u64,
    pub n_events: u64,
    pub xi_label: Option<f64>,
    pub mean_multiplicity: f64,
    /// Truth calibration of the written data, when it could be computed.
    pub calibration: Option<Calibration>,
    pub config: RunConfig,
}

impl Metadata {
    pub fn event_ids(&self) -> std::ops::Range<u64> {
        self.first_event..self.first_event + self.n_events
    }
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    write_file(path, |w| {
        serde_json::to_writer_pretty(&mut *w, value)?;
        writeln!(w)
    })
}

pub fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    serde_json::from_reader(open(path)?).map_err(|e| Error::Parse {
        file: display(path),
        line: e.line() as u64,
        msg: e.to_string(),
    })
}

/// Events on disk: a directory with a hits file and optionally a particles
/// file and metadata.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub dir: PathBuf,
    pub metadata: Option<Metadata>,
    pub events: Vec<Event>,
}

/// Write `events` as a dataset in `dir`, creating it if needed.
pub fn write_dataset(dir: &Path, events: &[Event], metadata: &Metadata) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let prov = Provenance {
        config_hash: metadata.config_hash.clone(),
        seed: metadata.seed,
    };
    write_file(&dir.join(HITS_FILE), |w| write_hits(w, events, &prov))?;
    write_file(&dir.join(PARTICLES_FILE), |w| write_particles(w, events, &prov))?;
    write_json(&dir.join(METADATA_FILE), metadata)
}

/// Read a dataset. The event list covers the metadata's id range (so events
/// without hits are kept) plus any id seen in the files, in ascending order.
/// The metadata's scenario label is applied to every event.
pub fn read_dataset(dir: &Path, geometry: &DetectorGeometry) -> Result<Dataset> {
    let meta_path = dir.join(METADATA_FILE);
    let metadata: Option<Metadata> = if meta_path.exists() {
        Some(read_json(&meta_path)?)
    } else {
        None
    };
    let hits_path = dir.join(HITS_FILE);
    let mut hits = read_hits(open(&hits_path)?, &display(&hits_path), geometry)?;
    let part_path = dir.join(PARTICLES_FILE);
    let mut particles = if part_path.exists() {
        read_particles(open(&part_path)?, &display(&part_path))?
    } else {
        BTreeMap::new()
    };

    let mut ids: Vec<u64> = hits.keys().chain(particles.keys()).copied().collect();
    if let Some(m) = &metadata {
        ids.extend(m.event_ids());
    }
    ids.sort_unstable();
    ids.dedup();
    let xi_label = metadata.as_ref().and_then(|m| m.xi_label);
    let events = ids
        .into_iter()
        .map(|id| Event {
            event_id: id,
            xi_label,
            hits: hits.remove(&id).unwrap_or_default(),
            particles: particles.remove(&id).unwrap_or_default(),
        })
        .collect();
    Ok(Dataset {
        dir: dir.to_path_buf(),
        metadata,
        events,
    })
}

// ---------------------------------------------------------------- tracks

pub fn write_tracks<W: Write>(w: W, tracks: &[Track], prov: &Provenance) -> std::io::Result<()> {
    let mut out = csv_writer(w, prov, &TRACKS_HEADER)?;
    for t in tracks {
        let ids: Vec<String> = t.hit_ids.iter().map(u64::to_string).collect();
        out.write_record([
            t.event_id.to_string(),
            t.track_id.to_string(),
            ids.join(";"),
            fmt_exact(t.chi2),
            t.ndf.to_string(),
            opt(t.energy, fmt_exact),
            opt(t.matched_particle_id, |p| p.to_string()),
        ])?;
    }
    out.flush()
}

pub fn read_tracks<R: Read>(reader: R, name: &str) -> Result<Vec<Track>> {
    let mut rows = Rows::new(reader, name, &TRACKS_HEADER)?;
    let mut out = Vec::new();
    while let Some(row) = rows.next_row()? {
        let parts: Vec<&str> = row.raw(2).split(';').collect();
        if parts.len() != N_LAYERS {
            return Err(row.error(format!(
                "hit_ids needs {N_LAYERS} ids, got {:?}",
                row.raw(2)
            )));
        }
        let mut hit_ids = [0u64; N_LAYERS];
        for (slot, p) in hit_ids.iter_mut().zip(&parts) {
            *slot = p
                .trim()
                .parse()
                .map_err(|e| row.error(format!("hit_ids: cannot parse {p:?}: {e}")))?;
        }
        out.push(Track {
            event_id: row.get(0, "event_id")?,
            track_id: row.get(1, "track_id")?,
            hit_ids,
            chi2: row.get(3, "chi2")?,
            ndf: row.get(4, "ndf")?,
            energy: row.get_opt(5, "energy")?,
            matched_particle_id: row.get_opt(6, "matched_particle_id")?,
        });
    }
    Ok(out)
}

pub fn write_tracks_file(path: &Path, tracks: &[Track], prov: &Provenance) -> Result<()> {
    write_file(path, |w| write_tracks(w, tracks, prov))
}

pub fn read_tracks_file(path: &Path) -> Result<Vec<Track>> {
    read_tracks(open(path)?, &display(path))
}

// ---------------------------------------------------------------- curves and plot data

pub fn write_curve<W: Write>(w: W, curve: &[BinValue], prov: &Provenance) -> std::io::Result<()> {
    let mut out = csv_writer(w, prov, &CURVE_HEADER)?;
    for b in curve {
        out.write_record([
            fmt_exact(b.lo),
            fmt_exact(b.hi),
            opt(b.ratio.value, fmt_exact),
            opt(b.ratio.err_lo, fmt_exact),
            opt(b.ratio.err_hi, fmt_exact),
        ])?;
    }
    out.flush()
}

/// One long-format plotting row.
#[derive(Debug, Clone, PartialEq)]
pub struct PlotRow {
    pub metric: String,
    pub xi_label: Option<f64>,
    /// `all` for scalars, `lo:hi` for energy bins, a bitstring for counts.
    pub bin: String,
    pub value: Option<f64>,
    pub err_lo: Option<f64>,
    pub err_hi: Option<f64>,
}

impl PlotRow {
    fn ratio(metric: &str, xi_label: Option<f64>, bin: String, r: Ratio) -> Self {
        Self {
            metric: metric.to_string(),
            xi_label,
            bin,
            value: r.value,
            err_lo: r.err_lo,
            err_hi: r.err_hi,
        }
    }
}

fn summary_rows(s: &Summary, xi: Option<f64>, out: &mut Vec<PlotRow>) {
    let c = s.counts;
    let all = || "all".to_string();
    out.push(PlotRow::ratio("efficiency", xi, all(), Ratio::new(c.matched_particles, c.generated)));
    out.push(PlotRow::ratio("fake_rate", xi, all(), Ratio::new(c.fake_tracks, c.reconstructed)));
    out.push(PlotRow::ratio(
        "duplication_rate",
        xi,
        all(),
        Ratio::new(c.duplicated_particles, c.matched_any_particles),
    ));
    out.push(PlotRow {
        metric: "energy_resolution".into(),
        xi_label: xi,
        bin: all(),
        value: s.energy_resolution,
        err_lo: None,
        err_hi: None,
    });
}

fn curve_rows(metric: &str, curve: &[BinValue], xi: Option<f64>, out: &mut Vec<PlotRow>) {
    for b in curve {
        let bin = format!("{}:{}", fmt_exact(b.lo), fmt_exact(b.hi));
        out.push(PlotRow::ratio(metric, xi, bin, b.ratio));
    }
}

/// Scalars and curves of a report, per scenario label when the report is
/// grouped and overall otherwise.
pub fn plot_rows(report: &MetricsReport) -> Vec<PlotRow> {
    let mut out = Vec::new();
    if report.per_xi.is_empty() {
        summary_rows(&report.summary, None, &mut out);
        curve_rows("efficiency_vs_energy", &report.efficiency_vs_energy, None, &mut out);
        curve_rows("fake_rate_vs_energy", &report.fake_rate_vs_energy, None, &mut out);
    } else {
        for g in &report.per_xi {
            summary_rows(&g.summary, g.xi_label, &mut out);
            curve_rows("efficiency_vs_energy", &g.efficiency_vs_energy, g.xi_label, &mut out);
            curve_rows("fake_rate_vs_energy", &g.fake_rate_vs_energy, g.xi_label, &mut out);
        }
    }
    out
}

/// Sampling histogram rows: counts and their fraction of all shots.
pub fn counts_rows(counts: &[(Assignment, usize)]) -> Vec<PlotRow> {
    let total: usize = counts.iter().map(|c| c.1).sum();
    let mut out = Vec::new();
    for (a, c) in counts {
        let bin = a.to_bitstring();
        out.push(PlotRow {
            metric: "vqe_counts".into(),
            xi_label: None,
            bin: bin.clone(),
            value: Some(*c as f64),
            err_lo: None,
            err_hi: None,
        });
        out.push(PlotRow {
            metric: "vqe_probability".into(),
            xi_label: None,
            bin,
            value: (total > 0).then(|| *c as f64 / total as f64),
            err_lo: None,
            err_hi: None,
        });
    }
    out
}

pub fn write_plotdata<W: Write>(w: W, rows: &[PlotRow], prov: &Provenance) -> std::io::Result<()> {
    let mut out = csv_writer(w, prov, &PLOTDATA_HEADER)?;
    for r in rows {
        out.write_record([
            r.metric.clone(),
            opt(r.xi_label, fmt_exact),
            r.bin.clone(),
            opt(r.value, fmt_exact),
            opt(r.err_lo, fmt_exact),
            opt(r.err_hi, fmt_exact),
        ])?;
    }
    out.flush()
}

// ---------------------------------------------------------------- counts

/// `bitstring,count`, variable 0 leftmost.
pub fn write_counts<W: Write>(
    w: W,
    counts: &[(Assignment, usize)],
    prov: &Provenance,
) -> std::io::Result<()> {
    let mut out = csv_writer(w, prov, &COUNTS_HEADER)?;
    for (a, c) in counts {
        out.write_record([a.to_bitstring(), c.to_string()])?;
    }
    out.flush()
}

pub fn read_counts<R: Read>(reader: R, name: &str) -> Result<Vec<(Assignment, usize)>> {
    let mut rows = Rows::new(reader, name, &COUNTS_HEADER)?;
    let mut out = Vec::new();
    while let Some(row) = rows.next_row()? {
        let bits = Assignment::from_bitstring(row.raw(0))
            .map_err(|e| row.error(format!("bitstring: {e}")))?;
        out.push((bits, row.get(1, "count")?));
    }
    Ok(out)
}

pub fn read_counts_file(path: &Path) -> Result<Vec<(Assignment, usize)>> {
    read_counts(open(path)?, &display(path))
}

// ---------------------------------------------------------------- pre-selection dump

/// Doublet and triplet features of one event. Doublet ids are their index
/// in `doublets`, triplet ids continue after the last doublet.
pub fn write_features<W: Write>(
    w: &mut csv::Writer<W>,
    event: &Event,
    doublets: &[Doublet],
    triplets: &[Triplet],
) -> std::io::Result<()> {
    let hits = &event.hits;
    let truth = |ids: &[usize]| {
        let first = hits[ids[0]].truth_particle_id;
        first.is_some() && ids.iter().all(|&i| hits[i].truth_particle_id == first)
    };
    for (id, d) in doublets.iter().enumerate() {
        w.write_record([
            event.event_id.to_string(),
            id.to_string(),
            "doublet".into(),
            d.layer_inner.to_string(),
            hits[d.hit_inner].hit_id.to_string(),
            hits[d.hit_outer].hit_id.to_string(),
            String::new(),
            fmt_exact(d.dx_over_x0),
            fmt_exact(d.theta_xz),
            fmt_exact(d.theta_yz),
            String::new(),
            (truth(&[d.hit_inner, d.hit_outer]) as u8).to_string(),
        ])?;
    }
    for (k, t) in triplets.iter().enumerate() {
        w.write_record([
            event.event_id.to_string(),
            (doublets.len() + k).to_string(),
            "triplet".into(),
            t.layer_span.0.to_string(),
            hits[t.hits[0]].hit_id.to_string(),
            hits[t.hits[1]].hit_id.to_string(),
            hits[t.hits[2]].hit_id.to_string(),
            String::new(),
            fmt_exact(t.doublet_angles[0].0),
            fmt_exact(t.doublet_angles[0].1),
            fmt_exact(t.delta_theta),
            (truth(&t.hits) as u8).to_string(),
        ])?;
    }
    Ok(())
}

/// Writer for [`write_features`] with the provenance line and header.
pub fn features_writer<W: Write>(w: W, prov: &Provenance) -> std::io::Result<csv::Writer<W>> {
    csv_writer(w, prov, &FEATURES_HEADER)
}

// ---------------------------------------------------------------- QUBO dump

/// Plain-text QUBO: a line `n <count>`, then `i a_i` for each non-zero
/// linear term and `i j b_ij` for each coupling with `i < j`.
pub fn write_qubo<W: Write>(mut w: W, qubo: &Qubo, prov: &Provenance) -> std::io::Result<()> {
    writeln!(w, "{}", prov.comment())?;
    writeln!(w, "n {}", qubo.n())?;
    for (i, &a) in qubo.linear().iter().enumerate() {
        if a != 0.0 {
            writeln!(w, "{i} {}", fmt_exact(a))?;
        }
    }
    for &(i, j, b) in qubo.quadratic() {
        writeln!(w, "{i} {j} {}", fmt_exact(b))?;
    }
    w.flush()
}

pub fn read_qubo<R: Read>(reader: R, name: &str) -> Result<Qubo> {
    let err = |line: usize, msg: String| Error::Parse {
        file: name.to_string(),
        line: line as u64 + 1,
        msg,
    };
    let mut n: Option<usize> = None;
    let mut linear = Vec::new();
    let mut couplings = Vec::new();
    for (k, line) in BufReader::new(reader).lines().enumerate() {
        let line = line.map_err(|e| err(k, e.to_string()))?;
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let tok: Vec<&str> = line.split_whitespace().collect();
        let index = |s: &str| -> Result<usize> {
            let i: usize = s.parse().map_err(|e| err(k, format!("bad index {s:?}: {e}")))?;
            match n {
                Some(n) if i < n => Ok(i),
                Some(n) => Err(err(k, format!("index {i} out of range for n={n}"))),
                None => Err(err(k, "coefficient before the `n` line".into())),
            }
        };
        let value = |s: &str| -> Result<f64> {
            s.parse().map_err(|e| err(k, format!("bad coefficient {s:?}: {e}")))
        };
        match tok.as_slice() {
            ["n", count] if n.is_none() => {
                let c: usize = count
                    .parse()
                    .map_err(|e| err(k, format!("bad variable count {count:?}: {e}")))?;
                n = Some(c);
                linear = vec![0.0; c];
            }
            [i, a] => {
                let i = index(i)?;
                linear[i] += value(a)?;
            }
            [i, j, b] => couplings.push((index(i)?, index(j)?, value(b)?)),
            _ => return Err(err(k, format!("unrecognised line {line:?}"))),
        }
    }
    if n.is_none() {
        return Err(Error::Parse {
            file: name.to_string(),
            line: 0,
            msg: "missing `n` line".into(),
        });
    }
    Qubo::new(linear, couplings).map_err(|e| Error::Parse {
        file: name.to_string(),
        line: 0,
        msg: e.to_string(),
    })
}

pub fn read_qubo_file(path: &Path) -> Result<Qubo> {
    read_qubo(open(path)?, &display(path))
}
