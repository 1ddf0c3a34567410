//! Run directory layout, writing and loading.
//!
//! ```text
//! <run>/metadata.json          config echo, seeds, version, checksums
//! <run>/report.json            DiagnosticsReport
//! <run>/replicas.csv           replica, seed, steps, blowup_time, sixth_moment
//! <run>/replicas/NNNN/snapshots.csv   t, particle, x, y, alive
//! <run>/replicas/NNNN/events.jsonl    one event per line
//! <run>/series/<name>.csv      t, columns...
//! ```

use std::collections::BTreeMap;
use std::fs;
use std::io::{BufRead, BufReader, BufWriter};
use std::path::{Path, PathBuf};

use kslab::dynamics::{Event, Snapshot, TrajectoryRecord};
use kslab::geometry::Point2;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::config::RunConfig;
use crate::report::{DiagnosticsReport, Series};
use crate::HarnessError;

pub const METADATA_FILE: &str = "metadata.json";
pub const REPORT_FILE: &str = "report.json";
pub const REPLICAS_FILE: &str = "replicas.csv";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplicaInfo {
    pub replica: usize,
    pub seed: String,
    pub steps: u64,
    pub blowup_time: Option<f64>,
    pub sixth_moment: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Metadata {
    pub version: String,
    /// Fully defaulted config, with file atoms inlined.
    pub config: RunConfig,
    pub family_hash: String,
    pub family_terms: usize,
    pub seeds: Vec<String>,
    pub sixth_moment_mean: f64,
    pub hypothesis_violating: bool,
    /// SHA-256 of every other file in the run directory, by relative path.
    pub checksums: BTreeMap<String, String>,
}

pub fn replica_dir(index: usize) -> String {
    format!("replicas/{index:04}")
}

fn fmt(v: f64) -> String {
    format!("{v:?}")
}

fn create_parent(path: &Path) -> Result<(), HarnessError> {
    if let Some(p) = path.parent() {
        fs::create_dir_all(p).map_err(HarnessError::io(p))?;
    }
    Ok(())
}

pub fn sha256_file(path: &Path) -> Result<String, HarnessError> {
    let bytes = fs::read(path).map_err(HarnessError::io(path))?;
    Ok(hex::encode(Sha256::digest(&bytes)))
}

fn csv_err(path: &Path) -> impl Fn(csv::Error) -> HarnessError + '_ {
    move |e| HarnessError::Runtime(format!("{}: {e}", path.display()))
}

/// Writes `text` and records its checksum under `rel`.
struct DirWriter<'a> {
    root: &'a Path,
    checksums: BTreeMap<String, String>,
}

impl DirWriter<'_> {
    fn path(&self, rel: &str) -> Result<PathBuf, HarnessError> {
        let p = self.root.join(rel);
        create_parent(&p)?;
        Ok(p)
    }

    fn finish(&mut self, rel: &str) -> Result<(), HarnessError> {
        let h = sha256_file(&self.root.join(rel))?;
        self.checksums.insert(rel.to_string(), h);
        Ok(())
    }

    fn text(&mut self, rel: &str, text: &str) -> Result<(), HarnessError> {
        let p = self.path(rel)?;
        fs::write(&p, text).map_err(HarnessError::io(&p))?;
        self.finish(rel)
    }

    fn csv(&mut self, rel: &str, header: &[&str], rows: impl Iterator<Item = Vec<String>>) -> Result<(), HarnessError> {
        let p = self.path(rel)?;
        let mut w = csv::Writer::from_path(&p).map_err(csv_err(&p))?;
        w.write_record(header).map_err(csv_err(&p))?;
        for r in rows {
            w.write_record(&r).map_err(csv_err(&p))?;
        }
        w.flush().map_err(HarnessError::io(&p))?;
        drop(w);
        self.finish(rel)
    }
}

fn to_json<T: Serialize>(v: &T) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("serializable");
    s.push('\n');
    s
}

/// Removes a previous run at `dir`; refuses to touch a non-empty directory
/// that does not look like a run.
pub fn prepare_run_dir(dir: &Path) -> Result<(), HarnessError> {
    if dir.exists() {
        let empty = fs::read_dir(dir).map_err(HarnessError::io(dir))?.next().is_none();
        if !empty {
            if !dir.join(METADATA_FILE).exists() {
                return Err(HarnessError::Runtime(format!("{} exists and is not a run directory", dir.display())));
            }
            fs::remove_dir_all(dir).map_err(HarnessError::io(dir))?;
        }
    }
    fs::create_dir_all(dir).map_err(HarnessError::io(dir))
}

pub struct RunArtifacts<'a> {
    pub config: &'a RunConfig,
    pub records: &'a [TrajectoryRecord],
    pub replicas: &'a [ReplicaInfo],
    pub report: &'a DiagnosticsReport,
    pub series: &'a [Series],
    pub family_hash: String,
    pub family_terms: usize,
}

pub fn write_run(dir: &Path, a: &RunArtifacts) -> Result<Metadata, HarnessError> {
    prepare_run_dir(dir)?;
    let mut w = DirWriter { root: dir, checksums: BTreeMap::new() };
    for (i, rec) in a.records.iter().enumerate() {
        let base = replica_dir(i);
        let rows = rec.snapshots.iter().flat_map(|s| {
            s.positions
                .iter()
                .enumerate()
                .map(move |(j, p)| vec![fmt(s.t), j.to_string(), fmt(p.x), fmt(p.y), (s.alive as u8).to_string()])
        });
        w.csv(&format!("{base}/snapshots.csv"), &["t", "particle", "x", "y", "alive"], rows)?;
        let mut ev = String::new();
        for e in &rec.events {
            ev.push_str(&serde_json::to_string(e).expect("serializable"));
            ev.push('\n');
        }
        w.text(&format!("{base}/events.jsonl"), &ev)?;
    }
    let rows = a.replicas.iter().map(|r| {
        vec![r.replica.to_string(), r.seed.clone(), r.steps.to_string(), r.blowup_time.map(fmt).unwrap_or_default(), fmt(r.sixth_moment)]
    });
    w.csv(REPLICAS_FILE, &["replica", "seed", "steps", "blowup_time", "sixth_moment"], rows)?;
    for s in a.series {
        let mut header = vec!["t"];
        header.extend(s.columns.iter().map(String::as_str));
        let rows = s.rows.iter().map(|(t, v)| std::iter::once(fmt(*t)).chain(v.iter().map(|x| fmt(*x))).collect());
        w.csv(&format!("series/{}.csv", s.name), &header, rows)?;
    }
    w.text(REPORT_FILE, &to_json(a.report))?;
    let sixth: Vec<f64> = a.replicas.iter().map(|r| r.sixth_moment).collect();
    let meta = Metadata {
        version: env!("CARGO_PKG_VERSION").to_string(),
        config: a.config.clone(),
        family_hash: a.family_hash.clone(),
        family_terms: a.family_terms,
        seeds: a.replicas.iter().map(|r| r.seed.clone()).collect(),
        sixth_moment_mean: kslab::stats::mean(&sixth),
        hypothesis_violating: a.report.hypothesis_violating,
        checksums: w.checksums,
    };
    let p = dir.join(METADATA_FILE);
    fs::write(&p, to_json(&meta)).map_err(HarnessError::io(&p))?;
    Ok(meta)
}

pub fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T, HarnessError> {
    let text = fs::read_to_string(path).map_err(HarnessError::io(path))?;
    serde_json::from_str(&text).map_err(|e| HarnessError::Runtime(format!("{}: {e}", path.display())))
}

pub fn write_json<T: Serialize>(path: &Path, v: &T) -> Result<(), HarnessError> {
    create_parent(path)?;
    fs::write(path, to_json(v)).map_err(HarnessError::io(path))
}

fn parse_f64(s: &str, path: &Path) -> Result<f64, HarnessError> {
    s.parse().map_err(|_| HarnessError::Runtime(format!("{}: bad number {s:?}", path.display())))
}

fn read_replicas(path: &Path) -> Result<Vec<ReplicaInfo>, HarnessError> {
    let mut r = csv::Reader::from_path(path).map_err(csv_err(path))?;
    let mut out = Vec::new();
    for row in r.records() {
        let row = row.map_err(csv_err(path))?;
        let bt = &row[3];
        out.push(ReplicaInfo {
            replica: row[0].parse().map_err(|_| HarnessError::Runtime(format!("{}: bad replica index", path.display())))?,
            seed: row[1].to_string(),
            steps: row[2].parse().map_err(|_| HarnessError::Runtime(format!("{}: bad step count", path.display())))?,
            blowup_time: if bt.is_empty() { None } else { Some(parse_f64(bt, path)?) },
            sixth_moment: parse_f64(&row[4], path)?,
        });
    }
    Ok(out)
}

fn read_snapshots(path: &Path, n: usize) -> Result<Vec<Snapshot>, HarnessError> {
    let mut r = csv::Reader::from_path(path).map_err(csv_err(path))?;
    let mut snaps: Vec<Snapshot> = Vec::new();
    for row in r.records() {
        let row = row.map_err(csv_err(path))?;
        let t = parse_f64(&row[0], path)?;
        let j: usize = row[1].parse().map_err(|_| HarnessError::Runtime(format!("{}: bad particle index", path.display())))?;
        let p = Point2::new(parse_f64(&row[2], path)?, parse_f64(&row[3], path)?);
        let alive = &row[4] == "1";
        if j == 0 {
            snaps.push(Snapshot { t, positions: Vec::with_capacity(n), alive });
        }
        let s = snaps.last_mut().filter(|s| s.positions.len() == j && s.t == t);
        let Some(s) = s else {
            return Err(HarnessError::Runtime(format!("{}: rows out of order at t = {t}", path.display())));
        };
        s.positions.push(p);
    }
    if snaps.iter().any(|s| s.positions.len() != n) {
        return Err(HarnessError::Runtime(format!("{}: incomplete snapshot", path.display())));
    }
    Ok(snaps)
}

fn read_events(path: &Path) -> Result<Vec<Event>, HarnessError> {
    let f = fs::File::open(path).map_err(HarnessError::io(path))?;
    let mut out = Vec::new();
    for line in BufReader::new(f).lines() {
        let line = line.map_err(HarnessError::io(path))?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(serde_json::from_str(&line).map_err(|e| HarnessError::Runtime(format!("{}: {e}", path.display())))?);
    }
    Ok(out)
}

pub struct LoadedRun {
    pub dir: PathBuf,
    pub metadata: Metadata,
    pub report: DiagnosticsReport,
    pub replicas: Vec<ReplicaInfo>,
    pub records: Vec<TrajectoryRecord>,
}

pub fn load_run(dir: &Path) -> Result<LoadedRun, HarnessError> {
    let metadata: Metadata = read_json(&dir.join(METADATA_FILE))?;
    let report: DiagnosticsReport = read_json(&dir.join(REPORT_FILE))?;
    let replicas = read_replicas(&dir.join(REPLICAS_FILE))?;
    let sim = &metadata.config.sim;
    let mut records = Vec::with_capacity(replicas.len());
    for info in &replicas {
        let base = dir.join(replica_dir(info.replica));
        records.push(TrajectoryRecord {
            theta: sim.theta,
            n: sim.n,
            snapshots: read_snapshots(&base.join("snapshots.csv"), sim.n)?,
            events: read_events(&base.join("events.jsonl"))?,
            blowup_time: info.blowup_time,
            steps: info.steps,
        });
    }
    Ok(LoadedRun { dir: dir.to_path_buf(), metadata, report, replicas, records })
}

/// Files whose checksum differs from the recorded one, or that are missing.
pub fn checksum_mismatches(dir: &Path, meta: &Metadata) -> Vec<String> {
    meta.checksums
        .iter()
        .filter_map(|(rel, want)| match sha256_file(&dir.join(rel)) {
            Ok(got) if &got == want => None,
            Ok(_) => Some(format!("{rel}: checksum mismatch")),
            Err(_) => Some(format!("{rel}: missing")),
        })
        .collect()
}

/// Run directories under `root` (including `root` itself), sorted by path.
pub fn find_runs(root: &Path) -> Result<Vec<PathBuf>, HarnessError> {
    fn walk(dir: &Path, depth: usize, out: &mut Vec<PathBuf>) -> Result<(), HarnessError> {
        if dir.join(METADATA_FILE).is_file() {
            out.push(dir.to_path_buf());
            return Ok(());
        }
        if depth == 0 {
            return Ok(());
        }
        for e in fs::read_dir(dir).map_err(HarnessError::io(dir))? {
            let p = e.map_err(HarnessError::io(dir))?.path();
            if p.is_dir() {
                walk(&p, depth - 1, out)?;
            }
        }
        Ok(())
    }
    let mut out = Vec::new();
    walk(root, 4, &mut out)?;
    out.sort();
    Ok(out)
}

/// Writes a plain CSV table (used for sweep aggregates).
pub fn write_table(path: &Path, header: &[&str], rows: &[Vec<String>]) -> Result<(), HarnessError> {
    create_parent(path)?;
    let f = fs::File::create(path).map_err(HarnessError::io(path))?;
    let mut w = csv::Writer::from_writer(BufWriter::new(f));
    w.write_record(header).map_err(csv_err(path))?;
    for r in rows {
        w.write_record(r).map_err(csv_err(path))?;
    }
    w.flush().map_err(HarnessError::io(path))?;
    Ok(())
}

pub fn fmt_opt(v: Option<f64>) -> String {
    v.map(fmt).unwrap_or_default()
}

pub fn fmt_f64(v: f64) -> String {
    fmt(v)
}
