//! CSV snapshots, summaries and the run manifest.
//!
//! Floats are written with Rust's shortest round-trip formatting, so parsing
//! a file reproduces the in-memory values bit for bit.

use std::collections::BTreeMap;
use std::fs::{self, File};
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::config::{Method, RunConfig};
use crate::error::{Error, Result};
use crate::numerics::Complex64;
use crate::scenarios::ScenarioRun;
use crate::wavepacket::FieldSnapshot;

pub const SNAPSHOT_HEADER: &str = "X,re_psi,im_psi,rho";
pub const MANIFEST: &str = "manifest.toml";
pub const SUMMARY: &str = "summary.csv";
pub const CHARGES: &str = "charges.csv";
pub const TRACKS: &str = "tracks.csv";
pub const ORACLE_DIR: &str = "oracle";

pub fn snapshot_file_name(t: f64) -> String {
    format!("snap_T{t:.6}.csv")
}

pub fn write_snapshot<W: Write>(out: W, snap: &FieldSnapshot) -> std::io::Result<()> {
    let mut w = BufWriter::new(out);
    writeln!(w, "{SNAPSHOT_HEADER}")?;
    for (i, (z, r)) in snap.psi.iter().zip(&snap.rho).enumerate() {
        writeln!(w, "{},{},{},{}", snap.grid.point(i), z.re, z.im, r)?;
    }
    w.flush()
}

/// Columns of a snapshot file.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct SnapshotTable {
    pub x: Vec<f64>,
    pub psi: Vec<Complex64>,
    pub rho: Vec<f64>,
}

pub fn read_snapshot<R: BufRead>(input: R) -> Result<SnapshotTable> {
    let mut lines = input.lines();
    let header = lines.next().transpose()?.unwrap_or_default();
    if header.trim() != SNAPSHOT_HEADER {
        return Err(Error::Config(format!("unexpected snapshot header '{header}'")));
    }
    let mut table = SnapshotTable::default();
    for (k, line) in lines.enumerate() {
        let line = line?;
        if line.is_empty() {
            continue;
        }
        let fields: Vec<f64> = line
            .split(',')
            .map(|f| f.trim().parse::<f64>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| Error::Config(format!("row {}: {e}", k + 2)))?;
        let [x, re, im, rho] = fields[..] else {
            return Err(Error::Config(format!("row {}: expected 4 columns", k + 2)));
        };
        table.x.push(x);
        table.psi.push(Complex64::new(re, im));
        table.rho.push(rho);
    }
    Ok(table)
}

pub fn read_snapshot_file(path: &Path) -> Result<SnapshotTable> {
    read_snapshot(BufReader::new(File::open(path)?))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub name: String,
    pub code_version: String,
    pub method: Method,
    /// Paths relative to the output directory, the manifest included.
    pub files: Vec<String>,
    pub derived: BTreeMap<String, f64>,
    pub config: RunConfig,
}

impl RunManifest {
    /// File list for `run`, with snapshot tags taken from the times actually
    /// sampled (the oracle lands on the nearest whole time step).
    pub fn plan(run: &ScenarioRun) -> Result<Self> {
        let cfg = &run.config;
        let mut files = vec![MANIFEST.to_string(), SUMMARY.to_string(), CHARGES.to_string()];
        if cfg.method != Method::Oracle {
            files.push(TRACKS.to_string());
        }
        let tags = |snaps: &[FieldSnapshot]| -> Result<Vec<String>> {
            let names: Vec<String> = snaps.iter().map(|s| snapshot_file_name(s.time)).collect();
            if names.windows(2).any(|w| w[0] == w[1]) {
                return Err(Error::Config("snapshot times closer than the 1e-6 file tag resolution".into()));
            }
            Ok(names)
        };
        files.extend(tags(&run.snapshots)?);
        if let Some(oracle) = &run.oracle {
            files.extend(tags(oracle)?.into_iter().map(|n| format!("{ORACLE_DIR}/{n}")));
        }
        Ok(Self {
            name: cfg.name().to_string(),
            code_version: env!("CARGO_PKG_VERSION").to_string(),
            method: cfg.method,
            files,
            derived: cfg.derived().into_iter().collect(),
            config: cfg.source.clone(),
        })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)?;
        toml::from_str(&text).map_err(|e| Error::Config(e.to_string()))
    }
}

fn create(dir: &Path, name: &str) -> Result<BufWriter<File>> {
    let path = dir.join(name);
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent)?;
    }
    Ok(BufWriter::new(File::create(path)?))
}

fn write_table(dir: &Path, name: &str, header: &[String], rows: &[Vec<f64>]) -> Result<()> {
    let mut w = create(dir, name)?;
    writeln!(w, "{}", header.join(","))?;
    for row in rows {
        let cells: Vec<String> = row.iter().map(|v| v.to_string()).collect();
        writeln!(w, "{}", cells.join(","))?;
    }
    w.flush()?;
    Ok(())
}

/// Writes the manifest, then every file it lists. Returns the paths written.
pub fn write_run(dir: &Path, run: &ScenarioRun) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir)?;
    let manifest = RunManifest::plan(run)?;
    let text = toml::to_string(&manifest).map_err(|e| Error::Config(e.to_string()))?;
    fs::write(dir.join(MANIFEST), text)?;

    let mut w = create(dir, SUMMARY)?;
    writeln!(w, "metric,value")?;
    for (k, v) in &run.summary {
        writeln!(w, "{k},{v}")?;
    }
    w.flush()?;

    let mut header: Vec<String> = ["T", "left", "interior", "right", "total"].map(String::from).to_vec();
    let oracle_total = !run.oracle_charges.is_empty();
    if oracle_total {
        header.push("oracle_total".into());
    }
    let rows: Vec<Vec<f64>> = run
        .config
        .times
        .iter()
        .zip(&run.charges)
        .enumerate()
        .map(|(k, (&t, c))| {
            let mut row = vec![t, c.exterior_left, c.interior, c.exterior_right, c.total];
            if oracle_total {
                row.push(run.oracle_charges[k]);
            }
            row
        })
        .collect();
    write_table(dir, CHARGES, &header, &rows)?;

    if run.config.method != Method::Oracle {
        let mut header = vec!["T".to_string()];
        let mut columns: Vec<&[f64]> = Vec::new();
        if let Some(tr) = &run.tracks.incident {
            header.push("incident_com".into());
            columns.push(&tr.com);
        }
        if let Some(tr) = &run.tracks.transmitted {
            header.extend(["transmitted_com", "matched_com", "transmitted_barrier_fraction"].map(String::from));
            columns.extend([&tr.com[..], &tr.reference_com[..], &tr.barrier_fraction[..]]);
        }
        for (n, tr) in run.tracks.terms.iter().enumerate() {
            header.push(format!("term{n}_com"));
            columns.push(&tr.com);
        }
        let rows: Vec<Vec<f64>> = run
            .config
            .times
            .iter()
            .enumerate()
            .map(|(k, &t)| std::iter::once(t).chain(columns.iter().map(|c| c[k])).collect())
            .collect();
        write_table(dir, TRACKS, &header, &rows)?;
    }

    for snap in &run.snapshots {
        let mut w = create(dir, &snapshot_file_name(snap.time))?;
        write_snapshot(&mut w, snap)?;
    }
    if let Some(oracle) = &run.oracle {
        for snap in oracle {
            let mut w = create(dir, &format!("{ORACLE_DIR}/{}", snapshot_file_name(snap.time)))?;
            write_snapshot(&mut w, snap)?;
        }
    }
    Ok(manifest.files.iter().map(|f| dir.join(f)).collect())
}
