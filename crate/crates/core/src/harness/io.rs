//! On-disk formats.
//!
//! A run directory holds
//! - `samples.csv`: `t,svn,slin,e1,e2,dcoh,valid`, one row per scheduled
//!   sample, disabled probes left empty;
//! - `energy.csv`: `t,e1,e2` after every period;
//! - `run.json`: schema-versioned sidecar with the config, provenance and
//!   the remaining record fields;
//! - `marginals/t<time>_rotor<1|2>_<position|momentum>.txt`: one value per
//!   line, momentum values in ascending lattice order.
//!
//! Floats are written in Rust's shortest round-trip form, so reading a
//! directory back reproduces the record exactly.

use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::config::RunConfig;
use crate::error::{Error, Result};
use crate::evolution::StepDiagnostics;
use crate::grid::{Axis, Basis, GridSpec, WaveFunction2D};
use crate::observables::MarginalDistribution;
use crate::record::{EnergyPoint, RunRecord, Sample};

pub const CSV_HEADER: &str = "t,svn,slin,e1,e2,dcoh,valid";
pub const SIDECAR_SCHEMA: u32 = 1;
pub const SAMPLES_FILE: &str = "samples.csv";
pub const ENERGY_FILE: &str = "energy.csv";
pub const SIDECAR_FILE: &str = "run.json";
pub const MARGINAL_DIR: &str = "marginals";

pub const CHECKPOINT_MAGIC: &[u8; 8] = b"CKRSTATE";
pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub version: String,
    pub platform: String,
    pub wall_time_s: f64,
}

impl Provenance {
    pub fn current(wall_time_s: f64) -> Self {
        Provenance {
            version: env!("CARGO_PKG_VERSION").to_string(),
            platform: format!("{}-{}", std::env::consts::ARCH, std::env::consts::OS),
            wall_time_s,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MarginalEntry {
    pub file: String,
    pub axis: Axis,
    pub basis: Basis,
    pub time: u64,
}

/// Contents of `run.json`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Sidecar {
    pub schema: u32,
    pub config: RunConfig,
    pub provenance: Provenance,
    pub grid: GridSpec,
    pub first_breach: Option<u64>,
    pub complete: bool,
    pub failure: Option<String>,
    pub husimi: Vec<(u64, f64)>,
    pub marginals: Vec<MarginalEntry>,
}

fn format_err(path: &Path, message: impl Into<String>) -> Error {
    Error::Format {
        path: path.to_path_buf(),
        message: message.into(),
    }
}

fn number(v: f64) -> String {
    format!("{v:?}")
}

fn optional(v: Option<f64>) -> String {
    v.map(number).unwrap_or_default()
}

fn csv_err(path: &Path, e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(source) => Error::io(path, source),
        other => format_err(path, format!("{other:?}")),
    }
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    File::create(path).map(BufWriter::new).map_err(|e| Error::io(path, e))
}

pub fn write_samples_csv(path: &Path, rows: &[Sample]) -> Result<()> {
    let mut w = csv::Writer::from_writer(create(path)?);
    w.write_record(CSV_HEADER.split(',')).map_err(|e| csv_err(path, e))?;
    for r in rows {
        w.write_record([
            r.t.to_string(),
            optional(r.svn),
            optional(r.slin),
            optional(r.e1),
            optional(r.e2),
            optional(r.dcoh),
            r.valid.to_string(),
        ])
        .map_err(|e| csv_err(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

fn open_csv(path: &Path, header: &str) -> Result<csv::Reader<File>> {
    let mut reader = csv::Reader::from_path(path).map_err(|e| csv_err(path, e))?;
    let found = reader.headers().map_err(|e| csv_err(path, e))?.iter().collect::<Vec<_>>().join(",");
    if found != header {
        return Err(format_err(path, format!("expected header `{header}`, found `{found}`")));
    }
    Ok(reader)
}

fn parse_field<T: std::str::FromStr>(path: &Path, line: u64, field: &str) -> Result<T> {
    field
        .parse()
        .map_err(|_| format_err(path, format!("line {line}: cannot parse `{field}`")))
}

fn parse_optional(path: &Path, line: u64, field: &str) -> Result<Option<f64>> {
    if field.is_empty() {
        Ok(None)
    } else {
        parse_field(path, line, field).map(Some)
    }
}

pub fn read_samples_csv(path: &Path) -> Result<Vec<Sample>> {
    let mut reader = open_csv(path, CSV_HEADER)?;
    let mut rows = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| csv_err(path, e))?;
        let line = record.position().map_or(0, |p| p.line());
        if record.len() != 7 {
            return Err(format_err(path, format!("line {line}: expected 7 fields")));
        }
        rows.push(Sample {
            t: parse_field(path, line, &record[0])?,
            svn: parse_optional(path, line, &record[1])?,
            slin: parse_optional(path, line, &record[2])?,
            e1: parse_optional(path, line, &record[3])?,
            e2: parse_optional(path, line, &record[4])?,
            dcoh: parse_optional(path, line, &record[5])?,
            valid: parse_field(path, line, &record[6])?,
        });
    }
    Ok(rows)
}

pub fn write_energy_csv(path: &Path, energy: &[EnergyPoint]) -> Result<()> {
    let mut w = csv::Writer::from_writer(create(path)?);
    w.write_record(["t", "e1", "e2"]).map_err(|e| csv_err(path, e))?;
    for p in energy {
        w.write_record([p.t.to_string(), number(p.e1), number(p.e2)])
            .map_err(|e| csv_err(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn read_energy_csv(path: &Path) -> Result<Vec<EnergyPoint>> {
    let mut reader = open_csv(path, "t,e1,e2")?;
    let mut points = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| csv_err(path, e))?;
        let line = record.position().map_or(0, |p| p.line());
        if record.len() != 3 {
            return Err(format_err(path, format!("line {line}: expected 3 fields")));
        }
        points.push(EnergyPoint {
            t: parse_field(path, line, &record[0])?,
            e1: parse_field(path, line, &record[1])?,
            e2: parse_field(path, line, &record[2])?,
        });
    }
    Ok(points)
}

pub fn marginal_file_name(m: &MarginalDistribution) -> String {
    let basis = match m.basis {
        Basis::Position => "position",
        Basis::Momentum => "momentum",
    };
    format!("t{}_rotor{}_{basis}.txt", m.time, m.axis.index() + 1)
}

fn write_values(path: &Path, values: &[f64]) -> Result<()> {
    let mut w = create(path)?;
    for v in values {
        writeln!(w, "{}", number(*v)).map_err(|e| Error::io(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

fn read_values(path: &Path) -> Result<Vec<f64>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    text.lines()
        .enumerate()
        .map(|(i, l)| parse_field(path, i as u64 + 1, l.trim()))
        .collect()
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut w = create(path)?;
    serde_json::to_writer_pretty(&mut w, value).map_err(|e| format_err(path, e.to_string()))?;
    writeln!(w).and_then(|_| w.flush()).map_err(|e| Error::io(path, e))
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_reader(BufReader::new(file)).map_err(|e| format_err(path, e.to_string()))
}

/// Writes the full record into `dir`, creating it if needed.
pub fn export_record(dir: &Path, config: &RunConfig, record: &RunRecord, provenance: &Provenance) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    write_samples_csv(&dir.join(SAMPLES_FILE), &record.rows)?;
    write_energy_csv(&dir.join(ENERGY_FILE), &record.energy)?;
    let mut marginals = Vec::new();
    if !record.marginals.is_empty() {
        let mdir = dir.join(MARGINAL_DIR);
        fs::create_dir_all(&mdir).map_err(|e| Error::io(&mdir, e))?;
        for m in &record.marginals {
            let file = marginal_file_name(m);
            write_values(&mdir.join(&file), &m.values)?;
            marginals.push(MarginalEntry {
                file: format!("{MARGINAL_DIR}/{file}"),
                axis: m.axis,
                basis: m.basis,
                time: m.time,
            });
        }
    }
    let sidecar = Sidecar {
        schema: SIDECAR_SCHEMA,
        config: config.clone(),
        provenance: provenance.clone(),
        grid: record.grid,
        first_breach: record.first_breach,
        complete: record.complete,
        failure: record.failure.clone(),
        husimi: record.husimi.clone(),
        marginals,
    };
    write_json(&dir.join(SIDECAR_FILE), &sidecar)
}

/// Reads a run directory written by [`export_record`].
pub fn load_record(dir: &Path) -> Result<(RunRecord, Sidecar)> {
    let sidecar_path = dir.join(SIDECAR_FILE);
    let sidecar: Sidecar = read_json(&sidecar_path)?;
    if sidecar.schema != SIDECAR_SCHEMA {
        return Err(format_err(
            &sidecar_path,
            format!("unsupported schema {}, expected {SIDECAR_SCHEMA}", sidecar.schema),
        ));
    }
    let params = sidecar.config.params()?;
    let marginals = sidecar
        .marginals
        .iter()
        .map(|m| {
            Ok(MarginalDistribution {
                axis: m.axis,
                basis: m.basis,
                time: m.time,
                hbar_s: sidecar.grid.hbar_s(),
                values: read_values(&dir.join(&m.file))?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let record = RunRecord {
        grid: sidecar.grid,
        params,
        rows: read_samples_csv(&dir.join(SAMPLES_FILE))?,
        energy: read_energy_csv(&dir.join(ENERGY_FILE))?,
        husimi: sidecar.husimi.clone(),
        marginals,
        first_breach: sidecar.first_breach,
        complete: sidecar.complete,
        failure: sidecar.failure.clone(),
    };
    Ok((record, sidecar))
}

/// Resolves a path given on the command line to a run directory: either the
/// directory itself or its `run.json`.
pub fn run_directory(path: &Path) -> PathBuf {
    if path.is_file() {
        path.parent().map_or_else(|| PathBuf::from("."), Path::to_path_buf)
    } else {
        path.to_path_buf()
    }
}

/// Saved simulation state.
#[derive(Clone, Debug, PartialEq)]
pub struct Checkpoint {
    /// Canonical JSON of the config fields that determine the trajectory.
    pub fingerprint: String,
    pub t: u64,
    pub psi: WaveFunction2D,
    pub diagnostics: StepDiagnostics,
    pub record: RunRecord,
}

fn put_u32(buf: &mut Vec<u8>, v: u32) {
    buf.extend_from_slice(&v.to_le_bytes());
}

fn put_u64(buf: &mut Vec<u8>, v: u64) {
    buf.extend_from_slice(&v.to_le_bytes());
}

fn put_f64(buf: &mut Vec<u8>, v: f64) {
    buf.extend_from_slice(&v.to_le_bytes());
}

fn put_bytes(buf: &mut Vec<u8>, bytes: &[u8]) {
    put_u64(buf, bytes.len() as u64);
    buf.extend_from_slice(bytes);
}

/// Layout (little endian): magic, format version `u32`, fingerprint
/// (`u64` length + UTF-8), `t`, `n1`, `n2`, `ħ_s`, amplitudes as `(re, im)`
/// pairs in row-major position order, `e1`, `e2`, both edge populations,
/// and the partial record as length-prefixed JSON.
pub fn write_checkpoint(path: &Path, checkpoint: &Checkpoint) -> Result<()> {
    let grid = checkpoint.psi.grid();
    let mut buf = Vec::with_capacity(16 * grid.size() + 4096);
    buf.extend_from_slice(CHECKPOINT_MAGIC);
    put_u32(&mut buf, CHECKPOINT_VERSION);
    put_bytes(&mut buf, checkpoint.fingerprint.as_bytes());
    put_u64(&mut buf, checkpoint.t);
    put_u64(&mut buf, grid.n1() as u64);
    put_u64(&mut buf, grid.n2() as u64);
    put_f64(&mut buf, grid.hbar_s());
    for z in checkpoint.psi.amplitudes() {
        put_f64(&mut buf, z.re);
        put_f64(&mut buf, z.im);
    }
    let d = checkpoint.diagnostics;
    for v in [d.e1, d.e2, d.edge[0], d.edge[1]] {
        put_f64(&mut buf, v);
    }
    let record = serde_json::to_vec(&checkpoint.record).map_err(|e| Error::Checkpoint(e.to_string()))?;
    put_bytes(&mut buf, &record);
    // write then rename, so an interrupted write never replaces a good checkpoint
    let tmp = path.with_extension("tmp");
    fs::write(&tmp, &buf).map_err(|e| Error::io(&tmp, e))?;
    fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
}

struct Cursor<'a> {
    bytes: &'a [u8],
    at: usize,
}

impl Cursor<'_> {
    fn take(&mut self, n: usize) -> Result<&[u8]> {
        let end = self
            .at
            .checked_add(n)
            .filter(|&e| e <= self.bytes.len())
            .ok_or_else(|| Error::Checkpoint("file is truncated".into()))?;
        let out = &self.bytes[self.at..end];
        self.at = end;
        Ok(out)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }

    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }

    fn bytes(&mut self) -> Result<&[u8]> {
        let len = usize::try_from(self.u64()?).map_err(|_| Error::Checkpoint("length overflow".into()))?;
        self.take(len)
    }
}

pub fn read_checkpoint(path: &Path) -> Result<Checkpoint> {
    let mut bytes = Vec::new();
    File::open(path)
        .and_then(|mut f| f.read_to_end(&mut bytes))
        .map_err(|e| Error::io(path, e))?;
    let mut c = Cursor { bytes: &bytes, at: 0 };
    if c.take(8).ok() != Some(CHECKPOINT_MAGIC.as_slice()) {
        return Err(Error::Checkpoint(format!("{} is not a checkpoint file", path.display())));
    }
    let version = c.u32()?;
    if version != CHECKPOINT_VERSION {
        return Err(Error::Checkpoint(format!(
            "unsupported checkpoint version {version}, expected {CHECKPOINT_VERSION}"
        )));
    }
    let fingerprint = String::from_utf8(c.bytes()?.to_vec()).map_err(|e| Error::Checkpoint(e.to_string()))?;
    let t = c.u64()?;
    let n1 = c.u64()? as usize;
    let n2 = c.u64()? as usize;
    let hbar_s = c.f64()?;
    let grid = GridSpec::new(n1, n2, hbar_s).map_err(|e| Error::Checkpoint(e.to_string()))?;
    let mut amplitudes = Vec::with_capacity(grid.size());
    for _ in 0..grid.size() {
        let re = c.f64()?;
        let im = c.f64()?;
        amplitudes.push(Complex64::new(re, im));
    }
    let psi = WaveFunction2D::from_amplitudes(grid, [Basis::Position; 2], amplitudes)?;
    let diagnostics = StepDiagnostics {
        e1: c.f64()?,
        e2: c.f64()?,
        edge: [c.f64()?, c.f64()?],
    };
    let record = serde_json::from_slice(c.bytes()?).map_err(|e| Error::Checkpoint(e.to_string()))?;
    if c.at != bytes.len() {
        return Err(Error::Checkpoint("trailing bytes after record".into()));
    }
    Ok(Checkpoint {
        fingerprint,
        t,
        psi,
        diagnostics,
        record,
    })
}
