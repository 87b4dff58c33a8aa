//! File interchange: sample and report CSVs, model JSON, run manifests.
//!
//! CSV files are comma separated, UTF-8, with a mandatory header row. All
//! outputs go through [`write_atomic`] so a failed command never leaves a
//! partial file behind.

use std::collections::BTreeMap;
use std::io::{Read, Write};
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::config_space::{ConfigPoint, ConfigSpace, Role};
use crate::critical_search::{CriticalReport, CriticalRow};
use crate::error::{Error, Result};
use crate::kriging::{default_id, GpiModel, ValuedSample};
use crate::pipeline::{ModelBuild, ModelOptions};
use crate::variogram::{AnisotropyMap, AnisotropyReport, EmpiricalVariogram, VariogramModel};

pub const ID_COLUMN: &str = "config_id";
pub const VALUE_COLUMN: &str = "delta_dB";
pub const MEASURED_COLUMN: &str = "measured_dB";

/// Writes `bytes` to a temporary file next to `path`, then renames it over
/// `path`.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(bytes)?;
    tmp.as_file().sync_all()?;
    tmp.persist(path).map_err(|e| Error::Io(e.error))?;
    Ok(())
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

fn read_file(path: &Path) -> Result<Vec<u8>> {
    let mut buf = Vec::new();
    std::fs::File::open(path)
        .map_err(|e| Error::Io(std::io::Error::new(e.kind(), format!("{}: {e}", path.display()))))?
        .read_to_end(&mut buf)?;
    Ok(buf)
}

// ---- manifests ----

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FileDigest {
    pub path: String,
    pub sha256: String,
    pub bytes: usize,
}

impl FileDigest {
    pub fn of(path: &Path, bytes: &[u8]) -> Self {
        FileDigest { path: path.display().to_string(), sha256: sha256_hex(bytes), bytes: bytes.len() }
    }
}

/// Everything needed to reproduce one command's outputs byte for byte.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool: String,
    pub version: String,
    pub command: String,
    pub seeds: BTreeMap<String, u64>,
    pub parameters: serde_json::Value,
    pub inputs: Vec<FileDigest>,
    pub outputs: Vec<FileDigest>,
    /// Seconds since the Unix epoch.
    pub started_at: f64,
    pub finished_at: f64,
}

fn now() -> f64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs_f64()).unwrap_or(0.0)
}

/// Collects inputs and outputs of one command, then writes the manifest.
#[derive(Debug)]
pub struct RunRecorder {
    manifest: RunManifest,
}

impl RunRecorder {
    pub fn start(command: &str, parameters: serde_json::Value) -> Self {
        RunRecorder {
            manifest: RunManifest {
                tool: env!("CARGO_PKG_NAME").into(),
                version: env!("CARGO_PKG_VERSION").into(),
                command: command.into(),
                seeds: BTreeMap::new(),
                parameters,
                inputs: Vec::new(),
                outputs: Vec::new(),
                started_at: now(),
                finished_at: 0.0,
            },
        }
    }

    pub fn seed(&mut self, name: &str, seed: u64) {
        self.manifest.seeds.insert(name.into(), seed);
    }

    /// Reads an input file and records its digest.
    pub fn read_input(&mut self, path: &Path) -> Result<Vec<u8>> {
        let bytes = read_file(path)?;
        self.manifest.inputs.push(FileDigest::of(path, &bytes));
        Ok(bytes)
    }

    /// Writes an output atomically and records its digest.
    pub fn write_output(&mut self, path: &Path, bytes: &[u8]) -> Result<()> {
        write_atomic(path, bytes)?;
        self.manifest.outputs.push(FileDigest::of(path, bytes));
        Ok(())
    }

    /// Writes `<first output>.manifest.json` and returns its path.
    pub fn finish(mut self) -> Result<(PathBuf, RunManifest)> {
        self.manifest.finished_at = now();
        let first = self
            .manifest
            .outputs
            .first()
            .map(|o| PathBuf::from(&o.path))
            .ok_or_else(|| Error::InvalidInput("a run must produce at least one output".into()))?;
        let path = manifest_path(&first);
        write_atomic(&path, &serde_json::to_vec_pretty(&self.manifest)?)?;
        Ok((path, self.manifest))
    }
}

pub fn manifest_path(output: &Path) -> PathBuf {
    let mut name = output.file_name().map(|n| n.to_os_string()).unwrap_or_default();
    name.push(".manifest.json");
    output.with_file_name(name)
}

// ---- samples ----

/// A sample file: configurations with optional measured deviations.
#[derive(Clone, Debug, PartialEq)]
pub struct SampleTable {
    pub ids: Vec<String>,
    pub points: Vec<ConfigPoint>,
    pub values: Vec<Option<f64>>,
}

impl SampleTable {
    pub fn requests(points: Vec<ConfigPoint>) -> Self {
        let ids = (0..points.len()).map(default_id).collect();
        let values = vec![None; points.len()];
        SampleTable { ids, points, values }
    }

    pub fn from_sample(sample: &ValuedSample) -> Self {
        SampleTable {
            ids: sample.ids.clone(),
            points: sample.points.clone(),
            values: sample.values.iter().map(|&v| Some(v)).collect(),
        }
    }

    /// Every row must carry a value.
    pub fn into_valued(self) -> Result<ValuedSample> {
        let mut values = Vec::with_capacity(self.values.len());
        for (id, v) in self.ids.iter().zip(&self.values) {
            values.push(v.ok_or_else(|| Error::InvalidInput(format!("row {id} has no {VALUE_COLUMN} value")))?);
        }
        ValuedSample::with_ids(self.points, values, self.ids)
    }
}

pub fn write_sample_csv(space: &ConfigSpace, table: &SampleTable) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut header = vec![ID_COLUMN.to_string()];
    header.extend(space.names().iter().map(|s| s.to_string()));
    header.push(VALUE_COLUMN.into());
    w.write_record(&header)?;
    for ((id, p), v) in table.ids.iter().zip(&table.points).zip(&table.values) {
        let mut rec = vec![id.clone()];
        rec.extend(p.iter().map(|x| x.to_string()));
        rec.push(v.map(|x| x.to_string()).unwrap_or_default());
        w.write_record(&rec)?;
    }
    w.into_inner().map_err(|e| Error::Io(e.into_error()))
}

/// Column positions of `names` in `header`.
fn locate(header: &csv::StringRecord, names: &[&str]) -> Result<Vec<usize>> {
    names
        .iter()
        .map(|n| {
            header
                .iter()
                .position(|h| h.trim() == *n)
                .ok_or_else(|| Error::InvalidInput(format!("CSV header lacks column {n:?}")))
        })
        .collect()
}

fn optional_column(header: &csv::StringRecord, name: &str) -> Option<usize> {
    header.iter().position(|h| h.trim() == name)
}

fn parse_number(field: &str, column: &str, row: usize) -> Result<f64> {
    field
        .trim()
        .parse::<f64>()
        .ok()
        .filter(|v| v.is_finite())
        .ok_or_else(|| Error::InvalidInput(format!("row {row}: column {column:?} holds {field:?}, not a finite number")))
}

/// Reads a sample CSV. Columns are matched by name; the value column may be
/// blank, which reads as `None`. Points outside the space bounds are rejected.
pub fn read_sample_csv(space: &ConfigSpace, bytes: &[u8]) -> Result<SampleTable> {
    let mut r = csv::Reader::from_reader(bytes);
    let header = r.headers()?.clone();
    let names = space.names();
    let dims = locate(&header, &names)?;
    let id_col = optional_column(&header, ID_COLUMN);
    let value_col = optional_column(&header, VALUE_COLUMN);
    let mut table = SampleTable { ids: Vec::new(), points: Vec::new(), values: Vec::new() };
    for (row, rec) in r.records().enumerate() {
        let rec = rec?;
        let coords = dims
            .iter()
            .zip(&names)
            .map(|(&c, n)| parse_number(rec.get(c).unwrap_or(""), n, row + 1))
            .collect::<Result<Vec<_>>>()?;
        if !space.contains(&coords) {
            return Err(Error::InvalidInput(format!("row {}: configuration outside the space bounds", row + 1)));
        }
        let id = id_col
            .and_then(|c| rec.get(c))
            .map(|s| s.trim().to_string())
            .filter(|s| !s.is_empty())
            .unwrap_or_else(|| default_id(row));
        let value = match value_col.and_then(|c| rec.get(c)).map(str::trim) {
            None | Some("") => None,
            Some(v) => Some(parse_number(v, VALUE_COLUMN, row + 1)?),
        };
        table.ids.push(id);
        table.points.push(ConfigPoint(coords));
        table.values.push(value);
    }
    Ok(table)
}

// ---- models ----

pub const MODEL_FORMAT: &str = "gpival-model";
pub const MODEL_VERSION: u32 = 1;

/// Serialized form of a [`GpiModel`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelFile {
    pub format: String,
    pub version: u32,
    pub space: ConfigSpace,
    pub variogram: VariogramModel,
    pub anisotropy: AnisotropyMap,
    pub fit_nrmse: f64,
    pub sample: ValuedSample,
    pub outliers: Vec<usize>,
    pub empirical: Option<EmpiricalVariogram>,
    pub anisotropy_report: Option<AnisotropyReport>,
    pub options: Option<ModelOptions>,
}

impl ModelFile {
    pub fn from_build(build: &ModelBuild) -> Self {
        let mut f = Self::from_model(&build.model);
        f.anisotropy_report = build.anisotropy_report.clone();
        f.options = Some(build.options.clone());
        f
    }

    pub fn from_model(model: &GpiModel) -> Self {
        ModelFile {
            format: MODEL_FORMAT.into(),
            version: MODEL_VERSION,
            space: model.space().clone(),
            variogram: *model.variogram(),
            anisotropy: model.anisotropy().clone(),
            fit_nrmse: model.fit_nrmse(),
            sample: model.sample().clone(),
            outliers: model.outliers().to_vec(),
            empirical: model.empirical().cloned(),
            anisotropy_report: None,
            options: None,
        }
    }

    /// Validates the file and rebuilds the kriging system.
    pub fn into_model(self) -> Result<GpiModel> {
        if self.format != MODEL_FORMAT || self.version != MODEL_VERSION {
            return Err(Error::InvalidInput(format!(
                "unsupported model file {} v{}",
                self.format, self.version
            )));
        }
        self.space.validate()?;
        let sample = ValuedSample::with_ids(self.sample.points, self.sample.values, self.sample.ids)?;
        if let Some(&bad) = self.outliers.iter().find(|&&i| i >= sample.len()) {
            return Err(Error::InvalidInput(format!("outlier index {bad} out of range")));
        }
        let mut model = GpiModel::new(sample, self.anisotropy, self.variogram, self.fit_nrmse, self.space)?
            .with_outliers(self.outliers);
        if let Some(e) = self.empirical {
            model = model.with_empirical(e);
        }
        Ok(model)
    }

    pub fn to_json(&self) -> Result<Vec<u8>> {
        let mut v = serde_json::to_vec_pretty(self)?;
        v.push(b'\n');
        Ok(v)
    }

    pub fn from_json(bytes: &[u8]) -> Result<Self> {
        Ok(serde_json::from_slice(bytes)?)
    }
}

// ---- critical reports ----

pub const ANTENNA_COLUMN: &str = "antenna";
pub const MODEL_ERROR_COLUMN: &str = "model_error_dB";
pub const PROBABILITY_COLUMN: &str = "failure_probability";

const REPORT_ROLE_ORDER: [Role; 8] = [
    Role::Frequency,
    Role::Power,
    Role::Par,
    Role::Bandwidth,
    Role::Distance,
    Role::Angle,
    Role::LocationX,
    Role::LocationY,
];

/// Dimension indices in report column order: frequency, power, PAR,
/// bandwidth, distance, angle, x, y, then everything else in space order.
pub fn report_dimension_order(space: &ConfigSpace) -> Vec<usize> {
    let mut order: Vec<usize> = REPORT_ROLE_ORDER.iter().filter_map(|&r| space.role_index(r)).collect();
    for i in 0..space.dim() {
        if !order.contains(&i) {
            order.push(i);
        }
    }
    order
}

pub fn write_report_csv(space: &ConfigSpace, rows: &[CriticalRow]) -> Result<Vec<u8>> {
    let order = report_dimension_order(space);
    let names = space.names();
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut header = vec!["rank".to_string(), ANTENNA_COLUMN.into()];
    header.extend(order.iter().map(|&i| names[i].to_string()));
    header.extend([VALUE_COLUMN.into(), MODEL_ERROR_COLUMN.into(), PROBABILITY_COLUMN.into()]);
    w.write_record(&header)?;
    for (rank, row) in rows.iter().enumerate() {
        let mut rec = vec![rank.to_string(), row.source.clone().unwrap_or_default()];
        rec.extend(order.iter().map(|&i| row.config[i].to_string()));
        rec.extend([row.delta_db.to_string(), row.model_error_db.to_string(), row.probability.to_string()]);
        w.write_record(&rec)?;
    }
    w.into_inner().map_err(|e| Error::Io(e.into_error()))
}

pub fn read_report_csv(space: &ConfigSpace, bytes: &[u8]) -> Result<Vec<CriticalRow>> {
    let mut r = csv::Reader::from_reader(bytes);
    let header = r.headers()?.clone();
    let names = space.names();
    let dims = locate(&header, &names)?;
    let cols = locate(&header, &[VALUE_COLUMN, MODEL_ERROR_COLUMN, PROBABILITY_COLUMN])?;
    let antenna = optional_column(&header, ANTENNA_COLUMN);
    let mut rows = Vec::new();
    for (i, rec) in r.records().enumerate() {
        let rec = rec?;
        let coords = dims
            .iter()
            .zip(&names)
            .map(|(&c, n)| parse_number(rec.get(c).unwrap_or(""), n, i + 1))
            .collect::<Result<Vec<_>>>()?;
        let num = |k: usize, name: &str| parse_number(rec.get(cols[k]).unwrap_or(""), name, i + 1);
        rows.push(CriticalRow {
            config: ConfigPoint(coords),
            source: antenna.and_then(|c| rec.get(c)).map(|s| s.trim().to_string()).filter(|s| !s.is_empty()),
            delta_db: num(0, VALUE_COLUMN)?,
            model_error_db: num(1, MODEL_ERROR_COLUMN)?,
            probability: num(2, PROBABILITY_COLUMN)?,
        });
    }
    Ok(rows)
}

pub fn report_json(report: &CriticalReport) -> Result<Vec<u8>> {
    let mut v = serde_json::to_vec_pretty(report)?;
    v.push(b'\n');
    Ok(v)
}

/// QQ plot data as `theoretical,sample` rows.
pub fn write_qq_csv(points: &[(f64, f64)]) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["theoretical_quantile", "sample_quantile"])?;
    for (t, s) in points {
        w.write_record([t.to_string(), s.to_string()])?;
    }
    w.into_inner().map_err(|e| Error::Io(e.into_error()))
}

// ---- verification of follow-up measurements ----

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VerifyRow {
    pub row: usize,
    pub antenna: Option<String>,
    pub measured_db: f64,
    pub mpe_db: f64,
    pub pass: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VerifyReport {
    pub rows: Vec<VerifyRow>,
    pub failures: Vec<usize>,
    pub overall: bool,
}

/// Checks `|measured| <= MPE` for every row of a CSV with a `measured_dB`
/// column. A `mpe_dB` column, when present, overrides `default_mpe` per row.
/// An empty table passes.
pub fn verify_measurements(bytes: &[u8], default_mpe: f64) -> Result<VerifyReport> {
    if !(default_mpe > 0.0) {
        return Err(Error::InvalidInput(format!("MPE must be positive, got {default_mpe}")));
    }
    let mut r = csv::Reader::from_reader(bytes);
    let header = r.headers()?.clone();
    let measured = locate(&header, &[MEASURED_COLUMN])?[0];
    let mpe_col = optional_column(&header, "mpe_dB");
    let antenna = optional_column(&header, ANTENNA_COLUMN);
    let mut rows = Vec::new();
    for (i, rec) in r.records().enumerate() {
        let rec = rec?;
        let measured_db = parse_number(rec.get(measured).unwrap_or(""), MEASURED_COLUMN, i + 1)?;
        let mpe_db = match mpe_col.and_then(|c| rec.get(c)).map(str::trim) {
            None | Some("") => default_mpe,
            Some(v) => parse_number(v, "mpe_dB", i + 1)?,
        };
        rows.push(VerifyRow {
            row: i,
            antenna: antenna.and_then(|c| rec.get(c)).map(|s| s.trim().to_string()).filter(|s| !s.is_empty()),
            measured_db,
            mpe_db,
            pass: measured_db.abs() <= mpe_db,
        });
    }
    let failures: Vec<usize> = rows.iter().filter(|r| !r.pass).map(|r| r.row).collect();
    Ok(VerifyReport { overall: failures.is_empty(), rows, failures })
}
