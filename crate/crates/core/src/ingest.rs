//! Trace files, hardware/efficiency config files, the built-in case-study
//! corpus and seeded synthetic populations.
//!
//! A trace is newline-delimited JSON, one [`WorkloadRecord`] per line.
//! Quantity fields take either a number in canonical units or a unit string
//! such as `"3GB"` or `"1.56T"`.

use std::collections::BTreeMap;
use std::fs;
use std::io::{self, BufRead, Write};
use std::path::{Path, PathBuf};

use rand::distributions::{Distribution, WeightedIndex};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::aggregate::JobPopulation;
use crate::model::{
    validate_record, ArchitectureKind, EfficiencyModel, HardwareProfile, RecordViolation,
    WorkloadRecord, DEFAULT_GPU_MEM_CAPACITY,
};
use crate::units::{parse_quantity, QuantityError, QuantityKind};

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("cannot read {path}: {source}")]
    Unreadable { path: PathBuf, source: io::Error },
    #[error("read failed: {0}")]
    Io(#[from] io::Error),
    #[error("{0}")]
    Line(LineError),
    #[error("{path}: {message}")]
    Config { path: String, message: String },
    #[error("unknown hardware preset '{0}'")]
    UnknownPreset(String),
    #[error("invalid synthetic population spec: {0}")]
    InvalidSynthSpec(String),
}

/// Why one trace line was rejected.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum LineProblem {
    #[error("invalid JSON: {0}")]
    Json(String),
    #[error("field '{field}': {source}")]
    Quantity { field: &'static str, source: QuantityError },
    #[error("{0}")]
    UnknownArchitecture(String),
    #[error("{}", join_violations(.0))]
    Invalid(Vec<RecordViolation>),
}

fn join_violations(v: &[RecordViolation]) -> String {
    v.iter().map(|e| e.to_string()).collect::<Vec<_>>().join("; ")
}

#[derive(Debug, Clone, PartialEq, Error)]
#[error("line {line}: {problem}")]
pub struct LineError {
    pub line: usize,
    pub job_id: Option<String>,
    pub problem: LineProblem,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ParseMode {
    /// Collect every bad line and keep going.
    #[default]
    Lenient,
    /// Stop at the first bad line.
    Strict,
}

/// Parsed trace: valid records in file order plus one entry per bad line.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct TraceLoad {
    pub population: JobPopulation,
    pub errors: Vec<LineError>,
}

#[derive(Deserialize)]
#[serde(untagged)]
enum QuantityField {
    Number(f64),
    Text(String),
}

impl QuantityField {
    fn resolve(self, field: &'static str, kind: QuantityKind) -> Result<f64, LineProblem> {
        match self {
            QuantityField::Number(v) => Ok(v),
            QuantityField::Text(s) => {
                parse_quantity(&s, kind).map_err(|source| LineProblem::Quantity { field, source })
            }
        }
    }
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawRecord {
    job_id: String,
    arch: String,
    num_cnodes: u32,
    batch_size: u32,
    flops: QuantityField,
    mem_access_bytes: QuantityField,
    input_bytes: QuantityField,
    weight_traffic_bytes: QuantityField,
    dense_weight_bytes: QuantityField,
    embedding_weight_bytes: QuantityField,
    #[serde(default)]
    measured_step_seconds: Option<f64>,
    #[serde(default)]
    unmodeled_network_bytes: Option<QuantityField>,
}

#[derive(Deserialize)]
struct JobIdOnly {
    job_id: Option<String>,
}

fn parse_line(text: &str) -> Result<WorkloadRecord, LineProblem> {
    let raw: RawRecord = serde_json::from_str(text).map_err(|e| LineProblem::Json(e.to_string()))?;
    let arch: ArchitectureKind = raw
        .arch
        .parse()
        .map_err(|e: crate::model::UnknownArchitecture| LineProblem::UnknownArchitecture(e.to_string()))?;
    let rec = WorkloadRecord {
        job_id: raw.job_id,
        arch,
        num_cnodes: raw.num_cnodes,
        batch_size: raw.batch_size,
        flops: raw.flops.resolve("flops", QuantityKind::FlopCount)?,
        mem_access_bytes: raw.mem_access_bytes.resolve("mem_access_bytes", QuantityKind::Bytes)?,
        input_bytes: raw.input_bytes.resolve("input_bytes", QuantityKind::Bytes)?,
        weight_traffic_bytes: raw
            .weight_traffic_bytes
            .resolve("weight_traffic_bytes", QuantityKind::Bytes)?,
        dense_weight_bytes: raw.dense_weight_bytes.resolve("dense_weight_bytes", QuantityKind::Bytes)?,
        embedding_weight_bytes: raw
            .embedding_weight_bytes
            .resolve("embedding_weight_bytes", QuantityKind::Bytes)?,
        measured_step_seconds: raw.measured_step_seconds,
        unmodeled_network_bytes: raw
            .unmodeled_network_bytes
            .map(|q| q.resolve("unmodeled_network_bytes", QuantityKind::Bytes))
            .transpose()?,
    };
    validate_record(rec).map_err(LineProblem::Invalid)
}

/// Parses a trace from any reader. Blank lines are skipped but still count
/// towards line numbers.
pub fn parse_trace<R: BufRead>(reader: R, mode: ParseMode) -> Result<TraceLoad, IngestError> {
    let mut out = TraceLoad::default();
    for (idx, line) in reader.lines().enumerate() {
        let line = line?;
        let trimmed = line.trim();
        if trimmed.is_empty() {
            continue;
        }
        match parse_line(trimmed) {
            Ok(rec) => out.population.records.push(rec),
            Err(problem) => {
                let job_id = serde_json::from_str::<JobIdOnly>(trimmed)
                    .ok()
                    .and_then(|j| j.job_id);
                let err = LineError {
                    line: idx + 1,
                    job_id,
                    problem,
                };
                if mode == ParseMode::Strict {
                    return Err(IngestError::Line(err));
                }
                out.errors.push(err);
            }
        }
    }
    Ok(out)
}

pub fn load_trace(path: &Path, mode: ParseMode) -> Result<TraceLoad, IngestError> {
    let file = fs::File::open(path).map_err(|source| IngestError::Unreadable {
        path: path.to_path_buf(),
        source,
    })?;
    parse_trace(io::BufReader::new(file), mode)
}

/// Writes one JSON object per record, canonical numeric units.
pub fn write_trace<W: Write>(pop: &JobPopulation, mut out: W) -> io::Result<()> {
    for rec in pop {
        serde_json::to_writer(&mut out, rec)?;
        out.write_all(b"\n")?;
    }
    Ok(())
}

pub fn trace_to_string(pop: &JobPopulation) -> String {
    let mut buf = Vec::new();
    write_trace(pop, &mut buf).expect("writing to a Vec cannot fail");
    String::from_utf8(buf).expect("serde_json emits UTF-8")
}

pub const PAI_BASELINE: &str = "pai-baseline";
pub const CASE_STUDY_TESTBED: &str = "case-study-testbed";

pub fn builtin_hardware(name: &str) -> Option<HardwareProfile> {
    match name {
        PAI_BASELINE => Some(HardwareProfile::pai_baseline()),
        CASE_STUDY_TESTBED => Some(HardwareProfile::case_study_testbed()),
        _ => None,
    }
}

#[derive(Deserialize)]
#[serde(untagged)]
enum ConfigValue {
    Number(f64),
    Text(String),
}

fn read_config(path: &Path) -> Result<BTreeMap<String, ConfigValue>, IngestError> {
    let text = fs::read_to_string(path).map_err(|source| IngestError::Unreadable {
        path: path.to_path_buf(),
        source,
    })?;
    toml::from_str(&text).map_err(|e| IngestError::Config {
        path: path.display().to_string(),
        message: e.to_string(),
    })
}

/// Parses a flat key-value hardware file, e.g.
///
/// ```toml
/// gpu_flops = "11TFLOPs"
/// gpu_mem_bandwidth = "1TB/s"
/// pcie = "10GB/s"
/// ethernet = "25Gbps"
/// nvlink = "50GB/s"
/// gpu_mem_capacity = "16GB"   # optional
/// ```
pub fn parse_hardware_config(path: &Path) -> Result<HardwareProfile, IngestError> {
    let entries = read_config(path)?;
    let config_err = |message: String| IngestError::Config {
        path: path.display().to_string(),
        message,
    };
    let mut fields: BTreeMap<&'static str, f64> = BTreeMap::new();
    for (key, value) in entries {
        let (name, kind) = match key.as_str() {
            "gpu_flops" | "gpu_peak_flops" => ("gpu_peak_flops", QuantityKind::FlopsRate),
            "gpu_mem_bandwidth" | "memory" => ("gpu_mem_bandwidth", QuantityKind::Bandwidth),
            "pcie" | "pcie_bandwidth" => ("pcie_bandwidth", QuantityKind::Bandwidth),
            "ethernet" | "ethernet_bandwidth" => ("ethernet_bandwidth", QuantityKind::Bandwidth),
            "nvlink" | "nvlink_bandwidth" => ("nvlink_bandwidth", QuantityKind::Bandwidth),
            "gpu_mem_capacity" => ("gpu_mem_capacity", QuantityKind::Bytes),
            other => return Err(config_err(format!("unknown key '{other}'"))),
        };
        let parsed = match value {
            ConfigValue::Number(v) => v,
            ConfigValue::Text(s) => parse_quantity(&s, kind).map_err(|e| config_err(format!("{key}: {e}")))?,
        };
        fields.insert(name, parsed);
    }
    let mut take = |name: &'static str| {
        fields
            .remove(name)
            .ok_or_else(|| config_err(format!("missing key '{name}'")))
    };
    let hw = HardwareProfile {
        gpu_peak_flops: take("gpu_peak_flops")?,
        gpu_mem_bandwidth: take("gpu_mem_bandwidth")?,
        pcie_bandwidth: take("pcie_bandwidth")?,
        ethernet_bandwidth: take("ethernet_bandwidth")?,
        nvlink_bandwidth: take("nvlink_bandwidth")?,
        gpu_mem_capacity: take("gpu_mem_capacity").unwrap_or(DEFAULT_GPU_MEM_CAPACITY),
    };
    hw.validate().map_err(|e| config_err(e.to_string()))?;
    Ok(hw)
}

/// Resolves a preset name or file path. Each directory in `search_dirs` is
/// tried first for `<name>` and `<name>.toml`, then the built-in presets,
/// then `name` as a path.
pub fn resolve_hardware(name: &str, search_dirs: &[PathBuf]) -> Result<HardwareProfile, IngestError> {
    for dir in search_dirs {
        for candidate in [dir.join(name), dir.join(format!("{name}.toml"))] {
            if candidate.is_file() {
                return parse_hardware_config(&candidate);
            }
        }
    }
    if let Some(hw) = builtin_hardware(name) {
        return Ok(hw);
    }
    let path = Path::new(name);
    if path.exists() {
        return parse_hardware_config(path);
    }
    Err(IngestError::UnknownPreset(name.to_string()))
}

/// Parses an efficiency file with optional keys `compute`, `mem`, `pcie`,
/// `ethernet`, `nvlink`; missing keys stay at the default.
pub fn parse_efficiency_config(path: &Path) -> Result<EfficiencyModel, IngestError> {
    let entries = read_config(path)?;
    let config_err = |message: String| IngestError::Config {
        path: path.display().to_string(),
        message,
    };
    let mut eff = EfficiencyModel::default();
    for (key, value) in entries {
        let v = match value {
            ConfigValue::Number(v) => v,
            ConfigValue::Text(s) => match s.strip_suffix('%') {
                Some(pct) => pct
                    .trim()
                    .parse::<f64>()
                    .map(|p| p / 100.0)
                    .map_err(|_| config_err(format!("{key}: malformed percentage '{s}'")))?,
                None => return Err(config_err(format!("{key}: expected a number or percentage"))),
            },
        };
        let slot = match key.as_str() {
            "compute" | "compute_eff" => &mut eff.compute_eff,
            "mem" | "mem_eff" => &mut eff.mem_eff,
            "pcie" | "pcie_eff" => &mut eff.pcie_eff,
            "ethernet" | "ethernet_eff" => &mut eff.ethernet_eff,
            "nvlink" | "nvlink_eff" => &mut eff.nvlink_eff,
            other => return Err(config_err(format!("unknown key '{other}'"))),
        };
        *slot = v;
    }
    eff.validate().map_err(|e| config_err(e.to_string()))?;
    Ok(eff)
}

#[allow(clippy::too_many_arguments)]
fn case(
    job_id: &str,
    arch: ArchitectureKind,
    num_cnodes: u32,
    batch_size: u32,
    flops: f64,
    mem_access_bytes: f64,
    input_bytes: f64,
    weight_traffic_bytes: f64,
    dense_weight_bytes: f64,
    embedding_weight_bytes: f64,
) -> WorkloadRecord {
    WorkloadRecord {
        job_id: job_id.to_string(),
        arch,
        num_cnodes,
        batch_size,
        flops,
        mem_access_bytes,
        input_bytes,
        weight_traffic_bytes,
        dense_weight_bytes,
        embedding_weight_bytes,
        measured_step_seconds: None,
        unmodeled_network_bytes: None,
    }
}

/// The six case-study models. Single-server jobs run on a full 8-GPU server.
pub fn builtin_corpus() -> JobPopulation {
    use ArchitectureKind::*;
    let mut speech = case("speech", OneWorkerOneGpu, 1, 32, 7.9e12, 20.4e9, 804e6, 0.0, 416e6, 0.0);
    // recorded network volume with no weight path on a single GPU
    speech.unmodeled_network_bytes = Some(728e6);
    JobPopulation::new(vec![
        case("multi_interests", PsWorker, 8, 2048, 105.8e9, 100.4e9, 261e6, 122e6, 1.19e6, 239.45e9),
        case("resnet50", AllReduceLocal, 8, 64, 1.56e12, 31.9e9, 38e6, 357e6, 204e6, 0.0),
        case("nmt", AllReduceLocal, 8, 6144, 2.5e12, 101.6e9, 22e3, 1.33e9, 706e6, 819e6),
        case("bert", AllReduceLocal, 8, 12, 2.1e12, 107.3e9, 46e3, 1.5e9, 1e9, 284e6),
        speech,
        case("gcn", Pearl, 8, 512, 330.7e9, 25.79e9, 1.2e6, 3e9, 207e6, 54e9),
    ])
}

/// Inclusive log-uniform range.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LogRange {
    pub min: f64,
    pub max: f64,
}

impl LogRange {
    pub const fn new(min: f64, max: f64) -> Self {
        LogRange { min, max }
    }

    fn validate(&self, name: &str) -> Result<(), String> {
        if !(self.min > 0.0 && self.max >= self.min && self.max.is_finite()) {
            return Err(format!("range '{name}' must satisfy 0 < min <= max"));
        }
        Ok(())
    }

    fn sample<R: Rng>(&self, rng: &mut R) -> f64 {
        if self.min == self.max {
            return self.min;
        }
        let (lo, hi) = (self.min.ln(), self.max.ln());
        rng.gen_range(lo..=hi).exp().clamp(self.min, self.max)
    }

    fn sample_int<R: Rng>(&self, rng: &mut R) -> u32 {
        (self.sample(rng).round() as u32).max(1)
    }
}

/// Recipe for a seeded synthetic population.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SynthSpec {
    pub size: usize,
    pub seed: u64,
    /// Fraction of jobs per architecture; must sum to 1.
    pub mix: BTreeMap<ArchitectureKind, f64>,
    pub flops: LogRange,
    pub mem_access_bytes: LogRange,
    pub input_bytes: LogRange,
    pub weight_traffic_bytes: LogRange,
    pub dense_weight_bytes: LogRange,
    pub embedding_weight_bytes: LogRange,
    /// Probability that a job carries sparse embedding weights.
    pub embedding_probability: f64,
    /// cNode counts for multi-server architectures; single-server ones are
    /// capped at 8 and single-GPU jobs always get 1.
    pub cnodes: LogRange,
    pub batch_size: LogRange,
}

impl SynthSpec {
    /// A broad cluster-like mix with the given size and seed.
    pub fn with_defaults(size: usize, seed: u64) -> Self {
        let mix = BTreeMap::from([
            (ArchitectureKind::OneWorkerOneGpu, 0.3),
            (ArchitectureKind::OneWorkerNGpu, 0.1),
            (ArchitectureKind::PsWorker, 0.4),
            (ArchitectureKind::AllReduceLocal, 0.1),
            (ArchitectureKind::AllReduceCluster, 0.05),
            (ArchitectureKind::Pearl, 0.05),
        ]);
        SynthSpec {
            size,
            seed,
            mix,
            flops: LogRange::new(1e9, 1e13),
            mem_access_bytes: LogRange::new(1e8, 2e11),
            input_bytes: LogRange::new(1e3, 1e9),
            weight_traffic_bytes: LogRange::new(1e6, 5e9),
            dense_weight_bytes: LogRange::new(1e6, 5e9),
            embedding_weight_bytes: LogRange::new(1e8, 5e11),
            embedding_probability: 0.3,
            cnodes: LogRange::new(2.0, 512.0),
            batch_size: LogRange::new(8.0, 8192.0),
        }
    }

    pub fn validate(&self) -> Result<(), IngestError> {
        let bad = |m: String| IngestError::InvalidSynthSpec(m);
        if self.mix.is_empty() {
            return Err(bad("architecture mix is empty".into()));
        }
        if self.mix.values().any(|&f| !(f >= 0.0 && f.is_finite())) {
            return Err(bad("mix fractions must be non-negative".into()));
        }
        let total: f64 = self.mix.values().sum();
        if (total - 1.0).abs() > 1e-9 {
            return Err(bad(format!("mix fractions sum to {total}, expected 1")));
        }
        if !(0.0..=1.0).contains(&self.embedding_probability) {
            return Err(bad("embedding_probability must lie in [0, 1]".into()));
        }
        let ranges = [
            ("flops", &self.flops),
            ("mem_access_bytes", &self.mem_access_bytes),
            ("input_bytes", &self.input_bytes),
            ("weight_traffic_bytes", &self.weight_traffic_bytes),
            ("dense_weight_bytes", &self.dense_weight_bytes),
            ("embedding_weight_bytes", &self.embedding_weight_bytes),
            ("cnodes", &self.cnodes),
            ("batch_size", &self.batch_size),
        ];
        for (name, range) in ranges {
            range.validate(name).map_err(bad)?;
        }
        if self.cnodes.max > f64::from(u32::MAX) || self.batch_size.max > f64::from(u32::MAX) {
            return Err(bad("cnodes and batch_size must fit in 32 bits".into()));
        }
        Ok(())
    }
}

/// Draws a population from `spec`. The same spec always yields the same
/// population on every platform.
pub fn synth_population(spec: &SynthSpec) -> Result<JobPopulation, IngestError> {
    spec.validate()?;
    let archs: Vec<ArchitectureKind> = spec.mix.keys().copied().collect();
    let weights: Vec<f64> = spec.mix.values().copied().collect();
    let picker = WeightedIndex::new(&weights)
        .map_err(|e| IngestError::InvalidSynthSpec(e.to_string()))?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);

    let mut records = Vec::with_capacity(spec.size);
    for i in 0..spec.size {
        let arch = archs[picker.sample(&mut rng)];
        let num_cnodes = match arch {
            ArchitectureKind::OneWorkerOneGpu => 1,
            ArchitectureKind::OneWorkerNGpu | ArchitectureKind::AllReduceLocal => {
                rng.gen_range(2..=crate::cost::GPUS_PER_SERVER)
            }
            _ => spec.cnodes.sample_int(&mut rng),
        };
        let batch_size = spec.batch_size.sample_int(&mut rng);
        let flops = spec.flops.sample(&mut rng);
        let mem_access_bytes = spec.mem_access_bytes.sample(&mut rng);
        let input_bytes = spec.input_bytes.sample(&mut rng);
        let weight_traffic_bytes = spec.weight_traffic_bytes.sample(&mut rng);
        let dense_weight_bytes = spec.dense_weight_bytes.sample(&mut rng);
        let embedding = spec.embedding_weight_bytes.sample(&mut rng);
        let has_embedding =
            arch == ArchitectureKind::Pearl || rng.gen_bool(spec.embedding_probability);

        let rec = WorkloadRecord {
            job_id: format!("synth-{i:06}"),
            arch,
            num_cnodes,
            batch_size,
            flops,
            mem_access_bytes,
            input_bytes,
            weight_traffic_bytes: if arch == ArchitectureKind::OneWorkerOneGpu {
                0.0
            } else {
                weight_traffic_bytes
            },
            dense_weight_bytes,
            embedding_weight_bytes: if has_embedding { embedding } else { 0.0 },
            measured_step_seconds: None,
            unmodeled_network_bytes: None,
        };
        let rec = validate_record(rec).map_err(|e| {
            IngestError::InvalidSynthSpec(format!("generated record failed validation: {}", join_violations(&e)))
        })?;
        records.push(rec);
    }
    Ok(JobPopulation::new(records))
}

/// Parses a TOML synthetic-population spec.
pub fn parse_synth_spec(text: &str) -> Result<SynthSpec, IngestError> {
    toml::from_str(text).map_err(|e| IngestError::InvalidSynthSpec(e.to_string()))
}
