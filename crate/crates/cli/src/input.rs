//! Loading populations and model parameters, writing outputs.

use std::env;
use std::fmt;
use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use dlcost_core::ingest::{self, IngestError, ParseMode};
use dlcost_core::{builtin_corpus, EfficiencyModel, HardwareProfile, JobPopulation, OverlapMode};
use serde_json::{json, Value as Json};
use sha2::{Digest, Sha256};

use crate::report::{Format, Report};
use crate::{FormatArg, InputArgs, ModelArgs, OutputArgs};

pub const EX_DATAERR: u8 = 2;
pub const EX_USAGE: u8 = 64;
pub const EX_NOINPUT: u8 = 66;
pub const EX_CANTCREAT: u8 = 73;

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Unreadable(String),
    Data(String),
    Output { path: PathBuf, source: io::Error },
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) => EX_USAGE,
            CliError::Unreadable(_) => EX_NOINPUT,
            CliError::Data(_) => EX_DATAERR,
            CliError::Output { .. } => EX_CANTCREAT,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Usage(m) | CliError::Unreadable(m) | CliError::Data(m) => f.write_str(m),
            CliError::Output { path, source } => write!(f, "cannot write {}: {source}", path.display()),
        }
    }
}

impl From<IngestError> for CliError {
    fn from(err: IngestError) -> Self {
        match err {
            IngestError::Unreadable { .. } | IngestError::UnknownPreset(_) => {
                CliError::Unreadable(err.to_string())
            }
            _ => CliError::Data(err.to_string()),
        }
    }
}

pub struct Loaded {
    pub population: JobPopulation,
    pub label: String,
    pub digest: String,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

pub fn load_population(input: &InputArgs, model: &ModelArgs) -> Result<Loaded, CliError> {
    let Some(path) = &input.trace else {
        let corpus = builtin_corpus();
        let digest = sha256_hex(ingest::trace_to_string(&corpus).as_bytes());
        return Ok(Loaded {
            population: corpus,
            label: "builtin:corpus".into(),
            digest,
        });
    };
    let bytes = read_input(path)?;
    let mode = if model.strict {
        ParseMode::Strict
    } else {
        ParseMode::Lenient
    };
    let load = ingest::parse_trace(bytes.as_slice(), mode).map_err(|e| match e {
        IngestError::Line(line) => CliError::Data(format!("{}:{line}", path.display())),
        other => other.into(),
    })?;
    if !load.errors.is_empty() {
        for err in &load.errors {
            let level = if model.skip_invalid { "warning" } else { "error" };
            eprintln!("{level}: {}:{err}", path.display());
        }
        if !model.skip_invalid {
            return Err(CliError::Data(format!(
                "{} invalid line(s) in {}; use --skip-invalid to continue without them",
                load.errors.len(),
                path.display()
            )));
        }
    }
    Ok(Loaded {
        population: load.population,
        label: path.display().to_string(),
        digest: sha256_hex(&bytes),
    })
}

pub fn read_input(path: &Path) -> Result<Vec<u8>, CliError> {
    fs::read(path).map_err(|e| CliError::Unreadable(format!("cannot read {}: {e}", path.display())))
}

fn hw_search_dirs() -> Vec<PathBuf> {
    env::var_os("DLCOST_HW_DIR")
        .map(|v| env::split_paths(&v).collect())
        .unwrap_or_default()
}

pub fn resolve_hardware(spec: &str) -> Result<HardwareProfile, CliError> {
    Ok(ingest::resolve_hardware(spec, &hw_search_dirs())?)
}

pub fn resolve_efficiency(spec: &str) -> Result<EfficiencyModel, CliError> {
    if spec == "default" {
        return Ok(EfficiencyModel::default());
    }
    if let Some(job) = spec.strip_prefix("measured:") {
        return EfficiencyModel::measured(job)
            .ok_or_else(|| CliError::Usage(format!("no measured efficiencies for job '{job}'")));
    }
    Ok(ingest::parse_efficiency_config(Path::new(spec))?)
}

/// Everything a report needs to be re-run.
pub struct Context {
    pub hw: HardwareProfile,
    pub eff: EfficiencyModel,
    pub overlap: OverlapMode,
    pub model: ModelArgs,
}

impl Context {
    pub fn resolve(model: &ModelArgs) -> Result<Self, CliError> {
        Ok(Context {
            hw: resolve_hardware(&model.hw)?,
            eff: resolve_efficiency(&model.eff)?,
            overlap: model.overlap,
            model: model.clone(),
        })
    }

    pub fn stamp(&self, report: &mut Report, loaded: &Loaded, params: Json) {
        let hw = &self.hw;
        let eff = &self.eff;
        report.meta("tool_version", json!(env!("CARGO_PKG_VERSION")));
        report.meta("hardware_source", json!(self.model.hw));
        report.meta(
            "hardware",
            json!({
                "gpu_peak_flops": hw.gpu_peak_flops,
                "gpu_mem_bandwidth": hw.gpu_mem_bandwidth,
                "pcie_bandwidth": hw.pcie_bandwidth,
                "ethernet_bandwidth": hw.ethernet_bandwidth,
                "nvlink_bandwidth": hw.nvlink_bandwidth,
                "gpu_mem_capacity": hw.gpu_mem_capacity,
            }),
        );
        report.meta("efficiency_source", json!(self.model.eff));
        report.meta(
            "efficiency",
            json!({
                "compute": eff.compute_eff,
                "mem": eff.mem_eff,
                "pcie": eff.pcie_eff,
                "ethernet": eff.ethernet_eff,
                "nvlink": eff.nvlink_eff,
            }),
        );
        report.meta("overlap", json!(self.overlap.label()));
        report.meta("input", json!(loaded.label));
        report.meta("input_sha256", json!(loaded.digest));
        report.meta("jobs", json!(loaded.population.len()));
        report.meta("params", params);
    }
}

fn to_format(f: FormatArg) -> Format {
    match f {
        FormatArg::Csv => Format::Csv,
        FormatArg::Json => Format::Json,
    }
}

/// Path of the metadata file written next to a CSV report.
pub fn sidecar_path(out: &Path) -> PathBuf {
    let mut name = out.as_os_str().to_owned();
    name.push(".meta.json");
    PathBuf::from(name)
}

pub fn write_report(report: &Report, output: &OutputArgs) -> Result<(), CliError> {
    let format = to_format(output.format);
    let bytes = report.to_bytes(format);
    write_bytes(output.out.as_deref(), &bytes)?;
    if let (Format::Csv, Some(out)) = (format, &output.out) {
        let mut meta = serde_json::to_vec_pretty(&report.metadata_json()).expect("metadata serializes");
        meta.push(b'\n');
        write_bytes(Some(&sidecar_path(out)), &meta)?;
    }
    Ok(())
}

pub fn write_bytes(out: Option<&Path>, bytes: &[u8]) -> Result<(), CliError> {
    match out {
        Some(path) => fs::write(path, bytes).map_err(|source| CliError::Output {
            path: path.to_path_buf(),
            source,
        }),
        None => {
            let mut stdout = io::stdout().lock();
            match stdout.write_all(bytes).and_then(|()| stdout.flush()) {
                // a closed pipe is not worth an error exit
                Err(e) if e.kind() == io::ErrorKind::BrokenPipe => Ok(()),
                other => other.map_err(|source| CliError::Output {
                    path: PathBuf::from("<stdout>"),
                    source,
                }),
            }
        }
    }
}
