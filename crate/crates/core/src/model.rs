//! Domain types shared by every analysis: architectures, hardware, efficiency,
//! workload records and the per-step time breakdown.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Data-parallel training architecture of a job.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ArchitectureKind {
    /// Single worker, single GPU.
    OneWorkerOneGpu,
    /// Single worker, several GPUs in one server.
    OneWorkerNGpu,
    /// Parameter servers plus workers, synchronized over Ethernet and PCIe.
    PsWorker,
    /// AllReduce inside one NVLink server.
    #[serde(rename = "allreduce_local")]
    AllReduceLocal,
    /// AllReduce across servers over Ethernet and NVLink.
    #[serde(rename = "allreduce_cluster")]
    AllReduceCluster,
    /// Partitioned sparse embeddings, replicated dense weights, all over NVLink.
    Pearl,
}

impl ArchitectureKind {
    pub const ALL: [ArchitectureKind; 6] = [
        ArchitectureKind::OneWorkerOneGpu,
        ArchitectureKind::OneWorkerNGpu,
        ArchitectureKind::PsWorker,
        ArchitectureKind::AllReduceLocal,
        ArchitectureKind::AllReduceCluster,
        ArchitectureKind::Pearl,
    ];

    /// Lowercase label used in trace files and reports.
    pub fn label(self) -> &'static str {
        match self {
            ArchitectureKind::OneWorkerOneGpu => "one_worker_one_gpu",
            ArchitectureKind::OneWorkerNGpu => "one_worker_n_gpu",
            ArchitectureKind::PsWorker => "ps_worker",
            ArchitectureKind::AllReduceLocal => "allreduce_local",
            ArchitectureKind::AllReduceCluster => "allreduce_cluster",
            ArchitectureKind::Pearl => "pearl",
        }
    }

    /// Architectures confined to a single 8-GPU server.
    pub fn is_single_server(self) -> bool {
        matches!(
            self,
            ArchitectureKind::OneWorkerOneGpu
                | ArchitectureKind::OneWorkerNGpu
                | ArchitectureKind::AllReduceLocal
        )
    }
}

impl fmt::Display for ArchitectureKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("unknown architecture '{0}'")]
pub struct UnknownArchitecture(pub String);

impl FromStr for ArchitectureKind {
    type Err = UnknownArchitecture;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        ArchitectureKind::ALL
            .into_iter()
            .find(|a| a.label() == s)
            .ok_or_else(|| UnknownArchitecture(s.to_string()))
    }
}

/// A link that weights or input data travel over.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Medium {
    Pcie,
    Ethernet,
    #[serde(rename = "nvlink")]
    NvLink,
}

impl Medium {
    pub const ALL: [Medium; 3] = [Medium::Pcie, Medium::Ethernet, Medium::NvLink];

    pub fn label(self) -> &'static str {
        match self {
            Medium::Pcie => "pcie",
            Medium::Ethernet => "ethernet",
            Medium::NvLink => "nvlink",
        }
    }
}

impl fmt::Display for Medium {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

/// Default GPU memory capacity, a 16 GB Tesla V100.
pub const DEFAULT_GPU_MEM_CAPACITY: f64 = 16e9;

/// Peak capacities of one training server. Rates in bytes/second or
/// FLOPs/second, capacity in bytes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HardwareProfile {
    pub gpu_peak_flops: f64,
    pub gpu_mem_bandwidth: f64,
    pub pcie_bandwidth: f64,
    pub ethernet_bandwidth: f64,
    pub nvlink_bandwidth: f64,
    pub gpu_mem_capacity: f64,
}

#[derive(Debug, Clone, PartialEq, Error)]
#[error("hardware field '{field}' must be positive and finite, got {value}")]
pub struct InvalidHardware {
    pub field: &'static str,
    pub value: f64,
}

impl HardwareProfile {
    /// Production cluster servers: 11 TFLOPs, 1 TB/s memory, 25 Gbps Ethernet,
    /// 10 GB/s PCIe, 50 GB/s NVLink.
    pub fn pai_baseline() -> Self {
        HardwareProfile {
            gpu_peak_flops: 11e12,
            gpu_mem_bandwidth: 1e12,
            pcie_bandwidth: 10e9,
            ethernet_bandwidth: 25e9 / 8.0,
            nvlink_bandwidth: 50e9,
            gpu_mem_capacity: DEFAULT_GPU_MEM_CAPACITY,
        }
    }

    /// Case-study testbed: same links as the baseline, V100 at 15 TFLOPs.
    pub fn case_study_testbed() -> Self {
        HardwareProfile {
            gpu_peak_flops: 15e12,
            ..Self::pai_baseline()
        }
    }

    pub fn validate(&self) -> Result<(), InvalidHardware> {
        let fields = [
            ("gpu_peak_flops", self.gpu_peak_flops),
            ("gpu_mem_bandwidth", self.gpu_mem_bandwidth),
            ("pcie_bandwidth", self.pcie_bandwidth),
            ("ethernet_bandwidth", self.ethernet_bandwidth),
            ("nvlink_bandwidth", self.nvlink_bandwidth),
            ("gpu_mem_capacity", self.gpu_mem_capacity),
        ];
        for (field, value) in fields {
            if !(value.is_finite() && value > 0.0) {
                return Err(InvalidHardware { field, value });
            }
        }
        Ok(())
    }

    pub fn bandwidth(&self, medium: Medium) -> f64 {
        match medium {
            Medium::Pcie => self.pcie_bandwidth,
            Medium::Ethernet => self.ethernet_bandwidth,
            Medium::NvLink => self.nvlink_bandwidth,
        }
    }
}

/// Attainable fraction of each peak capacity.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EfficiencyModel {
    pub compute_eff: f64,
    pub mem_eff: f64,
    pub pcie_eff: f64,
    pub ethernet_eff: f64,
    pub nvlink_eff: f64,
}

pub const DEFAULT_EFFICIENCY: f64 = 0.7;

impl Default for EfficiencyModel {
    fn default() -> Self {
        Self::uniform(DEFAULT_EFFICIENCY)
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
#[error("efficiency '{field}' must lie in (0, 1], got {value}")]
pub struct InvalidEfficiency {
    pub field: &'static str,
    pub value: f64,
}

impl EfficiencyModel {
    pub fn uniform(eff: f64) -> Self {
        Self::split(eff, eff)
    }

    /// GPU compute and memory at `compute`, every link at `comm`.
    pub fn split(compute: f64, comm: f64) -> Self {
        EfficiencyModel {
            compute_eff: compute,
            mem_eff: compute,
            pcie_eff: comm,
            ethernet_eff: comm,
            nvlink_eff: comm,
        }
    }

    /// Efficiencies measured on the case-study testbed, keyed by corpus job id.
    /// One network figure applies to both Ethernet and NVLink.
    pub fn measured(job_id: &str) -> Option<Self> {
        let (gpu, gddr, pcie, net) = match job_id {
            "multi_interests" => (0.3271, 0.95, 0.8647, 0.6921),
            "resnet50" => (0.8255, 0.789, 0.351, 0.494),
            "nmt" => (0.828, 0.791, 0.001, 0.352),
            "bert" => (0.816, 0.95, 0.0042, 0.471),
            "speech" | "audio" => (0.6086, 0.031, 0.7773, 0.405),
            "gcn" => (0.882, 0.699, 0.862, 0.2735),
            _ => return None,
        };
        Some(EfficiencyModel {
            compute_eff: gpu,
            mem_eff: gddr,
            pcie_eff: pcie,
            ethernet_eff: net,
            nvlink_eff: net,
        })
    }

    pub fn validate(&self) -> Result<(), InvalidEfficiency> {
        let fields = [
            ("compute_eff", self.compute_eff),
            ("mem_eff", self.mem_eff),
            ("pcie_eff", self.pcie_eff),
            ("ethernet_eff", self.ethernet_eff),
            ("nvlink_eff", self.nvlink_eff),
        ];
        for (field, value) in fields {
            if !(value > 0.0 && value <= 1.0) {
                return Err(InvalidEfficiency { field, value });
            }
        }
        Ok(())
    }

    pub fn for_medium(&self, medium: Medium) -> f64 {
        match medium {
            Medium::Pcie => self.pcie_eff,
            Medium::Ethernet => self.ethernet_eff,
            Medium::NvLink => self.nvlink_eff,
        }
    }
}

/// One job's per-cNode, per-step resource demands plus metadata.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WorkloadRecord {
    pub job_id: String,
    pub arch: ArchitectureKind,
    pub num_cnodes: u32,
    /// Samples per cNode per step.
    pub batch_size: u32,
    pub flops: f64,
    pub mem_access_bytes: f64,
    pub input_bytes: f64,
    pub weight_traffic_bytes: f64,
    pub dense_weight_bytes: f64,
    pub embedding_weight_bytes: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub measured_step_seconds: Option<f64>,
    /// Network volume that was recorded but has no modeled weight path.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub unmodeled_network_bytes: Option<f64>,
}

impl WorkloadRecord {
    pub fn model_bytes(&self) -> f64 {
        self.dense_weight_bytes + self.embedding_weight_bytes
    }

    /// A copy running under `arch` with `num_cnodes` replicas; demands unchanged.
    pub fn with_arch(&self, arch: ArchitectureKind, num_cnodes: u32) -> Self {
        WorkloadRecord {
            arch,
            num_cnodes,
            ..self.clone()
        }
    }
}

/// One broken record invariant.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum RecordViolation {
    #[error("empty job_id")]
    EmptyJobId,
    #[error("num_cnodes must be positive")]
    ZeroCnodes,
    #[error("batch_size must be positive")]
    ZeroBatch,
    #[error("cnodes must be 1 for 1w1g (got {0})")]
    OneGpuCnodes(u32),
    #[error("weight traffic must be 0 for 1w1g (got {0})")]
    OneGpuWeightTraffic(f64),
    #[error("negative {0}")]
    Negative(&'static str),
    #[error("non-finite {0}")]
    NonFinite(&'static str),
    #[error("measured_step_seconds must be positive (got {0})")]
    NonPositiveMeasured(f64),
}

/// Returns the record if every invariant holds, otherwise all violations.
pub fn validate_record(rec: WorkloadRecord) -> Result<WorkloadRecord, Vec<RecordViolation>> {
    let mut errors = Vec::new();
    if rec.job_id.is_empty() {
        errors.push(RecordViolation::EmptyJobId);
    }
    if rec.num_cnodes == 0 {
        errors.push(RecordViolation::ZeroCnodes);
    }
    if rec.batch_size == 0 {
        errors.push(RecordViolation::ZeroBatch);
    }
    let quantities = [
        ("flops", rec.flops),
        ("mem_access_bytes", rec.mem_access_bytes),
        ("input_bytes", rec.input_bytes),
        ("weight_traffic_bytes", rec.weight_traffic_bytes),
        ("dense_weight_bytes", rec.dense_weight_bytes),
        ("embedding_weight_bytes", rec.embedding_weight_bytes),
    ];
    for (name, value) in quantities {
        if value.is_nan() || value.is_infinite() {
            errors.push(RecordViolation::NonFinite(name));
        } else if value < 0.0 {
            errors.push(RecordViolation::Negative(name));
        }
    }
    if let Some(extra) = rec.unmodeled_network_bytes {
        if !extra.is_finite() {
            errors.push(RecordViolation::NonFinite("unmodeled_network_bytes"));
        } else if extra < 0.0 {
            errors.push(RecordViolation::Negative("unmodeled_network_bytes"));
        }
    }
    if let Some(t) = rec.measured_step_seconds {
        if !(t.is_finite() && t > 0.0) {
            errors.push(RecordViolation::NonPositiveMeasured(t));
        }
    }
    if rec.arch == ArchitectureKind::OneWorkerOneGpu {
        if rec.num_cnodes != 1 {
            errors.push(RecordViolation::OneGpuCnodes(rec.num_cnodes));
        }
        if rec.weight_traffic_bytes != 0.0 {
            errors.push(RecordViolation::OneGpuWeightTraffic(rec.weight_traffic_bytes));
        }
    }
    if errors.is_empty() {
        Ok(rec)
    } else {
        Err(errors)
    }
}

/// How the three step components combine into the step time.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OverlapMode {
    /// `t_total = t_data + t_compute + t_weight`.
    #[default]
    NoOverlap,
    /// `t_total = max(t_data, t_compute, t_weight)`.
    IdealOverlap,
}

impl OverlapMode {
    pub fn label(self) -> &'static str {
        match self {
            OverlapMode::NoOverlap => "none",
            OverlapMode::IdealOverlap => "ideal",
        }
    }
}

impl fmt::Display for OverlapMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for OverlapMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "none" | "no_overlap" => Ok(OverlapMode::NoOverlap),
            "ideal" | "ideal_overlap" => Ok(OverlapMode::IdealOverlap),
            other => Err(format!("unknown overlap mode '{other}'")),
        }
    }
}

/// Fraction of the step attributed to each component.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Shares {
    pub data: f64,
    pub compute_bound: f64,
    pub memory_bound: f64,
    pub weight: f64,
}

impl Shares {
    pub fn compute(&self) -> f64 {
        self.compute_bound + self.memory_bound
    }

    pub fn sum(&self) -> f64 {
        self.data + self.compute_bound + self.memory_bound + self.weight
    }

    pub fn get(&self, component: ShareComponent) -> f64 {
        match component {
            ShareComponent::Data => self.data,
            ShareComponent::ComputeBound => self.compute_bound,
            ShareComponent::MemoryBound => self.memory_bound,
            ShareComponent::Compute => self.compute(),
            ShareComponent::Weight => self.weight,
        }
    }
}

/// A step component whose share can be aggregated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ShareComponent {
    Data,
    ComputeBound,
    MemoryBound,
    Compute,
    Weight,
}

impl ShareComponent {
    pub const ALL: [ShareComponent; 5] = [
        ShareComponent::Data,
        ShareComponent::ComputeBound,
        ShareComponent::MemoryBound,
        ShareComponent::Compute,
        ShareComponent::Weight,
    ];

    pub fn label(self) -> &'static str {
        match self {
            ShareComponent::Data => "data",
            ShareComponent::ComputeBound => "compute_bound",
            ShareComponent::MemoryBound => "memory_bound",
            ShareComponent::Compute => "compute",
            ShareComponent::Weight => "weight",
        }
    }
}

impl FromStr for ShareComponent {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        ShareComponent::ALL
            .into_iter()
            .find(|c| c.label() == s)
            .ok_or_else(|| format!("unknown component '{s}'"))
    }
}

/// Per-step time of one cNode, in seconds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimeBreakdown {
    pub overlap: OverlapMode,
    pub t_data: f64,
    pub t_compute_bound: f64,
    pub t_memory_bound: f64,
    pub t_compute: f64,
    pub t_weight_per_medium: BTreeMap<Medium, f64>,
    pub t_weight: f64,
    pub t_total: f64,
    pub shares: Shares,
    /// False when every component is zero; `shares` are then all zero.
    pub shares_defined: bool,
}

impl TimeBreakdown {
    /// Sum of the three components regardless of overlap mode.
    pub fn component_sum(&self) -> f64 {
        self.t_data + self.t_compute + self.t_weight
    }
}
