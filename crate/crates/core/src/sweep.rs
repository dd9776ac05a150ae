//! Hardware what-if sweeps and sensitivity to the modeling assumptions.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::aggregate::{weighted_mean_shares, AggregateError, JobPopulation, WeightedShares};
use crate::cost::breakdown;
use crate::model::{ArchitectureKind, EfficiencyModel, HardwareProfile, Medium, OverlapMode, TimeBreakdown};
use crate::projection::{project, summarize, weight_path_ratio, ProjectionSummary};

/// Cartesian sweeps above this many cells are flagged as large.
pub const LARGE_SWEEP_CELLS: usize = 100_000;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SweepError {
    #[error("population is empty")]
    EmptyPopulation,
    #[error("no sweep axes given")]
    NoAxes,
    #[error("axis {0} has no candidates")]
    NoCandidates(Resource),
    #[error("axis {resource} has a non-positive value {value}")]
    NonPositive { resource: Resource, value: f64 },
    #[error("axis {0} appears more than once")]
    DuplicateAxis(Resource),
    #[error("efficiency grid value {0} outside (0, 1]")]
    EfficiencyOutOfRange(f64),
    #[error("efficiency grid is empty")]
    EmptyGrid,
}

impl From<AggregateError> for SweepError {
    fn from(err: AggregateError) -> Self {
        match err {
            AggregateError::EmptyPopulation => SweepError::EmptyPopulation,
        }
    }
}

/// A hardware capacity that can be varied.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Resource {
    Ethernet,
    Pcie,
    GpuFlops,
    GpuMemBandwidth,
}

impl Resource {
    pub const ALL: [Resource; 4] = [
        Resource::Ethernet,
        Resource::Pcie,
        Resource::GpuFlops,
        Resource::GpuMemBandwidth,
    ];

    pub fn label(self) -> &'static str {
        match self {
            Resource::Ethernet => "ethernet",
            Resource::Pcie => "pcie",
            Resource::GpuFlops => "gpu_flops",
            Resource::GpuMemBandwidth => "gpu_mem_bandwidth",
        }
    }

    pub fn get(self, hw: &HardwareProfile) -> f64 {
        match self {
            Resource::Ethernet => hw.ethernet_bandwidth,
            Resource::Pcie => hw.pcie_bandwidth,
            Resource::GpuFlops => hw.gpu_peak_flops,
            Resource::GpuMemBandwidth => hw.gpu_mem_bandwidth,
        }
    }

    pub fn set(self, hw: &HardwareProfile, value: f64) -> HardwareProfile {
        let mut out = *hw;
        match self {
            Resource::Ethernet => out.ethernet_bandwidth = value,
            Resource::Pcie => out.pcie_bandwidth = value,
            Resource::GpuFlops => out.gpu_peak_flops = value,
            Resource::GpuMemBandwidth => out.gpu_mem_bandwidth = value,
        }
        out
    }

    /// Step time of the components that do not depend on this resource.
    pub fn residual_time(self, b: &TimeBreakdown) -> f64 {
        let weight_on = |m: Medium| b.t_weight_per_medium.get(&m).copied().unwrap_or(0.0);
        let dependent = match self {
            Resource::Ethernet => weight_on(Medium::Ethernet),
            Resource::Pcie => b.t_data + weight_on(Medium::Pcie),
            Resource::GpuFlops => b.t_compute_bound,
            Resource::GpuMemBandwidth => b.t_memory_bound,
        };
        b.component_sum() - dependent
    }
}

impl fmt::Display for Resource {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for Resource {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "ethernet" => Ok(Resource::Ethernet),
            "pcie" | "pci" => Ok(Resource::Pcie),
            "gpu_flops" | "gpu" => Ok(Resource::GpuFlops),
            "gpu_mem_bandwidth" | "gpu_mem" | "memory" => Ok(Resource::GpuMemBandwidth),
            other => Err(format!("unknown sweep resource '{other}'")),
        }
    }
}

/// Candidate values for one resource, in canonical units. Normalized values
/// are reported relative to `baseline`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepAxis {
    pub resource: Resource,
    pub candidates: Vec<f64>,
    pub baseline: f64,
}

impl SweepAxis {
    pub fn new(resource: Resource, candidates: Vec<f64>, baseline: f64) -> Result<Self, SweepError> {
        let axis = SweepAxis {
            resource,
            candidates,
            baseline,
        };
        axis.validate()?;
        Ok(axis)
    }

    pub fn validate(&self) -> Result<(), SweepError> {
        if self.candidates.is_empty() {
            return Err(SweepError::NoCandidates(self.resource));
        }
        for &value in self.candidates.iter().chain(std::iter::once(&self.baseline)) {
            if !(value.is_finite() && value > 0.0) {
                return Err(SweepError::NonPositive {
                    resource: self.resource,
                    value,
                });
            }
        }
        Ok(())
    }

    /// The standard variation set for `resource`, normalized to the value in
    /// `base`: Ethernet 10/25/100 Gbps, PCIe 10/50 GB/s, GPU 8/16/32/64
    /// TFLOPs, GPU memory 1/2/4 TB/s.
    pub fn standard(resource: Resource, base: &HardwareProfile) -> Self {
        let candidates = match resource {
            Resource::Ethernet => vec![10e9 / 8.0, 25e9 / 8.0, 100e9 / 8.0],
            Resource::Pcie => vec![10e9, 50e9],
            Resource::GpuFlops => vec![8e12, 16e12, 32e12, 64e12],
            Resource::GpuMemBandwidth => vec![1e12, 2e12, 4e12],
        };
        SweepAxis {
            resource,
            candidates,
            baseline: resource.get(base),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepCell {
    pub job_id: String,
    pub arch: ArchitectureKind,
    pub resource: Resource,
    pub candidate: f64,
    /// `candidate / axis.baseline`.
    pub normalized: f64,
    pub base_t_total: f64,
    pub t_total: f64,
    /// `base_t_total / t_total`.
    pub speedup: f64,
}

fn speedup(base: f64, modified: f64) -> f64 {
    if base == modified {
        1.0
    } else {
        base / modified
    }
}

fn check_axes(axes: &[SweepAxis]) -> Result<(), SweepError> {
    if axes.is_empty() {
        return Err(SweepError::NoAxes);
    }
    for (i, axis) in axes.iter().enumerate() {
        axis.validate()?;
        if axes[..i].iter().any(|a| a.resource == axis.resource) {
            return Err(SweepError::DuplicateAxis(axis.resource));
        }
    }
    Ok(())
}

/// Varies one resource at a time, all others held at `base_hw`. Cells are
/// ordered job, then axis, then candidate.
pub fn hardware_sweep(
    pop: &JobPopulation,
    axes: &[SweepAxis],
    base_hw: &HardwareProfile,
    eff: &EfficiencyModel,
    overlap: OverlapMode,
) -> Result<Vec<SweepCell>, SweepError> {
    if pop.is_empty() {
        return Err(SweepError::EmptyPopulation);
    }
    check_axes(axes)?;
    let mut cells = Vec::new();
    for rec in pop {
        let base_t_total = breakdown(rec, base_hw, eff, overlap).t_total;
        for axis in axes {
            for &candidate in &axis.candidates {
                let hw = axis.resource.set(base_hw, candidate);
                let t_total = breakdown(rec, &hw, eff, overlap).t_total;
                cells.push(SweepCell {
                    job_id: rec.job_id.clone(),
                    arch: rec.arch,
                    resource: axis.resource,
                    candidate,
                    normalized: candidate / axis.baseline,
                    base_t_total,
                    t_total,
                    speedup: speedup(base_t_total, t_total),
                });
            }
        }
    }
    Ok(cells)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CartesianCell {
    pub job_id: String,
    pub arch: ArchitectureKind,
    /// One value per axis, in axis order.
    pub assignment: Vec<(Resource, f64)>,
    pub t_total: f64,
    pub speedup: f64,
}

/// Number of cells [`cartesian_sweep`] would produce.
pub fn cartesian_size(jobs: usize, axes: &[SweepAxis]) -> usize {
    axes.iter()
        .map(|a| a.candidates.len())
        .fold(jobs, usize::saturating_mul)
}

/// Every combination of candidates across all axes.
pub fn cartesian_sweep(
    pop: &JobPopulation,
    axes: &[SweepAxis],
    base_hw: &HardwareProfile,
    eff: &EfficiencyModel,
    overlap: OverlapMode,
) -> Result<Vec<CartesianCell>, SweepError> {
    if pop.is_empty() {
        return Err(SweepError::EmptyPopulation);
    }
    check_axes(axes)?;

    let combos: usize = axes.iter().map(|a| a.candidates.len()).product();
    let mut cells = Vec::with_capacity(cartesian_size(pop.len(), axes).min(LARGE_SWEEP_CELLS));
    for rec in pop {
        let base_t_total = breakdown(rec, base_hw, eff, overlap).t_total;
        for mut index in 0..combos {
            // mixed-radix counter, last axis fastest
            let mut assignment = vec![(Resource::Ethernet, 0.0); axes.len()];
            for (slot, axis) in assignment.iter_mut().zip(axes).rev() {
                let n = axis.candidates.len();
                *slot = (axis.resource, axis.candidates[index % n]);
                index /= n;
            }
            let hw = assignment
                .iter()
                .fold(*base_hw, |hw, &(resource, value)| resource.set(&hw, value));
            let t_total = breakdown(rec, &hw, eff, overlap).t_total;
            cells.push(CartesianCell {
                job_id: rec.job_id.clone(),
                arch: rec.arch,
                assignment,
                t_total,
                speedup: speedup(base_t_total, t_total),
            });
        }
    }
    Ok(cells)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SensitivityCell {
    pub compute_eff: f64,
    pub comm_eff: f64,
    pub weight_share: WeightedShares,
}

fn check_grid(grid: &[f64]) -> Result<(), SweepError> {
    if grid.is_empty() {
        return Err(SweepError::EmptyGrid);
    }
    match grid.iter().find(|&&v| !(v > 0.0 && v <= 1.0)) {
        Some(&bad) => Err(SweepError::EfficiencyOutOfRange(bad)),
        None => Ok(()),
    }
}

/// Population-average shares on a grid of (compute, communication)
/// efficiencies. Compute efficiency drives GPU FLOPs and memory; communication
/// efficiency drives PCIe, Ethernet and NVLink. Cells are ordered compute
/// efficiency first.
pub fn efficiency_sensitivity(
    pop: &JobPopulation,
    hw: &HardwareProfile,
    compute_eff_grid: &[f64],
    comm_eff_grid: &[f64],
    overlap: OverlapMode,
) -> Result<Vec<SensitivityCell>, SweepError> {
    if pop.is_empty() {
        return Err(SweepError::EmptyPopulation);
    }
    check_grid(compute_eff_grid)?;
    check_grid(comm_eff_grid)?;
    let mut cells = Vec::new();
    for &compute in compute_eff_grid {
        for &comm in comm_eff_grid {
            let eff = EfficiencyModel::split(compute, comm);
            let shares: Vec<_> = pop
                .iter()
                .map(|r| (r.num_cnodes, breakdown(r, hw, &eff, overlap).shares))
                .collect();
            cells.push(SensitivityCell {
                compute_eff: compute,
                comm_eff: comm,
                weight_share: weighted_mean_shares(&shares)?,
            });
        }
    }
    Ok(cells)
}

/// Relative tolerance for "speedup equals the weight-path ratio".
pub const WEIGHT_PATH_RATIO_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OverlapSummary {
    pub overlap: OverlapMode,
    /// Per-job weight shares before projection, ascending.
    pub weight_shares: Vec<f64>,
    pub mean_weight_share: WeightedShares,
    pub projection: ProjectionSummary,
    /// Speedup of the weight path alone, when both architectures have one.
    pub weight_path_ratio: Option<f64>,
    /// Jobs whose step speedup equals the weight-path ratio, i.e. jobs bound
    /// by weight traffic both before and after projection.
    pub fraction_at_weight_path_ratio: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OverlapComparison {
    pub target: ArchitectureKind,
    pub no_overlap: OverlapSummary,
    pub ideal_overlap: OverlapSummary,
}

fn overlap_summary(
    pop: &JobPopulation,
    hw: &HardwareProfile,
    eff: &EfficiencyModel,
    target: ArchitectureKind,
    overlap: OverlapMode,
) -> Result<OverlapSummary, SweepError> {
    let results: Vec<_> = pop.iter().map(|r| project(r, target, hw, eff, overlap)).collect();
    let per_job: Vec<_> = pop
        .iter()
        .zip(&results)
        .map(|(r, p)| (r.num_cnodes, p.source.shares))
        .collect();
    let mut weight_shares: Vec<f64> = per_job.iter().map(|(_, s)| s.weight).collect();
    weight_shares.sort_by(f64::total_cmp);

    let at_ratio = pop
        .iter()
        .zip(&results)
        .filter(|(rec, p)| {
            let Some(step) = p.step_speedup else {
                return false;
            };
            match weight_path_ratio(rec.arch, target, hw, eff) {
                Some(ratio) if rec.weight_traffic_bytes > 0.0 => {
                    (step - ratio).abs() <= WEIGHT_PATH_RATIO_TOLERANCE * ratio
                }
                _ => false,
            }
        })
        .count();

    // the reported ratio assumes a uniform source architecture
    let sources: Vec<ArchitectureKind> = pop.iter().map(|r| r.arch).collect();
    let ratio = match sources.split_first() {
        Some((first, rest)) if rest.iter().all(|a| a == first) => {
            weight_path_ratio(*first, target, hw, eff)
        }
        _ => None,
    };

    Ok(OverlapSummary {
        overlap,
        weight_shares,
        mean_weight_share: weighted_mean_shares(&per_job)?,
        projection: summarize(&results),
        weight_path_ratio: ratio,
        fraction_at_weight_path_ratio: at_ratio as f64 / pop.len() as f64,
    })
}

/// The same projection analysis under no overlap and ideal overlap.
pub fn overlap_comparison(
    pop: &JobPopulation,
    hw: &HardwareProfile,
    eff: &EfficiencyModel,
    target: ArchitectureKind,
) -> Result<OverlapComparison, SweepError> {
    if pop.is_empty() {
        return Err(SweepError::EmptyPopulation);
    }
    Ok(OverlapComparison {
        target,
        no_overlap: overlap_summary(pop, hw, eff, target, OverlapMode::NoOverlap)?,
        ideal_overlap: overlap_summary(pop, hw, eff, target, OverlapMode::IdealOverlap)?,
    })
}
