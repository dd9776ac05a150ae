//! Analytical per-step time model.
//!
//! Each component is a demand divided by an attainable rate (peak times
//! efficiency):
//!
//! * input I/O: `input_bytes / (pcie * eff / contention)`, where `contention`
//!   is the number of cNodes sharing a server's PCIe for input loading;
//! * compute: `flops / (peak_flops * eff) + mem_access / (mem_bw * eff)`;
//! * weight traffic: the weight volume crosses every medium on the
//!   architecture's path in turn, so per-medium times add up.

use std::collections::BTreeMap;

use thiserror::Error;

use crate::model::{
    ArchitectureKind, EfficiencyModel, HardwareProfile, Medium, OverlapMode, Shares,
    TimeBreakdown, WorkloadRecord,
};

/// GPUs in one server, and so the most cNodes sharing one PCIe root.
pub const GPUS_PER_SERVER: u32 = 8;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum CostError {
    #[error("step time must be positive, got {0}")]
    NonPositiveStepTime(f64),
    #[error("measured time must be positive, got {0}")]
    NonPositiveMeasured(f64),
}

/// Media the weights traverse each step, in order.
pub fn weight_medium_path(arch: ArchitectureKind) -> &'static [Medium] {
    match arch {
        ArchitectureKind::OneWorkerOneGpu => &[],
        ArchitectureKind::OneWorkerNGpu => &[Medium::Pcie],
        ArchitectureKind::PsWorker => &[Medium::Ethernet, Medium::Pcie],
        ArchitectureKind::AllReduceLocal => &[Medium::NvLink],
        ArchitectureKind::AllReduceCluster => &[Medium::Ethernet, Medium::NvLink],
        ArchitectureKind::Pearl => &[Medium::NvLink],
    }
}

/// Number of cNodes loading input over the same PCIe link at once.
pub fn pcie_contention(rec: &WorkloadRecord) -> u32 {
    match rec.arch {
        ArchitectureKind::OneWorkerNGpu | ArchitectureKind::AllReduceLocal => {
            rec.num_cnodes.clamp(1, GPUS_PER_SERVER)
        }
        _ => 1,
    }
}

pub fn data_io_time(rec: &WorkloadRecord, hw: &HardwareProfile, eff: &EfficiencyModel) -> f64 {
    let rate = hw.pcie_bandwidth * eff.pcie_eff / f64::from(pcie_contention(rec));
    rec.input_bytes / rate
}

/// Returns `(t_compute_bound, t_memory_bound)`.
pub fn compute_time(rec: &WorkloadRecord, hw: &HardwareProfile, eff: &EfficiencyModel) -> (f64, f64) {
    let compute_bound = rec.flops / (hw.gpu_peak_flops * eff.compute_eff);
    let memory_bound = rec.mem_access_bytes / (hw.gpu_mem_bandwidth * eff.mem_eff);
    (compute_bound, memory_bound)
}

/// Weight traffic time per medium and in total. `arch_override` replaces the
/// record's architecture when choosing the path.
pub fn weight_time(
    rec: &WorkloadRecord,
    hw: &HardwareProfile,
    eff: &EfficiencyModel,
    arch_override: Option<ArchitectureKind>,
) -> (BTreeMap<Medium, f64>, f64) {
    let arch = arch_override.unwrap_or(rec.arch);
    let mut per_medium = BTreeMap::new();
    let mut total = 0.0;
    for &medium in weight_medium_path(arch) {
        let t = rec.weight_traffic_bytes / (hw.bandwidth(medium) * eff.for_medium(medium));
        per_medium.insert(medium, t);
        total += t;
    }
    (per_medium, total)
}

pub fn breakdown(
    rec: &WorkloadRecord,
    hw: &HardwareProfile,
    eff: &EfficiencyModel,
    overlap: OverlapMode,
) -> TimeBreakdown {
    let t_data = data_io_time(rec, hw, eff);
    let (t_compute_bound, t_memory_bound) = compute_time(rec, hw, eff);
    let t_compute = t_compute_bound + t_memory_bound;
    let (t_weight_per_medium, t_weight) = weight_time(rec, hw, eff, None);

    let sum = t_data + t_compute + t_weight;
    let t_total = match overlap {
        OverlapMode::NoOverlap => sum,
        OverlapMode::IdealOverlap => t_data.max(t_compute).max(t_weight),
    };
    // Shares always partition the component sum, so they stay a partition of
    // unity under ideal overlap too.
    let shares_defined = sum > 0.0;
    let shares = if shares_defined {
        Shares {
            data: t_data / sum,
            compute_bound: t_compute_bound / sum,
            memory_bound: t_memory_bound / sum,
            weight: t_weight / sum,
        }
    } else {
        Shares::default()
    };

    TimeBreakdown {
        overlap,
        t_data,
        t_compute_bound,
        t_memory_bound,
        t_compute,
        t_weight_per_medium,
        t_weight,
        t_total,
        shares,
        shares_defined,
    }
}

/// Samples per second across all cNodes.
pub fn throughput(rec: &WorkloadRecord, t_total: f64) -> Result<f64, CostError> {
    if t_total.is_nan() || t_total <= 0.0 {
        return Err(CostError::NonPositiveStepTime(t_total));
    }
    Ok(f64::from(rec.num_cnodes) / t_total * f64::from(rec.batch_size))
}

/// Signed relative error of a prediction against a measurement.
pub fn validation_gap(predicted: f64, measured: f64) -> Result<f64, CostError> {
    if measured.is_nan() || measured <= 0.0 {
        return Err(CostError::NonPositiveMeasured(measured));
    }
    Ok((predicted - measured) / measured)
}
