//! What-if projection of a job onto a different training architecture.
//!
//! The projected job keeps its per-cNode demands and batch size; only the
//! architecture and the cNode count change. Single-server targets are capped
//! at one server's worth of GPUs, cluster-wide targets keep the original
//! cNode count.

use serde::{Deserialize, Serialize};

use crate::aggregate::{AggregateError, JobPopulation};
use crate::cost::{breakdown, throughput, weight_time, GPUS_PER_SERVER};
use crate::model::{
    ArchitectureKind, EfficiencyModel, HardwareProfile, OverlapMode, TimeBreakdown, WorkloadRecord,
};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "status", content = "reason", rename_all = "snake_case")]
pub enum Feasibility {
    Feasible,
    Infeasible(String),
}

impl Feasibility {
    pub fn is_feasible(&self) -> bool {
        matches!(self, Feasibility::Feasible)
    }

    pub fn reason(&self) -> Option<&str> {
        match self {
            Feasibility::Feasible => None,
            Feasibility::Infeasible(reason) => Some(reason),
        }
    }
}

/// AllReduce only supports full weight replicas, so the whole model has to fit
/// in one GPU's memory.
pub fn check_allreduce_eligibility(rec: &WorkloadRecord, hw: &HardwareProfile) -> Feasibility {
    let model = rec.model_bytes();
    if model <= hw.gpu_mem_capacity {
        Feasibility::Feasible
    } else {
        Feasibility::Infeasible(format!(
            "model of {model} bytes exceeds GPU memory of {} bytes",
            hw.gpu_mem_capacity
        ))
    }
}

fn target_feasibility(
    rec: &WorkloadRecord,
    target: ArchitectureKind,
    hw: &HardwareProfile,
) -> Feasibility {
    if target == rec.arch {
        return Feasibility::Feasible;
    }
    match target {
        ArchitectureKind::PsWorker => Feasibility::Feasible,
        ArchitectureKind::Pearl => {
            if rec.embedding_weight_bytes > 0.0 {
                Feasibility::Feasible
            } else {
                Feasibility::Infeasible("no sparse embedding".to_string())
            }
        }
        // every remaining target keeps a full replica on each GPU
        ArchitectureKind::OneWorkerOneGpu
        | ArchitectureKind::OneWorkerNGpu
        | ArchitectureKind::AllReduceLocal
        | ArchitectureKind::AllReduceCluster => check_allreduce_eligibility(rec, hw),
    }
}

/// cNode count a job gets when moved to `target`.
pub fn target_cnodes(source_cnodes: u32, target: ArchitectureKind) -> u32 {
    match target {
        ArchitectureKind::OneWorkerOneGpu => 1,
        ArchitectureKind::OneWorkerNGpu | ArchitectureKind::AllReduceLocal => {
            source_cnodes.min(GPUS_PER_SERVER)
        }
        ArchitectureKind::PsWorker | ArchitectureKind::AllReduceCluster | ArchitectureKind::Pearl => {
            source_cnodes
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProjectionResult {
    pub job_id: String,
    pub source_arch: ArchitectureKind,
    pub target_arch: ArchitectureKind,
    pub source_cnodes: u32,
    pub target_cnodes: u32,
    pub source: TimeBreakdown,
    /// Absent when the target is infeasible.
    pub target: Option<TimeBreakdown>,
    /// `source.t_total / target.t_total`.
    pub step_speedup: Option<f64>,
    /// Ratio of whole-job throughputs, target over source.
    pub throughput_speedup: Option<f64>,
    pub feasibility: Feasibility,
}

impl ProjectionResult {
    pub fn is_feasible(&self) -> bool {
        self.feasibility.is_feasible()
    }
}

fn step_ratio(source: f64, target: f64) -> f64 {
    if source == target {
        // also covers two idle steps
        1.0
    } else {
        source / target
    }
}

pub fn project(
    rec: &WorkloadRecord,
    target: ArchitectureKind,
    hw: &HardwareProfile,
    eff: &EfficiencyModel,
    overlap: OverlapMode,
) -> ProjectionResult {
    let source = breakdown(rec, hw, eff, overlap);
    let cnodes = if target == rec.arch {
        rec.num_cnodes
    } else {
        target_cnodes(rec.num_cnodes, target)
    };
    let feasibility = target_feasibility(rec, target, hw);

    let mut result = ProjectionResult {
        job_id: rec.job_id.clone(),
        source_arch: rec.arch,
        target_arch: target,
        source_cnodes: rec.num_cnodes,
        target_cnodes: cnodes,
        source,
        target: None,
        step_speedup: None,
        throughput_speedup: None,
        feasibility,
    };
    if !result.is_feasible() {
        return result;
    }

    let projected = rec.with_arch(target, cnodes);
    let target_breakdown = breakdown(&projected, hw, eff, overlap);
    let step = step_ratio(result.source.t_total, target_breakdown.t_total);
    let throughput_speedup = if cnodes == rec.num_cnodes {
        step
    } else {
        match (
            throughput(rec, result.source.t_total),
            throughput(&projected, target_breakdown.t_total),
        ) {
            (Ok(before), Ok(after)) => after / before,
            _ => step * f64::from(cnodes) / f64::from(rec.num_cnodes),
        }
    };
    result.target = Some(target_breakdown);
    result.step_speedup = Some(step);
    result.throughput_speedup = Some(throughput_speedup);
    result
}

/// Speedup of the weight path alone, independent of the weight volume.
pub fn weight_path_ratio(
    source: ArchitectureKind,
    target: ArchitectureKind,
    hw: &HardwareProfile,
    eff: &EfficiencyModel,
) -> Option<f64> {
    let unit = WorkloadRecord {
        job_id: String::new(),
        arch: source,
        num_cnodes: 1,
        batch_size: 1,
        flops: 0.0,
        mem_access_bytes: 0.0,
        input_bytes: 0.0,
        weight_traffic_bytes: 1.0,
        dense_weight_bytes: 0.0,
        embedding_weight_bytes: 0.0,
        measured_step_seconds: None,
        unmodeled_network_bytes: None,
    };
    let (_, before) = weight_time(&unit, hw, eff, Some(source));
    let (_, after) = weight_time(&unit, hw, eff, Some(target));
    if before > 0.0 && after > 0.0 {
        Some(before / after)
    } else {
        None
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProjectionSummary {
    pub jobs: usize,
    /// Fractions are over all jobs, infeasible ones included.
    pub fraction_throughput_sped_up: f64,
    pub fraction_step_sped_up: f64,
    pub fraction_infeasible: f64,
    /// Step speedups of feasible jobs, ascending.
    pub step_speedups: Vec<f64>,
    /// Throughput speedups of feasible jobs, ascending.
    pub throughput_speedups: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PopulationProjection {
    pub results: Vec<ProjectionResult>,
    pub summary: ProjectionSummary,
}

/// Speedups within this relative distance of 1 count as unchanged.
pub const SPEEDUP_TOLERANCE: f64 = 1e-9;

fn sped_up(s: f64) -> bool {
    s > 1.0 + SPEEDUP_TOLERANCE
}

pub fn summarize(results: &[ProjectionResult]) -> ProjectionSummary {
    let n = results.len();
    let frac = |count: usize| if n == 0 { 0.0 } else { count as f64 / n as f64 };
    let mut step_speedups: Vec<f64> = results.iter().filter_map(|r| r.step_speedup).collect();
    let mut throughput_speedups: Vec<f64> =
        results.iter().filter_map(|r| r.throughput_speedup).collect();
    let step_up = step_speedups.iter().filter(|&&s| sped_up(s)).count();
    let thr_up = throughput_speedups.iter().filter(|&&s| sped_up(s)).count();
    let infeasible = results.iter().filter(|r| !r.is_feasible()).count();
    step_speedups.sort_by(f64::total_cmp);
    throughput_speedups.sort_by(f64::total_cmp);
    ProjectionSummary {
        jobs: n,
        fraction_throughput_sped_up: frac(thr_up),
        fraction_step_sped_up: frac(step_up),
        fraction_infeasible: frac(infeasible),
        step_speedups,
        throughput_speedups,
    }
}

pub fn population_speedup_profile(
    pop: &JobPopulation,
    target: ArchitectureKind,
    hw: &HardwareProfile,
    eff: &EfficiencyModel,
    overlap: OverlapMode,
) -> Result<PopulationProjection, AggregateError> {
    if pop.is_empty() {
        return Err(AggregateError::EmptyPopulation);
    }
    let results: Vec<ProjectionResult> =
        pop.iter().map(|r| project(r, target, hw, eff, overlap)).collect();
    let summary = summarize(&results);
    Ok(PopulationProjection { results, summary })
}
