//! Naive reimplementations of the cost model and population statistics.
//!
//! Written straight from the formulas with plain loops; shares nothing with
//! the library beyond its data types.

#![allow(dead_code)]

use dlcost_core::{ArchitectureKind, EfficiencyModel, HardwareProfile, WorkloadRecord};

pub struct NaiveTimes {
    pub data: f64,
    pub compute_bound: f64,
    pub memory_bound: f64,
    pub weight: f64,
}

impl NaiveTimes {
    pub fn sum(&self) -> f64 {
        self.data + self.compute_bound + self.memory_bound + self.weight
    }

    pub fn total(&self, ideal: bool) -> f64 {
        if ideal {
            let c = self.compute_bound + self.memory_bound;
            let mut m = self.data;
            if c > m {
                m = c;
            }
            if self.weight > m {
                m = self.weight;
            }
            m
        } else {
            self.sum()
        }
    }

    /// [data, compute_bound, memory_bound, compute, weight]
    pub fn shares(&self) -> [f64; 5] {
        let s = self.sum();
        if s == 0.0 {
            return [0.0; 5];
        }
        [
            self.data / s,
            self.compute_bound / s,
            self.memory_bound / s,
            (self.compute_bound + self.memory_bound) / s,
            self.weight / s,
        ]
    }
}

pub fn naive_times(
    rec: &WorkloadRecord,
    arch: ArchitectureKind,
    cnodes: u32,
    hw: &HardwareProfile,
    eff: &EfficiencyModel,
) -> NaiveTimes {
    let sharing = match arch {
        ArchitectureKind::OneWorkerNGpu | ArchitectureKind::AllReduceLocal => {
            if cnodes > 8 {
                8.0
            } else {
                cnodes as f64
            }
        }
        _ => 1.0,
    };
    let eth = 1.0 / (hw.ethernet_bandwidth * eff.ethernet_eff);
    let pcie = 1.0 / (hw.pcie_bandwidth * eff.pcie_eff);
    let nvl = 1.0 / (hw.nvlink_bandwidth * eff.nvlink_eff);
    let seconds_per_byte = match arch {
        ArchitectureKind::OneWorkerOneGpu => 0.0,
        ArchitectureKind::OneWorkerNGpu => pcie,
        ArchitectureKind::PsWorker => eth + pcie,
        ArchitectureKind::AllReduceLocal | ArchitectureKind::Pearl => nvl,
        ArchitectureKind::AllReduceCluster => eth + nvl,
    };
    NaiveTimes {
        data: rec.input_bytes * sharing / (hw.pcie_bandwidth * eff.pcie_eff),
        compute_bound: rec.flops / (hw.gpu_peak_flops * eff.compute_eff),
        memory_bound: rec.mem_access_bytes / (hw.gpu_mem_bandwidth * eff.mem_eff),
        weight: rec.weight_traffic_bytes * seconds_per_byte,
    }
}

pub fn naive_record_times(rec: &WorkloadRecord, hw: &HardwareProfile, eff: &EfficiencyModel) -> NaiveTimes {
    naive_times(rec, rec.arch, rec.num_cnodes, hw, eff)
}

pub const COMPONENTS: [&str; 5] = ["data", "compute_bound", "memory_bound", "compute", "weight"];

pub fn component_index(name: &str) -> usize {
    COMPONENTS.iter().position(|c| *c == name).unwrap()
}

/// (job-level mean, cNode-level mean) of one share component.
pub fn naive_means(
    pop: &[WorkloadRecord],
    component: usize,
    hw: &HardwareProfile,
    eff: &EfficiencyModel,
) -> (f64, f64) {
    let mut job_sum = 0.0;
    let mut weighted_sum = 0.0;
    let mut cnodes = 0.0;
    for rec in pop {
        let share = naive_record_times(rec, hw, eff).shares()[component];
        job_sum += share;
        weighted_sum += share * rec.num_cnodes as f64;
        cnodes += rec.num_cnodes as f64;
    }
    (job_sum / pop.len() as f64, weighted_sum / cnodes)
}

/// Evaluates the weighted empirical CDF of `values` at every sample value.
pub fn naive_cdf(samples: &[(f64, f64)]) -> Vec<(f64, f64)> {
    let total: f64 = samples.iter().map(|s| s.1).sum();
    let mut xs: Vec<f64> = samples.iter().map(|s| s.0).collect();
    xs.sort_by(|a, b| a.partial_cmp(b).unwrap());
    xs.dedup();
    xs.into_iter()
        .map(|x| {
            let below: f64 = samples.iter().filter(|s| s.0 <= x).map(|s| s.1).sum();
            (x, below / total)
        })
        .collect()
}

/// (job fraction, cNode fraction) of one architecture.
pub fn naive_composition(pop: &[WorkloadRecord], arch: ArchitectureKind) -> (f64, f64) {
    let mut jobs = 0usize;
    let mut cn = 0u64;
    let mut all_cn = 0u64;
    for rec in pop {
        all_cn += rec.num_cnodes as u64;
        if rec.arch == arch {
            jobs += 1;
            cn += rec.num_cnodes as u64;
        }
    }
    (jobs as f64 / pop.len() as f64, cn as f64 / all_cn as f64)
}

/// Projection: `None` when infeasible, otherwise (step, throughput) speedups.
pub fn naive_projection(
    rec: &WorkloadRecord,
    target: ArchitectureKind,
    hw: &HardwareProfile,
    eff: &EfficiencyModel,
    ideal: bool,
) -> Option<(f64, f64)> {
    if target != rec.arch {
        let fits = rec.dense_weight_bytes + rec.embedding_weight_bytes <= hw.gpu_mem_capacity;
        let ok = match target {
            ArchitectureKind::PsWorker => true,
            ArchitectureKind::Pearl => rec.embedding_weight_bytes > 0.0,
            _ => fits,
        };
        if !ok {
            return None;
        }
    }
    let cnodes = match target {
        _ if target == rec.arch => rec.num_cnodes,
        ArchitectureKind::OneWorkerOneGpu => 1,
        ArchitectureKind::OneWorkerNGpu | ArchitectureKind::AllReduceLocal => rec.num_cnodes.min(8),
        _ => rec.num_cnodes,
    };
    let before = naive_times(rec, rec.arch, rec.num_cnodes, hw, eff).total(ideal);
    let after = naive_times(rec, target, cnodes, hw, eff).total(ideal);
    let step = before / after;
    let thr = (cnodes as f64 * rec.batch_size as f64 / after)
        / (rec.num_cnodes as f64 * rec.batch_size as f64 / before);
    Some((step, thr))
}

/// Whether a speedup counts as an improvement, ignoring rounding noise.
pub fn is_speedup(s: f64) -> bool {
    s - 1.0 > 1e-9
}

pub fn rel_close(a: f64, b: f64, tol: f64) -> bool {
    if a == b {
        return true;
    }
    (a - b).abs() <= tol * a.abs().max(b.abs()).max(1e-300)
}
