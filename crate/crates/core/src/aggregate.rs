//! Cluster-level statistics over a job population.
//!
//! Job-level statistics weight every job equally; cNode-level statistics
//! weight each job by its share of the population's cNodes. Reductions sort
//! their terms before a compensated sum, so results do not depend on the
//! order of the population.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::cost::breakdown;
use crate::model::{
    ArchitectureKind, EfficiencyModel, HardwareProfile, OverlapMode, ShareComponent, Shares,
    WorkloadRecord,
};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum AggregateError {
    #[error("population is empty")]
    EmptyPopulation,
}

/// A set of jobs analysed together.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct JobPopulation {
    pub records: Vec<WorkloadRecord>,
}

impl JobPopulation {
    pub fn new(records: Vec<WorkloadRecord>) -> Self {
        JobPopulation { records }
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn total_cnodes(&self) -> u64 {
        self.records.iter().map(|r| u64::from(r.num_cnodes)).sum()
    }

    pub fn get(&self, job_id: &str) -> Option<&WorkloadRecord> {
        self.records.iter().find(|r| r.job_id == job_id)
    }

    pub fn iter(&self) -> std::slice::Iter<'_, WorkloadRecord> {
        self.records.iter()
    }

    /// Only the jobs running under `arch`.
    pub fn filter_arch(&self, arch: ArchitectureKind) -> JobPopulation {
        JobPopulation::new(self.records.iter().filter(|r| r.arch == arch).cloned().collect())
    }

    fn non_empty(&self) -> Result<(), AggregateError> {
        if self.is_empty() {
            Err(AggregateError::EmptyPopulation)
        } else {
            Ok(())
        }
    }
}

impl<'a> IntoIterator for &'a JobPopulation {
    type Item = &'a WorkloadRecord;
    type IntoIter = std::slice::Iter<'a, WorkloadRecord>;

    fn into_iter(self) -> Self::IntoIter {
        self.records.iter()
    }
}

impl FromIterator<WorkloadRecord> for JobPopulation {
    fn from_iter<I: IntoIterator<Item = WorkloadRecord>>(iter: I) -> Self {
        JobPopulation::new(iter.into_iter().collect())
    }
}

/// Order-independent sum: sort, then Neumaier summation.
pub(crate) fn stable_sum(mut values: Vec<f64>) -> f64 {
    values.sort_by(f64::total_cmp);
    let mut sum = 0.0;
    let mut compensation = 0.0;
    for v in values {
        let t = sum + v;
        if f64::abs(sum) >= f64::abs(v) {
            compensation += (sum - t) + v;
        } else {
            compensation += (v - t) + sum;
        }
        sum = t;
    }
    sum + compensation
}

/// Job-level or cNode-level aggregation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AggregationLevel {
    Job,
    Cnode,
}

impl AggregationLevel {
    pub fn label(self) -> &'static str {
        match self {
            AggregationLevel::Job => "job",
            AggregationLevel::Cnode => "cnode",
        }
    }

    fn weight(self, rec: &WorkloadRecord) -> u64 {
        match self {
            AggregationLevel::Job => 1,
            AggregationLevel::Cnode => u64::from(rec.num_cnodes),
        }
    }
}

impl fmt::Display for AggregationLevel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for AggregationLevel {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "job" => Ok(AggregationLevel::Job),
            "cnode" => Ok(AggregationLevel::Cnode),
            other => Err(format!("unknown aggregation level '{other}'")),
        }
    }
}

/// Weighted empirical CDF with right-continuous steps.
///
/// Weights are integers (1 per job, or cNode counts) so every cumulative
/// value is an exact ratio and the last step lands on 1.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Ecdf {
    points: Vec<CdfPoint>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CdfPoint {
    pub x: f64,
    pub cumulative: f64,
}

impl Ecdf {
    /// Builds the CDF of `(value, weight)` samples. Zero-weight samples are dropped.
    pub fn from_weighted(samples: impl IntoIterator<Item = (f64, u64)>) -> Self {
        let mut samples: Vec<(f64, u64)> = samples.into_iter().filter(|s| s.1 > 0).collect();
        samples.sort_by(|a, b| a.0.total_cmp(&b.0));
        let total: u64 = samples.iter().map(|s| s.1).sum();
        let mut points: Vec<CdfPoint> = Vec::new();
        let mut running = 0u64;
        for (x, w) in samples {
            running += w;
            let cumulative = running as f64 / total as f64;
            match points.last_mut() {
                Some(last) if last.x == x => last.cumulative = cumulative,
                _ => points.push(CdfPoint { x, cumulative }),
            }
        }
        Ecdf { points }
    }

    pub fn from_values(values: impl IntoIterator<Item = f64>) -> Self {
        Self::from_weighted(values.into_iter().map(|v| (v, 1)))
    }

    pub fn points(&self) -> &[CdfPoint] {
        &self.points
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Weight fraction of samples `<= x`.
    pub fn eval(&self, x: f64) -> f64 {
        let idx = self.points.partition_point(|p| p.x <= x);
        if idx == 0 {
            0.0
        } else {
            self.points[idx - 1].cumulative
        }
    }

    /// Smallest sample value whose cumulative weight reaches `p`.
    pub fn quantile(&self, p: f64) -> Option<f64> {
        self.points
            .iter()
            .find(|pt| pt.cumulative >= p)
            .or(self.points.last())
            .map(|pt| pt.x)
    }
}

/// Job and cNode counts of one architecture within a population.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArchitectureShare {
    pub arch: ArchitectureKind,
    pub jobs: usize,
    pub job_fraction: f64,
    pub cnodes: u64,
    pub cnode_fraction: f64,
}

/// Job-level and cNode-level constitution, one entry per architecture.
pub fn composition(pop: &JobPopulation) -> Result<Vec<ArchitectureShare>, AggregateError> {
    pop.non_empty()?;
    let total_jobs = pop.len();
    let total_cnodes = pop.total_cnodes();
    Ok(ArchitectureKind::ALL
        .into_iter()
        .map(|arch| {
            let jobs = pop.iter().filter(|r| r.arch == arch).count();
            let cnodes: u64 = pop
                .iter()
                .filter(|r| r.arch == arch)
                .map(|r| u64::from(r.num_cnodes))
                .sum();
            ArchitectureShare {
                arch,
                jobs,
                job_fraction: jobs as f64 / total_jobs as f64,
                cnodes,
                cnode_fraction: if total_cnodes == 0 {
                    0.0
                } else {
                    cnodes as f64 / total_cnodes as f64
                },
            }
        })
        .collect())
}

/// Population-average shares at both aggregation levels.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WeightedShares {
    pub job_level: Shares,
    pub cnode_level: Shares,
}

impl WeightedShares {
    pub fn at(&self, level: AggregationLevel) -> &Shares {
        match level {
            AggregationLevel::Job => &self.job_level,
            AggregationLevel::Cnode => &self.cnode_level,
        }
    }
}

/// Averages per-job shares: plain mean over jobs, and the cNode-weighted mean
/// `sum_j (cnodes_j / total_cnodes) * share_j`.
pub fn weighted_mean_shares(items: &[(u32, Shares)]) -> Result<WeightedShares, AggregateError> {
    if items.is_empty() {
        return Err(AggregateError::EmptyPopulation);
    }
    let n = items.len() as f64;
    let total: f64 = items.iter().map(|(c, _)| f64::from(*c)).sum();
    let mean = |get: fn(&Shares) -> f64| -> (f64, f64) {
        let job = stable_sum(items.iter().map(|(_, s)| get(s)).collect()) / n;
        let cnode = stable_sum(items.iter().map(|(c, s)| f64::from(*c) * get(s)).collect()) / total;
        (job, cnode)
    };
    let (data_j, data_c) = mean(|s| s.data);
    let (cb_j, cb_c) = mean(|s| s.compute_bound);
    let (mb_j, mb_c) = mean(|s| s.memory_bound);
    let (w_j, w_c) = mean(|s| s.weight);
    Ok(WeightedShares {
        job_level: Shares {
            data: data_j,
            compute_bound: cb_j,
            memory_bound: mb_j,
            weight: w_j,
        },
        cnode_level: Shares {
            data: data_c,
            compute_bound: cb_c,
            memory_bound: mb_c,
            weight: w_c,
        },
    })
}

fn job_shares(
    pop: &JobPopulation,
    hw: &HardwareProfile,
    eff: &EfficiencyModel,
    overlap: OverlapMode,
) -> Vec<(u32, Shares)> {
    pop.iter()
        .map(|r| (r.num_cnodes, breakdown(r, hw, eff, overlap).shares))
        .collect()
}

pub fn weighted_breakdown(
    pop: &JobPopulation,
    hw: &HardwareProfile,
    eff: &EfficiencyModel,
    overlap: OverlapMode,
) -> Result<WeightedShares, AggregateError> {
    pop.non_empty()?;
    weighted_mean_shares(&job_shares(pop, hw, eff, overlap))
}

/// Distribution of one component's share across the population.
pub fn share_cdf(
    pop: &JobPopulation,
    component: ShareComponent,
    hw: &HardwareProfile,
    eff: &EfficiencyModel,
    overlap: OverlapMode,
    level: AggregationLevel,
) -> Result<Ecdf, AggregateError> {
    pop.non_empty()?;
    Ok(Ecdf::from_weighted(pop.iter().map(|r| {
        let shares = breakdown(r, hw, eff, overlap).shares;
        (shares.get(component), level.weight(r))
    })))
}

/// Scale distributions of one architecture's jobs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScaleDistribution {
    pub arch: ArchitectureKind,
    pub cnodes: Ecdf,
    pub model_bytes: Ecdf,
}

/// Per-architecture CDFs of cNode count and dense+embedding model size, for
/// every architecture present in the population.
pub fn scale_distribution(pop: &JobPopulation) -> Result<Vec<ScaleDistribution>, AggregateError> {
    pop.non_empty()?;
    Ok(ArchitectureKind::ALL
        .into_iter()
        .filter_map(|arch| {
            let jobs: Vec<&WorkloadRecord> = pop.iter().filter(|r| r.arch == arch).collect();
            if jobs.is_empty() {
                return None;
            }
            Some(ScaleDistribution {
                arch,
                cnodes: Ecdf::from_values(jobs.iter().map(|r| f64::from(r.num_cnodes))),
                model_bytes: Ecdf::from_values(jobs.iter().map(|r| r.model_bytes())),
            })
        })
        .collect())
}
