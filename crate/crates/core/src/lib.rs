//! Analytical characterization of distributed deep-learning training jobs.
//!
//! A job's training step is split into input I/O, GPU computation
//! (compute-bound plus memory-bound) and weight/gradient traffic, each
//! estimated as demand over attainable bandwidth. On top of that model the
//! crate offers architecture projections (e.g. parameter server to
//! AllReduce), hardware what-if sweeps, efficiency and overlap sensitivity,
//! and cluster-level aggregation.
//!
//! ```
//! use dlcost_core::{breakdown, builtin_corpus, EfficiencyModel, HardwareProfile, OverlapMode};
//!
//! let corpus = builtin_corpus();
//! let resnet = corpus.get("resnet50").unwrap();
//! let b = breakdown(
//!     resnet,
//!     &HardwareProfile::case_study_testbed(),
//!     &EfficiencyModel::default(),
//!     OverlapMode::NoOverlap,
//! );
//! assert!((b.t_compute_bound - 0.149).abs() < 1e-3);
//! ```

pub mod aggregate;
pub mod cost;
pub mod ingest;
pub mod model;
pub mod projection;
pub mod sweep;
pub mod units;

pub use aggregate::{
    composition, scale_distribution, share_cdf, weighted_breakdown, weighted_mean_shares,
    AggregateError, AggregationLevel, ArchitectureShare, CdfPoint, Ecdf, JobPopulation,
    ScaleDistribution, WeightedShares,
};
pub use cost::{
    breakdown, compute_time, data_io_time, pcie_contention, throughput, validation_gap,
    weight_medium_path, weight_time, CostError, GPUS_PER_SERVER,
};
pub use ingest::{
    builtin_corpus, builtin_hardware, load_trace, parse_trace, resolve_hardware, synth_population,
    write_trace, IngestError, LineError, ParseMode, SynthSpec, TraceLoad,
};
pub use model::{
    validate_record, ArchitectureKind, EfficiencyModel, HardwareProfile, Medium, OverlapMode,
    RecordViolation, ShareComponent, Shares, TimeBreakdown, WorkloadRecord,
};
pub use projection::{
    check_allreduce_eligibility, population_speedup_profile, project, Feasibility,
    PopulationProjection, ProjectionResult, ProjectionSummary,
};
pub use sweep::{
    efficiency_sensitivity, hardware_sweep, overlap_comparison, OverlapComparison, Resource,
    SensitivityCell, SweepAxis, SweepCell, SweepError,
};
pub use units::{format_quantity, parse_quantity, QuantityError, QuantityKind};
