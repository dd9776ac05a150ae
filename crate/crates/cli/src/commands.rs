use std::collections::BTreeMap;
use std::path::Path;

use dlcost_core::aggregate::{AggregationLevel, Ecdf};
use dlcost_core::ingest::{self, ParseMode, SynthSpec};
use dlcost_core::sweep::{cartesian_size, cartesian_sweep, Resource, SweepError, LARGE_SWEEP_CELLS};
use dlcost_core::{
    breakdown as model_breakdown, composition, efficiency_sensitivity, hardware_sweep,
    overlap_comparison, parse_quantity, project as model_project,
    scale_distribution, share_cdf, synth_population, throughput, validation_gap,
    weighted_breakdown, ArchitectureKind, Medium, QuantityKind, ShareComponent,
    SweepAxis, WorkloadRecord,
};
use serde_json::{json, Value as Json};

use crate::input::{
    load_population, read_input, write_bytes, write_report, CliError, Context, Loaded, EX_DATAERR,
};
use crate::report::{Cell, Report};
use crate::{InputArgs, ModelArgs, OutputArgs, Stat};

type Outcome = Result<u8, CliError>;

fn setup(input: &InputArgs, model: &ModelArgs) -> Result<(Loaded, Context), CliError> {
    let ctx = Context::resolve(model)?;
    let loaded = load_population(input, model)?;
    Ok((loaded, ctx))
}

fn data_err(e: impl std::fmt::Display) -> CliError {
    CliError::Data(e.to_string())
}

const BREAKDOWN_COLUMNS: &[&str] = &[
    "job_id",
    "arch",
    "num_cnodes",
    "batch_size",
    "t_data",
    "t_compute_bound",
    "t_memory_bound",
    "t_compute",
    "t_weight",
    "t_weight_pcie",
    "t_weight_ethernet",
    "t_weight_nvlink",
    "t_total",
    "share_data",
    "share_compute_bound",
    "share_memory_bound",
    "share_compute",
    "share_weight",
    "shares_defined",
    "throughput",
    "measured_step_seconds",
    "validation_gap",
    "unmodeled_network_bytes",
];

pub fn breakdown(
    input: &InputArgs,
    model: &ModelArgs,
    output: &OutputArgs,
    as_arch: Option<ArchitectureKind>,
) -> Outcome {
    let (loaded, ctx) = setup(input, model)?;
    let mut report = Report::new("breakdown", BREAKDOWN_COLUMNS);
    for rec in &loaded.population {
        let rec = match as_arch {
            Some(arch) if arch != rec.arch => {
                rec.with_arch(arch, dlcost_core::projection::target_cnodes(rec.num_cnodes, arch))
            }
            _ => rec.clone(),
        };
        let b = model_breakdown(&rec, &ctx.hw, &ctx.eff, ctx.overlap);
        let on = |m: Medium| b.t_weight_per_medium.get(&m).copied().unwrap_or(0.0);
        let gap = rec
            .measured_step_seconds
            .and_then(|m| validation_gap(b.t_total, m).ok());
        report.push(vec![
            rec.job_id.as_str().into(),
            rec.arch.label().into(),
            rec.num_cnodes.into(),
            rec.batch_size.into(),
            b.t_data.into(),
            b.t_compute_bound.into(),
            b.t_memory_bound.into(),
            b.t_compute.into(),
            b.t_weight.into(),
            on(Medium::Pcie).into(),
            on(Medium::Ethernet).into(),
            on(Medium::NvLink).into(),
            b.t_total.into(),
            b.shares.data.into(),
            b.shares.compute_bound.into(),
            b.shares.memory_bound.into(),
            b.shares.compute().into(),
            b.shares.weight.into(),
            b.shares_defined.into(),
            throughput(&rec, b.t_total).ok().into(),
            rec.measured_step_seconds.into(),
            gap.into(),
            rec.unmodeled_network_bytes.into(),
        ]);
    }
    ctx.stamp(&mut report, &loaded, json!({ "as_arch": as_arch.map(|a| a.label()) }));
    write_report(&report, output)?;
    Ok(0)
}

fn cdf_rows(report: &mut Report, stat: &str, cdf: &Ecdf) {
    for p in cdf.points() {
        report.push(vec![stat.into(), p.x.into(), p.cumulative.into()]);
    }
}

pub fn project(
    input: &InputArgs,
    model: &ModelArgs,
    output: &OutputArgs,
    target: ArchitectureKind,
    cdf: bool,
) -> Outcome {
    let (loaded, ctx) = setup(input, model)?;
    let results: Vec<_> = loaded
        .population
        .iter()
        .map(|r| model_project(r, target, &ctx.hw, &ctx.eff, ctx.overlap))
        .collect();
    let summary = dlcost_core::projection::summarize(&results);

    let mut report;
    if cdf {
        report = Report::new("projection", &["stat", "x", "cumulative"]);
        cdf_rows(&mut report, "step_speedup", &Ecdf::from_values(summary.step_speedups.iter().copied()));
        cdf_rows(
            &mut report,
            "throughput_speedup",
            &Ecdf::from_values(summary.throughput_speedups.iter().copied()),
        );
    } else {
        report = Report::new(
            "projection",
            &[
                "job_id",
                "source_arch",
                "target_arch",
                "source_cnodes",
                "target_cnodes",
                "feasible",
                "infeasible_reason",
                "source_t_total",
                "target_t_total",
                "step_speedup",
                "throughput_speedup",
            ],
        );
        for p in &results {
            report.push(vec![
                p.job_id.as_str().into(),
                p.source_arch.label().into(),
                p.target_arch.label().into(),
                p.source_cnodes.into(),
                p.target_cnodes.into(),
                p.is_feasible().into(),
                p.feasibility.reason().map(str::to_string).into(),
                p.source.t_total.into(),
                p.target.as_ref().map(|t| t.t_total).into(),
                p.step_speedup.into(),
                p.throughput_speedup.into(),
            ]);
        }
    }
    report.meta(
        "summary",
        json!({
            "jobs": summary.jobs,
            "fraction_step_sped_up": summary.fraction_step_sped_up,
            "fraction_throughput_sped_up": summary.fraction_throughput_sped_up,
            "fraction_infeasible": summary.fraction_infeasible,
        }),
    );
    ctx.stamp(&mut report, &loaded, json!({ "target": target.label(), "cdf": cdf }));
    write_report(&report, output)?;
    Ok(0)
}

fn parse_candidates(specs: &[String], axes: &[Resource]) -> Result<BTreeMap<Resource, Vec<f64>>, CliError> {
    let mut out = BTreeMap::new();
    for spec in specs {
        let (name, values) = spec
            .split_once('=')
            .ok_or_else(|| CliError::Usage(format!("--candidates expects RESOURCE=V1,V2,... (got '{spec}')")))?;
        let resource: Resource = name.trim().parse().map_err(CliError::Usage)?;
        if !axes.contains(&resource) {
            return Err(CliError::Usage(format!("candidates given for '{resource}', which is not in --axes")));
        }
        let kind = match resource {
            Resource::GpuFlops => QuantityKind::FlopsRate,
            _ => QuantityKind::Bandwidth,
        };
        let parsed = values
            .split(',')
            .map(|v| parse_quantity(v, kind).map_err(|e| CliError::Usage(format!("--candidates {resource}: {e}"))))
            .collect::<Result<Vec<_>, _>>()?;
        if out.insert(resource, parsed).is_some() {
            return Err(CliError::Usage(format!("candidates for '{resource}' given twice")));
        }
    }
    Ok(out)
}

pub fn sweep(
    input: &InputArgs,
    model: &ModelArgs,
    output: &OutputArgs,
    axes: &[Resource],
    candidates: &[String],
    cartesian: bool,
) -> Outcome {
    let mut custom = parse_candidates(candidates, axes)?;
    let (loaded, ctx) = setup(input, model)?;
    let axes: Vec<SweepAxis> = axes
        .iter()
        .map(|&r| match custom.remove(&r) {
            Some(values) => SweepAxis::new(r, values, r.get(&ctx.hw)).map_err(|e| CliError::Usage(e.to_string())),
            None => Ok(SweepAxis::standard(r, &ctx.hw)),
        })
        .collect::<Result<_, _>>()?;
    let pop = &loaded.population;

    let mut report;
    if cartesian {
        let size = cartesian_size(pop.len(), &axes);
        if size > LARGE_SWEEP_CELLS {
            eprintln!("warning: cartesian sweep has {size} cells");
        }
        let mut columns = vec!["job_id", "arch"];
        columns.extend(axes.iter().map(|a| a.resource.label()));
        columns.extend(["t_total", "speedup"]);
        report = Report::new("sweep", &columns);
        for cell in cartesian_sweep(pop, &axes, &ctx.hw, &ctx.eff, ctx.overlap).map_err(data_err)? {
            let mut row: Vec<Cell> = vec![cell.job_id.into(), cell.arch.label().into()];
            row.extend(cell.assignment.iter().map(|&(_, v)| Cell::from(v)));
            row.extend([cell.t_total.into(), cell.speedup.into()]);
            report.push(row);
        }
    } else {
        report = Report::new(
            "sweep",
            &["job_id", "arch", "resource", "candidate", "normalized", "base_t_total", "t_total", "speedup"],
        );
        for cell in hardware_sweep(pop, &axes, &ctx.hw, &ctx.eff, ctx.overlap).map_err(data_err)? {
            report.push(vec![
                cell.job_id.into(),
                cell.arch.label().into(),
                cell.resource.label().into(),
                cell.candidate.into(),
                cell.normalized.into(),
                cell.base_t_total.into(),
                cell.t_total.into(),
                cell.speedup.into(),
            ]);
        }
    }
    let axes_meta: Vec<Json> = axes
        .iter()
        .map(|a| json!({ "resource": a.resource.label(), "candidates": a.candidates, "baseline": a.baseline }))
        .collect();
    ctx.stamp(&mut report, &loaded, json!({ "axes": axes_meta, "cartesian": cartesian }));
    write_report(&report, output)?;
    Ok(0)
}

const TIDY_COLUMNS: &[&str] = &["stat", "group", "metric", "x", "value"];

fn tidy(report: &mut Report, stat: &str, group: &str, metric: &str, x: Option<f64>, value: Cell) {
    report.push(vec![stat.into(), group.into(), metric.into(), x.into(), value]);
}

const LEVELS: [AggregationLevel; 2] = [AggregationLevel::Job, AggregationLevel::Cnode];

pub fn aggregate(input: &InputArgs, model: &ModelArgs, output: &OutputArgs, stats: &[Stat]) -> Outcome {
    let (loaded, ctx) = setup(input, model)?;
    let pop = &loaded.population;
    let all = [Stat::Composition, Stat::MeanShare, Stat::ShareCdf, Stat::ScaleCdf];
    let mut wanted: Vec<Stat> = if stats.is_empty() { all.to_vec() } else { stats.to_vec() };
    wanted.sort();
    wanted.dedup();

    let mut report = Report::new("aggregate", TIDY_COLUMNS);
    for stat in &wanted {
        match stat {
            Stat::Composition => {
                for c in composition(pop).map_err(data_err)? {
                    let g = c.arch.label();
                    tidy(&mut report, "composition", g, "jobs", None, c.jobs.into());
                    tidy(&mut report, "composition", g, "job_fraction", None, c.job_fraction.into());
                    tidy(&mut report, "composition", g, "cnodes", None, c.cnodes.into());
                    tidy(&mut report, "composition", g, "cnode_fraction", None, c.cnode_fraction.into());
                }
            }
            Stat::MeanShare => {
                let w = weighted_breakdown(pop, &ctx.hw, &ctx.eff, ctx.overlap).map_err(data_err)?;
                for level in LEVELS {
                    for comp in ShareComponent::ALL {
                        let v = w.at(level).get(comp);
                        tidy(&mut report, "mean_share", level.label(), comp.label(), None, v.into());
                    }
                }
            }
            Stat::ShareCdf => {
                for level in LEVELS {
                    for comp in ShareComponent::ALL {
                        let cdf = share_cdf(pop, comp, &ctx.hw, &ctx.eff, ctx.overlap, level).map_err(data_err)?;
                        for p in cdf.points() {
                            tidy(&mut report, "share_cdf", level.label(), comp.label(), Some(p.x), p.cumulative.into());
                        }
                    }
                }
            }
            Stat::ScaleCdf => {
                for dist in scale_distribution(pop).map_err(data_err)? {
                    let g = dist.arch.label();
                    for p in dist.cnodes.points() {
                        tidy(&mut report, "scale_cdf", g, "cnodes", Some(p.x), p.cumulative.into());
                    }
                    for p in dist.model_bytes.points() {
                        tidy(&mut report, "scale_cdf", g, "model_bytes", Some(p.x), p.cumulative.into());
                    }
                }
            }
        }
    }
    let names: Vec<&str> = wanted.iter().map(|s| stat_label(*s)).collect();
    ctx.stamp(&mut report, &loaded, json!({ "stats": names }));
    write_report(&report, output)?;
    Ok(0)
}

fn stat_label(s: Stat) -> &'static str {
    match s {
        Stat::Composition => "composition",
        Stat::MeanShare => "mean_share",
        Stat::ShareCdf => "share_cdf",
        Stat::ScaleCdf => "scale_cdf",
    }
}

const SENSITIVITY_COLUMNS: &[&str] =
    &["analysis", "overlap", "compute_eff", "comm_eff", "level", "metric", "x", "value"];

pub fn sensitivity(
    input: &InputArgs,
    model: &ModelArgs,
    output: &OutputArgs,
    compute_grid: &[f64],
    comm_grid: &[f64],
    overlap_target: Option<ArchitectureKind>,
) -> Outcome {
    let (loaded, ctx) = setup(input, model)?;
    let pop = &loaded.population;
    let mut report = Report::new("sensitivity", SENSITIVITY_COLUMNS);
    let params;

    if let Some(target) = overlap_target {
        let cmp = overlap_comparison(pop, &ctx.hw, &ctx.eff, target).map_err(data_err)?;
        for s in [&cmp.no_overlap, &cmp.ideal_overlap] {
            let ov = s.overlap.label();
            let mut row = |level: &str, metric: &str, x: Option<f64>, value: Cell| {
                report.push(vec![
                    "overlap".into(),
                    ov.into(),
                    Cell::Empty,
                    Cell::Empty,
                    level.into(),
                    metric.into(),
                    x.into(),
                    value,
                ]);
            };
            for level in LEVELS {
                row(level.label(), "mean_weight_share", None, s.mean_weight_share.at(level).weight.into());
            }
            row("", "fraction_step_sped_up", None, s.projection.fraction_step_sped_up.into());
            row("", "fraction_throughput_sped_up", None, s.projection.fraction_throughput_sped_up.into());
            row("", "fraction_infeasible", None, s.projection.fraction_infeasible.into());
            row("", "weight_path_ratio", None, s.weight_path_ratio.into());
            row("", "fraction_at_weight_path_ratio", None, s.fraction_at_weight_path_ratio.into());
            for p in Ecdf::from_values(s.weight_shares.iter().copied()).points() {
                row("job", "weight_share_cdf", Some(p.x), p.cumulative.into());
            }
            for p in Ecdf::from_values(s.projection.step_speedups.iter().copied()).points() {
                row("", "step_speedup_cdf", Some(p.x), p.cumulative.into());
            }
        }
        params = json!({ "analysis": "overlap", "target": target.label() });
    } else {
        let cells = efficiency_sensitivity(pop, &ctx.hw, compute_grid, comm_grid, ctx.overlap)
            .map_err(|e| match e {
                SweepError::EmptyPopulation => data_err(e),
                other => CliError::Usage(other.to_string()),
            })?;
        for cell in &cells {
            for level in LEVELS {
                for comp in ShareComponent::ALL {
                    report.push(vec![
                        "efficiency".into(),
                        ctx.overlap.label().into(),
                        cell.compute_eff.into(),
                        cell.comm_eff.into(),
                        level.label().into(),
                        comp.label().into(),
                        Cell::Empty,
                        cell.weight_share.at(level).get(comp).into(),
                    ]);
                }
            }
        }
        params = json!({ "analysis": "efficiency", "compute_eff": compute_grid, "comm_eff": comm_grid });
    }
    ctx.stamp(&mut report, &loaded, params);
    write_report(&report, output)?;
    Ok(0)
}

pub fn synth(spec: Option<&Path>, size: Option<usize>, seed: Option<u64>, out: Option<&Path>) -> Outcome {
    let mut spec = match spec {
        Some(path) => {
            let bytes = read_input(path)?;
            let text = String::from_utf8(bytes)
                .map_err(|_| CliError::Data(format!("{} is not UTF-8", path.display())))?;
            ingest::parse_synth_spec(&text)?
        }
        None => {
            let seed = seed.ok_or_else(|| CliError::Usage("synth needs --seed or a --spec file".into()))?;
            SynthSpec::with_defaults(size.unwrap_or(1000), seed)
        }
    };
    if let Some(size) = size {
        spec.size = size;
    }
    if let Some(seed) = seed {
        spec.seed = seed;
    }
    let pop = synth_population(&spec)?;
    write_bytes(out, ingest::trace_to_string(&pop).as_bytes())?;
    Ok(0)
}

pub fn corpus(out: Option<&Path>) -> Outcome {
    write_bytes(out, ingest::trace_to_string(&dlcost_core::builtin_corpus()).as_bytes())?;
    Ok(0)
}

const VALIDATE_COLUMNS: &[&str] = &[
    "line",
    "job_id",
    "valid",
    "problem",
    "predicted_step_seconds",
    "measured_step_seconds",
    "validation_gap",
];

fn validate_row(report: &mut Report, ctx: &Context, line: usize, rec: &WorkloadRecord) {
    let predicted = model_breakdown(rec, &ctx.hw, &ctx.eff, ctx.overlap).t_total;
    let gap = rec
        .measured_step_seconds
        .and_then(|m| validation_gap(predicted, m).ok());
    report.push(vec![
        line.into(),
        rec.job_id.as_str().into(),
        true.into(),
        Cell::Empty,
        predicted.into(),
        rec.measured_step_seconds.into(),
        gap.into(),
    ]);
}

/// Checks every line of a trace and compares predictions with any measured
/// step times. Exits 2 when a line is invalid, after writing the report.
pub fn validate(input: &InputArgs, model: &ModelArgs, output: &OutputArgs) -> Outcome {
    let ctx = Context::resolve(model)?;
    let mut report = Report::new("validate", VALIDATE_COLUMNS);
    let mut invalid = 0usize;

    let loaded = match &input.trace {
        Some(path) => {
            let bytes = read_input(path)?;
            let text = String::from_utf8_lossy(&bytes);
            for (idx, line) in text.lines().enumerate() {
                if line.trim().is_empty() {
                    continue;
                }
                let load = ingest::parse_trace(line.as_bytes(), ParseMode::Lenient)?;
                match (load.population.records.first(), load.errors.first()) {
                    (Some(rec), _) => validate_row(&mut report, &ctx, idx + 1, rec),
                    (None, Some(err)) => {
                        invalid += 1;
                        eprintln!("error: {}:line {}: {}", path.display(), idx + 1, err.problem);
                        report.push(vec![
                            (idx + 1).into(),
                            err.job_id.clone().into(),
                            false.into(),
                            err.problem.to_string().into(),
                            Cell::Empty,
                            Cell::Empty,
                            Cell::Empty,
                        ]);
                    }
                    (None, None) => {}
                }
            }
            Loaded {
                population: Default::default(),
                label: path.display().to_string(),
                digest: crate::input::sha256_hex(&bytes),
            }
        }
        None => {
            let loaded = load_population(input, model)?;
            for (idx, rec) in loaded.population.iter().enumerate() {
                validate_row(&mut report, &ctx, idx + 1, rec);
            }
            loaded
        }
    };
    ctx.stamp(&mut report, &loaded, json!({ "invalid_lines": invalid }));
    report.meta("jobs", json!(report.rows.len() - invalid));
    write_report(&report, output)?;
    if invalid > 0 {
        Ok(EX_DATAERR)
    } else {
        Ok(0)
    }
}
