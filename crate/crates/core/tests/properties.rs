mod support;

use dlcost_core::aggregate::{composition, share_cdf, weighted_breakdown, AggregationLevel};
use dlcost_core::sweep::{hardware_sweep, Resource, SweepAxis};
use dlcost_core::units::{format_quantity, parse_quantity, QuantityKind};
use dlcost_core::{
    breakdown, ingest, population_speedup_profile, project, throughput, weight_time,
    ArchitectureKind, EfficiencyModel, HardwareProfile, JobPopulation, OverlapMode, ShareComponent,
    WorkloadRecord,
};
use proptest::prelude::*;
use support::oracle;

fn demand() -> impl Strategy<Value = f64> {
    prop_oneof![1 => Just(0.0), 6 => (3.0f64..13.0).prop_map(|e| 10f64.powf(e))]
}

fn arch() -> impl Strategy<Value = ArchitectureKind> {
    prop::sample::select(ArchitectureKind::ALL.to_vec())
}

prop_compose! {
    fn record()(
        arch in arch(),
        cnodes in 1u32..256,
        batch in 1u32..4096,
        flops in demand(),
        mem in demand(),
        input in demand(),
        weight in demand(),
        dense in demand(),
        emb in demand(),
        id in 0u32..1_000_000,
    ) -> WorkloadRecord {
        let single = arch == ArchitectureKind::OneWorkerOneGpu;
        WorkloadRecord {
            job_id: format!("job-{id}"),
            arch,
            num_cnodes: if single { 1 } else { cnodes },
            batch_size: batch,
            flops,
            mem_access_bytes: mem,
            input_bytes: input,
            weight_traffic_bytes: if single { 0.0 } else { weight },
            dense_weight_bytes: dense,
            embedding_weight_bytes: emb,
            measured_step_seconds: None,
            unmodeled_network_bytes: None,
        }
    }
}

fn overlap() -> impl Strategy<Value = OverlapMode> {
    prop_oneof![Just(OverlapMode::NoOverlap), Just(OverlapMode::IdealOverlap)]
}

fn eff() -> impl Strategy<Value = EfficiencyModel> {
    (0.05f64..=1.0, 0.05f64..=1.0, 0.05f64..=1.0, 0.05f64..=1.0, 0.05f64..=1.0).prop_map(
        |(c, m, p, e, n)| EfficiencyModel {
            compute_eff: c,
            mem_eff: m,
            pcie_eff: p,
            ethernet_eff: e,
            nvlink_eff: n,
        },
    )
}

fn hw() -> impl Strategy<Value = HardwareProfile> {
    (1e12f64..1e14, 1e11f64..5e12, 1e9f64..1e11, 1e8f64..5e10, 1e10f64..5e11).prop_map(
        |(f, m, p, e, n)| HardwareProfile {
            gpu_peak_flops: f,
            gpu_mem_bandwidth: m,
            pcie_bandwidth: p,
            ethernet_bandwidth: e,
            nvlink_bandwidth: n,
            gpu_mem_capacity: 16e9,
        },
    )
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn quantities_round_trip(v in 1e-3f64..1e15) {
        for kind in [QuantityKind::Bandwidth, QuantityKind::FlopsRate, QuantityKind::Bytes, QuantityKind::FlopCount] {
            prop_assert_eq!(parse_quantity(&format_quantity(v, kind), kind).unwrap(), v);
        }
    }

    #[test]
    fn prefixed_quantities_match_literals(mantissa in 1u32..100_000, prefix in 0usize..4) {
        let (p, e) = [("K", 3), ("M", 6), ("G", 9), ("T", 12)][prefix];
        let text = format!("{mantissa}{p}B");
        let expected: f64 = format!("{mantissa}e{e}").parse().unwrap();
        prop_assert_eq!(parse_quantity(&text, QuantityKind::Bytes).unwrap(), expected);
    }

    #[test]
    fn breakdown_matches_oracle(rec in record(), hw in hw(), eff in eff(), ov in overlap()) {
        let b = breakdown(&rec, &hw, &eff, ov);
        let n = oracle::naive_record_times(&rec, &hw, &eff);
        prop_assert!(oracle::rel_close(b.t_data, n.data, 1e-12));
        prop_assert!(oracle::rel_close(b.t_compute_bound, n.compute_bound, 1e-12));
        prop_assert!(oracle::rel_close(b.t_memory_bound, n.memory_bound, 1e-12));
        prop_assert!(oracle::rel_close(b.t_weight, n.weight, 1e-12));
        prop_assert!(oracle::rel_close(b.t_total, n.total(ov == OverlapMode::IdealOverlap), 1e-12));
        prop_assert!(oracle::rel_close(b.t_compute, b.t_compute_bound + b.t_memory_bound, 1e-12));
        let per_medium: f64 = b.t_weight_per_medium.values().sum();
        prop_assert!(oracle::rel_close(per_medium, b.t_weight, 1e-12));
    }

    #[test]
    fn shares_partition_unity(rec in record(), hw in hw(), eff in eff(), ov in overlap()) {
        let b = breakdown(&rec, &hw, &eff, ov);
        let s = b.shares;
        prop_assert!(s.data >= 0.0 && s.compute_bound >= 0.0 && s.memory_bound >= 0.0 && s.weight >= 0.0);
        if b.component_sum() > 0.0 {
            prop_assert!(b.shares_defined);
            prop_assert!((s.sum() - 1.0).abs() <= 1e-9);
        } else {
            prop_assert!(!b.shares_defined);
            prop_assert_eq!(s.sum(), 0.0);
        }
    }

    #[test]
    fn ideal_overlap_never_exceeds_sum(rec in record(), hw in hw(), eff in eff()) {
        let none = breakdown(&rec, &hw, &eff, OverlapMode::NoOverlap);
        let ideal = breakdown(&rec, &hw, &eff, OverlapMode::IdealOverlap);
        prop_assert!(ideal.t_total <= none.t_total);
        let nonzero = [none.t_data, none.t_compute, none.t_weight].iter().filter(|&&t| t > 0.0).count();
        prop_assert_eq!(ideal.t_total == none.t_total, nonzero <= 1);
    }

    #[test]
    fn demand_scaling_is_linear(rec in record(), hw in hw(), eff in eff(), ov in overlap(), k in 0.01f64..100.0) {
        let scaled = WorkloadRecord {
            flops: rec.flops * k,
            mem_access_bytes: rec.mem_access_bytes * k,
            input_bytes: rec.input_bytes * k,
            weight_traffic_bytes: rec.weight_traffic_bytes * k,
            ..rec.clone()
        };
        let a = breakdown(&rec, &hw, &eff, ov);
        let b = breakdown(&scaled, &hw, &eff, ov);
        for (x, y) in [(a.t_data, b.t_data), (a.t_compute, b.t_compute), (a.t_weight, b.t_weight), (a.t_total, b.t_total)] {
            prop_assert!(oracle::rel_close(y, k * x, 1e-12));
        }
        if a.t_total > 0.0 {
            let ta = throughput(&rec, a.t_total).unwrap();
            let tb = throughput(&scaled, b.t_total).unwrap();
            prop_assert!(oracle::rel_close(tb, ta / k, 1e-12));
        }
    }

    #[test]
    fn power_of_two_scaling_is_exact(rec in record(), hw in hw(), eff in eff(), shift in -8i32..8) {
        let k = 2f64.powi(shift);
        let scaled = WorkloadRecord {
            flops: rec.flops * k,
            mem_access_bytes: rec.mem_access_bytes * k,
            input_bytes: rec.input_bytes * k,
            weight_traffic_bytes: rec.weight_traffic_bytes * k,
            ..rec.clone()
        };
        let a = breakdown(&rec, &hw, &eff, OverlapMode::NoOverlap);
        let b = breakdown(&scaled, &hw, &eff, OverlapMode::NoOverlap);
        prop_assert_eq!(b.t_total, a.t_total * k);
    }

    #[test]
    fn weight_path_ratio_is_volume_free(sw in 1.0f64..1e12) {
        let hw = HardwareProfile::pai_baseline();
        let eff = EfficiencyModel::default();
        let rec = WorkloadRecord {
            job_id: "w".into(),
            arch: ArchitectureKind::PsWorker,
            num_cnodes: 8,
            batch_size: 1,
            flops: 0.0,
            mem_access_bytes: 0.0,
            input_bytes: 0.0,
            weight_traffic_bytes: sw,
            dense_weight_bytes: 0.0,
            embedding_weight_bytes: 0.0,
            measured_step_seconds: None,
            unmodeled_network_bytes: None,
        };
        let (_, ps) = weight_time(&rec, &hw, &eff, None);
        let (_, local) = weight_time(&rec, &hw, &eff, Some(ArchitectureKind::AllReduceLocal));
        let closed_form = (1.0 / (hw.ethernet_bandwidth * 0.7) + 1.0 / (hw.pcie_bandwidth * 0.7))
            / (1.0 / (hw.nvlink_bandwidth * 0.7));
        prop_assert!(oracle::rel_close(ps / local, closed_form, 1e-12));
        prop_assert!(oracle::rel_close(ps / local, 21.0, 1e-9));
    }

    #[test]
    fn components_never_grow_with_capacity(rec in record(), hw in hw(), eff in eff(), factor in 1.0f64..8.0, which in 0usize..10) {
        let mut hw2 = hw;
        let mut eff2 = eff;
        match which {
            0 => hw2.gpu_peak_flops *= factor,
            1 => hw2.gpu_mem_bandwidth *= factor,
            2 => hw2.pcie_bandwidth *= factor,
            3 => hw2.ethernet_bandwidth *= factor,
            4 => hw2.nvlink_bandwidth *= factor,
            5 => eff2.compute_eff = (eff.compute_eff * factor).min(1.0),
            6 => eff2.mem_eff = (eff.mem_eff * factor).min(1.0),
            7 => eff2.pcie_eff = (eff.pcie_eff * factor).min(1.0),
            8 => eff2.ethernet_eff = (eff.ethernet_eff * factor).min(1.0),
            _ => eff2.nvlink_eff = (eff.nvlink_eff * factor).min(1.0),
        }
        let a = breakdown(&rec, &hw, &eff, OverlapMode::NoOverlap);
        let b = breakdown(&rec, &hw2, &eff2, OverlapMode::NoOverlap);
        prop_assert!(b.t_data <= a.t_data);
        prop_assert!(b.t_compute_bound <= a.t_compute_bound);
        prop_assert!(b.t_memory_bound <= a.t_memory_bound);
        prop_assert!(b.t_weight <= a.t_weight);
        prop_assert!(b.t_total <= a.t_total);
    }

    #[test]
    fn projection_invariants(rec in record(), target in arch(), ov in overlap()) {
        let hw = HardwareProfile::pai_baseline();
        let eff = EfficiencyModel::default();
        let p = project(&rec, target, &hw, &eff, ov);
        match oracle::naive_projection(&rec, target, &hw, &eff, ov == OverlapMode::IdealOverlap) {
            None => prop_assert!(!p.is_feasible()),
            Some((step, thr)) => {
                let s = p.step_speedup.unwrap();
                let t = p.throughput_speedup.unwrap();
                if step.is_finite() {
                    prop_assert!(oracle::rel_close(s, step, 1e-9));
                    prop_assert!(oracle::rel_close(t, thr, 1e-9));
                }
                let ratio = f64::from(p.target_cnodes) / f64::from(p.source_cnodes);
                if s.is_finite() {
                    prop_assert!(oracle::rel_close(t, s * ratio, 1e-12));
                }
            }
        }
    }

    #[test]
    fn identity_projection_is_one(rec in record(), ov in overlap()) {
        let p = project(&rec, rec.arch, &HardwareProfile::pai_baseline(), &EfficiencyModel::default(), ov);
        prop_assert_eq!(p.step_speedup, Some(1.0));
        prop_assert_eq!(p.throughput_speedup, Some(1.0));
    }

    #[test]
    fn no_input_ps_to_local_never_slows(mut rec in record()) {
        rec.arch = ArchitectureKind::PsWorker;
        rec.num_cnodes = rec.num_cnodes.max(1);
        rec.input_bytes = 0.0;
        rec.embedding_weight_bytes = 0.0;
        rec.dense_weight_bytes = rec.dense_weight_bytes.min(1e9);
        let p = project(&rec, ArchitectureKind::AllReduceLocal, &HardwareProfile::pai_baseline(), &EfficiencyModel::default(), OverlapMode::NoOverlap);
        prop_assert!(p.step_speedup.unwrap() >= 1.0);
    }

    #[test]
    fn sweep_speedups_are_monotone_and_bounded(rec in record(), hw in hw(), which in 0usize..4) {
        let resource = Resource::ALL[which];
        let base = resource.get(&hw);
        let axis = SweepAxis::new(resource, vec![base * 0.5, base, base * 2.0, base * 4.0], base).unwrap();
        let eff = EfficiencyModel::default();
        let cells = hardware_sweep(&JobPopulation::new(vec![rec.clone()]), &[axis], &hw, &eff, OverlapMode::NoOverlap).unwrap();
        prop_assert_eq!(cells[1].speedup, 1.0);
        for pair in cells.windows(2) {
            prop_assert!(pair[1].speedup >= pair[0].speedup);
        }
        let b = breakdown(&rec, &hw, &eff, OverlapMode::NoOverlap);
        let residual = resource.residual_time(&b);
        if residual > 0.0 {
            for c in &cells {
                prop_assert!(c.speedup <= b.t_total / residual * (1.0 + 1e-12));
            }
        }
        for c in &cells {
            let changed = resource.set(&hw, c.candidate);
            let differing = [
                changed.gpu_peak_flops != hw.gpu_peak_flops,
                changed.gpu_mem_bandwidth != hw.gpu_mem_bandwidth,
                changed.pcie_bandwidth != hw.pcie_bandwidth,
                changed.ethernet_bandwidth != hw.ethernet_bandwidth,
                changed.nvlink_bandwidth != hw.nvlink_bandwidth,
                changed.gpu_mem_capacity != hw.gpu_mem_capacity,
            ].iter().filter(|&&d| d).count();
            prop_assert!(differing <= 1);
            prop_assert_eq!(differing == 1, c.candidate != base);
        }
    }

    #[test]
    fn trace_round_trip_is_bit_exact(recs in prop::collection::vec(record(), 0..20)) {
        let pop = JobPopulation::new(recs);
        let text = ingest::trace_to_string(&pop);
        let back = ingest::parse_trace(text.as_bytes(), ingest::ParseMode::Strict).unwrap();
        prop_assert_eq!(back.population, pop);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn aggregates_match_oracle_and_ignore_order(
        recs in prop::collection::vec(record(), 1..100),
        ov in overlap(),
        seed in any::<u64>(),
    ) {
        let hw = HardwareProfile::pai_baseline();
        let eff = EfficiencyModel::default();
        let pop = JobPopulation::new(recs.clone());
        let mut shuffled = recs.clone();
        // deterministic Fisher-Yates driven by the seed
        let mut state = seed | 1;
        for i in (1..shuffled.len()).rev() {
            state ^= state << 13;
            state ^= state >> 7;
            state ^= state << 17;
            shuffled.swap(i, (state % (i as u64 + 1)) as usize);
        }
        let permuted = JobPopulation::new(shuffled);

        let w = weighted_breakdown(&pop, &hw, &eff, ov).unwrap();
        prop_assert_eq!(w, weighted_breakdown(&permuted, &hw, &eff, ov).unwrap());
        for comp in ShareComponent::ALL {
            let (job, cnode) = oracle::naive_means(&recs, oracle::component_index(comp.label()), &hw, &eff);
            prop_assert!((w.job_level.get(comp) - job).abs() <= 1e-9);
            prop_assert!((w.cnode_level.get(comp) - cnode).abs() <= 1e-9);

            for level in [AggregationLevel::Job, AggregationLevel::Cnode] {
                let cdf = share_cdf(&pop, comp, &hw, &eff, ov, level).unwrap();
                prop_assert_eq!(&cdf, &share_cdf(&permuted, comp, &hw, &eff, ov, level).unwrap());
                let samples: Vec<(f64, f64)> = recs.iter().map(|r| {
                    let s = oracle::naive_record_times(r, &hw, &eff).shares()[oracle::component_index(comp.label())];
                    let wgt = if level == AggregationLevel::Job { 1.0 } else { r.num_cnodes as f64 };
                    (s, wgt)
                }).collect();
                // the library and the oracle may round a share differently,
                // so compare by evaluating both step functions at the oracle's x
                for (x, f) in oracle::naive_cdf(&samples) {
                    let lib = cdf.eval(x * (1.0 + 1e-12) + 1e-300);
                    prop_assert!((lib - f).abs() <= 1e-9 || cdf.points().iter().any(|p| (p.x - x).abs() <= 1e-12), "x={} lib={} oracle={}", x, lib, f);
                }
                let last = cdf.points().last().unwrap().cumulative;
                prop_assert!((last - 1.0).abs() <= 1e-12);
                for pair in cdf.points().windows(2) {
                    prop_assert!(pair[1].cumulative >= pair[0].cumulative);
                    prop_assert!(pair[1].x > pair[0].x);
                }
            }
        }

        let comp = composition(&pop).unwrap();
        prop_assert_eq!(&comp, &composition(&permuted).unwrap());
        for c in &comp {
            let (jf, cf) = oracle::naive_composition(&recs, c.arch);
            prop_assert!((c.job_fraction - jf).abs() <= 1e-9);
            prop_assert!((c.cnode_fraction - cf).abs() <= 1e-9);
        }

        for target in [ArchitectureKind::AllReduceLocal, ArchitectureKind::AllReduceCluster] {
            let prof = population_speedup_profile(&pop, target, &hw, &eff, ov).unwrap();
            let perm = population_speedup_profile(&permuted, target, &hw, &eff, ov).unwrap();
            prop_assert_eq!(&prof.summary, &perm.summary);
            let mut infeasible = 0usize;
            let mut thr_up = 0usize;
            let mut step_up = 0usize;
            for r in &recs {
                match oracle::naive_projection(r, target, &hw, &eff, ov == OverlapMode::IdealOverlap) {
                    None => infeasible += 1,
                    Some((s, t)) => {
                        if oracle::is_speedup(s) { step_up += 1; }
                        if oracle::is_speedup(t) { thr_up += 1; }
                    }
                }
            }
            let n = recs.len() as f64;
            prop_assert!((prof.summary.fraction_infeasible - infeasible as f64 / n).abs() <= 1e-9);
            prop_assert!((prof.summary.fraction_step_sped_up - step_up as f64 / n).abs() <= 1e-9);
            prop_assert!((prof.summary.fraction_throughput_sped_up - thr_up as f64 / n).abs() <= 1e-9);
        }
    }
}

#[test]
fn equal_cnodes_make_levels_agree() {
    let spec = ingest::SynthSpec::with_defaults(50, 3);
    let mut pop = ingest::synth_population(&spec).unwrap();
    for r in &mut pop.records {
        r.arch = ArchitectureKind::PsWorker;
        r.num_cnodes = 4;
    }
    let w = weighted_breakdown(&pop, &HardwareProfile::pai_baseline(), &EfficiencyModel::default(), OverlapMode::NoOverlap).unwrap();
    for comp in ShareComponent::ALL {
        assert!((w.job_level.get(comp) - w.cnode_level.get(comp)).abs() <= 1e-12);
    }
}
