//! The bundled JSON fixtures agree with the built-in catalogue.

use std::collections::BTreeMap;
use std::path::Path;

use slmbatch::energy::{aggregate_energy, compare_plans, reconcile};
use slmbatch::files::{InstanceFile, PlanContent, PlanFile};
use slmbatch::{catalog, validate_instance, BatchAggregate, Subprocess};

fn read(name: &str) -> String {
    std::fs::read_to_string(Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures").join(name)).unwrap()
}

fn aggregates(name: &str) -> Vec<BatchAggregate> {
    match PlanFile::from_json(&read(name)).unwrap().content().unwrap() {
        PlanContent::Aggregates(a) => a,
        PlanContent::Placed(_) => panic!("{name} should hold aggregates"),
    }
}

#[test]
fn instance_fixtures_match_catalogue() {
    for o in [1, 3, 5, 7] {
        let file = InstanceFile::from_json(&read(&format!("ins_20_{o}.json"))).unwrap();
        assert_eq!(file, InstanceFile::from_instance(&catalog::ins_20(o)), "ins_20_{o}");
        let inst = file.to_instance().unwrap();
        assert_eq!(inst.parts.len(), 20);
        assert!(validate_instance(&inst).is_valid());
    }
}

#[test]
fn plan_fixtures_match_catalogue() {
    assert_eq!(aggregates("baseline_plan.json"), catalog::baseline_aggregates());
    assert_eq!(aggregates("optimized_plan.json"), catalog::optimized_aggregates());
    let slices: u64 = aggregates("baseline_plan.json").iter().map(|a| a.slices).sum();
    assert_eq!(slices, 3760);
}

#[test]
fn published_savings_fixture_matches_catalogue() {
    let raw: BTreeMap<Subprocess, f64> = serde_json::from_str(&read("published_savings.json")).unwrap();
    assert_eq!(raw, catalog::published_subprocess_savings());
}

#[test]
fn fixture_plans_reproduce_published_totals() {
    let m = catalog::reference_machine();
    let p = catalog::reference_process();
    let base = aggregate_energy(&aggregates("baseline_plan.json"), &m, &p).unwrap();
    let opt = aggregate_energy(&aggregates("optimized_plan.json"), &m, &p).unwrap();
    assert!((base.total / 1e6 - catalog::BASELINE_TOTAL_MJ).abs() < 0.01, "{}", base.total / 1e6);
    let s = compare_plans(&base, &opt).unwrap();
    let rows = reconcile(&s, &catalog::published_subprocess_savings(), 0.03);
    let flagged: Vec<_> = rows.iter().filter(|r| r.discrepancy).map(|r| r.subprocess).collect();
    assert_eq!(flagged, vec![Subprocess::Ss]);
}
