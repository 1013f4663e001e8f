//! Property tests over randomly generated instances and plans.

mod common;

use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use slmbatch::milp::{
    build_model, check_assignment, decode_plan, encode_plan, parse_solution, write_solution, ModelOptions,
};
use slmbatch::packing::check_plan_geometry;
use slmbatch::solver::{brute_force_optimal, construct_initial, local_search, BruteForceLimits, SearchBudget};
use slmbatch::{catalog, plan_energy, Instance};

use common::{random_plan, random_tiny_instance, rel_diff};

fn instance_from(seed: u64, max_parts: usize) -> Instance {
    random_tiny_instance(&mut ChaCha8Rng::seed_from_u64(seed), max_parts, 2)
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 64, ..ProptestConfig::default() })]

    #[test]
    fn breakdown_sums_agree(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let inst = catalog::ins_20(7);
        let plan = random_plan(&mut rng, &inst, 10);
        let e = plan_energy(&plan, &inst).unwrap();
        let f: f64 = e.by_subsystem.iter().sum();
        let l: f64 = e.by_subprocess.iter().sum();
        let b: f64 = e.by_batch.iter().sum();
        prop_assert!(rel_diff(f, e.total) <= 1e-9);
        prop_assert!(rel_diff(l, e.total) <= 1e-9);
        prop_assert!(rel_diff(b, e.total) <= 1e-9);
        prop_assert!(e.by_subsystem.iter().chain(&e.by_subprocess).all(|&v| v >= 0.0));
    }

    #[test]
    fn energy_ignores_coordinates_and_rotation(seed in any::<u64>(), dx in -300.0..300.0f64, dy in -300.0..300.0f64) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let inst = catalog::ins_20(5);
        let plan = random_plan(&mut rng, &inst, 6);
        let e = plan_energy(&plan, &inst).unwrap();
        let mut moved = plan.clone();
        for p in moved.batches.iter_mut().flat_map(|b| b.placements.iter_mut()) {
            p.x += dx;
            p.y += dy;
            p.rotated = !p.rotated;
        }
        prop_assert_eq!(plan_energy(&moved, &inst).unwrap(), e);
    }

    #[test]
    fn more_support_never_costs_less(seed in any::<u64>(), extra in 1.0..10_000.0f64) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let inst = catalog::ins_20(3);
        let plan = random_plan(&mut rng, &inst, 5);
        let before = plan_energy(&plan, &inst).unwrap().total;
        let mut heavier = inst.clone();
        for t in &mut heavier.part_types {
            for o in &mut t.orientations {
                o.support_volume += extra;
            }
        }
        prop_assert!(plan_energy(&plan, &heavier).unwrap().total > before);
    }

    #[test]
    fn splitting_a_batch_costs_more(seed in any::<u64>()) {
        // A second run repeats preheat and cooling and at least one layer.
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let inst = catalog::ins_20(2);
        let mut plan = random_plan(&mut rng, &inst, 3);
        let before = plan_energy(&plan, &inst).unwrap().total;
        let b = plan.batches.iter().position(|b| b.placements.len() > 1).unwrap();
        let p = plan.batches[b].placements.pop().unwrap();
        let index = plan.batches.len();
        plan.batches.push(slmbatch::Batch { index, placements: vec![p] });
        prop_assert!(plan_energy(&plan, &inst).unwrap().total > before);
    }

    #[test]
    fn encoded_optimum_satisfies_model_and_decodes_back(seed in any::<u64>(), symmetry in any::<bool>(), tight in any::<bool>()) {
        let inst = instance_from(seed, 4);
        let plan = brute_force_optimal(&inst, BruteForceLimits::default()).unwrap();
        let energy = plan_energy(&plan, &inst).unwrap().total;
        let options = ModelOptions { symmetry_break: symmetry, tight_big_m: tight, gate_ph_co: true };
        let model = build_model(&inst, inst.parts.len(), options).unwrap();
        let values = encode_plan(&plan, &model, &inst).unwrap();
        prop_assert_eq!(check_assignment(&model, &values, 1e-6), Vec::<String>::new());
        prop_assert!(rel_diff(model.objective_value(&values), energy) <= 1e-9);

        let parsed = parse_solution(&write_solution(&model, &values), &model).unwrap();
        prop_assert!(parsed.warnings.is_empty());
        let decoded = decode_plan(&parsed.values, &model, &inst).unwrap();
        prop_assert!(check_plan_geometry(&decoded, &inst).is_empty());
        prop_assert!(rel_diff(plan_energy(&decoded, &inst).unwrap().total, energy) <= 1e-12);
    }

    #[test]
    fn geometry_checker_accepts_solver_plans(seed in any::<u64>()) {
        let inst = instance_from(seed, 5);
        let plan = brute_force_optimal(&inst, BruteForceLimits::default()).unwrap();
        prop_assert!(check_plan_geometry(&plan, &inst).is_empty());
        prop_assert!(plan.check_membership(&inst).is_ok());
    }
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 24, ..ProptestConfig::default() })]

    #[test]
    fn search_is_bracketed_by_optimum_and_start(seed in any::<u64>()) {
        let inst = instance_from(seed, 5);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let start = construct_initial(&inst, &mut rng).unwrap();
        let budget = SearchBudget::new(200, 30.0, seed).unwrap();
        let improved = local_search(&inst, &start, budget).unwrap();
        let best = brute_force_optimal(&inst, BruteForceLimits::default()).unwrap();
        let e = |p| plan_energy(p, &inst).unwrap().total;
        prop_assert!(check_plan_geometry(&improved, &inst).is_empty());
        prop_assert!(e(&best) <= e(&improved) * (1.0 + 1e-9));
        prop_assert!(e(&improved) <= e(&start) * (1.0 + 1e-9));
    }
}

#[test]
fn search_usually_finds_the_optimum_on_tiny_instances() {
    let trials = 40;
    let mut hits = 0;
    for seed in 0..trials {
        let inst = instance_from(1000 + seed, 5);
        let budget = SearchBudget::new(500, 30.0, seed).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let start = construct_initial(&inst, &mut rng).unwrap();
        let found = plan_energy(&local_search(&inst, &start, budget).unwrap(), &inst).unwrap().total;
        let best = plan_energy(&brute_force_optimal(&inst, BruteForceLimits::default()).unwrap(), &inst).unwrap().total;
        if rel_diff(found, best) <= 1e-9 {
            hits += 1;
        }
    }
    assert!(hits * 10 >= trials * 8, "optimum found on {hits} of {trials} instances");
}
