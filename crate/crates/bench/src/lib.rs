//! Inputs shared by the benchmarks.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use slmbatch::solver::construct_initial;
use slmbatch::{catalog, Instance, OrientationGeometry, PartInstance, PartType, Plan};

/// Feasible greedy plan for a catalogue instance.
pub fn greedy_plan(instance: &Instance) -> Plan {
    construct_initial(instance, &mut ChaCha8Rng::seed_from_u64(0)).expect("catalogue instances are feasible")
}

/// `n` distinct parts with two orientations each on a 100 mm platform.
pub fn tiny_instance(n: usize) -> Instance {
    let types: Vec<PartType> = (0..n)
        .map(|i| {
            let s = 20.0 + 7.0 * i as f64;
            PartType {
                id: format!("t{i}"),
                volume: 2000.0 + 500.0 * i as f64,
                surface_area: 1500.0 + 200.0 * i as f64,
                orientations: vec![
                    OrientationGeometry::new(s, 30.0, 15.0, 400.0),
                    OrientationGeometry::new(30.0, 15.0, s, 100.0),
                ],
            }
        })
        .collect();
    let parts = (0..n).map(|i| PartInstance { instance_id: format!("t{i}-1"), part_type: i }).collect();
    let mut machine = catalog::reference_machine();
    machine.platform_length = 100.0;
    machine.platform_width = 100.0;
    Instance::new(machine, catalog::reference_process(), types, parts).expect("part types exist")
}
