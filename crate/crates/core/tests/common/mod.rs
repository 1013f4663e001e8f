//! Shared helpers for the integration tests: a HiGHS-backed solve hook and
//! random instance and plan generators.

#![allow(dead_code)]

use std::ffi::{CStr, CString};
use std::os::raw::c_void;
use std::path::PathBuf;
use std::sync::atomic::{AtomicUsize, Ordering};

use rand::seq::SliceRandom;
use rand::Rng;
use slmbatch::catalog;
use slmbatch::milp::{emit_lp, LinearModel, SolveOutcome};
use slmbatch::{Batch, Instance, OrientationGeometry, PartInstance, PartType, Placement, Plan};

const MODEL_STATUS_OPTIMAL: i32 = 7;
const MODEL_STATUS_INFEASIBLE: i32 = 8;

static COUNTER: AtomicUsize = AtomicUsize::new(0);

struct Highs(*mut c_void);

impl Drop for Highs {
    fn drop(&mut self) {
        unsafe { highs_sys::Highs_destroy(self.0) }
    }
}

fn temp_lp_path() -> PathBuf {
    let n = COUNTER.fetch_add(1, Ordering::Relaxed);
    std::env::temp_dir().join(format!("slmbatch-{}-{n}.lp", std::process::id()))
}

/// Optimum of the exported LP text according to HiGHS, values in model
/// order. Columns HiGHS dropped take their lower bound.
pub fn highs_solve(model: &LinearModel) -> SolveOutcome {
    let path = temp_lp_path();
    std::fs::write(&path, emit_lp(model).expect("model exports")).unwrap();
    let file = CString::new(path.to_str().unwrap()).unwrap();
    let h = Highs(unsafe { highs_sys::Highs_create() });
    let opt = |s: &str| CString::new(s).unwrap();
    let values = unsafe {
        highs_sys::Highs_setBoolOptionValue(h.0, opt("output_flag").as_ptr(), 0);
        highs_sys::Highs_setDoubleOptionValue(h.0, opt("mip_rel_gap").as_ptr(), 1e-10);
        highs_sys::Highs_setDoubleOptionValue(h.0, opt("mip_abs_gap").as_ptr(), 1e-9);
        highs_sys::Highs_setDoubleOptionValue(h.0, opt("time_limit").as_ptr(), 60.0);
        let status = highs_sys::Highs_readModel(h.0, file.as_ptr());
        std::fs::remove_file(&path).ok();
        assert!(status >= 0, "HiGHS could not read the exported model");
        highs_sys::Highs_run(h.0);
        match highs_sys::Highs_getModelStatus(h.0) as i32 {
            MODEL_STATUS_OPTIMAL => {}
            MODEL_STATUS_INFEASIBLE => return SolveOutcome::Infeasible,
            other => panic!("HiGHS ended with model status {other}"),
        }
        let n = highs_sys::Highs_getNumCol(h.0) as usize;
        let mut col = vec![0.0; n];
        highs_sys::Highs_getSolution(
            h.0,
            col.as_mut_ptr(),
            std::ptr::null_mut(),
            std::ptr::null_mut(),
            std::ptr::null_mut(),
        );
        model
            .variables()
            .iter()
            .map(|v| {
                let name = CString::new(v.name.as_str()).unwrap();
                let mut idx: highs_sys::HighsInt = -1;
                let found = highs_sys::Highs_getColByName(h.0, name.as_ptr(), &mut idx);
                if found >= 0 && idx >= 0 {
                    col[idx as usize]
                } else {
                    v.lower
                }
            })
            .collect()
    };
    SolveOutcome::Optimal(values)
}

/// HiGHS objective of a model; `None` when infeasible.
pub fn highs_optimum(model: &LinearModel) -> Option<(f64, Vec<f64>)> {
    match highs_solve(model) {
        SolveOutcome::Optimal(v) => Some((model.objective_value(&v), v)),
        SolveOutcome::Infeasible => None,
    }
}

pub fn highs_version() -> String {
    unsafe { CStr::from_ptr(highs_sys::Highs_version()).to_string_lossy().into_owned() }
}

pub fn rel_diff(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1e-300)
}

/// Reference machine on a 100 × 100 × 100 mm platform.
pub fn tiny_machine(gap: f64) -> slmbatch::MachineSpec {
    let mut m = catalog::reference_machine();
    m.platform_length = 100.0;
    m.platform_width = 100.0;
    m.platform_height = 100.0;
    m.part_gap = gap;
    m
}

/// Random part type whose heights are whole numbers of layers, so the
/// model's continuous recoat time equals the evaluator's slice count.
pub fn random_part_type<R: Rng + ?Sized>(rng: &mut R, id: String, orientations: usize) -> PartType {
    let layer = 0.03;
    let orientations = (0..orientations)
        .map(|_| {
            let length = rng.gen_range(10..=70) as f64;
            let width = rng.gen_range(10..=70) as f64;
            let height = rng.gen_range(100..=2000) as f64 * layer;
            let support = rng.gen_range(0..=5000) as f64;
            OrientationGeometry::new(length, width, height, support)
        })
        .collect();
    PartType {
        id,
        volume: rng.gen_range(500..=20_000) as f64,
        surface_area: rng.gen_range(300..=10_000) as f64,
        orientations,
    }
}

/// Random instance of `1..=max_parts` parts with `1..=max_orientations`
/// orientations each on the tiny platform.
pub fn random_tiny_instance<R: Rng + ?Sized>(rng: &mut R, max_parts: usize, max_orientations: usize) -> Instance {
    let n = rng.gen_range(1..=max_parts);
    let gap = *[0.0, 2.0].choose(rng).unwrap();
    let types: Vec<PartType> = (0..n)
        .map(|t| {
            let k = rng.gen_range(1..=max_orientations);
            random_part_type(rng, format!("p{t}"), k)
        })
        .collect();
    let parts = (0..n).map(|t| PartInstance { instance_id: format!("p{t}-1"), part_type: t }).collect();
    Instance::new(tiny_machine(gap), catalog::reference_process(), types, parts).unwrap()
}

/// Random partition of the instance's parts with random orientations,
/// rotations and coordinates. Not necessarily feasible.
pub fn random_plan<R: Rng + ?Sized>(rng: &mut R, instance: &Instance, max_batches: usize) -> Plan {
    let n_b = rng.gen_range(1..=max_batches.min(instance.parts.len()).max(1));
    let mut groups: Vec<Vec<usize>> = vec![Vec::new(); n_b];
    let mut order: Vec<usize> = (0..instance.parts.len()).collect();
    order.shuffle(rng);
    for (i, &j) in order.iter().enumerate() {
        let g = if i < n_b { i } else { rng.gen_range(0..n_b) };
        groups[g].push(j);
    }
    let lw = instance.machine.platform_length;
    let ww = instance.machine.platform_width;
    Plan {
        batches: groups
            .into_iter()
            .enumerate()
            .map(|(index, members)| Batch {
                index,
                placements: members
                    .into_iter()
                    .map(|j| Placement {
                        instance_id: instance.parts[j].instance_id.clone(),
                        orientation: rng.gen_range(0..instance.orientation_count(j)),
                        x: rng.gen_range(0..=(2.0 * lw) as i64) as f64 * 0.5,
                        y: rng.gen_range(0..=(2.0 * ww) as i64) as f64 * 0.5,
                        rotated: rng.gen_bool(0.5),
                    })
                    .collect(),
            })
            .collect(),
    }
}
