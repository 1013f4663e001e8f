use std::collections::HashMap;
use std::fmt::Write;

use super::model::{LinearModel, VarKey, VarKind};
use crate::domain::{Batch, Instance, Placement, Plan, Subprocess};
use crate::energy::EnergyModel;
use crate::error::{Error, Result};
use crate::packing::{check_plan_geometry, footprint, GEOMETRY_TOLERANCE};

/// Binaries this close to 0 or 1 are rounded silently.
pub const BINARY_ROUND_TOLERANCE: f64 = 1e-5;
/// Binaries farther than this from 0 or 1 are rejected.
pub const BINARY_REJECT_TOLERANCE: f64 = 1e-4;

/// Values for every model variable, indexed by `VarId`.
#[derive(Debug, Clone, PartialEq)]
pub struct Assignment {
    pub values: Vec<f64>,
    /// Objective stated in the solution file, if any.
    pub stated_objective: Option<f64>,
    pub warnings: Vec<String>,
}

impl Assignment {
    pub fn zeros(model: &LinearModel) -> Self {
        Assignment { values: vec![0.0; model.num_variables()], stated_objective: None, warnings: Vec::new() }
    }

    pub fn value(&self, model: &LinearModel, key: VarKey) -> Option<f64> {
        model.var(key).map(|v| self.values[v.0])
    }
}

/// Reads "name value" lines. Lines starting with '#' are comments and an
/// "=obj= value" line is checked against the objective recomputed from the
/// values. Variables that do not appear are zero.
pub fn parse_solution(text: &str, model: &LinearModel) -> Result<Assignment> {
    let names: HashMap<&str, usize> = model.variables().iter().enumerate().map(|(i, v)| (v.name.as_str(), i)).collect();
    let mut out = Assignment::zeros(model);
    for (n, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let mut fields = line.split_whitespace();
        let (Some(name), Some(value), None) = (fields.next(), fields.next(), fields.next()) else {
            return Err(Error::Solution(format!("line {}: expected 'name value'", n + 1)));
        };
        let value: f64 =
            value.parse().map_err(|_| Error::Solution(format!("line {}: '{value}' is not a number", n + 1)))?;
        if name == "=obj=" {
            out.stated_objective = Some(value);
            continue;
        }
        let &i =
            names.get(name).ok_or_else(|| Error::Solution(format!("line {}: unknown variable '{name}'", n + 1)))?;
        out.values[i] = value;
    }

    for (v, x) in model.variables().iter().zip(out.values.iter_mut()) {
        if v.kind != VarKind::Binary {
            continue;
        }
        let r = x.round().clamp(0.0, 1.0);
        let off = (*x - r).abs();
        if off > BINARY_REJECT_TOLERANCE {
            return Err(Error::Solution(format!("non-integral binary {} = {}", v.name, x)));
        }
        if off > BINARY_ROUND_TOLERANCE {
            out.warnings.push(format!("binary {} = {} rounded to {}", v.name, x, r));
        }
        *x = r;
    }

    if let Some(stated) = out.stated_objective {
        let computed = model.objective_value(&out.values);
        if (computed - stated).abs() > 1e-6 * stated.abs().max(1.0) {
            out.warnings.push(format!("stated objective {stated} differs from recomputed {computed}"));
        }
    }
    Ok(out)
}

/// Writes an assignment in the format read by [`parse_solution`]; zero
/// values are omitted.
pub fn write_solution(model: &LinearModel, values: &[f64]) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "=obj= {}", model.objective_value(values));
    for (v, &x) in model.variables().iter().zip(values) {
        if x != 0.0 {
            let _ = writeln!(out, "{} {}", v.name, x);
        }
    }
    out
}

fn binary(values: &[f64], model: &LinearModel, key: VarKey) -> bool {
    model.var(key).is_some_and(|v| values[v.0] >= 0.5)
}

/// Turns an integral assignment into a plan. Batches keep the model's order;
/// unopened batches are dropped.
pub fn decode_plan(values: &[f64], model: &LinearModel, instance: &Instance) -> Result<Plan> {
    if values.len() != model.num_variables() {
        return Err(Error::Solution("assignment does not match the model".into()));
    }
    if model.n_parts() != instance.parts.len() {
        return Err(Error::Solution("model was built for a different instance".into()));
    }
    let mut slots: Vec<Vec<Placement>> = vec![Vec::new(); model.n_batches()];
    for (j, part) in instance.parts.iter().enumerate() {
        let id = &part.instance_id;
        let batches: Vec<usize> =
            (0..model.n_batches()).filter(|&b| binary(values, model, VarKey::Assign { part: j, batch: b })).collect();
        let &[b] = batches.as_slice() else {
            return Err(Error::Solution(format!("part '{id}' is assigned to {} batches", batches.len())));
        };
        let orientations: Vec<usize> = (0..instance.orientation_count(j))
            .filter(|&k| binary(values, model, VarKey::Orient { part: j, orientation: k }))
            .collect();
        let &[k] = orientations.as_slice() else {
            return Err(Error::Solution(format!("part '{id}' selects {} orientations", orientations.len())));
        };
        let coord = |key| {
            let v = values[model.var(key).expect("registered").0];
            if v.abs() < GEOMETRY_TOLERANCE {
                0.0
            } else {
                v
            }
        };
        slots[b].push(Placement {
            instance_id: id.clone(),
            orientation: k,
            x: coord(VarKey::PosX { part: j }),
            y: coord(VarKey::PosY { part: j }),
            rotated: binary(values, model, VarKey::Turn { part: j }),
        });
    }
    let plan = Plan {
        batches: slots
            .into_iter()
            .filter(|p| !p.is_empty())
            .enumerate()
            .map(|(index, placements)| Batch { index, placements })
            .collect(),
    };
    let violations = check_plan_geometry(&plan, instance);
    if let Some(v) = violations.first() {
        return Err(Error::Solution(format!(
            "decoded plan violates geometry ({} violations, first {:?} in batch {})",
            violations.len(),
            v.kind,
            v.batch
        )));
    }
    Ok(plan)
}

/// Expresses a plan as a model assignment with every time variable at its
/// lower bound. The plan's batches occupy the last slots so the
/// symmetry-breaking rows hold.
///
/// Recoat time is taken as `t_r0 · H / Δy`, as in the model; the evaluator
/// rounds the slice count up instead.
pub fn encode_plan(plan: &Plan, model: &LinearModel, instance: &Instance) -> Result<Vec<f64>> {
    plan.check_membership(instance)?;
    let n_b = model.n_batches();
    if plan.batches.len() > n_b {
        return Err(Error::Model(format!("plan uses {} batches but the model has {n_b}", plan.batches.len())));
    }
    let energy = EnergyModel::for_instance(instance)?;
    let gap = instance.machine.part_gap;
    let mut values = vec![0.0; model.num_variables()];
    let mut set = |key: VarKey, v: f64| -> Result<()> {
        let id = model.var(key).ok_or_else(|| Error::Model(format!("model has no variable {key}")))?;
        values[id.0] = v;
        Ok(())
    };
    let offset = n_b - plan.batches.len();
    let gated = model.options().gate_ph_co;

    for b in 0..n_b {
        let opened = b >= offset;
        set(VarKey::Open { batch: b }, if opened { 1.0 } else { 0.0 })?;
        let mut t = [0.0; Subprocess::COUNT];
        if opened || !gated {
            t[Subprocess::Ph.index()] = energy.preheat_time();
            t[Subprocess::Co.index()] = energy.cool_time();
        }
        if opened {
            let batch = &plan.batches[b - offset];
            let mut surface = 0.0;
            let mut volume = 0.0;
            let mut support = 0.0;
            let mut height: f64 = 0.0;
            let mut boxes = Vec::new();
            for p in &batch.placements {
                let j = instance.part_index(&p.instance_id).expect("checked membership");
                let pt = instance.part_type_of(j);
                let o = instance.orientation(j, p.orientation)?;
                set(VarKey::Assign { part: j, batch: b }, 1.0)?;
                set(VarKey::Orient { part: j, orientation: p.orientation }, 1.0)?;
                set(VarKey::PosX { part: j }, p.x)?;
                set(VarKey::PosY { part: j }, p.y)?;
                set(VarKey::Turn { part: j }, if p.rotated { 1.0 } else { 0.0 })?;
                set(VarKey::Support { part: j, batch: b }, o.support_volume)?;
                surface += pt.surface_area;
                volume += pt.volume;
                support += o.support_volume;
                height = height.max(o.height);
                let fp = footprint(o, p.rotated);
                boxes.push((j, p.x, p.y, fp.length, fp.width));
            }
            for &(a, xa, ya, la, wa) in &boxes {
                for &(c, xc, yc, _, _) in &boxes {
                    if a == c {
                        continue;
                    }
                    let tol = GEOMETRY_TOLERANCE;
                    if xa + la + gap <= xc + tol {
                        set(VarKey::Left { first: a, second: c }, 1.0)?;
                    }
                    if ya + wa + gap <= yc + tol {
                        set(VarKey::Below { first: a, second: c }, 1.0)?;
                    }
                }
            }
            set(VarKey::Height { batch: b }, height)?;
            t[Subprocess::Sb.index()] = surface / energy.border_divisor();
            t[Subprocess::Fc.index()] = surface / energy.contour_divisor();
            t[Subprocess::Vh.index()] = volume / energy.part_rate();
            t[Subprocess::Ss.index()] = support / energy.support_rate();
            t[Subprocess::Rc.index()] = energy.recoat_layer_time() * height / energy.layer_thickness();
        }
        let mut e = 0.0;
        for l in Subprocess::ALL {
            set(VarKey::Time { subprocess: l, batch: b }, t[l.index()])?;
            e += energy.subprocess_power(l) * t[l.index()];
        }
        set(VarKey::Energy { batch: b }, e)?;
    }
    // Unassigned parts still need an orientation.
    for j in 0..instance.parts.len() {
        let chosen = (0..instance.orientation_count(j))
            .any(|k| model.var(VarKey::Orient { part: j, orientation: k }).is_some_and(|v| values[v.0] == 1.0));
        if !chosen {
            return Err(Error::Model(format!("part {} has no orientation", j + 1)));
        }
    }
    Ok(values)
}

/// Violated rows, bounds and integrality requirements of an assignment.
pub fn check_assignment(model: &LinearModel, values: &[f64], tol: f64) -> Vec<String> {
    model.violations(values, tol)
}
