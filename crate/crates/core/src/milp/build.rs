use serde::{Deserialize, Serialize};

use super::model::{Family, LinearModel, Sense, VarId, VarKey, VarKind};
use crate::domain::{Instance, Subprocess};
use crate::energy::EnergyModel;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelOptions {
    /// Adds `Z_{b-1} <= Z_b`.
    pub symmetry_break: bool,
    /// Per-family big-M values instead of one loose global constant.
    pub tight_big_m: bool,
    /// Multiplies preheat and cool times by `Z_b` so unopened batches cost
    /// nothing. Off reproduces the constant-offset formulation.
    pub gate_ph_co: bool,
}

impl Default for ModelOptions {
    fn default() -> Self {
        ModelOptions { symmetry_break: true, tight_big_m: true, gate_ph_co: true }
    }
}

/// Big-M constant per constraint family.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BigMTable {
    pub c1: f64,
    pub c10: f64,
    pub c14_c17: f64,
    pub c15_c16: f64,
    pub c18: f64,
    pub c19: f64,
    pub c20: f64,
    pub c21: f64,
    pub c32: f64,
}

impl BigMTable {
    fn uniform(m: f64) -> Self {
        BigMTable { c1: m, c10: m, c14_c17: m, c15_c16: m, c18: m, c19: m, c20: m, c21: m, c32: m }
    }
}

struct Extremes {
    length: f64,
    width: f64,
    height: f64,
    support: f64,
}

fn extremes(instance: &Instance) -> Result<Extremes> {
    if instance.parts.is_empty() {
        return Err(Error::Model("instance has no parts".into()));
    }
    let mut e = Extremes { length: 0.0, width: 0.0, height: 0.0, support: 0.0 };
    for j in 0..instance.parts.len() {
        for o in &instance.part_type_of(j).orientations {
            e.length = e.length.max(o.length);
            e.width = e.width.max(o.width);
            e.height = e.height.max(o.height);
            e.support = e.support.max(o.support_volume);
        }
    }
    Ok(e)
}

/// Tight big-M values, one per constraint family.
pub fn big_m_values(instance: &Instance) -> Result<BigMTable> {
    let e = extremes(instance)?;
    let m = &instance.machine;
    Ok(BigMTable {
        c1: instance.parts.len() as f64,
        c10: e.height,
        c14_c17: e.length,
        c15_c16: e.width,
        c18: e.length + m.platform_length,
        c19: e.width + m.platform_length,
        c20: e.width + m.platform_width,
        c21: e.length + m.platform_width,
        c32: e.support,
    })
}

/// The single global constant used when tight big-Ms are disabled.
pub fn loose_big_m(instance: &Instance) -> Result<f64> {
    let e = extremes(instance)?;
    let m = &instance.machine;
    let base = [m.platform_length, m.platform_width, m.platform_height, instance.parts.len() as f64, e.support]
        .into_iter()
        .fold(0.0, f64::max);
    Ok(base * 10.0)
}

/// Builds the batching, orientation and nesting MILP with `n_batches`
/// available batches. Infeasibility for too few batches is left to the
/// solver.
pub fn build_model(instance: &Instance, n_batches: usize, options: ModelOptions) -> Result<LinearModel> {
    if n_batches == 0 {
        return Err(Error::Model("at least one batch is required".into()));
    }
    let energy = EnergyModel::for_instance(instance)?;
    let big_m = if options.tight_big_m { big_m_values(instance)? } else { BigMTable::uniform(loose_big_m(instance)?) };

    let n = instance.parts.len();
    let machine = &instance.machine;
    let (lw, ww, hw) = (machine.platform_length, machine.platform_width, machine.platform_height);
    let margin = machine.boundary_margin;
    let gap = machine.part_gap;
    let batches = 0..n_batches;
    let mut model = LinearModel::with_shape(n, n_batches, options);

    let mut x = vec![vec![VarId(0); n_batches]; n];
    for (j, row) in x.iter_mut().enumerate() {
        for b in batches.clone() {
            row[b] = model.add_key(VarKey::Assign { part: j, batch: b }, VarKind::Binary, 0.0, None);
        }
    }
    let y: Vec<Vec<VarId>> = (0..n)
        .map(|j| {
            (0..instance.orientation_count(j))
                .map(|k| model.add_key(VarKey::Orient { part: j, orientation: k }, VarKind::Binary, 0.0, None))
                .collect()
        })
        .collect();
    let z: Vec<VarId> =
        batches.clone().map(|b| model.add_key(VarKey::Open { batch: b }, VarKind::Binary, 0.0, None)).collect();
    let pos_x: Vec<VarId> = (0..n)
        .map(|j| model.add_key(VarKey::PosX { part: j }, VarKind::Continuous, margin, Some(lw - margin)))
        .collect();
    let pos_y: Vec<VarId> = (0..n)
        .map(|j| model.add_key(VarKey::PosY { part: j }, VarKind::Continuous, margin, Some(ww - margin)))
        .collect();
    let turn: Vec<VarId> =
        (0..n).map(|j| model.add_key(VarKey::Turn { part: j }, VarKind::Binary, 0.0, None)).collect();
    let pairs: Vec<(usize, usize)> =
        (0..n).flat_map(|a| (0..n).filter(move |&b| b != a).map(move |b| (a, b))).collect();
    let left: Vec<VarId> = pairs
        .iter()
        .map(|&(a, b)| model.add_key(VarKey::Left { first: a, second: b }, VarKind::Binary, 0.0, None))
        .collect();
    let below: Vec<VarId> = pairs
        .iter()
        .map(|&(a, b)| model.add_key(VarKey::Below { first: a, second: b }, VarKind::Binary, 0.0, None))
        .collect();
    let height: Vec<VarId> =
        batches.clone().map(|b| model.add_key(VarKey::Height { batch: b }, VarKind::Continuous, 0.0, None)).collect();
    let e_batch: Vec<VarId> =
        batches.clone().map(|b| model.add_key(VarKey::Energy { batch: b }, VarKind::Continuous, 0.0, None)).collect();
    let mut time = vec![[VarId(0); Subprocess::COUNT]; n_batches];
    for (b, row) in time.iter_mut().enumerate() {
        for l in Subprocess::ALL {
            row[l.index()] = model.add_key(VarKey::Time { subprocess: l, batch: b }, VarKind::Continuous, 0.0, None);
        }
    }
    let mut support = vec![vec![VarId(0); n_batches]; n];
    for (j, row) in support.iter_mut().enumerate() {
        for b in batches.clone() {
            row[b] = model.add_key(VarKey::Support { part: j, batch: b }, VarKind::Continuous, 0.0, None);
        }
    }

    let t = |b: usize, l: Subprocess| time[b][l.index()];
    let oriented = |j: usize, f: &dyn Fn(usize) -> f64| -> Vec<(VarId, f64)> {
        y[j].iter().enumerate().map(|(k, &v)| (v, f(k))).collect()
    };
    let geom = |j: usize, k: usize| instance.part_type_of(j).orientations[k];

    for b in batches.clone() {
        let mut terms: Vec<(VarId, f64)> = (0..n).map(|j| (x[j][b], 1.0)).collect();
        terms.push((z[b], -big_m.c1));
        model.add_constraint(format!("c1_b{}", b + 1), Family::C1, terms, Sense::Le, 0.0);
    }
    for j in 0..n {
        let terms = x[j].iter().map(|&v| (v, 1.0)).collect();
        model.add_constraint(format!("c2_j{}", j + 1), Family::C2, terms, Sense::Eq, 1.0);
    }
    for j in 0..n {
        let terms = y[j].iter().map(|&v| (v, 1.0)).collect();
        model.add_constraint(format!("c3_j{}", j + 1), Family::C3, terms, Sense::Eq, 1.0);
    }

    let scan_rows = [
        (Family::C4, "c4", Subprocess::Sb, energy.border_divisor()),
        (Family::C5, "c5", Subprocess::Fc, energy.contour_divisor()),
    ];
    for (family, code, l, divisor) in scan_rows {
        for b in batches.clone() {
            let mut terms: Vec<(VarId, f64)> =
                (0..n).map(|j| (x[j][b], instance.part_type_of(j).surface_area / divisor)).collect();
            terms.push((t(b, l), -1.0));
            model.add_constraint(format!("{code}_b{}", b + 1), family, terms, Sense::Le, 0.0);
        }
    }
    for b in batches.clone() {
        let mut terms: Vec<(VarId, f64)> =
            (0..n).map(|j| (x[j][b], instance.part_type_of(j).volume / energy.part_rate())).collect();
        terms.push((t(b, Subprocess::Vh), -1.0));
        model.add_constraint(format!("c6_b{}", b + 1), Family::C6, terms, Sense::Le, 0.0);
    }

    for (family, code, l, duration) in [
        (Family::C8, "c8", Subprocess::Ph, energy.preheat_time()),
        (Family::C9, "c9", Subprocess::Co, energy.cool_time()),
    ] {
        for b in batches.clone() {
            let mut terms = vec![(t(b, l), 1.0)];
            let rhs = if options.gate_ph_co {
                terms.push((z[b], -duration));
                0.0
            } else {
                duration
            };
            model.add_constraint(format!("{code}_b{}", b + 1), family, terms, Sense::Eq, rhs);
        }
    }

    for j in 0..n {
        for b in batches.clone() {
            let mut terms = vec![(height[b], 1.0)];
            terms.extend(oriented(j, &|k| -geom(j, k).height));
            terms.push((x[j][b], -big_m.c10));
            model.add_constraint(format!("c10_j{}_b{}", j + 1, b + 1), Family::C10, terms, Sense::Ge, -big_m.c10);
        }
    }
    for b in batches.clone() {
        let terms =
            vec![(height[b], energy.recoat_layer_time() / energy.layer_thickness()), (t(b, Subprocess::Rc), -1.0)];
        model.add_constraint(format!("c11_b{}", b + 1), Family::C11, terms, Sense::Le, 0.0);
    }
    for b in batches.clone() {
        let mut terms = vec![(e_batch[b], 1.0)];
        for l in Subprocess::ALL {
            terms.push((t(b, l), -energy.subprocess_power(l)));
        }
        model.add_constraint(format!("c12_b{}", b + 1), Family::C12, terms, Sense::Ge, 0.0);
    }
    for b in batches.clone() {
        model.add_constraint(format!("c13_b{}", b + 1), Family::C13, vec![(height[b], 1.0)], Sense::Le, hw);
    }

    // Boundary: O_j = 1 puts the length along x.
    for j in 0..n {
        let length = |k: usize| geom(j, k).length;
        let width = |k: usize| geom(j, k).width;
        let rows: [(Family, VarId, &dyn Fn(usize) -> f64, f64, f64, f64); 4] = [
            (Family::C14, pos_x[j], &length, big_m.c14_c17, lw, 1.0),
            (Family::C15, pos_x[j], &width, big_m.c15_c16, lw, -1.0),
            (Family::C16, pos_y[j], &width, big_m.c15_c16, ww, 1.0),
            (Family::C17, pos_y[j], &length, big_m.c14_c17, ww, -1.0),
        ];
        for (family, coord, extent, m, side, sign) in rows {
            let mut terms = vec![(coord, 1.0)];
            terms.extend(oriented(j, extent));
            terms.push((turn[j], sign * m));
            let rhs = side - margin + if sign > 0.0 { m } else { 0.0 };
            model.add_constraint(format!("{}_j{}", family.code(), j + 1), family, terms, Sense::Le, rhs);
        }
    }

    // Non-overlap for ordered pairs.
    for (p, &(a, b)) in pairs.iter().enumerate() {
        let length = |k: usize| geom(a, k).length;
        let width = |k: usize| geom(a, k).width;
        let rows: [(Family, &[VarId], VarId, &dyn Fn(usize) -> f64, f64, f64); 4] = [
            (Family::C18, &pos_x, left[p], &length, big_m.c18, 1.0),
            (Family::C19, &pos_x, left[p], &width, big_m.c19, -1.0),
            (Family::C20, &pos_y, below[p], &width, big_m.c20, 1.0),
            (Family::C21, &pos_y, below[p], &length, big_m.c21, -1.0),
        ];
        for (family, coord, relation, extent, m, sign) in rows {
            let m = m + gap;
            let mut terms = vec![(coord[a], 1.0), (coord[b], -1.0)];
            terms.extend(oriented(a, extent));
            terms.push((relation, m));
            terms.push((turn[a], sign * m));
            let rhs = if sign > 0.0 { 2.0 * m } else { m } - gap;
            let name = format!("{}_j{}_j{}", family.code(), a + 1, b + 1);
            model.add_constraint(name, family, terms, Sense::Le, rhs);
        }
    }

    for a in 0..n {
        for b in a + 1..n {
            let ab = pairs.iter().position(|&q| q == (a, b)).expect("pair exists");
            let ba = pairs.iter().position(|&q| q == (b, a)).expect("pair exists");
            for k in batches.clone() {
                let terms = vec![
                    (left[ab], 1.0),
                    (below[ab], 1.0),
                    (left[ba], 1.0),
                    (below[ba], 1.0),
                    (x[a][k], -1.0),
                    (x[b][k], -1.0),
                ];
                let name = format!("c22_j{}_j{}_b{}", a + 1, b + 1, k + 1);
                model.add_constraint(name, Family::C22, terms, Sense::Ge, -1.0);
            }
        }
    }

    if options.symmetry_break {
        for b in 1..n_batches {
            let terms = vec![(z[b - 1], 1.0), (z[b], -1.0)];
            model.add_constraint(format!("c31_b{}", b + 1), Family::C31, terms, Sense::Le, 0.0);
        }
    }

    for j in 0..n {
        for b in batches.clone() {
            let mut terms = vec![(support[j][b], 1.0)];
            terms.extend(oriented(j, &|k| -geom(j, k).support_volume));
            terms.push((x[j][b], -big_m.c32));
            model.add_constraint(format!("c32_j{}_b{}", j + 1, b + 1), Family::C32, terms, Sense::Ge, -big_m.c32);
        }
    }
    for b in batches.clone() {
        let mut terms: Vec<(VarId, f64)> = (0..n).map(|j| (support[j][b], 1.0 / energy.support_rate())).collect();
        terms.push((t(b, Subprocess::Ss), -1.0));
        model.add_constraint(format!("c33_b{}", b + 1), Family::C33, terms, Sense::Le, 0.0);
    }

    model.set_objective(e_batch.iter().map(|&v| (v, 1.0)).collect());
    Ok(model)
}
