use std::cmp::Ordering;
use std::collections::HashMap;

use crate::domain::{Batch, Instance, Placement, Plan};
use crate::energy::EnergyModel;
use crate::error::{Error, Result};
use crate::milp::{encode_plan, LinearModel, SolveHook, SolveOutcome};
use crate::packing::{exhaustive_fit, footprint, Footprint, Platform, GEOMETRY_TOLERANCE};

/// Size limits for exhaustive enumeration.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BruteForceLimits {
    pub max_parts: usize,
    pub max_orientations: usize,
}

impl Default for BruteForceLimits {
    fn default() -> Self {
        BruteForceLimits { max_parts: 6, max_orientations: 3 }
    }
}

/// Energies within this relative distance count as equal when ranking
/// plans.
pub(crate) const ENERGY_TIE: f64 = 1e-9;

pub(crate) fn energy_cmp(a: f64, b: f64) -> Ordering {
    if (a - b).abs() <= ENERGY_TIE * a.abs().max(b.abs()) {
        Ordering::Equal
    } else {
        a.total_cmp(&b)
    }
}

#[derive(Debug, Clone)]
struct SubsetBest {
    energy: f64,
    /// Orientation per member, members in increasing part order.
    orientations: Vec<usize>,
    layout: Vec<(f64, f64, bool)>,
}

type FitKey = Vec<(u64, u64)>;

struct Enumerator<'a> {
    instance: &'a Instance,
    model: EnergyModel,
    platform: Platform,
    gap: f64,
    fits: HashMap<FitKey, Option<Vec<(f64, f64, bool)>>>,
}

impl Enumerator<'_> {
    /// Exact feasibility of a set of footprints; cached by footprint
    /// multiset.
    fn fit(&mut self, fps: &[Footprint]) -> Option<Vec<(f64, f64, bool)>> {
        let mut order: Vec<usize> = (0..fps.len()).collect();
        order.sort_by_key(|&i| (fps[i].length.to_bits(), fps[i].width.to_bits()));
        let key: FitKey = order.iter().map(|&i| (fps[i].length.to_bits(), fps[i].width.to_bits())).collect();
        let sorted = self
            .fits
            .entry(key)
            .or_insert_with(|| {
                let items: Vec<Footprint> = order.iter().map(|&i| fps[i]).collect();
                exhaustive_fit(&items, self.platform, self.gap)
            })
            .clone()?;
        let mut out = vec![(0.0, 0.0, true); fps.len()];
        for (pos, &i) in order.iter().enumerate() {
            out[i] = sorted[pos];
        }
        Some(out)
    }

    fn best_for(&mut self, members: &[usize]) -> Option<SubsetBest> {
        let inst = self.instance;
        let counts: Vec<usize> = members.iter().map(|&j| inst.orientation_count(j)).collect();
        let mut combos: Vec<(f64, Vec<usize>)> = Vec::new();
        let mut combo = vec![0; members.len()];
        loop {
            let tall = members.iter().zip(&combo).any(|(&j, &k)| {
                inst.part_type_of(j).orientations[k].height > inst.machine.platform_height + GEOMETRY_TOLERANCE
            });
            if !tall {
                let e = self.model.batch_total(inst, members.iter().copied().zip(combo.iter().copied()));
                combos.push((e, combo.clone()));
            }
            // Odometer increment, last position fastest.
            let mut i = members.len();
            loop {
                if i == 0 {
                    break;
                }
                i -= 1;
                combo[i] += 1;
                if combo[i] < counts[i] {
                    break;
                }
                combo[i] = 0;
            }
            if combo.iter().all(|&k| k == 0) {
                break;
            }
        }
        // Stable: equal energies keep lexicographic order.
        combos.sort_by(|a, b| a.0.total_cmp(&b.0));
        for (energy, orientations) in combos {
            let fps: Vec<Footprint> = members
                .iter()
                .zip(&orientations)
                .map(|(&j, &k)| footprint(&inst.part_type_of(j).orientations[k], true))
                .collect();
            if let Some(layout) = self.fit(&fps) {
                return Some(SubsetBest { energy, orientations, layout });
            }
        }
        None
    }
}

fn check_limits(instance: &Instance, limits: BruteForceLimits) -> Result<()> {
    let n = instance.parts.len();
    if n == 0 {
        return Err(Error::InvalidInput("instance has no parts".into()));
    }
    if n > limits.max_parts {
        return Err(Error::LimitsExceeded(format!("{n} parts, at most {} allowed", limits.max_parts)));
    }
    if let Some(j) = (0..n).find(|&j| instance.orientation_count(j) > limits.max_orientations) {
        return Err(Error::LimitsExceeded(format!(
            "part '{}' has {} orientations, at most {} allowed",
            instance.parts[j].instance_id,
            instance.orientation_count(j),
            limits.max_orientations
        )));
    }
    Ok(())
}

/// Minimum-energy plan over every orientation choice and every partition
/// of the parts into batches, with exact batch feasibility.
///
/// Among equal-energy plans the one with fewer batches wins, then the
/// lexicographically smallest (batch, orientation) vector.
pub fn brute_force_optimal(instance: &Instance, limits: BruteForceLimits) -> Result<Plan> {
    brute_force_capped(instance, limits, None)?
        .ok_or_else(|| Error::Infeasible("some part fits in no orientation".into()))
}

/// As [`brute_force_optimal`] with at most `max_batches` batches; `None`
/// when no plan fits the cap.
pub fn brute_force_capped(
    instance: &Instance,
    limits: BruteForceLimits,
    max_batches: Option<usize>,
) -> Result<Option<Plan>> {
    check_limits(instance, limits)?;
    let n = instance.parts.len();
    let mut en = Enumerator {
        instance,
        model: EnergyModel::for_instance(instance)?,
        platform: Platform::of(instance),
        gap: instance.machine.part_gap,
        fits: HashMap::new(),
    };
    let mut subsets: Vec<Option<SubsetBest>> = vec![None; 1 << n];
    for (mask, slot) in subsets.iter_mut().enumerate().skip(1) {
        let members: Vec<usize> = (0..n).filter(|&j| mask & (1 << j) != 0).collect();
        *slot = en.best_for(&members);
    }

    let cap = max_batches.unwrap_or(n).min(n);
    let mut labels = vec![0usize; n];
    let mut best: Option<(f64, usize, Vec<(usize, usize)>, Vec<usize>)> = None;
    partitions(&mut labels, 0, 0, cap, &mut |labels, blocks| {
        let mut masks = vec![0usize; blocks];
        for (j, &b) in labels.iter().enumerate() {
            masks[b] |= 1 << j;
        }
        let mut energy = 0.0;
        for &m in &masks {
            match &subsets[m] {
                Some(s) => energy += s.energy,
                None => return,
            }
        }
        let mut vector = vec![(0, 0); n];
        for &m in &masks {
            let s = subsets[m].as_ref().expect("checked");
            for (pos, j) in (0..n).filter(|&j| m & (1 << j) != 0).enumerate() {
                vector[j] = (labels[j], s.orientations[pos]);
            }
        }
        let better = match &best {
            None => true,
            Some((e, nb, v, _)) => {
                energy_cmp(energy, *e).then(blocks.cmp(nb)).then_with(|| vector.cmp(v)) == Ordering::Less
            }
        };
        if better {
            best = Some((energy, blocks, vector, masks));
        }
    });

    let Some((_, _, _, masks)) = best else {
        return Ok(None);
    };
    let batches = masks
        .iter()
        .enumerate()
        .map(|(index, &m)| {
            let s = subsets[m].as_ref().expect("feasible");
            let placements = (0..n)
                .filter(|&j| m & (1 << j) != 0)
                .enumerate()
                .map(|(pos, j)| {
                    let (x, y, rotated) = s.layout[pos];
                    Placement {
                        instance_id: instance.parts[j].instance_id.clone(),
                        orientation: s.orientations[pos],
                        x,
                        y,
                        rotated,
                    }
                })
                .collect();
            Batch { index, placements }
        })
        .collect();
    Ok(Some(Plan { batches }))
}

/// Restricted growth strings: `labels[i] <= max(labels[..i]) + 1`, with
/// at most `cap` distinct labels.
fn partitions(labels: &mut [usize], i: usize, used: usize, cap: usize, visit: &mut dyn FnMut(&[usize], usize)) {
    if i == labels.len() {
        visit(labels, used);
        return;
    }
    for b in 0..=used.min(cap.saturating_sub(1)) {
        labels[i] = b;
        partitions(labels, i + 1, used.max(b + 1), cap, visit);
    }
}

/// Solves models of small instances by enumeration; the model's batch
/// count caps the number of batches.
pub struct BruteForceHook<'a> {
    pub instance: &'a Instance,
    pub limits: BruteForceLimits,
}

impl SolveHook for BruteForceHook<'_> {
    fn solve(&mut self, model: &LinearModel) -> Result<SolveOutcome> {
        match brute_force_capped(self.instance, self.limits, Some(model.n_batches()))? {
            Some(plan) => Ok(SolveOutcome::Optimal(encode_plan(&plan, model, self.instance)?)),
            None => Ok(SolveOutcome::Infeasible),
        }
    }
}
