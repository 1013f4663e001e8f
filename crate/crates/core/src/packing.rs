//! Platform geometry: footprint rotation, the plan feasibility check, a
//! bottom-left-fill constructor and an exhaustive fit for small batches.

use std::collections::HashSet;

use serde::Serialize;
use thiserror::Error;

use crate::domain::{Instance, OrientationGeometry, Plan};

/// Absolute slack on coordinate comparisons, mm.
pub const GEOMETRY_TOLERANCE: f64 = 1e-6;

/// Projection of a part on the platform: extent along x (`length`) and
/// along y (`width`).
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Footprint {
    pub length: f64,
    pub width: f64,
}

impl Footprint {
    pub fn area(&self) -> f64 {
        self.length * self.width
    }

    pub fn turned(&self) -> Footprint {
        Footprint { length: self.width, width: self.length }
    }
}

/// `rotated = true` keeps the part's length along the platform length.
pub fn footprint(orientation: &OrientationGeometry, rotated: bool) -> Footprint {
    if rotated {
        Footprint { length: orientation.length, width: orientation.width }
    } else {
        Footprint { length: orientation.width, width: orientation.length }
    }
}

/// Usable platform rectangle.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Platform {
    pub length: f64,
    pub width: f64,
    pub margin: f64,
}

impl Platform {
    pub fn of(instance: &Instance) -> Platform {
        let m = &instance.machine;
        Platform { length: m.platform_length, width: m.platform_width, margin: m.boundary_margin }
    }

    fn admits(&self, x: f64, y: f64, fp: Footprint) -> bool {
        x + GEOMETRY_TOLERANCE >= self.margin
            && y + GEOMETRY_TOLERANCE >= self.margin
            && x + fp.length <= self.length - self.margin + GEOMETRY_TOLERANCE
            && y + fp.width <= self.width - self.margin + GEOMETRY_TOLERANCE
    }

    fn admits_alone(&self, fp: Footprint) -> bool {
        self.admits(self.margin, self.margin, fp)
    }

    fn usable_area(&self) -> f64 {
        (self.length - 2.0 * self.margin) * (self.width - 2.0 * self.margin)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ViolationKind {
    Boundary,
    Overlap,
    Height,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GeometryViolation {
    pub kind: ViolationKind,
    /// Index of the batch within the plan.
    pub batch: usize,
    pub instance_ids: Vec<String>,
    /// How far the offending constraint is violated, mm.
    pub magnitude: f64,
}

#[derive(Debug, Clone, Copy)]
struct Placed {
    x: f64,
    y: f64,
    fp: Footprint,
}

/// Every boundary, spacing and height violation in a plan. Placements with
/// dangling references are skipped; use [`Plan::check_membership`] for those.
pub fn check_plan_geometry(plan: &Plan, instance: &Instance) -> Vec<GeometryViolation> {
    let m = &instance.machine;
    let (lw, ww, margin, gap) = (m.platform_length, m.platform_width, m.boundary_margin, m.part_gap);
    let mut out = Vec::new();
    for (b, batch) in plan.batches.iter().enumerate() {
        let mut placed: Vec<(&str, Placed, f64)> = Vec::with_capacity(batch.placements.len());
        for p in &batch.placements {
            let Some(j) = instance.part_index(&p.instance_id) else { continue };
            let Ok(o) = instance.orientation(j, p.orientation) else { continue };
            placed.push((&p.instance_id, Placed { x: p.x, y: p.y, fp: footprint(o, p.rotated) }, o.height));
        }

        let mut tallest: Option<(&str, f64)> = None;
        for &(id, r, h) in &placed {
            // x ≥ D, x + len ≤ LW − D; likewise along y.
            let excess =
                [margin - r.x, margin - r.y, r.x + r.fp.length - (lw - margin), r.y + r.fp.width - (ww - margin)]
                    .into_iter()
                    .fold(f64::NEG_INFINITY, f64::max);
            if excess > GEOMETRY_TOLERANCE {
                out.push(GeometryViolation {
                    kind: ViolationKind::Boundary,
                    batch: b,
                    instance_ids: vec![id.to_string()],
                    magnitude: excess,
                });
            }
            if tallest.is_none_or(|(_, t)| h > t) {
                tallest = Some((id, h));
            }
        }
        if let Some((id, h)) = tallest {
            if h > m.platform_height + GEOMETRY_TOLERANCE {
                out.push(GeometryViolation {
                    kind: ViolationKind::Height,
                    batch: b,
                    instance_ids: vec![id.to_string()],
                    magnitude: h - m.platform_height,
                });
            }
        }

        for (i, &(id_a, a, _)) in placed.iter().enumerate() {
            for &(id_b, c, _) in &placed[i + 1..] {
                // Slack of each positional relation: a left of c, c left of
                // a, a below c, c below a. At least one must be ≥ 0.
                let slacks = [
                    c.x - (a.x + a.fp.length + gap),
                    a.x - (c.x + c.fp.length + gap),
                    c.y - (a.y + a.fp.width + gap),
                    a.y - (c.y + c.fp.width + gap),
                ];
                let best = slacks.into_iter().fold(f64::NEG_INFINITY, f64::max);
                if best < -GEOMETRY_TOLERANCE {
                    out.push(GeometryViolation {
                        kind: ViolationKind::Overlap,
                        batch: b,
                        instance_ids: vec![id_a.to_string(), id_b.to_string()],
                        magnitude: -best,
                    });
                }
            }
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PackError {
    #[error("item #{0} does not fit the platform in either rotation")]
    TooLarge(usize),
    #[error("no free position found for item #{0}")]
    NoSpace(usize),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Packed<I> {
    pub id: I,
    pub x: f64,
    pub y: f64,
    /// Whether the item kept its given footprint (`true`) or was turned.
    pub rotated: bool,
}

fn separated(a: &Placed, x: f64, y: f64, fp: Footprint, gap: f64) -> bool {
    a.x + a.fp.length + gap <= x + GEOMETRY_TOLERANCE
        || x + fp.length + gap <= a.x + GEOMETRY_TOLERANCE
        || a.y + a.fp.width + gap <= y + GEOMETRY_TOLERANCE
        || y + fp.width + gap <= a.y + GEOMETRY_TOLERANCE
}

fn free(placed: &[Placed], x: f64, y: f64, fp: Footprint, gap: f64) -> bool {
    placed.iter().all(|p| separated(p, x, y, fp, gap))
}

fn candidates(placed: &[Placed], platform: &Platform, gap: f64) -> (Vec<f64>, Vec<f64>) {
    let mut xs = vec![platform.margin];
    let mut ys = vec![platform.margin];
    for p in placed {
        xs.push(p.x + p.fp.length + gap);
        ys.push(p.y + p.fp.width + gap);
    }
    let sort_dedup = |v: &mut Vec<f64>| {
        v.sort_by(f64::total_cmp);
        v.dedup_by(|a, b| (*a - *b).abs() <= GEOMETRY_TOLERANCE);
    };
    sort_dedup(&mut xs);
    sort_dedup(&mut ys);
    (xs, ys)
}

/// Greedy bottom-left fill in the given item order.
///
/// Each item takes the lowest, then leftmost, free candidate point, where
/// candidates combine the platform corner with the right and top edges
/// (plus `gap`) of already placed items. Both rotations are tried; on a tie
/// the given footprint wins. A `NoSpace` failure only means this order did
/// not work out.
pub fn pack_bottom_left<I: Clone>(
    items: &[(I, Footprint)],
    platform: Platform,
    gap: f64,
) -> Result<Vec<Packed<I>>, PackError> {
    for (i, (_, fp)) in items.iter().enumerate() {
        if !platform.admits_alone(*fp) && !platform.admits_alone(fp.turned()) {
            return Err(PackError::TooLarge(i));
        }
    }
    let mut placed: Vec<Placed> = Vec::with_capacity(items.len());
    let mut out = Vec::with_capacity(items.len());
    for (i, (id, fp)) in items.iter().enumerate() {
        let (xs, ys) = candidates(&placed, &platform, gap);
        let mut best: Option<(f64, f64, bool)> = None;
        let square = (fp.length - fp.width).abs() <= GEOMETRY_TOLERANCE;
        for rotated in [true, false] {
            if !rotated && square {
                continue;
            }
            let shape = if rotated { *fp } else { fp.turned() };
            let found = ys.iter().find_map(|&y| {
                xs.iter().find(|&&x| platform.admits(x, y, shape) && free(&placed, x, y, shape, gap)).map(|&x| (y, x))
            });
            if let Some((y, x)) = found {
                let better = match best {
                    None => true,
                    Some((by, bx, _)) => {
                        y < by - GEOMETRY_TOLERANCE
                            || ((y - by).abs() <= GEOMETRY_TOLERANCE && x < bx - GEOMETRY_TOLERANCE)
                    }
                };
                if better {
                    best = Some((y, x, rotated));
                }
            }
        }
        let (y, x, rotated) = best.ok_or(PackError::NoSpace(i))?;
        let shape = if rotated { *fp } else { fp.turned() };
        placed.push(Placed { x, y, fp: shape });
        out.push(Packed { id: id.clone(), x, y, rotated });
    }
    Ok(out)
}

/// Exhaustive placement search for a handful of rectangles.
///
/// Explores every order in which items can be added, both rotations, and
/// every corner candidate built from already placed items, memoising
/// visited configurations. Returns `(x, y, rotated)` per input item, in
/// input order, or `None` when no arrangement exists. Intended for ≤ 6
/// items.
pub fn exhaustive_fit(items: &[Footprint], platform: Platform, gap: f64) -> Option<Vec<(f64, f64, bool)>> {
    if items.is_empty() {
        return Some(Vec::new());
    }
    if items.iter().any(|fp| !platform.admits_alone(*fp) && !platform.admits_alone(fp.turned())) {
        return None;
    }
    let area: f64 = items.iter().map(Footprint::area).sum();
    if area > platform.usable_area() + GEOMETRY_TOLERANCE {
        return None;
    }
    // Cheap first attempt: bottom-left in decreasing-area order.
    let mut order: Vec<usize> = (0..items.len()).collect();
    order.sort_by(|&a, &b| items[b].area().total_cmp(&items[a].area()).then(a.cmp(&b)));
    let ordered: Vec<(usize, Footprint)> = order.iter().map(|&i| (i, items[i])).collect();
    if let Ok(packed) = pack_bottom_left(&ordered, platform, gap) {
        let mut out = vec![(0.0, 0.0, true); items.len()];
        for p in packed {
            out[p.id] = (p.x, p.y, p.rotated);
        }
        return Some(out);
    }

    let mut search = Exhaustive {
        items,
        platform,
        gap,
        placed: Vec::with_capacity(items.len()),
        assigned: vec![None; items.len()],
        seen: HashSet::new(),
    };
    if search.descend() {
        Some(search.assigned.into_iter().map(|a| a.expect("all items placed")).collect())
    } else {
        None
    }
}

struct Exhaustive<'a> {
    items: &'a [Footprint],
    platform: Platform,
    gap: f64,
    placed: Vec<Placed>,
    assigned: Vec<Option<(f64, f64, bool)>>,
    seen: HashSet<Vec<[u64; 4]>>,
}

impl Exhaustive<'_> {
    fn key(&self) -> Vec<[u64; 4]> {
        let mut k: Vec<[u64; 4]> = self
            .placed
            .iter()
            .map(|p| [p.fp.length.to_bits(), p.fp.width.to_bits(), p.x.to_bits(), p.y.to_bits()])
            .collect();
        k.sort_unstable();
        k
    }

    fn descend(&mut self) -> bool {
        if self.placed.len() == self.items.len() {
            return true;
        }
        if !self.seen.insert(self.key()) {
            return false;
        }
        let (xs, ys) = candidates(&self.placed, &self.platform, self.gap);
        for i in 0..self.items.len() {
            if self.assigned[i].is_some() {
                continue;
            }
            // Identical unplaced items are interchangeable.
            if (0..i).any(|h| self.assigned[h].is_none() && self.items[h] == self.items[i]) {
                continue;
            }
            let fp = self.items[i];
            let square = (fp.length - fp.width).abs() <= GEOMETRY_TOLERANCE;
            for rotated in [true, false] {
                if !rotated && square {
                    continue;
                }
                let shape = if rotated { fp } else { fp.turned() };
                for &y in &ys {
                    for &x in &xs {
                        if !self.platform.admits(x, y, shape) || !free(&self.placed, x, y, shape, self.gap) {
                            continue;
                        }
                        self.placed.push(Placed { x, y, fp: shape });
                        self.assigned[i] = Some((x, y, rotated));
                        if self.descend() {
                            return true;
                        }
                        self.placed.pop();
                        self.assigned[i] = None;
                    }
                }
            }
        }
        false
    }
}
