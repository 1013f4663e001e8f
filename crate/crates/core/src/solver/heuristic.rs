use std::cmp::Ordering;
use std::time::{Duration, Instant};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::brute::energy_cmp;
use crate::domain::{Batch, Instance, Placement, Plan};
use crate::energy::EnergyModel;
use crate::error::{Error, Result};
use crate::milp::{initial_batch_count, TrialStep, TrialVerdict};
use crate::packing::{check_plan_geometry, footprint, pack_bottom_left, Footprint, Platform, GEOMETRY_TOLERANCE};

/// Limits for [`local_search`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SearchBudget {
    /// Accepted moves plus restarts.
    pub max_iterations: u64,
    /// Seconds.
    pub max_wall_time: f64,
    pub random_seed: u64,
}

impl SearchBudget {
    pub fn new(max_iterations: u64, max_wall_time: f64, random_seed: u64) -> Result<Self> {
        let b = SearchBudget { max_iterations, max_wall_time, random_seed };
        b.check()?;
        Ok(b)
    }

    fn check(&self) -> Result<()> {
        if self.max_iterations == 0 || !(self.max_wall_time > 0.0) {
            return Err(Error::InvalidInput("search budget limits must be positive".into()));
        }
        Ok(())
    }
}

impl Default for SearchBudget {
    fn default() -> Self {
        SearchBudget { max_iterations: 2_000, max_wall_time: 60.0, random_seed: 0 }
    }
}

type Layout = Vec<(f64, f64, bool)>;

#[derive(Debug, Clone)]
struct Group {
    /// Part indices, increasing.
    parts: Vec<usize>,
    layout: Layout,
    energy: f64,
}

#[derive(Debug, Clone)]
struct State {
    orient: Vec<usize>,
    groups: Vec<Group>,
}

impl State {
    fn energy(&self) -> f64 {
        self.groups.iter().map(|g| g.energy).sum()
    }

    fn group_of(&self, j: usize) -> usize {
        self.groups.iter().position(|g| g.parts.contains(&j)).expect("every part is placed")
    }

    fn canonicalize(&mut self) {
        self.groups.sort_by_key(|g| g.parts[0]);
    }

    /// (batch, orientation) per part; groups must be canonical.
    fn vector(&self) -> Vec<(usize, usize)> {
        let mut v = vec![(0, 0); self.orient.len()];
        for (b, g) in self.groups.iter().enumerate() {
            for &j in &g.parts {
                v[j] = (b, self.orient[j]);
            }
        }
        v
    }
}

/// Ranking used for every plan comparison: energy, then batch count, then
/// assignment vector.
fn state_cmp(a: &State, b: &State) -> Ordering {
    energy_cmp(a.energy(), b.energy())
        .then(a.groups.len().cmp(&b.groups.len()))
        .then_with(|| a.vector().cmp(&b.vector()))
}

#[derive(Debug, Clone)]
enum Move {
    /// Reorient every member of a group to its cheapest orientation no
    /// taller than the limit.
    HeightLimit {
        group: usize,
        limit: f64,
    },
    Orient {
        part: usize,
        orientation: usize,
    },
    /// `to == None` opens a new batch.
    Relocate {
        part: usize,
        orientation: usize,
        to: Option<usize>,
    },
    Swap {
        a: usize,
        b: usize,
    },
    Merge {
        a: usize,
        b: usize,
    },
}

struct Search<'a> {
    inst: &'a Instance,
    model: EnergyModel,
    platform: Platform,
    gap: f64,
    cap: usize,
}

/// New contents of the groups a move touches: (existing group or None,
/// members, orientation overrides).
struct Proposal {
    orient: Vec<(usize, usize)>,
    /// (group index or None for a new group, new members). Empty members
    /// delete the group.
    groups: Vec<(Option<usize>, Vec<usize>)>,
    delta: f64,
}

impl<'a> Search<'a> {
    fn new(inst: &'a Instance, cap: usize) -> Result<Self> {
        Ok(Search {
            inst,
            model: EnergyModel::for_instance(inst)?,
            platform: Platform::of(inst),
            gap: inst.machine.part_gap,
            cap,
        })
    }

    fn geometry(&self, j: usize, k: usize) -> &crate::domain::OrientationGeometry {
        &self.inst.part_type_of(j).orientations[k]
    }

    fn allowed(&self, j: usize, k: usize) -> bool {
        self.geometry(j, k).height <= self.inst.machine.platform_height + GEOMETRY_TOLERANCE
            && self.inst.fits_alone(j, k)
    }

    fn energy_of(&self, parts: &[usize], orient: &dyn Fn(usize) -> usize) -> f64 {
        self.model.batch_total(self.inst, parts.iter().map(|&j| (j, orient(j))))
    }

    /// Bottom-left fill in a few orders; `None` when all fail.
    fn repack(&self, parts: &[usize], orient: &dyn Fn(usize) -> usize) -> Option<Layout> {
        if parts.iter().any(|&j| !self.allowed(j, orient(j))) {
            return None;
        }
        let fps: Vec<Footprint> = parts.iter().map(|&j| footprint(self.geometry(j, orient(j)), true)).collect();
        let keys: [&dyn Fn(&Footprint) -> f64; 3] =
            [&|f| f.area(), &|f| f.length.max(f.width), &|f| f.length.min(f.width)];
        for key in keys {
            let mut order: Vec<usize> = (0..fps.len()).collect();
            order.sort_by(|&a, &b| key(&fps[b]).total_cmp(&key(&fps[a])).then(a.cmp(&b)));
            let items: Vec<(usize, Footprint)> = order.iter().map(|&i| (i, fps[i])).collect();
            if let Ok(packed) = pack_bottom_left(&items, self.platform, self.gap) {
                let mut layout = vec![(0.0, 0.0, true); fps.len()];
                for p in packed {
                    layout[p.id] = (p.x, p.y, p.rotated);
                }
                return Some(layout);
            }
        }
        None
    }

    fn proposal(&self, state: &State, mv: &Move) -> Option<Proposal> {
        let o = |j: usize| state.orient[j];
        let with = |part: usize, k: usize| move |j: usize| if j == part { k } else { state.orient[j] };
        match *mv {
            Move::HeightLimit { group, limit } => {
                let g = &state.groups[group];
                let mut changes = Vec::new();
                for &j in &g.parts {
                    let best = (0..self.inst.orientation_count(j))
                        .filter(|&k| self.geometry(j, k).height <= limit + GEOMETRY_TOLERANCE && self.allowed(j, k))
                        .min_by(|&a, &b| {
                            let (ga, gb) = (self.geometry(j, a), self.geometry(j, b));
                            ga.support_volume
                                .total_cmp(&gb.support_volume)
                                .then(ga.height.total_cmp(&gb.height))
                                .then(a.cmp(&b))
                        })?;
                    if best != state.orient[j] {
                        changes.push((j, best));
                    }
                }
                if changes.is_empty() {
                    return None;
                }
                let lookup = |j: usize| changes.iter().find(|c| c.0 == j).map_or(state.orient[j], |c| c.1);
                let delta = self.energy_of(&g.parts, &lookup) - g.energy;
                Some(Proposal { orient: changes, groups: vec![(Some(group), g.parts.clone())], delta })
            }
            Move::Orient { part, orientation } => {
                let gi = state.group_of(part);
                let g = &state.groups[gi];
                let delta = self.energy_of(&g.parts, &with(part, orientation)) - g.energy;
                Some(Proposal { orient: vec![(part, orientation)], groups: vec![(Some(gi), g.parts.clone())], delta })
            }
            Move::Relocate { part, orientation, to } => {
                let from = state.group_of(part);
                if Some(from) == to {
                    return None;
                }
                if to.is_none() && (state.groups.len() >= self.cap || state.groups[from].parts.len() == 1) {
                    return None;
                }
                let f = with(part, orientation);
                let rest: Vec<usize> = state.groups[from].parts.iter().copied().filter(|&j| j != part).collect();
                let mut delta = self.energy_of(&rest, &o) - state.groups[from].energy;
                let target: Vec<usize> = match to {
                    Some(t) => {
                        let mut v = state.groups[t].parts.clone();
                        v.push(part);
                        v.sort_unstable();
                        delta -= state.groups[t].energy;
                        v
                    }
                    None => vec![part],
                };
                delta += self.energy_of(&target, &f);
                Some(Proposal {
                    orient: vec![(part, orientation)],
                    groups: vec![(Some(from), rest), (to, target)],
                    delta,
                })
            }
            Move::Swap { a, b } => {
                let (ga, gb) = (state.group_of(a), state.group_of(b));
                if ga == gb {
                    return None;
                }
                let swap = |v: &[usize], out: usize, inn: usize| {
                    let mut v: Vec<usize> = v.iter().map(|&j| if j == out { inn } else { j }).collect();
                    v.sort_unstable();
                    v
                };
                let na = swap(&state.groups[ga].parts, a, b);
                let nb = swap(&state.groups[gb].parts, b, a);
                let delta = self.energy_of(&na, &o) + self.energy_of(&nb, &o)
                    - state.groups[ga].energy
                    - state.groups[gb].energy;
                Some(Proposal { orient: Vec::new(), groups: vec![(Some(ga), na), (Some(gb), nb)], delta })
            }
            Move::Merge { a, b } => {
                let mut v = state.groups[a].parts.clone();
                v.extend_from_slice(&state.groups[b].parts);
                v.sort_unstable();
                let delta = self.energy_of(&v, &o) - state.groups[a].energy - state.groups[b].energy;
                Some(Proposal { orient: Vec::new(), groups: vec![(Some(a), v), (Some(b), Vec::new())], delta })
            }
        }
    }

    /// Packs the touched groups; `None` if any of them fails.
    fn realize(&self, state: &State, p: &Proposal) -> Option<State> {
        let mut orient = state.orient.clone();
        for &(j, k) in &p.orient {
            orient[j] = k;
        }
        let mut next = State { orient, groups: state.groups.clone() };
        let mut removed = Vec::new();
        for (slot, parts) in &p.groups {
            if parts.is_empty() {
                removed.push(slot.expect("only existing groups empty out"));
                continue;
            }
            let o = |j: usize| next.orient[j];
            let layout = self.repack(parts, &o)?;
            let energy = self.energy_of(parts, &o);
            let group = Group { parts: parts.clone(), layout, energy };
            match slot {
                Some(i) => next.groups[*i] = group,
                None => next.groups.push(group),
            }
        }
        removed.sort_unstable();
        for i in removed.into_iter().rev() {
            next.groups.remove(i);
        }
        next.canonicalize();
        Some(next)
    }

    fn moves(&self, state: &State) -> Vec<Move> {
        let n = state.orient.len();
        let mut out = Vec::new();
        for (gi, g) in state.groups.iter().enumerate() {
            let mut limits: Vec<f64> = g
                .parts
                .iter()
                .flat_map(|&j| (0..self.inst.orientation_count(j)).map(move |k| (j, k)))
                .map(|(j, k)| self.geometry(j, k).height)
                .collect();
            limits.sort_by(f64::total_cmp);
            limits.dedup();
            out.extend(limits.into_iter().map(|limit| Move::HeightLimit { group: gi, limit }));
        }
        for part in 0..n {
            for orientation in 0..self.inst.orientation_count(part) {
                if orientation != state.orient[part] && self.allowed(part, orientation) {
                    out.push(Move::Orient { part, orientation });
                }
            }
        }
        for part in 0..n {
            for orientation in (0..self.inst.orientation_count(part)).filter(|&k| self.allowed(part, k)) {
                for to in 0..state.groups.len() {
                    out.push(Move::Relocate { part, orientation, to: Some(to) });
                }
                out.push(Move::Relocate { part, orientation, to: None });
            }
        }
        for a in 0..n {
            for b in a + 1..n {
                out.push(Move::Swap { a, b });
            }
        }
        for a in 0..state.groups.len() {
            for b in a + 1..state.groups.len() {
                out.push(Move::Merge { a, b });
            }
        }
        out
    }

    /// Applies the best improving move that packs; `None` at a local optimum.
    fn step(&self, state: &State) -> Option<State> {
        let threshold = -1e-9 * state.energy().abs().max(1.0);
        let mut candidates: Vec<Proposal> =
            self.moves(state).iter().filter_map(|m| self.proposal(state, m)).filter(|p| p.delta < threshold).collect();
        candidates.sort_by(|a, b| a.delta.total_cmp(&b.delta));
        candidates.iter().find_map(|p| self.realize(state, p))
    }

    /// A few random feasible moves regardless of energy.
    fn kick(&self, state: &State, rng: &mut ChaCha8Rng) -> State {
        let mut current = state.clone();
        let kicks = rng.gen_range(1..=3);
        let mut done = 0;
        for _ in 0..50 {
            if done == kicks {
                break;
            }
            let moves = self.moves(&current);
            let Some(mv) = moves.choose(rng) else { break };
            if matches!(mv, Move::Merge { .. }) {
                continue;
            }
            if let Some(next) = self.proposal(&current, mv).and_then(|p| self.realize(&current, &p)) {
                current = next;
                done += 1;
            }
        }
        current
    }

    fn state_from_plan(&self, plan: &Plan) -> Result<State> {
        plan.check_membership(self.inst)?;
        let violations = check_plan_geometry(plan, self.inst);
        if !violations.is_empty() {
            return Err(Error::InvalidPlan(format!("start plan has {} geometry violations", violations.len())));
        }
        let mut orient = vec![0; self.inst.parts.len()];
        let mut groups = Vec::new();
        for b in &plan.batches {
            let mut members: Vec<(usize, (f64, f64, bool))> = b
                .placements
                .iter()
                .map(|p| {
                    let j = self.inst.part_index(&p.instance_id).expect("membership checked");
                    orient[j] = p.orientation;
                    (j, (p.x, p.y, p.rotated))
                })
                .collect();
            members.sort_by_key(|m| m.0);
            groups.push((
                members.iter().map(|m| m.0).collect::<Vec<_>>(),
                members.into_iter().map(|m| m.1).collect::<Layout>(),
            ));
        }
        let groups = groups
            .into_iter()
            .map(|(parts, layout)| {
                let energy = self.energy_of(&parts, &|j| orient[j]);
                Group { parts, layout, energy }
            })
            .collect();
        let mut s = State { orient, groups };
        s.canonicalize();
        Ok(s)
    }

    fn plan_of(&self, state: &State) -> Plan {
        let batches = state
            .groups
            .iter()
            .enumerate()
            .map(|(index, g)| Batch {
                index,
                placements: g
                    .parts
                    .iter()
                    .zip(&g.layout)
                    .map(|(&j, &(x, y, rotated))| Placement {
                        instance_id: self.inst.parts[j].instance_id.clone(),
                        orientation: state.orient[j],
                        x,
                        y,
                        rotated,
                    })
                    .collect(),
            })
            .collect();
        Plan { batches }
    }
}

/// Greedy start: parts by decreasing footprint area of their least-support
/// orientation, first fit into open batches, a new batch on failure.
/// `rng` only breaks ties between equal areas.
pub fn construct_initial<R: Rng + ?Sized>(instance: &Instance, rng: &mut R) -> Result<Plan> {
    let search = Search::new(instance, usize::MAX)?;
    let n = instance.parts.len();
    let mut orient = vec![0; n];
    for (j, o) in orient.iter_mut().enumerate() {
        *o = (0..instance.orientation_count(j))
            .filter(|&k| search.allowed(j, k))
            .min_by(|&a, &b| {
                let (ga, gb) = (search.geometry(j, a), search.geometry(j, b));
                ga.support_volume.total_cmp(&gb.support_volume).then(a.cmp(&b))
            })
            .ok_or_else(|| {
                Error::Infeasible(format!("part '{}' fits in no orientation", instance.parts[j].instance_id))
            })?;
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(rng);
    let area = |j: usize| footprint(search.geometry(j, orient[j]), true).area();
    order.sort_by(|&a, &b| area(b).total_cmp(&area(a)));

    let o = |j: usize| orient[j];
    let mut groups: Vec<Group> = Vec::new();
    for j in order {
        let mut placed = false;
        for g in groups.iter_mut() {
            let mut parts = g.parts.clone();
            parts.push(j);
            parts.sort_unstable();
            if let Some(layout) = search.repack(&parts, &o) {
                g.energy = search.energy_of(&parts, &o);
                g.parts = parts;
                g.layout = layout;
                placed = true;
                break;
            }
        }
        if !placed {
            let layout = search.repack(&[j], &o).expect("allowed orientations fit alone");
            groups.push(Group { parts: vec![j], energy: search.energy_of(&[j], &o), layout });
        }
    }
    let mut state = State { orient, groups };
    state.canonicalize();
    Ok(search.plan_of(&state))
}

/// Hill climbing with restarts from `start`. Returns a feasible plan whose
/// energy is at most the start's.
pub fn local_search(instance: &Instance, start: &Plan, budget: SearchBudget) -> Result<Plan> {
    local_search_capped(instance, start, budget, None)
}

/// As [`local_search`] with at most `max_batches` batches.
pub fn local_search_capped(
    instance: &Instance,
    start: &Plan,
    budget: SearchBudget,
    max_batches: Option<usize>,
) -> Result<Plan> {
    budget.check()?;
    let cap = max_batches.unwrap_or(usize::MAX);
    if start.batches.len() > cap {
        return Err(Error::InvalidPlan(format!("start uses {} batches, cap is {cap}", start.batches.len())));
    }
    let search = Search::new(instance, cap)?;
    let mut rng = ChaCha8Rng::seed_from_u64(budget.random_seed);
    let deadline = Instant::now() + Duration::from_secs_f64(budget.max_wall_time.min(1e9));
    let initial = search.state_from_plan(start)?;
    let mut best = initial.clone();
    let mut current = initial;
    let mut iterations = 0u64;
    while iterations < budget.max_iterations && Instant::now() < deadline {
        iterations += 1;
        match search.step(&current) {
            Some(next) => current = next,
            None => {
                if state_cmp(&current, &best) == Ordering::Less {
                    best = current.clone();
                }
                current = search.kick(&best, &mut rng);
            }
        }
    }
    if state_cmp(&current, &best) == Ordering::Less {
        best = current;
    }
    Ok(search.plan_of(&best))
}

#[derive(Debug, Clone)]
pub struct HeuristicOutcome {
    pub plan: Plan,
    /// Batch cap in force at the end; `None` without a batch trial.
    pub available_batches: Option<usize>,
    pub steps: Vec<TrialStep>,
}

/// Greedy start plus local search. With `eta`, the number of available
/// batches starts at `ceil(eta · |J|)` and grows while the start needs more
/// or the search fills every available batch.
pub fn solve_heuristic(instance: &Instance, eta: Option<f64>, budget: SearchBudget) -> Result<HeuristicOutcome> {
    let mut rng = ChaCha8Rng::seed_from_u64(budget.random_seed);
    let start = construct_initial(instance, &mut rng)?;
    let Some(eta) = eta else {
        let plan = local_search(instance, &start, budget)?;
        return Ok(HeuristicOutcome { plan, available_batches: None, steps: Vec::new() });
    };
    if !(eta > 0.0 && eta < 1.0) {
        return Err(Error::InvalidInput(format!("eta must lie in (0, 1), got {eta}")));
    }
    let parts = instance.parts.len();
    let mut n_b = initial_batch_count(eta, parts).min(parts);
    let mut steps = Vec::new();
    while start.batches.len() > n_b {
        steps.push(TrialStep { available_batches: n_b, opened_batches: None, verdict: TrialVerdict::Infeasible });
        n_b += 1;
    }
    let mut current = start;
    loop {
        let plan = local_search_capped(instance, &current, budget, Some(n_b))?;
        let opened = plan.batches.len();
        if opened < n_b || n_b >= parts {
            steps.push(TrialStep {
                available_batches: n_b,
                opened_batches: Some(opened),
                verdict: TrialVerdict::Accepted,
            });
            return Ok(HeuristicOutcome { plan, available_batches: Some(n_b), steps });
        }
        steps.push(TrialStep {
            available_batches: n_b,
            opened_batches: Some(opened),
            verdict: TrialVerdict::Saturated,
        });
        n_b += 1;
        current = plan;
    }
}
