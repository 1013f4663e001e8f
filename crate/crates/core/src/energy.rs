//! Subprocess durations and batch energy.
//!
//! A batch's energy is `Σ_f Σ_l p_f · φ_fl · T_l` over the 11 subsystems
//! and 7 subprocesses. Durations follow from batch aggregates: scanned
//! surface, part volume, support volume and slice count.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::domain::{Batch, Instance, MachineSpec, Plan, ProcessParams, Subprocess, SubprocessTimes, Subsystem};
use crate::error::{Error, Result};

/// Slack absorbed before rounding a height up to a whole layer.
const SLICE_TOLERANCE: f64 = 1e-9;

/// Volumetric build-up rate `n_l · hatch · layer · speed`, mm³/s.
pub fn buildup_rate(laser_count: u32, hatch_distance: f64, layer_thickness: f64, speed: f64) -> Result<f64> {
    if laser_count == 0 || !(hatch_distance > 0.0) || !(layer_thickness > 0.0) || !(speed > 0.0) {
        return Err(Error::InvalidInput(format!(
            "build-up rate needs positive inputs, got n_l={laser_count}, hatch={hatch_distance}, \
             layer={layer_thickness}, speed={speed}"
        )));
    }
    Ok(f64::from(laser_count) * hatch_distance * layer_thickness * speed)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RegressionForm {
    /// `t(T) = a·T² + b·T − c`
    Heating,
    /// `t(T) = a·T² − b·T + c`
    Cooling,
}

/// Duration between two platform temperatures under a fitted quadratic,
/// `t(end) − t(start)`.
pub fn regression_duration(constants: [f64; 3], start: f64, end: f64, form: RegressionForm) -> Result<f64> {
    let [a, b, c] = constants;
    let t = |temp: f64| match form {
        RegressionForm::Heating => a * temp * temp + b * temp - c,
        RegressionForm::Cooling => a * temp * temp - b * temp + c,
    };
    let d = t(end) - t(start);
    if d < 0.0 || !d.is_finite() {
        return Err(Error::NonPhysicalRegression(d));
    }
    Ok(d)
}

/// Number of layers needed to build a batch of the given height.
pub fn slice_count(height: f64, layer_thickness: f64) -> u64 {
    let n = (height / layer_thickness - SLICE_TOLERANCE).ceil();
    if n <= 0.0 {
        0
    } else {
        n as u64
    }
}

/// What the time model needs to know about a batch.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BatchAggregate {
    /// mm²
    pub surface_area: f64,
    /// mm³
    pub part_volume: f64,
    /// mm³
    pub support_volume: f64,
    pub slices: u64,
    pub part_count: usize,
}

/// Power table `p_f` and state coefficients `φ_fl` in dense form.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PowerTable {
    pub powers: [f64; Subsystem::COUNT],
    pub coefficients: [[f64; Subprocess::COUNT]; Subsystem::COUNT],
}

impl PowerTable {
    pub fn from_machine(machine: &MachineSpec) -> Result<Self> {
        let mut powers = [0.0; Subsystem::COUNT];
        let mut coefficients = [[0.0; Subprocess::COUNT]; Subsystem::COUNT];
        for f in Subsystem::ALL {
            powers[f.index()] = *machine.subsystem_powers.get(&f).ok_or(Error::MissingPower(f.code()))?;
            for l in Subprocess::ALL {
                coefficients[f.index()][l.index()] =
                    machine.coefficient(f, l).ok_or_else(|| Error::missing_coefficient(f, l))?;
            }
        }
        Ok(PowerTable { powers, coefficients })
    }

    /// Machine draw while subprocess `l` runs, `Σ_f p_f · φ_fl`, W.
    pub fn subprocess_power(&self, l: Subprocess) -> f64 {
        Subsystem::ALL.iter().map(|f| self.powers[f.index()] * self.coefficients[f.index()][l.index()]).sum()
    }
}

/// Per-batch energy split both ways.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BatchEnergy {
    pub total: f64,
    pub by_subsystem: [f64; Subsystem::COUNT],
    pub by_subprocess: [f64; Subprocess::COUNT],
}

/// Energy of one batch from its subprocess durations.
pub fn batch_energy(times: &SubprocessTimes, machine: &MachineSpec) -> Result<BatchEnergy> {
    let table = PowerTable::from_machine(machine)?;
    Ok(energy_of_times(times, &table, &subprocess_powers(&table)))
}

fn subprocess_powers(table: &PowerTable) -> [f64; Subprocess::COUNT] {
    let mut out = [0.0; Subprocess::COUNT];
    for l in Subprocess::ALL {
        out[l.index()] = table.subprocess_power(l);
    }
    out
}

fn energy_of_times(times: &SubprocessTimes, table: &PowerTable, powers: &[f64; Subprocess::COUNT]) -> BatchEnergy {
    let mut by_subsystem = [0.0; Subsystem::COUNT];
    for f in Subsystem::ALL {
        let row = &table.coefficients[f.index()];
        let active: f64 = Subprocess::ALL.iter().map(|l| row[l.index()] * times[*l]).sum();
        by_subsystem[f.index()] = table.powers[f.index()] * active;
    }
    let mut by_subprocess = [0.0; Subprocess::COUNT];
    for l in Subprocess::ALL {
        by_subprocess[l.index()] = powers[l.index()] * times[l];
    }
    BatchEnergy { total: by_subprocess.iter().sum(), by_subsystem, by_subprocess }
}

/// Precomputed rates for turning aggregates into durations and energy.
#[derive(Debug, Clone)]
pub struct EnergyModel {
    border_divisor: f64,
    contour_divisor: f64,
    part_rate: f64,
    support_rate: f64,
    layer_thickness: f64,
    recoat_layer_time: f64,
    preheat: f64,
    cool: f64,
    table: PowerTable,
    powers: [f64; Subprocess::COUNT],
}

impl EnergyModel {
    pub fn new(machine: &MachineSpec, process: &ProcessParams) -> Result<Self> {
        let n_l = f64::from(process.laser_count);
        if process.laser_count == 0 || !(process.layer_thickness > 0.0) {
            return Err(Error::InvalidInput("laser count and layer thickness must be positive".into()));
        }
        if !(process.border_speed > 0.0 && process.contour_speed > 0.0) {
            return Err(Error::InvalidInput("scan speeds must be positive".into()));
        }
        let table = PowerTable::from_machine(machine)?;
        Ok(EnergyModel {
            border_divisor: n_l * process.border_speed * process.layer_thickness,
            contour_divisor: n_l * process.contour_speed * process.layer_thickness,
            part_rate: process.part_buildup_rate()?,
            support_rate: process.support_buildup_rate()?,
            layer_thickness: process.layer_thickness,
            recoat_layer_time: machine.recoat_layer_time,
            preheat: machine.preheat_duration()?,
            cool: machine.cool_duration()?,
            powers: subprocess_powers(&table),
            table,
        })
    }

    pub fn for_instance(instance: &Instance) -> Result<Self> {
        EnergyModel::new(&instance.machine, &instance.process)
    }

    pub fn power_table(&self) -> &PowerTable {
        &self.table
    }

    /// Machine draw during subprocess `l`, W.
    pub fn subprocess_power(&self, l: Subprocess) -> f64 {
        self.powers[l.index()]
    }

    pub fn preheat_time(&self) -> f64 {
        self.preheat
    }

    pub fn cool_time(&self) -> f64 {
        self.cool
    }

    pub fn layer_thickness(&self) -> f64 {
        self.layer_thickness
    }

    pub fn recoat_layer_time(&self) -> f64 {
        self.recoat_layer_time
    }

    pub fn border_divisor(&self) -> f64 {
        self.border_divisor
    }

    pub fn contour_divisor(&self) -> f64 {
        self.contour_divisor
    }

    pub fn part_rate(&self) -> f64 {
        self.part_rate
    }

    pub fn support_rate(&self) -> f64 {
        self.support_rate
    }

    pub fn times(&self, agg: &BatchAggregate) -> SubprocessTimes {
        let mut t = SubprocessTimes::default();
        t[Subprocess::Ph] = self.preheat;
        t[Subprocess::Sb] = agg.surface_area / self.border_divisor;
        t[Subprocess::Fc] = agg.surface_area / self.contour_divisor;
        t[Subprocess::Vh] = agg.part_volume / self.part_rate;
        t[Subprocess::Ss] = agg.support_volume / self.support_rate;
        t[Subprocess::Rc] = agg.slices as f64 * self.recoat_layer_time;
        t[Subprocess::Co] = self.cool;
        t
    }

    pub fn energy(&self, times: &SubprocessTimes) -> BatchEnergy {
        energy_of_times(times, &self.table, &self.powers)
    }

    /// Total energy of a batch given as `(part index, orientation)` pairs.
    /// Skips every allocation; used in the search loops.
    pub fn batch_total(&self, instance: &Instance, parts: impl IntoIterator<Item = (usize, usize)>) -> f64 {
        let mut surface = 0.0;
        let mut volume = 0.0;
        let mut support = 0.0;
        let mut height: f64 = 0.0;
        let mut any = false;
        for (j, k) in parts {
            any = true;
            let pt = instance.part_type_of(j);
            let o = &pt.orientations[k];
            surface += pt.surface_area;
            volume += pt.volume;
            support += o.support_volume;
            height = height.max(o.height);
        }
        if !any {
            return 0.0;
        }
        let p = &self.powers;
        let slices = slice_count(height, self.layer_thickness) as f64;
        p[0] * self.preheat
            + p[1] * (surface / self.border_divisor)
            + p[2] * (surface / self.contour_divisor)
            + p[3] * (volume / self.part_rate)
            + p[4] * (support / self.support_rate)
            + p[5] * (slices * self.recoat_layer_time)
            + p[6] * self.cool
    }

    /// Breakdown over a list of batch aggregates.
    pub fn evaluate_aggregates(&self, batches: &[BatchAggregate]) -> EnergyBreakdown {
        let mut out = EnergyBreakdown::empty(self.table);
        for agg in batches {
            let times = self.times(agg);
            out.push(times, &self.energy(&times));
        }
        out
    }
}

/// Aggregates of a batch given by placements.
pub fn batch_aggregate(batch: &Batch, instance: &Instance) -> Result<BatchAggregate> {
    if batch.placements.is_empty() {
        return Err(Error::EmptyBatch(batch.index));
    }
    let mut agg = BatchAggregate {
        surface_area: 0.0,
        part_volume: 0.0,
        support_volume: 0.0,
        slices: 0,
        part_count: batch.placements.len(),
    };
    let mut height: f64 = 0.0;
    for p in &batch.placements {
        let j = instance.part_index(&p.instance_id).ok_or_else(|| Error::UnknownPart(p.instance_id.clone()))?;
        let o = instance.orientation(j, p.orientation)?;
        let pt = instance.part_type_of(j);
        agg.surface_area += pt.surface_area;
        agg.part_volume += pt.volume;
        agg.support_volume += o.support_volume;
        height = height.max(o.height);
    }
    agg.slices = slice_count(height, instance.process.layer_thickness);
    Ok(agg)
}

/// Durations of every subprocess for one (non-empty) batch.
pub fn subprocess_times(batch: &Batch, instance: &Instance) -> Result<SubprocessTimes> {
    let model = EnergyModel::for_instance(instance)?;
    Ok(model.times(&batch_aggregate(batch, instance)?))
}

/// Energy of a full plan with per-subsystem, per-subprocess and per-batch
/// splits. Batches without placements contribute nothing.
pub fn plan_energy(plan: &Plan, instance: &Instance) -> Result<EnergyBreakdown> {
    let model = EnergyModel::for_instance(instance)?;
    plan_energy_with(&model, plan, instance)
}

pub fn plan_energy_with(model: &EnergyModel, plan: &Plan, instance: &Instance) -> Result<EnergyBreakdown> {
    let mut out = EnergyBreakdown::empty(model.table);
    for batch in plan.batches.iter().filter(|b| !b.placements.is_empty()) {
        let times = model.times(&batch_aggregate(batch, instance)?);
        out.push(times, &model.energy(&times));
    }
    Ok(out)
}

/// Energy of a plan given only per-batch aggregates.
pub fn aggregate_energy(
    batches: &[BatchAggregate],
    machine: &MachineSpec,
    process: &ProcessParams,
) -> Result<EnergyBreakdown> {
    Ok(EnergyModel::new(machine, process)?.evaluate_aggregates(batches))
}

/// Energy of a plan, J, split three ways.
#[derive(Debug, Clone, PartialEq)]
pub struct EnergyBreakdown {
    pub total: f64,
    pub by_subsystem: [f64; Subsystem::COUNT],
    pub by_subprocess: [f64; Subprocess::COUNT],
    pub by_batch: Vec<f64>,
    pub times: Vec<SubprocessTimes>,
    pub power_table: PowerTable,
}

impl EnergyBreakdown {
    fn empty(power_table: PowerTable) -> Self {
        EnergyBreakdown {
            total: 0.0,
            by_subsystem: [0.0; Subsystem::COUNT],
            by_subprocess: [0.0; Subprocess::COUNT],
            by_batch: Vec::new(),
            times: Vec::new(),
            power_table,
        }
    }

    fn push(&mut self, times: SubprocessTimes, e: &BatchEnergy) {
        for (acc, v) in self.by_subsystem.iter_mut().zip(e.by_subsystem) {
            *acc += v;
        }
        for (acc, v) in self.by_subprocess.iter_mut().zip(e.by_subprocess) {
            *acc += v;
        }
        self.by_batch.push(e.total);
        self.total += e.total;
        self.times.push(times);
    }

    pub fn subsystem(&self, f: Subsystem) -> f64 {
        self.by_subsystem[f.index()]
    }

    pub fn subprocess(&self, l: Subprocess) -> f64 {
        self.by_subprocess[l.index()]
    }

    /// Total without the preheating and cooling energy.
    pub fn total_without_ph_co(&self) -> f64 {
        self.total - self.subprocess(Subprocess::Ph) - self.subprocess(Subprocess::Co)
    }

    /// Sum of all subprocess durations over all batches, s.
    pub fn processing_time(&self) -> f64 {
        self.times.iter().map(SubprocessTimes::total).sum()
    }
}

impl Serialize for EnergyBreakdown {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        #[derive(Serialize)]
        struct View<'a> {
            total_j: f64,
            by_subsystem_j: BTreeMap<Subsystem, f64>,
            by_subprocess_j: BTreeMap<Subprocess, f64>,
            by_batch_j: &'a [f64],
            times_s: &'a [SubprocessTimes],
        }
        View {
            total_j: self.total,
            by_subsystem_j: Subsystem::ALL.iter().map(|&f| (f, self.subsystem(f))).collect(),
            by_subprocess_j: Subprocess::ALL.iter().map(|&l| (l, self.subprocess(l))).collect(),
            by_batch_j: &self.by_batch,
            times_s: &self.times,
        }
        .serialize(s)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SavingRow<K> {
    pub key: K,
    pub baseline_j: f64,
    pub candidate_j: f64,
    /// baseline − candidate
    pub saving_j: f64,
    /// Share of the total saving, %; 0 when the total saving is 0.
    pub share_pct: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SavingsReport {
    pub baseline_total_j: f64,
    pub candidate_total_j: f64,
    pub total_saving_j: f64,
    /// Saving relative to the baseline total, %.
    pub relative_saving_pct: f64,
    pub by_subsystem: Vec<SavingRow<Subsystem>>,
    pub by_subprocess: Vec<SavingRow<Subprocess>>,
}

impl SavingsReport {
    pub fn subprocess_saving(&self, l: Subprocess) -> f64 {
        self.by_subprocess[l.index()].saving_j
    }

    pub fn subsystem_saving(&self, f: Subsystem) -> f64 {
        self.by_subsystem[f.index()].saving_j
    }
}

/// Savings of `candidate` relative to `baseline`.
pub fn compare_plans(baseline: &EnergyBreakdown, candidate: &EnergyBreakdown) -> Result<SavingsReport> {
    if baseline.power_table != candidate.power_table {
        return Err(Error::MachineMismatch);
    }
    let total_saving = baseline.total - candidate.total;
    let share = |s: f64| if total_saving == 0.0 { 0.0 } else { s / total_saving * 100.0 };
    let by_subsystem = Subsystem::ALL
        .iter()
        .map(|&f| {
            let (a, b) = (baseline.subsystem(f), candidate.subsystem(f));
            SavingRow { key: f, baseline_j: a, candidate_j: b, saving_j: a - b, share_pct: share(a - b) }
        })
        .collect();
    let by_subprocess = Subprocess::ALL
        .iter()
        .map(|&l| {
            let (a, b) = (baseline.subprocess(l), candidate.subprocess(l));
            SavingRow { key: l, baseline_j: a, candidate_j: b, saving_j: a - b, share_pct: share(a - b) }
        })
        .collect();
    Ok(SavingsReport {
        baseline_total_j: baseline.total,
        candidate_total_j: candidate.total,
        total_saving_j: total_saving,
        relative_saving_pct: if baseline.total == 0.0 { 0.0 } else { total_saving / baseline.total * 100.0 },
        by_subsystem,
        by_subprocess,
    })
}

/// One line of a computed-vs-published savings comparison.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReconciliationRow {
    pub subprocess: Subprocess,
    pub computed_mj: f64,
    pub published_mj: f64,
    pub residual_mj: f64,
    /// `|residual| / |published|`; `None` when the published value is 0.
    pub relative_residual: Option<f64>,
    /// Set when the residual exceeds the tolerance.
    pub discrepancy: bool,
}

/// Compares computed subprocess savings with published ones. A row is
/// flagged when its residual exceeds `rel_tol` of the published value, or
/// 0.005 MJ (the published rounding) when the published value is 0.
pub fn reconcile(
    savings: &SavingsReport,
    published_mj: &BTreeMap<Subprocess, f64>,
    rel_tol: f64,
) -> Vec<ReconciliationRow> {
    published_mj
        .iter()
        .map(|(&l, &published)| {
            let computed = savings.subprocess_saving(l) / 1e6;
            let residual = computed - published;
            let relative_residual = (published != 0.0).then(|| residual.abs() / published.abs());
            let discrepancy = match relative_residual {
                Some(r) => r > rel_tol,
                None => residual.abs() > 0.005,
            };
            ReconciliationRow {
                subprocess: l,
                computed_mj: computed,
                published_mj: published,
                residual_mj: residual,
                relative_residual,
                discrepancy,
            }
        })
        .collect()
}

/// Sum of projected footprint areas over platform area. The published
/// utilisation figures are not defined precisely; this is an estimate.
pub fn utilization(batch: &Batch, instance: &Instance) -> Result<f64> {
    let mut area = 0.0;
    for p in &batch.placements {
        let j = instance.part_index(&p.instance_id).ok_or_else(|| Error::UnknownPart(p.instance_id.clone()))?;
        let o = instance.orientation(j, p.orientation)?;
        area += o.length * o.width;
    }
    Ok(area / (instance.machine.platform_length * instance.machine.platform_width))
}

#[cfg(test)]
mod tests {
    use approx::assert_relative_eq;

    use super::*;
    use crate::catalog;
    use crate::domain::{PartType, Placement};

    fn single_part_instance(part: PartType) -> Instance {
        Instance::with_copies(catalog::reference_machine(), catalog::reference_process(), vec![part], &[(0, 2)])
            .unwrap()
    }

    fn place(id: &str, k: usize) -> Placement {
        Placement { instance_id: id.into(), orientation: k, x: 0.0, y: 0.0, rotated: true }
    }

    #[test]
    fn buildup_rate_values() {
        assert_relative_eq!(buildup_rate(2, 0.13, 0.03, 1650.0).unwrap(), 12.87, max_relative = 1e-12);
        assert_eq!(buildup_rate(1, 1.0, 1.0, 1.0).unwrap(), 1.0);
        assert_relative_eq!(buildup_rate(2, 0.13, 0.03, 1000.0).unwrap(), 7.8, max_relative = 1e-12);
        assert!(buildup_rate(0, 0.13, 0.03, 1000.0).is_err());
        assert!(buildup_rate(2, 0.13, -0.03, 1000.0).is_err());
    }

    #[test]
    fn regression_durations() {
        let same = regression_duration([3.0, 2.0, 1.0], 150.0, 150.0, RegressionForm::Heating).unwrap();
        assert_eq!(same, 0.0);
        let heat = regression_duration([1.0, 0.0, 0.0], 0.0, 10.0, RegressionForm::Heating).unwrap();
        assert_relative_eq!(heat, 100.0);
        let cool = regression_duration([0.01, 3.0, 0.0], 150.0, 80.0, RegressionForm::Cooling).unwrap();
        assert_relative_eq!(cool, 49.0, max_relative = 1e-12);
        let bad = regression_duration([1.0, 0.0, 0.0], 10.0, 0.0, RegressionForm::Heating);
        assert!(matches!(bad, Err(Error::NonPhysicalRegression(_))));
    }

    #[test]
    fn machine_uses_regression_when_given() {
        let mut m = catalog::reference_machine();
        m.cooling =
            Some(crate::domain::CoolingRegression { c4: 0.01, c5: 3.0, c6: 0.0, start_temp: 150.0, final_temp: 80.0 });
        assert_relative_eq!(m.cool_duration().unwrap(), 49.0, max_relative = 1e-12);
        assert_eq!(m.preheat_duration().unwrap(), catalog::REFERENCE_PREHEAT_TIME);
    }

    #[test]
    fn slices_round_up_but_absorb_float_noise() {
        assert_eq!(slice_count(18.0, 0.03), 600);
        assert_eq!(slice_count(0.21, 0.03), 7);
        assert_eq!(slice_count(76.7, 0.03), 2557);
        assert_eq!(slice_count(0.0, 0.03), 0);
    }

    #[test]
    fn single_part_times() {
        let mut machine = catalog::reference_machine();
        machine.preheat_time = Some(1000.0);
        machine.cool_time = Some(2000.0);
        let mut part = catalog::part_types().remove(0);
        part.orientations.truncate(1);
        let inst = Instance::with_copies(machine, catalog::reference_process(), vec![part], &[(0, 2)]).unwrap();
        let batch = Batch { index: 0, placements: vec![place("1-1", 0)] };
        let t = subprocess_times(&batch, &inst).unwrap();
        assert_eq!(t[Subprocess::Ph], 1000.0);
        assert_eq!(t[Subprocess::Co], 2000.0);
        assert_relative_eq!(t[Subprocess::Sb], 8607.8 / 43.8, max_relative = 1e-12);
        assert_relative_eq!(t[Subprocess::Sb], 196.525, max_relative = 1e-5);
        assert_relative_eq!(t[Subprocess::Fc], 196.525, max_relative = 1e-5);
        assert_relative_eq!(t[Subprocess::Vh], 524.01, max_relative = 1e-5);
        assert_relative_eq!(t[Subprocess::Ss], 221.03, max_relative = 1e-4);
        assert_relative_eq!(t[Subprocess::Rc], 6600.0, max_relative = 1e-12);

        let pair = Batch { index: 0, placements: vec![place("1-1", 0), place("1-2", 0)] };
        let t2 = subprocess_times(&pair, &inst).unwrap();
        for l in [Subprocess::Sb, Subprocess::Fc, Subprocess::Vh, Subprocess::Ss] {
            assert_relative_eq!(t2[l], 2.0 * t[l], max_relative = 1e-12);
        }
        assert_eq!(t2[Subprocess::Rc], t[Subprocess::Rc]);
    }

    #[test]
    fn zero_support_orientation_has_no_support_time() {
        let part = catalog::part_types().remove(2);
        assert_eq!(part.orientations[3].support_volume, 0.0);
        let inst = single_part_instance(part);
        let batch = Batch { index: 0, placements: vec![place("3-1", 3)] };
        assert_eq!(subprocess_times(&batch, &inst).unwrap()[Subprocess::Ss], 0.0);
    }

    #[test]
    fn batch_energy_reference_values() {
        let m = catalog::reference_machine();
        assert_eq!(batch_energy(&SubprocessTimes::default(), &m).unwrap().total, 0.0);

        let mut t = SubprocessTimes::default();
        t[Subprocess::Rc] = 6600.0;
        let e = batch_energy(&t, &m).unwrap();
        // 569.7 + 1122.3·0.4826 + 713.3 + 1739.4·0.353 + 52.1 + 32.1 + 69.1 W
        let recoat_power = 569.7 + 1122.3 * 0.4826 + 713.3 + 1739.4 * 0.353 + 52.1 + 32.1 + 69.1;
        assert_relative_eq!(recoat_power, 2591.93018, max_relative = 1e-9);
        assert_relative_eq!(e.total, recoat_power * 6600.0, max_relative = 1e-12);
        assert_relative_eq!(e.total / 1e6, 17.107, max_relative = 1e-4);

        let mut t = SubprocessTimes::default();
        t[Subprocess::Ph] = 3600.0;
        let e = batch_energy(&t, &m).unwrap();
        assert_relative_eq!(e.total / 1e6, 9.827, max_relative = 1e-4);
        assert_relative_eq!(e.total, 2729.6192 * 3600.0, max_relative = 1e-9);
    }

    #[test]
    fn batch_energy_missing_coefficient() {
        let mut m = catalog::reference_machine();
        m.state_coefficients.get_mut(&Subsystem::Ht).unwrap().remove(&Subprocess::Vh);
        let err = batch_energy(&SubprocessTimes::default(), &m).unwrap_err();
        assert!(matches!(err, Error::MissingCoefficient { subsystem: "ht", subprocess: "vh" }));
    }

    #[test]
    fn plan_energy_is_additive_over_batches() {
        let inst = catalog::ins_20(1);
        let one = Batch { index: 0, placements: vec![place("1-1", 0)] };
        let two = Batch { index: 1, placements: vec![place("1-2", 0)] };
        let single = plan_energy(&Plan { batches: vec![one.clone()] }, &inst).unwrap();
        let times = subprocess_times(&one, &inst).unwrap();
        assert_eq!(single.total, batch_energy(&times, &inst.machine).unwrap().total);
        let double = plan_energy(&Plan { batches: vec![one, two] }, &inst).unwrap();
        assert_eq!(double.total, 2.0 * single.total);
    }

    #[test]
    fn dangling_reference_is_an_error() {
        let inst = catalog::ins_20(1);
        let plan = Plan { batches: vec![Batch { index: 0, placements: vec![place("nope", 0)] }] };
        assert!(matches!(plan_energy(&plan, &inst), Err(Error::UnknownPart(_))));
    }

    #[test]
    fn fast_batch_total_matches_breakdown() {
        let inst = catalog::ins_20(5);
        let model = EnergyModel::for_instance(&inst).unwrap();
        let parts = [(0usize, 1usize), (5, 2), (9, 4), (17, 0)];
        let batch =
            Batch { index: 0, placements: parts.iter().map(|&(j, k)| place(&inst.parts[j].instance_id, k)).collect() };
        let slow = plan_energy(&Plan { batches: vec![batch] }, &inst).unwrap().total;
        assert_relative_eq!(model.batch_total(&inst, parts), slow, max_relative = 1e-12);
    }

    #[test]
    fn published_recoat_saving() {
        let inst = catalog::ins_20(5);
        let mut machine = inst.machine.clone();
        machine.preheat_time = Some(0.0);
        machine.cool_time = Some(0.0);
        let base = aggregate_energy(&catalog::baseline_aggregates(), &machine, &inst.process).unwrap();
        let opt = aggregate_energy(&catalog::optimized_aggregates(), &machine, &inst.process).unwrap();
        let rc: f64 = base.times.iter().map(|t| t[Subprocess::Rc]).sum();
        assert_eq!(rc, 41_360.0);
        let s = compare_plans(&base, &opt).unwrap();
        let expected = 59.0 * 11.0 * 2591.93018;
        assert_relative_eq!(s.subprocess_saving(Subprocess::Rc), expected, max_relative = 1e-9);
    }

    #[test]
    fn compare_identical_is_all_zero() {
        let inst = catalog::ins_20(5);
        let b = aggregate_energy(&catalog::baseline_aggregates(), &inst.machine, &inst.process).unwrap();
        let s = compare_plans(&b, &b).unwrap();
        assert_eq!(s.total_saving_j, 0.0);
        assert!(s.by_subsystem.iter().all(|r| r.saving_j == 0.0 && r.share_pct == 0.0));
        assert!(s.by_subprocess.iter().all(|r| r.saving_j == 0.0 && r.share_pct == 0.0));
    }

    #[test]
    fn slice_only_difference_is_all_recoat() {
        let inst = catalog::ins_20(5);
        let a = catalog::baseline_aggregates();
        let mut b = a.clone();
        b[0].slices -= 59;
        let ea = aggregate_energy(&a, &inst.machine, &inst.process).unwrap();
        let eb = aggregate_energy(&b, &inst.machine, &inst.process).unwrap();
        let s = compare_plans(&ea, &eb).unwrap();
        assert_relative_eq!(s.by_subprocess[Subprocess::Rc.index()].share_pct, 100.0, max_relative = 1e-9);
        assert_eq!(s.subprocess_saving(Subprocess::Ph), 0.0);
    }

    #[test]
    fn compare_rejects_other_machine() {
        let inst = catalog::ins_20(5);
        let mut m2 = inst.machine.clone();
        m2.subsystem_powers.insert(Subsystem::Bs, 600.0);
        let a = aggregate_energy(&catalog::baseline_aggregates(), &inst.machine, &inst.process).unwrap();
        let b = aggregate_energy(&catalog::baseline_aggregates(), &m2, &inst.process).unwrap();
        assert!(matches!(compare_plans(&a, &b), Err(Error::MachineMismatch)));
    }
}
