//! Per-batch, per-subsystem and per-subprocess reports as JSON-ready
//! structs and CSV tables.
//!
//! CSV values are rounded to two decimals; every total row is the sum of
//! the rounded rows above it, so the tables add up exactly.

use serde::Serialize;

use crate::domain::{Instance, MachineSpec, Plan, ProcessParams, Subprocess, Subsystem};
use crate::energy::{
    batch_aggregate, utilization, BatchAggregate, EnergyBreakdown, EnergyModel, ReconciliationRow, SavingRow,
    SavingsReport,
};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BatchRow {
    /// One-based.
    pub batch: usize,
    pub parts: usize,
    pub surface_area_mm2: f64,
    pub part_volume_mm3: f64,
    pub support_volume_mm3: f64,
    pub slices: u64,
    /// Footprint area over platform area; unknown for aggregate batches.
    pub utilization: Option<f64>,
    /// Sum of the subprocess durations, s.
    pub processing_time_s: f64,
    pub energy_j: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EnergyReport {
    pub batches: Vec<BatchRow>,
    pub breakdown: EnergyBreakdown,
    pub ec_mj: f64,
    pub ec_without_ph_co_mj: f64,
    /// Energy per unit part volume, J/mm³.
    pub ev_j_per_mm3: f64,
    /// Energy per unit scanned surface, J/mm².
    pub ec_per_surface_j_per_mm2: f64,
    pub total_processing_time_s: f64,
}

fn build(aggregates: &[BatchAggregate], utilizations: Vec<Option<f64>>, model: &EnergyModel) -> EnergyReport {
    let breakdown = model.evaluate_aggregates(aggregates);
    let batches = aggregates
        .iter()
        .zip(utilizations)
        .enumerate()
        .map(|(i, (a, utilization))| BatchRow {
            batch: i + 1,
            parts: a.part_count,
            surface_area_mm2: a.surface_area,
            part_volume_mm3: a.part_volume,
            support_volume_mm3: a.support_volume,
            slices: a.slices,
            utilization,
            processing_time_s: breakdown.times[i].total(),
            energy_j: breakdown.by_batch[i],
        })
        .collect();
    let volume: f64 = aggregates.iter().map(|a| a.part_volume).sum();
    let surface: f64 = aggregates.iter().map(|a| a.surface_area).sum();
    let ratio = |den: f64| if den > 0.0 { breakdown.total / den } else { 0.0 };
    EnergyReport {
        batches,
        ec_mj: breakdown.total / 1e6,
        ec_without_ph_co_mj: breakdown.total_without_ph_co() / 1e6,
        ev_j_per_mm3: ratio(volume),
        ec_per_surface_j_per_mm2: ratio(surface),
        total_processing_time_s: breakdown.processing_time(),
        breakdown,
    }
}

/// Report for a plan with placements.
pub fn report_for_plan(plan: &Plan, instance: &Instance) -> Result<EnergyReport> {
    plan.check_membership(instance)?;
    let model = EnergyModel::for_instance(instance)?;
    let mut aggregates = Vec::with_capacity(plan.batches.len());
    let mut utilizations = Vec::with_capacity(plan.batches.len());
    for b in &plan.batches {
        aggregates.push(batch_aggregate(b, instance)?);
        utilizations.push(Some(utilization(b, instance)?));
    }
    Ok(build(&aggregates, utilizations, &model))
}

/// Report for batches known only by their aggregates.
pub fn report_for_aggregates(
    aggregates: &[BatchAggregate],
    machine: &MachineSpec,
    process: &ProcessParams,
) -> Result<EnergyReport> {
    if aggregates.is_empty() {
        return Err(Error::InvalidPlan("plan has no batches".into()));
    }
    let model = EnergyModel::new(machine, process)?;
    Ok(build(aggregates, vec![None; aggregates.len()], &model))
}

fn round2(v: f64) -> f64 {
    let r = (v * 100.0).round() / 100.0;
    if r == 0.0 {
        0.0
    } else {
        r
    }
}

fn fmt2(v: f64) -> String {
    format!("{:.2}", round2(v))
}

/// Accumulates rounded numeric columns for the total row.
struct Table {
    writer: csv::Writer<Vec<u8>>,
    totals: Vec<f64>,
}

impl Table {
    fn new(header: &[&str], numeric: usize) -> Result<Self> {
        let mut writer = csv::Writer::from_writer(Vec::new());
        writer.write_record(header).map_err(csv_error)?;
        Ok(Table { writer, totals: vec![0.0; numeric] })
    }

    /// `labels` then rounded numbers; `None` cells are left empty and do
    /// not count towards the total.
    fn row(&mut self, labels: &[String], numbers: &[Option<f64>]) -> Result<()> {
        let mut record: Vec<String> = labels.to_vec();
        for (i, n) in numbers.iter().enumerate() {
            match n {
                Some(v) => {
                    let r = round2(*v);
                    self.totals[i] += r;
                    record.push(fmt2(r));
                }
                None => record.push(String::new()),
            }
        }
        self.writer.write_record(&record).map_err(csv_error)
    }

    fn finish(mut self, labels: &[String], summed: &[bool]) -> Result<String> {
        let mut record: Vec<String> = labels.to_vec();
        for (t, &s) in self.totals.iter().zip(summed) {
            record.push(if s { fmt2(*t) } else { String::new() });
        }
        self.writer.write_record(&record).map_err(csv_error)?;
        let bytes = self.writer.into_inner().map_err(|e| Error::InvalidInput(e.to_string()))?;
        String::from_utf8(bytes).map_err(|e| Error::InvalidInput(e.to_string()))
    }
}

fn csv_error(e: csv::Error) -> Error {
    Error::InvalidInput(format!("csv: {e}"))
}

impl EnergyReport {
    /// One row per batch plus a total row.
    pub fn batches_csv(&self) -> Result<String> {
        let mut t = Table::new(
            &[
                "batch",
                "parts",
                "surface_area_mm2",
                "part_volume_mm3",
                "support_volume_mm3",
                "slices",
                "utilization_pct",
                "processing_time_s",
                "energy_mj",
            ],
            8,
        )?;
        for b in &self.batches {
            t.row(
                &[b.batch.to_string()],
                &[
                    Some(b.parts as f64),
                    Some(b.surface_area_mm2),
                    Some(b.part_volume_mm3),
                    Some(b.support_volume_mm3),
                    Some(b.slices as f64),
                    b.utilization.map(|u| u * 100.0),
                    Some(b.processing_time_s),
                    Some(b.energy_j / 1e6),
                ],
            )?;
        }
        t.finish(&["total".into()], &[true, true, true, true, true, false, true, true])
    }

    pub fn subsystems_csv(&self) -> Result<String> {
        let mut t = Table::new(&["subsystem", "name", "energy_mj"], 1)?;
        for f in Subsystem::ALL {
            t.row(&[f.code().into(), f.label().into()], &[Some(self.breakdown.subsystem(f) / 1e6)])?;
        }
        t.finish(&["total".into(), String::new()], &[true])
    }

    pub fn subprocesses_csv(&self) -> Result<String> {
        let mut t = Table::new(&["subprocess", "name", "time_s", "energy_mj"], 2)?;
        for l in Subprocess::ALL {
            let time: f64 = self.breakdown.times.iter().map(|x| x[l]).sum();
            t.row(&[l.code().into(), l.label().into()], &[Some(time), Some(self.breakdown.subprocess(l) / 1e6)])?;
        }
        t.finish(&["total".into(), String::new()], &[true, true])
    }
}

fn saving_rows<K>(
    rows: &[SavingRow<K>],
    code: impl Fn(&K) -> (&'static str, &'static str),
    first: &str,
) -> Result<String> {
    let mut t = Table::new(&[first, "name", "baseline_mj", "candidate_mj", "saving_mj", "share_pct"], 4)?;
    for r in rows {
        let (c, n) = code(&r.key);
        t.row(
            &[c.into(), n.into()],
            &[Some(r.baseline_j / 1e6), Some(r.candidate_j / 1e6), Some(r.saving_j / 1e6), Some(r.share_pct)],
        )?;
    }
    t.finish(&["total".into(), String::new()], &[true, true, true, true])
}

/// Savings per subsystem with a total row.
pub fn subsystem_savings_csv(s: &SavingsReport) -> Result<String> {
    saving_rows(&s.by_subsystem, |f| (f.code(), f.label()), "subsystem")
}

/// Savings per subprocess with a total row.
pub fn subprocess_savings_csv(s: &SavingsReport) -> Result<String> {
    saving_rows(&s.by_subprocess, |l| (l.code(), l.label()), "subprocess")
}

/// Computed-vs-published savings; flagged rows read `DISCREPANCY`.
pub fn reconciliation_csv(rows: &[ReconciliationRow]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["subprocess", "computed_mj", "published_mj", "residual_mj", "status"]).map_err(csv_error)?;
    for r in rows {
        w.write_record([
            r.subprocess.code().to_string(),
            fmt2(r.computed_mj),
            fmt2(r.published_mj),
            fmt2(r.residual_mj),
            if r.discrepancy { "DISCREPANCY".into() } else { "ok".into() },
        ])
        .map_err(csv_error)?;
    }
    let bytes = w.into_inner().map_err(|e| Error::InvalidInput(e.to_string()))?;
    String::from_utf8(bytes).map_err(|e| Error::InvalidInput(e.to_string()))
}
