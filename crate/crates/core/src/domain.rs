//! Instance and plan data model.
//!
//! An [`Instance`] bundles the machine, the process parameters, the part
//! catalogue and the list of part instances to print. A [`Plan`] assigns each
//! part instance to a batch with a chosen build orientation and a position on
//! the platform.

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::ops::{Index, IndexMut};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Powered machine units.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Subsystem {
    /// Basic subsystem.
    Bs,
    /// Platform heater.
    Ht,
    /// Water circulation unit.
    Wc,
    /// Water-cooling unit.
    Co,
    /// Laser while scanning borders.
    Lsb,
    /// Laser while filling contours.
    Lfc,
    /// Laser while hatching volume.
    Lvh,
    /// Laser while scanning support structures.
    Lss,
    /// Recoater motor.
    Rm,
    /// Electric valves.
    Ev,
    /// Gas circulation pump motor.
    Gp,
}

impl Subsystem {
    pub const COUNT: usize = 11;
    pub const ALL: [Subsystem; Subsystem::COUNT] = [
        Subsystem::Bs,
        Subsystem::Ht,
        Subsystem::Wc,
        Subsystem::Co,
        Subsystem::Lsb,
        Subsystem::Lfc,
        Subsystem::Lvh,
        Subsystem::Lss,
        Subsystem::Rm,
        Subsystem::Ev,
        Subsystem::Gp,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn code(self) -> &'static str {
        match self {
            Subsystem::Bs => "bs",
            Subsystem::Ht => "ht",
            Subsystem::Wc => "wc",
            Subsystem::Co => "co",
            Subsystem::Lsb => "lsb",
            Subsystem::Lfc => "lfc",
            Subsystem::Lvh => "lvh",
            Subsystem::Lss => "lss",
            Subsystem::Rm => "rm",
            Subsystem::Ev => "ev",
            Subsystem::Gp => "gp",
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            Subsystem::Bs => "Basic subsystem",
            Subsystem::Ht => "Platform heater",
            Subsystem::Wc => "Water circulation unit",
            Subsystem::Co => "Water-cooling unit",
            Subsystem::Lsb => "Laser-scanning border",
            Subsystem::Lfc => "Laser-filling contour",
            Subsystem::Lvh => "Laser volume hatching",
            Subsystem::Lss => "Laser support structure",
            Subsystem::Rm => "Recoater motor",
            Subsystem::Ev => "Electric valves",
            Subsystem::Gp => "Gas circulation pump motor",
        }
    }
}

impl fmt::Display for Subsystem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.code())
    }
}

/// Machine phases of a single batch run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Subprocess {
    /// Preheating.
    Ph,
    /// Scanning borders.
    Sb,
    /// Filling contours.
    Fc,
    /// Volume hatching.
    Vh,
    /// Support structure scanning.
    Ss,
    /// Powder recoating.
    Rc,
    /// Cooling.
    Co,
}

impl Subprocess {
    pub const COUNT: usize = 7;
    pub const ALL: [Subprocess; Subprocess::COUNT] = [
        Subprocess::Ph,
        Subprocess::Sb,
        Subprocess::Fc,
        Subprocess::Vh,
        Subprocess::Ss,
        Subprocess::Rc,
        Subprocess::Co,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn code(self) -> &'static str {
        match self {
            Subprocess::Ph => "ph",
            Subprocess::Sb => "sb",
            Subprocess::Fc => "fc",
            Subprocess::Vh => "vh",
            Subprocess::Ss => "ss",
            Subprocess::Rc => "rc",
            Subprocess::Co => "co",
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            Subprocess::Ph => "Preheating",
            Subprocess::Sb => "Scan border",
            Subprocess::Fc => "Fill contour",
            Subprocess::Vh => "Volume hatching",
            Subprocess::Ss => "Support structure",
            Subprocess::Rc => "Recoating",
            Subprocess::Co => "Cooling",
        }
    }
}

impl fmt::Display for Subprocess {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.code())
    }
}

/// Geometry of one build orientation: bounding box of the platform
/// projection plus height and support volume.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OrientationGeometry {
    /// mm
    pub height: f64,
    /// mm
    pub length: f64,
    /// mm
    pub width: f64,
    /// mm³
    pub support_volume: f64,
}

impl OrientationGeometry {
    pub fn new(length: f64, width: f64, height: f64, support_volume: f64) -> Self {
        OrientationGeometry { height, length, width, support_volume }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PartType {
    pub id: String,
    /// mm³
    pub volume: f64,
    /// Surface scanned as borders and contours, mm².
    pub surface_area: f64,
    pub orientations: Vec<OrientationGeometry>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PartInstance {
    pub instance_id: String,
    /// Index into [`Instance::part_types`].
    pub part_type: usize,
}

/// Heating duration regression `t(T) = c1·T² + c2·T − c3`, evaluated from
/// `initial_temp` to `final_temp`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HeatingRegression {
    pub c1: f64,
    pub c2: f64,
    pub c3: f64,
    /// °C
    pub initial_temp: f64,
    /// °C
    pub final_temp: f64,
}

/// Cooling duration regression `t(T) = c4·T² − c5·T + c6`, evaluated from
/// `start_temp` down to `final_temp`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CoolingRegression {
    pub c4: f64,
    pub c5: f64,
    pub c6: f64,
    /// °C
    pub start_temp: f64,
    /// °C
    pub final_temp: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MachineSpec {
    /// mm, along x
    pub platform_length: f64,
    /// mm, along y
    pub platform_width: f64,
    /// mm
    pub platform_height: f64,
    /// Minimum distance from parts to the platform edge, mm.
    #[serde(default)]
    pub boundary_margin: f64,
    /// Minimum distance between parts, mm.
    #[serde(default)]
    pub part_gap: f64,
    /// Time to spread one powder layer, s.
    pub recoat_layer_time: f64,
    /// s; ignored when `heating` is given.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub preheat_time: Option<f64>,
    /// s; ignored when `cooling` is given.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cool_time: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub heating: Option<HeatingRegression>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cooling: Option<CoolingRegression>,
    /// W
    pub subsystem_powers: BTreeMap<Subsystem, f64>,
    pub state_coefficients: BTreeMap<Subsystem, BTreeMap<Subprocess, f64>>,
}

impl MachineSpec {
    /// Preheating duration per opened batch.
    pub fn preheat_duration(&self) -> Result<f64> {
        match (&self.heating, self.preheat_time) {
            (Some(h), _) => crate::energy::regression_duration(
                [h.c1, h.c2, h.c3],
                h.initial_temp,
                h.final_temp,
                crate::energy::RegressionForm::Heating,
            ),
            (None, Some(t)) => Ok(t),
            (None, None) => Err(Error::InvalidInput("machine has neither preheat_time nor heating regression".into())),
        }
    }

    /// Cooling duration per opened batch.
    pub fn cool_duration(&self) -> Result<f64> {
        match (&self.cooling, self.cool_time) {
            (Some(c), _) => crate::energy::regression_duration(
                [c.c4, c.c5, c.c6],
                c.start_temp,
                c.final_temp,
                crate::energy::RegressionForm::Cooling,
            ),
            (None, Some(t)) => Ok(t),
            (None, None) => Err(Error::InvalidInput("machine has neither cool_time nor cooling regression".into())),
        }
    }

    pub fn coefficient(&self, f: Subsystem, l: Subprocess) -> Option<f64> {
        self.state_coefficients.get(&f).and_then(|row| row.get(&l)).copied()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProcessParams {
    pub laser_count: u32,
    /// mm/s
    pub border_speed: f64,
    /// mm/s
    pub contour_speed: f64,
    /// mm/s
    pub part_scan_speed: f64,
    /// mm/s
    pub support_scan_speed: f64,
    /// mm
    pub layer_thickness: f64,
    /// mm
    pub hatch_distance: f64,
}

impl ProcessParams {
    /// Volumetric build-up rate for part volume, mm³/s.
    pub fn part_buildup_rate(&self) -> Result<f64> {
        crate::energy::buildup_rate(self.laser_count, self.hatch_distance, self.layer_thickness, self.part_scan_speed)
    }

    /// Volumetric build-up rate for support structures, mm³/s.
    pub fn support_buildup_rate(&self) -> Result<f64> {
        crate::energy::buildup_rate(
            self.laser_count,
            self.hatch_distance,
            self.layer_thickness,
            self.support_scan_speed,
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Placement {
    pub instance_id: String,
    /// Zero-based index into the part type's orientation list.
    pub orientation: usize,
    /// Left-bottom corner, mm.
    pub x: f64,
    pub y: f64,
    /// `true` when the part's length runs along the platform length.
    pub rotated: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Batch {
    pub index: usize,
    pub placements: Vec<Placement>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Plan {
    pub batches: Vec<Batch>,
}

impl Plan {
    pub fn part_count(&self) -> usize {
        self.batches.iter().map(|b| b.placements.len()).sum()
    }

    /// Checks that every part instance appears exactly once and that every
    /// batch is non-empty and references valid orientations.
    pub fn check_membership(&self, instance: &Instance) -> Result<()> {
        let mut seen = vec![false; instance.parts.len()];
        for batch in &self.batches {
            if batch.placements.is_empty() {
                return Err(Error::EmptyBatch(batch.index));
            }
            for p in &batch.placements {
                let j = instance.part_index(&p.instance_id).ok_or_else(|| Error::UnknownPart(p.instance_id.clone()))?;
                if seen[j] {
                    return Err(Error::InvalidPlan(format!("part '{}' appears more than once", p.instance_id)));
                }
                seen[j] = true;
                instance.orientation(j, p.orientation)?;
            }
        }
        if let Some(j) = seen.iter().position(|s| !s) {
            return Err(Error::InvalidPlan(format!(
                "part '{}' is not assigned to any batch",
                instance.parts[j].instance_id
            )));
        }
        Ok(())
    }
}

/// Per-subprocess durations of one batch, s.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct SubprocessTimes(pub [f64; Subprocess::COUNT]);

impl SubprocessTimes {
    pub fn total(&self) -> f64 {
        self.0.iter().sum()
    }

    pub fn iter(&self) -> impl Iterator<Item = (Subprocess, f64)> + '_ {
        Subprocess::ALL.iter().map(move |&l| (l, self.0[l.index()]))
    }
}

impl Index<Subprocess> for SubprocessTimes {
    type Output = f64;
    fn index(&self, l: Subprocess) -> &f64 {
        &self.0[l.index()]
    }
}

impl IndexMut<Subprocess> for SubprocessTimes {
    fn index_mut(&mut self, l: Subprocess) -> &mut f64 {
        &mut self.0[l.index()]
    }
}

impl Serialize for SubprocessTimes {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let map: BTreeMap<Subprocess, f64> = self.iter().collect();
        map.serialize(s)
    }
}

impl<'de> Deserialize<'de> for SubprocessTimes {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let map = BTreeMap::<Subprocess, f64>::deserialize(d)?;
        let mut t = SubprocessTimes::default();
        for (l, v) in map {
            t[l] = v;
        }
        Ok(t)
    }
}

/// A complete problem: machine, process and the parts to print.
#[derive(Debug, Clone)]
pub struct Instance {
    pub machine: MachineSpec,
    pub process: ProcessParams,
    pub part_types: Vec<PartType>,
    pub parts: Vec<PartInstance>,
    index: HashMap<String, usize>,
}

impl Instance {
    /// Fails only on dangling part type references; everything else is
    /// reported by [`validate_instance`].
    pub fn new(
        machine: MachineSpec,
        process: ProcessParams,
        part_types: Vec<PartType>,
        parts: Vec<PartInstance>,
    ) -> Result<Self> {
        if let Some(p) = parts.iter().find(|p| p.part_type >= part_types.len()) {
            return Err(Error::InvalidInput(format!(
                "part '{}' references unknown part type #{}",
                p.instance_id, p.part_type
            )));
        }
        let mut index = HashMap::with_capacity(parts.len());
        for (j, p) in parts.iter().enumerate() {
            index.entry(p.instance_id.clone()).or_insert(j);
        }
        Ok(Instance { machine, process, part_types, parts, index })
    }

    /// Builds an instance with `copies[t]` instances of `part_types[t]`,
    /// named `<type id>-<copy>`.
    pub fn with_copies(
        machine: MachineSpec,
        process: ProcessParams,
        part_types: Vec<PartType>,
        copies: &[(usize, usize)],
    ) -> Result<Self> {
        let mut parts = Vec::new();
        for &(t, n) in copies {
            let id = part_types
                .get(t)
                .map(|p| p.id.clone())
                .ok_or_else(|| Error::InvalidInput(format!("unknown part type #{t}")))?;
            for c in 1..=n {
                parts.push(PartInstance { instance_id: format!("{id}-{c}"), part_type: t });
            }
        }
        Instance::new(machine, process, part_types, parts)
    }

    pub fn part_index(&self, instance_id: &str) -> Option<usize> {
        self.index.get(instance_id).copied()
    }

    pub fn part_type_of(&self, j: usize) -> &PartType {
        &self.part_types[self.parts[j].part_type]
    }

    pub fn orientation(&self, j: usize, k: usize) -> Result<&OrientationGeometry> {
        let pt = self.part_type_of(j);
        pt.orientations
            .get(k)
            .ok_or_else(|| Error::UnknownOrientation { part: self.parts[j].instance_id.clone(), orientation: k })
    }

    pub fn orientation_count(&self, j: usize) -> usize {
        self.part_type_of(j).orientations.len()
    }

    pub fn total_part_volume(&self) -> f64 {
        (0..self.parts.len()).map(|j| self.part_type_of(j).volume).sum()
    }

    pub fn total_surface_area(&self) -> f64 {
        (0..self.parts.len()).map(|j| self.part_type_of(j).surface_area).sum()
    }

    /// Whether orientation `k` of part `j` fits the empty platform in at
    /// least one rotation.
    pub fn fits_alone(&self, j: usize, k: usize) -> bool {
        let Some(o) = self.part_type_of(j).orientations.get(k) else {
            return false;
        };
        let m = &self.machine;
        let usable_l = m.platform_length - 2.0 * m.boundary_margin;
        let usable_w = m.platform_width - 2.0 * m.boundary_margin;
        let tol = crate::packing::GEOMETRY_TOLERANCE;
        let flat = (o.length <= usable_l + tol && o.width <= usable_w + tol)
            || (o.width <= usable_l + tol && o.length <= usable_w + tol);
        flat && o.height <= m.platform_height + tol
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ViolationKind {
    NonPositiveDimension,
    EmptyOrientationSet,
    DuplicateInstanceId,
    FitsInNoOrientation,
    InvalidMachine,
    InvalidProcess,
    MissingStateCoefficient,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Violation {
    pub kind: ViolationKind,
    pub subject: String,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.violations.is_empty()
    }

    fn push(&mut self, kind: ViolationKind, subject: impl Into<String>, message: impl Into<String>) {
        self.violations.push(Violation { kind, subject: subject.into(), message: message.into() });
    }
}

fn positive(v: f64) -> bool {
    v.is_finite() && v > 0.0
}

fn non_negative(v: f64) -> bool {
    v.is_finite() && v >= 0.0
}

/// Checks every structural and physical constraint on an instance. Pure.
pub fn validate_instance(instance: &Instance) -> ValidationReport {
    let mut report = ValidationReport::default();
    validate_machine(&instance.machine, &mut report);
    validate_process(&instance.process, &mut report);

    for pt in &instance.part_types {
        if !positive(pt.volume) {
            report.push(
                ViolationKind::NonPositiveDimension,
                &pt.id,
                format!("non-positive dimension: volume = {}", pt.volume),
            );
        }
        if !positive(pt.surface_area) {
            report.push(
                ViolationKind::NonPositiveDimension,
                &pt.id,
                format!("non-positive dimension: surface area = {}", pt.surface_area),
            );
        }
        if pt.orientations.is_empty() {
            report.push(ViolationKind::EmptyOrientationSet, &pt.id, "part type has no build orientation");
        }
        for (k, o) in pt.orientations.iter().enumerate() {
            for (name, v) in [("height", o.height), ("length", o.length), ("width", o.width)] {
                if !positive(v) {
                    report.push(
                        ViolationKind::NonPositiveDimension,
                        &pt.id,
                        format!("non-positive dimension: orientation {} {name} = {v}", k + 1),
                    );
                }
            }
            if !non_negative(o.support_volume) {
                report.push(
                    ViolationKind::NonPositiveDimension,
                    &pt.id,
                    format!("negative dimension: orientation {} support volume = {}", k + 1, o.support_volume),
                );
            }
        }
    }

    let mut seen = HashMap::new();
    for (j, p) in instance.parts.iter().enumerate() {
        if let Some(first) = seen.insert(p.instance_id.as_str(), j) {
            report.push(
                ViolationKind::DuplicateInstanceId,
                &p.instance_id,
                format!("duplicate instance id (first seen at #{first})"),
            );
        }
    }

    // Only meaningful when the platform itself is sane.
    let m = &instance.machine;
    if positive(m.platform_length) && positive(m.platform_width) && positive(m.platform_height) {
        let mut reported = vec![false; instance.part_types.len()];
        for j in 0..instance.parts.len() {
            let t = instance.parts[j].part_type;
            if reported[t] || instance.part_types[t].orientations.is_empty() {
                continue;
            }
            if !(0..instance.orientation_count(j)).any(|k| instance.fits_alone(j, k)) {
                reported[t] = true;
                report.push(
                    ViolationKind::FitsInNoOrientation,
                    &instance.part_types[t].id,
                    "part fits in no orientation on the empty platform",
                );
            }
        }
    }
    report
}

fn validate_machine(m: &MachineSpec, report: &mut ValidationReport) {
    for (name, v) in [
        ("platform_length", m.platform_length),
        ("platform_width", m.platform_width),
        ("platform_height", m.platform_height),
        ("recoat_layer_time", m.recoat_layer_time),
    ] {
        if !positive(v) {
            report.push(ViolationKind::InvalidMachine, name, format!("{name} must be positive, got {v}"));
        }
    }
    for (name, v) in [("boundary_margin", m.boundary_margin), ("part_gap", m.part_gap)] {
        if !non_negative(v) {
            report.push(ViolationKind::InvalidMachine, name, format!("{name} must be non-negative, got {v}"));
        }
    }
    if positive(m.platform_length)
        && positive(m.platform_width)
        && 2.0 * m.boundary_margin >= m.platform_length.min(m.platform_width)
    {
        report.push(ViolationKind::InvalidMachine, "boundary_margin", "boundary margin leaves no usable platform area");
    }
    match m.preheat_duration() {
        Ok(t) if non_negative(t) => {}
        Ok(t) => report.push(
            ViolationKind::InvalidMachine,
            "preheat_time",
            format!("preheat time must be non-negative, got {t}"),
        ),
        Err(e) => report.push(ViolationKind::InvalidMachine, "preheat_time", e.to_string()),
    }
    match m.cool_duration() {
        Ok(t) if non_negative(t) => {}
        Ok(t) => {
            report.push(ViolationKind::InvalidMachine, "cool_time", format!("cool time must be non-negative, got {t}"))
        }
        Err(e) => report.push(ViolationKind::InvalidMachine, "cool_time", e.to_string()),
    }
    for f in Subsystem::ALL {
        match m.subsystem_powers.get(&f) {
            None => report.push(ViolationKind::InvalidMachine, f.code(), format!("missing power for subsystem '{f}'")),
            Some(&p) if !non_negative(p) => report.push(
                ViolationKind::InvalidMachine,
                f.code(),
                format!("power of subsystem '{f}' must be non-negative, got {p}"),
            ),
            _ => {}
        }
        let Some(row) = m.state_coefficients.get(&f) else {
            report.push(
                ViolationKind::MissingStateCoefficient,
                f.code(),
                format!("missing state coefficients for subsystem '{f}'"),
            );
            continue;
        };
        for l in Subprocess::ALL {
            match row.get(&l) {
                None => report.push(
                    ViolationKind::MissingStateCoefficient,
                    f.code(),
                    format!("missing state coefficient for subsystem '{f}' in subprocess '{l}'"),
                ),
                Some(&phi) if !(0.0..=1.0).contains(&phi) => report.push(
                    ViolationKind::InvalidMachine,
                    f.code(),
                    format!("state coefficient of '{f}' in '{l}' must lie in [0, 1], got {phi}"),
                ),
                _ => {}
            }
        }
    }
}

fn validate_process(p: &ProcessParams, report: &mut ValidationReport) {
    if p.laser_count == 0 {
        report.push(ViolationKind::InvalidProcess, "laser_count", "laser_count must be at least 1");
    }
    for (name, v) in [
        ("border_speed", p.border_speed),
        ("contour_speed", p.contour_speed),
        ("part_scan_speed", p.part_scan_speed),
        ("support_scan_speed", p.support_scan_speed),
        ("layer_thickness", p.layer_thickness),
        ("hatch_distance", p.hatch_distance),
    ] {
        if !positive(v) {
            report.push(ViolationKind::InvalidProcess, name, format!("{name} must be positive, got {v}"));
        }
    }
}
