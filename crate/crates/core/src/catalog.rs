//! Bundled reference data: the six-part catalogue with seven build
//! orientations each, the SLM280HL machine and its process parameters, and
//! the published per-batch aggregates of a two-batch baseline and an
//! optimized plan for the 20-part instance.

use std::collections::BTreeMap;

use crate::domain::{Instance, MachineSpec, OrientationGeometry, PartType, ProcessParams, Subprocess, Subsystem};
use crate::energy::BatchAggregate;

/// Preheating time used by the bundled fixtures, s.
///
/// Chosen together with [`REFERENCE_COOL_TIME`] so that the two-batch
/// baseline aggregates evaluate to 522.25 MJ in total.
pub const REFERENCE_PREHEAT_TIME: f64 = 3600.0;
/// Cooling time used by the bundled fixtures, s.
pub const REFERENCE_COOL_TIME: f64 = 3409.0;

/// (length, width, height, support volume) per orientation.
type Row = (f64, f64, f64, f64);

const PART_DATA: [(&str, f64, f64, [Row; 7]); 6] = [
    (
        "1",
        6744.00,
        8607.80,
        [
            (57.50, 24.60, 18.00, 1724.00),
            (38.80, 24.50, 41.70, 2596.00),
            (22.10, 32.00, 46.00, 2174.00),
            (18.00, 24.50, 47.60, 1489.00),
            (42.10, 28.10, 36.50, 2667.00),
            (40.38, 24.72, 39.98, 2162.00),
            (40.38, 27.74, 40.05, 2545.00),
        ],
    ),
    (
        "2",
        37635.00,
        17532.00,
        [
            (73.00, 64.00, 51.90, 23352.00),
            (78.30, 72.70, 76.40, 14668.00),
            (87.70, 70.50, 74.40, 3396.00),
            (73.00, 74.00, 64.00, 15453.00),
            (69.00, 56.90, 76.70, 13779.00),
            (73.17, 85.90, 74.03, 3694.00),
            (73.17, 62.49, 78.14, 2025.00),
        ],
    ),
    (
        "3",
        1029.00,
        1017.00,
        [
            (28.30, 13.80, 13.80, 98.00),
            (24.90, 13.80, 25.10, 142.00),
            (21.80, 15.90, 26.90, 376.00),
            (13.70, 13.80, 28.30, 0.00),
            (26.70, 14.90, 22.40, 536.00),
            (24.87, 13.75, 24.87, 155.00),
            (19.77, 21.95, 25.14, 138.55),
        ],
    ),
    (
        "4",
        105909.00,
        45458.30,
        [
            (69.00, 169.00, 36.60, 36239.00),
            (75.70, 165.70, 101.00, 10143.00),
            (139.00, 93.20, 155.70, 34743.00),
            (69.80, 36.60, 169.00, 44612.00),
            (90.60, 147.40, 136.20, 47096.00),
            (85.35, 158.36, 122.65, 13352.00),
            (141.10, 90.55, 157.22, 20212.00),
        ],
    ),
    (
        "5",
        28588.10,
        20398.80,
        [
            (77.00, 77.00, 60.90, 1183.00),
            (77.00, 77.00, 60.90, 5542.00),
            (76.70, 60.90, 76.70, 25217.00),
            (69.70, 74.60, 76.70, 25150.00),
            (73.20, 74.10, 71.10, 12042.00),
            (72.45, 73.73, 76.90, 25145.00),
            (74.02, 72.47, 76.74, 25145.00),
        ],
    ),
    (
        "6",
        6310.00,
        9792.00,
        [
            (16.60, 79.70, 11.50, 3908.00),
            (34.70, 71.20, 60.60, 3726.00),
            (27.20, 37.20, 80.40, 5187.00),
            (16.60, 11.50, 79.70, 2425.00),
            (29.60, 73.20, 57.40, 3737.00),
            (30.78, 16.17, 81.23, 2439.00),
            (26.36, 62.57, 65.43, 3267.00),
        ],
    ),
];

/// Maximum number of orientations available per catalogue part.
pub const MAX_ORIENTATIONS: usize = 7;

/// The six catalogue part types with all seven orientations.
pub fn part_types() -> Vec<PartType> {
    PART_DATA
        .iter()
        .map(|(id, volume, surface, rows)| PartType {
            id: (*id).to_string(),
            volume: *volume,
            surface_area: *surface,
            orientations: rows.iter().map(|&(l, w, h, s)| OrientationGeometry::new(l, w, h, s)).collect(),
        })
        .collect()
}

const POWERS: [(Subsystem, f64); 11] = [
    (Subsystem::Bs, 569.7),
    (Subsystem::Ht, 1122.3),
    (Subsystem::Wc, 713.3),
    (Subsystem::Co, 1739.4),
    (Subsystem::Lsb, 1770.9),
    (Subsystem::Lfc, 1770.9),
    (Subsystem::Lvh, 2022.9),
    (Subsystem::Lss, 2022.9),
    (Subsystem::Rm, 52.1),
    (Subsystem::Ev, 32.1),
    (Subsystem::Gp, 69.1),
];

/// State coefficients, columns in [`Subprocess::ALL`] order.
const COEFFICIENTS: [[f64; 7]; 11] = [
    [1.0, 1.0, 1.0, 1.0, 1.0, 1.0, 1.0],
    [1.0, 0.4826, 0.4826, 0.4826, 0.4826, 0.4826, 0.0],
    [1.0, 1.0, 1.0, 1.0, 1.0, 1.0, 1.0],
    [0.168, 0.353, 0.353, 0.353, 0.353, 0.353, 0.216],
    [0.0, 1.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 0.0],
    [0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0],
    [0.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0],
    [0.0, 0.0, 0.0, 0.0, 0.0, 1.0, 0.0],
    [1.0, 1.0, 1.0, 1.0, 1.0, 1.0, 0.0],
    [0.0, 1.0, 1.0, 1.0, 1.0, 1.0, 0.0],
];

/// SLM280HL: 268 × 268 × 315 mm platform, 11 s per recoat.
pub fn reference_machine() -> MachineSpec {
    let subsystem_powers = POWERS.iter().copied().collect();
    let state_coefficients = Subsystem::ALL
        .iter()
        .map(|&f| {
            let row: BTreeMap<Subprocess, f64> =
                Subprocess::ALL.iter().map(|&l| (l, COEFFICIENTS[f.index()][l.index()])).collect();
            (f, row)
        })
        .collect();
    MachineSpec {
        platform_length: 268.0,
        platform_width: 268.0,
        platform_height: 315.0,
        boundary_margin: 0.0,
        part_gap: 0.0,
        recoat_layer_time: 11.0,
        preheat_time: Some(REFERENCE_PREHEAT_TIME),
        cool_time: Some(REFERENCE_COOL_TIME),
        heating: None,
        cooling: None,
        subsystem_powers,
        state_coefficients,
    }
}

/// Two lasers, AlSi10Mg parameter set.
pub fn reference_process() -> ProcessParams {
    ProcessParams {
        laser_count: 2,
        border_speed: 730.0,
        contour_speed: 730.0,
        part_scan_speed: 1650.0,
        support_scan_speed: 1000.0,
        layer_thickness: 0.03,
        hatch_distance: 0.13,
    }
}

/// Copies of each catalogue part type in the 20-part instances.
pub const INS_20_COPIES: [usize; 6] = [4, 4, 3, 3, 3, 3];

/// The 20-part instance restricted to the first `orientations` build
/// orientations of every part (`ins_20_<orientations>`).
///
/// # Panics
///
/// If `orientations` is 0 or exceeds [`MAX_ORIENTATIONS`].
pub fn ins_20(orientations: usize) -> Instance {
    assert!((1..=MAX_ORIENTATIONS).contains(&orientations), "orientations must lie in 1..={MAX_ORIENTATIONS}");
    let mut types = part_types();
    for t in &mut types {
        t.orientations.truncate(orientations);
    }
    let copies: Vec<(usize, usize)> = INS_20_COPIES.iter().copied().enumerate().collect();
    Instance::with_copies(reference_machine(), reference_process(), types, &copies)
        .expect("catalogue references are consistent")
}

fn aggregate(surface: f64, volume: f64, support: f64, slices: u64, parts: usize) -> BatchAggregate {
    BatchAggregate { surface_area: surface, part_volume: volume, support_volume: support, slices, part_count: parts }
}

/// Published per-batch aggregates of the commercial-software baseline for
/// the 20-part, 5-orientation instance.
pub fn baseline_aggregates() -> Vec<BatchAggregate> {
    vec![aggregate(220_689.0, 146_217.0, 108_969.0, 2031, 12), aggregate(382_340.0, 188_334.0, 141_951.0, 1729, 8)]
}

/// Published per-batch aggregates of the optimized plan for the same
/// instance.
pub fn optimized_aggregates() -> Vec<BatchAggregate> {
    vec![aggregate(276_929.0, 186_356.0, 43_618.0, 2481, 14), aggregate(326_100.0, 148_195.0, 112_625.0, 1220, 6)]
}

/// The same aggregates with surface area and part volume exchanged.
///
/// The published per-batch rows total 603,029 mm² of surface and
/// 334,551 mm³ of volume, while the part catalogue sums to 334,557.5 mm²
/// and 603,024.3 mm³: the two rows are transposed relative to the part
/// data. Use this form to compare against plans built from the catalogue.
pub fn transpose_surface_volume(aggregates: &[BatchAggregate]) -> Vec<BatchAggregate> {
    aggregates
        .iter()
        .map(|a| BatchAggregate { surface_area: a.part_volume, part_volume: a.surface_area, ..*a })
        .collect()
}

/// Published total energy of the baseline plan, MJ.
pub const BASELINE_TOTAL_MJ: f64 = 522.25;
/// Published total energy of the optimized plan, MJ.
pub const OPTIMIZED_TOTAL_MJ: f64 = 480.56;

/// Published energy savings per subprocess between the baseline and the
/// optimized plan, MJ.
pub fn published_subprocess_savings() -> BTreeMap<Subprocess, f64> {
    [
        (Subprocess::Ph, 0.0),
        (Subprocess::Sb, 0.0),
        (Subprocess::Fc, 0.0),
        (Subprocess::Vh, 0.0),
        (Subprocess::Ss, 40.00),
        (Subprocess::Rc, 1.67),
        (Subprocess::Co, 0.0),
    ]
    .into_iter()
    .collect()
}

/// Published energy savings per subsystem, MJ. Subsystems missing from the
/// published breakdown are absent here.
pub fn published_subsystem_savings() -> BTreeMap<Subsystem, f64> {
    [
        (Subsystem::Bs, 5.36),
        (Subsystem::Ht, 5.1),
        (Subsystem::Wc, 6.72),
        (Subsystem::Co, 5.78),
        (Subsystem::Lss, 17.73),
        (Subsystem::Rm, 0.03),
        (Subsystem::Ev, 0.3),
        (Subsystem::Gp, 0.65),
    ]
    .into_iter()
    .collect()
}
