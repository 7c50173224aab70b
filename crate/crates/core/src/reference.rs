//! Published reference values the crate is checked against.

use crate::continuation::{EventKind, FamilySeed};

/// Sun-Jupiter-like mass parameter used for all family explorations.
pub const SUN_JUPITER_MU: f64 = 0.00095;

/// Critical mass as printed, to six decimals.
pub const MU_CRITICAL_PRINTED: f64 = 0.011942;

/// Resonant masses `μ_k` for `k = 2..=10`, as printed to six decimals.
pub const RESONANT_MU_PRINTED: [(i32, f64); 9] = [
    (2, 0.007733),
    (3, 0.004390),
    (4, 0.002713),
    (5, 0.001817),
    (6, 0.001293),
    (7, 0.000965),
    (8, 0.000746),
    (9, 0.000594),
    (10, 0.000483),
];

/// `μ₂ = 1/2 − √((5/3)(10181 + 458√2073)) / 462`.
pub fn resonant_mu_2_radical() -> f64 {
    0.5 - ((5.0 / 3.0) * (10181.0 + 458.0 * 2073f64.sqrt())).sqrt() / 462.0
}

/// `μ₃ = 1/2 − √(5(24077 + 6464√57)) / 1218`.
pub fn resonant_mu_3_radical() -> f64 {
    0.5 - (5.0 * (24077.0 + 6464.0 * 57f64.sqrt())).sqrt() / 1218.0
}

/// Linear short and long periods around `L3` at [`SUN_JUPITER_MU`].
pub const SHORT_PERIOD: f64 = 6.35271;
pub const LONG_PERIOD: f64 = 44.8422;

/// A row of the short-period family table. `x0`, `vx0` are taken where the
/// orbit crosses the horizontal line through `L3` moving down on the
/// `x > 0` side; `y0` and `vy0` are omitted as in the original table.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ShortFamilyRow {
    pub c: f64,
    pub x0: f64,
    pub vx0: f64,
    pub period: f64,
}

pub const SHORT_FAMILY_TABLE: [ShortFamilyRow; 4] = [
    ShortFamilyRow { c: 0.386390, x0: 0.0052630577, vx0: -0.000003114, period: 6.352714861 },
    ShortFamilyRow { c: 0.000490, x0: 0.6349317173, vx0: -0.0452963681, period: 6.352729416 },
    ShortFamilyRow { c: -6.033910, x0: 2.4990322956, vx0: -0.6970916287, period: 6.352966358 },
    ShortFamilyRow { c: -99.90891, x0: 7.7351384429, vx0: -6.6652904069, period: 6.3561117178 },
];

/// A located family event.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FamilyEventRef {
    pub label: &'static str,
    /// Family whose record carries the event.
    pub family: FamilySeed,
    pub kind: EventKind,
    pub c: f64,
    pub tolerance: f64,
}

/// Family events at [`SUN_JUPITER_MU`]. The parent bifurcation of `Ha` is
/// the period-doubling point of `g-upper`, and the short-family stability
/// loss is the first point where `|a_h|` reaches 2.
pub const FAMILY_EVENTS: [FamilyEventRef; 10] = [
    FamilyEventRef {
        label: "g bifurcation",
        family: FamilySeed::G,
        kind: EventKind::Bifurcation,
        c: 4.4984,
        tolerance: 0.01,
    },
    FamilyEventRef {
        label: "g a_h-critical",
        family: FamilySeed::G,
        kind: EventKind::AhCritical(2),
        c: 4.498,
        tolerance: 0.01,
    },
    FamilyEventRef {
        label: "Hb maximum",
        family: FamilySeed::Hb,
        kind: EventKind::TurningPoint,
        c: 4.2451,
        tolerance: 0.01,
    },
    FamilyEventRef {
        label: "Ha parent bifurcation",
        family: FamilySeed::GUpper,
        kind: EventKind::Bifurcation,
        c: 4.1178,
        tolerance: 0.01,
    },
    FamilyEventRef {
        label: "long turning point",
        family: FamilySeed::Long,
        kind: EventKind::TurningPoint,
        c: 0.795,
        tolerance: 0.01,
    },
    FamilyEventRef {
        label: "long terminal bifurcation",
        family: FamilySeed::Long,
        kind: EventKind::Bifurcation,
        c: -5.190,
        tolerance: 0.02,
    },
    FamilyEventRef {
        label: "short horizontal-stability loss",
        family: FamilySeed::Short,
        kind: EventKind::AhCritical(-2),
        c: -66.11,
        tolerance: 0.2,
    },
    FamilyEventRef {
        label: "a vertical critical 1",
        family: FamilySeed::A,
        kind: EventKind::AvCritical(2),
        c: 4.006,
        tolerance: 0.01,
    },
    FamilyEventRef {
        label: "a vertical critical 2",
        family: FamilySeed::A,
        kind: EventKind::AvCritical(2),
        c: 1.246,
        tolerance: 0.01,
    },
    FamilyEventRef {
        label: "a vertical critical 3",
        family: FamilySeed::A,
        kind: EventKind::AvCritical(-2),
        c: -0.013,
        tolerance: 0.01,
    },
];
