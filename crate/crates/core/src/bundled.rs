//! Specification sets shipped with the crate.

use std::fmt::Write as _;

use crate::registry::{Registry, RegistryError};

/// The smart-apartment rule set.
pub const AMIQUAL: &str = include_str!("../specs/amiqual.dspec");

/// Activities of daily living.
pub const ADL: &[&str] = &[
    "toilet",
    "sink_usage",
    "shower_usage",
    "napping",
    "dressing",
    "reading",
    "office_tv",
    "computing",
    "cooking",
    "washing_dishes",
    "kactivity",
    "preparing",
    "livingroom_tv",
    "eating",
];

/// Added on top of [`ADL`] for the per-floor and whole-house activity.
pub const HOUSE: &[&str] = &["actfloor0", "actfloor1", "acthouse"];

/// Added on top of ADL+H.
pub const TWO_PEOPLE: &[&str] = &["notwopeople"];

/// Remaining meta-specifications.
pub const META: &[&str] = &["restricttv_office", "restricttv_living", "restricttv", "firehazard"];

/// Named cumulative label sets: ADL, ADL+H, ADL+H+2, ADL+M.
pub fn label_sets() -> Vec<(&'static str, Vec<&'static str>)> {
    let h: Vec<&str> = ADL.iter().chain(HOUSE).copied().collect();
    let h2: Vec<&str> = h.iter().chain(TWO_PEOPLE).copied().collect();
    let m: Vec<&str> = h2.iter().chain(META).copied().collect();
    vec![("ADL", ADL.to_vec()), ("ADL+H", h), ("ADL+H+2", h2), ("ADL+M", m)]
}

pub fn amiqual() -> Registry {
    Registry::parse(AMIQUAL).expect("bundled spec is valid")
}

/// Light-check spec for `rooms` rooms: `light<i>`, `sc_light<i>` and `sc_ok`.
pub fn light_check(rooms: usize) -> Result<Registry, RegistryError> {
    Registry::parse(&light_check_text(rooms))
}

pub fn light_check_text(rooms: usize) -> String {
    let mut s = String::new();
    for i in 0..rooms {
        let _ = writeln!(s, "component lamp{i} {{ l{i} }}");
        let _ = writeln!(s, "component switch{i} {{ s{i} }}");
    }
    s.push_str("component hall { hall_panel }\n");
    for i in 0..rooms {
        let _ = writeln!(s, "monitor light{i} @ lamp{i} := l{i}");
        let _ = writeln!(s, "monitor sc_light{i} @ switch{i} := G(s{i} -> X(light{i} U !s{i}))");
    }
    if rooms > 0 {
        let all: Vec<String> = (0..rooms).map(|i| format!("sc_light{i}")).collect();
        let _ = writeln!(s, "monitor sc_ok @ hall := {}", all.join(" & "));
    }
    s
}

/// Two safety monitors and their conjunction, expanded on received FALSE
/// verdicts.
pub const QUIESCENT_TRIPLE: &str = "\
component c0 { a }
component c1 { b }
component c2 { c }
monitor M0 @ c0 := G !a
monitor M1 @ c1 := G !b
monitor M2 @ c2 := M0 & M1 trigger { F(M0) | F(M1) }
";
