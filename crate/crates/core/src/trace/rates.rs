use std::collections::BTreeSet;
use std::fmt::Write as _;

use super::{Manifest, Periphery, Tokens, TraceError};

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RateRow {
    pub ap: String,
    pub kind: String,
    pub file: String,
    /// Shortest and longest gap between consecutive changes, in ms.
    pub min: Option<u64>,
    pub max: Option<u64>,
    pub skipped: bool,
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct RateReport {
    pub rows: Vec<RateRow>,
    pub min: Option<u64>,
    pub max: Option<u64>,
}

impl RateReport {
    /// Largest polling interval at which no sensor changes twice between polls.
    pub fn recommended_interval(&self) -> Option<u64> {
        self.min
    }

    pub fn to_table(&self) -> String {
        let mut s = String::from("ap\ttype\tfile\tmin\tmax\tskipped\n");
        let opt = |v: Option<u64>| v.map_or("-".to_string(), |x| x.to_string());
        for r in &self.rows {
            let _ = writeln!(s, "{}\t{}\t{}\t{}\t{}\t{}", r.ap, r.kind, r.file, opt(r.min), opt(r.max), r.skipped);
        }
        let _ = writeln!(s, "# aggregate min {} max {}", opt(self.min), opt(self.max));
        if let Some(iv) = self.recommended_interval() {
            let _ = writeln!(s, "# recommended interval <= {iv} ms");
        }
        s
    }
}

/// Timestamps at which the interpreted value changes; the first entry
/// always opens the sequence.
pub(crate) fn change_points(p: &Periphery, tokens: &Tokens) -> Result<Vec<(u64, bool)>, TraceError> {
    let mut out: Vec<(u64, bool)> = Vec::new();
    for (t, v) in p.interpreted(tokens)? {
        if out.last().is_none_or(|&(_, prev)| prev != v) {
            out.push((t, v));
        }
    }
    Ok(out)
}

/// Change-rate summary for the peripheries whose proposition is in `used`
/// (all of them when `used` is `None`).
pub fn rate_analysis(m: &Manifest, used: Option<&BTreeSet<String>>) -> Result<RateReport, TraceError> {
    let mut report = RateReport::default();
    for p in &m.peripheries {
        if used.is_some_and(|u| !u.contains(&p.ap)) {
            continue;
        }
        let points = change_points(p, &m.tokens)?;
        let gaps: Vec<u64> = points.windows(2).map(|w| w[1].0 - w[0].0).collect();
        let (min, max) = (gaps.iter().min().copied(), gaps.iter().max().copied());
        let skipped = gaps.is_empty();
        if !skipped {
            report.min = Some(report.min.map_or(min.unwrap(), |a| a.min(min.unwrap())));
            report.max = Some(report.max.map_or(max.unwrap(), |a| a.max(max.unwrap())));
        }
        report.rows.push(RateRow {
            ap: p.ap.clone(),
            kind: p.kind.to_string(),
            file: p.file.display().to_string(),
            min,
            max,
            skipped,
        });
    }
    Ok(report)
}
