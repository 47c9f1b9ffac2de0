//! Scoring verdict streams against annotated activity intervals.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use thiserror::Error;

use crate::expr::Round;
use crate::ltl::Verdict;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum EvalError {
    #[error("line {line}: {message}")]
    Format { line: usize, message: String },
    #[error("{label}: interval [{start}, {end}] overlaps [{prev_start}, {prev_end}]")]
    Overlap { label: String, start: Round, end: Round, prev_start: Round, prev_end: Round },
}

/// Inclusive `[start, end]` round intervals per activity label.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct AnnotationSet {
    intervals: BTreeMap<String, Vec<(Round, Round)>>,
}

impl AnnotationSet {
    pub fn new() -> Self {
        Self::default()
    }

    /// Inserts an interval keeping the list sorted; rejects overlaps.
    pub fn add(&mut self, label: &str, start: Round, end: Round) -> Result<(), EvalError> {
        assert!(start <= end, "interval [{start}, {end}]");
        let list = self.intervals.entry(label.to_string()).or_default();
        let at = list.partition_point(|&(s, _)| s < start);
        let clash = [at.checked_sub(1), Some(at)]
            .into_iter()
            .flatten()
            .filter_map(|i| list.get(i))
            .find(|&&(s, e)| s <= end && start <= e);
        if let Some(&(s, e)) = clash {
            return Err(EvalError::Overlap { label: label.into(), start, end, prev_start: s, prev_end: e });
        }
        list.insert(at, (start, end));
        Ok(())
    }

    pub fn parse(text: &str) -> Result<Self, EvalError> {
        let mut set = AnnotationSet::new();
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            let body = raw.trim();
            if body.is_empty() || body.starts_with('#') {
                continue;
            }
            let cols: Vec<&str> = body.split(',').map(str::trim).collect();
            let fmt = |message: String| EvalError::Format { line, message };
            if cols.len() != 3 {
                return Err(fmt(format!("expected label,start_round,end_round, got {} columns", cols.len())));
            }
            let (Ok(s), Ok(e)) = (cols[1].parse::<Round>(), cols[2].parse::<Round>()) else {
                if line == 1 {
                    continue; // header
                }
                return Err(fmt("rounds must be non-negative integers".into()));
            };
            if s > e {
                return Err(fmt(format!("start {s} after end {e}")));
            }
            set.add(cols[0], s, e)?;
        }
        Ok(set)
    }

    pub fn to_text(&self) -> String {
        let mut s = String::from("label,start_round,end_round\n");
        for (label, list) in &self.intervals {
            for (a, b) in list {
                let _ = writeln!(s, "{label},{a},{b}");
            }
        }
        s
    }

    pub fn labels(&self) -> impl Iterator<Item = &str> {
        self.intervals.keys().map(String::as_str)
    }

    pub fn get(&self, label: &str) -> &[(Round, Round)] {
        self.intervals.get(label).map_or(&[], Vec::as_slice)
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Score {
    pub tp: u64,
    pub fp: u64,
    pub interval_rounds: u64,
    pub precision: Option<f64>,
    pub recall: Option<f64>,
    pub f1: Option<f64>,
}

fn inside(intervals: &[(Round, Round)], t: Round) -> bool {
    let i = intervals.partition_point(|&(s, _)| s <= t);
    i > 0 && t <= intervals[i - 1].1
}

/// Precision, recall and F1 (harmonic mean) of the TRUE rounds of `verdicts`
/// against sorted, disjoint `intervals`. UNKNOWN and FALSE are negatives.
pub fn score(verdicts: impl IntoIterator<Item = (Round, Verdict)>, intervals: &[(Round, Round)]) -> Score {
    let (mut tp, mut fp) = (0, 0);
    for (t, v) in verdicts {
        if v == Verdict::True {
            if inside(intervals, t) {
                tp += 1;
            } else {
                fp += 1;
            }
        }
    }
    let interval_rounds: u64 = intervals.iter().map(|(s, e)| e - s + 1).sum();
    let precision = (tp + fp > 0).then(|| tp as f64 / (tp + fp) as f64);
    let recall = (interval_rounds > 0).then(|| tp as f64 / interval_rounds as f64);
    let f1 = match (precision, recall) {
        (Some(p), Some(r)) if p + r > 0.0 => Some(2.0 * p * r / (p + r)),
        (Some(_), Some(_)) => Some(0.0),
        _ => None,
    };
    Score { tp, fp, interval_rounds, precision, recall, f1 }
}

/// One row per annotated label present in `verdicts`, plus warnings for
/// annotated labels without verdicts.
pub fn score_table(
    verdicts: &BTreeMap<String, BTreeMap<Round, Verdict>>,
    annotations: &AnnotationSet,
) -> (Vec<(String, Score)>, Vec<String>) {
    let mut rows = Vec::new();
    let mut warnings = Vec::new();
    for label in annotations.labels() {
        match verdicts.get(label) {
            Some(v) => rows.push((label.to_string(), score(v.iter().map(|(t, x)| (*t, *x)), annotations.get(label)))),
            None => warnings.push(format!("no verdicts for annotated label {label}")),
        }
    }
    (rows, warnings)
}

pub fn render_table(rows: &[(String, Score)]) -> String {
    let f = |x: Option<f64>| x.map_or("NA".to_string(), |v| format!("{v:.2}"));
    let mut s = String::from("label\tprecision\trecall\tf1\ttp\tfp\tinterval_rounds\n");
    for (label, sc) in rows {
        let _ = writeln!(
            s,
            "{label}\t{}\t{}\t{}\t{}\t{}\t{}",
            f(sc.precision),
            f(sc.recall),
            f(sc.f1),
            sc.tp,
            sc.fp,
            sc.interval_rounds
        );
    }
    s
}
