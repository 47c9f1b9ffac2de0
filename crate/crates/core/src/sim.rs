//! Round-based execution of a decentralized specification.

use std::collections::{BTreeMap, HashMap};
use std::str::FromStr;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use thiserror::Error;

use crate::ehe::{sadvs, Condition, Ehe, MonitorTables, Trigger};
use crate::expr::{Atom, Round, SimplifyStats};
use crate::ltl::Verdict;
use crate::memory::{ConflictError, Memory};
use crate::registry::Registry;
use crate::synthesis::{synthesize_with, SynthConfig, SynthError};
use crate::trace::ObservationTrace;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum DeliveryPolicy {
    /// Arrives in the round after it was sent.
    #[default]
    Immediate,
    /// Arrives exactly `d` rounds after sending.
    FixedDelay(u64),
    /// Arrives after a uniform draw in `1..=max_delay` rounds.
    Reorder { max_delay: u64, seed: u64 },
}

impl DeliveryPolicy {
    pub fn max_delay(&self) -> u64 {
        match *self {
            DeliveryPolicy::Immediate => 1,
            DeliveryPolicy::FixedDelay(d) => d,
            DeliveryPolicy::Reorder { max_delay, .. } => max_delay,
        }
    }
}

impl FromStr for DeliveryPolicy {
    type Err = String;

    /// `immediate`, `delay:N` or `reorder:N:SEED`, with `N >= 1`.
    fn from_str(s: &str) -> Result<Self, String> {
        let parts: Vec<&str> = s.split(':').collect();
        let num = |x: &str| x.parse::<u64>().map_err(|_| format!("bad number `{x}` in delivery policy"));
        let positive = |d: u64| if d == 0 { Err("delays start at 1 round".to_string()) } else { Ok(d) };
        match parts.as_slice() {
            ["immediate"] => Ok(DeliveryPolicy::Immediate),
            ["delay", d] => Ok(DeliveryPolicy::FixedDelay(positive(num(d)?)?)),
            ["reorder", d, seed] => Ok(DeliveryPolicy::Reorder { max_delay: positive(num(d)?)?, seed: num(seed)? }),
            _ => Err(format!("expected immediate, delay:N or reorder:N:SEED, got `{s}`")),
        }
    }
}

impl std::fmt::Display for DeliveryPolicy {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            DeliveryPolicy::Immediate => f.write_str("immediate"),
            DeliveryPolicy::FixedDelay(d) => write!(f, "delay:{d}"),
            DeliveryPolicy::Reorder { max_delay, seed } => write!(f, "reorder:{max_delay}:{seed}"),
        }
    }
}

#[derive(Clone, Debug)]
pub struct SimConfig {
    pub delivery: DeliveryPolicy,
    pub gc: bool,
    /// Honor declared triggers; when false every monitor expands eagerly.
    pub lazy: bool,
    pub parallel: bool,
    pub synth: SynthConfig,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig { delivery: DeliveryPolicy::Immediate, gc: true, lazy: true, parallel: false, synth: SynthConfig::default() }
    }
}

#[derive(Debug, Error)]
pub enum SimError {
    #[error("monitor {label}: {source}")]
    Synth {
        label: String,
        #[source]
        source: SynthError,
    },
    #[error("no trace column for proposition {prop} (monitor {label})")]
    MissingTrace { label: String, prop: String },
    #[error("monitor {label}: {source}")]
    Conflict {
        label: String,
        #[source]
        source: ConflictError,
    },
}

impl SimError {
    pub fn is_capacity(&self) -> bool {
        matches!(self, SimError::Synth { .. })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Message {
    pub from: usize,
    pub to: usize,
    pub t: Round,
    pub verdict: bool,
    pub sent: Round,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct VerdictRow {
    pub t: Round,
    pub verdict: Verdict,
    /// Round the verdict was concluded in; `None` when the trace ended first.
    pub concluded: Option<Round>,
}

impl VerdictRow {
    pub fn delay(&self) -> Option<Round> {
        self.concluded.map(|c| c - self.t)
    }

    pub fn truncated(&self) -> bool {
        self.concluded.is_none()
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct RoundMetrics {
    pub round: Round,
    pub msgs: u64,
    pub simplifications: u64,
    pub max_ehe_nodes: usize,
    pub max_ehe_entries: usize,
    pub memory: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Report {
    pub labels: Vec<String>,
    /// Trace length; rounds past it only deliver messages still in flight.
    pub rounds: Round,
    /// Per monitor, one row per timestamp of the trace.
    pub verdicts: Vec<Vec<VerdictRow>>,
    pub metrics: Vec<RoundMetrics>,
    /// Messages carrying a verdict about each timestamp.
    pub msgs_by_timestamp: Vec<u64>,
}

impl Report {
    pub fn index_of(&self, label: &str) -> Option<usize> {
        self.labels.iter().position(|l| l == label)
    }

    pub fn rows(&self, label: &str) -> &[VerdictRow] {
        self.index_of(label).map_or(&[], |i| self.verdicts[i].as_slice())
    }

    pub fn verdict(&self, label: &str, t: Round) -> Option<Verdict> {
        self.rows(label).get(t as usize).map(|r| r.verdict)
    }

    /// Messages per timestamp averaged over `window`.
    pub fn measured_rate(&self, window: std::ops::Range<Round>) -> f64 {
        let len = window.end.saturating_sub(window.start);
        if len == 0 {
            return 0.0;
        }
        let total: u64 = window.map(|t| self.msgs_by_timestamp.get(t as usize).copied().unwrap_or(0)).sum();
        total as f64 / len as f64
    }

    /// Rate over the middle half of the trace.
    pub fn steady_state_rate(&self) -> f64 {
        self.measured_rate(self.rounds / 4..self.rounds * 3 / 4)
    }

    pub fn total_messages(&self) -> u64 {
        self.metrics.iter().map(|m| m.msgs).sum()
    }

    pub fn peak_memory(&self) -> usize {
        self.metrics.iter().map(|m| m.memory).max().unwrap_or(0)
    }

    pub fn peak_ehe_nodes(&self) -> usize {
        self.metrics.iter().map(|m| m.max_ehe_nodes).max().unwrap_or(0)
    }

    pub fn peak_ehe_entries(&self) -> usize {
        self.metrics.iter().map(|m| m.max_ehe_entries).max().unwrap_or(0)
    }

    /// Maximal runs of TRUE verdicts per label, inclusive.
    pub fn true_intervals(&self, label: &str) -> Vec<(Round, Round)> {
        let mut out = Vec::new();
        let mut open: Option<Round> = None;
        for r in self.rows(label) {
            match (r.verdict == Verdict::True, open) {
                (true, None) => open = Some(r.t),
                (false, Some(s)) => {
                    out.push((s, r.t - 1));
                    open = None;
                }
                _ => {}
            }
        }
        if let Some(s) = open {
            out.push((s, self.rounds - 1));
        }
        out
    }
}

#[derive(Clone, Debug)]
enum Mode {
    Eager,
    Wildcard,
    On(Condition),
}

#[derive(Clone, Debug)]
struct Node {
    label: Arc<str>,
    tables: Arc<MonitorTables>,
    /// Own-component propositions the monitor reads, with their trace column.
    own: Vec<(usize, Arc<str>)>,
    dependents: Vec<usize>,
    mode: Mode,
    ehe: Ehe,
    memory: Memory,
    t_check: Round,
    gc_floor: Option<Round>,
    stats: SimplifyStats,
    log: Vec<VerdictRow>,
}

#[derive(Default)]
struct Step {
    sent: Vec<(usize, Round, bool)>,
    simplifications: u64,
    peak_nodes: usize,
    peak_entries: usize,
}

impl Node {
    fn store(&mut self, a: Atom, v: bool) -> Result<(), SimError> {
        let t = a.t;
        let fresh = self.memory.store(a, v).map_err(|source| SimError::Conflict { label: self.label.to_string(), source })?;
        if fresh {
            self.ehe.touch(t);
        }
        Ok(())
    }

    fn round(
        &mut self,
        r: Round,
        inbox: &[(Arc<str>, Message)],
        trace: &ObservationTrace,
        gc: bool,
    ) -> Result<Step, SimError> {
        let n = trace.len() as Round;
        let before = self.stats.steps;
        let mut step = Step::default();
        for (from, m) in inbox {
            if self.gc_floor.is_some_and(|f| m.t <= f) {
                continue;
            }
            self.store(Atom { t: m.t, name: from.clone() }, m.verdict)?;
        }
        if r < n {
            for i in 0..self.own.len() {
                let (col, name) = self.own[i].clone();
                self.store(Atom { t: r, name }, trace.value(r as usize, col))?;
            }
        }
        let horizon = r.min(n.saturating_sub(1));
        while self.t_check <= horizon && self.t_check < n {
            let cap = (r + 1).min(n);
            let target = match &self.mode {
                Mode::Eager => Some(cap),
                Mode::Wildcard => (!inbox.is_empty()).then(|| self.memory.t_max()).flatten().map(|t| t + 1),
                Mode::On(c) => {
                    let last = self.ehe.t_last();
                    let t_max = self.memory.t_max().unwrap_or(last);
                    sadvs(c, &self.memory, last.checked_sub(1), t_max).last().map(|t| t + 1)
                }
            };
            if let Some(target) = target.map(|t| t.min(cap)) {
                self.ehe.smove(target, &mut self.stats);
            }
            step.peak_nodes = step.peak_nodes.max(self.ehe.node_count());
            step.peak_entries = step.peak_entries.max(self.ehe.entry_count());
            self.ehe.resolve(&self.memory, &mut self.stats);
            let (_, _, v) = self.ehe.current();
            if !v.is_final() {
                break;
            }
            let t = self.t_check;
            self.log.push(VerdictRow { t, verdict: v, concluded: Some(r) });
            for &d in &self.dependents {
                step.sent.push((d, t, v == Verdict::True));
            }
            if gc {
                self.memory.gc(t);
                self.gc_floor = Some(t);
            }
            self.t_check = t + 1;
            self.ehe = Ehe::new(self.tables.clone(), self.t_check);
        }
        step.peak_nodes = step.peak_nodes.max(self.ehe.node_count());
        step.peak_entries = step.peak_entries.max(self.ehe.entry_count());
        step.simplifications = self.stats.steps - before;
        Ok(step)
    }
}

/// Synthesized monitors for a registry, shared between runs.
#[derive(Clone, Debug)]
pub struct Compiled {
    tables: Vec<Arc<MonitorTables>>,
}

impl Compiled {
    /// Synthesizes one monitor per distinct formula.
    pub fn new(reg: &Registry, cfg: &SynthConfig) -> Result<Self, SimError> {
        let mut cache: HashMap<String, Arc<MonitorTables>> = HashMap::new();
        let mut tables = Vec::with_capacity(reg.len());
        for m in reg.monitors() {
            let key = m.formula.to_string();
            let t = match cache.get(&key) {
                Some(t) => t.clone(),
                None => {
                    let (mon, _) = synthesize_with(&m.formula, cfg)
                        .map_err(|source| SimError::Synth { label: m.label.clone(), source })?;
                    let t = MonitorTables::new(mon);
                    cache.insert(key, t.clone());
                    t
                }
            };
            tables.push(t);
        }
        Ok(Compiled { tables })
    }

    pub fn tables(&self, i: usize) -> &Arc<MonitorTables> {
        &self.tables[i]
    }
}

pub fn simulate(reg: &Registry, trace: &ObservationTrace, cfg: &SimConfig) -> Result<Report, SimError> {
    let compiled = Compiled::new(reg, &cfg.synth)?;
    simulate_compiled(reg, &compiled, trace, cfg)
}

pub fn simulate_compiled(
    reg: &Registry,
    compiled: &Compiled,
    trace: &ObservationTrace,
    cfg: &SimConfig,
) -> Result<Report, SimError> {
    let labels: Vec<Arc<str>> = reg.monitors().iter().map(|m| Arc::from(m.label.as_str())).collect();
    let mut nodes = Vec::with_capacity(reg.len());
    for (i, m) in reg.monitors().iter().enumerate() {
        let tables = compiled.tables(i).clone();
        let refs = m.formula.references();
        let mut own = Vec::new();
        for name in &tables.monitor.alphabet {
            if refs.contains(name) {
                continue;
            }
            let col = trace
                .column(name)
                .ok_or_else(|| SimError::MissingTrace { label: m.label.clone(), prop: name.clone() })?;
            own.push((col, Arc::from(name.as_str())));
        }
        let ref_only = own.is_empty() && !refs.is_empty();
        let mode = match (&m.trigger, cfg.lazy && ref_only) {
            (Trigger::Wildcard, true) => Mode::Wildcard,
            (Trigger::On(c), true) => Mode::On(c.clone()),
            _ => Mode::Eager,
        };
        nodes.push(Node {
            label: labels[i].clone(),
            ehe: Ehe::new(tables.clone(), 0),
            tables,
            own,
            dependents: reg.dependents(i).to_vec(),
            mode,
            memory: Memory::new(),
            t_check: 0,
            gc_floor: None,
            stats: SimplifyStats::default(),
            log: Vec::new(),
        });
    }

    let n = trace.len() as Round;
    let mut rng = match cfg.delivery {
        DeliveryPolicy::Reorder { seed, .. } => Some(ChaCha8Rng::seed_from_u64(seed)),
        _ => None,
    };
    let mut pending: BTreeMap<Round, Vec<Message>> = BTreeMap::new();
    let mut metrics = Vec::new();
    let mut msgs_by_timestamp = vec![0u64; n as usize];
    let mut r: Round = 0;
    while r < n || !pending.is_empty() {
        let mut inboxes: Vec<Vec<(Arc<str>, Message)>> = vec![Vec::new(); nodes.len()];
        if let Some(due) = pending.remove(&r) {
            for m in due {
                inboxes[m.to].push((labels[m.from].clone(), m));
            }
        }
        let steps: Vec<Result<Step, SimError>> = if cfg.parallel {
            nodes.par_iter_mut().zip(inboxes.par_iter()).map(|(node, inbox)| node.round(r, inbox, trace, cfg.gc)).collect()
        } else {
            nodes.iter_mut().zip(inboxes.iter()).map(|(node, inbox)| node.round(r, inbox, trace, cfg.gc)).collect()
        };
        let mut row = RoundMetrics { round: r, ..RoundMetrics::default() };
        for (from, step) in steps.into_iter().enumerate() {
            let step = step?;
            row.simplifications += step.simplifications;
            row.max_ehe_nodes = row.max_ehe_nodes.max(step.peak_nodes);
            row.max_ehe_entries = row.max_ehe_entries.max(step.peak_entries);
            for (to, t, verdict) in step.sent {
                let delay = match (cfg.delivery, rng.as_mut()) {
                    (DeliveryPolicy::Immediate, _) => 1,
                    (DeliveryPolicy::FixedDelay(d), _) => d,
                    (DeliveryPolicy::Reorder { max_delay, .. }, Some(g)) => g.gen_range(1..=max_delay),
                    (DeliveryPolicy::Reorder { .. }, None) => unreachable!("rng seeded for reorder"),
                };
                row.msgs += 1;
                msgs_by_timestamp[t as usize] += 1;
                pending.entry(r + delay).or_default().push(Message { from, to, t, verdict, sent: r });
            }
        }
        row.memory = nodes.iter().map(|n| n.memory.len()).sum();
        metrics.push(row);
        r += 1;
    }

    let verdicts = nodes
        .into_iter()
        .map(|node| {
            let mut log = node.log;
            for t in node.t_check..n {
                log.push(VerdictRow { t, verdict: Verdict::Unknown, concluded: None });
            }
            log
        })
        .collect();
    Ok(Report {
        labels: labels.iter().map(|l| l.to_string()).collect(),
        rounds: n,
        verdicts,
        metrics,
        msgs_by_timestamp,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    const PAIR: &str = "\
component lamp { l }
component switch { s }
monitor light @ lamp := l
monitor sc_light @ switch := G(s -> X(light U !s))
";

    fn trace(names: &[&str], rows: &[&[u8]]) -> ObservationTrace {
        let mut t = ObservationTrace::new(names.iter().map(|s| s.to_string()).collect());
        for r in rows {
            t.push(r.iter().map(|&b| b == 1).collect());
        }
        t
    }

    #[test]
    fn light_pair_reports_the_violation() {
        let reg = Registry::parse(PAIR).unwrap();
        // l, s: switch pressed at 1 while the light stays off at 2
        let tr = trace(&["l", "s"], &[&[0, 0], &[0, 1], &[0, 1], &[0, 0]]);
        let rep = simulate(&reg, &tr, &SimConfig::default()).unwrap();
        let light: Vec<Verdict> = rep.rows("light").iter().map(|r| r.verdict).collect();
        assert_eq!(light, [Verdict::False; 4]);
        assert!(rep.rows("light").iter().all(|r| r.delay() == Some(0)));
        let sc = rep.rows("sc_light");
        assert_eq!(sc[0].verdict, Verdict::False);
        // the light verdict for 2 arrives in round 3
        assert_eq!(sc[0].concluded, Some(3));
        assert_eq!(sc[1].verdict, Verdict::False);
        assert!(sc[2].truncated() && sc[3].truncated());
        assert_eq!(rep.msgs_by_timestamp, [1, 1, 1, 1]);
    }

    #[test]
    fn empty_trace_gives_empty_report() {
        let reg = Registry::parse(PAIR).unwrap();
        let rep = simulate(&reg, &trace(&["l", "s"], &[]), &SimConfig::default()).unwrap();
        assert!(rep.verdicts.iter().all(Vec::is_empty));
        assert!(rep.metrics.is_empty());
    }

    #[test]
    fn missing_columns_are_reported() {
        let reg = Registry::parse(PAIR).unwrap();
        let err = simulate(&reg, &trace(&["l"], &[&[1]]), &SimConfig::default()).unwrap_err();
        assert!(matches!(err, SimError::MissingTrace { ref prop, .. } if prop == "s"), "{err}");
    }

    #[test]
    fn policies_parse() {
        assert_eq!("immediate".parse(), Ok(DeliveryPolicy::Immediate));
        assert_eq!("delay:3".parse(), Ok(DeliveryPolicy::FixedDelay(3)));
        assert_eq!("reorder:4:9".parse(), Ok(DeliveryPolicy::Reorder { max_delay: 4, seed: 9 }));
        for bad in ["delay:0", "delay", "reorder:2", "fast"] {
            assert!(bad.parse::<DeliveryPolicy>().is_err(), "{bad}");
        }
        let p = DeliveryPolicy::Reorder { max_delay: 4, seed: 9 };
        assert_eq!(p.to_string().parse(), Ok(p));
    }

    #[test]
    fn delays_shift_conclusions_only() {
        let reg = Registry::parse(PAIR).unwrap();
        let tr = trace(&["l", "s"], &[&[0, 1], &[1, 1], &[1, 0], &[0, 0], &[0, 1], &[0, 0]]);
        let base = simulate(&reg, &tr, &SimConfig::default()).unwrap();
        for delivery in [DeliveryPolicy::FixedDelay(3), DeliveryPolicy::Reorder { max_delay: 4, seed: 2 }] {
            let cfg = SimConfig { delivery, ..SimConfig::default() };
            let other = simulate(&reg, &tr, &cfg).unwrap();
            for (a, b) in base.verdicts.iter().flatten().zip(other.verdicts.iter().flatten()) {
                assert_eq!(a.verdict, b.verdict);
            }
        }
    }

    #[test]
    fn constant_monitor_concludes_without_input() {
        let reg = Registry::parse("component c { p }\nmonitor yes @ c := true | p & !p\n").unwrap();
        let rep = simulate(&reg, &trace(&["p"], &[&[0], &[1]]), &SimConfig::default()).unwrap();
        assert_eq!(
            rep.rows("yes"),
            &[
                VerdictRow { t: 0, verdict: Verdict::True, concluded: Some(0) },
                VerdictRow { t: 1, verdict: Verdict::True, concluded: Some(1) }
            ]
        );
    }

    #[test]
    fn intervals_and_rates() {
        let reg = Registry::parse(PAIR).unwrap();
        let tr = trace(&["l", "s"], &[&[1, 0], &[1, 0], &[0, 0], &[1, 0]]);
        let rep = simulate(&reg, &tr, &SimConfig::default()).unwrap();
        assert_eq!(rep.true_intervals("light"), [(0, 1), (3, 3)]);
        assert_eq!(rep.measured_rate(0..4), 1.0);
        assert_eq!(rep.total_messages(), 4);
    }
}
