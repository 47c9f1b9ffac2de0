//! Execution history encoding: which automaton states are possible at each
//! timestamp, as Boolean expressions over atoms.
//!
//! Entry `t` describes the state after the events at `origin..t-1` have been
//! consumed, so the transition into `t` reads atoms stamped `t-1`.

use std::collections::{BTreeSet, VecDeque};
use std::fmt::Write as _;
use std::sync::Arc;

use crate::expr::{Atom, Expr, Round, SimplifyStats};
use crate::ltl::Verdict;
use crate::memory::Memory;
use crate::synthesis::{Guard, MooreMonitor, StateId};

/// A monitor together with its precomputed transition guards.
#[derive(Debug)]
pub struct MonitorTables {
    pub monitor: MooreMonitor,
    names: Vec<Arc<str>>,
    guards: Vec<Vec<(StateId, Guard)>>,
}

impl MonitorTables {
    pub fn new(monitor: MooreMonitor) -> Arc<Self> {
        let names = monitor.alphabet.iter().map(|s| Arc::from(s.as_str())).collect();
        let guards = (0..monitor.state_count() as StateId).map(|q| monitor.guards(q)).collect();
        Arc::new(MonitorTables { monitor, names, guards })
    }

    pub fn names(&self) -> &[Arc<str>] {
        &self.names
    }

    fn stamp(&self, g: &Guard, t: Round, st: &mut SimplifyStats) -> Expr {
        match g {
            Guard::True => Expr::tt(),
            Guard::False => Expr::ff(),
            Guard::Var(i) => Expr::atom(Atom { t, name: self.names[*i].clone() }),
            Guard::Not(a) => {
                let x = self.stamp(a, t, st);
                Expr::not(x, st)
            }
            Guard::And(a, b) => {
                let (x, y) = (self.stamp(a, t, st), self.stamp(b, t, st));
                Expr::and(x, y, st)
            }
            Guard::Or(a, b) => {
                let (x, y) = (self.stamp(a, t, st), self.stamp(b, t, st));
                Expr::or(x, y, st)
            }
        }
    }
}

/// Expansion condition over received verdicts: `T(dep)` / `F(dep)` literals.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Condition {
    Lit { label: String, verdict: bool },
    And(Box<Condition>, Box<Condition>),
    Or(Box<Condition>, Box<Condition>),
}

impl Condition {
    pub fn lit(label: impl Into<String>, verdict: bool) -> Self {
        Condition::Lit { label: label.into(), verdict }
    }

    pub fn and(a: Condition, b: Condition) -> Self {
        Condition::And(Box::new(a), Box::new(b))
    }

    pub fn or(a: Condition, b: Condition) -> Self {
        Condition::Or(Box::new(a), Box::new(b))
    }

    pub fn labels(&self) -> BTreeSet<String> {
        let mut out = BTreeSet::new();
        self.collect(&mut out);
        out
    }

    fn collect(&self, out: &mut BTreeSet<String>) {
        match self {
            Condition::Lit { label, .. } => {
                out.insert(label.clone());
            }
            Condition::And(a, b) | Condition::Or(a, b) => {
                a.collect(out);
                b.collect(out);
            }
        }
    }

    /// `T(x) | F(x)` over every label, the explicit form of the wildcard.
    pub fn any_message(labels: &[String]) -> Option<Self> {
        labels
            .iter()
            .map(|l| Condition::or(Condition::lit(l.clone(), true), Condition::lit(l.clone(), false)))
            .reduce(Condition::or)
    }
}

impl std::fmt::Display for Condition {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Condition::Lit { label, verdict } => write!(f, "{}({label})", if *verdict { "T" } else { "F" }),
            Condition::And(a, b) => write!(f, "({a} & {b})"),
            Condition::Or(a, b) => write!(f, "({a} | {b})"),
        }
    }
}

/// When a monitor extends its encoding.
#[derive(Clone, Debug, PartialEq, Eq, Default)]
pub enum Trigger {
    #[default]
    Eager,
    Wildcard,
    On(Condition),
}

/// Evaluates `cond` at timestamp `t`; absent atoms make both literals false.
pub fn sadv(cond: &Condition, m: &Memory, t: Round) -> bool {
    match cond {
        Condition::Lit { label, verdict } => m.lookup(t, label) == Some(*verdict),
        Condition::And(a, b) => sadv(a, m, t) && sadv(b, m, t),
        Condition::Or(a, b) => sadv(a, m, t) || sadv(b, m, t),
    }
}

/// Timestamps in `(t_cur, t_max]` at which `cond` holds. `t_cur == None`
/// means nothing has been consumed yet.
pub fn sadvs(cond: &Condition, m: &Memory, t_cur: Option<Round>, t_max: Round) -> BTreeSet<Round> {
    let lo = t_cur.map_or(0, |t| t + 1);
    (lo..=t_max).filter(|&t| sadv(cond, m, t)).collect()
}

#[derive(Clone, Debug)]
pub struct Ehe {
    tables: Arc<MonitorTables>,
    origin: Round,
    base: Round,
    entries: VecDeque<Vec<(StateId, Expr)>>,
    resolved: (Round, StateId),
    // entries with index > this are re-evaluated by the next `resolve`
    dirty: Option<Round>,
    nodes: usize,
}

impl Ehe {
    pub fn new(tables: Arc<MonitorTables>, origin: Round) -> Self {
        let q0 = tables.monitor.initial;
        let mut entries = VecDeque::new();
        entries.push_back(vec![(q0, Expr::tt())]);
        Ehe { tables, origin, base: origin, entries, resolved: (origin, q0), dirty: None, nodes: 1 }
    }

    pub fn origin(&self) -> Round {
        self.origin
    }

    /// Highest expanded timestamp.
    pub fn t_last(&self) -> Round {
        self.base + self.entries.len() as Round - 1
    }

    pub fn tables(&self) -> &Arc<MonitorTables> {
        &self.tables
    }

    /// Latest resolved `(t, state, verdict)`.
    pub fn current(&self) -> (Round, StateId, Verdict) {
        let (t, q) = self.resolved;
        (t, q, self.tables.monitor.verdict(q))
    }

    /// Total expression nodes over all entries.
    pub fn node_count(&self) -> usize {
        self.nodes
    }

    pub fn entry_count(&self) -> usize {
        self.entries.iter().map(Vec::len).sum()
    }

    pub fn entry(&self, t: Round, q: StateId) -> Option<&Expr> {
        let i = t.checked_sub(self.base)? as usize;
        self.entries.get(i)?.iter().find(|(s, _)| *s == q).map(|(_, e)| e)
    }

    /// `(t, state, expr)` rows in timestamp order.
    pub fn rows(&self) -> impl Iterator<Item = (Round, StateId, &Expr)> {
        self.entries
            .iter()
            .enumerate()
            .flat_map(move |(i, row)| row.iter().map(move |(q, e)| (self.base + i as Round, *q, e)))
    }

    pub fn dump(&self) -> String {
        let mut s = String::new();
        for (t, q, e) in self.rows() {
            let _ = writeln!(s, "{t} | q{q} | {e}");
        }
        s
    }

    /// Notes that an atom stamped `t` was stored.
    pub fn touch(&mut self, t: Round) {
        self.dirty = Some(self.dirty.map_or(t, |d| d.min(t)));
    }

    fn mark_from(&mut self, t: Round) {
        // entries with index >= t + 1 are new or changed
        self.touch(t);
    }

    fn step(&self, row: &[(StateId, Expr)], t: Round, st: &mut SimplifyStats) -> Vec<(StateId, Expr)> {
        let mut next: Vec<(StateId, Expr)> = Vec::new();
        for (p, e) in row {
            for (q, g) in &self.tables.guards[*p as usize] {
                let g = self.tables.stamp(g, t, st);
                let c = Expr::and(e.clone(), g, st);
                if c.is_false() {
                    continue;
                }
                match next.iter_mut().find(|(s, _)| s == q) {
                    Some((_, acc)) => *acc = Expr::or(acc.clone(), c, st),
                    None => next.push((*q, c)),
                }
            }
        }
        next.retain(|(_, e)| !e.is_false());
        next.sort_by_key(|(q, _)| *q);
        next
    }

    /// Expands the encoding up to `t_future`.
    pub fn smove(&mut self, t_future: Round, st: &mut SimplifyStats) {
        let t_cur = self.t_last();
        if t_future <= t_cur {
            return;
        }
        for t in t_cur..t_future {
            let row = self.step(self.entries.back().expect("non-empty"), t, st);
            self.nodes += row.iter().map(|(_, e)| e.size()).sum::<usize>();
            self.entries.push_back(row);
        }
        self.mark_from(t_cur);
    }

    fn row_size(row: &[(StateId, Expr)]) -> usize {
        row.iter().map(|(_, e)| e.size()).sum()
    }

    /// Narrows dirty entries against `m` and returns the newest state that
    /// became known, if any.
    pub fn resolve(&mut self, m: &Memory, st: &mut SimplifyStats) -> Option<(Round, StateId, Verdict)> {
        let dirty = self.dirty.take()?;
        let start = (dirty + 1).max(self.base);
        let last = self.t_last();
        let mut found: Option<(Round, StateId)> = None;
        for t in start..=last {
            let i = (t - self.base) as usize;
            let row = &mut self.entries[i];
            let before = Self::row_size(row);
            for (_, e) in row.iter_mut() {
                *e = e.seval(m, st);
            }
            row.retain(|(_, e)| !e.is_false());
            let after = Self::row_size(row);
            self.nodes = self.nodes + after - before;
            if let Some((q, _)) = row.iter().find(|(_, e)| e.is_true()) {
                found = Some((t, *q));
            }
        }
        let (mut t_r, mut q_r) = found?;
        if t_r <= self.resolved.0 {
            return None;
        }
        // rebase on the resolved entry and rebuild the tail from it
        loop {
            let drop = (t_r - self.base) as usize;
            self.entries.drain(..drop);
            self.base = t_r;
            self.entries[0] = vec![(q_r, Expr::tt())];
            self.resolved = (t_r, q_r);
            let mut newest = None;
            for t in t_r..last {
                let i = (t - self.base) as usize;
                let row: Vec<(StateId, Expr)> = self
                    .step(&self.entries[i], t, st)
                    .into_iter()
                    .map(|(q, e)| (q, e.seval(m, st)))
                    .filter(|(_, e)| !e.is_false())
                    .collect();
                let hit = row.iter().find(|(_, e)| e.is_true()).map(|(q, _)| *q);
                self.entries[i + 1] = row;
                if let Some(q) = hit {
                    newest = Some((t + 1, q));
                }
            }
            match newest {
                Some((t, q)) => (t_r, q_r) = (t, q),
                None => break,
            }
        }
        self.nodes = self.entries.iter().map(|r| Self::row_size(r)).sum();
        let (t, q, v) = self.current();
        Some((t, q, v))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ltl::parse;
    use crate::synthesis::synthesize;
    use proptest::prelude::*;

    fn light() -> Arc<MonitorTables> {
        MonitorTables::new(synthesize(&parse("G(s -> X(l U !s))").unwrap()).unwrap())
    }

    #[test]
    fn one_step_of_light_switch() {
        let mut st = SimplifyStats::default();
        let mut ehe = Ehe::new(light(), 0);
        ehe.smove(1, &mut st);
        assert_eq!(ehe.entry(1, 0).unwrap().to_string(), "!<0,s>");
        assert_eq!(ehe.entry(1, 1).unwrap().to_string(), "<0,s>");
        assert!(ehe.entry(1, 2).is_none());
        let len = ehe.entry_count();
        ehe.smove(1, &mut st);
        assert_eq!(ehe.entry_count(), len);

        let mut m = Memory::new();
        m.store(Atom::new(0, "s"), true).unwrap();
        ehe.touch(0);
        assert_eq!(ehe.resolve(&m, &mut st), Some((1, 1, Verdict::Unknown)));
        assert_eq!(ehe.resolve(&m, &mut st), None);
    }

    #[test]
    fn nothing_resolves_without_observations() {
        let mut st = SimplifyStats::default();
        let mut ehe = Ehe::new(light(), 3);
        ehe.smove(6, &mut st);
        assert_eq!(ehe.resolve(&Memory::new(), &mut st), None);
        assert_eq!(ehe.current(), (3, 0, Verdict::Unknown));
    }

    #[test]
    fn dump_lists_rows() {
        let mut st = SimplifyStats::default();
        let mut ehe = Ehe::new(light(), 0);
        ehe.smove(1, &mut st);
        assert_eq!(ehe.dump(), "0 | q0 | true\n1 | q0 | !<0,s>\n1 | q1 | <0,s>\n");
    }

    #[test]
    fn sadv_examples() {
        let cond = Condition::or(Condition::lit("M0", false), Condition::lit("M1", false));
        let mut m = Memory::new();
        assert!(!sadv(&cond, &m, 5));
        assert!(sadvs(&cond, &m, Some(2), 2).is_empty());
        m.store(Atom::new(5, "M0"), false).unwrap();
        assert!(sadv(&cond, &m, 5));
        assert!(!sadv(&Condition::lit("M0", true), &m, 5));
        assert_eq!(sadvs(&cond, &m, Some(2), 5), BTreeSet::from([5]));
        m.store(Atom::new(3, "M0"), false).unwrap();
        m.store(Atom::new(7, "M0"), false).unwrap();
        assert_eq!(sadvs(&cond, &m, Some(2), 7), BTreeSet::from([3, 5, 7]));
        assert_eq!(sadvs(&cond, &m, None, 7).iter().max(), Some(&7));
    }

    fn check_partition(ehe: &Ehe, names: &[&str], t_hi: Round) {
        // every total assignment makes exactly one entry per timestamp true
        let atoms: Vec<Atom> = (0..t_hi)
            .flat_map(|t| names.iter().map(move |n| Atom::new(t, *n)))
            .collect();
        assert!(atoms.len() <= 12);
        let mut st = SimplifyStats::default();
        for bits in 0..1u32 << atoms.len() {
            let mut m = Memory::new();
            for (i, a) in atoms.iter().enumerate() {
                m.store(a.clone(), bits >> i & 1 == 1).unwrap();
            }
            for t in ehe.base..=ehe.t_last() {
                let row = &ehe.entries[(t - ehe.base) as usize];
                let trues = row.iter().filter(|(_, e)| e.seval(&m, &mut st).is_true()).count();
                assert_eq!(trues, 1, "t={t} bits={bits:b}");
            }
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(48))]

        #[test]
        fn encoding_tracks_the_automaton(
            text in prop_oneof![
                Just("G(s -> X(l U !s))"),
                Just("F<=2(a & b)"),
                Just("a U (b & X a)"),
                Just("G(a -> F<=1 b)"),
                Just("X !a | b U a"),
            ],
            trace in proptest::collection::vec(0..4u32, 1..6),
        ) {
            let mon = synthesize(&parse(text).unwrap()).unwrap();
            let names: Vec<String> = mon.alphabet.clone();
            let tables = MonitorTables::new(mon.clone());
            let mut st = SimplifyStats::default();
            let mut ehe = Ehe::new(tables, 0);
            ehe.smove(trace.len() as Round, &mut st);
            let alpha: Vec<&str> = names.iter().map(|s| s.as_str()).collect();
            if trace.len() * alpha.len() <= 8 {
                check_partition(&ehe, &alpha, trace.len() as Round);
            }
            // feed the full trace and compare with a direct run
            let mut m = Memory::new();
            for (t, l) in trace.iter().enumerate() {
                for (i, n) in alpha.iter().enumerate() {
                    m.store(Atom::new(t as Round, *n), l >> i & 1 == 1).unwrap();
                }
                ehe.touch(t as Round);
            }
            let letters: Vec<u32> = trace.iter().map(|l| l & (mon.letter_count() - 1)).collect();
            let mut q = mon.initial;
            for &l in &letters {
                q = mon.step(q, l);
            }
            let got = ehe.resolve(&m, &mut st);
            prop_assert_eq!(got, Some((trace.len() as Round, q, mon.verdict(q))));
            prop_assert_eq!(ehe.node_count(), ehe.rows().map(|(_, _, e)| e.size()).sum::<usize>());
        }

        #[test]
        fn incremental_resolution_matches_run(
            trace in proptest::collection::vec(0..4u32, 1..12),
            order_seed in any::<u64>(),
        ) {
            use rand::{seq::SliceRandom, SeedableRng};
            let mon = synthesize(&parse("G(s -> X(l U !s))").unwrap()).unwrap();
            let tables = MonitorTables::new(mon.clone());
            let mut st = SimplifyStats::default();
            let mut ehe = Ehe::new(tables, 0);
            let n = trace.len() as Round;
            ehe.smove(n, &mut st);
            let mut atoms: Vec<(Atom, bool)> = trace
                .iter()
                .enumerate()
                .flat_map(|(t, l)| {
                    [(Atom::new(t as Round, "l"), l & 1 == 1), (Atom::new(t as Round, "s"), l & 2 == 2)]
                })
                .collect();
            atoms.shuffle(&mut rand_chacha::ChaCha8Rng::seed_from_u64(order_seed));
            let mut m = Memory::new();
            let mut last_t = 0;
            for (a, v) in atoms {
                let t = a.t;
                m.store(a, v).unwrap();
                ehe.touch(t);
                if let Some((rt, q, verdict)) = ehe.resolve(&m, &mut st) {
                    prop_assert!(rt > last_t);
                    last_t = rt;
                    let mut p = mon.initial;
                    for l in &trace[..rt as usize] {
                        p = mon.step(p, *l);
                    }
                    prop_assert_eq!((q, verdict), (p, mon.verdict(p)));
                }
            }
            prop_assert_eq!(ehe.current().0, n);
        }
    }
}
