//! Three-valued Moore monitors: synthesis, minimization, execution and text formats.

mod minimize;
mod moore;
mod tableau;

use std::collections::{BTreeMap, HashMap};
use std::fmt::{self, Write as _};
use std::time::{Duration, Instant};

use thiserror::Error;

use crate::ltl::{self, Formula, Verdict};

pub type StateId = u32;

/// Default ceiling on intermediate automaton states.
pub const DEFAULT_MAX_STATES: usize = 1 << 20;
/// Letters are explicit bitmasks, so alphabets are capped.
pub const MAX_ALPHABET: usize = 20;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SynthError {
    #[error("state ceiling exceeded: {states} intermediate states (limit {limit})")]
    Capacity { states: usize, limit: usize },
    #[error("synthesis timed out after {0:?}")]
    Timeout(Duration),
    #[error("alphabet of {size} propositions exceeds the limit of {limit}")]
    AlphabetTooLarge { size: usize, limit: usize },
}

#[derive(Debug, Clone)]
pub struct SynthConfig {
    pub max_states: usize,
    pub timeout: Option<Duration>,
    /// When false the reachable product is returned as is.
    pub minimize: bool,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig { max_states: DEFAULT_MAX_STATES, timeout: None, minimize: true }
    }
}

/// Statistics of one synthesis call.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct SynthStats {
    pub tableau_states: usize,
    pub product_states: usize,
    pub intermediate_states: usize,
    pub final_states: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum RunError {
    #[error("event {index} does not assign proposition `{prop}`")]
    IncompleteEvent { index: usize, prop: String },
}

/// Complete deterministic Moore machine over total assignments of `alphabet`.
///
/// Letter `l` assigns `alphabet[i]` the value of bit `i` of `l`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MooreMonitor {
    pub alphabet: Vec<String>,
    pub initial: StateId,
    pub verdicts: Vec<Verdict>,
    pub delta: Vec<Vec<StateId>>,
}

/// Boolean guard over alphabet indices.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Guard {
    True,
    False,
    Var(usize),
    Not(Box<Guard>),
    And(Box<Guard>, Box<Guard>),
    Or(Box<Guard>, Box<Guard>),
}

impl Guard {
    pub fn eval(&self, letter: u32) -> bool {
        match self {
            Guard::True => true,
            Guard::False => false,
            Guard::Var(i) => letter >> i & 1 == 1,
            Guard::Not(g) => !g.eval(letter),
            Guard::And(a, b) => a.eval(letter) && b.eval(letter),
            Guard::Or(a, b) => a.eval(letter) || b.eval(letter),
        }
    }

    /// Renders with proposition names in the formula syntax.
    pub fn render(&self, names: &[String]) -> String {
        fn go(g: &Guard, names: &[String], out: &mut String, top: bool) {
            match g {
                Guard::True => out.push_str("true"),
                Guard::False => out.push_str("false"),
                Guard::Var(i) => out.push_str(&names[*i]),
                Guard::Not(a) => {
                    out.push('!');
                    go(a, names, out, false);
                }
                Guard::And(a, b) | Guard::Or(a, b) => {
                    let op = if matches!(g, Guard::And(..)) { " & " } else { " | " };
                    if !top {
                        out.push('(');
                    }
                    go(a, names, out, false);
                    out.push_str(op);
                    go(b, names, out, false);
                    if !top {
                        out.push(')');
                    }
                }
            }
        }
        let mut s = String::new();
        go(self, names, &mut s, true);
        s
    }

    // Shannon expansion on variable `var` over the letters in `set`
    // (letters agree on every variable below `var`).
    fn shannon(var: usize, vars: usize, base: u32, hit: &dyn Fn(u32) -> bool) -> Guard {
        if var == vars {
            return if hit(base) { Guard::True } else { Guard::False };
        }
        let hi = Guard::shannon(var + 1, vars, base | 1 << var, hit);
        let lo = Guard::shannon(var + 1, vars, base, hit);
        let v = || Box::new(Guard::Var(var));
        match (hi, lo) {
            (h, l) if h == l => h,
            (Guard::True, Guard::False) => Guard::Var(var),
            (Guard::False, Guard::True) => Guard::Not(v()),
            (Guard::True, l) => Guard::Or(v(), Box::new(l)),
            (h, Guard::True) => Guard::Or(Box::new(Guard::Not(v())), Box::new(h)),
            (Guard::False, l) => Guard::And(Box::new(Guard::Not(v())), Box::new(l)),
            (h, Guard::False) => Guard::And(v(), Box::new(h)),
            (h, l) => Guard::Or(
                Box::new(Guard::And(v(), Box::new(h))),
                Box::new(Guard::And(Box::new(Guard::Not(v())), Box::new(l))),
            ),
        }
    }
}

fn deadline_check(start: Instant, timeout: Option<Duration>) -> impl FnMut() -> Result<(), SynthError> {
    move || match timeout {
        Some(t) if start.elapsed() > t => Err(SynthError::Timeout(start.elapsed())),
        _ => Ok(()),
    }
}

/// Synthesizes the minimal LTL3 monitor of `f` with default limits.
pub fn synthesize(f: &Formula) -> Result<MooreMonitor, SynthError> {
    synthesize_with(f, &SynthConfig::default()).map(|(m, _)| m)
}

pub fn synthesize_with(f: &Formula, cfg: &SynthConfig) -> Result<(MooreMonitor, SynthStats), SynthError> {
    let f = if f.is_desugared() { f.clone() } else { f.desugar() };
    let alphabet: Vec<String> = f.propositions().into_iter().collect();
    if alphabet.len() > MAX_ALPHABET {
        return Err(SynthError::AlphabetTooLarge { size: alphabet.len(), limit: MAX_ALPHABET });
    }
    let vars: HashMap<String, u32> =
        alphabet.iter().enumerate().map(|(i, n)| (n.clone(), i as u32)).collect();
    let letters = 1u32 << alphabet.len();

    let start = Instant::now();
    let mut check = deadline_check(start, cfg.timeout);
    let mut used = 0usize;
    let mut budget = tableau::Budget { used: &mut used, limit: cfg.max_states, check: &mut check };

    let mut arena = tableau::Arena::default();
    let pos_root = arena.nnf(&f, false, &vars);
    let neg_root = arena.nnf(&f, true, &vars);
    let pos = tableau::build(&arena, pos_root, &mut budget)?;
    let neg = tableau::build(&arena, neg_root, &mut budget)?;
    let tableau_states = pos.states.len() + neg.states.len();
    let raw = moore::product(letters, &pos, &neg, &mut budget)?;
    (budget.check)()?;
    let product_states = raw.verdicts.len();
    let intermediate_states = *budget.used;

    let m = if cfg.minimize {
        let (verdicts, delta) = minimize::minimize_tables(0, &raw.verdicts, &raw.delta);
        MooreMonitor { alphabet, initial: 0, verdicts, delta }
    } else {
        MooreMonitor { alphabet, initial: 0, verdicts: raw.verdicts, delta: raw.delta }
    };
    let stats = SynthStats {
        tableau_states,
        product_states,
        intermediate_states,
        final_states: m.state_count(),
    };
    Ok((m, stats))
}

impl MooreMonitor {
    pub fn state_count(&self) -> usize {
        self.verdicts.len()
    }

    pub fn letter_count(&self) -> u32 {
        1u32 << self.alphabet.len()
    }

    pub fn verdict(&self, q: StateId) -> Verdict {
        self.verdicts[q as usize]
    }

    pub fn step(&self, q: StateId, letter: u32) -> StateId {
        self.delta[q as usize][letter as usize]
    }

    /// Number of distinct (source, target) pairs.
    pub fn transition_count(&self) -> usize {
        (0..self.state_count() as StateId).map(|q| self.successors(q).len()).sum()
    }

    pub fn successors(&self, q: StateId) -> Vec<StateId> {
        let mut v = self.delta[q as usize].clone();
        v.sort_unstable();
        v.dedup();
        v
    }

    /// Encodes an assignment given by `lookup` as a letter.
    pub fn letter_of(&self, lookup: impl Fn(&str) -> Option<bool>) -> Result<u32, String> {
        let mut l = 0u32;
        for (i, p) in self.alphabet.iter().enumerate() {
            match lookup(p) {
                Some(true) => l |= 1 << i,
                Some(false) => {}
                None => return Err(p.clone()),
            }
        }
        Ok(l)
    }

    pub fn run_letters(&self, letters: &[u32]) -> Vec<Verdict> {
        let mut q = self.initial;
        letters
            .iter()
            .map(|&l| {
                q = self.step(q, l);
                self.verdict(q)
            })
            .collect()
    }

    /// Verdict after each prefix of `events`.
    pub fn run(&self, events: &[BTreeMap<String, bool>]) -> Result<Vec<Verdict>, RunError> {
        let mut letters = Vec::with_capacity(events.len());
        for (index, e) in events.iter().enumerate() {
            let l = self
                .letter_of(|p| e.get(p).copied())
                .map_err(|prop| RunError::IncompleteEvent { index, prop })?;
            letters.push(l);
        }
        Ok(self.run_letters(&letters))
    }

    /// Language-equivalent minimal monitor.
    pub fn minimize(&self) -> MooreMonitor {
        let (verdicts, delta) = minimize::minimize_tables(self.initial, &self.verdicts, &self.delta);
        MooreMonitor { alphabet: self.alphabet.clone(), initial: 0, verdicts, delta }
    }

    /// Transition guard from `from` to `to`.
    pub fn guard(&self, from: StateId, to: StateId) -> Guard {
        let row = &self.delta[from as usize];
        Guard::shannon(0, self.alphabet.len(), 0, &|l| row[l as usize] == to)
    }

    /// Outgoing `(target, guard)` pairs, ordered by target.
    pub fn guards(&self, from: StateId) -> Vec<(StateId, Guard)> {
        self.successors(from).into_iter().map(|to| (to, self.guard(from, to))).collect()
    }

    pub fn to_dot(&self) -> String {
        let mut s = String::from("digraph monitor {\n  rankdir=LR;\n  start [shape=point];\n");
        let _ = writeln!(s, "  start -> q{};", self.initial);
        for q in 0..self.state_count() as StateId {
            let _ = writeln!(s, "  q{q} [label=\"q{q}\\n{}\"];", self.verdict(q));
        }
        for q in 0..self.state_count() as StateId {
            for (to, g) in self.guards(q) {
                let _ = writeln!(s, "  q{q} -> q{to} [label=\"{}\"];", g.render(&self.alphabet));
            }
        }
        s.push_str("}\n");
        s
    }

    /// Plain-text transition list (`state verdict;` then `state --guard--> state;`).
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "# alphabet: {}", self.alphabet.join(", "));
        let _ = writeln!(s, "# initial: q{}", self.initial);
        for q in 0..self.state_count() as StateId {
            let _ = writeln!(s, "q{q} {};", self.verdict(q));
        }
        for q in 0..self.state_count() as StateId {
            for (to, g) in self.guards(q) {
                let _ = writeln!(s, "q{q} --{}--> q{to};", g.render(&self.alphabet));
            }
        }
        s
    }

    /// Parses the format written by [`MooreMonitor::to_text`].
    pub fn from_text(text: &str) -> Result<MooreMonitor, MonitorFormatError> {
        let mut alphabet: Vec<String> = Vec::new();
        let mut initial_name: Option<String> = None;
        let mut names: Vec<String> = Vec::new();
        let mut verdicts: Vec<Verdict> = Vec::new();
        let mut edges: Vec<(usize, String, Formula, String)> = Vec::new();
        for (no, raw) in text.lines().enumerate() {
            let line_no = no + 1;
            let line = raw.trim();
            if let Some(rest) = line.strip_prefix('#') {
                let rest = rest.trim();
                if let Some(a) = rest.strip_prefix("alphabet:") {
                    alphabet = a.split(',').map(|x| x.trim().to_string()).filter(|x| !x.is_empty()).collect();
                } else if let Some(i) = rest.strip_prefix("initial:") {
                    initial_name = Some(i.trim().to_string());
                }
                continue;
            }
            if line.is_empty() {
                continue;
            }
            let body = line
                .strip_suffix(';')
                .ok_or_else(|| MonitorFormatError::at(line_no, "missing `;`"))?;
            if let Some((from, rest)) = body.split_once("--") {
                let (guard, to) = rest
                    .rsplit_once("-->")
                    .ok_or_else(|| MonitorFormatError::at(line_no, "expected `--guard--> state`"))?;
                let g = ltl::parse(guard.trim())
                    .map_err(|e| MonitorFormatError::at(line_no, &e.to_string()))?;
                edges.push((line_no, from.trim().to_string(), g, to.trim().to_string()));
            } else {
                let mut parts = body.split_whitespace();
                let (Some(name), Some(v), None) = (parts.next(), parts.next(), parts.next()) else {
                    return Err(MonitorFormatError::at(line_no, "expected `state VERDICT;`"));
                };
                let v: Verdict = v.parse().map_err(|e: String| MonitorFormatError::at(line_no, &e))?;
                names.push(name.to_string());
                verdicts.push(v);
            }
        }
        let id_of = |n: &str, line: usize| {
            names
                .iter()
                .position(|x| x == n)
                .map(|i| i as StateId)
                .ok_or_else(|| MonitorFormatError::at(line, &format!("unknown state `{n}`")))
        };
        let initial = match &initial_name {
            Some(n) => id_of(n, 0)?,
            None => 0,
        };
        let letters = 1u32 << alphabet.len();
        let mut delta = vec![vec![StateId::MAX; letters as usize]; names.len()];
        for (line, from, g, to) in &edges {
            let f = id_of(from, *line)?;
            let t = id_of(to, *line)?;
            for l in 0..letters {
                let holds = eval_prop(g, &alphabet, l)
                    .map_err(|p| MonitorFormatError::at(*line, &format!("guard mentions unknown `{p}`")))?;
                if holds {
                    let slot = &mut delta[f as usize][l as usize];
                    if *slot != StateId::MAX && *slot != t {
                        return Err(MonitorFormatError::at(*line, "nondeterministic guards"));
                    }
                    *slot = t;
                }
            }
        }
        if delta.iter().flatten().any(|&t| t == StateId::MAX) {
            return Err(MonitorFormatError::at(0, "transition function is not total"));
        }
        Ok(MooreMonitor { alphabet, initial, verdicts, delta })
    }
}

fn eval_prop(f: &Formula, alphabet: &[String], letter: u32) -> Result<bool, String> {
    use Formula::*;
    Ok(match f {
        Const(b) => *b,
        Prop(n) | Ref(n) => {
            let i = alphabet.iter().position(|x| x == n).ok_or_else(|| n.clone())?;
            letter >> i & 1 == 1
        }
        Not(a) => !eval_prop(a, alphabet, letter)?,
        And(a, b) => eval_prop(a, alphabet, letter)? && eval_prop(b, alphabet, letter)?,
        Or(a, b) => eval_prop(a, alphabet, letter)? || eval_prop(b, alphabet, letter)?,
        Implies(a, b) => !eval_prop(a, alphabet, letter)? || eval_prop(b, alphabet, letter)?,
        _ => return Err(format!("temporal operator in guard `{f}`")),
    })
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("monitor file line {line}: {message}")]
pub struct MonitorFormatError {
    pub line: usize,
    pub message: String,
}

impl MonitorFormatError {
    fn at(line: usize, message: &str) -> Self {
        MonitorFormatError { line, message: message.to_string() }
    }
}

impl fmt::Display for MooreMonitor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_text())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ltl::parse;
    use proptest::prelude::*;

    fn sc_light() -> MooreMonitor {
        synthesize(&parse("G(s -> X(l U !s))").unwrap()).unwrap()
    }

    fn ev(pairs: &[(&str, bool)]) -> BTreeMap<String, bool> {
        pairs.iter().map(|(k, v)| (k.to_string(), *v)).collect()
    }

    #[test]
    fn light_switch_monitor_shape() {
        let m = sc_light();
        assert_eq!(m.alphabet, vec!["l", "s"]);
        assert_eq!(m.state_count(), 3);
        assert_eq!(m.verdicts, vec![Verdict::Unknown, Verdict::Unknown, Verdict::False]);
        let names = &m.alphabet;
        assert_eq!(m.guard(0, 1).render(names), "s");
        assert_eq!(m.guard(0, 0).render(names), "!s");
        assert_eq!(m.guard(1, 2).render(names), "!l & s");
        assert_eq!(m.guard(2, 2), Guard::True);
        assert_eq!(m.minimize(), m);
    }

    #[test]
    fn light_switch_run() {
        let m = sc_light();
        let out = m
            .run(&[ev(&[("s", true), ("l", true)]), ev(&[("s", true), ("l", false)])])
            .unwrap();
        assert_eq!(out, vec![Verdict::Unknown, Verdict::False]);
        assert!(m.run(&[]).unwrap().is_empty());
        let err = m.run(&[ev(&[("s", true)])]).unwrap_err();
        assert_eq!(err, RunError::IncompleteEvent { index: 0, prop: "l".into() });
    }

    #[test]
    fn constants() {
        let t = synthesize(&Formula::Const(true)).unwrap();
        assert_eq!(t.state_count(), 1);
        assert_eq!(t.verdicts, vec![Verdict::True]);
        let f = synthesize(&Formula::Const(false)).unwrap();
        assert_eq!(f.verdicts, vec![Verdict::False]);
        let taut = synthesize(&parse("a | !a").unwrap()).unwrap();
        assert_eq!(taut.verdicts, vec![Verdict::True]);
    }

    #[test]
    fn bounded_and_liveness_shapes() {
        // F<=2 p: three waiting states plus the two sinks
        let m = synthesize(&parse("F<=2 p").unwrap()).unwrap();
        assert_eq!(m.state_count(), 5);
        // liveness never concludes
        let m = synthesize(&parse("G F p").unwrap()).unwrap();
        assert_eq!(m.verdicts, vec![Verdict::Unknown]);
        // napping-sized bounded globally stays linear
        let m = synthesize(&parse("G<=25 p").unwrap()).unwrap();
        assert_eq!(m.state_count(), 28);
    }

    #[test]
    fn centralized_pair_is_larger() {
        let single = sc_light();
        let pair = synthesize(&parse("G(s0 -> X(l0 U !s0)) & G(s1 -> X(l1 U !s1))").unwrap()).unwrap();
        assert!(pair.state_count() > single.state_count());
        assert_eq!(pair.state_count(), 5);
    }

    #[test]
    fn duplicated_states_are_merged() {
        let m = sc_light();
        // splice in a copy of q1
        let mut verdicts = m.verdicts.clone();
        verdicts.push(Verdict::Unknown);
        let mut delta = m.delta.clone();
        delta.push(delta[1].clone());
        for next in delta[0].iter_mut().filter(|q| **q == 1) {
            *next = 3;
        }
        let bloated = MooreMonitor { alphabet: m.alphabet.clone(), initial: 0, verdicts, delta };
        assert_eq!(bloated.minimize(), m);
    }

    #[test]
    fn capacity_ceiling_is_enforced() {
        let cfg = SynthConfig { max_states: 8, ..SynthConfig::default() };
        let err = synthesize_with(&parse("G<=25 p").unwrap(), &cfg).unwrap_err();
        assert!(matches!(err, SynthError::Capacity { limit: 8, .. }));
    }

    #[test]
    fn text_format_round_trips() {
        let m = sc_light();
        let text = m.to_text();
        assert!(text.contains("q0 --s--> q1;"));
        assert!(text.contains("q2 FALSE;"));
        assert_eq!(MooreMonitor::from_text(&text).unwrap(), m);
        let dot = m.to_dot();
        assert!(dot.contains("q1 -> q2 [label=\"!l & s\"]"));
    }

    fn arb_formula() -> impl Strategy<Value = Formula> {
        let leaf = prop_oneof![
            Just(Formula::prop("a")),
            Just(Formula::prop("b")),
            Just(Formula::prop("c")),
            any::<bool>().prop_map(Formula::Const),
        ];
        leaf.prop_recursive(4, 24, 2, |inner| {
            prop_oneof![
                inner.clone().prop_map(Formula::not),
                inner.clone().prop_map(Formula::next),
                inner.clone().prop_map(Formula::globally),
                inner.clone().prop_map(Formula::finally),
                (0..3u32, inner.clone()).prop_map(|(n, f)| Formula::finally_within(n, f)),
                (inner.clone(), inner.clone()).prop_map(|(a, b)| Formula::and(a, b)),
                (inner.clone(), inner.clone()).prop_map(|(a, b)| Formula::or(a, b)),
                (inner.clone(), inner).prop_map(|(a, b)| Formula::until(a, b)),
            ]
        })
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn structural_invariants(f in arb_formula()) {
            let m = synthesize(&f).unwrap();
            let letters = m.letter_count();
            for q in 0..m.state_count() as StateId {
                prop_assert_eq!(m.delta[q as usize].len(), letters as usize);
                if m.verdict(q).is_final() {
                    for l in 0..letters {
                        prop_assert_eq!(m.verdict(m.step(q, l)), m.verdict(q));
                    }
                }
            }
            prop_assert_eq!(m.minimize().state_count(), m.state_count());
            for q in 0..m.state_count() as StateId {
                let gs = m.guards(q);
                for l in 0..letters {
                    let hits: Vec<_> = gs.iter().filter(|(_, g)| g.eval(l)).collect();
                    prop_assert_eq!(hits.len(), 1);
                    prop_assert_eq!(hits[0].0, m.step(q, l));
                }
            }
        }

        #[test]
        fn verdicts_are_monotone(f in arb_formula(), trace in proptest::collection::vec(0..8u32, 0..12)) {
            let m = synthesize(&f).unwrap();
            let mask = m.letter_count() - 1;
            let letters: Vec<u32> = trace.iter().map(|l| l & mask).collect();
            let out = m.run_letters(&letters);
            if let Some(first) = out.iter().position(|v| v.is_final()) {
                prop_assert!(out[first..].iter().all(|v| *v == out[first]));
            }
        }
    }
}
