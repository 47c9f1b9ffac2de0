//! Brute-force three-valued evaluator used as ground truth in tests.
//!
//! The formula is progressed through the finite suffix; the residual is then
//! classified by satisfiability of itself and of its negation. Bounded
//! residuals are grounded to propositional variables; anything else goes
//! through an explicit Hintikka-atom graph and Kosaraju SCCs. None of this
//! shares code with the synthesis module.

use std::collections::{BTreeSet, HashMap};

use thiserror::Error;

use crate::ltl::{Formula, Verdict};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum OracleError {
    #[error("unresolved monitor reference `{0}`")]
    UnresolvedRef(String),
    #[error("closure of {0} elementary formulas is too large for the oracle")]
    TooLarge(usize),
}

/// A letter: the set of propositions that hold.
pub type Letter = BTreeSet<String>;

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
enum O {
    T,
    F,
    P(String),
    Not(Box<O>),
    And(BTreeSet<O>),
    Or(BTreeSet<O>),
    X(Box<O>),
    U(Box<O>, Box<O>),
    G(Box<O>),
    Ev(Box<O>),
    Ew(u32, Box<O>),
    Gw(u32, Box<O>),
}

fn neg(a: O) -> O {
    match a {
        O::T => O::F,
        O::F => O::T,
        O::Not(x) => *x,
        x => O::Not(Box::new(x)),
    }
}

fn junction(conj: bool, items: impl IntoIterator<Item = O>) -> O {
    let (unit, zero) = if conj { (O::T, O::F) } else { (O::F, O::T) };
    let mut set = BTreeSet::new();
    for it in items {
        if it == zero {
            return zero;
        }
        if it == unit {
            continue;
        }
        match (it, conj) {
            (O::And(xs), true) | (O::Or(xs), false) => set.extend(xs),
            (x, _) => {
                set.insert(x);
            }
        }
    }
    for x in &set {
        if let O::Not(y) = x {
            if set.contains(&**y) {
                return zero;
            }
        }
    }
    match set.len() {
        0 => unit,
        1 => set.into_iter().next().unwrap(),
        _ => {
            if conj {
                O::And(set)
            } else {
                O::Or(set)
            }
        }
    }
}

fn and2(a: O, b: O) -> O {
    junction(true, [a, b])
}

fn or2(a: O, b: O) -> O {
    junction(false, [a, b])
}

fn lower(f: &Formula) -> Result<O, OracleError> {
    use Formula::*;
    Ok(match f {
        Const(true) => O::T,
        Const(false) => O::F,
        Prop(p) => O::P(p.clone()),
        Ref(r) => return Err(OracleError::UnresolvedRef(r.clone())),
        Not(a) => neg(lower(a)?),
        And(a, b) => and2(lower(a)?, lower(b)?),
        Or(a, b) => or2(lower(a)?, lower(b)?),
        Implies(a, b) => or2(neg(lower(a)?), lower(b)?),
        Next(a) => O::X(Box::new(lower(a)?)),
        Until(a, b) => O::U(Box::new(lower(a)?), Box::new(lower(b)?)),
        Globally(a) => O::G(Box::new(lower(a)?)),
        Finally(a) => O::Ev(Box::new(lower(a)?)),
        FinallyWithin(n, a) => O::Ew(*n, Box::new(lower(a)?)),
        GloballyWithin(n, a) => O::Gw(*n, Box::new(lower(a)?)),
    })
}

fn progress(o: &O, letter: &Letter) -> O {
    match o {
        O::T | O::F => o.clone(),
        O::P(p) => {
            if letter.contains(p) {
                O::T
            } else {
                O::F
            }
        }
        O::Not(a) => neg(progress(a, letter)),
        O::And(xs) => junction(true, xs.iter().map(|x| progress(x, letter))),
        O::Or(xs) => junction(false, xs.iter().map(|x| progress(x, letter))),
        O::X(a) => (**a).clone(),
        O::U(a, b) => or2(progress(b, letter), and2(progress(a, letter), o.clone())),
        O::G(a) => and2(progress(a, letter), o.clone()),
        O::Ev(a) => or2(progress(a, letter), o.clone()),
        O::Ew(0, a) | O::Gw(0, a) => progress(a, letter),
        O::Ew(n, a) => or2(progress(a, letter), O::Ew(n - 1, a.clone())),
        O::Gw(n, a) => and2(progress(a, letter), O::Gw(n - 1, a.clone())),
    }
}

fn unbounded(o: &O) -> bool {
    match o {
        O::T | O::F | O::P(_) => false,
        O::U(..) | O::G(_) | O::Ev(_) => true,
        O::Not(a) | O::X(a) | O::Ew(_, a) | O::Gw(_, a) => unbounded(a),
        O::And(xs) | O::Or(xs) => xs.iter().any(unbounded),
    }
}

// ---------------------------------------------------------------------------
// bounded fragment: ground to (offset, prop) variables

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
enum B {
    T,
    F,
    V(u32, String),
    Not(Box<B>),
    And(Vec<B>),
    Or(Vec<B>),
}

fn ground(o: &O, k: u32) -> B {
    match o {
        O::T => B::T,
        O::F => B::F,
        O::P(p) => B::V(k, p.clone()),
        O::Not(a) => B::Not(Box::new(ground(a, k))),
        O::And(xs) => B::And(xs.iter().map(|x| ground(x, k)).collect()),
        O::Or(xs) => B::Or(xs.iter().map(|x| ground(x, k)).collect()),
        O::X(a) => ground(a, k + 1),
        O::Ew(n, a) => B::Or((0..=*n).map(|i| ground(a, k + i)).collect()),
        O::Gw(n, a) => B::And((0..=*n).map(|i| ground(a, k + i)).collect()),
        O::U(..) | O::G(_) | O::Ev(_) => unreachable!("ground on unbounded formula"),
    }
}

fn assign(b: &B, var: &(u32, String), val: bool) -> B {
    match b {
        B::T | B::F => b.clone(),
        B::V(k, p) => {
            if (*k, p) == (var.0, &var.1) {
                if val {
                    B::T
                } else {
                    B::F
                }
            } else {
                b.clone()
            }
        }
        B::Not(a) => match assign(a, var, val) {
            B::T => B::F,
            B::F => B::T,
            x => B::Not(Box::new(x)),
        },
        B::And(xs) | B::Or(xs) => {
            let conj = matches!(b, B::And(_));
            let mut out = Vec::new();
            for x in xs {
                match (assign(x, var, val), conj) {
                    (B::F, true) => return B::F,
                    (B::T, false) => return B::T,
                    (B::T, true) | (B::F, false) => {}
                    (y, _) => out.push(y),
                }
            }
            match (out.len(), conj) {
                (0, true) => B::T,
                (0, false) => B::F,
                (1, _) => out.pop().unwrap(),
                _ => {
                    if conj {
                        B::And(out)
                    } else {
                        B::Or(out)
                    }
                }
            }
        }
    }
}

fn first_var(b: &B) -> Option<(u32, String)> {
    match b {
        B::T | B::F => None,
        B::V(k, p) => Some((*k, p.clone())),
        B::Not(a) => first_var(a),
        B::And(xs) | B::Or(xs) => xs.iter().find_map(first_var),
    }
}

fn prop_sat(b: &B) -> bool {
    match b {
        B::T => true,
        B::F => false,
        _ => match first_var(b) {
            Some(v) => prop_sat(&assign(b, &v, true)) || prop_sat(&assign(b, &v, false)),
            None => const_value(b),
        },
    }
}

fn const_value(b: &B) -> bool {
    match b {
        B::T => true,
        B::F => false,
        B::V(..) => unreachable!("no variables left"),
        B::Not(a) => !const_value(a),
        B::And(xs) => xs.iter().all(const_value),
        B::Or(xs) => xs.iter().any(const_value),
    }
}

// ---------------------------------------------------------------------------
// general fragment: Hintikka atoms over propositions and next-obligations

const MAX_ELEMENTARY: usize = 22;

struct Closure {
    props: Vec<String>,
    nexts: Vec<O>,
}

impl Closure {
    fn collect(o: &O, props: &mut BTreeSet<String>, nexts: &mut Vec<O>) {
        let push = |x: O, nexts: &mut Vec<O>| {
            if !nexts.contains(&x) {
                nexts.push(x);
            }
        };
        match o {
            O::T | O::F => {}
            O::P(p) => {
                props.insert(p.clone());
            }
            O::Not(a) => Self::collect(a, props, nexts),
            O::And(xs) | O::Or(xs) => xs.iter().for_each(|x| Self::collect(x, props, nexts)),
            O::X(a) => {
                push((**a).clone(), nexts);
                Self::collect(a, props, nexts);
            }
            O::U(a, b) => {
                push(o.clone(), nexts);
                Self::collect(a, props, nexts);
                Self::collect(b, props, nexts);
            }
            O::G(a) | O::Ev(a) => {
                push(o.clone(), nexts);
                Self::collect(a, props, nexts);
            }
            O::Ew(..) | O::Gw(..) => unreachable!("bounded operators are expanded first"),
        }
    }

    fn value(&self, o: &O, atom: u64) -> bool {
        let p = self.props.len();
        let next = |x: &O| {
            let i = self.nexts.iter().position(|n| n == x).expect("closed");
            atom >> (p + i) & 1 == 1
        };
        match o {
            O::T => true,
            O::F => false,
            O::P(name) => {
                let i = self.props.iter().position(|n| n == name).expect("closed");
                atom >> i & 1 == 1
            }
            O::Not(a) => !self.value(a, atom),
            O::And(xs) => xs.iter().all(|x| self.value(x, atom)),
            O::Or(xs) => xs.iter().any(|x| self.value(x, atom)),
            O::X(a) => next(a),
            O::U(a, b) => self.value(b, atom) || (self.value(a, atom) && next(o)),
            O::G(a) => self.value(a, atom) && next(o),
            O::Ev(a) => self.value(a, atom) || next(o),
            O::Ew(..) | O::Gw(..) => unreachable!(),
        }
    }
}

fn expand_bounded(o: &O) -> O {
    match o {
        O::T | O::F | O::P(_) => o.clone(),
        O::Not(a) => neg(expand_bounded(a)),
        O::And(xs) => junction(true, xs.iter().map(expand_bounded)),
        O::Or(xs) => junction(false, xs.iter().map(expand_bounded)),
        O::X(a) => O::X(Box::new(expand_bounded(a))),
        O::U(a, b) => O::U(Box::new(expand_bounded(a)), Box::new(expand_bounded(b))),
        O::G(a) => O::G(Box::new(expand_bounded(a))),
        O::Ev(a) => O::Ev(Box::new(expand_bounded(a))),
        O::Ew(n, a) | O::Gw(n, a) => {
            let body = expand_bounded(a);
            let conj = matches!(o, O::Gw(..));
            let mut items = Vec::new();
            let mut cur = body;
            for _ in 0..=*n {
                items.push(cur.clone());
                cur = O::X(Box::new(cur));
            }
            junction(conj, items)
        }
    }
}

fn ltl_sat(o: &O) -> Result<bool, OracleError> {
    let o = expand_bounded(o);
    let mut props = BTreeSet::new();
    let mut nexts = Vec::new();
    Closure::collect(&o, &mut props, &mut nexts);
    let cl = Closure { props: props.into_iter().collect(), nexts };
    let p = cl.props.len();
    let width = p + cl.nexts.len();
    if width > MAX_ELEMENTARY {
        return Err(OracleError::TooLarge(width));
    }
    let count = 1u64 << width;
    // signature of an atom: values of the next-obligation formulas at it
    let sig: Vec<u64> = (0..count)
        .map(|a| {
            cl.nexts
                .iter()
                .enumerate()
                .fold(0u64, |acc, (i, n)| acc | (cl.value(n, a) as u64) << i)
        })
        .collect();
    let mut by_sig: HashMap<u64, Vec<u64>> = HashMap::new();
    let mut by_next: HashMap<u64, Vec<u64>> = HashMap::new();
    for a in 0..count {
        by_sig.entry(sig[a as usize]).or_default().push(a);
        by_next.entry(a >> p).or_default().push(a);
    }
    let empty: Vec<u64> = Vec::new();
    let succ = |a: u64| by_sig.get(&(a >> p)).unwrap_or(&empty);
    let pred = |b: u64| by_next.get(&sig[b as usize]).unwrap_or(&empty);

    // acceptance families: one per eventuality, as a predicate on atoms
    let mut families: Vec<Box<dyn Fn(u64) -> bool + '_>> = Vec::new();
    for n in &cl.nexts {
        match n {
            O::U(_, b) => {
                let (n, b) = (n.clone(), (**b).clone());
                let cl = &cl;
                families.push(Box::new(move |a| !cl.value(&n, a) || cl.value(&b, a)));
            }
            O::Ev(b) => {
                let (n, b) = (n.clone(), (**b).clone());
                let cl = &cl;
                families.push(Box::new(move |a| !cl.value(&n, a) || cl.value(&b, a)));
            }
            O::G(b) => {
                let (n, b) = (n.clone(), (**b).clone());
                let cl = &cl;
                families.push(Box::new(move |a| cl.value(&n, a) || !cl.value(&b, a)));
            }
            _ => {}
        }
    }

    // forward reachability from initial atoms
    let mut reach = vec![false; count as usize];
    let mut stack: Vec<u64> = (0..count).filter(|&a| cl.value(&o, a)).collect();
    for &a in &stack {
        reach[a as usize] = true;
    }
    while let Some(a) = stack.pop() {
        for &b in succ(a) {
            if !reach[b as usize] {
                reach[b as usize] = true;
                stack.push(b);
            }
        }
    }

    // Kosaraju, first pass: finish order on the reachable subgraph
    let mut visited = vec![false; count as usize];
    let mut order = Vec::new();
    for s in 0..count {
        if !reach[s as usize] || visited[s as usize] {
            continue;
        }
        visited[s as usize] = true;
        let mut work: Vec<(u64, usize)> = vec![(s, 0)];
        while let Some(top) = work.last_mut() {
            let v = top.0;
            let nb = succ(v);
            if top.1 < nb.len() {
                let w = nb[top.1];
                top.1 += 1;
                if reach[w as usize] && !visited[w as usize] {
                    visited[w as usize] = true;
                    work.push((w, 0));
                }
            } else {
                order.push(v);
                work.pop();
            }
        }
    }
    // second pass on the reversed graph
    let mut comp = vec![u32::MAX; count as usize];
    let mut ncomp = 0u32;
    for &s in order.iter().rev() {
        if comp[s as usize] != u32::MAX {
            continue;
        }
        let mut members = vec![s];
        comp[s as usize] = ncomp;
        let mut k = 0;
        while k < members.len() {
            let v = members[k];
            k += 1;
            for &u in pred(v) {
                if reach[u as usize] && comp[u as usize] == u32::MAX {
                    comp[u as usize] = ncomp;
                    members.push(u);
                }
            }
        }
        let nontrivial = members.len() > 1 || succ(s).contains(&s);
        if nontrivial && families.iter().all(|fam| members.iter().any(|&a| fam(a))) {
            return Ok(true);
        }
        ncomp += 1;
    }
    Ok(false)
}

/// Cached three-valued evaluator.
#[derive(Default)]
pub struct Oracle {
    sat_cache: HashMap<O, bool>,
}

impl Oracle {
    pub fn new() -> Self {
        Self::default()
    }

    fn sat(&mut self, o: &O) -> Result<bool, OracleError> {
        if let Some(&v) = self.sat_cache.get(o) {
            return Ok(v);
        }
        let v = match o {
            O::T => true,
            O::F => false,
            _ if !unbounded(o) => prop_sat(&ground(o, 0)),
            _ => ltl_sat(o)?,
        };
        self.sat_cache.insert(o.clone(), v);
        Ok(v)
    }

    /// LTL3 verdict of `f` on the suffix of `trace` starting at `t`.
    pub fn evaluate3(&mut self, f: &Formula, trace: &[Letter], t: usize) -> Result<Verdict, OracleError> {
        let mut cur = lower(f)?;
        for letter in trace.iter().skip(t) {
            if matches!(cur, O::T | O::F) {
                break;
            }
            cur = progress(&cur, letter);
        }
        match cur {
            O::T => return Ok(Verdict::True),
            O::F => return Ok(Verdict::False),
            _ => {}
        }
        if !self.sat(&cur)? {
            return Ok(Verdict::False);
        }
        if !self.sat(&neg(cur))? {
            return Ok(Verdict::True);
        }
        Ok(Verdict::Unknown)
    }

    /// Whether `f` has any model (`trace` empty).
    pub fn satisfiable(&mut self, f: &Formula) -> Result<bool, OracleError> {
        let o = lower(f)?;
        self.sat(&o)
    }
}

/// One-shot convenience wrapper around [`Oracle::evaluate3`].
pub fn evaluate3(f: &Formula, trace: &[Letter], t: usize) -> Result<Verdict, OracleError> {
    Oracle::new().evaluate3(f, trace, t)
}

/// Builds a letter from the names of the propositions that hold.
pub fn letter<'a>(props: impl IntoIterator<Item = &'a str>) -> Letter {
    props.into_iter().map(str::to_string).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ltl::parse;

    fn tr(rows: &[&[&str]]) -> Vec<Letter> {
        rows.iter().map(|r| letter(r.iter().copied())).collect()
    }

    fn ev(f: &str, rows: &[&[&str]], t: usize) -> Verdict {
        evaluate3(&parse(f).unwrap(), &tr(rows), t).unwrap()
    }

    #[test]
    fn safety_and_bounded_examples() {
        assert_eq!(ev("G p", &[&["p"], &["p"], &["p"]], 0), Verdict::Unknown);
        assert_eq!(ev("G p", &[&["p"], &[]], 0), Verdict::False);
        assert_eq!(ev("F<=2 p", &[&[], &[], &[]], 0), Verdict::False);
        assert_eq!(ev("F<=2 p", &[&[], &[]], 0), Verdict::Unknown);
        assert_eq!(ev("F<=2 p", &[&[], &["p"]], 0), Verdict::True);
    }

    #[test]
    fn unsatisfiable_and_valid_residuals() {
        assert_eq!(ev("G F p & F G !p", &[], 0), Verdict::False);
        assert_eq!(ev("G F p | F G !p", &[], 0), Verdict::True);
        assert_eq!(ev("G p & F !p", &[&["p"]], 0), Verdict::False);
        assert_eq!(ev("X p | X !p", &[], 0), Verdict::True);
        assert_eq!(ev("(a U b) & G !b", &[], 0), Verdict::False);
        assert_eq!(ev("!(a U b) | F b", &[], 0), Verdict::True);
    }

    #[test]
    fn suffix_offsets() {
        let rows: &[&[&str]] = &[&["s"], &["s", "l"], &[]];
        assert_eq!(ev("s & X !l", rows, 0), Verdict::False);
        assert_eq!(ev("s & X !l", rows, 1), Verdict::True);
        assert_eq!(ev("G(s -> X(l U !s))", &[&["s"], &["s"]], 0), Verdict::False);
    }

    #[test]
    fn references_are_rejected() {
        let f = Formula::reference("m");
        assert_eq!(evaluate3(&f, &[], 0), Err(OracleError::UnresolvedRef("m".into())));
    }
}
