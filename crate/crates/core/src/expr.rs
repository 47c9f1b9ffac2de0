//! Atoms and hash-consed-style Boolean expressions over them.
//!
//! Expressions are immutable `Arc` trees. Every node caches its structural
//! hash and size so equality checks and size metrics stay cheap. The smart
//! constructors [`Expr::and`], [`Expr::or`] and [`Expr::not`] apply local
//! rewrite rules and count each applied rule in a [`SimplifyStats`].

use std::collections::HashMap;
use std::fmt;
use std::hash::{Hash, Hasher};
use std::sync::Arc;

use crate::memory::Memory;

/// Logical round (timestamp).
pub type Round = u64;

/// An observation slot: proposition or monitor label at a timestamp.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Atom {
    pub t: Round,
    pub name: Arc<str>,
}

impl Atom {
    pub fn new(t: Round, name: impl Into<Arc<str>>) -> Self {
        Atom { t, name: name.into() }
    }
}

impl fmt::Display for Atom {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "<{},{}>", self.t, self.name)
    }
}

/// Rewrite-step counter.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct SimplifyStats {
    pub steps: u64,
}

#[derive(Debug)]
enum Kind {
    Const(bool),
    Atom(Atom),
    Not(Expr),
    And(Expr, Expr),
    Or(Expr, Expr),
}

#[derive(Debug)]
struct Node {
    kind: Kind,
    hash: u64,
    size: u32,
    // Built through the simplifying constructors; `seval` may skip such
    // nodes when none of their atoms changed.
    normalized: bool,
}

/// Borrowed view of an expression node.
#[derive(Clone, Copy, Debug)]
pub enum View<'a> {
    Const(bool),
    Atom(&'a Atom),
    Not(&'a Expr),
    And(&'a Expr, &'a Expr),
    Or(&'a Expr, &'a Expr),
}

#[derive(Clone, Debug)]
pub struct Expr(Arc<Node>);

fn mix(tag: u64, parts: &[u64]) -> u64 {
    let mut h = std::collections::hash_map::DefaultHasher::new();
    tag.hash(&mut h);
    for p in parts {
        p.hash(&mut h);
    }
    h.finish()
}

impl Expr {
    fn build(kind: Kind, normalized: bool) -> Expr {
        let (hash, size) = match &kind {
            Kind::Const(b) => (mix(0, &[*b as u64]), 1),
            Kind::Atom(a) => {
                let mut h = std::collections::hash_map::DefaultHasher::new();
                a.hash(&mut h);
                (mix(1, &[h.finish()]), 1)
            }
            Kind::Not(a) => (mix(2, &[a.0.hash]), a.0.size.saturating_add(1)),
            Kind::And(a, b) => (
                mix(3, &[a.0.hash, b.0.hash]),
                a.0.size.saturating_add(b.0.size).saturating_add(1),
            ),
            Kind::Or(a, b) => (
                mix(4, &[a.0.hash, b.0.hash]),
                a.0.size.saturating_add(b.0.size).saturating_add(1),
            ),
        };
        Expr(Arc::new(Node { kind, hash, size, normalized }))
    }

    pub fn constant(b: bool) -> Expr {
        Expr::build(Kind::Const(b), true)
    }

    pub fn tt() -> Expr {
        Expr::constant(true)
    }

    pub fn ff() -> Expr {
        Expr::constant(false)
    }

    pub fn atom(a: Atom) -> Expr {
        Expr::build(Kind::Atom(a), true)
    }

    pub fn var(t: Round, name: &str) -> Expr {
        Expr::atom(Atom::new(t, name))
    }

    /// Unsimplified constructors, used to build test inputs for `simplify`.
    pub fn raw_not(a: Expr) -> Expr {
        Expr::build(Kind::Not(a), false)
    }

    pub fn raw_and(a: Expr, b: Expr) -> Expr {
        Expr::build(Kind::And(a, b), false)
    }

    pub fn raw_or(a: Expr, b: Expr) -> Expr {
        Expr::build(Kind::Or(a, b), false)
    }

    pub fn view(&self) -> View<'_> {
        match &self.0.kind {
            Kind::Const(b) => View::Const(*b),
            Kind::Atom(a) => View::Atom(a),
            Kind::Not(a) => View::Not(a),
            Kind::And(a, b) => View::And(a, b),
            Kind::Or(a, b) => View::Or(a, b),
        }
    }

    pub fn as_const(&self) -> Option<bool> {
        match self.0.kind {
            Kind::Const(b) => Some(b),
            _ => None,
        }
    }

    pub fn is_true(&self) -> bool {
        self.as_const() == Some(true)
    }

    pub fn is_false(&self) -> bool {
        self.as_const() == Some(false)
    }

    /// Total node count (saturating).
    pub fn size(&self) -> usize {
        self.0.size as usize
    }

    pub fn ptr_eq(&self, other: &Expr) -> bool {
        Arc::ptr_eq(&self.0, &other.0)
    }

    fn negation_of(&self, other: &Expr) -> bool {
        matches!(&self.0.kind, Kind::Not(x) if x == other)
            || matches!(&other.0.kind, Kind::Not(x) if x == self)
    }

    pub fn not(a: Expr, st: &mut SimplifyStats) -> Expr {
        match &a.0.kind {
            Kind::Const(b) => {
                st.steps += 1;
                Expr::constant(!b)
            }
            Kind::Not(x) => {
                st.steps += 1;
                x.clone()
            }
            _ => Expr::build(Kind::Not(a), true),
        }
    }

    pub fn and(a: Expr, b: Expr, st: &mut SimplifyStats) -> Expr {
        Expr::junction(true, a, b, st)
    }

    pub fn or(a: Expr, b: Expr, st: &mut SimplifyStats) -> Expr {
        Expr::junction(false, a, b, st)
    }

    fn split(&self, conj: bool) -> Option<(&Expr, &Expr)> {
        match (&self.0.kind, conj) {
            (Kind::And(x, y), true) | (Kind::Or(x, y), false) => Some((x, y)),
            _ => None,
        }
    }

    // `conj` selects And; the Or case is the exact dual.
    fn junction(conj: bool, a: Expr, b: Expr, st: &mut SimplifyStats) -> Expr {
        let unit = conj;
        let zero = !conj;
        match (a.as_const(), b.as_const()) {
            (Some(x), _) if x == zero => {
                st.steps += 1;
                return Expr::constant(zero);
            }
            (_, Some(y)) if y == zero => {
                st.steps += 1;
                return Expr::constant(zero);
            }
            (Some(x), _) if x == unit => {
                st.steps += 1;
                return b;
            }
            (_, Some(y)) if y == unit => {
                st.steps += 1;
                return a;
            }
            _ => {}
        }
        if a == b {
            st.steps += 1;
            return a;
        }
        if a.negation_of(&b) {
            st.steps += 1;
            return Expr::constant(zero);
        }
        // absorption: x & (x | y) -> x
        if let Some((x, y)) = b.split(!conj) {
            if *x == a || *y == a {
                st.steps += 1;
                return a;
            }
        }
        if let Some((x, y)) = a.split(!conj) {
            if *x == b || *y == b {
                st.steps += 1;
                return b;
            }
        }
        // one level of idempotence/complement into a same-kind child
        if let Some((x, y)) = a.split(conj) {
            if *x == b || *y == b {
                st.steps += 1;
                return a;
            }
            if x.negation_of(&b) || y.negation_of(&b) {
                st.steps += 1;
                return Expr::constant(zero);
            }
        }
        if let Some((x, y)) = b.split(conj) {
            if *x == a || *y == a {
                st.steps += 1;
                return b;
            }
            if x.negation_of(&a) || y.negation_of(&a) {
                st.steps += 1;
                return Expr::constant(zero);
            }
        }
        let kind = if conj { Kind::And(a, b) } else { Kind::Or(a, b) };
        Expr::build(kind, true)
    }

    pub fn conjunction(items: impl IntoIterator<Item = Expr>, st: &mut SimplifyStats) -> Expr {
        items
            .into_iter()
            .fold(Expr::tt(), |acc, e| Expr::and(acc, e, st))
    }

    pub fn disjunction(items: impl IntoIterator<Item = Expr>, st: &mut SimplifyStats) -> Expr {
        items
            .into_iter()
            .fold(Expr::ff(), |acc, e| Expr::or(acc, e, st))
    }

    /// Bottom-up rebuild through the simplifying constructors, to a fixed point.
    pub fn simplify(&self, st: &mut SimplifyStats) -> Expr {
        let mut cur = self.clone();
        loop {
            let before = st.steps;
            let mut memo = HashMap::new();
            cur = rebuild(&cur, &|_| None, &mut memo, st, true);
            if st.steps == before {
                return cur;
            }
        }
    }

    /// Replaces every atom bound in `m` by its value and simplifies.
    pub fn seval(&self, m: &Memory, st: &mut SimplifyStats) -> Expr {
        let mut memo = HashMap::new();
        let out = rebuild(self, &|a| m.get(a), &mut memo, st, false);
        if out.0.normalized {
            out
        } else {
            out.simplify(st)
        }
    }

    /// Substitutes atoms through an arbitrary lookup.
    pub fn substitute(&self, lookup: &dyn Fn(&Atom) -> Option<bool>, st: &mut SimplifyStats) -> Expr {
        let mut memo = HashMap::new();
        rebuild(self, lookup, &mut memo, st, false)
    }

    /// Evaluates under a total assignment; `None` if an atom is unbound.
    pub fn eval(&self, assign: &dyn Fn(&Atom) -> Option<bool>) -> Option<bool> {
        match self.view() {
            View::Const(b) => Some(b),
            View::Atom(a) => assign(a),
            View::Not(a) => a.eval(assign).map(|v| !v),
            View::And(a, b) => match a.eval(assign) {
                Some(false) => Some(false),
                Some(true) => b.eval(assign),
                None => match b.eval(assign) {
                    Some(false) => Some(false),
                    _ => None,
                },
            },
            View::Or(a, b) => match a.eval(assign) {
                Some(true) => Some(true),
                Some(false) => b.eval(assign),
                None => match b.eval(assign) {
                    Some(true) => Some(true),
                    _ => None,
                },
            },
        }
    }

    /// Distinct atoms, sorted.
    pub fn atoms(&self) -> Vec<Atom> {
        let mut out = Vec::new();
        let mut stack = vec![self];
        while let Some(e) = stack.pop() {
            match e.view() {
                View::Const(_) => {}
                View::Atom(a) => out.push(a.clone()),
                View::Not(a) => stack.push(a),
                View::And(a, b) | View::Or(a, b) => {
                    stack.push(a);
                    stack.push(b);
                }
            }
        }
        out.sort();
        out.dedup();
        out
    }
}

fn rebuild(
    e: &Expr,
    lookup: &dyn Fn(&Atom) -> Option<bool>,
    memo: &mut HashMap<*const Node, Expr>,
    st: &mut SimplifyStats,
    force: bool,
) -> Expr {
    let key = Arc::as_ptr(&e.0);
    if let Some(hit) = memo.get(&key) {
        return hit.clone();
    }
    let out = match &e.0.kind {
        Kind::Const(_) => e.clone(),
        Kind::Atom(a) => match lookup(a) {
            Some(v) => {
                st.steps += 1;
                Expr::constant(v)
            }
            None => e.clone(),
        },
        Kind::Not(a) => {
            let a2 = rebuild(a, lookup, memo, st, force);
            if !force && e.0.normalized && a2.ptr_eq(a) {
                e.clone()
            } else {
                Expr::not(a2, st)
            }
        }
        Kind::And(a, b) | Kind::Or(a, b) => {
            let a2 = rebuild(a, lookup, memo, st, force);
            let b2 = rebuild(b, lookup, memo, st, force);
            if !force && e.0.normalized && a2.ptr_eq(a) && b2.ptr_eq(b) {
                e.clone()
            } else if matches!(e.0.kind, Kind::And(..)) {
                Expr::and(a2, b2, st)
            } else {
                Expr::or(a2, b2, st)
            }
        }
    };
    memo.insert(key, out.clone());
    out
}

impl PartialEq for Expr {
    fn eq(&self, other: &Self) -> bool {
        if Arc::ptr_eq(&self.0, &other.0) {
            return true;
        }
        if self.0.hash != other.0.hash || self.0.size != other.0.size {
            return false;
        }
        match (&self.0.kind, &other.0.kind) {
            (Kind::Const(a), Kind::Const(b)) => a == b,
            (Kind::Atom(a), Kind::Atom(b)) => a == b,
            (Kind::Not(a), Kind::Not(b)) => a == b,
            (Kind::And(a, b), Kind::And(c, d)) | (Kind::Or(a, b), Kind::Or(c, d)) => a == c && b == d,
            _ => false,
        }
    }
}

impl Eq for Expr {}

impl Hash for Expr {
    fn hash<H: Hasher>(&self, state: &mut H) {
        self.0.hash.hash(state);
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fn go(e: &Expr, f: &mut fmt::Formatter<'_>, top: bool) -> fmt::Result {
            match e.view() {
                View::Const(true) => f.write_str("true"),
                View::Const(false) => f.write_str("false"),
                View::Atom(a) => write!(f, "{a}"),
                View::Not(a) => {
                    f.write_str("!")?;
                    go(a, f, false)
                }
                View::And(a, b) | View::Or(a, b) => {
                    let op = if matches!(e.view(), View::And(..)) { " & " } else { " | " };
                    if !top {
                        f.write_str("(")?;
                    }
                    go(a, f, false)?;
                    f.write_str(op)?;
                    go(b, f, false)?;
                    if !top {
                        f.write_str(")")?;
                    }
                    Ok(())
                }
            }
        }
        go(self, f, true)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn v(t: Round, n: &str) -> Expr {
        Expr::var(t, n)
    }

    #[test]
    fn seval_folds_known_disjunct() {
        let mut st = SimplifyStats::default();
        let e = Expr::or(v(23, "s1"), v(23, "l1"), &mut st);
        let mut m = Memory::new();
        m.store(Atom::new(23, "s1"), true).unwrap();
        let out = e.seval(&m, &mut st);
        assert!(out.is_true());
    }

    #[test]
    fn seval_empty_memory_is_identity() {
        let mut st = SimplifyStats::default();
        let e = v(5, "a");
        assert_eq!(e.seval(&Memory::new(), &mut st), e);
        assert_eq!(st.steps, 0);
    }

    #[test]
    fn identity_and_absorption() {
        let mut st = SimplifyStats::default();
        let a = v(1, "a");
        let e = Expr::raw_and(Expr::tt(), a.clone());
        assert_eq!(e.simplify(&mut st), a);

        let e = Expr::raw_or(a.clone(), Expr::raw_and(a.clone(), v(2, "b")));
        assert_eq!(e.simplify(&mut st), a);
    }

    #[test]
    fn complement_and_double_negation() {
        let mut st = SimplifyStats::default();
        let a = v(1, "a");
        let na = Expr::not(a.clone(), &mut st);
        assert!(Expr::and(a.clone(), na.clone(), &mut st).is_false());
        assert!(Expr::or(na.clone(), a.clone(), &mut st).is_true());
        let nna = Expr::raw_not(Expr::raw_not(a.clone()));
        assert_eq!(nna.simplify(&mut st), a);
    }

    #[test]
    fn sizes() {
        assert_eq!(Expr::tt().size(), 1);
        let e = Expr::raw_or(v(1, "a"), v(1, "b"));
        assert_eq!(e.size(), 3);
    }

    #[test]
    fn display_uses_angle_atoms() {
        let mut st = SimplifyStats::default();
        let e = Expr::and(v(0, "s"), Expr::not(v(0, "l"), &mut st), &mut st);
        assert_eq!(e.to_string(), "<0,s> & !<0,l>");
    }

    #[test]
    fn steps_are_counted_per_rule() {
        let mut st = SimplifyStats::default();
        let _ = Expr::and(Expr::tt(), v(0, "a"), &mut st);
        assert_eq!(st.steps, 1);
        let _ = Expr::and(v(0, "a"), v(0, "b"), &mut st);
        assert_eq!(st.steps, 1);
    }

    const NAMES: [&str; 5] = ["a", "b", "c", "d", "e"];

    fn arb_expr() -> impl Strategy<Value = Expr> {
        let leaf = prop_oneof![
            any::<bool>().prop_map(Expr::constant),
            (0..5usize).prop_map(|i| Expr::var(0, NAMES[i])),
        ];
        leaf.prop_recursive(5, 48, 2, |inner| {
            prop_oneof![
                inner.clone().prop_map(Expr::raw_not),
                (inner.clone(), inner.clone()).prop_map(|(a, b)| Expr::raw_and(a, b)),
                (inner.clone(), inner).prop_map(|(a, b)| Expr::raw_or(a, b)),
            ]
        })
    }

    fn truth(e: &Expr, bits: u32) -> bool {
        e.eval(&|a| {
            let i = NAMES.iter().position(|n| **n == *a.name).unwrap();
            Some(bits >> i & 1 == 1)
        })
        .unwrap()
    }

    fn memory_of(bits: u32, mask: u32) -> Memory {
        let mut m = Memory::new();
        for (i, n) in NAMES.iter().enumerate() {
            if mask >> i & 1 == 1 {
                m.store(Atom::new(0, *n), bits >> i & 1 == 1).unwrap();
            }
        }
        m
    }

    proptest! {
        #[test]
        fn simplify_preserves_truth_table(e in arb_expr()) {
            let mut st = SimplifyStats::default();
            let s = e.simplify(&mut st);
            prop_assert!(s.size() <= e.size());
            for bits in 0..32u32 {
                prop_assert_eq!(truth(&e, bits), truth(&s, bits));
            }
        }

        #[test]
        fn simplified_has_no_nested_constants(e in arb_expr()) {
            let mut st = SimplifyStats::default();
            let s = e.simplify(&mut st);
            if s.as_const().is_none() {
                let mut stack = vec![s.clone()];
                while let Some(x) = stack.pop() {
                    match x.view() {
                        View::Const(_) => prop_assert!(false, "constant below connective in {}", s),
                        View::Atom(_) => {}
                        View::Not(a) => stack.push(a.clone()),
                        View::And(a, b) | View::Or(a, b) => { stack.push(a.clone()); stack.push(b.clone()); }
                    }
                }
            }
        }

        #[test]
        fn full_memory_folds_to_truth_value(e in arb_expr(), bits in 0..32u32) {
            let mut st = SimplifyStats::default();
            let m = memory_of(bits, 0b11111);
            prop_assert_eq!(e.seval(&m, &mut st).as_const(), Some(truth(&e, bits)));
        }

        #[test]
        fn seval_laws(e in arb_expr(), bits in 0..32u32, m1 in 0..32u32) {
            let mut st = SimplifyStats::default();
            prop_assert_eq!(e.seval(&Memory::new(), &mut st), e.simplify(&mut st));
            let m = memory_of(bits, m1);
            let once = e.seval(&m, &mut st);
            prop_assert_eq!(once.seval(&m, &mut st), once.clone());
            // disjoint split of the same bindings
            let left = memory_of(bits, m1 & 0b00111);
            let right = memory_of(bits, m1 & 0b11000);
            let staged = e.seval(&left, &mut st).seval(&right, &mut st);
            for b in 0..32u32 {
                let merged = (b & !m1) | (bits & m1);
                prop_assert_eq!(truth(&staged, merged), truth(&once, merged));
            }
        }
    }
}
