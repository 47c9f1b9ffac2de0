//! On-the-fly tableau producing a transition-based generalized Büchi automaton.
//!
//! Formulas are put in negation normal form over `X`, `U`, `R`. A state is a
//! set of obligations; expanding it yields covers (a literal constraint, the
//! obligations for the next step and the set of postponed untils).

use std::collections::{BTreeSet, HashMap, HashSet};

use crate::ltl::Formula;

pub(crate) type Id = u32;

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub(crate) enum Node {
    True,
    False,
    Lit(u32, bool),
    And(Vec<Id>),
    Or(Vec<Id>),
    Next(Id),
    Until(Id, Id),
    Release(Id, Id),
}

#[derive(Default)]
pub(crate) struct Arena {
    nodes: Vec<Node>,
    index: HashMap<Node, Id>,
    until_bits: HashMap<Id, u32>,
}

impl Arena {
    fn intern(&mut self, n: Node) -> Id {
        if let Some(&id) = self.index.get(&n) {
            return id;
        }
        let id = self.nodes.len() as Id;
        if let Node::Until(..) = n {
            let bit = self.until_bits.len() as u32;
            self.until_bits.insert(id, bit);
        }
        self.nodes.push(n.clone());
        self.index.insert(n, id);
        id
    }

    pub(crate) fn node(&self, id: Id) -> &Node {
        &self.nodes[id as usize]
    }

    pub(crate) fn until_count(&self) -> u32 {
        self.until_bits.len() as u32
    }

    fn junction(&mut self, conj: bool, parts: Vec<Id>) -> Id {
        let (unit, zero) = if conj { (Node::True, Node::False) } else { (Node::False, Node::True) };
        let unit = self.intern(unit);
        let zero = self.intern(zero);
        let mut flat = BTreeSet::new();
        for p in parts {
            if p == zero {
                return zero;
            }
            if p == unit {
                continue;
            }
            match (self.node(p), conj) {
                (Node::And(xs), true) | (Node::Or(xs), false) => flat.extend(xs.iter().copied()),
                _ => {
                    flat.insert(p);
                }
            }
        }
        match flat.len() {
            0 => unit,
            1 => *flat.iter().next().unwrap(),
            _ => {
                let v: Vec<Id> = flat.into_iter().collect();
                self.intern(if conj { Node::And(v) } else { Node::Or(v) })
            }
        }
    }

    /// Negation normal form of `f` (negated when `neg`).
    pub(crate) fn nnf(&mut self, f: &Formula, neg: bool, vars: &HashMap<String, u32>) -> Id {
        use Formula::*;
        match f {
            Const(b) => self.intern(if *b != neg { Node::True } else { Node::False }),
            Prop(n) | Ref(n) => self.intern(Node::Lit(vars[n], !neg)),
            Not(a) => self.nnf(a, !neg, vars),
            And(a, b) | Or(a, b) => {
                let x = self.nnf(a, neg, vars);
                let y = self.nnf(b, neg, vars);
                let conj = matches!(f, And(..)) != neg;
                self.junction(conj, vec![x, y])
            }
            Implies(a, b) => {
                let x = self.nnf(a, !neg, vars);
                let y = self.nnf(b, neg, vars);
                self.junction(neg, vec![x, y])
            }
            Next(a) => {
                let x = self.nnf(a, neg, vars);
                self.intern(Node::Next(x))
            }
            Until(a, b) => {
                let x = self.nnf(a, neg, vars);
                let y = self.nnf(b, neg, vars);
                self.intern(if neg { Node::Release(x, y) } else { Node::Until(x, y) })
            }
            Globally(a) | Finally(a) => {
                let body = self.nnf(a, neg, vars);
                let is_g = matches!(f, Globally(_)) != neg;
                if is_g {
                    let ff = self.intern(Node::False);
                    self.intern(Node::Release(ff, body))
                } else {
                    let tt = self.intern(Node::True);
                    self.intern(Node::Until(tt, body))
                }
            }
            FinallyWithin(..) | GloballyWithin(..) => self.nnf(&f.desugar(), neg, vars),
        }
    }
}

/// One outgoing transition family of a tableau state.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub(crate) struct Cover {
    pub pos: u32,
    pub neg: u32,
    pub next: Vec<Id>,
    /// Acceptance bits (one per until) carried by the transition.
    pub acc: u64,
}

#[derive(Clone)]
struct Partial {
    pos: u32,
    neg: u32,
    next: BTreeSet<Id>,
    postponed: u64,
    seen: HashSet<Id>,
}

impl Arena {
    pub(crate) fn covers(&self, obligations: &[Id]) -> Vec<Cover> {
        let full: u64 = if self.until_count() >= 64 { u64::MAX } else { (1u64 << self.until_count()) - 1 };
        let mut out = HashSet::new();
        let start = Partial {
            pos: 0,
            neg: 0,
            next: BTreeSet::new(),
            postponed: 0,
            seen: HashSet::new(),
        };
        self.expand(obligations.to_vec(), start, &mut |p| {
            out.insert(Cover {
                pos: p.pos,
                neg: p.neg,
                next: p.next.iter().copied().collect(),
                acc: full & !p.postponed,
            });
        });
        let mut v: Vec<Cover> = out.into_iter().collect();
        v.sort_by(|a, b| (a.pos, a.neg, &a.next, a.acc).cmp(&(b.pos, b.neg, &b.next, b.acc)));
        v
    }

    fn expand(&self, mut todo: Vec<Id>, mut p: Partial, emit: &mut impl FnMut(&Partial)) {
        while let Some(id) = todo.pop() {
            if !p.seen.insert(id) {
                continue;
            }
            match self.node(id) {
                Node::True => {}
                Node::False => return,
                Node::Lit(v, pol) => {
                    let bit = 1u32 << v;
                    if *pol {
                        if p.neg & bit != 0 {
                            return;
                        }
                        p.pos |= bit;
                    } else {
                        if p.pos & bit != 0 {
                            return;
                        }
                        p.neg |= bit;
                    }
                }
                Node::And(xs) => todo.extend(xs.iter().copied()),
                Node::Or(xs) => {
                    for &x in xs {
                        let mut t = todo.clone();
                        t.push(x);
                        self.expand(t, p.clone(), emit);
                    }
                    return;
                }
                Node::Next(x) => {
                    p.next.insert(*x);
                }
                Node::Until(a, b) => {
                    let bit = 1u64 << self.until_bits[&id];
                    let mut now = todo.clone();
                    now.push(*b);
                    self.expand(now, p.clone(), emit);
                    let mut later = p;
                    later.postponed |= bit;
                    later.next.insert(id);
                    todo.push(*a);
                    self.expand(todo, later, emit);
                    return;
                }
                Node::Release(a, b) => {
                    let mut now = todo.clone();
                    now.push(*a);
                    now.push(*b);
                    self.expand(now, p.clone(), emit);
                    let mut later = p;
                    later.next.insert(id);
                    todo.push(*b);
                    self.expand(todo, later, emit);
                    return;
                }
            }
        }
        emit(&p);
    }
}

/// Explicit generalized Büchi automaton whose states carry a nonemptiness flag.
pub(crate) struct Gba {
    pub states: Vec<Vec<Id>>,
    pub edges: Vec<Vec<(u32, u32, u32, u64)>>, // (pos, neg, to, acc)
    pub nonempty: Vec<bool>,
    pub initial: u32,
}

pub(crate) struct Budget<'a> {
    pub used: &'a mut usize,
    pub limit: usize,
    pub check: &'a mut dyn FnMut() -> Result<(), super::SynthError>,
}

impl Budget<'_> {
    pub(crate) fn take(&mut self) -> Result<(), super::SynthError> {
        *self.used += 1;
        if *self.used > self.limit {
            return Err(super::SynthError::Capacity { states: *self.used, limit: self.limit });
        }
        if self.used.is_multiple_of(256) {
            (self.check)()?;
        }
        Ok(())
    }
}

pub(crate) fn build(arena: &Arena, root: Id, budget: &mut Budget<'_>) -> Result<Gba, super::SynthError> {
    let mut index: HashMap<Vec<Id>, u32> = HashMap::new();
    let mut states: Vec<Vec<Id>> = Vec::new();
    let mut edges: Vec<Vec<(u32, u32, u32, u64)>> = Vec::new();
    let init = vec![root];
    index.insert(init.clone(), 0);
    states.push(init);
    budget.take()?;
    let mut i = 0;
    while i < states.len() {
        let covers = arena.covers(&states[i]);
        let mut out = Vec::with_capacity(covers.len());
        for c in covers {
            let to = match index.get(&c.next) {
                Some(&t) => t,
                None => {
                    budget.take()?;
                    let t = states.len() as u32;
                    index.insert(c.next.clone(), t);
                    states.push(c.next.clone());
                    t
                }
            };
            out.push((c.pos, c.neg, to, c.acc));
        }
        edges.push(out);
        i += 1;
    }
    let full: u64 = if arena.until_count() >= 64 { u64::MAX } else { (1u64 << arena.until_count()) - 1 };
    let nonempty = nonempty_states(&edges, full);
    Ok(Gba { states, edges, nonempty, initial: 0 })
}

/// Tarjan SCCs; a state is nonempty when it reaches an SCC with an internal
/// edge whose acceptance marks cover every until.
fn nonempty_states(edges: &[Vec<(u32, u32, u32, u64)>], full: u64) -> Vec<bool> {
    let n = edges.len();
    let mut index = vec![u32::MAX; n];
    let mut low = vec![0u32; n];
    let mut on_stack = vec![false; n];
    let mut stack = Vec::new();
    let mut comp = vec![u32::MAX; n];
    let mut comps: Vec<Vec<u32>> = Vec::new();
    let mut counter = 0u32;
    // iterative Tarjan: (node, next edge index)
    for root in 0..n {
        if index[root] != u32::MAX {
            continue;
        }
        let mut call: Vec<(usize, usize)> = vec![(root, 0)];
        index[root] = counter;
        low[root] = counter;
        counter += 1;
        stack.push(root);
        on_stack[root] = true;
        while let Some(top) = call.last_mut() {
            let v = top.0;
            if top.1 < edges[v].len() {
                let w = edges[v][top.1].2 as usize;
                top.1 += 1;
                if index[w] == u32::MAX {
                    index[w] = counter;
                    low[w] = counter;
                    counter += 1;
                    stack.push(w);
                    on_stack[w] = true;
                    call.push((w, 0));
                } else if on_stack[w] {
                    low[v] = low[v].min(index[w]);
                }
            } else {
                call.pop();
                if let Some(&(u, _)) = call.last() {
                    low[u] = low[u].min(low[v]);
                }
                if low[v] == index[v] {
                    let id = comps.len() as u32;
                    let mut members = Vec::new();
                    loop {
                        let w = stack.pop().unwrap();
                        on_stack[w] = false;
                        comp[w] = id;
                        members.push(w as u32);
                        if w == v {
                            break;
                        }
                    }
                    comps.push(members);
                }
            }
        }
    }
    // components come out sinks first
    let mut good = vec![false; comps.len()];
    for (cid, members) in comps.iter().enumerate() {
        let mut marks = 0u64;
        let mut internal = false;
        let mut reaches = false;
        for &s in members {
            for &(_, _, to, acc) in &edges[s as usize] {
                let tc = comp[to as usize] as usize;
                if tc == cid {
                    internal = true;
                    marks |= acc;
                } else if good[tc] {
                    reaches = true;
                }
            }
        }
        good[cid] = reaches || (internal && marks & full == full);
    }
    (0..n).map(|s| good[comp[s] as usize]).collect()
}
