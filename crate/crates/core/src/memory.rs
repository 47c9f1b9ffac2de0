//! Timestamp-indexed store of final observations.

use std::collections::{BTreeMap, HashMap};
use std::fmt::Write as _;
use std::sync::Arc;

use thiserror::Error;

use crate::expr::{Atom, Round};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("conflicting observation for {atom}: stored {stored}, received {received}")]
pub struct ConflictError {
    pub atom: Atom,
    pub stored: bool,
    pub received: bool,
}

/// Partial map from atoms to Boolean values, grouped by timestamp.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Memory {
    by_round: BTreeMap<Round, HashMap<Arc<str>, bool>>,
    len: usize,
}

impl Memory {
    pub fn new() -> Self {
        Self::default()
    }

    /// Records `a ↦ v`. Re-storing the same value is a no-op.
    /// Returns whether the atom was new.
    pub fn store(&mut self, a: Atom, v: bool) -> Result<bool, ConflictError> {
        let slot = self.by_round.entry(a.t).or_default();
        match slot.get(&a.name) {
            Some(&old) if old == v => Ok(false),
            Some(&old) => Err(ConflictError { atom: a, stored: old, received: v }),
            None => {
                slot.insert(a.name, v);
                self.len += 1;
                Ok(true)
            }
        }
    }

    pub fn get(&self, a: &Atom) -> Option<bool> {
        self.lookup(a.t, &a.name)
    }

    pub fn lookup(&self, t: Round, name: &str) -> Option<bool> {
        self.by_round.get(&t).and_then(|m| m.get(name).copied())
    }

    /// Drops every atom with timestamp `<= t`.
    pub fn gc(&mut self, t: Round) {
        let keep = match t.checked_add(1) {
            Some(next) => self.by_round.split_off(&next),
            None => BTreeMap::new(),
        };
        self.by_round = keep;
        self.len = self.by_round.values().map(HashMap::len).sum();
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    /// Greatest timestamp present.
    pub fn t_max(&self) -> Option<Round> {
        self.by_round.keys().next_back().copied()
    }

    pub fn at(&self, t: Round) -> impl Iterator<Item = (&str, bool)> {
        self.by_round
            .get(&t)
            .into_iter()
            .flat_map(|m| m.iter().map(|(k, v)| (&**k, *v)))
    }

    /// Entries in `(t, name)` order.
    pub fn entries(&self) -> Vec<(Atom, bool)> {
        let mut out = Vec::with_capacity(self.len);
        for (t, m) in &self.by_round {
            let mut row: Vec<_> = m.iter().collect();
            row.sort_by(|a, b| a.0.cmp(b.0));
            out.extend(row.into_iter().map(|(n, v)| (Atom { t: *t, name: n.clone() }, *v)));
        }
        out
    }

    /// One `t,name,verdict` line per entry.
    pub fn dump(&self) -> String {
        let mut s = String::new();
        for (a, v) in self.entries() {
            let _ = writeln!(s, "{},{},{}", a.t, a.name, if v { "TRUE" } else { "FALSE" });
        }
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn store_and_lookup() {
        let mut m = Memory::new();
        assert!(m.store(Atom::new(23, "s1"), true).unwrap());
        assert_eq!(m.get(&Atom::new(23, "s1")), Some(true));
        assert_eq!(m.len(), 1);
        let snapshot = m.clone();
        assert!(!m.store(Atom::new(23, "s1"), true).unwrap());
        assert_eq!(m, snapshot);
        let err = m.store(Atom::new(23, "s1"), false).unwrap_err();
        assert!(err.stored && !err.received);
    }

    #[test]
    fn gc_removes_up_to_and_including_bound() {
        let mut m = Memory::new();
        m.store(Atom::new(3, "a"), true).unwrap();
        m.store(Atom::new(5, "b"), false).unwrap();
        let mut early = m.clone();
        early.gc(2);
        assert_eq!(early, m);
        m.gc(4);
        assert_eq!(m.entries(), vec![(Atom::new(5, "b"), false)]);
        m.gc(5);
        assert!(m.is_empty());
        assert_eq!(m.t_max(), None);
    }

    #[test]
    fn dump_is_sorted() {
        let mut m = Memory::new();
        m.store(Atom::new(2, "b"), false).unwrap();
        m.store(Atom::new(1, "z"), true).unwrap();
        m.store(Atom::new(2, "a"), true).unwrap();
        assert_eq!(m.dump(), "1,z,TRUE\n2,a,TRUE\n2,b,FALSE\n");
    }

    proptest! {
        #[test]
        fn gc_is_idempotent_and_exact(
            items in proptest::collection::vec((0..20u64, 0..4usize, any::<bool>()), 0..40),
            t in 0..22u64,
        ) {
            let names = ["a", "b", "c", "d"];
            let mut m = Memory::new();
            for (ts, n, v) in &items {
                let _ = m.store(Atom::new(*ts, names[*n]), *v);
            }
            let mut once = m.clone();
            once.gc(t);
            let mut twice = once.clone();
            twice.gc(t);
            prop_assert_eq!(&once, &twice);
            let expected: Vec<_> = m.entries().into_iter().filter(|(a, _)| a.t > t).collect();
            prop_assert_eq!(once.entries(), expected);
            prop_assert_eq!(once.len(), once.entries().len());
            for ts in 0..20u64 {
                let listed = m.at(ts).count();
                prop_assert_eq!(listed, m.entries().iter().filter(|(a, _)| a.t == ts).count());
            }
        }
    }
}
