//! Subset construction of both tableaux and their verdict-labelled product.

use std::collections::HashMap;

use super::tableau::{Budget, Gba};
use super::SynthError;
use crate::ltl::Verdict;

/// Lazily determinized view of a tableau restricted to nonempty states.
struct SubsetDfa<'a> {
    gba: &'a Gba,
    letters: u32,
    index: HashMap<Vec<u32>, u32>,
    sets: Vec<Vec<u32>>,
    rows: Vec<Option<Vec<u32>>>,
}

impl<'a> SubsetDfa<'a> {
    fn new(gba: &'a Gba, letters: u32) -> Self {
        SubsetDfa { gba, letters, index: HashMap::new(), sets: Vec::new(), rows: Vec::new() }
    }

    fn intern(&mut self, set: Vec<u32>, budget: &mut Budget<'_>) -> Result<u32, SynthError> {
        if let Some(&id) = self.index.get(&set) {
            return Ok(id);
        }
        budget.take()?;
        let id = self.sets.len() as u32;
        self.index.insert(set.clone(), id);
        self.sets.push(set);
        self.rows.push(None);
        Ok(id)
    }

    fn initial(&mut self, budget: &mut Budget<'_>) -> Result<u32, SynthError> {
        let q = self.gba.initial;
        let set = if self.gba.nonempty[q as usize] { vec![q] } else { Vec::new() };
        self.intern(set, budget)
    }

    fn is_empty(&self, id: u32) -> bool {
        self.sets[id as usize].is_empty()
    }

    fn row(&mut self, id: u32, budget: &mut Budget<'_>) -> Result<&[u32], SynthError> {
        if self.rows[id as usize].is_none() {
            let mut row = Vec::with_capacity(self.letters as usize);
            let members = self.sets[id as usize].clone();
            let mut scratch: Vec<u32> = Vec::new();
            for letter in 0..self.letters {
                scratch.clear();
                for &s in &members {
                    for &(pos, neg, to, _) in &self.gba.edges[s as usize] {
                        if letter & pos == pos && letter & neg == 0 && self.gba.nonempty[to as usize] {
                            scratch.push(to);
                        }
                    }
                }
                scratch.sort_unstable();
                scratch.dedup();
                let t = self.intern(scratch.clone(), budget)?;
                row.push(t);
            }
            self.rows[id as usize] = Some(row);
        }
        Ok(self.rows[id as usize].as_deref().unwrap())
    }
}

pub(crate) struct RawMonitor {
    pub verdicts: Vec<Verdict>,
    pub delta: Vec<Vec<u32>>,
}

pub(crate) fn product(
    letters: u32,
    pos: &Gba,
    neg: &Gba,
    budget: &mut Budget<'_>,
) -> Result<RawMonitor, SynthError> {
    let mut dp = SubsetDfa::new(pos, letters);
    let mut dn = SubsetDfa::new(neg, letters);
    let start = (dp.initial(budget)?, dn.initial(budget)?);
    let mut index: HashMap<(u32, u32), u32> = HashMap::new();
    let mut pairs = vec![start];
    index.insert(start, 0);
    budget.take()?;
    let mut delta: Vec<Vec<u32>> = Vec::new();
    let mut i = 0;
    while i < pairs.len() {
        let (a, b) = pairs[i];
        let ra = dp.row(a, budget)?.to_vec();
        let rb = dn.row(b, budget)?.to_vec();
        let mut row = Vec::with_capacity(letters as usize);
        for l in 0..letters as usize {
            let key = (ra[l], rb[l]);
            let id = match index.get(&key) {
                Some(&id) => id,
                None => {
                    budget.take()?;
                    let id = pairs.len() as u32;
                    index.insert(key, id);
                    pairs.push(key);
                    id
                }
            };
            row.push(id);
        }
        delta.push(row);
        i += 1;
    }
    let verdicts = pairs
        .iter()
        .map(|&(a, b)| {
            if dp.is_empty(a) {
                Verdict::False
            } else if dn.is_empty(b) {
                Verdict::True
            } else {
                Verdict::Unknown
            }
        })
        .collect();
    Ok(RawMonitor { verdicts, delta })
}
