//! Moore-style partition refinement and BFS renumbering.

use std::collections::{HashMap, VecDeque};

use crate::ltl::Verdict;

/// Merges equivalent states and renumbers reachable ones in BFS order from
/// `initial`, which becomes state 0. Returns `(verdicts, delta)`.
pub(crate) fn minimize_tables(
    initial: u32,
    verdicts: &[Verdict],
    delta: &[Vec<u32>],
) -> (Vec<Verdict>, Vec<Vec<u32>>) {
    let n = verdicts.len();
    let mut class: Vec<u32> = verdicts
        .iter()
        .map(|v| match v {
            Verdict::True => 0,
            Verdict::False => 1,
            Verdict::Unknown => 2,
        })
        .collect();
    let mut count = {
        let mut seen: Vec<u32> = class.clone();
        seen.sort_unstable();
        seen.dedup();
        seen.len()
    };
    loop {
        let mut sigs: HashMap<(u32, Vec<u32>), u32> = HashMap::new();
        let mut next = vec![0u32; n];
        for s in 0..n {
            let sig = (class[s], delta[s].iter().map(|&t| class[t as usize]).collect::<Vec<_>>());
            let len = sigs.len() as u32;
            next[s] = *sigs.entry(sig).or_insert(len);
        }
        let new_count = sigs.len();
        class = next;
        if new_count == count {
            break;
        }
        count = new_count;
    }
    // BFS over the quotient
    let mut order: HashMap<u32, u32> = HashMap::new();
    let mut reps: Vec<usize> = Vec::new();
    let mut queue = VecDeque::new();
    order.insert(class[initial as usize], 0);
    reps.push(initial as usize);
    queue.push_back(initial as usize);
    while let Some(s) = queue.pop_front() {
        for &t in &delta[s] {
            let c = class[t as usize];
            if let std::collections::hash_map::Entry::Vacant(e) = order.entry(c) {
                e.insert(reps.len() as u32);
                reps.push(t as usize);
                queue.push_back(t as usize);
            }
        }
    }
    let out_verdicts = reps.iter().map(|&s| verdicts[s]).collect();
    let out_delta = reps
        .iter()
        .map(|&s| delta[s].iter().map(|&t| order[&class[t as usize]]).collect())
        .collect();
    (out_verdicts, out_delta)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn merges_duplicate_unknown_states() {
        use Verdict::*;
        // 0 and 1 both wait for letter 1 to reach the FALSE sink
        let verdicts = [Unknown, Unknown, False];
        let delta = vec![vec![1, 2], vec![0, 2], vec![2, 2]];
        let (v, d) = minimize_tables(0, &verdicts, &delta);
        assert_eq!(v, vec![Unknown, False]);
        assert_eq!(d, vec![vec![0, 1], vec![1, 1]]);
    }

    #[test]
    fn drops_unreachable_states() {
        use Verdict::*;
        let verdicts = [True, False];
        let delta = vec![vec![0], vec![1]];
        let (v, _) = minimize_tables(0, &verdicts, &delta);
        assert_eq!(v, vec![True]);
    }
}
