//! Outcome enumeration under a strategy: bounded run prefixes by the
//! inductive one-step decomposition, plus finite lasso closure over
//! (state, memory) pairs so infinite outcomes stay representable.

use crate::error::{Error, Result};
use crate::game::{AltSystem, Strategy};
use crate::logic::eval::LassoWord;

/// Run prefix closed into a lasso: states[cycle_start..] repeats forever.
#[derive(Debug, Clone, PartialEq)]
pub struct LassoRun {
    pub states: Vec<u32>,
    pub cycle_start: usize,
}

impl LassoRun {
    pub fn to_word(&self, t: &AltSystem) -> LassoWord {
        let prefix = self.states[..self.cycle_start]
            .iter()
            .map(|&q| t.states[q as usize].clone())
            .collect();
        let cycle = self.states[self.cycle_start..]
            .iter()
            .map(|&q| t.states[q as usize].clone())
            .collect();
        LassoWord::new(prefix, cycle).expect("cycle nonempty by construction")
    }
}

/// Enumerated outcomes of a strategy from one state.
#[derive(Debug, Clone)]
pub struct OutcomeSet {
    /// Out^n for n = 1..=depth: prefixes[n-1] holds the runs of length n.
    pub prefixes: Vec<Vec<Vec<u32>>>,
    /// Outcome branches closed at their first (state, memory) repetition.
    pub lassos: Vec<LassoRun>,
}

/// Enumerate Out^n up to `depth` and all lasso closures, with a node cap
/// against exponential blowup.
pub fn outcomes(
    t: &AltSystem,
    q0: usize,
    f: &Strategy,
    depth: usize,
    cap: usize,
) -> Result<OutcomeSet> {
    if q0 >= t.n_states() {
        return Err(Error::Invalid(format!("state {q0} out of range")));
    }
    let m0 = f.update(f.initial_memory, q0);

    // Out^1 = {q0}; Out^{k+1} extends Out^k one transition at a time.
    let mut prefixes: Vec<Vec<Vec<u32>>> = vec![vec![vec![q0 as u32]]];
    let mut frontier: Vec<(Vec<u32>, usize)> = vec![(vec![q0 as u32], m0)];
    let mut visited_nodes = 1usize;
    for _ in 1..depth {
        let mut next: Vec<(Vec<u32>, usize)> = Vec::new();
        for (run, mem) in &frontier {
            let q = *run.last().unwrap() as usize;
            for a in f.choose(*mem, q) {
                for b in 0..t.n_disturbances() {
                    for &q2 in t.successors(q, a as usize, b) {
                        let mut r = run.clone();
                        r.push(q2);
                        let m2 = f.update(*mem, q2 as usize);
                        next.push((r, m2));
                        visited_nodes += 1;
                        if visited_nodes > cap {
                            return Err(Error::EnumerationCap(cap));
                        }
                    }
                }
            }
        }
        next.sort();
        next.dedup();
        if next.is_empty() {
            break;
        }
        prefixes.push(next.iter().map(|(r, _)| r.clone()).collect());
        frontier = next;
    }

    // DFS lasso closure on (state, memory) pairs.
    let mut lassos = Vec::new();
    let mut stack: Vec<(u32, usize)> = vec![(q0 as u32, m0)];
    let mut budget = cap;
    dfs_lassos(t, f, &mut stack, &mut lassos, &mut budget)?;
    Ok(OutcomeSet { prefixes, lassos })
}

fn dfs_lassos(
    t: &AltSystem,
    f: &Strategy,
    stack: &mut Vec<(u32, usize)>,
    out: &mut Vec<LassoRun>,
    budget: &mut usize,
) -> Result<()> {
    let (q, mem) = *stack.last().unwrap();
    for a in f.choose(mem, q as usize) {
        for b in 0..t.n_disturbances() {
            for &q2 in t.successors(q as usize, a as usize, b) {
                if *budget == 0 {
                    return Err(Error::EnumerationCap(out.len()));
                }
                *budget -= 1;
                let m2 = f.update(mem, q2 as usize);
                if let Some(pos) = stack.iter().position(|&(sq, sm)| sq == q2 && sm == m2) {
                    out.push(LassoRun {
                        states: stack.iter().map(|&(sq, _)| sq).collect(),
                        cycle_start: pos,
                    });
                } else {
                    stack.push((q2, m2));
                    dfs_lassos(t, f, stack, out, budget)?;
                    stack.pop();
                }
            }
        }
    }
    Ok(())
}
