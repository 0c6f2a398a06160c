//! Two-player structures on finite alternating transition systems: control
//! strategies, outcome enumeration, controllable predecessors, fixpoint
//! synthesis, bisimulation checking, and strategy transfer.

pub mod bisim;
pub mod outcomes;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::logic::Formula;
use crate::numerics::Vector;

/// Finite alternating transition system. States are observed through the
/// natural inclusion: the observation of state `q` is `states[q]` itself.
/// A transition (q, a, b) -> q' pairs a control label with an adversarial
/// disturbance label.
#[derive(Debug, Clone, PartialEq)]
pub struct AltSystem {
    pub states: Vec<Vector>,
    pub control_labels: Vec<Vector>,
    pub disturbance_labels: Vec<Vector>,
    /// successors[(q * |A| + a) * |B| + b] = sorted successor state ids
    succ: Vec<Vec<u32>>,
}

impl AltSystem {
    pub fn new(
        states: Vec<Vector>,
        control_labels: Vec<Vector>,
        disturbance_labels: Vec<Vector>,
    ) -> Result<AltSystem> {
        if states.is_empty() {
            return Err(Error::Invalid("alternating system needs at least one state".into()));
        }
        if control_labels.is_empty() || disturbance_labels.is_empty() {
            return Err(Error::Invalid("label sets must be nonempty".into()));
        }
        let n = states.len() * control_labels.len() * disturbance_labels.len();
        Ok(AltSystem {
            states,
            control_labels,
            disturbance_labels,
            succ: vec![Vec::new(); n],
        })
    }

    pub fn n_states(&self) -> usize {
        self.states.len()
    }

    pub fn n_controls(&self) -> usize {
        self.control_labels.len()
    }

    pub fn n_disturbances(&self) -> usize {
        self.disturbance_labels.len()
    }

    fn idx(&self, q: usize, a: usize, b: usize) -> usize {
        (q * self.control_labels.len() + a) * self.disturbance_labels.len() + b
    }

    pub fn add_transition(&mut self, q: usize, a: usize, b: usize, q2: usize) {
        let i = self.idx(q, a, b);
        let v = &mut self.succ[i];
        if let Err(pos) = v.binary_search(&(q2 as u32)) {
            v.insert(pos, q2 as u32);
        }
    }

    pub fn successors(&self, q: usize, a: usize, b: usize) -> &[u32] {
        &self.succ[self.idx(q, a, b)]
    }

    /// Control label `a` is playable at `q` when every disturbance answer
    /// has at least one successor. Triples without successors come from
    /// grid truncation at the state-space boundary and must never be chosen.
    pub fn available(&self, q: usize, a: usize) -> bool {
        (0..self.disturbance_labels.len()).all(|b| !self.successors(q, a, b).is_empty())
    }

    pub fn available_controls(&self, q: usize) -> Vec<usize> {
        (0..self.control_labels.len()).filter(|&a| self.available(q, a)).collect()
    }

    /// Triples (q, a, b) with no successor.
    pub fn blocking_triples(&self) -> Vec<(u32, u32, u32)> {
        let mut out = Vec::new();
        for q in 0..self.n_states() {
            for a in 0..self.n_controls() {
                for b in 0..self.n_disturbances() {
                    if self.successors(q, a, b).is_empty() {
                        out.push((q as u32, a as u32, b as u32));
                    }
                }
            }
        }
        out
    }

    pub fn non_blocking(&self) -> bool {
        self.succ.iter().all(|v| !v.is_empty())
    }

    /// All transitions as (q, a, b, q') quadruples in deterministic order.
    pub fn transitions(&self) -> Vec<(u32, u32, u32, u32)> {
        let mut out = Vec::new();
        for q in 0..self.n_states() {
            for a in 0..self.n_controls() {
                for b in 0..self.n_disturbances() {
                    for &q2 in self.successors(q, a, b) {
                        out.push((q as u32, a as u32, b as u32, q2));
                    }
                }
            }
        }
        out
    }
}

/// Finite-memory control strategy: a memory automaton driven by observed
/// states plus a choice table. The memory for a run q1..qi is
/// m1 = initial updated through q2..qi; the choice for the next move reads
/// (mi, qi). Histories outside the recorded tables fall back to every
/// control label, keeping the strategy total.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Strategy {
    pub memory_count: usize,
    pub initial_memory: usize,
    /// (memory, observed state) -> next memory; missing pairs keep memory.
    pub updates: BTreeMap<(u32, u32), u32>,
    /// (memory, state) -> nonempty set of control labels.
    pub choices: BTreeMap<(u32, u32), Vec<u32>>,
    /// Number of control labels of the underlying system.
    pub n_controls: usize,
}

impl Strategy {
    /// Memoryless strategy from a per-state choice table.
    pub fn memoryless(choices: Vec<Vec<u32>>, n_controls: usize) -> Strategy {
        let mut map = BTreeMap::new();
        for (q, c) in choices.into_iter().enumerate() {
            if !c.is_empty() {
                map.insert((0u32, q as u32), c);
            }
        }
        Strategy {
            memory_count: 1,
            initial_memory: 0,
            updates: BTreeMap::new(),
            choices: map,
            n_controls,
        }
    }

    pub fn update(&self, memory: usize, observed: usize) -> usize {
        self.updates
            .get(&(memory as u32, observed as u32))
            .map(|&m| m as usize)
            .unwrap_or(memory)
    }

    /// Nonempty choice set at (memory, state); unrecorded pairs allow all.
    pub fn choose(&self, memory: usize, state: usize) -> Vec<u32> {
        match self.choices.get(&(memory as u32, state as u32)) {
            Some(v) => v.clone(),
            None => (0..self.n_controls as u32).collect(),
        }
    }

    /// Deterministic pick used at controller-derivation time.
    pub fn choose_one(&self, memory: usize, state: usize) -> u32 {
        *self.choose(memory, state).iter().min().expect("choice sets are nonempty")
    }
}

/// Controllable predecessor of S: states where some control label forces
/// every disturbed successor into S. Labels with blocking triples are not
/// eligible, so the inner universal is never vacuous.
pub fn cpre(t: &AltSystem, s: &[bool]) -> Vec<bool> {
    debug_assert_eq!(s.len(), t.n_states());
    (0..t.n_states())
        .map(|q| {
            (0..t.n_controls()).any(|a| {
                (0..t.n_disturbances()).all(|b| {
                    let succ = t.successors(q, a, b);
                    !succ.is_empty() && succ.iter().all(|&q2| s[q2 as usize])
                })
            })
        })
        .collect()
}

/// Flat synthesizable fragment: a state formula, one until, one release, or
/// a disjunction of those.
enum FlatSpec<'a> {
    State(&'a Formula),
    Until(&'a Formula, &'a Formula),
    Release(&'a Formula, &'a Formula),
}

fn is_state_formula(f: &Formula) -> bool {
    match f {
        Formula::Atom(_) => true,
        Formula::And(l, r) | Formula::Or(l, r) => is_state_formula(l) && is_state_formula(r),
        _ => false,
    }
}

fn flatten_spec<'a>(f: &'a Formula, out: &mut Vec<FlatSpec<'a>>) -> Result<()> {
    match f {
        Formula::Until(l, r) => {
            if !is_state_formula(l) || !is_state_formula(r) {
                return Err(Error::Fragment(
                    "nested temporal operators under U are not synthesizable; monitoring still accepts them".into(),
                ));
            }
            out.push(FlatSpec::Until(l, r));
            Ok(())
        }
        Formula::Release(l, r) => {
            if !is_state_formula(l) || !is_state_formula(r) {
                return Err(Error::Fragment(
                    "nested temporal operators under R are not synthesizable; monitoring still accepts them".into(),
                ));
            }
            out.push(FlatSpec::Release(l, r));
            Ok(())
        }
        Formula::Or(l, r) => {
            if is_state_formula(f) {
                out.push(FlatSpec::State(f));
                return Ok(());
            }
            flatten_spec(l, out)?;
            flatten_spec(r, out)
        }
        Formula::And(_, _) if !is_state_formula(f) => Err(Error::Fragment(
            "conjunctions of temporal formulas are not synthesizable".into(),
        )),
        other => {
            out.push(FlatSpec::State(other));
            Ok(())
        }
    }
}

/// Evaluate a state formula at an observation vector.
fn eval_state_formula(f: &Formula, x: &[f64]) -> bool {
    match f {
        Formula::Atom(a) => a.sat(x),
        Formula::And(l, r) => eval_state_formula(l, x) && eval_state_formula(r, x),
        Formula::Or(l, r) => eval_state_formula(l, x) || eval_state_formula(r, x),
        _ => unreachable!("state formulas carry no temporal operators"),
    }
}

/// Winning region, per-state fixpoint ranks, and a witnessing strategy.
#[derive(Debug, Clone)]
pub struct WinningReport {
    pub winning: Vec<bool>,
    /// Least fixpoints record the iteration at which a state entered the
    /// winning set; greatest fixpoints report rank 0 throughout.
    pub rank: Vec<u32>,
    pub strategy: Strategy,
    pub iterations: usize,
}

impl WinningReport {
    pub fn winning_states(&self) -> Vec<usize> {
        self.winning.iter().enumerate().filter(|(_, w)| **w).map(|(i, _)| i).collect()
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("state,winning,rank,labels\n");
        for q in 0..self.winning.len() {
            let labels = if self.winning[q] {
                self.strategy
                    .choose(self.strategy.initial_memory, q)
                    .iter()
                    .map(|a| a.to_string())
                    .collect::<Vec<_>>()
                    .join(" ")
            } else {
                String::new()
            };
            out.push_str(&format!("{q},{},{},{labels}\n", self.winning[q] as u8, self.rank[q]));
        }
        out
    }
}

/// Sound fixpoint synthesis over the flat fragment. Every outcome of the
/// returned strategy from a winning state satisfies the formula under the
/// discrete semantics; disjunctions are handled disjunct-by-disjunct, which
/// is sound but not complete.
pub fn synthesize(t: &AltSystem, spec: &Formula) -> Result<WinningReport> {
    let mut parts = Vec::new();
    flatten_spec(spec, &mut parts)?;

    let nq = t.n_states();
    let mut winning = vec![false; nq];
    let mut rank = vec![0u32; nq];
    let mut choices: Vec<Vec<u32>> = vec![Vec::new(); nq];
    let mut iterations = 0usize;

    for part in &parts {
        let (w_part, r_part, c_part, it) = match part {
            FlatSpec::State(beta) => synth_state(t, beta),
            FlatSpec::Until(b1, b2) => synth_until(t, b1, b2),
            FlatSpec::Release(b1, b2) => synth_release(t, b1, b2),
        };
        iterations = iterations.max(it);
        for q in 0..nq {
            if w_part[q] && !winning[q] {
                winning[q] = true;
                rank[q] = r_part[q];
                choices[q] = c_part[q].clone();
            }
        }
    }
    let n_controls = t.n_controls();
    Ok(WinningReport {
        winning,
        rank,
        strategy: Strategy::memoryless(choices, n_controls),
        iterations,
    })
}

type SynthOut = (Vec<bool>, Vec<u32>, Vec<Vec<u32>>, usize);

fn sat_states(t: &AltSystem, beta: &Formula) -> Vec<bool> {
    t.states.iter().map(|x| eval_state_formula(beta, x)).collect()
}

fn all_available(t: &AltSystem, q: usize) -> Vec<u32> {
    let avail: Vec<u32> = t.available_controls(q).iter().map(|&a| a as u32).collect();
    if avail.is_empty() {
        // fully truncated state: keep the choice set nonempty; runs that
        // enter a blocked triple surface as runtime diagnostics instead
        (0..t.n_controls() as u32).collect()
    } else {
        avail
    }
}

/// A state formula wins exactly on the states satisfying it; any playable
/// label may follow.
fn synth_state(t: &AltSystem, beta: &Formula) -> SynthOut {
    let w = sat_states(t, beta);
    let nq = t.n_states();
    let mut choices = vec![Vec::new(); nq];
    for q in 0..nq {
        if w[q] {
            choices[q] = all_available(t, q);
        }
    }
    (w, vec![0; nq], choices, 0)
}

/// Least fixpoint W = [b2] | ([b1] & cpre(W)), with entry ranks.
fn synth_until(t: &AltSystem, b1: &Formula, b2: &Formula) -> SynthOut {
    let nq = t.n_states();
    let s1 = sat_states(t, b1);
    let s2 = sat_states(t, b2);
    let mut w = vec![false; nq];
    let mut rank = vec![0u32; nq];
    let mut choices: Vec<Vec<u32>> = vec![Vec::new(); nq];

    for q in 0..nq {
        if s2[q] {
            w[q] = true;
            choices[q] = all_available(t, q);
        }
    }
    let mut iter = 0u32;
    loop {
        iter += 1;
        let pre = cpre(t, &w);
        let mut changed = false;
        for q in 0..nq {
            if !w[q] && s1[q] && pre[q] {
                w[q] = true;
                rank[q] = iter;
                changed = true;
            }
        }
        if !changed {
            break;
        }
        if iter as usize > nq + 1 {
            break;
        }
    }
    // choice sets: every label whose disturbed successors all carry a
    // strictly smaller rank inside W
    for q in 0..nq {
        if w[q] && choices[q].is_empty() {
            for a in 0..t.n_controls() {
                let good = (0..t.n_disturbances()).all(|b| {
                    let succ = t.successors(q, a, b);
                    !succ.is_empty()
                        && succ.iter().all(|&q2| {
                            w[q2 as usize] && rank[q2 as usize] < rank[q]
                        })
                });
                if good {
                    choices[q].push(a as u32);
                }
            }
            debug_assert!(!choices[q].is_empty(), "winning until-state without witness");
        }
    }
    (w, rank, choices, iter as usize)
}

/// Greatest fixpoint W = [b2] & ([b1] | cpre(W)).
fn synth_release(t: &AltSystem, b1: &Formula, b2: &Formula) -> SynthOut {
    let nq = t.n_states();
    let s1 = sat_states(t, b1);
    let s2 = sat_states(t, b2);
    let mut w: Vec<bool> = s2.clone();
    let mut iter = 0usize;
    loop {
        iter += 1;
        let pre = cpre(t, &w);
        let mut changed = false;
        for q in 0..nq {
            if w[q] && !(s2[q] && (s1[q] || pre[q])) {
                w[q] = false;
                changed = true;
            }
        }
        if !changed {
            break;
        }
        if iter > nq + 1 {
            break;
        }
    }
    let pre = cpre(t, &w);
    let mut choices: Vec<Vec<u32>> = vec![Vec::new(); nq];
    for q in 0..nq {
        if !w[q] {
            continue;
        }
        if s1[q] {
            // released: anything playable keeps the formula satisfied
            choices[q] = all_available(t, q);
        } else {
            debug_assert!(pre[q]);
            for a in 0..t.n_controls() {
                let good = (0..t.n_disturbances()).all(|b| {
                    let succ = t.successors(q, a, b);
                    !succ.is_empty() && succ.iter().all(|&q2| w[q2 as usize])
                });
                if good {
                    choices[q].push(a as u32);
                }
            }
        }
        debug_assert!(!choices[q].is_empty(), "winning release-state without witness");
    }
    (w, vec![0; nq], choices, iter)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::logic::Atom;

    fn atom_lt(thresh: f64) -> Formula {
        // x < thresh
        Formula::Atom(Atom::new("p", vec![1.0], -thresh).unwrap())
    }

    fn atom_gt(thresh: f64) -> Formula {
        // x > thresh
        Formula::Atom(Atom::new("q", vec![-1.0], thresh).unwrap())
    }

    /// q1 -a,b1-> q2, q1 -a,b2-> q1; q2 -a,b*-> q2
    fn two_state_game() -> AltSystem {
        let mut t = AltSystem::new(
            vec![vec![0.0], vec![1.0]],
            vec![vec![0.0]],
            vec![vec![0.0], vec![1.0]],
        )
        .unwrap();
        t.add_transition(0, 0, 0, 1);
        t.add_transition(0, 0, 1, 0);
        t.add_transition(1, 0, 0, 1);
        t.add_transition(1, 0, 1, 1);
        t
    }

    #[test]
    fn cpre_enumerated_example() {
        let t = two_state_game();
        // cpre({q2}): q2 stays, q1 can be bounced back by b2
        let s = vec![false, true];
        assert_eq!(cpre(&t, &s), vec![false, true]);
        // non-blocking: cpre(Q) = Q
        assert_eq!(cpre(&t, &vec![true, true]), vec![true, true]);
        assert_eq!(cpre(&t, &vec![false, false]), vec![false, false]);
    }

    #[test]
    fn cpre_monotone() {
        let t = two_state_game();
        let small = vec![false, true];
        let big = vec![true, true];
        let ps = cpre(&t, &small);
        let pb = cpre(&t, &big);
        for q in 0..2 {
            assert!(!ps[q] || pb[q]);
        }
    }

    #[test]
    fn single_state_formula_wins_everywhere_it_holds() {
        let mut t = AltSystem::new(vec![vec![-1.0]], vec![vec![0.0]], vec![vec![0.0]]).unwrap();
        t.add_transition(0, 0, 0, 0);
        let rep = synthesize(&t, &atom_lt(0.0)).unwrap();
        assert_eq!(rep.winning, vec![true]);
        assert_eq!(rep.strategy.choose(0, 0), vec![0]);
    }

    #[test]
    fn until_chain_hand_fixpoint() {
        // q0 (obs -1) --only label--> q1 (obs 1) under every disturbance;
        // q1 self-loops. spec: (x<0.5) U (x>0.5)
        let mut t = AltSystem::new(
            vec![vec![-1.0], vec![1.0]],
            vec![vec![0.0]],
            vec![vec![0.0]],
        )
        .unwrap();
        t.add_transition(0, 0, 0, 1);
        t.add_transition(1, 0, 0, 1);
        let spec = Formula::until(atom_lt(0.5), atom_gt(0.5));
        let rep = synthesize(&t, &spec).unwrap();
        assert_eq!(rep.winning, vec![true, true]);
        assert_eq!(rep.rank, vec![1, 0]);
    }

    #[test]
    fn release_safety_on_two_state_game() {
        // stay in x < 0.5 forever: q1 (obs 0) can be held there only if all
        // disturbed successors stay; b1 bounces to q2 (obs 1) which violates
        let t = two_state_game();
        let spec = Formula::release(atom_gt(10.0), atom_lt(0.5));
        let rep = synthesize(&t, &spec).unwrap();
        assert_eq!(rep.winning, vec![false, false]);

        // the mirrored game where q0 self-loops under both disturbances
        let mut safe = AltSystem::new(
            vec![vec![0.0], vec![1.0]],
            vec![vec![0.0]],
            vec![vec![0.0], vec![1.0]],
        )
        .unwrap();
        safe.add_transition(0, 0, 0, 0);
        safe.add_transition(0, 0, 1, 0);
        safe.add_transition(1, 0, 0, 1);
        safe.add_transition(1, 0, 1, 1);
        let rep = synthesize(&safe, &spec).unwrap();
        assert_eq!(rep.winning, vec![true, false]);
    }

    #[test]
    fn nested_temporal_rejected() {
        let t = two_state_game();
        let nested = Formula::until(Formula::until(atom_lt(0.0), atom_gt(0.0)), atom_gt(0.0));
        assert!(matches!(synthesize(&t, &nested), Err(Error::Fragment(_))));
    }
}
