//! Alternating approximate bisimulation: the greatest-fixpoint relation
//! checker, strategy transfer along a relation, and the sampled one-step
//! certificate check against the concrete plant.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::abstraction::Abstraction;
use crate::error::{Error, Result};
use crate::game::{AltSystem, Strategy};
use crate::numerics::dist;
use crate::plant::{InputSignal, LinearSystem, Stepper};
use crate::runtime::realize_label;

/// Largest alternating eps-approximate bisimulation relation between two
/// systems, as sorted index pairs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BisimRelation {
    pub eps: f64,
    pub pairs: Vec<(u32, u32)>,
    /// Relation covers every state on both sides.
    pub total: bool,
}

impl BisimRelation {
    pub fn contains(&self, q1: usize, q2: usize) -> bool {
        self.pairs.binary_search(&(q1 as u32, q2 as u32)).is_ok()
    }
}

/// Condition (ii)/(iii) transfer check for one pair under the current
/// relation. `fwd` checks direction (ii): every control label of side 1 has
/// an answer on side 2 whose disturbed successors can all be matched back.
fn transfer_ok(
    t1: &AltSystem,
    t2: &AltSystem,
    q1: usize,
    q2: usize,
    rel: &dyn Fn(usize, usize) -> bool,
) -> bool {
    (0..t1.n_controls()).all(|a1| {
        (0..t2.n_controls()).any(|a2| {
            (0..t2.n_disturbances()).all(|b2| {
                t2.successors(q2, a2, b2).iter().all(|&q2n| {
                    (0..t1.n_disturbances()).any(|b1| {
                        t1.successors(q1, a1, b1)
                            .iter()
                            .any(|&q1n| rel(q1n as usize, q2n as usize))
                    })
                })
            })
        })
    })
}

/// Greatest fixpoint computation of the alternating eps-approximate
/// bisimulation relation: start from all observation-close pairs, then
/// delete pairs violating either transfer condition until stable.
pub fn check_bisim(t1: &AltSystem, t2: &AltSystem, eps: f64) -> Result<BisimRelation> {
    if eps < 0.0 {
        return Err(Error::Invalid("precision must be nonnegative".into()));
    }
    if t1.states[0].len() != t2.states[0].len() {
        return Err(Error::Dimension("observation spaces differ".into()));
    }
    let n1 = t1.n_states();
    let n2 = t2.n_states();
    let mut rel = vec![false; n1 * n2];
    for q1 in 0..n1 {
        for q2 in 0..n2 {
            rel[q1 * n2 + q2] = dist(&t1.states[q1], &t2.states[q2]) <= eps + 1e-12;
        }
    }
    loop {
        let mut changed = false;
        for q1 in 0..n1 {
            for q2 in 0..n2 {
                if !rel[q1 * n2 + q2] {
                    continue;
                }
                let lookup = |a: usize, b: usize| rel[a * n2 + b];
                let ok_fwd = transfer_ok(t1, t2, q1, q2, &lookup);
                let swapped = |b: usize, a: usize| rel[a * n2 + b];
                let ok_bwd = transfer_ok(t2, t1, q2, q1, &swapped);
                if !(ok_fwd && ok_bwd) {
                    rel[q1 * n2 + q2] = false;
                    changed = true;
                }
            }
        }
        if !changed {
            break;
        }
    }
    let mut pairs = Vec::new();
    let mut left = vec![false; n1];
    let mut right = vec![false; n2];
    for q1 in 0..n1 {
        for q2 in 0..n2 {
            if rel[q1 * n2 + q2] {
                pairs.push((q1 as u32, q2 as u32));
                left[q1] = true;
                right[q2] = true;
            }
        }
    }
    let total = left.iter().all(|&x| x) && right.iter().all(|&x| x);
    Ok(BisimRelation { eps, pairs, total })
}

/// Transfer a strategy of `t1` to `t2` along an alternating bisimulation
/// relation containing (q1, q2). The produced strategy's memory tracks the
/// set of (t1 state, t1 memory) endpoints of matched runs; every outcome of
/// the result is pointwise related to some outcome of `f`.
pub fn transfer_strategy(
    t1: &AltSystem,
    t2: &AltSystem,
    rel: &BisimRelation,
    q1: usize,
    q2: usize,
    f: &Strategy,
) -> Result<Strategy> {
    if !rel.contains(q1, q2) {
        return Err(Error::Invalid(format!("states ({q1}, {q2}) are not related")));
    }

    type MatchSet = Vec<(u32, u32)>; // sorted (t1 state, t1 memory) pairs
    let m1_init = f.update(f.initial_memory, q1) as u32;
    let init: MatchSet = vec![(q1 as u32, m1_init)];

    let mut memories: Vec<MatchSet> = vec![init.clone()];
    let mut intern: BTreeMap<MatchSet, u32> = BTreeMap::new();
    intern.insert(init, 0);

    let mut updates: BTreeMap<(u32, u32), u32> = BTreeMap::new();
    let mut choices: BTreeMap<(u32, u32), Vec<u32>> = BTreeMap::new();

    // frontier of reachable (memory id, t2 state)
    let mut frontier: Vec<(u32, u32)> = vec![(0, q2 as u32)];
    let mut seen: BTreeMap<(u32, u32), ()> = BTreeMap::new();
    seen.insert((0, q2 as u32), ());

    while let Some((mid, q2cur)) = frontier.pop() {
        let mset = memories[mid as usize].clone();
        // valid control answers on t2: some matched endpoint and one of its
        // strategy choices force every disturbed t2 successor to be matched
        let mut valid: Vec<u32> = Vec::new();
        for a2 in 0..t2.n_controls() {
            let ok = mset.iter().any(|&(p1, m1)| {
                f.choose(m1 as usize, p1 as usize).iter().any(|&a1| {
                    (0..t2.n_disturbances()).all(|b2| {
                        t2.successors(q2cur as usize, a2, b2).iter().all(|&q2n| {
                            (0..t1.n_disturbances()).any(|b1| {
                                t1.successors(p1 as usize, a1 as usize, b1)
                                    .iter()
                                    .any(|&q1n| rel.contains(q1n as usize, q2n as usize))
                            })
                        })
                    })
                })
            });
            if ok {
                valid.push(a2 as u32);
            }
        }
        if valid.is_empty() {
            return Err(Error::Invalid(format!(
                "transfer lost all matches at t2 state {q2cur}; relation is not a bisimulation"
            )));
        }
        choices.insert((mid, q2cur), valid.clone());

        // memory update on each observable t2 successor
        for &a2 in &valid {
            for b2 in 0..t2.n_disturbances() {
                for &q2n in t2.successors(q2cur as usize, a2 as usize, b2) {
                    let mut next: MatchSet = Vec::new();
                    for &(p1, m1) in &mset {
                        for &a1 in &f.choose(m1 as usize, p1 as usize) {
                            for b1 in 0..t1.n_disturbances() {
                                for &q1n in t1.successors(p1 as usize, a1 as usize, b1) {
                                    if rel.contains(q1n as usize, q2n as usize) {
                                        let m1n = f.update(m1 as usize, q1n as usize) as u32;
                                        if let Err(pos) = next.binary_search(&(q1n, m1n)) {
                                            next.insert(pos, (q1n, m1n));
                                        }
                                    }
                                }
                            }
                        }
                    }
                    if next.is_empty() {
                        continue; // a2 already guarantees a match exists
                    }
                    let nid = *intern.entry(next.clone()).or_insert_with(|| {
                        memories.push(next.clone());
                        (memories.len() - 1) as u32
                    });
                    updates.insert((mid, q2n), nid);
                    if seen.insert((nid, q2n), ()).is_none() {
                        frontier.push((nid, q2n));
                    }
                }
            }
        }
    }

    Ok(Strategy {
        memory_count: memories.len(),
        initial_memory: 0,
        updates,
        choices,
        n_controls: t2.n_controls(),
    })
}

/// Worst margins of the sampled one-step bisimulation certificate.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct OneStepReport {
    pub pairs_checked: usize,
    /// eps minus the achieved successor distance, minimized over all checks
    /// where the abstraction label leads (condition (ii) direction).
    pub min_margin_label_side: f64,
    /// Same for sampled plant inputs leading (condition (iii) direction).
    pub min_margin_input_side: f64,
    pub label_match_worst: f64,
    pub all_nonnegative: bool,
}

/// Sampled one-step check that observation-close pairs (q, x) transfer both
/// ways: every abstraction control label has a concrete input realization
/// whose disturbed successors stay eps-matched, and every sampled concrete
/// input has an abstraction label doing the same. Report-only.
pub fn one_step_check(
    abs: &Abstraction,
    sys: &LinearSystem,
    eps: f64,
    n_pairs: usize,
    n_substeps: usize,
    seed: u64,
) -> Result<OneStepReport> {
    let t = &abs.system;
    let tau = abs.params.tau;
    let mu = abs.params.mu;
    let stepper = Stepper::new(sys, tau, n_substeps)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let dim = sys.dim();

    // realize every control label once
    let mut realized = Vec::with_capacity(t.n_controls());
    for a in &t.control_labels {
        realized.push(realize_label(sys, tau, a, n_substeps, mu)?);
    }

    // disturbance witnesses: the vertices of V held constant, plus zero
    let mut v_signals: Vec<InputSignal> = sys
        .v_space
        .vertices()
        .iter()
        .map(|w| InputSignal::constant(tau, w.clone(), n_substeps))
        .collect::<Result<_>>()?;
    if sys.v_space.contains(&vec![0.0; sys.g.cols()]) {
        v_signals.push(InputSignal::zero(tau, sys.g.cols(), n_substeps)?);
    }
    let zero_u = InputSignal::zero(tau, sys.b.cols(), n_substeps)?;

    // response of each disturbance witness from the origin, and its label
    let mut matched_b = Vec::with_capacity(v_signals.len());
    let mut label_match_worst: f64 = 0.0;
    for v in &v_signals {
        let r_v = stepper.step(&vec![0.0; dim], &zero_u, v)?;
        let (b_idx, d) = nearest(&t.disturbance_labels, &r_v);
        label_match_worst = label_match_worst.max(d);
        matched_b.push(b_idx);
    }

    let phi = sys.a.exp(tau)?;
    let mut min_fwd = f64::INFINITY;
    let mut min_bwd = f64::INFINITY;

    for _ in 0..n_pairs {
        // sample q from the grid and x in the eps-ball around it inside X
        let q_idx = rng.gen_range(0..t.n_states());
        let q = t.states[q_idx].clone();
        let mut x = q.clone();
        for _ in 0..64 {
            x = q
                .iter()
                .map(|&c| c + rng.gen_range(-eps..=eps))
                .collect();
            if sys.x_space.contains(&x) {
                break;
            }
            x = q.clone();
        }

        // abstraction-label side: each label a, realized input, sampled v
        for (a_idx, a) in t.control_labels.iter().enumerate() {
            let u = &realized[a_idx].signal;
            for (vi, v) in v_signals.iter().enumerate() {
                let x_next = stepper.step(&x, u, v)?;
                let b_idx = matched_b[vi];
                let target: Vec<f64> = phi
                    .mul_vec(&q)
                    .iter()
                    .zip(a.iter().zip(&t.disturbance_labels[b_idx]))
                    .map(|(d, (av, bv))| d + av + bv)
                    .collect();
                let (q_next, grid_d) = nearest(&t.states, &target);
                if grid_d > abs.params.eta / 2.0 + 1e-9 {
                    min_fwd = min_fwd.min(-grid_d);
                    continue;
                }
                min_fwd = min_fwd.min(eps - dist(&t.states[q_next], &x_next));
            }
        }

        // sampled-input side: random piecewise-constant inputs over U
        for _ in 0..3 {
            let u_vals: Vec<Vec<f64>> = (0..n_substeps)
                .map(|_| {
                    let verts = sys.u_space.vertices();
                    verts[rng.gen_range(0..verts.len())].clone()
                })
                .collect();
            let u = InputSignal::new(tau, u_vals)?;
            let r_u = stepper.step(&vec![0.0; dim], &u, &InputSignal::zero(tau, sys.g.cols(), n_substeps)?)?;
            let (a_idx, d_a) = nearest(&t.control_labels, &r_u);
            label_match_worst = label_match_worst.max(d_a);
            for (vi, v) in v_signals.iter().enumerate() {
                let x_next = stepper.step(&x, &u, v)?;
                let b_idx = matched_b[vi];
                let target: Vec<f64> = phi
                    .mul_vec(&q)
                    .iter()
                    .zip(t.control_labels[a_idx].iter().zip(&t.disturbance_labels[b_idx]))
                    .map(|(dv, (av, bv))| dv + av + bv)
                    .collect();
                let (q_next, grid_d) = nearest(&t.states, &target);
                if grid_d > abs.params.eta / 2.0 + 1e-9 {
                    min_bwd = min_bwd.min(-grid_d);
                    continue;
                }
                min_bwd = min_bwd.min(eps - dist(&t.states[q_next], &x_next));
            }
        }
    }

    Ok(OneStepReport {
        pairs_checked: n_pairs,
        min_margin_label_side: min_fwd,
        min_margin_input_side: min_bwd,
        label_match_worst,
        all_nonnegative: min_fwd >= 0.0 && min_bwd >= 0.0,
    })
}

fn nearest(points: &[Vec<f64>], x: &[f64]) -> (usize, f64) {
    let mut best = 0usize;
    let mut best_d = f64::INFINITY;
    for (i, p) in points.iter().enumerate() {
        let d = dist(p, x);
        if d < best_d {
            best_d = d;
            best = i;
        }
    }
    (best, best_d)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn chain(obs: &[f64]) -> AltSystem {
        let mut t = AltSystem::new(
            obs.iter().map(|&o| vec![o]).collect(),
            vec![vec![0.0]],
            vec![vec![0.0]],
        )
        .unwrap();
        let n = obs.len();
        for q in 0..n {
            t.add_transition(q, 0, 0, (q + 1).min(n - 1));
        }
        t
    }

    #[test]
    fn identical_systems_bisimilar_at_zero() {
        let t = chain(&[0.0, 1.0, 2.0]);
        let rel = check_bisim(&t, &t, 0.0).unwrap();
        assert!(rel.total);
        for q in 0..3 {
            assert!(rel.contains(q, q));
        }
    }

    #[test]
    fn distant_observations_empty_relation() {
        let t1 = chain(&[0.0, 0.5]);
        let t2 = chain(&[10.0, 10.5]);
        let rel = check_bisim(&t1, &t2, 1.0).unwrap();
        assert!(rel.pairs.is_empty());
        assert!(!rel.total);
    }

    #[test]
    fn disturbance_mismatch_deletes_pair_in_one_round() {
        // t1: from s0 disturbances reach {0} or {1}; t2: reaches {0} or {5}.
        // (s0, s0) passes condition (i) but the {5}-successor cannot be
        // matched back within eps, so the pair dies in the first round.
        let mk = |far: f64| {
            let mut t = AltSystem::new(
                vec![vec![0.0], vec![1.0], vec![far]],
                vec![vec![0.0]],
                vec![vec![0.0], vec![1.0]],
            )
            .unwrap();
            t.add_transition(0, 0, 0, 1);
            t.add_transition(0, 0, 1, 2);
            for q in 1..3 {
                t.add_transition(q, 0, 0, q);
                t.add_transition(q, 0, 1, q);
            }
            t
        };
        let t1 = mk(1.0);
        let t2 = mk(5.0);
        let rel = check_bisim(&t1, &t2, 0.5).unwrap();
        assert!(!rel.contains(0, 0));
    }

    #[test]
    fn relation_shape_is_transpose_symmetric() {
        let t1 = chain(&[0.0, 1.0, 1.5]);
        let t2 = chain(&[0.1, 0.9, 1.6]);
        let r12 = check_bisim(&t1, &t2, 0.3).unwrap();
        let r21 = check_bisim(&t2, &t1, 0.3).unwrap();
        let mut transposed: Vec<(u32, u32)> = r21.pairs.iter().map(|&(a, b)| (b, a)).collect();
        transposed.sort();
        assert_eq!(r12.pairs, transposed);
    }

    #[test]
    fn transfer_identity_preserves_choices() {
        let t = chain(&[0.0, 1.0, 2.0]);
        let rel = check_bisim(&t, &t, 0.0).unwrap();
        let f = Strategy::memoryless(vec![vec![0], vec![0], vec![0]], 1);
        let f2 = transfer_strategy(&t, &t, &rel, 0, 0, &f).unwrap();
        assert_eq!(f2.choose(f2.initial_memory, 0), vec![0]);
    }

    #[test]
    fn transfer_requires_related_pair() {
        let t1 = chain(&[0.0, 1.0]);
        let t2 = chain(&[9.0, 10.0]);
        let rel = check_bisim(&t1, &t2, 0.1).unwrap();
        let f = Strategy::memoryless(vec![vec![0], vec![0]], 1);
        assert!(transfer_strategy(&t1, &t2, &rel, 0, 0, &f).is_err());
    }
}
