//! Discrete semantics. Lasso words get exact fixpoint evaluation; plain
//! finite prefixes get a three-valued verdict that is conservative about the
//! unknown suffix.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::logic::{Atom, Formula};
use crate::numerics::Vector;

/// Eventually periodic infinite word over states, as prefix + cycle.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LassoWord {
    pub prefix: Vec<Vector>,
    pub cycle: Vec<Vector>,
}

impl LassoWord {
    pub fn new(prefix: Vec<Vector>, cycle: Vec<Vector>) -> Result<LassoWord> {
        if cycle.is_empty() {
            return Err(Error::Invalid("lasso cycle must be nonempty".into()));
        }
        Ok(LassoWord { prefix, cycle })
    }

    /// State at 1-based position i.
    pub fn state(&self, i: usize) -> &Vector {
        debug_assert!(i >= 1);
        let idx = i - 1;
        if idx < self.prefix.len() {
            &self.prefix[idx]
        } else {
            &self.cycle[(idx - self.prefix.len()) % self.cycle.len()]
        }
    }
}

/// Exact evaluation over an abstract lasso structure: `n_prefix` transient
/// positions followed by a cycle of `n_cycle` positions. `sat` answers
/// whether the atom holds at a 0-based position < n_prefix + n_cycle.
///
/// Until is a least fixpoint and release a greatest fixpoint on the cycle;
/// two reverse sweeps settle either one because a witness (or violation)
/// wraps the cycle at most once.
pub fn eval_lasso_fn(
    n_prefix: usize,
    n_cycle: usize,
    sat: &dyn Fn(usize, &Atom) -> bool,
    formula: &Formula,
    position: usize,
) -> Result<bool> {
    if position == 0 {
        return Err(Error::Invalid("word positions are 1-based".into()));
    }
    if n_cycle == 0 {
        return Err(Error::Invalid("lasso cycle must be nonempty".into()));
    }
    let n = n_prefix + n_cycle;
    let table = eval_vector(n_prefix, n_cycle, sat, formula);
    let idx = position - 1;
    let canon = if idx < n { idx } else { n_prefix + (idx - n_prefix) % n_cycle };
    Ok(table[canon])
}

fn eval_vector(
    n_prefix: usize,
    n_cycle: usize,
    sat: &dyn Fn(usize, &Atom) -> bool,
    formula: &Formula,
) -> Vec<bool> {
    let n = n_prefix + n_cycle;
    let succ = |j: usize| if j + 1 < n { j + 1 } else { n_prefix };
    match formula {
        Formula::Atom(a) => (0..n).map(|j| sat(j, a)).collect(),
        Formula::And(l, r) => {
            let a = eval_vector(n_prefix, n_cycle, sat, l);
            let b = eval_vector(n_prefix, n_cycle, sat, r);
            a.iter().zip(&b).map(|(x, y)| *x && *y).collect()
        }
        Formula::Or(l, r) => {
            let a = eval_vector(n_prefix, n_cycle, sat, l);
            let b = eval_vector(n_prefix, n_cycle, sat, r);
            a.iter().zip(&b).map(|(x, y)| *x || *y).collect()
        }
        Formula::Until(l, r) => {
            let a = eval_vector(n_prefix, n_cycle, sat, l);
            let b = eval_vector(n_prefix, n_cycle, sat, r);
            let mut x = vec![false; n];
            for _ in 0..2 {
                for j in (n_prefix..n).rev() {
                    x[j] = b[j] || (a[j] && x[succ(j)]);
                }
            }
            for j in (0..n_prefix).rev() {
                x[j] = b[j] || (a[j] && x[j + 1]);
            }
            x
        }
        Formula::Release(l, r) => {
            let a = eval_vector(n_prefix, n_cycle, sat, l);
            let b = eval_vector(n_prefix, n_cycle, sat, r);
            let mut x = vec![true; n];
            for _ in 0..2 {
                for j in (n_prefix..n).rev() {
                    x[j] = b[j] && (a[j] || x[succ(j)]);
                }
            }
            for j in (0..n_prefix).rev() {
                x[j] = b[j] && (a[j] || x[j + 1]);
            }
            x
        }
    }
}

/// Satisfaction of `formula` at 1-based `position` of the lasso word.
pub fn eval_discrete(word: &LassoWord, position: usize, formula: &Formula) -> Result<bool> {
    let sat = |j: usize, a: &Atom| -> bool {
        let s = word.state(j + 1);
        a.sat(s)
    };
    eval_lasso_fn(word.prefix.len(), word.cycle.len(), &sat, formula, position)
}

/// Three-valued verdict: Some(true)/Some(false) only when every infinite
/// completion of the observed prefix agrees.
pub type Verdict = Option<bool>;

#[derive(Clone, Copy, PartialEq, Debug)]
enum V3 {
    T,
    F,
    U,
}

impl V3 {
    fn and(self, other: V3) -> V3 {
        match (self, other) {
            (V3::F, _) | (_, V3::F) => V3::F,
            (V3::T, V3::T) => V3::T,
            _ => V3::U,
        }
    }
    fn or(self, other: V3) -> V3 {
        match (self, other) {
            (V3::T, _) | (_, V3::T) => V3::T,
            (V3::F, V3::F) => V3::F,
            _ => V3::U,
        }
    }
    fn to_verdict(self) -> Verdict {
        match self {
            V3::T => Some(true),
            V3::F => Some(false),
            V3::U => None,
        }
    }
}

/// Evaluate on the finite prefix of length `n` with an unknown suffix,
/// using Kleene logic. `sat` answers atoms at 0-based positions.
pub fn eval_prefix_fn(
    n: usize,
    sat: &dyn Fn(usize, &Atom) -> bool,
    formula: &Formula,
    position: usize,
) -> Result<Verdict> {
    if position == 0 {
        return Err(Error::Invalid("word positions are 1-based".into()));
    }
    if position > n {
        return Ok(None);
    }
    Ok(eval3_vector(n, sat, formula)[position - 1].to_verdict())
}

fn eval3_vector(n: usize, sat: &dyn Fn(usize, &Atom) -> bool, formula: &Formula) -> Vec<V3> {
    match formula {
        Formula::Atom(a) => (0..n).map(|j| if sat(j, a) { V3::T } else { V3::F }).collect(),
        Formula::And(l, r) => {
            let a = eval3_vector(n, sat, l);
            let b = eval3_vector(n, sat, r);
            a.iter().zip(&b).map(|(x, y)| x.and(*y)).collect()
        }
        Formula::Or(l, r) => {
            let a = eval3_vector(n, sat, l);
            let b = eval3_vector(n, sat, r);
            a.iter().zip(&b).map(|(x, y)| x.or(*y)).collect()
        }
        Formula::Until(l, r) => {
            let a = eval3_vector(n, sat, l);
            let b = eval3_vector(n, sat, r);
            // unknown tail: a witness may still appear later
            let mut x = vec![V3::U; n + 1];
            x[n] = V3::U;
            for j in (0..n).rev() {
                x[j] = b[j].or(a[j].and(x[j + 1]));
            }
            x.truncate(n);
            x
        }
        Formula::Release(l, r) => {
            let a = eval3_vector(n, sat, l);
            let b = eval3_vector(n, sat, r);
            let mut x = vec![V3::U; n + 1];
            x[n] = V3::U;
            for j in (0..n).rev() {
                x[j] = b[j].and(a[j].or(x[j + 1]));
            }
            x.truncate(n);
            x
        }
    }
}

/// Three-valued evaluation of a state sequence at position 1.
pub fn eval_prefix(states: &[Vector], formula: &Formula) -> Result<Verdict> {
    if states.is_empty() {
        return Ok(None);
    }
    let sat = |j: usize, a: &Atom| a.sat(&states[j]);
    eval_prefix_fn(states.len(), &sat, formula, 1)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::logic::parser::{parse, PropositionTable};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn props_1d() -> PropositionTable {
        let mut t = PropositionTable::new();
        t.bind("p", vec![1.0], 0.0).unwrap(); // x < 0
        t.bind("q", vec![-1.0], 0.0).unwrap(); // x > 0
        t
    }

    #[test]
    fn atom_on_constant_word() {
        let word = LassoWord::new(vec![], vec![vec![-1.0]]).unwrap();
        let f = parse("p", &props_1d()).unwrap();
        assert!(eval_discrete(&word, 1, &f).unwrap());
    }

    #[test]
    fn until_with_witness_at_second_position() {
        // x_p in p only, then x_q in q only forever
        let word = LassoWord::new(vec![vec![-1.0]], vec![vec![1.0]]).unwrap();
        let f = parse("p U q", &props_1d()).unwrap();
        assert!(eval_discrete(&word, 1, &f).unwrap());
    }

    /// Brute-force oracle: literal quantifier expansion with a generous
    /// stabilization window (prefix + several cycles), recursing through the
    /// definition clause by clause.
    fn oracle(word: &LassoWord, i: usize, f: &Formula) -> bool {
        let horizon = word.prefix.len() + 3 * word.cycle.len() + i;
        match f {
            Formula::Atom(a) => a.sat(word.state(i)),
            Formula::And(l, r) => oracle(word, i, l) && oracle(word, i, r),
            Formula::Or(l, r) => oracle(word, i, l) || oracle(word, i, r),
            Formula::Until(l, r) => (i..=horizon).any(|j| {
                oracle(word, j, r) && (i..j).all(|k| oracle(word, k, l))
            }),
            Formula::Release(l, r) => (i..=horizon).all(|j| {
                oracle(word, j, r) || (i..j).any(|k| oracle(word, k, l))
            }),
        }
    }

    fn random_formula(rng: &mut ChaCha8Rng, depth: usize) -> Formula {
        let atom = |rng: &mut ChaCha8Rng| {
            let mut a = Atom::new("r", vec![rng.gen_range(-1.0..1.0f64)], rng.gen_range(-0.5..0.5)).unwrap();
            if a.c[0] == 0.0 {
                a.c[0] = 1.0;
            }
            a.negated = rng.gen_bool(0.5);
            Formula::Atom(a)
        };
        if depth == 0 || rng.gen_bool(0.3) {
            return atom(rng);
        }
        let l = random_formula(rng, depth - 1);
        let r = random_formula(rng, depth - 1);
        match rng.gen_range(0..4) {
            0 => Formula::and(l, r),
            1 => Formula::or(l, r),
            2 => Formula::until(l, r),
            _ => Formula::release(l, r),
        }
    }

    #[test]
    fn lasso_eval_matches_unrolling_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        for _ in 0..300 {
            let np = rng.gen_range(0..4);
            let nc = rng.gen_range(1..4);
            let prefix: Vec<Vector> = (0..np).map(|_| vec![rng.gen_range(-1.0..1.0)]).collect();
            let cycle: Vec<Vector> = (0..nc).map(|_| vec![rng.gen_range(-1.0..1.0)]).collect();
            let word = LassoWord::new(prefix, cycle).unwrap();
            let f = random_formula(&mut rng, 3);
            for i in 1..=(np + nc + 1) {
                assert_eq!(
                    eval_discrete(&word, i, &f).unwrap(),
                    oracle(&word, i, &f),
                    "mismatch at position {i} for {f}"
                );
            }
        }
    }

    #[test]
    fn prefix_eval_is_sound_for_all_completions() {
        // Conclusive prefix verdicts must agree with every lasso completion.
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        for _ in 0..200 {
            let n = rng.gen_range(1..5);
            let states: Vec<Vector> = (0..n).map(|_| vec![rng.gen_range(-1.0..1.0)]).collect();
            let f = random_formula(&mut rng, 2);
            let verdict = eval_prefix(&states, &f).unwrap();
            if let Some(v) = verdict {
                for _ in 0..10 {
                    let extra: Vec<Vector> =
                        (0..rng.gen_range(1..4)).map(|_| vec![rng.gen_range(-1.0..1.0)]).collect();
                    let word = LassoWord::new(states.clone(), extra).unwrap();
                    assert_eq!(eval_discrete(&word, 1, &f).unwrap(), v, "completion flipped verdict of {f}");
                }
            }
        }
    }

    #[test]
    fn until_unwitnessed_is_inconclusive() {
        let f = parse("p U q", &props_1d()).unwrap();
        let states = vec![vec![-1.0], vec![-1.0]];
        assert_eq!(eval_prefix(&states, &f).unwrap(), None);
    }
}
