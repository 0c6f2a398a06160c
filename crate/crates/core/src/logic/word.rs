//! From dense trajectories to words: tipping-point location, the cell
//! decomposition around boundary crossings, word extraction, and
//! continuous-trajectory satisfaction through the extracted word.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::logic::eval::{eval_lasso_fn, eval_prefix_fn, Verdict};
use crate::logic::{Atom, Formula};
use crate::numerics::{dot, Vector};
use crate::plant::DenseTrajectory;

/// Cap on boundary crossings per sampling period before the trajectory is
/// declared chattering.
pub const MAX_TIPS_PER_PERIOD: usize = 10_000;

/// Distinct half-spaces referenced by a formula, in deterministic order.
/// Letters are bitmasks over this list.
#[derive(Debug, Clone)]
pub struct AtomTable {
    pub entries: Vec<(String, Vector, f64)>,
}

impl AtomTable {
    pub fn from_formula(f: &Formula) -> Result<AtomTable> {
        let mut map: BTreeMap<String, (Vector, f64)> = BTreeMap::new();
        for a in f.atoms() {
            if let Some((c, d)) = map.get(&a.name) {
                if *c != a.c || *d != a.d {
                    return Err(Error::Invalid(format!(
                        "proposition `{}` bound to two different half-spaces",
                        a.name
                    )));
                }
            } else {
                map.insert(a.name.clone(), (a.c.clone(), a.d));
            }
        }
        let entries: Vec<_> = map.into_iter().map(|(n, (c, d))| (n, c, d)).collect();
        if entries.len() > 64 {
            return Err(Error::Invalid("at most 64 distinct propositions supported".into()));
        }
        Ok(AtomTable { entries })
    }

    pub fn from_bindings(bindings: &[(String, Vector, f64)]) -> Result<AtomTable> {
        if bindings.len() > 64 {
            return Err(Error::Invalid("at most 64 distinct propositions supported".into()));
        }
        Ok(AtomTable { entries: bindings.to_vec() })
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.entries.iter().position(|(n, _, _)| n == name)
    }

    /// Letter at a state: bit i set iff the state is strictly inside
    /// half-space i. Values within `boundary_tol` of the boundary count as
    /// outside, matching the strict inequality.
    pub fn letter(&self, x: &[f64], boundary_tol: f64) -> u64 {
        let mut mask = 0u64;
        for (i, (_, c, d)) in self.entries.iter().enumerate() {
            if dot(c, x) + d < -boundary_tol {
                mask |= 1 << i;
            }
        }
        mask
    }
}

/// Sorted distinct times where some atom's boundary function changes sign or
/// touches zero, refined by bisection on the trajectory's interpolant.
pub fn tipping_points(traj: &DenseTrajectory, atoms: &AtomTable) -> Result<Vec<f64>> {
    let tip_tol = 1e-9 * traj.period.max(1e-12);
    let mut tips: Vec<f64> = Vec::new();
    for (_, c, d) in &atoms.entries {
        let g: Vec<f64> = traj.states.iter().map(|x| dot(c, x) + d).collect();
        for i in 0..g.len() - 1 {
            let (a, b) = (g[i], g[i + 1]);
            if a == 0.0 {
                // an exact boundary sample is a tip only if the letter
                // differs nearby, i.e. some neighbor is strictly inside
                if b < 0.0 || (i > 0 && g[i - 1] < 0.0) {
                    tips.push(traj.times[i]);
                }
                continue;
            }
            if (a < 0.0 && b > 0.0) || (a > 0.0 && b < 0.0) {
                // bisection on the piecewise-linear interpolant
                let (mut lo, mut hi) = (traj.times[i], traj.times[i + 1]);
                let (mut glo, _ghi) = (a, b);
                while hi - lo > tip_tol {
                    let mid = 0.5 * (lo + hi);
                    let gm = dot(c, &traj.interpolate(mid)) + d;
                    if gm == 0.0 {
                        lo = mid;
                        break;
                    }
                    if (glo < 0.0) == (gm < 0.0) {
                        lo = mid;
                        glo = gm;
                    } else {
                        hi = mid;
                    }
                }
                tips.push(0.5 * (lo + hi));
            }
        }
        if *g.last().unwrap() == 0.0 && g[g.len() - 2] < 0.0 {
            tips.push(*traj.times.last().unwrap());
        }
    }
    tips.sort_by(|x, y| x.partial_cmp(y).unwrap());
    tips.dedup_by(|a, b| (*a - *b).abs() <= tip_tol.max(1e-12));

    // Enforce the finite-crossings assumption numerically, per period.
    let period = traj.period.max(1e-12);
    let mut count_in_window = 0usize;
    let mut window = 0usize;
    for &t in &tips {
        let w = (t / period).floor() as usize;
        if w == window {
            count_in_window += 1;
            if count_in_window > MAX_TIPS_PER_PERIOD {
                return Err(Error::ZenoLike { count: count_in_window });
            }
        } else {
            window = w;
            count_in_window = 1;
        }
    }
    Ok(tips)
}

/// Alternating point/interval decomposition of the horizon around the
/// tipping times: point cells at 0 and at each tip, open interval cells in
/// between and after the last tip.
#[derive(Debug, Clone)]
pub struct CellWord {
    /// Cell boundary times: index 0 is t = 0, the rest are tips.
    pub boundaries: Vec<f64>,
    /// letters[2k] is the point cell at boundaries[k]; letters[2k+1] the
    /// open interval after it. Length 2 * boundaries.len().
    pub letters: Vec<u64>,
    /// The letter is constant from the last tip through at least one full
    /// sampling period up to the horizon. Whether that close extends to
    /// infinity is the caller's assertion, not a fact of the finite data.
    pub stabilized: bool,
    pub horizon: f64,
}

impl CellWord {
    pub fn n_cells(&self) -> usize {
        self.letters.len()
    }
}

/// Build the cell decomposition of a trajectory. Boundary-time letters
/// resolve atoms within tolerance of the hyperplane as "outside" (the
/// inequality is strict); interval letters are sampled mid-cell.
pub fn extract_cells(traj: &DenseTrajectory, atoms: &AtomTable) -> Result<CellWord> {
    let tips = tipping_points(traj, atoms)?;
    let span = traj.span();
    let tip_tol = 1e-9 * traj.period.max(1e-12);
    let boundary_tol = tip_tol_to_boundary_tol(traj, atoms, tip_tol);

    let mut boundaries = vec![0.0];
    for &t in &tips {
        if t > tip_tol && t < span - tip_tol {
            boundaries.push(t);
        }
    }

    let mut letters = Vec::with_capacity(2 * boundaries.len());
    for (k, &t) in boundaries.iter().enumerate() {
        letters.push(atoms.letter(&traj.interpolate(t), boundary_tol));
        let next = boundaries.get(k + 1).copied().unwrap_or(span);
        let mid = 0.5 * (t + next);
        letters.push(atoms.letter(&traj.interpolate(mid), 0.0));
    }

    // Stabilization heuristic, enforced numerically: the tail after the last
    // tip must cover a sampling period (or the whole horizon is tip-free).
    let last_tip = boundaries.last().copied().unwrap_or(0.0);
    let stabilized = span - last_tip >= traj.period.min(span) * 0.999;
    Ok(CellWord { boundaries, letters, stabilized, horizon: span })
}

/// Scale for treating a boundary-time sample as "on" the hyperplane: the
/// largest possible |g| drift within tip_tol of the located tip.
fn tip_tol_to_boundary_tol(traj: &DenseTrajectory, atoms: &AtomTable, tip_tol: f64) -> f64 {
    let mut max_rate: f64 = 0.0;
    for (_, c, _) in &atoms.entries {
        for w in traj.states.windows(2) {
            let dg = (dot(c, &w[1]) - dot(c, &w[0])).abs();
            max_rate = max_rate.max(dg / traj.h);
        }
    }
    (max_rate * tip_tol * 4.0).max(1e-12)
}

/// Finite representation of the word corresponding to a trajectory: letters
/// at switching times, consecutive letters distinct, with a stabilization
/// close when the suffix is constant.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimedWord {
    pub times: Vec<f64>,
    pub letters: Vec<u64>,
    pub stabilized: bool,
}

impl TimedWord {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("time,letter_bitmask\n");
        for (t, l) in self.times.iter().zip(&self.letters) {
            out.push_str(&format!("{t},{l}\n"));
        }
        out
    }
}

/// Extract the word of a trajectory from its cell decomposition, following
/// the constructive case split: a letter change at a tip itself starts a new
/// letter at the tip; a change only after the tip starts the new letter
/// strictly inside the following interval.
pub fn extract_word(traj: &DenseTrajectory, atoms: &AtomTable) -> Result<TimedWord> {
    let cells = extract_cells(traj, atoms)?;
    Ok(word_from_cells(&cells))
}

pub fn word_from_cells(cells: &CellWord) -> TimedWord {
    let mut times = Vec::new();
    let mut letters: Vec<u64> = Vec::new();
    for (idx, &letter) in cells.letters.iter().enumerate() {
        let k = idx / 2;
        let t = if idx % 2 == 0 {
            cells.boundaries[k]
        } else {
            let next = cells.boundaries.get(k + 1).copied().unwrap_or(cells.horizon);
            0.5 * (cells.boundaries[k] + next)
        };
        if letters.last() != Some(&letter) {
            times.push(t);
            letters.push(letter);
        }
    }
    TimedWord { times, letters, stabilized: cells.stabilized }
}

/// Continuous satisfaction of a radius-0 formula by a finite-horizon
/// trajectory, through the corresponding word. The verdict is three-valued:
/// conclusive only when every continuation of the word agrees.
pub fn eval_continuous(traj: &DenseTrajectory, formula: &Formula) -> Result<Verdict> {
    eval_continuous_with(traj, formula, false)
}

/// Like `eval_continuous`, but a word whose tail letter held for a full
/// period is closed into a lasso and evaluated exactly. Callers assert that
/// the trajectory has genuinely settled (e.g. a converged simulation under a
/// frozen input).
pub fn eval_continuous_settled(traj: &DenseTrajectory, formula: &Formula) -> Result<Verdict> {
    eval_continuous_with(traj, formula, true)
}

fn eval_continuous_with(traj: &DenseTrajectory, formula: &Formula, trust: bool) -> Result<Verdict> {
    if formula.atoms().iter().any(|a| a.radius != 0.0) {
        return Err(Error::Invalid("continuous evaluation expects a radius-0 formula".into()));
    }
    let atoms = AtomTable::from_formula(formula)?;
    let word = extract_word(traj, &atoms)?;
    eval_word(&word, formula, &atoms, trust)
}

/// Evaluate a formula over a timed word's letter sequence.
/// `trust_stabilization` closes a stabilized word into a lasso; otherwise
/// the suffix beyond the horizon stays unknown.
pub fn eval_word(
    word: &TimedWord,
    formula: &Formula,
    atoms: &AtomTable,
    trust_stabilization: bool,
) -> Result<Verdict> {
    let indices: BTreeMap<&str, usize> = atoms
        .entries
        .iter()
        .enumerate()
        .map(|(i, (n, _, _))| (n.as_str(), i))
        .collect();
    let sat = |j: usize, a: &Atom| -> bool {
        let bit = indices
            .get(a.name.as_str())
            .map(|i| word.letters[j] >> i & 1 == 1)
            .unwrap_or(false);
        bit != a.negated
    };
    if word.stabilized && trust_stabilization {
        let n = word.letters.len();
        eval_lasso_fn(n - 1, 1, &sat, formula, 1).map(Some)
    } else {
        eval_prefix_fn(word.letters.len(), &sat, formula, 1)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::logic::parser::{parse, PropositionTable};

    /// Synthetic dense trajectory from an analytic curve.
    fn traj_from(f: impl Fn(f64) -> Vec<f64>, t_end: f64, steps: usize, period: f64) -> DenseTrajectory {
        let h = t_end / steps as f64;
        let times: Vec<f64> = (0..=steps).map(|i| i as f64 * h).collect();
        let states = times.iter().map(|&t| f(t)).collect();
        DenseTrajectory { times, states, h, period, left_guard: false }
    }

    fn p_table() -> PropositionTable {
        let mut t = PropositionTable::new();
        t.bind("p", vec![1.0], 0.0).unwrap(); // x < 0
        t
    }

    #[test]
    fn tipping_point_of_linear_ramp() {
        // x(t) = t - 1, p = {x < 0}: tip at t = 1
        let traj = traj_from(|t| vec![t - 1.0], 3.0, 3000, 3.0);
        let f = parse("p", &p_table()).unwrap();
        let atoms = AtomTable::from_formula(&f).unwrap();
        let tips = tipping_points(&traj, &atoms).unwrap();
        assert_eq!(tips.len(), 1);
        assert!((tips[0] - 1.0).abs() < 1e-6, "tip at {}", tips[0]);
    }

    #[test]
    fn no_tipping_points_strictly_inside() {
        let traj = traj_from(|t| vec![-1.0 - 0.1 * t], 2.0, 200, 2.0);
        let f = parse("p", &p_table()).unwrap();
        let atoms = AtomTable::from_formula(&f).unwrap();
        assert!(tipping_points(&traj, &atoms).unwrap().is_empty());
    }

    #[test]
    fn tipping_points_of_sine() {
        let traj = traj_from(|t| vec![t.sin()], 7.0, 7000, 7.0);
        let f = parse("p", &p_table()).unwrap();
        let atoms = AtomTable::from_formula(&f).unwrap();
        let tips = tipping_points(&traj, &atoms).unwrap();
        assert_eq!(tips.len(), 2, "tips {tips:?}");
        assert!((tips[0] - std::f64::consts::PI).abs() < 1e-5);
        assert!((tips[1] - 2.0 * std::f64::consts::PI).abs() < 1e-5);
    }

    #[test]
    fn word_of_linear_ramp() {
        // letters: {p} then {} (0 not in p, strict inequality), stabilized
        let traj = traj_from(|t| vec![t - 1.0], 4.0, 4000, 1.0);
        let f = parse("p", &p_table()).unwrap();
        let atoms = AtomTable::from_formula(&f).unwrap();
        let word = extract_word(&traj, &atoms).unwrap();
        assert_eq!(word.letters, vec![1, 0]);
        assert!(word.stabilized);
        assert!((word.times[1] - 1.0).abs() < 1e-6);
    }

    #[test]
    fn constant_trajectory_single_stabilized_letter() {
        let traj = traj_from(|_| vec![-0.5], 2.0, 100, 2.0);
        let f = parse("p", &p_table()).unwrap();
        let atoms = AtomTable::from_formula(&f).unwrap();
        let word = extract_word(&traj, &atoms).unwrap();
        assert_eq!(word.letters, vec![1]);
        assert!(word.stabilized);
    }

    #[test]
    fn word_invariant_under_grid_refinement() {
        let f = parse("p", &p_table()).unwrap();
        let atoms = AtomTable::from_formula(&f).unwrap();
        let coarse = traj_from(|t| vec![(t - 1.2) * (t - 2.7)], 4.0, 2000, 1.0);
        let fine = traj_from(|t| vec![(t - 1.2) * (t - 2.7)], 4.0, 4000, 1.0);
        let w1 = extract_word(&coarse, &atoms).unwrap();
        let w2 = extract_word(&fine, &atoms).unwrap();
        assert_eq!(w1.letters, w2.letters);
        assert_eq!(w1.stabilized, w2.stabilized);
        for (a, b) in w1.times.iter().zip(&w2.times) {
            assert!((a - b).abs() < 1e-4);
        }
    }

    #[test]
    fn continuous_until_to_boundary() {
        // x(t) = t - 1, phi = p U !p: p holds on [0,1), !p from the tip on
        let traj = traj_from(|t| vec![t - 1.0], 4.0, 4000, 1.0);
        let f = parse("p U !p", &p_table()).unwrap();
        assert_eq!(eval_continuous(&traj, &f).unwrap(), Some(true));
    }

    #[test]
    fn continuous_safety_on_constant_trajectory() {
        let traj = traj_from(|_| vec![-0.5], 2.0, 100, 2.0);
        let f = parse("p R p", &p_table()).unwrap();
        assert_eq!(eval_continuous(&traj, &f).unwrap(), Some(true));
    }

    #[test]
    fn unreached_target_is_inconclusive() {
        let mut t = p_table();
        t.bind("q", vec![-1.0], 5.0).unwrap(); // x > 5, never reached
        let f = parse("p U q", &t).unwrap();
        // stays in p the whole horizon, q unwitnessed: the suffix decides
        let traj = traj_from(|t| vec![-1.0 + 0.05 * t], 4.0, 2000, 1.0);
        assert_eq!(eval_continuous(&traj, &f).unwrap(), None);
        // kept drifting, so even the settled close refuses a witness claim
        // only when the caller does not assert settledness
        assert_eq!(eval_continuous_settled(&traj, &f).unwrap(), Some(false));
    }

    #[test]
    fn boundary_touch_produces_momentary_letter() {
        // tent curve touching the boundary from inside p at t = 1 exactly
        // (2048 steps over [0,2] keep the sample times exactly representable)
        let traj = traj_from(|t| vec![-(t - 1.0).abs()], 2.0, 2048, 2.0);
        let f = parse("p", &p_table()).unwrap();
        let atoms = AtomTable::from_formula(&f).unwrap();
        let word = extract_word(&traj, &atoms).unwrap();
        // {p}, {} at the touch, {p} again
        assert_eq!(word.letters, vec![1, 0, 1], "letters {:?}", word.letters);
    }
}
