//! Sampled-data controllers derived from abstraction strategies, the online
//! run matcher, closed-loop execution against disturbance generators, and
//! the verdict report tying the robustified chain back to the original
//! specification.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::abstraction::Abstraction;
use crate::error::{Error, Result};
use crate::game::Strategy;
use crate::logic::eval::eval_prefix;
use crate::logic::word::eval_continuous;
use crate::logic::{tr_delta, tr_eps, Formula};
use crate::numerics::lp::{min_residual_signal, nearest_in_hull};
use crate::numerics::matrix::solve_linear;
use crate::numerics::{dist, Matrix, Vector, GEOM_TOL};
use crate::plant::{DenseTrajectory, InputSignal, LinearSystem, Stepper, DEFAULT_DENSE};

/// A control label together with the input signal realizing it.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RealizedLabel {
    pub label: Vector,
    pub signal: InputSignal,
    pub residual: f64,
}

/// Input signal whose control-only response lands within mu/2 of the label.
/// The exact minimum-residual program over the substep gain maps leads;
/// a least-squares solve projected into U backs it up if the program fails
/// numerically (projection alone cannot guarantee the mu/2 contract).
pub fn realize_label(
    sys: &LinearSystem,
    tau: f64,
    label: &[f64],
    n_substeps: usize,
    mu: f64,
) -> Result<RealizedLabel> {
    let stepper = Stepper::new(sys, tau, n_substeps)?;
    let n = sys.dim();
    let m = sys.b.cols();
    // maps[j]: input on substep j -> contribution to x(tau)
    let mut maps = Vec::with_capacity(n_substeps);
    let mut p = Matrix::identity(n);
    for _ in 0..n_substeps {
        maps.push(p.mul(&stepper.gamma_b));
        p = stepper.phi.mul(&p);
    }
    maps.reverse();

    let bound = mu / 2.0 + 1e-9;
    let u_verts = sys.u_space.vertices();

    // least-squares solve projected into U; kept only when essentially
    // exact, since projection can spoil the fit arbitrarily
    if let Some(u) = least_squares_stack(&maps, label, n, m) {
        let mut projected = Vec::with_capacity(n_substeps);
        for uj in u.chunks(m) {
            let (p, _) = nearest_in_hull(uj, u_verts)?;
            projected.push(p);
        }
        let signal = InputSignal::new(tau, projected)?;
        let residual = residual_of(&stepper, sys, &signal, label)?;
        if residual <= 1e-9 {
            return Ok(RealizedLabel { label: label.to_vec(), signal, residual });
        }
    }

    // exact minimum-residual program over the substep hull weights
    let (values, _) = min_residual_signal(&maps, u_verts, label)?;
    let signal = InputSignal::new(tau, values)?;
    let residual = residual_of(&stepper, sys, &signal, label)?;
    if residual > bound {
        return Err(Error::RealizerResidual { residual, bound: mu / 2.0 });
    }
    Ok(RealizedLabel { label: label.to_vec(), signal, residual })
}

fn residual_of(
    stepper: &Stepper,
    sys: &LinearSystem,
    u: &InputSignal,
    label: &[f64],
) -> Result<f64> {
    let zero_v = InputSignal::zero(u.tau, sys.g.cols(), u.substeps())?;
    let reached = stepper.step(&vec![0.0; sys.dim()], u, &zero_v)?;
    Ok(dist(&reached, label))
}

/// Stacked unconstrained least squares min |M u - label|_2 via ridge-
/// regularized normal equations; None when the solve degenerates.
fn least_squares_stack(maps: &[Matrix], label: &[f64], n: usize, m: usize) -> Option<Vec<f64>> {
    let cols = maps.len() * m;
    let mut stack = Matrix::zeros(n, cols);
    for (j, mj) in maps.iter().enumerate() {
        for i in 0..n {
            for k in 0..m {
                stack.set(i, j * m + k, mj.get(i, k));
            }
        }
    }
    let mut normal = Matrix::zeros(cols, cols);
    for i in 0..cols {
        for j in 0..cols {
            let mut s = 0.0;
            for r in 0..n {
                s += stack.get(r, i) * stack.get(r, j);
            }
            normal.set(i, j, s + if i == j { 1e-10 } else { 0.0 });
        }
    }
    let mut rhs = vec![0.0; cols];
    for (i, r) in rhs.iter_mut().enumerate() {
        for row in 0..n {
            *r += stack.get(row, i) * label[row];
        }
    }
    solve_linear(&normal, &rhs)
}

/// Controller derived from an initial abstraction state and a strategy:
/// the initial set is the eps-ball around the state, the control labels are
/// realized as stored input signals, and the pairing with the abstraction
/// run is maintained online while the loop executes.
#[derive(Debug, Clone)]
pub struct Controller {
    pub q0: usize,
    pub eps: f64,
    pub strategy: Strategy,
    pub realized: Vec<RealizedLabel>,
    pub n_substeps: usize,
    pub dense: usize,
}

impl Controller {
    pub fn initial_set_contains(&self, abs: &Abstraction, x: &[f64]) -> bool {
        dist(x, &abs.system.states[self.q0]) <= self.eps + 1e-9
    }
}

pub fn derive_controller(
    sys: &LinearSystem,
    abs: &Abstraction,
    q0: usize,
    strategy: &Strategy,
    n_substeps: usize,
    dense: usize,
) -> Result<Controller> {
    if q0 >= abs.system.n_states() {
        return Err(Error::Invalid(format!("initial state {q0} outside the abstraction")));
    }
    if !abs.params.certified {
        return Err(Error::Certification("controller derivation requires certified parameters".into()));
    }
    let n_substeps = if n_substeps == 0 { abs.n_substeps } else { n_substeps };
    let dense = if dense == 0 { DEFAULT_DENSE } else { dense };
    let mut realized = Vec::with_capacity(abs.system.n_controls());
    for label in &abs.system.control_labels {
        realized.push(realize_label(sys, abs.params.tau, label, n_substeps, abs.params.mu)?);
    }
    Ok(Controller {
        q0,
        eps: abs.params.eps,
        strategy: strategy.clone(),
        realized,
        n_substeps,
        dense,
    })
}

/// Seeded disturbance generators for closed-loop runs.
#[derive(Debug, Clone)]
pub enum DisturbanceGenerator {
    /// Identically zero disturbance (requires 0 in V).
    Zero,
    /// Independent per-substep samples over V vertices and interior mixes.
    Uniform(ChaCha8Rng),
    /// Per-step greedy choice of the V vertex maximizing the matcher
    /// distance of the upcoming step.
    Adversarial,
}

impl DisturbanceGenerator {
    pub fn from_kind(kind: GeneratorKind, seed: u64) -> DisturbanceGenerator {
        match kind {
            GeneratorKind::Zero => DisturbanceGenerator::Zero,
            GeneratorKind::Uniform => {
                DisturbanceGenerator::Uniform(ChaCha8Rng::seed_from_u64(seed))
            }
            GeneratorKind::Adversarial => DisturbanceGenerator::Adversarial,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GeneratorKind {
    Zero,
    Uniform,
    Adversarial,
}

impl std::str::FromStr for GeneratorKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<GeneratorKind> {
        match s {
            "zero" => Ok(GeneratorKind::Zero),
            "uniform" => Ok(GeneratorKind::Uniform),
            "adversarial" => Ok(GeneratorKind::Adversarial),
            other => Err(Error::Invalid(format!("unknown disturbance generator `{other}`"))),
        }
    }
}

/// Everything observed during one closed-loop execution.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ClosedLoopRun {
    pub dense: DenseTrajectory,
    pub dense_per_period: usize,
    pub sampled: Vec<Vector>,
    pub abstract_run: Vec<u32>,
    pub memories: Vec<u32>,
    pub control_labels_used: Vec<u32>,
    pub control_signals: Vec<InputSignal>,
    pub disturbance_signals: Vec<InputSignal>,
    pub matched_disturbance_labels: Vec<u32>,
    pub matcher_distance: Vec<f64>,
    pub realizer_residuals: Vec<f64>,
    pub left_state_space: bool,
}

impl ClosedLoopRun {
    /// Max deviation from the period's sampling point, per period and overall.
    pub fn max_intersample_deviation(&self) -> f64 {
        let p = self.dense_per_period;
        let mut worst: f64 = 0.0;
        for (k, anchor) in self.sampled.iter().enumerate() {
            let lo = k * p;
            let hi = ((k + 1) * p).min(self.dense.states.len() - 1);
            if lo >= self.dense.states.len() {
                break;
            }
            for s in &self.dense.states[lo..=hi] {
                worst = worst.max(dist(s, anchor));
            }
        }
        worst
    }

    /// CSV export: per dense sample time, state, the substep inputs in
    /// force, the paired abstract state, and the matcher distance.
    pub fn to_csv(&self) -> String {
        let dim = self.sampled[0].len();
        let udim = self.control_signals.first().map(|s| s.values[0].len()).unwrap_or(0);
        let vdim = self.disturbance_signals.first().map(|s| s.values[0].len()).unwrap_or(0);
        let mut head = String::from("t");
        for i in 0..dim {
            head.push_str(&format!(",x{i}"));
        }
        for i in 0..udim {
            head.push_str(&format!(",u{i}"));
        }
        for i in 0..vdim {
            head.push_str(&format!(",v{i}"));
        }
        head.push_str(",abstract_state,matcher_distance\n");
        let mut out = head;
        let p = self.dense_per_period.max(1);
        for (i, (t, x)) in self.dense.times.iter().zip(&self.dense.states).enumerate() {
            let step = (i / p).min(self.control_signals.len().saturating_sub(1));
            let mut row = format!("{t}");
            for v in x {
                row.push_str(&format!(",{v}"));
            }
            if let Some(sig) = self.control_signals.get(step) {
                let sub = substep_of(i, p, sig.substeps());
                for v in &sig.values[sub] {
                    row.push_str(&format!(",{v}"));
                }
            }
            if let Some(sig) = self.disturbance_signals.get(step) {
                let sub = substep_of(i, p, sig.substeps());
                for v in &sig.values[sub] {
                    row.push_str(&format!(",{v}"));
                }
            }
            let k = (i / p).min(self.abstract_run.len() - 1);
            let md = if k < self.matcher_distance.len() {
                self.matcher_distance[k]
            } else {
                0.0
            };
            row.push_str(&format!(",{},{md}\n", self.abstract_run[k]));
            out.push_str(&row);
        }
        out
    }
}

fn substep_of(dense_idx: usize, per_period: usize, substeps: usize) -> usize {
    let within = dense_idx % per_period;
    (within * substeps / per_period).min(substeps - 1)
}

/// Execute the closed loop for `steps` sampling periods from x0 in the
/// controller's initial set. The online matcher maintains the paired
/// abstraction run; a pairing failure under certified parameters is a hard
/// fault carrying the run prefix.
pub fn run_closed_loop(
    sys: &LinearSystem,
    abs: &Abstraction,
    ctrl: &Controller,
    x0: &[f64],
    generator: &mut DisturbanceGenerator,
    steps: usize,
) -> Result<ClosedLoopRun> {
    let q0_state = &abs.system.states[ctrl.q0];
    if dist(x0, q0_state) > ctrl.eps + 1e-9 {
        return Err(Error::Invalid(format!(
            "x0 is {:.6} away from the initial abstraction state; bound is eps = {}",
            dist(x0, q0_state),
            ctrl.eps
        )));
    }
    if !sys.x_space.contains(x0) {
        return Err(Error::Invalid("x0 outside the state space".into()));
    }
    let tau = abs.params.tau;
    let stepper = Stepper::new(sys, tau, ctrl.n_substeps)?;
    let refine = ctrl.dense.div_ceil(ctrl.n_substeps).max(1);
    let per_period = refine * ctrl.n_substeps;
    let zero_u = InputSignal::zero(tau, sys.b.cols(), ctrl.n_substeps)?;

    let mut run = ClosedLoopRun {
        dense: DenseTrajectory {
            times: vec![0.0],
            states: vec![x0.to_vec()],
            h: tau / per_period as f64,
            period: tau,
            left_guard: false,
        },
        dense_per_period: per_period,
        sampled: vec![x0.to_vec()],
        abstract_run: vec![ctrl.q0 as u32],
        memories: Vec::new(),
        control_labels_used: Vec::new(),
        control_signals: Vec::new(),
        disturbance_signals: Vec::new(),
        matched_disturbance_labels: Vec::new(),
        matcher_distance: vec![dist(x0, q0_state)],
        realizer_residuals: Vec::new(),
        left_state_space: !sys.x_space.contains(x0),
    };

    let mut x = x0.to_vec();
    let mut q = ctrl.q0;
    let mut mem = ctrl.strategy.update(ctrl.strategy.initial_memory, ctrl.q0);
    run.memories.push(mem as u32);

    for step_idx in 0..steps {
        let a_idx = ctrl.strategy.choose_one(mem, q) as usize;
        let realized = &ctrl.realized[a_idx];
        let u = &realized.signal;

        let v = draw_disturbance(sys, abs, ctrl, &stepper, generator, &x, q, a_idx, &zero_u)?;

        let piece = stepper.dense_simulate(sys, &x, u, &v, ctrl.dense)?;
        let x_next = piece.final_state().clone();
        run.dense.extend_with(&piece);

        // pair the step: match the disturbance response to a label, then
        // pick the closest eligible successor
        let r_v = stepper.step(&vec![0.0; sys.dim()], &zero_u, &v)?;
        let (b_idx, b_dist) = nearest_point(&abs.system.disturbance_labels, &r_v);
        if b_dist > abs.params.mu / 2.0 + 1e-7 {
            return Err(Error::MatcherFault {
                step: step_idx,
                msg: format!(
                    "disturbance response {:.6} away from the nearest label; bound mu/2 = {}",
                    b_dist,
                    abs.params.mu / 2.0
                ),
            });
        }
        let succ = abs.system.successors(q, a_idx, b_idx);
        let mut best: Option<(usize, f64)> = None;
        for &qn in succ {
            let d = dist(&abs.system.states[qn as usize], &x_next);
            if best.map_or(true, |(bq, bd)| d < bd - 1e-15 || (d <= bd + 1e-15 && (qn as usize) < bq)) {
                best = Some((qn as usize, d));
            }
        }
        let Some((q_next, pair_dist)) = best else {
            return Err(Error::MatcherFault {
                step: step_idx,
                msg: format!(
                    "no successor recorded for (q={q}, a={a_idx}, b={b_idx}); run prefix {:?}",
                    run.abstract_run
                ),
            });
        };
        if pair_dist > ctrl.eps + 1e-9 {
            return Err(Error::MatcherFault {
                step: step_idx,
                msg: format!(
                    "pairing distance {pair_dist:.6} exceeds eps = {}; run prefix {:?}",
                    ctrl.eps, run.abstract_run
                ),
            });
        }

        run.sampled.push(x_next.clone());
        run.abstract_run.push(q_next as u32);
        run.control_labels_used.push(a_idx as u32);
        run.control_signals.push(u.clone());
        run.disturbance_signals.push(v);
        run.matched_disturbance_labels.push(b_idx as u32);
        run.matcher_distance.push(pair_dist);
        run.realizer_residuals.push(realized.residual);
        run.left_state_space |= !sys.x_space.contains(&x_next);

        x = x_next;
        q = q_next;
        mem = ctrl.strategy.update(mem, q_next);
        run.memories.push(mem as u32);
    }
    Ok(run)
}

#[allow(clippy::too_many_arguments)]
fn draw_disturbance(
    sys: &LinearSystem,
    abs: &Abstraction,
    ctrl: &Controller,
    stepper: &Stepper,
    generator: &mut DisturbanceGenerator,
    x: &[f64],
    q: usize,
    a_idx: usize,
    zero_u: &InputSignal,
) -> Result<InputSignal> {
    let tau = abs.params.tau;
    let k = sys.g.cols();
    match generator {
        DisturbanceGenerator::Zero => {
            let z = vec![0.0; k];
            if !sys.v_space.contains(&z) {
                return Err(Error::Invalid("zero generator needs 0 in V".into()));
            }
            InputSignal::constant(tau, z, ctrl.n_substeps)
        }
        DisturbanceGenerator::Uniform(rng) => {
            let verts = sys.v_space.vertices();
            let values = (0..ctrl.n_substeps)
                .map(|_| {
                    if rng.gen_bool(0.5) {
                        verts[rng.gen_range(0..verts.len())].clone()
                    } else {
                        // interior sample: normalized random vertex weights
                        let mut w: Vec<f64> = (0..verts.len()).map(|_| rng.gen_range(0.0..1.0)).collect();
                        let s: f64 = w.iter().sum::<f64>().max(1e-12);
                        w.iter_mut().for_each(|v| *v /= s);
                        let mut p = vec![0.0; k];
                        for (wi, vert) in w.iter().zip(verts) {
                            for (pi, vi) in p.iter_mut().zip(vert) {
                                *pi += wi * vi;
                            }
                        }
                        p
                    }
                })
                .collect();
            InputSignal::new(tau, values)
        }
        DisturbanceGenerator::Adversarial => {
            // greedy: the V vertex (held constant) that maximizes the
            // pairing distance of the upcoming step
            let u = &ctrl.realized[a_idx].signal;
            let mut best: Option<(usize, f64)> = None;
            for (vi, w) in sys.v_space.vertices().iter().enumerate() {
                let v = InputSignal::constant(tau, w.clone(), ctrl.n_substeps)?;
                let x_next = stepper.step(x, u, &v)?;
                let r_v = stepper.step(&vec![0.0; sys.dim()], zero_u, &v)?;
                let (b_idx, _) = nearest_point(&abs.system.disturbance_labels, &r_v);
                let succ = abs.system.successors(q, a_idx, b_idx);
                let d = succ
                    .iter()
                    .map(|&qn| dist(&abs.system.states[qn as usize], &x_next))
                    .fold(f64::INFINITY, f64::min);
                if best.map_or(true, |(_, bd)| d > bd) {
                    best = Some((vi, d));
                }
            }
            let (vi, _) = best.ok_or_else(|| Error::Invalid("V has no vertices".into()))?;
            InputSignal::constant(tau, sys.v_space.vertices()[vi].clone(), ctrl.n_substeps)
        }
    }
}

fn nearest_point(points: &[Vector], x: &[f64]) -> (usize, f64) {
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

/// The four verdict boxes of a closed-loop run against the original
/// specification, plus the implication-chain bookkeeping.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct VerdictReport {
    pub max_deviation: f64,
    pub delta: f64,
    /// (a) measured inter-sample deviation within delta.
    pub deviation_ok: bool,
    /// (b) paired abstraction run satisfies the doubly-robustified formula.
    pub abstraction_box: Option<bool>,
    /// (c) sampled trace satisfies the delta-robustified formula.
    pub sampled_box: Option<bool>,
    /// (d) dense trajectory satisfies the original formula.
    pub continuous_box: Option<bool>,
    /// Implications (b) => (c) => (d) hold on every conclusive pair.
    pub chain_ok: bool,
    /// Atom evaluations within GEOM_TOL of a decision boundary.
    pub marginal_evaluations: usize,
    pub matcher_distance_max: f64,
    pub realizer_residual_max: f64,
}

/// Evaluate the verdict boxes for a run. `delta` is the inter-sample bound
/// the robustification used; `eps` comes from the abstraction parameters.
pub fn verdict(
    run: &ClosedLoopRun,
    abs: &Abstraction,
    phi0: &Formula,
    delta: f64,
) -> Result<VerdictReport> {
    let eps = abs.params.eps;
    let phi_delta = tr_delta(phi0, delta)?;
    let phi_delta_eps = tr_eps(&phi_delta, eps)?;

    let abstract_states: Vec<Vector> = run
        .abstract_run
        .iter()
        .map(|&q| abs.system.states[q as usize].clone())
        .collect();

    let max_deviation = run.max_intersample_deviation();
    let deviation_ok = max_deviation <= delta + 1e-12;
    let abstraction_box = eval_prefix(&abstract_states, &phi_delta_eps)?;
    let sampled_box = eval_prefix(&run.sampled, &phi_delta)?;
    let continuous_box = eval_continuous(&run.dense, phi0)?;

    let mut chain_ok = true;
    if abstraction_box == Some(true) && sampled_box == Some(false) {
        chain_ok = false;
    }
    if sampled_box == Some(true) && deviation_ok && continuous_box == Some(false) {
        chain_ok = false;
    }

    let mut marginal = 0usize;
    for f in [&phi_delta_eps, &phi_delta] {
        for a in f.atoms() {
            for s in &run.sampled {
                if a.margin(s).abs() < GEOM_TOL {
                    marginal += 1;
                }
            }
        }
    }

    Ok(VerdictReport {
        max_deviation,
        delta,
        deviation_ok,
        abstraction_box,
        sampled_box,
        continuous_box,
        chain_ok,
        marginal_evaluations: marginal,
        matcher_distance_max: run.matcher_distance.iter().cloned().fold(0.0, f64::max),
        realizer_residual_max: run.realizer_residuals.iter().cloned().fold(0.0, f64::max),
    })
}
