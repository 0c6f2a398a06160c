//! Reference systems used by the command layer and the verification suites:
//! the scalar end-to-end fixture, seeded planar contractive systems, and the
//! two constructed planar scenarios where raw-specification synthesis on the
//! abstraction and on the plant disagree.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::abstraction::{build_abstraction, certify, suggest_params, Abstraction, Params};
use crate::error::Result;
use crate::game::synthesize;
use crate::logic::eval::eval_prefix;
use crate::logic::parser::{parse, PropositionTable};
use crate::logic::word::eval_continuous;
use crate::logic::{tr_delta, tr_eps, Formula};
use crate::numerics::{Matrix, Polytope, Vector};
use crate::plant::{check_stability, default_tau_grid, LinearSystem};
use crate::runtime::{derive_controller, run_closed_loop, DisturbanceGenerator, GeneratorKind};

/// Scalar plant dx = -x + u + v on X = [-2, 2], U = [-1, 1], V = [-0.1, 0.1],
/// stability-checked.
pub fn scalar_s1() -> LinearSystem {
    let mut sys = LinearSystem::new(
        Matrix::new(1, 1, vec![-1.0]).unwrap(),
        Matrix::new(1, 1, vec![1.0]).unwrap(),
        Matrix::new(1, 1, vec![1.0]).unwrap(),
        Polytope::interval(-2.0, 2.0).unwrap(),
        Polytope::interval(-1.0, 1.0).unwrap(),
        Polytope::interval(-0.1, 0.1).unwrap(),
    )
    .unwrap();
    check_stability(&mut sys, &default_tau_grid()).unwrap();
    sys
}

/// Precision at which the scalar fixture certifies with room for a
/// nontrivial reach specification.
pub const S1_EPS: f64 = 0.3;

pub fn s1_params(sys: &LinearSystem) -> Result<Params> {
    suggest_params(sys, S1_EPS)
}

/// Reach specification of the scalar fixture: drive the state into
/// {x > 0} while staying inside {x < 1.9}.
pub fn s1_propositions() -> PropositionTable {
    let mut t = PropositionTable::new();
    t.bind("goal", vec![-1.0], 0.0).unwrap();
    t.bind("stay", vec![1.0], -1.9).unwrap();
    t
}

pub const S1_SPEC: &str = "stay U goal";

/// Requested initial point of the scalar fixture; the pipeline snaps it to
/// the nearest winning grid state.
pub const S1_INITIAL: f64 = -0.5;

/// Seeded planar system with log-norm at most -0.4, so every horizon
/// contracts and certification always has room.
pub fn planar_hurwitz(seed: u64) -> LinearSystem {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut a = [[0.0f64; 2]; 2];
    for (i, row) in a.iter_mut().enumerate() {
        for (j, v) in row.iter_mut().enumerate() {
            if i != j {
                *v = rng.gen_range(-0.5..0.5);
            }
        }
    }
    for i in 0..2 {
        let off: f64 = (0..2).filter(|&j| j != i).map(|j| a[i][j].abs()).sum();
        a[i][i] = -(off + 0.4 + rng.gen_range(0.0..0.6));
    }
    let b = Matrix::from_rows(&[
        vec![rng.gen_range(0.4..1.0), 0.0],
        vec![0.0, rng.gen_range(0.4..1.0)],
    ])
    .unwrap();
    let g = Matrix::from_rows(&[vec![rng.gen_range(0.05..0.15)], vec![rng.gen_range(0.05..0.15)]])
        .unwrap();
    let mut sys = LinearSystem::new(
        Matrix::from_rows(&[a[0].to_vec(), a[1].to_vec()]).unwrap(),
        b,
        g,
        Polytope::bounding(&[(-1.0, 1.0), (-1.0, 1.0)]).unwrap(),
        Polytope::bounding(&[(-0.4, 0.4), (-0.4, 0.4)]).unwrap(),
        Polytope::interval(-0.05, 0.05).unwrap(),
    )
    .unwrap();
    check_stability(&mut sys, &default_tau_grid()).unwrap();
    sys
}

/// Desk-scale certified parameters for the planar fixtures: a longer
/// horizon than the default search accepts, so the grids stay coarse.
pub fn planar_params(sys: &LinearSystem, eps: f64) -> Result<Params> {
    crate::abstraction::suggest_params_with(
        sys,
        eps,
        crate::abstraction::SuggestOptions { target_norm: 0.5, ..Default::default() },
    )
}

/// Report of the first counterexample scenario: the raw specification is a
/// pure region formula satisfiable by a concrete initial state, yet no
/// abstraction state satisfies it, so synthesis on the abstraction fails.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RegionGapReport {
    pub winning_states: usize,
    pub winning_empty: bool,
    pub witness_state: Vector,
    pub witness_satisfies: Option<bool>,
    pub n_states: usize,
    pub reproduced: bool,
}

/// Build the region-gap scenario: four half-spaces carve a box strictly
/// between grid lines; grid states all miss it, a continuous state hits it.
pub fn region_gap_fixture() -> Result<(LinearSystem, Abstraction, PropositionTable, Formula)> {
    let mut sys = LinearSystem::new(
        Matrix::from_rows(&[vec![-1.0, 0.0], vec![0.0, -1.0]]).unwrap(),
        Matrix::identity(2),
        Matrix::from_rows(&[vec![0.05], vec![0.05]]).unwrap(),
        Polytope::bounding(&[(-1.0, 1.0), (-1.0, 1.0)]).unwrap(),
        Polytope::bounding(&[(-0.3, 0.3), (-0.3, 0.3)]).unwrap(),
        Polytope::interval(-0.02, 0.02).unwrap(),
    )?;
    check_stability(&mut sys, &default_tau_grid())?;
    let mut params = Params { tau: 2.0, eta: 0.25, mu: 0.25, eps: 0.5, delta: 0.0, certified: false };
    params.delta = crate::plant::delta_bound(&sys, params.tau)?.delta;
    certify(&sys, &mut params)?;
    let abs = build_abstraction(&sys, &params, 8, false)?;

    // region strictly between grid lines: [0.3 eta, 0.7 eta)^2
    let eta = params.eta;
    let mut props = PropositionTable::new();
    props.bind("p1", vec![1.0, 0.0], -0.3 * eta)?;
    props.bind("p2", vec![0.0, 1.0], -0.3 * eta)?;
    props.bind("p3", vec![1.0, 0.0], -0.7 * eta)?;
    props.bind("p4", vec![0.0, 1.0], -0.7 * eta)?;
    let phi0 = parse("!p1 & !p2 & p3 & p4", &props)?;
    Ok((sys, abs, props, phi0))
}

/// Run the region-gap scenario end to end.
pub fn run_region_gap() -> Result<RegionGapReport> {
    let (sys, abs, _props, phi0) = region_gap_fixture()?;
    let report = synthesize(&abs.system, &phi0)?;
    let winning = report.winning_states().len();

    // continuous witness in the middle of the region
    let eta = abs.params.eta;
    let witness = vec![0.5 * eta, 0.5 * eta];
    let u = crate::plant::InputSignal::zero(abs.params.tau, 2, 8)?;
    let v = crate::plant::InputSignal::zero(abs.params.tau, 1, 8)?;
    let traj = crate::plant::dense_simulate(&sys, &witness, &u, &v, 64)?;
    let witness_satisfies = eval_continuous(&traj, &phi0)?;

    Ok(RegionGapReport {
        winning_states: winning,
        winning_empty: winning == 0,
        witness_state: witness,
        witness_satisfies,
        n_states: abs.system.n_states(),
        reproduced: winning == 0 && witness_satisfies == Some(true),
    })
}

/// Report of the second counterexample scenario: the abstraction wins the
/// raw until-specification by hopping over the region where both operands
/// fail, while every continuous trajectory must pass through it.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct JumpGapReport {
    pub initial_winning: bool,
    pub abstract_run: Vec<u32>,
    pub abstract_run_satisfies: Option<bool>,
    pub continuous_satisfies: Option<bool>,
    pub sampled_satisfies: Option<bool>,
    pub reproduced: bool,
}

/// Build the jump-gap scenario: motion along the first axis with a strong
/// input, and an until-specification whose source and target half-space
/// regions are separated by a dead band wider than one grid cell but
/// narrower than one sampling step.
pub fn jump_gap_fixture() -> Result<(LinearSystem, Abstraction, PropositionTable, Formula)> {
    let mut sys = LinearSystem::new(
        Matrix::from_rows(&[vec![-1.0, 0.0], vec![0.0, -1.0]]).unwrap(),
        Matrix::from_rows(&[vec![1.0], vec![0.0]]).unwrap(),
        Matrix::from_rows(&[vec![0.02], vec![0.0]]).unwrap(),
        Polytope::bounding(&[(-0.5, 2.5), (-0.5, 0.5)]).unwrap(),
        Polytope::interval(-3.0, 3.0).unwrap(),
        Polytope::interval(-0.1, 0.1).unwrap(),
    )?;
    check_stability(&mut sys, &default_tau_grid())?;
    let mut params = Params {
        tau: std::f64::consts::LN_2,
        eta: 0.25,
        mu: 0.2,
        eps: 0.75,
        delta: 0.0,
        certified: false,
    };
    params.delta = crate::plant::delta_bound(&sys, params.tau)?.delta;
    certify(&sys, &mut params)?;
    let abs = build_abstraction(&sys, &params, 8, false)?;

    let mut props = PropositionTable::new();
    props.bind("p3", vec![-1.0, 0.0], 0.2)?; // x1 > 0.2
    props.bind("p4", vec![1.0, 0.0], -1.2)?; // x1 < 1.2
    let phi0 = parse("(!p3 & p4) U (p3 & !p4)", &props)?;
    Ok((sys, abs, props, phi0))
}

/// Run the jump-gap scenario end to end.
pub fn run_jump_gap(seed: u64) -> Result<JumpGapReport> {
    let (sys, abs, _props, phi0) = jump_gap_fixture()?;
    let report = synthesize(&abs.system, &phi0)?;
    let q0 = abs
        .state_keys
        .iter()
        .position(|k| k == &vec![0, 0])
        .expect("origin is a grid state");
    let initial_winning = report.winning[q0];

    let ctrl = derive_controller(&sys, &abs, q0, &report.strategy, 8, 64)?;
    let mut gen = DisturbanceGenerator::from_kind(GeneratorKind::Uniform, seed);
    let run = run_closed_loop(&sys, &abs, &ctrl, &vec![0.0, 0.0], &mut gen, 6)?;
    let abstract_states: Vec<Vector> = run
        .abstract_run
        .iter()
        .map(|&q| abs.system.states[q as usize].clone())
        .collect();
    let abstract_run_satisfies = eval_prefix(&abstract_states, &phi0)?;
    let sampled_satisfies = eval_prefix(&run.sampled, &phi0)?;
    let continuous_satisfies = eval_continuous(&run.dense, &phi0)?;

    Ok(JumpGapReport {
        initial_winning,
        abstract_run: run.abstract_run.clone(),
        abstract_run_satisfies,
        continuous_satisfies,
        sampled_satisfies,
        reproduced: initial_winning
            && abstract_run_satisfies == Some(true)
            && continuous_satisfies == Some(false),
    })
}

/// The full scalar pipeline in one call: parameters, abstraction,
/// transformed specification, synthesis, and the winning state nearest the
/// requested initial point.
pub struct ScalarPipeline {
    pub sys: LinearSystem,
    pub abs: Abstraction,
    pub phi0: Formula,
    pub spec_transformed: Formula,
    pub report: crate::game::WinningReport,
    pub q0: usize,
}

pub fn s1_pipeline() -> Result<ScalarPipeline> {
    let sys = scalar_s1();
    let params = s1_params(&sys)?;
    let abs = build_abstraction(&sys, &params, 8, false)?;
    let props = s1_propositions();
    let phi0 = parse(S1_SPEC, &props)?;
    let spec_transformed = tr_eps(&tr_delta(&phi0, params.delta)?, params.eps)?;
    let report = synthesize(&abs.system, &spec_transformed)?;
    let q0 = report
        .winning_states()
        .into_iter()
        .min_by(|&a, &b| {
            let da = (abs.system.states[a][0] - S1_INITIAL).abs();
            let db = (abs.system.states[b][0] - S1_INITIAL).abs();
            da.partial_cmp(&db).unwrap().then(a.cmp(&b))
        })
        .ok_or_else(|| crate::error::Error::Certification("scalar fixture has an empty winning set".into()))?;
    Ok(ScalarPipeline { sys, abs, phi0, spec_transformed, report, q0 })
}
