use std::path::Path;
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use symcon::abstraction::{build_abstraction, check_params, suggest_params, Params};
use symcon::fixtures;
use symcon::game::bisim::check_bisim;
use symcon::game::synthesize;
use symcon::logic::{tr_delta, tr_eps};
use symcon::plant::{check_stability, default_tau_grid, delta_bound};
use symcon::project::{svg_plot, write_atomic, AbstractionFile, ProjectFile, StrategyFile};
use symcon::runtime::{
    derive_controller, run_closed_loop, verdict, DisturbanceGenerator, GeneratorKind,
};

fn verdict_exit(ok: bool) -> ExitCode {
    if ok {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(1)
    }
}

/// Resolve the parameter block: explicit command-line values win over the
/// project file; anything still missing is filled by the search (which
/// needs at least eps).
fn resolve_params(
    sys: &mut symcon::LinearSystem,
    project: &ProjectFile,
    overrides: [Option<f64>; 5],
) -> Result<Params> {
    check_stability(sys, &default_tau_grid()).context("stability surrogate check")?;
    let [tau_o, eta_o, mu_o, eps_o, delta_o] = overrides;
    let spec = project.params.clone().unwrap_or_default();
    let tau = tau_o.or(spec.tau);
    let eta = eta_o.or(spec.eta);
    let mu = mu_o.or(spec.mu);
    let eps = eps_o.or(spec.eps);
    let delta = delta_o.or(spec.delta);

    if let (Some(tau), Some(eta), Some(mu), Some(eps)) = (tau, eta, mu, eps) {
        let delta = match delta {
            Some(d) => d,
            None => delta_bound(sys, tau)?.delta,
        };
        return Ok(Params { tau, eta, mu, eps, delta, certified: false });
    }
    let Some(eps) = eps else {
        bail!("parameters are incomplete: provide at least --eps (or an eps entry in the project) for the search");
    };
    let mut params = suggest_params(sys, eps).context("parameter search")?;
    if let Some(t) = tau {
        params.tau = t;
        params.delta = delta_bound(sys, t)?.delta;
    }
    if let Some(e) = eta {
        params.eta = e;
    }
    if let Some(m) = mu {
        params.mu = m;
    }
    if let Some(d) = delta {
        params.delta = d;
    }
    params.certified = false;
    Ok(params)
}

#[allow(clippy::too_many_arguments)]
pub fn cmd_abstract(
    project_path: &Path,
    out: &Path,
    overrides: [Option<f64>; 5],
    substeps: Option<usize>,
    force: bool,
) -> Result<ExitCode> {
    let project = ProjectFile::load(project_path)?;
    let mut sys = project.to_system()?;
    let mut params = resolve_params(&mut sys, &project, overrides)?;

    let cert = check_params(&sys, &params)?;
    params.certified = cert.passed;
    if !cert.passed {
        if !force {
            eprintln!(
                "certification failed: |e^(A tau)| eps + mu + eta/2 = {:.6} >= eps = {:.6}",
                cert.lhs, params.eps
            );
            return Ok(ExitCode::from(1));
        }
        log::warn!("building an uncertified abstraction (--force)");
    }

    let n_substeps = substeps.unwrap_or_else(|| project.n_substeps());
    let abs = build_abstraction(&sys, &params, n_substeps, force)?;
    AbstractionFile::from_abstraction(&abs).save(out)?;

    println!(
        "states {} | control labels {} | disturbance labels {} | transitions {}",
        abs.system.n_states(),
        abs.system.n_controls(),
        abs.system.n_disturbances(),
        abs.system.transitions().len()
    );
    println!(
        "certification margin {:.6} (norm {:.6}); blocking triples {}",
        cert.margin,
        cert.contraction_norm,
        abs.blocking.len()
    );
    println!("wrote {}", out.display());
    Ok(ExitCode::SUCCESS)
}

pub fn cmd_synth(project_path: &Path, abstraction: &Path, out: &Path) -> Result<ExitCode> {
    let project = ProjectFile::load(project_path)?;
    let abs = AbstractionFile::load(abstraction)?.to_abstraction()?;
    if !abs.params.certified {
        bail!("abstraction is not certified; rebuild with passing parameters");
    }
    let phi0 = project.parse_spec()?;
    let spec = tr_eps(&tr_delta(&phi0, abs.params.delta)?, abs.params.eps)?;
    let report = synthesize(&abs.system, &spec)?;

    let winning: Vec<(u32, u32)> = report
        .winning_states()
        .iter()
        .map(|&q| (q as u32, report.rank[q]))
        .collect();
    StrategyFile::from_strategy(&report.strategy, &winning).save(out)?;
    let csv_path = out.with_extension("winning.csv");
    write_atomic(&csv_path, &report.to_csv())?;

    let initial_winning = project.initial.as_ref().map(|x0| {
        abs.nearest_state(x0)
            .map(|(q, _)| report.winning[q])
            .unwrap_or(false)
    });
    println!(
        "winning states {} of {} | fixpoint iterations {}",
        winning.len(),
        abs.system.n_states(),
        report.iterations
    );
    match initial_winning {
        Some(true) => println!("requested initial state: winning"),
        Some(false) => println!("requested initial state: not winning"),
        None => println!("no initial state requested"),
    }
    println!("wrote {} and {}", out.display(), csv_path.display());
    Ok(verdict_exit(!winning.is_empty()))
}

#[derive(Serialize)]
struct RunSummary {
    runs: usize,
    satisfied: usize,
    inconclusive: usize,
    violated: usize,
    deviation_ok: usize,
    chain_ok: usize,
    max_matcher_distance: f64,
    max_intersample_deviation: f64,
    delta: f64,
    eps: f64,
    seed: u64,
    generator: GeneratorKind,
}

#[allow(clippy::too_many_arguments)]
pub fn cmd_simulate(
    project_path: &Path,
    abstraction: &Path,
    strategy_path: &Path,
    runs: usize,
    steps: usize,
    seed: u64,
    kind: GeneratorKind,
    out_dir: &Path,
    svg: bool,
) -> Result<ExitCode> {
    let project = ProjectFile::load(project_path)?;
    let mut sys = project.to_system()?;
    check_stability(&mut sys, &default_tau_grid())?;
    let abs = AbstractionFile::load(abstraction)?.to_abstraction()?;
    let strategy_file = StrategyFile::load(strategy_path)?;
    let strategy = strategy_file.to_strategy();
    let phi0 = project.parse_spec()?;

    if strategy_file.winning.is_empty() {
        bail!("strategy file carries an empty winning set; nothing to simulate");
    }
    // initial abstraction state: winning state nearest the requested point
    let target = project
        .initial
        .clone()
        .unwrap_or_else(|| vec![0.0; sys.dim()]);
    let q0 = strategy_file
        .winning
        .iter()
        .map(|&(q, _)| q as usize)
        .min_by(|&a, &b| {
            let da = symcon::numerics::dist(&abs.system.states[a], &target);
            let db = symcon::numerics::dist(&abs.system.states[b], &target);
            da.partial_cmp(&db).unwrap().then(a.cmp(&b))
        })
        .expect("nonempty winning set");

    let ctrl = derive_controller(&sys, &abs, q0, &strategy, project.n_substeps(), project.dense_substeps())?;
    std::fs::create_dir_all(out_dir)?;

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let q0_state = abs.system.states[q0].clone();
    let eps = abs.params.eps;
    let mut summary = RunSummary {
        runs,
        satisfied: 0,
        inconclusive: 0,
        violated: 0,
        deviation_ok: 0,
        chain_ok: 0,
        max_matcher_distance: 0.0,
        max_intersample_deviation: 0.0,
        delta: abs.params.delta,
        eps,
        seed,
        generator: kind,
    };

    for run_idx in 0..runs {
        // initial plant state in the eps-ball around q0, inside X
        let mut x0 = q0_state.clone();
        for _ in 0..128 {
            x0 = q0_state.iter().map(|&c| c + rng.gen_range(-eps..=eps)).collect();
            if sys.x_space.contains(&x0) {
                break;
            }
            x0 = q0_state.clone();
        }
        let mut gen = DisturbanceGenerator::from_kind(kind, seed.wrapping_add(run_idx as u64));
        let run = run_closed_loop(&sys, &abs, &ctrl, &x0, &mut gen, steps)?;
        let v = verdict(&run, &abs, &phi0, abs.params.delta)?;

        match v.continuous_box {
            Some(true) => summary.satisfied += 1,
            Some(false) => summary.violated += 1,
            None => summary.inconclusive += 1,
        }
        if v.deviation_ok {
            summary.deviation_ok += 1;
        }
        if v.chain_ok {
            summary.chain_ok += 1;
        }
        summary.max_matcher_distance = summary.max_matcher_distance.max(v.matcher_distance_max);
        summary.max_intersample_deviation = summary.max_intersample_deviation.max(v.max_deviation);

        write_atomic(&out_dir.join(format!("run_{run_idx:03}.csv")), &run.to_csv())?;
        write_atomic(
            &out_dir.join(format!("run_{run_idx:03}.verdict.json")),
            &serde_json::to_string_pretty(&v)?,
        )?;
        if svg {
            let curves: Vec<(String, Vec<(f64, f64)>)> = (0..sys.dim())
                .map(|d| {
                    (
                        format!("x{d}"),
                        run.dense
                            .times
                            .iter()
                            .zip(&run.dense.states)
                            .map(|(&t, s)| (t, s[d]))
                            .collect(),
                    )
                })
                .collect();
            let named: Vec<(&str, Vec<(f64, f64)>)> =
                curves.iter().map(|(n, c)| (n.as_str(), c.clone())).collect();
            write_atomic(
                &out_dir.join(format!("run_{run_idx:03}.svg")),
                &svg_plot(&named, &format!("closed loop, run {run_idx}")),
            )?;
        }
    }

    write_atomic(&out_dir.join("summary.json"), &serde_json::to_string_pretty(&summary)?)?;
    println!(
        "runs {} | satisfied {} | inconclusive {} | violated {} | deviation ok {} | chain ok {}",
        summary.runs, summary.satisfied, summary.inconclusive, summary.violated,
        summary.deviation_ok, summary.chain_ok
    );
    println!(
        "max matcher distance {:.6} (eps {:.6}) | max deviation {:.6} (delta {:.6})",
        summary.max_matcher_distance, eps, summary.max_intersample_deviation, summary.delta
    );
    Ok(verdict_exit(summary.violated == 0))
}

pub fn cmd_check_bisim(abs1: &Path, abs2: &Path, eps: f64) -> Result<ExitCode> {
    let a1 = AbstractionFile::load(abs1)?.to_abstraction()?;
    let a2 = AbstractionFile::load(abs2)?.to_abstraction()?;
    let rel = check_bisim(&a1.system, &a2.system, eps)?;
    println!(
        "relation pairs {} | left states {} | right states {} | bisimilar: {}",
        rel.pairs.len(),
        a1.system.n_states(),
        a2.system.n_states(),
        rel.total
    );
    Ok(verdict_exit(rel.total))
}

pub fn cmd_counterexample(which: &str, out: Option<&Path>, seed: u64) -> Result<ExitCode> {
    let (json, reproduced) = match which {
        "tp1" => {
            let rep = fixtures::run_region_gap()?;
            println!(
                "raw-spec synthesis on the abstraction: winning states = {} (of {})",
                rep.winning_states, rep.n_states
            );
            println!(
                "continuous witness {:?} satisfies the raw spec: {:?}",
                rep.witness_state, rep.witness_satisfies
            );
            println!("gap reproduced: {}", rep.reproduced);
            (serde_json::to_string_pretty(&rep)?, rep.reproduced)
        }
        "tp2" => {
            let rep = fixtures::run_jump_gap(seed)?;
            println!(
                "abstraction wins the raw spec from the initial state: {}",
                rep.initial_winning
            );
            println!(
                "paired abstract run satisfies it: {:?}; continuous run satisfies it: {:?}",
                rep.abstract_run_satisfies, rep.continuous_satisfies
            );
            println!("gap reproduced: {}", rep.reproduced);
            (serde_json::to_string_pretty(&rep)?, rep.reproduced)
        }
        other => bail!("unknown demonstration `{other}`"),
    };
    if let Some(path) = out {
        let file = path.join(format!("{which}.json"));
        write_atomic(&file, &json)?;
        println!("wrote {}", file.display());
    }
    Ok(verdict_exit(reproduced))
}
