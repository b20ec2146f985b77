//! The four batch commands behind the binary: abstract, synthesize,
//! simulate and verify-frr. The functions are plain library calls so the
//! test suites can drive them directly.

use std::path::Path;
use std::time::{Duration, Instant};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use symcon_core::abstraction::compute_transitions;
use symcon_core::relations::{check_frr, parse_finite_system, parse_relation, FrrWitness};
use symcon_core::runtime::{
    check_trace, simulate, trace_to_csv, ClosedLoop, ClosedLoopSpec, InputSelect, TraceVerdict,
    Termination,
};
use symcon_core::synthesis::{solve_reach_avoid, solve_recurrence, solve_safety, Controller};
use symcon_core::{FiniteSystem, SpecKind};

use crate::format::{self, TransitionsMeta};
use crate::problem::{Problem, SchemaError};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error(transparent)]
    Schema(#[from] SchemaError),
    #[error("{0}")]
    Mismatch(String),
    #[error(transparent)]
    Format(#[from] crate::format::FormatError),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("internal error: {0}")]
    Internal(String),
}

impl CliError {
    /// Process exit code: 2 for schema/compatibility problems, 4 otherwise.
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Schema(_) | CliError::Mismatch(_) => 2,
            CliError::Format(_) | CliError::Io(_) | CliError::Internal(_) => 4,
        }
    }
}

#[derive(Debug)]
pub struct AbstractStats {
    pub cells: u32,
    pub pairs: u64,
    pub admissible_pairs: u64,
    pub transitions: u64,
    pub wall: Duration,
}

/// Computes the abstraction of a problem and writes the transition artifact.
pub fn cmd_abstract(
    problem: &Problem,
    out: &Path,
    workers: usize,
) -> Result<AbstractStats, CliError> {
    let spec = problem.abstraction_spec();
    let start = Instant::now();
    let sys = run_with_workers(workers, || compute_transitions(&spec))
        .map_err(|e| CliError::Internal(e.to_string()))?;
    let wall = start.elapsed();
    let meta = TransitionsMeta {
        tau: problem.sampling.tau,
        substeps: problem.sampling.substeps,
        w: problem.disturbance.radius().to_vec(),
        inputs: problem.inputs.clone(),
    };
    format::write_transitions(out, &sys, &meta)?;
    Ok(AbstractStats {
        cells: problem.grid.n_cells(),
        pairs: sys.n_pairs() as u64,
        admissible_pairs: sys.admissible_pair_count(),
        transitions: sys.transition_count(),
        wall,
    })
}

/// Runs a job inside a dedicated pool of `workers` threads; 0 means the
/// global default.
fn run_with_workers<T: Send>(workers: usize, job: impl FnOnce() -> T + Send) -> T {
    if workers == 0 {
        return job();
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .expect("worker pool");
    pool.install(job)
}

fn check_compatible(problem: &Problem, meta: &TransitionsMeta, grid_ok: bool) -> Result<(), CliError> {
    if !grid_ok {
        return Err(CliError::Mismatch(
            "transition artifact grid does not match the problem".into(),
        ));
    }
    if meta.tau != problem.sampling.tau
        || meta.substeps != problem.sampling.substeps
        || meta.w != problem.disturbance.radius()
        || meta.inputs != problem.inputs
    {
        return Err(CliError::Mismatch(
            "transition artifact sampling/input data does not match the problem".into(),
        ));
    }
    Ok(())
}

#[derive(Debug)]
pub struct SynthStats {
    pub winning: u64,
    pub domain: u64,
    pub iterations: u32,
    pub initial_total: usize,
    pub initial_winning: usize,
    pub wall: Duration,
}

impl SynthStats {
    /// The problem is solvable as posed: a non-empty winning set containing
    /// every initial cell.
    pub fn solved(&self) -> bool {
        self.winning > 0 && self.initial_total == self.initial_winning && self.initial_total > 0
    }
}

/// Solves the abstract control problem on a previously computed transition
/// table and writes the controller file.
pub fn cmd_synthesize(
    problem: &Problem,
    transitions: &Path,
    out: &Path,
) -> Result<SynthStats, CliError> {
    let (sys, meta) = format::read_transitions(transitions)?;
    let grid_ok = sys.grid() == Some(&problem.grid);
    check_compatible(problem, &meta, grid_ok)?;
    let avoid = {
        let mut m = problem.avoid_cells();
        m.resize(sys.n_states() as usize, false);
        m
    };
    let start = Instant::now();
    let (winning, controller, iterations): (Vec<bool>, Controller, u32) = match problem.kind {
        SpecKind::Safety => {
            let safe: Vec<bool> = avoid.iter().map(|&a| !a).collect();
            let res = solve_safety(&sys, &safe).map_err(|e| CliError::Internal(e.to_string()))?;
            (res.winning.member, res.controller, res.iterations)
        }
        SpecKind::ReachAvoid => {
            let target = &problem.target_cells()[0];
            let res = solve_reach_avoid(&sys, target, &avoid)
                .map_err(|e| CliError::Internal(e.to_string()))?;
            (res.winning.member, res.controller, res.iterations)
        }
        SpecKind::Recurrence => {
            let targets = problem.target_cells();
            let res = solve_recurrence(&sys, &targets, &avoid)
                .map_err(|e| CliError::Internal(e.to_string()))?;
            (res.winning.member, res.controller, res.outer_iterations)
        }
    };
    let wall = start.elapsed();
    format::write_controller(out, &controller, &problem.inputs)?;
    let initial = problem.initial_cells();
    let initial_winning = initial
        .iter()
        .filter(|c| winning[c.index()])
        .count();
    Ok(SynthStats {
        winning: winning.iter().filter(|&&m| m).count() as u64,
        domain: controller.domain_size(),
        iterations,
        initial_total: initial.len(),
        initial_winning,
        wall,
    })
}

#[derive(Debug)]
pub struct SimStats {
    pub runs: u32,
    pub satisfied: u32,
    pub outside_domain: u32,
    pub blocked: u32,
}

/// Runs seeded closed-loop simulations, writes one CSV per run and checks
/// the specification predicate on each trace.
pub fn cmd_simulate(
    problem: &Problem,
    controller_path: &Path,
    runs: u32,
    horizon: u32,
    out_dir: &Path,
    seed: Option<u64>,
    random_inputs: bool,
) -> Result<SimStats, CliError> {
    let (ctrl, ctrl_inputs) = format::read_controller(controller_path)?;
    if ctrl.grid() != &problem.grid {
        return Err(CliError::Mismatch(
            "controller grid does not match the problem".into(),
        ));
    }
    if ctrl_inputs != problem.inputs {
        return Err(CliError::Mismatch(
            "controller input list does not match the problem".into(),
        ));
    }
    if ctrl.kind() != problem.kind {
        return Err(CliError::Mismatch(
            "controller spec kind does not match the problem".into(),
        ));
    }
    problem
        .perturbation
        .validate_measurement(&problem.grid)
        .map_err(|e| CliError::Mismatch(e.to_string()))?;
    std::fs::create_dir_all(out_dir)?;
    let cls = ClosedLoopSpec {
        kind: problem.kind,
        target_cells: problem.target_cells(),
    };
    let loop_ = ClosedLoop {
        vf: problem.plant.vector_field(),
        inputs: &problem.inputs,
        sampling: problem.sampling,
        disturbance: problem.disturbance.radius(),
        pert: &problem.perturbation,
        spec: &cls,
        select: if random_inputs {
            InputSelect::UniformRandom
        } else {
            InputSelect::Lowest
        },
    };
    let base_seed = seed.unwrap_or(problem.seed);
    let mut stats = SimStats {
        runs,
        satisfied: 0,
        outside_domain: 0,
        blocked: 0,
    };
    let boxes = &problem.initial_boxes;
    for r in 0..runs {
        let mut rng = ChaCha8Rng::seed_from_u64(base_seed.wrapping_add(r as u64));
        // initial state: cycle through the initial boxes, uniform inside
        let b = &boxes[r as usize % boxes.len()];
        let x0: Vec<f64> = (0..problem.grid.dim())
            .map(|d| {
                use rand::Rng;
                if b.ub()[d] > b.lb()[d] {
                    rng.gen_range(b.lb()[d]..=b.ub()[d])
                } else {
                    b.lb()[d]
                }
            })
            .collect();
        let trace = simulate(&loop_, &ctrl, &x0, horizon, &mut rng);
        match trace.termination {
            Termination::OutsideDomain => stats.outside_domain += 1,
            Termination::BlockedPlant => stats.blocked += 1,
            Termination::Live => {}
        }
        let verdict = check_trace(&trace, &problem.regions, &problem.grid, problem.cycles);
        if verdict == TraceVerdict::Satisfied && trace.termination == Termination::Live {
            stats.satisfied += 1;
        }
        let csv = trace_to_csv(
            &trace,
            problem.grid.dim(),
            problem.inputs.first().map(|u| u.len()).unwrap_or(0),
        );
        std::fs::write(out_dir.join(format!("trace_{r:03}.csv")), csv)?;
    }
    Ok(stats)
}

pub enum FrrReport {
    Holds,
    Violated(FrrWitness),
}

/// Checks a refinement-relation fixture triple from plain-text files.
pub fn cmd_verify_frr(
    s1_path: &Path,
    s2_path: &Path,
    relation_path: &Path,
) -> Result<FrrReport, CliError> {
    let read = |p: &Path| -> Result<String, CliError> { Ok(std::fs::read_to_string(p)?) };
    let s1 = parse_finite_system(&read(s1_path)?)
        .map_err(|e| CliError::Schema(SchemaError::Invalid(e.to_string())))?;
    let s2 = parse_finite_system(&read(s2_path)?)
        .map_err(|e| CliError::Schema(SchemaError::Invalid(e.to_string())))?;
    let q = parse_relation(&read(relation_path)?)
        .map_err(|e| CliError::Schema(SchemaError::Invalid(e.to_string())))?;
    if q.n1 != s1.n_states() || q.n2 != s2.n_states() {
        return Err(CliError::Mismatch(
            "relation shape does not match the systems".into(),
        ));
    }
    if s2.n_inputs() > s1.n_inputs() {
        return Err(CliError::Mismatch(
            "abstract inputs must embed into the concrete inputs".into(),
        ));
    }
    if !q.is_strict() {
        return Err(CliError::Mismatch("the relation must be strict".into()));
    }
    Ok(match check_frr(&s1, &s2, &q) {
        Ok(()) => FrrReport::Holds,
        Err(w) => FrrReport::Violated(w),
    })
}

/// Convenience used by tests: abstraction straight to a finite system.
pub fn abstract_in_memory(problem: &Problem, workers: usize) -> Result<FiniteSystem, CliError> {
    let spec = problem.abstraction_spec();
    run_with_workers(workers, || compute_transitions(&spec))
        .map_err(|e| CliError::Internal(e.to_string()))
}
