//! Refinement of the abstract controller through a static quantizer, and
//! simulation of the perturbed closed loop.
//!
//! One control period: measure the state through the measurement error
//! channel, quantize, look the cell up in the active controller table, apply
//! the commanded input through the input disturbance channel, and integrate
//! the plant for one sampling period under a piecewise-constant additive
//! disturbance. The step function consults nothing but the current
//! measurement and the active target index.
//!
//! Simulated trace checks are evidence, not proof: the integrator is a
//! fixed-step scheme and disturbance signals are piecewise constant, a dense
//! subclass of the signals the guarantees quantify over.

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;

use crate::grid::{HyperInterval, Quantized, UniformGridCover};
use crate::odeint::{self, SamplingConfig, VectorField};
use crate::synthesis::Controller;
use crate::system::SpecKind;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum RuntimeError {
    #[error("measurement error radius exceeds the grid inflation in dimension {dim}")]
    MeasurementExceedsInflation { dim: usize },
    #[error("runtime configuration mismatch: {0}")]
    Shape(&'static str),
}

/// Input and measurement perturbation channels.
///
/// `P₁(u) = (u + ⟦−p1, p1⟧) ∩ U` on the input side and
/// `P₂(x) = x + ⟦−p2, p2⟧` on the measurement side; the output channels are
/// identities here.
#[derive(Clone, Debug, PartialEq)]
pub struct PerturbationConfig {
    pub p1: Vec<f64>,
    pub p2: Vec<f64>,
    /// The admissible input box `U` that `P₁` intersects with, when bounded.
    pub input_bounds: Option<HyperInterval>,
}

impl PerturbationConfig {
    pub fn new(p1: Vec<f64>, p2: Vec<f64>) -> Result<Self, RuntimeError> {
        if p1.iter().chain(&p2).any(|&v| !(v >= 0.0) || !v.is_finite()) {
            return Err(RuntimeError::Shape("perturbation radii must be >= 0"));
        }
        Ok(Self {
            p1,
            p2,
            input_bounds: None,
        })
    }

    pub fn none(input_dim: usize, state_dim: usize) -> Self {
        Self {
            p1: vec![0.0; input_dim],
            p2: vec![0.0; state_dim],
            input_bounds: None,
        }
    }

    pub fn with_input_bounds(mut self, bounds: HyperInterval) -> Self {
        self.input_bounds = Some(bounds);
        self
    }

    /// The refinement guarantee requires the measurement error to be
    /// absorbed by the cell inflation used at abstraction time; violating
    /// this voids the guarantee and is rejected.
    pub fn validate_measurement(&self, grid: &UniformGridCover) -> Result<(), RuntimeError> {
        if self.p2.len() != grid.dim() {
            return Err(RuntimeError::Shape("measurement radius dimension mismatch"));
        }
        for d in 0..grid.dim() {
            if self.p2[d] > grid.inflation()[d] {
                return Err(RuntimeError::MeasurementExceedsInflation { dim: d });
            }
        }
        Ok(())
    }
}

/// Target cell sets as the runtime sees them (recomputed from the problem
/// regions; empty for safety).
#[derive(Clone, Debug)]
pub struct ClosedLoopSpec {
    pub kind: SpecKind,
    pub target_cells: Vec<Vec<bool>>,
}

/// How the step function picks among the stored admissible inputs.
#[derive(Copy, Clone, Debug, PartialEq, Eq)]
pub enum InputSelect {
    /// Deterministic lowest stored id.
    Lowest,
    /// Uniformly random among the stored ids, for robustness stress tests.
    UniformRandom,
}

/// Outcome of one refined controller step.
#[derive(Clone, Debug, PartialEq)]
pub enum StepOutcome {
    Command {
        input: u32,
        cell: u32,
        /// Active target index for the *next* step.
        next_target: u32,
        /// The measurement this command was derived from.
        measured: Vec<f64>,
    },
    /// Reach-avoid only: the measured cell lies in the target layer, the
    /// objective is fulfilled.
    TargetReached { cell: u32, measured: Vec<f64> },
    /// The measured cell is not in the controller domain (or overflowed).
    OutsideDomain { measured: Vec<f64> },
}

/// One step of the refined controller `C ∘ Q ∘ P₂`: samples the measurement
/// error, quantizes, and selects an input from the table of the active
/// target.
pub fn refined_step<R: Rng + ?Sized>(
    ctrl: &Controller,
    spec: &ClosedLoopSpec,
    x: &[f64],
    active_target: u32,
    pert: &PerturbationConfig,
    select: InputSelect,
    rng: &mut R,
) -> StepOutcome {
    let grid = ctrl.grid();
    debug_assert_eq!(x.len(), grid.dim());
    let mut measured = x.to_vec();
    for d in 0..measured.len() {
        if pert.p2[d] > 0.0 {
            measured[d] += rng.gen_range(-pert.p2[d]..=pert.p2[d]);
        }
    }
    let cell = match grid.cell_of_point(&measured) {
        Quantized::Cell(c) => c,
        Quantized::Overflow => return StepOutcome::OutsideDomain { measured },
    };
    let mut table = active_target as usize;
    let mut next_target = active_target;
    match spec.kind {
        SpecKind::Safety => {}
        SpecKind::ReachAvoid => {
            if spec.target_cells[0][cell.index()] {
                return StepOutcome::TargetReached {
                    cell: cell.0,
                    measured,
                };
            }
        }
        SpecKind::Recurrence => {
            // entering the active target's entry layer: act with the stored
            // ◇Z witness and advance the patrol index afterwards
            if spec.target_cells[table][cell.index()] && ctrl.has_record(table, cell) {
                next_target = (active_target + 1) % ctrl.n_tables() as u32;
            }
            table = active_target as usize;
        }
    }
    let inputs = ctrl.inputs(table, cell);
    if inputs.is_empty() {
        return StepOutcome::OutsideDomain { measured };
    }
    let input = match select {
        InputSelect::Lowest => inputs[0],
        InputSelect::UniformRandom => inputs[rng.gen_range(0..inputs.len())],
    };
    StepOutcome::Command {
        input,
        cell: cell.0,
        next_target,
        measured,
    }
}

/// Why a simulation stopped.
#[derive(Copy, Clone, Debug, PartialEq, Eq)]
pub enum Termination {
    /// Ran to the step horizon, or fulfilled a reach objective.
    Live,
    /// The plant integration blew up.
    BlockedPlant,
    /// A measurement left the controller domain.
    OutsideDomain,
}

/// Log of one closed-loop run. Per completed step `t` the record holds the
/// state entering the step, the measurement, the commanded and the applied
/// input, the measured cell and the active target index; `states` carries
/// one final entry for the landing state.
#[derive(Clone, Debug, PartialEq)]
pub struct TraceRecord {
    pub times: Vec<f64>,
    pub states: Vec<Vec<f64>>,
    pub measured: Vec<Vec<f64>>,
    pub commanded: Vec<Vec<f64>>,
    pub applied: Vec<Vec<f64>>,
    pub cells: Vec<u32>,
    pub target_index: Vec<u32>,
    pub termination: Termination,
    /// Reach-avoid: the run ended because the measured cell entered the
    /// target layer.
    pub reached_target: bool,
}

impl TraceRecord {
    pub fn steps(&self) -> usize {
        self.applied.len()
    }
}

/// The plant side of the loop plus all perturbation channels.
pub struct ClosedLoop<'a> {
    pub vf: &'a dyn VectorField,
    /// Input id to input vector map (the finite input alphabet).
    pub inputs: &'a [Vec<f64>],
    pub sampling: SamplingConfig,
    /// Additive plant disturbance radius `w` of `ẋ ∈ f(x,u) + ⟦−w,w⟧`.
    pub disturbance: &'a [f64],
    pub pert: &'a PerturbationConfig,
    pub spec: &'a ClosedLoopSpec,
    pub select: InputSelect,
}

/// Runs the perturbed closed loop for at most `steps` sampling periods.
///
/// Per period the disturbance is resampled on every integrator substep;
/// identical seeds yield identical traces.
pub fn simulate<R: Rng + ?Sized>(
    loop_: &ClosedLoop,
    ctrl: &Controller,
    x0: &[f64],
    steps: u32,
    rng: &mut R,
) -> TraceRecord {
    let mut trace = TraceRecord {
        times: Vec::new(),
        states: vec![x0.to_vec()],
        measured: Vec::new(),
        commanded: Vec::new(),
        applied: Vec::new(),
        cells: Vec::new(),
        target_index: Vec::new(),
        termination: Termination::Live,
        reached_target: false,
    };
    let mut x = x0.to_vec();
    let mut active = 0u32;
    let tau = loop_.sampling.tau;
    for t in 0..steps {
        let outcome = refined_step(ctrl, loop_.spec, &x, active, loop_.pert, loop_.select, rng);
        match outcome {
            StepOutcome::OutsideDomain { measured } => {
                trace.measured.push(measured);
                trace.termination = Termination::OutsideDomain;
                return trace;
            }
            StepOutcome::TargetReached { cell, measured } => {
                trace.measured.push(measured);
                trace.cells.push(cell);
                trace.reached_target = true;
                return trace;
            }
            StepOutcome::Command {
                input,
                cell,
                next_target,
                measured,
            } => {
                let commanded = loop_.inputs[input as usize].clone();
                let mut applied = commanded.clone();
                for d in 0..applied.len() {
                    if loop_.pert.p1[d] > 0.0 {
                        applied[d] += rng.gen_range(-loop_.pert.p1[d]..=loop_.pert.p1[d]);
                    }
                }
                if let Some(bounds) = &loop_.pert.input_bounds {
                    for d in 0..applied.len() {
                        applied[d] = applied[d].clamp(bounds.lb()[d], bounds.ub()[d]);
                    }
                }
                let landed = odeint::flow_perturbed(
                    loop_.vf,
                    &x,
                    &applied,
                    loop_.disturbance,
                    tau,
                    loop_.sampling.substeps,
                    1,
                    rng,
                );
                trace.times.push(t as f64 * tau);
                trace.measured.push(measured);
                trace.commanded.push(commanded);
                trace.applied.push(applied);
                trace.cells.push(cell);
                trace.target_index.push(active);
                match landed {
                    Ok(next) => {
                        trace.states.push(next.clone());
                        x = next;
                        active = next_target;
                    }
                    Err(_) => {
                        trace.termination = Termination::BlockedPlant;
                        return trace;
                    }
                }
            }
        }
    }
    trace
}

/// Concrete specification regions, evaluated point-wise on traces.
#[derive(Clone, Debug)]
pub struct SpecRegions {
    pub kind: SpecKind,
    /// The avoid set as a union of boxes.
    pub avoid: Vec<HyperInterval>,
    /// When present, everything outside this union is also avoided.
    pub safe: Option<Vec<HyperInterval>>,
    /// One union of boxes per target.
    pub targets: Vec<Vec<HyperInterval>>,
}

impl SpecRegions {
    fn in_avoid(&self, x: &[f64]) -> bool {
        if self.avoid.iter().any(|b| b.contains(x)) {
            return true;
        }
        if let Some(safe) = &self.safe {
            if !safe.iter().any(|b| b.contains(x)) {
                return true;
            }
        }
        false
    }

    fn in_target(&self, i: usize, x: &[f64]) -> bool {
        self.targets[i].iter().any(|b| b.contains(x))
    }
}

#[derive(Copy, Clone, Debug, PartialEq, Eq)]
pub enum ViolationReason {
    /// The trace entered the avoid set.
    Avoid,
    /// A reach trace never entered the target.
    NeverReached,
    /// A recurrence trace missed the required visit count for a target.
    TooFewVisits { target: u32, visits: u32 },
}

#[derive(Copy, Clone, Debug, PartialEq, Eq)]
pub enum TraceVerdict {
    Satisfied,
    Violated { step: usize, reason: ViolationReason },
}

/// Evaluates the specification predicate on a concrete state trace.
/// Periodic coordinates are wrapped into the grid window first.
///
/// For recurrence, `cycles` is the number of times every target must be
/// visited within the horizon (an entry into the target region counts as
/// one visit).
pub fn check_trace(
    trace: &TraceRecord,
    regions: &SpecRegions,
    grid: &UniformGridCover,
    cycles: u32,
) -> TraceVerdict {
    let states: Vec<Vec<f64>> = trace.states.iter().map(|x| grid.wrap_point(x)).collect();
    match regions.kind {
        SpecKind::Safety => {
            for (t, x) in states.iter().enumerate() {
                if regions.in_avoid(x) {
                    return TraceVerdict::Violated {
                        step: t,
                        reason: ViolationReason::Avoid,
                    };
                }
            }
            TraceVerdict::Satisfied
        }
        SpecKind::ReachAvoid => {
            for (t, x) in states.iter().enumerate() {
                if regions.in_target(0, x) {
                    return TraceVerdict::Satisfied;
                }
                if regions.in_avoid(x) {
                    return TraceVerdict::Violated {
                        step: t,
                        reason: ViolationReason::Avoid,
                    };
                }
            }
            TraceVerdict::Violated {
                step: states.len().saturating_sub(1),
                reason: ViolationReason::NeverReached,
            }
        }
        SpecKind::Recurrence => {
            for (t, x) in states.iter().enumerate() {
                if regions.in_avoid(x) {
                    return TraceVerdict::Violated {
                        step: t,
                        reason: ViolationReason::Avoid,
                    };
                }
            }
            for i in 0..regions.targets.len() {
                let mut visits = 0u32;
                let mut inside = false;
                for x in &states {
                    let now = regions.in_target(i, x);
                    if now && !inside {
                        visits += 1;
                    }
                    inside = now;
                }
                if visits < cycles {
                    return TraceVerdict::Violated {
                        step: states.len().saturating_sub(1),
                        reason: ViolationReason::TooFewVisits {
                            target: i as u32,
                            visits,
                        },
                    };
                }
            }
            TraceVerdict::Satisfied
        }
    }
}

/// Renders a trace as CSV: one row per completed step with columns
/// `t, x1..xn, xhat1..xhatn, u1..um, cell_id, target_idx`, and trailer
/// comment lines carrying the final state and the termination cause.
pub fn trace_to_csv(trace: &TraceRecord, state_dim: usize, input_dim: usize) -> String {
    use core::fmt::Write;
    let mut out = String::new();
    let _ = write!(out, "t");
    for d in 1..=state_dim {
        let _ = write!(out, ",x{d}");
    }
    for d in 1..=state_dim {
        let _ = write!(out, ",xhat{d}");
    }
    for d in 1..=input_dim {
        let _ = write!(out, ",u{d}");
    }
    let _ = writeln!(out, ",cell_id,target_idx");
    for t in 0..trace.steps() {
        let _ = write!(out, "{}", trace.times[t]);
        for v in &trace.states[t] {
            let _ = write!(out, ",{v}");
        }
        for v in &trace.measured[t] {
            let _ = write!(out, ",{v}");
        }
        for v in &trace.applied[t] {
            let _ = write!(out, ",{v}");
        }
        let _ = writeln!(out, ",{},{}", trace.cells[t], trace.target_index[t]);
    }
    if let Some(last) = trace.states.last() {
        let _ = write!(out, "# final_state");
        for v in last {
            let _ = write!(out, " {v}");
        }
        let _ = writeln!(out);
    }
    let term = match trace.termination {
        Termination::Live => "Live",
        Termination::BlockedPlant => "BlockedPlant",
        Termination::OutsideDomain => "OutsideDomain",
    };
    let _ = writeln!(out, "# termination {term}");
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::abstraction::{compute_transitions, AbstractionSpec};
    use crate::grid::CellId;
    use crate::odeint::Disturbance;
    use crate::plants::{Affine, ConstantLipschitz};
    use crate::synthesis;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn grid_1d(n: u32, inflation: f64) -> UniformGridCover {
        UniformGridCover::new(vec![0.0], vec![0.25], vec![n], vec![false], vec![inflation])
            .unwrap()
    }

    /// Contraction toward the middle of the 8-cell grid, so the safety game
    /// is winnable everywhere (a drift-free plant would lose the whole
    /// domain to face-sharing successor boxes cascading from the border).
    fn contracting() -> (Affine, ConstantLipschitz) {
        let vf = Affine::new(1, 1, vec![-1.0], vec![0.0], vec![0.875]).unwrap();
        let lip = vf.induced_lipschitz();
        (vf, lip)
    }

    #[test]
    fn measurement_radius_must_fit_inflation() {
        let grid = grid_1d(4, 0.01);
        let ok = PerturbationConfig::new(vec![0.0], vec![0.01]).unwrap();
        assert!(ok.validate_measurement(&grid).is_ok());
        let bad = PerturbationConfig::new(vec![0.0], vec![0.02]).unwrap();
        assert_eq!(
            bad.validate_measurement(&grid),
            Err(RuntimeError::MeasurementExceedsInflation { dim: 0 })
        );
    }

    #[test]
    fn zero_perturbation_step_returns_first_stored_input() {
        let (vf, lip) = contracting();
        let spec = AbstractionSpec::new(
            grid_1d(8, 0.0),
            vec![vec![0.0]],
            &vf,
            &lip,
            Disturbance::zero(1),
            SamplingConfig::new(1.0, 5).unwrap(),
        )
        .unwrap();
        let sys = compute_transitions(&spec).unwrap();
        let res = synthesis::solve_safety(&sys, &vec![true; 8]).unwrap();
        let cls = ClosedLoopSpec {
            kind: SpecKind::Safety,
            target_cells: Vec::new(),
        };
        let pert = PerturbationConfig::none(1, 1);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let x = spec.grid.cell_center(CellId(3));
        match refined_step(&res.controller, &cls, &x, 0, &pert, InputSelect::Lowest, &mut rng) {
            StepOutcome::Command { input, cell, .. } => {
                assert_eq!(input, 0);
                assert_eq!(cell, 3);
            }
            other => panic!("unexpected outcome {other:?}"),
        }
    }

    #[test]
    fn near_face_measurements_hit_either_neighbour_and_both_act() {
        // inflated grid so both neighbouring cells absorb the measurement
        let (vf, lip) = contracting();
        let grid = grid_1d(8, 0.02);
        let spec = AbstractionSpec::new(
            grid.clone(),
            vec![vec![0.0]],
            &vf,
            &lip,
            Disturbance::zero(1),
            SamplingConfig::new(1.0, 5).unwrap(),
        )
        .unwrap();
        let sys = compute_transitions(&spec).unwrap();
        let res = synthesis::solve_safety(&sys, &vec![true; 8]).unwrap();
        let cls = ClosedLoopSpec {
            kind: SpecKind::Safety,
            target_cells: Vec::new(),
        };
        let pert = PerturbationConfig::new(vec![0.0], vec![0.02]).unwrap();
        pert.validate_measurement(&grid).unwrap();
        // a state on the shared face of cells 3 and 4
        let face = 0.5 * (grid.cell_center(CellId(3))[0] + grid.cell_center(CellId(4))[0]);
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        let mut seen = [false; 2];
        for _ in 0..64 {
            match refined_step(
                &res.controller,
                &cls,
                &[face],
                0,
                &pert,
                InputSelect::Lowest,
                &mut rng,
            ) {
                StepOutcome::Command { cell, .. } => {
                    assert!(cell == 3 || cell == 4);
                    seen[(cell - 3) as usize] = true;
                }
                other => panic!("measurement left the domain: {other:?}"),
            }
        }
        assert!(seen[0] && seen[1], "both neighbouring measurements occur");
    }

    #[test]
    fn simulate_contracting_loop_is_live_and_reproducible() {
        let (vf, lip) = contracting();
        let grid = grid_1d(8, 0.0);
        let spec = AbstractionSpec::new(
            grid.clone(),
            vec![vec![0.0]],
            &vf,
            &lip,
            Disturbance::zero(1),
            SamplingConfig::new(1.0, 5).unwrap(),
        )
        .unwrap();
        let sys = compute_transitions(&spec).unwrap();
        let res = synthesis::solve_safety(&sys, &vec![true; 8]).unwrap();
        assert!(!res.winning.is_empty());
        let cls = ClosedLoopSpec {
            kind: SpecKind::Safety,
            target_cells: Vec::new(),
        };
        let pert = PerturbationConfig::none(1, 1);
        let loop_ = ClosedLoop {
            vf: &vf,
            inputs: &[vec![0.0]],
            sampling: SamplingConfig::new(1.0, 5).unwrap(),
            disturbance: &[0.0],
            pert: &pert,
            spec: &cls,
            select: InputSelect::Lowest,
        };
        let x0 = grid.cell_center(CellId(2));
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let trace = simulate(&loop_, &res.controller, &x0, 25, &mut rng);
        assert_eq!(trace.termination, Termination::Live);
        assert_eq!(trace.steps(), 25);
        // the loop contracts toward the middle of the grid
        let last = trace.states.last().unwrap()[0];
        assert!((last - 0.875).abs() < 0.01);

        // identical seed, identical trace
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let again = simulate(&loop_, &res.controller, &x0, 25, &mut rng);
        assert_eq!(again, trace);
    }

    #[test]
    fn trace_checks_catch_avoid_and_missing_reach() {
        let grid = grid_1d(8, 0.0);
        let mk_trace = |xs: &[f64]| TraceRecord {
            times: (0..xs.len().saturating_sub(1)).map(|t| t as f64).collect(),
            states: xs.iter().map(|&x| vec![x]).collect(),
            measured: xs[..xs.len() - 1].iter().map(|&x| vec![x]).collect(),
            commanded: vec![vec![0.0]; xs.len() - 1],
            applied: vec![vec![0.0]; xs.len() - 1],
            cells: vec![0; xs.len() - 1],
            target_index: vec![0; xs.len() - 1],
            termination: Termination::Live,
            reached_target: false,
        };
        let safety = SpecRegions {
            kind: SpecKind::Safety,
            avoid: vec![HyperInterval::new(vec![1.0], vec![1.2]).unwrap()],
            safe: None,
            targets: Vec::new(),
        };
        assert_eq!(
            check_trace(&mk_trace(&[0.0, 0.3, 0.5]), &safety, &grid, 0),
            TraceVerdict::Satisfied
        );
        assert_eq!(
            check_trace(&mk_trace(&[0.0, 1.1, 0.5]), &safety, &grid, 0),
            TraceVerdict::Violated {
                step: 1,
                reason: ViolationReason::Avoid
            }
        );
        let reach = SpecRegions {
            kind: SpecKind::ReachAvoid,
            avoid: Vec::new(),
            safe: None,
            targets: vec![vec![HyperInterval::new(vec![1.5], vec![1.8]).unwrap()]],
        };
        assert_eq!(
            check_trace(&mk_trace(&[0.0, 1.6]), &reach, &grid, 0),
            TraceVerdict::Satisfied
        );
        assert_eq!(
            check_trace(&mk_trace(&[0.0, 0.5]), &reach, &grid, 0),
            TraceVerdict::Violated {
                step: 1,
                reason: ViolationReason::NeverReached
            }
        );
        // empty avoid set on a live trace is vacuously safe
        let vacuous = SpecRegions {
            kind: SpecKind::Safety,
            avoid: Vec::new(),
            safe: None,
            targets: Vec::new(),
        };
        assert_eq!(
            check_trace(&mk_trace(&[0.0, 0.5, 1.7]), &vacuous, &grid, 0),
            TraceVerdict::Satisfied
        );
    }

    #[test]
    fn csv_has_one_row_per_step_and_termination_trailer() {
        let trace = TraceRecord {
            times: vec![0.0, 0.5],
            states: vec![vec![0.0], vec![0.1], vec![0.2]],
            measured: vec![vec![0.01], vec![0.11]],
            commanded: vec![vec![1.0], vec![1.0]],
            applied: vec![vec![0.9], vec![1.1]],
            cells: vec![0, 0],
            target_index: vec![0, 0],
            termination: Termination::Live,
            reached_target: false,
        };
        let csv = trace_to_csv(&trace, 1, 1);
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[0], "t,x1,xhat1,u1,cell_id,target_idx");
        assert_eq!(lines.len(), 1 + 2 + 2);
        assert_eq!(lines[1], "0,0,0.01,0.9,0,0");
        assert!(lines[3].starts_with("# final_state 0.2"));
        assert_eq!(lines[4], "# termination Live");
    }
}
