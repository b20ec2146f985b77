//! Fixed-point solution of the abstract control problem and controller
//! extraction.
//!
//! All three spec kinds reduce to iterations of the controllable
//! predecessor `◇A = {x | ∃u: ∅ ≠ F(x,u) ⊆ A}`: safety is its greatest
//! fixed point, reach-avoid the least fixed point of an attractor (computed
//! rank by rank, breadth first), and recurrence nests one attractor per
//! target inside an outer greatest fixed point,
//! `νZ. ∩ᵢ μY. (◇Y ∪ (Tᵢ ∩ ◇Z))`.
//!
//! Containment of a successor box in a winning set is tested by scanning the
//! box cells against a flat membership mask with early exit; pairs whose
//! verdict cannot change any more are memoized, which keeps the repeated
//! scans near-linear in the table size.

use alloc::vec;
use alloc::vec::Vec;

use crate::grid::{CellId, UniformGridCover};
use crate::system::{FiniteSystem, InputId, SpecKind};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum SynthesisError {
    #[error("mask length does not match the state count")]
    MaskShape,
    #[error("recurrence needs at least one target")]
    NoTargets,
    #[error("controller table is malformed: {0}")]
    BadController(&'static str),
}

/// Membership of the winning set; for recurrence additionally one attractor
/// layer per target.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct WinningSet {
    pub member: Vec<bool>,
    pub target_layers: Vec<Vec<bool>>,
}

impl WinningSet {
    pub fn contains(&self, cell: u32) -> bool {
        self.member[cell as usize]
    }

    pub fn is_empty(&self) -> bool {
        !self.member.iter().any(|&m| m)
    }

    pub fn count(&self) -> u64 {
        self.member.iter().filter(|&&m| m).count() as u64
    }
}

/// Map from abstract cells to the admissible input ids of each synthesis
/// phase, one table per target, plus the quantizer parameters needed to
/// refine it into a concrete controller.
#[derive(Clone, Debug, PartialEq)]
pub struct Controller {
    kind: SpecKind,
    grid: UniformGridCover,
    n_inputs: u32,
    tables: Vec<CsrTable>,
}

#[derive(Clone, Debug, PartialEq)]
struct CsrTable {
    offsets: Vec<u32>,
    pool: Vec<u32>,
}

impl CsrTable {
    fn build(n_cells: usize, records: &[Vec<u32>]) -> Self {
        debug_assert_eq!(records.len(), n_cells);
        let mut offsets = Vec::with_capacity(n_cells + 1);
        let mut pool = Vec::new();
        offsets.push(0);
        for list in records {
            debug_assert!(list.windows(2).all(|w| w[0] < w[1]));
            pool.extend_from_slice(list);
            offsets.push(pool.len() as u32);
        }
        Self { offsets, pool }
    }

    fn inputs(&self, cell: usize) -> &[u32] {
        &self.pool[self.offsets[cell] as usize..self.offsets[cell + 1] as usize]
    }
}

impl Controller {
    fn new(kind: SpecKind, grid: UniformGridCover, n_inputs: u32, tables: Vec<CsrTable>) -> Self {
        Self {
            kind,
            grid,
            n_inputs,
            tables,
        }
    }

    /// Rebuilds a controller from per-table `(cell, sorted inputs)` records,
    /// as read from a controller file.
    pub fn from_records(
        kind: SpecKind,
        grid: UniformGridCover,
        n_inputs: u32,
        tables: Vec<Vec<(u32, Vec<u32>)>>,
    ) -> Result<Self, SynthesisError> {
        if tables.is_empty() {
            return Err(SynthesisError::BadController("controller needs at least one table"));
        }
        let n_cells = grid.n_cells() as usize;
        let mut built = Vec::with_capacity(tables.len());
        for recs in tables {
            let mut lists = vec![Vec::new(); n_cells];
            for (cell, inputs) in recs {
                if cell as usize >= n_cells {
                    return Err(SynthesisError::BadController("record cell out of range"));
                }
                if inputs.is_empty() {
                    return Err(SynthesisError::BadController("record must list inputs"));
                }
                if inputs.iter().any(|&u| u >= n_inputs) {
                    return Err(SynthesisError::BadController("record input out of range"));
                }
                if !inputs.windows(2).all(|w| w[0] < w[1]) {
                    return Err(SynthesisError::BadController("record inputs must be sorted"));
                }
                if !lists[cell as usize].is_empty() {
                    return Err(SynthesisError::BadController("duplicate record for a cell"));
                }
                lists[cell as usize] = inputs;
            }
            built.push(CsrTable::build(n_cells, &lists));
        }
        Ok(Self::new(kind, grid, n_inputs, built))
    }

    #[inline]
    pub fn kind(&self) -> SpecKind {
        self.kind
    }

    #[inline]
    pub fn grid(&self) -> &UniformGridCover {
        &self.grid
    }

    #[inline]
    pub fn n_inputs(&self) -> u32 {
        self.n_inputs
    }

    #[inline]
    pub fn n_tables(&self) -> usize {
        self.tables.len()
    }

    /// Sorted admissible input ids stored for a cell in one table (empty
    /// when the cell has no record there).
    pub fn inputs(&self, table: usize, cell: CellId) -> &[u32] {
        self.tables[table].inputs(cell.index())
    }

    pub fn has_record(&self, table: usize, cell: CellId) -> bool {
        !self.inputs(table, cell).is_empty()
    }

    /// Cells with a record in the table, with their inputs.
    pub fn records(&self, table: usize) -> impl Iterator<Item = (u32, &[u32])> + '_ {
        let t = &self.tables[table];
        (0..self.grid.n_cells()).filter_map(move |c| {
            let l = t.inputs(c as usize);
            if l.is_empty() {
                None
            } else {
                Some((c, l))
            }
        })
    }

    /// Number of cells with a record in any table.
    pub fn domain_size(&self) -> u64 {
        (0..self.grid.n_cells())
            .filter(|&c| (0..self.tables.len()).any(|t| self.has_record(t, CellId(c))))
            .count() as u64
    }
}

/// The controllable predecessor of `z` with all witnessing inputs per cell.
pub struct PreResult {
    pub members: Vec<bool>,
    pub witnesses: Vec<Vec<InputId>>,
}

/// `◇z`: cells with an admissible input whose entire successor box lies in
/// `z`, together with every witnessing input.
pub fn pre(sys: &FiniteSystem, z: &[bool]) -> Result<PreResult, SynthesisError> {
    let n = sys.n_states() as usize;
    if z.len() != n {
        return Err(SynthesisError::MaskShape);
    }
    let mut members = vec![false; n];
    let mut witnesses = vec![Vec::new(); n];
    for x in 0..sys.n_states() {
        for u in 0..sys.n_inputs() {
            if sys.successors_within(x, u, z) {
                members[x as usize] = true;
                witnesses[x as usize].push(InputId(u));
            }
        }
    }
    Ok(PreResult { members, witnesses })
}

fn grid_of(sys: &FiniteSystem) -> UniformGridCover {
    match sys.grid() {
        Some(g) => g.clone(),
        // fixture systems get a nominal 1-D grid so the controller type is
        // uniform; the quantizer is never used for them
        None => UniformGridCover::new(
            vec![0.0],
            vec![1.0],
            vec![sys.n_states().max(1)],
            vec![false],
            vec![0.0],
        )
        .expect("nominal grid"),
    }
}

pub struct SafetyResult {
    pub winning: WinningSet,
    pub controller: Controller,
    pub iterations: u32,
}

/// Greatest fixed point `Z = safe ∩ ◇Z`; the controller keeps every input
/// whose successor box stays inside the final set.
pub fn solve_safety(sys: &FiniteSystem, safe: &[bool]) -> Result<SafetyResult, SynthesisError> {
    let n = sys.n_states() as usize;
    if safe.len() != n {
        return Err(SynthesisError::MaskShape);
    }
    let n_inputs = sys.n_inputs();
    let mut z = safe.to_vec();
    let mut dead = vec![false; sys.n_pairs()];
    let mut iterations = 0u32;
    loop {
        iterations += 1;
        assert!(
            iterations <= sys.n_states() + 1,
            "safety iteration bound exceeded"
        );
        let mut removed = Vec::new();
        for x in 0..sys.n_states() {
            if !z[x as usize] {
                continue;
            }
            let mut alive = false;
            for u in 0..n_inputs {
                let p = sys.pair(x, u);
                if dead[p] {
                    continue;
                }
                if sys.successors_within(x, u, &z) {
                    alive = true;
                } else {
                    dead[p] = true;
                }
            }
            if !alive {
                removed.push(x);
            }
        }
        if removed.is_empty() {
            break;
        }
        for x in removed {
            z[x as usize] = false;
        }
    }
    let mut lists = vec![Vec::new(); n];
    for x in 0..sys.n_states() {
        if !z[x as usize] {
            continue;
        }
        for u in 0..n_inputs {
            if sys.successors_within(x, u, &z) {
                lists[x as usize].push(u);
            }
        }
    }
    let controller = Controller::new(
        SpecKind::Safety,
        grid_of(sys),
        n_inputs,
        vec![CsrTable::build(n, &lists)],
    );
    Ok(SafetyResult {
        winning: WinningSet {
            member: z,
            target_layers: Vec::new(),
        },
        controller,
        iterations,
    })
}

pub struct ReachAvoidResult {
    pub winning: WinningSet,
    pub controller: Controller,
    /// Minimal attractor rank per cell; `u32::MAX` outside the winning set.
    pub ranks: Vec<u32>,
    pub iterations: u32,
}

/// Minimal-rank attractor of the target under avoidance: target cells have
/// rank 0; a cell enters at rank `k` when some input maps its whole
/// successor box into cells of rank `< k`. The controller stores every
/// rank-decreasing input.
pub fn solve_reach_avoid(
    sys: &FiniteSystem,
    target: &[bool],
    avoid: &[bool],
) -> Result<ReachAvoidResult, SynthesisError> {
    let n = sys.n_states() as usize;
    if target.len() != n || avoid.len() != n {
        return Err(SynthesisError::MaskShape);
    }
    let attractor = attract(sys, target, avoid, None, false);
    let controller = Controller::new(
        SpecKind::ReachAvoid,
        grid_of(sys),
        sys.n_inputs(),
        vec![CsrTable::build(n, &attractor.inputs)],
    );
    Ok(ReachAvoidResult {
        winning: WinningSet {
            member: attractor.member,
            target_layers: Vec::new(),
        },
        controller,
        ranks: attractor.rank,
        iterations: attractor.iterations,
    })
}

struct Attractor {
    member: Vec<bool>,
    rank: Vec<u32>,
    /// rank-decreasing inputs, or the entry witnesses at rank 0 when
    /// `entry_witnesses` was requested
    inputs: Vec<Vec<u32>>,
    iterations: u32,
}

/// Breadth-first attractor computation. `seed_witness`: when `Some(z)`,
/// rank-0 cells are the target cells with an input whose box lies in `z`
/// (and those inputs are stored); otherwise every non-avoid target cell has
/// rank 0 and no stored inputs. `exclude_target_above_rank0` keeps target
/// cells out of the higher ranks, which makes "has a record and is a target
/// cell" synonymous with "entry layer" for the stored controller.
fn attract(
    sys: &FiniteSystem,
    target: &[bool],
    avoid: &[bool],
    seed_witness: Option<&[bool]>,
    exclude_target_above_rank0: bool,
) -> Attractor {
    let n = sys.n_states() as usize;
    let n_inputs = sys.n_inputs();
    let mut member = vec![false; n];
    let mut rank = vec![u32::MAX; n];
    let mut inputs = vec![Vec::new(); n];
    for x in 0..n {
        if !target[x] || avoid[x] {
            continue;
        }
        match seed_witness {
            None => {
                member[x] = true;
                rank[x] = 0;
            }
            Some(z) => {
                for u in 0..n_inputs {
                    if sys.successors_within(x as u32, u, z) {
                        inputs[x].push(u);
                    }
                }
                if !inputs[x].is_empty() {
                    member[x] = true;
                    rank[x] = 0;
                }
            }
        }
    }
    let mut done = vec![false; sys.n_pairs()];
    // per-pair memo of the cell that last kept the box out of the member
    // set; the pair is only re-scanned once that cell has joined
    const UNKNOWN: u32 = u32::MAX;
    let mut blocker = vec![UNKNOWN; sys.n_pairs()];
    let mut dead = vec![false; sys.n_pairs()];
    for x in 0..sys.n_states() {
        for u in 0..n_inputs {
            if !sys.is_admissible(x, u) {
                dead[sys.pair(x, u)] = true;
            }
        }
    }
    let mut iterations = 0u32;
    loop {
        iterations += 1;
        assert!(
            iterations <= sys.n_states() + 1,
            "attractor iteration bound exceeded"
        );
        let mut added: Vec<(u32, Vec<u32>)> = Vec::new();
        for x in 0..sys.n_states() {
            if member[x as usize] || avoid[x as usize] {
                continue;
            }
            if exclude_target_above_rank0 && target[x as usize] {
                continue;
            }
            let mut wit = Vec::new();
            for u in 0..n_inputs {
                let p = sys.pair(x, u);
                if dead[p] {
                    continue;
                }
                if done[p] {
                    wit.push(u);
                    continue;
                }
                let b = blocker[p];
                if b != UNKNOWN && !member[b as usize] {
                    continue;
                }
                match sys.first_successor_outside(x, u, &member) {
                    None => {
                        done[p] = true;
                        wit.push(u);
                    }
                    Some(miss) => blocker[p] = miss,
                }
            }
            if !wit.is_empty() {
                added.push((x, wit));
            }
        }
        if added.is_empty() {
            break;
        }
        for (x, wit) in added {
            member[x as usize] = true;
            rank[x as usize] = iterations;
            inputs[x as usize] = wit;
        }
    }
    Attractor {
        member,
        rank,
        inputs,
        iterations,
    }
}

pub struct RecurrenceResult {
    pub winning: WinningSet,
    pub controller: Controller,
    pub outer_iterations: u32,
}

/// `νZ. ∩ᵢ μY. (◇Y ∪ (Tᵢ ∩ ◇Z))`.
///
/// The controller carries one table per target: entry cells (target cells
/// with a `◇Z` witness) store those witnesses, all other attractor cells
/// store their rank-decreasing inputs. Target cells never appear above rank
/// 0 in their own table, so "target cell with a record" identifies the
/// entry layer when the controller is reloaded from a file.
pub fn solve_recurrence(
    sys: &FiniteSystem,
    targets: &[Vec<bool>],
    avoid: &[bool],
) -> Result<RecurrenceResult, SynthesisError> {
    let n = sys.n_states() as usize;
    if targets.is_empty() {
        return Err(SynthesisError::NoTargets);
    }
    if avoid.len() != n || targets.iter().any(|t| t.len() != n) {
        return Err(SynthesisError::MaskShape);
    }
    let mut z: Vec<bool> = (0..n).map(|x| !avoid[x]).collect();
    let mut outer_iterations = 0u32;
    let layers: Vec<Attractor> = loop {
        outer_iterations += 1;
        assert!(
            outer_iterations <= sys.n_states() + 1,
            "recurrence outer iteration bound exceeded"
        );
        let layers: Vec<Attractor> = targets
            .iter()
            .map(|t| attract(sys, t, avoid, Some(&z), true))
            .collect();
        let mut z_next = vec![true; n];
        for layer in &layers {
            for x in 0..n {
                z_next[x] = z_next[x] && layer.member[x];
            }
        }
        if z_next == z {
            break layers;
        }
        z = z_next;
    };
    let tables: Vec<CsrTable> = layers
        .iter()
        .map(|l| CsrTable::build(n, &l.inputs))
        .collect();
    let controller = Controller::new(SpecKind::Recurrence, grid_of(sys), sys.n_inputs(), tables);
    Ok(RecurrenceResult {
        winning: WinningSet {
            member: z,
            target_layers: layers.iter().map(|l| l.member.clone()).collect(),
        },
        controller,
        outer_iterations,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    /// deterministic right-shift chain: cell i, input 0 -> {i+1}, the last
    /// cell loops on itself
    fn chain(n: u32) -> FiniteSystem {
        let lists: Vec<Vec<u32>> = (0..n).map(|i| vec![(i + 1).min(n - 1)]).collect();
        FiniteSystem::from_lists(n, 1, lists).unwrap()
    }

    #[test]
    fn pre_of_everything_and_nothing() {
        let sys = chain(4);
        let all = vec![true; 4];
        let none = vec![false; 4];
        let p = pre(&sys, &all).unwrap();
        assert!(p.members.iter().all(|&m| m));
        let p = pre(&sys, &none).unwrap();
        assert!(p.members.iter().all(|&m| !m));
    }

    #[test]
    fn pre_on_shift_chain() {
        // 3-cell chain, Z = {2}: only cell 1 has all successors in Z
        let sys = chain(3);
        let p = pre(&sys, &[false, false, true]).unwrap();
        assert_eq!(p.members, vec![false, true, true]);
        assert_eq!(p.witnesses[1], vec![InputId(0)]);
    }

    #[test]
    fn safety_total_system_is_all_winning() {
        let sys = chain(5);
        let res = solve_safety(&sys, &vec![true; 5]).unwrap();
        assert!(res.winning.member.iter().all(|&m| m));
        for x in 0..5 {
            assert_eq!(res.controller.inputs(0, CellId(x)), &[0]);
        }
    }

    #[test]
    fn safety_excludes_blocked_and_doomed_cells() {
        // 0 -> 1 -> 2, 2 blocked
        let sys = FiniteSystem::from_lists(3, 1, vec![vec![1], vec![2], vec![]]).unwrap();
        let res = solve_safety(&sys, &vec![true; 3]).unwrap();
        assert!(res.winning.is_empty());

        // 0 self-loop, 1 -> 2, 2 blocked: only 0 survives
        let sys = FiniteSystem::from_lists(3, 1, vec![vec![0], vec![2], vec![]]).unwrap();
        let res = solve_safety(&sys, &vec![true; 3]).unwrap();
        assert_eq!(res.winning.member, vec![true, false, false]);
    }

    #[test]
    fn reach_ranks_on_reversed_chain() {
        // 0 <- 1 <- 2 under input 0, target {0}
        let lists = vec![vec![0], vec![0], vec![1]];
        let sys = FiniteSystem::from_lists(3, 1, lists).unwrap();
        let res = solve_reach_avoid(&sys, &[true, false, false], &[false; 3]).unwrap();
        assert_eq!(res.ranks, vec![0, 1, 2]);
        assert!(res.winning.member.iter().all(|&m| m));
        assert_eq!(res.controller.inputs(0, CellId(1)), &[0]);
        assert!(res.controller.inputs(0, CellId(0)).is_empty());
    }

    #[test]
    fn reach_respects_avoid_mask() {
        // 0 -> 1 -> 2 (target), 1 is avoided: nothing but the target wins
        let lists = vec![vec![1], vec![2], vec![2]];
        let sys = FiniteSystem::from_lists(3, 1, lists).unwrap();
        let res = solve_reach_avoid(&sys, &[false, false, true], &[false, true, false]).unwrap();
        assert_eq!(res.winning.member, vec![false, false, true]);
    }

    #[test]
    fn reach_with_total_target_wins_everywhere() {
        let sys = chain(4);
        let res = solve_reach_avoid(&sys, &[true; 4], &[false; 4]).unwrap();
        assert!(res.winning.member.iter().all(|&m| m));
        assert!(res.ranks.iter().all(|&r| r == 0));
    }

    #[test]
    fn recurrence_on_a_cycle_wins_everywhere() {
        // 4-cycle with a single target cell
        let lists: Vec<Vec<u32>> = (0..4).map(|i| vec![(i + 1) % 4]).collect();
        let sys = FiniteSystem::from_lists(4, 1, lists).unwrap();
        let res =
            solve_recurrence(&sys, &[vec![true, false, false, false]], &[false; 4]).unwrap();
        assert!(res.winning.member.iter().all(|&m| m));
        assert_eq!(res.winning.target_layers.len(), 1);
        // the entry cell stores its ◇Z witness
        assert_eq!(res.controller.inputs(0, CellId(0)), &[0]);
    }

    #[test]
    fn recurrence_with_unreachable_second_target_is_empty() {
        // two components: 0 <-> 1 and 2 <-> 3; targets {0} and {2} cannot
        // both recur
        let lists = vec![vec![1], vec![0], vec![3], vec![2]];
        let sys = FiniteSystem::from_lists(4, 1, lists).unwrap();
        let res = solve_recurrence(
            &sys,
            &[
                vec![true, false, false, false],
                vec![false, false, true, false],
            ],
            &[false; 4],
        )
        .unwrap();
        assert!(res.winning.is_empty());
    }

    #[test]
    fn recurrence_two_targets_on_cycle_alternates() {
        let lists: Vec<Vec<u32>> = (0..6).map(|i| vec![(i + 1) % 6]).collect();
        let sys = FiniteSystem::from_lists(6, 1, lists).unwrap();
        let t0 = vec![true, false, false, false, false, false];
        let t1 = vec![false, false, false, true, false, false];
        let res = solve_recurrence(&sys, &[t0, t1], &[false; 6]).unwrap();
        assert!(res.winning.member.iter().all(|&m| m));
        // non-target cells carry rank-decreasing inputs in both tables
        assert_eq!(res.controller.inputs(0, CellId(1)), &[0]);
        assert_eq!(res.controller.inputs(1, CellId(1)), &[0]);
    }

    #[test]
    fn controller_record_round_trip() {
        let sys = chain(4);
        let res = solve_safety(&sys, &vec![true; 4]).unwrap();
        let recs: Vec<Vec<(u32, Vec<u32>)>> = (0..res.controller.n_tables())
            .map(|t| {
                res.controller
                    .records(t)
                    .map(|(c, l)| (c, l.to_vec()))
                    .collect()
            })
            .collect();
        let rebuilt = Controller::from_records(
            res.controller.kind(),
            res.controller.grid().clone(),
            res.controller.n_inputs(),
            recs,
        )
        .unwrap();
        assert_eq!(rebuilt, res.controller);
    }
}
