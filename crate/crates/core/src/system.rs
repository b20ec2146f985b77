//! Finite simple systems and control problems.
//!
//! A [`FiniteSystem`] is a state-output system over integer state and input
//! ids: the output is the state, every state is a valid initial state, and
//! the transition map is set-valued. Two storage layouts coexist: abstractions
//! over a grid keep one successor *box* (two lattice corners) per state-input
//! pair, while hand-built fixtures keep explicit successor lists.

use alloc::vec::Vec;

use crate::grid::{CellId, LatticeBox, SuccessorBox, UniformGridCover};

/// Identifier of a control input.
#[derive(Copy, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Debug)]
pub struct InputId(pub u32);

impl InputId {
    #[inline(always)]
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum SystemError {
    #[error("transition table size mismatch: {0}")]
    TableShape(&'static str),
    #[error("successor id {id} out of range for {n_states} states")]
    IdOutOfRange { id: u32, n_states: u32 },
    #[error("control problem is malformed: {0}")]
    BadProblem(&'static str),
}

#[derive(Clone, Debug)]
enum Table {
    Boxed {
        grid: UniformGridCover,
        /// 0 = blocked, 1 = box present; one byte per pair.
        status: Vec<u8>,
        /// `2 * dim` compact corner coordinates per pair, lo then hi.
        corners: Vec<u16>,
    },
    Listed {
        /// Sorted successor ids per pair; empty = blocked.
        succ: Vec<Vec<u32>>,
    },
}

/// Finite simple system over dense state and input id ranges.
#[derive(Clone, Debug)]
pub struct FiniteSystem {
    n_states: u32,
    n_inputs: u32,
    table: Table,
}

impl FiniteSystem {
    /// Builds a box-stored system from raw per-pair buffers, as produced by
    /// the abstraction. `status` holds one byte per pair, `corners` holds
    /// `2 * grid.dim()` lattice coordinates per pair (lo corner, hi corner).
    pub fn from_boxed_parts(
        grid: UniformGridCover,
        n_inputs: u32,
        status: Vec<u8>,
        corners: Vec<u16>,
    ) -> Result<Self, SystemError> {
        if n_inputs == 0 {
            return Err(SystemError::TableShape("input alphabet must be non-empty"));
        }
        if grid.counts().iter().any(|&c| c > u16::MAX as u32 + 1) {
            return Err(SystemError::TableShape(
                "box tables hold 16-bit lattice coordinates; counts must fit",
            ));
        }
        let pairs = grid.n_cells() as usize * n_inputs as usize;
        if status.len() != pairs {
            return Err(SystemError::TableShape("status length != cells * inputs"));
        }
        if corners.len() != pairs * 2 * grid.dim() {
            return Err(SystemError::TableShape("corner length != pairs * 2 * dim"));
        }
        Ok(Self {
            n_states: grid.n_cells(),
            n_inputs,
            table: Table::Boxed {
                grid,
                status,
                corners,
            },
        })
    }

    /// Builds a list-stored fixture system. Successor lists are sorted and
    /// deduplicated; an empty list marks the pair as blocked.
    pub fn from_lists(
        n_states: u32,
        n_inputs: u32,
        mut succ: Vec<Vec<u32>>,
    ) -> Result<Self, SystemError> {
        if n_states == 0 || n_inputs == 0 {
            return Err(SystemError::TableShape("state and input alphabets must be non-empty"));
        }
        if succ.len() != n_states as usize * n_inputs as usize {
            return Err(SystemError::TableShape("list length != states * inputs"));
        }
        for list in &mut succ {
            list.sort_unstable();
            list.dedup();
            if let Some(&id) = list.last() {
                if id >= n_states {
                    return Err(SystemError::IdOutOfRange { id, n_states });
                }
            }
        }
        Ok(Self {
            n_states,
            n_inputs,
            table: Table::Listed { succ },
        })
    }

    #[inline]
    pub fn n_states(&self) -> u32 {
        self.n_states
    }

    #[inline]
    pub fn n_inputs(&self) -> u32 {
        self.n_inputs
    }

    #[inline]
    pub fn n_pairs(&self) -> usize {
        self.n_states as usize * self.n_inputs as usize
    }

    #[inline]
    pub fn pair(&self, x: u32, u: u32) -> usize {
        debug_assert!(x < self.n_states && u < self.n_inputs);
        x as usize * self.n_inputs as usize + u as usize
    }

    /// The grid the system is defined over, if box-stored.
    pub fn grid(&self) -> Option<&UniformGridCover> {
        match &self.table {
            Table::Boxed { grid, .. } => Some(grid),
            Table::Listed { .. } => None,
        }
    }

    pub fn is_boxed(&self) -> bool {
        matches!(self.table, Table::Boxed { .. })
    }

    /// `u ∈ U_S(x)`: the pair has a non-empty successor set.
    pub fn is_admissible(&self, x: u32, u: u32) -> bool {
        let p = self.pair(x, u);
        match &self.table {
            Table::Boxed { status, .. } => status[p] != 0,
            Table::Listed { succ } => !succ[p].is_empty(),
        }
    }

    /// The stored successor box of a pair (box-stored systems only).
    pub fn successor_box(&self, x: u32, u: u32) -> Option<SuccessorBox> {
        let p = self.pair(x, u);
        match &self.table {
            Table::Boxed {
                grid,
                status,
                corners,
            } => {
                if status[p] == 0 {
                    Some(SuccessorBox::Blocked)
                } else {
                    let d = grid.dim();
                    let base = p * 2 * d;
                    Some(SuccessorBox::Box(LatticeBox::new(
                        corners[base..base + d].iter().map(|&v| v as u32).collect(),
                        corners[base + d..base + 2 * d]
                            .iter()
                            .map(|&v| v as u32)
                            .collect(),
                    )))
                }
            }
            Table::Listed { .. } => None,
        }
    }

    /// Decoded successor ids of a pair, empty when blocked.
    pub fn successors(&self, x: u32, u: u32) -> Vec<u32> {
        let p = self.pair(x, u);
        match &self.table {
            Table::Boxed { grid, status, .. } => {
                if status[p] == 0 {
                    Vec::new()
                } else {
                    self.with_pair_box(p, |b| b.cells(grid))
                        .into_iter()
                        .map(|c| c.0)
                        .collect()
                }
            }
            Table::Listed { succ } => succ[p].clone(),
        }
    }

    /// Total number of decoded transitions over all admissible pairs.
    pub fn transition_count(&self) -> u64 {
        match &self.table {
            Table::Boxed {
                grid,
                status,
                corners,
            } => {
                let d = grid.dim();
                let mut total = 0u64;
                for p in 0..self.n_pairs() {
                    if status[p] != 0 {
                        let base = p * 2 * d;
                        total += crate::grid::corner_count16(
                            &corners[base..base + d],
                            &corners[base + d..base + 2 * d],
                            grid,
                        );
                    }
                }
                total
            }
            Table::Listed { succ } => succ.iter().map(|l| l.len() as u64).sum(),
        }
    }

    /// Number of admissible (non-blocked) pairs.
    pub fn admissible_pair_count(&self) -> u64 {
        match &self.table {
            Table::Boxed { status, .. } => status.iter().filter(|&&s| s != 0).count() as u64,
            Table::Listed { succ } => succ.iter().filter(|l| !l.is_empty()).count() as u64,
        }
    }

    /// `F(x, u) ⊆ member` with early exit, without decoding boxes.
    pub fn successors_within(&self, x: u32, u: u32, member: &[bool]) -> bool {
        let p = self.pair(x, u);
        match &self.table {
            Table::Boxed {
                grid,
                status,
                corners,
            } => {
                if status[p] == 0 {
                    return false;
                }
                let d = grid.dim();
                let base = p * 2 * d;
                crate::grid::scan_corners16(
                    &corners[base..base + d],
                    &corners[base + d..base + 2 * d],
                    grid,
                    &mut |id| member[id as usize],
                )
            }
            Table::Listed { succ } => {
                !succ[p].is_empty() && succ[p].iter().all(|&s| member[s as usize])
            }
        }
    }

    /// First successor of an admissible pair lying outside `member`, or
    /// `None` when the whole successor set is contained.
    pub fn first_successor_outside(&self, x: u32, u: u32, member: &[bool]) -> Option<u32> {
        debug_assert!(self.is_admissible(x, u));
        let p = self.pair(x, u);
        match &self.table {
            Table::Boxed {
                grid, corners, ..
            } => {
                let d = grid.dim();
                let base = p * 2 * d;
                let mut miss = None;
                crate::grid::scan_corners16(
                    &corners[base..base + d],
                    &corners[base + d..base + 2 * d],
                    grid,
                    &mut |id| {
                        if member[id as usize] {
                            true
                        } else {
                            miss = Some(id);
                            false
                        }
                    },
                );
                miss
            }
            Table::Listed { succ } => succ[p].iter().copied().find(|&s| !member[s as usize]),
        }
    }

    /// Some successor of `(x, u)` satisfies `pred`.
    pub fn successors_meet(&self, x: u32, u: u32, pred: &[bool]) -> bool {
        let p = self.pair(x, u);
        match &self.table {
            Table::Boxed {
                grid,
                status,
                corners,
            } => {
                if status[p] == 0 {
                    return false;
                }
                let d = grid.dim();
                let base = p * 2 * d;
                !crate::grid::scan_corners16(
                    &corners[base..base + d],
                    &corners[base + d..base + 2 * d],
                    grid,
                    &mut |id| !pred[id as usize],
                )
            }
            Table::Listed { succ } => succ[p].iter().any(|&s| pred[s as usize]),
        }
    }

    /// Raw table access for serialization: `(status, corners)` of a
    /// box-stored system.
    pub fn boxed_parts(&self) -> Option<(&[u8], &[u16])> {
        match &self.table {
            Table::Boxed {
                status, corners, ..
            } => Some((status, corners)),
            Table::Listed { .. } => None,
        }
    }

    /// Listed successor table, if list-stored.
    pub fn listed_parts(&self) -> Option<&[Vec<u32>]> {
        match &self.table {
            Table::Boxed { .. } => None,
            Table::Listed { succ } => Some(succ),
        }
    }

    fn with_pair_box<R>(&self, p: usize, f: impl FnOnce(&LatticeBox) -> R) -> R {
        match &self.table {
            Table::Boxed {
                grid, corners, ..
            } => {
                let d = grid.dim();
                let base = p * 2 * d;
                let b = LatticeBox::new(
                    corners[base..base + d].iter().map(|&v| v as u32).collect(),
                    corners[base + d..base + 2 * d]
                        .iter()
                        .map(|&v| v as u32)
                        .collect(),
                );
                f(&b)
            }
            Table::Listed { .. } => unreachable!("with_pair_box on a listed table"),
        }
    }
}

/// Specification kinds solvable by the fixed-point engine.
#[derive(Copy, Clone, PartialEq, Eq, Debug)]
pub enum SpecKind {
    Safety,
    ReachAvoid,
    Recurrence,
}

/// A control problem over cell ids: a spec kind together with the avoid
/// predicate, the target predicates and the initial cell set.
#[derive(Clone, Debug)]
pub struct ControlProblem {
    pub kind: SpecKind,
    /// Avoid predicate per cell id; empty means "no avoid cells".
    pub avoid: Vec<bool>,
    /// One membership mask per target; 1 for reach-avoid, >= 1 for recurrence.
    pub targets: Vec<Vec<bool>>,
    pub initial: Vec<CellId>,
}

impl ControlProblem {
    pub fn new(
        kind: SpecKind,
        avoid: Vec<bool>,
        targets: Vec<Vec<bool>>,
        initial: Vec<CellId>,
    ) -> Result<Self, SystemError> {
        match kind {
            SpecKind::Safety => {
                if !targets.is_empty() {
                    return Err(SystemError::BadProblem("safety takes no targets"));
                }
            }
            SpecKind::ReachAvoid => {
                if targets.len() != 1 {
                    return Err(SystemError::BadProblem("reach-avoid takes exactly one target"));
                }
            }
            SpecKind::Recurrence => {
                if targets.is_empty() {
                    return Err(SystemError::BadProblem("recurrence needs at least one target"));
                }
            }
        }
        Ok(Self {
            kind,
            avoid,
            targets,
            initial,
        })
    }

    /// Avoid mask resized to `n` cells (all-false when absent).
    pub fn avoid_mask(&self, n: usize) -> Vec<bool> {
        let mut m = self.avoid.clone();
        m.resize(n, false);
        m
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::UniformGridCover;

    #[test]
    fn listed_round_trip_and_admissibility() {
        let sys = FiniteSystem::from_lists(
            3,
            2,
            vec![
                vec![1],          // (0,0)
                vec![],           // (0,1) blocked
                vec![2, 0, 2],    // (1,0) dedup + sort
                vec![1],          // (1,1)
                vec![2],          // (2,0)
                vec![2],          // (2,1)
            ],
        )
        .unwrap();
        assert!(sys.is_admissible(0, 0));
        assert!(!sys.is_admissible(0, 1));
        assert_eq!(sys.successors(1, 0), vec![0, 2]);
        assert_eq!(sys.transition_count(), 6);
        assert_eq!(sys.admissible_pair_count(), 5);
        assert!(sys.successors_within(1, 1, &[false, true, false]));
        assert!(!sys.successors_within(1, 0, &[false, true, true]));
    }

    #[test]
    fn rejects_bad_tables() {
        assert!(FiniteSystem::from_lists(2, 1, vec![vec![0]]).is_err());
        assert!(FiniteSystem::from_lists(2, 1, vec![vec![5], vec![]]).is_err());
        let grid = UniformGridCover::new(
            vec![0.0],
            vec![1.0],
            vec![4],
            vec![false],
            vec![0.0],
        )
        .unwrap();
        assert!(FiniteSystem::from_boxed_parts(grid, 2, vec![0; 7], vec![]).is_err());
    }
}
