//! Construction of the finite abstraction of a sampled system.
//!
//! For every compact, non-blocked cell `⟦c−r, c+r⟧` (radius including the
//! measurement inflation) and every input, the attainable set after one
//! sampling period is over-approximated by `φ(τ, c, u) + ⟦−r', r'⟧` with
//! `r' = β(r, u)`, and the successor set is the lattice box of cells meeting
//! that region. A pair is blocked when the nominal flow blows up, when the
//! region reaches an overflow symbol on a non-periodic dimension, or when a
//! successor cell is itself blocked; blocked cells have every pair blocked.
//!
//! The resulting system is related to the sampled plant by the set-membership
//! feedback refinement relation, which [`check_canonicity_sample`] probes by
//! simulating perturbed one-period trajectories.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;

use crate::grid::{HyperInterval, SuccessorBox, UniformGridCover};
use crate::odeint::{
    self, Disturbance, LipschitzMatrix, SamplingConfig, Scratch, VectorField,
};
use crate::system::FiniteSystem;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum AbstractionError {
    #[error("abstraction spec is malformed: {0}")]
    BadSpec(&'static str),
}

/// Everything needed to abstract one sampled plant over one grid.
pub struct AbstractionSpec<'a> {
    pub grid: UniformGridCover,
    /// The finite input alphabet, an explicit list of input vectors.
    pub inputs: Vec<Vec<f64>>,
    pub vf: &'a (dyn VectorField + Sync),
    pub lipschitz: &'a (dyn LipschitzMatrix + Sync),
    pub disturbance: Disturbance,
    pub sampling: SamplingConfig,
    /// Pre-blocked cells (cells meeting the avoid set); empty = none.
    pub blocked_cells: Vec<bool>,
    /// Per-dimension cell subdivision for tighter attainable sets; all ones
    /// disables it.
    pub subdivision: Vec<u32>,
    /// Scale applied to the growth radius. 1.0 is the sound default; smaller
    /// values deliberately break soundness and exist so the falsification
    /// tests have a mutant to detect.
    pub growth_scale: f64,
}

impl<'a> AbstractionSpec<'a> {
    pub fn new(
        grid: UniformGridCover,
        inputs: Vec<Vec<f64>>,
        vf: &'a (dyn VectorField + Sync),
        lipschitz: &'a (dyn LipschitzMatrix + Sync),
        disturbance: Disturbance,
        sampling: SamplingConfig,
    ) -> Result<Self, AbstractionError> {
        let dim = grid.dim();
        if inputs.is_empty() {
            return Err(AbstractionError::BadSpec("input list must be non-empty"));
        }
        if vf.dim() != dim || lipschitz.dim() != dim || disturbance.radius().len() != dim {
            return Err(AbstractionError::BadSpec("state dimension mismatch"));
        }
        if inputs.iter().any(|u| u.len() != vf.input_dim()) {
            return Err(AbstractionError::BadSpec("input dimension mismatch"));
        }
        Ok(Self {
            grid,
            inputs,
            vf,
            lipschitz,
            disturbance,
            sampling,
            blocked_cells: Vec::new(),
            subdivision: vec![1; dim],
            growth_scale: 1.0,
        })
    }

    pub fn with_blocked_cells(mut self, blocked: Vec<bool>) -> Self {
        self.blocked_cells = blocked;
        self
    }

    pub fn with_subdivision(mut self, subdivision: Vec<u32>) -> Self {
        self.subdivision = subdivision;
        self
    }

    fn validate(&self) -> Result<(), AbstractionError> {
        if !self.blocked_cells.is_empty()
            && self.blocked_cells.len() != self.grid.n_cells() as usize
        {
            return Err(AbstractionError::BadSpec("blocked mask length mismatch"));
        }
        if self.subdivision.len() != self.grid.dim() || self.subdivision.iter().any(|&s| s == 0) {
            return Err(AbstractionError::BadSpec("subdivision must be positive per dimension"));
        }
        if !(self.growth_scale > 0.0) {
            return Err(AbstractionError::BadSpec("growth scale must be positive"));
        }
        Ok(())
    }
}

/// Per-input precomputed data: the scaled growth radius of a (sub)cell and
/// the flow offsets of the subdivision centers.
struct InputPack {
    /// `growth_scale * β(ρ, u)`, or `None` when the radial problem failed.
    radius: Option<Vec<f64>>,
}

fn sub_centers(grid: &UniformGridCover, subdivision: &[u32]) -> Vec<Vec<f64>> {
    // offsets of the subdivision centers relative to the cell center
    let dim = grid.dim();
    let r = grid.cell_radius();
    let mut offsets: Vec<Vec<f64>> = vec![Vec::new()];
    for d in 0..dim {
        let s = subdivision[d] as usize;
        let rho = r[d] / s as f64;
        let mut next = Vec::with_capacity(offsets.len() * s);
        for base in &offsets {
            for i in 0..s {
                let mut o = base.clone();
                o.push(-r[d] + (2 * i + 1) as f64 * rho);
                next.push(o);
            }
        }
        offsets = next;
    }
    offsets
}

/// Computes the transition table of the abstraction.
///
/// The table is deterministic: identical inputs yield a bit-identical table
/// regardless of how many workers compute it.
pub fn compute_transitions(spec: &AbstractionSpec) -> Result<FiniteSystem, AbstractionError> {
    spec.validate()?;
    let grid = &spec.grid;
    let dim = grid.dim();
    let n_cells = grid.n_cells() as usize;
    let n_inputs = spec.inputs.len();
    let pairs = n_cells * n_inputs;

    // the (sub)cell radius and the per-input growth radii
    let rho: Vec<f64> = grid
        .cell_radius()
        .iter()
        .zip(&spec.subdivision)
        .map(|(r, &s)| r / s as f64)
        .collect();
    let packs: Vec<InputPack> = spec
        .inputs
        .iter()
        .map(|u| {
            let radius = odeint::growth_radius(
                spec.lipschitz,
                &spec.disturbance,
                &rho,
                u,
                spec.sampling,
            )
            .ok()
            .map(|mut r| {
                for v in &mut r {
                    *v *= spec.growth_scale;
                }
                r
            });
            InputPack { radius }
        })
        .collect();
    let offsets = sub_centers(grid, &spec.subdivision);

    let mut status = vec![0u8; pairs];
    let mut corners = vec![0u16; pairs * 2 * dim];

    let cell_job = |cell: usize, status: &mut [u8], corners: &mut [u16]| {
        if !spec.blocked_cells.is_empty() && spec.blocked_cells[cell] {
            return; // all pairs stay blocked
        }
        let mut center = vec![0.0; dim];
        grid.cell_center_into(crate::grid::CellId(cell as u32), &mut center);
        let mut scratch = Scratch::new(dim);
        let mut x = vec![0.0; dim];
        let mut lb = vec![0.0; dim];
        let mut ub = vec![0.0; dim];
        for (ui, u) in spec.inputs.iter().enumerate() {
            let Some(radius) = packs[ui].radius.as_ref() else {
                continue; // radial blow-up: blocked
            };
            lb.fill(f64::INFINITY);
            ub.fill(f64::NEG_INFINITY);
            let mut ok = true;
            for off in &offsets {
                for d in 0..dim {
                    x[d] = center[d] + off[d];
                }
                if odeint::flow_into(spec.vf, u, spec.sampling, &mut x, &mut scratch).is_err() {
                    ok = false;
                    break;
                }
                for d in 0..dim {
                    lb[d] = lb[d].min(x[d] - radius[d]);
                    ub[d] = ub[d].max(x[d] + radius[d]);
                }
            }
            if !ok {
                continue;
            }
            let Ok(region) = HyperInterval::new(lb.clone(), ub.clone()) else {
                continue;
            };
            match grid.cells_intersecting(&region) {
                SuccessorBox::Blocked => {}
                SuccessorBox::Box(b) => {
                    if !spec.blocked_cells.is_empty() && b.any_in(grid, &spec.blocked_cells) {
                        continue; // successors meet the avoid set: inadmissible
                    }
                    status[ui] = 1;
                    let base = ui * 2 * dim;
                    for d in 0..dim {
                        corners[base + d] = b.lo()[d] as u16;
                        corners[base + dim + d] = b.hi()[d] as u16;
                    }
                }
            }
        }
    };

    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        status
            .par_chunks_mut(n_inputs)
            .zip(corners.par_chunks_mut(n_inputs * 2 * dim))
            .enumerate()
            .for_each(|(cell, (st, co))| cell_job(cell, st, co));
    }
    #[cfg(not(feature = "parallel"))]
    {
        for cell in 0..n_cells {
            let st = &mut status[cell * n_inputs..(cell + 1) * n_inputs];
            let co = &mut corners[cell * n_inputs * 2 * dim..(cell + 1) * n_inputs * 2 * dim];
            cell_job(cell, st, co);
        }
    }

    FiniteSystem::from_boxed_parts(grid.clone(), n_inputs as u32, status, corners)
        .map_err(|_| AbstractionError::BadSpec("table assembly failed"))
}

/// Outcome of the Monte-Carlo feedback-refinement probe.
#[derive(Clone, Debug, PartialEq)]
pub struct CanonicityReport {
    pub samples: u64,
    pub violations: u64,
    /// Mean, over sampled pairs, of the fraction of stored successor cells
    /// actually hit by some sampled trajectory.
    pub tightness: f64,
}

/// Samples `(cell, input, initial point, disturbance signal)` tuples,
/// simulates one sampling period of the perturbed system, and checks that
/// every cell containing the landing point lies in the stored successor box.
pub fn check_canonicity_sample<R: Rng + ?Sized>(
    spec: &AbstractionSpec,
    sys: &FiniteSystem,
    n_samples: u64,
    rng: &mut R,
) -> CanonicityReport {
    let grid = &spec.grid;
    let dim = grid.dim();
    let n_inputs = spec.inputs.len() as u32;
    let admissible: Vec<(u32, u32)> = (0..sys.n_states())
        .flat_map(|x| (0..n_inputs).map(move |u| (x, u)))
        .filter(|&(x, u)| sys.is_admissible(x, u))
        .collect();
    if admissible.is_empty() {
        return CanonicityReport {
            samples: 0,
            violations: 0,
            tightness: 0.0,
        };
    }
    let radius = grid.cell_radius();
    let mut violations = 0u64;
    let mut hits: BTreeMap<(u32, u32), BTreeSet<u32>> = BTreeMap::new();
    for _ in 0..n_samples {
        let (cell, ui) = admissible[rng.gen_range(0..admissible.len())];
        let c = grid.cell_center(crate::grid::CellId(cell));
        let mut x0 = vec![0.0; dim];
        for d in 0..dim {
            x0[d] = if radius[d] > 0.0 {
                c[d] + rng.gen_range(-radius[d]..=radius[d])
            } else {
                c[d]
            };
        }
        let u = &spec.inputs[ui as usize];
        let landed = odeint::flow_perturbed(
            spec.vf,
            &x0,
            u,
            spec.disturbance.radius(),
            spec.sampling.tau,
            20,
            5,
            rng,
        );
        let Ok(landed) = landed else {
            violations += 1;
            continue;
        };
        let stored = sys
            .successor_box(cell, ui)
            .expect("canonicity probe needs a box-stored system");
        let SuccessorBox::Box(stored) = stored else {
            unreachable!("pair was admissible");
        };
        match grid.cells_containing(&landed) {
            SuccessorBox::Blocked => violations += 1,
            SuccessorBox::Box(containing) => {
                let mut all_in = true;
                for id in containing.cells(grid) {
                    if stored.contains_cell(grid, id) {
                        hits.entry((cell, ui)).or_default().insert(id.0);
                    } else {
                        all_in = false;
                    }
                }
                if !all_in {
                    violations += 1;
                }
            }
        }
    }
    let mut tightness = 0.0;
    if !hits.is_empty() {
        for ((cell, ui), hit) in &hits {
            let Some(SuccessorBox::Box(b)) = sys.successor_box(*cell, *ui) else {
                continue;
            };
            tightness += hit.len() as f64 / b.cell_count(grid) as f64;
        }
        tightness /= hits.len() as f64;
    }
    CanonicityReport {
        samples: n_samples,
        violations,
        tightness,
    }
}
