//! Problem files: a TOML schema describing plant, grid, inputs, sampling,
//! growth-bound data, specification regions and perturbations, resolved into
//! the in-memory objects the pipeline works on.

use std::path::Path;

use serde::Deserialize;
use symcon_core::abstraction::AbstractionSpec;
use symcon_core::grid::{box_in_union, HyperInterval, UniformGridCover};
use symcon_core::odeint::{Disturbance, LipschitzMatrix, SamplingConfig, VectorField};
use symcon_core::plants::{
    Affine, Aircraft, AircraftLipschitz, ConstantLipschitz, Vehicle, VehicleLipschitz,
};
use symcon_core::runtime::{PerturbationConfig, SpecRegions};
use symcon_core::{CellId, SpecKind};

#[derive(Debug, thiserror::Error)]
pub enum SchemaError {
    #[error("cannot read problem file: {0}")]
    Io(#[from] std::io::Error),
    #[error("problem file does not parse: {0}")]
    Toml(#[from] toml::de::Error),
    #[error("problem file is invalid: {0}")]
    Invalid(String),
}

fn invalid(msg: impl Into<String>) -> SchemaError {
    SchemaError::Invalid(msg.into())
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ProblemFile {
    plant: PlantBlock,
    grid: GridBlock,
    inputs: InputsBlock,
    sampling: SamplingBlock,
    #[serde(default)]
    lipschitz: Option<LipschitzBlock>,
    #[serde(default)]
    disturbance: Option<DisturbanceBlock>,
    spec: SpecBlock,
    #[serde(default)]
    perturbation: Option<PerturbationBlock>,
    #[serde(default)]
    seeds: Option<SeedBlock>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct PlantBlock {
    name: String,
    #[serde(default)]
    a: Option<Vec<Vec<f64>>>,
    #[serde(default)]
    b: Option<Vec<Vec<f64>>>,
    #[serde(default)]
    c: Option<Vec<f64>>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct GridBlock {
    first_center: Vec<f64>,
    eta: Vec<f64>,
    counts: Vec<u32>,
    periodic: Vec<bool>,
    #[serde(default)]
    inflation: Option<Vec<f64>>,
    #[serde(default)]
    subdivision: Option<Vec<u32>>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct InputsBlock {
    #[serde(default)]
    list: Option<Vec<Vec<f64>>>,
    #[serde(default)]
    lower: Option<Vec<f64>>,
    #[serde(default)]
    upper: Option<Vec<f64>>,
    #[serde(default)]
    counts: Option<Vec<u32>>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct SamplingBlock {
    tau: f64,
    #[serde(default)]
    substeps: Option<u32>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct LipschitzBlock {
    matrix: Vec<Vec<f64>>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct DisturbanceBlock {
    w: Vec<f64>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct BoxBlock {
    lb: Vec<f64>,
    ub: Vec<f64>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct SpecBlock {
    kind: String,
    #[serde(default)]
    cycles: Option<u32>,
    #[serde(default)]
    avoid: Vec<BoxBlock>,
    #[serde(default)]
    safe: Option<Vec<BoxBlock>>,
    #[serde(default)]
    target: Vec<Vec<BoxBlock>>,
    initial: Vec<BoxBlock>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct PerturbationBlock {
    #[serde(default)]
    p1: Option<Vec<f64>>,
    #[serde(default)]
    p2: Option<Vec<f64>>,
    #[serde(default)]
    input_lower: Option<Vec<f64>>,
    #[serde(default)]
    input_upper: Option<Vec<f64>>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct SeedBlock {
    base: u64,
}

/// The dynamics and its growth matrix, either a built-in pair or custom
/// affine coefficients.
pub enum Plant {
    Vehicle,
    Aircraft,
    Affine { vf: Affine, lip: ConstantLipschitz },
}

impl Plant {
    pub fn vector_field(&self) -> &(dyn VectorField + Sync) {
        match self {
            Plant::Vehicle => &Vehicle,
            Plant::Aircraft => &Aircraft,
            Plant::Affine { vf, .. } => vf,
        }
    }

    pub fn lipschitz(&self) -> &(dyn LipschitzMatrix + Sync) {
        match self {
            Plant::Vehicle => &VehicleLipschitz,
            Plant::Aircraft => &AircraftLipschitz,
            Plant::Affine { lip, .. } => lip,
        }
    }
}

/// A fully resolved and validated problem.
pub struct Problem {
    pub plant: Plant,
    pub plant_name: String,
    pub grid: UniformGridCover,
    pub inputs: Vec<Vec<f64>>,
    pub sampling: SamplingConfig,
    pub disturbance: Disturbance,
    pub subdivision: Vec<u32>,
    pub kind: SpecKind,
    pub regions: SpecRegions,
    pub initial_boxes: Vec<HyperInterval>,
    pub cycles: u32,
    pub perturbation: PerturbationConfig,
    pub seed: u64,
}

fn parse_boxes(
    blocks: &[BoxBlock],
    dim: usize,
    what: &str,
) -> Result<Vec<HyperInterval>, SchemaError> {
    blocks
        .iter()
        .map(|b| {
            if b.lb.len() != dim || b.ub.len() != dim {
                return Err(invalid(format!("{what} box has wrong dimension")));
            }
            HyperInterval::new(b.lb.clone(), b.ub.clone())
                .map_err(|e| invalid(format!("{what} box: {e}")))
        })
        .collect()
}

impl Problem {
    pub fn load(path: &Path) -> Result<Self, SchemaError> {
        let text = std::fs::read_to_string(path)?;
        Self::from_toml_str(&text)
    }

    pub fn from_toml_str(text: &str) -> Result<Self, SchemaError> {
        let file: ProblemFile = toml::from_str(text)?;

        let grid = UniformGridCover::new(
            file.grid.first_center.clone(),
            file.grid.eta.clone(),
            file.grid.counts.clone(),
            file.grid.periodic.clone(),
            file.grid
                .inflation
                .clone()
                .unwrap_or_else(|| vec![0.0; file.grid.first_center.len()]),
        )
        .map_err(|e| invalid(format!("grid: {e}")))?;
        let dim = grid.dim();
        let subdivision = file
            .grid
            .subdivision
            .clone()
            .unwrap_or_else(|| vec![1; dim]);
        if subdivision.len() != dim || subdivision.iter().any(|&s| s == 0) {
            return Err(invalid("grid.subdivision must be positive per dimension"));
        }

        let plant = match file.plant.name.as_str() {
            "vehicle" => Plant::Vehicle,
            "aircraft" => Plant::Aircraft,
            "custom-affine" => {
                let a = file
                    .plant
                    .a
                    .as_ref()
                    .ok_or_else(|| invalid("custom-affine needs plant.a"))?;
                let b = file
                    .plant
                    .b
                    .as_ref()
                    .ok_or_else(|| invalid("custom-affine needs plant.b"))?;
                let c = file
                    .plant
                    .c
                    .clone()
                    .ok_or_else(|| invalid("custom-affine needs plant.c"))?;
                let n = c.len();
                if a.len() != n || a.iter().any(|r| r.len() != n) {
                    return Err(invalid("plant.a must be n x n"));
                }
                let m = b.first().map(|r| r.len()).unwrap_or(0);
                if b.len() != n || b.iter().any(|r| r.len() != m) || m == 0 {
                    return Err(invalid("plant.b must be n x m"));
                }
                let vf = Affine::new(
                    n,
                    m,
                    a.iter().flatten().copied().collect(),
                    b.iter().flatten().copied().collect(),
                    c,
                )
                .ok_or_else(|| invalid("plant coefficients are malformed"))?;
                let lip = match &file.lipschitz {
                    Some(l) => {
                        if l.matrix.len() != n || l.matrix.iter().any(|r| r.len() != n) {
                            return Err(invalid("lipschitz.matrix must be n x n"));
                        }
                        ConstantLipschitz::new(n, l.matrix.iter().flatten().copied().collect())
                            .ok_or_else(|| {
                                invalid("lipschitz.matrix needs non-negative off-diagonals")
                            })?
                    }
                    None => vf.induced_lipschitz(),
                };
                Plant::Affine { vf, lip }
            }
            other => return Err(invalid(format!("unknown plant `{other}`"))),
        };
        if matches!(plant, Plant::Vehicle | Plant::Aircraft) && file.lipschitz.is_some() {
            return Err(invalid("built-in plants carry their own growth matrix"));
        }
        let vf = plant.vector_field();
        if vf.dim() != dim {
            return Err(invalid("plant dimension does not match the grid"));
        }
        let input_dim = vf.input_dim();

        let inputs: Vec<Vec<f64>> = match (&file.inputs.list, &file.inputs.lower) {
            (Some(list), None) => {
                if file.inputs.upper.is_some() || file.inputs.counts.is_some() {
                    return Err(invalid("inputs: give either `list` or a product grid"));
                }
                list.clone()
            }
            (None, Some(lower)) => {
                let upper = file
                    .inputs
                    .upper
                    .as_ref()
                    .ok_or_else(|| invalid("inputs: product grid needs `upper`"))?;
                let counts = file
                    .inputs
                    .counts
                    .as_ref()
                    .ok_or_else(|| invalid("inputs: product grid needs `counts`"))?;
                if lower.len() != input_dim
                    || upper.len() != input_dim
                    || counts.len() != input_dim
                {
                    return Err(invalid("inputs: product grid dimension mismatch"));
                }
                if counts.iter().any(|&c| c == 0) {
                    return Err(invalid("inputs: counts must be positive"));
                }
                let mut out: Vec<Vec<f64>> = vec![Vec::new()];
                for d in 0..input_dim {
                    let mut next = Vec::new();
                    for base in &out {
                        for k in 0..counts[d] {
                            let v = if counts[d] == 1 {
                                lower[d]
                            } else {
                                lower[d]
                                    + (upper[d] - lower[d]) * k as f64 / (counts[d] - 1) as f64
                            };
                            let mut u = base.clone();
                            u.push(v);
                            next.push(u);
                        }
                    }
                    out = next;
                }
                out
            }
            _ => return Err(invalid("inputs: give either `list` or a product grid")),
        };
        if inputs.is_empty() {
            return Err(invalid("inputs must be non-empty"));
        }
        if inputs.iter().any(|u| u.len() != input_dim) {
            return Err(invalid("input vectors have the wrong dimension"));
        }

        let sampling =
            SamplingConfig::new(file.sampling.tau, file.sampling.substeps.unwrap_or(5))
                .map_err(|e| invalid(format!("sampling: {e}")))?;

        let disturbance = match &file.disturbance {
            Some(d) => {
                if d.w.len() != dim {
                    return Err(invalid("disturbance.w dimension mismatch"));
                }
                Disturbance::new(d.w.clone())
                    .map_err(|e| invalid(format!("disturbance: {e}")))?
            }
            None => Disturbance::zero(dim),
        };

        let kind = match file.spec.kind.as_str() {
            "safety" => SpecKind::Safety,
            "reach-avoid" => SpecKind::ReachAvoid,
            "recurrence" => SpecKind::Recurrence,
            other => return Err(invalid(format!("unknown spec kind `{other}`"))),
        };
        let targets: Vec<Vec<HyperInterval>> = file
            .spec
            .target
            .iter()
            .map(|t| parse_boxes(t, dim, "target"))
            .collect::<Result<_, _>>()?;
        match kind {
            SpecKind::Safety => {
                if !targets.is_empty() {
                    return Err(invalid("safety takes no targets"));
                }
            }
            SpecKind::ReachAvoid => {
                if targets.len() != 1 {
                    return Err(invalid("reach-avoid takes exactly one target"));
                }
            }
            SpecKind::Recurrence => {
                if targets.is_empty() {
                    return Err(invalid("recurrence needs at least one target"));
                }
            }
        }
        if targets.iter().any(|t| t.is_empty()) {
            return Err(invalid("every target needs at least one box"));
        }
        let regions = SpecRegions {
            kind,
            avoid: parse_boxes(&file.spec.avoid, dim, "avoid")?,
            safe: match &file.spec.safe {
                Some(s) => Some(parse_boxes(s, dim, "safe")?),
                None => None,
            },
            targets,
        };
        if file.spec.initial.is_empty() {
            return Err(invalid("spec.initial must name at least one box"));
        }
        let initial_boxes = parse_boxes(&file.spec.initial, dim, "initial")?;

        let perturbation = match &file.perturbation {
            Some(p) => {
                let p1 = p.p1.clone().unwrap_or_else(|| vec![0.0; input_dim]);
                let p2 = p.p2.clone().unwrap_or_else(|| vec![0.0; dim]);
                if p1.len() != input_dim || p2.len() != dim {
                    return Err(invalid("perturbation radii dimension mismatch"));
                }
                let mut cfg = PerturbationConfig::new(p1, p2)
                    .map_err(|e| invalid(format!("perturbation: {e}")))?;
                match (&p.input_lower, &p.input_upper) {
                    (Some(lo), Some(hi)) => {
                        if lo.len() != input_dim || hi.len() != input_dim {
                            return Err(invalid(
                                "perturbation input bounds dimension mismatch",
                            ));
                        }
                        let bounds = HyperInterval::new(lo.clone(), hi.clone())
                            .map_err(|e| invalid(format!("perturbation bounds: {e}")))?;
                        cfg = cfg.with_input_bounds(bounds);
                    }
                    (None, None) => {}
                    _ => {
                        return Err(invalid("perturbation input bounds need lower and upper"))
                    }
                }
                cfg
            }
            None => PerturbationConfig::none(input_dim, dim),
        };
        perturbation
            .validate_measurement(&grid)
            .map_err(|e| invalid(format!("perturbation: {e}")))?;

        Ok(Problem {
            plant,
            plant_name: file.plant.name,
            grid,
            inputs,
            sampling,
            disturbance,
            subdivision,
            kind,
            regions,
            initial_boxes,
            cycles: file.spec.cycles.unwrap_or(1),
            perturbation,
            seed: file.seeds.map(|s| s.base).unwrap_or(0),
        })
    }

    /// Cells meeting the avoid set: the inflated cell extent intersects an
    /// avoid box, or leaves the safe union when one is given.
    pub fn avoid_cells(&self) -> Vec<bool> {
        let n = self.grid.n_cells();
        let mut mask = vec![false; n as usize];
        for id in 0..n {
            let ext = self.grid.inflated_extent(CellId(id));
            let mut hit = self.regions.avoid.iter().any(|b| b.intersects(&ext));
            if !hit {
                if let Some(safe) = &self.regions.safe {
                    hit = !box_in_union(&ext, safe);
                }
            }
            mask[id as usize] = hit;
        }
        mask
    }

    /// Per-target cell masks: the inflated cell extent lies inside the
    /// target union.
    pub fn target_cells(&self) -> Vec<Vec<bool>> {
        let n = self.grid.n_cells();
        self.regions
            .targets
            .iter()
            .map(|boxes| {
                (0..n)
                    .map(|id| box_in_union(&self.grid.inflated_extent(CellId(id)), boxes))
                    .collect()
            })
            .collect()
    }

    /// Cells whose inflated extent meets an initial box.
    pub fn initial_cells(&self) -> Vec<CellId> {
        let n = self.grid.n_cells();
        (0..n)
            .map(CellId)
            .filter(|&id| {
                let ext = self.grid.inflated_extent(id);
                self.initial_boxes.iter().any(|b| b.intersects(&ext))
            })
            .collect()
    }

    /// The abstraction of the sampled plant over the grid.
    ///
    /// Avoid regions are *not* pre-blocked here: the table describes the
    /// plant alone and is reusable across specifications. Synthesis masks
    /// the avoid cells instead, which excludes exactly the same strategies —
    /// a successor box that meets an avoid cell can never be contained in a
    /// winning set that excludes them.
    pub fn abstraction_spec(&self) -> AbstractionSpec<'_> {
        AbstractionSpec::new(
            self.grid.clone(),
            self.inputs.clone(),
            self.plant.vector_field(),
            self.plant.lipschitz(),
            self.disturbance.clone(),
            self.sampling,
        )
        .expect("problem was validated")
        .with_subdivision(self.subdivision.clone())
    }
}
