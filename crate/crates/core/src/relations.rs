//! Finite relational kernel: full set-valued systems with internal
//! variables, serial and feedback composition, bounded-horizon behavior
//! enumeration, feedback-refinement checking and the canonical cover
//! construction.
//!
//! Everything here is exhaustive over finite id alphabets. This module is the
//! oracle layer the rest of the crate is validated against, so clarity wins
//! over speed throughout.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use crate::system::FiniteSystem;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum RelationError {
    #[error("system is malformed: {0}")]
    BadSystem(&'static str),
    #[error("relation is malformed: {0}")]
    BadRelation(&'static str),
    #[error("alphabet mismatch: {0}")]
    AlphabetMismatch(&'static str),
    #[error("behavior enumeration exceeded the expansion guard")]
    Explosion,
    #[error("fixture parse error at line {line}: {reason}")]
    Parse { line: usize, reason: &'static str },
}

/// System septuple `(X, X₀, U, V, Y, F, H)` over dense id alphabets.
///
/// `F : X × V ⇉ X` and `H : X × U ⇉ Y × V`; `H` is strict.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct GeneralSystem {
    nx: u32,
    nu: u32,
    nv: u32,
    ny: u32,
    initial: Vec<bool>,
    /// `f[x * nv + v]`, sorted.
    f: Vec<Vec<u32>>,
    /// `h[x * nu + u]`, sorted `(y, v)` pairs.
    h: Vec<Vec<(u32, u32)>>,
}

impl GeneralSystem {
    pub fn new(
        nx: u32,
        nu: u32,
        nv: u32,
        ny: u32,
        initial: Vec<u32>,
        f: Vec<Vec<u32>>,
        h: Vec<Vec<(u32, u32)>>,
    ) -> Result<Self, RelationError> {
        if nx == 0 || nu == 0 || nv == 0 || ny == 0 {
            return Err(RelationError::BadSystem("alphabets must be non-empty"));
        }
        if initial.is_empty() {
            return Err(RelationError::BadSystem("initial state set must be non-empty"));
        }
        if f.len() != (nx * nv) as usize || h.len() != (nx * nu) as usize {
            return Err(RelationError::BadSystem("table shape mismatch"));
        }
        let mut init = vec![false; nx as usize];
        for x in initial {
            if x >= nx {
                return Err(RelationError::BadSystem("initial state out of range"));
            }
            init[x as usize] = true;
        }
        let mut f = f;
        for list in &mut f {
            list.sort_unstable();
            list.dedup();
            if list.iter().any(|&x| x >= nx) {
                return Err(RelationError::BadSystem("successor out of range"));
            }
        }
        let mut h = h;
        for list in &mut h {
            list.sort_unstable();
            list.dedup();
            if list.is_empty() {
                return Err(RelationError::BadSystem("output function must be strict"));
            }
            if list.iter().any(|&(y, v)| y >= ny || v >= nv) {
                return Err(RelationError::BadSystem("output pair out of range"));
            }
        }
        Ok(Self {
            nx,
            nu,
            nv,
            ny,
            initial: init,
            f,
            h,
        })
    }

    /// Embeds a finite simple system: `V = U`, `Y = X`, `H = id` and all
    /// states initial.
    pub fn from_simple(sys: &FiniteSystem) -> Self {
        let nx = sys.n_states();
        let nu = sys.n_inputs();
        let mut f = Vec::with_capacity((nx * nu) as usize);
        let mut h = Vec::with_capacity((nx * nu) as usize);
        for x in 0..nx {
            for u in 0..nu {
                f.push(sys.successors(x, u));
                h.push(vec![(x, u)]);
            }
        }
        Self {
            nx,
            nu,
            nv: nu,
            ny: nx,
            initial: vec![true; nx as usize],
            f,
            h,
        }
    }

    /// The quantized plant `Q ∘ S`: outputs are the abstract ids related to
    /// the state, `H'(x, u) = Q(x) × {u}`.
    pub fn quantized_simple(sys: &FiniteSystem, q: &Relation) -> Result<Self, RelationError> {
        if q.n1 != sys.n_states() {
            return Err(RelationError::AlphabetMismatch("quantizer domain != state count"));
        }
        if !q.is_strict() {
            return Err(RelationError::BadRelation("quantizer must be strict"));
        }
        let nx = sys.n_states();
        let nu = sys.n_inputs();
        let mut f = Vec::with_capacity((nx * nu) as usize);
        let mut h = Vec::with_capacity((nx * nu) as usize);
        for x in 0..nx {
            for u in 0..nu {
                f.push(sys.successors(x, u));
                h.push(q.image(x).iter().map(|&x2| (x2, u)).collect());
            }
        }
        Ok(Self {
            nx,
            nu,
            nv: nu,
            ny: q.n2,
            initial: vec![true; nx as usize],
            f,
            h,
        })
    }

    /// A static strict quantizer as a system: one state, `H(0, a) = Q(a) × {0}`.
    pub fn quantizer_system(q: &Relation) -> Result<Self, RelationError> {
        if !q.is_strict() {
            return Err(RelationError::BadRelation("quantizer must be strict"));
        }
        let mut h = Vec::with_capacity(q.n1 as usize);
        for a in 0..q.n1 {
            h.push(q.image(a).iter().map(|&b| (b, 0)).collect());
        }
        Ok(Self {
            nx: 1,
            nu: q.n1,
            nv: 1,
            ny: q.n2,
            initial: vec![true],
            f: vec![vec![0]],
            h,
        })
    }

    #[inline]
    pub fn n_states(&self) -> u32 {
        self.nx
    }
    #[inline]
    pub fn n_inputs(&self) -> u32 {
        self.nu
    }
    #[inline]
    pub fn n_internal(&self) -> u32 {
        self.nv
    }
    #[inline]
    pub fn n_outputs(&self) -> u32 {
        self.ny
    }

    pub fn initial_states(&self) -> impl Iterator<Item = u32> + '_ {
        (0..self.nx).filter(|&x| self.initial[x as usize])
    }

    #[inline]
    pub fn transitions(&self, x: u32, v: u32) -> &[u32] {
        &self.f[(x * self.nv + v) as usize]
    }

    #[inline]
    pub fn outputs(&self, x: u32, u: u32) -> &[(u32, u32)] {
        &self.h[(x * self.nu + u) as usize]
    }

    /// The output may not depend on the input: for every `(y, v) ∈ H(x, u)`
    /// and every `u'` there is `v'` with `(y, v') ∈ H(x, u')`.
    pub fn is_moore(&self) -> bool {
        for x in 0..self.nx {
            for u in 0..self.nu {
                for &(y, _) in self.outputs(x, u) {
                    for u2 in 0..self.nu {
                        if !self.outputs(x, u2).iter().any(|&(y2, _)| y2 == y) {
                            return false;
                        }
                    }
                }
            }
        }
        true
    }
}

/// Serial composition `S₂ ∘ S₁` (the output of `S₁` drives `S₂`).
///
/// Output ids of `S₁` are identified with input ids of `S₂`, which requires
/// `ny₁ ≤ nu₂`. Product ids are encoded as `a * n_b + b` (states, internal
/// variables alike).
pub fn serial_compose(
    s1: &GeneralSystem,
    s2: &GeneralSystem,
) -> Result<GeneralSystem, RelationError> {
    if s1.ny > s2.nu {
        return Err(RelationError::AlphabetMismatch("Y1 must embed into U2"));
    }
    let nx = s1.nx * s2.nx;
    let nv = s1.nv * s2.nv;
    let mut f = vec![Vec::new(); (nx * nv) as usize];
    for x1 in 0..s1.nx {
        for x2 in 0..s2.nx {
            let x = x1 * s2.nx + x2;
            for v1 in 0..s1.nv {
                for v2 in 0..s2.nv {
                    let v = v1 * s2.nv + v2;
                    let mut succ = Vec::new();
                    for &x1p in s1.transitions(x1, v1) {
                        for &x2p in s2.transitions(x2, v2) {
                            succ.push(x1p * s2.nx + x2p);
                        }
                    }
                    f[(x * nv + v) as usize] = succ;
                }
            }
        }
    }
    let mut h = vec![Vec::new(); (nx * s1.nu) as usize];
    for x1 in 0..s1.nx {
        for x2 in 0..s2.nx {
            let x = x1 * s2.nx + x2;
            for u in 0..s1.nu {
                let mut out = Vec::new();
                for &(y1, v1) in s1.outputs(x1, u) {
                    for &(y2, v2) in s2.outputs(x2, y1) {
                        out.push((y2, v1 * s2.nv + v2));
                    }
                }
                h[(x * s1.nu + u) as usize] = out;
            }
        }
    }
    let initial: Vec<u32> = s1
        .initial_states()
        .flat_map(|x1| s2.initial_states().map(move |x2| x1 * s2.nx + x2))
        .collect();
    GeneralSystem::new(nx, s1.nu, nv, s2.ny, initial, f, h)
}

/// Why a feedback composition was rejected.
#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
pub enum Rejection {
    #[error("plant side of the loop is not Moore")]
    NotMoore,
    #[error("alphabet mismatch: {0}")]
    AlphabetMismatch(&'static str),
    /// The non-blocking condition fails: the plant blocks at `(plant_state,
    /// plant_v)` while the controller continues at `(ctrl_state, ctrl_v)`.
    #[error("composability violated at controller state {ctrl_state}, plant state {plant_state}")]
    Composability {
        ctrl_state: u32,
        plant_state: u32,
        ctrl_v: u32,
        plant_v: u32,
    },
}

/// Feedback composition `C × S` of a controller with a Moore plant.
///
/// Product encodings: state `x_c * nx_s + x_s`, internal `v_c * nv_s + v_s`,
/// output `y_c * ny_s + y_s`. The loop is autonomous (`U = {0}`).
pub fn feedback_compose(
    c: &GeneralSystem,
    s: &GeneralSystem,
) -> Result<GeneralSystem, Rejection> {
    if s.ny > c.nu {
        return Err(Rejection::AlphabetMismatch("plant outputs must embed into controller inputs"));
    }
    if c.ny > s.nu {
        return Err(Rejection::AlphabetMismatch("controller outputs must embed into plant inputs"));
    }
    if !s.is_moore() {
        return Err(Rejection::NotMoore);
    }
    // non-blocking condition: a blocked plant pair forces the controller
    // to block as well
    for xc in 0..c.nx {
        for xs in 0..s.nx {
            for yc in 0..c.ny {
                for &(ys, vs) in s.outputs(xs, yc) {
                    for &(yc2, vc) in c.outputs(xc, ys) {
                        if yc2 != yc {
                            continue;
                        }
                        if s.transitions(xs, vs).is_empty() && !c.transitions(xc, vc).is_empty() {
                            return Err(Rejection::Composability {
                                ctrl_state: xc,
                                plant_state: xs,
                                ctrl_v: vc,
                                plant_v: vs,
                            });
                        }
                    }
                }
            }
        }
    }
    let nx = c.nx * s.nx;
    let nv = c.nv * s.nv;
    let ny = c.ny * s.ny;
    let mut f = vec![Vec::new(); (nx * nv) as usize];
    let mut h = vec![Vec::new(); nx as usize];
    for xc in 0..c.nx {
        for xs in 0..s.nx {
            let x = xc * s.nx + xs;
            for vc in 0..c.nv {
                for vs in 0..s.nv {
                    let v = vc * s.nv + vs;
                    let mut succ = Vec::new();
                    for &xcp in c.transitions(xc, vc) {
                        for &xsp in s.transitions(xs, vs) {
                            succ.push(xcp * s.nx + xsp);
                        }
                    }
                    f[(x * nv + v) as usize] = succ;
                }
            }
            let mut out = Vec::new();
            for yc in 0..c.ny {
                for &(ys, vs) in s.outputs(xs, yc) {
                    for &(yc2, vc) in c.outputs(xc, ys) {
                        if yc2 == yc {
                            out.push((yc * s.ny + ys, vc * s.nv + vs));
                        }
                    }
                }
            }
            h[x as usize] = out;
        }
    }
    let initial: Vec<u32> = c
        .initial_states()
        .flat_map(|xc| s.initial_states().map(move |xs| xc * s.nx + xs))
        .collect();
    GeneralSystem::new(nx, 1, nv, ny, initial, f, h).map_err(|_| Rejection::NotMoore)
}

/// One step of a trace: the input consumed and the output emitted.
pub type Step = (u32, u32);

/// Bounded-horizon behavior prefixes, split by whether the trace ended in a
/// blocked (maximal) pair or was truncated while still continuable.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct BehaviorSet {
    pub blocked: BTreeSet<Vec<Step>>,
    pub live: BTreeSet<Vec<Step>>,
}

impl BehaviorSet {
    pub fn contains_blocked(&self, t: &[Step]) -> bool {
        self.blocked.contains(t)
    }
    pub fn contains_live(&self, t: &[Step]) -> bool {
        self.live.contains(t)
    }
    pub fn len(&self) -> usize {
        self.blocked.len() + self.live.len()
    }
    pub fn is_empty(&self) -> bool {
        self.blocked.is_empty() && self.live.is_empty()
    }
}

/// Exhaustive horizon-truncated behavior enumeration.
///
/// Traces shorter than the horizon appear only when maximal (blocked); a
/// trace of full length is classified `live` when still continuable.
pub fn behaviors(s: &GeneralSystem, horizon: u32, guard: u64) -> Result<BehaviorSet, RelationError> {
    assert!(horizon >= 1, "horizon must be positive");
    let mut set = BehaviorSet::default();
    let mut expansions = 0u64;
    let mut trace: Vec<Step> = Vec::new();
    for x0 in s.initial_states() {
        explore(s, x0, horizon, guard, &mut expansions, &mut trace, &mut set)?;
    }
    Ok(set)
}

fn explore(
    s: &GeneralSystem,
    x: u32,
    remaining: u32,
    guard: u64,
    expansions: &mut u64,
    trace: &mut Vec<Step>,
    out: &mut BehaviorSet,
) -> Result<(), RelationError> {
    for u in 0..s.n_inputs() {
        for &(y, v) in s.outputs(x, u) {
            *expansions += 1;
            if *expansions > guard {
                return Err(RelationError::Explosion);
            }
            trace.push((u, y));
            let succ = s.transitions(x, v);
            if succ.is_empty() {
                out.blocked.insert(trace.clone());
            } else if remaining == 1 {
                out.live.insert(trace.clone());
            } else {
                for &xp in succ {
                    explore(s, xp, remaining - 1, guard, expansions, trace, out)?;
                }
            }
            trace.pop();
        }
    }
    Ok(())
}

/// Strict-checkable binary relation over dense id ranges.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Relation {
    pub n1: u32,
    pub n2: u32,
    img: Vec<Vec<u32>>,
    pre: Vec<Vec<u32>>,
}

impl Relation {
    pub fn from_pairs(n1: u32, n2: u32, pairs: &[(u32, u32)]) -> Result<Self, RelationError> {
        let mut img = vec![Vec::new(); n1 as usize];
        let mut pre = vec![Vec::new(); n2 as usize];
        for &(a, b) in pairs {
            if a >= n1 || b >= n2 {
                return Err(RelationError::BadRelation("pair out of range"));
            }
            img[a as usize].push(b);
            pre[b as usize].push(a);
        }
        for l in img.iter_mut().chain(pre.iter_mut()) {
            l.sort_unstable();
            l.dedup();
        }
        Ok(Self { n1, n2, img, pre })
    }

    pub fn identity(n: u32) -> Self {
        Self {
            n1: n,
            n2: n,
            img: (0..n).map(|i| vec![i]).collect(),
            pre: (0..n).map(|i| vec![i]).collect(),
        }
    }

    /// Membership relation between concrete ids and a cover given as cell
    /// id lists.
    pub fn membership(n1: u32, cover: &[Vec<u32>]) -> Result<Self, RelationError> {
        let mut pairs = Vec::new();
        for (cell, members) in cover.iter().enumerate() {
            for &x in members {
                pairs.push((x, cell as u32));
            }
        }
        Self::from_pairs(n1, cover.len() as u32, &pairs)
    }

    #[inline]
    pub fn image(&self, a: u32) -> &[u32] {
        &self.img[a as usize]
    }

    #[inline]
    pub fn preimage(&self, b: u32) -> &[u32] {
        &self.pre[b as usize]
    }

    pub fn contains(&self, a: u32, b: u32) -> bool {
        self.img[a as usize].binary_search(&b).is_ok()
    }

    /// Every domain element has at least one partner.
    pub fn is_strict(&self) -> bool {
        self.img.iter().all(|l| !l.is_empty())
    }

    pub fn pairs(&self) -> impl Iterator<Item = (u32, u32)> + '_ {
        self.img
            .iter()
            .enumerate()
            .flat_map(|(a, l)| l.iter().map(move |&b| (a as u32, b)))
    }

    /// `other ∘ self`: first `self : X₁ ⇉ X₂`, then `other : X₂ ⇉ X₃`.
    pub fn compose(&self, other: &Relation) -> Result<Relation, RelationError> {
        if self.n2 != other.n1 {
            return Err(RelationError::AlphabetMismatch("relation composition shape"));
        }
        let mut pairs = Vec::new();
        for (a, b) in self.pairs() {
            for &c in other.image(b) {
                pairs.push((a, c));
            }
        }
        Relation::from_pairs(self.n1, other.n2, &pairs)
    }
}

/// Which defining condition of a feedback refinement relation failed.
#[derive(Copy, Clone, Debug, PartialEq, Eq)]
pub enum FrrCondition {
    /// Abstract admissible inputs must be concretely admissible.
    AdmissibleInputs,
    /// Related images of concrete successors must be abstract successors.
    SuccessorContainment,
}

/// A concrete witness that the relation is not a feedback refinement.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FrrWitness {
    pub x1: u32,
    pub x2: u32,
    pub u: u32,
    pub condition: FrrCondition,
    /// For [`FrrCondition::SuccessorContainment`]: the concrete successor
    /// and its related abstract state missing from `F₂(x₂, u)`.
    pub offending: Option<(u32, u32)>,
}

/// Checks whether `q` is a feedback refinement relation from `s1` to `s2`.
///
/// Requires `s2.n_inputs() <= s1.n_inputs()` (abstract inputs are a subset
/// of the concrete ones, identified by id) and a strict `q`.
pub fn check_frr(
    s1: &FiniteSystem,
    s2: &FiniteSystem,
    q: &Relation,
) -> Result<(), FrrWitness> {
    assert!(
        s2.n_inputs() <= s1.n_inputs(),
        "abstract input alphabet must embed into the concrete one"
    );
    assert_eq!(q.n1, s1.n_states(), "relation domain mismatch");
    assert_eq!(q.n2, s2.n_states(), "relation codomain mismatch");
    assert!(q.is_strict(), "the relation must be strict");
    for (x1, x2) in q.pairs() {
        for u in 0..s2.n_inputs() {
            if !s2.is_admissible(x2, u) {
                continue;
            }
            if !s1.is_admissible(x1, u) {
                return Err(FrrWitness {
                    x1,
                    x2,
                    u,
                    condition: FrrCondition::AdmissibleInputs,
                    offending: None,
                });
            }
            for x1p in s1.successors(x1, u) {
                for &x2p in q.image(x1p) {
                    if !s2.successors(x2, u).contains(&x2p) {
                        return Err(FrrWitness {
                            x1,
                            x2,
                            u,
                            condition: FrrCondition::SuccessorContainment,
                            offending: Some((x1p, x2p)),
                        });
                    }
                }
            }
        }
    }
    Ok(())
}

/// Transitivity probe: given two already-verified refinement legs, asserts
/// the composed relation is a refinement as well.
pub fn check_transitivity_fixture(
    s1: &FiniteSystem,
    s2: &FiniteSystem,
    s3: &FiniteSystem,
    q: &Relation,
    r: &Relation,
) -> Result<(), RelationError> {
    check_frr(s1, s2, q).map_err(|_| RelationError::BadRelation("first leg is not a refinement"))?;
    check_frr(s2, s3, r).map_err(|_| RelationError::BadRelation("second leg is not a refinement"))?;
    let rq = q.compose(r)?;
    if check_frr(s1, s3, &rq).is_err() {
        return Err(RelationError::BadRelation(
            "composed relation failed: transitivity is violated",
        ));
    }
    Ok(())
}

/// Violation of the technical pre-condition of the canonical construction.
#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
#[error("canonicity pre-condition violated at states ({x}, {x_tilde}) input {u}")]
pub struct StarViolation {
    pub x: u32,
    pub x_tilde: u32,
    pub u: u32,
}

/// Result of the canonical cover construction.
#[derive(Clone, Debug)]
pub struct Canonicalized {
    /// The constructed abstraction over cover cells.
    pub system: FiniteSystem,
    /// Cover cells as sorted concrete-id lists, indexed by cell id.
    pub cover: Vec<Vec<u32>>,
    /// Membership relation from concrete states into the cover.
    pub membership: Relation,
    /// Relation from cover cells to the original abstract states.
    pub refinement: Relation,
}

/// Builds the canonical cover abstraction from `s3` and a strict relation
/// `q ⊆ X₁ × X₃`: cells are the distinct non-empty preimages `q⁻¹(x₃)`,
/// and `F₂(Ω, u) = R⁻¹(F₃(R(Ω), u))`.
///
/// Fails with a witness when the required interchangeability condition on
/// states with identical preimages does not hold.
pub fn canonicalize(s3: &FiniteSystem, q: &Relation) -> Result<Canonicalized, StarViolation> {
    assert_eq!(q.n2, s3.n_states(), "relation codomain mismatch");
    assert!(q.is_strict(), "the relation must be strict");
    let n3 = s3.n_states();
    // distinct non-empty preimages, in first-occurrence order
    let mut cell_of: BTreeMap<Vec<u32>, u32> = BTreeMap::new();
    let mut cover: Vec<Vec<u32>> = Vec::new();
    let mut cell_of_x3: Vec<Option<u32>> = vec![None; n3 as usize];
    for x3 in 0..n3 {
        let pre = q.preimage(x3).to_vec();
        if pre.is_empty() {
            continue;
        }
        let cell = *cell_of.entry(pre.clone()).or_insert_with(|| {
            cover.push(pre.clone());
            (cover.len() - 1) as u32
        });
        cell_of_x3[x3 as usize] = Some(cell);
    }
    // interchangeability of states with identical preimages
    for x in 0..n3 {
        let Some(cx) = cell_of_x3[x as usize] else { continue };
        for xt in 0..n3 {
            if cell_of_x3[xt as usize] != Some(cx) {
                continue;
            }
            for u in 0..s3.n_inputs() {
                if !s3.is_admissible(x, u) {
                    continue;
                }
                for xtp in s3.successors(xt, u) {
                    if cell_of_x3[xtp as usize].is_none() {
                        continue;
                    }
                    for xp in 0..n3 {
                        if cell_of_x3[xp as usize] == cell_of_x3[xtp as usize]
                            && !s3.successors(x, u).contains(&xp)
                        {
                            return Err(StarViolation { x, x_tilde: xt, u });
                        }
                    }
                }
            }
        }
    }
    // refinement relation R and the induced transition function
    let r_pairs: Vec<(u32, u32)> = (0..n3)
        .filter_map(|x3| cell_of_x3[x3 as usize].map(|c| (c, x3)))
        .collect();
    let refinement = Relation::from_pairs(cover.len() as u32, n3, &r_pairs)
        .expect("refinement pairs are in range");
    let nu = s3.n_inputs();
    let mut lists: Vec<Vec<u32>> = Vec::with_capacity(cover.len() * nu as usize);
    for cell in 0..cover.len() as u32 {
        for u in 0..nu {
            let mut succ: BTreeSet<u32> = BTreeSet::new();
            let mut all_admissible = true;
            for &x3 in refinement.image(cell) {
                if !s3.is_admissible(x3, u) {
                    all_admissible = false;
                    break;
                }
                for x3p in s3.successors(x3, u) {
                    if let Some(cp) = cell_of_x3[x3p as usize] {
                        succ.insert(cp);
                    }
                }
            }
            if all_admissible {
                lists.push(succ.into_iter().collect());
            } else {
                lists.push(Vec::new());
            }
        }
    }
    let system = FiniteSystem::from_lists(cover.len() as u32, nu, lists)
        .expect("canonical table is well-formed");
    let n1 = q.n1;
    let membership = Relation::membership(n1, &cover).expect("membership pairs are in range");
    Ok(Canonicalized {
        system,
        cover,
        membership,
        refinement,
    })
}

/// A behavior of the refined loop with no matching abstract behavior.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CounterTrace {
    /// Which inclusion failed: direct behavior inclusion of the quantized
    /// loop, or the related-shadow property of the refined loop.
    pub shadow: bool,
    pub trace: Vec<Step>,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum InclusionError {
    #[error("composition rejected: {0}")]
    Rejected(#[from] Rejection),
    #[error(transparent)]
    Relation(#[from] RelationError),
    #[error("behavioral inclusion failed")]
    Counter(CounterTrace),
}

/// Verifies both behavioral-inclusion consequences of a feedback refinement
/// relation at a bounded horizon: the behaviors of `C × (Q ∘ S₁)` are
/// behaviors of `C × S₂`, and every behavior of `(C ∘ Q) × S₁` has a
/// `Q`-related shadow in `C × S₂`.
pub fn check_behavioral_inclusion(
    c: &GeneralSystem,
    s1: &FiniteSystem,
    s2: &FiniteSystem,
    q: &Relation,
    horizon: u32,
) -> Result<(), InclusionError> {
    const GUARD: u64 = 10_000_000;
    let quantized = GeneralSystem::quantized_simple(s1, q)?;
    let abstract_plant = GeneralSystem::from_simple(s2);
    let loop_quantized = feedback_compose(c, &quantized)?;
    let loop_abstract = feedback_compose(c, &abstract_plant)?;
    let b_quantized = behaviors(&loop_quantized, horizon, GUARD)?;
    let b_abstract = behaviors(&loop_abstract, horizon, GUARD)?;
    for t in &b_quantized.blocked {
        if !b_abstract.contains_blocked(t) {
            return Err(InclusionError::Counter(CounterTrace {
                shadow: false,
                trace: t.clone(),
            }));
        }
    }
    for t in &b_quantized.live {
        if !b_abstract.contains_live(t) {
            return Err(InclusionError::Counter(CounterTrace {
                shadow: false,
                trace: t.clone(),
            }));
        }
    }

    // refined loop (C ∘ Q) × S₁ and its related shadows
    let qsys = GeneralSystem::quantizer_system(q)?;
    let refined_controller = serial_compose(&qsys, c)?;
    let concrete_plant = GeneralSystem::from_simple(s1);
    let loop_refined = feedback_compose(&refined_controller, &concrete_plant)?;
    let b_refined = behaviors(&loop_refined, horizon, GUARD)?;
    let ny_plant1 = s1.n_states();
    let ny_plant2 = s2.n_states();
    let check_shadow = |trace: &Vec<Step>, blocked: bool| -> bool {
        // outputs of the refined loop are (controller command, concrete state)
        let pool: &BTreeSet<Vec<Step>> = if blocked {
            &b_abstract.blocked
        } else {
            &b_abstract.live
        };
        pool.iter().any(|cand| {
            cand.len() == trace.len()
                && cand.iter().zip(trace).all(|(&(_, ya), &(_, yr))| {
                    let (cmd_a, x2) = (ya / ny_plant2, ya % ny_plant2);
                    let (cmd_r, x1) = (yr / ny_plant1, yr % ny_plant1);
                    cmd_a == cmd_r && q.contains(x1, x2)
                })
        })
    };
    for t in &b_refined.blocked {
        if !check_shadow(t, true) {
            return Err(InclusionError::Counter(CounterTrace {
                shadow: true,
                trace: t.clone(),
            }));
        }
    }
    for t in &b_refined.live {
        if !check_shadow(t, false) {
            return Err(InclusionError::Counter(CounterTrace {
                shadow: true,
                trace: t.clone(),
            }));
        }
    }
    Ok(())
}

/// Parses the plain-text adjacency fixture format for finite simple systems:
///
/// ```text
/// # comment
/// states 3 inputs 2
/// 0 0: 1 2
/// 2 1: 0
/// ```
///
/// Pairs without a line are blocked (empty successor set).
pub fn parse_finite_system(text: &str) -> Result<FiniteSystem, RelationError> {
    let mut n_states: Option<u32> = None;
    let mut n_inputs: Option<u32> = None;
    let mut entries: Vec<(u32, u32, Vec<u32>)> = Vec::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let mk_err = |reason| RelationError::Parse {
            line: lineno + 1,
            reason,
        };
        if let Some(rest) = line.strip_prefix("states") {
            let mut it = rest.split_whitespace();
            let ns = it
                .next()
                .and_then(|t| t.parse().ok())
                .ok_or(mk_err("expected state count"))?;
            if it.next() != Some("inputs") {
                return Err(mk_err("expected `inputs`"));
            }
            let ni = it
                .next()
                .and_then(|t| t.parse().ok())
                .ok_or(mk_err("expected input count"))?;
            n_states = Some(ns);
            n_inputs = Some(ni);
            continue;
        }
        let (head, tail) = line.split_once(':').ok_or(mk_err("expected `x u: succ...`"))?;
        let mut it = head.split_whitespace();
        let x: u32 = it
            .next()
            .and_then(|t| t.parse().ok())
            .ok_or(mk_err("expected state id"))?;
        let u: u32 = it
            .next()
            .and_then(|t| t.parse().ok())
            .ok_or(mk_err("expected input id"))?;
        if it.next().is_some() {
            return Err(mk_err("trailing tokens before `:`"));
        }
        let mut succ = Vec::new();
        for tok in tail.split_whitespace() {
            succ.push(tok.parse().map_err(|_| mk_err("bad successor id"))?);
        }
        entries.push((x, u, succ));
    }
    let (ns, ni) = match (n_states, n_inputs) {
        (Some(a), Some(b)) => (a, b),
        _ => {
            return Err(RelationError::Parse {
                line: 0,
                reason: "missing `states N inputs M` header",
            })
        }
    };
    let mut lists = vec![Vec::new(); ns as usize * ni as usize];
    for (x, u, succ) in entries {
        if x >= ns || u >= ni {
            return Err(RelationError::Parse {
                line: 0,
                reason: "pair out of range",
            });
        }
        lists[(x * ni + u) as usize].extend(succ);
    }
    FiniteSystem::from_lists(ns, ni, lists)
        .map_err(|_| RelationError::BadSystem("fixture table is malformed"))
}

/// Serializes a list-stored system in the fixture format.
pub fn write_finite_system(sys: &FiniteSystem) -> Result<String, RelationError> {
    use core::fmt::Write;
    let lists = sys
        .listed_parts()
        .ok_or(RelationError::BadSystem("only list-stored systems serialize as fixtures"))?;
    let mut out = String::new();
    let _ = writeln!(out, "states {} inputs {}", sys.n_states(), sys.n_inputs());
    for x in 0..sys.n_states() {
        for u in 0..sys.n_inputs() {
            let l = &lists[(x * sys.n_inputs() + u) as usize];
            if l.is_empty() {
                continue;
            }
            let _ = write!(out, "{x} {u}:");
            for s in l {
                let _ = write!(out, " {s}");
            }
            let _ = writeln!(out);
        }
    }
    Ok(out)
}

/// Parses the relation fixture format:
///
/// ```text
/// relation 3 2
/// 0: 0
/// 1: 0 1
/// ```
pub fn parse_relation(text: &str) -> Result<Relation, RelationError> {
    let mut shape: Option<(u32, u32)> = None;
    let mut pairs: Vec<(u32, u32)> = Vec::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let mk_err = |reason| RelationError::Parse {
            line: lineno + 1,
            reason,
        };
        if let Some(rest) = line.strip_prefix("relation") {
            let mut it = rest.split_whitespace();
            let a = it
                .next()
                .and_then(|t| t.parse().ok())
                .ok_or(mk_err("expected domain size"))?;
            let b = it
                .next()
                .and_then(|t| t.parse().ok())
                .ok_or(mk_err("expected codomain size"))?;
            shape = Some((a, b));
            continue;
        }
        let (head, tail) = line.split_once(':').ok_or(mk_err("expected `x: partners`"))?;
        let a: u32 = head
            .trim()
            .parse()
            .map_err(|_| mk_err("bad domain id"))?;
        for tok in tail.split_whitespace() {
            let b: u32 = tok.parse().map_err(|_| mk_err("bad codomain id"))?;
            pairs.push((a, b));
        }
    }
    let (n1, n2) = shape.ok_or(RelationError::Parse {
        line: 0,
        reason: "missing `relation N1 N2` header",
    })?;
    Relation::from_pairs(n1, n2, &pairs)
}

/// Serializes a relation in the fixture format.
pub fn write_relation(r: &Relation) -> String {
    use core::fmt::Write;
    let mut out = String::new();
    let _ = writeln!(out, "relation {} {}", r.n1, r.n2);
    for a in 0..r.n1 {
        let l = r.image(a);
        if l.is_empty() {
            continue;
        }
        let _ = write!(out, "{a}:");
        for b in l {
            let _ = write!(out, " {b}");
        }
        let _ = writeln!(out);
    }
    out
}
