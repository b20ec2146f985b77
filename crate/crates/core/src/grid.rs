//! Uniform grid covers of ℝⁿ and exact integer geometry on them.
//!
//! The abstract state alphabet is a uniform cover of a compact box by closed
//! hyper-interval cells plus unbounded overflow regions. Cells overlap on
//! shared faces; quantization is nevertheless a function because every
//! coordinate is mapped to an index with a single `floor` per dimension, and
//! all geometry after that one rounding step is exact integer arithmetic.
//! The same quantization map is used for points and for box corners, so
//! interval containment commutes with quantization even in floating point:
//! if `a ≤ x ≤ b` component-wise then the cell of `x` lies inside the
//! lattice box spanned by the quantized corners of `[a, b]`.

use alloc::vec;
use alloc::vec::Vec;

use crate::math;

/// Identifier of a compact grid cell (row-major over the multi-index).
#[derive(Copy, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Debug)]
pub struct CellId(pub u32);

impl CellId {
    #[inline(always)]
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

/// Errors raised by grid and interval constructors.
#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum GridError {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("invalid bounds in dimension {dim}: lower bound must be finite and <= upper bound")]
    InvalidBounds { dim: usize },
    #[error("invalid grid parameter: {0}")]
    InvalidParameter(&'static str),
    #[error("grid has too many cells for 32-bit ids")]
    TooManyCells,
    #[error("cannot decode a blocked successor box")]
    DecodeBlocked,
}

/// Non-empty axis-aligned closed box `⟦lb, ub⟧` with finite corners.
///
/// Degenerate boxes (`lb == ub` in some dimension) are valid.
#[derive(Clone, Debug, PartialEq)]
pub struct HyperInterval {
    lb: Vec<f64>,
    ub: Vec<f64>,
}

impl HyperInterval {
    pub fn new(lb: Vec<f64>, ub: Vec<f64>) -> Result<Self, GridError> {
        if lb.len() != ub.len() || lb.is_empty() {
            return Err(GridError::DimensionMismatch {
                expected: lb.len().max(1),
                found: ub.len(),
            });
        }
        for d in 0..lb.len() {
            if !lb[d].is_finite() || !ub[d].is_finite() || lb[d] > ub[d] {
                return Err(GridError::InvalidBounds { dim: d });
            }
        }
        Ok(Self { lb, ub })
    }

    /// `⟦c − r, c + r⟧` for a center and a component-wise radius `r ≥ 0`.
    pub fn from_center_radius(center: &[f64], radius: &[f64]) -> Result<Self, GridError> {
        if center.len() != radius.len() {
            return Err(GridError::DimensionMismatch {
                expected: center.len(),
                found: radius.len(),
            });
        }
        let lb: Vec<f64> = center.iter().zip(radius).map(|(c, r)| c - r).collect();
        let ub: Vec<f64> = center.iter().zip(radius).map(|(c, r)| c + r).collect();
        Self::new(lb, ub)
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.lb.len()
    }

    #[inline]
    pub fn lb(&self) -> &[f64] {
        &self.lb
    }

    #[inline]
    pub fn ub(&self) -> &[f64] {
        &self.ub
    }

    pub fn center(&self) -> Vec<f64> {
        self.lb
            .iter()
            .zip(&self.ub)
            .map(|(a, b)| 0.5 * (a + b))
            .collect()
    }

    pub fn radius(&self) -> Vec<f64> {
        self.lb
            .iter()
            .zip(&self.ub)
            .map(|(a, b)| 0.5 * (b - a))
            .collect()
    }

    /// Closed membership test.
    pub fn contains(&self, x: &[f64]) -> bool {
        assert_eq!(x.len(), self.dim(), "point dimension mismatch");
        x.iter()
            .enumerate()
            .all(|(d, &v)| self.lb[d] <= v && v <= self.ub[d])
    }

    /// Closed intersection test.
    pub fn intersects(&self, other: &HyperInterval) -> bool {
        assert_eq!(other.dim(), self.dim(), "box dimension mismatch");
        (0..self.dim()).all(|d| self.lb[d] <= other.ub[d] && other.lb[d] <= self.ub[d])
    }

    /// `self ⊆ other` (closed).
    pub fn subset_of(&self, other: &HyperInterval) -> bool {
        assert_eq!(other.dim(), self.dim(), "box dimension mismatch");
        (0..self.dim()).all(|d| other.lb[d] <= self.lb[d] && self.ub[d] <= other.ub[d])
    }

    /// The box grown by `pad ≥ 0` in every direction.
    pub fn inflate(&self, pad: &[f64]) -> HyperInterval {
        assert_eq!(pad.len(), self.dim(), "pad dimension mismatch");
        HyperInterval {
            lb: self.lb.iter().zip(pad).map(|(a, p)| a - p).collect(),
            ub: self.ub.iter().zip(pad).map(|(b, p)| b + p).collect(),
        }
    }
}

/// `b ⊆ ∪ union`, decided exactly by splitting `b` along the faces of the
/// covering boxes. All boxes are closed.
pub fn box_in_union(b: &HyperInterval, union: &[HyperInterval]) -> bool {
    // Pick a box that covers a full-dimensional part of `b`, carve `b` along
    // its faces and recurse on the leftover slabs. Covers that only touch a
    // face of `b` are skipped: they contribute nothing to covering the
    // interior, and splitting on them would not shrink the query. Splits
    // always happen at face coordinates strictly inside the query, so the
    // recursion terminates.
    for cover in union {
        let proper = (0..b.dim()).all(|d| {
            if b.lb[d] == b.ub[d] {
                cover.lb[d] <= b.lb[d] && b.lb[d] <= cover.ub[d]
            } else {
                cover.lb[d] < b.ub[d] && b.lb[d] < cover.ub[d]
            }
        });
        if !proper {
            continue;
        }
        let mut rest = b.clone();
        let mut pieces: Vec<HyperInterval> = Vec::new();
        for d in 0..b.dim() {
            if rest.lb[d] < cover.lb[d] {
                let mut piece = rest.clone();
                piece.ub[d] = cover.lb[d];
                pieces.push(piece);
                rest.lb[d] = cover.lb[d];
            }
            if rest.ub[d] > cover.ub[d] {
                let mut piece = rest.clone();
                piece.lb[d] = cover.ub[d];
                pieces.push(piece);
                rest.ub[d] = cover.ub[d];
            }
        }
        return pieces.iter().all(|piece| box_in_union(piece, union));
    }
    false
}

/// Result of quantizing a point.
#[derive(Copy, Clone, PartialEq, Eq, Debug)]
pub enum Quantized {
    Cell(CellId),
    /// The point lies outside the compact region on a non-periodic dimension.
    Overflow,
}

impl Quantized {
    pub fn cell(self) -> Option<CellId> {
        match self {
            Quantized::Cell(c) => Some(c),
            Quantized::Overflow => None,
        }
    }
}

/// Lattice box of cell multi-indices, corners inclusive.
///
/// On periodic dimensions `hi` may be smaller than `lo`, in which case the
/// range wraps around once; it never covers a dimension more than once.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LatticeBox {
    lo: Vec<u32>,
    hi: Vec<u32>,
}

impl LatticeBox {
    pub fn new(lo: Vec<u32>, hi: Vec<u32>) -> Self {
        assert_eq!(lo.len(), hi.len());
        Self { lo, hi }
    }

    #[inline]
    pub fn lo(&self) -> &[u32] {
        &self.lo
    }

    #[inline]
    pub fn hi(&self) -> &[u32] {
        &self.hi
    }

    /// Number of cells covered in dimension `d`.
    #[inline]
    pub fn span(&self, grid: &UniformGridCover, d: usize) -> u32 {
        if self.hi[d] >= self.lo[d] {
            self.hi[d] - self.lo[d] + 1
        } else {
            grid.counts[d] - self.lo[d] + self.hi[d] + 1
        }
    }

    pub fn cell_count(&self, grid: &UniformGridCover) -> u64 {
        (0..self.lo.len()).map(|d| self.span(grid, d) as u64).product()
    }

    /// Cyclic per-dimension membership of a multi-index.
    pub fn contains_index(&self, idx: &[u32]) -> bool {
        debug_assert_eq!(idx.len(), self.lo.len());
        (0..idx.len()).all(|d| {
            if self.hi[d] >= self.lo[d] {
                self.lo[d] <= idx[d] && idx[d] <= self.hi[d]
            } else {
                // wrapped range on a periodic dimension
                idx[d] >= self.lo[d] || idx[d] <= self.hi[d]
            }
        })
    }

    pub fn contains_cell(&self, grid: &UniformGridCover, cell: CellId) -> bool {
        let mut idx = vec![0u32; self.lo.len()];
        grid.multi_index_into(cell, &mut idx);
        self.contains_index(&idx)
    }

    /// Enumerates every linear cell id in the (possibly wrapped) box.
    pub fn cells(&self, grid: &UniformGridCover) -> Vec<CellId> {
        let dim = self.lo.len();
        let mut out = Vec::with_capacity(self.cell_count(grid) as usize);
        let mut offs = vec![0u32; dim];
        loop {
            let mut id = 0u32;
            for d in 0..dim {
                let k = (self.lo[d] + offs[d]) % grid.counts[d];
                id += k * grid.strides[d];
            }
            out.push(CellId(id));
            // odometer over the per-dimension spans
            let mut d = dim;
            loop {
                if d == 0 {
                    return out;
                }
                d -= 1;
                offs[d] += 1;
                if offs[d] < self.span(grid, d) {
                    break;
                }
                offs[d] = 0;
            }
        }
    }

    /// True when every cell of the box satisfies `member`.
    pub fn all_in(&self, grid: &UniformGridCover, member: &[bool]) -> bool {
        self.scan(grid, &mut |id| member[id as usize])
    }

    /// True when some cell of the box satisfies `pred`.
    pub fn any_in(&self, grid: &UniformGridCover, pred: &[bool]) -> bool {
        !self.scan(grid, &mut |id| !pred[id as usize])
    }

    /// Allocation-free conjunction scan with early exit.
    fn scan(&self, grid: &UniformGridCover, keep: &mut dyn FnMut(u32) -> bool) -> bool {
        scan_dim(&self.lo, &self.hi, grid, 0, 0, keep)
    }
}

/// Conjunction scan over the cells of a lattice box stored as compact
/// 16-bit corners, without materializing it. `keep` must return `true` to
/// continue.
pub(crate) fn scan_corners16(
    lo: &[u16],
    hi: &[u16],
    grid: &UniformGridCover,
    keep: &mut dyn FnMut(u32) -> bool,
) -> bool {
    scan_dim16(lo, hi, grid, 0, 0, keep)
}

/// Number of cells of a compact corner-encoded lattice box.
pub(crate) fn corner_count16(lo: &[u16], hi: &[u16], grid: &UniformGridCover) -> u64 {
    (0..lo.len())
        .map(|d| {
            if hi[d] >= lo[d] {
                (hi[d] - lo[d] + 1) as u64
            } else {
                (grid.counts[d] - lo[d] as u32 + hi[d] as u32 + 1) as u64
            }
        })
        .product()
}

fn scan_dim16(
    lo: &[u16],
    hi: &[u16],
    grid: &UniformGridCover,
    d: usize,
    base: u32,
    keep: &mut dyn FnMut(u32) -> bool,
) -> bool {
    let count = grid.counts[d];
    let stride = grid.strides[d];
    let span = if hi[d] >= lo[d] {
        (hi[d] - lo[d] + 1) as u32
    } else {
        count - lo[d] as u32 + hi[d] as u32 + 1
    };
    let mut k = lo[d] as u32;
    for _ in 0..span {
        let id = base + k * stride;
        if d + 1 == lo.len() {
            if !keep(id) {
                return false;
            }
        } else if !scan_dim16(lo, hi, grid, d + 1, id, keep) {
            return false;
        }
        k += 1;
        if k == count {
            k = 0;
        }
    }
    true
}

fn scan_dim(
    lo: &[u32],
    hi: &[u32],
    grid: &UniformGridCover,
    d: usize,
    base: u32,
    keep: &mut dyn FnMut(u32) -> bool,
) -> bool {
    let count = grid.counts[d];
    let stride = grid.strides[d];
    let span = if hi[d] >= lo[d] {
        hi[d] - lo[d] + 1
    } else {
        count - lo[d] + hi[d] + 1
    };
    let mut k = lo[d];
    for _ in 0..span {
        let id = base + k * stride;
        if d + 1 == lo.len() {
            if !keep(id) {
                return false;
            }
        } else if !scan_dim(lo, hi, grid, d + 1, id, keep) {
            return false;
        }
        k += 1;
        if k == count {
            k = 0;
        }
    }
    true
}

/// Over-approximated successor set of one state-input pair, stored as the
/// two lattice corners of a cell box.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum SuccessorBox {
    /// The pair has an empty successor set (blocking).
    Blocked,
    Box(LatticeBox),
}

impl SuccessorBox {
    /// Enumerates the cell ids of the box.
    pub fn decode(&self, grid: &UniformGridCover) -> Result<Vec<CellId>, GridError> {
        match self {
            SuccessorBox::Blocked => Err(GridError::DecodeBlocked),
            SuccessorBox::Box(b) => Ok(b.cells(grid)),
        }
    }
}

/// Uniform cover of ℝⁿ: a compact box of closed, face-overlapping cells plus
/// implicit overflow regions outside it.
///
/// Cell `k` (multi-index) has center `first_center + k·eta` and radius
/// `eta/2 + inflation`; the inflation models measurement error absorbed into
/// the cells. On periodic dimensions index arithmetic wraps modulo `counts`
/// and there is no overflow.
#[derive(Clone, Debug, PartialEq)]
pub struct UniformGridCover {
    first_center: Vec<f64>,
    eta: Vec<f64>,
    counts: Vec<u32>,
    periodic: Vec<bool>,
    inflation: Vec<f64>,
    strides: Vec<u32>,
    n_cells: u32,
}

impl UniformGridCover {
    pub fn new(
        first_center: Vec<f64>,
        eta: Vec<f64>,
        counts: Vec<u32>,
        periodic: Vec<bool>,
        inflation: Vec<f64>,
    ) -> Result<Self, GridError> {
        let dim = first_center.len();
        if dim == 0 {
            return Err(GridError::InvalidParameter("grid must have dimension >= 1"));
        }
        for len in [eta.len(), counts.len(), periodic.len(), inflation.len()] {
            if len != dim {
                return Err(GridError::DimensionMismatch {
                    expected: dim,
                    found: len,
                });
            }
        }
        if first_center.iter().any(|v| !v.is_finite()) {
            return Err(GridError::InvalidParameter("first_center must be finite"));
        }
        if eta.iter().any(|&e| !(e > 0.0) || !e.is_finite()) {
            return Err(GridError::InvalidParameter("eta must be positive and finite"));
        }
        if counts.iter().any(|&c| c == 0) {
            return Err(GridError::InvalidParameter("counts must be positive"));
        }
        if inflation.iter().any(|&r| !(r >= 0.0) || !r.is_finite()) {
            return Err(GridError::InvalidParameter("inflation must be non-negative"));
        }
        let mut n: u64 = 1;
        for &c in &counts {
            n = n.saturating_mul(c as u64);
        }
        if n > u32::MAX as u64 {
            return Err(GridError::TooManyCells);
        }
        let mut strides = vec![0u32; dim];
        let mut s: u64 = 1;
        for d in (0..dim).rev() {
            strides[d] = s as u32;
            s *= counts[d] as u64;
        }
        Ok(Self {
            first_center,
            eta,
            counts,
            periodic,
            inflation,
            strides,
            n_cells: n as u32,
        })
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.first_center.len()
    }

    #[inline]
    pub fn n_cells(&self) -> u32 {
        self.n_cells
    }

    #[inline]
    pub fn first_center(&self) -> &[f64] {
        &self.first_center
    }

    #[inline]
    pub fn eta(&self) -> &[f64] {
        &self.eta
    }

    #[inline]
    pub fn counts(&self) -> &[u32] {
        &self.counts
    }

    #[inline]
    pub fn periodic(&self) -> &[bool] {
        &self.periodic
    }

    #[inline]
    pub fn inflation(&self) -> &[f64] {
        &self.inflation
    }

    /// `counts[d] · eta[d]`, the spatial period of a periodic dimension.
    #[inline]
    pub fn period_length(&self, d: usize) -> f64 {
        self.counts[d] as f64 * self.eta[d]
    }

    /// Cell radius `eta/2 + inflation`.
    pub fn cell_radius(&self) -> Vec<f64> {
        self.eta
            .iter()
            .zip(&self.inflation)
            .map(|(e, i)| 0.5 * e + i)
            .collect()
    }

    #[inline]
    pub fn cell_id(&self, idx: &[u32]) -> CellId {
        debug_assert_eq!(idx.len(), self.dim());
        let mut id = 0u32;
        for d in 0..idx.len() {
            debug_assert!(idx[d] < self.counts[d]);
            id += idx[d] * self.strides[d];
        }
        CellId(id)
    }

    pub fn multi_index(&self, cell: CellId) -> Vec<u32> {
        let mut idx = vec![0u32; self.dim()];
        self.multi_index_into(cell, &mut idx);
        idx
    }

    #[inline]
    pub fn multi_index_into(&self, cell: CellId, out: &mut [u32]) {
        debug_assert!(cell.0 < self.n_cells);
        let mut rest = cell.0;
        for d in 0..self.dim() {
            out[d] = rest / self.strides[d];
            rest %= self.strides[d];
        }
    }

    pub fn cell_center(&self, cell: CellId) -> Vec<f64> {
        let mut c = vec![0.0; self.dim()];
        self.cell_center_into(cell, &mut c);
        c
    }

    pub fn cell_center_into(&self, cell: CellId, out: &mut [f64]) {
        debug_assert!(cell.0 < self.n_cells);
        let mut rest = cell.0;
        for d in 0..self.dim() {
            let k = rest / self.strides[d];
            rest %= self.strides[d];
            out[d] = self.first_center[d] + k as f64 * self.eta[d];
        }
    }

    /// Closed cell extent without inflation, `center ± eta/2`.
    pub fn cell_extent(&self, cell: CellId) -> HyperInterval {
        let c = self.cell_center(cell);
        let r: Vec<f64> = self.eta.iter().map(|e| 0.5 * e).collect();
        HyperInterval::from_center_radius(&c, &r).expect("cell extent is a valid box")
    }

    /// Closed cell extent including inflation, `center ± (eta/2 + inflation)`.
    pub fn inflated_extent(&self, cell: CellId) -> HyperInterval {
        let c = self.cell_center(cell);
        let r = self.cell_radius();
        HyperInterval::from_center_radius(&c, &r).expect("cell extent is a valid box")
    }

    /// The single rounding step: coordinate to raw (unwrapped) index.
    #[inline(always)]
    fn raw_index(&self, d: usize, x: f64) -> i64 {
        math::floor((x - self.first_center[d]) / self.eta[d] + 0.5) as i64
    }

    /// Quantizes a point to the unique cell whose half-open index slot
    /// contains it, wrapping on periodic dimensions.
    ///
    /// Panics if `x.len() != self.dim()`.
    pub fn cell_of_point(&self, x: &[f64]) -> Quantized {
        assert_eq!(x.len(), self.dim(), "point dimension mismatch");
        let mut id = 0u32;
        for d in 0..x.len() {
            let mut k = self.raw_index(d, x[d]);
            if self.periodic[d] {
                k = k.rem_euclid(self.counts[d] as i64);
            } else if k < 0 || k >= self.counts[d] as i64 {
                return Quantized::Overflow;
            }
            id += k as u32 * self.strides[d];
        }
        Quantized::Cell(CellId(id))
    }

    /// Tight lattice box of all compact cells whose (inflated) extent meets
    /// the box, or [`SuccessorBox::Blocked`] when the box reaches an
    /// overflow region on a non-periodic dimension.
    ///
    /// Face ties are resolved exactly like [`Self::cell_of_point`], so the
    /// cell of any point of the box is always contained in the result.
    ///
    /// Panics if `b.dim() != self.dim()`.
    pub fn cells_intersecting(&self, b: &HyperInterval) -> SuccessorBox {
        assert_eq!(b.dim(), self.dim(), "box dimension mismatch");
        let mut lo = vec![0u32; self.dim()];
        let mut hi = vec![0u32; self.dim()];
        for d in 0..self.dim() {
            let raw_lo = self.raw_index(d, b.lb()[d] - self.inflation[d]);
            let raw_hi = self.raw_index(d, b.ub()[d] + self.inflation[d]);
            debug_assert!(raw_lo <= raw_hi);
            let count = self.counts[d] as i64;
            if self.periodic[d] {
                if raw_hi - raw_lo + 1 >= count {
                    // the box wraps all the way around; cover the dimension once
                    lo[d] = 0;
                    hi[d] = (count - 1) as u32;
                } else {
                    lo[d] = raw_lo.rem_euclid(count) as u32;
                    hi[d] = raw_hi.rem_euclid(count) as u32;
                }
            } else {
                if raw_lo < 0 || raw_hi >= count {
                    return SuccessorBox::Blocked;
                }
                lo[d] = raw_lo as u32;
                hi[d] = raw_hi as u32;
            }
        }
        SuccessorBox::Box(LatticeBox::new(lo, hi))
    }

    /// All cells whose inflated closed extent contains the point; a single
    /// cell when the inflation is zero.
    pub fn cells_containing(&self, x: &[f64]) -> SuccessorBox {
        let b = HyperInterval::from_center_radius(x, &vec![0.0; x.len()])
            .expect("point box is valid");
        self.cells_intersecting(&b)
    }

    /// Wraps periodic coordinates into the grid's principal window
    /// `[first_center − eta/2, first_center − eta/2 + period)`; non-periodic
    /// coordinates pass through.
    pub fn wrap_point(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.dim(), "point dimension mismatch");
        let mut out = Vec::with_capacity(x.len());
        for d in 0..x.len() {
            if self.periodic[d] {
                let lo = self.first_center[d] - 0.5 * self.eta[d];
                let period = self.period_length(d);
                let t = (x[d] - lo) / period;
                out.push(lo + (t - math::floor(t)) * period);
            } else {
                out.push(x[d]);
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use core::f64::consts::PI;

    fn vehicle_grid() -> UniformGridCover {
        UniformGridCover::new(
            vec![0.0, 0.0, -34.0 * PI / 35.0],
            vec![0.2, 0.2, 2.0 * PI / 35.0],
            vec![51, 51, 35],
            vec![false, false, true],
            vec![0.0; 3],
        )
        .unwrap()
    }

    #[test]
    fn quantizes_vehicle_point() {
        let g = vehicle_grid();
        let q = g.cell_of_point(&[0.4, 0.4, 0.0]);
        let cell = q.cell().expect("inside the compact region");
        assert_eq!(g.multi_index(cell), vec![2, 2, 17]);
    }

    #[test]
    fn quantizes_first_center_to_origin_cell() {
        let g = vehicle_grid();
        let cell = g
            .cell_of_point(&g.first_center().to_vec())
            .cell()
            .unwrap();
        assert_eq!(g.multi_index(cell), vec![0, 0, 0]);
    }

    #[test]
    fn point_outside_nonperiodic_range_overflows() {
        let g = vehicle_grid();
        assert_eq!(g.cell_of_point(&[-10.0, 0.4, 0.0]), Quantized::Overflow);
    }

    #[test]
    fn point_wraps_on_periodic_dimension() {
        let g = vehicle_grid();
        let a = g.cell_of_point(&[0.4, 0.4, 0.1]).cell().unwrap();
        let b = g
            .cell_of_point(&[0.4, 0.4, 0.1 + g.period_length(2)])
            .cell()
            .unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn point_box_hits_single_cell() {
        let g = vehicle_grid();
        let c = g.cell_center(CellId(1234));
        let b = HyperInterval::from_center_radius(&c, &[0.0; 3]).unwrap();
        match g.cells_intersecting(&b) {
            SuccessorBox::Box(lb) => {
                assert_eq!(lb.lo(), lb.hi());
                assert_eq!(lb.cells(&g), vec![CellId(1234)]);
            }
            SuccessorBox::Blocked => panic!("point query must not block"),
        }
    }

    #[test]
    fn box_spanning_two_interiors_spans_two_cells() {
        let g = vehicle_grid();
        let cell = g.cell_id(&[5, 5, 17]);
        let c = g.cell_center(cell);
        // interior of cell (5,·,·) and of its right neighbour in dimension 0
        let b = HyperInterval::new(
            vec![c[0] + 0.05, c[1], c[2]],
            vec![c[0] + 0.25, c[1], c[2]],
        )
        .unwrap();
        match g.cells_intersecting(&b) {
            SuccessorBox::Box(lb) => {
                assert_eq!(lb.hi()[0] - lb.lo()[0], 1);
                assert_eq!(lb.lo()[1], lb.hi()[1]);
                assert_eq!(lb.lo()[2], lb.hi()[2]);
            }
            SuccessorBox::Blocked => panic!(),
        }
    }

    /// Oracle: enumerate all 35 θ-cells and intersect their closed extents
    /// with the query arc, unwrapped over three periods.
    fn theta_cells_oracle(g: &UniformGridCover, lo: f64, hi: f64) -> Vec<u32> {
        let period = g.period_length(2);
        let mut hit = vec![false; 35];
        for k in 0..35u32 {
            let c = g.first_center()[2] + k as f64 * g.eta()[2];
            let r = 0.5 * g.eta()[2];
            for shift in [-period, 0.0, period] {
                // half-open attribution of shared faces, matching the quantizer
                if c + shift - r < hi && lo < c + shift + r {
                    hit[k as usize] = true;
                }
                // exact face touches land in the upper cell
                if c + shift - r == lo || c + shift - r == hi {
                    hit[k as usize] = true;
                }
            }
        }
        (0..35).filter(|&k| hit[k as usize]).collect()
    }

    #[test]
    fn wrapped_theta_range_covers_last_and_first_cell() {
        let g = vehicle_grid();
        let center = PI - PI / 70.0;
        let r = PI / 35.0;
        let b = HyperInterval::new(
            vec![0.4, 0.4, center - r],
            vec![0.4, 0.4, center + r],
        )
        .unwrap();
        let sb = g.cells_intersecting(&b);
        let cells = sb.decode(&g).unwrap();
        let mut thetas: Vec<u32> = cells.iter().map(|&c| g.multi_index(c)[2]).collect();
        thetas.sort_unstable();
        assert_eq!(thetas, vec![0, 34]);
        assert_eq!(cells.len(), 2);
        assert_eq!(
            theta_cells_oracle(&g, center - r, center + r),
            vec![0, 34]
        );
    }

    #[test]
    fn translating_by_period_leaves_intersection_unchanged() {
        let g = vehicle_grid();
        let b = HyperInterval::new(vec![1.0, 2.0, 0.3], vec![1.5, 2.2, 0.8]).unwrap();
        let shifted = HyperInterval::new(
            vec![1.0, 2.0, 0.3 + g.period_length(2)],
            vec![1.5, 2.2, 0.8 + g.period_length(2)],
        )
        .unwrap();
        assert_eq!(g.cells_intersecting(&b), g.cells_intersecting(&shifted));
    }

    #[test]
    fn box_poking_outside_blocks() {
        let g = vehicle_grid();
        let b = HyperInterval::new(vec![-0.3, 0.4, 0.0], vec![0.4, 0.5, 0.1]).unwrap();
        assert_eq!(g.cells_intersecting(&b), SuccessorBox::Blocked);
    }

    #[test]
    fn decode_singleton_and_square() {
        let g = UniformGridCover::new(
            vec![0.0, 0.0],
            vec![1.0, 1.0],
            vec![4, 4],
            vec![false, false],
            vec![0.0, 0.0],
        )
        .unwrap();
        let single = LatticeBox::new(vec![3, 2], vec![3, 2]);
        assert_eq!(single.cells(&g), vec![g.cell_id(&[3, 2])]);
        let square = LatticeBox::new(vec![0, 0], vec![1, 1]);
        assert_eq!(square.cells(&g).len(), 4);
        assert_eq!(
            SuccessorBox::Blocked.decode(&g),
            Err(GridError::DecodeBlocked)
        );
    }

    #[test]
    fn round_trip_center_of_every_cell() {
        let g = UniformGridCover::new(
            vec![-1.0, 2.0, 0.5],
            vec![0.25, 0.5, 0.75],
            vec![7, 5, 9],
            vec![false, true, false],
            vec![0.0; 3],
        )
        .unwrap();
        for id in 0..g.n_cells() {
            let cell = CellId(id);
            let c = g.cell_center(cell);
            assert_eq!(g.cell_of_point(&c), Quantized::Cell(cell));
        }
    }

    #[test]
    fn cover_property_faces_lie_in_two_closed_cells() {
        let g = UniformGridCover::new(
            vec![0.0, 0.0],
            vec![0.5, 0.5],
            vec![8, 8],
            vec![false, false],
            vec![0.0, 0.0],
        )
        .unwrap();
        // a point on the face shared by cells (2,·) and (3,·)
        let face_x = 0.5 * (g.cell_center(g.cell_id(&[2, 4]))[0]
            + g.cell_center(g.cell_id(&[3, 4]))[0]);
        let p = [face_x, g.cell_center(g.cell_id(&[3, 4]))[1]];
        let containing: Vec<CellId> = (0..g.n_cells())
            .map(CellId)
            .filter(|&c| g.cell_extent(c).contains(&p))
            .collect();
        assert!(containing.len() >= 2);
        // quantization still picks exactly one of them
        let q = g.cell_of_point(&p).cell().unwrap();
        assert!(containing.contains(&q));
        // interior points lie in exactly one cell
        let interior = g.cell_center(g.cell_id(&[3, 4]));
        let containing: Vec<CellId> = (0..g.n_cells())
            .map(CellId)
            .filter(|&c| g.cell_extent(c).contains(&interior))
            .collect();
        assert_eq!(containing, vec![g.cell_id(&[3, 4])]);
    }

    #[test]
    fn inflated_cells_overlap_their_neighbours() {
        let g = UniformGridCover::new(
            vec![0.0],
            vec![1.0],
            vec![10],
            vec![false],
            vec![0.25],
        )
        .unwrap();
        let c = g.cell_center(CellId(4));
        let b = HyperInterval::from_center_radius(&c, &[0.0]).unwrap();
        // the point box meets the inflated extents of cells 4 and its
        // upper neighbour would require |x - c5| <= 0.75, i.e. not here
        let got = g.cells_intersecting(&b).decode(&g).unwrap();
        assert_eq!(got, vec![CellId(4)]);
        // but a point 0.4 to the right also meets cell 5's inflated extent
        let b = HyperInterval::from_center_radius(&[c[0] + 0.4], &[0.0]).unwrap();
        let got = g.cells_intersecting(&b).decode(&g).unwrap();
        assert_eq!(got, vec![CellId(4), CellId(5)]);
    }

    #[test]
    fn box_in_union_splits_exactly() {
        let u = vec![
            HyperInterval::new(vec![0.0, 0.0], vec![1.0, 2.0]).unwrap(),
            HyperInterval::new(vec![1.0, 0.0], vec![2.0, 1.0]).unwrap(),
            HyperInterval::new(vec![1.0, 1.0], vec![2.0, 2.0]).unwrap(),
        ];
        let q = HyperInterval::new(vec![0.2, 0.2], vec![1.8, 1.8]).unwrap();
        assert!(box_in_union(&q, &u));
        let q = HyperInterval::new(vec![0.2, 0.2], vec![2.2, 1.8]).unwrap();
        assert!(!box_in_union(&q, &u));
        // union with a genuine hole
        let holed = vec![
            HyperInterval::new(vec![0.0, 0.0], vec![3.0, 1.0]).unwrap(),
            HyperInterval::new(vec![0.0, 2.0], vec![3.0, 3.0]).unwrap(),
        ];
        let q = HyperInterval::new(vec![1.0, 0.5], vec![2.0, 2.5]).unwrap();
        assert!(!box_in_union(&q, &holed));
    }
}
