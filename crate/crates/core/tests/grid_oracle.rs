//! Brute-force oracles and property tests for the grid geometry.

use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use symcon_core::grid::{HyperInterval, SuccessorBox, UniformGridCover};

fn desk_grid() -> UniformGridCover {
    // 18 * 14 * 11 = 2772 cells, one periodic dimension, one inflated
    UniformGridCover::new(
        vec![-1.0, 0.5, 3.0],
        vec![0.23, 0.17, 0.4],
        vec![18, 14, 11],
        vec![false, true, false],
        vec![0.0, 0.0, 0.05],
    )
    .unwrap()
}

/// Closed-extent scan with the quantizer's face attribution: a cell meets
/// the box when its extent overlaps it, where the shared lower face belongs
/// to the cell and the shared upper face to its neighbour.
fn brute_force_cells(grid: &UniformGridCover, b: &HyperInterval) -> Option<Vec<u32>> {
    let mut out = Vec::new();
    'cells: for id in 0..grid.n_cells() {
        let c = grid.cell_center(symcon_core::CellId(id));
        for d in 0..grid.dim() {
            let r = 0.5 * grid.eta()[d] + grid.inflation()[d];
            let lo = b.lb()[d];
            let hi = b.ub()[d];
            let meets = |center: f64| lo < center + r && center - r <= hi;
            let hit = if grid.periodic()[d] {
                let p = grid.period_length(d);
                meets(c[d] - p) || meets(c[d]) || meets(c[d] + p)
            } else {
                meets(c[d])
            };
            if !hit {
                continue 'cells;
            }
        }
        out.push(id);
    }
    // overflow check on non-periodic dimensions
    for d in 0..grid.dim() {
        if grid.periodic()[d] {
            continue;
        }
        let lo_edge = grid.first_center()[d] - 0.5 * grid.eta()[d];
        let hi_edge = lo_edge + grid.counts()[d] as f64 * grid.eta()[d];
        if b.lb()[d] - grid.inflation()[d] < lo_edge || b.ub()[d] + grid.inflation()[d] >= hi_edge
        {
            return None;
        }
    }
    Some(out)
}

#[test]
fn intersection_matches_brute_force_on_random_boxes() {
    let grid = desk_grid();
    let mut rng = ChaCha8Rng::seed_from_u64(31);
    let mut blocked = 0u32;
    for _ in 0..1000 {
        let mut lb = Vec::new();
        let mut ub = Vec::new();
        for d in 0..3 {
            let lo_edge = grid.first_center()[d] - 0.5 * grid.eta()[d];
            let span = grid.counts()[d] as f64 * grid.eta()[d];
            let a = lo_edge - 0.3 + rng.gen::<f64>() * (span + 0.3);
            let w = rng.gen::<f64>() * 2.0 * grid.eta()[d];
            lb.push(a);
            ub.push(a + w);
        }
        let b = HyperInterval::new(lb, ub).unwrap();
        let got = grid.cells_intersecting(&b);
        match (brute_force_cells(&grid, &b), got) {
            (None, SuccessorBox::Blocked) => blocked += 1,
            (Some(expect), SuccessorBox::Box(lbox)) => {
                let mut decoded: Vec<u32> =
                    lbox.cells(&grid).into_iter().map(|c| c.0).collect();
                decoded.sort_unstable();
                assert_eq!(decoded, expect);
            }
            (oracle, got) => panic!("oracle {oracle:?} vs implementation {got:?}"),
        }
    }
    assert!(blocked > 50, "the sample must exercise the overflow path");
}

#[test]
fn periodic_translation_leaves_intersections_unchanged() {
    let grid = desk_grid();
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    for _ in 0..500 {
        let mut lb = Vec::new();
        let mut ub = Vec::new();
        for d in 0..3 {
            let a = grid.first_center()[d] + rng.gen::<f64>() * 2.0;
            lb.push(a);
            ub.push(a + rng.gen::<f64>() * grid.eta()[d]);
        }
        let b = HyperInterval::new(lb.clone(), ub.clone()).unwrap();
        lb[1] += grid.period_length(1);
        ub[1] += grid.period_length(1);
        let shifted = HyperInterval::new(lb, ub).unwrap();
        assert_eq!(grid.cells_intersecting(&b), grid.cells_intersecting(&shifted));
    }
}

#[test]
fn compact_region_is_covered_and_faces_overlap() {
    let grid = UniformGridCover::new(
        vec![0.0, 0.0],
        vec![0.5, 0.25],
        vec![6, 8],
        vec![false, false],
        vec![0.0, 0.0],
    )
    .unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let in_some_closed_cell = |p: &[f64]| -> usize {
        (0..grid.n_cells())
            .filter(|&c| grid.cell_extent(symcon_core::CellId(c)).contains(p))
            .count()
    };
    for _ in 0..500 {
        let p = [
            -0.25 + rng.gen::<f64>() * 3.0,
            -0.125 + rng.gen::<f64>() * 2.0,
        ];
        assert!(in_some_closed_cell(&p) >= 1);
    }
    // points on shared faces lie in at least two closed cells
    let face = [0.25, 0.1];
    assert!(in_some_closed_cell(&face) >= 2);
    let corner = [0.25, 0.125];
    assert!(in_some_closed_cell(&corner) >= 4);
}

proptest! {
    /// Quantization commutes with interval containment: the cell of any
    /// point of a box lies in the decoded intersection of the box.
    #[test]
    fn quantizer_consistency(
        seed in 0u64..1_000,
        t in proptest::collection::vec(0.0f64..1.0, 3),
        w in proptest::collection::vec(0.0f64..0.6, 3),
    ) {
        let grid = desk_grid();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut lb = Vec::new();
        let mut ub = Vec::new();
        for d in 0..3 {
            let lo_edge = grid.first_center()[d] - 0.5 * grid.eta()[d];
            let span = grid.counts()[d] as f64 * grid.eta()[d];
            let a = lo_edge + t[d] * span * 0.8;
            lb.push(a);
            ub.push(a + w[d] * grid.eta()[d]);
        }
        let b = HyperInterval::new(lb.clone(), ub.clone()).unwrap();
        if let SuccessorBox::Box(lbox) = grid.cells_intersecting(&b) {
            for _ in 0..16 {
                let p: Vec<f64> = (0..3)
                    .map(|d| lb[d] + rng.gen::<f64>() * (ub[d] - lb[d]))
                    .collect();
                if let symcon_core::Quantized::Cell(cell) = grid.cell_of_point(&p) {
                    prop_assert!(
                        lbox.contains_cell(&grid, cell),
                        "point {p:?} of box {b:?} quantizes outside the lattice box"
                    );
                }
            }
        }
    }

    /// Round trip: the center of every cell quantizes back to the cell.
    #[test]
    fn center_round_trip(
        counts in proptest::collection::vec(1u32..9, 1..4),
        periodic_bits in proptest::collection::vec(any::<bool>(), 1..4),
    ) {
        let dim = counts.len();
        let periodic: Vec<bool> = (0..dim).map(|d| *periodic_bits.get(d).unwrap_or(&false)).collect();
        let grid = UniformGridCover::new(
            vec![0.37; dim],
            vec![0.21; dim],
            counts,
            periodic,
            vec![0.0; dim],
        ).unwrap();
        for id in 0..grid.n_cells() {
            let cell = symcon_core::CellId(id);
            let c = grid.cell_center(cell);
            prop_assert_eq!(grid.cell_of_point(&c), symcon_core::Quantized::Cell(cell));
        }
    }
}
