//! Communication and interference graphs as per-node neighbor lists.
//!
//! Two constructions produce the same lists: a cell-linked list, which bins
//! nodes into cells at least one range wide and compares only nodes in
//! adjacent cells (O(N * N_c)), and the all-pairs O(N^2) scan kept as a
//! reference and benchmark baseline.

use crate::geometry::{Domain, Position};
use crate::{Result, SimError};

const EMPTY: usize = usize::MAX;

/// Spatial hash of node ids into a regular grid of cells.
///
/// Occupancy is stored as a linked list threaded through `next`, with
/// `head` holding the first node of each cell.
#[derive(Clone, Debug)]
pub struct CellGrid {
    cells_x: usize,
    cells_y: usize,
    cell_w: f64,
    cell_h: f64,
    head: Vec<usize>,
    next: Vec<usize>,
}

impl CellGrid {
    /// Bins `positions` into cells of edge `lx / floor(lx / range)` (and the
    /// same along y), so cells tile the domain exactly and are never smaller
    /// than `range`.
    pub fn build(positions: &[Position], domain: &Domain, range: f64) -> Result<Self> {
        let (cells_x, cells_y) = Self::dimensions(domain, range)?;
        let mut grid = Self {
            cells_x,
            cells_y,
            cell_w: domain.lx / cells_x as f64,
            cell_h: domain.ly / cells_y as f64,
            head: vec![EMPTY; cells_x * cells_y],
            next: vec![EMPTY; positions.len()],
        };
        for (id, &p) in positions.iter().enumerate() {
            let (ix, iy) = grid.cell_of(p);
            let c = grid.index(ix, iy);
            grid.next[id] = grid.head[c];
            grid.head[c] = id;
        }
        Ok(grid)
    }

    /// Cell counts per axis for a grid serving `range`.
    pub fn dimensions(domain: &Domain, range: f64) -> Result<(usize, usize)> {
        if !(range.is_finite() && range > 0.0) {
            return Err(SimError::InvalidParameter(format!("range must be positive, got {range}")));
        }
        let nx = (domain.lx / range).floor();
        let ny = (domain.ly / range).floor();
        if nx < 1.0 {
            return Err(SimError::RangeExceedsDomain { range, edge: domain.lx });
        }
        if ny < 1.0 {
            return Err(SimError::RangeExceedsDomain { range, edge: domain.ly });
        }
        Ok((nx as usize, ny as usize))
    }

    pub fn cells_x(&self) -> usize {
        self.cells_x
    }

    pub fn cells_y(&self) -> usize {
        self.cells_y
    }

    /// Cell edge lengths along x and y.
    pub fn cell_size(&self) -> (f64, f64) {
        (self.cell_w, self.cell_h)
    }

    #[inline]
    pub fn cell_of(&self, p: Position) -> (usize, usize) {
        let ix = ((p.x / self.cell_w).floor().max(0.0) as usize).min(self.cells_x - 1);
        let iy = ((p.y / self.cell_h).floor().max(0.0) as usize).min(self.cells_y - 1);
        (ix, iy)
    }

    #[inline]
    fn index(&self, ix: usize, iy: usize) -> usize {
        iy * self.cells_x + ix
    }

    /// Node ids binned into cell `(ix, iy)`.
    pub fn members(&self, ix: usize, iy: usize) -> CellMembers<'_> {
        CellMembers { grid: self, cursor: self.head[self.index(ix, iy)] }
    }

    pub fn total_occupancy(&self) -> usize {
        (0..self.cells_y)
            .flat_map(|iy| (0..self.cells_x).map(move |ix| (ix, iy)))
            .map(|(ix, iy)| self.members(ix, iy).count())
            .sum()
    }

    /// Distinct cells in the 3x3 stencil around `(ix, iy)`, including itself.
    /// Wraps on a torus, clips at the walls otherwise.
    fn stencil(&self, ix: usize, iy: usize, periodic: bool) -> Vec<usize> {
        let xs = axis_neighbors(ix, self.cells_x, periodic);
        let ys = axis_neighbors(iy, self.cells_y, periodic);
        let mut out = Vec::with_capacity(9);
        for &y in &ys {
            for &x in &xs {
                out.push(self.index(x, y));
            }
        }
        out
    }
}

fn axis_neighbors(i: usize, n: usize, periodic: bool) -> Vec<usize> {
    let mut out = Vec::with_capacity(3);
    out.push(i);
    if periodic {
        for j in [(i + n - 1) % n, (i + 1) % n] {
            if !out.contains(&j) {
                out.push(j);
            }
        }
    } else {
        if i > 0 {
            out.push(i - 1);
        }
        if i + 1 < n {
            out.push(i + 1);
        }
    }
    out
}

pub struct CellMembers<'a> {
    grid: &'a CellGrid,
    cursor: usize,
}

impl Iterator for CellMembers<'_> {
    type Item = usize;

    fn next(&mut self) -> Option<usize> {
        if self.cursor == EMPTY {
            return None;
        }
        let id = self.cursor;
        self.cursor = self.grid.next[id];
        Some(id)
    }
}

/// Adjacency of one graph (communication or interference) in sparse form.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct NeighborLists {
    lists: Vec<Vec<usize>>,
    /// Distance evaluations spent building the lists.
    pub pair_evals: u64,
}

impl NeighborLists {
    fn from_raw(mut lists: Vec<Vec<usize>>, pair_evals: u64) -> Self {
        for l in &mut lists {
            l.sort_unstable();
        }
        Self { lists, pair_evals }
    }

    /// Builds lists from explicit adjacency, sorting each list. Used for
    /// hand-made graphs; no symmetry check is made.
    pub fn from_lists(lists: Vec<Vec<usize>>) -> Self {
        Self::from_raw(lists, 0)
    }

    pub fn len(&self) -> usize {
        self.lists.len()
    }

    pub fn is_empty(&self) -> bool {
        self.lists.is_empty()
    }

    /// Sorted neighbor ids of node `i`.
    pub fn neighbors(&self, i: usize) -> &[usize] {
        &self.lists[i]
    }

    pub fn contains(&self, i: usize, j: usize) -> bool {
        self.lists[i].binary_search(&j).is_ok()
    }

    pub fn edge_count(&self) -> usize {
        self.lists.iter().map(Vec::len).sum::<usize>() / 2
    }

    pub fn mean_degree(&self) -> f64 {
        if self.lists.is_empty() {
            return 0.0;
        }
        2.0 * self.edge_count() as f64 / self.lists.len() as f64
    }

    /// Checks symmetry and the absence of self loops.
    pub fn is_consistent(&self) -> bool {
        self.lists.iter().enumerate().all(|(i, l)| {
            !l.contains(&i) && l.iter().all(|&j| j < self.lists.len() && self.contains(j, i))
        })
    }

    /// True when every list of `self` is contained in the matching list of `other`.
    pub fn is_subgraph_of(&self, other: &NeighborLists) -> bool {
        self.lists.len() == other.lists.len()
            && self
                .lists
                .iter()
                .enumerate()
                .all(|(i, l)| l.iter().all(|&j| other.contains(i, j)))
    }

    /// Same adjacency, ignoring `pair_evals`.
    pub fn same_graph(&self, other: &NeighborLists) -> bool {
        self.lists == other.lists
    }

    pub fn iter(&self) -> impl Iterator<Item = &[usize]> {
        self.lists.iter().map(Vec::as_slice)
    }
}

/// Which neighbor-list construction to use.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Method {
    BruteForce,
    CellList,
}

impl Method {
    pub fn as_str(self) -> &'static str {
        match self {
            Method::BruteForce => "brute_force",
            Method::CellList => "cell_list",
        }
    }

    pub fn build(self, positions: &[Position], domain: &Domain, range: f64) -> Result<NeighborLists> {
        match self {
            Method::BruteForce => Ok(neighbors_brute_force(positions, domain, range)),
            Method::CellList => neighbors_cell_list(positions, domain, range),
        }
    }
}

impl std::fmt::Display for Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Free-function form of [`CellGrid::build`].
pub fn build_grid(positions: &[Position], domain: &Domain, range: f64) -> Result<CellGrid> {
    CellGrid::build(positions, domain, range)
}

/// Free-function form of [`CellGrid::cell_of`].
pub fn cell_of(p: Position, grid: &CellGrid) -> (usize, usize) {
    grid.cell_of(p)
}

/// Soft warning when a range is too large for cell lists to pay off.
pub fn grid_warning(domain: &Domain, range: f64) -> Option<String> {
    let limit = domain.lx.min(domain.ly) / 3.0;
    (range > limit).then(|| {
        format!("range {range} m exceeds a third of the domain edge; the cell list degenerates towards all-pairs")
    })
}

/// Neighbor lists within `range` (inclusive) using a cell-linked list.
///
/// Each unordered pair of stencil-adjacent cells is visited once, so every
/// candidate pair costs exactly one distance evaluation.
pub fn neighbors_cell_list(positions: &[Position], domain: &Domain, range: f64) -> Result<NeighborLists> {
    let grid = CellGrid::build(positions, domain, range)?;
    let mut lists = vec![Vec::new(); positions.len()];
    let mut evals = 0u64;
    let mut here = Vec::new();

    for iy in 0..grid.cells_y {
        for ix in 0..grid.cells_x {
            let c = grid.index(ix, iy);
            here.clear();
            here.extend(grid.members(ix, iy));
            if here.is_empty() {
                continue;
            }
            for other in grid.stencil(ix, iy, domain.periodic) {
                if other < c {
                    continue;
                }
                if other == c {
                    for (a, &i) in here.iter().enumerate() {
                        for &j in &here[a + 1..] {
                            evals += 1;
                            link(&mut lists, positions, domain, range, i, j);
                        }
                    }
                } else {
                    let mut cursor = grid.head[other];
                    while cursor != EMPTY {
                        let j = cursor;
                        for &i in &here {
                            evals += 1;
                            link(&mut lists, positions, domain, range, i, j);
                        }
                        cursor = grid.next[j];
                    }
                }
            }
        }
    }
    Ok(NeighborLists::from_raw(lists, evals))
}

/// Neighbor lists within `range` (inclusive) by comparing every pair.
pub fn neighbors_brute_force(positions: &[Position], domain: &Domain, range: f64) -> NeighborLists {
    let n = positions.len();
    let mut lists = vec![Vec::new(); n];
    for i in 0..n {
        for j in i + 1..n {
            link(&mut lists, positions, domain, range, i, j);
        }
    }
    let evals = (n as u64) * (n.saturating_sub(1) as u64) / 2;
    NeighborLists::from_raw(lists, evals)
}

#[inline]
fn link(lists: &mut [Vec<usize>], positions: &[Position], domain: &Domain, range: f64, i: usize, j: usize) {
    if domain.distance(positions[i], positions[j]) <= range {
        lists[i].push(j);
        lists[j].push(i);
    }
}

/// Undirected edge list `(i, j)` with `i < j`, sorted lexicographically.
pub fn export_graph(lists: &NeighborLists) -> Vec<(usize, usize)> {
    let mut edges: Vec<(usize, usize)> = lists
        .iter()
        .enumerate()
        .flat_map(|(i, l)| l.iter().filter(move |&&j| j > i).map(move |&j| (i, j)))
        .collect();
    edges.sort_unstable();
    edges.dedup();
    edges
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn square(l: f64, periodic: bool) -> Domain {
        Domain::square(l, periodic).unwrap()
    }

    fn scatter(n: usize, d: &Domain, seed: u64) -> Vec<Position> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n)
            .map(|_| Position::new(rng.gen_range(0.0..d.lx), rng.gen_range(0.0..d.ly)))
            .collect()
    }

    fn grid_for(l: f64, range: f64) -> CellGrid {
        CellGrid::build(&[], &square(l, false), range).unwrap()
    }

    #[test]
    fn cell_of_examples() {
        let g = grid_for(1000.0, 10.0);
        assert_eq!(g.cell_of(Position::new(5.0, 5.0)), (0, 0));
        assert_eq!(g.cell_of(Position::new(10.0, 5.0)), (1, 0));
        let g = grid_for(1000.0, 100.0);
        assert_eq!(g.cell_of(Position::new(999.9, 999.9)), (9, 9));
    }

    #[test]
    fn grid_dimensions_follow_exact_fit() {
        let g = grid_for(1000.0, 100.0);
        assert_eq!((g.cells_x(), g.cells_y()), (10, 10));
        assert_eq!(g.cell_size(), (100.0, 100.0));
        let g = grid_for(1000.0, 95.0);
        assert_eq!(g.cells_x(), 10);
        assert_eq!(g.cell_size().0, 100.0);
        let g = grid_for(1000.0, 600.0);
        assert_eq!((g.cells_x(), g.cells_y()), (1, 1));
        assert!(matches!(
            CellGrid::build(&[], &square(1000.0, false), 1200.0),
            Err(SimError::RangeExceedsDomain { .. })
        ));
    }

    #[test]
    fn every_node_in_exactly_one_cell() {
        let d = square(500.0, true);
        let pts = scatter(300, &d, 3);
        let g = CellGrid::build(&pts, &d, 40.0).unwrap();
        assert_eq!(g.total_occupancy(), 300);
        let mut seen = vec![0; 300];
        for iy in 0..g.cells_y() {
            for ix in 0..g.cells_x() {
                for id in g.members(ix, iy) {
                    seen[id] += 1;
                    assert_eq!(g.cell_of(pts[id]), (ix, iy));
                }
            }
        }
        assert!(seen.iter().all(|&c| c == 1));
    }

    #[test]
    fn single_node_has_no_neighbors() {
        let d = square(100.0, false);
        let l = neighbors_cell_list(&[Position::new(1.0, 1.0)], &d, 10.0).unwrap();
        assert_eq!(l.neighbors(0), &[] as &[usize]);
        assert_eq!(l.pair_evals, 0);
    }

    #[test]
    fn boundary_distance_is_inclusive() {
        let d = square(100.0, false);
        let pts = [Position::new(10.0, 10.0), Position::new(20.0, 10.0)];
        let cl = neighbors_cell_list(&pts, &d, 10.0).unwrap();
        assert_eq!(cl.neighbors(0), &[1]);
        assert_eq!(cl.neighbors(1), &[0]);
        assert!(cl.same_graph(&neighbors_brute_force(&pts, &d, 10.0)));
    }

    #[test]
    fn brute_force_counts_all_pairs() {
        let d = square(1000.0, false);
        assert_eq!(neighbors_brute_force(&scatter(100, &d, 1), &d, 50.0).pair_evals, 4950);
        let far = [Position::new(0.0, 0.0), Position::new(500.0, 0.0)];
        let l = neighbors_brute_force(&far, &d, 100.0);
        assert!(l.neighbors(0).is_empty() && l.neighbors(1).is_empty());
    }

    #[test]
    fn wrap_links_across_the_seam() {
        let d = square(1000.0, true);
        let pts = [Position::new(2.0, 500.0), Position::new(995.0, 500.0)];
        let cl = neighbors_cell_list(&pts, &d, 10.0).unwrap();
        assert_eq!(cl.neighbors(0), &[1]);
        let open = square(1000.0, false);
        assert!(neighbors_cell_list(&pts, &open, 10.0).unwrap().neighbors(0).is_empty());
    }

    #[test]
    fn uniform_200_matches_brute_force() {
        for periodic in [false, true] {
            let d = square(1000.0, periodic);
            for seed in 0..5 {
                let pts = scatter(200, &d, seed);
                let cl = neighbors_cell_list(&pts, &d, 100.0).unwrap();
                let bf = neighbors_brute_force(&pts, &d, 100.0);
                assert!(cl.same_graph(&bf));
                assert!(cl.pair_evals < bf.pair_evals);
            }
        }
    }

    #[test]
    fn small_periodic_grids_do_not_double_count() {
        // 2x2 and 1x1 periodic grids: stencil neighbors coincide
        for range in [400.0, 600.0, 1000.0] {
            let d = square(1000.0, true);
            let pts = scatter(80, &d, 9);
            let cl = neighbors_cell_list(&pts, &d, range).unwrap();
            let bf = neighbors_brute_force(&pts, &d, range);
            assert!(cl.same_graph(&bf));
            assert!(cl.pair_evals <= bf.pair_evals);
        }
    }

    #[test]
    fn export_examples() {
        let l = NeighborLists::from_lists(vec![vec![1], vec![0]]);
        assert_eq!(export_graph(&l), vec![(0, 1)]);
        assert!(export_graph(&NeighborLists::from_lists(vec![])).is_empty());
        let tri = NeighborLists::from_lists(vec![vec![1, 2], vec![0, 2], vec![0, 1]]);
        assert_eq!(export_graph(&tri), vec![(0, 1), (0, 2), (1, 2)]);
    }

    #[test]
    fn warning_for_oversized_range() {
        let d = square(900.0, false);
        assert!(grid_warning(&d, 301.0).is_some());
        assert!(grid_warning(&d, 300.0).is_none());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn cell_list_equals_brute_force(n in 1usize..400, range in 10.0..400.0f64,
                                        periodic: bool, seed: u64, lx in 800.0..1600.0f64) {
            let d = Domain::new(lx, 1000.0, periodic).unwrap();
            let pts = scatter(n, &d, seed);
            let cl = neighbors_cell_list(&pts, &d, range).unwrap();
            let bf = neighbors_brute_force(&pts, &d, range);
            prop_assert!(cl.same_graph(&bf));
            prop_assert!(cl.is_consistent());
            prop_assert!(cl.pair_evals <= bf.pair_evals);
        }

        #[test]
        fn communication_within_interference(n in 1usize..300, range in 10.0..150.0f64,
                                             mult in 1.0..3.0f64, periodic: bool, seed: u64) {
            let d = square(1000.0, periodic);
            let pts = scatter(n, &d, seed);
            let comm = neighbors_cell_list(&pts, &d, range).unwrap();
            let intf = neighbors_cell_list(&pts, &d, range * mult).unwrap();
            prop_assert!(comm.is_subgraph_of(&intf));
        }
    }
}
