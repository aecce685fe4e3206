//! Grid-world domain types, the A* heuristic, and classical planners.
//!
//! Maps are eight-connected lattices. Entering a node costs `cost(v')`, so
//! axis and diagonal moves are priced the same. Classical planners double as
//! baselines (A*, weighted A*, best-first) and as oracles (Dijkstra).

use alloc::collections::{BinaryHeap, VecDeque};
use alloc::format;
use alloc::vec;
use alloc::vec::Vec;
use core::cmp::Ordering;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::math;

/// Cost assigned to impassable or disconnected nodes inside the classical planners.
pub const UNREACHABLE: f64 = f64::MAX;

/// Weight of the Euclidean tie-break term added to the Chebyshev heuristic.
pub const DEFAULT_TIE_BREAK: f64 = 0.001;

/// Neighbour offsets in row-major order.
const OFFSETS: [(isize, isize); 8] = [(-1, -1), (-1, 0), (-1, 1), (0, -1), (0, 1), (1, -1), (1, 0), (1, 1)];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct NodeIndex {
    pub row: usize,
    pub col: usize,
}

impl NodeIndex {
    pub const fn new(row: usize, col: usize) -> Self {
        Self { row, col }
    }

    /// Row-major linear index for a map of the given width.
    #[inline]
    pub const fn linear(self, width: usize) -> usize {
        self.row * width + self.col
    }

    #[inline]
    pub const fn from_linear(index: usize, width: usize) -> Self {
        Self { row: index / width, col: index % width }
    }

    /// True when `other` is one of the eight neighbours of `self`.
    pub fn is_adjacent(self, other: NodeIndex) -> bool {
        let dr = self.row.abs_diff(other.row);
        let dc = self.col.abs_diff(other.col);
        dr <= 1 && dc <= 1 && (dr, dc) != (0, 0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum MapKind {
    Binary,
    Image,
}

#[derive(Debug, Clone, PartialEq)]
enum MapData {
    /// 1 = passable, 0 = obstacle.
    Binary(Vec<u8>),
    /// Channel-major RGB planes in `[0, 1]`, length `3 * height * width`.
    Image(Vec<f64>),
}

/// A binary passability grid or a three-channel raw image over the node lattice.
#[derive(Debug, Clone, PartialEq)]
pub struct GridMap {
    height: usize,
    width: usize,
    data: MapData,
}

impl GridMap {
    pub fn binary(height: usize, width: usize, cells: Vec<u8>) -> Result<Self> {
        check_dims(height, width)?;
        if cells.len() != height * width {
            return Err(Error::shape(format!(
                "binary map {height}x{width} needs {} cells, got {}",
                height * width,
                cells.len()
            )));
        }
        if cells.iter().any(|&c| c > 1) {
            return Err(Error::invalid("binary map cells must be 0 or 1"));
        }
        Ok(Self { height, width, data: MapData::Binary(cells) })
    }

    /// All cells passable.
    pub fn open(height: usize, width: usize) -> Result<Self> {
        Self::binary(height, width, vec![1; height * width])
    }

    /// Builds a binary map from text rows where `#` marks an obstacle.
    pub fn from_ascii(rows: &[&str]) -> Result<Self> {
        let height = rows.len();
        let width = rows.first().map_or(0, |r| r.len());
        let mut cells = Vec::with_capacity(height * width);
        for row in rows {
            if row.len() != width {
                return Err(Error::shape("ragged ascii map"));
            }
            cells.extend(row.bytes().map(|b| u8::from(b != b'#')));
        }
        Self::binary(height, width, cells)
    }

    pub fn image(height: usize, width: usize, planes: Vec<f64>) -> Result<Self> {
        check_dims(height, width)?;
        if planes.len() != 3 * height * width {
            return Err(Error::shape(format!(
                "image map {height}x{width} needs {} values, got {}",
                3 * height * width,
                planes.len()
            )));
        }
        if planes.iter().any(|v| !(0.0..=1.0).contains(v)) {
            return Err(Error::invalid("image values must lie in [0, 1]"));
        }
        Ok(Self { height, width, data: MapData::Image(planes) })
    }

    #[inline]
    pub fn height(&self) -> usize {
        self.height
    }

    #[inline]
    pub fn width(&self) -> usize {
        self.width
    }

    /// Number of nodes.
    #[inline]
    pub fn len(&self) -> usize {
        self.height * self.width
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn kind(&self) -> MapKind {
        match self.data {
            MapData::Binary(_) => MapKind::Binary,
            MapData::Image(_) => MapKind::Image,
        }
    }

    pub fn binary_cells(&self) -> Option<&[u8]> {
        match &self.data {
            MapData::Binary(c) => Some(c),
            MapData::Image(_) => None,
        }
    }

    pub fn image_planes(&self) -> Option<&[f64]> {
        match &self.data {
            MapData::Image(p) => Some(p),
            MapData::Binary(_) => None,
        }
    }

    pub fn contains(&self, v: NodeIndex) -> bool {
        v.row < self.height && v.col < self.width
    }

    /// Image maps carry no explicit obstacles, so every node counts as passable.
    #[inline]
    pub fn is_passable(&self, v: NodeIndex) -> bool {
        self.passable_at(v.linear(self.width))
    }

    #[inline]
    pub fn passable_at(&self, index: usize) -> bool {
        match &self.data {
            MapData::Binary(c) => c[index] == 1,
            MapData::Image(_) => true,
        }
    }

    /// The map as a `{0, 1}` matrix `X` (all ones for images).
    pub fn passability(&self) -> Vec<f64> {
        (0..self.len()).map(|i| if self.passable_at(i) { 1.0 } else { 0.0 }).collect()
    }

    pub fn passable_count(&self) -> usize {
        (0..self.len()).filter(|&i| self.passable_at(i)).count()
    }

    pub fn node(&self, index: usize) -> NodeIndex {
        NodeIndex::from_linear(index, self.width)
    }
}

fn check_dims(height: usize, width: usize) -> Result<()> {
    if height == 0 || width == 0 {
        return Err(Error::invalid("map dimensions must be positive"));
    }
    Ok(())
}

/// A `{0, 1}` matrix over the node lattice.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct NodeMask {
    height: usize,
    width: usize,
    values: Vec<u8>,
}

impl NodeMask {
    pub fn zeros(height: usize, width: usize) -> Self {
        Self { height, width, values: vec![0; height * width] }
    }

    pub fn from_values(height: usize, width: usize, values: Vec<u8>) -> Result<Self> {
        if values.len() != height * width {
            return Err(Error::shape("mask length does not match its dimensions"));
        }
        if values.iter().any(|&v| v > 1) {
            return Err(Error::invalid("mask values must be 0 or 1"));
        }
        Ok(Self { height, width, values })
    }

    pub fn from_nodes(height: usize, width: usize, nodes: &[NodeIndex]) -> Result<Self> {
        let mut mask = Self::zeros(height, width);
        for &v in nodes {
            if v.row >= height || v.col >= width {
                return Err(Error::invalid(format!("node {v:?} outside {height}x{width}")));
            }
            mask.set(v, true);
        }
        Ok(mask)
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn values(&self) -> &[u8] {
        &self.values
    }

    #[inline]
    pub fn get(&self, v: NodeIndex) -> bool {
        self.values[v.linear(self.width)] == 1
    }

    #[inline]
    pub fn set(&mut self, v: NodeIndex, on: bool) {
        let w = self.width;
        self.values[v.linear(w)] = u8::from(on);
    }

    pub fn count(&self) -> usize {
        self.values.iter().filter(|&&v| v == 1).count()
    }

    pub fn to_f64(&self) -> Vec<f64> {
        self.values.iter().map(|&v| f64::from(v)).collect()
    }

    /// Set cells in row-major order.
    pub fn nodes(&self) -> Vec<NodeIndex> {
        self.values
            .iter()
            .enumerate()
            .filter(|(_, &v)| v == 1)
            .map(|(i, _)| NodeIndex::from_linear(i, self.width))
            .collect()
    }

    /// True when the set cells form a single eight-connected component.
    pub fn is_connected(&self) -> bool {
        let Some(first) = self.values.iter().position(|&v| v == 1) else {
            return true;
        };
        let mut seen = vec![false; self.values.len()];
        let mut queue = VecDeque::from([first]);
        seen[first] = true;
        let mut reached = 0;
        while let Some(i) = queue.pop_front() {
            reached += 1;
            for_each_neighbor(self.height, self.width, i, |j| {
                if self.values[j] == 1 && !seen[j] {
                    seen[j] = true;
                    queue.push_back(j);
                }
            });
        }
        reached == self.count()
    }
}

/// A non-negative real field over the node lattice (`G`, `H`, `Φ`).
#[derive(Debug, Clone, PartialEq)]
pub struct ScalarField {
    height: usize,
    width: usize,
    values: Vec<f64>,
}

impl ScalarField {
    pub fn new(height: usize, width: usize, values: Vec<f64>) -> Result<Self> {
        if values.len() != height * width {
            return Err(Error::shape("field length does not match its dimensions"));
        }
        if values.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
            return Err(Error::invalid("scalar field values must be finite and non-negative"));
        }
        Ok(Self { height, width, values })
    }

    pub fn filled(height: usize, width: usize, value: f64) -> Self {
        Self { height, width, values: vec![value; height * width] }
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    #[inline]
    pub fn get(&self, v: NodeIndex) -> f64 {
        self.values[v.linear(self.width)]
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }
}

/// A start/goal query on a map, optionally with an expert path.
#[derive(Debug, Clone, PartialEq)]
pub struct ProblemInstance {
    pub map: GridMap,
    pub start: NodeIndex,
    pub goal: NodeIndex,
    pub gt_path: Option<NodeMask>,
}

impl ProblemInstance {
    pub fn new(map: GridMap, start: NodeIndex, goal: NodeIndex) -> Result<Self> {
        if !map.contains(start) || !map.contains(goal) {
            return Err(Error::invalid("start and goal must lie inside the map"));
        }
        if start == goal {
            return Err(Error::invalid("start and goal must differ"));
        }
        if !map.is_passable(start) || !map.is_passable(goal) {
            return Err(Error::invalid("start and goal must be passable"));
        }
        Ok(Self { map, start, goal, gt_path: None })
    }

    /// Attaches an undilated expert path. It must cover start and goal and be
    /// eight-connected.
    pub fn with_gt_path(mut self, mask: NodeMask) -> Result<Self> {
        if mask.height() != self.map.height() || mask.width() != self.map.width() {
            return Err(Error::shape("ground-truth mask does not match the map"));
        }
        if !mask.get(self.start) || !mask.get(self.goal) {
            return Err(Error::invalid("ground-truth path must contain start and goal"));
        }
        if !mask.is_connected() {
            return Err(Error::invalid("ground-truth path must be eight-connected"));
        }
        self.gt_path = Some(mask);
        Ok(self)
    }

    pub fn height(&self) -> usize {
        self.map.height()
    }

    pub fn width(&self) -> usize {
        self.map.width()
    }

    /// `V_s + V_g` as a dense matrix.
    pub fn start_goal_mask(&self) -> Vec<f64> {
        let w = self.width();
        let mut m = vec![0.0; self.map.len()];
        m[self.start.linear(w)] = 1.0;
        m[self.goal.linear(w)] = 1.0;
        m
    }
}

/// Outcome of a search: the path, the closed list, and the selection order.
#[derive(Debug, Clone, PartialEq)]
pub struct SearchResult {
    pub path: Vec<NodeIndex>,
    /// Nodes selected before the goal. The goal itself never enters this list.
    pub closed: NodeMask,
    /// Number of non-goal selections; equals `closed.count()`.
    pub explored_count: usize,
    pub parents: Vec<Option<NodeIndex>>,
    /// Every selected node in order, ending with the goal.
    pub selections: Vec<NodeIndex>,
}

/// Calls `f` with the linear index of each in-bounds neighbour, row-major.
#[inline]
pub(crate) fn for_each_neighbor(height: usize, width: usize, index: usize, mut f: impl FnMut(usize)) {
    let r = (index / width) as isize;
    let c = (index % width) as isize;
    for (dr, dc) in OFFSETS {
        let (nr, nc) = (r + dr, c + dc);
        if nr >= 0 && nc >= 0 && (nr as usize) < height && (nc as usize) < width {
            f(nr as usize * width + nc as usize);
        }
    }
}

/// In-bounds eight-neighbours of `v`, dropping obstacles on binary maps.
pub fn neighbors8(v: NodeIndex, map: &GridMap) -> Vec<NodeIndex> {
    let mut out = Vec::with_capacity(8);
    for_each_neighbor(map.height(), map.width(), v.linear(map.width()), |j| {
        if map.passable_at(j) {
            out.push(map.node(j));
        }
    });
    out
}

/// Chebyshev distance to `goal` plus `0.001 ×` the Euclidean distance.
pub fn heuristic_field(map: &GridMap, goal: NodeIndex) -> ScalarField {
    heuristic_field_with(map.height(), map.width(), goal, DEFAULT_TIE_BREAK)
}

pub fn heuristic_field_with(height: usize, width: usize, goal: NodeIndex, euclid_coef: f64) -> ScalarField {
    let mut values = Vec::with_capacity(height * width);
    for r in 0..height {
        for c in 0..width {
            let dr = r.abs_diff(goal.row) as f64;
            let dc = c.abs_diff(goal.col) as f64;
            values.push(dr.max(dc) + euclid_coef * math::sqrt(dr * dr + dc * dc));
        }
    }
    ScalarField { height, width, values }
}

/// Exact step counts from every node to `goal`; [`UNREACHABLE`] where no path exists.
pub fn dijkstra_field(map: &GridMap, goal: NodeIndex) -> ScalarField {
    let (h, w) = (map.height(), map.width());
    let mut dist = vec![UNREACHABLE; h * w];
    let g = goal.linear(w);
    if !map.passable_at(g) {
        return ScalarField { height: h, width: w, values: dist };
    }
    // Unit costs make breadth-first order exact.
    dist[g] = 0.0;
    let mut queue = VecDeque::from([g]);
    while let Some(i) = queue.pop_front() {
        let next = dist[i] + 1.0;
        for_each_neighbor(h, w, i, |j| {
            if map.passable_at(j) && dist[j] == UNREACHABLE {
                dist[j] = next;
                queue.push_back(j);
            }
        });
    }
    ScalarField { height: h, width: w, values: dist }
}

/// Weighted A* selecting the open node that minimizes `(1 - w)·g + w·h`.
///
/// `w = 0.5` is vanilla A* (the score is doubled so it equals `g + h`),
/// `w = 0.8` the weighted-A* baseline and `w = 1` greedy best-first.
pub fn astar_classical(inst: &ProblemInstance, cost: &ScalarField, h_weight: f64) -> Result<SearchResult> {
    let map = &inst.map;
    if map.kind() != MapKind::Binary {
        return Err(Error::invalid("classical planners need a binary map"));
    }
    if cost.height() != map.height() || cost.width() != map.width() {
        return Err(Error::shape("cost field does not match the map"));
    }
    if !(0.0..=1.0).contains(&h_weight) {
        return Err(Error::invalid("h_weight must lie in [0, 1]"));
    }
    let h = heuristic_field(map, inst.goal);
    let costs = cost.values();
    let hv = h.values();
    let w = h_weight;
    priority_search(
        (map.height(), map.width()),
        |i| map.passable_at(i),
        inst.start,
        inst.goal,
        |g, i| 2.0 * ((1.0 - w) * g + w * hv[i]),
        |g, i| g + costs[i],
        None,
    )
}

/// Optimal path with the smallest row-major parent chosen among equal-cost predecessors.
pub fn dijkstra_shortest_path(inst: &ProblemInstance) -> Result<SearchResult> {
    if inst.map.kind() != MapKind::Binary {
        return Err(Error::invalid("classical planners need a binary map"));
    }
    // Pops come in (g, index) order, so the first predecessor to open a node
    // is its lowest-index neighbour one step closer to the start, and equal-cost
    // alternatives never reparent.
    let map = &inst.map;
    priority_search(
        (map.height(), map.width()),
        |i| map.passable_at(i),
        inst.start,
        inst.goal,
        |g, _| g,
        |g, _| g + 1.0,
        None,
    )
}

#[derive(Debug, Clone, Copy)]
struct Entry {
    score: f64,
    index: usize,
    g: f64,
}

impl PartialEq for Entry {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Entry {}

impl PartialOrd for Entry {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Entry {
    // Reversed so the max-heap pops the smallest (score, index).
    fn cmp(&self, other: &Self) -> Ordering {
        other.score.total_cmp(&self.score).then_with(|| other.index.cmp(&self.index))
    }
}

/// Priority-queue best-first search shared by the classical planners and the
/// inference fast path.
///
/// `score(g, v)` orders the open list, ties going to the smaller row-major
/// index. `next_g(g_parent, v)` is the cost-so-far on entering `v`. Already-open
/// neighbours keep the smaller cost and reparent only on strict improvement;
/// closed nodes are never reopened. The goal is selected but not closed.
pub(crate) fn priority_search(
    (h, w): (usize, usize),
    passable: impl Fn(usize) -> bool,
    start: NodeIndex,
    goal: NodeIndex,
    score: impl Fn(f64, usize) -> f64,
    next_g: impl Fn(f64, usize) -> f64,
    max_steps: Option<usize>,
) -> Result<SearchResult> {
    let n = h * w;
    let (s, t) = (start.linear(w), goal.linear(w));
    let mut g = vec![f64::INFINITY; n];
    let mut open = vec![false; n];
    let mut closed = vec![false; n];
    let mut parents: Vec<Option<usize>> = vec![None; n];
    let mut selections = Vec::new();
    let mut heap = BinaryHeap::new();

    g[s] = 0.0;
    open[s] = true;
    heap.push(Entry { score: score(0.0, s), index: s, g: 0.0 });

    let mut found = false;
    while let Some(entry) = heap.pop() {
        let v = entry.index;
        if closed[v] || entry.g.to_bits() != g[v].to_bits() {
            continue;
        }
        if max_steps.is_some_and(|m| selections.len() >= m) {
            return Err(Error::StepLimitExceeded(selections.len()));
        }
        selections.push(v);
        if v == t {
            found = true;
            break;
        }
        open[v] = false;
        closed[v] = true;
        let gv = g[v];
        for_each_neighbor(h, w, v, |j| {
            if closed[j] || !passable(j) {
                return;
            }
            let ng = next_g(gv, j);
            if !open[j] {
                open[j] = true;
                g[j] = ng;
                parents[j] = Some(v);
                heap.push(Entry { score: score(ng, j), index: j, g: ng });
            } else if ng < g[j] {
                g[j] = ng;
                parents[j] = Some(v);
                heap.push(Entry { score: score(ng, j), index: j, g: ng });
            }
        });
    }
    if !found {
        return Err(Error::Unreachable);
    }

    let parents: Vec<Option<NodeIndex>> =
        parents.into_iter().map(|p| p.map(|i| NodeIndex::from_linear(i, w))).collect();
    let path = backtrack(&parents, w, start, goal)?;
    let closed_mask = NodeMask { height: h, width: w, values: closed.iter().map(|&c| u8::from(c)).collect() };
    let explored_count = selections.len() - 1;
    Ok(SearchResult {
        path,
        closed: closed_mask,
        explored_count,
        parents,
        selections: selections.into_iter().map(|i| NodeIndex::from_linear(i, w)).collect(),
    })
}

/// Follows parent pointers from `goal` back to `start`.
pub(crate) fn backtrack(
    parents: &[Option<NodeIndex>],
    width: usize,
    start: NodeIndex,
    goal: NodeIndex,
) -> Result<Vec<NodeIndex>> {
    let mut path = vec![goal];
    let mut cur = goal;
    while cur != start {
        let p = parents[cur.linear(width)].ok_or(Error::Unreachable)?;
        path.push(p);
        cur = p;
        if path.len() > parents.len() {
            return Err(Error::invalid("parent pointers form a cycle"));
        }
    }
    path.reverse();
    Ok(path)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn inst(map: GridMap, s: (usize, usize), g: (usize, usize)) -> ProblemInstance {
        ProblemInstance::new(map, NodeIndex::new(s.0, s.1), NodeIndex::new(g.0, g.1)).unwrap()
    }

    fn unit(map: &GridMap) -> ScalarField {
        ScalarField::filled(map.height(), map.width(), 1.0)
    }

    #[test]
    fn neighbor_counts() {
        let map = GridMap::open(3, 3).unwrap();
        assert_eq!(neighbors8(NodeIndex::new(1, 1), &map).len(), 8);
        assert_eq!(neighbors8(NodeIndex::new(0, 0), &map).len(), 3);
        let blocked = GridMap::from_ascii(&[".#.", ".#.", "..."]).unwrap();
        assert_eq!(neighbors8(NodeIndex::new(0, 0), &blocked), vec![NodeIndex::new(1, 0)]);
    }

    #[test]
    fn neighbors_are_row_major() {
        let map = GridMap::open(3, 3).unwrap();
        let n = neighbors8(NodeIndex::new(1, 1), &map);
        let lin: Vec<usize> = n.iter().map(|v| v.linear(3)).collect();
        assert_eq!(lin, vec![0, 1, 2, 3, 5, 6, 7, 8]);
    }

    #[test]
    fn heuristic_values() {
        let map = GridMap::open(3, 3).unwrap();
        let h = heuristic_field(&map, NodeIndex::new(2, 2));
        assert_eq!(h.get(NodeIndex::new(2, 2)), 0.0);
        assert!((h.get(NodeIndex::new(0, 2)) - 2.002).abs() < 1e-12);
        assert!((h.get(NodeIndex::new(0, 0)) - (2.0 + 0.001 * 8f64.sqrt())).abs() < 1e-12);
        assert!((h.get(NodeIndex::new(0, 0)) - 2.0028284).abs() < 1e-7);
    }

    #[test]
    fn corridor_astar() {
        let map = GridMap::open(1, 3).unwrap();
        let i = inst(map.clone(), (0, 0), (0, 2));
        let r = astar_classical(&i, &unit(&map), 0.5).unwrap();
        assert_eq!(r.path.len(), 3);
        // Goal is selected but never closed.
        assert_eq!(r.selections.len(), 3);
        assert_eq!(r.explored_count, 2);
        assert_eq!(r.closed.count(), r.explored_count);
    }

    #[test]
    fn empty_map_diagonal() {
        let map = GridMap::open(5, 5).unwrap();
        let i = inst(map.clone(), (0, 0), (4, 4));
        let r = astar_classical(&i, &unit(&map), 0.5).unwrap();
        assert_eq!(r.path.len(), 5);
        let d = dijkstra_shortest_path(&i).unwrap();
        assert_eq!(d.path.len(), 5);
        assert_eq!(d.path, (0..5).map(|k| NodeIndex::new(k, k)).collect::<Vec<_>>());
    }

    #[test]
    fn walled_goal_is_unreachable() {
        let map = GridMap::from_ascii(&["....", "..##", "..#."]).unwrap();
        let i = inst(map.clone(), (0, 0), (2, 3));
        assert_eq!(astar_classical(&i, &unit(&map), 0.5), Err(Error::Unreachable));
        assert_eq!(dijkstra_shortest_path(&i), Err(Error::Unreachable));
    }

    #[test]
    fn dijkstra_field_examples() {
        let map = GridMap::open(1, 4).unwrap();
        let f = dijkstra_field(&map, NodeIndex::new(0, 3));
        assert_eq!(f.values(), &[3.0, 2.0, 1.0, 0.0]);
        let split = GridMap::from_ascii(&["..#..", "..#..", "..#.."]).unwrap();
        let f = dijkstra_field(&split, NodeIndex::new(0, 0));
        assert_eq!(f.get(NodeIndex::new(0, 0)), 0.0);
        assert_eq!(f.get(NodeIndex::new(1, 4)), UNREACHABLE);
        assert_eq!(f.get(NodeIndex::new(1, 2)), UNREACHABLE);
    }

    #[test]
    fn dijkstra_routes_around_u() {
        let map = GridMap::from_ascii(&[".......", ".#####.", ".#...#.", ".#...#.", "......."]).unwrap();
        let i = inst(map.clone(), (3, 3), (0, 3));
        let r = dijkstra_shortest_path(&i).unwrap();
        let oracle = dijkstra_field(&map, i.goal);
        assert_eq!((r.path.len() - 1) as f64, oracle.get(i.start));
        assert!(r.path.iter().all(|v| map.is_passable(*v)));
        assert!(r.path.windows(2).all(|p| p[0].is_adjacent(p[1])));
    }

    #[test]
    fn best_first_and_weighted_run() {
        let map = GridMap::open(6, 6).unwrap();
        let i = inst(map.clone(), (0, 0), (5, 3));
        for w in [0.0, 0.5, 0.8, 1.0] {
            let r = astar_classical(&i, &unit(&map), w).unwrap();
            assert_eq!(r.path.first(), Some(&i.start));
            assert_eq!(r.path.last(), Some(&i.goal));
        }
        assert!(astar_classical(&i, &unit(&map), 1.5).is_err());
    }

    #[test]
    fn gt_path_validation() {
        let map = GridMap::open(3, 3).unwrap();
        let i = inst(map, (0, 0), (2, 2));
        let diag =
            NodeMask::from_nodes(3, 3, &[NodeIndex::new(0, 0), NodeIndex::new(1, 1), NodeIndex::new(2, 2)]).unwrap();
        assert!(i.clone().with_gt_path(diag).is_ok());
        let gap = NodeMask::from_nodes(3, 3, &[NodeIndex::new(0, 0), NodeIndex::new(2, 2)]).unwrap();
        assert!(i.with_gt_path(gap).is_err());
    }
}
