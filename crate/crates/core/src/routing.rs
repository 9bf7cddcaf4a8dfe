//! Weighted intersection graph, fastest-path search, and step simulation.

use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::fmt;

use serde::{Deserialize, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::world::{Coordinate, GridWorld, Orientation, PoiId, RoadId};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    North,
    South,
    East,
    West,
}

impl Direction {
    pub const ALL: [Direction; 4] = [Direction::North, Direction::South, Direction::East, Direction::West];

    pub fn opposite(self) -> Self {
        match self {
            Direction::North => Direction::South,
            Direction::South => Direction::North,
            Direction::East => Direction::West,
            Direction::West => Direction::East,
        }
    }

    /// Unit displacement `(dx, dy)`.
    pub fn unit(self) -> (f64, f64) {
        match self {
            Direction::North => (0.0, 1.0),
            Direction::South => (0.0, -1.0),
            Direction::East => (1.0, 0.0),
            Direction::West => (-1.0, 0.0),
        }
    }

    /// The road orientation this direction travels along.
    pub fn orientation(self) -> Orientation {
        match self {
            Direction::East | Direction::West => Orientation::Horizontal,
            Direction::North | Direction::South => Orientation::Vertical,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Direction::North => "north",
            Direction::South => "south",
            Direction::East => "east",
            Direction::West => "west",
        }
    }
}

impl fmt::Display for Direction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// One navigation instruction: travel `length` km along `road` heading `direction`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PathStep {
    pub road: RoadId,
    #[serde(rename = "dir")]
    pub direction: Direction,
    #[serde(rename = "len", serialize_with = "compact_number")]
    pub length: f64,
}

impl PathStep {
    pub fn new(road: RoadId, direction: Direction, length: f64) -> Self {
        Self { road, direction, length }
    }
}

/// Integers print without a fractional part, everything else as shortest f64.
pub(crate) fn compact_number<S: Serializer>(value: &f64, s: S) -> std::result::Result<S::Ok, S::Error> {
    if value.fract() == 0.0 && value.abs() < 1e15 {
        s.serialize_i64(*value as i64)
    } else {
        s.serialize_f64(*value)
    }
}

/// A fastest path between two POIs.
#[derive(Clone, Debug, PartialEq)]
pub struct Trajectory {
    pub start: PoiId,
    pub end: PoiId,
    pub steps: Vec<PathStep>,
    /// Every lattice point visited, from start to end inclusive.
    pub nodes: Vec<Coordinate>,
    /// Total travel time (sum of `length / weight` over unit segments).
    pub cost: f64,
}

/// JSON-lines form of a [`Trajectory`]; node lists are recomputed on load.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryRecord {
    pub id: String,
    pub start: PoiId,
    pub end: PoiId,
    pub steps: Vec<PathStep>,
    #[serde(serialize_with = "crate::io::fixed6")]
    pub cost: f64,
}

impl Trajectory {
    pub fn to_record(&self, id: impl Into<String>) -> TrajectoryRecord {
        TrajectoryRecord {
            id: id.into(),
            start: self.start,
            end: self.end,
            steps: self.steps.clone(),
            cost: self.cost,
        }
    }

    pub fn from_record(world: &GridWorld, record: &TrajectoryRecord) -> Result<Self> {
        let start = world.position(record.start)?;
        let sim = simulate_steps(world, start, &record.steps);
        Ok(Self {
            start: record.start,
            end: record.end,
            steps: record.steps.clone(),
            nodes: sim.trace,
            cost: record.cost,
        })
    }
}

#[derive(Clone, Debug)]
pub struct Edge {
    pub a: usize,
    pub b: usize,
    pub road: RoadId,
    pub cost: f64,
}

/// All lattice intersections joined by unit road segments. Edge cost is the
/// travel time `1 / weight` of the segment's road.
#[derive(Clone, Debug)]
pub struct RoadGraph {
    side: usize,
    edges: Vec<Edge>,
    adjacency: Vec<Vec<(usize, usize)>>,
}

impl RoadGraph {
    pub fn build(world: &GridWorld) -> Self {
        let g = world.grid_size() as usize;
        let side = g + 1;
        let mut edges = Vec::with_capacity(2 * g * side);
        let mut adjacency = vec![Vec::with_capacity(4); side * side];
        let mut connect = |a: usize, b: usize, road: RoadId, weight: f64| {
            let e = edges.len();
            edges.push(Edge { a, b, road, cost: 1.0 / weight });
            adjacency[a].push((b, e));
            adjacency[b].push((a, e));
        };
        for y in 0..side {
            let road = world.horizontal_road(y as u32);
            for x in 0..g {
                connect(y * side + x, y * side + x + 1, road.id, road.weight);
            }
        }
        for x in 0..side {
            let road = world.vertical_road(x as u32);
            for y in 0..g {
                connect(y * side + x, (y + 1) * side + x, road.id, road.weight);
            }
        }
        Self { side, edges, adjacency }
    }

    pub fn node_count(&self) -> usize {
        self.side * self.side
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    /// `(neighbour, edge index)` pairs of `node`.
    pub fn neighbours(&self, node: usize) -> &[(usize, usize)] {
        &self.adjacency[node]
    }

    pub fn node_of(&self, pos: &Coordinate) -> Option<usize> {
        let max = (self.side - 1) as f64;
        if !pos.is_lattice() || !(0.0..=max).contains(&pos.x) || !(0.0..=max).contains(&pos.y) {
            return None;
        }
        Some(pos.y as usize * self.side + pos.x as usize)
    }

    pub fn coordinate_of(&self, node: usize) -> Coordinate {
        Coordinate::new((node % self.side) as f64, (node / self.side) as f64)
    }

    /// Dijkstra from `source`, stopping early once `target` is settled.
    ///
    /// The frontier is ordered by `(cost, x, y)` and parents change only on a
    /// strict improvement, so ties resolve the same way on every run.
    pub fn search(&self, source: usize, target: Option<usize>) -> ShortestPathTree {
        let n = self.node_count();
        let mut dist = vec![f64::INFINITY; n];
        let mut parent = vec![usize::MAX; n];
        let mut settled = vec![false; n];
        let mut heap = BinaryHeap::new();
        dist[source] = 0.0;
        heap.push(self.frontier(0.0, source));
        while let Some(Frontier { cost, node, .. }) = heap.pop() {
            if settled[node] {
                continue;
            }
            settled[node] = true;
            if Some(node) == target {
                break;
            }
            for &(next, e) in &self.adjacency[node] {
                if settled[next] {
                    continue;
                }
                let candidate = cost + self.edges[e].cost;
                if candidate < dist[next] {
                    dist[next] = candidate;
                    parent[next] = node;
                    heap.push(self.frontier(candidate, next));
                }
            }
        }
        ShortestPathTree { source, dist, parent }
    }

    fn frontier(&self, cost: f64, node: usize) -> Frontier {
        Frontier { cost, x: node % self.side, y: node / self.side, node }
    }

    /// Fastest route between two lattice coordinates.
    pub fn route_between(&self, from: &Coordinate, to: &Coordinate) -> Result<Route> {
        let off_lattice = |c: &Coordinate| Error::Invariant(format!("{c} is not a lattice point of the grid"));
        let a = self.node_of(from).ok_or_else(|| off_lattice(from))?;
        let b = self.node_of(to).ok_or_else(|| off_lattice(to))?;
        let tree = self.search(a, Some(b));
        Ok(tree.route_to(self, b))
    }

    /// Fastest path between two POIs.
    pub fn shortest_path(&self, world: &GridWorld, a: PoiId, b: PoiId) -> Result<Trajectory> {
        if a == b {
            return Err(Error::IdenticalEndpoints(a.to_string()));
        }
        let route = self.route_between(&world.position(a)?, &world.position(b)?)?;
        Ok(route.into_trajectory(a, b))
    }

    /// Fastest paths from `source` to every POI in `targets`, from one search.
    pub fn shortest_paths_from(&self, world: &GridWorld, source: PoiId, targets: &[PoiId]) -> Result<Vec<Trajectory>> {
        let from = world.position(source)?;
        let src = self.node_of(&from).expect("POIs lie on the lattice");
        let tree = self.search(src, None);
        targets
            .iter()
            .map(|&t| {
                if t == source {
                    return Err(Error::IdenticalEndpoints(t.to_string()));
                }
                let node = self.node_of(&world.position(t)?).expect("POIs lie on the lattice");
                Ok(tree.route_to(self, node).into_trajectory(source, t))
            })
            .collect()
    }
}

#[derive(Debug)]
struct Frontier {
    cost: f64,
    x: usize,
    y: usize,
    node: usize,
}

impl Ord for Frontier {
    fn cmp(&self, other: &Self) -> Ordering {
        // BinaryHeap is a max-heap; reverse for smallest (cost, x, y) first.
        other
            .cost
            .total_cmp(&self.cost)
            .then_with(|| other.x.cmp(&self.x))
            .then_with(|| other.y.cmp(&self.y))
    }
}

impl PartialOrd for Frontier {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl PartialEq for Frontier {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Frontier {}

pub struct ShortestPathTree {
    source: usize,
    pub dist: Vec<f64>,
    parent: Vec<usize>,
}

impl ShortestPathTree {
    pub fn route_to(&self, graph: &RoadGraph, target: usize) -> Route {
        let mut nodes = vec![target];
        let mut cur = target;
        while cur != self.source {
            cur = self.parent[cur];
            assert!(cur != usize::MAX, "target not reached by the search");
            nodes.push(cur);
        }
        nodes.reverse();
        let coords: Vec<Coordinate> = nodes.iter().map(|&n| graph.coordinate_of(n)).collect();
        Route {
            steps: steps_from_nodes(graph, &nodes),
            nodes: coords,
            cost: self.dist[target],
        }
    }
}

/// A fastest route between lattice points.
#[derive(Clone, Debug, PartialEq)]
pub struct Route {
    pub steps: Vec<PathStep>,
    pub nodes: Vec<Coordinate>,
    pub cost: f64,
}

impl Route {
    fn into_trajectory(self, start: PoiId, end: PoiId) -> Trajectory {
        Trajectory { start, end, steps: self.steps, nodes: self.nodes, cost: self.cost }
    }
}

/// Merge unit moves into maximal same-road, same-direction steps.
fn steps_from_nodes(graph: &RoadGraph, nodes: &[usize]) -> Vec<PathStep> {
    let mut steps: Vec<PathStep> = Vec::new();
    for pair in nodes.windows(2) {
        let (u, v) = (pair[0], pair[1]);
        let (from, to) = (graph.coordinate_of(u), graph.coordinate_of(v));
        let direction = match (to.x - from.x, to.y - from.y) {
            (dx, _) if dx > 0.0 => Direction::East,
            (dx, _) if dx < 0.0 => Direction::West,
            (_, dy) if dy > 0.0 => Direction::North,
            _ => Direction::South,
        };
        let road = graph
            .neighbours(u)
            .iter()
            .find(|&&(n, _)| n == v)
            .map(|&(_, e)| graph.edges[e].road)
            .expect("consecutive route nodes are adjacent");
        match steps.last_mut() {
            Some(last) if last.road == road && last.direction == direction => last.length += 1.0,
            _ => steps.push(PathStep::new(road, direction, 1.0)),
        }
    }
    steps
}

/// Crossing point of a horizontal and a vertical road; `None` for parallel
/// or identical roads.
pub fn find_intersection(world: &GridWorld, a: RoadId, b: RoadId) -> Result<Option<Coordinate>> {
    let ra = world.road_or_err(a)?;
    let rb = world.road_or_err(b)?;
    let point = match (ra.orientation, rb.orientation) {
        (Orientation::Horizontal, Orientation::Vertical) => Some(Coordinate::new(rb.offset.into(), ra.offset.into())),
        (Orientation::Vertical, Orientation::Horizontal) => Some(Coordinate::new(ra.offset.into(), rb.offset.into())),
        _ => None,
    };
    Ok(point)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Move {
    pub end: Coordinate,
    pub clamped: bool,
}

/// Displace `origin` by the step, stopping at the grid boundary.
///
/// The road of the step is not consulted; callers that care whether the
/// origin lies on that road check [`valid_next_roads`].
pub fn move_along_road(world: &GridWorld, origin: Coordinate, step: &PathStep) -> Move {
    let g = f64::from(world.grid_size());
    let (dx, dy) = step.direction.unit();
    let raw = Coordinate::new(origin.x + dx * step.length, origin.y + dy * step.length);
    let end = Coordinate::new(raw.x.clamp(0.0, g), raw.y.clamp(0.0, g));
    Move { end, clamped: end != raw }
}

/// Every `(road, direction)` that can be taken from `pos` for at least 1 km
/// without leaving the grid.
pub fn valid_next_roads(world: &GridWorld, pos: &Coordinate) -> Vec<(RoadId, Direction)> {
    let g = f64::from(world.grid_size());
    let mut out = Vec::with_capacity(4);
    for road in world.roads_through(pos) {
        let dirs = match road.orientation {
            Orientation::Horizontal => [Direction::East, Direction::West],
            Orientation::Vertical => [Direction::North, Direction::South],
        };
        for d in dirs {
            let (dx, dy) = d.unit();
            let (nx, ny) = (pos.x + dx, pos.y + dy);
            if (0.0..=g).contains(&nx) && (0.0..=g).contains(&ny) {
                out.push((road.id, d));
            }
        }
    }
    out
}

pub fn is_valid_next(world: &GridWorld, pos: &Coordinate, step: &PathStep) -> bool {
    valid_next_roads(world, pos).contains(&(step.road, step.direction))
}

#[derive(Clone, Debug, PartialEq)]
pub struct Simulation {
    pub end: Coordinate,
    /// Start, every lattice point crossed, and the end.
    pub trace: Vec<Coordinate>,
    /// True when any step was cut short at the grid boundary.
    pub clamped: bool,
}

pub fn simulate_steps(world: &GridWorld, start: Coordinate, steps: &[PathStep]) -> Simulation {
    let mut trace = vec![start];
    let mut pos = start;
    let mut clamped = false;
    for step in steps {
        let mv = move_along_road(world, pos, step);
        clamped |= mv.clamped;
        push_crossings(&mut trace, pos, mv.end, step.direction);
        pos = mv.end;
    }
    Simulation { end: pos, trace, clamped }
}

fn push_crossings(trace: &mut Vec<Coordinate>, from: Coordinate, to: Coordinate, direction: Direction) {
    let horizontal = direction.orientation() == Orientation::Horizontal;
    let (along_from, along_to, across) = if horizontal { (from.x, to.x, from.y) } else { (from.y, to.y, from.x) };
    let make = |v: f64| if horizontal { Coordinate::new(v, across) } else { Coordinate::new(across, v) };
    if across.fract() == 0.0 {
        if along_to > along_from {
            let mut k = along_from.floor() + 1.0;
            while k < along_to {
                trace.push(make(k));
                k += 1.0;
            }
        } else {
            let mut k = along_from.ceil() - 1.0;
            while k > along_to {
                trace.push(make(k));
                k -= 1.0;
            }
        }
    }
    if trace.last() != Some(&to) {
        trace.push(to);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::world::{WeightRange, WorldConfig};

    fn uniform(g: u32, pois: &[(u32, u32)]) -> GridWorld {
        GridWorld::uniform(g, pois).unwrap()
    }

    #[test]
    fn lattice_counts() {
        let w = GridWorld::build(WorldConfig { seed: 2, ..Default::default() }).unwrap();
        let graph = RoadGraph::build(&w);
        assert_eq!(graph.node_count(), 10201);
        assert_eq!(graph.edges().len(), 20200);
        for node in 0..graph.node_count() {
            assert!((2..=4).contains(&graph.neighbours(node).len()));
        }
    }

    #[test]
    fn edge_costs_are_inverse_weights() {
        let w = uniform(4, &[(0, 0)]);
        assert!(RoadGraph::build(&w).edges().iter().all(|e| e.cost == 1.0));

        let mut weights = vec![1.0; 10];
        weights[0] = 1.2;
        let cfg = WorldConfig { grid_size: 4, n_poi: 1, weight_range: WeightRange { min: 0.8, max: 1.2 }, seed: 0 };
        let w = GridWorld::from_parts(cfg, &weights, &[(0, 0)]).unwrap();
        let g = RoadGraph::build(&w);
        let on_r1: Vec<_> = g.edges().iter().filter(|e| e.road == RoadId(1)).collect();
        assert_eq!(on_r1.len(), 4);
        assert!(on_r1.iter().all(|e| (e.cost - 0.833_333_333_333_333_4).abs() < 1e-12));
    }

    #[test]
    fn collinear_path_is_one_step() {
        let w = uniform(10, &[(0, 0), (0, 4)]);
        let g = RoadGraph::build(&w);
        let t = g.shortest_path(&w, PoiId(1), PoiId(2)).unwrap();
        assert_eq!(t.steps, vec![PathStep::new(w.vertical_road(0).id, Direction::North, 4.0)]);
        assert_eq!(t.cost, 4.0);
        assert_eq!(t.nodes.len(), 5);
    }

    #[test]
    fn uniform_cost_is_manhattan() {
        let w = uniform(10, &[(0, 0), (2, 3)]);
        let g = RoadGraph::build(&w);
        let t = g.shortest_path(&w, PoiId(1), PoiId(2)).unwrap();
        assert_eq!(t.cost, 5.0);
        let total: f64 = t.steps.iter().map(|s| s.length).sum();
        assert_eq!(total, 5.0);
        // lexicographic frontier order expands smaller x first, so the
        // canonical path heads north along x = 0 before turning east
        assert_eq!(t.steps[0].direction, Direction::North);
        assert!(matches!(g.shortest_path(&w, PoiId(1), PoiId(1)), Err(Error::IdenticalEndpoints(_))));
    }

    #[test]
    fn intersection_cases() {
        let w = uniform(10, &[(0, 0)]);
        let y3 = w.horizontal_road(3).id;
        let x7 = w.vertical_road(7).id;
        assert_eq!(find_intersection(&w, y3, x7).unwrap(), Some(Coordinate::new(7.0, 3.0)));
        assert_eq!(find_intersection(&w, x7, y3).unwrap(), Some(Coordinate::new(7.0, 3.0)));
        assert_eq!(find_intersection(&w, y3, w.horizontal_road(5).id).unwrap(), None);
        assert_eq!(find_intersection(&w, y3, y3).unwrap(), None);
        assert!(matches!(find_intersection(&w, y3, RoadId(999)), Err(Error::UnknownRoad(_))));
    }

    #[test]
    fn moves_and_clamping() {
        let w = uniform(10, &[(0, 0)]);
        let r = w.vertical_road(5).id;
        let p = Coordinate::new(5.0, 5.0);
        let up = move_along_road(&w, p, &PathStep::new(r, Direction::North, 2.0));
        assert_eq!(up, Move { end: Coordinate::new(5.0, 7.0), clamped: false });
        let west = move_along_road(&w, p, &PathStep::new(w.horizontal_road(5).id, Direction::West, 9.0));
        assert_eq!(west, Move { end: Coordinate::new(0.0, 5.0), clamped: true });
        let back = move_along_road(&w, up.end, &PathStep::new(r, Direction::South, 2.0));
        assert_eq!(back.end, p);
    }

    #[test]
    fn valid_next_roads_cases() {
        let w = uniform(10, &[(0, 0)]);
        assert_eq!(valid_next_roads(&w, &Coordinate::new(5.0, 5.0)).len(), 4);
        let mut corner = valid_next_roads(&w, &Coordinate::new(0.0, 0.0));
        corner.sort();
        let mut expected = vec![(w.horizontal_road(0).id, Direction::East), (w.vertical_road(0).id, Direction::North)];
        expected.sort();
        assert_eq!(corner, expected);

        // geometric membership oracle: a point is on a horizontal road iff its
        // y is integral, on a vertical one iff its x is integral
        let mid = Coordinate::new(5.5, 3.0);
        let got = valid_next_roads(&w, &mid);
        let oracle: Vec<_> = w
            .roads()
            .iter()
            .filter(|r| r.contains(&mid))
            .flat_map(|r| {
                Direction::ALL
                    .into_iter()
                    .filter(move |d| d.orientation() == r.orientation)
                    .map(move |d| (r.id, d))
            })
            .collect();
        assert_eq!(got.len(), 2);
        let mut got_sorted = got.clone();
        got_sorted.sort();
        let mut oracle_sorted = oracle;
        oracle_sorted.sort();
        assert_eq!(got_sorted, oracle_sorted);
        assert!(got.iter().all(|(r, _)| *r == w.horizontal_road(3).id));
        assert!(valid_next_roads(&w, &Coordinate::new(5.5, 3.5)).is_empty());
    }

    #[test]
    fn simulation_examples() {
        let w = uniform(20, &[(0, 0)]);
        let r = w.vertical_road(5).id;
        let sim = simulate_steps(&w, Coordinate::new(5.0, 5.0), &[PathStep::new(r, Direction::North, 2.0)]);
        assert_eq!(sim.end, Coordinate::new(5.0, 7.0));
        assert_eq!(sim.trace, vec![Coordinate::new(5.0, 5.0), Coordinate::new(5.0, 6.0), Coordinate::new(5.0, 7.0)]);

        let empty = simulate_steps(&w, Coordinate::new(3.0, 3.0), &[]);
        assert_eq!(empty.end, Coordinate::new(3.0, 3.0));
        assert_eq!(empty.trace, vec![Coordinate::new(3.0, 3.0)]);

        let steps = [
            PathStep::new(w.vertical_road(0).id, Direction::North, 2.0),
            PathStep::new(w.horizontal_road(2).id, Direction::East, 10.0),
        ];
        let sim = simulate_steps(&w, Coordinate::new(0.0, 0.0), &steps);
        assert_eq!(sim.end, Coordinate::new(10.0, 2.0));
        assert_eq!(sim.trace.len(), 13);
        assert!(!sim.clamped);
    }

    #[test]
    fn fractional_moves_trace_only_lattice_crossings() {
        let w = uniform(20, &[(0, 0)]);
        let step = PathStep::new(w.horizontal_road(3).id, Direction::East, 2.5);
        let sim = simulate_steps(&w, Coordinate::new(5.5, 3.0), &[step]);
        assert_eq!(sim.trace, vec![
            Coordinate::new(5.5, 3.0),
            Coordinate::new(6.0, 3.0),
            Coordinate::new(7.0, 3.0),
            Coordinate::new(8.0, 3.0),
        ]);
    }
}
