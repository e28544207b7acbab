//! Skeleton graph container, the A* global planner over it, and the
//! classical grid A* baseline.

use std::collections::{BinaryHeap, HashSet};
use std::fs;
use std::path::Path as FsPath;
use std::time::Instant;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::map::{CollisionOracle, OccupancyGridMap};
use crate::skeleton::{Connection, Gate, Node, PolyhedronRegistry};
use crate::{Point, Vec3};

#[derive(Debug, Error)]
pub enum PlanError {
    #[error("start in collision")]
    StartOccupied,
    #[error("goal in collision")]
    GoalOccupied,
    #[error("cannot attach {0} to the graph by a collision-free segment")]
    AttachmentFailed(&'static str),
    #[error("no path exists between the attached vertices")]
    NoPath,
    #[error("graph io: {0}")]
    Io(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum VertexKind {
    Node,
    Gate,
}

#[derive(Debug, Clone, Copy)]
pub struct SkeletonVertex {
    pub id: usize,
    pub kind: VertexKind,
    pub pos: Point,
}

/// Undirected skeleton graph: vertices are nodes and gates, edges are
/// connections; the polyhedron registry stays attached for raycasting.
#[derive(Debug, Default)]
pub struct SkeletonGraph {
    pub vertices: Vec<SkeletonVertex>,
    pub edges: Vec<Connection>,
    pub nodes: Vec<Node>,
    pub gates: Vec<Gate>,
    pub registry: PolyhedronRegistry,
}

impl SkeletonGraph {
    pub fn add_vertex(&mut self, kind: VertexKind, pos: Point) -> usize {
        let id = self.vertices.len();
        self.vertices.push(SkeletonVertex { id, kind, pos });
        id
    }

    /// Adds an undirected edge; self-loops and duplicates are ignored.
    pub fn add_edge(&mut self, a: usize, b: usize) -> bool {
        if a == b {
            return false;
        }
        let (lo, hi) = (a.min(b), a.max(b));
        if self
            .edges
            .iter()
            .any(|e| e.endpoint_a.min(e.endpoint_b) == lo && e.endpoint_a.max(e.endpoint_b) == hi)
        {
            return false;
        }
        let length = (self.vertices[a].pos - self.vertices[b].pos).norm();
        self.edges.push(Connection {
            endpoint_a: lo,
            endpoint_b: hi,
            length,
        });
        true
    }

    pub fn adjacency(&self) -> Vec<Vec<(usize, f64)>> {
        let mut adj = vec![Vec::new(); self.vertices.len()];
        for e in &self.edges {
            adj[e.endpoint_a].push((e.endpoint_b, e.length));
            adj[e.endpoint_b].push((e.endpoint_a, e.length));
        }
        for list in &mut adj {
            list.sort_by(|a, b| a.0.cmp(&b.0));
        }
        adj
    }

    /// Vertex ids reachable from `start` in at most `max_edges` hops,
    /// including `start` itself.
    pub fn vertices_within_edges(&self, start: usize, max_edges: usize) -> HashSet<usize> {
        let adj = self.adjacency();
        let mut seen = HashSet::from([start]);
        let mut layer = vec![start];
        for _ in 0..max_edges {
            let mut next = Vec::new();
            for &v in &layer {
                for &(n, _) in &adj[v] {
                    if seen.insert(n) {
                        next.push(n);
                    }
                }
            }
            if next.is_empty() {
                break;
            }
            layer = next;
        }
        seen
    }

    pub fn metrics(&self) -> GraphMetrics {
        let v = self.vertices.len();
        let e = self.edges.len();
        let components = if v == 0 {
            0
        } else {
            let adj = self.adjacency();
            let mut seen = vec![false; v];
            let mut count = 0;
            for start in 0..v {
                if seen[start] {
                    continue;
                }
                count += 1;
                let mut stack = vec![start];
                seen[start] = true;
                while let Some(cur) = stack.pop() {
                    for &(n, _) in &adj[cur] {
                        if !seen[n] {
                            seen[n] = true;
                            stack.push(n);
                        }
                    }
                }
            }
            count
        };
        GraphMetrics {
            vertex_count: v,
            edge_count: e,
            component_count: components,
            cycle_rank: (e + components).saturating_sub(v),
        }
    }
}

/// `cycle_rank = E - V + components` counts independent cycles.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct GraphMetrics {
    pub vertex_count: usize,
    pub edge_count: usize,
    pub component_count: usize,
    pub cycle_rank: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct PlanResult {
    pub waypoints: Vec<Point>,
    pub length: f64,
    pub expanded_count: usize,
    pub elapsed: f64,
}

impl PlanResult {
    fn from_waypoints(waypoints: Vec<Point>, expanded: usize, started: Instant) -> PlanResult {
        let length = waypoints
            .windows(2)
            .map(|w| (w[1] - w[0]).norm())
            .sum();
        PlanResult {
            waypoints,
            length,
            expanded_count: expanded,
            elapsed: started.elapsed().as_secs_f64(),
        }
    }
}

/// Binary-heap entry ordered by lowest f-score, ties broken by lowest vertex id.
#[derive(PartialEq)]
struct HeapEntry {
    f: f64,
    id: usize,
}

impl Eq for HeapEntry {}

impl Ord for HeapEntry {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        other
            .f
            .partial_cmp(&self.f)
            .unwrap()
            .then_with(|| other.id.cmp(&self.id))
    }
}

impl PartialOrd for HeapEntry {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

/// Attaches `p` to the nearest vertex reachable by a collision-free straight
/// segment, trying candidates in increasing distance order (30 at most).
fn attach(
    graph: &SkeletonGraph,
    p: &Point,
    map: &dyn CollisionOracle,
    label: &'static str,
) -> Result<usize, PlanError> {
    let mut candidates: Vec<(f64, usize)> = graph
        .vertices
        .iter()
        .map(|v| ((v.pos - p).norm(), v.id))
        .collect();
    candidates.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap().then(a.1.cmp(&b.1)));
    for &(_, id) in candidates.iter().take(30) {
        if map.segment_free(p, &graph.vertices[id].pos) {
            return Ok(id);
        }
    }
    Err(PlanError::AttachmentFailed(label))
}

/// A* over the skeleton graph with a Euclidean heuristic. Start and goal are
/// attached to their nearest reachable vertices; the attachment segments are
/// included in the reported path and length.
pub fn plan_astar(
    graph: &SkeletonGraph,
    start: &Point,
    goal: &Point,
    map: &dyn CollisionOracle,
) -> Result<PlanResult, PlanError> {
    let started = Instant::now();
    if !map.is_free(start) {
        return Err(PlanError::StartOccupied);
    }
    if !map.is_free(goal) {
        return Err(PlanError::GoalOccupied);
    }
    if (start - goal).norm() < 1e-12 {
        return Ok(PlanResult::from_waypoints(vec![*start], 0, started));
    }
    let src = attach(graph, start, map, "start")?;
    let dst = attach(graph, goal, map, "goal")?;

    let adj = graph.adjacency();
    let h = |id: usize| (graph.vertices[id].pos - goal).norm();
    let n = graph.vertices.len();
    let mut g_score = vec![f64::INFINITY; n];
    let mut came_from = vec![usize::MAX; n];
    let mut closed = vec![false; n];
    let mut open = BinaryHeap::new();
    g_score[src] = 0.0;
    open.push(HeapEntry { f: h(src), id: src });
    let mut expanded = 0usize;
    while let Some(HeapEntry { id, .. }) = open.pop() {
        if closed[id] {
            continue;
        }
        closed[id] = true;
        expanded += 1;
        if id == dst {
            let mut chain = vec![id];
            let mut cur = id;
            while came_from[cur] != usize::MAX {
                cur = came_from[cur];
                chain.push(cur);
            }
            chain.reverse();
            let mut waypoints = vec![*start];
            waypoints.extend(chain.iter().map(|&v| graph.vertices[v].pos));
            waypoints.push(*goal);
            return Ok(PlanResult::from_waypoints(waypoints, expanded, started));
        }
        for &(next, len) in &adj[id] {
            let tentative = g_score[id] + len;
            if tentative < g_score[next] {
                g_score[next] = tentative;
                came_from[next] = id;
                open.push(HeapEntry {
                    f: tentative + h(next),
                    id: next,
                });
            }
        }
    }
    Err(PlanError::NoPath)
}

const GRID_NEIGHBORS: [[i64; 3]; 26] = {
    let mut out = [[0i64; 3]; 26];
    let mut idx = 0;
    let mut x = -1i64;
    while x <= 1 {
        let mut y = -1i64;
        while y <= 1 {
            let mut z = -1i64;
            while z <= 1 {
                if x != 0 || y != 0 || z != 0 {
                    out[idx] = [x, y, z];
                    idx += 1;
                }
                z += 1;
            }
            y += 1;
        }
        x += 1;
    }
    out
};

/// Classical 26-connected A* on the occupancy grid; Euclidean step costs,
/// optimal under that connectivity. The baseline plans on raw voxel
/// occupancy without clearance inflation.
pub fn grid_astar(
    grid: &OccupancyGridMap,
    start: &Point,
    goal: &Point,
) -> Result<PlanResult, PlanError> {
    grid_search(grid, start, goal, true)
}

/// Dijkstra on the same grid; used as the optimality oracle for `grid_astar`.
pub fn grid_dijkstra(
    grid: &OccupancyGridMap,
    start: &Point,
    goal: &Point,
) -> Result<PlanResult, PlanError> {
    grid_search(grid, start, goal, false)
}

fn grid_search(
    grid: &OccupancyGridMap,
    start: &Point,
    goal: &Point,
    use_heuristic: bool,
) -> Result<PlanResult, PlanError> {
    let started = Instant::now();
    let dims = grid.dims();
    let sv = grid.voxel_of(start).ok_or(PlanError::StartOccupied)?;
    let gv = grid.voxel_of(goal).ok_or(PlanError::GoalOccupied)?;
    if grid.is_occupied_voxel(sv) {
        return Err(PlanError::StartOccupied);
    }
    if grid.is_occupied_voxel(gv) {
        return Err(PlanError::GoalOccupied);
    }
    let flat = |v: [usize; 3]| (v[2] * dims[1] + v[1]) * dims[0] + v[0];
    let unflat = |i: usize| {
        let x = i % dims[0];
        let y = (i / dims[0]) % dims[1];
        let z = i / (dims[0] * dims[1]);
        [x, y, z]
    };
    let n = dims[0] * dims[1] * dims[2];
    let voxel = grid.voxel_size();
    let goal_center = grid.voxel_center(gv);
    let h = |i: usize| {
        if use_heuristic {
            (grid.voxel_center(unflat(i)) - goal_center).norm()
        } else {
            0.0
        }
    };
    let src = flat(sv);
    let dst = flat(gv);
    let mut g_score = vec![f64::INFINITY; n];
    let mut came_from = vec![usize::MAX; n];
    let mut closed = vec![false; n];
    let mut open = BinaryHeap::new();
    g_score[src] = 0.0;
    open.push(HeapEntry { f: h(src), id: src });
    let mut expanded = 0usize;
    while let Some(HeapEntry { id, .. }) = open.pop() {
        if closed[id] {
            continue;
        }
        closed[id] = true;
        expanded += 1;
        if id == dst {
            let mut chain = vec![id];
            let mut cur = id;
            while came_from[cur] != usize::MAX {
                cur = came_from[cur];
                chain.push(cur);
            }
            chain.reverse();
            let mut waypoints = vec![*start];
            waypoints.extend(chain.iter().map(|&i| grid.voxel_center(unflat(i))));
            waypoints.push(*goal);
            return Ok(PlanResult::from_waypoints(waypoints, expanded, started));
        }
        let v = unflat(id);
        for step in GRID_NEIGHBORS {
            let nx = v[0] as i64 + step[0];
            let ny = v[1] as i64 + step[1];
            let nz = v[2] as i64 + step[2];
            if nx < 0
                || ny < 0
                || nz < 0
                || nx as usize >= dims[0]
                || ny as usize >= dims[1]
                || nz as usize >= dims[2]
            {
                continue;
            }
            let nv = [nx as usize, ny as usize, nz as usize];
            if grid.is_occupied_voxel(nv) {
                continue;
            }
            let next = flat(nv);
            let cost = voxel
                * ((step[0] * step[0] + step[1] * step[1] + step[2] * step[2]) as f64).sqrt();
            let tentative = g_score[id] + cost;
            if tentative < g_score[next] {
                g_score[next] = tentative;
                came_from[next] = id;
                open.push(HeapEntry {
                    f: tentative + h(next),
                    id: next,
                });
            }
        }
    }
    Err(PlanError::NoPath)
}

// --- JSON schema ------------------------------------------------------------

#[derive(Serialize, Deserialize)]
struct VertexDto {
    id: usize,
    kind: VertexKind,
    pos: [f64; 3],
}

#[derive(Serialize, Deserialize)]
struct EdgeDto {
    a: usize,
    b: usize,
    len: f64,
}

#[derive(Serialize, Deserialize)]
struct GraphDto {
    vertices: Vec<VertexDto>,
    edges: Vec<EdgeDto>,
}

pub fn graph_to_json(graph: &SkeletonGraph) -> String {
    let dto = GraphDto {
        vertices: graph
            .vertices
            .iter()
            .map(|v| VertexDto {
                id: v.id,
                kind: v.kind,
                pos: [v.pos.x, v.pos.y, v.pos.z],
            })
            .collect(),
        edges: graph
            .edges
            .iter()
            .map(|e| EdgeDto {
                a: e.endpoint_a,
                b: e.endpoint_b,
                len: e.length,
            })
            .collect(),
    };
    serde_json::to_string(&dto).expect("graph serializes")
}

/// Loads vertices and edges only; node polyhedra are not part of the schema.
pub fn graph_from_json(text: &str) -> Result<SkeletonGraph, PlanError> {
    let dto: GraphDto = serde_json::from_str(text).map_err(|e| PlanError::Io(e.to_string()))?;
    let mut graph = SkeletonGraph::default();
    for v in dto.vertices {
        if v.id != graph.vertices.len() {
            return Err(PlanError::Io(format!("non-contiguous vertex id {}", v.id)));
        }
        graph.add_vertex(v.kind, Point::new(v.pos[0], v.pos[1], v.pos[2]));
    }
    for e in dto.edges {
        if e.a >= graph.vertices.len() || e.b >= graph.vertices.len() {
            return Err(PlanError::Io(format!("edge ({}, {}) out of range", e.a, e.b)));
        }
        graph.add_edge(e.a, e.b);
    }
    Ok(graph)
}

pub fn save_graph(path: &FsPath, graph: &SkeletonGraph) -> Result<(), PlanError> {
    fs::write(path, graph_to_json(graph)).map_err(|e| PlanError::Io(e.to_string()))
}

pub fn load_graph(path: &FsPath) -> Result<SkeletonGraph, PlanError> {
    let text = fs::read_to_string(path).map_err(|e| PlanError::Io(e.to_string()))?;
    graph_from_json(&text)
}

/// Straight-line direction helper for tests and the CLI.
pub fn unit_towards(from: &Point, to: &Point) -> Option<Vec3> {
    let d = to - from;
    let n = d.norm();
    if n < 1e-12 {
        None
    } else {
        Some(d / n)
    }
}
