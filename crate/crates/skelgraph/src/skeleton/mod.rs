//! Frontier-driven skeleton graph generation.
//!
//! A node is grown by casting rays from an initial center along uniformly
//! sampled directions. Ray endpoints become black vertices (obstacle or
//! polyhedron hits) or white vertices (truncated in unreached free space).
//! The black vertices, projected onto a unit sphere, yield a convex hull
//! whose facets are mapped back to the sampled positions to form the node's
//! polyhedron; facets bordering white regions are grouped into frontiers
//! that seed further expansion, breadth-first, until no frontier survives
//! verification.

mod frontier;
mod generator;

pub use frontier::{blind_facet_clusters, build_poly_and_frontiers, split_facets_by_normal};
pub use generator::{expand_once, generate_skeleton, generate_vertices, verify_frontier, Verdict};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{GeometryError, Polyhedron};
use crate::map::MapError;
use crate::{Point, Vec3};

#[derive(Debug, Error)]
pub enum SkeletonError {
    #[error("seed position is outside the map bounds")]
    SeedOutsideBounds,
    #[error("seed position is occupied")]
    SeedOccupied,
    #[error("initial node expansion failed at the seed")]
    InitialExpansionFailed,
    #[error("expansion count exceeded the hard cap of {0}")]
    ExpansionCapExceeded(usize),
    #[error(transparent)]
    Map(#[from] MapError),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
}

/// Tunable parameters of the generator. The defaults are the values used
/// throughout the test worlds; everything round-trips through TOML/JSON.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(default)]
pub struct GenerationParams {
    /// Rays cast per node expansion.
    pub ray_count: usize,
    /// Truncation distance for sampling rays, meters.
    pub max_ray_length: f64,
    /// Minimum clear distance ahead of a frontier for it to stay valid, meters.
    pub frontier_clear_distance: f64,
    /// Nodes with no white vertex and size below this are discarded, meters.
    pub node_size_epsilon: f64,
    /// Frontiers split when member facet normals spread beyond this, degrees.
    pub split_angle_threshold: f64,
    /// Facets whose max/min vertex distance ratio exceeds this form blind frontiers.
    pub blind_distance_ratio: f64,
    /// Robot radius for all freeness tests, meters.
    pub clearance: f64,
    /// Hard cap on main-loop iterations; exceeding it is an error.
    pub max_expansions: usize,
    /// Cycle formation toggle; disabling leaves loops unclosed.
    pub form_cycles: bool,
    /// Cycle closures are only built to nodes farther than this many graph
    /// edges away; nearer detections are redundant with existing connections.
    pub cycle_min_graph_distance: usize,
}

impl Default for GenerationParams {
    fn default() -> Self {
        GenerationParams {
            ray_count: 128,
            max_ray_length: 2.0,
            frontier_clear_distance: 0.1,
            node_size_epsilon: 0.7,
            split_angle_threshold: 60.0,
            blind_distance_ratio: 2.0,
            clearance: 0.3,
            max_expansions: 100_000,
            form_cycles: true,
            cycle_min_graph_distance: 3,
        }
    }
}

impl GenerationParams {
    pub fn validate(&self) -> Result<(), String> {
        if self.ray_count < 4 {
            return Err("ray_count must be >= 4".into());
        }
        for (name, v) in [
            ("max_ray_length", self.max_ray_length),
            ("frontier_clear_distance", self.frontier_clear_distance),
            ("node_size_epsilon", self.node_size_epsilon),
            ("blind_distance_ratio", self.blind_distance_ratio),
            ("clearance", self.clearance),
        ] {
            if v <= 0.0 {
                return Err(format!("{name} must be > 0"));
            }
        }
        if !(0.0 < self.split_angle_threshold && self.split_angle_threshold < 180.0) {
            return Err("split_angle_threshold must be in (0, 180) degrees".into());
        }
        Ok(())
    }
}

/// Ray sample classification.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SampleKind {
    Black,
    White,
}

/// One ray endpoint of a node expansion.
#[derive(Debug, Clone)]
pub struct VertexSample {
    pub position: Point,
    pub kind: SampleKind,
    /// Node id of the previously built polyhedron this sample lies on, if the
    /// first hit was a registry mesh. Always `None` for white samples.
    pub detected_polyhedron: Option<usize>,
    /// Sample projected onto the unit sphere around the node's initial center.
    pub projected_position: Point,
    /// Index into the direction set that produced this sample.
    pub source_direction: usize,
}

/// Grouped boundary facets of a node's polyhedron, bordering free space not
/// yet covered by any node.
#[derive(Debug, Clone)]
pub struct Frontier {
    /// Facet indices on the parent node's polyhedron mesh.
    pub facets: Vec<u32>,
    /// Normalized mean of member facet outward normals.
    pub normal: Vec3,
    /// A central position on one of the member facets.
    pub center: Point,
    /// Midpoint of the verification ray segment; set once verified valid.
    pub initial_position: Option<Point>,
    pub parent_node: usize,
}

/// A polyhedron covering a distinctive free-space region.
#[derive(Debug, Clone)]
pub struct Node {
    pub id: usize,
    /// Rectified center (mean of black samples, or the initial center when
    /// that mean is not free).
    pub center: Point,
    pub initial_center: Point,
    pub polyhedron: Polyhedron,
    pub frontiers: Vec<Frontier>,
    /// Mean distance from black samples to the center, meters.
    pub size: f64,
    /// Expansion index of the node this one grew from; `None` for the seed node.
    pub parent: Option<usize>,
    /// Vertex id of this node in the skeleton graph.
    pub graph_vertex: usize,
}

/// A skeleton vertex placed on a frontier, linking two neighboring nodes.
#[derive(Debug, Clone)]
pub struct Gate {
    pub id: usize,
    pub position: Point,
    pub linked_nodes: [usize; 2],
    /// Vertex id of this gate in the skeleton graph.
    pub graph_vertex: usize,
}

/// Straight traversable segment between two skeleton vertices.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Connection {
    pub endpoint_a: usize,
    pub endpoint_b: usize,
    pub length: f64,
}

/// All accepted node boundary meshes, queryable by ray.
#[derive(Debug, Clone, Default)]
pub struct PolyhedronRegistry {
    boundaries: Vec<Polyhedron>,
}

impl PolyhedronRegistry {
    pub fn push(&mut self, poly: Polyhedron) {
        self.boundaries.push(poly);
    }

    pub fn len(&self) -> usize {
        self.boundaries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.boundaries.is_empty()
    }

    pub fn get(&self, node_id: usize) -> Option<&Polyhedron> {
        self.boundaries.iter().find(|p| p.owner_node == node_id)
    }

    pub fn iter(&self) -> impl Iterator<Item = &Polyhedron> {
        self.boundaries.iter()
    }

    /// Nearest mesh hit over all stored boundaries: `(distance, owner node id)`.
    pub fn raycast(&self, origin: &Point, dir: &Vec3, max_dist: f64) -> Option<(f64, usize)> {
        self.raycast_excluding(origin, dir, max_dist, None)
    }

    /// Raycast that skips the polyhedron owned by `excluded`. Frontier
    /// verification starts on its parent's boundary surface, which would
    /// otherwise self-intersect at near-zero distance.
    pub fn raycast_excluding(
        &self,
        origin: &Point,
        dir: &Vec3,
        max_dist: f64,
        excluded: Option<usize>,
    ) -> Option<(f64, usize)> {
        let mut best: Option<(f64, usize)> = None;
        for poly in &self.boundaries {
            if Some(poly.owner_node) == excluded {
                continue;
            }
            if !poly.aabb.intersects_ray(origin, dir, max_dist) {
                continue;
            }
            if let Some((t, _)) = crate::geometry::ray_mesh_intersect(origin, dir, max_dist, &poly.mesh)
            {
                if best.map_or(true, |(bt, _)| t < bt) {
                    best = Some((t, poly.owner_node));
                }
            }
        }
        best
    }
}
