//! The breadth-first frontier loop: verify, expand, connect, repeat.

use std::collections::VecDeque;

use crate::geometry::{point_triangle_distance, project_to_unit_sphere, DirectionSet};
use crate::graph::{SkeletonGraph, VertexKind};
use crate::map::CollisionOracle;
use crate::Point;

use super::{
    build_poly_and_frontiers, Frontier, Gate, GenerationParams, Node, PolyhedronRegistry,
    SampleKind, SkeletonError, VertexSample,
};

/// Frontier verification outcome.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Verdict {
    /// Valid, carrying the initial position for the next node (the midpoint
    /// of the verification ray segment).
    Valid(Point),
    Invalid,
}

/// Casts one ray per direction from `initial_center`, classifying endpoints
/// black (obstacle or polyhedron hit) or white (truncated in free space).
pub fn generate_vertices(
    initial_center: &Point,
    dirs: &DirectionSet,
    map: &dyn CollisionOracle,
    registry: &PolyhedronRegistry,
    params: &GenerationParams,
) -> Result<Vec<VertexSample>, SkeletonError> {
    if !map.is_free(initial_center) {
        return Err(super::SkeletonError::Map(
            crate::map::MapError::RaycastFromOccupied,
        ));
    }
    let mut samples = Vec::with_capacity(dirs.len());
    for (i, dir) in dirs.dirs.iter().enumerate() {
        // Map hits are pulled back to the last free sample so the polyhedron
        // surface (and every frontier center on it) stays in traversable
        // space; the offset is within the march-step discretization tolerance.
        let pull_back = |t: f64| (t - map.march_step()).max(0.5 * t);
        let map_hit = map
            .raycast_occupied(initial_center, dir, params.max_ray_length)?
            .map(pull_back);
        let registry_hit = registry.raycast(initial_center, dir, params.max_ray_length);
        let (kind, t, detected) = match (map_hit, registry_hit) {
            (None, None) => (SampleKind::White, params.max_ray_length, None),
            (Some(tm), None) => (SampleKind::Black, tm, None),
            (None, Some((tr, owner))) => (SampleKind::Black, tr, Some(owner)),
            (Some(tm), Some((tr, owner))) => {
                if tr < tm {
                    (SampleKind::Black, tr, Some(owner))
                } else {
                    (SampleKind::Black, tm, None)
                }
            }
        };
        let position = initial_center + dir * t;
        samples.push(VertexSample {
            position,
            kind,
            detected_polyhedron: detected,
            projected_position: project_to_unit_sphere(initial_center, &position)?,
            source_direction: i,
        });
    }
    Ok(samples)
}

/// One raycast from the frontier center along its normal: valid only when
/// neither occupied space nor an existing polyhedron lies within the clear
/// distance. A frontier whose center is itself not free is invalid.
pub fn verify_frontier(
    frontier: &Frontier,
    map: &dyn CollisionOracle,
    registry: &PolyhedronRegistry,
    params: &GenerationParams,
) -> Verdict {
    if !map.is_free(&frontier.center) {
        return Verdict::Invalid;
    }
    let map_hit = match map.raycast_occupied(&frontier.center, &frontier.normal, params.max_ray_length)
    {
        Ok(hit) => hit,
        Err(_) => return Verdict::Invalid,
    };
    let registry_hit = registry
        .raycast_excluding(
            &frontier.center,
            &frontier.normal,
            params.max_ray_length,
            Some(frontier.parent_node),
        )
        .map(|(t, _)| t);
    let reach = [map_hit, registry_hit]
        .into_iter()
        .flatten()
        .fold(params.max_ray_length, f64::min);
    if reach > params.frontier_clear_distance {
        Verdict::Valid(frontier.center + frontier.normal * (0.5 * reach))
    } else {
        Verdict::Invalid
    }
}

/// A fully expanded node together with its ray samples, not yet committed to
/// any graph.
#[derive(Debug, Clone)]
pub struct Expansion {
    pub node: Node,
    pub samples: Vec<VertexSample>,
}

/// Runs one node expansion at `initial_center`: sample rays, apply the
/// no-white/size rejection, build the polyhedron and its frontiers, rectify
/// the center. `None` means the expansion was rejected.
pub fn expand_once(
    initial_center: &Point,
    node_id: usize,
    dirs: &DirectionSet,
    map: &dyn CollisionOracle,
    registry: &PolyhedronRegistry,
    params: &GenerationParams,
) -> Result<Option<Expansion>, SkeletonError> {
    if !map.is_free(initial_center) {
        return Ok(None);
    }
    let samples = generate_vertices(initial_center, dirs, map, registry, params)?;
    let blacks: Vec<&VertexSample> = samples
        .iter()
        .filter(|s| s.kind == SampleKind::Black)
        .collect();
    if blacks.len() < 4 {
        return Ok(None);
    }
    let has_white = blacks.len() < samples.len();
    let initial_size = blacks
        .iter()
        .map(|s| (s.position - initial_center).norm())
        .sum::<f64>()
        / blacks.len() as f64;
    // Redundant-branch suppression: no white vertex and a small size means
    // the region is a dead pocket already covered well enough.
    if !has_white && initial_size <= params.node_size_epsilon {
        return Ok(None);
    }
    let (polyhedron, frontiers) =
        match build_poly_and_frontiers(node_id, initial_center, &samples, params) {
            Ok(built) => built,
            Err(_) => return Ok(None), // degenerate sample geometry
        };
    // Rectify the center to the mean black position, unless that lands in
    // occupied space.
    let mean_black = Point::from(
        blacks
            .iter()
            .map(|s| s.position.coords)
            .sum::<crate::Vec3>()
            / blacks.len() as f64,
    );
    let center = if map.is_free(&mean_black) {
        mean_black
    } else {
        *initial_center
    };
    let size = blacks
        .iter()
        .map(|s| (s.position - center).norm())
        .sum::<f64>()
        / blacks.len() as f64;
    Ok(Some(Expansion {
        node: Node {
            id: node_id,
            center,
            initial_center: *initial_center,
            polyhedron,
            frontiers,
            size,
            parent: None,
            graph_vertex: usize::MAX,
        },
        samples,
    }))
}

/// A cycle closure candidate: one gate plus two connections back to a
/// previously built node whose polyhedron the new node's rays detected.
#[derive(Debug, Clone)]
struct CycleClosure {
    owner_node: usize,
    gate_position: Point,
}

/// For every detected polyhedron, picks the owner frontier holding the most
/// of the new node's black samples and collision-checks the gate and both
/// connections; any failure revokes that closure.
fn form_cycles(
    expansion: &Expansion,
    parent: Option<usize>,
    nodes: &[Node],
    graph: &SkeletonGraph,
    map: &dyn CollisionOracle,
    params: &GenerationParams,
) -> Vec<CycleClosure> {
    let mut detected: Vec<usize> = expansion
        .samples
        .iter()
        .filter_map(|s| s.detected_polyhedron)
        .filter(|&id| Some(id) != parent)
        .collect();
    detected.sort_unstable();
    detected.dedup();
    // Drop detections already close to the parent in graph distance; a gate
    // there would duplicate the local connectivity instead of closing a loop.
    if let Some(parent_id) = parent {
        let near = graph.vertices_within_edges(
            nodes[parent_id].graph_vertex,
            params.cycle_min_graph_distance,
        );
        detected.retain(|&id| !near.contains(&nodes[id].graph_vertex));
    }

    let mut closures = Vec::new();
    let tol = map.march_step();
    for owner_id in detected {
        let owner = &nodes[owner_id];
        // Count current black samples lying on each frontier of the owner.
        let mut best: Option<(usize, usize)> = None; // (count, frontier index)
        for (fi, frontier) in owner.frontiers.iter().enumerate() {
            let count = expansion
                .samples
                .iter()
                .filter(|s| s.kind == SampleKind::Black)
                .filter(|s| {
                    frontier.facets.iter().any(|&facet| {
                        let [a, b, c] = owner.polyhedron.mesh.facet_points(facet as usize);
                        point_triangle_distance(&s.position, &a, &b, &c) <= tol
                    })
                })
                .count();
            if count > 0 && best.map_or(true, |(bc, _)| count > bc) {
                best = Some((count, fi));
            }
        }
        let Some((_, fi)) = best else { continue };
        let gate_position = owner.frontiers[fi].center;
        let ok = map.is_free(&gate_position)
            && map.segment_free(&gate_position, &expansion.node.center)
            && map.segment_free(&gate_position, &owner.center);
        if ok {
            closures.push(CycleClosure {
                owner_node: owner_id,
                gate_position,
            });
        }
    }
    closures
}

/// Algorithm entry point: grows the skeleton graph breadth-first from one
/// seed expansion until the pending frontier FIFO drains.
pub fn generate_skeleton(
    map: &dyn CollisionOracle,
    seed: &Point,
    params: &GenerationParams,
) -> Result<SkeletonGraph, SkeletonError> {
    if !map.bounds().contains(seed) {
        return Err(SkeletonError::SeedOutsideBounds);
    }
    if !map.is_free(seed) {
        return Err(SkeletonError::SeedOccupied);
    }
    let dirs = crate::geometry::sample_unit_directions(params.ray_count)?;

    let mut graph = SkeletonGraph::default();
    let mut pending: VecDeque<Frontier> = VecDeque::new();

    // Initial node: expanded directly at the seed, no parent gate.
    let seed_expansion = expand_once(seed, 0, &dirs, map, &graph.registry, params)?
        .ok_or(SkeletonError::InitialExpansionFailed)?;
    commit_expansion(&mut graph, &mut pending, seed_expansion, None, Vec::new());

    let mut iterations = 0usize;
    while let Some(frontier) = pending.pop_front() {
        iterations += 1;
        if iterations > params.max_expansions {
            return Err(SkeletonError::ExpansionCapExceeded(params.max_expansions));
        }
        let Verdict::Valid(initial_position) =
            verify_frontier(&frontier, map, &graph.registry, params)
        else {
            continue;
        };
        let node_id = graph.nodes.len();
        let Some(expansion) =
            expand_once(&initial_position, node_id, &dirs, map, &graph.registry, params)?
        else {
            continue;
        };
        // Connections must be traversable; an expansion whose gate links
        // cannot be collision-checked clean is dropped whole.
        let parent = &graph.nodes[frontier.parent_node];
        let gate_position = frontier.center;
        if !map.is_free(&gate_position)
            || !map.segment_free(&gate_position, &expansion.node.center)
            || !map.segment_free(&gate_position, &parent.center)
        {
            continue;
        }
        let closures = if params.form_cycles {
            form_cycles(
                &expansion,
                Some(frontier.parent_node),
                &graph.nodes,
                &graph,
                map,
                params,
            )
        } else {
            Vec::new()
        };
        commit_expansion(
            &mut graph,
            &mut pending,
            expansion,
            Some((frontier.parent_node, gate_position)),
            closures,
        );
    }
    Ok(graph)
}

fn commit_expansion(
    graph: &mut SkeletonGraph,
    pending: &mut VecDeque<Frontier>,
    expansion: Expansion,
    parent_gate: Option<(usize, Point)>,
    closures: Vec<CycleClosure>,
) {
    let Expansion { mut node, .. } = expansion;
    node.parent = parent_gate.as_ref().map(|&(p, _)| p);
    node.graph_vertex = graph.add_vertex(VertexKind::Node, node.center);
    let node_id = node.id;
    let node_vertex = node.graph_vertex;
    debug_assert_eq!(node_id, graph.nodes.len());
    for f in &node.frontiers {
        pending.push_back(f.clone());
    }
    graph.registry.push(node.polyhedron.clone());
    graph.nodes.push(node);

    if let Some((parent_id, gate_position)) = parent_gate {
        let parent_vertex = graph.nodes[parent_id].graph_vertex;
        let gate_vertex = graph.add_vertex(VertexKind::Gate, gate_position);
        graph.gates.push(Gate {
            id: graph.gates.len(),
            position: gate_position,
            linked_nodes: [parent_id, node_id],
            graph_vertex: gate_vertex,
        });
        graph.add_edge(gate_vertex, node_vertex);
        graph.add_edge(gate_vertex, parent_vertex);
    }
    for closure in closures {
        let owner_vertex = graph.nodes[closure.owner_node].graph_vertex;
        let gate_vertex = graph.add_vertex(VertexKind::Gate, closure.gate_position);
        graph.gates.push(Gate {
            id: graph.gates.len(),
            position: closure.gate_position,
            linked_nodes: [closure.owner_node, node_id],
            graph_vertex: gate_vertex,
        });
        graph.add_edge(gate_vertex, node_vertex);
        graph.add_edge(gate_vertex, owner_vertex);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::sample_unit_directions;
    use crate::map::PointCloudMap;
    use crate::worldgen;
    use crate::Vec3;

    fn default_params() -> GenerationParams {
        GenerationParams::default()
    }

    /// Room interior of the given half-extents, walls sampled densely.
    fn boxed_room(hx: f64, hy: f64, hz: f64) -> PointCloudMap {
        let boxes = worldgen::shell_boxes(
            &crate::map::Aabb {
                min: [-hx, -hy, -hz],
                max: [hx, hy, hz],
            },
            0.2,
        );
        let points = worldgen::sample_box_surfaces(&boxes, 100.0);
        PointCloudMap::new(points, 0.3).unwrap()
    }

    // [TRIVIAL: open space]
    #[test]
    fn vertices_all_white_in_wide_open_chamber() {
        let map = boxed_room(20.0, 20.0, 20.0);
        let dirs = sample_unit_directions(64).unwrap();
        let registry = PolyhedronRegistry::default();
        let params = default_params();
        let samples =
            generate_vertices(&Point::origin(), &dirs, &map, &registry, &params).unwrap();
        for s in &samples {
            assert_eq!(s.kind, SampleKind::White);
            assert!(((s.position - Point::origin()).norm() - params.max_ray_length).abs() < 1e-9);
            assert!(s.detected_polyhedron.is_none());
            assert!(((s.projected_position - Point::origin()).norm() - 1.0).abs() < 1e-9);
        }
    }

    // [DERIVED: plane-distance oracle]
    #[test]
    fn vertices_near_wall_match_plane_distance_oracle() {
        // Wall at x = 2, center 1 m away at x = 1.
        let map = boxed_room(2.0, 6.0, 6.0);
        let center = Point::new(1.0, 0.0, 0.0);
        let dirs = sample_unit_directions(128).unwrap();
        let registry = PolyhedronRegistry::default();
        let params = default_params();
        let samples = generate_vertices(&center, &dirs, &map, &registry, &params).unwrap();
        for s in &samples {
            let dir = dirs.dirs[s.source_direction];
            if dir.x > 0.5 {
                // Heading into the wall: expected first blocked sample is
                // where the ray comes within clearance of the x = 2 plane.
                assert_eq!(s.kind, SampleKind::Black);
                let expected_t = (2.0 - params.clearance - center.x) / dir.x;
                let t = (s.position - center).norm();
                assert!(
                    (t - expected_t).abs() <= map.march_step() + 1e-9,
                    "dir {dir:?}: t = {t}, expected about {expected_t}"
                );
            }
        }
    }

    // [DERIVED: placed cube]
    #[test]
    fn vertices_detect_registry_polyhedron() {
        let map = boxed_room(10.0, 10.0, 10.0);
        let dirs = sample_unit_directions(64).unwrap();
        let mut params = default_params();
        // Long rays so the cube at x = 3 is within reach.
        params.max_ray_length = 5.0;
        // A previously accepted node occupying a unit cube around (3, 0, 0).
        let mut cube_pts = Vec::new();
        for x in [2.5, 3.5] {
            for y in [-0.5, 0.5] {
                for z in [-0.5, 0.5] {
                    cube_pts.push(Point::new(x, y, z));
                }
            }
        }
        let mesh = crate::geometry::convex_hull_mesh(&cube_pts).unwrap();
        let mut registry = PolyhedronRegistry::default();
        registry.push(crate::geometry::Polyhedron {
            aabb: crate::map::Aabb::from_points(mesh.vertices.iter()).unwrap(),
            mesh,
            owner_node: 0,
        });
        let samples =
            generate_vertices(&Point::origin(), &dirs, &map, &registry, &params).unwrap();
        let detected: Vec<&VertexSample> = samples
            .iter()
            .filter(|s| s.detected_polyhedron == Some(0))
            .collect();
        assert!(!detected.is_empty());
        for s in detected {
            assert_eq!(s.kind, SampleKind::Black);
            assert!(dirs.dirs[s.source_direction].x > 0.0);
        }
    }

    // [DERIVED: truncation midpoint]
    #[test]
    fn verify_open_hall_uses_truncation_midpoint() {
        let map = boxed_room(12.0, 12.0, 12.0);
        let registry = PolyhedronRegistry::default();
        let mut params = default_params();
        params.max_ray_length = 5.0;
        let frontier = Frontier {
            facets: vec![0],
            normal: Vec3::new(1.0, 0.0, 0.0),
            center: Point::new(0.0, 0.0, 0.0),
            initial_position: None,
            parent_node: 0,
        };
        match verify_frontier(&frontier, &map, &registry, &params) {
            Verdict::Valid(p) => {
                assert!((p - Point::new(2.5, 0.0, 0.0)).norm() < 1e-9);
            }
            Verdict::Invalid => panic!("open hall frontier must verify"),
        }
    }

    // [DERIVED: wall distance]
    #[test]
    fn verify_wall_within_threshold_is_invalid() {
        // Wall 0.5 m ahead of the frontier center (wall plane at x = 2.0,
        // center at 1.5, clearance shortens the reach further).
        let map = boxed_room(2.0, 6.0, 6.0);
        let registry = PolyhedronRegistry::default();
        let mut params = default_params();
        params.frontier_clear_distance = 1.0;
        let frontier = Frontier {
            facets: vec![0],
            normal: Vec3::new(1.0, 0.0, 0.0),
            center: Point::new(1.5, 0.0, 0.0),
            initial_position: None,
            parent_node: 0,
        };
        assert_eq!(
            verify_frontier(&frontier, &map, &registry, &params),
            Verdict::Invalid
        );
    }

    // [DERIVED: placed cube]
    #[test]
    fn verify_registry_polyhedron_within_threshold_is_invalid() {
        let map = boxed_room(12.0, 12.0, 12.0);
        let mut params = default_params();
        params.frontier_clear_distance = 1.0;
        // Polyhedron face 0.4 m ahead.
        let mut cube_pts = Vec::new();
        for x in [0.4, 2.4] {
            for y in [-1.0, 1.0] {
                for z in [-1.0, 1.0] {
                    cube_pts.push(Point::new(x, y, z));
                }
            }
        }
        let mesh = crate::geometry::convex_hull_mesh(&cube_pts).unwrap();
        let mut registry = PolyhedronRegistry::default();
        // Owned by a node other than the frontier's parent, so verification
        // does not exclude it from the registry raycast.
        registry.push(crate::geometry::Polyhedron {
            aabb: crate::map::Aabb::from_points(mesh.vertices.iter()).unwrap(),
            mesh,
            owner_node: 1,
        });
        let frontier = Frontier {
            facets: vec![0],
            normal: Vec3::new(1.0, 0.0, 0.0),
            center: Point::origin(),
            initial_position: None,
            parent_node: 0,
        };
        assert_eq!(
            verify_frontier(&frontier, &map, &registry, &params),
            Verdict::Invalid
        );
    }

    // [DERIVED: recomputation]
    #[test]
    fn expansion_size_matches_recomputation() {
        let map = boxed_room(4.0, 4.0, 1.25);
        let dirs = sample_unit_directions(128).unwrap();
        let registry = PolyhedronRegistry::default();
        let params = default_params();
        let expansion = expand_once(&Point::origin(), 0, &dirs, &map, &registry, &params)
            .unwrap()
            .expect("room expansion accepted");
        let blacks: Vec<&VertexSample> = expansion
            .samples
            .iter()
            .filter(|s| s.kind == SampleKind::Black)
            .collect();
        let recomputed = blacks
            .iter()
            .map(|s| (s.position - expansion.node.center).norm())
            .sum::<f64>()
            / blacks.len() as f64;
        assert!((recomputed - expansion.node.size).abs() < 1e-9);
        assert!(map.is_free(&expansion.node.center));
    }

    // [DERIVED: dead-end clause]
    #[test]
    fn tiny_sealed_pocket_is_rejected() {
        // Everything hits a wall (all black) and the mean hit distance stays
        // under epsilon: the dead-end closet clause.
        let dirs = sample_unit_directions(64).unwrap();
        let registry = PolyhedronRegistry::default();
        let mut params = default_params();
        params.clearance = 0.1;
        params.node_size_epsilon = 0.8;
        let boxes = worldgen::shell_boxes(
            &crate::map::Aabb {
                min: [-0.72, -0.72, -0.72],
                max: [0.72, 0.72, 0.72],
            },
            0.2,
        );
        let points = worldgen::sample_box_surfaces(&boxes, 400.0);
        let map = PointCloudMap::new(points, params.clearance).unwrap();
        let expansion =
            expand_once(&Point::origin(), 0, &dirs, &map, &registry, &params).unwrap();
        assert!(expansion.is_none(), "pocket smaller than epsilon must be discarded");
    }
}
