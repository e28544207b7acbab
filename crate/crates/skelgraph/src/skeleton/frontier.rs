//! Polyhedron construction and frontier identification.
//!
//! Black samples are projected to the unit sphere around the node's initial
//! center and hulled; the hull facets are mapped back onto the actual black
//! positions, giving a possibly non-convex polyhedron. Sample adjacency is
//! taken from the hull over *all* projected samples (black and white), which
//! is the only canonical neighborhood the construction provides.

use crate::geometry::{convex_hull_mesh, GeometryError, Polyhedron, TriangleMesh};
use crate::map::Aabb;
use crate::{Point, Vec3};

use super::{Frontier, GenerationParams, SampleKind, VertexSample};

pub fn build_poly_and_frontiers(
    node_id: usize,
    initial_center: &Point,
    samples: &[VertexSample],
    params: &GenerationParams,
) -> Result<(Polyhedron, Vec<Frontier>), GeometryError> {
    let black: Vec<usize> = samples
        .iter()
        .enumerate()
        .filter(|(_, s)| s.kind == SampleKind::Black)
        .map(|(i, _)| i)
        .collect();
    if black.len() < 4 {
        return Err(GeometryError::TooFewPoints {
            min: 4,
            got: black.len(),
        });
    }

    // Hull over every projected sample: defines sample adjacency.
    let all_projected: Vec<Point> = samples.iter().map(|s| s.projected_position).collect();
    let adjacency_hull = convex_hull_mesh(&all_projected)?;
    let sample_edges = adjacency_hull.edges();
    let mut neighbors: Vec<Vec<u32>> = vec![Vec::new(); samples.len()];
    for &(a, b) in &sample_edges {
        neighbors[a as usize].push(b);
        neighbors[b as usize].push(a);
    }

    // Hull over projected black samples only: the polyhedron topology.
    let black_projected: Vec<Point> = black.iter().map(|&i| samples[i].projected_position).collect();
    let sphere_hull = convex_hull_mesh(&black_projected)?;

    // Map facets back onto the actual black positions, keeping the hull's
    // facet topology and winding.
    let black_positions: Vec<Point> = black.iter().map(|&i| samples[i].position).collect();
    let mut facet_normals = Vec::with_capacity(sphere_hull.facets.len());
    for (f, sphere_n) in sphere_hull.facets.iter().zip(&sphere_hull.facet_normals) {
        let a = black_positions[f[0] as usize];
        let b = black_positions[f[1] as usize];
        let c = black_positions[f[2] as usize];
        let mut n = (b - a).cross(&(c - a));
        let len = n.norm();
        if len > 1e-18 {
            n /= len;
        }
        // Radial mapping can flip slivers; keep normals pointing away from
        // the node like their unit-sphere counterparts.
        if n.dot(sphere_n) < 0.0 {
            n = -n;
        }
        facet_normals.push(n);
    }
    let mesh = TriangleMesh {
        vertices: black_positions.clone(),
        facets: sphere_hull.facets.clone(),
        facet_normals,
    };
    let aabb = Aabb::from_points(black_positions.iter()).expect(">=4 points");
    let polyhedron = Polyhedron {
        mesh,
        owner_node: node_id,
        aabb,
    };

    // Group black samples that border white samples.
    let grouped: Vec<usize> = black
        .iter()
        .copied()
        .filter(|&i| {
            neighbors[i]
                .iter()
                .any(|&j| samples[j as usize].kind == SampleKind::White)
        })
        .collect();

    // Connected components of the grouped set under sample adjacency.
    let components = connected_components(&grouped, |i| {
        neighbors[i]
            .iter()
            .map(|&j| j as usize)
            .filter(|&j| grouped.contains(&j))
            .collect()
    });

    let mut frontiers: Vec<Frontier> = Vec::new();
    for component in components {
        let in_set = |sample_idx: u32| component.contains(&(sample_idx as usize));
        let facets: Vec<u32> = polyhedron
            .mesh
            .facets
            .iter()
            .enumerate()
            .filter(|(_, f)| {
                f.iter()
                    .all(|&local| in_set(black[local as usize] as u32))
            })
            .map(|(fi, _)| fi as u32)
            .collect();
        if facets.is_empty() {
            continue;
        }
        for part in split_facets_by_normal(&polyhedron.mesh, &facets, params.split_angle_threshold)
        {
            frontiers.push(make_frontier(node_id, &polyhedron.mesh, part));
        }
    }

    // Blind frontiers cover sampling blind spots: facets whose vertices have
    // a large spread in distance to the node.
    for cluster in blind_facet_clusters(
        &polyhedron.mesh,
        initial_center,
        params.blind_distance_ratio,
    ) {
        frontiers.push(make_frontier(node_id, &polyhedron.mesh, cluster));
    }

    // Larger frontiers first: more facets, more chance of uncovered space.
    frontiers.sort_by(|a, b| b.facets.len().cmp(&a.facets.len()));
    Ok((polyhedron, frontiers))
}

fn connected_components(
    members: &[usize],
    neighbors_of: impl Fn(usize) -> Vec<usize>,
) -> Vec<Vec<usize>> {
    let mut components = Vec::new();
    let mut visited = std::collections::HashSet::new();
    for &start in members {
        if !visited.insert(start) {
            continue;
        }
        let mut component = vec![start];
        let mut queue = std::collections::VecDeque::from([start]);
        while let Some(cur) = queue.pop_front() {
            for n in neighbors_of(cur) {
                if visited.insert(n) {
                    component.push(n);
                    queue.push_back(n);
                }
            }
        }
        component.sort_unstable();
        components.push(component);
    }
    components
}

/// Greedy region growing over facet adjacency: a facet joins a part only if
/// its normal stays within `threshold_deg` of the part's running mean normal.
/// Parts are connected and their union is the input set.
pub fn split_facets_by_normal(
    mesh: &TriangleMesh,
    facets: &[u32],
    threshold_deg: f64,
) -> Vec<Vec<u32>> {
    let cos_threshold = threshold_deg.to_radians().cos();
    let adjacency = mesh.facet_adjacency();
    let member: std::collections::HashSet<u32> = facets.iter().copied().collect();
    let mut remaining: Vec<u32> = facets.to_vec();
    remaining.sort_unstable();
    let mut assigned = std::collections::HashSet::new();
    let mut parts = Vec::new();
    for &seed in &remaining {
        if assigned.contains(&seed) {
            continue;
        }
        let mut part = vec![seed];
        assigned.insert(seed);
        let mut normal_sum = mesh.facet_normals[seed as usize];
        let mut queue = std::collections::VecDeque::from([seed]);
        while let Some(cur) = queue.pop_front() {
            for &next in &adjacency[cur as usize] {
                if assigned.contains(&next) || !member.contains(&next) {
                    continue;
                }
                let mean = normal_sum.normalize();
                if mesh.facet_normals[next as usize].dot(&mean) >= cos_threshold {
                    assigned.insert(next);
                    part.push(next);
                    normal_sum += mesh.facet_normals[next as usize];
                    queue.push_back(next);
                }
            }
        }
        part.sort_unstable();
        parts.push(part);
    }
    parts
}

/// Facet clusters whose max/min vertex distance to the node center exceeds
/// `ratio`, grouped by facet adjacency.
pub fn blind_facet_clusters(mesh: &TriangleMesh, center: &Point, ratio: f64) -> Vec<Vec<u32>> {
    let blind: Vec<u32> = (0..mesh.facets.len() as u32)
        .filter(|&fi| {
            let dists = mesh.facets[fi as usize].map(|v| (mesh.vertices[v as usize] - center).norm());
            let max = dists.iter().copied().fold(f64::MIN, f64::max);
            let min = dists.iter().copied().fold(f64::MAX, f64::min);
            min > 1e-12 && max / min > ratio
        })
        .collect();
    if blind.is_empty() {
        return Vec::new();
    }
    let adjacency = mesh.facet_adjacency();
    let members: Vec<usize> = blind.iter().map(|&f| f as usize).collect();
    connected_components(&members, |f| {
        adjacency[f]
            .iter()
            .map(|&g| g as usize)
            .filter(|g| members.contains(g))
            .collect()
    })
    .into_iter()
    .map(|c| c.into_iter().map(|f| f as u32).collect())
    .collect()
}

fn make_frontier(node_id: usize, mesh: &TriangleMesh, facets: Vec<u32>) -> Frontier {
    let normal_sum: Vec3 = facets
        .iter()
        .map(|&f| mesh.facet_normals[f as usize])
        .sum();
    let normal = if normal_sum.norm() > 1e-12 {
        normal_sum.normalize()
    } else {
        mesh.facet_normals[facets[0] as usize]
    };
    let center = frontier_center(mesh, &facets, &normal);
    Frontier {
        facets,
        normal,
        center,
        initial_position: None,
        parent_node: node_id,
    }
}

/// Mean of member facet centers, projected along the frontier normal onto
/// the nearest member facet. Falls back to the member facet center closest
/// to the unprojected mean when the projection misses every facet.
fn frontier_center(mesh: &TriangleMesh, facets: &[u32], normal: &Vec3) -> Point {
    let mean = {
        let sum: Vec3 = facets.iter().map(|&f| mesh.facet_center(f as usize).coords).sum();
        Point::from(sum / facets.len() as f64)
    };
    let mut best: Option<(f64, Point)> = None;
    for &fi in facets {
        let [a, b, c] = mesh.facet_points(fi as usize);
        let n = mesh.facet_normals[fi as usize];
        let denom = n.dot(normal);
        if denom.abs() < 1e-12 {
            continue;
        }
        let s = n.dot(&(a - mean)) / denom;
        let q = mean + normal * s;
        if crate::geometry::point_triangle_distance(&q, &a, &b, &c) < 1e-6
            && best.map_or(true, |(bs, _)| s.abs() < bs)
        {
            best = Some((s.abs(), q));
        }
    }
    match best {
        Some((_, q)) => q,
        None => {
            let nearest = facets
                .iter()
                .map(|&f| mesh.facet_center(f as usize))
                .min_by(|a, b| {
                    (a - mean)
                        .norm()
                        .partial_cmp(&(b - mean).norm())
                        .unwrap()
                })
                .expect("nonempty facets");
            nearest
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::sample_unit_directions;

    /// Builds samples from explicit directions, distances and colors.
    fn make_samples(
        center: &Point,
        dirs: &[Vec3],
        spec: impl Fn(usize) -> (SampleKind, f64),
    ) -> Vec<VertexSample> {
        dirs.iter()
            .enumerate()
            .map(|(i, d)| {
                let (kind, dist) = spec(i);
                VertexSample {
                    position: center + d * dist,
                    kind,
                    detected_polyhedron: None,
                    projected_position: center + d,
                    source_direction: i,
                }
            })
            .collect()
    }

    fn octahedron_dirs() -> Vec<Vec3> {
        vec![
            Vec3::new(1.0, 0.0, 0.0),
            Vec3::new(-1.0, 0.0, 0.0),
            Vec3::new(0.0, 1.0, 0.0),
            Vec3::new(0.0, -1.0, 0.0),
            Vec3::new(0.0, 0.0, 1.0),
            Vec3::new(0.0, 0.0, -1.0),
        ]
    }

    // [DERIVED: hand-traced hull]
    #[test]
    fn octahedron_single_white_gives_equator_frontier() {
        // Direction 4 (+z) is white, the rest black at distance 2. The black
        // hull is a square pyramid; its two base facets (all four equatorial
        // vertices grouped) form the single frontier, facing +z.
        let center = Point::origin();
        let samples = make_samples(&center, &octahedron_dirs(), |i| {
            if i == 4 {
                (SampleKind::White, 5.0)
            } else {
                (SampleKind::Black, 2.0)
            }
        });
        let params = GenerationParams::default();
        let (poly, frontiers) = build_poly_and_frontiers(0, &center, &samples, &params).unwrap();
        assert_eq!(poly.mesh.facets.len(), 6, "square pyramid: 4 sides + 2 base");
        assert_eq!(frontiers.len(), 1);
        let f = &frontiers[0];
        assert_eq!(f.facets.len(), 2);
        // Member facets touch only the equatorial (grouped) vertices, i.e.
        // never the -z black sample, which is local vertex 4 of the black set.
        for &fi in &f.facets {
            for v in poly.mesh.facets[fi as usize] {
                let pos = poly.mesh.vertices[v as usize];
                assert!(pos.z.abs() < 1e-9, "facet vertex {pos:?} not on the equator");
            }
        }
        assert!(f.normal.z > 0.99, "frontier faces the white direction");
        assert!(f.initial_position.is_none());
        assert_eq!(f.parent_node, 0);
    }

    // [TRIVIAL: no whites]
    #[test]
    fn all_black_sphere_has_no_grouped_frontiers() {
        let dirs = sample_unit_directions(64).unwrap().dirs;
        let center = Point::origin();
        let samples = make_samples(&center, &dirs, |_| (SampleKind::Black, 2.0));
        let params = GenerationParams::default();
        let (_, frontiers) = build_poly_and_frontiers(0, &center, &samples, &params).unwrap();
        assert!(frontiers.is_empty(), "sealed room: no white neighbors, no distance spread");
    }

    // [PAPER: Alg. 2 frontier labeling]
    #[test]
    fn hemisphere_labeling_groups_boundary_blacks() {
        let dirs = sample_unit_directions(64).unwrap().dirs;
        let center = Point::origin();
        let samples = make_samples(&center, &dirs, |i| {
            if dirs[i].z > 0.0 {
                (SampleKind::White, 5.0)
            } else {
                (SampleKind::Black, 2.0)
            }
        });
        let params = GenerationParams::default();
        let (poly, frontiers) = build_poly_and_frontiers(0, &center, &samples, &params).unwrap();
        assert!(!frontiers.is_empty());
        // Facets pointing straight down sit far from any white sample and must
        // be excluded from every frontier.
        let down_facets: Vec<u32> = (0..poly.mesh.facets.len() as u32)
            .filter(|&f| poly.mesh.facet_normals[f as usize].z < -0.9)
            .collect();
        assert!(!down_facets.is_empty());
        for f in &frontiers {
            for df in &down_facets {
                assert!(!f.facets.contains(df), "bottom facet in a frontier");
            }
        }
        // The largest frontier faces the white hemisphere.
        assert!(frontiers[0].normal.z > 0.0);
        // Sorting contract: non-increasing facet counts.
        for pair in frontiers.windows(2) {
            assert!(pair[0].facets.len() >= pair[1].facets.len());
        }
    }

    /// Two flat strips meeting at a 90 degree ridge.
    fn corner_mesh() -> (TriangleMesh, Vec<u32>) {
        // Horizontal strip in z = 0 (normal +z), vertical strip in y = 1
        // (normal +y), sharing the ridge edge y = 1, z = 0.
        let vertices = vec![
            Point::new(0.0, 0.0, 0.0),
            Point::new(1.0, 0.0, 0.0),
            Point::new(0.0, 1.0, 0.0),
            Point::new(1.0, 1.0, 0.0),
            Point::new(0.0, 1.0, -1.0),
            Point::new(1.0, 1.0, -1.0),
        ];
        let facets = vec![[0u32, 1, 2], [1, 3, 2], [2, 3, 4], [3, 5, 4]];
        let facet_normals = vec![
            Vec3::new(0.0, 0.0, 1.0),
            Vec3::new(0.0, 0.0, 1.0),
            Vec3::new(0.0, -1.0, 0.0),
            Vec3::new(0.0, -1.0, 0.0),
        ];
        let mesh = TriangleMesh {
            vertices,
            facets,
            facet_normals,
        };
        (mesh, vec![0, 1, 2, 3])
    }

    // [TRIVIAL: agreeing normals]
    #[test]
    fn split_identity_when_normals_agree() {
        let (mesh, facets) = corner_mesh();
        let parts = split_facets_by_normal(&mesh, &facets[..2], 60.0);
        assert_eq!(parts, vec![vec![0, 1]]);
    }

    // [PAPER: Alg. 2 normal split]
    #[test]
    fn split_ninety_degree_corner_at_sixty_threshold() {
        let (mesh, facets) = corner_mesh();
        let parts = split_facets_by_normal(&mesh, &facets, 60.0);
        assert_eq!(parts.len(), 2);
        let mut all: Vec<u32> = parts.iter().flatten().copied().collect();
        all.sort_unstable();
        assert_eq!(all, facets, "parts partition the input");
        for part in &parts {
            // Internal normal spread stays within the threshold.
            for &a in part {
                for &b in part {
                    let cos = mesh.facet_normals[a as usize].dot(&mesh.facet_normals[b as usize]);
                    assert!(cos.clamp(-1.0, 1.0).acos().to_degrees() <= 60.0 + 1e-9);
                }
            }
        }
    }

    // [DERIVED: point-on-facet check]
    #[test]
    fn frontier_center_lies_on_a_member_facet() {
        let (mesh, facets) = corner_mesh();
        for part in split_facets_by_normal(&mesh, &facets, 60.0) {
            let f = make_frontier(0, &mesh, part);
            let on_some_facet = f.facets.iter().any(|&fi| {
                let [a, b, c] = mesh.facet_points(fi as usize);
                crate::geometry::point_triangle_distance(&f.center, &a, &b, &c) < 1e-6
            });
            assert!(on_some_facet, "center {:?} off every member facet", f.center);
        }
    }

    // [TRIVIAL: uniform distances]
    #[test]
    fn uniform_sphere_has_no_blind_facets() {
        let dirs = sample_unit_directions(64).unwrap().dirs;
        let center = Point::origin();
        let samples = make_samples(&center, &dirs, |_| (SampleKind::Black, 1.0));
        let params = GenerationParams::default();
        let (poly, _) = build_poly_and_frontiers(0, &center, &samples, &params).unwrap();
        assert!(blind_facet_clusters(&poly.mesh, &center, 2.0).is_empty());
    }

    // [PAPER: blind frontier clause]
    #[test]
    fn spike_sample_forms_blind_frontier() {
        let dirs = sample_unit_directions(64).unwrap().dirs;
        let center = Point::origin();
        // Everything at 1 m except one spike at 5 m.
        let samples = make_samples(&center, &dirs, |i| {
            (SampleKind::Black, if i == 10 { 5.0 } else { 1.0 })
        });
        let params = GenerationParams::default();
        let (poly, frontiers) = build_poly_and_frontiers(0, &center, &samples, &params).unwrap();
        let clusters = blind_facet_clusters(&poly.mesh, &center, 2.0);
        assert!(!clusters.is_empty(), "spike facets must form a blind cluster");
        // All blind facets touch the spike vertex (the only source of spread).
        for cluster in &clusters {
            for &fi in cluster {
                let dists = poly.mesh.facets[fi as usize]
                    .map(|v| (poly.mesh.vertices[v as usize] - center).norm());
                assert!(dists.iter().any(|&d| d > 4.0));
            }
        }
        // And they surface as frontiers of the build.
        assert!(!frontiers.is_empty());
    }

    // [TRIVIAL: degenerate input]
    #[test]
    fn too_few_blacks_is_an_error() {
        let dirs = octahedron_dirs();
        let center = Point::origin();
        let samples = make_samples(&center, &dirs, |i| {
            if i < 3 {
                (SampleKind::Black, 2.0)
            } else {
                (SampleKind::White, 5.0)
            }
        });
        let params = GenerationParams::default();
        assert!(matches!(
            build_poly_and_frontiers(0, &center, &samples, &params),
            Err(GeometryError::TooFewPoints { .. })
        ));
    }
}
