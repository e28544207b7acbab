//! Geometric primitives: uniform direction sampling, convex hulls,
//! unit-sphere projection and ray-mesh intersection.

use thiserror::Error;

use crate::{Point, Vec3};

#[derive(Debug, Error)]
pub enum GeometryError {
    #[error("need at least {min} points, got {got}")]
    TooFewPoints { min: usize, got: usize },
    #[error("degenerate point set (coplanar or collinear after jitter)")]
    Degenerate,
    #[error("cannot project: point coincides with center")]
    ZeroLengthProjection,
}

/// Triangulated mesh with outward unit facet normals.
///
/// `vertices` keeps the full input point list of the hull it came from, so
/// facet indices stay meaningful to the caller; vertices strictly inside the
/// hull are simply never referenced.
#[derive(Debug, Clone)]
pub struct TriangleMesh {
    pub vertices: Vec<Point>,
    pub facets: Vec<[u32; 3]>,
    pub facet_normals: Vec<Vec3>,
}

impl TriangleMesh {
    pub fn facet_points(&self, f: usize) -> [Point; 3] {
        let [a, b, c] = self.facets[f];
        [
            self.vertices[a as usize],
            self.vertices[b as usize],
            self.vertices[c as usize],
        ]
    }

    pub fn facet_center(&self, f: usize) -> Point {
        let [a, b, c] = self.facet_points(f);
        Point::new(
            (a.x + b.x + c.x) / 3.0,
            (a.y + b.y + c.y) / 3.0,
            (a.z + b.z + c.z) / 3.0,
        )
    }

    /// Indices of vertices referenced by at least one facet.
    pub fn used_vertices(&self) -> Vec<u32> {
        let mut used: Vec<u32> = self.facets.iter().flatten().copied().collect();
        used.sort_unstable();
        used.dedup();
        used
    }

    /// Undirected edge list (sorted pairs, deduplicated).
    pub fn edges(&self) -> Vec<(u32, u32)> {
        let mut edges = Vec::with_capacity(self.facets.len() * 3);
        for f in &self.facets {
            for (i, j) in [(0, 1), (1, 2), (2, 0)] {
                let (a, b) = (f[i], f[j]);
                edges.push((a.min(b), a.max(b)));
            }
        }
        edges.sort_unstable();
        edges.dedup();
        edges
    }

    /// Facet adjacency (shared edge), indexed by facet.
    pub fn facet_adjacency(&self) -> Vec<Vec<u32>> {
        use std::collections::HashMap;
        let mut by_edge: HashMap<(u32, u32), Vec<u32>> = HashMap::new();
        for (fi, f) in self.facets.iter().enumerate() {
            for (i, j) in [(0, 1), (1, 2), (2, 0)] {
                let (a, b) = (f[i], f[j]);
                by_edge.entry((a.min(b), a.max(b))).or_default().push(fi as u32);
            }
        }
        let mut adj = vec![Vec::new(); self.facets.len()];
        for facets in by_edge.values() {
            for &a in facets {
                for &b in facets {
                    if a != b {
                        adj[a as usize].push(b);
                    }
                }
            }
        }
        for list in &mut adj {
            list.sort_unstable();
            list.dedup();
        }
        adj
    }

    /// Signed volume via the divergence theorem; positive for outward winding.
    pub fn signed_volume(&self) -> f64 {
        self.facets
            .iter()
            .map(|&[a, b, c]| {
                let (a, b, c) = (
                    self.vertices[a as usize].coords,
                    self.vertices[b as usize].coords,
                    self.vertices[c as usize].coords,
                );
                a.cross(&b).dot(&c) / 6.0
            })
            .sum()
    }

    /// Writes `v`/`f` records; OBJ indices are one-based and compacted to
    /// used vertices.
    pub fn write_obj(&self, w: &mut impl std::io::Write) -> std::io::Result<()> {
        let used = self.used_vertices();
        let mut remap = vec![0u32; self.vertices.len()];
        for (new, &old) in used.iter().enumerate() {
            remap[old as usize] = new as u32 + 1;
        }
        for &vi in &used {
            let p = self.vertices[vi as usize];
            writeln!(w, "v {} {} {}", p.x, p.y, p.z)?;
        }
        for f in &self.facets {
            writeln!(
                w,
                "f {} {} {}",
                remap[f[0] as usize], remap[f[1] as usize], remap[f[2] as usize]
            )?;
        }
        Ok(())
    }
}

/// A node's boundary mesh: unit-sphere hull facets mapped back onto the
/// sampled black-vertex positions. Not necessarily convex.
#[derive(Debug, Clone)]
pub struct Polyhedron {
    pub mesh: TriangleMesh,
    pub owner_node: usize,
    pub aabb: crate::map::Aabb,
}

/// Deterministic set of unit direction vectors.
#[derive(Debug, Clone)]
pub struct DirectionSet {
    pub dirs: Vec<Vec3>,
}

impl DirectionSet {
    pub fn len(&self) -> usize {
        self.dirs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.dirs.is_empty()
    }
}

/// Fibonacci-sphere sampling: deterministic, near-uniform coverage.
pub fn sample_unit_directions(count: usize) -> Result<DirectionSet, GeometryError> {
    if count < 4 {
        return Err(GeometryError::TooFewPoints { min: 4, got: count });
    }
    let golden_angle = std::f64::consts::PI * (3.0 - 5.0f64.sqrt());
    let dirs = (0..count)
        .map(|i| {
            let z = 1.0 - 2.0 * (i as f64 + 0.5) / count as f64;
            let r = (1.0 - z * z).sqrt();
            let phi = golden_angle * i as f64;
            Vec3::new(r * phi.cos(), r * phi.sin(), z)
        })
        .collect();
    Ok(DirectionSet { dirs })
}

/// `c + (p - c) / ||p - c||`: radial projection of `p` onto the unit sphere
/// centered at `c`.
pub fn project_to_unit_sphere(c: &Point, p: &Point) -> Result<Point, GeometryError> {
    let d = p - c;
    let n = d.norm();
    if n < 1e-15 {
        return Err(GeometryError::ZeroLengthProjection);
    }
    Ok(c + d / n)
}

const HULL_EPS: f64 = 1e-10;

/// Watertight triangulated convex hull with outward facet normals.
///
/// Incremental construction: points are inserted in index order, visible
/// facets are removed and the horizon is re-fanned to the new point.
/// Near-degenerate inputs get one retry with a deterministic 1e-8 jitter
/// keyed by point index.
pub fn convex_hull_mesh(points: &[Point]) -> Result<TriangleMesh, GeometryError> {
    if points.len() < 4 {
        return Err(GeometryError::TooFewPoints {
            min: 4,
            got: points.len(),
        });
    }
    match hull_attempt(points) {
        Ok(mesh) => Ok(mesh),
        Err(GeometryError::Degenerate) => {
            let jittered: Vec<Point> = points
                .iter()
                .enumerate()
                .map(|(i, p)| {
                    let h = splitmix64(i as u64);
                    let j = |k: u64| ((h >> (k * 16)) & 0xffff) as f64 / 65535.0 - 0.5;
                    Point::new(p.x + 1e-8 * j(0), p.y + 1e-8 * j(1), p.z + 1e-8 * j(2))
                })
                .collect();
            hull_attempt(&jittered).map(|mesh| TriangleMesh {
                // report the caller's original coordinates
                vertices: points.to_vec(),
                facet_normals: mesh
                    .facets
                    .iter()
                    .map(|&[a, b, c]| {
                        facet_normal(
                            &points[a as usize],
                            &points[b as usize],
                            &points[c as usize],
                        )
                    })
                    .collect(),
                facets: mesh.facets,
            })
        }
        Err(e) => Err(e),
    }
}

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9e3779b97f4a7c15);
    x = (x ^ (x >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94d049bb133111eb);
    x ^ (x >> 31)
}

fn facet_normal(a: &Point, b: &Point, c: &Point) -> Vec3 {
    let n = (b - a).cross(&(c - a));
    let len = n.norm();
    if len < 1e-18 {
        Vec3::zeros()
    } else {
        n / len
    }
}

struct HullFace {
    idx: [u32; 3],
    normal: Vec3,
    offset: f64, // plane: normal . x = offset
    alive: bool,
}

impl HullFace {
    fn new(points: &[Point], a: u32, b: u32, c: u32) -> HullFace {
        let n = facet_normal(&points[a as usize], &points[b as usize], &points[c as usize]);
        HullFace {
            idx: [a, b, c],
            offset: n.dot(&points[a as usize].coords),
            normal: n,
            alive: true,
        }
    }

    fn sees(&self, p: &Point, eps: f64) -> bool {
        self.normal.dot(&p.coords) - self.offset > eps
    }
}

fn hull_attempt(points: &[Point]) -> Result<TriangleMesh, GeometryError> {
    let scale = points
        .iter()
        .map(|p| p.coords.amax())
        .fold(1.0f64, f64::max);
    let eps = HULL_EPS * scale;

    let (t0, t1, t2, t3) = initial_tetrahedron(points, eps)?;
    let centroid = Point::from(
        (points[t0 as usize].coords
            + points[t1 as usize].coords
            + points[t2 as usize].coords
            + points[t3 as usize].coords)
            / 4.0,
    );
    let orient = |a: u32, b: u32, c: u32| -> HullFace {
        let f = HullFace::new(points, a, b, c);
        if f.sees(&centroid, 0.0) {
            HullFace::new(points, a, c, b)
        } else {
            f
        }
    };
    let mut faces = vec![
        orient(t0, t1, t2),
        orient(t0, t1, t3),
        orient(t0, t2, t3),
        orient(t1, t2, t3),
    ];

    let mut order: Vec<u32> = (0..points.len() as u32)
        .filter(|i| ![t0, t1, t2, t3].contains(i))
        .collect();
    order.sort_unstable();

    for pi in order {
        let p = &points[pi as usize];
        let visible: Vec<usize> = faces
            .iter()
            .enumerate()
            .filter(|(_, f)| f.alive && f.sees(p, eps))
            .map(|(i, _)| i)
            .collect();
        if visible.is_empty() {
            continue; // interior point
        }
        // Horizon: directed edges of visible faces whose reverse edge is not
        // on a visible face.
        use std::collections::HashSet;
        let mut vis_edges: HashSet<(u32, u32)> = HashSet::new();
        for &fi in &visible {
            let idx = faces[fi].idx;
            for (i, j) in [(0, 1), (1, 2), (2, 0)] {
                vis_edges.insert((idx[i], idx[j]));
            }
        }
        let mut horizon: Vec<(u32, u32)> = Vec::new();
        for &fi in &visible {
            let idx = faces[fi].idx;
            for (i, j) in [(0, 1), (1, 2), (2, 0)] {
                let e = (idx[i], idx[j]);
                if !vis_edges.contains(&(e.1, e.0)) {
                    horizon.push(e);
                }
            }
        }
        for &fi in &visible {
            faces[fi].alive = false;
        }
        for (a, b) in horizon {
            let f = HullFace::new(points, a, b, pi);
            // Winding (a, b, new) preserves the dead face's outward
            // orientation; guard against numerically flipped slivers.
            if f.sees(&centroid, 0.0) {
                faces.push(HullFace::new(points, b, a, pi));
            } else {
                faces.push(f);
            }
        }
    }

    let mut facets = Vec::new();
    let mut facet_normals = Vec::new();
    for f in faces.into_iter().filter(|f| f.alive) {
        facets.push(f.idx);
        facet_normals.push(f.normal);
    }
    let mesh = TriangleMesh {
        vertices: points.to_vec(),
        facets,
        facet_normals,
    };
    // Watertightness: every edge must be shared by exactly two facets.
    {
        use std::collections::HashMap;
        let mut count: HashMap<(u32, u32), u32> = HashMap::new();
        for f in &mesh.facets {
            for (i, j) in [(0, 1), (1, 2), (2, 0)] {
                let (a, b) = (f[i], f[j]);
                *count.entry((a.min(b), a.max(b))).or_insert(0) += 1;
            }
        }
        if count.values().any(|&c| c != 2) {
            return Err(GeometryError::Degenerate);
        }
    }
    Ok(mesh)
}

fn initial_tetrahedron(points: &[Point], eps: f64) -> Result<(u32, u32, u32, u32), GeometryError> {
    // Extremes along x give the first edge.
    let mut i0 = 0u32;
    let mut i1 = 0u32;
    for (i, p) in points.iter().enumerate() {
        if p.x < points[i0 as usize].x {
            i0 = i as u32;
        }
        if p.x > points[i1 as usize].x {
            i1 = i as u32;
        }
    }
    if i0 == i1 {
        // flat in x: fall back to pairwise max distance on first axis-sorted ids
        i1 = if i0 == 0 { 1 } else { 0 };
    }
    let a = points[i0 as usize];
    let b = points[i1 as usize];
    let ab = b - a;
    if ab.norm() < eps {
        return Err(GeometryError::Degenerate);
    }
    // Farthest point from line ab.
    let mut i2 = None;
    let mut best = eps;
    for (i, p) in points.iter().enumerate() {
        let d = ab.cross(&(p - a)).norm() / ab.norm();
        if d > best {
            best = d;
            i2 = Some(i as u32);
        }
    }
    let i2 = i2.ok_or(GeometryError::Degenerate)?;
    let n = ab.cross(&(points[i2 as usize] - a));
    // Farthest point from plane.
    let mut i3 = None;
    let mut best = eps * n.norm().max(1e-30);
    for (i, p) in points.iter().enumerate() {
        let d = n.dot(&(p - a)).abs();
        if d > best {
            best = d;
            i3 = Some(i as u32);
        }
    }
    let i3 = i3.ok_or(GeometryError::Degenerate)?;
    Ok((i0, i1, i2, i3))
}

const RAY_EPS: f64 = 1e-9;

/// Moller-Trumbore ray/triangle test. Returns `t` in `(eps, max_dist]`.
pub fn ray_triangle_intersect(
    origin: &Point,
    dir: &Vec3,
    max_dist: f64,
    a: &Point,
    b: &Point,
    c: &Point,
) -> Option<f64> {
    let e1 = b - a;
    let e2 = c - a;
    let pvec = dir.cross(&e2);
    let det = e1.dot(&pvec);
    if det.abs() < 1e-15 {
        return None;
    }
    let inv_det = 1.0 / det;
    let s = origin - a;
    let u = s.dot(&pvec) * inv_det;
    if !(-RAY_EPS..=1.0 + RAY_EPS).contains(&u) {
        return None;
    }
    let qvec = s.cross(&e1);
    let v = dir.dot(&qvec) * inv_det;
    if v < -RAY_EPS || u + v > 1.0 + RAY_EPS {
        return None;
    }
    let t = e2.dot(&qvec) * inv_det;
    if t > RAY_EPS && t <= max_dist {
        Some(t)
    } else {
        None
    }
}

/// Nearest facet hit; edge hits count once via minimum-`t` (then lowest
/// facet index) selection.
pub fn ray_mesh_intersect(
    origin: &Point,
    dir: &Vec3,
    max_dist: f64,
    mesh: &TriangleMesh,
) -> Option<(f64, usize)> {
    let mut best: Option<(f64, usize)> = None;
    for f in 0..mesh.facets.len() {
        let [a, b, c] = mesh.facet_points(f);
        if let Some(t) = ray_triangle_intersect(origin, dir, max_dist, &a, &b, &c) {
            if best.map_or(true, |(bt, _)| t < bt) {
                best = Some((t, f));
            }
        }
    }
    best
}

/// Distance from `q` to the closest point of triangle `abc`.
pub fn point_triangle_distance(q: &Point, a: &Point, b: &Point, c: &Point) -> f64 {
    // Ericson, "Real-Time Collision Detection", closest-point-on-triangle.
    let ab = b - a;
    let ac = c - a;
    let ap = q - a;
    let d1 = ab.dot(&ap);
    let d2 = ac.dot(&ap);
    if d1 <= 0.0 && d2 <= 0.0 {
        return ap.norm();
    }
    let bp = q - b;
    let d3 = ab.dot(&bp);
    let d4 = ac.dot(&bp);
    if d3 >= 0.0 && d4 <= d3 {
        return bp.norm();
    }
    let vc = d1 * d4 - d3 * d2;
    if vc <= 0.0 && d1 >= 0.0 && d3 <= 0.0 {
        let v = d1 / (d1 - d3);
        return (ap - ab * v).norm();
    }
    let cp = q - c;
    let d5 = ab.dot(&cp);
    let d6 = ac.dot(&cp);
    if d6 >= 0.0 && d5 <= d6 {
        return cp.norm();
    }
    let vb = d5 * d2 - d1 * d6;
    if vb <= 0.0 && d2 >= 0.0 && d6 <= 0.0 {
        let w = d2 / (d2 - d6);
        return (ap - ac * w).norm();
    }
    let va = d3 * d6 - d5 * d4;
    if va <= 0.0 && (d4 - d3) >= 0.0 && (d5 - d6) >= 0.0 {
        let w = (d4 - d3) / ((d4 - d3) + (d5 - d6));
        return (bp - (c - b) * w).norm();
    }
    let denom = 1.0 / (va + vb + vc);
    let v = vb * denom;
    let w = vc * denom;
    (ap - ab * v - ac * w).norm()
}
