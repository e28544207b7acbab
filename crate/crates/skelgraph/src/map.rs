//! Environment maps and the collision-checking contract.
//!
//! The skeleton generator only talks to maps through [`CollisionOracle`],
//! which makes it agnostic to the underlying representation. Two concrete
//! maps are provided: a point cloud with a uniform-grid radius index and a
//! dense occupancy voxel grid.

use std::collections::HashMap;
use std::fs;
use std::path::Path as FsPath;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::{Point, Vec3};

#[derive(Debug, Error)]
pub enum MapError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("malformed record at line {line}: {reason}")]
    Parse { line: usize, reason: String },
    #[error("empty cloud")]
    EmptyCloud,
    #[error("unsupported map format: {0}")]
    UnsupportedFormat(String),
    #[error("raycast from occupied space")]
    RaycastFromOccupied,
    #[error("invalid grid map: {0}")]
    InvalidGrid(String),
}

/// Axis-aligned bounding box in meters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Aabb {
    pub min: [f64; 3],
    pub max: [f64; 3],
}

impl Aabb {
    pub fn contains(&self, p: &Point) -> bool {
        (0..3).all(|i| p[i] >= self.min[i] && p[i] <= self.max[i])
    }

    pub fn center(&self) -> Point {
        Point::new(
            0.5 * (self.min[0] + self.max[0]),
            0.5 * (self.min[1] + self.max[1]),
            0.5 * (self.min[2] + self.max[2]),
        )
    }

    pub fn from_points<'a>(points: impl IntoIterator<Item = &'a Point>) -> Option<Aabb> {
        let mut iter = points.into_iter();
        let first = iter.next()?;
        let mut min = [first.x, first.y, first.z];
        let mut max = min;
        for p in iter {
            for i in 0..3 {
                min[i] = min[i].min(p[i]);
                max[i] = max[i].max(p[i]);
            }
        }
        Some(Aabb { min, max })
    }

    /// Grow the box by `margin` on every side.
    pub fn inflated(&self, margin: f64) -> Aabb {
        Aabb {
            min: [
                self.min[0] - margin,
                self.min[1] - margin,
                self.min[2] - margin,
            ],
            max: [
                self.max[0] + margin,
                self.max[1] + margin,
                self.max[2] + margin,
            ],
        }
    }

    /// Slab test: does the ray `origin + t * dir`, t in (0, max_dist], touch the box?
    pub fn intersects_ray(&self, origin: &Point, dir: &Vec3, max_dist: f64) -> bool {
        let mut t_enter = 0.0f64;
        let mut t_exit = max_dist;
        for i in 0..3 {
            if dir[i].abs() < 1e-15 {
                if origin[i] < self.min[i] || origin[i] > self.max[i] {
                    return false;
                }
                continue;
            }
            let inv = 1.0 / dir[i];
            let mut t0 = (self.min[i] - origin[i]) * inv;
            let mut t1 = (self.max[i] - origin[i]) * inv;
            if t0 > t1 {
                std::mem::swap(&mut t0, &mut t1);
            }
            t_enter = t_enter.max(t0);
            t_exit = t_exit.min(t1);
            if t_enter > t_exit {
                return false;
            }
        }
        true
    }
}

/// Uniform query contract over any map representation.
///
/// `is_free` is the single source of truth for freeness: a query point is
/// free iff it lies inside the map bounds and no obstacle sample is within
/// `clearance` of it. Out-of-bounds space counts as occupied so rays cannot
/// escape a bounded map.
pub trait CollisionOracle: Sync {
    /// Robot radius used for all freeness tests, in meters.
    fn clearance(&self) -> f64;

    fn bounds(&self) -> Aabb;

    fn is_free(&self, q: &Point) -> bool;

    /// Distance along the ray at which freeness checks are sampled.
    fn march_step(&self) -> f64;

    /// Smallest `t` in `(0, max_dist]` with `is_free(origin + t * dir)` false,
    /// discretized by the map's march step. `None` when the whole segment is free.
    fn raycast_occupied(
        &self,
        origin: &Point,
        dir: &Vec3,
        max_dist: f64,
    ) -> Result<Option<f64>, MapError>;

    /// Sampled straight-segment check at the march step, endpoints included.
    /// Endpoints are ordered canonically and the spacing divides the segment
    /// evenly, so the answer does not depend on argument order.
    fn segment_free(&self, a: &Point, b: &Point) -> bool {
        let (a, b) = if (a.x, a.y, a.z) <= (b.x, b.y, b.z) {
            (a, b)
        } else {
            (b, a)
        };
        let d = b - a;
        let len = d.norm();
        if len < 1e-12 {
            return self.is_free(a);
        }
        let n = (len / self.march_step()).ceil().max(1.0) as usize;
        (0..=n).all(|i| self.is_free(&(a + d * (i as f64 / n as f64))))
    }
}

/// Uniform-grid bucket index over a fixed point set.
///
/// Cells are cubes of `cell` meters; a radius query visits every cell the
/// query ball overlaps, so results are exact for any radius.
#[derive(Debug, Clone)]
pub struct PointIndex {
    cell: f64,
    buckets: HashMap<(i64, i64, i64), Vec<u32>>,
}

impl PointIndex {
    pub fn build(points: &[Point], cell: f64) -> PointIndex {
        assert!(cell > 0.0);
        let mut buckets: HashMap<(i64, i64, i64), Vec<u32>> = HashMap::new();
        for (i, p) in points.iter().enumerate() {
            buckets
                .entry(Self::key(p, cell))
                .or_default()
                .push(i as u32);
        }
        PointIndex { cell, buckets }
    }

    fn key(p: &Point, cell: f64) -> (i64, i64, i64) {
        (
            (p.x / cell).floor() as i64,
            (p.y / cell).floor() as i64,
            (p.z / cell).floor() as i64,
        )
    }

    /// Indices of all points within `radius` of `q`, in ascending index order.
    pub fn radius_query(&self, points: &[Point], q: &Point, radius: f64) -> Vec<u32> {
        let mut out = Vec::new();
        self.for_each_in_radius(points, q, radius, |i| {
            out.push(i);
            false
        });
        out.sort_unstable();
        out
    }

    /// True iff some point lies within `radius` of `q`.
    pub fn any_within(&self, points: &[Point], q: &Point, radius: f64) -> bool {
        self.for_each_in_radius(points, q, radius, |_| true)
    }

    /// Visits points within `radius`; the callback returns true to stop early.
    /// Returns whether the visit was stopped.
    fn for_each_in_radius(
        &self,
        points: &[Point],
        q: &Point,
        radius: f64,
        mut f: impl FnMut(u32) -> bool,
    ) -> bool {
        let r2 = radius * radius;
        let lo = Self::key(&Point::new(q.x - radius, q.y - radius, q.z - radius), self.cell);
        let hi = Self::key(&Point::new(q.x + radius, q.y + radius, q.z + radius), self.cell);
        for kx in lo.0..=hi.0 {
            for ky in lo.1..=hi.1 {
                for kz in lo.2..=hi.2 {
                    if let Some(bucket) = self.buckets.get(&(kx, ky, kz)) {
                        for &i in bucket {
                            if (points[i as usize] - q).norm_squared() <= r2 && f(i) {
                                return true;
                            }
                        }
                    }
                }
            }
        }
        false
    }
}

/// Point cloud map with nearest-neighbor collision checking.
#[derive(Debug, Clone)]
pub struct PointCloudMap {
    points: Vec<Point>,
    bounds: Aabb,
    index: PointIndex,
    clearance: f64,
}

impl PointCloudMap {
    pub fn new(points: Vec<Point>, clearance: f64) -> Result<PointCloudMap, MapError> {
        if points.is_empty() {
            return Err(MapError::EmptyCloud);
        }
        assert!(clearance > 0.0, "clearance must be positive");
        let bounds = Aabb::from_points(points.iter()).expect("nonempty");
        let cell = clearance.max(0.05);
        let index = PointIndex::build(&points, cell);
        Ok(PointCloudMap {
            points,
            bounds,
            index,
            clearance,
        })
    }

    pub fn points(&self) -> &[Point] {
        &self.points
    }

    pub fn index(&self) -> &PointIndex {
        &self.index
    }

    /// Exact distance from `q` to the nearest cloud point, by linear scan.
    pub fn nearest_distance_linear(&self, q: &Point) -> f64 {
        self.points
            .iter()
            .map(|p| (p - q).norm())
            .fold(f64::INFINITY, f64::min)
    }
}

impl CollisionOracle for PointCloudMap {
    fn clearance(&self) -> f64 {
        self.clearance
    }

    fn bounds(&self) -> Aabb {
        self.bounds
    }

    fn is_free(&self, q: &Point) -> bool {
        self.bounds.contains(q) && !self.index.any_within(&self.points, q, self.clearance)
    }

    fn march_step(&self) -> f64 {
        // Half the clearance: a blocked sphere cannot be stepped over.
        self.clearance * 0.5
    }

    fn raycast_occupied(
        &self,
        origin: &Point,
        dir: &Vec3,
        max_dist: f64,
    ) -> Result<Option<f64>, MapError> {
        debug_assert!((dir.norm() - 1.0).abs() < 1e-9);
        debug_assert!(max_dist > 0.0);
        if !self.is_free(origin) {
            return Err(MapError::RaycastFromOccupied);
        }
        let step = self.march_step();
        let mut t = step;
        while t <= max_dist {
            if !self.is_free(&(origin + dir * t)) {
                return Ok(Some(t));
            }
            t += step;
        }
        if !self.is_free(&(origin + dir * max_dist)) {
            return Ok(Some(max_dist));
        }
        Ok(None)
    }
}

/// Dense occupancy voxel grid.
#[derive(Debug, Clone)]
pub struct OccupancyGridMap {
    origin: Point,
    voxel_size: f64,
    dims: [usize; 3],
    occupancy: Vec<bool>,
    clearance: f64,
}

impl OccupancyGridMap {
    pub fn new(
        origin: Point,
        voxel_size: f64,
        dims: [usize; 3],
        occupancy: Vec<bool>,
        clearance: f64,
    ) -> Result<OccupancyGridMap, MapError> {
        if voxel_size <= 0.0 {
            return Err(MapError::InvalidGrid("voxel_size must be > 0".into()));
        }
        if dims.iter().any(|&d| d == 0) {
            return Err(MapError::InvalidGrid("dimensions must be >= 1".into()));
        }
        if occupancy.len() != dims[0] * dims[1] * dims[2] {
            return Err(MapError::InvalidGrid(format!(
                "occupancy length {} does not match dims {:?}",
                occupancy.len(),
                dims
            )));
        }
        Ok(OccupancyGridMap {
            origin,
            voxel_size,
            dims,
            occupancy,
            clearance,
        })
    }

    pub fn voxel_size(&self) -> f64 {
        self.voxel_size
    }

    pub fn dims(&self) -> [usize; 3] {
        self.dims
    }

    pub fn origin(&self) -> Point {
        self.origin
    }

    fn flat(&self, v: [usize; 3]) -> usize {
        (v[2] * self.dims[1] + v[1]) * self.dims[0] + v[0]
    }

    pub fn voxel_of(&self, q: &Point) -> Option<[usize; 3]> {
        let mut v = [0usize; 3];
        for i in 0..3 {
            let c = ((q[i] - self.origin[i]) / self.voxel_size).floor();
            if c < 0.0 || c as usize >= self.dims[i] {
                return None;
            }
            v[i] = c as usize;
        }
        Some(v)
    }

    pub fn voxel_center(&self, v: [usize; 3]) -> Point {
        Point::new(
            self.origin.x + (v[0] as f64 + 0.5) * self.voxel_size,
            self.origin.y + (v[1] as f64 + 0.5) * self.voxel_size,
            self.origin.z + (v[2] as f64 + 0.5) * self.voxel_size,
        )
    }

    pub fn is_occupied_voxel(&self, v: [usize; 3]) -> bool {
        self.occupancy[self.flat(v)]
    }

    /// True iff some occupied voxel center lies within `radius` of `q`.
    fn occupied_center_within(&self, q: &Point, radius: f64) -> bool {
        let r = radius + self.voxel_size; // conservative index window
        let lo = [
            ((q.x - r - self.origin.x) / self.voxel_size).floor().max(0.0) as usize,
            ((q.y - r - self.origin.y) / self.voxel_size).floor().max(0.0) as usize,
            ((q.z - r - self.origin.z) / self.voxel_size).floor().max(0.0) as usize,
        ];
        let hi = [
            (((q.x + r - self.origin.x) / self.voxel_size).ceil().max(0.0) as usize)
                .min(self.dims[0]),
            (((q.y + r - self.origin.y) / self.voxel_size).ceil().max(0.0) as usize)
                .min(self.dims[1]),
            (((q.z + r - self.origin.z) / self.voxel_size).ceil().max(0.0) as usize)
                .min(self.dims[2]),
        ];
        let r2 = radius * radius;
        for x in lo[0]..hi[0] {
            for y in lo[1]..hi[1] {
                for z in lo[2]..hi[2] {
                    let v = [x, y, z];
                    if self.is_occupied_voxel(v)
                        && (self.voxel_center(v) - q).norm_squared() <= r2
                    {
                        return true;
                    }
                }
            }
        }
        false
    }
}

impl CollisionOracle for OccupancyGridMap {
    fn clearance(&self) -> f64 {
        self.clearance
    }

    fn bounds(&self) -> Aabb {
        Aabb {
            min: [self.origin.x, self.origin.y, self.origin.z],
            max: [
                self.origin.x + self.dims[0] as f64 * self.voxel_size,
                self.origin.y + self.dims[1] as f64 * self.voxel_size,
                self.origin.z + self.dims[2] as f64 * self.voxel_size,
            ],
        }
    }

    fn is_free(&self, q: &Point) -> bool {
        self.bounds().contains(q) && !self.occupied_center_within(q, self.clearance)
    }

    fn march_step(&self) -> f64 {
        self.voxel_size * 0.5
    }

    fn raycast_occupied(
        &self,
        origin: &Point,
        dir: &Vec3,
        max_dist: f64,
    ) -> Result<Option<f64>, MapError> {
        debug_assert!((dir.norm() - 1.0).abs() < 1e-9);
        if !self.is_free(origin) {
            return Err(MapError::RaycastFromOccupied);
        }
        // DDA voxel traversal: enumerate the voxel boundary crossings exactly,
        // testing freeness at the midpoint of each in-voxel segment.
        let mut boundary_ts = vec![0.0f64];
        for axis in 0..3 {
            if dir[axis].abs() < 1e-15 {
                continue;
            }
            let inv = 1.0 / dir[axis];
            let start = (origin[axis] - self.origin[axis]) / self.voxel_size;
            let mut k = if dir[axis] > 0.0 {
                start.floor() + 1.0
            } else {
                start.ceil() - 1.0
            };
            loop {
                let t = (self.origin[axis] + k * self.voxel_size - origin[axis]) * inv;
                if t > max_dist {
                    break;
                }
                if t > 0.0 {
                    boundary_ts.push(t);
                }
                k += dir[axis].signum();
            }
        }
        boundary_ts.push(max_dist);
        boundary_ts.sort_by(|a, b| a.partial_cmp(b).unwrap());
        for pair in boundary_ts.windows(2) {
            let (t0, t1) = (pair[0], pair[1]);
            if t1 - t0 < 1e-12 {
                continue;
            }
            let mid = 0.5 * (t0 + t1);
            if !self.is_free(&(origin + dir * mid)) {
                let hit = if t0 > 0.0 { t0 } else { mid };
                return Ok(Some(hit.min(max_dist)));
            }
        }
        if !self.is_free(&(origin + dir * max_dist)) {
            return Ok(Some(max_dist));
        }
        Ok(None)
    }
}

/// Loads an ASCII PLY or XYZ point cloud depending on file extension
/// (and on the `ply` magic line for extensionless files).
pub fn load_point_cloud(path: &FsPath, clearance: f64) -> Result<PointCloudMap, MapError> {
    let text = fs::read_to_string(path).map_err(|e| MapError::Io {
        path: path.display().to_string(),
        source: e,
    })?;
    let points = if text.trim_start().starts_with("ply") {
        parse_ply(&text)?
    } else {
        match path.extension().and_then(|e| e.to_str()) {
            Some("ply") => parse_ply(&text)?,
            Some("xyz") | Some("txt") | None => parse_xyz(&text)?,
            Some(other) => return Err(MapError::UnsupportedFormat(other.to_string())),
        }
    };
    PointCloudMap::new(points, clearance)
}

fn parse_xyz(text: &str) -> Result<Vec<Point>, MapError> {
    let mut points = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let mut it = line.split_whitespace();
        let mut coord = [0.0f64; 3];
        for c in coord.iter_mut() {
            let tok = it.next().ok_or_else(|| MapError::Parse {
                line: lineno + 1,
                reason: "expected three coordinates".into(),
            })?;
            *c = tok.parse().map_err(|_| MapError::Parse {
                line: lineno + 1,
                reason: format!("not a number: {tok}"),
            })?;
        }
        points.push(Point::new(coord[0], coord[1], coord[2]));
    }
    Ok(points)
}

fn parse_ply(text: &str) -> Result<Vec<Point>, MapError> {
    let mut lines = text.lines().enumerate();
    let mut vertex_count: Option<usize> = None;
    let mut in_vertex_element = false;
    let mut prop_names: Vec<String> = Vec::new();
    let mut header_end = 0usize;
    match lines.next() {
        Some((_, l)) if l.trim() == "ply" => {}
        _ => {
            return Err(MapError::Parse {
                line: 1,
                reason: "missing ply magic".into(),
            })
        }
    }
    for (lineno, line) in &mut lines {
        let line = line.trim();
        if line.starts_with("format") {
            if !line.contains("ascii") {
                return Err(MapError::UnsupportedFormat("binary PLY".into()));
            }
        } else if line.starts_with("element") {
            let mut it = line.split_whitespace().skip(1);
            let name = it.next().unwrap_or("");
            in_vertex_element = name == "vertex";
            if in_vertex_element {
                let count_tok = it.next().ok_or(MapError::Parse {
                    line: lineno + 1,
                    reason: "element vertex missing count".into(),
                })?;
                vertex_count = Some(count_tok.parse().map_err(|_| MapError::Parse {
                    line: lineno + 1,
                    reason: "bad vertex count".into(),
                })?);
            }
        } else if line.starts_with("property") && in_vertex_element {
            if let Some(name) = line.split_whitespace().last() {
                prop_names.push(name.to_string());
            }
        } else if line == "end_header" {
            header_end = lineno + 1;
            break;
        }
    }
    let count = vertex_count.ok_or(MapError::Parse {
        line: header_end.max(1),
        reason: "no vertex element".into(),
    })?;
    let idx = |name: &str| prop_names.iter().position(|p| p == name);
    let (ix, iy, iz) = match (idx("x"), idx("y"), idx("z")) {
        (Some(a), Some(b), Some(c)) => (a, b, c),
        _ => {
            return Err(MapError::Parse {
                line: header_end.max(1),
                reason: "vertex element lacks x/y/z properties".into(),
            })
        }
    };
    let mut points = Vec::with_capacity(count);
    for (lineno, line) in lines.take(count) {
        let toks: Vec<&str> = line.split_whitespace().collect();
        let get = |i: usize| -> Result<f64, MapError> {
            toks.get(i)
                .and_then(|t| t.parse().ok())
                .ok_or(MapError::Parse {
                    line: lineno + 1,
                    reason: "bad vertex record".into(),
                })
        };
        points.push(Point::new(get(ix)?, get(iy)?, get(iz)?));
    }
    if points.len() != count {
        return Err(MapError::Parse {
            line: header_end + points.len() + 1,
            reason: format!("expected {count} vertices, found {}", points.len()),
        });
    }
    Ok(points)
}

/// Grid map file schema: a JSON header with run-length encoded occupancy.
///
/// `rle` holds `[run_length, value]` pairs; values are 0 (free) or 1
/// (occupied); the flattened order is x-fastest, then y, then z.
#[derive(Debug, Serialize, Deserialize)]
pub struct GridFile {
    pub origin: [f64; 3],
    pub voxel_size: f64,
    pub dims: [usize; 3],
    pub rle: Vec<[u64; 2]>,
}

impl GridFile {
    pub fn from_map(map: &OccupancyGridMap) -> GridFile {
        let mut rle: Vec<[u64; 2]> = Vec::new();
        for z in 0..map.dims[2] {
            for y in 0..map.dims[1] {
                for x in 0..map.dims[0] {
                    let v = map.is_occupied_voxel([x, y, z]) as u64;
                    match rle.last_mut() {
                        Some(last) if last[1] == v => last[0] += 1,
                        _ => rle.push([1, v]),
                    }
                }
            }
        }
        GridFile {
            origin: [map.origin.x, map.origin.y, map.origin.z],
            voxel_size: map.voxel_size,
            dims: map.dims,
            rle,
        }
    }

    pub fn into_map(self, clearance: f64) -> Result<OccupancyGridMap, MapError> {
        let total: u64 = self.rle.iter().map(|r| r[0]).sum();
        let expected = (self.dims[0] * self.dims[1] * self.dims[2]) as u64;
        if total != expected {
            return Err(MapError::InvalidGrid(format!(
                "rle covers {total} voxels, dims imply {expected}"
            )));
        }
        let mut occupancy = Vec::with_capacity(expected as usize);
        for run in &self.rle {
            if run[1] > 1 {
                return Err(MapError::InvalidGrid("rle values must be 0 or 1".into()));
            }
            occupancy.extend(std::iter::repeat(run[1] == 1).take(run[0] as usize));
        }
        OccupancyGridMap::new(
            Point::new(self.origin[0], self.origin[1], self.origin[2]),
            self.voxel_size,
            self.dims,
            occupancy,
            clearance,
        )
    }
}

pub fn load_grid_map(path: &FsPath, clearance: f64) -> Result<OccupancyGridMap, MapError> {
    let text = fs::read_to_string(path).map_err(|e| MapError::Io {
        path: path.display().to_string(),
        source: e,
    })?;
    let file: GridFile = serde_json::from_str(&text)
        .map_err(|e| MapError::InvalidGrid(format!("json: {e}")))?;
    file.into_map(clearance)
}

pub fn save_grid_map(path: &FsPath, map: &OccupancyGridMap) -> Result<(), MapError> {
    let file = GridFile::from_map(map);
    let text = serde_json::to_string(&file).expect("grid serializes");
    fs::write(path, text).map_err(|e| MapError::Io {
        path: path.display().to_string(),
        source: e,
    })
}
