//! Sparse 3D topological skeleton graph generation for mobile robot global planning.
//!
//! The library extracts a trajectory-independent skeleton graph from a known
//! environment map by iteratively expanding ray-sampled polyhedra in free
//! space. Nodes cover distinctive free-space regions, gates sit on the
//! frontiers between neighboring nodes, and connections assert straight-line
//! traversability. The resulting graph supports fast A* global planning.
//!
//! Modules:
//! - [`map`]: map loading and the collision-checking contract.
//! - [`geometry`]: direction sampling, convex hulls, ray-mesh intersection.
//! - [`skeleton`]: the frontier-driven generator itself.
//! - [`graph`]: the skeleton graph container, A* planner and grid baseline.
//! - [`worldgen`]: deterministic synthetic benchmark worlds.

pub mod geometry;
pub mod graph;
pub mod map;
pub mod skeleton;
pub mod worldgen;

/// 3D position in meters.
pub type Point = nalgebra::Point3<f64>;
/// 3D vector in meters (directions are unit length).
pub type Vec3 = nalgebra::Vector3<f64>;
