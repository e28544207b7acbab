//! Shared argument groups, config loading and the exit-code error type.

use std::path::{Path, PathBuf};

use clap::Args;
use thiserror::Error;

use skelgraph::map::{
    load_grid_map, load_point_cloud, CollisionOracle, OccupancyGridMap, PointCloudMap,
};
use skelgraph::skeleton::GenerationParams;
use skelgraph::worldgen::{self, Archetype, WorldSpec};
use skelgraph::Point;

#[derive(Debug, Error)]
pub enum CliError {
    /// Bad or missing input: exit code 2.
    #[error("{0}")]
    Input(String),
    /// Planner could not serve the query: exit code 3.
    #[error("{0}")]
    Planning(String),
    /// Anything unexpected: exit code 1.
    #[error("{0}")]
    Internal(String),
}

pub fn input<T: std::fmt::Display>(msg: T) -> CliError {
    CliError::Input(msg.to_string())
}

pub fn internal<T: std::fmt::Display>(msg: T) -> CliError {
    CliError::Internal(msg.to_string())
}

/// Exactly one map source: a file on disk or a synthetic world spec.
#[derive(Args)]
pub struct MapSource {
    /// Map file: ASCII PLY or XYZ point cloud, or grid JSON.
    #[arg(long)]
    pub map: Option<PathBuf>,
    /// Synthetic world archetype: maze, rooms, ring-corridor or multi-floor.
    #[arg(long)]
    pub world: Option<String>,
    /// World extents "XxYxZ" in meters.
    #[arg(long, default_value = "60x60x2.5")]
    pub size: String,
    /// Layout seed for the synthetic world.
    #[arg(long, default_value_t = 1)]
    pub world_seed: u64,
    /// Outlier noise density in points per cubic meter.
    #[arg(long, default_value_t = 0.0)]
    pub noise: f64,
    /// Voxel size of the matched occupancy grid, meters.
    #[arg(long, default_value_t = 0.25)]
    pub voxel_size: f64,
}

/// A loaded map: always a collision oracle, with the matched grid when the
/// source can provide one.
pub struct LoadedMap {
    pub cloud: Option<PointCloudMap>,
    pub grid: Option<OccupancyGridMap>,
    pub world_spec: Option<WorldSpec>,
}

impl LoadedMap {
    pub fn oracle(&self) -> &dyn CollisionOracle {
        match (&self.cloud, &self.grid) {
            (Some(cloud), _) => cloud,
            (None, Some(grid)) => grid,
            (None, None) => unreachable!("loaded map has at least one representation"),
        }
    }
}

impl MapSource {
    pub fn load(&self, clearance: f64) -> Result<LoadedMap, CliError> {
        match (&self.map, &self.world) {
            (Some(_), Some(_)) | (None, None) => Err(input(
                "exactly one of --map and --world must be given",
            )),
            (Some(path), None) => load_map_file(path, clearance),
            (None, Some(world)) => {
                let spec = self.world_spec(world)?;
                let (cloud, grid) = worldgen::generate_world(&spec, clearance, self.voxel_size)
                    .map_err(input)?;
                let cloud = if spec.noise_density > 0.0 {
                    let seed = worldgen::auto_seed(&cloud)
                        .ok_or_else(|| input("no free seed position for noise injection"))?;
                    worldgen::add_noise(&cloud, spec.noise_density, spec.rng_seed, &seed)
                } else {
                    cloud
                };
                Ok(LoadedMap {
                    cloud: Some(cloud),
                    grid: Some(grid),
                    world_spec: Some(spec),
                })
            }
        }
    }

    fn world_spec(&self, world: &str) -> Result<WorldSpec, CliError> {
        let archetype = match world {
            "maze" => Archetype::Maze,
            "rooms" => Archetype::Rooms,
            "ring-corridor" => Archetype::RingCorridor,
            "multi-floor" => Archetype::MultiFloor,
            other => {
                return Err(input(format!(
                    "unknown world archetype {other:?}; expected maze, rooms, ring-corridor or multi-floor"
                )))
            }
        };
        let mut spec = WorldSpec::new(archetype, parse_extents(&self.size)?);
        spec.rng_seed = self.world_seed;
        spec.noise_density = self.noise;
        spec.validate().map_err(input)?;
        Ok(spec)
    }
}

fn load_map_file(path: &Path, clearance: f64) -> Result<LoadedMap, CliError> {
    if !path.exists() {
        return Err(input(format!("map not found: {}", path.display())));
    }
    let is_grid = path.extension().map_or(false, |e| e == "json");
    if is_grid {
        let grid = load_grid_map(path, clearance).map_err(input)?;
        Ok(LoadedMap {
            cloud: None,
            grid: Some(grid),
            world_spec: None,
        })
    } else {
        let cloud = load_point_cloud(path, clearance).map_err(input)?;
        Ok(LoadedMap {
            cloud: Some(cloud),
            grid: None,
            world_spec: None,
        })
    }
}

#[derive(Args)]
pub struct ParamArgs {
    /// Generation parameter file (TOML or JSON); missing fields keep their
    /// defaults.
    #[arg(long)]
    pub params: Option<PathBuf>,
    /// Overrides the clearance from the parameter file.
    #[arg(long)]
    pub clearance: Option<f64>,
}

impl ParamArgs {
    pub fn load(&self) -> Result<GenerationParams, CliError> {
        let mut params = match &self.params {
            None => GenerationParams::default(),
            Some(path) => {
                let text = std::fs::read_to_string(path)
                    .map_err(|e| input(format!("params {}: {e}", path.display())))?;
                if path.extension().map_or(false, |e| e == "json") {
                    serde_json::from_str(&text).map_err(input)?
                } else {
                    toml::from_str(&text).map_err(input)?
                }
            }
        };
        if let Some(clearance) = self.clearance {
            params.clearance = clearance;
        }
        params.validate().map_err(input)?;
        Ok(params)
    }
}

#[derive(Args)]
pub struct OutputArgs {
    /// Directory all artifacts are written into.
    #[arg(long, default_value = ".")]
    pub out: PathBuf,
}

impl OutputArgs {
    pub fn prepare(&self) -> Result<&Path, CliError> {
        std::fs::create_dir_all(&self.out)
            .map_err(|e| input(format!("output dir {}: {e}", self.out.display())))?;
        Ok(&self.out)
    }
}

pub fn parse_extents(text: &str) -> Result<[f64; 3], CliError> {
    let parts: Vec<f64> = text
        .split('x')
        .map(|p| p.trim().parse::<f64>())
        .collect::<Result<_, _>>()
        .map_err(|_| input(format!("bad size {text:?}; expected XxYxZ")))?;
    match parts.as_slice() {
        [x, y, z] => Ok([*x, *y, *z]),
        _ => Err(input(format!("bad size {text:?}; expected XxYxZ"))),
    }
}

pub fn parse_point(text: &str) -> Result<Point, CliError> {
    let parts: Vec<f64> = text
        .split(',')
        .map(|p| p.trim().parse::<f64>())
        .collect::<Result<_, _>>()
        .map_err(|_| input(format!("bad position {text:?}; expected x,y,z")))?;
    match parts.as_slice() {
        [x, y, z] => Ok(Point::new(*x, *y, *z)),
        _ => Err(input(format!("bad position {text:?}; expected x,y,z"))),
    }
}

/// "auto" resolves to the free position nearest the bounds center.
pub fn resolve_seed(text: &str, map: &dyn CollisionOracle) -> Result<Point, CliError> {
    if text == "auto" {
        worldgen::auto_seed(map).ok_or_else(|| input("auto seed found no free position"))
    } else {
        parse_point(text)
    }
}
