//! Subcommand implementations.

use std::fmt::Write as _;
use std::path::Path;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use skelgraph::geometry::TriangleMesh;
use skelgraph::graph::{
    graph_to_json, grid_astar, load_graph, plan_astar, PlanError, SkeletonGraph,
};
use skelgraph::map::{save_grid_map, Aabb, CollisionOracle};
use skelgraph::skeleton::{generate_skeleton, GenerationParams, SkeletonError};
use skelgraph::worldgen;
use skelgraph::Point;

use crate::config::{
    input, internal, parse_point, resolve_seed, CliError, MapSource, OutputArgs, ParamArgs,
};

pub fn synth(source: &MapSource, output: &OutputArgs) -> Result<(), CliError> {
    if source.world.is_none() {
        return Err(input("synth requires --world"));
    }
    let map = source.load(GenerationParams::default().clearance)?;
    let out = output.prepare()?;
    let cloud = map.cloud.as_ref().expect("world source yields a cloud");
    let grid = map.grid.as_ref().expect("world source yields a grid");
    let spec = map.world_spec.as_ref().expect("world source keeps its spec");

    let mut xyz = String::new();
    for p in cloud.points() {
        writeln!(xyz, "{} {} {}", p.x, p.y, p.z).expect("string write");
    }
    write_file(&out.join("world.xyz"), &xyz)?;
    save_grid_map(&out.join("world_grid.json"), grid).map_err(internal)?;
    let spec_json = serde_json::to_string_pretty(spec).map_err(internal)?;
    write_file(&out.join("world_spec.json"), &spec_json)?;
    println!(
        "synthesized {:?} world: {} cloud points, {:?} grid voxels",
        spec.archetype,
        cloud.points().len(),
        grid.dims()
    );
    Ok(())
}

#[derive(Serialize)]
struct GenerationStats<'a> {
    generation_seconds: f64,
    vertices: usize,
    edges: usize,
    nodes: usize,
    gates: usize,
    params: &'a GenerationParams,
}

pub fn generate(
    source: &MapSource,
    params: &ParamArgs,
    output: &OutputArgs,
    seed_pos: &str,
) -> Result<(), CliError> {
    let params = params.load()?;
    let map = source.load(params.clearance)?;
    let out = output.prepare()?;
    let seed = resolve_seed(seed_pos, map.oracle())?;
    let started = Instant::now();
    let graph = run_generation(map.oracle(), &seed, &params)?;
    let seconds = started.elapsed().as_secs_f64();

    write_file(&out.join("graph.json"), &graph_to_json(&graph))?;
    let mut obj = Vec::new();
    combined_mesh(graph.registry.iter().map(|p| &p.mesh))
        .write_obj(&mut obj)
        .map_err(internal)?;
    std::fs::write(out.join("polyhedra.obj"), obj).map_err(internal)?;

    let stats = GenerationStats {
        generation_seconds: seconds,
        vertices: graph.vertices.len(),
        edges: graph.edges.len(),
        nodes: graph.nodes.len(),
        gates: graph.gates.len(),
        params: &params,
    };
    let stats_json = serde_json::to_string_pretty(&stats).map_err(internal)?;
    write_file(&out.join("stats.json"), &stats_json)?;
    println!(
        "generated {} vertices / {} edges in {seconds:.3} s",
        stats.vertices, stats.edges
    );
    Ok(())
}

pub fn plan(
    source: &MapSource,
    params: &ParamArgs,
    output: &OutputArgs,
    graph_path: &Path,
    start: &str,
    goal: &str,
    oracle: bool,
) -> Result<(), CliError> {
    let params = params.load()?;
    let map = source.load(params.clearance)?;
    let out = output.prepare()?;
    if !graph_path.exists() {
        return Err(input(format!("graph not found: {}", graph_path.display())));
    }
    let graph = load_graph(graph_path).map_err(input)?;
    let start = parse_point(start)?;
    let goal = parse_point(goal)?;

    let result = plan_astar(&graph, &start, &goal, map.oracle()).map_err(plan_error)?;
    println!(
        "graph path: {:.3} m in {:.3} ms ({} vertices expanded)",
        result.length,
        result.elapsed * 1e3,
        result.expanded_count
    );
    if oracle {
        let grid = map
            .grid
            .as_ref()
            .ok_or_else(|| input("--oracle needs a grid map (synthetic world or grid JSON)"))?;
        let reference = grid_astar(grid, &start, &goal).map_err(plan_error)?;
        println!(
            "grid path:  {:.3} m in {:.3} ms; length ratio graph/grid = {:.3}",
            reference.length,
            reference.elapsed * 1e3,
            result.length / reference.length
        );
    }

    let mut csv = String::from("x,y,z\n");
    for w in &result.waypoints {
        writeln!(csv, "{},{},{}", w.x, w.y, w.z).expect("string write");
    }
    write_file(&out.join("path.csv"), &csv)?;
    Ok(())
}

pub fn bench(
    source: &MapSource,
    params: &ParamArgs,
    output: &OutputArgs,
    runs: usize,
    pairs: usize,
    rng_seed: u64,
    seed_pos: &str,
) -> Result<(), CliError> {
    let params = params.load()?;
    let map = source.load(params.clearance)?;
    let out = output.prepare()?;
    let seed = resolve_seed(seed_pos, map.oracle())?;

    let mut rows: Vec<[f64; 5]> = Vec::new();
    let mut graph: Option<SkeletonGraph> = None;
    for _ in 0..runs.max(1) {
        let started = Instant::now();
        let g = run_generation(map.oracle(), &seed, &params)?;
        rows.push([
            started.elapsed().as_secs_f64(),
            g.vertices.len() as f64,
            g.edges.len() as f64,
            g.nodes.len() as f64,
            g.gates.len() as f64,
        ]);
        graph = Some(g);
    }
    let graph = graph.expect("at least one run");
    let mut csv = String::from("run,seconds,vertices,edges,nodes,gates\n");
    for (i, r) in rows.iter().enumerate() {
        writeln!(csv, "{},{},{},{},{},{}", i + 1, r[0], r[1], r[2], r[3], r[4])
            .expect("string write");
    }
    append_summary(&mut csv, &rows);
    write_file(&out.join("bench_generation.csv"), &csv)?;

    let with_grid = map.grid.is_some();
    let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
    let mut plan_rows: Vec<Vec<f64>> = Vec::new();
    while plan_rows.len() < pairs {
        let (a, b) = sample_pair(map.oracle(), &mut rng)?;
        let Ok(on_graph) = plan_astar(&graph, &a, &b, map.oracle()) else {
            continue;
        };
        let mut row = vec![on_graph.elapsed, on_graph.length];
        if let Some(grid) = &map.grid {
            let Ok(on_grid) = grid_astar(grid, &a, &b) else {
                continue;
            };
            row.push(on_grid.elapsed);
            row.push(on_grid.length);
        }
        plan_rows.push(row);
    }
    let mut csv = String::from(if with_grid {
        "pair,graph_seconds,graph_length,grid_seconds,grid_length\n"
    } else {
        "pair,graph_seconds,graph_length\n"
    });
    for (i, r) in plan_rows.iter().enumerate() {
        let values: Vec<String> = r.iter().map(|v| v.to_string()).collect();
        writeln!(csv, "{},{}", i + 1, values.join(",")).expect("string write");
    }
    append_summary_vec(&mut csv, &plan_rows);
    write_file(&out.join("bench_planning.csv"), &csv)?;

    println!(
        "bench: {} generation runs, {} planning pairs written to {}",
        rows.len(),
        plan_rows.len(),
        out.display()
    );
    Ok(())
}

pub fn export_obj(source: &MapSource, output: &OutputArgs) -> Result<(), CliError> {
    let Some(world) = &source.world else {
        return Err(input("export-obj requires --world"));
    };
    // Reuse the spec parsing path, then render the boxes directly.
    let map = source.load(GenerationParams::default().clearance)?;
    let spec = map.world_spec.as_ref().expect("world source keeps its spec");
    let boxes = worldgen::generate_boxes(spec).map_err(input)?;
    let meshes: Vec<TriangleMesh> = boxes.iter().map(box_mesh).collect();
    let out = output.prepare()?;
    let mut obj = Vec::new();
    combined_mesh(meshes.iter())
        .write_obj(&mut obj)
        .map_err(internal)?;
    std::fs::write(out.join("world.obj"), obj).map_err(internal)?;
    println!("exported {world} world: {} solid boxes", boxes.len());
    Ok(())
}

fn run_generation(
    map: &dyn CollisionOracle,
    seed: &Point,
    params: &GenerationParams,
) -> Result<SkeletonGraph, CliError> {
    generate_skeleton(map, seed, params).map_err(|e| match e {
        SkeletonError::SeedOccupied | SkeletonError::SeedOutsideBounds => input(e),
        other => internal(other),
    })
}

fn plan_error(e: PlanError) -> CliError {
    match e {
        PlanError::StartOccupied | PlanError::GoalOccupied => input(e),
        PlanError::AttachmentFailed(_) | PlanError::NoPath => CliError::Planning(e.to_string()),
        PlanError::Io(_) => internal(e),
    }
}

fn sample_pair(
    map: &dyn CollisionOracle,
    rng: &mut ChaCha8Rng,
) -> Result<(Point, Point), CliError> {
    let b = map.bounds();
    let diag = (0..3).map(|i| (b.max[i] - b.min[i]).powi(2)).sum::<f64>().sqrt();
    let min_separation = diag * 0.25;
    let free_point = |rng: &mut ChaCha8Rng| -> Result<Point, CliError> {
        for _ in 0..10_000 {
            let p = Point::new(
                rng.gen_range(b.min[0]..=b.max[0]),
                rng.gen_range(b.min[1]..=b.max[1]),
                rng.gen_range(b.min[2]..=b.max[2]),
            );
            if map.is_free(&p) {
                return Ok(p);
            }
        }
        Err(internal("could not sample a free point"))
    };
    for _ in 0..10_000 {
        let a = free_point(rng)?;
        let c = free_point(rng)?;
        if (a - c).norm() >= min_separation {
            return Ok((a, c));
        }
    }
    Err(internal("could not sample a separated pair"))
}

/// Mean, population std, min and max per column, appended as labeled rows.
fn append_summary(csv: &mut String, rows: &[[f64; 5]]) {
    let as_vecs: Vec<Vec<f64>> = rows.iter().map(|r| r.to_vec()).collect();
    append_summary_vec(csv, &as_vecs);
}

fn append_summary_vec(csv: &mut String, rows: &[Vec<f64>]) {
    if rows.is_empty() {
        return;
    }
    let cols = rows[0].len();
    let n = rows.len() as f64;
    let mut avg = vec![0.0; cols];
    for r in rows {
        for (a, v) in avg.iter_mut().zip(r) {
            *a += v / n;
        }
    }
    let mut std = vec![0.0; cols];
    for r in rows {
        for ((s, v), a) in std.iter_mut().zip(r).zip(&avg) {
            *s += (v - a) * (v - a) / n;
        }
    }
    for s in &mut std {
        *s = s.sqrt();
    }
    let mut min = vec![f64::INFINITY; cols];
    let mut max = vec![f64::NEG_INFINITY; cols];
    for r in rows {
        for i in 0..cols {
            min[i] = min[i].min(r[i]);
            max[i] = max[i].max(r[i]);
        }
    }
    for (label, values) in [("avg", avg), ("std", std), ("min", min), ("max", max)] {
        let rendered: Vec<String> = values.iter().map(|v| v.to_string()).collect();
        writeln!(csv, "{label},{}", rendered.join(",")).expect("string write");
    }
}

/// Concatenates meshes into one OBJ-writable mesh.
fn combined_mesh<'a>(meshes: impl Iterator<Item = &'a TriangleMesh>) -> TriangleMesh {
    let mut combined = TriangleMesh {
        vertices: Vec::new(),
        facets: Vec::new(),
        facet_normals: Vec::new(),
    };
    for mesh in meshes {
        let offset = combined.vertices.len() as u32;
        combined.vertices.extend_from_slice(&mesh.vertices);
        combined
            .facets
            .extend(mesh.facets.iter().map(|f| f.map(|v| v + offset)));
        combined.facet_normals.extend_from_slice(&mesh.facet_normals);
    }
    combined
}

/// Axis-aligned box as 12 triangles with outward winding.
fn box_mesh(b: &Aabb) -> TriangleMesh {
    let [x0, y0, z0] = b.min;
    let [x1, y1, z1] = b.max;
    let v = |x: f64, y: f64, z: f64| Point::new(x, y, z);
    let vertices = vec![
        v(x0, y0, z0),
        v(x1, y0, z0),
        v(x1, y1, z0),
        v(x0, y1, z0),
        v(x0, y0, z1),
        v(x1, y0, z1),
        v(x1, y1, z1),
        v(x0, y1, z1),
    ];
    let facets = vec![
        [0u32, 2, 1],
        [0, 3, 2], // bottom
        [4, 5, 6],
        [4, 6, 7], // top
        [0, 1, 5],
        [0, 5, 4], // front
        [2, 3, 7],
        [2, 7, 6], // back
        [1, 2, 6],
        [1, 6, 5], // right
        [3, 0, 4],
        [3, 4, 7], // left
    ];
    let facet_normals = facets
        .iter()
        .map(|&[a, b_, c]| {
            let (a, b_, c) = (vertices[a as usize], vertices[b_ as usize], vertices[c as usize]);
            (b_ - a).cross(&(c - a)).normalize()
        })
        .collect();
    TriangleMesh {
        vertices,
        facets,
        facet_normals,
    }
}

fn write_file(path: &Path, contents: &str) -> Result<(), CliError> {
    std::fs::write(path, contents).map_err(|e| internal(format!("{}: {e}", path.display())))
}
