//! `fibersurf`: batch front end for Jacobi sets, fiber surface extraction,
//! oracle validation, synthetic datasets, density rasters and the HTTP server.
//!
//! Exit codes: 0 success, 1 validation mismatch, 2 I/O or parse error,
//! 3 bad arguments.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use fibersurf::export::{density_pgm, jacobi_text, structured_grid_text, surface_obj, surface_sidecar};
use fibersurf::fiber::surface_from_tets;
use fibersurf::{
    component_from_jacobi_edge, compute_jacobi_set, density_raster, exhaustive_oracle,
    extract_fiber_surface_tets, load_dataset, range_rect, synth, BivariateField, ControlPolygon,
    FiberSurfaceMesh, RangePoint, SearchError, SearchTrace, TetMesh, TetSet,
};
use rand::{Rng, SeedableRng};
use serde::Serialize;

#[derive(Parser)]
#[command(name = "fibersurf", version, about = "Output-sensitive fiber surface extraction")]
struct Cli {
    /// Cap on worker threads (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Compute the Jacobi set and print per-kind counts.
    Jacobi {
        #[arg(long)]
        dataset: PathBuf,
        /// Write the edge listing here.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Extract the fiber surface of a control polygon as OBJ.
    Extract {
        #[command(flatten)]
        query: QueryArgs,
        /// Restrict to the component reached from this Jacobi edge (single-edge polygons only).
        #[arg(long)]
        jacobi_edge: Option<u32>,
        /// OBJ output; a binary sidecar with per-vertex t and per-triangle
        /// source tet goes next to it with extension `.fsmb`.
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        trace_out: Option<PathBuf>,
    },
    /// Compare the search against the exhaustive scan for every control edge.
    Validate {
        #[command(flatten)]
        query: QueryArgs,
        /// Also validate this many random control edges inside the range.
        #[arg(long, default_value_t = 0)]
        random_edges: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        trace_out: Option<PathBuf>,
        #[arg(long, hide = true)]
        inject_mismatch: bool,
    },
    /// Write a synthetic structured-grid dataset on [-1, 1]^3.
    Synth {
        #[arg(long, value_enum, default_value_t = SynthKind::HeightDistance)]
        kind: SynthKind,
        /// Vertices per axis.
        #[arg(long)]
        n: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Rasterize the range-space density as a 16-bit PGM.
    Density {
        #[arg(long)]
        dataset: PathBuf,
        #[arg(long, default_value_t = 256)]
        width: usize,
        #[arg(long, default_value_t = 256)]
        height: usize,
        #[arg(long, default_value_t = 8)]
        samples: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Serve the HTTP exploration API.
    Serve {
        #[arg(long, default_value_t = 8080)]
        port: u16,
        #[arg(long, default_value = "127.0.0.1")]
        host: String,
        #[arg(long, default_value = ".")]
        datasets_dir: PathBuf,
    },
}

#[derive(Args)]
struct QueryArgs {
    #[arg(long)]
    dataset: PathBuf,
    /// Inline points: "a1,b1 a2,b2 ...".
    #[arg(long, conflicts_with = "polygon_file", allow_hyphen_values = true)]
    polygon: Option<String>,
    /// Text file with one "a b" (or "a,b") point per line.
    #[arg(long)]
    polygon_file: Option<PathBuf>,
    /// Connect the last point back to the first.
    #[arg(long)]
    closed: bool,
}

#[derive(Clone, Copy, ValueEnum)]
enum SynthKind {
    /// f1 = z, f2 = distance from the origin.
    HeightDistance,
    /// f1 = x, f2 = y.
    Linear,
    /// Independent uniform values per vertex.
    Random,
}

enum Failure {
    Mismatch,
    Io(String),
    Usage(String),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Mismatch => 1,
            Failure::Io(_) => 2,
            Failure::Usage(_) => 3,
        }
    }
}

type Outcome = Result<(), Failure>;

fn io_err(path: &Path, e: impl std::fmt::Display) -> Failure {
    Failure::Io(format!("{}: {e}", path.display()))
}

fn write(path: &Path, bytes: impl AsRef<[u8]>) -> Outcome {
    fs::write(path, bytes).map_err(|e| io_err(path, e))
}

fn load(path: &Path) -> Result<(TetMesh, BivariateField), Failure> {
    load_dataset(path).map_err(|e| Failure::Io(e.to_string()))
}

/// Points as whitespace- or comma-separated `a b` pairs; `#` starts a comment line.
fn parse_points(text: &str) -> Result<Vec<RangePoint>, String> {
    let mut points = Vec::new();
    for line in text.lines().map(str::trim).filter(|l| !l.is_empty() && !l.starts_with('#')) {
        let nums: Vec<&str> = line.split(|c: char| c == ',' || c.is_whitespace()).filter(|s| !s.is_empty()).collect();
        if nums.len() % 2 != 0 {
            return Err(format!("odd number of coordinates in {line:?}"));
        }
        for xy in nums.chunks(2) {
            let parse = |s: &str| s.parse::<f64>().map_err(|_| format!("bad coordinate {s:?}"));
            points.push(RangePoint::new(parse(xy[0])?, parse(xy[1])?));
        }
    }
    Ok(points)
}

impl QueryArgs {
    fn polygon(&self) -> Result<ControlPolygon, Failure> {
        let points = match (&self.polygon, &self.polygon_file) {
            (Some(inline), None) => parse_points(inline).map_err(Failure::Usage)?,
            (None, Some(path)) => {
                let text = fs::read_to_string(path).map_err(|e| io_err(path, e))?;
                parse_points(&text).map_err(|e| Failure::Io(format!("{}: {e}", path.display())))?
            }
            _ => return Err(Failure::Usage("one of --polygon or --polygon-file is required".into())),
        };
        if points.iter().any(|p| !p.is_finite()) {
            return Err(Failure::Usage("polygon coordinates must be finite".into()));
        }
        ControlPolygon::from_points(&points, self.closed).map_err(|e| Failure::Usage(e.to_string()))
    }
}

/// Per control edge timing record; the step timers keep their search names.
#[derive(Serialize)]
struct EdgeReport {
    control_edge_index: usize,
    edge: [[f64; 2]; 2],
    #[serde(flatten)]
    trace: SearchTrace,
    triangulation_ms: f64,
    total_ms: f64,
    n_triangles: usize,
}

#[derive(Serialize)]
struct TraceReport {
    dataset: String,
    n_tets: usize,
    n_jacobi_edges: usize,
    jacobi_ms: f64,
    edges: Vec<EdgeReport>,
}

fn cmd_jacobi(dataset: &Path, out: Option<&Path>) -> Outcome {
    let (mesh, field) = load(dataset)?;
    let jset = compute_jacobi_set(&mesh, &field);
    println!("{} extremum, {} saddle", jset.n_extremum(), jset.n_saddle());
    if let Some(out) = out {
        write(out, jacobi_text(&mesh, &jset))?;
    }
    Ok(())
}

fn cmd_extract(query: &QueryArgs, jacobi_edge: Option<u32>, out: &Path, trace_out: Option<&Path>) -> Outcome {
    let poly = query.polygon()?;
    if jacobi_edge.is_some() && poly.edges().len() != 1 {
        return Err(Failure::Usage("--jacobi-edge needs a polygon with exactly one edge".into()));
    }
    let (mesh, field) = load(&query.dataset)?;
    let started = Instant::now();
    let jset = compute_jacobi_set(&mesh, &field);
    let jacobi_ms = started.elapsed().as_secs_f64() * 1e3;

    let mut surface = FiberSurfaceMesh::default();
    let mut reports = Vec::new();
    for (k, e) in poly.edges().iter().enumerate() {
        let (tets, trace) = match jacobi_edge {
            Some(id) => component_from_jacobi_edge(&mesh, &field, &jset, e, id).map_err(|err| match err {
                SearchError::JacobiEdgeNotHit(_) => Failure::Usage(err.to_string()),
                other => Failure::Io(other.to_string()),
            })?,
            None => extract_fiber_surface_tets(&mesh, &field, &jset, e),
        };
        let started = Instant::now();
        let mut part = surface_from_tets(&mesh, &field, e, &tets);
        let triangulation_ms = started.elapsed().as_secs_f64() * 1e3;
        let offset = surface.n_components() as u32;
        part.component_id.iter_mut().for_each(|c| *c += offset);
        part.control_edge_index.iter_mut().for_each(|c| *c = k as u32);
        println!(
            "edge {k}: {} Jacobi hits, {} tets, {} components, {} triangles",
            trace.n_jacobi_intersections,
            tets.len(),
            tets.n_components(),
            part.n_triangles()
        );
        reports.push(EdgeReport {
            control_edge_index: k,
            edge: [[e.u().a, e.u().b], [e.v().a, e.v().b]],
            total_ms: trace.traversal_ms() + triangulation_ms,
            triangulation_ms,
            n_triangles: part.n_triangles(),
            trace,
        });
        append(&mut surface, part);
    }

    write(out, surface_obj(&surface))?;
    write(&out.with_extension("fsmb"), surface_sidecar(&surface))?;
    if let Some(path) = trace_out {
        let report = TraceReport {
            dataset: query.dataset.display().to_string(),
            n_tets: mesh.n_tets(),
            n_jacobi_edges: jset.len(),
            jacobi_ms,
            edges: reports,
        };
        write(path, serde_json::to_string_pretty(&report).expect("trace serializes"))?;
    }
    Ok(())
}

fn append(into: &mut FiberSurfaceMesh, part: FiberSurfaceMesh) {
    let base = into.n_vertices() as u32;
    into.positions.extend(part.positions);
    into.t.extend(part.t);
    into.triangles.extend(part.triangles.into_iter().map(|t| t.map(|v| v + base)));
    into.source_tet.extend(part.source_tet);
    into.component_id.extend(part.component_id);
    into.control_edge_index.extend(part.control_edge_index);
}

fn describe(set: &TetSet) -> String {
    format!("{} tets / {} components", set.len(), set.n_components())
}

fn cmd_validate(query: &QueryArgs, random_edges: usize, seed: u64, trace_out: Option<&Path>, inject: bool) -> Outcome {
    let poly = if query.polygon.is_some() || query.polygon_file.is_some() {
        Some(query.polygon()?)
    } else if random_edges == 0 {
        return Err(Failure::Usage("give a polygon, --random-edges, or both".into()));
    } else {
        None
    };
    let (mesh, field) = load(&query.dataset)?;
    let jset = compute_jacobi_set(&mesh, &field);

    let mut edges: Vec<_> = poly.map(|p| p.edges().to_vec()).unwrap_or_default();
    let r = range_rect(&field);
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let point = |rng: &mut rand_chacha::ChaCha8Rng| {
        let a = if r.width() > 0.0 { rng.gen_range(r.min.a..=r.max.a) } else { r.min.a };
        let b = if r.height() > 0.0 { rng.gen_range(r.min.b..=r.max.b) } else { r.min.b };
        RangePoint::new(a, b)
    };
    let target = edges.len() + random_edges;
    while edges.len() < target {
        if let Ok(e) = fibersurf::ControlEdge::new(point(&mut rng), point(&mut rng)) {
            edges.push(e);
        }
    }

    let mut mismatches = 0;
    let mut traces = Vec::new();
    for (k, e) in edges.iter().enumerate() {
        let (mut found, trace) = extract_fiber_surface_tets(&mesh, &field, &jset, e);
        if inject {
            found = perturb(&found);
        }
        let oracle = exhaustive_oracle(&mesh, &field, e);
        let equal = found == oracle;
        mismatches += (!equal) as usize;
        let relation = if equal { "=" } else { "!=" };
        println!(
            "edge {k}: search {} {relation} oracle {}{}",
            describe(&found),
            describe(&oracle),
            if equal { "" } else { "  MISMATCH" }
        );
        traces.push(trace);
    }
    println!("{} of {} control edges match the exhaustive scan", edges.len() - mismatches, edges.len());
    if let Some(path) = trace_out {
        write(path, serde_json::to_string_pretty(&traces).expect("trace serializes"))?;
    }
    if mismatches > 0 {
        Err(Failure::Mismatch)
    } else {
        Ok(())
    }
}

/// Test hook: drops the last tet, or adds tet 0 to an empty set.
fn perturb(set: &TetSet) -> TetSet {
    let mut pairs: Vec<(u32, u32)> = set.tets().iter().copied().zip(set.labels().iter().copied()).collect();
    if pairs.pop().is_none() {
        pairs.push((0, 0));
    }
    TetSet::from_labeled(pairs)
}

fn cmd_synth(kind: SynthKind, n: usize, seed: u64, out: &Path) -> Outcome {
    if n < 2 {
        return Err(Failure::Usage("--n must be at least 2".into()));
    }
    let (_, field) = match kind {
        SynthKind::HeightDistance => synth::height_distance_dataset(n),
        SynthKind::Linear => synth::linear_dataset(n),
        SynthKind::Random => synth::random_dataset(n, seed),
    }
    .map_err(|e| Failure::Usage(e.to_string()))?;
    write(out, structured_grid_text([n; 3], synth::DOMAIN_LO, synth::DOMAIN_HI, &field))
}

fn cmd_density(dataset: &Path, width: usize, height: usize, samples: usize, seed: u64, out: &Path) -> Outcome {
    if width == 0 || height == 0 || samples == 0 {
        return Err(Failure::Usage("--width, --height and --samples must be positive".into()));
    }
    let (mesh, field) = load(dataset)?;
    let raster = density_raster(&mesh, &field, width, height, samples, seed);
    println!(
        "mass {:.6}, max density {:.6}, range [{}, {}] x [{}, {}]",
        raster.total_mass(),
        raster.max_density(),
        raster.range_rect.min.a,
        raster.range_rect.max.a,
        raster.range_rect.min.b,
        raster.range_rect.max.b
    );
    write(out, density_pgm(&raster))
}

fn cmd_serve(host: &str, port: u16, datasets_dir: PathBuf, workers: usize) -> Outcome {
    if !datasets_dir.is_dir() {
        return Err(io_err(&datasets_dir, "not a directory"));
    }
    let addr: std::net::SocketAddr = format!("{host}:{port}")
        .parse()
        .map_err(|e| Failure::Usage(format!("bad address {host}:{port}: {e}")))?;
    let runtime = tokio::runtime::Runtime::new().map_err(|e| Failure::Io(e.to_string()))?;
    let state = fibersurf_service::AppState::new(datasets_dir, workers);
    eprintln!("listening on http://{addr}");
    runtime
        .block_on(fibersurf_service::serve(addr, state))
        .map_err(|e| Failure::Io(format!("{addr}: {e}")))
}

fn run(cli: Cli) -> Outcome {
    if let Some(n) = cli.threads {
        if n == 0 {
            return Err(Failure::Usage("--threads must be positive".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Failure::Usage(e.to_string()))?;
    }
    let workers = cli.threads.unwrap_or_else(rayon::current_num_threads);
    match cli.command {
        Command::Jacobi { dataset, out } => cmd_jacobi(&dataset, out.as_deref()),
        Command::Extract { query, jacobi_edge, out, trace_out } => {
            cmd_extract(&query, jacobi_edge, &out, trace_out.as_deref())
        }
        Command::Validate { query, random_edges, seed, trace_out, inject_mismatch } => {
            cmd_validate(&query, random_edges, seed, trace_out.as_deref(), inject_mismatch)
        }
        Command::Synth { kind, n, seed, out } => cmd_synth(kind, n, seed, &out),
        Command::Density { dataset, width, height, samples, seed, out } => {
            cmd_density(&dataset, width, height, samples, seed, &out)
        }
        Command::Serve { port, host, datasets_dir } => cmd_serve(&host, port, datasets_dir, workers),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 3 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            match &f {
                Failure::Mismatch => eprintln!("validation failed: search and oracle differ"),
                Failure::Io(msg) => eprintln!("error: {msg}"),
                Failure::Usage(msg) => eprintln!("invalid arguments: {msg}"),
            }
            ExitCode::from(f.code())
        }
    }
}
