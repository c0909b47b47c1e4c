//! `match`, `compare` and `replay`.

use std::fs;
use std::path::Path;
use std::time::Instant;

use elastic_match::geometry::{is_simple, read_shape, BBox, Polygon, PolygonSet, Role};
use elastic_match::matcher::{run, IterationRecord, MatchConfig, MatchProblem, MatchResult, Method, Termination};
use elastic_match::meshing::TriMesh;
use elastic_match::shapes;
use elastic_match::symdiff::{gradient, restoring_force, DeformedBoundary};
use nalgebra::Vector2;
use serde::{Deserialize, Serialize};

use crate::args::{ConfigArgs, InputArgs, RunArgs};
use crate::error::CliError;
use crate::svg::{arrow_scale, Svg};

/// Everything needed to repeat a run. Rerunning reproduces every output
/// file bit for bit; only `timings` differ.
#[derive(Debug, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool: String,
    pub version: String,
    pub command: String,
    pub inputs: InputArgs,
    pub config: ConfigArgs,
    /// Wall-clock seconds per stage.
    pub timings: Vec<Stage>,
    pub outcomes: Vec<Outcome>,
    pub error: Option<String>,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct Stage {
    pub name: String,
    pub seconds: f64,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct Outcome {
    pub method: String,
    pub termination: String,
    pub iterations: usize,
    /// Area weight actually used, normalized units.
    pub alpha: f64,
    pub failure: Option<String>,
}

struct Timer {
    last: Instant,
    stages: Vec<Stage>,
}

impl Timer {
    fn new() -> Self {
        Self {
            last: Instant::now(),
            stages: Vec::new(),
        }
    }

    fn lap(&mut self, name: &str) {
        let now = Instant::now();
        self.stages.push(Stage {
            name: name.into(),
            seconds: (now - self.last).as_secs_f64(),
        });
        self.last = now;
    }
}

/// A prepared problem plus the target in input units.
struct Prepared {
    problem: MatchProblem,
    target: PolygonSet,
}

fn invalid_file(path: &Path) -> impl FnOnce(elastic_match::geometry::GeometryError) -> CliError + '_ {
    move |e| CliError::Invalid(format!("{}: {e}", path.display()))
}

/// The source must be one simple outer ring.
pub fn read_source(path: &Path) -> Result<Polygon, CliError> {
    let set = read_shape(path).map_err(invalid_file(path))?;
    single_ring(&set).map_err(|m| CliError::Invalid(format!("{}: {m}", path.display())))
}

pub fn single_ring(set: &PolygonSet) -> Result<Polygon, String> {
    match set.rings.as_slice() {
        [r] if r.role == Role::Outer => {
            if r.polygon.len() < 3 {
                Err("source needs at least 3 vertices".into())
            } else if !is_simple(&r.polygon) {
                Err("source is not a simple polygon".into())
            } else {
                Ok(r.polygon.to_ccw())
            }
        }
        _ => Err("source must be a single outer ring without holes".into()),
    }
}

pub fn read_target(path: &Path) -> Result<PolygonSet, CliError> {
    let set = read_shape(path).map_err(invalid_file(path))?;
    set.validate().map_err(invalid_file(path))?;
    Ok(set.canonicalized())
}

fn prepare(input: &InputArgs, cfg: &MatchConfig) -> Result<Prepared, CliError> {
    let (source, target) = match (&input.pair, &input.source, &input.target) {
        (Some(name), _, _) => {
            let (s, t) = shapes::pair(name).ok_or_else(|| {
                CliError::Invalid(format!("unknown pair `{name}`; bundled pairs: {}", shapes::PAIRS.join(", ")))
            })?;
            (s, PolygonSet::from_polygon(t))
        }
        (None, Some(s), Some(t)) => (read_source(s)?, read_target(t)?),
        _ => return Err(CliError::Invalid("give SOURCE and TARGET files or --pair".into())),
    };
    let problem = match &input.mesh {
        Some(path) => {
            let mesh = TriMesh::read_off(path).map_err(|e| CliError::Invalid(format!("{}: {e}", path.display())))?;
            MatchProblem::with_mesh(mesh, &target, cfg.lame)?
        }
        None => MatchProblem::new(&source, &target, cfg.lame)?,
    };
    Ok(Prepared { problem, target })
}

fn write(path: &Path, contents: impl AsRef<[u8]>) -> Result<(), CliError> {
    fs::write(path, contents).map_err(CliError::io(path))
}

#[derive(Serialize)]
struct CsvRow<'a> {
    iter: usize,
    area_abs: f64,
    area_fraction: f64,
    force_norm: f64,
    max_cd: f64,
    mean_cd: f64,
    flipped: usize,
    solver_status: &'a str,
}

impl<'a> From<&'a IterationRecord> for CsvRow<'a> {
    fn from(r: &'a IterationRecord) -> Self {
        Self {
            iter: r.iter,
            area_abs: r.area_abs,
            area_fraction: r.area_fraction,
            force_norm: r.force_norm,
            max_cd: r.max_cd,
            mean_cd: r.mean_cd,
            flipped: r.flipped,
            solver_status: &r.solver_status,
        }
    }
}

#[derive(Serialize)]
struct ComparisonRow<'a> {
    method: &'a str,
    iterations: usize,
    force_norm: f64,
    #[serde(rename = "max_CD")]
    max_cd: f64,
    #[serde(rename = "mean_CD")]
    mean_cd: f64,
    final_fraction: f64,
}

#[derive(Serialize)]
struct ResultDoc<'a> {
    method: &'a str,
    termination: &'a str,
    failure: Option<&'a str>,
    /// Iteration number of the returned iterate, 0 for the start.
    returned_iteration: usize,
    normalization_scale: f64,
    alpha: f64,
    beta: f64,
    /// Boundary displacement, one pair per boundary node in loop order.
    u_b: Vec<[f64; 2]>,
    /// Interior displacement in system order.
    u_i: Vec<[f64; 2]>,
    /// Boundary forces `S u_B`, same order as `u_b`.
    forces: Vec<[f64; 2]>,
    /// Displacement of every node of `mesh.off`, in file order.
    displacement: Vec<[f64; 2]>,
    initial: &'a IterationRecord,
    #[serde(rename = "final")]
    last: &'a IterationRecord,
    warnings: Vec<String>,
}

fn pairs(v: &[f64]) -> Vec<[f64; 2]> {
    v.chunks(2).map(|c| [c[0], c[1]]).collect()
}

fn node_displacements(r: &MatchResult) -> Vec<[f64; 2]> {
    let k = r.ordering.k;
    let mut out = vec![[0.0; 2]; r.mesh.num_nodes()];
    for (s, &v) in r.ordering.to_mesh.iter().enumerate() {
        let (src, i) = if s < k { (&r.u_b, s) } else { (&r.u_i, s - k) };
        out[v] = [src[2 * i], src[2 * i + 1]];
    }
    out
}

fn joint_bbox(a: &Polygon, b: &PolygonSet, c: &Polygon) -> BBox {
    let mut bb = a.bbox().expect("nonempty source");
    for other in [b.bbox(), c.bbox()].into_iter().flatten() {
        bb = bb.union(&other);
    }
    bb
}

fn write_outputs(
    dir: &Path,
    prepared: &Prepared,
    cfg: &MatchConfig,
    method: Method,
    r: &MatchResult,
) -> Result<(), CliError> {
    fs::create_dir_all(dir).map_err(CliError::io(dir))?;
    r.mesh.write_off(&dir.join("mesh.off"))?;

    let mut csv = csv::Writer::from_path(dir.join("iterations.csv"))?;
    for rec in &r.log {
        csv.serialize(CsvRow::from(rec))?;
    }
    if r.log.is_empty() {
        csv.write_record(["iter", "area_abs", "area_fraction", "force_norm", "max_cd", "mean_cd", "flipped", "solver_status"])?;
    }
    csv.flush().map_err(CliError::io(dir.join("iterations.csv")))?;

    let last = r.final_record();
    let doc = ResultDoc {
        method: method.as_str(),
        termination: r.termination.as_str(),
        failure: r.failure.as_deref(),
        returned_iteration: last.iter,
        normalization_scale: r.normalization.scale,
        alpha: r.alpha,
        beta: r.beta,
        u_b: pairs(r.u_b.as_slice()),
        u_i: pairs(r.u_i.as_slice()),
        forces: r.forces.iter().map(|f| [f.x, f.y]).collect(),
        displacement: node_displacements(r),
        initial: &r.initial,
        last,
        warnings: r.warnings.iter().map(|(i, w)| format!("iteration {i}: {w:?}")).collect(),
    };
    write(&dir.join("result.json"), serde_json::to_string_pretty(&doc)? + "\n")?;

    let source = r.source();
    let deformed = r.deformed_source();
    let bb = joint_bbox(&source, &prepared.target, &deformed);

    // Initial overlay: the pull of the area term on the undeformed source.
    let h = cfg.fd_step * r.normalization.scale;
    let g = gradient(&DeformedBoundary::undeformed(source.clone()), &prepared.target, h)?;
    let pull: Vec<Vector2<f64>> = restoring_force(&g).as_slice().chunks(2).map(|c| Vector2::new(c[0], c[1])).collect();
    let mut svg = Svg::new(bb);
    svg.set(&prepared.target, "#999999", "#444444");
    svg.polygon(&source, "#e0a030", "#b06000");
    svg.arrows(source.vertices(), &pull, arrow_scale(&pull, &bb), "#1f4fbf", "restoring force −∇area");
    svg.note(format!("start: symmetric difference {} ({}%)", r.initial.area_abs, 100.0 * r.initial.area_fraction));
    write(&dir.join("overlay_init.svg"), svg.finish())?;

    let mut svg = Svg::new(bb);
    svg.set(&prepared.target, "#999999", "#444444");
    svg.polygon(&deformed, "#e0a030", "#b06000");
    svg.arrows(deformed.vertices(), &r.forces, arrow_scale(&r.forces, &bb), "#1f4fbf", "elastic force S·u_B");
    svg.note(format!(
        "{} after iteration {}: symmetric difference {} ({}%), force norm {}, max CD {}",
        r.termination.as_str(),
        last.iter,
        last.area_abs,
        100.0 * last.area_fraction,
        last.force_norm,
        last.max_cd
    ));
    write(&dir.join("overlay_final.svg"), svg.finish())?;
    Ok(())
}

fn outcome(method: Method, r: &MatchResult) -> Outcome {
    Outcome {
        method: method.as_str().into(),
        termination: r.termination.as_str().into(),
        iterations: r.log.len(),
        alpha: r.alpha,
        failure: r.failure.clone(),
    }
}

fn report(method: Method, r: &MatchResult) {
    let last = r.final_record();
    println!(
        "{}: {} after {} iterations; fraction {}, force norm {}, max CD {}, mean CD {}, flipped {}",
        method.as_str(),
        r.termination.as_str(),
        r.log.len(),
        last.area_fraction,
        last.force_norm,
        last.max_cd,
        last.mean_cd,
        last.flipped
    );
}

fn failed(r: &MatchResult) -> bool {
    matches!(r.termination, Termination::SolverFailure | Termination::Collapse)
}

/// Runs `methods` on one prepared problem. Output goes to `out` for a single
/// method and to one subdirectory per method otherwise.
fn execute(command: &str, args: &RunArgs, methods: &[Method]) -> Result<(), CliError> {
    let mut timer = Timer::new();
    let cfg = args.config.to_config()?;
    let mut manifest = RunManifest {
        tool: env!("CARGO_PKG_NAME").into(),
        version: env!("CARGO_PKG_VERSION").into(),
        command: command.into(),
        inputs: args.input.clone(),
        config: args.config.clone(),
        timings: Vec::new(),
        outcomes: Vec::new(),
        error: None,
    };
    let prepared = prepare(&args.input, &cfg)?;
    timer.lap("setup");
    fs::create_dir_all(&args.out).map_err(CliError::io(&args.out))?;
    let write_manifest = |m: &RunManifest| write(&args.out.join("manifest.json"), serde_json::to_string_pretty(m)? + "\n");

    let mut results = Vec::new();
    for &method in methods {
        match run(&prepared.problem, &cfg, method) {
            Ok(r) => {
                timer.lap(method.as_str());
                results.push((method, r));
            }
            Err(e) => {
                timer.lap(method.as_str());
                manifest.timings = timer.stages;
                manifest.error = Some(format!("{}: {e}", method.as_str()));
                write_manifest(&manifest)?;
                return Err(e.into());
            }
        }
    }
    for (method, r) in &results {
        let dir = if methods.len() == 1 { args.out.clone() } else { args.out.join(method.as_str()) };
        write_outputs(&dir, &prepared, &cfg, *method, r)?;
        report(*method, r);
        manifest.outcomes.push(outcome(*method, r));
    }
    if methods.len() > 1 {
        let path = args.out.join("comparison.csv");
        let mut csv = csv::Writer::from_path(&path)?;
        for (method, r) in &results {
            let last = r.final_record();
            csv.serialize(ComparisonRow {
                method: method.as_str(),
                iterations: r.log.len(),
                force_norm: last.force_norm,
                max_cd: last.max_cd,
                mean_cd: last.mean_cd,
                final_fraction: last.area_fraction,
            })?;
        }
        csv.flush().map_err(CliError::io(&path))?;
    }
    timer.lap("write");
    manifest.timings = timer.stages;
    write_manifest(&manifest)?;
    let failures: Vec<String> = results
        .iter()
        .filter(|(_, r)| failed(r))
        .map(|(m, r)| format!("{}: {} ({})", m.as_str(), r.termination.as_str(), r.failure.as_deref().unwrap_or("area collapsed")))
        .collect();
    if failures.is_empty() {
        Ok(())
    } else {
        Err(CliError::Numerical(failures.join("; ")))
    }
}

pub fn cmd_match(args: &RunArgs) -> Result<(), CliError> {
    execute("match", args, &[Method::Symdiff])
}

pub fn cmd_compare(args: &RunArgs) -> Result<(), CliError> {
    execute("compare", args, &[Method::Symdiff, Method::ClosestPoint])
}

pub fn cmd_replay(manifest: &Path, out: &Path) -> Result<(), CliError> {
    let text = fs::read_to_string(manifest).map_err(CliError::io(manifest))?;
    let m: RunManifest = serde_json::from_str(&text).map_err(|e| CliError::Invalid(format!("{}: {e}", manifest.display())))?;
    let args = RunArgs {
        input: m.inputs,
        config: m.config,
        out: out.to_path_buf(),
    };
    match m.command.as_str() {
        "match" => cmd_match(&args),
        "compare" => cmd_compare(&args),
        other => Err(CliError::Invalid(format!("cannot replay command `{other}`"))),
    }
}
