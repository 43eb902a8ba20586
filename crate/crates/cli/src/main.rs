use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Duration;

use clap::{Args, Parser, Subcommand};

use dualmatch::c2f::{run_hierarchy, LevelFeatures, ResolutionLevel};
use dualmatch::io::{self, IlpSolutionFile, MatchSolutionFile, Manifest};
use dualmatch::mesh::{shapes, FeatureMatrix, Mesh};
use dualmatch::primal::{exact_solve, ExactConfig, ExactResult};
use dualmatch::product::{build_matching, decode_matching, verify_solution};
use dualmatch::solver::{solve, SolveConfig, SolveError, SolveMode, SolveOutcome};
use dualmatch::IlpInstance;

const EXIT_CERTIFIED: u8 = 0;
const EXIT_UNCERTIFIED: u8 = 2;
const EXIT_INFEASIBLE: u8 = 3;
const EXIT_INPUT: u8 = 4;

#[derive(Parser)]
#[command(name = "dualmatch", version, about = "Shape matching and 0-1 equality programs via BDD dual ascent")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Match two closed meshes.
    Match(MatchArgs),
    /// Solve a 0-1 program given as an LP file.
    SolveIlp(SolveIlpArgs),
    /// Write the matching program of a mesh pair as an LP file.
    ExportLp(ExportLpArgs),
    /// Check a solution against an LP file.
    Verify(VerifyArgs),
    /// Coarse-to-fine matching over a hierarchy manifest.
    C2f(C2fArgs),
    /// Exact branch-and-bound solve (small instances).
    Oracle(OracleArgs),
    /// Write a synthetic mesh and its position features.
    MakeFixture(FixtureArgs),
    /// Write a subdivided sphere hierarchy with a manifest.
    MakeHierarchy(HierarchyArgs),
}

#[derive(Args, Clone)]
struct SolverArgs {
    /// Dual ascent mode: hybrid or mma-only.
    #[arg(long, default_value = "hybrid")]
    mode: SolveMode,
    /// Maximal variables per diagram before splitting (0 disables).
    #[arg(long, default_value_t = 128)]
    chunk_size: usize,
    /// Worker threads (0 = all cores).
    #[arg(long, default_value_t = 0)]
    threads: usize,
    #[arg(long, default_value_t = 500)]
    max_iterations: usize,
    #[arg(long, default_value_t = 600.0)]
    max_seconds: f64,
    /// Stop when the relative dual improvement stays below this.
    #[arg(long, default_value_t = 1e-7)]
    tolerance: f64,
    /// Initial fraction of agreeing variables fixed during rounding.
    #[arg(long, default_value_t = 0.9)]
    fixing_fraction: f64,
    /// Seconds allowed for each exact solve during rounding.
    #[arg(long, default_value_t = 60.0)]
    exact_time_limit: f64,
    /// L-BFGS history length.
    #[arg(long, default_value_t = 10)]
    memory: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Convergence log (CSV).
    #[arg(long)]
    log: Option<PathBuf>,
    /// Leave the time column of the log empty.
    #[arg(long)]
    no_log_time: bool,
}

impl SolverArgs {
    fn config(&self) -> SolveConfig {
        let mut cfg = SolveConfig {
            mode: self.mode,
            chunk_size: self.chunk_size,
            threads: self.threads,
            max_iterations: self.max_iterations,
            max_seconds: self.max_seconds,
            dual_tolerance: self.tolerance,
            fixing_fraction: self.fixing_fraction,
            exact_time_limit: self.exact_time_limit,
            seed: self.seed,
            ..SolveConfig::default()
        };
        cfg.step.memory = self.memory;
        cfg
    }

    fn write_log(&self, out: &SolveOutcome) -> Result<(), Failure> {
        if let Some(path) = &self.log {
            io::write_convergence_log(&out.log, path, !self.no_log_time)?;
        }
        Ok(())
    }
}

#[derive(Args)]
struct PairArgs {
    mesh_a: PathBuf,
    mesh_b: PathBuf,
    /// Features of the first mesh (DMF1 or CSV); vertex positions if omitted.
    #[arg(long)]
    features_a: Option<PathBuf>,
    #[arg(long)]
    features_b: Option<PathBuf>,
}

#[derive(Args)]
struct MatchArgs {
    #[command(flatten)]
    pair: PairArgs,
    #[arg(long)]
    out: PathBuf,
    #[command(flatten)]
    solver: SolverArgs,
}

#[derive(Args)]
struct SolveIlpArgs {
    lp: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[command(flatten)]
    solver: SolverArgs,
}

#[derive(Args)]
struct ExportLpArgs {
    #[command(flatten)]
    pair: PairArgs,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct VerifyArgs {
    lp: PathBuf,
    /// Solution JSON written by solve-ilp, oracle or match.
    solution: PathBuf,
}

#[derive(Args)]
struct C2fArgs {
    manifest: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// Ring sizes tried per level, in order.
    #[arg(long, value_delimiter = ',', default_value = "2,3")]
    rings: Vec<usize>,
    /// Per-level summary (JSON).
    #[arg(long)]
    report: Option<PathBuf>,
    #[command(flatten)]
    solver: SolverArgs,
}

#[derive(Args)]
struct OracleArgs {
    lp: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 60.0)]
    time_limit: f64,
    /// Refuse instances with more variables than this.
    #[arg(long, default_value_t = 2000)]
    max_vars: usize,
}

#[derive(Args)]
struct FixtureArgs {
    /// tetra, octa, icosa, icosphere:<level>, uv:<slices>:<stacks>, torus:<major>:<minor>
    shape: String,
    /// Output stem; writes <stem>.off and <stem>.dmf.
    #[arg(long)]
    out: PathBuf,
    /// Rotation about z (radians), applied before `rotate_x`.
    #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
    rotate_z: f64,
    #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
    rotate_x: f64,
}

#[derive(Args)]
struct HierarchyArgs {
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 2)]
    levels: usize,
    /// Rotation about z (radians) of the second hierarchy.
    #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
    rotate: f64,
}

#[derive(Debug)]
struct Failure {
    code: u8,
    message: String,
}

impl Failure {
    fn input(message: impl ToString) -> Self {
        Failure {
            code: EXIT_INPUT,
            message: message.to_string(),
        }
    }
}

impl From<io::IoError> for Failure {
    fn from(e: io::IoError) -> Self {
        Failure::input(e)
    }
}

impl From<SolveError> for Failure {
    fn from(e: SolveError) -> Self {
        Failure::input(e)
    }
}

fn write_json<T: serde::Serialize>(value: &T, path: &Path) -> Result<(), Failure> {
    let mut s = serde_json::to_string_pretty(value).map_err(Failure::input)?;
    s.push('\n');
    std::fs::write(path, s).map_err(|e| Failure::input(format!("{}: {e}", path.display())))
}

fn load_pair(p: &PairArgs) -> Result<(Mesh, Mesh, FeatureMatrix, FeatureMatrix), Failure> {
    let a = io::read_mesh(&p.mesh_a)?;
    let b = io::read_mesh(&p.mesh_b)?;
    let fa = match &p.features_a {
        Some(path) => io::read_features(path)?,
        None => FeatureMatrix::from_positions(&a),
    };
    let fb = match &p.features_b {
        Some(path) => io::read_features(path)?,
        None => FeatureMatrix::from_positions(&b),
    };
    Ok((a, b, fa, fb))
}

fn outcome_code(out: &SolveOutcome) -> u8 {
    match (&out.assignment, out.is_certified()) {
        (Some(_), true) => EXIT_CERTIFIED,
        (Some(_), false) => EXIT_UNCERTIFIED,
        (None, _) => EXIT_INFEASIBLE,
    }
}

fn summary(out: &SolveOutcome) {
    match &out.report {
        Some(r) => eprintln!(
            "primal {:.9} dual {:.9} gap {:.3e} {} ({} iterations, {} quasi-Newton steps)",
            r.primal_objective,
            r.best_dual,
            r.primal_dual_gap,
            if r.certified { "certified" } else { "not certified" },
            out.iterations,
            out.qn_steps
        ),
        None => eprintln!("no feasible solution found; best dual {:.9}", out.best_dual),
    }
}

fn cmd_match(args: &MatchArgs) -> Result<u8, Failure> {
    let (a, b, fa, fb) = load_pair(&args.pair)?;
    let (ps, program) = build_matching(&a, &b, &fa, &fb)?;
    let out = solve(&program.instance, &args.solver.config())?;
    args.solver.write_log(&out)?;
    summary(&out);
    if let (Some(x), Some(r)) = (&out.assignment, &out.report) {
        let m = decode_matching(x, &ps, &program, &fa, &fb).map_err(Failure::input)?;
        let file = MatchSolutionFile::new(r.primal_objective, r.best_dual, r.primal_dual_gap, r.certified, ps.len(), &m);
        write_json(&file, &args.out)?;
    }
    Ok(outcome_code(&out))
}

fn ilp_file(instance: &IlpInstance, out: &SolveOutcome) -> IlpSolutionFile {
    IlpSolutionFile {
        feasible: out.assignment.is_some(),
        objective: out.report.map(|r| r.primal_objective),
        best_dual: Some(out.best_dual),
        gap: out.report.map(|r| r.primal_dual_gap),
        certified: out.is_certified(),
        num_vars: instance.num_vars(),
        ones: out
            .assignment
            .as_ref()
            .map(|x| (0..x.len()).filter(|&i| x[i]).collect())
            .unwrap_or_default(),
    }
}

fn cmd_solve_ilp(args: &SolveIlpArgs) -> Result<u8, Failure> {
    let instance = io::read_lp(&args.lp)?;
    let out = solve(&instance, &args.solver.config())?;
    args.solver.write_log(&out)?;
    summary(&out);
    write_json(&ilp_file(&instance, &out), &args.out)?;
    Ok(outcome_code(&out))
}

fn cmd_export_lp(args: &ExportLpArgs) -> Result<u8, Failure> {
    let (a, b, fa, fb) = load_pair(&args.pair)?;
    let (ps, program) = build_matching(&a, &b, &fa, &fb)?;
    io::write_lp(&program.instance, &args.out)?;
    eprintln!(
        "{} variables, {} rows ({} boundary)",
        ps.len(),
        program.instance.num_constraints(),
        program.layout.boundary.len()
    );
    Ok(EXIT_CERTIFIED)
}

fn cmd_verify(args: &VerifyArgs) -> Result<u8, Failure> {
    let instance = io::read_lp(&args.lp)?;
    let text = std::fs::read_to_string(&args.solution)
        .map_err(|e| Failure::input(format!("{}: {e}", args.solution.display())))?;
    let ones: Vec<usize> = if let Ok(f) = serde_json::from_str::<IlpSolutionFile>(&text) {
        f.ones
    } else if let Ok(f) = serde_json::from_str::<MatchSolutionFile>(&text) {
        f.selected
    } else {
        return Err(Failure::input(format!("{}: not a solution file", args.solution.display())));
    };
    let mut x = vec![false; instance.num_vars()];
    for i in ones {
        if i >= x.len() {
            return Err(Failure::input(format!("solution sets x{i} but the instance has {} variables", x.len())));
        }
        x[i] = true;
    }
    let rows = instance
        .rows()
        .ok_or_else(|| Failure::input("instance rows unavailable"))?
        .into_iter()
        .cloned()
        .collect::<Vec<_>>();
    let report = verify_solution(&x, &rows, None).map_err(Failure::input)?;
    if report.is_ok() {
        println!("ok: all {} rows satisfied, objective {:?}", rows.len(), instance.objective(&x));
        Ok(EXIT_CERTIFIED)
    } else {
        println!("violated {} of {} rows: {:?}", report.violated.len(), rows.len(), report.violated);
        Ok(EXIT_INFEASIBLE)
    }
}

fn load_hierarchy(manifest: &Manifest) -> Result<(Vec<ResolutionLevel>, Vec<ResolutionLevel>, Vec<LevelFeatures>), Failure> {
    let mut lm = Vec::new();
    let mut ln = Vec::new();
    let mut feats = Vec::new();
    for l in &manifest.levels {
        let proj = |p: &Option<PathBuf>| -> Result<Vec<usize>, Failure> {
            Ok(match p {
                Some(path) => io::read_projection(path)?,
                None => Vec::new(),
            })
        };
        lm.push(ResolutionLevel {
            mesh: io::read_mesh(&l.mesh_a)?,
            projection: proj(&l.projection_a)?,
        });
        ln.push(ResolutionLevel {
            mesh: io::read_mesh(&l.mesh_b)?,
            projection: proj(&l.projection_b)?,
        });
        feats.push(LevelFeatures {
            m: io::read_features(&l.features_a)?,
            n: io::read_features(&l.features_b)?,
        });
    }
    Ok((lm, ln, feats))
}

fn cmd_c2f(args: &C2fArgs) -> Result<u8, Failure> {
    let manifest = io::read_manifest(&args.manifest)?;
    let (lm, ln, feats) = load_hierarchy(&manifest)?;
    let cfg = args.solver.config();
    let result = match run_hierarchy(&lm, &ln, &feats, &cfg, &args.rings) {
        Ok(r) => r,
        Err(e @ dualmatch::c2f::HierarchyError::NoSolution { .. }) => {
            eprintln!("{e}");
            return Ok(EXIT_INFEASIBLE);
        }
        Err(e) => return Err(Failure::input(e)),
    };
    for l in &result.levels {
        eprintln!(
            "level {}: {} variables, ring {:?}, gap {:?}",
            l.level,
            l.num_variables,
            l.ring,
            l.report.map(|r| r.primal_dual_gap)
        );
    }
    if let Some(path) = &args.report {
        write_json(&result.levels, path)?;
    }
    let last = result.levels.last().and_then(|l| l.report).expect("final level solved");
    let file = MatchSolutionFile::new(
        last.primal_objective,
        last.best_dual,
        last.primal_dual_gap,
        last.certified,
        result.space.len(),
        &result.matching,
    );
    write_json(&file, &args.out)?;
    let all_certified = result.levels.iter().all(|l| l.report.is_some_and(|r| r.certified));
    Ok(if all_certified { EXIT_CERTIFIED } else { EXIT_UNCERTIFIED })
}

fn cmd_oracle(args: &OracleArgs) -> Result<u8, Failure> {
    let instance = io::read_lp(&args.lp)?;
    if instance.num_vars() > args.max_vars {
        return Err(Failure::input(format!(
            "{} variables exceed --max-vars {}",
            instance.num_vars(),
            args.max_vars
        )));
    }
    let cfg = ExactConfig {
        time_limit: Duration::from_secs_f64(args.time_limit),
        ..ExactConfig::default()
    };
    let (x, objective, code) = match exact_solve(&instance, &cfg) {
        ExactResult::Optimal { x, objective } => (Some(x), Some(objective), EXIT_CERTIFIED),
        ExactResult::TimedOut { incumbent: Some((x, o)) } => (Some(x), Some(o), EXIT_UNCERTIFIED),
        ExactResult::TimedOut { incumbent: None } | ExactResult::Infeasible => (None, None, EXIT_INFEASIBLE),
    };
    let file = IlpSolutionFile {
        feasible: x.is_some(),
        objective,
        best_dual: None,
        gap: None,
        certified: code == EXIT_CERTIFIED,
        num_vars: instance.num_vars(),
        ones: x.map(|x| (0..x.len()).filter(|&i| x[i]).collect()).unwrap_or_default(),
    };
    write_json(&file, &args.out)?;
    match objective {
        Some(o) => eprintln!("optimum {o:?}"),
        None => eprintln!("infeasible or no solution within the time limit"),
    }
    Ok(code)
}

fn parse_shape(spec: &str) -> Result<Mesh, Failure> {
    let parts: Vec<&str> = spec.split(':').collect();
    let num = |i: usize| -> Result<usize, Failure> {
        parts
            .get(i)
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| Failure::input(format!("shape '{spec}': missing or invalid parameter {i}")))
    };
    Ok(match parts[0] {
        "tetra" => shapes::tetrahedron(),
        "octa" => shapes::octahedron(),
        "icosa" => shapes::icosahedron(),
        "icosphere" => shapes::icosphere(num(1)?),
        "uv" => {
            let (s, t) = (num(1)?, num(2)?);
            if s < 3 || t < 2 {
                return Err(Failure::input("uv sphere needs at least 3 slices and 2 stacks"));
            }
            shapes::uv_sphere(s, t)
        }
        "torus" => {
            let (a, b) = (num(1)?, num(2)?);
            if a < 3 || b < 3 {
                return Err(Failure::input("torus needs at least 3x3 samples"));
            }
            shapes::torus(a, b)
        }
        other => return Err(Failure::input(format!("unknown shape '{other}'"))),
    })
}

fn rotate(mesh: &mut Mesh, about_z: f64, about_x: f64) {
    for p in &mut mesh.vertices {
        let (x, y) = (about_z.cos() * p[0] - about_z.sin() * p[1], about_z.sin() * p[0] + about_z.cos() * p[1]);
        let (y, z) = (about_x.cos() * y - about_x.sin() * p[2], about_x.sin() * y + about_x.cos() * p[2]);
        *p = [x, y, z];
    }
}

fn cmd_make_fixture(args: &FixtureArgs) -> Result<u8, Failure> {
    let mut mesh = parse_shape(&args.shape)?;
    rotate(&mut mesh, args.rotate_z, args.rotate_x);
    io::write_mesh(&mesh, &args.out.with_extension("off"))?;
    io::write_features(&FeatureMatrix::from_positions(&mesh), &args.out.with_extension("dmf"))?;
    Ok(EXIT_CERTIFIED)
}

fn cmd_make_hierarchy(args: &HierarchyArgs) -> Result<u8, Failure> {
    if args.levels == 0 {
        return Err(Failure::input("need at least one level"));
    }
    std::fs::create_dir_all(&args.out).map_err(|e| Failure::input(format!("{}: {e}", args.out.display())))?;
    let mut mesh = shapes::icosahedron();
    let mut levels = Vec::new();
    for l in 0..args.levels {
        let mut projection = None;
        if l > 0 {
            let (fine, proj) = shapes::subdivide_sphere(&mesh);
            mesh = fine;
            projection = Some(proj);
        }
        let mut rotated = mesh.clone();
        rotate(&mut rotated, args.rotate, 0.0);
        let name = |s: &str| PathBuf::from(format!("{s}{l}"));
        for (stem, m) in [("a", &mesh), ("b", &rotated)] {
            io::write_mesh(m, &args.out.join(name(stem).with_extension("off")))?;
            io::write_features(&FeatureMatrix::from_positions(m), &args.out.join(name(stem).with_extension("dmf")))?;
            if let Some(p) = &projection {
                io::write_projection(p, &args.out.join(format!("{stem}{l}.proj")))?;
            }
        }
        levels.push(io::LevelPaths {
            mesh_a: name("a").with_extension("off"),
            mesh_b: name("b").with_extension("off"),
            features_a: name("a").with_extension("dmf"),
            features_b: name("b").with_extension("dmf"),
            projection_a: projection.as_ref().map(|_| format!("a{l}.proj").into()),
            projection_b: projection.as_ref().map(|_| format!("b{l}.proj").into()),
        });
    }
    io::write_manifest(&Manifest { levels }, &args.out.join("hierarchy.txt"))?;
    Ok(EXIT_CERTIFIED)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { EXIT_INPUT } else { 0 });
        }
    };
    let result = match &cli.command {
        Command::Match(a) => cmd_match(a),
        Command::SolveIlp(a) => cmd_solve_ilp(a),
        Command::ExportLp(a) => cmd_export_lp(a),
        Command::Verify(a) => cmd_verify(a),
        Command::C2f(a) => cmd_c2f(a),
        Command::Oracle(a) => cmd_oracle(a),
        Command::MakeFixture(a) => cmd_make_fixture(a),
        Command::MakeHierarchy(a) => cmd_make_hierarchy(a),
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}
