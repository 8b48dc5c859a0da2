//! `svlab`: mesh generation, Clough-Tocher refinement, quality audits,
//! inf-sup constants, and Stokes benchmark runs, all emitting CSV.
//!
//! Every run prints one header line `# svlab <version> <resolved params>`
//! before the CSV so reruns are self-describing; identical arguments produce
//! byte-identical output (faer is pinned to one thread).

use std::fmt::Write as _;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use svlab::infsup::{local_infsup, refinement_study, InfSupOptions, PressurePair};
use svlab::mesh::io::{read_mesh, write_mesh};
use svlab::stokes::{
    compare_strategies, default_tau, solve_stokes, ManufacturedSolution, SolveReport,
    StokesOptions,
};
use svlab::triangle::{analyze_triangle, check_lac};
use svlab::{
    clough_tocher_refine, generate_shishkin_mesh, generate_unit_square_mesh, Diagonal, Mesh2D,
    Point2, SplitStrategy,
};

const VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Parser)]
#[command(name = "svlab", version, about = "Scott-Vogelius anisotropic mesh laboratory")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a mesh file (unit-square or Shishkin family).
    Generate(GenerateArgs),
    /// Clough-Tocher refine a mesh file one or more times.
    Refine(RefineArgs),
    /// Per-cell quality CSV (edge lengths, angles, aspect ratio, LAC).
    Quality(QualityArgs),
    /// Inf-sup constants under repeated refinement of a 2x2-style mesh.
    Infsup(InfsupArgs),
    /// Macro-element inf-sup constant of a single triangle.
    InfsupLocal(InfsupLocalArgs),
    /// One Stokes solve of the boundary-layer benchmark.
    Stokes(StokesArgs),
    /// Error-vs-N sweep comparing barycenter and incenter refinement.
    Convergence(ConvergenceArgs),
}

#[derive(Args)]
#[command(group = clap::ArgGroup::new("family").required(true).args(["unit_square", "shishkin"]))]
struct GenerateArgs {
    /// Uniform n x n unit-square triangulation.
    #[arg(long, value_name = "N")]
    unit_square: Option<usize>,
    /// Shishkin mesh with N intervals per direction (requires --tau).
    #[arg(long, value_name = "N", requires = "tau")]
    shishkin: Option<usize>,
    /// Shishkin transition point in (0, 1).
    #[arg(long)]
    tau: Option<f64>,
    /// Diagonal direction for unit-square cells.
    #[arg(long, default_value = "right-up")]
    diagonal: Diagonal,
    /// Output mesh file (svmesh format).
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct RefineArgs {
    #[arg(long = "in")]
    input: PathBuf,
    #[arg(long)]
    strategy: SplitStrategy,
    #[arg(long, default_value_t = 1)]
    levels: usize,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct QualityArgs {
    #[arg(long = "in")]
    input: PathBuf,
    /// Margin (radians) for the per-cell large-angle-condition column.
    #[arg(long, default_value_t = std::f64::consts::FRAC_PI_6)]
    lac_delta: f64,
    /// CSV destination (defaults to stdout).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct InfsupArgs {
    /// Initial unit-square subdivision.
    #[arg(long, default_value_t = 2)]
    n0: usize,
    #[arg(long)]
    strategy: SplitStrategy,
    #[arg(long)]
    levels: usize,
    #[arg(long, default_value = "sv")]
    pair: PressurePair,
    /// Matrix-free eigensolver (required beyond 1e5 pressure dofs).
    #[arg(long)]
    iterative: bool,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct InfsupLocalArgs {
    /// Triangle vertices: x1 y1 x2 y2 x3 y3.
    #[arg(
        num_args = 6,
        value_name = "COORD",
        allow_negative_numbers = true,
        required = true
    )]
    coords: Vec<f64>,
    #[arg(long, default_value = "incenter")]
    strategy: SplitStrategy,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct StokesArgs {
    /// Shishkin N (mutually exclusive with --mesh).
    #[arg(long = "N", conflicts_with = "mesh", required_unless_present = "mesh")]
    n: Option<usize>,
    /// Boundary-layer width of the manufactured solution.
    #[arg(long, default_value_t = 0.01)]
    eps: f64,
    /// Shishkin transition point; defaults to 3 eps log10(1/eps).
    #[arg(long)]
    tau: Option<f64>,
    #[arg(long, default_value_t = 1.0)]
    nu: f64,
    /// Refinement applied to the generated Shishkin mesh.
    #[arg(long, default_value = "incenter")]
    strategy: SplitStrategy,
    /// Solve on this mesh file as-is instead of generating one.
    #[arg(long)]
    mesh: Option<PathBuf>,
    /// Quadrature degree for load vector and error norms.
    #[arg(long, default_value_t = 10)]
    quad_degree: usize,
    /// Write stiffness/divergence/mass in triplet text form to a directory.
    #[arg(long)]
    dump_matrices: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ConvergenceArgs {
    /// Comma-separated Shishkin sizes, e.g. 8,16,32.
    #[arg(long = "N-list", value_delimiter = ',', required = true)]
    n_list: Vec<usize>,
    #[arg(long, default_value_t = 0.01)]
    eps: f64,
    #[arg(long)]
    tau: Option<f64>,
    #[arg(long, default_value_t = 1.0)]
    nu: f64,
    /// `both`, `barycenter`, or `incenter`.
    #[arg(long, default_value = "both")]
    strategies: String,
    #[arg(long, default_value_t = 10)]
    quad_degree: usize,
    #[arg(long)]
    out: Option<PathBuf>,
}

fn main() -> ExitCode {
    svlab::linalg::set_sequential();
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        // downstream consumer (head, grep -m) closed the pipe; not a failure
        Err(svlab::Error::Io { source, .. })
            if source.kind() == std::io::ErrorKind::BrokenPipe =>
        {
            ExitCode::SUCCESS
        }
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::FAILURE
        }
    }
}

/// Output sink: a file when `--out` is given, stdout otherwise.
fn sink(out: Option<&Path>) -> svlab::Result<Box<dyn Write>> {
    match out {
        Some(path) => {
            let f = std::fs::File::create(path).map_err(|source| svlab::Error::Io {
                path: path.display().to_string(),
                source,
            })?;
            Ok(Box::new(std::io::BufWriter::new(f)))
        }
        None => Ok(Box::new(std::io::stdout().lock())),
    }
}

fn flush(mut w: Box<dyn Write>) -> svlab::Result<()> {
    w.flush().map_err(|source| svlab::Error::Io {
        path: "<output>".into(),
        source,
    })
}

fn header(subcommand: &str, params: &[(&str, String)]) -> String {
    let mut line = format!("# svlab {VERSION} {subcommand}");
    for (k, v) in params {
        let _ = write!(line, " {k}={v}");
    }
    line
}

fn run(command: Command) -> svlab::Result<()> {
    match command {
        Command::Generate(args) => generate(args),
        Command::Refine(args) => refine(args),
        Command::Quality(args) => quality(args),
        Command::Infsup(args) => infsup(args),
        Command::InfsupLocal(args) => infsup_local(args),
        Command::Stokes(args) => stokes(args),
        Command::Convergence(args) => convergence(args),
    }
}

fn generate(args: GenerateArgs) -> svlab::Result<()> {
    let (mesh, params) = match (args.unit_square, args.shishkin) {
        (Some(n), None) => {
            let mesh = generate_unit_square_mesh(n, args.diagonal)?;
            let diag = match args.diagonal {
                Diagonal::RightUp => "right-up",
                Diagonal::LeftUp => "left-up",
            };
            (
                mesh,
                vec![
                    ("family", "unit-square".to_string()),
                    ("n", n.to_string()),
                    ("diagonal", diag.to_string()),
                ],
            )
        }
        (None, Some(n)) => {
            let tau = args.tau.expect("clap enforces --tau");
            let mesh = generate_shishkin_mesh(n, tau)?;
            (
                mesh,
                vec![
                    ("family", "shishkin".to_string()),
                    ("n", n.to_string()),
                    ("tau", tau.to_string()),
                ],
            )
        }
        _ => {
            return Err(svlab::Error::InvalidParameter(
                "exactly one of --unit-square or --shishkin is required".into(),
            ))
        }
    };
    write_mesh(&mesh, &args.out)?;
    let mut params = params;
    params.push(("out", args.out.display().to_string()));
    params.push(("vertices", mesh.vertices().len().to_string()));
    params.push(("cells", mesh.cells().len().to_string()));
    println!("{}", header("generate", &params));
    Ok(())
}

fn refine(args: RefineArgs) -> svlab::Result<()> {
    let mut mesh = read_mesh(&args.input)?;
    for _ in 0..args.levels {
        mesh = clough_tocher_refine(&mesh, args.strategy)?;
    }
    write_mesh(&mesh, &args.out)?;
    println!(
        "{}",
        header(
            "refine",
            &[
                ("in", args.input.display().to_string()),
                ("strategy", args.strategy.name().to_string()),
                ("levels", args.levels.to_string()),
                ("out", args.out.display().to_string()),
                ("cells", mesh.cells().len().to_string()),
            ],
        )
    );
    Ok(())
}

fn quality(args: QualityArgs) -> svlab::Result<()> {
    let mesh = read_mesh(&args.input)?;
    let mut w = sink(args.out.as_deref())?;
    let io_err = |source| svlab::Error::Io {
        path: "<output>".into(),
        source,
    };
    writeln!(
        w,
        "{}",
        header(
            "quality",
            &[
                ("in", args.input.display().to_string()),
                ("lac_delta", args.lac_delta.to_string()),
            ],
        )
    )
    .map_err(io_err)?;
    writeln!(w, "cell_id,h1,h2,h3,alpha_max,aspect,lac_pass").map_err(io_err)?;

    let mut max_aspect = 0.0f64;
    let mut min_angle = f64::INFINITY;
    for c in 0..mesh.cells().len() {
        let p = mesh.cell_points(c);
        let m = analyze_triangle(&p).map_err(|e| match e {
            svlab::Error::DegenerateTriangle { area, tol } => {
                svlab::Error::DegenerateCell { cell: c, area, tol }
            }
            other => other,
        })?;
        let lac = check_lac(&p, args.lac_delta)?;
        writeln!(
            w,
            "{c},{},{},{},{},{},{}",
            m.h[0], m.h[1], m.h[2], m.alpha[2], m.aspect, lac
        )
        .map_err(io_err)?;
        max_aspect = max_aspect.max(m.aspect);
        min_angle = min_angle.min(m.alpha[0]);
    }
    // summary row: min angle in the angle column, max aspect in the aspect column
    writeln!(w, "summary,,,,{min_angle},{max_aspect},").map_err(io_err)?;
    flush(w)
}

fn infsup(args: InfsupArgs) -> svlab::Result<()> {
    let opts = InfSupOptions {
        iterative: args.iterative,
        ..Default::default()
    };
    let report = refinement_study(args.n0, args.strategy, args.levels, args.pair, &opts)?;
    let mut w = sink(args.out.as_deref())?;
    let io_err = |source| svlab::Error::Io {
        path: "<output>".into(),
        source,
    };
    writeln!(
        w,
        "{}",
        header(
            "infsup",
            &[
                ("n0", args.n0.to_string()),
                ("strategy", args.strategy.name().to_string()),
                ("levels", args.levels.to_string()),
                ("pair", args.pair.name().to_string()),
                ("iterative", args.iterative.to_string()),
            ],
        )
    )
    .map_err(io_err)?;
    writeln!(w, "level,beta,aspect,rate").map_err(io_err)?;
    for row in &report.rows {
        let rate = row.rate.map(|r| r.to_string()).unwrap_or_default();
        writeln!(w, "{},{},{},{rate}", row.level, row.beta, row.aspect).map_err(io_err)?;
    }
    flush(w)
}

fn infsup_local(args: InfsupLocalArgs) -> svlab::Result<()> {
    let c = &args.coords;
    let p = [
        Point2::new(c[0], c[1]),
        Point2::new(c[2], c[3]),
        Point2::new(c[4], c[5]),
    ];
    let metrics = analyze_triangle(&p)?;
    let result = local_infsup(&p, args.strategy)?;
    let mut w = sink(args.out.as_deref())?;
    let io_err = |source| svlab::Error::Io {
        path: "<output>".into(),
        source,
    };
    writeln!(
        w,
        "{}",
        header(
            "infsup-local",
            &[
                (
                    "triangle",
                    format!("{},{},{},{},{},{}", c[0], c[1], c[2], c[3], c[4], c[5]),
                ),
                ("strategy", args.strategy.name().to_string()),
            ],
        )
    )
    .map_err(io_err)?;
    writeln!(w, "beta_local,aspect").map_err(io_err)?;
    writeln!(w, "{},{}", result.beta_local, metrics.aspect).map_err(io_err)?;
    flush(w)
}

fn write_solve_report(
    w: &mut dyn Write,
    head: String,
    report: &SolveReport,
) -> std::io::Result<()> {
    writeln!(w, "{head}")?;
    writeln!(
        w,
        "dofs_v,dofs_p,l2_vel,h1_vel,l2_prs,linf_div,h1_norm,solver_residual,pcg_iterations"
    )?;
    writeln!(
        w,
        "{},{},{},{},{},{},{},{},{}",
        report.velocity_dofs,
        report.pressure_dofs,
        report.l2_vel,
        report.h1_vel,
        report.l2_prs,
        report.linf_div,
        report.h1_norm,
        report.solver_residual,
        report.pcg_iterations
    )
}

fn stokes(args: StokesArgs) -> svlab::Result<()> {
    let exact = ManufacturedSolution::new(args.eps, args.nu)?;
    let opts = StokesOptions {
        quad_degree: args.quad_degree,
        dump_matrices: args.dump_matrices.clone(),
        ..Default::default()
    };
    let (mesh, mesh_desc, tau): (Mesh2D, String, Option<f64>) = match (&args.mesh, args.n) {
        (Some(path), None) => (read_mesh(path)?, path.display().to_string(), None),
        (None, Some(n)) => {
            let tau = args.tau.unwrap_or_else(|| default_tau(args.eps));
            let parent = generate_shishkin_mesh(n, tau)?;
            let mesh = clough_tocher_refine(&parent, args.strategy)?;
            (mesh, format!("shishkin-N{n}-refined"), Some(tau))
        }
        _ => unreachable!("clap enforces exactly one of --N / --mesh"),
    };
    let solution = solve_stokes(&mesh, &exact, &opts)?;

    let mut params = vec![
        ("mesh", mesh_desc),
        ("eps", args.eps.to_string()),
        ("nu", args.nu.to_string()),
        ("strategy", args.strategy.name().to_string()),
        ("quad_degree", args.quad_degree.to_string()),
    ];
    if let Some(tau) = tau {
        params.insert(1, ("tau", tau.to_string()));
    }
    let mut w = sink(args.out.as_deref())?;
    write_solve_report(&mut w, header("stokes", &params), &solution.report).map_err(|source| {
        svlab::Error::Io {
            path: "<output>".into(),
            source,
        }
    })?;
    flush(w)
}

fn convergence(args: ConvergenceArgs) -> svlab::Result<()> {
    let strategies: Vec<SplitStrategy> = match args.strategies.as_str() {
        "both" => vec![SplitStrategy::Barycenter, SplitStrategy::Incenter],
        name => vec![name.parse()?],
    };
    let tau = args.tau.unwrap_or_else(|| default_tau(args.eps));
    let opts = StokesOptions {
        quad_degree: args.quad_degree,
        ..Default::default()
    };
    let rows = compare_strategies(&args.n_list, args.eps, tau, args.nu, &strategies, &opts)?;

    let mut w = sink(args.out.as_deref())?;
    let io_err = |source| svlab::Error::Io {
        path: "<output>".into(),
        source,
    };
    let n_list = args
        .n_list
        .iter()
        .map(|n| n.to_string())
        .collect::<Vec<_>>()
        .join(",");
    writeln!(
        w,
        "{}",
        header(
            "convergence",
            &[
                ("N_list", n_list),
                ("eps", args.eps.to_string()),
                ("tau", tau.to_string()),
                ("nu", args.nu.to_string()),
                ("strategies", args.strategies.clone()),
                ("quad_degree", args.quad_degree.to_string()),
            ],
        )
    )
    .map_err(io_err)?;
    writeln!(
        w,
        "N,strategy,dofs_v,dofs_p,l2_vel,h1_vel,l2_prs,linf_div,max_aspect"
    )
    .map_err(io_err)?;
    for r in rows {
        writeln!(
            w,
            "{},{},{},{},{},{},{},{},{}",
            r.n,
            r.strategy.name(),
            r.velocity_dofs,
            r.pressure_dofs,
            r.l2_vel,
            r.h1_vel,
            r.l2_prs,
            r.linf_div,
            r.max_aspect
        )
        .map_err(io_err)?;
    }
    flush(w)
}
