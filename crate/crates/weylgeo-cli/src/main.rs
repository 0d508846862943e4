//! Four standard experiments over chart files, emitting JSON reports.
//!
//! Exit codes: 0 on success, 1 when the mathematics fails (residual over
//! threshold, non-Einstein verdict, solver non-convergence), 2 for usage or
//! input errors. Reports are deterministic for a fixed seed; pass
//! `--no-meta` to drop the timestamp block and get byte-identical output.

use std::fmt::Display;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use nalgebra::DVector;
use serde::Serialize;

use weylgeo::expr::ScalarField;
use weylgeo::toda::{
    observed_order, read_grid, toda_solve, write_grid, ConvergenceReport, SolveOptions,
    SolveOutcome, SweepMode, TodaGrid,
};
use weylgeo::{
    bracket_closure, classify_holonomy, einstein_scan, framed_curvature_generators,
    gauge_metric_at, metric_compatibility_residual, no_go_scan, symmetry_failure_residual,
    uniform_points, wedge_as_endo, weyl_christoffels_at, ConformalProductChart, EinsteinReport,
    GaugeChoice,
};

#[derive(Parser)]
#[command(name = "weylgeo", version, about = "Weyl geometry on conformal product charts")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Check connection identities at seeded sample points
    Identities(IdentitiesArgs),
    /// Generate, close, and classify the holonomy algebra
    Holonomy(HolonomyArgs),
    /// Scan the Einstein condition over sample points
    Einstein(EinsteinArgs),
    /// Solve the warp equation on a grid with Dirichlet boundary data
    Toda(TodaArgs),
}

#[derive(Args)]
struct CommonArgs {
    /// Chart description file (JSON)
    #[arg(long)]
    chart: PathBuf,
    /// Seed for the sample generator (ChaCha12; fixes all sample points)
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Number of sample points
    #[arg(long, default_value_t = 100)]
    samples: usize,
    /// Residual threshold for the pass verdict
    #[arg(long, default_value_t = 1e-8)]
    tol: f64,
    /// Lower corner of the sampling box (all coordinates)
    #[arg(long, default_value_t = -0.9, allow_hyphen_values = true)]
    lo: f64,
    /// Upper corner of the sampling box
    #[arg(long, default_value_t = 0.9, allow_hyphen_values = true)]
    hi: f64,
    /// Write the report here instead of stdout
    #[arg(long)]
    out: Option<PathBuf>,
    /// Cap the worker thread count
    #[arg(long)]
    threads: Option<usize>,
    /// Omit the metadata block for byte-identical reports
    #[arg(long)]
    no_meta: bool,
}

#[derive(Args)]
struct IdentitiesArgs {
    #[command(flatten)]
    common: CommonArgs,
}

#[derive(Args)]
struct HolonomyArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// Relative rank threshold for the bracket closure
    #[arg(long, default_value_t = 1e-9)]
    rank_tol: f64,
    /// Extra sample points whose curvature is transported to the base
    /// (default: curvature at the base point only)
    #[arg(long, default_value_t = 0)]
    transported: usize,
}

#[derive(Args)]
struct EinsteinArgs {
    #[command(flatten)]
    common: CommonArgs,
}

#[derive(Clone, Copy, ValueEnum)]
enum SweepArg {
    Lex,
    RedBlack,
}

#[derive(Args)]
struct TodaArgs {
    /// Grid shape N1,N2,N3,N4
    #[arg(long, value_delimiter = ',', default_values_t = vec![9, 9, 9, 9])]
    shape: Vec<usize>,
    /// Uniform node spacing
    #[arg(long, default_value_t = 0.125)]
    spacing: f64,
    /// First node coordinate on every axis
    #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
    origin: f64,
    /// Dirichlet data: expression in x1..x4, or @FILE naming a grid sidecar
    #[arg(long)]
    boundary: String,
    /// Relaxation factor, 0 < omega < 2
    #[arg(long, default_value_t = 1.5)]
    omega: f64,
    /// Residual threshold for convergence
    #[arg(long, default_value_t = 1e-8)]
    tol: f64,
    /// Sweep limit
    #[arg(long, default_value_t = 20000)]
    max_iters: usize,
    /// Node ordering within a sweep
    #[arg(long, value_enum, default_value_t = SweepArg::Lex)]
    sweep: SweepArg,
    /// Exact solution expression; enables the error and order report
    #[arg(long)]
    exact: Option<String>,
    /// Report path; grid and residual-history files take its stem
    #[arg(long, default_value = "toda_report.json")]
    out: PathBuf,
    /// Cap the worker thread count
    #[arg(long)]
    threads: Option<usize>,
    /// Omit the metadata block for byte-identical reports
    #[arg(long)]
    no_meta: bool,
}

enum CliError {
    Usage(String),
    Math(String),
}

impl CliError {
    fn code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Math(_) => 1,
        }
    }

    fn message(&self) -> &str {
        match self {
            CliError::Usage(m) | CliError::Math(m) => m,
        }
    }
}

type CR<T> = Result<T, CliError>;

fn usage(context: &str, e: impl Display) -> CliError {
    CliError::Usage(format!("{context}: {e}"))
}

fn math(context: &str, e: impl Display) -> CliError {
    CliError::Math(format!("{context}: {e}"))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {}", e.message());
            ExitCode::from(e.code())
        }
    }
}

fn run(cli: Cli) -> CR<bool> {
    match cli.cmd {
        Cmd::Identities(a) => cmd_identities(a),
        Cmd::Holonomy(a) => cmd_holonomy(a),
        Cmd::Einstein(a) => cmd_einstein(a),
        Cmd::Toda(a) => cmd_toda(a),
    }
}

#[derive(Serialize)]
struct Meta {
    tool: &'static str,
    version: &'static str,
    unix_time: u64,
}

fn meta(no_meta: bool) -> Option<Meta> {
    if no_meta {
        return None;
    }
    let unix_time = std::time::SystemTime::now()
        .duration_since(std::time::UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0);
    Some(Meta {
        tool: "weylgeo",
        version: env!("CARGO_PKG_VERSION"),
        unix_time,
    })
}

fn setup_threads(threads: Option<usize>) -> CR<()> {
    if let Some(t) = threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(t)
            .build_global()
            .map_err(|e| usage("configuring thread pool", e))?;
    }
    Ok(())
}

fn load_chart(path: &Path) -> CR<(ConformalProductChart, GaugeChoice)> {
    ConformalProductChart::from_json_file(path)
        .map_err(|e| usage(&format!("loading chart {}", path.display()), e))
}

fn validate_box(common: &CommonArgs) -> CR<()> {
    if !(common.hi > common.lo) {
        return Err(CliError::Usage(format!(
            "empty sampling box [{}, {}]",
            common.lo, common.hi
        )));
    }
    if common.samples == 0 {
        return Err(CliError::Usage("need at least one sample".into()));
    }
    Ok(())
}

fn emit(report: &impl Serialize, out: &Option<PathBuf>) -> CR<()> {
    let mut text =
        serde_json::to_string_pretty(report).map_err(|e| math("serializing report", e))?;
    text.push('\n');
    match out {
        Some(path) => std::fs::write(path, text)
            .map_err(|e| usage(&format!("writing {}", path.display()), e)),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

#[derive(Serialize)]
struct IdentityResiduals {
    wedge_commutator: f64,
    curvature_pair_symmetry: f64,
    metric_compatibility: f64,
    gauge_invariance: f64,
}

#[derive(Serialize)]
struct IdentityReport {
    #[serde(skip_serializing_if = "Option::is_none")]
    meta: Option<Meta>,
    chart: String,
    seed: u64,
    samples: usize,
    tol: f64,
    sample_box: [f64; 2],
    identities: IdentityResiduals,
    max_residual: f64,
    pass: bool,
}

fn cmd_identities(args: IdentitiesArgs) -> CR<bool> {
    let c = &args.common;
    setup_threads(c.threads)?;
    validate_box(c)?;
    let (chart, gauge) = load_chart(&c.chart)?;
    let n = chart.dim();
    let points = uniform_points(c.samples, n, c.lo, c.hi, c.seed);
    let vectors = uniform_points(4 * c.samples, n, -1.0, 1.0, c.seed.wrapping_add(1));
    let alt_src = if n >= 4 { "x1 + 0.3*x4" } else { "x1" };
    let alt_gauge = GaugeChoice::new(
        ScalarField::parse(alt_src, n).map_err(|e| usage("building comparison gauge", e))?,
    );

    let mut worst = IdentityResiduals {
        wedge_commutator: 0.0,
        curvature_pair_symmetry: 0.0,
        metric_compatibility: 0.0,
        gauge_invariance: 0.0,
    };
    for (k, p) in points.iter().enumerate() {
        let x = p.as_slice();
        let g = gauge_metric_at(&chart, &gauge, x)
            .map_err(|e| math(&format!("gauge metric at sample {k}"), e))?;
        let vs = &vectors[4 * k..4 * k + 4];
        let (xv, yv, uv, vv) = (&vs[0], &vs[1], &vs[2], &vs[3]);
        let wedge = |a: &DVector<f64>, b: &DVector<f64>| {
            wedge_as_endo(a, b, &g).map(|e| e.matrix().clone())
        };
        let rel = (|| -> weylgeo::Result<f64> {
            let a = wedge(xv, yv)?;
            let b = wedge(uv, vv)?;
            let comm = &a * &b - &b * &a;
            let expansion = wedge(yv, vv)? * g.inner(xv, uv) + wedge(xv, uv)? * g.inner(yv, vv)
                - wedge(yv, uv)? * g.inner(xv, vv)
                - wedge(xv, vv)? * g.inner(yv, uv);
            Ok((&comm - expansion).norm() / comm.norm().max(1.0))
        })()
        .map_err(|e| math(&format!("wedge commutator at sample {k}"), e))?;
        worst.wedge_commutator = worst.wedge_commutator.max(rel);

        let r = symmetry_failure_residual(&chart, &gauge, x)
            .map_err(|e| math(&format!("curvature symmetry at sample {k}"), e))?;
        worst.curvature_pair_symmetry = worst.curvature_pair_symmetry.max(r);

        let r = metric_compatibility_residual(&chart, &gauge, x)
            .map_err(|e| math(&format!("metric compatibility at sample {k}"), e))?;
        worst.metric_compatibility = worst.metric_compatibility.max(r);

        let g0 = weyl_christoffels_at(&chart, &gauge, x)
            .map_err(|e| math(&format!("connection at sample {k}"), e))?;
        let g1 = weyl_christoffels_at(&chart, &alt_gauge, x)
            .map_err(|e| math(&format!("connection at sample {k}"), e))?;
        let mut gap = 0.0f64;
        for kk in 0..n {
            for i in 0..n {
                for j in 0..n {
                    gap = gap.max((g0.get(kk, i, j) - g1.get(kk, i, j)).abs());
                }
            }
        }
        worst.gauge_invariance = worst.gauge_invariance.max(gap);
    }

    let max_residual = worst
        .wedge_commutator
        .max(worst.curvature_pair_symmetry)
        .max(worst.metric_compatibility)
        .max(worst.gauge_invariance);
    let pass = max_residual <= c.tol;
    let report = IdentityReport {
        meta: meta(c.no_meta),
        chart: c.chart.display().to_string(),
        seed: c.seed,
        samples: c.samples,
        tol: c.tol,
        sample_box: [c.lo, c.hi],
        identities: worst,
        max_residual,
        pass,
    };
    emit(&report, &c.out)?;
    Ok(pass)
}

#[derive(Serialize)]
struct SweepRow {
    rank_tol: f64,
    dim: usize,
}

#[derive(Serialize)]
struct HolonomyReport {
    #[serde(skip_serializing_if = "Option::is_none")]
    meta: Option<Meta>,
    chart: String,
    seed: u64,
    base: Vec<f64>,
    transported: usize,
    dim: usize,
    class: String,
    details: String,
    id_projection: f64,
    basis_norms: Vec<f64>,
    tol: f64,
    closure_residual: f64,
    rank_tol_sweep: Vec<SweepRow>,
    stable: bool,
}

fn cmd_holonomy(args: HolonomyArgs) -> CR<bool> {
    let c = &args.common;
    setup_threads(c.threads)?;
    validate_box(c)?;
    if !(args.rank_tol > 0.0 && args.rank_tol.is_finite()) {
        return Err(CliError::Usage(format!(
            "rank tolerance must be positive, got {}",
            args.rank_tol
        )));
    }
    let (chart, gauge) = load_chart(&c.chart)?;
    let n = chart.dim();
    let drawn = uniform_points(1 + args.transported, n, c.lo, c.hi, c.seed);
    let base = drawn[0].clone();
    let samples = &drawn[1..];

    let gens = framed_curvature_generators(&chart, &gauge, base.as_slice(), samples)
        .map_err(|e| math("building curvature generators", e))?;
    let algebra =
        bracket_closure(&gens, args.rank_tol).map_err(|e| math("closing the algebra", e))?;
    let classification = classify_holonomy(&algebra, chart.n1(), chart.n2());

    let mut sweep = Vec::new();
    for rt in [1e-10, 1e-9, 1e-8, 1e-7] {
        let alg = bracket_closure(&gens, rt).map_err(|e| math("closure during sweep", e))?;
        sweep.push(SweepRow { rank_tol: rt, dim: alg.dim() });
    }
    let stable = sweep.windows(2).all(|w| w[0].dim == w[1].dim);

    let report = HolonomyReport {
        meta: meta(c.no_meta),
        chart: c.chart.display().to_string(),
        seed: c.seed,
        base: base.iter().copied().collect(),
        transported: args.transported,
        dim: classification.dim,
        class: classification.label.to_string(),
        details: classification.details.clone(),
        id_projection: classification.id_projection,
        basis_norms: algebra.basis().iter().map(|b| b.norm()).collect(),
        tol: args.rank_tol,
        closure_residual: algebra.closure_residual(),
        rank_tol_sweep: sweep,
        stable,
    };
    emit(&report, &c.out)?;
    Ok(true)
}

#[derive(Serialize)]
struct NoGoSection {
    sample_box: [f64; 2],
    residual_min: f64,
    closed: bool,
}

#[derive(Serialize)]
struct EinsteinCmdReport {
    #[serde(skip_serializing_if = "Option::is_none")]
    meta: Option<Meta>,
    chart: String,
    seed: u64,
    tol: f64,
    sample_box: [f64; 2],
    einstein_weyl: bool,
    closed: bool,
    scan: EinsteinReport,
    #[serde(skip_serializing_if = "Option::is_none")]
    no_go: Option<NoGoSection>,
}

fn cmd_einstein(args: EinsteinArgs) -> CR<bool> {
    let c = &args.common;
    setup_threads(c.threads)?;
    validate_box(c)?;
    let (chart, _gauge) = load_chart(&c.chart)?;
    let n = chart.dim();
    let points = uniform_points(c.samples, n, c.lo, c.hi, c.seed);
    let scan = einstein_scan(&chart, &points).map_err(|e| math("einstein scan", e))?;
    let einstein_weyl = scan.residual_max <= c.tol;

    // On equal splits of dimension three or more, also report the residual
    // floor over the positive box, which exhibits the known obstruction to
    // non-closed Einstein structures.
    let no_go = if chart.n1() == chart.n2() && chart.n1() >= 3 {
        let pts = uniform_points(c.samples, n, 0.2, 1.0, c.seed);
        let r = no_go_scan(&chart, &pts).map_err(|e| math("no-go scan", e))?;
        Some(NoGoSection {
            sample_box: [0.2, 1.0],
            residual_min: r.residual_min,
            closed: r.closed_flag,
        })
    } else {
        None
    };

    let report = EinsteinCmdReport {
        meta: meta(c.no_meta),
        chart: c.chart.display().to_string(),
        seed: c.seed,
        tol: c.tol,
        sample_box: [c.lo, c.hi],
        einstein_weyl,
        closed: scan.closed_flag,
        scan,
        no_go,
    };
    emit(&report, &c.out)?;
    Ok(einstein_weyl)
}

#[derive(Serialize)]
struct TodaReport {
    #[serde(skip_serializing_if = "Option::is_none")]
    meta: Option<Meta>,
    shape: [usize; 4],
    spacing: [f64; 4],
    origin: [f64; 4],
    boundary: String,
    omega: f64,
    tol: f64,
    max_iters: usize,
    sweep: String,
    converged: bool,
    iterations: usize,
    final_residual: f64,
    grid_csv: String,
    grid_sidecar: String,
    residual_history_csv: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    exact_interior_error: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    order: Option<ConvergenceReport>,
}

fn sibling(out: &Path, suffix: &str) -> PathBuf {
    let stem = out
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "toda_report".into());
    out.with_file_name(format!("{stem}{suffix}"))
}

fn cmd_toda(args: TodaArgs) -> CR<bool> {
    setup_threads(args.threads)?;
    if !(args.omega > 0.0 && args.omega < 2.0) {
        return Err(CliError::Usage(format!(
            "omega must lie in (0, 2), got {}",
            args.omega
        )));
    }
    let shape: [usize; 4] = args
        .shape
        .clone()
        .try_into()
        .map_err(|_| CliError::Usage("--shape needs exactly four entries".into()))?;
    if !(args.spacing > 0.0) {
        return Err(CliError::Usage(format!(
            "spacing must be positive, got {}",
            args.spacing
        )));
    }

    let (grid, boundary_desc) = if let Some(file) = args.boundary.strip_prefix('@') {
        let g = read_grid(Path::new(file))
            .map_err(|e| usage(&format!("reading boundary grid {file}"), e))?;
        (g, args.boundary.clone())
    } else {
        let field = ScalarField::parse(&args.boundary, 4)
            .map_err(|e| usage("parsing boundary expression", e))?;
        let g = TodaGrid::with_boundary(
            shape,
            [args.spacing; 4],
            [args.origin; 4],
            &field,
        )
        .map_err(|e| usage("building grid", e))?;
        (g, args.boundary.clone())
    };

    let opts = SolveOptions {
        omega: args.omega,
        tol: args.tol,
        max_iters: args.max_iters,
        sweep: match args.sweep {
            SweepArg::Lex => SweepMode::Lexicographic,
            SweepArg::RedBlack => SweepMode::RedBlack,
        },
    };
    let outcome: SolveOutcome = toda_solve(&grid, &opts).map_err(|e| math("solver", e))?;

    let grid_csv = sibling(&args.out, "_grid.csv");
    let grid_sidecar = sibling(&args.out, "_grid.json");
    let residuals_csv = sibling(&args.out, "_residuals.csv");
    write_grid(&outcome.grid, &grid_csv, &grid_sidecar)
        .map_err(|e| usage("writing grid files", e))?;
    let mut hist = String::from("sweep,residual\n");
    for (i, r) in outcome.residual_history.iter().enumerate() {
        hist.push_str(&format!("{},{}\n", i + 1, r));
    }
    std::fs::write(&residuals_csv, hist)
        .map_err(|e| usage(&format!("writing {}", residuals_csv.display()), e))?;

    let (exact_interior_error, order) = match &args.exact {
        None => (None, None),
        Some(src) => {
            let exact = ScalarField::parse(src, 4)
                .map_err(|e| usage("parsing exact solution", e))?;
            let err_fine = outcome
                .grid
                .interior_max_error(&exact)
                .map_err(|e| math("evaluating exact solution", e))?;
            let order = if args.boundary.starts_with('@') {
                None
            } else if shape.iter().all(|&n| n >= 5 && n % 2 == 1) {
                // Re-solve on the 2x coarser grid to expose the truncation
                // order; odd shapes keep the node sets nested.
                let coarse_shape = shape.map(|n| (n - 1) / 2 + 1);
                let field = ScalarField::parse(&args.boundary, 4)
                    .map_err(|e| usage("parsing boundary expression", e))?;
                let coarse = TodaGrid::with_boundary(
                    coarse_shape,
                    [2.0 * args.spacing; 4],
                    [args.origin; 4],
                    &field,
                )
                .map_err(|e| usage("building coarse grid", e))?;
                let coarse_out = toda_solve(&coarse, &opts).map_err(|e| math("coarse solver", e))?;
                let err_coarse = coarse_out
                    .grid
                    .interior_max_error(&exact)
                    .map_err(|e| math("evaluating exact solution", e))?;
                Some(observed_order(err_coarse, err_fine, 2.0, 50.0 * args.tol))
            } else {
                None
            };
            (Some(err_fine), order)
        }
    };

    let report = TodaReport {
        meta: meta(args.no_meta),
        shape: outcome.grid.shape(),
        spacing: outcome.grid.spacing(),
        origin: outcome.grid.origin(),
        boundary: boundary_desc,
        omega: args.omega,
        tol: args.tol,
        max_iters: args.max_iters,
        sweep: match args.sweep {
            SweepArg::Lex => "lex".into(),
            SweepArg::RedBlack => "red-black".into(),
        },
        converged: outcome.converged,
        iterations: outcome.iterations,
        final_residual: outcome.final_residual,
        grid_csv: grid_csv.display().to_string(),
        grid_sidecar: grid_sidecar.display().to_string(),
        residual_history_csv: residuals_csv.display().to_string(),
        exact_interior_error,
        order,
    };
    emit(&report, &Some(args.out.clone()))?;
    Ok(outcome.converged)
}
