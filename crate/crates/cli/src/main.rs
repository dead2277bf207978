use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use cylstable::connectivity::{check_hgamma_domain, rook_components};
use cylstable::geometry::{paper_domain, CatalogId, Domain};
use cylstable::heatkernel::{bound_ratio_diagnostics, choose_lambda1_grid, estimate_lambda1};
use cylstable::rng::{Stream, StreamKey};
use cylstable::simulate::{
    exit_distribution, mean_exit_time, occupation_green, survival_probability, SimConfig,
};
use cylstable::stable::AlphaParam;
use cylstable::stats::Mesh;
use cylstable_cli::experiments::{estimate_pd_any, run_experiment, ExperimentConfig, EXPERIMENT_NAMES};
use cylstable_cli::svg;
use std::path::PathBuf;

/// Simulation and verification toolkit for the cylindrical alpha-stable
/// process killed on exiting open sets.
#[derive(Parser)]
#[command(name = "cylstable", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct SimArgs {
    /// Stability index in (0,2)
    #[arg(long, default_value_t = 1.0)]
    alpha: f64,
    /// Ambient dimension
    #[arg(long, default_value_t = 2)]
    dim: usize,
    /// Catalog id (disc, parallel_balls, rounded_square, four_squares,
    /// nested_channel_6_1, tilted_rect_6_2, diagonal_balls_6_3) or a path to
    /// a domain JSON file
    #[arg(long)]
    domain: String,
    /// Starting point, comma separated
    #[arg(long, value_parser = parse_point)]
    x: Point,
    /// Time horizon
    #[arg(long, default_value_t = 1.0)]
    t: f64,
    /// Grid step (default 1e-3 * t)
    #[arg(long)]
    dt: Option<f64>,
    #[arg(long, default_value_t = 100_000)]
    paths: usize,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Also run at dt/2 and dt/4 and report the refinement trend
    #[arg(long, default_value_t = false)]
    refine: bool,
    /// Write a per-path binary trace: little-endian f64 records
    /// [tau_or_nan, final coords...] per path
    #[arg(long)]
    trace: Option<PathBuf>,
}

#[derive(Clone)]
struct Point(Vec<f64>);

fn parse_point(s: &str) -> Result<Point, String> {
    s.split(',')
        .map(|p| p.trim().parse::<f64>().map_err(|e| e.to_string()))
        .collect::<Result<Vec<_>, _>>()
        .map(Point)
}

#[derive(Subcommand)]
enum Command {
    /// Evaluate the fractional Laplacian of the power test function
    Fraclap {
        #[arg(long)]
        alpha: f64,
        #[arg(long)]
        p: f64,
        /// Evaluation point (defaults to the constant C(p, alpha) at x=1)
        #[arg(long)]
        x: Option<f64>,
    },
    /// Rook-connectivity verdict for a domain
    CheckIrreducible {
        #[arg(long)]
        domain: String,
        /// Grid spacing (default: min feature / 8)
        #[arg(long)]
        h: Option<f64>,
    },
    /// Randomized screening of the coordinate-swap condition (H_gamma)
    CheckHgamma {
        #[arg(long)]
        domain: String,
        #[arg(long, default_value_t = 1.0)]
        gamma: f64,
        #[arg(long, default_value_t = 10_000)]
        pairs: usize,
        #[arg(long, default_value_t = 1)]
        seed: u64,
    },
    /// Survival probability P_x(t < tau_D)
    Survival(SimArgs),
    /// Mean exit time E_x[tau_D]
    ExitTime(SimArgs),
    /// Exit-point histogram over complement cells
    ExitDist {
        #[command(flatten)]
        sim: SimArgs,
        /// Histogram cells per axis
        #[arg(long, default_value_t = 24)]
        mesh: usize,
    },
    /// Occupation histogram (cell-averaged Green function)
    Green {
        #[command(flatten)]
        sim: SimArgs,
        #[arg(long, default_value_t = 24)]
        mesh: usize,
    },
    /// Dirichlet heat kernel point estimate
    Heatkernel {
        #[command(flatten)]
        sim: SimArgs,
        /// kde | bridge | sub
        #[arg(long)]
        method: String,
        /// Target point
        #[arg(long, value_parser = parse_point)]
        y: Point,
        #[arg(long)]
        bandwidth: Option<f64>,
    },
    /// Principal eigenvalue from pooled survival decay
    Lambda1 {
        #[command(flatten)]
        sim: SimArgs,
        /// Additional starting points (repeatable)
        #[arg(long = "x2", value_parser = parse_point)]
        extra_starts: Vec<Point>,
        /// Write a survival-decay SVG here
        #[arg(long)]
        svg: Option<PathBuf>,
    },
    /// Two-sided bound ratio diagnostics on the disc testbed grid
    BoundRatio {
        #[command(flatten)]
        sim: SimArgs,
        #[arg(long)]
        svg: Option<PathBuf>,
    },
    /// Run a named experiment pipeline
    Experiment {
        /// One of the catalog names
        name: String,
        /// JSON config file (schema-validated; unknown keys rejected)
        #[arg(long)]
        config: Option<PathBuf>,
        /// Output directory (default experiments/<name>)
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn load_domain(spec: &str) -> Result<Domain> {
    if let Ok(id) = spec.parse::<CatalogId>() {
        return Ok(paper_domain(id, 1.0)?);
    }
    let path = PathBuf::from(spec);
    if path.exists() {
        let text = std::fs::read_to_string(&path)?;
        return Ok(Domain::from_json(&text)?);
    }
    bail!("`{spec}` is neither a catalog id nor a readable file")
}

fn sim_config(a: &SimArgs) -> Result<SimConfig> {
    let dt = a.dt.unwrap_or(1e-3 * a.t);
    Ok(SimConfig::new(dt, a.t, a.paths, a.seed)?)
}

fn csv_header() {
    println!("quantity,estimate,stderr,dt,n_paths,seed");
}

fn main() -> Result<()> {
    // die quietly when stdout is a closed pipe (e.g. `cylstable green | head`)
    unsafe {
        libc::signal(libc::SIGPIPE, libc::SIG_DFL);
    }
    let cli = Cli::parse();
    match cli.command {
        Command::Fraclap { alpha, p, x } => {
            let c = cylstable::fraclap::ctest_constant(p, alpha)?;
            let value = match x {
                Some(x) => cylstable::fraclap::frac_lap_power(p, alpha, x)?,
                None => c,
            };
            let pv = cylstable::fraclap::frac_lap_power_pv(p, alpha, x.unwrap_or(1.0))?;
            println!(
                "{}",
                serde_json::json!({
                    "alpha": alpha,
                    "p": p,
                    "x": x.unwrap_or(1.0),
                    "value": value,
                    "ctest_constant": c,
                    "direct_pv_value": pv,
                    "cross_check_rel_diff": (value - pv).abs() / value.abs().max(1e-300),
                })
            );
        }
        Command::CheckIrreducible { domain, h } => {
            let d = load_domain(&domain)?;
            let h = h.unwrap_or_else(|| cylstable::connectivity::default_grid_spacing(&d));
            let g = rook_components(&d, h)?;
            println!(
                "{}",
                serde_json::json!({
                    "domain": domain,
                    "h": h,
                    "n_components": g.n_components(),
                    "condition_1_13": g.n_components() == 1,
                })
            );
        }
        Command::CheckHgamma { domain, gamma, pairs, seed } => {
            let d = load_domain(&domain)?;
            let mut stream = Stream::new(StreamKey::new(seed));
            let rep = check_hgamma_domain(&d, gamma, pairs, &mut stream)?;
            println!("{}", serde_json::to_string_pretty(&rep)?);
        }
        Command::Survival(args) => {
            let d = load_domain(&args.domain)?;
            let params = AlphaParam::new(args.alpha, args.dim)?;
            csv_header();
            for (i, scale) in refine_scales(args.refine).iter().enumerate() {
                let mut cfg = sim_config(&args)?;
                cfg.dt /= scale;
                let (est, se) = survival_probability(&d, &params, &args.x.0, args.t, &cfg)?;
                println!("survival_t{}_level{i},{est},{se},{},{},{}", args.t, cfg.dt, cfg.n_paths, cfg.seed);
            }
            if let Some(path) = &args.trace {
                write_trace(path, &d, &params, &args)?;
            }
        }
        Command::ExitTime(args) => {
            let d = load_domain(&args.domain)?;
            let params = AlphaParam::new(args.alpha, args.dim)?;
            csv_header();
            for (i, scale) in refine_scales(args.refine).iter().enumerate() {
                let mut cfg = sim_config(&args)?;
                cfg.dt /= scale;
                cfg.max_extension_factor = 256.0;
                let (est, se) = mean_exit_time(&d, &params, &args.x.0, &cfg)?;
                println!("mean_exit_time_level{i},{est},{se},{},{},{}", cfg.dt, cfg.n_paths, cfg.seed);
            }
            if let Some(path) = &args.trace {
                write_trace(path, &d, &params, &args)?;
            }
        }
        Command::ExitDist { sim, mesh } => {
            let d = load_domain(&sim.domain)?;
            let params = AlphaParam::new(sim.alpha, sim.dim)?;
            let cfg = sim_config(&sim)?;
            let (lo, hi) = d.bbox();
            let pad = 2.0;
            let m = Mesh::new(
                lo.iter().map(|v| v - pad).collect(),
                hi.iter().map(|v| v + pad).collect(),
                vec![mesh; d.dim()],
            );
            let h = exit_distribution(&d, &params, &sim.x.0, &cfg, &m)?;
            csv_header();
            println!("n_killed,{},0,{},{},{}", h.n_killed, cfg.dt, cfg.n_paths, cfg.seed);
            println!(
                "median_second_displacement,{},0,{},{},{}",
                h.median_second_displacement, cfg.dt, cfg.n_paths, cfg.seed
            );
            for (c, mass) in h.mass.iter().enumerate() {
                if *mass > 0.0 {
                    let center = m.center_of(c);
                    println!(
                        "exit_mass_{:.3}_{:.3},{mass},0,{},{},{}",
                        center[0], center[1], cfg.dt, cfg.n_paths, cfg.seed
                    );
                }
            }
        }
        Command::Green { sim, mesh } => {
            let d = load_domain(&sim.domain)?;
            let params = AlphaParam::new(sim.alpha, sim.dim)?;
            let cfg = sim_config(&sim)?;
            let (lo, hi) = d.bbox();
            let m = Mesh::new(lo.to_vec(), hi.to_vec(), vec![mesh; d.dim()]);
            let occ = occupation_green(&d, &params, &sim.x.0, &cfg, &m)?;
            csv_header();
            println!("total_mass,{},0,{},{},{}", occ.total_mass, cfg.dt, cfg.n_paths, cfg.seed);
            for (c, mass) in occ.mass.iter().enumerate() {
                if *mass > 0.0 {
                    let center = m.center_of(c);
                    println!(
                        "green_{:.3}_{:.3},{},0,{},{},{}",
                        center[0],
                        center[1],
                        occ.green_density(c),
                        cfg.dt,
                        cfg.n_paths,
                        cfg.seed
                    );
                }
            }
        }
        Command::Heatkernel { sim, method, y, bandwidth } => {
            let d = load_domain(&sim.domain)?;
            let params = AlphaParam::new(sim.alpha, sim.dim)?;
            let cfg = sim_config(&sim)?;
            let est = estimate_pd_any(&method, &d, &params, sim.t, &sim.x.0, &y.0, &cfg, bandwidth)?;
            println!("{}", serde_json::to_string_pretty(&est)?);
        }
        Command::Lambda1 { sim, extra_starts, svg: svg_out } => {
            let d = load_domain(&sim.domain)?;
            let params = AlphaParam::new(sim.alpha, sim.dim)?;
            let cfg = sim_config(&sim)?;
            let grid = choose_lambda1_grid(&d, &params, &sim.x.0, &cfg, 5)?;
            let mut starts = vec![sim.x.0.clone()];
            starts.extend(extra_starts.iter().map(|p| p.0.clone()));
            let (l, se) = estimate_lambda1(&d, &params, &starts, &grid, &cfg)?;
            csv_header();
            println!("lambda1,{l},{se},{},{},{}", cfg.dt, cfg.n_paths, cfg.seed);
            for t in &grid {
                println!("fit_grid_t,{t},0,{},{},{}", cfg.dt, cfg.n_paths, cfg.seed);
            }
            if let Some(path) = svg_out {
                let curve = cylstable::simulate::survival_curve(&d, &params, &sim.x.0, &grid, &cfg)?;
                let pts = curve.iter().map(|&(t, s, _)| (t, s)).collect();
                std::fs::write(
                    &path,
                    svg::plot(
                        "survival decay",
                        &[svg::Series { label: format!("lambda1={l:.4}"), points: pts }],
                        false,
                        true,
                    ),
                )
                .with_context(|| format!("writing {}", path.display()))?;
            }
        }
        Command::BoundRatio { sim, svg: svg_out } => {
            let d = load_domain(&sim.domain)?;
            let params = AlphaParam::new(sim.alpha, sim.dim)?;
            let cfg = sim_config(&sim)?;
            let grid = cylstable_cli::experiments::disc_ratio_grid(sim.alpha);
            let diag = bound_ratio_diagnostics(&d, &params, &grid, &cfg, 2.0)?;
            csv_header();
            for e in &diag.entries {
                println!(
                    "ratio_t{}_x{:?}_y{:?},{},{},{},{},{}",
                    e.t, e.x, e.y, e.ratio, e.stderr, cfg.dt, cfg.n_paths, cfg.seed
                );
            }
            println!("ratio_min,{},0,{},{},{}", diag.ratio_min, cfg.dt, cfg.n_paths, cfg.seed);
            println!("ratio_max,{},0,{},{},{}", diag.ratio_max, cfg.dt, cfg.n_paths, cfg.seed);
            if let Some(path) = svg_out {
                let series: Vec<svg::Series> = vec![svg::Series {
                    label: "ratio".into(),
                    points: diag.entries.iter().map(|e| (e.t, e.ratio.max(1e-12))).collect(),
                }];
                std::fs::write(&path, svg::plot("p_D / (w w p) over the grid", &series, true, true))?;
            }
        }
        Command::Experiment { name, config, out } => {
            let mut cfg = match config {
                Some(path) => ExperimentConfig::from_json_file(&path)?,
                None => ExperimentConfig::named(&name),
            };
            if cfg.name != name {
                bail!("config names experiment `{}` but `{name}` was requested", cfg.name);
            }
            if let Some(dir) = out {
                cfg.output_dir = Some(dir);
            }
            if !EXPERIMENT_NAMES.contains(&name.as_str()) {
                bail!("unknown experiment `{name}`; known: {EXPERIMENT_NAMES:?}");
            }
            let report = run_experiment(&cfg)?;
            for v in &report.verdicts {
                println!(
                    "{}: {} (measured {}, expected {}, tol {})",
                    v.id,
                    if v.pass { "PASS" } else { "FAIL" },
                    v.measured,
                    v.expected,
                    v.tolerance
                );
            }
            if !report.all_pass {
                std::process::exit(1);
            }
        }
    }
    Ok(())
}

fn refine_scales(refine: bool) -> Vec<f64> {
    if refine {
        vec![1.0, 2.0, 4.0]
    } else {
        vec![1.0]
    }
}

/// Per-path binary trace: [tau (NaN while surviving), state coords] as
/// little-endian f64 per path, in path order.
fn write_trace(path: &PathBuf, d: &Domain, params: &AlphaParam, args: &SimArgs) -> Result<()> {
    use std::io::Write;
    let cfg = sim_config(args)?;
    let file = std::fs::File::create(path).with_context(|| format!("creating {}", path.display()))?;
    let mut out = std::io::BufWriter::new(file);
    for p in 0..cfg.n_paths as u64 {
        let sample = cylstable::simulate::simulate_path(params, &args.x.0, &cfg, p, Some(d))?;
        let tau = if sample.killed { 0.5 * (sample.tau_lo + sample.tau_hi) } else { f64::NAN };
        out.write_all(&tau.to_le_bytes())?;
        let state = sample.exit_point.as_ref().unwrap_or(&sample.final_state);
        for v in state {
            out.write_all(&v.to_le_bytes())?;
        }
    }
    Ok(())
}
