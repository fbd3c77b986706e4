//! `isop`: batch front end for the Monte Carlo potential-theory toolkit.
//!
//! Subcommands: `estimate` (single Monte Carlo quantity), `symmetrize`
//! (raster transforms with PGM I/O), `verify` (theorem-check suite), and
//! `sweep` (one ranged parameter). Identical seeds reproduce byte-identical
//! primary records; timestamps never enter them.

use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::{json, Value};

use isop_core::estimators as est;
use isop_core::estimators::DiscreteMeasure;
use isop_core::geometry::{Domain, Hyperplane, Point, RasterSet};
use isop_core::harness;
use isop_core::stochastic::sausage::{GridSpec, SausageShape};
use isop_core::stochastic::{SimConfig, StableParams};
use isop_core::symmetrize;

#[derive(Parser)]
#[command(
    name = "isop",
    version,
    about = "Monte Carlo potential theory (exit times, harmonic measure, capacities, symmetrization checks)"
)]
struct Cli {
    /// Base RNG seed; identical seeds give byte-identical records.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads (default: ISOP_DEFAULT_WORKERS or the CPU count).
    #[arg(long, global = true)]
    workers: Option<usize>,
    /// Output path (default: stdout).
    #[arg(long, global = true)]
    output: Option<PathBuf>,
    #[arg(long, global = true, value_enum, default_value_t = Format::Json)]
    format: Format,
    /// Flat JSON file of defaults; explicit flags override its values.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Json,
    Csv,
}

#[derive(Subcommand)]
enum Command {
    /// Run one estimator and emit a result record.
    Estimate(EstimateArgs),
    /// Apply a symmetrization transform to a raster (PGM + JSON sidecar).
    Symmetrize(SymmetrizeArgs),
    /// Run a suite of theorem checks from a JSON manifest.
    Verify(VerifyArgs),
    /// Run one estimator over a grid of values of a single parameter.
    Sweep(SweepArgs),
}

#[derive(Args, Clone)]
struct EstimateArgs {
    /// One of: harmonic-measure | survival | exit-time | kac-eigenvalue |
    /// heat-content | capacity-spitzer | capacity-energy |
    /// hitting-probability | carleman-bound | sausage-expectation |
    /// riesz-energy
    target: String,
    /// Domain spec, e.g. disk:1  ball3:1  annulus:0.5,2  rect:1,2
    /// square:1  slit-disk:0.3:0,3.14159
    #[arg(long)]
    domain: Option<String>,
    /// Start (or observation) point "x,y" or "x,y,z".
    #[arg(long)]
    x: Option<String>,
    /// Boundary label for harmonic measure.
    #[arg(long)]
    label: Option<String>,
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    t: Option<f64>,
    /// Comma-separated time grid, e.g. "1,4,9".
    #[arg(long)]
    t_grid: Option<String>,
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long)]
    dt: Option<f64>,
    #[arg(long)]
    max_time: Option<f64>,
    #[arg(long)]
    eps_shell: Option<f64>,
    #[arg(long)]
    slit_eps: Option<f64>,
    /// Sampling box for heat content / Spitzer capacity (domain spec).
    #[arg(long = "box")]
    sampling_box: Option<String>,
    /// Surface points for capacity-energy / riesz-energy.
    #[arg(long)]
    points: Option<usize>,
    /// Frank-Wolfe iteration cap.
    #[arg(long)]
    iters: Option<usize>,
    /// Drop the atom self-energy correction from Riesz energies.
    #[arg(long, default_value_t = false)]
    no_self_energy: bool,
    /// Sausage ball radius.
    #[arg(long)]
    radius: Option<f64>,
    /// Sausage grid cells per axis.
    #[arg(long)]
    grid_n: Option<usize>,
    /// Sausage grid half-extent.
    #[arg(long)]
    grid_half: Option<f64>,
    /// Carleman channel: strip | funnel.
    #[arg(long)]
    channel: Option<String>,
    /// Carleman cutoff abscissa b.
    #[arg(long)]
    b: Option<f64>,
    /// Dump one sampled path as CSV rows (t, x1, .., xd) to this file.
    #[arg(long)]
    dump_path: Option<PathBuf>,
}

#[derive(Args)]
struct SymmetrizeArgs {
    /// One of: polarize | steiner | circular | schedule
    transform: String,
    #[arg(long = "in")]
    input: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// Axis for steiner / schedule (0 = x, 1 = y).
    #[arg(long)]
    axis: Option<usize>,
    /// Polarizing plane "axis:offset", e.g. "1:0" for {y = 0}.
    #[arg(long)]
    plane: Option<String>,
    /// Polarization budget for schedule.
    #[arg(long, default_value_t = 500)]
    budget: usize,
}

#[derive(Args)]
struct VerifyArgs {
    /// JSON manifest: a list of {id, seed, check, ...} entries.
    #[arg(long)]
    suite: PathBuf,
}

#[derive(Args)]
struct SweepArgs {
    /// The single ranged parameter, e.g. "t=1,4,9,16" or "n=1000,10000".
    #[arg(long)]
    sweep: String,
    /// Estimator target and its flags, as in `estimate`.
    #[command(flatten)]
    base: EstimateArgs,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}

fn run(cli: Cli) -> anyhow::Result<ExitCode> {
    let workers = cli
        .workers
        .or_else(|| {
            std::env::var("ISOP_DEFAULT_WORKERS")
                .ok()
                .and_then(|v| v.parse().ok())
        })
        .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |p| p.get()));
    let seed = cli.seed.unwrap_or(0);
    let defaults: Value = match &cli.config {
        Some(p) => serde_json::from_slice(&std::fs::read(p)?)?,
        None => json!({}),
    };

    match cli.command {
        Command::Estimate(mut args) => {
            merge_defaults(&mut args, &defaults);
            let record = run_estimate(&args, seed, workers)?;
            emit_records(&[record], &cli.output, cli.format)?;
            Ok(ExitCode::SUCCESS)
        }
        Command::Symmetrize(args) => {
            run_symmetrize(&args, seed)?;
            Ok(ExitCode::SUCCESS)
        }
        Command::Verify(args) => {
            let manifest = std::fs::read_to_string(&args.suite)?;
            let verdicts = harness::run_suite(&manifest, workers)?;
            let records: Vec<Value> = verdicts
                .iter()
                .map(|v| serde_json::to_value(v).unwrap())
                .collect();
            emit_records(&records, &cli.output, Format::Json)?;
            let csv = harness::summary_csv(&verdicts);
            match &cli.output {
                Some(p) => {
                    let mut q = p.clone();
                    q.set_extension("summary.csv");
                    std::fs::write(&q, csv)?;
                    eprintln!("summary table: {}", q.display());
                }
                None => print!("{csv}"),
            }
            if harness::any_violation(&verdicts) {
                eprintln!("verify: at least one verdict is a violation");
                return Ok(ExitCode::from(3));
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::Sweep(args) => {
            let (name, values) = parse_sweep(&args.sweep)?;
            let mut records = Vec::new();
            for (i, v) in values.iter().enumerate() {
                let mut point = args.base.clone();
                apply_sweep_value(&mut point, &name, *v)?;
                merge_defaults(&mut point, &defaults);
                // shared base seed, per-point derived streams
                let point_seed = derive_seed(seed, i as u64);
                let mut rec = run_estimate(&point, point_seed, workers)?;
                rec["sweep"] = json!({"param": name, "value": v, "base_seed": seed});
                records.push(rec);
            }
            emit_records(&records, &cli.output, cli.format)?;
            Ok(ExitCode::SUCCESS)
        }
    }
}

fn derive_seed(base: u64, index: u64) -> u64 {
    // splitmix64 step keyed by the sweep index
    let mut z = base ^ index.wrapping_mul(0x9e3779b97f4a7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d049bb133111eb);
    z ^ (z >> 31)
}

fn merge_defaults(args: &mut EstimateArgs, defaults: &Value) {
    let get_f = |k: &str| defaults.get(k).and_then(Value::as_f64);
    let get_u = |k: &str| defaults.get(k).and_then(Value::as_u64);
    let get_s = |k: &str| defaults.get(k).and_then(Value::as_str).map(str::to_string);
    args.domain = args.domain.take().or_else(|| get_s("domain"));
    args.x = args.x.take().or_else(|| get_s("x"));
    args.label = args.label.take().or_else(|| get_s("label"));
    args.n = args.n.or_else(|| get_u("n").map(|v| v as usize));
    args.t = args.t.or_else(|| get_f("t"));
    args.t_grid = args.t_grid.take().or_else(|| get_s("t_grid"));
    args.alpha = args.alpha.or_else(|| get_f("alpha"));
    args.dt = args.dt.or_else(|| get_f("dt"));
    args.max_time = args.max_time.or_else(|| get_f("max_time"));
    args.eps_shell = args.eps_shell.or_else(|| get_f("eps_shell"));
    args.slit_eps = args.slit_eps.or_else(|| get_f("slit_eps"));
    args.sampling_box = args.sampling_box.take().or_else(|| get_s("box"));
    args.points = args.points.or_else(|| get_u("points").map(|v| v as usize));
    args.iters = args.iters.or_else(|| get_u("iters").map(|v| v as usize));
    args.radius = args.radius.or_else(|| get_f("radius"));
    args.grid_n = args.grid_n.or_else(|| get_u("grid_n").map(|v| v as usize));
    args.grid_half = args.grid_half.or_else(|| get_f("grid_half"));
    args.channel = args.channel.take().or_else(|| get_s("channel"));
    args.b = args.b.or_else(|| get_f("b"));
}

fn parse_point(s: &str) -> anyhow::Result<Point> {
    let parts: Vec<f64> = s
        .split(',')
        .map(|p| p.trim().parse::<f64>())
        .collect::<Result<_, _>>()
        .map_err(|e| anyhow::anyhow!("bad point '{s}': {e}"))?;
    match parts.as_slice() {
        [x, y] => Ok(Point::xy(*x, *y)),
        [x, y, z] => Ok(Point::new(*x, *y, *z)),
        _ => anyhow::bail!("point needs 2 or 3 coordinates: '{s}'"),
    }
}

fn parse_f64_list(s: &str) -> anyhow::Result<Vec<f64>> {
    s.split(',')
        .map(|p| {
            p.trim()
                .parse::<f64>()
                .map_err(|e| anyhow::anyhow!("bad number '{p}': {e}"))
        })
        .collect()
}

/// Domain DSL: disk:R | ball3:R | annulus:R1,R2 | rect:W,H | box:W,H,D |
/// square:S | slit-disk:A:ang1,ang2,... | raster:path.pgm
fn parse_domain(s: &str) -> anyhow::Result<Domain> {
    let (kind, rest) = s.split_once(':').unwrap_or((s, ""));
    let nums = |rest: &str| parse_f64_list(rest);
    Ok(match kind {
        "disk" => Domain::ball(2, Point::ZERO, rest.parse()?),
        "ball" | "ball3" => Domain::ball(3, Point::ZERO, rest.parse()?),
        "annulus" => {
            let v = nums(rest)?;
            anyhow::ensure!(v.len() == 2, "annulus:R1,R2");
            Domain::annulus(2, Point::ZERO, v[0], v[1])
        }
        "rect" => {
            let v = nums(rest)?;
            anyhow::ensure!(v.len() == 2, "rect:W,H");
            Domain::rect(2, Point::ZERO, Point::xy(v[0], v[1]))
        }
        "box" => {
            let v = nums(rest)?;
            anyhow::ensure!(v.len() == 3, "box:W,H,D");
            Domain::rect(3, Point::ZERO, Point::new(v[0], v[1], v[2]))
        }
        "square" => Domain::square(rest.parse()?),
        "slit-disk" => {
            let (a, angles) = rest
                .split_once(':')
                .ok_or_else(|| anyhow::anyhow!("slit-disk:A:ang1,ang2,..."))?;
            Domain::slit_disk(1.0, a.parse()?, parse_f64_list(angles)?)?
        }
        "raster" => {
            let set = RasterSet::load(std::path::Path::new(rest))?;
            Domain::raster(set, None)
        }
        other => anyhow::bail!("unknown domain kind '{other}'"),
    })
}

fn build_cfg(args: &EstimateArgs, seed: u64) -> SimConfig {
    let mut cfg = SimConfig {
        seed,
        ..SimConfig::default()
    };
    if let Some(dt) = args.dt {
        cfg.dt = dt;
    }
    if let Some(mt) = args.max_time {
        cfg.max_time = mt;
    }
    if let Some(e) = args.eps_shell {
        cfg.eps_shell = e;
    }
    if let Some(e) = args.slit_eps {
        cfg.slit_eps = e;
    }
    cfg
}

fn run_estimate(args: &EstimateArgs, seed: u64, workers: usize) -> anyhow::Result<Value> {
    let cfg = build_cfg(args, seed);
    let n = args.n.unwrap_or(100_000);
    let need = |opt: &Option<String>, what: &str| -> anyhow::Result<String> {
        opt.clone()
            .ok_or_else(|| anyhow::anyhow!("{what} is required for this target"))
    };
    let params_echo = json!({
        "domain": args.domain, "x": args.x, "label": args.label, "n": n,
        "t": args.t, "t_grid": args.t_grid, "alpha": args.alpha,
        "dt": cfg.dt, "max_time": cfg.max_time, "eps_shell": cfg.eps_shell,
        "slit_eps": cfg.slit_eps, "box": args.sampling_box,
        "points": args.points, "iters": args.iters, "radius": args.radius,
        "grid_n": args.grid_n, "grid_half": args.grid_half,
        "channel": args.channel, "b": args.b, "workers": workers,
    });

    if let Some(path) = &args.dump_path {
        let domain = parse_domain(&need(&args.domain, "--domain")?)?;
        let x = parse_point(&need(&args.x, "--x")?)?;
        let mut rng = isop_core::stochastic::path_rng(seed, 0);
        let mut f = std::fs::File::create(path)?;
        isop_core::stochastic::dump_path_csv(&domain, x, &cfg, &mut rng, &mut f)?;
        eprintln!("path dumped to {}", path.display());
    }

    let est = match args.target.as_str() {
        "harmonic-measure" => {
            let domain = parse_domain(&need(&args.domain, "--domain")?)?;
            let x = parse_point(&need(&args.x, "--x")?)?;
            let label = need(&args.label, "--label")?;
            est::harmonic_measure(&domain, &label, x, n, &cfg, workers)?
        }
        "survival" => {
            let domain = parse_domain(&need(&args.domain, "--domain")?)?;
            let x = parse_point(&need(&args.x, "--x")?)?;
            let t = args.t.ok_or_else(|| anyhow::anyhow!("--t is required"))?;
            match args.alpha {
                Some(a) if a < 2.0 => {
                    let p = StableParams::new(a, domain.dim())?;
                    est::survival_probability_stable(&domain, x, t, &p, n, &cfg, workers)?
                }
                _ => est::survival_probability(&domain, x, t, n, &cfg, workers)?,
            }
        }
        "exit-time" => {
            let domain = parse_domain(&need(&args.domain, "--domain")?)?;
            let x = parse_point(&need(&args.x, "--x")?)?;
            est::expected_exit_time(&domain, x, n, &cfg, workers)?
        }
        "kac-eigenvalue" => {
            let domain = parse_domain(&need(&args.domain, "--domain")?)?;
            let x = parse_point(&need(&args.x, "--x")?)?;
            let grid = parse_f64_list(&need(&args.t_grid, "--t-grid")?)?;
            est::kac_eigenvalue(&domain, x, &grid, n, &cfg, workers)?
        }
        "heat-content" => {
            let domain = parse_domain(&need(&args.domain, "--domain")?)?;
            let boxd = parse_domain(&need(&args.sampling_box, "--box")?)?;
            let t = args.t.ok_or_else(|| anyhow::anyhow!("--t is required"))?;
            est::heat_content(&domain, t, &boxd, n, &cfg, workers)?
        }
        "capacity-spitzer" => {
            let domain = parse_domain(&need(&args.domain, "--domain")?)?;
            let boxd = parse_domain(&need(&args.sampling_box, "--box")?)?;
            let grid = parse_f64_list(&need(&args.t_grid, "--t-grid")?)?;
            est::capacity_spitzer(&domain, &grid, &boxd, n, &cfg, workers)?
        }
        "capacity-energy" => {
            let domain = parse_domain(&need(&args.domain, "--domain")?)?;
            let pts = args.points.unwrap_or(2000);
            let iters = args.iters.unwrap_or(2000);
            let cloud = match &domain {
                Domain::Ball {
                    dim: 3,
                    center,
                    radius,
                } => est::fibonacci_sphere(pts, *radius, *center),
                Domain::Raster { set, .. } => isop_core::harness::surface_cloud(set, pts),
                _ => anyhow::bail!("capacity-energy expects ball3:R or raster:…"),
            };
            let alpha = args.alpha.unwrap_or(2.0);
            let (e, _mu) =
                est::capacity_energy(&cloud, alpha, 3, iters, !args.no_self_energy, workers)?;
            e
        }
        "hitting-probability" => {
            let domain = parse_domain(&need(&args.domain, "--domain")?)?;
            let x = parse_point(&need(&args.x, "--x")?)?;
            let p = StableParams::new(args.alpha.unwrap_or(2.0), domain.dim())?;
            est::hitting_probability(&domain, x, &p, &cfg, n, workers)?
        }
        "carleman-bound" => {
            let channel = match args.channel.as_deref() {
                Some("funnel") => harness::CarlemanChannel::funnel(),
                _ => harness::CarlemanChannel::strip(),
            };
            let b = args.b.ok_or_else(|| anyhow::anyhow!("--b is required"))?;
            let (xs, ls) = channel.profile(b, 4001);
            let bound = est::carleman_bound(&xs, &ls, channel.m_width, channel.r0)?;
            return Ok(json!({
                "op": "carleman-bound", "params": params_echo,
                "mean": bound, "stderr": 0.0, "n": 1, "seed": seed,
                "truncated_fraction": 0.0,
            }));
        }
        "sausage-expectation" => {
            let r = args
                .radius
                .ok_or_else(|| anyhow::anyhow!("--radius is required"))?;
            let t = args.t.ok_or_else(|| anyhow::anyhow!("--t is required"))?;
            let half = args.grid_half.unwrap_or(4.5 * t.sqrt() + 2.0 * r);
            let grid = GridSpec::centered_cube(half, args.grid_n.unwrap_or(192));
            let mut cfg = cfg;
            cfg.max_time = cfg.max_time.max(t * 1.01);
            est::sausage_expectation(&SausageShape::Ball(r), t, n, &grid, &cfg, workers)?
        }
        "riesz-energy" => {
            let domain = parse_domain(&need(&args.domain, "--domain")?)?;
            let pts = args.points.unwrap_or(1000);
            let cloud = match &domain {
                Domain::Ball {
                    dim: 3,
                    center,
                    radius,
                } => est::fibonacci_sphere(pts, *radius, *center),
                Domain::Raster { set, .. } => isop_core::harness::surface_cloud(set, pts),
                _ => anyhow::bail!("riesz-energy expects ball3:R or raster:…"),
            };
            let mu = DiscreteMeasure::uniform(cloud)?;
            let alpha = args.alpha.unwrap_or(2.0);
            let e = est::riesz_energy(&mu, alpha, 3, !args.no_self_energy)?;
            return Ok(json!({
                "op": "riesz-energy", "params": params_echo,
                "mean": e, "stderr": 0.0, "n": mu.points.len(), "seed": seed,
                "truncated_fraction": 0.0,
            }));
        }
        other => anyhow::bail!("unknown estimate target '{other}'"),
    };
    Ok(est.record(&args.target, params_echo))
}

fn run_symmetrize(args: &SymmetrizeArgs, seed: u64) -> anyhow::Result<()> {
    let set = RasterSet::load(&args.input)?;
    let out = match args.transform.as_str() {
        "steiner" => {
            let axis = args
                .axis
                .ok_or_else(|| anyhow::anyhow!("--axis is required"))?;
            symmetrize::steiner(&set, axis)
        }
        "circular" => symmetrize::circular(&set)?,
        "polarize" => {
            let plane = parse_plane(args.plane.as_deref())?;
            symmetrize::polarize(&set, &plane)?
        }
        "schedule" => {
            let plane = parse_plane(args.plane.as_deref())?;
            let res =
                symmetrize::polarization_schedule_to_steiner(&set, &plane, args.budget, seed)?;
            eprintln!(
                "schedule: {} polarizations, d_Ha trace {:.4} -> {:.4}",
                res.applied,
                res.trace.first().unwrap(),
                res.trace.last().unwrap()
            );
            res.set
        }
        other => anyhow::bail!("unknown transform '{other}'"),
    };
    out.save(&args.out)?;
    eprintln!(
        "{} -> {} (volume {} -> {})",
        args.input.display(),
        args.out.display(),
        set.volume(),
        out.volume()
    );
    Ok(())
}

fn parse_plane(spec: Option<&str>) -> anyhow::Result<Hyperplane> {
    let spec = spec.ok_or_else(|| anyhow::anyhow!("--plane axis:offset is required"))?;
    let (axis, off) = spec
        .split_once(':')
        .ok_or_else(|| anyhow::anyhow!("--plane wants axis:offset"))?;
    let axis: usize = match axis {
        "x" | "0" => 0,
        "y" | "1" => 1,
        "z" | "2" => 2,
        other => anyhow::bail!("bad plane axis '{other}'"),
    };
    Ok(Hyperplane::axis(axis, off.parse()?))
}

fn parse_sweep(s: &str) -> anyhow::Result<(String, Vec<f64>)> {
    let (name, vals) = s
        .split_once('=')
        .ok_or_else(|| anyhow::anyhow!("--sweep wants param=v1,v2,..."))?;
    Ok((name.to_string(), parse_f64_list(vals)?))
}

fn apply_sweep_value(args: &mut EstimateArgs, name: &str, v: f64) -> anyhow::Result<()> {
    match name {
        "t" => args.t = Some(v),
        "n" => args.n = Some(v as usize),
        "alpha" => args.alpha = Some(v),
        "dt" => args.dt = Some(v),
        "b" => args.b = Some(v),
        "radius" => args.radius = Some(v),
        other => anyhow::bail!("'{other}' is not a sweepable parameter"),
    }
    Ok(())
}

fn emit_records(records: &[Value], output: &Option<PathBuf>, format: Format) -> anyhow::Result<()> {
    let mut body = String::new();
    match format {
        Format::Json => {
            for r in records {
                body.push_str(&serde_json::to_string(r)?);
                body.push('\n');
            }
        }
        Format::Csv => {
            let header_needed = match output {
                Some(p) => std::fs::metadata(p).map(|m| m.len() == 0).unwrap_or(true),
                None => true,
            };
            if header_needed {
                body.push_str("op,mean,stderr,n,seed,truncated_fraction,params\n");
            }
            for r in records {
                let params = serde_json::to_string(&r["params"])?.replace('"', "\"\"");
                body.push_str(&format!(
                    "{},{},{},{},{},{},\"{}\"\n",
                    r["op"].as_str().unwrap_or(""),
                    r["mean"],
                    r["stderr"],
                    r["n"],
                    r["seed"],
                    r["truncated_fraction"],
                    params
                ));
            }
        }
    }
    match output {
        Some(p) => {
            use std::fs::OpenOptions;
            let mut f = OpenOptions::new().create(true).append(true).open(p)?;
            f.write_all(body.as_bytes())?;
        }
        None => print!("{body}"),
    }
    Ok(())
}
