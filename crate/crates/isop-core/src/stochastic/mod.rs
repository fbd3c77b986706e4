//! Path samplers: Gaussian-increment Brownian motion, walk-on-spheres, and
//! symmetric alpha-stable processes via subordination, with exit and hitting
//! detection against [`Domain`]s.
//!
//! Normalization: plain Brownian motion here has generator (1/2) Laplacian,
//! so each coordinate of an increment over `dt` has variance `dt`. The
//! alpha-stable family follows the subordinated representation in which
//! `alpha = 2` degenerates to Brownian motion run at twice the speed
//! (per-coordinate increment variance `2 dt`). Estimators that mix the two
//! conventions say so at the call site.

pub mod sausage;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{Domain, Point};

/// Step-simulation parameters shared by the samplers.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct SimConfig {
    /// Time step of the Euler walk.
    pub dt: f64,
    /// Truncation horizon: paths still alive here are reported truncated.
    pub max_time: f64,
    /// Walk-on-spheres absorption shell.
    pub eps_shell: f64,
    pub seed: u64,
    /// Segment-proximity tolerance for zero-thickness boundary pieces.
    pub slit_eps: f64,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            dt: 1e-4,
            max_time: 100.0,
            eps_shell: 1e-6,
            seed: 0,
            slit_eps: 1e-3,
        }
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0) {
            return Err(Error::pre("dt must be positive"));
        }
        if self.dt > self.max_time {
            return Err(Error::pre("dt must not exceed max_time"));
        }
        if !(self.eps_shell > 0.0) {
            return Err(Error::pre("eps_shell must be positive"));
        }
        if self.slit_eps < 0.0 {
            return Err(Error::pre("slit_eps must be nonnegative"));
        }
        Ok(())
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }
}

/// Outcome of one simulated trajectory.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct StoppedPath {
    pub exit_time: f64,
    pub exit_point: Point,
    /// Index into the domain's boundary labels; `None` when truncated.
    pub boundary_label: Option<usize>,
    /// Set when `max_time` elapsed inside the domain (then
    /// `exit_time == max_time` and `exit_point` is the last interior position).
    pub truncated: bool,
}

/// Order and dimension of a symmetric alpha-stable process.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct StableParams {
    pub alpha: f64,
    pub dim: usize,
}

impl StableParams {
    pub fn new(alpha: f64, dim: usize) -> Result<Self> {
        if !(alpha > 0.0 && alpha <= 2.0) {
            return Err(Error::pre("stable order alpha must lie in (0, 2]"));
        }
        if dim == 0 {
            return Err(Error::pre("stable dimension must be >= 1"));
        }
        Ok(StableParams { alpha, dim })
    }
}

/// Per-path deterministic RNG stream: every path owns stream `path_index`
/// of the ChaCha cipher keyed by `seed`, so runs are reproducible for any
/// worker count and paired runs replay identical increments.
pub fn path_rng(seed: u64, path_index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(path_index);
    rng
}

/// One Brownian increment: `x + sqrt(dt) Z`, `Z` standard Gaussian per
/// coordinate (generator (1/2) Laplacian).
#[inline]
pub fn bm_step(x: Point, dt: f64, dim: usize, rng: &mut ChaCha8Rng) -> Point {
    let s = dt.sqrt();
    let gx: f64 = rng.sample(StandardNormal);
    let gy: f64 = rng.sample(StandardNormal);
    let gz: f64 = if dim == 3 {
        rng.sample(StandardNormal)
    } else {
        0.0
    };
    Point::new(x.x + s * gx, x.y + s * gy, x.z + s * gz)
}

/// Positive stable variable with Laplace transform `exp(-lambda^beta)`,
/// `0 < beta < 1`, by the Kanter / Chambers-Mallows-Stuck transformation
/// (exact in law, rejection-free).
pub fn positive_stable(beta: f64, rng: &mut ChaCha8Rng) -> f64 {
    let clamp = |u: f64| u.clamp(1e-12, 1.0 - 1e-12);
    let u = clamp(rng.random::<f64>()) * std::f64::consts::PI;
    let w = -clamp(rng.random::<f64>()).ln();
    let s1 = (beta * u).sin() / u.sin().powf(1.0 / beta);
    let s2 = (((1.0 - beta) * u).sin() / w).powf((1.0 - beta) / beta);
    s1 * s2
}

/// One increment of the symmetric alpha-stable process via subordination:
/// draw the index-(alpha/2) subordinator increment `S` over `dt` and return
/// `x + sqrt(2 S) Z`. At `alpha = 2` the subordinator is deterministic
/// (`S = dt`) and the step is speed-2 Brownian motion.
pub fn stable_step(x: Point, dt: f64, p: &StableParams, rng: &mut ChaCha8Rng) -> Point {
    let s = if p.alpha >= 2.0 {
        dt
    } else {
        dt.powf(2.0 / p.alpha) * positive_stable(p.alpha / 2.0, rng)
    };
    bm_step(x, 2.0 * s, p.dim, rng)
}

/// How a stepped path moves and whether a Brownian-bridge boundary
/// correction is meaningful for it.
#[derive(Clone, Copy, Debug)]
pub enum Mover {
    Brownian { dim: usize },
    Stable(StableParams),
}

impl Mover {
    #[inline]
    fn step(&self, x: Point, dt: f64, rng: &mut ChaCha8Rng) -> Point {
        match self {
            Mover::Brownian { dim } => bm_step(x, dt, *dim, rng),
            Mover::Stable(p) => stable_step(x, dt, p, rng),
        }
    }

    /// Per-coordinate variance over a step, when the path is continuous.
    /// Pure-jump stable paths get no bridge correction.
    #[inline]
    fn bridge_var(&self, dt: f64) -> Option<f64> {
        match self {
            Mover::Brownian { .. } => Some(dt),
            Mover::Stable(p) if p.alpha >= 2.0 => Some(2.0 * dt),
            Mover::Stable(_) => None,
        }
    }
}

/// Result of stepping a path until exit or a time cap.
#[derive(Clone, Copy, Debug)]
pub enum WalkOutcome {
    Exited {
        time: f64,
        point: Point,
        label: usize,
    },
    /// Still inside the domain at the cap; carries the position there.
    Alive(Point),
}

/// Steps a path from `x` (inside `domain`) until the trajectory leaves the
/// domain or `t_stop` is reached. Exit detection is segment-boundary
/// intersection, plus a Brownian-bridge crossing probability
/// `exp(-2 d1 d2 / var)` on smooth convex boundaries to cut the O(sqrt(dt))
/// survival bias of endpoint tests.
pub fn walk_until(
    domain: &Domain,
    x: Point,
    t_stop: f64,
    cfg: &SimConfig,
    mover: Mover,
    rng: &mut ChaCha8Rng,
) -> WalkOutcome {
    let mut pos = x;
    let mut t = 0.0;
    let dt = cfg.dt;
    loop {
        if t >= t_stop {
            return WalkOutcome::Alive(pos);
        }
        let step_dt = dt.min(t_stop - t);
        let next = mover.step(pos, step_dt, rng);
        // The bridge uniform is drawn every step so paired runs on different
        // domains consume identical stream positions.
        let u: f64 = rng.random();
        if let Some(hit) = domain.exit_segment(pos, next, cfg.slit_eps) {
            return WalkOutcome::Exited {
                time: t + hit.t * step_dt,
                point: hit.point,
                label: hit.label,
            };
        }
        if let Some(var) = mover.bridge_var(step_dt) {
            if let (Some(d1), Some(d2)) =
                (domain.bridge_distance(pos), domain.bridge_distance(next))
            {
                let e = 2.0 * d1 * d2 / var;
                if e < 30.0 && u < (-e).exp() {
                    let mid = (pos + next) * 0.5;
                    let (point, label) = domain
                        .project_boundary(mid)
                        .unwrap_or((mid, domain.classify_boundary(mid)));
                    return WalkOutcome::Exited {
                        time: t + 0.5 * step_dt,
                        point,
                        label,
                    };
                }
            }
        }
        pos = next;
        t += step_dt;
    }
}

/// Simulates Brownian motion from `x` until it leaves `domain`, up to
/// `cfg.max_time`.
pub fn sample_exit(
    domain: &Domain,
    x: Point,
    cfg: &SimConfig,
    rng: &mut ChaCha8Rng,
) -> Result<StoppedPath> {
    cfg.validate()?;
    if !domain.contains(x) {
        return Err(Error::pre(
            "sample_exit: start point must lie inside the domain",
        ));
    }
    let mover = Mover::Brownian { dim: domain.dim() };
    Ok(finish_walk(
        walk_until(domain, x, cfg.max_time, cfg, mover, rng),
        cfg,
    ))
}

/// Same as [`sample_exit`] for a symmetric alpha-stable path.
pub fn sample_exit_stable(
    domain: &Domain,
    x: Point,
    p: &StableParams,
    cfg: &SimConfig,
    rng: &mut ChaCha8Rng,
) -> Result<StoppedPath> {
    cfg.validate()?;
    if !domain.contains(x) {
        return Err(Error::pre(
            "sample_exit: start point must lie inside the domain",
        ));
    }
    Ok(finish_walk(
        walk_until(domain, x, cfg.max_time, cfg, Mover::Stable(*p), rng),
        cfg,
    ))
}

fn finish_walk(outcome: WalkOutcome, cfg: &SimConfig) -> StoppedPath {
    match outcome {
        WalkOutcome::Exited { time, point, label } => StoppedPath {
            exit_time: time,
            exit_point: point,
            boundary_label: Some(label),
            truncated: false,
        },
        WalkOutcome::Alive(p) => StoppedPath {
            exit_time: cfg.max_time,
            exit_point: p,
            boundary_label: None,
            truncated: true,
        },
    }
}

/// Uniform direction on the unit sphere of the given dimension.
#[inline]
pub fn uniform_dir(dim: usize, rng: &mut ChaCha8Rng) -> Point {
    if dim == 2 {
        let th = rng.random::<f64>() * 2.0 * std::f64::consts::PI;
        Point::xy(th.cos(), th.sin())
    } else {
        let z = 2.0 * rng.random::<f64>() - 1.0;
        let th = rng.random::<f64>() * 2.0 * std::f64::consts::PI;
        let r = (1.0 - z * z).max(0.0).sqrt();
        Point::new(r * th.cos(), r * th.sin(), z)
    }
}

/// Walk-on-spheres: jumps to uniform points on inscribed spheres until the
/// walk is within `eps_shell` of the boundary, then projects to the nearest
/// boundary point. Exact in law for the exit *position* (no exit time).
///
/// Errors if the domain supplies no signed distance.
pub fn walk_on_spheres(
    domain: &Domain,
    x: Point,
    cfg: &SimConfig,
    rng: &mut ChaCha8Rng,
) -> Result<(Point, usize)> {
    const MAX_JUMPS: usize = 200_000;
    if domain.signed_distance(x).is_none() {
        return Err(Error::pre(
            "walk_on_spheres requires a signed-distance domain",
        ));
    }
    if !domain.contains(x) && domain.signed_distance(x).is_some_and(|d| d < 0.0) {
        return Err(Error::pre(
            "walk_on_spheres: start point must lie inside the domain",
        ));
    }
    let dim = domain.dim();
    let mut pos = x;
    for _ in 0..MAX_JUMPS {
        let d = domain.signed_distance(pos).unwrap();
        if d <= cfg.eps_shell {
            let (p, label) = domain
                .project_boundary(pos)
                .unwrap_or((pos, domain.classify_boundary(pos)));
            return Ok((p, label));
        }
        pos = pos + uniform_dir(dim, rng) * d;
    }
    let (p, label) = domain
        .project_boundary(pos)
        .unwrap_or((pos, domain.classify_boundary(pos)));
    Ok((p, label))
}

/// Writes one simulated Brownian path as CSV rows `t,x1,..,xd` (plotting aid).
pub fn dump_path_csv(
    domain: &Domain,
    x: Point,
    cfg: &SimConfig,
    rng: &mut ChaCha8Rng,
    out: &mut dyn std::io::Write,
) -> Result<StoppedPath> {
    cfg.validate()?;
    if !domain.contains(x) {
        return Err(Error::pre(
            "path dump: start point must lie inside the domain",
        ));
    }
    let dim = domain.dim();
    let mut pos = x;
    let mut t = 0.0;
    let write_row = |out: &mut dyn std::io::Write, t: f64, p: Point| -> Result<()> {
        if dim == 2 {
            writeln!(out, "{t},{},{}", p.x, p.y)?;
        } else {
            writeln!(out, "{t},{},{},{}", p.x, p.y, p.z)?;
        }
        Ok(())
    };
    write_row(out, t, pos)?;
    loop {
        if t >= cfg.max_time {
            return Ok(StoppedPath {
                exit_time: cfg.max_time,
                exit_point: pos,
                boundary_label: None,
                truncated: true,
            });
        }
        let next = bm_step(pos, cfg.dt, dim, rng);
        let _bridge: f64 = rng.random();
        if let Some(hit) = domain.exit_segment(pos, next, cfg.slit_eps) {
            let time = t + hit.t * cfg.dt;
            write_row(out, time, hit.point)?;
            return Ok(StoppedPath {
                exit_time: time,
                exit_point: hit.point,
                boundary_label: Some(hit.label),
                truncated: false,
            });
        }
        pos = next;
        t += cfg.dt;
        write_row(out, t, pos)?;
    }
}
