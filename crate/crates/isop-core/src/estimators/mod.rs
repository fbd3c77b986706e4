//! Monte Carlo estimators for the paper quantities: harmonic measure,
//! survival probability, exit time, the Kac eigenvalue, heat content and
//! Spitzer capacity, Riesz energy and the energy-minimization capacity,
//! hitting probability, Wiener-sausage expectations, and the Carleman
//! bound evaluator.

mod capacity;
pub mod special;

pub use capacity::{
    capacity_energy, capacity_spitzer, fibonacci_sphere, heat_content, riesz_energy,
    riesz_kernel_constant, sausage_curve, sausage_expectation,
};

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::geometry::{Domain, Point};
use crate::stochastic::{
    path_rng, sample_exit, walk_on_spheres, walk_until, Mover, SimConfig, StableParams, WalkOutcome,
};

/// Monte Carlo result with seed provenance.
#[derive(Clone, Debug, Serialize)]
pub struct Estimate {
    pub mean: f64,
    pub stderr: f64,
    /// Effective sample count (truncation-excluded paths removed).
    pub n: u64,
    pub seed: u64,
    pub truncated_fraction: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub warning: Option<String>,
}

impl Estimate {
    fn from_moments(sum: f64, sumsq: f64, n: u64, seed: u64, truncated_fraction: f64) -> Estimate {
        let nf = n as f64;
        let mean = if n > 0 { sum / nf } else { f64::NAN };
        let var = if n > 1 {
            ((sumsq - sum * sum / nf) / (nf - 1.0)).max(0.0)
        } else {
            0.0
        };
        Estimate {
            mean,
            stderr: (var / nf.max(1.0)).sqrt(),
            n,
            seed,
            truncated_fraction,
            warning: None,
        }
    }

    pub fn with_warning(mut self, w: impl Into<String>) -> Self {
        self.warning = Some(w.into());
        self
    }

    /// One machine-readable record line, as emitted by the CLI.
    pub fn record(&self, op: &str, params: serde_json::Value) -> serde_json::Value {
        serde_json::json!({
            "op": op,
            "params": params,
            "mean": self.mean,
            "stderr": self.stderr,
            "n": self.n,
            "seed": self.seed,
            "truncated_fraction": self.truncated_fraction,
            "warning": self.warning,
        })
    }
}

/// Weighted point cloud normalized to total mass one.
#[derive(Clone, Debug, Serialize)]
pub struct DiscreteMeasure {
    pub points: Vec<Point>,
    pub weights: Vec<f64>,
}

impl DiscreteMeasure {
    pub fn new(points: Vec<Point>, weights: Vec<f64>) -> Result<Self> {
        if points.len() != weights.len() || points.is_empty() {
            return Err(Error::pre(
                "measure needs matching nonempty points and weights",
            ));
        }
        if weights.iter().any(|&w| w < 0.0) {
            return Err(Error::pre("measure weights must be nonnegative"));
        }
        let total: f64 = weights.iter().sum();
        if !(total > 0.0) {
            return Err(Error::pre("measure weights must have positive total mass"));
        }
        let weights = weights.into_iter().map(|w| w / total).collect();
        Ok(DiscreteMeasure { points, weights })
    }

    pub fn uniform(points: Vec<Point>) -> Result<Self> {
        let n = points.len();
        Self::new(points, vec![1.0; n])
    }

    /// Total-variation distance to another measure on the same points.
    pub fn tv_distance(&self, other: &DiscreteMeasure) -> f64 {
        0.5 * self
            .weights
            .iter()
            .zip(&other.weights)
            .map(|(a, b)| (a - b).abs())
            .sum::<f64>()
    }
}

/// Fixed chunk width: results are reduced chunk by chunk in index order, so
/// estimates are bit-identical for any worker count.
const CHUNK: usize = 1024;

pub(crate) fn with_pool<T: Send>(workers: usize, f: impl FnOnce() -> T + Send) -> T {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .expect("thread pool");
    pool.install(f)
}

/// Maps path-index chunks in parallel and returns partials in chunk order.
pub(crate) fn map_chunks<P: Send>(
    n: usize,
    chunk: usize,
    f: impl Fn(std::ops::Range<usize>) -> P + Sync + Send,
) -> Vec<P> {
    let ranges: Vec<std::ops::Range<usize>> = (0..n.div_ceil(chunk))
        .map(|c| c * chunk..((c + 1) * chunk).min(n))
        .collect();
    ranges.into_par_iter().map(f).collect()
}

#[derive(Clone, Copy, Default)]
struct Moments {
    sum: f64,
    sumsq: f64,
    n: u64,
    truncated: u64,
    total: u64,
}

impl Moments {
    fn push(&mut self, v: f64) {
        self.sum += v;
        self.sumsq += v * v;
        self.n += 1;
        self.total += 1;
    }

    fn push_truncated(&mut self, contribute: Option<f64>) {
        self.truncated += 1;
        self.total += 1;
        if let Some(v) = contribute {
            self.sum += v;
            self.sumsq += v * v;
            self.n += 1;
        }
    }

    fn merge(partials: Vec<Moments>) -> Moments {
        let mut out = Moments::default();
        for p in partials {
            out.sum += p.sum;
            out.sumsq += p.sumsq;
            out.n += p.n;
            out.truncated += p.truncated;
            out.total += p.total;
        }
        out
    }

    fn estimate(self, seed: u64) -> Estimate {
        Estimate::from_moments(
            self.sum,
            self.sumsq,
            self.n,
            seed,
            self.truncated as f64 / self.total.max(1) as f64,
        )
    }
}

/// Harmonic measure of the boundary piece `label` seen from `x`: the
/// fraction of sampled exits landing on it. Uses walk-on-spheres when the
/// domain has a signed distance (exact exit law), otherwise step simulation;
/// truncated stepped paths are excluded from numerator and denominator.
pub fn harmonic_measure(
    domain: &Domain,
    label: &str,
    x: Point,
    n: usize,
    cfg: &SimConfig,
    workers: usize,
) -> Result<Estimate> {
    cfg.validate()?;
    if !domain.contains(x) {
        return Err(Error::pre("harmonic_measure: x must lie inside the domain"));
    }
    let target = domain
        .label_index(label)
        .ok_or_else(|| Error::pre(format!("unknown boundary label: {label}")))?;
    let use_wos = domain.signed_distance(x).is_some();
    let seed = cfg.seed;
    let partials = with_pool(workers, || {
        map_chunks(n, CHUNK, |range| {
            let mut m = Moments::default();
            for i in range {
                let mut rng = path_rng(seed, i as u64);
                if use_wos {
                    let (_, lab) = walk_on_spheres(domain, x, cfg, &mut rng).expect("wos");
                    m.push(if lab == target { 1.0 } else { 0.0 });
                } else {
                    match sample_exit(domain, x, cfg, &mut rng).expect("walk") {
                        sp if sp.truncated => m.push_truncated(None),
                        sp => m.push(if sp.boundary_label == Some(target) {
                            1.0
                        } else {
                            0.0
                        }),
                    }
                }
            }
            m
        })
    });
    Ok(Moments::merge(partials).estimate(seed))
}

/// P(exit time > t) for Brownian motion from `x`.
pub fn survival_probability(
    domain: &Domain,
    x: Point,
    t: f64,
    n: usize,
    cfg: &SimConfig,
    workers: usize,
) -> Result<Estimate> {
    let mover = Mover::Brownian { dim: domain.dim() };
    survival_with(domain, x, t, n, cfg, mover, workers)
}

/// P(exit time > t) for a symmetric alpha-stable path from `x`.
pub fn survival_probability_stable(
    domain: &Domain,
    x: Point,
    t: f64,
    p: &StableParams,
    n: usize,
    cfg: &SimConfig,
    workers: usize,
) -> Result<Estimate> {
    survival_with(domain, x, t, n, cfg, Mover::Stable(*p), workers)
}

fn survival_with(
    domain: &Domain,
    x: Point,
    t: f64,
    n: usize,
    cfg: &SimConfig,
    mover: Mover,
    workers: usize,
) -> Result<Estimate> {
    cfg.validate()?;
    if t > cfg.max_time {
        return Err(Error::pre("survival horizon exceeds max_time"));
    }
    if !domain.contains(x) {
        return Err(Error::pre(
            "survival_probability: x must lie inside the domain",
        ));
    }
    if t == 0.0 {
        let mut m = Moments::default();
        for _ in 0..n {
            m.push(1.0);
        }
        return Ok(m.estimate(cfg.seed));
    }
    let seed = cfg.seed;
    let partials = with_pool(workers, || {
        map_chunks(n, CHUNK, |range| {
            let mut m = Moments::default();
            for i in range {
                let mut rng = path_rng(seed, i as u64);
                let alive = matches!(
                    walk_until(domain, x, t, cfg, mover, &mut rng),
                    WalkOutcome::Alive(_)
                );
                m.push(if alive { 1.0 } else { 0.0 });
            }
            m
        })
    });
    Ok(Moments::merge(partials).estimate(seed))
}

/// Survival counts over a whole time grid from one batch of paths (the grid
/// shares paths, so the curve is exactly nonincreasing).
pub fn survival_curve(
    domain: &Domain,
    x: Point,
    t_grid: &[f64],
    n: usize,
    cfg: &SimConfig,
    mover: Mover,
    workers: usize,
) -> Result<Vec<u64>> {
    cfg.validate()?;
    if t_grid.windows(2).any(|w| w[1] <= w[0]) || t_grid.is_empty() {
        return Err(Error::pre(
            "t_grid must be strictly increasing and nonempty",
        ));
    }
    let t_max = *t_grid.last().unwrap();
    if t_max > cfg.max_time {
        return Err(Error::pre("t_grid exceeds max_time"));
    }
    if !domain.contains(x) {
        return Err(Error::pre("survival_curve: x must lie inside the domain"));
    }
    let seed = cfg.seed;
    let partials = with_pool(workers, || {
        map_chunks(n, CHUNK, |range| {
            let mut counts = vec![0u64; t_grid.len()];
            for i in range {
                let mut rng = path_rng(seed, i as u64);
                let exit_time = match walk_until(domain, x, t_max, cfg, mover, &mut rng) {
                    WalkOutcome::Alive(_) => f64::INFINITY,
                    WalkOutcome::Exited { time, .. } => time,
                };
                for (k, &t) in t_grid.iter().enumerate() {
                    if exit_time > t {
                        counts[k] += 1;
                    }
                }
            }
            counts
        })
    });
    let mut counts = vec![0u64; t_grid.len()];
    for p in partials {
        for (c, v) in counts.iter_mut().zip(p) {
            *c += v;
        }
    }
    Ok(counts)
}

/// Mean Brownian exit time from `x`; truncated paths contribute `max_time`
/// and a warning is attached when they exceed 1% of the sample.
pub fn expected_exit_time(
    domain: &Domain,
    x: Point,
    n: usize,
    cfg: &SimConfig,
    workers: usize,
) -> Result<Estimate> {
    cfg.validate()?;
    if !domain.contains(x) {
        return Err(Error::pre(
            "expected_exit_time: x must lie inside the domain",
        ));
    }
    let seed = cfg.seed;
    let partials = with_pool(workers, || {
        map_chunks(n, CHUNK, |range| {
            let mut m = Moments::default();
            for i in range {
                let mut rng = path_rng(seed, i as u64);
                let sp = sample_exit(domain, x, cfg, &mut rng).expect("walk");
                if sp.truncated {
                    m.push_truncated(Some(cfg.max_time));
                } else {
                    m.push(sp.exit_time);
                }
            }
            m
        })
    });
    let mut est = Moments::merge(partials).estimate(seed);
    if est.truncated_fraction > 0.01 {
        let tf = est.truncated_fraction;
        est = est.with_warning(format!(
            "truncated_fraction {tf:.3} > 0.01; mean exit time is horizon-biased"
        ));
    }
    Ok(est)
}

/// Principal Dirichlet eigenvalue by Kac's asymptotics: the weighted
/// least-squares slope of -log P(T > t) over the tail-linear window of the
/// grid. Grid points with survival mass below `p_min = 50/n` are dropped as
/// bias-dominated; at least four usable points are required.
pub fn kac_eigenvalue(
    domain: &Domain,
    x: Point,
    t_grid: &[f64],
    n: usize,
    cfg: &SimConfig,
    workers: usize,
) -> Result<Estimate> {
    if t_grid.len() < 4 {
        return Err(Error::pre("kac_eigenvalue needs a t_grid with >= 4 points"));
    }
    let mover = Mover::Brownian { dim: domain.dim() };
    let counts = survival_curve(domain, x, t_grid, n, cfg, mover, workers)?;
    let p_min = 50.0 / n as f64;
    let mut ts = Vec::new();
    let mut ys = Vec::new();
    let mut ws = Vec::new();
    for (k, &c) in counts.iter().enumerate() {
        let p = c as f64 / n as f64;
        if p >= p_min {
            ts.push(t_grid[k]);
            ys.push(-p.ln());
            // delta method: Var(-ln p_hat) ~ (1-p)/(n p)
            ws.push(n as f64 * p / (1.0 - p).max(1e-12));
        }
    }
    if ts.len() < 4 {
        return Err(Error::Numeric(
            "insufficient survival mass; shrink t_grid or raise n".into(),
        ));
    }
    let wsum: f64 = ws.iter().sum();
    let tbar: f64 = ts.iter().zip(&ws).map(|(t, w)| t * w).sum::<f64>() / wsum;
    let ybar: f64 = ys.iter().zip(&ws).map(|(y, w)| y * w).sum::<f64>() / wsum;
    let sxx: f64 = ts
        .iter()
        .zip(&ws)
        .map(|(t, w)| w * (t - tbar) * (t - tbar))
        .sum();
    let sxy: f64 = ts
        .iter()
        .zip(&ys)
        .zip(&ws)
        .map(|((t, y), w)| w * (t - tbar) * (y - ybar))
        .sum();
    let slope = sxy / sxx;
    let stderr = (1.0 / sxx).sqrt();
    let truncated_fraction = *counts.last().unwrap() as f64 / n as f64;
    Ok(Estimate {
        mean: slope,
        stderr,
        n: n as u64,
        seed: cfg.seed,
        truncated_fraction,
        warning: None,
    })
}

/// Probability that a path from `x` (outside `target`) hits it before
/// `max_time`. Paths that never resolve are counted as non-hits and the
/// whole unresolved mass is reported in `truncated_fraction` as a one-sided
/// bias bound (transient processes genuinely never hit with positive
/// probability).
pub fn hitting_probability(
    target: &Domain,
    x: Point,
    p: &StableParams,
    cfg: &SimConfig,
    n: usize,
    workers: usize,
) -> Result<Estimate> {
    cfg.validate()?;
    if target.contains(x) {
        return Err(Error::pre(
            "hitting_probability: x must start outside the target",
        ));
    }
    let seed = cfg.seed;
    let brownian_like = p.alpha >= 2.0;
    let params = *p;
    let partials = with_pool(workers, || {
        map_chunks(n, CHUNK, |range| {
            let mut m = Moments::default();
            for i in range {
                let mut rng = path_rng(seed, i as u64);
                let hit = run_hit_path(target, x, &params, cfg, brownian_like, &mut rng);
                if hit {
                    m.push(1.0);
                } else {
                    m.push_truncated(Some(0.0));
                }
            }
            m
        })
    });
    Ok(Moments::merge(partials).estimate(seed))
}

fn run_hit_path(
    target: &Domain,
    x: Point,
    p: &StableParams,
    cfg: &SimConfig,
    brownian_like: bool,
    rng: &mut rand_chacha::ChaCha8Rng,
) -> bool {
    use rand::Rng;
    let mut pos = x;
    let mut t = 0.0;
    while t < cfg.max_time {
        let next = crate::stochastic::stable_step(pos, cfg.dt, p, rng);
        let u: f64 = rng.random();
        if brownian_like {
            // continuous path: segment test plus a bridge correction on the
            // outside distance (speed-2 Brownian: per-coordinate variance 2dt)
            if target.segment_hits(pos, next) {
                return true;
            }
            if let (Some(d1), Some(d2)) =
                (target.outside_distance(pos), target.outside_distance(next))
            {
                let e = d1 * d2 / cfg.dt;
                if e < 30.0 && u < (-e).exp() {
                    return true;
                }
            }
        } else {
            // pure-jump path: endpoint membership only; jumps across the
            // target must not count as hits
            if target.contains(next) {
                return true;
            }
        }
        pos = next;
        t += cfg.dt;
    }
    false
}

/// Evaluates the Carleman harmonic-measure bound
/// `3M / sqrt(2 pi r0 * Int_x0^b exp(2 pi Int_x0^t dx / l(x)) dt)`
/// by trapezoid quadrature on the supplied width profile, clamped to <= 1.
pub fn carleman_bound(xs: &[f64], ls: &[f64], m_width: f64, r0: f64) -> Result<f64> {
    if xs.len() != ls.len() || xs.len() < 2 {
        return Err(Error::pre(
            "carleman_bound needs matching xs/ls with >= 2 nodes",
        ));
    }
    if xs.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::pre("carleman_bound profile grid must be increasing"));
    }
    if ls.iter().any(|&l| !(l > 0.0)) {
        return Err(Error::pre("carleman_bound requires widths l(x) > 0"));
    }
    if ls.iter().any(|&l| l > m_width * (1.0 + 1e-12)) {
        return Err(Error::pre("carleman_bound requires l(x) <= M"));
    }
    if !(r0 > 0.0) {
        return Err(Error::pre("carleman_bound requires r0 > 0"));
    }
    let mut inner = 0.0f64; // cumulative trapezoid of dx / l
    let mut outer = 0.0f64; // trapezoid of exp(2 pi inner)
    let mut prev_exp = 1.0f64; // exp at x0, inner = 0
    for w in 0..xs.len() - 1 {
        let h = xs[w + 1] - xs[w];
        inner += 0.5 * h * (1.0 / ls[w] + 1.0 / ls[w + 1]);
        let cur_exp = (2.0 * std::f64::consts::PI * inner).exp();
        outer += 0.5 * h * (prev_exp + cur_exp);
        prev_exp = cur_exp;
    }
    let denom = (2.0 * std::f64::consts::PI * r0 * outer).sqrt();
    if denom == 0.0 {
        return Ok(1.0);
    }
    Ok((3.0 * m_width / denom).min(1.0))
}

/// P(path from `x` stays in `domain` up to `t` and sits in `target_set` at
/// time `t`) -- the polarization comparison quantity.
pub fn stay_and_arrive(
    domain: &Domain,
    target_set: &Domain,
    x: Point,
    t: f64,
    n: usize,
    cfg: &SimConfig,
    workers: usize,
) -> Result<Estimate> {
    cfg.validate()?;
    if !domain.contains(x) {
        return Err(Error::pre("stay_and_arrive: x must lie inside the domain"));
    }
    let seed = cfg.seed;
    let mover = Mover::Brownian { dim: domain.dim() };
    let partials = with_pool(workers, || {
        map_chunks(n, CHUNK, |range| {
            let mut m = Moments::default();
            for i in range {
                let mut rng = path_rng(seed, i as u64);
                let v = match walk_until(domain, x, t, cfg, mover, &mut rng) {
                    WalkOutcome::Alive(p) if target_set.contains(p) => 1.0,
                    _ => 0.0,
                };
                m.push(v);
            }
            m
        })
    });
    Ok(Moments::merge(partials).estimate(seed))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn discrete_measure_normalizes_and_validates() {
        let pts = vec![Point::ZERO, Point::xy(1.0, 0.0)];
        let m = DiscreteMeasure::new(pts.clone(), vec![1.0, 3.0]).unwrap();
        assert!((m.weights.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        assert!(DiscreteMeasure::new(pts, vec![1.0, -0.5]).is_err());
    }

    #[test]
    fn carleman_constant_strip_matches_closed_form() {
        // l = M: inner integral is 2 pi (t - x0) / M, outer integrates to
        // (M / 2 pi)(e^{2 pi (b - x0)/M} - 1)
        let m_width = 1.0;
        let r0 = 0.25;
        let (x0, b) = (0.0, 1.5);
        let n = 4001;
        let xs: Vec<f64> = (0..n)
            .map(|i| x0 + (b - x0) * i as f64 / (n - 1) as f64)
            .collect();
        let ls = vec![m_width; n];
        let got = carleman_bound(&xs, &ls, m_width, r0).unwrap();
        let outer = m_width / (2.0 * std::f64::consts::PI)
            * ((2.0 * std::f64::consts::PI * (b - x0) / m_width).exp() - 1.0);
        let want = (3.0 * m_width / (2.0 * std::f64::consts::PI * r0 * outer).sqrt()).min(1.0);
        assert!((got - want).abs() / want < 1e-6, "got {got} want {want}");
    }

    #[test]
    fn carleman_monotone_in_width_and_degenerate_clamp() {
        let n = 512;
        let xs: Vec<f64> = (0..n).map(|i| i as f64 / (n - 1) as f64).collect();
        let wide = carleman_bound(&xs, &vec![1.0; n], 1.0, 0.2).unwrap();
        let narrow = carleman_bound(&xs, &vec![0.5; n], 1.0, 0.2).unwrap();
        assert!(wide >= narrow);
        // b -> x0: vanishing outer integral clamps to 1
        let xs2 = vec![0.0, 1e-9];
        let b = carleman_bound(&xs2, &[1.0, 1.0], 1.0, 0.2).unwrap();
        assert_eq!(b, 1.0);
        assert!(carleman_bound(&xs2, &[1.0, -1.0], 1.0, 0.2).is_err());
    }
}
