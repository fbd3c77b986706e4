//! Riesz energies, the energy-minimization capacity oracle (Frank-Wolfe on
//! the probability simplex), Spitzer heat-content capacity, and the
//! Wiener-sausage expectation.

use rand::Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::estimators::special::ln_gamma;
use crate::estimators::{map_chunks, with_pool, DiscreteMeasure, Estimate};
use crate::geometry::{Domain, Point};
use crate::stochastic::sausage::{GridSpec, SausageBuffer, SausageShape};
use crate::stochastic::{bm_step, path_rng, SimConfig};

/// Riesz kernel normalization `Gamma((n - alpha)/2) /
/// (Gamma(alpha/2) pi^{n/2} 2^{alpha - 1})`; at `alpha = 2, n = 3` this is
/// the Green constant `1 / (2 pi)` of half-Laplacian Brownian motion.
pub fn riesz_kernel_constant(alpha: f64, n_dim: usize) -> Result<f64> {
    if !(alpha > 0.0 && alpha < n_dim as f64) {
        return Err(Error::pre("riesz kernel requires 0 < alpha < n"));
    }
    let n = n_dim as f64;
    let log_c = ln_gamma((n - alpha) / 2.0)
        - ln_gamma(alpha / 2.0)
        - (n / 2.0) * std::f64::consts::PI.ln()
        - (alpha - 1.0) * 2.0f64.ln();
    Ok(log_c.exp())
}

/// Uniform ball self-energy coefficient: the energy of a uniform unit-mass
/// ball of radius rho under the Newtonian kernel is (6/5) k(rho). Used as a
/// first-order correction for atom self-energy at all (alpha, n); exact at
/// alpha = 2, n = 3.
const SELF_ENERGY_BALL: f64 = 6.0 / 5.0;

/// Double-sum Riesz energy of a discrete measure, with an optional
/// self-energy correction treating each atom as a uniform ball of half its
/// nearest-neighbor distance. Errors on duplicate points.
pub fn riesz_energy(
    mu: &DiscreteMeasure,
    alpha: f64,
    n_dim: usize,
    self_energy: bool,
) -> Result<f64> {
    let c = riesz_kernel_constant(alpha, n_dim)?;
    let pow = alpha - n_dim as f64;
    let n = mu.points.len();
    let mut nearest = vec![f64::INFINITY; n];
    let mut pair = 0.0f64;
    for i in 0..n {
        for j in (i + 1)..n {
            let d = mu.points[i].dist(mu.points[j]);
            if d < 1e-12 {
                return Err(Error::pre("duplicate points in Riesz energy"));
            }
            pair += 2.0 * mu.weights[i] * mu.weights[j] * c * d.powf(pow);
            nearest[i] = nearest[i].min(d);
            nearest[j] = nearest[j].min(d);
        }
    }
    let mut total = pair;
    if self_energy && n > 1 {
        for i in 0..n {
            let rho = 0.5 * nearest[i];
            total += mu.weights[i] * mu.weights[i] * SELF_ENERGY_BALL * c * rho.powf(pow);
        }
    }
    Ok(total)
}

/// Energy-minimization capacity: minimizes the quadratic Riesz energy over
/// the probability simplex on the given surface points by Frank-Wolfe with
/// exact line search (linear minimization oracle: all mass on the point of
/// least potential). Returns `1 / E(w*)` and the minimizing measure; the
/// energy trace is nonincreasing by construction. Non-convergence within
/// `iters` returns the best iterate with a warning.
pub fn capacity_energy(
    surface_points: &[Point],
    alpha: f64,
    n_dim: usize,
    iters: usize,
    self_energy: bool,
    workers: usize,
) -> Result<(Estimate, DiscreteMeasure)> {
    let n = surface_points.len();
    if n < 2 {
        return Err(Error::pre(
            "capacity_energy needs at least 2 surface points",
        ));
    }
    let c = riesz_kernel_constant(alpha, n_dim)?;
    let pow = alpha - n_dim as f64;

    // Dense kernel matrix with the self-energy diagonal.
    let matrix: Vec<Vec<f64>> = with_pool(workers, || {
        (0..n)
            .into_par_iter()
            .map(|i| {
                let mut row = vec![0.0f64; n];
                let mut nearest = f64::INFINITY;
                for j in 0..n {
                    if i == j {
                        continue;
                    }
                    let d = surface_points[i].dist(surface_points[j]);
                    row[j] = c * d.powf(pow);
                    nearest = nearest.min(d);
                }
                row[i] = if self_energy {
                    SELF_ENERGY_BALL * c * (0.5 * nearest).powf(pow)
                } else {
                    0.0
                };
                row
            })
            .collect()
    });
    if matrix.iter().any(|r| r.iter().any(|v| !v.is_finite())) {
        return Err(Error::pre("duplicate points in capacity_energy"));
    }

    let matvec = |w: &[f64]| -> Vec<f64> {
        with_pool(workers, || {
            matrix
                .par_iter()
                .map(|row| row.iter().zip(w).map(|(m, x)| m * x).sum::<f64>())
                .collect()
        })
    };

    let mut w = vec![1.0 / n as f64; n];
    let mut mw = matvec(&w);
    let mut energy: f64 = w.iter().zip(&mw).map(|(a, b)| a * b).sum();
    let mut converged = false;
    let mut used = 0usize;
    for it in 0..iters {
        used = it + 1;
        // LMO: vertex with the least potential
        let j = mw
            .iter()
            .enumerate()
            .min_by(|a, b| a.1.partial_cmp(b.1).unwrap())
            .unwrap()
            .0;
        let gap = 2.0 * (energy - mw[j]);
        if gap <= 1e-10 * energy.abs().max(1e-300) {
            converged = true;
            break;
        }
        // exact line search along d = e_j - w for the quadratic form
        let dmd = matrix[j][j] - 2.0 * mw[j] + energy;
        let gamma = if dmd > 0.0 {
            ((energy - mw[j]) / dmd).clamp(0.0, 1.0)
        } else {
            1.0
        };
        if gamma == 0.0 {
            converged = true;
            break;
        }
        // w <- (1-gamma) w + gamma e_j;  Mw <- (1-gamma) Mw + gamma M[:,j]
        for i in 0..n {
            w[i] *= 1.0 - gamma;
            mw[i] = (1.0 - gamma) * mw[i] + gamma * matrix[j][i];
        }
        w[j] += gamma;
        energy = w.iter().zip(&mw).map(|(a, b)| a * b).sum();
    }
    let measure = DiscreteMeasure::new(surface_points.to_vec(), w)?;
    let mut est = Estimate {
        mean: 1.0 / energy,
        stderr: 0.0,
        n: used as u64,
        seed: 0,
        truncated_fraction: 0.0,
        warning: None,
    };
    if !converged {
        est = est.with_warning("Frank-Wolfe gap tolerance not reached; best iterate returned");
    }
    Ok((est, measure))
}

/// Deterministic quasi-uniform point cloud on a sphere (Fibonacci lattice).
pub fn fibonacci_sphere(n: usize, radius: f64, center: Point) -> Vec<Point> {
    let golden = (1.0 + 5.0f64.sqrt()) / 2.0;
    (0..n)
        .map(|i| {
            let z = 1.0 - 2.0 * (i as f64 + 0.5) / n as f64;
            let r = (1.0 - z * z).max(0.0).sqrt();
            let th = 2.0 * std::f64::consts::PI * (i as f64 / golden).fract();
            center + Point::new(r * th.cos(), r * th.sin(), z) * radius
        })
        .collect()
}

fn coverage_check(target: &Domain, sampling_box: &Domain, t_max: f64) -> Result<()> {
    // The box must cover the target dilated by the *ball* of radius
    // 4 sqrt(t): probe the bounding box of the target pushed outward along
    // a sphere of directions.
    let (lo, hi) = target.bounding_box();
    let margin = 4.0 * t_max.sqrt();
    let mut probes = Vec::new();
    for dir in fibonacci_sphere(64, 1.0, Point::ZERO) {
        let support = Point::new(
            if dir.x >= 0.0 { hi.x } else { lo.x },
            if dir.y >= 0.0 { hi.y } else { lo.y },
            if dir.z >= 0.0 { hi.z } else { lo.z },
        );
        probes.push(support + dir * margin);
    }
    if probes.iter().any(|p| !sampling_box.contains(*p)) {
        let need = probes.iter().map(|p| p.norm()).fold(0.0f64, f64::max);
        return Err(Error::pre(format!(
            "sampling box too small: must cover the target dilated by 4 sqrt(t) \
             (origin-centered radius >= {need:.3})"
        )));
    }
    Ok(())
}

/// First Brownian hitting time of `target` from `x`, up to `t_max`
/// (segment-proximity test plus a bridge correction on the outside
/// distance). Paths farther than five standard deviations of the remaining
/// horizon are rejected early; the discarded hitting mass is below
/// exp(-12.5) per path.
fn brownian_hit_time(
    target: &Domain,
    x: Point,
    t_max: f64,
    cfg: &SimConfig,
    rng: &mut rand_chacha::ChaCha8Rng,
) -> Option<f64> {
    let mut pos = x;
    let mut t = 0.0;
    while t < t_max {
        if let Some(d) = target.outside_distance(pos) {
            if d * d > 25.0 * (t_max - t) {
                return None;
            }
        }
        let next = bm_step(pos, cfg.dt, 3, rng);
        let u: f64 = rng.random();
        if target.segment_hits(pos, next) {
            return Some(t + 0.5 * cfg.dt);
        }
        if let (Some(d1), Some(d2)) = (target.outside_distance(pos), target.outside_distance(next))
        {
            let e = 2.0 * d1 * d2 / cfg.dt;
            if e < 30.0 && u < (-e).exp() {
                return Some(t + 0.5 * cfg.dt);
            }
        }
        pos = next;
        t += cfg.dt;
    }
    None
}

/// Heat content `E_A(t) = Int P_x(tau_A < t) dx` in R^3, estimated as
/// `vol(box minus A) * hit-fraction + vol(A)` over uniform starts in the
/// sampling box outside `A`.
pub fn heat_content(
    target: &Domain,
    t: f64,
    sampling_box: &Domain,
    n: usize,
    cfg: &SimConfig,
    workers: usize,
) -> Result<Estimate> {
    cfg.validate()?;
    if target.dim() != 3 || sampling_box.dim() != 3 {
        return Err(Error::pre("heat_content is defined for d = 3"));
    }
    coverage_check(target, sampling_box, t)?;
    let vol_box = sampling_box
        .volume()
        .ok_or_else(|| Error::pre("sampling box needs an analytic volume"))?;
    let vol_a = target
        .volume()
        .ok_or_else(|| Error::pre("target needs an analytic volume"))?;
    let vol_out = vol_box - vol_a;
    let seed = cfg.seed;
    let partials = with_pool(workers, || {
        map_chunks(n, super::CHUNK, |range| {
            let mut hits = 0u64;
            let mut total = 0u64;
            for i in range {
                let mut rng = path_rng(seed, i as u64);
                let x = loop {
                    let p = sampling_box.sample_uniform(&mut rng).expect("box sampling");
                    if !target.contains(p) {
                        break p;
                    }
                };
                if brownian_hit_time(target, x, t, cfg, &mut rng).is_some() {
                    hits += 1;
                }
                total += 1;
            }
            (hits, total)
        })
    });
    let (hits, total) = partials
        .into_iter()
        .fold((0u64, 0u64), |a, b| (a.0 + b.0, a.1 + b.1));
    let p = hits as f64 / total as f64;
    let var = p * (1.0 - p) / total as f64;
    Ok(Estimate {
        mean: vol_out * p + vol_a,
        stderr: vol_out * var.sqrt(),
        n: total,
        seed,
        truncated_fraction: 0.0,
        warning: None,
    })
}

/// Least-squares row extracting the linear coefficient of the model
/// `E(t) = c1 t + c2 sqrt(t) + c3` over the grid.
fn spitzer_fit_row(t_grid: &[f64]) -> Result<Vec<f64>> {
    let k = t_grid.len();
    if k < 3 {
        return Err(Error::pre(
            "capacity_spitzer needs a t_grid with >= 3 points",
        ));
    }
    let x: Vec<[f64; 3]> = t_grid.iter().map(|&t| [t, t.sqrt(), 1.0]).collect();
    let mut g = [[0.0f64; 3]; 3];
    for xi in &x {
        for a in 0..3 {
            for b in 0..3 {
                g[a][b] += xi[a] * xi[b];
            }
        }
    }
    let det = det3(&g);
    let scale: f64 = g.iter().flatten().map(|v| v.abs()).fold(0.0, f64::max);
    if det.abs() < 1e-10 * scale.powi(3) {
        return Err(Error::Numeric(
            "spitzer fit is ill-conditioned; spread the t_grid".into(),
        ));
    }
    let ginv = inv3(&g, det);
    // row of (G^-1 X^T) for the c1 component
    Ok(x.iter()
        .map(|xi| ginv[0][0] * xi[0] + ginv[0][1] * xi[1] + ginv[0][2] * xi[2])
        .collect())
}

fn det3(m: &[[f64; 3]; 3]) -> f64 {
    m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1])
        - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
        + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0])
}

fn inv3(m: &[[f64; 3]; 3], det: f64) -> [[f64; 3]; 3] {
    let c = |r: usize, s: usize| {
        let (r1, r2) = match r {
            0 => (1, 2),
            1 => (0, 2),
            _ => (0, 1),
        };
        let (s1, s2) = match s {
            0 => (1, 2),
            1 => (0, 2),
            _ => (0, 1),
        };
        let minor = m[r1][s1] * m[r2][s2] - m[r1][s2] * m[r2][s1];
        if (r + s) % 2 == 0 {
            minor
        } else {
            -minor
        }
    };
    let mut out = [[0.0f64; 3]; 3];
    for r in 0..3 {
        for s in 0..3 {
            out[r][s] = c(s, r) / det; // adjugate transpose
        }
    }
    out
}

/// Spitzer capacity: fits `E_A(t) = c1 t + c2 sqrt(t) + c3` over the grid
/// (the sqrt term is an extrapolation device for the d = 3 heat-content
/// shape) and returns `c1`. All grid points share paths, so the fit
/// variance comes from per-path second differences, not independent runs.
pub fn capacity_spitzer(
    target: &Domain,
    t_grid: &[f64],
    sampling_box: &Domain,
    n: usize,
    cfg: &SimConfig,
    workers: usize,
) -> Result<Estimate> {
    cfg.validate()?;
    if target.dim() != 3 {
        return Err(Error::pre("capacity_spitzer is defined for d = 3"));
    }
    if t_grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::pre("t_grid must be strictly increasing"));
    }
    let row = spitzer_fit_row(t_grid)?;
    let t_max = *t_grid.last().unwrap();
    coverage_check(target, sampling_box, t_max)?;
    let vol_box = sampling_box
        .volume()
        .ok_or_else(|| Error::pre("sampling box needs an analytic volume"))?;
    let vol_a = target
        .volume()
        .ok_or_else(|| Error::pre("target needs an analytic volume"))?;
    let vol_out = vol_box - vol_a;
    let seed = cfg.seed;
    let partials = with_pool(workers, || {
        map_chunks(n, super::CHUNK, |range| {
            let (mut s, mut s2) = (0.0f64, 0.0f64);
            let mut total = 0u64;
            for i in range {
                let mut rng = path_rng(seed, i as u64);
                let x = loop {
                    let p = sampling_box.sample_uniform(&mut rng).expect("box sampling");
                    if !target.contains(p) {
                        break p;
                    }
                };
                let tau = brownian_hit_time(target, x, t_max, cfg, &mut rng);
                let g: f64 = t_grid
                    .iter()
                    .zip(&row)
                    .map(|(&t, &a)| if tau.is_some_and(|h| h <= t) { a } else { 0.0 })
                    .sum();
                s += g;
                s2 += g * g;
                total += 1;
            }
            (s, s2, total)
        })
    });
    let (s, s2, total) = partials
        .into_iter()
        .fold((0.0, 0.0, 0u64), |a, b| (a.0 + b.0, a.1 + b.1, a.2 + b.2));
    let nf = total as f64;
    let gbar = s / nf;
    let gvar = ((s2 - s * s / nf) / (nf - 1.0)).max(0.0);
    let row_sum: f64 = row.iter().sum();
    Ok(Estimate {
        mean: vol_out * gbar + vol_a * row_sum,
        stderr: vol_out * (gvar / nf).sqrt(),
        n: total,
        seed,
        truncated_fraction: 0.0,
        warning: None,
    })
}

/// Mean Wiener-sausage volume at a single horizon.
pub fn sausage_expectation(
    shape: &SausageShape,
    t: f64,
    n_paths: usize,
    grid: &GridSpec,
    cfg: &SimConfig,
    workers: usize,
) -> Result<Estimate> {
    let (mut ests, _) = sausage_curve(shape, &[t], n_paths, grid, cfg, workers)?;
    Ok(ests.remove(0))
}

/// Mean sausage volumes at every horizon in `t_grid` (progressive union
/// snapshots from common paths) plus the fitted linear growth rate `c1` of
/// `E(t) = c1 t + c2 sqrt(t) + c3` when the grid has >= 3 points.
pub fn sausage_curve(
    shape: &SausageShape,
    t_grid: &[f64],
    n_paths: usize,
    grid: &GridSpec,
    cfg: &SimConfig,
    workers: usize,
) -> Result<(Vec<Estimate>, Option<Estimate>)> {
    cfg.validate()?;
    if t_grid.is_empty() || t_grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::pre(
            "t_grid must be nonempty and strictly increasing",
        ));
    }
    if *t_grid.last().unwrap() > cfg.max_time {
        return Err(Error::pre("t_grid exceeds max_time"));
    }
    let row = if t_grid.len() >= 3 {
        Some(spitzer_fit_row(t_grid)?)
    } else {
        None
    };
    let seed = cfg.seed;
    let k = t_grid.len();
    // a handful of paths per chunk: each chunk owns one mark buffer
    let partials: Vec<(Vec<f64>, Vec<f64>, f64, f64, u64)> = with_pool(workers, || {
        map_chunks(n_paths, 4, |range| {
            let mut buf = SausageBuffer::new(*grid, shape).expect("stamp");
            let mut sums = vec![0.0f64; k];
            let mut sumsqs = vec![0.0f64; k];
            let (mut gs, mut gs2) = (0.0f64, 0.0f64);
            let mut count = 0u64;
            for i in range {
                let mut rng = path_rng(seed, i as u64);
                buf.clear();
                let mut pos = Point::ZERO;
                buf.mark_point(pos);
                let mut t = 0.0;
                let mut vols = vec![0.0f64; k];
                for (slot, &t_snap) in t_grid.iter().enumerate() {
                    while t < t_snap {
                        let step_dt = cfg.dt.min(t_snap - t);
                        let next = bm_step(pos, step_dt, 3, &mut rng);
                        buf.mark_step(pos, next);
                        pos = next;
                        t += step_dt;
                    }
                    vols[slot] = buf.volume();
                }
                for (slot, v) in vols.iter().enumerate() {
                    sums[slot] += v;
                    sumsqs[slot] += v * v;
                }
                if let Some(row) = &row {
                    let g: f64 = vols.iter().zip(row).map(|(v, a)| v * a).sum();
                    gs += g;
                    gs2 += g * g;
                }
                count += 1;
            }
            (sums, sumsqs, gs, gs2, count)
        })
    });
    let mut sums = vec![0.0f64; k];
    let mut sumsqs = vec![0.0f64; k];
    let (mut gs, mut gs2, mut total) = (0.0f64, 0.0f64, 0u64);
    for (s, s2, g, g2, c) in partials {
        for i in 0..k {
            sums[i] += s[i];
            sumsqs[i] += s2[i];
        }
        gs += g;
        gs2 += g2;
        total += c;
    }
    let ests: Vec<Estimate> = (0..k)
        .map(|i| Estimate::from_moments(sums[i], sumsqs[i], total, seed, 0.0))
        .collect();
    let slope = row.map(|_| {
        let nf = total as f64;
        let mean = gs / nf;
        let var = ((gs2 - gs * gs / nf) / (nf - 1.0)).max(0.0);
        Estimate {
            mean,
            stderr: (var / nf).sqrt(),
            n: total,
            seed,
            truncated_fraction: 0.0,
            warning: None,
        }
    });
    Ok((ests, slope))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn kernel_constant_newtonian_case() {
        // alpha = 2, n = 3: 1 / (2 pi)
        let c = riesz_kernel_constant(2.0, 3).unwrap();
        assert!((c - 1.0 / (2.0 * PI)).abs() < 1e-12);
        assert!(riesz_kernel_constant(3.0, 3).is_err());
    }

    #[test]
    fn riesz_energy_two_atoms() {
        let mu = DiscreteMeasure::new(vec![Point::ZERO, Point::new(1.0, 0.0, 0.0)], vec![0.5, 0.5])
            .unwrap();
        let pair_only = riesz_energy(&mu, 2.0, 3, false).unwrap();
        assert!((pair_only - 2.0 * 0.25 / (2.0 * PI)).abs() < 1e-12);
        let with_self = riesz_energy(&mu, 2.0, 3, true).unwrap();
        assert!(with_self > pair_only);
    }

    #[test]
    fn riesz_energy_scaling_homogeneity() {
        let pts = vec![
            Point::new(0.1, 0.2, -0.3),
            Point::new(0.7, -0.1, 0.4),
            Point::new(-0.5, 0.6, 0.0),
        ];
        let mu = DiscreteMeasure::uniform(pts.clone()).unwrap();
        let s = 2.5f64;
        let scaled = DiscreteMeasure::uniform(pts.iter().map(|p| *p * s).collect()).unwrap();
        let alpha = 1.3;
        let e1 = riesz_energy(&mu, alpha, 3, false).unwrap();
        let e2 = riesz_energy(&scaled, alpha, 3, false).unwrap();
        assert!((e2 - s.powf(alpha - 3.0) * e1).abs() < 1e-12 * e1.abs());
    }

    #[test]
    fn riesz_energy_rejects_duplicates() {
        let mu = DiscreteMeasure::uniform(vec![Point::ZERO, Point::ZERO]).unwrap();
        assert!(riesz_energy(&mu, 2.0, 3, false).is_err());
    }

    #[test]
    fn uniform_sphere_energy_near_one_over_2pi() {
        let pts = fibonacci_sphere(2000, 1.0, Point::ZERO);
        let mu = DiscreteMeasure::uniform(pts).unwrap();
        let e = riesz_energy(&mu, 2.0, 3, true).unwrap();
        let want = 1.0 / (2.0 * PI);
        assert!((e - want).abs() / want < 0.02, "energy {e} want {want}");
    }

    #[test]
    fn capacity_energy_two_points_symmetric_optimum() {
        let pts = vec![Point::ZERO, Point::new(1.0, 0.0, 0.0)];
        let (est, mu) = capacity_energy(&pts, 2.0, 3, 500, false, 1).unwrap();
        assert!(
            (mu.weights[0] - 0.5).abs() < 1e-6,
            "weights {:?}",
            mu.weights
        );
        let energy = riesz_energy(&mu, 2.0, 3, false).unwrap();
        assert!((est.mean - 1.0 / energy).abs() < 1e-9);
    }

    #[test]
    fn spitzer_fit_row_recovers_exact_model() {
        let t = [1.0, 4.0, 9.0];
        let row = spitzer_fit_row(&t).unwrap();
        // E = 3t + 2 sqrt(t) + 5 -> c1 = 3 exactly
        let e: Vec<f64> = t.iter().map(|&t| 3.0 * t + 2.0 * t.sqrt() + 5.0).collect();
        let c1: f64 = row.iter().zip(&e).map(|(a, b)| a * b).sum();
        assert!((c1 - 3.0).abs() < 1e-9, "c1 {c1}");
    }
}
