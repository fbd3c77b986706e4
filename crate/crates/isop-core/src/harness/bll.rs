//! Exact finite check of the multiple-integral rearrangement inequality:
//! for nonnegative step functions f_i on unit cells and a finite union of
//! cells A, the chain integral over A^m of prod f_i(z_i - z_{i-1}) does not
//! exceed the integral with A replaced by the centered interval of equal
//! measure, every f_i by its symmetric decreasing rearrangement, and the
//! anchor z_0 moved to the center (the P_z versus P_0 orientation of the
//! survival comparison).
//!
//! The integrals are over the *continuum*: a plain lattice-sum analogue
//! with whole-cell rearrangements is false (small counterexamples exist for
//! every tie-break convention once m >= 2), because the continuous
//! rearrangement of a step function splits each value across mirror
//! half-cells. All data here lives on the half-cell lattice where that
//! rearrangement is again a step function, and every integral is evaluated
//! in closed form: layered antiderivatives are piecewise linear, and the
//! outer integrands are polynomials of degree <= 2 per half-cell, so
//! two-point Gauss quadrature per half-cell is exact.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::harness::{Side, Verdict};
use crate::symmetrize::rearrange_values;

/// One finite instance. Each `f` holds nonnegative cell values on an odd
/// window of differences centered at 0 (entry `k` is the value on the unit
/// cell centered at `k - half`); `set` marks the cells of A inside a
/// positions window; `z0` is a position cell index (the anchor sits at its
/// center).
#[derive(Clone, Debug)]
pub struct BllInstance {
    pub fs: Vec<Vec<f64>>,
    pub set: Vec<bool>,
    pub z0: usize,
}

impl BllInstance {
    fn validate(&self) -> Result<()> {
        if self.fs.is_empty() || self.fs.len() > 3 {
            return Err(Error::pre("BLL check supports 1 <= m <= 3 factors"));
        }
        if self.set.len() > 21 || self.fs.iter().any(|f| f.len() > 21) {
            return Err(Error::pre("BLL exhaustive check caps grids at 21 cells"));
        }
        if self.fs.iter().any(|f| f.len() % 2 == 0) {
            return Err(Error::pre("difference windows must have odd length"));
        }
        if self.fs.iter().any(|f| f.iter().any(|&v| v < 0.0)) {
            return Err(Error::pre("BLL factors must be nonnegative"));
        }
        if self.z0 >= self.set.len() {
            return Err(Error::pre("z0 outside the positions window"));
        }
        if !self.set.iter().any(|&b| b) {
            return Err(Error::pre("the set A must be nonempty"));
        }
        Ok(())
    }
}

/// A step function on half-cells: `values[j]` on `[x0 + j/2, x0 + (j+1)/2)`.
struct HalfStep {
    x0: f64,
    values: Vec<f64>,
}

impl HalfStep {
    /// Embeds whole-cell data (cell width 1, window centered at 0).
    fn from_cells(cells: &[f64]) -> HalfStep {
        let half = cells.len() as f64 / 2.0;
        let mut values = Vec::with_capacity(2 * cells.len());
        for &v in cells {
            values.push(v);
            values.push(v);
        }
        HalfStep { x0: -half, values }
    }

    /// Continuous symmetric decreasing rearrangement of whole-cell data:
    /// each value occupies two mirror half-cells (the centered palindrome),
    /// realized by the discrete rearrangement of the doubled multiset.
    fn rearranged_from_cells(cells: &[f64]) -> HalfStep {
        let mut doubled = Vec::with_capacity(2 * cells.len());
        for &v in cells {
            doubled.push(v);
            doubled.push(v);
        }
        let values = rearrange_values(&doubled);
        HalfStep {
            x0: -(cells.len() as f64) / 2.0,
            values,
        }
    }

    #[inline]
    fn eval(&self, x: f64) -> f64 {
        let j = ((x - self.x0) * 2.0).floor() as i64;
        if j < 0 || j as usize >= self.values.len() {
            0.0
        } else {
            self.values[j as usize]
        }
    }

    /// Node values of the antiderivative H(x) = integral of f up to x, at
    /// the half-cell nodes; H is piecewise linear between them.
    fn antiderivative(&self) -> AntiDeriv {
        let mut nodes = Vec::with_capacity(self.values.len() + 1);
        let mut acc = 0.0;
        nodes.push(0.0);
        for &v in &self.values {
            acc += 0.5 * v;
            nodes.push(acc);
        }
        AntiDeriv { x0: self.x0, nodes }
    }
}

/// Piecewise-linear antiderivative of a half-cell step function.
struct AntiDeriv {
    x0: f64,
    nodes: Vec<f64>,
}

impl AntiDeriv {
    #[inline]
    fn eval(&self, x: f64) -> f64 {
        let t = (x - self.x0) * 2.0;
        if t <= 0.0 {
            return 0.0;
        }
        let n = self.nodes.len() - 1;
        if t >= n as f64 {
            return self.nodes[n];
        }
        let j = t.floor() as usize;
        let frac = t - j as f64;
        self.nodes[j] + (self.nodes[j + 1] - self.nodes[j]) * frac
    }
}

/// Cells of A as unit intervals `[c, c+1]`.
fn cells_of(set: &[bool]) -> Vec<f64> {
    (0..set.len())
        .filter(|&i| set[i])
        .map(|i| i as f64)
        .collect()
}

const GAUSS2: [(f64, f64); 2] = [
    (0.211_324_865_405_187_1, 0.5), // (1 - 1/sqrt(3))/2 on [0,1], weight 1/2
    (0.788_675_134_594_812_9, 0.5),
];

/// The innermost layer: G(z) = sum over cells b of Int_b f(u - z) du,
/// exact via the antiderivative.
fn g_layer(f: &AntiDeriv, cells: &[f64], z: f64) -> f64 {
    let mut s = 0.0;
    for &b in cells {
        s += f.eval(b + 1.0 - z) - f.eval(b - z);
    }
    s
}

/// Middle layer for m = 3: K(z1) = sum over b of Int_b f(u - z1) G(u) du
/// where G is the (piecewise-linear) innermost layer. For fixed z1 the
/// integrand is piecewise linear with knots on the half lattice and on
/// z1 + half lattice; trapezoid on each piece is exact.
fn k_layer(f: &HalfStep, cells: &[f64], g_anti: &AntiDeriv, g_cells: &[f64], z1: f64) -> f64 {
    let g = |u: f64| g_layer(g_anti, g_cells, u);
    let mut total = 0.0;
    let mut cuts: Vec<f64> = Vec::with_capacity(12);
    for &b in cells {
        let (lo, hi) = (b, b + 1.0);
        cuts.clear();
        cuts.push(lo);
        // knots of G(u): half lattice; knots of f(u - z1): z1 + half lattice
        let mut j = (2.0 * lo).ceil() as i64;
        while (j as f64) / 2.0 < hi {
            let x = j as f64 / 2.0;
            if x > lo {
                cuts.push(x);
            }
            j += 1;
        }
        let mut j = (2.0 * (lo - z1)).ceil() as i64;
        while z1 + (j as f64) / 2.0 < hi {
            let x = z1 + j as f64 / 2.0;
            if x > lo {
                cuts.push(x);
            }
            j += 1;
        }
        cuts.push(hi);
        cuts.sort_by(|a, b| a.partial_cmp(b).unwrap());
        for w in 0..cuts.len() - 1 {
            let (a, b2) = (cuts[w], cuts[w + 1]);
            if b2 - a < 1e-14 {
                continue;
            }
            let mid = 0.5 * (a + b2);
            let fv = f.eval(mid - z1);
            if fv == 0.0 {
                continue;
            }
            total += fv * 0.5 * (g(a) + g(b2)) * (b2 - a);
        }
    }
    total
}

/// Full chain integral over A^m with anchor z0 (a real coordinate).
fn chain_integral(fs: &[HalfStep], cells: &[f64], z0: f64) -> f64 {
    let m = fs.len();
    let f0 = &fs[0];
    // inner(z1): 1 for m = 1, G for m = 2, K for m = 3; polynomial of
    // degree <= 2 per half-cell, so 2-point Gauss per half-cell is exact
    // against the constant f0 factor.
    let anti_last = fs.last().unwrap().antiderivative();
    let inner = |z1: f64| -> f64 {
        match m {
            1 => 1.0,
            2 => g_layer(&anti_last, cells, z1),
            _ => k_layer(&fs[1], cells, &anti_last, cells, z1),
        }
    };
    let mut total = 0.0;
    let mut cuts: Vec<f64> = Vec::new();
    for &a in cells {
        let (lo, hi) = (a, a + 1.0);
        // half-cell split: every knot of f0(. - z0) lies on the half
        // lattice, as do the cell edges of both A and A*
        cuts.clear();
        cuts.push(lo);
        cuts.push(lo + 0.5);
        cuts.push(hi);
        for w in 0..cuts.len() - 1 {
            let (p, q) = (cuts[w], cuts[w + 1]);
            let fv = f0.eval(0.5 * (p + q) - z0);
            if fv == 0.0 {
                continue;
            }
            let mut piece = 0.0;
            for (node, weight) in GAUSS2 {
                piece += weight * inner(p + (q - p) * node);
            }
            total += fv * piece * (q - p);
        }
    }
    total
}

/// Both sides of the rearrangement inequality by exact integration; the
/// comparison itself carries no statistical tolerance.
pub fn check_bll_discrete(inst: &BllInstance) -> Result<Verdict> {
    inst.validate()?;
    let n = inst.set.len();
    let cells = cells_of(&inst.set);
    let k = cells.len();
    let fs: Vec<HalfStep> = inst.fs.iter().map(|f| HalfStep::from_cells(f)).collect();
    let lhs = chain_integral(&fs, &cells, inst.z0 as f64 + 0.5);

    // A* = centered interval of measure k in the window [0, n]; its cells
    // start at (n - k)/2 (a half-integer when parities differ).
    let star_start = (n as f64 - k as f64) / 2.0;
    let star_cells: Vec<f64> = (0..k).map(|i| star_start + i as f64).collect();
    let star_fs: Vec<HalfStep> = inst
        .fs
        .iter()
        .map(|f| HalfStep::rearranged_from_cells(f))
        .collect();
    let rhs = chain_integral(&star_fs, &star_cells, n as f64 / 2.0);

    let margin = rhs - lhs;
    let params = serde_json::json!({
        "m": inst.fs.len(),
        "n": n,
        "set_size": k,
        "z0": inst.z0,
    });
    Ok(Verdict::evaluate(
        "bll-discrete",
        Side::exact(lhs),
        Side::exact(rhs),
        margin,
        0.0,
        1e-10 * lhs.abs().max(rhs.abs()).max(1.0),
        0,
        params,
    ))
}

/// Seeded random instance with m in `1..=max_m`.
pub fn random_bll_instance(seed: u64, max_m: usize) -> BllInstance {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let m = 1 + (rng.random::<u64>() as usize) % max_m.clamp(1, 3);
    let n = 3 + (rng.random::<u64>() as usize) % 19; // 3..=21
    let mut set = vec![false; n];
    for s in set.iter_mut() {
        *s = rng.random::<f64>() < 0.5;
    }
    if !set.iter().any(|&b| b) {
        set[rng.random_range(0..n)] = true;
    }
    let fs = (0..m)
        .map(|_| {
            let half = rng.random_range(1..=10usize);
            (0..2 * half + 1)
                .map(|_| {
                    if rng.random::<f64>() < 0.25 {
                        0.0
                    } else {
                        rng.random::<f64>()
                    }
                })
                .collect()
        })
        .collect();
    let z0 = rng.random_range(0..n);
    BllInstance { fs, set, z0 }
}

/// An instance fixed by rearrangement: even symmetric-decreasing factors,
/// a centered odd-count set in an odd window, anchor at the center cell.
/// Both sides then run the identical computation, so the margin is exactly
/// zero.
pub fn rearranged_fixed_instance(seed: u64, max_m: usize) -> BllInstance {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let m = 1 + (rng.random::<u64>() as usize) % max_m.clamp(1, 3);
    let half_n = rng.random_range(1..=10usize);
    let n = 2 * half_n + 1;
    let k = 2 * rng.random_range(0..=half_n) + 1;
    let start = (n - k) / 2;
    let set: Vec<bool> = (0..n).map(|i| (start..start + k).contains(&i)).collect();
    let fs: Vec<Vec<f64>> = (0..m)
        .map(|_| {
            let half = rng.random_range(1..=10usize);
            // even and nonincreasing in |x|: descending profile mirrored
            let mut profile: Vec<f64> = (0..=half).map(|_| rng.random::<f64>()).collect();
            profile.sort_by(|a, b| b.partial_cmp(a).unwrap());
            let mut f = vec![0.0; 2 * half + 1];
            for (d, &v) in profile.iter().enumerate() {
                f[half + d] = v;
                f[half - d] = v;
            }
            f
        })
        .collect();
    BllInstance {
        fs,
        set,
        z0: (n - 1) / 2,
    }
}
