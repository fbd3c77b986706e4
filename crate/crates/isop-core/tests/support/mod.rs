//! Independent analytic oracles shared by the integration and acceptance
//! suites. Everything here is computed from classical formulas (Bessel
//! series, separation of variables, quadrature) and never touches the
//! sampler code paths it is used to judge.
#![allow(dead_code)]

use std::f64::consts::PI;

/// J0 by its integral representation (1/pi) Int_0^pi cos(x sin th) dth;
/// the trapezoid rule converges spectrally for this periodic integrand.
pub fn bessel_j0(x: f64) -> f64 {
    const N: usize = 512;
    let h = PI / N as f64;
    let mut s = 0.5 * ((x * (0.0f64).sin()).cos() + (x * PI.sin()).cos());
    for i in 1..N {
        s += (x * (i as f64 * h).sin()).cos();
    }
    s * h / PI
}

/// J1 = (1/pi) Int_0^pi cos(th - x sin th) dth.
pub fn bessel_j1(x: f64) -> f64 {
    const N: usize = 512;
    let h = PI / N as f64;
    let f = |th: f64| (th - x * th.sin()).cos();
    let mut s = 0.5 * (f(0.0) + f(PI));
    for i in 1..N {
        s += f(i as f64 * h);
    }
    s * h / PI
}

/// First `k` positive zeros of J0, bracketed by McMahon's expansion and
/// refined by bisection.
pub fn bessel_j0_zeros(k: usize) -> Vec<f64> {
    (1..=k)
        .map(|m| {
            let beta = (m as f64 - 0.25) * PI;
            let guess = beta + 1.0 / (8.0 * beta);
            let (mut lo, mut hi) = (guess - 0.5, guess + 0.5);
            assert!(bessel_j0(lo) * bessel_j0(hi) < 0.0);
            for _ in 0..80 {
                let mid = 0.5 * (lo + hi);
                if bessel_j0(lo) * bessel_j0(mid) <= 0.0 {
                    hi = mid;
                } else {
                    lo = mid;
                }
            }
            0.5 * (lo + hi)
        })
        .collect()
}

/// Survival probability of half-Laplacian Brownian motion started at the
/// center of a disk of radius `r`: the radial Dirichlet heat series
/// truncated at 20 Bessel modes.
pub fn disk_survival_from_center(t: f64, r: f64) -> f64 {
    let zeros = bessel_j0_zeros(20);
    let mut s = 0.0;
    for &j in &zeros {
        let c = 2.0 / (j * bessel_j1(j));
        s += c * (-j * j * t / (2.0 * r * r)).exp();
    }
    s
}

/// Survival in the interval [0, L] from its midpoint (half-Laplacian),
/// separation-of-variables series.
pub fn interval_survival_from_center(t: f64, l: f64) -> f64 {
    let mut s = 0.0;
    for m in (1..200).step_by(2) {
        let sign = if (m - 1) % 4 == 0 { 1.0 } else { -1.0 };
        s += 4.0 / (m as f64 * PI)
            * sign
            * (-(m as f64 * m as f64) * PI * PI * t / (2.0 * l * l)).exp();
    }
    s
}

/// Survival in an a x b rectangle from its center: product of the two
/// one-dimensional factors.
pub fn rect_survival_from_center(t: f64, a: f64, b: f64) -> f64 {
    interval_survival_from_center(t, a) * interval_survival_from_center(t, b)
}

/// Harmonic measure of the arc [th1, th2] of the unit circle from `x` on
/// the real axis: Simpson quadrature of the Poisson kernel
/// (1 - |x|^2) / (2 pi |e^{i th} - x|^2).
pub fn poisson_arc_probability(x: f64, th1: f64, th2: f64) -> f64 {
    let n = 4096;
    let h = (th2 - th1) / n as f64;
    let f = |th: f64| {
        let dx = th.cos() - x;
        let dy = th.sin();
        (1.0 - x * x) / (2.0 * PI * (dx * dx + dy * dy))
    };
    let mut s = f(th1) + f(th2);
    for i in 1..n {
        let w = if i % 2 == 1 { 4.0 } else { 2.0 };
        s += w * f(th1 + i as f64 * h);
    }
    s * h / 3.0
}

/// Harmonic measure of the inner circle of the annulus r1 < |z| < r2 from
/// radius `r`: the radial Laplace solution log(r2/r) / log(r2/r1).
pub fn annulus_inner_probability(r1: f64, r2: f64, r: f64) -> f64 {
    (r2 / r).ln() / (r2 / r1).ln()
}

/// Principal Dirichlet eigenvalue (half-Laplacian) of a disk of radius r.
pub fn disk_eigenvalue(r: f64) -> f64 {
    let j0 = bessel_j0_zeros(1)[0];
    j0 * j0 / (2.0 * r * r)
}

/// Principal Dirichlet eigenvalue (half-Laplacian) of an a x b rectangle.
pub fn rect_eigenvalue(a: f64, b: f64) -> f64 {
    PI * PI / 2.0 * (1.0 / (a * a) + 1.0 / (b * b))
}

/// Two-sided z distance of an estimate from an oracle value.
pub fn z_score(mean: f64, stderr: f64, oracle: f64) -> f64 {
    (mean - oracle) / stderr.max(1e-300)
}
