//! Set representations, distances, reflections and dilations shared by the
//! symmetrization transforms and the path samplers.

mod domain;
mod raster;

pub use domain::{Domain, ExitHit};
pub use raster::{volume, RasterSet};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A point of R^2 or R^3. Two-dimensional work leaves `z = 0`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Point {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl Point {
    pub const ZERO: Point = Point {
        x: 0.0,
        y: 0.0,
        z: 0.0,
    };

    pub const fn new(x: f64, y: f64, z: f64) -> Self {
        Point { x, y, z }
    }

    pub const fn xy(x: f64, y: f64) -> Self {
        Point { x, y, z: 0.0 }
    }

    #[inline]
    pub fn dot(self, o: Point) -> f64 {
        self.x * o.x + self.y * o.y + self.z * o.z
    }

    #[inline]
    pub fn norm2(self) -> f64 {
        self.dot(self)
    }

    #[inline]
    pub fn norm(self) -> f64 {
        self.norm2().sqrt()
    }

    #[inline]
    pub fn dist(self, o: Point) -> f64 {
        (self - o).norm()
    }

    pub fn coord(self, axis: usize) -> f64 {
        match axis {
            0 => self.x,
            1 => self.y,
            _ => self.z,
        }
    }

    pub fn with_coord(mut self, axis: usize, v: f64) -> Self {
        match axis {
            0 => self.x = v,
            1 => self.y = v,
            _ => self.z = v,
        }
        self
    }
}

impl std::ops::Add for Point {
    type Output = Point;
    #[inline]
    fn add(self, o: Point) -> Point {
        Point::new(self.x + o.x, self.y + o.y, self.z + o.z)
    }
}

impl std::ops::Sub for Point {
    type Output = Point;
    #[inline]
    fn sub(self, o: Point) -> Point {
        Point::new(self.x - o.x, self.y - o.y, self.z - o.z)
    }
}

impl std::ops::Mul<f64> for Point {
    type Output = Point;
    #[inline]
    fn mul(self, s: f64) -> Point {
        Point::new(self.x * s, self.y * s, self.z * s)
    }
}

impl std::ops::Neg for Point {
    type Output = Point;
    #[inline]
    fn neg(self) -> Point {
        Point::new(-self.x, -self.y, -self.z)
    }
}

/// Distance from `p` to the segment `[a, b]`.
pub fn segment_distance(p: Point, a: Point, b: Point) -> f64 {
    let ab = b - a;
    let len2 = ab.norm2();
    if len2 == 0.0 {
        return p.dist(a);
    }
    let t = ((p - a).dot(ab) / len2).clamp(0.0, 1.0);
    p.dist(a + ab * t)
}

/// Minimal distance between segments `[a0, a1]` and `[b0, b1]` (3D-safe).
pub fn segment_segment_distance(a0: Point, a1: Point, b0: Point, b1: Point) -> f64 {
    // Standard closest-point parametrisation with clamping.
    let u = a1 - a0;
    let v = b1 - b0;
    let w = a0 - b0;
    let a = u.norm2();
    let b = u.dot(v);
    let c = v.norm2();
    let d = u.dot(w);
    let e = v.dot(w);
    let denom = a * c - b * b;
    let (mut s, mut t);
    if denom > 1e-30 {
        s = ((b * e - c * d) / denom).clamp(0.0, 1.0);
    } else {
        s = 0.0;
    }
    t = if c > 1e-30 { (b * s + e) / c } else { 0.0 };
    if t < 0.0 {
        t = 0.0;
        s = if a > 1e-30 {
            (-d / a).clamp(0.0, 1.0)
        } else {
            0.0
        };
    } else if t > 1.0 {
        t = 1.0;
        s = if a > 1e-30 {
            ((b - d) / a).clamp(0.0, 1.0)
        } else {
            0.0
        };
    }
    (a0 + u * s).dist(b0 + v * t)
}

/// Oriented hyperplane `{x : <x, normal> = offset}` with positive side
/// `H+ = {<x, normal> > offset}`. Polarization pushes mass into `H+`.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct Hyperplane {
    normal: Point,
    offset: f64,
}

impl Hyperplane {
    /// Builds a hyperplane, normalizing `normal`. Errors on a zero normal.
    pub fn new(normal: Point, offset: f64) -> Result<Self> {
        let n = normal.norm();
        if n < 1e-12 {
            return Err(Error::pre("hyperplane normal must be nonzero"));
        }
        Ok(Hyperplane {
            normal: normal * (1.0 / n),
            offset: offset / n,
        })
    }

    /// Axis-aligned plane `{x_axis = c}` with `H+` on the `+axis` side.
    pub fn axis(axis: usize, c: f64) -> Self {
        let mut n = Point::ZERO;
        match axis {
            0 => n.x = 1.0,
            1 => n.y = 1.0,
            _ => n.z = 1.0,
        }
        Hyperplane {
            normal: n,
            offset: c,
        }
    }

    pub fn normal(&self) -> Point {
        self.normal
    }

    pub fn offset(&self) -> f64 {
        self.offset
    }

    /// Flips orientation (swaps `H+` and `H-`); the plane itself is unchanged.
    pub fn flipped(&self) -> Self {
        Hyperplane {
            normal: -self.normal,
            offset: -self.offset,
        }
    }

    /// Signed coordinate of `x` relative to the plane; positive in `H+`.
    #[inline]
    pub fn signed(&self, x: Point) -> f64 {
        x.dot(self.normal) - self.offset
    }

    /// Reflection `sigma_H(x) = x - 2(<x,n> - c) n`.
    #[inline]
    pub fn reflect(&self, x: Point) -> Point {
        x - self.normal * (2.0 * self.signed(x))
    }
}

/// Reflection of `x` across `h`; free-function form of [`Hyperplane::reflect`].
pub fn reflect(x: Point, h: &Hyperplane) -> Point {
    h.reflect(x)
}
