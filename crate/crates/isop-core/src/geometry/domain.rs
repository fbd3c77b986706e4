use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::geometry::{segment_segment_distance, Point, RasterSet};

/// Analytic (or raster-backed) shape with decidable membership, optional
/// signed distance, and a named partition of the boundary into pieces.
#[derive(Clone, Debug)]
pub enum Domain {
    Ball {
        dim: usize,
        center: Point,
        radius: f64,
    },
    Annulus {
        dim: usize,
        center: Point,
        r_inner: f64,
        r_outer: f64,
    },
    Rect {
        dim: usize,
        min: Point,
        max: Point,
    },
    /// Simple polygon in the plane; `edge_labels[i]` indexes `labels` and
    /// tags the edge from vertex `i` to vertex `i + 1`.
    Polygon2D {
        verts: Vec<Point>,
        edge_labels: Vec<usize>,
        labels: Vec<String>,
    },
    /// Unit-style disk of the given radius minus `n` closed radial slits
    /// `e^{i angle} [a, radius]`. Slits have zero thickness: membership is
    /// plain disk membership and paths hit a slit when a step segment passes
    /// within `slit_eps` of it.
    SlitDisk {
        radius: f64,
        a: f64,
        angles: Vec<f64>,
    },
    BallUnion {
        dim: usize,
        balls: Vec<(Point, f64)>,
    },
    /// Intersection of balls (a lens for two); signed distance is exact.
    BallIntersection {
        dim: usize,
        balls: Vec<(Point, f64)>,
    },
    /// Raster-backed set. If `outer_circle` is set, exits within two cells of
    /// that circle are labelled "outer", everything else "inner".
    Raster {
        set: std::sync::Arc<RasterSet>,
        outer_circle: Option<(Point, f64)>,
    },
}

/// Outcome of a segment-boundary test: where the step left the domain.
#[derive(Clone, Copy, Debug)]
pub struct ExitHit {
    /// Fraction of the step at which the exit happened, in [0, 1].
    pub t: f64,
    pub point: Point,
    pub label: usize,
}

impl Domain {
    pub fn ball(dim: usize, center: Point, radius: f64) -> Domain {
        Domain::Ball {
            dim,
            center,
            radius,
        }
    }

    pub fn annulus(dim: usize, center: Point, r_inner: f64, r_outer: f64) -> Domain {
        Domain::Annulus {
            dim,
            center,
            r_inner,
            r_outer,
        }
    }

    pub fn rect(dim: usize, min: Point, max: Point) -> Domain {
        Domain::Rect { dim, min, max }
    }

    /// Axis-aligned square/box helper used throughout the tests.
    pub fn square(side: f64) -> Domain {
        Domain::rect(2, Point::ZERO, Point::xy(side, side))
    }

    /// Radially slit disk; validates the angle ordering and `0 < a < radius`.
    pub fn slit_disk(radius: f64, a: f64, mut angles: Vec<f64>) -> Result<Domain> {
        if !(a > 0.0 && a < radius) {
            return Err(Error::pre("slit disk requires 0 < a < radius"));
        }
        angles.sort_by(|p, q| p.partial_cmp(q).unwrap());
        if angles
            .iter()
            .any(|&t| !(0.0..=2.0 * PI + 1e-12).contains(&t))
        {
            return Err(Error::pre("slit angles must lie in [0, 2pi]"));
        }
        Ok(Domain::SlitDisk { radius, a, angles })
    }

    pub fn polygon(
        verts: Vec<Point>,
        edge_labels: Vec<usize>,
        labels: Vec<String>,
    ) -> Result<Domain> {
        if verts.len() < 3 || edge_labels.len() != verts.len() {
            return Err(Error::pre(
                "polygon needs >= 3 vertices and one label per edge",
            ));
        }
        if edge_labels.iter().any(|&l| l >= labels.len()) {
            return Err(Error::pre("polygon edge label out of range"));
        }
        Ok(Domain::Polygon2D {
            verts,
            edge_labels,
            labels,
        })
    }

    pub fn raster(set: RasterSet, outer_circle: Option<(Point, f64)>) -> Domain {
        Domain::Raster {
            set: std::sync::Arc::new(set),
            outer_circle,
        }
    }

    pub fn ball_intersection(dim: usize, balls: Vec<(Point, f64)>) -> Result<Domain> {
        let d = Domain::BallIntersection { dim, balls };
        // nonempty interior check at the chord midpoint of centers
        let (lo, hi) = d.bounding_box();
        if lo.x > hi.x {
            return Err(Error::pre("ball intersection is empty"));
        }
        Ok(d)
    }

    pub fn dim(&self) -> usize {
        match self {
            Domain::Ball { dim, .. }
            | Domain::Annulus { dim, .. }
            | Domain::Rect { dim, .. }
            | Domain::BallUnion { dim, .. }
            | Domain::BallIntersection { dim, .. } => *dim,
            Domain::Polygon2D { .. } | Domain::SlitDisk { .. } => 2,
            Domain::Raster { set, .. } => set.dim(),
        }
    }

    pub fn ball_radius(&self) -> Option<f64> {
        match self {
            Domain::Ball { radius, .. } => Some(*radius),
            _ => None,
        }
    }

    /// Analytic volume where the shape has one.
    pub fn volume(&self) -> Option<f64> {
        match self {
            Domain::Ball { dim, radius, .. } => Some(ball_volume(*dim, *radius)),
            Domain::Annulus {
                dim: 2,
                r_inner,
                r_outer,
                ..
            } => Some(PI * (r_outer * r_outer - r_inner * r_inner)),
            Domain::Rect { dim, min, max } => {
                let e = *max - *min;
                Some(if *dim == 2 {
                    e.x * e.y
                } else {
                    e.x * e.y * e.z
                })
            }
            Domain::SlitDisk { radius, .. } => Some(PI * radius * radius),
            Domain::Raster { set, .. } => Some(set.volume()),
            _ => None,
        }
    }

    /// Origin-centered ball of equal volume, when the volume is known.
    pub fn schwarz_ball(&self) -> Option<Domain> {
        let v = self.volume()?;
        let r = match self.dim() {
            2 => (v / PI).sqrt(),
            _ => (3.0 * v / (4.0 * PI)).cbrt(),
        };
        Some(Domain::ball(self.dim(), Point::ZERO, r))
    }

    pub fn contains(&self, p: Point) -> bool {
        match self {
            Domain::Ball { center, radius, .. } => p.dist(*center) < *radius,
            Domain::Annulus {
                center,
                r_inner,
                r_outer,
                ..
            } => {
                let r = p.dist(*center);
                r > *r_inner && r < *r_outer
            }
            Domain::Rect { dim, min, max } => {
                p.x > min.x
                    && p.x < max.x
                    && p.y > min.y
                    && p.y < max.y
                    && (*dim == 2 || (p.z > min.z && p.z < max.z))
            }
            Domain::Polygon2D { verts, .. } => polygon_contains(verts, p),
            Domain::SlitDisk { radius, .. } => p.norm() < *radius,
            Domain::BallUnion { balls, .. } => balls.iter().any(|(c, r)| p.dist(*c) < *r),
            Domain::BallIntersection { balls, .. } => balls.iter().all(|(c, r)| p.dist(*c) < *r),
            Domain::Raster { set, .. } => set.contains_point(p),
        }
    }

    /// Signed distance to the boundary (positive inside), for the shapes that
    /// support walk-on-spheres and the Brownian-bridge correction. For a ball
    /// union this is the largest inscribed-in-one-ball radius, a valid (not
    /// maximal) walk-on-spheres jump radius.
    pub fn signed_distance(&self, p: Point) -> Option<f64> {
        match self {
            Domain::Ball { center, radius, .. } => Some(radius - p.dist(*center)),
            Domain::Annulus {
                center,
                r_inner,
                r_outer,
                ..
            } => {
                let r = p.dist(*center);
                Some((r - r_inner).min(r_outer - r))
            }
            Domain::Rect { dim, min, max } => {
                let mut d = (p.x - min.x)
                    .min(max.x - p.x)
                    .min(p.y - min.y)
                    .min(max.y - p.y);
                if *dim == 3 {
                    d = d.min(p.z - min.z).min(max.z - p.z);
                }
                Some(d)
            }
            Domain::BallUnion { balls, .. } => balls
                .iter()
                .map(|(c, r)| r - p.dist(*c))
                .max_by(|a, b| a.partial_cmp(b).unwrap()),
            Domain::BallIntersection { balls, .. } => balls
                .iter()
                .map(|(c, r)| r - p.dist(*c))
                .min_by(|a, b| a.partial_cmp(b).unwrap()),
            _ => None,
        }
    }

    /// Distance from an outside point to the set, for hitting problems.
    pub fn outside_distance(&self, p: Point) -> Option<f64> {
        match self {
            Domain::Ball { center, radius, .. } => Some((p.dist(*center) - radius).max(0.0)),
            Domain::BallUnion { balls, .. } => balls
                .iter()
                .map(|(c, r)| (p.dist(*c) - r).max(0.0))
                .min_by(|a, b| a.partial_cmp(b).unwrap()),
            Domain::Rect { dim, min, max } => {
                let axes = if *dim == 2 { 2 } else { 3 };
                let mut d2 = 0.0;
                for axis in 0..axes {
                    let v = p.coord(axis);
                    let d = (min.coord(axis) - v).max(0.0).max(v - max.coord(axis));
                    d2 += d * d;
                }
                Some(d2.sqrt())
            }
            _ => None,
        }
    }

    /// Whether the Brownian-bridge crossing correction applies (smooth convex
    /// pieces with an exact signed distance).
    pub(crate) fn bridge_distance(&self, p: Point) -> Option<f64> {
        match self {
            Domain::Ball { .. }
            | Domain::Annulus { .. }
            | Domain::Rect { .. }
            | Domain::BallIntersection { .. } => self.signed_distance(p),
            _ => None,
        }
    }

    /// Uniform sample inside the domain, for the shapes used as sampling
    /// boxes (balls and rectangles).
    pub fn sample_uniform(&self, rng: &mut rand_chacha::ChaCha8Rng) -> Option<Point> {
        use rand::Rng;
        match self {
            Domain::Rect { dim, min, max } => {
                let mut p = Point::new(
                    min.x + rng.random::<f64>() * (max.x - min.x),
                    min.y + rng.random::<f64>() * (max.y - min.y),
                    0.0,
                );
                if *dim == 3 {
                    p.z = min.z + rng.random::<f64>() * (max.z - min.z);
                }
                Some(p)
            }
            Domain::Ball {
                dim,
                center,
                radius,
            } => loop {
                let p = Point::new(
                    2.0 * rng.random::<f64>() - 1.0,
                    2.0 * rng.random::<f64>() - 1.0,
                    if *dim == 3 {
                        2.0 * rng.random::<f64>() - 1.0
                    } else {
                        0.0
                    },
                );
                if p.norm2() <= 1.0 {
                    return Some(*center + p * *radius);
                }
            },
            _ => None,
        }
    }

    pub fn bounding_box(&self) -> (Point, Point) {
        match self {
            Domain::Ball {
                dim,
                center,
                radius,
            } => {
                let r = Point::new(*radius, *radius, if *dim == 3 { *radius } else { 0.0 });
                (*center - r, *center + r)
            }
            Domain::Annulus {
                dim,
                center,
                r_outer,
                ..
            } => {
                let r = Point::new(*r_outer, *r_outer, if *dim == 3 { *r_outer } else { 0.0 });
                (*center - r, *center + r)
            }
            Domain::Rect { min, max, .. } => (*min, *max),
            Domain::Polygon2D { verts, .. } => {
                let mut lo = verts[0];
                let mut hi = verts[0];
                for v in verts {
                    lo = Point::new(lo.x.min(v.x), lo.y.min(v.y), 0.0);
                    hi = Point::new(hi.x.max(v.x), hi.y.max(v.y), 0.0);
                }
                (lo, hi)
            }
            Domain::SlitDisk { radius, .. } => {
                (Point::xy(-radius, -radius), Point::xy(*radius, *radius))
            }
            Domain::BallUnion { dim, balls } => {
                let mut lo = Point::new(f64::MAX, f64::MAX, f64::MAX);
                let mut hi = Point::new(f64::MIN, f64::MIN, f64::MIN);
                for (c, r) in balls {
                    lo = Point::new(lo.x.min(c.x - r), lo.y.min(c.y - r), lo.z.min(c.z - r));
                    hi = Point::new(hi.x.max(c.x + r), hi.y.max(c.y + r), hi.z.max(c.z + r));
                }
                if *dim == 2 {
                    lo.z = 0.0;
                    hi.z = 0.0;
                }
                (lo, hi)
            }
            Domain::BallIntersection { dim, balls } => {
                let mut lo = Point::new(f64::MIN, f64::MIN, f64::MIN);
                let mut hi = Point::new(f64::MAX, f64::MAX, f64::MAX);
                for (c, r) in balls {
                    lo = Point::new(lo.x.max(c.x - r), lo.y.max(c.y - r), lo.z.max(c.z - r));
                    hi = Point::new(hi.x.min(c.x + r), hi.y.min(c.y + r), hi.z.min(c.z + r));
                }
                if *dim == 2 {
                    lo.z = 0.0;
                    hi.z = 0.0;
                }
                (lo, hi)
            }
            Domain::Raster { set, .. } => {
                let o = set.origin();
                let [nx, ny, nz] = set.shape();
                let h = set.cell();
                let hi = Point::new(
                    o.x + nx as f64 * h,
                    o.y + ny as f64 * h,
                    if set.dim() == 3 {
                        o.z + nz as f64 * h
                    } else {
                        0.0
                    },
                );
                (o, hi)
            }
        }
    }

    /// Names of the boundary pieces, aligned with [`ExitHit::label`].
    pub fn labels(&self) -> Vec<&str> {
        match self {
            Domain::Ball { .. }
            | Domain::Rect { .. }
            | Domain::BallUnion { .. }
            | Domain::BallIntersection { .. } => {
                vec!["boundary"]
            }
            Domain::Annulus { .. } => vec!["inner", "outer"],
            Domain::Polygon2D { labels, .. } => labels.iter().map(|s| s.as_str()).collect(),
            Domain::SlitDisk { .. } => vec!["slits", "circle"],
            Domain::Raster { outer_circle, .. } => {
                if outer_circle.is_some() {
                    vec!["inner", "outer"]
                } else {
                    vec!["boundary"]
                }
            }
        }
    }

    pub fn label_index(&self, name: &str) -> Option<usize> {
        self.labels().iter().position(|l| *l == name)
    }

    /// Label of the boundary piece nearest to `p` (used when a sampler lands
    /// on the boundary without tracking which feature it crossed).
    pub fn classify_boundary(&self, p: Point) -> usize {
        match self {
            Domain::Annulus {
                center,
                r_inner,
                r_outer,
                ..
            } => {
                let r = p.dist(*center);
                if (r - r_inner).abs() <= (r_outer - r).abs() {
                    0
                } else {
                    1
                }
            }
            Domain::Polygon2D {
                verts, edge_labels, ..
            } => {
                let mut best = (f64::INFINITY, 0usize);
                for i in 0..verts.len() {
                    let q = verts[(i + 1) % verts.len()];
                    let d = super::segment_distance(p, verts[i], q);
                    if d < best.0 {
                        best = (d, edge_labels[i]);
                    }
                }
                best.1
            }
            Domain::SlitDisk { radius, .. } => {
                if (p.norm() - radius).abs() < 0.5 * (radius - p.norm()).abs() + 1e-9 {
                    1
                } else {
                    0
                }
            }
            Domain::Raster { set, outer_circle } => match outer_circle {
                Some((c, r)) => {
                    if (p.dist(*c) - r).abs() <= 2.0 * set.cell() {
                        1
                    } else {
                        0
                    }
                }
                None => 0,
            },
            _ => 0,
        }
    }

    /// First boundary hit of the step segment `a -> b`, where `a` is inside.
    /// Zero-thickness pieces (slits) register when the segment passes within
    /// `slit_eps` of them.
    pub fn exit_segment(&self, a: Point, b: Point, slit_eps: f64) -> Option<ExitHit> {
        match self {
            Domain::Ball { center, radius, .. } => {
                sphere_crossing(a, b, *center, *radius).map(|(t, p)| ExitHit {
                    t,
                    point: p,
                    label: 0,
                })
            }
            Domain::Annulus {
                center,
                r_inner,
                r_outer,
                ..
            } => {
                let inner = sphere_crossing(a, b, *center, *r_inner);
                let outer = sphere_crossing(a, b, *center, *r_outer);
                match (inner, outer) {
                    (Some((ti, pi)), Some((to, po))) => Some(if ti <= to {
                        ExitHit {
                            t: ti,
                            point: pi,
                            label: 0,
                        }
                    } else {
                        ExitHit {
                            t: to,
                            point: po,
                            label: 1,
                        }
                    }),
                    (Some((t, p)), None) => Some(ExitHit {
                        t,
                        point: p,
                        label: 0,
                    }),
                    (None, Some((t, p))) => Some(ExitHit {
                        t,
                        point: p,
                        label: 1,
                    }),
                    (None, None) => None,
                }
            }
            Domain::Rect { dim, min, max } => {
                // Convex: first wall-plane crossing.
                let d = b - a;
                let mut best: Option<(f64, usize)> = None;
                let axes = if *dim == 2 { 2 } else { 3 };
                for axis in 0..axes {
                    for wall in [min.coord(axis), max.coord(axis)] {
                        let da = d.coord(axis);
                        if da.abs() < 1e-300 {
                            continue;
                        }
                        let t = (wall - a.coord(axis)) / da;
                        if (0.0..=1.0).contains(&t) && best.map_or(true, |(bt, _)| t < bt) {
                            best = Some((t, axis));
                        }
                    }
                }
                best.map(|(t, _)| ExitHit {
                    t,
                    point: a + d * t,
                    label: 0,
                })
            }
            Domain::Polygon2D {
                verts, edge_labels, ..
            } => {
                let mut best: Option<ExitHit> = None;
                for i in 0..verts.len() {
                    let q = verts[(i + 1) % verts.len()];
                    if let Some((t, p)) = segment_intersection(a, b, verts[i], q) {
                        if best.as_ref().map_or(true, |h| t < h.t) {
                            best = Some(ExitHit {
                                t,
                                point: p,
                                label: edge_labels[i],
                            });
                        }
                    }
                }
                best
            }
            Domain::SlitDisk {
                radius,
                a: a0,
                angles,
            } => {
                let circle = sphere_crossing(a, b, Point::ZERO, *radius).map(|(t, p)| ExitHit {
                    t,
                    point: p,
                    label: 1,
                });
                let mut best = circle;
                for &ang in angles {
                    let dir = Point::xy(ang.cos(), ang.sin());
                    let s0 = dir * *a0;
                    let s1 = dir * *radius;
                    // A transversal crossing has distance 0; grazing within
                    // slit_eps also counts (zero-measure sets are invisible
                    // to point sampling).
                    if segment_segment_distance(a, b, s0, s1) <= slit_eps {
                        let t = closest_approach_t(a, b, s0, s1);
                        if best.as_ref().map_or(true, |h| t < h.t) {
                            best = Some(ExitHit {
                                t,
                                point: a + (b - a) * t,
                                label: 0,
                            });
                        }
                    }
                }
                best
            }
            Domain::BallUnion { balls, .. } => {
                // Union of per-ball parameter intervals along the segment;
                // exit where the component containing t=0 ends.
                let mut ivals: Vec<(f64, f64, usize)> = Vec::with_capacity(balls.len());
                for (bi, (c, r)) in balls.iter().enumerate() {
                    if let Some((t0, t1)) = sphere_interval(a, b, *c, *r) {
                        ivals.push((t0, t1, bi));
                    }
                }
                ivals.sort_by(|x, y| x.0.partial_cmp(&y.0).unwrap());
                // grow the component of t = 0 (the start is inside the union)
                let mut reach = 0.0f64;
                let mut any = false;
                for (t0, t1, _) in ivals {
                    if t0 > reach {
                        break;
                    }
                    if t1 > reach {
                        reach = t1;
                        any = true;
                    }
                }
                if !any {
                    return Some(ExitHit {
                        t: 0.0,
                        point: a,
                        label: 0,
                    });
                }
                if reach >= 1.0 {
                    return None;
                }
                let p = a + (b - a) * reach;
                Some(ExitHit {
                    t: reach,
                    point: p,
                    label: 0,
                })
            }
            Domain::BallIntersection { balls, .. } => {
                // inside every ball: leaving any one of them is the exit
                let mut best: Option<ExitHit> = None;
                for (c, r) in balls {
                    if let Some((t, p)) = sphere_crossing(a, b, *c, *r) {
                        if best.as_ref().map_or(true, |h| t < h.t) {
                            best = Some(ExitHit {
                                t,
                                point: p,
                                label: 0,
                            });
                        }
                    }
                }
                best
            }
            Domain::Raster { set, .. } => {
                let hit = raster_first_exit(set, a, b)?;
                Some(ExitHit {
                    t: hit.0,
                    point: hit.1,
                    label: self.classify_boundary(hit.1),
                })
            }
        }
    }

    /// Whether the step segment `a -> b` touches the (solid) set; used for
    /// hitting problems where the process starts outside.
    pub fn segment_hits(&self, a: Point, b: Point) -> bool {
        match self {
            Domain::Ball { center, radius, .. } => {
                super::segment_distance(*center, a, b) <= *radius
            }
            Domain::BallUnion { balls, .. } => balls
                .iter()
                .any(|(c, r)| super::segment_distance(*c, a, b) <= *r),
            Domain::Rect { .. } => {
                // Endpoints plus first wall-plane crossing followed by a
                // containment check of the crossing point.
                if self.contains(a) || self.contains(b) {
                    return true;
                }
                segment_rect_hits(self, a, b)
            }
            Domain::Raster { set, .. } => raster_segment_touches(set, a, b),
            _ => self.contains(b),
        }
    }

    /// Nearest boundary point and its label; exact for the walk-on-spheres
    /// shapes, approximate (argmax sphere) for ball unions.
    pub fn project_boundary(&self, p: Point) -> Option<(Point, usize)> {
        match self {
            Domain::Ball { center, radius, .. } => Some((radial_point(*center, p, *radius), 0)),
            Domain::Annulus {
                center,
                r_inner,
                r_outer,
                ..
            } => {
                let r = p.dist(*center);
                if r - r_inner <= r_outer - r {
                    Some((radial_point(*center, p, *r_inner), 0))
                } else {
                    Some((radial_point(*center, p, *r_outer), 1))
                }
            }
            Domain::Rect { dim, min, max } => {
                let axes = if *dim == 2 { 2 } else { 3 };
                let mut best = (f64::INFINITY, 0usize, 0.0f64);
                for axis in 0..axes {
                    let dlo = p.coord(axis) - min.coord(axis);
                    if dlo < best.0 {
                        best = (dlo, axis, min.coord(axis));
                    }
                    let dhi = max.coord(axis) - p.coord(axis);
                    if dhi < best.0 {
                        best = (dhi, axis, max.coord(axis));
                    }
                }
                Some((p.with_coord(best.1, best.2), 0))
            }
            Domain::BallUnion { balls, .. } => {
                let (c, r) = balls
                    .iter()
                    .max_by(|(c1, r1), (c2, r2)| {
                        (r1 - p.dist(*c1)).partial_cmp(&(r2 - p.dist(*c2))).unwrap()
                    })
                    .copied()?;
                Some((radial_point(c, p, r), 0))
            }
            Domain::BallIntersection { balls, .. } => {
                let (c, r) = balls
                    .iter()
                    .min_by(|(c1, r1), (c2, r2)| {
                        (r1 - p.dist(*c1)).partial_cmp(&(r2 - p.dist(*c2))).unwrap()
                    })
                    .copied()?;
                Some((radial_point(c, p, r), 0))
            }
            _ => None,
        }
    }
}

pub(crate) fn ball_volume(dim: usize, r: f64) -> f64 {
    match dim {
        2 => PI * r * r,
        _ => 4.0 / 3.0 * PI * r * r * r,
    }
}

fn radial_point(center: Point, toward: Point, radius: f64) -> Point {
    let d = toward - center;
    let n = d.norm();
    if n < 1e-300 {
        return center + Point::new(radius, 0.0, 0.0);
    }
    center + d * (radius / n)
}

/// Earliest `t` in [0,1] with `|a + t(b-a) - c| = r`, plus the point.
fn sphere_crossing(a: Point, b: Point, c: Point, r: f64) -> Option<(f64, Point)> {
    let d = b - a;
    let f = a - c;
    let qa = d.norm2();
    if qa < 1e-300 {
        return None;
    }
    let qb = 2.0 * f.dot(d);
    let qc = f.norm2() - r * r;
    let disc = qb * qb - 4.0 * qa * qc;
    if disc < 0.0 {
        return None;
    }
    let sq = disc.sqrt();
    for t in [(-qb - sq) / (2.0 * qa), (-qb + sq) / (2.0 * qa)] {
        if (0.0..=1.0).contains(&t) {
            return Some((t, a + d * t));
        }
    }
    None
}

/// Parameter interval of the segment inside the closed ball, if any.
fn sphere_interval(a: Point, b: Point, c: Point, r: f64) -> Option<(f64, f64)> {
    let d = b - a;
    let f = a - c;
    let qa = d.norm2();
    if qa < 1e-300 {
        return if f.norm() <= r {
            Some((0.0, 1.0))
        } else {
            None
        };
    }
    let qb = 2.0 * f.dot(d);
    let qc = f.norm2() - r * r;
    let disc = qb * qb - 4.0 * qa * qc;
    if disc < 0.0 {
        return None;
    }
    let sq = disc.sqrt();
    let t0 = (-qb - sq) / (2.0 * qa);
    let t1 = (-qb + sq) / (2.0 * qa);
    if t1 < 0.0 || t0 > 1.0 {
        return None;
    }
    Some((t0.max(0.0), t1.min(1.0)))
}

/// Proper intersection parameter of `a->b` with segment `p->q`, on `a->b`.
fn segment_intersection(a: Point, b: Point, p: Point, q: Point) -> Option<(f64, Point)> {
    let r = b - a;
    let s = q - p;
    let denom = r.x * s.y - r.y * s.x;
    if denom.abs() < 1e-300 {
        return None;
    }
    let w = p - a;
    let t = (w.x * s.y - w.y * s.x) / denom;
    let u = (w.x * r.y - w.y * r.x) / denom;
    if (0.0..=1.0).contains(&t) && (0.0..=1.0).contains(&u) {
        Some((t, a + r * t))
    } else {
        None
    }
}

/// Parameter on `a->b` of the closest approach to segment `s0->s1`.
fn closest_approach_t(a: Point, b: Point, s0: Point, s1: Point) -> f64 {
    if let Some((t, _)) = segment_intersection(a, b, s0, s1) {
        return t;
    }
    let mut best = (f64::INFINITY, 0.0);
    const K: usize = 16;
    for i in 0..=K {
        let t = i as f64 / K as f64;
        let x = a + (b - a) * t;
        let d = super::segment_distance(x, s0, s1);
        if d < best.0 {
            best = (d, t);
        }
    }
    best.1
}

fn polygon_contains(verts: &[Point], p: Point) -> bool {
    // Even-odd ray casting.
    let mut inside = false;
    let n = verts.len();
    let mut j = n - 1;
    for i in 0..n {
        let (vi, vj) = (verts[i], verts[j]);
        if (vi.y > p.y) != (vj.y > p.y) {
            let x = vi.x + (p.y - vi.y) / (vj.y - vi.y) * (vj.x - vi.x);
            if p.x < x {
                inside = !inside;
            }
        }
        j = i;
    }
    inside
}

fn segment_rect_hits(rect: &Domain, a: Point, b: Point) -> bool {
    // Slab test against the closed box.
    let Domain::Rect { dim, min, max } = rect else {
        return false;
    };
    let d = b - a;
    let mut t0 = 0.0f64;
    let mut t1 = 1.0f64;
    let axes = if *dim == 2 { 2 } else { 3 };
    for axis in 0..axes {
        let da = d.coord(axis);
        let (lo, hi) = (min.coord(axis), max.coord(axis));
        if da.abs() < 1e-300 {
            if a.coord(axis) < lo || a.coord(axis) > hi {
                return false;
            }
            continue;
        }
        let mut ta = (lo - a.coord(axis)) / da;
        let mut tb = (hi - a.coord(axis)) / da;
        if ta > tb {
            std::mem::swap(&mut ta, &mut tb);
        }
        t0 = t0.max(ta);
        t1 = t1.min(tb);
        if t0 > t1 {
            return false;
        }
    }
    true
}

/// Amanatides-Woo traversal of the grid cells crossed by `a -> b`, returning
/// the entry parameter and point of the first cell outside the set (or
/// outside the grid box).
fn raster_first_exit(set: &RasterSet, a: Point, b: Point) -> Option<(f64, Point)> {
    let h = set.cell();
    let o = set.origin();
    let dim3 = set.dim() == 3;
    let [nx, ny, nz] = set.shape().map(|s| s as i64);
    let d = b - a;
    let mut cell = match set.locate(a) {
        Some(c) => c.map(|v| v as i64),
        None => return Some((0.0, a)),
    };
    let step = [sign(d.x), sign(d.y), if dim3 { sign(d.z) } else { 0 }];
    let inv = |v: f64| {
        if v.abs() < 1e-300 {
            f64::INFINITY
        } else {
            1.0 / v
        }
    };
    let mut t_max = [0.0f64; 3];
    let mut t_delta = [f64::INFINITY; 3];
    let coords = [a.x, a.y, a.z];
    let deltas = [d.x, d.y, d.z];
    let origins = [o.x, o.y, o.z];
    for ax in 0..3 {
        if step[ax] == 0 {
            t_max[ax] = f64::INFINITY;
            continue;
        }
        let next_wall = origins[ax] + (cell[ax] + if step[ax] > 0 { 1 } else { 0 }) as f64 * h;
        t_max[ax] = (next_wall - coords[ax]) * inv(deltas[ax]);
        t_delta[ax] = (h * step[ax] as f64) * inv(deltas[ax]);
    }
    let lims = [nx, ny, nz];
    loop {
        let ax = (0..3)
            .min_by(|&i, &j| t_max[i].partial_cmp(&t_max[j]).unwrap())
            .unwrap();
        let t = t_max[ax];
        if t > 1.0 {
            return None; // segment ends inside the current (set) cell
        }
        cell[ax] += step[ax];
        if cell[ax] < 0 || cell[ax] >= lims[ax] {
            return Some((t, a + d * t));
        }
        if !set.get(cell[0] as usize, cell[1] as usize, cell[2] as usize) {
            return Some((t, a + d * t));
        }
        t_max[ax] += t_delta[ax];
    }
}

/// Whether the segment touches any set cell (supercover membership).
fn raster_segment_touches(set: &RasterSet, a: Point, b: Point) -> bool {
    if set.contains_point(a) {
        return true;
    }
    let h = set.cell();
    let n = ((b - a).norm() / (0.5 * h)).ceil() as usize + 1;
    for i in 0..=n {
        let t = i as f64 / n as f64;
        if set.contains_point(a + (b - a) * t) {
            return true;
        }
    }
    false
}

fn sign(v: f64) -> i64 {
    if v > 0.0 {
        1
    } else if v < 0.0 {
        -1
    } else {
        0
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ball_membership_and_sdf() {
        let b = Domain::ball(2, Point::ZERO, 1.0);
        assert!(b.contains(Point::xy(0.5, 0.0)));
        assert!(!b.contains(Point::xy(1.5, 0.0)));
        assert!((b.signed_distance(Point::xy(0.5, 0.0)).unwrap() - 0.5).abs() < 1e-15);
    }

    #[test]
    fn annulus_exit_labels() {
        let a = Domain::annulus(2, Point::ZERO, 0.5, 2.0);
        let hit = a
            .exit_segment(Point::xy(0.6, 0.0), Point::xy(0.3, 0.0), 0.0)
            .unwrap();
        assert_eq!(hit.label, a.label_index("inner").unwrap());
        let hit = a
            .exit_segment(Point::xy(1.9, 0.0), Point::xy(2.2, 0.0), 0.0)
            .unwrap();
        assert_eq!(hit.label, a.label_index("outer").unwrap());
        assert!((hit.point.norm() - 2.0).abs() < 1e-12);
    }

    #[test]
    fn rect_exit_point_on_wall() {
        let r = Domain::square(1.0);
        let hit = r
            .exit_segment(Point::xy(0.9, 0.5), Point::xy(1.3, 0.5), 0.0)
            .unwrap();
        assert!((hit.point.x - 1.0).abs() < 1e-12);
    }

    #[test]
    fn slit_disk_step_hits_slit_on_crossing() {
        let d = Domain::slit_disk(1.0, 0.3, vec![0.0]).unwrap();
        // step crossing the positive real axis inside [0.3, 1]
        let hit = d
            .exit_segment(Point::xy(0.6, 0.05), Point::xy(0.6, -0.05), 1e-3)
            .unwrap();
        assert_eq!(hit.label, d.label_index("slits").unwrap());
        // step far from the slit does not exit
        assert!(d
            .exit_segment(Point::xy(-0.2, 0.3), Point::xy(-0.25, 0.32), 1e-3)
            .is_none());
    }

    #[test]
    fn ball_union_exit_crosses_into_second_ball() {
        let u = Domain::BallUnion {
            dim: 2,
            balls: vec![(Point::ZERO, 1.0), (Point::xy(1.5, 0.0), 1.0)],
        };
        // leaves the first ball but remains in the union
        assert!(u
            .exit_segment(Point::xy(0.9, 0.0), Point::xy(1.2, 0.0), 0.0)
            .is_none());
        let hit = u
            .exit_segment(Point::xy(0.9, 0.0), Point::xy(2.8, 0.0), 0.0)
            .unwrap();
        assert!((hit.point.x - 2.5).abs() < 1e-9);
    }

    #[test]
    fn polygon_contains_and_exit() {
        let tri = Domain::polygon(
            vec![Point::ZERO, Point::xy(2.0, 0.0), Point::xy(0.0, 2.0)],
            vec![0, 1, 0],
            vec!["legs".into(), "hyp".into()],
        )
        .unwrap();
        assert!(tri.contains(Point::xy(0.4, 0.4)));
        assert!(!tri.contains(Point::xy(1.5, 1.5)));
        let hit = tri
            .exit_segment(Point::xy(0.5, 0.5), Point::xy(1.5, 1.5), 0.0)
            .unwrap();
        assert_eq!(hit.label, tri.label_index("hyp").unwrap());
    }

    #[test]
    fn raster_exit_by_traversal() {
        let disk = Domain::ball(2, Point::ZERO, 1.0);
        let set = RasterSet::rasterize(&disk, 128).unwrap();
        let dom = Domain::raster(set, Some((Point::ZERO, 1.0)));
        let hit = dom
            .exit_segment(Point::xy(0.0, 0.0), Point::xy(1.5, 0.0), 0.0)
            .unwrap();
        assert!((hit.point.x - 1.0).abs() < 0.05);
        assert_eq!(hit.label, dom.label_index("outer").unwrap());
    }
}
