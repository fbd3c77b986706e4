use std::f64::consts::PI;
use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{Domain, Point};

/// Bit-mask indicator of a set on a uniform grid, the universal set
/// representation for symmetrization and volume work.
///
/// A cell belongs to a rasterized analytic shape iff its *center* does; all
/// discretization error lives in that one convention.
#[derive(Clone, Debug, PartialEq)]
pub struct RasterSet {
    dim: usize,
    origin: Point,
    cell: f64,
    shape: [usize; 3],
    words: Vec<u64>,
}

/// JSON sidecar written next to PGM / raw bit dumps.
#[derive(Serialize, Deserialize)]
struct Sidecar {
    dim: usize,
    origin: [f64; 3],
    cell: f64,
    shape: [usize; 3],
}

impl RasterSet {
    pub fn empty(dim: usize, origin: Point, cell: f64, shape: [usize; 3]) -> Result<Self> {
        if dim != 2 && dim != 3 {
            return Err(Error::pre("raster dim must be 2 or 3"));
        }
        if !(cell > 0.0) {
            return Err(Error::pre("raster cell size must be positive"));
        }
        let shape = if dim == 2 {
            [shape[0], shape[1], 1]
        } else {
            shape
        };
        if shape.iter().take(dim).any(|&s| s == 0) {
            return Err(Error::pre("raster shape components must be >= 1"));
        }
        let n = shape[0] * shape[1] * shape[2];
        Ok(RasterSet {
            dim,
            origin,
            cell,
            shape,
            words: vec![0u64; n.div_ceil(64)],
        })
    }

    /// Rasterizes `pred` by cell-center membership.
    pub fn from_fn(
        dim: usize,
        origin: Point,
        cell: f64,
        shape: [usize; 3],
        pred: impl Fn(Point) -> bool,
    ) -> Result<Self> {
        let mut r = Self::empty(dim, origin, cell, shape)?;
        for k in 0..r.shape[2] {
            for j in 0..r.shape[1] {
                for i in 0..r.shape[0] {
                    if pred(r.center(i, j, k)) {
                        r.set(i, j, k, true);
                    }
                }
            }
        }
        Ok(r)
    }

    /// Rasterizes an analytic domain onto its bounding box.
    ///
    /// `cells_across`: cell count along the largest bounding-box edge
    /// (default elsewhere: 512, i.e. cell = diameter / 512).
    pub fn rasterize(domain: &Domain, cells_across: usize) -> Result<Self> {
        let (lo, hi) = domain.bounding_box();
        let ext = hi - lo;
        let longest = ext
            .x
            .max(ext.y)
            .max(if domain.dim() == 3 { ext.z } else { 0.0 });
        let cell = longest / cells_across as f64;
        let nx = (ext.x / cell).ceil() as usize + 1;
        let ny = (ext.y / cell).ceil() as usize + 1;
        let nz = if domain.dim() == 3 {
            (ext.z / cell).ceil() as usize + 1
        } else {
            1
        };
        Self::from_fn(domain.dim(), lo, cell, [nx, ny, nz], |p| domain.contains(p))
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn cell(&self) -> f64 {
        self.cell
    }

    pub fn origin(&self) -> Point {
        self.origin
    }

    pub fn shape(&self) -> [usize; 3] {
        self.shape
    }

    pub fn same_grid(&self, o: &RasterSet) -> bool {
        self.dim == o.dim
            && self.shape == o.shape
            && (self.cell - o.cell).abs() < 1e-12 * self.cell
            && self.origin.dist(o.origin) < 1e-9 * self.cell
    }

    #[inline]
    fn index(&self, i: usize, j: usize, k: usize) -> usize {
        (k * self.shape[1] + j) * self.shape[0] + i
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize, k: usize) -> bool {
        let idx = self.index(i, j, k);
        self.words[idx >> 6] >> (idx & 63) & 1 == 1
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, k: usize, v: bool) {
        let idx = self.index(i, j, k);
        if v {
            self.words[idx >> 6] |= 1 << (idx & 63);
        } else {
            self.words[idx >> 6] &= !(1 << (idx & 63));
        }
    }

    /// World coordinates of the center of cell `(i, j, k)`.
    #[inline]
    pub fn center(&self, i: usize, j: usize, k: usize) -> Point {
        let h = self.cell;
        Point::new(
            self.origin.x + (i as f64 + 0.5) * h,
            self.origin.y + (j as f64 + 0.5) * h,
            if self.dim == 3 {
                self.origin.z + (k as f64 + 0.5) * h
            } else {
                0.0
            },
        )
    }

    /// Cell containing the point, if inside the grid box.
    pub fn locate(&self, p: Point) -> Option<[usize; 3]> {
        let fx = (p.x - self.origin.x) / self.cell;
        let fy = (p.y - self.origin.y) / self.cell;
        let fz = if self.dim == 3 {
            (p.z - self.origin.z) / self.cell
        } else {
            0.5
        };
        if fx < 0.0 || fy < 0.0 || fz < 0.0 {
            return None;
        }
        let (i, j, k) = (fx as usize, fy as usize, fz as usize);
        if i >= self.shape[0] || j >= self.shape[1] || k >= self.shape[2] {
            return None;
        }
        Some([i, j, k])
    }

    /// Membership of a world point (by containing cell; outside the box = false).
    pub fn contains_point(&self, p: Point) -> bool {
        self.locate(p).is_some_and(|[i, j, k]| self.get(i, j, k))
    }

    pub fn count(&self) -> usize {
        self.words.iter().map(|w| w.count_ones() as usize).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.words.iter().all(|&w| w == 0)
    }

    /// Exact volume: `popcount * cell^dim`.
    pub fn volume(&self) -> f64 {
        self.count() as f64 * self.cell.powi(self.dim as i32)
    }

    pub fn is_subset_of(&self, o: &RasterSet) -> bool {
        self.words.iter().zip(&o.words).all(|(a, b)| a & !b == 0)
    }

    pub fn iter_set(&self) -> impl Iterator<Item = [usize; 3]> + '_ {
        let [nx, ny, nz] = self.shape;
        (0..nz).flat_map(move |k| {
            (0..ny).flat_map(move |j| {
                (0..nx).filter_map(move |i| {
                    if self.get(i, j, k) {
                        Some([i, j, k])
                    } else {
                        None
                    }
                })
            })
        })
    }

    /// Minkowski dilation by a closed ball of radius `r` (cell-center metric):
    /// output cells are those within `r` of some input cell center.
    pub fn dilate(&self, r: f64) -> Result<RasterSet> {
        if r < 0.0 {
            return Err(Error::pre("dilation radius must be nonnegative"));
        }
        let reach = (r / self.cell).floor() as i64;
        let mut offsets = Vec::new();
        let zr = if self.dim == 3 { reach } else { 0 };
        for dk in -zr..=zr {
            for dj in -reach..=reach {
                for di in -reach..=reach {
                    let d2 = (di * di + dj * dj + dk * dk) as f64;
                    if d2.sqrt() * self.cell <= r {
                        offsets.push([di, dj, dk]);
                    }
                }
            }
        }
        let mut out = RasterSet::empty(self.dim, self.origin, self.cell, self.shape)?;
        let [nx, ny, nz] = self.shape.map(|s| s as i64);
        for [i, j, k] in self.iter_set() {
            for [di, dj, dk] in &offsets {
                let (ii, jj, kk) = (i as i64 + di, j as i64 + dj, k as i64 + dk);
                if ii >= 0 && jj >= 0 && kk >= 0 && ii < nx && jj < ny && kk < nz {
                    out.set(ii as usize, jj as usize, kk as usize, true);
                }
            }
        }
        Ok(out)
    }

    /// Hausdorff distance between the cell-center clouds of two sets on the
    /// same grid. Brute force; intended for modest rasters.
    pub fn hausdorff_distance(&self, o: &RasterSet) -> Result<f64> {
        if self.is_empty() || o.is_empty() {
            return Err(Error::pre("Hausdorff undefined for empty set"));
        }
        if !self.same_grid(o) {
            return Err(Error::pre("Hausdorff distance requires a common grid"));
        }
        let a: Vec<[usize; 3]> = self.iter_set().collect();
        let b: Vec<[usize; 3]> = o.iter_set().collect();
        let directed = |from: &[[usize; 3]], to: &[[usize; 3]]| -> f64 {
            let mut worst = 0.0f64;
            for p in from {
                let mut best = f64::INFINITY;
                for q in to {
                    let dx = p[0] as f64 - q[0] as f64;
                    let dy = p[1] as f64 - q[1] as f64;
                    let dz = p[2] as f64 - q[2] as f64;
                    best = best.min(dx * dx + dy * dy + dz * dz);
                    if best == 0.0 {
                        break;
                    }
                }
                worst = worst.max(best);
            }
            worst.sqrt()
        };
        Ok(directed(&a, &b).max(directed(&b, &a)) * self.cell)
    }

    /// Origin-centered ball with the same volume (Schwarz symmetrization).
    pub fn schwarz_ball(&self) -> Result<Domain> {
        let v = self.volume();
        if v <= 0.0 {
            return Err(Error::pre("Schwarz ball of an empty set"));
        }
        let r = match self.dim {
            2 => (v / PI).sqrt(),
            _ => (3.0 * v / (4.0 * PI)).cbrt(),
        };
        Ok(Domain::ball(self.dim, Point::ZERO, r))
    }

    /// Squared-distance transform (in cell units) from every grid cell to the
    /// nearest set cell. Used by the polarization schedule's fast Hausdorff.
    pub(crate) fn distance_transform_sq(&self) -> Vec<f64> {
        let [nx, ny, nz] = self.shape;
        let n = nx * ny * nz;
        const INF: f64 = 1e18;
        let mut d: Vec<f64> = (0..n).map(|_| INF).collect();
        for [i, j, k] in self.iter_set() {
            d[self.index(i, j, k)] = 0.0;
        }
        // Felzenszwalb-Huttenlocher 1D lower envelope, applied per axis.
        let pass = |f: &mut [f64], idx: &dyn Fn(usize) -> usize, m: usize| {
            let mut v = vec![0usize; m];
            let mut zs = vec![0.0f64; m + 1];
            let g: Vec<f64> = (0..m).map(|q| f[idx(q)]).collect();
            let mut kk = 0usize;
            v[0] = 0;
            zs[0] = -INF;
            zs[1] = INF;
            for q in 1..m {
                if g[q] >= INF && g[v[kk]] >= INF {
                    continue;
                }
                let mut s;
                loop {
                    let p = v[kk];
                    s = ((g[q] + (q * q) as f64) - (g[p] + (p * p) as f64))
                        / (2.0 * q as f64 - 2.0 * p as f64);
                    if s <= zs[kk] && kk > 0 {
                        kk -= 1;
                    } else {
                        break;
                    }
                }
                kk += 1;
                v[kk] = q;
                zs[kk] = s;
                zs[kk + 1] = INF;
            }
            let mut kk2 = 0usize;
            for q in 0..m {
                while zs[kk2 + 1] < q as f64 {
                    kk2 += 1;
                }
                let p = v[kk2];
                let dq = q as f64 - p as f64;
                f[idx(q)] = dq * dq + g[p];
            }
        };
        for k in 0..nz {
            for j in 0..ny {
                pass(&mut d, &|q| (k * ny + j) * nx + q, nx);
            }
        }
        for k in 0..nz {
            for i in 0..nx {
                pass(&mut d, &|q| (k * ny + q) * nx + i, ny);
            }
        }
        if nz > 1 {
            for j in 0..ny {
                for i in 0..nx {
                    pass(&mut d, &|q| (q * ny + j) * nx + i, nz);
                }
            }
        }
        d
    }

    /// Hausdorff distance via distance transforms; exact on cell centers,
    /// O(cells) per call after the transform.
    pub(crate) fn hausdorff_fast(&self, other_dt_sq: &[f64], other: &RasterSet) -> f64 {
        let self_dt = self.distance_transform_sq();
        let mut worst = 0.0f64;
        for [i, j, k] in self.iter_set() {
            worst = worst.max(other_dt_sq[self.index(i, j, k)]);
        }
        for [i, j, k] in other.iter_set() {
            worst = worst.max(self_dt[other.index(i, j, k)]);
        }
        worst.sqrt() * self.cell
    }

    // ---- serialization ------------------------------------------------

    fn sidecar(&self) -> Sidecar {
        Sidecar {
            dim: self.dim,
            origin: [self.origin.x, self.origin.y, self.origin.z],
            cell: self.cell,
            shape: self.shape,
        }
    }

    /// Writes a 2D set as binary PGM (P5) plus a JSON sidecar, or a 3D set as
    /// a raw bit dump plus the same sidecar.
    pub fn save(&self, path: &Path) -> Result<()> {
        let sidecar_path = path.with_extension(match path.extension().and_then(|e| e.to_str()) {
            Some(ext) => format!("{ext}.json"),
            None => "json".to_string(),
        });
        let mut f = std::fs::File::create(path)?;
        if self.dim == 2 {
            let [nx, ny, _] = self.shape;
            write!(f, "P5\n{nx} {ny}\n255\n")?;
            let mut row = vec![0u8; nx];
            for j in 0..ny {
                for (i, px) in row.iter_mut().enumerate() {
                    // PGM rows run top to bottom; flip so +y is up in the image.
                    *px = if self.get(i, ny - 1 - j, 0) { 255 } else { 0 };
                }
                f.write_all(&row)?;
            }
        } else {
            let n = self.shape[0] * self.shape[1] * self.shape[2];
            let mut bytes = vec![0u8; n.div_ceil(8)];
            for idx in 0..n {
                if self.words[idx >> 6] >> (idx & 63) & 1 == 1 {
                    bytes[idx >> 3] |= 1 << (idx & 7);
                }
            }
            f.write_all(&bytes)?;
        }
        std::fs::write(&sidecar_path, serde_json::to_vec_pretty(&self.sidecar())?)?;
        Ok(())
    }

    /// Loads a set saved by [`RasterSet::save`]; expects the JSON sidecar
    /// next to `path`.
    pub fn load(path: &Path) -> Result<RasterSet> {
        let sidecar_path = path.with_extension(match path.extension().and_then(|e| e.to_str()) {
            Some(ext) => format!("{ext}.json"),
            None => "json".to_string(),
        });
        let sc: Sidecar = serde_json::from_slice(&std::fs::read(&sidecar_path)?)?;
        let origin = Point::new(sc.origin[0], sc.origin[1], sc.origin[2]);
        let mut r = RasterSet::empty(sc.dim, origin, sc.cell, sc.shape)?;
        let mut f = std::fs::File::open(path)?;
        if sc.dim == 2 {
            let mut buf = Vec::new();
            f.read_to_end(&mut buf)?;
            let header_end = pgm_header_end(&buf)
                .ok_or_else(|| Error::pre(format!("{}: not a binary PGM", path.display())))?;
            let [nx, ny, _] = r.shape;
            if buf.len() < header_end + nx * ny {
                return Err(Error::pre("PGM payload shorter than sidecar shape"));
            }
            for j in 0..ny {
                for i in 0..nx {
                    if buf[header_end + j * nx + i] > 0 {
                        r.set(i, ny - 1 - j, 0, true);
                    }
                }
            }
        } else {
            let mut bytes = Vec::new();
            f.read_to_end(&mut bytes)?;
            let n = r.shape[0] * r.shape[1] * r.shape[2];
            if bytes.len() < n.div_ceil(8) {
                return Err(Error::pre("bit dump shorter than sidecar shape"));
            }
            for idx in 0..n {
                if bytes[idx >> 3] >> (idx & 7) & 1 == 1 {
                    r.words[idx >> 6] |= 1 << (idx & 63);
                }
            }
        }
        Ok(r)
    }
}

fn pgm_header_end(buf: &[u8]) -> Option<usize> {
    if !buf.starts_with(b"P5") {
        return None;
    }
    // Header = magic + 3 whitespace-separated fields, then a single whitespace.
    let mut fields = 0;
    let mut i = 2;
    while i < buf.len() && fields < 3 {
        while i < buf.len() && buf[i].is_ascii_whitespace() {
            i += 1;
        }
        if i < buf.len() && buf[i] == b'#' {
            while i < buf.len() && buf[i] != b'\n' {
                i += 1;
            }
            continue;
        }
        while i < buf.len() && !buf[i].is_ascii_whitespace() {
            i += 1;
        }
        fields += 1;
    }
    Some(i + 1)
}

/// Exact volume of a raster set; see [`RasterSet::volume`].
pub fn volume(a: &RasterSet) -> f64 {
    a.volume()
}
