//! Curves, Möbius transforms, grid fields, and metric utilities.
//!
//! Two curve representations coexist:
//!
//! - [`PolylineCurve`] — the interchange format: an ordered point list with
//!   `closed` / `through_infinity` flags. This is what files, solvers and
//!   samplers exchange.
//! - [`SmoothLoop`] / [`GraphCurve`] — analytic representations (Fourier
//!   series of a closed loop, periodized graph of a curve through ∞) used
//!   by the spectral map builders where discretization error must stay far
//!   below the tolerances under test.

use crate::error::{Error, Result};
use crate::spectral;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

/// Default sampling step (unit-scale curves).
pub const DEFAULT_CURVE_STEP: f64 = 1e-3;
/// Radius at which unbounded curves are clipped for sampling.
pub const CLIP_RADIUS: f64 = 1e4;
/// Offset of the near-boundary evaluation ring used by boundary-limit
/// extraction (fields are sampled on offset curves at `δ`, `2δ` and
/// Richardson-extrapolated toward the boundary).
pub const BOUNDARY_RING: f64 = 1e-3;

pub fn c64(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

// ---------------------------------------------------------------------------
// PolylineCurve
// ---------------------------------------------------------------------------

/// An ordered polyline in the plane.
///
/// Closed curves do **not** repeat the first point; the closing segment is
/// implicit. Curves through ∞ are stored clipped to a finite window; their
/// first and last points are the clipped ends.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct PolylineCurve {
    pub closed: bool,
    pub through_infinity: bool,
    #[serde(with = "complex_pairs")]
    pub points: Vec<Complex64>,
}

/// Serializes `Vec<Complex64>` as `[[re, im], …]`, the on-disk point format.
mod complex_pairs {
    use num_complex::Complex64;
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    pub fn serialize<S: Serializer>(v: &[Complex64], s: S) -> Result<S::Ok, S::Error> {
        let pairs: Vec<[f64; 2]> = v.iter().map(|z| [z.re, z.im]).collect();
        pairs.serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<Complex64>, D::Error> {
        let pairs: Vec<[f64; 2]> = Vec::deserialize(d)?;
        Ok(pairs
            .into_iter()
            .map(|[re, im]| Complex64::new(re, im))
            .collect())
    }
}

impl PolylineCurve {
    pub fn new(points: Vec<Complex64>, closed: bool, through_infinity: bool) -> Result<Self> {
        if points.len() < 2 {
            return Err(Error::invalid("curve needs at least 2 points"));
        }
        if closed && through_infinity {
            return Err(Error::invalid(
                "a curve cannot be both closed and through infinity",
            ));
        }
        for p in &points {
            if !p.re.is_finite() || !p.im.is_finite() {
                return Err(Error::invalid("curve contains non-finite points"));
            }
        }
        let scale = points
            .iter()
            .map(|p| p.norm())
            .fold(0.0f64, f64::max)
            .max(1.0);
        for w in points.windows(2) {
            if (w[1] - w[0]).norm() <= scale * 1e-15 {
                return Err(Error::invalid("consecutive curve points coincide"));
            }
        }
        Ok(PolylineCurve {
            closed,
            through_infinity,
            points,
        })
    }

    pub fn open(points: Vec<Complex64>) -> Result<Self> {
        Self::new(points, false, false)
    }

    pub fn closed_loop(points: Vec<Complex64>) -> Result<Self> {
        Self::new(points, true, false)
    }

    pub fn unbounded(points: Vec<Complex64>) -> Result<Self> {
        Self::new(points, false, true)
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Segment endpoints, including the wrap segment for closed curves.
    pub fn segments(&self) -> Vec<(Complex64, Complex64)> {
        let mut segs: Vec<(Complex64, Complex64)> = self
            .points
            .windows(2)
            .map(|w| (w[0], w[1]))
            .collect();
        if self.closed {
            segs.push((*self.points.last().unwrap(), self.points[0]));
        }
        segs
    }

    /// Cumulative arclength at each vertex; for closed curves the returned
    /// vector has `n + 1` entries, the last being the total length.
    pub fn cumulative_arclength(&self) -> Vec<f64> {
        let mut acc = Vec::with_capacity(self.points.len() + 1);
        let mut s = 0.0;
        acc.push(0.0);
        for w in self.points.windows(2) {
            s += (w[1] - w[0]).norm();
            acc.push(s);
        }
        if self.closed {
            s += (self.points[0] - *self.points.last().unwrap()).norm();
            acc.push(s);
        }
        acc
    }

    pub fn total_length(&self) -> f64 {
        *self.cumulative_arclength().last().unwrap()
    }

    /// Point at arclength `s` from the start (linear interpolation; for
    /// closed curves `s` is taken mod total length).
    pub fn point_at_arclength(&self, s: f64) -> Complex64 {
        let cum = self.cumulative_arclength();
        let total = *cum.last().unwrap();
        let mut s = if self.closed {
            s.rem_euclid(total)
        } else {
            s.clamp(0.0, total)
        };
        // binary search for the segment containing s
        let mut lo = 0usize;
        let mut hi = cum.len() - 1;
        while hi - lo > 1 {
            let mid = (lo + hi) / 2;
            if cum[mid] <= s {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let a = self.points[lo % self.points.len()];
        let b = self.points[(lo + 1) % self.points.len()];
        let seg = cum[lo + 1] - cum[lo];
        if seg <= 0.0 {
            return a;
        }
        s -= cum[lo];
        a + (b - a) * (s / seg)
    }

    /// Resample to `n` points uniformly in arclength (keeps flags).
    pub fn resample(&self, n: usize) -> PolylineCurve {
        assert!(n >= 2);
        let total = self.total_length();
        let count = if self.closed { n } else { n - 1 };
        let pts: Vec<Complex64> = (0..n)
            .map(|i| self.point_at_arclength(total * i as f64 / count as f64))
            .collect();
        PolylineCurve {
            closed: self.closed,
            through_infinity: self.through_infinity,
            points: dedup_close(pts),
        }
    }

    pub fn reversed(&self) -> PolylineCurve {
        let mut pts = self.points.clone();
        pts.reverse();
        PolylineCurve {
            closed: self.closed,
            through_infinity: self.through_infinity,
            points: pts,
        }
    }

    pub fn translated(&self, c: Complex64) -> PolylineCurve {
        self.mapped(|z| z + c)
    }

    pub fn scaled(&self, s: f64) -> PolylineCurve {
        self.mapped(|z| z * s)
    }

    pub fn mapped(&self, f: impl Fn(Complex64) -> Complex64) -> PolylineCurve {
        PolylineCurve {
            closed: self.closed,
            through_infinity: self.through_infinity,
            points: self.points.iter().map(|&z| f(z)).collect(),
        }
    }

    /// Simplicity check at a resolution: no two non-adjacent segments come
    /// closer than `resolution`. Uses a uniform spatial hash so the common
    /// case is near-linear.
    pub fn is_simple(&self, resolution: f64) -> bool {
        let segs = self.segments();
        let n = segs.len();
        if n < 2 {
            return true;
        }
        // spatial hash on segment bounding boxes, cell ≈ max segment length
        let cell = segs
            .iter()
            .map(|(a, b)| (b - a).norm())
            .fold(0.0f64, f64::max)
            .max(resolution)
            .max(1e-12);
        use std::collections::HashMap;
        let key = |x: f64, y: f64| ((x / cell).floor() as i64, (y / cell).floor() as i64);
        let mut grid: HashMap<(i64, i64), Vec<usize>> = HashMap::new();
        for (i, (a, b)) in segs.iter().enumerate() {
            let (x0, x1) = (a.re.min(b.re), a.re.max(b.re));
            let (y0, y1) = (a.im.min(b.im), a.im.max(b.im));
            let (kx0, ky0) = key(x0 - resolution, y0 - resolution);
            let (kx1, ky1) = key(x1 + resolution, y1 + resolution);
            for kx in kx0..=kx1 {
                for ky in ky0..=ky1 {
                    grid.entry((kx, ky)).or_default().push(i);
                }
            }
        }
        let adjacent = |i: usize, j: usize| {
            let d = if i > j { i - j } else { j - i };
            d <= 1 || (self.closed && d == n - 1)
        };
        for bucket in grid.values() {
            for (ii, &i) in bucket.iter().enumerate() {
                for &j in &bucket[ii + 1..] {
                    if adjacent(i, j) {
                        continue;
                    }
                    if segment_distance(segs[i], segs[j]) < resolution {
                        return false;
                    }
                }
            }
        }
        true
    }

    /// True if every point lies strictly in the open upper half-plane,
    /// except possibly the endpoints which may touch ℝ.
    pub fn in_upper_halfplane(&self) -> bool {
        let n = self.points.len();
        self.points
            .iter()
            .enumerate()
            .all(|(i, p)| p.im > 0.0 || ((i == 0 || i == n - 1) && p.im >= 0.0))
    }
}

/// Drop consecutive near-duplicate points (relative tolerance on the
/// point-set scale). Used when assembling curves from numerical traces.
pub fn dedup_for_trace(pts: Vec<Complex64>) -> Vec<Complex64> {
    dedup_close(pts)
}

fn dedup_close(pts: Vec<Complex64>) -> Vec<Complex64> {
    let scale = pts.iter().map(|p| p.norm()).fold(0.0f64, f64::max).max(1.0);
    let tol = scale * 1e-14;
    let mut out: Vec<Complex64> = Vec::with_capacity(pts.len());
    for p in pts {
        if out.last().map_or(true, |&q| (p - q).norm() > tol) {
            out.push(p);
        }
    }
    out
}

/// Distance between two segments (0 if they intersect).
fn segment_distance(s1: (Complex64, Complex64), s2: (Complex64, Complex64)) -> f64 {
    if segments_intersect(s1, s2) {
        return 0.0;
    }
    point_segment_distance(s1.0, s2)
        .min(point_segment_distance(s1.1, s2))
        .min(point_segment_distance(s2.0, s1))
        .min(point_segment_distance(s2.1, s1))
}

fn point_segment_distance(p: Complex64, (a, b): (Complex64, Complex64)) -> f64 {
    let ab = b - a;
    let denom = ab.norm_sqr();
    if denom == 0.0 {
        return (p - a).norm();
    }
    let t = ((p - a).re * ab.re + (p - a).im * ab.im) / denom;
    let t = t.clamp(0.0, 1.0);
    (p - (a + ab * t)).norm()
}

pub(crate) fn segments_intersect(
    (p1, p2): (Complex64, Complex64),
    (q1, q2): (Complex64, Complex64),
) -> bool {
    let cross = |o: Complex64, a: Complex64, b: Complex64| {
        (a.re - o.re) * (b.im - o.im) - (a.im - o.im) * (b.re - o.re)
    };
    let d1 = cross(q1, q2, p1);
    let d2 = cross(q1, q2, p2);
    let d3 = cross(p1, p2, q1);
    let d4 = cross(p1, p2, q2);
    ((d1 > 0.0 && d2 < 0.0) || (d1 < 0.0 && d2 > 0.0))
        && ((d3 > 0.0 && d4 < 0.0) || (d3 < 0.0 && d4 > 0.0))
}

// ---------------------------------------------------------------------------
// Generators
// ---------------------------------------------------------------------------

/// Counterclockwise circle.
pub fn circle(center: Complex64, radius: f64, n: usize) -> PolylineCurve {
    let pts = (0..n)
        .map(|i| {
            let t = 2.0 * PI * i as f64 / n as f64;
            center + radius * c64(t.cos(), t.sin())
        })
        .collect();
    PolylineCurve {
        closed: true,
        through_infinity: false,
        points: pts,
    }
}

/// Counterclockwise axis-aligned ellipse with semi-axes `(a, b)` centered at 0.
pub fn ellipse(a: f64, b: f64, n: usize) -> PolylineCurve {
    let pts = (0..n)
        .map(|i| {
            let t = 2.0 * PI * i as f64 / n as f64;
            c64(a * t.cos(), b * t.sin())
        })
        .collect();
    PolylineCurve {
        closed: true,
        through_infinity: false,
        points: pts,
    }
}

/// Upper unit-half-plane semicircle over the real interval `[a, b]`,
/// traversed from `a` to `b` (a chord of the half-plane).
pub fn semicircle(a: f64, b: f64, n: usize) -> PolylineCurve {
    let center = 0.5 * (a + b);
    let r = 0.5 * (b - a).abs();
    let pts = (0..n)
        .map(|i| {
            let t = PI - PI * i as f64 / (n - 1) as f64;
            c64(center + r * t.cos(), r * t.sin())
        })
        .collect();
    PolylineCurve {
        closed: false,
        through_infinity: false,
        points: pts,
    }
}

/// Vertical segment from `x` up to `x + i·height` (a slit in the half-plane).
pub fn vertical_slit(x: f64, height: f64, n: usize) -> PolylineCurve {
    let pts = (0..n)
        .map(|i| c64(x, height * (i + 1) as f64 / n as f64))
        .collect();
    PolylineCurve {
        closed: false,
        through_infinity: false,
        points: pts,
    }
}

/// Line through the origin at angle `theta`, clipped to `|z| ≤ r`
/// (a curve through ∞).
pub fn line_through_origin(theta: f64, r: f64, n: usize) -> PolylineCurve {
    let dir = c64(theta.cos(), theta.sin());
    let pts = (0..n)
        .map(|i| dir * (-r + 2.0 * r * i as f64 / (n - 1) as f64))
        .collect();
    PolylineCurve {
        closed: false,
        through_infinity: true,
        points: pts,
    }
}

/// Graph `x ↦ x + i·f(x)` over `[x0, x1]` (a curve through ∞ when `f`
/// decays at the window ends).
pub fn graph_curve(f: impl Fn(f64) -> f64, x0: f64, x1: f64, n: usize) -> PolylineCurve {
    let pts = (0..n)
        .map(|i| {
            let x = x0 + (x1 - x0) * i as f64 / (n - 1) as f64;
            c64(x, f(x))
        })
        .collect();
    PolylineCurve {
        closed: false,
        through_infinity: true,
        points: pts,
    }
}

// ---------------------------------------------------------------------------
// Möbius transforms
// ---------------------------------------------------------------------------

/// `z ↦ (az + b)/(cz + d)` with `ad − bc ≠ 0`.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct MobiusTransform {
    pub a: Complex64,
    pub b: Complex64,
    pub c: Complex64,
    pub d: Complex64,
}

impl MobiusTransform {
    pub fn new(a: Complex64, b: Complex64, c: Complex64, d: Complex64) -> Result<Self> {
        let det = a * d - b * c;
        if det.norm() < 1e-300 {
            return Err(Error::invalid("Möbius transform is singular"));
        }
        Ok(MobiusTransform { a, b, c, d })
    }

    pub fn identity() -> Self {
        MobiusTransform {
            a: c64(1.0, 0.0),
            b: c64(0.0, 0.0),
            c: c64(0.0, 0.0),
            d: c64(1.0, 0.0),
        }
    }

    /// Real translation + scaling `z ↦ s z + t` (an ℍ-automorphism for
    /// real `s > 0`, `t`).
    pub fn affine(s: Complex64, t: Complex64) -> Self {
        MobiusTransform {
            a: s,
            b: t,
            c: c64(0.0, 0.0),
            d: c64(1.0, 0.0),
        }
    }

    /// Cayley transform ℍ → 𝔻, `z ↦ (z − i)/(z + i)`.
    pub fn cayley() -> Self {
        MobiusTransform {
            a: c64(1.0, 0.0),
            b: c64(0.0, -1.0),
            c: c64(1.0, 0.0),
            d: c64(0.0, 1.0),
        }
    }

    /// ℍ-automorphism sending boundary points `a ↦ 0`, `b ↦ ∞`
    /// (requires `a ≠ b` real; orientation-preserving for `a < b`).
    pub fn to_zero_infinity(a: f64, b: f64) -> Self {
        MobiusTransform {
            a: c64(1.0, 0.0),
            b: c64(-a, 0.0),
            c: c64(-1.0, 0.0),
            d: c64(b, 0.0),
        }
    }

    /// Inversion `z ↦ -1/z` (the ℍ-automorphism swapping 0 and ∞).
    pub fn neg_inverse() -> Self {
        MobiusTransform {
            a: c64(0.0, 0.0),
            b: c64(-1.0, 0.0),
            c: c64(1.0, 0.0),
            d: c64(0.0, 0.0),
        }
    }

    pub fn apply(&self, z: Complex64) -> Complex64 {
        (self.a * z + self.b) / (self.c * z + self.d)
    }

    /// Image of ∞.
    pub fn apply_infinity(&self) -> Complex64 {
        self.a / self.c
    }

    pub fn derivative(&self, z: Complex64) -> Complex64 {
        let det = self.a * self.d - self.b * self.c;
        let den = self.c * z + self.d;
        det / (den * den)
    }

    pub fn inverse(&self) -> MobiusTransform {
        MobiusTransform {
            a: self.d,
            b: -self.b,
            c: -self.c,
            d: self.a,
        }
    }

    /// Composition `self ∘ other` (apply `other` first).
    pub fn compose(&self, other: &MobiusTransform) -> MobiusTransform {
        MobiusTransform {
            a: self.a * other.a + self.b * other.c,
            b: self.a * other.b + self.b * other.d,
            c: self.c * other.a + self.d * other.c,
            d: self.c * other.b + self.d * other.d,
        }
    }

    /// True when the coefficients are (projectively) real with positive
    /// determinant, i.e. the map preserves ℍ.
    pub fn preserves_halfplane(&self) -> bool {
        // rotate coefficients to a real representative if possible
        let pivot = [self.a, self.b, self.c, self.d]
            .into_iter()
            .find(|v| v.norm() > 0.0)
            .unwrap();
        let phase = pivot / pivot.norm();
        let vals = [self.a, self.b, self.c, self.d].map(|v| v / phase);
        let imag_ok = vals.iter().all(|v| v.im.abs() <= 1e-12 * (1.0 + v.norm()));
        let det = (vals[0] * vals[3] - vals[1] * vals[2]).re;
        imag_ok && det > 0.0
    }
}

// ---------------------------------------------------------------------------
// Time grids
// ---------------------------------------------------------------------------

/// Strictly increasing time grid starting at 0.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct TimeGrid(pub Vec<f64>);

impl TimeGrid {
    pub fn new(ts: Vec<f64>) -> Result<Self> {
        if ts.len() < 2 {
            return Err(Error::invalid("time grid needs at least 2 points"));
        }
        if ts[0] != 0.0 {
            return Err(Error::invalid("time grid must start at 0"));
        }
        if ts.windows(2).any(|w| !(w[1] > w[0])) || ts.iter().any(|t| !t.is_finite()) {
            return Err(Error::invalid("time grid must be strictly increasing"));
        }
        Ok(TimeGrid(ts))
    }

    pub fn uniform(t_end: f64, steps: usize) -> Result<Self> {
        if !(t_end > 0.0) || steps == 0 {
            return Err(Error::invalid("uniform grid needs t_end > 0 and steps ≥ 1"));
        }
        Ok(TimeGrid(
            (0..=steps).map(|i| t_end * i as f64 / steps as f64).collect(),
        ))
    }
}

// ---------------------------------------------------------------------------
// Scalar fields on rectangular grids
// ---------------------------------------------------------------------------

/// A real scalar field sampled on a uniform rectangular lattice with an
/// in-domain mask. Index layout is row-major: `values[j*nx + i]` at
/// `(x0 + i·h, y0 + j·h)`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct GridField {
    pub x0: f64,
    pub y0: f64,
    pub h: f64,
    pub nx: usize,
    pub ny: usize,
    pub values: Vec<f64>,
    pub mask: Vec<bool>,
}

impl GridField {
    pub fn from_fn(
        x0: f64,
        y0: f64,
        h: f64,
        nx: usize,
        ny: usize,
        f: impl Fn(Complex64) -> f64,
        in_domain: impl Fn(Complex64) -> bool,
    ) -> Self {
        let mut values = vec![0.0; nx * ny];
        let mut mask = vec![false; nx * ny];
        for j in 0..ny {
            for i in 0..nx {
                let z = c64(x0 + i as f64 * h, y0 + j as f64 * h);
                let inside = in_domain(z);
                mask[j * nx + i] = inside;
                if inside {
                    values[j * nx + i] = f(z);
                }
            }
        }
        GridField {
            x0,
            y0,
            h,
            nx,
            ny,
            values,
            mask,
        }
    }

    /// Square grid covering `|z| ≤ radius + margin` masked to the disk.
    pub fn on_disk(radius: f64, h: f64, f: impl Fn(Complex64) -> f64) -> Self {
        let half = radius + 2.0 * h;
        let n = (2.0 * half / h).ceil() as usize + 1;
        Self::from_fn(-half, -half, h, n, n, f, |z| z.norm() < radius)
    }

    pub fn node(&self, i: usize, j: usize) -> Complex64 {
        c64(self.x0 + i as f64 * self.h, self.y0 + j as f64 * self.h)
    }

    pub fn at(&self, i: usize, j: usize) -> Option<f64> {
        if i < self.nx && j < self.ny && self.mask[j * self.nx + i] {
            Some(self.values[j * self.nx + i])
        } else {
            None
        }
    }

    /// Bilinear interpolation; `None` outside the mask.
    pub fn sample(&self, z: Complex64) -> Option<f64> {
        let fx = (z.re - self.x0) / self.h;
        let fy = (z.im - self.y0) / self.h;
        if fx < 0.0 || fy < 0.0 {
            return None;
        }
        let i = fx.floor() as usize;
        let j = fy.floor() as usize;
        if i + 1 >= self.nx || j + 1 >= self.ny {
            return None;
        }
        let (tx, ty) = (fx - i as f64, fy - j as f64);
        let v00 = self.at(i, j)?;
        let v10 = self.at(i + 1, j)?;
        let v01 = self.at(i, j + 1)?;
        let v11 = self.at(i + 1, j + 1)?;
        Some(
            v00 * (1.0 - tx) * (1.0 - ty)
                + v10 * tx * (1.0 - ty)
                + v01 * (1.0 - tx) * ty
                + v11 * tx * ty,
        )
    }

    /// Centered-difference gradient at an interior masked node.
    pub fn gradient(&self, i: usize, j: usize) -> Option<(f64, f64)> {
        let e = self.at(i + 1, j)?;
        let w = self.at(i.checked_sub(1)?, j)?;
        let n = self.at(i, j + 1)?;
        let s = self.at(i, j.checked_sub(1)?)?;
        Some(((e - w) / (2.0 * self.h), (n - s) / (2.0 * self.h)))
    }
}

// ---------------------------------------------------------------------------
// Metrics
// ---------------------------------------------------------------------------

/// Nearest-neighbor structure: points sorted by real part for windowed scans.
struct SortedPoints {
    pts: Vec<Complex64>,
}

impl SortedPoints {
    fn new(mut pts: Vec<Complex64>) -> Self {
        pts.sort_by(|a, b| a.re.partial_cmp(&b.re).unwrap());
        SortedPoints { pts }
    }

    fn nearest_dist(&self, p: Complex64) -> f64 {
        let n = self.pts.len();
        let idx = self
            .pts
            .partition_point(|q| q.re < p.re)
            .min(n.saturating_sub(1));
        let mut best = f64::INFINITY;
        // expand left and right while the x-gap can still beat `best`
        let (mut l, mut r) = (idx as i64, idx as i64 + 1);
        loop {
            let mut advanced = false;
            if l >= 0 {
                let q = self.pts[l as usize];
                if (q.re - p.re).abs() < best {
                    best = best.min((q - p).norm());
                    l -= 1;
                    advanced = true;
                } else {
                    l = -1;
                }
            }
            if (r as usize) < n {
                let q = self.pts[r as usize];
                if (q.re - p.re).abs() < best {
                    best = best.min((q - p).norm());
                    r += 1;
                    advanced = true;
                } else {
                    r = n as i64;
                }
            }
            if !advanced {
                break;
            }
        }
        best
    }
}

/// Discrete Hausdorff distance between two sampled point sets.
pub fn hausdorff_distance(a: &[Complex64], b: &[Complex64]) -> f64 {
    assert!(!a.is_empty() && !b.is_empty());
    let sa = SortedPoints::new(a.to_vec());
    let sb = SortedPoints::new(b.to_vec());
    let d_ab = a
        .iter()
        .map(|&p| sb.nearest_dist(p))
        .fold(0.0f64, f64::max);
    let d_ba = b
        .iter()
        .map(|&p| sa.nearest_dist(p))
        .fold(0.0f64, f64::max);
    d_ab.max(d_ba)
}

/// Symmetric maximum deviation between two polylines: each vertex of one is
/// measured against the nearest *segment* of the other. Unlike the point-set
/// Hausdorff distance this is insensitive to how densely either curve is
/// sampled, so it compares discretizations of the same underlying curve
/// fairly.
pub fn polyline_deviation(a: &[Complex64], b: &[Complex64]) -> f64 {
    assert!(a.len() >= 2 && b.len() >= 2);
    let one_sided = |pts: &[Complex64], poly: &[Complex64]| -> f64 {
        pts.iter()
            .map(|&p| {
                poly.windows(2)
                    .map(|s| point_segment_distance(p, (s[0], s[1])))
                    .fold(f64::INFINITY, f64::min)
            })
            .fold(0.0f64, f64::max)
    };
    one_sided(a, b).max(one_sided(b, a))
}

/// Like [`polyline_deviation`] but treats both polylines as closed loops: the
/// segment from the last vertex back to the first participates in the
/// nearest-segment search. Use this when neither loop repeats its first
/// vertex, otherwise a point facing the wrap-around edge is measured against
/// far-away vertices instead of the edge itself.
pub fn closed_polyline_deviation(a: &[Complex64], b: &[Complex64]) -> f64 {
    assert!(a.len() >= 2 && b.len() >= 2);
    let one_sided = |pts: &[Complex64], poly: &[Complex64]| -> f64 {
        let n = poly.len();
        pts.iter()
            .map(|&p| {
                (0..n)
                    .map(|i| point_segment_distance(p, (poly[i], poly[(i + 1) % n])))
                    .fold(f64::INFINITY, f64::min)
            })
            .fold(0.0f64, f64::max)
    };
    one_sided(a, b).max(one_sided(b, a))
}

/// Hausdorff distance after pushing both sets through `map` (e.g. a
/// uniformizer onto the disk, so unbounded curves compare on a bounded chart).
pub fn hausdorff_distance_mapped(
    a: &[Complex64],
    b: &[Complex64],
    map: impl Fn(Complex64) -> Complex64,
) -> f64 {
    let ma: Vec<Complex64> = a.iter().map(|&z| map(z)).collect();
    let mb: Vec<Complex64> = b.iter().map(|&z| map(z)).collect();
    hausdorff_distance(&ma, &mb)
}

/// Chord-arc profile: for each scale `s`, the maximum over sampled point
/// pairs at arclength separation ≤ `s` of arclength/chord. Ratios are ≥ 1;
/// scales where no valid pair exists report 1.
pub fn chord_arc_profile(curve: &PolylineCurve, scales: &[f64]) -> Vec<(f64, f64)> {
    let cum = curve.cumulative_arclength();
    let total = *cum.last().unwrap();
    let n = curve.points.len();
    // positions at vertices; for closed curves pairs wrap
    let arc_sep = |i: usize, j: usize| -> f64 {
        let d = (cum[j] - cum[i]).abs();
        if curve.closed {
            d.min(total - d)
        } else {
            d
        }
    };
    let mut out = Vec::with_capacity(scales.len());
    for &s in scales {
        let mut worst = 1.0f64;
        for i in 0..n {
            // walk forward while arclength stays within scale
            let mut j = i + 1;
            loop {
                let jj = if curve.closed { j % n } else { j };
                if jj >= n || (curve.closed && j - i >= n) {
                    break;
                }
                let sep = arc_sep(i, jj.min(cum.len() - 1));
                let arc = if curve.closed && jj < i {
                    (total - cum[i]) + cum[jj]
                } else {
                    cum[jj] - cum[i]
                };
                let arc = if curve.closed { arc.min(total - arc).max(sep) } else { arc };
                if arc > s || arc <= 0.0 {
                    break;
                }
                let chord = (curve.points[jj % n] - curve.points[i]).norm();
                if chord > 1e-14 {
                    worst = worst.max(arc / chord);
                }
                j += 1;
            }
        }
        out.push((s, worst));
    }
    out
}

// ---------------------------------------------------------------------------
// SmoothLoop: Fourier representation of a closed analytic curve
// ---------------------------------------------------------------------------

/// A closed curve represented by a complex Fourier series
/// `z(t) = Σ_k c_k e^{ikt}`, `t ∈ [0, 2π)`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SmoothLoop {
    /// Coefficients in FFT order for an implicit even length `n`:
    /// index `i` carries mode `k = i` for `i ≤ n/2`, else `i − n`.
    pub coeffs: Vec<Complex64>,
}

impl SmoothLoop {
    pub fn circle(center: Complex64, radius: f64) -> Self {
        let n = 8;
        let mut coeffs = vec![c64(0.0, 0.0); n];
        coeffs[0] = center;
        coeffs[1] = c64(radius, 0.0);
        SmoothLoop { coeffs }
    }

    pub fn ellipse(a: f64, b: f64) -> Self {
        let n = 8;
        let mut coeffs = vec![c64(0.0, 0.0); n];
        coeffs[1] = c64(0.5 * (a + b), 0.0);
        coeffs[n - 1] = c64(0.5 * (a - b), 0.0);
        SmoothLoop { coeffs }
    }

    /// Build from samples on the uniform parameter grid.
    pub fn from_samples(samples: &[Complex64]) -> Self {
        SmoothLoop {
            coeffs: spectral::fourier_coeffs(samples),
        }
    }

    /// Fit a polyline: arclength resampling followed by an FFT truncated to
    /// `modes` modes (a mild smoothing of the polyline's corners).
    pub fn fit_polyline(curve: &PolylineCurve, modes: usize) -> Result<Self> {
        if !curve.closed {
            return Err(Error::domain("SmoothLoop requires a closed curve"));
        }
        let n = (4 * modes).next_power_of_two();
        let resampled = curve.resample(n);
        let mut coeffs = spectral::fourier_coeffs(&resampled.points);
        let len = coeffs.len();
        for (i, c) in coeffs.iter_mut().enumerate() {
            if spectral::mode_of(i, len).unsigned_abs() as usize > modes {
                *c = c64(0.0, 0.0);
            }
        }
        Ok(SmoothLoop { coeffs })
    }

    pub fn eval(&self, t: f64) -> Complex64 {
        spectral::eval_series(&self.coeffs, t)
    }

    pub fn deriv(&self, t: f64) -> Complex64 {
        spectral::eval_series_deriv(&self.coeffs, t)
    }

    /// Samples on the uniform grid of size `n` (n ≥ coefficient count
    /// recommended), along with derivatives.
    pub fn sample_uniform(&self, n: usize) -> (Vec<Complex64>, Vec<Complex64>) {
        let mut padded = vec![c64(0.0, 0.0); n];
        let m = self.coeffs.len();
        for (i, &c) in self.coeffs.iter().enumerate() {
            let k = spectral::mode_of(i, m);
            if (k.unsigned_abs() as usize) <= n / 2 {
                let j = if k >= 0 {
                    k as usize
                } else {
                    (n as i64 + k) as usize
                };
                padded[j] += c;
            }
        }
        let values = spectral::fourier_values(&padded);
        let dcoeffs = spectral::differentiate(&padded);
        let derivs = spectral::fourier_values(&dcoeffs);
        (values, derivs)
    }

    /// Signed area `π Σ k |c_k|²`; positive for counterclockwise loops.
    pub fn signed_area(&self) -> f64 {
        let n = self.coeffs.len();
        PI * self
            .coeffs
            .iter()
            .enumerate()
            .map(|(i, c)| spectral::mode_of(i, n) as f64 * c.norm_sqr())
            .sum::<f64>()
    }

    /// Reverse orientation (t ↦ −t).
    pub fn reversed(&self) -> SmoothLoop {
        let n = self.coeffs.len();
        let mut coeffs = vec![c64(0.0, 0.0); n];
        for i in 0..n {
            let j = (n - i) % n;
            coeffs[j] = self.coeffs[i];
        }
        SmoothLoop { coeffs }
    }

    pub fn oriented_ccw(&self) -> SmoothLoop {
        if self.signed_area() >= 0.0 {
            self.clone()
        } else {
            self.reversed()
        }
    }

    pub fn to_polyline(&self, n: usize) -> PolylineCurve {
        let (pts, _) = self.sample_uniform(n);
        PolylineCurve {
            closed: true,
            through_infinity: false,
            points: pts,
        }
    }

    /// Apply `z ↦ s z + t`.
    pub fn affine(&self, s: Complex64, t: Complex64) -> SmoothLoop {
        let mut coeffs: Vec<Complex64> = self.coeffs.iter().map(|&c| c * s).collect();
        coeffs[0] += t;
        SmoothLoop { coeffs }
    }

    /// Reparametrize so |z′(t)| is (nearly) constant, resampling onto
    /// `n` modes. Keeps the curve geometry, improves quadrature behavior.
    pub fn arclength_parametrized(&self, n: usize) -> SmoothLoop {
        let fine = (4 * n).next_power_of_two();
        let (_, derivs) = self.sample_uniform(fine);
        // cumulative |z'| via trapezoid on the fine grid
        let dt = 2.0 * PI / fine as f64;
        let speeds: Vec<f64> = derivs.iter().map(|d| d.norm()).collect();
        let mut cum = vec![0.0; fine + 1];
        for j in 0..fine {
            let nxt = speeds[(j + 1) % fine];
            cum[j + 1] = cum[j] + 0.5 * (speeds[j] + nxt) * dt;
        }
        let total = cum[fine];
        // invert: t(s) for s uniform
        let mut samples = Vec::with_capacity(fine);
        let mut j = 0usize;
        for i in 0..fine {
            let s = total * i as f64 / fine as f64;
            while j + 1 < cum.len() && cum[j + 1] < s {
                j += 1;
            }
            let seg = cum[j + 1] - cum[j];
            let frac = if seg > 0.0 { (s - cum[j]) / seg } else { 0.0 };
            let t = dt * (j as f64 + frac);
            samples.push(self.eval(t));
        }
        let mut coeffs = spectral::fourier_coeffs(&samples);
        let len = coeffs.len();
        for (i, c) in coeffs.iter_mut().enumerate() {
            if spectral::mode_of(i, len).unsigned_abs() as usize > n / 2 {
                *c = c64(0.0, 0.0);
            }
        }
        SmoothLoop { coeffs }
    }
}

// ---------------------------------------------------------------------------
// GraphCurve: periodized graph representation of a curve through ∞
// ---------------------------------------------------------------------------

/// A curve through ∞ represented (after a rigid motion) as a graph
/// `x ↦ x + i·b(x)` with `b` sampled on one period of length `window`.
///
/// The plane curve is `anchor + e^{i·rotation}(x + i b(x))`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct GraphCurve {
    pub window: f64,
    pub rotation: f64,
    pub anchor: Complex64,
    /// Heights at `x_j = -window/2 + j·window/m`.
    pub heights: Vec<f64>,
}

impl GraphCurve {
    /// Build from a height function supported well inside `[-window/2, window/2]`.
    pub fn from_fn(window: f64, m: usize, b: impl Fn(f64) -> f64) -> Self {
        let heights = (0..m)
            .map(|j| b(-window / 2.0 + window * j as f64 / m as f64))
            .collect();
        GraphCurve {
            window,
            rotation: 0.0,
            anchor: c64(0.0, 0.0),
            heights,
        }
    }

    /// The real line.
    pub fn flat(window: f64, m: usize) -> Self {
        Self::from_fn(window, m, |_| 0.0)
    }

    pub fn grid_xs(&self) -> Vec<f64> {
        let m = self.heights.len();
        (0..m)
            .map(|j| -self.window / 2.0 + self.window * j as f64 / m as f64)
            .collect()
    }

    /// Plane point above graph coordinate `x` (trig interpolation of heights).
    pub fn eval(&self, x: f64) -> Complex64 {
        let coeffs = spectral::fourier_coeffs(
            &self
                .heights
                .iter()
                .map(|&h| c64(h, 0.0))
                .collect::<Vec<_>>(),
        );
        let t = 2.0 * PI * (x + self.window / 2.0) / self.window;
        let b = spectral::eval_series(&coeffs, t).re;
        self.plane_point(x, b)
    }

    fn plane_point(&self, x: f64, b: f64) -> Complex64 {
        self.anchor + c64(self.rotation.cos(), self.rotation.sin()) * c64(x, b)
    }

    /// Fit a polyline curve through ∞: derotate by the chord between its
    /// clipped ends, verify it is a graph over that chord, and resample the
    /// heights onto a uniform grid of `m` points over a window `pad` times
    /// the data span (heights taper linearly to the end mean outside the
    /// data range).
    pub fn fit_polyline(curve: &PolylineCurve, m: usize, pad: f64) -> Result<Self> {
        if !curve.through_infinity {
            return Err(Error::domain("GraphCurve requires a curve through ∞"));
        }
        let first = curve.points[0];
        let last = *curve.points.last().unwrap();
        let chord = last - first;
        if chord.norm() < 1e-12 {
            return Err(Error::domain("degenerate curve ends"));
        }
        let rotation = chord.im.atan2(chord.re);
        let rot_inv = c64(rotation.cos(), -rotation.sin());
        let anchor = 0.5 * (first + last);
        let local: Vec<Complex64> = curve.points.iter().map(|&z| rot_inv * (z - anchor)).collect();
        // graph check: strictly increasing x
        for w in local.windows(2) {
            if w[1].re <= w[0].re {
                return Err(Error::domain(
                    "curve is not a graph over its asymptote; cannot build half-plane maps",
                ));
            }
        }
        let x_min = local[0].re;
        let x_max = local.last().unwrap().re;
        let span = x_max - x_min;
        let window = span * pad.max(1.5);
        let end_mean = 0.5 * (local[0].im + local.last().unwrap().im);
        let xs: Vec<f64> = (0..m)
            .map(|j| -window / 2.0 + window * j as f64 / m as f64)
            .collect();
        let mut heights = Vec::with_capacity(m);
        for &x in &xs {
            if x <= x_min {
                // taper from end_mean at the left window edge to the first height
                let t = ((x + window / 2.0) / (x_min + window / 2.0)).clamp(0.0, 1.0);
                heights.push(end_mean + (local[0].im - end_mean) * smoothstep(t));
            } else if x >= x_max {
                let t = ((window / 2.0 - x) / (window / 2.0 - x_max)).clamp(0.0, 1.0);
                heights.push(end_mean + (local.last().unwrap().im - end_mean) * smoothstep(t));
            } else {
                // linear interpolation in the sorted x's
                let idx = local.partition_point(|p| p.re < x);
                let (p0, p1) = (local[idx - 1], local[idx]);
                let t = (x - p0.re) / (p1.re - p0.re);
                heights.push(p0.im + (p1.im - p0.im) * t);
            }
        }
        Ok(GraphCurve {
            window,
            rotation,
            anchor,
            heights,
        })
    }

    pub fn to_polyline(&self, n: usize) -> PolylineCurve {
        let coeffs = spectral::fourier_coeffs(
            &self
                .heights
                .iter()
                .map(|&h| c64(h, 0.0))
                .collect::<Vec<_>>(),
        );
        let pts: Vec<Complex64> = (0..n)
            .map(|i| {
                let x = -self.window / 2.0 + self.window * i as f64 / (n - 1) as f64;
                let t = 2.0 * PI * (x + self.window / 2.0) / self.window;
                let b = spectral::eval_series(&coeffs, t).re;
                self.plane_point(x, b)
            })
            .collect();
        PolylineCurve {
            closed: false,
            through_infinity: true,
            points: pts,
        }
    }
}

fn smoothstep(t: f64) -> f64 {
    let t = t.clamp(0.0, 1.0);
    t * t * (3.0 - 2.0 * t)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn polyline_validation() {
        assert!(PolylineCurve::open(vec![c64(0.0, 0.0)]).is_err());
        assert!(PolylineCurve::open(vec![c64(0.0, 0.0), c64(0.0, 0.0)]).is_err());
        assert!(PolylineCurve::new(vec![c64(0.0, 0.0), c64(1.0, 0.0)], true, true).is_err());
        assert!(PolylineCurve::open(vec![c64(0.0, 0.0), c64(1.0, 1.0)]).is_ok());
    }

    #[test]
    fn arclength_and_resample() {
        let sq = PolylineCurve::closed_loop(vec![
            c64(0.0, 0.0),
            c64(1.0, 0.0),
            c64(1.0, 1.0),
            c64(0.0, 1.0),
        ])
        .unwrap();
        assert!((sq.total_length() - 4.0).abs() < 1e-12);
        let r = sq.resample(400);
        assert!((r.total_length() - 4.0).abs() < 1e-2);
        assert_eq!(r.points.len(), 400);
    }

    #[test]
    fn simplicity() {
        let c = circle(c64(0.0, 0.0), 1.0, 128);
        assert!(c.is_simple(1e-6));
        let fig8 = PolylineCurve::open(vec![
            c64(-1.0, 0.5),
            c64(1.0, 0.5),
            c64(1.0, 1.5),
            c64(-1.0, -0.5),
        ])
        .unwrap();
        assert!(!fig8.is_simple(1e-6));
    }

    #[test]
    fn mobius_basics() {
        let m = MobiusTransform::to_zero_infinity(-1.0, 1.0);
        assert!((m.apply(c64(-1.0, 0.0))).norm() < 1e-14);
        assert!(m.apply(c64(0.999999, 0.0)).norm() > 1e5);
        assert!((m.apply(c64(0.0, 1.0)) - c64(0.0, 1.0)).norm() < 1e-12);
        assert!(m.preserves_halfplane());
        let inv = m.inverse();
        let z = c64(0.3, 0.7);
        assert!((inv.apply(m.apply(z)) - z).norm() < 1e-12);
        let cay = MobiusTransform::cayley();
        assert!(cay.apply(c64(0.0, 1.0)).norm() < 1e-14);
        assert!((cay.apply(c64(0.0, 0.0)) - c64(-1.0, 0.0)).norm() < 1e-14);
    }

    #[test]
    fn hausdorff_of_shifted_circles() {
        let a = circle(c64(0.0, 0.0), 1.0, 512);
        let b = circle(c64(0.05, 0.0), 1.0, 512);
        let d = hausdorff_distance(&a.points, &b.points);
        assert!((d - 0.05).abs() < 5e-3, "d = {d}");
        // metric axioms on a sample
        assert!(hausdorff_distance(&a.points, &a.points) < 1e-15);
        let c = circle(c64(0.0, 0.3), 1.0, 512);
        let dab = hausdorff_distance(&a.points, &b.points);
        let dbc = hausdorff_distance(&b.points, &c.points);
        let dac = hausdorff_distance(&a.points, &c.points);
        assert!(dac <= dab + dbc + 1e-12);
    }

    #[test]
    fn chord_arc_circle_and_corner() {
        let c = circle(c64(0.0, 0.0), 1.0, 4096);
        let prof = chord_arc_profile(&c, &[0.5, 1.0]);
        for (s, ratio) in prof {
            let expected = (s / 2.0) / (s / 2.0).sin();
            assert!(
                (ratio - expected).abs() < 2e-3,
                "scale {s}: ratio {ratio} vs {expected}"
            );
        }
        // right-angle corner (vertex included): ratio approaches √2
        let mut pts: Vec<Complex64> = (0..=99).map(|i| c64(-1.0 + i as f64 / 99.0, 0.0)).collect();
        pts.extend((1..=100).map(|j| c64(0.0, j as f64 / 100.0)));
        let corner = PolylineCurve::open(pts).unwrap();
        let prof = chord_arc_profile(&corner, &[0.2]);
        assert!(
            (prof[0].1 - std::f64::consts::SQRT_2).abs() < 2e-2,
            "corner ratio {}",
            prof[0].1
        );
    }

    #[test]
    fn smooth_loop_circle_and_area() {
        let sl = SmoothLoop::circle(c64(0.5, 0.0), 2.0);
        let z = sl.eval(1.0);
        assert!(((z - c64(0.5, 0.0)).norm() - 2.0).abs() < 1e-12);
        assert!((sl.signed_area() - std::f64::consts::PI * 4.0).abs() < 1e-10);
        assert!(sl.reversed().signed_area() < 0.0);
        let el = SmoothLoop::ellipse(2.0, 1.0);
        assert!((el.signed_area() - std::f64::consts::PI * 2.0).abs() < 1e-10);
    }

    #[test]
    fn smooth_loop_fit_recovers_circle() {
        let poly = circle(c64(0.0, 0.0), 1.5, 2048);
        let sl = SmoothLoop::fit_polyline(&poly, 64).unwrap();
        for i in 0..32 {
            let t = 2.0 * PI * i as f64 / 32.0;
            assert!((sl.eval(t).norm() - 1.5).abs() < 1e-5);
        }
    }

    #[test]
    fn graph_curve_roundtrip() {
        let g = GraphCurve::from_fn(40.0, 512, |x| 0.4 * (-x * x / 2.0).exp());
        let poly = g.to_polyline(1001);
        assert!(poly.through_infinity);
        let refit = GraphCurve::fit_polyline(&poly, 512, 1.0).unwrap();
        assert!(refit.rotation.abs() < 1e-9);
        // rotated line fits with the right angle
        let line = line_through_origin(0.3, 100.0, 501);
        let fit = GraphCurve::fit_polyline(&line, 256, 1.2).unwrap();
        assert!((fit.rotation - 0.3).abs() < 1e-9);
        assert!(fit.heights.iter().all(|h| h.abs() < 1e-9));
    }
}
