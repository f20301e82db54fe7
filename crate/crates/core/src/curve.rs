//! Polylines and the curve utilities shared by tracing and region evolution.

use serde::{Deserialize, Serialize};

use crate::error::GridError;
use crate::grid::{wrap_angle, wrap_angle_diff, Grid2, LiftedPoint, Mask, Point2};

const DUPLICATE_EPS: f64 = 1e-12;

/// Ordered list of points, open or closed.
///
/// A closed polyline has an implicit edge from the last point back to the
/// first; the first point is not repeated at the end.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Polyline {
    points: Vec<Point2>,
    closed: bool,
}

impl Polyline {
    pub fn new(points: Vec<Point2>, closed: bool) -> Result<Self, GridError> {
        if points.len() < 2 {
            return Err(GridError::InvalidPolyline(format!(
                "need at least 2 points, got {}",
                points.len()
            )));
        }
        if let Some(p) = points.iter().find(|p| !p.is_finite()) {
            return Err(GridError::InvalidPolyline(format!("non-finite point {p:?}")));
        }
        for (i, w) in points.windows(2).enumerate() {
            if w[0].distance(w[1]) <= DUPLICATE_EPS {
                return Err(GridError::InvalidPolyline(format!(
                    "points {i} and {} coincide",
                    i + 1
                )));
            }
        }
        if closed && points[0].distance(points[points.len() - 1]) <= DUPLICATE_EPS {
            return Err(GridError::InvalidPolyline(
                "closed polyline repeats its first point".into(),
            ));
        }
        if closed && points.len() < 3 {
            return Err(GridError::InvalidPolyline("closed polyline needs 3 points".into()));
        }
        Ok(Self { points, closed })
    }

    pub fn open(points: Vec<Point2>) -> Result<Self, GridError> {
        Self::new(points, false)
    }

    pub fn closed(points: Vec<Point2>) -> Result<Self, GridError> {
        Self::new(points, true)
    }

    /// Build a polyline after dropping consecutive points closer than `eps`.
    pub fn from_points_dedup(points: Vec<Point2>, closed: bool, eps: f64) -> Result<Self, GridError> {
        let mut out: Vec<Point2> = Vec::with_capacity(points.len());
        for p in points {
            if out.last().map_or(true, |q| q.distance(p) > eps) {
                out.push(p);
            }
        }
        if closed {
            while out.len() > 1 && out[0].distance(out[out.len() - 1]) <= eps {
                out.pop();
            }
        }
        Self::new(out, closed)
    }

    #[must_use]
    pub fn points(&self) -> &[Point2] {
        &self.points
    }

    #[must_use]
    pub fn into_points(self) -> Vec<Point2> {
        self.points
    }

    #[must_use]
    pub const fn is_closed(&self) -> bool {
        self.closed
    }

    #[must_use]
    pub fn len(&self) -> usize {
        self.points.len()
    }

    #[must_use]
    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    #[must_use]
    pub fn first(&self) -> Point2 {
        self.points[0]
    }

    #[must_use]
    pub fn last(&self) -> Point2 {
        self.points[self.points.len() - 1]
    }

    #[must_use]
    pub fn segment_count(&self) -> usize {
        if self.closed {
            self.points.len()
        } else {
            self.points.len() - 1
        }
    }

    /// Segment endpoints, including the closing edge of a closed polyline.
    pub fn segments(&self) -> impl Iterator<Item = (Point2, Point2)> + '_ {
        let n = self.points.len();
        (0..self.segment_count()).map(move |i| (self.points[i], self.points[(i + 1) % n]))
    }

    /// Euclidean length.
    #[must_use]
    pub fn length(&self) -> f64 {
        self.segments().map(|(a, b)| a.distance(b)).sum()
    }

    #[must_use]
    pub fn reversed(&self) -> Self {
        let mut points = self.points.clone();
        points.reverse();
        Self {
            points,
            closed: self.closed,
        }
    }

    /// Shoelace area; positive when the curve turns counterclockwise in
    /// `(x, y)` coordinates, which is clockwise on screen (y downward).
    #[must_use]
    pub fn signed_area(&self) -> f64 {
        let n = self.points.len();
        0.5 * (0..n)
            .map(|i| self.points[i].cross(self.points[(i + 1) % n]))
            .sum::<f64>()
    }

    /// Resample at (nearly) uniform arc-length spacing.
    ///
    /// The spacing is `length / round(length / step)`, so both endpoints of an
    /// open curve are kept and a closed curve closes up exactly.
    pub fn resample_arclength(&self, step: f64) -> Result<Self, GridError> {
        if !(step > 0.0) {
            return Err(GridError::DegenerateCurve(format!("step must be positive, got {step}")));
        }
        let total = self.length();
        if total < step {
            return Err(GridError::DegenerateCurve(format!(
                "curve length {total} is shorter than step {step}"
            )));
        }
        let pieces = ((total / step).round() as usize).max(if self.closed { 3 } else { 1 });
        let spacing = total / pieces as f64;
        let count = if self.closed { pieces } else { pieces + 1 };

        let segs: Vec<(Point2, Point2, f64)> = self
            .segments()
            .map(|(a, b)| (a, b, a.distance(b)))
            .collect();
        let mut out = Vec::with_capacity(count);
        let mut seg = 0;
        let mut seg_start = 0.0;
        for k in 0..count {
            let s = if !self.closed && k == count - 1 {
                total
            } else {
                k as f64 * spacing
            };
            while seg + 1 < segs.len() && seg_start + segs[seg].2 < s {
                seg_start += segs[seg].2;
                seg += 1;
            }
            let (a, b, len) = segs[seg];
            let t = ((s - seg_start) / len).clamp(0.0, 1.0);
            out.push(a + (b - a) * t);
        }
        if !self.closed {
            out[count - 1] = self.last();
        }
        Self::from_points_dedup(out, self.closed, DUPLICATE_EPS)
    }

    /// Signed curvature at each interior vertex (every vertex when closed).
    ///
    /// Turning angle between adjacent segments, unwrapped into `(-π, π]`,
    /// divided by the mean length of the two segments.
    pub fn discrete_curvature(&self) -> Result<Vec<f64>, GridError> {
        let n = self.points.len();
        if n < 3 {
            return Err(GridError::DegenerateCurve("curvature needs at least 3 points".into()));
        }
        let range = if self.closed { 0..n } else { 1..n - 1 };
        let mut out = Vec::with_capacity(range.len());
        for i in range {
            let prev = self.points[(i + n - 1) % n];
            let cur = self.points[i];
            let next = self.points[(i + 1) % n];
            let a = cur - prev;
            let b = next - cur;
            let (la, lb) = (a.norm(), b.norm());
            if la <= DUPLICATE_EPS || lb <= DUPLICATE_EPS {
                return Err(GridError::DegenerateCurve(format!("repeated point at {i}")));
            }
            let turn = wrap_angle_diff(b.angle() - a.angle());
            out.push(turn / (0.5 * (la + lb)));
        }
        Ok(out)
    }

    /// Elastica bending energy `∫ (1 + α κ²) ds` of the polyline.
    pub fn bending_energy(&self, alpha: f64) -> Result<f64, GridError> {
        let kappa = self.discrete_curvature()?;
        let n = self.points.len();
        let mut energy = self.length();
        let offset = usize::from(!self.closed);
        for (j, k) in kappa.iter().enumerate() {
            let i = j + offset;
            let prev = self.points[(i + n - 1) % n];
            let next = self.points[(i + 1) % n];
            let ds = 0.5 * (self.points[i].distance(prev) + self.points[i].distance(next));
            energy += alpha * k * k * ds;
        }
        Ok(energy)
    }

    /// Find a pair of crossing, non-adjacent segments.
    #[must_use]
    pub fn find_self_intersection(&self) -> Option<(usize, usize)> {
        let n = self.points.len();
        let m = self.segment_count();
        let segs: Vec<(Point2, Point2)> = self.segments().collect();
        let mut order: Vec<usize> = (0..m).collect();
        let min_x = |i: usize| segs[i].0.x.min(segs[i].1.x);
        let max_x = |i: usize| segs[i].0.x.max(segs[i].1.x);
        order.sort_by(|&a, &b| min_x(a).total_cmp(&min_x(b)));
        for (pos, &i) in order.iter().enumerate() {
            let hi = max_x(i);
            for &j in &order[pos + 1..] {
                if min_x(j) > hi {
                    break;
                }
                let adjacent = i.abs_diff(j) == 1 || (self.closed && i.abs_diff(j) == n - 1);
                if adjacent {
                    continue;
                }
                if segments_intersect(segs[i], segs[j]) {
                    return Some((i.min(j), i.max(j)));
                }
            }
        }
        None
    }

    /// Pixel-center mask of the enclosed region by the even–odd rule.
    pub fn rasterize_region(&self, grid: Grid2) -> Result<Mask, GridError> {
        if !self.closed {
            return Err(GridError::InvalidPolyline("region of an open curve".into()));
        }
        if let Some((first, second)) = self.find_self_intersection() {
            return Err(GridError::SelfIntersecting { first, second });
        }
        Ok(self.rasterize_unchecked(grid))
    }

    pub(crate) fn rasterize_unchecked(&self, grid: Grid2) -> Mask {
        let mut mask = Mask::empty(grid);
        let mut xs: Vec<f64> = Vec::new();
        for row in 0..grid.height() {
            let y = row as f64;
            xs.clear();
            for (a, b) in self.segments() {
                if (a.y > y) != (b.y > y) {
                    xs.push(a.x + (y - a.y) / (b.y - a.y) * (b.x - a.x));
                }
            }
            xs.sort_by(f64::total_cmp);
            for pair in xs.chunks_exact(2) {
                let lo = pair[0].ceil().max(0.0);
                let hi = pair[1].min((grid.width() - 1) as f64);
                if lo > hi {
                    continue;
                }
                for col in lo as usize..=hi.floor() as usize {
                    let x = col as f64;
                    if x > pair[0] && x < pair[1] {
                        mask.set(grid.index(col, row), true);
                    }
                }
            }
        }
        mask
    }

    /// Euclidean distance from `p` to the nearest point of the polyline.
    #[must_use]
    pub fn distance_to(&self, p: Point2) -> f64 {
        self.segments()
            .map(|(a, b)| point_segment_distance(p, a, b))
            .fold(f64::INFINITY, f64::min)
    }

    /// Winding number of the closed polyline around `p`.
    #[must_use]
    pub fn winding_number(&self, p: Point2) -> i32 {
        let n = self.points.len();
        let mut total = 0.0;
        for i in 0..n {
            let a = self.points[i] - p;
            let b = self.points[(i + 1) % n] - p;
            total += wrap_angle_diff(b.angle() - a.angle());
        }
        (total / std::f64::consts::TAU).round() as i32
    }
}

/// Orientation-lifted path `(x, y, θ)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LiftedPath {
    points: Vec<LiftedPoint>,
}

impl LiftedPath {
    pub fn new(points: Vec<LiftedPoint>) -> Result<Self, GridError> {
        if points.is_empty() {
            return Err(GridError::InvalidPolyline("empty lifted path".into()));
        }
        Ok(Self {
            points: points
                .into_iter()
                .map(|p| LiftedPoint::new(p.x, p.y, wrap_angle(p.theta)))
                .collect(),
        })
    }

    #[must_use]
    pub fn points(&self) -> &[LiftedPoint] {
        &self.points
    }

    #[must_use]
    pub fn len(&self) -> usize {
        self.points.len()
    }

    #[must_use]
    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Orientation values unwrapped into a continuous sequence.
    #[must_use]
    pub fn unwrapped_theta(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.points.len());
        let mut acc = self.points[0].theta;
        out.push(acc);
        for w in self.points.windows(2) {
            acc += wrap_angle_diff(w[1].theta - w[0].theta);
            out.push(acc);
        }
        out
    }

    /// Spatial projection onto the image plane.
    pub fn project(&self) -> Result<Polyline, GridError> {
        Polyline::from_points_dedup(
            self.points.iter().map(|p| p.position()).collect(),
            false,
            1e-9,
        )
    }
}

#[must_use]
pub fn point_segment_distance(p: Point2, a: Point2, b: Point2) -> f64 {
    let ab = b - a;
    let len2 = ab.dot(ab);
    if len2 == 0.0 {
        return p.distance(a);
    }
    let t = ((p - a).dot(ab) / len2).clamp(0.0, 1.0);
    p.distance(a + ab * t)
}

fn orient(a: Point2, b: Point2, c: Point2) -> f64 {
    (b - a).cross(c - a)
}

fn on_segment(a: Point2, b: Point2, p: Point2) -> bool {
    p.x >= a.x.min(b.x) && p.x <= a.x.max(b.x) && p.y >= a.y.min(b.y) && p.y <= a.y.max(b.y)
}

/// Closed-segment intersection test (touching counts).
#[must_use]
pub fn segments_intersect(s: (Point2, Point2), t: (Point2, Point2)) -> bool {
    let (a, b) = s;
    let (c, d) = t;
    let d1 = orient(c, d, a);
    let d2 = orient(c, d, b);
    let d3 = orient(a, b, c);
    let d4 = orient(a, b, d);
    if ((d1 > 0.0 && d2 < 0.0) || (d1 < 0.0 && d2 > 0.0))
        && ((d3 > 0.0 && d4 < 0.0) || (d3 < 0.0 && d4 > 0.0))
    {
        return true;
    }
    (d1 == 0.0 && on_segment(c, d, a))
        || (d2 == 0.0 && on_segment(c, d, b))
        || (d3 == 0.0 && on_segment(a, b, c))
        || (d4 == 0.0 && on_segment(a, b, d))
}

/// Symmetric Hausdorff distance between two polylines, measured from the
/// vertices of each to the segments of the other.
#[must_use]
pub fn hausdorff(a: &Polyline, b: &Polyline) -> f64 {
    let one_sided = |p: &Polyline, q: &Polyline| {
        p.points()
            .iter()
            .map(|&x| q.distance_to(x))
            .fold(0.0, f64::max)
    };
    one_sided(a, b).max(one_sided(b, a))
}
