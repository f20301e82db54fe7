//! Geodesic backtracking through a solved distance map.

use serde::{Deserialize, Serialize};

use crate::curve::{LiftedPath, Polyline};
use crate::eikonal::{self, DistanceMap, FieldMetric, SolveRequest, StopRule};
use crate::error::{GridError, TraceError};
use crate::grid::{LiftedPoint, Point2};
use crate::metrics::{LiftedMetric3, Metric2, RandersForm};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Integrator {
    Euler,
    #[default]
    Heun,
    Rk4,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TraceConfig {
    /// Step length in cells.
    pub step: f64,
    pub max_steps: usize,
    /// Distance in cells at which a seed counts as reached.
    pub capture_radius: f64,
    pub integrator: Integrator,
    pub direction_samples: usize,
    pub refine_iters: usize,
    /// Consecutive non-decreasing steps tolerated before giving up.
    pub stuck_after: usize,
}

impl Default for TraceConfig {
    fn default() -> Self {
        Self {
            step: 0.25,
            max_steps: 100_000,
            capture_radius: 1.0,
            integrator: Integrator::Heun,
            direction_samples: 64,
            refine_iters: 20,
            stuck_after: 10,
        }
    }
}

impl TraceConfig {
    fn validate(&self) -> Result<(), TraceError> {
        let bad = |what: &str| Err(TraceError::InvalidConfig(what.into()));
        if !(self.step > 0.0 && self.step.is_finite()) {
            return bad("step must be positive");
        }
        if !(self.capture_radius > 0.0 && self.capture_radius.is_finite()) {
            return bad("capture_radius must be positive");
        }
        if self.direction_samples < 3 {
            return bad("direction_samples must be at least 3");
        }
        Ok(())
    }
}

/// Backtracked path, ordered from the target to the reached seed, with the
/// distance value sampled at every point (strictly decreasing).
#[derive(Debug, Clone, PartialEq)]
pub struct GeodesicPath<const D: usize> {
    pub points: Vec<[f64; D]>,
    pub distances: Vec<f64>,
}

impl<const D: usize> GeodesicPath<D> {
    #[must_use]
    pub fn len(&self) -> usize {
        self.points.len()
    }

    #[must_use]
    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn reverse(&mut self) {
        self.points.reverse();
        self.distances.reverse();
    }
}

impl GeodesicPath<2> {
    pub fn polyline(&self) -> Result<Polyline, GridError> {
        Polyline::from_points_dedup(self.points.iter().map(|&p| Point2::from(p)).collect(), false, 1e-9)
    }
}

impl GeodesicPath<3> {
    pub fn lifted(&self) -> Result<LiftedPath, GridError> {
        LiftedPath::new(self.points.iter().map(|&p| LiftedPoint::from(p)).collect())
    }
}

/// Forward direction maximizing `⟨g, v⟩ / F(v)`, by sampling followed by
/// golden-section refinement. Unit length in lattice units.
fn best_direction<const D: usize>(
    form: &RandersForm<D>,
    g: &[f64; D],
    spacing: &[f64; D],
    cfg: &TraceConfig,
) -> Option<[f64; D]> {
    let to_phys = |v: [f64; D]| -> [f64; D] { std::array::from_fn(|a| v[a] * spacing[a]) };
    let score = |v: [f64; D]| {
        let p = to_phys(v);
        let f = form.eval(&p);
        let num: f64 = (0..D).map(|a| g[a] * p[a]).sum();
        if f > 0.0 {
            num / f
        } else {
            f64::NEG_INFINITY
        }
    };
    let dir = |angles: [f64; 2]| -> [f64; D] {
        let mut v = [0.0; D];
        if D == 2 {
            v[0] = angles[0].cos();
            v[1] = angles[0].sin();
        } else {
            let c = angles[1].cos();
            v[0] = c * angles[0].cos();
            v[1] = c * angles[0].sin();
            v[2] = angles[1].sin();
        }
        v
    };
    let (mut best, mut best_s, spread) = if D == 2 {
        let n = cfg.direction_samples;
        let mut best = [0.0, 0.0];
        let mut best_s = f64::NEG_INFINITY;
        for i in 0..n {
            let a = [std::f64::consts::TAU * i as f64 / n as f64, 0.0];
            let s = score(dir(a));
            if s > best_s {
                best_s = s;
                best = a;
            }
        }
        (best, best_s, std::f64::consts::TAU / n as f64)
    } else {
        // Fibonacci sphere; the angular resolution of the plain sample count
        // is too coarse for strongly anisotropic lifted metrics.
        let n = cfg.direction_samples * 8;
        let golden = std::f64::consts::PI * (3.0 - 5f64.sqrt());
        let mut best = [0.0, 0.0];
        let mut best_s = f64::NEG_INFINITY;
        for i in 0..n {
            let z = 1.0 - 2.0 * (i as f64 + 0.5) / n as f64;
            let a = [(golden * i as f64).rem_euclid(std::f64::consts::TAU), z.asin()];
            let s = score(dir(a));
            if s > best_s {
                best_s = s;
                best = a;
            }
        }
        (best, best_s, (4.0 * std::f64::consts::PI / n as f64).sqrt() * 1.5)
    };
    if !best_s.is_finite() || best_s <= 0.0 {
        return None;
    }
    if D == 2 {
        let f = |t: f64| score(dir([t, 0.0]));
        let (t, s) = golden_max(f, best[0] - spread, best[0] + spread, cfg.refine_iters);
        if s > best_s {
            best[0] = t;
        }
        return Some(dir(best));
    }
    // Pattern search on the tangent plane of the sphere.
    let mut v = dir(best);
    let mut r = spread;
    let mut evals = 0;
    while r > 1e-9 && evals < 40 * cfg.refine_iters.max(1) {
        let (e1, e2) = tangent_basis(&v);
        let mut improved = false;
        for k in 0..12 {
            let phi = std::f64::consts::TAU * k as f64 / 12.0;
            let mut c: [f64; D] = std::array::from_fn(|a| v[a] + r * (phi.cos() * e1[a] + phi.sin() * e2[a]));
            let n = c.iter().map(|x| x * x).sum::<f64>().sqrt();
            c.iter_mut().for_each(|x| *x /= n);
            let s = score(c);
            evals += 1;
            if s > best_s {
                best_s = s;
                v = c;
                improved = true;
            }
        }
        if !improved {
            r *= 0.5;
        }
    }
    Some(v)
}

fn tangent_basis<const D: usize>(v: &[f64; D]) -> ([f64; D], [f64; D]) {
    // Only used for D = 3.
    let pick = if v[0].abs() < 0.9 { 0 } else { 1 };
    let mut e = [0.0; D];
    e[pick] = 1.0;
    let d: f64 = (0..D).map(|a| e[a] * v[a]).sum();
    let mut e1: [f64; D] = std::array::from_fn(|a| e[a] - d * v[a]);
    let n = e1.iter().map(|x| x * x).sum::<f64>().sqrt();
    e1.iter_mut().for_each(|x| *x /= n);
    let mut e2 = [0.0; D];
    e2[0] = v[1] * e1[2] - v[2] * e1[1];
    e2[1] = v[2] * e1[0] - v[0] * e1[2];
    e2[2] = v[0] * e1[1] - v[1] * e1[0];
    (e1, e2)
}


fn golden_max(f: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64, iters: usize) -> (f64, f64) {
    let r = (5f64.sqrt() - 1.0) / 2.0;
    let mut x1 = hi - r * (hi - lo);
    let mut x2 = lo + r * (hi - lo);
    let mut f1 = f(x1);
    let mut f2 = f(x2);
    for _ in 0..iters {
        if f1 < f2 {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + r * (hi - lo);
            f2 = f(x2);
        } else {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - r * (hi - lo);
            f1 = f(x1);
        }
    }
    if f1 > f2 {
        (x1, f1)
    } else {
        (x2, f2)
    }
}

struct Tracer<'a, const D: usize, M: FieldMetric<D>> {
    dmap: &'a DistanceMap<D>,
    metric: &'a M,
    cfg: &'a TraceConfig,
}

impl<const D: usize, M: FieldMetric<D>> Tracer<'_, D, M> {
    fn gradient(&self, p: [f64; D]) -> Option<[f64; D]> {
        let lat = self.dmap.lattice();
        let mut g = [0.0; D];
        for a in 0..D {
            let h = 0.5 * lat.spacing[a];
            let mut hi = p;
            hi[a] += h;
            let mut lo = p;
            lo[a] -= h;
            let (hi, lo) = (lat.normalize(hi), lat.normalize(lo));
            let sep = lat.delta(lo, hi)[a];
            if sep <= 0.0 {
                return None;
            }
            let (vh, vl) = (self.dmap.interpolate(hi), self.dmap.interpolate(lo));
            g[a] = match (vh.is_finite(), vl.is_finite()) {
                (true, true) => (vh - vl) / sep,
                // One-sided at the edge of the reached region.
                (true, false) | (false, true) => {
                    let v0 = self.dmap.interpolate(p);
                    if !v0.is_finite() {
                        return None;
                    }
                    if vh.is_finite() {
                        (vh - v0) / lat.delta(p, hi)[a]
                    } else {
                        (v0 - vl) / lat.delta(lo, p)[a]
                    }
                }
                (false, false) => return None,
            };
            if !g[a].is_finite() {
                return None;
            }
        }
        Some(g)
    }

    /// Descent velocity (lattice-unit length one, physical coordinates).
    fn velocity(&self, p: [f64; D]) -> Option<[f64; D]> {
        let lat = self.dmap.lattice();
        let g = self.gradient(p)?;
        let form = self.metric.point_form(p);
        let v = best_direction(&form, &g, &lat.spacing, self.cfg)?;
        Some(std::array::from_fn(|a| -v[a] * lat.spacing[a]))
    }

    fn advance(&self, p: [f64; D], v: [f64; D], h: f64) -> [f64; D] {
        self.dmap.lattice().normalize(std::array::from_fn(|a| p[a] + h * v[a]))
    }

    fn step(&self, p: [f64; D], h: f64, integrator: Integrator) -> Option<[f64; D]> {
        let k1 = self.velocity(p)?;
        Some(match integrator {
            Integrator::Euler => self.advance(p, k1, h),
            Integrator::Heun => {
                let k2 = self.velocity(self.advance(p, k1, h)).unwrap_or(k1);
                self.advance(p, std::array::from_fn(|a| 0.5 * (k1[a] + k2[a])), h)
            }
            Integrator::Rk4 => {
                let k2 = self.velocity(self.advance(p, k1, 0.5 * h)).unwrap_or(k1);
                let k3 = self.velocity(self.advance(p, k2, 0.5 * h)).unwrap_or(k2);
                let k4 = self.velocity(self.advance(p, k3, h)).unwrap_or(k3);
                let v = std::array::from_fn(|a| (k1[a] + 2.0 * k2[a] + 2.0 * k3[a] + k4[a]) / 6.0);
                self.advance(p, v, h)
            }
        })
    }

    /// Lowest interpolated value among the lattice directions at one step,
    /// if it improves on `last`. Used where the gradient is unreliable.
    fn sampled_descent(&self, p: [f64; D], last: f64) -> Option<([f64; D], f64, bool)> {
        let lat = self.dmap.lattice();
        let mut best: Option<([f64; D], f64, bool)> = None;
        for code in 0..3usize.pow(D as u32) {
            let mut c = code;
            let dir: [f64; D] = std::array::from_fn(|_| {
                let v = (c % 3) as f64 - 1.0;
                c /= 3;
                v
            });
            let n = dir.iter().map(|v| v * v).sum::<f64>().sqrt();
            if n == 0.0 {
                continue;
            }
            let q = self.advance(p, std::array::from_fn(|a| dir[a] / n * lat.spacing[a]), self.cfg.step);
            if !lat.contains(q) {
                continue;
            }
            let v = self.dmap.interpolate(q);
            if v < last && best.is_none_or(|b| v < b.1) {
                best = Some((q, v, true));
            }
        }
        if best.is_some() {
            return best;
        }
        // Graph descent: hop to the lowest node next to the current cell.
        for (corner, _) in lat.corners(p) {
            let c = lat.coords(corner);
            // Wide enough to cover every stencil offset.
            for code in 0..5usize.pow(D as u32) {
                let mut k = code;
                let off: [isize; D] = std::array::from_fn(|_| {
                    let v = (k % 5) as isize - 2;
                    k /= 5;
                    v
                });
                let Some(j) = lat.offset_from(c, off) else { continue };
                let v = self.dmap.value(j);
                if v < last && best.is_none_or(|b| v < b.1) {
                    best = Some((lat.position(j), v, true));
                }
            }
        }
        best
    }

    /// Seed within the capture radius (lattice units), if any.
    fn captured(&self, p: [f64; D]) -> Option<[f64; D]> {
        let lat = self.dmap.lattice();
        self.dmap
            .seeds()
            .iter()
            .map(|s| {
                let d = lat.delta(p, s.point);
                let r = (0..D).map(|a| (d[a] / lat.spacing[a]).powi(2)).sum::<f64>().sqrt();
                (r, s.point)
            })
            .filter(|(r, _)| *r <= self.cfg.capture_radius)
            .min_by(|a, b| a.0.total_cmp(&b.0))
            .map(|(_, s)| s)
    }

    fn run(&self, target: [f64; D]) -> Result<GeodesicPath<D>, TraceError> {
        self.cfg.validate()?;
        let lat = self.dmap.lattice();
        if !lat.contains(target) {
            return Err(TraceError::OutsideGrid(target.to_vec()));
        }
        let d0 = self.dmap.value_at(target);
        if !d0.is_finite() {
            return Err(TraceError::UnreachedTarget);
        }
        let mut points = vec![target];
        let mut distances = vec![d0];
        let mut p = target;
        let mut stuck = 0;
        for _ in 0..self.cfg.max_steps {
            if let Some(s) = self.captured(p) {
                if *distances.last().expect("non-empty") > 0.0 {
                    points.push(s);
                    distances.push(0.0);
                }
                return Ok(GeodesicPath { points, distances });
            }
            let last = *distances.last().expect("non-empty");
            let mut moved = None;
            for (h, integ) in [
                (self.cfg.step, self.cfg.integrator),
                (0.5 * self.cfg.step, Integrator::Euler),
            ] {
                if let Some(q) = self.step(p, h, integ) {
                    let v = self.dmap.interpolate(q);
                    if v < last {
                        moved = Some((q, v, true));
                        break;
                    }
                    moved.get_or_insert((q, v, false));
                }
            }
            if !moved.is_some_and(|m| m.2) {
                if let Some(m) = self.sampled_descent(p, last) {
                    moved = Some(m);
                }
            }
            let Some((q, v, decreased)) = moved else {
                return Err(TraceError::StuckDescent { last: p.to_vec() });
            };
            p = q;
            if decreased {
                stuck = 0;
                points.push(q);
                distances.push(v);
            } else {
                stuck += 1;
                if stuck >= self.cfg.stuck_after {
                    return Err(TraceError::StuckDescent { last: p.to_vec() });
                }
            }
        }
        Err(TraceError::MaxStepsExceeded(self.cfg.max_steps))
    }
}

/// Trace from `target` back to the nearest-reached seed of `dmap`
/// (planar metrics). The result runs from the target to the seed.
pub fn backtrack(
    dmap: &DistanceMap<2>,
    metric: &Metric2,
    target: Point2,
    cfg: &TraceConfig,
) -> Result<GeodesicPath<2>, TraceError> {
    Tracer { dmap, metric, cfg }.run(target.to_array())
}

/// Lifted counterpart of [`backtrack`].
pub fn backtrack_lifted(
    dmap: &DistanceMap<3>,
    metric: &LiftedMetric3,
    target: LiftedPoint,
    cfg: &TraceConfig,
) -> Result<GeodesicPath<3>, TraceError> {
    Tracer { dmap, metric, cfg }.run(target.to_array())
}

/// Solve from `source` (optionally stopping once `target` is reached) and
/// backtrack. The returned path runs from source to target.
pub fn trace_between(
    metric: &Metric2,
    source: Point2,
    target: Point2,
    stop_early: bool,
    cfg: &TraceConfig,
) -> Result<GeodesicPath<2>, TraceError> {
    let mut req = SolveRequest::from_point(source);
    if stop_early {
        req = req.with_stop(StopRule::FirstReached(vec![target.to_array()]));
    }
    let dmap = eikonal::solve(metric, &req)?;
    let mut path = backtrack(&dmap, metric, target, cfg)?;
    path.reverse();
    Ok(path)
}

pub fn trace_between_lifted(
    metric: &LiftedMetric3,
    source: LiftedPoint,
    target: LiftedPoint,
    stop_early: bool,
    cfg: &TraceConfig,
) -> Result<GeodesicPath<3>, TraceError> {
    let mut req = SolveRequest::single(source.to_array());
    if stop_early {
        req = req.with_stop(StopRule::FirstReached(vec![target.to_array()]));
    }
    let dmap = eikonal::solve_lifted(metric, &req)?;
    let mut path = backtrack_lifted(&dmap, metric, target, cfg)?;
    path.reverse();
    Ok(path)
}
