//! Per-session state and the synchronous operations run against it.

use std::f64::consts::PI;

use minpath_core::config::{build_metric, BuiltMetric, MetricName, MetricParams};
use minpath_core::eikonal::{self, DistanceMap, SolveRequest, SolveStats, StencilKind, StopRule};
use minpath_core::features::ImageBuffer;
use minpath_core::geodesic::{backtrack, backtrack_lifted, TraceConfig};
use minpath_core::grid::{LiftedPoint, Point2};
use minpath_core::io::{PathFile, StoredField};
use minpath_core::region::{evolve_step, EvolutionParams, EvolutionState, RegionKind};
use serde::{Deserialize, Serialize};

use crate::error::ApiError;
use crate::Limits;

pub struct ActiveMetric {
    pub name: MetricName,
    pub params: MetricParams,
    pub built: BuiltMetric,
}

pub enum Distance {
    Planar(DistanceMap<2>),
    Lifted(DistanceMap<3>),
}

pub struct Session {
    pub image: ImageBuffer,
    pub metric: Option<ActiveMetric>,
    pub distance: Option<Distance>,
    pub evolution: Option<EvolutionState>,
}

#[derive(Debug, Deserialize)]
pub struct MetricRequest {
    pub kind: MetricName,
    #[serde(default)]
    pub params: MetricParams,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct MetricResponse {
    pub ok: bool,
    pub pd_max: f64,
    pub lifted: bool,
}

#[derive(Debug, Default, Deserialize)]
#[serde(default)]
pub struct StopSpec {
    pub target: Option<Vec<f64>>,
    pub max_distance: Option<f64>,
}

#[derive(Debug, Deserialize)]
pub struct DistanceRequest {
    pub seed: Vec<f64>,
    #[serde(default)]
    pub stop: StopSpec,
    #[serde(default)]
    pub stencil: StencilKind,
}

/// Max-pooled view of a distance map; unreached cells are `null`.
#[derive(Debug, Serialize, Deserialize)]
pub struct Preview {
    pub width: usize,
    pub height: usize,
    /// Side of the pooling block in pixels.
    pub factor: usize,
    pub values: Vec<Option<f64>>,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct StatsBody {
    pub accepted: usize,
    pub reinsertions: usize,
    pub monotone_violations: usize,
    pub max_finite: Option<f64>,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct DistanceResponse {
    pub stats: StatsBody,
    pub preview: Preview,
}

#[derive(Debug, Deserialize)]
pub struct PathRequest {
    pub target: Vec<f64>,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct PathResponse {
    /// Source to target.
    pub points: Vec<Vec<f64>>,
    pub distance: f64,
}

#[derive(Debug, Deserialize)]
pub struct EvolutionRequest {
    pub vertices: Vec<[f64; 2]>,
    pub r: Option<f64>,
    pub alpha: Option<f64>,
    pub beta: Option<f64>,
    pub sigma: Option<f64>,
    pub max_iters: Option<usize>,
    pub tolerance: Option<f64>,
    pub kind: Option<RegionKind>,
    pub resample_vertices: Option<bool>,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct EvolutionSummary {
    pub k: usize,
    pub vertices: Vec<[f64; 2]>,
    pub curve: Vec<[f64; 2]>,
    pub tube_radius: f64,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct StepResponse {
    pub k: usize,
    pub curve: Vec<[f64; 2]>,
    pub hausdorff_step: f64,
    pub energy: f64,
    pub max_varpi: f64,
    pub converged: bool,
}

#[derive(Debug, Deserialize)]
pub struct TubePathRequest {
    pub source: [f64; 2],
    pub target: [f64; 2],
}

#[derive(Debug, Serialize, Deserialize)]
pub struct PairDistance {
    pub source: [f64; 3],
    pub target: [f64; 3],
    pub distance: Option<f64>,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct TubePathResponse {
    pub pairs: Vec<PairDistance>,
    pub best: usize,
    pub points: Vec<Vec<f64>>,
}

fn finite(v: f64) -> Option<f64> {
    v.is_finite().then_some(v)
}

fn curve_points(pts: &[Point2]) -> Vec<[f64; 2]> {
    pts.iter().map(|p| [p.x, p.y]).collect()
}

/// Pool `plane` (row-major `w × h`) by the largest value per block so the
/// result fits in `max_side`.
pub fn max_pool(plane: &[f64], w: usize, h: usize, max_side: usize) -> Preview {
    let factor = w.max(h).div_ceil(max_side.max(1)).max(1);
    let (pw, ph) = (w.div_ceil(factor), h.div_ceil(factor));
    let mut out = vec![f64::NEG_INFINITY; pw * ph];
    for y in 0..h {
        for x in 0..w {
            let o = &mut out[(y / factor) * pw + x / factor];
            let v = plane[y * w + x];
            if v > *o || v.is_nan() {
                *o = if v.is_nan() { f64::INFINITY } else { v };
            }
        }
    }
    Preview {
        width: pw,
        height: ph,
        factor,
        values: out.into_iter().map(finite).collect(),
    }
}

impl Session {
    #[must_use]
    pub fn new(image: ImageBuffer) -> Self {
        Self {
            image,
            metric: None,
            distance: None,
            evolution: None,
        }
    }

    pub fn set_metric(&mut self, req: MetricRequest, limits: &Limits) -> Result<MetricResponse, ApiError> {
        if req.kind == MetricName::Elastica && req.params.n_theta > limits.max_theta {
            return Err(ApiError::TooLarge(format!(
                "{} orientations exceed the limit of {}",
                req.params.n_theta, limits.max_theta
            )));
        }
        let built = build_metric(&self.image, req.kind, &req.params)?;
        let pd_max = built.pd_max()?;
        let lifted = built.is_lifted();
        self.metric = Some(ActiveMetric {
            name: req.kind,
            params: req.params,
            built,
        });
        self.distance = None;
        Ok(MetricResponse { ok: true, pd_max, lifted })
    }

    fn active_metric(&mut self) -> Result<&ActiveMetric, ApiError> {
        if self.metric.is_none() {
            let params = MetricParams::default();
            let built = build_metric(&self.image, MetricName::Iso, &params)?;
            self.metric = Some(ActiveMetric {
                name: MetricName::Iso,
                params,
                built,
            });
        }
        Ok(self.metric.as_ref().expect("metric was just set"))
    }

    pub fn distance(&mut self, req: DistanceRequest, limits: &Limits) -> Result<DistanceResponse, ApiError> {
        let grid = self.image.grid();
        let metric = self.active_metric()?;
        if req.stop.target.is_some() && req.stop.max_distance.is_some() {
            return Err(ApiError::BadRequest("stop accepts either target or max_distance".into()));
        }
        let (dist, stats, plane) = match &metric.built {
            BuiltMetric::Planar(m) => {
                let seed: [f64; 2] = point_arg(&req.seed, "seed")?;
                let stop = match (&req.stop.target, req.stop.max_distance) {
                    (Some(t), _) => StopRule::FirstReached(vec![point_arg(t, "stop.target")?]),
                    (None, Some(d)) => StopRule::DistanceCap(d),
                    (None, None) => StopRule::None,
                };
                let dm = eikonal::solve(m, &SolveRequest::single(seed).with_stop(stop).with_stencil(req.stencil))?;
                let stats = dm.stats();
                let plane = dm.values().to_vec();
                (Distance::Planar(dm), stats, plane)
            }
            BuiltMetric::Lifted { metric: m, .. } => {
                let seed: [f64; 3] = point_arg(&req.seed, "seed")?;
                let stop = match (&req.stop.target, req.stop.max_distance) {
                    (Some(t), _) => StopRule::FirstReached(vec![point_arg(t, "stop.target")?]),
                    (None, Some(d)) => StopRule::DistanceCap(d),
                    (None, None) => StopRule::None,
                };
                let dm = eikonal::solve_lifted(m, &SolveRequest::single(seed).with_stop(stop).with_stencil(req.stencil))?;
                let stats = dm.stats();
                let plane = min_over_theta(dm.values(), grid.len());
                (Distance::Lifted(dm), stats, plane)
            }
        };
        let max_finite = plane.iter().copied().filter(|v| v.is_finite()).fold(None, |m: Option<f64>, v| {
            Some(m.map_or(v, |m| m.max(v)))
        });
        self.distance = Some(dist);
        Ok(DistanceResponse {
            stats: stats_body(stats, max_finite),
            preview: max_pool(&plane, grid.width(), grid.height(), limits.preview_side),
        })
    }

    pub fn distance_field(&self) -> Result<StoredField, ApiError> {
        let Some(d) = &self.distance else {
            return Err(ApiError::Conflict("no distance map computed".into()));
        };
        let lattice_grid = self.image.grid();
        Ok(match d {
            Distance::Planar(dm) => StoredField::scalar(lattice_grid, dm.values(), "distance")?,
            Distance::Lifted(dm) => {
                let ActiveMetric {
                    built: BuiltMetric::Lifted { metric, .. },
                    ..
                } = self.metric.as_ref().expect("lifted distance implies a lifted metric")
                else {
                    return Err(ApiError::Internal("distance and metric disagree".into()));
                };
                StoredField::lifted(metric.grid(), dm.values(), "distance")?
            }
        })
    }

    pub fn path(&self, req: &PathRequest) -> Result<PathResponse, ApiError> {
        let (Some(dist), Some(metric)) = (&self.distance, &self.metric) else {
            return Err(ApiError::Conflict("no distance map computed".into()));
        };
        let cfg = TraceConfig::default();
        match (dist, &metric.built) {
            (Distance::Planar(dm), BuiltMetric::Planar(m)) => {
                let t: [f64; 2] = point_arg(&req.target, "target")?;
                let mut gp = backtrack(dm, m, Point2::from(t), &cfg)?;
                gp.reverse();
                let distance = dm.value_at(t);
                Ok(PathResponse {
                    points: PathFile::from_polyline(&gp.polyline()?).points,
                    distance,
                })
            }
            (Distance::Lifted(dm), BuiltMetric::Lifted { metric: m, .. }) => {
                let t: [f64; 3] = point_arg(&req.target, "target")?;
                let mut gp = backtrack_lifted(dm, m, LiftedPoint::from(t), &cfg)?;
                gp.reverse();
                Ok(PathResponse {
                    points: PathFile::from_lifted(&gp.lifted()?).points,
                    distance: dm.value_at(t),
                })
            }
            _ => Err(ApiError::Internal("distance and metric disagree".into())),
        }
    }

    pub fn start_evolution(&mut self, req: &EvolutionRequest) -> Result<EvolutionSummary, ApiError> {
        let d = EvolutionParams::default();
        let params = EvolutionParams {
            tube_radius: req.r.unwrap_or(d.tube_radius),
            alpha: req.alpha.unwrap_or(d.alpha),
            beta: req.beta.unwrap_or(d.beta),
            sigma: req.sigma.unwrap_or(d.sigma),
            max_iters: req.max_iters.unwrap_or(d.max_iters),
            tolerance: req.tolerance.unwrap_or(d.tolerance),
            kind: req.kind.unwrap_or(d.kind),
            resample_vertices: req.resample_vertices.unwrap_or(d.resample_vertices),
            trace: d.trace,
        };
        let vertices: Vec<Point2> = req.vertices.iter().map(|&v| Point2::from(v)).collect();
        let state = EvolutionState::new(&self.image, &vertices, params)?;
        let summary = EvolutionSummary {
            k: state.history.len(),
            vertices: curve_points(&state.vertices),
            curve: curve_points(state.curve.points()),
            tube_radius: state.params.tube_radius,
        };
        self.evolution = Some(state);
        Ok(summary)
    }

    pub fn step_evolution(&mut self) -> Result<StepResponse, ApiError> {
        let Some(state) = &self.evolution else {
            return Err(ApiError::Conflict("no evolution started".into()));
        };
        let next = evolve_step(state, &self.image)?;
        let rec = *next.last_record().expect("a step records its iteration");
        let resp = StepResponse {
            k: rec.k,
            curve: curve_points(next.curve.points()),
            hausdorff_step: rec.hausdorff_step,
            energy: rec.energy,
            max_varpi: rec.max_varpi,
            converged: next.converged(),
        };
        self.evolution = Some(next);
        Ok(resp)
    }

    /// Tries both orientations of the tube axis at each endpoint and keeps
    /// the cheapest of the four pairs (lowest pair index on ties).
    pub fn tube_path(&mut self, req: &TubePathRequest) -> Result<TubePathResponse, ApiError> {
        let grid = self.image.grid();
        let Some(ActiveMetric {
            built: BuiltMetric::Lifted {
                metric,
                score: Some(score),
            },
            ..
        }) = &self.metric
        else {
            return Err(ApiError::Conflict("tube-path needs an elastica metric with an orientation score".into()));
        };
        let lg = metric.grid();
        let axis = |p: [f64; 2]| -> Result<[f64; 2], ApiError> {
            let q = Point2::from(p);
            if !grid.contains(q) {
                return Err(ApiError::BadRequest(format!("point {p:?} lies outside the image")));
            }
            let (x, y) = (q.x.round() as usize, q.y.round() as usize);
            let theta = lg.theta(score.argmax_theta(x, y));
            Ok([theta, (theta + PI).rem_euclid(2.0 * PI)])
        };
        let (sa, ta) = (axis(req.source)?, axis(req.target)?);
        let [sx, sy] = req.source;
        let [tx, ty] = req.target;
        let targets = [[tx, ty, ta[0]], [tx, ty, ta[1]]];
        let mut pairs = Vec::with_capacity(4);
        let mut maps = Vec::with_capacity(2);
        for &st in &sa {
            let src = [sx, sy, st];
            let dm = eikonal::solve_lifted(
                metric,
                &SolveRequest::single(src).with_stop(StopRule::FirstReached(targets.to_vec())),
            )?;
            for t in targets {
                pairs.push(PairDistance {
                    source: src,
                    target: t,
                    distance: finite(dm.value_at(t)),
                });
            }
            maps.push(dm);
        }
        let mut best: Option<usize> = None;
        for (i, p) in pairs.iter().enumerate() {
            if let Some(d) = p.distance {
                if best.is_none_or(|b| d < pairs[b].distance.expect("best is finite")) {
                    best = Some(i);
                }
            }
        }
        let Some(best) = best else {
            return Err(minpath_core::error::TraceError::UnreachedTarget.into());
        };
        let dm = maps.swap_remove(best / 2);
        let mut gp = backtrack_lifted(&dm, metric, LiftedPoint::from(pairs[best].target), &TraceConfig::default())?;
        gp.reverse();
        let points = PathFile::from_lifted(&gp.lifted()?).points;
        self.distance = Some(Distance::Lifted(dm));
        Ok(TubePathResponse { pairs, best, points })
    }
}

fn stats_body(s: SolveStats, max_finite: Option<f64>) -> StatsBody {
    StatsBody {
        accepted: s.accepted,
        reinsertions: s.reinsertions,
        monotone_violations: s.monotone_violations,
        max_finite,
    }
}

fn min_over_theta(values: &[f64], plane: usize) -> Vec<f64> {
    let mut out = vec![f64::INFINITY; plane];
    for layer in values.chunks(plane) {
        for (o, &v) in out.iter_mut().zip(layer) {
            *o = o.min(v);
        }
    }
    out
}

fn point_arg<const D: usize>(v: &[f64], what: &str) -> Result<[f64; D], ApiError> {
    let arr: [f64; D] = v
        .try_into()
        .map_err(|_| ApiError::BadRequest(format!("{what} needs {D} coordinates, got {}", v.len())))?;
    if arr.iter().any(|c| !c.is_finite()) {
        return Err(ApiError::BadRequest(format!("{what} has a non-finite coordinate")));
    }
    Ok(arr)
}
