//! Region-driven active contours through vertex-anchored Randers geodesics.

use serde::{Deserialize, Serialize};

use crate::curve::{hausdorff, point_segment_distance, Polyline};
use crate::eikonal::{self, SolveRequest, StopRule};
use crate::error::{GridError, RegionError};
use crate::features::{edge_potential, gradient_magnitude, saturate, ImageBuffer, PotentialKind};
use crate::geodesic::{self, TraceConfig};
use crate::grid::{Grid2, Mask, Point2, ScalarField, VectorField2};
use crate::metrics::Metric2;

/// Polarity of the constant balloon gradient.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BalloonSign {
    /// `ρ ≡ −1`: enclosing more area lowers the energy.
    Inflate,
    /// `ρ ≡ +1`.
    Deflate,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind", content = "sign")]
pub enum RegionKind {
    #[default]
    ChanVese,
    Balloon(BalloonSign),
}

/// Linearized region term `ρ`.
#[derive(Debug, Clone, PartialEq)]
pub struct RegionGradient {
    pub rho: ScalarField,
    pub kind: RegionKind,
}

fn gray_values(img: &ImageBuffer) -> Vec<f64> {
    if img.channels() == 1 {
        img.channel(0).to_vec()
    } else {
        img.to_gray().channel(0).to_vec()
    }
}

/// Mean gray level inside and outside `mask`.
pub fn chan_vese_means(img: &ImageBuffer, mask: &Mask) -> Result<(f64, f64), RegionError> {
    if img.grid() != mask.grid() {
        return Err(GridError::InvalidGrid("image and mask grids differ".into()).into());
    }
    let gray = gray_values(img);
    let (mut s_in, mut n_in, mut s_out, mut n_out) = (0.0, 0usize, 0.0, 0usize);
    for (v, &m) in gray.iter().zip(mask.bits()) {
        if m {
            s_in += v;
            n_in += 1;
        } else {
            s_out += v;
            n_out += 1;
        }
    }
    if n_in == 0 || n_out == 0 {
        return Err(RegionError::DegenerateRegion);
    }
    Ok((s_in / n_in as f64, s_out / n_out as f64))
}

/// `ρ = (I − μ_in)² − (I − μ_out)²` for Chan–Vese, `∓1` for the balloon.
pub fn region_gradient(img: &ImageBuffer, mask: &Mask, kind: RegionKind) -> Result<RegionGradient, RegionError> {
    let grid = img.grid();
    let rho = match kind {
        RegionKind::ChanVese => {
            let (mi, mo) = chan_vese_means(img, mask)?;
            let gray = gray_values(img);
            ScalarField::new(grid, gray.iter().map(|&v| (v - mi).powi(2) - (v - mo).powi(2)).collect())?
        }
        RegionKind::Balloon(BalloonSign::Inflate) => ScalarField::constant(grid, -1.0),
        RegionKind::Balloon(BalloonSign::Deflate) => ScalarField::constant(grid, 1.0),
    };
    Ok(RegionGradient { rho, kind })
}

/// Distance from every node to the nearest segment closer than `r`, and
/// that segment's label (lowest label on ties). Other nodes keep `+∞`.
fn nearest_segments(segs: &[(Point2, Point2, u32)], r: f64, grid: Grid2) -> (Vec<f64>, Vec<u32>) {
    let mut dist = vec![f64::INFINITY; grid.len()];
    let mut label = vec![u32::MAX; grid.len()];
    let (w, h) = (grid.width() as f64, grid.height() as f64);
    for &(a, b, l) in segs {
        let x0 = (a.x.min(b.x) - r).floor().max(0.0) as usize;
        let x1 = (a.x.max(b.x) + r).ceil().min(w - 1.0).max(0.0) as usize;
        let y0 = (a.y.min(b.y) - r).floor().max(0.0) as usize;
        let y1 = (a.y.max(b.y) + r).ceil().min(h - 1.0).max(0.0) as usize;
        for y in y0..=y1 {
            for x in x0..=x1 {
                let i = grid.index(x, y);
                let d = point_segment_distance(Point2::new(x as f64, y as f64), a, b);
                if d < dist[i] || (d == dist[i] && l < label[i]) {
                    dist[i] = d;
                    label[i] = l;
                }
            }
        }
    }
    (dist, label)
}

/// Nodes strictly closer than `r` to the curve.
pub fn tubular_neighborhood(curve: &Polyline, r: f64, grid: Grid2) -> Result<Mask, RegionError> {
    if !(r >= 2.0) || !r.is_finite() {
        return Err(RegionError::InvalidParameter(format!("tube radius must be at least 2, got {r}")));
    }
    let segs: Vec<_> = curve.segments().map(|(a, b)| (a, b, 0)).collect();
    let (dist, _) = nearest_segments(&segs, r, grid);
    Ok(Mask::from_bits(grid, dist.iter().map(|&d| d < r).collect())?)
}

/// Minimal-norm field with prescribed divergence on a masked domain,
/// realized as `ϑ = ∇u`, `Δu = ρ` on the mask, `u = 0` elsewhere.
///
/// Fluxes live on cell faces: `fx[y·(w+1) + x]` joins nodes `x−1` and `x`
/// of row `y` (virtual nodes outside the grid hold `u = 0`), and likewise
/// `fy[(y)·w + x]` joins rows `y−1` and `y`.
#[derive(Debug, Clone, PartialEq)]
pub struct DivergenceField {
    grid: Grid2,
    mask: Mask,
    pub potential: Vec<f64>,
    pub fx: Vec<f64>,
    pub fy: Vec<f64>,
    pub iterations: usize,
    /// Final max-norm residual of the Poisson system.
    pub residual: f64,
}

impl DivergenceField {
    #[must_use]
    pub fn grid(&self) -> Grid2 {
        self.grid
    }

    #[must_use]
    pub fn mask(&self) -> &Mask {
        &self.mask
    }

    /// Discrete divergence of the face fluxes at every node.
    #[must_use]
    pub fn divergence(&self) -> ScalarField {
        let w = self.grid.width();
        ScalarField::from_fn(self.grid, |x, y| {
            self.fx[y * (w + 1) + x + 1] - self.fx[y * (w + 1) + x] + self.fy[(y + 1) * w + x] - self.fy[y * w + x]
        })
        .expect("fluxes are finite")
    }

    /// Node-centered field (face average, i.e. central differences of the
    /// potential); zero outside the mask.
    #[must_use]
    pub fn node_field(&self) -> VectorField2 {
        let w = self.grid.width();
        VectorField2::from_fn(self.grid, |x, y| {
            if !self.mask.at(x, y) {
                return Point2::default();
            }
            Point2::new(
                0.5 * (self.fx[y * (w + 1) + x] + self.fx[y * (w + 1) + x + 1]),
                0.5 * (self.fy[y * w + x] + self.fy[(y + 1) * w + x]),
            )
        })
        .expect("fluxes are finite")
    }
}

const CG_TOLERANCE: f64 = 1e-8;

pub fn solve_divergence_field(rho: &ScalarField, mask: &Mask) -> Result<DivergenceField, RegionError> {
    let grid = rho.grid();
    if mask.grid() != grid {
        return Err(GridError::InvalidGrid("rho and mask grids differ".into()).into());
    }
    let (w, h) = (grid.width(), grid.height());
    let nodes: Vec<usize> = mask.indices().collect();
    if nodes.is_empty() {
        return Err(RegionError::InvalidParameter("empty divergence domain".into()));
    }
    let mut slot = vec![usize::MAX; grid.len()];
    for (k, &i) in nodes.iter().enumerate() {
        slot[i] = k;
    }
    let nbrs: Vec<[usize; 4]> = nodes
        .iter()
        .map(|&i| {
            let (x, y) = grid.coords(i);
            let at = |ok: bool, j: usize| if ok { slot[j] } else { usize::MAX };
            [
                at(x > 0, i.wrapping_sub(1)),
                at(x + 1 < w, i + 1),
                at(y > 0, i.wrapping_sub(w)),
                at(y + 1 < h, i + w),
            ]
        })
        .collect();
    // A = −Δ (SPD with the grounded complement); solve A u = −ρ.
    let apply = |u: &[f64], out: &mut [f64]| {
        for (k, nb) in nbrs.iter().enumerate() {
            let s: f64 = nb.iter().filter(|&&j| j != usize::MAX).map(|&j| u[j]).sum();
            out[k] = 4.0 * u[k] - s;
        }
    };
    let b: Vec<f64> = nodes.iter().map(|&i| -rho.values()[i]).collect();
    let bnorm = b.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let n = nodes.len();
    let mut u = vec![0.0; n];
    let mut iterations = 0;
    let mut residual = bnorm;
    if bnorm > 0.0 {
        let mut r = b.clone();
        let mut z: Vec<f64> = r.iter().map(|v| v / 4.0).collect();
        let mut p = z.clone();
        let mut ap = vec![0.0; n];
        let mut rz: f64 = r.iter().zip(&z).map(|(a, b)| a * b).sum();
        let max_iter = 10 * n;
        loop {
            residual = r.iter().fold(0.0f64, |m, v| m.max(v.abs()));
            if residual <= CG_TOLERANCE * bnorm {
                // Guard against recurrence drift.
                apply(&u, &mut ap);
                residual = ap.iter().zip(&b).fold(0.0f64, |m, (a, b)| m.max((b - a).abs()));
                if residual <= CG_TOLERANCE * bnorm {
                    break;
                }
                r = b.iter().zip(&ap).map(|(b, a)| b - a).collect();
                z = r.iter().map(|v| v / 4.0).collect();
                p.clone_from(&z);
                rz = r.iter().zip(&z).map(|(a, b)| a * b).sum();
            }
            if iterations >= max_iter {
                return Err(RegionError::SolverDiverged { iterations, residual });
            }
            apply(&p, &mut ap);
            let pap: f64 = p.iter().zip(&ap).map(|(a, b)| a * b).sum();
            let alpha = rz / pap;
            for k in 0..n {
                u[k] += alpha * p[k];
                r[k] -= alpha * ap[k];
                z[k] = r[k] / 4.0;
            }
            let rz_new: f64 = r.iter().zip(&z).map(|(a, b)| a * b).sum();
            let beta = rz_new / rz;
            rz = rz_new;
            for k in 0..n {
                p[k] = z[k] + beta * p[k];
            }
            iterations += 1;
        }
    }
    let mut potential = vec![0.0; grid.len()];
    for (k, &i) in nodes.iter().enumerate() {
        potential[i] = u[k];
    }
    let pu = |x: isize, y: isize| {
        if x < 0 || y < 0 || x >= w as isize || y >= h as isize {
            0.0
        } else {
            potential[y as usize * w + x as usize]
        }
    };
    let mut fx = vec![0.0; (w + 1) * h];
    for y in 0..h {
        for x in 0..=w {
            fx[y * (w + 1) + x] = pu(x as isize, y as isize) - pu(x as isize - 1, y as isize);
        }
    }
    let mut fy = vec![0.0; w * (h + 1)];
    for y in 0..=h {
        for x in 0..w {
            fy[y * w + x] = pu(x as isize, y as isize) - pu(x as isize, y as isize - 1);
        }
    }
    Ok(DivergenceField {
        grid,
        mask: mask.clone(),
        potential,
        fx,
        fy,
        iterations,
        residual,
    })
}

/// `ϖ = φ(α̃‖ϑ‖) ϑ/‖ϑ‖`, so `‖ϖ‖ < 1` everywhere.
pub fn remap_field(theta: &VectorField2, alpha_tilde: f64) -> Result<VectorField2, RegionError> {
    if !(alpha_tilde > 0.0) || !alpha_tilde.is_finite() {
        return Err(RegionError::InvalidParameter(format!("alpha_tilde must be positive, got {alpha_tilde}")));
    }
    Ok(theta.map(|v| {
        let n = v.norm();
        if n == 0.0 {
            Point2::default()
        } else {
            v * (saturate(alpha_tilde * n) / n)
        }
    }))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EvolutionParams {
    pub tube_radius: f64,
    /// Region weight; the remap gain is `alpha / median‖ϑ‖` over the tube.
    pub alpha: f64,
    /// Edge contrast of the potential `exp(β(‖g‖∞ − g))`.
    pub beta: f64,
    /// Gaussian scale of the gradient magnitude `g`.
    pub sigma: f64,
    pub max_iters: usize,
    /// Convergence threshold on the Hausdorff step, in pixels.
    pub tolerance: f64,
    pub kind: RegionKind,
    /// Re-place vertices at equal arc-length on each new curve.
    pub resample_vertices: bool,
    pub trace: TraceConfig,
}

impl Default for EvolutionParams {
    fn default() -> Self {
        Self {
            tube_radius: 12.0,
            alpha: 1.0,
            beta: 10.0,
            sigma: 1.0,
            max_iters: 50,
            tolerance: 0.5,
            kind: RegionKind::ChanVese,
            resample_vertices: false,
            trace: TraceConfig::default(),
        }
    }
}

impl EvolutionParams {
    fn validate(&self) -> Result<(), RegionError> {
        let bad = |m: String| Err(RegionError::InvalidParameter(m));
        if !(self.tube_radius >= 2.0) || !self.tube_radius.is_finite() {
            return bad(format!("tube radius must be at least 2, got {}", self.tube_radius));
        }
        if !(self.alpha > 0.0) || !self.alpha.is_finite() {
            return bad(format!("alpha must be positive, got {}", self.alpha));
        }
        if !(self.beta > 0.0) || !self.beta.is_finite() {
            return bad(format!("beta must be positive, got {}", self.beta));
        }
        if !(self.tolerance > 0.0) {
            return bad(format!("tolerance must be positive, got {}", self.tolerance));
        }
        Ok(())
    }
}

/// Per-iteration bookkeeping.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub k: usize,
    /// Hausdorff distance between the previous and the new curve.
    pub hausdorff_step: f64,
    /// Hybrid energy of the new curve (region term with its own means).
    pub energy: f64,
    /// Linearized objective at the previous and the new curve.
    pub surrogate_before: f64,
    pub surrogate_after: f64,
    pub alpha_tilde: f64,
    pub max_varpi: f64,
    pub mu_in: f64,
    pub mu_out: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvolutionState {
    /// Vertices in traversal order (positive shoelace area in pixel coordinates).
    pub vertices: Vec<Point2>,
    pub curve: Polyline,
    /// Index in `curve` of each vertex.
    pub anchors: Vec<usize>,
    pub k: usize,
    pub params: EvolutionParams,
    pub potential: ScalarField,
    pub history: Vec<IterationRecord>,
}

fn hybrid_energy(img: &ImageBuffer, curve: &Polyline, potential: &ScalarField, alpha: f64) -> Result<f64, RegionError> {
    let mask = curve.rasterize_region(img.grid())?;
    let (mi, mo) = chan_vese_means(img, &mask)?;
    let gray = gray_values(img);
    let region: f64 = gray
        .iter()
        .zip(mask.bits())
        .map(|(&v, &m)| if m { (v - mi).powi(2) } else { (v - mo).powi(2) })
        .sum();
    Ok(alpha * region + weighted_length(curve, potential))
}

fn weighted_length(curve: &Polyline, potential: &ScalarField) -> f64 {
    curve
        .segments()
        .map(|(a, b)| potential.sample((a + b) * 0.5) * a.distance(b))
        .sum()
}

fn surrogate(curve: &Polyline, rho: &ScalarField, potential: &ScalarField, alpha: f64) -> Result<f64, RegionError> {
    let mask = curve.rasterize_region(rho.grid())?;
    let flux: f64 = rho.values().iter().zip(mask.bits()).filter(|(_, &m)| m).map(|(v, _)| v).sum();
    Ok(alpha * flux + weighted_length(curve, potential))
}

/// Closed curve resampled at 0.5 px for parameterization-free comparisons.
fn comparable(curve: &Polyline) -> Polyline {
    curve.resample_arclength(0.5).unwrap_or_else(|_| curve.clone())
}

impl EvolutionState {
    /// Initial polygon through `vertices`. The order is reversed (keeping
    /// the first vertex) when the polygon has negative shoelace area.
    pub fn new(img: &ImageBuffer, vertices: &[Point2], params: EvolutionParams) -> Result<Self, RegionError> {
        params.validate()?;
        if vertices.len() < 3 {
            return Err(RegionError::InvalidParameter(format!("need at least 3 vertices, got {}", vertices.len())));
        }
        let grid = img.grid();
        if let Some(v) = vertices.iter().find(|v| !grid.contains(**v)) {
            return Err(RegionError::InvalidParameter(format!("vertex {v:?} lies outside the image")));
        }
        let mut vertices = vertices.to_vec();
        let poly = Polyline::closed(vertices.clone())?;
        if poly.find_self_intersection().is_some() {
            return Err(GridError::InvalidPolyline("vertex polygon self-intersects".into()).into());
        }
        if poly.signed_area() < 0.0 {
            vertices[1..].reverse();
        }
        let curve = Polyline::closed(vertices.clone())?;
        let g = gradient_magnitude(img, params.sigma)?;
        let potential = edge_potential(&g, params.beta, PotentialKind::ExpGap, None)?;
        Ok(Self {
            anchors: (0..vertices.len()).collect(),
            vertices,
            curve,
            k: 1,
            params,
            potential,
            history: Vec::new(),
        })
    }

    /// Sub-path `i` of the current curve, from vertex `i` to its successor.
    #[must_use]
    pub fn subpath(&self, i: usize) -> Vec<Point2> {
        let pts = self.curve.points();
        let n = pts.len();
        let (a, b) = (self.anchors[i], self.anchors[(i + 1) % self.anchors.len()]);
        let end = if b > a { b } else { b + n };
        (a..=end).map(|j| pts[j % n]).collect()
    }

    #[must_use]
    pub fn last_record(&self) -> Option<&IterationRecord> {
        self.history.last()
    }

    #[must_use]
    pub fn converged(&self) -> bool {
        self.last_record().is_some_and(|r| r.hausdorff_step < self.params.tolerance)
    }
}

/// Region-driven metric of the current iterate, with its ingredients.
#[derive(Debug, Clone)]
pub struct StepMetric {
    pub rho: ScalarField,
    pub tube: Mask,
    pub divergence: DivergenceField,
    pub varpi: VectorField2,
    pub alpha_tilde: f64,
    pub metric: Metric2,
    pub means: (f64, f64),
}

pub fn step_metric(state: &EvolutionState, img: &ImageBuffer) -> Result<StepMetric, RegionError> {
    let grid = img.grid();
    let inside = state.curve.rasterize_region(grid)?;
    let means = chan_vese_means(img, &inside).unwrap_or((f64::NAN, f64::NAN));
    let rho = region_gradient(img, &inside, state.params.kind)?.rho;
    let tube = tubular_neighborhood(&state.curve, state.params.tube_radius, grid)?;
    let divergence = solve_divergence_field(&rho, &tube)?;
    let theta = divergence.node_field();
    let mut norms: Vec<f64> = tube.indices().map(|i| theta.at(i).norm()).collect();
    norms.sort_by(f64::total_cmp);
    let median = norms[norms.len() / 2];
    let alpha_tilde = if median > 0.0 { state.params.alpha / median } else { state.params.alpha };
    let varpi = remap_field(&theta, alpha_tilde)?;
    let metric = Metric2::region_randers(&state.potential, &varpi)?;
    Ok(StepMetric {
        rho,
        tube,
        divergence,
        varpi,
        alpha_tilde,
        metric,
        means,
    })
}

/// Voronoi cells of the sub-paths inside the tube; `u32::MAX` elsewhere.
#[must_use]
pub fn subpath_cells(state: &EvolutionState, tube: &Mask) -> Vec<u32> {
    let grid = tube.grid();
    let mut segs = Vec::new();
    for i in 0..state.vertices.len() {
        let sp = state.subpath(i);
        segs.extend(sp.windows(2).map(|w| (w[0], w[1], i as u32)));
    }
    let (_, mut labels) = nearest_segments(&segs, state.params.tube_radius, grid);
    for (l, &t) in labels.iter_mut().zip(tube.bits()) {
        if !t {
            *l = u32::MAX;
        }
    }
    labels
}

fn trace_segment(
    metric: &Metric2,
    cells: &[u32],
    i: usize,
    from: Point2,
    to: Point2,
    cfg: &TraceConfig,
) -> Result<Vec<Point2>, String> {
    let grid = metric.grid();
    let mut domain: Vec<bool> = cells.iter().map(|&l| l == i as u32).collect();
    for p in [from, to] {
        let (nodes, _) = grid.bilinear(p);
        for n in nodes {
            domain[n] = true;
        }
    }
    let req = SolveRequest::from_point(from)
        .with_domain(domain)
        .with_stop(StopRule::FirstReached(vec![to.to_array()]));
    let dmap = eikonal::solve(metric, &req).map_err(|e| e.to_string())?;
    let mut path = geodesic::backtrack(&dmap, metric, to, cfg).map_err(|e| e.to_string())?;
    path.reverse();
    let line = path.polyline().map_err(|e| e.to_string())?;
    let line = line.resample_arclength(0.5).unwrap_or(line);
    Ok(line.points().to_vec())
}

/// One evolution step: every vertex pair is re-joined by the minimal path
/// of the linearized region metric inside its own cell of the tube.
pub fn evolve_step(state: &EvolutionState, img: &ImageBuffer) -> Result<EvolutionState, RegionError> {
    let sm = step_metric(state, img)?;
    let cells = subpath_cells(state, &sm.tube);
    let m = state.vertices.len();
    let mut points: Vec<Point2> = Vec::new();
    let mut anchors = Vec::with_capacity(m);
    for i in 0..m {
        let (a, b) = (state.vertices[i], state.vertices[(i + 1) % m]);
        let seg = trace_segment(&sm.metric, &cells, i, a, b, &state.params.trace)
            .map_err(|reason| RegionError::SegmentTraceFailed { segment: i, reason })?;
        anchors.push(points.len());
        points.extend_from_slice(&seg[..seg.len() - 1]);
    }
    let curve = Polyline::closed(points)?;
    if let Some((first, second)) = curve.find_self_intersection() {
        return Err(GridError::SelfIntersecting { first, second }.into());
    }
    let alpha = state.params.alpha;
    let record = IterationRecord {
        k: state.k,
        hausdorff_step: hausdorff(&comparable(&state.curve), &comparable(&curve)),
        energy: hybrid_energy(img, &curve, &state.potential, alpha)?,
        surrogate_before: surrogate(&state.curve, &sm.rho, &state.potential, alpha)?,
        surrogate_after: surrogate(&curve, &sm.rho, &state.potential, alpha)?,
        alpha_tilde: sm.alpha_tilde,
        max_varpi: sm.varpi.max_norm(),
        mu_in: sm.means.0,
        mu_out: sm.means.1,
    };
    let mut next = EvolutionState {
        vertices: state.vertices.clone(),
        curve,
        anchors,
        k: state.k + 1,
        params: state.params.clone(),
        potential: state.potential.clone(),
        history: state.history.clone(),
    };
    next.history.push(record);
    if state.params.resample_vertices {
        next.resample_vertices()?;
    }
    Ok(next)
}

impl EvolutionState {
    /// Move the vertices to equal arc-length positions, starting at the
    /// first vertex, and split the curve there.
    fn resample_vertices(&mut self) -> Result<(), RegionError> {
        let m = self.vertices.len();
        let pts = self.curve.points().to_vec();
        let n = pts.len();
        let total = self.curve.length();
        let mut out = vec![pts[0]];
        let mut anchors = vec![0];
        let mut acc = 0.0;
        let mut next_mark = 1;
        for j in 0..n {
            let (a, b) = (pts[j], pts[(j + 1) % n]);
            let len = a.distance(b);
            while next_mark < m && acc + len >= total * next_mark as f64 / m as f64 {
                let t = ((total * next_mark as f64 / m as f64 - acc) / len).clamp(0.0, 1.0);
                let q = a + (b - a) * t;
                if out.last().is_some_and(|l: &Point2| l.distance(q) > 1e-9) {
                    out.push(q);
                }
                anchors.push(out.len() - 1);
                next_mark += 1;
            }
            acc += len;
            if j + 1 < n && out.last().is_some_and(|l| l.distance(b) > 1e-9) {
                out.push(b);
            }
        }
        self.vertices = anchors.iter().map(|&i| out[i]).collect();
        self.curve = Polyline::closed(out)?;
        self.anchors = anchors;
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct EvolutionResult {
    pub state: EvolutionState,
    pub converged: bool,
}

/// Iterate until the Hausdorff step falls below the tolerance or
/// `max_iters` steps have run.
pub fn run_evolution(
    vertices: &[Point2],
    img: &ImageBuffer,
    params: EvolutionParams,
) -> Result<EvolutionResult, RegionError> {
    let mut state = EvolutionState::new(img, vertices, params)?;
    while state.history.len() < state.params.max_iters {
        state = evolve_step(&state, img)?;
        if state.converged() {
            return Ok(EvolutionResult { state, converged: true });
        }
    }
    Ok(EvolutionResult { state, converged: false })
}

#[cfg(test)]
mod tests;
