//! Geodesic distance maps by front propagation with semi-Lagrangian
//! Hopf–Lax updates.
//!
//! The same solver handles planar metrics (`D = 2`) and the lifted elastica
//! metric (`D = 3`, periodic in θ). Accepted nodes whose value would still
//! improve are re-inserted into the front a bounded number of times, which
//! repairs causality violations of strongly anisotropic metrics.

mod hopf_lax;
mod lattice;
mod residual;
mod stencil;

use std::cmp::Ordering;
use std::collections::BinaryHeap;

pub use hopf_lax::{simplex_update, SimplexMin};
pub use lattice::Lattice;
pub use residual::{residual, residual_field, Residual};
pub use stencil::{Stencil, StencilKind};

use crate::error::EikonalError;
use crate::grid::{Grid2, LiftedPoint, Mask, Point2};
use crate::metrics::{LiftedMetric3, Metric2, RandersForm};

/// Label stored for nodes no seed has reached.
pub const NO_LABEL: u32 = u32::MAX;

/// Metrics the solver can run on.
pub trait FieldMetric<const D: usize> {
    fn lattice(&self) -> Lattice<D>;
    fn node_form(&self, idx: usize) -> RandersForm<D>;
    /// Form at a physical point.
    fn point_form(&self, p: [f64; D]) -> RandersForm<D>;
    fn is_symmetric(&self) -> bool;
    fn distortion(&self) -> f64;
}

impl FieldMetric<2> for Metric2 {
    fn lattice(&self) -> Lattice<2> {
        Lattice::planar(self.grid())
    }

    fn node_form(&self, idx: usize) -> RandersForm<2> {
        self.form_at_node(idx)
    }

    fn point_form(&self, p: [f64; 2]) -> RandersForm<2> {
        self.form_at(Point2::from(p))
    }

    fn is_symmetric(&self) -> bool {
        Metric2::is_symmetric(self)
    }

    fn distortion(&self) -> f64 {
        self.max_distortion()
    }
}

impl FieldMetric<3> for LiftedMetric3 {
    fn lattice(&self) -> Lattice<3> {
        Lattice::lifted(self.grid())
    }

    fn node_form(&self, idx: usize) -> RandersForm<3> {
        self.form_at_node(idx)
    }

    fn point_form(&self, p: [f64; 3]) -> RandersForm<3> {
        self.form_at(LiftedPoint::from(p))
    }

    fn is_symmetric(&self) -> bool {
        false
    }

    fn distortion(&self) -> f64 {
        self.max_distortion()
    }
}

/// A source point with its Voronoi label.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Seed<const D: usize> {
    pub point: [f64; D],
    pub label: u32,
}

impl<const D: usize> Seed<D> {
    #[must_use]
    pub fn new(point: [f64; D], label: u32) -> Self {
        Self { point, label }
    }
}

/// When to stop propagating.
#[derive(Debug, Clone, PartialEq)]
pub enum StopRule<const D: usize> {
    None,
    /// Stop once every target cell is accepted and the front has moved a
    /// safety margin past them.
    FirstReached(Vec<[f64; D]>),
    /// Do not accept nodes beyond this distance.
    DistanceCap(f64),
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolveRequest<const D: usize> {
    pub seeds: Vec<Seed<D>>,
    pub stop: StopRule<D>,
    pub stencil: StencilKind,
    pub max_reinsertions: u8,
    /// Nodes allowed to receive updates; `None` means all.
    pub domain: Option<Vec<bool>>,
}

pub const DEFAULT_MAX_REINSERTIONS: u8 = 3;

impl<const D: usize> SolveRequest<D> {
    #[must_use]
    pub fn new(seeds: Vec<Seed<D>>) -> Self {
        Self {
            seeds,
            stop: StopRule::None,
            stencil: StencilKind::Auto,
            max_reinsertions: DEFAULT_MAX_REINSERTIONS,
            domain: None,
        }
    }

    #[must_use]
    pub fn single(point: [f64; D]) -> Self {
        Self::new(vec![Seed::new(point, 0)])
    }

    #[must_use]
    pub fn with_stop(mut self, stop: StopRule<D>) -> Self {
        self.stop = stop;
        self
    }

    #[must_use]
    pub fn with_stencil(mut self, stencil: StencilKind) -> Self {
        self.stencil = stencil;
        self
    }

    #[must_use]
    pub fn with_domain(mut self, domain: Vec<bool>) -> Self {
        self.domain = Some(domain);
        self
    }

    #[must_use]
    pub fn with_max_reinsertions(mut self, n: u8) -> Self {
        self.max_reinsertions = n;
        self
    }
}

/// Convenience for planar requests built from image points.
impl SolveRequest<2> {
    #[must_use]
    pub fn from_point(p: Point2) -> Self {
        Self::single(p.to_array())
    }

    #[must_use]
    pub fn with_mask(self, mask: &Mask) -> Self {
        self.with_domain(mask.bits().to_vec())
    }
}

/// The simplex an accepted value was computed from.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Upwind {
    pub nodes: [usize; 3],
    pub weights: [f64; 3],
    pub count: u8,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct SolveStats {
    pub accepted: usize,
    pub reinsertions: usize,
    /// Pops whose value was below the previously popped one.
    pub monotone_violations: usize,
}

/// Geodesic distance from a seed set, with solver bookkeeping.
#[derive(Debug, Clone, PartialEq)]
pub struct DistanceMap<const D: usize> {
    lattice: Lattice<D>,
    values: Vec<f64>,
    accepted: Vec<bool>,
    labels: Vec<u32>,
    parents: Vec<Option<Upwind>>,
    seeds: Vec<Seed<D>>,
    stats: SolveStats,
}

impl<const D: usize> DistanceMap<D> {
    /// Wrap externally computed values; every finite node counts as accepted.
    #[must_use]
    pub fn from_values(lattice: Lattice<D>, values: Vec<f64>, seeds: Vec<Seed<D>>) -> Self {
        assert_eq!(values.len(), lattice.len(), "value count must match the lattice");
        let accepted = values.iter().map(|v| v.is_finite()).collect();
        let n = values.len();
        Self {
            lattice,
            values,
            accepted,
            labels: vec![NO_LABEL; n],
            parents: vec![None; n],
            seeds,
            stats: SolveStats::default(),
        }
    }

    #[must_use]
    pub fn lattice(&self) -> Lattice<D> {
        self.lattice
    }

    #[must_use]
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    #[must_use]
    pub fn value(&self, idx: usize) -> f64 {
        self.values[idx]
    }

    #[must_use]
    pub fn accepted(&self) -> &[bool] {
        &self.accepted
    }

    /// Voronoi label per node; [`NO_LABEL`] where unreached.
    #[must_use]
    pub fn labels(&self) -> &[u32] {
        &self.labels
    }

    #[must_use]
    pub fn label(&self, idx: usize) -> Option<u32> {
        let l = self.labels[idx];
        (l != NO_LABEL).then_some(l)
    }

    #[must_use]
    pub fn parent(&self, idx: usize) -> Option<Upwind> {
        self.parents[idx]
    }

    #[must_use]
    pub fn seeds(&self) -> &[Seed<D>] {
        &self.seeds
    }

    #[must_use]
    pub fn stats(&self) -> SolveStats {
        self.stats
    }

    /// Multilinear interpolation renormalized over the finite corners;
    /// `+∞` when no corner is finite.
    #[must_use]
    pub fn interpolate(&self, p: [f64; D]) -> f64 {
        let mut acc = 0.0;
        let mut wsum = 0.0;
        for (i, w) in self.lattice.corners(p) {
            let v = self.values[i];
            if v.is_finite() && w > 0.0 {
                acc += w * v;
                wsum += w;
            }
        }
        if wsum > 1e-12 {
            acc / wsum
        } else {
            // All weight on infinite corners, or on zero-weight finite ones.
            self.lattice
                .corners(p)
                .iter()
                .filter(|(i, _)| self.values[*i].is_finite())
                .map(|(i, _)| self.values[*i])
                .fold(f64::INFINITY, f64::min)
        }
    }

    /// Distance at an arbitrary point, treating the seed points exactly.
    #[must_use]
    pub fn value_at(&self, p: [f64; D]) -> f64 {
        if self
            .seeds
            .iter()
            .any(|s| self.lattice.delta(s.point, p).iter().all(|d| d.abs() < 1e-12))
        {
            return 0.0;
        }
        self.interpolate(p)
    }
}

impl DistanceMap<2> {
    #[must_use]
    pub fn grid(&self) -> Grid2 {
        Grid2::new(self.lattice.dims[0], self.lattice.dims[1]).expect("solver lattice is valid")
    }
}

/// Voronoi labels of a solved map (lowest label on ties).
#[must_use]
pub fn voronoi_labels<const D: usize>(dmap: &DistanceMap<D>) -> Vec<Option<u32>> {
    (0..dmap.values.len()).map(|i| dmap.label(i)).collect()
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct Entry {
    value: f64,
    node: usize,
}

impl Eq for Entry {}

impl Ord for Entry {
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .value
            .total_cmp(&self.value)
            .then_with(|| other.node.cmp(&self.node))
    }
}

impl PartialOrd for Entry {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Distortion above which [`StencilKind::Auto`] widens the planar ring.
pub const AUTO_WIDEN_DISTORTION: f64 = 2.0;

trait BuildStencil<const D: usize> {
    fn build(wide: bool) -> Stencil<D>;
    fn auto_wide(distortion: f64) -> bool;
}

impl BuildStencil<2> for () {
    fn build(wide: bool) -> Stencil<2> {
        Stencil::ring(wide)
    }

    fn auto_wide(distortion: f64) -> bool {
        distortion > AUTO_WIDEN_DISTORTION
    }
}

impl BuildStencil<3> for () {
    fn build(wide: bool) -> Stencil<3> {
        Stencil::prism(wide)
    }

    fn auto_wide(_: f64) -> bool {
        false
    }
}

/// Solve on the plane.
pub fn solve(metric: &Metric2, req: &SolveRequest<2>) -> Result<DistanceMap<2>, EikonalError> {
    solve_generic::<2, _>(metric, req, &stencil_for::<2>(req.stencil, metric))
}

/// Solve on the orientation-lifted space.
pub fn solve_lifted(metric: &LiftedMetric3, req: &SolveRequest<3>) -> Result<DistanceMap<3>, EikonalError> {
    solve_generic::<3, _>(metric, req, &stencil_for::<3>(req.stencil, metric))
}

fn stencil_for<const D: usize>(kind: StencilKind, metric: &impl FieldMetric<D>) -> Stencil<D>
where
    (): BuildStencil<D>,
{
    let wide = match kind {
        StencilKind::Ring8 => false,
        StencilKind::Ring16 => true,
        StencilKind::Auto => <() as BuildStencil<D>>::auto_wide(metric.distortion()),
    };
    <() as BuildStencil<D>>::build(wide)
}

/// Generic solver over any [`FieldMetric`] and explicit stencil.
pub fn solve_generic<const D: usize, M: FieldMetric<D>>(
    metric: &M,
    req: &SolveRequest<D>,
    stencil: &Stencil<D>,
) -> Result<DistanceMap<D>, EikonalError> {
    if req.seeds.is_empty() {
        return Err(EikonalError::NoSeeds);
    }
    let lat = metric.lattice();
    let n = lat.len();
    if req.domain.as_ref().is_some_and(|d| d.len() != n) {
        return Err(EikonalError::StencilMismatch);
    }
    for s in &req.seeds {
        if !lat.contains(s.point) || s.point.iter().any(|v| !v.is_finite()) {
            return Err(EikonalError::SeedOutsideGrid(s.point.to_vec()));
        }
    }
    let in_domain = |i: usize| req.domain.as_ref().map_or(true, |d| d[i]);

    let mut values = vec![f64::INFINITY; n];
    let mut accepted = vec![false; n];
    let mut labels = vec![NO_LABEL; n];
    let mut parents: Vec<Option<Upwind>> = vec![None; n];
    let mut reinserted = vec![0u8; n];
    let mut is_seed = vec![false; n];
    let mut heap = BinaryHeap::new();
    let mut stats = SolveStats::default();

    for s in &req.seeds {
        if let Some(i) = lat.node_at(s.point, 1e-9) {
            if 0.0 < values[i] || (values[i] == 0.0 && s.label < labels[i]) {
                values[i] = 0.0;
                labels[i] = s.label;
                parents[i] = None;
                is_seed[i] = true;
                heap.push(Entry { value: 0.0, node: i });
            }
            continue;
        }
        for (i, _) in lat.corners(s.point) {
            let d = lat.delta(s.point, lat.position(i));
            let mid: [f64; D] = std::array::from_fn(|a| s.point[a] + 0.5 * d[a]);
            let v = metric.point_form(mid).eval(&d);
            if !v.is_finite() {
                return Err(EikonalError::NonFiniteMetric(i));
            }
            if v < values[i] || (v == values[i] && s.label < labels[i]) {
                values[i] = v;
                labels[i] = s.label;
                parents[i] = None;
                is_seed[i] = true;
                heap.push(Entry { value: v, node: i });
            }
        }
    }

    let target_nodes: Vec<usize> = match &req.stop {
        StopRule::FirstReached(ts) => {
            for t in ts {
                if !lat.contains(*t) {
                    return Err(EikonalError::SeedOutsideGrid(t.to_vec()));
                }
            }
            let mut v: Vec<usize> = ts.iter().flat_map(|t| lat.corners(*t)).map(|(i, _)| i).collect();
            v.sort_unstable();
            v.dedup();
            v
        }
        _ => Vec::new(),
    };
    // Nodes around the targets that later gradient evaluation reads.
    let mut halo: Vec<usize> = target_nodes
        .iter()
        .flat_map(|&t| neighborhood(&lat, t))
        .filter(|&i| in_domain(i) || is_seed[i])
        .collect();
    halo.sort_unstable();
    halo.dedup();
    let mut targets_left = target_nodes.len();
    let mut halo_left = halo.len();
    let mut stop_at = f64::INFINITY;
    let cap = match req.stop {
        StopRule::DistanceCap(c) => c,
        _ => f64::INFINITY,
    };

    let disp: Vec<[f64; D]> = stencil.offsets.iter().map(|&o| lat.displacement(o)).collect();
    const UNSET: usize = usize::MAX - 1;
    let mut around = vec![UNSET; stencil.offsets.len()];
    let mut last_popped = f64::NEG_INFINITY;

    while let Some(Entry { value, node }) = heap.pop() {
        if value > values[node] {
            continue;
        }
        if value > cap || value > stop_at {
            break;
        }
        if value < last_popped {
            stats.monotone_violations += 1;
        }
        last_popped = last_popped.max(value);
        if !accepted[node] {
            accepted[node] = true;
            stats.accepted += 1;
            if halo_left > 0 && halo.binary_search(&node).is_ok() {
                halo_left -= 1;
            }
            if targets_left > 0 && target_nodes.binary_search(&node).is_ok() {
                targets_left -= 1;
                if targets_left == 0 {
                    let reach = target_nodes.iter().map(|&i| values[i]).fold(0.0, f64::max);
                    let margin = target_nodes
                        .iter()
                        .flat_map(|&i| {
                            let f = metric.node_form(i);
                            disp.iter().map(move |d| f.eval(d)).collect::<Vec<_>>()
                        })
                        .fold(0.0, f64::max);
                    stop_at = reach + 2.0 * margin;
                }
            }
        }

        if !target_nodes.is_empty() && targets_left == 0 && halo_left == 0 {
            break;
        }

        // Update every neighbor x for which `node` is a stencil vertex.
        for (j, off) in stencil.offsets.iter().enumerate() {
            let Some(x) = lat.offset(node, off.map(|v| -v)) else {
                continue;
            };
            if is_seed[x] || !in_domain(x) {
                continue;
            }
            if accepted[x] && reinserted[x] >= req.max_reinsertions {
                continue;
            }
            let cx = lat.coords(x);
            let px: [f64; D] = std::array::from_fn(|a| cx[a] as f64 * lat.spacing[a]);
            around.fill(UNSET);
            around[j] = node;
            let form_towards = |c: &[[f64; D]]| {
                let mid: [f64; D] =
                    std::array::from_fn(|a| px[a] + 0.5 * c.iter().map(|v| v[a]).sum::<f64>() / c.len() as f64);
                metric.point_form(mid)
            };
            // Sub-simplices containing `node`, each with the form at its own
            // midpoint; the others were evaluated when their vertices popped.
            let mut best = hopf_lax::simplex_update(&form_towards(&[disp[j]]), &[disp[j]], &[values[node]]);
            let mut best_nodes = [node, 0, 0];
            let mut best_count = 1;
            let neighbor = |v: usize, around: &mut Vec<usize>| {
                if around[v] == UNSET {
                    around[v] = lat.offset_from(cx, stencil.offsets[v]).unwrap_or(usize::MAX);
                }
                let y = around[v];
                (y != usize::MAX && accepted[y]).then_some(y)
            };
            for &v in &stencil.links[j] {
                let Some(y) = neighbor(v, &mut around) else {
                    continue;
                };
                let fd = [disp[j], disp[v]];
                if let Some(r) = hopf_lax::simplex_interior(&form_towards(&fd), &fd, &[values[node], values[y]]) {
                    if r.value < best.value {
                        best = r;
                        best_nodes = [node, y, 0];
                        best_count = 2;
                    }
                }
            }
            if D == 3 {
                for &f in &stencil.faces_of[j] {
                    let face = &stencil.faces[f];
                    let mut fd = [[0.0; D]; 3];
                    let mut fv = [0.0; 3];
                    let mut fnodes = [0usize; 3];
                    let mut complete = true;
                    for (k, &v) in face.iter().enumerate() {
                        let Some(y) = neighbor(v, &mut around) else {
                            complete = false;
                            break;
                        };
                        fd[k] = disp[v];
                        fv[k] = values[y];
                        fnodes[k] = y;
                    }
                    if !complete {
                        continue;
                    }
                    if let Some(r) = hopf_lax::simplex_interior(&form_towards(&fd), &fd, &fv) {
                        if r.value < best.value {
                            best = r;
                            best_nodes = fnodes;
                            best_count = 3;
                        }
                    }
                }
            }
            if !best.value.is_finite() {
                if best.value.is_nan() {
                    return Err(EikonalError::NonFiniteMetric(x));
                }
                continue;
            }
            let dominant = (0..best_count)
                .max_by(|&a, &b| best.weights[a].total_cmp(&best.weights[b]).then(b.cmp(&a)))
                .unwrap_or(0);
            let label = labels[best_nodes[dominant]];
            let old = values[x];
            let tol = if old.is_finite() { 1e-12 * old.abs().max(1.0) } else { 0.0 };
            if best.value < old - tol {
                if accepted[x] {
                    reinserted[x] += 1;
                    stats.reinsertions += 1;
                }
                values[x] = best.value;
                labels[x] = label;
                parents[x] = Some(Upwind {
                    nodes: best_nodes,
                    weights: best.weights,
                    count: best_count as u8,
                });
                heap.push(Entry { value: best.value, node: x });
            } else if best.value <= old + tol && label < labels[x] {
                labels[x] = label;
            }
        }
    }

    // Tentative values beyond the stop threshold are not final.
    for i in 0..n {
        if !accepted[i] {
            values[i] = f64::INFINITY;
            labels[i] = NO_LABEL;
            parents[i] = None;
        }
    }

    Ok(DistanceMap {
        lattice: lat,
        values,
        accepted,
        labels,
        parents,
        seeds: req.seeds.clone(),
        stats,
    })
}

/// Nodes within one lattice step along every axis (including `idx`).
fn neighborhood<const D: usize>(lat: &Lattice<D>, idx: usize) -> Vec<usize> {
    let mut out = Vec::with_capacity(3usize.pow(D as u32));
    for code in 0..3usize.pow(D as u32) {
        let mut off = [0isize; D];
        let mut c = code;
        for o in &mut off {
            *o = (c % 3) as isize - 1;
            c /= 3;
        }
        if let Some(i) = lat.offset(idx, off) {
            out.push(i);
        }
    }
    out
}
