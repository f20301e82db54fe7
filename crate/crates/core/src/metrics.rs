//! Riemannian and Randers metrics on the image plane and on the
//! orientation-lifted space.
//!
//! Every metric is evaluated through a per-point [`RandersForm`]
//! `F(u) = √⟨u, M u⟩ + ⟨ω, u⟩`; isotropic and Riemannian metrics are the
//! `ω = 0` special cases.

use std::f64::consts::PI;

use crate::curve::{LiftedPath, Polyline};
use crate::error::MetricError;
use crate::features::OrientationScore;
use crate::grid::{
    wrap_angle_diff, Grid2, LiftedField, LiftedGrid3, LiftedPoint, Point2, ScalarField, Sym2,
    TensorField2, VectorField2,
};

/// A Randers norm on `ℝ^D`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RandersForm<const D: usize> {
    pub m: [[f64; D]; D],
    pub omega: [f64; D],
}

fn dot<const D: usize>(a: &[f64; D], b: &[f64; D]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

impl<const D: usize> RandersForm<D> {
    #[must_use]
    pub fn riemannian(m: [[f64; D]; D]) -> Self {
        Self { m, omega: [0.0; D] }
    }

    #[must_use]
    pub fn isotropic(cost: f64) -> Self {
        let mut m = [[0.0; D]; D];
        for (i, row) in m.iter_mut().enumerate() {
            row[i] = cost * cost;
        }
        Self::riemannian(m)
    }

    #[must_use]
    pub fn mul(&self, u: &[f64; D]) -> [f64; D] {
        let mut out = [0.0; D];
        for (o, row) in out.iter_mut().zip(&self.m) {
            *o = dot(row, u);
        }
        out
    }

    /// `⟨u, M u⟩`.
    #[must_use]
    pub fn quad(&self, u: &[f64; D]) -> f64 {
        dot(u, &self.mul(u))
    }

    #[must_use]
    pub fn eval(&self, u: &[f64; D]) -> f64 {
        self.quad(u).max(0.0).sqrt() + dot(&self.omega, u)
    }

    /// `M⁻¹ v` by Gaussian elimination with partial pivoting.
    #[must_use]
    pub fn solve(&self, v: &[f64; D]) -> [f64; D] {
        let mut a = self.m;
        let mut b = *v;
        for col in 0..D {
            let piv = (col..D)
                .max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))
                .unwrap_or(col);
            a.swap(col, piv);
            b.swap(col, piv);
            let d = a[col][col];
            for row in col + 1..D {
                let f = a[row][col] / d;
                for k in col..D {
                    a[row][k] -= f * a[col][k];
                }
                b[row] -= f * b[col];
            }
        }
        let mut x = [0.0; D];
        for row in (0..D).rev() {
            let mut s = b[row];
            for k in row + 1..D {
                s -= a[row][k] * x[k];
            }
            x[row] = s / a[row][row];
        }
        x
    }

    /// `⟨v, M⁻¹ v⟩`.
    #[must_use]
    pub fn dual_quad(&self, v: &[f64; D]) -> f64 {
        dot(v, &self.solve(v))
    }

    /// `⟨ω, M⁻¹ ω⟩`; the form is a norm iff this is `< 1`.
    #[must_use]
    pub fn pd_value(&self) -> f64 {
        self.dual_quad(&self.omega)
    }

    /// Dual norm `F*(g) = max_{u ≠ 0} ⟨g, u⟩ / F(u)`.
    ///
    /// `F*(g) = 1` is equivalent to `‖g − ω‖_{M⁻¹} = 1`.
    #[must_use]
    pub fn dual_norm(&self, g: &[f64; D]) -> f64 {
        let a = self.dual_quad(g);
        if a <= 0.0 {
            return 0.0;
        }
        let t = self.dual_scale(g, a);
        1.0 / t
    }

    fn dual_scale(&self, g: &[f64; D], a: f64) -> f64 {
        let mi_g = self.solve(g);
        let b = dot(&self.omega, &mi_g);
        let c = self.pd_value();
        (b + (b * b + a * (1.0 - c)).max(0.0).sqrt()) / a
    }

    /// Unit direction `u` (Euclidean norm 1) maximizing `⟨g, u⟩ / F(u)`,
    /// from the closed-form dual: `u ∝ M⁻¹(t g − ω)` with `‖t g − ω‖_{M⁻¹} = 1`.
    #[must_use]
    pub fn steepest_direction(&self, g: &[f64; D]) -> Option<[f64; D]> {
        let a = self.dual_quad(g);
        if !(a > 0.0) {
            return None;
        }
        let t = self.dual_scale(g, a);
        let mut w = [0.0; D];
        for i in 0..D {
            w[i] = t * g[i] - self.omega[i];
        }
        let u = self.solve(&w);
        let n = dot(&u, &u).sqrt();
        (n > 0.0).then(|| u.map(|v| v / n))
    }

    /// Largest ratio of principal costs, combining anisotropy of `M` and
    /// the forward/backward asymmetry caused by `ω`.
    #[must_use]
    pub fn distortion(&self) -> f64 {
        let tr: f64 = (0..D).map(|i| self.m[i][i]).sum();
        let inv_tr: f64 = (0..D)
            .map(|i| {
                let mut e = [0.0; D];
                e[i] = 1.0;
                self.solve(&e)[i]
            })
            .sum();
        // tr(M) tr(M⁻¹) bounds the condition number from above.
        let aniso = (tr * inv_tr).sqrt();
        let s = self.pd_value().clamp(0.0, 1.0 - 1e-15).sqrt();
        aniso * (1.0 + s) / (1.0 - s)
    }
}

fn sym_to_form(m: Sym2, omega: Point2) -> RandersForm<2> {
    RandersForm {
        m: [[m.m11, m.m12], [m.m12, m.m22]],
        omega: [omega.x, omega.y],
    }
}

/// The three planar metric families.
#[derive(Debug, Clone, PartialEq)]
pub enum MetricKind {
    Isotropic { potential: ScalarField },
    Riemannian { tensors: TensorField2 },
    Randers { tensors: TensorField2, omega: VectorField2 },
}

/// A validated metric on the image plane.
#[derive(Debug, Clone, PartialEq)]
pub struct Metric2 {
    kind: MetricKind,
    pd_max: f64,
}

impl Metric2 {
    pub fn isotropic(potential: ScalarField) -> Result<Self, MetricError> {
        let grid = potential.grid();
        if let Some(i) = potential.values().iter().position(|&p| !(p > 0.0)) {
            return Err(MetricError::InvalidParameter(format!(
                "potential must be positive, node {i} of {}",
                grid.len()
            )));
        }
        Ok(Self {
            kind: MetricKind::Isotropic { potential },
            pd_max: 0.0,
        })
    }

    #[must_use]
    pub fn euclidean(grid: Grid2) -> Self {
        Self::isotropic(ScalarField::constant(grid, 1.0)).expect("unit potential")
    }

    #[must_use]
    pub fn riemannian(tensors: TensorField2) -> Self {
        Self {
            kind: MetricKind::Riemannian { tensors },
            pd_max: 0.0,
        }
    }

    /// Randers metric; rejects fields violating `⟨ω, M⁻¹ω⟩ < 1`.
    pub fn randers(tensors: TensorField2, omega: VectorField2) -> Result<Self, MetricError> {
        if tensors.grid() != omega.grid() {
            return Err(MetricError::InvalidParameter("tensor and drift grids differ".into()));
        }
        let (value, node) = (0..tensors.grid().len())
            .map(|i| (sym_to_form(tensors.at(i), omega.at(i)).pd_value(), i))
            .fold((0.0, 0), |best, cur| if cur.0 > best.0 { cur } else { best });
        if !(value < 1.0) {
            return Err(MetricError::NotPositiveDefinite { node, value });
        }
        Ok(Self {
            kind: MetricKind::Randers { tensors, omega },
            pd_max: value,
        })
    }

    #[must_use]
    pub fn kind(&self) -> &MetricKind {
        &self.kind
    }

    #[must_use]
    pub fn grid(&self) -> Grid2 {
        match &self.kind {
            MetricKind::Isotropic { potential } => potential.grid(),
            MetricKind::Riemannian { tensors } | MetricKind::Randers { tensors, .. } => tensors.grid(),
        }
    }

    #[must_use]
    pub fn is_symmetric(&self) -> bool {
        !matches!(self.kind, MetricKind::Randers { .. })
    }

    /// Maximum of `⟨ω, M⁻¹ω⟩` over the grid (zero for symmetric metrics).
    #[must_use]
    pub fn pd_max(&self) -> f64 {
        self.pd_max
    }

    #[must_use]
    pub fn form_at_node(&self, idx: usize) -> RandersForm<2> {
        match &self.kind {
            MetricKind::Isotropic { potential } => RandersForm::isotropic(potential.values()[idx]),
            MetricKind::Riemannian { tensors } => sym_to_form(tensors.at(idx), Point2::default()),
            MetricKind::Randers { tensors, omega } => sym_to_form(tensors.at(idx), omega.at(idx)),
        }
    }

    /// Form at an arbitrary point, with fields interpolated bilinearly.
    ///
    /// `⟨ω, M⁻¹ω⟩` is jointly convex in `(M, ω)`, so interpolation keeps
    /// the positivity bound of the nodes.
    #[must_use]
    pub fn form_at(&self, p: Point2) -> RandersForm<2> {
        match &self.kind {
            MetricKind::Isotropic { potential } => RandersForm::isotropic(potential.sample(p)),
            MetricKind::Riemannian { tensors } => sym_to_form(tensors.sample(p), Point2::default()),
            MetricKind::Randers { tensors, omega } => sym_to_form(tensors.sample(p), omega.sample(p)),
        }
    }

    #[must_use]
    pub fn eval(&self, p: Point2, u: Point2) -> f64 {
        self.form_at(p).eval(&u.to_array())
    }

    /// Largest [`RandersForm::distortion`] over the nodes.
    #[must_use]
    pub fn max_distortion(&self) -> f64 {
        if let MetricKind::Isotropic { .. } = self.kind {
            return 1.0;
        }
        (0..self.grid().len())
            .map(|i| self.form_at_node(i).distortion())
            .fold(1.0, f64::max)
    }

    /// Alignment metric `‖u‖ − ⟨ξ̃, u⟩`.
    pub fn alignment_randers(xi_tilde: &VectorField2) -> Result<Self, MetricError> {
        let grid = xi_tilde.grid();
        Self::randers(
            TensorField2::constant(grid, Sym2::identity()),
            xi_tilde.map(|v| -v),
        )
    }

    /// Symmetric alignment metric with tensor `Id − ξ̃ξ̃ᵀ`.
    pub fn alignment_riemannian(xi_tilde: &VectorField2) -> Result<Self, MetricError> {
        let grid = xi_tilde.grid();
        let tensors = TensorField2::from_fn(grid, |x, y| {
            let v = xi_tilde.get(x, y);
            Sym2::new(1.0 - v.x * v.x, -v.x * v.y, 1.0 - v.y * v.y)
        })?;
        Ok(Self::riemannian(tensors))
    }

    /// Region metric `P‖u‖ + ⟨𝐌ϖ, u⟩`.
    pub fn region_randers(potential: &ScalarField, varpi: &VectorField2) -> Result<Self, MetricError> {
        let grid = potential.grid();
        if varpi.grid() != grid {
            return Err(MetricError::InvalidParameter("potential and flux grids differ".into()));
        }
        let tensors = TensorField2::from_fn(grid, |x, y| Sym2::scaled_identity(potential.get(x, y).powi(2)))?;
        Self::randers(tensors, varpi.rotate_quarter())
    }

    /// Metric length by the midpoint rule over segments.
    #[must_use]
    pub fn curve_length(&self, curve: &Polyline) -> f64 {
        curve
            .segments()
            .map(|(a, b)| self.eval((a + b) * 0.5, b - a))
            .sum()
    }
}

/// Maximum of `⟨ω, M⁻¹ω⟩` over a planar metric; errors if it reaches 1.
pub fn check_positive_definiteness(metric: &Metric2) -> Result<f64, MetricError> {
    let (value, node) = (0..metric.grid().len())
        .map(|i| (metric.form_at_node(i).pd_value(), i))
        .fold((0.0, 0), |best, cur| if cur.0 > best.0 { cur } else { best });
    if value < 1.0 {
        Ok(value)
    } else {
        Err(MetricError::NotPositiveDefinite { node, value })
    }
}

/// How an orientation score modulates the elastica metric.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub enum DataForm {
    /// Multiplier `exp(−β ψ / ‖ψ‖∞)`.
    #[default]
    Exp,
    /// Multiplier `1 + β ψ / ‖ψ‖∞`.
    Linear,
}

pub const DEFAULT_LAMBDA: f64 = 100.0;
pub const DEFAULT_ALPHA: f64 = 1.0;

/// Relaxed elastica metric on `Ω × 𝕊¹`:
/// `c(x̂) · (√(λ²‖u‖² + 2αλν²) − (λ−1)⟨u, p_θ⟩)`.
#[derive(Debug, Clone, PartialEq)]
pub struct LiftedMetric3 {
    grid: LiftedGrid3,
    lambda: f64,
    alpha: f64,
    cost: Option<LiftedField>,
}

impl LiftedMetric3 {
    pub fn new(grid: LiftedGrid3, lambda: f64, alpha: f64) -> Result<Self, MetricError> {
        if !(lambda >= 1.0) || !lambda.is_finite() {
            return Err(MetricError::InvalidParameter(format!("lambda must be >= 1, got {lambda}")));
        }
        if !(alpha > 0.0) || !alpha.is_finite() {
            return Err(MetricError::InvalidParameter(format!("alpha must be positive, got {alpha}")));
        }
        Ok(Self {
            grid,
            lambda,
            alpha,
            cost: None,
        })
    }

    /// Multiply by a positive per-node cost.
    pub fn with_cost(mut self, cost: LiftedField) -> Result<Self, MetricError> {
        if cost.grid() != self.grid {
            return Err(MetricError::InvalidParameter("cost grid differs from metric grid".into()));
        }
        if let Some(i) = cost.values().iter().position(|&c| !(c > 0.0)) {
            return Err(MetricError::InvalidParameter(format!("cost must be positive at node {i}")));
        }
        self.cost = Some(cost);
        Ok(self)
    }

    /// Data-driven cost from an orientation score.
    pub fn with_score(self, score: &OrientationScore, beta: f64, form: DataForm) -> Result<Self, MetricError> {
        if !(beta > 0.0) {
            return Err(MetricError::InvalidParameter(format!("beta must be positive, got {beta}")));
        }
        let field = score.field();
        let max = field.max();
        let scale = if max > 0.0 { beta / max } else { 0.0 };
        let values = field
            .values()
            .iter()
            .map(|&psi| match form {
                DataForm::Exp => (-scale * psi).exp(),
                DataForm::Linear => 1.0 + scale * psi,
            })
            .collect();
        let cost = LiftedField::new(field.grid(), values)?;
        self.with_cost(cost)
    }

    #[must_use]
    pub fn grid(&self) -> LiftedGrid3 {
        self.grid
    }

    #[must_use]
    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    #[must_use]
    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    #[must_use]
    pub fn cost(&self) -> Option<&LiftedField> {
        self.cost.as_ref()
    }

    /// `(1 − 1/λ)²`, independent of position and cost.
    #[must_use]
    pub fn pd_max(&self) -> f64 {
        (1.0 - 1.0 / self.lambda).powi(2)
    }

    fn form(&self, c: f64, theta: f64) -> RandersForm<3> {
        let l = self.lambda;
        let c2 = c * c;
        let (s, co) = theta.sin_cos();
        RandersForm {
            m: [
                [c2 * l * l, 0.0, 0.0],
                [0.0, c2 * l * l, 0.0],
                [0.0, 0.0, c2 * 2.0 * self.alpha * l],
            ],
            omega: [-c * (l - 1.0) * co, -c * (l - 1.0) * s, 0.0],
        }
    }

    #[must_use]
    pub fn form_at_node(&self, idx: usize) -> RandersForm<3> {
        let (_, _, k) = self.grid.coords(idx);
        let c = self.cost.as_ref().map_or(1.0, |f| f.values()[idx]);
        self.form(c, self.grid.theta(k))
    }

    #[must_use]
    pub fn form_at(&self, p: LiftedPoint) -> RandersForm<3> {
        let c = self.cost.as_ref().map_or(1.0, |f| f.sample(p));
        self.form(c, p.theta)
    }

    /// Evaluate at `p` on the lifted direction `(u, ν)`.
    #[must_use]
    pub fn eval(&self, p: LiftedPoint, u: Point2, nu: f64) -> f64 {
        self.form_at(p).eval(&[u.x, u.y, nu])
    }

    #[must_use]
    pub fn max_distortion(&self) -> f64 {
        self.form(1.0, 0.0).distortion()
    }

    /// Midpoint-rule length of a lifted path, with θ increments wrapped.
    #[must_use]
    pub fn path_length(&self, path: &LiftedPath) -> f64 {
        path.points()
            .windows(2)
            .map(|w| {
                let dth = wrap_angle_diff(w[1].theta - w[0].theta);
                let mid = LiftedPoint::new(
                    0.5 * (w[0].x + w[1].x),
                    0.5 * (w[0].y + w[1].y),
                    w[0].theta + 0.5 * dth,
                );
                self.eval(mid, w[1].position() - w[0].position(), dth)
            })
            .sum()
    }
}

/// The `λ → ∞` limit `‖u‖ + αν²/‖u‖` for `u` positively collinear with
/// `p_θ`, `+∞` otherwise. `angle_tol` is the accepted angle between `u`
/// and `p_θ`.
#[must_use]
pub fn elastica_limit(theta: f64, u: Point2, nu: f64, alpha: f64, angle_tol: f64) -> f64 {
    let n = u.norm();
    if n == 0.0 {
        return if nu == 0.0 { 0.0 } else { f64::INFINITY };
    }
    let p = Point2::from_angle(theta);
    let along = u.dot(p);
    let across = u.cross(p).abs();
    if along > 0.0 && across <= angle_tol.sin() * n {
        n + alpha * nu * nu / n
    } else {
        f64::INFINITY
    }
}

/// Length of a lifted path under the limit form, with θ taken at segment
/// midpoints.
#[must_use]
pub fn elastica_limit_length(path: &LiftedPath, alpha: f64, angle_tol: f64) -> f64 {
    path.points()
        .windows(2)
        .map(|w| {
            let dth = wrap_angle_diff(w[1].theta - w[0].theta);
            elastica_limit(w[0].theta + 0.5 * dth, w[1].position() - w[0].position(), dth, alpha, angle_tol)
        })
        .sum()
}

/// Coefficients `(a, b, c)` such that the unit ball of the relaxed
/// elastica form at unit cost is exactly
/// `½λ μ₂² + a (μ₁ − b/2)² + α ν² ≤ c/4`, where `μ₁ = ⟨u, p_θ⟩` and
/// `μ₂ = ⟨u, p_θ^⊥⟩`. All three tend to 1 as `λ → ∞`.
#[must_use]
pub fn unit_ball_coefficients(lambda: f64) -> (f64, f64, f64) {
    let d = 2.0 * lambda - 1.0;
    (d / (2.0 * lambda), 2.0 * (lambda - 1.0) / d, 2.0 * lambda / d)
}

/// Angle sample used by the direction searches: `2πi/n`.
#[must_use]
pub fn sample_angle(i: usize, n: usize) -> f64 {
    2.0 * PI * i as f64 / n as f64
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn grid() -> Grid2 {
        Grid2::new(4, 4).unwrap()
    }

    fn const_randers(m: Sym2, w: Point2) -> Result<Metric2, MetricError> {
        let g = grid();
        Metric2::randers(
            TensorField2::constant(g, m),
            VectorField2::from_fn(g, |_, _| w).unwrap(),
        )
    }

    fn origin() -> Point2 {
        Point2::new(1.5, 1.5)
    }

    #[test]
    fn planar_examples() {
        let iso = Metric2::euclidean(grid());
        assert_eq!(iso.eval(origin(), Point2::new(0.6, 0.8)), 1.0);

        let r = const_randers(Sym2::identity(), Point2::new(0.5, 0.0)).unwrap();
        assert!((r.eval(origin(), Point2::new(1.0, 0.0)) - 1.5).abs() < 1e-15);
        assert!((r.eval(origin(), Point2::new(-1.0, 0.0)) - 0.5).abs() < 1e-15);

        let riem = Metric2::riemannian(TensorField2::constant(grid(), Sym2::new(4.0, 0.0, 1.0)));
        assert_eq!(riem.eval(origin(), Point2::new(1.0, 0.0)), 2.0);
    }

    #[test]
    fn positive_definiteness() {
        assert_eq!(check_positive_definiteness(&Metric2::euclidean(grid())).unwrap(), 0.0);
        let err = const_randers(Sym2::identity(), Point2::new(0.8, 0.6)).unwrap_err();
        assert!(matches!(err, MetricError::NotPositiveDefinite { value, .. } if (value - 1.0).abs() < 1e-12));
        let ok = const_randers(Sym2::new(4.0, 0.0, 1.0), Point2::new(1.0, 0.5)).unwrap();
        assert!((check_positive_definiteness(&ok).unwrap() - 0.5).abs() < 1e-12);
        assert!((ok.pd_max() - 0.5).abs() < 1e-12);
    }

    #[test]
    fn alignment_metrics() {
        let g = grid();
        let dir = Point2::new(0.6, 0.8);
        let xi = VectorField2::from_fn(g, |_, _| dir * 0.6).unwrap();
        let a = Metric2::alignment_randers(&xi).unwrap();
        assert!((a.eval(origin(), dir) - 0.4).abs() < 1e-12);
        assert!((a.eval(origin(), -dir) - 1.6).abs() < 1e-12);
        assert!(Metric2::alignment_randers(&VectorField2::zeros(g)).unwrap().eval(origin(), dir) == 1.0);

        let xi = VectorField2::from_fn(g, |_, _| dir * 0.8).unwrap();
        let r = Metric2::alignment_riemannian(&xi).unwrap();
        assert!((r.eval(origin(), dir) - 0.6).abs() < 1e-12);
        assert!((r.eval(origin(), dir.rotate_quarter()) - 1.0).abs() < 1e-12);
        assert!((r.eval(origin(), -dir) - 0.6).abs() < 1e-12);

        let bad = VectorField2::from_fn(g, |_, _| Point2::new(2.0, 0.0)).unwrap();
        assert!(Metric2::alignment_randers(&bad).is_err());
    }

    #[test]
    fn region_metric() {
        let g = grid();
        let p = ScalarField::constant(g, 1.0);
        let zero = Metric2::region_randers(&p, &VectorField2::zeros(g)).unwrap();
        assert_eq!(zero.eval(origin(), Point2::new(0.0, 2.0)), 2.0);
        let varpi = VectorField2::from_fn(g, |_, _| Point2::new(0.5, 0.0)).unwrap();
        let m = Metric2::region_randers(&p, &varpi).unwrap();
        // 𝐌ϖ = (0, 0.5).
        assert!((m.eval(origin(), Point2::new(0.0, 1.0)) - 1.5).abs() < 1e-12);
        assert!((m.eval(origin(), Point2::new(0.0, -1.0)) - 0.5).abs() < 1e-12);
        assert!((m.eval(origin(), Point2::new(1.0, 0.0)) - 1.0).abs() < 1e-12);
        let rotated = Metric2::region_randers(&p, &varpi.rotate_quarter()).unwrap();
        assert!((rotated.eval(origin(), Point2::new(-1.0, 0.0)) - 1.5).abs() < 1e-12);
        let big = VectorField2::from_fn(g, |_, _| Point2::new(1.0, 0.0)).unwrap();
        assert!(Metric2::region_randers(&p, &big).is_err());
    }

    #[test]
    fn lengths() {
        let g = Grid2::new(20, 20).unwrap();
        let e = Metric2::euclidean(g);
        let seg = Polyline::open(vec![Point2::new(1.0, 1.0), Point2::new(4.0, 5.0)]).unwrap();
        assert!((e.curve_length(&seg) - 5.0).abs() < 1e-12);

        let w = Point2::new(0.3, -0.2);
        let fwd = Metric2::randers(
            TensorField2::constant(g, Sym2::identity()),
            VectorField2::from_fn(g, |_, _| w).unwrap(),
        )
        .unwrap();
        let bwd = Metric2::randers(
            TensorField2::constant(g, Sym2::identity()),
            VectorField2::from_fn(g, |_, _| -w).unwrap(),
        )
        .unwrap();
        let c = Polyline::open(vec![
            Point2::new(2.0, 3.0),
            Point2::new(7.0, 4.0),
            Point2::new(9.0, 12.0),
        ])
        .unwrap();
        assert!((fwd.curve_length(&c) - bwd.curve_length(&c.reversed())).abs() < 1e-12);
        let mut sub = Vec::new();
        for (a, b) in c.segments() {
            for k in 0..7 {
                sub.push(a + (b - a) * (k as f64 / 7.0));
            }
        }
        sub.push(c.last());
        let fine = Polyline::open(sub).unwrap();
        assert!((fwd.curve_length(&c) - fwd.curve_length(&fine)).abs() < 1e-9);
    }

    fn lifted(lambda: f64, alpha: f64) -> LiftedMetric3 {
        LiftedMetric3::new(LiftedGrid3::new(grid(), 16).unwrap(), lambda, alpha).unwrap()
    }

    #[test]
    fn lifted_examples() {
        for lambda in [1.0, 10.0, 100.0, 1e4] {
            for theta in [0.0, 0.7, 3.0] {
                let m = lifted(lambda, 1.0);
                let p = LiftedPoint::new(1.0, 1.0, theta);
                let dir = Point2::from_angle(theta);
                assert!((m.eval(p, dir, 0.0) - 1.0).abs() < 1e-9 * lambda);
                assert!((m.eval(p, -dir, 0.0) - (2.0 * lambda - 1.0)).abs() < 1e-9 * lambda);
            }
        }
        let m = lifted(1000.0, 1.0);
        let v = m.eval(LiftedPoint::new(1.0, 1.0, 0.0), Point2::new(1.0, 0.0), 0.1);
        assert!((v - 1.01).abs() < 1e-3);
        assert!((lifted(100.0, 1.0).pd_max() - 0.9801).abs() < 1e-15);
        let f = lifted(100.0, 2.0).form_at_node(37);
        assert!((f.pd_value() - 0.9801).abs() < 1e-12);
    }

    #[test]
    fn lifted_data_cost() {
        let lg = LiftedGrid3::new(grid(), 8).unwrap();
        let mut vals = vec![0.0; lg.len()];
        vals[lg.index(1, 1, 0)] = 2.0;
        let score = OrientationScore::new(LiftedField::new(lg, vals).unwrap()).unwrap();
        let base = LiftedMetric3::new(lg, 100.0, 1.0).unwrap();
        let e = base.clone().with_score(&score, 1.0, DataForm::Exp).unwrap();
        let l = base.with_score(&score, 1.0, DataForm::Linear).unwrap();
        let p = LiftedPoint::new(1.0, 1.0, 0.0);
        let u = Point2::new(1.0, 0.0);
        assert!((e.eval(p, u, 0.0) - (-1.0f64).exp()).abs() < 1e-12);
        assert!((l.eval(p, u, 0.0) - 2.0).abs() < 1e-12);
        assert!((e.eval(LiftedPoint::new(2.0, 1.0, 0.0), u, 0.0) - 1.0).abs() < 1e-12);
        assert!((e.form_at_node(lg.index(1, 1, 0)).pd_value() - 0.9801).abs() < 1e-12);
    }

    #[test]
    fn limit_form_on_circle() {
        let alpha = 1.0;
        for r in [5.0, 10.0, 20.0] {
            let n = 4000;
            let pts: Vec<LiftedPoint> = (0..=n)
                .map(|i| {
                    let t = 2.0 * PI * i as f64 / n as f64;
                    // Tangent of a counterclockwise circle (y down) at angle t.
                    LiftedPoint::new(r * t.cos(), r * t.sin(), t + PI / 2.0)
                })
                .collect();
            let path = LiftedPath::new(pts).unwrap();
            let len = elastica_limit_length(&path, alpha, 1e-6);
            let exact = 2.0 * PI * r * (1.0 + alpha / (r * r));
            assert!((len - exact).abs() < 1e-3 * exact, "{len} vs {exact}");
        }
        assert!(elastica_limit(0.0, Point2::new(0.0, 1.0), 0.0, 1.0, 1e-9).is_infinite());
        assert!(elastica_limit(0.0, Point2::new(-1.0, 0.0), 0.0, 1.0, 1e-9).is_infinite());
    }

    #[test]
    fn steepest_direction_matches_search() {
        let f = RandersForm::<2> {
            m: [[3.0, 0.5], [0.5, 1.0]],
            omega: [0.4, -0.3],
        };
        assert!(f.pd_value() < 1.0);
        let g = [0.7, -1.3];
        let u = f.steepest_direction(&g).unwrap();
        let ratio = |u: &[f64; 2]| dot(&g, u) / f.eval(u);
        let best = (0..100_000)
            .map(|i| {
                let t = sample_angle(i, 100_000);
                ratio(&[t.cos(), t.sin()])
            })
            .fold(f64::NEG_INFINITY, f64::max);
        assert!((ratio(&u) - best).abs() < 1e-8);
        assert!((f.dual_norm(&g) - best).abs() < 1e-8);
        // g at unit dual norm satisfies the eikonal identity.
        let gn = g.map(|v| v / best);
        let diff = [gn[0] - f.omega[0], gn[1] - f.omega[1]];
        assert!((f.dual_quad(&diff) - 1.0).abs() < 1e-6);
    }

    fn unit(theta: f64) -> Point2 {
        Point2::from_angle(theta)
    }

    proptest! {
        #[test]
        fn homogeneity_and_triangle(
            a in 0.2f64..5.0, b in -0.9f64..0.9, c in 0.2f64..5.0,
            wr in 0.0f64..0.95, wt in 0.0f64..6.3,
            ut in 0.0f64..6.3, un in 0.01f64..10.0,
            vt in 0.0f64..6.3, vn in 0.01f64..10.0,
            s in 0.01f64..100.0,
        ) {
            let m = Sym2::new(a, b * (a * c).sqrt(), c);
            let f = RandersForm::<2> { m: [[m.m11, m.m12], [m.m12, m.m22]], omega: [0.0; 2] };
            // Scale ω to the requested fraction of the admissible bound.
            let dir = unit(wt).to_array();
            let k = wr / f.dual_quad(&dir).sqrt();
            let f = RandersForm::<2> { omega: dir.map(|d| d * k), ..f };
            prop_assert!(f.pd_value() < 1.0);
            let u = (unit(ut) * un).to_array();
            let v = (unit(vt) * vn).to_array();
            let su = u.map(|x| x * s);
            let fu = f.eval(&u);
            prop_assert!(fu > 0.0);
            prop_assert!((f.eval(&su) - s * fu).abs() <= 1e-12 * s * fu.max(1.0));
            let uv = [u[0] + v[0], u[1] + v[1]];
            prop_assert!(f.eval(&uv) <= fu + f.eval(&v) + 1e-12 * (un + vn));
            let neg = u.map(|x| -x);
            prop_assert!((fu + f.eval(&neg) - 2.0 * f.quad(&u).sqrt()).abs() <= 1e-12 * un.max(1.0) * 10.0);
        }

        #[test]
        fn lifted_homogeneity_and_triangle(
            theta in 0.0f64..6.3, lambda in 1.0f64..1000.0, alpha in 0.1f64..5.0,
            u in prop::array::uniform3(-3.0f64..3.0), v in prop::array::uniform3(-3.0f64..3.0),
            s in 0.01f64..100.0,
        ) {
            let f = lifted(lambda, alpha).form_at(LiftedPoint::new(1.0, 1.0, theta));
            let fu = f.eval(&u);
            let scale = lambda * 10.0;
            prop_assert!(fu >= 0.0);
            prop_assert!((f.eval(&u.map(|x| x * s)) - s * fu).abs() <= 1e-12 * scale * s);
            let uv = [u[0] + v[0], u[1] + v[1], u[2] + v[2]];
            prop_assert!(f.eval(&uv) <= fu + f.eval(&v) + 1e-10 * scale);
        }

        #[test]
        fn unit_ball_is_exact_ellipsoid(
            theta in 0.0f64..6.3, lambda in 1.5f64..2000.0, alpha in 0.1f64..4.0,
            m1 in -0.2f64..1.2, m2 in -0.05f64..0.05, nu in -0.6f64..0.6,
        ) {
            let m = lifted(lambda, alpha);
            let p = Point2::from_angle(theta);
            let u = p * m1 + p.rotate_quarter() * m2;
            let f = m.eval(LiftedPoint::new(1.0, 1.0, theta), u, nu);
            let (a, b, c) = unit_ball_coefficients(lambda);
            let lhs = 0.5 * lambda * m2 * m2 + a * (m1 - b / 2.0).powi(2) + alpha * nu * nu;
            // Skip the boundary layer where rounding decides membership.
            let margin = 1e-9 * lambda;
            if (f - 1.0).abs() > margin && (lhs - c / 4.0).abs() > margin {
                prop_assert_eq!(f <= 1.0, lhs <= c / 4.0);
            }
        }
    }
}
