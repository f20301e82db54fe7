//! Grid geometry and sampled fields.
//!
//! Nodes sit at integer coordinates: node `(i, j)` is the center of pixel
//! column `i`, row `j`, with `x` growing rightward and `y` growing downward.
//! Spatial spacing is one pixel on both axes. The orientation axis of a
//! [`LiftedGrid3`] is periodic and measured in radians.

use std::f64::consts::TAU;
use std::ops::{Add, Mul, Neg, Sub};

use serde::{Deserialize, Serialize};

use crate::error::GridError;

/// A point (or vector) in image coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Point2 {
    pub x: f64,
    pub y: f64,
}

impl Point2 {
    #[must_use]
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    #[must_use]
    pub fn dot(self, other: Self) -> f64 {
        self.x * other.x + self.y * other.y
    }

    /// z-component of the 3D cross product.
    #[must_use]
    pub fn cross(self, other: Self) -> f64 {
        self.x * other.y - self.y * other.x
    }

    #[must_use]
    pub fn norm(self) -> f64 {
        self.x.hypot(self.y)
    }

    #[must_use]
    pub fn distance(self, other: Self) -> f64 {
        (self - other).norm()
    }

    /// Counterclockwise quarter turn: `(a, b) -> (-b, a)`.
    #[must_use]
    pub fn rotate_quarter(self) -> Self {
        Self::new(-self.y, self.x)
    }

    #[must_use]
    pub fn angle(self) -> f64 {
        self.y.atan2(self.x)
    }

    #[must_use]
    pub fn from_angle(theta: f64) -> Self {
        Self::new(theta.cos(), theta.sin())
    }

    #[must_use]
    pub fn to_array(self) -> [f64; 2] {
        [self.x, self.y]
    }

    #[must_use]
    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }
}

impl From<[f64; 2]> for Point2 {
    fn from(a: [f64; 2]) -> Self {
        Self::new(a[0], a[1])
    }
}

impl Add for Point2 {
    type Output = Self;
    fn add(self, rhs: Self) -> Self {
        Self::new(self.x + rhs.x, self.y + rhs.y)
    }
}

impl Sub for Point2 {
    type Output = Self;
    fn sub(self, rhs: Self) -> Self {
        Self::new(self.x - rhs.x, self.y - rhs.y)
    }
}

impl Mul<f64> for Point2 {
    type Output = Self;
    fn mul(self, rhs: f64) -> Self {
        Self::new(self.x * rhs, self.y * rhs)
    }
}

impl Neg for Point2 {
    type Output = Self;
    fn neg(self) -> Self {
        Self::new(-self.x, -self.y)
    }
}

/// A point of the orientation-lifted domain: position plus tangent angle.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct LiftedPoint {
    pub x: f64,
    pub y: f64,
    pub theta: f64,
}

impl LiftedPoint {
    #[must_use]
    pub const fn new(x: f64, y: f64, theta: f64) -> Self {
        Self { x, y, theta }
    }

    #[must_use]
    pub fn position(self) -> Point2 {
        Point2::new(self.x, self.y)
    }

    #[must_use]
    pub fn to_array(self) -> [f64; 3] {
        [self.x, self.y, self.theta]
    }
}

impl From<[f64; 3]> for LiftedPoint {
    fn from(a: [f64; 3]) -> Self {
        Self::new(a[0], a[1], a[2])
    }
}

/// Wrap an angle into `[0, 2π)`.
#[must_use]
pub fn wrap_angle(theta: f64) -> f64 {
    let w = theta.rem_euclid(TAU);
    if w >= TAU {
        0.0
    } else {
        w
    }
}

/// Wrap an angle difference into `(-π, π]`.
#[must_use]
pub fn wrap_angle_diff(d: f64) -> f64 {
    let w = (d + std::f64::consts::PI).rem_euclid(TAU) - std::f64::consts::PI;
    if w <= -std::f64::consts::PI {
        w + TAU
    } else {
        w
    }
}

/// Rectangular pixel grid.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Grid2 {
    width: usize,
    height: usize,
}

impl Grid2 {
    pub fn new(width: usize, height: usize) -> Result<Self, GridError> {
        if width < 2 || height < 2 {
            return Err(GridError::InvalidGrid(format!(
                "grid must be at least 2x2, got {width}x{height}"
            )));
        }
        Ok(Self { width, height })
    }

    #[must_use]
    pub const fn width(&self) -> usize {
        self.width
    }

    #[must_use]
    pub const fn height(&self) -> usize {
        self.height
    }

    /// Spatial spacing in pixels; always one.
    #[must_use]
    pub const fn spacing(&self) -> f64 {
        1.0
    }

    #[must_use]
    pub const fn len(&self) -> usize {
        self.width * self.height
    }

    #[must_use]
    pub const fn is_empty(&self) -> bool {
        self.len() == 0
    }

    #[must_use]
    pub const fn index(&self, x: usize, y: usize) -> usize {
        y * self.width + x
    }

    #[must_use]
    pub const fn coords(&self, idx: usize) -> (usize, usize) {
        (idx % self.width, idx / self.width)
    }

    #[must_use]
    pub fn node_point(&self, idx: usize) -> Point2 {
        let (x, y) = self.coords(idx);
        Point2::new(x as f64, y as f64)
    }

    /// True when `p` lies in the closed rectangle spanned by the nodes.
    #[must_use]
    pub fn contains(&self, p: Point2) -> bool {
        p.x >= 0.0 && p.y >= 0.0 && p.x <= (self.width - 1) as f64 && p.y <= (self.height - 1) as f64
    }

    #[must_use]
    pub fn clamp(&self, p: Point2) -> Point2 {
        Point2::new(
            p.x.clamp(0.0, (self.width - 1) as f64),
            p.y.clamp(0.0, (self.height - 1) as f64),
        )
    }

    /// Corner nodes and weights of the bilinear stencil at `p` (clamped).
    #[must_use]
    pub fn bilinear(&self, p: Point2) -> ([usize; 4], [f64; 4]) {
        let p = self.clamp(p);
        let x0 = (p.x.floor() as usize).min(self.width - 2);
        let y0 = (p.y.floor() as usize).min(self.height - 2);
        let tx = p.x - x0 as f64;
        let ty = p.y - y0 as f64;
        let i00 = self.index(x0, y0);
        (
            [i00, i00 + 1, i00 + self.width, i00 + self.width + 1],
            [
                (1.0 - tx) * (1.0 - ty),
                tx * (1.0 - ty),
                (1.0 - tx) * ty,
                tx * ty,
            ],
        )
    }
}

/// Orientation-lifted grid `Ω × S¹` with a periodic angle axis.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct LiftedGrid3 {
    base: Grid2,
    n_theta: usize,
}

impl LiftedGrid3 {
    pub fn new(base: Grid2, n_theta: usize) -> Result<Self, GridError> {
        if n_theta < 8 {
            return Err(GridError::InvalidGrid(format!(
                "orientation axis needs at least 8 samples, got {n_theta}"
            )));
        }
        Ok(Self { base, n_theta })
    }

    #[must_use]
    pub const fn base(&self) -> Grid2 {
        self.base
    }

    #[must_use]
    pub const fn n_theta(&self) -> usize {
        self.n_theta
    }

    #[must_use]
    pub fn theta_spacing(&self) -> f64 {
        TAU / self.n_theta as f64
    }

    #[must_use]
    pub fn theta(&self, k: usize) -> f64 {
        k as f64 * self.theta_spacing()
    }

    #[must_use]
    pub const fn len(&self) -> usize {
        self.base.len() * self.n_theta
    }

    #[must_use]
    pub const fn is_empty(&self) -> bool {
        self.len() == 0
    }

    #[must_use]
    pub const fn index(&self, x: usize, y: usize, k: usize) -> usize {
        (k * self.base.height() + y) * self.base.width() + x
    }

    #[must_use]
    pub const fn coords(&self, idx: usize) -> (usize, usize, usize) {
        let plane = self.base.len();
        let k = idx / plane;
        let (x, y) = self.base.coords(idx % plane);
        (x, y, k)
    }

    /// Corner nodes and weights of the trilinear stencil, periodic in θ.
    #[must_use]
    pub fn trilinear(&self, p: LiftedPoint) -> ([usize; 8], [f64; 8]) {
        let (c2, w2) = self.base.bilinear(p.position());
        let s = wrap_angle(p.theta) / self.theta_spacing();
        let k0 = (s.floor() as usize) % self.n_theta;
        let k1 = (k0 + 1) % self.n_theta;
        let tk = s - s.floor();
        let plane = self.base.len();
        let mut nodes = [0usize; 8];
        let mut weights = [0.0; 8];
        for c in 0..4 {
            nodes[c] = c2[c] + k0 * plane;
            weights[c] = w2[c] * (1.0 - tk);
            nodes[c + 4] = c2[c] + k1 * plane;
            weights[c + 4] = w2[c] * tk;
        }
        (nodes, weights)
    }
}

fn check_len(expected: usize, got: usize) -> Result<(), GridError> {
    if expected != got {
        return Err(GridError::SizeMismatch { expected, got });
    }
    Ok(())
}

/// Real value per node of a [`Grid2`].
#[derive(Debug, Clone, PartialEq)]
pub struct ScalarField {
    grid: Grid2,
    values: Vec<f64>,
}

impl ScalarField {
    pub fn new(grid: Grid2, values: Vec<f64>) -> Result<Self, GridError> {
        check_len(grid.len(), values.len())?;
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(GridError::NonFinite(i));
        }
        Ok(Self { grid, values })
    }

    #[must_use]
    pub fn constant(grid: Grid2, c: f64) -> Self {
        Self {
            grid,
            values: vec![c; grid.len()],
        }
    }

    pub fn from_fn(grid: Grid2, mut f: impl FnMut(usize, usize) -> f64) -> Result<Self, GridError> {
        let mut values = Vec::with_capacity(grid.len());
        for y in 0..grid.height() {
            for x in 0..grid.width() {
                values.push(f(x, y));
            }
        }
        Self::new(grid, values)
    }

    #[must_use]
    pub const fn grid(&self) -> Grid2 {
        self.grid
    }

    #[must_use]
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    #[must_use]
    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    #[must_use]
    pub fn get(&self, x: usize, y: usize) -> f64 {
        self.values[self.grid.index(x, y)]
    }

    #[must_use]
    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    #[must_use]
    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    /// Bilinear interpolation; points outside the grid are clamped.
    #[must_use]
    pub fn sample(&self, p: Point2) -> f64 {
        let (n, w) = self.grid.bilinear(p);
        (0..4).map(|c| w[c] * self.values[n[c]]).sum()
    }

    #[must_use]
    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        Self {
            grid: self.grid,
            values: self.values.iter().map(|&v| f(v)).collect(),
        }
    }
}

/// Two real components per node of a [`Grid2`].
#[derive(Debug, Clone, PartialEq)]
pub struct VectorField2 {
    grid: Grid2,
    vx: Vec<f64>,
    vy: Vec<f64>,
}

impl VectorField2 {
    pub fn new(grid: Grid2, vx: Vec<f64>, vy: Vec<f64>) -> Result<Self, GridError> {
        check_len(grid.len(), vx.len())?;
        check_len(grid.len(), vy.len())?;
        if let Some(i) = vx
            .iter()
            .zip(&vy)
            .position(|(a, b)| !a.is_finite() || !b.is_finite())
        {
            return Err(GridError::NonFinite(i));
        }
        Ok(Self { grid, vx, vy })
    }

    #[must_use]
    pub fn zeros(grid: Grid2) -> Self {
        Self {
            grid,
            vx: vec![0.0; grid.len()],
            vy: vec![0.0; grid.len()],
        }
    }

    pub fn from_fn(grid: Grid2, mut f: impl FnMut(usize, usize) -> Point2) -> Result<Self, GridError> {
        let mut vx = Vec::with_capacity(grid.len());
        let mut vy = Vec::with_capacity(grid.len());
        for y in 0..grid.height() {
            for x in 0..grid.width() {
                let v = f(x, y);
                vx.push(v.x);
                vy.push(v.y);
            }
        }
        Self::new(grid, vx, vy)
    }

    #[must_use]
    pub const fn grid(&self) -> Grid2 {
        self.grid
    }

    #[must_use]
    pub fn vx(&self) -> &[f64] {
        &self.vx
    }

    #[must_use]
    pub fn vy(&self) -> &[f64] {
        &self.vy
    }

    #[must_use]
    pub fn at(&self, idx: usize) -> Point2 {
        Point2::new(self.vx[idx], self.vy[idx])
    }

    #[must_use]
    pub fn get(&self, x: usize, y: usize) -> Point2 {
        self.at(self.grid.index(x, y))
    }

    #[must_use]
    pub fn sample(&self, p: Point2) -> Point2 {
        let (n, w) = self.grid.bilinear(p);
        let mut out = Point2::default();
        for c in 0..4 {
            out = out + self.at(n[c]) * w[c];
        }
        out
    }

    /// Pointwise Euclidean norms.
    #[must_use]
    pub fn magnitude(&self) -> ScalarField {
        ScalarField {
            grid: self.grid,
            values: self.vx.iter().zip(&self.vy).map(|(a, b)| a.hypot(*b)).collect(),
        }
    }

    #[must_use]
    pub fn max_norm(&self) -> f64 {
        self.vx
            .iter()
            .zip(&self.vy)
            .map(|(a, b)| a.hypot(*b))
            .fold(0.0, f64::max)
    }

    #[must_use]
    pub fn map(&self, f: impl Fn(Point2) -> Point2) -> Self {
        let mut vx = Vec::with_capacity(self.vx.len());
        let mut vy = Vec::with_capacity(self.vy.len());
        for i in 0..self.vx.len() {
            let v = f(self.at(i));
            vx.push(v.x);
            vy.push(v.y);
        }
        Self {
            grid: self.grid,
            vx,
            vy,
        }
    }

    /// Apply the counterclockwise quarter turn at every node.
    #[must_use]
    pub fn rotate_quarter(&self) -> Self {
        self.map(Point2::rotate_quarter)
    }
}

/// Symmetric 2×2 matrix `[[m11, m12], [m12, m22]]`.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Sym2 {
    pub m11: f64,
    pub m12: f64,
    pub m22: f64,
}

impl Sym2 {
    #[must_use]
    pub const fn new(m11: f64, m12: f64, m22: f64) -> Self {
        Self { m11, m12, m22 }
    }

    #[must_use]
    pub const fn identity() -> Self {
        Self::new(1.0, 0.0, 1.0)
    }

    #[must_use]
    pub const fn scaled_identity(s: f64) -> Self {
        Self::new(s, 0.0, s)
    }

    #[must_use]
    pub fn det(&self) -> f64 {
        self.m11 * self.m22 - self.m12 * self.m12
    }

    #[must_use]
    pub fn trace(&self) -> f64 {
        self.m11 + self.m22
    }

    #[must_use]
    pub fn mul(&self, u: Point2) -> Point2 {
        Point2::new(self.m11 * u.x + self.m12 * u.y, self.m12 * u.x + self.m22 * u.y)
    }

    /// `⟨u, M u⟩`.
    #[must_use]
    pub fn quad(&self, u: Point2) -> f64 {
        u.dot(self.mul(u))
    }

    #[must_use]
    pub fn inverse(&self) -> Self {
        let d = self.det();
        Self::new(self.m22 / d, -self.m12 / d, self.m11 / d)
    }

    /// Eigenvalues in ascending order.
    #[must_use]
    pub fn eigenvalues(&self) -> (f64, f64) {
        let half_tr = 0.5 * self.trace();
        let disc = (0.25 * (self.m11 - self.m22).powi(2) + self.m12 * self.m12).sqrt();
        (half_tr - disc, half_tr + disc)
    }

    #[must_use]
    pub fn is_positive_definite(&self) -> bool {
        self.m11 > 0.0 && self.det() > 0.0 && self.eigenvalues().0 > 0.0
    }

    #[must_use]
    pub fn to_array(&self) -> [[f64; 2]; 2] {
        [[self.m11, self.m12], [self.m12, self.m22]]
    }
}

/// Symmetric positive definite 2×2 matrix per node.
#[derive(Debug, Clone, PartialEq)]
pub struct TensorField2 {
    grid: Grid2,
    tensors: Vec<Sym2>,
}

impl TensorField2 {
    pub fn new(grid: Grid2, tensors: Vec<Sym2>) -> Result<Self, GridError> {
        check_len(grid.len(), tensors.len())?;
        if let Some(i) = tensors.iter().position(|t| !t.is_positive_definite()) {
            return Err(GridError::NotPositiveDefinite(i));
        }
        Ok(Self { grid, tensors })
    }

    #[must_use]
    pub fn constant(grid: Grid2, m: Sym2) -> Self {
        Self {
            grid,
            tensors: vec![m; grid.len()],
        }
    }

    pub fn from_fn(grid: Grid2, mut f: impl FnMut(usize, usize) -> Sym2) -> Result<Self, GridError> {
        let mut t = Vec::with_capacity(grid.len());
        for y in 0..grid.height() {
            for x in 0..grid.width() {
                t.push(f(x, y));
            }
        }
        Self::new(grid, t)
    }

    #[must_use]
    pub const fn grid(&self) -> Grid2 {
        self.grid
    }

    #[must_use]
    pub fn tensors(&self) -> &[Sym2] {
        &self.tensors
    }

    #[must_use]
    pub fn at(&self, idx: usize) -> Sym2 {
        self.tensors[idx]
    }

    /// Componentwise bilinear interpolation (stays SPD: convex combination).
    #[must_use]
    pub fn sample(&self, p: Point2) -> Sym2 {
        let (n, w) = self.grid.bilinear(p);
        let mut out = Sym2::default();
        for c in 0..4 {
            let t = self.tensors[n[c]];
            out.m11 += w[c] * t.m11;
            out.m12 += w[c] * t.m12;
            out.m22 += w[c] * t.m22;
        }
        out
    }
}

/// Real value per node of a [`LiftedGrid3`].
#[derive(Debug, Clone, PartialEq)]
pub struct LiftedField {
    grid: LiftedGrid3,
    values: Vec<f64>,
}

impl LiftedField {
    pub fn new(grid: LiftedGrid3, values: Vec<f64>) -> Result<Self, GridError> {
        check_len(grid.len(), values.len())?;
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(GridError::NonFinite(i));
        }
        Ok(Self { grid, values })
    }

    #[must_use]
    pub fn constant(grid: LiftedGrid3, c: f64) -> Self {
        Self {
            grid,
            values: vec![c; grid.len()],
        }
    }

    #[must_use]
    pub const fn grid(&self) -> LiftedGrid3 {
        self.grid
    }

    #[must_use]
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    #[must_use]
    pub fn get(&self, x: usize, y: usize, k: usize) -> f64 {
        self.values[self.grid.index(x, y, k)]
    }

    #[must_use]
    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    /// Trilinear interpolation, clamped in space and periodic in θ.
    #[must_use]
    pub fn sample(&self, p: LiftedPoint) -> f64 {
        let (n, w) = self.grid.trilinear(p);
        (0..8).map(|c| w[c] * self.values[n[c]]).sum()
    }
}

/// Binary per-node mask on a [`Grid2`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Mask {
    grid: Grid2,
    bits: Vec<bool>,
}

impl Mask {
    #[must_use]
    pub fn empty(grid: Grid2) -> Self {
        Self {
            grid,
            bits: vec![false; grid.len()],
        }
    }

    #[must_use]
    pub fn full(grid: Grid2) -> Self {
        Self {
            grid,
            bits: vec![true; grid.len()],
        }
    }

    pub fn from_bits(grid: Grid2, bits: Vec<bool>) -> Result<Self, GridError> {
        check_len(grid.len(), bits.len())?;
        Ok(Self { grid, bits })
    }

    #[must_use]
    pub const fn grid(&self) -> Grid2 {
        self.grid
    }

    #[must_use]
    pub fn bits(&self) -> &[bool] {
        &self.bits
    }

    #[must_use]
    pub fn get(&self, idx: usize) -> bool {
        self.bits[idx]
    }

    #[must_use]
    pub fn at(&self, x: usize, y: usize) -> bool {
        self.bits[self.grid.index(x, y)]
    }

    pub fn set(&mut self, idx: usize, v: bool) {
        self.bits[idx] = v;
    }

    #[must_use]
    pub fn count(&self) -> usize {
        self.bits.iter().filter(|&&b| b).count()
    }

    #[must_use]
    pub fn invert(&self) -> Self {
        Self {
            grid: self.grid,
            bits: self.bits.iter().map(|b| !b).collect(),
        }
    }

    #[must_use]
    pub fn and(&self, other: &Self) -> Self {
        Self {
            grid: self.grid,
            bits: self.bits.iter().zip(&other.bits).map(|(a, b)| *a && *b).collect(),
        }
    }

    /// Indices of set nodes.
    pub fn indices(&self) -> impl Iterator<Item = usize> + '_ {
        self.bits.iter().enumerate().filter(|(_, &b)| b).map(|(i, _)| i)
    }
}
