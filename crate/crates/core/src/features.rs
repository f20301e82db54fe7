//! Image-derived fields: Gaussian gradients, edge magnitudes and potentials,
//! alignment vector fields, and orientation scores.

use std::f64::consts::PI;

use crate::error::GridError;
use crate::grid::{Grid2, LiftedField, LiftedGrid3, Point2, ScalarField, Sym2, VectorField2};

/// Gray or RGB image with channel values in `[0, 1]`, stored planar.
#[derive(Debug, Clone, PartialEq)]
pub struct ImageBuffer {
    grid: Grid2,
    channels: usize,
    data: Vec<f64>,
}

impl ImageBuffer {
    /// `data` holds `channels` consecutive planes; values are clamped to `[0, 1]`.
    pub fn new(grid: Grid2, channels: usize, data: Vec<f64>) -> Result<Self, GridError> {
        if channels != 1 && channels != 3 {
            return Err(GridError::InvalidGrid(format!(
                "images have 1 or 3 channels, got {channels}"
            )));
        }
        if data.len() != grid.len() * channels {
            return Err(GridError::SizeMismatch {
                expected: grid.len() * channels,
                got: data.len(),
            });
        }
        if let Some(i) = data.iter().position(|v| !v.is_finite()) {
            return Err(GridError::NonFinite(i));
        }
        Ok(Self {
            grid,
            channels,
            data: data.into_iter().map(|v| v.clamp(0.0, 1.0)).collect(),
        })
    }

    pub fn gray(grid: Grid2, values: Vec<f64>) -> Result<Self, GridError> {
        Self::new(grid, 1, values)
    }

    pub fn from_fn(grid: Grid2, f: impl Fn(usize, usize) -> f64) -> Result<Self, GridError> {
        let mut v = Vec::with_capacity(grid.len());
        for y in 0..grid.height() {
            for x in 0..grid.width() {
                v.push(f(x, y));
            }
        }
        Self::gray(grid, v)
    }

    /// Stack a gray image three times into an RGB buffer.
    #[must_use]
    pub fn to_rgb(&self) -> Self {
        if self.channels == 3 {
            return self.clone();
        }
        let mut data = Vec::with_capacity(self.data.len() * 3);
        for _ in 0..3 {
            data.extend_from_slice(&self.data);
        }
        Self {
            grid: self.grid,
            channels: 3,
            data,
        }
    }

    /// Channel mean; identity for gray images.
    #[must_use]
    pub fn to_gray(&self) -> Self {
        if self.channels == 1 {
            return self.clone();
        }
        let n = self.grid.len();
        let data = (0..n)
            .map(|i| (self.data[i] + self.data[n + i] + self.data[2 * n + i]) / 3.0)
            .collect();
        Self {
            grid: self.grid,
            channels: 1,
            data,
        }
    }

    #[must_use]
    pub const fn grid(&self) -> Grid2 {
        self.grid
    }

    #[must_use]
    pub const fn channels(&self) -> usize {
        self.channels
    }

    #[must_use]
    pub fn channel(&self, c: usize) -> &[f64] {
        let n = self.grid.len();
        &self.data[c * n..(c + 1) * n]
    }

    #[must_use]
    pub fn data(&self) -> &[f64] {
        &self.data
    }

    #[must_use]
    pub fn get(&self, c: usize, x: usize, y: usize) -> f64 {
        self.channel(c)[self.grid.index(x, y)]
    }

    /// Mirror left-right.
    #[must_use]
    pub fn flip_horizontal(&self) -> Self {
        let g = self.grid;
        let mut data = self.data.clone();
        for c in 0..self.channels {
            for y in 0..g.height() {
                for x in 0..g.width() {
                    data[c * g.len() + g.index(x, y)] = self.get(c, g.width() - 1 - x, y);
                }
            }
        }
        Self {
            grid: g,
            channels: self.channels,
            data,
        }
    }

    /// `1 - I` per channel.
    #[must_use]
    pub fn inverted(&self) -> Self {
        Self {
            grid: self.grid,
            channels: self.channels,
            data: self.data.iter().map(|v| 1.0 - v).collect(),
        }
    }
}

/// Sampled Gaussian and its first two derivatives, truncated at `⌈4σ⌉`.
///
/// Each kernel is renormalized so that it acts exactly on polynomials of
/// its order: `Σ g0 = 1`, `Σ k·g1(k) = -1`, `Σ g2 = 0` and `Σ k²·g2(k) = 2`.
#[derive(Debug, Clone)]
pub struct GaussianKernels {
    pub radius: usize,
    pub g0: Vec<f64>,
    pub g1: Vec<f64>,
    pub g2: Vec<f64>,
}

impl GaussianKernels {
    #[must_use]
    pub fn new(sigma: f64) -> Self {
        assert!(sigma > 0.0, "sigma must be positive");
        let radius = (4.0 * sigma).ceil() as usize;
        let ks: Vec<f64> = (0..=2 * radius).map(|i| i as f64 - radius as f64).collect();
        let s2 = sigma * sigma;
        let base: Vec<f64> = ks.iter().map(|k| (-k * k / (2.0 * s2)).exp()).collect();

        let z: f64 = base.iter().sum();
        let g0: Vec<f64> = base.iter().map(|v| v / z).collect();

        let raw1: Vec<f64> = ks.iter().zip(&g0).map(|(k, g)| -k / s2 * g).collect();
        let m1: f64 = ks.iter().zip(&raw1).map(|(k, g)| k * g).sum();
        let g1 = raw1.iter().map(|g| -g / m1).collect();

        let mut g2: Vec<f64> = ks
            .iter()
            .zip(&g0)
            .map(|(k, g)| (k * k / (s2 * s2) - 1.0 / s2) * g)
            .collect();
        let sum2: f64 = g2.iter().sum();
        for (v, g) in g2.iter_mut().zip(&g0) {
            *v -= sum2 * g;
        }
        let m2: f64 = ks.iter().zip(&g2).map(|(k, g)| k * k * g).sum();
        for v in &mut g2 {
            *v *= 2.0 / m2;
        }
        Self { radius, g0, g1, g2 }
    }
}

/// Symmetric boundary extension: index `-1` maps to `0`, `n` to `n - 1`.
fn reflect(i: isize, n: usize) -> usize {
    let period = 2 * n as isize;
    let m = i.rem_euclid(period);
    if m >= n as isize {
        (period - 1 - m) as usize
    } else {
        m as usize
    }
}

/// `(K ∗ f)(x) = Σ_k K(k) f(x - k)` along rows (`axis == 0`) or columns.
fn convolve_axis(grid: Grid2, f: &[f64], kernel: &[f64], axis: usize) -> Vec<f64> {
    let (w, h) = (grid.width(), grid.height());
    let r = (kernel.len() / 2) as isize;
    let mut out = vec![0.0; f.len()];
    for y in 0..h {
        for x in 0..w {
            let mut acc = 0.0;
            for (j, kv) in kernel.iter().enumerate() {
                let k = j as isize - r;
                let v = if axis == 0 {
                    f[y * w + reflect(x as isize - k, w)]
                } else {
                    f[reflect(y as isize - k, h) * w + x]
                };
                acc += kv * v;
            }
            out[y * w + x] = acc;
        }
    }
    out
}

fn separable(grid: Grid2, f: &[f64], kx: &[f64], ky: &[f64]) -> Vec<f64> {
    convolve_axis(grid, &convolve_axis(grid, f, kx, 0), ky, 1)
}

fn channel_gradient(grid: Grid2, f: &[f64], k: &GaussianKernels) -> (Vec<f64>, Vec<f64>) {
    (separable(grid, f, &k.g1, &k.g0), separable(grid, f, &k.g0, &k.g1))
}

fn channel_gradients(img: &ImageBuffer, sigma: f64) -> Vec<(Vec<f64>, Vec<f64>)> {
    let k = GaussianKernels::new(sigma);
    (0..img.channels())
        .map(|c| channel_gradient(img.grid(), img.channel(c), &k))
        .collect()
}

fn check_sigma(sigma: f64) -> Result<(), GridError> {
    if sigma > 0.0 && sigma.is_finite() {
        Ok(())
    } else {
        Err(GridError::InvalidGrid(format!("sigma must be positive, got {sigma}")))
    }
}

/// `∇I_σ = (∂x G_σ ∗ I, ∂y G_σ ∗ I)` of a gray image (first channel otherwise).
pub fn gaussian_gradient(img: &ImageBuffer, sigma: f64) -> Result<VectorField2, GridError> {
    check_sigma(sigma)?;
    let k = GaussianKernels::new(sigma);
    let (gx, gy) = channel_gradient(img.grid(), img.channel(0), &k);
    VectorField2::new(img.grid(), gx, gy)
}

/// Gradient magnitude `g`: the Euclidean norm of `∇I_σ` for gray images,
/// the sum of per-channel gradient norms for RGB images.
pub fn gradient_magnitude(img: &ImageBuffer, sigma: f64) -> Result<ScalarField, GridError> {
    check_sigma(sigma)?;
    let grads = channel_gradients(img, sigma);
    let n = img.grid().len();
    let values = (0..n)
        .map(|i| grads.iter().map(|(gx, gy)| gx[i].hypot(gy[i])).sum())
        .collect();
    ScalarField::new(img.grid(), values)
}

/// Edge potential variants; all strictly positive.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PotentialKind {
    /// `exp(β (‖g‖∞ − g))`, with infimum exactly 1 where `g` is maximal.
    ExpGap,
    /// `exp(−β g)`.
    ExpNeg,
    /// `c₂ + I`, using the gray levels of the image.
    GrayOffset { c2: f64 },
}

pub fn edge_potential(
    g: &ScalarField,
    beta: f64,
    kind: PotentialKind,
    img: Option<&ImageBuffer>,
) -> Result<ScalarField, GridError> {
    match kind {
        PotentialKind::ExpGap | PotentialKind::ExpNeg if !(beta > 0.0) => Err(
            GridError::InvalidGrid(format!("contrast beta must be positive, got {beta}")),
        ),
        PotentialKind::ExpGap => {
            let gmax = g.max();
            Ok(g.map(|v| (beta * (gmax - v)).exp()))
        }
        PotentialKind::ExpNeg => Ok(g.map(|v| (-beta * v).exp())),
        PotentialKind::GrayOffset { c2 } => {
            if !(c2 > 0.0) {
                return Err(GridError::InvalidGrid(format!("c2 must be positive, got {c2}")));
            }
            let img = img.ok_or_else(|| {
                GridError::InvalidGrid("gray-offset potential needs the image".into())
            })?;
            let gray = img.to_gray();
            ScalarField::new(img.grid(), gray.channel(0).iter().map(|v| c2 + v).collect())
        }
    }
}

/// How the alignment field is built from a color image.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ColorMode {
    /// Rotate the sum of channel gradients.
    #[default]
    Sum,
    /// `g·υ` with `υ` the structure-tensor eigenvector of the smaller eigenvalue.
    Eigen,
}

/// Alignment field `ξ`: the image gradient rotated by a quarter turn.
pub fn alignment_vector(img: &ImageBuffer, sigma: f64, mode: ColorMode) -> Result<VectorField2, GridError> {
    check_sigma(sigma)?;
    let grid = img.grid();
    let grads = channel_gradients(img, sigma);
    let summed = |i: usize| {
        grads
            .iter()
            .fold(Point2::default(), |acc, (gx, gy)| acc + Point2::new(gx[i], gy[i]))
    };
    if img.channels() == 1 || mode == ColorMode::Sum {
        return VectorField2::from_fn(grid, |x, y| summed(grid.index(x, y)).rotate_quarter());
    }
    VectorField2::from_fn(grid, |x, y| {
        let i = grid.index(x, y);
        let mut st = Sym2::default();
        let mut g = 0.0;
        for (gx, gy) in &grads {
            st.m11 += gx[i] * gx[i];
            st.m12 += gx[i] * gy[i];
            st.m22 += gy[i] * gy[i];
            g += gx[i].hypot(gy[i]);
        }
        if g == 0.0 {
            return Point2::default();
        }
        let (lo, hi) = st.eigenvalues();
        // Eigenvector of the dominant eigenvalue, then rotate for the minor one.
        let major = if st.m12.abs() > 1e-300 {
            Point2::new(hi - st.m22, st.m12)
        } else if st.m11 >= st.m22 {
            Point2::new(1.0, 0.0)
        } else {
            Point2::new(0.0, 1.0)
        };
        let major = major * (1.0 / major.norm());
        let mut minor = major.rotate_quarter();
        if (hi - lo).abs() <= 1e-300 {
            minor = Point2::new(1.0, 0.0);
        }
        let reference = summed(i).rotate_quarter();
        let sign_ref = if reference.norm() > 0.0 {
            reference
        } else {
            major.rotate_quarter()
        };
        if minor.dot(sign_ref) < 0.0 {
            minor = -minor;
        }
        minor * g
    })
}

/// `φ(a) = 1 − e^{−a}`, capped just below one so bounded fields stay
/// strictly inside the unit ball in floating point.
#[must_use]
pub fn saturate(a: f64) -> f64 {
    const CAP: f64 = 1.0 - 2e-12;
    (-(-a).exp_m1()).min(CAP)
}

/// Bounded alignment field `ξ̃ = φ(β‖ξ‖) ξ/‖ξ‖` (zero where `ξ = 0`).
/// `β = 0` gives the zero field, i.e. the Euclidean control metric.
pub fn remap_bounded(xi: &VectorField2, beta: f64) -> Result<VectorField2, GridError> {
    if !(beta >= 0.0) || !beta.is_finite() {
        return Err(GridError::InvalidGrid(format!("beta must be non-negative, got {beta}")));
    }
    Ok(xi.map(|v| {
        let n = v.norm();
        if n == 0.0 {
            Point2::default()
        } else {
            v * (saturate(beta * n) / n)
        }
    }))
}

/// Nonnegative function on the orientation-lifted grid.
#[derive(Debug, Clone, PartialEq)]
pub struct OrientationScore {
    field: LiftedField,
}

impl OrientationScore {
    pub fn new(field: LiftedField) -> Result<Self, GridError> {
        if let Some(i) = field.values().iter().position(|&v| v < 0.0) {
            return Err(GridError::InvalidGrid(format!("negative orientation score at node {i}")));
        }
        Ok(Self { field })
    }

    #[must_use]
    pub fn field(&self) -> &LiftedField {
        &self.field
    }

    #[must_use]
    pub fn grid(&self) -> LiftedGrid3 {
        self.field.grid()
    }

    #[must_use]
    pub fn get(&self, x: usize, y: usize, k: usize) -> f64 {
        self.field.get(x, y, k)
    }

    /// Orientation index maximizing the score at a node (lowest index on ties).
    #[must_use]
    pub fn argmax_theta(&self, x: usize, y: usize) -> usize {
        let n = self.grid().n_theta();
        (0..n).fold(0, |best, k| if self.get(x, y, k) > self.get(x, y, best) { k } else { best })
    }

    /// Shift the orientation axis so that `ψ'(x, θ) = ψ(x, θ + offset)`.
    #[must_use]
    pub fn rotated(&self, offset: f64) -> Self {
        let g = self.grid();
        let base = g.base();
        let mut values = vec![0.0; g.len()];
        for k in 0..g.n_theta() {
            for y in 0..base.height() {
                for x in 0..base.width() {
                    values[g.index(x, y, k)] = self.field.sample(crate::grid::LiftedPoint::new(
                        x as f64,
                        y as f64,
                        g.theta(k) + offset,
                    ));
                }
            }
        }
        Self {
            field: LiftedField::new(g, values).expect("sampled from finite field"),
        }
    }
}

/// First-order steerable edge score `Σ_i |⟨(cos θ, sin θ), ∇(G_σ ∗ I_i)⟩|`.
///
/// Peaks when θ points along the image gradient (normal to the edge).
pub fn orientation_score_edge(img: &ImageBuffer, sigma: f64, n_theta: usize) -> Result<OrientationScore, GridError> {
    check_sigma(sigma)?;
    let lg = LiftedGrid3::new(img.grid(), n_theta)?;
    let grads = channel_gradients(img, sigma);
    let plane = img.grid().len();
    let mut values = vec![0.0; lg.len()];
    for k in 0..n_theta {
        let (s, c) = lg.theta(k).sin_cos();
        for i in 0..plane {
            values[k * plane + i] = grads.iter().map(|(gx, gy)| (c * gx[i] + s * gy[i]).abs()).sum();
        }
    }
    OrientationScore::new(LiftedField::new(lg, values)?)
}

/// Optimally-oriented-flux tube score for dark tubes on a bright background.
///
/// For every radius the Gaussian Hessian is averaged over a disk of that
/// radius; the radius with the largest major eigenvalue (smallest radius on
/// ties) is kept, and `ψ(x, θ) = max(⟨n_θ, Q n_θ⟩, 0)` with
/// `n_θ = (−sin θ, cos θ)`. Returns the score and the selected radius map.
pub fn orientation_score_tube(
    img: &ImageBuffer,
    sigma: f64,
    radii: &[f64],
    n_theta: usize,
) -> Result<(OrientationScore, ScalarField), GridError> {
    check_sigma(sigma)?;
    if radii.is_empty() || radii.iter().any(|&r| !(r > 0.0)) {
        return Err(GridError::InvalidGrid("tube radii must be positive and nonempty".into()));
    }
    let grid = img.grid();
    let lg = LiftedGrid3::new(grid, n_theta)?;
    let k = GaussianKernels::new(sigma);
    let f = img.channel(0);
    let hxx = separable(grid, f, &k.g2, &k.g0);
    let hyy = separable(grid, f, &k.g0, &k.g2);
    let hxy = separable(grid, f, &k.g1, &k.g1);

    let n = grid.len();
    let mut best_eta = vec![f64::NEG_INFINITY; n];
    let mut best_q = vec![Sym2::default(); n];
    let mut best_r = vec![radii[0]; n];
    for &r in radii {
        let offsets = disk_offsets(r);
        let inv = 1.0 / offsets.len() as f64;
        let (w, h) = (grid.width(), grid.height());
        for y in 0..h {
            for x in 0..w {
                let mut q = Sym2::default();
                for &(dx, dy) in &offsets {
                    let j = reflect(y as isize + dy, h) * w + reflect(x as isize + dx, w);
                    q.m11 += hxx[j];
                    q.m12 += hxy[j];
                    q.m22 += hyy[j];
                }
                q.m11 *= inv;
                q.m12 *= inv;
                q.m22 *= inv;
                let i = y * w + x;
                let eta = q.eigenvalues().1;
                if eta > best_eta[i] + 1e-12 * eta.abs().max(1e-12) {
                    best_eta[i] = eta;
                    best_q[i] = q;
                    best_r[i] = r;
                }
            }
        }
    }
    let mut values = vec![0.0; lg.len()];
    for kk in 0..n_theta {
        let (s, c) = lg.theta(kk).sin_cos();
        let nt = Point2::new(-s, c);
        for i in 0..n {
            values[kk * n + i] = best_q[i].quad(nt).max(0.0);
        }
    }
    Ok((
        OrientationScore::new(LiftedField::new(lg, values)?)?,
        ScalarField::new(grid, best_r)?,
    ))
}

fn disk_offsets(r: f64) -> Vec<(isize, isize)> {
    let ri = r.ceil() as isize;
    let mut out = Vec::new();
    for dy in -ri..=ri {
        for dx in -ri..=ri {
            if ((dx * dx + dy * dy) as f64).sqrt() < r {
                out.push((dx, dy));
            }
        }
    }
    if out.is_empty() {
        out.push((0, 0));
    }
    out
}

/// Angle in `[0, π)` of a gradient direction, for diagnostics.
#[must_use]
pub fn gradient_angle(v: Point2) -> f64 {
    v.angle().rem_euclid(PI)
}
