use std::f64::consts::TAU;

use crate::grid::{Grid2, LiftedGrid3};

/// Regular node lattice in `D` dimensions with per-axis spacing and
/// optional periodicity. Node `(i₀, i₁, …)` sits at physical position
/// `(i₀ h₀, i₁ h₁, …)`; the first axis varies fastest in the linear index.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Lattice<const D: usize> {
    pub dims: [usize; D],
    pub periodic: [bool; D],
    pub spacing: [f64; D],
}

impl Lattice<2> {
    #[must_use]
    pub fn planar(grid: Grid2) -> Self {
        Self {
            dims: [grid.width(), grid.height()],
            periodic: [false; 2],
            spacing: [grid.spacing(); 2],
        }
    }
}

impl Lattice<3> {
    /// `(x, y, θ)` lattice; θ is periodic with spacing `2π / n_theta`.
    #[must_use]
    pub fn lifted(grid: LiftedGrid3) -> Self {
        let base = grid.base();
        Self {
            dims: [base.width(), base.height(), grid.n_theta()],
            periodic: [false, false, true],
            spacing: [base.spacing(), base.spacing(), TAU / grid.n_theta() as f64],
        }
    }
}

impl<const D: usize> Lattice<D> {
    #[must_use]
    pub fn len(&self) -> usize {
        self.dims.iter().product()
    }

    #[must_use]
    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    #[must_use]
    pub fn index(&self, c: [usize; D]) -> usize {
        let mut idx = 0;
        for a in (0..D).rev() {
            idx = idx * self.dims[a] + c[a];
        }
        idx
    }

    #[must_use]
    pub fn coords(&self, mut idx: usize) -> [usize; D] {
        let mut c = [0; D];
        for a in 0..D {
            c[a] = idx % self.dims[a];
            idx /= self.dims[a];
        }
        c
    }

    /// Node reached from `idx` by an integer offset, wrapping periodic axes.
    #[must_use]
    pub fn offset(&self, idx: usize, off: [isize; D]) -> Option<usize> {
        self.offset_from(self.coords(idx), off)
    }

    /// [`Lattice::offset`] starting from known coordinates.
    #[must_use]
    pub fn offset_from(&self, c: [usize; D], off: [isize; D]) -> Option<usize> {
        let mut out = [0; D];
        for a in 0..D {
            let v = c[a] as isize + off[a];
            let n = self.dims[a] as isize;
            out[a] = if self.periodic[a] {
                v.rem_euclid(n) as usize
            } else if (0..n).contains(&v) {
                v as usize
            } else {
                return None;
            };
        }
        Some(self.index(out))
    }

    #[must_use]
    pub fn position(&self, idx: usize) -> [f64; D] {
        let c = self.coords(idx);
        let mut p = [0.0; D];
        for a in 0..D {
            p[a] = c[a] as f64 * self.spacing[a];
        }
        p
    }

    /// Physical displacement of an integer offset.
    #[must_use]
    pub fn displacement(&self, off: [isize; D]) -> [f64; D] {
        let mut d = [0.0; D];
        for a in 0..D {
            d[a] = off[a] as f64 * self.spacing[a];
        }
        d
    }

    /// Whether a physical point lies in the lattice (periodic axes always do).
    #[must_use]
    pub fn contains(&self, p: [f64; D]) -> bool {
        (0..D).all(|a| {
            self.periodic[a] || {
                let s = p[a] / self.spacing[a];
                s.is_finite() && s >= -1e-9 && s <= (self.dims[a] - 1) as f64 + 1e-9
            }
        })
    }

    /// Smallest physical displacement from `from` to `to`, wrapping periodic axes.
    #[must_use]
    pub fn delta(&self, from: [f64; D], to: [f64; D]) -> [f64; D] {
        let mut d = [0.0; D];
        for a in 0..D {
            d[a] = to[a] - from[a];
            if self.periodic[a] {
                let period = self.dims[a] as f64 * self.spacing[a];
                d[a] -= period * (d[a] / period).round();
            }
        }
        d
    }

    /// Wrap periodic coordinates into their fundamental interval and clamp
    /// the others into the lattice.
    #[must_use]
    pub fn normalize(&self, p: [f64; D]) -> [f64; D] {
        let mut q = p;
        for a in 0..D {
            let extent = (self.dims[a] - 1) as f64 * self.spacing[a];
            if self.periodic[a] {
                let period = self.dims[a] as f64 * self.spacing[a];
                q[a] = p[a].rem_euclid(period);
                if q[a] >= period {
                    q[a] = 0.0;
                }
            } else {
                q[a] = p[a].clamp(0.0, extent);
            }
        }
        q
    }

    /// Corner nodes and multilinear weights of the cell containing `p`
    /// (clamped in non-periodic axes). Returns `2^D` entries.
    #[must_use]
    pub fn corners(&self, p: [f64; D]) -> Vec<(usize, f64)> {
        let q = self.normalize(p);
        let mut lo = [0usize; D];
        let mut hi = [0usize; D];
        let mut t = [0.0; D];
        for a in 0..D {
            let s = q[a] / self.spacing[a];
            let n = self.dims[a];
            let mut i = s.floor() as usize;
            if self.periodic[a] {
                i %= n;
                lo[a] = i;
                hi[a] = (i + 1) % n;
            } else {
                i = i.min(n - 2);
                lo[a] = i;
                hi[a] = i + 1;
            }
            t[a] = (s - i as f64).clamp(0.0, 1.0);
        }
        (0..1usize << D)
            .map(|mask| {
                let mut c = [0; D];
                let mut w = 1.0;
                for a in 0..D {
                    if mask >> a & 1 == 1 {
                        c[a] = hi[a];
                        w *= t[a];
                    } else {
                        c[a] = lo[a];
                        w *= 1.0 - t[a];
                    }
                }
                (self.index(c), w)
            })
            .collect()
    }

    /// The node coinciding with `p` within `tol` lattice units, if any.
    #[must_use]
    pub fn node_at(&self, p: [f64; D], tol: f64) -> Option<usize> {
        let q = self.normalize(p);
        let mut c = [0; D];
        for a in 0..D {
            let s = q[a] / self.spacing[a];
            let r = s.round();
            if (s - r).abs() > tol {
                return None;
            }
            c[a] = if self.periodic[a] {
                (r as usize) % self.dims[a]
            } else {
                r as usize
            };
        }
        Some(self.index(c))
    }
}
