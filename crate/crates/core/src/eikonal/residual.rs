use super::{DistanceMap, FieldMetric};
use crate::grid::{Mask, ScalarField};
use crate::metrics::Metric2;

/// Per-node eikonal residual `|‖∇𝒟 − ω‖_{M⁻¹} − 1|` and the nodes where
/// it was evaluated.
#[derive(Debug, Clone, PartialEq)]
pub struct Residual {
    pub values: Vec<f64>,
    pub mask: Vec<bool>,
}

impl Residual {
    #[must_use]
    pub fn evaluated(&self) -> Vec<f64> {
        self.values
            .iter()
            .zip(&self.mask)
            .filter(|(_, &m)| m)
            .map(|(&v, _)| v)
            .collect()
    }

    #[must_use]
    pub fn median(&self) -> Option<f64> {
        let mut v = self.evaluated();
        if v.is_empty() {
            return None;
        }
        v.sort_by(f64::total_cmp);
        let n = v.len();
        Some(if n % 2 == 1 { v[n / 2] } else { 0.5 * (v[n / 2 - 1] + v[n / 2]) })
    }

    #[must_use]
    pub fn max(&self) -> Option<f64> {
        self.evaluated().into_iter().reduce(f64::max)
    }
}

/// Central-difference residual. Skipped: unreached nodes, seeds and the
/// nodes within one cell of them, and nodes whose axis neighbors are
/// missing or unreached.
#[must_use]
pub fn residual<const D: usize, M: FieldMetric<D>>(dmap: &DistanceMap<D>, metric: &M) -> Residual {
    let lat = dmap.lattice();
    let n = lat.len();
    let mut values = vec![0.0; n];
    let mut mask = vec![false; n];
    let vals = dmap.values();
    'nodes: for i in 0..n {
        if !vals[i].is_finite() {
            continue;
        }
        let p = lat.position(i);
        for s in dmap.seeds() {
            let d = lat.delta(s.point, p);
            if (0..D).all(|a| d[a].abs() / lat.spacing[a] <= 1.0 + 1e-9) {
                continue 'nodes;
            }
        }
        let mut g = [0.0; D];
        for a in 0..D {
            let mut plus = [0isize; D];
            plus[a] = 1;
            let minus = plus.map(|v| -v);
            let (Some(ip), Some(im)) = (lat.offset(i, plus), lat.offset(i, minus)) else {
                continue 'nodes;
            };
            if !vals[ip].is_finite() || !vals[im].is_finite() {
                continue 'nodes;
            }
            g[a] = (vals[ip] - vals[im]) / (2.0 * lat.spacing[a]);
        }
        let form = metric.node_form(i);
        let mut diff = [0.0; D];
        for a in 0..D {
            diff[a] = g[a] - form.omega[a];
        }
        values[i] = (form.dual_quad(&diff).max(0.0).sqrt() - 1.0).abs();
        mask[i] = true;
    }
    Residual { values, mask }
}

/// Planar residual as image-shaped fields.
#[must_use]
pub fn residual_field(dmap: &DistanceMap<2>, metric: &Metric2) -> (ScalarField, Mask) {
    let r = residual(dmap, metric);
    let grid = dmap.grid();
    (
        ScalarField::new(grid, r.values).expect("residuals are finite"),
        Mask::from_bits(grid, r.mask).expect("mask matches grid"),
    )
}
