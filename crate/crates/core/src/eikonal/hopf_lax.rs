//! Local Hopf–Lax update over one stencil simplex:
//! `min_{y ∈ conv(y₀ … y_m)} F(x − y) + interp(𝒟)(y)`.

use crate::metrics::RandersForm;

/// Minimum over the simplex and barycentric weights of the minimizer
/// (one weight per input vertex).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimplexMin {
    pub value: f64,
    pub weights: [f64; 3],
}

const FEAS_TOL: f64 = 1e-12;

fn dot<const D: usize>(a: &[f64; D], b: &[f64; D]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// `disp[j] = y_j − x` (physical), `d[j] = 𝒟(y_j)`; at most three vertices.
#[must_use]
pub fn simplex_update<const D: usize>(form: &RandersForm<D>, disp: &[[f64; D]], d: &[f64]) -> SimplexMin {
    let k = disp.len();
    debug_assert!((1..=3).contains(&k) && d.len() == k);
    let full = (1usize << k) - 1;
    if k > 1 {
        if let Some(r) = interior(form, disp, d, full) {
            return r;
        }
    }
    let mut best = SimplexMin {
        value: f64::INFINITY,
        weights: [0.0; 3],
    };
    // By convexity the constrained minimum is the best feasible critical
    // point over the proper faces.
    for mask in 1..full {
        if let Some(r) = interior(form, disp, d, mask) {
            if r.value < best.value {
                best = r;
            }
        }
    }
    if k == 1 {
        return interior(form, disp, d, 1).expect("vertex candidate is always feasible");
    }
    best
}

/// Critical point interior to the full simplex, if feasible.
#[must_use]
pub fn simplex_interior<const D: usize>(form: &RandersForm<D>, disp: &[[f64; D]], d: &[f64]) -> Option<SimplexMin> {
    interior(form, disp, d, (1usize << disp.len()) - 1)
}

fn interior<const D: usize>(form: &RandersForm<D>, disp: &[[f64; D]], d: &[f64], mask: usize) -> Option<SimplexMin> {
    let mut verts = [0usize; 3];
    let mut nv = 0;
    for j in 0..disp.len() {
        if mask >> j & 1 == 1 {
            verts[nv] = j;
            nv += 1;
        }
    }
    let verts = &verts[..nv];
    let v0 = verts[0];
    let p = disp[v0].map(|v| -v);
    let base = dot(&form.omega, &p) + d[v0];
    let mut weights = [0.0; 3];
    if verts.len() == 1 {
        weights[v0] = 1.0;
        return Some(SimplexMin {
            value: form.eval(&p),
            weights,
        }
        .shifted(d[v0]));
    }
    let m = verts.len() - 1;
    let mut bvec = [[0.0; D]; 2];
    for (i, &j) in verts[1..].iter().enumerate() {
        for a in 0..D {
            bvec[i][a] = disp[v0][a] - disp[j][a];
        }
    }
    let mp = form.mul(&p);
    let c = dot(&p, &mp);
    let mut amat = [[0.0; 2]; 2];
    let mut b = [0.0; 2];
    let mut kv = [0.0; 2];
    for i in 0..m {
        let mb = form.mul(&bvec[i]);
        for jj in 0..m {
            amat[jj][i] = dot(&bvec[jj], &mb);
        }
        b[i] = dot(&bvec[i], &mp);
        kv[i] = dot(&form.omega, &bvec[i]) + d[verts[i + 1]] - d[v0];
    }
    let inv = |v: [f64; 2]| -> [f64; 2] {
        if m == 1 {
            [v[0] / amat[0][0], 0.0]
        } else {
            let det = amat[0][0] * amat[1][1] - amat[0][1] * amat[1][0];
            [
                (amat[1][1] * v[0] - amat[0][1] * v[1]) / det,
                (amat[0][0] * v[1] - amat[1][0] * v[0]) / det,
            ]
        }
    };
    let ai_k = inv(kv);
    let ai_b = inv(b);
    let kak: f64 = (0..m).map(|i| kv[i] * ai_k[i]).sum();
    if !(kak < 1.0) {
        return None;
    }
    let delta = c - (0..m).map(|i| b[i] * ai_b[i]).sum::<f64>();
    if !(delta > 0.0) {
        return None;
    }
    let sq = (delta / (1.0 - kak)).sqrt();
    let mut z = [0.0; 2];
    let mut zsum = 0.0;
    for i in 0..m {
        z[i] = -ai_k[i] * sq - ai_b[i];
        if z[i] < -FEAS_TOL {
            return None;
        }
        z[i] = z[i].max(0.0);
        zsum += z[i];
    }
    if zsum > 1.0 + FEAS_TOL {
        return None;
    }
    let zsum = zsum.min(1.0);
    let value = sq + (0..m).map(|i| kv[i] * z[i]).sum::<f64>() + base;
    weights[v0] = 1.0 - zsum;
    for i in 0..m {
        weights[verts[i + 1]] = z[i];
    }
    Some(SimplexMin { value, weights })
}

impl SimplexMin {
    fn shifted(mut self, s: f64) -> Self {
        self.value += s;
        self
    }
}
