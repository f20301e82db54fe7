/// Spatial neighborhood used by the update.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StencilKind {
    /// 8-neighbor ring, or 16 when the metric is strongly distorted.
    #[default]
    Auto,
    Ring8,
    Ring16,
}

/// Neighbor offsets and the simplicial faces spanned by them.
///
/// Faces have `D` vertices (segments in 2D, triangles in 3D) and together
/// form a closed star-shaped polytope around the origin.
#[derive(Debug, Clone)]
pub struct Stencil<const D: usize> {
    pub offsets: Vec<[isize; D]>,
    pub faces: Vec<[usize; D]>,
    /// Faces containing each offset.
    pub faces_of: Vec<Vec<usize>>,
    /// Index of the negated offset.
    pub opposite: Vec<usize>,
    /// Offsets sharing a face with each offset.
    pub links: Vec<Vec<usize>>,
}

fn ring(wide: bool) -> Vec<[isize; 2]> {
    let mut r: Vec<[isize; 2]> = vec![[1, 0], [1, 1], [0, 1], [-1, 1], [-1, 0], [-1, -1], [0, -1], [1, -1]];
    if wide {
        r.extend([[2, 1], [1, 2], [-1, 2], [-2, 1], [-2, -1], [-1, -2], [1, -2], [2, -1]]);
    }
    r.sort_by(|a, b| {
        let ta = (a[1] as f64).atan2(a[0] as f64).rem_euclid(std::f64::consts::TAU);
        let tb = (b[1] as f64).atan2(b[0] as f64).rem_euclid(std::f64::consts::TAU);
        ta.total_cmp(&tb)
    });
    r
}

impl<const D: usize> Stencil<D> {
    fn finish(offsets: Vec<[isize; D]>, faces: Vec<[usize; D]>) -> Self {
        let mut faces_of = vec![Vec::new(); offsets.len()];
        for (f, face) in faces.iter().enumerate() {
            for &v in face {
                faces_of[v].push(f);
            }
        }
        let opposite = offsets
            .iter()
            .map(|o| {
                let neg = o.map(|v| -v);
                offsets.iter().position(|p| *p == neg).expect("stencil is symmetric")
            })
            .collect();
        let links = (0..offsets.len())
            .map(|j| {
                let mut l: Vec<usize> = faces_of[j].iter().flat_map(|&f| faces[f]).filter(|&v| v != j).collect();
                l.sort_unstable();
                l.dedup();
                l
            })
            .collect();
        Self {
            offsets,
            faces,
            faces_of,
            opposite,
            links,
        }
    }
}

impl Stencil<2> {
    #[must_use]
    pub fn ring(wide: bool) -> Self {
        let offsets = ring(wide);
        let n = offsets.len();
        let faces = (0..n).map(|j| [j, (j + 1) % n]).collect();
        Self::finish(offsets, faces)
    }
}

impl Stencil<3> {
    /// Spatial ring at θ-levels −1, 0, +1 plus the two pure rotations.
    #[must_use]
    pub fn prism(wide: bool) -> Self {
        let r = ring(wide);
        let n = r.len();
        let mut offsets = Vec::with_capacity(3 * n + 2);
        for level in [-1isize, 0, 1] {
            offsets.extend(r.iter().map(|o| [o[0], o[1], level]));
        }
        let bottom = offsets.len();
        offsets.push([0, 0, -1]);
        let top = offsets.len();
        offsets.push([0, 0, 1]);
        let at = |level: usize, j: usize| level * n + j % n;
        let mut faces = Vec::with_capacity(6 * n);
        for band in 0..2 {
            for j in 0..n {
                let (l0, l1, h0, h1) = (at(band, j), at(band, j + 1), at(band + 1, j), at(band + 1, j + 1));
                // Diagonals mirror across the middle level.
                if band == 0 {
                    faces.push([l0, l1, h1]);
                    faces.push([l0, h1, h0]);
                } else {
                    faces.push([l0, l1, h0]);
                    faces.push([l1, h1, h0]);
                }
            }
        }
        for j in 0..n {
            faces.push([bottom, at(0, j), at(0, j + 1)]);
            faces.push([top, at(2, j), at(2, j + 1)]);
        }
        Self::finish(offsets, faces)
    }
}
