use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::*;

fn grid(w: usize, h: usize) -> Grid2 {
    Grid2::new(w, h).unwrap()
}

fn circle(c: Point2, r: f64, n: usize) -> Polyline {
    Polyline::closed(
        (0..n)
            .map(|k| {
                let t = k as f64 * std::f64::consts::TAU / n as f64;
                c + Point2::new(t.cos(), t.sin()) * r
            })
            .collect(),
    )
    .unwrap()
}

fn noisy_disk(g: Grid2, c: Point2, r: f64, sigma: f64, seed: u64) -> ImageBuffer {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let vals = (0..g.len())
        .map(|i| {
            let base = if g.node_point(i).distance(c) < r { 0.2 } else { 0.8 };
            // Irwin–Hall approximation of a unit normal.
            let n: f64 = (0..12).map(|_| rng.gen::<f64>()).sum::<f64>() - 6.0;
            base + sigma * n
        })
        .collect();
    ImageBuffer::gray(g, vals).unwrap()
}

fn random_mask(g: Grid2, rng: &mut ChaCha8Rng) -> Mask {
    // Union of a few discs, so the domain has several components and holes.
    let discs: Vec<(Point2, f64)> = (0..4)
        .map(|_| {
            let c = Point2::new(rng.gen_range(0.0..g.width() as f64), rng.gen_range(0.0..g.height() as f64));
            (c, rng.gen_range(3.0..12.0))
        })
        .collect();
    let bits = (0..g.len())
        .map(|i| discs.iter().any(|(c, r)| g.node_point(i).distance(*c) < *r))
        .collect();
    Mask::from_bits(g, bits).unwrap()
}

#[test]
fn means_and_gradient_on_two_level_image() {
    let g = grid(20, 10);
    let img = ImageBuffer::from_fn(g, |x, _| if x < 5 { 0.25 } else { 0.75 }).unwrap();
    let mask = Mask::from_bits(g, (0..g.len()).map(|i| g.coords(i).0 < 8).collect()).unwrap();
    let (mi, mo) = chan_vese_means(&img, &mask).unwrap();
    // Inside: 5 columns at 0.25 and 3 at 0.75.
    assert!((mi - 3.5 / 8.0).abs() < 1e-12);
    assert!((mo - 0.75).abs() < 1e-12);
    let rho = region_gradient(&img, &mask, RegionKind::ChanVese).unwrap().rho;
    let at = |x, y| rho.get(x, y);
    assert!((at(0, 0) - ((0.25 - mi).powi(2) - 0.25)).abs() < 1e-12);
    assert!((at(10, 3) - (0.75 - mi).powi(2)).abs() < 1e-12);

    let empty = Mask::empty(g);
    assert!(matches!(chan_vese_means(&img, &empty), Err(RegionError::DegenerateRegion)));
    assert!(matches!(chan_vese_means(&img, &empty.invert()), Err(RegionError::DegenerateRegion)));
}

#[test]
fn balloon_signs() {
    let g = grid(8, 8);
    let img = ImageBuffer::from_fn(g, |_, _| 0.5).unwrap();
    let m = Mask::empty(g);
    let inflate = region_gradient(&img, &m, RegionKind::Balloon(BalloonSign::Inflate)).unwrap();
    let deflate = region_gradient(&img, &m, RegionKind::Balloon(BalloonSign::Deflate)).unwrap();
    assert!(inflate.rho.values().iter().all(|&v| v == -1.0));
    assert!(deflate.rho.values().iter().all(|&v| v == 1.0));
}

#[test]
fn tube_matches_brute_force_distance() {
    let g = grid(48, 40);
    let curve = Polyline::closed(vec![
        Point2::new(10.0, 8.0),
        Point2::new(36.5, 12.25),
        Point2::new(30.0, 31.0),
        Point2::new(12.0, 27.5),
    ])
    .unwrap();
    for r in [2.0, 4.5, 9.0] {
        let tube = tubular_neighborhood(&curve, r, g).unwrap();
        for i in 0..g.len() {
            assert_eq!(tube.get(i), curve.distance_to(g.node_point(i)) < r, "node {i}, r {r}");
        }
    }
    assert!(matches!(
        tubular_neighborhood(&curve, 1.5, g),
        Err(RegionError::InvalidParameter(_))
    ));
}

#[test]
fn divergence_solve_on_random_masks() {
    let g = grid(64, 56);
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..10 {
        let mask = random_mask(g, &mut rng);
        let rho = ScalarField::from_fn(g, |_, _| rng.gen_range(-2.0..2.0)).unwrap();
        let f = solve_divergence_field(&rho, &mask).unwrap();
        let div = f.divergence();
        let rmax = rho.values().iter().fold(0.0f64, |m, v| m.max(v.abs()));
        for i in mask.indices() {
            assert!((div.values()[i] - rho.values()[i]).abs() <= 1e-6 * rmax);
        }
        assert!(f.residual <= 1e-8 * rmax);
        // The potential vanishes off the mask and the node field with it.
        let theta = f.node_field();
        for i in 0..g.len() {
            if !mask.get(i) {
                assert_eq!(f.potential[i], 0.0);
                assert_eq!(theta.at(i), Point2::default());
            }
        }
    }
}

#[test]
fn radial_divergence_field() {
    let g = grid(81, 81);
    let c = Point2::new(40.0, 40.0);
    let mask = Mask::from_bits(g, (0..g.len()).map(|i| g.node_point(i).distance(c) < 30.0).collect()).unwrap();
    let k = 0.3;
    let f = solve_divergence_field(&ScalarField::constant(g, k), &mask).unwrap();
    let theta = f.node_field();
    for i in mask.indices() {
        let p = g.node_point(i);
        let r = p.distance(c);
        if (3.0..10.0).contains(&r) {
            let v = theta.at(i);
            assert!((v.norm() - k * r / 2.0).abs() <= 0.02 * k * r / 2.0, "r {r}: {}", v.norm());
            // Outward for a positive source.
            assert!(v.dot(p - c) > 0.0);
        }
    }
}

#[test]
fn zero_source_gives_zero_field() {
    let g = grid(16, 16);
    let f = solve_divergence_field(&ScalarField::constant(g, 0.0), &Mask::full(g)).unwrap();
    assert_eq!(f.iterations, 0);
    assert!(f.potential.iter().all(|&v| v == 0.0));
    assert!(matches!(
        solve_divergence_field(&ScalarField::constant(g, 1.0), &Mask::empty(g)),
        Err(RegionError::InvalidParameter(_))
    ));
}

#[test]
fn remap_rejects_bad_gain() {
    let v = VectorField2::zeros(grid(4, 4));
    for a in [0.0, -1.0, f64::NAN, f64::INFINITY] {
        assert!(remap_field(&v, a).is_err());
    }
}

fn disk_setup(seed: u64) -> (ImageBuffer, Polyline, Vec<Point2>) {
    let g = grid(96, 96);
    let c = Point2::new(48.0, 48.0);
    let img = noisy_disk(g, c, 24.0, 0.05, seed);
    let verts = [-90.0f64, 30.0, 150.0]
        .iter()
        .map(|a| c + Point2::from_angle(a.to_radians()) * 24.0)
        .collect();
    (img, circle(c, 24.0, 720), verts)
}

#[test]
fn vertex_order_is_normalized() {
    let (img, _, verts) = disk_setup(1);
    let a = EvolutionState::new(&img, &verts, EvolutionParams::default()).unwrap();
    let rev = vec![verts[0], verts[2], verts[1]];
    let b = EvolutionState::new(&img, &rev, EvolutionParams::default()).unwrap();
    assert_eq!(a.vertices, b.vertices);
    assert!(a.curve.signed_area() > 0.0);
    assert_eq!(a.vertices[0], verts[0]);
}

#[test]
fn state_rejects_bad_input() {
    let (img, _, verts) = disk_setup(1);
    let p = EvolutionParams::default();
    assert!(EvolutionState::new(&img, &verts[..2], p.clone()).is_err());
    let outside = vec![verts[0], verts[1], Point2::new(200.0, 3.0)];
    assert!(EvolutionState::new(&img, &outside, p.clone()).is_err());
    let bowtie = vec![
        Point2::new(10.0, 10.0),
        Point2::new(40.0, 40.0),
        Point2::new(40.0, 10.0),
        Point2::new(10.0, 40.0),
    ];
    assert!(EvolutionState::new(&img, &bowtie, p.clone()).is_err());
    for bad in [
        EvolutionParams { tube_radius: 1.0, ..p.clone() },
        EvolutionParams { alpha: 0.0, ..p.clone() },
        EvolutionParams { beta: -1.0, ..p.clone() },
        EvolutionParams { tolerance: 0.0, ..p.clone() },
    ] {
        assert!(matches!(EvolutionState::new(&img, &verts, bad), Err(RegionError::InvalidParameter(_))));
    }
}

#[test]
fn cells_partition_the_tube() {
    let (img, _, verts) = disk_setup(2);
    let st = EvolutionState::new(&img, &verts, EvolutionParams::default()).unwrap();
    let tube = tubular_neighborhood(&st.curve, st.params.tube_radius, img.grid()).unwrap();
    let cells = subpath_cells(&st, &tube);
    let g = img.grid();
    for i in 0..g.len() {
        if !tube.get(i) {
            assert_eq!(cells[i], u32::MAX);
            continue;
        }
        let p = g.node_point(i);
        let dists: Vec<f64> = (0..3)
            .map(|s| Polyline::open(st.subpath(s)).unwrap().distance_to(p))
            .collect();
        let l = cells[i] as usize;
        assert!(dists.iter().all(|&d| dists[l] <= d + 1e-12));
    }
}

#[test]
fn disk_evolution_converges() {
    let (img, truth, verts) = disk_setup(3);
    let res = run_evolution(&verts, &img, EvolutionParams { max_iters: 30, ..Default::default() }).unwrap();
    assert!(res.converged);
    let st = &res.state;
    assert!(hausdorff(&st.curve, &truth) <= 2.0);
    for rec in &st.history {
        assert!(rec.max_varpi < 1.0);
    }
    // Each traced segment starts at its vertex.
    for (a, v) in st.anchors.iter().zip(&st.vertices) {
        assert!(st.curve.points()[*a].distance(*v) < 1e-9);
    }
    // The linearized objective never increases across a step.
    let first = &st.history[0];
    assert!(first.surrogate_after < first.surrogate_before);
}

#[test]
fn balloon_inflates_from_a_small_triangle() {
    let g = grid(64, 64);
    let img = ImageBuffer::from_fn(g, |_, _| 0.5).unwrap();
    let c = Point2::new(32.0, 32.0);
    let verts: Vec<Point2> = [-90.0f64, 30.0, 150.0]
        .iter()
        .map(|a| c + Point2::from_angle(a.to_radians()) * 10.0)
        .collect();
    let params = EvolutionParams { kind: RegionKind::Balloon(BalloonSign::Inflate), ..Default::default() };
    let st = EvolutionState::new(&img, &verts, params).unwrap();
    let next = evolve_step(&st, &img).unwrap();
    assert!(next.curve.signed_area() > st.curve.signed_area());
}

#[test]
fn vertex_resampling_spreads_vertices() {
    let (img, _, verts) = disk_setup(4);
    let params = EvolutionParams { resample_vertices: true, ..Default::default() };
    let st = EvolutionState::new(&img, &verts, params).unwrap();
    let next = evolve_step(&st, &img).unwrap();
    assert_eq!(next.vertices.len(), 3);
    assert_eq!(next.vertices[0], verts[0]);
    let lens: Vec<f64> = (0..3).map(|i| Polyline::open(next.subpath(i)).unwrap().length()).collect();
    let total: f64 = lens.iter().sum();
    for l in lens {
        assert!((l - total / 3.0).abs() < 1e-6 * total);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn remap_is_strictly_bounded(
        vals in prop::collection::vec((-1e3f64..1e3, -1e3f64..1e3), 16),
        gain in 1e-3f64..1e3,
    ) {
        let g = grid(4, 4);
        let (vx, vy): (Vec<f64>, Vec<f64>) = vals.into_iter().unzip();
        let theta = VectorField2::new(g, vx, vy).unwrap();
        let w = remap_field(&theta, gain).unwrap();
        for i in 0..g.len() {
            let (a, b) = (theta.at(i), w.at(i));
            prop_assert!(b.norm() < 1.0);
            // Direction is preserved.
            prop_assert!(a.cross(b).abs() <= 1e-9 * a.norm().max(1.0));
            prop_assert!(a.dot(b) >= 0.0);
        }
    }

    #[test]
    fn divergence_identity_holds(seed in 0u64..1000) {
        let g = grid(24, 20);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mask = random_mask(g, &mut rng);
        let rho = ScalarField::from_fn(g, |_, _| rng.gen_range(-1.0..1.0)).unwrap();
        let f = solve_divergence_field(&rho, &mask).unwrap();
        let div = f.divergence();
        for i in mask.indices() {
            prop_assert!((div.values()[i] - rho.values()[i]).abs() <= 1e-6);
        }
    }
}
