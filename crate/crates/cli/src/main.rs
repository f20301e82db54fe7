//! `minpath`: geodesic distances, minimal paths and region evolution from
//! the command line.

use std::fs;
use std::net::{IpAddr, SocketAddr};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use minpath_core::config::{build_metric, BuiltMetric, MetricName, MetricParams, ScoreSource};
use minpath_core::curve::Polyline;
use minpath_core::eikonal::{self, residual, DistanceMap, Lattice, Seed, SolveRequest, StencilKind, StopRule};
use minpath_core::error::{EikonalError, IoError, MetricError, RegionError, TraceError};
use minpath_core::features::{alignment_vector, gradient_magnitude, ColorMode, ImageBuffer};
use minpath_core::geodesic::{trace_between, trace_between_lifted, TraceConfig};
use minpath_core::grid::{LiftedPoint, Point2};
use minpath_core::io::{load_field, load_image, save_field, save_overlay, save_path, PathFile, StoredField};
use minpath_core::region::{evolve_step, BalloonSign, EvolutionParams, EvolutionState, RegionKind};
use serde_json::json;

#[derive(Debug, Parser)]
#[command(name = "minpath", version, about = "Minimal geodesic paths and region evolution on images")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Gradient magnitude and alignment field.
    Features {
        image: PathBuf,
        #[arg(long, default_value_t = 1.0)]
        sigma: f64,
        #[arg(long, value_enum, default_value_t = ColorArg::Sum)]
        color_mode: ColorArg,
        #[arg(long)]
        out_g: PathBuf,
        #[arg(long)]
        out_xi: PathBuf,
    },
    /// Geodesic distance map from one seed.
    Distance {
        image: PathBuf,
        #[command(flatten)]
        metric: MetricArgs,
        #[arg(long, value_parser = parse_point)]
        seed: Coords,
        /// Stop once this point is reached.
        #[arg(long, value_parser = parse_point)]
        stop_at: Option<Coords>,
        #[arg(long, value_enum, default_value_t = StencilArg::Auto)]
        stencil: StencilArg,
        #[arg(long)]
        out: PathBuf,
    },
    /// Minimal path between two points.
    Path {
        image: PathBuf,
        #[command(flatten)]
        metric: MetricArgs,
        #[arg(long, value_parser = parse_point)]
        seed: Coords,
        #[arg(long, value_parser = parse_point)]
        target: Coords,
        #[arg(long)]
        out: PathBuf,
        /// PNG or SVG rendering of the path over the image.
        #[arg(long)]
        overlay: Option<PathBuf>,
    },
    /// Region-driven contour evolution from a closed polygon.
    Segment {
        image: PathBuf,
        /// Polygon vertices as `x1,y1:x2,y2:...`.
        #[arg(long, value_parser = parse_vertices)]
        vertices: Vertices,
        #[arg(long, default_value_t = 12.0)]
        r: f64,
        #[arg(long, default_value_t = 1.0)]
        alpha: f64,
        #[arg(long, default_value_t = 10.0)]
        beta: f64,
        #[arg(long, default_value_t = 1.0)]
        sigma: f64,
        #[arg(long, default_value_t = 50)]
        max_iters: usize,
        #[arg(long, default_value_t = 0.5)]
        tolerance: f64,
        /// Replace the piecewise-constant region term by a balloon force.
        #[arg(long, value_enum)]
        balloon: Option<BalloonArg>,
        #[arg(long)]
        out: PathBuf,
        /// Write the curve of every iteration here as JSON and PNG.
        #[arg(long)]
        frames: Option<PathBuf>,
    },
    /// Eikonal residual of a stored distance map.
    Residual {
        distance: PathBuf,
        /// Image the metric is built from.
        #[arg(long)]
        image: PathBuf,
        #[command(flatten)]
        metric: MetricArgs,
        /// Seed of the distance map; zero-valued nodes are used otherwise.
        #[arg(long, value_parser = parse_point)]
        seed: Option<Coords>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run the HTTP service.
    Serve {
        #[arg(long, default_value_t = 8080)]
        port: u16,
        #[arg(long, default_value = "127.0.0.1")]
        host: IpAddr,
        #[arg(long)]
        cors_origin: Option<String>,
    },
}

#[derive(Debug, Args)]
struct MetricArgs {
    #[arg(long, value_enum, default_value_t = MetricArg::Iso)]
    metric: MetricArg,
    #[arg(long)]
    beta: Option<f64>,
    #[arg(long)]
    lambda: Option<f64>,
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long)]
    sigma: Option<f64>,
    #[arg(long)]
    ntheta: Option<usize>,
    /// Orientation score for the elastica metric.
    #[arg(long, value_enum, default_value_t = ScoreArg::None)]
    score: ScoreArg,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum MetricArg {
    Iso,
    RiemAlign,
    RandersAlign,
    Elastica,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum ScoreArg {
    None,
    Edge,
    Tube,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum ColorArg {
    Sum,
    Eigen,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum StencilArg {
    Auto,
    Ring8,
    Ring16,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum BalloonArg {
    Inflate,
    Deflate,
}

impl MetricArgs {
    fn name(&self) -> MetricName {
        match self.metric {
            MetricArg::Iso => MetricName::Iso,
            MetricArg::RiemAlign => MetricName::RiemAlign,
            MetricArg::RandersAlign => MetricName::RandersAlign,
            MetricArg::Elastica => MetricName::Elastica,
        }
    }

    fn params(&self) -> MetricParams {
        let d = MetricParams::default();
        MetricParams {
            sigma: self.sigma.unwrap_or(d.sigma),
            beta: self.beta.unwrap_or(d.beta),
            lambda: self.lambda.unwrap_or(d.lambda),
            alpha: self.alpha.unwrap_or(d.alpha),
            n_theta: self.ntheta.unwrap_or(d.n_theta),
            score: match self.score {
                ScoreArg::None => ScoreSource::None,
                ScoreArg::Edge => ScoreSource::Edge,
                ScoreArg::Tube => ScoreSource::Tube,
            },
            radii: d.radii,
        }
    }

    fn build(&self, img: &ImageBuffer) -> Result<BuiltMetric, Failure> {
        Ok(build_metric(img, self.name(), &self.params())?)
    }
}

impl From<StencilArg> for StencilKind {
    fn from(s: StencilArg) -> Self {
        match s {
            StencilArg::Auto => Self::Auto,
            StencilArg::Ring8 => Self::Ring8,
            StencilArg::Ring16 => Self::Ring16,
        }
    }
}

/// Failure classified by exit code.
#[derive(Debug)]
enum Failure {
    /// Bad input or arguments (exit 2).
    Invalid(String),
    /// The computation itself failed (exit 3).
    Runtime(String),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Self::Invalid(_) => 2,
            Self::Runtime(_) => 3,
        }
    }
}

impl std::fmt::Display for Failure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Self::Invalid(m) | Self::Runtime(m) => f.write_str(m),
        }
    }
}

impl From<minpath_core::Error> for Failure {
    fn from(e: minpath_core::Error) -> Self {
        use minpath_core::Error as E;
        let msg = e.to_string();
        let invalid = match &e {
            E::Grid(_) => true,
            E::Metric(m) => matches!(m, MetricError::InvalidParameter(_) | MetricError::Grid(_)),
            E::Eikonal(x) => matches!(x, EikonalError::NoSeeds | EikonalError::SeedOutsideGrid(_)),
            E::Trace(t) => matches!(t, TraceError::InvalidConfig(_) | TraceError::OutsideGrid(_)),
            E::Region(r) => matches!(r, RegionError::InvalidParameter(_) | RegionError::Grid(_)),
            E::Io(IoError::Io(_)) => false,
            E::Io(_) => true,
        };
        if invalid {
            Self::Invalid(msg)
        } else {
            Self::Runtime(msg)
        }
    }
}

macro_rules! failure_from {
    ($($t:ty),*) => {$(
        impl From<$t> for Failure {
            fn from(e: $t) -> Self {
                minpath_core::Error::from(e).into()
            }
        }
    )*};
}

failure_from!(
    minpath_core::error::GridError,
    MetricError,
    EikonalError,
    TraceError,
    RegionError,
    IoError
);

/// A point given as `x,y` or `x,y,theta`.
#[derive(Debug, Clone)]
struct Coords(Vec<f64>);

#[derive(Debug, Clone)]
struct Vertices(Vec<Point2>);

fn parse_point(s: &str) -> Result<Coords, String> {
    let v = s
        .split(',')
        .map(|c| c.trim().parse::<f64>().map_err(|e| format!("bad coordinate '{c}': {e}")))
        .collect::<Result<Vec<_>, _>>()?;
    if !(v.len() == 2 || v.len() == 3) || v.iter().any(|c| !c.is_finite()) {
        return Err(format!("expected x,y or x,y,theta, got '{s}'"));
    }
    Ok(Coords(v))
}

fn parse_vertices(s: &str) -> Result<Vertices, String> {
    s.split(':')
        .map(|p| match parse_point(p)?.0.as_slice() {
            &[x, y] => Ok(Point2::new(x, y)),
            _ => Err(format!("vertex '{p}' must be x,y")),
        })
        .collect::<Result<_, _>>()
        .map(Vertices)
}

/// Inputs that cannot be read are the caller's mistake, not a runtime failure.
fn input<T>(path: &Path, load: impl FnOnce(&Path) -> Result<T, IoError>) -> Result<T, Failure> {
    load(path).map_err(|e| Failure::Invalid(format!("{}: {e}", path.display())))
}

fn planar(v: &[f64], what: &str) -> Result<Point2, Failure> {
    match *v {
        [x, y] => Ok(Point2::new(x, y)),
        _ => Err(Failure::Invalid(format!("{what} must be x,y for a planar metric"))),
    }
}

fn lifted(v: &[f64], what: &str) -> Result<LiftedPoint, Failure> {
    match *v {
        [x, y, t] => Ok(LiftedPoint::new(x, y, t)),
        _ => Err(Failure::Invalid(format!("{what} must be x,y,theta for the elastica metric"))),
    }
}

fn features(image: &Path, sigma: f64, mode: ColorArg, out_g: &Path, out_xi: &Path) -> Result<(), Failure> {
    let img = input(image, load_image)?;
    let g = gradient_magnitude(&img, sigma)?;
    let mode = match mode {
        ColorArg::Sum => ColorMode::Sum,
        ColorArg::Eigen => ColorMode::Eigen,
    };
    let xi = alignment_vector(&img, sigma, mode)?;
    save_field(&StoredField::scalar(g.grid(), g.values(), "gradient_magnitude")?, out_g)?;
    save_field(&StoredField::vector(&xi, "alignment")?, out_xi)?;
    Ok(())
}

fn distance(
    image: &Path,
    metric: &MetricArgs,
    seed: &[f64],
    stop_at: Option<&[f64]>,
    stencil: StencilKind,
    out: &Path,
) -> Result<(), Failure> {
    let img = input(image, load_image)?;
    let (field, stats) = match metric.build(&img)? {
        BuiltMetric::Planar(m) => {
            let mut req = SolveRequest::from_point(planar(seed, "--seed")?).with_stencil(stencil);
            if let Some(t) = stop_at {
                req = req.with_stop(StopRule::FirstReached(vec![planar(t, "--stop-at")?.to_array()]));
            }
            let dm = eikonal::solve(&m, &req)?;
            (StoredField::scalar(img.grid(), dm.values(), "distance")?, dm.stats())
        }
        BuiltMetric::Lifted { metric: m, .. } => {
            let mut req = SolveRequest::single(lifted(seed, "--seed")?.to_array()).with_stencil(stencil);
            if let Some(t) = stop_at {
                req = req.with_stop(StopRule::FirstReached(vec![lifted(t, "--stop-at")?.to_array()]));
            }
            let dm = eikonal::solve_lifted(&m, &req)?;
            (StoredField::lifted(m.grid(), dm.values(), "distance")?, dm.stats())
        }
    };
    save_field(&field, out)?;
    println!(
        "{}",
        json!({ "accepted": stats.accepted, "reinsertions": stats.reinsertions, "monotone_violations": stats.monotone_violations })
    );
    Ok(())
}

fn path(
    image: &Path,
    metric: &MetricArgs,
    seed: &[f64],
    target: &[f64],
    out: &Path,
    overlay: Option<&Path>,
) -> Result<(), Failure> {
    let img = input(image, load_image)?;
    let cfg = TraceConfig::default();
    let (file, projected, distance) = match metric.build(&img)? {
        BuiltMetric::Planar(m) => {
            let gp = trace_between(&m, planar(seed, "--seed")?, planar(target, "--target")?, true, &cfg)?;
            let line = gp.polyline()?;
            (PathFile::from_polyline(&line), line, gp.distances.last().copied().unwrap_or(0.0))
        }
        BuiltMetric::Lifted { metric: m, .. } => {
            let gp = trace_between_lifted(&m, lifted(seed, "--seed")?, lifted(target, "--target")?, true, &cfg)?;
            let lp = gp.lifted()?;
            (PathFile::from_lifted(&lp), lp.project()?, gp.distances.last().copied().unwrap_or(0.0))
        }
    };
    save_path(&file, out)?;
    if let Some(o) = overlay {
        save_overlay(&img, &[projected], o)?;
    }
    println!("{}", json!({ "points": file.points.len(), "distance": distance }));
    Ok(())
}

fn segment(
    image: &Path,
    vertices: &[Point2],
    params: EvolutionParams,
    out: &Path,
    frames: Option<&Path>,
) -> Result<(), Failure> {
    let img = input(image, load_image)?;
    let mut state = EvolutionState::new(&img, vertices, params)?;
    if let Some(dir) = frames {
        fs::create_dir_all(dir).map_err(|e| Failure::Runtime(format!("{}: {e}", dir.display())))?;
        write_frame(&img, &state.curve, dir, 0)?;
    }
    let mut converged = false;
    while state.history.len() < state.params.max_iters {
        state = evolve_step(&state, &img)?;
        let rec = state.last_record().expect("a step records its iteration");
        eprintln!("iteration {}: hausdorff step {:.4}, energy {:.4}", rec.k, rec.hausdorff_step, rec.energy);
        if let Some(dir) = frames {
            write_frame(&img, &state.curve, dir, rec.k)?;
        }
        if state.converged() {
            converged = true;
            break;
        }
    }
    save_path(&PathFile::from_polyline(&state.curve), out)?;
    println!(
        "{}",
        json!({
            "iterations": state.history.len(),
            "converged": converged,
            "hausdorff_step": state.last_record().map(|r| r.hausdorff_step),
        })
    );
    Ok(())
}

fn write_frame(img: &ImageBuffer, curve: &Polyline, dir: &Path, k: usize) -> Result<(), Failure> {
    save_path(&PathFile::from_polyline(curve), &dir.join(format!("frame_{k:03}.json")))?;
    save_overlay(img, std::slice::from_ref(curve), &dir.join(format!("frame_{k:03}.png")))?;
    Ok(())
}

fn residual_cmd(
    distance: &Path,
    image: &Path,
    metric: &MetricArgs,
    seed: Option<&[f64]>,
    out: &Path,
) -> Result<(), Failure> {
    let stored = input(distance, load_field)?;
    let img = input(image, load_image)?;
    let values = stored.values();
    let h = &stored.header;
    if (h.w, h.h) != (img.grid().width(), img.grid().height()) || h.c != 1 {
        return Err(Failure::Invalid(format!(
            "distance field is {}x{}x{}, image is {}x{}",
            h.w,
            h.h,
            h.c,
            img.grid().width(),
            img.grid().height()
        )));
    }
    let (res, field) = match metric.build(&img)? {
        BuiltMetric::Planar(m) => {
            if h.t.is_some() {
                return Err(Failure::Invalid("lifted distance field given for a planar metric".into()));
            }
            let lattice = Lattice::planar(img.grid());
            let seeds = seeds_for(&lattice, &values, seed.map(|s| planar(s, "--seed")).transpose()?.map(Point2::to_array));
            let dm = DistanceMap::from_values(lattice, values, seeds);
            let r = residual(&dm, &m);
            let field = StoredField::scalar(img.grid(), &r.values, "residual")?;
            (r, field)
        }
        BuiltMetric::Lifted { metric: m, .. } => {
            if h.t != Some(m.grid().n_theta()) {
                return Err(Failure::Invalid(format!(
                    "distance field has {:?} orientations, metric has {}",
                    h.t,
                    m.grid().n_theta()
                )));
            }
            let lattice = Lattice::lifted(m.grid());
            let seeds = seeds_for(&lattice, &values, seed.map(|s| lifted(s, "--seed")).transpose()?.map(LiftedPoint::to_array));
            let dm = DistanceMap::from_values(lattice, values, seeds);
            let r = residual(&dm, &m);
            let field = StoredField::lifted(m.grid(), &r.values, "residual")?;
            (r, field)
        }
    };
    save_field(&field, out)?;
    println!(
        "{}",
        json!({ "evaluated": res.evaluated().len(), "median": res.median(), "max": res.max() })
    );
    Ok(())
}

fn seeds_for<const D: usize>(lattice: &Lattice<D>, values: &[f64], seed: Option<[f64; D]>) -> Vec<Seed<D>> {
    match seed {
        Some(p) => vec![Seed::new(p, 0)],
        None => values
            .iter()
            .enumerate()
            .filter(|(_, &v)| v == 0.0)
            .map(|(i, _)| Seed::new(lattice.position(i), 0))
            .collect(),
    }
}

fn serve(host: IpAddr, port: u16, cors_origin: Option<&str>) -> Result<(), Failure> {
    if let Some(o) = cors_origin {
        minpath_service::cors(o).map_err(|e| Failure::Invalid(e.to_string())).map(drop)?;
    }
    let rt = tokio::runtime::Runtime::new().map_err(|e| Failure::Runtime(e.to_string()))?;
    let addr = SocketAddr::new(host, port);
    eprintln!("listening on http://{addr}/api/v1");
    rt.block_on(minpath_service::serve(addr, cors_origin, minpath_service::Limits::default()))
        .map_err(|e| Failure::Runtime(e.to_string()))
}

fn run(cli: Cli) -> Result<(), Failure> {
    match cli.command {
        Command::Features {
            image,
            sigma,
            color_mode,
            out_g,
            out_xi,
        } => features(&image, sigma, color_mode, &out_g, &out_xi),
        Command::Distance {
            image,
            metric,
            seed,
            stop_at,
            stencil,
            out,
        } => distance(&image, &metric, &seed.0, stop_at.as_ref().map(|c| c.0.as_slice()), stencil.into(), &out),
        Command::Path {
            image,
            metric,
            seed,
            target,
            out,
            overlay,
        } => path(&image, &metric, &seed.0, &target.0, &out, overlay.as_deref()),
        Command::Segment {
            image,
            vertices,
            r,
            alpha,
            beta,
            sigma,
            max_iters,
            tolerance,
            balloon,
            out,
            frames,
        } => {
            let params = EvolutionParams {
                tube_radius: r,
                alpha,
                beta,
                sigma,
                max_iters,
                tolerance,
                kind: match balloon {
                    None => RegionKind::ChanVese,
                    Some(BalloonArg::Inflate) => RegionKind::Balloon(BalloonSign::Inflate),
                    Some(BalloonArg::Deflate) => RegionKind::Balloon(BalloonSign::Deflate),
                },
                ..EvolutionParams::default()
            };
            segment(&image, &vertices.0, params, &out, frames.as_deref())
        }
        Command::Residual {
            distance,
            image,
            metric,
            seed,
            out,
        } => residual_cmd(&distance, &image, &metric, seed.as_ref().map(|c| c.0.as_slice()), &out),
        Command::Serve { port, host, cors_origin } => serve(host, port, cors_origin.as_deref()),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("minpath: {e}");
            ExitCode::from(e.code())
        }
    }
}
