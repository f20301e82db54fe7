//! File formats: images in, raw fields, JSON paths and overlays out.

use std::fs;
use std::io::{Cursor, Write as _};
use std::path::Path;

use base64::Engine as _;
use image::{DynamicImage, ImageFormat, Rgb, RgbImage};
use serde::{Deserialize, Serialize};

use crate::curve::{LiftedPath, Polyline};
use crate::error::IoError;
use crate::features::ImageBuffer;
use crate::grid::{Grid2, LiftedGrid3, LiftedPoint, Point2, ScalarField, VectorField2};

fn extension(path: &Path) -> String {
    path.extension()
        .and_then(|e| e.to_str())
        .map(str::to_ascii_lowercase)
        .unwrap_or_default()
}

/// Decode a PNG or binary PGM/PPM image to `[0, 1]`.
pub fn load_image(path: &Path) -> Result<ImageBuffer, IoError> {
    let bytes = fs::read(path)?;
    decode_image(&bytes)
}

pub fn decode_image(bytes: &[u8]) -> Result<ImageBuffer, IoError> {
    match bytes {
        [b'P', b'5', ..] | [b'P', b'6', ..] => decode_pnm(bytes),
        [0x89, b'P', b'N', b'G', ..] => decode_png(bytes),
        _ => Err(IoError::UnsupportedFormat("expected PNG, PGM (P5) or PPM (P6)".into())),
    }
}

struct PnmReader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl PnmReader<'_> {
    fn skip_space(&mut self) {
        while let Some(&b) = self.bytes.get(self.pos) {
            if b == b'#' {
                while self.bytes.get(self.pos).is_some_and(|&c| c != b'\n') {
                    self.pos += 1;
                }
            } else if b.is_ascii_whitespace() {
                self.pos += 1;
            } else {
                break;
            }
        }
    }

    fn number(&mut self) -> Result<usize, IoError> {
        self.skip_space();
        let start = self.pos;
        while self.bytes.get(self.pos).is_some_and(u8::is_ascii_digit) {
            self.pos += 1;
        }
        std::str::from_utf8(&self.bytes[start..self.pos])
            .ok()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| IoError::CorruptFile("malformed PNM header".into()))
    }
}

fn decode_pnm(bytes: &[u8]) -> Result<ImageBuffer, IoError> {
    let channels = if bytes[1] == b'5' { 1 } else { 3 };
    let mut r = PnmReader { bytes, pos: 2 };
    let (w, h, maxval) = (r.number()?, r.number()?, r.number()?);
    if !(1..=65535).contains(&maxval) {
        return Err(IoError::CorruptFile(format!("maxval {maxval} out of range")));
    }
    // Exactly one whitespace byte separates the header from the raster.
    if !bytes.get(r.pos).is_some_and(u8::is_ascii_whitespace) {
        return Err(IoError::CorruptFile("missing raster separator".into()));
    }
    let raster = &bytes[r.pos + 1..];
    let grid = Grid2::new(w, h)?;
    let bps = if maxval > 255 { 2 } else { 1 };
    let need = w * h * channels * bps;
    if raster.len() < need {
        return Err(IoError::CorruptFile(format!("raster has {} bytes, expected {need}", raster.len())));
    }
    let sample = |i: usize| -> f64 {
        let v = if bps == 2 {
            u16::from_be_bytes([raster[2 * i], raster[2 * i + 1]]) as f64
        } else {
            raster[i] as f64
        };
        v / maxval as f64
    };
    // Interleaved on disk, planar in memory.
    let mut data = vec![0.0; w * h * channels];
    for p in 0..w * h {
        for c in 0..channels {
            data[c * w * h + p] = sample(p * channels + c);
        }
    }
    Ok(ImageBuffer::new(grid, channels, data)?)
}

fn decode_png(bytes: &[u8]) -> Result<ImageBuffer, IoError> {
    let img = image::load_from_memory_with_format(bytes, ImageFormat::Png)
        .map_err(|e| IoError::CorruptFile(e.to_string()))?;
    let grid = Grid2::new(img.width() as usize, img.height() as usize)?;
    let n = grid.len();
    let gray = matches!(
        img,
        DynamicImage::ImageLuma8(_) | DynamicImage::ImageLuma16(_) | DynamicImage::ImageLumaA8(_) | DynamicImage::ImageLumaA16(_)
    );
    if gray {
        let buf = img.into_luma16();
        let data = buf.as_raw().iter().map(|&v| v as f64 / 65535.0).collect();
        Ok(ImageBuffer::gray(grid, data)?)
    } else {
        let buf = img.into_rgb16();
        let raw = buf.as_raw();
        let mut data = vec![0.0; 3 * n];
        for p in 0..n {
            for c in 0..3 {
                data[c * n + p] = raw[3 * p + c] as f64 / 65535.0;
            }
        }
        Ok(ImageBuffer::new(grid, 3, data)?)
    }
}

/// One-line header preceding a raw field payload.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FieldHeader {
    pub w: usize,
    pub h: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t: Option<usize>,
    pub kind: String,
    /// Interleaved components per node (2 for vector fields).
    #[serde(default = "one", skip_serializing_if = "is_one")]
    pub c: usize,
}

fn one() -> usize {
    1
}

#[allow(clippy::trivially_copy_pass_by_ref)]
fn is_one(c: &usize) -> bool {
    *c == 1
}

impl FieldHeader {
    #[must_use]
    pub fn payload_len(&self) -> usize {
        self.w * self.h * self.t.unwrap_or(1) * self.c
    }
}

/// A field as stored on disk: 32-bit floats, x fastest, then y, then θ,
/// components interleaved.
#[derive(Debug, Clone, PartialEq)]
pub struct StoredField {
    pub header: FieldHeader,
    pub data: Vec<f32>,
}

impl StoredField {
    pub fn new(header: FieldHeader, data: Vec<f32>) -> Result<Self, IoError> {
        if header.payload_len() != data.len() {
            return Err(IoError::HeaderMismatch(format!(
                "header implies {} values, got {}",
                header.payload_len(),
                data.len()
            )));
        }
        Ok(Self { header, data })
    }

    /// Values may be non-finite (unreached distances are `+∞`).
    pub fn scalar(grid: Grid2, values: &[f64], kind: &str) -> Result<Self, IoError> {
        Self::new(
            FieldHeader { w: grid.width(), h: grid.height(), t: None, kind: kind.into(), c: 1 },
            values.iter().map(|&v| v as f32).collect(),
        )
    }

    pub fn lifted(grid: LiftedGrid3, values: &[f64], kind: &str) -> Result<Self, IoError> {
        let b = grid.base();
        Self::new(
            FieldHeader { w: b.width(), h: b.height(), t: Some(grid.n_theta()), kind: kind.into(), c: 1 },
            values.iter().map(|&v| v as f32).collect(),
        )
    }

    pub fn vector(field: &VectorField2, kind: &str) -> Result<Self, IoError> {
        let g = field.grid();
        let data = field.vx().iter().zip(field.vy()).flat_map(|(&x, &y)| [x as f32, y as f32]).collect();
        Self::new(FieldHeader { w: g.width(), h: g.height(), t: None, kind: kind.into(), c: 2 }, data)
    }

    pub fn grid(&self) -> Result<Grid2, IoError> {
        Ok(Grid2::new(self.header.w, self.header.h)?)
    }

    pub fn to_scalar(&self) -> Result<ScalarField, IoError> {
        if self.header.t.is_some() || self.header.c != 1 {
            return Err(IoError::HeaderMismatch(format!("'{}' is not a planar scalar field", self.header.kind)));
        }
        Ok(ScalarField::new(self.grid()?, self.values())?)
    }

    pub fn to_vector(&self) -> Result<VectorField2, IoError> {
        if self.header.t.is_some() || self.header.c != 2 {
            return Err(IoError::HeaderMismatch(format!("'{}' is not a planar vector field", self.header.kind)));
        }
        let (vx, vy) = self.data.chunks_exact(2).map(|p| (p[0] as f64, p[1] as f64)).unzip();
        Ok(VectorField2::new(self.grid()?, vx, vy)?)
    }

    #[must_use]
    pub fn values(&self) -> Vec<f64> {
        self.data.iter().map(|&v| v as f64).collect()
    }
}

pub fn encode_field(field: &StoredField) -> Result<Vec<u8>, IoError> {
    let mut out = serde_json::to_vec(&field.header)?;
    out.push(b'\n');
    out.reserve(4 * field.data.len());
    for v in &field.data {
        out.extend_from_slice(&v.to_le_bytes());
    }
    Ok(out)
}

pub fn decode_field(bytes: &[u8]) -> Result<StoredField, IoError> {
    let nl = bytes
        .iter()
        .position(|&b| b == b'\n')
        .ok_or_else(|| IoError::CorruptFile("field header is not newline-terminated".into()))?;
    let header: FieldHeader = serde_json::from_slice(&bytes[..nl])?;
    let payload = &bytes[nl + 1..];
    if payload.len() != 4 * header.payload_len() {
        return Err(IoError::HeaderMismatch(format!(
            "header implies {} payload bytes, found {}",
            4 * header.payload_len(),
            payload.len()
        )));
    }
    let data = payload.chunks_exact(4).map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]])).collect();
    StoredField::new(header, data)
}

pub fn save_field(field: &StoredField, path: &Path) -> Result<(), IoError> {
    Ok(fs::write(path, encode_field(field)?)?)
}

pub fn load_field(path: &Path) -> Result<StoredField, IoError> {
    decode_field(&fs::read(path)?)
}

/// Round to 9 decimals, i.e. within 5e-10 of the input.
fn round9(v: f64) -> f64 {
    if !v.is_finite() {
        return v;
    }
    format!("{v:.9}").parse().unwrap_or(v)
}

/// JSON form of a planar or lifted path.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PathFile {
    pub closed: bool,
    pub points: Vec<Vec<f64>>,
}

impl PathFile {
    #[must_use]
    pub fn from_polyline(p: &Polyline) -> Self {
        Self {
            closed: p.is_closed(),
            points: p.points().iter().map(|q| vec![round9(q.x), round9(q.y)]).collect(),
        }
    }

    #[must_use]
    pub fn from_lifted(p: &LiftedPath) -> Self {
        Self {
            closed: false,
            points: p.points().iter().map(|q| vec![round9(q.x), round9(q.y), round9(q.theta)]).collect(),
        }
    }

    fn dim(&self) -> Result<usize, IoError> {
        let d = self.points.first().map_or(0, Vec::len);
        if self.points.is_empty() {
            return Err(IoError::CorruptFile("path has no points".into()));
        }
        if !(d == 2 || d == 3) || self.points.iter().any(|p| p.len() != d) {
            return Err(IoError::CorruptFile("points must all be [x,y] or [x,y,theta]".into()));
        }
        Ok(d)
    }

    pub fn to_polyline(&self) -> Result<Polyline, IoError> {
        self.dim()?;
        let pts = self.points.iter().map(|p| Point2::new(p[0], p[1])).collect();
        Ok(Polyline::new(pts, self.closed)?)
    }

    pub fn to_lifted(&self) -> Result<LiftedPath, IoError> {
        if self.dim()? != 3 {
            return Err(IoError::CorruptFile("path has no orientation component".into()));
        }
        Ok(LiftedPath::new(self.points.iter().map(|p| LiftedPoint::new(p[0], p[1], p[2])).collect())?)
    }
}

pub fn save_path(path_data: &PathFile, path: &Path) -> Result<(), IoError> {
    if path_data.points.is_empty() {
        return Err(IoError::CorruptFile("refusing to write an empty path".into()));
    }
    let mut f = fs::File::create(path)?;
    serde_json::to_writer(&mut f, path_data)?;
    f.write_all(b"\n")?;
    Ok(())
}

pub fn load_path(path: &Path) -> Result<PathFile, IoError> {
    let p: PathFile = serde_json::from_slice(&fs::read(path)?)?;
    p.dim()?;
    Ok(p)
}

const PALETTE: [[u8; 3]; 6] = [[230, 41, 55], [0, 158, 255], [253, 217, 0], [0, 200, 83], [200, 60, 255], [255, 140, 0]];

fn to_rgb8(img: &ImageBuffer) -> RgbImage {
    let g = img.grid();
    let rgb = img.to_rgb();
    let q = |v: f64| (v.clamp(0.0, 1.0) * 255.0).round() as u8;
    RgbImage::from_fn(g.width() as u32, g.height() as u32, |x, y| {
        let (x, y) = (x as usize, y as usize);
        Rgb([q(rgb.get(0, x, y)), q(rgb.get(1, x, y)), q(rgb.get(2, x, y))])
    })
}

fn encode_png(img: &RgbImage) -> Result<Vec<u8>, IoError> {
    let mut buf = Cursor::new(Vec::new());
    img.write_to(&mut buf, ImageFormat::Png)
        .map_err(|e| IoError::Io(std::io::Error::other(e)))?;
    Ok(buf.into_inner())
}

/// Image with paths drawn as one-pixel lines in distinct colors.
#[must_use]
pub fn render_overlay(img: &ImageBuffer, paths: &[Polyline]) -> RgbImage {
    let mut out = to_rgb8(img);
    let (w, h) = (out.width() as i64, out.height() as i64);
    for (k, path) in paths.iter().enumerate() {
        let color = Rgb(PALETTE[k % PALETTE.len()]);
        let mut plot = |p: Point2| {
            let (x, y) = (p.x.round() as i64, p.y.round() as i64);
            if (0..w).contains(&x) && (0..h).contains(&y) {
                out.put_pixel(x as u32, y as u32, color);
            }
        };
        plot(path.first());
        for (a, b) in path.segments() {
            let n = (a.distance(b) * 2.0).ceil().max(1.0) as usize;
            for i in 1..=n {
                plot(a + (b - a) * (i as f64 / n as f64));
            }
        }
    }
    out
}

#[must_use]
pub fn overlay_png(img: &ImageBuffer, paths: &[Polyline]) -> Result<Vec<u8>, IoError> {
    encode_png(&render_overlay(img, paths))
}

/// SVG with the image embedded as a PNG and one `<polyline>` per path.
pub fn overlay_svg(img: &ImageBuffer, paths: &[Polyline]) -> Result<String, IoError> {
    let g = img.grid();
    let png = base64::engine::general_purpose::STANDARD.encode(encode_png(&to_rgb8(img))?);
    let (w, h) = (g.width(), g.height());
    let mut s = format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{w}\" height=\"{h}\" viewBox=\"-0.5 -0.5 {w} {h}\">\n\
         <image x=\"-0.5\" y=\"-0.5\" width=\"{w}\" height=\"{h}\" href=\"data:image/png;base64,{png}\"/>\n"
    );
    for (k, path) in paths.iter().enumerate() {
        let [r, gr, b] = PALETTE[k % PALETTE.len()];
        let mut pts: Vec<String> = path.points().iter().map(|p| format!("{},{}", round9(p.x), round9(p.y))).collect();
        if path.is_closed() {
            pts.push(pts[0].clone());
        }
        s.push_str(&format!(
            "<polyline fill=\"none\" stroke=\"rgb({r},{gr},{b})\" stroke-width=\"1\" points=\"{}\"/>\n",
            pts.join(" ")
        ));
    }
    s.push_str("</svg>\n");
    Ok(s)
}

/// Write an overlay as PNG or SVG, chosen by the file extension.
pub fn save_overlay(img: &ImageBuffer, paths: &[Polyline], out: &Path) -> Result<(), IoError> {
    match extension(out).as_str() {
        "png" => Ok(fs::write(out, overlay_png(img, paths)?)?),
        "svg" => Ok(fs::write(out, overlay_svg(img, paths)?)?),
        other => Err(IoError::UnsupportedFormat(format!("overlay extension '{other}'"))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn pgm(header: &str, raster: &[u8]) -> Vec<u8> {
        let mut v = header.as_bytes().to_vec();
        v.extend_from_slice(raster);
        v
    }

    #[test]
    fn pgm_bytes_scale_to_unit_range() {
        let img = decode_image(&pgm("P5\n# comment\n2 2\n255\n", &[0, 255, 128, 64])).unwrap();
        assert_eq!(img.channels(), 1);
        assert_eq!(img.data(), &[0.0, 1.0, 128.0 / 255.0, 64.0 / 255.0]);
    }

    #[test]
    fn sixteen_bit_pgm_is_big_endian() {
        let img = decode_image(&pgm("P5 2 2 65535\n", &[0xff, 0xff, 0, 0, 0x80, 0, 0, 1])).unwrap();
        assert_eq!(img.data(), &[1.0, 0.0, 32768.0 / 65535.0, 1.0 / 65535.0]);
    }

    #[test]
    fn ppm_is_deinterleaved() {
        let img = decode_image(&pgm("P6 2 2 255\n", &[255, 0, 0, 0, 255, 0, 0, 0, 255, 51, 51, 51])).unwrap();
        assert_eq!(img.channels(), 3);
        assert_eq!(img.channel(0), &[1.0, 0.0, 0.0, 0.2]);
        assert_eq!(img.channel(2), &[0.0, 0.0, 1.0, 0.2]);
    }

    #[test]
    fn bad_images_are_rejected() {
        assert!(matches!(decode_image(&pgm("P5 2 2 255\n", &[0, 1, 2])), Err(IoError::CorruptFile(_))));
        assert!(matches!(decode_image(&pgm("P5 2 x 255\n", &[0; 4])), Err(IoError::CorruptFile(_))));
        assert!(matches!(decode_image(b"P2 2 2 255\n0 0 0 0"), Err(IoError::UnsupportedFormat(_))));
        assert!(matches!(decode_image(b"GIF89a"), Err(IoError::UnsupportedFormat(_))));
        let mut png = overlay_png(&ImageBuffer::from_fn(Grid2::new(4, 4).unwrap(), |_, _| 0.5).unwrap(), &[]).unwrap();
        png.truncate(png.len() / 2);
        assert!(matches!(decode_image(&png), Err(IoError::CorruptFile(_))));
    }

    #[test]
    fn png_round_trip_preserves_8bit_values() {
        let g = Grid2::new(5, 3).unwrap();
        let img = ImageBuffer::from_fn(g, |x, y| (x * 3 + y * 40) as f64 / 255.0).unwrap();
        let back = decode_image(&overlay_png(&img, &[]).unwrap()).unwrap();
        // Gray input is written as RGB.
        assert_eq!(back.channels(), 3);
        for (a, b) in img.data().iter().zip(back.channel(1)) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn field_round_trip_is_bit_exact() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let g = Grid2::new(16, 16).unwrap();
        let mut vals: Vec<f64> = (0..g.len()).map(|_| rng.gen::<f32>() as f64 * 1e3 - 500.0).collect();
        vals[3] = f64::INFINITY;
        let f = StoredField::scalar(g, &vals, "distance").unwrap();
        let back = decode_field(&encode_field(&f).unwrap()).unwrap();
        assert_eq!(back.header, f.header);
        assert!(back.data.iter().zip(&f.data).all(|(a, b)| a.to_bits() == b.to_bits()));
        assert!(back.to_scalar().is_err());
    }

    #[test]
    fn lifted_header_sets_payload_length() {
        let lg = LiftedGrid3::new(Grid2::new(4, 3).unwrap(), 10).unwrap();
        let f = StoredField::lifted(lg, &vec![1.5; lg.len()], "distance").unwrap();
        let bytes = encode_field(&f).unwrap();
        let nl = bytes.iter().position(|&b| b == b'\n').unwrap();
        assert_eq!(bytes.len() - nl - 1, 4 * 4 * 3 * 10);
        assert!(std::str::from_utf8(&bytes[..nl]).unwrap().contains("\"t\":10"));
        let mut short = bytes.clone();
        short.pop();
        assert!(matches!(decode_field(&short), Err(IoError::HeaderMismatch(_))));
    }

    #[test]
    fn vector_field_round_trip() {
        let g = Grid2::new(3, 2).unwrap();
        let v = VectorField2::from_fn(g, |x, y| Point2::new(x as f64 * 0.5, -(y as f64))).unwrap();
        let back = decode_field(&encode_field(&StoredField::vector(&v, "xi").unwrap()).unwrap()).unwrap();
        assert_eq!(back.to_vector().unwrap(), v);
    }

    #[test]
    fn path_json_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let file = dir.path().join("p.json");
        let poly = Polyline::closed(vec![
            Point2::new(1.0 / 3.0, 2.0),
            Point2::new(100.123456789, 7.25),
            Point2::new(3.0, 40.0 / 7.0),
        ])
        .unwrap();
        save_path(&PathFile::from_polyline(&poly), &file).unwrap();
        let back = load_path(&file).unwrap().to_polyline().unwrap();
        assert!(back.is_closed());
        for (a, b) in poly.points().iter().zip(back.points()) {
            assert!((a.x - b.x).abs() <= 1e-9);
            assert!((a.y - b.y).abs() <= 1e-9);
        }
        let empty = PathFile { closed: false, points: vec![] };
        assert!(save_path(&empty, &file).is_err());
        assert!(empty.to_polyline().is_err());
    }

    #[test]
    fn lifted_path_json_keeps_theta() {
        let lp = LiftedPath::new(vec![LiftedPoint::new(1.0, 2.0, 0.5), LiftedPoint::new(3.0, 4.0, 6.0)]).unwrap();
        let pf = PathFile::from_lifted(&lp);
        let text = serde_json::to_string(&pf).unwrap();
        let back: PathFile = serde_json::from_str(&text).unwrap();
        assert_eq!(back.to_lifted().unwrap(), lp);
        assert!(PathFile::from_polyline(&lp.project().unwrap()).to_lifted().is_err());
    }

    #[test]
    fn svg_has_one_polyline_per_path() {
        let img = ImageBuffer::from_fn(Grid2::new(8, 8).unwrap(), |x, _| x as f64 / 8.0).unwrap();
        let a = Polyline::open(vec![Point2::new(0.0, 0.0), Point2::new(7.0, 7.0)]).unwrap();
        let b = Polyline::closed(vec![Point2::new(1.0, 1.0), Point2::new(5.0, 1.0), Point2::new(3.0, 4.0)]).unwrap();
        let svg = overlay_svg(&img, &[a.clone(), b]).unwrap();
        assert_eq!(svg.matches("<polyline").count(), 2);
        assert!(svg.contains("data:image/png;base64,"));
        let raster = render_overlay(&img, &[a]);
        assert_eq!(raster.get_pixel(3, 3).0, PALETTE[0]);
        let dir = tempfile::tempdir().unwrap();
        assert!(matches!(
            save_overlay(&img, &[], &dir.path().join("x.bmp")),
            Err(IoError::UnsupportedFormat(_))
        ));
    }
}
