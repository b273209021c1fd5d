//! File formats: PFM float maps, binary PGM masks, intrinsics text files,
//! OBJ meshes and operator triplet dumps.
//!
//! Float maps are stored top-to-bottom in memory; PFM files are written
//! bottom-to-top, little-endian, with scale `-1.0`.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;
use std::sync::Arc;

use crate::camera::{CameraIntrinsics, Projection};
use crate::domain::{Mask, PixelDomain};
use crate::error::{Error, Result};
use crate::field::{DepthField, NormalField};
use crate::sparse::SparseOperator;

#[derive(Clone, Debug, PartialEq)]
pub struct FloatMap {
    pub width: usize,
    pub height: usize,
    /// 1 for depth, 3 for normals.
    pub channels: usize,
    /// Row-major, top row first, channels interleaved.
    pub data: Vec<f32>,
}

impl FloatMap {
    pub fn new(width: usize, height: usize, channels: usize, data: Vec<f32>) -> Result<Self> {
        if channels != 1 && channels != 3 {
            return Err(Error::InvalidArgument(format!("{channels} channels; expected 1 or 3")));
        }
        if data.len() != width * height * channels {
            return Err(Error::DimensionMismatch(format!(
                "{} samples for a {width}×{height}×{channels} map",
                data.len()
            )));
        }
        Ok(Self {
            width,
            height,
            channels,
            data,
        })
    }

    pub fn pixel(&self, u: usize, v: usize) -> &[f32] {
        let i = (v * self.width + u) * self.channels;
        &self.data[i..i + self.channels]
    }
}

fn read_bytes(path: &Path) -> Result<Vec<u8>> {
    fs::read(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn write_bytes(path: &Path, bytes: &[u8]) -> Result<()> {
    fs::write(path, bytes).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

/// Netpbm-style header reader: whitespace-separated tokens, `#` comments to
/// end of line, exactly one whitespace byte before the payload.
struct Header<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Header<'a> {
    fn token(&mut self) -> Option<&'a str> {
        loop {
            while self.pos < self.bytes.len() && self.bytes[self.pos].is_ascii_whitespace() {
                self.pos += 1;
            }
            if self.bytes.get(self.pos) == Some(&b'#') {
                while self.pos < self.bytes.len() && self.bytes[self.pos] != b'\n' {
                    self.pos += 1;
                }
            } else {
                break;
            }
        }
        let start = self.pos;
        while self.pos < self.bytes.len() && !self.bytes[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
        (self.pos > start).then(|| std::str::from_utf8(&self.bytes[start..self.pos]).ok())?
    }

    fn payload(mut self) -> Option<&'a [u8]> {
        let b = *self.bytes.get(self.pos)?;
        b.is_ascii_whitespace().then(|| {
            self.pos += 1;
            &self.bytes[self.pos..]
        })
    }
}

fn parse_dim(tok: Option<&str>, what: &str, path: &Path) -> Result<usize> {
    let tok = tok.ok_or_else(|| Error::format(path, format!("missing {what}")))?;
    match tok.parse::<usize>() {
        Ok(v) if v > 0 => Ok(v),
        _ => Err(Error::format(path, format!("invalid {what} '{tok}'"))),
    }
}

/// Parses PFM bytes; `path` only labels errors.
pub fn parse_pfm(bytes: &[u8], path: &Path) -> Result<FloatMap> {
    let mut h = Header { bytes, pos: 0 };
    let channels = match h.token() {
        Some("Pf") => 1,
        Some("PF") => 3,
        _ => return Err(Error::format(path, "not a PFM file (expected 'Pf' or 'PF')")),
    };
    let width = parse_dim(h.token(), "width", path)?;
    let height = parse_dim(h.token(), "height", path)?;
    let scale_tok = h.token().ok_or_else(|| Error::format(path, "missing scale"))?;
    let scale: f64 = scale_tok
        .parse()
        .map_err(|_| Error::format(path, format!("invalid scale '{scale_tok}'")))?;
    if scale == 0.0 || !scale.is_finite() {
        return Err(Error::format(path, "scale must be non-zero"));
    }
    let payload = h.payload().ok_or_else(|| Error::format(path, "header not terminated"))?;
    let count = width * height * channels;
    if payload.len() < 4 * count {
        return Err(Error::format(
            path,
            format!("truncated payload: {} bytes, expected {}", payload.len(), 4 * count),
        ));
    }
    let little = scale < 0.0;
    let row = width * channels;
    let mut data = vec![0f32; count];
    for (k, chunk) in payload[..4 * count].chunks_exact(4).enumerate() {
        let b = [chunk[0], chunk[1], chunk[2], chunk[3]];
        let v = if little { f32::from_le_bytes(b) } else { f32::from_be_bytes(b) };
        // File rows run bottom to top.
        let (r, c) = (k / row, k % row);
        data[(height - 1 - r) * row + c] = v;
    }
    FloatMap::new(width, height, channels, data)
}

pub fn encode_pfm(map: &FloatMap) -> Vec<u8> {
    let tag = if map.channels == 3 { "PF" } else { "Pf" };
    let mut out = format!("{tag}\n{} {}\n-1.0\n", map.width, map.height).into_bytes();
    let row = map.width * map.channels;
    out.reserve(4 * map.data.len());
    for r in (0..map.height).rev() {
        for v in &map.data[r * row..(r + 1) * row] {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    out
}

pub fn read_pfm(path: impl AsRef<Path>) -> Result<FloatMap> {
    let path = path.as_ref();
    parse_pfm(&read_bytes(path)?, path)
}

pub fn write_pfm(map: &FloatMap, path: impl AsRef<Path>) -> Result<()> {
    write_bytes(path.as_ref(), &encode_pfm(map))
}

/// Parses a binary (P5) PGM; nonzero samples are foreground.
pub fn parse_pgm(bytes: &[u8], path: &Path) -> Result<Mask> {
    let mut h = Header { bytes, pos: 0 };
    if h.token() != Some("P5") {
        return Err(Error::format(path, "not a binary PGM file (expected 'P5')"));
    }
    let width = parse_dim(h.token(), "width", path)?;
    let height = parse_dim(h.token(), "height", path)?;
    let maxval = parse_dim(h.token(), "maxval", path)?;
    if maxval > 65535 {
        return Err(Error::format(path, format!("maxval {maxval} exceeds 65535")));
    }
    let payload = h.payload().ok_or_else(|| Error::format(path, "header not terminated"))?;
    let bps = if maxval < 256 { 1 } else { 2 };
    let need = width * height * bps;
    if payload.len() < need {
        return Err(Error::format(
            path,
            format!("truncated payload: {} bytes, expected {need}", payload.len()),
        ));
    }
    let data = payload[..need].chunks_exact(bps).map(|c| c.iter().any(|&b| b != 0)).collect();
    Mask::new(width, height, data)
}

/// 8-bit P5 with foreground 255.
pub fn encode_pgm(mask: &Mask) -> Vec<u8> {
    let mut out = format!("P5\n{} {}\n255\n", mask.width(), mask.height()).into_bytes();
    out.extend(mask.as_slice().iter().map(|&b| if b { 255u8 } else { 0 }));
    out
}

pub fn read_pgm(path: impl AsRef<Path>) -> Result<Mask> {
    let path = path.as_ref();
    parse_pgm(&read_bytes(path)?, path)
}

pub fn write_pgm(mask: &Mask, path: impl AsRef<Path>) -> Result<()> {
    write_bytes(path.as_ref(), &encode_pgm(mask))
}

/// Parses `f=`, `cu=`, `cv=` lines in any order; blank lines and `#`
/// comments are ignored.
pub fn parse_intrinsics(text: &str, path: &Path) -> Result<CameraIntrinsics> {
    let mut vals: [Option<f64>; 3] = [None; 3];
    for (lineno, line) in text.lines().enumerate() {
        let line = line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| Error::format(path, format!("line {}: expected key=value", lineno + 1)))?;
        let slot = match key.trim() {
            "f" => 0,
            "cu" => 1,
            "cv" => 2,
            other => return Err(Error::format(path, format!("line {}: unknown key '{other}'", lineno + 1))),
        };
        let v: f64 = value
            .trim()
            .parse()
            .map_err(|_| Error::format(path, format!("line {}: invalid number '{}'", lineno + 1, value.trim())))?;
        vals[slot] = Some(v);
    }
    let get = |i: usize, name: &str| vals[i].ok_or_else(|| Error::format(path, format!("missing key '{name}'")));
    let (f, cu, cv) = (get(0, "f")?, get(1, "cu")?, get(2, "cv")?);
    if !(f > 0.0) {
        return Err(Error::format(path, format!("focal length must be positive, got {f}")));
    }
    CameraIntrinsics::new(f, cu, cv).map_err(|e| Error::format(path, e.to_string()))
}

pub fn read_intrinsics(path: impl AsRef<Path>) -> Result<CameraIntrinsics> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    parse_intrinsics(&text, path)
}

fn check_map(map: &FloatMap, domain: &PixelDomain, channels: usize) -> Result<()> {
    if map.width != domain.width() || map.height != domain.height() {
        return Err(Error::DimensionMismatch(format!(
            "map is {}×{}, mask is {}×{}",
            map.width,
            map.height,
            domain.width(),
            domain.height()
        )));
    }
    if map.channels != channels {
        return Err(Error::DimensionMismatch(format!(
            "map has {} channels, expected {channels}",
            map.channels
        )));
    }
    Ok(())
}

/// Depth at the foreground pixels of a 1-channel map.
pub fn map_to_depth(map: &FloatMap, domain: Arc<PixelDomain>) -> Result<DepthField> {
    check_map(map, &domain, 1)?;
    let z = domain.pixels().iter().map(|p| f64::from(map.pixel(p.u, p.v)[0])).collect();
    DepthField::new(domain, z)
}

/// Normals at the foreground pixels of a 3-channel map, renormalized after
/// the `f32` round trip. Zero vectors become `(0, 0, 1)`.
pub fn map_to_normals(map: &FloatMap, domain: Arc<PixelDomain>) -> Result<NormalField> {
    check_map(map, &domain, 3)?;
    let raw: Vec<[f64; 3]> = domain
        .pixels()
        .iter()
        .map(|p| {
            let s = map.pixel(p.u, p.v);
            [f64::from(s[0]), f64::from(s[1]), f64::from(s[2])]
        })
        .collect();
    if raw.iter().flatten().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("normal map"));
    }
    NormalField::normalized(domain, raw)
}

fn scatter(domain: &PixelDomain, channels: usize, values: impl Iterator<Item = [f64; 3]>) -> FloatMap {
    let mut data = vec![0f32; domain.width() * domain.height() * channels];
    for (p, v) in domain.pixels().iter().zip(values) {
        let i = (p.v * domain.width() + p.u) * channels;
        for c in 0..channels {
            data[i + c] = v[c] as f32;
        }
    }
    FloatMap {
        width: domain.width(),
        height: domain.height(),
        channels,
        data,
    }
}

/// Background pixels are zero.
pub fn depth_to_map(depth: &DepthField) -> FloatMap {
    scatter(&depth.domain, 1, depth.z.iter().map(|&z| [z, 0.0, 0.0]))
}

/// `(nx, ny, nz)` channels; background pixels are zero.
pub fn normals_to_map(normals: &NormalField) -> FloatMap {
    scatter(&normals.domain, 3, normals.n.iter().copied())
}

/// Triangle mesh of the depth field: one vertex per foreground pixel, and
/// triangles inside each 2×2 block with at least three foreground pixels.
pub fn encode_obj(depth: &DepthField, projection: &Projection) -> String {
    let d = &depth.domain;
    let mut s = String::new();
    for (p, &z) in d.pixels().iter().zip(&depth.z) {
        let [x, y, z] = projection.unproject(p.u as f64, p.v as f64, z);
        writeln!(s, "v {x} {y} {z}").unwrap();
    }
    for v in 0..d.height().saturating_sub(1) as i64 {
        for u in 0..d.width().saturating_sub(1) as i64 {
            let corner = |du: i64, dv: i64| d.index_at(u + du, v + dv).map(|i| i + 1);
            let (a, b, c, e) = (corner(0, 0), corner(1, 0), corner(0, 1), corner(1, 1));
            let tris: &[[Option<usize>; 3]] = match (a, b, c, e) {
                (Some(_), Some(_), Some(_), Some(_)) => &[[a, c, b], [b, c, e]],
                (None, Some(_), Some(_), Some(_)) => &[[b, c, e]],
                (Some(_), None, Some(_), Some(_)) => &[[a, c, e]],
                (Some(_), Some(_), None, Some(_)) => &[[a, e, b]],
                (Some(_), Some(_), Some(_), None) => &[[a, c, b]],
                _ => &[],
            };
            for t in tris {
                writeln!(s, "f {} {} {}", t[0].unwrap(), t[1].unwrap(), t[2].unwrap()).unwrap();
            }
        }
    }
    s
}

pub fn write_obj(depth: &DepthField, projection: &Projection, path: impl AsRef<Path>) -> Result<()> {
    write_bytes(path.as_ref(), encode_obj(depth, projection).as_bytes())
}

/// Header `rows cols nnz`, then one `row col value` line per stored entry.
pub fn encode_triplets(op: &SparseOperator) -> String {
    let mut s = format!("{} {} {}\n", op.nrows(), op.ncols(), op.nnz());
    for (r, c, v) in op.triplets() {
        writeln!(s, "{r} {c} {v:e}").unwrap();
    }
    s
}

pub fn parse_triplets(text: &str, path: &Path) -> Result<SparseOperator> {
    let mut lines = text.lines().filter(|l| !l.trim().is_empty());
    let header: Vec<usize> = lines
        .next()
        .ok_or_else(|| Error::format(path, "empty triplet file"))?
        .split_whitespace()
        .map(|t| t.parse().map_err(|_| Error::format(path, format!("invalid header field '{t}'"))))
        .collect::<Result<_>>()?;
    let [rows, cols, nnz] = header[..] else {
        return Err(Error::format(path, "header must be 'rows cols nnz'"));
    };
    let mut trip = Vec::with_capacity(nnz);
    for line in lines {
        let f: Vec<&str> = line.split_whitespace().collect();
        let parsed = match f[..] {
            [r, c, v] => r.parse().ok().zip(c.parse().ok()).zip(v.parse::<f64>().ok()),
            _ => None,
        };
        let ((r, c), v) = parsed.ok_or_else(|| Error::format(path, format!("malformed entry '{line}'")))?;
        trip.push((r, c, v));
    }
    if trip.len() != nnz {
        return Err(Error::format(path, format!("header says {nnz} entries, found {}", trip.len())));
    }
    SparseOperator::from_triplets(rows, cols, &trip).map_err(|e| Error::format(path, e.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::build_domain;
    use proptest::prelude::*;

    fn p() -> &'static Path {
        Path::new("test")
    }

    #[test]
    fn single_pixel_pfm() {
        let mut bytes = b"Pf\n1 1\n-1.0\n".to_vec();
        bytes.extend_from_slice(&1.0f32.to_le_bytes());
        let m = parse_pfm(&bytes, p()).unwrap();
        assert_eq!(m, FloatMap::new(1, 1, 1, vec![1.0]).unwrap());
        assert_eq!(encode_pfm(&m), bytes);
    }

    #[test]
    fn color_round_trip_and_row_order() {
        let data: Vec<f32> = (0..36).map(|i| i as f32 * 0.5 - 3.0).collect();
        let m = FloatMap::new(4, 3, 3, data).unwrap();
        let bytes = encode_pfm(&m);
        // First stored row is the bottom one.
        let first = f32::from_le_bytes(bytes[bytes.len() - 144..][..4].try_into().unwrap());
        assert_eq!(first, m.pixel(0, 2)[0]);
        let back = parse_pfm(&bytes, p()).unwrap();
        assert_eq!(back, m);
        assert_eq!(encode_pfm(&back), bytes);

        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.pfm");
        write_pfm(&m, &path).unwrap();
        assert_eq!(read_pfm(&path).unwrap(), m);
    }

    #[test]
    fn big_endian_twin() {
        let vals = [1.5f32, -2.25, 3.0, 1e-7];
        let mut le = b"Pf\n2 2\n-1.0\n".to_vec();
        let mut be = b"Pf\n2 2\n1.0\n".to_vec();
        for v in vals {
            le.extend_from_slice(&v.to_le_bytes());
            be.extend_from_slice(&v.to_be_bytes());
        }
        assert_eq!(parse_pfm(&le, p()).unwrap(), parse_pfm(&be, p()).unwrap());
    }

    #[test]
    fn malformed_pfm() {
        assert!(parse_pfm(b"P6\n1 1\n-1\n", p()).is_err());
        assert!(parse_pfm(b"Pf\n1 x\n-1\n", p()).is_err());
        let e = parse_pfm(b"Pf\n2 2\n-1.0\n\0\0\0\0", p()).unwrap_err();
        assert!(e.to_string().contains("truncated"), "{e}");
        let e = parse_pfm(b"Pf\n1 1\n0\n\0\0\0\0", p()).unwrap_err();
        assert!(e.to_string().contains("scale"), "{e}");
        assert!(parse_pfm(b"Pf\n1 1\n-1.0", p()).is_err());
    }

    #[test]
    fn pgm_round_trip() {
        let mask = Mask::from_fn(5, 3, |u, v| (u + v) % 2 == 0);
        let bytes = encode_pgm(&mask);
        assert_eq!(parse_pgm(&bytes, p()).unwrap(), mask);
        let mut wide = b"P5\n# comment\n2 1\n65535\n".to_vec();
        wide.extend_from_slice(&[0, 0, 1, 0]);
        let m = parse_pgm(&wide, p()).unwrap();
        assert_eq!(m.as_slice(), &[false, true]);
        assert!(parse_pgm(b"P5\n2 2\n255\n\0", p()).is_err());
        assert!(parse_pgm(b"P2\n1 1\n255\n1", p()).is_err());
    }

    #[test]
    fn intrinsics_examples() {
        let k = parse_intrinsics("f=100\ncu=32\ncv=32", p()).unwrap();
        assert_eq!((k.f, k.cu, k.cv), (100.0, 32.0, 32.0));
        let k = parse_intrinsics("# camera\ncv = 2.5\n\nf=10 # focal\ncu=1\n", p()).unwrap();
        assert_eq!((k.f, k.cu, k.cv), (10.0, 1.0, 2.5));
        assert!(parse_intrinsics("f=0\ncu=1\ncv=1", p()).is_err());
        let e = parse_intrinsics("f=1\ncu=1", p()).unwrap_err();
        assert!(e.to_string().contains("cv"));
        assert!(parse_intrinsics("f=1\ncu=1\ncv=1\nk=3", p()).is_err());
    }

    #[test]
    fn field_conversions() {
        let mask = Mask::from_fn(4, 3, |u, v| u != v);
        let d = Arc::new(build_domain(&mask).unwrap());
        let depth = DepthField::from_fn(d.clone(), |u, v| (u * 10 + v) as f64);
        let map = depth_to_map(&depth);
        assert_eq!(map.pixel(0, 0), &[0.0]);
        assert_eq!(map.pixel(2, 1), &[21.0]);
        assert_eq!(map_to_depth(&map, d.clone()).unwrap().z, depth.z);

        let normals = NormalField::normalized(d.clone(), vec![[0.0, 0.6, 0.8]; d.len()]).unwrap();
        let nmap = normals_to_map(&normals);
        let back = map_to_normals(&nmap, d.clone()).unwrap();
        for (a, b) in back.n.iter().zip(&normals.n) {
            assert!((0..3).all(|c| (a[c] - b[c]).abs() < 1e-7));
        }
        let other = Arc::new(build_domain(&Mask::full(3, 3)).unwrap());
        assert!(map_to_depth(&map, other).is_err());
        assert!(map_to_normals(&map, d).is_err());
    }

    #[test]
    fn obj_faces_follow_mask() {
        let d = Arc::new(build_domain(&Mask::full(3, 2)).unwrap());
        let depth = DepthField::from_fn(d.clone(), |_, _| 1.0);
        let obj = encode_obj(&depth, &Projection::orthographic());
        assert_eq!(obj.lines().filter(|l| l.starts_with("v ")).count(), 6);
        assert_eq!(obj.lines().filter(|l| l.starts_with("f ")).count(), 4);

        // Two pixels touching only diagonally: no triangle.
        let d = Arc::new(build_domain(&Mask::from_fn(2, 2, |u, v| u == v)).unwrap());
        let obj = encode_obj(&DepthField::from_fn(d, |_, _| 1.0), &Projection::orthographic());
        assert_eq!(obj.lines().filter(|l| l.starts_with("f ")).count(), 0);
    }

    #[test]
    fn triplet_round_trip() {
        let op = SparseOperator::from_triplets(3, 4, &[(0, 1, 0.1), (2, 3, -1.0 / 3.0), (1, 0, 7.0)]).unwrap();
        let text = encode_triplets(&op);
        assert!(text.starts_with("3 4 3\n"));
        let back = parse_triplets(&text, p()).unwrap();
        assert_eq!(back.triplets().collect::<Vec<_>>(), op.triplets().collect::<Vec<_>>());
        assert!(parse_triplets("3 4 2\n0 1 1.0\n", p()).is_err());
    }

    proptest! {
        #[test]
        fn pfm_preserves_finite_values(
            w in 1usize..6, h in 1usize..6, three in any::<bool>(),
            seed in prop::collection::vec(any::<f32>(), 108),
        ) {
            let c = if three { 3 } else { 1 };
            let data: Vec<f32> = seed.into_iter().take(w * h * c)
                .map(|v| if v.is_finite() { v } else { 0.0 }).collect();
            let m = FloatMap::new(w, h, c, data).unwrap();
            let bytes = encode_pfm(&m);
            let back = parse_pfm(&bytes, p()).unwrap();
            prop_assert_eq!(back.data.iter().map(|v| v.to_bits()).collect::<Vec<_>>(),
                            m.data.iter().map(|v| v.to_bits()).collect::<Vec<_>>());
            prop_assert_eq!(encode_pfm(&back), bytes);
        }
    }
}
