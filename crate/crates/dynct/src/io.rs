//! Binary image and sinogram files, plus JSON files for corners and motions.
//!
//! A binary file is one JSON header line terminated by `\n`, either
//! `{"kind":"image","n":N}` or `{"kind":"sinogram","p":P,"q":Q}`, followed by
//! the values in row-major order as little-endian `f64`.

use std::fs;
use std::path::Path;

use dynct_core::{AffineMotion, Image, ImageGrid, Mat2, ScanGeometry, Sinogram, Vec2};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum Header {
    Image { n: usize },
    Sinogram { p: usize, q: usize },
}

impl Header {
    fn kind(&self) -> &'static str {
        match self {
            Header::Image { .. } => "image",
            Header::Sinogram { .. } => "sinogram",
        }
    }

    fn n_values(&self) -> Result<usize> {
        let n = match *self {
            Header::Image { n } => n.checked_mul(n),
            Header::Sinogram { p, q } => q.checked_mul(2).and_then(|m| m.checked_add(1)).and_then(|m| m.checked_mul(p)),
        };
        n.ok_or_else(|| Error::MalformedHeader(format!("dimensions overflow: {self:?}")))
    }
}

fn encode(header: Header, values: &[f64]) -> Vec<u8> {
    let mut out = serde_json::to_vec(&header).expect("header serializes");
    out.push(b'\n');
    out.reserve(values.len() * 8);
    for v in values {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

fn decode(bytes: &[u8]) -> Result<(Header, Vec<f64>)> {
    let nl = bytes
        .iter()
        .position(|&b| b == b'\n')
        .ok_or_else(|| Error::MalformedHeader("no newline-terminated header line".into()))?;
    let header: Header =
        serde_json::from_slice(&bytes[..nl]).map_err(|e| Error::MalformedHeader(e.to_string()))?;
    let payload = &bytes[nl + 1..];
    let expected = header.n_values()?.checked_mul(8).ok_or_else(|| Error::MalformedHeader("payload size overflows".into()))?;
    if payload.len() < expected {
        return Err(Error::Truncated { expected, actual: payload.len() });
    }
    if payload.len() > expected {
        return Err(Error::TrailingData { expected, actual: payload.len() });
    }
    let values = payload
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("chunk of 8")))
        .collect();
    Ok((header, values))
}

pub fn encode_image(image: &Image) -> Vec<u8> {
    encode(Header::Image { n: image.grid().n_pix() }, image.values())
}

pub fn decode_image(bytes: &[u8]) -> Result<Image> {
    match decode(bytes)? {
        (Header::Image { n }, values) => Ok(Image::from_values(ImageGrid::new(n)?, values)?),
        (h, _) => Err(Error::KindMismatch { expected: "image", found: h.kind() }),
    }
}

pub fn encode_sinogram(sino: &Sinogram) -> Vec<u8> {
    let g = sino.geometry();
    encode(Header::Sinogram { p: g.p(), q: g.q() }, sino.values())
}

pub fn decode_sinogram(bytes: &[u8]) -> Result<Sinogram> {
    match decode(bytes)? {
        (Header::Sinogram { p, q }, values) => Ok(Sinogram::from_values(ScanGeometry::new(p, q)?, values)?),
        (h, _) => Err(Error::KindMismatch { expected: "sinogram", found: h.kind() }),
    }
}

fn read_bytes(path: &Path) -> Result<Vec<u8>> {
    fs::read(path).map_err(|e| Error::io(path, e))
}

fn write_bytes(path: &Path, bytes: &[u8]) -> Result<()> {
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

pub fn write_image(path: impl AsRef<Path>, image: &Image) -> Result<()> {
    write_bytes(path.as_ref(), &encode_image(image))
}

pub fn read_image(path: impl AsRef<Path>) -> Result<Image> {
    decode_image(&read_bytes(path.as_ref())?)
}

pub fn write_sinogram(path: impl AsRef<Path>, sino: &Sinogram) -> Result<()> {
    write_bytes(path.as_ref(), &encode_sinogram(sino))
}

pub fn read_sinogram(path: impl AsRef<Path>) -> Result<Sinogram> {
    decode_sinogram(&read_bytes(path.as_ref())?)
}

/// Four landmark corners in unit coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CornersFile {
    pub corners: [Vec2; 4],
}

/// `Γ_t x = C(t) x + b(t)` given by its end state `A`, `b` and the number of
/// time points `n`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MotionFile {
    pub a: Mat2,
    pub b: Vec2,
    pub n: usize,
}

impl From<&AffineMotion> for MotionFile {
    fn from(m: &AffineMotion) -> Self {
        Self { a: m.end_matrix(), b: m.end_shift(), n: m.n_times() }
    }
}

impl MotionFile {
    pub fn to_motion(&self) -> Result<AffineMotion> {
        Ok(AffineMotion::new(self.a, self.b, self.n)?)
    }
}

pub fn write_json<T: Serialize>(path: impl AsRef<Path>, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    write_bytes(path.as_ref(), text.as_bytes())
}

pub fn read_json<T: for<'de> Deserialize<'de>>(path: impl AsRef<Path>) -> Result<T> {
    Ok(serde_json::from_slice(&read_bytes(path.as_ref())?)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ramp(n: usize) -> Image {
        let grid = ImageGrid::new(n).unwrap();
        Image::from_values(grid, (0..grid.len()).map(|k| k as f64 * 0.37 - 1.0).collect()).unwrap()
    }

    #[test]
    fn header_line_is_compact_json() {
        let bytes = encode_image(&ramp(3));
        assert!(bytes.starts_with(b"{\"kind\":\"image\",\"n\":3}\n"));
        let sino = Sinogram::zeros(ScanGeometry::new(2, 1).unwrap());
        assert!(encode_sinogram(&sino).starts_with(b"{\"kind\":\"sinogram\",\"p\":2,\"q\":1}\n"));
    }

    #[test]
    fn kind_mismatch() {
        let sino = Sinogram::zeros(ScanGeometry::new(2, 1).unwrap());
        let err = decode_image(&encode_sinogram(&sino)).unwrap_err();
        assert!(matches!(err, Error::KindMismatch { expected: "image", found: "sinogram" }), "{err}");
        let err = decode_sinogram(&encode_image(&ramp(2))).unwrap_err();
        assert!(matches!(err, Error::KindMismatch { expected: "sinogram", found: "image" }));
    }

    #[test]
    fn truncated_payload_names_sizes() {
        let mut bytes = encode_image(&ramp(4));
        bytes.truncate(bytes.len() - 5);
        let err = decode_image(&bytes).unwrap_err();
        assert!(matches!(err, Error::Truncated { expected: 128, actual: 123 }));
        assert!(err.to_string().contains("128") && err.to_string().contains("123"));
    }

    #[test]
    fn trailing_bytes_rejected() {
        let mut bytes = encode_image(&ramp(2));
        bytes.push(0);
        assert!(matches!(decode_image(&bytes), Err(Error::TrailingData { expected: 32, actual: 33 })));
    }

    #[test]
    fn malformed_headers() {
        for bad in [&b"no newline"[..], b"{\"kind\":\"volume\",\"n\":2}\n", b"{\"kind\":\"image\"}\n", b"\xff\n"] {
            assert!(matches!(decode_image(bad), Err(Error::MalformedHeader(_))), "{bad:?}");
        }
    }

    #[test]
    fn special_values_survive() {
        let grid = ImageGrid::new(2).unwrap();
        let img = Image::from_values(grid, vec![-0.0, f64::MIN_POSITIVE, f64::MAX, 1e-310]).unwrap();
        let back = decode_image(&encode_image(&img)).unwrap();
        let bits = |i: &Image| i.values().iter().map(|v| v.to_bits()).collect::<Vec<_>>();
        assert_eq!(bits(&img), bits(&back));
    }

    proptest::proptest! {
        #[test]
        fn sinogram_bytes_round_trip(p in 1usize..6, q in 1usize..6, seed in proptest::prelude::any::<u64>()) {
            let geom = ScanGeometry::new(p, q).unwrap();
            let values: Vec<f64> = (0..geom.n_rays() as u64).map(|k| f64::from_bits(seed.rotate_left(k as u32) ^ k)).collect();
            let sino = Sinogram::from_values(geom, values).unwrap();
            let back = decode_sinogram(&encode_sinogram(&sino)).unwrap();
            proptest::prop_assert_eq!(back.geometry(), geom);
            let bits = |s: &Sinogram| s.values().iter().map(|v| v.to_bits()).collect::<Vec<_>>();
            proptest::prop_assert_eq!(bits(&back), bits(&sino));
        }
    }

    #[test]
    fn motion_file_round_trip() {
        let m = AffineMotion::new([[2.0, 0.0], [0.0, 1.0]], [0.1, -0.2], 9).unwrap();
        let text = serde_json::to_string(&MotionFile::from(&m)).unwrap();
        assert_eq!(text, "{\"a\":[[2.0,0.0],[0.0,1.0]],\"b\":[0.1,-0.2],\"n\":9}");
        let back: MotionFile = serde_json::from_str(&text).unwrap();
        assert_eq!(back.to_motion().unwrap(), m);
    }
}
