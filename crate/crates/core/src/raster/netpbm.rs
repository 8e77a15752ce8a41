//! Netpbm decoding and encoding (P2/P5 PGM, P3/P6 PPM, maxval 255).
//!
//! Header comments (`#` to end of line) are accepted anywhere token
//! whitespace is. Binary rasters follow the maxval token after exactly one
//! whitespace byte. Trailing bytes after a complete raster are ignored.

use thiserror::Error;

use super::{GrayImage, RgbImage};

#[derive(Debug, Error, PartialEq, Eq)]
pub enum NetpbmError {
    #[error("unknown magic number (expected P2, P3, P5 or P6)")]
    UnknownMagic,
    #[error("malformed header: {0}")]
    MalformedHeader(String),
    #[error("unsupported maxval {0} (only 255 is supported)")]
    UnsupportedMaxval(u32),
    #[error("truncated pixel data: expected {expected} samples, got {got}")]
    TruncatedData { expected: usize, got: usize },
    #[error("sample value {0} exceeds maxval 255")]
    SampleOutOfRange(u32),
}

/// Result of decoding: grayscale for P2/P5, RGB for P3/P6.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum NetpbmImage {
    Gray(GrayImage),
    Rgb(RgbImage),
}

#[derive(Clone, Copy, PartialEq)]
enum Magic {
    P2,
    P3,
    P5,
    P6,
}

impl Magic {
    fn channels(self) -> usize {
        match self {
            Magic::P2 | Magic::P5 => 1,
            Magic::P3 | Magic::P6 => 3,
        }
    }

    fn is_binary(self) -> bool {
        matches!(self, Magic::P5 | Magic::P6)
    }
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn new(bytes: &'a [u8]) -> Self {
        Self { bytes, pos: 0 }
    }

    /// Skips whitespace and `#` comments (which run to end of line).
    fn skip_separators(&mut self) {
        while self.pos < self.bytes.len() {
            let b = self.bytes[self.pos];
            if b.is_ascii_whitespace() {
                self.pos += 1;
            } else if b == b'#' {
                while self.pos < self.bytes.len() && self.bytes[self.pos] != b'\n' {
                    self.pos += 1;
                }
            } else {
                break;
            }
        }
    }

    /// Reads one unsigned decimal token.
    fn read_u32(&mut self, what: &str) -> Result<u32, NetpbmError> {
        self.skip_separators();
        let start = self.pos;
        while self.pos < self.bytes.len() && self.bytes[self.pos].is_ascii_digit() {
            self.pos += 1;
        }
        if self.pos == start {
            return Err(NetpbmError::MalformedHeader(format!(
                "expected unsigned integer for {what}"
            )));
        }
        let token = std::str::from_utf8(&self.bytes[start..self.pos])
            .expect("digits are valid utf-8");
        token
            .parse::<u32>()
            .map_err(|_| NetpbmError::MalformedHeader(format!("{what} out of range: {token}")))
    }
}

/// Decodes a P2/P3/P5/P6 Netpbm byte stream with maxval 255.
pub fn decode_netpbm(bytes: &[u8]) -> Result<NetpbmImage, NetpbmError> {
    let magic = match bytes.get(..2) {
        Some(b"P2") => Magic::P2,
        Some(b"P3") => Magic::P3,
        Some(b"P5") => Magic::P5,
        Some(b"P6") => Magic::P6,
        _ => return Err(NetpbmError::UnknownMagic),
    };
    let mut cur = Cursor::new(&bytes[2..]);

    let width = cur.read_u32("width")?;
    let height = cur.read_u32("height")?;
    let maxval = cur.read_u32("maxval")?;
    if width == 0 || height == 0 {
        return Err(NetpbmError::MalformedHeader(format!(
            "zero dimension {width}x{height}"
        )));
    }
    if maxval != 255 {
        return Err(NetpbmError::UnsupportedMaxval(maxval));
    }

    let expected = width as usize * height as usize * magic.channels();
    let samples = if magic.is_binary() {
        // A single whitespace byte separates the maxval from the raster.
        match cur.bytes.get(cur.pos) {
            Some(b) if b.is_ascii_whitespace() => cur.pos += 1,
            _ => {
                return Err(NetpbmError::MalformedHeader(
                    "missing whitespace before binary raster".into(),
                ))
            }
        }
        let raster = &cur.bytes[cur.pos..];
        if raster.len() < expected {
            return Err(NetpbmError::TruncatedData {
                expected,
                got: raster.len(),
            });
        }
        raster[..expected].to_vec()
    } else {
        let mut samples = Vec::with_capacity(expected);
        for got in 0..expected {
            cur.skip_separators();
            if cur.pos >= cur.bytes.len() {
                return Err(NetpbmError::TruncatedData { expected, got });
            }
            let v = cur.read_u32("sample")?;
            if v > 255 {
                return Err(NetpbmError::SampleOutOfRange(v));
            }
            samples.push(v as u8);
        }
        samples
    };

    let image = match magic.channels() {
        1 => NetpbmImage::Gray(
            GrayImage::new(width, height, samples).expect("dimensions checked above"),
        ),
        _ => NetpbmImage::Rgb(
            RgbImage::new(width, height, samples).expect("dimensions checked above"),
        ),
    };
    Ok(image)
}

/// Encodes a grayscale image as PGM: binary P5, or ASCII P2 with one image
/// row per text line. Round-trips bit-exactly through [`decode_netpbm`].
pub fn encode_pgm(image: &GrayImage, binary: bool) -> Vec<u8> {
    let mut out = Vec::new();
    if binary {
        out.extend_from_slice(format!("P5\n{} {}\n255\n", image.width(), image.height()).as_bytes());
        out.extend_from_slice(image.pixels());
    } else {
        out.extend_from_slice(format!("P2\n{} {}\n255\n", image.width(), image.height()).as_bytes());
        for row in image.pixels().chunks_exact(image.width() as usize) {
            let line: Vec<String> = row.iter().map(|v| v.to_string()).collect();
            out.extend_from_slice(line.join(" ").as_bytes());
            out.push(b'\n');
        }
    }
    out
}

/// Encodes an RGB image as PPM (binary P6 or ASCII P3), mirroring
/// [`encode_pgm`]'s layout.
pub fn encode_ppm(image: &RgbImage, binary: bool) -> Vec<u8> {
    let mut out = Vec::new();
    if binary {
        out.extend_from_slice(format!("P6\n{} {}\n255\n", image.width(), image.height()).as_bytes());
        out.extend_from_slice(image.pixels());
    } else {
        out.extend_from_slice(format!("P3\n{} {}\n255\n", image.width(), image.height()).as_bytes());
        for row in image.pixels().chunks_exact(3 * image.width() as usize) {
            let line: Vec<String> = row.iter().map(|v| v.to_string()).collect();
            out.extend_from_slice(line.join(" ").as_bytes());
            out.push(b'\n');
        }
    }
    out
}
