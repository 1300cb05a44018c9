//! Netpbm grayscale and color maps: P2/P5 (PGM) and P3/P6 (PPM).
//!
//! Encoding always writes the canonical header `P? W H MAXVAL` on three
//! lines, so any canonical binary file round-trips byte for byte.

use std::fmt;

use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    /// ASCII graymap.
    P2,
    /// ASCII pixmap.
    P3,
    /// Binary graymap.
    P5,
    /// Binary pixmap.
    P6,
}

impl Format {
    pub fn channels(self) -> usize {
        match self {
            Format::P2 | Format::P5 => 1,
            Format::P3 | Format::P6 => 3,
        }
    }

    pub fn is_binary(self) -> bool {
        matches!(self, Format::P5 | Format::P6)
    }

    fn magic(self) -> &'static [u8; 2] {
        match self {
            Format::P2 => b"P2",
            Format::P3 => b"P3",
            Format::P5 => b"P5",
            Format::P6 => b"P6",
        }
    }
}

impl fmt::Display for Format {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(std::str::from_utf8(self.magic()).expect("ascii magic"))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("netpbm parse error at byte {offset}: {message}")]
pub struct ParseError {
    pub offset: usize,
    pub message: String,
}

fn fail<T>(offset: usize, message: impl Into<String>) -> Result<T, ParseError> {
    Err(ParseError {
        offset,
        message: message.into(),
    })
}

/// Decoded raster: samples row-major with channels innermost.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Raster {
    pub format: Format,
    pub width: usize,
    pub height: usize,
    pub maxval: u16,
    pub samples: Vec<u16>,
}

impl Raster {
    pub fn channels(&self) -> usize {
        self.format.channels()
    }
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl Cursor<'_> {
    fn skip_separators(&mut self) {
        while self.pos < self.bytes.len() {
            match self.bytes[self.pos] {
                b' ' | b'\t' | b'\n' | b'\r' | 0x0b | 0x0c => self.pos += 1,
                b'#' => {
                    while self.pos < self.bytes.len() && self.bytes[self.pos] != b'\n' {
                        self.pos += 1;
                    }
                }
                _ => break,
            }
        }
    }

    fn number(&mut self, what: &str) -> Result<u32, ParseError> {
        self.skip_separators();
        let start = self.pos;
        let mut value: u32 = 0;
        while self.pos < self.bytes.len() && self.bytes[self.pos].is_ascii_digit() {
            let digit = u32::from(self.bytes[self.pos] - b'0');
            value = match value.checked_mul(10).and_then(|v| v.checked_add(digit)) {
                Some(v) => v,
                None => return fail(start, format!("{what} overflows")),
            };
            self.pos += 1;
        }
        if self.pos == start {
            if self.pos >= self.bytes.len() {
                return fail(start, format!("unexpected end of data reading {what}"));
            }
            return fail(start, format!("expected decimal {what}"));
        }
        Ok(value)
    }
}

/// Parses a P2/P3/P5/P6 file.
pub fn decode(bytes: &[u8]) -> Result<Raster, ParseError> {
    if bytes.len() < 2 {
        return fail(0, "file too short for a magic number");
    }
    let format = match &bytes[..2] {
        b"P2" => Format::P2,
        b"P3" => Format::P3,
        b"P5" => Format::P5,
        b"P6" => Format::P6,
        _ => return fail(0, "unsupported magic number"),
    };
    let mut cur = Cursor { bytes, pos: 2 };
    let width = cur.number("width")? as usize;
    let height = cur.number("height")? as usize;
    let maxval_at = cur.pos;
    let maxval = cur.number("maxval")?;
    if width == 0 || height == 0 {
        return fail(maxval_at, "width and height must be positive");
    }
    if maxval == 0 || maxval > 65535 {
        return fail(maxval_at, format!("maxval {maxval} outside 1..=65535"));
    }
    let maxval = maxval as u16;
    let count = width
        .checked_mul(height)
        .and_then(|n| n.checked_mul(format.channels()))
        .ok_or(ParseError {
            offset: maxval_at,
            message: "image dimensions overflow".into(),
        })?;

    let mut samples = Vec::with_capacity(count);
    if format.is_binary() {
        match bytes.get(cur.pos) {
            Some(b) if b.is_ascii_whitespace() => cur.pos += 1,
            Some(_) => return fail(cur.pos, "expected single whitespace before raster"),
            None => return fail(cur.pos, "missing raster"),
        }
        let wide = maxval > 255;
        let need = count * if wide { 2 } else { 1 };
        let payload = &bytes[cur.pos..];
        if payload.len() < need {
            return fail(
                cur.pos + payload.len(),
                format!("truncated raster: {} of {need} bytes", payload.len()),
            );
        }
        for k in 0..count {
            let v = if wide {
                u16::from_be_bytes([payload[2 * k], payload[2 * k + 1]])
            } else {
                u16::from(payload[k])
            };
            if v > maxval {
                let at = cur.pos + if wide { 2 * k } else { k };
                return fail(at, format!("sample {v} exceeds maxval {maxval}"));
            }
            samples.push(v);
        }
    } else {
        for _ in 0..count {
            cur.skip_separators();
            let at = cur.pos;
            let v = cur.number("sample")?;
            if v > u32::from(maxval) {
                return fail(at, format!("sample {v} exceeds maxval {maxval}"));
            }
            samples.push(v as u16);
        }
    }
    Ok(Raster {
        format,
        width,
        height,
        maxval,
        samples,
    })
}

/// Serializes a raster with a canonical header. ASCII rasters put one image
/// row per line.
pub fn encode(raster: &Raster) -> Vec<u8> {
    let mut out = Vec::new();
    out.extend_from_slice(raster.format.magic());
    out.extend_from_slice(
        format!("\n{} {}\n{}\n", raster.width, raster.height, raster.maxval).as_bytes(),
    );
    if raster.format.is_binary() {
        if raster.maxval > 255 {
            for &s in &raster.samples {
                out.extend_from_slice(&s.to_be_bytes());
            }
        } else {
            out.extend(raster.samples.iter().map(|&s| s as u8));
        }
    } else {
        let row = raster.width * raster.channels();
        for line in raster.samples.chunks(row) {
            let text: Vec<String> = line.iter().map(|s| s.to_string()).collect();
            out.extend_from_slice(text.join(" ").as_bytes());
            out.push(b'\n');
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ascii_graymap() {
        let r = decode(b"P2\n# comment\n2 2\n255\n0 128\n255 64\n").unwrap();
        assert_eq!(r.format, Format::P2);
        assert_eq!((r.width, r.height, r.maxval), (2, 2, 255));
        assert_eq!(r.samples, vec![0, 128, 255, 64]);
    }

    #[test]
    fn binary_matches_ascii() {
        let a = decode(b"P2 2 2 255 0 128 255 64").unwrap();
        let b = decode(b"P5\n2 2\n255\n\x00\x80\xff\x40").unwrap();
        assert_eq!(a.samples, b.samples);
    }

    #[test]
    fn sixteen_bit_samples() {
        let r = decode(b"P5 1 1 65535\n\x12\x34").unwrap();
        assert_eq!(r.samples, vec![0x1234]);
        assert_eq!(encode(&r), b"P5\n1 1\n65535\n\x12\x34".to_vec());
    }

    #[test]
    fn errors_carry_offsets() {
        assert_eq!(decode(b"").unwrap_err().offset, 0);
        assert_eq!(decode(b"P4 1 1\n").unwrap_err().offset, 0);
        let e = decode(b"P5\n2 2\n255\n\x00\x01").unwrap_err();
        assert_eq!(e.offset, 13);
        assert!(e.message.contains("truncated"));
        let e = decode(b"P2\n1 1\n10\n11\n").unwrap_err();
        assert_eq!(e.offset, 10);
        let e = decode(b"P2\nx 1\n").unwrap_err();
        assert_eq!(e.offset, 3);
        assert!(decode(b"P2 1 1 70000 1").is_err());
        assert!(decode(b"P2 0 1 255").is_err());
        assert!(decode(b"P3 1 1 255 1 2").is_err());
    }

    #[test]
    fn canonical_binary_round_trip() {
        let bytes = b"P6\n2 1\n255\n\x01\x02\x03\xfd\xfe\xff".to_vec();
        assert_eq!(encode(&decode(&bytes).unwrap()), bytes);
    }
}
