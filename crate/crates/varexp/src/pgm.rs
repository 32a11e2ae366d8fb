//! 8-bit PGM images (P2 ASCII and P5 binary).

use std::path::Path;

use crate::config::PgmFormat;
use crate::error::{CliError, Result};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Image {
    pub width: usize,
    pub height: usize,
    /// Row-major, `height` rows of `width` pixels.
    pub pixels: Vec<u8>,
}

impl Image {
    pub fn new(width: usize, height: usize, pixels: Vec<u8>) -> Self {
        assert_eq!(pixels.len(), width * height);
        Image { width, height, pixels }
    }

    pub fn at(&self, row: usize, col: usize) -> u8 {
        self.pixels[row * self.width + col]
    }

    pub fn decode(bytes: &[u8]) -> std::result::Result<Self, String> {
        let mut pos = 0;
        let magic = token(bytes, &mut pos).ok_or("missing magic")?;
        let binary = match magic.as_slice() {
            b"P2" => false,
            b"P5" => true,
            _ => return Err("not a P2/P5 graymap".into()),
        };
        let mut header = [0usize; 3];
        for (i, h) in header.iter_mut().enumerate() {
            let t = token(bytes, &mut pos).ok_or("truncated header")?;
            *h = std::str::from_utf8(&t)
                .ok()
                .and_then(|s| s.parse().ok())
                .ok_or_else(|| format!("bad header field {}", i + 1))?;
        }
        let [width, height, maxval] = header;
        if width == 0 || height == 0 {
            return Err("empty image".into());
        }
        if maxval == 0 || maxval > 255 {
            return Err(format!("maxval {maxval} is not 8-bit"));
        }
        let n = width * height;
        let scale = |v: usize| -> u8 { ((v * 255 + maxval / 2) / maxval) as u8 };
        let pixels = if binary {
            // exactly one whitespace byte separates the header from the raster
            pos += 1;
            let raster = bytes.get(pos..pos + n).ok_or("truncated raster")?;
            raster
                .iter()
                .map(|&b| {
                    if b as usize > maxval {
                        Err(format!("sample {b} exceeds maxval"))
                    } else {
                        Ok(scale(b as usize))
                    }
                })
                .collect::<std::result::Result<Vec<u8>, String>>()?
        } else {
            let mut px = Vec::with_capacity(n);
            for _ in 0..n {
                let t = token(bytes, &mut pos).ok_or("truncated raster")?;
                let v: usize = std::str::from_utf8(&t)
                    .ok()
                    .and_then(|s| s.parse().ok())
                    .ok_or("bad sample")?;
                if v > maxval {
                    return Err(format!("sample {v} exceeds maxval"));
                }
                px.push(scale(v));
            }
            px
        };
        Ok(Image { width, height, pixels })
    }

    pub fn encode(&self, format: PgmFormat) -> Vec<u8> {
        match format {
            PgmFormat::Binary => {
                let mut out = format!("P5\n{} {}\n255\n", self.width, self.height).into_bytes();
                out.extend_from_slice(&self.pixels);
                out
            }
            PgmFormat::Ascii => {
                let mut out = format!("P2\n{} {}\n255\n", self.width, self.height);
                for row in self.pixels.chunks(self.width) {
                    let line: Vec<String> = row.iter().map(|v| v.to_string()).collect();
                    out.push_str(&line.join(" "));
                    out.push('\n');
                }
                out.into_bytes()
            }
        }
    }

    pub fn read(path: &Path) -> Result<Self> {
        let bytes = std::fs::read(path).map_err(|e| CliError::io(path, e))?;
        Self::decode(&bytes).map_err(|m| CliError::format(path, m))
    }

    pub fn write(&self, path: &Path, format: PgmFormat) -> Result<()> {
        std::fs::write(path, self.encode(format)).map_err(|e| CliError::io(path, e))
    }
}

/// Next whitespace-delimited header token, skipping `#` comments.
fn token(bytes: &[u8], pos: &mut usize) -> Option<Vec<u8>> {
    loop {
        while *pos < bytes.len() && bytes[*pos].is_ascii_whitespace() {
            *pos += 1;
        }
        if *pos < bytes.len() && bytes[*pos] == b'#' {
            while *pos < bytes.len() && bytes[*pos] != b'\n' {
                *pos += 1;
            }
            continue;
        }
        break;
    }
    let start = *pos;
    while *pos < bytes.len() && !bytes[*pos].is_ascii_whitespace() {
        *pos += 1;
    }
    (start < *pos).then(|| bytes[start..*pos].to_vec())
}
