//! Binary PPM (`P6`, maxval 255) frames.

use std::fs;
use std::path::Path;

use lsptm_core::clip::Image;

use crate::error::{Error, Result};

/// Decodes a `P6` image. Header comments (`#` to end of line) are allowed.
pub fn decode(bytes: &[u8]) -> std::result::Result<Image<u8>, String> {
    let mut pos = 0;
    let mut fields = Vec::with_capacity(4);
    while fields.len() < 4 {
        while pos < bytes.len() {
            match bytes[pos] {
                b'#' => {
                    while pos < bytes.len() && bytes[pos] != b'\n' {
                        pos += 1;
                    }
                }
                b if b.is_ascii_whitespace() => pos += 1,
                _ => break,
            }
        }
        let start = pos;
        while pos < bytes.len() && !bytes[pos].is_ascii_whitespace() && bytes[pos] != b'#' {
            pos += 1;
        }
        if start == pos {
            return Err("header ends early".into());
        }
        fields.push(std::str::from_utf8(&bytes[start..pos]).map_err(|_| "non-ASCII header".to_string())?);
    }
    if fields[0] != "P6" {
        return Err(format!("magic `{}`, expected P6", fields[0]));
    }
    let num = |s: &str, what: &str| s.parse::<usize>().map_err(|_| format!("{what} `{s}` is not a number"));
    let width = num(fields[1], "width")?;
    let height = num(fields[2], "height")?;
    let maxval = num(fields[3], "maxval")?;
    if maxval != 255 {
        return Err(format!("maxval {maxval}, only 255 is supported"));
    }
    if width == 0 || height == 0 {
        return Err(format!("empty image {width}×{height}"));
    }
    match bytes.get(pos) {
        Some(b) if b.is_ascii_whitespace() => pos += 1,
        _ => return Err("missing whitespace after maxval".into()),
    }
    let need = width * height * 3;
    let pixels = &bytes[pos..];
    if pixels.len() < need {
        return Err(format!("pixel data has {} bytes, need {need}", pixels.len()));
    }
    Image::new(height, width, 3, pixels[..need].to_vec()).map_err(|e| e.to_string())
}

pub fn encode(img: &Image<u8>) -> Vec<u8> {
    let mut out = format!("P6\n{} {}\n255\n", img.width, img.height).into_bytes();
    out.extend_from_slice(&img.data);
    out
}

pub fn read(path: &Path) -> Result<Image<u8>> {
    let bytes = fs::read(path).map_err(Error::io(path))?;
    decode(&bytes).map_err(|reason| Error::Ppm {
        path: path.to_path_buf(),
        reason,
    })
}

pub fn write(path: &Path, img: &Image<u8>) -> Result<()> {
    if img.channels != 3 {
        return Err(Error::Invalid(format!("PPM needs 3 channels, image has {}", img.channels)));
    }
    fs::write(path, encode(img)).map_err(Error::io(path))
}
