use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::visual::ImageFrame;

/// Reads a binary PPM (`P6`, maxval 255). With the `png` feature, `.png`
/// files are decoded as well.
pub fn read_image(path: &Path) -> Result<ImageFrame> {
    if path.extension().is_some_and(|e| e.eq_ignore_ascii_case("png")) {
        return read_png(path);
    }
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    parse_ppm(path, &bytes)
}

#[cfg(feature = "png")]
fn read_png(path: &Path) -> Result<ImageFrame> {
    let decoded = image::open(path).map_err(|e| Error::format(path, e.to_string()))?.into_rgb8();
    let (w, h) = decoded.dimensions();
    ImageFrame::new(w as usize, h as usize, decoded.into_raw()).map_err(|e| Error::format(path, e.to_string()))
}

#[cfg(not(feature = "png"))]
fn read_png(path: &Path) -> Result<ImageFrame> {
    Err(Error::format(path, "PNG input requires the `png` feature"))
}

/// Splits the next whitespace-delimited header token, skipping `#` comments.
fn header_token<'a>(bytes: &'a [u8], pos: &mut usize) -> Option<&'a [u8]> {
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
    (start < *pos).then(|| &bytes[start..*pos])
}

fn parse_ppm(path: &Path, bytes: &[u8]) -> Result<ImageFrame> {
    let mut pos = 0;
    if header_token(bytes, &mut pos) != Some(b"P6") {
        return Err(Error::format(path, "not a binary PPM (P6) image"));
    }
    let mut number = |name: &str| -> Result<usize> {
        header_token(bytes, &mut pos)
            .and_then(|t| std::str::from_utf8(t).ok())
            .and_then(|t| t.parse().ok())
            .ok_or_else(|| Error::format(path, format!("malformed PPM header: bad {name}")))
    };
    let (width, height, maxval) = (number("width")?, number("height")?, number("maxval")?);
    if maxval != 255 {
        return Err(Error::format(path, format!("unsupported PPM maxval {maxval}; only 255 is accepted")));
    }
    // Exactly one whitespace byte separates the header from the raster.
    if pos >= bytes.len() || !bytes[pos].is_ascii_whitespace() {
        return Err(Error::format(path, "PPM header is not terminated"));
    }
    let payload = &bytes[pos + 1..];
    let expected = width * height * 3;
    if payload.len() != expected {
        return Err(Error::format(
            path,
            format!("PPM payload holds {} bytes, {width}x{height} needs {expected}", payload.len()),
        ));
    }
    ImageFrame::new(width, height, payload.to_vec()).map_err(|e| Error::format(path, e.to_string()))
}

pub(crate) fn encode_ppm(frame: &ImageFrame) -> Vec<u8> {
    let mut out = format!("P6\n{} {}\n255\n", frame.width(), frame.height()).into_bytes();
    out.extend_from_slice(frame.as_bytes());
    out
}

pub fn write_ppm(path: &Path, frame: &ImageFrame) -> Result<()> {
    fs::write(path, encode_ppm(frame)).map_err(|e| Error::io(path, e))
}
