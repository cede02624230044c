//! 8-bit binary PGM (P5) images mapped to single-channel tensors in `[0, 1]`.

use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::tensor::Tensor;

/// Encodes an `H×W×1` tensor, clamping to `[0, 1]` and rounding to 0..=255.
pub fn encode(image: &Tensor) -> Result<Vec<u8>> {
    let (h, w, c) = image.dims3()?;
    if c != 1 {
        return Err(Error::invalid("pgm", format!("expected one channel, got {c}")));
    }
    let mut out = format!("P5\n{w} {h}\n255\n").into_bytes();
    out.extend(image.data().iter().map(|&v| (v.clamp(0.0, 1.0) * 255.0).round() as u8));
    Ok(out)
}

fn header_fields(bytes: &[u8]) -> std::result::Result<([usize; 3], usize), String> {
    let mut fields = [0usize; 3];
    let mut pos = 2;
    for field in &mut fields {
        loop {
            match bytes.get(pos) {
                Some(b'#') => {
                    while bytes.get(pos).is_some_and(|&b| b != b'\n') {
                        pos += 1;
                    }
                }
                Some(b) if b.is_ascii_whitespace() => pos += 1,
                Some(_) => break,
                None => return Err("truncated header".into()),
            }
        }
        let start = pos;
        while bytes.get(pos).is_some_and(u8::is_ascii_digit) {
            pos += 1;
        }
        *field = std::str::from_utf8(&bytes[start..pos])
            .ok()
            .and_then(|s| s.parse().ok())
            .ok_or("malformed header number")?;
    }
    // exactly one whitespace byte separates the header from the raster
    match bytes.get(pos) {
        Some(b) if b.is_ascii_whitespace() => Ok((fields, pos + 1)),
        _ => Err("missing separator after header".into()),
    }
}

pub fn decode(bytes: &[u8], path: &Path) -> Result<Tensor> {
    let err = |reason: String| Error::Image {
        path: path.to_path_buf(),
        reason,
    };
    if !bytes.starts_with(b"P5") {
        return Err(err("not a binary PGM (P5) file".into()));
    }
    let ([w, h, maxval], offset) = header_fields(bytes).map_err(err)?;
    if w == 0 || h == 0 {
        return Err(err(format!("empty {w}×{h} image")));
    }
    if maxval == 0 || maxval > 255 {
        return Err(err(format!("unsupported max value {maxval}")));
    }
    let raster = &bytes[offset..];
    if raster.len() != w * h {
        return Err(err(format!("expected {} pixel bytes, found {}", w * h, raster.len())));
    }
    let scale = maxval as f64;
    Tensor::new(
        vec![h, w, 1],
        raster.iter().map(|&b| (b as f64 / scale).min(1.0)).collect(),
    )
}

pub fn write(path: &Path, image: &Tensor) -> Result<()> {
    fs::write(path, encode(image)?).map_err(|e| Error::io(format!("writing {}", path.display()), e))
}

pub fn read(path: &Path) -> Result<Tensor> {
    let bytes = fs::read(path).map_err(|e| Error::io(format!("reading {}", path.display()), e))?;
    decode(&bytes, path)
}

/// Rounds values to the 8-bit grid a PGM round trip would produce.
pub fn quantize(image: &Tensor) -> Tensor {
    image.map(|v| (v.clamp(0.0, 1.0) * 255.0).round() / 255.0)
}
