//! Portable graymap I/O. Reads binary (`P5`) and plain (`P2`) files with any
//! maxval up to 65535; writes 16-bit binary files. Samples map linearly
//! between `0.0 <-> 0` and `1.0 <-> maxval`.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::grid::ImageGrid;

fn parse_err(message: impl Into<String>) -> Error {
    Error::Parse {
        line: 0,
        column: 0,
        message: message.into(),
    }
}

struct Header {
    binary: bool,
    width: usize,
    height: usize,
    maxval: u32,
    /// Offset of the first raster byte.
    data: usize,
}

/// Next whitespace-delimited header token, skipping `#` comments.
fn token(bytes: &[u8], pos: &mut usize) -> Result<String> {
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
    while *pos < bytes.len() && !bytes[*pos].is_ascii_whitespace() && bytes[*pos] != b'#' {
        *pos += 1;
    }
    if start == *pos {
        return Err(parse_err("truncated header"));
    }
    Ok(String::from_utf8_lossy(&bytes[start..*pos]).into_owned())
}

fn number(bytes: &[u8], pos: &mut usize, what: &str) -> Result<u32> {
    let t = token(bytes, pos)?;
    t.parse()
        .map_err(|_| parse_err(format!("bad {what} {t:?}")))
}

fn header(bytes: &[u8]) -> Result<Header> {
    let mut pos = 0;
    let binary = match token(bytes, &mut pos)?.as_str() {
        "P5" => true,
        "P2" => false,
        other => {
            return Err(parse_err(format!(
                "unsupported magic {other:?}, expected P5 or P2"
            )))
        }
    };
    let width = number(bytes, &mut pos, "width")? as usize;
    let height = number(bytes, &mut pos, "height")? as usize;
    let maxval = number(bytes, &mut pos, "maxval")?;
    if width == 0 || height == 0 {
        return Err(parse_err("zero image dimension"));
    }
    if maxval == 0 || maxval > 65535 {
        return Err(parse_err(format!("maxval {maxval} out of range 1..=65535")));
    }
    // exactly one whitespace byte separates the header from the raster
    if pos >= bytes.len() && binary {
        return Err(parse_err("missing raster"));
    }
    Ok(Header {
        binary,
        width,
        height,
        maxval,
        data: pos + 1,
    })
}

pub fn read_pgm<R: Read>(mut r: R) -> Result<ImageGrid> {
    let mut bytes = Vec::new();
    r.read_to_end(&mut bytes)?;
    let h = header(&bytes)?;
    let n = h.width * h.height;
    let scale = h.maxval as f64;
    let values: Vec<f64> = if h.binary {
        let wide = h.maxval > 255;
        let need = n * if wide { 2 } else { 1 };
        let raster = bytes.get(h.data..).unwrap_or(&[]);
        if raster.len() < need {
            return Err(parse_err(format!(
                "raster has {} bytes, expected {need}",
                raster.len()
            )));
        }
        if wide {
            raster[..need]
                .chunks_exact(2)
                .map(|b| u16::from_be_bytes([b[0], b[1]]) as f64 / scale)
                .collect()
        } else {
            raster[..need].iter().map(|&b| b as f64 / scale).collect()
        }
    } else {
        let mut pos = h.data - 1;
        (0..n)
            .map(|_| {
                let v = number(&bytes, &mut pos, "sample")?;
                if v > h.maxval {
                    return Err(parse_err(format!("sample {v} exceeds maxval {}", h.maxval)));
                }
                Ok(v as f64 / scale)
            })
            .collect::<Result<_>>()?
    };
    ImageGrid::new(h.width, h.height, values)
}

/// 16-bit binary graymap; values are clipped to `[0, 1]` and rounded.
pub fn write_pgm<W: Write>(mut w: W, img: &ImageGrid) -> Result<()> {
    write!(w, "P5\n{} {}\n65535\n", img.width(), img.height())?;
    let mut raster = Vec::with_capacity(img.len() * 2);
    for &v in img.values() {
        let q = (v.clamp(0.0, 1.0) * 65535.0).round() as u16;
        raster.extend_from_slice(&q.to_be_bytes());
    }
    w.write_all(&raster)?;
    w.flush()?;
    Ok(())
}

pub fn read_pgm_file(path: impl AsRef<Path>) -> Result<ImageGrid> {
    read_pgm(BufReader::new(File::open(path)?))
}

pub fn write_pgm_file(path: impl AsRef<Path>, img: &ImageGrid) -> Result<()> {
    write_pgm(BufWriter::new(File::create(path)?), img)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_16_bit() {
        let img = ImageGrid::new(3, 2, vec![0.0, 1.0, 0.5, 0.25, -0.3, 7.0]).unwrap();
        let mut buf = Vec::new();
        write_pgm(&mut buf, &img).unwrap();
        assert!(buf.starts_with(b"P5\n3 2\n65535\n"));
        assert_eq!(buf.len(), 13 + 12);
        let back = read_pgm(buf.as_slice()).unwrap();
        let want = [0.0, 1.0, 32768.0 / 65535.0, 16384.0 / 65535.0, 0.0, 1.0];
        assert_eq!(back.values(), &want);
        // quantized values survive a second trip unchanged
        let mut again = Vec::new();
        write_pgm(&mut again, &back).unwrap();
        assert_eq!(again, buf);
    }

    #[test]
    fn reads_8_bit_and_plain() {
        let mut raw = b"P5\n# comment\n2 1\n255\n".to_vec();
        raw.extend_from_slice(&[0, 255]);
        assert_eq!(read_pgm(raw.as_slice()).unwrap().values(), &[0.0, 1.0]);
        let plain = b"P2 2 2 # dims\n4\n0 1\n2 4\n";
        assert_eq!(
            read_pgm(&plain[..]).unwrap().values(),
            &[0.0, 0.25, 0.5, 1.0]
        );
    }

    #[test]
    fn rejects_malformed() {
        assert!(read_pgm(&b"P6\n1 1\n255\n\0\0\0"[..]).is_err());
        assert!(read_pgm(&b"P5\n2 2\n255\n\0"[..]).is_err());
        assert!(read_pgm(&b"P5\n2 2\n70000\n"[..]).is_err());
        assert!(read_pgm(&b"P2\n1 1\n3\n9\n"[..]).is_err());
        assert!(read_pgm(&b"P5\n0 2\n255\n"[..]).is_err());
        assert!(read_pgm(&b""[..]).is_err());
    }
}
