//! Layout JSON and binary PGM (P5) files.

use std::fs;
use std::path::Path;

use super::grid::OccupancyGrid;
use super::room::RoomLayout;
use crate::{Error, Result};

pub fn layout_to_json(layout: &RoomLayout) -> String {
    serde_json::to_string_pretty(layout).expect("layout serializes")
}

pub fn layout_from_json(text: &str) -> Result<RoomLayout> {
    let layout: RoomLayout = serde_json::from_str(text)
        .map_err(|e| Error::parse("layout JSON", e.line(), e.column(), e.to_string()))?;
    layout.validate()?;
    Ok(layout)
}

pub fn write_layout(path: &Path, layout: &RoomLayout) -> Result<()> {
    fs::write(path, layout_to_json(layout)).map_err(|e| Error::io(path, e))
}

pub fn read_layout(path: &Path) -> Result<RoomLayout> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    layout_from_json(&text).map_err(|e| match e {
        Error::Parse {
            line,
            offset,
            message,
            ..
        } => Error::Parse {
            what: path.display().to_string(),
            line,
            offset,
            message,
        },
        other => other,
    })
}

/// An 8-bit grayscale image with maxval 255.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct GrayImage {
    pub width: usize,
    pub height: usize,
    pub pixels: Vec<u8>,
}

pub fn encode_pgm(img: &GrayImage) -> Vec<u8> {
    let mut out = format!("P5\n{} {}\n255\n", img.width, img.height).into_bytes();
    out.extend_from_slice(&img.pixels);
    out
}

struct HeaderCursor<'a> {
    bytes: &'a [u8],
    pos: usize,
    line: usize,
}

impl<'a> HeaderCursor<'a> {
    fn err(&self, msg: impl Into<String>) -> Error {
        Error::parse("PGM", self.line, self.pos, msg)
    }

    fn skip_ws(&mut self) {
        while self.pos < self.bytes.len() {
            match self.bytes[self.pos] {
                b'#' => {
                    while self.pos < self.bytes.len() && self.bytes[self.pos] != b'\n' {
                        self.pos += 1;
                    }
                }
                b'\n' => {
                    self.line += 1;
                    self.pos += 1;
                }
                c if c.is_ascii_whitespace() => self.pos += 1,
                _ => break,
            }
        }
    }

    fn token(&mut self) -> Result<&'a str> {
        self.skip_ws();
        let start = self.pos;
        while self.pos < self.bytes.len() && !self.bytes[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
        if start == self.pos {
            return Err(self.err("unexpected end of header"));
        }
        std::str::from_utf8(&self.bytes[start..self.pos]).map_err(|_| self.err("non-ASCII header"))
    }

    fn number(&mut self) -> Result<usize> {
        let tok = self.token()?;
        tok.parse()
            .map_err(|_| self.err(format!("expected a number, found {tok:?}")))
    }
}

pub fn decode_pgm(bytes: &[u8]) -> Result<GrayImage> {
    let mut cur = HeaderCursor {
        bytes,
        pos: 0,
        line: 1,
    };
    let magic = cur.token()?;
    if magic != "P5" {
        return Err(Error::parse(
            "PGM",
            1,
            0,
            format!("bad magic {magic:?}, expected P5"),
        ));
    }
    let width = cur.number()?;
    let height = cur.number()?;
    let maxval = cur.number()?;
    if maxval != 255 {
        return Err(cur.err(format!("maxval {maxval} unsupported, expected 255")));
    }
    // exactly one whitespace byte separates the header from the raster
    if cur.pos >= bytes.len() || !bytes[cur.pos].is_ascii_whitespace() {
        return Err(cur.err("missing separator after maxval"));
    }
    let start = cur.pos + 1;
    let expected = width
        .checked_mul(height)
        .ok_or_else(|| cur.err("image dimensions overflow"))?;
    let data = &bytes[start..];
    if data.len() != expected {
        return Err(Error::parse(
            "PGM",
            cur.line,
            start,
            format!("expected {expected} raster bytes, found {}", data.len()),
        ));
    }
    Ok(GrayImage {
        width,
        height,
        pixels: data.to_vec(),
    })
}

/// Grid as a PGM with values 0/255, row 0 at the `+y` edge.
pub fn grid_to_pgm(grid: &OccupancyGrid) -> Vec<u8> {
    let r = grid.resolution();
    encode_pgm(&GrayImage {
        width: r,
        height: r,
        pixels: grid.values().iter().map(|&v| v * 255).collect(),
    })
}

pub fn grid_from_pgm(bytes: &[u8]) -> Result<OccupancyGrid> {
    let img = decode_pgm(bytes)?;
    if img.width != img.height {
        return Err(Error::parse(
            "grid PGM",
            1,
            0,
            format!("grid must be square, got {}x{}", img.width, img.height),
        ));
    }
    let header_len = bytes.len() - img.pixels.len();
    let mut values = Vec::with_capacity(img.pixels.len());
    for (k, &p) in img.pixels.iter().enumerate() {
        match p {
            0 => values.push(0),
            255 => values.push(1),
            other => {
                return Err(Error::parse(
                    "grid PGM",
                    1,
                    header_len + k,
                    format!("pixel value {other} not allowed, expected 0 or 255"),
                ))
            }
        }
    }
    OccupancyGrid::from_values(img.width, values, None)
}

pub fn write_grid(path: &Path, grid: &OccupancyGrid) -> Result<()> {
    fs::write(path, grid_to_pgm(grid)).map_err(|e| Error::io(path, e))
}

pub fn read_grid(path: &Path) -> Result<OccupancyGrid> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    grid_from_pgm(&bytes)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::layout::{Camera, Point};

    fn square() -> RoomLayout {
        RoomLayout::new(
            "sq",
            [(0., 0.), (4., 0.), (4., 4.), (0., 4.)]
                .map(|(x, y)| Point::new(x, y))
                .to_vec(),
            3.2,
            Camera {
                x: 2.0,
                y: 2.0,
                height: 1.6,
            },
        )
        .unwrap()
    }

    #[test]
    fn layout_json_round_trip() {
        let l = square();
        let text = layout_to_json(&l);
        assert!(text.contains("\"corners\""));
        assert_eq!(layout_from_json(&text).unwrap(), l);
    }

    #[test]
    fn layout_schema_matches_interface() {
        let v: serde_json::Value = serde_json::from_str(&layout_to_json(&square())).unwrap();
        assert_eq!(v["corners"][1], serde_json::json!([4.0, 0.0]));
        assert_eq!(v["camera"]["height"], serde_json::json!(1.6));
        assert_eq!(v["ceiling_height"], serde_json::json!(3.2));
    }

    #[test]
    fn malformed_json_reports_position() {
        let err =
            layout_from_json("{\n  \"id\": \"x\",\n  \"corners\": [[0, 0],, ]\n}").unwrap_err();
        match err {
            Error::Parse { line, .. } => assert_eq!(line, 3),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn pgm_rejects_gray_levels() {
        let img = GrayImage {
            width: 8,
            height: 8,
            pixels: vec![128; 64],
        };
        let err = grid_from_pgm(&encode_pgm(&img)).unwrap_err();
        assert!(matches!(err, Error::Parse { offset, .. } if offset == 11));
    }

    #[test]
    fn pgm_header_errors() {
        assert!(decode_pgm(b"P2\n2 2\n255\n0000").is_err());
        assert!(decode_pgm(b"P5\n2 2\n65535\n0000").is_err());
        assert!(decode_pgm(b"P5\n2 2\n255\n000").is_err());
        let ok = decode_pgm(b"P5\n# comment\n2 2\n255\nabcd").unwrap();
        assert_eq!(ok.pixels, b"abcd");
    }

    #[test]
    fn grid_pgm_round_trip_bytes() {
        let g = crate::layout::rasterize(&square(), 16, Default::default()).unwrap();
        let bytes = grid_to_pgm(&g);
        let back = grid_from_pgm(&bytes).unwrap();
        assert_eq!(back.values(), g.values());
        assert_eq!(grid_to_pgm(&back), bytes);
    }
}
