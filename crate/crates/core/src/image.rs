//! Single-channel images, binary masks, connected components and PGM I/O.

use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::tensor::{rdf, Tensor};

#[derive(Debug, Clone, PartialEq)]
pub struct Image {
    height: usize,
    width: usize,
    pixels: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Mask {
    height: usize,
    width: usize,
    bits: Vec<bool>,
}

impl Image {
    pub fn new(height: usize, width: usize, pixels: Vec<f64>) -> Result<Self> {
        if height == 0 || width == 0 || pixels.len() != height * width {
            return Err(Error::InvalidArgument(format!(
                "image {height}x{width} cannot hold {} pixels",
                pixels.len()
            )));
        }
        Ok(Image {
            height,
            width,
            pixels,
        })
    }

    pub fn filled(height: usize, width: usize, v: f64) -> Self {
        Image::new(height, width, vec![v; height * width]).expect("positive extents")
    }

    pub fn from_fn(height: usize, width: usize, f: impl Fn(usize, usize) -> f64) -> Self {
        let mut pixels = Vec::with_capacity(height * width);
        for y in 0..height {
            for x in 0..width {
                pixels.push(f(y, x));
            }
        }
        Image::new(height, width, pixels).expect("positive extents")
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn pixels(&self) -> &[f64] {
        &self.pixels
    }

    pub fn pixels_mut(&mut self) -> &mut [f64] {
        &mut self.pixels
    }

    pub fn get(&self, y: usize, x: usize) -> f64 {
        self.pixels[y * self.width + x]
    }

    pub fn set(&mut self, y: usize, x: usize, v: f64) {
        self.pixels[y * self.width + x] = v;
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Image {
        Image {
            height: self.height,
            width: self.width,
            pixels: self.pixels.iter().map(|&v| f(v)).collect(),
        }
    }

    /// Pixels outside the mask set to zero.
    pub fn masked(&self, mask: &Mask) -> Image {
        assert_eq!((self.height, self.width), (mask.height, mask.width));
        Image {
            height: self.height,
            width: self.width,
            pixels: self
                .pixels
                .iter()
                .zip(&mask.bits)
                .map(|(&v, &m)| if m { v } else { 0.0 })
                .collect(),
        }
    }

    pub fn to_tensor(&self) -> Tensor {
        Tensor::new(vec![self.height, self.width], self.pixels.clone()).expect("valid image")
    }

    pub fn from_tensor(t: &Tensor) -> Result<Image> {
        match t.shape() {
            [h, w] => Image::new(*h, *w, t.data().to_vec()),
            [1, h, w] => Image::new(*h, *w, t.data().to_vec()),
            s => Err(Error::InvalidArgument(format!(
                "expected a 2-D image tensor, got shape {s:?}"
            ))),
        }
    }

    /// Reads an `RDF1` tensor or a PGM (P2/P5, 8 or 16 bit), chosen by extension.
    pub fn load(path: impl AsRef<Path>) -> Result<Image> {
        let path = path.as_ref();
        match path.extension().and_then(|e| e.to_str()) {
            Some("pgm") => read_pgm(path),
            _ => Image::from_tensor(&rdf::read(path)?),
        }
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        match path.extension().and_then(|e| e.to_str()) {
            Some("pgm") => write_pgm(path, self, 65535),
            _ => rdf::write(path, &self.to_tensor()),
        }
    }
}

impl Mask {
    pub fn new(height: usize, width: usize, bits: Vec<bool>) -> Result<Self> {
        if height == 0 || width == 0 || bits.len() != height * width {
            return Err(Error::InvalidArgument(format!(
                "mask {height}x{width} cannot hold {} bits",
                bits.len()
            )));
        }
        Ok(Mask {
            height,
            width,
            bits,
        })
    }

    pub fn full(height: usize, width: usize) -> Self {
        Mask::new(height, width, vec![true; height * width]).expect("positive extents")
    }

    pub fn from_fn(height: usize, width: usize, f: impl Fn(usize, usize) -> bool) -> Self {
        let bits = (0..height * width).map(|i| f(i / width, i % width)).collect();
        Mask::new(height, width, bits).expect("positive extents")
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn bits(&self) -> &[bool] {
        &self.bits
    }

    pub fn get(&self, y: usize, x: usize) -> bool {
        self.bits[y * self.width + x]
    }

    pub fn count(&self) -> usize {
        self.bits.iter().filter(|&&b| b).count()
    }

    pub fn to_image(&self) -> Image {
        Image {
            height: self.height,
            width: self.width,
            pixels: self.bits.iter().map(|&b| if b { 1.0 } else { 0.0 }).collect(),
        }
    }

    /// Pixels with value at least 0.5.
    pub fn from_image(img: &Image) -> Mask {
        Mask {
            height: img.height,
            width: img.width,
            bits: img.pixels.iter().map(|&v| v >= 0.5).collect(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Connectivity {
    Four,
    Eight,
}

impl Connectivity {
    fn offsets(self) -> &'static [(isize, isize)] {
        match self {
            Connectivity::Four => &[(-1, 0), (0, -1), (0, 1), (1, 0)],
            Connectivity::Eight => &[
                (-1, -1),
                (-1, 0),
                (-1, 1),
                (0, -1),
                (0, 1),
                (1, -1),
                (1, 0),
                (1, 1),
            ],
        }
    }
}

/// Connected components of the active pixels, where two neighbouring
/// active pixels join when `joined(a, b)` holds.
///
/// Components are numbered in raster order of their first pixel; the
/// returned labels use `usize::MAX` for inactive pixels.
pub fn components(
    height: usize,
    width: usize,
    conn: Connectivity,
    active: impl Fn(usize) -> bool,
    joined: impl Fn(usize, usize) -> bool,
) -> (Vec<usize>, Vec<usize>) {
    let mut labels = vec![usize::MAX; height * width];
    let mut sizes = Vec::new();
    let mut stack = Vec::new();
    for start in 0..height * width {
        if labels[start] != usize::MAX || !active(start) {
            continue;
        }
        let id = sizes.len();
        labels[start] = id;
        stack.push(start);
        let mut size = 0;
        while let Some(p) = stack.pop() {
            size += 1;
            let (y, x) = ((p / width) as isize, (p % width) as isize);
            for &(dy, dx) in conn.offsets() {
                let (ny, nx) = (y + dy, x + dx);
                if ny < 0 || nx < 0 || ny >= height as isize || nx >= width as isize {
                    continue;
                }
                let q = ny as usize * width + nx as usize;
                if labels[q] == usize::MAX && active(q) && joined(p, q) {
                    labels[q] = id;
                    stack.push(q);
                }
            }
        }
        sizes.push(size);
    }
    (labels, sizes)
}

fn pgm_tokens(bytes: &[u8], count: usize) -> Result<(Vec<String>, usize)> {
    let mut tokens = Vec::new();
    let mut i = 0;
    while tokens.len() < count {
        while i < bytes.len() && (bytes[i].is_ascii_whitespace() || bytes[i] == b'#') {
            if bytes[i] == b'#' {
                while i < bytes.len() && bytes[i] != b'\n' {
                    i += 1;
                }
            } else {
                i += 1;
            }
        }
        let start = i;
        while i < bytes.len() && !bytes[i].is_ascii_whitespace() {
            i += 1;
        }
        if start == i {
            return Err(Error::Format {
                what: "PGM",
                detail: "truncated header".into(),
            });
        }
        tokens.push(String::from_utf8_lossy(&bytes[start..i]).into_owned());
    }
    Ok((tokens, i))
}

pub fn read_pgm(path: impl AsRef<Path>) -> Result<Image> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_pgm(&bytes)
}

pub fn decode_pgm(bytes: &[u8]) -> Result<Image> {
    let bad = |d: String| Error::Format {
        what: "PGM",
        detail: d,
    };
    let (tok, end) = pgm_tokens(bytes, 4)?;
    let num = |s: &str| s.parse::<usize>().map_err(|_| bad(format!("bad number {s:?}")));
    let (w, h, maxval) = (num(&tok[1])?, num(&tok[2])?, num(&tok[3])?);
    if maxval == 0 || maxval > 65535 {
        return Err(bad(format!("maxval {maxval} out of range")));
    }
    let n = w * h;
    let pixels: Vec<f64> = match tok[0].as_str() {
        "P2" => {
            let body = std::str::from_utf8(&bytes[end..]).map_err(|e| bad(e.to_string()))?;
            let vals = body
                .split_ascii_whitespace()
                .take(n)
                .map(|s| num(s).map(|v| v as f64))
                .collect::<Result<Vec<_>>>()?;
            if vals.len() != n {
                return Err(bad(format!("expected {n} samples, found {}", vals.len())));
            }
            vals
        }
        "P5" => {
            let body = &bytes[(end + 1).min(bytes.len())..];
            let wide = maxval > 255;
            let need = if wide { 2 * n } else { n };
            if body.len() < need {
                return Err(bad(format!("expected {need} payload bytes, found {}", body.len())));
            }
            if wide {
                body[..need]
                    .chunks_exact(2)
                    .map(|c| u16::from_be_bytes([c[0], c[1]]) as f64)
                    .collect()
            } else {
                body[..n].iter().map(|&b| b as f64).collect()
            }
        }
        magic => return Err(bad(format!("unsupported magic {magic:?}"))),
    };
    Image::new(h, w, pixels)
}

/// Binary PGM; values are rounded and clamped to `[0, maxval]`.
pub fn write_pgm(path: impl AsRef<Path>, img: &Image, maxval: u16) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, encode_pgm(img, maxval)).map_err(|e| Error::io(path, e))
}

pub fn encode_pgm(img: &Image, maxval: u16) -> Vec<u8> {
    let mut out = format!("P5\n{} {}\n{}\n", img.width, img.height, maxval).into_bytes();
    for &v in &img.pixels {
        let q = v.round().clamp(0.0, maxval as f64) as u16;
        if maxval > 255 {
            out.extend_from_slice(&q.to_be_bytes());
        } else {
            out.push(q as u8);
        }
    }
    out
}
