//! Raster primitives: binary bitmaps, scalar gray images, PGM/PBM IO,
//! binarization, Gaussian blur and block-mean downsampling.

use std::io::Write as _;
use std::path::Path;

use crate::error::{Error, Result};
use crate::num::Real;

/// Binary raster, row-major, foreground = true.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Bitmap {
    pub width: usize,
    pub height: usize,
    pub pixels: Vec<bool>,
}

impl Bitmap {
    pub fn new(width: usize, height: usize) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::argument("bitmap dimensions must be >= 1"));
        }
        Ok(Self {
            width,
            height,
            pixels: vec![false; width * height],
        })
    }

    #[inline]
    pub fn get(&self, x: i64, y: i64) -> bool {
        if x < 0 || y < 0 || x >= self.width as i64 || y >= self.height as i64 {
            // border pixels are background
            return false;
        }
        self.pixels[y as usize * self.width + x as usize]
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, v: bool) {
        self.pixels[y * self.width + x] = v;
    }

    pub fn foreground_count(&self) -> usize {
        self.pixels.iter().filter(|p| **p).count()
    }

    pub fn foreground(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        let w = self.width;
        self.pixels
            .iter()
            .enumerate()
            .filter(|(_, p)| **p)
            .map(move |(i, _)| (i % w, i / w))
    }

    pub fn to_gray<F: Real>(&self) -> GrayImage<F> {
        GrayImage {
            width: self.width,
            height: self.height,
            values: self
                .pixels
                .iter()
                .map(|&p| if p { F::one() } else { F::zero() })
                .collect(),
        }
    }
}

/// Scalar raster with values in [0, 1], row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct GrayImage<F> {
    pub width: usize,
    pub height: usize,
    pub values: Vec<F>,
}

impl<F: Real> GrayImage<F> {
    pub fn new(width: usize, height: usize) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::argument("image dimensions must be >= 1"));
        }
        Ok(Self {
            width,
            height,
            values: vec![F::zero(); width * height],
        })
    }

    pub fn from_values(width: usize, height: usize, values: Vec<F>) -> Result<Self> {
        if values.len() != width * height {
            return Err(Error::argument(format!(
                "value count {} does not match {}x{}",
                values.len(),
                width,
                height
            )));
        }
        Ok(Self {
            width,
            height,
            values,
        })
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> F {
        self.values[y * self.width + x]
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, v: F) {
        self.values[y * self.width + x] = v;
    }

    pub fn total_mass(&self) -> F {
        self.values.iter().copied().sum()
    }

    /// Per-value map into another image of the same shape.
    pub fn map(&self, f: impl Fn(F) -> F) -> Self {
        Self {
            width: self.width,
            height: self.height,
            values: self.values.iter().map(|&v| f(v)).collect(),
        }
    }
}

/// Foreground = values at or above the threshold.
pub fn binarize<F: Real>(img: &GrayImage<F>, threshold: F) -> Result<Bitmap> {
    if !(threshold > F::zero() && threshold < F::one()) {
        return Err(Error::argument(format!(
            "binarize threshold must be in (0,1), got {threshold}"
        )));
    }
    Ok(Bitmap {
        width: img.width,
        height: img.height,
        pixels: img.values.iter().map(|&v| v >= threshold).collect(),
    })
}

/// Otsu's method over a 256-bin histogram. Returns a threshold in (0,1).
pub fn otsu_threshold<F: Real>(img: &GrayImage<F>) -> F {
    let mut hist = [0u64; 256];
    for &v in &img.values {
        let b = (v.as_f64() * 255.0).round().clamp(0.0, 255.0) as usize;
        hist[b] += 1;
    }
    let total = img.values.len() as f64;
    let sum_all: f64 = hist.iter().enumerate().map(|(i, &c)| i as f64 * c as f64).sum();
    let mut sum_b = 0.0;
    let mut w_b = 0.0;
    let mut best = 0usize;
    let mut best_var = -1.0;
    for t in 0..256 {
        w_b += hist[t] as f64;
        if w_b == 0.0 {
            continue;
        }
        let w_f = total - w_b;
        if w_f == 0.0 {
            break;
        }
        sum_b += t as f64 * hist[t] as f64;
        let m_b = sum_b / w_b;
        let m_f = (sum_all - sum_b) / w_f;
        let var = w_b * w_f * (m_b - m_f) * (m_b - m_f);
        if var > best_var {
            best_var = var;
            best = t;
        }
    }
    let t = (best as f64 + 0.5) / 255.0;
    F::c(t.clamp(1e-6, 1.0 - 1e-6))
}

fn gaussian_kernel<F: Real>(sigma: F) -> Vec<F> {
    let radius = (sigma.as_f64() * 3.0).ceil() as i64;
    let mut k: Vec<F> = (-radius..=radius)
        .map(|i| {
            let x = F::from_i64(i).unwrap();
            (-(x * x) / (F::c(2.0) * sigma * sigma)).exp()
        })
        .collect();
    let s: F = k.iter().copied().sum();
    for v in &mut k {
        *v /= s;
    }
    k
}

/// Separable Gaussian blur, kernel truncated at 3 sigma. At image edges the
/// kernel is renormalized over the in-bounds taps.
pub fn gaussian_blur<F: Real>(img: &GrayImage<F>, sigma: F) -> Result<GrayImage<F>> {
    if sigma < F::zero() {
        return Err(Error::argument(format!("blur sigma must be >= 0, got {sigma}")));
    }
    if sigma == F::zero() {
        return Ok(img.clone());
    }
    let kernel = gaussian_kernel(sigma);
    let radius = (kernel.len() / 2) as i64;
    let (w, h) = (img.width as i64, img.height as i64);

    let mut horiz = img.clone();
    for y in 0..h {
        for x in 0..w {
            let mut acc = F::zero();
            let mut weight = F::zero();
            for (ki, &kv) in kernel.iter().enumerate() {
                let sx = x + ki as i64 - radius;
                if sx >= 0 && sx < w {
                    acc += kv * img.get(sx as usize, y as usize);
                    weight += kv;
                }
            }
            horiz.set(x as usize, y as usize, acc / weight);
        }
    }
    let mut out = horiz.clone();
    for y in 0..h {
        for x in 0..w {
            let mut acc = F::zero();
            let mut weight = F::zero();
            for (ki, &kv) in kernel.iter().enumerate() {
                let sy = y + ki as i64 - radius;
                if sy >= 0 && sy < h {
                    acc += kv * horiz.get(x as usize, sy as usize);
                    weight += kv;
                }
            }
            out.set(x as usize, y as usize, acc / weight);
        }
    }
    Ok(out)
}

/// Block-mean downsampling to a res x res grid with fractional-area
/// weighting when the source dimensions are not divisible by res.
pub fn downsample_mean<F: Real>(img: &GrayImage<F>, res: usize) -> Result<GrayImage<F>> {
    if res < 1 {
        return Err(Error::argument("downsample resolution must be >= 1"));
    }
    let wx = axis_weights(img.width, res);
    let wy = axis_weights(img.height, res);
    let mut out = GrayImage::new(res, res)?;
    for (v, row) in wy.iter().enumerate() {
        for (u, col) in wx.iter().enumerate() {
            let mut acc = F::zero();
            let mut total = F::zero();
            for &(sy, fy) in row {
                for &(sx, fx) in col {
                    let wgt = F::c(fx * fy);
                    acc += wgt * img.get(sx, sy);
                    total += wgt;
                }
            }
            out.set(u, v, acc / total);
        }
    }
    Ok(out)
}

/// For each output cell along one axis, the covered source indices with
/// fractional overlap weights.
fn axis_weights(src: usize, res: usize) -> Vec<Vec<(usize, f64)>> {
    let cell = src as f64 / res as f64;
    (0..res)
        .map(|u| {
            let lo = u as f64 * cell;
            let hi = (u + 1) as f64 * cell;
            let first = lo.floor() as usize;
            let last = (hi.ceil() as usize).min(src);
            (first..last)
                .map(|s| {
                    let overlap = (hi.min((s + 1) as f64) - lo.max(s as f64)).max(0.0);
                    (s, overlap)
                })
                .filter(|&(_, f)| f > 0.0)
                .collect()
        })
        .collect()
}

/// Chamfer (3-4 weighted, scaled) approximation of the Euclidean distance
/// transform: distance from each foreground pixel to the nearest background.
pub fn distance_transform(img: &Bitmap) -> GrayImage<f64> {
    let (w, h) = (img.width, img.height);
    let big = (w + h) as f64 * 2.0;
    let mut d = vec![0.0f64; w * h];
    for i in 0..w * h {
        d[i] = if img.pixels[i] { big } else { 0.0 };
    }
    let (orth, diag) = (1.0, std::f64::consts::SQRT_2);
    // forward pass
    for y in 0..h {
        for x in 0..w {
            let i = y * w + x;
            if d[i] == 0.0 {
                continue;
            }
            let mut best = d[i];
            let mut relax = |xx: i64, yy: i64, cost: f64| {
                if xx < 0 || yy < 0 || xx >= w as i64 || yy >= h as i64 {
                    // outside the canvas counts as background
                    best = best.min(cost);
                } else {
                    best = best.min(d[yy as usize * w + xx as usize] + cost);
                }
            };
            relax(x as i64 - 1, y as i64, orth);
            relax(x as i64, y as i64 - 1, orth);
            relax(x as i64 - 1, y as i64 - 1, diag);
            relax(x as i64 + 1, y as i64 - 1, diag);
            d[i] = best;
        }
    }
    // backward pass
    for y in (0..h).rev() {
        for x in (0..w).rev() {
            let i = y * w + x;
            if d[i] == 0.0 {
                continue;
            }
            let mut best = d[i];
            let mut relax = |xx: i64, yy: i64, cost: f64| {
                if xx < 0 || yy < 0 || xx >= w as i64 || yy >= h as i64 {
                    best = best.min(cost);
                } else {
                    best = best.min(d[yy as usize * w + xx as usize] + cost);
                }
            };
            relax(x as i64 + 1, y as i64, orth);
            relax(x as i64, y as i64 + 1, orth);
            relax(x as i64 + 1, y as i64 + 1, diag);
            relax(x as i64 - 1, y as i64 + 1, diag);
            d[i] = best;
        }
    }
    GrayImage {
        width: w,
        height: h,
        values: d,
    }
}

// ---------------------------------------------------------------------------
// PGM / PBM IO
// ---------------------------------------------------------------------------

struct ByteCursor<'a> {
    data: &'a [u8],
    pos: usize,
}

impl<'a> ByteCursor<'a> {
    fn parse_err(&self, message: impl Into<String>) -> Error {
        Error::Parse {
            offset: self.pos,
            message: message.into(),
        }
    }

    fn skip_ws_and_comments(&mut self) {
        loop {
            while self.pos < self.data.len() && self.data[self.pos].is_ascii_whitespace() {
                self.pos += 1;
            }
            if self.pos < self.data.len() && self.data[self.pos] == b'#' {
                while self.pos < self.data.len() && self.data[self.pos] != b'\n' {
                    self.pos += 1;
                }
            } else {
                return;
            }
        }
    }

    fn next_token(&mut self) -> Result<&'a [u8]> {
        self.skip_ws_and_comments();
        let start = self.pos;
        while self.pos < self.data.len() && !self.data[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
        if start == self.pos {
            return Err(Error::Parse {
                offset: start,
                message: "unexpected end of file".into(),
            });
        }
        Ok(&self.data[start..self.pos])
    }

    fn next_usize(&mut self, what: &str) -> Result<usize> {
        let start_err_pos = self.pos;
        let tok = self.next_token()?;
        std::str::from_utf8(tok)
            .ok()
            .and_then(|s| s.parse::<usize>().ok())
            .ok_or_else(|| Error::Parse {
                offset: start_err_pos,
                message: format!("expected {what}"),
            })
    }
}

/// Load a P1/P4 PBM or P2/P5 PGM file into a gray image with values in [0,1].
/// PBM black (1) maps to foreground value 1.
pub fn load_pgm<F: Real>(path: impl AsRef<Path>) -> Result<GrayImage<F>> {
    let path = path.as_ref();
    let data = std::fs::read(path).map_err(|e| Error::io(path.display().to_string(), e))?;
    parse_netpbm(&data)
}

pub fn parse_netpbm<F: Real>(data: &[u8]) -> Result<GrayImage<F>> {
    let mut cur = ByteCursor { data, pos: 0 };
    let magic = cur.next_token()?.to_vec();
    let width = cur.next_usize("width")?;
    let height = cur.next_usize("height")?;
    if width == 0 || height == 0 {
        return Err(cur.parse_err("zero image dimension"));
    }
    let count = width * height;
    let mut values = Vec::with_capacity(count);
    match magic.as_slice() {
        b"P1" => {
            // ascii bitmap: 1 = black = foreground
            for _ in 0..count {
                let pos = cur.pos;
                let tok = cur.next_token()?;
                // P1 digits may be packed without whitespace
                for (k, b) in tok.iter().enumerate() {
                    match b {
                        b'0' => values.push(F::zero()),
                        b'1' => values.push(F::one()),
                        _ => {
                            return Err(Error::Parse {
                                offset: pos + k,
                                message: "expected 0 or 1 in P1 payload".into(),
                            })
                        }
                    }
                }
                if values.len() >= count {
                    break;
                }
            }
            if values.len() < count {
                return Err(cur.parse_err("truncated P1 payload"));
            }
            values.truncate(count);
        }
        b"P4" => {
            cur.skip_single_whitespace()?;
            let row_bytes = width.div_ceil(8);
            let need = row_bytes * height;
            if cur.data.len() - cur.pos < need {
                return Err(cur.parse_err("truncated P4 payload"));
            }
            for y in 0..height {
                let row = &cur.data[cur.pos + y * row_bytes..cur.pos + (y + 1) * row_bytes];
                for x in 0..width {
                    let bit = (row[x / 8] >> (7 - x % 8)) & 1;
                    values.push(if bit == 1 { F::one() } else { F::zero() });
                }
            }
        }
        b"P2" => {
            let maxval = cur.next_usize("maxval")?;
            if maxval == 0 || maxval > 65535 {
                return Err(cur.parse_err("maxval out of range"));
            }
            let m = F::from_usize_c(maxval);
            for _ in 0..count {
                let pos = cur.pos;
                let v = cur.next_usize("gray value")?;
                if v > maxval {
                    return Err(Error::Parse {
                        offset: pos,
                        message: format!("gray value {v} exceeds maxval {maxval}"),
                    });
                }
                values.push(F::from_usize_c(v) / m);
            }
        }
        b"P5" => {
            let maxval = cur.next_usize("maxval")?;
            if maxval == 0 || maxval > 255 {
                return Err(cur.parse_err("P5 maxval must be in 1..=255"));
            }
            cur.skip_single_whitespace()?;
            if cur.data.len() - cur.pos < count {
                return Err(cur.parse_err("truncated P5 payload"));
            }
            let m = F::from_usize_c(maxval);
            for i in 0..count {
                let v = cur.data[cur.pos + i] as usize;
                if v > maxval {
                    return Err(Error::Parse {
                        offset: cur.pos + i,
                        message: format!("gray byte {v} exceeds maxval {maxval}"),
                    });
                }
                values.push(F::from_usize_c(v) / m);
            }
        }
        other => {
            return Err(Error::Parse {
                offset: 0,
                message: format!(
                    "unsupported magic {:?}, expected P1/P2/P4/P5",
                    String::from_utf8_lossy(other)
                ),
            })
        }
    }
    GrayImage::from_values(width, height, values)
}

impl<'a> ByteCursor<'a> {
    /// Binary payloads begin after exactly one whitespace byte.
    fn skip_single_whitespace(&mut self) -> Result<()> {
        if self.pos < self.data.len() && self.data[self.pos].is_ascii_whitespace() {
            self.pos += 1;
            Ok(())
        } else {
            Err(self.parse_err("expected whitespace before binary payload"))
        }
    }
}

/// Write a gray image as binary P5 PGM with maxval 255.
pub fn save_pgm<F: Real>(img: &GrayImage<F>, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let bytes = encode_pgm(img);
    std::fs::write(path, bytes).map_err(|e| Error::io(path.display().to_string(), e))
}

pub fn encode_pgm<F: Real>(img: &GrayImage<F>) -> Vec<u8> {
    let mut out = Vec::with_capacity(32 + img.values.len());
    write!(out, "P5\n{} {}\n255\n", img.width, img.height).unwrap();
    out.extend(
        img.values
            .iter()
            .map(|&v| (v.as_f64() * 255.0).round().clamp(0.0, 255.0) as u8),
    );
    out
}
