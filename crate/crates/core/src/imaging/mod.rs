//! Image rasters and the preprocessing chain that turns a scanned signature
//! into network input: Otsu background removal, brightness inversion and a
//! bilinear resize to the fixed input size.

pub mod pgm;

use crate::error::{Error, Result};

/// Side length of the network input.
pub const INPUT_SIZE: usize = 242;

/// 8-bit grayscale raster, row-major, 0 = black, 255 = white.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct GrayImage {
    width: usize,
    height: usize,
    data: Vec<u8>,
}

impl GrayImage {
    pub fn new(width: usize, height: usize, data: Vec<u8>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::Usage(format!("empty image {width}x{height}")));
        }
        if data.len() != width * height {
            return Err(Error::dim("image data", width * height, data.len()));
        }
        Ok(Self {
            width,
            height,
            data,
        })
    }

    pub fn filled(width: usize, height: usize, value: u8) -> Result<Self> {
        Self::new(width, height, vec![value; width * height])
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn data(&self) -> &[u8] {
        &self.data
    }

    pub fn get(&self, x: usize, y: usize) -> u8 {
        self.data[y * self.width + x]
    }

    pub fn histogram(&self) -> [u64; 256] {
        let mut hist = [0u64; 256];
        for &v in &self.data {
            hist[v as usize] += 1;
        }
        hist
    }
}

/// Single-channel network input, `size`×`size` floats in [0, 1] with
/// background at 0.
#[derive(Clone, Debug, PartialEq)]
pub struct CanonicalInput {
    size: usize,
    data: Vec<f32>,
}

impl CanonicalInput {
    pub fn zeros(size: usize) -> Self {
        Self {
            size,
            data: vec![0.0; size * size],
        }
    }

    pub fn from_vec(size: usize, data: Vec<f32>) -> Result<Self> {
        if size == 0 {
            return Err(Error::Usage("zero input size".into()));
        }
        if data.len() != size * size {
            return Err(Error::dim("canonical input", size * size, data.len()));
        }
        if let Some(v) = data.iter().find(|v| !(0.0..=1.0).contains(*v)) {
            return Err(Error::Domain(format!("canonical value {v} outside [0,1]")));
        }
        Ok(Self { size, data })
    }

    pub fn size(&self) -> usize {
        self.size
    }

    /// Shape as (channels, height, width).
    pub fn shape(&self) -> [usize; 3] {
        [1, self.size, self.size]
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }
}

/// Result of Otsu's method.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct OtsuThreshold {
    /// Pixels strictly above this level are background.
    pub level: u8,
    /// Set when the image holds a single gray level.
    pub degenerate: bool,
}

/// Otsu threshold of the 256-bin histogram.
///
/// Class 0 holds levels `<= t`, class 1 levels `> t`. The between-class
/// variance `(n1*s0 - n0*s1)^2 / (N^2 * n0 * n1)` is compared exactly in
/// integer arithmetic; the smallest maximiser wins ties.
pub fn otsu_threshold(img: &GrayImage) -> OtsuThreshold {
    let hist = img.histogram();
    let occupied: Vec<usize> = (0..256).filter(|&l| hist[l] > 0).collect();
    if occupied.len() == 1 {
        return OtsuThreshold {
            level: occupied[0] as u8,
            degenerate: true,
        };
    }
    let total: u128 = hist.iter().map(|&c| c as u128).sum();
    let total_sum: u128 = hist
        .iter()
        .enumerate()
        .map(|(l, &c)| l as u128 * c as u128)
        .sum();

    let mut best: Option<(usize, Ratio)> = None;
    let (mut n0, mut s0) = (0u128, 0u128);
    for (t, &count) in hist.iter().enumerate() {
        n0 += count as u128;
        s0 += t as u128 * count as u128;
        let n1 = total - n0;
        if n0 == 0 || n1 == 0 {
            continue;
        }
        let s1 = total_sum - s0;
        let diff = (n1 * s0).abs_diff(n0 * s1);
        let score = Ratio {
            num: diff * diff,
            den: n0 * n1,
        };
        if best.as_ref().is_none_or(|(_, b)| score.gt(b)) {
            best = Some((t, score));
        }
    }
    let (level, _) = best.expect("two occupied levels give at least one split");
    OtsuThreshold {
        level: level as u8,
        degenerate: false,
    }
}

/// Non-negative fraction compared by 256-bit cross multiplication.
struct Ratio {
    num: u128,
    den: u128,
}

impl Ratio {
    fn gt(&self, other: &Ratio) -> bool {
        mul_wide(self.num, other.den) > mul_wide(other.num, self.den)
    }
}

/// Full 256-bit product as (high, low).
fn mul_wide(a: u128, b: u128) -> (u128, u128) {
    const MASK: u128 = u64::MAX as u128;
    let (a_hi, a_lo) = (a >> 64, a & MASK);
    let (b_hi, b_lo) = (b >> 64, b & MASK);
    let ll = a_lo * b_lo;
    let lh = a_lo * b_hi;
    let hl = a_hi * b_lo;
    let hh = a_hi * b_hi;
    let mid = (ll >> 64) + (lh & MASK) + (hl & MASK);
    let lo = (ll & MASK) | (mid << 64);
    let hi = hh + (lh >> 64) + (hl >> 64) + (mid >> 64);
    (hi, lo)
}

/// Runs the preprocessing chain to the standard 242×242 input.
pub fn preprocess(img: &GrayImage) -> CanonicalInput {
    preprocess_to(img, INPUT_SIZE)
}

/// Background removal, inversion and resize to `size`×`size`.
///
/// Ink pixels keep their gray value so stroke anti-aliasing survives. A
/// single-level image has no foreground and maps to all zeros.
pub fn preprocess_to(img: &GrayImage, size: usize) -> CanonicalInput {
    let otsu = otsu_threshold(img);
    if otsu.degenerate {
        return CanonicalInput::zeros(size);
    }
    let inverted: Vec<f32> = img
        .data()
        .iter()
        .map(|&v| if v > otsu.level { 0.0 } else { (255 - v) as f32 })
        .collect();
    let mut data = resize_bilinear(&inverted, img.width(), img.height(), size, size);
    for v in &mut data {
        *v = (*v / 255.0).clamp(0.0, 1.0);
    }
    CanonicalInput { size, data }
}

/// Bilinear resize with corner-aligned sampling: output corners land exactly
/// on input corners.
pub fn resize_bilinear(src: &[f32], w: usize, h: usize, out_w: usize, out_h: usize) -> Vec<f32> {
    assert_eq!(src.len(), w * h);
    let scale = |n_in: usize, n_out: usize| {
        if n_out > 1 {
            (n_in - 1) as f64 / (n_out - 1) as f64
        } else {
            0.0
        }
    };
    let (sx, sy) = (scale(w, out_w), scale(h, out_h));
    let taps = |o: usize, s: f64, n: usize| {
        let pos = o as f64 * s;
        let i0 = (pos.floor() as usize).min(n - 1);
        let i1 = (i0 + 1).min(n - 1);
        (i0, i1, (pos - i0 as f64) as f32)
    };
    let xs: Vec<_> = (0..out_w).map(|x| taps(x, sx, w)).collect();
    let mut out = Vec::with_capacity(out_w * out_h);
    for y in 0..out_h {
        let (y0, y1, fy) = taps(y, sy, h);
        let (row0, row1) = (&src[y0 * w..(y0 + 1) * w], &src[y1 * w..(y1 + 1) * w]);
        for &(x0, x1, fx) in &xs {
            let top = row0[x0] + (row0[x1] - row0[x0]) * fx;
            let bottom = row1[x0] + (row1[x1] - row1[x0]) * fx;
            out.push(top + (bottom - top) * fy);
        }
    }
    out
}
