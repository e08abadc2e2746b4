//! Procedural pen strokes.
//!
//! A writer is a style transform (slant, scale, baseline wobble, smooth
//! warp, pen width and pressure) plus a personal signature shape. Words are
//! shared shapes drawn through the writer's transform. Strokes are
//! Catmull-Rom curves through control points in unit coordinates, rendered
//! as anti-aliased discs.

use std::f64::consts::TAU;

use rand::Rng as _;
use rand_distr::{Distribution, Normal};

use crate::imaging::GrayImage;
use crate::rng::{self, tag, Rng};

pub const CANVAS_WIDTH: usize = 300;
pub const CANVAS_HEIGHT: usize = 200;
pub const GENERATOR_VERSION: u32 = 1;

/// Control-point noise of genuine samples, in unit coordinates.
pub const GENUINE_JITTER: f64 = 0.012;
/// Extra forgery noise per unit of perturbation scale.
pub const SKILLED_NOISE_UNIT: f64 = 0.08;

const MARGIN: f64 = 15.0;
const SHAPE_TAG: u64 = 0x5347;

type Stroke = Vec<[f64; 2]>;

#[derive(Clone, Debug, PartialEq)]
pub struct WriterProfile {
    pub writer_seed: u64,
    pub slant: f64,
    pub x_scale: f64,
    pub y_scale: f64,
    pub wobble_amp: f64,
    pub wobble_freq: f64,
    pub wobble_phase: f64,
    /// Smooth displacement field: (amplitude, frequency, phase) per axis.
    pub warp: [[f64; 3]; 4],
    pub pen_radius: f64,
    pub pressure_start: f64,
    pub pressure_end: f64,
    pub ink_level: f64,
    pub background_level: f64,
    pub signature: Vec<Stroke>,
}

impl WriterProfile {
    pub fn new(writer_seed: u64) -> Self {
        let mut r = rng::stream(writer_seed, &[tag::WRITER]);
        let mut warp = [[0.0; 3]; 4];
        for w in &mut warp {
            *w = [r.random_range(0.01..0.035), r.random_range(0.5..2.0), r.random_range(0.0..TAU)];
        }
        let slant = r.random_range(-0.35..0.35);
        let x_scale = r.random_range(0.8..1.0);
        let y_scale = r.random_range(0.65..1.0);
        let wobble_amp = r.random_range(0.0..0.06);
        let wobble_freq = r.random_range(0.5..2.5);
        let wobble_phase = r.random_range(0.0..TAU);
        let pen_radius = r.random_range(1.0..2.2);
        let pressure_start = r.random_range(0.6..1.4);
        let pressure_end = r.random_range(0.6..1.4);
        let ink_level = r.random_range(5.0..70.0);
        let background_level = r.random_range(225.0..255.0);
        let mut shape_rng = rng::stream(writer_seed, &[tag::WRITER, SHAPE_TAG]);
        let signature = random_shape(&mut shape_rng, 3..=5, true);
        Self {
            writer_seed,
            slant,
            x_scale,
            y_scale,
            wobble_amp,
            wobble_freq,
            wobble_phase,
            warp,
            pen_radius,
            pressure_start,
            pressure_end,
            ink_level,
            background_level,
            signature,
        }
    }

    fn transform(&self, [x, y]: [f64; 2]) -> [f64; 2] {
        let dx = self.warp[0][0] * (TAU * self.warp[0][1] * y + self.warp[0][2]).sin()
            + self.warp[1][0] * (TAU * self.warp[1][1] * x + self.warp[1][2]).sin();
        let dy = self.warp[2][0] * (TAU * self.warp[2][1] * x + self.warp[2][2]).sin()
            + self.warp[3][0] * (TAU * self.warp[3][1] * y + self.warp[3][2]).sin()
            + self.wobble_amp * (TAU * self.wobble_freq * x + self.wobble_phase).sin();
        let yc = 0.5 + self.y_scale * (y - 0.5);
        let xc = 0.5 + self.x_scale * (x - 0.5) + self.slant * (0.5 - yc);
        [xc + dx, yc + dy]
    }
}

/// Shared shape of word `word_id` in the vocabulary keyed by `vocabulary_seed`.
pub fn word_shape(vocabulary_seed: u64, word_id: u32) -> Vec<Stroke> {
    let mut r = rng::stream(vocabulary_seed, &[tag::WORD, word_id as u64]);
    random_shape(&mut r, 2..=4, false)
}

/// Left-to-right strokes, each with its own horizontal band.
fn random_shape(r: &mut Rng, strokes: std::ops::RangeInclusive<usize>, flourish: bool) -> Vec<Stroke> {
    let n = r.random_range(strokes);
    let band = 0.9 / n as f64;
    let mut out = Vec::with_capacity(n + 1);
    for s in 0..n {
        let x0 = 0.05 + s as f64 * band;
        let points = r.random_range(4..=7);
        let stroke: Stroke = (0..points)
            .map(|i| {
                let u = i as f64 / (points - 1) as f64;
                let x = x0 + band * (0.1 + 0.9 * u) + r.random_range(-0.6..0.6) * band / points as f64;
                let y = r.random_range(0.2..0.8);
                [x, y]
            })
            .collect();
        out.push(stroke);
    }
    if flourish {
        let y = r.random_range(0.75..0.92);
        let x0 = r.random_range(0.05..0.3);
        let x1 = r.random_range(0.7..0.95);
        out.push(
            (0..4)
                .map(|i| {
                    let u = i as f64 / 3.0;
                    [x0 + (x1 - x0) * u, y + r.random_range(-0.05..0.05)]
                })
                .collect(),
        );
    }
    out
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum SampleKind {
    /// Handwritten word from a shared vocabulary.
    Word { vocabulary_seed: u64, word_id: u32 },
    Genuine,
    /// Imitation of the writer's signature at perturbation scale `scale`.
    Skilled { scale: f64 },
}

#[derive(Clone, Debug)]
pub struct SampleRequest<'a> {
    pub writer: &'a WriterProfile,
    pub kind: SampleKind,
    /// Control-point noise of the writer's own natural variation.
    pub jitter: f64,
    pub sample_seed: u64,
}

impl<'a> SampleRequest<'a> {
    pub fn new(writer: &'a WriterProfile, kind: SampleKind, sample_seed: u64) -> Self {
        Self {
            writer,
            kind,
            jitter: GENUINE_JITTER,
            sample_seed,
        }
    }
}

/// Renders one sample on a 300×200 canvas.
pub fn generate_sample(req: &SampleRequest<'_>) -> GrayImage {
    let w = req.writer;
    let mut r = rng::stream(req.sample_seed, &[tag::SAMPLE]);
    let (mut strokes, noise, pressure) = match req.kind {
        SampleKind::Word { vocabulary_seed, word_id } => (word_shape(vocabulary_seed, word_id), req.jitter, 1.0),
        SampleKind::Genuine => (w.signature.clone(), req.jitter, 1.0),
        SampleKind::Skilled { scale } => {
            let mut s = w.signature.clone();
            if s.len() > 2 && r.random_bool(0.5) {
                let i = r.random_range(0..s.len());
                s.remove(i);
            } else {
                let x = r.random_range(0.1..0.8);
                let y = r.random_range(0.15..0.85);
                s.push((0..4).map(|i| [x + 0.06 * i as f64, y + r.random_range(-0.08..0.08)]).collect());
            }
            (s, req.jitter + scale.max(0.0) * SKILLED_NOISE_UNIT, r.random_range(0.8..1.25))
        }
    };
    let normal = Normal::new(0.0, noise.max(0.0)).expect("finite std");
    let shift = [normal.sample(&mut r) * 0.5, normal.sample(&mut r) * 0.5];
    let zoom = 1.0 + normal.sample(&mut r);
    for stroke in &mut strokes {
        for p in stroke.iter_mut() {
            let x = 0.5 + zoom * (p[0] - 0.5) + shift[0] + normal.sample(&mut r);
            let y = 0.5 + zoom * (p[1] - 0.5) + shift[1] + normal.sample(&mut r);
            *p = w.transform([x, y]);
        }
    }
    render(w, &strokes, pressure)
}

fn render(w: &WriterProfile, strokes: &[Stroke], pressure: f64) -> GrayImage {
    let mut dark = vec![0.0f32; CANVAS_WIDTH * CANVAS_HEIGHT];
    let sx = CANVAS_WIDTH as f64 - 2.0 * MARGIN;
    let sy = CANVAS_HEIGHT as f64 - 2.0 * MARGIN;
    for stroke in strokes {
        let pts: Vec<[f64; 2]> = stroke.iter().map(|p| [MARGIN + p[0] * sx, MARGIN + p[1] * sy]).collect();
        let path = catmull_rom(&pts);
        let last = (path.len().max(2) - 1) as f64;
        for (i, &c) in path.iter().enumerate() {
            let u = i as f64 / last;
            let radius = w.pen_radius * pressure * (w.pressure_start + (w.pressure_end - w.pressure_start) * u);
            stamp(&mut dark, c, radius.max(0.5));
        }
    }
    let data = dark
        .iter()
        .map(|&d| {
            let v = w.background_level - d as f64 * (w.background_level - w.ink_level);
            v.round().clamp(0.0, 255.0) as u8
        })
        .collect();
    GrayImage::new(CANVAS_WIDTH, CANVAS_HEIGHT, data).expect("canvas dimensions")
}

/// Dense samples (≤ 0.5 px apart) along the Catmull-Rom spline.
fn catmull_rom(p: &[[f64; 2]]) -> Vec<[f64; 2]> {
    if p.len() < 2 {
        return p.to_vec();
    }
    let at = |i: isize| p[i.clamp(0, p.len() as isize - 1) as usize];
    let mut out = Vec::new();
    for i in 0..p.len() - 1 {
        let i = i as isize;
        let (p0, p1, p2, p3) = (at(i - 1), at(i), at(i + 1), at(i + 2));
        let chord = ((p2[0] - p1[0]).powi(2) + (p2[1] - p1[1]).powi(2)).sqrt();
        let steps = ((chord * 3.0).ceil() as usize).max(1);
        for s in 0..steps {
            let t = s as f64 / steps as f64;
            let (t2, t3) = (t * t, t * t * t);
            let f = |k: usize| {
                0.5 * (2.0 * p1[k]
                    + (p2[k] - p0[k]) * t
                    + (2.0 * p0[k] - 5.0 * p1[k] + 4.0 * p2[k] - p3[k]) * t2
                    + (3.0 * p1[k] - p0[k] - 3.0 * p2[k] + p3[k]) * t3)
            };
            out.push([f(0), f(1)]);
        }
    }
    out.push(*p.last().unwrap());
    out
}

fn stamp(dark: &mut [f32], [cx, cy]: [f64; 2], r: f64) {
    let x0 = ((cx - r - 1.0).floor().max(0.0)) as usize;
    let y0 = ((cy - r - 1.0).floor().max(0.0)) as usize;
    let x1 = ((cx + r + 1.0).ceil().max(0.0) as usize).min(CANVAS_WIDTH);
    let y1 = ((cy + r + 1.0).ceil().max(0.0) as usize).min(CANVAS_HEIGHT);
    for y in y0..y1 {
        for x in x0..x1 {
            let d = ((x as f64 + 0.5 - cx).powi(2) + (y as f64 + 0.5 - cy).powi(2)).sqrt();
            let cover = (r + 0.5 - d).clamp(0.0, 1.0) as f32;
            let px = &mut dark[y * CANVAS_WIDTH + x];
            if cover > *px {
                *px = cover;
            }
        }
    }
}
