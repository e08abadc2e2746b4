#![allow(dead_code)]

//! Independent reference implementations used as test oracles.

use osv_core::imaging::GrayImage;
use osv_core::svm::{KernelSpec, TrainingSet};
use rand::{Rng, SeedableRng};

/// Smallest threshold maximising the between-class variance, compared as
/// exact rationals; `None` for a single gray level.
pub fn brute_force_otsu(pixels: &[u8]) -> Option<u8> {
    let mut best: Option<(u8, u128, u128)> = None;
    for t in 0..=255u8 {
        let low: Vec<u128> = pixels.iter().filter(|&&p| p <= t).map(|&p| p as u128).collect();
        let high: Vec<u128> = pixels.iter().filter(|&&p| p > t).map(|&p| p as u128).collect();
        if low.is_empty() || high.is_empty() {
            continue;
        }
        let (n0, n1) = (low.len() as u128, high.len() as u128);
        let (s0, s1): (u128, u128) = (low.iter().sum(), high.iter().sum());
        let d = (n1 * s0).abs_diff(n0 * s1);
        let (num, den) = (d * d, n0 * n1);
        match best {
            Some((_, bn, bd)) if num * bd <= bn * den => {}
            _ => best = Some((t, num, den)),
        }
    }
    best.map(|(t, _, _)| t)
}

/// Random images of varied size and level structure: uniform, bimodal,
/// and drawn from a handful of levels so that ties are common.
pub fn random_image(seed: u64) -> GrayImage {
    let mut r = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let (w, h) = (r.random_range(1..40), r.random_range(1..40));
    let levels: Vec<u8> = (0..r.random_range(1..6)).map(|_| r.random()).collect();
    let style = seed % 3;
    let data = (0..w * h)
        .map(|_| match style {
            0 => r.random(),
            1 => {
                let centre: i32 = if r.random_bool(0.3) { 40 } else { 210 };
                (centre + r.random_range(-30..30)).clamp(0, 255) as u8
            }
            _ => levels[r.random_range(0..levels.len())],
        })
        .collect();
    GrayImage::new(w, h, data).unwrap()
}

/// Random score lists of 1 to 29 entries each, sometimes on a coarse
/// grid so that ties occur.
pub fn random_scores(seed: u64) -> (Vec<f64>, Vec<f64>) {
    let mut r = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let ng = r.random_range(1..30);
    let nf = r.random_range(1..30);
    let shift = r.random_range(-1.0..2.0);
    // Coarse grid so that ties occur.
    let coarse = r.random_bool(0.3);
    let mut draw = |offset: f64| {
        let v: f64 = r.random_range(-1.0..1.0) + offset;
        if coarse {
            (v * 4.0).round() / 4.0
        } else {
            v
        }
    };
    let g = (0..ng).map(|_| draw(shift)).collect();
    let f = (0..nf).map(|_| draw(0.0)).collect();
    (g, f)
}

/// EER from FAR/FRR counted directly at −∞, at every midpoint between
/// consecutive distinct scores and at +∞, interpolated at the sign change
/// of FAR − FRR.
pub fn brute_force_eer(genuine: &[f64], forgery: &[f64]) -> f64 {
    let mut distinct: Vec<f64> = genuine.iter().chain(forgery).copied().collect();
    distinct.sort_by(f64::total_cmp);
    distinct.dedup();
    let mut thresholds = vec![f64::NEG_INFINITY];
    thresholds.extend(distinct.windows(2).map(|w| 0.5 * (w[0] + w[1])));
    thresholds.push(f64::INFINITY);
    let rates: Vec<(f64, f64)> = thresholds
        .iter()
        .map(|&t| {
            let far = forgery.iter().filter(|&&s| s >= t).count() as f64 / forgery.len() as f64;
            let frr = genuine.iter().filter(|&&s| s < t).count() as f64 / genuine.len() as f64;
            (far, frr)
        })
        .collect();
    for k in 0..rates.len() {
        let (far, frr) = rates[k];
        if far == frr {
            return far;
        }
        if far < frr {
            let (pfar, pfrr) = rates[k - 1];
            let (da, db) = (pfar - pfrr, far - frr);
            return pfar + da / (da - db) * (far - pfar);
        }
    }
    unreachable!("FAR − FRR ends at −1")
}

/// Per-class box bounds as the solver defines them.
pub fn bounds(train: &TrainingSet, c: f64, balance: bool) -> Vec<f64> {
    let (np, nn) = train.class_counts();
    let n = train.len() as f64;
    train
        .y
        .iter()
        .map(|&y| match (balance, y > 0) {
            (false, _) => c,
            (true, true) => c * n / (2.0 * np as f64),
            (true, false) => c * n / (2.0 * nn as f64),
        })
        .collect()
}

pub fn gram(train: &TrainingSet, kernel: &KernelSpec) -> Vec<Vec<f64>> {
    train
        .x
        .iter()
        .map(|a| train.x.iter().map(|b| kernel.eval(a, b).unwrap()).collect())
        .collect()
}

/// `Σa − ½ Σ aᵢaⱼyᵢyⱼKᵢⱼ`.
pub fn dual_value(k: &[Vec<f64>], y: &[i8], a: &[f64]) -> f64 {
    let n = a.len();
    let mut quad = 0.0;
    for i in 0..n {
        for j in 0..n {
            quad += a[i] * a[j] * (y[i] * y[j]) as f64 * k[i][j];
        }
    }
    a.iter().sum::<f64>() - 0.5 * quad
}

/// Euclidean projection onto {0 ≤ aᵢ ≤ Cᵢ, Σ aᵢyᵢ = 0}, by bisection on
/// the multiplier of the equality constraint.
fn project(v: &[f64], y: &[f64], upper: &[f64]) -> Vec<f64> {
    let at = |lambda: f64| -> Vec<f64> {
        v.iter()
            .zip(y)
            .zip(upper)
            .map(|((vi, yi), ci)| (vi - lambda * yi).clamp(0.0, *ci))
            .collect()
    };
    let balance = |a: &[f64]| a.iter().zip(y).map(|(ai, yi)| ai * yi).sum::<f64>();
    let span = v.iter().map(|x| x.abs()).fold(0.0, f64::max) + upper.iter().cloned().fold(0.0, f64::max) + 1.0;
    let (mut lo, mut hi) = (-span, span);
    for _ in 0..80 {
        let mid = 0.5 * (lo + hi);
        if balance(&at(mid)) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    at(0.5 * (lo + hi))
}

/// Accelerated projected gradient ascent on the dual; returns the
/// multipliers and the objective.
pub fn projected_gradient(train: &TrainingSet, kernel: &KernelSpec, c: f64, balance: bool) -> (Vec<f64>, f64) {
    let k = gram(train, kernel);
    let n = train.len();
    let y: Vec<f64> = train.y.iter().map(|&v| v as f64).collect();
    let upper = bounds(train, c, balance);
    let q: Vec<Vec<f64>> = (0..n).map(|i| (0..n).map(|j| y[i] * y[j] * k[i][j]).collect()).collect();
    let lipschitz = q
        .iter()
        .map(|row| row.iter().map(|v| v.abs()).sum::<f64>())
        .fold(0.0, f64::max)
        .max(1e-12);
    let grad = |a: &[f64]| -> Vec<f64> { (0..n).map(|i| 1.0 - (0..n).map(|j| q[i][j] * a[j]).sum::<f64>()).collect() };
    let mut a = vec![0.0; n];
    let mut z = a.clone();
    let mut t = 1.0f64;
    for _ in 0..20_000 {
        let g = grad(&z);
        let step: Vec<f64> = z.iter().zip(&g).map(|(zi, gi)| zi + gi / lipschitz).collect();
        let next = project(&step, &y, &upper);
        let t_next = 0.5 * (1.0 + (1.0 + 4.0 * t * t).sqrt());
        let moved: f64 = next.iter().zip(&a).map(|(p, q)| (p - q).abs()).fold(0.0, f64::max);
        z = next
            .iter()
            .zip(&a)
            .map(|(p, q)| p + (t - 1.0) / t_next * (p - q))
            .collect();
        a = next;
        t = t_next;
        if moved < 1e-13 {
            break;
        }
    }
    let value = dual_value(&k, &train.y, &a);
    (a, value)
}

/// 20 points in [−1, 1]² with labels from a noisy linear rule; both
/// classes always present.
pub fn random_instance(seed: u64) -> TrainingSet {
    let mut r = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    loop {
        let x: Vec<Vec<f32>> = (0..20)
            .map(|_| vec![r.random_range(-1.0f32..1.0), r.random_range(-1.0f32..1.0)])
            .collect();
        let (wa, wb) = (r.random_range(-1.0f32..1.0), r.random_range(-1.0f32..1.0));
        let y: Vec<i8> = x
            .iter()
            .map(|p| {
                let s = wa * p[0] + wb * p[1] + r.random_range(-0.4f32..0.4);
                if s >= 0.0 {
                    1
                } else {
                    -1
                }
            })
            .collect();
        if let Ok(t) = TrainingSet::new(x, y) {
            return t;
        }
    }
}

/// Outcome of comparing the solver with the reference on many instances.
#[derive(Debug)]
pub struct SvmCheck {
    pub kernel: String,
    pub instances: usize,
    /// Largest `L_ref − L_smo` (positive when the solver is worse).
    pub worst_shortfall: f64,
    /// Largest `|L_smo − L_ref|`.
    pub worst_gap: f64,
    pub all_converged: bool,
    pub feasible: bool,
    /// Largest KKT margin violation over converged solutions.
    pub worst_kkt: f64,
}

/// Solver against reference on `instances` random problems.
pub fn svm_check(kernel: &KernelSpec, instances: usize, seed: u64) -> SvmCheck {
    use osv_core::svm::{solve_dual_with, SolverOptions};
    let mut out = SvmCheck {
        kernel: kernel.label(),
        instances,
        worst_shortfall: f64::NEG_INFINITY,
        worst_gap: 0.0,
        all_converged: true,
        feasible: true,
        worst_kkt: 0.0,
    };
    for i in 0..instances {
        let train = random_instance(seed * 1000 + i as u64);
        let c = [0.5, 1.0, 4.0][i % 3];
        let balance = i % 2 == 0;
        let got = solve_dual_with(&train, kernel, c, balance, &SolverOptions::default()).unwrap();
        let (_, reference) = projected_gradient(&train, kernel, c, balance);
        let k = gram(&train, kernel);
        let value = dual_value(&k, &train.y, &got.alphas);
        out.worst_shortfall = out.worst_shortfall.max(reference - value);
        out.worst_gap = out.worst_gap.max((reference - value).abs());
        out.all_converged &= got.solution.converged;

        let upper = bounds(&train, c, balance);
        let total_c: f64 = upper.iter().sum();
        let balance_sum: f64 = got.alphas.iter().zip(&train.y).map(|(a, &y)| a * y as f64).sum();
        let in_box = got.alphas.iter().zip(&upper).all(|(&a, &u)| (0.0..=u).contains(&a));
        out.feasible &= in_box && balance_sum.abs() <= 1e-6 * total_c;

        if got.solution.converged {
            for (idx, (&a, &u)) in got.alphas.iter().zip(&upper).enumerate() {
                let margin = train.y[idx] as f64 * got.solution.decision_score(&train.x[idx]).unwrap();
                let violation = if a == 0.0 {
                    (1.0 - margin).max(0.0)
                } else if a >= u {
                    (margin - 1.0).max(0.0)
                } else {
                    (margin - 1.0).abs()
                };
                out.worst_kkt = out.worst_kkt.max(violation);
            }
        }
    }
    out
}

pub fn all_kernels() -> Vec<KernelSpec> {
    vec![
        KernelSpec::linear(),
        KernelSpec::rbf(1.0),
        KernelSpec::log(2.0),
        KernelSpec::cosine(),
        KernelSpec::poly(0.5, 3, 1.0),
    ]
}
