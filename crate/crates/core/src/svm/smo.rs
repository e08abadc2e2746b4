//! Dual solver for the soft-margin SVM.
//!
//! Maximises `L_d(a) = Σ aᵢ − ½ Σ aᵢ aⱼ yᵢ yⱼ k(xᵢ, xⱼ)` subject to
//! `Σ aᵢ yᵢ = 0` and `0 ≤ aᵢ ≤ C(yᵢ)` by sequential minimal optimisation:
//! each step moves the maximal KKT-violating pair analytically.

use super::kernel::KernelSpec;
use crate::error::{Error, Result};

/// Labelled training points; `y` is +1 (genuine) or −1 (forgery).
#[derive(Clone, Debug, PartialEq)]
pub struct TrainingSet {
    pub x: Vec<Vec<f32>>,
    pub y: Vec<i8>,
}

impl TrainingSet {
    pub fn new(x: Vec<Vec<f32>>, y: Vec<i8>) -> Result<Self> {
        if x.len() != y.len() {
            return Err(Error::dim("labels", x.len(), y.len()));
        }
        if x.len() < 2 {
            return Err(Error::Usage(format!("need at least 2 training points, got {}", x.len())));
        }
        if let Some(bad) = y.iter().find(|&&v| v != 1 && v != -1) {
            return Err(Error::Usage(format!("label {bad} is not ±1")));
        }
        if !y.contains(&1) || !y.contains(&-1) {
            return Err(Error::Usage("both classes must be present".into()));
        }
        let dim = x[0].len();
        if let Some(v) = x.iter().find(|v| v.len() != dim) {
            return Err(Error::dim("feature vector", dim, v.len()));
        }
        Ok(Self { x, y })
    }

    pub fn len(&self) -> usize {
        self.y.len()
    }

    pub fn is_empty(&self) -> bool {
        self.y.is_empty()
    }

    pub fn class_counts(&self) -> (usize, usize) {
        let pos = self.y.iter().filter(|&&v| v == 1).count();
        (pos, self.y.len() - pos)
    }
}

/// Per-class multipliers of C.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ClassWeights {
    pub positive: f64,
    pub negative: f64,
}

impl ClassWeights {
    pub const UNIT: ClassWeights = ClassWeights {
        positive: 1.0,
        negative: 1.0,
    };

    /// `w_c = n / (2 · n_c)`: weights inversely proportional to class size.
    pub fn balanced(n_pos: usize, n_neg: usize) -> Self {
        let n = (n_pos + n_neg) as f64;
        Self {
            positive: n / (2.0 * n_pos as f64),
            negative: n / (2.0 * n_neg as f64),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SupportVector {
    pub x: Vec<f32>,
    pub y: i8,
    pub alpha: f64,
}

/// A trained binary verifier.
#[derive(Clone, Debug, PartialEq)]
pub struct DualSolution {
    pub kernel: KernelSpec,
    pub c: f64,
    pub weights: ClassWeights,
    pub support: Vec<SupportVector>,
    pub bias: f64,
    pub converged: bool,
    pub iterations: u32,
}

impl DualSolution {
    pub fn upper_bound(&self, y: i8) -> f64 {
        box_bound(self.c, &self.weights, y)
    }

    /// `f(x) = Σ aᵢ yᵢ k(xᵢ, x) + b`; larger means more likely genuine.
    pub fn decision_score(&self, x: &[f32]) -> Result<f64> {
        let mut f = self.bias;
        for sv in &self.support {
            f += sv.alpha * sv.y as f64 * self.kernel.eval(&sv.x, x)?;
        }
        Ok(f)
    }
}

fn box_bound(c: f64, w: &ClassWeights, y: i8) -> f64 {
    if y > 0 {
        c * w.positive
    } else {
        c * w.negative
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SolverOptions {
    /// Stop when the maximal KKT violation drops to this level.
    pub tolerance: f64,
    /// Cap on pair updates.
    pub max_iterations: u32,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            tolerance: 1e-3,
            max_iterations: 100_000,
        }
    }
}

/// Solver output including per-point multipliers in training order.
#[derive(Clone, Debug)]
pub struct SolverOutput {
    pub solution: DualSolution,
    pub alphas: Vec<f64>,
    pub objective: f64,
    pub max_violation: f64,
}

/// `L_d(a)` for explicit multipliers, evaluated from the kernel.
pub fn dual_objective(train: &TrainingSet, kernel: &KernelSpec, alphas: &[f64]) -> Result<f64> {
    let n = train.len();
    let mut quad = 0.0;
    for i in 0..n {
        if alphas[i] == 0.0 {
            continue;
        }
        for j in 0..n {
            if alphas[j] == 0.0 {
                continue;
            }
            let yy = (train.y[i] * train.y[j]) as f64;
            quad += alphas[i] * alphas[j] * yy * kernel.eval(&train.x[i], &train.x[j])?;
        }
    }
    Ok(alphas.iter().sum::<f64>() - 0.5 * quad)
}

pub fn solve_dual(train: &TrainingSet, kernel: &KernelSpec, c: f64, balance: bool) -> Result<DualSolution> {
    Ok(solve_dual_with(train, kernel, c, balance, &SolverOptions::default())?.solution)
}

pub fn solve_dual_with(
    train: &TrainingSet,
    kernel: &KernelSpec,
    c: f64,
    balance: bool,
    opts: &SolverOptions,
) -> Result<SolverOutput> {
    kernel.validate()?;
    if !(c > 0.0 && c.is_finite()) {
        return Err(Error::Config(format!("C must be positive, got {c}")));
    }
    let n = train.len();
    let (n_pos, n_neg) = train.class_counts();
    let weights = if balance {
        ClassWeights::balanced(n_pos, n_neg)
    } else {
        ClassWeights::UNIT
    };
    let y: Vec<f64> = train.y.iter().map(|&v| v as f64).collect();
    let upper: Vec<f64> = train.y.iter().map(|&v| box_bound(c, &weights, v)).collect();

    let mut k = vec![0.0f64; n * n];
    for i in 0..n {
        for j in i..n {
            let v = kernel.eval(&train.x[i], &train.x[j])?;
            k[i * n + j] = v;
            k[j * n + i] = v;
        }
    }
    let q = |i: usize, j: usize| y[i] * y[j] * k[i * n + j];

    // Minimise f(a) = ½aᵀQa − eᵀa; grad = Qa − e.
    let mut alpha = vec![0.0f64; n];
    let mut grad = vec![-1.0f64; n];
    let in_up = |a: f64, i: usize| (y[i] > 0.0 && a < upper[i]) || (y[i] < 0.0 && a > 0.0);
    let in_low = |a: f64, i: usize| (y[i] > 0.0 && a > 0.0) || (y[i] < 0.0 && a < upper[i]);

    const TAU: f64 = 1e-12;
    let mut iterations = 0u32;
    let mut violation;
    let converged = loop {
        let mut i_best = (usize::MAX, f64::NEG_INFINITY);
        let mut j_best = (usize::MAX, f64::INFINITY);
        for t in 0..n {
            let v = -y[t] * grad[t];
            if in_up(alpha[t], t) && v > i_best.1 {
                i_best = (t, v);
            }
            if in_low(alpha[t], t) && v < j_best.1 {
                j_best = (t, v);
            }
        }
        violation = i_best.1 - j_best.1;
        if i_best.0 == usize::MAX || j_best.0 == usize::MAX || violation <= opts.tolerance {
            break true;
        }
        if iterations >= opts.max_iterations {
            break false;
        }
        iterations += 1;
        let (i, j) = (i_best.0, j_best.0);
        let (old_i, old_j) = (alpha[i], alpha[j]);
        let (ci, cj) = (upper[i], upper[j]);
        // Curvature along the feasible pair direction; clamped for
        // indefinite kernels.
        let mut quad = k[i * n + i] + k[j * n + j] - 2.0 * k[i * n + j];
        if quad <= 0.0 {
            quad = TAU;
        }
        let (mut ai, mut aj) = (old_i, old_j);
        if y[i] != y[j] {
            let delta = (-grad[i] - grad[j]) / quad;
            let diff = ai - aj;
            ai += delta;
            aj += delta;
            if diff > 0.0 {
                if aj < 0.0 {
                    aj = 0.0;
                    ai = diff;
                }
            } else if ai < 0.0 {
                ai = 0.0;
                aj = -diff;
            }
            if diff > ci - cj {
                if ai > ci {
                    ai = ci;
                    aj = ci - diff;
                }
            } else if aj > cj {
                aj = cj;
                ai = cj + diff;
            }
        } else {
            let delta = (grad[i] - grad[j]) / quad;
            let sum = ai + aj;
            ai -= delta;
            aj += delta;
            if sum > ci {
                if ai > ci {
                    ai = ci;
                    aj = sum - ci;
                }
            } else if aj < 0.0 {
                aj = 0.0;
                ai = sum;
            }
            if sum > cj {
                if aj > cj {
                    aj = cj;
                    ai = sum - cj;
                }
            } else if ai < 0.0 {
                ai = 0.0;
                aj = sum;
            }
        }
        alpha[i] = ai;
        alpha[j] = aj;
        let (di, dj) = (ai - old_i, aj - old_j);
        for (t, g) in grad.iter_mut().enumerate() {
            *g += q(t, i) * di + q(t, j) * dj;
        }
    };
    if !converged {
        log::warn!(
            "SMO stopped after {iterations} updates with KKT violation {violation:.3e}"
        );
    }

    // Bias from free multipliers, or the midpoint of the feasible interval.
    let (mut ub, mut lb) = (f64::INFINITY, f64::NEG_INFINITY);
    let (mut free_sum, mut free_count) = (0.0, 0usize);
    for t in 0..n {
        let yg = y[t] * grad[t];
        if alpha[t] >= upper[t] {
            if y[t] < 0.0 {
                ub = ub.min(yg);
            } else {
                lb = lb.max(yg);
            }
        } else if alpha[t] <= 0.0 {
            if y[t] > 0.0 {
                ub = ub.min(yg);
            } else {
                lb = lb.max(yg);
            }
        } else {
            free_sum += yg;
            free_count += 1;
        }
    }
    let rho = if free_count > 0 {
        free_sum / free_count as f64
    } else {
        (ub + lb) / 2.0
    };

    let objective = -0.5 * alpha.iter().zip(&grad).map(|(a, g)| a * (g - 1.0)).sum::<f64>();
    let support = (0..n)
        .filter(|&t| alpha[t] > 0.0)
        .map(|t| SupportVector {
            x: train.x[t].clone(),
            y: train.y[t],
            alpha: alpha[t],
        })
        .collect();
    Ok(SolverOutput {
        solution: DualSolution {
            kernel: *kernel,
            c,
            weights,
            support,
            bias: -rho,
            converged,
            iterations,
        },
        alphas: alpha,
        objective,
        max_violation: violation.max(0.0),
    })
}
