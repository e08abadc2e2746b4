//! Per-user verifiers and their on-disk form.
//!
//! `OSVV` layout (little-endian): magic, version u32, user id u32, kernel
//! code u8, gamma f64, d f64, degree u32, coef0 f64, C f64, weights f64 × 2,
//! bias f64, converged u8, iterations u32, dim u32, support count u32, then
//! per support vector: label i8, alpha f64, dim × f32.

use std::path::Path;

use rand::seq::index;
use rand::Rng as _;

use super::kernel::{KernelKind, KernelSpec};
use super::smo::{solve_dual, ClassWeights, DualSolution, SupportVector, TrainingSet};
use crate::bytes::Reader;
use crate::error::{Error, Result};
use crate::fsutil;
use crate::rng::{stream, tag};

pub const MAGIC: &[u8; 4] = b"OSVV";
pub const VERSION: u32 = 1;
pub const DEFAULT_FORGERY_COUNT: usize = 200;

/// One candidate random forgery: another writer's genuine sample.
#[derive(Clone, Copy, Debug)]
pub struct PoolEntry<'a> {
    pub user_id: u32,
    pub x: &'a [f32],
}

#[derive(Clone, Debug, PartialEq)]
pub struct UserVerifier {
    pub user_id: u32,
    pub solution: DualSolution,
}

impl UserVerifier {
    pub fn score(&self, x: &[f32]) -> Result<f64> {
        self.solution.decision_score(x)
    }
}

/// Draws `count` random forgeries for `user_id` from the pool.
///
/// Without replacement when the pool is large enough, with replacement (and
/// a warning) otherwise.
pub fn sample_forgeries<'a>(
    user_id: u32,
    pool: &[PoolEntry<'a>],
    count: usize,
    seed: u64,
) -> Result<Vec<&'a [f32]>> {
    if pool.iter().any(|e| e.user_id == user_id) {
        return Err(Error::Protocol(format!(
            "forgery pool for user {user_id} contains that user's own samples"
        )));
    }
    if pool.is_empty() {
        return Err(Error::Protocol(format!("empty forgery pool for user {user_id}")));
    }
    let mut rng = stream(seed, &[tag::FORGERY_POOL, user_id as u64]);
    if pool.len() >= count {
        let picks = index::sample(&mut rng, pool.len(), count);
        Ok(picks.into_iter().map(|i| pool[i].x).collect())
    } else {
        log::warn!(
            "forgery pool for user {user_id} has {} samples, fewer than {count}; sampling with replacement",
            pool.len()
        );
        Ok((0..count).map(|_| pool[rng.random_range(0..pool.len())].x).collect())
    }
}

/// Trains one user's verifier: genuine (+1) against sampled random
/// forgeries (−1), class-balanced.
pub fn train_user_verifier(
    user_id: u32,
    genuine: &[&[f32]],
    pool: &[PoolEntry<'_>],
    kernel: &KernelSpec,
    c: f64,
    seed: u64,
    forgery_count: usize,
) -> Result<UserVerifier> {
    if genuine.is_empty() {
        return Err(Error::Usage(format!("user {user_id} has no genuine training samples")));
    }
    let forgeries = sample_forgeries(user_id, pool, forgery_count, seed)?;
    let mut x: Vec<Vec<f32>> = Vec::with_capacity(genuine.len() + forgeries.len());
    let mut y = Vec::with_capacity(x.capacity());
    for g in genuine {
        x.push(g.to_vec());
        y.push(1);
    }
    for f in forgeries {
        x.push(f.to_vec());
        y.push(-1);
    }
    let train = TrainingSet::new(x, y)?;
    let solution = solve_dual(&train, kernel, c, true)?;
    Ok(UserVerifier { user_id, solution })
}

pub fn encode(v: &UserVerifier) -> Vec<u8> {
    let s = &v.solution;
    let dim = s.support.first().map_or(0, |sv| sv.x.len());
    let mut out = Vec::with_capacity(80 + s.support.len() * (9 + 4 * dim));
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&v.user_id.to_le_bytes());
    out.push(s.kernel.kind.code());
    out.extend_from_slice(&s.kernel.gamma.to_le_bytes());
    out.extend_from_slice(&s.kernel.d.to_le_bytes());
    out.extend_from_slice(&s.kernel.degree.to_le_bytes());
    out.extend_from_slice(&s.kernel.coef0.to_le_bytes());
    out.extend_from_slice(&s.c.to_le_bytes());
    out.extend_from_slice(&s.weights.positive.to_le_bytes());
    out.extend_from_slice(&s.weights.negative.to_le_bytes());
    out.extend_from_slice(&s.bias.to_le_bytes());
    out.push(s.converged as u8);
    out.extend_from_slice(&s.iterations.to_le_bytes());
    out.extend_from_slice(&(dim as u32).to_le_bytes());
    out.extend_from_slice(&(s.support.len() as u32).to_le_bytes());
    for sv in &s.support {
        out.push(sv.y as u8);
        out.extend_from_slice(&sv.alpha.to_le_bytes());
        for v in &sv.x {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    out
}

pub fn decode(bytes: &[u8]) -> Result<UserVerifier> {
    let mut r = Reader::new(bytes);
    if r.take(4)? != MAGIC {
        return Err(Error::Parse {
            offset: 0,
            message: "missing OSVV magic".into(),
        });
    }
    let version = r.u32()?;
    if version != VERSION {
        return Err(Error::Parse {
            offset: 4,
            message: format!("unsupported verifier version {version}"),
        });
    }
    let user_id = r.u32()?;
    let at = r.pos;
    let code = r.u8()?;
    let kind = KernelKind::from_code(code).ok_or_else(|| Error::Parse {
        offset: at,
        message: format!("unknown kernel code {code}"),
    })?;
    let kernel = KernelSpec {
        kind,
        gamma: r.f64()?,
        d: r.f64()?,
        degree: r.u32()?,
        coef0: r.f64()?,
    };
    let c = r.f64()?;
    let weights = ClassWeights {
        positive: r.f64()?,
        negative: r.f64()?,
    };
    let bias = r.f64()?;
    let converged = r.u8()? != 0;
    let iterations = r.u32()?;
    let dim = r.u32()? as usize;
    let count = r.u32()? as usize;
    let mut support = Vec::with_capacity(count.min(4096));
    for _ in 0..count {
        let at = r.pos;
        let y = r.u8()? as i8;
        if y != 1 && y != -1 {
            return Err(Error::Parse {
                offset: at,
                message: format!("support label {y} is not ±1"),
            });
        }
        let alpha = r.f64()?;
        let mut x = Vec::with_capacity(dim);
        for _ in 0..dim {
            x.push(r.f32()?);
        }
        support.push(SupportVector { x, y, alpha });
    }
    r.finish()?;
    Ok(UserVerifier {
        user_id,
        solution: DualSolution {
            kernel,
            c,
            weights,
            support,
            bias,
            converged,
            iterations,
        },
    })
}

pub fn save(v: &UserVerifier, path: &Path) -> Result<()> {
    fsutil::write_atomic(path, &encode(v))
}

pub fn load(path: &Path) -> Result<UserVerifier> {
    decode(&fsutil::read(path)?)
}
