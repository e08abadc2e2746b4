//! Equal error rate by threshold sweep.

use crate::error::{Error, Result};

/// Decision scores of genuine test samples and of forgeries.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct ScoreSet {
    pub genuine: Vec<f64>,
    pub forgery: Vec<f64>,
}

impl ScoreSet {
    pub fn new(genuine: Vec<f64>, forgery: Vec<f64>) -> Self {
        Self { genuine, forgery }
    }

    pub fn extend(&mut self, other: &ScoreSet) {
        self.genuine.extend_from_slice(&other.genuine);
        self.forgery.extend_from_slice(&other.forgery);
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CurvePoint {
    pub threshold: f64,
    pub far: f64,
    pub frr: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct EerResult {
    pub eer: f64,
    pub threshold: f64,
    /// FAR/FRR at every swept threshold, ascending.
    pub curve: Vec<CurvePoint>,
}

/// FAR/FRR at every distinct score plus one threshold above the maximum.
/// A sample is accepted when its score is ≥ the threshold.
pub fn far_frr_curve(scores: &ScoreSet) -> Result<Vec<CurvePoint>> {
    if scores.genuine.is_empty() || scores.forgery.is_empty() {
        return Err(Error::Usage(format!(
            "EER needs genuine and forgery scores (got {} and {})",
            scores.genuine.len(),
            scores.forgery.len()
        )));
    }
    if let Some(s) = scores.genuine.iter().chain(&scores.forgery).find(|s| !s.is_finite()) {
        return Err(Error::Usage(format!("non-finite score {s}")));
    }
    let mut g = scores.genuine.clone();
    let mut f = scores.forgery.clone();
    g.sort_by(f64::total_cmp);
    f.sort_by(f64::total_cmp);
    let mut thresholds: Vec<f64> = g.iter().chain(&f).copied().collect();
    thresholds.sort_by(f64::total_cmp);
    thresholds.dedup();
    thresholds.push(thresholds.last().unwrap().next_up());

    let (ng, nf) = (g.len() as f64, f.len() as f64);
    // Two cursors count the scores strictly below each threshold.
    let (mut gi, mut fi) = (0usize, 0usize);
    Ok(thresholds
        .into_iter()
        .map(|t| {
            while gi < g.len() && g[gi] < t {
                gi += 1;
            }
            while fi < f.len() && f[fi] < t {
                fi += 1;
            }
            CurvePoint {
                threshold: t,
                far: (f.len() - fi) as f64 / nf,
                frr: gi as f64 / ng,
            }
        })
        .collect())
}

/// Equal error rate and its threshold.
///
/// Returns the swept point where FAR equals FRR when one exists; otherwise
/// interpolates linearly between the two thresholds bracketing the sign
/// change of FAR − FRR.
pub fn compute_eer(scores: &ScoreSet) -> Result<EerResult> {
    let curve = far_frr_curve(scores)?;
    // FAR − FRR starts at 1 and ends at −1, so a crossing always exists.
    let k = curve
        .iter()
        .position(|p| p.far - p.frr <= 0.0)
        .expect("sweep ends with FAR 0 and FRR 1");
    let (eer, threshold) = if curve[k].far == curve[k].frr {
        (curve[k].far, curve[k].threshold)
    } else {
        let (a, b) = (&curve[k - 1], &curve[k]);
        let (da, db) = (a.far - a.frr, b.far - b.frr);
        let lambda = da / (da - db);
        (
            a.far + lambda * (b.far - a.far),
            a.threshold + lambda * (b.threshold - a.threshold),
        )
    };
    Ok(EerResult { eer, threshold, curve })
}
