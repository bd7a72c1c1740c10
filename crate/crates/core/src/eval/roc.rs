//! Detection scoring: ROC/AUC over distance samples, and character error rate.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Output distances for benign and adversarial inputs under one transform.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DistancePair {
    pub benign: Vec<f64>,
    pub adversarial: Vec<f64>,
}

impl DistancePair {
    pub fn new(benign: Vec<f64>, adversarial: Vec<f64>) -> Result<Self> {
        if benign.is_empty() || adversarial.is_empty() {
            return Err(Error::invalid("distances", "both benign and adversarial sets must be nonempty"));
        }
        if let Some(i) = benign.iter().chain(&adversarial).position(|d| !(d.is_finite() && *d >= 0.0)) {
            return Err(Error::NonFinite(i));
        }
        Ok(Self { benign, adversarial })
    }
}

/// One operating point: flag inputs whose distance is at least `threshold`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RocPoint {
    pub threshold: f64,
    pub fpr: f64,
    pub tpr: f64,
}

/// Area under the ROC curve with adversarial as the positive class, plus the
/// curve itself from (0, 0) to (1, 1).
///
/// Thresholds sweep every distinct observed distance from high to low; tied
/// scores move both rates in one step, so the trapezoid area equals the
/// Mann-Whitney statistic with ties counted as one half.
pub fn roc_auc(d: &DistancePair) -> Result<(f64, Vec<RocPoint>)> {
    let d = DistancePair::new(d.benign.clone(), d.adversarial.clone())?;
    let mut scored: Vec<(f64, bool)> = d.benign.iter().map(|&s| (s, false)).chain(d.adversarial.iter().map(|&s| (s, true))).collect();
    scored.sort_by(|a, b| b.0.total_cmp(&a.0));
    let n_pos = d.adversarial.len() as f64;
    let n_neg = d.benign.len() as f64;
    let mut points = vec![RocPoint { threshold: f64::INFINITY, fpr: 0.0, tpr: 0.0 }];
    let (mut tp, mut fp) = (0.0, 0.0);
    let mut area = 0.0;
    let mut i = 0;
    while i < scored.len() {
        let threshold = scored[i].0;
        while i < scored.len() && scored[i].0 == threshold {
            if scored[i].1 {
                tp += 1.0;
            } else {
                fp += 1.0;
            }
            i += 1;
        }
        let prev = *points.last().expect("curve starts with the origin");
        let p = RocPoint { threshold, fpr: fp / n_neg, tpr: tp / n_pos };
        area += (p.fpr - prev.fpr) * (p.tpr + prev.tpr) / 2.0;
        points.push(p);
    }
    Ok((area, points))
}

/// Character error rate: Levenshtein distance over reference length.
pub fn cer(reference: &str, hypothesis: &str) -> Result<f64> {
    let r: Vec<char> = reference.chars().collect();
    let h: Vec<char> = hypothesis.chars().collect();
    if r.is_empty() {
        return Err(Error::invalid("reference", "must be nonempty"));
    }
    let mut prev: Vec<usize> = (0..=h.len()).collect();
    let mut cur = vec![0; h.len() + 1];
    for (i, rc) in r.iter().enumerate() {
        cur[0] = i + 1;
        for (j, hc) in h.iter().enumerate() {
            let sub = prev[j] + usize::from(rc != hc);
            cur[j + 1] = sub.min(prev[j + 1] + 1).min(cur[j] + 1);
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    Ok(prev[h.len()] as f64 / r.len() as f64)
}
