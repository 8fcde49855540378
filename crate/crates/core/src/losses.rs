//! Frame-wise classification, full-representation regression and temporal
//! actionness losses, and their weighted sum.
//!
//! All three are means over frames. Probabilities are floored at
//! [`PROB_FLOOR`] before taking logs so no evaluation yields NaN or infinity.

use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::model::{ForwardCache, ModelParams, ParamBlock};
use crate::sampling::Clip;

pub const PROB_FLOOR: f64 = 1e-12;

/// Loss weights plus the frozen teacher targets.
#[derive(Debug, Clone, Copy)]
pub struct LossSpec<'a> {
    /// Weight of the full-representation regression.
    pub alpha: f64,
    /// Weight of the actionness loss.
    pub beta: f64,
    pub teacher: Option<&'a TeacherRepStore>,
}

impl<'a> LossSpec<'a> {
    /// Classification only.
    pub fn classification() -> Self {
        LossSpec {
            alpha: 0.0,
            beta: 0.0,
            teacher: None,
        }
    }

    pub fn new(alpha: f64, beta: f64, teacher: Option<&'a TeacherRepStore>) -> Result<Self> {
        let spec = LossSpec { alpha, beta, teacher };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.alpha >= 0.0 && self.beta >= 0.0) || !self.alpha.is_finite() || !self.beta.is_finite() {
            return Err(Error::Config(format!(
                "loss weights must be finite and >= 0, got alpha={} beta={}",
                self.alpha, self.beta
            )));
        }
        if self.alpha > 0.0 && self.teacher.is_none() {
            return Err(Error::MissingTeacherRep(
                "alpha > 0 requires a teacher representation store".into(),
            ));
        }
        Ok(())
    }
}

/// Identifies an instance across a dataset split.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct InstanceKey {
    pub sequence: usize,
    pub instance: usize,
}

impl std::fmt::Display for InstanceKey {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}:{}", self.sequence, self.instance)
    }
}

/// Teacher hidden vectors at each instance's last frame. Immutable once
/// built.
#[derive(Debug, Clone, PartialEq)]
pub struct TeacherRepStore {
    hidden: usize,
    teacher_hash: String,
    reps: BTreeMap<InstanceKey, Vec<f64>>,
}

impl TeacherRepStore {
    pub fn new(hidden: usize, teacher_hash: String, reps: BTreeMap<InstanceKey, Vec<f64>>) -> Result<Self> {
        if let Some((k, v)) = reps.iter().find(|(_, v)| v.len() != hidden) {
            return Err(Error::InvalidArgument(format!(
                "representation {k} has length {}, expected {hidden}",
                v.len()
            )));
        }
        Ok(TeacherRepStore {
            hidden,
            teacher_hash,
            reps,
        })
    }

    pub fn hidden(&self) -> usize {
        self.hidden
    }

    pub fn teacher_hash(&self) -> &str {
        &self.teacher_hash
    }

    pub fn get(&self, key: InstanceKey) -> Option<&[f64]> {
        self.reps.get(&key).map(Vec::as_slice)
    }

    pub fn len(&self) -> usize {
        self.reps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.reps.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (InstanceKey, &[f64])> {
        self.reps.iter().map(|(k, v)| (*k, v.as_slice()))
    }
}

/// Regression target over clip positions `first..=last` (0-based).
#[derive(Debug, Clone, Copy)]
pub struct RepTarget<'a> {
    pub first: usize,
    pub last: usize,
    pub target: &'a [f64],
}

/// Looks up the teacher vector of every instance the clip covers.
pub fn rep_targets<'a>(clip: &Clip, store: &'a TeacherRepStore) -> Result<Vec<RepTarget<'a>>> {
    clip.covered
        .iter()
        .map(|c| {
            let key = InstanceKey {
                sequence: clip.sequence_id,
                instance: c.index,
            };
            let target = store
                .get(key)
                .ok_or_else(|| Error::MissingTeacherRep(format!("no vector for instance {key} ({})", c.instance)))?;
            Ok(RepTarget {
                first: c.first,
                last: c.last,
                target,
            })
        })
        .collect()
}

fn check_label(label: usize, classes: usize) -> Result<()> {
    if label >= classes {
        return Err(Error::LabelRange {
            label,
            max: classes.saturating_sub(1),
        });
    }
    Ok(())
}

/// `-(1/L) Σ log p_t(y_t)`.
///
/// ```
/// use anticipation::losses::loss_classification;
///
/// let probs = vec![vec![0.5, 0.5], vec![0.75, 0.25]];
/// let l = loss_classification(&probs, &[1, 1]).unwrap();
/// assert!((l - (2f64.ln() + 4f64.ln()) / 2.0).abs() < 1e-12);
/// ```
pub fn loss_classification<P: AsRef<[f64]>>(probs: &[P], labels: &[usize]) -> Result<f64> {
    if probs.len() != labels.len() {
        return Err(Error::Dimension {
            expected: labels.len(),
            got: probs.len(),
        });
    }
    if probs.is_empty() {
        return Ok(0.0);
    }
    let mut sum = 0.0;
    for (p, &y) in probs.iter().zip(labels) {
        let p = p.as_ref();
        check_label(y, p.len())?;
        sum -= p[y].max(PROB_FLOOR).ln();
    }
    Ok(sum / probs.len() as f64)
}

/// Binary cross-entropy of the actionness predictions.
pub fn loss_actionness(q: &[f64], targets: &[u8]) -> Result<f64> {
    if q.len() != targets.len() {
        return Err(Error::Dimension {
            expected: targets.len(),
            got: q.len(),
        });
    }
    if q.is_empty() {
        return Ok(0.0);
    }
    let mut sum = 0.0;
    for (&q, &y) in q.iter().zip(targets) {
        if !(0.0..=1.0).contains(&q) || y > 1 {
            return Err(Error::InvalidArgument(format!(
                "actionness needs q in [0,1] and binary targets, got q={q} y={y}"
            )));
        }
        sum -= if y == 1 {
            q.max(PROB_FLOOR).ln()
        } else {
            (1.0 - q).max(PROB_FLOOR).ln()
        };
    }
    Ok(sum / q.len() as f64)
}

fn residual(proj: &ParamBlock, h: &[f64], target: &[f64], out: &mut [f64]) {
    for (r, o) in out.iter_mut().enumerate() {
        *o = crate::model::dot_row(proj, r, h) - target[r];
    }
}

/// Mean over covered frames of `‖W h_t − h_e‖²`. Frames outside every
/// covered instance contribute nothing; with no covered frames the loss is 0.
pub fn loss_full_rep<H: AsRef<[f64]>>(hidden: &[H], targets: &[RepTarget<'_>], proj: &ParamBlock) -> Result<f64> {
    let mut sum = 0.0;
    let mut count = 0usize;
    let mut r = vec![0.0; proj.rows];
    for tgt in targets {
        if tgt.last >= hidden.len() || tgt.first > tgt.last {
            return Err(Error::InvalidArgument(format!(
                "covered range {}..={} outside clip of {}",
                tgt.first,
                tgt.last,
                hidden.len()
            )));
        }
        if tgt.target.len() != proj.rows {
            return Err(Error::Dimension {
                expected: proj.rows,
                got: tgt.target.len(),
            });
        }
        for h in &hidden[tgt.first..=tgt.last] {
            residual(proj, h.as_ref(), tgt.target, &mut r);
            sum += r.iter().map(|v| v * v).sum::<f64>();
            count += 1;
        }
    }
    Ok(if count == 0 { 0.0 } else { sum / count as f64 })
}

/// Per-term values of the combined objective. Disabled terms (weight 0)
/// are reported as exactly 0.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct LossBreakdown {
    pub classification: f64,
    pub full_rep: f64,
    pub actionness: f64,
    pub total: f64,
}

impl LossBreakdown {
    pub fn combine(classification: f64, full_rep: f64, actionness: f64, spec: &LossSpec<'_>) -> Self {
        let full_rep = if spec.alpha > 0.0 { full_rep } else { 0.0 };
        let actionness = if spec.beta > 0.0 { actionness } else { 0.0 };
        let mut total = classification;
        if spec.alpha > 0.0 {
            total += spec.alpha * full_rep;
        }
        if spec.beta > 0.0 {
            total += spec.beta * actionness;
        }
        LossBreakdown {
            classification,
            full_rep,
            actionness,
            total,
        }
    }
}

/// `L_c + α L_r + β L_n` for a forward pass over `clip`.
pub fn loss_total(params: &ModelParams, cache: &ForwardCache, clip: &Clip, spec: &LossSpec<'_>) -> Result<LossBreakdown> {
    spec.validate()?;
    let steps = cache.len();
    let probs: Vec<&[f64]> = (0..steps).map(|t| cache.probs(t)).collect();
    let lc = loss_classification(&probs, &clip.labels)?;
    let lr = match (spec.alpha > 0.0, spec.teacher) {
        (true, Some(store)) => {
            let hidden: Vec<&[f64]> = (0..steps).map(|t| cache.hidden(t)).collect();
            loss_full_rep(&hidden, &rep_targets(clip, store)?, params.proj())?
        }
        _ => 0.0,
    };
    let ln = if spec.beta > 0.0 {
        let q: Vec<f64> = (0..steps).map(|t| cache.actionness(t)).collect();
        loss_actionness(&q, &clip.actionness)?
    } else {
        0.0
    };
    Ok(LossBreakdown::combine(lc, lr, ln, spec))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn uniform_over_52_classes() {
        let probs = vec![vec![1.0 / 52.0; 52]; 3];
        let l = loss_classification(&probs, &[0, 17, 51]).unwrap();
        assert!((l - 52f64.ln()).abs() < 1e-12);
        assert!((l - 3.9512).abs() < 1e-4);
    }

    #[test]
    fn perfect_classification_is_zero() {
        let probs = vec![vec![0.0, 1.0, 0.0], vec![1.0, 0.0, 0.0]];
        assert_eq!(loss_classification(&probs, &[1, 0]).unwrap(), 0.0);
    }

    #[test]
    fn classification_two_frames() {
        let probs = vec![vec![0.5, 0.5], vec![0.75, 0.25]];
        let l = loss_classification(&probs, &[0, 1]).unwrap();
        assert!((l - 1.0397).abs() < 1e-4);
    }

    #[test]
    fn classification_label_range() {
        let probs = vec![vec![0.5, 0.5]];
        assert!(matches!(loss_classification(&probs, &[2]), Err(Error::LabelRange { .. })));
    }

    #[test]
    fn floor_prevents_infinity() {
        let probs = vec![vec![1.0, 0.0]];
        let l = loss_classification(&probs, &[1]).unwrap();
        assert!((l - (-PROB_FLOOR.ln())).abs() < 1e-9);
        let n = loss_actionness(&[0.0, 1.0], &[1, 0]).unwrap();
        assert!(n.is_finite());
    }

    #[test]
    fn actionness_values() {
        assert!((loss_actionness(&[0.5; 4], &[1, 0, 1, 1]).unwrap() - 2f64.ln()).abs() < 1e-12);
        assert!(loss_actionness(&[1.0, 0.0, 1.0], &[1, 0, 1]).unwrap() <= 1e-11);
        assert!((loss_actionness(&[0.9], &[1]).unwrap() - 0.10536).abs() < 1e-5);
        assert!(loss_actionness(&[1.2], &[1]).is_err());
    }

    fn identity(n: usize) -> ParamBlock {
        let mut data = vec![0.0; n * n];
        (0..n).for_each(|i| data[i * n + i] = 1.0);
        ParamBlock {
            name: "proj.w".into(),
            rows: n,
            cols: n,
            data,
        }
    }

    #[test]
    fn full_rep_values() {
        let w = identity(3);
        let target = [0.5, -1.0, 2.0];
        let hidden = vec![target.to_vec(); 4];
        let tgt = RepTarget {
            first: 1,
            last: 3,
            target: &target,
        };
        assert_eq!(loss_full_rep(&hidden, &[tgt], &w).unwrap(), 0.0);

        let zero = [0.0; 3];
        let unit = vec![vec![1.0, 0.0, 0.0]];
        let t1 = RepTarget {
            first: 0,
            last: 0,
            target: &zero,
        };
        assert_eq!(loss_full_rep(&unit, &[t1], &w).unwrap(), 1.0);

        let two = vec![vec![1.0, 0.0, 0.0], vec![1.0, 1.0, 1.0]];
        let t2 = RepTarget {
            first: 0,
            last: 1,
            target: &zero,
        };
        assert_eq!(loss_full_rep(&two, &[t2], &w).unwrap(), 2.0);
        // Split across two instances: count-weighted mean of per-instance means.
        let a = RepTarget { first: 0, last: 0, target: &zero };
        let b = RepTarget { first: 1, last: 1, target: &zero };
        assert_eq!(loss_full_rep(&two, &[a, b], &w).unwrap(), 2.0);
        assert_eq!(loss_full_rep(&two, &[], &w).unwrap(), 0.0);
    }

    #[test]
    fn combine_linearity_and_degeneracy() {
        let none = LossSpec::classification();
        let b = LossBreakdown::combine(1.5, 2.0, 0.7, &none);
        assert_eq!(b.total, 1.5);
        assert_eq!((b.full_rep, b.actionness), (0.0, 0.0));
        let store = TeacherRepStore::new(2, String::new(), BTreeMap::new()).unwrap();
        let alpha = LossSpec::new(1.0, 0.0, Some(&store)).unwrap();
        assert_eq!(LossBreakdown::combine(1.0, 2.0, 0.3, &alpha).total, 3.0);
    }

    #[test]
    fn composed_examples() {
        let lc = loss_classification(&[vec![0.5, 0.5], vec![0.75, 0.25]], &[0, 1]).unwrap();
        let w = identity(2);
        let zero = [0.0; 2];
        let h = vec![vec![1.0, 0.0], vec![1.0, 2f64.sqrt()]];
        let lr = loss_full_rep(&h, &[RepTarget { first: 0, last: 1, target: &zero }], &w).unwrap();
        let ln = loss_actionness(&[0.9], &[1]).unwrap();
        let store = TeacherRepStore::new(2, String::new(), BTreeMap::new()).unwrap();
        let spec = LossSpec::new(1.0, 1.0, Some(&store)).unwrap();
        let b = LossBreakdown::combine(lc, lr, ln, &spec);
        let expected = (2f64.ln() + 4f64.ln()) / 2.0 + 2.0 + (1.0 / 0.9f64).ln();
        assert!((b.total - expected).abs() < 1e-9);
    }

    #[test]
    fn spec_validation() {
        assert!(LossSpec::new(-1.0, 0.0, None).is_err());
        assert!(matches!(LossSpec::new(1.0, 0.0, None), Err(Error::MissingTeacherRep(_))));
        assert!(LossSpec::new(0.0, 2.0, None).is_ok());
    }
}
