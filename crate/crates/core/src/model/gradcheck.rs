//! Central finite-difference verification of the analytic gradients.

use rand::seq::index::sample;

use super::backward::backward_clip;
use super::forward::forward_clip;
use super::ModelParams;
use crate::error::{Error, Result};
use crate::losses::{loss_total, LossSpec};
use crate::rng::stream_rng;
use crate::sampling::Clip;

/// Finite-difference formula.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Stencil {
    /// `(f(θ+ε) − f(θ−ε)) / 2ε`, error O(ε²).
    #[default]
    Central,
    /// `(−f(θ+2ε) + 8f(θ+ε) − 8f(θ−ε) + f(θ−2ε)) / 12ε`, error O(ε⁴).
    Central4,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GradCheckReport {
    pub max_rel_error: f64,
    /// Block and coordinate where the maximum was found.
    pub worst: Option<(String, usize)>,
    pub checked: usize,
    /// Maximum error per parameter block.
    pub per_block: Vec<(String, f64)>,
}

fn total_loss(params: &ModelParams, clip: &Clip, spec: &LossSpec<'_>) -> Result<f64> {
    let cache = forward_clip(params, &clip.frames)?;
    Ok(loss_total(params, &cache, clip, spec)?.total)
}

/// Compares analytic gradients against central differences.
///
/// Checks every coordinate of blocks with at most `per_block` entries and a
/// seeded sample of `per_block` coordinates elsewhere; `per_block = 0`
/// checks everything. The error per coordinate is
/// `|a − n| / max(|a|, |n|, 1e-8)`.
pub fn grad_check(params: &ModelParams, clip: &Clip, spec: &LossSpec<'_>, eps: f64, per_block: usize) -> Result<GradCheckReport> {
    grad_check_with(params, clip, spec, eps, per_block, Stencil::Central)
}

/// [`grad_check`] with an explicit stencil.
pub fn grad_check_with(
    params: &ModelParams,
    clip: &Clip,
    spec: &LossSpec<'_>,
    eps: f64,
    per_block: usize,
    stencil: Stencil,
) -> Result<GradCheckReport> {
    if !(eps > 0.0 && eps.is_finite()) {
        return Err(Error::InvalidArgument(format!("finite-difference step must be > 0, got {eps}")));
    }
    let (_, analytic) = backward_clip(params, clip, spec)?;
    let mut probe = params.clone();
    let mut rng = stream_rng(0x9c, 0);
    let mut report = GradCheckReport {
        max_rel_error: 0.0,
        worst: None,
        checked: 0,
        per_block: Vec::new(),
    };
    for b in 0..params.blocks().len() {
        let n = params.blocks()[b].data.len();
        let coords: Vec<usize> = if per_block == 0 || n <= per_block {
            (0..n).collect()
        } else {
            let mut v = sample(&mut rng, n, per_block).into_vec();
            v.sort_unstable();
            v
        };
        let mut block_max = 0.0f64;
        for i in coords {
            let orig = probe.blocks()[b].data[i];
            let mut at = |offset: f64| -> Result<f64> {
                probe.blocks_mut()[b].data[i] = orig + offset;
                total_loss(&probe, clip, spec)
            };
            let numeric = match stencil {
                Stencil::Central => (at(eps)? - at(-eps)?) / (2.0 * eps),
                Stencil::Central4 => {
                    (-at(2.0 * eps)? + 8.0 * at(eps)? - 8.0 * at(-eps)? + at(-2.0 * eps)?) / (12.0 * eps)
                }
            };
            probe.blocks_mut()[b].data[i] = orig;
            let a = analytic.blocks()[b].data[i];
            let err = (a - numeric).abs() / a.abs().max(numeric.abs()).max(1e-8);
            report.checked += 1;
            block_max = block_max.max(err);
            if report.worst.is_none() || err > report.max_rel_error {
                report.max_rel_error = err;
                report.worst = Some((params.blocks()[b].name.clone(), i));
            }
        }
        report.per_block.push((params.blocks()[b].name.clone(), block_max));
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use std::collections::BTreeMap;

    use rand::Rng;

    use super::*;
    use crate::data::{ActionInstance, SkeletonFrame, UntrimmedSequence};
    use crate::losses::{InstanceKey, TeacherRepStore};
    use crate::model::ModelDims;
    use crate::sampling::LabeledSequence;

    fn fixture(dims: ModelDims, steps: usize, seed: u64) -> (ModelParams, Clip, TeacherRepStore) {
        let mut rng = stream_rng(seed, 1);
        let mut params = ModelParams::init(dims, &mut rng).unwrap();
        for b in params.blocks_mut() {
            b.data.iter_mut().for_each(|v| *v += rng.gen_range(-0.3..0.3));
        }
        let total = steps + 4;
        let frames = (0..total)
            .map(|_| SkeletonFrame::new((0..dims.input).map(|_| rng.gen_range(-1.0..1.0)).collect()))
            .collect();
        let instances = vec![
            ActionInstance::new(1, 4, 1).unwrap(),
            ActionInstance::new(6, total - 1, dims.classes).unwrap(),
        ];
        let seq = LabeledSequence::new(0, UntrimmedSequence::new(frames, instances).unwrap(), dims.classes).unwrap();
        let clip = Clip::cut(&seq, 3, steps).unwrap();
        let mut reps = BTreeMap::new();
        for i in 0..2 {
            let v = (0..dims.hidden).map(|_| rng.gen_range(-0.5..0.5)).collect();
            reps.insert(InstanceKey { sequence: 0, instance: i }, v);
        }
        (params, clip, TeacherRepStore::new(dims.hidden, String::new(), reps).unwrap())
    }

    #[test]
    fn zero_params_classification() {
        let dims = ModelDims { input: 4, hidden: 6, layers: 3, classes: 3 };
        let (_, clip, _) = fixture(dims, 5, 3);
        let params = ModelParams::zeros(dims).unwrap();
        let r = grad_check(&params, &clip, &LossSpec::classification(), 1e-3, 0).unwrap();
        assert!(r.max_rel_error <= 1e-4, "{r:?}");
    }

    #[test]
    fn composite_small_net() {
        let dims = ModelDims { input: 3, hidden: 8, layers: 3, classes: 3 };
        let (params, clip, store) = fixture(dims, 5, 11);
        for (alpha, beta) in [(0.0, 0.0), (1.0, 0.0), (0.0, 1.0), (1.0, 1.0)] {
            let spec = LossSpec::new(alpha, beta, Some(&store)).unwrap();
            let r = grad_check_with(&params, &clip, &spec, 1e-3, 0, Stencil::Central4).unwrap();
            assert!(r.max_rel_error <= 1e-4, "alpha={alpha} beta={beta}: {r:?}");
        }
    }

    #[test]
    fn projection_gradient_zero_without_regression() {
        let dims = ModelDims { input: 3, hidden: 4, layers: 2, classes: 2 };
        let (params, clip, store) = fixture(dims, 6, 5);
        let spec = LossSpec::new(0.0, 1.0, Some(&store)).unwrap();
        let (_, g) = backward_clip(&params, &clip, &spec).unwrap();
        assert!(g.proj().data.iter().all(|&v| v == 0.0));
        let r = grad_check_with(&params, &clip, &spec, 1e-3, 0, Stencil::Central4).unwrap();
        assert!(r.max_rel_error <= 1e-4, "{r:?}");
    }

    #[test]
    fn missing_teacher_rep() {
        let dims = ModelDims { input: 3, hidden: 4, layers: 1, classes: 2 };
        let (params, clip, _) = fixture(dims, 6, 5);
        let empty = TeacherRepStore::new(4, String::new(), BTreeMap::new()).unwrap();
        let spec = LossSpec::new(1.0, 0.0, Some(&empty)).unwrap();
        assert!(matches!(backward_clip(&params, &clip, &spec), Err(Error::MissingTeacherRep(_))));
    }

    #[test]
    fn constant_direction_has_zero_error() {
        // W does not enter the loss when alpha = 0; both gradients are exactly 0.
        let dims = ModelDims { input: 3, hidden: 4, layers: 1, classes: 2 };
        let (params, clip, _) = fixture(dims, 4, 2);
        let spec = LossSpec::classification();
        let r = grad_check(&params, &clip, &spec, 1e-3, 0).unwrap();
        let proj = r.per_block.iter().find(|(n, _)| n == "proj.w").unwrap();
        assert_eq!(proj.1, 0.0);
    }

    #[test]
    fn rejects_bad_step() {
        let dims = ModelDims { input: 3, hidden: 4, layers: 1, classes: 2 };
        let (params, clip, _) = fixture(dims, 4, 5);
        let spec = LossSpec::classification();
        assert!(grad_check(&params, &clip, &spec, 0.0, 0).is_err());
        assert!(grad_check(&params, &clip, &spec, -1e-3, 0).is_err());
    }
}
