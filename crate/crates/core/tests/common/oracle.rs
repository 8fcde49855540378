//! Brute-force reference implementation of the evaluation metrics, written
//! straight from the definitions and sharing no code with the library.

use rand::Rng;

/// One tiny test sequence: inclusive 1-based `(start, end, class)` instances
/// and a probability vector over `classes + 1` outputs per frame.
#[derive(Debug, Clone)]
pub struct Case {
    pub frames: usize,
    pub classes: usize,
    pub instances: Vec<(usize, usize, usize)>,
    pub probs: Vec<Vec<f64>>,
    pub q: Vec<f64>,
}

pub fn first_max(v: &[f64]) -> usize {
    let top = v.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    v.iter().position(|&x| x == top).unwrap()
}

pub fn label_at(case: &Case, t: usize) -> usize {
    case.instances
        .iter()
        .find(|&&(s, e, _)| s <= t && t <= e)
        .map_or(0, |&(_, _, c)| c)
}

/// Latest frame of `[s, e]` whose elapsed fraction `(t − s)/(e − s)` does
/// not exceed `k/m`, found by scanning.
pub fn observed_until(s: usize, e: usize, k: usize, m: usize) -> usize {
    (s..=e).filter(|&t| (t - s) * m <= (e - s) * k).max().unwrap()
}

pub fn anticipation(cases: &[Case], m: usize, mean_rule: bool) -> Vec<f64> {
    let total: usize = cases.iter().map(|c| c.instances.len()).sum();
    (1..m)
        .map(|k| {
            let mut hits = 0;
            for case in cases {
                for &(s, e, class) in &case.instances {
                    let upto = observed_until(s, e, k, m);
                    let pred = if mean_rule {
                        let mut acc = vec![0.0; case.classes + 1];
                        for t in s..=upto {
                            for (a, p) in acc.iter_mut().zip(&case.probs[t - 1]) {
                                *a += p;
                            }
                        }
                        first_max(&acc)
                    } else {
                        first_max(&case.probs[upto - 1])
                    };
                    if pred == class {
                        hits += 1;
                    }
                }
            }
            if total == 0 {
                f64::NAN
            } else {
                hits as f64 / total as f64
            }
        })
        .collect()
}

/// Mean over classes with at least one ground-truth frame of the fraction
/// of that class's frames predicted correctly.
pub fn frame_accuracy(cases: &[Case], with_background: bool) -> f64 {
    let classes = cases.iter().map(|c| c.classes).max().unwrap_or(0);
    let lowest = if with_background { 0 } else { 1 };
    let mut accs = Vec::new();
    for class in lowest..=classes {
        let (mut n, mut hit) = (0usize, 0usize);
        for case in cases {
            for t in 1..=case.frames {
                if label_at(case, t) == class {
                    n += 1;
                    if first_max(&case.probs[t - 1]) == class {
                        hit += 1;
                    }
                }
            }
        }
        if n > 0 {
            accs.push(hit as f64 / n as f64);
        }
    }
    if accs.is_empty() {
        f64::NAN
    } else {
        accs.iter().sum::<f64>() / accs.len() as f64
    }
}

pub fn random_case<R: Rng>(rng: &mut R, classes: usize) -> Case {
    let frames = rng.gen_range(2..=40);
    let wanted = rng.gen_range(0..=3);
    let mut instances: Vec<(usize, usize, usize)> = Vec::new();
    for _ in 0..50 {
        if instances.len() == wanted {
            break;
        }
        let s = rng.gen_range(1..frames);
        let e = rng.gen_range(s + 1..=frames);
        if instances.iter().all(|&(a, b, _)| e < a || s > b) {
            instances.push((s, e, rng.gen_range(1..=classes)));
        }
    }
    instances.sort();
    let quantized = rng.gen_bool(0.3);
    let probs = (0..frames)
        .map(|_| {
            let raw: Vec<f64> = (0..=classes)
                .map(|_| if quantized { rng.gen_range(0..3) as f64 } else { rng.gen_range(0.0..1.0) })
                .collect();
            let sum: f64 = raw.iter().sum();
            if sum == 0.0 {
                vec![1.0 / (classes + 1) as f64; classes + 1]
            } else {
                raw.iter().map(|v| v / sum).collect()
            }
        })
        .collect();
    let q = (0..frames).map(|_| rng.gen_range(0.0..1.0)).collect();
    Case {
        frames,
        classes,
        instances,
        probs,
        q,
    }
}
