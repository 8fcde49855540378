//! Backpropagation through time for the composite objective.

use super::forward::{dot, forward_clip, ForwardCache};
use super::ModelParams;
use crate::error::Result;
use crate::losses::{loss_total, rep_targets, LossBreakdown, LossSpec, PROB_FLOOR};
use crate::sampling::Clip;

/// Loss gradients with respect to the network outputs.
#[derive(Debug, Clone)]
pub struct HeadGradients {
    /// `∂L/∂logits`, `L × (C+1)`.
    pub logits: Vec<f64>,
    /// `∂L/∂` actionness logits, `L × 2`.
    pub act: Vec<f64>,
    /// Extra `∂L/∂h_t` on the top layer from the regression term, `L × H`.
    pub hidden: Vec<f64>,
    /// `∂L/∂W` for the projection, `H × H`.
    pub proj: Vec<f64>,
}

/// Gradients of the objective with respect to the head inputs.
pub fn head_backward(params: &ModelParams, cache: &ForwardCache, clip: &Clip, spec: &LossSpec<'_>) -> Result<HeadGradients> {
    let dims = cache.dims;
    let (steps, k, hs) = (cache.len(), dims.outputs(), dims.hidden);
    let scale = 1.0 / steps.max(1) as f64;
    let mut g = HeadGradients {
        logits: vec![0.0; steps * k],
        act: vec![0.0; steps * 2],
        hidden: vec![0.0; steps * hs],
        proj: vec![0.0; hs * hs],
    };

    for t in 0..steps {
        let p = cache.probs(t);
        let y = clip.labels[t];
        // Floored frames sit on a flat piece of the loss.
        if p[y] >= PROB_FLOOR {
            let row = &mut g.logits[t * k..(t + 1) * k];
            for (j, d) in row.iter_mut().enumerate() {
                *d = scale * (p[j] - f64::from(u8::from(j == y)));
            }
        }
    }

    if spec.beta > 0.0 {
        for t in 0..steps {
            let q = cache.actionness(t);
            let not_q = 1.0 - q;
            let y = f64::from(clip.actionness[t]);
            let mut d = 0.0;
            if q >= PROB_FLOOR {
                d -= y * not_q;
            }
            if not_q >= PROB_FLOOR {
                d += (1.0 - y) * q;
            }
            d *= spec.beta * scale;
            g.act[2 * t] = -d;
            g.act[2 * t + 1] = d;
        }
    }

    if spec.alpha > 0.0 {
        if let Some(store) = spec.teacher {
            let targets = rep_targets(clip, store)?;
            let count: usize = targets.iter().map(|t| t.last - t.first + 1).sum();
            if count > 0 {
                let c = spec.alpha * 2.0 / count as f64;
                let w = params.proj();
                let mut r = vec![0.0; hs];
                for tgt in &targets {
                    for t in tgt.first..=tgt.last {
                        let h = cache.hidden(t);
                        for (i, ri) in r.iter_mut().enumerate() {
                            *ri = dot(w.row(i), h) - tgt.target[i];
                        }
                        for i in 0..hs {
                            let ci = c * r[i];
                            let gw = &mut g.proj[i * hs..(i + 1) * hs];
                            gw.iter_mut().zip(h).for_each(|(d, hv)| *d += ci * hv);
                            let dh = &mut g.hidden[t * hs..(t + 1) * hs];
                            dh.iter_mut().zip(w.row(i)).for_each(|(d, wv)| *d += ci * wv);
                        }
                    }
                }
            }
        }
    }
    Ok(g)
}

/// Pushes head gradients back through the heads and every LSTM layer.
pub(crate) fn backprop(params: &ModelParams, cache: &ForwardCache, heads: &HeadGradients) -> ModelParams {
    let dims = cache.dims;
    let (steps, k, hs) = (cache.len(), dims.outputs(), dims.hidden);
    let mut grads = params.zeros_like();
    let base = 3 * dims.layers;

    // dh on the top layer: heads plus regression.
    let mut dh_ext = heads.hidden.clone();
    {
        let (cls_w, act_w) = (params.cls_w(), params.act_w());
        let blocks = grads.blocks_mut();
        for t in 0..steps {
            let h = cache.hidden(t);
            let dl = &heads.logits[t * k..(t + 1) * k];
            let da = &heads.act[2 * t..2 * t + 2];
            let dh = &mut dh_ext[t * hs..(t + 1) * hs];
            for (j, &d) in dl.iter().enumerate() {
                if d == 0.0 {
                    continue;
                }
                blocks[base + 1].data[j] += d;
                let row = &mut blocks[base].data[j * hs..(j + 1) * hs];
                row.iter_mut().zip(h).for_each(|(g, hv)| *g += d * hv);
                dh.iter_mut().zip(cls_w.row(j)).for_each(|(g, wv)| *g += d * wv);
            }
            for (j, &d) in da.iter().enumerate() {
                if d == 0.0 {
                    continue;
                }
                blocks[base + 3].data[j] += d;
                let row = &mut blocks[base + 2].data[j * hs..(j + 1) * hs];
                row.iter_mut().zip(h).for_each(|(g, hv)| *g += d * hv);
                dh.iter_mut().zip(act_w.row(j)).for_each(|(g, wv)| *g += d * wv);
            }
        }
        blocks[base + 4].data.copy_from_slice(&heads.proj);
    }

    let mut da = vec![0.0; 4 * hs];
    for l in (0..dims.layers).rev() {
        let tr = &cache.layers[l];
        let in_dim = if l == 0 { dims.input } else { hs };
        let mut dx = vec![0.0; steps * in_dim];
        let mut dh_next = vec![0.0; hs];
        let mut dc_next = vec![0.0; hs];
        let (w_ih, w_hh) = (params.w_ih(l), params.w_hh(l));
        for t in (0..steps).rev() {
            let gates = &tr.gates[t * 4 * hs..(t + 1) * 4 * hs];
            for j in 0..hs {
                let (i, f, g, o) = (gates[j], gates[hs + j], gates[2 * hs + j], gates[3 * hs + j]);
                let tc = tr.tanh_c[t * hs + j];
                let c_prev = if t == 0 { 0.0 } else { tr.c[(t - 1) * hs + j] };
                let dh = dh_ext[t * hs + j] + dh_next[j];
                let dc = dh * o * (1.0 - tc * tc) + dc_next[j];
                da[j] = dc * g * i * (1.0 - i);
                da[hs + j] = dc * c_prev * f * (1.0 - f);
                da[2 * hs + j] = dc * i * (1.0 - g * g);
                da[3 * hs + j] = dh * tc * o * (1.0 - o);
                dc_next[j] = dc * f;
            }
            let x = match l {
                0 => &cache.inputs[t * in_dim..(t + 1) * in_dim],
                _ => &cache.layers[l - 1].h[t * hs..(t + 1) * hs],
            };
            let h_prev = (t > 0).then(|| &tr.h[(t - 1) * hs..t * hs]);
            dh_next.fill(0.0);
            let dxt = &mut dx[t * in_dim..(t + 1) * in_dim];
            let blocks = grads.blocks_mut();
            for (r, &d) in da.iter().enumerate() {
                if d == 0.0 {
                    continue;
                }
                blocks[3 * l + 2].data[r] += d;
                let gw = &mut blocks[3 * l].data[r * in_dim..(r + 1) * in_dim];
                gw.iter_mut().zip(x).for_each(|(g, xv)| *g += d * xv);
                dxt.iter_mut().zip(w_ih.row(r)).for_each(|(g, wv)| *g += d * wv);
                if let Some(hp) = h_prev {
                    let gw = &mut blocks[3 * l + 1].data[r * hs..(r + 1) * hs];
                    gw.iter_mut().zip(hp).for_each(|(g, hv)| *g += d * hv);
                }
                dh_next.iter_mut().zip(w_hh.row(r)).for_each(|(g, wv)| *g += d * wv);
            }
        }
        dh_ext = dx;
    }
    grads
}

/// Forward pass, loss, and exact gradients of `L_c + α L_r + β L_n` over one
/// clip. The clip's frames are fed as given.
pub fn backward_clip(params: &ModelParams, clip: &Clip, spec: &LossSpec<'_>) -> Result<(LossBreakdown, ModelParams)> {
    spec.validate()?;
    let cache = forward_clip(params, &clip.frames)?;
    let losses = loss_total(params, &cache, clip, spec)?;
    let heads = head_backward(params, &cache, clip, spec)?;
    Ok((losses, backprop(params, &cache, &heads)))
}
