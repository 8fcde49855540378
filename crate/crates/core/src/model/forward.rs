use super::{ModelDims, ModelParams};
use crate::data::SkeletonFrame;
use crate::error::{Error, Result};

#[inline]
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[inline]
fn sigmoid(z: f64) -> f64 {
    1.0 / (1.0 + (-z).exp())
}

pub(crate) fn softmax_into(logits: &[f64], out: &mut [f64]) {
    let m = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut sum = 0.0;
    for (o, &l) in out.iter_mut().zip(logits) {
        *o = (l - m).exp();
        sum += *o;
    }
    out.iter_mut().for_each(|o| *o /= sum);
}

/// One LSTM cell update. Both the clip forward pass and streaming inference
/// go through here, which is what makes them agree bit for bit.
#[allow(clippy::too_many_arguments)]
fn cell_step(
    params: &ModelParams,
    layer: usize,
    x: &[f64],
    h_prev: &[f64],
    c_prev: &[f64],
    gates: &mut [f64],
    c: &mut [f64],
    tanh_c: &mut [f64],
    h: &mut [f64],
) {
    let hs = h_prev.len();
    let (w_ih, w_hh, b) = (params.w_ih(layer), params.w_hh(layer), params.bias(layer));
    for (r, g) in gates.iter_mut().enumerate() {
        *g = b.data[r] + dot(w_ih.row(r), x) + dot(w_hh.row(r), h_prev);
    }
    for j in 0..hs {
        let i = sigmoid(gates[j]);
        let f = sigmoid(gates[hs + j]);
        let g = gates[2 * hs + j].tanh();
        let o = sigmoid(gates[3 * hs + j]);
        gates[j] = i;
        gates[hs + j] = f;
        gates[2 * hs + j] = g;
        gates[3 * hs + j] = o;
        c[j] = f * c_prev[j] + i * g;
        tanh_c[j] = c[j].tanh();
        h[j] = o * tanh_c[j];
    }
}

/// Class probabilities into `probs`, actionness softmax into `act`.
fn heads(params: &ModelParams, h: &[f64], probs: &mut [f64], act: &mut [f64]) {
    let (w, b) = (params.cls_w(), params.cls_b());
    let logits: Vec<f64> = (0..w.rows).map(|k| b.data[k] + dot(w.row(k), h)).collect();
    softmax_into(&logits, probs);
    let (w, b) = (params.act_w(), params.act_b());
    let logits = [b.data[0] + dot(w.row(0), h), b.data[1] + dot(w.row(1), h)];
    softmax_into(&logits, act);
}

fn check_frame(dims: &ModelDims, frame: &[f64]) -> Result<()> {
    if frame.len() != dims.input {
        return Err(Error::Dimension {
            expected: dims.input,
            got: frame.len(),
        });
    }
    Ok(())
}

/// Top-layer hidden vectors, one per clip frame.
#[derive(Debug, Clone, PartialEq)]
pub struct HiddenTrack(pub Vec<Vec<f64>>);

impl HiddenTrack {
    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClipOutput {
    pub hidden: HiddenTrack,
    /// `p_t` over the `C + 1` augmented classes.
    pub probs: Vec<Vec<f64>>,
    /// `q_t`, the action probability of the actionness head.
    pub actionness: Vec<f64>,
}

#[derive(Debug, Clone)]
pub(crate) struct LayerTrace {
    /// Activated gates per step, `4H` each: i, f, g, o.
    pub gates: Vec<f64>,
    pub c: Vec<f64>,
    pub tanh_c: Vec<f64>,
    pub h: Vec<f64>,
}

/// Everything backpropagation needs from a forward pass.
#[derive(Debug, Clone)]
pub struct ForwardCache {
    pub(crate) dims: ModelDims,
    pub(crate) steps: usize,
    pub(crate) inputs: Vec<f64>,
    pub(crate) layers: Vec<LayerTrace>,
    pub(crate) probs: Vec<f64>,
    pub(crate) act: Vec<f64>,
}

impl ForwardCache {
    pub fn len(&self) -> usize {
        self.steps
    }

    pub fn is_empty(&self) -> bool {
        self.steps == 0
    }

    pub fn probs(&self, t: usize) -> &[f64] {
        let k = self.dims.outputs();
        &self.probs[t * k..(t + 1) * k]
    }

    pub fn actionness(&self, t: usize) -> f64 {
        self.act[2 * t + 1]
    }

    pub fn hidden(&self, t: usize) -> &[f64] {
        let h = self.dims.hidden;
        &self.layers[self.dims.layers - 1].h[t * h..(t + 1) * h]
    }

    pub fn output(&self) -> ClipOutput {
        ClipOutput {
            hidden: HiddenTrack((0..self.steps).map(|t| self.hidden(t).to_vec()).collect()),
            probs: (0..self.steps).map(|t| self.probs(t).to_vec()).collect(),
            actionness: (0..self.steps).map(|t| self.actionness(t)).collect(),
        }
    }
}

/// Runs the network over a clip from a zero state.
///
/// Outputs at step `t` depend only on frames `..=t`.
pub fn forward_clip(params: &ModelParams, frames: &[SkeletonFrame]) -> Result<ForwardCache> {
    let dims = params.dims();
    let (hs, steps) = (dims.hidden, frames.len());
    let mut inputs = Vec::with_capacity(steps * dims.input);
    for f in frames {
        check_frame(&dims, &f.coords)?;
        inputs.extend_from_slice(&f.coords);
    }
    let zeros = vec![0.0; hs];
    let mut layers: Vec<LayerTrace> = Vec::with_capacity(dims.layers);
    for l in 0..dims.layers {
        let mut tr = LayerTrace {
            gates: vec![0.0; steps * 4 * hs],
            c: vec![0.0; steps * hs],
            tanh_c: vec![0.0; steps * hs],
            h: vec![0.0; steps * hs],
        };
        for t in 0..steps {
            let x = match l {
                0 => &inputs[t * dims.input..(t + 1) * dims.input],
                _ => &layers[l - 1].h[t * hs..(t + 1) * hs],
            };
            let (h_done, h_rest) = tr.h.split_at_mut(t * hs);
            let (c_done, c_rest) = tr.c.split_at_mut(t * hs);
            let (h_prev, c_prev) = if t == 0 {
                (&zeros[..], &zeros[..])
            } else {
                (&h_done[(t - 1) * hs..], &c_done[(t - 1) * hs..])
            };
            cell_step(
                params,
                l,
                x,
                h_prev,
                c_prev,
                &mut tr.gates[t * 4 * hs..(t + 1) * 4 * hs],
                &mut c_rest[..hs],
                &mut tr.tanh_c[t * hs..(t + 1) * hs],
                &mut h_rest[..hs],
            );
        }
        layers.push(tr);
    }
    let k = dims.outputs();
    let mut probs = vec![0.0; steps * k];
    let mut act = vec![0.0; steps * 2];
    let top = &layers[dims.layers - 1];
    for t in 0..steps {
        heads(
            params,
            &top.h[t * hs..(t + 1) * hs],
            &mut probs[t * k..(t + 1) * k],
            &mut act[2 * t..2 * t + 2],
        );
    }
    Ok(ForwardCache {
        dims,
        steps,
        inputs,
        layers,
        probs,
        act,
    })
}

/// Recurrent state carried between streamed frames.
#[derive(Debug, Clone, PartialEq)]
pub struct StreamState {
    h: Vec<Vec<f64>>,
    c: Vec<Vec<f64>>,
    consumed: usize,
}

impl StreamState {
    pub fn new(dims: ModelDims) -> Self {
        StreamState {
            h: vec![vec![0.0; dims.hidden]; dims.layers],
            c: vec![vec![0.0; dims.hidden]; dims.layers],
            consumed: 0,
        }
    }

    pub fn reset(&mut self) {
        self.h.iter_mut().chain(self.c.iter_mut()).for_each(|v| v.fill(0.0));
        self.consumed = 0;
    }

    /// Frames consumed since the last reset.
    pub fn consumed(&self) -> usize {
        self.consumed
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StreamOutput {
    pub probs: Vec<f64>,
    pub actionness: f64,
    pub hidden: Vec<f64>,
}

impl StreamOutput {
    /// Most probable augmented class and its probability; ties go to the
    /// lower class id.
    pub fn argmax(&self) -> (usize, f64) {
        crate::eval::argmax(&self.probs)
    }
}

/// Advances the stream by one frame.
pub fn stream_step(params: &ModelParams, state: &mut StreamState, frame: &[f64]) -> Result<StreamOutput> {
    let dims = params.dims();
    check_frame(&dims, frame)?;
    if state.h.len() != dims.layers || state.h[0].len() != dims.hidden {
        return Err(Error::Dimension {
            expected: dims.hidden,
            got: state.h[0].len(),
        });
    }
    let hs = dims.hidden;
    let mut gates = vec![0.0; 4 * hs];
    let mut tanh_c = vec![0.0; hs];
    let mut x = frame.to_vec();
    for l in 0..dims.layers {
        let mut c = vec![0.0; hs];
        let mut h = vec![0.0; hs];
        cell_step(params, l, &x, &state.h[l], &state.c[l], &mut gates, &mut c, &mut tanh_c, &mut h);
        state.c[l] = c;
        state.h[l] = h;
        x.clone_from(&state.h[l]);
    }
    let mut probs = vec![0.0; dims.outputs()];
    let mut act = [0.0; 2];
    heads(params, &x, &mut probs, &mut act);
    state.consumed += 1;
    Ok(StreamOutput {
        probs,
        actionness: act[1],
        hidden: x,
    })
}
