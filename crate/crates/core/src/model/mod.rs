//! Stacked-LSTM backbone with a class head, an actionness head and the
//! projection used by the full-representation regression.

mod backward;
mod forward;
mod gradcheck;
mod optim;

pub use backward::{backward_clip, head_backward, HeadGradients};
pub use forward::{forward_clip, stream_step, ClipOutput, ForwardCache, HiddenTrack, StreamOutput, StreamState};
pub use gradcheck::{grad_check, grad_check_with, GradCheckReport, Stencil};
pub use optim::{Adam, AdamConfig};

use rand::Rng;
use rand_distr::{Distribution, Normal, StandardNormal};

use crate::error::{Error, Result};

/// Sizes that fix the parameter shape table.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct ModelDims {
    /// Values per input frame.
    pub input: usize,
    pub hidden: usize,
    pub layers: usize,
    /// Action classes `C`; the class head emits `C + 1` outputs.
    pub classes: usize,
}

impl ModelDims {
    pub fn outputs(&self) -> usize {
        self.classes + 1
    }

    fn validate(&self) -> Result<()> {
        if self.input == 0 || self.hidden == 0 || self.layers == 0 || self.classes == 0 {
            return Err(Error::InvalidArgument(format!(
                "model dimensions must be positive: {self:?}"
            )));
        }
        Ok(())
    }
}

/// A named, row-major matrix (vectors have one column).
#[derive(Debug, Clone, PartialEq)]
pub struct ParamBlock {
    pub name: String,
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<f64>,
}

impl ParamBlock {
    fn zeros(name: String, rows: usize, cols: usize) -> Self {
        ParamBlock {
            name,
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    #[inline]
    pub fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    #[inline]
    pub fn row_mut(&mut self, r: usize) -> &mut [f64] {
        &mut self.data[r * self.cols..(r + 1) * self.cols]
    }
}

/// All trainable weights. Blocks are stored in a fixed order:
/// per layer `w_ih` (4H × in), `w_hh` (4H × H), `b` (4H) with gates ordered
/// input, forget, cell, output; then the class head, the actionness head and
/// the projection `W` (H × H).
///
/// The same type doubles as a gradient container.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams {
    dims: ModelDims,
    blocks: Vec<ParamBlock>,
}

impl ModelParams {
    pub fn zeros(dims: ModelDims) -> Result<Self> {
        dims.validate()?;
        let h = dims.hidden;
        let mut blocks = Vec::with_capacity(3 * dims.layers + 5);
        for l in 0..dims.layers {
            let fan_in = if l == 0 { dims.input } else { h };
            blocks.push(ParamBlock::zeros(format!("lstm{l}.w_ih"), 4 * h, fan_in));
            blocks.push(ParamBlock::zeros(format!("lstm{l}.w_hh"), 4 * h, h));
            blocks.push(ParamBlock::zeros(format!("lstm{l}.b"), 4 * h, 1));
        }
        blocks.push(ParamBlock::zeros("cls.w".into(), dims.outputs(), h));
        blocks.push(ParamBlock::zeros("cls.b".into(), dims.outputs(), 1));
        blocks.push(ParamBlock::zeros("act.w".into(), 2, h));
        blocks.push(ParamBlock::zeros("act.b".into(), 2, 1));
        blocks.push(ParamBlock::zeros("proj.w".into(), h, h));
        Ok(ModelParams { dims, blocks })
    }

    /// Standard initialization: input weights uniform in ±1/√fan_in,
    /// orthogonal recurrent blocks, forget bias 1, projection = I + N(0, 0.01²).
    pub fn init<R: Rng + ?Sized>(dims: ModelDims, rng: &mut R) -> Result<Self> {
        let mut p = Self::zeros(dims)?;
        let h = dims.hidden;
        for l in 0..dims.layers {
            let w_ih = p.w_ih_mut(l);
            let bound = 1.0 / (w_ih.cols as f64).sqrt();
            w_ih.data.iter_mut().for_each(|v| *v = rng.gen_range(-bound..=bound));
            let w_hh = p.w_hh_mut(l);
            for gate in 0..4 {
                let q = random_orthogonal(h, rng);
                w_hh.data[gate * h * h..(gate + 1) * h * h].copy_from_slice(&q);
            }
            p.bias_mut(l).data[h..2 * h].fill(1.0);
        }
        let bound = 1.0 / (h as f64).sqrt();
        for idx in [p.cls_w_index(), p.act_w_index()] {
            p.blocks[idx]
                .data
                .iter_mut()
                .for_each(|v| *v = rng.gen_range(-bound..=bound));
        }
        let noise = Normal::new(0.0, 0.01).expect("valid sigma");
        let proj = p.proj_mut();
        for r in 0..h {
            for c in 0..h {
                proj.data[r * h + c] = f64::from(u8::from(r == c)) + noise.sample(rng);
            }
        }
        Ok(p)
    }

    pub fn zeros_like(&self) -> Self {
        ModelParams {
            dims: self.dims,
            blocks: self
                .blocks
                .iter()
                .map(|b| ParamBlock::zeros(b.name.clone(), b.rows, b.cols))
                .collect(),
        }
    }

    pub fn dims(&self) -> ModelDims {
        self.dims
    }

    pub fn blocks(&self) -> &[ParamBlock] {
        &self.blocks
    }

    pub fn blocks_mut(&mut self) -> &mut [ParamBlock] {
        &mut self.blocks
    }

    pub fn block(&self, name: &str) -> Option<&ParamBlock> {
        self.blocks.iter().find(|b| b.name == name)
    }

    /// `(name, rows, cols)` for every block, in storage order.
    pub fn shape_table(&self) -> Vec<(String, usize, usize)> {
        self.blocks
            .iter()
            .map(|b| (b.name.clone(), b.rows, b.cols))
            .collect()
    }

    pub fn num_values(&self) -> usize {
        self.blocks.iter().map(|b| b.data.len()).sum()
    }

    /// Replaces block contents by name, checking shapes.
    pub fn set_block(&mut self, name: &str, rows: usize, cols: usize, data: Vec<f64>) -> Result<()> {
        let block = self
            .blocks
            .iter_mut()
            .find(|b| b.name == name)
            .ok_or_else(|| Error::Checkpoint(format!("unknown parameter block `{name}`")))?;
        if block.rows != rows || block.cols != cols || data.len() != rows * cols {
            return Err(Error::Checkpoint(format!(
                "block `{name}` has shape {}x{}, got {rows}x{cols}",
                block.rows, block.cols
            )));
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::Checkpoint(format!("block `{name}` has non-finite values")));
        }
        block.data = data;
        Ok(())
    }

    pub fn squared_norm(&self) -> f64 {
        self.blocks
            .iter()
            .flat_map(|b| b.data.iter())
            .map(|v| v * v)
            .sum()
    }

    /// `self += other` blockwise.
    pub fn accumulate(&mut self, other: &ModelParams) {
        for (a, b) in self.blocks.iter_mut().zip(&other.blocks) {
            for (x, y) in a.data.iter_mut().zip(&b.data) {
                *x += y;
            }
        }
    }

    pub fn scale(&mut self, factor: f64) {
        for b in &mut self.blocks {
            b.data.iter_mut().for_each(|v| *v *= factor);
        }
    }

    pub(crate) fn w_ih(&self, layer: usize) -> &ParamBlock {
        &self.blocks[3 * layer]
    }
    pub(crate) fn w_hh(&self, layer: usize) -> &ParamBlock {
        &self.blocks[3 * layer + 1]
    }
    pub(crate) fn bias(&self, layer: usize) -> &ParamBlock {
        &self.blocks[3 * layer + 2]
    }
    pub(crate) fn w_ih_mut(&mut self, layer: usize) -> &mut ParamBlock {
        &mut self.blocks[3 * layer]
    }
    pub(crate) fn w_hh_mut(&mut self, layer: usize) -> &mut ParamBlock {
        &mut self.blocks[3 * layer + 1]
    }
    pub(crate) fn bias_mut(&mut self, layer: usize) -> &mut ParamBlock {
        &mut self.blocks[3 * layer + 2]
    }
    fn cls_w_index(&self) -> usize {
        3 * self.dims.layers
    }
    pub(crate) fn cls_w(&self) -> &ParamBlock {
        &self.blocks[self.cls_w_index()]
    }
    pub(crate) fn cls_b(&self) -> &ParamBlock {
        &self.blocks[self.cls_w_index() + 1]
    }
    fn act_w_index(&self) -> usize {
        3 * self.dims.layers + 2
    }
    pub(crate) fn act_w(&self) -> &ParamBlock {
        &self.blocks[self.act_w_index()]
    }
    pub(crate) fn act_b(&self) -> &ParamBlock {
        &self.blocks[self.act_w_index() + 1]
    }
    pub fn proj(&self) -> &ParamBlock {
        &self.blocks[3 * self.dims.layers + 4]
    }
    pub(crate) fn proj_mut(&mut self) -> &mut ParamBlock {
        &mut self.blocks[3 * self.dims.layers + 4]
    }
}

#[inline]
pub(crate) fn dot_row(block: &ParamBlock, r: usize, v: &[f64]) -> f64 {
    forward::dot(block.row(r), v)
}

/// Row-major `n × n` orthogonal matrix from Gram-Schmidt on Gaussian rows.
fn random_orthogonal<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Vec<f64> {
    let mut q = vec![0.0; n * n];
    let mut r = 0;
    while r < n {
        let mut v: Vec<f64> = (0..n).map(|_| StandardNormal.sample(rng)).collect();
        for _ in 0..2 {
            for k in 0..r {
                let row = &q[k * n..(k + 1) * n];
                let dot: f64 = row.iter().zip(&v).map(|(a, b)| a * b).sum();
                v.iter_mut().zip(row).for_each(|(x, y)| *x -= dot * y);
            }
        }
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm < 1e-8 {
            continue;
        }
        q[r * n..(r + 1) * n]
            .iter_mut()
            .zip(&v)
            .for_each(|(d, s)| *d = s / norm);
        r += 1;
    }
    q
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream_rng;

    fn dims() -> ModelDims {
        ModelDims {
            input: 6,
            hidden: 8,
            layers: 3,
            classes: 4,
        }
    }

    #[test]
    fn shape_table() {
        let p = ModelParams::zeros(dims()).unwrap();
        let t = p.shape_table();
        assert_eq!(t.len(), 14);
        assert_eq!(t[0], ("lstm0.w_ih".into(), 32, 6));
        assert_eq!(t[3], ("lstm1.w_ih".into(), 32, 8));
        assert_eq!(t[9], ("cls.w".into(), 5, 8));
        assert_eq!(t[13], ("proj.w".into(), 8, 8));
    }

    #[test]
    fn init_properties() {
        let mut rng = stream_rng(7, 0);
        let p = ModelParams::init(dims(), &mut rng).unwrap();
        let h = 8;
        for l in 0..3 {
            let b = p.bias(l);
            assert!(b.data[h..2 * h].iter().all(|&v| v == 1.0));
            assert!(b.data[..h].iter().all(|&v| v == 0.0));
            let w = p.w_hh(l);
            // Each gate block Q satisfies Q Qᵀ = I.
            for g in 0..4 {
                let q = &w.data[g * h * h..(g + 1) * h * h];
                for i in 0..h {
                    for j in 0..h {
                        let dot: f64 = (0..h).map(|k| q[i * h + k] * q[j * h + k]).sum();
                        let want = if i == j { 1.0 } else { 0.0 };
                        assert!((dot - want).abs() < 1e-10);
                    }
                }
            }
            let bound = 1.0 / (p.w_ih(l).cols as f64).sqrt();
            assert!(p.w_ih(l).data.iter().all(|v| v.abs() <= bound));
        }
        let proj = p.proj();
        for r in 0..h {
            assert!((proj.data[r * h + r] - 1.0).abs() < 0.1);
        }
    }

    #[test]
    fn init_is_deterministic() {
        let a = ModelParams::init(dims(), &mut stream_rng(1, 2)).unwrap();
        let b = ModelParams::init(dims(), &mut stream_rng(1, 2)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn set_block_checks_shape() {
        let mut p = ModelParams::zeros(dims()).unwrap();
        assert!(p.set_block("cls.b", 5, 1, vec![1.0; 5]).is_ok());
        assert!(p.set_block("cls.b", 4, 1, vec![1.0; 4]).is_err());
        assert!(p.set_block("nope", 1, 1, vec![1.0]).is_err());
    }
}
