//! Fully connected ReLU network with an optional conditioning input.
//!
//! Hidden layer `i` computes `relu(W_i h + b_i + E_i c)` where `c` is the
//! conditioning vector (for the score network, a sinusoidal embedding of the
//! noise level). The output layer is affine and never sees `c`.
//!
//! All parameters live in one flat buffer so the optimizer and checkpoint code
//! can treat them uniformly. Per layer the buffer holds the weight matrix
//! (`out x in`, row-major), the bias, then the conditioning projection
//! (`out x embed_dim`) for hidden layers of conditioned networks.

use crate::error::{dim, invalid, Result};
use crate::matrix::{gemm, Matrix, View};
use crate::rng::Rng;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
struct LayerLayout {
    fan_in: usize,
    fan_out: usize,
    weight: usize,
    bias: usize,
    embed: Option<usize>,
}

impl LayerLayout {
    fn weight_range(&self) -> std::ops::Range<usize> {
        self.weight..self.weight + self.fan_in * self.fan_out
    }

    fn bias_range(&self) -> std::ops::Range<usize> {
        self.bias..self.bias + self.fan_out
    }

    fn embed_range(&self, embed_dim: usize) -> Option<std::ops::Range<usize>> {
        self.embed.map(|e| e..e + self.fan_out * embed_dim)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct MlpNetwork {
    layer_dims: Vec<usize>,
    embed_dim: usize,
    layout: Vec<LayerLayout>,
    params: Vec<f64>,
}

/// Intermediate activations kept by [`MlpNetwork::forward_trace`] for the
/// backward pass.
#[derive(Clone, Debug)]
pub struct Trace {
    /// Input to each layer: `inputs[0]` is the network input, `inputs[i]` the
    /// post-ReLU output of hidden layer `i - 1`.
    inputs: Vec<Matrix>,
    pub output: Matrix,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Gradients {
    /// Same layout as [`MlpNetwork::params`].
    pub params: Vec<f64>,
    /// Gradient with respect to the network input, one row per example.
    pub input: Matrix,
}

fn build_layout(layer_dims: &[usize], embed_dim: usize) -> (Vec<LayerLayout>, usize) {
    let n_layers = layer_dims.len() - 1;
    let mut layout = Vec::with_capacity(n_layers);
    let mut offset = 0;
    for i in 0..n_layers {
        let (fan_in, fan_out) = (layer_dims[i], layer_dims[i + 1]);
        let weight = offset;
        offset += fan_in * fan_out;
        let bias = offset;
        offset += fan_out;
        let embed = if embed_dim > 0 && i + 1 < n_layers {
            let e = offset;
            offset += fan_out * embed_dim;
            Some(e)
        } else {
            None
        };
        layout.push(LayerLayout { fan_in, fan_out, weight, bias, embed });
    }
    (layout, offset)
}

fn check_dims(layer_dims: &[usize], embed_dim: usize) -> Result<()> {
    if layer_dims.len() < 2 {
        return Err(invalid("a network needs at least an input and an output dimension"));
    }
    if layer_dims.contains(&0) {
        return Err(invalid(format!("zero-width layer in {layer_dims:?}")));
    }
    if embed_dim > 0 && layer_dims.len() < 3 {
        return Err(invalid("conditioning needs at least one hidden layer"));
    }
    Ok(())
}

impl MlpNetwork {
    /// All-zero parameters.
    pub fn zeros(layer_dims: &[usize], embed_dim: usize) -> Result<Self> {
        check_dims(layer_dims, embed_dim)?;
        let (layout, n) = build_layout(layer_dims, embed_dim);
        Ok(Self { layer_dims: layer_dims.to_vec(), embed_dim, layout, params: vec![0.0; n] })
    }

    /// Fan-in scaled uniform initialization: every parameter feeding a unit
    /// with fan-in `k` is drawn from `U(-1/sqrt(k), 1/sqrt(k))`. The
    /// conditioning projection uses `embed_dim` as its fan-in.
    pub fn init(layer_dims: &[usize], embed_dim: usize, rng: &mut Rng) -> Result<Self> {
        let mut net = Self::zeros(layer_dims, embed_dim)?;
        let layout = net.layout.clone();
        for l in &layout {
            let bound = 1.0 / (l.fan_in as f64).sqrt();
            for p in &mut net.params[l.weight_range()] {
                *p = rng.uniform_range(-bound, bound);
            }
            for p in &mut net.params[l.bias_range()] {
                *p = rng.uniform_range(-bound, bound);
            }
            if let Some(r) = l.embed_range(embed_dim) {
                let bound = 1.0 / (embed_dim as f64).sqrt();
                for p in &mut net.params[r] {
                    *p = rng.uniform_range(-bound, bound);
                }
            }
        }
        Ok(net)
    }

    pub fn from_params(layer_dims: &[usize], embed_dim: usize, params: Vec<f64>) -> Result<Self> {
        let mut net = Self::zeros(layer_dims, embed_dim)?;
        if params.len() != net.params.len() {
            return Err(dim(format!(
                "network {layer_dims:?} (embed {embed_dim}) has {} parameters, got {}",
                net.params.len(),
                params.len()
            )));
        }
        net.params = params;
        Ok(net)
    }

    pub fn layer_dims(&self) -> &[usize] {
        &self.layer_dims
    }

    pub fn embed_dim(&self) -> usize {
        self.embed_dim
    }

    pub fn is_conditioned(&self) -> bool {
        self.embed_dim > 0
    }

    pub fn input_dim(&self) -> usize {
        self.layer_dims[0]
    }

    pub fn output_dim(&self) -> usize {
        *self.layer_dims.last().unwrap()
    }

    pub fn num_layers(&self) -> usize {
        self.layout.len()
    }

    pub fn num_params(&self) -> usize {
        self.params.len()
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    /// Weight matrix of layer `i` (`out x in`).
    pub fn weight(&self, i: usize) -> &[f64] {
        &self.params[self.layout[i].weight_range()]
    }

    pub fn weight_mut(&mut self, i: usize) -> &mut [f64] {
        let r = self.layout[i].weight_range();
        &mut self.params[r]
    }

    pub fn bias(&self, i: usize) -> &[f64] {
        &self.params[self.layout[i].bias_range()]
    }

    pub fn bias_mut(&mut self, i: usize) -> &mut [f64] {
        let r = self.layout[i].bias_range();
        &mut self.params[r]
    }

    /// Conditioning projection of hidden layer `i` (`out x embed_dim`).
    pub fn embed_projection(&self, i: usize) -> Option<&[f64]> {
        self.layout[i].embed_range(self.embed_dim).map(|r| &self.params[r])
    }

    pub fn embed_projection_mut(&mut self, i: usize) -> Option<&mut [f64]> {
        let r = self.layout[i].embed_range(self.embed_dim)?;
        Some(&mut self.params[r])
    }

    fn check_inputs(&self, x: &Matrix, embed: Option<&Matrix>) -> Result<()> {
        if x.cols() != self.input_dim() {
            return Err(dim(format!("input has {} columns, network expects {}", x.cols(), self.input_dim())));
        }
        match (embed, self.is_conditioned()) {
            (Some(e), true) => {
                if e.shape() != (x.rows(), self.embed_dim) {
                    return Err(dim(format!(
                        "conditioning is {}x{}, expected {}x{}",
                        e.rows(),
                        e.cols(),
                        x.rows(),
                        self.embed_dim
                    )));
                }
            }
            (None, false) => {}
            (Some(_), false) => return Err(dim("conditioning given to an unconditioned network")),
            (None, true) => return Err(dim("conditioned network called without conditioning")),
        }
        Ok(())
    }

    /// Batched forward pass; one example per row.
    pub fn forward_batch(&self, x: &Matrix, embed: Option<&Matrix>) -> Result<Matrix> {
        self.check_inputs(x, embed)?;
        let mut h = x.clone();
        for (i, l) in self.layout.iter().enumerate() {
            h = self.layer_forward(i, l, &h, embed);
        }
        Ok(h)
    }

    pub fn forward_trace(&self, x: &Matrix, embed: Option<&Matrix>) -> Result<Trace> {
        self.check_inputs(x, embed)?;
        let mut inputs = Vec::with_capacity(self.layout.len());
        let mut h = x.clone();
        for (i, l) in self.layout.iter().enumerate() {
            let next = self.layer_forward(i, l, &h, embed);
            inputs.push(h);
            h = next;
        }
        Ok(Trace { inputs, output: h })
    }

    fn layer_forward(&self, i: usize, l: &LayerLayout, h: &Matrix, embed: Option<&Matrix>) -> Matrix {
        let n = h.rows();
        let mut z = Matrix::zeros(n, l.fan_out);
        let bias = &self.params[l.bias_range()];
        for row in z.data_mut().chunks_exact_mut(l.fan_out) {
            row.copy_from_slice(bias);
        }
        let w = View::new(&self.params[l.weight_range()], l.fan_out, l.fan_in);
        gemm(View::of(h), w.t(), 1.0, z.data_mut());
        if let (Some(r), Some(e)) = (l.embed_range(self.embed_dim), embed) {
            let p = View::new(&self.params[r], l.fan_out, self.embed_dim);
            gemm(View::of(e), p.t(), 1.0, z.data_mut());
        }
        if i + 1 < self.layout.len() {
            z.data_mut().iter_mut().for_each(|v| *v = v.max(0.0));
        }
        z
    }

    /// Reverse-mode gradients of `sum_rows <upstream_row, output_row>` with
    /// respect to every parameter (summed over the batch) and every input row.
    pub fn backward_batch(&self, trace: &Trace, embed: Option<&Matrix>, upstream: &Matrix) -> Result<Gradients> {
        let n = trace.output.rows();
        if upstream.shape() != (n, self.output_dim()) {
            return Err(dim(format!(
                "upstream gradient is {}x{}, expected {}x{}",
                upstream.rows(),
                upstream.cols(),
                n,
                self.output_dim()
            )));
        }
        self.check_inputs(&trace.inputs[0], embed)?;
        let mut grads = vec![0.0; self.params.len()];
        let mut delta = upstream.clone();
        for (i, l) in self.layout.iter().enumerate().rev() {
            let h_in = &trace.inputs[i];
            gemm(View::of(&delta).t(), View::of(h_in), 0.0, &mut grads[l.weight_range()]);
            let gb = &mut grads[l.bias_range()];
            for row in delta.iter_rows() {
                for (g, d) in gb.iter_mut().zip(row) {
                    *g += d;
                }
            }
            if let (Some(r), Some(e)) = (l.embed_range(self.embed_dim), embed) {
                gemm(View::of(&delta).t(), View::of(e), 0.0, &mut grads[r]);
            }
            let mut dh = Matrix::zeros(n, l.fan_in);
            let w = View::new(&self.params[l.weight_range()], l.fan_out, l.fan_in);
            gemm(View::of(&delta), w, 0.0, dh.data_mut());
            if i > 0 {
                // h_in is a ReLU output; its derivative is the positivity mask
                for (g, &a) in dh.data_mut().iter_mut().zip(h_in.data()) {
                    if a <= 0.0 {
                        *g = 0.0;
                    }
                }
            }
            delta = dh;
        }
        Ok(Gradients { params: grads, input: delta })
    }

    /// Single-example forward pass.
    pub fn forward(&self, x: &[f64], embed: Option<&[f64]>) -> Result<Vec<f64>> {
        let xm = Matrix::new(1, x.len(), x.to_vec())?;
        let em = embed.map(|e| Matrix::new(1, e.len(), e.to_vec())).transpose()?;
        Ok(self.forward_batch(&xm, em.as_ref())?.into_data())
    }

    /// Single-example gradients of `<upstream, forward(x, embed)>`.
    pub fn backward(&self, x: &[f64], embed: Option<&[f64]>, upstream: &[f64]) -> Result<Gradients> {
        let xm = Matrix::new(1, x.len(), x.to_vec())?;
        let em = embed.map(|e| Matrix::new(1, e.len(), e.to_vec())).transpose()?;
        let trace = self.forward_trace(&xm, em.as_ref())?;
        let up = Matrix::new(1, upstream.len(), upstream.to_vec())?;
        self.backward_batch(&trace, em.as_ref(), &up)
    }
}
