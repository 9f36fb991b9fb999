use rand::Rng;

use super::layer::{self, ConvGeom, LayerKind};
use super::{Real, Tensor, TensorError};

/// Feed-forward network over a single sample, with an optional auxiliary
/// vector injected by a [`LayerKind::ConcatAux`] layer.
#[derive(Debug, Clone, PartialEq)]
pub struct Network<T = f32> {
    input_shape: Vec<usize>,
    layers: Vec<LayerKind>,
    /// `shapes[i]` is the input shape of layer `i`; the last entry is the
    /// output shape.
    shapes: Vec<Vec<usize>>,
    /// Index of each parameterised layer's weight in `params`; its bias
    /// follows it.
    param_index: Vec<Option<usize>>,
    params: Vec<Tensor<T>>,
}

/// Per-parameter gradients, in the same order as [`Network::params`].
pub type Gradients<T> = Vec<Tensor<T>>;

/// Activations recorded by a forward pass for the matching backward pass.
#[derive(Debug, Clone)]
pub struct Tape<T = f32> {
    acts: Vec<Vec<T>>,
    cols: Vec<Vec<T>>,
    argmax: Vec<Vec<usize>>,
    filled: bool,
}

impl<T: Real> Default for Tape<T> {
    fn default() -> Self {
        Tape {
            acts: Vec::new(),
            cols: Vec::new(),
            argmax: Vec::new(),
            filled: false,
        }
    }
}

impl<T: Real> Tape<T> {
    pub fn new() -> Self {
        Self::default()
    }

    /// Network output of the last recorded forward pass.
    pub fn output(&self) -> Option<&[T]> {
        if self.filled {
            self.acts.last().map(Vec::as_slice)
        } else {
            None
        }
    }
}

/// Gradients with respect to the network inputs.
#[derive(Debug, Clone, PartialEq)]
pub struct InputGradients<T> {
    pub input: Vec<T>,
    pub aux: Vec<T>,
}

impl<T: Real> Network<T> {
    /// Validates the layer stack and creates zero-valued parameters.
    pub fn new(input_shape: &[usize], layers: Vec<LayerKind>) -> Result<Self, TensorError> {
        let mut shapes = vec![input_shape.to_vec()];
        let mut param_index = Vec::with_capacity(layers.len());
        let mut params = Vec::new();
        let mut aux_layers = 0;
        for (i, kind) in layers.iter().enumerate() {
            let current = shapes.last().expect("non-empty");
            let next = kind.output_shape(current).ok_or_else(|| TensorError::Shape {
                layer: i,
                kind: kind.name(),
                expected: expected_input(kind),
                actual: current.clone(),
            })?;
            if let Some((ws, bs)) = kind.param_shapes() {
                param_index.push(Some(params.len()));
                params.push(Tensor::zeros(&ws));
                params.push(Tensor::zeros(&bs));
            } else {
                param_index.push(None);
            }
            if matches!(kind, LayerKind::ConcatAux { .. }) {
                aux_layers += 1;
            }
            shapes.push(next);
        }
        if aux_layers > 1 {
            return Err(TensorError::MultipleAux);
        }
        Ok(Network {
            input_shape: input_shape.to_vec(),
            layers,
            shapes,
            param_index,
            params,
        })
    }

    pub fn input_shape(&self) -> &[usize] {
        &self.input_shape
    }

    pub fn output_shape(&self) -> &[usize] {
        self.shapes.last().expect("non-empty")
    }

    pub fn output_len(&self) -> usize {
        self.output_shape().iter().product()
    }

    pub fn layers(&self) -> &[LayerKind] {
        &self.layers
    }

    /// Length of the auxiliary input, zero when the network takes none.
    pub fn aux_len(&self) -> usize {
        self.layers
            .iter()
            .find_map(|l| match l {
                LayerKind::ConcatAux { len } => Some(*len),
                _ => None,
            })
            .unwrap_or(0)
    }

    /// Index of the auxiliary injection layer.
    pub fn aux_index(&self) -> Option<usize> {
        self.layers
            .iter()
            .position(|l| matches!(l, LayerKind::ConcatAux { .. }))
    }

    pub fn params(&self) -> &[Tensor<T>] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [Tensor<T>] {
        &mut self.params
    }

    pub fn parameter_count(&self) -> usize {
        self.params.iter().map(Tensor::len).sum()
    }

    pub fn zero_grads(&self) -> Gradients<T> {
        self.params.iter().map(|p| Tensor::zeros(p.shape())).collect()
    }

    /// Copies all parameters from `values`, checking shapes.
    pub fn set_params(&mut self, values: Vec<Tensor<T>>) -> Result<(), TensorError> {
        if values.len() != self.params.len() {
            return Err(TensorError::TensorCount {
                expected: self.params.len(),
                actual: values.len(),
            });
        }
        for (i, (p, v)) in self.params.iter().zip(&values).enumerate() {
            if p.shape() != v.shape() {
                return Err(TensorError::ParamShape {
                    tensor: i,
                    expected: p.shape().to_vec(),
                    actual: v.shape().to_vec(),
                });
            }
        }
        self.params = values;
        Ok(())
    }

    /// Same network in another precision.
    pub fn cast<U: Real>(&self) -> Network<U> {
        Network {
            input_shape: self.input_shape.clone(),
            layers: self.layers.clone(),
            shapes: self.shapes.clone(),
            param_index: self.param_index.clone(),
            params: self.params.iter().map(Tensor::cast).collect(),
        }
    }

    /// Uniform ±√(6/(fan_in+fan_out)) weights and zero biases. With
    /// `zero_last`, the final parameterised layer starts at zero so the
    /// untrained network outputs exactly zero.
    pub fn init_uniform<R: Rng + ?Sized>(&mut self, rng: &mut R, zero_last: bool) {
        let last = self.param_index.iter().rev().find_map(|p| *p);
        for (kind, pi) in self.layers.iter().zip(&self.param_index) {
            let (Some(pi), Some((fan_in, fan_out))) = (*pi, kind.fans()) else {
                continue;
            };
            self.params[pi + 1].fill(T::ZERO);
            if zero_last && Some(pi) == last {
                self.params[pi].fill(T::ZERO);
                continue;
            }
            let bound = (6.0 / (fan_in + fan_out) as f64).sqrt();
            for v in self.params[pi].data_mut() {
                *v = T::from_f64(rng.gen_range(-bound..bound));
            }
        }
    }

    /// FNV-1a hash over the parameter bits. Used to assert weights are frozen.
    pub fn checksum(&self) -> u64 {
        let mut h: u64 = 0xcbf2_9ce4_8422_2325;
        for p in &self.params {
            for v in p.data() {
                for b in v.to_f64().to_bits().to_le_bytes() {
                    h ^= b as u64;
                    h = h.wrapping_mul(0x0000_0100_0000_01b3);
                }
            }
        }
        h
    }

    /// Evaluates the network on one sample.
    pub fn forward(&self, input: &Tensor<T>, aux: Option<&[T]>) -> Result<Tensor<T>, TensorError> {
        let mut tape = Tape::new();
        let out = self.forward_tape(&mut tape, input, aux)?.to_vec();
        Tensor::from_vec(self.output_shape(), out)
    }

    /// Evaluates the network and records what [`Network::backward`] needs.
    pub fn forward_tape<'t>(
        &self,
        tape: &'t mut Tape<T>,
        input: &Tensor<T>,
        aux: Option<&[T]>,
    ) -> Result<&'t [T], TensorError> {
        if input.shape() != self.input_shape.as_slice() {
            return Err(TensorError::Shape {
                layer: 0,
                kind: self.layers.first().map_or("input", |l| l.name()),
                expected: self.input_shape.clone(),
                actual: input.shape().to_vec(),
            });
        }
        self.forward_slice(tape, input.data(), aux)
    }

    /// Like [`Network::forward_tape`] for a flat input whose length matches
    /// the input shape.
    pub fn forward_slice<'t>(
        &self,
        tape: &'t mut Tape<T>,
        input: &[T],
        aux: Option<&[T]>,
    ) -> Result<&'t [T], TensorError> {
        let in_len: usize = self.input_shape.iter().product();
        if input.len() != in_len {
            return Err(TensorError::Shape {
                layer: 0,
                kind: self.layers.first().map_or("input", |l| l.name()),
                expected: self.input_shape.clone(),
                actual: vec![input.len()],
            });
        }
        let aux_len = self.aux_len();
        let aux = match aux {
            Some(a) if a.len() == aux_len => a,
            None if aux_len == 0 => &[],
            other => {
                return Err(TensorError::AuxLength {
                    expected: aux_len,
                    actual: other.map_or(0, <[T]>::len),
                })
            }
        };

        let n = self.layers.len();
        tape.filled = false;
        tape.acts.resize_with(n + 1, Vec::new);
        tape.cols.resize_with(n, Vec::new);
        tape.argmax.resize_with(n, Vec::new);
        tape.acts[0].clear();
        tape.acts[0].extend_from_slice(input);

        for i in 0..n {
            let out_len: usize = self.shapes[i + 1].iter().product();
            let (before, after) = tape.acts.split_at_mut(i + 1);
            let x = &before[i];
            let y = &mut after[0];
            y.clear();
            y.resize(out_len, T::ZERO);
            match self.layers[i] {
                LayerKind::Dense { inputs, outputs } => {
                    let pi = self.param_index[i].expect("dense has params");
                    layer::dense_forward(
                        self.params[pi].data(),
                        self.params[pi + 1].data(),
                        inputs,
                        outputs,
                        x,
                        y,
                    );
                }
                LayerKind::Conv2d { .. } => {
                    let g = self.conv_geom(i);
                    let pi = self.param_index[i].expect("conv has params");
                    let cols = &mut tape.cols[i];
                    cols.clear();
                    cols.resize(g.col_rows() * g.col_cols(), T::ZERO);
                    layer::im2col(&g, x, cols);
                    layer::conv_forward(&g, self.params[pi].data(), self.params[pi + 1].data(), cols, y);
                }
                LayerKind::Relu => {
                    for (o, &v) in y.iter_mut().zip(x) {
                        *o = if v > T::ZERO { v } else { T::ZERO };
                    }
                }
                LayerKind::MaxPool2d { size } => {
                    let am = &mut tape.argmax[i];
                    am.clear();
                    am.resize(out_len, 0);
                    layer::maxpool_forward(&self.shapes[i], size, x, y, am);
                }
                LayerKind::Flatten => y.copy_from_slice(x),
                LayerKind::ConcatAux { .. } => {
                    y[..x.len()].copy_from_slice(x);
                    y[x.len()..].copy_from_slice(aux);
                }
            }
        }
        tape.filled = true;
        Ok(&tape.acts[n])
    }

    /// Back-propagates `upstream` (gradient of the loss with respect to the
    /// output recorded on `tape`), accumulating parameter gradients into
    /// `grads`.
    pub fn backward(
        &self,
        tape: &Tape<T>,
        upstream: &[T],
        grads: &mut Gradients<T>,
    ) -> Result<InputGradients<T>, TensorError> {
        if !tape.filled || tape.acts.len() != self.layers.len() + 1 {
            return Err(TensorError::NoForward);
        }
        if upstream.len() != self.output_len() {
            return Err(TensorError::Shape {
                layer: self.layers.len().saturating_sub(1),
                kind: "output",
                expected: self.output_shape().to_vec(),
                actual: vec![upstream.len()],
            });
        }
        if grads.len() != self.params.len() {
            return Err(TensorError::TensorCount {
                expected: self.params.len(),
                actual: grads.len(),
            });
        }
        let mut g = upstream.to_vec();
        let mut aux_grad = Vec::new();
        for i in (0..self.layers.len()).rev() {
            let x = &tape.acts[i];
            let mut gx = vec![T::ZERO; x.len()];
            match self.layers[i] {
                LayerKind::Dense { inputs, outputs } => {
                    let pi = self.param_index[i].expect("dense has params");
                    let (gw, gb) = grads.split_at_mut(pi + 1);
                    layer::dense_backward(
                        self.params[pi].data(),
                        inputs,
                        outputs,
                        x,
                        &g,
                        gw[pi].data_mut(),
                        gb[0].data_mut(),
                        &mut gx,
                    );
                }
                LayerKind::Conv2d { .. } => {
                    let geom = self.conv_geom(i);
                    let pi = self.param_index[i].expect("conv has params");
                    let (gw, gb) = grads.split_at_mut(pi + 1);
                    let mut gcols = vec![T::ZERO; geom.col_rows() * geom.col_cols()];
                    layer::conv_backward(
                        &geom,
                        self.params[pi].data(),
                        &tape.cols[i],
                        &g,
                        gw[pi].data_mut(),
                        gb[0].data_mut(),
                        &mut gcols,
                        &mut gx,
                    );
                }
                LayerKind::Relu => {
                    for ((o, &v), &gy) in gx.iter_mut().zip(x).zip(&g) {
                        *o = if v > T::ZERO { gy } else { T::ZERO };
                    }
                }
                LayerKind::MaxPool2d { .. } => {
                    for (&src, &gy) in tape.argmax[i].iter().zip(&g) {
                        gx[src] += gy;
                    }
                }
                LayerKind::Flatten => gx.copy_from_slice(&g),
                LayerKind::ConcatAux { .. } => {
                    gx.copy_from_slice(&g[..x.len()]);
                    aux_grad = g[x.len()..].to_vec();
                }
            }
            g = gx;
        }
        Ok(InputGradients { input: g, aux: aux_grad })
    }

    fn conv_geom(&self, i: usize) -> ConvGeom {
        let LayerKind::Conv2d {
            out_channels,
            kernel,
            stride,
            ..
        } = self.layers[i]
        else {
            unreachable!("conv_geom on non-conv layer")
        };
        let s = &self.shapes[i];
        let o = &self.shapes[i + 1];
        ConvGeom {
            c: s[0],
            h: s[1],
            w: s[2],
            o: out_channels,
            k: kernel,
            stride,
            oh: o[1],
            ow: o[2],
        }
    }
}

fn expected_input(kind: &LayerKind) -> Vec<usize> {
    match *kind {
        LayerKind::Dense { inputs, .. } => vec![inputs],
        LayerKind::Conv2d { in_channels, kernel, .. } => vec![in_channels, kernel, kernel],
        _ => Vec::new(),
    }
}

/// Fluent construction of a [`Network`] from an input shape.
#[derive(Debug, Clone)]
pub struct NetworkBuilder {
    input_shape: Vec<usize>,
    current: Vec<usize>,
    layers: Vec<LayerKind>,
}

impl NetworkBuilder {
    pub fn new(input_shape: &[usize]) -> Self {
        NetworkBuilder {
            input_shape: input_shape.to_vec(),
            current: input_shape.to_vec(),
            layers: Vec::new(),
        }
    }

    fn push(mut self, kind: LayerKind) -> Self {
        if let Some(s) = kind.output_shape(&self.current) {
            self.current = s;
        }
        self.layers.push(kind);
        self
    }

    /// Dense layer fed by the current (flat) activation.
    pub fn dense(self, outputs: usize) -> Self {
        let inputs = self.current.iter().product();
        self.push(LayerKind::Dense { inputs, outputs })
    }

    pub fn conv2d(self, out_channels: usize, kernel: usize, stride: usize) -> Self {
        let in_channels = self.current.first().copied().unwrap_or(0);
        self.push(LayerKind::Conv2d {
            in_channels,
            out_channels,
            kernel,
            stride,
        })
    }

    pub fn relu(self) -> Self {
        self.push(LayerKind::Relu)
    }

    pub fn max_pool(self, size: usize) -> Self {
        self.push(LayerKind::MaxPool2d { size })
    }

    pub fn flatten(self) -> Self {
        self.push(LayerKind::Flatten)
    }

    pub fn concat_aux(self, len: usize) -> Self {
        self.push(LayerKind::ConcatAux { len })
    }

    pub fn build<T: Real>(self) -> Result<Network<T>, TensorError> {
        Network::new(&self.input_shape, self.layers)
    }
}
