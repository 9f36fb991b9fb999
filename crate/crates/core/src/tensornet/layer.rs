use super::Real;

/// Layer configuration. Parameterised layers own a `(weight, bias)` pair in
/// the network's parameter list.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LayerKind {
    /// `y = W·x + b` with `W: [outputs, inputs]`.
    Dense { inputs: usize, outputs: usize },
    /// Valid (unpadded) convolution over `[channels, height, width]`,
    /// `W: [out_channels, in_channels, kernel, kernel]`.
    Conv2d {
        in_channels: usize,
        out_channels: usize,
        kernel: usize,
        stride: usize,
    },
    Relu,
    /// Non-overlapping `size × size` max pooling; trailing rows/columns that
    /// do not fill a window are dropped.
    MaxPool2d { size: usize },
    Flatten,
    /// Appends the auxiliary input vector to a flat activation.
    ConcatAux { len: usize },
}

impl LayerKind {
    pub fn name(&self) -> &'static str {
        match self {
            LayerKind::Dense { .. } => "dense",
            LayerKind::Conv2d { .. } => "conv2d",
            LayerKind::Relu => "relu",
            LayerKind::MaxPool2d { .. } => "max-pool2d",
            LayerKind::Flatten => "flatten",
            LayerKind::ConcatAux { .. } => "concat-aux",
        }
    }

    pub fn has_params(&self) -> bool {
        matches!(self, LayerKind::Dense { .. } | LayerKind::Conv2d { .. })
    }

    /// Shapes of `(weight, bias)` for parameterised layers.
    pub fn param_shapes(&self) -> Option<(Vec<usize>, Vec<usize>)> {
        match *self {
            LayerKind::Dense { inputs, outputs } => Some((vec![outputs, inputs], vec![outputs])),
            LayerKind::Conv2d {
                in_channels,
                out_channels,
                kernel,
                ..
            } => Some((
                vec![out_channels, in_channels, kernel, kernel],
                vec![out_channels],
            )),
            _ => None,
        }
    }

    /// `(fan_in, fan_out)` for weight initialisation.
    pub fn fans(&self) -> Option<(usize, usize)> {
        match *self {
            LayerKind::Dense { inputs, outputs } => Some((inputs, outputs)),
            LayerKind::Conv2d {
                in_channels,
                out_channels,
                kernel,
                ..
            } => Some((in_channels * kernel * kernel, out_channels * kernel * kernel)),
            _ => None,
        }
    }

    /// Output shape for a given input shape, or `None` if incompatible.
    pub fn output_shape(&self, input: &[usize]) -> Option<Vec<usize>> {
        match *self {
            LayerKind::Dense { inputs, outputs } => (input == [inputs]).then(|| vec![outputs]),
            LayerKind::Conv2d {
                in_channels,
                out_channels,
                kernel,
                stride,
            } => match *input {
                [c, h, w] if c == in_channels && h >= kernel && w >= kernel && stride > 0 => {
                    Some(vec![
                        out_channels,
                        (h - kernel) / stride + 1,
                        (w - kernel) / stride + 1,
                    ])
                }
                _ => None,
            },
            LayerKind::Relu => Some(input.to_vec()),
            LayerKind::MaxPool2d { size } => match *input {
                [c, h, w] if size > 0 && h >= size && w >= size => {
                    Some(vec![c, h / size, w / size])
                }
                _ => None,
            },
            LayerKind::Flatten => Some(vec![input.iter().product()]),
            LayerKind::ConcatAux { len } => match *input {
                [n] => Some(vec![n + len]),
                _ => None,
            },
        }
    }
}

pub(crate) fn dense_forward<T: Real>(
    w: &[T],
    b: &[T],
    inputs: usize,
    outputs: usize,
    x: &[T],
    y: &mut [T],
) {
    y.copy_from_slice(b);
    T::gemm(outputs, inputs, 1, w, false, x, false, T::ONE, y);
}

pub(crate) fn dense_backward<T: Real>(
    w: &[T],
    inputs: usize,
    outputs: usize,
    x: &[T],
    g: &[T],
    gw: &mut [T],
    gb: &mut [T],
    gx: &mut [T],
) {
    // gW += g·xᵀ
    T::gemm(outputs, 1, inputs, g, false, x, false, T::ONE, gw);
    for (a, &b) in gb.iter_mut().zip(g) {
        *a += b;
    }
    // gx = Wᵀ·g
    T::gemm(inputs, outputs, 1, w, true, g, false, T::ZERO, gx);
}

/// Geometry of one convolution: input `[c, h, w]`, output `[o, oh, ow]`.
#[derive(Debug, Clone, Copy)]
pub(crate) struct ConvGeom {
    pub c: usize,
    pub h: usize,
    pub w: usize,
    pub o: usize,
    pub k: usize,
    pub stride: usize,
    pub oh: usize,
    pub ow: usize,
}

impl ConvGeom {
    pub fn col_rows(&self) -> usize {
        self.c * self.k * self.k
    }
    pub fn col_cols(&self) -> usize {
        self.oh * self.ow
    }
}

/// Unfolds `x` into `cols: [c·k·k, oh·ow]`.
pub(crate) fn im2col<T: Real>(g: &ConvGeom, x: &[T], cols: &mut [T]) {
    let n = g.col_cols();
    for c in 0..g.c {
        for ky in 0..g.k {
            for kx in 0..g.k {
                let row = (c * g.k + ky) * g.k + kx;
                let dst = &mut cols[row * n..(row + 1) * n];
                for oy in 0..g.oh {
                    let iy = oy * g.stride + ky;
                    let src = &x[(c * g.h + iy) * g.w..];
                    let d = &mut dst[oy * g.ow..(oy + 1) * g.ow];
                    if g.stride == 1 {
                        d.copy_from_slice(&src[kx..kx + g.ow]);
                    } else {
                        for (ox, v) in d.iter_mut().enumerate() {
                            *v = src[ox * g.stride + kx];
                        }
                    }
                }
            }
        }
    }
}

/// Adjoint of [`im2col`]: accumulates `cols` back into `gx`.
pub(crate) fn col2im<T: Real>(g: &ConvGeom, cols: &[T], gx: &mut [T]) {
    gx.iter_mut().for_each(|v| *v = T::ZERO);
    let n = g.col_cols();
    for c in 0..g.c {
        for ky in 0..g.k {
            for kx in 0..g.k {
                let row = (c * g.k + ky) * g.k + kx;
                let src = &cols[row * n..(row + 1) * n];
                for oy in 0..g.oh {
                    let iy = oy * g.stride + ky;
                    let base = (c * g.h + iy) * g.w + kx;
                    for ox in 0..g.ow {
                        gx[base + ox * g.stride] += src[oy * g.ow + ox];
                    }
                }
            }
        }
    }
}

pub(crate) fn conv_forward<T: Real>(g: &ConvGeom, w: &[T], b: &[T], cols: &[T], y: &mut [T]) {
    let n = g.col_cols();
    for (o, &bias) in b.iter().enumerate() {
        y[o * n..(o + 1) * n].iter_mut().for_each(|v| *v = bias);
    }
    T::gemm(g.o, g.col_rows(), n, w, false, cols, false, T::ONE, y);
}

#[allow(clippy::too_many_arguments)]
pub(crate) fn conv_backward<T: Real>(
    g: &ConvGeom,
    w: &[T],
    cols: &[T],
    gy: &[T],
    gw: &mut [T],
    gb: &mut [T],
    gcols: &mut [T],
    gx: &mut [T],
) {
    let n = g.col_cols();
    // gW += gy·colsᵀ
    T::gemm(g.o, n, g.col_rows(), gy, false, cols, true, T::ONE, gw);
    for (o, acc) in gb.iter_mut().enumerate() {
        let mut s = T::ZERO;
        for &v in &gy[o * n..(o + 1) * n] {
            s += v;
        }
        *acc += s;
    }
    // gcols = Wᵀ·gy
    T::gemm(g.col_rows(), g.o, n, w, true, gy, false, T::ZERO, gcols);
    col2im(g, gcols, gx);
}

/// Max pooling. Ties resolve to the first element in row-major window order.
pub(crate) fn maxpool_forward<T: Real>(
    shape: &[usize],
    size: usize,
    x: &[T],
    y: &mut [T],
    argmax: &mut [usize],
) {
    let (c, h, w) = (shape[0], shape[1], shape[2]);
    let (oh, ow) = (h / size, w / size);
    for ch in 0..c {
        for oy in 0..oh {
            for ox in 0..ow {
                let mut best = (ch * h + oy * size) * w + ox * size;
                for dy in 0..size {
                    for dx in 0..size {
                        let idx = (ch * h + oy * size + dy) * w + ox * size + dx;
                        if x[idx] > x[best] {
                            best = idx;
                        }
                    }
                }
                let o = (ch * oh + oy) * ow + ox;
                y[o] = x[best];
                argmax[o] = best;
            }
        }
    }
}
