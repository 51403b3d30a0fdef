//! Feed-forward layers. Spatial activations are `[width, height, channels]`
//! (x-major, channel-last), the same layout as a chunk tensor.

use rand::RngCore;
use serde::{Deserialize, Serialize};

use super::tensor::{axpy, dot, Tensor};
use super::NnError;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum LayerSpec {
    /// Stride 1, same padding (`(k-1)/2` before, the rest after).
    Conv2d { in_channels: usize, filters: usize, size: usize },
    Dense { inputs: usize, units: usize },
    LeakyRelu { slope: f64 },
    Reshape { shape: Vec<usize> },
    /// Fully connected map from `[w, h, cin]` to `[w, h, cout]` whose weight
    /// matrix is a per-cell block shared across cells plus a rank-`rank`
    /// global term. `rank == 0` keeps only the per-cell block.
    StructuredDense { width: usize, height: usize, in_channels: usize, out_channels: usize, rank: usize },
}

impl LayerSpec {
    pub fn name(&self) -> &'static str {
        match self {
            LayerSpec::Conv2d { .. } => "conv2d",
            LayerSpec::Dense { .. } => "dense",
            LayerSpec::LeakyRelu { .. } => "leaky_relu",
            LayerSpec::Reshape { .. } => "reshape",
            LayerSpec::StructuredDense { .. } => "structured_dense",
        }
    }

    /// Output shape for a given input shape.
    pub fn output_shape(&self, input: &[usize]) -> Result<Vec<usize>, NnError> {
        let n: usize = input.iter().product();
        let mismatch = |want: String| {
            Err(NnError::Shape(format!("{} expects {want}, got input {input:?}", self.name())))
        };
        match self {
            LayerSpec::Conv2d { in_channels, filters, size } => {
                if input.len() != 3 || input[2] != *in_channels || *size == 0 {
                    return mismatch(format!("[w, h, {in_channels}]"));
                }
                Ok(vec![input[0], input[1], *filters])
            }
            LayerSpec::Dense { inputs, units } => {
                if n != *inputs {
                    return mismatch(format!("{inputs} values"));
                }
                Ok(vec![*units])
            }
            LayerSpec::LeakyRelu { .. } => Ok(input.to_vec()),
            LayerSpec::Reshape { shape } => {
                if shape.iter().product::<usize>() != n {
                    return mismatch(format!("{} values", shape.iter().product::<usize>()));
                }
                Ok(shape.clone())
            }
            LayerSpec::StructuredDense { width, height, in_channels, out_channels, .. } => {
                if input != [*width, *height, *in_channels] {
                    return mismatch(format!("[{width}, {height}, {in_channels}]"));
                }
                Ok(vec![*width, *height, *out_channels])
            }
        }
    }

    /// Shapes of the parameter tensors, in storage order.
    pub fn param_shapes(&self) -> Vec<Vec<usize>> {
        match self {
            LayerSpec::Conv2d { in_channels, filters, size } => {
                vec![vec![*size, *size, *in_channels, *filters], vec![*filters]]
            }
            LayerSpec::Dense { inputs, units } => vec![vec![*inputs, *units], vec![*units]],
            LayerSpec::LeakyRelu { .. } | LayerSpec::Reshape { .. } => vec![],
            LayerSpec::StructuredDense { width, height, in_channels, out_channels, rank } => {
                let mut v = vec![vec![*in_channels, *out_channels], vec![*out_channels]];
                if *rank > 0 {
                    let cells = width * height;
                    v.push(vec![cells * in_channels, *rank]);
                    v.push(vec![*rank]);
                    v.push(vec![*rank, cells * out_channels]);
                    v.push(vec![cells * out_channels]);
                }
                v
            }
        }
    }

    /// Freshly initialized parameters: Glorot-uniform weights, zero biases.
    pub fn init_params(&self, rng: &mut dyn RngCore) -> Vec<Tensor> {
        let shapes = self.param_shapes();
        match self {
            LayerSpec::Conv2d { in_channels, filters, size } => vec![
                Tensor::glorot(&shapes[0], size * size * in_channels, size * size * filters, rng),
                Tensor::zeros(&shapes[1]),
            ],
            LayerSpec::Dense { inputs, units } => {
                vec![Tensor::glorot(&shapes[0], *inputs, *units, rng), Tensor::zeros(&shapes[1])]
            }
            LayerSpec::StructuredDense { width, height, in_channels, out_channels, rank } => {
                let mut v = vec![
                    Tensor::glorot(&shapes[0], *in_channels, *out_channels, rng),
                    Tensor::zeros(&shapes[1]),
                ];
                if *rank > 0 {
                    let cells = width * height;
                    v.push(Tensor::glorot(&shapes[2], cells * in_channels, *rank, rng));
                    v.push(Tensor::zeros(&shapes[3]));
                    v.push(Tensor::glorot(&shapes[4], *rank, cells * out_channels, rng));
                    v.push(Tensor::zeros(&shapes[5]));
                }
                v
            }
            LayerSpec::LeakyRelu { .. } | LayerSpec::Reshape { .. } => vec![],
        }
    }
}

/// Forward pass. Returns the output and any intermediate values the backward
/// pass needs.
pub fn layer_forward(
    spec: &LayerSpec,
    params: &[Tensor],
    in_shape: &[usize],
    input: &[f64],
) -> (Vec<f64>, Vec<f64>) {
    match spec {
        LayerSpec::Conv2d { in_channels, filters, size } => (
            conv2d_forward(in_shape[0], in_shape[1], *in_channels, *filters, *size, input, &params[0], &params[1]),
            Vec::new(),
        ),
        LayerSpec::Dense { inputs, units } => {
            (dense_forward(*inputs, *units, input, &params[0], &params[1]), Vec::new())
        }
        LayerSpec::LeakyRelu { slope } => (input.iter().map(|&x| leaky_relu(x, *slope)).collect(), Vec::new()),
        LayerSpec::Reshape { .. } => (input.to_vec(), Vec::new()),
        LayerSpec::StructuredDense { width, height, in_channels, out_channels, rank } => {
            let cells = width * height;
            let mut out = vec![0.0; cells * out_channels];
            for c in 0..cells {
                let o = &mut out[c * out_channels..(c + 1) * out_channels];
                o.copy_from_slice(params[1].data());
                let x = &input[c * in_channels..(c + 1) * in_channels];
                for (ci, &v) in x.iter().enumerate() {
                    if v != 0.0 {
                        axpy(v, &params[0].data()[ci * out_channels..(ci + 1) * out_channels], o);
                    }
                }
            }
            if *rank == 0 {
                return (out, Vec::new());
            }
            let z = dense_forward(cells * in_channels, *rank, input, &params[2], &params[3]);
            let g = dense_forward(*rank, cells * out_channels, &z, &params[4], &params[5]);
            axpy(1.0, &g, &mut out);
            (out, z)
        }
    }
}

/// Backward pass: accumulates parameter gradients into `grads` and returns
/// the gradient w.r.t. the input when `need_input` is set.
#[allow(clippy::too_many_arguments)]
pub fn layer_backward(
    spec: &LayerSpec,
    params: &[Tensor],
    in_shape: &[usize],
    input: &[f64],
    aux: &[f64],
    grad_out: &[f64],
    grads: &mut [Tensor],
    need_input: bool,
) -> Option<Vec<f64>> {
    match spec {
        LayerSpec::Conv2d { in_channels, filters, size } => {
            let (gw, gb) = grads.split_at_mut(1);
            conv2d_backward(
                in_shape[0],
                in_shape[1],
                *in_channels,
                *filters,
                *size,
                input,
                &params[0],
                grad_out,
                &mut gw[0],
                &mut gb[0],
                need_input,
            )
        }
        LayerSpec::Dense { inputs, units } => {
            let (gw, gb) = grads.split_at_mut(1);
            dense_backward(*inputs, *units, input, &params[0], grad_out, &mut gw[0], &mut gb[0], need_input)
        }
        LayerSpec::LeakyRelu { slope } => need_input.then(|| leaky_relu_backward(input, grad_out, *slope)),
        LayerSpec::Reshape { .. } => need_input.then(|| grad_out.to_vec()),
        LayerSpec::StructuredDense { width, height, in_channels, out_channels, rank } => {
            let (cin, cout) = (*in_channels, *out_channels);
            let cells = width * height;
            let mut din = if need_input { vec![0.0; cells * cin] } else { Vec::new() };
            {
                let (gw, rest) = grads.split_at_mut(1);
                let gw = gw[0].data_mut();
                let gb = rest[0].data_mut();
                let w = params[0].data();
                for c in 0..cells {
                    let g = &grad_out[c * cout..(c + 1) * cout];
                    axpy(1.0, g, gb);
                    let x = &input[c * cin..(c + 1) * cin];
                    for (ci, &v) in x.iter().enumerate() {
                        if v != 0.0 {
                            axpy(v, g, &mut gw[ci * cout..(ci + 1) * cout]);
                        }
                        if need_input {
                            din[c * cin + ci] = dot(&w[ci * cout..(ci + 1) * cout], g);
                        }
                    }
                }
            }
            if *rank > 0 {
                let (lo, hi) = grads.split_at_mut(4);
                let (gu, gub) = hi.split_at_mut(1);
                let gz = dense_backward(*rank, cells * cout, aux, &params[4], grad_out, &mut gu[0], &mut gub[0], true)
                    .expect("requested");
                let (_, vpart) = lo.split_at_mut(2);
                let (gv, gvb) = vpart.split_at_mut(1);
                let gin = dense_backward(cells * cin, *rank, input, &params[2], &gz, &mut gv[0], &mut gvb[0], need_input);
                if let Some(gin) = gin {
                    axpy(1.0, &gin, &mut din);
                }
            }
            need_input.then_some(din)
        }
    }
}

#[inline]
pub fn leaky_relu(x: f64, slope: f64) -> f64 {
    if x >= 0.0 {
        x
    } else {
        slope * x
    }
}

pub fn leaky_relu_backward(input: &[f64], grad_out: &[f64], slope: f64) -> Vec<f64> {
    input.iter().zip(grad_out).map(|(&x, &g)| if x >= 0.0 { g } else { slope * g }).collect()
}

/// Same-padded, stride-1 convolution. Weights are `[k, k, cin, cout]`.
#[allow(clippy::too_many_arguments)]
pub fn conv2d_forward(
    w: usize,
    h: usize,
    cin: usize,
    cout: usize,
    k: usize,
    input: &[f64],
    weight: &Tensor,
    bias: &Tensor,
) -> Vec<f64> {
    let pad = (k - 1) / 2;
    let wd = weight.data();
    let mut out = vec![0.0; w * h * cout];
    for x in 0..w {
        for y in 0..h {
            let o = &mut out[(x * h + y) * cout..(x * h + y + 1) * cout];
            o.copy_from_slice(bias.data());
            for kx in 0..k {
                let ix = x as isize + kx as isize - pad as isize;
                if ix < 0 || ix >= w as isize {
                    continue;
                }
                for ky in 0..k {
                    let iy = y as isize + ky as isize - pad as isize;
                    if iy < 0 || iy >= h as isize {
                        continue;
                    }
                    let base = (ix as usize * h + iy as usize) * cin;
                    let wbase = (kx * k + ky) * cin;
                    for ci in 0..cin {
                        let v = input[base + ci];
                        if v != 0.0 {
                            let row = (wbase + ci) * cout;
                            axpy(v, &wd[row..row + cout], o);
                        }
                    }
                }
            }
        }
    }
    out
}

#[allow(clippy::too_many_arguments)]
pub fn conv2d_backward(
    w: usize,
    h: usize,
    cin: usize,
    cout: usize,
    k: usize,
    input: &[f64],
    weight: &Tensor,
    grad_out: &[f64],
    grad_weight: &mut Tensor,
    grad_bias: &mut Tensor,
    need_input: bool,
) -> Option<Vec<f64>> {
    let pad = (k - 1) / 2;
    let wd = weight.data();
    let gw = grad_weight.data_mut();
    let gb = grad_bias.data_mut();
    let mut din = if need_input { vec![0.0; w * h * cin] } else { Vec::new() };
    for x in 0..w {
        for y in 0..h {
            let g = &grad_out[(x * h + y) * cout..(x * h + y + 1) * cout];
            axpy(1.0, g, gb);
            for kx in 0..k {
                let ix = x as isize + kx as isize - pad as isize;
                if ix < 0 || ix >= w as isize {
                    continue;
                }
                for ky in 0..k {
                    let iy = y as isize + ky as isize - pad as isize;
                    if iy < 0 || iy >= h as isize {
                        continue;
                    }
                    let base = (ix as usize * h + iy as usize) * cin;
                    let wbase = (kx * k + ky) * cin;
                    for ci in 0..cin {
                        let row = (wbase + ci) * cout;
                        let v = input[base + ci];
                        if v != 0.0 {
                            axpy(v, g, &mut gw[row..row + cout]);
                        }
                        if need_input {
                            din[base + ci] += dot(&wd[row..row + cout], g);
                        }
                    }
                }
            }
        }
    }
    need_input.then_some(din)
}

/// `out = bias + input · weight`, weight `[inputs, units]`.
pub fn dense_forward(inputs: usize, units: usize, input: &[f64], weight: &Tensor, bias: &Tensor) -> Vec<f64> {
    let wd = weight.data();
    let mut out = bias.data().to_vec();
    for (i, &v) in input.iter().enumerate().take(inputs) {
        if v != 0.0 {
            axpy(v, &wd[i * units..(i + 1) * units], &mut out);
        }
    }
    out
}

#[allow(clippy::too_many_arguments)]
pub fn dense_backward(
    inputs: usize,
    units: usize,
    input: &[f64],
    weight: &Tensor,
    grad_out: &[f64],
    grad_weight: &mut Tensor,
    grad_bias: &mut Tensor,
    need_input: bool,
) -> Option<Vec<f64>> {
    axpy(1.0, grad_out, grad_bias.data_mut());
    let wd = weight.data();
    let gw = grad_weight.data_mut();
    for (i, &v) in input.iter().enumerate().take(inputs) {
        if v != 0.0 {
            axpy(v, grad_out, &mut gw[i * units..(i + 1) * units]);
        }
    }
    need_input.then(|| (0..inputs).map(|i| dot(&wd[i * units..(i + 1) * units], grad_out)).collect())
}
