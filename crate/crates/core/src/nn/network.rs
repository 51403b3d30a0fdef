use std::ops::Range;

use rand::RngCore;

use super::gradcheck::Objective;
use super::layers::{layer_backward, layer_forward, LayerSpec};
use super::loss::mse_loss;
use super::{NnError, Tensor};

/// A feed-forward stack of layers over a fixed input shape. Parameters are
/// stored flat so optimizers and containers can treat them uniformly.
#[derive(Clone, Debug, PartialEq)]
pub struct Network {
    input_shape: Vec<usize>,
    specs: Vec<LayerSpec>,
    shapes: Vec<Vec<usize>>,
    ranges: Vec<Range<usize>>,
    params: Vec<Tensor>,
}

/// Activations of one forward pass. `acts[0]` is the input.
#[derive(Clone, Debug)]
pub struct Trace {
    pub acts: Vec<Vec<f64>>,
    aux: Vec<Vec<f64>>,
}

impl Trace {
    pub fn output(&self) -> &[f64] {
        self.acts.last().expect("trace holds the input")
    }
}

impl Network {
    pub fn new(input_shape: &[usize], specs: Vec<LayerSpec>, rng: &mut dyn RngCore) -> Result<Self, NnError> {
        let params = specs.iter().flat_map(|s| s.init_params(rng)).collect();
        Self::from_params(input_shape, specs, params)
    }

    pub fn from_params(input_shape: &[usize], specs: Vec<LayerSpec>, params: Vec<Tensor>) -> Result<Self, NnError> {
        let mut shapes = vec![input_shape.to_vec()];
        let mut ranges = Vec::with_capacity(specs.len());
        let mut at = 0;
        for (i, spec) in specs.iter().enumerate() {
            let next = spec
                .output_shape(shapes.last().unwrap())
                .map_err(|e| NnError::Shape(format!("layer {i}: {e}")))?;
            shapes.push(next);
            let wanted = spec.param_shapes();
            let end = at + wanted.len();
            let got = params.get(at..end).ok_or_else(|| NnError::Shape(format!("layer {i} ({}): missing parameters", spec.name())))?;
            for (w, p) in wanted.iter().zip(got) {
                if p.shape() != w.as_slice() {
                    return Err(NnError::Shape(format!(
                        "layer {i} ({}): parameter shape {:?}, expected {w:?}",
                        spec.name(),
                        p.shape()
                    )));
                }
            }
            ranges.push(at..end);
            at = end;
        }
        if at != params.len() {
            return Err(NnError::Shape(format!("{} parameter tensors left over", params.len() - at)));
        }
        Ok(Network { input_shape: input_shape.to_vec(), specs, shapes, ranges, params })
    }

    pub fn input_shape(&self) -> &[usize] {
        &self.input_shape
    }

    pub fn output_shape(&self) -> &[usize] {
        self.shapes.last().unwrap()
    }

    pub fn specs(&self) -> &[LayerSpec] {
        &self.specs
    }

    pub fn params(&self) -> &[Tensor] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [Tensor] {
        &mut self.params
    }

    pub fn param_count(&self) -> usize {
        self.params.iter().map(Tensor::len).sum()
    }

    pub fn zero_grads(&self) -> Vec<Tensor> {
        self.params.iter().map(|p| Tensor::zeros(p.shape())).collect()
    }

    fn check_input(&self, input: &[f64]) -> Result<(), NnError> {
        let n: usize = self.input_shape.iter().product();
        if input.len() != n {
            return Err(NnError::Shape(format!("network input has {} values, expected {n}", input.len())));
        }
        Ok(())
    }

    pub fn forward(&self, input: &[f64]) -> Result<Vec<f64>, NnError> {
        self.check_input(input)?;
        let mut x = input.to_vec();
        for (i, spec) in self.specs.iter().enumerate() {
            x = layer_forward(spec, &self.params[self.ranges[i].clone()], &self.shapes[i], &x).0;
        }
        Ok(x)
    }

    pub fn forward_trace(&self, input: &[f64]) -> Result<Trace, NnError> {
        self.check_input(input)?;
        let mut acts = vec![input.to_vec()];
        let mut aux = Vec::with_capacity(self.specs.len());
        for (i, spec) in self.specs.iter().enumerate() {
            let (out, a) = layer_forward(spec, &self.params[self.ranges[i].clone()], &self.shapes[i], &acts[i]);
            acts.push(out);
            aux.push(a);
        }
        Ok(Trace { acts, aux })
    }

    /// Accumulates parameter gradients for one example into `grads`.
    pub fn backward(&self, trace: &Trace, grad_out: &[f64], grads: &mut [Tensor]) {
        let mut g = grad_out.to_vec();
        for i in (0..self.specs.len()).rev() {
            let r = self.ranges[i].clone();
            let next = layer_backward(
                &self.specs[i],
                &self.params[r.clone()],
                &self.shapes[i],
                &trace.acts[i],
                &trace.aux[i],
                &g,
                &mut grads[r],
                i > 0,
            );
            match next {
                Some(n) => g = n,
                None => break,
            }
        }
    }

    /// Mean MSE over a batch and the averaged parameter gradients. Examples
    /// are processed in order so the reduction is deterministic.
    pub fn batch_gradient(&self, batch: &[(&[f64], &[f64])]) -> Result<(f64, Vec<Tensor>), NnError> {
        if batch.is_empty() {
            return Err(NnError::Empty("batch".into()));
        }
        let mut grads = self.zero_grads();
        let mut total = 0.0;
        for (input, target) in batch {
            let trace = self.forward_trace(input)?;
            let (loss, g) = mse_loss(trace.output(), target)?;
            total += loss;
            self.backward(&trace, &g, &mut grads);
        }
        let k = batch.len() as f64;
        grads.iter_mut().for_each(|g| g.scale(1.0 / k));
        Ok((total / k, grads))
    }
}

/// MSE of a network on a fixed batch, for gradient checking.
pub struct NetworkObjective<'a> {
    pub net: Network,
    pub batch: Vec<(&'a [f64], &'a [f64])>,
}

impl Objective for NetworkObjective<'_> {
    fn params_mut(&mut self) -> &mut [Tensor] {
        self.net.params_mut()
    }

    fn loss(&self) -> f64 {
        self.batch_loss()
    }

    fn gradient(&self) -> Vec<Tensor> {
        self.net.batch_gradient(&self.batch).expect("objective batch is valid").1
    }

    fn kink_pattern(&self) -> Option<Vec<bool>> {
        let mut bits = Vec::new();
        for (input, _) in &self.batch {
            let trace = self.net.forward_trace(input).expect("objective batch is valid");
            for (i, spec) in self.net.specs().iter().enumerate() {
                if matches!(spec, LayerSpec::LeakyRelu { .. }) {
                    bits.extend(trace.acts[i].iter().map(|&x| x >= 0.0));
                }
            }
        }
        Some(bits)
    }
}

impl NetworkObjective<'_> {
    fn batch_loss(&self) -> f64 {
        let mut total = 0.0;
        for (input, target) in &self.batch {
            let out = self.net.forward(input).expect("objective batch is valid");
            total += mse_loss(&out, target).expect("objective batch is valid").0;
        }
        total / self.batch.len() as f64
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::{grad_check, GradCheckOptions};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random(n: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
        (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect()
    }

    fn check(specs: Vec<LayerSpec>, input_shape: &[usize], seed: u64) -> f64 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let net = Network::new(input_shape, specs, &mut rng).unwrap();
        // nudge biases off zero so every bias gradient path is exercised
        let mut net = net;
        for p in net.params_mut() {
            if p.shape().len() == 1 {
                let n = p.len();
                p.data_mut().copy_from_slice(&random(n, &mut rng));
            }
        }
        let n_in: usize = input_shape.iter().product();
        let n_out: usize = net.output_shape().iter().product();
        let input = random(n_in, &mut rng);
        let target = random(n_out, &mut rng);
        let mut obj = NetworkObjective { net, batch: vec![(&input, &target)] };
        grad_check(&mut obj, &GradCheckOptions::default(), &mut rng)
    }

    #[test]
    fn conv_backward_matches_finite_differences() {
        for seed in 0..3 {
            let specs = vec![
                LayerSpec::Conv2d { in_channels: 2, filters: 3, size: 3 },
                LayerSpec::Conv2d { in_channels: 3, filters: 2, size: 4 },
            ];
            let err = check(specs, &[4, 4, 2], seed);
            assert!(err < 1e-5, "seed {seed}: {err}");
        }
    }

    #[test]
    fn dense_backward_matches_finite_differences() {
        for seed in 0..3 {
            let specs = vec![LayerSpec::Dense { inputs: 12, units: 7 }, LayerSpec::Dense { inputs: 7, units: 5 }];
            let err = check(specs, &[3, 4], seed);
            assert!(err < 1e-5, "seed {seed}: {err}");
        }
    }

    #[test]
    fn two_layer_toy_net_with_activation() {
        for seed in 10..13 {
            let specs = vec![
                LayerSpec::Dense { inputs: 6, units: 8 },
                LayerSpec::LeakyRelu { slope: 0.01 },
                LayerSpec::Dense { inputs: 8, units: 3 },
            ];
            assert!(check(specs, &[6], seed) < 1e-3);
        }
    }

    #[test]
    fn linear_model_is_tight() {
        assert!(check(vec![LayerSpec::Dense { inputs: 4, units: 2 }], &[4], 7) < 1e-7);
    }

    #[test]
    fn structured_dense_backward() {
        for rank in [0, 3] {
            let specs = vec![
                LayerSpec::Conv2d { in_channels: 2, filters: 3, size: 3 },
                LayerSpec::LeakyRelu { slope: 0.01 },
                LayerSpec::StructuredDense { width: 5, height: 4, in_channels: 3, out_channels: 2, rank },
            ];
            let err = check(specs, &[5, 4, 2], 3);
            assert!(err < 1e-5, "rank {rank}: {err}");
        }
    }

    #[test]
    fn shape_errors_name_the_layer() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let specs = vec![
            LayerSpec::Conv2d { in_channels: 2, filters: 3, size: 3 },
            LayerSpec::Conv2d { in_channels: 4, filters: 1, size: 3 },
        ];
        let err = Network::new(&[4, 4, 2], specs, &mut rng).unwrap_err().to_string();
        assert!(err.contains("layer 1") && err.contains("conv2d"), "{err}");
    }

    #[test]
    fn same_padding_preserves_spatial_shape() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        for k in 1..=5 {
            let net = Network::new(&[7, 5, 1], vec![LayerSpec::Conv2d { in_channels: 1, filters: 2, size: k }], &mut rng)
                .unwrap();
            assert_eq!(net.output_shape(), &[7, 5, 2]);
            assert_eq!(net.forward(&[0.5; 35]).unwrap().len(), 70);
        }
    }
}
