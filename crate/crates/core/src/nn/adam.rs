use serde::{Deserialize, Serialize};

use super::{NnError, Tensor};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        AdamConfig { lr: 1e-3, beta1: 0.9, beta2: 0.999, eps: 1e-8 }
    }
}

/// Adam with bias correction. Moments are allocated lazily on the first step
/// so they always mirror the parameter shapes they are applied to.
#[derive(Clone, Debug, PartialEq)]
pub struct Adam {
    pub config: AdamConfig,
    step: u64,
    m: Vec<Tensor>,
    v: Vec<Tensor>,
}

impl Adam {
    pub fn new(config: AdamConfig) -> Self {
        Adam { config, step: 0, m: Vec::new(), v: Vec::new() }
    }

    pub fn steps(&self) -> u64 {
        self.step
    }

    pub fn first_moments(&self) -> &[Tensor] {
        &self.m
    }

    pub fn second_moments(&self) -> &[Tensor] {
        &self.v
    }

    pub fn reset(&mut self) {
        self.step = 0;
        self.m.clear();
        self.v.clear();
    }

    pub fn step(&mut self, params: &mut [Tensor], grads: &[Tensor]) -> Result<(), NnError> {
        if params.len() != grads.len() || params.iter().zip(grads).any(|(p, g)| !p.same_shape(g)) {
            return Err(NnError::Shape("adam: gradients do not mirror parameters".into()));
        }
        if let Some(i) = grads.iter().position(|g| !g.is_finite()) {
            return Err(NnError::Numeric(format!("adam: non-finite gradient in parameter tensor {i}")));
        }
        if self.m.is_empty() {
            self.m = params.iter().map(|p| Tensor::zeros(p.shape())).collect();
            self.v = self.m.clone();
        } else if self.m.len() != params.len() || self.m.iter().zip(params.iter()).any(|(m, p)| !m.same_shape(p)) {
            return Err(NnError::Shape("adam: state was built for different parameters".into()));
        }
        self.step += 1;
        let AdamConfig { lr, beta1, beta2, eps } = self.config;
        let c1 = 1.0 - beta1.powi(self.step as i32);
        let c2 = 1.0 - beta2.powi(self.step as i32);
        for ((p, g), (m, v)) in params.iter_mut().zip(grads).zip(self.m.iter_mut().zip(self.v.iter_mut())) {
            let p = p.data_mut();
            let (m, v) = (m.data_mut(), v.data_mut());
            for (i, &gi) in g.data().iter().enumerate() {
                m[i] = beta1 * m[i] + (1.0 - beta1) * gi;
                v[i] = beta2 * v[i] + (1.0 - beta2) * gi * gi;
                let mh = m[i] / c1;
                let vh = v[i] / c2;
                p[i] -= lr * mh / (vh.sqrt() + eps);
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params() -> Vec<Tensor> {
        vec![Tensor::from_vec(&[3], vec![0.5, -1.0, 2.0]).unwrap()]
    }

    #[test]
    fn zero_gradient_leaves_params() {
        let mut p = params();
        let mut adam = Adam::new(AdamConfig::default());
        adam.step(&mut p, &[Tensor::zeros(&[3])]).unwrap();
        assert_eq!(p, params());
    }

    #[test]
    fn first_step_is_lr_times_sign() {
        let mut p = params();
        let g = Tensor::from_vec(&[3], vec![0.3, -20.0, 1e-3]).unwrap();
        let mut adam = Adam::new(AdamConfig::default());
        adam.step(&mut p, std::slice::from_ref(&g)).unwrap();
        for ((after, before), gi) in p[0].data().iter().zip(params()[0].data()).zip(g.data()) {
            // closed form: m̂ = g, v̂ = g², Δ = -lr g / (|g| + ε)
            let expected = -1e-3 * gi / (gi.abs() + 1e-8);
            assert!((after - before - expected).abs() < 1e-12);
            assert!(((after - before) + 1e-3 * gi.signum()).abs() < 1e-7);
        }
    }

    #[test]
    fn deterministic_and_rejects_nan() {
        let g = Tensor::from_vec(&[3], vec![0.1, 0.2, -0.3]).unwrap();
        let run = || {
            let mut p = params();
            let mut adam = Adam::new(AdamConfig::default());
            adam.step(&mut p, std::slice::from_ref(&g)).unwrap();
            adam.step(&mut p, std::slice::from_ref(&g)).unwrap();
            p
        };
        assert_eq!(run(), run());
        let mut p = params();
        let mut adam = Adam::new(AdamConfig::default());
        let bad = Tensor::from_vec(&[3], vec![0.1, f64::NAN, 0.0]).unwrap();
        assert!(matches!(adam.step(&mut p, &[bad]), Err(NnError::Numeric(_))));
        assert_eq!(p, params());
        assert_eq!(adam.steps(), 0);
    }
}
