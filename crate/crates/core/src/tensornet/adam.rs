use super::{Real, Tensor, TensorError};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        AdamConfig {
            lr: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

/// Adam moments for one parameter list.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState<T = f32> {
    pub config: AdamConfig,
    pub step: u64,
    pub m: Vec<Tensor<T>>,
    pub v: Vec<Tensor<T>>,
}

impl<T: Real> AdamState<T> {
    pub fn new(params: &[Tensor<T>], config: AdamConfig) -> Self {
        AdamState {
            config,
            step: 0,
            m: params.iter().map(|p| Tensor::zeros(p.shape())).collect(),
            v: params.iter().map(|p| Tensor::zeros(p.shape())).collect(),
        }
    }

    /// One bias-corrected Adam update of `params` in place. Rejects the whole
    /// step, leaving all state untouched, if any gradient is non-finite.
    pub fn step(&mut self, params: &mut [Tensor<T>], grads: &[Tensor<T>]) -> Result<(), TensorError> {
        if params.len() != self.m.len() || grads.len() != self.m.len() {
            return Err(TensorError::TensorCount {
                expected: self.m.len(),
                actual: params.len().min(grads.len()),
            });
        }
        for (i, (p, g)) in params.iter().zip(grads).enumerate() {
            if p.shape() != self.m[i].shape() || g.shape() != self.m[i].shape() {
                return Err(TensorError::ParamShape {
                    tensor: i,
                    expected: self.m[i].shape().to_vec(),
                    actual: g.shape().to_vec(),
                });
            }
            if !g.all_finite() {
                return Err(TensorError::NonFinite { tensor: i });
            }
        }
        self.step += 1;
        let AdamConfig { lr, beta1, beta2, eps } = self.config;
        let t = self.step as i32;
        let c1 = 1.0 - beta1.powi(t);
        let c2 = 1.0 - beta2.powi(t);
        let (b1, b2) = (T::from_f64(beta1), T::from_f64(beta2));
        let (ob1, ob2) = (T::from_f64(1.0 - beta1), T::from_f64(1.0 - beta2));
        let step_size = T::from_f64(lr / c1);
        let c2_sqrt = T::from_f64(c2.sqrt());
        let eps = T::from_f64(eps);
        for (i, p) in params.iter_mut().enumerate() {
            let g = grads[i].data();
            let m = self.m[i].data_mut();
            let v = self.v[i].data_mut();
            let pd = p.data_mut();
            for j in 0..pd.len() {
                m[j] = b1 * m[j] + ob1 * g[j];
                v[j] = b2 * v[j] + ob2 * g[j] * g[j];
                // lr·m̂/(√v̂ + ε) with m̂ = m/c1, v̂ = v/c2
                pd[j] -= step_size * m[j] / (v[j].sqrt() / c2_sqrt + eps);
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn scalar(v: f64) -> Vec<Tensor<f64>> {
        vec![Tensor::vector(vec![v])]
    }

    #[test]
    fn zero_gradient_on_fresh_state_leaves_params() {
        let mut p = scalar(1.5);
        let mut adam = AdamState::new(&p, AdamConfig::default());
        adam.step(&mut p, &scalar(0.0)).unwrap();
        assert_eq!(p[0].data()[0], 1.5);
        assert_eq!(adam.m[0].data()[0], 0.0);
        assert_eq!(adam.step, 1);
    }

    #[test]
    fn zero_gradient_decays_moments() {
        let mut p = scalar(0.0);
        let mut adam = AdamState::new(&p, AdamConfig::default());
        adam.step(&mut p, &scalar(2.0)).unwrap();
        let (m, v) = (adam.m[0].data()[0], adam.v[0].data()[0]);
        adam.step(&mut p, &scalar(0.0)).unwrap();
        assert!((adam.m[0].data()[0] - 0.9 * m).abs() < 1e-15);
        assert!((adam.v[0].data()[0] - 0.999 * v).abs() < 1e-15);
    }

    #[test]
    fn first_step_is_lr_times_sign() {
        for g in [3.0f64, -0.25, 1e-3] {
            let mut p = scalar(0.0);
            let mut adam = AdamState::new(&p, AdamConfig::default());
            adam.step(&mut p, &scalar(g)).unwrap();
            let expected = -1e-3 * g / (g.abs() + 1e-8);
            assert!((p[0].data()[0] - expected).abs() < 1e-12, "g={g}");
        }
    }

    #[test]
    fn constant_gradient_moves_lr_per_step() {
        // Scalar simulation oracle: with constant g, m̂ = g and v̂ = g² at every
        // step, so each update is lr·g/(|g|+ε).
        let g = 0.7f64;
        let mut expected = 0.0f64;
        for _ in 0..200 {
            expected -= 1e-3 * g / (g.abs() + 1e-8);
        }
        let mut p = scalar(0.0);
        let mut adam = AdamState::new(&p, AdamConfig::default());
        for _ in 0..200 {
            adam.step(&mut p, &scalar(g)).unwrap();
        }
        assert!((p[0].data()[0] - expected).abs() < 1e-9);
    }

    #[test]
    fn non_finite_gradient_is_rejected() {
        let mut p = vec![Tensor::vector(vec![1.0f32]), Tensor::vector(vec![2.0f32])];
        let mut adam = AdamState::new(&p, AdamConfig::default());
        let grads = vec![Tensor::vector(vec![0.1f32]), Tensor::vector(vec![f32::NAN])];
        assert_eq!(adam.step(&mut p, &grads), Err(TensorError::NonFinite { tensor: 1 }));
        assert_eq!(adam.step, 0);
        assert_eq!(p[0].data()[0], 1.0);
    }
}
