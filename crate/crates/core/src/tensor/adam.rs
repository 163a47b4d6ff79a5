use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tensor::{Matrix, Real};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    /// L2 penalty added to the gradient of parameters flagged for decay.
    pub weight_decay: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            learning_rate: 0.01,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            weight_decay: 5e-4,
        }
    }
}

/// Bias-corrected Adam moments for a fixed list of parameters.
#[derive(Debug, Clone)]
pub struct AdamState<T: Real> {
    config: AdamConfig,
    m: Vec<Matrix<T>>,
    v: Vec<Matrix<T>>,
    t: u64,
}

impl<T: Real> AdamState<T> {
    pub fn new(config: AdamConfig, shapes: impl IntoIterator<Item = (usize, usize)>) -> Self {
        let (m, v) = shapes
            .into_iter()
            .map(|(r, c)| (Matrix::zeros(r, c), Matrix::zeros(r, c)))
            .unzip();
        Self { config, m, v, t: 0 }
    }

    pub fn config(&self) -> &AdamConfig {
        &self.config
    }

    pub fn steps(&self) -> u64 {
        self.t
    }

    /// One in-place update. `decay[k]` selects which parameters receive the
    /// weight-decay term.
    pub fn step(&mut self, params: &mut [&mut Matrix<T>], grads: &[&Matrix<T>], decay: &[bool]) -> Result<()> {
        if params.len() != self.m.len() || grads.len() != self.m.len() || decay.len() != self.m.len() {
            return Err(Error::InvalidArgument(format!(
                "adam state tracks {} parameters, got {} params / {} grads / {} decay flags",
                self.m.len(),
                params.len(),
                grads.len(),
                decay.len()
            )));
        }
        self.t += 1;
        let c = self.config;
        let (b1, b2) = (T::from_f64(c.beta1), T::from_f64(c.beta2));
        let bias1 = T::one() - T::from_f64(c.beta1.powf(self.t as f64));
        let bias2 = T::one() - T::from_f64(c.beta2.powf(self.t as f64));
        let lr = T::from_f64(c.learning_rate);
        let eps = T::from_f64(c.eps);
        let wd = T::from_f64(c.weight_decay);

        for k in 0..self.m.len() {
            let p = &mut *params[k];
            let g = grads[k];
            if p.shape() != g.shape() || p.shape() != self.m[k].shape() {
                return Err(Error::shape("adam_step", p.shape(), g.shape()));
            }
            let decayed = decay[k] && c.weight_decay != 0.0;
            let (m, v) = (self.m[k].as_mut_slice(), self.v[k].as_mut_slice());
            for (((w, &gi), mi), vi) in p.as_mut_slice().iter_mut().zip(g.as_slice()).zip(m).zip(v) {
                let gi = if decayed { gi + wd * *w } else { gi };
                *mi = b1 * *mi + (T::one() - b1) * gi;
                *vi = b2 * *vi + (T::one() - b2) * gi * gi;
                let m_hat = *mi / bias1;
                let v_hat = *vi / bias2;
                *w -= lr * m_hat / (v_hat.sqrt() + eps);
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(lr: f64) -> AdamConfig {
        AdamConfig {
            learning_rate: lr,
            weight_decay: 0.0,
            ..AdamConfig::default()
        }
    }

    #[test]
    fn first_step_is_lr_times_sign() {
        let mut s = AdamState::<f64>::new(cfg(0.1), [(1, 1)]);
        let mut w = Matrix::zeros(1, 1);
        let g = Matrix::filled(1, 1, 1.0);
        s.step(&mut [&mut w], &[&g], &[true]).unwrap();
        assert!((w.get(0, 0) + 0.1 / (1.0 + 1e-8)).abs() < 1e-15);
        assert_eq!(s.steps(), 1);
    }

    #[test]
    fn zero_gradient_leaves_parameter() {
        let mut s = AdamState::<f64>::new(cfg(0.1), [(2, 2)]);
        let mut w = Matrix::filled(2, 2, 0.7);
        let before = w.clone();
        s.step(&mut [&mut w], &[&Matrix::zeros(2, 2)], &[true]).unwrap();
        assert_eq!(w, before);
    }

    #[test]
    fn minimizes_a_quadratic() {
        let mut s = AdamState::<f64>::new(cfg(0.1), [(1, 1)]);
        let mut w = Matrix::zeros(1, 1);
        for _ in 0..100 {
            let g = Matrix::filled(1, 1, 2.0 * (w.get(0, 0) - 3.0));
            s.step(&mut [&mut w], &[&g], &[false]).unwrap();
        }
        assert!((w.get(0, 0) - 3.0).abs() < 0.5, "w = {}", w.get(0, 0));
    }

    #[test]
    fn step_counter_strictly_increases() {
        let mut s = AdamState::<f32>::new(cfg(0.01), [(1, 3)]);
        let mut w = Matrix::zeros(1, 3);
        let g = Matrix::filled(1, 3, 0.5);
        for expected in 1..=5 {
            s.step(&mut [&mut w], &[&g], &[false]).unwrap();
            assert_eq!(s.steps(), expected);
        }
    }
}
