//! Adam optimizer over the flat parameter vector of a [`ParamStore`].

use super::{GradStore, ParamStore};

#[derive(Debug, Clone)]
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

#[derive(Debug, Clone)]
pub struct Adam {
    pub config: AdamConfig,
    m: Vec<f64>,
    v: Vec<f64>,
    t: u64,
}

impl Adam {
    pub fn new(params: &ParamStore, config: AdamConfig) -> Self {
        let n = params.num_scalars();
        Adam { config, m: vec![0.0; n], v: vec![0.0; n], t: 0 }
    }

    /// Apply one update for minimizing the objective whose gradient is `grads`.
    pub fn step(&mut self, params: &mut ParamStore, grads: &GradStore) {
        self.t += 1;
        let g = grads.to_flat();
        assert_eq!(g.len(), self.m.len());
        let mut flat = params.to_flat();
        let b1t = 1.0 - self.config.beta1.powi(self.t as i32);
        let b2t = 1.0 - self.config.beta2.powi(self.t as i32);
        for i in 0..flat.len() {
            self.m[i] = self.config.beta1 * self.m[i] + (1.0 - self.config.beta1) * g[i];
            self.v[i] = self.config.beta2 * self.v[i] + (1.0 - self.config.beta2) * g[i] * g[i];
            let mhat = self.m[i] / b1t;
            let vhat = self.v[i] / b2t;
            flat[i] -= self.config.lr * mhat / (vhat.sqrt() + self.config.eps);
        }
        params.load_flat(&flat);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::{GradStore, Tape, Tensor};

    #[test]
    fn adam_minimizes_quadratic() {
        // minimize (x - 3)^2 + (y + 1)^2
        let mut params = ParamStore::new();
        params.add("p", Tensor::from_vec(1, 2, vec![0.0, 0.0]));
        let mut adam = Adam::new(&params, AdamConfig { lr: 0.05, ..Default::default() });
        for _ in 0..2000 {
            let mut grads = GradStore::zeros_like(&params);
            let mut tape = Tape::new(&params);
            let p = tape.param("p");
            let target = tape.constant(Tensor::from_vec(1, 2, vec![3.0, -1.0]));
            let neg = tape.scale(target, -1.0);
            let d = tape.add(p, neg);
            let sq = tape.mul(d, d);
            let loss = tape.sum(sq);
            tape.backward(loss, 1.0, &mut grads);
            adam.step(&mut params, &grads);
        }
        let p = params.get("p");
        assert!((p.data[0] - 3.0).abs() < 1e-4, "{}", p.data[0]);
        assert!((p.data[1] + 1.0).abs() < 1e-4, "{}", p.data[1]);
    }
}
