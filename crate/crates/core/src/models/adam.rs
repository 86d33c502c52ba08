use crate::scalar::Scalar;

use super::config::AdamConfig;

/// Adam over a fixed list of parameter tensors. Moments are allocated on the
/// first step; the tensor list must keep the same shapes afterwards.
#[derive(Clone, Debug)]
pub struct Adam<F> {
    lr: F,
    beta1: F,
    beta2: F,
    epsilon: F,
    t: i32,
    m: Vec<F>,
    v: Vec<F>,
}

impl<F: Scalar> Adam<F> {
    pub fn new(learning_rate: f64, config: &AdamConfig) -> Self {
        Self {
            lr: F::lit(learning_rate),
            beta1: F::lit(config.beta1),
            beta2: F::lit(config.beta2),
            epsilon: F::lit(config.epsilon),
            t: 0,
            m: Vec::new(),
            v: Vec::new(),
        }
    }

    /// One update. With `ascend` the step climbs the objective instead of
    /// descending it.
    pub fn step(&mut self, params: Vec<&mut [F]>, grads: Vec<&[F]>, ascend: bool) {
        assert_eq!(params.len(), grads.len());
        let total: usize = grads.iter().map(|g| g.len()).sum();
        if self.m.is_empty() {
            self.m = vec![F::zero(); total];
            self.v = vec![F::zero(); total];
        }
        assert_eq!(self.m.len(), total, "tensor list changed shape");
        self.t += 1;
        let one = F::one();
        let c1 = one - self.beta1.powi(self.t);
        let c2 = one - self.beta2.powi(self.t);
        let sign = if ascend { -one } else { one };
        let mut k = 0;
        for (p, g) in params.into_iter().zip(grads) {
            assert_eq!(p.len(), g.len());
            for (theta, &grad) in p.iter_mut().zip(g) {
                let grad = sign * grad;
                let m = self.beta1 * self.m[k] + (one - self.beta1) * grad;
                let v = self.beta2 * self.v[k] + (one - self.beta2) * grad * grad;
                self.m[k] = m;
                self.v[k] = v;
                *theta -= self.lr * (m / c1) / ((v / c2).sqrt() + self.epsilon);
                k += 1;
            }
        }
    }
}
