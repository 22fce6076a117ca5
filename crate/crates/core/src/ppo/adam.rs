use crate::scalar::Scalar;

/// Adam with bias correction over a flat parameter vector.
#[derive(Debug, Clone, PartialEq)]
pub struct Adam<T> {
    pub lr: T,
    pub beta1: T,
    pub beta2: T,
    pub eps: T,
    step: i32,
    m: Vec<T>,
    v: Vec<T>,
}

impl<T: Scalar> Adam<T> {
    pub fn new(len: usize, lr: T) -> Self {
        Self {
            lr,
            beta1: T::lit(0.9),
            beta2: T::lit(0.999),
            eps: T::lit(1e-8),
            step: 0,
            m: vec![T::zero(); len],
            v: vec![T::zero(); len],
        }
    }

    pub fn step(&mut self, params: &mut [T], grad: &[T]) {
        debug_assert_eq!(params.len(), grad.len());
        self.step += 1;
        let c1 = T::one() - self.beta1.powi(self.step);
        let c2 = T::one() - self.beta2.powi(self.step);
        for ((p, &g), (m, v)) in params.iter_mut().zip(grad).zip(self.m.iter_mut().zip(self.v.iter_mut())) {
            *m = self.beta1 * *m + (T::one() - self.beta1) * g;
            *v = self.beta2 * *v + (T::one() - self.beta2) * g * g;
            let mh = *m / c1;
            let vh = *v / c2;
            *p -= self.lr * mh / (vh.sqrt() + self.eps);
        }
    }
}

/// Rescales `grad` so its L2 norm is at most `max_norm`; returns the norm
/// before clipping.
pub fn clip_grad_norm<T: Scalar>(grad: &mut [T], max_norm: T) -> T {
    let norm = grad.iter().map(|&g| g * g).sum::<T>().sqrt();
    if norm > max_norm {
        let scale = max_norm / (norm + T::lit(1e-6));
        grad.iter_mut().for_each(|g| *g *= scale);
    }
    norm
}
