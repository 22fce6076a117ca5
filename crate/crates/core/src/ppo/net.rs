//! Actor-critic MLP: a tanh trunk shared by a policy head (action logits) and
//! a value head. All parameters live in one flat vector so the optimizer,
//! gradient clipping and checkpoints treat them uniformly.
//!
//! Weights are stored input-major (`w[i * out + o]`) so the inner loops of
//! both passes run over contiguous output rows.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::Rng;
use crate::scalar::Scalar;

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Architecture {
    pub input: usize,
    pub hidden: Vec<usize>,
    pub actions: usize,
}

impl Architecture {
    /// `m*m` inputs, the given hidden widths, `m(m-1)` actions.
    pub fn for_matrix(m: usize, hidden: &[usize]) -> Self {
        Self {
            input: m * m,
            hidden: hidden.to_vec(),
            actions: m * (m - 1),
        }
    }

    pub fn trunk_out(&self) -> usize {
        self.hidden.last().copied().unwrap_or(self.input)
    }

    /// Every dense layer in storage order: trunk, policy head, value head.
    pub(crate) fn layers(&self) -> Vec<Layer> {
        let mut dims = Vec::with_capacity(self.hidden.len() + 2);
        let mut prev = self.input;
        for &h in &self.hidden {
            dims.push((prev, h));
            prev = h;
        }
        dims.push((prev, self.actions));
        dims.push((prev, 1));
        let mut offset = 0;
        dims.into_iter()
            .map(|(inp, out)| {
                let l = Layer {
                    inp,
                    out,
                    w: offset,
                    b: offset + inp * out,
                };
                offset += inp * out + out;
                l
            })
            .collect()
    }

    pub fn param_count(&self) -> usize {
        self.layers().iter().map(|l| l.inp * l.out + l.out).sum()
    }
}

#[derive(Debug, Clone, Copy)]
pub(crate) struct Layer {
    pub inp: usize,
    pub out: usize,
    pub w: usize,
    pub b: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PolicyParams<T> {
    arch: Architecture,
    data: Vec<T>,
}

/// Activations kept from a batched forward pass for backpropagation.
#[derive(Debug, Clone)]
pub struct ForwardCache<T> {
    batch: usize,
    input: Vec<T>,
    /// Post-tanh outputs of each trunk layer.
    hidden: Vec<Vec<T>>,
}

#[derive(Debug, Clone)]
pub struct ForwardOut<T> {
    /// `batch x actions`, row-major.
    pub logits: Vec<T>,
    pub values: Vec<T>,
    pub cache: ForwardCache<T>,
}

impl<T: Scalar> PolicyParams<T> {
    pub fn zeros(arch: Architecture) -> Self {
        let len = arch.param_count();
        Self {
            arch,
            data: vec![T::zero(); len],
        }
    }

    /// Gaussian init with std `gain / sqrt(fan_in)`; gain 1 for the trunk and
    /// value head, 0.01 for the policy head so the initial policy is nearly
    /// uniform. Biases start at zero.
    pub fn init(arch: Architecture, rng: &mut Rng) -> Self {
        let mut p = Self::zeros(arch);
        let layers = p.arch.layers();
        let policy_head = layers.len() - 2;
        for (idx, l) in layers.iter().enumerate() {
            let gain = if idx == policy_head { 0.01 } else { 1.0 };
            let std = gain / (l.inp as f64).sqrt();
            for v in &mut p.data[l.w..l.w + l.inp * l.out] {
                *v = T::lit(rng.normal() * std);
            }
        }
        p
    }

    pub fn from_flat(arch: Architecture, data: Vec<T>) -> Result<Self> {
        if data.len() != arch.param_count() {
            return Err(Error::DimensionMismatch {
                left: arch.param_count(),
                right: data.len(),
            });
        }
        Ok(Self { arch, data })
    }

    pub fn arch(&self) -> &Architecture {
        &self.arch
    }

    pub fn flat(&self) -> &[T] {
        &self.data
    }

    pub fn flat_mut(&mut self) -> &mut [T] {
        &mut self.data
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    /// Casts every parameter to another scalar type.
    pub fn cast<U: Scalar>(&self) -> PolicyParams<U> {
        PolicyParams {
            arch: self.arch.clone(),
            data: self.data.iter().map(|&v| U::lit(v.as_f64())).collect(),
        }
    }

    /// Logits and value for one observation.
    pub fn forward(&self, obs: &[T]) -> Result<(Vec<T>, T)> {
        let out = self.forward_batch(obs, 1)?;
        Ok((out.logits, out.values[0]))
    }

    pub fn forward_batch(&self, obs: &[T], batch: usize) -> Result<ForwardOut<T>> {
        if obs.len() != batch * self.arch.input {
            return Err(Error::DimensionMismatch {
                left: batch * self.arch.input,
                right: obs.len(),
            });
        }
        let layers = self.arch.layers();
        let (trunk, heads) = layers.split_at(layers.len() - 2);
        let mut hidden = Vec::with_capacity(trunk.len());
        let mut x: &[T] = obs;
        for l in trunk {
            let mut y = self.dense(l, x, batch);
            y.iter_mut().for_each(|v| *v = v.tanh());
            hidden.push(y);
            x = hidden.last().expect("just pushed");
        }
        let logits = self.dense(&heads[0], x, batch);
        let values = self.dense(&heads[1], x, batch);
        Ok(ForwardOut {
            logits,
            values,
            cache: ForwardCache {
                batch,
                input: obs.to_vec(),
                hidden,
            },
        })
    }

    fn dense(&self, l: &Layer, x: &[T], batch: usize) -> Vec<T> {
        let w = &self.data[l.w..l.w + l.inp * l.out];
        let bias = &self.data[l.b..l.b + l.out];
        let mut y = Vec::with_capacity(batch * l.out);
        for b in 0..batch {
            y.extend_from_slice(bias);
            let row = &mut y[b * l.out..(b + 1) * l.out];
            for (i, &xi) in x[b * l.inp..(b + 1) * l.inp].iter().enumerate() {
                if xi == T::zero() {
                    continue;
                }
                for (yo, &wio) in row.iter_mut().zip(&w[i * l.out..(i + 1) * l.out]) {
                    *yo += xi * wio;
                }
            }
        }
        y
    }

    /// Accumulates into `grad` the parameter gradient given upstream
    /// gradients for the logits and values of a cached forward pass.
    pub fn backward(&self, cache: &ForwardCache<T>, dlogits: &[T], dvalues: &[T], grad: &mut [T]) {
        let batch = cache.batch;
        let layers = self.arch.layers();
        let (trunk, heads) = layers.split_at(layers.len() - 2);
        let top: &[T] = cache.hidden.last().map_or(&cache.input, Vec::as_slice);

        let mut dx = vec![T::zero(); batch * heads[0].inp];
        self.dense_backward(&heads[0], top, dlogits, batch, grad, Some(&mut dx));
        self.dense_backward(&heads[1], top, dvalues, batch, grad, Some(&mut dx));

        for (idx, l) in trunk.iter().enumerate().rev() {
            let act = &cache.hidden[idx];
            for (d, &a) in dx.iter_mut().zip(act) {
                *d *= T::one() - a * a;
            }
            let x: &[T] = if idx == 0 { &cache.input } else { &cache.hidden[idx - 1] };
            if idx == 0 {
                self.dense_backward(l, x, &dx, batch, grad, None);
            } else {
                let mut next = vec![T::zero(); batch * l.inp];
                self.dense_backward(l, x, &dx, batch, grad, Some(&mut next));
                dx = next;
            }
        }
    }

    fn dense_backward(&self, l: &Layer, x: &[T], dy: &[T], batch: usize, grad: &mut [T], dx: Option<&mut [T]>) {
        let w = &self.data[l.w..l.w + l.inp * l.out];
        {
            let (gw, gb) = grad[l.w..l.b + l.out].split_at_mut(l.inp * l.out);
            for b in 0..batch {
                let dyb = &dy[b * l.out..(b + 1) * l.out];
                for (g, &d) in gb.iter_mut().zip(dyb) {
                    *g += d;
                }
                for (i, &xi) in x[b * l.inp..(b + 1) * l.inp].iter().enumerate() {
                    if xi == T::zero() {
                        continue;
                    }
                    for (g, &d) in gw[i * l.out..(i + 1) * l.out].iter_mut().zip(dyb) {
                        *g += xi * d;
                    }
                }
            }
        }
        if let Some(dx) = dx {
            for b in 0..batch {
                let dyb = &dy[b * l.out..(b + 1) * l.out];
                for i in 0..l.inp {
                    let wi = &w[i * l.out..(i + 1) * l.out];
                    let s = wi.iter().zip(dyb).fold(T::zero(), |acc, (&a, &b)| acc + a * b);
                    dx[b * l.inp + i] += s;
                }
            }
        }
    }
}

/// Numerically stable log-softmax.
pub fn log_softmax<T: Scalar>(logits: &[T]) -> Vec<T> {
    let max = logits.iter().copied().fold(T::neg_infinity(), T::max);
    let lse = logits.iter().map(|&z| (z - max).exp()).sum::<T>().ln() + max;
    logits.iter().map(|&z| z - lse).collect()
}

pub fn softmax<T: Scalar>(logits: &[T]) -> Vec<T> {
    log_softmax(logits).into_iter().map(T::exp).collect()
}

/// Draws an index from the softmax of `logits` by inverse CDF on one uniform.
pub fn sample_action<T: Scalar>(logits: &[T], rng: &mut Rng) -> usize {
    let probs = softmax(logits);
    let u = rng.unit_f64();
    let mut acc = 0.0;
    for (i, p) in probs.iter().enumerate() {
        acc += p.as_f64();
        if u < acc {
            return i;
        }
    }
    probs.len() - 1
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_weights_give_uniform_policy() {
        let p = PolicyParams::<f64>::zeros(Architecture::for_matrix(3, &[8, 8]));
        let obs = vec![1.0; 9];
        let (logits, value) = p.forward(&obs).unwrap();
        assert_eq!(logits.len(), 6);
        let probs = softmax(&logits);
        assert!(probs.iter().all(|&q| (q - 1.0 / 6.0).abs() < 1e-15));
        assert_eq!(value, 0.0);
    }

    #[test]
    fn softmax_sums_to_one() {
        let mut rng = Rng::seed(1);
        let p = PolicyParams::<f64>::init(Architecture::for_matrix(4, &[16]), &mut rng);
        for _ in 0..50 {
            let obs: Vec<f64> = (0..16).map(|_| rng.bit() as u8 as f64).collect();
            let (logits, v) = p.forward(&obs).unwrap();
            assert!(v.is_finite());
            let s: f64 = softmax(&logits).iter().sum();
            assert!((s - 1.0).abs() < 1e-12);
            let s: f64 = log_softmax(&logits).iter().map(|l| l.exp()).sum();
            assert!((s - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn forward_is_pure_and_batch_consistent() {
        let mut rng = Rng::seed(2);
        let p = PolicyParams::<f32>::init(Architecture::for_matrix(4, &[32, 32]), &mut rng);
        let obs: Vec<f32> = (0..48).map(|i| (i % 3 == 0) as u8 as f32).collect();
        let a = p.forward_batch(&obs, 3).unwrap();
        let b = p.forward_batch(&obs, 3).unwrap();
        assert_eq!(a.logits, b.logits);
        assert_eq!(a.values, b.values);
        let (single, v) = p.forward(&obs[16..32]).unwrap();
        assert_eq!(single, a.logits[12..24].to_vec());
        assert_eq!(v, a.values[1]);
    }

    #[test]
    fn shape_mismatch() {
        let p = PolicyParams::<f64>::zeros(Architecture::for_matrix(3, &[4]));
        assert!(p.forward(&[0.0; 8]).is_err());
        assert!(PolicyParams::<f64>::from_flat(Architecture::for_matrix(3, &[4]), vec![0.0; 3]).is_err());
    }

    #[test]
    fn param_layout() {
        let a = Architecture::for_matrix(8, &[128, 128]);
        assert_eq!(
            a.param_count(),
            64 * 128 + 128 + 128 * 128 + 128 + 128 * 56 + 56 + 128 + 1
        );
        let toy = Architecture {
            input: 1,
            hidden: vec![],
            actions: 1,
        };
        assert_eq!(toy.param_count(), 4);
    }

    #[test]
    fn sampling_follows_distribution() {
        let logits = [0.0f64, (3.0f64).ln()];
        let mut rng = Rng::seed(5);
        let ones = (0..20_000).filter(|_| sample_action(&logits, &mut rng) == 1).count();
        let frac = ones as f64 / 20_000.0;
        assert!((frac - 0.75).abs() < 0.02, "{frac}");
    }
}
