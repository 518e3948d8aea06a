//! Adam with bias correction.

use crate::error::{Error, Result};
use crate::mlp::Weights;
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdamHyper<T> {
    pub lr: T,
    pub beta1: T,
    pub beta2: T,
    pub eps: T,
}

impl<T: Scalar> Default for AdamHyper<T> {
    fn default() -> Self {
        Self { lr: T::lit(1e-3), beta1: T::lit(0.9), beta2: T::lit(0.999), eps: T::lit(1e-8) }
    }
}

impl<T: Scalar> AdamHyper<T> {
    pub fn validate(&self) -> Result<()> {
        let unit = |b: T| b >= T::zero() && b < T::one();
        if !(self.lr >= T::zero() && self.lr.is_finite()) || !unit(self.beta1) || !unit(self.beta2) || !(self.eps > T::zero()) {
            return Err(Error::InvalidArgument(format!("invalid Adam hyperparameters {self:?}")));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AdamState<T> {
    pub m: Weights<T>,
    pub v: Weights<T>,
    pub step: u64,
}

impl<T: Scalar> AdamState<T> {
    pub fn new(shape_of: &Weights<T>) -> Self {
        let zero = |w: &Weights<T>| {
            let mut z = w.clone();
            z.buffers_mut().into_iter().for_each(|b| b.iter_mut().for_each(|v| *v = T::zero()));
            z
        };
        Self { m: zero(shape_of), v: zero(shape_of), step: 0 }
    }
}

/// One in-place Adam update of `params` using `grads`.
pub fn adam_step<T: Scalar>(params: &mut Weights<T>, grads: &Weights<T>, state: &mut AdamState<T>, hyper: &AdamHyper<T>) -> Result<()> {
    if !params.same_shape(grads) || !params.same_shape(&state.m) || !params.same_shape(&state.v) {
        return Err(Error::InvalidArgument("Adam parameter, gradient and state shapes differ".into()));
    }
    state.step += 1;
    let t = state.step as i32;
    let bc1 = T::one() - hyper.beta1.powi(t);
    let bc2 = T::one() - hyper.beta2.powi(t);
    let (b1, b2) = (hyper.beta1, hyper.beta2);
    let (one_b1, one_b2) = (T::one() - b1, T::one() - b2);
    let bufs = params.buffers_mut().into_iter().zip(grads.buffers()).zip(state.m.buffers_mut()).zip(state.v.buffers_mut());
    for (((p, g), m), v) in bufs {
        for i in 0..p.len() {
            let gi = g[i];
            m[i] = b1 * m[i] + one_b1 * gi;
            v[i] = b2 * v[i] + one_b2 * gi * gi;
            let m_hat = m[i] / bc1;
            let v_hat = v[i] / bc2;
            p[i] -= hyper.lr * m_hat / (v_hat.sqrt() + hyper.eps);
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::MapKind;
    use crate::mlp::{init_params, MlpDims};

    fn weights(seed: u64) -> Weights<f64> {
        init_params::<f64>(MlpDims::new(MapKind::Al, 2, 4, 3), vec![1.0; 2], seed).unwrap().weights
    }

    #[test]
    fn zero_gradient_leaves_params() {
        let mut p = weights(1);
        let before = p.clone();
        let g = AdamState::new(&p).m;
        let mut st = AdamState::new(&p);
        adam_step(&mut p, &g, &mut st, &AdamHyper::default()).unwrap();
        assert_eq!(p, before);
        assert_eq!(st.step, 1);
    }

    #[test]
    fn first_step_is_lr_over_one_plus_eps() {
        // m̂ = g = 1, v̂ = 1, so Δ = -lr / (1 + ε).
        let mut p = weights(2);
        let before = p.flatten();
        let mut g = AdamState::new(&p).m;
        g.buffers_mut().into_iter().for_each(|b| b.iter_mut().for_each(|v| *v = 1.0));
        let mut st = AdamState::new(&p);
        let hyper = AdamHyper::default();
        adam_step(&mut p, &g, &mut st, &hyper).unwrap();
        let expect = -1e-3 / (1.0 + 1e-8);
        for (a, b) in p.flatten().iter().zip(&before) {
            assert!((a - b - expect).abs() < 1e-15);
        }
    }

    #[test]
    fn identical_runs_are_bit_identical() {
        let run = || {
            let mut p = weights(3);
            let mut st = AdamState::new(&p);
            let g = weights(4);
            for _ in 0..10 {
                adam_step(&mut p, &g, &mut st, &AdamHyper::default()).unwrap();
            }
            p.flatten().iter().map(|v| v.to_bits()).collect::<Vec<_>>()
        };
        assert_eq!(run(), run());
    }

    #[test]
    fn shape_mismatch_is_an_error() {
        let mut p = weights(5);
        let other = init_params::<f64>(MlpDims::new(MapKind::Al, 2, 4, 5), vec![1.0; 2], 0).unwrap().weights;
        let mut st = AdamState::new(&p);
        assert!(adam_step(&mut p, &other, &mut st, &AdamHyper::default()).is_err());
    }
}
