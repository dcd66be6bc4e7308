//! SGD with (Nesterov) momentum and L2 weight decay, and the step schedule.

use alloc::format;
use alloc::vec::Vec;

use crate::error::{shape_err, Error, Result};
use crate::nn::{Gradients, Model};
use crate::{Scalar, Tensor};

/// Momentum buffers and constants of one optimizer.
#[derive(Clone, Debug, PartialEq)]
pub struct OptimizerState<F> {
    pub momentum: F,
    pub weight_decay: F,
    pub nesterov: bool,
    buffers: Vec<Tensor<F>>,
}

impl<F: Scalar> OptimizerState<F> {
    /// Zero momentum buffers shaped like `model`'s parameters.
    pub fn new(model: &Model<F>, momentum: F, weight_decay: F, nesterov: bool) -> Self {
        Self {
            momentum,
            weight_decay,
            nesterov,
            buffers: model.params().iter().map(|p| Tensor::zeros(p.shape())).collect(),
        }
    }

    pub fn buffers(&self) -> &[Tensor<F>] {
        &self.buffers
    }

    /// One update, per parameter element:
    ///
    /// ```text
    /// g   = grad + weight_decay * p
    /// buf = momentum * buf + g
    /// p  -= lr * (g + momentum * buf)   // nesterov
    /// p  -= lr * buf                    // classic
    /// ```
    ///
    /// Non-finite gradients abort the step before anything is modified.
    pub fn sgd_step(&mut self, model: &mut Model<F>, grads: &Gradients<F>, lr: F) -> Result<()> {
        if grads.0.len() != self.buffers.len() {
            return Err(shape_err(
                "gradients",
                format!("expected {} tensors, got {}", self.buffers.len(), grads.0.len()),
            ));
        }
        for (i, (g, b)) in grads.iter().zip(&self.buffers).enumerate() {
            if g.shape() != b.shape() {
                return Err(shape_err(
                    format!("gradient {i}"),
                    format!("expected {:?}, got {:?}", b.shape(), g.shape()),
                ));
            }
            if !g.is_finite() {
                return Err(Error::NonFinite(format!("gradient of parameter tensor {i}")));
            }
        }
        let (mu, wd) = (self.momentum, self.weight_decay);
        for ((p, g), buf) in model.params_mut().iter_mut().zip(grads.iter()).zip(&mut self.buffers) {
            for ((pv, &gv), bv) in p.data_mut().iter_mut().zip(g.data()).zip(buf.data_mut()) {
                let d = gv + wd * *pv;
                *bv = mu * *bv + d;
                let step = if self.nesterov { d + mu * *bv } else { *bv };
                *pv -= lr * step;
            }
        }
        Ok(())
    }
}

/// Piecewise-constant learning rate: `initial * factor^k` where `k` is the
/// number of milestones at or before the epoch.
#[derive(Clone, Debug, PartialEq)]
pub struct StepSchedule {
    pub initial: f64,
    pub milestones: Vec<usize>,
    pub factor: f64,
}

impl StepSchedule {
    pub fn new(initial: f64, milestones: Vec<usize>, factor: f64) -> Result<Self> {
        if milestones.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::Config(format!("milestones must be strictly increasing: {milestones:?}")));
        }
        if !(initial.is_finite() && initial > 0.0 && factor.is_finite() && factor > 0.0) {
            return Err(Error::Config(format!("bad learning rate {initial} or factor {factor}")));
        }
        Ok(Self {
            initial,
            milestones,
            factor,
        })
    }

    pub fn lr_at(&self, epoch: usize) -> f64 {
        let passed = self.milestones.iter().filter(|&&m| m <= epoch).count();
        let mut lr = self.initial;
        for _ in 0..passed {
            lr *= self.factor;
        }
        lr
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::{LayerSpec, ModelSpec};

    fn scalar_model(w: f64) -> Model<f64> {
        // one dense 1->2 layer; parameter 0 element 0 is the scalar under test
        let spec = ModelSpec::new(
            alloc::vec![1],
            alloc::vec![LayerSpec::Dense {
                in_features: 1,
                out_features: 2
            }],
            1,
        )
        .unwrap();
        let p = alloc::vec![
            Tensor::new(alloc::vec![2, 1], alloc::vec![w, 0.0]).unwrap(),
            Tensor::zeros(&[2]),
        ];
        Model::from_params(spec, p, 0).unwrap()
    }

    fn grads(g: f64) -> Gradients<f64> {
        Gradients(alloc::vec![
            Tensor::new(alloc::vec![2, 1], alloc::vec![g, 0.0]).unwrap(),
            Tensor::zeros(&[2]),
        ])
    }

    #[test]
    fn plain_sgd() {
        let mut m = scalar_model(1.0);
        let mut opt = OptimizerState::new(&m, 0.0, 0.0, false);
        opt.sgd_step(&mut m, &grads(0.5), 0.1).unwrap();
        assert!((m.params()[0].data()[0] - (1.0 - 0.1 * 0.5)).abs() < 1e-15);
    }

    #[test]
    fn weight_decay_two_step_trace() {
        // zero gradient, momentum 0: p_{t+1} = p_t (1 - lr * wd)
        let (lr, wd) = (0.1, 1e-4);
        let mut m = scalar_model(2.0);
        let mut opt = OptimizerState::new(&m, 0.0, wd, false);
        opt.sgd_step(&mut m, &grads(0.0), lr).unwrap();
        let p1 = 2.0 - lr * wd * 2.0;
        assert!((m.params()[0].data()[0] - p1).abs() < 1e-15);
        opt.sgd_step(&mut m, &grads(0.0), lr).unwrap();
        let p2 = p1 * (1.0 - lr * wd);
        assert!((m.params()[0].data()[0] - p2).abs() < 1e-15);
    }

    #[test]
    fn nesterov_matches_unrolled_recurrence() {
        let (lr, mu) = (0.1, 0.9);
        let (g1, g2) = (0.5, -0.25);
        let mut m = scalar_model(1.0);
        let mut opt = OptimizerState::new(&m, mu, 0.0, true);
        opt.sgd_step(&mut m, &grads(g1), lr).unwrap();
        opt.sgd_step(&mut m, &grads(g2), lr).unwrap();
        // step 1: v1 = g1, p1 = p0 - lr (g1 + mu v1)
        let v1 = g1;
        let p1 = 1.0 - lr * (g1 + mu * v1);
        // step 2: v2 = mu v1 + g2, p2 = p1 - lr (g2 + mu v2)
        let v2 = mu * v1 + g2;
        let p2 = p1 - lr * (g2 + mu * v2);
        assert!((m.params()[0].data()[0] - p2).abs() < 1e-15);
        assert!((opt.buffers()[0].data()[0] - v2).abs() < 1e-15);
    }

    #[test]
    fn non_finite_gradient_aborts_without_update() {
        let mut m = scalar_model(1.0);
        let before = m.clone();
        let mut opt = OptimizerState::new(&m, 0.9, 0.0, true);
        let err = opt.sgd_step(&mut m, &grads(f64::NAN), 0.1);
        assert!(matches!(err, Err(Error::NonFinite(_))));
        assert_eq!(m, before);
    }

    #[test]
    fn step_schedule() {
        let s = StepSchedule::new(0.1, alloc::vec![30, 90, 120], 0.1).unwrap();
        assert_eq!(s.lr_at(0), 0.1);
        assert!((s.lr_at(29) - 0.1).abs() < 1e-15);
        assert!((s.lr_at(30) - 0.01).abs() < 1e-15);
        assert!((s.lr_at(149) - 1e-4).abs() < 1e-15);
        assert!(StepSchedule::new(0.1, alloc::vec![30, 30], 0.1).is_err());
    }
}
