use super::tensor::{Scalar, Tensor};
use super::TensorError;

/// Adam optimizer state with bias correction.
///
/// Moment buffers are allocated per parameter at construction; the update
/// itself is elementwise and bit-deterministic for identical inputs.
#[derive(Clone, Debug)]
pub struct AdamState<T: Scalar> {
    pub step_count: u64,
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    m: Vec<Vec<T>>,
    v: Vec<Vec<T>>,
}

impl<T: Scalar> AdamState<T> {
    pub fn new(param_sizes: &[usize], lr: f64) -> Self {
        Self::with_hyper(param_sizes, lr, 0.9, 0.999, 1e-8)
    }

    pub fn with_hyper(
        param_sizes: &[usize],
        lr: f64,
        beta1: f64,
        beta2: f64,
        epsilon: f64,
    ) -> Self {
        Self {
            step_count: 0,
            lr,
            beta1,
            beta2,
            epsilon,
            m: param_sizes.iter().map(|&n| vec![T::zero(); n]).collect(),
            v: param_sizes.iter().map(|&n| vec![T::zero(); n]).collect(),
        }
    }

    /// Applies one Adam update using each parameter's stored gradient.
    /// Gradients are left untouched; callers zero them between steps.
    pub fn step(&mut self, params: &mut [&mut Tensor<T>]) -> Result<(), TensorError> {
        if params.len() != self.m.len() {
            return Err(TensorError::InvalidArgument {
                op: "adam_step",
                details: format!(
                    "optimizer tracks {} parameters, got {}",
                    self.m.len(),
                    params.len()
                ),
            });
        }
        let t = self.step_count + 1;
        let lr = T::from_f64(self.lr);
        let b1 = T::from_f64(self.beta1);
        let b2 = T::from_f64(self.beta2);
        let one_m_b1 = T::from_f64(1.0 - self.beta1);
        let one_m_b2 = T::from_f64(1.0 - self.beta2);
        let eps = T::from_f64(self.epsilon);
        let bc1 = T::from_f64(1.0 - self.beta1.powi(t as i32));
        let bc2 = T::from_f64(1.0 - self.beta2.powi(t as i32));
        for (idx, p) in params.iter_mut().enumerate() {
            let n = p.numel();
            if self.m[idx].len() != n {
                return Err(TensorError::InvalidArgument {
                    op: "adam_step",
                    details: format!(
                        "parameter {idx} has {n} elements, optimizer state has {}",
                        self.m[idx].len()
                    ),
                });
            }
            let grad = p.grad.take().ok_or(TensorError::MissingGrad { index: idx })?;
            {
                let m = &mut self.m[idx];
                let v = &mut self.v[idx];
                let data = p.data_mut();
                for j in 0..n {
                    let g = grad[j];
                    m[j] = b1 * m[j] + one_m_b1 * g;
                    v[j] = b2 * v[j] + one_m_b2 * g * g;
                    let m_hat = m[j] / bc1;
                    let v_hat = v[j] / bc2;
                    data[j] = data[j] - lr * m_hat / (v_hat.sqrt() + eps);
                }
            }
            p.grad = Some(grad);
        }
        self.step_count = t;
        Ok(())
    }
}
