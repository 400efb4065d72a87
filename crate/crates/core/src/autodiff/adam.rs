use super::{AutodiffError, Tensor};

/// Moment estimates and hyper-parameters of one ADAM-updated tensor.
#[derive(Clone, Debug, PartialEq)]
pub struct AdamState {
    pub step: u64,
    pub first_moment: Tensor,
    pub second_moment: Tensor,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub learning_rate: f64,
}

impl AdamState {
    /// Fresh state with the usual defaults (β₁ = 0.9, β₂ = 0.999, ε = 1e-8).
    pub fn new(shape: &[usize], learning_rate: f64) -> Self {
        Self {
            step: 0,
            first_moment: Tensor::zeros(shape),
            second_moment: Tensor::zeros(shape),
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            learning_rate,
        }
    }

    /// Applies one bias-corrected update to `param` in place.
    pub fn update(&mut self, param: &mut Tensor, grad: &Tensor) -> Result<(), AutodiffError> {
        if param.shape() != grad.shape() || param.shape() != self.first_moment.shape() {
            return Err(AutodiffError::Shape(format!(
                "adam: parameter {:?}, gradient {:?}, state {:?}",
                param.shape(),
                grad.shape(),
                self.first_moment.shape()
            )));
        }
        self.step += 1;
        let t = self.step as i32;
        let (b1, b2) = (self.beta1 as f32, self.beta2 as f32);
        let c1 = (1.0 - self.beta1.powi(t)) as f32;
        let c2 = (1.0 - self.beta2.powi(t)) as f32;
        let lr = self.learning_rate as f32;
        let eps = self.epsilon as f32;
        let m = self.first_moment.data_mut();
        let v = self.second_moment.data_mut();
        for (((p, &g), m), v) in param.data_mut().iter_mut().zip(grad.data()).zip(m).zip(v) {
            *m = b1 * *m + (1.0 - b1) * g;
            *v = b2 * *v + (1.0 - b2) * g * g;
            let m_hat = *m / c1;
            let v_hat = *v / c2;
            *p -= lr * m_hat / (v_hat.sqrt() + eps);
        }
        Ok(())
    }
}

/// Returns `param` after one ADAM step; `state` advances by one.
pub fn adam_step(param: &Tensor, grad: &Tensor, state: &mut AdamState) -> Result<Tensor, AutodiffError> {
    let mut next = param.clone();
    state.update(&mut next, grad)?;
    Ok(next)
}
