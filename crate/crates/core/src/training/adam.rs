use crate::error::{Error, Result};

use super::param::ParamStore;

#[derive(Debug, Clone, Copy)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl AdamConfig {
    pub fn new(lr: f64) -> Self {
        Self {
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

/// One bias-corrected Adam update of every parameter, in name order.
///
/// Fails before touching anything if a gradient is missing or non-finite.
pub fn adam_step(params: &mut ParamStore, cfg: &AdamConfig) -> Result<()> {
    for p in params.iter() {
        if !p.grad.same_shape(&p.value) {
            return Err(Error::Parameter {
                name: p.name.clone(),
                detail: "gradient missing or mis-shaped".into(),
            });
        }
        if !p.grad.is_finite() {
            return Err(Error::Parameter {
                name: p.name.clone(),
                detail: "non-finite gradient".into(),
            });
        }
    }
    for p in params.iter_mut() {
        p.step_count += 1;
        let t = p.step_count as i32;
        let bc1 = 1.0 - cfg.beta1.powi(t);
        let bc2 = 1.0 - cfg.beta2.powi(t);
        let value = p.value.data_mut();
        let m = p.adam_m.data_mut();
        let v = p.adam_v.data_mut();
        for (i, &g) in p.grad.data().iter().enumerate() {
            m[i] = cfg.beta1 * m[i] + (1.0 - cfg.beta1) * g;
            v[i] = cfg.beta2 * v[i] + (1.0 - cfg.beta2) * g * g;
            let m_hat = m[i] / bc1;
            let v_hat = v[i] / bc2;
            value[i] -= cfg.lr * m_hat / (v_hat.sqrt() + cfg.eps);
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tensor::Tensor;
    use crate::training::{ParamKind, Parameter};

    fn scalar_store(w: f64) -> ParamStore {
        let mut s = ParamStore::new();
        s.insert(Parameter::new(
            "w",
            ParamKind::DenseWeight,
            Tensor::full(&[1, 1], w),
        ))
        .unwrap();
        s
    }

    #[test]
    fn zero_gradient_leaves_parameters() {
        let mut s = scalar_store(0.7);
        for _ in 0..10 {
            s.zero_grads();
            adam_step(&mut s, &AdamConfig::new(0.001)).unwrap();
        }
        assert_eq!(s.value("w").unwrap().data(), &[0.7]);
        assert_eq!(s.get("w").unwrap().step_count, 10);
    }

    #[test]
    fn first_step_moves_by_lr() {
        let mut s = scalar_store(0.0);
        s.get_mut("w").unwrap().grad.fill(1.0);
        adam_step(&mut s, &AdamConfig::new(0.001)).unwrap();
        let w = s.value("w").unwrap().data()[0];
        // m_hat = v_hat = 1, so the step is lr / (1 + eps)
        assert!((w + 0.001 / (1.0 + 1e-8)).abs() < 1e-18);
    }

    #[test]
    fn non_finite_gradient_rejected() {
        let mut s = scalar_store(0.0);
        s.get_mut("w").unwrap().grad.fill(f64::NAN);
        assert!(adam_step(&mut s, &AdamConfig::new(0.001)).is_err());
        assert_eq!(s.get("w").unwrap().step_count, 0);
    }
}
