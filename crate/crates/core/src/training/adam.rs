use super::TrainError;
use crate::models::ModelParams;
use crate::tensor::Tensor;

/// First and second moment estimates for every parameter tensor.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub m: Vec<Vec<f64>>,
    pub v: Vec<Vec<f64>>,
    pub t: u64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl AdamState {
    pub fn new(params: &ModelParams) -> Self {
        let zeros: Vec<Vec<f64>> = params.iter().map(|(_, t)| vec![0.0; t.len()]).collect();
        Self {
            m: zeros.clone(),
            v: zeros,
            t: 0,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

/// One bias-corrected Adam update, in place.
pub fn adam_step(params: &mut ModelParams, grads: &[Tensor], state: &mut AdamState, lr: f64) -> Result<(), TrainError> {
    if grads.len() != params.len() {
        let name = params.names().nth(grads.len()).unwrap_or("?").to_string();
        return Err(TrainError::MissingGradient(name));
    }
    for ((name, p), g) in params.iter().zip(grads) {
        if g.len() != p.len() {
            return Err(TrainError::MissingGradient(name.to_string()));
        }
    }
    state.t += 1;
    let (b1, b2) = (state.beta1, state.beta2);
    let c1 = 1.0 - b1.powi(state.t as i32);
    let c2 = 1.0 - b2.powi(state.t as i32);
    for (k, (p, g)) in params.tensors_mut().zip(grads).enumerate() {
        let (m, v) = (&mut state.m[k], &mut state.v[k]);
        for (i, (w, &gi)) in p.data_mut().iter_mut().zip(g.data()).enumerate() {
            m[i] = b1 * m[i] + (1.0 - b1) * gi;
            v[i] = b2 * v[i] + (1.0 - b2) * gi * gi;
            let m_hat = m[i] / c1;
            let v_hat = v[i] / c2;
            *w -= lr * m_hat / (v_hat.sqrt() + state.eps);
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::{Arch, ModelConfig};

    fn scalar_params(w: f64) -> ModelParams {
        // A one-weight "model": the smallest valid config, then overwrite.
        let mut cfg = ModelConfig::new(Arch::DeepSet, 1);
        cfg.dims = vec![3, 1];
        cfg.head_hidden = 1;
        let mut p = ModelParams::init(&cfg, 0);
        for t in p.tensors_mut() {
            t.data_mut().fill(w);
        }
        p
    }

    fn grads_like(p: &ModelParams, g: f64) -> Vec<Tensor> {
        p.iter()
            .map(|(_, t)| Tensor::new(t.shape().to_vec(), vec![g; t.len()]).unwrap())
            .collect()
    }

    #[test]
    fn zero_gradient_leaves_params() {
        let mut p = scalar_params(0.3);
        let before = p.clone();
        let mut st = AdamState::new(&p);
        for _ in 0..10 {
            adam_step(&mut p, &grads_like(&before, 0.0), &mut st, 0.01).unwrap();
        }
        assert_eq!(p, before);
        assert_eq!(st.t, 10);
    }

    #[test]
    fn first_step_moves_by_learning_rate() {
        let mut p = scalar_params(0.0);
        let g = grads_like(&p, 1.0);
        let mut st = AdamState::new(&p);
        adam_step(&mut p, &g, &mut st, 0.01).unwrap();
        let expected = -0.01 * 1.0 / (1.0 + 1e-8);
        assert!(p.iter().all(|(_, t)| t.data().iter().all(|&w| (w - expected).abs() < 1e-15)));
    }

    #[test]
    fn quadratic_bowl_descends() {
        let mut p = scalar_params(1.0);
        let mut st = AdamState::new(&p);
        let f = |p: &ModelParams| p.iter().map(|(_, t)| t.data()[0].powi(2)).sum::<f64>();
        let mut prev = f(&p);
        for _ in 0..100 {
            let g: Vec<Tensor> = p
                .iter()
                .map(|(_, t)| Tensor::new(t.shape().to_vec(), t.data().iter().map(|w| 2.0 * w).collect()).unwrap())
                .collect();
            adam_step(&mut p, &g, &mut st, 0.01).unwrap();
            let now = f(&p);
            assert!(now < prev);
            prev = now;
        }
    }

    #[test]
    fn missing_gradient_is_reported() {
        let mut p = scalar_params(0.0);
        let mut g = grads_like(&p, 1.0);
        g.pop();
        let mut st = AdamState::new(&p);
        assert!(matches!(adam_step(&mut p, &g, &mut st, 0.01), Err(TrainError::MissingGradient(_))));
    }
}
