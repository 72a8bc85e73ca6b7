use super::params::ModelParams;
use crate::error::{Error, Result};

/// Bias-corrected Adam over every tensor of a [`ModelParams`].
#[derive(Debug, Clone)]
pub struct Adam {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    state: AdamState,
}

/// First/second moment estimates and step counter.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct AdamState {
    pub t: u64,
    pub m: Vec<Vec<f64>>,
    pub v: Vec<Vec<f64>>,
}

impl Adam {
    pub fn new(lr: f64) -> Self {
        Self::with_betas(lr, (0.9, 0.999), 1e-8)
    }

    pub fn with_betas(lr: f64, betas: (f64, f64), eps: f64) -> Self {
        Self {
            lr,
            beta1: betas.0,
            beta2: betas.1,
            eps,
            state: AdamState::default(),
        }
    }

    pub fn state(&self) -> &AdamState {
        &self.state
    }

    pub fn step(&mut self, params: &mut ModelParams, grads: &[Vec<f64>]) -> Result<()> {
        adam_step(
            params,
            grads,
            &mut self.state,
            self.lr,
            (self.beta1, self.beta2),
            self.eps,
        )
    }
}

/// One Adam update. A zero-initialized (empty) state is sized on first use.
pub fn adam_step(
    params: &mut ModelParams,
    grads: &[Vec<f64>],
    state: &mut AdamState,
    lr: f64,
    betas: (f64, f64),
    eps: f64,
) -> Result<()> {
    if grads.len() != params.len() {
        return Err(Error::Usage(format!(
            "{} gradients for {} parameters",
            grads.len(),
            params.len()
        )));
    }
    if state.m.is_empty() {
        state.m = params
            .ids()
            .map(|id| vec![0.0; params.get(id).len()])
            .collect();
        state.v = state.m.clone();
    }
    state.t += 1;
    let (b1, b2) = betas;
    let c1 = 1.0 - b1.powi(state.t as i32);
    let c2 = 1.0 - b2.powi(state.t as i32);
    let ids: Vec<_> = params.ids().collect();
    for (i, id) in ids.into_iter().enumerate() {
        let g = &grads[i];
        let values = params.get_mut(id).values_mut();
        if g.len() != values.len() {
            return Err(Error::shape(
                "adam",
                format!("gradient {i} has the wrong length"),
            ));
        }
        let (m, v) = (&mut state.m[i], &mut state.v[i]);
        for k in 0..values.len() {
            m[k] = b1 * m[k] + (1.0 - b1) * g[k];
            v[k] = b2 * v[k] + (1.0 - b2) * g[k] * g[k];
            let m_hat = m[k] / c1;
            let v_hat = v[k] / c2;
            values[k] -= lr * m_hat / (v_hat.sqrt() + eps);
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::tensor::Tensor;

    fn scalar_params(w: f64) -> ModelParams {
        let mut p = ModelParams::new(0);
        p.register("w", Tensor::scalar(w)).unwrap();
        p
    }

    fn w(p: &ModelParams) -> f64 {
        p.by_name("w").unwrap().values()[0]
    }

    #[test]
    fn zero_gradient_leaves_params() {
        let mut p = scalar_params(1.5);
        let mut opt = Adam::new(0.1);
        opt.step(&mut p, &[vec![0.0]]).unwrap();
        assert_eq!(w(&p), 1.5);
    }

    #[test]
    fn descends_on_square() {
        let mut p = scalar_params(1.0);
        let mut opt = Adam::new(0.1);
        let g = vec![2.0 * w(&p)];
        opt.step(&mut p, &[g]).unwrap();
        assert!(w(&p) < 1.0);
    }

    #[test]
    fn converges_monotonically_on_shifted_square() {
        let mut p = scalar_params(0.0);
        let mut opt = Adam::new(0.1);
        let mut dist = (w(&p) - 3.0).abs();
        for _ in 0..10 {
            let g = 2.0 * (w(&p) - 3.0);
            opt.step(&mut p, &[vec![g]]).unwrap();
            let d = (w(&p) - 3.0).abs();
            assert!(d < dist, "{d} !< {dist}");
            dist = d;
        }
    }
}
