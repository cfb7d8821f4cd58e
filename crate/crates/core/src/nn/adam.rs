use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn::params::Params;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            lr: 1e-5,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

/// Moment estimates for every parameter slice of one model.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub config: AdamConfig,
    pub m: Vec<Vec<f64>>,
    pub v: Vec<Vec<f64>>,
    pub t: u64,
}

impl AdamState {
    pub fn new<P: Params>(params: &P, config: AdamConfig) -> Self {
        let zeros: Vec<Vec<f64>> = params.params().iter().map(|p| vec![0.0; p.len()]).collect();
        Self {
            config,
            m: zeros.clone(),
            v: zeros,
            t: 0,
        }
    }
}

fn check_shapes(a: &[&[f64]], b: &[&[f64]], what: &'static str) -> Result<()> {
    if a.len() != b.len() || a.iter().zip(b).any(|(x, y)| x.len() != y.len()) {
        let la: Vec<usize> = a.iter().map(|s| s.len()).collect();
        let lb: Vec<usize> = b.iter().map(|s| s.len()).collect();
        return Err(Error::shape(what, format!("{la:?}"), format!("{lb:?}")));
    }
    Ok(())
}

/// One bias-corrected Adam update.
pub fn adam_step<P: Params>(params: &mut P, grads: &P, state: &mut AdamState) -> Result<()> {
    let g = grads.params();
    {
        let p = params.params();
        check_shapes(&p, &g, "adam gradients")?;
        let m: Vec<&[f64]> = state.m.iter().map(Vec::as_slice).collect();
        check_shapes(&p, &m, "adam state")?;
    }
    state.t += 1;
    let AdamConfig { lr, beta1, beta2, eps } = state.config;
    let c1 = 1.0 - beta1.powi(state.t as i32);
    let c2 = 1.0 - beta2.powi(state.t as i32);
    for (((p, g), m), v) in params
        .params_mut()
        .into_iter()
        .zip(g)
        .zip(state.m.iter_mut())
        .zip(state.v.iter_mut())
    {
        for i in 0..p.len() {
            m[i] = beta1 * m[i] + (1.0 - beta1) * g[i];
            v[i] = beta2 * v[i] + (1.0 - beta2) * g[i] * g[i];
            let m_hat = m[i] / c1;
            let v_hat = v[i] / c2;
            p[i] -= lr * m_hat / (v_hat.sqrt() + eps);
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::layers::Dense;

    fn layer() -> Dense {
        let mut d = Dense::zeros(3, 2);
        d.weight = vec![0.1, -0.2, 0.3, 0.4, -0.5, 0.6];
        d
    }

    #[test]
    fn zero_gradient_keeps_params() {
        let mut p = layer();
        let before = p.clone();
        let mut st = AdamState::new(&p, AdamConfig::default());
        adam_step(&mut p, &before.zeros_like(), &mut st).unwrap();
        assert_eq!(p, before);
        assert_eq!(st.t, 1);
    }

    #[test]
    fn first_step_moves_by_lr() {
        // m_hat = g, v_hat = g^2 -> step = lr * g / (|g| + eps) ~ lr * sign(g)
        let mut p = layer();
        let before = p.clone();
        let mut g = p.zeros_like();
        g.weight = vec![2.0, -3.0, 0.5, 1.0, -1.0, 7.0];
        let cfg = AdamConfig::default();
        let mut st = AdamState::new(&p, cfg);
        adam_step(&mut p, &g, &mut st).unwrap();
        for i in 0..6 {
            let step = before.weight[i] - p.weight[i];
            let want = cfg.lr * g.weight[i] / (g.weight[i].abs() + cfg.eps);
            assert!((step - want).abs() < 1e-15);
            assert!((step.abs() - cfg.lr).abs() < 1e-11);
        }
    }

    #[test]
    fn trajectories_are_deterministic() {
        let run = || {
            let mut p = layer();
            let mut st = AdamState::new(&p, AdamConfig { lr: 1e-2, ..AdamConfig::default() });
            for k in 0..50 {
                let mut g = p.zeros_like();
                for (i, w) in g.weight.iter_mut().enumerate() {
                    *w = p.weight[i] * 2.0 + (k as f64 * 0.1).sin();
                }
                adam_step(&mut p, &g, &mut st).unwrap();
            }
            p
        };
        assert_eq!(run(), run());
    }

    #[test]
    fn shape_mismatch() {
        let mut p = layer();
        let mut st = AdamState::new(&p, AdamConfig::default());
        let other = Dense::zeros(2, 2);
        assert!(adam_step(&mut p, &other, &mut st).is_err());
    }
}
