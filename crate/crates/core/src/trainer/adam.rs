use crate::error::{shape, Error, Result};
use crate::forecaster::{ForecasterParams, GradSet};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            lr: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

impl AdamConfig {
    pub fn validate(&self) -> Result<()> {
        let ok = self.lr > 0.0
            && self.lr.is_finite()
            && (0.0..1.0).contains(&self.beta1)
            && self.beta1 > 0.0
            && (0.0..1.0).contains(&self.beta2)
            && self.beta2 > 0.0
            && self.eps > 0.0;
        if !ok {
            return Err(crate::error::invalid(format!("invalid Adam settings {self:?}")));
        }
        Ok(())
    }

    /// One bias-corrected update of `value` in place.
    #[inline]
    fn update(&self, value: &mut f64, grad: f64, m: &mut f64, v: &mut f64, bc1: f64, bc2: f64) {
        *m = self.beta1 * *m + (1.0 - self.beta1) * grad;
        *v = self.beta2 * *v + (1.0 - self.beta2) * grad * grad;
        let m_hat = *m / bc1;
        let v_hat = *v / bc2;
        *value -= self.lr * m_hat / (v_hat.sqrt() + self.eps);
    }

    fn corrections(&self, t: u64) -> (f64, f64) {
        let t = t as i32;
        (1.0 - self.beta1.powi(t), 1.0 - self.beta2.powi(t))
    }
}

/// First and second moments for every parameter array, plus the step count.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    m: Vec<Vec<f64>>,
    v: Vec<Vec<f64>>,
    t: u64,
}

impl AdamState {
    pub fn new(params: &ForecasterParams) -> Self {
        let sizes: Vec<usize> = params.named_arrays().iter().map(|(_, a)| a.len()).collect();
        Self {
            m: sizes.iter().map(|&n| vec![0.0; n]).collect(),
            v: sizes.iter().map(|&n| vec![0.0; n]).collect(),
            t: 0,
        }
    }

    pub fn step_count(&self) -> u64 {
        self.t
    }
}

/// Applies one Adam step to `params`. A non-finite gradient aborts the step
/// before anything is modified.
pub fn adam_step(
    params: &mut ForecasterParams,
    grads: &GradSet,
    state: &mut AdamState,
    config: &AdamConfig,
) -> Result<()> {
    let kind = params.kind();
    let grad_arrays = grads.named_arrays(kind);
    if grad_arrays.len() != state.m.len() {
        return Err(shape("gradient set does not match optimizer state"));
    }
    for (name, g) in &grad_arrays {
        if let Some(index) = g.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite {
                array: format!("gradient of {name}"),
                index,
            });
        }
    }
    state.t += 1;
    let (bc1, bc2) = config.corrections(state.t);
    for (((_, p), (_, g)), (m, v)) in params
        .named_arrays_mut()
        .into_iter()
        .zip(&grad_arrays)
        .zip(state.m.iter_mut().zip(state.v.iter_mut()))
    {
        if p.len() != g.len() {
            return Err(shape("gradient array length differs from parameter"));
        }
        for i in 0..p.len() {
            config.update(&mut p[i], g[i], &mut m[i], &mut v[i], bc1, bc2);
        }
    }
    Ok(())
}

/// Trainable mixing weight `alpha = sigmoid(logit)` with its own Adam moments.
#[derive(Debug, Clone, PartialEq)]
pub struct AlphaState {
    logit: f64,
    m: f64,
    v: f64,
    t: u64,
}

impl Default for AlphaState {
    /// `alpha = 0.5`.
    fn default() -> Self {
        Self::from_logit(0.0)
    }
}

impl AlphaState {
    pub fn from_logit(logit: f64) -> Self {
        Self {
            logit,
            m: 0.0,
            v: 0.0,
            t: 0,
        }
    }

    pub fn logit(&self) -> f64 {
        self.logit
    }

    pub fn alpha(&self) -> f64 {
        1.0 / (1.0 + (-self.logit).exp())
    }

    /// `dL/dlogit` for `L = alpha * L_Y + (1 - alpha) * L_D`.
    pub fn logit_grad(&self, loss_y: f64, loss_d: f64) -> f64 {
        let a = self.alpha();
        (loss_y - loss_d) * a * (1.0 - a)
    }

    pub fn step(&mut self, grad: f64, config: &AdamConfig) -> Result<()> {
        if !grad.is_finite() {
            return Err(Error::NonFinite {
                array: "gradient of alpha logit".into(),
                index: 0,
            });
        }
        self.t += 1;
        let (bc1, bc2) = config.corrections(self.t);
        config.update(&mut self.logit, grad, &mut self.m, &mut self.v, bc1, bc2);
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::forecaster::ModelKind;
    use ndarray::{array, Array1, Array2};

    fn scalar_params(w: f64) -> ForecasterParams {
        ForecasterParams::from_arrays(ModelKind::Linear, vec![array![[w]]], vec![array![0.0]]).unwrap()
    }

    #[test]
    fn zero_gradient_leaves_params() {
        let mut p = ForecasterParams::init(ModelKind::Linear, 4, 3, 1).unwrap();
        let before = p.clone();
        let mut st = AdamState::new(&p);
        let g = p.zero_grads();
        adam_step(&mut p, &g, &mut st, &AdamConfig::default()).unwrap();
        assert_eq!(p, before);
        assert_eq!(st.step_count(), 1);
    }

    #[test]
    fn first_step_moves_by_learning_rate() {
        // after bias correction m_hat = g and v_hat = g^2, so the step is lr * g / (|g| + eps)
        for g in [3.0, -0.02, 1e-3] {
            let mut p = scalar_params(1.0);
            let mut st = AdamState::new(&p);
            let cfg = AdamConfig {
                lr: 0.01,
                ..Default::default()
            };
            let grads = GradSet {
                weights: vec![array![[g]]],
                biases: vec![array![0.0]],
            };
            adam_step(&mut p, &grads, &mut st, &cfg).unwrap();
            let step = 1.0 - p.weights()[0][[0, 0]];
            let want = 0.01 * g / (g.abs() + 1e-8);
            assert!((step - want).abs() < 1e-15, "g={g}: {step} vs {want}");
            assert!((step.abs() - 0.01).abs() < 1e-7);
        }
    }

    #[test]
    fn non_finite_gradient_is_named() {
        let mut p = scalar_params(1.0);
        let before = p.clone();
        let mut st = AdamState::new(&p);
        let grads = GradSet {
            weights: vec![Array2::zeros((1, 1))],
            biases: vec![Array1::from(vec![f64::NAN])],
        };
        let err = adam_step(&mut p, &grads, &mut st, &AdamConfig::default()).unwrap_err();
        assert!(err.to_string().contains("linear.bias"), "{err}");
        assert_eq!(p, before);
        assert_eq!(st.step_count(), 0);
    }

    #[test]
    fn deterministic_trajectory() {
        let run = || {
            let mut p = ForecasterParams::init(ModelKind::Linear, 3, 2, 5).unwrap();
            let mut st = AdamState::new(&p);
            for k in 0..20 {
                let mut g = p.zero_grads();
                g.weights[0].mapv_inplace(|_| (k as f64).sin());
                adam_step(&mut p, &g, &mut st, &AdamConfig::default()).unwrap();
            }
            p
        };
        assert_eq!(run(), run());
    }

    #[test]
    fn alpha_logit_gradient_matches_finite_difference() {
        let st = AlphaState::from_logit(0.4);
        let (ly, ld) = (0.8, 0.3);
        let loss = |a: f64| {
            let alpha = 1.0 / (1.0 + (-a).exp());
            alpha * ly + (1.0 - alpha) * ld
        };
        let h = 1e-6;
        let fd = (loss(0.4 + h) - loss(0.4 - h)) / (2.0 * h);
        assert!((st.logit_grad(ly, ld) - fd).abs() < 1e-9);
        assert_eq!(AlphaState::default().alpha(), 0.5);
    }
}
