use crate::error::{Error, Result};
use crate::hyperrbm::{ParamGradient, ParamSet, BLOCK_NAMES};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AdamHyper {
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamHyper {
    fn default() -> Self {
        AdamHyper {
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

/// Bias-corrected moment estimates, one entry per parameter.
#[derive(Clone, Debug, PartialEq)]
pub struct AdamState {
    pub first: ParamSet,
    pub second: ParamSet,
    pub t: u64,
}

impl AdamState {
    pub fn new(params: &ParamSet) -> Self {
        AdamState {
            first: params.zeros_like(),
            second: params.zeros_like(),
            t: 0,
        }
    }
}

/// One ADAM update of every block. A non-finite gradient entry aborts
/// before anything is modified.
pub fn adam_step(
    params: &mut ParamSet,
    grad: &ParamGradient,
    state: &mut AdamState,
    lr: f64,
    hyper: AdamHyper,
) -> Result<()> {
    if !params.same_shape(grad) || !params.same_shape(&state.first) {
        return Err(Error::Config("ADAM: gradient shape does not match parameters".into()));
    }
    if let Some((block, index)) = grad.first_non_finite() {
        let value = grad.blocks()[BLOCK_NAMES.iter().position(|b| *b == block).unwrap()][index];
        return Err(Error::Numerical(format!(
            "non-finite gradient {value} in block {block} at index {index} (step {})",
            state.t + 1
        )));
    }
    state.t += 1;
    let t = state.t as i32;
    let c1 = 1.0 - hyper.beta1.powi(t);
    let c2 = 1.0 - hyper.beta2.powi(t);
    let blocks = params
        .blocks_mut()
        .into_iter()
        .zip(grad.blocks())
        .zip(state.first.blocks_mut())
        .zip(state.second.blocks_mut());
    for (((p, g), m), v) in blocks {
        for k in 0..p.len() {
            m[k] = hyper.beta1 * m[k] + (1.0 - hyper.beta1) * g[k];
            v[k] = hyper.beta2 * v[k] + (1.0 - hyper.beta2) * g[k] * g[k];
            let m_hat = m[k] / c1;
            let v_hat = v[k] / c2;
            p[k] -= lr * m_hat / (v_hat.sqrt() + hyper.eps);
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hyperrbm::ModelShape;

    fn one_param(value: f64) -> ParamSet {
        let mut p = ParamSet::zeros(ModelShape {
            n_visible: 1,
            n_hidden: 1,
            hyper_width: 1,
        });
        p.weights[0] = value;
        p
    }

    #[test]
    fn zero_gradient_leaves_params_and_decays_moments() {
        let mut p = one_param(0.3);
        let mut state = AdamState::new(&p);
        state.first.weights[0] = 1.0;
        state.second.weights[0] = 1.0;
        state.t = 5;
        let before = p.clone();
        let zero = p.zeros_like();
        adam_step(&mut p, &zero, &mut state, 0.0, AdamHyper::default()).unwrap();
        assert_eq!(p, before);
        assert!((state.first.weights[0] - 0.9).abs() < 1e-15);
        assert!((state.second.weights[0] - 0.999).abs() < 1e-15);
    }

    #[test]
    fn first_step_moves_by_lr_against_sign() {
        let mut p = one_param(0.0);
        p.hyper_b2.iter_mut().for_each(|x| *x = 1.0);
        let mut g = p.zeros_like();
        g.weights[0] = 3.7;
        g.hyper_b2[0] = -0.02;
        let mut state = AdamState::new(&p);
        adam_step(&mut p, &g, &mut state, 0.01, AdamHyper::default()).unwrap();
        assert!((p.weights[0] + 0.01).abs() < 1e-9);
        assert!((p.hyper_b2[0] - 1.01).abs() < 1e-8);
        assert_eq!(p.hyper_b2[1], 1.0);
    }

    #[test]
    fn three_step_scalar_trace() {
        // independent recomputation of the textbook recursion
        let grads = [0.5, -1.0, 0.25];
        let (lr, b1, b2, eps) = (0.1, 0.9, 0.999, 1e-8);
        let (mut x, mut m, mut v) = (1.0f64, 0.0f64, 0.0f64);
        for (t, g) in grads.iter().enumerate() {
            m = b1 * m + (1.0 - b1) * g;
            v = b2 * v + (1.0 - b2) * g * g;
            let mh = m / (1.0 - b1.powi(t as i32 + 1));
            let vh = v / (1.0 - b2.powi(t as i32 + 1));
            x -= lr * mh / (vh.sqrt() + eps);
        }
        let mut p = one_param(1.0);
        let mut state = AdamState::new(&p);
        for g in grads {
            let mut grad = p.zeros_like();
            grad.weights[0] = g;
            adam_step(&mut p, &grad, &mut state, lr, AdamHyper::default()).unwrap();
        }
        assert!((p.weights[0] - x).abs() < 1e-14);
        assert_eq!(state.t, 3);
    }

    #[test]
    fn non_finite_gradient_aborts() {
        let mut p = one_param(1.0);
        let mut g = p.zeros_like();
        g.hyper_w2[0] = f64::NAN;
        let mut state = AdamState::new(&p);
        let err = adam_step(&mut p, &g, &mut state, 0.1, AdamHyper::default()).unwrap_err();
        assert!(matches!(err, Error::Numerical(msg) if msg.contains("hyper_w2")));
        assert_eq!(state.t, 0);
        assert_eq!(p.weights[0], 1.0);
    }
}
