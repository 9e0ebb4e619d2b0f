use super::{LstmError, LstmGradients, LstmParams, Result, TrainConfig};

/// Decayed mean of squared gradients, one accumulator per parameter.
#[derive(Debug, Clone, PartialEq)]
pub struct RmsPropState {
    pub accumulators: LstmParams,
}

impl RmsPropState {
    pub fn new(params: &LstmParams) -> Self {
        Self {
            accumulators: LstmParams::zeros(params.dims()),
        }
    }
}

/// `a <- decay*a + (1-decay)*g^2; p <- p - lr*g/(sqrt(a) + eps)` over
/// flat slices.
pub fn rmsprop_update(params: &mut [f64], grads: &[f64], acc: &mut [f64], lr: f64, decay: f64, eps: f64) {
    for ((p, &g), a) in params.iter_mut().zip(grads).zip(acc.iter_mut()) {
        *a = decay * *a + (1.0 - decay) * g * g;
        *p -= lr * g / (a.sqrt() + eps);
    }
}

pub fn rmsprop_step(
    params: &mut LstmParams,
    grads: &LstmGradients,
    state: &mut RmsPropState,
    config: &TrainConfig,
) -> Result<()> {
    if grads.dims() != params.dims() || state.accumulators.dims() != params.dims() {
        return Err(LstmError::Shape("optimizer state or gradients do not match params".into()));
    }
    if !grads.is_finite() {
        return Err(LstmError::NonFinite("gradient".into()));
    }
    for ((p, g), a) in params
        .tensors_mut()
        .into_iter()
        .zip(grads.tensors())
        .zip(state.accumulators.tensors_mut())
    {
        rmsprop_update(
            p,
            g,
            a,
            config.learning_rate,
            config.rmsprop_decay,
            config.rmsprop_epsilon,
        );
    }
    Ok(())
}

/// Rescales `grads` so their global L2 norm is at most `max_norm`. Returns
/// the norm before clipping.
pub fn clip_global_norm(grads: &mut LstmGradients, max_norm: f64) -> f64 {
    let norm = grads
        .tensors()
        .iter()
        .flat_map(|t| t.iter())
        .map(|g| g * g)
        .sum::<f64>()
        .sqrt();
    if norm > max_norm && norm > 0.0 {
        let scale = max_norm / norm;
        for t in grads.tensors_mut() {
            t.iter_mut().for_each(|g| *g *= scale);
        }
    }
    norm
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lstm::{init_params, Dims};

    const DIMS: Dims = Dims {
        input_size: 2,
        hidden_size: 3,
        output_size: 1,
    };

    #[test]
    fn zero_gradient_only_decays_accumulator() {
        let mut p = init_params(DIMS, 3);
        let before = p.clone();
        let mut state = RmsPropState::new(&p);
        state.accumulators.w_ix.fill(2.0);
        let cfg = TrainConfig::default();
        rmsprop_step(&mut p, &LstmParams::zeros(DIMS), &mut state, &cfg).unwrap();
        assert_eq!(p, before);
        assert!(state.accumulators.w_ix.iter().all(|&a| (a - 2.0 * cfg.rmsprop_decay).abs() < 1e-15));
    }

    #[test]
    fn first_step_arithmetic() {
        let mut p = [0.0];
        let mut a = [0.0];
        rmsprop_update(&mut p, &[1.0], &mut a, 0.01, 0.9, 1e-8);
        assert!((a[0] - 0.1).abs() < 1e-15);
        let expected = -0.01 / (0.1f64.sqrt() + 1e-8);
        assert!((p[0] - expected).abs() < 1e-15);
        assert!((p[0] + 0.031_62).abs() < 1e-5);
    }

    #[test]
    fn quadratic_loss_decreases_monotonically() {
        // L(w) = (w - 3)^2
        let mut w = [-2.0];
        let mut a = [0.0];
        let mut last = f64::INFINITY;
        for _ in 0..100 {
            let loss = (w[0] - 3.0f64).powi(2);
            assert!(loss < last);
            last = loss;
            let g = [2.0 * (w[0] - 3.0)];
            rmsprop_update(&mut w, &g, &mut a, 0.01, 0.9, 1e-8);
        }
        assert!(last < 25.0);
    }

    #[test]
    fn non_finite_gradient_is_rejected() {
        let mut p = init_params(DIMS, 3);
        let mut g = LstmParams::zeros(DIMS);
        g.b_o[1] = f64::NAN;
        let mut state = RmsPropState::new(&p);
        assert!(matches!(
            rmsprop_step(&mut p, &g, &mut state, &TrainConfig::default()),
            Err(LstmError::NonFinite(_))
        ));
    }

    #[test]
    fn clipping_caps_the_norm() {
        let mut g = LstmParams::zeros(DIMS);
        g.w_t.fill(4.0);
        let before = clip_global_norm(&mut g, 1.0);
        assert!((before - (3.0f64 * 16.0).sqrt()).abs() < 1e-12);
        let after: f64 = g.tensors().iter().flat_map(|t| t.iter()).map(|v| v * v).sum::<f64>().sqrt();
        assert!((after - 1.0).abs() < 1e-12);
    }
}
