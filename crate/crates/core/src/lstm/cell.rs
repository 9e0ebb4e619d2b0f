use ndarray::{Array1, Array2, Zip};

use super::{LstmError, LstmGradients, LstmParams, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct CellState {
    /// Cell state.
    pub s: Array1<f64>,
    /// Hidden state.
    pub h: Array1<f64>,
}

impl CellState {
    pub fn zeros(hidden_size: usize) -> Self {
        Self {
            s: Array1::zeros(hidden_size),
            h: Array1::zeros(hidden_size),
        }
    }
}

/// Intermediates of one step, kept for the backward pass.
#[derive(Debug, Clone)]
pub struct StepCache {
    pub x: Array1<f64>,
    pub h_prev: Array1<f64>,
    pub s_prev: Array1<f64>,
    pub i: Array1<f64>,
    pub f: Array1<f64>,
    pub o: Array1<f64>,
    pub g: Array1<f64>,
    pub s: Array1<f64>,
    pub tanh_s: Array1<f64>,
    pub h: Array1<f64>,
}

fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

fn gate(w_x: &Array2<f64>, w_h: &Array2<f64>, b: &Array1<f64>, x: &Array1<f64>, h: &Array1<f64>) -> Array1<f64> {
    w_x.dot(x) + w_h.dot(h) + b
}

/// One recurrent step:
///
/// ```text
/// i = σ(W_ix x + W_ih h + b_i)    f = σ(W_fx x + W_fh h + b_f)
/// o = σ(W_ox x + W_oh h + b_o)    g = tanh(W_cx x + W_ch h + b_c)
/// s' = f ∘ s + i ∘ g              h' = o ∘ tanh(s')
/// ```
pub fn cell_step(params: &LstmParams, x: &Array1<f64>, prev: &CellState) -> Result<(CellState, StepCache)> {
    let dims = params.dims();
    if x.len() != dims.input_size {
        return Err(LstmError::Shape(format!(
            "input has {} features, model expects {}",
            x.len(),
            dims.input_size
        )));
    }
    if prev.h.len() != dims.hidden_size || prev.s.len() != dims.hidden_size {
        return Err(LstmError::Shape(format!(
            "state has sizes ({}, {}), model hidden size is {}",
            prev.s.len(),
            prev.h.len(),
            dims.hidden_size
        )));
    }
    if x.iter().any(|v| !v.is_finite()) {
        return Err(LstmError::NonFinite("cell input".into()));
    }
    let h_prev = &prev.h;
    let i = gate(&params.w_ix, &params.w_ih, &params.b_i, x, h_prev).mapv_into(sigmoid);
    let f = gate(&params.w_fx, &params.w_fh, &params.b_f, x, h_prev).mapv_into(sigmoid);
    let o = gate(&params.w_ox, &params.w_oh, &params.b_o, x, h_prev).mapv_into(sigmoid);
    let g = gate(&params.w_cx, &params.w_ch, &params.b_c, x, h_prev).mapv_into(f64::tanh);
    let s = &f * &prev.s + &i * &g;
    let tanh_s = s.mapv(f64::tanh);
    let h = &o * &tanh_s;
    let next = CellState {
        s: s.clone(),
        h: h.clone(),
    };
    let cache = StepCache {
        x: x.clone(),
        h_prev: prev.h.clone(),
        s_prev: prev.s.clone(),
        i,
        f,
        o,
        g,
        s,
        tanh_s,
        h,
    };
    Ok((next, cache))
}

#[derive(Debug, Clone)]
pub struct ForwardPass {
    /// Projected output `W_t h_t` at every step.
    pub outputs: Vec<Array1<f64>>,
    pub final_state: CellState,
    pub caches: Vec<StepCache>,
}

pub fn forward(params: &LstmParams, sequence: &[Array1<f64>], initial: &CellState) -> Result<ForwardPass> {
    if sequence.is_empty() {
        return Err(LstmError::EmptySequence);
    }
    let mut state = initial.clone();
    let mut outputs = Vec::with_capacity(sequence.len());
    let mut caches = Vec::with_capacity(sequence.len());
    for x in sequence {
        let (next, cache) = cell_step(params, x, &state)?;
        outputs.push(params.w_t.dot(&next.h));
        caches.push(cache);
        state = next;
    }
    Ok(ForwardPass {
        outputs,
        final_state: state,
        caches,
    })
}

/// Mean over samples of the squared error averaged over output dimensions.
pub fn mse_loss(predictions: &[Array1<f64>], targets: &[Array1<f64>]) -> Result<f64> {
    if predictions.len() != targets.len() {
        return Err(LstmError::LengthMismatch(predictions.len(), targets.len()));
    }
    if predictions.is_empty() {
        return Err(LstmError::EmptySequence);
    }
    let mut total = 0.0;
    for (p, t) in predictions.iter().zip(targets) {
        if p.len() != t.len() {
            return Err(LstmError::LengthMismatch(p.len(), t.len()));
        }
        total += (p - t).mapv(|e| e * e).sum() / p.len() as f64;
    }
    Ok(total / predictions.len() as f64)
}

fn outer_acc(acc: &mut Array2<f64>, a: &Array1<f64>, b: &Array1<f64>) {
    for (r, &ar) in a.iter().enumerate() {
        if ar == 0.0 {
            continue;
        }
        let mut row = acc.row_mut(r);
        row.scaled_add(ar, b);
    }
}

/// Reverse-mode gradients of a loss with respect to every parameter, given
/// `d_outputs[t] = dL/dy_t` for each step of the matching forward pass.
pub fn backward(
    params: &LstmParams,
    caches: &[StepCache],
    d_outputs: &[Array1<f64>],
) -> Result<LstmGradients> {
    let mut grads = LstmParams::zeros(params.dims());
    backward_into(params, caches, d_outputs, &mut grads)?;
    Ok(grads)
}

/// As [`backward`], accumulating into `grads`.
pub(crate) fn backward_into(
    params: &LstmParams,
    caches: &[StepCache],
    d_outputs: &[Array1<f64>],
    grads: &mut LstmGradients,
) -> Result<()> {
    let dims = params.dims();
    if caches.len() != d_outputs.len() {
        return Err(LstmError::LengthMismatch(caches.len(), d_outputs.len()));
    }
    if grads.dims() != dims {
        return Err(LstmError::Shape("gradient buffer does not match params".into()));
    }
    for (c, dy) in caches.iter().zip(d_outputs) {
        if c.x.len() != dims.input_size || c.h.len() != dims.hidden_size {
            return Err(LstmError::Shape("cache was produced by a different model".into()));
        }
        if dy.len() != dims.output_size {
            return Err(LstmError::Shape(format!(
                "upstream gradient has {} entries, model outputs {}",
                dy.len(),
                dims.output_size
            )));
        }
    }

    let hidden = dims.hidden_size;
    let mut dh_next = Array1::<f64>::zeros(hidden);
    let mut ds_next = Array1::<f64>::zeros(hidden);
    for (c, dy) in caches.iter().zip(d_outputs).rev() {
        outer_acc(&mut grads.w_t, dy, &c.h);
        let dh = params.w_t.t().dot(dy) + &dh_next;

        let d_o = &dh * &c.tanh_s;
        let mut ds = ds_next.clone();
        Zip::from(&mut ds)
            .and(&dh)
            .and(&c.o)
            .and(&c.tanh_s)
            .for_each(|ds, &dh, &o, &ts| *ds += dh * o * (1.0 - ts * ts));

        let d_i = &ds * &c.g;
        let d_g = &ds * &c.i;
        let d_f = &ds * &c.s_prev;
        ds_next = &ds * &c.f;

        let dz_i = Zip::from(&d_i).and(&c.i).map_collect(|&d, &a| d * a * (1.0 - a));
        let dz_f = Zip::from(&d_f).and(&c.f).map_collect(|&d, &a| d * a * (1.0 - a));
        let dz_o = Zip::from(&d_o).and(&c.o).map_collect(|&d, &a| d * a * (1.0 - a));
        let dz_g = Zip::from(&d_g).and(&c.g).map_collect(|&d, &a| d * (1.0 - a * a));

        outer_acc(&mut grads.w_ix, &dz_i, &c.x);
        outer_acc(&mut grads.w_ih, &dz_i, &c.h_prev);
        grads.b_i += &dz_i;
        outer_acc(&mut grads.w_fx, &dz_f, &c.x);
        outer_acc(&mut grads.w_fh, &dz_f, &c.h_prev);
        grads.b_f += &dz_f;
        outer_acc(&mut grads.w_ox, &dz_o, &c.x);
        outer_acc(&mut grads.w_oh, &dz_o, &c.h_prev);
        grads.b_o += &dz_o;
        outer_acc(&mut grads.w_cx, &dz_g, &c.x);
        outer_acc(&mut grads.w_ch, &dz_g, &c.h_prev);
        grads.b_c += &dz_g;

        dh_next = params.w_ih.t().dot(&dz_i)
            + params.w_fh.t().dot(&dz_f)
            + params.w_oh.t().dot(&dz_o)
            + params.w_ch.t().dot(&dz_g);
    }
    Ok(())
}
