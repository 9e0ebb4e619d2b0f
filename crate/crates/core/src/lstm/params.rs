use ndarray::{Array1, Array2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Dims {
    pub input_size: usize,
    pub hidden_size: usize,
    pub output_size: usize,
}

/// Weights of the input (`i`), forget (`f`) and output (`o`) gates, the
/// tanh candidate (`c`), and the output projection `w_t`. `*_x` matrices are
/// `hidden x input`, `*_h` are `hidden x hidden`, `w_t` is
/// `output x hidden`.
#[derive(Debug, Clone, PartialEq)]
pub struct LstmParams {
    pub w_ix: Array2<f64>,
    pub w_ih: Array2<f64>,
    pub b_i: Array1<f64>,
    pub w_fx: Array2<f64>,
    pub w_fh: Array2<f64>,
    pub b_f: Array1<f64>,
    pub w_ox: Array2<f64>,
    pub w_oh: Array2<f64>,
    pub b_o: Array1<f64>,
    pub w_cx: Array2<f64>,
    pub w_ch: Array2<f64>,
    pub b_c: Array1<f64>,
    pub w_t: Array2<f64>,
}

/// Gradients share the parameter layout.
pub type LstmGradients = LstmParams;

pub const TENSOR_NAMES: [&str; 13] = [
    "w_ix", "w_ih", "b_i", "w_fx", "w_fh", "b_f", "w_ox", "w_oh", "b_o", "w_cx", "w_ch", "b_c",
    "w_t",
];

impl LstmParams {
    pub fn zeros(dims: Dims) -> Self {
        let Dims {
            input_size: i,
            hidden_size: h,
            output_size: o,
        } = dims;
        Self {
            w_ix: Array2::zeros((h, i)),
            w_ih: Array2::zeros((h, h)),
            b_i: Array1::zeros(h),
            w_fx: Array2::zeros((h, i)),
            w_fh: Array2::zeros((h, h)),
            b_f: Array1::zeros(h),
            w_ox: Array2::zeros((h, i)),
            w_oh: Array2::zeros((h, h)),
            b_o: Array1::zeros(h),
            w_cx: Array2::zeros((h, i)),
            w_ch: Array2::zeros((h, h)),
            b_c: Array1::zeros(h),
            w_t: Array2::zeros((o, h)),
        }
    }

    pub fn dims(&self) -> Dims {
        Dims {
            input_size: self.w_ix.ncols(),
            hidden_size: self.w_ix.nrows(),
            output_size: self.w_t.nrows(),
        }
    }

    /// Expected shape of each tensor, in [`TENSOR_NAMES`] order.
    pub fn shapes(dims: Dims) -> [Vec<usize>; 13] {
        let (i, h, o) = (dims.input_size, dims.hidden_size, dims.output_size);
        let gate = || [vec![h, i], vec![h, h], vec![h]];
        let [a, b, c] = gate();
        let [d, e, f] = gate();
        let [g, k, l] = gate();
        let [m, n, p] = gate();
        [a, b, c, d, e, f, g, k, l, m, n, p, vec![o, h]]
    }

    /// Checks every tensor against the shapes implied by `w_ix` and `w_t`.
    pub fn check_shapes(&self) -> Result<(), String> {
        let expected = Self::shapes(self.dims());
        for ((name, shape), want) in TENSOR_NAMES.iter().zip(self.raw_shapes()).zip(expected) {
            if shape != want {
                return Err(format!("{name} has shape {shape:?}, expected {want:?}"));
            }
        }
        Ok(())
    }

    fn raw_shapes(&self) -> [Vec<usize>; 13] {
        [
            self.w_ix.shape().to_vec(),
            self.w_ih.shape().to_vec(),
            self.b_i.shape().to_vec(),
            self.w_fx.shape().to_vec(),
            self.w_fh.shape().to_vec(),
            self.b_f.shape().to_vec(),
            self.w_ox.shape().to_vec(),
            self.w_oh.shape().to_vec(),
            self.b_o.shape().to_vec(),
            self.w_cx.shape().to_vec(),
            self.w_ch.shape().to_vec(),
            self.b_c.shape().to_vec(),
            self.w_t.shape().to_vec(),
        ]
    }

    /// Row-major views of all tensors in [`TENSOR_NAMES`] order.
    pub fn tensors(&self) -> [&[f64]; 13] {
        fn s2(a: &Array2<f64>) -> &[f64] {
            a.as_slice().expect("parameter tensors are kept in standard layout")
        }
        fn s1(a: &Array1<f64>) -> &[f64] {
            a.as_slice().expect("parameter tensors are kept in standard layout")
        }
        [
            s2(&self.w_ix),
            s2(&self.w_ih),
            s1(&self.b_i),
            s2(&self.w_fx),
            s2(&self.w_fh),
            s1(&self.b_f),
            s2(&self.w_ox),
            s2(&self.w_oh),
            s1(&self.b_o),
            s2(&self.w_cx),
            s2(&self.w_ch),
            s1(&self.b_c),
            s2(&self.w_t),
        ]
    }

    pub fn tensors_mut(&mut self) -> [&mut [f64]; 13] {
        fn s2(a: &mut Array2<f64>) -> &mut [f64] {
            a.as_slice_mut().expect("parameter tensors are kept in standard layout")
        }
        fn s1(a: &mut Array1<f64>) -> &mut [f64] {
            a.as_slice_mut().expect("parameter tensors are kept in standard layout")
        }
        [
            s2(&mut self.w_ix),
            s2(&mut self.w_ih),
            s1(&mut self.b_i),
            s2(&mut self.w_fx),
            s2(&mut self.w_fh),
            s1(&mut self.b_f),
            s2(&mut self.w_ox),
            s2(&mut self.w_oh),
            s1(&mut self.b_o),
            s2(&mut self.w_cx),
            s2(&mut self.w_ch),
            s1(&mut self.b_c),
            s2(&mut self.w_t),
        ]
    }

    pub fn num_params(&self) -> usize {
        self.tensors().iter().map(|t| t.len()).sum()
    }

    pub fn is_finite(&self) -> bool {
        self.tensors().iter().all(|t| t.iter().all(|v| v.is_finite()))
    }

    /// `self += scale * other`, tensor by tensor.
    pub fn add_scaled(&mut self, other: &LstmParams, scale: f64) {
        for (dst, src) in self.tensors_mut().into_iter().zip(other.tensors()) {
            for (d, s) in dst.iter_mut().zip(src) {
                *d += scale * s;
            }
        }
    }
}

/// Uniform weights in `[-k, k]` with `k = 1/sqrt(hidden_size)`; biases are
/// zero except the forget-gate bias, which starts at 1.
pub fn init_params(dims: Dims, seed: u64) -> LstmParams {
    let mut p = LstmParams::zeros(dims);
    let k = 1.0 / (dims.hidden_size.max(1) as f64).sqrt();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for m in [
        &mut p.w_ix,
        &mut p.w_ih,
        &mut p.w_fx,
        &mut p.w_fh,
        &mut p.w_ox,
        &mut p.w_oh,
        &mut p.w_cx,
        &mut p.w_ch,
        &mut p.w_t,
    ] {
        m.mapv_inplace(|_| rng.random_range(-k..=k));
    }
    p.b_f.fill(1.0);
    p
}
