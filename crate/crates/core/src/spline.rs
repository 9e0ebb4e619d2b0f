//! Piecewise cubic interpolation through a set of knots.

use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum SplineError {
    #[error("need at least {needed} knots, got {got}")]
    TooFewKnots { needed: usize, got: usize },
    #[error("knot abscissae must be strictly increasing (index {0})")]
    NotIncreasing(usize),
    #[error("knot x and y lengths differ ({0} vs {1})")]
    LengthMismatch(usize, usize),
}

/// End condition of the spline.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum EndCondition {
    /// Second derivative is zero at both ends.
    #[default]
    Natural,
    /// Third derivative is continuous across the second and penultimate
    /// knots. Reproduces any cubic polynomial exactly; needs 4 knots.
    NotAKnot,
}

#[derive(Debug, Clone)]
pub struct CubicSpline {
    xs: Vec<f64>,
    ys: Vec<f64>,
    /// Second derivative at each knot.
    m: Vec<f64>,
}

impl CubicSpline {
    pub fn natural(xs: Vec<f64>, ys: Vec<f64>) -> Result<Self, SplineError> {
        Self::new(xs, ys, EndCondition::Natural)
    }

    pub fn new(xs: Vec<f64>, ys: Vec<f64>, end: EndCondition) -> Result<Self, SplineError> {
        if xs.len() != ys.len() {
            return Err(SplineError::LengthMismatch(xs.len(), ys.len()));
        }
        let n = xs.len();
        if n < 2 {
            return Err(SplineError::TooFewKnots { needed: 2, got: n });
        }
        if let Some(i) = (1..n).find(|&i| !(xs[i] > xs[i - 1])) {
            return Err(SplineError::NotIncreasing(i));
        }
        let m = match end {
            EndCondition::Natural => natural_second_derivatives(&xs, &ys),
            EndCondition::NotAKnot => {
                if n < 4 {
                    return Err(SplineError::TooFewKnots { needed: 4, got: n });
                }
                not_a_knot_second_derivatives(&xs, &ys)
            }
        };
        Ok(Self { xs, ys, m })
    }

    pub fn knots(&self) -> (&[f64], &[f64]) {
        (&self.xs, &self.ys)
    }

    fn eval_in(&self, k: usize, x: f64) -> f64 {
        let h = self.xs[k + 1] - self.xs[k];
        let a = (self.xs[k + 1] - x) / h;
        let b = (x - self.xs[k]) / h;
        a * self.ys[k]
            + b * self.ys[k + 1]
            + ((a * a * a - a) * self.m[k] + (b * b * b - b) * self.m[k + 1]) * h * h / 6.0
    }

    fn interval(&self, x: f64) -> usize {
        let n = self.xs.len();
        // partition_point gives the first knot strictly greater than x.
        let p = self.xs.partition_point(|&k| k <= x);
        p.saturating_sub(1).min(n - 2)
    }

    /// Evaluates the spline; outside the knot range the end polynomial is
    /// extended.
    pub fn eval(&self, x: f64) -> f64 {
        self.eval_in(self.interval(x), x)
    }

    /// Evaluates at every integer sample index `0..len`.
    pub fn eval_grid(&self, len: usize) -> Vec<f64> {
        let mut out = Vec::with_capacity(len);
        let mut k = self.interval(0.0);
        let last = self.xs.len() - 2;
        for i in 0..len {
            let x = i as f64;
            while k < last && self.xs[k + 1] <= x {
                k += 1;
            }
            out.push(self.eval_in(k, x));
        }
        out
    }
}

/// Solves a tridiagonal system in place (Thomas algorithm). `sub[0]` and
/// `sup[n-1]` are ignored.
fn solve_tridiagonal(sub: &[f64], diag: &mut [f64], sup: &[f64], rhs: &mut [f64]) {
    let n = diag.len();
    for i in 1..n {
        let w = sub[i] / diag[i - 1];
        diag[i] -= w * sup[i - 1];
        rhs[i] -= w * rhs[i - 1];
    }
    rhs[n - 1] /= diag[n - 1];
    for i in (0..n - 1).rev() {
        rhs[i] = (rhs[i] - sup[i] * rhs[i + 1]) / diag[i];
    }
}

fn slopes(xs: &[f64], ys: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let h: Vec<f64> = xs.windows(2).map(|w| w[1] - w[0]).collect();
    let d: Vec<f64> = ys
        .windows(2)
        .zip(&h)
        .map(|(w, h)| (w[1] - w[0]) / h)
        .collect();
    (h, d)
}

fn natural_second_derivatives(xs: &[f64], ys: &[f64]) -> Vec<f64> {
    let n = xs.len();
    let mut m = vec![0.0; n];
    if n < 3 {
        return m;
    }
    let (h, d) = slopes(xs, ys);
    let k = n - 2;
    let mut sub = vec![0.0; k];
    let mut diag = vec![0.0; k];
    let mut sup = vec![0.0; k];
    let mut rhs = vec![0.0; k];
    for j in 0..k {
        let i = j + 1;
        sub[j] = h[i - 1];
        diag[j] = 2.0 * (h[i - 1] + h[i]);
        sup[j] = h[i];
        rhs[j] = 6.0 * (d[i] - d[i - 1]);
    }
    solve_tridiagonal(&sub, &mut diag, &sup, &mut rhs);
    m[1..n - 1].copy_from_slice(&rhs);
    m
}

fn not_a_knot_second_derivatives(xs: &[f64], ys: &[f64]) -> Vec<f64> {
    let n = xs.len();
    let (h, d) = slopes(xs, ys);
    let mut sub = vec![0.0; n];
    let mut diag = vec![0.0; n];
    let mut sup = vec![0.0; n];
    let mut rhs = vec![0.0; n];
    for i in 1..n - 1 {
        sub[i] = h[i - 1];
        diag[i] = 2.0 * (h[i - 1] + h[i]);
        sup[i] = h[i];
        rhs[i] = 6.0 * (d[i] - d[i - 1]);
    }
    // Row 0: h1*M0 - (h0+h1)*M1 + h0*M2 = 0. Eliminate the M2 term with row 1.
    let c = h[0] / sup[1];
    diag[0] = h[1] - c * sub[1];
    sup[0] = -(h[0] + h[1]) - c * diag[1];
    rhs[0] = -c * rhs[1];
    // Last row mirrored: h[n-2]*M[n-3] - (h[n-3]+h[n-2])*M[n-2] + h[n-3]*M[n-1] = 0.
    let l = n - 1;
    let (ha, hb) = (h[n - 3], h[n - 2]);
    let c = hb / sub[l - 1];
    sub[l] = -(ha + hb) - c * diag[l - 1];
    diag[l] = ha - c * sup[l - 1];
    rhs[l] = -c * rhs[l - 1];
    solve_tridiagonal(&sub, &mut diag, &sup, &mut rhs);
    rhs
}
