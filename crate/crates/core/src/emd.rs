//! Empirical Mode Decomposition.
//!
//! A signal is split into intrinsic mode functions (IMFs) by repeated
//! sifting: subtract the mean of the cubic-spline envelopes through the local
//! maxima and minima until the candidate oscillates symmetrically about
//! zero. Each accepted IMF is removed from the running residue, and the
//! process repeats until the residue is monotone-like or the IMF budget is
//! spent. The IMFs plus the final residue always sum back to the input.

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::spline::{CubicSpline, SplineError};

#[derive(Debug, Error)]
pub enum EmdError {
    #[error("series too short: need at least {needed} samples, got {got}")]
    TooShort { needed: usize, got: usize },
    #[error("non-finite sample at index {0}")]
    NonFinite(usize),
    #[error("insufficient extrema ({maxima} maxima, {minima} minima): candidate is a residue")]
    InsufficientExtrema { maxima: usize, minima: usize },
    #[error("envelope: {0}")]
    Spline(#[from] SplineError),
    #[error("invalid sift config: {0}")]
    Config(String),
    #[error("imf csv: {0}")]
    Csv(String),
}

pub type Result<T> = std::result::Result<T, EmdError>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BoundaryPolicy {
    /// Reflect the two extrema nearest each end, about the end extremum or
    /// the end sample.
    #[default]
    Mirror,
    /// Use the end sample itself as an extra knot.
    Clamp,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SiftConfig {
    pub max_imfs: usize,
    pub max_sift_iterations: usize,
    /// Threshold on `sum((h_prev - h)^2) / sum(h_prev^2)`.
    pub sd_threshold: f64,
    /// Upper bound on the interior RMS of a candidate's envelope mean,
    /// relative to the candidate's own interior RMS.
    pub envelope_tolerance: f64,
    pub boundary_policy: BoundaryPolicy,
}

impl Default for SiftConfig {
    fn default() -> Self {
        Self {
            max_imfs: 7,
            max_sift_iterations: 50,
            sd_threshold: 0.2,
            envelope_tolerance: 0.1,
            boundary_policy: BoundaryPolicy::Mirror,
        }
    }
}

impl SiftConfig {
    pub fn validate(&self) -> Result<()> {
        if self.max_imfs < 1 {
            return Err(EmdError::Config("max_imfs must be at least 1".into()));
        }
        if self.max_sift_iterations < 1 {
            return Err(EmdError::Config("max_sift_iterations must be at least 1".into()));
        }
        if !(self.sd_threshold > 0.0) || !(self.envelope_tolerance > 0.0) {
            return Err(EmdError::Config("thresholds must be positive".into()));
        }
        Ok(())
    }
}

/// Local extrema as `(index, value)` pairs in index order.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Extrema {
    pub maxima: Vec<(usize, f64)>,
    pub minima: Vec<(usize, f64)>,
}

impl Extrema {
    pub fn count(&self) -> usize {
        self.maxima.len() + self.minima.len()
    }
}

/// Strict interior extrema. A flat run bounded by lower (higher) samples on
/// both sides counts once as a maximum (minimum) at its midpoint.
pub fn find_extrema(values: &[f64]) -> Result<Extrema> {
    let n = values.len();
    if n < 3 {
        return Err(EmdError::TooShort { needed: 3, got: n });
    }
    let mut ext = Extrema::default();
    let mut i = 1;
    while i < n - 1 {
        let left = values[i - 1];
        let v = values[i];
        if v == left {
            i += 1;
            continue;
        }
        // Walk to the end of any plateau starting at i.
        let mut j = i;
        while j + 1 < n && values[j + 1] == v {
            j += 1;
        }
        if j + 1 >= n {
            break;
        }
        let right = values[j + 1];
        let mid = (i + j) / 2;
        if v > left && v > right {
            ext.maxima.push((mid, v));
        } else if v < left && v < right {
            ext.minima.push((mid, v));
        }
        i = j + 1;
    }
    Ok(ext)
}

/// Sign changes between consecutive non-zero samples; exact zeros are
/// skipped, so `[1, 0, -1]` counts once.
pub fn count_zero_crossings(values: &[f64]) -> usize {
    let mut prev: Option<bool> = None;
    let mut count = 0;
    for &v in values {
        if v == 0.0 {
            continue;
        }
        let pos = v > 0.0;
        if let Some(p) = prev {
            if p != pos {
                count += 1;
            }
        }
        prev = Some(pos);
    }
    count
}

/// Number of extrema and zero crossings differ by at most one.
pub fn satisfies_count_condition(values: &[f64]) -> bool {
    match find_extrema(values) {
        Ok(ext) => ext.count().abs_diff(count_zero_crossings(values)) <= 1,
        Err(_) => false,
    }
}

/// Natural cubic spline through `extrema` (augmented at both ends according
/// to `boundary_policy`), evaluated at every sample index of `values`.
pub fn envelope(
    values: &[f64],
    extrema: &[(usize, f64)],
    boundary_policy: BoundaryPolicy,
) -> Result<Vec<f64>> {
    let n = values.len();
    let mut xs = Vec::with_capacity(extrema.len() + 4);
    let mut ys = Vec::with_capacity(extrema.len() + 4);
    match boundary_policy {
        BoundaryPolicy::Mirror if !extrema.is_empty() => {
            let last = (n - 1) as f64;
            for &(i, v) in extrema.iter().take(2).rev() {
                if i > 0 {
                    xs.push(-(i as f64));
                    ys.push(v);
                }
            }
            for &(i, v) in extrema {
                xs.push(i as f64);
                ys.push(v);
            }
            for &(i, v) in extrema.iter().rev().take(2) {
                if i < n - 1 {
                    xs.push(2.0 * last - i as f64);
                    ys.push(v);
                }
            }
        }
        _ => {
            let first_is_knot = extrema.first().is_some_and(|e| e.0 == 0);
            let last_is_knot = extrema.last().is_some_and(|e| e.0 == n - 1);
            if n > 0 && !first_is_knot {
                xs.push(0.0);
                ys.push(values[0]);
            }
            for &(i, v) in extrema {
                xs.push(i as f64);
                ys.push(v);
            }
            if n > 1 && !last_is_knot {
                xs.push((n - 1) as f64);
                ys.push(values[n - 1]);
            }
        }
    }
    let spline = CubicSpline::natural(xs, ys)?;
    Ok(spline.eval_grid(n))
}

/// Upper envelope, lower envelope and their pointwise mean.
#[derive(Debug, Clone)]
pub struct Envelopes {
    pub upper: Vec<f64>,
    pub lower: Vec<f64>,
    pub mean: Vec<f64>,
}

pub fn envelopes(values: &[f64], boundary_policy: BoundaryPolicy) -> Result<Envelopes> {
    let ext = find_extrema(values)?;
    if ext.maxima.is_empty() || ext.minima.is_empty() || ext.count() < 2 {
        return Err(EmdError::InsufficientExtrema {
            maxima: ext.maxima.len(),
            minima: ext.minima.len(),
        });
    }
    let (upper, lower) = match boundary_policy {
        BoundaryPolicy::Mirror => {
            let (up_knots, low_knots) = mirror_knots(values, &ext);
            (spline_through(up_knots, values.len())?, spline_through(low_knots, values.len())?)
        }
        BoundaryPolicy::Clamp => (
            envelope(values, &ext.maxima, boundary_policy)?,
            envelope(values, &ext.minima, boundary_policy)?,
        ),
    };
    let mean = upper.iter().zip(&lower).map(|(u, l)| 0.5 * (u + l)).collect();
    Ok(Envelopes { upper, lower, mean })
}

fn spline_through(mut knots: Vec<(f64, f64)>, n: usize) -> Result<Vec<f64>> {
    knots.sort_by(|a, b| a.0.total_cmp(&b.0));
    knots.dedup_by(|a, b| a.0 == b.0);
    let (xs, ys) = knots.into_iter().unzip();
    Ok(CubicSpline::natural(xs, ys)?.eval_grid(n))
}

/// Source indices of the mirrored maxima and minima at the left end, and
/// the index they are reflected about.
///
/// Reflect about the first extremum when the end sample lies inside the
/// first extremum pair; otherwise reflect about the end sample, which then
/// also serves as a knot. Falls back to the end sample when the reflected
/// knots would not reach past the end.
fn left_mirror(value: impl Fn(usize) -> f64, mx: &[usize], mn: &[usize]) -> (Vec<usize>, Vec<usize>, usize) {
    let head = |v: &[usize], from: usize, to: usize| v[from.min(v.len())..to.min(v.len())].to_vec();
    let (mut lmax, mut lmin, mut sym) = if mx[0] < mn[0] {
        if value(0) > value(mn[0]) {
            (head(mx, 1, 3), head(mn, 0, 2), mx[0])
        } else {
            let mut lmin = head(mn, 0, 1);
            lmin.push(0);
            (head(mx, 0, 2), lmin, 0)
        }
    } else if value(0) < value(mx[0]) {
        (head(mx, 0, 2), head(mn, 1, 3), mn[0])
    } else {
        let mut lmax = head(mx, 0, 1);
        lmax.push(0);
        (lmax, head(mn, 0, 2), 0)
    };
    // The reflection of the farthest source index is the leftmost knot.
    let reaches = |v: &[usize], sym: usize| v.iter().any(|&i| i >= 2 * sym);
    if sym > 0 && !(reaches(&lmax, sym) && reaches(&lmin, sym)) {
        if sym == mx[0] {
            lmax = head(mx, 0, 2);
        } else {
            lmin = head(mn, 0, 2);
        }
        sym = 0;
    }
    (lmax, lmin, sym)
}

/// Envelope knots (upper, lower) with two reflected extrema added at each end.
fn mirror_knots(values: &[f64], ext: &Extrema) -> (Vec<(f64, f64)>, Vec<(f64, f64)>) {
    let last = values.len() - 1;
    let mx: Vec<usize> = ext.maxima.iter().map(|e| e.0).collect();
    let mn: Vec<usize> = ext.minima.iter().map(|e| e.0).collect();
    let mut upper: Vec<(f64, f64)> = ext.maxima.iter().map(|&(i, v)| (i as f64, v)).collect();
    let mut lower: Vec<(f64, f64)> = ext.minima.iter().map(|&(i, v)| (i as f64, v)).collect();

    let (lmax, lmin, sym) = left_mirror(|i| values[i], &mx, &mn);
    let at = |i: usize, sym: usize| ((2 * sym) as f64 - i as f64, values[i]);
    upper.extend(lmax.iter().map(|&i| at(i, sym)));
    lower.extend(lmin.iter().map(|&i| at(i, sym)));

    // The right end is the left end of the reversed series.
    let rev = |v: &[usize]| v.iter().rev().map(|&i| last - i).collect::<Vec<_>>();
    let (rmax, rmin, sym) = left_mirror(|j| values[last - j], &rev(&mx), &rev(&mn));
    let at = |j: usize| (last as f64 - ((2 * sym) as f64 - j as f64), values[last - j]);
    upper.extend(rmax.iter().map(|&j| at(j)));
    lower.extend(rmin.iter().map(|&j| at(j)));
    (upper, lower)
}

/// One sifting pass: `h_next = h - mean(upper, lower)`.
#[derive(Debug, Clone)]
pub struct SiftStep {
    pub next: Vec<f64>,
    pub envelope_mean: Vec<f64>,
}

pub fn sift_once(h: &[f64], config: &SiftConfig) -> Result<SiftStep> {
    let env = envelopes(h, config.boundary_policy)?;
    let next = h.iter().zip(&env.mean).map(|(a, m)| a - m).collect();
    Ok(SiftStep {
        next,
        envelope_mean: env.mean,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Imf {
    pub values: Vec<f64>,
    /// 1-based extraction order.
    pub index: usize,
    pub sift_iterations: usize,
    /// False when sifting stopped at `max_sift_iterations` (or ran out of
    /// extrema) without meeting the stopping rule; the values are the best
    /// candidate reached.
    pub converged: bool,
}

fn sum_sq(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum()
}

/// Central 80% of `0..len`, away from spline end effects.
pub fn interior(len: usize) -> std::ops::Range<usize> {
    len / 10..len - len / 10
}

/// RMS of the envelope mean over RMS of the candidate, both on the interior.
pub fn envelope_mean_ratio(candidate: &[f64], envelope_mean: &[f64]) -> f64 {
    let r = interior(candidate.len());
    let h = sum_sq(&candidate[r.clone()]);
    if h == 0.0 {
        return 0.0;
    }
    (sum_sq(&envelope_mean[r]) / h).sqrt()
}

/// Sifts `r` until the candidate passes the count condition and the
/// successive-sift SD falls below `sd_threshold`.
pub fn extract_imf(r: &[f64], config: &SiftConfig) -> Result<Imf> {
    extract_imf_indexed(r, config, 1)
}

fn extract_imf_indexed(r: &[f64], config: &SiftConfig, index: usize) -> Result<Imf> {
    let mut h = r.to_vec();
    let mut converged = false;
    let mut iterations = 0;
    // SD of the sift that produced the current candidate.
    let mut last_sd = f64::INFINITY;
    loop {
        let step = match sift_once(&h, config) {
            Ok(step) => step,
            Err(EmdError::InsufficientExtrema { .. }) if iterations > 0 => break,
            Err(e) => return Err(e),
        };
        if iterations > 0
            && last_sd < config.sd_threshold
            && envelope_mean_ratio(&h, &step.envelope_mean) < config.envelope_tolerance
            && satisfies_count_condition(&h)
        {
            converged = true;
            break;
        }
        if iterations == config.max_sift_iterations {
            break;
        }
        let denom = sum_sq(&h);
        last_sd = if denom > 0.0 {
            sum_sq(&step.envelope_mean) / denom
        } else {
            0.0
        };
        h = step.next;
        iterations += 1;
    }
    Ok(Imf {
        values: h,
        index,
        sift_iterations: iterations,
        converged,
    })
}

/// IMFs (highest frequency first) plus the final residue.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImfSet {
    pub imfs: Vec<Imf>,
    pub residue: Vec<f64>,
    pub source_length: usize,
}

impl ImfSet {
    pub fn len(&self) -> usize {
        self.imfs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.imfs.is_empty()
    }

    /// Sum of all IMFs and the residue.
    pub fn reconstruct(&self) -> Vec<f64> {
        let mut out = self.residue.clone();
        for imf in &self.imfs {
            for (o, v) in out.iter_mut().zip(&imf.values) {
                *o += v;
            }
        }
        out
    }

    /// IMFs followed by the residue.
    pub fn channels(&self) -> Vec<Vec<f64>> {
        self.imfs
            .iter()
            .map(|i| i.values.clone())
            .chain(std::iter::once(self.residue.clone()))
            .collect()
    }

    /// Writes `timestamp,imf1..imfN,residue` with 17 significant digits.
    pub fn write_csv<W: Write>(&self, writer: W, timestamps: &[i64]) -> Result<()> {
        if timestamps.len() != self.source_length {
            return Err(EmdError::Csv(format!(
                "{} timestamps for {} samples",
                timestamps.len(),
                self.source_length
            )));
        }
        let mut w = csv::Writer::from_writer(writer);
        let mut header = vec!["timestamp".to_string()];
        header.extend((1..=self.imfs.len()).map(|i| format!("imf{i}")));
        header.push("residue".into());
        w.write_record(&header).map_err(|e| EmdError::Csv(e.to_string()))?;
        for (t, ts) in timestamps.iter().enumerate() {
            let mut row = vec![ts.to_string()];
            row.extend(self.imfs.iter().map(|imf| format!("{:.16e}", imf.values[t])));
            row.push(format!("{:.16e}", self.residue[t]));
            w.write_record(&row).map_err(|e| EmdError::Csv(e.to_string()))?;
        }
        w.flush().map_err(|e| EmdError::Csv(e.to_string()))?;
        Ok(())
    }

    /// Reads the format written by [`ImfSet::write_csv`]. Sift metadata is
    /// not stored, so IMFs come back with `sift_iterations = 0` and
    /// `converged = true`.
    pub fn read_csv<R: Read>(reader: R) -> Result<(Self, Vec<i64>)> {
        let csv_err = |e: csv::Error| EmdError::Csv(e.to_string());
        let mut r = csv::Reader::from_reader(reader);
        let header = r.headers().map_err(csv_err)?.clone();
        let cols = header.len();
        if cols < 2 || &header[0] != "timestamp" || &header[cols - 1] != "residue" {
            return Err(EmdError::Csv("expected timestamp,imf1..imfN,residue".into()));
        }
        let n_imfs = cols - 2;
        let mut timestamps = Vec::new();
        let mut imfs = vec![Vec::new(); n_imfs];
        let mut residue = Vec::new();
        for row in r.records() {
            let row = row.map_err(csv_err)?;
            let parse = |i: usize| -> Result<f64> {
                row[i]
                    .parse()
                    .map_err(|_| EmdError::Csv(format!("bad number `{}`", &row[i])))
            };
            timestamps.push(
                row[0]
                    .parse()
                    .map_err(|_| EmdError::Csv(format!("bad timestamp `{}`", &row[0])))?,
            );
            for (k, imf) in imfs.iter_mut().enumerate() {
                imf.push(parse(k + 1)?);
            }
            residue.push(parse(cols - 1)?);
        }
        let set = ImfSet {
            imfs: imfs
                .into_iter()
                .enumerate()
                .map(|(k, values)| Imf {
                    values,
                    index: k + 1,
                    sift_iterations: 0,
                    converged: true,
                })
                .collect(),
            source_length: residue.len(),
            residue,
        };
        Ok((set, timestamps))
    }
}

pub const MIN_EMD_LENGTH: usize = 8;

/// Decomposition stops once the residue has fewer extrema than this.
pub const MIN_RESIDUE_EXTREMA: usize = 3;

/// Full decomposition of `series`.
pub fn emd(series: &[f64], config: &SiftConfig) -> Result<ImfSet> {
    config.validate()?;
    if series.len() < MIN_EMD_LENGTH {
        return Err(EmdError::TooShort {
            needed: MIN_EMD_LENGTH,
            got: series.len(),
        });
    }
    if let Some(i) = series.iter().position(|v| !v.is_finite()) {
        return Err(EmdError::NonFinite(i));
    }
    let mut residue = series.to_vec();
    let mut imfs = Vec::new();
    while imfs.len() < config.max_imfs {
        // One maximum and one minimum are not a full oscillation; their
        // envelopes are flat and would peel a trend off as an IMF.
        if find_extrema(&residue)?.count() < MIN_RESIDUE_EXTREMA {
            break;
        }
        let imf = match extract_imf_indexed(&residue, config, imfs.len() + 1) {
            Ok(imf) => imf,
            Err(EmdError::InsufficientExtrema { .. }) => break,
            Err(e) => return Err(e),
        };
        for (r, c) in residue.iter_mut().zip(&imf.values) {
            *r -= c;
        }
        imfs.push(imf);
    }
    Ok(ImfSet {
        imfs,
        residue,
        source_length: series.len(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn extrema_small_cases() {
        let e = find_extrema(&[0.0, 1.0, 0.0]).unwrap();
        assert_eq!(e.maxima, vec![(1, 1.0)]);
        assert!(e.minima.is_empty());
        assert_eq!(find_extrema(&[1.0, 2.0, 3.0, 4.0]).unwrap().count(), 0);
        assert!(matches!(
            find_extrema(&[1.0, 2.0]),
            Err(EmdError::TooShort { .. })
        ));
    }

    #[test]
    fn plateau_counts_once_at_midpoint() {
        let e = find_extrema(&[0.0, 2.0, 2.0, 2.0, 2.0, 0.0, -1.0, -1.0, 0.0]).unwrap();
        assert_eq!(e.maxima, vec![(2, 2.0)]);
        assert_eq!(e.minima, vec![(6, -1.0)]);
        // A step is not an extremum.
        assert_eq!(find_extrema(&[0.0, 1.0, 1.0, 2.0]).unwrap().count(), 0);
    }

    #[test]
    fn zero_crossings() {
        assert_eq!(count_zero_crossings(&[1.0, -1.0, 1.0]), 2);
        assert_eq!(count_zero_crossings(&[1.0, 2.0, 3.0]), 0);
        assert_eq!(count_zero_crossings(&[1.0, 0.0, -1.0]), 1);
        assert_eq!(count_zero_crossings(&[1.0, 0.0, 1.0]), 0);
        assert_eq!(count_zero_crossings(&[0.0]), 0);
    }

    #[test]
    fn envelope_with_two_knots_is_a_line() {
        // Clamp adds the end samples; they sit on the same line y = x / 2.
        let mut values = vec![0.0; 11];
        values[10] = 5.0;
        let env = envelope(&values, &[(2, 1.0), (8, 4.0)], BoundaryPolicy::Clamp).unwrap();
        for (i, v) in env.iter().enumerate() {
            assert!((v - 0.5 * i as f64).abs() < 1e-12);
        }
        // Mirrored single extremum on each side still yields a usable spline.
        let env = envelope(&values, &[(5, 2.0)], BoundaryPolicy::Mirror).unwrap();
        assert!(env.iter().all(|v| (v - 2.0).abs() < 1e-12));
    }

    #[test]
    fn envelope_passes_through_its_extrema() {
        let x: Vec<f64> = (0..200).map(|i| (i as f64 * 0.3).sin() + 0.1 * (i as f64 * 1.7).cos()).collect();
        let ext = find_extrema(&x).unwrap();
        for policy in [BoundaryPolicy::Mirror, BoundaryPolicy::Clamp] {
            let up = envelope(&x, &ext.maxima, policy).unwrap();
            for &(i, v) in &ext.maxima {
                assert!((up[i] - v).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn sift_once_needs_both_extrema_kinds() {
        let x = [0.0, 1.0, 3.0, 5.0, 4.0, 3.5, 3.0, 2.0];
        assert!(matches!(
            sift_once(&x, &SiftConfig::default()),
            Err(EmdError::InsufficientExtrema { maxima: 1, minima: 0 })
        ));
    }

    #[test]
    fn sine_with_offset_sifts_to_sine() {
        let n = 400;
        let sine: Vec<f64> = (0..n).map(|i| (2.0 * PI * i as f64 / 40.0).sin()).collect();
        let shifted: Vec<f64> = sine.iter().map(|v| v + 3.0).collect();
        let step = sift_once(&shifted, &SiftConfig::default()).unwrap();
        let lo = n / 10;
        let hi = n - n / 10;
        for t in lo..hi {
            assert!((step.envelope_mean[t] - 3.0).abs() < 0.02);
            assert!((step.next[t] - sine[t]).abs() < 0.02);
        }
    }

    #[test]
    fn ramp_has_no_imf() {
        let ramp: Vec<f64> = (0..50).map(|i| i as f64).collect();
        assert!(matches!(
            extract_imf(&ramp, &SiftConfig::default()),
            Err(EmdError::InsufficientExtrema { .. })
        ));
    }

    #[test]
    fn constant_series_is_all_residue() {
        let x = vec![2.5; 32];
        let set = emd(&x, &SiftConfig::default()).unwrap();
        assert!(set.is_empty());
        assert_eq!(set.residue, x);
    }

    #[test]
    fn emd_input_errors() {
        let cfg = SiftConfig::default();
        assert!(matches!(emd(&[1.0; 7], &cfg), Err(EmdError::TooShort { .. })));
        let mut x = vec![0.0; 20];
        x[4] = f64::NAN;
        assert!(matches!(emd(&x, &cfg), Err(EmdError::NonFinite(4))));
        let bad = SiftConfig {
            max_imfs: 0,
            ..cfg
        };
        assert!(matches!(emd(&[0.0; 20], &bad), Err(EmdError::Config(_))));
    }

    #[test]
    fn csv_round_trip_is_bit_exact() {
        let x: Vec<f64> = (0..64).map(|i| (i as f64 * 0.7).sin() * 1e3 + i as f64 / 3.0).collect();
        let set = emd(&x, &SiftConfig::default()).unwrap();
        let ts: Vec<i64> = (0..64).map(|i| 1_500_000_000 + 14400 * i).collect();
        let mut buf = Vec::new();
        set.write_csv(&mut buf, &ts).unwrap();
        let (back, ts_back) = ImfSet::read_csv(buf.as_slice()).unwrap();
        assert_eq!(ts_back, ts);
        assert_eq!(back.residue, set.residue);
        for (a, b) in back.imfs.iter().zip(&set.imfs) {
            assert_eq!(a.values, b.values);
        }
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("timestamp,imf1,"));
    }
}
