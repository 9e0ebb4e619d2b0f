//! Sliding-window framing of decomposition channels into supervised samples.

use std::ops::Range;

use ndarray::{Array1, Array2};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum WindowError {
    #[error("no channels supplied")]
    NoChannels,
    #[error("channel {index} has length {len}, expected {expected}")]
    UnequalLengths {
        index: usize,
        len: usize,
        expected: usize,
    },
    #[error("series of length {len} is too short for lookback {lookback} and horizon {horizon}")]
    TooShort {
        len: usize,
        lookback: usize,
        horizon: usize,
    },
    #[error("lookback and horizon must be at least 1")]
    ZeroWindow,
    #[error("sample {sample}: window ends at {window_end} but target is at {target}")]
    Leakage {
        sample: usize,
        window_end: usize,
        target: usize,
    },
}

/// What each window predicts.
#[derive(Debug, Clone, PartialEq)]
pub enum WindowTarget {
    /// Sum of all channels at the target time (one output).
    Recombined,
    /// Every channel at the target time (one output per channel).
    PerChannel,
    /// An external series aligned with the channels (one output).
    Series(Vec<f64>),
}

/// Supervised `(window, target)` pairs. Window `k` holds samples
/// `window_starts[k] .. window_starts[k] + lookback` of every channel as a
/// `lookback x channels` matrix; its target sits at `index_map[k]`.
#[derive(Debug, Clone, PartialEq)]
pub struct WindowedDataset {
    pub inputs: Vec<Array2<f64>>,
    pub targets: Vec<Array1<f64>>,
    pub lookback: usize,
    pub channels: usize,
    pub horizon: usize,
    pub window_starts: Vec<usize>,
    pub index_map: Vec<usize>,
}

impl WindowedDataset {
    pub fn len(&self) -> usize {
        self.inputs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.inputs.is_empty()
    }

    pub fn output_size(&self) -> usize {
        self.targets.first().map_or(0, Array1::len)
    }

    pub fn window_range(&self, sample: usize) -> Range<usize> {
        let start = self.window_starts[sample];
        start..start + self.lookback
    }

    /// Samples whose target index falls in `targets`.
    pub fn subset(&self, targets: Range<usize>) -> WindowedDataset {
        let keep: Vec<usize> = (0..self.len())
            .filter(|&k| targets.contains(&self.index_map[k]))
            .collect();
        WindowedDataset {
            inputs: keep.iter().map(|&k| self.inputs[k].clone()).collect(),
            targets: keep.iter().map(|&k| self.targets[k].clone()).collect(),
            lookback: self.lookback,
            channels: self.channels,
            horizon: self.horizon,
            window_starts: keep.iter().map(|&k| self.window_starts[k]).collect(),
            index_map: keep.iter().map(|&k| self.index_map[k]).collect(),
        }
    }

    /// Every sample of every window strictly precedes that window's target.
    pub fn check_leakage_free(&self) -> Result<(), WindowError> {
        for k in 0..self.len() {
            let window_end = self.window_range(k).end;
            if window_end > self.index_map[k] {
                return Err(WindowError::Leakage {
                    sample: k,
                    window_end,
                    target: self.index_map[k],
                });
            }
        }
        Ok(())
    }
}

/// Frames `channels` into windows of `lookback` steps whose target is
/// `horizon` steps after the window's last sample.
pub fn make_windows(
    channels: &[Vec<f64>],
    lookback: usize,
    horizon: usize,
    target: WindowTarget,
) -> Result<WindowedDataset, WindowError> {
    let first = channels.first().ok_or(WindowError::NoChannels)?;
    if lookback == 0 || horizon == 0 {
        return Err(WindowError::ZeroWindow);
    }
    let len = first.len();
    for (index, c) in channels.iter().enumerate() {
        if c.len() != len {
            return Err(WindowError::UnequalLengths {
                index,
                len: c.len(),
                expected: len,
            });
        }
    }
    if let WindowTarget::Series(s) = &target {
        if s.len() != len {
            return Err(WindowError::UnequalLengths {
                index: channels.len(),
                len: s.len(),
                expected: len,
            });
        }
    }
    if len < lookback + horizon {
        return Err(WindowError::TooShort {
            len,
            lookback,
            horizon,
        });
    }
    let n_ch = channels.len();
    let count = len - lookback - horizon + 1;
    let mut inputs = Vec::with_capacity(count);
    let mut targets = Vec::with_capacity(count);
    let mut window_starts = Vec::with_capacity(count);
    let mut index_map = Vec::with_capacity(count);
    for start in 0..count {
        let t = start + lookback - 1 + horizon;
        inputs.push(Array2::from_shape_fn((lookback, n_ch), |(r, c)| {
            channels[c][start + r]
        }));
        targets.push(match &target {
            WindowTarget::Recombined => Array1::from_elem(1, channels.iter().map(|c| c[t]).sum()),
            WindowTarget::PerChannel => channels.iter().map(|c| c[t]).collect(),
            WindowTarget::Series(s) => Array1::from_elem(1, s[t]),
        });
        window_starts.push(start);
        index_map.push(t);
    }
    Ok(WindowedDataset {
        inputs,
        targets,
        lookback,
        channels: n_ch,
        horizon,
        window_starts,
        index_map,
    })
}
