//! Derived quantities: the excited-state coherence fraction, purity, and
//! peak-based resurgence metrics.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dynamics::TrajectoryRecord;
use crate::state::{DensityState, DIM};

type C64 = num_complex::Complex64;

/// Below this excited population the coherence fraction is undefined.
pub const POPULATION_FLOOR: f64 = 1e-15;

/// `C = |ρ12| / (ρ11 + ρ22)`, or `None` when `ρ11 + ρ22 < 1e-15`.
pub fn coherence_fraction(rho_11: f64, rho_22: f64, rho_12: C64) -> Option<f64> {
    let pop = rho_11 + rho_22;
    if pop < POPULATION_FLOOR {
        None
    } else {
        Some(rho_12.norm() / pop)
    }
}

/// `Tr(ρ²)`, evaluated as the squared Frobenius norm.
pub fn purity(state: &DensityState) -> f64 {
    let m = state.elements();
    let mut acc = 0.0;
    for row in m.iter().take(DIM) {
        for z in row.iter() {
            acc += z.norm_sqr();
        }
    }
    acc
}

#[derive(Debug, Error, PartialEq)]
pub enum ObservableError {
    #[error("window '{0}' must satisfy start < end")]
    InvalidWindow(String),
    #[error("windows '{0}' and '{1}' overlap")]
    OverlappingWindows(String, String),
    #[error("window '{label}' [{start}, {end}] lies outside the record [{t_start}, {t_end}]")]
    WindowOutOfGrid {
        label: String,
        start: f64,
        end: f64,
        t_start: f64,
        t_end: f64,
    },
    #[error("window '{0}' contains no samples")]
    EmptyWindow(String),
    #[error("window '{0}' contains only undefined samples")]
    AllSentinel(String),
    #[error("peak in reference window '{0}' is zero")]
    ZeroReference(String),
}

/// A labelled time interval `[start, end]` in fs.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PulseWindow {
    pub start: f64,
    pub end: f64,
    pub label: String,
}

impl PulseWindow {
    pub fn new(start: f64, end: f64, label: impl Into<String>) -> Self {
        PulseWindow {
            start,
            end,
            label: label.into(),
        }
    }

    fn overlaps(&self, other: &PulseWindow) -> bool {
        self.start < other.end && other.start < self.end
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Quantity {
    AbsRho12,
    C,
}

/// Largest value of `quantity` over the samples inside `window`, skipping
/// undefined coherence fractions.
pub fn window_peak(record: &TrajectoryRecord, window: &PulseWindow, quantity: Quantity) -> Result<f64, ObservableError> {
    if !(window.start < window.end) {
        return Err(ObservableError::InvalidWindow(window.label.clone()));
    }
    let g = &record.grid;
    if !(g.contains(window.start) && g.contains(window.end)) {
        return Err(ObservableError::WindowOutOfGrid {
            label: window.label.clone(),
            start: window.start,
            end: window.end,
            t_start: g.t_start,
            t_end: g.t_end,
        });
    }
    let first = ((window.start - g.t_start) / g.dt - 1e-9).ceil().max(0.0) as usize;
    let last = (((window.end - g.t_start) / g.dt + 1e-9).floor() as usize).min(g.n_steps);
    if first > last {
        return Err(ObservableError::EmptyWindow(window.label.clone()));
    }
    let peak = match quantity {
        Quantity::AbsRho12 => record.rho_12[first..=last]
            .iter()
            .map(|z| z.norm())
            .fold(f64::NEG_INFINITY, f64::max),
        Quantity::C => {
            let defined = record.c[first..=last].iter().flatten().copied();
            let peak = defined.fold(f64::NEG_INFINITY, f64::max);
            if peak == f64::NEG_INFINITY {
                return Err(ObservableError::AllSentinel(window.label.clone()));
            }
            peak
        }
    };
    Ok(peak)
}

/// `peak(quantity in w2) / peak(quantity in w1)`.
pub fn resurgence_gain(
    record: &TrajectoryRecord,
    w1: &PulseWindow,
    w2: &PulseWindow,
    quantity: Quantity,
) -> Result<f64, ObservableError> {
    for w in [w1, w2] {
        if !(w.start < w.end) {
            return Err(ObservableError::InvalidWindow(w.label.clone()));
        }
    }
    if w1.overlaps(w2) {
        return Err(ObservableError::OverlappingWindows(w1.label.clone(), w2.label.clone()));
    }
    let reference = window_peak(record, w1, quantity)?;
    let probe = window_peak(record, w2, quantity)?;
    if reference == 0.0 {
        return Err(ObservableError::ZeroReference(w1.label.clone()));
    }
    Ok(probe / reference)
}

/// Local maxima of `series` whose topographic prominence is at least
/// `min_rel_prominence` times their own height. NaN samples are skipped.
pub fn burst_peaks(series: &[f64], min_rel_prominence: f64) -> Vec<usize> {
    let idx: Vec<usize> = (0..series.len()).filter(|&i| !series[i].is_nan()).collect();
    let v: Vec<f64> = idx.iter().map(|&i| series[i]).collect();
    let n = v.len();
    let mut peaks = Vec::new();
    let mut i = 1;
    while i + 1 < n {
        if v[i] > v[i - 1] {
            // walk across a plateau
            let mut j = i;
            while j + 1 < n && v[j + 1] == v[i] {
                j += 1;
            }
            if j + 1 < n && v[j + 1] < v[i] {
                let h = v[i];
                let mut left_min = h;
                for k in (0..i).rev() {
                    if v[k] > h {
                        break;
                    }
                    left_min = left_min.min(v[k]);
                }
                let mut right_min = h;
                for &x in &v[j + 1..] {
                    if x > h {
                        break;
                    }
                    right_min = right_min.min(x);
                }
                let prominence = h - left_min.max(right_min);
                if h > 0.0 && prominence >= min_rel_prominence * h {
                    peaks.push(idx[i]);
                }
            }
            i = j + 1;
        } else {
            i += 1;
        }
    }
    peaks
}

/// Number of [`burst_peaks`].
pub fn count_bursts(series: &[f64], min_rel_prominence: f64) -> usize {
    burst_peaks(series, min_rel_prominence).len()
}
