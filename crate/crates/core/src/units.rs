//! Unit conventions.
//!
//! Time is measured in femtoseconds and every rate or frequency handed to the
//! dynamics is an angular frequency in rad/fs. Values quoted as THz or GHz are
//! ordinary frequencies and pass through `ω = 2πf` exactly once, here.

use std::f64::consts::PI;

// 1 THz = 1e-3 cycles/fs
const THZ_TO_PER_FS: f64 = 1e-3;
const GHZ_TO_PER_FS: f64 = 1e-6;

/// Ordinary frequency in THz to angular frequency in rad/fs.
pub fn thz_to_rad_per_fs(f_thz: f64) -> f64 {
    2.0 * PI * f_thz * THZ_TO_PER_FS
}

/// Ordinary frequency in GHz to angular frequency in rad/fs.
pub fn ghz_to_rad_per_fs(f_ghz: f64) -> f64 {
    2.0 * PI * f_ghz * GHZ_TO_PER_FS
}

/// Angular frequency in rad/fs back to THz.
pub fn rad_per_fs_to_thz(omega: f64) -> f64 {
    omega / (2.0 * PI * THZ_TO_PER_FS)
}

/// Period `τ` (fs) to angular frequency `2π/τ`. An infinite period maps to 0.
pub fn period_to_angular(period_fs: f64) -> f64 {
    if period_fs.is_infinite() {
        0.0
    } else {
        2.0 * PI / period_fs
    }
}

/// Angular frequency to period `2π/ω`. Zero maps to an infinite period.
pub fn angular_to_period(omega: f64) -> f64 {
    if omega == 0.0 {
        f64::INFINITY
    } else {
        2.0 * PI / omega
    }
}

/// Sink time `1/γ` (fs) to rate. An infinite sink time means no sink.
pub fn sink_time_to_rate(sink_time_fs: f64) -> f64 {
    if sink_time_fs.is_infinite() {
        0.0
    } else {
        1.0 / sink_time_fs
    }
}

/// Intensity FWHM of a Gaussian amplitude envelope `exp(-t²/τp²)`.
pub fn gaussian_fwhm(tau_p: f64) -> f64 {
    2.0 * (2.0f64.ln()).sqrt() * tau_p
}
