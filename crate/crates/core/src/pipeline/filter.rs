//! Zero-phase second-order Butterworth low-pass.

use alloc::format;
use alloc::vec::Vec;
use core::f64::consts::{PI, SQRT_2};

#[allow(unused_imports)]
use num_traits::Float;

use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FilterConfig {
    pub enabled: bool,
    pub cutoff_hz: f64,
}

impl Default for FilterConfig {
    fn default() -> Self {
        Self { enabled: true, cutoff_hz: 20.0 }
    }
}

impl FilterConfig {
    pub fn disabled() -> Self {
        Self { enabled: false, ..Self::default() }
    }

    pub fn cutoff(cutoff_hz: f64) -> Self {
        Self { enabled: true, cutoff_hz }
    }
}

/// Biquad coefficients with `a0 = 1`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Butterworth2 {
    pub b: [f64; 3],
    pub a: [f64; 3],
}

impl Butterworth2 {
    /// Bilinear transform with the cutoff prewarped so the -3 dB point lands
    /// exactly at `cutoff_hz`.
    pub fn lowpass(cutoff_hz: f64, sample_rate: f64) -> Result<Self> {
        if !(cutoff_hz > 0.0 && sample_rate > 0.0 && cutoff_hz < 0.5 * sample_rate) {
            return Err(Error::InvalidParameter(format!(
                "cutoff {cutoff_hz} Hz must lie in (0, {}) Hz",
                0.5 * sample_rate
            )));
        }
        let k = (PI * cutoff_hz / sample_rate).tan();
        let k2 = k * k;
        let norm = 1.0 + SQRT_2 * k + k2;
        let b0 = k2 / norm;
        Ok(Self { b: [b0, 2.0 * b0, b0], a: [1.0, 2.0 * (k2 - 1.0) / norm, (1.0 - SQRT_2 * k + k2) / norm] })
    }

    fn dc_gain(&self) -> f64 {
        self.b.iter().sum::<f64>() / self.a.iter().sum::<f64>()
    }

    /// Transposed direct-form-II state for a signal that has sat at `x0`
    /// forever.
    fn steady_state(&self, x0: f64) -> [f64; 2] {
        let y = self.dc_gain() * x0;
        let z2 = self.b[2] * x0 - self.a[2] * y;
        [self.b[1] * x0 - self.a[1] * y + z2, z2]
    }

    fn run(&self, x: &[f64]) -> Vec<f64> {
        let [b0, b1, b2] = self.b;
        let [_, a1, a2] = self.a;
        let mut z = self.steady_state(x[0]);
        x.iter()
            .map(|&xi| {
                let y = b0 * xi + z[0];
                z[0] = b1 * xi - a1 * y + z[1];
                z[1] = b2 * xi - a2 * y;
                y
            })
            .collect()
    }
}

/// Forward-backward filtering with odd reflection padding at both ends.
pub fn filtfilt(f: &Butterworth2, x: &[f64]) -> Vec<f64> {
    let n = x.len();
    if n < 2 {
        return x.to_vec();
    }
    let pad = (n - 1).min(60);
    let mut ext = Vec::with_capacity(n + 2 * pad);
    ext.extend((1..=pad).rev().map(|i| 2.0 * x[0] - x[i]));
    ext.extend_from_slice(x);
    ext.extend((1..=pad).map(|i| 2.0 * x[n - 1] - x[n - 1 - i]));
    let mut y = f.run(&ext);
    y.reverse();
    let mut y = f.run(&y);
    y.reverse();
    y[pad..pad + n].to_vec()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn gain_at(f: &Butterworth2, freq: f64, fs: f64) -> f64 {
        let w = 2.0 * PI * freq / fs;
        let (c1, s1, c2, s2) = (w.cos(), w.sin(), (2.0 * w).cos(), (2.0 * w).sin());
        let num = (f.b[0] + f.b[1] * c1 + f.b[2] * c2, -(f.b[1] * s1 + f.b[2] * s2));
        let den = (1.0 + f.a[1] * c1 + f.a[2] * c2, -(f.a[1] * s1 + f.a[2] * s2));
        ((num.0 * num.0 + num.1 * num.1) / (den.0 * den.0 + den.1 * den.1)).sqrt()
    }

    #[test]
    fn half_power_at_cutoff_and_unit_dc() {
        let f = Butterworth2::lowpass(20.0, 240.0).unwrap();
        assert_relative_eq!(f.dc_gain(), 1.0, epsilon = 1e-14);
        assert_relative_eq!(gain_at(&f, 20.0, 240.0), 1.0 / SQRT_2, epsilon = 1e-12);
        assert!(gain_at(&f, 100.0, 240.0) < 0.05);
        assert!(Butterworth2::lowpass(120.0, 240.0).is_err());
    }

    #[test]
    fn constants_and_ramps_pass_unchanged() {
        let f = Butterworth2::lowpass(20.0, 240.0).unwrap();
        let c = filtfilt(&f, &[3.5; 50]);
        assert!(c.iter().all(|v| (v - 3.5).abs() < 1e-12));
        let ramp: Vec<f64> = (0..100).map(|i| 0.01 * i as f64 - 0.2).collect();
        let y = filtfilt(&f, &ramp);
        for (a, b) in ramp.iter().zip(&y) {
            assert!((a - b).abs() < 1e-10, "{a} vs {b}");
        }
    }

    #[test]
    fn zero_phase_on_a_sinusoid() {
        let f = Butterworth2::lowpass(20.0, 240.0).unwrap();
        let w = 2.0 * PI * 5.0;
        let x: Vec<f64> = (0..480).map(|i| (w * i as f64 / 240.0).sin()).collect();
        let y = filtfilt(&f, &x);
        // least-squares phase over the interior
        let (mut s, mut c) = (0.0, 0.0);
        for (i, yi) in y.iter().enumerate().take(368).skip(80) {
            let t = i as f64 / 240.0;
            s += yi * (w * t).sin();
            c += yi * (w * t).cos();
        }
        assert!(c.atan2(s).abs() < 1e-3);
    }

    #[test]
    fn linear_in_the_input() {
        let f = Butterworth2::lowpass(20.0, 240.0).unwrap();
        let a: Vec<f64> = (0..60).map(|i| (i as f64 * 0.3).sin()).collect();
        let b: Vec<f64> = (0..60).map(|i| (i as f64 * 0.05).powi(2)).collect();
        let sum: Vec<f64> = a.iter().zip(&b).map(|(x, y)| x + y).collect();
        let (fa, fb, fs) = (filtfilt(&f, &a), filtfilt(&f, &b), filtfilt(&f, &sum));
        for i in 0..60 {
            assert!((fa[i] + fb[i] - fs[i]).abs() < 1e-12);
        }
    }
}
