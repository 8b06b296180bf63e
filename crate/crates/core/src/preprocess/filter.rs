//! Zero-phase Butterworth low-pass filtering.

use super::PreprocessError;

#[derive(Debug, Clone, Copy, PartialEq)]
struct Complex {
    re: f64,
    im: f64,
}

impl Complex {
    fn new(re: f64, im: f64) -> Self {
        Self { re, im }
    }
    fn mul(self, o: Self) -> Self {
        Self::new(self.re * o.re - self.im * o.im, self.re * o.im + self.im * o.re)
    }
    fn div(self, o: Self) -> Self {
        let d = o.re * o.re + o.im * o.im;
        Self::new(
            (self.re * o.re + self.im * o.im) / d,
            (self.im * o.re - self.re * o.im) / d,
        )
    }
}

/// Coefficients of the monic polynomial with the given roots, highest power
/// first.
fn poly(roots: &[Complex]) -> Vec<Complex> {
    let mut c = vec![Complex::new(1.0, 0.0)];
    for &r in roots {
        let mut next = vec![Complex::new(0.0, 0.0); c.len() + 1];
        for (i, &ci) in c.iter().enumerate() {
            next[i].re += ci.re;
            next[i].im += ci.im;
            let t = ci.mul(r);
            next[i + 1].re -= t.re;
            next[i + 1].im -= t.im;
        }
        c = next;
    }
    c
}

/// Digital Butterworth low-pass designed by the bilinear transform, applied
/// forward and backward.
#[derive(Debug, Clone, PartialEq)]
pub struct Butterworth {
    order: usize,
    b: Vec<f64>,
    a: Vec<f64>,
}

impl Butterworth {
    pub fn lowpass(order: usize, cutoff_hz: f64, fs_hz: f64) -> Result<Self, PreprocessError> {
        if order == 0 || !(cutoff_hz > 0.0 && cutoff_hz < fs_hz / 2.0) {
            return Err(PreprocessError::FilterDesign {
                order,
                cutoff_hz,
                fs_hz,
            });
        }
        // Pre-warped analog cutoff (rad/s).
        let warped = 2.0 * fs_hz * (std::f64::consts::PI * cutoff_hz / fs_hz).tan();
        let two_fs = Complex::new(2.0 * fs_hz, 0.0);
        let n = order as f64;
        let poles: Vec<Complex> = (1..=order)
            .map(|k| {
                let theta = std::f64::consts::PI * (2.0 * k as f64 + n - 1.0) / (2.0 * n);
                let p = Complex::new(warped * theta.cos(), warped * theta.sin());
                let num = Complex::new(two_fs.re + p.re, p.im);
                let den = Complex::new(two_fs.re - p.re, -p.im);
                num.div(den)
            })
            .collect();
        let zeros = vec![Complex::new(-1.0, 0.0); order];
        let a: Vec<f64> = poly(&poles).iter().map(|c| c.re).collect();
        let b_unscaled: Vec<f64> = poly(&zeros).iter().map(|c| c.re).collect();
        let gain = a.iter().sum::<f64>() / b_unscaled.iter().sum::<f64>();
        let b = b_unscaled.iter().map(|v| v * gain).collect();
        Ok(Self { order, b, a })
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn coefficients(&self) -> (&[f64], &[f64]) {
        (&self.b, &self.a)
    }

    /// Shortest series accepted by [`Butterworth::filtfilt`].
    pub fn min_len(&self) -> usize {
        3 * self.order
    }

    /// Direct-form II transposed pass with initial state `zi * x[0]`.
    fn lfilter(&self, x: &[f64], zi: &[f64]) -> Vec<f64> {
        let n = self.a.len();
        let mut z: Vec<f64> = zi.iter().map(|v| v * x[0]).collect();
        let mut y = Vec::with_capacity(x.len());
        for &xi in x {
            let yi = self.b[0] * xi + z[0];
            for i in 0..n - 2 {
                z[i] = self.b[i + 1] * xi + z[i + 1] - self.a[i + 1] * yi;
            }
            z[n - 2] = self.b[n - 1] * xi - self.a[n - 1] * yi;
            y.push(yi);
        }
        y
    }

    /// Steady-state filter state for a unit step.
    fn step_state(&self) -> Vec<f64> {
        let dc = self.b.iter().sum::<f64>() / self.a.iter().sum::<f64>();
        let n = self.a.len();
        let mut zi = vec![0.0; n - 1];
        let mut acc = 0.0;
        for i in (0..n - 1).rev() {
            acc += self.b[i + 1] - self.a[i + 1] * dc;
            zi[i] = acc;
        }
        zi
    }

    /// Zero-phase filtering with odd extension at both ends.
    pub fn filtfilt(&self, x: &[f64]) -> Result<Vec<f64>, PreprocessError> {
        if x.len() < self.min_len() {
            return Err(PreprocessError::SeriesTooShort {
                len: x.len(),
                min: self.min_len(),
            });
        }
        let padlen = (3 * self.a.len()).min(x.len() - 1);
        let first = x[0];
        let last = x[x.len() - 1];
        let mut ext = Vec::with_capacity(x.len() + 2 * padlen);
        ext.extend((1..=padlen).rev().map(|i| 2.0 * first - x[i]));
        ext.extend_from_slice(x);
        ext.extend((1..=padlen).map(|i| 2.0 * last - x[x.len() - 1 - i]));

        let zi = self.step_state();
        let mut y = self.lfilter(&ext, &zi);
        y.reverse();
        let mut y = self.lfilter(&y, &zi);
        y.reverse();
        Ok(y[padlen..padlen + x.len()].to_vec())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Squared magnitude of the bilinear Butterworth response, applied twice
    /// (forward-backward), evaluated from the analog prototype formula.
    fn zero_phase_gain(order: usize, cutoff: f64, fs: f64, f: f64) -> f64 {
        let pi = std::f64::consts::PI;
        let ratio = (pi * f / fs).tan() / (pi * cutoff / fs).tan();
        1.0 / (1.0 + ratio.powi(2 * order as i32))
    }

    fn tone_amplitude(freq: f64) -> f64 {
        let bw = Butterworth::lowpass(4, 12.5, 50.0).unwrap();
        let x: Vec<f64> = (0..1000)
            .map(|i| (2.0 * std::f64::consts::PI * freq * i as f64 / 50.0).sin())
            .collect();
        let y = bw.filtfilt(&x).unwrap();
        // Project the middle 600 samples (whole periods for 2, 12.5, 24 Hz)
        // onto sin/cos at `freq`.
        let (mut s, mut c) = (0.0, 0.0);
        for i in 200..800 {
            let w = 2.0 * std::f64::consts::PI * freq * i as f64 / 50.0;
            s += y[i] * w.sin();
            c += y[i] * w.cos();
        }
        2.0 * s.hypot(c) / 600.0
    }

    #[test]
    fn dc_gain_is_one() {
        let bw = Butterworth::lowpass(4, 12.5, 50.0).unwrap();
        let y = bw.filtfilt(&[3.25; 40]).unwrap();
        for v in y {
            assert!((v - 3.25).abs() < 1e-9, "{v}");
        }
    }

    #[test]
    fn passband_and_stopband_match_oracle() {
        let g2 = zero_phase_gain(4, 12.5, 50.0, 2.0);
        assert!((0.99..=1.01).contains(&g2));
        let a2 = tone_amplitude(2.0);
        assert!((0.99..=1.01).contains(&a2), "{a2}");
        assert!((a2 - g2).abs() < 1e-3);

        let g24 = zero_phase_gain(4, 12.5, 50.0, 24.0);
        assert!(g24 < 0.01);
        let a24 = tone_amplitude(24.0);
        assert!(a24 < 0.01, "{a24}");
    }

    #[test]
    fn half_power_at_cutoff() {
        // Forward-backward squares the -3 dB point to gain 0.5.
        let a = tone_amplitude(12.5);
        assert!((a - 0.5).abs() < 0.01, "{a}");
    }

    #[test]
    fn rejects_short_series_and_bad_design() {
        let bw = Butterworth::lowpass(4, 12.5, 50.0).unwrap();
        assert!(matches!(
            bw.filtfilt(&[1.0; 11]),
            Err(PreprocessError::SeriesTooShort { len: 11, min: 12 })
        ));
        assert!(bw.filtfilt(&[1.0; 12]).is_ok());
        assert!(Butterworth::lowpass(4, 25.0, 50.0).is_err());
    }
}
