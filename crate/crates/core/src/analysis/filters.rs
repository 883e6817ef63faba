//! Octave-band filtering for decay analysis.
//!
//! Each band is a 2nd-order Butterworth high-pass at `fc/√2` cascaded with a
//! 2nd-order Butterworth low-pass at `fc·√2`, a 4th-order band-pass overall.
//! Filtering is causal (forward only) so energy never moves ahead of the
//! direct path.

use std::f64::consts::{FRAC_1_SQRT_2, PI, SQRT_2};

/// Direct form I biquad, coefficients normalized by `a0`.
#[derive(Debug, Clone, Copy)]
struct Biquad {
    b0: f64,
    b1: f64,
    b2: f64,
    a1: f64,
    a2: f64,
}

impl Biquad {
    fn lowpass(cutoff: f64, fs: f64) -> Self {
        let w0 = 2.0 * PI * cutoff / fs;
        let (sin, cos) = w0.sin_cos();
        let alpha = sin / (2.0 * FRAC_1_SQRT_2);
        let a0 = 1.0 + alpha;
        Self {
            b0: (1.0 - cos) / 2.0 / a0,
            b1: (1.0 - cos) / a0,
            b2: (1.0 - cos) / 2.0 / a0,
            a1: -2.0 * cos / a0,
            a2: (1.0 - alpha) / a0,
        }
    }

    fn highpass(cutoff: f64, fs: f64) -> Self {
        let w0 = 2.0 * PI * cutoff / fs;
        let (sin, cos) = w0.sin_cos();
        let alpha = sin / (2.0 * FRAC_1_SQRT_2);
        let a0 = 1.0 + alpha;
        Self {
            b0: (1.0 + cos) / 2.0 / a0,
            b1: -(1.0 + cos) / a0,
            b2: (1.0 + cos) / 2.0 / a0,
            a1: -2.0 * cos / a0,
            a2: (1.0 - alpha) / a0,
        }
    }

    fn run(&self, input: &[f64], out: &mut [f64]) {
        let (mut x1, mut x2, mut y1, mut y2) = (0.0, 0.0, 0.0, 0.0);
        for (x, y) in input.iter().zip(out.iter_mut()) {
            let v = self.b0 * x + self.b1 * x1 + self.b2 * x2 - self.a1 * y1 - self.a2 * y2;
            x2 = x1;
            x1 = *x;
            y2 = y1;
            y1 = v;
            *y = v;
        }
    }
}

#[derive(Debug, Clone)]
pub struct OctaveFilter {
    center: f64,
    stages: Vec<Biquad>,
}

impl OctaveFilter {
    /// Caller guarantees `0 < center < fs / 2`. The low-pass stage is
    /// dropped when the upper band edge would sit too close to Nyquist to be
    /// realized.
    pub fn new(center: f64, fs: f64) -> Self {
        let mut stages = vec![Biquad::highpass(center / SQRT_2, fs)];
        let upper = center * SQRT_2;
        if upper < 0.45 * fs {
            stages.push(Biquad::lowpass(upper, fs));
        }
        Self { center, stages }
    }

    pub fn center(&self) -> f64 {
        self.center
    }

    pub fn apply(&self, input: &[f64]) -> Vec<f64> {
        let mut buf = input.to_vec();
        let mut tmp = vec![0.0; input.len()];
        for stage in &self.stages {
            stage.run(&buf, &mut tmp);
            std::mem::swap(&mut buf, &mut tmp);
        }
        buf
    }
}

/// Standard octave centers (125 Hz doubling) whose upper band edge stays
/// below Nyquist.
pub fn default_octave_centers(sample_rate: u32) -> Vec<f64> {
    let nyquist = sample_rate as f64 / 2.0;
    std::iter::successors(Some(125.0_f64), |c| Some(c * 2.0))
        .take_while(|c| c * SQRT_2 < nyquist)
        .collect()
}
