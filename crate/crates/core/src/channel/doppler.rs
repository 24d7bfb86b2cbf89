use std::f64::consts::PI;

use num_complex::Complex64;
use rand::Rng;

/// Sinusoids per Doppler process unless configured otherwise.
pub const DEFAULT_SINUSOIDS: usize = 32;

/// Unit-power complex fading process with a classical (Jakes) spectrum,
/// synthesized as a sum of sinusoids.
///
/// Arrival angles are equally spaced around the circle with a common random
/// rotation, and every sinusoid carries an independent uniform phase. Averaged
/// over the random draws the autocorrelation is exactly `J0(2 pi f_d dt)`.
#[derive(Debug, Clone)]
pub struct SosProcess {
    freqs_hz: Vec<f64>,
    phases: Vec<f64>,
    scale: f64,
}

impl SosProcess {
    pub fn new<R: Rng + ?Sized>(max_doppler_hz: f64, num_sinusoids: usize, rng: &mut R) -> Self {
        assert!(num_sinusoids > 0, "need at least one sinusoid");
        let n = num_sinusoids as f64;
        let rotation = rng.random::<f64>() * 2.0 * PI;
        let mut freqs_hz = Vec::with_capacity(num_sinusoids);
        let mut phases = Vec::with_capacity(num_sinusoids);
        for i in 0..num_sinusoids {
            let angle = (2.0 * PI * i as f64 + rotation) / n;
            freqs_hz.push(max_doppler_hz * angle.cos());
            phases.push(rng.random::<f64>() * 2.0 * PI);
        }
        SosProcess {
            freqs_hz,
            phases,
            scale: 1.0 / n.sqrt(),
        }
    }

    /// Value of the process at time `t` seconds.
    pub fn sample(&self, t: f64) -> Complex64 {
        let sum: Complex64 = self
            .freqs_hz
            .iter()
            .zip(&self.phases)
            .map(|(f, p)| Complex64::from_polar(1.0, 2.0 * PI * f * t + p))
            .sum();
        sum * self.scale
    }

    /// Per-sinusoid Doppler frequencies in Hz.
    pub fn frequencies(&self) -> &[f64] {
        &self.freqs_hz
    }
}
