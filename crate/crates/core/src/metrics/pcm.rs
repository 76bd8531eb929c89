use rustfft::num_complex::Complex;
use rustfft::FftPlanner;

use super::{check_lengths, to_f64};
use crate::error::{Error, Result};
use crate::scalar::Real;

/// Rectangular STFT used by the loss: 32 ms frames, 16 ms hop at 16 kHz.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PcmConfig {
    pub frame: usize,
    pub hop: usize,
}

impl Default for PcmConfig {
    fn default() -> Self {
        Self { frame: 512, hop: 256 }
    }
}

impl PcmConfig {
    /// Frames covering `len` samples; the tail is zero-padded.
    pub fn frames(&self, len: usize) -> usize {
        if len <= self.frame {
            1
        } else {
            (len - self.frame).div_ceil(self.hop) + 1
        }
    }
}

fn stft(x: &[f64], cfg: &PcmConfig) -> Vec<Complex<f64>> {
    let fft = FftPlanner::new().plan_fft_forward(cfg.frame);
    let bins = cfg.frame / 2 + 1;
    let frames = cfg.frames(x.len());
    let mut out = Vec::with_capacity(frames * bins);
    let mut buf = vec![Complex::new(0.0, 0.0); cfg.frame];
    for t in 0..frames {
        for (j, c) in buf.iter_mut().enumerate() {
            *c = Complex::new(x.get(t * cfg.hop + j).copied().unwrap_or(0.0), 0.0);
        }
        fft.process(&mut buf);
        out.extend_from_slice(&buf[..bins]);
    }
    out
}

/// Phase-constrained magnitude loss between two signals:
/// mean over time-frequency points of `||Re S| - |Re Ŝ|| + ||Im S| - |Im Ŝ||`.
pub fn pcm_loss<T: Real>(reference: &[T], estimate: &[T], config: &PcmConfig) -> Result<f64> {
    check_lengths(reference.len(), estimate.len())?;
    if config.frame == 0 || config.hop == 0 {
        return Err(Error::Config("pcm frame and hop must be positive".into()));
    }
    let s = stft(&to_f64(reference), config);
    let e = stft(&to_f64(estimate), config);
    let total: f64 = s
        .iter()
        .zip(&e)
        .map(|(a, b)| (a.re.abs() - b.re.abs()).abs() + (a.im.abs() - b.im.abs()).abs())
        .sum();
    Ok(total / s.len() as f64)
}

/// Speech and noise terms averaged, the noise estimate being `mixture - estimate`.
pub fn pcm_loss_full<T: Real>(reference: &[T], estimate: &[T], mixture: &[T], config: &PcmConfig) -> Result<f64> {
    check_lengths(reference.len(), mixture.len())?;
    let noise_ref: Vec<T> = mixture.iter().zip(reference).map(|(&y, &s)| y - s).collect();
    let noise_est: Vec<T> = mixture.iter().zip(estimate).map(|(&y, &s)| y - s).collect();
    Ok(0.5 * (pcm_loss(reference, estimate, config)? + pcm_loss(&noise_ref, &noise_est, config)?))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sign_blind_and_zero_on_identity() {
        let x: Vec<f64> = (0..1_000).map(|n| ((n * 37 % 101) as f64 / 50.0) - 1.0).collect();
        let neg: Vec<f64> = x.iter().map(|v| -v).collect();
        let cfg = PcmConfig::default();
        assert_eq!(pcm_loss(&x, &x, &cfg).unwrap(), 0.0);
        assert!(pcm_loss(&x, &neg, &cfg).unwrap() < 1e-12);
        assert!(pcm_loss_full(&x, &x, &neg, &cfg).unwrap() < 1e-12);
    }

    #[test]
    fn frame_count() {
        let c = PcmConfig::default();
        assert_eq!(c.frames(10), 1);
        assert_eq!(c.frames(512), 1);
        assert_eq!(c.frames(513), 2);
        assert_eq!(c.frames(768), 2);
        assert_eq!(c.frames(769), 3);
    }
}
