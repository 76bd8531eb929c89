use rustfft::num_complex::Complex;
use rustfft::FftPlanner;

use super::{check_lengths, resample, to_f64};
use crate::error::{Error, Result};
use crate::scalar::Real;

/// Internal rate of the intelligibility model.
pub const STOI_RATE: u32 = 10_000;
const FRAME: usize = 256;
const HOP: usize = FRAME / 2;
const NFFT: usize = 512;
const BANDS: usize = 15;
const MIN_FREQ: f64 = 150.0;
/// Frames per short-time segment (384 ms).
const SEGMENT: usize = 30;
const BETA_DB: f64 = -15.0;
const DYN_RANGE_DB: f64 = 40.0;

/// Short-time objective intelligibility of `estimate` given `reference`.
///
/// Inputs at other rates are resampled to 10 kHz first. Fails with
/// [`Error::TooShort`] when fewer than 30 frames survive silent-frame removal.
pub fn stoi<T: Real>(reference: &[T], estimate: &[T], sample_rate: u32) -> Result<f64> {
    check_lengths(reference.len(), estimate.len())?;
    let x = resample(&to_f64(reference), sample_rate, STOI_RATE)?;
    let y = resample(&to_f64(estimate), sample_rate, STOI_RATE)?;
    let (x, y) = remove_silent_frames(&x, &y);

    let bands = third_octave_bands();
    let xt = band_envelopes(&x, &bands);
    let yt = band_envelopes(&y, &bands);
    let frames = xt.first().map_or(0, Vec::len);
    if frames < SEGMENT {
        return Err(Error::TooShort(format!(
            "{frames} active frames, need at least {SEGMENT}"
        )));
    }

    let clip = 10f64.powf(-BETA_DB / 20.0);
    let mut total = 0.0;
    let mut count = 0usize;
    for end in SEGMENT..=frames {
        for (xb, yb) in xt.iter().zip(&yt) {
            let xs = &xb[end - SEGMENT..end];
            let ys = &yb[end - SEGMENT..end];
            let gain = norm(xs) / (norm(ys) + f64::EPSILON);
            let yp: Vec<f64> = ys
                .iter()
                .zip(xs)
                .map(|(&yv, &xv)| (yv * gain).min(xv * (1.0 + clip)))
                .collect();
            total += correlation(xs, &yp);
            count += 1;
        }
    }
    Ok((total / count as f64).clamp(0.0, 1.0))
}

fn norm(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>().sqrt()
}

fn correlation(a: &[f64], b: &[f64]) -> f64 {
    let ma = a.iter().sum::<f64>() / a.len() as f64;
    let mb = b.iter().sum::<f64>() / b.len() as f64;
    let ac: Vec<f64> = a.iter().map(|v| v - ma).collect();
    let bc: Vec<f64> = b.iter().map(|v| v - mb).collect();
    let num: f64 = ac.iter().zip(&bc).map(|(x, y)| x * y).sum();
    num / ((norm(&ac) + f64::EPSILON) * (norm(&bc) + f64::EPSILON))
}

/// `hann(FRAME + 2)` without its zero end points.
fn window() -> Vec<f64> {
    let n = FRAME + 2;
    (1..=FRAME)
        .map(|i| 0.5 - 0.5 * (2.0 * std::f64::consts::PI * i as f64 / (n - 1) as f64).cos())
        .collect()
}

fn frame_starts(len: usize) -> impl Iterator<Item = usize> {
    (0..len.saturating_sub(FRAME)).step_by(HOP)
}

/// Drops frames more than 40 dB below the loudest reference frame and
/// overlap-adds the survivors back into signals.
fn remove_silent_frames(x: &[f64], y: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let w = window();
    let windowed = |s: &[f64], start: usize| -> Vec<f64> {
        s[start..start + FRAME].iter().zip(&w).map(|(a, b)| a * b).collect()
    };
    let starts: Vec<usize> = frame_starts(x.len()).collect();
    let energies: Vec<f64> = starts
        .iter()
        .map(|&i| 20.0 * (norm(&windowed(x, i)) + f64::EPSILON).log10())
        .collect();
    let max = energies.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let kept: Vec<usize> = starts
        .iter()
        .zip(&energies)
        .filter(|(_, &e)| max - DYN_RANGE_DB - e < 0.0)
        .map(|(&i, _)| i)
        .collect();
    let len = if kept.is_empty() { 0 } else { (kept.len() - 1) * HOP + FRAME };
    let mut xs = vec![0.0; len];
    let mut ys = vec![0.0; len];
    for (k, &i) in kept.iter().enumerate() {
        let (fx, fy) = (windowed(x, i), windowed(y, i));
        for j in 0..FRAME {
            xs[k * HOP + j] += fx[j];
            ys[k * HOP + j] += fy[j];
        }
    }
    (xs, ys)
}

/// Third-octave band edges as `[lo, hi)` FFT-bin ranges.
fn third_octave_bands() -> Vec<(usize, usize)> {
    let bin_hz = STOI_RATE as f64 / NFFT as f64;
    let nearest = |hz: f64| -> usize {
        (0..=NFFT / 2)
            .min_by(|&a, &b| {
                let da = (a as f64 * bin_hz - hz).powi(2);
                let db = (b as f64 * bin_hz - hz).powi(2);
                da.total_cmp(&db)
            })
            .expect("non-empty")
    };
    (0..BANDS)
        .map(|k| {
            let k = k as f64;
            let lo = MIN_FREQ * 2f64.powf((2.0 * k - 1.0) / 6.0);
            let hi = MIN_FREQ * 2f64.powf((2.0 * k + 1.0) / 6.0);
            (nearest(lo), nearest(hi))
        })
        .collect()
}

/// Band envelopes `[bands][frames]` from a Hann-windowed STFT.
fn band_envelopes(x: &[f64], bands: &[(usize, usize)]) -> Vec<Vec<f64>> {
    let w = window();
    let fft = FftPlanner::new().plan_fft_forward(NFFT);
    let mut out = vec![Vec::new(); bands.len()];
    let mut buf = vec![Complex::new(0.0, 0.0); NFFT];
    for start in frame_starts(x.len()) {
        buf.iter_mut().for_each(|c| *c = Complex::new(0.0, 0.0));
        for j in 0..FRAME {
            buf[j].re = x[start + j] * w[j];
        }
        fft.process(&mut buf);
        for (b, &(lo, hi)) in bands.iter().enumerate() {
            let e: f64 = buf[lo..hi].iter().map(|c| c.norm_sqr()).sum();
            out[b].push(e.sqrt());
        }
    }
    out
}
