//! Synthetic stand-ins for speech and noise recordings.

use rand::Rng;
use rand_distr::StandardNormal;
use rustfft::num_complex::Complex;
use rustfft::FftPlanner;

use std::f64::consts::PI;

const RMS: f64 = 0.1;

fn normalize(x: &mut [f64]) {
    let rms = (x.iter().map(|v| v * v).sum::<f64>() / x.len().max(1) as f64).sqrt();
    if rms > 0.0 {
        x.iter_mut().for_each(|v| *v *= RMS / rms);
    }
}

/// Band-limited pseudo-speech: syllable-length harmonic complexes with a
/// gliding pitch, two moving formant resonances and a syllabic envelope,
/// separated by short pauses. Normalized to an RMS of 0.1.
pub fn pseudo_speech<R: Rng>(len: usize, fs: u32, rng: &mut R) -> Vec<f64> {
    let fs = fs as f64;
    let mut out = vec![0.0; len];
    let mut pos = (rng.gen_range(0.0..0.1) * fs) as usize;
    let talker_f0 = rng.gen_range(90.0..220.0);
    while pos < len {
        let dur = (rng.gen_range(0.12..0.35) * fs) as usize;
        let f0_start = talker_f0 * rng.gen_range(0.85..1.15);
        let f0_end = f0_start * rng.gen_range(0.8..1.2);
        let formants = [
            (rng.gen_range(300.0..900.0), rng.gen_range(300.0..900.0), 120.0),
            (rng.gen_range(900.0..2500.0), rng.gen_range(900.0..2500.0), 200.0),
        ];
        let mut phase = 0.0;
        for i in 0..dur.min(len - pos) {
            let u = i as f64 / dur as f64;
            let f0 = f0_start + (f0_end - f0_start) * u;
            phase += 2.0 * PI * f0 / fs;
            let env = (PI * u).sin().powi(2);
            let mut v = 0.0;
            let mut k = 1.0;
            while k * f0 < 4_000.0 {
                let f = k * f0;
                let gain: f64 = formants
                    .iter()
                    .map(|&(a, b, bw)| {
                        let centre = a + (b - a) * u;
                        (-((f - centre) / bw).powi(2)).exp()
                    })
                    .sum::<f64>()
                    + 0.05;
                v += gain / k * (k * phase).sin();
                k += 1.0;
            }
            out[pos + i] = env * v;
        }
        pos += dur + (rng.gen_range(0.04..0.25) * fs) as usize;
    }
    normalize(&mut out);
    out
}

/// Gaussian noise with a `1/f^exponent` power spectrum (0 = white, 1 = pink,
/// 2 = brown), normalized to an RMS of 0.1.
pub fn colored_noise<R: Rng>(len: usize, exponent: f64, rng: &mut R) -> Vec<f64> {
    if len == 0 {
        return Vec::new();
    }
    let mut buf: Vec<Complex<f64>> = (0..len)
        .map(|_| Complex::new(rng.sample::<f64, _>(StandardNormal), 0.0))
        .collect();
    let mut planner = FftPlanner::new();
    planner.plan_fft_forward(len).process(&mut buf);
    for (k, c) in buf.iter_mut().enumerate() {
        let bin = k.min(len - k).max(1) as f64;
        *c *= bin.powf(-exponent / 2.0);
    }
    buf[0] = Complex::new(0.0, 0.0);
    planner.plan_fft_inverse(len).process(&mut buf);
    let mut out: Vec<f64> = buf.iter().map(|c| c.re).collect();
    normalize(&mut out);
    out
}
