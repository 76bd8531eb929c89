//! Noisy-reverberant multichannel mixtures from the image-source method.
//!
//! The mixture at microphone `m` is `y = s_dir + s_rev + z_dir + z_rev`:
//! direct and reverberant speech plus direct and reverberant noise. The SNR
//! compares the direct speech with the total noise at the reference
//! microphone (index 0).

mod dataset;
mod rir;
mod sources;

pub use dataset::{draw_scene, generate_dataset, utterance_rng, utterance_seed, ManifestRecord, SceneConfig, SceneDraw, MANIFEST_FILE};
pub use rir::{convolve, image_method_rir, image_sources, RirParts, KERNEL_TAPS};
pub use sources::{colored_noise, pseudo_speech};

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::framing::MultichannelSignal;

/// Shoebox room with uniform, frequency-independent absorption.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RoomSpec {
    /// Length, width, height in meters.
    pub dimensions: [f64; 3],
    /// Energy absorption coefficient in `(0, 1]`.
    pub absorption: f64,
    pub max_order: usize,
    /// m/s.
    pub speed_of_sound: f64,
}

impl RoomSpec {
    pub fn new(dimensions: [f64; 3], absorption: f64, max_order: usize) -> Result<Self> {
        let room = Self { dimensions, absorption, max_order, speed_of_sound: 343.0 };
        room.validate()?;
        Ok(room)
    }

    pub fn validate(&self) -> Result<()> {
        if self.dimensions.iter().any(|&d| !(d.is_finite() && d > 0.0)) {
            return Err(Error::Config(format!("room dimensions {:?} must be positive", self.dimensions)));
        }
        if !(self.absorption > 0.0 && self.absorption <= 1.0) {
            return Err(Error::Config(format!("absorption {} outside (0, 1]", self.absorption)));
        }
        if !(self.speed_of_sound.is_finite() && self.speed_of_sound > 0.0) {
            return Err(Error::Config("speed of sound must be positive".into()));
        }
        Ok(())
    }

    /// Errors unless `p` is at least `margin` meters from every wall.
    pub fn check_inside(&self, p: [f64; 3], margin: f64, what: &str) -> Result<()> {
        let inside = p
            .iter()
            .zip(&self.dimensions)
            .all(|(&x, &l)| x.is_finite() && x >= margin && x <= l - margin);
        if inside {
            Ok(())
        } else {
            Err(Error::OutsideRoom(format!("{what} at {p:?} in room {:?}", self.dimensions)))
        }
    }
}

/// Microphone positions in meters.
#[derive(Debug, Clone, PartialEq)]
pub struct ArraySpec {
    pub positions: Vec<[f64; 3]>,
}

impl ArraySpec {
    /// `count` microphones equally spaced on a horizontal circle.
    pub fn circular(center: [f64; 3], radius: f64, count: usize) -> Self {
        let positions = (0..count)
            .map(|m| {
                let a = 2.0 * std::f64::consts::PI * m as f64 / count as f64;
                [center[0] + radius * a.cos(), center[1] + radius * a.sin(), center[2]]
            })
            .collect();
        Self { positions }
    }

    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }
}

/// Source placement and level for one mixture.
#[derive(Debug, Clone, PartialEq)]
pub struct MixtureSpec {
    pub snr_db: f64,
    pub speech_position: [f64; 3],
    pub noise_positions: Vec<[f64; 3]>,
}

/// Mixture and its four stems, all `[M × L]`.
#[derive(Debug, Clone, PartialEq)]
pub struct SimOutput {
    pub y: MultichannelSignal<f64>,
    pub s_dir: MultichannelSignal<f64>,
    pub s_rev: MultichannelSignal<f64>,
    pub z_dir: MultichannelSignal<f64>,
    pub z_rev: MultichannelSignal<f64>,
    /// Gain applied to the noise images to reach the requested SNR.
    pub noise_gain: f64,
}

impl SimOutput {
    /// Direct-path speech at the reference microphone.
    pub fn target(&self) -> MultichannelSignal<f64> {
        MultichannelSignal::mono(self.s_dir.sample_rate(), self.s_dir.channel(0).to_vec())
            .expect("non-empty by construction")
    }
}

fn energy(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum()
}

/// Direct and reverberant images of `signal` at every microphone.
fn spatialize(room: &RoomSpec, array: &ArraySpec, pos: [f64; 3], signal: &[f64], fs: u32) -> Result<Vec<(Vec<f64>, Vec<f64>)>> {
    array
        .positions
        .par_iter()
        .map(|&mic| {
            let h = image_method_rir(room, pos, mic, fs)?;
            let direct = convolve(signal, &h.direct);
            let full = convolve(signal, &h.full);
            let rev = full.iter().zip(&direct).map(|(f, d)| f - d).collect();
            Ok((direct, rev))
        })
        .collect()
}

/// Convolves speech and noises with the room, scales the noise to the
/// requested SNR at microphone 0 and returns the stems.
///
/// Noises shorter than the speech are repeated; longer ones are truncated.
pub fn simulate_mixture(
    room: &RoomSpec,
    array: &ArraySpec,
    mixture: &MixtureSpec,
    speech: &[f64],
    noises: &[Vec<f64>],
    fs: u32,
) -> Result<SimOutput> {
    room.validate()?;
    if array.is_empty() {
        return Err(Error::Config("array has no microphones".into()));
    }
    if noises.is_empty() || noises.len() != mixture.noise_positions.len() {
        return Err(Error::Config(format!(
            "{} noise signals for {} noise positions",
            noises.len(),
            mixture.noise_positions.len()
        )));
    }
    if !mixture.snr_db.is_finite() {
        return Err(Error::Config("snr must be finite".into()));
    }
    if energy(speech) == 0.0 {
        return Err(Error::Silent("speech"));
    }
    for (i, &p) in array.positions.iter().enumerate() {
        room.check_inside(p, 0.0, &format!("microphone {i}"))?;
    }
    room.check_inside(mixture.speech_position, 0.0, "speech source")?;
    for &p in &mixture.noise_positions {
        room.check_inside(p, 0.0, "noise source")?;
    }

    let len = speech.len();
    let m = array.len();
    let speech_img = spatialize(room, array, mixture.speech_position, speech, fs)?;
    let mut z_dir = vec![vec![0.0; len]; m];
    let mut z_rev = vec![vec![0.0; len]; m];
    for (noise, &pos) in noises.iter().zip(&mixture.noise_positions) {
        if noise.is_empty() || energy(noise) == 0.0 {
            return Err(Error::Silent("noise"));
        }
        let cycled: Vec<f64> = noise.iter().copied().cycle().take(len).collect();
        for (ch, (d, r)) in spatialize(room, array, pos, &cycled, fs)?.into_iter().enumerate() {
            z_dir[ch].iter_mut().zip(&d).for_each(|(a, b)| *a += b);
            z_rev[ch].iter_mut().zip(&r).for_each(|(a, b)| *a += b);
        }
    }

    let speech_ref = energy(&speech_img[0].0);
    let noise_ref: f64 = z_dir[0].iter().zip(&z_rev[0]).map(|(a, b)| (a + b).powi(2)).sum();
    if speech_ref == 0.0 {
        return Err(Error::Silent("direct speech at the reference microphone"));
    }
    if noise_ref == 0.0 {
        return Err(Error::Silent("noise at the reference microphone"));
    }
    let gain = (speech_ref / (noise_ref * 10f64.powf(mixture.snr_db / 10.0))).sqrt();
    for ch in z_dir.iter_mut().chain(z_rev.iter_mut()) {
        ch.iter_mut().for_each(|v| *v *= gain);
    }

    let (s_dir, s_rev): (Vec<Vec<f64>>, Vec<Vec<f64>>) = speech_img.into_iter().unzip();
    let y: Vec<Vec<f64>> = (0..m)
        .map(|ch| {
            (0..len)
                .map(|i| s_dir[ch][i] + s_rev[ch][i] + z_dir[ch][i] + z_rev[ch][i])
                .collect()
        })
        .collect();
    let sig = |v: Vec<Vec<f64>>| MultichannelSignal::new(fs, v);
    Ok(SimOutput { y: sig(y)?, s_dir: sig(s_dir)?, s_rev: sig(s_rev)?, z_dir: sig(z_dir)?, z_rev: sig(z_rev)?, noise_gain: gain })
}
