use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{colored_noise, pseudo_speech, simulate_mixture, ArraySpec, MixtureSpec, RoomSpec, SimOutput};
use crate::error::{Error, Result};
use crate::wav::write_wav;

pub const MANIFEST_FILE: &str = "manifest.jsonl";

/// Sampling ranges for random scenes. Every `[lo, hi]` pair is drawn uniformly.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SceneConfig {
    pub length_m: [f64; 2],
    pub width_m: [f64; 2],
    pub height_m: [f64; 2],
    pub absorption: [f64; 2],
    pub image_order: usize,
    pub speed_of_sound: f64,
    #[serde(rename = "M")]
    pub mics: usize,
    pub array_radius_m: f64,
    pub snr_db: [f64; 2],
    pub noise_sources: [usize; 2],
    /// Spectral tilt of the generated noise, 0 = white, 2 = brown.
    pub noise_exponent: [f64; 2],
    pub seconds: f64,
    pub fs: u32,
    pub wall_margin_m: f64,
    pub min_source_distance_m: f64,
}

impl Default for SceneConfig {
    fn default() -> Self {
        Self {
            length_m: [3.0, 10.0],
            width_m: [3.0, 10.0],
            height_m: [2.0, 5.0],
            absorption: [0.1, 0.4],
            image_order: 6,
            speed_of_sound: 343.0,
            mics: 8,
            array_radius_m: 0.1,
            snr_db: [-10.0, 10.0],
            noise_sources: [1, 10],
            noise_exponent: [0.0, 2.0],
            seconds: 4.0,
            fs: 16_000,
            wall_margin_m: 0.1,
            min_source_distance_m: 0.5,
        }
    }
}

fn check_range(name: &str, r: [f64; 2], min: f64, max: f64) -> Result<()> {
    if !(r[0].is_finite() && r[1].is_finite() && r[0] <= r[1] && r[0] >= min && r[1] <= max) {
        return Err(Error::Config(format!("{name} range {r:?} must be ordered within [{min}, {max}]")));
    }
    Ok(())
}

impl SceneConfig {
    pub fn validate(&self) -> Result<()> {
        let fit = 2.0 * (self.wall_margin_m + self.array_radius_m) + self.min_source_distance_m;
        check_range("length_m", self.length_m, fit, 1e3)?;
        check_range("width_m", self.width_m, fit, 1e3)?;
        check_range("height_m", self.height_m, 2.0 * self.wall_margin_m + 0.01, 1e3)?;
        check_range("absorption", self.absorption, f64::MIN_POSITIVE, 1.0)?;
        check_range("snr_db", self.snr_db, -100.0, 100.0)?;
        check_range("noise_exponent", self.noise_exponent, 0.0, 4.0)?;
        let [n0, n1] = self.noise_sources;
        if n0 == 0 || n0 > n1 {
            return Err(Error::Config(format!("noise_sources range {:?} must be ordered and start at 1 or more", self.noise_sources)));
        }
        if self.mics == 0 {
            return Err(Error::Config("M must be at least 1".into()));
        }
        let positive = [
            ("seconds", self.seconds),
            ("speed_of_sound", self.speed_of_sound),
            ("wall_margin_m", self.wall_margin_m),
        ];
        for (name, v) in positive {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::Config(format!("{name} must be positive, got {v}")));
            }
        }
        if !(self.array_radius_m.is_finite() && self.array_radius_m >= 0.0) {
            return Err(Error::Config("array_radius_m must be non-negative".into()));
        }
        if !(self.min_source_distance_m.is_finite() && self.min_source_distance_m >= 0.0) {
            return Err(Error::Config("min_source_distance_m must be non-negative".into()));
        }
        if self.fs == 0 {
            return Err(Error::Config("fs must be positive".into()));
        }
        Ok(())
    }

    pub fn samples(&self) -> usize {
        (self.seconds * self.fs as f64).round() as usize
    }
}

/// Everything drawn for one utterance.
#[derive(Debug, Clone, PartialEq)]
pub struct SceneDraw {
    pub room: RoomSpec,
    pub array: ArraySpec,
    pub mixture: MixtureSpec,
    pub speech: Vec<f64>,
    pub noises: Vec<Vec<f64>>,
}

impl SceneDraw {
    pub fn simulate(&self, fs: u32) -> Result<SimOutput> {
        simulate_mixture(&self.room, &self.array, &self.mixture, &self.speech, &self.noises, fs)
    }
}

fn uniform<R: Rng>(rng: &mut R, r: [f64; 2]) -> f64 {
    if r[0] == r[1] {
        r[0]
    } else {
        rng.gen_range(r[0]..r[1])
    }
}

fn place<R: Rng>(rng: &mut R, room: &RoomSpec, margin: f64, avoid: &[[f64; 3]], min_dist: f64) -> Result<[f64; 3]> {
    for _ in 0..10_000 {
        let p = [0, 1, 2].map(|a| uniform(rng, [margin, room.dimensions[a] - margin]));
        let clear = avoid
            .iter()
            .all(|q| p.iter().zip(q).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt() >= min_dist);
        if clear {
            return Ok(p);
        }
    }
    Err(Error::Config(format!("cannot place a source in room {:?}", room.dimensions)))
}

/// Draws a room, array, source placement and source signals.
pub fn draw_scene<R: Rng>(config: &SceneConfig, rng: &mut R) -> Result<SceneDraw> {
    config.validate()?;
    let dims = [uniform(rng, config.length_m), uniform(rng, config.width_m), uniform(rng, config.height_m)];
    let room = RoomSpec {
        dimensions: dims,
        absorption: uniform(rng, config.absorption),
        max_order: config.image_order,
        speed_of_sound: config.speed_of_sound,
    };
    room.validate()?;
    let r = config.array_radius_m;
    let m = config.wall_margin_m;
    let center = [
        uniform(rng, [m + r, dims[0] - m - r]),
        uniform(rng, [m + r, dims[1] - m - r]),
        uniform(rng, [m, dims[2] - m]),
    ];
    let array = ArraySpec::circular(center, r, config.mics);
    let min_dist = config.min_source_distance_m;
    let speech_position = place(rng, &room, m, &array.positions, min_dist)?;
    let n_noise = rng.gen_range(config.noise_sources[0]..=config.noise_sources[1]);
    let noise_positions = (0..n_noise)
        .map(|_| place(rng, &room, m, &array.positions, min_dist))
        .collect::<Result<Vec<_>>>()?;
    let snr_db = uniform(rng, config.snr_db);
    let len = config.samples();
    let speech = pseudo_speech(len, config.fs, rng);
    let noises = (0..n_noise)
        .map(|_| {
            let e = uniform(rng, config.noise_exponent);
            colored_noise(len, e, rng)
        })
        .collect();
    Ok(SceneDraw { room, array, mixture: MixtureSpec { snr_db, speech_position, noise_positions }, speech, noises })
}

/// Seed of utterance `index` in a dataset generated from `seed`.
pub fn utterance_seed(seed: u64, index: u64) -> u64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng.gen()
}

/// Generator for utterance `index`, independent of every other index.
pub fn utterance_rng(seed: u64, index: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(utterance_seed(seed, index))
}

/// One line of the dataset manifest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestRecord {
    pub id: String,
    /// Relative to the manifest's directory.
    pub noisy_path: String,
    pub target_path: String,
    pub snr_db: f64,
    pub room_dims: [f64; 3],
    pub absorption: f64,
    pub n_noise: usize,
    /// Regenerates this utterance via `ChaCha8Rng::seed_from_u64`.
    pub seed: u64,
}

/// Simulates `count` utterances into `out_dir`: multichannel noisy WAVs,
/// single-channel direct-path targets and a line-delimited manifest.
pub fn generate_dataset(config: &SceneConfig, count: usize, seed: u64, out_dir: &Path) -> Result<Vec<ManifestRecord>> {
    config.validate()?;
    std::fs::create_dir_all(out_dir)?;
    let records = (0..count)
        .into_par_iter()
        .map(|i| -> Result<ManifestRecord> {
            let sub = utterance_seed(seed, i as u64);
            let mut rng = ChaCha8Rng::seed_from_u64(sub);
            let scene = draw_scene(config, &mut rng)?;
            let out = scene.simulate(config.fs)?;
            let id = format!("utt{i:05}");
            let noisy_path = format!("{id}_noisy.wav");
            let target_path = format!("{id}_target.wav");
            write_wav(out_dir.join(&noisy_path), &out.y)?;
            write_wav(out_dir.join(&target_path), &out.target())?;
            Ok(ManifestRecord {
                id,
                noisy_path,
                target_path,
                snr_db: scene.mixture.snr_db,
                room_dims: scene.room.dimensions,
                absorption: scene.room.absorption,
                n_noise: scene.noises.len(),
                seed: sub,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let mut w = BufWriter::new(File::create(out_dir.join(MANIFEST_FILE))?);
    for r in &records {
        writeln!(w, "{}", serde_json::to_string(r).expect("manifest records serialize"))?;
    }
    w.flush()?;
    Ok(records)
}
