//! Trainable analysis/synthesis transforms of the neural Wiener filter.
//!
//! The analysis matrix `B` maps an `iW`-sample frame to `2F` reals, read as
//! `F` complex bins (first half real, second half imaginary). The synthesis
//! matrix `D` maps the `2F` stacked parts of a filtered bin vector back to an
//! output frame.

use num_complex::Complex;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::framing::{FrameSpec, FrameTensor, SynthesisMode};
use crate::scalar::{dot, Real};

/// Real analysis matrix `B` of shape `[2F × iW]`.
#[derive(Debug, Clone, PartialEq)]
pub struct AnalysisTransform<T> {
    bins: usize,
    input_frame: usize,
    matrix: Vec<T>,
}

/// Real synthesis matrix `D` of shape `[W_out × 2F]`.
#[derive(Debug, Clone, PartialEq)]
pub struct SynthesisTransform<T> {
    bins: usize,
    output_frame: usize,
    matrix: Vec<T>,
}

fn check_finite<T: Real>(m: &[T], what: &'static str) -> Result<()> {
    if m.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(Error::NonFinite(what))
    }
}

impl<T: Real> AnalysisTransform<T> {
    pub fn from_matrix(bins: usize, input_frame: usize, matrix: Vec<T>) -> Result<Self> {
        if bins == 0 || input_frame == 0 || matrix.len() != 2 * bins * input_frame {
            return Err(Error::ShapeMismatch(format!(
                "analysis matrix of {} values is not {}x{}",
                matrix.len(),
                2 * bins,
                input_frame
            )));
        }
        check_finite(&matrix, "analysis matrix")?;
        Ok(Self { bins, input_frame, matrix })
    }

    pub fn bins(&self) -> usize {
        self.bins
    }

    pub fn input_frame(&self) -> usize {
        self.input_frame
    }

    pub fn matrix(&self) -> &[T] {
        &self.matrix
    }

    /// Applies `B` to one frame and packs the result into complex bins.
    pub fn analyze_frame(&self, frame: &[T], out: &mut [Complex<T>]) {
        let w = self.input_frame;
        let f = self.bins;
        for (k, o) in out.iter_mut().enumerate().take(f) {
            let re = dot(&self.matrix[k * w..(k + 1) * w], frame);
            let im = dot(&self.matrix[(f + k) * w..(f + k + 1) * w], frame);
            *o = Complex::new(re, im);
        }
    }
}

impl<T: Real> SynthesisTransform<T> {
    pub fn from_matrix(bins: usize, output_frame: usize, matrix: Vec<T>) -> Result<Self> {
        if bins == 0 || output_frame == 0 || matrix.len() != 2 * bins * output_frame {
            return Err(Error::ShapeMismatch(format!(
                "synthesis matrix of {} values is not {}x{}",
                matrix.len(),
                output_frame,
                2 * bins
            )));
        }
        check_finite(&matrix, "synthesis matrix")?;
        Ok(Self { bins, output_frame, matrix })
    }

    pub fn bins(&self) -> usize {
        self.bins
    }

    pub fn output_frame(&self) -> usize {
        self.output_frame
    }

    pub fn matrix(&self) -> &[T] {
        &self.matrix
    }

    /// Multiplies every entry by `gain`.
    pub fn scaled(&self, gain: T) -> Self {
        Self {
            matrix: self.matrix.iter().map(|&v| v * gain).collect(),
            ..self.clone()
        }
    }

    /// Folds the `J / oW` overlap-add normalization into `D` for an
    /// overlap-add stage, so an identity analyze→synthesize chain keeps unit gain.
    pub fn ola_compensated(&self, spec: &FrameSpec) -> Self {
        match spec.mode {
            SynthesisMode::Concat => self.clone(),
            SynthesisMode::OverlapAdd => {
                self.scaled(T::count(spec.hop) / T::count(spec.output_frame))
            }
        }
    }

    /// Applies `D` to the stacked real/imaginary parts of one bin vector.
    pub fn synthesize_frame(&self, spectrum: &[Complex<T>], out: &mut [T]) {
        let stacked = unpack(spectrum);
        let cols = 2 * self.bins;
        for (j, o) in out.iter_mut().enumerate().take(self.output_frame) {
            *o = dot(&self.matrix[j * cols..(j + 1) * cols], &stacked);
        }
    }
}

/// Complex transform-domain representation `[M × T × F]`.
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexSpectrum<T> {
    pub channels: usize,
    pub frames: usize,
    pub bins: usize,
    pub hop: usize,
    pub sample_rate: u32,
    pub data: Vec<Complex<T>>,
}

impl<T: Real> ComplexSpectrum<T> {
    pub fn zeros(channels: usize, frames: usize, bins: usize, hop: usize, sample_rate: u32) -> Self {
        Self {
            channels,
            frames,
            bins,
            hop,
            sample_rate,
            data: vec![Complex::new(T::zero(), T::zero()); channels * frames * bins],
        }
    }

    pub fn at(&self, m: usize, t: usize) -> &[Complex<T>] {
        let start = (m * self.frames + t) * self.bins;
        &self.data[start..start + self.bins]
    }

    pub fn at_mut(&mut self, m: usize, t: usize) -> &mut [Complex<T>] {
        let start = (m * self.frames + t) * self.bins;
        &mut self.data[start..start + self.bins]
    }

    pub fn get(&self, m: usize, t: usize, f: usize) -> Complex<T> {
        self.data[(m * self.frames + t) * self.bins + f]
    }
}

/// Reads `[re_0..re_{F-1}, im_0..im_{F-1}]` as `F` complex values.
pub fn pack<T: Real>(stacked: &[T]) -> Vec<Complex<T>> {
    let f = stacked.len() / 2;
    (0..f).map(|k| Complex::new(stacked[k], stacked[f + k])).collect()
}

/// Inverse of [`pack`].
pub fn unpack<T: Real>(bins: &[Complex<T>]) -> Vec<T> {
    bins.iter().map(|c| c.re).chain(bins.iter().map(|c| c.im)).collect()
}

/// DFT-initialized transforms for frames of `input_frame` samples.
///
/// `B` holds `cos(2πkn/iW)` and `-sin(2πkn/iW)` rows for the `iW/2 + 1`
/// one-sided bins. `D` is the pseudo-inverse of `B` restricted to the last
/// `output_frame` samples, i.e. the real inverse DFT of those samples with
/// the imaginary parts of the DC and Nyquist bins ignored.
pub fn dft_init<T: Real>(
    input_frame: usize,
    output_frame: usize,
) -> Result<(AnalysisTransform<T>, SynthesisTransform<T>)> {
    if input_frame == 0 || !input_frame.is_multiple_of(2) {
        return Err(Error::InvalidSpec(format!(
            "DFT initialization needs an even frame size, got {input_frame}"
        )));
    }
    if output_frame == 0 || output_frame > input_frame {
        return Err(Error::InvalidSpec(format!(
            "synthesis width {output_frame} outside [1, {input_frame}]"
        )));
    }
    let n = input_frame;
    let f = n / 2 + 1;
    let angle = |k: usize, i: usize| 2.0 * std::f64::consts::PI * ((k * i) % n) as f64 / n as f64;

    let mut b = vec![T::zero(); 2 * f * n];
    for k in 0..f {
        for i in 0..n {
            let a = angle(k, i);
            b[k * n + i] = T::lit(a.cos());
            b[(f + k) * n + i] = T::lit(-a.sin());
        }
    }

    let mut d = vec![T::zero(); output_frame * 2 * f];
    let first = n - output_frame;
    for j in 0..output_frame {
        let i = first + j;
        for k in 0..f {
            let weight = if k == 0 || k == f - 1 { 1.0 } else { 2.0 } / n as f64;
            let a = angle(k, i);
            d[j * 2 * f + k] = T::lit(weight * a.cos());
            if k != 0 && k != f - 1 {
                d[j * 2 * f + f + k] = T::lit(-weight * a.sin());
            }
        }
    }
    Ok((
        AnalysisTransform::from_matrix(f, n, b)?,
        SynthesisTransform::from_matrix(f, output_frame, d)?,
    ))
}

/// Randomly initialized transforms, i.i.d. uniform with standard deviation `1/sqrt(iW)`.
pub fn random_init<T: Real>(
    input_frame: usize,
    bins: usize,
    output_frame: usize,
    seed: u64,
) -> Result<(AnalysisTransform<T>, SynthesisTransform<T>)> {
    if input_frame == 0 || bins == 0 || output_frame == 0 {
        return Err(Error::InvalidSpec("transform dimensions must be positive".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let limit = (3.0 / input_frame as f64).sqrt();
    let mut draw = |count: usize| -> Vec<T> {
        (0..count).map(|_| T::lit(rng.gen_range(-limit..limit))).collect()
    };
    let b = draw(2 * bins * input_frame);
    let d = draw(output_frame * 2 * bins);
    Ok((
        AnalysisTransform::from_matrix(bins, input_frame, b)?,
        SynthesisTransform::from_matrix(bins, output_frame, d)?,
    ))
}

/// Projects every frame with `B` and packs it into complex bins.
pub fn analyze<T: Real>(
    frames: &FrameTensor<T>,
    transform: &AnalysisTransform<T>,
) -> Result<ComplexSpectrum<T>> {
    if frames.width != transform.input_frame {
        return Err(Error::ShapeMismatch(format!(
            "frame width {} does not match analysis input {}",
            frames.width, transform.input_frame
        )));
    }
    let mut out = ComplexSpectrum::zeros(
        frames.channels,
        frames.frames,
        transform.bins,
        frames.hop,
        frames.sample_rate,
    );
    for m in 0..frames.channels {
        for t in 0..frames.frames {
            transform.analyze_frame(frames.frame(m, t), out.at_mut(m, t));
        }
    }
    Ok(out)
}

/// Maps a single-channel spectrum back to output frames with `D`.
pub fn synthesize<T: Real>(
    spectrum: &ComplexSpectrum<T>,
    transform: &SynthesisTransform<T>,
) -> Result<FrameTensor<T>> {
    if spectrum.channels != 1 {
        return Err(Error::ShapeMismatch(format!(
            "synthesis needs a single-channel spectrum, got {} channels",
            spectrum.channels
        )));
    }
    if spectrum.bins != transform.bins {
        return Err(Error::ShapeMismatch(format!(
            "spectrum has {} bins, synthesis expects {}",
            spectrum.bins, transform.bins
        )));
    }
    let mut out = FrameTensor::zeros(
        1,
        spectrum.frames,
        transform.output_frame,
        spectrum.hop,
        spectrum.sample_rate,
    );
    for t in 0..spectrum.frames {
        transform.synthesize_frame(spectrum.at(0, t), out.frame_mut(0, t));
    }
    Ok(out)
}
