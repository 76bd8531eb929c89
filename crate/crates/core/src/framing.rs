//! Causal overlapping framing, frame synthesis and latency accounting.
//!
//! Frames are taken at hop `J` from a signal that has `iW - J` zeros
//! prepended, so the last sample of frame `t` is input sample `(t+1)·J - 1`.
//! Output frames cover the rightmost samples of their input frame, which is
//! what makes the algorithmic latency equal to the output frame width.

use crate::error::{Error, Result};
use crate::scalar::Real;

/// How output frames are turned back into a waveform.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SynthesisMode {
    /// Output frames of width `J` are concatenated.
    Concat,
    /// Output frames of width `oW` are overlap-added at hop `J`.
    OverlapAdd,
}

impl SynthesisMode {
    pub fn as_str(self) -> &'static str {
        match self {
            SynthesisMode::Concat => "concat",
            SynthesisMode::OverlapAdd => "ola",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "concat" => Some(SynthesisMode::Concat),
            "ola" => Some(SynthesisMode::OverlapAdd),
            _ => None,
        }
    }
}

/// Framing geometry of one processing stage.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct FrameSpec {
    /// Input frame size `iW`.
    pub input_frame: usize,
    /// Frame shift `J`.
    pub hop: usize,
    /// Output frame size `oW`.
    pub output_frame: usize,
    pub mode: SynthesisMode,
}

impl FrameSpec {
    pub fn new(
        input_frame: usize,
        hop: usize,
        output_frame: usize,
        mode: SynthesisMode,
    ) -> Result<Self> {
        let spec = Self { input_frame, hop, output_frame, mode };
        spec.validate()?;
        Ok(spec)
    }

    /// Stage that concatenates `J`-sample output frames.
    pub fn concat(input_frame: usize, hop: usize) -> Result<Self> {
        Self::new(input_frame, hop, hop, SynthesisMode::Concat)
    }

    /// Stage that overlap-adds `oW`-sample output frames.
    pub fn overlap_add(input_frame: usize, hop: usize, output_frame: usize) -> Result<Self> {
        Self::new(input_frame, hop, output_frame, SynthesisMode::OverlapAdd)
    }

    pub fn validate(&self) -> Result<()> {
        if self.hop == 0 {
            return Err(Error::InvalidSpec("hop must be at least 1".into()));
        }
        if self.input_frame < self.hop {
            return Err(Error::InvalidSpec(format!(
                "input frame {} shorter than hop {}",
                self.input_frame, self.hop
            )));
        }
        if self.output_frame < self.hop || self.output_frame > self.input_frame {
            return Err(Error::InvalidSpec(format!(
                "output frame {} outside [hop {}, input frame {}]",
                self.output_frame, self.hop, self.input_frame
            )));
        }
        if self.mode == SynthesisMode::Concat && self.output_frame != self.hop {
            return Err(Error::InvalidSpec(format!(
                "concat synthesis needs output frame == hop, got {} != {}",
                self.output_frame, self.hop
            )));
        }
        Ok(())
    }

    /// Number of frames produced for a signal of `len` samples.
    pub fn frame_count(&self, len: usize) -> usize {
        len.div_ceil(self.hop)
    }

    /// Zeros prepended before framing.
    pub fn front_padding(&self) -> usize {
        self.input_frame - self.hop
    }

    /// Algorithmic latency in samples.
    pub fn latency(&self) -> usize {
        algorithmic_latency(self)
    }

    pub fn latency_ms(&self, sample_rate: u32) -> f64 {
        self.latency() as f64 * 1000.0 / sample_rate as f64
    }
}

/// Sample-domain multichannel audio, stored channel-major.
#[derive(Debug, Clone, PartialEq)]
pub struct MultichannelSignal<T> {
    sample_rate: u32,
    channels: usize,
    len: usize,
    data: Vec<T>,
}

impl<T: Real> MultichannelSignal<T> {
    pub fn new(sample_rate: u32, channels: Vec<Vec<T>>) -> Result<Self> {
        let m = channels.len();
        if m == 0 {
            return Err(Error::EmptySignal);
        }
        let len = channels[0].len();
        if len == 0 {
            return Err(Error::EmptySignal);
        }
        if channels.iter().any(|c| c.len() != len) {
            return Err(Error::ShapeMismatch("channels differ in length".into()));
        }
        let data: Vec<T> = channels.into_iter().flatten().collect();
        Self::from_flat(sample_rate, m, data)
    }

    /// Builds a signal from channel-major samples `[M × L]`.
    pub fn from_flat(sample_rate: u32, channels: usize, data: Vec<T>) -> Result<Self> {
        if channels == 0 || data.is_empty() {
            return Err(Error::EmptySignal);
        }
        if !data.len().is_multiple_of(channels) {
            return Err(Error::ShapeMismatch(format!(
                "{} samples do not split into {} channels",
                data.len(),
                channels
            )));
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("signal"));
        }
        let len = data.len() / channels;
        Ok(Self { sample_rate, channels, len, data })
    }

    pub fn mono(sample_rate: u32, samples: Vec<T>) -> Result<Self> {
        Self::from_flat(sample_rate, 1, samples)
    }

    pub fn zeros(sample_rate: u32, channels: usize, len: usize) -> Result<Self> {
        Self::from_flat(sample_rate, channels, vec![T::zero(); channels * len])
    }

    pub fn sample_rate(&self) -> u32 {
        self.sample_rate
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn channel(&self, m: usize) -> &[T] {
        &self.data[m * self.len..(m + 1) * self.len]
    }

    pub fn data(&self) -> &[T] {
        &self.data
    }

    pub fn into_data(self) -> Vec<T> {
        self.data
    }

    pub fn iter_channels(&self) -> impl Iterator<Item = &[T]> {
        self.data.chunks_exact(self.len)
    }

    /// Keeps the first `len` samples of every channel.
    pub fn truncated(&self, len: usize) -> Result<Self> {
        let len = len.min(self.len);
        let data = self.iter_channels().flat_map(|c| c[..len].iter().copied()).collect();
        Self::from_flat(self.sample_rate, self.channels, data)
    }

    /// Stacks the channels of `self` followed by those of `other`.
    pub fn stack(&self, other: &Self) -> Result<Self> {
        if self.len != other.len {
            return Err(Error::ShapeMismatch(format!(
                "cannot stack lengths {} and {}",
                self.len, other.len
            )));
        }
        let mut data = self.data.clone();
        data.extend_from_slice(&other.data);
        Self::from_flat(self.sample_rate, self.channels + other.channels, data)
    }

    pub fn scaled(&self, gain: T) -> Self {
        Self {
            data: self.data.iter().map(|&v| v * gain).collect(),
            ..self.clone()
        }
    }

    /// Converts the sample type.
    pub fn cast<U: Real>(&self) -> MultichannelSignal<U> {
        MultichannelSignal {
            sample_rate: self.sample_rate,
            channels: self.channels,
            len: self.len,
            data: self.data.iter().map(|v| U::from(*v).unwrap()).collect(),
        }
    }
}

/// Framed view `[M × T × W]` of a multichannel signal.
#[derive(Debug, Clone, PartialEq)]
pub struct FrameTensor<T> {
    pub channels: usize,
    pub frames: usize,
    pub width: usize,
    pub hop: usize,
    pub sample_rate: u32,
    pub data: Vec<T>,
}

impl<T: Real> FrameTensor<T> {
    pub fn zeros(channels: usize, frames: usize, width: usize, hop: usize, sample_rate: u32) -> Self {
        Self {
            channels,
            frames,
            width,
            hop,
            sample_rate,
            data: vec![T::zero(); channels * frames * width],
        }
    }

    pub fn frame(&self, m: usize, t: usize) -> &[T] {
        let start = (m * self.frames + t) * self.width;
        &self.data[start..start + self.width]
    }

    pub fn frame_mut(&mut self, m: usize, t: usize) -> &mut [T] {
        let start = (m * self.frames + t) * self.width;
        &mut self.data[start..start + self.width]
    }

    /// Padded-sample index of the first sample of frame `t`.
    pub fn origin(&self, t: usize) -> usize {
        t * self.hop
    }
}

/// Prepends `iW - J` zeros and cuts `ceil(L / J)` frames of width `iW` at hop `J`.
pub fn pad_and_frame<T: Real>(
    signal: &MultichannelSignal<T>,
    spec: &FrameSpec,
) -> Result<FrameTensor<T>> {
    spec.validate()?;
    if signal.is_empty() {
        return Err(Error::EmptySignal);
    }
    let width = spec.input_frame;
    let pad = spec.front_padding();
    let frames = spec.frame_count(signal.len());
    let mut out = FrameTensor::zeros(signal.channels(), frames, width, spec.hop, signal.sample_rate());
    for m in 0..signal.channels() {
        let x = signal.channel(m);
        for t in 0..frames {
            let frame = out.frame_mut(m, t);
            // padded index p maps to input index p - pad
            let first = t * spec.hop;
            for (k, v) in frame.iter_mut().enumerate() {
                let p = first + k;
                if p >= pad {
                    if let Some(&s) = x.get(p - pad) {
                        *v = s;
                    }
                }
            }
        }
    }
    Ok(out)
}

/// Concatenates frames whose width equals the hop.
pub fn concat_frames<T: Real>(frames: &FrameTensor<T>) -> Result<MultichannelSignal<T>> {
    if frames.width != frames.hop {
        return Err(Error::ShapeMismatch(format!(
            "concat needs frame width == hop, got {} != {}",
            frames.width, frames.hop
        )));
    }
    MultichannelSignal::from_flat(frames.sample_rate, frames.channels, frames.data.clone())
}

/// Overlap-adds frames at their hop; output length is `(T-1)·J + W`.
pub fn overlap_add<T: Real>(frames: &FrameTensor<T>) -> Result<MultichannelSignal<T>> {
    if frames.width < frames.hop {
        return Err(Error::ShapeMismatch(format!(
            "overlap-add needs frame width >= hop, got {} < {}",
            frames.width, frames.hop
        )));
    }
    if frames.frames == 0 {
        return Err(Error::EmptySignal);
    }
    let len = (frames.frames - 1) * frames.hop + frames.width;
    let mut data = vec![T::zero(); frames.channels * len];
    for m in 0..frames.channels {
        let out = &mut data[m * len..(m + 1) * len];
        for t in 0..frames.frames {
            let start = t * frames.hop;
            for (o, &v) in out[start..start + frames.width].iter_mut().zip(frames.frame(m, t)) {
                *o = *o + v;
            }
        }
    }
    MultichannelSignal::from_flat(frames.sample_rate, frames.channels, data)
}

/// Output latency in samples: `oW` for overlap-add, `J` for concatenation.
pub fn algorithmic_latency(spec: &FrameSpec) -> usize {
    match spec.mode {
        SynthesisMode::OverlapAdd => spec.output_frame,
        SynthesisMode::Concat => spec.hop,
    }
}

/// End-to-end latency of stages run back to back on a shared frame grid.
///
/// Concat stages contribute nothing beyond the final stage; an intermediate
/// overlap-add stage adds its `oW - J` overlap.
pub fn stacked_latency(stages: &[FrameSpec]) -> Result<usize> {
    let last = stages
        .last()
        .ok_or_else(|| Error::InvalidSpec("no stages".into()))?;
    if stages.iter().any(|s| s.hop != last.hop) {
        return Err(Error::InvalidSpec("stages must share one hop".into()));
    }
    let extra: usize = stages[..stages.len() - 1]
        .iter()
        .map(|s| algorithmic_latency(s) - s.hop)
        .sum();
    Ok(algorithmic_latency(last) + extra)
}

/// Turns stage output frames back into a waveform aligned with the stage input.
///
/// Output frame `t` covers the input samples `[(t+1)·J - W, (t+1)·J)`, so the
/// overlap-added signal is shifted left by `W - J` and then cut to `len`.
pub fn synthesize_aligned<T: Real>(
    frames: &FrameTensor<T>,
    mode: SynthesisMode,
    len: usize,
) -> Result<MultichannelSignal<T>> {
    let joined = match mode {
        SynthesisMode::Concat => concat_frames(frames)?,
        SynthesisMode::OverlapAdd => overlap_add(frames)?,
    };
    let shift = frames.width - frames.hop;
    let available = joined.len() - shift;
    if available < len {
        return Err(Error::ShapeMismatch(format!(
            "{available} synthesized samples cannot cover length {len}"
        )));
    }
    let data = joined
        .iter_channels()
        .flat_map(|c| c[shift..shift + len].iter().copied())
        .collect();
    MultichannelSignal::from_flat(frames.sample_rate, frames.channels, data)
}
