//! Lightweight low-latency recurrent enhancer.
//!
//! Per frame: a shared linear projection `iW → H` with layer norm and PReLU
//! for every channel, a spatial projection `M·H → H` over the concatenated
//! channel latents, `blocks` × (layer norm → LSTM), and an output projection
//! `H → oW`. Frames are joined by concatenation (`oW = J`) or overlap-add.

mod budget;
mod weights;

pub use budget::{count_flops, count_params};
pub use weights::{LlrnnWeights, LstmParams, RecurrentBlock};

use crate::error::{Error, Result};
use crate::framing::{pad_and_frame, synthesize_aligned, FrameSpec, FrameTensor, MultichannelSignal, SynthesisMode};
use crate::model_store::TensorContainer;
use crate::scalar::{matvec, Real};

/// Layer-norm epsilon.
pub const LN_EPS: f64 = 1e-5;

/// Shape of one LLRNN.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LlrnnConfig {
    /// Input channels `M`.
    pub channels: usize,
    pub frame: FrameSpec,
    /// Hidden size `H`.
    pub hidden: usize,
    /// Number of recurrent blocks.
    pub blocks: usize,
}

impl LlrnnConfig {
    pub fn new(channels: usize, frame: FrameSpec, hidden: usize, blocks: usize) -> Result<Self> {
        let c = Self { channels, frame, hidden, blocks };
        c.validate()?;
        Ok(c)
    }

    /// 8 channels, `iW = 256`, `J = 16`, `oW = 32` with overlap-add, two blocks.
    pub fn standard(hidden: usize) -> Self {
        Self {
            channels: 8,
            frame: FrameSpec { input_frame: 256, hop: 16, output_frame: 32, mode: SynthesisMode::OverlapAdd },
            hidden,
            blocks: 2,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.frame.validate()?;
        if self.channels == 0 || self.hidden == 0 || self.blocks == 0 {
            return Err(Error::Config(format!(
                "llrnn needs M, H and blocks >= 1 (got {}, {}, {})",
                self.channels, self.hidden, self.blocks
            )));
        }
        Ok(())
    }

    pub(crate) fn write_meta(&self, c: &mut TensorContainer, prefix: &str) {
        c.set_meta(format!("{prefix}.M"), self.channels);
        c.set_meta(format!("{prefix}.iW"), self.frame.input_frame);
        c.set_meta(format!("{prefix}.J"), self.frame.hop);
        c.set_meta(format!("{prefix}.oW"), self.frame.output_frame);
        c.set_meta(format!("{prefix}.H"), self.hidden);
        c.set_meta(format!("{prefix}.blocks"), self.blocks);
        c.set_meta(format!("{prefix}.synthesis"), self.frame.mode.as_str());
    }

    pub(crate) fn read_meta(c: &TensorContainer, prefix: &str) -> Result<Self> {
        let key = |k: &str| format!("{prefix}.{k}");
        let mode_key = key("synthesis");
        let mode_raw: String = c.meta_parse(&mode_key)?;
        let mode = SynthesisMode::parse(&mode_raw)
            .ok_or_else(|| Error::Config(format!("{mode_key}: unknown synthesis mode {mode_raw:?}")))?;
        let frame = FrameSpec::new(
            c.meta_parse(&key("iW"))?,
            c.meta_parse(&key("J"))?,
            c.meta_parse(&key("oW"))?,
            mode,
        )?;
        Self::new(
            c.meta_parse(&key("M"))?,
            frame,
            c.meta_parse(&key("H"))?,
            c.meta_parse(&key("blocks"))?,
        )
    }
}

/// `gain ⊙ (x − mean) / sqrt(var + eps) + bias` with population variance.
pub fn layer_norm<T: Real>(x: &[T], gain: &[T], bias: &[T], eps: T) -> Vec<T> {
    let mut out = vec![T::zero(); x.len()];
    layer_norm_into(x, gain, bias, eps, &mut out);
    out
}

fn layer_norm_into<T: Real>(x: &[T], gain: &[T], bias: &[T], eps: T, out: &mut [T]) {
    let n = T::count(x.len());
    let mean = x.iter().copied().sum::<T>() / n;
    let var = x.iter().map(|&v| (v - mean) * (v - mean)).sum::<T>() / n;
    let scale = (var + eps).sqrt().recip();
    for (((o, &v), &g), &b) in out.iter_mut().zip(x).zip(gain).zip(bias) {
        *o = g * (v - mean) * scale + b;
    }
}

#[inline]
pub fn prelu<T: Real>(x: T, slope: T) -> T {
    if x >= T::zero() {
        x
    } else {
        slope * x
    }
}

#[inline]
fn sigmoid<T: Real>(x: T) -> T {
    (T::one() + (-x).exp()).recip()
}

/// One LSTM step; returns `(h', c')`.
pub fn lstm_cell<T: Real>(x: &[T], h: &[T], c: &[T], params: &LstmParams<T>) -> (Vec<T>, Vec<T>) {
    let hidden = params.hidden();
    let mut gates = vec![T::zero(); 4 * hidden];
    let mut h_out = vec![T::zero(); hidden];
    let mut c_out = c.to_vec();
    lstm_step(x, h, &mut c_out, params, &mut gates, &mut h_out);
    (h_out, c_out)
}

fn lstm_step<T: Real>(x: &[T], h: &[T], c: &mut [T], p: &LstmParams<T>, gates: &mut [T], h_out: &mut [T]) {
    let hidden = h.len();
    matvec(&p.wx, 4 * hidden, x, Some(&p.b), gates);
    for (r, g) in gates.iter_mut().enumerate() {
        *g = *g + crate::scalar::dot(&p.wh[r * hidden..(r + 1) * hidden], h);
    }
    for k in 0..hidden {
        let i = sigmoid(gates[k]);
        let f = sigmoid(gates[hidden + k]);
        let g = gates[2 * hidden + k].tanh();
        let o = sigmoid(gates[3 * hidden + k]);
        c[k] = f * c[k] + i * g;
        h_out[k] = o * c[k].tanh();
    }
}

/// Concatenates per-channel latents (channel 0 first) and projects `M·H → H`.
///
/// `latent` is `[M × T × H]`; the result is `[T × H]`.
pub fn spatial_reduce<T: Real>(latent: &[T], frames: usize, weights: &LlrnnWeights<T>) -> Result<Vec<T>> {
    let m = weights.config.channels;
    let h = weights.config.hidden;
    if latent.len() != m * frames * h {
        return Err(Error::ShapeMismatch(format!(
            "latent of {} values is not {m}x{frames}x{h}",
            latent.len()
        )));
    }
    let mut out = vec![T::zero(); frames * h];
    let mut cat = vec![T::zero(); m * h];
    for t in 0..frames {
        for ch in 0..m {
            let src = &latent[(ch * frames + t) * h..(ch * frames + t + 1) * h];
            cat[ch * h..(ch + 1) * h].copy_from_slice(src);
        }
        matvec(&weights.spatial_w, h, &cat, Some(&weights.spatial_b), &mut out[t * h..(t + 1) * h]);
    }
    Ok(out)
}

/// Per-stream recurrent state plus scratch buffers.
#[derive(Debug, Clone)]
pub struct LlrnnState<T> {
    h: Vec<Vec<T>>,
    c: Vec<Vec<T>>,
    cat: Vec<T>,
    latent: Vec<T>,
    normed: Vec<T>,
    gates: Vec<T>,
    next_h: Vec<T>,
}

impl<T: Real> LlrnnState<T> {
    pub fn new(config: &LlrnnConfig) -> Self {
        let h = config.hidden;
        Self {
            h: vec![vec![T::zero(); h]; config.blocks],
            c: vec![vec![T::zero(); h]; config.blocks],
            cat: vec![T::zero(); config.channels * h],
            latent: vec![T::zero(); h],
            normed: vec![T::zero(); h],
            gates: vec![T::zero(); 4 * h],
            next_h: vec![T::zero(); h],
        }
    }

    /// Processes one input frame per channel into one output frame of `oW`
    /// samples and returns the top block's hidden state.
    pub fn step(&mut self, w: &LlrnnWeights<T>, frames: &[&[T]], out: &mut [T]) -> &[T] {
        let hsz = w.config.hidden;
        let eps = T::lit(LN_EPS);
        for (ch, frame) in frames.iter().enumerate() {
            matvec(&w.in_proj_w, hsz, frame, Some(&w.in_proj_b), &mut self.latent);
            let dst = &mut self.cat[ch * hsz..(ch + 1) * hsz];
            layer_norm_into(&self.latent, &w.in_ln_gain, &w.in_ln_bias, eps, dst);
            for (v, &a) in dst.iter_mut().zip(&w.prelu_slope) {
                *v = prelu(*v, a);
            }
        }
        matvec(&w.spatial_w, hsz, &self.cat, Some(&w.spatial_b), &mut self.latent);
        for (k, blk) in w.blocks.iter().enumerate() {
            layer_norm_into(&self.latent, &blk.ln_gain, &blk.ln_bias, eps, &mut self.normed);
            lstm_step(&self.normed, &self.h[k], &mut self.c[k], &blk.lstm, &mut self.gates, &mut self.next_h);
            self.h[k].copy_from_slice(&self.next_h);
            self.latent.copy_from_slice(&self.next_h);
        }
        matvec(&w.out_proj_w, w.config.frame.output_frame, &self.latent, Some(&w.out_proj_b), out);
        &self.latent
    }
}

/// Result of a full-utterance forward pass.
#[derive(Debug, Clone)]
pub struct LlrnnOutput<T> {
    /// Single-channel enhanced signal, aligned with the input.
    pub signal: MultichannelSignal<T>,
    /// Top recurrent block output per frame, `[T × H]`.
    pub latents: Vec<T>,
}

fn check_input<T: Real>(signal: &MultichannelSignal<T>, weights: &LlrnnWeights<T>) -> Result<()> {
    if signal.channels() != weights.config.channels {
        return Err(Error::ShapeMismatch(format!(
            "input has {} channels, model expects {}",
            signal.channels(),
            weights.config.channels
        )));
    }
    Ok(())
}

/// Runs the network causally over a whole utterance.
pub fn forward<T: Real>(signal: &MultichannelSignal<T>, weights: &LlrnnWeights<T>) -> Result<LlrnnOutput<T>> {
    check_input(signal, weights)?;
    let cfg = &weights.config;
    let frames = pad_and_frame(signal, &cfg.frame)?;
    let mut state = LlrnnState::new(cfg);
    let mut out = FrameTensor::zeros(1, frames.frames, cfg.frame.output_frame, cfg.frame.hop, signal.sample_rate());
    let mut latents = Vec::with_capacity(frames.frames * cfg.hidden);
    for t in 0..frames.frames {
        let inputs: Vec<&[T]> = (0..cfg.channels).map(|m| frames.frame(m, t)).collect();
        let latent = state.step(weights, &inputs, out.frame_mut(0, t));
        latents.extend_from_slice(latent);
    }
    let signal = synthesize_aligned(&out, cfg.frame.mode, signal.len())?;
    Ok(LlrnnOutput { signal, latents })
}

/// Chunked streaming inference; output is emitted as soon as it is final.
#[derive(Debug, Clone)]
pub struct LlrnnStream<'w, T> {
    weights: &'w LlrnnWeights<T>,
    state: LlrnnState<T>,
    history: Vec<Vec<T>>,
    pending: Vec<Vec<T>>,
    ola: Vec<T>,
    frame_out: Vec<T>,
    to_skip: usize,
    received: usize,
    emitted: usize,
}

impl<'w, T: Real> LlrnnStream<'w, T> {
    pub fn new(weights: &'w LlrnnWeights<T>) -> Self {
        let cfg = &weights.config;
        Self {
            weights,
            state: LlrnnState::new(cfg),
            history: vec![vec![T::zero(); cfg.frame.input_frame]; cfg.channels],
            pending: vec![Vec::with_capacity(cfg.frame.hop); cfg.channels],
            ola: vec![T::zero(); cfg.frame.output_frame],
            frame_out: vec![T::zero(); cfg.frame.output_frame],
            to_skip: cfg.frame.output_frame - cfg.frame.hop,
            received: 0,
            emitted: 0,
        }
    }

    fn run_hop(&mut self, out: &mut Vec<T>) {
        let cfg = &self.weights.config;
        let hop = cfg.frame.hop;
        for (hist, pend) in self.history.iter_mut().zip(&mut self.pending) {
            hist.rotate_left(hop);
            let n = hist.len();
            hist[n - hop..].copy_from_slice(pend);
            pend.clear();
        }
        let inputs: Vec<&[T]> = self.history.iter().map(Vec::as_slice).collect();
        self.state.step(self.weights, &inputs, &mut self.frame_out);
        for (acc, &v) in self.ola.iter_mut().zip(&self.frame_out) {
            *acc = *acc + v;
        }
        let ready: Vec<T> = self.ola[..hop].to_vec();
        self.ola.rotate_left(hop);
        let n = self.ola.len();
        self.ola[n - hop..].iter_mut().for_each(|v| *v = T::zero());
        self.emit(&ready, out);
    }

    fn emit(&mut self, samples: &[T], out: &mut Vec<T>) {
        let skip = self.to_skip.min(samples.len());
        self.to_skip -= skip;
        let rest = &samples[skip..];
        let room = self.received - self.emitted;
        let take = rest.len().min(room);
        out.extend_from_slice(&rest[..take]);
        self.emitted += take;
    }

    /// Feeds one chunk (one slice per channel) and returns the newly final samples.
    pub fn push(&mut self, chunk: &[&[T]]) -> Result<Vec<T>> {
        let cfg = &self.weights.config;
        if chunk.len() != cfg.channels {
            return Err(Error::ShapeMismatch(format!(
                "chunk has {} channels, model expects {}",
                chunk.len(),
                cfg.channels
            )));
        }
        let len = chunk[0].len();
        if chunk.iter().any(|c| c.len() != len) {
            return Err(Error::ShapeMismatch("chunk channels differ in length".into()));
        }
        let hop = cfg.frame.hop;
        let mut out = Vec::new();
        let mut pos = 0;
        while pos < len {
            let need = hop - self.pending[0].len();
            let take = need.min(len - pos);
            for (pend, src) in self.pending.iter_mut().zip(chunk) {
                pend.extend_from_slice(&src[pos..pos + take]);
            }
            pos += take;
            self.received += take;
            if self.pending[0].len() == hop {
                self.run_hop(&mut out);
            }
        }
        Ok(out)
    }

    /// Zero-pads the last partial hop and flushes the overlap-add tail.
    pub fn finish(mut self) -> Vec<T> {
        let hop = self.weights.config.frame.hop;
        let mut out = Vec::new();
        if !self.pending[0].is_empty() {
            for pend in &mut self.pending {
                pend.resize(hop, T::zero());
            }
            self.run_hop(&mut out);
        }
        let tail = std::mem::take(&mut self.ola);
        self.emit(&tail, &mut out);
        out
    }
}
