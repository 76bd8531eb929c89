//! Sequential neural beamforming: DNN₁ → NWF → DNN₂.
//!
//! DNN₁ turns the `M`-channel mixture into a single-channel estimate that
//! serves as the Wiener target. The NWF output is stacked in front of the
//! original channels and DNN₂ maps those `M + 1` channels to the final
//! signal. Intermediate stages concatenate `J`-sample frames on a shared
//! frame grid, so only the final stage's output frame adds latency.

use crate::error::{Error, Result};
use crate::framing::{stacked_latency, FrameSpec, MultichannelSignal, SynthesisMode};
use crate::llrnn::{self, LlrnnConfig, LlrnnWeights};
use crate::model_store::{to_f32, to_real, Tensor, TensorContainer};
use crate::scalar::Real;
use crate::transform::{dft_init, random_init, AnalysisTransform, SynthesisTransform};
use crate::wiener::{nwf_enhance, WienerMode};

/// Which stages run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum PipelineMode {
    Dnn1Only,
    Dnn1Nwf,
    Dnn1Dnn2,
    FullStack,
    /// NWF driven by a clean reference target instead of DNN₁.
    OracleNwf,
}

impl PipelineMode {
    pub const ALL: [PipelineMode; 5] = [
        PipelineMode::Dnn1Only,
        PipelineMode::Dnn1Nwf,
        PipelineMode::Dnn1Dnn2,
        PipelineMode::FullStack,
        PipelineMode::OracleNwf,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            PipelineMode::Dnn1Only => "dnn1",
            PipelineMode::Dnn1Nwf => "dnn1-nwf",
            PipelineMode::Dnn1Dnn2 => "dnn1-dnn2",
            PipelineMode::FullStack => "full",
            PipelineMode::OracleNwf => "oracle-nwf",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|m| m.as_str() == s)
    }

    pub fn uses_dnn1(self) -> bool {
        !matches!(self, PipelineMode::OracleNwf)
    }

    pub fn uses_nwf(self) -> bool {
        matches!(self, PipelineMode::Dnn1Nwf | PipelineMode::FullStack | PipelineMode::OracleNwf)
    }

    pub fn uses_dnn2(self) -> bool {
        matches!(self, PipelineMode::Dnn1Dnn2 | PipelineMode::FullStack)
    }
}

/// Shape of the Wiener stage.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct NwfConfig {
    pub frame: FrameSpec,
    /// Complex bins `F`.
    pub bins: usize,
}

/// Stage shapes plus run-time options.
#[derive(Debug, Clone, PartialEq)]
pub struct PipelineConfig<T> {
    pub mode: PipelineMode,
    pub dnn1: Option<LlrnnConfig>,
    pub nwf: Option<NwfConfig>,
    pub dnn2: Option<LlrnnConfig>,
    pub wiener: WienerMode<T>,
    /// Number of NWF + DNN₂ refinement passes.
    pub iterations: usize,
    pub sample_rate: u32,
}

impl<T: Real> PipelineConfig<T> {
    /// Default stage geometry: `iW = 256`, `J = 16`, final
    /// `oW = 32` with overlap-add, intermediate stages concatenating, `F = 129`,
    /// 8 microphones, two recurrent blocks, online Wiener statistics.
    pub fn standard(mode: PipelineMode, hidden: usize) -> Self {
        Self::with_geometry(mode, 8, hidden, 2, 256, 16, 32)
    }

    /// Builds a configuration where every stage shares `iW` and `J` and the
    /// final stage overlap-adds `oW`-sample frames.
    pub fn with_geometry(
        mode: PipelineMode,
        channels: usize,
        hidden: usize,
        blocks: usize,
        input_frame: usize,
        hop: usize,
        output_frame: usize,
    ) -> Self {
        let inter = FrameSpec { input_frame, hop, output_frame: hop, mode: SynthesisMode::Concat };
        let last = FrameSpec {
            input_frame,
            hop,
            output_frame,
            mode: if output_frame == hop { SynthesisMode::Concat } else { SynthesisMode::OverlapAdd },
        };
        let llrnn = |m: usize, frame: FrameSpec| LlrnnConfig { channels: m, frame, hidden, blocks };
        let nwf = |frame: FrameSpec| NwfConfig { frame, bins: input_frame / 2 + 1 };
        let (dnn1, nwf, dnn2) = match mode {
            PipelineMode::Dnn1Only => (Some(llrnn(channels, last)), None, None),
            PipelineMode::Dnn1Nwf => (Some(llrnn(channels, inter)), Some(nwf(last)), None),
            PipelineMode::Dnn1Dnn2 => (Some(llrnn(channels, inter)), None, Some(llrnn(channels + 1, last))),
            PipelineMode::FullStack => {
                (Some(llrnn(channels, inter)), Some(nwf(inter)), Some(llrnn(channels + 1, last)))
            }
            PipelineMode::OracleNwf => (None, Some(nwf(last)), None),
        };
        Self { mode, dnn1, nwf, dnn2, wiener: WienerMode::online(), iterations: 1, sample_rate: 16_000 }
    }

    /// Derives stage shapes from a weight bundle.
    pub fn from_bundle(mode: PipelineMode, bundle: &ModelBundle<T>, wiener: WienerMode<T>) -> Result<Self> {
        let cfg = Self {
            mode,
            dnn1: if mode.uses_dnn1() { bundle.dnn1.as_ref().map(|w| w.config) } else { None },
            nwf: if mode.uses_nwf() { bundle.nwf.as_ref().map(NwfStage::config) } else { None },
            dnn2: if mode.uses_dnn2() { bundle.dnn2.as_ref().map(|w| w.config) } else { None },
            wiener,
            iterations: 1,
            sample_rate: bundle.sample_rate,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    /// Input channel count `M`.
    pub fn channels(&self) -> Option<usize> {
        self.dnn1
            .map(|c| c.channels)
            .or_else(|| self.dnn2.map(|c| c.channels - 1))
    }

    /// Stage frame specs in execution order.
    pub fn stages(&self) -> Vec<(&'static str, FrameSpec)> {
        let mut out = Vec::new();
        if let Some(c) = self.dnn1 {
            out.push(("dnn1", c.frame));
        }
        if let Some(c) = self.nwf {
            out.push(("nwf", c.frame));
        }
        if let Some(c) = self.dnn2 {
            out.push(("dnn2", c.frame));
        }
        out
    }

    pub fn validate(&self) -> Result<()> {
        let need = |present: bool, wanted: bool, name: &str| -> Result<()> {
            if present != wanted {
                let what = if wanted { "needs" } else { "does not use" };
                return Err(Error::Config(format!("mode {} {what} {name}", self.mode.as_str())));
            }
            Ok(())
        };
        need(self.dnn1.is_some(), self.mode.uses_dnn1(), "dnn1")?;
        need(self.nwf.is_some(), self.mode.uses_nwf(), "nwf")?;
        need(self.dnn2.is_some(), self.mode.uses_dnn2(), "dnn2")?;
        if self.iterations == 0 {
            return Err(Error::Config("iterations must be at least 1".into()));
        }
        if self.iterations > 1 && self.mode != PipelineMode::FullStack {
            return Err(Error::Config("repeated refinement needs the full stack".into()));
        }
        let stages = self.stages();
        for (name, spec) in &stages {
            spec.validate()?;
            let _ = name;
        }
        for (name, spec) in &stages[..stages.len() - 1] {
            if spec.mode != SynthesisMode::Concat {
                return Err(Error::Config(format!(
                    "intermediate stage {name} must concatenate frames (oW = J)"
                )));
            }
        }
        if let (Some(d1), Some(d2)) = (self.dnn1, self.dnn2) {
            if d2.channels != d1.channels + 1 {
                return Err(Error::Config(format!(
                    "dnn2 expects {} channels, dnn1 sees {} (+1 stacked estimate)",
                    d2.channels, d1.channels
                )));
            }
        }
        if let Some(n) = self.nwf {
            if n.bins == 0 {
                return Err(Error::Config("nwf needs at least one bin".into()));
            }
        }
        stacked_latency(&stages.iter().map(|(_, s)| *s).collect::<Vec<_>>())?;
        Ok(())
    }

    /// Per-stage latencies in samples, in execution order.
    pub fn stage_latencies(&self) -> Vec<(&'static str, usize)> {
        self.stages().into_iter().map(|(n, s)| (n, s.latency())).collect()
    }

    /// End-to-end algorithmic latency in samples.
    pub fn latency(&self) -> Result<usize> {
        let specs: Vec<FrameSpec> = self.stages().into_iter().map(|(_, s)| s).collect();
        let last = *specs.last().ok_or_else(|| Error::Config("no stages".into()))?;
        // each extra pass feeds an overlap-added DNN₂ output back as a target
        let repeat = (self.iterations - 1) * (last.latency() - last.hop);
        Ok(stacked_latency(&specs)? + repeat)
    }
}

/// Wiener stage transforms with their framing.
#[derive(Debug, Clone, PartialEq)]
pub struct NwfStage<T> {
    pub frame: FrameSpec,
    pub analysis: AnalysisTransform<T>,
    pub synthesis: SynthesisTransform<T>,
}

impl<T: Real> NwfStage<T> {
    pub fn new(frame: FrameSpec, analysis: AnalysisTransform<T>, synthesis: SynthesisTransform<T>) -> Result<Self> {
        frame.validate()?;
        if analysis.input_frame() != frame.input_frame
            || synthesis.output_frame() != frame.output_frame
            || analysis.bins() != synthesis.bins()
        {
            return Err(Error::ShapeMismatch("nwf transforms do not match the frame spec".into()));
        }
        Ok(Self { frame, analysis, synthesis })
    }

    /// DFT transforms; for an overlap-add stage `D` absorbs the `J / oW` gain.
    pub fn dft(frame: FrameSpec) -> Result<Self> {
        let (b, d) = dft_init(frame.input_frame, frame.output_frame)?;
        Self::new(frame, b, d.ola_compensated(&frame))
    }

    pub fn random(frame: FrameSpec, bins: usize, seed: u64) -> Result<Self> {
        let (b, d) = random_init(frame.input_frame, bins, frame.output_frame, seed)?;
        Self::new(frame, b, d)
    }

    pub fn config(&self) -> NwfConfig {
        NwfConfig { frame: self.frame, bins: self.analysis.bins() }
    }
}

/// Weights for every stage a model provides.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelBundle<T> {
    pub sample_rate: u32,
    /// Mode the model was built for.
    pub mode: PipelineMode,
    pub dnn1: Option<LlrnnWeights<T>>,
    pub nwf: Option<NwfStage<T>>,
    pub dnn2: Option<LlrnnWeights<T>>,
}

/// How the Wiener transforms of a fresh model are initialized.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NwfInit {
    Dft,
    Random,
}

impl<T: Real> ModelBundle<T> {
    /// Randomly initialized weights for every stage in `config`.
    pub fn init(config: &PipelineConfig<T>, nwf_init: NwfInit, seed: u64) -> Result<Self> {
        config.validate()?;
        let dnn1 = config.dnn1.map(|c| LlrnnWeights::random(&c, seed)).transpose()?;
        let dnn2 = config
            .dnn2
            .map(|c| LlrnnWeights::random(&c, seed.wrapping_add(2)))
            .transpose()?;
        let nwf = config
            .nwf
            .map(|n| match nwf_init {
                NwfInit::Dft => NwfStage::dft(n.frame),
                NwfInit::Random => NwfStage::random(n.frame, n.bins, seed.wrapping_add(1)),
            })
            .transpose()?;
        Ok(Self { sample_rate: config.sample_rate, mode: config.mode, dnn1, nwf, dnn2 })
    }

    pub fn to_container(&self) -> TensorContainer {
        let mut c = TensorContainer::new();
        c.set_meta("mode", self.mode.as_str());
        c.set_meta("fs", self.sample_rate);
        if let Some(w) = &self.dnn1 {
            w.write_to(&mut c, "dnn1");
        }
        if let Some(n) = &self.nwf {
            let f = n.analysis.bins();
            c.push(Tensor::new("nwf.B", vec![2 * f, n.frame.input_frame], to_f32(n.analysis.matrix())));
            c.push(Tensor::new("nwf.D", vec![n.frame.output_frame, 2 * f], to_f32(n.synthesis.matrix())));
            c.set_meta("nwf.iW", n.frame.input_frame);
            c.set_meta("nwf.J", n.frame.hop);
            c.set_meta("nwf.oW", n.frame.output_frame);
            c.set_meta("nwf.F", f);
            c.set_meta("nwf.synthesis", n.frame.mode.as_str());
        }
        if let Some(w) = &self.dnn2 {
            w.write_to(&mut c, "dnn2");
        }
        c
    }

    pub fn from_container(c: &TensorContainer) -> Result<Self> {
        let mode_raw: String = c.meta_parse("mode")?;
        let mode = PipelineMode::parse(&mode_raw)
            .ok_or_else(|| Error::Config(format!("unknown mode {mode_raw:?}")))?;
        let sample_rate = c.meta_parse("fs")?;
        let has = |prefix: &str| c.metadata.contains_key(&format!("{prefix}.H"));
        let dnn1 = has("dnn1").then(|| LlrnnWeights::read_from(c, "dnn1")).transpose()?;
        let dnn2 = has("dnn2").then(|| LlrnnWeights::read_from(c, "dnn2")).transpose()?;
        let nwf = if c.metadata.contains_key("nwf.F") {
            let synth_raw: String = c.meta_parse("nwf.synthesis")?;
            let synth = SynthesisMode::parse(&synth_raw)
                .ok_or_else(|| Error::Config(format!("unknown nwf synthesis {synth_raw:?}")))?;
            let frame = FrameSpec::new(c.meta_parse("nwf.iW")?, c.meta_parse("nwf.J")?, c.meta_parse("nwf.oW")?, synth)?;
            let f: usize = c.meta_parse("nwf.F")?;
            let b = c.expect("nwf.B", &[2 * f, frame.input_frame])?;
            let d = c.expect("nwf.D", &[frame.output_frame, 2 * f])?;
            Some(NwfStage::new(
                frame,
                AnalysisTransform::from_matrix(f, frame.input_frame, to_real(&b.data))?,
                SynthesisTransform::from_matrix(f, frame.output_frame, to_real(&d.data))?,
            )?)
        } else {
            None
        };
        Ok(Self { sample_rate, mode, dnn1, nwf, dnn2 })
    }
}

/// Every stage's output, each aligned with the input.
#[derive(Debug, Clone)]
pub struct StageOutputs<T> {
    pub dnn1: Option<MultichannelSignal<T>>,
    pub nwf: Option<MultichannelSignal<T>>,
    pub dnn2: Option<MultichannelSignal<T>>,
    /// Per-stage latency in samples, execution order.
    pub latencies: Vec<(&'static str, usize)>,
    /// End-to-end latency in samples.
    pub latency: usize,
}

impl<T: Real> StageOutputs<T> {
    /// Output of the last stage that ran.
    pub fn final_output(&self) -> &MultichannelSignal<T> {
        self.dnn2
            .as_ref()
            .or(self.nwf.as_ref())
            .or(self.dnn1.as_ref())
            .expect("at least one stage ran")
    }
}

fn take<'a, W>(w: &'a Option<W>, name: &str) -> Result<&'a W> {
    w.as_ref().ok_or_else(|| Error::Config(format!("model has no {name} weights")))
}

fn check_channels<T: Real>(noisy: &MultichannelSignal<T>, expected: usize) -> Result<()> {
    if noisy.channels() != expected {
        return Err(Error::ShapeMismatch(format!(
            "input has {} channels, model expects {expected}",
            noisy.channels()
        )));
    }
    Ok(())
}

fn run_nwf<T: Real>(
    noisy: &MultichannelSignal<T>,
    target: &MultichannelSignal<T>,
    stage: &NwfStage<T>,
    mode: WienerMode<T>,
) -> Result<MultichannelSignal<T>> {
    nwf_enhance(noisy, target, &stage.analysis, &stage.synthesis, &stage.frame, mode)
}

fn check_stage<T: Real>(cfg: Option<LlrnnConfig>, w: &LlrnnWeights<T>, name: &str) -> Result<()> {
    if cfg != Some(w.config) {
        return Err(Error::Config(format!("{name} weights do not match the configuration")));
    }
    Ok(())
}

/// Runs the configured stages on a noisy mixture.
pub fn enhance<T: Real>(
    noisy: &MultichannelSignal<T>,
    config: &PipelineConfig<T>,
    bundle: &ModelBundle<T>,
) -> Result<StageOutputs<T>> {
    config.validate()?;
    if config.mode == PipelineMode::OracleNwf {
        return Err(Error::Config("oracle mode needs a clean target; use oracle_enhance".into()));
    }
    let dnn1_w = take(&bundle.dnn1, "dnn1")?;
    check_stage(config.dnn1, dnn1_w, "dnn1")?;
    check_channels(noisy, dnn1_w.config.channels)?;

    let s1 = llrnn::forward(noisy, dnn1_w)?.signal;
    let mut out = StageOutputs {
        dnn1: Some(s1),
        nwf: None,
        dnn2: None,
        latencies: config.stage_latencies(),
        latency: config.latency()?,
    };
    let target = out.dnn1.clone().expect("dnn1 ran");
    match config.mode {
        PipelineMode::Dnn1Only => {}
        PipelineMode::Dnn1Nwf => {
            let stage = take(&bundle.nwf, "nwf")?;
            out.nwf = Some(run_nwf(noisy, &target, stage, config.wiener)?);
        }
        PipelineMode::Dnn1Dnn2 => {
            let w2 = take(&bundle.dnn2, "dnn2")?;
            check_stage(config.dnn2, w2, "dnn2")?;
            out.dnn2 = Some(llrnn::forward(&target.stack(noisy)?, w2)?.signal);
        }
        PipelineMode::FullStack => {
            let stage = take(&bundle.nwf, "nwf")?;
            let w2 = take(&bundle.dnn2, "dnn2")?;
            check_stage(config.dnn2, w2, "dnn2")?;
            let mut target = target;
            for _ in 0..config.iterations {
                let sf = run_nwf(noisy, &target, stage, config.wiener)?;
                let s2 = llrnn::forward(&sf.stack(noisy)?, w2)?.signal;
                out.nwf = Some(sf);
                target = s2.clone();
                out.dnn2 = Some(s2);
            }
        }
        PipelineMode::OracleNwf => unreachable!(),
    }
    Ok(out)
}

/// NWF with a clean reference in place of DNN₁'s estimate.
pub fn oracle_enhance<T: Real>(
    noisy: &MultichannelSignal<T>,
    clean: &MultichannelSignal<T>,
    stage: &NwfStage<T>,
    wiener: WienerMode<T>,
) -> Result<MultichannelSignal<T>> {
    run_nwf(noisy, clean, stage, wiener)
}

/// Parameter, compute and latency budget of one stage or a whole pipeline.
#[derive(Debug, Clone, PartialEq)]
pub struct Budget {
    pub params: usize,
    /// Floating point operations per second of input audio.
    pub flops: f64,
    pub latency_samples: usize,
    pub latency_ms: f64,
    pub stages: Vec<StageBudget>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StageBudget {
    pub name: &'static str,
    pub params: usize,
    pub flops: f64,
    pub latency_samples: usize,
}

/// NWF parameters: `2F·iW` for `B` plus `W_out·2F` for `D`.
pub fn nwf_params(nwf: &NwfConfig) -> usize {
    2 * nwf.bins * nwf.frame.input_frame + nwf.frame.output_frame * 2 * nwf.bins
}

/// NWF operations per second for `channels` microphones.
///
/// Per frame: analysis of the `M` noisy channels and the target, synthesis,
/// and per bin the Wiener work in complex multiply-accumulates (4 real MACs
/// each). Online mode does three `M×M` products (`P·y`, the rank-1 update and
/// `P·φ`) plus three length-`M` products; batch mode accumulates `Φ`, `φ`
/// and applies the filter, with the once-per-utterance solve not counted.
pub fn nwf_flops<T: Real>(nwf: &NwfConfig, channels: usize, wiener: &WienerMode<T>, sample_rate: u32) -> f64 {
    let m = channels;
    let two_f = 2 * nwf.bins;
    let transform_macs = (m + 1) * two_f * nwf.frame.input_frame + nwf.frame.output_frame * two_f;
    let complex_macs = match wiener {
        WienerMode::Online { .. } => 3 * m * m + 3 * m,
        WienerMode::Batch { .. } => m * m + 2 * m,
    };
    let wiener_macs = nwf.bins * 4 * complex_macs;
    let ola = match nwf.frame.mode {
        SynthesisMode::OverlapAdd => nwf.frame.output_frame,
        SynthesisMode::Concat => 0,
    };
    let per_frame = 2 * (transform_macs + wiener_macs) + ola;
    per_frame as f64 * sample_rate as f64 / nwf.frame.hop as f64
}

/// Sums stage budgets; the NWF is costed for the configured Wiener mode.
pub fn pipeline_budget<T: Real>(config: &PipelineConfig<T>) -> Result<Budget> {
    config.validate()?;
    let fs = config.sample_rate;
    let mut stages = Vec::new();
    if let Some(c) = config.dnn1 {
        stages.push(StageBudget {
            name: "dnn1",
            params: llrnn::count_params(&c),
            flops: llrnn::count_flops(&c, fs),
            latency_samples: c.frame.latency(),
        });
    }
    if let Some(n) = config.nwf {
        let m = config
            .channels()
            .ok_or_else(|| Error::Config("channel count unknown for nwf-only budget".into()))?;
        stages.push(StageBudget {
            name: "nwf",
            params: nwf_params(&n),
            flops: nwf_flops(&n, m, &config.wiener, fs),
            latency_samples: n.frame.latency(),
        });
    }
    if let Some(c) = config.dnn2 {
        stages.push(StageBudget {
            name: "dnn2",
            params: llrnn::count_params(&c),
            flops: llrnn::count_flops(&c, fs),
            latency_samples: c.frame.latency(),
        });
    }
    let latency = config.latency()?;
    Ok(Budget {
        params: stages.iter().map(|s| s.params).sum(),
        flops: stages.iter().map(|s| s.flops).sum(),
        latency_samples: latency,
        latency_ms: latency as f64 * 1000.0 / fs as f64,
        stages,
    })
}

/// Budget of an NWF-only model where the channel count comes from the caller.
pub fn oracle_budget<T: Real>(nwf: &NwfConfig, channels: usize, wiener: &WienerMode<T>, sample_rate: u32) -> Budget {
    let lat = nwf.frame.latency();
    let stage = StageBudget {
        name: "nwf",
        params: nwf_params(nwf),
        flops: nwf_flops(nwf, channels, wiener, sample_rate),
        latency_samples: lat,
    };
    Budget {
        params: stage.params,
        flops: stage.flops,
        latency_samples: lat,
        latency_ms: lat as f64 * 1000.0 / sample_rate as f64,
        stages: vec![stage],
    }
}
