//! Streaming multichannel speech enhancement.
//!
//! A recurrent enhancer (DNN₁) estimates the reference-microphone speech,
//! a neural Wiener filter (NWF) uses that estimate as its target to form a
//! spatial filter, and a second enhancer (DNN₂) refines the filter output
//! together with the raw channels. All stages run frame-online with an
//! algorithmic latency of one output frame.
//!
//! The numeric core is generic over [`Real`] (`f32` or `f64`); the aliases
//! below fix it to `f64`.

pub mod error;
pub mod framing;
pub mod linalg;
pub mod llrnn;
pub mod metrics;
pub mod model_store;
pub mod pipeline;
pub mod scalar;
pub mod simulate;
pub mod transform;
pub mod wav;
pub mod wiener;

pub use error::{Error, Result};
pub use framing::{FrameSpec, FrameTensor, MultichannelSignal, SynthesisMode};
pub use llrnn::{LlrnnConfig, LlrnnWeights};
pub use model_store::{StoreError, Tensor, TensorContainer};
pub use pipeline::{enhance, oracle_enhance, pipeline_budget, ModelBundle, PipelineConfig, PipelineMode};
pub use scalar::Real;
pub use transform::{AnalysisTransform, ComplexSpectrum, SynthesisTransform};
pub use wiener::{Loading, WienerMode};

pub type Signal = MultichannelSignal<f64>;
pub type Frames = FrameTensor<f64>;
pub type Spectrum = ComplexSpectrum<f64>;
pub type Analysis = AnalysisTransform<f64>;
pub type Synthesis = SynthesisTransform<f64>;
pub type Weights = LlrnnWeights<f64>;
pub type Bundle = ModelBundle<f64>;
pub type Pipeline = PipelineConfig<f64>;
pub type Wiener = WienerMode<f64>;
