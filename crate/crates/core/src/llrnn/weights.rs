use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::LlrnnConfig;
use crate::error::{Error, Result};
use crate::model_store::{to_f32, to_real, Tensor, TensorContainer};
use crate::scalar::Real;

/// LSTM parameters with gate rows ordered `[i, f, g, o]`.
#[derive(Debug, Clone, PartialEq)]
pub struct LstmParams<T> {
    /// Input weights `[4H × H]`.
    pub wx: Vec<T>,
    /// Recurrent weights `[4H × H]`.
    pub wh: Vec<T>,
    /// Bias `[4H]`.
    pub b: Vec<T>,
}

impl<T: Real> LstmParams<T> {
    pub fn zeros(hidden: usize) -> Self {
        Self {
            wx: vec![T::zero(); 4 * hidden * hidden],
            wh: vec![T::zero(); 4 * hidden * hidden],
            b: vec![T::zero(); 4 * hidden],
        }
    }

    pub fn hidden(&self) -> usize {
        self.b.len() / 4
    }
}

/// Layer norm followed by an LSTM.
#[derive(Debug, Clone, PartialEq)]
pub struct RecurrentBlock<T> {
    pub ln_gain: Vec<T>,
    pub ln_bias: Vec<T>,
    pub lstm: LstmParams<T>,
}

/// All parameters of one LLRNN.
#[derive(Debug, Clone, PartialEq)]
pub struct LlrnnWeights<T> {
    pub config: LlrnnConfig,
    /// `[H × iW]`, shared by all channels.
    pub in_proj_w: Vec<T>,
    pub in_proj_b: Vec<T>,
    pub in_ln_gain: Vec<T>,
    pub in_ln_bias: Vec<T>,
    pub prelu_slope: Vec<T>,
    /// `[H × M·H]`.
    pub spatial_w: Vec<T>,
    pub spatial_b: Vec<T>,
    pub blocks: Vec<RecurrentBlock<T>>,
    /// `[oW × H]`.
    pub out_proj_w: Vec<T>,
    pub out_proj_b: Vec<T>,
}

impl<T: Real> LlrnnWeights<T> {
    /// Zero projections, unit layer-norm gains and PReLU slopes of 0.25.
    pub fn zeros(config: &LlrnnConfig) -> Result<Self> {
        config.validate()?;
        let h = config.hidden;
        let z = |n: usize| vec![T::zero(); n];
        Ok(Self {
            config: *config,
            in_proj_w: z(h * config.frame.input_frame),
            in_proj_b: z(h),
            in_ln_gain: vec![T::one(); h],
            in_ln_bias: z(h),
            prelu_slope: vec![T::lit(0.25); h],
            spatial_w: z(h * config.channels * h),
            spatial_b: z(h),
            blocks: (0..config.blocks)
                .map(|_| RecurrentBlock {
                    ln_gain: vec![T::one(); h],
                    ln_bias: z(h),
                    lstm: LstmParams::zeros(h),
                })
                .collect(),
            out_proj_w: z(config.frame.output_frame * h),
            out_proj_b: z(config.frame.output_frame),
        })
    }

    /// Fan-in uniform initialization `U(-1/√fan_in, 1/√fan_in)` for every
    /// projection and LSTM matrix, deterministic in `seed`.
    pub fn random(config: &LlrnnConfig, seed: u64) -> Result<Self> {
        let mut w = Self::zeros(config)?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut fill = |v: &mut [T], fan_in: usize| {
            let a = 1.0 / (fan_in as f64).sqrt();
            for x in v.iter_mut() {
                *x = T::lit(rng.gen_range(-a..a));
            }
        };
        let h = config.hidden;
        fill(&mut w.in_proj_w, config.frame.input_frame);
        fill(&mut w.in_proj_b, config.frame.input_frame);
        fill(&mut w.spatial_w, config.channels * h);
        fill(&mut w.spatial_b, config.channels * h);
        for blk in &mut w.blocks {
            fill(&mut blk.lstm.wx, h);
            fill(&mut blk.lstm.wh, h);
            fill(&mut blk.lstm.b, h);
        }
        fill(&mut w.out_proj_w, h);
        fill(&mut w.out_proj_b, h);
        Ok(w)
    }

    fn named(&self) -> Vec<(String, Vec<usize>, &[T])> {
        let c = &self.config;
        let h = c.hidden;
        let mut out: Vec<(String, Vec<usize>, &[T])> = vec![
            ("in_proj.w".into(), vec![h, c.frame.input_frame], &self.in_proj_w),
            ("in_proj.b".into(), vec![h], &self.in_proj_b),
            ("in_ln.g".into(), vec![h], &self.in_ln_gain),
            ("in_ln.b".into(), vec![h], &self.in_ln_bias),
            ("prelu.a".into(), vec![h], &self.prelu_slope),
            ("spatial.w".into(), vec![h, c.channels * h], &self.spatial_w),
            ("spatial.b".into(), vec![h], &self.spatial_b),
        ];
        for (k, blk) in self.blocks.iter().enumerate() {
            out.push((format!("blk{k}.ln.g"), vec![h], &blk.ln_gain));
            out.push((format!("blk{k}.ln.b"), vec![h], &blk.ln_bias));
            out.push((format!("blk{k}.lstm.wx"), vec![4 * h, h], &blk.lstm.wx));
            out.push((format!("blk{k}.lstm.wh"), vec![4 * h, h], &blk.lstm.wh));
            out.push((format!("blk{k}.lstm.b"), vec![4 * h], &blk.lstm.b));
        }
        out.push(("out_proj.w".into(), vec![c.frame.output_frame, h], &self.out_proj_w));
        out.push(("out_proj.b".into(), vec![c.frame.output_frame], &self.out_proj_b));
        out
    }

    /// Tensor names under `prefix`, e.g. `dnn1`.
    pub fn tensor_names(&self, prefix: &str) -> Vec<String> {
        self.named().into_iter().map(|(n, _, _)| format!("{prefix}.{n}")).collect()
    }

    /// Writes tensors and the architecture echo under `prefix`.
    pub fn write_to(&self, container: &mut TensorContainer, prefix: &str) {
        for (name, shape, data) in self.named() {
            container.push(Tensor::new(format!("{prefix}.{name}"), shape, to_f32(data)));
        }
        self.config.write_meta(container, prefix);
    }

    /// Reads the weights stored under `prefix`, checking every shape.
    pub fn read_from(container: &TensorContainer, prefix: &str) -> Result<Self> {
        let config = LlrnnConfig::read_meta(container, prefix)?;
        let mut w = Self::zeros(&config)?;
        let shapes: Vec<(String, Vec<usize>)> =
            w.named().into_iter().map(|(n, s, _)| (n, s)).collect();
        let take = |name: &str, shape: &[usize]| -> Result<Vec<T>> {
            Ok(to_real(&container.expect(&format!("{prefix}.{name}"), shape)?.data))
        };
        let mut fields: Vec<Vec<T>> = Vec::with_capacity(shapes.len());
        for (name, shape) in &shapes {
            fields.push(take(name, shape)?);
        }
        let mut it = fields.into_iter();
        let mut next = || it.next().expect("field count matches");
        w.in_proj_w = next();
        w.in_proj_b = next();
        w.in_ln_gain = next();
        w.in_ln_bias = next();
        w.prelu_slope = next();
        w.spatial_w = next();
        w.spatial_b = next();
        for blk in &mut w.blocks {
            blk.ln_gain = next();
            blk.ln_bias = next();
            blk.lstm.wx = next();
            blk.lstm.wh = next();
            blk.lstm.b = next();
        }
        w.out_proj_w = next();
        w.out_proj_b = next();
        w.check_finite()?;
        Ok(w)
    }

    pub fn check_finite(&self) -> Result<()> {
        if self.named().iter().all(|(_, _, d)| d.iter().all(|v| v.is_finite())) {
            Ok(())
        } else {
            Err(Error::NonFinite("llrnn weights"))
        }
    }

    /// Number of stored parameters.
    pub fn numel(&self) -> usize {
        self.named().iter().map(|(_, _, d)| d.len()).sum()
    }
}
