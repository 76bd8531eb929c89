use super::LlrnnConfig;
use crate::framing::SynthesisMode;

/// Exact parameter count of an LLRNN with the given shape.
pub fn count_params(config: &LlrnnConfig) -> usize {
    let h = config.hidden;
    let m = config.channels;
    let iw = config.frame.input_frame;
    let ow = config.frame.output_frame;
    let input = h * iw + h + 2 * h + h;
    let spatial = m * h * h + h;
    let block = 2 * h + 2 * 4 * h * h + 4 * h;
    let output = ow * h + ow;
    input + spatial + config.blocks * block + output
}

/// Multiply-accumulates per frame, counting every matrix-vector product.
pub(crate) fn macs_per_frame(config: &LlrnnConfig) -> usize {
    let h = config.hidden;
    let m = config.channels;
    m * config.frame.input_frame * h
        + m * h * h
        + config.blocks * 8 * h * h
        + h * config.frame.output_frame
}

/// Element-wise operations per frame, one per element per activation,
/// normalization or gate update.
pub(crate) fn elementwise_per_frame(config: &LlrnnConfig) -> usize {
    let h = config.hidden;
    // layer norm + PReLU per channel
    let input = config.channels * 2 * h;
    // layer norm, four gate nonlinearities, tanh(c), and the three products of the cell update
    let block = h + 4 * h + h + 3 * h;
    let ola = match config.frame.mode {
        SynthesisMode::OverlapAdd => config.frame.output_frame,
        SynthesisMode::Concat => 0,
    };
    input + config.blocks * block + ola
}

/// Floating point operations per second of audio: `2·MACs + element-wise ops`
/// per frame, times `sample_rate / J` frames per second.
pub fn count_flops(config: &LlrnnConfig, sample_rate: u32) -> f64 {
    let per_frame = 2 * macs_per_frame(config) + elementwise_per_frame(config);
    per_frame as f64 * sample_rate as f64 / config.frame.hop as f64
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::framing::FrameSpec;
    use crate::llrnn::LlrnnWeights;

    #[test]
    fn hand_count_smallest_network() {
        // H=1, M=1, iW=2, oW=J=1, one block:
        // input 2+1, ln 2, prelu 1, spatial 1+1, block ln 2 + lstm 4+4+4, output 1+1
        let cfg = LlrnnConfig::new(1, FrameSpec::concat(2, 1).unwrap(), 1, 1).unwrap();
        assert_eq!(count_params(&cfg), 24);
        assert_eq!(LlrnnWeights::<f64>::zeros(&cfg).unwrap().numel(), 24);
    }

    #[test]
    fn count_matches_weight_inventory() {
        for h in [3, 16, 128] {
            let cfg = LlrnnConfig::standard(h);
            assert_eq!(count_params(&cfg), LlrnnWeights::<f32>::zeros(&cfg).unwrap().numel());
        }
    }

    #[test]
    fn flops_scale_with_frame_rate() {
        let a = LlrnnConfig::standard(128);
        let mut b = a;
        b.frame.hop = 32;
        assert!((count_flops(&a, 16_000) / count_flops(&b, 16_000) - 2.0).abs() < 1e-12);
    }
}
