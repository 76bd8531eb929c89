use proptest::prelude::*;

use nwbeam_core::framing::{pad_and_frame, synthesize_aligned, FrameTensor};
use nwbeam_core::metrics::{pcm_loss, si_sdr, stoi, PcmConfig};
use nwbeam_core::model_store::{Tensor, TensorContainer};
use nwbeam_core::{FrameSpec, MultichannelSignal, SynthesisMode};

fn signal() -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-1.0f64..1.0, 1..300)
}

/// Keeps only the newest `W` samples of every input frame.
fn tail_frames(frames: &FrameTensor<f64>, width: usize) -> FrameTensor<f64> {
    let mut out = FrameTensor::zeros(frames.channels, frames.frames, width, frames.hop, frames.sample_rate);
    for m in 0..frames.channels {
        for t in 0..frames.frames {
            let src = frames.frame(m, t);
            out.frame_mut(m, t).copy_from_slice(&src[src.len() - width..]);
        }
    }
    out
}

proptest! {
    #[test]
    fn concat_framing_is_lossless(x in signal(), hop in 1usize..9, extra in 0usize..20) {
        let spec = FrameSpec::concat(hop + extra, hop).unwrap();
        let sig = MultichannelSignal::mono(16_000, x.clone()).unwrap();
        let frames = pad_and_frame(&sig, &spec).unwrap();
        prop_assert_eq!(frames.frames, x.len().div_ceil(hop));
        let back = synthesize_aligned(&tail_frames(&frames, hop), SynthesisMode::Concat, x.len()).unwrap();
        prop_assert_eq!(back.channel(0), &x[..]);
    }

    #[test]
    fn overlap_add_of_scaled_tails_reconstructs_interior(x in signal(), hop in 1usize..6, k in 1usize..4) {
        let ow = hop * k;
        let spec = FrameSpec::overlap_add(ow + 3, hop, ow).unwrap();
        let sig = MultichannelSignal::mono(16_000, x.clone()).unwrap();
        let mut tails = tail_frames(&pad_and_frame(&sig, &spec).unwrap(), ow);
        tails.data.iter_mut().for_each(|v| *v /= k as f64);
        let back = synthesize_aligned(&tails, SynthesisMode::OverlapAdd, x.len()).unwrap();
        let end = x.len().saturating_sub(ow - hop);
        for (b, v) in back.channel(0)[..end].iter().zip(&x) {
            prop_assert!((b - v).abs() < 1e-12);
        }
    }

    #[test]
    fn si_sdr_ignores_scale_and_joint_permutation(
        pairs in prop::collection::vec((-1.0f64..1.0, -1.0f64..1.0), 4..100),
        gain in prop_oneof![-100.0f64..-0.01, 0.01f64..100.0],
        rot in 0usize..100,
    ) {
        let r: Vec<f64> = pairs.iter().map(|p| p.0).collect();
        let e: Vec<f64> = pairs.iter().map(|p| p.0 + 0.3 * p.1).collect();
        prop_assume!(r.iter().map(|v| v * v).sum::<f64>() > 1e-3);
        let base = si_sdr(&r, &e).unwrap();
        let scaled: Vec<f64> = e.iter().map(|v| gain * v).collect();
        prop_assert!((si_sdr(&r, &scaled).unwrap() - base).abs() < 1e-9);
        let n = r.len();
        let rr: Vec<f64> = (0..n).map(|i| r[(i + rot) % n]).collect();
        let er: Vec<f64> = (0..n).map(|i| e[(i + rot) % n]).collect();
        prop_assert!((si_sdr(&rr, &er).unwrap() - base).abs() < 1e-9);
    }

    #[test]
    fn pcm_is_nonnegative_and_bounded_through_zero(a in signal(), seed in any::<u64>()) {
        let b: Vec<f64> = a.iter().enumerate().map(|(i, v)| v * ((seed.wrapping_add(i as u64) % 7) as f64 - 3.0)).collect();
        let zero = vec![0.0; a.len()];
        let cfg = PcmConfig { frame: 32, hop: 16 };
        let l = pcm_loss(&a, &b, &cfg).unwrap();
        prop_assert!(l >= 0.0);
        prop_assert!(l <= pcm_loss(&a, &zero, &cfg).unwrap() + pcm_loss(&zero, &b, &cfg).unwrap() + 1e-12);
        prop_assert_eq!(pcm_loss(&a, &a, &cfg).unwrap(), 0.0);
    }

    #[test]
    fn container_round_trip(
        tensors in prop::collection::vec(prop::collection::vec(any::<f32>(), 0..40), 0..6),
        meta in prop::collection::btree_map("[a-z.]{1,8}", "[ -~]{0,12}", 0..4),
    ) {
        let mut c = TensorContainer::new();
        for (i, data) in tensors.into_iter().enumerate() {
            c.push(Tensor::new(format!("t{i}"), vec![data.len()], data));
        }
        for (k, v) in meta {
            c.set_meta(k, v);
        }
        let bytes = c.to_bytes().unwrap();
        let back = TensorContainer::from_bytes(&bytes).unwrap();
        prop_assert_eq!(back.to_bytes().unwrap(), bytes);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(8))]

    #[test]
    fn stoi_stays_in_unit_interval(seed in any::<u64>(), level in 0.0f64..3.0) {
        let x: Vec<f64> = (0..16_000).map(|n| ((n as f64) * 0.031).sin() * ((n as f64) * 0.0007).sin()).collect();
        let y: Vec<f64> = x
            .iter()
            .enumerate()
            .map(|(i, v)| v + level * (((seed.wrapping_mul(i as u64 + 1)) % 1000) as f64 / 1000.0 - 0.5))
            .collect();
        let v = stoi(&x, &y, 16_000).unwrap();
        prop_assert!((0.0..=1.0).contains(&v));
        prop_assert_eq!(v, stoi(&x, &y, 16_000).unwrap());
    }
}
