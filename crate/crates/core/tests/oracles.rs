//! Checks against independent reference computations: nalgebra linear
//! algebra, brute-force DFT sums, a matrix-form LLRNN and STOI values
//! computed with pystoi 0.4.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use nwbeam_core::llrnn::{self, LlrnnConfig, LlrnnWeights};
use nwbeam_core::metrics::{pcm_loss, stoi, PcmConfig};
use nwbeam_core::simulate::{image_method_rir, RoomSpec};
use nwbeam_core::transform::{dft_init, random_init, ComplexSpectrum};
use nwbeam_core::wiener::{accumulate_batch, solve_batch, Loading, OnlineWienerState};
use nwbeam_core::{FrameSpec, MultichannelSignal, SynthesisMode};

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn crand(r: &mut ChaCha8Rng) -> Complex64 {
    Complex64::new(r.gen_range(-1.0..1.0), r.gen_range(-1.0..1.0))
}

#[test]
fn dft_synthesis_is_restricted_pseudo_inverse() {
    for (iw, ow) in [(16, 4), (32, 8), (256, 32)] {
        let (b, d) = dft_init::<f64>(iw, ow).unwrap();
        let f = iw / 2 + 1;
        let bm = DMatrix::from_row_slice(2 * f, iw, b.matrix());
        let pinv = bm.clone().pseudo_inverse(1e-10).unwrap();
        for j in 0..ow {
            for k in 0..2 * f {
                let want = pinv[(iw - ow + j, k)];
                let got = d.matrix()[j * 2 * f + k];
                assert!((want - got).abs() < 1e-10, "iW={iw} D[{j},{k}] {got} vs {want}");
            }
        }
        // B rows are the real DFT
        let x: Vec<f64> = (0..iw).map(|n| ((n * 37) % 11) as f64 - 5.0).collect();
        let y = &bm * DVector::from_column_slice(&x);
        for k in 0..f {
            let want: Complex64 = x
                .iter()
                .enumerate()
                .map(|(n, &v)| Complex64::from_polar(v, -2.0 * std::f64::consts::PI * (k * n) as f64 / iw as f64))
                .sum();
            assert!((y[k] - want.re).abs() < 1e-9 && (y[f + k] - want.im).abs() < 1e-9);
        }
    }
}

#[test]
fn random_init_statistics() {
    let (b, d) = random_init::<f64>(256, 129, 32, 4).unwrap();
    let var = |v: &[f64]| v.iter().map(|x| x * x).sum::<f64>() / v.len() as f64;
    let target = 1.0 / 256.0;
    assert!((var(b.matrix()) / target - 1.0).abs() < 0.2);
    assert!((var(d.matrix()) / target - 1.0).abs() < 0.2);
}

fn random_spectrum(channels: usize, frames: usize, bins: usize, r: &mut ChaCha8Rng) -> ComplexSpectrum<f64> {
    let mut s = ComplexSpectrum::zeros(channels, frames, bins, 1, 16_000);
    s.data.iter_mut().for_each(|c| *c = crand(r));
    s
}

#[test]
fn batch_solve_matches_nalgebra() {
    let mut r = rng(1);
    let (m, frames, bins) = (5, 40, 7);
    let y = random_spectrum(m, frames, bins, &mut r);
    let s = random_spectrum(1, frames, bins, &mut r);
    let (cov, cross) = accumulate_batch(&y, &s).unwrap();
    let w = solve_batch(&cov, &cross, Loading::Relative(1e-3)).unwrap();
    for f in 0..bins {
        let mut phi = DMatrix::<Complex64>::zeros(m, m);
        let mut c = DVector::<Complex64>::zeros(m);
        for t in 0..frames {
            let v = DVector::from_iterator(m, (0..m).map(|ch| y.get(ch, t, f)));
            phi += &v * v.adjoint();
            c += &v * s.get(0, t, f).conj();
        }
        let load = 1e-3 * phi.trace().re / m as f64;
        phi += DMatrix::identity(m, m) * Complex64::new(load, 0.0);
        let want = phi.lu().solve(&c).unwrap();
        for ch in 0..m {
            assert!((w.bin(f)[ch] - want[ch]).norm() < 1e-10);
        }
    }
}

#[test]
fn online_weights_equal_loaded_batch_weights() {
    // with λ = 1 the online inverse is (δI + Σ y yᴴ)⁻¹, i.e. batch with absolute loading δ
    let mut r = rng(2);
    let (m, frames, bins, delta) = (4, 30, 5, 0.5);
    let y = random_spectrum(m, frames, bins, &mut r);
    let s = random_spectrum(1, frames, bins, &mut r);
    let mut state = OnlineWienerState::new(m, bins, 1.0, delta).unwrap();
    for t in 0..frames {
        state.update_frame(&y, &s, t).unwrap();
    }
    let (cov, cross) = accumulate_batch(&y, &s).unwrap();
    let batch = solve_batch(&cov, &cross, Loading::Absolute(delta)).unwrap();
    let online = state.weights();
    for (a, b) in online.data.iter().zip(&batch.data) {
        assert!((a - b).norm() < 1e-10, "{a} vs {b}");
    }
}

#[test]
fn forgetting_factor_matches_weighted_sum() {
    let mut r = rng(3);
    let (m, frames, lambda, delta) = (3, 25, 0.9, 0.1);
    let mut state = OnlineWienerState::new(m, 1, lambda, delta).unwrap();
    let mut sum = DMatrix::<Complex64>::identity(m, m) * Complex64::new(delta, 0.0);
    for _ in 0..frames {
        let y: Vec<Complex64> = (0..m).map(|_| crand(&mut r)).collect();
        state.update(&y, &[crand(&mut r)]).unwrap();
        let v = DVector::from_column_slice(&y);
        sum = sum * Complex64::new(lambda, 0.0) + &v * v.adjoint();
    }
    let inv = sum.try_inverse().unwrap();
    for i in 0..m {
        for j in 0..m {
            assert!((state.inverse(0)[i * m + j] - inv[(i, j)]).norm() < 1e-9);
        }
    }
}

/// LLRNN written with nalgebra matrices and explicit frame indexing.
fn reference_llrnn(x: &MultichannelSignal<f64>, w: &LlrnnWeights<f64>) -> Vec<f64> {
    let c = w.config;
    let (h, iw, j, ow) = (c.hidden, c.frame.input_frame, c.frame.hop, c.frame.output_frame);
    let mat = |rows: usize, cols: usize, v: &[f64]| DMatrix::from_row_slice(rows, cols, v);
    let vec = |v: &[f64]| DVector::from_column_slice(v);
    let ln = |v: &DVector<f64>, g: &[f64], b: &[f64]| -> DVector<f64> {
        let mean = v.mean();
        let var = v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / v.len() as f64;
        DVector::from_iterator(v.len(), v.iter().enumerate().map(|(k, x)| g[k] * (x - mean) / (var + 1e-5).sqrt() + b[k]))
    };
    let sig = |x: f64| 1.0 / (1.0 + (-x).exp());
    let len = x.len();
    let frames = len.div_ceil(j);
    let mut hs = vec![DVector::<f64>::zeros(h); c.blocks];
    let mut cs = vec![DVector::<f64>::zeros(h); c.blocks];
    let mut ola = vec![0.0; (frames - 1) * j + ow];
    for t in 0..frames {
        let mut cat = Vec::new();
        for ch in 0..c.channels {
            // frame t ends at input sample (t + 1)·J
            let frame: Vec<f64> = (0..iw)
                .map(|k| {
                    let idx = (t + 1) as i64 * j as i64 - iw as i64 + k as i64;
                    if idx < 0 { 0.0 } else { x.channel(ch).get(idx as usize).copied().unwrap_or(0.0) }
                })
                .collect();
            let z = mat(h, iw, &w.in_proj_w) * vec(&frame) + vec(&w.in_proj_b);
            let z = ln(&z, &w.in_ln_gain, &w.in_ln_bias);
            cat.extend(z.iter().enumerate().map(|(k, &v)| if v >= 0.0 { v } else { w.prelu_slope[k] * v }));
        }
        let mut z = mat(h, c.channels * h, &w.spatial_w) * vec(&cat) + vec(&w.spatial_b);
        for (k, blk) in w.blocks.iter().enumerate() {
            let n = ln(&z, &blk.ln_gain, &blk.ln_bias);
            let g = mat(4 * h, h, &blk.lstm.wx) * n + mat(4 * h, h, &blk.lstm.wh) * &hs[k] + vec(&blk.lstm.b);
            let i = g.rows(0, h).map(sig);
            let f = g.rows(h, h).map(sig);
            let gg = g.rows(2 * h, h).map(f64::tanh);
            let o = g.rows(3 * h, h).map(sig);
            cs[k] = f.component_mul(&cs[k]) + i.component_mul(&gg);
            hs[k] = o.component_mul(&cs[k].map(f64::tanh));
            z = hs[k].clone();
        }
        let y = mat(ow, h, &w.out_proj_w) * z + vec(&w.out_proj_b);
        for (k, v) in y.iter().enumerate() {
            ola[t * j + k] += v;
        }
    }
    ola[ow - j..ow - j + len].to_vec()
}

#[test]
fn llrnn_forward_matches_matrix_reference() {
    for (mode, ow) in [(SynthesisMode::Concat, 4), (SynthesisMode::OverlapAdd, 12)] {
        let cfg = LlrnnConfig::new(3, FrameSpec::new(16, 4, ow, mode).unwrap(), 6, 2).unwrap();
        let mut w = LlrnnWeights::<f64>::random(&cfg, 5).unwrap();
        let mut r = rng(6);
        for blk in &mut w.blocks {
            blk.ln_gain.iter_mut().for_each(|g| *g = r.gen_range(0.5..1.5));
            blk.ln_bias.iter_mut().for_each(|b| *b = r.gen_range(-0.2..0.2));
        }
        w.prelu_slope.iter_mut().for_each(|a| *a = r.gen_range(0.0..0.5));
        let x = MultichannelSignal::new(16_000, (0..3).map(|_| (0..203).map(|_| r.gen_range(-1.0..1.0)).collect()).collect()).unwrap();
        let got = llrnn::forward(&x, &w).unwrap().signal;
        let want = reference_llrnn(&x, &w);
        for (a, b) in got.channel(0).iter().zip(&want) {
            assert!((a - b).abs() < 1e-12, "{mode:?}: {a} vs {b}");
        }
    }
}

#[test]
fn pcm_matches_brute_force_dft() {
    let mut r = rng(7);
    let len: usize = 1_300;
    let a: Vec<f64> = (0..len).map(|_| r.gen_range(-1.0..1.0)).collect();
    let b: Vec<f64> = (0..len).map(|_| r.gen_range(-1.0..1.0)).collect();
    let (n, hop) = (512, 256);
    let frames = (len - n).div_ceil(hop) + 1;
    let mut total = 0.0;
    for t in 0..frames {
        for k in 0..=n / 2 {
            let dft = |x: &[f64]| -> Complex64 {
                (0..n)
                    .map(|i| {
                        let v = x.get(t * hop + i).copied().unwrap_or(0.0);
                        Complex64::from_polar(v, -2.0 * std::f64::consts::PI * ((k * i) % n) as f64 / n as f64)
                    })
                    .sum()
            };
            let (s, e) = (dft(&a), dft(&b));
            total += (s.re.abs() - e.re.abs()).abs() + (s.im.abs() - e.im.abs()).abs();
        }
    }
    let want = total / (frames * (n / 2 + 1)) as f64;
    let got = pcm_loss(&a, &b, &PcmConfig::default()).unwrap();
    assert!((got - want).abs() < 1e-10 * want.max(1.0), "{got} vs {want}");
}

/// Label, degraded signal and the pystoi score against the clean one.
type StoiCase = (&'static str, Vec<f64>, f64);

/// Deterministic test signals shared with the pystoi reference script.
fn stoi_signals() -> (Vec<f64>, Vec<StoiCase>) {
    use std::f64::consts::PI;
    let fs = 10_000.0;
    let x: Vec<f64> = (0..30_000)
        .map(|n| {
            let t = n as f64 / fs;
            let gate = if (2.0 * PI * 0.5 * t).sin() > -0.3 { 1.0 } else { 0.0 };
            let env = (2.0 * PI * 3.0 * t).sin().powi(2) * gate;
            env * ((2.0 * PI * 180.0 * t).sin()
                + 0.5 * (2.0 * PI * 360.0 * t + 0.3).sin()
                + 0.25 * (2.0 * PI * 1250.0 * t).sin()
                + 0.1 * (2.0 * PI * 2600.0 * t).sin())
        })
        .collect();
    let lcg: Vec<f64> = (0..30_000u64).map(|n| ((n * 7919 + 13) % 1009) as f64 / 1009.0 - 0.5).collect();
    let chirp: Vec<f64> = (0..30_000).map(|n| (n as f64 * n as f64 * 1e-4).sin()).collect();
    let mix = |a: f64, b: f64, z: &[f64]| x.iter().zip(z).map(|(s, v)| a * s + b * v).collect::<Vec<f64>>();
    let cases = vec![
        ("lcg", mix(1.0, 0.8, &lcg), 0.728811210176315),
        ("chirp", mix(1.0, 0.5, &chirp), 0.7369944429535507),
        ("scaled", mix(0.3, 0.05, &chirp), 0.7797101732373202),
        ("noise", lcg.clone(), 0.38084727742690966),
    ];
    (x, cases)
}

#[test]
fn stoi_matches_reference_implementation() {
    let (x, cases) = stoi_signals();
    for (name, y, want) in cases {
        let got = stoi(&x, &y, 10_000).unwrap();
        assert!((got - want).abs() < 1e-9, "{name}: {got} vs {want}");
    }
}

#[test]
fn more_absorption_means_less_tail() {
    let mut r = rng(8);
    for _ in 0..5 {
        let dims = [r.gen_range(3.0..8.0), r.gen_range(3.0..8.0), r.gen_range(2.5..4.0)];
        let src = [1.0, 1.2, 1.1];
        let mic = [dims[0] - 1.0, dims[1] - 1.5, 1.4];
        let mut last = f64::INFINITY;
        for a in [0.1, 0.2, 0.4, 0.7] {
            let room = RoomSpec::new(dims, a, 6).unwrap();
            let rir = image_method_rir(&room, src, mic, 16_000).unwrap();
            let peak = rir.direct.iter().enumerate().max_by(|p, q| p.1.abs().total_cmp(&q.1.abs())).unwrap().0;
            let tail: f64 = rir.full[peak + 50..].iter().map(|v| v * v).sum();
            assert!(tail < last, "absorption {a}: {tail} !< {last}");
            last = tail;
        }
    }
}
