use rustfft::num_complex::Complex;
use rustfft::FftPlanner;

use super::RoomSpec;
use crate::error::{Error, Result};

/// Taps of the fractional-delay kernel.
pub const KERNEL_TAPS: usize = 81;
const HALF: i64 = (KERNEL_TAPS as i64 - 1) / 2;

/// Image-method impulse response split into its direct part and the full response.
#[derive(Debug, Clone, PartialEq)]
pub struct RirParts {
    /// Order-0 image only.
    pub direct: Vec<f64>,
    /// All images up to the room's maximum order, direct path included.
    pub full: Vec<f64>,
}

fn distance(a: [f64; 3], b: [f64; 3]) -> f64 {
    a.iter().zip(&b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt()
}

/// Hann-windowed sinc centred at `delay` samples, scaled by `amp`.
fn add_fractional_impulse(h: &mut [f64], delay: f64, amp: f64) {
    let centre = delay.round() as i64;
    for n in centre - HALF..=centre + HALF {
        if n < 0 || n as usize >= h.len() {
            continue;
        }
        let t = n as f64 - delay;
        let sinc = if t == 0.0 { 1.0 } else { (std::f64::consts::PI * t).sin() / (std::f64::consts::PI * t) };
        let window = 0.5 + 0.5 * (std::f64::consts::PI * t / (HALF + 1) as f64).cos();
        h[n as usize] += amp * sinc * window;
    }
}

/// Image sources `(position, reflection count)` up to `max_order`.
pub fn image_sources(room: &RoomSpec, source: [f64; 3]) -> Vec<([f64; 3], usize)> {
    let order = room.max_order as i64;
    let mut out = Vec::new();
    // per axis, index i gives i reflections: even i = 2n shifts by n room lengths,
    // odd i mirrors the source first
    for ix in -order..=order {
        for iy in -(order - ix.abs())..=(order - ix.abs()) {
            let rest = order - ix.abs() - iy.abs();
            for iz in -rest..=rest {
                let mut pos = [0.0; 3];
                for (axis, i) in [ix, iy, iz].into_iter().enumerate() {
                    let l = room.dimensions[axis];
                    let s = source[axis];
                    let n = i.div_euclid(2) as f64 + if i.rem_euclid(2) == 1 { 1.0 } else { 0.0 };
                    pos[axis] = if i.rem_euclid(2) == 0 { 2.0 * n * l + s } else { 2.0 * n * l - s };
                }
                out.push((pos, (ix.abs() + iy.abs() + iz.abs()) as usize));
            }
        }
    }
    out
}

/// Room impulse response from `source` to `mic` at `fs` Hz.
///
/// Every image contributes `β^k / (4πd)` at delay `d / c · fs`, where `k` is
/// its reflection count and `β = √(1 − absorption)`.
pub fn image_method_rir(room: &RoomSpec, source: [f64; 3], mic: [f64; 3], fs: u32) -> Result<RirParts> {
    room.check_inside(source, 0.0, "source")?;
    room.check_inside(mic, 0.0, "microphone")?;
    let images = image_sources(room, source);
    let fs = fs as f64;
    let beta = (1.0 - room.absorption).max(0.0).sqrt();
    let max_delay = images
        .iter()
        .filter(|(_, k)| *k == 0 || beta > 0.0)
        .map(|(p, _)| distance(*p, mic) / room.speed_of_sound * fs)
        .fold(0.0, f64::max);
    let len = max_delay.ceil() as usize + HALF as usize + 1;
    let mut direct = vec![0.0; len];
    let mut full = vec![0.0; len];
    for (pos, k) in images {
        let d = distance(pos, mic);
        if d == 0.0 {
            return Err(Error::OutsideRoom("source and microphone coincide".into()));
        }
        let amp = beta.powi(k as i32) / (4.0 * std::f64::consts::PI * d);
        if amp == 0.0 {
            continue;
        }
        let delay = d / room.speed_of_sound * fs;
        add_fractional_impulse(&mut full, delay, amp);
        if k == 0 {
            add_fractional_impulse(&mut direct, delay, amp);
        }
    }
    Ok(RirParts { direct, full })
}

/// Linear convolution truncated to `x.len()` samples.
pub fn convolve(x: &[f64], h: &[f64]) -> Vec<f64> {
    let first = h.iter().position(|&v| v != 0.0);
    let Some(first) = first else { return vec![0.0; x.len()] };
    let last = h.iter().rposition(|&v| v != 0.0).expect("has a non-zero tap");
    let span = last - first + 1;
    if span <= 128 {
        let mut out = vec![0.0; x.len()];
        for (n, o) in out.iter_mut().enumerate() {
            let mut acc = 0.0;
            for k in first..=last.min(n) {
                acc += h[k] * x[n - k];
            }
            *o = acc;
        }
        return out;
    }
    let n = (x.len() + h.len()).next_power_of_two();
    let mut planner = FftPlanner::new();
    let fwd = planner.plan_fft_forward(n);
    let inv = planner.plan_fft_inverse(n);
    let pad = |s: &[f64]| -> Vec<Complex<f64>> {
        let mut v: Vec<Complex<f64>> = s.iter().map(|&r| Complex::new(r, 0.0)).collect();
        v.resize(n, Complex::new(0.0, 0.0));
        v
    };
    let mut a = pad(x);
    let mut b = pad(h);
    fwd.process(&mut a);
    fwd.process(&mut b);
    for (u, v) in a.iter_mut().zip(&b) {
        *u *= v;
    }
    inv.process(&mut a);
    a.iter().take(x.len()).map(|c| c.re / n as f64).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn room(absorption: f64, order: usize) -> RoomSpec {
        RoomSpec::new([6.0, 5.0, 3.0], absorption, order).unwrap()
    }

    #[test]
    fn single_peak_at_propagation_delay() {
        let r = room(0.3, 0);
        let h = image_method_rir(&r, [1.0, 2.0, 1.5], [4.43, 2.0, 1.5], 16_000).unwrap();
        let peak = h.full.iter().enumerate().max_by(|a, b| a.1.total_cmp(b.1)).unwrap();
        assert_eq!(peak.0, 160);
        let amp = 1.0 / (4.0 * std::f64::consts::PI * 3.43);
        assert!((peak.1 - amp).abs() < 1e-9 * amp);
        let others: f64 = h.full.iter().enumerate().filter(|(i, _)| *i != 160).map(|(_, v)| v.abs()).sum();
        assert!(others < 1e-9 * amp);
        assert_eq!(h.direct, h.full);
    }

    #[test]
    fn full_absorption_leaves_only_direct() {
        let r = room(1.0, 6);
        let h = image_method_rir(&r, [1.0, 2.0, 1.5], [3.0, 2.5, 1.2], 16_000).unwrap();
        assert_eq!(h.direct, h.full);
    }

    #[test]
    fn image_count_and_first_order_positions() {
        let r = room(0.3, 1);
        let imgs = image_sources(&r, [1.0, 2.0, 1.5]);
        assert_eq!(imgs.len(), 7);
        let xs: Vec<f64> = imgs.iter().filter(|(p, k)| *k == 1 && p[1] == 2.0 && p[2] == 1.5).map(|(p, _)| p[0]).collect();
        assert!(xs.contains(&-1.0) && xs.contains(&11.0));
        assert_eq!(image_sources(&room(0.3, 6), [1.0, 1.0, 1.0]).len(), 377);
    }

    #[test]
    fn convolution_paths_agree() {
        let x: Vec<f64> = (0..300).map(|n| ((n * 7919) % 97) as f64 / 97.0 - 0.5).collect();
        let mut h = vec![0.0; 400];
        h[3] = 0.5;
        h[399] = -0.25;
        let fast = convolve(&x, &h);
        let mut slow = vec![0.0; x.len()];
        for n in 0..x.len() {
            for k in 0..=n.min(h.len() - 1) {
                slow[n] += h[k] * x[n - k];
            }
        }
        for (a, b) in fast.iter().zip(&slow) {
            assert!((a - b).abs() < 1e-12);
        }
    }
}
