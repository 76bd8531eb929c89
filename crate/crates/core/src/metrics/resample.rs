use crate::error::{Error, Result};

/// Zero crossings of the interpolation kernel on each side.
const ZERO_CROSSINGS: f64 = 16.0;

/// Band-limited rational resampling with a Hann-windowed sinc kernel.
///
/// Output sample `n` sits at input time `n · fs_in / fs_out`; the kernel's
/// cutoff is the lower of the two Nyquist rates. Since the ratio is
/// rational the kernel phases repeat, so the result is a polyphase filter.
pub fn resample(x: &[f64], fs_in: u32, fs_out: u32) -> Result<Vec<f64>> {
    if fs_in == 0 || fs_out == 0 {
        return Err(Error::Config("sample rates must be positive".into()));
    }
    if fs_in == fs_out {
        return Ok(x.to_vec());
    }
    let g = gcd(fs_in as u64, fs_out as u64);
    let (up, down) = (fs_out as u64 / g, fs_in as u64 / g);
    let out_len = ((x.len() as u64 * up).div_ceil(down)) as usize;
    let cutoff = (fs_out as f64 / fs_in as f64).min(1.0);
    let half = (ZERO_CROSSINGS / cutoff).ceil() as i64;

    // one kernel per output phase
    let phases: Vec<Vec<f64>> = (0..up)
        .map(|p| {
            let frac = (p * down % up) as f64 / up as f64;
            (-half..=half)
                .map(|k| {
                    let t = k as f64 - frac;
                    let arg = cutoff * t;
                    let sinc = if arg == 0.0 { 1.0 } else { (std::f64::consts::PI * arg).sin() / (std::f64::consts::PI * arg) };
                    let win = if t.abs() >= half as f64 {
                        0.0
                    } else {
                        0.5 + 0.5 * (std::f64::consts::PI * t / half as f64).cos()
                    };
                    cutoff * sinc * win
                })
                .collect()
        })
        .collect();

    let mut out = Vec::with_capacity(out_len);
    for n in 0..out_len as u64 {
        let base = (n * down / up) as i64;
        let kernel = &phases[(n % up) as usize];
        let mut acc = 0.0;
        for (j, &h) in kernel.iter().enumerate() {
            let idx = base + j as i64 - half;
            if idx >= 0 && (idx as usize) < x.len() {
                acc += h * x[idx as usize];
            }
        }
        out.push(acc);
    }
    Ok(out)
}

fn gcd(a: u64, b: u64) -> u64 {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity_rate_is_a_copy() {
        let x = [1.0, 2.0, 3.0];
        assert_eq!(resample(&x, 16_000, 16_000).unwrap(), x);
    }

    #[test]
    fn low_tone_survives_downsampling() {
        let fs_in = 16_000.0;
        let f = 500.0;
        let x: Vec<f64> = (0..16_000).map(|n| (2.0 * std::f64::consts::PI * f * n as f64 / fs_in).sin()).collect();
        let y = resample(&x, 16_000, 10_000).unwrap();
        assert_eq!(y.len(), 10_000);
        for (n, v) in y.iter().enumerate().skip(200).take(9_600) {
            let expect = (2.0 * std::f64::consts::PI * f * n as f64 / 10_000.0).sin();
            assert!((v - expect).abs() < 2e-3, "n={n} {v} vs {expect}");
        }
    }

    #[test]
    fn tone_above_new_nyquist_is_removed() {
        let x: Vec<f64> = (0..16_000).map(|n| (2.0 * std::f64::consts::PI * 7_000.0 * n as f64 / 16_000.0).sin()).collect();
        let y = resample(&x, 16_000, 10_000).unwrap();
        let rms = (y[200..9_800].iter().map(|v| v * v).sum::<f64>() / 9_600.0).sqrt();
        assert!(rms < 1e-2, "rms {rms}");
    }
}
