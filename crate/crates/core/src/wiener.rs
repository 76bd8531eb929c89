//! Multichannel Wiener filtering in the transform domain.
//!
//! Per bin `f`, the filter is `w(f) = Φ_yy(f)^{-1} φ_ys(f)` where `Φ_yy` is the
//! noisy spatial covariance and `φ_ys` the cross-covariance with the target
//! representation. The batch route accumulates utterance statistics and runs
//! a Hermitian solve; the frame-online route keeps `P = Φ_yy^{-1}` current with
//! rank-1 Woodbury updates and never inverts a matrix.

use log::warn;
use num_complex::Complex;

use crate::error::{Error, Result};
use crate::framing::{pad_and_frame, synthesize_aligned, FrameSpec, MultichannelSignal};
use crate::linalg::{cdot_h, cholesky_solve, cmatvec, hermitize, trace_re};
use crate::scalar::Real;
use crate::transform::{analyze, synthesize, AnalysisTransform, ComplexSpectrum, SynthesisTransform};

type C<T> = Complex<T>;

fn czero<T: Real>() -> C<T> {
    Complex::new(T::zero(), T::zero())
}

/// Per-bin Hermitian noisy covariance `Φ_yy(f)`, stored `[F × M × M]`.
#[derive(Debug, Clone, PartialEq)]
pub struct SpatialCovariance<T> {
    pub channels: usize,
    pub bins: usize,
    /// Frames accumulated.
    pub frames: usize,
    pub data: Vec<C<T>>,
}

impl<T: Real> SpatialCovariance<T> {
    pub fn bin(&self, f: usize) -> &[C<T>] {
        let mm = self.channels * self.channels;
        &self.data[f * mm..(f + 1) * mm]
    }
}

/// Per-bin cross-covariance `φ_ys(f)`, stored `[F × M]`.
#[derive(Debug, Clone, PartialEq)]
pub struct CrossCovariance<T> {
    pub channels: usize,
    pub bins: usize,
    pub data: Vec<C<T>>,
}

impl<T: Real> CrossCovariance<T> {
    pub fn bin(&self, f: usize) -> &[C<T>] {
        &self.data[f * self.channels..(f + 1) * self.channels]
    }
}

/// Per-bin spatial filter `w(f)`, stored `[F × M]`.
#[derive(Debug, Clone, PartialEq)]
pub struct WienerWeights<T> {
    pub channels: usize,
    pub bins: usize,
    pub data: Vec<C<T>>,
}

impl<T: Real> WienerWeights<T> {
    pub fn zeros(channels: usize, bins: usize) -> Self {
        Self { channels, bins, data: vec![czero(); channels * bins] }
    }

    pub fn bin(&self, f: usize) -> &[C<T>] {
        &self.data[f * self.channels..(f + 1) * self.channels]
    }

    pub fn bin_mut(&mut self, f: usize) -> &mut [C<T>] {
        &mut self.data[f * self.channels..(f + 1) * self.channels]
    }
}

/// Diagonal loading added to `Φ_yy` before solving.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Loading<T> {
    /// `ε · tr(Φ_yy) / M`.
    Relative(T),
    /// A fixed `δ`.
    Absolute(T),
}

impl<T: Real> Loading<T> {
    fn amount(&self, cov: &[C<T>], m: usize) -> T {
        match *self {
            Loading::Relative(eps) => eps * trace_re(cov, m) / T::count(m),
            Loading::Absolute(delta) => delta,
        }
    }

    fn is_zero(&self) -> bool {
        match *self {
            Loading::Relative(v) | Loading::Absolute(v) => v == T::zero(),
        }
    }
}

impl<T: Real> Default for Loading<T> {
    fn default() -> Self {
        Loading::Relative(T::lit(1e-4))
    }
}

/// Where the filter statistics come from.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum WienerMode<T> {
    /// One filter per utterance from the full-utterance statistics.
    Batch { loading: Loading<T> },
    /// Frame-online filter with forgetting factor and initial loading `P₀ = I/δ`.
    Online { forgetting: T, loading: T },
}

impl<T: Real> WienerMode<T> {
    pub fn batch() -> Self {
        WienerMode::Batch { loading: Loading::default() }
    }

    pub fn online() -> Self {
        WienerMode::Online { forgetting: T::lit(0.998), loading: T::lit(1e-2) }
    }
}

fn check_pair<T: Real>(noisy: &ComplexSpectrum<T>, target: &ComplexSpectrum<T>) -> Result<()> {
    if target.channels != 1 {
        return Err(Error::ShapeMismatch(format!(
            "target spectrum must be single-channel, got {}",
            target.channels
        )));
    }
    if noisy.frames != target.frames || noisy.bins != target.bins {
        return Err(Error::ShapeMismatch(format!(
            "noisy {}x{} vs target {}x{} (frames x bins)",
            noisy.frames, noisy.bins, target.frames, target.bins
        )));
    }
    Ok(())
}

/// Sums `Y Y^H` and `Y conj(Ŝ)` over all frames, per bin.
pub fn accumulate_batch<T: Real>(
    noisy: &ComplexSpectrum<T>,
    target: &ComplexSpectrum<T>,
) -> Result<(SpatialCovariance<T>, CrossCovariance<T>)> {
    check_pair(noisy, target)?;
    let m = noisy.channels;
    let bins = noisy.bins;
    let mut cov = vec![czero(); bins * m * m];
    let mut cross = vec![czero(); bins * m];
    let mut y = vec![czero::<T>(); m];
    for t in 0..noisy.frames {
        for f in 0..bins {
            for (ch, v) in y.iter_mut().enumerate() {
                *v = noisy.get(ch, t, f);
            }
            let s = target.get(0, t, f).conj();
            let phi = &mut cov[f * m * m..(f + 1) * m * m];
            for i in 0..m {
                for j in 0..m {
                    phi[i * m + j] = phi[i * m + j] + y[i] * y[j].conj();
                }
            }
            for (c, &yi) in cross[f * m..(f + 1) * m].iter_mut().zip(&y) {
                *c = *c + yi * s;
            }
        }
    }
    Ok((
        SpatialCovariance { channels: m, bins, frames: noisy.frames, data: cov },
        CrossCovariance { channels: m, bins, data: cross },
    ))
}

/// Solves `(Φ_yy(f) + loading·I) w(f) = φ_ys(f)` for every bin.
///
/// With zero loading a singular bin is an error so the caller can retry with
/// loading. With positive loading a bin that still cannot be solved (all-zero
/// or non-finite statistics) gets zero weights and a warning.
pub fn solve_batch<T: Real>(
    cov: &SpatialCovariance<T>,
    cross: &CrossCovariance<T>,
    loading: Loading<T>,
) -> Result<WienerWeights<T>> {
    if cov.channels != cross.channels || cov.bins != cross.bins {
        return Err(Error::ShapeMismatch("covariance and cross-covariance disagree".into()));
    }
    let m = cov.channels;
    let mut out = WienerWeights::zeros(m, cov.bins);
    let mut loaded = vec![czero::<T>(); m * m];
    for f in 0..cov.bins {
        loaded.copy_from_slice(cov.bin(f));
        let diag = loading.amount(&loaded, m);
        for i in 0..m {
            loaded[i * m + i] = loaded[i * m + i] + Complex::new(diag, T::zero());
        }
        match cholesky_solve(&loaded, m, cross.bin(f)) {
            Some(w) => out.bin_mut(f).copy_from_slice(&w),
            None if loading.is_zero() => return Err(Error::Singular { bin: f }),
            None => warn!("wiener bin {f} not solvable; weights zeroed"),
        }
    }
    Ok(out)
}

/// `Ŝ_bf(t, f) = w(f)^H Y(t, f)`.
pub fn apply_filter<T: Real>(
    weights: &WienerWeights<T>,
    noisy: &ComplexSpectrum<T>,
) -> Result<ComplexSpectrum<T>> {
    if weights.channels != noisy.channels || weights.bins != noisy.bins {
        return Err(Error::ShapeMismatch(format!(
            "weights {}x{} vs spectrum {}x{} (channels x bins)",
            weights.channels, weights.bins, noisy.channels, noisy.bins
        )));
    }
    let mut out = ComplexSpectrum::zeros(1, noisy.frames, noisy.bins, noisy.hop, noisy.sample_rate);
    for t in 0..noisy.frames {
        let row = out.at_mut(0, t);
        for (f, o) in row.iter_mut().enumerate() {
            let w = weights.bin(f);
            *o = (0..noisy.channels).fold(czero(), |acc, ch| acc + w[ch].conj() * noisy.get(ch, t, f));
        }
    }
    Ok(out)
}

/// Frame-online Wiener statistics: `P(f) = Φ_yy(f)^{-1}` and `φ_ys(f)`.
#[derive(Debug, Clone, PartialEq)]
pub struct OnlineWienerState<T> {
    channels: usize,
    bins: usize,
    forgetting: T,
    loading: T,
    updates: usize,
    inv_cov: Vec<C<T>>,
    cross: Vec<C<T>>,
    scratch: Vec<C<T>>,
}

impl<T: Real> OnlineWienerState<T> {
    pub fn new(channels: usize, bins: usize, forgetting: T, loading: T) -> Result<Self> {
        if channels == 0 || bins == 0 {
            return Err(Error::Config("online state needs channels and bins".into()));
        }
        if !(forgetting > T::zero() && forgetting <= T::one()) {
            return Err(Error::Config(format!("forgetting factor {forgetting} outside (0, 1]")));
        }
        if !(loading > T::zero()) {
            return Err(Error::Config(format!("loading {loading} must be positive")));
        }
        let mut inv_cov = vec![czero(); bins * channels * channels];
        let init = Complex::new(loading.recip(), T::zero());
        for f in 0..bins {
            for i in 0..channels {
                inv_cov[f * channels * channels + i * channels + i] = init;
            }
        }
        Ok(Self {
            channels,
            bins,
            forgetting,
            loading,
            updates: 0,
            inv_cov,
            cross: vec![czero(); bins * channels],
            scratch: vec![czero(); channels],
        })
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn bins(&self) -> usize {
        self.bins
    }

    pub fn updates(&self) -> usize {
        self.updates
    }

    pub fn forgetting(&self) -> T {
        self.forgetting
    }

    pub fn loading(&self) -> T {
        self.loading
    }

    /// Current inverse covariance of bin `f`.
    pub fn inverse(&self, f: usize) -> &[C<T>] {
        let mm = self.channels * self.channels;
        &self.inv_cov[f * mm..(f + 1) * mm]
    }

    pub fn cross(&self, f: usize) -> &[C<T>] {
        &self.cross[f * self.channels..(f + 1) * self.channels]
    }

    /// Folds one frame into the statistics.
    ///
    /// `noisy` is bin-major `[F × M]`, `target` holds one value per bin.
    pub fn update(&mut self, noisy: &[C<T>], target: &[C<T>]) -> Result<()> {
        let m = self.channels;
        if noisy.len() != self.bins * m || target.len() != self.bins {
            return Err(Error::ShapeMismatch("online update frame has wrong size".into()));
        }
        let finite = |c: &C<T>| c.re.is_finite() && c.im.is_finite();
        if !noisy.iter().all(finite) || !target.iter().all(finite) {
            return Err(Error::NonFinite("online Wiener frame"));
        }
        let lambda = self.forgetting;
        let inv_lambda = lambda.recip();
        let mm = m * m;
        for f in 0..self.bins {
            let y = &noisy[f * m..(f + 1) * m];
            let p = &mut self.inv_cov[f * mm..(f + 1) * mm];
            let u = &mut self.scratch;
            cmatvec(p, m, y, u);
            let denom = lambda + cdot_h(y, u).re;
            for i in 0..m {
                for j in 0..m {
                    p[i * m + j] = (p[i * m + j] - u[i] * u[j].conj() / denom) * inv_lambda;
                }
            }
            hermitize(p, m);
            let s = target[f].conj();
            for (c, &yi) in self.cross[f * m..(f + 1) * m].iter_mut().zip(y) {
                *c = *c * lambda + yi * s;
            }
        }
        self.updates += 1;
        Ok(())
    }

    /// Folds frame `t` of a spectrum pair into the statistics.
    pub fn update_frame(
        &mut self,
        noisy: &ComplexSpectrum<T>,
        target: &ComplexSpectrum<T>,
        t: usize,
    ) -> Result<()> {
        check_pair(noisy, target)?;
        if noisy.channels != self.channels || noisy.bins != self.bins {
            return Err(Error::ShapeMismatch("spectrum does not match online state".into()));
        }
        let m = self.channels;
        let mut y = vec![czero(); self.bins * m];
        for ch in 0..m {
            for (f, &v) in noisy.at(ch, t).iter().enumerate() {
                y[f * m + ch] = v;
            }
        }
        self.update(&y, target.at(0, t))
    }

    /// `w(f) = P(f) φ_ys(f)`.
    pub fn weights(&self) -> WienerWeights<T> {
        let m = self.channels;
        let mut out = WienerWeights::zeros(m, self.bins);
        for f in 0..self.bins {
            cmatvec(self.inverse(f), m, self.cross(f), out.bin_mut(f));
        }
        out
    }
}

/// Same as [`OnlineWienerState::weights`].
pub fn weights_from_state<T: Real>(state: &OnlineWienerState<T>) -> WienerWeights<T> {
    state.weights()
}

/// Runs the neural Wiener filter: frame, analyze, estimate, filter, synthesize.
///
/// Both signals are framed with `spec` (input frame `iW`, hop `J`); the
/// synthesis width of `D` must equal `spec.output_frame`. In online mode the
/// filter for frame `t` only sees frames `≤ t`.
pub fn nwf_enhance<T: Real>(
    noisy: &MultichannelSignal<T>,
    target: &MultichannelSignal<T>,
    analysis: &AnalysisTransform<T>,
    synthesis: &SynthesisTransform<T>,
    spec: &FrameSpec,
    mode: WienerMode<T>,
) -> Result<MultichannelSignal<T>> {
    spec.validate()?;
    if target.channels() != 1 {
        return Err(Error::ShapeMismatch("target must be single-channel".into()));
    }
    if target.len() != noisy.len() {
        return Err(Error::ShapeMismatch(format!(
            "target length {} != noisy length {}",
            target.len(),
            noisy.len()
        )));
    }
    if analysis.input_frame() != spec.input_frame {
        return Err(Error::ShapeMismatch(format!(
            "analysis input {} != frame size {}",
            analysis.input_frame(),
            spec.input_frame
        )));
    }
    if synthesis.output_frame() != spec.output_frame || synthesis.bins() != analysis.bins() {
        return Err(Error::ShapeMismatch(format!(
            "synthesis {}x{} does not fit output frame {} and {} bins",
            synthesis.output_frame(),
            2 * synthesis.bins(),
            spec.output_frame,
            analysis.bins()
        )));
    }
    let noisy_spec = analyze(&pad_and_frame(noisy, spec)?, analysis)?;
    let target_spec = analyze(&pad_and_frame(target, spec)?, analysis)?;

    let filtered = match mode {
        WienerMode::Batch { loading } => {
            let (cov, cross) = accumulate_batch(&noisy_spec, &target_spec)?;
            let weights = solve_batch(&cov, &cross, loading)?;
            apply_filter(&weights, &noisy_spec)?
        }
        WienerMode::Online { forgetting, loading } => {
            let m = noisy_spec.channels;
            let bins = noisy_spec.bins;
            let mut state = OnlineWienerState::new(m, bins, forgetting, loading)?;
            let mut out = ComplexSpectrum::zeros(1, noisy_spec.frames, bins, spec.hop, noisy.sample_rate());
            let mut y = vec![czero(); bins * m];
            let mut w = vec![czero(); m];
            for t in 0..noisy_spec.frames {
                for ch in 0..m {
                    for (f, &v) in noisy_spec.at(ch, t).iter().enumerate() {
                        y[f * m + ch] = v;
                    }
                }
                state.update(&y, target_spec.at(0, t))?;
                let row = out.at_mut(0, t);
                for (f, o) in row.iter_mut().enumerate() {
                    cmatvec(state.inverse(f), m, state.cross(f), &mut w);
                    *o = cdot_h(&w, &y[f * m..(f + 1) * m]);
                }
            }
            out
        }
    };
    let frames = synthesize(&filtered, synthesis)?;
    synthesize_aligned(&frames, spec.mode, noisy.len())
}
