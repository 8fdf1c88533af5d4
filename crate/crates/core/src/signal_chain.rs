//! Synthetic OSCAR-style observations.
//!
//! The detection path works at baseband: the frequency lock-in is modelled
//! as identity plus white Gaussian noise, the spin contributes a telegraph
//! amplitude `±σ_d` to the in-phase channel only, and both channels go
//! through the recursive low-pass filter and are subsampled at the filter
//! rate. [`fm_synthesize`] and [`correlate_channels`] cover the carrier side
//! of the chain and are not used by the detectors.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use std::f64::consts::{FRAC_PI_4, PI};

use crate::error::{domain, Error, Result};
use crate::Hypothesis;

/// Physical and processing constants of the measurement chain.
///
/// Angular quantities are in rad/s except `cutoff`, which is in rad/sample.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChainParams {
    pub carrier_freq: f64,
    pub amplitude: f64,
    pub phase: f64,
    pub freq_shift: f64,
    pub skip_period: f64,
    pub relax_rate: f64,
    pub sample_period: f64,
    pub noise_var: f64,
    pub signal_var: f64,
    pub cutoff: f64,
}

impl Default for ChainParams {
    fn default() -> Self {
        Self {
            carrier_freq: 2.0 * PI * 1_000.0,
            amplitude: 1.0,
            phase: 0.0,
            freq_shift: 2.0 * PI * 10.0,
            skip_period: 0.01,
            relax_rate: 50.0,
            sample_period: 1e-4,
            noise_var: 1.0,
            signal_var: 0.1,
            cutoff: PI / 8.0,
        }
    }
}

impl ChainParams {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("carrier_freq", self.carrier_freq),
            ("skip_period", self.skip_period),
            ("sample_period", self.sample_period),
            ("noise_var", self.noise_var),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return domain(format!("{name} must be positive, got {v}"));
            }
        }
        let nonneg = [
            ("amplitude", self.amplitude),
            ("freq_shift", self.freq_shift),
            ("relax_rate", self.relax_rate),
            ("signal_var", self.signal_var),
        ];
        for (name, v) in nonneg {
            if !(v >= 0.0 && v.is_finite()) {
                return domain(format!("{name} must be nonnegative, got {v}"));
            }
        }
        if !self.phase.is_finite() {
            return domain("phase must be finite");
        }
        let flip = self.relax_rate * self.sample_period;
        if flip > 1.0 {
            return domain(format!(
                "relax_rate * sample_period must be <= 1, got {flip}"
            ));
        }
        check_cutoff(self.cutoff)
    }

    /// Probability that the spin keeps its state over one sample.
    pub fn stay_prob(&self) -> f64 {
        1.0 - self.relax_rate * self.sample_period
    }

    /// `σ²_d / σ²_ν` before filtering.
    pub fn pre_filter_snr(&self) -> f64 {
        self.signal_var / self.noise_var
    }

    /// Skip period in samples, rounded to the nearest integer.
    pub fn skip_samples(&self) -> u64 {
        (self.skip_period / self.sample_period).round() as u64
    }
}

fn check_cutoff(cutoff: f64) -> Result<()> {
    if !(cutoff > 0.0 && cutoff < PI) {
        return domain(format!("cutoff must lie in (0, pi), got {cutoff}"));
    }
    Ok(())
}

/// Two-state Markov chain parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TelegraphParams {
    stay_prob: f64,
    len: usize,
}

impl TelegraphParams {
    pub fn new(stay_prob: f64, len: usize) -> Result<Self> {
        if !(0.0..=1.0).contains(&stay_prob) {
            return domain(format!(
                "stay probability must lie in [0, 1], got {stay_prob}"
            ));
        }
        if len == 0 {
            return domain("telegraph length must be positive");
        }
        Ok(Self { stay_prob, len })
    }

    pub fn from_chain(chain: &ChainParams, len: usize) -> Result<Self> {
        Self::new(chain.stay_prob(), len)
    }

    pub fn stay_prob(&self) -> f64 {
        self.stay_prob
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }
}

/// Random telegraph sequence: equiprobable start, then each state repeats
/// the previous one with probability `stay_prob`.
pub fn telegraph(params: TelegraphParams, seed: u64) -> Vec<i8> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let flip = 1.0 - params.stay_prob;
    let mut state: i8 = if rng.random_bool(0.5) { 1 } else { -1 };
    let mut out = Vec::with_capacity(params.len);
    out.push(state);
    for _ in 1..params.len {
        if rng.random_bool(flip) {
            state = -state;
        }
        out.push(state);
    }
    out
}

/// `∫₀ᵗ sq(u) du` for the unit square wave of period `2T` that starts at +1.
fn square_integral(t: f64, half_period: f64) -> f64 {
    let r = t.rem_euclid(2.0 * half_period);
    if r < half_period {
        r
    } else {
        2.0 * half_period - r
    }
}

/// Samples `A cos(ω₀t + ∫₀ᵗ s(u) du + φ)` at `t = kT_s` for `kT_s < duration`.
///
/// `s(u)` is the `±δω₀` square wave of period `2T_skip` times the telegraph
/// state, which is held constant over each sample interval (`flips[k]` on
/// `[kT_s, (k+1)T_s)`). The phase integral is exact.
pub fn fm_synthesize(
    params: &ChainParams,
    spin_present: bool,
    flips: &[i8],
    duration: f64,
) -> Result<Vec<f64>> {
    params.validate()?;
    if !(duration > 0.0 && duration.is_finite()) {
        return domain(format!("duration must be positive, got {duration}"));
    }
    let ts = params.sample_period;
    let n = ((duration / ts).ceil() as usize).max(1);
    if spin_present && flips.len() < n {
        return Err(Error::InvalidArgument(format!(
            "need {n} telegraph states, got {}",
            flips.len()
        )));
    }
    let mut out = Vec::with_capacity(n);
    let mut mod_phase = 0.0;
    let mut prev_tri = 0.0;
    for k in 0..n {
        let t = k as f64 * ts;
        if spin_present && k > 0 {
            let tri = square_integral(t, params.skip_period);
            mod_phase += params.freq_shift * f64::from(flips[k - 1]) * (tri - prev_tri);
            prev_tri = tri;
        }
        out.push(params.amplitude * (params.carrier_freq * t + mod_phase + params.phase).cos());
    }
    Ok(out)
}

/// Multiplies a demodulated signal by the ±1 reference square wave of period
/// `2T` samples (in-phase) and by the same wave delayed a quarter period
/// (quadrature). `T` must be even.
pub fn correlate_channels(demod: &[f64], skip_samples: usize) -> Result<(Vec<f64>, Vec<f64>)> {
    let t = skip_samples;
    if t == 0 || !t.is_multiple_of(2) {
        return Err(Error::InvalidArgument(format!(
            "skip period in samples must be even and positive, got {t}"
        )));
    }
    if demod.len() < 2 * t {
        return Err(Error::InvalidArgument(format!(
            "need at least {} samples, got {}",
            2 * t,
            demod.len()
        )));
    }
    let period = 2 * t;
    let reference = |k: usize| if k % period < t { 1.0 } else { -1.0 };
    let shift = period - t / 2;
    let inphase = demod
        .iter()
        .enumerate()
        .map(|(k, z)| z * reference(k))
        .collect();
    let quad = demod
        .iter()
        .enumerate()
        .map(|(k, z)| z * reference(k + shift))
        .collect();
    Ok((inphase, quad))
}

/// First-order recursive low-pass filter with half-power cutoff `ω_c`:
/// `x_n = α x_{n−1} + ((1−α)/2)(z_n + z_{n−1})`.
#[derive(Debug, Clone, Copy)]
pub struct Lowpass {
    alpha: f64,
    gain: f64,
    prev_z: f64,
    prev_x: f64,
}

impl Lowpass {
    pub fn new(cutoff: f64) -> Result<Self> {
        check_cutoff(cutoff)?;
        let alpha = lowpass_alpha(cutoff);
        Ok(Self {
            alpha,
            gain: 0.5 * (1.0 - alpha),
            prev_z: 0.0,
            prev_x: 0.0,
        })
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn step(&mut self, z: f64) -> f64 {
        let x = self.alpha * self.prev_x + self.gain * (z + self.prev_z);
        self.prev_z = z;
        self.prev_x = x;
        x
    }

    /// Samples to discard before the start-up transient has decayed.
    pub fn warmup(&self) -> usize {
        (3.0 / (1.0 - self.alpha)).ceil() as usize
    }

    /// Output variance per unit input variance for white input.
    pub fn noise_gain(&self) -> f64 {
        self.gain
    }
}

/// `α = (1 − sin ω_c)/cos ω_c`, written as `tan(π/4 − ω_c/2)` so that
/// `ω_c = π/2` needs no special case.
pub fn lowpass_alpha(cutoff: f64) -> f64 {
    (FRAC_PI_4 - 0.5 * cutoff).tan()
}

/// Filters a whole sequence from zero initial state.
pub fn lowpass(z: &[f64], cutoff: f64) -> Result<Vec<f64>> {
    let mut f = Lowpass::new(cutoff)?;
    Ok(z.iter().map(|&v| f.step(v)).collect())
}

/// Decimation factor `round(2π/ω_c)`.
pub fn decimation(cutoff: f64) -> Result<usize> {
    check_cutoff(cutoff)?;
    Ok((2.0 * PI / cutoff).round() as usize)
}

/// Keeps every `D`-th sample starting at index 0.
pub fn subsample(x: &[f64], cutoff: f64) -> Result<Vec<f64>> {
    let d = decimation(cutoff)?;
    Ok(x.iter().step_by(d).copied().collect())
}

/// Noise variance after filtering: `σ²_ν (1−α)/2`.
pub fn post_filter_noise_var(params: &ChainParams) -> Result<f64> {
    Ok(params.noise_var * Lowpass::new(params.cutoff)?.noise_gain())
}

/// Signal-to-noise ratio after filtering.
///
/// The telegraph has autocorrelation `ρ^|d|` with `ρ = 2p − 1`, and the
/// filter's impulse response has autocorrelation `(1−α)/2` at lag 0 and
/// `(1−α²)α^{d−1}/4` beyond, so the telegraph gains `(1+ρ)/(1−αρ)` relative
/// to white noise.
pub fn post_filter_snr(params: &ChainParams) -> Result<f64> {
    params.validate()?;
    let alpha = lowpass_alpha(params.cutoff);
    let rho = 2.0 * params.stay_prob() - 1.0;
    Ok(params.pre_filter_snr() * (1.0 + rho) / (1.0 - alpha * rho))
}

/// Lazily generated (in-phase, quadrature) pairs after filtering and
/// subsampling. The stream is infinite.
#[derive(Debug, Clone)]
pub struct ObservationStream {
    rng: ChaCha8Rng,
    noise_sd: f64,
    signal_sd: f64,
    flip_prob: f64,
    spin: f64,
    lp_i: Lowpass,
    lp_q: Lowpass,
    decim: usize,
    skip: usize,
    phase: usize,
}

impl ObservationStream {
    pub fn new(params: &ChainParams, hyp: Hypothesis, rng: ChaCha8Rng) -> Result<Self> {
        params.validate()?;
        let lp = Lowpass::new(params.cutoff)?;
        let mut rng = rng;
        let spin = if rng.random_bool(0.5) { 1.0 } else { -1.0 };
        Ok(Self {
            rng,
            noise_sd: params.noise_var.sqrt(),
            signal_sd: match hyp {
                Hypothesis::H0 => 0.0,
                Hypothesis::H1 => params.signal_var.sqrt(),
            },
            flip_prob: 1.0 - params.stay_prob(),
            spin,
            lp_i: lp,
            lp_q: lp,
            decim: decimation(params.cutoff)?,
            skip: lp.warmup(),
            phase: 0,
        })
    }

    pub fn from_seed(params: &ChainParams, hyp: Hypothesis, seed: u64) -> Result<Self> {
        Self::new(params, hyp, ChaCha8Rng::seed_from_u64(seed))
    }

    fn raw_step(&mut self) -> (f64, f64) {
        let ni: f64 = self.rng.sample(StandardNormal);
        let nq: f64 = self.rng.sample(StandardNormal);
        let zi = self.signal_sd * self.spin + self.noise_sd * ni;
        let zq = self.noise_sd * nq;
        if self.rng.random_bool(self.flip_prob) {
            self.spin = -self.spin;
        }
        (self.lp_i.step(zi), self.lp_q.step(zq))
    }
}

impl Iterator for ObservationStream {
    type Item = (f64, f64);

    fn next(&mut self) -> Option<(f64, f64)> {
        while self.skip > 0 {
            self.raw_step();
            self.skip -= 1;
        }
        loop {
            let out = self.raw_step();
            let keep = self.phase == 0;
            self.phase = (self.phase + 1) % self.decim;
            if keep {
                return Some(out);
            }
        }
    }
}

/// `n` filtered and subsampled (in-phase, quadrature) samples.
pub fn generate_observation(
    params: &ChainParams,
    hyp: Hypothesis,
    n: usize,
    seed: u64,
) -> Result<(Vec<f64>, Vec<f64>)> {
    if n == 0 {
        return domain("n must be positive");
    }
    Ok(ObservationStream::from_seed(params, hyp, seed)?
        .take(n)
        .unzip())
}

/// snr estimate from the two channels: in-phase over quadrature energy,
/// minus one.
pub fn estimate_snr(inphase: &[f64], quadrature: &[f64]) -> Result<f64> {
    Ok(crate::detectors::fisher_ratio(inphase, quadrature)? - 1.0)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unmodulated_first_sample() {
        let p = ChainParams {
            amplitude: 2.5,
            ..Default::default()
        };
        let x = fm_synthesize(&p, false, &[], 0.01).unwrap();
        assert_eq!(x[0], 2.5);
        assert_eq!(x.len(), 100);
    }

    #[test]
    fn zero_shift_matches_carrier() {
        let p = ChainParams {
            freq_shift: 0.0,
            ..Default::default()
        };
        let flips = vec![1i8; 200];
        let a = fm_synthesize(&p, true, &flips, 0.02).unwrap();
        let b = fm_synthesize(&p, false, &[], 0.02).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn fm_needs_flips() {
        let p = ChainParams::default();
        assert!(fm_synthesize(&p, true, &[], 0.01).is_err());
        assert!(fm_synthesize(&p, true, &[1; 10], 0.01).is_err());
    }

    #[test]
    fn square_integral_is_triangle() {
        assert_eq!(square_integral(0.0, 1.0), 0.0);
        assert_eq!(square_integral(0.5, 1.0), 0.5);
        assert_eq!(square_integral(1.5, 1.0), 0.5);
        assert_eq!(square_integral(2.0, 1.0), 0.0);
    }

    #[test]
    fn telegraph_extremes() {
        let t = telegraph(TelegraphParams::new(1.0, 50).unwrap(), 3);
        assert!(t.iter().all(|&s| s == t[0]));
        let t = telegraph(TelegraphParams::new(0.0, 50).unwrap(), 3);
        assert!(t.windows(2).all(|w| w[0] == -w[1]));
        assert!(TelegraphParams::new(1.5, 5).is_err());
    }

    #[test]
    fn correlate_reference_itself() {
        let t = 4;
        let demod: Vec<f64> = (0..64)
            .map(|k| if k % (2 * t) < t { 1.0 } else { -1.0 })
            .collect();
        let (i, q) = correlate_channels(&demod, t).unwrap();
        assert!(i.iter().all(|&v| v == 1.0));
        assert_eq!(q.iter().sum::<f64>(), 0.0);
        let (i, q) = correlate_channels(&[0.0; 16], t).unwrap();
        assert!(i.iter().chain(&q).all(|&v| v == 0.0));
    }

    #[test]
    fn correlate_validation() {
        assert!(correlate_channels(&[0.0; 16], 3).is_err());
        assert!(correlate_channels(&[0.0; 7], 4).is_err());
    }

    #[test]
    fn lowpass_half_band() {
        assert!(lowpass_alpha(PI / 2.0).abs() < 1e-16);
        let y = lowpass(&[2.0, 4.0, 6.0], PI / 2.0).unwrap();
        assert_eq!(y, vec![1.0, 3.0, 5.0]);
        assert!((lowpass_alpha(PI / 3.0) - 0.267949).abs() < 1e-6);
    }

    #[test]
    fn lowpass_dc_gain() {
        for wc in [0.1, 0.5, 1.0, 2.5] {
            let y = lowpass(&vec![3.0; 2000], wc).unwrap();
            assert!((y[1999] - 3.0).abs() < 1e-10);
        }
        assert!(Lowpass::new(0.0).is_err());
        assert!(Lowpass::new(PI).is_err());
    }

    #[test]
    fn subsample_examples() {
        let x: Vec<f64> = (0..12).map(f64::from).collect();
        assert_eq!(subsample(&x, PI / 2.0).unwrap(), vec![0.0, 4.0, 8.0]);
        assert_eq!(decimation(3.0).unwrap(), 2);
    }

    #[test]
    fn observation_determinism() {
        let p = ChainParams::default();
        let a = generate_observation(&p, Hypothesis::H1, 100, 9).unwrap();
        let b = generate_observation(&p, Hypothesis::H1, 100, 9).unwrap();
        assert_eq!(a, b);
        let c = generate_observation(&p, Hypothesis::H1, 100, 10).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn post_filter_snr_white_telegraph() {
        // p = ½ makes the telegraph white, so the snr is unchanged
        let p = ChainParams {
            relax_rate: 5_000.0,
            ..Default::default()
        };
        assert!((post_filter_snr(&p).unwrap() - p.pre_filter_snr()).abs() < 1e-15);
        // a frozen spin passes at DC gain, the noise is cut by (1−α)/2
        let p = ChainParams {
            relax_rate: 0.0,
            ..Default::default()
        };
        let alpha = lowpass_alpha(p.cutoff);
        let want = p.pre_filter_snr() * 2.0 / (1.0 - alpha);
        assert!((post_filter_snr(&p).unwrap() / want - 1.0).abs() < 1e-14);
    }
}
