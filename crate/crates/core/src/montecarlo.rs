//! Seeded Monte Carlo harness for the sequential χ² test.
//!
//! Trial `k` of an experiment with master seed `s` draws from ChaCha8 seeded
//! with `s` on stream `k`, so results do not depend on thread count or
//! scheduling. Trials run in parallel and are aggregated in trial order.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::brownian::{chi2_bm_params, tsprt_with_prediction, TsprtOutcome};
use crate::detectors::{chi2_increment, HypothesisModel};
use crate::distributions::{required_sample_size, Family, TestStrength};
use crate::error::{domain, Error, Result};
use crate::sequential::{wald_asn, wald_boundaries, SprtDecision};
use crate::signal_chain::{
    lowpass_alpha, post_filter_noise_var, post_filter_snr, ChainParams, ObservationStream,
};
use crate::Hypothesis;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    /// i.i.d. Gaussian samples at the model's variances.
    DirectGaussian,
    /// In-phase channel of the simulated chain.
    FullChain,
}

impl Mode {
    pub fn name(self) -> &'static str {
        match self {
            Mode::DirectGaussian => "direct_gaussian",
            Mode::FullChain => "full_chain",
        }
    }
}

impl std::str::FromStr for Mode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "direct_gaussian" => Ok(Mode::DirectGaussian),
            "full_chain" => Ok(Mode::FullChain),
            other => Err(Error::InvalidArgument(format!("unknown mode '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExperimentConfig {
    pub chain: ChainParams,
    /// Hypotheses the LLR is built on. In full-chain mode this should match
    /// the chain after filtering; see [`calibrated_model`].
    pub model: HypothesisModel,
    pub strength: TestStrength,
    pub n_trials: u64,
    pub n_max: u64,
    pub master_seed: u64,
    pub mode: Mode,
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_trials == 0 {
            return domain("n_trials must be at least 1");
        }
        if self.n_max == 0 {
            return domain("n_max must be at least 1");
        }
        if self.mode == Mode::FullChain {
            self.chain.validate()?;
        }
        Ok(())
    }

    /// Same experiment at another (post-filter) snr. In full-chain mode the
    /// chain's signal variance is rescaled so the filtered snr matches.
    pub fn with_snr(&self, snr: f64) -> Result<Self> {
        let mut out = *self;
        match self.mode {
            Mode::DirectGaussian => {
                out.model = HypothesisModel::new(self.model.noise_var(), snr)?;
            }
            Mode::FullChain => {
                out.chain = chain_for_snr(&self.chain, snr)?;
                out.model = calibrated_model(&out.chain)?;
            }
        }
        Ok(out)
    }
}

/// Hypothesis model matching the chain's filtered in-phase channel.
pub fn calibrated_model(chain: &ChainParams) -> Result<HypothesisModel> {
    HypothesisModel::new(post_filter_noise_var(chain)?, post_filter_snr(chain)?)
}

/// Copy of `chain` with the signal variance set for a post-filter snr.
pub fn chain_for_snr(chain: &ChainParams, snr: f64) -> Result<ChainParams> {
    chain.validate()?;
    if !(snr > 0.0 && snr.is_finite()) {
        return domain(format!("snr must be positive, got {snr}"));
    }
    let alpha = lowpass_alpha(chain.cutoff);
    let rho = 2.0 * chain.stay_prob() - 1.0;
    let gain = (1.0 + rho) / (1.0 - alpha * rho);
    if gain <= 0.0 {
        return domain("telegraph is fully cancelled by the filter");
    }
    Ok(ChainParams {
        signal_var: snr / gain * chain.noise_var,
        ..*chain
    })
}

/// Random source of trial `trial` under `master_seed`.
pub fn trial_rng(master_seed: u64, trial: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(master_seed);
    rng.set_stream(trial);
    rng
}

/// Per-sample χ² LLR increments for one trial.
pub fn increment_stream(
    config: &ExperimentConfig,
    hyp: Hypothesis,
    trial: u64,
) -> Result<Box<dyn Iterator<Item = f64> + Send>> {
    let rng = trial_rng(config.master_seed, trial);
    let model = config.model;
    Ok(match config.mode {
        Mode::DirectGaussian => {
            let sd = model.variance_under(hyp).sqrt();
            let mut rng = rng;
            Box::new(std::iter::repeat_with(move || {
                let z: f64 = rng.sample(StandardNormal);
                chi2_increment(sd * z, &model)
            }))
        }
        Mode::FullChain => Box::new(
            ObservationStream::new(&config.chain, hyp, rng)?
                .map(move |(i, _)| chi2_increment(i, &model)),
        ),
    })
}

/// One truncated-SPRT trial.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrialRecord {
    pub trial: u64,
    pub outcome: TsprtOutcome,
}

impl TrialRecord {
    /// Stopping sample number, predicted when truncated.
    pub fn effective_n(&self) -> f64 {
        self.outcome
            .predicted_n
            .unwrap_or(self.outcome.base.n_stop as f64)
    }
}

/// ASN estimate over a batch of trials.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AsnEstimate {
    pub mean_n: f64,
    pub stderr: f64,
    /// Fraction of decided H₀ trials that accepted H₁.
    pub empirical_alpha: Option<f64>,
    /// Fraction of decided H₁ trials that accepted H₀.
    pub empirical_beta: Option<f64>,
    pub n_trials: u64,
    pub n_truncated: u64,
    /// Trials whose outcome could not be turned into a sample number.
    pub n_excluded: u64,
}

impl AsnEstimate {
    /// Binomial standard error of whichever error rate is present.
    pub fn error_stderr(&self) -> Option<f64> {
        let p = self.empirical_alpha.or(self.empirical_beta)?;
        let decided = (self.n_trials - self.n_truncated - self.n_excluded) as f64;
        Some((p * (1.0 - p) / decided).sqrt())
    }
}

/// Runs the trials with increments drawn from `source(trial)`.
pub fn run_trials_from<F, I>(
    config: &ExperimentConfig,
    hyp: Hypothesis,
    source: F,
) -> Result<Vec<Result<TrialRecord>>>
where
    F: Fn(u64) -> Result<I> + Sync,
    I: Iterator<Item = f64>,
{
    config.validate()?;
    let bounds = wald_boundaries(config.strength)?;
    let bm = chi2_bm_params(config.model.snr(), hyp)?;
    Ok((0..config.n_trials)
        .into_par_iter()
        .map(|trial| {
            let inc = source(trial)?;
            let outcome = tsprt_with_prediction(inc, &bounds, config.n_max, bm, hyp)?;
            Ok(TrialRecord { trial, outcome })
        })
        .collect())
}

/// Runs the trials of `config` under `hyp`.
pub fn run_trials(config: &ExperimentConfig, hyp: Hypothesis) -> Result<Vec<TrialRecord>> {
    run_trials_from(config, hyp, |t| increment_stream(config, hyp, t))?
        .into_iter()
        .collect()
}

/// Aggregates trial records into an ASN estimate.
pub fn summarize(records: &[Result<TrialRecord>], hyp: Hypothesis) -> Result<AsnEstimate> {
    let mut ns = Vec::with_capacity(records.len());
    let (mut truncated, mut excluded, mut decided, mut wrong) = (0u64, 0u64, 0u64, 0u64);
    for r in records {
        match r {
            Ok(rec) => {
                match rec.outcome.base.decision {
                    SprtDecision::Truncated => truncated += 1,
                    d => {
                        decided += 1;
                        let err = match hyp {
                            Hypothesis::H0 => d == SprtDecision::AcceptH1,
                            Hypothesis::H1 => d == SprtDecision::AcceptH0,
                        };
                        wrong += u64::from(err);
                    }
                }
                ns.push(rec.effective_n());
            }
            Err(Error::PredictionUndefined(_)) => excluded += 1,
            Err(e) => return Err(e.clone()),
        }
    }
    if ns.is_empty() {
        return Err(Error::EstimationFailed(format!(
            "none of {} trials produced a sample number",
            records.len()
        )));
    }
    let (mean_n, sd) = mean_sd(&ns);
    let rate = (decided > 0).then(|| wrong as f64 / decided as f64);
    Ok(AsnEstimate {
        mean_n,
        stderr: sd / (ns.len() as f64).sqrt(),
        empirical_alpha: if hyp == Hypothesis::H0 { rate } else { None },
        empirical_beta: if hyp == Hypothesis::H1 { rate } else { None },
        n_trials: records.len() as u64,
        n_truncated: truncated,
        n_excluded: excluded,
    })
}

/// ASN estimate with an injected increment source.
pub fn estimate_asn_from<F, I>(
    config: &ExperimentConfig,
    hyp: Hypothesis,
    source: F,
) -> Result<AsnEstimate>
where
    F: Fn(u64) -> Result<I> + Sync,
    I: Iterator<Item = f64>,
{
    summarize(&run_trials_from(config, hyp, source)?, hyp)
}

/// ASN estimate for `config` under `hyp`. Truncated trials contribute
/// their predicted stopping time.
pub fn estimate_asn(config: &ExperimentConfig, hyp: Hypothesis) -> Result<AsnEstimate> {
    estimate_asn_from(config, hyp, |t| increment_stream(config, hyp, t))
}

/// Sample mean and standard deviation (n − 1 denominator; 0 for one value).
pub fn mean_sd(x: &[f64]) -> (f64, f64) {
    let n = x.len() as f64;
    let mean = x.iter().sum::<f64>() / n;
    if x.len() < 2 {
        return (mean, 0.0);
    }
    let ss: f64 = x.iter().map(|v| (v - mean) * (v - mean)).sum();
    (mean, (ss / (n - 1.0)).sqrt())
}

/// One row of an RSE sweep.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RseRow {
    pub snr: f64,
    pub alpha: f64,
    pub beta: f64,
    pub n_fixed: u64,
    pub h0: AsnEstimate,
    pub h1: AsnEstimate,
    pub wald_asn_h0: f64,
    pub wald_asn_h1: f64,
}

impl RseRow {
    pub fn rse(&self, hyp: Hypothesis) -> f64 {
        self.n_fixed as f64 / self.asn(hyp).mean_n
    }

    /// Standard error of the RSE by the delta method.
    pub fn rse_stderr(&self, hyp: Hypothesis) -> f64 {
        let a = self.asn(hyp);
        self.rse(hyp) * a.stderr / a.mean_n
    }

    pub fn wald_rse(&self, hyp: Hypothesis) -> f64 {
        self.n_fixed as f64
            / match hyp {
                Hypothesis::H0 => self.wald_asn_h0,
                Hypothesis::H1 => self.wald_asn_h1,
            }
    }

    fn asn(&self, hyp: Hypothesis) -> &AsnEstimate {
        match hyp {
            Hypothesis::H0 => &self.h0,
            Hypothesis::H1 => &self.h1,
        }
    }
}

/// Fixed-size versus sequential sample numbers over an (snr, strength)
/// grid. Every row reuses the master seed.
pub fn rse_sweep(
    base: &ExperimentConfig,
    snr_grid: &[f64],
    strengths: &[TestStrength],
) -> Result<Vec<RseRow>> {
    if snr_grid.is_empty() || strengths.is_empty() {
        return domain("snr grid and strength list must be nonempty");
    }
    let mut rows = Vec::with_capacity(snr_grid.len() * strengths.len());
    for &snr in snr_grid {
        for &strength in strengths {
            let cfg = ExperimentConfig {
                strength,
                ..base.with_snr(snr)?
            };
            let bounds = wald_boundaries(strength)?;
            let wald =
                |hyp| -> Result<f64> { wald_asn(hyp, &bounds, chi2_bm_params(snr, hyp)?.mu) };
            rows.push(RseRow {
                snr,
                alpha: strength.alpha(),
                beta: strength.beta(),
                n_fixed: required_sample_size(strength, snr, Family::Chi2)?,
                h0: estimate_asn(&cfg, Hypothesis::H0)?,
                h1: estimate_asn(&cfg, Hypothesis::H1)?,
                wald_asn_h0: wald(Hypothesis::H0)?,
                wald_asn_h1: wald(Hypothesis::H1)?,
            });
        }
    }
    Ok(rows)
}

/// Seed-matched stopping numbers: predicted from a short budget versus
/// observed with a long one.
#[derive(Debug, Clone, PartialEq)]
pub struct PredictionPairs {
    pub predicted: Vec<f64>,
    pub observed: Vec<f64>,
    pub truncated_short: u64,
    /// Trials still truncated at the long budget; their observed value is
    /// itself a prediction.
    pub truncated_long: u64,
}

pub fn prediction_histograms(
    config: &ExperimentConfig,
    n_max_short: u64,
    n_max_long: u64,
    hyp: Hypothesis,
) -> Result<PredictionPairs> {
    if n_max_short == 0 || n_max_short >= n_max_long {
        return domain(format!(
            "need 1 <= n_max_short < n_max_long, got {n_max_short} and {n_max_long}"
        ));
    }
    let short = run_trials(
        &ExperimentConfig {
            n_max: n_max_short,
            ..*config
        },
        hyp,
    )?;
    let long = run_trials(
        &ExperimentConfig {
            n_max: n_max_long,
            ..*config
        },
        hyp,
    )?;
    let count = |v: &[TrialRecord]| v.iter().filter(|r| r.outcome.truncated()).count() as u64;
    Ok(PredictionPairs {
        predicted: short.iter().map(TrialRecord::effective_n).collect(),
        observed: long.iter().map(TrialRecord::effective_n).collect(),
        truncated_short: count(&short),
        truncated_long: count(&long),
    })
}

/// Sample skewness `m₃ / m₂^{3/2}` (biased moments).
pub fn skewness(x: &[f64]) -> f64 {
    let n = x.len() as f64;
    let mean = x.iter().sum::<f64>() / n;
    let (mut m2, mut m3) = (0.0, 0.0);
    for v in x {
        let d = v - mean;
        m2 += d * d;
        m3 += d * d * d;
    }
    m2 /= n;
    m3 /= n;
    if m2 == 0.0 {
        return 0.0;
    }
    m3 / m2.powf(1.5)
}

/// One-sided paired-bootstrap lower confidence bound on
/// `skewness(a) − skewness(b)` at the given level.
pub fn bootstrap_skew_diff_lower(
    a: &[f64],
    b: &[f64],
    n_boot: usize,
    level: f64,
    seed: u64,
) -> Result<f64> {
    if a.len() != b.len() || a.len() < 3 {
        return Err(Error::InvalidArgument(
            "bootstrap needs paired samples of length >= 3".into(),
        ));
    }
    if !(level > 0.0 && level < 1.0) || n_boot == 0 {
        return domain("bootstrap level must lie in (0, 1) with at least one resample");
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = a.len();
    let mut ra = vec![0.0; n];
    let mut rb = vec![0.0; n];
    let mut diffs: Vec<f64> = (0..n_boot)
        .map(|_| {
            for j in 0..n {
                let k = rng.random_range(0..n);
                ra[j] = a[k];
                rb[j] = b[k];
            }
            skewness(&ra) - skewness(&rb)
        })
        .collect();
    diffs.sort_by(f64::total_cmp);
    let idx = (((1.0 - level) * n_boot as f64).floor() as usize).min(n_boot - 1);
    Ok(diffs[idx])
}

#[cfg(test)]
mod tests {
    use super::*;

    fn config(snr: f64, trials: u64) -> ExperimentConfig {
        ExperimentConfig {
            chain: ChainParams::default(),
            model: HypothesisModel::new(1.0, snr).unwrap(),
            strength: TestStrength::new(0.02, 0.02).unwrap(),
            n_trials: trials,
            n_max: 10_000,
            master_seed: 42,
            mode: Mode::DirectGaussian,
        }
    }

    #[test]
    fn deterministic_stream_gives_exact_mean() {
        let cfg = config(1.0, 50);
        let est = estimate_asn_from(&cfg, Hypothesis::H1, |_| Ok(std::iter::repeat(1.0))).unwrap();
        // log A = ln 49 ≈ 3.89 is crossed at the fourth unit step
        assert_eq!(est.mean_n, 4.0);
        assert_eq!(est.stderr, 0.0);
        assert_eq!(est.empirical_beta, Some(0.0));
        assert_eq!(est.n_truncated, 0);
    }

    #[test]
    fn truncated_trials_use_prediction() {
        let mut cfg = config(1.0, 3);
        cfg.n_max = 10;
        let est = estimate_asn_from(&cfg, Hypothesis::H1, |_| Ok(std::iter::repeat(0.0))).unwrap();
        let mu = chi2_bm_params(1.0, Hypothesis::H1).unwrap().mu;
        let want = 10.0 + 49f64.ln() / mu;
        assert!((est.mean_n - want).abs() < 1e-9);
        assert_eq!(est.n_truncated, 3);
        assert_eq!(est.empirical_beta, None);
    }

    #[test]
    fn repeat_runs_identical() {
        let cfg = config(1.0, 200);
        let a = estimate_asn(&cfg, Hypothesis::H0).unwrap();
        let b = estimate_asn(&cfg, Hypothesis::H0).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn trial_streams_differ() {
        let mut a = trial_rng(1, 0);
        let mut b = trial_rng(1, 1);
        let (x, y): (u64, u64) = (a.random(), b.random());
        assert_ne!(x, y);
    }

    #[test]
    fn skewness_values() {
        assert_eq!(skewness(&[1.0, 2.0, 3.0]), 0.0);
        assert!(skewness(&[0.0, 0.0, 0.0, 10.0]) > 1.0);
        assert_eq!(skewness(&[2.0, 2.0, 2.0]), 0.0);
    }

    #[test]
    fn prediction_pairs_identical_when_nothing_truncates() {
        let cfg = config(1.0, 40);
        let p = prediction_histograms(&cfg, 5_000, 10_000, Hypothesis::H1).unwrap();
        assert_eq!(p.predicted, p.observed);
        assert_eq!(p.truncated_short, 0);
        assert!(prediction_histograms(&cfg, 10, 10, Hypothesis::H1).is_err());
    }

    #[test]
    fn chain_calibration_round_trip() {
        let c = chain_for_snr(&ChainParams::default(), 0.2).unwrap();
        let m = calibrated_model(&c).unwrap();
        assert!((m.snr() - 0.2).abs() < 1e-14);
    }
}
