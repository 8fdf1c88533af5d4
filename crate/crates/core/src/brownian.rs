//! Brownian-motion approximation of the χ² LLR path, the truncated SPRT,
//! and extrapolation of the stopping time past truncation.

use crate::distributions::special::log1pmx;
use crate::error::{domain, Error, Result};
use crate::sequential::{sprt_run, Boundaries, SprtDecision, SprtOutcome};
use crate::Hypothesis;

/// Drift and variance per sample of the approximating Brownian motion.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BrownianParams {
    pub mu: f64,
    pub sigma2: f64,
}

/// Per-sample mean and variance of the χ² LLR increment.
///
/// An increment is `a·x² − ½log(1+snr)` with `a = snr/(2σ²_ν(1+snr))`;
/// under H₁ `x²/(σ²_ν(1+snr))` is χ²₁, under H₀ `x²/σ²_ν` is.
pub fn chi2_bm_params(snr: f64, hyp: Hypothesis) -> Result<BrownianParams> {
    if !(snr > 0.0 && snr.is_finite()) {
        return domain(format!("snr must be positive, got {snr}"));
    }
    // snr/2 − ½log(1+snr) = −½ log1pmx(snr), which keeps digits at small snr
    let h1_mu = -0.5 * log1pmx(snr);
    Ok(match hyp {
        Hypothesis::H0 => BrownianParams {
            mu: h1_mu - 0.5 * snr * snr / (1.0 + snr),
            sigma2: snr * snr / (2.0 * (1.0 + snr) * (1.0 + snr)),
        },
        Hypothesis::H1 => BrownianParams {
            mu: h1_mu,
            sigma2: 0.5 * snr * snr,
        },
    })
}

/// Truncated SPRT result. `predicted_n` is filled by the caller through
/// [`predict_stopping`] when the run was truncated.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TsprtOutcome {
    pub base: SprtOutcome,
    pub predicted_n: Option<f64>,
}

impl TsprtOutcome {
    pub fn truncated(&self) -> bool {
        self.base.decision == SprtDecision::Truncated
    }
}

/// SPRT truncated after `n_max` samples.
pub fn tsprt_run<I>(increments: I, bounds: &Boundaries, n_max: u64) -> Result<TsprtOutcome>
where
    I: IntoIterator<Item = f64>,
{
    if n_max == 0 {
        return domain("n_max must be at least 1");
    }
    let base = sprt_run(increments, bounds, Some(n_max))?;
    Ok(TsprtOutcome {
        base,
        predicted_n: None,
    })
}

/// Extrapolates the mean Brownian path from `(n_max, final_llr)` to the
/// boundary the drift points toward: `log A` under H₁, `log B` under H₀.
pub fn predict_stopping(
    final_llr: f64,
    n_max: u64,
    bm: BrownianParams,
    bounds: &Boundaries,
    hyp: Hypothesis,
) -> Result<f64> {
    if bm.mu == 0.0 || !bm.mu.is_finite() {
        return Err(Error::PredictionUndefined("zero drift".into()));
    }
    let target = match hyp {
        Hypothesis::H0 => bounds.log_lower(),
        Hypothesis::H1 => bounds.log_upper(),
    };
    let remaining = (target - final_llr) / bm.mu;
    if remaining < 0.0 {
        return Err(Error::PredictionUndefined(format!(
            "drift {} points away from the {} boundary",
            bm.mu,
            hyp.label()
        )));
    }
    Ok(n_max as f64 + remaining)
}

/// Runs a truncated SPRT and fills in the prediction when it truncates.
pub fn tsprt_with_prediction<I>(
    increments: I,
    bounds: &Boundaries,
    n_max: u64,
    bm: BrownianParams,
    hyp: Hypothesis,
) -> Result<TsprtOutcome>
where
    I: IntoIterator<Item = f64>,
{
    let mut out = tsprt_run(increments, bounds, n_max)?;
    if out.truncated() {
        out.predicted_n = Some(predict_stopping(
            out.base.final_llr,
            n_max,
            bm,
            bounds,
            hyp,
        )?);
    }
    Ok(out)
}
