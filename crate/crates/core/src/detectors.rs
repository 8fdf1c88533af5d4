//! Fixed-sample-size detectors: the energy (χ²) detector and the
//! in-phase/quadrature energy-ratio (Fisher-F) detector.
//!
//! Both LLRs are strictly increasing in their statistic, so thresholding the
//! statistic at an H₀ quantile is the same test as thresholding the LLR.

use crate::distributions::{
    Family, ScaledChi2, ScaledFisherF, StatisticDistribution, TestStrength,
};
use crate::error::{domain, Error, Result};

/// Simple-vs-simple Gaussian variance hypotheses:
/// H₀ `N(0, σ²_ν)` against H₁ `N(0, σ²_ν (1 + snr))`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HypothesisModel {
    noise_var: f64,
    snr: f64,
}

impl HypothesisModel {
    pub fn new(noise_var: f64, snr: f64) -> Result<Self> {
        if !(noise_var > 0.0 && noise_var.is_finite()) {
            return domain(format!("noise variance must be positive, got {noise_var}"));
        }
        if !(snr > 0.0 && snr.is_finite()) {
            return domain(format!("snr must be positive, got {snr}"));
        }
        Ok(Self { noise_var, snr })
    }

    pub fn noise_var(&self) -> f64 {
        self.noise_var
    }

    pub fn snr(&self) -> f64 {
        self.snr
    }

    /// `σ²_d = snr · σ²_ν`
    pub fn signal_var(&self) -> f64 {
        self.snr * self.noise_var
    }

    /// Variance of a sample under H₁.
    pub fn h1_var(&self) -> f64 {
        self.noise_var * (1.0 + self.snr)
    }

    /// Per-sample variance under the given hypothesis.
    pub fn variance_under(&self, hyp: crate::Hypothesis) -> f64 {
        match hyp {
            crate::Hypothesis::H0 => self.noise_var,
            crate::Hypothesis::H1 => self.h1_var(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FixedVerdict {
    AcceptH0,
    AcceptH1,
}

/// Outcome of a fixed-sample-size test.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FixedDecision {
    pub decision: FixedVerdict,
    pub statistic: f64,
    pub threshold: f64,
    pub n: u64,
}

/// Energy `Σ xₙ²`.
pub fn energy(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum()
}

/// χ² log-likelihood ratio of an energy `E` over `n` samples.
pub fn chi2_llr(energy: f64, n: u64, model: &HypothesisModel) -> f64 {
    let snr = model.snr;
    snr / (1.0 + snr) * energy / (2.0 * model.noise_var) - 0.5 * n as f64 * snr.ln_1p()
}

/// LLR contribution of a single sample `x` to the energy detector.
pub fn chi2_increment(x: f64, model: &HypothesisModel) -> f64 {
    chi2_llr(x * x, 1, model)
}

/// Ratio of in-phase to quadrature energies.
pub fn fisher_ratio(inphase: &[f64], quadrature: &[f64]) -> Result<f64> {
    if inphase.len() != quadrature.len() {
        return Err(Error::InvalidArgument(format!(
            "channel lengths differ: {} vs {}",
            inphase.len(),
            quadrature.len()
        )));
    }
    if inphase.is_empty() {
        return Err(Error::InvalidArgument("empty channels".into()));
    }
    let eq = energy(quadrature);
    if eq <= 0.0 {
        return Err(Error::Degenerate(
            "quadrature channel has zero energy".into(),
        ));
    }
    Ok(energy(inphase) / eq)
}

/// Fisher-F log-likelihood ratio of an energy ratio `x` over `n` pairs.
///
/// Depends on the snr only; the noise variance cancels in the ratio.
pub fn fisher_llr(x: f64, n: u64, snr: f64) -> f64 {
    debug_assert!(x > 0.0);
    let n = n as f64;
    // N log(1+x) − N log(1+snr+x) = −N log(1 + snr/(1+x))
    0.5 * n * snr.ln_1p() - n * (snr / (1.0 + x)).ln_1p()
}

/// Size-`α` upper-tail test on a raw statistic.
///
/// The threshold is the `1 − α` quantile of the statistic's H₀ law:
/// `σ²_ν χ²_N` for the energy detector, `F(N, N)` for the ratio detector.
pub fn fixed_test(
    statistic: f64,
    strength: TestStrength,
    n: u64,
    family: Family,
    model: &HypothesisModel,
) -> Result<FixedDecision> {
    let threshold = match family {
        Family::Chi2 => ScaledChi2::new(n, model.noise_var)?.upper_quantile(strength.alpha())?,
        Family::Fisher => ScaledFisherF::new(n, 1.0)?.upper_quantile(strength.alpha())?,
    };
    let decision = if statistic > threshold {
        FixedVerdict::AcceptH1
    } else {
        FixedVerdict::AcceptH0
    };
    Ok(FixedDecision {
        decision,
        statistic,
        threshold,
        n,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn energy_values() {
        assert_eq!(energy(&[0.0, 0.0, 0.0]), 0.0);
        assert_eq!(energy(&[1.0, -2.0, 2.0]), 9.0);
    }

    #[test]
    fn chi2_llr_arithmetic() {
        let m = HypothesisModel::new(1.0, 1.0).unwrap();
        let got = chi2_llr(4.0, 2, &m);
        assert!((got - (1.0 - std::f64::consts::LN_2)).abs() < 1e-15);
        assert!((got - 0.306853).abs() < 1e-6);
    }

    #[test]
    fn chi2_llr_zero_crossing() {
        let (n, nv, snr) = (7u64, 2.5, 0.3);
        let m = HypothesisModel::new(nv, snr).unwrap();
        let e0 = n as f64 * nv * (1.0 + snr) * snr.ln_1p() / snr;
        assert!(chi2_llr(e0, n, &m).abs() < 1e-14);
    }

    #[test]
    fn llrs_vanish_as_snr_goes_to_zero() {
        let m = HypothesisModel::new(1.0, 1e-14).unwrap();
        assert!(chi2_llr(10.0, 5, &m).abs() < 1e-12);
        assert!(fisher_llr(3.0, 5, 1e-14).abs() < 1e-12);
    }

    #[test]
    fn fisher_llr_arithmetic() {
        let got = fisher_llr(1.0, 2, 1.0);
        let want = 3.0 * 2f64.ln() - 2.0 * 3f64.ln();
        assert!((got - want).abs() < 1e-15);
        assert!((got + 0.117783).abs() < 1e-6);
    }

    #[test]
    fn fisher_llr_large_ratio_limit() {
        let (n, snr) = (4u64, 0.5f64);
        let limit = 0.5 * n as f64 * snr.ln_1p();
        let mut prev = f64::NEG_INFINITY;
        for x in [1e2, 1e4, 1e6, 1e9] {
            let v = fisher_llr(x, n, snr);
            assert!(v < limit && v > prev);
            prev = v;
        }
        assert!((limit - prev).abs() < 1e-8);
    }

    #[test]
    fn fisher_ratio_values() {
        let q = [0.5, -1.0, 2.0];
        assert_eq!(fisher_ratio(&q, &q).unwrap(), 1.0);
        let i: Vec<f64> = q.iter().map(|v| 2.0 * v).collect();
        assert!((fisher_ratio(&i, &q).unwrap() - 4.0).abs() < 1e-15);
        assert!(matches!(
            fisher_ratio(&q, &[0.0, 0.0, 0.0]),
            Err(Error::Degenerate(_))
        ));
        assert!(fisher_ratio(&q, &q[..2]).is_err());
    }

    #[test]
    fn fixed_test_below_median_accepts_h0() {
        let m = HypothesisModel::new(1.0, 1.0).unwrap();
        let s = TestStrength::new(0.05, 0.05).unwrap();
        let d = fixed_test(5.0, s, 10, Family::Chi2, &m).unwrap();
        assert_eq!(d.decision, FixedVerdict::AcceptH0);
        let d = fixed_test(0.9, s, 10, Family::Fisher, &m).unwrap();
        assert_eq!(d.decision, FixedVerdict::AcceptH0);
        let d = fixed_test(100.0, s, 10, Family::Chi2, &m).unwrap();
        assert_eq!(d.decision, FixedVerdict::AcceptH1);
        assert!(d.statistic > d.threshold);
    }

    #[test]
    fn model_validation() {
        assert!(HypothesisModel::new(0.0, 1.0).is_err());
        assert!(HypothesisModel::new(1.0, 0.0).is_err());
        let m = HypothesisModel::new(2.0, 0.5).unwrap();
        assert_eq!(m.h1_var(), 3.0);
    }
}
