//! Wald's sequential probability ratio test.
//!
//! The accumulated LLR `Λ⁽ⁿ⁾` is compared against `log A` (accept H₁) and
//! `log B` (accept H₀) after every sample. Crossings are inclusive on both
//! sides.

use crate::detectors::HypothesisModel;
use crate::distributions::TestStrength;
use crate::error::{domain, Error, Result};
use crate::Hypothesis;

/// Wald's approximations are trusted below this error probability.
pub const WALD_VALIDITY_LIMIT: f64 = 0.05;

/// SPRT thresholds, stored in log form.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Boundaries {
    log_upper: f64,
    log_lower: f64,
}

impl Boundaries {
    /// Builds boundaries from explicit log thresholds `log B < 0 < log A`.
    pub fn from_logs(log_lower: f64, log_upper: f64) -> Result<Self> {
        if !(log_lower < 0.0 && log_upper > 0.0) {
            return domain(format!(
                "need log B < 0 < log A, got log B = {log_lower}, log A = {log_upper}"
            ));
        }
        Ok(Self {
            log_upper,
            log_lower,
        })
    }

    /// `log A`
    pub fn log_upper(&self) -> f64 {
        self.log_upper
    }

    /// `log B`
    pub fn log_lower(&self) -> f64 {
        self.log_lower
    }

    /// `A`
    pub fn upper(&self) -> f64 {
        self.log_upper.exp()
    }

    /// `B`
    pub fn lower(&self) -> f64 {
        self.log_lower.exp()
    }
}

/// Wald's boundaries `A = (1 − β)/α`, `B = β/(1 − α)`.
///
/// Strengths above [`WALD_VALIDITY_LIMIT`] are accepted with a logged warning.
pub fn wald_boundaries(strength: TestStrength) -> Result<Boundaries> {
    let (a, b) = (strength.alpha(), strength.beta());
    if a + b >= 1.0 {
        return domain("alpha + beta must be below 1");
    }
    if a >= WALD_VALIDITY_LIMIT || b >= WALD_VALIDITY_LIMIT {
        log::warn!(
            "Wald approximations are unreliable at alpha = {a}, beta = {b} (limit {WALD_VALIDITY_LIMIT})"
        );
    }
    let log_upper = (-b).ln_1p() - a.ln();
    let log_lower = b.ln() - (-a).ln_1p();
    Boundaries::from_logs(log_lower, log_upper)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SprtDecision {
    AcceptH0,
    AcceptH1,
    Truncated,
}

impl SprtDecision {
    pub fn label(self) -> &'static str {
        match self {
            SprtDecision::AcceptH0 => "accept_H0",
            SprtDecision::AcceptH1 => "accept_H1",
            SprtDecision::Truncated => "truncated",
        }
    }
}

impl std::str::FromStr for SprtDecision {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "accept_H0" => Ok(SprtDecision::AcceptH0),
            "accept_H1" => Ok(SprtDecision::AcceptH1),
            "truncated" => Ok(SprtDecision::Truncated),
            other => Err(Error::InvalidArgument(format!(
                "unknown decision '{other}'"
            ))),
        }
    }
}

/// Result of one sequential run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SprtOutcome {
    pub decision: SprtDecision,
    /// Sample number at which the run stopped.
    pub n_stop: u64,
    pub final_llr: f64,
}

/// Runs the SPRT over a stream of per-sample LLR increments.
///
/// Stops at the first `n` with `Λ⁽ⁿ⁾ ≥ log A` or `Λ⁽ⁿ⁾ ≤ log B`. With
/// `n_max = Some(m)` the run is truncated after `m` samples.
pub fn sprt_run<I>(increments: I, bounds: &Boundaries, n_max: Option<u64>) -> Result<SprtOutcome>
where
    I: IntoIterator<Item = f64>,
{
    if n_max == Some(0) {
        return domain("n_max must be at least 1");
    }
    let mut llr = 0.0;
    let mut n = 0u64;
    for inc in increments {
        n += 1;
        llr += inc;
        if llr >= bounds.log_upper {
            return Ok(SprtOutcome {
                decision: SprtDecision::AcceptH1,
                n_stop: n,
                final_llr: llr,
            });
        }
        if llr <= bounds.log_lower {
            return Ok(SprtOutcome {
                decision: SprtDecision::AcceptH0,
                n_stop: n,
                final_llr: llr,
            });
        }
        if Some(n) == n_max {
            return Ok(SprtOutcome {
                decision: SprtDecision::Truncated,
                n_stop: n,
                final_llr: llr,
            });
        }
    }
    Err(Error::StreamExhausted(n))
}

/// Solves Wald's h-equation `∫ (f₁/f₀)^h f_θ dx = 1` for the zero-mean
/// Gaussian variance family, where `theta` is the true variance.
///
/// With `v₀ = σ²_ν`, `v₁ = σ²_ν(1+snr)` and `c = 1/v₀ − 1/v₁` the integral is
/// `(v₀/v₁)^{h/2} (1 − hcθ)^{−1/2}`, so the nonzero root of
/// `g(h) = −h ln(v₁/v₀) − ln(1 − hcθ)` is returned. `g` is convex with
/// `g(0) = 0`; the sign of `g'(0) = cθ − ln(v₁/v₀)` tells which side the
/// other root lies on. At the indifference point the double root `h = 0`
/// is returned.
pub fn h_solve(theta: f64, model: &HypothesisModel) -> Result<f64> {
    if !(theta > 0.0 && theta.is_finite()) {
        return domain(format!("true variance must be positive, got {theta}"));
    }
    let v0 = model.noise_var();
    let v1 = model.h1_var();
    let log_ratio = model.snr().ln_1p();
    let c = 1.0 / v0 - 1.0 / v1;
    let ct = c * theta;
    let g = |h: f64| -h * log_ratio - (-h * ct).ln_1p();
    let slope = ct - log_ratio;
    if slope.abs() <= 1e-12 * log_ratio {
        return Ok(0.0);
    }
    let (mut lo, mut hi) = if slope < 0.0 {
        // root in (0, 1/(cθ)): g < 0 just right of 0, g → +∞ at the pole
        let pole = 1.0 / ct;
        let mut lo = pole * 1e-6;
        while g(lo) >= 0.0 && lo > pole * 1e-300 {
            lo *= 1e-3;
        }
        let mut hi = pole * (1.0 - 1e-6);
        while g(hi) <= 0.0 {
            hi = pole - (pole - hi) * 1e-3;
            if hi >= pole {
                return Err(Error::NoRoot(format!("h-equation at theta = {theta}")));
            }
        }
        (lo, hi)
    } else {
        // root in (−∞, 0): g < 0 just left of 0, g → +∞ as h → −∞
        let mut hi = -1e-6;
        while g(hi) >= 0.0 && hi < -1e-300 {
            hi *= 1e-3;
        }
        let mut lo = -1.0;
        let mut tries = 0;
        while g(lo) <= 0.0 {
            lo *= 2.0;
            tries += 1;
            if tries > 2000 {
                return Err(Error::NoRoot(format!("h-equation at theta = {theta}")));
            }
        }
        (lo, hi)
    };
    if g(lo).signum() == g(hi).signum() {
        return Err(Error::NoRoot(format!("h-equation at theta = {theta}")));
    }
    let increasing = g(hi) > 0.0;
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid == lo || mid == hi {
            break;
        }
        if (g(mid) > 0.0) == increasing {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Wald's operating characteristic `L = (A^h − 1)/(A^h − B^h)`,
/// the probability of accepting H₀.
pub fn oc_value(h: f64, bounds: &Boundaries) -> f64 {
    let la = bounds.log_upper;
    let lb = bounds.log_lower;
    if h.abs() < 1e-12 {
        return la / (la - lb);
    }
    let a = h * la;
    let b = h * lb;
    if h > 0.0 {
        // divide through by A^h
        (-(-a).exp_m1()) / (-(b - a).exp_m1())
    } else {
        // multiply through by B^{−h}
        (-b).exp() * (-a.exp_m1()) / (-(a - b).exp_m1())
    }
}

/// A point on the operating characteristic curve.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OcPoint {
    /// True per-sample variance.
    pub theta: f64,
    pub h: f64,
    pub l: f64,
}

/// Operating characteristic at true variance `theta`.
pub fn oc_point(theta: f64, model: &HypothesisModel, bounds: &Boundaries) -> Result<OcPoint> {
    let h = h_solve(theta, model)?;
    Ok(OcPoint {
        theta,
        h,
        l: oc_value(h, bounds),
    })
}

/// Numerator of Wald's ASN: `L log B + (1 − L) log A`.
pub fn wald_numerator(oc: f64, bounds: &Boundaries) -> f64 {
    oc * bounds.log_lower + (1.0 - oc) * bounds.log_upper
}

/// Wald's ASN approximation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AsnApprox {
    pub asn: f64,
    /// The Wald numerator vanished (θ sits where both boundaries are
    /// equally likely); the value carries no information.
    pub degenerate: bool,
}

/// `E{N | θ} = (L log B + (1 − L) log A) / E{Λ(x) | θ}`.
pub fn asn_approx(oc: f64, bounds: &Boundaries, expected_increment: f64) -> Result<AsnApprox> {
    if expected_increment == 0.0 || !expected_increment.is_finite() {
        return Err(Error::SingularAsn);
    }
    let num = wald_numerator(oc, bounds);
    let scale = bounds.log_upper.abs().max(bounds.log_lower.abs());
    if num.abs() <= 1e-12 * scale {
        return Ok(AsnApprox {
            asn: 0.0,
            degenerate: true,
        });
    }
    Ok(AsnApprox {
        asn: num / expected_increment,
        degenerate: false,
    })
}

/// Operating characteristic at the design point of `hyp`: `h = 1` at θ₀
/// and `h = −1` at θ₁ for any simple-vs-simple SPRT.
pub fn design_oc(hyp: Hypothesis, bounds: &Boundaries) -> f64 {
    match hyp {
        Hypothesis::H0 => oc_value(1.0, bounds),
        Hypothesis::H1 => oc_value(-1.0, bounds),
    }
}

/// Wald ASN at the design point of `hyp` given the per-sample expected LLR.
pub fn wald_asn(hyp: Hypothesis, bounds: &Boundaries, expected_increment: f64) -> Result<f64> {
    let approx = asn_approx(design_oc(hyp, bounds), bounds, expected_increment)?;
    if approx.degenerate || approx.asn <= 0.0 {
        return Err(Error::SingularAsn);
    }
    Ok(approx.asn)
}

/// Relative sample efficiency `N_fixed / ASN`.
pub fn rse(n_fixed: u64, asn: f64) -> f64 {
    n_fixed as f64 / asn
}
