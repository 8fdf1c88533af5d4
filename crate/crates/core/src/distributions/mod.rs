//! Scaled χ² and equal-df Fisher-F distributions, and the fixed-sample-size
//! requirement built on them.
//!
//! Both families are scale families: if `F₀` is the CDF under the null scale
//! and the alternative scale is `(1 + snr)` times larger, then
//! `F₁(τ) = F₀(τ / (1 + snr))`. The sample-size search only ever evaluates
//! the unit-scale CDF.

pub mod special;

use crate::error::{domain, Error, Result};
use special::Tail;

/// Hard cap on the fixed-sample-size search.
pub const DEFAULT_SAMPLE_CAP: u64 = 100_000_000;

/// Common interface of the two test-statistic distributions.
pub trait StatisticDistribution {
    fn pdf(&self, x: f64) -> Result<f64>;
    /// Lower tail `P(X ≤ x)`.
    fn cdf(&self, x: f64) -> Result<f64>;
    /// Upper tail `P(X > x)`, computed directly rather than as `1 − cdf`.
    fn sf(&self, x: f64) -> Result<f64>;
    /// Inverse of [`cdf`](Self::cdf).
    fn quantile(&self, p: f64) -> Result<f64>;
    /// Inverse of [`sf`](Self::sf): the `x` with `P(X > x) = q`.
    fn upper_quantile(&self, q: f64) -> Result<f64>;
}

fn check_prob(p: f64) -> Result<()> {
    if p > 0.0 && p < 1.0 {
        Ok(())
    } else {
        domain(format!("probability {p} outside (0, 1)"))
    }
}

fn check_x(x: f64) -> Result<()> {
    if x >= 0.0 {
        Ok(())
    } else {
        domain(format!("negative argument {x}"))
    }
}

fn check_params(df: u64, scale: f64) -> Result<()> {
    if df == 0 {
        return domain("degrees of freedom must be at least 1");
    }
    if !(scale > 0.0 && scale.is_finite()) {
        return domain(format!("scale must be positive, got {scale}"));
    }
    Ok(())
}

/// `σ² χ²_N`: the energy of `N` i.i.d. `N(0, σ²)` samples.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScaledChi2 {
    df: u64,
    scale: f64,
}

impl ScaledChi2 {
    pub fn new(df: u64, scale: f64) -> Result<Self> {
        check_params(df, scale)?;
        Ok(Self { df, scale })
    }

    pub fn df(&self) -> u64 {
        self.df
    }

    pub fn scale(&self) -> f64 {
        self.scale
    }

    /// `N σ²`
    pub fn mean(&self) -> f64 {
        self.df as f64 * self.scale
    }

    /// `2N (σ²)²`
    pub fn variance(&self) -> f64 {
        2.0 * self.df as f64 * self.scale * self.scale
    }

    fn shape(&self) -> f64 {
        0.5 * self.df as f64
    }

    /// The unit-scale Gamma variate is `x / (2σ²)`.
    fn standardize(&self, x: f64) -> f64 {
        x / (2.0 * self.scale)
    }

    fn solve(&self, target: f64, tail: Tail) -> f64 {
        let a = self.shape();
        let df = self.df as f64;
        // Wilson–Hilferty starting point
        let z = special::normal_quantile(match tail {
            Tail::Lower => target,
            Tail::Upper => 1.0 - target,
        });
        let c = 2.0 / (9.0 * df);
        let wh = df * (1.0 - c + z * c.sqrt()).powi(3);
        let guess = if wh > 0.0 { 0.5 * wh } else { 0.5 * a };
        let y = special::invert_cdf(
            target,
            tail,
            |y| special::gamma_inc(a, y),
            |y| special::gamma_density(a, y),
            guess,
            0.0,
            f64::INFINITY,
        );
        2.0 * self.scale * y
    }
}

impl StatisticDistribution for ScaledChi2 {
    fn pdf(&self, x: f64) -> Result<f64> {
        check_x(x)?;
        Ok(special::gamma_density(self.shape(), self.standardize(x)) / (2.0 * self.scale))
    }

    fn cdf(&self, x: f64) -> Result<f64> {
        check_x(x)?;
        Ok(special::gamma_inc(self.shape(), self.standardize(x)).0)
    }

    fn sf(&self, x: f64) -> Result<f64> {
        check_x(x)?;
        Ok(special::gamma_inc(self.shape(), self.standardize(x)).1)
    }

    fn quantile(&self, p: f64) -> Result<f64> {
        check_prob(p)?;
        if p > 0.5 {
            return Ok(self.solve(1.0 - p, Tail::Upper));
        }
        Ok(self.solve(p, Tail::Lower))
    }

    fn upper_quantile(&self, q: f64) -> Result<f64> {
        check_prob(q)?;
        if q > 0.5 {
            return Ok(self.solve(1.0 - q, Tail::Lower));
        }
        Ok(self.solve(q, Tail::Upper))
    }
}

/// `σ² F(N, N)`: ratio of two independent `χ²_N` energies with scale ratio `σ²`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScaledFisherF {
    df: u64,
    scale: f64,
}

impl ScaledFisherF {
    pub fn new(df: u64, scale: f64) -> Result<Self> {
        check_params(df, scale)?;
        Ok(Self { df, scale })
    }

    pub fn df(&self) -> u64 {
        self.df
    }

    pub fn scale(&self) -> f64 {
        self.scale
    }

    fn half_df(&self) -> f64 {
        0.5 * self.df as f64
    }

    /// Maps `x` to `(u, 1 − u)` with `u = t / (1 + t)`, `t = x / σ²`;
    /// `u` is Beta(N/2, N/2) distributed under unit scale.
    fn to_beta(self, x: f64) -> (f64, f64) {
        let t = x / self.scale;
        if t.is_infinite() {
            return (1.0, 0.0);
        }
        (t / (1.0 + t), 1.0 / (1.0 + t))
    }

    fn solve(&self, target: f64, tail: Tail) -> f64 {
        // Beta(a, a) is symmetric, so the upper tail in u is the lower tail
        // in 1 − u; solving for the small variable keeps full resolution
        let a = self.half_df();
        let z = special::normal_quantile(target);
        let guess = (0.5 + 0.5 * z / (self.df as f64 + 1.0).sqrt()).clamp(1e-12, 0.5);
        let w = special::invert_cdf(
            target,
            Tail::Lower,
            |w| special::beta_inc(a, a, w, 1.0 - w),
            |w| special::beta_density(a, a, w, 1.0 - w),
            guess,
            0.0,
            1.0,
        );
        match tail {
            Tail::Lower => self.scale * w / (1.0 - w),
            Tail::Upper => self.scale * (1.0 - w) / w,
        }
    }
}

impl StatisticDistribution for ScaledFisherF {
    fn pdf(&self, x: f64) -> Result<f64> {
        check_x(x)?;
        let a = self.half_df();
        let (u, v) = self.to_beta(x);
        if v == 0.0 {
            return Ok(0.0);
        }
        // du/dx = (1 − u)² / σ²
        Ok(special::beta_density(a, a, u, v) * v * v / self.scale)
    }

    fn cdf(&self, x: f64) -> Result<f64> {
        check_x(x)?;
        let a = self.half_df();
        let (u, v) = self.to_beta(x);
        Ok(special::beta_inc(a, a, u, v).0)
    }

    fn sf(&self, x: f64) -> Result<f64> {
        check_x(x)?;
        let a = self.half_df();
        let (u, v) = self.to_beta(x);
        Ok(special::beta_inc(a, a, u, v).1)
    }

    fn quantile(&self, p: f64) -> Result<f64> {
        check_prob(p)?;
        if p > 0.5 {
            return Ok(self.solve(1.0 - p, Tail::Upper));
        }
        Ok(self.solve(p, Tail::Lower))
    }

    fn upper_quantile(&self, q: f64) -> Result<f64> {
        check_prob(q)?;
        if q > 0.5 {
            return Ok(self.solve(1.0 - q, Tail::Lower));
        }
        Ok(self.solve(q, Tail::Upper))
    }
}

/// Which fixed-size detector a computation refers to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Family {
    /// Energy detector; statistic `σ²_ν χ²_N` under H₀.
    Chi2,
    /// In-phase/quadrature energy ratio; statistic `F(N, N)` under H₀.
    Fisher,
}

impl Family {
    /// Null distribution of the statistic at unit scale.
    pub fn null_distribution(self, n: u64) -> Result<Box<dyn StatisticDistribution>> {
        Ok(match self {
            Family::Chi2 => Box::new(ScaledChi2::new(n, 1.0)?),
            Family::Fisher => Box::new(ScaledFisherF::new(n, 1.0)?),
        })
    }

    pub fn name(self) -> &'static str {
        match self {
            Family::Chi2 => "chi2",
            Family::Fisher => "fisher",
        }
    }
}

impl std::str::FromStr for Family {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "chi2" | "energy" => Ok(Family::Chi2),
            "fisher" | "f" => Ok(Family::Fisher),
            other => Err(Error::InvalidArgument(format!("unknown family '{other}'"))),
        }
    }
}

/// Target error pair `(P_fa, P_mis) = (α, β)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TestStrength {
    alpha: f64,
    beta: f64,
}

impl TestStrength {
    pub fn new(alpha: f64, beta: f64) -> Result<Self> {
        if !(alpha > 0.0 && alpha < 1.0) {
            return domain(format!("alpha = {alpha} outside (0, 1)"));
        }
        if !(beta > 0.0 && beta < 1.0) {
            return domain(format!("beta = {beta} outside (0, 1)"));
        }
        if alpha + beta >= 1.0 {
            return domain(format!("alpha + beta = {} must be below 1", alpha + beta));
        }
        Ok(Self { alpha, beta })
    }

    /// Probability of false alarm.
    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    /// Probability of miss.
    pub fn beta(&self) -> f64 {
        self.beta
    }
}

/// Miss probability of the size-`α` upper-tail test with `n` samples.
pub fn miss_probability(strength: TestStrength, snr: f64, family: Family, n: u64) -> Result<f64> {
    let null = family.null_distribution(n)?;
    let tau = null.upper_quantile(strength.alpha())?;
    null.cdf(tau / (1.0 + snr))
}

/// Smallest `N` whose size-`α` test reaches a miss probability of at most `β`.
pub fn required_sample_size(strength: TestStrength, snr: f64, family: Family) -> Result<u64> {
    required_sample_size_capped(strength, snr, family, DEFAULT_SAMPLE_CAP)
}

/// [`required_sample_size`] with an explicit search cap.
pub fn required_sample_size_capped(
    strength: TestStrength,
    snr: f64,
    family: Family,
    cap: u64,
) -> Result<u64> {
    if !(snr > 0.0 && snr.is_finite()) {
        return domain(format!("snr must be positive, got {snr}"));
    }
    let meets = |n: u64| -> Result<bool> {
        Ok(miss_probability(strength, snr, family, n)? <= strength.beta())
    };
    // gallop to a feasible N, then bisect on (lo, hi]
    let mut hi = 1u64;
    while !meets(hi)? {
        if hi >= cap {
            return Err(Error::Infeasible { cap });
        }
        hi = (hi * 2).min(cap);
    }
    let mut lo = hi / 2;
    if hi == 1 {
        return Ok(1);
    }
    while hi - lo > 1 {
        let mid = lo + (hi - lo) / 2;
        if meets(mid)? {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(hi)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    #[test]
    fn chi2_pdf_closed_forms() {
        let d = ScaledChi2::new(2, 1.0).unwrap();
        assert!(close(d.pdf(0.0).unwrap(), 0.5, 1e-15));
        assert!(close(d.pdf(2.0).unwrap(), (-1.0f64).exp() / 2.0, 1e-15));
    }

    #[test]
    fn chi2_exponential_cdf() {
        let d = ScaledChi2::new(2, 1.0).unwrap();
        let x = 2.0 * std::f64::consts::LN_2;
        assert!(close(d.cdf(x).unwrap(), 0.5, 1e-15));
        assert!(close(d.cdf(3.0).unwrap(), 1.0 - (-1.5f64).exp(), 1e-15));
    }

    #[test]
    fn chi2_quantile_round_trip() {
        let d = ScaledChi2::new(6, 1.0).unwrap();
        let x = d.quantile(0.3).unwrap();
        assert!(close(d.cdf(x).unwrap(), 0.3, 1e-12));
        let x = d.upper_quantile(1e-6).unwrap();
        assert!(close(d.sf(x).unwrap() / 1e-6, 1.0, 1e-10));
    }

    #[test]
    fn scale_relation_spot_check() {
        let snr = 1.0;
        let f0 = ScaledChi2::new(8, 1.0).unwrap();
        let f1 = ScaledChi2::new(8, 1.0 + snr).unwrap();
        assert!(close(
            f1.cdf(3.0).unwrap(),
            f0.cdf(3.0 / (1.0 + snr)).unwrap(),
            1e-15
        ));
    }

    #[test]
    fn fisher_pdf_closed_forms() {
        let d = ScaledFisherF::new(2, 1.0).unwrap();
        assert!(close(d.pdf(0.0).unwrap(), 1.0, 1e-15));
        assert!(close(d.pdf(1.0).unwrap(), 0.25, 1e-15));
        assert!(close(d.pdf(3.0).unwrap(), 1.0 / 16.0, 1e-15));
    }

    #[test]
    fn fisher_median_is_one() {
        for n in [1u64, 2, 3, 10, 64, 1001, 1_000_000] {
            let d = ScaledFisherF::new(n, 1.0).unwrap();
            assert!(close(d.cdf(1.0).unwrap(), 0.5, 1e-12), "n={n}");
            assert!(close(d.quantile(0.5).unwrap(), 1.0, 1e-9), "n={n}");
        }
    }

    #[test]
    fn domain_errors() {
        assert!(ScaledChi2::new(0, 1.0).is_err());
        assert!(ScaledChi2::new(3, 0.0).is_err());
        assert!(ScaledFisherF::new(3, -1.0).is_err());
        let d = ScaledChi2::new(3, 1.0).unwrap();
        assert!(d.pdf(-1.0).is_err());
        assert!(d.quantile(0.0).is_err());
        assert!(d.quantile(1.0).is_err());
        assert!(TestStrength::new(0.6, 0.5).is_err());
        assert!(TestStrength::new(0.0, 0.1).is_err());
    }

    #[test]
    fn required_size_frozen_value() {
        // high-precision bisection over N (40-digit arithmetic)
        let s = TestStrength::new(0.02, 0.02).unwrap();
        assert_eq!(required_sample_size(s, 1.0, Family::Chi2).unwrap(), 72);
        assert_eq!(required_sample_size(s, 1.0, Family::Fisher).unwrap(), 142);
    }

    #[test]
    fn required_size_huge_snr_is_one() {
        let s = TestStrength::new(0.02, 0.02).unwrap();
        assert_eq!(required_sample_size(s, 1e6, Family::Chi2).unwrap(), 1);
    }

    #[test]
    fn required_size_monotone_in_snr() {
        let s = TestStrength::new(0.02, 0.02).unwrap();
        let lo = required_sample_size(s, 0.5, Family::Chi2).unwrap();
        let hi = required_sample_size(s, 1.0, Family::Chi2).unwrap();
        assert!(lo >= hi);
    }

    #[test]
    fn required_size_cap() {
        let s = TestStrength::new(0.02, 0.02).unwrap();
        let err = required_sample_size_capped(s, 0.01, Family::Chi2, 1000).unwrap_err();
        assert_eq!(err, Error::Infeasible { cap: 1000 });
    }
}
