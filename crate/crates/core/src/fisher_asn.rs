//! Low-snr series for the expected Fisher-F LLR and the resulting ASN
//! comparison with the energy detector.
//!
//! Expanding `log(1 + snr/(1+x))` in powers of `snr` turns `E{Λ⁽ᴺ⁾}` into a
//! sum of inverse moments `E{(1+x)^{−m}}`. Under H₀ those are Beta means in
//! closed form. Under H₁ the density of `x` is expanded once more in `snr`,
//! and every coefficient reduces to
//!
//! ```text
//! A_m(N, b) = ∫₀^∞ e^{−(N+m−b)y} (e^y − 1)^{N/2−b} dy
//!           = Γ(N/2 − b + 1) Γ(N/2 + m) / Γ(N + m − b + 1).
//! ```
//!
//! Gamma ratios are evaluated in log space; the direct products overflow
//! past `N ≈ 170`. The identities hold for any real `N`, so odd `N` needs no
//! special case.

use crate::brownian::chi2_bm_params;
use crate::distributions::special::{ln_gamma, ln_gamma_ratio, log1pmx};
use crate::distributions::TestStrength;
use crate::error::{domain, Result};
use crate::sequential::{design_oc, wald_asn, wald_boundaries, wald_numerator};
use crate::Hypothesis;

/// Above this snr the truncated series is no longer trusted.
pub const SERIES_SNR_LIMIT: f64 = 0.1;

/// Truncation orders: `outer` powers of snr in the LLR expansion, `inner`
/// terms in the H₁ density expansion.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SeriesOrder {
    outer: u32,
    inner: u32,
}

impl SeriesOrder {
    pub fn new(outer: u32, inner: u32) -> Result<Self> {
        if outer == 0 {
            return domain("outer series order must be at least 1");
        }
        Ok(Self { outer, inner })
    }

    pub fn outer(&self) -> u32 {
        self.outer
    }

    pub fn inner(&self) -> u32 {
        self.inner
    }
}

impl Default for SeriesOrder {
    fn default() -> Self {
        Self { outer: 6, inner: 6 }
    }
}

/// A truncated-series value with the magnitude of its last retained term.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SeriesValue {
    pub value: f64,
    pub residual: f64,
    /// False when snr exceeds [`SERIES_SNR_LIMIT`].
    pub within_validity: bool,
}

fn check_snr(snr: f64) -> Result<bool> {
    if !(snr >= 0.0 && snr.is_finite()) {
        return domain(format!("snr must be nonnegative, got {snr}"));
    }
    let ok = snr <= SERIES_SNR_LIMIT;
    if !ok {
        log::warn!("snr = {snr} is outside the series validity domain (<= {SERIES_SNR_LIMIT})");
    }
    Ok(ok)
}

/// `ln(A_m(N, b) Γ(N)/Γ(N/2)²)`: the Beta-normalised coefficient, which is
/// what the inverse-moment series consumes.
fn ln_a_normalised(m: u32, n: u64, b: i64) -> Result<f64> {
    let half = 0.5 * n as f64;
    let g1 = half - b as f64 + 1.0;
    let g3 = n as f64 + m as f64 - b as f64 + 1.0;
    if m == 0 || n == 0 {
        return domain("a_integral needs m >= 1 and N >= 1");
    }
    if g1 <= 0.0 || g3 <= 0.0 {
        return domain(format!(
            "a_integral: Gamma pole at N = {n}, m = {m}, b = {b}"
        ));
    }
    // split against Γ(N/2) and Γ(N) so large N does not cancel digits
    Ok(
        ln_gamma_ratio(g1, half) + ln_gamma_ratio(half + m as f64, half)
            - ln_gamma_ratio(g3, n as f64),
    )
}

/// `lnΓ(N/2)² − lnΓ(N)`, the log of the reciprocal Beta(N/2, N/2) normaliser.
fn ln_norm(n: u64) -> f64 {
    let nf = n as f64;
    2.0 * ln_gamma(0.5 * nf) - ln_gamma(nf)
}

/// `A_m(N, b)` in closed Gamma form.
pub fn a_integral(m: u32, n: u64, b: i64) -> Result<f64> {
    Ok((ln_a_normalised(m, n, b)? + ln_norm(n)).exp())
}

/// `E₀{(1+x)^{−m}} = Γ(N)Γ(N/2+m) / (Γ(N/2)Γ(N+m))` for `x ∼ F(N, N)`.
pub fn e0_inverse_moment(m: u32, n: u64) -> Result<f64> {
    if n == 0 {
        return domain("N must be at least 1");
    }
    if m == 0 {
        return Ok(1.0);
    }
    let nf = n as f64;
    let mf = m as f64;
    Ok((ln_gamma_ratio(0.5 * nf + mf, 0.5 * nf) - ln_gamma_ratio(nf + mf, nf)).exp())
}

/// Signed terms `k = 0..=K` of the H₁ inverse-moment series.
fn e1_terms(m: u32, n: u64, snr: f64, inner: u32) -> Result<Vec<f64>> {
    let mf = m as f64;
    let mut terms = Vec::with_capacity(inner as usize + 1);
    for k in 0..=inner {
        let kf = k as f64;
        let la = ln_a_normalised(m, n, 1 - k as i64)?;
        let lpow = if k == 0 { 0.0 } else { kf * snr.ln() };
        let mag = (la + ln_gamma_ratio(mf + kf, mf) - ln_gamma_ratio(kf + 1.0, 1.0) + lpow).exp();
        terms.push(if k % 2 == 0 { mag } else { -mag });
    }
    Ok(terms)
}

/// `E₁{(1+x)^{−m}}` where `x` is `(1+snr)` times an `F(N, N)` variate,
/// truncated after `order.inner()` terms.
pub fn e1_inverse_moment(m: u32, n: u64, snr: f64, order: SeriesOrder) -> Result<SeriesValue> {
    let within_validity = check_snr(snr)?;
    if m == 0 {
        return Ok(SeriesValue {
            value: 1.0,
            residual: 0.0,
            within_validity,
        });
    }
    if n == 0 {
        return domain("N must be at least 1");
    }
    if snr == 0.0 {
        return Ok(SeriesValue {
            value: e0_inverse_moment(m, n)?,
            residual: 0.0,
            within_validity,
        });
    }
    let terms = e1_terms(m, n, snr, order.inner)?;
    // the k = 0 term is the H₀ moment; use the exact value
    let value = e0_inverse_moment(m, n)? + terms[1..].iter().sum::<f64>();
    Ok(SeriesValue {
        value,
        residual: terms.last().map_or(0.0, |t| t.abs()),
        within_validity,
    })
}

/// `E{Λ⁽ᴺ⁾}` under `hyp` from the truncated double series.
pub fn expected_fisher_llr(
    n: u64,
    snr: f64,
    hyp: Hypothesis,
    order: SeriesOrder,
) -> Result<SeriesValue> {
    let within_validity = check_snr(snr)?;
    if n == 0 {
        return domain("N must be at least 1");
    }
    if snr == 0.0 {
        return Ok(SeriesValue {
            value: 0.0,
            residual: 0.0,
            within_validity,
        });
    }
    let nf = n as f64;
    // (N/2)log(1+s) plus the m = 1, k = 0 term −N s/2 is (N/2)log1pmx(s)
    let mut sum = 0.5 * log1pmx(snr);
    let mut last_outer = 0.0;
    let mut inner_res = 0.0;
    for m in 1..=order.outer {
        let coef = if m % 2 == 0 { 1.0 } else { -1.0 } * snr.powi(m as i32) / m as f64;
        let e0 = e0_inverse_moment(m, n)?;
        let correction = match hyp {
            Hypothesis::H0 => 0.0,
            Hypothesis::H1 => {
                let terms = e1_terms(m, n, snr, order.inner)?;
                inner_res += coef.abs() * terms.last().map_or(0.0, |t| t.abs());
                terms[1..].iter().sum()
            }
        };
        // for m = 1 the H₀ part (exactly ½) is already folded into log1pmx
        let folded = if m == 1 { 0.0 } else { e0 };
        sum += coef * (folded + correction);
        last_outer = coef * (e0 + correction);
    }
    Ok(SeriesValue {
        value: nf * sum,
        residual: nf * (last_outer.abs() + inner_res),
        within_validity,
    })
}

/// Wald ASN of the Fisher-F SPRT, counted in in-phase/quadrature pairs.
///
/// The expected LLR per pair is `E{Λ⁽¹⁾}` from the series; the residual is
/// propagated to first order.
pub fn fisher_asn(
    strength: TestStrength,
    snr: f64,
    hyp: Hypothesis,
    order: SeriesOrder,
) -> Result<SeriesValue> {
    if snr.is_nan() || snr <= 0.0 {
        return domain(format!("snr must be positive, got {snr}"));
    }
    let bounds = wald_boundaries(strength)?;
    let drift = expected_fisher_llr(1, snr, hyp, order)?;
    let asn = wald_asn(hyp, &bounds, drift.value)?;
    Ok(SeriesValue {
        value: asn,
        residual: asn * drift.residual / drift.value.abs(),
        within_validity: drift.within_validity,
    })
}

/// Wald ASN of the energy detector at the design point of `hyp`.
pub fn chi2_asn(strength: TestStrength, snr: f64, hyp: Hypothesis) -> Result<f64> {
    let bounds = wald_boundaries(strength)?;
    wald_asn(hyp, &bounds, chi2_bm_params(snr, hyp)?.mu)
}

/// Wald numerator `L log B + (1 − L) log A` at the design point of `hyp`.
pub fn design_numerator(strength: TestStrength, hyp: Hypothesis) -> Result<f64> {
    let bounds = wald_boundaries(strength)?;
    Ok(wald_numerator(design_oc(hyp, &bounds), &bounds))
}

/// One row of the Fisher-vs-energy ASN comparison.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AsnComparison {
    pub snr: f64,
    pub asn_chi2: f64,
    pub asn_fisher: f64,
    pub ratio: f64,
    pub residual_estimate: f64,
}

/// ASN of both sequential tests over an snr grid.
pub fn asn_ratio_curve(
    strength: TestStrength,
    snr_grid: &[f64],
    hyp: Hypothesis,
    order: SeriesOrder,
) -> Result<Vec<AsnComparison>> {
    if snr_grid.is_empty() {
        return domain("snr grid is empty");
    }
    snr_grid
        .iter()
        .map(|&snr| {
            let asn_chi2 = chi2_asn(strength, snr, hyp)?;
            let f = fisher_asn(strength, snr, hyp, order)?;
            Ok(AsnComparison {
                snr,
                asn_chi2,
                asn_fisher: f.value,
                ratio: f.value / asn_chi2,
                residual_estimate: f.residual,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rel(a: f64, b: f64) -> f64 {
        (a / b - 1.0).abs()
    }

    #[test]
    fn a_integral_examples() {
        assert!(rel(a_integral(3, 8, 4).unwrap(), 1.0 / 7.0) < 1e-14);
        assert!(rel(a_integral(1, 4, 1).unwrap(), 1.0 / 12.0) < 1e-14);
        for (n, m) in [(4u64, 1u32), (10, 2), (64, 5), (400, 3)] {
            let got = a_integral(m, n, n as i64 / 2).unwrap();
            assert!(rel(got, 2.0 / (n as f64 + 2.0 * m as f64)) < 1e-12);
        }
    }

    #[test]
    fn a_integral_recursion() {
        for n in [4u64, 7, 16, 33, 64, 300] {
            for m in 1..=5u32 {
                for b in -6i64..=(n as i64 / 2) {
                    let nf = n as f64;
                    let coef = (nf + m as f64 - b as f64 + 1.0) / (0.5 * nf - b as f64 + 1.0);
                    let lhs = a_integral(m, n, b).unwrap();
                    let rhs = coef * a_integral(m, n, b - 1).unwrap();
                    assert!(rel(lhs, rhs) < 1e-12, "n={n} m={m} b={b}");
                }
            }
        }
    }

    #[test]
    fn a_integral_pole() {
        assert!(a_integral(1, 4, 3).is_err());
        assert!(a_integral(0, 4, 1).is_err());
    }

    #[test]
    fn e0_examples() {
        for n in [1u64, 2, 5, 64, 1000] {
            assert!(rel(e0_inverse_moment(1, n).unwrap(), 0.5) < 1e-13);
            assert_eq!(e0_inverse_moment(0, n).unwrap(), 1.0);
        }
        assert!(rel(e0_inverse_moment(2, 4).unwrap(), 0.3) < 1e-14);
    }

    #[test]
    fn e1_reduces_to_e0() {
        let o = SeriesOrder::default();
        for m in 1..=5 {
            for n in [2u64, 8, 31] {
                let e0 = e0_inverse_moment(m, n).unwrap();
                assert_eq!(e1_inverse_moment(m, n, 0.0, o).unwrap().value, e0);
                assert!(rel(e1_inverse_moment(m, n, 1e-14, o).unwrap().value, e0) < 1e-12);
            }
        }
    }

    #[test]
    fn expected_llr_signs_and_limits() {
        let o = SeriesOrder::default();
        for n in [1u64, 4, 16, 64] {
            for s in [1e-4, 1e-2, 0.1] {
                assert!(expected_fisher_llr(n, s, Hypothesis::H0, o).unwrap().value < 0.0);
                assert!(expected_fisher_llr(n, s, Hypothesis::H1, o).unwrap().value > 0.0);
            }
            assert_eq!(
                expected_fisher_llr(n, 0.0, Hypothesis::H1, o)
                    .unwrap()
                    .value,
                0.0
            );
        }
    }

    #[test]
    fn per_pair_drift_small_snr() {
        let o = SeriesOrder::default();
        let s = 1e-3;
        let d0 = expected_fisher_llr(1, s, Hypothesis::H0, o).unwrap().value;
        let d1 = expected_fisher_llr(1, s, Hypothesis::H1, o).unwrap().value;
        assert!(rel(d0, -s * s / 16.0) < 5e-3);
        assert!(rel(d1, s * s / 16.0) < 5e-3);
    }

    #[test]
    fn nonlinear_in_n() {
        let o = SeriesOrder::default();
        let per = |n: u64| {
            expected_fisher_llr(n, 0.01, Hypothesis::H1, o)
                .unwrap()
                .value
                / n as f64
        };
        assert!(rel(per(4), per(64)) > 0.01);
    }

    #[test]
    fn asn_monotone_and_ratio() {
        let st = TestStrength::new(0.02, 0.02).unwrap();
        let o = SeriesOrder::default();
        let mut prev = f64::INFINITY;
        for s in [1e-4, 1e-3, 1e-2, 0.05, 0.1] {
            let a = fisher_asn(st, s, Hypothesis::H1, o).unwrap().value;
            assert!(a < prev);
            prev = a;
        }
        let curve = asn_ratio_curve(st, &[1e-4, 1e-3], Hypothesis::H1, o).unwrap();
        for row in curve {
            assert!((row.ratio - 4.0).abs() < 0.05, "{row:?}");
        }
    }

    #[test]
    fn validity_flag() {
        let o = SeriesOrder::default();
        assert!(
            !expected_fisher_llr(4, 0.5, Hypothesis::H1, o)
                .unwrap()
                .within_validity
        );
        assert!(
            expected_fisher_llr(4, 0.05, Hypothesis::H1, o)
                .unwrap()
                .within_validity
        );
        assert!(SeriesOrder::new(0, 3).is_err());
    }
}
