//! Shared test oracles: double-exponential quadrature and small helpers.
#![allow(dead_code)]

use std::f64::consts::FRAC_PI_2;

fn de_sum<F, M>(f: F, map: M, t_max: f64) -> f64
where
    F: Fn(f64) -> f64,
    M: Fn(f64) -> Option<(f64, f64)>,
{
    let mut prev = f64::NAN;
    for level in 0..12 {
        let h = 0.5f64.powi(level);
        let n = (t_max / h).ceil() as i64;
        let mut s = 0.0;
        for k in -n..=n {
            if let Some((x, w)) = map(k as f64 * h) {
                let v = f(x) * w;
                if v.is_finite() {
                    s += v;
                }
            }
        }
        s *= h;
        if level >= 4 && (s - prev).abs() <= 1e-15 * s.abs() {
            return s;
        }
        prev = s;
    }
    prev
}

/// `∫_a^b f` by tanh-sinh.
pub fn tanh_sinh<F: Fn(f64) -> f64>(f: F, a: f64, b: f64) -> f64 {
    let c = 0.5 * (a + b);
    let d = 0.5 * (b - a);
    de_sum(
        f,
        |t| {
            let u = FRAC_PI_2 * t.sinh();
            let x = c + d * u.tanh();
            if x <= a || x >= b {
                return None;
            }
            let ch = u.cosh();
            Some((x, d * FRAC_PI_2 * t.cosh() / (ch * ch)))
        },
        3.2,
    )
}

/// `∫_a^∞ f` by exp-sinh.
pub fn exp_sinh<F: Fn(f64) -> f64>(f: F, a: f64) -> f64 {
    de_sum(
        f,
        |t| {
            let e = (FRAC_PI_2 * t.sinh()).exp();
            if e == 0.0 || !e.is_finite() {
                return None;
            }
            Some((a + e, FRAC_PI_2 * t.cosh() * e))
        },
        4.5,
    )
}

pub fn rel_err(got: f64, want: f64) -> f64 {
    ((got - want) / want).abs()
}

pub fn mean_var(x: &[f64]) -> (f64, f64) {
    let n = x.len() as f64;
    let m = x.iter().sum::<f64>() / n;
    let v = x.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / (n - 1.0);
    (m, v)
}

/// Lag-`k` sample autocorrelation.
pub fn autocorr(x: &[f64], k: usize) -> f64 {
    let (m, v) = mean_var(x);
    let n = x.len();
    let c: f64 = (0..n - k).map(|i| (x[i] - m) * (x[i + k] - m)).sum::<f64>() / n as f64;
    c / v
}

/// F(N, N) density written out from the Beta normaliser with statrs's lnΓ.
pub fn f_density(n: f64, x: f64) -> f64 {
    use statrs::function::gamma::ln_gamma;
    let h = 0.5 * n;
    let ln_b = 2.0 * ln_gamma(h) - ln_gamma(n);
    ((h - 1.0) * x.ln() - n * (1.0 + x).ln() - ln_b).exp()
}
