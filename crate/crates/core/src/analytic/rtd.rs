//! CDF of accumulated SNR under repetition combining: the sum of `n`
//! exponential gains with rate `lambda_1` and `m` with rate `lambda_2`
//! (a two-rate hypoexponential law).

use statrs::function::gamma::gamma_lr;

use crate::error::{Error, Result};

/// Partial-fraction coefficients of
/// `(1 + y/l1)^-n (1 + y/l2)^-m = sum_k a_k (1 + y/l1)^-k + sum_k b_k (1 + y/l2)^-k`.
///
/// Only defined for distinct rates.
#[derive(Debug, Clone, PartialEq)]
pub struct PartialFractionExpansion {
    pub n: u32,
    pub m: u32,
    pub lambdas: (f64, f64),
    /// `a[k-1]` multiplies `(1 + y/l1)^-k`.
    pub a: Vec<f64>,
    /// `b[k-1]` multiplies `(1 + y/l2)^-k`.
    pub b: Vec<f64>,
}

impl PartialFractionExpansion {
    pub fn new(n: u32, m: u32, lambdas: (f64, f64)) -> Result<Self> {
        let (l1, l2) = lambdas;
        if !(l1 > 0.0 && l2 > 0.0) {
            return Err(Error::contract("fading parameters must be positive"));
        }
        if l1 == l2 {
            return Err(Error::contract(
                "partial fractions need distinct fading parameters; use the Erlang form",
            ));
        }
        let r = l1 / l2;
        let a = (1..=n)
            .map(|k| {
                (-r).powi((n - k) as i32)
                    * binomial(n + m - k - 1, n - k)
                    * (1.0 - r).powi(-((n + m - k) as i32))
            })
            .collect();
        let q = l2 / l1;
        let b = (1..=m)
            .map(|k| {
                (-q).powi((m - k) as i32)
                    * binomial(n + m - k - 1, m - k)
                    * (1.0 - q).powi(-((n + m - k) as i32))
            })
            .collect();
        Ok(Self { n, m, lambdas, a, b })
    }

    /// Right-hand side re-summed at `y` (`y = P s` in transform terms).
    pub fn reconstruct(&self, y: f64) -> f64 {
        let (l1, l2) = self.lambdas;
        let t1 = 1.0 / (1.0 + y / l1);
        let t2 = 1.0 / (1.0 + y / l2);
        let sa: f64 = self.a.iter().enumerate().map(|(i, a)| a * t1.powi(i as i32 + 1)).sum();
        let sb: f64 = self.b.iter().enumerate().map(|(i, b)| b * t2.powi(i as i32 + 1)).sum();
        sa + sb
    }

    /// Left-hand side at `y`.
    pub fn product(&self, y: f64) -> f64 {
        let (l1, l2) = self.lambdas;
        (1.0 + y / l1).powi(-(self.n as i32)) * (1.0 + y / l2).powi(-(self.m as i32))
    }

    /// `Pr(S < z)` for the gain sum `S`: each `(1 + y/l)^-k` term inverts to
    /// an Erlang(k, l) law, so the CDF is the same combination of
    /// regularized lower incomplete gammas `P(k, l z)`.
    pub fn cdf(&self, z: f64) -> f64 {
        if z <= 0.0 {
            return 0.0;
        }
        let (l1, l2) = self.lambdas;
        let sa: f64 = self
            .a
            .iter()
            .enumerate()
            .map(|(i, a)| a * gamma_lr(i as f64 + 1.0, l1 * z))
            .sum();
        let sb: f64 = self
            .b
            .iter()
            .enumerate()
            .map(|(i, b)| b * gamma_lr(i as f64 + 1.0, l2 * z))
            .sum();
        (sa + sb).clamp(0.0, 1.0)
    }
}

fn binomial(n: u32, k: u32) -> f64 {
    let k = k.min(n - k);
    (0..k).fold(1.0, |acc, i| acc * f64::from(n - i) / f64::from(i + 1))
}

/// `Pr(Gamma(k, rate) < z)`.
pub fn erlang_cdf(k: u32, rate: f64, z: f64) -> f64 {
    if k == 0 {
        return if z > 0.0 { 1.0 } else { 0.0 };
    }
    if z <= 0.0 {
        return 0.0;
    }
    gamma_lr(f64::from(k), rate * z)
}

/// Below this spread of rates (`1 - l_min / l_max`) the partial-fraction
/// coefficients lose too many digits to cancellation and the negative
/// binomial mixture converges quickly instead.
const PARTIAL_FRACTION_MIN_SPREAD: f64 = 0.5;

/// `Pr(S < z)` where `S` is the sum of `n` Exp(`l1`) and `m` Exp(`l2`) gains.
pub fn hypoexponential_cdf(n: u32, m: u32, lambdas: (f64, f64), z: f64) -> Result<f64> {
    let (l1, l2) = lambdas;
    if n + m == 0 {
        return Err(Error::contract("at least one exponential term is required"));
    }
    if !(l1 > 0.0 && l2 > 0.0) {
        return Err(Error::contract("fading parameters must be positive"));
    }
    if z <= 0.0 {
        return Ok(0.0);
    }
    if m == 0 {
        return Ok(erlang_cdf(n, l1, z));
    }
    if n == 0 {
        return Ok(erlang_cdf(m, l2, z));
    }
    let spread = 1.0 - l1.min(l2) / l1.max(l2);
    if spread == 0.0 {
        return Ok(erlang_cdf(n + m, l1, z));
    }
    if spread >= PARTIAL_FRACTION_MIN_SPREAD {
        return Ok(PartialFractionExpansion::new(n, m, lambdas)?.cdf(z));
    }
    Ok(negative_binomial_mixture_cdf(n, m, lambdas, z))
}

/// Gamma(a, l_min) is a negative-binomial mixture of Gamma(a + j, l_max)
/// laws, so the sum is a positive mixture of Erlang(n + m + j, l_max)
/// distributions with weights `C(a+j-1, j) p^a q^j`, `p = l_min / l_max`.
fn negative_binomial_mixture_cdf(n: u32, m: u32, lambdas: (f64, f64), z: f64) -> f64 {
    let (l1, l2) = lambdas;
    let (slow_count, l_min, l_max) = if l1 < l2 { (n, l1, l2) } else { (m, l2, l1) };
    let p = l_min / l_max;
    let q = 1.0 - p;
    let shape0 = f64::from(n + m);
    let a = f64::from(slow_count);

    let mut weight = p.powf(a);
    let mut mass = 0.0;
    let mut total = 0.0;
    for j in 0..100_000u32 {
        let jf = f64::from(j);
        total += weight * gamma_lr(shape0 + jf, l_max * z);
        mass += weight;
        if 1.0 - mass < 1e-16 {
            break;
        }
        weight *= q * (a + jf) / (jf + 1.0);
    }
    total.clamp(0.0, 1.0)
}

/// `Pr(log(1 + P S) < x)` with `S` as in [`hypoexponential_cdf`]: the RTD
/// outage-type probability after `n` copies on band 1 and `m` on band 2.
pub fn cdf_rtd_sum(n: u32, m: u32, lambdas: (f64, f64), power: f64, x: f64) -> Result<f64> {
    if !(power > 0.0) {
        return Err(Error::contract("power must be positive"));
    }
    if n + m == 0 {
        return Err(Error::contract("cdf_rtd_sum needs n + m >= 1"));
    }
    if x <= 0.0 {
        return Ok(0.0);
    }
    hypoexponential_cdf(n, m, lambdas, x.exp_m1() / power)
}
