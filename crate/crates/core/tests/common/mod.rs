//! Independent reference computations shared by the integration tests.
#![allow(dead_code)]

use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};
use rand_distr::{Distribution, Exp};

/// Kronrod 15-point nodes (non-negative half) and weights, with the embedded
/// Gauss 7-point weights on the odd nodes.
const XK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const WK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_8,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

fn kronrod<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> (f64, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut k = WK[7] * fc;
    let mut g = WG[3] * fc;
    for i in 0..7 {
        let s = f(c - h * XK[i]) + f(c + h * XK[i]);
        k += WK[i] * s;
        if i % 2 == 1 {
            g += WG[i / 2] * s;
        }
    }
    (k * h, ((k - g) * h).abs())
}

/// Adaptive Gauss-Kronrod integral of `f` over `[a, b]` to absolute `tol`.
pub fn integrate<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, tol: f64) -> f64 {
    fn go<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, tol: f64, depth: u32) -> f64 {
        let (v, err) = kronrod(f, a, b);
        if err <= tol || depth == 0 {
            return v;
        }
        let c = 0.5 * (a + b);
        go(f, a, c, 0.5 * tol, depth - 1) + go(f, c, b, 0.5 * tol, depth - 1)
    }
    if b <= a {
        return 0.0;
    }
    go(f, a, b, tol, 40)
}

fn factorial(k: u32) -> f64 {
    (1..=k).map(f64::from).product()
}

/// Erlang density.
pub fn gamma_pdf(k: u32, rate: f64, t: f64) -> f64 {
    if t < 0.0 {
        return 0.0;
    }
    rate.powi(k as i32) * t.powi(k as i32 - 1) * (-rate * t).exp() / factorial(k - 1)
}

/// Erlang CDF by its Poisson sum.
pub fn erlang_cdf(k: u32, rate: f64, y: f64) -> f64 {
    if k == 0 {
        return 1.0;
    }
    if y <= 0.0 {
        return 0.0;
    }
    let ly = rate * y;
    let tail: f64 = (0..k).map(|j| ly.powi(j as i32) / factorial(j)).sum();
    1.0 - (-ly).exp() * tail
}

/// `Pr(log(1 + P (Gamma(n, l1) + Gamma(m, l2))) < x)` as the convolution
/// integral of the first density with the second CDF.
pub fn rtd_cdf(n: u32, m: u32, l1: f64, l2: f64, power: f64, x: f64) -> f64 {
    let z = x.exp_m1() / power;
    if z <= 0.0 {
        return 0.0;
    }
    match (n, m) {
        (0, _) => erlang_cdf(m, l2, z),
        (_, 0) => erlang_cdf(n, l1, z),
        _ => {
            // The first density is negligible past (n + 60) / l1; integrate in
            // pieces of one mean gap so the adaptive rule sees its mass.
            let upper = z.min((f64::from(n) + 60.0) / l1);
            let pieces = (upper * l1).ceil().max(1.0) as usize;
            let w = upper / pieces as f64;
            (0..pieces)
                .map(|i| {
                    let (a, b) = (i as f64 * w, (i + 1) as f64 * w);
                    integrate(&|t| gamma_pdf(n, l1, t) * erlang_cdf(m, l2, z - t), a, b, 1e-14)
                })
                .sum()
        }
    }
}

/// `Pr(g1 + g2 + g2' < c)` for `g1 ~ Exp(l1)` and `g2, g2' ~ Exp(l2)` as a
/// triple integral of the joint density over the simplex.
pub fn phi_triple(c: f64, l1: f64, l2: f64) -> f64 {
    let e = |l: f64, t: f64| l * (-l * t).exp();
    integrate(
        &|a| {
            e(l1, a)
                * integrate(
                    &|b| e(l2, b) * integrate(&|d| e(l2, d), 0.0, c - a - b, 1e-14),
                    0.0,
                    c - a,
                    1e-13,
                )
        },
        0.0,
        c,
        1e-12,
    )
}

/// Density of `log(1 + P g)` for `g ~ Exp(lambda)`.
pub fn inr_term_pdf(lambda: f64, power: f64, z: f64) -> f64 {
    if z < 0.0 {
        return 0.0;
    }
    lambda / power * z.exp() * (-lambda * z.exp_m1() / power).exp()
}

pub fn inr_term_cdf(lambda: f64, power: f64, z: f64) -> f64 {
    if z <= 0.0 {
        return 0.0;
    }
    1.0 - (-lambda * z.exp_m1() / power).exp()
}

/// Two-term INR CDF by quadrature.
pub fn inr2_cdf(l1: f64, l2: f64, power: f64, x: f64) -> f64 {
    integrate(&|z| inr_term_pdf(l1, power, z) * inr_term_cdf(l2, power, x - z), 0.0, x, 1e-13)
}

/// Monte Carlo estimate of `Pr(sum of log(1 + P g) < x)` for several `x`
/// at once, using a generator unrelated to the simulator's.
pub fn inr_cdf_mc(n: u32, m: u32, l1: f64, l2: f64, power: f64, xs: &[f64], samples: u64, seed: u64) -> Vec<f64> {
    let mut rng = StdRng::seed_from_u64(seed);
    let (e1, e2) = (Exp::new(l1).unwrap(), Exp::new(l2).unwrap());
    let mut hits = vec![0u64; xs.len()];
    for _ in 0..samples {
        let mut s = 0.0;
        for _ in 0..n {
            s += (power * e1.sample(&mut rng)).ln_1p();
        }
        for _ in 0..m {
            s += (power * e2.sample(&mut rng)).ln_1p();
        }
        for (h, &x) in hits.iter_mut().zip(xs) {
            *h += u64::from(s < x);
        }
    }
    hits.iter().map(|&h| h as f64 / samples as f64).collect()
}

/// Uniform draw, for tests that need a few random parameters.
pub fn uniform(rng: &mut StdRng, lo: f64, hi: f64) -> f64 {
    rng.random_range(lo..hi)
}
