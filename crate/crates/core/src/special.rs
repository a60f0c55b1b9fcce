//! Scalar special functions used by the count likelihoods.
//!
//! Gamma-function ratios with an integer shift, `Γ(ν+y)/Γ(ν)` and the
//! matching digamma/trigamma differences, are evaluated as finite sums when
//! `y` is small. This keeps the negative binomial likelihood exact as
//! `ν → ∞`, where differencing two huge `ln Γ` values would cancel badly.

use statrs::function::{factorial, gamma};

/// Below this count the rising-factorial helpers use exact finite sums.
const SUM_CUTOFF: u64 = 32;

pub fn ln_gamma(x: f64) -> f64 {
    gamma::ln_gamma(x)
}

pub fn ln_factorial(k: u64) -> f64 {
    factorial::ln_factorial(k)
}

pub fn digamma(x: f64) -> f64 {
    gamma::digamma(x)
}

/// Trigamma function ψ'(x) for x > 0.
pub fn trigamma(mut x: f64) -> f64 {
    let mut acc = 0.0;
    while x < 10.0 {
        acc += 1.0 / (x * x);
        x += 1.0;
    }
    let inv = 1.0 / x;
    let inv2 = inv * inv;
    // asymptotic series in 1/x, Bernoulli coefficients
    let tail = inv2
        * (1.0 / 6.0
            - inv2 * (1.0 / 30.0 - inv2 * (1.0 / 42.0 - inv2 * (1.0 / 30.0 - inv2 * 5.0 / 66.0))));
    acc + inv + 0.5 * inv2 + inv * tail
}

/// `ln Γ(nu + y) − ln Γ(nu)`.
pub fn ln_rising(nu: f64, y: u64) -> f64 {
    if y < SUM_CUTOFF {
        (0..y).map(|j| (nu + j as f64).ln()).sum()
    } else {
        ln_gamma(nu + y as f64) - ln_gamma(nu)
    }
}

/// `ψ(nu + y) − ψ(nu)`.
pub fn digamma_rising(nu: f64, y: u64) -> f64 {
    if y < SUM_CUTOFF {
        (0..y).map(|j| 1.0 / (nu + j as f64)).sum()
    } else {
        digamma(nu + y as f64) - digamma(nu)
    }
}

/// `ψ'(nu + y) − ψ'(nu)`; always ≤ 0.
pub fn trigamma_rising(nu: f64, y: u64) -> f64 {
    if y < SUM_CUTOFF {
        -(0..y)
            .map(|j| {
                let t = nu + j as f64;
                1.0 / (t * t)
            })
            .sum::<f64>()
    } else {
        trigamma(nu + y as f64) - trigamma(nu)
    }
}

#[inline]
pub fn logistic(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

pub fn logit(p: f64) -> f64 {
    (p / (1.0 - p)).ln()
}

/// `ln(1 + e^z)` without overflow.
#[inline]
pub fn softplus(z: f64) -> f64 {
    if z == f64::NEG_INFINITY {
        0.0
    } else if z > 0.0 {
        z + (-z).exp().ln_1p()
    } else {
        z.exp().ln_1p()
    }
}

/// `ln(e^a + e^b)`; returns the other argument exactly when one is `-inf`.
#[inline]
pub fn log_add_exp(a: f64, b: f64) -> f64 {
    if a == f64::NEG_INFINITY {
        return b;
    }
    if b == f64::NEG_INFINITY {
        return a;
    }
    let (hi, lo) = if a >= b { (a, b) } else { (b, a) };
    hi + (lo - hi).exp().ln_1p()
}
