//! The four count families, parameterized as in the regression models:
//! a count mean `lambda`, a structural-zero probability `omega` and an NB2
//! dispersion `nu` with `Var = lambda + lambda^2 / nu`.

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use rand_distr::{Bernoulli, Distribution, Gamma, Poisson};

use crate::error::{Error, Result};
use crate::special::{ln_factorial, ln_rising, log_add_exp};

/// Model family. The derived ordering (Poisson < NB2 < ZIP < ZINB) is the
/// fixed reporting order and the tie-break order for AIC selection.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum FamilyKind {
    Poisson,
    NegBin,
    Zip,
    Zinb,
}

impl FamilyKind {
    pub const ALL: [FamilyKind; 4] = [
        FamilyKind::Poisson,
        FamilyKind::NegBin,
        FamilyKind::Zip,
        FamilyKind::Zinb,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn is_zero_inflated(self) -> bool {
        matches!(self, FamilyKind::Zip | FamilyKind::Zinb)
    }

    pub fn has_dispersion(self) -> bool {
        matches!(self, FamilyKind::NegBin | FamilyKind::Zinb)
    }

    /// Number of free parameters in the regression model with one covariate.
    pub fn n_free_params(self) -> usize {
        match self {
            FamilyKind::Poisson => 2,
            FamilyKind::NegBin => 3,
            FamilyKind::Zip => 4,
            FamilyKind::Zinb => 5,
        }
    }

    /// The non-inflated counterpart (identity for Poisson and NB2).
    pub fn base(self) -> FamilyKind {
        match self {
            FamilyKind::Zip => FamilyKind::Poisson,
            FamilyKind::Zinb => FamilyKind::NegBin,
            f => f,
        }
    }

    /// The zero-inflated counterpart (identity for ZIP and ZINB).
    pub fn zero_inflated(self) -> FamilyKind {
        match self {
            FamilyKind::Poisson => FamilyKind::Zip,
            FamilyKind::NegBin => FamilyKind::Zinb,
            f => f,
        }
    }

    /// Short machine name used on the command line and in CSV output.
    pub fn short_name(self) -> &'static str {
        match self {
            FamilyKind::Poisson => "pois",
            FamilyKind::NegBin => "nb",
            FamilyKind::Zip => "zip",
            FamilyKind::Zinb => "zinb",
        }
    }
}

impl fmt::Display for FamilyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            FamilyKind::Poisson => "Poisson",
            FamilyKind::NegBin => "NB",
            FamilyKind::Zip => "ZIP",
            FamilyKind::Zinb => "ZINB",
        })
    }
}

impl FromStr for FamilyKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "pois" | "poisson" => Ok(FamilyKind::Poisson),
            "nb" | "nb2" | "negbin" => Ok(FamilyKind::NegBin),
            "zip" => Ok(FamilyKind::Zip),
            "zinb" => Ok(FamilyKind::Zinb),
            other => Err(Error::Config(format!("unknown family '{other}'"))),
        }
    }
}

/// A positive dispersion value or the Poisson limit.
///
/// The infinite case is an explicit variant so the Poisson and ZIP code
/// paths never go through a large-but-finite stand-in.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Dispersion {
    Infinite,
    Finite(f64),
}

impl Dispersion {
    pub fn is_infinite(self) -> bool {
        matches!(self, Dispersion::Infinite)
    }

    pub fn finite(self) -> Option<f64> {
        match self {
            Dispersion::Infinite => None,
            Dispersion::Finite(v) => Some(v),
        }
    }

    pub fn as_f64(self) -> f64 {
        self.finite().unwrap_or(f64::INFINITY)
    }

    /// Accepts `inf`, a decimal, or a fraction such as `1/3`.
    pub fn parse(s: &str) -> Result<Self> {
        let t = s.trim();
        let lower = t.to_ascii_lowercase();
        if matches!(lower.as_str(), "inf" | "infinity" | "+inf" | "∞") {
            return Ok(Dispersion::Infinite);
        }
        let value = if let Some((num, den)) = t.split_once('/') {
            let num: f64 = num.trim().parse().map_err(|_| bad_dispersion(t))?;
            let den: f64 = den.trim().parse().map_err(|_| bad_dispersion(t))?;
            num / den
        } else {
            t.parse().map_err(|_| bad_dispersion(t))?
        };
        if value.is_finite() && value > 0.0 {
            Ok(Dispersion::Finite(value))
        } else if value == f64::INFINITY {
            Ok(Dispersion::Infinite)
        } else {
            Err(bad_dispersion(t))
        }
    }
}

fn bad_dispersion(s: &str) -> Error {
    Error::Config(format!("'{s}' is not a positive dispersion value or 'inf'"))
}

impl fmt::Display for Dispersion {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Dispersion::Infinite => f.write_str("Inf"),
            Dispersion::Finite(v) => write!(f, "{v}"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DistParams {
    pub lambda: f64,
    pub omega: f64,
    pub nu: Dispersion,
}

impl DistParams {
    pub fn poisson(lambda: f64) -> Self {
        Self {
            lambda,
            omega: 0.0,
            nu: Dispersion::Infinite,
        }
    }

    pub fn negbin(lambda: f64, nu: f64) -> Self {
        Self {
            lambda,
            omega: 0.0,
            nu: Dispersion::Finite(nu),
        }
    }

    pub fn zip(lambda: f64, omega: f64) -> Self {
        Self {
            lambda,
            omega,
            nu: Dispersion::Infinite,
        }
    }

    pub fn zinb(lambda: f64, omega: f64, nu: f64) -> Self {
        Self {
            lambda,
            omega,
            nu: Dispersion::Finite(nu),
        }
    }

    /// Checks the value domains and the presence pattern for `family`.
    pub fn validate(&self, family: FamilyKind) -> Result<()> {
        if !(self.lambda > 0.0 && self.lambda.is_finite()) {
            return Err(Error::ParamDomain(format!(
                "lambda must be positive and finite, got {}",
                self.lambda
            )));
        }
        if !(0.0..1.0).contains(&self.omega) {
            return Err(Error::ParamDomain(format!(
                "omega must lie in [0, 1), got {}",
                self.omega
            )));
        }
        if let Dispersion::Finite(nu) = self.nu {
            if !(nu > 0.0 && nu.is_finite()) {
                return Err(Error::ParamDomain(format!(
                    "nu must be positive, got {nu}"
                )));
            }
        }
        if !family.is_zero_inflated() && self.omega != 0.0 {
            return Err(Error::ParamDomain(format!(
                "{family} has no structural-zero component (omega = {})",
                self.omega
            )));
        }
        if family.has_dispersion() == self.nu.is_infinite() {
            return Err(Error::ParamDomain(format!(
                "{family} requires nu {}",
                if family.has_dispersion() {
                    "finite"
                } else {
                    "= +infinity"
                }
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Moments {
    pub mean: f64,
    pub variance: f64,
    pub dispersion_index: f64,
}

/// Log-PMF of the base (non-inflated) count model.
pub(crate) fn base_ln_pmf(lambda: f64, nu: Dispersion, y: u64) -> f64 {
    match nu {
        Dispersion::Infinite => y as f64 * lambda.ln() - lambda - ln_factorial(y),
        Dispersion::Finite(nu) => {
            // ln(1 + lambda/nu) enters both the size and the success terms
            let r = (lambda / nu).ln_1p();
            ln_rising(nu, y) - ln_factorial(y) - nu * r + y as f64 * (lambda.ln() - nu.ln() - r)
        }
    }
}

pub fn log_pmf(family: FamilyKind, params: &DistParams, y: u64) -> Result<f64> {
    params.validate(family)?;
    let base = base_ln_pmf(params.lambda, params.nu, y);
    if !family.is_zero_inflated() {
        return Ok(base);
    }
    let ln_keep = (-params.omega).ln_1p();
    if y == 0 {
        Ok(log_add_exp(params.omega.ln(), ln_keep + base))
    } else {
        Ok(ln_keep + base)
    }
}

pub fn moments(family: FamilyKind, params: &DistParams) -> Result<Moments> {
    params.validate(family)?;
    let lambda = params.lambda;
    let omega = params.omega;
    let inv_nu = params.nu.finite().map_or(0.0, |nu| 1.0 / nu);
    let mean = lambda * (1.0 - omega);
    let variance = (1.0 - omega) * (lambda + lambda * lambda * (omega + inv_nu));
    Ok(Moments {
        mean,
        variance,
        dispersion_index: 1.0 + lambda * (omega + inv_nu),
    })
}

/// Draws `n` independent counts. Zero-inflated families are drawn
/// compositionally; NB2 as a gamma–Poisson mixture with shape `nu` and
/// scale `lambda / nu`.
pub fn sample<R: Rng + ?Sized>(
    family: FamilyKind,
    params: &DistParams,
    n: usize,
    rng: &mut R,
) -> Result<Vec<u64>> {
    params.validate(family)?;
    let structural = Bernoulli::new(params.omega)
        .map_err(|e| Error::ParamDomain(format!("omega: {e}")))?;
    let mut out = Vec::with_capacity(n);
    match params.nu {
        Dispersion::Infinite => {
            let pois = Poisson::new(params.lambda)
                .map_err(|e| Error::ParamDomain(format!("lambda: {e}")))?;
            for _ in 0..n {
                if params.omega > 0.0 && structural.sample(rng) {
                    out.push(0);
                } else {
                    out.push(pois.sample(rng) as u64);
                }
            }
        }
        Dispersion::Finite(nu) => {
            let mix = Gamma::new(nu, params.lambda / nu)
                .map_err(|e| Error::ParamDomain(format!("nu: {e}")))?;
            for _ in 0..n {
                if params.omega > 0.0 && structural.sample(rng) {
                    out.push(0);
                    continue;
                }
                let rate: f64 = mix.sample(rng);
                let draw = if rate > 0.0 {
                    Poisson::new(rate)
                        .map(|p| p.sample(rng) as u64)
                        .unwrap_or(0)
                } else {
                    0
                };
                out.push(draw);
            }
        }
    }
    Ok(out)
}
