use std::fmt;

use crate::dist::{Dispersion, DistParams, FamilyKind};
use crate::error::{Error, Result};
use crate::special::{ln_factorial, logistic};

/// Observed counts paired with one real covariate.
#[derive(Debug, Clone, PartialEq)]
pub struct CountDataset {
    y: Vec<u64>,
    x: Vec<f64>,
    ln_fact: Vec<f64>,
}

impl CountDataset {
    pub fn new(y: Vec<u64>, x: Vec<f64>) -> Result<Self> {
        if y.len() != x.len() {
            return Err(Error::Dataset(format!(
                "y has {} values but x has {}",
                y.len(),
                x.len()
            )));
        }
        if y.len() < 2 {
            return Err(Error::Dataset(format!(
                "need at least 2 observations, got {}",
                y.len()
            )));
        }
        if let Some(i) = x.iter().position(|v| !v.is_finite()) {
            return Err(Error::Dataset(format!("x[{i}] is not finite")));
        }
        let ln_fact = y.iter().map(|&v| ln_factorial(v)).collect();
        Ok(Self { y, x, ln_fact })
    }

    pub fn n(&self) -> usize {
        self.y.len()
    }

    pub fn y(&self) -> &[u64] {
        &self.y
    }

    pub fn x(&self) -> &[f64] {
        &self.x
    }

    pub(crate) fn ln_fact(&self) -> &[f64] {
        &self.ln_fact
    }

    pub fn mean_y(&self) -> f64 {
        self.y.iter().sum::<u64>() as f64 / self.n() as f64
    }

    /// Population standard deviation of the covariate.
    pub fn x_sd(&self) -> f64 {
        let n = self.x.len() as f64;
        let m = self.x.iter().sum::<f64>() / n;
        (self.x.iter().map(|v| (v - m).powi(2)).sum::<f64>() / n).sqrt()
    }

    pub fn zero_count(&self) -> usize {
        self.y.iter().filter(|&&v| v == 0).count()
    }

    /// Same counts, covariate mapped to `(x - center) / scale`.
    pub(crate) fn affine(&self, center: f64, scale: f64) -> Self {
        Self {
            y: self.y.clone(),
            x: self.x.iter().map(|v| (v - center) / scale).collect(),
            ln_fact: self.ln_fact.clone(),
        }
    }

    /// Same counts, covariate shifted by `c`.
    pub fn shifted(&self, c: f64) -> Self {
        Self {
            y: self.y.clone(),
            x: self.x.iter().map(|v| v + c).collect(),
            ln_fact: self.ln_fact.clone(),
        }
    }
}

/// Regression coefficients. Count mean `lambda_i = exp(beta0 + beta_x x_i)`;
/// structural-zero probability `omega_i = logistic(gamma0 + gamma_x x_i)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModelParams {
    pub beta0: f64,
    pub beta_x: f64,
    pub gamma0: Option<f64>,
    pub gamma_x: Option<f64>,
    pub nu: Option<f64>,
}

impl ModelParams {
    pub fn poisson(beta0: f64, beta_x: f64) -> Self {
        Self {
            beta0,
            beta_x,
            gamma0: None,
            gamma_x: None,
            nu: None,
        }
    }

    pub fn negbin(beta0: f64, beta_x: f64, nu: f64) -> Self {
        Self {
            nu: Some(nu),
            ..Self::poisson(beta0, beta_x)
        }
    }

    pub fn zip(beta0: f64, beta_x: f64, gamma0: f64, gamma_x: f64) -> Self {
        Self {
            gamma0: Some(gamma0),
            gamma_x: Some(gamma_x),
            ..Self::poisson(beta0, beta_x)
        }
    }

    pub fn zinb(beta0: f64, beta_x: f64, gamma0: f64, gamma_x: f64, nu: f64) -> Self {
        Self {
            nu: Some(nu),
            ..Self::zip(beta0, beta_x, gamma0, gamma_x)
        }
    }

    /// Checks that the present fields match `family` and hold valid values.
    /// `gamma0 = -inf` is accepted and means no structural zeros.
    pub fn validate(&self, family: FamilyKind) -> Result<()> {
        let zi = self.gamma0.is_some() && self.gamma_x.is_some();
        if zi != family.is_zero_inflated()
            || self.gamma0.is_some() != self.gamma_x.is_some()
            || self.nu.is_some() != family.has_dispersion()
        {
            return Err(Error::ParamDomain(format!(
                "parameter pattern does not match {family}: {self}"
            )));
        }
        if !self.beta0.is_finite() || !self.beta_x.is_finite() {
            return Err(Error::ParamDomain("beta must be finite".into()));
        }
        if let Some(g) = self.gamma_x {
            if !g.is_finite() {
                return Err(Error::ParamDomain("gamma_x must be finite".into()));
            }
        }
        if let Some(g) = self.gamma0 {
            if g.is_nan() || g == f64::INFINITY {
                return Err(Error::ParamDomain(format!("gamma0 = {g}")));
            }
        }
        if let Some(nu) = self.nu {
            if !(nu > 0.0 && nu.is_finite()) {
                return Err(Error::ParamDomain(format!("nu must be positive, got {nu}")));
            }
        }
        Ok(())
    }

    pub fn lambda(&self, x: f64) -> f64 {
        (self.beta0 + self.beta_x * x).exp()
    }

    pub fn omega(&self, x: f64) -> f64 {
        match (self.gamma0, self.gamma_x) {
            (Some(g0), Some(gx)) => logistic(g0 + gx * x),
            _ => 0.0,
        }
    }

    /// Distribution parameters for observation with covariate `x`.
    pub fn dist_params(&self, x: f64) -> DistParams {
        DistParams {
            lambda: self.lambda(x),
            omega: self.omega(x),
            nu: self.nu.map_or(Dispersion::Infinite, Dispersion::Finite),
        }
    }

    /// Parameter vector in optimizer coordinates:
    /// `[beta0, beta_x, (gamma0, gamma_x), (ln nu)]`.
    pub fn to_theta(&self) -> Vec<f64> {
        let mut t = vec![self.beta0, self.beta_x];
        if let (Some(g0), Some(gx)) = (self.gamma0, self.gamma_x) {
            t.extend([g0, gx]);
        }
        if let Some(nu) = self.nu {
            t.push(nu.ln());
        }
        t
    }

    pub fn from_theta(family: FamilyKind, theta: &[f64]) -> Self {
        let l = Layout::of(family);
        Self {
            beta0: theta[0],
            beta_x: theta[1],
            gamma0: l.zeta.map(|i| theta[i]),
            gamma_x: l.zeta.map(|i| theta[i + 1]),
            nu: l.u.map(|i| theta[i].exp()),
        }
    }
}

impl fmt::Display for ModelParams {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "beta0={} beta_x={}", self.beta0, self.beta_x)?;
        if let (Some(g0), Some(gx)) = (self.gamma0, self.gamma_x) {
            write!(f, " gamma0={g0} gamma_x={gx}")?;
        }
        if let Some(nu) = self.nu {
            write!(f, " nu={nu}")?;
        }
        Ok(())
    }
}

/// Positions of each parameter block in the optimizer vector.
#[derive(Debug, Clone, Copy)]
pub(crate) struct Layout {
    pub family: FamilyKind,
    /// Index of gamma0 (gamma_x follows).
    pub zeta: Option<usize>,
    /// Index of ln nu.
    pub u: Option<usize>,
}

impl Layout {
    pub fn of(family: FamilyKind) -> Self {
        let zeta = family.is_zero_inflated().then_some(2);
        let u = family
            .has_dispersion()
            .then_some(if family.is_zero_inflated() { 4 } else { 2 });
        Self { family, zeta, u }
    }

    pub fn dim(&self) -> usize {
        self.family.n_free_params()
    }

    /// Indices of the slope coefficients tested by the Wald test.
    pub fn slopes(&self) -> Vec<usize> {
        match self.zeta {
            Some(z) => vec![1, z + 1],
            None => vec![1],
        }
    }
}
