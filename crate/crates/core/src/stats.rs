//! Test outcomes and reference-distribution tail probabilities.

use statrs::distribution::{ChiSquared, ContinuousCDF, FisherSnedecor};
use std::f64::consts::FRAC_1_SQRT_2;

/// Reference distribution a test statistic is compared against.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Reference {
    /// One-sided upper tail of the standard normal.
    Normal,
    ChiSquare { df: u32 },
    F { df1: u32, df2: u32 },
}

/// Why an outcome is not a plain evaluation of the statistic.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TestFlag {
    /// A required fit did not converge; the p-value is a policy fallback.
    Fallback,
    /// A slightly negative likelihood-ratio statistic was clamped to zero.
    Clamped,
    /// The statistic is undefined (e.g. zero variance); p-value set to 1.
    Degenerate,
    /// A precondition of the test was not met and it was not run.
    Skipped,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TestOutcome {
    pub statistic: f64,
    pub reference: Reference,
    pub p_value: f64,
    pub flag: Option<TestFlag>,
}

impl TestOutcome {
    pub fn new(statistic: f64, reference: Reference) -> Self {
        let p_value = match reference {
            Reference::Normal => normal_sf(statistic),
            Reference::ChiSquare { df } => chi_square_sf(statistic, df),
            Reference::F { df1, df2 } => f_sf(statistic, df1, df2),
        };
        Self {
            statistic,
            reference,
            p_value,
            flag: None,
        }
    }

    /// An outcome carrying a fixed p-value rather than one computed from
    /// the statistic.
    pub fn fixed(statistic: f64, reference: Reference, p_value: f64, flag: TestFlag) -> Self {
        Self {
            statistic,
            reference,
            p_value,
            flag: Some(flag),
        }
    }

    /// Degrees of freedom; `None` for normal-reference tests.
    pub fn df(&self) -> Option<u32> {
        match self.reference {
            Reference::Normal => None,
            Reference::ChiSquare { df } => Some(df),
            Reference::F { df1, .. } => Some(df1),
        }
    }

    pub fn rejects(&self, alpha: f64) -> bool {
        self.p_value < alpha
    }
}

pub fn normal_sf(z: f64) -> f64 {
    if z.is_nan() {
        return 1.0;
    }
    0.5 * libm::erfc(z * FRAC_1_SQRT_2)
}

pub fn normal_cdf(z: f64) -> f64 {
    if z.is_nan() {
        return 1.0;
    }
    0.5 * libm::erfc(-z * FRAC_1_SQRT_2)
}

pub fn chi_square_sf(x: f64, df: u32) -> f64 {
    if x.is_nan() {
        return 1.0;
    }
    if x <= 0.0 {
        return 1.0;
    }
    ChiSquared::new(df as f64)
        .expect("df > 0")
        .sf(x)
        .clamp(0.0, 1.0)
}

pub fn f_sf(x: f64, df1: u32, df2: u32) -> f64 {
    if x.is_nan() || x <= 0.0 {
        return 1.0;
    }
    FisherSnedecor::new(df1 as f64, df2 as f64)
        .expect("df > 0")
        .sf(x)
        .clamp(0.0, 1.0)
}
