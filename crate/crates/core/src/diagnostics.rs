//! Preliminary tests that drive model selection: the Dean–Lawless score
//! test for overdispersion and the Vuong test of a count model against its
//! zero-inflated counterpart.

use crate::dist::FamilyKind;
use crate::error::{Error, Result};
use crate::fit::{CountDataset, FitResult, FALLBACK_P};
use crate::stats::{normal_cdf, normal_sf, Reference, TestFlag, TestOutcome};

/// Dean–Lawless statistic
/// `T1 = Σ[(y - λ̂)² - y] / sqrt(2 Σ λ̂²)` from a Poisson fit, with a one-sided
/// upper-tail normal p-value.
pub fn dean_lawless(data: &CountDataset, poisson_fit: &FitResult) -> TestOutcome {
    if poisson_fit.family != FamilyKind::Poisson || !poisson_fit.converged {
        return TestOutcome::fixed(f64::NAN, Reference::Normal, FALLBACK_P, TestFlag::Fallback);
    }
    let (num, den) = data
        .y()
        .iter()
        .zip(poisson_fit.lambda_hat(data))
        .fold((0.0, 0.0), |(num, den), (&y, lam)| {
            let y = y as f64;
            (num + (y - lam).powi(2) - y, den + lam * lam)
        });
    TestOutcome::new(num / (2.0 * den).sqrt(), Reference::Normal)
}

/// Which model a Vuong statistic points to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Favors {
    ZeroInflated,
    Restricted,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VuongRow {
    pub statistic: f64,
    /// One-sided p-value in the direction the statistic points.
    pub p_value: f64,
    pub favors: Favors,
}

impl VuongRow {
    fn from_statistic(v: f64) -> Self {
        if v > 0.0 {
            Self {
                statistic: v,
                p_value: normal_sf(v),
                favors: Favors::ZeroInflated,
            }
        } else {
            Self {
                statistic: v,
                p_value: normal_cdf(v),
                favors: Favors::Restricted,
            }
        }
    }

    fn inconclusive() -> Self {
        Self {
            statistic: f64::NAN,
            p_value: 1.0,
            favors: Favors::Restricted,
        }
    }
}

/// Raw, AIC-corrected and BIC-corrected Vuong statistics. Positive values
/// favor the zero-inflated model.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VuongOutcome {
    pub raw: VuongRow,
    pub aic: VuongRow,
    pub bic: VuongRow,
    /// Observations used after dropping non-finite log-ratios.
    pub n_eff: usize,
    pub dropped: usize,
    pub flag: Option<TestFlag>,
}

impl VuongOutcome {
    pub(crate) fn not_run(flag: TestFlag, n: usize) -> Self {
        Self {
            raw: VuongRow::inconclusive(),
            aic: VuongRow::inconclusive(),
            bic: VuongRow::inconclusive(),
            n_eff: n,
            dropped: 0,
            flag: Some(flag),
        }
    }

    /// The raw statistic significantly favors the zero-inflated model.
    pub fn rejects_toward_zi(&self, alpha: f64) -> bool {
        self.raw.favors == Favors::ZeroInflated && self.raw.p_value < alpha
    }

    /// Raw row as a generic outcome (two-sided flags dropped).
    pub fn raw_outcome(&self) -> TestOutcome {
        TestOutcome {
            statistic: self.raw.statistic,
            reference: Reference::Normal,
            p_value: self.raw.p_value,
            flag: self.flag,
        }
    }
}

/// Vuong statistic from per-observation log-likelihood ratios
/// `ln p_zi(y_i) - ln p_restricted(y_i)`. `extra_params` is
/// `k_zi - k_restricted`, used by the AIC/BIC corrections.
pub fn vuong_from_log_ratios(log_ratios: &[f64], extra_params: usize) -> VuongOutcome {
    let kept: Vec<f64> = log_ratios.iter().copied().filter(|v| v.is_finite()).collect();
    let n_eff = kept.len();
    let dropped = log_ratios.len() - n_eff;
    if n_eff < 2 {
        return VuongOutcome {
            dropped,
            ..VuongOutcome::not_run(TestFlag::Degenerate, n_eff)
        };
    }
    let ne = n_eff as f64;
    let mean = kept.iter().sum::<f64>() / ne;
    let sd = (kept.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (ne - 1.0)).sqrt();
    // shifting every term by a constant leaves sd unchanged
    let stat = |shift: f64| (mean - shift) * ne.sqrt() / sd;
    let raw = stat(0.0);
    if !(sd > 0.0) || !raw.is_finite() {
        return VuongOutcome {
            dropped,
            ..VuongOutcome::not_run(TestFlag::Degenerate, n_eff)
        };
    }
    let k = extra_params as f64;
    VuongOutcome {
        raw: VuongRow::from_statistic(raw),
        aic: VuongRow::from_statistic(stat(k / ne)),
        bic: VuongRow::from_statistic(stat(k * ne.ln() / (2.0 * ne))),
        n_eff,
        dropped,
        flag: None,
    }
}

/// Vuong test of `restricted` (Poisson or NB2) against its zero-inflated
/// counterpart `zi`, both fit to `data`.
///
/// Skipped (p = 1) when `data` has fewer than two zeros or either fit did
/// not converge.
pub fn vuong(restricted: &FitResult, zi: &FitResult, data: &CountDataset) -> Result<VuongOutcome> {
    let expected = match restricted.family {
        FamilyKind::Poisson => FamilyKind::Zip,
        FamilyKind::NegBin => FamilyKind::Zinb,
        other => {
            return Err(Error::Incompatible(format!(
                "{other} is not a restricted count model"
            )))
        }
    };
    if zi.family != expected {
        return Err(Error::Incompatible(format!(
            "{} must be compared with {expected}, got {}",
            restricted.family, zi.family
        )));
    }
    if restricted.n_obs != data.n() || zi.n_obs != data.n() {
        return Err(Error::Incompatible("fits use a different dataset".into()));
    }
    if data.zero_count() < 2 {
        return Ok(VuongOutcome::not_run(TestFlag::Skipped, data.n()));
    }
    if !restricted.converged || !zi.converged {
        return Ok(VuongOutcome::not_run(TestFlag::Fallback, data.n()));
    }
    let log_ratios: Vec<f64> = zi
        .pointwise_loglik(data)
        .into_iter()
        .zip(restricted.pointwise_loglik(data))
        .map(|(a, b)| a - b)
        .collect();
    let extra = zi.n_free_params.saturating_sub(restricted.n_free_params);
    Ok(vuong_from_log_ratios(&log_ratios, extra))
}
