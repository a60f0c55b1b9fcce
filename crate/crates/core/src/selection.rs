//! Data-driven model selection: the sequential seven-step test procedure and
//! lowest-AIC selection. Each policy ends with a chosen family and the Wald
//! p-value for the covariate effect in that family.

use crate::diagnostics::{dean_lawless, vuong, VuongOutcome};
use crate::dist::FamilyKind;
use crate::error::{Error, Result};
use crate::fit::{fit, fit_all, wald_test_with, CountDataset, FitResult, WaldForm, FALLBACK_P};
use crate::stats::{TestFlag, TestOutcome};
use std::fmt;
use std::str::FromStr;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum PolicyKind {
    SevenStep,
    LowestAic,
}

impl PolicyKind {
    pub const ALL: [PolicyKind; 2] = [PolicyKind::SevenStep, PolicyKind::LowestAic];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn name(self) -> &'static str {
        match self {
            PolicyKind::SevenStep => "seven_step",
            PolicyKind::LowestAic => "lowest_aic",
        }
    }
}

impl fmt::Display for PolicyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for PolicyKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace('-', "_").as_str() {
            "seven_step" | "sevenstep" => Ok(PolicyKind::SevenStep),
            "lowest_aic" | "lowestaic" | "aic" => Ok(PolicyKind::LowestAic),
            _ => Err(Error::Config(format!("unknown selection policy `{s}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SelectionPolicy {
    pub kind: PolicyKind,
    /// Level shared by the preliminary tests and the final Wald test.
    pub alpha: f64,
}

impl SelectionPolicy {
    pub fn new(kind: PolicyKind, alpha: f64) -> Result<Self> {
        if !(alpha > 0.0 && alpha < 1.0) {
            return Err(Error::Config(format!("alpha must lie in (0, 1), got {alpha}")));
        }
        Ok(Self { kind, alpha })
    }

    pub fn select(&self, suite: &ModelSuite) -> SelectionTrace {
        match self.kind {
            PolicyKind::SevenStep => suite.seven_step(self.alpha),
            PolicyKind::LowestAic => suite.lowest_aic(self.alpha),
        }
    }
}

/// How one dataset was routed by a policy.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SelectionTrace {
    pub policy: PolicyKind,
    pub alpha: f64,
    pub dl_p: Option<f64>,
    pub vuong_pois_zip_p: Option<f64>,
    pub vuong_nb_zinb_p: Option<f64>,
    /// Indexed by [`FamilyKind::index`]; `+inf` for fits that did not converge,
    /// NaN for families a lazy seven-step run never fit.
    pub aic_by_family: [f64; 4],
    pub chosen: FamilyKind,
    pub final_p: f64,
    pub rejected_h0: bool,
    /// A fit needed on the decision path failed and a policy fallback value
    /// was used in its place.
    pub fallback_used: bool,
}

/// All four fits on one dataset together with every test the policies use.
#[derive(Debug, Clone)]
pub struct ModelSuite {
    pub fits: [FitResult; 4],
    pub wald: [TestOutcome; 4],
    pub dean_lawless: TestOutcome,
    pub vuong_pois_zip: VuongOutcome,
    pub vuong_nb_zinb: VuongOutcome,
}

impl ModelSuite {
    pub fn fit(data: &CountDataset, wald_form: WaldForm) -> Self {
        let fits = fit_all(data);
        let wald = std::array::from_fn(|i| wald_test_with(&fits[i], wald_form));
        let [pois, nb, zip, zinb] = &fits;
        let dean_lawless = dean_lawless(data, pois);
        let vuong_pois_zip = vuong(pois, zip, data).expect("Poisson and ZIP are a valid pair");
        let vuong_nb_zinb = vuong(nb, zinb, data).expect("NB and ZINB are a valid pair");
        Self {
            fits,
            wald,
            dean_lawless,
            vuong_pois_zip,
            vuong_nb_zinb,
        }
    }

    pub fn fit_of(&self, family: FamilyKind) -> &FitResult {
        &self.fits[family.index()]
    }

    pub fn aic_by_family(&self) -> [f64; 4] {
        std::array::from_fn(|i| self.fits[i].aic)
    }

    fn final_test(&self, family: FamilyKind) -> (f64, bool) {
        let w = &self.wald[family.index()];
        (w.p_value, w.flag == Some(TestFlag::Fallback))
    }

    /// Steps 1-7: Dean–Lawless, then Vuong against the zero-inflated
    /// counterpart of whichever base model the first test points to.
    pub fn seven_step(&self, alpha: f64) -> SelectionTrace {
        let dl = &self.dean_lawless;
        let mut fallback = dl.flag == Some(TestFlag::Fallback);
        let overdispersed = dl.rejects(alpha);
        let (restricted, zi, v) = if overdispersed {
            (FamilyKind::NegBin, FamilyKind::Zinb, &self.vuong_nb_zinb)
        } else {
            (FamilyKind::Poisson, FamilyKind::Zip, &self.vuong_pois_zip)
        };
        fallback |= v.flag == Some(TestFlag::Fallback);
        let chosen = if v.rejects_toward_zi(alpha) { zi } else { restricted };
        let (final_p, wald_fallback) = self.final_test(chosen);
        let vp = Some(v.raw.p_value);
        SelectionTrace {
            policy: PolicyKind::SevenStep,
            alpha,
            dl_p: Some(dl.p_value),
            vuong_pois_zip_p: if overdispersed { None } else { vp },
            vuong_nb_zinb_p: if overdispersed { vp } else { None },
            aic_by_family: self.aic_by_family(),
            chosen,
            final_p,
            rejected_h0: final_p < alpha,
            fallback_used: fallback || wald_fallback,
        }
    }

    pub fn lowest_aic(&self, alpha: f64) -> SelectionTrace {
        let aics = self.aic_by_family();
        let (chosen, final_p, fallback_used) = match lowest_aic_family(&aics) {
            Some(f) => {
                let (p, fb) = self.final_test(f);
                (f, p, fb)
            }
            None => (FamilyKind::Poisson, FALLBACK_P, true),
        };
        SelectionTrace {
            policy: PolicyKind::LowestAic,
            alpha,
            dl_p: None,
            vuong_pois_zip_p: None,
            vuong_nb_zinb_p: None,
            aic_by_family: aics,
            chosen,
            final_p,
            rejected_h0: final_p < alpha,
            fallback_used,
        }
    }
}

/// Family with the smallest finite AIC, ties going to the simpler family.
/// `None` when no AIC is finite.
pub fn lowest_aic_family(aics: &[f64; 4]) -> Option<FamilyKind> {
    let mut best: Option<(FamilyKind, f64)> = None;
    for fam in FamilyKind::ALL {
        let a = aics[fam.index()];
        if !a.is_finite() {
            continue;
        }
        if best.is_none_or(|(_, b)| a < b) {
            best = Some((fam, a));
        }
    }
    best.map(|(f, _)| f)
}

/// Seven-step selection fitting only the models on the path taken.
pub fn select_seven_step(data: &CountDataset, alpha: f64) -> SelectionTrace {
    let mut aics = [f64::NAN; 4];
    let pois = fit(FamilyKind::Poisson, data);
    aics[0] = pois.aic;
    let dl = dean_lawless(data, &pois);
    let overdispersed = dl.rejects(alpha);
    let restricted = if overdispersed { fit(FamilyKind::NegBin, data) } else { pois };
    aics[restricted.family.index()] = restricted.aic;
    let zi_family = restricted.family.zero_inflated();
    let (v, zi) = if data.zero_count() < 2 {
        (VuongOutcome::not_run(TestFlag::Skipped, data.n()), None)
    } else {
        let zi = fit(zi_family, data);
        aics[zi_family.index()] = zi.aic;
        let v = vuong(&restricted, &zi, data).expect("restricted model and its zero-inflated counterpart");
        (v, Some(zi))
    };
    let chosen_fit = match zi {
        Some(zi) if v.rejects_toward_zi(alpha) => zi,
        _ => restricted,
    };
    let w = wald_test_with(&chosen_fit, WaldForm::ChiSquare);
    let vp = Some(v.raw.p_value);
    SelectionTrace {
        policy: PolicyKind::SevenStep,
        alpha,
        dl_p: Some(dl.p_value),
        vuong_pois_zip_p: if overdispersed { None } else { vp },
        vuong_nb_zinb_p: if overdispersed { vp } else { None },
        aic_by_family: aics,
        chosen: chosen_fit.family,
        final_p: w.p_value,
        rejected_h0: w.p_value < alpha,
        fallback_used: [dl.flag, v.flag, w.flag].contains(&Some(TestFlag::Fallback)),
    }
}

pub fn select_lowest_aic(data: &CountDataset, alpha: f64) -> SelectionTrace {
    ModelSuite::fit(data, WaldForm::ChiSquare).lowest_aic(alpha)
}

/// Expected leaf percentages of the seven-step tree if each preliminary test
/// rejected independently with probability `alpha`, in family order.
pub fn independence_leaf_percent(alpha: f64) -> [f64; 4] {
    let keep = 1.0 - alpha;
    [
        100.0 * keep * keep,
        100.0 * alpha * keep,
        100.0 * keep * alpha,
        100.0 * alpha * alpha,
    ]
}
