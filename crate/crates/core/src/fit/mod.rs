//! Maximum-likelihood fitting of the four count regressions, with Wald,
//! likelihood-ratio and AIC inference.
//!
//! All models share the optimizer vector `[beta0, beta_x, (gamma0, gamma_x),
//! (ln nu)]`. Fits start from a chain of simpler fits (Poisson → NB2 →
//! ZINB, Poisson → ZIP), are refined by damped Newton with an exact
//! analytic Hessian, and fall back to EM passes over the latent
//! structural-zero indicator when Newton stops making progress on a
//! zero-inflated model. Standard errors come from the inverse observed
//! information at the optimum.

mod em;
mod local;
mod model;
mod objective;
mod optim;

use nalgebra::DMatrix;

use crate::dist::FamilyKind;
use crate::error::{Error, Result};
use crate::special::logit;
use crate::stats::{Reference, TestFlag, TestOutcome};

pub use model::{CountDataset, ModelParams};

use local::Order;
use model::Layout;
use optim::{Bounds, Eval, Status};

/// p-value used when a model cannot be fit or tested.
pub const FALLBACK_P: f64 = 0.99;
/// Lower box bound on the zero-inflation intercept, taken at the mean of x.
pub const GAMMA0_MIN: f64 = -300.0;
pub const NU_MIN: f64 = 1e-4;
pub const NU_MAX: f64 = 1e8;
/// Clamp range for the method-of-moments dispersion start.
const NU_START_RANGE: (f64, f64) = (0.01, 1e4);
const EM_MAX_ITER: usize = 100;
/// A stalled line search still counts as converged below this gradient.
const STALL_GRAD_TOL: f64 = 1e-3;
const LOGISTIC_START_ITER: usize = 50;
/// A later zero-inflated start replaces an earlier one only if it gains
/// more than this in log-likelihood.
const ZI_START_MARGIN: f64 = 1e-9;
/// Extra `(gamma0, gamma_x * sd(x))` starts for zero-inflated fits.
const ZI_EXTRA_STARTS: &[(f64, f64)] = &[(-3.0, 1.0), (-3.0, -1.0), (-6.0, 3.0), (-6.0, -3.0)];

/// Reference distribution for the Wald test.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum WaldForm {
    #[default]
    ChiSquare,
    /// `W / df` against `F(df, n - k)`.
    F,
}

impl std::str::FromStr for WaldForm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "chisq" | "chisquare" | "chi2" => Ok(WaldForm::ChiSquare),
            "f" => Ok(WaldForm::F),
            other => Err(Error::Config(format!("unknown wald form '{other}'"))),
        }
    }
}

#[derive(Debug, Clone)]
pub struct FitResult {
    pub family: FamilyKind,
    pub params: ModelParams,
    /// Optimizer-coordinate estimates (`ln nu` for the dispersion).
    pub theta: Vec<f64>,
    /// Inverse observed information over `theta`. Parameters pinned at a box
    /// bound get infinite variance; fixed parameters get zero rows.
    pub cov: DMatrix<f64>,
    pub loglik: f64,
    pub aic: f64,
    pub n_free_params: usize,
    pub n_obs: usize,
    pub converged: bool,
    pub iterations: usize,
    pub em_used: bool,
    /// Parameters held fixed (slopes of a null fit).
    pub fixed: Vec<bool>,
    /// Parameters that ended on a box bound of the standardized fit.
    pub pinned: Vec<bool>,
    /// Log-likelihood after every accepted iteration.
    pub loglik_trace: Vec<f64>,
}

impl FitResult {
    /// Standard error of optimizer coordinate `i`.
    pub fn se(&self, i: usize) -> f64 {
        self.cov[(i, i)].sqrt()
    }

    pub fn lambda_hat(&self, data: &CountDataset) -> Vec<f64> {
        data.x().iter().map(|&x| self.params.lambda(x)).collect()
    }

    /// Per-observation log-probabilities at the estimates.
    pub fn pointwise_loglik(&self, data: &CountDataset) -> Vec<f64> {
        objective::pointwise(&Layout::of(self.family), data, &self.theta)
    }
}

fn bounds_for(layout: &Layout) -> Bounds {
    let mut b = Bounds::unbounded(layout.dim());
    if let Some(z) = layout.zeta {
        b.lo[z] = GAMMA0_MIN;
    }
    if let Some(u) = layout.u {
        b.lo[u] = NU_MIN.ln();
        b.hi[u] = NU_MAX.ln();
    }
    b
}

fn slope_mask(layout: &Layout, null: bool) -> Vec<bool> {
    let mut m = vec![false; layout.dim()];
    if null {
        for i in layout.slopes() {
            m[i] = true;
        }
    }
    m
}

/// Log-likelihood of `params` on `data`.
pub fn loglik(family: FamilyKind, params: &ModelParams, data: &CountDataset) -> Result<f64> {
    params.validate(family)?;
    let layout = Layout::of(family);
    Ok(objective::evaluate(&layout, data, &params.to_theta(), None, Order::Value).ll)
}

/// Analytic gradient of the log-likelihood over the optimizer vector.
pub fn score(family: FamilyKind, params: &ModelParams, data: &CountDataset) -> Result<Vec<f64>> {
    params.validate(family)?;
    let layout = Layout::of(family);
    Ok(objective::evaluate(&layout, data, &params.to_theta(), None, Order::Gradient).grad)
}

/// Analytic Hessian (row-major) over the optimizer vector.
pub fn hessian(family: FamilyKind, params: &ModelParams, data: &CountDataset) -> Result<Vec<f64>> {
    params.validate(family)?;
    let layout = Layout::of(family);
    Ok(objective::evaluate(&layout, data, &params.to_theta(), None, Order::Hessian).hess)
}

#[derive(Clone, Copy)]
struct Fitter<'a> {
    data: &'a CountDataset,
    null: bool,
}

impl<'a> Fitter<'a> {
    fn poisson_start(&self) -> Vec<f64> {
        vec![self.data.mean_y().max(0.1).ln(), 0.0]
    }

    fn negbin_start(&self, pois: &FitResult) -> Vec<f64> {
        let (mut num, mut den) = (0.0, 0.0);
        for (&y, lam) in self.data.y().iter().zip(pois.lambda_hat(self.data)) {
            let y = y as f64;
            num += lam * lam;
            den += (y - lam).powi(2) - y;
        }
        let nu = if den > 0.0 {
            num / den
        } else {
            NU_START_RANGE.1
        };
        let nu = nu.clamp(NU_START_RANGE.0, NU_START_RANGE.1);
        vec![pois.theta[0], pois.theta[1], nu.ln()]
    }

    fn zi_start(&self, base: &FitResult) -> Vec<f64> {
        let n = self.data.n() as f64;
        let observed = self.data.zero_count() as f64 / n;
        let predicted: f64 = self
            .data
            .x()
            .iter()
            .map(|&x| {
                let p = base.params.dist_params(x);
                crate::dist::base_ln_pmf(p.lambda, p.nu, 0).exp()
            })
            .sum::<f64>()
            / n;
        let gamma0 = logit((observed - predicted).max(0.01));
        let mut t = vec![base.theta[0], base.theta[1], gamma0, 0.0];
        if let Some(nu) = base.params.nu {
            t.push(nu.ln());
        }
        t
    }

    /// Zero part from a logistic regression of the zero indicator on x,
    /// count part from `base`.
    fn zi_logistic_start(&self, base: &FitResult) -> Vec<f64> {
        let tau: Vec<f64> = self.data.y().iter().map(|&y| (y == 0) as u8 as f64).collect();
        let p0 = self.data.zero_count() as f64 / self.data.n() as f64;
        let bounds = Bounds {
            lo: vec![GAMMA0_MIN, f64::NEG_INFINITY],
            hi: vec![f64::INFINITY; 2],
        };
        let gamma = optim::maximize(
            |g: &[f64], _| objective::zero_part(self.data, g, &tau),
            &[logit(p0.clamp(0.01, 0.99)), 0.0],
            &bounds,
            &[false, self.null],
            LOGISTIC_START_ITER,
        );
        let mut t = vec![base.theta[0], base.theta[1], gamma.theta[0], gamma.theta[1]];
        if let Some(nu) = base.params.nu {
            t.push(nu.ln());
        }
        t
    }

    /// Fits a zero-inflated family from several starting points and keeps
    /// the best optimum. The zero-part likelihood is often multimodal: a
    /// near-flat ridge towards no inflation competes with modes where the
    /// inflation probability switches on in one tail of the covariate.
    fn run_zi(&self, family: FamilyKind, base: &FitResult) -> FitResult {
        let first = self.zi_start(base);
        let x_sd = self.data.x_sd().max(f64::MIN_POSITIVE);
        let mut starts = vec![first.clone(), self.zi_logistic_start(base)];
        for &(g0, gx) in ZI_EXTRA_STARTS {
            let mut t = first.clone();
            t[2] = g0;
            t[3] = if self.null { 0.0 } else { gx / x_sd };
            if !starts.contains(&t) {
                starts.push(t);
            }
        }
        let mut best: Option<FitResult> = None;
        for st in starts {
            let f = self.run(family, st);
            let better = match &best {
                None => true,
                Some(b) if f.converged != b.converged => f.converged,
                Some(b) => f.loglik > b.loglik + ZI_START_MARGIN,
            };
            if better {
                best = Some(f);
            }
        }
        best.expect("at least one start")
    }

    fn run(&self, family: FamilyKind, start: Vec<f64>) -> FitResult {
        let layout = Layout::of(family);
        let bounds = bounds_for(&layout);
        let fixed = slope_mask(&layout, self.null);
        let data = self.data;
        let f = |t: &[f64], hess: bool| {
            let order = if hess { Order::Hessian } else { Order::Value };
            objective::evaluate(&layout, data, t, None, order)
        };

        let mut out = optim::maximize(f, &start, &bounds, &fixed, optim::MAX_ITER);
        let mut em_used = false;
        let mut iterations = out.iterations;
        let mut trace = out.trace.clone();
        if family.is_zero_inflated() && matches!(out.status, Status::Stalled | Status::MaxIter) {
            let (theta_em, em_trace) = em::run(&layout, data, &out.theta, &fixed, EM_MAX_ITER);
            if em_trace.last().copied().unwrap_or(f64::NEG_INFINITY) > out.eval.ll {
                em_used = true;
                iterations += em_trace.len();
                trace.extend(em_trace);
                let budget = optim::MAX_ITER.saturating_sub(out.iterations).max(20);
                let again = optim::maximize(f, &theta_em, &bounds, &fixed, budget);
                iterations += again.iterations;
                trace.extend(again.trace.iter().skip(1));
                out = again;
            }
        }
        self.finish(layout, &bounds, fixed, out.theta, out.eval, out.status, iterations, em_used, trace)
    }

    #[allow(clippy::too_many_arguments)]
    fn finish(
        &self,
        layout: Layout,
        bounds: &Bounds,
        fixed: Vec<bool>,
        theta: Vec<f64>,
        eval: Eval,
        status: Status,
        iterations: usize,
        em_used: bool,
        trace: Vec<f64>,
    ) -> FitResult {
        let p = layout.dim();
        let pinned: Vec<bool> = (0..p)
            .map(|i| !fixed[i] && (theta[i] <= bounds.lo[i] || theta[i] >= bounds.hi[i]))
            .collect();
        let active = optim::active_set(&theta, &eval.grad, &fixed, bounds);
        let gmax = active.iter().fold(0.0_f64, |m, &i| m.max(eval.grad[i].abs()));
        let mut converged = eval.ll.is_finite()
            && match status {
                Status::Converged => true,
                Status::Stalled => gmax < STALL_GRAD_TOL,
                Status::MaxIter | Status::BadStart => false,
            };

        // Observed information over every estimated parameter. Only when that
        // is singular are parameters stuck on a bound dropped, and they then
        // get infinite variance.
        let estimated: Vec<usize> = (0..p).filter(|&i| !fixed[i]).collect();
        let mut cov = DMatrix::from_element(p, p, 0.0);
        let inverse = |idx: &[usize]| {
            let k = idx.len();
            let info = DMatrix::from_fn(k, k, |r, c| -eval.hess[idx[r] * p + idx[c]]);
            let inv = info.cholesky()?.inverse();
            inv.diagonal()
                .iter()
                .all(|v| *v > 0.0 && v.is_finite())
                .then_some(inv)
        };
        let (idx, inv) = match inverse(&estimated) {
            Some(inv) => (estimated, Some(inv)),
            None => {
                let free: Vec<usize> = estimated.iter().copied().filter(|&i| !pinned[i]).collect();
                let inv = if free.len() < estimated.len() { inverse(&free) } else { None };
                (free, inv)
            }
        };
        match inv {
            Some(inv) => {
                for (r, &i) in idx.iter().enumerate() {
                    for (c, &j) in idx.iter().enumerate() {
                        cov[(i, j)] = inv[(r, c)];
                    }
                }
                for i in (0..p).filter(|&i| !fixed[i] && !idx.contains(&i)) {
                    cov[(i, i)] = f64::INFINITY;
                }
            }
            None => {
                converged = false;
                for &i in &idx {
                    for &j in &idx {
                        cov[(i, j)] = f64::NAN;
                    }
                }
            }
        }

        let n_free_params = p - fixed.iter().filter(|&&f| f).count();
        let loglik = eval.ll;
        let aic = if converged {
            -2.0 * loglik + 2.0 * n_free_params as f64
        } else {
            f64::INFINITY
        };
        FitResult {
            family: layout.family,
            params: ModelParams::from_theta(layout.family, &theta),
            theta,
            cov,
            loglik,
            aic,
            n_free_params,
            n_obs: self.data.n(),
            converged,
            iterations,
            em_used,
            fixed,
            pinned,
            loglik_trace: trace,
        }
    }

    fn all(&self) -> [FitResult; 4] {
        let pois = self.run(FamilyKind::Poisson, self.poisson_start());
        let nb = self.run(FamilyKind::NegBin, self.negbin_start(&pois));
        let zip = self.run_zi(FamilyKind::Zip, &pois);
        let zinb = self.run_zi(FamilyKind::Zinb, &nb);
        [pois, nb, zip, zinb]
    }

    fn one(&self, family: FamilyKind) -> FitResult {
        let pois = self.run(FamilyKind::Poisson, self.poisson_start());
        match family {
            FamilyKind::Poisson => pois,
            FamilyKind::NegBin => self.run(family, self.negbin_start(&pois)),
            FamilyKind::Zip => self.run_zi(family, &pois),
            FamilyKind::Zinb => {
                let nb = self.run(FamilyKind::NegBin, self.negbin_start(&pois));
                self.run_zi(family, &nb)
            }
        }
    }
}

/// Affine map between the caller's covariate and the centred, unit-variance
/// one the optimizer works on. Bounds, starts and step limits all act on
/// the standardized scale, so fits do not depend on where x is centred.
#[derive(Debug, Clone, Copy)]
struct Scale {
    center: f64,
    scale: f64,
}

impl Scale {
    fn of(data: &CountDataset) -> Self {
        let sd = data.x_sd();
        Self {
            center: data.x().iter().sum::<f64>() / data.n() as f64,
            scale: if sd > 0.0 && sd.is_finite() { sd } else { 1.0 },
        }
    }

    /// Column `k` of the map from standardized to original coordinates,
    /// as `(row, coefficient)` pairs.
    fn column(&self, layout: &Layout, k: usize) -> Vec<(usize, f64)> {
        let pairs = std::iter::once(0).chain(layout.zeta);
        for lo in pairs {
            if k == lo {
                return vec![(lo, 1.0)];
            }
            if k == lo + 1 {
                return vec![(lo, -self.center / self.scale), (lo + 1, 1.0 / self.scale)];
            }
        }
        vec![(k, 1.0)]
    }

    fn to_standard(self, layout: &Layout, theta: &[f64]) -> Vec<f64> {
        let mut t = theta.to_vec();
        for lo in std::iter::once(0).chain(layout.zeta) {
            t[lo] = theta[lo] + theta[lo + 1] * self.center;
            t[lo + 1] = theta[lo + 1] * self.scale;
        }
        t
    }

    fn restore(&self, mut f: FitResult) -> FitResult {
        let layout = Layout::of(f.family);
        let p = layout.dim();
        let cols: Vec<_> = (0..p).map(|k| self.column(&layout, k)).collect();
        let mut theta = vec![0.0; p];
        for (k, col) in cols.iter().enumerate() {
            for &(i, a) in col {
                theta[i] += a * f.theta[k];
            }
        }
        let mut cov = DMatrix::from_element(p, p, 0.0);
        for (k, ck) in cols.iter().enumerate() {
            for (l, cl) in cols.iter().enumerate() {
                let c = f.cov[(k, l)];
                if c == 0.0 {
                    continue;
                }
                for &(i, a) in ck {
                    for &(j, b) in cl {
                        cov[(i, j)] += a * b * c;
                    }
                }
            }
        }
        f.params = ModelParams::from_theta(f.family, &theta);
        f.theta = theta;
        f.cov = cov;
        f
    }
}

fn standardized<T>(data: &CountDataset, run: impl FnOnce(&Fitter, Scale) -> T) -> T {
    let sc = Scale::of(data);
    let z = data.affine(sc.center, sc.scale);
    run(&Fitter { data: &z, null: false }, sc)
}

/// Fits `family` to `data`. Never fails: problems are reported through
/// `converged = false`.
pub fn fit(family: FamilyKind, data: &CountDataset) -> FitResult {
    standardized(data, |f, sc| sc.restore(f.one(family)))
}

/// Fits `family` with its slope coefficients held at zero.
pub fn fit_null(family: FamilyKind, data: &CountDataset) -> FitResult {
    standardized(data, |f, sc| {
        let f = Fitter { null: true, ..*f };
        sc.restore(f.one(family))
    })
}

/// Fits all four families, in [`FamilyKind::ALL`] order, sharing the
/// starting-value chain.
pub fn fit_all(data: &CountDataset) -> [FitResult; 4] {
    standardized(data, |f, sc| f.all().map(|r| sc.restore(r)))
}

/// Fits `family` from explicit starting values in optimizer coordinates.
pub fn fit_from(family: FamilyKind, data: &CountDataset, start: &ModelParams) -> Result<FitResult> {
    start.validate(family)?;
    let layout = Layout::of(family);
    Ok(standardized(data, |f, sc| {
        sc.restore(f.run(family, sc.to_standard(&layout, &start.to_theta())))
    }))
}

/// `-2 loglik + 2k` for a converged fit, `+inf` otherwise.
pub fn aic(fit: &FitResult) -> f64 {
    if fit.converged {
        -2.0 * fit.loglik + 2.0 * fit.n_free_params as f64
    } else {
        f64::INFINITY
    }
}

pub fn wald_test(fit: &FitResult) -> TestOutcome {
    wald_test_with(fit, WaldForm::ChiSquare)
}

/// Wald test of all slope coefficients being zero: `beta_x` for Poisson and
/// NB2, `(beta_x, gamma_x)` jointly for the zero-inflated families.
pub fn wald_test_with(fit: &FitResult, form: WaldForm) -> TestOutcome {
    let layout = Layout::of(fit.family);
    let slopes = layout.slopes();
    let df = slopes.len() as u32;
    let df2 = fit.n_obs.saturating_sub(fit.n_free_params) as u32;
    let reference = match form {
        WaldForm::ChiSquare => Reference::ChiSquare { df },
        WaldForm::F => Reference::F { df1: df, df2 },
    };
    let fallback = || TestOutcome::fixed(f64::NAN, reference, FALLBACK_P, TestFlag::Fallback);
    if !fit.converged || slopes.iter().any(|&i| fit.fixed[i]) {
        return fallback();
    }
    // a zero-part coefficient dropped from the covariance leaves the slope
    // block conditional on it, which overstates its precision
    if let Some(z) = layout.zeta {
        if fit.cov[(z, z)].is_infinite() {
            return fallback();
        }
    }
    if form == WaldForm::F && df2 == 0 {
        return fallback();
    }

    let stat = if let [i] = slopes[..] {
        let var = fit.cov[(i, i)];
        if !(var > 0.0 && var.is_finite()) {
            return fallback();
        }
        fit.theta[i].powi(2) / var
    } else {
        let (i, j) = (slopes[0], slopes[1]);
        let (a, b, c) = (fit.cov[(i, i)], fit.cov[(i, j)], fit.cov[(j, j)]);
        let det = a * c - b * b;
        if !(det > 0.0 && det.is_finite() && a.is_finite() && c.is_finite()) {
            return fallback();
        }
        let (v1, v2) = (fit.theta[i], fit.theta[j]);
        (c * v1 * v1 - 2.0 * b * v1 * v2 + a * v2 * v2) / det
    };
    if !stat.is_finite() {
        return fallback();
    }
    match form {
        WaldForm::ChiSquare => TestOutcome::new(stat, reference),
        WaldForm::F => TestOutcome::new(stat / df as f64, reference),
    }
}

/// Likelihood-ratio test `2 (loglik_full - loglik_null)` of a fit against a
/// nested fit of the same family.
pub fn deviance_lrt(full: &FitResult, null: &FitResult) -> Result<TestOutcome> {
    if full.family != null.family {
        return Err(Error::Incompatible(format!(
            "{} vs {}",
            full.family, null.family
        )));
    }
    if full.n_obs != null.n_obs {
        return Err(Error::Incompatible("fits use different datasets".into()));
    }
    let df = full.n_free_params as i64 - null.n_free_params as i64;
    if df < 0 {
        return Err(Error::Incompatible(
            "null model has more free parameters than the full model".into(),
        ));
    }
    // identical models: statistic 0 and p = 1
    let reference = Reference::ChiSquare { df: df.max(1) as u32 };
    if !full.converged || !null.converged {
        return Ok(TestOutcome::fixed(f64::NAN, reference, FALLBACK_P, TestFlag::Fallback));
    }
    let stat = 2.0 * (full.loglik - null.loglik);
    if stat < 0.0 {
        return Ok(TestOutcome::fixed(0.0, reference, 1.0, TestFlag::Clamped));
    }
    Ok(TestOutcome::new(stat, reference))
}

/// Poisson deviance `2 Σ [y ln(y / λ) - (y - λ)]` of fitted means.
pub fn poisson_deviance(data: &CountDataset, lambda: &[f64]) -> f64 {
    2.0 * data
        .y()
        .iter()
        .zip(lambda)
        .map(|(&y, &lam)| {
            let y = y as f64;
            let t = if y > 0.0 { y * (y / lam).ln() } else { 0.0 };
            t - (y - lam)
        })
        .sum::<f64>()
}

#[cfg(test)]
mod tests;
