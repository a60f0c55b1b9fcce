//! Monte Carlo harness: the scenario grid, one replication per
//! `(base_seed, scenario_id, rep_index)`, and count-based aggregation into
//! selection and rejection rates.

use crate::diagnostics::VuongOutcome;
use crate::dist::{sample, Dispersion, DistParams, FamilyKind};
use crate::error::{Error, Result};
use crate::fit::{CountDataset, WaldForm};
use crate::rng::stream;
use crate::selection::{ModelSuite, PolicyKind, SelectionTrace};
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;

pub const DEFAULT_REPS: u32 = 5000;
pub const DEFAULT_SEED: u64 = 20_240_101;
pub const DEFAULT_X_SD: f64 = 10.0;

/// Levels of the four grid factors.
#[derive(Debug, Clone, PartialEq)]
pub struct GridLevels {
    pub n: Vec<usize>,
    pub beta0: Vec<f64>,
    pub omega: Vec<f64>,
    pub phi: Vec<Dispersion>,
}

impl Default for GridLevels {
    /// The full 6 x 5 x 5 x 5 design.
    fn default() -> Self {
        Self {
            n: vec![50, 100, 250, 500, 1000, 2000],
            beta0: vec![0.5, 1.0, 1.5, 2.0, 2.5],
            omega: vec![0.0, 0.05, 0.1, 0.2, 0.5],
            phi: vec![
                Dispersion::Infinite,
                Dispersion::Finite(2.0),
                Dispersion::Finite(1.0),
                Dispersion::Finite(0.5),
                Dispersion::Finite(1.0 / 3.0),
            ],
        }
    }
}

impl GridLevels {
    pub fn len(&self) -> usize {
        self.n.len() * self.beta0.len() * self.omega.len() * self.phi.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn validate(&self) -> Result<()> {
        let empty = [
            ("n", self.n.is_empty()),
            ("beta0", self.beta0.is_empty()),
            ("omega", self.omega.is_empty()),
            ("phi", self.phi.is_empty()),
        ];
        if let Some((name, _)) = empty.iter().find(|(_, e)| *e) {
            return Err(Error::Config(format!("grid level list `{name}` is empty")));
        }
        if let Some(n) = self.n.iter().find(|&&n| n < 2) {
            return Err(Error::Config(format!("sample size {n} is below 2")));
        }
        if let Some(b) = self.beta0.iter().find(|b| !b.is_finite()) {
            return Err(Error::Config(format!("beta0 level {b} is not finite")));
        }
        if let Some(w) = self.omega.iter().find(|w| !(**w >= 0.0 && **w < 1.0)) {
            return Err(Error::Config(format!("omega level {w} is outside [0, 1)")));
        }
        if let Some(p) = self.phi.iter().find(|p| matches!(p, Dispersion::Finite(v) if !(*v > 0.0 && v.is_finite()))) {
            return Err(Error::Config(format!("phi level {p} is not positive")));
        }
        Ok(())
    }
}

/// One cell of the simulation grid.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScenarioConfig {
    pub scenario_id: u32,
    pub n: usize,
    pub beta0: f64,
    /// `nu / lambda`; infinite for equidispersed counts.
    pub phi: Dispersion,
    pub omega: f64,
    pub implied_family: FamilyKind,
    pub reps: u32,
    pub base_seed: u64,
    /// Standard deviation of the normal covariate.
    pub x_sd: f64,
}

pub fn implied_family(phi: Dispersion, omega: f64) -> FamilyKind {
    match (phi.is_infinite(), omega > 0.0) {
        (true, false) => FamilyKind::Poisson,
        (false, false) => FamilyKind::NegBin,
        (true, true) => FamilyKind::Zip,
        (false, true) => FamilyKind::Zinb,
    }
}

impl ScenarioConfig {
    pub fn lambda(&self) -> f64 {
        self.beta0.exp()
    }

    pub fn nu(&self) -> Dispersion {
        match self.phi {
            Dispersion::Infinite => Dispersion::Infinite,
            Dispersion::Finite(phi) => Dispersion::Finite(phi * self.lambda()),
        }
    }

    pub fn dist_params(&self) -> DistParams {
        DistParams {
            lambda: self.lambda(),
            omega: self.omega,
            nu: self.nu(),
        }
    }

    /// True when the cell matches `(n, beta0, phi, omega)` up to float noise.
    pub fn matches(&self, n: usize, beta0: f64, phi: Dispersion, omega: f64) -> bool {
        let close = |a: f64, b: f64| (a - b).abs() <= 1e-9 * a.abs().max(1.0);
        let phi_eq = match (self.phi, phi) {
            (Dispersion::Infinite, Dispersion::Infinite) => true,
            (Dispersion::Finite(a), Dispersion::Finite(b)) => close(a, b),
            _ => false,
        };
        self.n == n && close(self.beta0, beta0) && phi_eq && close(self.omega, omega)
    }
}

/// Cartesian product of the levels, with ids starting at 1 and `n` varying
/// fastest, then `beta0`, then `phi`, with `omega` slowest.
pub fn build_grid(levels: &GridLevels, reps: u32, base_seed: u64, x_sd: f64) -> Result<Vec<ScenarioConfig>> {
    levels.validate()?;
    if reps == 0 {
        return Err(Error::Config("reps must be at least 1".into()));
    }
    if !(x_sd > 0.0 && x_sd.is_finite()) {
        return Err(Error::Config(format!("x_sd must be positive, got {x_sd}")));
    }
    let mut out = Vec::with_capacity(levels.len());
    for &omega in &levels.omega {
        for &phi in &levels.phi {
            for &beta0 in &levels.beta0 {
                for &n in &levels.n {
                    out.push(ScenarioConfig {
                        scenario_id: out.len() as u32 + 1,
                        n,
                        beta0,
                        phi,
                        omega,
                        implied_family: implied_family(phi, omega),
                        reps,
                        base_seed,
                        x_sd,
                    });
                }
            }
        }
    }
    Ok(out)
}

/// Analysis settings shared by every replication.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimSettings {
    pub alpha: f64,
    pub wald_form: WaldForm,
}

impl Default for SimSettings {
    fn default() -> Self {
        Self {
            alpha: 0.05,
            wald_form: WaldForm::ChiSquare,
        }
    }
}

/// Draws the covariate then the response for one replication. Data are
/// generated under the null: neither mean nor zero probability depends on x.
pub fn generate_dataset(sc: &ScenarioConfig, rep_index: u32) -> CountDataset {
    let mut rng = stream(sc.base_seed, sc.scenario_id, rep_index);
    let normal = Normal::new(0.0, sc.x_sd).expect("x_sd validated");
    let x: Vec<f64> = (0..sc.n).map(|_| normal.sample(&mut rng)).collect();
    let y = sample(sc.implied_family, &sc.dist_params(), sc.n, &mut rng).expect("grid params validated");
    CountDataset::new(y, x).expect("n >= 2 and finite covariate")
}

/// Everything one replication contributes to the summaries.
#[derive(Debug, Clone, PartialEq)]
pub struct ReplicationRecord {
    pub scenario_id: u32,
    pub rep_index: u32,
    /// Indexed by [`PolicyKind::index`].
    pub traces: [SelectionTrace; 2],
    pub wald_p: [f64; 4],
    pub aic: [f64; 4],
    pub converged: [bool; 4],
    pub dl_p: f64,
    pub vuong_pois_zip: VuongOutcome,
    pub vuong_nb_zinb: VuongOutcome,
}

impl ReplicationRecord {
    pub fn trace(&self, policy: PolicyKind) -> &SelectionTrace {
        &self.traces[policy.index()]
    }
}

pub fn run_replication(sc: &ScenarioConfig, rep_index: u32, settings: &SimSettings) -> ReplicationRecord {
    let data = generate_dataset(sc, rep_index);
    let suite = ModelSuite::fit(&data, settings.wald_form);
    ReplicationRecord {
        scenario_id: sc.scenario_id,
        rep_index,
        traces: [suite.seven_step(settings.alpha), suite.lowest_aic(settings.alpha)],
        wald_p: std::array::from_fn(|i| suite.wald[i].p_value),
        aic: suite.aic_by_family(),
        converged: std::array::from_fn(|i| suite.fits[i].converged),
        dl_p: suite.dean_lawless.p_value,
        vuong_pois_zip: suite.vuong_pois_zip,
        vuong_nb_zinb: suite.vuong_nb_zinb,
    }
}

/// Integer counts for one policy.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct PolicyTally {
    pub selected: [u64; 4],
    pub rejected: [u64; 4],
    pub fallback: u64,
}

/// Integer counts over a set of replications. Merging is associative and
/// commutative, so the result does not depend on how work was split.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct Tally {
    pub reps: u64,
    pub policies: [PolicyTally; 2],
    /// Each family's own Wald test rejecting, regardless of selection.
    pub wald_rejected: [u64; 4],
    pub not_converged: [u64; 4],
    pub dl_rejected: u64,
    pub vuong_zip_rejected: u64,
    pub vuong_zinb_rejected: u64,
}

impl Tally {
    pub fn add(&mut self, rec: &ReplicationRecord, alpha: f64) {
        self.reps += 1;
        for (pt, tr) in self.policies.iter_mut().zip(&rec.traces) {
            let i = tr.chosen.index();
            pt.selected[i] += 1;
            pt.rejected[i] += tr.rejected_h0 as u64;
            pt.fallback += tr.fallback_used as u64;
        }
        for i in 0..4 {
            self.wald_rejected[i] += (rec.wald_p[i] < alpha) as u64;
            self.not_converged[i] += (!rec.converged[i]) as u64;
        }
        self.dl_rejected += (rec.dl_p < alpha) as u64;
        self.vuong_zip_rejected += rec.vuong_pois_zip.rejects_toward_zi(alpha) as u64;
        self.vuong_zinb_rejected += rec.vuong_nb_zinb.rejects_toward_zi(alpha) as u64;
    }

    pub fn merge(mut self, other: Tally) -> Tally {
        self.reps += other.reps;
        for (a, b) in self.policies.iter_mut().zip(&other.policies) {
            for i in 0..4 {
                a.selected[i] += b.selected[i];
                a.rejected[i] += b.rejected[i];
            }
            a.fallback += b.fallback;
        }
        for i in 0..4 {
            self.wald_rejected[i] += other.wald_rejected[i];
            self.not_converged[i] += other.not_converged[i];
        }
        self.dl_rejected += other.dl_rejected;
        self.vuong_zip_rejected += other.vuong_zip_rejected;
        self.vuong_zinb_rejected += other.vuong_zinb_rejected;
        self
    }

    pub fn rates(&self) -> AggregateRates {
        let r = self.reps as f64;
        let frac = |c: u64| if self.reps == 0 { 0.0 } else { c as f64 / r };
        let policy = |pt: &PolicyTally| {
            let selection_prob = pt.selected.map(frac);
            let conditional_reject: [Option<f64>; 4] = std::array::from_fn(|i| {
                (pt.selected[i] > 0).then(|| pt.rejected[i] as f64 / pt.selected[i] as f64)
            });
            let unconditional_type1 = frac(pt.rejected.iter().sum());
            PolicyRates {
                selection_prob,
                conditional_reject,
                unconditional_type1,
                mc_se: mc_se(unconditional_type1, self.reps.max(1)),
                fallback_rate: frac(pt.fallback),
            }
        };
        AggregateRates {
            reps: self.reps,
            policies: [policy(&self.policies[0]), policy(&self.policies[1])],
            wald_reject: self.wald_rejected.map(frac),
            non_convergence: self.not_converged.map(frac),
            dl_reject: frac(self.dl_rejected),
            vuong_zip_reject: frac(self.vuong_zip_rejected),
            vuong_zinb_reject: frac(self.vuong_zinb_rejected),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PolicyRates {
    pub selection_prob: [f64; 4],
    /// Rejection rate among replications that selected the family; `None`
    /// when it was never selected.
    pub conditional_reject: [Option<f64>; 4],
    pub unconditional_type1: f64,
    pub mc_se: f64,
    pub fallback_rate: f64,
}

impl PolicyRates {
    /// `Σ selection_prob · conditional_reject`, absent terms counting as 0.
    pub fn weighted_type1(&self) -> f64 {
        self.selection_prob
            .iter()
            .zip(&self.conditional_reject)
            .map(|(s, c)| s * c.unwrap_or(0.0))
            .sum()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AggregateRates {
    pub reps: u64,
    /// Indexed by [`PolicyKind::index`].
    pub policies: [PolicyRates; 2],
    pub wald_reject: [f64; 4],
    pub non_convergence: [f64; 4],
    pub dl_reject: f64,
    pub vuong_zip_reject: f64,
    pub vuong_zinb_reject: f64,
}

impl AggregateRates {
    pub fn policy(&self, kind: PolicyKind) -> &PolicyRates {
        &self.policies[kind.index()]
    }
}

pub fn aggregate<'a>(records: impl IntoIterator<Item = &'a ReplicationRecord>, alpha: f64) -> AggregateRates {
    let mut t = Tally::default();
    for r in records {
        t.add(r, alpha);
    }
    t.rates()
}

/// Monte Carlo standard error of a proportion.
pub fn mc_se(p: f64, reps: u64) -> f64 {
    (p * (1.0 - p) / reps as f64).sqrt()
}

fn pool(workers: usize) -> Result<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .map_err(|e| Error::Config(format!("cannot start worker pool: {e}")))
}

/// Runs all replications of one scenario on `workers` threads.
pub fn run_scenario(sc: &ScenarioConfig, settings: &SimSettings, workers: usize) -> Result<Tally> {
    let pool = pool(workers)?;
    Ok(pool.install(|| tally_scenario(sc, settings)))
}

fn tally_scenario(sc: &ScenarioConfig, settings: &SimSettings) -> Tally {
    (0..sc.reps)
        .into_par_iter()
        .map(|rep| {
            let mut t = Tally::default();
            t.add(&run_replication(sc, rep, settings), settings.alpha);
            t
        })
        .reduce(Tally::default, Tally::merge)
}

/// Runs every scenario, calling `progress` after each one finishes.
pub fn run_grid(
    scenarios: &[ScenarioConfig],
    settings: &SimSettings,
    workers: usize,
    mut progress: impl FnMut(&ScenarioConfig, &Tally),
) -> Result<Vec<Tally>> {
    let pool = pool(workers)?;
    let mut out = Vec::with_capacity(scenarios.len());
    for sc in scenarios {
        let t = pool.install(|| tally_scenario(sc, settings));
        progress(sc, &t);
        out.push(t);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn find(grid: &[ScenarioConfig], n: usize, beta0: f64, phi: Dispersion, omega: f64) -> u32 {
        grid.iter().find(|s| s.matches(n, beta0, phi, omega)).unwrap().scenario_id
    }

    #[test]
    fn default_grid_has_750_cells_and_known_labels() {
        let g = build_grid(&GridLevels::default(), 10, 1, 10.0).unwrap();
        assert_eq!(g.len(), 750);
        let inf = Dispersion::Infinite;
        let two = Dispersion::Finite(2.0);
        assert_eq!(find(&g, 250, 0.5, inf, 0.0), 3);
        assert_eq!(find(&g, 2000, 0.5, inf, 0.0), 6);
        assert_eq!(find(&g, 2000, 0.5, two, 0.0), 36);
        assert_eq!(find(&g, 50, 1.5, two, 0.0), 43);
        assert_eq!(find(&g, 100, 0.5, inf, 0.1), 302);
        assert_eq!(g[0].scenario_id, 1);
        assert_eq!(g[749].scenario_id, 750);
    }

    #[test]
    fn implied_families() {
        let levels = GridLevels {
            n: vec![50],
            beta0: vec![0.5],
            omega: vec![0.0, 0.5],
            phi: vec![Dispersion::Infinite],
        };
        let g = build_grid(&levels, 1, 1, 10.0).unwrap();
        assert_eq!(g.len(), 2);
        assert_eq!(g[0].implied_family, FamilyKind::Poisson);
        assert_eq!(g[1].implied_family, FamilyKind::Zip);
        assert_eq!(implied_family(Dispersion::Finite(2.0), 0.0), FamilyKind::NegBin);
        assert_eq!(implied_family(Dispersion::Finite(2.0), 0.1), FamilyKind::Zinb);
        let nb = ScenarioConfig {
            phi: Dispersion::Finite(2.0),
            ..g[0]
        };
        assert_abs_diff_eq!(nb.nu().as_f64(), 2.0 * 0.5f64.exp(), epsilon = 1e-15);
    }

    #[test]
    fn invalid_levels_rejected() {
        let mut l = GridLevels::default();
        l.omega.push(1.0);
        assert!(build_grid(&l, 1, 1, 10.0).is_err());
        let mut l = GridLevels::default();
        l.n.clear();
        assert!(build_grid(&l, 1, 1, 10.0).is_err());
        let mut l = GridLevels::default();
        l.n.push(1);
        assert!(build_grid(&l, 1, 1, 10.0).is_err());
        assert!(build_grid(&GridLevels::default(), 0, 1, 10.0).is_err());
        assert!(build_grid(&GridLevels::default(), 1, 1, 0.0).is_err());
    }

    #[test]
    fn mc_se_values() {
        assert_abs_diff_eq!(mc_se(0.05, 15000), 0.00178, epsilon = 5e-6);
        assert_eq!(mc_se(0.0, 123), 0.0);
        assert_abs_diff_eq!(mc_se(0.5, 100), 0.05, epsilon = 1e-15);
    }

    #[test]
    fn replication_is_deterministic() {
        let g = build_grid(&GridLevels::default(), 10, 99, 10.0).unwrap();
        let sc = &g[2];
        let a = run_replication(sc, 4, &SimSettings::default());
        let b = run_replication(sc, 4, &SimSettings::default());
        assert_eq!(format!("{a:?}"), format!("{b:?}"));
        let c = run_replication(sc, 5, &SimSettings::default());
        assert_ne!(generate_dataset(sc, 4).y(), generate_dataset(sc, 5).y());
        assert_eq!(c.rep_index, 5);
    }

    #[test]
    fn tally_weighted_identity() {
        let levels = GridLevels {
            n: vec![60],
            beta0: vec![1.0],
            omega: vec![0.2],
            phi: vec![Dispersion::Finite(1.0)],
        };
        let sc = build_grid(&levels, 40, 5, 10.0).unwrap()[0];
        let t = run_scenario(&sc, &SimSettings::default(), 1).unwrap();
        let rates = t.rates();
        assert_eq!(rates.reps, 40);
        for p in &rates.policies {
            assert_abs_diff_eq!(p.selection_prob.iter().sum::<f64>(), 1.0, epsilon = 1e-12);
            assert!((p.weighted_type1() - p.unconditional_type1).abs() <= 1e-10);
        }
        assert_eq!(run_scenario(&sc, &SimSettings::default(), 3).unwrap(), t);
    }
}
