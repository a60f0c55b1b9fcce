//! Simulation config files and the flat-file reports written from
//! aggregated results: results and manifest CSVs, Table-1 style rows,
//! decision-tree counts and per-panel plot data.

use crate::dist::{Dispersion, FamilyKind};
use crate::error::{Error, Result};
use crate::selection::{independence_leaf_percent, PolicyKind};
use crate::sim::{build_grid, AggregateRates, GridLevels, ScenarioConfig, SimSettings, DEFAULT_REPS, DEFAULT_SEED, DEFAULT_X_SD};
use std::fmt::Write as _;
use std::io::Write;
use std::path::Path;

/// Reps used when `full = true`.
pub const FULL_REPS: u32 = 15_000;

/// Contents of a `key = value` simulation config.
#[derive(Debug, Clone, PartialEq)]
pub struct SimConfig {
    pub levels: GridLevels,
    pub reps: u32,
    pub seed: u64,
    pub x_sd: f64,
    pub settings: SimSettings,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            levels: GridLevels::default(),
            reps: DEFAULT_REPS,
            seed: DEFAULT_SEED,
            x_sd: DEFAULT_X_SD,
            settings: SimSettings::default(),
        }
    }
}

impl SimConfig {
    /// Parses config text. Unset keys keep their defaults (the full grid at
    /// desk-scale reps). Lists are comma separated; `#` starts a comment.
    ///
    /// Keys: `n`, `beta0`, `omega`, `phi` (accepts `inf` and `1/3`), `reps`,
    /// `seed`, `x_sd`, `alpha`, `wald_form` (`chisq` or `f`), and `full`,
    /// which switches to 15000 reps unless `reps` is also given.
    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = SimConfig::default();
        let mut full = false;
        let mut reps_set = false;
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let bad = |msg: String| Error::Config(format!("line {}: {msg}", i + 1));
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| bad(format!("expected `key = value`, got `{line}`")))?;
            let (key, value) = (key.trim().to_ascii_lowercase(), value.trim());
            let num = |v: &str| v.parse::<f64>().map_err(|_| bad(format!("`{v}` is not a number")));
            match key.as_str() {
                "n" => {
                    cfg.levels.n = list(value)
                        .map(|v| v.parse::<usize>().map_err(|_| bad(format!("`{v}` is not a sample size"))))
                        .collect::<Result<_>>()?
                }
                "beta0" => cfg.levels.beta0 = list(value).map(num).collect::<Result<_>>()?,
                "omega" => cfg.levels.omega = list(value).map(num).collect::<Result<_>>()?,
                "phi" => {
                    cfg.levels.phi = list(value)
                        .map(|v| Dispersion::parse(v).map_err(|e| bad(e.to_string())))
                        .collect::<Result<_>>()?
                }
                "reps" => {
                    cfg.reps = value.parse().map_err(|_| bad(format!("`{value}` is not a rep count")))?;
                    reps_set = true;
                }
                "seed" => cfg.seed = value.parse().map_err(|_| bad(format!("`{value}` is not a seed")))?,
                "x_sd" => cfg.x_sd = num(value)?,
                "alpha" => cfg.settings.alpha = num(value)?,
                "wald_form" => cfg.settings.wald_form = value.parse().map_err(|e: Error| bad(e.to_string()))?,
                "full" => {
                    full = value
                        .parse()
                        .map_err(|_| bad(format!("`{value}` is not true/false")))?
                }
                other => return Err(bad(format!("unknown key `{other}`"))),
            }
        }
        if full && !reps_set {
            cfg.reps = FULL_REPS;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text)
    }

    pub fn validate(&self) -> Result<()> {
        if self.reps == 0 {
            return Err(Error::Config("reps must be positive".into()));
        }
        if !(self.settings.alpha > 0.0 && self.settings.alpha < 1.0) {
            return Err(Error::Config(format!("alpha must lie in (0, 1), got {}", self.settings.alpha)));
        }
        self.grid().map(|_| ())
    }

    pub fn grid(&self) -> Result<Vec<ScenarioConfig>> {
        build_grid(&self.levels, self.reps, self.seed, self.x_sd)
    }
}

fn list(s: &str) -> impl Iterator<Item = &str> {
    s.split(',').map(str::trim).filter(|v| !v.is_empty())
}

fn fmt_phi(phi: Dispersion) -> String {
    match phi {
        Dispersion::Infinite => "inf".into(),
        Dispersion::Finite(v) => format!("{v}"),
    }
}

fn opt(v: Option<f64>) -> String {
    v.map(|v| v.to_string()).unwrap_or_default()
}

fn scenario_fields(sc: &ScenarioConfig) -> Vec<String> {
    vec![
        sc.scenario_id.to_string(),
        sc.n.to_string(),
        sc.beta0.to_string(),
        fmt_phi(sc.phi),
        sc.omega.to_string(),
        sc.implied_family.short_name().to_string(),
    ]
}

pub const RESULTS_HEADER: [&str; 20] = [
    "scenario_id", "n", "beta0", "phi", "omega", "family", "policy", "sel_pois", "sel_nb", "sel_zip", "sel_zinb",
    "rej_pois", "rej_nb", "rej_zip", "rej_zinb", "type1", "mc_se", "fallback_rate", "reps", "seed",
];

pub const MANIFEST_HEADER: [&str; 6] = ["scenario_id", "n", "beta0", "phi", "omega", "family"];

/// One row per scenario and policy.
pub fn write_results(w: impl Write, rows: &[(ScenarioConfig, AggregateRates)]) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(RESULTS_HEADER)?;
    for (sc, rates) in rows {
        for kind in PolicyKind::ALL {
            let p = rates.policy(kind);
            let mut rec = scenario_fields(sc);
            rec.push(kind.name().into());
            rec.extend(p.selection_prob.iter().map(f64::to_string));
            rec.extend(p.conditional_reject.iter().map(|c| opt(*c)));
            rec.extend([
                p.unconditional_type1.to_string(),
                p.mc_se.to_string(),
                p.fallback_rate.to_string(),
                rates.reps.to_string(),
                sc.base_seed.to_string(),
            ]);
            out.write_record(&rec)?;
        }
    }
    out.flush().map_err(|e| Error::Csv(e.into()))
}

/// The frozen mapping from scenario id to grid cell.
pub fn write_manifest(w: impl Write, scenarios: &[ScenarioConfig]) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(MANIFEST_HEADER)?;
    for sc in scenarios {
        out.write_record(scenario_fields(sc))?;
    }
    out.flush().map_err(|e| Error::Csv(e.into()))
}

/// Table-1 columns, in the order they are printed.
const TABLE1_ORDER: [FamilyKind; 4] = [FamilyKind::Poisson, FamilyKind::Zip, FamilyKind::NegBin, FamilyKind::Zinb];

/// Five rows per scenario: each model's own rejection rate, then
/// conditional rejection and selection rates under each policy.
pub fn write_table1(w: impl Write, rows: &[(ScenarioConfig, AggregateRates)]) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    let mut header: Vec<&str> = MANIFEST_HEADER.to_vec();
    header.extend(["row", "pois", "zip", "nb", "zinb"]);
    out.write_record(&header)?;
    for (sc, rates) in rows {
        let seven = rates.policy(PolicyKind::SevenStep);
        let aic = rates.policy(PolicyKind::LowestAic);
        let lines: [(&str, [Option<f64>; 4]); 5] = [
            ("reject", rates.wald_reject.map(Some)),
            ("reject_given_selected_by_tests", seven.conditional_reject),
            ("selected_by_tests", seven.selection_prob.map(Some)),
            ("reject_given_lowest_aic", aic.conditional_reject),
            ("lowest_aic", aic.selection_prob.map(Some)),
        ];
        for (name, vals) in lines {
            let mut rec = scenario_fields(sc);
            rec.push(name.into());
            rec.extend(TABLE1_ORDER.iter().map(|f| opt(vals[f.index()])));
            out.write_record(&rec)?;
        }
    }
    out.flush().map_err(|e| Error::Csv(e.into()))
}

/// Decision-tree node counts per 100 datasets for both policies, with the
/// counts expected if every preliminary test rejected independently at
/// `alpha`.
pub fn tree_report(sc: &ScenarioConfig, rates: &AggregateRates, alpha: f64) -> String {
    let seven = rates.policy(PolicyKind::SevenStep);
    let aic = rates.policy(PolicyKind::LowestAic);
    let indep = independence_leaf_percent(alpha);
    let pct = |v: f64| 100.0 * v;
    let rej = |p: &crate::sim::PolicyRates, i: usize| pct(p.selection_prob[i] * p.conditional_reject[i].unwrap_or(0.0));
    let mut s = String::new();
    let _ = writeln!(
        s,
        "scenario {} (n={}, beta0={}, phi={}, omega={}; {}), {} datasets, alpha={}",
        sc.scenario_id,
        sc.n,
        sc.beta0,
        fmt_phi(sc.phi),
        sc.omega,
        sc.implied_family,
        rates.reps,
        alpha
    );
    let _ = writeln!(s, "counts per 100 datasets; (tests) [lowest AIC]");
    let _ = writeln!(
        s,
        "{:<34}{:>12}{:>12}{:>12}{:>12}{:>12}",
        "node", "independent", "(selected)", "(rejected)", "[selected]", "[rejected]"
    );
    let (p, nb, zip, zinb) = (0, 1, 2, 3);
    let node = |s: &mut String, name: &str, ind: f64, sel: f64| {
        let _ = writeln!(s, "{name:<34}{ind:>12.2}{sel:>12.2}");
    };
    let leaf = |s: &mut String, name: &str, i: usize| {
        let _ = writeln!(
            s,
            "{name:<34}{:>12.2}{:>12.2}{:>12.2}{:>12.2}{:>12.2}",
            indep[i],
            pct(seven.selection_prob[i]),
            rej(seven, i),
            pct(aic.selection_prob[i]),
            rej(aic, i)
        );
    };
    node(&mut s, "D&L not rejected", indep[p] + indep[zip], pct(seven.selection_prob[p] + seven.selection_prob[zip]));
    leaf(&mut s, "  Vuong not rejected: Poisson", p);
    leaf(&mut s, "  Vuong rejected: ZIP", zip);
    node(&mut s, "D&L rejected", indep[nb] + indep[zinb], pct(seven.selection_prob[nb] + seven.selection_prob[zinb]));
    leaf(&mut s, "  Vuong not rejected: NB", nb);
    leaf(&mut s, "  Vuong rejected: ZINB", zinb);
    let _ = writeln!(
        s,
        "{:<34}{:>12.2}{:>12.2}{:>12.2}{:>12.2}{:>12.2}",
        "total",
        indep.iter().sum::<f64>(),
        100.0,
        pct(seven.unconditional_type1),
        100.0,
        pct(aic.unconditional_type1)
    );
    s
}

/// The quantity plotted in one family of panels.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Figure {
    /// Wald rejection rate of the model that generated the data.
    CorrectModelType1,
    /// Seven-step probability of choosing the generating model.
    CorrectSelectionTests,
    SevenStepType1,
    /// Probability that the generating model has the lowest AIC.
    CorrectSelectionAic,
    LowestAicType1,
    DeanLawlessReject,
    VuongPoisZipReject,
    VuongNbZinbReject,
    PoissonType1,
}

impl Figure {
    pub const ALL: [Figure; 9] = [
        Figure::CorrectModelType1,
        Figure::CorrectSelectionTests,
        Figure::SevenStepType1,
        Figure::CorrectSelectionAic,
        Figure::LowestAicType1,
        Figure::DeanLawlessReject,
        Figure::VuongPoisZipReject,
        Figure::VuongNbZinbReject,
        Figure::PoissonType1,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Figure::CorrectModelType1 => "correct_type1",
            Figure::CorrectSelectionTests => "correct_selection_tests",
            Figure::SevenStepType1 => "type1_tests",
            Figure::CorrectSelectionAic => "correct_selection_aic",
            Figure::LowestAicType1 => "type1_aic",
            Figure::DeanLawlessReject => "dl_reject",
            Figure::VuongPoisZipReject => "vuong_pois_zip_reject",
            Figure::VuongNbZinbReject => "vuong_nb_zinb_reject",
            Figure::PoissonType1 => "poisson_type1",
        }
    }

    pub fn value(self, sc: &ScenarioConfig, r: &AggregateRates) -> f64 {
        let truth = sc.implied_family.index();
        match self {
            Figure::CorrectModelType1 => r.wald_reject[truth],
            Figure::CorrectSelectionTests => r.policy(PolicyKind::SevenStep).selection_prob[truth],
            Figure::SevenStepType1 => r.policy(PolicyKind::SevenStep).unconditional_type1,
            Figure::CorrectSelectionAic => r.policy(PolicyKind::LowestAic).selection_prob[truth],
            Figure::LowestAicType1 => r.policy(PolicyKind::LowestAic).unconditional_type1,
            Figure::DeanLawlessReject => r.dl_reject,
            Figure::VuongPoisZipReject => r.vuong_zip_reject,
            Figure::VuongNbZinbReject => r.vuong_zinb_reject,
            Figure::PoissonType1 => r.wald_reject[FamilyKind::Poisson.index()],
        }
    }
}

/// Compact level label for file names: `inf`, `2`, `0.5`, `0.333`.
pub fn level_label(v: f64) -> String {
    if v.is_infinite() {
        return "inf".into();
    }
    let s = format!("{v:.3}");
    s.trim_end_matches('0').trim_end_matches('.').to_string()
}

/// `panel_<figure>_<phi>_<omega>.csv` file name.
pub fn panel_file_name(figure: Figure, phi: Dispersion, omega: f64) -> String {
    format!("panel_{}_{}_{}.csv", figure.name(), level_label(phi.as_f64()), level_label(omega))
}

/// Plot data for one (φ, ω) panel: one row per (n, β₀) cell in grid order.
pub fn write_panel(w: impl Write, figure: Figure, cells: &[&(ScenarioConfig, AggregateRates)]) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(["n", "beta0", "rate"])?;
    for (sc, r) in cells {
        out.write_record([sc.n.to_string(), sc.beta0.to_string(), figure.value(sc, r).to_string()])?;
    }
    out.flush().map_err(|e| Error::Csv(e.into()))
}

fn create(dir: &Path, name: &str) -> Result<std::io::BufWriter<std::fs::File>> {
    let path = dir.join(name);
    std::fs::File::create(&path)
        .map(std::io::BufWriter::new)
        .map_err(|e| Error::io(path, e))
}

/// Writes every panel file for `rows` into `dir`, returning the file names.
pub fn write_panels(dir: &Path, rows: &[(ScenarioConfig, AggregateRates)]) -> Result<Vec<String>> {
    let mut panels: Vec<(Dispersion, f64)> = Vec::new();
    for (sc, _) in rows {
        if !panels.contains(&(sc.phi, sc.omega)) {
            panels.push((sc.phi, sc.omega));
        }
    }
    let mut names = Vec::new();
    for figure in Figure::ALL {
        for &(phi, omega) in &panels {
            let cells: Vec<_> = rows.iter().filter(|(sc, _)| sc.phi == phi && sc.omega == omega).collect();
            let name = panel_file_name(figure, phi, omega);
            write_panel(create(dir, &name)?, figure, &cells)?;
            names.push(name);
        }
    }
    Ok(names)
}

/// Writes `results.csv`, `manifest.csv`, `table1.csv`, the panel files and
/// `tree_<id>.txt` for each id in `trees` into `dir`.
pub fn write_all(
    dir: &Path,
    scenarios: &[ScenarioConfig],
    rows: &[(ScenarioConfig, AggregateRates)],
    trees: &[u32],
    alpha: f64,
) -> Result<Vec<String>> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    write_results(create(dir, "results.csv")?, rows)?;
    write_manifest(create(dir, "manifest.csv")?, scenarios)?;
    write_table1(create(dir, "table1.csv")?, rows)?;
    let mut names = vec!["results.csv".to_string(), "manifest.csv".into(), "table1.csv".into()];
    for &id in trees {
        let (sc, r) = rows
            .iter()
            .find(|(sc, _)| sc.scenario_id == id)
            .ok_or_else(|| Error::Config(format!("scenario {id} was not simulated")))?;
        let name = format!("tree_{id}.txt");
        let path = dir.join(&name);
        std::fs::write(&path, tree_report(sc, r, alpha)).map_err(|e| Error::io(path, e))?;
        names.push(name);
    }
    names.extend(write_panels(dir, rows)?);
    Ok(names)
}
