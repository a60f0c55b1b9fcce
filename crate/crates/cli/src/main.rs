//! `countsel`: fit count models to a `y,x` CSV, or run the selection
//! simulation over a scenario grid and write its reports.

use clap::{Parser, Subcommand};
use countsel_core::fit::{wald_test_with, FitResult};
use countsel_core::io::{read_dataset, write_dataset};
use countsel_core::report::{write_all, SimConfig};
use countsel_core::sim::{generate_dataset, run_grid};
use countsel_core::{fit, Error, FamilyKind, ModelSuite, PolicyKind, Result, WaldForm};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

const SEED_ENV: &str = "COUNTSEL_SEED";

#[derive(Parser)]
#[command(name = "countsel", version, about = "Count-model selection and post-selection inference")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Fit one or all four families to a CSV with columns `y,x`.
    Fit {
        #[arg(long)]
        input: PathBuf,
        /// pois, nb, zip or zinb; all four plus diagnostics when omitted.
        #[arg(long)]
        family: Option<FamilyKind>,
        #[arg(long, default_value_t = 0.05)]
        alpha: f64,
        /// chisq or f
        #[arg(long, default_value = "chisq")]
        wald_form: WaldForm,
    },
    /// Run the simulation grid described by a `key = value` config file.
    Simulate {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        reps: Option<u32>,
        /// Base seed; takes precedence over COUNTSEL_SEED and the config.
        #[arg(long)]
        seed: Option<u64>,
        /// Worker threads (default: all available cores).
        #[arg(long)]
        workers: Option<usize>,
        #[arg(long, default_value = "countsel-out")]
        out: PathBuf,
        /// Write a decision-tree report for each of these scenario ids.
        #[arg(long = "scenario-tree", num_args = 1..)]
        scenario_tree: Vec<u32>,
        /// Also write the simulated dataset for SCENARIO:REP as CSV.
        #[arg(long = "dump-dataset", value_name = "SCENARIO:REP", value_parser = parse_dump)]
        dump_dataset: Vec<(u32, u32)>,
        /// Suppress per-scenario progress on stderr.
        #[arg(long)]
        quiet: bool,
    },
}

fn parse_dump(s: &str) -> std::result::Result<(u32, u32), String> {
    let (a, b) = s.split_once(':').ok_or("expected SCENARIO:REP")?;
    let id = a.trim().parse().map_err(|_| format!("bad scenario id `{a}`"))?;
    let rep = b.trim().parse().map_err(|_| format!("bad replication index `{b}`"))?;
    Ok((id, rep))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let res = match cli.command {
        Command::Fit {
            input,
            family,
            alpha,
            wald_form,
        } => cmd_fit(&input, family, alpha, wald_form),
        Command::Simulate {
            config,
            reps,
            seed,
            workers,
            out,
            scenario_tree,
            dump_dataset,
            quiet,
        } => {
            let opts = SimulateOpts {
                reps,
                seed,
                workers,
                trees: scenario_tree,
                dumps: dump_dataset,
                quiet,
            };
            cmd_simulate(&config, &out, &opts)
        }
    };
    match res {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}

fn param_names(family: FamilyKind) -> Vec<&'static str> {
    let mut names = vec!["beta0", "beta_x"];
    if family.is_zero_inflated() {
        names.extend(["gamma0", "gamma_x"]);
    }
    if family.has_dispersion() {
        names.push("ln_nu");
    }
    names
}

fn print_fit(f: &FitResult, wald_form: WaldForm) {
    println!("== {} ==", f.family);
    println!(
        "converged: {}  iterations: {}  loglik: {:.6}  AIC: {:.4}",
        f.converged, f.iterations, f.loglik, f.aic
    );
    println!("{:<8} {:>12} {:>12}", "param", "estimate", "se");
    for (i, name) in param_names(f.family).into_iter().enumerate() {
        println!("{name:<8} {:>12.6} {:>12.6}", f.theta[i], f.se(i));
    }
    if let Some(nu) = f.params.nu {
        println!("nu = {nu:.6}");
    }
    let w = wald_test_with(f, wald_form);
    let flag = w.flag.map(|fl| format!(" ({fl:?})")).unwrap_or_default();
    println!("Wald H0 no x effect: W = {:.4}, df = {}, p = {:.6}{flag}", w.statistic, w.df().unwrap_or(0), w.p_value);
}

fn cmd_fit(input: &Path, family: Option<FamilyKind>, alpha: f64, wald_form: WaldForm) -> Result<()> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::Config(format!("alpha must lie in (0, 1), got {alpha}")));
    }
    let data = read_dataset(input)?;
    println!("n = {}, zeros = {}, mean y = {:.4}", data.n(), data.zero_count(), data.mean_y());
    if let Some(fam) = family {
        print_fit(&fit(fam, &data), wald_form);
        return Ok(());
    }
    let suite = ModelSuite::fit(&data, wald_form);
    for f in &suite.fits {
        print_fit(f, wald_form);
    }
    println!("== diagnostics ==");
    let dl = &suite.dean_lawless;
    println!("Dean-Lawless overdispersion: T = {:.4}, p = {:.6}", dl.statistic, dl.p_value);
    for (name, v) in [("Poisson vs ZIP", &suite.vuong_pois_zip), ("NB vs ZINB", &suite.vuong_nb_zinb)] {
        match v.flag {
            Some(flag) => println!("Vuong {name}: not run ({flag:?}), p = {:.6}", v.raw.p_value),
            None => println!(
                "Vuong {name}: V = {:.4} (AIC {:.4}, BIC {:.4}), p = {:.6}, favors {:?}",
                v.raw.statistic, v.aic.statistic, v.bic.statistic, v.raw.p_value, v.raw.favors
            ),
        }
    }
    println!("== selection (alpha = {alpha}) ==");
    for kind in PolicyKind::ALL {
        let t = match kind {
            PolicyKind::SevenStep => suite.seven_step(alpha),
            PolicyKind::LowestAic => suite.lowest_aic(alpha),
        };
        println!(
            "{kind}: chosen {}, p = {:.6}, reject H0: {}{}",
            t.chosen,
            t.final_p,
            t.rejected_h0,
            if t.fallback_used { " (fallback used)" } else { "" }
        );
    }
    Ok(())
}

struct SimulateOpts {
    reps: Option<u32>,
    seed: Option<u64>,
    workers: Option<usize>,
    trees: Vec<u32>,
    dumps: Vec<(u32, u32)>,
    quiet: bool,
}

fn env_seed() -> Result<Option<u64>> {
    match std::env::var(SEED_ENV) {
        Ok(v) => v
            .trim()
            .parse()
            .map(Some)
            .map_err(|_| Error::Config(format!("{SEED_ENV}=`{v}` is not an unsigned integer"))),
        Err(_) => Ok(None),
    }
}

fn cmd_simulate(config: &Path, out: &Path, opts: &SimulateOpts) -> Result<()> {
    let mut cfg = SimConfig::load(config)?;
    if let Some(r) = opts.reps {
        cfg.reps = r;
    }
    if let Some(s) = opts.seed.or(env_seed()?) {
        cfg.seed = s;
    }
    cfg.validate()?;
    let grid = cfg.grid()?;
    let find = |id: u32| {
        grid.iter()
            .find(|sc| sc.scenario_id == id)
            .ok_or_else(|| Error::Config(format!("scenario {id} is not in the grid (1..={})", grid.len())))
    };
    for &id in &opts.trees {
        find(id)?;
    }
    for &(id, rep) in &opts.dumps {
        if rep >= find(id)?.reps {
            return Err(Error::Config(format!("replication {rep} is out of range for scenario {id}")));
        }
    }
    std::fs::create_dir_all(out).map_err(|e| Error::Io {
        path: out.to_path_buf(),
        source: e,
    })?;

    let workers = opts
        .workers
        .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()));
    let quiet = opts.quiet;
    let total = grid.len();
    let tallies = run_grid(&grid, &cfg.settings, workers, |sc, t| {
        if !quiet {
            let r = t.rates();
            eprintln!(
                "[{}/{total}] n={} beta0={} phi={} omega={}: type-1 seven_step {:.4}, lowest_aic {:.4}",
                sc.scenario_id,
                sc.n,
                sc.beta0,
                sc.phi,
                sc.omega,
                r.policy(PolicyKind::SevenStep).unconditional_type1,
                r.policy(PolicyKind::LowestAic).unconditional_type1
            );
        }
    })?;
    let rows: Vec<_> = grid.iter().copied().zip(tallies.iter().map(|t| t.rates())).collect();
    let mut written = write_all(out, &grid, &rows, &opts.trees, cfg.settings.alpha)?;
    for &(id, rep) in &opts.dumps {
        let name = format!("dataset_{id}_{rep}.csv");
        write_dataset(out.join(&name), &generate_dataset(find(id)?, rep))?;
        written.push(name);
    }
    if !quiet {
        eprintln!("wrote {} files to {}", written.len(), out.display());
    }
    Ok(())
}
