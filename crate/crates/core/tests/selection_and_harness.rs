mod common;

use common::null_dataset;
use countsel_core::dist::{Dispersion, DistParams, FamilyKind};
use countsel_core::report::{write_manifest, write_results, SimConfig};
use countsel_core::selection::{select_lowest_aic, select_seven_step, ModelSuite, PolicyKind};
use countsel_core::sim::{aggregate, build_grid, generate_dataset, mc_se, run_grid, run_replication, GridLevels, PolicyTally, SimSettings, Tally};
use countsel_core::WaldForm;
use proptest::prelude::*;

fn family_and_params(k: u8, lambda: f64) -> (FamilyKind, DistParams) {
    match k % 4 {
        0 => (FamilyKind::Poisson, DistParams::poisson(lambda)),
        1 => (FamilyKind::NegBin, DistParams::negbin(lambda, 1.0)),
        2 => (FamilyKind::Zip, DistParams::zip(lambda, 0.2)),
        _ => (FamilyKind::Zinb, DistParams::zinb(lambda, 0.2, 1.0)),
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn seven_step_traces_follow_the_tree(seed in 0u64..100_000, k in 0u8..4, lambda in 0.5f64..6.0, alpha in 0.01f64..0.2) {
        let (family, p) = family_and_params(k, lambda);
        let d = null_dataset(family, p, 60, 10.0, seed, 2);
        let suite = ModelSuite::fit(&d, WaldForm::ChiSquare);
        for t in [suite.seven_step(alpha), select_seven_step(&d, alpha)] {
            prop_assert_eq!(t.rejected_h0, t.final_p < alpha);
            prop_assert!(t.vuong_pois_zip_p.is_some() != t.vuong_nb_zinb_p.is_some());
            let overdispersed = t.dl_p.unwrap() < alpha;
            prop_assert_eq!(overdispersed, t.vuong_nb_zinb_p.is_some());
            let allowed = if overdispersed {
                [FamilyKind::NegBin, FamilyKind::Zinb]
            } else {
                [FamilyKind::Poisson, FamilyKind::Zip]
            };
            prop_assert!(allowed.contains(&t.chosen));
            prop_assert!((0.0..=1.0).contains(&t.final_p));
        }
        let a = suite.lowest_aic(alpha);
        prop_assert_eq!(a.rejected_h0, a.final_p < alpha);
        prop_assert_eq!(a, select_lowest_aic(&d, alpha));
    }

    #[test]
    fn table1_identity_holds_for_any_counts(
        sel in prop::array::uniform4(0u64..500),
        frac in prop::array::uniform4(0.0f64..=1.0),
    ) {
        prop_assume!(sel.iter().sum::<u64>() > 0);
        let rejected: [u64; 4] = std::array::from_fn(|i| (sel[i] as f64 * frac[i]).floor() as u64);
        let pt = PolicyTally { selected: sel, rejected, fallback: 0 };
        let t = Tally { reps: sel.iter().sum(), policies: [pt, pt], ..Default::default() };
        for p in t.rates().policies {
            prop_assert!((p.weighted_type1() - p.unconditional_type1).abs() <= 1e-10);
            prop_assert!((p.selection_prob.iter().sum::<f64>() - 1.0).abs() < 1e-12);
            prop_assert!((p.mc_se - mc_se(p.unconditional_type1, t.reps)).abs() == 0.0);
        }
    }
}

#[test]
fn lowest_aic_choice_survives_covariate_shift() {
    let mut same = 0;
    for rep in 0..100 {
        let (family, p) = family_and_params(rep as u8, 2.0);
        let d = null_dataset(family, p, 100, 10.0, 41, rep);
        let a = select_lowest_aic(&d, 0.05).chosen;
        let b = select_lowest_aic(&d.shifted(25.0), 0.05).chosen;
        same += (a == b) as u32;
    }
    assert!(same >= 99, "{same} of 100");
}

fn small_grid(reps: u32) -> Vec<countsel_core::ScenarioConfig> {
    let levels = GridLevels {
        n: vec![50, 100],
        beta0: vec![0.5, 2.0],
        omega: vec![0.0, 0.1],
        phi: vec![Dispersion::Infinite, Dispersion::Finite(1.0)],
    };
    build_grid(&levels, reps, 99, 10.0).unwrap()
}

fn results_csv(workers: usize) -> Vec<u8> {
    let grid = small_grid(6);
    let tallies = run_grid(&grid, &SimSettings::default(), workers, |_, _| {}).unwrap();
    let rows: Vec<_> = grid.iter().copied().zip(tallies.iter().map(Tally::rates)).collect();
    let mut buf = Vec::new();
    write_results(&mut buf, &rows).unwrap();
    buf
}

#[test]
fn parallel_and_serial_runs_write_identical_bytes() {
    let serial = results_csv(1);
    assert_eq!(serial, results_csv(3));
    assert_eq!(serial, results_csv(1));
}

#[test]
fn aggregated_records_match_tally() {
    let grid = small_grid(8);
    let settings = SimSettings::default();
    for sc in grid.iter().take(4) {
        let records: Vec<_> = (0..sc.reps).map(|r| run_replication(sc, r, &settings)).collect();
        let direct = aggregate(&records, settings.alpha);
        let pooled = run_grid(std::slice::from_ref(sc), &settings, 2, |_, _| {}).unwrap()[0].rates();
        assert_eq!(direct, pooled);
        for kind in PolicyKind::ALL {
            let p = direct.policy(kind);
            assert!((p.weighted_type1() - p.unconditional_type1).abs() <= 1e-10);
        }
    }
}

#[test]
fn poisson_generator_mean() {
    let cfg = SimConfig::parse("n = 1000\nbeta0 = 0.5\nomega = 0\nphi = inf\nreps = 100").unwrap();
    let sc = cfg.grid().unwrap()[0];
    let mut total = 0u64;
    let mut count = 0usize;
    for rep in 0..100 {
        let d = generate_dataset(&sc, rep);
        total += d.y().iter().sum::<u64>();
        count += d.n();
    }
    assert_eq!(count, 100_000);
    assert!((total as f64 / count as f64 - 0.5f64.exp()).abs() < 0.05);
}

#[test]
fn one_cell_one_rep_gives_two_rows_and_manifest() {
    let cfg = SimConfig::parse("n = 50\nbeta0 = 1\nomega = 0.05\nphi = 2\nreps = 1").unwrap();
    let grid = cfg.grid().unwrap();
    let tallies = run_grid(&grid, &cfg.settings, 1, |_, _| {}).unwrap();
    let rows: Vec<_> = grid.iter().copied().zip(tallies.iter().map(Tally::rates)).collect();
    let mut buf = Vec::new();
    write_results(&mut buf, &rows).unwrap();
    let mut rdr = csv::Reader::from_reader(buf.as_slice());
    assert_eq!(rdr.headers().unwrap().len(), 20);
    assert_eq!(rdr.records().count(), 2);
    let mut buf = Vec::new();
    write_manifest(&mut buf, &grid).unwrap();
    assert_eq!(String::from_utf8(buf).unwrap(), "scenario_id,n,beta0,phi,omega,family\n1,50,1,2,0.05,zinb\n");
}
