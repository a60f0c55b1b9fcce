use super::*;
use crate::dist::{sample, DistParams};
use crate::stats::chi_square_sf;
use approx::assert_abs_diff_eq;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

fn ds(y: &[u64], x: &[f64]) -> CountDataset {
    CountDataset::new(y.to_vec(), x.to_vec()).unwrap()
}

fn fake_fit(family: FamilyKind, theta: Vec<f64>, cov: DMatrix<f64>) -> FitResult {
    let p = theta.len();
    FitResult {
        family,
        params: ModelParams::from_theta(family, &theta),
        theta,
        cov,
        loglik: -100.0,
        aic: 200.0 + 2.0 * p as f64,
        n_free_params: p,
        n_obs: 100,
        converged: true,
        iterations: 1,
        em_used: false,
        fixed: vec![false; p],
        pinned: vec![false; p],
        loglik_trace: vec![],
    }
}

fn simulate(family: FamilyKind, params: DistParams, n: usize, seed: u64) -> CountDataset {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let x: Vec<f64> = (0..n).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
    let y = sample(family, &params, n, &mut rng).unwrap();
    CountDataset::new(y, x).unwrap()
}

#[test]
fn dataset_validation() {
    assert!(CountDataset::new(vec![1], vec![0.0]).is_err());
    assert!(CountDataset::new(vec![1, 2], vec![0.0]).is_err());
    assert!(CountDataset::new(vec![1, 2], vec![0.0, f64::NAN]).is_err());
}

#[test]
fn poisson_loglik_unit_mean() {
    let d = ds(&[1, 1], &[3.0, -7.0]);
    let ll = loglik(FamilyKind::Poisson, &ModelParams::poisson(0.0, 0.0), &d).unwrap();
    assert_abs_diff_eq!(ll, -2.0, epsilon = 1e-15);
}

#[test]
fn zip_with_negligible_inflation_matches_poisson() {
    let d = ds(&[0, 1, 2, 0, 5, 3], &[-1.0, -0.5, 0.0, 0.5, 1.0, 1.5]);
    let p = loglik(FamilyKind::Poisson, &ModelParams::poisson(0.3, 0.2), &d).unwrap();
    let z = loglik(FamilyKind::Zip, &ModelParams::zip(0.3, 0.2, -30.0, 0.0), &d).unwrap();
    assert_abs_diff_eq!(p, z, epsilon = 1e-9);
    let exact = loglik(FamilyKind::Zip, &ModelParams::zip(0.3, 0.2, f64::NEG_INFINITY, 0.0), &d).unwrap();
    assert_eq!(p, exact);
}

#[test]
fn negbin_loglik_matches_extended_precision_sum() {
    let d = ds(&[0, 1, 2, 3, 4, 5], &[-1.0, -0.5, 0.0, 0.5, 1.0, 1.5]);
    let ll = loglik(FamilyKind::NegBin, &ModelParams::negbin(0.3, 0.2, 1.5), &d).unwrap();
    // mpmath, 40 digits
    assert_abs_diff_eq!(ll, -12.286019128407290380, epsilon = 1e-12);
}

#[test]
fn loglik_rejects_mismatched_params() {
    let d = ds(&[0, 1], &[0.0, 1.0]);
    assert!(loglik(FamilyKind::NegBin, &ModelParams::poisson(0.0, 0.0), &d).is_err());
    assert!(loglik(FamilyKind::Poisson, &ModelParams::zip(0.0, 0.0, 0.0, 0.0), &d).is_err());
    assert!(loglik(FamilyKind::NegBin, &ModelParams::negbin(0.0, 0.0, -1.0), &d).is_err());
}

#[test]
fn constant_covariate_is_unidentified() {
    let d = ds(&[0, 3, 1, 4, 2], &[0.0; 5]);
    let f = fit(FamilyKind::Poisson, &d);
    assert_abs_diff_eq!(f.params.beta0, 2.0f64.ln(), epsilon = 1e-8);
    assert!(!f.converged);
    assert_eq!(aic(&f), f64::INFINITY);
    assert_eq!(wald_test(&f).p_value, FALLBACK_P);
}

#[test]
fn saturated_two_point_poisson() {
    let d = ds(&[2, 4], &[0.0, 1.0]);
    let f = fit(FamilyKind::Poisson, &d);
    assert!(f.converged);
    assert_abs_diff_eq!(f.params.beta0, 2f64.ln(), epsilon = 1e-6);
    assert_abs_diff_eq!(f.params.beta_x, 2f64.ln(), epsilon = 1e-6);
}

#[test]
fn lrt_on_two_point_poisson_matches_deviances() {
    let d = ds(&[2, 4], &[0.0, 1.0]);
    let full = fit(FamilyKind::Poisson, &d);
    let null = fit_null(FamilyKind::Poisson, &d);
    assert!(null.converged);
    assert_abs_diff_eq!(null.params.beta0, 3f64.ln(), epsilon = 1e-8);
    let t = deviance_lrt(&full, &null).unwrap();
    // 2 [2 ln(2/3) + 4 ln(4/3)], mpmath
    assert_abs_diff_eq!(t.statistic, 0.67959614718158989, epsilon = 1e-8);
    assert_eq!(t.df(), Some(1));
    let d0 = poisson_deviance(&d, &null.lambda_hat(&d));
    let d1 = poisson_deviance(&d, &full.lambda_hat(&d));
    assert_abs_diff_eq!(d1, 0.0, epsilon = 1e-10);
    assert_abs_diff_eq!(d0 - d1, t.statistic, epsilon = 1e-8);
}

#[test]
fn lrt_edge_cases() {
    let d = ds(&[0, 2, 1, 5, 3, 0, 1], &[-1.0, 0.2, 0.5, 1.0, 0.1, -0.3, 0.0]);
    let f = fit(FamilyKind::Poisson, &d);
    let t = deviance_lrt(&f, &f).unwrap();
    assert_eq!(t.statistic, 0.0);
    assert_eq!(t.p_value, 1.0);

    let mut worse = f.clone();
    worse.loglik += 1e-9;
    let t = deviance_lrt(&f, &worse).unwrap();
    assert_eq!(t.flag, Some(TestFlag::Clamped));
    assert_eq!(t.statistic, 0.0);

    let nb = fit(FamilyKind::NegBin, &d);
    assert!(deviance_lrt(&nb, &f).is_err());

    let mut a = f.clone();
    a.loglik = 0.0;
    let mut b = fit_null(FamilyKind::Poisson, &d);
    b.loglik = -3.841458820694126 / 2.0;
    let t = deviance_lrt(&a, &b).unwrap();
    assert_abs_diff_eq!(t.p_value, 0.05, epsilon = 1e-3);
}

#[test]
fn aic_values() {
    let mut f = fake_fit(FamilyKind::Poisson, vec![0.0, 0.0], DMatrix::identity(2, 2));
    f.loglik = -100.0;
    f.n_free_params = 2;
    assert_eq!(aic(&f), 204.0);
    f.converged = false;
    assert_eq!(aic(&f), f64::INFINITY);
}

#[test]
fn wald_single_slope() {
    let f = fake_fit(FamilyKind::Poisson, vec![0.3, 0.0], DMatrix::identity(2, 2) * 0.04);
    let t = wald_test(&f);
    assert_eq!(t.statistic, 0.0);
    assert_eq!(t.p_value, 1.0);
    assert_eq!(t.df(), Some(1));

    let f = fake_fit(FamilyKind::NegBin, vec![0.3, 1.96 * 0.2, 0.0], DMatrix::identity(3, 3) * 0.04);
    let t = wald_test(&f);
    assert_abs_diff_eq!(t.p_value, 0.05, epsilon = 1e-3);
}

#[test]
fn wald_joint_slopes() {
    let a = (5.991464547107982f64 / 2.0).sqrt();
    let f = fake_fit(FamilyKind::Zip, vec![0.0, a, 0.0, a], DMatrix::identity(4, 4));
    let t = wald_test(&f);
    assert_eq!(t.df(), Some(2));
    assert_abs_diff_eq!(t.statistic, 2.0 * a * a, epsilon = 1e-12);
    assert_abs_diff_eq!(t.p_value, 0.05, epsilon = 1e-9);

    // correlated block: v' S^-1 v by hand
    let mut cov = DMatrix::identity(5, 5);
    cov[(1, 1)] = 2.0;
    cov[(3, 3)] = 1.0;
    cov[(1, 3)] = 0.5;
    cov[(3, 1)] = 0.5;
    let f = fake_fit(FamilyKind::Zinb, vec![0.0, 1.0, 0.0, 1.0, 0.0], cov);
    // S^-1 = [1, -0.5; -0.5, 2] / 1.75
    let expected = (1.0 - 1.0 + 2.0) / 1.75;
    assert_abs_diff_eq!(wald_test(&f).statistic, expected, epsilon = 1e-12);
}

#[test]
fn wald_f_form() {
    let f = fake_fit(FamilyKind::Zip, vec![0.0, 1.0, 0.0, 1.0], DMatrix::identity(4, 4));
    let t = wald_test_with(&f, WaldForm::F);
    assert_eq!(t.reference, Reference::F { df1: 2, df2: 96 });
    assert_abs_diff_eq!(t.statistic, 1.0);
    assert!(t.p_value > wald_test(&f).p_value);
}

#[test]
fn wald_fallbacks() {
    let mut f = fake_fit(FamilyKind::Poisson, vec![0.0, 1.0], DMatrix::identity(2, 2));
    f.converged = false;
    let t = wald_test(&f);
    assert_eq!(t.p_value, FALLBACK_P);
    assert_eq!(t.flag, Some(TestFlag::Fallback));

    let f = fake_fit(FamilyKind::Zip, vec![0.0, 1.0, 0.0, 1.0], DMatrix::from_element(4, 4, 1.0));
    assert_eq!(wald_test(&f).flag, Some(TestFlag::Fallback));
}

#[test]
fn score_matches_finite_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let d = simulate(FamilyKind::Zinb, DistParams::zinb(3.0, 0.3, 1.5), 80, 5);
    for family in FamilyKind::ALL {
        for _ in 0..20 {
            let theta: Vec<f64> = (0..family.n_free_params())
                .map(|_| rng.random_range(-1.0..1.0))
                .collect();
            let params = ModelParams::from_theta(family, &theta);
            let g = score(family, &params, &d).unwrap();
            for i in 0..theta.len() {
                let h = 1e-6 * theta[i].abs().max(1.0);
                let mut tp = theta.clone();
                let mut tm = theta.clone();
                tp[i] += h;
                tm[i] -= h;
                let lp = loglik(family, &ModelParams::from_theta(family, &tp), &d).unwrap();
                let lm = loglik(family, &ModelParams::from_theta(family, &tm), &d).unwrap();
                let fd = (lp - lm) / (2.0 * h);
                let rel = (fd - g[i]).abs() / g[i].abs().max(1.0);
                assert!(rel < 1e-5, "{family} i={i} analytic {} fd {fd}", g[i]);
            }
        }
    }
}

#[test]
fn zinb_recovers_generating_parameters() {
    let truth = ModelParams::zinb(1.5, 0.0, logit(0.2), 0.0, 2.0);
    let d = simulate(FamilyKind::Zinb, DistParams::zinb(1.5f64.exp(), 0.2, 2.0), 500, 2024);
    let f = fit(FamilyKind::Zinb, &d);
    assert!(f.converged);
    let ll_truth = loglik(FamilyKind::Zinb, &truth, &d).unwrap();
    assert!(f.loglik >= ll_truth);
    let t = truth.to_theta();
    for i in 0..5 {
        let z = (f.theta[i] - t[i]).abs() / f.se(i);
        assert!(z < 4.0, "param {i}: est {} truth {} se {}", f.theta[i], t[i], f.se(i));
    }
    assert!(f.cov.iter().zip(f.cov.transpose().iter()).all(|(a, b)| (a - b).abs() < 1e-10));
}

#[test]
fn fits_are_monotone_and_nested() {
    for seed in 0..20u64 {
        let d = simulate(FamilyKind::Zip, DistParams::zip(2.0, 0.15), 120, 100 + seed);
        let fits = fit_all(&d);
        for f in &fits {
            assert!(
                f.loglik_trace.windows(2).all(|w| w[1] >= w[0] - 1e-10),
                "{} seed {seed}",
                f.family
            );
        }
        let [p, nb, zip, zinb] = &fits;
        if fits.iter().all(|f| f.converged) {
            assert!(zip.loglik >= p.loglik - 1e-6, "seed {seed}");
            assert!(zinb.loglik >= nb.loglik - 1e-6, "seed {seed}");
            for f in &fits {
                for i in 0..f.theta.len() {
                    assert!(f.cov[(i, i)] > 0.0);
                }
            }
        }
    }
}

#[test]
fn zero_free_data_keeps_zi_fit_finite() {
    let d = ds(&[1, 2, 3, 1, 4, 2, 2, 5], &[0.1, -0.3, 0.5, 1.0, -1.0, 0.0, 0.2, 0.7]);
    let f = fit(FamilyKind::Zip, &d);
    assert!(f.theta.iter().all(|t| t.is_finite()));
    assert!(f.params.gamma0.unwrap() >= GAMMA0_MIN);
    let p = fit(FamilyKind::Poisson, &d);
    assert!(f.loglik >= p.loglik - 1e-6);
}

#[test]
fn wald_on_null_data_is_calibrated_roughly() {
    // 200 Poisson null datasets: rejection rate at 0.05 should be near 0.05
    let mut rejections = 0;
    for seed in 0..200u64 {
        let d = simulate(FamilyKind::Poisson, DistParams::poisson(3.0), 200, 7000 + seed);
        if wald_test(&fit(FamilyKind::Poisson, &d)).rejects(0.05) {
            rejections += 1;
        }
    }
    assert!((2..=25).contains(&rejections), "{rejections}");
    let _ = chi_square_sf(1.0, 1);
}
