mod common;

use common::param_grid;
use countsel_core::dist::{log_pmf, moments, sample, DistParams, FamilyKind};
use countsel_core::rng::stream;
use countsel_core::stats::chi_square_sf;

/// Upper summation limit with a negligible tail: far beyond the mean by
/// many standard deviations of the heaviest-tailed component.
fn tail_limit(p: &DistParams) -> u64 {
    let nu = p.nu.finite().unwrap_or(f64::INFINITY);
    let var = p.lambda + p.lambda * p.lambda / nu;
    (p.lambda + 60.0 * var.sqrt() + 200.0 + 50.0 * p.lambda / nu.min(1.0)).ceil() as u64
}

#[test]
fn pmfs_normalize() {
    for family in FamilyKind::ALL {
        for p in param_grid(family) {
            let k = tail_limit(&p);
            let total: f64 = (0..=k).map(|y| log_pmf(family, &p, y).unwrap().exp()).sum();
            assert!(
                (1.0 - 1e-10..=1.0 + 1e-12).contains(&total),
                "{family} {p:?}: total {total} (K = {k})"
            );
        }
    }
}

#[test]
fn zip_without_inflation_equals_poisson_exactly() {
    for lambda in [0.1, 1.0, 2.0, 7.3, 20.0] {
        for y in 0..=60 {
            let a = log_pmf(FamilyKind::Zip, &DistParams::zip(lambda, 0.0), y).unwrap();
            let b = log_pmf(FamilyKind::Poisson, &DistParams::poisson(lambda), y).unwrap();
            assert_eq!(a, b, "lambda {lambda} y {y}");
        }
    }
}

#[test]
fn huge_dispersion_approaches_poisson() {
    for lambda in [0.1, 1.0, 5.0, 12.5, 20.0] {
        for y in 0..=50 {
            let nb = log_pmf(FamilyKind::NegBin, &DistParams::negbin(lambda, 1e8), y).unwrap();
            let po = log_pmf(FamilyKind::Poisson, &DistParams::poisson(lambda), y).unwrap();
            assert!((nb - po).abs() < 1e-4, "lambda {lambda} y {y}: {nb} vs {po}");
        }
    }
}

/// Pearson goodness of fit of `n` draws, pooling the upper tail so every
/// cell has expected count at least 5.
fn gof_p_value(family: FamilyKind, p: &DistParams, n: usize, seed: u64) -> f64 {
    let mut rng = stream(seed, 1, 0);
    let draws = sample(family, p, n, &mut rng).unwrap();
    let max_y = *draws.iter().max().unwrap() as usize;
    let mut observed = vec![0u64; max_y + 1];
    for &d in &draws {
        observed[d as usize] += 1;
    }
    let probs: Vec<f64> = (0..=max_y as u64).map(|y| log_pmf(family, p, y).unwrap().exp()).collect();
    let mut cells: Vec<(f64, f64)> = Vec::new();
    let (mut o_acc, mut e_acc) = (0.0, 0.0);
    for y in 0..=max_y {
        o_acc += observed[y] as f64;
        e_acc += n as f64 * probs[y];
        if e_acc >= 5.0 {
            cells.push((o_acc, e_acc));
            o_acc = 0.0;
            e_acc = 0.0;
        }
    }
    // remaining mass, including everything above max_y, joins the last cell
    let tail_e = n as f64 * (1.0 - probs.iter().sum::<f64>()).max(0.0);
    let last = cells.last_mut().unwrap();
    last.0 += o_acc;
    last.1 += e_acc + tail_e;
    let stat: f64 = cells.iter().map(|(o, e)| (o - e) * (o - e) / e).sum();
    chi_square_sf(stat, (cells.len() - 1) as u32)
}

#[test]
fn samplers_match_pmfs() {
    let cases = [
        (FamilyKind::Poisson, DistParams::poisson(1.6487)),
        (FamilyKind::NegBin, DistParams::negbin(2.0, 1.0)),
        (FamilyKind::NegBin, DistParams::negbin(12.0, 0.5)),
        (FamilyKind::Zip, DistParams::zip(3.0, 0.2)),
        (FamilyKind::Zinb, DistParams::zinb(4.48, 0.1, 2.0)),
    ];
    for (i, (family, p)) in cases.iter().enumerate() {
        let pv = gof_p_value(*family, p, 100_000, 40 + i as u64);
        assert!(pv > 0.001, "{family} {p:?}: p = {pv}");
    }
}

#[test]
fn sample_moments_agree_with_formulas() {
    let n = 1_000_000;
    let cases = [
        (FamilyKind::Poisson, DistParams::poisson(0.5f64.exp())),
        (FamilyKind::NegBin, DistParams::negbin(2.0, 1.0)),
        (FamilyKind::Zip, DistParams::zip(5.0, 0.3)),
        (FamilyKind::Zinb, DistParams::zinb(2.0, 0.5, 2.0)),
    ];
    for (i, (family, p)) in cases.iter().enumerate() {
        let m = moments(*family, p).unwrap();
        let mut rng = stream(77, 2, i as u32);
        let draws = sample(*family, p, n, &mut rng).unwrap();
        let mean = draws.iter().map(|&v| v as f64).sum::<f64>() / n as f64;
        let var = draws.iter().map(|&v| (v as f64 - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
        let fourth = draws.iter().map(|&v| (v as f64 - mean).powi(4)).sum::<f64>() / n as f64;
        let se_mean = (m.variance / n as f64).sqrt();
        let se_var = ((fourth - var * var) / n as f64).sqrt();
        assert!((mean - m.mean).abs() < 5.0 * se_mean, "{family} mean {mean} vs {}", m.mean);
        assert!((var - m.variance).abs() < 5.0 * se_var, "{family} var {var} vs {}", m.variance);
        assert!(m.variance >= m.mean);
        assert!((m.dispersion_index - m.variance / m.mean).abs() < 1e-12);
    }
}

#[test]
fn generator_examples() {
    let mut rng = stream(3, 3, 0);
    let d = sample(FamilyKind::Poisson, &DistParams::poisson(0.5f64.exp()), 1_000_000, &mut rng).unwrap();
    let mean = d.iter().sum::<u64>() as f64 / 1e6;
    assert!((mean - 1.6487).abs() < 0.01);

    let d = sample(FamilyKind::NegBin, &DistParams::negbin(2.0, 1.0), 1_000_000, &mut rng).unwrap();
    let mean = d.iter().sum::<u64>() as f64 / 1e6;
    let var = d.iter().map(|&v| (v as f64 - mean).powi(2)).sum::<f64>() / (1e6 - 1.0);
    assert!((var / mean - 3.0).abs() < 0.05);

    let d = sample(FamilyKind::Zip, &DistParams::zip(5.0, 0.999999), 10, &mut rng).unwrap();
    assert!(d.iter().all(|&v| v == 0));
}
