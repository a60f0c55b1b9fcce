#![allow(dead_code)]

use countsel_core::dist::{sample, DistParams, FamilyKind};
use countsel_core::rng::stream;
use countsel_core::CountDataset;
use rand_distr::{Distribution, Normal};

/// Dataset with `x ~ N(0, x_sd²)` and counts from `family` that do not
/// depend on x.
pub fn null_dataset(family: FamilyKind, params: DistParams, n: usize, x_sd: f64, seed: u64, rep: u32) -> CountDataset {
    let mut rng = stream(seed, 9_999, rep);
    let normal = Normal::new(0.0, x_sd).unwrap();
    let x: Vec<f64> = (0..n).map(|_| normal.sample(&mut rng)).collect();
    let y = sample(family, &params, n, &mut rng).unwrap();
    CountDataset::new(y, x).unwrap()
}

/// A valid parameter set for each family, over a small grid.
pub fn param_grid(family: FamilyKind) -> Vec<DistParams> {
    let lambdas = [0.05, 0.7, 1.6487, 4.5, 12.0, 20.0];
    let omegas = [0.05, 0.3, 0.9];
    let nus = [0.2, 1.0, 2.0, 15.0];
    let mut out = Vec::new();
    for &l in &lambdas {
        match family {
            FamilyKind::Poisson => out.push(DistParams::poisson(l)),
            FamilyKind::NegBin => out.extend(nus.iter().map(|&v| DistParams::negbin(l, v))),
            FamilyKind::Zip => out.extend(omegas.iter().map(|&w| DistParams::zip(l, w))),
            FamilyKind::Zinb => {
                for &w in &omegas {
                    out.extend(nus.iter().map(|&v| DistParams::zinb(l, w, v)));
                }
            }
        }
    }
    out
}
