//! EM over the latent structural-zero indicator for ZIP/ZINB.
//!
//! The E-step computes each zero's posterior probability of being
//! structural; the M-step maximizes a soft-label logistic likelihood for
//! the zero part and a weighted count likelihood for the count part.

use super::local::Order;
use super::model::{CountDataset, Layout};
use super::objective::{evaluate, structural_posterior, zero_part};
use super::optim::{maximize, Bounds};
use super::{GAMMA0_MIN, NU_MAX, NU_MIN};

const M_STEP_ITER: usize = 50;
const EM_REL_TOL: f64 = 1e-10;

/// Runs EM from `start`; returns the final vector and the log-likelihood
/// after each iteration.
pub(crate) fn run(
    layout: &Layout,
    data: &CountDataset,
    start: &[f64],
    fixed: &[bool],
    max_iter: usize,
) -> (Vec<f64>, Vec<f64>) {
    let z = layout.zeta.expect("EM needs a zero-inflated layout");
    let base = Layout::of(layout.family.base());
    let mut theta = start.to_vec();
    let mut ll = evaluate(layout, data, &theta, None, Order::Value).ll;
    let mut trace = Vec::new();

    let zero_bounds = Bounds {
        lo: vec![GAMMA0_MIN, f64::NEG_INFINITY],
        hi: vec![f64::INFINITY; 2],
    };
    let zero_fixed = [false, fixed[z + 1]];
    let mut count_bounds = Bounds::unbounded(base.dim());
    if let Some(u) = base.u {
        count_bounds.lo[u] = NU_MIN.ln();
        count_bounds.hi[u] = NU_MAX.ln();
    }
    let count_fixed: Vec<bool> = (0..base.dim())
        .map(|i| if i < 2 { fixed[i] } else { false })
        .collect();

    for _ in 0..max_iter {
        let tau = structural_posterior(layout, data, &theta);
        let weights: Vec<f64> = tau.iter().map(|t| 1.0 - t).collect();

        let gamma = maximize(
            |g: &[f64], _| zero_part(data, g, &tau),
            &theta[z..z + 2],
            &zero_bounds,
            &zero_fixed,
            M_STEP_ITER,
        );
        let mut count_start = vec![theta[0], theta[1]];
        if let Some(u) = layout.u {
            count_start.push(theta[u]);
        }
        let count = maximize(
            |t: &[f64], hess| {
                let order = if hess { Order::Hessian } else { Order::Value };
                evaluate(&base, data, t, Some(&weights), order)
            },
            &count_start,
            &count_bounds,
            &count_fixed,
            M_STEP_ITER,
        );

        let mut next = theta.clone();
        next[0] = count.theta[0];
        next[1] = count.theta[1];
        next[z] = gamma.theta[0];
        next[z + 1] = gamma.theta[1];
        if let (Some(u), Some(bu)) = (layout.u, base.u) {
            next[u] = count.theta[bu];
        }
        let ll_next = evaluate(layout, data, &next, None, Order::Value).ll;
        if !(ll_next >= ll) {
            break;
        }
        let gain = ll_next - ll;
        theta = next;
        ll = ll_next;
        trace.push(ll);
        if gain < EM_REL_TOL * ll.abs().max(1.0) {
            break;
        }
    }
    (theta, trace)
}
